//! Complex values at arbitrary precision, with a log-polar fallback for
//! moduli beyond the plain exponent range.

use num_complex::Complex64;
use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extlog::{ExtLogReal, DEFAULT_PREC, PLAIN_LOG_LIMIT};

#[derive(Clone, Debug, PartialEq)]
pub struct HpComplex {
    pub re: Float,
    pub im: Float,
}

fn two_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) * 2u32
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(a: &Float) -> Float {
    let prec = a.prec();
    let tp = two_pi(prec);
    let q = Float::with_val(prec, a / &tp).floor();
    let mut r = Float::with_val(prec, a - q * &tp);
    if r < 0 {
        r += &tp;
    }
    if r >= tp {
        r -= &tp;
    }
    r
}

impl HpComplex {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        Self {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_c64(z: Complex64, prec: u32) -> Self {
        Self::from_f64(z.re, z.im, prec)
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_f64(0.0, 0.0, prec)
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        Self::new(Float::with_val(p, &self.re + &o.re), Float::with_val(p, &self.im + &o.im))
    }

    pub fn sub(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        Self::new(Float::with_val(p, &self.re - &o.re), Float::with_val(p, &self.im - &o.im))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        Self::new(re, im)
    }

    pub fn div(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        let d = Float::with_val(p, o.re.square_ref()) + Float::with_val(p, o.im.square_ref());
        let re = (Float::with_val(p, &self.re * &o.re) + Float::with_val(p, &self.im * &o.im)) / &d;
        let im = (Float::with_val(p, &self.im * &o.re) - Float::with_val(p, &self.re * &o.im)) / &d;
        Self::new(re, im)
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        Self::new(Float::with_val(p, &self.re * s), Float::with_val(p, &self.im * s))
    }

    pub fn neg(&self) -> Self {
        Self::new(Float::with_val(self.re.prec(), -&self.re), Float::with_val(self.im.prec(), -&self.im))
    }

    pub fn mul_i(&self) -> Self {
        Self::new(Float::with_val(self.im.prec(), -&self.im), self.re.clone())
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        let (s, c) = Float::with_val(p, &self.im).sin_cos(Float::new(p));
        Self::new(Float::with_val(p, &m * &c), Float::with_val(p, &m * &s))
    }

    pub fn sin(&self) -> Self {
        let p = self.prec();
        let (s, c) = Float::with_val(p, &self.re).sin_cos(Float::new(p));
        let (sh, ch) = Float::with_val(p, &self.im).sinh_cosh(Float::new(p));
        Self::new(s * ch, c * sh)
    }

    pub fn cos(&self) -> Self {
        let p = self.prec();
        let (s, c) = Float::with_val(p, &self.re).sin_cos(Float::new(p));
        let (sh, ch) = Float::with_val(p, &self.im).sinh_cosh(Float::new(p));
        Self::new(c * ch, -(s * sh))
    }

    pub fn cosh(&self) -> Self {
        self.mul_i().cos()
    }

    pub fn sinh(&self) -> Self {
        // sinh z = -i sin(iz)
        let s = self.mul_i().sin();
        Self::new(s.im, Float::with_val(s.re.prec(), -&s.re))
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn log_abs(&self) -> Float {
        self.abs().ln()
    }

    /// Argument in `(-π, π]`.
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    pub fn ln(&self) -> Self {
        Self::new(self.log_abs(), self.arg())
    }

    pub fn powu(&self, n: u32) -> Self {
        let mut acc = Self::from_f64(1.0, 0.0, self.prec());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Binary exponent of the larger component, a proxy for `log2 |z|`.
    pub fn exp_bits(&self) -> i64 {
        let a = if self.re.is_zero() { i64::MIN } else { self.re.get_exp().unwrap_or(0) as i64 };
        let b = if self.im.is_zero() { i64::MIN } else { self.im.get_exp().unwrap_or(0) as i64 };
        a.max(b)
    }
}

/// A point in the plane, kept rectangular while the modulus is plain and
/// as log-modulus plus optional phase otherwise.
#[derive(Clone, Debug)]
pub enum ComplexPoint {
    Rect(HpComplex),
    Polar { logmod: ExtLogReal, arg: Option<Float> },
}

impl ComplexPoint {
    pub fn from_c64(z: Complex64) -> Self {
        ComplexPoint::Rect(HpComplex::from_c64(z, DEFAULT_PREC))
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        ComplexPoint::Rect(HpComplex::from_f64(re, im, prec))
    }

    /// Builds `exp(logmod + i arg)`, rectangular whenever that is representable.
    pub fn from_polar(logmod: ExtLogReal, arg: Option<Float>) -> Self {
        if let (ExtLogReal::Plain(l), Some(a)) = (&logmod, &arg) {
            if l.to_f64().abs() <= PLAIN_LOG_LIMIT {
                let p = l.prec().max(a.prec());
                let m = Float::with_val(p, l.exp_ref());
                let (s, c) = Float::with_val(p, a).sin_cos(Float::new(p));
                return ComplexPoint::Rect(HpComplex::new(Float::with_val(p, &m * &c), m * s));
            }
        }
        if logmod.is_saturated() && logmod.is_negative() {
            let p = logmod.prec();
            return ComplexPoint::Rect(HpComplex::zero(p));
        }
        ComplexPoint::Polar {
            logmod,
            arg: arg.map(|a| wrap_angle(&a)),
        }
    }

    pub fn prec(&self) -> u32 {
        match self {
            ComplexPoint::Rect(z) => z.prec(),
            ComplexPoint::Polar { logmod, arg } => logmod.prec().max(arg.as_ref().map_or(0, |a| a.prec())),
        }
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        match self {
            ComplexPoint::Rect(z) => ComplexPoint::Rect(z.with_prec(prec)),
            ComplexPoint::Polar { logmod, arg } => ComplexPoint::Polar {
                logmod: logmod.with_precision(prec),
                arg: arg.as_ref().map(|a| Float::with_val(prec, a)),
            },
        }
    }

    pub fn logmod(&self) -> ExtLogReal {
        match self {
            ComplexPoint::Rect(z) => {
                if z.is_zero() {
                    ExtLogReal::neg_inf()
                } else {
                    ExtLogReal::from_float(z.log_abs())
                }
            }
            ComplexPoint::Polar { logmod, .. } => logmod.clone(),
        }
    }

    /// Phase in `[0, 2π)`, or `None` when it could not be resolved.
    pub fn arg(&self) -> Option<Float> {
        match self {
            ComplexPoint::Rect(z) => Some(wrap_angle(&z.arg())),
            ComplexPoint::Polar { arg, .. } => arg.clone(),
        }
    }

    pub fn as_rect(&self) -> Option<&HpComplex> {
        match self {
            ComplexPoint::Rect(z) => Some(z),
            _ => None,
        }
    }

    /// Rectangular form if the modulus is plain and the phase known.
    pub fn to_rect(&self) -> Option<HpComplex> {
        match self {
            ComplexPoint::Rect(z) => Some(z.clone()),
            ComplexPoint::Polar { logmod, arg } => match (logmod, arg) {
                (ExtLogReal::Plain(l), Some(a)) if l.to_f64().abs() <= PLAIN_LOG_LIMIT => {
                    match ComplexPoint::from_polar(logmod.clone(), Some(a.clone())) {
                        ComplexPoint::Rect(z) => Some(z),
                        _ => None,
                    }
                }
                _ => None,
            },
        }
    }

    pub fn to_c64(&self) -> Option<Complex64> {
        let z = self.to_rect()?.to_c64();
        if z.re.is_finite() && z.im.is_finite() {
            Some(z)
        } else {
            None
        }
    }

    /// `|self - other|` in plain arithmetic; `None` for out-of-range points.
    pub fn distance(&self, other: &ComplexPoint) -> Option<Float> {
        let a = self.to_rect()?;
        let b = other.to_rect()?;
        Some(a.sub(&b).abs())
    }
}

impl PartialEq for ComplexPoint {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ComplexPoint::Rect(a), ComplexPoint::Rect(b)) => a.re == b.re && a.im == b.im,
            (ComplexPoint::Polar { logmod: l1, arg: a1 }, ComplexPoint::Polar { logmod: l2, arg: a2 }) => {
                l1 == l2 && a1 == a2
            }
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Rect { re: String, im: String },
    Polar { logmod: ExtLogReal, arg: Option<String> },
}

fn float_str(f: &Float) -> String {
    ExtLogReal::Plain(f.clone()).to_string()
}

fn parse_float(s: &str) -> Result<Float> {
    match s.parse::<ExtLogReal>()? {
        ExtLogReal::Plain(f) => Ok(f),
        _ => Err(Error::Parse(format!("component out of plain range: {s}"))),
    }
}

impl Serialize for ComplexPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = match self {
            ComplexPoint::Rect(z) => PointRepr::Rect {
                re: float_str(&z.re),
                im: float_str(&z.im),
            },
            ComplexPoint::Polar { logmod, arg } => PointRepr::Polar {
                logmod: logmod.clone(),
                arg: arg.as_ref().map(float_str),
            },
        };
        r.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match PointRepr::deserialize(d)? {
            PointRepr::Rect { re, im } => {
                let re = parse_float(&re).map_err(D::Error::custom)?;
                let im = parse_float(&im).map_err(D::Error::custom)?;
                Ok(ComplexPoint::Rect(HpComplex::new(re, im)))
            }
            PointRepr::Polar { logmod, arg } => {
                let arg = match arg {
                    Some(a) => Some(parse_float(&a).map_err(D::Error::custom)?),
                    None => None,
                };
                Ok(ComplexPoint::Polar { logmod, arg })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_identity() {
        let z = HpComplex::from_f64(1.0, std::f64::consts::PI, 200);
        let w = z.exp().to_c64();
        assert!((w.re + std::f64::consts::E).abs() < 1e-14);
        assert!(w.im.abs() < 1e-14);
    }

    #[test]
    fn trig_matches_num_complex() {
        let z = Complex64::new(0.7, -1.3);
        let h = HpComplex::from_c64(z, 128);
        for (a, b) in [
            (h.sin().to_c64(), z.sin()),
            (h.cos().to_c64(), z.cos()),
            (h.cosh().to_c64(), z.cosh()),
            (h.sinh().to_c64(), z.sinh()),
            (h.ln().to_c64(), z.ln()),
            (h.powu(5).to_c64(), z.powu(5)),
            (h.div(&HpComplex::from_f64(2.0, 1.0, 128)).to_c64(), z / Complex64::new(2.0, 1.0)),
        ] {
            assert!((a - b).norm() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn polar_roundtrip() {
        let p = ComplexPoint::from_polar(ExtLogReal::from_f64(2.0), Some(Float::with_val(128, 0.5)));
        let z = p.to_c64().unwrap();
        assert!((z.norm().ln() - 2.0).abs() < 1e-14);
        assert!((z.arg() - 0.5).abs() < 1e-14);
        let big = ComplexPoint::from_polar(ExtLogReal::from_f64(1e300).exp().ln().exp(), None);
        assert!(matches!(big, ComplexPoint::Polar { .. }));
    }

    #[test]
    fn wrap_angle_range() {
        for v in [-7.0, -0.1, 0.0, 3.0, 6.5, 100.0] {
            let w = wrap_angle(&Float::with_val(64, v)).to_f64();
            assert!((0.0..std::f64::consts::TAU).contains(&w));
            assert!(((w - v) / std::f64::consts::TAU).fract().abs() < 1e-12 || ((w - v) / std::f64::consts::TAU).fract().abs() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let p = ComplexPoint::from_f64(1.25, -3.5, 256);
        let s = serde_json::to_string(&p).unwrap();
        let q: ComplexPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(q.as_rect().unwrap(), p.as_rect().unwrap());
        let t = ComplexPoint::Polar { logmod: ExtLogReal::from_f64(5e7).exp(), arg: None };
        let s = serde_json::to_string(&t).unwrap();
        let u: ComplexPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(u.logmod(), t.logmod());
    }
}
