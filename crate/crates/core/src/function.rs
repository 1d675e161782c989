//! The entire-function abstraction and the built-in catalog.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::complex::{wrap_angle, ComplexPoint, HpComplex};
use crate::error::{Error, Result};
use crate::extlog::{ExtLogReal, PLAIN_LOG_LIMIT};

/// Declared presence of multiply connected Fatou components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McClass {
    HasMc,
    NoMc,
    Unknown,
}

/// Phase bits kept in reserve beyond the magnitude of an argument.
const PHASE_GUARD_BITS: i64 = 32;

pub trait EntireFunction: Send + Sync {
    fn id(&self) -> String;

    fn mc_declared(&self) -> McClass;

    fn eval_c64(&self, z: Complex64) -> Complex64;

    fn deriv_c64(&self, z: Complex64) -> Complex64;

    /// `log |f(z)|`, safe against overflow of `f(z)` itself.
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        self.eval_c64(z).norm().ln()
    }

    fn eval_hp(&self, z: &HpComplex) -> HpComplex;

    fn deriv_hp(&self, z: &HpComplex) -> HpComplex;

    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        self.eval_hp(z).log_abs()
    }

    /// Binary size of the quantity whose phase the evaluation depends on.
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        z.exp_bits()
    }

    /// Evaluation for inputs of large modulus, returning a log-polar value.
    fn log_eval(&self, _z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        None
    }

    fn exact_log_max_modulus(&self, _t: &ExtLogReal) -> Option<ExtLogReal> {
        None
    }

    fn exact_log_min_modulus(&self, _t: &ExtLogReal) -> Option<ExtLogReal> {
        None
    }

    /// For maps of the form `a·e^z + b`: `ln((w - b)/a)` as (real part, phase).
    /// Every preimage of `w` is that value plus `2πik`.
    fn periodic_log_preimage(&self, _w: &ComplexPoint) -> Option<Result<(ExtLogReal, Option<Float>)>> {
        None
    }
}

pub type FnRef = Arc<dyn EntireFunction>;

/// Evaluates `f(z)`, switching to the log-polar path when plain arithmetic
/// cannot represent the input or output faithfully.
pub fn evaluate(f: &dyn EntireFunction, z: &ComplexPoint) -> Result<ComplexPoint> {
    match z {
        ComplexPoint::Rect(h) => {
            let need = f.phase_bits(h);
            if need + PHASE_GUARD_BITS <= h.prec() as i64 {
                let w = f.eval_hp(h);
                if w.is_finite() {
                    return Ok(ComplexPoint::Rect(w));
                }
            }
            f.log_eval(z)
                .unwrap_or_else(|| Err(Error::RangeExceeded(format!("{} at |z| ~ 2^{need}", f.id()))))
        }
        ComplexPoint::Polar { arg: None, .. } => Err(Error::RangeExceeded("phase unresolved".into())),
        ComplexPoint::Polar { .. } => {
            if let Some(h) = z.to_rect() {
                if h.is_finite() {
                    return evaluate(f, &ComplexPoint::Rect(h));
                }
            }
            f.log_eval(z)
                .unwrap_or_else(|| Err(Error::RangeExceeded(format!("{} has no log-domain evaluation", f.id()))))
        }
    }
}

pub fn derivative(f: &dyn EntireFunction, z: &ComplexPoint) -> Result<ComplexPoint> {
    let h = z
        .to_rect()
        .ok_or_else(|| Error::RangeExceeded("derivative needs a plain-range point".into()))?;
    if f.phase_bits(&h) + PHASE_GUARD_BITS > h.prec() as i64 {
        return Err(Error::RangeExceeded("insufficient precision for derivative".into()));
    }
    let w = f.deriv_hp(&h);
    if w.is_finite() {
        Ok(ComplexPoint::Rect(w))
    } else {
        Err(Error::RangeExceeded("derivative overflow".into()))
    }
}

fn half_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) / 2u32
}

/// Reduces `x` modulo 2π when its absolute precision allows it.
fn resolvable_phase(x: &ExtLogReal, prec: u32) -> Option<Float> {
    match x {
        ExtLogReal::Plain(v) => {
            if v.is_zero() {
                return Some(Float::new(prec));
            }
            let bits = v.get_exp().unwrap_or(0) as i64;
            if bits + PHASE_GUARD_BITS <= v.prec() as i64 {
                Some(wrap_angle(&Float::with_val(prec.max(v.prec()), v)))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Real and imaginary parts of a point as extended reals.
fn parts(z: &ComplexPoint) -> Option<(ExtLogReal, ExtLogReal)> {
    match z {
        ComplexPoint::Rect(h) => Some((ExtLogReal::Plain(h.re.clone()), ExtLogReal::Plain(h.im.clone()))),
        ComplexPoint::Polar { logmod, arg: Some(a) } => {
            let p = logmod.prec().max(a.prec());
            let (s, c) = Float::with_val(p, a).sin_cos(Float::new(p));
            let m = logmod.exp();
            Some((&m * &ExtLogReal::Plain(c), &m * &ExtLogReal::Plain(s)))
        }
        _ => None,
    }
}

fn polar(logmod: ExtLogReal, arg: Option<Float>) -> ComplexPoint {
    ComplexPoint::from_polar(logmod, arg)
}

/// `e^{x+iy}` from extended-real parts.
fn exp_of_parts(x: &ExtLogReal, y: &ExtLogReal, prec: u32) -> ComplexPoint {
    polar(x.clone(), resolvable_phase(y, prec))
}

#[derive(Debug, Clone, Default)]
pub struct ExpFn;

impl EntireFunction for ExpFn {
    fn id(&self) -> String {
        "exp".into()
    }
    fn mc_declared(&self) -> McClass {
        McClass::NoMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z.exp()
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        z.exp()
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        z.re
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        z.exp()
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        z.exp()
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        z.re.clone()
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        if z.im.is_zero() {
            i64::MIN / 2
        } else {
            z.im.get_exp().unwrap_or(0) as i64
        }
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        let prec = z.prec();
        let (x, y) = parts(z)?;
        Some(Ok(exp_of_parts(&x, &y, prec)))
    }
    fn exact_log_max_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        Some(t.exp())
    }
    fn exact_log_min_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        Some(t.exp().neg())
    }
    fn periodic_log_preimage(&self, w: &ComplexPoint) -> Option<Result<(ExtLogReal, Option<Float>)>> {
        Some(Ok((w.logmod(), w.arg())))
    }
}

/// `a·e^z + b` with real coefficients.
#[derive(Debug, Clone)]
pub struct AffExp {
    pub a: f64,
    pub b: f64,
}

impl AffExp {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a != 0.0, "leading coefficient must be nonzero");
        Self { a, b }
    }
}

impl EntireFunction for AffExp {
    fn id(&self) -> String {
        format!("affexp:{},{}", self.a, self.b)
    }
    fn mc_declared(&self) -> McClass {
        McClass::NoMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z.exp() * self.a + self.b
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        z.exp() * self.a
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        let la = self.a.abs().ln() + z.re;
        let lb = if self.b == 0.0 { f64::NEG_INFINITY } else { self.b.abs().ln() };
        if la >= lb {
            // |a e^z| (1 + (b/a) e^{-z}) factored so nothing overflows.
            let ratio = Complex64::from_polar((lb - la).exp(), -z.im) * (self.b / self.a).signum();
            la + (Complex64::new(1.0, 0.0) + ratio).norm().ln()
        } else {
            let ratio = Complex64::from_polar((la - lb).exp(), z.im) * (self.a / self.b).signum();
            lb + (Complex64::new(1.0, 0.0) + ratio).norm().ln()
        }
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        let p = z.prec();
        let la = Float::with_val(p, self.a.abs().ln()) + &z.re;
        let lb = if self.b == 0.0 { f64::NEG_INFINITY } else { self.b.abs().ln() };
        if la.to_f64() > lb + (p as f64 + 10.0) * std::f64::consts::LN_2 {
            return la;
        }
        self.eval_hp(z).log_abs()
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        let p = z.prec();
        let e = z.exp().scale(&Float::with_val(p, self.a));
        HpComplex::new(e.re + self.b, e.im)
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        z.exp().scale(&Float::with_val(z.prec(), self.a))
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        ExpFn.phase_bits(z)
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        let prec = z.prec();
        let (x, y) = parts(z)?;
        let lv = x.add_f64(self.a.abs().ln());
        let mut yv = y;
        if self.a < 0.0 {
            yv = &yv + &ExtLogReal::pi(prec);
        }
        if self.b == 0.0 {
            return Some(Ok(exp_of_parts(&lv, &yv, prec)));
        }
        let lb = self.b.abs().ln();
        let gap = (prec as f64 + 10.0) * std::f64::consts::LN_2;
        if lv > ExtLogReal::with_prec(lb + gap, prec) {
            return Some(Ok(exp_of_parts(&lv, &yv, prec)));
        }
        if lv < ExtLogReal::with_prec(lb - gap, prec) {
            return Some(Ok(ComplexPoint::from_f64(self.b, 0.0, prec)));
        }
        // Moderate size: plain arithmetic is exact enough.
        let v = match exp_of_parts(&lv, &yv, prec) {
            ComplexPoint::Rect(h) => h,
            _ => return Some(Err(Error::RangeExceeded("affexp phase unresolved".into()))),
        };
        Some(Ok(ComplexPoint::Rect(HpComplex::new(v.re + self.b, v.im))))
    }
    fn periodic_log_preimage(&self, w: &ComplexPoint) -> Option<Result<(ExtLogReal, Option<Float>)>> {
        let prec = w.prec();
        let shifted = match w.to_rect() {
            Some(h) if h.is_finite() => {
                let u = HpComplex::new(Float::with_val(prec, &h.re - self.b), h.im.clone())
                    .scale(&Float::with_val(prec, 1.0 / self.a));
                if u.is_zero() {
                    return Some(Err(Error::Domain("asymptotic value has no preimage".into())));
                }
                ComplexPoint::Rect(u)
            }
            _ => {
                // Far from b the shift is invisible at working precision.
                let lm = w.logmod().add_f64(-self.a.abs().ln());
                let arg = w.arg().map(|a| {
                    if self.a < 0.0 {
                        wrap_angle(&(a + Float::with_val(prec, Constant::Pi)))
                    } else {
                        a
                    }
                });
                return Some(Ok((lm, arg)));
            }
        };
        Some(Ok((shifted.logmod(), shifted.arg())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SinFn;

/// `log|sin z|` for large `|Im z|` without overflow.
fn log_abs_sin_c64(z: Complex64) -> f64 {
    if z.im.abs() < 20.0 {
        return z.sin().norm().ln();
    }
    let y = z.im.abs();
    let x = if z.im > 0.0 { z.re } else { -z.re };
    let tail = Complex64::from_polar((-2.0 * y).exp(), 2.0 * x);
    y - std::f64::consts::LN_2 + (Complex64::new(1.0, 0.0) - tail).norm().ln()
}

fn log_abs_cosh_c64(z: Complex64) -> f64 {
    if z.re.abs() < 20.0 {
        return z.cosh().norm().ln();
    }
    let x = z.re.abs();
    let y = if z.re > 0.0 { z.im } else { -z.im };
    let tail = Complex64::from_polar((-2.0 * x).exp(), -2.0 * y);
    x - std::f64::consts::LN_2 + (Complex64::new(1.0, 0.0) + tail).norm().ln()
}

/// Dominant-term evaluation of `(e^{u} ± e^{-u})/2` once `|Re u|` is large.
/// `rot` is the phase offset contributed by the caller's normalization.
fn half_exp_dominant(re: &ExtLogReal, im: &ExtLogReal, prec: u32, rot: Float) -> Option<Result<ComplexPoint>> {
    let threshold = ExtLogReal::with_prec(((prec as f64) + 10.0) * std::f64::consts::LN_2, prec);
    if re.abs() < threshold {
        return None;
    }
    let (mag, phase) = if re.is_negative() {
        (re.neg(), im.clone())
    } else {
        (re.clone(), im.neg())
    };
    let _ = &phase;
    let logmod = mag.add_f64(-std::f64::consts::LN_2);
    let arg = if re.is_negative() {
        resolvable_phase(&im.neg(), prec).map(|a| wrap_angle(&(a + rot)))
    } else {
        resolvable_phase(im, prec).map(|a| wrap_angle(&(a + rot)))
    };
    Some(Ok(polar(logmod, arg)))
}

impl EntireFunction for SinFn {
    fn id(&self) -> String {
        "sin".into()
    }
    fn mc_declared(&self) -> McClass {
        McClass::NoMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z.sin()
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        z.cos()
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        log_abs_sin_c64(z)
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        z.sin()
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        let p = z.prec();
        let y = Float::with_val(p, z.im.abs_ref());
        if y.to_f64() > (p as f64 + 10.0) * std::f64::consts::LN_2 {
            return y - Float::with_val(p, Constant::Log2);
        }
        z.sin().log_abs()
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        z.cos()
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        if z.re.is_zero() {
            i64::MIN / 2
        } else {
            z.re.get_exp().unwrap_or(0) as i64
        }
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        // sin z = (e^{iz} - e^{-iz}) / 2i; with u = -iz = y - ix the dominant
        // term is ±e^{±u}/2 rotated by ±π/2.
        let prec = z.prec();
        let (x, y) = parts(z)?;
        if y.is_negative() {
            // sin z ≈ e^{iz}/(2i): modulus e^{-y}/2, phase x - π/2.
            let threshold = ExtLogReal::with_prec(((prec as f64) + 10.0) * std::f64::consts::LN_2, prec);
            if y.abs() < threshold {
                return None;
            }
            let logmod = y.neg().add_f64(-std::f64::consts::LN_2);
            let arg = resolvable_phase(&x, prec).map(|a| wrap_angle(&(a - half_pi(prec))));
            return Some(Ok(polar(logmod, arg)));
        }
        // y > 0: sin z ≈ -e^{-iz}/(2i) = (i/2) e^{y - ix}: phase π/2 - x.
        half_exp_dominant(&y.neg(), &x, prec, half_pi(prec))
            .map(|r| r.map(|p| p))
            .or(None)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CoshFn;

impl EntireFunction for CoshFn {
    fn id(&self) -> String {
        "cosh".into()
    }
    fn mc_declared(&self) -> McClass {
        McClass::NoMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z.cosh()
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        z.sinh()
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        log_abs_cosh_c64(z)
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        z.cosh()
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        let p = z.prec();
        let x = Float::with_val(p, z.re.abs_ref());
        if x.to_f64() > (p as f64 + 10.0) * std::f64::consts::LN_2 {
            return x - Float::with_val(p, Constant::Log2);
        }
        z.cosh().log_abs()
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        z.sinh()
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        if z.im.is_zero() {
            i64::MIN / 2
        } else {
            z.im.get_exp().unwrap_or(0) as i64
        }
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        let prec = z.prec();
        let (x, y) = parts(z)?;
        let threshold = ExtLogReal::with_prec(((prec as f64) + 10.0) * std::f64::consts::LN_2, prec);
        if x.abs() < threshold {
            return None;
        }
        let logmod = x.abs().add_f64(-std::f64::consts::LN_2);
        let phase = if x.is_negative() { y.neg() } else { y };
        Some(Ok(polar(logmod, resolvable_phase(&phase, prec))))
    }
}

/// `z·e^z`.
#[derive(Debug, Clone, Default)]
pub struct ZExpFn;

impl EntireFunction for ZExpFn {
    fn id(&self) -> String {
        "zexp".into()
    }
    fn mc_declared(&self) -> McClass {
        McClass::NoMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z * z.exp()
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        (z + 1.0) * z.exp()
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        z.norm().ln() + z.re
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        z.mul(&z.exp())
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        let p = z.prec();
        HpComplex::new(Float::with_val(p, &z.re + 1u32), z.im.clone()).mul(&z.exp())
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        z.log_abs() + &z.re
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        ExpFn.phase_bits(z)
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        let prec = z.prec();
        let (x, y) = parts(z)?;
        let logmod = &z.logmod() + &x;
        let arg = match (z.arg(), resolvable_phase(&y, prec)) {
            (Some(a), Some(b)) => Some(wrap_angle(&(a + b))),
            _ => None,
        };
        Some(Ok(polar(logmod, arg)))
    }
}

/// `c·z^d`, a zero-free harness on annuli around the origin.
#[derive(Debug, Clone)]
pub struct Monomial {
    pub c: f64,
    pub d: u32,
}

impl Monomial {
    pub fn new(c: f64, d: u32) -> Self {
        assert!(c > 0.0 && d >= 1);
        Self { c, d }
    }
}

impl EntireFunction for Monomial {
    fn id(&self) -> String {
        format!("monomial:{},{}", self.c, self.d)
    }
    /// Stand-in for the multiply connected branch, which no evaluable
    /// builtin exhibits.
    fn mc_declared(&self) -> McClass {
        McClass::HasMc
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        z.powu(self.d) * self.c
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        z.powu(self.d - 1) * (self.c * self.d as f64)
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        self.c.ln() + self.d as f64 * z.norm().ln()
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        z.powu(self.d).scale(&Float::with_val(z.prec(), self.c))
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        z.powu(self.d - 1).scale(&Float::with_val(z.prec(), self.c * self.d as f64))
    }
    fn phase_bits(&self, _z: &HpComplex) -> i64 {
        0
    }
    fn log_eval(&self, z: &ComplexPoint) -> Option<Result<ComplexPoint>> {
        let lm = z.logmod().mul_f64(self.d as f64).add_f64(self.c.ln());
        let arg = z.arg().map(|a| wrap_angle(&(a * self.d)));
        Some(Ok(polar(lm, arg)))
    }
    fn exact_log_max_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        Some(t.mul_f64(self.d as f64).add_f64(self.c.ln()))
    }
    fn exact_log_min_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        self.exact_log_max_modulus(t)
    }
}

/// `f(z·e^{-log_scale})`: the behaviour of `f` near `|z| = ρ` moved out to
/// `|z| = ρ·e^{log_scale}`.
#[derive(Clone)]
pub struct Rescaled {
    pub inner: FnRef,
    pub log_scale: f64,
}

impl Rescaled {
    pub fn new(inner: FnRef, log_scale: f64) -> Self {
        Self { inner, log_scale }
    }

    fn shrink_c64(&self, z: Complex64) -> Complex64 {
        z * (-self.log_scale).exp()
    }

    fn shrink_hp(&self, z: &HpComplex) -> HpComplex {
        let s = Float::with_val(z.prec(), -self.log_scale).exp();
        z.scale(&s)
    }
}

impl EntireFunction for Rescaled {
    fn id(&self) -> String {
        format!("rescaled:{}@{}", self.inner.id(), self.log_scale)
    }
    fn mc_declared(&self) -> McClass {
        self.inner.mc_declared()
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        self.inner.eval_c64(self.shrink_c64(z))
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        self.inner.deriv_c64(self.shrink_c64(z)) * (-self.log_scale).exp()
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        self.inner.log_abs_c64(self.shrink_c64(z))
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        self.inner.eval_hp(&self.shrink_hp(z))
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        let s = Float::with_val(z.prec(), -self.log_scale).exp();
        self.inner.deriv_hp(&self.shrink_hp(z)).scale(&s)
    }
    fn log_abs_hp(&self, z: &HpComplex) -> Float {
        self.inner.log_abs_hp(&self.shrink_hp(z))
    }
    fn phase_bits(&self, z: &HpComplex) -> i64 {
        self.inner.phase_bits(&self.shrink_hp(z))
    }
    fn exact_log_max_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        self.inner.exact_log_max_modulus(&t.add_f64(-self.log_scale))
    }
    fn exact_log_min_modulus(&self, t: &ExtLogReal) -> Option<ExtLogReal> {
        self.inner.exact_log_min_modulus(&t.add_f64(-self.log_scale))
    }
}

/// A truncated power series read from a coefficient file.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub coeffs: Vec<Complex64>,
}

impl Series {
    pub fn new(name: impl Into<String>, coeffs: Vec<Complex64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { name: name.into(), coeffs }
    }

    /// Parses lines `index re im`; `#` starts a comment.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut coeffs: Vec<Complex64> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("line {}: expected `index re im`", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let idx: usize = fields[0].parse().map_err(|_| bad())?;
            let re: f64 = fields[1].parse().map_err(|_| bad())?;
            let im: f64 = fields[2].parse().map_err(|_| bad())?;
            if coeffs.len() <= idx {
                coeffs.resize(idx + 1, Complex64::new(0.0, 0.0));
            }
            coeffs[idx] = Complex64::new(re, im);
        }
        if coeffs.is_empty() {
            return Err(Error::Parse("coefficient file has no entries".into()));
        }
        Ok(Self::new(name, coeffs))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
        Self::parse(name, &text)
    }

    fn horner_hp(&self, z: &HpComplex, coeffs: impl DoubleEndedIterator<Item = Complex64>) -> HpComplex {
        let p = z.prec();
        let mut acc = HpComplex::zero(p);
        for c in coeffs.rev() {
            acc = acc.mul(z).add(&HpComplex::from_c64(c, p));
        }
        acc
    }

    fn deriv_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().enumerate().skip(1).map(|(n, c)| c * n as f64).collect()
    }
}

impl EntireFunction for Series {
    fn id(&self) -> String {
        format!("series:{}", self.name)
    }
    fn mc_declared(&self) -> McClass {
        McClass::Unknown
    }
    fn eval_c64(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
    fn deriv_c64(&self, z: Complex64) -> Complex64 {
        self.deriv_coeffs().iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
    fn log_abs_c64(&self, z: Complex64) -> f64 {
        let v = self.eval_c64(z);
        if v.re.is_finite() && v.im.is_finite() {
            v.norm().ln()
        } else {
            self.log_abs_hp(&HpComplex::from_c64(z, 64)).to_f64()
        }
    }
    fn eval_hp(&self, z: &HpComplex) -> HpComplex {
        self.horner_hp(z, self.coeffs.iter().copied())
    }
    fn deriv_hp(&self, z: &HpComplex) -> HpComplex {
        let d = self.deriv_coeffs();
        self.horner_hp(z, d.into_iter())
    }
    fn phase_bits(&self, _z: &HpComplex) -> i64 {
        0
    }
}

/// The five transcendental builtins; `e^z + 10` stands in for `a·e^z + b`.
pub fn builtin_catalog() -> Vec<FnRef> {
    vec![
        Arc::new(ExpFn),
        Arc::new(AffExp::new(1.0, 10.0)),
        Arc::new(SinFn),
        Arc::new(CoshFn),
        Arc::new(ZExpFn),
    ]
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse(format!("expected two comma-separated numbers, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Resolves a function token: `exp`, `sin`, `cosh`, `zexp`, `affexp[:a,b]`,
/// `monomial:c,d` or `series:<path>`.
pub fn function_by_name(token: &str) -> Result<FnRef> {
    let (head, rest) = match token.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (token, None),
    };
    match (head, rest) {
        ("exp", None) => Ok(Arc::new(ExpFn)),
        ("sin", None) => Ok(Arc::new(SinFn)),
        ("cosh", None) => Ok(Arc::new(CoshFn)),
        ("zexp", None) => Ok(Arc::new(ZExpFn)),
        ("affexp", None) => Ok(Arc::new(AffExp::new(1.0, 10.0))),
        ("affexp", Some(p)) => {
            let (a, b) = parse_pair(p)?;
            if a == 0.0 {
                return Err(Error::Parse("affexp needs a nonzero leading coefficient".into()));
            }
            Ok(Arc::new(AffExp::new(a, b)))
        }
        ("monomial", Some(p)) => {
            let (c, d) = parse_pair(p)?;
            if c <= 0.0 || d < 1.0 || d.fract() != 0.0 {
                return Err(Error::Parse("monomial needs c > 0 and integer d >= 1".into()));
            }
            Ok(Arc::new(Monomial::new(c, d as u32)))
        }
        ("series", Some(path)) => Ok(Arc::new(Series::load(Path::new(path))?)),
        _ => Err(Error::Parse(format!("unknown function {token:?}"))),
    }
}

/// Log-modulus below which a point's phase is cheap to carry in plain form.
pub fn plain_range(logmod: &ExtLogReal) -> bool {
    logmod.to_f64().abs() <= PLAIN_LOG_LIMIT
}
