//! Maximum and minimum modulus on circles, the log-conjugated map `mu`,
//! and the derived slack quantities.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rug::float::Constant;
use rug::Float;
use serde::Serialize;

use crate::complex::HpComplex;
use crate::error::{Error, Result};
use crate::extlog::{ExtLogReal, DEFAULT_PREC};
use crate::function::EntireFunction;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_SAMPLES: usize = 1024;

/// Above this `log r` the f64 sweep loses too many digits.
const F64_LOG_LIMIT: f64 = 600.0;
/// Widest circle sample; larger radii need a closed form.
const SAMPLER_MAX_PREC: u32 = 1 << 14;
/// Local extrema refined per sweep.
const REFINED_BRACKETS: usize = 8;
const GOLDEN_ITERS: usize = 80;
/// A circle passes through a zero when the Newton step is this small relative to `r`.
const ZERO_REL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct RadialModuli {
    pub t: ExtLogReal,
    pub log_max: ExtLogReal,
    pub log_min: ExtLogReal,
    pub tol: f64,
    pub n_samples: usize,
    pub zero_on_circle: bool,
    pub exact: bool,
}

/// `log |f(r e^{iθ})|` sampler at one radius.
enum CircleSampler<'a> {
    Double { f: &'a dyn EntireFunction, r: f64 },
    Wide { f: &'a dyn EntireFunction, r: Float, prec: u32 },
}

impl<'a> CircleSampler<'a> {
    fn new(f: &'a dyn EntireFunction, t: &ExtLogReal) -> Result<Self> {
        let tf = match t {
            ExtLogReal::Plain(v) => v.to_f64(),
            _ => return Err(Error::RangeExceeded(format!("radius e^{t} has no sampled oracle"))),
        };
        if tf.abs() <= F64_LOG_LIMIT {
            let probe = f.log_abs_c64(Complex64::new(tf.exp(), 0.0));
            if !probe.is_nan() && probe < f64::INFINITY {
                return Ok(CircleSampler::Double { f, r: tf.exp() });
            }
        }
        // Argument reduction on a circle of radius e^t needs about t/ln 2 bits.
        let bits = tf.abs() / std::f64::consts::LN_2 + DEFAULT_PREC as f64;
        if bits > SAMPLER_MAX_PREC as f64 {
            return Err(Error::RangeExceeded(format!("sampling at log-radius {t} needs {bits:.0} bits")));
        }
        let prec = bits as u32;
        let tv = Float::with_val(prec, t.as_float().unwrap());
        Ok(CircleSampler::Wide { f, r: tv.exp(), prec })
    }

    fn log_abs(&self, theta: f64) -> f64 {
        match self {
            CircleSampler::Double { f, r } => f.log_abs_c64(Complex64::from_polar(*r, theta)),
            CircleSampler::Wide { f, r, prec } => {
                let th = Float::with_val(*prec, theta);
                let (s, c) = th.sin_cos(Float::new(*prec));
                let z = HpComplex::new(Float::with_val(*prec, r * &c), Float::with_val(*prec, r * &s));
                let v = f.log_abs_hp(&z);
                if v.is_nan() {
                    f64::NAN
                } else {
                    v.to_f64()
                }
            }
        }
    }

    /// Distance from `r e^{iθ}` to a nearby zero, as a multiple of `r`.
    fn newton_step_rel(&self, theta: f64) -> f64 {
        match self {
            CircleSampler::Double { f, r } => {
                let z = Complex64::from_polar(*r, theta);
                let d = f.deriv_c64(z);
                let v = f.eval_c64(z);
                if v == Complex64::new(0.0, 0.0) {
                    return 0.0;
                }
                (v / d).norm() / r
            }
            CircleSampler::Wide { f, r, prec } => {
                let th = Float::with_val(*prec, theta);
                let (s, c) = th.sin_cos(Float::new(*prec));
                let z = HpComplex::new(Float::with_val(*prec, r * &c), Float::with_val(*prec, r * &s));
                let v = f.eval_hp(&z);
                if v.is_zero() {
                    return 0.0;
                }
                let q = v.div(&f.deriv_hp(&z)).abs() / r;
                q.to_f64()
            }
        }
    }
}

fn golden_max(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_ITERS {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Grid sweep plus golden refinement of the strongest local extrema.
/// Returns `(θ, value)` of the best maximum of `sign·log|f|`.
fn sweep_extreme(sampler: &CircleSampler, values: &[f64], sign: f64) -> (f64, f64) {
    let n = values.len();
    let step = std::f64::consts::TAU / n as f64;
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { sign * v };
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = key(values[i]);
            v >= key(values[(i + n - 1) % n]) && v >= key(values[(i + 1) % n])
        })
        .collect();
    peaks.sort_by(|&a, &b| key(values[b]).total_cmp(&key(values[a])).then(a.cmp(&b)));
    peaks.truncate(REFINED_BRACKETS);

    let g = |th: f64| key(sampler.log_abs(th));
    let refined: Vec<(f64, f64)> = peaks
        .par_iter()
        .map(|&i| {
            let centre = i as f64 * step;
            let (th, v) = golden_max(&g, centre - step, centre + step);
            let grid_v = key(values[i]);
            if grid_v >= v {
                (centre, grid_v)
            } else {
                (th, v)
            }
        })
        .collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for (th, v) in refined {
        if v > best.1 {
            best = (th, v);
        }
    }
    (best.0, sign * best.1)
}

/// Sampled moduli, ignoring any closed-form overrides.
pub fn sample_moduli(f: &dyn EntireFunction, t: &ExtLogReal, tol: f64, n_samples: usize) -> Result<RadialModuli> {
    if t.is_saturated() {
        return Err(Error::RangeExceeded("saturated radius".into()));
    }
    let sampler = CircleSampler::new(f, t)?;
    let n = n_samples.max(8);
    let step = std::f64::consts::TAU / n as f64;
    let values: Vec<f64> = (0..n).into_par_iter().map(|i| sampler.log_abs(i as f64 * step)).collect();
    if values.iter().any(|v| *v == f64::INFINITY) {
        return Err(Error::RangeExceeded(format!("{} overflows on |z| = e^{t}", f.id())));
    }
    let (_, hi) = sweep_extreme(&sampler, &values, 1.0);
    let (th_lo, lo) = sweep_extreme(&sampler, &values, -1.0);
    let zero_on_circle = lo == f64::NEG_INFINITY || sampler.newton_step_rel(th_lo) < ZERO_REL;
    let log_min = if zero_on_circle {
        ExtLogReal::neg_inf()
    } else {
        ExtLogReal::from_f64(lo)
    };
    Ok(RadialModuli {
        t: t.clone(),
        log_max: ExtLogReal::from_f64(hi),
        log_min,
        tol,
        n_samples: n,
        zero_on_circle,
        exact: false,
    })
}

type MemoKey = (String, String, u64, usize);

fn memo() -> &'static Mutex<HashMap<MemoKey, RadialModuli>> {
    static MEMO: OnceLock<Mutex<HashMap<MemoKey, RadialModuli>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drops every memoized circle sample.
pub fn clear_memo() {
    memo().lock().unwrap().clear();
}

/// Moduli at `t`, from closed forms when the function provides them.
pub fn radial_moduli(f: &dyn EntireFunction, t: &ExtLogReal, tol: f64) -> Result<RadialModuli> {
    if t.is_saturated() {
        return Err(Error::RangeExceeded("saturated radius".into()));
    }
    if let (Some(hi), Some(lo)) = (f.exact_log_max_modulus(t), f.exact_log_min_modulus(t)) {
        return Ok(RadialModuli {
            t: t.clone(),
            log_max: hi,
            log_min: lo,
            tol: 0.0,
            n_samples: 0,
            zero_on_circle: false,
            exact: true,
        });
    }
    let key = (f.id(), t.to_string(), tol.to_bits(), DEFAULT_SAMPLES);
    if let Some(hit) = memo().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let m = sample_moduli(f, t, tol, DEFAULT_SAMPLES)?;
    memo().lock().unwrap().entry(key).or_insert_with(|| m.clone());
    Ok(m)
}

pub fn log_max_modulus(f: &dyn EntireFunction, t: &ExtLogReal, tol: f64) -> Result<ExtLogReal> {
    if let Some(v) = f.exact_log_max_modulus(t) {
        return Ok(v);
    }
    Ok(radial_moduli(f, t, tol)?.log_max)
}

/// `log m(e^t)`; a zero on the circle is reported as the negative sentinel.
pub fn log_min_modulus(f: &dyn EntireFunction, t: &ExtLogReal, tol: f64) -> Result<ExtLogReal> {
    if let Some(v) = f.exact_log_min_modulus(t) {
        return Ok(v);
    }
    Ok(radial_moduli(f, t, tol)?.log_min)
}

/// `mu(t) = log M(e^t)`.
pub fn mu(f: &dyn EntireFunction, t: &ExtLogReal) -> Result<ExtLogReal> {
    log_max_modulus(f, t, DEFAULT_TOL)
}

/// `mu` applied `n` times.
pub fn mu_iter(f: &dyn EntireFunction, t: &ExtLogReal, n: usize) -> Result<ExtLogReal> {
    let mut v = t.clone();
    for _ in 0..n {
        v = mu(f, &v)?;
    }
    Ok(v)
}

/// `1/sqrt(t)` for `t = log r > 1`.
pub fn delta(t: &ExtLogReal) -> Result<f64> {
    if *t <= ExtLogReal::from_f64(1.0) {
        return Err(Error::Domain(format!("delta needs log r > 1, got {t}")));
    }
    Ok(delta_ext(t).to_f64())
}

/// `1/sqrt(t)` without underflow for towered `t`.
pub fn delta_ext(t: &ExtLogReal) -> ExtLogReal {
    t.sqrt().recip()
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaEps {
    pub log_lambda: ExtLogReal,
    pub eps: f64,
}

/// `λ = (M(2r)/M(r) - 1)/2` in log form and the exceptional radius factor `ε`.
pub fn lambda_eps(f: &dyn EntireFunction, t: &ExtLogReal, c0: f64, c1: f64) -> Result<LambdaEps> {
    if c0 <= 1.0 || c1 <= 1.0 {
        return Err(Error::Domain("C0 and C1 must exceed 1".into()));
    }
    let prec = t.prec();
    let t2 = t + &ExtLogReal::ln2(prec);
    let gap = &mu(f, &t2)? - &mu(f, t)?;
    if !gap.is_positive() {
        return Err(Error::Domain(format!("M(2r) <= M(r) at t = {t}")));
    }
    let log_lambda = match gap.as_float() {
        Some(g) if g.to_f64() < 40.0 => {
            let e = Float::with_val(prec.max(g.prec()), g.exp_m1_ref()) / 2u32;
            ExtLogReal::from_float(e.ln())
        }
        _ => {
            // e^g - 1 = e^g to working precision.
            gap.add_f64(-std::f64::consts::LN_2)
        }
    };
    let expo = log_lambda.add_f64(c1.ln()).mul_f64(-1.0 / c0);
    let eps = (2.0 * c1) * expo.exp().to_f64();
    Ok(LambdaEps {
        log_lambda,
        eps: eps.max(0.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HadamardRow {
    pub t: f64,
    pub k: f64,
    /// `max(0, k·mu(t) - mu(k·t))`.
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    /// `mu(t + log 2) - mu(t)`.
    pub growth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HadamardReport {
    pub rows: Vec<HadamardRow>,
    pub growth: Vec<GrowthRow>,
    pub range_exceeded: Vec<f64>,
    /// Least grid `t` beyond which no violation, non-growth or convexity failure occurs.
    pub empirical_r1: Option<f64>,
    pub convexity_min: f64,
}

/// Empirical checks of `M(r^k) >= M(r)^k`, `M(2r)/M(r)` growth and convexity of `mu`
/// along a grid. Entries that overflow are listed, not fatal.
pub fn hadamard_check(f: &dyn EntireFunction, t_grid: &[f64], k_grid: &[f64], tol: f64) -> Result<HadamardReport> {
    if t_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::Precondition("empty grid".into()));
    }
    if k_grid.iter().any(|&k| k <= 1.0) {
        return Err(Error::Precondition("k must exceed 1".into()));
    }
    let muf = |t: f64| mu(f, &ExtLogReal::from_f64(t)).map(|v| v.to_f64());
    let mut rows = Vec::new();
    let mut growth = Vec::new();
    let mut range_exceeded = Vec::new();
    let mut bad_t: Vec<f64> = Vec::new();
    let mut mus: Vec<Option<f64>> = Vec::new();
    for &t in t_grid {
        let Ok(m) = muf(t) else {
            range_exceeded.push(t);
            mus.push(None);
            continue;
        };
        mus.push(Some(m).filter(|v| v.is_finite()));
        for &k in k_grid {
            match muf(k * t) {
                Ok(mk) if mk.is_finite() && m.is_finite() => {
                    let violation = (k * m - mk).max(0.0);
                    if violation > tol * mk.abs().max(1.0) {
                        bad_t.push(t);
                    }
                    rows.push(HadamardRow { t, k, violation });
                }
                _ => range_exceeded.push(k * t),
            }
        }
        match muf(t + std::f64::consts::LN_2) {
            Ok(m2) if m2.is_finite() && m.is_finite() => growth.push(GrowthRow { t, growth: m2 - m }),
            _ => range_exceeded.push(t + std::f64::consts::LN_2),
        }
    }
    for w in growth.windows(2) {
        if w[1].growth <= w[0].growth {
            bad_t.push(w[0].t);
        }
    }
    let mut convexity_min = f64::INFINITY;
    for i in 1..t_grid.len().saturating_sub(1) {
        if let (Some(a), Some(b), Some(c)) = (mus[i - 1], mus[i], mus[i + 1]) {
            let (h0, h1) = (t_grid[i] - t_grid[i - 1], t_grid[i + 1] - t_grid[i]);
            // Divided second difference, valid on uneven grids.
            let d2 = ((c - b) / h1 - (b - a) / h0) * 2.0 / (h0 + h1);
            let scaled = d2 / b.abs().max(1.0);
            if scaled < -tol {
                bad_t.push(t_grid[i]);
            }
            convexity_min = convexity_min.min(scaled);
        }
    }
    let last_bad = bad_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let empirical_r1 = t_grid.iter().cloned().find(|&t| t > last_bad);
    Ok(HadamardReport {
        rows,
        growth,
        range_exceeded,
        empirical_r1,
        convexity_min,
    })
}

/// `2π` at the precision of `t`.
pub fn two_pi(prec: u32) -> ExtLogReal {
    ExtLogReal::from_float(Float::with_val(prec, Constant::Pi) * 2u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{AffExp, ExpFn, Monomial, SinFn, ZExpFn};
    use proptest::prelude::*;

    fn x(v: f64) -> ExtLogReal {
        ExtLogReal::from_f64(v)
    }

    #[test]
    fn closed_form_values() {
        assert!((mu(&ExpFn, &x(2.0)).unwrap().to_f64() - 7.38905609893065).abs() < 1e-12);
        assert!((log_min_modulus(&ExpFn, &x(2.0), DEFAULT_TOL).unwrap().to_f64() + 7.38905609893065).abs() < 1e-12);
        let t = x(3f64.ln());
        let v = log_max_modulus(&ZExpFn, &t, DEFAULT_TOL).unwrap().to_f64();
        assert!((v - 4.0986122886681097).abs() < 1e-12, "{v}");
    }

    #[test]
    fn sine_moduli_match_oracle() {
        let t = x(2f64.ln());
        let m = radial_moduli(&SinFn, &t, DEFAULT_TOL).unwrap();
        assert!((m.log_max.to_f64() - 1.2883673726141681).abs() < 1e-10);
        assert!((m.log_min.to_f64() + 0.0950830360951606).abs() < 1e-10);
        assert!(!m.zero_on_circle);
    }

    #[test]
    fn zero_on_circle_is_flagged() {
        let m = radial_moduli(&SinFn, &x(std::f64::consts::PI.ln()), DEFAULT_TOL).unwrap();
        assert!(m.zero_on_circle);
        assert!(m.log_min.is_saturated() && m.log_min.is_negative());
    }

    #[test]
    fn triple_mu_of_one() {
        let v = mu_iter(&ExpFn, &x(1.0), 3).unwrap();
        assert!((v.to_f64() - 3814279.10476022059).abs() < 1e-6);
        let direct = x(1.0).exp().exp().exp();
        assert!((v.to_f64() - direct.to_f64()).abs() < 1e-6);
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta(&x(100.0)).unwrap(), 0.1);
        assert_eq!(delta(&x(6400.0)).unwrap(), 0.0125);
        assert_eq!(delta(&x(4.0)).unwrap(), 0.5);
        assert!(delta(&x(1.0)).is_err());
        let tiny = delta_ext(&x(1e300).exp());
        assert!(tiny.is_positive() && tiny < x(1e-300));
    }

    #[test]
    fn lambda_eps_for_exp() {
        let le = lambda_eps(&ExpFn, &x(10f64.ln()), std::f64::consts::E, std::f64::consts::E).unwrap();
        assert!((le.eps - 0.12263836541671944).abs() < 1e-12, "{}", le.eps);
        let lam = ((10f64.exp() - 1.0) / 2.0).ln();
        assert!((le.log_lambda.to_f64() - lam).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for r in [2.0f64, 3.0, 5.0, 10.0, 30.0] {
            let e = lambda_eps(&ExpFn, &x(r.ln()), 20.0, 50.0).unwrap().eps;
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn exp_sampled_matches_override() {
        for i in 1..=12 {
            let t = 0.5 * i as f64;
            let m = sample_moduli(&ExpFn, &x(t), DEFAULT_TOL, DEFAULT_SAMPLES).unwrap();
            assert!((m.log_max.to_f64() - t.exp()).abs() <= 1e-9 * t.exp());
            assert!((m.log_min.to_f64() + t.exp()).abs() <= 1e-9 * t.exp());
        }
    }

    #[test]
    fn wide_path_agrees_with_double_path() {
        let f = AffExp::new(1.0, 10.0);
        let m = sample_moduli(&f, &x(700.0), DEFAULT_TOL, 256).unwrap();
        assert!((m.log_max.to_f64() - 700f64.exp()).abs() <= 1e-12 * 700f64.exp());
        let s = sample_moduli(&SinFn, &x(650.0), DEFAULT_TOL, 256).unwrap();
        let expect = 650f64.exp() - std::f64::consts::LN_2;
        assert!((s.log_max.to_f64() - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn towers_need_overrides() {
        let big = x(1e9).exp();
        assert!(mu(&SinFn, &big).is_err());
        assert_eq!(mu(&ExpFn, &big).unwrap().tower_level(), 2);
    }

    #[test]
    fn hadamard_for_exp_and_sine() {
        let grid: Vec<f64> = (0..9).map(|i| 1.0 + 0.5 * i as f64).collect();
        let rep = hadamard_check(&ExpFn, &[5.0], &[2.0], 1e-9).unwrap();
        assert_eq!(rep.rows[0].violation, 0.0);
        assert!((rep.growth[0].growth - 5f64.exp()).abs() < 1e-9);
        let rep = hadamard_check(&SinFn, &grid, &[1.5], 1e-9).unwrap();
        assert!(rep.empirical_r1.is_some());
        let r1 = rep.empirical_r1.unwrap();
        assert!(rep.rows.iter().filter(|r| r.t >= r1).all(|r| r.violation == 0.0));
    }

    #[test]
    fn monomial_moduli_are_flat() {
        let f = Monomial::new(1.0, 8);
        let m = sample_moduli(&f, &x(2.0), DEFAULT_TOL, 64).unwrap();
        assert!((m.log_max.to_f64() - 16.0).abs() < 1e-12);
        assert!((m.log_min.to_f64() - 16.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn doubling_samples_is_stable(t in 0.3f64..4.0) {
            let a = sample_moduli(&SinFn, &x(t), DEFAULT_TOL, 512).unwrap();
            let b = sample_moduli(&SinFn, &x(t), DEFAULT_TOL, 1024).unwrap();
            let scale = a.log_max.to_f64().abs().max(1.0);
            prop_assert!((a.log_max.to_f64() - b.log_max.to_f64()).abs() <= 1e-9 * scale);
            if !a.zero_on_circle && !b.zero_on_circle {
                prop_assert!((a.log_min.to_f64() - b.log_min.to_f64()).abs() <= 1e-8 * scale);
            }
            prop_assert!(a.log_min <= a.log_max);
        }
    }
}
