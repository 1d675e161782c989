//! Points with a prescribed itinerary prefix, built by pulling a target back
//! through the chain annuli and checked by running the orbit forward.

use num_complex::Complex64;
use rug::float::{Constant, Round};
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::annuli::{align_partition, AnnuliChain};
use crate::complex::{wrap_angle, ComplexPoint, HpComplex};
use crate::covering::{newton_preimage, newton_refine_hp, Annulus};
use crate::error::{Error, Result};
use crate::extlog::{ExtLogReal, DEFAULT_PREC, PLAIN_LOG_LIMIT};
use crate::function::{evaluate, EntireFunction};
use crate::moduli::mu;
use crate::partition::{build_partition, image_logmod, Partition};
use crate::synthesis::{admissible_check, BoundKind, PlanMode, RatePlan, TransitionSystem};

/// Working precision is not raised past this many bits.
pub const MAX_PREC: u32 = 1 << 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizeOptions {
    /// Bound on the per-step distance to the target annulus.
    pub tol: f64,
    /// Bound on `|f(z) - w| / max(1, |w|)` for each pulled-back point.
    pub solve_tol: f64,
    /// Newton start grid is `seeds × seeds`.
    pub seeds: usize,
    /// Contractions of the target bands tried after the first attempt.
    pub retries: usize,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            solve_tol: 1e-12,
            seeds: 8,
            retries: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub point: ComplexPoint,
    pub requested: Vec<usize>,
    pub depth: usize,
    pub verified_len: usize,
    /// Distance of `f^n(z)` to `E_n` in log-modulus, relative to `max(1, t_in)`.
    pub residuals: Vec<f64>,
    pub log_moduli: Vec<ExtLogReal>,
    pub newton_stats: NewtonStats,
    pub precision: u32,
    /// Number of band contractions used.
    pub contractions: usize,
    pub failure: Option<String>,
}

impl RealizationResult {
    pub fn complete(&self) -> bool {
        self.verified_len == self.depth && self.failure.is_none()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Preimage {
    pub z: ComplexPoint,
    pub stats: NewtonStats,
}

fn two_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) * 2u32
}

/// Relative gap between two points; log-polar comparison when either is
/// out of plain range.
fn point_gap(a: &ComplexPoint, b: &ComplexPoint) -> f64 {
    if let (Some(x), Some(y)) = (a.to_rect(), b.to_rect()) {
        if x.is_finite() && y.is_finite() {
            let scale = y.abs().to_f64().max(1.0);
            return x.sub(&y).abs().to_f64() / scale;
        }
    }
    let (la, lb) = (a.logmod(), b.logmod());
    let scale = lb.abs().max(ExtLogReal::from_f64(1.0));
    let mod_gap = (&(&la - &lb).abs() / &scale).to_f64();
    let arg_gap = match (a.arg(), b.arg()) {
        (Some(x), Some(y)) => {
            let d = wrap_angle(&Float::with_val(x.prec().max(y.prec()), &x - &y)).to_f64();
            d.min(std::f64::consts::TAU - d)
        }
        _ => f64::INFINITY,
    };
    mod_gap.max(arg_gap)
}

/// Largest log-modulus at which a point is still written rectangularly.
fn rect_limit(prec: u32) -> f64 {
    (prec.saturating_sub(64)) as f64 * std::f64::consts::LN_2
}

/// Preimages `ln w + 2πik` for maps that are periodic in the imaginary direction.
fn branch_preimage(l: &ExtLogReal, phi: &Float, region: &Annulus, prec: u32) -> Result<ComplexPoint> {
    let tp = two_pi(prec);
    let mid = region.log_mid();
    let rect_ok = |t: &ExtLogReal| t.as_float().is_some_and(|v| v.to_f64() < rect_limit(prec));
    let landed = |z: ComplexPoint| -> Result<ComplexPoint> {
        if region.contains_closed(&z.logmod()) {
            Ok(z)
        } else {
            Err(Error::NoPreimageFound { seeds: 0 })
        }
    };
    // Modulus at the log-midpoint, when the imaginary part is representable.
    if let (Some(lf), true) = (l.as_float(), rect_ok(&mid)) {
        let lf = Float::with_val(prec, lf);
        let y = Float::with_val(prec, mid.as_float().unwrap()).exp();
        let l2 = Float::with_val(prec, lf.square_ref());
        let y2 = Float::with_val(prec, y.square_ref());
        if y2 > l2 {
            let im_abs = (y2 - l2).sqrt();
            let k = Float::with_val(prec, (im_abs - phi) / &tp).round();
            let im = Float::with_val(prec, phi + k * &tp);
            if let Ok(z) = landed(ComplexPoint::Rect(HpComplex::new(lf, im))) {
                return Ok(z);
            }
        }
    }
    // Otherwise the least |Im z| that reaches the band.
    let log_l = l.ln_abs();
    if log_l >= region.t_in {
        let k = -Float::with_val(prec, phi / &tp).round();
        let im = Float::with_val(prec, phi + k * &tp);
        return match l.as_float() {
            Some(lf) if log_l.as_float().is_some_and(|v| v.to_f64() < rect_limit(prec)) => {
                landed(ComplexPoint::Rect(HpComplex::new(Float::with_val(prec, lf), im)))
            }
            _ => {
                let arg = if l.is_negative() { Float::with_val(prec, Constant::Pi) } else { Float::new(prec) };
                landed(ComplexPoint::from_polar(log_l, Some(arg)))
            }
        };
    }
    let lf = l
        .as_float()
        .ok_or_else(|| Error::RangeExceeded("real part of the preimage is out of range".into()))?;
    if !rect_ok(&region.t_in) {
        return Err(Error::RangeExceeded("preimage modulus needs more precision".into()));
    }
    let lf = Float::with_val(prec, lf);
    let y = Float::with_val(prec, region.t_in.as_float().unwrap()).exp();
    let im_min = (y.square() - Float::with_val(prec, lf.square_ref())).sqrt();
    let k = Float::with_val(prec, (im_min - phi) / &tp).ceil();
    let im = Float::with_val(prec, phi + k * &tp);
    landed(ComplexPoint::Rect(HpComplex::new(lf, im)))
}

fn newton_in_region(f: &dyn EntireFunction, w: &ComplexPoint, region: &Annulus, seeds: usize, prec: u32, tol: f64) -> Result<Preimage> {
    let wc = w
        .to_c64()
        .ok_or_else(|| Error::RangeExceeded("Newton preimages need a double-range target".into()))?;
    let (a, b) = (region.t_in.to_f64(), region.t_out.to_f64());
    if !(a.is_finite() && b.is_finite() && b < 700.0) {
        return Err(Error::RangeExceeded("Newton preimages need a double-range region".into()));
    }
    let z0: Complex64 = newton_preimage(f, wc, a.exp(), b.exp(), seeds, 1e-13).ok_or(Error::NoPreimageFound { seeds })?;
    let wh = w.to_rect().unwrap().with_prec(prec);
    let mut stats = NewtonStats::default();
    let mut p = prec;
    for attempt in 0..2 {
        let iters = 8 << attempt;
        let z = newton_refine_hp(f, &wh.with_prec(p), &HpComplex::from_c64(z0, p), iters);
        stats.iterations += iters;
        let zp = ComplexPoint::Rect(z);
        let fz = evaluate(f, &zp)?;
        if point_gap(&fz, w) <= tol && region.contains_closed(&zp.logmod()) {
            return Ok(Preimage { z: zp, stats });
        }
        stats.restarts += 1;
        p *= 2;
    }
    Err(Error::NoPreimageFound { seeds })
}

/// A point `z` with `log|z|` in `region` and `f(z) = w` to within `tol`.
pub fn solve_preimage(
    f: &dyn EntireFunction,
    w: &ComplexPoint,
    region: &Annulus,
    seeds: usize,
    prec: u32,
    tol: f64,
) -> Result<Preimage> {
    let found = match f.periodic_log_preimage(w) {
        Some(pre) => {
            let (l, phi) = pre?;
            let phi = phi.ok_or_else(|| Error::RangeExceeded("phase of the target is unresolved".into()))?;
            let z = branch_preimage(&l, &Float::with_val(prec, &phi), region, prec)?;
            Preimage {
                z,
                stats: NewtonStats::default(),
            }
        }
        None => newton_in_region(f, w, region, seeds, prec, tol)?,
    };
    let fz = evaluate(f, &found.z)?;
    let gap = point_gap(&fz, w);
    if gap > tol || !region.contains_closed(&found.z.logmod()) {
        return Err(Error::NoPreimageFound { seeds });
    }
    Ok(found)
}

fn contract(a: &Annulus, factor: f64) -> Annulus {
    if factor >= 1.0 || a.is_degenerate() {
        return a.clone();
    }
    let mid = a.log_mid();
    Annulus {
        t_in: &mid - &(&mid - &a.t_in).mul_f64(factor),
        t_out: &mid + &(&a.t_out - &mid).mul_f64(factor),
    }
}

/// Bits needed to keep every rectangular orbit point's phase resolved.
fn working_prec(bands: &[Annulus]) -> u32 {
    let bits: f64 = bands
        .iter()
        .filter_map(|b| {
            let v = b.t_out.to_f64();
            (v.is_finite() && v > 0.0 && v < PLAIN_LOG_LIMIT).then_some(v / std::f64::consts::LN_2)
        })
        .sum();
    ((bits.ceil() as u64 + 256).clamp(DEFAULT_PREC as u64, MAX_PREC as u64)) as u32
}

struct Forward {
    verified: usize,
    residuals: Vec<f64>,
    log_moduli: Vec<ExtLogReal>,
    stop: Option<String>,
}

fn forward_check(
    f: &dyn EntireFunction,
    z0: &ComplexPoint,
    bands: &[Annulus],
    seq: &[usize],
    partition: Option<&Partition>,
    tol: f64,
) -> Forward {
    let mut out = Forward {
        verified: 0,
        residuals: Vec::new(),
        log_moduli: Vec::new(),
        stop: None,
    };
    let mut z = z0.clone();
    let mut logmod = z.logmod();
    for n in 0..bands.len() {
        let r = bands[n].rel_distance(&logmod);
        out.residuals.push(r);
        out.log_moduli.push(logmod.clone());
        if r > tol {
            out.stop = Some(format!("step {n} lies {r:e} outside its annulus"));
            return out;
        }
        if let Some(p) = partition {
            match p.annulus_index(&logmod) {
                Ok(s) if s == seq[n] => {}
                Ok(s) => {
                    out.stop = Some(format!("step {n} is in cell {s}, not {}", seq[n]));
                    return out;
                }
                Err(e) => {
                    out.stop = Some(format!("step {n}: {e}"));
                    return out;
                }
            }
        }
        out.verified = n + 1;
        if n + 1 == bands.len() {
            break;
        }
        match evaluate(f, &z) {
            Ok(w) => {
                logmod = image_logmod(f, &z, &w);
                z = w;
            }
            Err(e) => {
                out.stop = Some(format!("orbit stops after step {n}: {e}"));
                return out;
            }
        }
    }
    out
}

fn check_transitions(chain: &AnnuliChain, seq: &[usize]) -> Result<()> {
    if let Some(&bad) = seq.iter().find(|&&s| s >= chain.len()) {
        return Err(Error::Precondition(format!("symbol {bad} is beyond the chain")));
    }
    let ts = TransitionSystem::from_chain(chain, seq.len());
    if !admissible_check(seq, &ts) {
        return Err(Error::Precondition("sequence is not admissible for the chain".into()));
    }
    for w in seq.windows(2) {
        if w[1] == w[0] + 1 && !chain.certs.get(w[0]).is_some_and(|c| c.covers()) {
            return Err(Error::MissingCertificate { from: w[0], to: w[1] });
        }
    }
    Ok(())
}

/// The partition radius for a chain, when one aligns with it.
fn chain_partition(f: &dyn EntireFunction, chain: &AnnuliChain, log_r: Option<&ExtLogReal>) -> Option<Partition> {
    let log_r = match log_r {
        Some(r) => r.clone(),
        None => align_partition(f, chain).ok()?,
    };
    build_partition(f, &log_r, chain.len() + 1).ok()
}

/// Pulls the log-midpoint of `E_{depth-1}` back through `E_n = B_{seq[n]}`
/// and checks the forward orbit of the result.
pub fn realize_itinerary(
    f: &dyn EntireFunction,
    chain: &AnnuliChain,
    log_r: Option<&ExtLogReal>,
    seq: &[usize],
    depth: usize,
    opts: &RealizeOptions,
) -> Result<RealizationResult> {
    if depth > seq.len() {
        return Err(Error::Precondition(format!("depth {depth} exceeds the sequence length {}", seq.len())));
    }
    if seq.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    check_transitions(chain, &seq[..depth.max(1)])?;
    let bands: Vec<Annulus> = seq[..depth.max(1)].iter().map(|&s| chain.entries[s].band()).collect();
    let prec = working_prec(&bands);
    if depth == 0 {
        return Ok(RealizationResult {
            point: ComplexPoint::from_polar(bands[0].log_mid().with_precision(prec), Some(Float::new(prec))),
            requested: seq.to_vec(),
            depth,
            verified_len: 0,
            residuals: Vec::new(),
            log_moduli: Vec::new(),
            newton_stats: NewtonStats::default(),
            precision: prec,
            contractions: 0,
            failure: None,
        });
    }
    let partition = chain_partition(f, chain, log_r);
    let seq = &seq[..depth];
    let mut best: Option<RealizationResult> = None;
    let mut stats = NewtonStats::default();
    for attempt in 0..=opts.retries {
        let factor = 0.5f64.powi(attempt as i32);
        let shrunk: Vec<Annulus> = bands.iter().map(|b| contract(b, factor)).collect();
        let last = &shrunk[depth - 1];
        let mut z = ComplexPoint::from_polar(last.log_mid().with_precision(prec), Some(Float::new(prec)));
        let mut failure = None;
        for n in (0..depth - 1).rev() {
            match solve_preimage(f, &z, &shrunk[n], opts.seeds, prec, opts.solve_tol) {
                Ok(p) => {
                    stats.iterations += p.stats.iterations;
                    stats.restarts += p.stats.restarts;
                    z = p.z;
                }
                Err(e) => {
                    failure = Some(format!("no preimage in E_{n}: {e}"));
                    break;
                }
            }
        }
        let result = match failure {
            Some(why) => RealizationResult {
                point: z,
                requested: seq.to_vec(),
                depth,
                verified_len: 0,
                residuals: Vec::new(),
                log_moduli: Vec::new(),
                newton_stats: stats,
                precision: prec,
                contractions: attempt,
                failure: Some(why),
            },
            None => {
                let coarse = forward_check(f, &z, &bands, seq, partition.as_ref(), opts.tol);
                let fine = forward_check(f, &z.with_prec(prec * 2), &bands, seq, partition.as_ref(), opts.tol);
                let verified = coarse.verified.min(fine.verified);
                let stop = fine.stop.or(coarse.stop);
                RealizationResult {
                    point: z,
                    requested: seq.to_vec(),
                    depth,
                    verified_len: verified,
                    residuals: fine.residuals,
                    log_moduli: fine.log_moduli,
                    newton_stats: stats,
                    precision: prec,
                    contractions: attempt,
                    failure: (verified < depth).then(|| stop.unwrap_or_else(|| "precisions disagree".into())),
                }
            }
        };
        if result.complete() {
            return Ok(result);
        }
        if best.as_ref().is_none_or(|b| result.verified_len > b.verified_len) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub log_modulus: ExtLogReal,
    pub log_a: ExtLogReal,
    /// `log|f^n(ζ)| - log a_n >= -tol·max(1, log a_n)`.
    pub lower_ok: bool,
    pub upper_bound: Option<ExtLogReal>,
    pub upper_ok: Option<bool>,
    /// `log|f^n(ζ)|` over `log M(a_n)`, recorded at rule-1 indices.
    pub ratio_to_single_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescribedReport {
    pub realization: RealizationResult,
    pub bound_kind: BoundKind,
    pub rows: Vec<BoundRow>,
}

impl PrescribedReport {
    pub fn bounds_hold(&self) -> bool {
        self.rows.iter().all(|r| r.lower_ok && r.upper_ok != Some(false))
    }
}

/// Realizes the plan's targets to `depth` and reports the rate bounds along
/// the verified orbit.
pub fn realize_prescribed(
    f: &dyn EntireFunction,
    plan: &RatePlan,
    depth: usize,
    opts: &RealizeOptions,
) -> Result<PrescribedReport> {
    let realization = realize_itinerary(f, &plan.chain, None, &plan.targets, depth, opts)?;
    let mut rows = Vec::with_capacity(realization.verified_len);
    for n in 0..realization.verified_len {
        let lm = realization.log_moduli[n].clone();
        let la = plan.log_a[n].clone();
        let slack = la.abs().max(ExtLogReal::from_f64(1.0)).mul_f64(opts.tol);
        let lower_ok = &lm - &la >= slack.neg();
        let fired = plan.rule_one.contains(&n);
        let upper_bound = if fired {
            Some(match plan.mode {
                PlanMode::Mc => mu(f, &mu(f, &la)?)?,
                PlanMode::NoMc { eps } => la.mul_f64(1.0 + eps),
            })
        } else {
            None
        };
        let ratio_to_single_m = if fired { Some((&lm / &mu(f, &la)?).to_f64()) } else { None };
        rows.push(BoundRow {
            n,
            upper_ok: upper_bound.as_ref().map(|b| lm <= *b),
            upper_bound,
            log_modulus: lm,
            log_a: la,
            lower_ok,
            ratio_to_single_m,
        });
    }
    Ok(PrescribedReport {
        realization,
        bound_kind: plan.bound_kind,
        rows,
    })
}

/// Distances between the starting points found at consecutive depths.
pub fn depth_stabilization(
    f: &dyn EntireFunction,
    chain: &AnnuliChain,
    seq: &[usize],
    max_depth: usize,
    opts: &RealizeOptions,
) -> Result<Vec<Option<f64>>> {
    let mut points = Vec::new();
    for d in 1..=max_depth.min(seq.len()) {
        points.push(realize_itinerary(f, chain, None, seq, d, opts)?.point);
    }
    Ok(points
        .windows(2)
        .map(|w| w[1].distance(&w[0]).map(|d| d.to_f64_round(Round::Nearest)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annuli::{build_bn_sequence, ChainOptions};
    use crate::function::{ExpFn, SinFn};
    use crate::partition::classify_fast_escaping;
    use crate::partition::Itinerary;
    use crate::profile::Profile;
    use crate::synthesis::{prescribed_rate_plan, RateSpec};
    use std::sync::OnceLock;

    fn flagship() -> &'static AnnuliChain {
        static CHAIN: OnceLock<AnnuliChain> = OnceLock::new();
        CHAIN.get_or_init(|| {
            build_bn_sequence(&ExpFn, &ExtLogReal::from_f64(2.0), 5, &Profile::desk_relaxed(), &ChainOptions::default())
                .unwrap()
        })
    }

    fn band(a: f64, b: f64) -> Annulus {
        Annulus::from_f64(a, b).unwrap()
    }

    #[test]
    fn exp_branch_preimages() {
        let one = ComplexPoint::from_f64(1.0, 0.0, 128);
        let p = solve_preimage(&ExpFn, &one, &band(2f64.ln(), 16f64.ln()), 4, 128, 1e-12).unwrap();
        let z = p.z.to_c64().unwrap();
        assert!(z.re.abs() < 1e-30);
        assert!((z.im.abs() - std::f64::consts::TAU).abs() < 1e-12);
        let theta = 0.7;
        let w = ComplexPoint::from_polar(ExtLogReal::from_f64(10.0), Some(Float::with_val(128, theta)));
        let p = solve_preimage(&ExpFn, &w, &band(1.0, 4.0), 4, 128, 1e-12).unwrap();
        let z = p.z.to_c64().unwrap();
        assert!((z.re - 10.0).abs() < 1e-12);
        assert!(((z.im - theta) / std::f64::consts::TAU).fract().abs() < 1e-12);
        assert!(solve_preimage(&ExpFn, &w, &band(0.1, 0.5), 4, 128, 1e-12).is_err());
    }

    #[test]
    fn sine_newton_preimage() {
        let w = ComplexPoint::from_f64(0.5, 0.0, 128);
        let p = solve_preimage(&SinFn, &w, &band(0.0, 4f64.ln()), 8, 128, 1e-12).unwrap();
        let z = p.z.to_c64().unwrap();
        assert!((z.sin() - Complex64::new(0.5, 0.0)).norm() <= 1e-10);
        assert!(z.norm() > 1.0 && z.norm() < 4.0);
        // Every solution is ±arcsin(0.5) + 2πk or π - arcsin(0.5) + 2πk.
        let a = 0.5f64.asin();
        let k = |x: f64| ((x / std::f64::consts::TAU).round() * std::f64::consts::TAU - x).abs() < 1e-9;
        assert!(z.im.abs() < 1e-9 && (k(z.re - a) || k(z.re - (std::f64::consts::PI - a))));
    }

    #[test]
    fn period_three_round_trip() {
        let r = realize_itinerary(&ExpFn, flagship(), None, &[0, 1, 2, 0, 1, 2], 6, &RealizeOptions::default()).unwrap();
        assert!(r.complete(), "{:?}", r.failure);
        assert!(r.residuals.iter().all(|&x| x <= 1e-8));
    }

    #[test]
    fn climbing_round_trip() {
        let seq = [0, 1, 2, 3, 4];
        let r = realize_itinerary(&ExpFn, flagship(), None, &seq, 5, &RealizeOptions::default()).unwrap();
        assert_eq!(r.verified_len, 5, "{:?}", r.failure);
        assert!(r.residuals.iter().all(|&x| x <= 1e-8));
        assert!(classify_fast_escaping(&Itinerary::from_symbols(seq.to_vec()), 5));
        let again = realize_itinerary(&ExpFn, flagship(), None, &seq, 5, &RealizeOptions::default()).unwrap();
        assert_eq!(again.to_json().unwrap(), r.to_json().unwrap());
    }

    #[test]
    fn depth_zero_and_guards() {
        let r = realize_itinerary(&ExpFn, flagship(), None, &[1, 2], 0, &RealizeOptions::default()).unwrap();
        assert_eq!(r.verified_len, 0);
        assert_eq!(r.point.logmod(), flagship().entries[1].band().log_mid());
        assert!(realize_itinerary(&ExpFn, flagship(), None, &[0, 2], 2, &RealizeOptions::default()).is_err());
        assert!(realize_itinerary(&ExpFn, flagship(), None, &[0, 1], 3, &RealizeOptions::default()).is_err());
    }

    #[test]
    fn constant_cycle_near_fixed_point_band() {
        let r = realize_itinerary(&ExpFn, flagship(), None, &[1; 5], 5, &RealizeOptions::default()).unwrap();
        assert!(r.complete(), "{:?}", r.failure);
    }

    #[test]
    fn prescribed_slow_rate() {
        let rate = RateSpec::linear(2.0, 0.5, 8);
        let plan = prescribed_rate_plan(&ExpFn, &rate, flagship(), PlanMode::Mc).unwrap();
        let rep = realize_prescribed(&ExpFn, &plan, 5, &RealizeOptions::default()).unwrap();
        assert_eq!(rep.realization.verified_len, 5, "{:?}", rep.realization.failure);
        assert!(rep.bounds_hold());
        assert!(rep.rows.iter().any(|r| r.upper_ok == Some(true)));
    }

    #[test]
    fn prescribed_without_mc() {
        let rate = RateSpec::linear(8.0, 4.0, 5);
        let plan = prescribed_rate_plan(&ExpFn, &rate, flagship(), PlanMode::NoMc { eps: 1.0 }).unwrap();
        let rep = realize_prescribed(&ExpFn, &plan, 4, &RealizeOptions::default()).unwrap();
        assert_eq!(rep.realization.verified_len, 4, "{:?}", rep.realization.failure);
        assert!(rep.bounds_hold());
    }

    #[test]
    fn start_points_settle() {
        let moves = depth_stabilization(&ExpFn, flagship(), &[0, 1, 1, 1, 1, 1], 6, &RealizeOptions::default()).unwrap();
        let m: Vec<f64> = moves.into_iter().map(|m| m.unwrap()).collect();
        assert!(m[m.len() - 1] <= 0.1 * m[m.len() - 2]);
    }
}
