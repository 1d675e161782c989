//! Numerical covering verdicts: boundary-moduli certificates, the Bohr-type
//! grid test, Harnack analysis and zero counting.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::complex::{ComplexPoint, HpComplex};
use crate::error::{Error, Result};
use crate::extlog::ExtLogReal;
use crate::function::EntireFunction;
use crate::moduli::{delta, lambda_eps, log_max_modulus, log_min_modulus, mu, DEFAULT_TOL};
use crate::profile::Profile;

pub const DEFAULT_COVER_TOL: f64 = 1e-9;
/// Relative inward buffer on the inner edge of a Harnack target, where the
/// boundary bound holds with equality.
pub const HARNACK_INNER_BUFFER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub t_in: ExtLogReal,
    pub t_out: ExtLogReal,
}

impl Annulus {
    pub fn new(t_in: ExtLogReal, t_out: ExtLogReal) -> Result<Self> {
        if t_in >= t_out {
            return Err(Error::Precondition(format!("annulus needs t_in < t_out, got [{t_in}, {t_out}]")));
        }
        Ok(Self { t_in, t_out })
    }

    /// A closed band, possibly a single circle at working precision.
    pub fn closed(t_in: ExtLogReal, t_out: ExtLogReal) -> Result<Self> {
        if t_in > t_out {
            return Err(Error::Precondition(format!("closed annulus needs t_in <= t_out, got [{t_in}, {t_out}]")));
        }
        Ok(Self { t_in, t_out })
    }

    pub fn from_f64(t_in: f64, t_out: f64) -> Result<Self> {
        Self::new(ExtLogReal::from_f64(t_in), ExtLogReal::from_f64(t_out))
    }

    pub fn is_degenerate(&self) -> bool {
        self.t_in >= self.t_out
    }

    pub fn contains_closed(&self, logmod: &ExtLogReal) -> bool {
        *logmod >= self.t_in && *logmod <= self.t_out
    }

    pub fn contains_open(&self, logmod: &ExtLogReal) -> bool {
        *logmod > self.t_in && *logmod < self.t_out
    }

    pub fn log_mid(&self) -> ExtLogReal {
        (&self.t_in + &self.t_out).mul_f64(0.5)
    }

    /// Distance of `logmod` to the closed band, relative to `max(1, |t_in|)`.
    pub fn rel_distance(&self, logmod: &ExtLogReal) -> f64 {
        let gap = if *logmod < self.t_in {
            &self.t_in - logmod
        } else if *logmod > self.t_out {
            logmod - &self.t_out
        } else {
            return 0.0;
        };
        let scale = self.t_in.abs().max(ExtLogReal::from_f64(1.0));
        (&gap / &scale).to_f64()
    }

    /// `k` values with `t_out = k·t_in`.
    pub fn ratio(&self) -> ExtLogReal {
        &self.t_out / &self.t_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Covers,
    Fails,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    /// `max|f|` on the inner circle and `min|f|` on the outer circle.
    BoundaryModuli,
    /// Preimage search over a log-polar grid of the disc `B(0, M(ρ))`:
    /// `inner_log_max` is the highest uncovered grid modulus and
    /// `outer_log_min` is `log M(ρ)`.
    BohrGrid,
}

/// Evidence that `f(source) ⊇ target`. A `covers` verdict is backed by a
/// sufficient condition; `fails` means only that the condition is violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringCertificate {
    pub source: Annulus,
    pub target: Annulus,
    pub inner_log_max: ExtLogReal,
    pub outer_log_min: ExtLogReal,
    pub margin: ExtLogReal,
    pub verdict: Verdict,
    pub method: CertMethod,
}

impl CoveringCertificate {
    fn assemble(
        source: Annulus,
        target: Annulus,
        inner_log_max: ExtLogReal,
        outer_log_min: ExtLogReal,
        method: CertMethod,
        tol: f64,
    ) -> Self {
        let margin = (&target.t_in - &inner_log_max).min(&outer_log_min - &target.t_out);
        let verdict = verdict_for(&margin, tol);
        Self {
            source,
            target,
            inner_log_max,
            outer_log_min,
            margin,
            verdict,
            method,
        }
    }

    pub fn margin_f64(&self) -> f64 {
        self.margin.to_f64()
    }

    pub fn covers(&self) -> bool {
        self.verdict == Verdict::Covers
    }
}

fn verdict_for(margin: &ExtLogReal, tol: f64) -> Verdict {
    if *margin > ExtLogReal::from_f64(tol) {
        Verdict::Covers
    } else if *margin < ExtLogReal::from_f64(-tol) {
        Verdict::Fails
    } else {
        Verdict::Indeterminate
    }
}

pub fn verify_annulus_covering(f: &dyn EntireFunction, source: &Annulus, target: &Annulus, tol: f64) -> CoveringCertificate {
    let inner = log_max_modulus(f, &source.t_in, DEFAULT_TOL);
    let outer = log_min_modulus(f, &source.t_out, DEFAULT_TOL);
    match (inner, outer) {
        (Ok(inner), Ok(outer)) => {
            CoveringCertificate::assemble(source.clone(), target.clone(), inner, outer, CertMethod::BoundaryModuli, tol)
        }
        _ => CoveringCertificate {
            source: source.clone(),
            target: target.clone(),
            inner_log_max: ExtLogReal::pos_inf(),
            outer_log_min: ExtLogReal::neg_inf(),
            margin: ExtLogReal::zero(64),
            verdict: Verdict::Indeterminate,
            method: CertMethod::BoundaryModuli,
        },
    }
}

const MINMOD_GRID: usize = 64;
const MINMOD_GOLDEN_ITERS: usize = 60;

/// Some `t_s ∈ (t_lo, t_hi)` with `log m(e^{t_s}) <= 0`, taking the deepest grid
/// minimum (refined when the oracle is sampled).
pub fn find_small_min_modulus(
    f: &dyn EntireFunction,
    t_lo: &ExtLogReal,
    t_hi: &ExtLogReal,
    tol: f64,
) -> Result<Option<ExtLogReal>> {
    if t_lo >= t_hi {
        return Err(Error::Precondition(format!("empty range ({t_lo}, {t_hi})")));
    }
    let width = t_hi - t_lo;
    let ts: Vec<ExtLogReal> = (0..MINMOD_GRID)
        .map(|i| t_lo + &width.mul_f64((i as f64 + 0.5) / MINMOD_GRID as f64))
        .collect();
    let vals = ts
        .iter()
        .map(|t| log_min_modulus(f, t, DEFAULT_TOL))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..vals.len() {
        if vals[i] <= vals[best] {
            best = i;
        }
    }
    let exact = f.exact_log_min_modulus(&ts[best]).is_some();
    let (lo_f, hi_f) = (t_lo.to_f64(), t_hi.to_f64());
    let refinable = !exact && lo_f.is_finite() && hi_f.is_finite() && hi_f - lo_f > 0.0;
    let mut best_t = ts[best].clone();
    let mut best_v = vals[best].clone();
    if refinable {
        let cell = (hi_f - lo_f) / MINMOD_GRID as f64;
        let centre = ts[best].to_f64();
        let (a, b) = ((centre - cell).max(lo_f), (centre + cell).min(hi_f));
        let g = |t: f64| -> f64 {
            match log_min_modulus(f, &ExtLogReal::from_f64(t), DEFAULT_TOL) {
                Ok(v) => -v.to_f64(),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let (t_star, neg_v) = golden_max_f64(&g, a, b, MINMOD_GOLDEN_ITERS);
        if -neg_v < best_v.to_f64() {
            best_t = ExtLogReal::from_f64(t_star);
            best_v = ExtLogReal::from_f64(-neg_v);
        }
    }
    if !best_v.is_positive() {
        return Ok(Some(best_t));
    }
    if best_v < ExtLogReal::from_f64(tol) {
        return Err(Error::Indeterminate(format!("min modulus {best_v} within tolerance of 1")));
    }
    Ok(None)
}

fn golden_max_f64(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..iters {
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

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub t: f64,
    pub k: f64,
    pub delta: f64,
    pub profile: String,
    /// `M(r) > r^g` for the profile's Harnack exponent.
    pub hyp_growth: bool,
    /// `δ(r) < min(1/(2π), (k-1)/4)`.
    pub hyp_delta: bool,
    /// No `s` in `(r^{1+δ}, r^{k-δ})` with `m(s) <= 1`.
    pub hyp_mbig: bool,
    pub failed: Vec<String>,
    /// `min (log m(s) - (1-2πδ) log M(s))` over the sampled `s`.
    pub part_a_margin: Option<f64>,
    pub part_a_samples: usize,
    pub log_r_out: ExtLogReal,
    pub big_k: f64,
    pub k_bound_ok: bool,
    pub outer_cert: Option<CoveringCertificate>,
    /// Image of the inner sub-annulus lands inside the predicted band;
    /// `None` when the stricter δ bound of that part fails.
    pub inside_ok: Option<bool>,
}

const PART_A_SAMPLES: usize = 33;

/// Runs every part of the Harnack analysis and records which hypotheses hold.
pub fn harnack_report(f: &dyn EntireFunction, t: f64, k: f64, profile: &Profile) -> Result<HarnackReport> {
    if k <= 1.0 {
        return Err(Error::Precondition("k must exceed 1".into()));
    }
    let tx = ExtLogReal::from_f64(t);
    let d = delta(&tx)?;
    let two_pi = std::f64::consts::TAU;
    let log_r_out = mu(f, &tx)?;
    let mu_t = log_r_out.to_f64();
    let mut failed = Vec::new();

    let hyp_growth = mu_t > profile.harnack_growth * t && (d.recip()) >= profile.sqrt_log_min;
    if !hyp_growth {
        failed.push(format!("M(r) > r^{} with sqrt(log r) >= {}", profile.harnack_growth, profile.sqrt_log_min));
    }
    let hyp_delta = d < (1.0 / two_pi).min((k - 1.0) / 4.0);
    if !hyp_delta {
        failed.push("delta < min(1/(2pi), (k-1)/4)".into());
    }
    let lo = ExtLogReal::from_f64(t * (1.0 + d));
    let hi = ExtLogReal::from_f64(t * (k - d));
    let hyp_mbig = if lo < hi {
        matches!(find_small_min_modulus(f, &lo, &hi, DEFAULT_TOL), Ok(None))
    } else {
        true
    };
    if !hyp_mbig {
        failed.push("m(s) > 1 on (r^{1+delta}, r^{k-delta})".into());
    }

    let shrink = 1.0 - two_pi * d;
    let (s_lo, s_hi) = (t * (1.0 + 2.0 * d), t * (k - 2.0 * d));
    let mut part_a_margin = None;
    let mut part_a_samples = 0;
    if s_lo <= s_hi {
        let ss: Vec<f64> = (0..PART_A_SAMPLES)
            .map(|i| s_lo + (s_hi - s_lo) * i as f64 / (PART_A_SAMPLES - 1) as f64)
            .collect();
        let mut worst = f64::INFINITY;
        for s in &ss {
            let sx = ExtLogReal::from_f64(*s);
            let lm = log_min_modulus(f, &sx, DEFAULT_TOL)?.to_f64();
            let big = log_max_modulus(f, &sx, DEFAULT_TOL)?.to_f64();
            worst = worst.min(lm - shrink * big);
        }
        part_a_margin = Some(worst);
        part_a_samples = ss.len();
    }

    let outer_t = t * (k - 2.0 * d);
    let big_k_log = shrink * mu(f, &ExtLogReal::from_f64(outer_t))?.to_f64();
    let big_k = big_k_log / mu_t;
    let k_bound_ok = big_k >= k * (1.0 - 9.0 * d) - DEFAULT_COVER_TOL;
    let target_in = if mu_t > 0.0 { mu_t * (1.0 + HARNACK_INNER_BUFFER) } else { mu_t + HARNACK_INNER_BUFFER };
    let outer_cert = match (Annulus::from_f64(t, outer_t), Annulus::from_f64(target_in, big_k_log)) {
        (Ok(src), Ok(tgt)) => Some(verify_annulus_covering(f, &src, &tgt, DEFAULT_COVER_TOL)),
        _ => None,
    };

    let strict = 3.0 * two_pi;
    let inside_ok = if d < (1.0 / strict).min((k - 1.0) / (strict + 1.0)) && mu_t > 1.0 {
        let d_out = 1.0 / mu_t.sqrt();
        let inner_m = log_min_modulus(f, &ExtLogReal::from_f64(t * (1.0 + strict * d)), DEFAULT_TOL)?.to_f64();
        let outer_big = mu(f, &ExtLogReal::from_f64(t * k * (1.0 - strict * d)))?.to_f64();
        Some(inner_m >= (1.0 + strict * d_out) * mu_t && outer_big <= big_k * (1.0 - strict * d_out) * mu_t)
    } else {
        None
    };

    Ok(HarnackReport {
        t,
        k,
        delta: d,
        profile: profile.name.clone(),
        hyp_growth,
        hyp_delta,
        hyp_mbig,
        failed,
        part_a_margin,
        part_a_samples,
        log_r_out,
        big_k,
        k_bound_ok,
        outer_cert,
        inside_ok,
    })
}

/// As `harnack_report`, but an error when any hypothesis fails.
pub fn harnack_analyze(f: &dyn EntireFunction, t: f64, k: f64, profile: &Profile) -> Result<HarnackReport> {
    let rep = harnack_report(f, t, k, profile)?;
    if rep.failed.is_empty() {
        Ok(rep)
    } else {
        Err(Error::HypothesisFailed(rep.failed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BohrGrid {
    pub n_mod: usize,
    pub n_arg: usize,
    /// Newton seeds per side when no inverse branch or degree count decides.
    pub seeds: usize,
}

impl Default for BohrGrid {
    fn default() -> Self {
        Self {
            n_mod: 64,
            n_arg: 64,
            seeds: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Covered,
    Uncovered,
    Indeterminate,
}

/// Whether some `L + i(φ + 2πk)` has modulus strictly between `ρ` and `8ρ`.
pub fn branch_lands(l: &ExtLogReal, phi: &Float, log_rho: &ExtLogReal) -> Option<bool> {
    let prec = l.prec().max(phi.prec()).max(log_rho.prec());
    let rho = log_rho.exp();
    let rho8 = rho.mul_f64(8.0);
    if l.abs() >= rho8 {
        return Some(false);
    }
    let l2 = l * l;
    let hi2 = &(&rho8 * &rho8) - &l2;
    let lo2 = &(&rho * &rho) - &l2;
    let y_hi = hi2.sqrt();
    let two_pi = ExtLogReal::from_float(Float::with_val(prec, Constant::Pi) * 2u32);
    let pi_f = Float::with_val(prec, Constant::Pi);
    // Representative of φ in (-π, π].
    let mut centred = Float::with_val(prec, phi);
    if centred > pi_f {
        centred -= Float::with_val(prec, &pi_f * 2u32);
    }
    if !lo2.is_positive() {
        // Every y in (-y_hi, y_hi) works, except y = 0 when |L| = ρ exactly.
        if y_hi.mul_f64(2.0) > two_pi {
            return Some(true);
        }
        let yh = y_hi.as_float()?.clone();
        let c_abs = Float::with_val(prec, centred.abs_ref());
        let zero_excluded = lo2.is_zero() && c_abs.is_zero();
        return Some(c_abs < yh && !zero_excluded);
    }
    // y_hi - y_lo = 63ρ²/(y_hi + y_lo) >= 63ρ/16, without cancellation.
    if rho.mul_f64(63.0 / 16.0) > two_pi {
        return Some(true);
    }
    let y_lo = lo2.sqrt();
    let (ExtLogReal::Plain(ylo), ExtLogReal::Plain(yhi)) = (&y_lo, &y_hi) else {
        return None;
    };
    if yhi.get_exp().unwrap_or(0) as i64 + 32 > prec as i64 {
        return None;
    }
    let tp = Float::with_val(prec, &pi_f * 2u32);
    let hits = |ph: &Float| -> bool {
        // Least y ≡ ph (mod 2π) strictly above y_lo.
        let q = Float::with_val(prec, ylo - ph) / &tp;
        let k = q.floor() + 1u32;
        let y = Float::with_val(prec, ph + Float::with_val(prec, &k * &tp));
        &y > ylo && &y < yhi
    };
    let neg = Float::with_val(prec, -&centred);
    Some(hits(&centred) || hits(&neg))
}

/// Decides whether `w = e^{logmod + i·arg}` has a preimage in `A(ρ, 8ρ)`.
pub fn decide_preimage(
    f: &dyn EntireFunction,
    logmod: &ExtLogReal,
    arg: &Float,
    log_rho: &ExtLogReal,
    seeds: usize,
) -> Decision {
    let w = ComplexPoint::from_polar(logmod.clone(), Some(arg.clone()));
    if let Some(base) = f.periodic_log_preimage(&w) {
        return match base {
            Ok((l, Some(phi))) => match branch_lands(&l, &phi, log_rho) {
                Some(true) => Decision::Covered,
                Some(false) => Decision::Uncovered,
                None => Decision::Indeterminate,
            },
            Err(Error::Domain(_)) => Decision::Uncovered,
            _ => Decision::Indeterminate,
        };
    }
    let (Some(wc), Some(lr)) = (w.to_c64(), Some(log_rho.to_f64()).filter(|v| v.is_finite() && *v < 6.0)) else {
        return Decision::Indeterminate;
    };
    let (r_in, r_out) = (lr.exp(), 8.0 * lr.exp());
    if let Ok(a) = Annulus::from_f64(lr, lr + 8f64.ln()) {
        if let Ok(n) = winding_count(f, wc, &a) {
            return if n > 0 { Decision::Covered } else { Decision::Uncovered };
        }
    }
    match newton_preimage(f, wc, r_in, r_out, seeds, 1e-10) {
        Some(_) => Decision::Covered,
        None => Decision::Indeterminate,
    }
}

/// Uncovered and undecided points of a log-polar grid over `B(0, M(ρ))`.
#[derive(Debug, Clone, Serialize)]
pub struct DiscScan {
    pub log_rho: ExtLogReal,
    pub log_max: ExtLogReal,
    pub floor: ExtLogReal,
    pub grid_size: usize,
    pub covered: usize,
    pub uncovered: Vec<(ExtLogReal, f64)>,
    pub indeterminate: usize,
}

impl DiscScan {
    pub fn max_uncovered(&self) -> ExtLogReal {
        self.uncovered
            .iter()
            .map(|(l, _)| l.clone())
            .fold(ExtLogReal::neg_inf(), |a, b| a.max(b))
    }
}

fn grid_args(n: usize, prec: u32) -> Vec<Float> {
    let tp = Float::with_val(prec, Constant::Pi) * 2u32;
    (0..n)
        .map(|j| Float::with_val(prec, &tp * (j as f64 + 0.5)) / n as f64)
        .collect()
}

fn decide_grid(
    f: &dyn EntireFunction,
    mods: &[ExtLogReal],
    args: &[Float],
    log_rho: &ExtLogReal,
    seeds: usize,
) -> Vec<(usize, usize, Decision)> {
    let cells: Vec<(usize, usize)> = (0..mods.len()).flat_map(|i| (0..args.len()).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| (i, j, decide_preimage(f, &mods[i], &args[j], log_rho, seeds)))
        .collect()
}

/// Scans `B(0, M(ρ))` from `log|w| = -8ρ - 4` upward.
pub fn scan_disc(f: &dyn EntireFunction, log_rho: &ExtLogReal, grid: &BohrGrid) -> Result<DiscScan> {
    let prec = log_rho.prec();
    let log_max = mu(f, log_rho)?;
    let floor = log_rho.exp().mul_f64(-8.0).add_f64(-4.0);
    let span = &log_max - &floor;
    let mods: Vec<ExtLogReal> = (0..grid.n_mod)
        .map(|i| &floor + &span.mul_f64((i as f64 + 0.5) / grid.n_mod as f64))
        .collect();
    let args = grid_args(grid.n_arg, prec.max(64));
    let decisions = decide_grid(f, &mods, &args, log_rho, grid.seeds);
    let mut scan = DiscScan {
        log_rho: log_rho.clone(),
        log_max,
        floor,
        grid_size: decisions.len(),
        covered: 0,
        uncovered: Vec::new(),
        indeterminate: 0,
    };
    for (i, j, d) in decisions {
        match d {
            Decision::Covered => scan.covered += 1,
            Decision::Uncovered => scan.uncovered.push((mods[i].clone(), args[j].to_f64())),
            Decision::Indeterminate => scan.indeterminate += 1,
        }
    }
    Ok(scan)
}

/// Rings of the target band checked on top of the disc scan.
const TARGET_RINGS: usize = 16;

/// Certificate that `f(A(ρ, 8ρ)) ⊇ target` from a disc scan plus a grid over the
/// closed target band.
pub fn bohr_certificate(f: &dyn EntireFunction, scan: &DiscScan, target: &Annulus, grid: &BohrGrid, tol: f64) -> CoveringCertificate {
    let prec = scan.log_rho.prec().max(target.t_in.prec());
    let width = &target.t_out - &target.t_in;
    let rings = if target.is_degenerate() { 1 } else { TARGET_RINGS };
    let mods: Vec<ExtLogReal> = (0..rings)
        .map(|i| {
            if rings == 1 {
                target.t_in.clone()
            } else {
                &target.t_in + &width.mul_f64(i as f64 / (rings - 1) as f64)
            }
        })
        .collect();
    let args = grid_args(grid.n_arg, prec.max(64));
    let decisions = decide_grid(f, &mods, &args, &scan.log_rho, grid.seeds);
    let mut inner = scan.max_uncovered();
    let mut undecided = false;
    for (i, _, d) in &decisions {
        match d {
            Decision::Uncovered => inner = inner.max(mods[*i].clone()),
            Decision::Indeterminate => undecided = true,
            Decision::Covered => {}
        }
    }
    let source = Annulus {
        t_in: scan.log_rho.clone(),
        t_out: scan.log_rho.add_f64(8f64.ln()),
    };
    let mut cert = CoveringCertificate::assemble(source, target.clone(), inner, scan.log_max.clone(), CertMethod::BohrGrid, tol);
    if undecided && cert.verdict == Verdict::Covers {
        cert.verdict = Verdict::Indeterminate;
    }
    cert
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BohrVerdict {
    FullCover,
    OneDiscException,
    Violation,
}

#[derive(Debug, Clone, Serialize)]
pub struct BohrReport {
    pub t: ExtLogReal,
    pub s_witness: ExtLogReal,
    pub grid_size: usize,
    pub covered: usize,
    pub uncovered: Vec<ComplexPoint>,
    pub indeterminate: usize,
    pub max_uncovered_logmod: Option<ExtLogReal>,
    pub w1_estimate: ComplexPoint,
    pub eps_bound: f64,
    pub verdict: BohrVerdict,
}

/// Grid test of `f(A(r, 8r)) ⊇ B(0, M(r))` up to one exceptional disc.
pub fn bohr_analyze(f: &dyn EntireFunction, t: &ExtLogReal, grid: &BohrGrid, c0: f64, c1: f64) -> Result<BohrReport> {
    let prec = t.prec();
    let ln2 = ExtLogReal::ln2(prec);
    let s_witness = find_small_min_modulus(f, &(t + &ln2), &(t + &ln2.mul_f64(2.0)), DEFAULT_TOL)?
        .ok_or_else(|| Error::HypothesisFailed(vec!["m(s) <= 1 for some s in (2r, 4r)".into()]))?;
    let scan = scan_disc(f, t, grid)?;
    let eps_bound = lambda_eps(f, t, c0, c1)?.eps;
    let pts: Vec<Complex64> = scan
        .uncovered
        .iter()
        .map(|(l, a)| Complex64::from_polar(l.to_f64().exp(), *a))
        .collect();
    let w1 = if pts.is_empty() {
        Complex64::new(0.0, 0.0)
    } else {
        pts.iter().sum::<Complex64>() / pts.len() as f64
    };
    let radius = eps_bound * w1.norm().max(1.0);
    let verdict = if pts.is_empty() {
        BohrVerdict::FullCover
    } else if pts.iter().all(|w| (w - w1).norm() <= radius) {
        BohrVerdict::OneDiscException
    } else {
        BohrVerdict::Violation
    };
    let max_uncovered_logmod = (!scan.uncovered.is_empty()).then(|| scan.max_uncovered());
    let uncovered = scan
        .uncovered
        .iter()
        .map(|(l, a)| ComplexPoint::from_polar(l.clone(), Some(Float::with_val(64, *a))))
        .collect();
    Ok(BohrReport {
        t: t.clone(),
        s_witness,
        grid_size: scan.grid_size,
        covered: scan.covered,
        uncovered,
        indeterminate: scan.indeterminate,
        max_uncovered_logmod,
        w1_estimate: ComplexPoint::from_c64(w1),
        eps_bound,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverChoice {
    First,
    Second,
    Both,
}

/// Which of `A(S, S')`, `A(T, T')` the image of `A(r, 8r)` covers; all
/// arguments are logarithms.
#[allow(clippy::too_many_arguments)]
pub fn corollary_cover_choice(
    f: &dyn EntireFunction,
    t: &ExtLogReal,
    s: &ExtLogReal,
    s2: &ExtLogReal,
    tt: &ExtLogReal,
    tt2: &ExtLogReal,
    grid: &BohrGrid,
) -> Result<CoverChoice> {
    let prec = t.prec();
    let ln2 = ExtLogReal::ln2(prec);
    let top = mu(f, t)?;
    let slack = ExtLogReal::from_f64(1e-12);
    let ok = *s > ln2 && s < s2 && tt < tt2 && *tt2 <= top && *s2 <= &(tt - &ln2) + &slack;
    if !ok {
        return Err(Error::Precondition("need 2 < S < S', T < T' <= M(r), S' <= T/2".into()));
    }
    find_small_min_modulus(f, &(t + &ln2), &(t + &ln2.mul_f64(2.0)), DEFAULT_TOL)?
        .ok_or_else(|| Error::HypothesisFailed(vec!["m(s) <= 1 for some s in (2r, 4r)".into()]))?;
    let scan = scan_disc(f, t, grid)?;
    let first = bohr_certificate(f, &scan, &Annulus::new(s.clone(), s2.clone())?, grid, DEFAULT_COVER_TOL).covers();
    let second = bohr_certificate(f, &scan, &Annulus::new(tt.clone(), tt2.clone())?, grid, DEFAULT_COVER_TOL).covers();
    match (first, second) {
        (true, true) => Ok(CoverChoice::Both),
        (true, false) => Ok(CoverChoice::First),
        (false, true) => Ok(CoverChoice::Second),
        (false, false) => Err(Error::NeitherCovered),
    }
}

const WINDING_START: usize = 256;
const WINDING_MAX: usize = 1 << 17;

/// `(1/2πi) ∮_{|z|=r} f'/(f - w) dz` by the trapezoid rule, doubled until stable.
fn circle_count(f: &dyn EntireFunction, w: Complex64, r: f64) -> Result<f64> {
    let integrand = |n: usize| -> (f64, f64) {
        let mut sum = 0.0;
        let mut closest = f64::INFINITY;
        for j in 0..n {
            let z = Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / n as f64);
            let g = f.eval_c64(z) - w;
            closest = closest.min(g.norm());
            sum += (z * f.deriv_c64(z) / g).re;
        }
        (sum / n as f64, closest)
    };
    let scale = w.norm().max(1.0);
    let mut n = WINDING_START;
    let (mut prev, closest) = integrand(n);
    if closest < 1e-12 * scale || !prev.is_finite() {
        return Err(Error::BoundaryZero);
    }
    while n < WINDING_MAX {
        n *= 2;
        let (cur, _) = integrand(n);
        if (cur - prev).abs() < 1e-8 && (cur - cur.round()).abs() < 0.1 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NonIntegerResidual(prev))
}

/// Number of solutions of `f(z) = w` in the annulus, with multiplicity.
pub fn winding_count(f: &dyn EntireFunction, w: Complex64, a: &Annulus) -> Result<i64> {
    let (ti, to) = (a.t_in.to_f64(), a.t_out.to_f64());
    if !(ti.is_finite() && to.is_finite()) || to > 700.0 {
        return Err(Error::RangeExceeded("winding count needs plain radii".into()));
    }
    // Nudge radii off boundary zeros with a fixed sequence.
    const NUDGES: [f64; 5] = [0.0, 1e-7, -2e-7, 3e-7, -4e-7];
    let on = |t: f64| -> Result<f64> {
        let mut last = Err(Error::BoundaryZero);
        for nudge in NUDGES {
            match circle_count(f, w, (t + nudge).exp()) {
                Ok(v) => return Ok(v),
                Err(e) => last = Err(e),
            }
        }
        last
    };
    let total = on(to)? - on(ti)?;
    let rounded = total.round();
    if (total - rounded).abs() >= 0.1 {
        return Err(Error::NonIntegerResidual(total));
    }
    Ok(rounded as i64)
}

pub fn count_zeros_annulus(f: &dyn EntireFunction, a: &Annulus) -> Result<i64> {
    winding_count(f, Complex64::new(0.0, 0.0), a)
}

const NEWTON_ITERS: usize = 80;

fn newton_from(f: &dyn EntireFunction, w: Complex64, z0: Complex64, tol: f64) -> Option<Complex64> {
    let mut z = z0;
    let scale = w.norm().max(1.0);
    for _ in 0..NEWTON_ITERS {
        let g = f.eval_c64(z) - w;
        if g.norm() <= tol * scale {
            return Some(z);
        }
        let d = f.deriv_c64(z);
        if d.norm() == 0.0 || !d.re.is_finite() {
            return None;
        }
        z -= g / d;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
    }
    ((f.eval_c64(z) - w).norm() <= tol * scale).then_some(z)
}

/// Multistart Newton for `f(z) = w` with `r_in < |z| < r_out`, seeded on a
/// log-polar grid. The first success in grid order is returned.
pub fn newton_preimage(f: &dyn EntireFunction, w: Complex64, r_in: f64, r_out: f64, seeds: usize, tol: f64) -> Option<Complex64> {
    let n = seeds.max(1);
    let (l_in, l_out) = (r_in.ln(), r_out.ln());
    let starts: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let lr = l_in + (l_out - l_in) * (i as f64 + 0.5) / n as f64;
            Complex64::from_polar(lr.exp(), std::f64::consts::TAU * (j as f64 + 0.5) / n as f64)
        })
        .collect();
    let found: Vec<Option<Complex64>> = starts
        .par_iter()
        .map(|&z0| newton_from(f, w, z0, tol).filter(|z| z.norm() > r_in && z.norm() < r_out))
        .collect();
    found.into_iter().flatten().next()
}

/// Newton refinement in working precision from a double-precision start.
pub fn newton_refine_hp(f: &dyn EntireFunction, w: &HpComplex, z0: &HpComplex, iters: usize) -> HpComplex {
    let mut z = z0.clone();
    for _ in 0..iters {
        let g = f.eval_hp(&z).sub(w);
        let d = f.deriv_hp(&z);
        if d.is_zero() {
            break;
        }
        z = z.sub(&g.div(&d));
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{AffExp, ExpFn, Monomial, Rescaled, SinFn, ZExpFn};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn x(v: f64) -> ExtLogReal {
        ExtLogReal::from_f64(v)
    }

    fn ann(a: f64, b: f64) -> Annulus {
        Annulus::from_f64(a, b).unwrap()
    }

    #[test]
    fn annulus_shape() {
        assert!(Annulus::from_f64(2.0, 1.0).is_err());
        assert!(Annulus::closed(x(1.0), x(1.0)).unwrap().is_degenerate());
        let a = ann(1.0, 3.0);
        assert_eq!(a.log_mid().to_f64(), 2.0);
        assert_eq!(a.rel_distance(&x(2.0)), 0.0);
        assert!((a.rel_distance(&x(4.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_certificates() {
        let sq = Monomial::new(1.0, 2);
        let c = verify_annulus_covering(&sq, &ann(1.0, 2.0), &ann(2.5, 3.5), DEFAULT_COVER_TOL);
        assert_eq!(c.verdict, Verdict::Covers);
        assert!((c.margin_f64() - 0.5).abs() < 1e-12);
        let c = verify_annulus_covering(&sq, &ann(1.0, 2.0), &ann(1.5, 4.5), DEFAULT_COVER_TOL);
        assert_eq!(c.verdict, Verdict::Fails);
        let c = verify_annulus_covering(&ExpFn, &ann(3.0, 4.0), &ann(20.1, 21.0), DEFAULT_COVER_TOL);
        assert!((c.inner_log_max.to_f64() - 3f64.exp()).abs() < 1e-12);
        assert!((c.outer_log_min.to_f64() + 4f64.exp()).abs() < 1e-12);
        assert_eq!(c.verdict, Verdict::Fails);
    }

    #[test]
    fn small_min_modulus_search() {
        let t = find_small_min_modulus(&ExpFn, &x(1.0), &x(2.0), DEFAULT_TOL).unwrap().unwrap();
        assert!(t > x(1.0) && t < x(2.0));
        let pi_log = std::f64::consts::PI.ln();
        let t = find_small_min_modulus(&SinFn, &x(1.0), &x(1.3), DEFAULT_TOL).unwrap().unwrap();
        assert!((t.to_f64() - pi_log).abs() < 1e-6, "{t}");
        let aff = AffExp::new(1.0, 10.0);
        assert_eq!(find_small_min_modulus(&aff, &x(-1.0), &x(0.7), DEFAULT_TOL).unwrap(), None);
    }

    #[test]
    fn harnack_on_monomials() {
        let p = Profile::desk_relaxed();
        for (d, t, k) in [(8u32, 6400.0, 1.5), (8, 10000.0, 2.0), (4, 2500.0, 1.5)] {
            let f = Monomial::new(1.0, d);
            let rep = harnack_analyze(&f, t, k, &p).unwrap();
            let margin = rep.part_a_margin.unwrap();
            assert!(margin > 0.0);
            let cert = rep.outer_cert.as_ref().unwrap();
            assert_eq!(cert.verdict, Verdict::Covers, "{d} {t} {k}");
            assert!(rep.k_bound_ok);
            assert_eq!(rep.inside_ok, Some(true));
        }
    }

    #[test]
    fn harnack_rejects_exp() {
        let err = harnack_analyze(&ExpFn, 100.0, 2.0, &Profile::desk_relaxed()).unwrap_err();
        match err {
            Error::HypothesisFailed(list) => assert!(list.iter().any(|s| s.starts_with("m(s) > 1"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn harnack_part_a_on_shifted_window() {
        let f = Rescaled::new(Arc::new(AffExp::new(1.0, 10.0)), 140.0);
        let rep = harnack_report(&f, 100.0, 1.5, &Profile::desk_relaxed()).unwrap();
        assert!(rep.hyp_mbig && rep.hyp_delta && !rep.hyp_growth);
        assert!(rep.part_a_margin.unwrap() >= 0.0);
    }

    #[test]
    fn branch_landing() {
        let phi = Float::with_val(128, 0.0);
        // z = L + 2πik with |z| in (2, 16).
        assert_eq!(branch_lands(&x(0.0), &phi, &x(2f64.ln())), Some(true));
        assert_eq!(branch_lands(&x(-16.5), &phi, &x(2f64.ln())), Some(false));
        assert_eq!(branch_lands(&x(-15.9), &Float::with_val(128, 3.0), &x(2f64.ln())), Some(false));
        assert_eq!(branch_lands(&x(-15.9), &Float::with_val(128, 1.0), &x(2f64.ln())), Some(true));
        let huge = x(1e300).exp();
        assert_eq!(branch_lands(&x(5.0), &phi, &huge), Some(true));
    }

    #[test]
    fn bohr_exp_small_radius() {
        for r in [2.0f64, 3.0, 4.0] {
            let rep = bohr_analyze(&ExpFn, &x(r.ln()), &BohrGrid::default(), 20.0, 50.0).unwrap();
            assert_eq!(rep.indeterminate, 0);
            let cap = -8.0 * r + 1.0;
            assert!(rep.uncovered.iter().all(|w| w.logmod().to_f64() <= cap));
            assert_eq!(rep.covered + rep.uncovered.len(), 4096);
            assert_ne!(rep.verdict, BohrVerdict::Violation);
        }
    }

    #[test]
    fn corollary_choice() {
        let l = |v: f64| x(v.ln());
        let g = BohrGrid::default();
        let got = corollary_cover_choice(&ExpFn, &l(2.0), &l(2.5), &l(3.0), &l(6.0), &l(7.0), &g).unwrap();
        assert_eq!(got, CoverChoice::Both);
        let bad = corollary_cover_choice(&ExpFn, &l(2.0), &l(2.5), &l(3.5), &l(6.0), &l(7.0), &g);
        assert!(matches!(bad, Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_counts() {
        assert_eq!(count_zeros_annulus(&SinFn, &ann(2f64.ln(), 4f64.ln())).unwrap(), 2);
        assert_eq!(count_zeros_annulus(&ExpFn, &ann(0.0, 2.0)).unwrap(), 0);
        assert_eq!(count_zeros_annulus(&ZExpFn, &ann(0.5f64.ln(), 2f64.ln())).unwrap(), 0);
    }

    #[test]
    fn sine_preimage_by_newton() {
        let z = newton_preimage(&SinFn, Complex64::new(0.5, 0.0), 1.0, 4.0, 8, 1e-12).unwrap();
        assert!((z.sin() - 0.5).norm() <= 1e-10);
        assert!(z.norm() > 1.0 && z.norm() < 4.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn zero_counts_add_up(a in 0.1f64..0.8, frac in 0.1f64..0.9, width in 0.5f64..1.5) {
            let c = a + width;
            let b = a + frac * width;
            for f in [&SinFn as &dyn EntireFunction, &ZExpFn] {
                let whole = count_zeros_annulus(f, &ann(a, c));
                let left = count_zeros_annulus(f, &ann(a, b));
                let right = count_zeros_annulus(f, &ann(b, c));
                if let (Ok(w), Ok(l), Ok(r)) = (whole, left, right) {
                    prop_assert_eq!(w, l + r);
                }
            }
        }

        #[test]
        fn covering_is_sound_for_squares(lr in 2.6f64..3.4, th in 0.0f64..6.28) {
            let sq = Monomial::new(1.0, 2);
            let c = verify_annulus_covering(&sq, &ann(1.0, 2.0), &ann(2.5, 3.5), DEFAULT_COVER_TOL);
            prop_assert!(c.covers());
            let w = Complex64::from_polar(lr.exp(), th);
            let z = newton_preimage(&sq, w, 1f64.exp(), 2f64.exp(), 8, 1e-12);
            prop_assert!(z.is_some());
        }
    }
}
