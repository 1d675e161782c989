//! Chains of nested annuli `B_n` with `f(B_n) ⊇ B_{n+1}`: the absorbing
//! (Harnack) recurrence, Bohr splices at small-minimum-modulus radii, gap
//! annuli and the partition radius that contains the chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{
    bohr_certificate, find_small_min_modulus, scan_disc, verify_annulus_covering, Annulus, BohrGrid, CoveringCertificate,
    DEFAULT_COVER_TOL, DiscScan, HARNACK_INNER_BUFFER,
};
use crate::error::{Error, Result};
use crate::extlog::ExtLogReal;
use crate::function::{EntireFunction, McClass};
use crate::moduli::{delta_ext, log_min_modulus, mu, DEFAULT_TOL};
use crate::profile::Profile;

/// Relative tolerance for chain inequalities in log scale.
pub const CHAIN_TOL: f64 = 1e-6;
/// Mantissa bits beyond which an entry keeps its current precision.
pub const PREC_CAP: u32 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Seed,
    HarnackStep,
    BohrS,
    BohrT,
}

/// The closed annulus `t <= log|z| <= k·t`, with `k` stored as `k - 1` so that
/// widths far below the size of `t` survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub t: ExtLogReal,
    pub k_excess: ExtLogReal,
    pub delta: ExtLogReal,
    pub origin: Origin,
}

fn resolve_prec(t: &ExtLogReal, rel: &ExtLogReal) -> u32 {
    let want = t.bits_to_resolve(rel, PREC_CAP + 1);
    if want > PREC_CAP {
        t.prec()
    } else {
        t.prec().max(want)
    }
}

impl ChainEntry {
    pub fn new(t: ExtLogReal, k_excess: ExtLogReal, origin: Origin) -> Self {
        let delta = delta_ext(&t);
        let finest = delta.clone().min(k_excess.clone());
        let prec = resolve_prec(&t, &finest);
        Self {
            t: t.with_precision(prec),
            k_excess,
            delta,
            origin,
        }
    }

    /// Seed entry `k = 1 + coeff·δ(t)`.
    pub fn seed(t: ExtLogReal, coeff: f64) -> Self {
        let excess = delta_ext(&t).mul_f64(coeff);
        Self::new(t, excess, Origin::Seed)
    }

    pub fn k_f64(&self) -> f64 {
        1.0 + self.k_excess.to_f64()
    }

    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64()
    }

    /// `t·(1 + x)`.
    pub fn scaled(&self, x: &ExtLogReal) -> ExtLogReal {
        &self.t + &(x * &self.t)
    }

    /// `k·t`.
    pub fn t_out(&self) -> ExtLogReal {
        self.scaled(&self.k_excess)
    }

    pub fn band(&self) -> Annulus {
        Annulus {
            t_in: self.t.clone(),
            t_out: self.t_out(),
        }
    }

    /// `(t(1+δ), t(k-δ))`, where a small minimum modulus is sought.
    pub fn window(&self) -> (ExtLogReal, ExtLogReal) {
        (self.scaled(&self.delta), self.scaled(&(&self.k_excess - &self.delta)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnuliChain {
    pub function: String,
    pub profile: String,
    pub entries: Vec<ChainEntry>,
    /// Indices whose image covers earlier annuli.
    pub n_j: Vec<usize>,
    /// At most one uncovered earlier index per backjump.
    pub i_j: Vec<Vec<usize>>,
    /// `certs[n]` certifies `f(B_n) ⊇ B_{n+1}`.
    pub certs: Vec<CoveringCertificate>,
}

impl AnnuliChain {
    fn new(f: &dyn EntireFunction, profile: &Profile, seed: ChainEntry) -> Self {
        Self {
            function: f.id(),
            profile: profile.name.clone(),
            entries: vec![seed],
            n_j: Vec::new(),
            i_j: Vec::new(),
            certs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bands(&self) -> Vec<Annulus> {
        self.entries.iter().map(ChainEntry::band).collect()
    }

    pub fn all_certified(&self) -> bool {
        self.certs.len() + 1 >= self.entries.len() && self.certs.iter().all(|c| c.covers())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_thresholds(f: &dyn EntireFunction, t: &ExtLogReal, growth: f64, profile: &Profile) -> Result<()> {
    let mut failed = Vec::new();
    if t.sqrt() < ExtLogReal::from_f64(profile.sqrt_log_min) {
        failed.push(format!("sqrt(log r) >= {}", profile.sqrt_log_min));
    }
    if mu(f, t)? <= t.mul_f64(growth) {
        failed.push(format!("M(r) > r^{growth}"));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::HypothesisFailed(failed))
    }
}

/// Witness `t_s` in the window with `log m(e^{t_s}) <= 0`; a window that has
/// collapsed to one value at working precision is sampled there.
pub fn min_mod_witness(f: &dyn EntireFunction, lo: &ExtLogReal, hi: &ExtLogReal) -> Result<Option<ExtLogReal>> {
    if lo < hi {
        return find_small_min_modulus(f, lo, hi, DEFAULT_TOL);
    }
    if lo > hi {
        return Err(Error::HypothesisFailed(vec!["k > 1 + delta".into()]));
    }
    let v = log_min_modulus(f, lo, DEFAULT_TOL)?;
    Ok((!v.is_positive()).then(|| lo.clone()))
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Next { entry: ChainEntry, cert: CoveringCertificate },
    MinModFailure { witness: ExtLogReal },
}

/// Band with the inner edge pulled in by the Harnack buffer.
fn buffered(a: &Annulus) -> Annulus {
    let pad = a.t_in.abs().max(ExtLogReal::from_f64(1.0)).mul_f64(HARNACK_INNER_BUFFER);
    Annulus {
        t_in: &a.t_in + &pad,
        t_out: a.t_out.clone(),
    }
}

/// One absorbing step: either the Harnack successor with
/// `k'·t' = (1 - 2πδ)·μ((k - 2δ)·t)`, or the small-minimum-modulus witness.
pub fn absorbing_step(f: &dyn EntireFunction, entry: &ChainEntry, profile: &Profile) -> Result<StepOutcome> {
    check_thresholds(f, &entry.t, profile.absorb_growth, profile)?;
    let (lo, hi) = entry.window();
    if let Some(witness) = min_mod_witness(f, &lo, &hi)? {
        return Ok(StepOutcome::MinModFailure { witness });
    }
    let d = entry.delta_f64();
    let excess = entry.k_excess.to_f64();
    let two_pi = std::f64::consts::TAU;
    if !(d < (1.0 / two_pi).min(excess / 4.0)) {
        return Err(Error::HypothesisFailed(vec!["delta < min(1/(2pi), (k-1)/4)".into()]));
    }
    let t_next = mu(f, &entry.t)?;
    if t_next.is_saturated() {
        return Err(Error::RangeExceeded("mu saturated".into()));
    }
    let inner = entry.scaled(&entry.k_excess.add_f64(-2.0 * d));
    let kt_next = mu(f, &inner)?.mul_f64(1.0 - two_pi * d);
    let next_excess = &(&kt_next - &t_next) / &t_next;
    let next = ChainEntry::new(t_next, next_excess, Origin::HarnackStep);
    let cert = verify_annulus_covering(f, &entry.band(), &buffered(&next.band()), DEFAULT_COVER_TOL);
    Ok(StepOutcome::Next { entry: next, cert })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Terminal {
    MinModFailure { index: usize, witness: ExtLogReal },
    Budget,
    Saturation,
}

/// Iterates the absorbing step from `t0` for at most `budget` entries.
pub fn build_absorbing_chain(
    f: &dyn EntireFunction,
    t0: &ExtLogReal,
    budget: usize,
    profile: &Profile,
) -> Result<(AnnuliChain, Terminal)> {
    check_thresholds(f, t0, profile.seed_growth, profile)?;
    let mut chain = AnnuliChain::new(f, profile, ChainEntry::seed(t0.clone(), profile.seed_coeff));
    loop {
        if chain.len() >= budget {
            return Ok((chain, Terminal::Budget));
        }
        let last = chain.entries.last().unwrap();
        match absorbing_step(f, last, profile) {
            Ok(StepOutcome::Next { entry, cert }) => {
                chain.entries.push(entry);
                chain.certs.push(cert);
            }
            Ok(StepOutcome::MinModFailure { witness }) => {
                let index = chain.len() - 1;
                return Ok((chain, Terminal::MinModFailure { index, witness }));
            }
            Err(Error::RangeExceeded(_)) => return Ok((chain, Terminal::Saturation)),
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapAnnuli {
    pub entries: Vec<Annulus>,
    pub interleaving_ok: bool,
}

/// The annuli between consecutive absorbed annuli `A'_n` and `A'_{n+1}`.
pub fn gap_annuli(f: &dyn EntireFunction, chain: &AnnuliChain) -> Result<GapAnnuli> {
    let six_pi = 3.0 * std::f64::consts::TAU;
    let pairs: Vec<usize> = (0..chain.len().saturating_sub(1))
        .filter(|&n| chain.entries[n + 1].origin == Origin::HarnackStep)
        .collect();
    if pairs.is_empty() {
        return Err(Error::TooShort("need two consecutive harnack-step entries".into()));
    }
    let tol = ExtLogReal::from_f64(CHAIN_TOL);
    let mut entries = Vec::with_capacity(pairs.len());
    let mut interleaving_ok = true;
    for n in pairs {
        let (a, b) = (&chain.entries[n], &chain.entries[n + 1]);
        let (da, db) = (a.delta_f64(), b.delta_f64());
        if a.k_f64() * (1.0 - six_pi * da) <= 1.0 + six_pi * da {
            return Err(Error::DegenerateInnerAnnulus(n));
        }
        let t_in = a.t.mul_f64(a.k_f64() * (1.0 - six_pi * da));
        let t_out = b.t.mul_f64(1.0 + six_pi * db);
        entries.push(Annulus::new(t_in, t_out)?);
        let lo = mu(f, &a.t)?;
        let hi = mu(f, &a.t_out())?;
        let slack = |x: &ExtLogReal| x.abs().mul_f64(CHAIN_TOL);
        interleaving_ok &= b.t >= &lo - &slack(&lo) && b.t_out() <= &hi + &slack(&hi);
        let _ = &tol;
    }
    Ok(GapAnnuli {
        entries,
        interleaving_ok,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub grid: BohrGrid,
    /// Take the far candidate whenever it is covered.
    pub prefer_t: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Splice {
    pub next_s: ChainEntry,
    pub next_t: ChainEntry,
    pub chosen: Origin,
    pub cert: CoveringCertificate,
    pub past_coverage: Vec<CoveringCertificate>,
    pub exception: Option<usize>,
    pub log_rho: ExtLogReal,
}

/// Bohr splice at the terminal entry of `prior`: picks the next annulus among
/// the near (`S`) and far (`T`) candidates and checks which earlier annuli the
/// image of `A(s/3, 8s/3)` covers.
pub fn extend_chain_bohr(
    f: &dyn EntireFunction,
    prior: &[ChainEntry],
    witness: &ExtLogReal,
    profile: &Profile,
    opts: &ChainOptions,
) -> Result<Splice> {
    let term = prior.last().ok_or_else(|| Error::TooShort("empty chain".into()))?;
    let log_s = mu(f, &term.t)?;
    let (mut splice, scan) = bohr_candidates(f, term, witness, &log_s, profile, opts)?;
    let (past, exception) = past_coverage(f, prior, &scan, &opts.grid)?;
    splice.past_coverage = past;
    splice.exception = exception;
    Ok(splice)
}

/// Bohr splice from `term` with the near candidate at a caller-chosen `log S`;
/// earlier annuli are not examined.
pub fn splice_to(
    f: &dyn EntireFunction,
    term: &ChainEntry,
    witness: &ExtLogReal,
    log_s: &ExtLogReal,
    profile: &Profile,
    opts: &ChainOptions,
) -> Result<Splice> {
    bohr_candidates(f, term, witness, log_s, profile, opts).map(|(s, _)| s)
}

fn bohr_candidates(
    f: &dyn EntireFunction,
    term: &ChainEntry,
    witness: &ExtLogReal,
    log_s: &ExtLogReal,
    profile: &Profile,
    opts: &ChainOptions,
) -> Result<(Splice, DiscScan)> {
    let prec = witness.prec().max(log_s.prec());
    let ln2 = ExtLogReal::ln2(prec);
    let log_rho = splice_disc(term, witness)?;
    if log_s.is_saturated() {
        return Err(Error::RangeExceeded("mu saturated".into()));
    }
    let d_s = delta_ext(log_s);
    let next_s = ChainEntry::new(log_s.clone(), d_s.mul_f64(profile.seed_coeff), Origin::BohrS);
    let log_t = log_s + &(log_s * &d_s.mul_f64(profile.t_coeff));
    let next_t = ChainEntry::new(log_t.clone(), delta_ext(&log_t).mul_f64(profile.seed_coeff), Origin::BohrT);

    // log T - log S' = (c_T - c)·sqrt(log S) >= ln 2, compared on log S itself
    // so that towers stay resolvable.
    let gap_floor = (2f64.ln() / (profile.t_coeff - profile.seed_coeff)).powi(2);
    if *log_s <= ln2 || profile.t_coeff <= profile.seed_coeff || *log_s < ExtLogReal::from_f64(gap_floor) {
        return Err(Error::CeilingViolated("need S > 2 and T >= 2 S'".into()));
    }
    let ceiling = mu(f, &log_rho)?;
    if next_t.t_out() > ceiling {
        return Err(Error::CeilingViolated(format!("log T' = {} exceeds log M(s/3) = {ceiling}", next_t.t_out())));
    }

    let scan = scan_disc(f, &log_rho, &opts.grid)?;
    let cert_s = bohr_certificate(f, &scan, &next_s.band(), &opts.grid, DEFAULT_COVER_TOL);
    let cert_t = bohr_certificate(f, &scan, &next_t.band(), &opts.grid, DEFAULT_COVER_TOL);
    let (chosen, cert) = match (cert_s.covers(), cert_t.covers()) {
        (_, true) if opts.prefer_t => (Origin::BohrT, cert_t),
        (true, _) => (Origin::BohrS, cert_s),
        (false, true) => (Origin::BohrT, cert_t),
        (false, false) => return Err(Error::NeitherCovered),
    };
    let splice = Splice {
        next_s,
        next_t,
        chosen,
        cert,
        past_coverage: Vec::new(),
        exception: None,
        log_rho,
    };
    Ok((splice, scan))
}

impl Splice {
    pub fn chosen_entry(&self) -> &ChainEntry {
        match self.chosen {
            Origin::BohrT => &self.next_t,
            _ => &self.next_s,
        }
    }
}

fn splice_disc(term: &ChainEntry, witness: &ExtLogReal) -> Result<ExtLogReal> {
    let log_rho = witness.add_f64(-3f64.ln());
    if log_rho < term.t || log_rho.add_f64(8f64.ln()) > term.t_out() {
        return Err(Error::Precondition("A(s/3, 8s/3) leaves the terminal annulus".into()));
    }
    Ok(log_rho)
}

// Which earlier bands the image of the disc scan covers; at most one may be missed.
fn past_coverage(
    f: &dyn EntireFunction,
    prior: &[ChainEntry],
    scan: &DiscScan,
    grid: &BohrGrid,
) -> Result<(Vec<CoveringCertificate>, Option<usize>)> {
    let certs: Vec<CoveringCertificate> = prior
        .par_iter()
        .map(|e| bohr_certificate(f, scan, &e.band(), grid, DEFAULT_COVER_TOL))
        .collect();
    let missed: Vec<usize> = (0..certs.len()).filter(|&n| !certs[n].covers()).collect();
    if missed.len() > 1 {
        return Err(Error::NeitherCovered);
    }
    Ok((certs, missed.first().copied()))
}

/// Backjump check at the last entry without proposing a successor.
pub fn closing_coverage(
    f: &dyn EntireFunction,
    prior: &[ChainEntry],
    witness: &ExtLogReal,
    opts: &ChainOptions,
) -> Result<(Vec<CoveringCertificate>, Option<usize>)> {
    let term = prior.last().ok_or_else(|| Error::TooShort("empty chain".into()))?;
    let log_rho = splice_disc(term, witness)?;
    let scan = scan_disc(f, &log_rho, &opts.grid)?;
    past_coverage(f, prior, &scan, &opts.grid)
}

/// Alternates absorbing segments and Bohr splices until `n_max` entries; the
/// last entry is examined as a backjump as well.
pub fn build_bn_sequence(
    f: &dyn EntireFunction,
    t0: &ExtLogReal,
    n_max: usize,
    profile: &Profile,
    opts: &ChainOptions,
) -> Result<AnnuliChain> {
    if f.mc_declared() == McClass::HasMc {
        return Err(Error::Precondition(
            "functions with multiply connected components use build_absorbing_chain and gap_annuli".into(),
        ));
    }
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be positive".into()));
    }
    check_thresholds(f, t0, profile.seed_growth, profile)?;
    let mut chain = AnnuliChain::new(f, profile, ChainEntry::seed(t0.clone(), profile.seed_coeff));
    loop {
        let n = chain.len() - 1;
        let closing = chain.len() >= n_max;
        let step = match absorbing_step(f, &chain.entries[n], profile) {
            Ok(s) => s,
            Err(Error::RangeExceeded(_)) => break,
            Err(e) => return Err(e),
        };
        match step {
            StepOutcome::Next { entry, cert } => {
                if closing {
                    break;
                }
                chain.entries.push(entry);
                chain.certs.push(cert);
            }
            StepOutcome::MinModFailure { witness } if closing => {
                match closing_coverage(f, &chain.entries, &witness, opts) {
                    Ok((_, exception)) => {
                        chain.n_j.push(n);
                        chain.i_j.push(exception.into_iter().collect());
                    }
                    Err(Error::RangeExceeded(_)) => {}
                    Err(e) => return Err(e),
                }
                break;
            }
            StepOutcome::MinModFailure { witness } => {
                let splice = match extend_chain_bohr(f, &chain.entries, &witness, profile, opts) {
                    Ok(s) => s,
                    Err(e) => return Err(e),
                };
                chain.n_j.push(n);
                chain.i_j.push(splice.exception.into_iter().collect());
                chain.entries.push(splice.chosen_entry().clone());
                chain.certs.push(splice.cert);
            }
        }
    }
    Ok(chain)
}

fn mu_inverse(f: &dyn EntireFunction, target: &ExtLogReal, lo: &ExtLogReal, hi: &ExtLogReal) -> Result<ExtLogReal> {
    // Least x in [lo, hi] with μ(x) >= target, by bisection.
    if mu(f, lo)? >= *target {
        return Ok(lo.clone());
    }
    let (mut a, mut b) = (lo.clone(), hi.clone());
    for _ in 0..200 {
        let m = (&a + &b).mul_f64(0.5);
        if m <= a || m >= b {
            break;
        }
        if mu(f, &m)? >= *target {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// A partition radius with `B_n ⊂ A_n(R)` for every entry, the log-midpoint
/// of the feasible interval.
pub fn align_partition(f: &dyn EntireFunction, chain: &AnnuliChain) -> Result<ExtLogReal> {
    let first = chain.entries.first().ok_or_else(|| Error::TooShort("empty chain".into()))?;
    let lo = first.t_out();
    let log_r = if chain.len() == 1 {
        &lo + &lo.abs().max(ExtLogReal::from_f64(1.0)).mul_f64(CHAIN_TOL)
    } else {
        let e1 = &chain.entries[1];
        let hi = e1.t.clone();
        if lo >= hi {
            return Err(Error::NoFeasibleR(format!("k0 t0 = {lo} is not below t1 = {hi}")));
        }
        let lower = mu_inverse(f, &e1.t_out(), &lo, &hi)?.max(lo.clone());
        if lower >= hi {
            return Err(Error::NoFeasibleR("M(R) cannot exceed r1^k1 below r1".into()));
        }
        (&lower + &hi).mul_f64(0.5)
    };
    if !(log_r > lo) || mu(f, &log_r)? <= log_r {
        return Err(Error::NoFeasibleR(format!("logR = {log_r}")));
    }
    let mut below = log_r.clone();
    for (n, e) in chain.entries.iter().enumerate().skip(1) {
        let above = mu(f, &below)?;
        if !(below < e.t && e.t_out() < above) {
            return Err(Error::NoFeasibleR(format!("B_{n} is not inside A_{n}(R)")));
        }
        below = above;
    }
    Ok(log_r)
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceRow {
    pub n: usize,
    pub rel_error: f64,
    pub k_next: f64,
    pub k_floor: f64,
    pub shrink_ok: bool,
}

/// Residuals of the Harnack recurrence on every harnack-step pair.
pub fn recurrence_residuals(f: &dyn EntireFunction, chain: &AnnuliChain) -> Result<Vec<RecurrenceRow>> {
    let two_pi = std::f64::consts::TAU;
    let mut rows = Vec::new();
    for n in 0..chain.len().saturating_sub(1) {
        let (a, b) = (&chain.entries[n], &chain.entries[n + 1]);
        if b.origin != Origin::HarnackStep {
            continue;
        }
        let d = a.delta_f64();
        let inner = a.scaled(&a.k_excess.add_f64(-2.0 * d));
        let want = mu(f, &inner)?.mul_f64(1.0 - two_pi * d);
        let got = b.t_out();
        let rel_error = ((&got - &want).abs() / want.abs()).to_f64();
        let k_floor = a.k_f64() * (1.0 - 9.0 * d);
        rows.push(RecurrenceRow {
            n,
            rel_error,
            k_next: b.k_f64(),
            k_floor,
            shrink_ok: b.k_f64() >= k_floor - CHAIN_TOL,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{ExpFn, Monomial};

    fn x(v: f64) -> ExtLogReal {
        ExtLogReal::from_f64(v)
    }

    fn harness_profile(seed_coeff: f64) -> Profile {
        Profile {
            name: "harness".into(),
            harnack_growth: 3.0,
            absorb_growth: 3.0,
            seed_growth: 3.0,
            sqrt_log_min: 80.0,
            seed_coeff,
            t_coeff: 2.0 * seed_coeff,
        }
    }

    #[test]
    fn exp_fails_minimum_modulus_at_once() {
        let p = Profile::desk_relaxed();
        let e = ChainEntry::seed(x(16.0), p.seed_coeff);
        assert!(matches!(absorbing_step(&ExpFn, &e, &p).unwrap(), StepOutcome::MinModFailure { .. }));
        let (chain, term) = build_absorbing_chain(&ExpFn, &x(16.0), 5, &p).unwrap();
        assert_eq!(chain.len(), 1);
        assert!(matches!(term, Terminal::MinModFailure { index: 0, .. }));
    }

    #[test]
    fn thresholds_are_named() {
        let p = Profile::paper_strict();
        let e = ChainEntry::seed(x(16.0), p.seed_coeff);
        match absorbing_step(&ExpFn, &e, &p) {
            Err(Error::HypothesisFailed(list)) => assert!(list[0].starts_with("sqrt(log r)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monomial_step_matches_hand_formula() {
        let p = harness_profile(20.0);
        let f = Monomial::new(1.0, 8);
        let e = ChainEntry::seed(x(6400.0), p.seed_coeff);
        let StepOutcome::Next { entry, cert } = absorbing_step(&f, &e, &p).unwrap() else {
            panic!("monomials have no small minimum modulus");
        };
        let (d, k) = (0.0125, 1.25);
        let two_pi = std::f64::consts::TAU;
        let want_k = (1.0 - two_pi * d) * 8.0 * (k - 2.0 * d) * 6400.0 / (8.0 * 6400.0);
        assert!((entry.k_f64() - want_k).abs() < 1e-12);
        assert_eq!(entry.t.to_f64(), 51200.0);
        assert!(entry.k_f64() >= k * (1.0 - 9.0 * d));
        assert!(cert.covers());
    }

    #[test]
    fn monomial_chain_keeps_product_bound() {
        let p = harness_profile(20.0);
        let f = Monomial::new(1.0, 16);
        let (chain, term) = build_absorbing_chain(&f, &x(6400.0), 5, &p).unwrap();
        assert_eq!(term, Terminal::Budget);
        assert_eq!(chain.len(), 5);
        assert!(chain.all_certified());
        let d0 = chain.entries[0].delta_f64();
        let mut bound = 1.0 + 20.0 * d0;
        for e in &chain.entries[..4] {
            bound *= 1.0 - 9.0 * e.delta_f64();
        }
        assert!(bound >= 1.0 + 5.0 * d0);
        for w in chain.entries.windows(2) {
            assert!(w[1].k_f64() < w[0].k_f64());
        }
        for row in recurrence_residuals(&f, &chain).unwrap() {
            assert!(row.rel_error <= 1e-6 && row.shrink_ok, "{row:?}");
        }
    }

    #[test]
    fn gap_annuli_between_absorbed_annuli() {
        let f = Monomial::new(1.0, 8);
        let (chain, _) = build_absorbing_chain(&f, &x(6400.0), 3, &harness_profile(60.0)).unwrap();
        let gaps = gap_annuli(&f, &chain).unwrap();
        assert_eq!(gaps.entries.len(), 2);
        assert!(gaps.interleaving_ok);
        let a = &chain.entries[0];
        let six_pi_d = 3.0 * std::f64::consts::TAU * a.delta_f64();
        let want = a.k_f64() * (1.0 - six_pi_d) * 6400.0;
        assert!((gaps.entries[0].t_in.to_f64() - want).abs() < 1e-9 * want);
        let (two, _) = build_absorbing_chain(&f, &x(6400.0), 2, &harness_profile(60.0)).unwrap();
        assert_eq!(gap_annuli(&f, &two).unwrap().entries.len(), 1);
        let (thin, _) = build_absorbing_chain(&f, &x(6400.0), 2, &harness_profile(20.0)).unwrap();
        assert_eq!(gap_annuli(&f, &thin).unwrap_err(), Error::DegenerateInnerAnnulus(0));
        let (one, _) = build_absorbing_chain(&f, &x(6400.0), 1, &harness_profile(60.0)).unwrap();
        assert!(matches!(gap_annuli(&f, &one), Err(Error::TooShort(_))));
    }

    #[test]
    fn first_exp_splice() {
        let p = Profile::desk_relaxed();
        let seed = ChainEntry::seed(x(2.0), p.seed_coeff);
        let (lo, hi) = seed.window();
        let w = min_mod_witness(&ExpFn, &lo, &hi).unwrap().unwrap();
        let s = extend_chain_bohr(&ExpFn, &[seed], &w, &p, &ChainOptions::default()).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((s.next_s.t.to_f64() - e2).abs() < 1e-12);
        let want_t = (1.0 + 3.5 / e2.sqrt()) * e2;
        assert!((s.next_t.t.to_f64() - want_t).abs() < 1e-9);
        assert_eq!(s.chosen, Origin::BohrS);
        assert!(s.cert.covers());
        assert_eq!(s.exception, None);
        let far = extend_chain_bohr(
            &ExpFn,
            &[ChainEntry::seed(x(2.0), p.seed_coeff)],
            &w,
            &p,
            &ChainOptions {
                prefer_t: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(far.chosen, Origin::BohrT);
    }

    #[test]
    fn flagship_chain_shape() {
        let p = Profile::desk_relaxed();
        let chain = build_bn_sequence(&ExpFn, &x(2.0), 5, &p, &ChainOptions::default()).unwrap();
        assert_eq!(chain.len(), 5);
        assert_eq!(chain.n_j, vec![0, 1, 2, 3, 4]);
        assert!(chain.i_j.iter().all(Vec::is_empty));
        assert!(chain.all_certified());
        let log_r = align_partition(&ExpFn, &chain).unwrap();
        let v = log_r.to_f64();
        assert!(v > chain.entries[0].t_out().to_f64() && v < chain.entries[1].t.to_f64());
        let back = AnnuliChain::from_json(&chain.to_json().unwrap()).unwrap();
        assert_eq!(back, chain);
        let one = build_bn_sequence(&ExpFn, &x(2.0), 1, &p, &ChainOptions::default()).unwrap();
        assert!(one.certs.is_empty() && one.len() == 1);
    }

    #[test]
    fn infeasible_alignment() {
        let p = Profile::desk_relaxed();
        let mut chain = build_bn_sequence(&ExpFn, &x(2.0), 2, &p, &ChainOptions::default()).unwrap();
        chain.entries[1].t = x(5.0);
        assert!(matches!(align_partition(&ExpFn, &chain), Err(Error::NoFeasibleR(_))));
        chain.entries.truncate(1);
        let r = align_partition(&ExpFn, &chain).unwrap();
        assert!(r > chain.entries[0].t_out());
    }
}
