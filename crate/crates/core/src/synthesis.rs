//! Admissible symbol sequences: the transition automaton, counting,
//! generators for the itinerary classes, and prescribed-rate plans.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::annuli::{absorbing_step, splice_to, AnnuliChain, ChainEntry, ChainOptions, StepOutcome, CHAIN_TOL};
use crate::error::{Error, Result};
use crate::extlog::ExtLogReal;
use crate::function::EntireFunction;
use crate::moduli::mu;
use crate::partition::{build_partition, Partition};
use crate::profile::Profile;

/// What a backjump index refers to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpRule {
    /// A jump may leave from any time `n` at which `s_n` is a listed index.
    #[default]
    Level,
    /// A jump may leave only at the listed times `n`.
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub n_j: Vec<usize>,
    /// `i_j[j]` holds at most one excluded target for a jump from `n_j[j]`.
    pub i_j: Vec<Vec<usize>>,
    /// Length of the prefixes the generators emit.
    pub horizon: usize,
    #[serde(default)]
    pub rule: JumpRule,
}

impl TransitionSystem {
    pub fn new(n_j: Vec<usize>, i_j: Vec<Vec<usize>>, horizon: usize, rule: JumpRule) -> Result<Self> {
        if n_j.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("n_j must be strictly increasing".into()));
        }
        if i_j.len() != n_j.len() || i_j.iter().any(|s| s.len() > 1) {
            return Err(Error::Precondition("one exception set of size <= 1 per backjump index".into()));
        }
        Ok(Self { n_j, i_j, horizon, rule })
    }

    /// The jump structure of a chain, read at the level of annulus indices.
    pub fn from_chain(chain: &AnnuliChain, horizon: usize) -> Self {
        Self {
            n_j: chain.n_j.clone(),
            i_j: chain.i_j.clone(),
            horizon,
            rule: JumpRule::Level,
        }
    }

    /// Excluded targets when a jump is allowed from symbol `s` at time `n`.
    fn jump_exclusions(&self, n: usize, s: usize) -> Option<&[usize]> {
        let key = match self.rule {
            JumpRule::Level => s,
            JumpRule::Time => n,
        };
        self.n_j.binary_search(&key).ok().map(|j| self.i_j[j].as_slice())
    }

    pub fn allows(&self, n: usize, s: usize, next: usize) -> bool {
        if next == s + 1 {
            return true;
        }
        match self.jump_exclusions(n, s) {
            Some(excl) => next <= s && !excl.contains(&next),
            None => false,
        }
    }

    /// Successors of `s` at time `n` with symbols capped at `cap`, ascending.
    fn successors(&self, n: usize, s: usize, cap: usize) -> Vec<usize> {
        let mut out: Vec<usize> = match self.jump_exclusions(n, s) {
            Some(excl) => (0..=s.min(cap)).filter(|t| !excl.contains(t)).collect(),
            None => Vec::new(),
        };
        if s < cap {
            out.push(s + 1);
        }
        out
    }
}

pub fn admissible_check(seq: &[usize], ts: &TransitionSystem) -> bool {
    seq.windows(2).enumerate().all(|(n, w)| ts.allows(n, w[0], w[1]))
}

/// Admissible prefixes of `len` symbols starting at `s0`, all symbols at most
/// `level_cap`.
pub fn count_admissible(ts: &TransitionSystem, len: usize, s0: usize, level_cap: usize) -> BigUint {
    if len == 0 {
        return BigUint::from(1u32);
    }
    if s0 > level_cap {
        return BigUint::default();
    }
    let mut counts = vec![BigUint::default(); level_cap + 1];
    counts[s0] = BigUint::from(1u32);
    for n in 0..len - 1 {
        let mut next = vec![BigUint::default(); level_cap + 1];
        for (s, c) in counts.iter().enumerate() {
            if *c == BigUint::default() {
                continue;
            }
            for t in ts.successors(n, s, level_cap) {
                next[t] += c;
            }
        }
        counts = next;
    }
    counts.into_iter().sum()
}

/// Periodic prefix of length `ts.horizon`: climb from `s_min` for `period`
/// symbols, then jump back.
pub fn gen_periodic(ts: &TransitionSystem, period: usize, s_min: usize) -> Result<Vec<usize>> {
    if period == 0 {
        return Err(Error::Precondition("period must be at least 1".into()));
    }
    let seq: Vec<usize> = (0..ts.horizon).map(|n| s_min + n % period).collect();
    for (n, w) in seq.windows(2).enumerate() {
        if !ts.allows(n, w[0], w[1]) {
            let why = match ts.jump_exclusions(n, w[0]) {
                Some(excl) => format!("jump {} -> {} at n = {n} is excluded by {excl:?}", w[0], w[1]),
                None => format!("no backjump from {} at n = {n}", w[0]),
            };
            return Err(Error::Unrealizable(why));
        }
    }
    Ok(seq)
}

/// `completable[n][s]`: some admissible continuation in `[lo, hi]` reaches the horizon.
fn completable(ts: &TransitionSystem, lo: usize, hi: usize) -> Vec<Vec<bool>> {
    let h = ts.horizon;
    let mut ok = vec![vec![false; hi + 1]; h.max(1)];
    if h == 0 {
        return ok;
    }
    for s in lo..=hi {
        ok[h - 1][s] = true;
    }
    for n in (0..h - 1).rev() {
        for s in lo..=hi {
            ok[n][s] = ts.successors(n, s, hi).into_iter().any(|t| t >= lo && ok[n + 1][t]);
        }
    }
    ok
}

/// The `count` lexicographically least admissible prefixes with symbols in
/// `[s_min, s_max]`.
pub fn gen_bounded(ts: &TransitionSystem, s_min: usize, s_max: usize, count: usize) -> Result<Vec<Vec<usize>>> {
    if count > 1 && s_max < s_min + 2 {
        return Err(Error::Precondition("branching needs s_max >= s_min + 2".into()));
    }
    if ts.horizon == 0 || s_max < s_min {
        return Err(Error::Unrealizable("empty symbol range or horizon".into()));
    }
    let ok = completable(ts, s_min, s_max);
    let mut out = Vec::with_capacity(count);
    let mut stack: Vec<Vec<usize>> = (s_min..=s_max).rev().filter(|&s| ok[0][s]).map(|s| vec![s]).collect();
    while let Some(prefix) = stack.pop() {
        if out.len() == count {
            break;
        }
        let n = prefix.len() - 1;
        if prefix.len() == ts.horizon {
            out.push(prefix);
            continue;
        }
        let s = prefix[n];
        for t in ts.successors(n, s, s_max).into_iter().rev() {
            if t >= s_min && ok[n + 1][t] {
                let mut p = prefix.clone();
                p.push(t);
                stack.push(p);
            }
        }
    }
    if out.len() < count {
        return Err(Error::Unrealizable(format!("only {} bounded prefixes exist", out.len())));
    }
    Ok(out)
}

/// Climbs from `s_min` to each scheduled peak in turn, jumping back to
/// `s_min` after every peak.
pub fn gen_oscillating(ts: &TransitionSystem, s_min: usize, peaks: &[usize]) -> Result<Vec<usize>> {
    let mut seq = vec![s_min];
    'outer: for &peak in peaks {
        if peak < s_min {
            return Err(Error::Precondition(format!("peak {peak} below s_min {s_min}")));
        }
        while *seq.last().unwrap() < peak {
            if seq.len() == ts.horizon {
                break 'outer;
            }
            seq.push(seq.last().unwrap() + 1);
        }
        if seq.len() == ts.horizon {
            break;
        }
        let n = seq.len() - 1;
        if !ts.allows(n, peak, s_min) {
            return Err(Error::Unrealizable(format!("no jump {peak} -> {s_min} at n = {n}")));
        }
        seq.push(s_min);
    }
    seq.truncate(ts.horizon);
    Ok(seq)
}

/// Radii `log a_n` with the floor `log R0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub log_a: Vec<ExtLogReal>,
    pub log_r0: ExtLogReal,
}

impl RateSpec {
    /// `log a_n = start + slope·n` for `len` terms.
    pub fn linear(start: f64, slope: f64, len: usize) -> Self {
        let log_a: Vec<ExtLogReal> = (0..len).map(|n| ExtLogReal::from_f64(start + slope * n as f64)).collect();
        Self {
            log_r0: ExtLogReal::from_f64(start.min(start + slope * len.saturating_sub(1) as f64)),
            log_a,
        }
    }

    pub fn from_values(log_a: Vec<ExtLogReal>, log_r0: Option<ExtLogReal>) -> Result<Self> {
        let first = log_a.first().ok_or_else(|| Error::Parse("empty rate".into()))?.clone();
        Ok(Self {
            log_r0: log_r0.unwrap_or(first),
            log_a,
        })
    }

    /// Lines `n log_a_n`, with `#` comments; indices must run 0, 1, 2, ...
    pub fn parse(text: &str, log_r0: Option<ExtLogReal>) -> Result<Self> {
        let mut vals = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(n), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse(format!("line {}: expected `n log_a_n`", lineno + 1)));
            };
            let n: usize = n.parse().map_err(|_| Error::Parse(format!("line {}: bad index", lineno + 1)))?;
            if n != vals.len() {
                return Err(Error::Parse(format!("line {}: index {n} out of order", lineno + 1)));
            }
            vals.push(v.parse::<ExtLogReal>()?);
        }
        Self::from_values(vals, log_r0)
    }

    pub fn len(&self) -> usize {
        self.log_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_a.is_empty()
    }

    /// `a_n >= R0` and `log a_{n+1} <= μ(log a_n)`.
    pub fn validate(&self, f: &dyn EntireFunction) -> Result<()> {
        for (n, a) in self.log_a.iter().enumerate() {
            if *a < self.log_r0 {
                return Err(Error::RateViolation(n));
            }
        }
        for (n, w) in self.log_a.windows(2).enumerate() {
            let cap = mu(f, &w[0])?;
            if w[1] > &cap + &cap.abs().mul_f64(CHAIN_TOL) {
                return Err(Error::RateViolation(n));
            }
        }
        Ok(())
    }
}

/// A symbol sequence that waits at each backjump level until the rate has
/// passed the next level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowEscape {
    pub symbols: Vec<usize>,
    /// Steps spent waiting at each visited backjump level.
    pub loiters: Vec<usize>,
    /// First time after which `levels[s_n] <= log a_n` is guaranteed.
    pub settled_from: usize,
    /// The partition ran out before the horizon.
    pub truncated: bool,
}

pub fn gen_slow_escape(ts: &TransitionSystem, rate: &RateSpec, partition: &Partition) -> Result<SlowEscape> {
    let len = ts.horizon.min(rate.len());
    let Some(&first) = ts.n_j.first() else {
        return Err(Error::Unrealizable("no backjump levels".into()));
    };
    let mut symbols = vec![first];
    let mut loiters = vec![0usize];
    let mut settled_from = None;
    let mut truncated = false;
    while symbols.len() < len {
        let n = symbols.len() - 1;
        let s = symbols[n];
        let level_ix = ts.n_j.binary_search(&s).ok();
        let next_level = level_ix.and_then(|j| ts.n_j.get(j + 1)).copied();
        let climbing = match (level_ix, next_level) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(_), Some(target)) => {
                let Some(bar) = partition.levels.get(target) else {
                    truncated = true;
                    break;
                };
                rate.log_a[n] >= *bar
            }
        };
        if climbing {
            if level_ix.is_some() && settled_from.is_none() {
                settled_from = Some(n);
            }
            if s + 1 >= partition.levels.len() {
                truncated = true;
                break;
            }
            symbols.push(s + 1);
            if ts.n_j.binary_search(&(s + 1)).is_ok() {
                loiters.push(0);
            }
        } else {
            if !ts.allows(n, s, s) {
                return Err(Error::Unrealizable(format!("cannot wait at level {s} (n = {n})")));
            }
            symbols.push(s);
            *loiters.last_mut().unwrap() += 1;
        }
    }
    Ok(SlowEscape {
        settled_from: settled_from.unwrap_or(symbols.len()),
        symbols,
        loiters,
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PlanMode {
    /// Jumps back through an existing chain; upper bound `M²(a_n)`.
    Mc,
    /// Builds its own chain seeded at `a_0`; upper bound `a_n^{1+eps}`.
    NoMc { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    M2,
    PowerOnePlusEps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCheck {
    pub n: usize,
    pub target: usize,
    /// `log a_n <= t_target`.
    pub lower_ok: bool,
    /// Upper bound on the target's outer edge, checked at rule-1 indices.
    pub upper_bound: Option<ExtLogReal>,
    pub upper_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePlan {
    pub mode: PlanMode,
    /// Chain index of `E_n`.
    pub targets: Vec<usize>,
    /// Indices `n` where `E_n` came from a jump (rule 1) or a splice.
    pub rule_one: Vec<usize>,
    pub bound_kind: BoundKind,
    pub checks: Vec<PlanCheck>,
    /// The rate the plan was built for.
    pub log_a: Vec<ExtLogReal>,
    /// The chain the targets refer to.
    pub chain: AnnuliChain,
}

impl RatePlan {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.lower_ok && c.upper_ok != Some(false))
    }
}

fn least_covering(chain: &AnnuliChain, log_a: &ExtLogReal, skip: &[usize]) -> Option<usize> {
    (0..chain.len()).find(|p| !skip.contains(p) && chain.entries[*p].t >= *log_a)
}

/// Chooses `E_n` for each term of the rate; see [`PlanMode`].
pub fn prescribed_rate_plan(
    f: &dyn EntireFunction,
    rate: &RateSpec,
    chain: &AnnuliChain,
    mode: PlanMode,
) -> Result<RatePlan> {
    rate.validate(f)?;
    if rate.is_empty() {
        return Err(Error::TooShort("empty rate".into()));
    }
    match mode {
        PlanMode::Mc => mc_plan(f, rate, chain),
        PlanMode::NoMc { eps } => no_mc_plan(f, rate, chain, eps),
    }
}

fn mc_plan(f: &dyn EntireFunction, rate: &RateSpec, chain: &AnnuliChain) -> Result<RatePlan> {
    let short = |n: usize| Error::TooShort(format!("no chain annulus reaches log a_{n}"));
    let mut targets = vec![least_covering(chain, &rate.log_a[0], &[]).ok_or_else(|| short(0))?];
    let mut rule_one = Vec::new();
    for n in 0..rate.len() - 1 {
        let m = targets[n];
        let next = match chain.n_j.binary_search(&m) {
            Ok(j) => {
                rule_one.push(n + 1);
                least_covering(chain, &rate.log_a[n + 1], &chain.i_j[j]).ok_or_else(|| short(n + 1))?
            }
            Err(_) if m + 1 < chain.len() => m + 1,
            Err(_) => return Err(short(n + 1)),
        };
        targets.push(next);
    }
    let mut checks = Vec::with_capacity(targets.len());
    for (n, &p) in targets.iter().enumerate() {
        let e = &chain.entries[p];
        let (upper_bound, upper_ok) = if rule_one.contains(&n) {
            let bound = mu(f, &mu(f, &rate.log_a[n])?)?;
            let ok = e.t_out() <= bound;
            (Some(bound), Some(ok))
        } else {
            (None, None)
        };
        checks.push(PlanCheck {
            n,
            target: p,
            lower_ok: e.t >= rate.log_a[n],
            upper_bound,
            upper_ok,
        });
    }
    Ok(RatePlan {
        mode: PlanMode::Mc,
        targets,
        rule_one,
        bound_kind: BoundKind::M2,
        checks,
        log_a: rate.log_a.clone(),
        chain: chain.clone(),
    })
}

// Absorbing steps from a seed at a_0, splicing to S = a_{n+1} whenever the
// minimum modulus is small. The template chain supplies function and profile.
fn no_mc_plan(f: &dyn EntireFunction, rate: &RateSpec, template: &AnnuliChain, eps: f64) -> Result<RatePlan> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let profile = Profile::by_name(&template.profile)?;
    let opts = ChainOptions::default();
    let mut chain = AnnuliChain {
        function: f.id(),
        profile: profile.name.clone(),
        entries: vec![ChainEntry::seed(rate.log_a[0].clone(), profile.seed_coeff)],
        n_j: Vec::new(),
        i_j: Vec::new(),
        certs: Vec::new(),
    };
    let mut rule_one = Vec::new();
    for n in 0..rate.len() - 1 {
        let cur = chain.entries[n].clone();
        match absorbing_step(f, &cur, &profile)? {
            StepOutcome::Next { entry, cert } => {
                chain.entries.push(entry);
                chain.certs.push(cert);
            }
            StepOutcome::MinModFailure { witness } => {
                let splice = splice_to(f, &cur, &witness, &rate.log_a[n + 1], &profile, &opts)?;
                chain.entries.push(splice.chosen_entry().clone());
                chain.certs.push(splice.cert);
                rule_one.push(n + 1);
            }
        }
    }
    let checks = chain
        .entries
        .iter()
        .enumerate()
        .map(|(n, e)| {
            let bound = rate.log_a[n].mul_f64(1.0 + eps);
            let fired = rule_one.contains(&n);
            PlanCheck {
                n,
                target: n,
                lower_ok: e.t >= rate.log_a[n],
                upper_ok: fired.then(|| e.t_out() <= bound),
                upper_bound: fired.then_some(bound),
            }
        })
        .collect();
    Ok(RatePlan {
        mode: PlanMode::NoMc { eps },
        targets: (0..chain.len()).collect(),
        rule_one,
        bound_kind: BoundKind::PowerOnePlusEps,
        checks,
        log_a: rate.log_a.clone(),
        chain,
    })
}

/// Prefix-level slowness: for each `ell` in `1..=depth` some `n` has
/// `log a_{n+ell} < levels[n]`.
pub fn slowness_holds(f: &dyn EntireFunction, rate: &RateSpec, depth: usize) -> Result<bool> {
    let levels = build_partition(f, &rate.log_r0, rate.len())?.levels;
    Ok((1..=depth.max(1)).all(|ell| {
        (0..levels.len()).any(|n| n + ell < rate.len() && rate.log_a[n + ell] < levels[n])
    }))
}

/// `2^depth` distinct admissible target sequences: at the first `depth`
/// jumps whose least target lies at or below the current index, branch
/// between that target and the next index up.
pub fn branching_witness(
    f: &dyn EntireFunction,
    rate: &RateSpec,
    chain: &AnnuliChain,
    depth: usize,
) -> Result<Vec<Vec<usize>>> {
    rate.validate(f)?;
    let slowness_ok = slowness_holds(f, rate, depth)?;
    let first = least_covering(chain, &rate.log_a[0], &[])
        .ok_or_else(|| Error::TooShort("no chain annulus reaches log a_0".into()))?;
    let mut done = Vec::new();
    let mut fewest = usize::MAX;
    let mut stack = vec![(vec![first], depth)];
    while let Some((seq, left)) = stack.pop() {
        let n = seq.len() - 1;
        if seq.len() == rate.len() {
            if left > 0 {
                fewest = fewest.min(depth - left);
            } else {
                done.push(seq);
            }
            continue;
        }
        let m = seq[n];
        let mut push = |t: usize, left: usize| {
            let mut s = seq.clone();
            s.push(t);
            stack.push((s, left));
        };
        match chain.n_j.binary_search(&m) {
            Ok(j) => {
                let p = least_covering(chain, &rate.log_a[n + 1], &chain.i_j[j])
                    .ok_or_else(|| Error::TooShort(format!("no chain annulus reaches log a_{}", n + 1)))?;
                if left > 0 && p <= m && m + 1 < chain.len() {
                    push(m + 1, left - 1);
                    push(p, left - 1);
                } else {
                    push(p, left);
                }
            }
            Err(_) if m + 1 < chain.len() => push(m + 1, left),
            Err(_) => return Err(Error::TooShort(format!("chain ends at {m}"))),
        }
    }
    if fewest != usize::MAX {
        return Err(Error::InsufficientBranching { found: fewest, slowness_ok });
    }
    done.sort();
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annuli::build_bn_sequence;
    use crate::function::ExpFn;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn flagship() -> &'static AnnuliChain {
        static CHAIN: OnceLock<AnnuliChain> = OnceLock::new();
        CHAIN.get_or_init(|| {
            build_bn_sequence(&ExpFn, &ExtLogReal::from_f64(2.0), 5, &Profile::desk_relaxed(), &ChainOptions::default())
                .unwrap()
        })
    }

    fn time_ts(n_j: Vec<usize>, i_j: Vec<Vec<usize>>, horizon: usize) -> TransitionSystem {
        TransitionSystem::new(n_j, i_j, horizon, JumpRule::Time).unwrap()
    }

    fn dense(horizon: usize) -> TransitionSystem {
        TransitionSystem::new((0..5).collect(), vec![vec![]; 5], horizon, JumpRule::Level).unwrap()
    }

    fn brute_force(ts: &TransitionSystem, len: usize, s0: usize, cap: usize) -> u64 {
        if len == 0 {
            return 1;
        }
        let width = cap as u64 + 1;
        let total = width.pow(len as u32 - 1);
        (0..total)
            .filter(|code| {
                let mut seq = vec![s0];
                let mut c = *code;
                for _ in 1..len {
                    seq.push((c % width) as usize);
                    c /= width;
                }
                s0 <= cap && admissible_check(&seq, ts)
            })
            .count() as u64
    }

    #[test]
    fn admissibility_examples() {
        let ts = time_ts(vec![2], vec![vec![]], 4);
        assert!(admissible_check(&[0, 1, 2, 0], &ts));
        assert!(!admissible_check(&[0, 1, 2, 4], &ts));
        let ts = time_ts(vec![2], vec![vec![1]], 4);
        assert!(!admissible_check(&[0, 1, 2, 1], &ts));
        let lvl = TransitionSystem::new(vec![2], vec![vec![]], 4, JumpRule::Level).unwrap();
        assert!(admissible_check(&[0, 1, 2, 0, 1, 2, 2], &lvl));
        assert!(!admissible_check(&[0, 1, 0], &lvl));
        assert!(TransitionSystem::new(vec![2, 2], vec![vec![], vec![]], 4, JumpRule::Time).is_err());
        assert!(TransitionSystem::new(vec![2], vec![vec![0, 1]], 4, JumpRule::Time).is_err());
    }

    #[test]
    fn count_examples() {
        let none = time_ts(vec![9], vec![vec![]], 8);
        assert_eq!(count_admissible(&none, 6, 0, 10), BigUint::from(1u32));
        let one = time_ts(vec![0], vec![vec![]], 8);
        assert_eq!(count_admissible(&one, 2, 2, 3), BigUint::from(4u32));
        let ts = dense(6);
        assert_eq!(count_admissible(&ts, 6, 2, 4), BigUint::from(brute_force(&ts, 6, 2, 4)));
        // Frozen from exhaustive enumeration.
        assert_eq!(brute_force(&ts, 6, 2, 4), 507);
    }

    #[test]
    fn periodic_and_blocked() {
        let ts = dense(9);
        assert_eq!(gen_periodic(&ts, 3, 2).unwrap(), vec![2, 3, 4, 2, 3, 4, 2, 3, 4]);
        assert_eq!(gen_periodic(&ts, 1, 2).unwrap(), vec![2; 9]);
        let blocked = TransitionSystem::new(vec![2], vec![vec![2]], 5, JumpRule::Level).unwrap();
        match gen_periodic(&blocked, 1, 2) {
            Err(Error::Unrealizable(why)) => assert!(why.contains("[2]"), "{why}"),
            other => panic!("{other:?}"),
        }
        assert!(gen_periodic(&ts, 0, 2).is_err());
    }

    #[test]
    fn bounded_prefixes() {
        let ts = dense(12);
        let seqs = gen_bounded(&ts, 2, 4, 8).unwrap();
        assert_eq!(seqs.len(), 8);
        for (i, s) in seqs.iter().enumerate() {
            assert_eq!(s.len(), 12);
            assert!(admissible_check(s, &ts));
            assert!(s.iter().all(|&v| (2..=4).contains(&v)));
            for t in &seqs[..i] {
                assert!(t < s);
            }
        }
        assert_eq!(gen_bounded(&ts, 2, 4, 1).unwrap(), vec![vec![2; 12]]);
        assert!(gen_bounded(&ts, 2, 3, 2).is_err());
    }

    #[test]
    fn oscillating_returns_to_floor() {
        let ts = dense(20);
        let seq = gen_oscillating(&ts, 1, &[2, 3, 4, 4]).unwrap();
        assert_eq!(&seq[..9], &[1, 2, 1, 2, 3, 1, 2, 3, 4]);
        assert!(admissible_check(&seq, &ts));
        let floors = seq.iter().filter(|&&s| s == 1).count();
        assert!(floors >= 4);
        let stuck = TransitionSystem::new(vec![4], vec![vec![]], 20, JumpRule::Level).unwrap();
        assert!(gen_oscillating(&stuck, 1, &[2]).is_err());
    }

    #[test]
    fn slow_escape_waits_for_the_rate() {
        let p = build_partition(&ExpFn, &ExtLogReal::from_f64(2.0), 4).unwrap();
        let ts = TransitionSystem::new(vec![0, 1, 2, 3], vec![vec![]; 4], 40, JumpRule::Level).unwrap();
        let rate = RateSpec::linear(0.0, 1.0, 40);
        let out = gen_slow_escape(&ts, &rate, &p).unwrap();
        assert!(admissible_check(&out.symbols, &ts));
        assert!(out.loiters.iter().all(|&l| l > 0));
        assert!(out.symbols.windows(2).all(|w| w[1] >= w[0]));
        for n in out.settled_from..out.symbols.len() {
            assert!(p.levels[out.symbols[n]] <= rate.log_a[n], "n = {n}");
        }
        // A rate above every level climbs at once.
        let fast = RateSpec::linear(1e9, 0.0, 3);
        let out = gen_slow_escape(&ts, &fast, &p).unwrap();
        assert_eq!(out.symbols, vec![0, 1, 2]);
        // A horizon before the first threshold waits throughout.
        let short = RateSpec::linear(0.0, 1.0, 5);
        assert_eq!(gen_slow_escape(&ts, &short, &p).unwrap().symbols, vec![0; 5]);
    }

    #[test]
    fn rate_parsing_and_validation() {
        let r = RateSpec::parse("# slow\n0 2\n1 2.5\n2 3\n", None).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.log_r0.to_f64(), 2.0);
        assert!(r.validate(&ExpFn).is_ok());
        assert!(RateSpec::parse("0 2\n2 3\n", None).is_err());
        let bad = RateSpec::from_values(vec![2.0.into(), 3.0.into(), 30.0.into()], None).unwrap();
        assert_eq!(bad.validate(&ExpFn), Err(Error::RateViolation(1)));
    }

    #[test]
    fn mc_plan_least_index() {
        let chain = flagship();
        let rate = RateSpec::linear(2.0, 0.5, 16);
        let plan = prescribed_rate_plan(&ExpFn, &rate, chain, PlanMode::Mc).unwrap();
        assert_eq!(plan.bound_kind, BoundKind::M2);
        assert!(plan.all_checks_pass());
        assert!(plan.rule_one.len() >= 8);
        for &n in &plan.rule_one {
            let p = plan.targets[n];
            assert!(p >= 1);
            assert!(chain.entries[p - 1].t < rate.log_a[n] && rate.log_a[n] <= chain.entries[p].t);
        }
        let ts = TransitionSystem::from_chain(chain, 16);
        assert!(admissible_check(&plan.targets, &ts));
        // Radii of the chain itself: every step moves up one.
        let own = RateSpec::from_values(chain.entries.iter().map(|e| e.t.clone()).collect(), None).unwrap();
        let plan = prescribed_rate_plan(&ExpFn, &own, chain, PlanMode::Mc).unwrap();
        assert_eq!(plan.targets, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn no_mc_plan_tracks_rate() {
        let rate = RateSpec::linear(8.0, 4.0, 5);
        let plan = prescribed_rate_plan(&ExpFn, &rate, flagship(), PlanMode::NoMc { eps: 1.0 }).unwrap();
        assert_eq!(plan.bound_kind, BoundKind::PowerOnePlusEps);
        assert_eq!(plan.rule_one, vec![1, 2, 3, 4]);
        assert!(plan.all_checks_pass(), "{:?}", plan.checks);
        assert!(plan.chain.certs.iter().all(|c| c.covers()));
    }

    #[test]
    fn branching_tree() {
        let chain = flagship();
        let rate = RateSpec::linear(2.0, 0.5, 10);
        let tree = branching_witness(&ExpFn, &rate, chain, 4).unwrap();
        assert_eq!(tree.len(), 16);
        let ts = TransitionSystem::from_chain(chain, 10);
        for (i, s) in tree.iter().enumerate() {
            assert!(admissible_check(s, &ts));
            assert!(tree[..i].iter().all(|t| t != s));
        }
        assert_eq!(branching_witness(&ExpFn, &rate, chain, 0).unwrap().len(), 1);
        let own = RateSpec::from_values(chain.entries.iter().map(|e| e.t.clone()).collect(), None).unwrap();
        assert_eq!(
            branching_witness(&ExpFn, &own, chain, 4),
            Err(Error::InsufficientBranching { found: 0, slowness_ok: false })
        );
    }

    fn arb_ts() -> impl Strategy<Value = TransitionSystem> {
        (
            proptest::collection::btree_set(0usize..8, 0..5),
            proptest::collection::vec(proptest::option::of(0usize..6), 5),
            any::<bool>(),
        )
            .prop_map(|(set, excl, time)| {
                let n_j: Vec<usize> = set.into_iter().collect();
                let i_j = n_j.iter().zip(&excl).map(|(_, e)| e.iter().copied().collect()).collect();
                let rule = if time { JumpRule::Time } else { JumpRule::Level };
                TransitionSystem::new(n_j, i_j, 8, rule).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn dp_matches_enumeration(ts in arb_ts(), len in 1usize..7, s0 in 0usize..5, cap in 0usize..5) {
            prop_assert_eq!(count_admissible(&ts, len, s0, cap), BigUint::from(brute_force(&ts, len, s0, cap)));
        }

        #[test]
        fn generators_emit_admissible(ts in arb_ts(), period in 1usize..4, s_min in 0usize..3) {
            if let Ok(seq) = gen_periodic(&ts, period, s_min) {
                prop_assert!(admissible_check(&seq, &ts));
            }
            if let Ok(seqs) = gen_bounded(&ts, s_min, s_min + 2, 3) {
                for s in &seqs {
                    prop_assert!(admissible_check(s, &ts));
                }
            }
            if let Ok(seq) = gen_oscillating(&ts, s_min, &[s_min + 1, s_min + 2]) {
                prop_assert!(admissible_check(&seq, &ts));
            }
        }
    }
}
