//! Annular partitions by iterated maximum modulus, and orbit itineraries.

use serde::{Deserialize, Serialize};

use crate::complex::ComplexPoint;
use crate::error::{Error, Result};
use crate::extlog::ExtLogReal;
use crate::function::{evaluate, EntireFunction};
use crate::moduli::mu;

/// Relative distance to a level under which a point counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub log_r: ExtLogReal,
    /// `levels[n] = mu^n(log R)`.
    pub levels: Vec<ExtLogReal>,
    pub depth: usize,
    pub saturated_at: Option<usize>,
}

pub fn build_partition(f: &dyn EntireFunction, log_r: &ExtLogReal, depth: usize) -> Result<Partition> {
    let first = mu(f, log_r)?;
    if first <= *log_r {
        return Err(Error::InvalidR {
            log_r: log_r.to_string(),
            mu: first.to_string(),
        });
    }
    let mut levels = vec![log_r.clone(), first];
    levels.truncate(depth.max(1));
    let mut saturated_at = None;
    while levels.len() < depth {
        match mu(f, levels.last().unwrap()) {
            Ok(v) if !v.is_saturated() && v > *levels.last().unwrap() => levels.push(v),
            _ => {
                saturated_at = Some(levels.len());
                break;
            }
        }
    }
    Ok(Partition {
        log_r: log_r.clone(),
        depth: levels.len(),
        levels,
        saturated_at,
    })
}

impl Partition {
    /// Cell index of a log-modulus under half-open cells.
    pub fn annulus_index(&self, logmod: &ExtLogReal) -> Result<usize> {
        if *logmod < self.levels[0] {
            return Ok(0);
        }
        let last = self.levels.len();
        if *logmod >= self.levels[last - 1] {
            return Err(Error::IndexBeyondDepth { last });
        }
        // First level strictly above logmod.
        let n = self.levels.partition_point(|l| l <= logmod);
        Ok(n)
    }

    /// True when `logmod` lies within the boundary tolerance of a level.
    pub fn near_boundary(&self, logmod: &ExtLogReal) -> bool {
        self.levels.iter().any(|l| {
            let gap = (logmod - l).abs();
            let scale = l.abs().max(ExtLogReal::from_f64(1.0));
            // A ratio survives at tower scale, where `scale·tol` rounds back to `scale`.
            (&gap / &scale) <= ExtLogReal::from_f64(BOUNDARY_TOL)
        })
    }
}

pub fn annulus_index(p: &Partition, logmod: &ExtLogReal) -> Result<usize> {
    p.annulus_index(logmod)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationReason {
    CompleteToDepth,
    RangeExceeded,
    BeyondDepth,
    LeftPartitionNever,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Vec<usize>,
    pub truncated: bool,
    pub reason: TruncationReason,
    /// Some orbit point sat within tolerance of a cell boundary.
    pub ambiguous: bool,
}

impl Itinerary {
    pub fn from_symbols(symbols: Vec<usize>) -> Self {
        Self {
            symbols,
            truncated: false,
            reason: TruncationReason::CompleteToDepth,
            ambiguous: false,
        }
    }

    pub fn obeys_transition_rule(&self) -> bool {
        self.symbols.windows(2).all(|w| w[1] <= w[0] + 1)
    }
}

/// Log-modulus of `f(z)`, taken directly from the function when it is exact there.
pub(crate) fn image_logmod(f: &dyn EntireFunction, z: &ComplexPoint, w: &ComplexPoint) -> ExtLogReal {
    if let (ComplexPoint::Rect(h), ComplexPoint::Rect(_)) = (z, w) {
        let v = f.log_abs_hp(h);
        if v.is_finite() {
            return ExtLogReal::from_float(v);
        }
    }
    w.logmod()
}

/// Symbols of `z, f(z), …` for up to `max_steps` points.
pub fn compute_itinerary(f: &dyn EntireFunction, z: &ComplexPoint, p: &Partition, max_steps: usize) -> Itinerary {
    let mut symbols = Vec::with_capacity(max_steps);
    let mut ambiguous = false;
    let mut point = z.clone();
    let mut logmod = z.logmod();
    let mut reason = TruncationReason::CompleteToDepth;
    for n in 0..max_steps {
        ambiguous |= p.near_boundary(&logmod);
        match p.annulus_index(&logmod) {
            Ok(s) => symbols.push(s),
            Err(_) => {
                reason = TruncationReason::BeyondDepth;
                break;
            }
        }
        if n + 1 == max_steps {
            break;
        }
        match evaluate(f, &point) {
            Ok(w) => {
                logmod = image_logmod(f, &point, &w);
                point = w;
            }
            Err(_) => {
                reason = TruncationReason::RangeExceeded;
                break;
            }
        }
    }
    Itinerary {
        truncated: reason != TruncationReason::CompleteToDepth,
        symbols,
        reason,
        ambiguous,
    }
}

/// Offset `p` with every difference `s'_n - s_n` in `{p, p+1}`.
pub fn relabel_offset(it1: &Itinerary, it2: &Itinerary) -> Result<i64> {
    let diffs: Vec<i64> = it1
        .symbols
        .iter()
        .zip(&it2.symbols)
        .map(|(a, b)| *b as i64 - *a as i64)
        .collect();
    let Some(&p) = diffs.iter().min() else {
        return Err(Error::Precondition("itineraries share no prefix".into()));
    };
    if diffs.iter().any(|&d| d > p + 1) {
        return Err(Error::RelabelViolation(diffs));
    }
    Ok(p)
}

/// The last `tail_window` symbols climb by exactly one per step.
pub fn classify_fast_escaping(it: &Itinerary, tail_window: usize) -> bool {
    let n = it.symbols.len();
    let start = n.saturating_sub(tail_window);
    it.symbols[start..].windows(2).all(|w| w[1] == w[0] + 1)
}
