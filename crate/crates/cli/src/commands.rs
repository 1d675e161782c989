use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use annular_dyn::annuli::{align_partition, build_absorbing_chain, build_bn_sequence, gap_annuli, ChainOptions};
use annular_dyn::covering::{bohr_analyze, verify_annulus_covering, BohrGrid, BohrVerdict};
use annular_dyn::moduli::radial_moduli;
use annular_dyn::partition::{build_partition, classify_fast_escaping, compute_itinerary};
use annular_dyn::realize::{realize_itinerary, realize_prescribed, RealizeOptions};
use annular_dyn::report::{Report, Status};
use annular_dyn::synthesis::{
    branching_witness, count_admissible, gen_bounded, gen_oscillating, gen_periodic, gen_slow_escape,
    prescribed_rate_plan, JumpRule, PlanMode,
};
use annular_dyn::{
    function_by_name, AnnuliChain, Annulus, ComplexPoint, Error, ExtLogReal, FnRef, McClass, Profile, RateSpec,
    Result, TransitionSystem,
};

use crate::config::ConfigFile;
use crate::{Command, GlobalOpts, KindArg, ModeArg, Outcome, RuleArg, SynthArgs};

const DEFAULT_FN: &str = "exp";
const DEFAULT_PROFILE: &str = "desk-relaxed";
const DEFAULT_PREC: u32 = 128;
const DEFAULT_TOL: f64 = 1e-12;
const DEFAULT_C0: f64 = 20.0;
const DEFAULT_C1: f64 = 50.0;

/// Resolved run settings: flags, then the config file, then defaults.
struct Settings {
    cfg: ConfigFile,
    function: Option<String>,
    profile: Profile,
    prec: u32,
    tol: f64,
    c0: f64,
    c1: f64,
}

impl Settings {
    fn resolve(g: &GlobalOpts) -> Result<Self> {
        let cfg = match &g.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let function = cfg.pick(g.function.clone(), "fn")?;
        let profile_name = cfg.pick(g.profile.clone(), "profile")?.unwrap_or_else(|| DEFAULT_PROFILE.into());
        let profile = cfg.profile(&profile_name)?;
        let prec = cfg.pick(g.prec, "prec")?.unwrap_or(DEFAULT_PREC);
        if prec < 64 {
            return Err(Error::Precondition(format!("precision {prec} is below 64 bits")));
        }
        let tol = cfg.pick(g.tol, "tol")?.unwrap_or(DEFAULT_TOL);
        let c0 = cfg.pick(g.c0, "c0")?.unwrap_or(DEFAULT_C0);
        let c1 = cfg.pick(g.c1, "c1")?.unwrap_or(DEFAULT_C1);
        if !(tol > 0.0 && c0 > 0.0 && c1 > 0.0) {
            return Err(Error::Precondition("tol, c0 and c1 must be positive".into()));
        }
        Ok(Self {
            cfg,
            function,
            profile,
            prec,
            tol,
            c0,
            c1,
        })
    }

    fn function(&self) -> Result<FnRef> {
        function_by_name(self.function.as_deref().unwrap_or(DEFAULT_FN))
    }

    /// `--fn` wins over the function recorded in the chain.
    fn chain_function(&self, chain: &AnnuliChain) -> Result<FnRef> {
        function_by_name(self.function.as_deref().unwrap_or(&chain.function))
    }

    fn real(&self, s: &str) -> Result<ExtLogReal> {
        let x: ExtLogReal = s.parse()?;
        let prec = x.prec().max(self.prec);
        Ok(x.with_precision(prec))
    }

    /// A flag value, else the config key, parsed as an extended real.
    fn real_or_cfg(&self, flag: Option<&str>, key: &str) -> Result<ExtLogReal> {
        let s = flag
            .or_else(|| self.cfg.raw(key))
            .ok_or_else(|| Error::Precondition(format!("missing --{key}")))?;
        self.real(s)
    }
}

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Moduli { .. } => "moduli",
        Command::Partition { .. } => "partition",
        Command::Itinerary { .. } => "itinerary",
        Command::Covering { .. } => "covering",
        Command::Annuli { .. } => "annuli",
        Command::Synthesize(_) => "synthesize",
        Command::Realize { .. } => "realize",
        Command::Prescribed { .. } => "prescribed",
    }
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report<T: Serialize>(g: &GlobalOpts, cmd: &'static str, ok: bool, data: T) -> Result<Outcome> {
    let status = if ok { Status::Ok } else { Status::HypothesisFailed };
    emit(g.out.as_deref(), &Report::new(cmd, status, data).to_json()?)?;
    Ok(if ok { Outcome::Ok } else { Outcome::Unmet })
}

pub fn run(g: &GlobalOpts, cmd: &Command) -> Result<Outcome> {
    let s = Settings::resolve(g)?;
    match cmd {
        Command::Moduli { t_grid } => moduli(g, &s, t_grid),
        Command::Partition { log_r, depth } => {
            let f = s.function()?;
            let p = build_partition(f.as_ref(), &s.real(log_r)?, *depth)?;
            report(g, "partition", true, json!({ "function": f.id(), "partition": p }))
        }
        Command::Itinerary { log_r, depth, z, steps } => {
            let f = s.function()?;
            let log_r = s.real(log_r)?;
            let p = build_partition(f.as_ref(), &log_r, *depth)?;
            let (re, im) = pair(z)?;
            let point = ComplexPoint::from_f64(re, im, s.prec);
            let it = compute_itinerary(f.as_ref(), &point, &p, *steps);
            let data = json!({
                "point": point,
                "logR": log_r,
                "symbols": it.symbols,
                "truncated": it.truncated,
                "reason": it.reason,
                "ambiguous": it.ambiguous,
                "fast_escaping_tail": classify_fast_escaping(&it, 3),
            });
            report(g, "itinerary", true, data)
        }
        Command::Covering {
            source,
            target,
            bohr_t,
            grid,
            uncovered_csv,
        } => covering(g, &s, source.as_deref(), target.as_deref(), bohr_t.as_deref(), *grid, uncovered_csv.as_deref()),
        Command::Annuli { t0, n_max, prefer_t, grid } => annuli(g, &s, t0.as_deref(), *n_max, *prefer_t, *grid),
        Command::Synthesize(args) => synthesize(g, &s, args),
        Command::Realize {
            chain,
            seq,
            depth,
            log_r,
            retries,
        } => {
            let chain = load_chain(chain)?;
            let f = s.chain_function(&chain)?;
            let seq = parse_seq(seq)?;
            let log_r = log_r.as_deref().map(|r| s.real(r)).transpose()?;
            let opts = RealizeOptions {
                retries: *retries,
                ..RealizeOptions::default()
            };
            let res = realize_itinerary(f.as_ref(), &chain, log_r.as_ref(), &seq, *depth, &opts)?;
            report(g, "realize", res.complete(), res)
        }
        Command::Prescribed {
            chain,
            rate,
            log_r0,
            mode,
            eps,
            depth,
            branching,
        } => {
            let chain = load_chain(chain)?;
            let f = s.chain_function(&chain)?;
            let log_r0 = log_r0.as_deref().map(|r| s.real(r)).transpose()?;
            let rate = RateSpec::parse(&std::fs::read_to_string(rate)?, log_r0)?;
            let mode = match mode {
                ModeArg::Mc => PlanMode::Mc,
                ModeArg::Nomc => PlanMode::NoMc { eps: *eps },
            };
            let plan = prescribed_rate_plan(f.as_ref(), &rate, &chain, mode)?;
            let mut ok = plan.all_checks_pass();
            let realized = match depth {
                Some(d) => {
                    let rep = realize_prescribed(f.as_ref(), &plan, *d, &RealizeOptions::default())?;
                    ok &= rep.realization.complete() && rep.bounds_hold();
                    Some(rep)
                }
                None => None,
            };
            let witness = match branching {
                Some(d) => Some(branching_witness(f.as_ref(), &rate, &chain, *d)?),
                None => None,
            };
            let data = json!({ "plan": plan, "realization": realized, "branching": witness });
            report(g, "prescribed", ok, data)
        }
    }
}

fn moduli(g: &GlobalOpts, s: &Settings, grid: &str) -> Result<Outcome> {
    let f = s.function()?;
    let ts = parse_grid(grid)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "logM", "logm", "tol", "n_samples"]).map_err(csv_err)?;
    for t in ts {
        let rm = radial_moduli(f.as_ref(), &ExtLogReal::with_prec(t, s.prec), s.tol)?;
        w.write_record([
            t.to_string(),
            num(&rm.log_max),
            num(&rm.log_min),
            rm.tol.to_string(),
            rm.n_samples.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    emit(g.out.as_deref(), &String::from_utf8_lossy(&bytes))?;
    Ok(Outcome::Ok)
}

fn covering(
    g: &GlobalOpts,
    s: &Settings,
    source: Option<&str>,
    target: Option<&str>,
    bohr_t: Option<&str>,
    grid: usize,
    csv_path: Option<&Path>,
) -> Result<Outcome> {
    let f = s.function()?;
    if let (Some(src), Some(tgt)) = (source, target) {
        let src = annulus(s, src)?;
        let tgt = annulus(s, tgt)?;
        let cert = verify_annulus_covering(f.as_ref(), &src, &tgt, s.tol.max(1e-9));
        return report(g, "covering", cert.covers(), cert);
    }
    let t = bohr_t.ok_or_else(|| Error::Precondition("covering needs --source/--target or --bohr-t".into()))?;
    let grid = BohrGrid {
        n_mod: grid,
        n_arg: grid,
        ..BohrGrid::default()
    };
    let rep = bohr_analyze(f.as_ref(), &s.real(t)?, &grid, s.c0, s.c1)?;
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["logmod", "arg"]).map_err(csv_err)?;
        for p in &rep.uncovered {
            let arg = p.arg().map(|a| a.to_f64()).unwrap_or(0.0);
            w.write_record([num(&p.logmod()), arg.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
    }
    let ok = rep.verdict != BohrVerdict::Violation;
    report(g, "covering", ok, rep)
}

fn annuli(
    g: &GlobalOpts,
    s: &Settings,
    t0: Option<&str>,
    n_max: Option<usize>,
    prefer_t: bool,
    grid: usize,
) -> Result<Outcome> {
    let f = s.function()?;
    let t0 = s.real_or_cfg(t0, "t0")?;
    let n_max = s
        .cfg
        .pick(n_max, "n-max")?
        .ok_or_else(|| Error::Precondition("missing --n-max".into()))?;
    if f.mc_declared() == McClass::HasMc {
        let (chain, terminal) = build_absorbing_chain(f.as_ref(), &t0, n_max, &s.profile)?;
        let gaps = gap_annuli(f.as_ref(), &chain)?;
        let ok = chain.all_certified() && gaps.interleaving_ok;
        let data = json!({ "chain": chain, "terminal": terminal, "gap_annuli": gaps, "log_r": Value::Null });
        return report(g, "annuli", ok, data);
    }
    let opts = ChainOptions {
        grid: BohrGrid {
            n_mod: grid,
            n_arg: grid,
            ..BohrGrid::default()
        },
        prefer_t,
    };
    let chain = build_bn_sequence(f.as_ref(), &t0, n_max, &s.profile, &opts)?;
    let log_r = align_partition(f.as_ref(), &chain)?;
    let margins: Vec<f64> = chain.certs.iter().map(|c| c.margin_f64()).collect();
    let ok = chain.all_certified();
    report(g, "annuli", ok, json!({ "chain": chain, "log_r": log_r, "margins": margins }))
}

fn synthesize(g: &GlobalOpts, s: &Settings, a: &SynthArgs) -> Result<Outcome> {
    let mut ts = match (&a.chain, &a.ts) {
        (Some(p), _) => TransitionSystem::from_chain(&load_chain(p)?, a.horizon),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str::<TransitionSystem>(&text).map_err(|e| Error::Parse(e.to_string()))?
        }
        (None, None) => return Err(Error::Precondition("synthesize needs --chain or --ts".into())),
    };
    if let Some(rule) = a.rule {
        ts.rule = match rule {
            RuleArg::Level => JumpRule::Level,
            RuleArg::Time => JumpRule::Time,
        };
    }
    let ts = TransitionSystem::new(ts.n_j, ts.i_j, ts.horizon, ts.rule)?;
    let data = match a.kind {
        KindArg::Count => {
            let n = count_admissible(&ts, ts.horizon, a.s0, a.cap);
            json!({ "len": ts.horizon, "s0": a.s0, "cap": a.cap, "count": n.to_string() })
        }
        KindArg::Periodic => json!({ "sequences": [gen_periodic(&ts, a.period, a.s_min)?] }),
        KindArg::Bounded => json!({ "sequences": gen_bounded(&ts, a.s_min, a.s_max, a.count)? }),
        KindArg::Oscillating => {
            let peaks = parse_seq(a.peaks.as_deref().unwrap_or("3,4,5"))?;
            json!({ "sequences": [gen_oscillating(&ts, a.s_min, &peaks)?] })
        }
        KindArg::SlowEscape => {
            let path = a.rate.as_ref().ok_or_else(|| Error::Precondition("slow-escape needs --rate".into()))?;
            let rate = RateSpec::parse(&std::fs::read_to_string(path)?, None)?;
            let log_r = s.real_or_cfg(a.log_r.as_deref(), "log-r")?;
            let f = s.function()?;
            let p = build_partition(f.as_ref(), &log_r, a.depth)?;
            let out = gen_slow_escape(&ts, &rate, &p)?;
            json!({ "sequences": [&out.symbols], "slow_escape": out })
        }
    };
    report(g, "synthesize", true, data)
}

/// A chain file, either bare or wrapped in a report envelope.
pub fn load_chain(path: &Path) -> Result<AnnuliChain> {
    let text = std::fs::read_to_string(path)?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(data) = v.get_mut("data") {
        v = data.take();
    }
    if let Some(chain) = v.get_mut("chain") {
        v = chain.take();
    }
    serde_json::from_value(v).map_err(|e| Error::Parse(format!("chain: {e}")))
}

fn parse_seq(s: &str) -> Result<Vec<usize>> {
    if let Some(path) = s.strip_prefix('@') {
        let text = std::fs::read_to_string(path)?;
        return serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad symbol {x:?}"))))
        .collect()
}

fn pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse(format!("expected `a,b`, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn annulus(s: &Settings, text: &str) -> Result<Annulus> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected `t_in,t_out`, got {text:?}")))?;
    Annulus::new(s.real(a)?, s.real(b)?)
}

/// `start:stop:step`, stop included up to rounding.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("expected start:stop:step, got {s:?}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || b < a {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + step * i as f64).collect())
}

/// Shortest round-trip decimal when the value fits a double.
fn num(x: &ExtLogReal) -> String {
    let v = x.to_f64();
    if v.is_finite() {
        v.to_string()
    } else {
        x.to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_sequences() {
        assert_eq!(parse_grid("0.5:2:0.5").unwrap(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.5:6:0.5").unwrap().len(), 12);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_seq("2, 3,4").unwrap(), vec![2, 3, 4]);
        assert!(parse_seq("2,x").is_err());
        assert_eq!(pair("-1.5,2").unwrap(), (-1.5, 2.0));
    }
}
