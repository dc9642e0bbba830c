//! Command-line surface: every subcommand reads one JSON config document,
//! writes machine-readable artifacts (JSON, and CSV for curves and
//! tables) into an output directory, and echoes the JSON to stdout.
//!
//! Reruns with the same config are byte-identical: all randomness is
//! seeded, nothing records a timestamp, and JSON objects serialize with
//! sorted keys. Exit status is 0 on success, 2 when the config or
//! arguments fail validation, 3 when a budget, precision, or convergence
//! limit is hit.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::gauss::{cf_expand, periodic_point, sample_gauss_digits, Continuants};
use crate::gibbs::{check_distortion, estimate_gibbs_constant, GibbsModel};
use crate::ldp::{
    deviation_rate_constrained, free_energy, mc_deviation, rate_legendre, DevEnsemble, FreeEnergy,
    PressureMethod, Side,
};
use crate::potential::{Anchor, Observable, Potential};
use crate::pressure::{
    pressure_periodic, pressure_preimage, pressure_preimage_accelerated, pressure_transfer_bracket,
    pressure_word_sum, pressure_word_sum_accelerated, PressureEstimate,
};
use crate::shift::{ShiftSpec, Symbol};
use crate::tightness::{build_schedule, check_expo_bound, mc_visit_counts, visit_distribution};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "thermoshift",
    version,
    about = "Pressure, Gibbs constants, and \
large-deviation rate functions on truncated countable Markov shifts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON/CSV artifacts (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker cap. Results are identical for every value.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// RNG seed; overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Pressure estimates from covering sums, periodic points, preimages,
    /// and the transfer-operator bracket.
    Pressure,
    /// Free energy on a beta grid and its Legendre-transform rate curve.
    Rate,
    /// Constrained deviation rates for the sampling ensembles.
    Deviate,
    /// Monte Carlo deviation probability with a Wilson interval.
    Mc,
    /// Excursion level schedule and the exact or sampled law of schedule
    /// violations, against the geometric bound.
    Tightness,
    /// Continued-fraction utilities with exact rational output.
    Cfrac {
        #[command(subcommand)]
        which: CfracCmd,
    },
    /// Estimate the Gibbs sandwich constant and check bounded distortion.
    VerifyGibbs,
}

#[derive(Subcommand)]
enum CfracCmd {
    /// Digit expansion of a point of (0, 1).
    Expand,
    /// Exact cylinder interval and length of a digit word.
    Cylinder,
    /// The periodic point of a digit word and its derivative weight.
    Periodic,
    /// Draw digit strings from the Gauss measure.
    Sample,
}

/// Parse arguments and dispatch. Returns the process exit status.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap's own help/version output carries a success status.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}

/// 2 for validation failures, 3 for budget/precision/convergence limits.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_)
        | Error::InvalidInput(_)
        | Error::ZeroRowOrColumn { .. }
        | Error::ThetaOutOfRange { .. }
        | Error::UnsupportedModel(_)
        | Error::InadmissibleWord { .. }
        | Error::InadmissibleAnchor
        | Error::NoWitnessFound { .. } => 2,
        Error::BudgetExceeded { .. }
        | Error::AlphabetTooLargeForEnumeration { .. }
        | Error::PrecisionExhausted { .. }
        | Error::TerminatedExpansion { .. }
        | Error::DivergedInterpolation { .. }
        | Error::NonconvexSamples { .. }
        | Error::EmptyConstraintSet => 3,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::ConfigInvalid("--workers must be at least 1".into()));
        }
    }
    let cfg = load_config(&cli.config)?;
    let seed = cli
        .seed
        .or_else(|| cfg.get("seed").and_then(|v| v.as_u64()))
        .unwrap_or(0);
    let outdir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Pressure => cmd_pressure(&cfg, &outdir, seed),
        Command::Rate => cmd_rate(&cfg, &outdir, seed),
        Command::Deviate => cmd_deviate(&cfg, &outdir, seed),
        Command::Mc => cmd_mc(&cfg, &outdir, seed),
        Command::Tightness => cmd_tightness(&cfg, &outdir, seed),
        Command::Cfrac { which } => cmd_cfrac(which, &cfg, &outdir, seed),
        Command::VerifyGibbs => cmd_verify_gibbs(&cfg, &outdir, seed),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Value> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("a --config file is required".into()))?;
    let text = std::fs::read_to_string(p)
        .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {}", p.display(), e)))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigInvalid(format!("config is not valid JSON: {}", e)))?;
    match v.as_object() {
        Some(obj) if !obj.is_empty() => Ok(v),
        _ => Err(Error::ConfigInvalid("config document is empty".into())),
    }
}

fn section<'a>(cfg: &'a Value, name: &str) -> Result<&'a Map<String, Value>> {
    cfg.get(name)
        .and_then(|v| v.as_object())
        .ok_or_else(|| Error::ConfigInvalid(format!("config needs a {:?} object", name)))
}

fn require<'a>(cfg: &'a Value, name: &str) -> Result<&'a Value> {
    cfg.get(name)
        .ok_or_else(|| Error::ConfigInvalid(format!("config needs {:?}", name)))
}

fn get_usize(sec: &Map<String, Value>, key: &str) -> Result<usize> {
    sec.get(key)
        .and_then(|v| v.as_u64())
        .map(|v| v as usize)
        .ok_or_else(|| Error::ConfigInvalid(format!("section needs integer {:?}", key)))
}

fn opt_usize(sec: &Map<String, Value>, key: &str, default: usize) -> Result<usize> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::ConfigInvalid(format!("{:?} must be an integer", key))),
    }
}

fn opt_u64(sec: &Map<String, Value>, key: &str, default: u64) -> Result<u64> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::ConfigInvalid(format!("{:?} must be an integer", key))),
    }
}

fn get_f64(sec: &Map<String, Value>, key: &str) -> Result<f64> {
    sec.get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::ConfigInvalid(format!("section needs number {:?}", key)))
}

fn opt_f64(sec: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::ConfigInvalid(format!("{:?} must be a number", key))),
    }
}

fn anchor_from_json(v: &Value) -> Result<Anchor> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::ConfigInvalid("anchor must be an object".into()))?;
    if let Some(p) = obj.get("point") {
        let y = p
            .as_f64()
            .ok_or_else(|| Error::ConfigInvalid("anchor point must be a number".into()))?;
        return Ok(Anchor::Point(y));
    }
    if let Some(s) = obj.get("symbols") {
        let arr = s
            .as_array()
            .ok_or_else(|| Error::ConfigInvalid("anchor symbols must be an array".into()))?;
        let syms: Option<Vec<Symbol>> = arr
            .iter()
            .map(|v| v.as_u64().map(|x| x as Symbol))
            .collect();
        return syms
            .map(Anchor::Symbols)
            .ok_or_else(|| Error::ConfigInvalid("anchor symbols must be integers".into()));
    }
    Err(Error::ConfigInvalid(
        "anchor needs \"point\" or \"symbols\"".into(),
    ))
}

fn side_from_str(s: &str) -> Result<Side> {
    match s {
        "at_least" => Ok(Side::AtLeast),
        "at_most" => Ok(Side::AtMost),
        other => Err(Error::ConfigInvalid(format!(
            "side must be \"at_least\" or \"at_most\", got {:?}",
            other
        ))),
    }
}

fn digit_word(sec: &Map<String, Value>) -> Result<Vec<u64>> {
    let arr = sec
        .get("word")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::ConfigInvalid("section needs a digit array \"word\"".into()))?;
    let w: Option<Vec<u64>> = arr.iter().map(|v| v.as_u64()).collect();
    let w = w.ok_or_else(|| Error::ConfigInvalid("word entries must be integers".into()))?;
    if w.is_empty() || w.iter().any(|&d| d < 1) {
        return Err(Error::ConfigInvalid(
            "word must be nonempty digits >= 1".into(),
        ));
    }
    Ok(w)
}

/// A grid is either an explicit array of numbers or {"min", "max", "steps"}
/// for steps + 1 evenly spaced points, endpoints included.
fn grid_from_json(v: &Value, what: &str) -> Result<Vec<f64>> {
    if let Some(arr) = v.as_array() {
        let g: Option<Vec<f64>> = arr.iter().map(|x| x.as_f64()).collect();
        return g.ok_or_else(|| Error::ConfigInvalid(format!("{} entries must be numbers", what)));
    }
    if let Some(obj) = v.as_object() {
        let min = obj.get("min").and_then(|x| x.as_f64());
        let max = obj.get("max").and_then(|x| x.as_f64());
        let steps = obj.get("steps").and_then(|x| x.as_u64());
        if let (Some(min), Some(max), Some(steps)) = (min, max, steps) {
            if steps == 0 || max <= min {
                return Err(Error::ConfigInvalid(format!(
                    "{} needs max > min and steps >= 1",
                    what
                )));
            }
            return Ok((0..=steps)
                .map(|i| min + (max - min) * i as f64 / steps as f64)
                .collect());
        }
    }
    Err(Error::ConfigInvalid(format!(
        "{} must be an array or {{min, max, steps}}",
        what
    )))
}

fn pressure_method_from_json(sec: &Map<String, Value>) -> Result<PressureMethod> {
    let default = Map::new();
    let m = sec
        .get("method")
        .and_then(|v| v.as_object())
        .unwrap_or(&default);
    let kind = m
        .get("kind")
        .and_then(|v| v.as_str())
        .unwrap_or("block_matrix");
    match kind {
        "block_matrix" => Ok(PressureMethod::BlockMatrix {
            iters: opt_usize(m, "iters", 80)?,
            tolerance: opt_f64(m, "tolerance", 1e-9)?,
        }),
        "transfer" => Ok(PressureMethod::TransferTruncated {
            degree: opt_usize(m, "degree", 48)?,
            iters: opt_usize(m, "iters", 60)?,
            tolerance: opt_f64(m, "tolerance", 1e-8)?,
        }),
        "transfer_extended" => Ok(PressureMethod::TransferExtended {
            degree: opt_usize(m, "degree", 40)?,
            extra: opt_usize(m, "extra", 400)?,
            iters: opt_usize(m, "iters", 60)?,
            tolerance: opt_f64(m, "tolerance", 1e-10)?,
        }),
        other => Err(Error::ConfigInvalid(format!(
            "unknown pressure method {:?}",
            other
        ))),
    }
}

/// Write an artifact and return nothing; failures to write are treated as
/// configuration problems (bad --out).
fn write_artifact(outdir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(outdir)
        .map_err(|e| Error::ConfigInvalid(format!("cannot create {}: {}", outdir.display(), e)))?;
    let path = outdir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| Error::ConfigInvalid(format!("cannot write {}: {}", path.display(), e)))
}

fn emit_json(outdir: &Path, name: &str, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::ConfigInvalid(format!("serialization failed: {}", e)))?;
    text.push('\n');
    write_artifact(outdir, name, &text)?;
    print!("{}", text);
    Ok(())
}

/// CSV cell for a float: shortest round-trip decimal, "inf"/"-inf"/"NaN"
/// spelled out so the column stays parseable.
fn csv_num(x: f64) -> String {
    format!("{}", x)
}

fn estimate_record(est: &PressureEstimate, m: usize) -> Value {
    json!({
        "ensemble": est.ensemble,
        "n": est.n,
        "M": m,
        "value": est.value,
        "lo": est.lo,
        "hi": est.hi,
    })
}

fn cmd_pressure(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let shift = ShiftSpec::from_json(require(cfg, "shift")?)?;
    let potential = Potential::from_json(require(cfg, "potential")?)?;
    let sec = section(cfg, "pressure")?;
    let budget = opt_u64(sec, "budget", 4_000_000)?;
    let accelerated = sec
        .get("accelerated")
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    let default_ens = json!(["word_sum", "periodic", "preimage"]);
    let ens_list = sec
        .get("ensembles")
        .unwrap_or(&default_ens)
        .as_array()
        .ok_or_else(|| Error::ConfigInvalid("ensembles must be an array".into()))?
        .clone();
    let m = shift.alphabet_size();
    let mut results = Vec::new();
    for e in &ens_list {
        let name = e
            .as_str()
            .ok_or_else(|| Error::ConfigInvalid("ensemble names must be strings".into()))?;
        let est = match name {
            "word_sum" => {
                let n = get_usize(sec, "n")?;
                if accelerated {
                    pressure_word_sum_accelerated(&shift, &potential, n, budget)?
                } else {
                    pressure_word_sum(&shift, &potential, n, budget)?
                }
            }
            "periodic" => pressure_periodic(&shift, &potential, get_usize(sec, "n")?, budget)?,
            "preimage" => {
                let n = get_usize(sec, "n")?;
                let anchor = match sec.get("anchor") {
                    Some(v) => anchor_from_json(v)?,
                    // Points anchor the Gauss tower; symbolic systems pull
                    // back from a one-symbol cylinder.
                    None => match &potential {
                        Potential::GaussLog => Anchor::Point(0.0),
                        _ => Anchor::Symbols(vec![0]),
                    },
                };
                if accelerated {
                    pressure_preimage_accelerated(&shift, &potential, &anchor, n, budget)?
                } else {
                    pressure_preimage(&shift, &potential, &anchor, n, budget)?
                }
            }
            "transfer" => pressure_transfer_bracket(
                &shift,
                &potential,
                opt_usize(sec, "degree", 64)?,
                opt_usize(sec, "iters", 40)?,
                opt_f64(sec, "tolerance", 0.01)?,
                sec.get("include_tail")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false),
            )?,
            other => {
                return Err(Error::ConfigInvalid(format!(
                    "unknown ensemble {:?}",
                    other
                )))
            }
        };
        results.push((est, name.to_string()));
    }
    let mut csv = String::from("n,ensemble,value,lo,hi\n");
    for (est, _) in &results {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            est.n,
            est.ensemble,
            csv_num(est.value),
            csv_num(est.lo),
            csv_num(est.hi)
        ));
    }
    write_artifact(outdir, "pressure.csv", &csv)?;
    let doc = json!({
        "seed": seed,
        "M": m,
        "results": results.iter().map(|(e, _)| estimate_record(e, m)).collect::<Vec<_>>(),
    });
    emit_json(outdir, "pressure.json", &doc)
}

fn cmd_rate(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let shift = ShiftSpec::from_json(require(cfg, "shift")?)?;
    let potential = Potential::from_json(require(cfg, "potential")?)?;
    let observable = Observable::from_json(require(cfg, "observable")?)?;
    let sec = section(cfg, "rate")?;
    let betas = grid_from_json(require_in(sec, "beta_grid")?, "beta_grid")?;
    let alphas = grid_from_json(require_in(sec, "alphas")?, "alphas")?;
    let method = pressure_method_from_json(sec)?;
    let slope_h = opt_f64(sec, "slope_h", 1e-3)?;
    let mut fe: FreeEnergy = free_energy(&shift, &potential, &observable, &betas, method)?;
    // Snapshot before the Legendre search pollutes the cache with probes.
    let lambda_grid: Vec<(f64, f64)> = fe.samples().to_vec();
    let mean = fe.slope_at_zero(slope_h)?;
    let curve = rate_legendre(&mut fe, &alphas)?;
    let check = curve.check_properties();
    let mut csv = String::from("alpha,I,beta_star\n");
    for p in &curve.points {
        csv.push_str(&format!(
            "{},{},{}\n",
            csv_num(p.alpha),
            csv_num(p.rate),
            csv_num(p.beta_star)
        ));
    }
    write_artifact(outdir, "rate.csv", &csv)?;
    let doc = json!({
        "seed": seed,
        "mean": mean,
        "max_bracket_width": fe.max_bracket_width(),
        "lambda": lambda_grid,
        "check": serde_json::to_value(check)
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?,
        "points": serde_json::to_value(&curve.points)
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?,
    });
    emit_json(outdir, "rate.json", &doc)
}

fn require_in<'a>(sec: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    sec.get(key)
        .ok_or_else(|| Error::ConfigInvalid(format!("section needs {:?}", key)))
}

fn ensemble_from_str(s: &str) -> Result<DevEnsemble> {
    match s {
        "lebesgue" => Ok(DevEnsemble::Lebesgue),
        "periodic" => Ok(DevEnsemble::Periodic),
        "preimage" => Ok(DevEnsemble::Preimage),
        "gibbs" => Ok(DevEnsemble::GibbsMeasure),
        other => Err(Error::ConfigInvalid(format!(
            "unknown ensemble {:?}",
            other
        ))),
    }
}

fn ensemble_name(e: DevEnsemble) -> &'static str {
    match e {
        DevEnsemble::Lebesgue => "lebesgue",
        DevEnsemble::Periodic => "periodic",
        DevEnsemble::Preimage => "preimage",
        DevEnsemble::GibbsMeasure => "gibbs",
    }
}

fn cmd_deviate(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let shift = ShiftSpec::from_json(require(cfg, "shift")?)?;
    let potential = Potential::from_json(require(cfg, "potential")?)?;
    let observable = Observable::from_json(require(cfg, "observable")?)?;
    let model = match cfg.get("model") {
        Some(v) => Some(GibbsModel::from_json(v)?),
        None => None,
    };
    let sec = section(cfg, "deviate")?;
    let side = side_from_str(
        sec.get("side")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::ConfigInvalid("deviate needs a side".into()))?,
    )?;
    let alpha = get_f64(sec, "alpha")?;
    let n = get_usize(sec, "n")?;
    let degree = opt_usize(sec, "degree", 32)?;
    let anchor = match sec.get("anchor") {
        Some(v) => Some(anchor_from_json(v)?),
        None => None,
    };
    let default_ens = json!(["lebesgue", "periodic", "preimage"]);
    let ens_list = sec
        .get("ensembles")
        .unwrap_or(&default_ens)
        .as_array()
        .ok_or_else(|| Error::ConfigInvalid("ensembles must be an array".into()))?
        .clone();
    let mut records = Vec::new();
    for e in &ens_list {
        let name = e
            .as_str()
            .ok_or_else(|| Error::ConfigInvalid("ensemble names must be strings".into()))?;
        let ens = ensemble_from_str(name)?;
        let rec = deviation_rate_constrained(
            &shift,
            &potential,
            &observable,
            model.as_ref(),
            ens,
            side,
            alpha,
            n,
            anchor.as_ref(),
            degree,
        )?;
        records.push(rec);
    }
    let mut csv = String::from("n,ensemble,value,lo,hi\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            ensemble_name(r.ensemble),
            csv_num(r.value),
            csv_num(r.lo),
            csv_num(r.hi)
        ));
    }
    write_artifact(outdir, "deviate.csv", &csv)?;
    let recs: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "ensemble": ensemble_name(r.ensemble),
                "side": if r.side == Side::AtLeast { "at_least" } else { "at_most" },
                "alpha": r.alpha,
                "n": r.n,
                "count_lo": r.count_lo,
                "count_hi": r.count_hi,
                "log_constrained": r.log_constrained,
                "log_normalizer": r.log_normalizer,
                "value": r.value,
                "lo": r.lo,
                "hi": r.hi,
            })
        })
        .collect();
    let doc = json!({ "seed": seed, "records": recs });
    emit_json(outdir, "deviate.json", &doc)
}

fn cmd_mc(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let model = GibbsModel::from_json(require(cfg, "model")?)?;
    let observable = Observable::from_json(require(cfg, "observable")?)?;
    let sec = section(cfg, "mc")?;
    let side = side_from_str(
        sec.get("side")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::ConfigInvalid("mc needs a side".into()))?,
    )?;
    let alpha = get_f64(sec, "alpha")?;
    let n = get_usize(sec, "n")?;
    let trials = opt_u64(sec, "trials", 100_000)?;
    let mc = mc_deviation(&model, &observable, side, alpha, n, trials, seed)?;
    let doc = serde_json::to_value(&mc).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    emit_json(outdir, "mc.json", &doc)
}

fn cmd_tightness(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let model = GibbsModel::from_json(require(cfg, "model")?)?;
    let sec = section(cfg, "tightness")?;
    let theta = get_f64(sec, "theta")?;
    let depth = opt_usize(sec, "depth", 4)?;
    let c0 = opt_f64(sec, "c0", 1.0)?;
    let n = get_usize(sec, "n")?;
    let mode = sec.get("mode").and_then(|v| v.as_str()).unwrap_or("exact");
    let schedule = build_schedule(&model, theta, depth, c0)?;
    let (p, mode_doc): (Vec<f64>, Value) = match mode {
        "exact" => {
            let d = visit_distribution(&model, &schedule, n)?;
            (
                d.probabilities,
                json!({"mode": "exact", "horizon": d.horizon}),
            )
        }
        "mc" => {
            let trials = opt_u64(sec, "trials", 100_000)?;
            let s = mc_visit_counts(&model, &schedule, n, trials, seed)?;
            (s.probabilities, json!({"mode": "mc", "trials": trials}))
        }
        other => {
            return Err(Error::ConfigInvalid(format!(
                "tightness mode must be \"exact\" or \"mc\", got {:?}",
                other
            )))
        }
    };
    let check = check_expo_bound(&p, theta, n)?;
    let doc = json!({
        "seed": seed,
        "theta": theta,
        "levels": schedule.levels,
        "n": n,
        "p": p,
        "bound": check.bounds,
        "pass": check.pass,
        "informative_from": check.informative_from,
        "run": mode_doc,
    });
    emit_json(outdir, "tightness.json", &doc)
}

fn rational(num: &num_bigint::BigUint, den: &num_bigint::BigUint) -> Value {
    json!({ "num": num.to_string(), "den": den.to_string() })
}

fn cmd_cfrac(which: &CfracCmd, cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let sec = section(cfg, "cfrac")?;
    match which {
        CfracCmd::Expand => {
            let x = get_f64(sec, "x")?;
            let digits = get_usize(sec, "digits")?;
            let d = cf_expand(x, digits)?;
            let c = Continuants::from_digits(&d);
            let doc = json!({
                "seed": seed,
                "x": x,
                "digits": d,
                "convergent": rational(&c.p, &c.q),
            });
            emit_json(outdir, "cfrac_expand.json", &doc)
        }
        CfracCmd::Cylinder => {
            let w = digit_word(sec)?;
            let c = Continuants::from_digits(&w);
            let ((lon, lod), (hin, hid)) = c.interval();
            let den = &c.q * (&c.q + &c.q_prev);
            let doc = json!({
                "seed": seed,
                "word": w,
                "lo": rational(&lon, &lod),
                "hi": rational(&hin, &hid),
                "length": rational(&num_bigint::BigUint::from(1u32), &den),
            });
            emit_json(outdir, "cfrac_cylinder.json", &doc)
        }
        CfracCmd::Periodic => {
            let w = digit_word(sec)?;
            let (x, log_weight) = periodic_point(&w)?;
            let doc = json!({
                "seed": seed,
                "word": w,
                "x": x,
                "weight": log_weight.exp(),
                "log_weight": log_weight,
            });
            emit_json(outdir, "cfrac_periodic.json", &doc)
        }
        CfracCmd::Sample => {
            let digits = get_usize(sec, "digits")?;
            let strings = opt_usize(sec, "strings", 1)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Vec<u64>> = (0..strings)
                .map(|_| sample_gauss_digits(&mut rng, digits))
                .collect();
            let doc = json!({
                "seed": seed,
                "digits_per_string": digits,
                "samples": samples,
            });
            emit_json(outdir, "cfrac_sample.json", &doc)
        }
    }
}

fn cmd_verify_gibbs(cfg: &Value, outdir: &Path, seed: u64) -> Result<()> {
    let shift = ShiftSpec::from_json(require(cfg, "shift")?)?;
    let model = GibbsModel::from_json(require(cfg, "model")?)?;
    let potential = Potential::from_json(require(cfg, "potential")?)?;
    let sec = section(cfg, "gibbs")?;
    let depth = opt_usize(sec, "depth", 8)?;
    let budget = opt_u64(sec, "budget", 50_000_000)?;
    let log_pressure = opt_f64(sec, "log_pressure", 0.0)?;
    let distortion_depth = opt_usize(sec, "distortion_depth", depth)?;
    let distortion_budget = opt_u64(sec, "distortion_budget", budget)?;
    let report = estimate_gibbs_constant(&shift, &model, &potential, log_pressure, depth, budget)?;
    let distortion = check_distortion(
        &shift,
        &model,
        distortion_depth,
        report.c0,
        distortion_budget,
    )?;
    let pass = !report.suspect_nonconvergent && distortion.violations == 0;
    let doc = json!({
        "seed": seed,
        "sandwich": serde_json::to_value(&report)
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?,
        "distortion": serde_json::to_value(&distortion)
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?,
        "pass": pass,
    });
    emit_json(outdir, "verify_gibbs.json", &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_the_error_enum() {
        assert_eq!(exit_code(&Error::ConfigInvalid("x".into())), 2);
        assert_eq!(
            exit_code(&Error::ZeroRowOrColumn {
                index: 0,
                is_row: true
            }),
            2
        );
        assert_eq!(exit_code(&Error::UnsupportedModel("x")), 2);
        assert_eq!(
            exit_code(&Error::BudgetExceeded {
                required: 10,
                budget: 1
            }),
            3
        );
        assert_eq!(exit_code(&Error::EmptyConstraintSet), 3);
        assert_eq!(exit_code(&Error::PrecisionExhausted { digits: vec![] }), 3);
    }

    #[test]
    fn grids_parse_both_forms() {
        let arr = json!([1.0, 2.0, 3.0]);
        assert_eq!(grid_from_json(&arr, "g").unwrap(), vec![1.0, 2.0, 3.0]);
        let lin = json!({"min": 0.0, "max": 1.0, "steps": 4});
        assert_eq!(
            grid_from_json(&lin, "g").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(grid_from_json(&json!("x"), "g").is_err());
        assert!(grid_from_json(&json!({"min": 1.0, "max": 0.0, "steps": 3}), "g").is_err());
    }

    #[test]
    fn anchors_parse_both_forms() {
        assert!(matches!(
            anchor_from_json(&json!({"point": 0.5})).unwrap(),
            Anchor::Point(_)
        ));
        assert!(matches!(
            anchor_from_json(&json!({"symbols": [0, 1]})).unwrap(),
            Anchor::Symbols(_)
        ));
        assert!(anchor_from_json(&json!({})).is_err());
    }
}
