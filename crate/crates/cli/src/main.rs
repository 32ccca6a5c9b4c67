//! Command-line entry point: simulations, verification experiments and
//! table emission. Parameters come from flags, with an optional JSON
//! config file merged underneath them; all runs are deterministic in the
//! seed. Exit status: 0 on success or a passing experiment, 1 on an
//! experiment failure or I/O error, 2 on a usage error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use mjp::asymptotics::{density, edge_b, EquilibriumSpec};
use mjp::dynamics::{simulate, simulate_event_log, simulate_top_rows};
use mjp::harness::{self, report_to_json, ExperimentReport};
use mjp::measures::{enumerate, JackMeasureSpec};
use mjp::rng::RNG_ALGORITHM;
use mjp::zrp::{simulate_zrp, ZrpInit};

#[derive(Parser)]
#[command(
    name = "mjp",
    about = "Multilevel Jack process simulator and verification harness",
    version
)]
struct Cli {
    /// JSON file with default parameter values; explicit flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for trial-parallel experiments (default: all cores;
    /// results do not depend on this)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the multilevel chain; emit snapshots (json) or an event log (csv)
    Simulate {
        #[arg(long = "N")]
        n_levels: Option<usize>,
        /// Lowest level of the chain (default 1)
        #[arg(long = "n")]
        base: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        /// Comma-separated snapshot times (json format)
        #[arg(long)]
        times: Option<String>,
        /// Event-log horizon (csv format)
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv (event log) or json (snapshots)
        #[arg(long)]
        format: Option<String>,
    },
    /// Run the top rows of the chain and emit the gap path over a late window
    SimulateTop {
        #[arg(long = "N")]
        n_levels: Option<usize>,
        #[arg(long = "k")]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        /// Warm-up time ratio: recording starts at t*N
        #[arg(long = "t")]
        t: Option<f64>,
        /// Recording window length
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the zero range process with source and sink
    Zrp {
        #[arg(long = "k")]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "t")]
        t: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// stationary | empty
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the equilibrium density on a uniform grid as CSV
    DensityTable {
        #[arg(long = "t")]
        t: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Number of grid intervals over [0, upper edge]
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate the fixed-time law up to a weight cutoff and emit JSON
    Enumerate {
        #[arg(long = "N")]
        n_levels: Option<usize>,
        #[arg(long = "s")]
        s: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        cutoff: Option<u32>,
        /// Maximum admissible tail mass above the cutoff
        #[arg(long)]
        tail_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named verification experiment and emit its report
    Verify {
        /// fixed-time | theorem1 | theorem2 | poisson | empirical-measure |
        /// edge-products | gap-ratio | nekrasov | zrp-stationarity
        experiment: String,
        #[arg(long = "N")]
        n_levels: Option<usize>,
        #[arg(long = "k")]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "t")]
        t: Option<f64>,
        #[arg(long = "s")]
        s: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cutoff: Option<u32>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parameters resolved from the config file; flags override these.
struct Defaults(BTreeMap<String, Value>);

impl Defaults {
    fn load(path: &Option<PathBuf>) -> Result<Defaults, String> {
        let mut map = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| format!("config {} is not valid JSON: {e}", p.display()))?;
            let obj = v
                .as_object()
                .ok_or_else(|| format!("config {} must be a JSON object", p.display()))?;
            for (k, v) in obj {
                map.insert(k.clone(), v.clone());
            }
        }
        Ok(Defaults(map))
    }

    fn f64(&self, key: &str, flag: Option<f64>) -> Option<f64> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_f64))
    }

    fn u64(&self, key: &str, flag: Option<u64>) -> Option<u64> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_u64))
    }

    fn usize(&self, key: &str, flag: Option<usize>) -> Option<usize> {
        flag.or_else(|| self.0.get(key).and_then(|v| v.as_u64()).map(|v| v as usize))
    }
}

fn usage_bail(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn require<T>(v: Option<T>, flag: &str) -> T {
    match v {
        Some(v) => v,
        None => usage_bail(&format!("missing required parameter {flag}")),
    }
}

fn write_output(path: &Option<PathBuf>, contents: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn metadata_json(base: usize, top: usize, theta: f64, seed: u64, events: u64) -> String {
    format!(
        "{{\"N\":{top},\"event_count\":{events},\"n\":{base},\"rng_algorithm\":\"{RNG_ALGORITHM}\",\"seed\":{seed},\"theta\":{theta}}}"
    )
}

fn write_metadata(out: &Option<PathBuf>, meta: &str) -> Result<(), String> {
    if let Some(p) = out {
        let mp = p.with_extension(match p.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{ext}.meta.json"),
            None => "meta.json".to_string(),
        });
        std::fs::write(&mp, meta).map_err(|e| format!("cannot write {}: {e}", mp.display()))?;
    }
    Ok(())
}

/// Appends one line per run to an index file next to the report.
fn update_index(out: &Path, report: &ExperimentReport) -> Result<(), String> {
    let dir = out.parent().unwrap_or_else(|| Path::new("."));
    let index = dir.join("index.json");
    let mut runs: Vec<Value> = if index.exists() {
        let text = std::fs::read_to_string(&index)
            .map_err(|e| format!("cannot read {}: {e}", index.display()))?;
        serde_json::from_str(&text).unwrap_or_default()
    } else {
        Vec::new()
    };
    let entry: Value = serde_json::from_str(&report_to_json(report)).expect("report is JSON");
    let mut slim = serde_json::Map::new();
    slim.insert("name".into(), entry["name"].clone());
    slim.insert("parameters".into(), entry["parameters"].clone());
    slim.insert("pass".into(), entry["pass"].clone());
    slim.insert(
        "file".into(),
        Value::String(out.file_name().unwrap_or_default().to_string_lossy().into_owned()),
    );
    runs.push(Value::Object(slim));
    std::fs::write(&index, serde_json::to_string_pretty(&runs).expect("serializes"))
        .map_err(|e| format!("cannot write {}: {e}", index.display()))
}

fn run_verify(
    experiment: &str,
    d: &Defaults,
    n_levels: Option<usize>,
    k: Option<usize>,
    theta: Option<f64>,
    t: Option<f64>,
    s: Option<f64>,
    horizon: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    cutoff: Option<u32>,
    bins: Option<usize>,
) -> Result<ExperimentReport, String> {
    let n_levels = d.usize("N", n_levels);
    let k = d.usize("k", k);
    let theta = d.f64("theta", theta);
    let t = d.f64("t", t);
    let s = d.f64("s", s);
    let horizon = d.f64("T", horizon);
    let trials = d.u64("trials", trials);
    let seed = d.u64("seed", seed).unwrap_or(1);
    let cutoff = d
        .u64("cutoff", cutoff.map(|c| c as u64))
        .map(|c| c as u32);
    let bins = d.usize("bins", bins);
    match experiment {
        "fixed-time" => harness::exp_fixed_time_exact(
            require(n_levels, "--N"),
            require(s, "--s"),
            require(theta, "--theta"),
            trials.unwrap_or(200_000),
            cutoff.unwrap_or(40),
            0.01,
            seed,
        )
        .map_err(|e| e.to_string()),
        "theorem1" => Ok(harness::exp_theorem1(
            require(n_levels, "--N"),
            k.unwrap_or(2),
            require(t, "--t"),
            s.unwrap_or(0.0),
            require(theta, "--theta"),
            trials.unwrap_or(5_000),
            0.05,
            0.05,
            seed,
        )),
        "theorem2" => Ok(harness::exp_theorem2(
            require(n_levels, "--N"),
            k.unwrap_or(2),
            require(t, "--t"),
            horizon.unwrap_or(2.0),
            require(theta, "--theta"),
            trials.unwrap_or(2_000),
            0.07,
            0.1,
            0.2,
            seed,
        )),
        "poisson" => Ok(harness::exp_poisson(
            require(n_levels, "--N"),
            horizon.unwrap_or(2.0),
            require(theta, "--theta"),
            trials.unwrap_or(2_000),
            seed,
        )),
        "empirical-measure" => Ok(harness::exp_empirical_measure(
            require(n_levels, "--N"),
            require(t, "--t"),
            s.unwrap_or(0.0),
            require(theta, "--theta"),
            bins.unwrap_or(20),
            trials.unwrap_or(3),
            0.05,
            seed,
        )),
        "edge-products" => Ok(harness::exp_edge_products(
            require(n_levels, "--N"),
            require(t, "--t"),
            s.unwrap_or(0.0),
            require(theta, "--theta"),
            trials.unwrap_or(5_000),
            0.1,
            seed,
        )),
        "gap-ratio" => Ok(harness::exp_gap_ratio(
            require(n_levels, "--N"),
            require(t, "--t"),
            s.unwrap_or(0.0),
            require(theta, "--theta"),
            4,
            trials.unwrap_or(1_000),
            0.1,
            seed,
        )),
        "nekrasov" => harness::exp_nekrasov_and_lemma54(
            require(n_levels, "--N"),
            require(s, "--s"),
            require(theta, "--theta"),
            cutoff.unwrap_or(50),
            [10.5, 20.5, 30.5],
            1e-6,
            if n_levels == Some(2) { 1e-8 } else { 1e-6 },
        )
        .map_err(|e| e.to_string()),
        "zrp-stationarity" => Ok(harness::exp_zrp_stationarity(
            k.unwrap_or(3),
            require(theta, "--theta"),
            require(t, "--t"),
            horizon.unwrap_or(5.0),
            trials.unwrap_or(100_000),
            0.02,
            seed,
        )),
        other => usage_bail(&format!(
            "unknown experiment {other:?}; expected one of fixed-time, theorem1, theorem2, \
             poisson, empirical-measure, edge-products, gap-ratio, nekrasov, zrp-stationarity"
        )),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    let defaults = Defaults::load(&cli.config)?;
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| format!("cannot configure {w} workers: {e}"))?;
    }
    match cli.cmd {
        Cmd::Simulate {
            n_levels,
            base,
            theta,
            times,
            horizon,
            seed,
            out,
            format,
        } => {
            let top = require(defaults.usize("N", n_levels), "--N");
            let base = defaults.usize("n", base).unwrap_or(1);
            let theta = require(defaults.f64("theta", theta), "--theta");
            let seed = defaults.u64("seed", seed).unwrap_or(1);
            let format = format.unwrap_or_else(|| "csv".to_string());
            if base < 1 || top < base {
                usage_bail("need 1 <= n <= N");
            }
            match format.as_str() {
                "csv" => {
                    let horizon = require(defaults.f64("T", horizon), "--T");
                    let (rows, events) = simulate_event_log(base, top, theta, horizon, seed);
                    let mut csv = String::from("time,level,index,position\n");
                    for r in &rows {
                        writeln!(csv, "{},{},{},{}", r.time, r.level, r.index, r.position)
                            .expect("string write");
                    }
                    write_output(&out, &csv)?;
                    write_metadata(&out, &metadata_json(base, top, theta, seed, events))?;
                }
                "json" => {
                    let times_text = require(times, "--times");
                    let mut obs: Vec<f64> = Vec::new();
                    for tok in times_text.split(',') {
                        obs.push(
                            tok.trim()
                                .parse::<f64>()
                                .map_err(|_| format!("bad time {tok:?}"))?,
                        );
                    }
                    if obs.windows(2).any(|w| w[1] < w[0]) || obs.iter().any(|&t| t < 0.0) {
                        usage_bail("--times must be nonnegative and sorted");
                    }
                    let snaps = simulate(base, top, theta, &obs, seed);
                    let body: Vec<Value> = obs
                        .iter()
                        .zip(&snaps)
                        .map(|(t, p)| {
                            serde_json::json!({
                                "time": t,
                                "rows": p.rows().iter().map(|r| r.parts().to_vec()).collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    write_output(&out, &serde_json::to_string_pretty(&body).expect("serializes"))?;
                    write_metadata(&out, &metadata_json(base, top, theta, seed, 0))?;
                }
                other => usage_bail(&format!("unknown format {other:?}; expected csv or json")),
            }
            Ok(true)
        }
        Cmd::SimulateTop {
            n_levels,
            k,
            theta,
            t,
            horizon,
            seed,
            out,
        } => {
            let top = require(defaults.usize("N", n_levels), "--N");
            let k = require(defaults.usize("k", k), "--k");
            let theta = require(defaults.f64("theta", theta), "--theta");
            let t = require(defaults.f64("t", t), "--t");
            let horizon = require(defaults.f64("T", horizon), "--T");
            let seed = defaults.u64("seed", seed).unwrap_or(1);
            if k + 1 > top {
                usage_bail("need k + 1 <= N");
            }
            let path = simulate_top_rows(top, k, theta, t, horizon, seed);
            let mut csv = String::from("time");
            for j in 1..=k {
                write!(csv, ",gap_{j}").expect("string write");
            }
            csv.push('\n');
            let mut row = |time: f64, gaps: &[u32]| {
                let mut line = format!("{time}");
                for g in gaps {
                    write!(line, ",{g}").expect("string write");
                }
                writeln!(csv, "{line}").expect("string write");
            };
            row(path.t0, &path.start);
            for (t_ev, g) in path.times.iter().zip(&path.gaps) {
                row(*t_ev, g);
            }
            write_output(&out, &csv)?;
            write_metadata(
                &out,
                &metadata_json(top - k, top, theta, seed, path.events),
            )?;
            Ok(true)
        }
        Cmd::Zrp {
            k,
            theta,
            t,
            horizon,
            seed,
            init,
            out,
        } => {
            let k = require(defaults.usize("k", k), "--k");
            let theta = require(defaults.f64("theta", theta), "--theta");
            let t = require(defaults.f64("t", t), "--t");
            let horizon = require(defaults.f64("T", horizon), "--T");
            let seed = defaults.u64("seed", seed).unwrap_or(1);
            let init = match init.as_deref().unwrap_or("stationary") {
                "stationary" => ZrpInit::Stationary,
                "empty" => ZrpInit::Given(vec![0; k]),
                other => usage_bail(&format!("unknown init {other:?}")),
            };
            let path = simulate_zrp(k, theta, t, horizon, seed, init);
            let mut csv = String::from("time");
            for j in 1..=k {
                write!(csv, ",pile_{j}").expect("string write");
            }
            csv.push('\n');
            let mut row = |time: f64, piles: &[u32]| {
                let mut line = format!("{time}");
                for p in piles {
                    write!(line, ",{p}").expect("string write");
                }
                writeln!(csv, "{line}").expect("string write");
            };
            row(0.0, &path.start);
            for (t_ev, st) in path.times.iter().zip(&path.states) {
                row(*t_ev, st);
            }
            write_output(&out, &csv)?;
            write_metadata(&out, &metadata_json(0, k, theta, seed, path.events))?;
            Ok(true)
        }
        Cmd::DensityTable {
            t,
            theta,
            grid,
            out,
        } => {
            let t = require(defaults.f64("t", t), "--t");
            let theta = require(defaults.f64("theta", theta), "--theta");
            let grid = defaults.usize("grid", grid).unwrap_or(400);
            if grid == 0 {
                usage_bail("--grid must be positive");
            }
            let spec = EquilibriumSpec::new(t, theta);
            let upper = edge_b(&spec);
            let mut csv = String::from("x,f\n");
            for i in 0..=grid {
                let x = upper * i as f64 / grid as f64;
                writeln!(csv, "{x},{}", density(x, &spec)).expect("string write");
            }
            write_output(&out, &csv)?;
            Ok(true)
        }
        Cmd::Enumerate {
            n_levels,
            s,
            theta,
            cutoff,
            tail_tol,
            out,
        } => {
            let n = require(defaults.usize("N", n_levels), "--N");
            let s = require(defaults.f64("s", s), "--s");
            let theta = require(defaults.f64("theta", theta), "--theta");
            let cutoff = defaults
                .u64("cutoff", cutoff.map(|c| c as u64))
                .unwrap_or(40) as u32;
            let tail_tol = defaults.f64("tail_tol", tail_tol).unwrap_or(1e-8);
            let spec = JackMeasureSpec::new(n, s, theta).map_err(|e| e.to_string())?;
            let em = enumerate(&spec, cutoff, tail_tol).map_err(|e| e.to_string())?;
            write_output(&out, &em.to_json())?;
            Ok(true)
        }
        Cmd::Verify {
            experiment,
            n_levels,
            k,
            theta,
            t,
            s,
            horizon,
            trials,
            seed,
            cutoff,
            bins,
            out,
        } => {
            let report = run_verify(
                &experiment,
                &defaults,
                n_levels,
                k,
                theta,
                t,
                s,
                horizon,
                trials,
                seed,
                cutoff,
                bins,
            )?;
            let json = report_to_json(&report);
            write_output(&out, &json)?;
            if let Some(p) = &out {
                update_index(p, &report)?;
            }
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
