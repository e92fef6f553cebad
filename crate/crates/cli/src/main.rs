//! Command-line front end for the hybrid-memory toolkit.
//!
//! Subcommands cover the everyday workflows: `simulate` integrates a named
//! example system and writes the arc to disk, `distance` compares two stored
//! arcs, `perturb-study` sweeps inflation levels and reports convergence,
//! `kl-check` tests a decay envelope against a solved run, and `viability`
//! searches for a flow direction that keeps the head inside the flow set.
//!
//! Every report goes to stdout as a versioned JSON envelope so scripts can
//! sniff the schema before parsing. Runs are deterministic: the same seed and
//! flags produce byte-identical files and stdout on every invocation. Set
//! `HMK_THREADS` to cap the worker pool used by the experiment commands.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hmk_core::{
    arc_distance, arc_distance_capped, arc_from_json, arc_to_json, check_kl, example,
    memory_arc_from_json, solve, uniform_distance, viability_probe, wellposedness_experiment,
    HybridArc, KLBound, MemoryArc, Priority, QuadratureSpec, Selector, SolveOptions, Target,
};

/// Report schema tag, bumped whenever a field changes meaning or type.
const SCHEMA: &str = "hmk-report/1";

/// Point budget per cloud when the distance command caps graph sampling.
const DEFAULT_CAP: usize = 240;

#[derive(Parser)]
#[command(name = "hmk", version, about = "Simulate and analyze hybrid systems with memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a named system and write the resulting arc to a file.
    Simulate {
        /// System name, with optional parameter suffix like "dde:delta_timer=5".
        #[arg(long)]
        system: String,
        /// Path to a stored memory arc used as the initial history.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Flow step size.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        /// Flow-time horizon.
        #[arg(long = "T", default_value_t = 1.0)]
        horizon_t: f64,
        /// Jump budget.
        #[arg(long = "J", default_value_t = 10)]
        horizon_j: i64,
        /// Seed for vertex selection in set-valued steps.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Resolution when flowing and jumping are both allowed.
        #[arg(long, value_enum, default_value_t = PriorityArg::JumpFirst)]
        priority: PriorityArg,
        /// Output path for the arc JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV dump with columns t,j,x0..x{n-1}.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare two stored arcs.
    Distance {
        /// First arc JSON.
        #[arg(long)]
        a: PathBuf,
        /// Second arc JSON.
        #[arg(long)]
        b: PathBuf,
        /// Distance notion to report.
        #[arg(long, value_enum, default_value_t = MetricArg::Graphical)]
        metric: MetricArg,
        /// Cap on graph points per arc; 0 disables capping.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Solve a system at several inflation levels and report arc distances.
    PerturbStudy {
        /// System name, with optional parameter suffix.
        #[arg(long)]
        system: String,
        /// Path to a stored memory arc used as the initial history.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Inflation levels, largest first.
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        /// Flow step size.
        #[arg(long, default_value_t = 0.002)]
        h: f64,
        /// Flow-time horizon.
        #[arg(long = "T", default_value_t = 1.0)]
        horizon_t: f64,
        /// Jump budget.
        #[arg(long = "J", default_value_t = 10)]
        horizon_j: i64,
        /// Seed shared by vertex selection and perturbation draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a system and test a decay envelope on the result.
    KlCheck {
        /// System name, with optional parameter suffix.
        #[arg(long)]
        system: String,
        /// Path to a stored memory arc used as the initial history.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Envelope gain, at least 1.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Envelope decay rate, positive.
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Additive offset on the envelope.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Lower corners of a box target, comma separated.
        #[arg(long = "w-lo", value_delimiter = ',')]
        w_lo: Option<Vec<f64>>,
        /// Upper corners of a box target, comma separated.
        #[arg(long = "w-hi", value_delimiter = ',')]
        w_hi: Option<Vec<f64>>,
        /// Flow step size.
        #[arg(long, default_value_t = 0.001)]
        h: f64,
        /// Flow-time horizon.
        #[arg(long = "T", default_value_t = 3.0)]
        horizon_t: f64,
        /// Jump budget.
        #[arg(long = "J", default_value_t = 10)]
        horizon_j: i64,
        /// Seed for vertex selection in set-valued steps.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for a flow direction that keeps the head viable.
    Viability {
        /// System name, with optional parameter suffix.
        #[arg(long)]
        system: String,
        /// Path to a stored memory arc used as the initial history.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Margin the probed step must respect at the trial point.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorityArg {
    JumpFirst,
    FlowFirst,
}

impl From<PriorityArg> for Priority {
    fn from(p: PriorityArg) -> Self {
        match p {
            PriorityArg::JumpFirst => Priority::JumpFirst,
            PriorityArg::FlowFirst => Priority::FlowFirst,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Graphical,
    Uniform,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema: &'static str,
    command: &'static str,
    report: T,
}

#[derive(Serialize)]
struct SimulateReport {
    system: String,
    seed: u64,
    status: hmk_core::SolveStatus,
    end_t: f64,
    end_j: i64,
    jumps: usize,
    samples: usize,
    out: String,
    csv: Option<String>,
}

#[derive(Serialize)]
struct DistanceOut {
    metric: &'static str,
    d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hausdorff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_sat: Option<f64>,
}

#[derive(Serialize)]
struct KlOut {
    system: String,
    seed: u64,
    bound: KlBoundOut,
    report: hmk_core::KLCheckReport,
}

#[derive(Serialize)]
struct KlBoundOut {
    c: f64,
    mu: f64,
    eps: f64,
}

#[derive(Serialize)]
struct ViabilityOut {
    system: String,
    eps: f64,
    certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        let io = e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some());
        std::process::exit(if io { 3 } else { 2 });
    }
}

/// Honors HMK_THREADS before any parallel work spins up the global pool.
fn configure_threads() {
    if let Ok(raw) = std::env::var("HMK_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            system,
            history,
            h,
            horizon_t,
            horizon_j,
            seed,
            priority,
            out,
            csv,
        } => {
            let ex = example(&system)?;
            let phi = load_history(history.as_deref(), &ex.history)?;
            let mut opt = SolveOptions::new(h, horizon_t, horizon_j);
            opt.priority = priority.into();
            opt.selector = Selector::Seeded(seed);
            let sol = solve(&ex.system, &phi, &opt)?;
            write_arc(&out, &sol.arc, Some(ex.system.delta))?;
            if let Some(path) = &csv {
                write_csv(path, &sol.arc)?;
            }
            let (end_t, end_j) = sol.endpoint();
            emit(
                "simulate",
                SimulateReport {
                    system,
                    seed,
                    status: sol.status,
                    end_t,
                    end_j,
                    jumps: sol.jump_log.len(),
                    samples: sol.arc.segments().iter().map(|s| s.len()).sum(),
                    out: out.display().to_string(),
                    csv: csv.map(|p| p.display().to_string()),
                },
            )
        }
        Command::Distance { a, b, metric, cap } => {
            let (arc_a, _) = read_arc(&a)?;
            let (arc_b, _) = read_arc(&b)?;
            let out = match metric {
                MetricArg::Graphical => {
                    let quad = QuadratureSpec::default();
                    let rep = if cap == 0 {
                        arc_distance(&arc_a, &arc_b, &quad)?
                    } else {
                        arc_distance_capped(&arc_a, &arc_b, cap, &quad)?
                    };
                    DistanceOut {
                        metric: "graphical",
                        d: rep.d,
                        hausdorff: Some(rep.hausdorff),
                        rho_sat: Some(rep.rho_sat),
                    }
                }
                MetricArg::Uniform => DistanceOut {
                    metric: "uniform",
                    d: uniform_distance(&arc_a, &arc_b)?,
                    hausdorff: None,
                    rho_sat: None,
                },
            };
            emit("distance", out)
        }
        Command::PerturbStudy {
            system,
            history,
            deltas,
            h,
            horizon_t,
            horizon_j,
            seed,
        } => {
            let ex = example(&system)?;
            let phi = load_history(history.as_deref(), &ex.history)?;
            let mut opt = SolveOptions::new(h, horizon_t, horizon_j);
            opt.selector = Selector::Seeded(seed);
            let rho: hmk_core::RhoFn = Arc::new(|_: &MemoryArc| 1.0);
            let report = wellposedness_experiment(&ex.system, &rho, &deltas, &phi, &opt, seed)?;
            emit("perturb-study", report)
        }
        Command::KlCheck {
            system,
            history,
            c,
            mu,
            eps,
            w_lo,
            w_hi,
            h,
            horizon_t,
            horizon_j,
            seed,
        } => {
            let ex = example(&system)?;
            let phi = load_history(history.as_deref(), &ex.history)?;
            let bound = KLBound::new(c, mu, eps)?;
            let target = match (w_lo, w_hi) {
                (Some(lo), Some(hi)) => Target::Box { lo, hi },
                (None, None) => Target::origin(ex.system.n),
                _ => anyhow::bail!("--w-lo and --w-hi must be given together"),
            };
            let mut opt = SolveOptions::new(h, horizon_t, horizon_j);
            opt.selector = Selector::Seeded(seed);
            let sol = solve(&ex.system, &phi, &opt)?;
            let report = check_kl(&sol, &target, &bound)?;
            emit(
                "kl-check",
                KlOut {
                    system,
                    seed,
                    bound: KlBoundOut { c, mu, eps },
                    report,
                },
            )
        }
        Command::Viability { system, history, eps } => {
            let ex = example(&system)?;
            let phi = load_history(history.as_deref(), &ex.history)?;
            let probe = viability_probe(&ex.system, &phi, eps)?;
            let (certified, direction, step) = match probe {
                Some((v, h)) => (true, Some(v), Some(h)),
                None => (false, None, None),
            };
            emit(
                "viability",
                ViabilityOut {
                    system,
                    eps,
                    certified,
                    direction,
                    step,
                },
            )
        }
    }
}

fn emit<T: Serialize>(command: &'static str, report: T) -> anyhow::Result<()> {
    let env = Envelope {
        schema: SCHEMA,
        command,
        report,
    };
    println!("{}", serde_json::to_string_pretty(&env)?);
    Ok(())
}

fn load_history(path: Option<&std::path::Path>, fallback: &MemoryArc) -> anyhow::Result<MemoryArc> {
    match path {
        None => Ok(fallback.clone()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading history {}", p.display()))?;
            Ok(memory_arc_from_json(&text)?)
        }
    }
}

fn read_arc(path: &std::path::Path) -> anyhow::Result<(HybridArc, Option<f64>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading arc {}", path.display()))?;
    Ok(arc_from_json(&text)?)
}

fn write_arc(path: &std::path::Path, arc: &HybridArc, delta: Option<f64>) -> anyhow::Result<()> {
    let text = arc_to_json(arc, delta);
    std::fs::write(path, text).with_context(|| format!("writing arc {}", path.display()))?;
    Ok(())
}

/// One row per stored sample, ordered by segment then time.
fn write_csv(path: &std::path::Path, arc: &HybridArc) -> anyhow::Result<()> {
    let mut out = String::from("t,j");
    for i in 0..arc.n() {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for seg in arc.segments() {
        for i in 0..seg.len() {
            let (t, x) = seg.sample(i);
            out.push_str(&format!("{},{}", t, seg.j()));
            for v in x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing csv {}", path.display()))?;
    Ok(())
}
