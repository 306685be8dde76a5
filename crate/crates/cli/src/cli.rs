use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use riskstop_core::calibrate::calibrate_fixed_sequence;
use riskstop_core::eval::{calibration_report, crop_baseline, efficiency_curve, Outcome};
use riskstop_core::metrics::auroc;
use riskstop_core::monitor::Budget;
use riskstop_core::pca::{fit_pca, DEFAULT_OUTPUT_DIM};
use riskstop_core::probe::{score_step, train_probe, ProbeKind, TrainConfig};
use riskstop_core::risk::{LambdaGrid, LossForm, PValueRate, RiskSpec};
use riskstop_core::scorer::ScoreMode;
use riskstop_core::segment::segment_thoughts;
use riskstop_core::sim::coverage::CoverageConfig;
use riskstop_core::sim::{generate, SimConfig};
use riskstop_core::smooth::DEFAULT_WINDOW;
use riskstop_core::trace::{SplitTag, TraceSet};
use serde::de::DeserializeOwned;

use crate::artifact::{
    absolute, load_calibrated_scorer, probe_ref, read_json, write_json, CalibrationArtifact, ProbeArtifact,
};
use crate::coverage::coverage_parallel;
use crate::error::Error;
use crate::pca_file::{load_pca, save_pca};
use crate::protocol::run_protocol;
use crate::report::{write_calibration_report, write_coverage, write_curve};
use crate::traces::{load_traceset, save_traceset};

#[derive(Debug, Parser)]
#[command(name = "riskstop", version, about = "Calibrated early stopping for step-wise generation")]
pub struct Cli {
    /// Seed for every command that draws random numbers; overrides config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split raw thought text into steps (JSON array on output).
    Segment {
        /// Text file; standard input when omitted.
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit PCA on training-split step embeddings.
    Featurize {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = DEFAULT_OUTPUT_DIM)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one logistic probe on projected step embeddings.
    TrainProbe {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        pca: PathBuf,
        /// correct, consistent, leaf or novel.
        #[arg(long, value_parser = parse_named::<ProbeKind>)]
        kind: ProbeKind,
        /// JSON training hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a stopping threshold on a calibration split.
    Calibrate(CalibrateArgs),
    /// Stream decisions for framed step embeddings on standard input.
    Monitor {
        #[arg(long)]
        calibration: PathBuf,
        /// Hard stop after this many steps per stream.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Generate synthetic traces with ground truth.
    Simulate {
        /// JSON simulator config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_traces: Option<usize>,
        /// Trace file; the sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON keyed by trace id; defaults to `<out>.truth.json`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Budget curves and calibration report on a test split.
    Evaluate(EvaluateArgs),
    /// Repeated draw/calibrate/test experiment on the simulator.
    Coverage {
        /// JSON coverage config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        /// CSV summary; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-repeat outcomes as JSON.
        #[arg(long)]
        details: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    pca: PathBuf,
    /// Probe artifacts; novel_leaf needs a leaf and a novel probe.
    #[arg(long, required = true)]
    probe: Vec<PathBuf>,
    #[arg(long, value_parser = parse_named::<ScoreMode>, default_value = "consistent")]
    mode: ScoreMode,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, value_parser = parse_named::<LossForm>, default_value = "paper_soft")]
    loss: LossForm,
    #[arg(long, value_parser = parse_named::<PValueRate>, default_value = "delta")]
    pvalue_rate: PValueRate,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// JSON array of strictly descending thresholds.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Calibration artifacts sharing one scorer, one per error level.
    #[arg(long, required = true)]
    calibration: Vec<PathBuf>,
    /// Token budgets for the crop baseline.
    #[arg(long, value_delimiter = ',')]
    crop_budgets: Vec<u64>,
    #[arg(long, value_parser = parse_named::<Outcome>, default_value = "consistent")]
    outcome: Outcome,
    /// Budget curve CSV; standard output when omitted.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

/// Parses a snake_case name through the type's serde representation.
fn parse_named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    Ok(match path {
        Some(p) => read_json(p)?,
        None => T::default(),
    })
}

/// Process exit code for a failed command: 2 for missing inputs, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::MissingInput(_)) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Segment { input, out } => {
            let mut text = String::new();
            match &input {
                Some(p) => text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => {
                    io::stdin().read_to_string(&mut text)?;
                }
            }
            let steps = segment_thoughts(&text)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &steps)?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::Featurize { traces, dim, out } => {
            let train = load_traceset(&traces, SplitTag::Train)?;
            let rows: Vec<&[f32]> = train.embeddings().collect();
            let model = fit_pca(&rows, dim)?;
            log::info!(
                "PCA {} -> {} on {} steps",
                model.input_dim(),
                model.output_dim(),
                rows.len()
            );
            save_pca(&model, &out)?;
        }
        Command::TrainProbe {
            traces,
            pca,
            kind,
            config,
            out,
        } => {
            let config: TrainConfig = config_or_default(config.as_deref())?;
            let train = load_traceset(&traces, SplitTag::Train)?;
            let model = load_pca(&pca)?;
            let pca_path = absolute(&pca)?;
            let probe = train_probe(kind, &train, &model, &pca_path.display().to_string(), &config)?;
            let train_auroc = step_auroc(&train, &model, &probe)?;
            log::info!("{} probe: train AUROC {train_auroc:.4}", kind.name());
            write_json(&ProbeArtifact::new(&probe, &pca_path, train_auroc), &out)?;
        }
        Command::Calibrate(args) => calibrate(args)?,
        Command::Monitor { calibration, max_steps } => {
            let cal: CalibrationArtifact = read_existing(&calibration, "calibration file")?;
            let (pca, scorer) = load_calibrated_scorer(&cal)?;
            let budget = Budget::steps(max_steps.unwrap_or(usize::MAX));
            let stdin = io::stdin().lock();
            let summary = run_protocol(stdin, io::stdout().lock(), &scorer, &pca, cal.result.selected_lambda, &budget)?;
            log::info!(
                "{} frames over {} streams, {} terminated",
                summary.frames,
                summary.streams,
                summary.stopped
            );
        }
        Command::Simulate {
            config,
            n_traces,
            out,
            truth,
        } => {
            let mut cfg: SimConfig = config_or_default(config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(n) = n_traces {
                cfg.n_traces = n;
            }
            let sims = generate(&cfg)?;
            let (traces, truths): (Vec<_>, Vec<_>) = sims.into_iter().map(|s| (s.trace, s.truth)).unzip();
            let set = TraceSet::new(traces, cfg.embed_dim, SplitTag::Train)?;
            save_traceset(&set, &out)?;
            let truth_path = truth.unwrap_or_else(|| out.with_extension("truth.json"));
            let keyed: std::collections::BTreeMap<_, _> = truths.iter().map(|t| (t.id.as_str(), t)).collect();
            write_json(&keyed, &truth_path)?;
        }
        Command::Evaluate(args) => evaluate(args)?,
        Command::Coverage {
            config,
            repeats,
            out,
            details,
        } => {
            let mut cfg: CoverageConfig = config_or_default(config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            let (report, outcomes) = coverage_parallel(&cfg)?;
            for row in &report.rows {
                log::info!(
                    "eps {:.2}: violations {}/{} (bound {:.4})",
                    row.epsilon,
                    row.violations,
                    row.repeats,
                    row.bound
                );
            }
            write_coverage(&report.rows, output(out.as_deref())?)?;
            if let Some(p) = details {
                write_json(&outcomes, &p)?;
            }
        }
    }
    Ok(())
}

fn read_existing<T: DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    if !path.exists() {
        return Err(Error::MissingInput(format!("{what} {}", path.display())).into());
    }
    Ok(read_json(path)?)
}

fn step_auroc(
    set: &TraceSet,
    pca: &riskstop_core::pca::PcaModel,
    probe: &riskstop_core::probe::ProbeModel,
) -> anyhow::Result<f64> {
    let mut scores = Vec::with_capacity(set.step_count());
    let mut labels = Vec::with_capacity(set.step_count());
    for trace in set.traces() {
        for (i, step) in trace.steps.iter().enumerate() {
            scores.push(score_step(probe, &pca.project(&step.embedding)?)?);
            labels.push(trace.label(probe.kind, i)?);
        }
    }
    Ok(auroc(&scores, &labels)?)
}

fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let mut spec = RiskSpec::new(args.mode, args.delta, args.epsilon, args.loss)?;
    spec.pvalue_rate = args.pvalue_rate;
    let grid = match &args.grid {
        Some(p) => read_json::<LambdaGrid>(p)?,
        None => LambdaGrid::default(),
    };
    let cal = load_traceset(&args.traces, SplitTag::Calibration)?;
    let pca_path = absolute(&args.pca)?;
    let probes = args
        .probe
        .iter()
        .map(|p| probe_ref(p))
        .collect::<Result<Vec<_>, _>>()?;
    let artifact = CalibrationArtifact {
        result: riskstop_core::calibrate::CalibrationResult {
            spec,
            grid: grid.clone(),
            empirical_risk: Vec::new(),
            p_values: Vec::new(),
            stop_fraction: Vec::new(),
            selected_lambda: None,
            n: 0,
        },
        window: args.window,
        pca: pca_path,
        probes,
    };
    let (pca, scorer) = load_calibrated_scorer(&artifact)?;
    let result = calibrate_fixed_sequence(&cal, &scorer, &pca, &grid, &spec)?;
    match result.selected_lambda {
        Some(l) => log::info!("selected lambda {l} after {} tests", result.p_values.len()),
        None => log::warn!("no threshold validated; the monitor will never stop early"),
    }
    write_json(&CalibrationArtifact { result, ..artifact }, &args.out)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let cals = args
        .calibration
        .iter()
        .map(|p| read_existing::<CalibrationArtifact>(p, "calibration file"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let first = &cals[0];
    if let Some(other) = cals
        .iter()
        .find(|c| c.probes != first.probes || c.pca != first.pca || c.window != first.window)
    {
        bail!(
            "calibrations were made against different scorers ({} vs {})",
            first.result.spec.epsilon,
            other.result.spec.epsilon
        );
    }
    let (pca, scorer) = load_calibrated_scorer(first)?;
    let test = load_traceset(&args.traces, SplitTag::Test)?;
    let results: Vec<_> = cals.into_iter().map(|c| c.result).collect();

    let mut points = Vec::new();
    if !args.crop_budgets.is_empty() {
        points.extend(crop_baseline(&test, &args.crop_budgets, args.outcome)?);
    }
    points.extend(efficiency_curve(&test, &scorer, &pca, &results, args.outcome)?);
    write_curve(&points, output(args.curve_out.as_deref())?)?;
    if let Some(p) = &args.report_out {
        let rows = calibration_report(&test, &scorer, &pca, &results)?;
        write_calibration_report(&rows, output(Some(p))?)?;
    }
    Ok(())
}

