use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use pta_core::io::{
    read_binary_mask, read_gray_image, read_label_mask, read_probability_map, write_binary_mask, write_label_mask,
};
use pta_core::losses::{pta_loss, BaseLoss, Prediction, PtaConfig, Target, WceWeights};
use pta_core::metrics::{evaluate_binary, evaluate_labels};
use pta_core::refine::{refine, Acceptance, RefineConfig};
use pta_core::synthetic::{offset_cases, results_csv, run_real_overlay, run_table1, sector_map, summarize, SyntheticSpec};
use pta_core::{BinaryMask, LabelMask, LossMode, ProbabilityMap, PtaError};

const SCHEMA_VERSION: u32 = 1;

/// Boundary-contrast segmentation loss, metrics, offset experiments and mask refinement.
#[derive(Parser)]
#[command(name = "pta", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Overlap and boundary metrics of one or more predictions against a ground truth.
    Evaluate(EvaluateArgs),
    /// Base loss plus the piecewise band loss of a prediction.
    Ptaloss(PtalossArgs),
    /// Five-case offset experiment on the synthetic square or a supplied image.
    Simulate(SimulateArgs),
    /// Local-search refinement of a mask against an image.
    Refine(RefineArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Prediction mask; repeat for several files.
    #[arg(long, required = true, num_args = 1..)]
    pred: Vec<PathBuf>,
    /// Treat masks as label maps with foreground classes 1..=L.
    #[arg(long)]
    labels: Option<u16>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Ce,
    Wce,
    Dsc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    TTest,
    MeanDiff,
}

impl From<ModeArg> for LossMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::TTest => LossMode::TTest,
            ModeArg::MeanDiff => LossMode::MeanDiff,
        }
    }
}

#[derive(Args)]
struct BandArgs {
    #[arg(long, default_value_t = 10)]
    sectors: usize,
    #[arg(long, default_value_t = 2.0)]
    band_width: f64,
    #[arg(long, value_enum, default_value = "t-test")]
    mode: ModeArg,
}

impl BandArgs {
    fn config(&self, lambda: f64, threshold: f64) -> PtaConfig {
        PtaConfig {
            lambda,
            sectors: self.sectors,
            band_width: self.band_width,
            threshold,
            mode: self.mode.into(),
            ..PtaConfig::default()
        }
    }
}

#[derive(Args)]
struct PtalossArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Hard prediction mask (label map with --labels).
    #[arg(long, conflicts_with = "probmap", required_unless_present = "probmap")]
    mask: Option<PathBuf>,
    /// Foreground probability map; with --labels give L+1 maps, background first.
    #[arg(long, num_args = 1..)]
    probmap: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "ce")]
    base: BaseArg,
    /// Comma-separated class weights for --base wce, background first.
    #[arg(long, value_delimiter = ',')]
    wce_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    #[arg(long)]
    labels: Option<u16>,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Dilation/erosion radius of the large and small cases (both radius and shift in overlay mode).
    #[arg(long, default_value_t = 2)]
    offset: usize,
    /// Translation of the horizontal and diagonal cases.
    #[arg(long, default_value_t = 5)]
    shift: usize,
    /// Run on this image instead of the synthetic square (requires --gt).
    #[arg(long, requires = "gt")]
    image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    gt: Option<PathBuf>,
    #[command(flatten)]
    band: BandArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    init: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    moves: usize,
    /// Initial annealing temperature; greedy acceptance when absent.
    #[arg(long)]
    anneal: Option<f64>,
    #[arg(long, default_value_t = 0.995)]
    cooling: f64,
    /// Optional ground truth; adds F1 of the initial and final masks to the report.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[command(flatten)]
    band: BandArgs,
    /// Output directory for mask.png, trace.csv and refine.json.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Core(PtaError),
    /// Failure to create or write an output.
    Output(PathBuf, std::io::Error),
    /// A report was written but the run still fails with this code.
    Exit(u8, String),
}

impl From<PtaError> for Failure {
    fn from(e: PtaError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) => error_code(e),
            Failure::Output(..) => 6,
            Failure::Exit(code, _) => *code,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Output(p, e) => format!("cannot write {}: {e}", p.display()),
            Failure::Exit(_, m) => m.clone(),
        }
    }
}

fn error_code(e: &PtaError) -> u8 {
    match e {
        PtaError::Malformed { .. } => 2,
        PtaError::DimensionMismatch { .. } => 3,
        PtaError::EmptyRegion(_) => 4,
        PtaError::DegenerateBands { .. } => 5,
        _ => 1,
    }
}

type CliResult = std::result::Result<(), Failure>;

fn write_output(path: &Path, contents: &[u8]) -> CliResult {
    std::fs::write(path, contents).map_err(|e| Failure::Output(path.to_path_buf(), e))
}

fn write_json(path: &Path, value: &Value) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_output(path, text.as_bytes())
}

fn output_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Output(dir.to_path_buf(), e))
}

fn write_mask_file(path: &Path, mask: &BinaryMask) -> CliResult {
    write_binary_mask(path, mask).map_err(|e| match e {
        PtaError::Io(io) => Failure::Output(path.to_path_buf(), io),
        other => Failure::Core(other),
    })
}

fn write_label_file(path: &Path, labels: &LabelMask) -> CliResult {
    write_label_mask(path, labels).map_err(|e| match e {
        PtaError::Io(io) => Failure::Output(path.to_path_buf(), io),
        other => Failure::Core(other),
    })
}

fn check_labels(mask: &LabelMask, classes: u16, path: &Path) -> Result<(), PtaError> {
    let max = mask.max_label();
    if max > classes {
        return Err(PtaError::InvalidArgument(format!(
            "{} contains label {max} but --labels is {classes}",
            path.display()
        )));
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult {
    let gt_labels = match a.labels {
        Some(l) => {
            let gt = read_label_mask(&a.gt)?;
            check_labels(&gt, l, &a.gt)?;
            Some(gt)
        }
        None => None,
    };
    let gt_binary = match &gt_labels {
        Some(_) => None,
        None => Some(read_binary_mask(&a.gt)?),
    };

    let evaluate_one = |pred: &PathBuf| -> Result<Value, PtaError> {
        let report = match (&gt_labels, a.labels) {
            (Some(gt), Some(l)) => {
                let seg = read_label_mask(pred)?;
                check_labels(&seg, l, pred)?;
                evaluate_labels(gt, &seg, l)?
            }
            _ => evaluate_binary(gt_binary.as_ref().expect("binary ground truth"), &read_binary_mask(pred)?)?,
        };
        Ok(serde_json::to_value(report).expect("metrics serialize"))
    };

    let outcomes: Vec<(u8, Value)> = a
        .pred
        .par_iter()
        .map(|pred| match evaluate_one(pred) {
            Ok(mut v) => {
                v["pred"] = json!(path_str(pred));
                v["exit_code"] = json!(0);
                (0, v)
            }
            Err(e) => {
                warn!("{}: {e}", pred.display());
                eprintln!("error: {}: {e}", pred.display());
                let code = error_code(&e);
                (code, json!({ "pred": path_str(pred), "exit_code": code, "error": e.to_string() }))
            }
        })
        .collect();

    let worst = outcomes.iter().map(|(c, _)| *c).max().unwrap_or(0);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "evaluate",
        "config": { "gt": path_str(&a.gt), "labels": a.labels },
        "files": outcomes.into_iter().map(|(_, v)| v).collect::<Vec<_>>(),
    });
    write_json(&a.out, &report)?;
    match worst {
        0 => Ok(()),
        code => Err(Failure::Exit(code, "one or more predictions failed; see the report".into())),
    }
}

fn one_hot(labels: &LabelMask, classes: u16) -> Result<Vec<ProbabilityMap>, PtaError> {
    (0..=classes)
        .map(|c| ProbabilityMap::from_fn(labels.width(), labels.height(), |x, y| f64::from(labels.get(x, y) == c)))
        .collect()
}

fn cmd_ptaloss(a: &PtalossArgs) -> CliResult {
    let cfg = a.band.config(a.lambda, a.threshold);
    cfg.validate()?;
    let image = read_gray_image(&a.image)?;

    let classes = a.labels.unwrap_or(1);
    let base = match a.base {
        BaseArg::Ce => BaseLoss::Ce,
        BaseArg::Dsc => BaseLoss::Dsc,
        BaseArg::Wce => BaseLoss::Wce(match &a.wce_weights {
            Some(w) => WceWeights::new(w.clone())?,
            None => WceWeights::background_foreground(classes as usize),
        }),
    };

    let report = match a.labels {
        None => {
            let gt = read_binary_mask(&a.gt)?;
            let pred = match &a.mask {
                Some(m) => ProbabilityMap::from_mask(&read_binary_mask(m)?),
                None => {
                    if a.probmap.len() != 1 {
                        return Err(PtaError::InvalidArgument("binary mode takes exactly one --probmap".into()).into());
                    }
                    read_probability_map(&a.probmap[0])?
                }
            };
            pta_loss(&image, Target::Binary(&gt), Prediction::Binary(&pred), &base, &cfg)?
        }
        Some(l) => {
            let gt = read_label_mask(&a.gt)?;
            check_labels(&gt, l, &a.gt)?;
            let maps = match &a.mask {
                Some(m) => {
                    let seg = read_label_mask(m)?;
                    check_labels(&seg, l, m)?;
                    one_hot(&seg, l)?
                }
                None => {
                    if a.probmap.len() != l as usize + 1 {
                        return Err(PtaError::InvalidArgument(format!(
                            "--labels {l} needs {} --probmap files (background first), got {}",
                            l + 1,
                            a.probmap.len()
                        ))
                        .into());
                    }
                    a.probmap.iter().map(|p| read_probability_map(p)).collect::<Result<Vec<_>, _>>()?
                }
            };
            pta_loss(&image, Target::Labels(&gt), Prediction::PerClass(&maps), &base, &cfg)?
        }
    };

    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "ptaloss",
        "config": {
            "image": path_str(&a.image),
            "gt": path_str(&a.gt),
            "mask": a.mask.as_deref().map(path_str),
            "probmap": a.probmap.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
            "labels": a.labels,
            "base": base.kind(),
            "wce_weights": match &base { BaseLoss::Wce(w) => Some(w.as_slice().to_vec()), _ => None },
            "lambda": cfg.lambda,
            "sectors": cfg.sectors,
            "band_width": cfg.band_width,
            "threshold": cfg.threshold,
            "epsilon": cfg.epsilon,
            "mode": cfg.mode,
        },
        "result": report,
    });
    write_json(&a.out, &out)?;
    if report.degenerate {
        let statuses: Vec<String> = report
            .classes
            .iter()
            .map(|c| format!("class {}: {:?}", c.label, c.status))
            .collect();
        return Err(Failure::Exit(5, format!(
            "band term unavailable ({})",
            statuses.join(", ")
        )));
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let cfg = a.band.config(PtaConfig::default().lambda, PtaConfig::default().threshold);
    cfg.validate()?;
    output_dir(&a.out)?;

    let (results, gt, grow, shift, mode_echo) = match (&a.image, &a.gt) {
        (Some(image_path), Some(gt_path)) => {
            let image = read_gray_image(image_path)?;
            let gt = read_binary_mask(gt_path)?;
            let results = run_real_overlay(&image, &gt, a.offset, &cfg)?;
            let echo = json!({ "source": "overlay", "image": path_str(image_path), "gt": path_str(gt_path) });
            (results, gt, a.offset, a.offset, echo)
        }
        _ => {
            let spec = SyntheticSpec {
                seed: a.seed,
                replicates: a.replicates,
                grow: a.offset,
                shift: a.shift,
                ..SyntheticSpec::default()
            };
            let table = run_table1(&spec, &cfg)?;
            let gt = spec.gt_mask()?;
            (table.results, gt, a.offset, a.shift, json!({ "source": "synthetic", "spec": spec }))
        }
    };
    info!("evaluated {} case rows", results.len());

    write_output(&a.out.join("table1.csv"), results_csv(&results).as_bytes())?;
    let (summary, ordering) = summarize(&results);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": {
            "seed": a.seed,
            "replicates": a.replicates,
            "offset": grow,
            "shift": shift,
            "sectors": cfg.sectors,
            "band_width": cfg.band_width,
            "epsilon": cfg.epsilon,
            "mode": cfg.mode,
            "input": mode_echo,
        },
        "summary": summary,
        "ordering": ordering,
    });
    write_json(&a.out.join("summary.json"), &report)?;

    let cases = offset_cases(&gt, grow, shift)?;
    for (i, case) in cases.iter().enumerate() {
        let map = sector_map(case, cfg.band_width, cfg.sectors)?;
        write_label_file(&a.out.join(format!("case{}_sectors.png", i + 1)), &map)?;
    }
    Ok(())
}

fn cmd_refine(a: &RefineArgs) -> CliResult {
    let rc = RefineConfig {
        mu: a.mu,
        max_iters: a.iters,
        moves_per_iter: a.moves,
        acceptance: match a.anneal {
            Some(initial) => Acceptance::Annealing { initial, cooling: a.cooling },
            None => Acceptance::Greedy,
        },
        seed: a.seed,
        pta: a.band.config(PtaConfig::default().lambda, PtaConfig::default().threshold),
    };
    rc.validate()?;
    let image = read_gray_image(&a.image)?;
    let init = read_binary_mask(&a.init)?;
    let gt = a.gt.as_deref().map(read_binary_mask).transpose()?;
    output_dir(&a.out)?;

    let (mask, trace) = refine(&image, &init, &rc)?;
    write_mask_file(&a.out.join("mask.png"), &mask)?;
    write_output(&a.out.join("trace.csv"), trace.to_csv().as_bytes())?;

    let f1 = match &gt {
        Some(g) => Some(json!({
            "initial": pta_core::metrics::dsc_metric(g, &init)?,
            "final": pta_core::metrics::dsc_metric(g, &mask)?,
        })),
        None => None,
    };
    let last = trace.rows.last();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "refine",
        "config": {
            "image": path_str(&a.image),
            "init": path_str(&a.init),
            "gt": a.gt.as_deref().map(path_str),
            "refine": rc,
        },
        "initial_objective": trace.initial_objective,
        "final_objective": last.map_or(trace.initial_objective, |r| r.objective),
        "final_pt": last.map(|r| r.pt),
        "changed_pixels": last.map_or(0, |r| r.changed),
        "accepted_moves": trace.rows.iter().filter(|r| r.accepted).count(),
        "f1": f1,
    });
    write_json(&a.out.join("refine.json"), &report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PTA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ptaloss(a) => cmd_ptaloss(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Refine(a) => cmd_refine(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
