//! The `bbr` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::docs::{
    fmt_g9, read_box_document, read_json, write_text, BoxDocument, BoxRecord, GroundTruthDocument, PredictionDocument,
};
use super::tensor::{read_feature_grid, read_heatmap};
use crate::discovery::{lost_discover, move_box, tokencut_discover, DiscoveryResult, DEFAULT_EPS, DEFAULT_LOST_A, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::heatmap::{enclosing_prediction_box, extract_boxes};
use crate::matching::{finite_diff_check, loss_h, loss_h_bu, random_grad_case, FiniteDiffReport, GradCase, LossWeights, RngState};
use crate::metrics::{evaluate, BoxExtraction, EvalSample, Metric, Prediction};
use crate::refinesim::{run_demo, DemoConfig};

/// Finite-difference step and pass threshold for `grad-check`.
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "bbr", version, about = "Heatmap boxes, set-matching losses, object discovery and localization metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExtractMode {
    /// Every box of the mean-in-box teacher pipeline.
    Train,
    /// The single enclosing box used for evaluation.
    Metric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Pointing,
    Bbox,
    Corloc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExtractionArg {
    Enclosing,
    Teacher,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boxes from a heatmap tensor.
    ExtractBoxes {
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        mode: ExtractMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Set-matching loss between a target and a prediction document.
    Loss {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        /// Prediction count; defaults to the number of predictions.
        #[arg(long)]
        k: Option<usize>,
        /// Use the union-box variant, which needs a random draw.
        #[arg(long)]
        union_prob: bool,
        #[arg(long, env = "BBR_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// LOST discovery on a feature tensor.
    Lost {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LOST_A)]
        a: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// TokenCut discovery on a feature tensor.
    Tokencut {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Largest-component box of a segmentation map.
    Move {
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localization accuracy against ground truth.
    Eval {
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Directory of `<id>.bbr` heatmaps, or a prediction JSON document.
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// How heatmaps become boxes for the box metrics.
        #[arg(long, value_enum, default_value = "enclosing")]
        extraction: ExtractionArg,
    },
    /// Calibrate the soft box predictor, then refine blobs toward a teacher.
    RefineDemo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic loss gradients with central differences.
    GradCheck {
        #[arg(long, env = "BBR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

/// Run with full argv (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            match &e {
                Error::Tensor(t) => eprintln!("error[{}]: {e}", t.code()),
                _ => eprintln!("error: {e}"),
            }
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::ExtractBoxes { heatmap, mode, out } => extract(&heatmap, mode, &out),
        Command::Loss {
            targets,
            preds,
            k,
            union_prob,
            seed,
        } => loss(&targets, &preds, k, union_prob, seed),
        Command::Lost { features, a, out } => {
            if a == 0 {
                return Err(Error::InvalidArgument("--a must be >= 1".into()));
            }
            let f = read_feature_grid(&features)?;
            let r = lost_discover(&f, a);
            write_discovery(&out, "lost", f.cols, f.rows, &r)
        }
        Command::Tokencut { features, tau, eps, out } => {
            if !(eps > 0.0 && eps.is_finite() && tau.is_finite()) {
                return Err(Error::InvalidArgument(format!("need finite tau and eps > 0, got {tau}, {eps}")));
            }
            let f = read_feature_grid(&features)?;
            let r = tokencut_discover(&f, tau, eps)?;
            write_discovery(&out, "tokencut", f.cols, f.rows, &r)
        }
        Command::Move { heatmap, out } => {
            let m = read_heatmap(&heatmap)?;
            let b = move_box(&m)?;
            let doc = BoxDocument::new(m.width, m.height, vec![BoxRecord::from_box(&b)]).with_meta("method", "move");
            write_text(&out, &doc.to_json())?;
            Ok(box_lines(&doc))
        }
        Command::Eval {
            metric,
            preds,
            gt,
            extraction,
        } => eval(metric, &preds, &gt, extraction),
        Command::RefineDemo { config, out } => refine_demo(&config, &out),
        Command::GradCheck { seed, trials } => grad_check(seed, trials),
    }
}

fn box_lines(doc: &BoxDocument) -> String {
    let mut s = String::new();
    for b in &doc.boxes {
        let _ = write!(s, "box {} {} {} {}", fmt_g9(b.cx), fmt_g9(b.cy), fmt_g9(b.w), fmt_g9(b.h));
        if let Some(score) = b.score {
            let _ = write!(s, " {}", fmt_g9(score));
        }
        s.push('\n');
    }
    s
}

fn extract(heatmap: &Path, mode: ExtractMode, out: &Path) -> Result<String> {
    let m = read_heatmap(heatmap)?;
    let (boxes, name) = match mode {
        ExtractMode::Train => (extract_boxes(&m).iter().map(BoxRecord::scored).collect(), "train"),
        ExtractMode::Metric => (vec![BoxRecord::from_box(&enclosing_prediction_box(&m)?)], "metric"),
    };
    let doc = BoxDocument::new(m.width, m.height, boxes).with_meta("mode", name);
    write_text(out, &doc.to_json())?;
    Ok(box_lines(&doc))
}

fn loss(targets: &Path, preds: &Path, k: Option<usize>, union_prob: bool, seed: u64) -> Result<String> {
    let t = read_box_document(targets)?.targets();
    let p = read_box_document(preds)?.predictions()?;
    let k = k.unwrap_or(p.len());
    let w = LossWeights::default();
    let (b, m, used_union) = if union_prob {
        let u = loss_h_bu(&t, &p, k, &w, &mut RngState::new(seed))?;
        (u.breakdown, u.matching, Some(u.used_union))
    } else {
        let (b, m) = loss_h(&t, &p, k, &w)?;
        (b, m, None)
    };
    let mut s = String::new();
    let _ = writeln!(s, "total {}", fmt_g9(b.total));
    let _ = writeln!(s, "cls {}", fmt_g9(b.cls));
    let _ = writeln!(s, "bbox {}", fmt_g9(b.bbox));
    let _ = writeln!(s, "giou {}", fmt_g9(b.giou));
    let a: Vec<String> = m.assignment.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "assignment {}", a.join(" "));
    if let Some(u) = used_union {
        let _ = writeln!(s, "union {u}");
    }
    Ok(s)
}

fn write_discovery(out: &Path, method: &str, cols: usize, rows: usize, r: &DiscoveryResult) -> Result<String> {
    let selected: Vec<String> = r.selected.iter().map(usize::to_string).collect();
    let mut doc = BoxDocument::new(cols, rows, vec![BoxRecord::from_box(&r.bbox)])
        .with_meta("method", method)
        .with_meta("selected", selected.join(" "));
    if let Some(seed) = r.seed {
        doc = doc.with_meta("seed", seed.to_string());
    }
    if method == "tokencut" {
        doc = doc.with_meta("fallback", r.eigenvector.is_none().to_string());
    }
    write_text(out, &doc.to_json())?;
    Ok(format!("{}selected {}\n", box_lines(&doc), selected.join(" ")))
}

fn load_eval_samples(preds: &Path, gt: &Path) -> Result<Vec<EvalSample>> {
    let gt: GroundTruthDocument = read_json(gt)?;
    gt.validate()?;
    let from_dir = preds.is_dir();
    let doc = if from_dir {
        None
    } else {
        let d: PredictionDocument = read_json(preds)?;
        d.validate()?;
        Some(d)
    };
    gt.samples
        .iter()
        .map(|s| {
            let prediction = match &doc {
                None => Prediction::Heatmap(read_heatmap(preds.join(format!("{}.bbr", s.id)))?),
                Some(d) => {
                    let p = d
                        .samples
                        .iter()
                        .find(|p| p.id == s.id)
                        .ok_or_else(|| Error::InvalidData(format!("no prediction for sample {}", s.id)))?;
                    Prediction::Box(p.bbox.bbox())
                }
            };
            Ok(EvalSample {
                id: s.id.clone(),
                prediction,
                ground_truth: s.boxes.iter().map(BoxRecord::bbox).collect(),
            })
        })
        .collect()
}

fn eval(metric: MetricArg, preds: &Path, gt: &Path, extraction: ExtractionArg) -> Result<String> {
    let samples = load_eval_samples(preds, gt)?;
    let metric = match metric {
        MetricArg::Pointing => Metric::Pointing,
        MetricArg::Bbox => Metric::BBox,
        MetricArg::Corloc => Metric::CorLoc,
    };
    let extraction = match extraction {
        ExtractionArg::Enclosing => BoxExtraction::Enclosing,
        ExtractionArg::Teacher => BoxExtraction::TopTeacher,
    };
    let r = evaluate(&samples, metric, extraction)?;
    let mut s = String::new();
    for o in &r.samples {
        let _ = write!(s, "sample {} {}", o.id, if o.hit { "hit" } else { "miss" });
        if let Some(n) = &o.note {
            let _ = write!(s, " ({n})");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "metric {}", r.metric.name());
    let _ = writeln!(s, "hits {}", r.hits);
    let _ = writeln!(s, "total {}", r.total);
    let _ = writeln!(s, "accuracy {}", fmt_g9(r.accuracy));
    Ok(s)
}

fn refine_demo(config: &Path, out: &Path) -> Result<String> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let cfg = DemoConfig::parse(&text)?;
    let r = run_demo(&cfg)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut trace = String::from("# iteration total_loss\n");
    for (i, l) in r.refine.trace.iter().enumerate() {
        let _ = writeln!(trace, "{i} {}", fmt_g9(*l));
    }
    write_text(out.join("trace.txt"), &trace)?;

    let teacher: Vec<BoxRecord> = r.teacher.iter().map(BoxRecord::scored).collect();
    let mut doc = BoxDocument::new(cfg.width, cfg.height, teacher).with_meta("role", "teacher");
    let mut push = |key: &str, b: Option<crate::geometry::BBox>| {
        let v = b.map_or("none".to_string(), |b| {
            [b.cx, b.cy, b.w, b.h].iter().map(|v| fmt_g9(*v)).collect::<Vec<_>>().join(" ")
        });
        doc.metadata.insert(key.to_string(), v);
    };
    push("initial_extracted", r.initial_extracted);
    push("final_extracted", r.final_extracted);
    push("initial_soft_box", Some(r.initial_soft_box));
    push("final_soft_box", Some(r.final_soft_box));
    let calib: Vec<String> = r.fit.calibration.as_array().iter().map(|v| fmt_g9(*v)).collect();
    doc.metadata.insert("calibration".into(), calib.join(" "));
    for (i, b) in r.refine.params.blobs.iter().enumerate() {
        let v: Vec<String> = b.as_array().iter().map(|v| fmt_g9(*v)).collect();
        doc.metadata.insert(format!("refined_blob_{i}"), v.join(" "));
    }
    doc.metadata.insert("initial_iou".into(), fmt_g9(r.initial_iou));
    doc.metadata.insert("final_iou".into(), fmt_g9(r.final_iou));
    doc.metadata.insert("loss_reduction".into(), fmt_g9(r.loss_reduction()));
    write_text(out.join("result.json"), &doc.to_json())?;

    let first = r.refine.trace.first().copied().unwrap_or(0.0);
    let last = r.refine.trace.last().copied().unwrap_or(0.0);
    let mut s = String::new();
    let _ = writeln!(s, "phase1_loss {} -> {}", fmt_g9(r.fit.initial_loss), fmt_g9(r.fit.final_loss));
    let _ = writeln!(s, "phase2_loss {} -> {}", fmt_g9(first), fmt_g9(last));
    let _ = writeln!(s, "loss_reduction {}", fmt_g9(r.loss_reduction()));
    let _ = writeln!(s, "iou {} -> {}", fmt_g9(r.initial_iou), fmt_g9(r.final_iou));
    Ok(s)
}

fn grad_check(seed: u64, trials: usize) -> Result<String> {
    let mut rng = RngState::new(seed);
    let w = LossWeights::default();
    let mut total = FiniteDiffReport {
        max_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for _ in 0..trials {
        let GradCase { boxes, preds, k } = random_grad_case(&mut rng);
        let r = finite_diff_check(&boxes, &preds, k, &w, GRAD_STEP)?;
        total.max_error = total.max_error.max(r.max_error);
        total.checked += r.checked;
        total.skipped += r.skipped;
    }
    if !(total.max_error < GRAD_TOLERANCE) {
        eprintln!("max_error {}", fmt_g9(total.max_error));
        return Err(Error::GradientCheck(total.max_error));
    }
    Ok(format!(
        "trials {trials}\nchecked {}\nskipped {}\nmax_error {}\n",
        total.checked,
        total.skipped,
        fmt_g9(total.max_error)
    ))
}
