use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use datefield::detector::scan_document;
use datefield::eval::{
    calibrate_ranges, extract_knn_samples, labeled_separators, match_detections, report,
    windows_from_truth, CalibrationOptions, EvalReport, MatchOptions, MatchOutcome,
};
use datefield::knn::DEFAULT_K;
use datefield::overlay::{annotate, retain_regions, save_rgb};
use datefield::raster::{binarize, load_image};
use datefield::synth::{generate_page, GroundTruth, SynthSpec};
use datefield::{Detection, DetectorConfig, KnnModel, SeparatorSample};

mod fsio;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pbm", "ppm", "pnm", "png"];
const TRUTH_SUFFIX: &str = ".truth.json";

/// Locate handwritten date fields by component geometry.
#[derive(Parser)]
#[command(name = "datefield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect date fields in page images.
    Scan(ScanArgs),
    /// Generate synthetic pages with ground truth.
    Synth(SynthArgs),
    /// Learn digit-pair ranges from a ground-truth corpus.
    Calibrate(CalibrateArgs),
    /// Build a dash/dot separator model from labeled samples.
    TrainKnn(TrainKnnArgs),
    /// Score detections against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// Image files or directories of images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Detector config JSON (as written by `calibrate`).
    #[arg(long, visible_alias = "config")]
    ranges: Option<PathBuf>,
    /// Separator model JSON (as written by `train-knn`).
    #[arg(long)]
    knn: Option<PathBuf>,
    /// Neighbors consulted by the separator model.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Fixed binarization threshold; samples below it are ink. Otsu if absent.
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    min_gap: Option<u32>,
    #[arg(long)]
    min_ink: Option<u32>,
    #[arg(long)]
    noise_min_pixels: Option<usize>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec JSON; defaults apply to missing fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pages: usize,
    /// Overrides the spec's seed. Page i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Directory of `*.truth.json` files.
    #[arg(long)]
    corpus: PathBuf,
    /// Detector config to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write separator samples for `train-knn`.
    #[arg(long)]
    knn_samples: Option<PathBuf>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args)]
struct TrainKnnArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of `<name>.json` detection files.
    #[arg(long)]
    detections: PathBuf,
    /// Directory of `<name>.truth.json` files.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Count merged-digit dates as dates to find.
    #[arg(long)]
    include_expected_miss: bool,
}

#[derive(Args)]
struct Jobs {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Jobs {
    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        let mut b = rayon::ThreadPoolBuilder::new();
        match self.jobs {
            Some(0) => return Err(Failure::input(anyhow!("--jobs must be at least 1"))),
            Some(n) => b = b.num_threads(n),
            None => {}
        }
        b.build().map_err(|e| Failure::Processing(e.into()))
    }
}

/// Exit 2 for bad input, 1 for anything that fails after inputs were accepted.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Processing(anyhow::Error),
}

impl Failure {
    fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Processing(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Processing(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Processing(e)
    }
}

/// Library errors about the caller's data are input errors.
impl From<datefield::Error> for Failure {
    fn from(e: datefield::Error) -> Self {
        match e {
            datefield::Error::Contract(_) => Failure::Processing(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::TrainKnn(a) => cmd_train_knn(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("datefield: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn require_dir(path: &Path, what: &str) -> Outcome {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::input(anyhow!(
            "{what} {} is not a directory",
            path.display()
        )))
    }
}

fn require_file(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::input(anyhow!(
            "{} does not exist or is not a file",
            path.display()
        )))
    }
}

fn create_dir(path: &Path) -> Outcome {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::input)
}

fn read_input<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    require_file(path)?;
    fsio::read_json(path).map_err(Failure::Input)
}

/// Expand directories to their image files and reject duplicate stems,
/// which would overwrite each other's outputs.
fn resolve_images(inputs: &[PathBuf]) -> Outcome<Vec<(String, PathBuf)>> {
    let is_image = |p: &Path| {
        p.extension()
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_string_lossy().to_ascii_lowercase().as_str()))
            .unwrap_or(false)
    };
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))
                .map_err(Failure::Input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            require_file(input)?;
            files.push(input.clone());
        }
    }
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(prev) = seen.insert(stem.clone(), f.clone()) {
            return Err(Failure::input(anyhow!(
                "{} and {} would write the same outputs",
                prev.display(),
                f.display()
            )));
        }
        out.push((stem, f));
    }
    Ok(out)
}

/// Run `f` over `items` on the pool, keeping input order. Every failure is
/// reported; the first one decides the exit code.
fn run_all<T, R, F>(pool: &rayon::ThreadPool, items: &[T], f: F) -> Outcome<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Outcome<R> + Sync,
{
    let results: Vec<Outcome<R>> = pool.install(|| items.par_iter().map(&f).collect());
    let mut out = Vec::with_capacity(results.len());
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                if first.is_some() {
                    eprintln!("datefield: {:#}", e.error());
                } else {
                    first = Some(e);
                }
            }
        }
    }
    first.map_or(Ok(out), Err)
}

fn cmd_scan(a: ScanArgs) -> Outcome {
    let pages = resolve_images(&a.inputs)?;
    let mut cfg: DetectorConfig = match &a.ranges {
        Some(p) => read_input(p)?,
        None => DetectorConfig::default(),
    };
    if let Some(v) = a.min_gap {
        cfg.layout.min_gap = v;
    }
    if let Some(v) = a.min_ink {
        cfg.layout.min_ink = v;
    }
    if let Some(v) = a.noise_min_pixels {
        cfg.layout.noise_min_pixels = v;
    }
    cfg.validate()?;
    let model = match &a.knn {
        Some(p) => {
            require_file(p)?;
            Some(KnnModel::load(p, a.k)?)
        }
        None => None,
    };
    let pool = a.jobs.pool()?;
    create_dir(&a.out)?;

    let counts = run_all(&pool, &pages, |(stem, path)| {
        let gray = load_image(path)?;
        let img = binarize(&gray, a.threshold);
        let mut cands = scan_document(&img, &cfg)?;
        if let Some(m) = &model {
            cands = m.refine_all(cands);
        }
        let dets: Vec<Detection> = cands.iter().map(|c| c.to_detection()).collect();
        fsio::write_json(&a.out.join(format!("{stem}.json")), &dets)?;
        let regions: Vec<_> = dets.iter().map(|d| d.region).collect();
        let kept = retain_regions(&img, &regions).to_gray();
        fsio::write_with(&a.out.join(format!("{stem}.dates.pgm")), |p| kept.save(p))?;
        let boxes = annotate(
            &img,
            &dets.iter().map(|d| (d.region, d.class)).collect::<Vec<_>>(),
        );
        fsio::write_with(&a.out.join(format!("{stem}.boxes.png")), |p| {
            save_rgb(&boxes, p)
        })?;
        Ok(dets.len())
    })?;
    for ((_, path), n) in pages.iter().zip(counts) {
        println!("{}\t{n}", path.display());
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => read_input(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.validate()?;
    let pool = a.jobs.pool()?;
    create_dir(&a.out)?;
    let indices: Vec<usize> = (0..a.pages).collect();
    run_all(&pool, &indices, |&i| {
        let (img, truth) = generate_page(&spec, i)?;
        let gray = img.to_gray();
        fsio::write_with(&a.out.join(format!("page_{i:03}.pgm")), |p| gray.save(p))?;
        fsio::write_json(&a.out.join(format!("page_{i:03}{TRUTH_SUFFIX}")), &truth)?;
        Ok(())
    })?;
    println!("wrote {} pages to {}", a.pages, a.out.display());
    Ok(())
}

fn load_truths(dir: &Path) -> Outcome<Vec<(String, GroundTruth)>> {
    require_dir(dir, "truth directory")?;
    let files = fsio::list_suffix(dir, TRUTH_SUFFIX).map_err(Failure::Input)?;
    if files.is_empty() {
        return Err(Failure::input(anyhow!(
            "no *{TRUTH_SUFFIX} files in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| Ok((fsio::strip_suffix(p, TRUTH_SUFFIX), read_input(p)?)))
        .collect()
}

fn cmd_calibrate(a: CalibrateArgs) -> Outcome {
    let truths = load_truths(&a.corpus)?;
    let mut opts = CalibrationOptions::default();
    if let Some(q) = a.quantile {
        opts.quantile = q;
    }
    if let Some(m) = a.margin {
        opts.margin = m;
    }
    let windows: Vec<_> = truths
        .iter()
        .flat_map(|(_, t)| windows_from_truth(t))
        .collect();
    let positives = windows.iter().filter(|(_, p)| *p).count();
    let cfg = DetectorConfig {
        ranges: calibrate_ranges(&windows, &opts)?,
        ..DetectorConfig::default()
    };
    fsio::write_json(&a.out, &cfg)?;
    println!(
        "calibrated on {positives} dates from {} pages",
        truths.len()
    );
    for (name, iv) in ["f1", "f2", "f3", "f4", "f5", "f6"]
        .iter()
        .zip(cfg.ranges.intervals())
    {
        println!("{name}\t[{:.4}, {:.4}]", iv.lo, iv.hi);
    }
    if let Some(path) = &a.knn_samples {
        let labeled: Vec<_> = truths
            .iter()
            .flat_map(|(_, t)| labeled_separators(t))
            .collect();
        let samples = extract_knn_samples(&labeled)?;
        fsio::write_json(path, &samples)?;
        println!("wrote {} separator samples", samples.len());
    }
    Ok(())
}

fn cmd_train_knn(a: TrainKnnArgs) -> Outcome {
    let samples: Vec<SeparatorSample> = read_input(&a.input)?;
    let model = KnnModel::train(samples, a.k)?;
    fsio::write_bytes(&a.out, format!("{}\n", model.to_json()).as_bytes())?;
    println!(
        "{} samples, k = {}, leave-one-out accuracy {:.2}%",
        model.samples().len(),
        model.k(),
        100.0 * model.leave_one_out_accuracy()
    );
    Ok(())
}

#[derive(Serialize)]
struct DocumentResult {
    name: String,
    outcome: MatchOutcome,
}

#[derive(Serialize)]
struct ReportFile {
    summary: EvalReport,
    documents: Vec<DocumentResult>,
}

fn cmd_evaluate(a: EvaluateArgs) -> Outcome {
    require_dir(&a.detections, "detections directory")?;
    let truths = load_truths(&a.truth)?;
    let opts = MatchOptions {
        iou_min: a.iou,
        include_expected_miss: a.include_expected_miss,
    };
    let mut documents = Vec::with_capacity(truths.len());
    for (name, truth) in truths {
        let dets: Vec<Detection> = read_input(&a.detections.join(format!("{name}.json")))?;
        let outcome = match_detections(&dets, &truth, &opts)?;
        documents.push(DocumentResult { name, outcome });
    }
    let outcomes: Vec<MatchOutcome> = documents.iter().map(|d| d.outcome.clone()).collect();
    let summary = report(&outcomes);
    print!("{}", summary.table());
    if let Some(path) = &a.report {
        fsio::write_json(path, &ReportFile { summary, documents })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(
            Failure::from(datefield::Error::Validation("x".into())).code(),
            2
        );
        assert_eq!(
            Failure::from(datefield::Error::Contract("x".into())).code(),
            1
        );
        assert_eq!(Failure::from(anyhow!("disk full")).code(), 1);
    }
}
