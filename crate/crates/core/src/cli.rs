//! Command line front end.
//!
//! Exit codes: 0 success, 1 runtime or data failure, 2 usage error
//! (bad arguments or an invalid config file).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{confusion_metrics, cross_validate, dice, miou, voxel_precision_recall};
use crate::gbdt::{default_grid, grid_search, train, Dataset, Model};
use crate::io::{format_real, load_features, load_mask, save_features, CaseRecord};
use crate::phantom::{generate_dataset, PhantomParams};
use crate::pipeline::{export_cases, extract_cases, read_manifest};

#[derive(Debug, Parser)]
#[command(name = "edemarad", version, about = "CT radiomics pipeline: phantoms, features, boosted trees, metrics")]
pub struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-case work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed overriding `eval.seed` (and the phantom master seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a manifest.
    Phantom(PhantomArgs),
    /// Extract the 107 features for every case of a manifest.
    Features(FeaturesArgs),
    /// Stratified k-fold cross-validation of the classifier.
    Cv(CvArgs),
    /// Fit the classifier on a whole feature table.
    Train(TrainArgs),
    /// Score a feature table with a saved model.
    Predict(PredictArgs),
    /// Overlap metrics between two directories of masks.
    Segmetrics(SegArgs),
    /// Write resized ROI slices as 16-bit PGM images.
    ExportSlices(ExportArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub pos: usize,
    #[arg(long)]
    pub neg: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Choose hyperparameters by grid search over the default grid first.
    #[arg(long)]
    pub grid_search: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, mapped to an exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn execute(cli: Cli) -> CmdResult {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Failure::Runtime(e.to_string()),
            other => Failure::Usage(format!("invalid config {}: {other}", p.display())),
        })?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.eval.seed = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Phantom(a) => cmd_phantom(a, cli.seed.unwrap_or(0)),
        Command::Features(a) => cmd_features(a, &config),
        Command::Cv(a) => cmd_cv(a, &config),
        Command::Train(a) => cmd_train(a, &config),
        Command::Predict(a) => cmd_predict(a),
        Command::Segmetrics(a) => cmd_segmetrics(a),
        Command::ExportSlices(a) => cmd_export(a, &config),
    })
}

fn cmd_phantom(a: &PhantomArgs, seed: u64) -> CmdResult {
    if a.pos < 1 || a.neg < 1 {
        return Err(Failure::Usage("--pos and --neg must both be at least 1".into()));
    }
    let plan = generate_dataset(a.pos, a.neg, seed, &a.out, &PhantomParams::default())?;
    println!("wrote {} cases to {}", plan.len(), a.out.display());
    Ok(())
}

fn cmd_features(a: &FeaturesArgs, config: &PipelineConfig) -> CmdResult {
    let cases = read_manifest(&a.manifest)?;
    let results = extract_cases(&cases, config);
    let mut ok = Vec::new();
    let mut failed = 0;
    for (case, r) in cases.iter().zip(results) {
        match r {
            Ok(rec) => ok.push(rec),
            Err(e) => {
                failed += 1;
                eprintln!("case {}: {e}", case.case_id);
            }
        }
    }
    save_features(&ok, &a.out)?;
    println!("{} of {} cases extracted", ok.len(), cases.len());
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} case(s) failed")));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_cv(a: &CvArgs, config: &PipelineConfig) -> CmdResult {
    let data = Dataset::from_records(&load_features(&a.features)?)?;
    let summary = cross_validate(&data, &config.gbdt, config.eval.k, config.eval.seed)?;
    write_file(&a.report, &summary.to_json())?;
    print!("{}", summary.render_table());
    Ok(())
}

fn cmd_train(a: &TrainArgs, config: &PipelineConfig) -> CmdResult {
    let data = Dataset::from_records(&load_features(&a.features)?)?;
    let hp = if a.grid_search {
        let (best, table) = grid_search(&data, &default_grid(), config.eval.k, config.eval.seed)?;
        for (hp, acc) in &table {
            println!(
                "grid n_estimators={} max_depth={} learning_rate={} accuracy={:.4}",
                hp.n_estimators, hp.max_depth, hp.learning_rate, acc
            );
        }
        println!(
            "selected n_estimators={} max_depth={} learning_rate={}",
            best.n_estimators, best.max_depth, best.learning_rate
        );
        best
    } else {
        config.gbdt.clone()
    };
    let model = train(&data, &hp)?;
    model.save(&a.model)?;
    let pred = data
        .rows
        .iter()
        .map(|r| model.predict_class(r))
        .collect::<Result<Vec<_>>>()?;
    let m = confusion_metrics(&pred, &data.labels)?;
    println!("training accuracy {:.4} on {} cases", m.accuracy, data.len());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> CmdResult {
    let model = Model::load(&a.model)?;
    let records: Vec<CaseRecord> = load_features(&a.features)?;
    let mut out = String::from("case_id,probability,predicted_label\n");
    for r in &records {
        let fv = r.features.as_ref().expect("loaded records carry features");
        let p = model.predict_proba(fv)?;
        out.push_str(&format!("{},{},{}\n", r.case_id, format_real(p), u8::from(p >= 0.5)));
    }
    match &a.out {
        Some(p) => write_file(p, &out)?,
        None => {
            let _ = std::io::stdout().write_all(out.as_bytes());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SegCase {
    name: String,
    dice: f64,
    miou: f64,
    precision: f64,
    recall: f64,
}

#[derive(Serialize)]
struct SegMean {
    dice: f64,
    miou: f64,
    precision: f64,
    recall: f64,
}

#[derive(Serialize)]
struct SegReport {
    cases: Vec<SegCase>,
    mean: SegMean,
}

fn mask_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".nii") || name.ends_with(".nii.gz") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn cmd_segmetrics(a: &SegArgs) -> CmdResult {
    let pred = mask_files(&a.pred)?;
    let truth = mask_files(&a.truth)?;
    let unmatched: Vec<String> = pred
        .iter()
        .filter(|n| !truth.contains(n))
        .map(|n| format!("{} (prediction only)", n))
        .chain(truth.iter().filter(|n| !pred.contains(n)).map(|n| format!("{} (truth only)", n)))
        .collect();
    if !unmatched.is_empty() {
        return Err(Failure::Runtime(format!("unmatched mask files: {}", unmatched.join(", "))));
    }
    if pred.is_empty() {
        return Err(Failure::Runtime(format!("no mask files in {}", a.pred.display())));
    }
    let mut cases = Vec::new();
    for name in &pred {
        let p = load_mask(a.pred.join(name))?;
        let t = load_mask(a.truth.join(name))?;
        let (precision, recall) = voxel_precision_recall(&p, &t)?;
        cases.push(SegCase {
            name: name.clone(),
            dice: dice(&p, &t)?,
            miou: miou(&p, &t)?,
            precision,
            recall,
        });
    }
    let n = cases.len() as f64;
    let mean = SegMean {
        dice: cases.iter().map(|c| c.dice).sum::<f64>() / n,
        miou: cases.iter().map(|c| c.miou).sum::<f64>() / n,
        precision: cases.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: cases.iter().map(|c| c.recall).sum::<f64>() / n,
    };
    println!("{:<32} {:>8} {:>8} {:>10} {:>8}", "case", "dice", "miou", "precision", "recall");
    for c in &cases {
        println!("{:<32} {:>8.4} {:>8.4} {:>10.4} {:>8.4}", c.name, c.dice, c.miou, c.precision, c.recall);
    }
    println!("{:<32} {:>8.4} {:>8.4} {:>10.4} {:>8.4}", "mean", mean.dice, mean.miou, mean.precision, mean.recall);
    if let Some(out) = &a.out {
        let report = SegReport { cases, mean };
        write_file(out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs, config: &PipelineConfig) -> CmdResult {
    let cases = read_manifest(&a.manifest)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut failed = 0;
    let mut written = 0;
    for (case, r) in cases.iter().zip(export_cases(&cases, config, &a.out)) {
        match r {
            Ok(n) => written += n,
            Err(e) => {
                failed += 1;
                eprintln!("case {}: {e}", case.case_id);
            }
        }
    }
    println!("wrote {written} slices for {} of {} cases", cases.len() - failed, cases.len());
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} case(s) failed")));
    }
    Ok(())
}
