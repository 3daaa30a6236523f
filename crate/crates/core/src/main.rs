//! `csobench` command-line front end.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csobench::eval::{
    self, read_results_csv, write_artifacts, write_results_csv, Experiment, ModelKind, ModelRuns,
    RunResult,
};
use csobench::io::dataset::{covariate_summary, prepare_output_dir};
use csobench::io::{load_dataset, write_dataset, Config};
use csobench::sim::simulate_dataset;
use csobench::{Error, Result};

const LARGE_SINGLE: usize = 6977;
const LARGE_CSO: usize = 4977;

#[derive(Parser)]
#[command(
    name = "csobench",
    version,
    about = "Single vs closely-spaced satellite classification benchtop"
)]
struct Cli {
    /// Root under which default output directories are created.
    #[arg(
        long,
        global = true,
        env = "CSOBENCH_OUT",
        default_value = "csobench-out"
    )]
    out_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled cutout dataset.
    Simulate(SimulateArgs),
    /// Run repeated train/test experiments and write result artifacts.
    Evaluate(EvaluateArgs),
    /// Sweep one hyperparameter and report mean accuracy per value.
    Sweep(SweepArgs),
    /// Rebuild artifacts from an existing results.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra config override, e.g. `--set gp.k=40` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n_single: Option<usize>,
    #[arg(long)]
    n_cso: Option<usize>,
    /// Use 6977 singles and 4977 CSOs unless counts are given.
    #[arg(long)]
    large: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default: <out-root>/dataset).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    /// Cap on CNN runs (the CNN dominates run time).
    #[arg(long)]
    cnn_runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CNN width: full, desk or tiny.
    #[arg(long, conflicts_with = "desk_config")]
    cnn_network: Option<String>,
    /// Shorthand for `--cnn-network desk`.
    #[arg(long)]
    desk_config: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    length_scale: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    nugget: Option<f64>,
    #[arg(long)]
    ambiguity_threshold: Option<f64>,
    /// Comma-separated lambda values for the logistic-regression CV.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    pca_components: Option<usize>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// gp, logreg, cnn or all.
    #[arg(long, default_value = "all")]
    model: String,
    #[command(flatten)]
    common: ModelArgs,
    /// Save each trained CNN under <out>/checkpoints.
    #[arg(long)]
    checkpoints: bool,
    /// Output directory (default: <out-root>/eval-<model>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long)]
    grid: String,
    #[command(flatten)]
    common: ModelArgs,
    /// Output directory (default: <out-root>/sweep-<model>-<param>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding results.csv.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
    /// Output directory (default: the results directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(args: &ConfigArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::parse(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
        None => Config::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.sim.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn parse_models(s: &str) -> Result<Vec<ModelKind>> {
    if s == "all" {
        return Ok(ModelKind::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid value '{v}'")))
        })
        .collect()
}

impl ModelArgs {
    fn config(&self) -> Result<Config> {
        let mut cfg = load_config(&self.config)?;
        let mut set = |key: &str, v: Option<String>| -> Result<()> {
            match v {
                Some(v) => cfg.set(key, &v),
                None => Ok(()),
            }
        };
        let s = |v: Option<usize>| v.map(|x| x.to_string());
        let f = |v: Option<f64>| v.map(|x| x.to_string());
        set("harness.runs", s(self.runs))?;
        set("harness.cnn_runs", s(self.cnn_runs))?;
        set("harness.pca_components", s(self.pca_components))?;
        let network = if self.desk_config {
            Some("desk".to_string())
        } else {
            self.cnn_network.clone()
        };
        set("cnn.network", network)?;
        set("cnn.epochs", s(self.epochs))?;
        set("cnn.batch_size", s(self.batch_size))?;
        set("gp.nu", f(self.nu))?;
        set("gp.length_scale", f(self.length_scale))?;
        set("gp.k", s(self.k))?;
        set("gp.nugget", f(self.nugget))?;
        set("gp.ambiguity_threshold", f(self.ambiguity_threshold))?;
        set("logreg.lambda_grid", self.lambda_grid.clone())?;
        set("logreg.max_iter", s(self.max_iter))?;
        Ok(cfg)
    }
}

fn cmd_simulate(root: &Path, a: &SimulateArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let (def_s, def_c) = if a.large {
        (LARGE_SINGLE, LARGE_CSO)
    } else {
        (cfg.harness.n_single, cfg.harness.n_cso)
    };
    let (n_single, n_cso) = (a.n_single.unwrap_or(def_s), a.n_cso.unwrap_or(def_c));
    let out = a.out.clone().unwrap_or_else(|| root.join("dataset"));
    prepare_output_dir(&out, a.force)?;
    let cutouts = simulate_dataset(&cfg.sim, n_single, n_cso, a.seed)?;
    let m = write_dataset(&out, &cutouts, &cfg.sim, a.seed, true)?;
    println!("wrote {} cutouts to {}", m.records.len(), out.display());
    println!("  SINGLE {}", m.n_single);
    println!("  CSO    {}", m.n_cso);
    println!("  sha256 {}", m.pixel_sha256);
    println!(
        "{:<18} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "covariate", "count", "min", "mean", "std", "max"
    );
    for s in covariate_summary(&m.records) {
        println!(
            "{:<18} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            s.name, s.count, s.min, s.mean, s.std, s.max
        );
    }
    Ok(())
}

fn print_summary(exp: &Experiment) {
    println!(
        "{:<8} {:>5} {:>9} {:>9}",
        "model", "runs", "acc_mean", "acc_std"
    );
    for m in &exp.models {
        let (mean, std) = m.accuracy();
        println!(
            "{:<8} {:>5} {:>9.4} {:>9.4}",
            m.kind.name(),
            m.runs.len(),
            mean,
            std
        );
    }
}

fn cmd_evaluate(root: &Path, a: &EvaluateArgs) -> Result<()> {
    let models = parse_models(&a.model)?;
    let cfg = a.common.config()?;
    let ds = load_dataset(&a.common.dataset)?;
    let items = ds.items();
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("eval-{}", a.model)));
    prepare_output_dir(&out, a.common.force)?;
    let mut plan = cfg.plan(models.clone(), a.common.seed);
    if a.checkpoints {
        let dir = out.join("checkpoints");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        plan.checkpoint_dir = Some(dir);
    }
    let cfg_path = out.join("config.txt");
    fs::write(&cfg_path, cfg.to_text()).map_err(|e| io_err(&cfg_path, e))?;

    let mut partial = Experiment {
        models: models
            .iter()
            .map(|&kind| ModelRuns {
                kind,
                runs: Vec::new(),
            })
            .collect(),
    };
    let result = eval::run_experiment(&items, &plan, &mut |kind: ModelKind, r: &RunResult| {
        eprintln!("{kind} run {}: accuracy {:.4}", r.run, r.accuracy());
        let _ = std::io::stderr().flush();
        if let Some(m) = partial.models.iter_mut().find(|m| m.kind == kind) {
            m.runs.push(r.clone());
        }
        Ok(())
    });
    let exp = match result {
        Ok(exp) => exp,
        Err(e) => {
            // keep whatever finished
            write_results_csv(&out.join("results.partial.csv"), &items, &partial)?;
            return Err(e);
        }
    };
    let set = write_artifacts(&out, &items, &exp, cfg.harness.bins)?;
    print_summary(&exp);
    println!("wrote {} files to {}", set.files.len() + 1, out.display());
    Ok(())
}

fn cmd_sweep(root: &Path, a: &SweepArgs) -> Result<()> {
    let model: ModelKind = a.model.parse()?;
    let grid = parse_grid(&a.grid)?;
    let cfg = a.common.config()?;
    let ds = load_dataset(&a.common.dataset)?;
    let items = ds.items();
    let plan = cfg.plan(vec![model], a.common.seed);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("sweep-{}-{}", a.model, a.param)));
    // validates the parameter name before creating anything
    plan.clone()
        .set_param(model, &a.param, grid.first().copied().unwrap_or(1.0))?;
    prepare_output_dir(&out, a.common.force)?;
    let points = eval::sweep(&items, &plan, model, &a.param, &grid, &mut |v, m, s| {
        eprintln!("{}={v}: {m:.4} ± {s:.4}", a.param);
    })?;
    let mut csv = format!("{},acc_mean,acc_std,best\n", a.param);
    println!("{:>12} {:>9} {:>9}", a.param, "acc_mean", "acc_std");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.value, p.acc_mean, p.acc_std, p.best
        ));
        println!(
            "{:>12} {:>9.4} {:>9.4}{}",
            p.value,
            p.acc_mean,
            p.acc_std,
            if p.best { "  *" } else { "" }
        );
    }
    let path = out.join("sweep.csv");
    fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let items = ds.items();
    let exp = read_results_csv(&a.results.join("results.csv"))?;
    for m in &exp.models {
        for r in &m.runs {
            if let Some(bad) = r.records.iter().find(|rec| rec.item >= items.len()) {
                return Err(Error::Config(format!(
                    "results refer to item {} but the dataset has {}",
                    bad.item,
                    items.len()
                )));
            }
        }
    }
    let out = a.out.clone().unwrap_or_else(|| a.results.clone());
    let set = write_artifacts(&out, &items, &exp, a.bins.unwrap_or(eval::DEFAULT_BINS))?;
    print_summary(&exp);
    println!("wrote {} files to {}", set.files.len(), out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CorruptDataset { .. } => 3,
        Error::OutputExists(_) => 4,
        Error::Config(_) | Error::UnknownParameter { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&cli.out_root, a),
        Command::Evaluate(a) => cmd_evaluate(&cli.out_root, a),
        Command::Sweep(a) => cmd_sweep(&cli.out_root, a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
