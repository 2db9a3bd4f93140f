use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gridfree_bench::config::{load_config, BenchConfig, ConfigError, TrainConfig};
use gridfree_bench::plot::{line_chart, write_report_plots, Series};
use gridfree_bench::report::ReportBuilder;
use gridfree_bench::{evaluate_run, run_method, EvalConfig, SnrBins};
use gridfree_cnn::train::write_history_csv;
use gridfree_cnn::weights::{dataset_hash, save_weights, WeightsMeta};
use gridfree_cnn::{train, CnnEstimator};
use gridfree_core::dataset::{generate_dataset, read_dataset, write_dataset, DatasetSpec};
use gridfree_core::estimate::{EstimationResult, Method};
use gridfree_core::refine::crb_tau_alpha;
use log::{info, warn};

#[derive(Parser)]
#[command(name = "gridfree", version, about = "Grid-free delay-Doppler estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Run the trained network on every record of a dataset.
    Infer(InferArgs),
    /// Refine CNN estimates (or the truth without weights) by Gauss-Newton.
    Refine(RefineArgs),
    /// Benchmark estimators per SNR bin.
    Bench(BenchArgs),
    /// Cramer-Rao bound per SNR bin at the true parameters.
    Crb(CrbArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the loss curves as SVG.
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    /// Evaluation document; only the `refine` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Comma-separated subset of periodogram, cnn, cnn+gn, gn-oracle-init.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// A bin width in dB, or comma-separated bin edges.
    #[arg(long)]
    snr_bins: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct CrbArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    snr_bins: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Refine(a) => refine(a),
        Command::Bench(a) => bench(a),
        Command::Crb(a) => crb(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let mut spec: DatasetSpec = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    out_dir(&a.out)?;
    let ds = generate_dataset(&spec)?;
    let path = a.out.join("dataset");
    write_dataset(&path, &ds)?;
    info!(
        "wrote {} records ({} rejected draws) to {}",
        ds.len(),
        ds.rejected_draws,
        path.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg: TrainConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.training.seed = s;
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(ConfigError {
            field: "validation_fraction".into(),
            message: "must lie in [0, 1)".into(),
        }
        .into());
    }
    let ds = read_dataset(&a.dataset)?;
    let grid = ds.spec.grid;
    if (grid.n_freq, grid.n_time) != (cfg.network.n_freq, cfg.network.n_time) {
        return Err(ConfigError {
            field: "network.n_freq".into(),
            message: format!(
                "network expects {}x{} snapshots, dataset holds {}x{}",
                cfg.network.n_freq, cfg.network.n_time, grid.n_freq, grid.n_time
            ),
        }
        .into());
    }
    let n_val = (ds.len() as f64 * cfg.validation_fraction).round() as usize;
    let (train_set, validation) = ds.records.split_at(ds.len() - n_val);
    out_dir(&a.out)?;
    let out = train(&cfg.network, train_set, validation, &cfg.training, |r| {
        info!("epoch {} train {:.5} ({:.0} s)", r.epoch, r.train.total, r.seconds);
        ControlFlow::Continue(())
    })?;
    let meta = WeightsMeta {
        training: Some(cfg.training.clone()),
        dataset_hash: Some(dataset_hash(train_set)),
        best_epoch: Some(out.best_epoch),
        history: out.history.clone(),
        ..WeightsMeta::untrained(&cfg.network, &cfg.training.input, cfg.training.seed)
    };
    save_weights(&a.out.join("weights.bin"), &out.network, &meta)?;
    write_history_csv(&out.history, BufWriter::new(File::create(a.out.join("history.csv"))?))?;
    if a.plots {
        let curve = |f: fn(&gridfree_cnn::train::EpochRecord) -> Option<f64>| -> Vec<(f64, f64)> {
            out.history.iter().filter_map(|r| Some((r.epoch as f64, f(r)?))).collect()
        };
        let series = [
            Series {
                name: "train".into(),
                points: curve(|r| Some(r.train.total)),
            },
            Series {
                name: "validation".into(),
                points: curve(|r| r.validation.map(|v| v.total)),
            },
        ];
        fs::write(a.out.join("loss.svg"), line_chart("Training loss", "epoch", "loss", &series, true))?;
    }
    info!("best epoch {}, weights in {}", out.best_epoch, a.out.display());
    Ok(())
}

fn write_estimates(path: &Path, rows: &[(usize, EstimationResult)]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "record,method,p_hat,path,tau,alpha,gamma_re,gamma_im,wall_time_s")?;
    for (i, e) in rows {
        let p = &e.paths;
        if p.is_empty() {
            writeln!(w, "{i},{},0,,,,,,{}", e.method, e.wall_time)?;
        }
        for k in 0..p.len() {
            writeln!(
                w,
                "{i},{},{},{k},{},{},{},{},{}",
                e.method,
                p.len(),
                p.taus[k],
                p.alphas[k],
                p.gammas[k].re,
                p.gammas[k].im,
                e.wall_time
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn infer(a: InferArgs) -> anyhow::Result<()> {
    let ds = read_dataset(&a.dataset)?;
    if ds.is_empty() {
        bail!("dataset {} is empty", a.dataset.display());
    }
    let mut est = CnnEstimator::from_weights(&a.weights, &ds.spec.grid)?;
    let rows = ds
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((i, est.estimate(&r.snapshot)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    out_dir(&a.out)?;
    write_estimates(&a.out.join("estimates.csv"), &rows)?;
    info!("estimated {} records", rows.len());
    Ok(())
}

fn refine(a: RefineArgs) -> anyhow::Result<()> {
    let cfg: EvalConfig = load_config(a.config.as_deref())?;
    let ds = read_dataset(&a.dataset)?;
    let mut cnn = match &a.weights {
        Some(w) => Some(CnnEstimator::from_weights(w, &ds.spec.grid)?),
        None => None,
    };
    let method = if cnn.is_some() { Method::CnnGn } else { Method::GnOracleInit };
    out_dir(&a.out)?;
    let mut trace = BufWriter::new(File::create(a.out.join("refine_trace.csv"))?);
    writeln!(trace, "record,iteration,nll,step,z_norm")?;
    let mut rows = Vec::new();
    for (i, r) in ds.records.iter().enumerate() {
        let e = run_method(method, &r.snapshot, &cfg, cnn.as_mut())?;
        if let Some(rep) = &e.diagnostics.refine {
            let mut buf = Vec::new();
            rep.write_csv(&mut buf)?;
            for line in String::from_utf8(buf)?.lines().skip(1) {
                writeln!(trace, "{i},{line}")?;
            }
        }
        rows.push((i, e));
    }
    trace.flush()?;
    write_estimates(&a.out.join("estimates.csv"), &rows)?;
    info!("refined {} records with {method}", rows.len());
    Ok(())
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let mut cfg: BenchConfig = load_config(a.config.as_deref())?;
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    if let Some(b) = &a.snr_bins {
        cfg.eval.snr_bins = SnrBins::parse(b)?;
    }
    let ds = read_dataset(&a.dataset)?;
    let mut cnn = match &a.weights {
        Some(w) => Some(CnnEstimator::from_weights(w, &ds.spec.grid)?),
        None => {
            if cfg.methods.iter().any(Method::needs_weights) {
                warn!("no --weights given; CNN methods are skipped");
            }
            None
        }
    };
    let report = evaluate_run(&ds.records, &cfg.methods, &cfg.eval, cnn.as_mut())?;
    out_dir(&a.out)?;
    report.write_csv(File::create(a.out.join("bench.csv"))?)?;
    if a.plots {
        write_report_plots(&report, &a.out)?;
    }
    info!("{} report rows written to {}", report.rows.len(), a.out.display());
    Ok(())
}

fn crb(a: CrbArgs) -> anyhow::Result<()> {
    let mut cfg: EvalConfig = load_config(a.config.as_deref())?;
    if let Some(b) = &a.snr_bins {
        cfg.snr_bins = SnrBins::parse(b)?;
    }
    let ds = read_dataset(&a.dataset)?;
    let mut b = ReportBuilder::new();
    for r in &ds.records {
        let Some(bin) = cfg.snr_bins.bin(r.snr_db()?) else {
            continue;
        };
        match crb_tau_alpha(r.truth(), &r.snapshot.grid, r.sigma2()) {
            Ok(v) => b.add_crb(bin, &v),
            Err(e) => warn!("skipping record: {e}"),
        }
    }
    out_dir(&a.out)?;
    b.finish().write_csv(File::create(a.out.join("crb.csv"))?)?;
    Ok(())
}
