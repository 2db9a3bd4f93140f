//! Reduced-scale training and evaluation run.
//!
//! `cargo run --release -p gridfree-bench --example desk_scale -- [setup.json] [cache-dir]`

use std::path::PathBuf;

use gridfree_bench::config::load_config;
use gridfree_bench::experiment::{run_desk_scale, DeskScale};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let setup: DeskScale = load_config(args.next().map(PathBuf::from).as_deref())?;
    let cache = args.next().map_or_else(|| std::env::temp_dir().join("gridfree-desk"), PathBuf::from);
    let out = run_desk_scale(&setup, &cache, |r| {
        println!(
            "epoch {:2}  train {:.4}  validation {:.4}  ({:.0} s)",
            r.epoch,
            r.train.total,
            r.validation.map_or(f64::NAN, |v| v.total),
            r.seconds
        );
    })?;
    println!("training took {:.0} s, weights in {}", out.train_seconds, out.weights.display());
    println!(
        "model order accuracy: cnn {:.3}, edc {:.3}",
        out.cnn_order_accuracy, out.edc_order_accuracy
    );
    out.report.write_csv(std::io::stdout())?;
    Ok(())
}
