//! Command-line front end: synthetic benchmark generation plus the staged
//! bag-classification pipeline (split, bag training, saliency, patch
//! extraction, instance building/training, evaluation), runnable stage by
//! stage or end to end.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use salipatch::evaluator::MetricsReport;
use salipatch::mildata::Split;
use salipatch::pipeline::{
    run_pipeline, stage_build_instances, stage_evaluate, stage_extract_patches, stage_saliency,
    stage_split, stage_train_bag, stage_train_instance, Mode, Overrides, PipelineConfig,
    BAG_MODEL_FILE, INSTANCE_MODEL_FILE, METRICS_JSON_FILE,
};
use salipatch::synthgen::{generate_dataset, SynthConfig};

#[derive(Parser)]
#[command(
    name = "salipatch",
    version,
    about = "Weakly supervised tiny-target bag classification: saliency-ranked patch \
             extraction, instance training, and rank-weighted bag scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON run configuration; omitted fields take built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for splitting, training, and patch sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// typical | baseline_grid | salimap
    #[arg(long)]
    mode: Option<Mode>,
    /// Ranked instances per bag.
    #[arg(long)]
    k: Option<usize>,
    /// Patch side in pixels (even).
    #[arg(long)]
    patch_side: Option<usize>,
    /// Bag-level decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Run directory for all artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset root holding positive/ and negative/ image directories.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the built-in synthetic tiny-blob benchmark.
    SynthGen {
        /// Directory to create the dataset in.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_images: Option<usize>,
        #[arg(long)]
        image_side: Option<usize>,
        /// Peak blob brightness above the background.
        #[arg(long)]
        contrast: Option<f64>,
        /// Background noise amplitude.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Enumerate bags and write the train/val/test manifest.
    Split {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the bag-level head on whole images.
    TrainBag {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute and save class-activation saliency maps.
    Saliency {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cut ranked/grid patches and write the patch manifest.
    ExtractPatches {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Join extracted patches onto the manifest as labeled instances.
    BuildInstances {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the instance-level head on training patches.
    TrainInstance {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score test bags and write metrics.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every stage for the configured mode, then evaluate.
    RunAll {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn resolve_config(common: &CommonArgs) -> anyhow::Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    Overrides {
        dataset_root: common.dataset.clone(),
        out: common.out.clone(),
        seed: common.seed,
        mode: common.mode,
        k: common.k,
        patch_side: common.patch_side,
        threshold: common.threshold,
    }
    .apply(&mut config);
    Ok(config)
}

fn print_report(config: &PipelineConfig, report: &MetricsReport) {
    println!("mode: {}", config.mode);
    println!("test bags: {}", report.per_bag.len());
    println!("accuracy: {:.4}", report.accuracy);
    println!("f1: {:.4}", report.f1);
    let c = &report.confusion;
    println!(
        "confusion: tp {} fp {} fn {} tn {}",
        c.true_positives, c.false_positives, c.false_negatives, c.true_negatives
    );
    println!(
        "metrics: {}",
        config.out_dir.join(METRICS_JSON_FILE).display()
    );
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::SynthGen { out, seed, n_images, image_side, contrast, noise } => {
            let mut sc = SynthConfig::default();
            if let Some(v) = seed {
                sc.seed = v;
            }
            if let Some(v) = n_images {
                sc.n_images = v;
            }
            if let Some(v) = image_side {
                sc.image_side = v;
            }
            if let Some(v) = contrast {
                sc.blob_contrast = v;
            }
            if let Some(v) = noise {
                sc.noise_amplitude = v;
            }
            eprintln!(
                "[synth-gen] writing {} {}x{} images to {}",
                sc.n_images,
                sc.image_side,
                sc.image_side,
                out.display()
            );
            let truth = generate_dataset(&sc, &out)?;
            let positives =
                truth.items.iter().filter(|i| !i.blobs.is_empty()).count();
            eprintln!(
                "[synth-gen] done: {} images ({} positive)",
                truth.items.len(),
                positives
            );
        }
        Command::Split { common } => {
            let config = resolve_config(&common)?;
            let manifest = stage_split(&config)?;
            eprintln!(
                "[split] {} bags -> {} train / {} val / {} test",
                manifest.bags.len(),
                manifest.bags_in(Split::Train).count(),
                manifest.bags_in(Split::Val).count(),
                manifest.bags_in(Split::Test).count()
            );
        }
        Command::TrainBag { common } => {
            let config = resolve_config(&common)?;
            eprintln!("[train-bag] training bag-level head (seed {})", config.seed);
            stage_train_bag(&config)?;
            eprintln!(
                "[train-bag] wrote {}",
                config.out_dir.join(BAG_MODEL_FILE).display()
            );
        }
        Command::Saliency { common } => {
            let config = resolve_config(&common)?;
            let written = stage_saliency(&config)?;
            eprintln!("[saliency] wrote {written} maps");
        }
        Command::ExtractPatches { common } => {
            let config = resolve_config(&common)?;
            let patches = stage_extract_patches(&config)?;
            eprintln!("[extract-patches] wrote {patches} patches");
        }
        Command::BuildInstances { common } => {
            let config = resolve_config(&common)?;
            let instances = stage_build_instances(&config)?;
            eprintln!("[build-instances] manifest now lists {instances} instances");
        }
        Command::TrainInstance { common } => {
            let config = resolve_config(&common)?;
            eprintln!(
                "[train-instance] training instance-level head (seed {})",
                config.seed
            );
            stage_train_instance(&config)?;
            eprintln!(
                "[train-instance] wrote {}",
                config.out_dir.join(INSTANCE_MODEL_FILE).display()
            );
        }
        Command::Evaluate { common } => {
            let config = resolve_config(&common)?;
            let report = stage_evaluate(&config)?;
            eprintln!("[evaluate] scored {} test bags", report.per_bag.len());
            print_report(&config, &report);
        }
        Command::RunAll { common } => {
            let config = resolve_config(&common)?;
            eprintln!(
                "[run-all] mode {} seed {} -> {}",
                config.mode,
                config.seed,
                config.out_dir.display()
            );
            let report = run_pipeline(&config)?;
            print_report(&config, &report);
        }
    }
    Ok(())
}
