use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use phstab_core::experiment::{
    emit_reports, filtration_field, image_diagrams, image_seed, manifest, run_classification_experiment,
    run_distance_experiment, ExperimentConfig, FiltrationConfig,
};
use phstab_core::ingest::{encode_pgm, load_idx_images, load_pgm};
use phstab_core::noise::builtin_transforms;
use phstab_core::persistence::write_diagrams_csv;
use phstab_core::{FiltrationKind, GreyscaleImage};

#[derive(Parser)]
#[command(name = "phstab", version, about = "Persistent homology of images under noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean distance between clean and transformed representations.
    Distances {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// SVM accuracy on clean and transformed test sets.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Prints the persistence diagram of one image as CSV.
    Ph {
        /// PGM file, or an IDX image file together with --index.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        index: Option<usize>,
        /// binary, greyscale, density, radial, rips or dtm.
        #[arg(long)]
        filtration: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        dim: Option<u8>,
        /// Also print the filtration field.
        #[arg(long)]
        field: bool,
    },
    /// Writes the sixteen transformed copies of one image as PGM files.
    Noises {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_image(path: &Path, index: Option<usize>) -> Result<GreyscaleImage> {
    match index {
        Some(i) => {
            let images = load_idx_images(path).with_context(|| format!("reading {}", path.display()))?;
            let n = images.len();
            images
                .into_iter()
                .nth(i)
                .with_context(|| format!("index {i} out of range ({n} images)"))
        }
        None => load_pgm(path).with_context(|| format!("reading {}", path.display())),
    }
}

fn load_config(path: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Distances { config, out, workers } => {
            let cfg = load_config(&config, out, workers)?;
            let started = Instant::now();
            let table = run_distance_experiment(&cfg)?;
            let files = emit_reports(&table, &manifest(&cfg, "distances"), &cfg.out_dir)?;
            log::info!("distances done in {:.2?}", started.elapsed());
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Classify { config, out, workers } => {
            let cfg = load_config(&config, out, workers)?;
            let started = Instant::now();
            let table = run_classification_experiment(&cfg)?;
            let files = emit_reports(&table, &manifest(&cfg, "classification"), &cfg.out_dir)?;
            log::info!("classification done in {:.2?}", started.elapsed());
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Ph {
            image,
            index,
            filtration,
            dim,
            field,
        } => {
            let Some(kind) = FiltrationKind::parse(&filtration) else {
                bail!("unknown filtration {filtration:?}");
            };
            let img = read_image(&image, index)?;
            let fcfg = FiltrationConfig::new(kind);
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            if field {
                filtration_field(&img, &fcfg)?.write_csv(&mut out)?;
                writeln!(out)?;
            }
            let diagrams = image_diagrams(&img, &fcfg).map_err(|(stage, e)| anyhow::anyhow!("{stage}: {e}"))?;
            let chosen: Vec<_> = diagrams.into_iter().filter(|d| dim.map_or(true, |k| d.dim == k)).collect();
            write_diagrams_csv(&chosen, &mut out)?;
        }
        Command::Noises { image, index, out, seed } => {
            let img = read_image(&image, index)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let item = index.unwrap_or(0);
            for t in builtin_transforms() {
                let spec = t.spec.with_seed(image_seed(seed, &t.name, item));
                let noisy = spec.apply(&img).with_context(|| format!("applying {}", t.name))?;
                let path = out.join(format!("{}.pgm", file_stem(&t.name)));
                fs::write(&path, encode_pgm(&noisy)).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
