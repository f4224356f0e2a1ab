//! Result tables and their CSV / manifest outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Signature};
use super::ExperimentError;
use crate::filtration::FiltrationKind;

/// Row identity shared by both tables. `dim == None` marks a field row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowKey {
    pub filtration: FiltrationKind,
    pub dim: Option<u8>,
    pub signature: Signature,
    pub transformation: String,
}

impl RowKey {
    fn dim_label(&self) -> String {
        self.dim.map_or_else(|| "-".to_string(), |d| d.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub key: RowKey,
    pub mean_distance: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub key: RowKey,
    pub clean_acc: f64,
    pub noisy_acc: f64,
    /// `(clean - noisy) / clean`; `None` when the clean accuracy is zero.
    pub rel_drop: Option<f64>,
    pub best_c: f64,
    pub best_gamma: f64,
}

impl AccuracyRow {
    pub fn relative_drop(clean: f64, noisy: f64) -> Option<f64> {
        (clean > 0.0).then(|| (clean - noisy) / clean)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub distances: Vec<DistanceRow>,
    pub accuracy: Vec<AccuracyRow>,
}

impl ResultTable {
    pub fn distance(&self, f: FiltrationKind, dim: Option<u8>, sig: Signature, t: &str) -> Option<&DistanceRow> {
        self.distances.iter().find(|r| {
            r.key.filtration == f && r.key.dim == dim && r.key.signature == sig && r.key.transformation == t
        })
    }

    pub fn accuracy_row(&self, f: FiltrationKind, dim: Option<u8>, sig: Signature, t: &str) -> Option<&AccuracyRow> {
        self.accuracy.iter().find(|r| {
            r.key.filtration == f && r.key.dim == dim && r.key.signature == sig && r.key.transformation == t
        })
    }

    pub fn distances_csv(&self) -> String {
        let mut out = String::from("filtration,dim,signature,transformation,mean_distance,n\n");
        for r in &self.distances {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.key.filtration,
                r.key.dim_label(),
                r.key.signature,
                r.key.transformation,
                r.mean_distance,
                r.n
            );
        }
        out
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from(
            "filtration,dim,signature,transformation,clean_acc,noisy_acc,rel_drop,best_C,best_gamma\n",
        );
        for r in &self.accuracy {
            let drop = r.rel_drop.map_or_else(|| "undefined".to_string(), |d| d.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.key.filtration,
                r.key.dim_label(),
                r.key.signature,
                r.key.transformation,
                r.clean_acc,
                r.noisy_acc,
                drop,
                r.best_c,
                r.best_gamma
            );
        }
        out
    }
}

/// Which collection each fitted quantity is computed over.
pub const SCOPE_RULES: &str = "truncation caps, vectorisation ranges and image variances are fitted \
per (filtration, dimension) over every image of the subset and every transformation in the run, \
clean images included";

pub fn manifest(cfg: &ExperimentConfig, experiment: &str) -> serde_json::Value {
    let seeds: serde_json::Map<String, serde_json::Value> = cfg
        .transformations
        .iter()
        .map(|t| (t.clone(), serde_json::json!(cfg.seed_for(t))))
        .collect();
    serde_json::json!({
        "experiment": experiment,
        "config_hash": cfg.hash(),
        "config": cfg,
        "global_seed": cfg.seed,
        "transformation_seeds": seeds,
        "seed_rule": "per-image seed = mix(transformation seed, transformation name, image index)",
        "scope_rules": SCOPE_RULES,
        "train_split": "leading train_fraction of the subset, remainder is the test set",
        "versions": {
            "phstab-core": env!("CARGO_PKG_VERSION"),
        },
    })
}

/// Writes `distances.csv`, `accuracy.csv` and `manifest.json` into `outdir`.
pub fn emit_reports(
    table: &ResultTable,
    manifest: &serde_json::Value,
    outdir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(outdir).map_err(io(outdir))?;
    let files = [
        ("distances.csv", table.distances_csv()),
        ("accuracy.csv", table.accuracy_csv()),
        (
            "manifest.json",
            serde_json::to_string_pretty(manifest).expect("json value serialises") + "\n",
        ),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = outdir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
