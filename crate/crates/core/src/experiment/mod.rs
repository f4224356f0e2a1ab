//! Experiment drivers: mean clean-vs-noisy distances and SVM accuracy under noise.
//!
//! Work runs on a rayon pool sized by the config. Every parallel step collects
//! in index order and every mean is summed sequentially afterwards, so outputs
//! do not depend on the worker count.

mod cache;
pub mod config;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cache_key, DistanceCache, Matrix};
pub use config::{ExperimentConfig, FiltrationConfig, ImageConfig, LandscapeConfig, Signature, SvmConfig};
pub use report::{emit_reports, manifest, AccuracyRow, DistanceRow, ResultTable, RowKey};

use crate::complex::{build_cubical, ComplexError};
use crate::filtration::{
    binary_filtration, density_filtration, dtm_field, dtm_weights, extract_point_cloud,
    greyscale_filtration, radial_filtration, relative_threshold, rips_field, FiltrationError,
    FiltrationField, FiltrationKind,
};
use crate::image::{GreyscaleImage, LabeledDataset};
use crate::ingest::{load_idx_dataset, take_first, IngestError};
use crate::metrics::{cross_distances, distance, pairwise_distances, DistanceMatrix, MetricError, Representation};
use crate::noise::{builtin_transform, NoiseError};
use crate::persistence::{compute_persistence, PersistenceDiagram, PersistenceError};
use crate::rips::{dtm_rips_persistence, rips_persistence};
use crate::signatures::{fit_range, landscape_vector, persistence_image, PiWeight, SignatureError, VectorizationRange};
use crate::svm::{accuracy, grid_search, kernel_from_distances, predict, train, SvmError};

/// Failure inside the per-image pipeline.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Filtration(#[from] FiltrationError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("loading data: {0}")]
    Ingest(#[from] IngestError),
    #[error("image {image}, transformation {transformation:?}: {source}")]
    Transform {
        image: usize,
        transformation: String,
        #[source]
        source: NoiseError,
    },
    #[error("image {image} ({variant}), {filtration} {stage}: {source}")]
    Stage {
        image: usize,
        variant: String,
        filtration: FiltrationKind,
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error("{filtration} dim {dim:?} {signature}: {source}")]
    Fit {
        filtration: FiltrationKind,
        dim: Option<u8>,
        signature: Signature,
        #[source]
        source: StageError,
    },
    #[error("distances for {what}: {source}")]
    Metric {
        what: String,
        #[source]
        source: MetricError,
    },
    #[error("classifier for {what}: {source}")]
    Svm {
        what: String,
        #[source]
        source: SvmError,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Seed for one image under one transformation.
pub fn image_seed(base: u64, transformation: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((transformation.len() as u64).to_le_bytes());
    h.update(transformation.as_bytes());
    h.update((index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"))
}

/// Runs `f` on a pool with `workers` threads (`None`: rayon's default).
pub fn with_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, ExperimentError> + Send,
) -> Result<T, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    pool.install(f)
}

/// Clean images, their labels and one transformed copy per transformation.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub labels: Vec<u8>,
    /// `names[v]` labels `variants[v]`; index 0 is the clean set.
    pub names: Vec<String>,
    /// `variants[v][i]`.
    pub variants: Vec<Vec<GreyscaleImage>>,
}

pub const CLEAN: &str = "clean";

impl Workbench {
    /// Loads the first `cfg.n_images` items and applies every configured transformation.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let data = take_first(load_idx_dataset(&cfg.images, &cfg.labels)?, cfg.n_images)?;
        Self::from_dataset(&data, cfg)
    }

    pub fn from_dataset(data: &LabeledDataset, cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let clean = data.images().to_vec();
        let mut names = vec![CLEAN.to_string()];
        let mut variants = Vec::with_capacity(cfg.transformations.len() + 1);
        for name in &cfg.transformations {
            let spec = builtin_transform(name)
                .map_err(|e| ExperimentError::Config(e.to_string()))?
                .spec;
            let base = cfg.seed_for(name);
            let noisy = clean
                .par_iter()
                .enumerate()
                .map(|(i, img)| {
                    let s = if spec.is_stochastic() {
                        spec.with_seed(image_seed(base, name, i))
                    } else {
                        spec.clone()
                    };
                    s.apply(img).map_err(|source| ExperimentError::Transform {
                        image: i,
                        transformation: name.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            names.push(name.clone());
            variants.push(noisy);
        }
        variants.insert(0, clean);
        Ok(Self {
            labels: data.labels().to_vec(),
            names,
            variants,
        })
    }

    pub fn n_images(&self) -> usize {
        self.labels.len()
    }
}

/// Filtration field of one image as configured.
pub fn filtration_field(img: &GreyscaleImage, f: &FiltrationConfig) -> Result<FiltrationField, FiltrationError> {
    let z0 = relative_threshold(img, f.threshold_factor);
    Ok(match f.kind {
        FiltrationKind::Binary => binary_filtration(img, z0),
        FiltrationKind::Greyscale => greyscale_filtration(img),
        FiltrationKind::Density => density_filtration(img, f.d0, z0)?,
        FiltrationKind::Radial => radial_filtration(img, f.reference, z0),
        FiltrationKind::Rips => rips_field(img, z0)?,
        FiltrationKind::Dtm => dtm_field(img, z0, f.m)?,
    })
}

/// Untruncated diagrams of dimensions 0 and 1 of one image.
pub fn image_diagrams(
    img: &GreyscaleImage,
    f: &FiltrationConfig,
) -> Result<[PersistenceDiagram; 2], (&'static str, StageError)> {
    if f.kind.is_point_cloud() {
        let z0 = relative_threshold(img, f.threshold_factor);
        let cloud = extract_point_cloud(img, z0).map_err(|e| ("point cloud", e.into()))?;
        let pair = if f.kind == FiltrationKind::Rips {
            rips_persistence(&cloud, f.r_max)
        } else {
            let w = dtm_weights(&cloud, f.m).map_err(|e| ("dtm weights", e.into()))?;
            dtm_rips_persistence(&cloud, &w, f.r_max)
        };
        pair.map_err(|e| ("persistence", e.into()))
    } else {
        let field = filtration_field(img, f).map_err(|e| ("field", e.into()))?;
        let p = compute_persistence(&build_cubical(&field)).map_err(|e| ("persistence", e.into()))?;
        Ok([p.diagram(0), p.diagram(1)])
    }
}

/// Truncation value for one dimension over a whole collection.
fn collection_cap<'a>(diagrams: impl Iterator<Item = &'a PersistenceDiagram> + Clone) -> f64 {
    let deaths = diagrams.clone().filter_map(PersistenceDiagram::max_finite_death);
    let births = diagrams.flat_map(|d| d.essential_births.iter().copied());
    deaths.chain(births).fold(0.0, f64::max)
}

/// Everything computed for one filtration over a workbench.
#[derive(Debug, Clone)]
pub struct FiltrationData {
    pub config: FiltrationConfig,
    /// `fields[v][i]`; empty unless fields were requested.
    pub fields: Vec<Vec<Vec<f64>>>,
    /// `diagrams[v][i][dim]`, essential classes closed at `caps[dim]`.
    pub diagrams: Vec<Vec<[PersistenceDiagram; 2]>>,
    pub caps: [f64; 2],
}

impl FiltrationData {
    pub fn compute(
        wb: &Workbench,
        f: &FiltrationConfig,
        want_fields: bool,
        want_diagrams: bool,
    ) -> Result<Self, ExperimentError> {
        let started = Instant::now();
        let stage_err = |v: usize, i: usize, stage, source| ExperimentError::Stage {
            image: i,
            variant: wb.names[v].clone(),
            filtration: f.kind,
            stage,
            source,
        };
        let tasks: Vec<(usize, usize)> = (0..wb.variants.len())
            .flat_map(|v| (0..wb.n_images()).map(move |i| (v, i)))
            .collect();
        let n = wb.n_images();

        let mut fields = Vec::new();
        if want_fields {
            let flat = tasks
                .par_iter()
                .map(|&(v, i)| {
                    filtration_field(&wb.variants[v][i], f)
                        .map(|fld| fld.values)
                        .map_err(|e| stage_err(v, i, "field", e.into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            fields = chunk(flat, n);
        }

        let mut diagrams = Vec::new();
        let mut caps = [0.0; 2];
        if want_diagrams {
            let raw = tasks
                .par_iter()
                .map(|&(v, i)| image_diagrams(&wb.variants[v][i], f).map_err(|(s, e)| stage_err(v, i, s, e)))
                .collect::<Result<Vec<_>, _>>()?;
            for (dim, cap) in caps.iter_mut().enumerate() {
                *cap = collection_cap(raw.iter().map(|d| &d[dim]));
            }
            let closed = raw
                .into_par_iter()
                .zip(tasks.par_iter())
                .map(|(pair, &(v, i))| {
                    let close = |d: &PersistenceDiagram, cap| {
                        d.truncate_essential(cap)
                            .map_err(|e| stage_err(v, i, "truncation", e.into()))
                    };
                    Ok([close(&pair[0], caps[0])?, close(&pair[1], caps[1])?])
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            diagrams = chunk(closed, n);
        }
        log::info!(
            "{}: {} images x {} variants in {:.2?} (caps {:?})",
            f.kind,
            n,
            wb.variants.len(),
            started.elapsed(),
            caps
        );
        Ok(Self {
            config: f.clone(),
            fields,
            diagrams,
            caps,
        })
    }

    /// `reps[v][i]` for one row of the tables.
    pub fn representations(
        &self,
        signature: Signature,
        dim: Option<u8>,
        cfg: &ExperimentConfig,
    ) -> Result<Vec<Vec<Representation>>, ExperimentError> {
        let fit_err = |source: SignatureError| ExperimentError::Fit {
            filtration: self.config.kind,
            dim,
            signature,
            source: source.into(),
        };
        if signature == Signature::Field {
            return Ok(self
                .fields
                .iter()
                .map(|v| v.iter().map(|x| Representation::Vector(x.clone())).collect())
                .collect());
        }
        let d = usize::from(dim.expect("diagram rows carry a dimension"));
        let all = || self.diagrams.iter().flatten().map(|p| &p[d]);
        let mut range = match fit_range(all()) {
            Ok(r) => r,
            // no pair anywhere: every vector is zero whatever the range
            Err(SignatureError::NoDeaths) => VectorizationRange {
                birth_min: 0.0,
                birth_max: 1.0,
                death_max: 1.0,
                persistence_max: 1.0,
                scope: None,
            },
            Err(e) => return Err(fit_err(e)),
        };
        range.scope = Some((self.config.kind, d as u8));
        let max_death = all().flat_map(|p| p.pairs.iter().map(|q| q.1)).fold(0.0, f64::max);
        let variance = if max_death > 0.0 {
            cfg.persistence_image.variance_fraction * max_death
        } else {
            1.0
        };
        self.diagrams
            .par_iter()
            .map(|row| {
                row.iter()
                    .map(|p| {
                        let pd = &p[d];
                        Ok(match signature {
                            Signature::Pd => Representation::Diagram(pd.clone()),
                            Signature::Pl => Representation::Vector(
                                landscape_vector(pd, cfg.landscape.k, cfg.landscape.resolution, &range)
                                    .map_err(fit_err)?
                                    .values,
                            ),
                            Signature::Pi => {
                                let g = cfg.persistence_image.grid;
                                Representation::Vector(
                                    persistence_image(pd, g, g, variance, &range, PiWeight::LifespanSquared)
                                        .map_err(fit_err)?
                                        .grid,
                                )
                            }
                            Signature::Field => unreachable!("handled above"),
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

fn chunk<T>(flat: Vec<T>, n: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut it = flat.into_iter();
    loop {
        let part: Vec<T> = it.by_ref().take(n).collect();
        if part.is_empty() {
            break;
        }
        out.push(part);
    }
    out
}

/// Table rows per filtration: the field row first, then each dimension's signatures.
pub fn row_layout(cfg: &ExperimentConfig) -> Vec<(Option<u8>, Signature)> {
    let mut out = Vec::new();
    if cfg.signatures.contains(&Signature::Field) {
        out.push((None, Signature::Field));
    }
    for &dim in &cfg.dims {
        for &s in cfg.signatures.iter().filter(|&&s| s != Signature::Field) {
            out.push((Some(dim), s));
        }
    }
    out
}

fn filtration_data(wb: &Workbench, f: &FiltrationConfig, cfg: &ExperimentConfig) -> Result<FiltrationData, ExperimentError> {
    let layout = row_layout(cfg);
    let want_fields = layout.iter().any(|r| r.1 == Signature::Field);
    let want_diagrams = layout.iter().any(|r| r.1 != Signature::Field);
    FiltrationData::compute(wb, f, want_fields, want_diagrams)
}

fn row_name(f: FiltrationKind, dim: Option<u8>, s: Signature) -> String {
    match dim {
        Some(d) => format!("{f} dim {d} {s}"),
        None => format!("{f} {s}"),
    }
}

/// Mean clean-to-variant distance for every row of the layout, on a prepared workbench.
pub fn distance_table(wb: &Workbench, cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let mut table = ResultTable::default();
    let n = wb.n_images();
    for f in &cfg.filtrations {
        let data = filtration_data(wb, f, cfg)?;
        for (dim, signature) in row_layout(cfg) {
            let reps = data.representations(signature, dim, cfg)?;
            for v in 1..wb.variants.len() {
                let per_image = (0..n)
                    .into_par_iter()
                    .map(|i| distance(&reps[0][i], &reps[v][i]))
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|source| ExperimentError::Metric {
                        what: format!("{} under {}", row_name(f.kind, dim, signature), wb.names[v]),
                        source,
                    })?;
                let mean = if n == 0 { 0.0 } else { per_image.iter().sum::<f64>() / n as f64 };
                table.distances.push(DistanceRow {
                    key: RowKey {
                        filtration: f.kind,
                        dim,
                        signature,
                        transformation: wb.names[v].clone(),
                    },
                    mean_distance: mean,
                    n,
                });
            }
        }
    }
    Ok(table)
}

/// Loads the data, then runs [`distance_table`] on the configured pool.
pub fn run_distance_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    with_pool(cfg.workers, || {
        let wb = Workbench::load(cfg)?;
        distance_table(&wb, cfg)
    })
}

/// Size of the leading training block.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

fn cached_pairwise(
    cache: &DistanceCache,
    items: &[Representation],
    what: &str,
) -> Result<DistanceMatrix, ExperimentError> {
    let metric = items.first().map_or(crate::metrics::MetricTag::L2, Representation::metric);
    let key = cache_key(items, None);
    if let Some(m) = cache.load(&key).filter(|m| m.rows == items.len() && m.cols == items.len()) {
        return Ok(DistanceMatrix {
            n: m.rows,
            entries: m.data,
            metric,
        });
    }
    let dm = pairwise_distances(items).map_err(|source| ExperimentError::Metric {
        what: what.to_string(),
        source,
    })?;
    let m = Matrix {
        rows: dm.n,
        cols: dm.n,
        data: dm.entries.clone(),
    };
    cache.store(&key, &m, &serde_json::json!({ "what": what, "kind": "pairwise" }));
    Ok(dm)
}

fn cached_cross(
    cache: &DistanceCache,
    rows: &[Representation],
    cols: &[Representation],
    what: &str,
) -> Result<Vec<f64>, ExperimentError> {
    let key = cache_key(rows, Some(cols));
    if let Some(m) = cache.load(&key).filter(|m| m.rows == rows.len() && m.cols == cols.len()) {
        return Ok(m.data);
    }
    let data = cross_distances(rows, cols).map_err(|source| ExperimentError::Metric {
        what: what.to_string(),
        source,
    })?;
    let m = Matrix {
        rows: rows.len(),
        cols: cols.len(),
        data,
    };
    cache.store(&key, &m, &serde_json::json!({ "what": what, "kind": "cross" }));
    Ok(m.data)
}

/// Grid search and retraining on the clean training block, then accuracy on the
/// clean and on every transformed test block.
pub fn classification_table(wb: &Workbench, cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let n = wb.n_images();
    let n_train = train_size(n, cfg.svm.train_fraction);
    let train_labels = &wb.labels[..n_train];
    let test_labels = &wb.labels[n_train..];
    let cache = DistanceCache::new(cfg.cache_dir.as_deref());
    let mut table = ResultTable::default();
    for f in &cfg.filtrations {
        let data = filtration_data(wb, f, cfg)?;
        for (dim, signature) in row_layout(cfg) {
            let what = row_name(f.kind, dim, signature);
            let svm_err = |source| ExperimentError::Svm {
                what: what.clone(),
                source,
            };
            let started = Instant::now();
            let reps = data.representations(signature, dim, cfg)?;
            let train_reps = &reps[0][..n_train];
            let dm = cached_pairwise(&cache, train_reps, &what)?;
            let cv = grid_search(
                &dm,
                train_labels,
                &cfg.svm.c_grid,
                &cfg.svm.gamma_grid,
                cfg.svm.folds,
                cfg.svm.fold_seed,
            )
            .map_err(svm_err)?;
            let model = train(&kernel_from_distances(&dm.entries, cv.best_gamma), train_labels, cv.best_c)
                .map_err(svm_err)?;
            let score = |v: usize| -> Result<f64, ExperimentError> {
                let cross = cached_cross(&cache, &reps[v][n_train..], train_reps, &what)?;
                let predicted = predict(&model, &kernel_from_distances(&cross, cv.best_gamma)).map_err(svm_err)?;
                Ok(accuracy(&predicted, test_labels))
            };
            let clean_acc = score(0)?;
            for v in 1..wb.variants.len() {
                let noisy_acc = score(v)?;
                table.accuracy.push(AccuracyRow {
                    key: RowKey {
                        filtration: f.kind,
                        dim,
                        signature,
                        transformation: wb.names[v].clone(),
                    },
                    clean_acc,
                    noisy_acc,
                    rel_drop: AccuracyRow::relative_drop(clean_acc, noisy_acc),
                    best_c: cv.best_c,
                    best_gamma: cv.best_gamma,
                });
            }
            log::info!(
                "{what}: C={} gamma={} cv={:.3} clean={clean_acc:.3} in {:.2?}",
                cv.best_c,
                cv.best_gamma,
                cv.best_accuracy,
                started.elapsed()
            );
        }
    }
    Ok(table)
}

/// Loads the data, then runs [`classification_table`] on the configured pool.
pub fn run_classification_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    cfg.validate_classification()?;
    with_pool(cfg.workers, || {
        let wb = Workbench::load(cfg)?;
        classification_table(&wb, cfg)
    })
}
