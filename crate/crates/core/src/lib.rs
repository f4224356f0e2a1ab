//! Persistent homology of greyscale images under noise.
//!
//! The pipeline runs image → filtration field → filtered complex → persistence
//! diagram → signature vector, with metrics, an SVM and experiment drivers on top.

pub mod assignment;
pub mod complex;
pub mod experiment;
pub mod filtration;
pub mod image;
pub mod ingest;
pub mod metrics;
pub mod noise;
pub mod persistence;
pub mod rips;
pub mod signatures;
pub mod svm;

pub use complex::{build_cubical, build_dtm_rips, build_rips, Cell, ComplexKind, FilteredComplex};
pub use filtration::{FiltrationField, FiltrationKind, PointCloud};
pub use image::{GreyscaleImage, LabeledDataset};
pub use noise::{NamedTransform, TransformSpec};
pub use persistence::{compute_persistence, PersistenceDiagram};
