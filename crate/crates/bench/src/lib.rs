//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use phstab_core::ingest::load_idx_images;
use phstab_core::GreyscaleImage;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// The first `n` vendored MNIST images.
pub fn sample_images(n: usize) -> Vec<GreyscaleImage> {
    let mut images = load_idx_images(data_dir().join("train-1000-images-idx3-ubyte")).expect("vendored MNIST subset");
    images.truncate(n);
    images
}
