//! Deterministic inputs shared by the benchmarks.

use lpoi_core::listgen::ListRecord;
use lpoi_core::seed::rng_for;
use lpoi_core::surrogate::{PolicyKind, PreferenceFeatures, ToyPolicy, DEFAULT_CONTEXT_DIM};
use lpoi_core::synthbench::{build_lists, default_vocab, gen_scenes, SceneSet};
use lpoi_core::{Hyperparams, Image};
use rand::Rng;

/// `n` score vectors of length `z`, uniform in [-5, 5].
pub fn score_lists(n: usize, z: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, "scores");
    (0..n)
        .map(|_| (0..z).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

pub fn scenes(n: usize, seed: u64) -> SceneSet {
    gen_scenes(n, seed, &default_vocab()).expect("default vocabulary is valid")
}

pub fn records(n: usize, list_size: usize, seed: u64) -> Vec<ListRecord> {
    build_lists(&scenes(n, seed), list_size, seed, 1).expect("synthetic lists build")
}

pub fn features(records: &[ListRecord]) -> Vec<PreferenceFeatures> {
    records
        .iter()
        .map(|r| PreferenceFeatures::from_record(r, DEFAULT_CONTEXT_DIM).expect("synthetic records featurize"))
        .collect()
}

/// A policy and a distinct frozen reference of the same architecture.
pub fn policies(kind: PolicyKind, seed: u64) -> (ToyPolicy, ToyPolicy) {
    (
        ToyPolicy::random(kind, DEFAULT_CONTEXT_DIM, seed, 0.5),
        ToyPolicy::random(kind, DEFAULT_CONTEXT_DIM, seed ^ 0x5eed, 0.5),
    )
}

pub fn hyper(list_size: usize) -> Hyperparams {
    Hyperparams::new(0.1, 0.0, list_size).expect("valid hyperparameters")
}

/// A `w`×`h` image with a gradient so PNG encoding has real work to do.
pub fn textured(w: u32, h: u32) -> Image {
    let mut img = Image::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            img.set_pixel(x, y, [(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8]);
        }
    }
    img
}
