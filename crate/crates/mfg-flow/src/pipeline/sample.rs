//! Seeded sampling of problem instances.
//!
//! Every random draw in the pipeline comes from a ChaCha stream derived
//! from `(seed, stream id)`. Dataset sample i uses stream i; the high
//! stream ids are reserved for the train/test split, training
//! (initialization + shuffling), and evaluation-pair sampling. Streams
//! are independent, so parallel generation order cannot affect results.

use crate::types::{ParamBox, SimplexDist};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SPLIT: u64 = u64::MAX;
pub const STREAM_TRAIN: u64 = u64::MAX - 1;
pub const STREAM_EVAL: u64 = u64::MAX - 2;

/// ChaCha generator for a given root seed and stream id.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the probability simplex P([d]) (flat Dirichlet):
/// d independent unit-rate exponentials normalized by their sum.
pub fn sample_simplex<R: Rng>(rng: &mut R, d: usize) -> SimplexDist {
    assert!(d >= 1);
    if d == 1 {
        return SimplexDist::new(vec![1.0]).expect("degenerate simplex");
    }
    loop {
        let mut draws = Vec::with_capacity(d);
        let mut sum = 0.0;
        for _ in 0..d {
            let u: f64 = rng.gen();
            let e = -(1.0 - u).ln();
            draws.push(e);
            sum += e;
        }
        if sum > 0.0 {
            for v in &mut draws {
                *v /= sum;
            }
            return SimplexDist::new(draws).expect("normalized exponentials lie on the simplex");
        }
        // All draws were exactly zero; redraw.
    }
}

/// Uniform draw from an axis-aligned box, coordinatewise independent.
pub fn sample_kappa<R: Rng>(rng: &mut R, kappa_box: &ParamBox) -> Vec<f64> {
    kappa_box
        .lower()
        .iter()
        .zip(kappa_box.upper())
        .map(|(l, u)| {
            if l == u {
                *l
            } else {
                l + (u - l) * rng.gen::<f64>()
            }
        })
        .collect()
}
