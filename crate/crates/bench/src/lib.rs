//! Fixtures shared by the benchmarks.

use motionzero::{LatentGrid, LatentShape, Mask, Resolution};

/// Deterministic non-constant latent.
pub fn latent(channels: usize, side: usize) -> LatentGrid {
    LatentGrid::from_fn(LatentShape::new(channels, side, side), |c, x, y| {
        ((c * 131 + x * 17 + y * 29) % 97) as f64 / 48.5 - 1.0
    })
}

/// `count` square masks of side `side / 8`, spread along the diagonal.
pub fn masks(side: usize, count: usize) -> Vec<Mask> {
    let s = side / 8;
    (0..count)
        .map(|i| {
            let at = (i + 1) * side / (count + 1) - s / 2;
            Mask::rect(side, side, Resolution::Latent, at, at, s, s)
        })
        .collect()
}
