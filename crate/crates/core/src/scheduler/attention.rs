//! Anchored cross-frame attention `Softmax(Q Kᵀ / √d) V`.

use crate::error::ShapeError;

/// Softmax weights of one query over `keys`, written into `weights`.
/// Uses the max-subtraction form so large logits do not overflow.
pub fn softmax_weights(q: &[f64], keys: &[&[f64]], weights: &mut [f64]) {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let mut max = f64::NEG_INFINITY;
    for (w, k) in weights.iter_mut().zip(keys) {
        *w = q.iter().zip(k.iter()).map(|(a, b)| a * b).sum::<f64>() * scale;
        max = max.max(*w);
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Attention output for a single query row. `scratch` must hold one slot per
/// key. Callers guarantee matching dimensions.
pub fn attend_row(q: &[f64], keys: &[&[f64]], values: &[&[f64]], scratch: &mut [f64], out: &mut [f64]) {
    softmax_weights(q, keys, scratch);
    out.iter_mut().for_each(|o| *o = 0.0);
    for (w, v) in scratch.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
}

fn check_rows(rows: &[Vec<f64>], dim: usize, what: &'static str) -> Result<(), ShapeError> {
    match rows.iter().find(|r| r.len() != dim) {
        Some(r) => Err(ShapeError::new(what, dim, r.len())),
        None => Ok(()),
    }
}

/// Row-stochastic attention matrix `Softmax(Q Kᵀ / √d)`.
pub fn attention_weights(q: &[Vec<f64>], k: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ShapeError> {
    let d = q.first().map(Vec::len).unwrap_or(0);
    check_rows(q, d, "attention query rows")?;
    check_rows(k, d, "attention key rows")?;
    if k.is_empty() {
        return Err(ShapeError::new("attention keys", "at least one key", 0));
    }
    let keys: Vec<&[f64]> = k.iter().map(Vec::as_slice).collect();
    Ok(q.iter()
        .map(|row| {
            let mut w = vec![0.0; keys.len()];
            softmax_weights(row, &keys, &mut w);
            w
        })
        .collect())
}

/// Anchored attention over whole matrices: each output row is a convex combination
/// of the rows of `v`.
pub fn cross_frame_attention(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ShapeError> {
    if k.len() != v.len() {
        return Err(ShapeError::new("attention keys vs values", k.len(), v.len()));
    }
    let dv = v.first().map(Vec::len).unwrap_or(0);
    check_rows(v, dv, "attention value rows")?;
    let weights = attention_weights(q, k)?;
    Ok(weights
        .iter()
        .map(|w| {
            let mut out = vec![0.0; dv];
            for (wi, row) in w.iter().zip(v) {
                for (o, x) in out.iter_mut().zip(row) {
                    *o += wi * x;
                }
            }
            out
        })
        .collect())
}
