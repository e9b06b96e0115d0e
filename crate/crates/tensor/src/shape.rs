//! Shape helpers: element counts, row-major strides, broadcasting.

use crate::error::{Result, TensorError};

pub fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn validate(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(TensorError::InvalidShape(dims.to_vec()));
    }
    Ok(())
}

/// Row-major strides for `dims`.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Numpy-style broadcast of two shapes (dimensions aligned from the right).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() {
            1
        } else {
            a[i - (rank - a.len())]
        };
        let db = if i < rank - b.len() {
            1
        } else {
            b[i - (rank - b.len())]
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `src` when viewed as `target` under broadcasting: broadcast
/// dimensions get stride 0.
pub fn broadcast_strides(src: &[usize], target: &[usize]) -> Vec<usize> {
    let own = strides(src);
    let offset = target.len() - src.len();
    (0..target.len())
        .map(|i| {
            if i < offset || src[i - offset] == 1 {
                0
            } else {
                own[i - offset]
            }
        })
        .collect()
}

/// Maps every flat index of `target` to a flat index in `src` under
/// broadcasting. The returned table has `numel(target)` entries.
pub fn broadcast_index_map(src: &[usize], target: &[usize]) -> Vec<usize> {
    let st = broadcast_strides(src, target);
    let n = numel(target);
    let rank = target.len();
    let mut idx = vec![0usize; rank];
    let mut out = Vec::with_capacity(n);
    let mut flat = 0usize;
    for _ in 0..n {
        out.push(flat);
        for d in (0..rank).rev() {
            idx[d] += 1;
            flat += st[d];
            if idx[d] < target[d] {
                break;
            }
            flat -= st[d] * target[d];
            idx[d] = 0;
        }
    }
    out
}
