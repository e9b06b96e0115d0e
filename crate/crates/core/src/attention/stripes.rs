use stripepaint_tensor::Tensor;

use super::{Orientation, StripeSpec};
use crate::error::{Error, Result};
use crate::nn::{map_to_tokens, tokens_to_map};

/// Regroups `N×(H·W)×C` tokens into `(N·S)×T×C` stripe blocks.
///
/// Within a horizontal stripe tokens stay row-major over `sw×W`; within a
/// vertical stripe they are row-major over `H×sw`.
pub fn tokens_to_stripes(x: &Tensor, spec: &StripeSpec) -> Result<Tensor> {
    let d = x.dims();
    if d.len() != 3 || d[1] != spec.height() * spec.width() {
        return Err(Error::Size(format!(
            "tokens {d:?} do not match a {}x{} map",
            spec.height(),
            spec.width()
        )));
    }
    let (n, c) = (d[0], d[2]);
    let (s, t) = (spec.stripes(), spec.tokens());
    Ok(match spec.orientation() {
        Orientation::Horizontal => x.reshape(&[n * s, t, c])?,
        Orientation::Vertical => x
            .reshape(&[n, spec.height(), s, spec.sw(), c])?
            .permute(&[0, 2, 1, 3, 4])?
            .reshape(&[n * s, t, c])?,
    })
}

/// Inverse of [`tokens_to_stripes`].
pub fn stripes_to_tokens(x: &Tensor, spec: &StripeSpec) -> Result<Tensor> {
    let d = x.dims();
    let (s, t) = (spec.stripes(), spec.tokens());
    if d.len() != 3 || d[1] != t || !d[0].is_multiple_of(s) {
        return Err(Error::Size(format!(
            "stripe blocks {d:?} do not match {spec:?}"
        )));
    }
    let (n, c) = (d[0] / s, d[2]);
    Ok(match spec.orientation() {
        Orientation::Horizontal => x.reshape(&[n, s * t, c])?,
        Orientation::Vertical => x
            .reshape(&[n, s, spec.height(), spec.sw(), c])?
            .permute(&[0, 2, 1, 3, 4])?
            .reshape(&[n, s * t, c])?,
    })
}

/// Cuts an `N×C×H×W` map into stripe token blocks, stacked as
/// `(N·S)×T×C` with the stripes of sample `n` at `n·S .. (n+1)·S`.
pub fn stripe_partition(x: &Tensor, spec: &StripeSpec) -> Result<Tensor> {
    let d = x.dims();
    if d.len() != 4 || d[2] != spec.height() || d[3] != spec.width() {
        return Err(Error::Size(format!("map {d:?} does not match {spec:?}")));
    }
    tokens_to_stripes(&map_to_tokens(x)?, spec)
}

/// Reassembles stripe blocks into an `N×C×H×W` map.
pub fn stripe_merge(blocks: &Tensor, spec: &StripeSpec) -> Result<Tensor> {
    tokens_to_map(
        &stripes_to_tokens(blocks, spec)?,
        spec.height(),
        spec.width(),
    )
}
