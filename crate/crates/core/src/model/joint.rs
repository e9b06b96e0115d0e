use stripepaint_tensor::Tensor;

use crate::attention::{stripe_merge, stripe_partition, AttnRecord};
use crate::error::{Error, Result};

/// Applies the mixing attention of a global block to local features.
///
/// `local` (`N×C×H×W`) is cut into the stripes of the record's mixing group,
/// its channels split evenly over that group's heads, and each head's token
/// block is replaced by `A·F`. The result has the shape of `local`.
pub fn joint_attention_mix(record: &AttnRecord, local: &Tensor) -> Result<Tensor> {
    let group = record.mix_group();
    let d = local.dims().to_vec();
    if d.len() != 4
        || d[0] != record.batch
        || d[2] != group.spec.height()
        || d[3] != group.spec.width()
    {
        return Err(Error::Size(format!(
            "local features {d:?} do not match attention over {} samples of {}x{}",
            record.batch,
            group.spec.height(),
            group.spec.width()
        )));
    }
    let (c, heads) = (d[1], group.heads);
    if c % heads != 0 {
        return Err(Error::Size(format!(
            "{c} local channels cannot be split into {heads} heads"
        )));
    }
    let blocks = stripe_partition(local, &group.spec)?;
    let (b, t) = (blocks.dims()[0], blocks.dims()[1]);
    let v = blocks
        .reshape(&[b, t, heads, c / heads])?
        .permute(&[0, 2, 1, 3])?;
    let mixed = group
        .probs
        .matmul(&v)?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[b, t, c])?;
    stripe_merge(&mixed, &group.spec)
}
