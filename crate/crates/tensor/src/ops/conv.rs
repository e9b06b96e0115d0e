//! Spatial operations on `N×C×H×W` tensors.

use crate::error::{Result, TensorError};
use crate::ops::matmul::gemm;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    groups: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn cg(&self) -> usize {
        self.c / self.groups
    }
    fn og(&self) -> usize {
        self.o / self.groups
    }
    fn col_rows(&self) -> usize {
        self.cg() * self.kh * self.kw
    }
    fn spatial_out(&self) -> usize {
        self.ho * self.wo
    }
    fn is_depthwise(&self) -> bool {
        self.groups == self.c && self.o == self.c
    }
}

/// Unfolds the input patches of one (sample, group) into a
/// `(Cg·kh·kw) × (Ho·Wo)` matrix.
fn im2col(x: &[f32], g: &ConvGeom, n: usize, grp: usize, cols: &mut [f32]) {
    let hw = g.spatial_out();
    for c in 0..g.cg() {
        let plane = &x[((n * g.c) + grp * g.cg() + c) * g.h * g.w..][..g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * hw..][..hw];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds a column matrix back into `dx`.
fn col2im(cols: &[f32], g: &ConvGeom, n: usize, grp: usize, dx: &mut [f32]) {
    let hw = g.spatial_out();
    for c in 0..g.cg() {
        let plane = &mut dx[((n * g.c) + grp * g.cg() + c) * g.h * g.w..][..g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &cols[((c * g.kh + i) * g.kw + j) * hw..][..hw];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += row[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward(x: &[f32], w: &[f32], g: &ConvGeom) -> Vec<f32> {
    let hw = g.spatial_out();
    let mut out = vec![0.0f32; g.n * g.o * hw];
    if g.is_depthwise() {
        for n in 0..g.n {
            for c in 0..g.c {
                let plane = &x[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                let k = &w[c * g.kh * g.kw..][..g.kh * g.kw];
                let dst = &mut out[(n * g.o + c) * hw..][..hw];
                for oy in 0..g.ho {
                    for ox in 0..g.wo {
                        let mut acc = 0.0f32;
                        for i in 0..g.kh {
                            let iy = (oy * g.stride + i) as isize - g.pad as isize;
                            if iy < 0 || iy >= g.h as isize {
                                continue;
                            }
                            for j in 0..g.kw {
                                let ix = (ox * g.stride + j) as isize - g.pad as isize;
                                if ix >= 0 && ix < g.w as isize {
                                    acc += k[i * g.kw + j] * plane[iy as usize * g.w + ix as usize];
                                }
                            }
                        }
                        dst[oy * g.wo + ox] = acc;
                    }
                }
            }
        }
        return out;
    }
    let rows = g.col_rows();
    let mut cols = vec![0.0f32; rows * hw];
    for n in 0..g.n {
        for grp in 0..g.groups {
            im2col(x, g, n, grp, &mut cols);
            let wg = &w[grp * g.og() * rows..][..g.og() * rows];
            let dst = &mut out[(n * g.o + grp * g.og()) * hw..][..g.og() * hw];
            gemm(g.og(), rows, hw, wg, (rows, 1), &cols, (hw, 1), 0.0, dst);
        }
    }
    out
}

fn conv_backward(
    x: &[f32],
    w: &[f32],
    gout: &[f32],
    g: &ConvGeom,
    need_x: bool,
    need_w: bool,
) -> (Option<Vec<f32>>, Option<Vec<f32>>) {
    let hw = g.spatial_out();
    let mut dx = need_x.then(|| vec![0.0f32; x.len()]);
    let mut dw = need_w.then(|| vec![0.0f32; w.len()]);
    if g.is_depthwise() {
        for n in 0..g.n {
            for c in 0..g.c {
                let plane = &x[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                let k = &w[c * g.kh * g.kw..][..g.kh * g.kw];
                let go = &gout[(n * g.o + c) * hw..][..hw];
                for oy in 0..g.ho {
                    for ox in 0..g.wo {
                        let gv = go[oy * g.wo + ox];
                        if gv == 0.0 {
                            continue;
                        }
                        for i in 0..g.kh {
                            let iy = (oy * g.stride + i) as isize - g.pad as isize;
                            if iy < 0 || iy >= g.h as isize {
                                continue;
                            }
                            for j in 0..g.kw {
                                let ix = (ox * g.stride + j) as isize - g.pad as isize;
                                if ix < 0 || ix >= g.w as isize {
                                    continue;
                                }
                                let p = iy as usize * g.w + ix as usize;
                                if let Some(dw) = dw.as_mut() {
                                    dw[c * g.kh * g.kw + i * g.kw + j] += gv * plane[p];
                                }
                                if let Some(dx) = dx.as_mut() {
                                    dx[(n * g.c + c) * g.h * g.w + p] += gv * k[i * g.kw + j];
                                }
                            }
                        }
                    }
                }
            }
        }
        return (dx, dw);
    }
    let rows = g.col_rows();
    let mut cols = vec![0.0f32; rows * hw];
    let mut dcols = vec![0.0f32; rows * hw];
    for n in 0..g.n {
        for grp in 0..g.groups {
            let go = &gout[(n * g.o + grp * g.og()) * hw..][..g.og() * hw];
            if let Some(dw) = dw.as_mut() {
                im2col(x, g, n, grp, &mut cols);
                let dwg = &mut dw[grp * g.og() * rows..][..g.og() * rows];
                // dW += dOut · colsᵀ
                gemm(g.og(), hw, rows, go, (hw, 1), &cols, (1, hw), 1.0, dwg);
            }
            if let Some(dx) = dx.as_mut() {
                let wg = &w[grp * g.og() * rows..][..g.og() * rows];
                // dcols = Wᵀ · dOut
                gemm(
                    rows,
                    g.og(),
                    hw,
                    wg,
                    (1, rows),
                    go,
                    (hw, 1),
                    0.0,
                    &mut dcols,
                );
                col2im(&dcols, g, n, grp, dx);
            }
        }
    }
    (dx, dw)
}

impl Tensor {
    /// 2-D cross-correlation.
    ///
    /// `self` is `N×C×H×W`, `weight` is `O×(C/groups)×kH×kW`, `bias` is `O`.
    /// Output side is `(H + 2·padding − kH)/stride + 1`.
    pub fn conv2d(
        &self,
        weight: &Tensor,
        bias: Option<&Tensor>,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Tensor> {
        let (xd, wd) = (self.dims(), weight.dims());
        if xd.len() != 4 || wd.len() != 4 {
            return Err(TensorError::shape(
                "conv2d",
                "input and weight must be rank 4",
            ));
        }
        let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        let (o, cg, kh, kw) = (wd[0], wd[1], wd[2], wd[3]);
        if stride == 0 || groups == 0 || c % groups != 0 || o % groups != 0 || cg != c / groups {
            return Err(TensorError::shape(
                "conv2d",
                format!(
                    "input {xd:?} weight {wd:?} groups {groups} stride {stride} are inconsistent"
                ),
            ));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(TensorError::shape(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {h}x{w} (pad {padding})"),
            ));
        }
        if let Some(b) = bias {
            if b.dims() != [o] {
                return Err(TensorError::shape(
                    "conv2d",
                    format!("bias {:?} != [{o}]", b.dims()),
                ));
            }
        }
        let geom = ConvGeom {
            n,
            c,
            h,
            w,
            o,
            kh,
            kw,
            stride,
            pad: padding,
            groups,
            ho: (h + 2 * padding - kh) / stride + 1,
            wo: (w + 2 * padding - kw) / stride + 1,
        };
        let mut out = conv_forward(self.data(), weight.data(), &geom);
        let hw = geom.spatial_out();
        if let Some(b) = bias {
            for (i, chunk) in out.chunks_mut(hw).enumerate() {
                let bv = b.data()[i % o];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
        }
        let mut inputs = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            inputs.push(b.clone());
        }
        Tensor::from_op(
            "conv2d",
            out,
            vec![n, o, geom.ho, geom.wo],
            inputs,
            Box::new(move |g, _, inputs| {
                let (dx, dw) = conv_backward(
                    inputs[0].data(),
                    inputs[1].data(),
                    g,
                    &geom,
                    inputs[0].requires_grad(),
                    inputs[1].requires_grad(),
                );
                let mut grads = vec![dx, dw];
                if let Some(b) = inputs.get(2) {
                    grads.push(b.requires_grad().then(|| {
                        let mut db = vec![0.0f32; geom.o];
                        for (i, chunk) in g.chunks(hw).enumerate() {
                            db[i % geom.o] += chunk.iter().sum::<f32>();
                        }
                        db
                    }));
                }
                grads
            }),
        )
    }

    /// Nearest-neighbour upsampling of `N×C×H×W` by an integer factor.
    pub fn upsample_nearest(&self, factor: usize) -> Result<Tensor> {
        let d = self.dims();
        if d.len() != 4 || factor == 0 {
            return Err(TensorError::shape(
                "upsample_nearest",
                "expects N×C×H×W and factor >= 1",
            ));
        }
        let (planes, h, w) = (d[0] * d[1], d[2], d[3]);
        let (ho, wo) = (h * factor, w * factor);
        let x = self.data();
        let mut out = vec![0.0f32; planes * ho * wo];
        for p in 0..planes {
            for y in 0..ho {
                for xo in 0..wo {
                    out[(p * ho + y) * wo + xo] = x[(p * h + y / factor) * w + xo / factor];
                }
            }
        }
        Tensor::from_op(
            "upsample_nearest",
            out,
            vec![d[0], d[1], ho, wo],
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0f32; planes * h * w];
                for p in 0..planes {
                    for y in 0..ho {
                        for xo in 0..wo {
                            gx[(p * h + y / factor) * w + xo / factor] += g[(p * ho + y) * wo + xo];
                        }
                    }
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Non-overlapping `k×k` average pooling (area downsampling).
    pub fn avg_pool(&self, k: usize) -> Result<Tensor> {
        let d = self.dims();
        if d.len() != 4 || k == 0 || !d[2].is_multiple_of(k) || !d[3].is_multiple_of(k) {
            return Err(TensorError::shape(
                "avg_pool",
                format!("{d:?} is not divisible into {k}x{k} cells"),
            ));
        }
        let (planes, h, w) = (d[0] * d[1], d[2], d[3]);
        let (ho, wo) = (h / k, w / k);
        let inv = 1.0 / (k * k) as f32;
        let x = self.data();
        let mut out = vec![0.0f32; planes * ho * wo];
        for p in 0..planes {
            for y in 0..h {
                for xi in 0..w {
                    out[(p * ho + y / k) * wo + xi / k] += x[(p * h + y) * w + xi];
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        Tensor::from_op(
            "avg_pool",
            out,
            vec![d[0], d[1], ho, wo],
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![0.0f32; planes * h * w];
                for p in 0..planes {
                    for y in 0..h {
                        for xi in 0..w {
                            gx[(p * h + y) * w + xi] = g[(p * ho + y / k) * wo + xi / k] * inv;
                        }
                    }
                }
                vec![Some(gx)]
            }),
        )
    }
}
