//! Pixel-domain types and the operations on them: PNG I/O, RGB/HSV
//! conversion, Canny edges, irregular hole masks and compositing.

mod canny;
mod color;
mod io;
mod masks;

pub use canny::{canny, CannyParams};
pub use color::{hsv_pixel_to_rgb, hsv_to_rgb, rgb_pixel_to_hsv, rgb_to_hsv};
pub use io::{load_edge_map, load_image, load_mask, save_edge_map, save_image, save_mask};
pub use masks::{gen_irregular_mask, Bucket};

use stripepaint_tensor::Tensor;

use crate::error::{Error, Result};

/// An RGB image with components in `[0, 1]`, stored row-major and
/// interleaved (`[r, g, b, r, g, b, ...]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * 3 {
            return Err(Error::Size(format!(
                "{} values for a {height}x{width} RGB image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Param(format!("pixel component {v} outside [0, 1]")));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    /// Builds an image pixel by pixel; components are clamped into `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(y, x).map(|c| c.clamp(0.0, 1.0)));
            }
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Rec. 601 luma.
    pub fn luma(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.height, self.width, |y, x| {
            self.pixel(y, self.width - 1 - x)
        })
        .expect("dimensions already valid")
    }

    /// `1×3×H×W` planar tensor.
    pub fn to_tensor(&self) -> Tensor {
        stack_images(std::slice::from_ref(self)).expect("single image stacks")
    }

    /// Reads sample `index` of an `N×3×H×W` tensor, clamping into `[0, 1]`.
    pub fn from_tensor(t: &Tensor, index: usize) -> Result<Image> {
        let d = t.dims();
        if d.len() != 4 || d[1] != 3 || index >= d[0] {
            return Err(Error::Size(format!(
                "cannot read image {index} from tensor {d:?}"
            )));
        }
        let (h, w) = (d[2], d[3]);
        let plane = h * w;
        let src = &t.data()[index * 3 * plane..(index + 1) * 3 * plane];
        Image::from_fn(h, w, |y, x| {
            let i = y * w + x;
            [src[i], src[plane + i], src[2 * plane + i]]
        })
    }

    fn same_size<T: Sized2d>(&self, other: &T, op: &str) -> Result<()> {
        if (self.height, self.width) != other.size() {
            return Err(Error::Size(format!(
                "{op}: {}x{} vs {}x{}",
                self.height,
                self.width,
                other.size().0,
                other.size().1
            )));
        }
        Ok(())
    }
}

trait Sized2d {
    fn size(&self) -> (usize, usize);
}

impl Sized2d for Image {
    fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl Sized2d for Mask {
    fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Size(format!("empty image {height}x{width}")));
    }
    Ok(())
}

/// Stacks images into an `N×3×H×W` tensor.
pub fn stack_images(images: &[Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Size("no images to stack".into()))?;
    let (h, w) = (first.height, first.width);
    let plane = h * w;
    let mut data = vec![0.0f32; images.len() * 3 * plane];
    for (n, img) in images.iter().enumerate() {
        first.same_size(img, "stack_images")?;
        let out = &mut data[n * 3 * plane..(n + 1) * 3 * plane];
        for (i, p) in img.data.chunks_exact(3).enumerate() {
            out[i] = p[0];
            out[plane + i] = p[1];
            out[2 * plane + i] = p[2];
        }
    }
    Ok(Tensor::from_vec(data, &[images.len(), 3, h, w])?)
}

/// Binary hole mask: 1 marks a missing pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::Size(format!(
                "{} values for a {height}x{width} mask",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Param("mask values must be 0 or 1".into()));
        }
        Ok(Mask {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![1; height * width])
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_dims(height, width)?;
        let data = (0..height * width)
            .map(|i| u8::from(f(i / width, i % width)))
            .collect();
        Ok(Mask {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_hole(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn hole_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn hole_fraction(&self) -> f64 {
        self.hole_count() as f64 / self.data.len() as f64
    }

    pub fn to_tensor(&self) -> Tensor {
        stack_masks(std::slice::from_ref(self)).expect("single mask stacks")
    }
}

/// Stacks masks into an `N×1×H×W` tensor of zeros and ones.
pub fn stack_masks(masks: &[Mask]) -> Result<Tensor> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Size("no masks to stack".into()))?;
    let mut data = Vec::with_capacity(masks.len() * first.data.len());
    for m in masks {
        if (m.height, m.width) != (first.height, first.width) {
            return Err(Error::Size("masks differ in size".into()));
        }
        data.extend(m.data.iter().map(|&v| f32::from(v)));
    }
    Ok(Tensor::from_vec(
        data,
        &[masks.len(), 1, first.height, first.width],
    )?)
}

/// Binary edge map: 1 marks an edge pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl EdgeMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::Size(format!(
                "{} values for a {height}x{width} edge map",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Param("edge map values must be 0 or 1".into()));
        }
        Ok(EdgeMap {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_edge(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// Per-pixel loss weight: 10 on edge pixels, 1 elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

pub const EDGE_WEIGHT: f32 = 10.0;

/// `M_edge = (1 − I_edge) + 10·I_edge`.
pub fn make_edge_mask(edge: &EdgeMap) -> EdgeMask {
    let data = edge
        .data
        .iter()
        .map(|&e| {
            let e = f32::from(e);
            (1.0 - e) + EDGE_WEIGHT * e
        })
        .collect();
    EdgeMask {
        height: edge.height,
        width: edge.width,
        data,
    }
}

impl EdgeMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn uniform(height: usize, width: usize) -> Result<Self> {
        check_dims(height, width)?;
        Ok(EdgeMask {
            height,
            width,
            data: vec![1.0; height * width],
        })
    }
}

/// Stacks edge masks into an `N×1×H×W` tensor.
pub fn stack_edge_masks(masks: &[EdgeMask]) -> Result<Tensor> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Size("no edge masks to stack".into()))?;
    let mut data = Vec::with_capacity(masks.len() * first.data.len());
    for m in masks {
        if (m.height, m.width) != (first.height, first.width) {
            return Err(Error::Size("edge masks differ in size".into()));
        }
        data.extend_from_slice(&m.data);
    }
    Ok(Tensor::from_vec(
        data,
        &[masks.len(), 1, first.height, first.width],
    )?)
}

/// Hue, saturation and value per pixel, interleaved. Hue is normalised
/// to `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsvImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl HsvImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * 3 {
            return Err(Error::Size(format!(
                "{} values for a {height}x{width} HSV image",
                data.len()
            )));
        }
        for p in data.chunks_exact(3) {
            if !(0.0..1.0).contains(&p[0])
                || !(0.0..=1.0).contains(&p[1])
                || !(0.0..=1.0).contains(&p[2])
            {
                return Err(Error::Param(format!("HSV triple {p:?} out of range")));
            }
        }
        Ok(HsvImage {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// `I_m`: hole pixels set to black, known pixels untouched.
pub fn apply_mask(img: &Image, m: &Mask) -> Result<Image> {
    img.same_size(m, "apply_mask")?;
    let mut data = img.data.clone();
    for (p, &hole) in data.chunks_exact_mut(3).zip(&m.data) {
        if hole == 1 {
            p.fill(0.0);
        }
    }
    Ok(Image {
        data,
        ..img.clone()
    })
}

/// `out ⊙ M + input ⊙ (1 − M)`, clamped to `[0, 1]`. Known pixels are copied
/// from `input` unchanged.
pub fn composite(out: &Image, input: &Image, m: &Mask) -> Result<Image> {
    out.same_size(input, "composite")?;
    out.same_size(m, "composite")?;
    let mut data = input.data.clone();
    for (i, &hole) in m.data.iter().enumerate() {
        if hole == 1 {
            for c in 0..3 {
                data[i * 3 + c] = out.data[i * 3 + c].clamp(0.0, 1.0);
            }
        }
    }
    Ok(Image {
        data,
        ..input.clone()
    })
}
