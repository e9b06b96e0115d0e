//! Free-form hole masks built from thick random-walk strokes.

use std::fmt;
use std::str::FromStr;

use stripepaint_tensor::Rng;

use super::Mask;
use crate::error::{Error, Result};

/// Half-open hole-fraction interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bucket {
    lo: f64,
    hi: f64,
}

impl Bucket {
    /// The six evaluation bands, 5–10% up to 50–60%.
    pub const BANDS: [Bucket; 6] = [
        Bucket { lo: 0.05, hi: 0.10 },
        Bucket { lo: 0.10, hi: 0.20 },
        Bucket { lo: 0.20, hi: 0.30 },
        Bucket { lo: 0.30, hi: 0.40 },
        Bucket { lo: 0.40, hi: 0.50 },
        Bucket { lo: 0.50, hi: 0.60 },
    ];

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::Param(format!(
                "bucket [{lo}, {hi}) must satisfy 0 < lo < hi < 1"
            )));
        }
        Ok(Bucket { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, fraction: f64) -> bool {
        fraction >= self.lo && fraction < self.hi
    }

    /// Index of the evaluation band holding `fraction`, if any.
    pub fn band_of(fraction: f64) -> Option<usize> {
        Self::BANDS.iter().position(|b| b.contains(fraction))
    }

    /// Label such as `30%-40%`.
    pub fn label(&self) -> String {
        format!(
            "{}%-{}%",
            (self.lo * 100.0).round(),
            (self.hi * 100.0).round()
        )
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for Bucket {
    type Err = Error;

    /// Parses `LO-HI` as fractions (`0.2-0.3`).
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once('-')
            .ok_or_else(|| Error::Param(format!("bucket `{s}` is not of the form LO-HI")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Param(format!("bad bucket bound `{v}`")))
        };
        Bucket::new(parse(lo)?, parse(hi)?)
    }
}

const MAX_ATTEMPTS: usize = 64;
const MAX_STROKES: usize = 400;
const MAX_REJECTS: usize = 64;

/// Generates a mask whose hole fraction lies in `bucket`.
///
/// Strokes are random walks of 4–12 vertices with a thickness between 2% and
/// 10% of the shorter side. A stroke that would push the fraction to `hi` or
/// beyond is discarded; after too many discards the mask restarts empty.
/// The result depends only on `(h, w, bucket, seed)`.
pub fn gen_irregular_mask(h: usize, w: usize, bucket: Bucket, seed: u64) -> Result<Mask> {
    if h == 0 || w == 0 {
        return Err(Error::Size(format!("empty mask {h}x{w}")));
    }
    let total = h * w;
    // Counts that land in the bucket.
    let lo_count = (bucket.lo * total as f64).ceil() as usize;
    let hi_count = (bucket.hi * total as f64).ceil() as usize;
    if lo_count >= hi_count || lo_count == 0 {
        return Err(Error::Generation(format!(
            "bucket {bucket} holds no pixel count on a {h}x{w} grid"
        )));
    }
    let mut rng = Rng::new(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut holes = vec![0u8; total];
        let mut count = 0usize;
        let mut rejects = 0usize;
        for _ in 0..MAX_STROKES {
            let stroke = random_stroke(&mut rng, h, w);
            let added = stroke.iter().filter(|&&i| holes[i] == 0).count();
            if count + added >= hi_count {
                rejects += 1;
                if rejects > MAX_REJECTS {
                    break;
                }
                continue;
            }
            for i in stroke {
                holes[i] = 1;
            }
            count += added;
            if count >= lo_count {
                let mask = Mask::new(h, w, holes)?;
                debug_assert!(bucket.contains(mask.hole_fraction()));
                return Ok(mask);
            }
        }
    }
    Err(Error::Generation(format!(
        "could not reach bucket {bucket} on a {h}x{w} grid after {MAX_ATTEMPTS} attempts"
    )))
}

/// Pixel indices covered by one thick polyline stroke.
fn random_stroke(rng: &mut Rng, h: usize, w: usize) -> Vec<usize> {
    let side = h.min(w) as f32;
    let vertices = rng.range_inclusive(4, 12);
    let thickness = (rng.uniform_range(0.02, 0.10) * side).max(1.0);
    let radius = thickness / 2.0;
    let max_step = (0.25 * side).max(2.0);

    let mut points = Vec::with_capacity(vertices);
    let mut p = (rng.uniform() * h as f32, rng.uniform() * w as f32);
    points.push(p);
    for _ in 1..vertices {
        let angle = rng.uniform() * std::f32::consts::TAU;
        let len = rng.uniform_range(0.2, 1.0) * max_step;
        p = (
            (p.0 + angle.sin() * len).clamp(0.0, h as f32 - 1.0),
            (p.1 + angle.cos() * len).clamp(0.0, w as f32 - 1.0),
        );
        points.push(p);
    }

    let mut covered = vec![false; h * w];
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let y0 = (a.0.min(b.0) - radius).floor().max(0.0) as usize;
        let y1 = ((a.0.max(b.0) + radius).ceil() as usize).min(h - 1);
        let x0 = (a.1.min(b.1) - radius).floor().max(0.0) as usize;
        let x1 = ((a.1.max(b.1) + radius).ceil() as usize).min(w - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_distance((y as f32, x as f32), a, b) <= radius {
                    covered[y * w + x] = true;
                }
            }
        }
    }
    covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(i, _)| i)
        .collect()
}

fn segment_distance(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (dy, dx) = (b.0 - a.0, b.1 - a.1);
    let len2 = dy * dy + dx * dx;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dy + (p.1 - a.1) * dx) / len2).clamp(0.0, 1.0)
    };
    let (qy, qx) = (a.0 + t * dy, a.1 + t * dx);
    ((p.0 - qy).powi(2) + (p.1 - qx).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lands_in_bucket() {
        let b = Bucket::new(0.2, 0.3).unwrap();
        for seed in 0..20 {
            let m = gen_irregular_mask(64, 64, b, seed).unwrap();
            assert!(
                b.contains(m.hole_fraction()),
                "seed {seed}: {}",
                m.hole_fraction()
            );
        }
    }

    #[test]
    fn deterministic() {
        let b = Bucket::BANDS[3];
        assert_eq!(
            gen_irregular_mask(48, 40, b, 7).unwrap(),
            gen_irregular_mask(48, 40, b, 7).unwrap()
        );
        assert_ne!(
            gen_irregular_mask(48, 40, b, 7).unwrap(),
            gen_irregular_mask(48, 40, b, 8).unwrap()
        );
    }

    #[test]
    fn every_band_reachable_at_desk_size() {
        for (i, b) in Bucket::BANDS.iter().enumerate() {
            let m = gen_irregular_mask(64, 64, *b, i as u64).unwrap();
            assert!(b.contains(m.hole_fraction()));
        }
    }

    #[test]
    fn unreachable_bucket_is_an_error() {
        // A 2x2 grid has fractions 0, .25, .5, ...; nothing lies in [0.3, 0.4).
        let b = Bucket::new(0.3, 0.4).unwrap();
        assert!(matches!(
            gen_irregular_mask(2, 2, b, 0),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn band_lookup_and_labels() {
        assert_eq!(Bucket::band_of(0.37), Some(3));
        assert_eq!(Bucket::BANDS[3].label(), "30%-40%");
        assert_eq!(Bucket::band_of(0.05), Some(0));
        assert_eq!(Bucket::band_of(0.6), None);
        assert_eq!(
            "0.2-0.3".parse::<Bucket>().unwrap(),
            Bucket::new(0.2, 0.3).unwrap()
        );
        assert!("0.3-0.2".parse::<Bucket>().is_err());
        assert!("abc".parse::<Bucket>().is_err());
    }
}
