use serde::{Deserialize, Serialize};

use super::MotionFeature;
use crate::error::{Error, Result};

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, pixels: vec![value; width * height] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.pixels.len() != self.width * self.height {
            return Err(Error::Input(format!(
                "frame declares {}x{} but carries {} pixels",
                self.width,
                self.height,
                self.pixels.len()
            )));
        }
        Ok(())
    }
}

const POOL: usize = 4;
const MAX_PIXEL: f64 = 255.0;

/// Frame-difference descriptor of dimension `d` (even).
///
/// Absolute pixel differences are mean-pooled over 4x4 blocks; edge blocks
/// average only the pixels they cover. The first `d/2` entries are the share
/// of blocks whose pooled magnitude falls in each of `d/2` equal-width bins
/// over `(0, 255]` (still blocks count in no bin). The last `d/2` entries are
/// the mean pooled magnitude over `d/2` contiguous runs of the row-major
/// pooled map.
pub fn motion_feature(frame: &Frame, prev: &Frame, d: usize) -> Result<MotionFeature> {
    frame.validate()?;
    prev.validate()?;
    if frame.width != prev.width || frame.height != prev.height {
        return Err(Error::Input(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            frame.width, frame.height, prev.width, prev.height
        )));
    }
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::Input(format!("feature dimension must be even and at least 2, got {d}")));
    }
    let half = d / 2;
    let (pw, ph) = (frame.width.div_ceil(POOL), frame.height.div_ceil(POOL));
    let mut pooled = Vec::with_capacity(pw * ph);
    for by in 0..ph {
        for bx in 0..pw {
            let mut sum = 0.0;
            let mut count = 0usize;
            for y in by * POOL..((by + 1) * POOL).min(frame.height) {
                for x in bx * POOL..((bx + 1) * POOL).min(frame.width) {
                    let i = y * frame.width + x;
                    sum += (frame.pixels[i] as f64 - prev.pixels[i] as f64).abs();
                    count += 1;
                }
            }
            pooled.push(sum / count as f64);
        }
    }
    if pooled.len() < half {
        return Err(Error::Input(format!(
            "{}x{} frames pool to {} blocks, fewer than the {half} region means requested",
            frame.width,
            frame.height,
            pooled.len()
        )));
    }

    let mut out = vec![0.0; d];
    let width = MAX_PIXEL / half as f64;
    for &v in &pooled {
        if v > 0.0 {
            let bin = ((v / width).ceil() as usize).clamp(1, half) - 1;
            out[bin] += 1.0;
        }
    }
    let n = pooled.len();
    for o in out.iter_mut().take(half) {
        *o /= n as f64;
    }
    for c in 0..half {
        let (lo, hi) = (c * n / half, (c + 1) * n / half);
        out[half + c] = pooled[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    }
    Ok(MotionFeature(out))
}

/// Arithmetic mean of one to three features.
pub fn smooth_features(history: &[MotionFeature]) -> Result<MotionFeature> {
    let first = history.first().ok_or_else(|| Error::Input("no motion features to smooth".into()))?;
    if history.len() > 3 {
        return Err(Error::Input(format!("smoothing window holds at most 3 features, got {}", history.len())));
    }
    if history.iter().any(|f| f.dim() != first.dim()) {
        return Err(Error::Input("motion features to smooth differ in dimension".into()));
    }
    let n = history.len() as f64;
    Ok(MotionFeature((0..first.dim()).map(|j| history.iter().map(|f| f.0[j]).sum::<f64>() / n).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(w: usize, h: usize, invert: bool) -> Frame {
        let pixels = (0..w * h).map(|i| if ((i % w) + (i / w) + invert as usize) % 2 == 0 { 200 } else { 10 }).collect();
        Frame { width: w, height: h, pixels }
    }

    #[test]
    fn identical_frames_give_zero() {
        let f = checkerboard(16, 16, false);
        assert_eq!(motion_feature(&f, &f, 16).unwrap(), MotionFeature::zeros(16));
    }

    #[test]
    fn uniform_change_gives_equal_region_means() {
        let f = motion_feature(&Frame::filled(32, 32, 90), &Frame::filled(32, 32, 0), 16).unwrap();
        assert!(f.0[8..].iter().all(|v| *v == 90.0));
        // Every block lands in the bin covering 90: (63.75, 95.625] is bin 2 of 8.
        assert_eq!(f.0[2], 1.0);
        assert_eq!(f.0[..8].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn difference_is_order_symmetric() {
        let a = checkerboard(20, 12, false);
        let b = checkerboard(20, 12, true);
        assert_eq!(motion_feature(&a, &b, 8).unwrap(), motion_feature(&b, &a, 8).unwrap());
    }

    #[test]
    fn partial_blocks_average_their_own_pixels() {
        // 5 wide: second column of blocks covers one pixel per row.
        let prev = Frame::filled(5, 4, 0);
        let mut cur = Frame::filled(5, 4, 0);
        for y in 0..4 {
            cur.pixels[y * 5 + 4] = 40;
        }
        let f = motion_feature(&cur, &prev, 4).unwrap();
        assert_eq!(f.0[2..], [0.0, 40.0]);
    }

    #[test]
    fn input_errors() {
        let a = Frame::filled(8, 8, 0);
        assert!(matches!(motion_feature(&a, &Frame::filled(8, 4, 0), 4), Err(Error::Input(_))));
        assert!(matches!(motion_feature(&a, &a, 16), Err(Error::Input(_))));
        assert!(matches!(motion_feature(&a, &a, 3), Err(Error::Input(_))));
    }

    #[test]
    fn smoothing_examples() {
        let f = MotionFeature(vec![1.0, 2.0]);
        assert_eq!(smooth_features(&[f.clone(), f.clone(), f.clone()]).unwrap(), f);
        let z = MotionFeature(vec![0.0; 2]);
        assert_eq!(smooth_features(&[z.clone(), z, MotionFeature(vec![3.0; 2])]).unwrap(), MotionFeature(vec![1.0; 2]));
        assert_eq!(smooth_features(&[f.clone()]).unwrap(), f);
        assert!(smooth_features(&[]).is_err());
    }
}
