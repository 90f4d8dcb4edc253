use crate::error::{Error, Result};
use crate::raster::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the perceptual term. The term itself needs a pretrained
    /// feature network and is reported as zero.
    pub lambda_lpips: f64,
    pub lambda_edge: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_lpips: 1.0,
            lambda_edge: 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelightLosses {
    /// Mean per-pixel L2 norm of the RGB difference.
    pub color: f64,
    /// Mean per-pixel L2 norm of the difference of stacked Sobel gradients.
    pub edge: f64,
    /// Always 0; kept so the weight slot is visible in reports.
    pub lpips: f64,
    pub total: f64,
}

/// Sobel-Feldman gradients with edge-replicated borders. The output has
/// `2 · C` channels: all horizontal responses, then all vertical ones.
pub fn sobel(img: &Image) -> Image {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = Image::new(w, h, 2 * c);
    let at = |x: i64, y: i64, ch: usize| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        img.get(x, y, ch) as f64
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            for ch in 0..c {
                let gx = (at(x + 1, y - 1, ch) + 2.0 * at(x + 1, y, ch) + at(x + 1, y + 1, ch))
                    - (at(x - 1, y - 1, ch) + 2.0 * at(x - 1, y, ch) + at(x - 1, y + 1, ch));
                let gy = (at(x - 1, y + 1, ch) + 2.0 * at(x, y + 1, ch) + at(x + 1, y + 1, ch))
                    - (at(x - 1, y - 1, ch) + 2.0 * at(x, y - 1, ch) + at(x + 1, y - 1, ch));
                out.set(x as usize, y as usize, ch, gx as f32);
                out.set(x as usize, y as usize, c + ch, gy as f32);
            }
        }
    }
    out
}

fn mean_pixel_norm(a: &Image, b: &Image) -> f64 {
    let c = a.channels();
    let n = a.pixel_count();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = a
        .data()
        .chunks_exact(c)
        .zip(b.data().chunks_exact(c))
        .map(|(p, q)| {
            p.iter()
                .zip(q)
                .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    sum / n as f64
}

/// Color and edge losses between two linear RGB frames.
pub fn relight_losses(pred: &Image, target: &Image, weights: &LossWeights) -> Result<RelightLosses> {
    if !pred.same_shape(target) {
        return Err(Error::precondition(format!(
            "prediction is {}x{}x{}, target is {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            target.width(),
            target.height(),
            target.channels()
        )));
    }
    if !(weights.lambda_edge >= 0.0 && weights.lambda_lpips >= 0.0) {
        return Err(Error::precondition("loss weights must be >= 0"));
    }
    let color = mean_pixel_norm(pred, target);
    let edge = mean_pixel_norm(&sobel(pred), &sobel(target));
    let lpips = 0.0;
    Ok(RelightLosses {
        color,
        edge,
        lpips,
        total: color + weights.lambda_edge * edge + weights.lambda_lpips * lpips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(w: usize, h: usize, at: usize) -> Image {
        let mut img = Image::new(w, h, 3);
        for y in 0..h {
            for x in at..w {
                img.pixel_mut(x, y).copy_from_slice(&[1.0; 3]);
            }
        }
        img
    }

    #[test]
    fn identical_images_have_zero_loss() {
        let a = step(9, 7, 4);
        let l = relight_losses(&a, &a, &LossWeights::default()).unwrap();
        assert_eq!((l.color, l.edge, l.lpips, l.total), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset_is_pure_color_loss() {
        let a = Image::filled(6, 5, 3, 0.25);
        let b = Image::filled(6, 5, 3, 0.75);
        let l = relight_losses(&a, &b, &LossWeights::default()).unwrap();
        assert!((l.color - 0.5 * 3f64.sqrt()).abs() < 1e-6);
        assert_eq!(l.edge, 0.0);
    }

    #[test]
    fn step_edge_matches_direct_convolution() {
        let (w, h) = (10, 6);
        let a = step(w, h, 5);
        let b = Image::new(w, h, 3);
        // Columns 4 and 5 see a horizontal response of 4 per channel.
        let closed = 2.0 * h as f64 * (3.0 * 16f64).sqrt() / (w * h) as f64;
        let l = relight_losses(&a, &b, &LossWeights::default()).unwrap();
        assert!((l.edge - closed).abs() < 1e-6, "{} vs {closed}", l.edge);
        assert!((l.total - (l.color + 400.0 * l.edge)).abs() < 1e-9);

        // Direct 3x3 convolution with clamped borders.
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let g = sobel(&a);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, row) in kx.iter().enumerate() {
                    for (i, k) in row.iter().enumerate() {
                        let xx = (x as i64 + i as i64 - 1).clamp(0, w as i64 - 1) as usize;
                        let yy = (y as i64 + j as i64 - 1).clamp(0, h as i64 - 1) as usize;
                        acc += k * a.get(xx, yy, 0) as f64;
                    }
                }
                assert_eq!(g.get(x, y, 0) as f64, acc);
                assert_eq!(g.get(x, y, 3), 0.0);
            }
        }
    }

    #[test]
    fn defaults_and_shape_checks() {
        let w = LossWeights::default();
        assert_eq!((w.lambda_lpips, w.lambda_edge), (1.0, 400.0));
        assert!(relight_losses(&Image::new(2, 2, 3), &Image::new(3, 2, 3), &w).is_err());
    }
}
