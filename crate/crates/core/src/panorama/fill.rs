use crate::error::{Error, Result};
use crate::raster::Image;

use super::Panorama;

/// Convergence threshold on the largest per-sweep change.
pub const FILL_TOLERANCE: f64 = 1e-4;

/// Safety cap on sweeps per pyramid level when running to convergence.
const MAX_SWEEPS: usize = 20_000;

/// Fills unobserved texels by Laplacian diffusion: each one becomes the mean
/// of its four neighbors (azimuth wraps, the top and bottom rows clamp to
/// themselves) while observed texels stay fixed.
///
/// Holes start from a coarse-to-fine pyramid of observed averages, solved to
/// convergence at every coarse level. `iterations` sets the number of
/// Gauss-Seidel sweeps at full resolution; `None` sweeps until the largest
/// change drops below [`FILL_TOLERANCE`].
pub fn fill_holes(pano: &Panorama, iterations: Option<usize>) -> Result<Image> {
    let (w, h) = (pano.width(), pano.height());
    if pano.observed() == 0 {
        return Err(Error::precondition("panorama has no observed texels to fill from"));
    }
    let c = pano.image.channels();
    let mut out = pano.image.clone();
    for ch in 0..c {
        let mut values: Vec<f64> = (0..w * h).map(|i| pano.image.data()[i * c + ch] as f64).collect();
        solve(&mut values, &pano.mask, w, h, iterations);
        for (i, v) in values.into_iter().enumerate() {
            out.data_mut()[i * c + ch] = v as f32;
        }
    }
    Ok(out)
}

fn solve(values: &mut [f64], known: &[bool], w: usize, h: usize, sweeps: Option<usize>) {
    if known.iter().all(|k| *k) {
        return;
    }
    if w <= 2 || h <= 1 {
        let (sum, n) = values
            .iter()
            .zip(known)
            .filter(|(_, k)| **k)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        let mean = sum / n as f64;
        for (v, k) in values.iter_mut().zip(known) {
            if !k {
                *v = mean;
            }
        }
    } else {
        // Coarse level: each texel averages its observed children.
        let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
        let mut coarse = vec![0.0; cw * ch];
        let mut coarse_known = vec![false; cw * ch];
        for y in 0..h {
            for x in 0..w {
                if known[y * w + x] {
                    coarse[(y / 2) * cw + x / 2] += values[y * w + x];
                }
            }
        }
        for cy in 0..ch {
            for cx in 0..cw {
                let n = (0..4)
                    .filter(|k| {
                        let (x, y) = (2 * cx + k % 2, 2 * cy + k / 2);
                        x < w && y < h && known[y * w + x]
                    })
                    .count();
                if n > 0 {
                    coarse[cy * cw + cx] /= n as f64;
                    coarse_known[cy * cw + cx] = true;
                }
            }
        }
        solve(&mut coarse, &coarse_known, cw, ch, None);
        for y in 0..h {
            for x in 0..w {
                if !known[y * w + x] {
                    values[y * w + x] = coarse[(y / 2) * cw + x / 2];
                }
            }
        }
    }
    let unknown: Vec<usize> = (0..w * h).filter(|&i| !known[i]).collect();
    let limit = sweeps.unwrap_or(MAX_SWEEPS);
    for _ in 0..limit {
        let mut max_change: f64 = 0.0;
        for &i in &unknown {
            let (x, y) = (i % w, i / w);
            let left = y * w + (x + w - 1) % w;
            let right = y * w + (x + 1) % w;
            let up = y.saturating_sub(1) * w + x;
            let down = (y + 1).min(h - 1) * w + x;
            let v = 0.25 * (values[left] + values[right] + values[up] + values[down]);
            max_change = max_change.max((v - values[i]).abs());
            values[i] = v;
        }
        if sweeps.is_none() && max_change < FILL_TOLERANCE {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pano(w: usize, h: usize, f: impl Fn(usize, usize) -> Option<f32>) -> Panorama {
        let mut image = Image::new(w, h, 3);
        let mut mask = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some(v) = f(x, y) {
                    image.pixel_mut(x, y).copy_from_slice(&[v, 0.5 * v, 1.0 - v]);
                    mask[y * w + x] = true;
                }
            }
        }
        let counts = mask.iter().map(|&m| m as u32).collect();
        Panorama { image, mask, counts }
    }

    #[test]
    fn fully_observed_is_unchanged() {
        let p = pano(16, 8, |x, y| Some(((x * 7 + y * 3) % 11) as f32 / 11.0));
        assert_eq!(fill_holes(&p, None).unwrap(), p.image);
    }

    #[test]
    fn constant_border_fills_with_the_constant() {
        let p = pano(32, 16, |x, y| {
            (!(8..24).contains(&x) || !(4..12).contains(&y)).then_some(0.375)
        });
        let out = fill_holes(&p, None).unwrap();
        for v in out.data().chunks(3) {
            assert!((v[0] - 0.375).abs() < 1e-5 && (v[2] - 0.625).abs() < 1e-5);
        }
    }

    #[test]
    fn masked_band_fills_linearly() {
        let (w, h) = (128, 64);
        let g = |x: usize| x as f32 / w as f32;
        let p = pano(w, h, |x, _| (!(40..80).contains(&x)).then(|| g(x)));
        let out = fill_holes(&p, None).unwrap();
        let (a, b) = (g(39) as f64, g(80) as f64);
        for y in 0..h {
            for x in 40..80 {
                let t = (x - 39) as f64 / 41.0;
                let expect = a + t * (b - a);
                let got = out.pixel(x, y)[0] as f64;
                assert!((got - expect).abs() <= 0.02 * expect, "({x},{y}) {got} vs {expect}");
            }
        }
    }

    #[test]
    fn output_respects_the_maximum_principle() {
        let p = pano(64, 32, |x, y| {
            let k = (x * 31 + y * 17) % 13;
            (k < 3).then_some(0.2 + 0.05 * k as f32 + 0.01 * (y % 4) as f32)
        });
        let lo = p
            .image
            .data()
            .chunks(3)
            .zip(&p.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v[0])
            .fold(f32::MAX, f32::min);
        let hi = p
            .image
            .data()
            .chunks(3)
            .zip(&p.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v[0])
            .fold(f32::MIN, f32::max);
        for iters in [None, Some(0), Some(3)] {
            let out = fill_holes(&p, iters).unwrap();
            for v in out.data().chunks(3) {
                assert!(v[0] >= lo && v[0] <= hi);
            }
        }
    }

    #[test]
    fn empty_panorama_is_rejected() {
        assert!(fill_holes(&pano(8, 4, |_, _| None), None).is_err());
    }
}
