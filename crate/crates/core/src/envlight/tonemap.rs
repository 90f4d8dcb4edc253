use crate::error::{Error, Result};
use crate::raster::Image;

pub const GAMMA: f64 = 2.2;

fn check_exposure(exposure: f64) -> Result<()> {
    if exposure > 0.0 && exposure.is_finite() {
        Ok(())
    } else {
        Err(Error::precondition(format!(
            "exposure must be positive, got {exposure}"
        )))
    }
}

/// `clamp((exposure · hdr)^(1/2.2), 0, 1)`.
pub fn tonemap_ldr(hdr: &Image, exposure: f64) -> Result<Image> {
    check_exposure(exposure)?;
    Ok(hdr.map(|v| ((exposure * v.max(0.0) as f64).powf(1.0 / GAMMA)).clamp(0.0, 1.0) as f32))
}

/// `ldr^2.2 / exposure`; the inverse of [`tonemap_ldr`] below the clip.
pub fn inverse_tonemap(ldr: &Image, exposure: f64) -> Result<Image> {
    check_exposure(exposure)?;
    Ok(ldr.map(|v| ((v.clamp(0.0, 1.0) as f64).powf(GAMMA) / exposure) as f32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_clip() {
        let img = Image::from_vec(2, 1, 1, vec![0.0, 1e6]).unwrap();
        let ldr = tonemap_ldr(&img, 1.0).unwrap();
        assert_eq!(ldr.data(), &[0.0, 1.0]);
        assert!(tonemap_ldr(&img, 0.0).is_err());
    }

    #[test]
    fn inverse_round_trips_unclipped_values() {
        let data: Vec<f32> = (0..1000).map(|i| (i as f32 / 1000.0).powi(2) * 0.45).collect();
        let img = Image::from_vec(1000, 1, 1, data).unwrap();
        let back = inverse_tonemap(&tonemap_ldr(&img, 2.0).unwrap(), 2.0).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
