use super::{EnvMap, SkyParams};
use crate::error::{Error, Result};

/// Sky-estimator losses: sun direction error in degrees, log-space peak
/// intensity error, and mean squared log-space reconstruction error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyLosses {
    pub angular: f64,
    pub peak: f64,
    pub recon: f64,
}

pub fn sky_losses(pred_env: &EnvMap, pred: &SkyParams, target_env: &EnvMap, target: &SkyParams) -> Result<SkyLosses> {
    if pred_env.image().dims() != target_env.image().dims() {
        return Err(Error::precondition(format!(
            "sky maps differ in size: {:?} vs {:?}",
            pred_env.image().dims(),
            target_env.image().dims()
        )));
    }
    let angular = pred.f_dir.dot(target.f_dir).clamp(-1.0, 1.0).acos().to_degrees();
    let peak = (pred.f_int.ln_1p() - target.f_int.ln_1p()).abs();
    let a = pred_env.image().data();
    let b = target_env.image().data();
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&p, &t)| {
            let d = (p as f64).ln_1p() - (t as f64).ln_1p();
            d * d
        })
        .sum();
    Ok(SkyLosses {
        angular,
        peak,
        recon: sum / a.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use glam::DVec3;

    #[test]
    fn closed_form_values() {
        let p = SkyParams::new([0.0; 64], 3.0, DVec3::Z).unwrap();
        let q = SkyParams::new([0.0; 64], 3.0, -DVec3::Z).unwrap();
        let one = EnvMap::uniform(8, DVec3::ONE).unwrap();
        let two = EnvMap::uniform(8, DVec3::splat(2.0)).unwrap();

        let same = sky_losses(&one, &p, &one, &p).unwrap();
        assert_eq!((same.angular, same.peak, same.recon), (0.0, 0.0, 0.0));

        let opposite = sky_losses(&one, &p, &one, &q).unwrap();
        assert!((opposite.angular - 180.0).abs() < 1e-9);

        let l = sky_losses(&two, &p, &one, &p).unwrap();
        let expect = (3.0f64.ln() - 2.0f64.ln()).powi(2);
        assert!((l.recon - expect).abs() < 1e-6);
        assert!((expect - 0.1644).abs() < 1e-4);
    }
}
