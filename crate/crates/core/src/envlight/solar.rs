//! Solar position from the NOAA general solar position equations (Meeus'
//! low-precision series), with NOAA's atmospheric refraction correction.
//! Accurate to about 0.01° in elevation between 1950 and 2100.

use glam::DVec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTime {
    /// Degrees, north positive.
    pub latitude: f64,
    /// Degrees, east positive.
    pub longitude: f64,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
}

/// 1950-01-01T00:00:00Z
const MIN_TIMESTAMP: i64 = -631_152_000;
/// 2100-12-31T23:59:59Z
const MAX_TIMESTAMP: i64 = 4_133_980_799;

impl GeoTime {
    pub fn new(latitude: f64, longitude: f64, timestamp: i64) -> Result<Self> {
        let g = GeoTime {
            latitude,
            longitude,
            timestamp,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.abs() <= 90.0) || !(self.longitude.abs() <= 180.0) {
            return Err(Error::precondition(format!(
                "latitude/longitude out of range: {}, {}",
                self.latitude, self.longitude
            )));
        }
        if !(MIN_TIMESTAMP..=MAX_TIMESTAMP).contains(&self.timestamp) {
            return Err(Error::precondition(format!(
                "timestamp {} is outside 1950-2100, where the solar series is valid",
                self.timestamp
            )));
        }
        Ok(())
    }
}

fn refraction_deg(elevation: f64) -> f64 {
    let e = elevation;
    let arcsec = if e > 85.0 {
        0.0
    } else if e > 5.0 {
        let t = e.to_radians().tan();
        58.1 / t - 0.07 / t.powi(3) + 0.000086 / t.powi(5)
    } else if e > -0.575 {
        1735.0 + e * (-518.2 + e * (103.4 + e * (-12.79 + e * 0.711)))
    } else {
        -20.772 / e.to_radians().tan()
    };
    arcsec / 3600.0
}

/// Apparent solar `(azimuth, elevation)` in degrees. Azimuth is clockwise
/// from north; elevation includes refraction.
pub fn solar_angles(geo: &GeoTime) -> Result<(f64, f64)> {
    geo.validate()?;
    let jd = geo.timestamp as f64 / 86400.0 + 2_440_587.5;
    let t = (jd - 2_451_545.0) / 36525.0;

    let l0 = (280.46646 + t * (36000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + t * (35999.05029 - 0.0001537 * t);
    let ecc = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    let mr = m.to_radians();
    let center = mr.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * mr).sin() * 0.000289;
    let true_long = l0 + center;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let app_long = (true_long - 0.00569 - 0.00478 * omega.sin()).to_radians();
    let eps0 = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    let eps = (eps0 + 0.00256 * omega.cos()).to_radians();
    let decl = (eps.sin() * app_long.sin()).asin();

    let y = (eps / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot_min = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * ecc * mr.sin() + 4.0 * ecc * y * mr.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * ecc * ecc * (2.0 * mr).sin())
        .to_degrees();

    let minutes = geo.timestamp.rem_euclid(86400) as f64 / 60.0;
    let tst = (minutes + eot_min + 4.0 * geo.longitude).rem_euclid(1440.0);
    let mut hour_angle = tst / 4.0 - 180.0;
    if hour_angle < -180.0 {
        hour_angle += 360.0;
    }
    let h = hour_angle.to_radians();
    let lat = geo.latitude.to_radians();

    let cos_zenith = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * h.cos()).clamp(-1.0, 1.0);
    let elevation = 90.0 - cos_zenith.acos().to_degrees();
    let azimuth = (180.0 + h.sin().atan2(h.cos() * lat.sin() - decl.tan() * lat.cos()).to_degrees()).rem_euclid(360.0);
    Ok((azimuth, elevation + refraction_deg(elevation)))
}

/// Unit vector toward the sun in the world frame (+x east, +y north, +z up).
pub fn solar_direction(geo: &GeoTime) -> Result<DVec3> {
    let (az, el) = solar_angles(geo)?;
    let (a, e) = (az.to_radians(), el.to_radians());
    Ok(DVec3::new(a.sin() * e.cos(), a.cos() * e.cos(), e.sin()))
}
