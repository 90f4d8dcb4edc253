use glam::DVec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    /// Unit length.
    pub direction: DVec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Creates a ray, normalizing `direction`.
    pub fn new(origin: DVec3, direction: DVec3, t_min: f64, t_max: f64) -> Self {
        let direction = direction.normalize();
        debug_assert!(direction.is_finite(), "ray direction must be non-zero");
        debug_assert!(t_min < t_max);
        Ray {
            origin,
            direction,
            t_min,
            t_max,
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + t * self.direction
    }

    pub fn is_valid(&self) -> bool {
        self.origin.is_finite()
            && (self.direction.length() - 1.0).abs() <= 1e-6
            && self.t_min < self.t_max
            && !self.t_min.is_nan()
    }
}
