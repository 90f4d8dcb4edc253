//! Rigid transforms and pinhole cameras.
//!
//! Cameras follow the usual computer-vision convention: +x right, +y down,
//! +z forward in the camera frame. Poses are world-from-camera.

use glam::{DMat3, DQuat, DVec3};

use crate::error::{Error, Result};
use crate::geometry::Ray;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: DQuat,
    pub translation: DVec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: DQuat::IDENTITY,
        translation: DVec3::ZERO,
    };

    /// Builds a transform, normalizing the quaternion. Fails when the
    /// quaternion is degenerate or not finite.
    pub fn new(rotation: DQuat, translation: DVec3) -> Result<Self> {
        let len = rotation.length();
        if !len.is_finite() || len < 1e-9 || !translation.is_finite() {
            return Err(Error::precondition(format!(
                "invalid rigid transform (|q| = {len}, t = {translation})"
            )));
        }
        Ok(RigidTransform {
            rotation: rotation / len,
            translation,
        })
    }

    pub fn from_translation(translation: DVec3) -> Self {
        RigidTransform {
            rotation: DQuat::IDENTITY,
            translation,
        }
    }

    pub fn from_matrix(rotation: DMat3, translation: DVec3) -> Result<Self> {
        let orth = rotation.transpose() * rotation;
        let err = (orth - DMat3::IDENTITY)
            .to_cols_array()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if err > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::precondition("rotation matrix is not a proper rotation"));
        }
        Self::new(DQuat::from_mat3(&rotation), translation)
    }

    #[inline]
    pub fn transform_point(&self, p: DVec3) -> DVec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: DVec3) -> DVec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.conjugate();
        RigidTransform {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: (self.rotation * other.rotation).normalize(),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Linear interpolation of translation with spherical interpolation of
    /// rotation.
    pub fn interpolate(&self, other: &RigidTransform, t: f64) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.slerp(other.rotation, t).normalize(),
            translation: self.translation.lerp(other.translation, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-from-camera.
    pub pose: RigidTransform,
}

impl CameraModel {
    pub fn new(width: usize, height: usize, fx: f64, fy: f64, cx: f64, cy: f64, pose: RigidTransform) -> Result<Self> {
        let cam = CameraModel {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with a symmetric horizontal field
    /// of view. `up` only needs to be roughly perpendicular to the view axis.
    pub fn look_at(
        eye: DVec3,
        target: DVec3,
        up: DVec3,
        width: usize,
        height: usize,
        horizontal_fov: f64,
    ) -> Result<Self> {
        let forward = (target - eye).normalize_or_zero();
        if forward == DVec3::ZERO {
            return Err(Error::precondition("look_at eye and target coincide"));
        }
        let mut right = forward.cross(up);
        if right.length_squared() < 1e-18 {
            // Looking along the up hint; pick any perpendicular.
            right = forward.any_orthonormal_vector();
        }
        let right = right.normalize();
        let down = forward.cross(right);
        let rotation = DMat3::from_cols(right, down, forward);
        let f = (width as f64 / 2.0) / (horizontal_fov / 2.0).tan();
        CameraModel::new(
            width,
            height,
            f,
            f,
            width as f64 / 2.0,
            height as f64 / 2.0,
            RigidTransform::from_matrix(rotation, eye)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::precondition("camera has zero-sized image"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::precondition(format!(
                "camera intrinsics must have positive focal lengths (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        let q = self.pose.rotation;
        if (q.length() - 1.0).abs() > 1e-6 || !self.pose.translation.is_finite() {
            return Err(Error::precondition("camera pose rotation is not orthonormal"));
        }
        Ok(())
    }

    pub fn center(&self) -> DVec3 {
        self.pose.translation
    }

    pub fn forward(&self) -> DVec3 {
        self.pose.transform_vector(DVec3::Z)
    }

    /// Unit world-space direction through continuous pixel coordinates.
    pub fn pixel_direction(&self, px: f64, py: f64) -> DVec3 {
        let d = DVec3::new((px - self.cx) / self.fx, (py - self.cy) / self.fy, 1.0);
        self.pose.transform_vector(d).normalize()
    }

    /// Ray through the center of pixel `(x, y)`.
    pub fn pixel_ray(&self, x: usize, y: usize) -> Ray {
        Ray::new(
            self.center(),
            self.pixel_direction(x as f64 + 0.5, y as f64 + 0.5),
            0.0,
            f64::INFINITY,
        )
    }

    /// Projects a world point to continuous pixel coordinates. Returns `None`
    /// for points at or behind the camera plane.
    pub fn project(&self, p: DVec3) -> Option<(f64, f64, f64)> {
        let c = self.pose.inverse().transform_point(p);
        if c.z <= 1e-12 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z))
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// `P = K [R | t]` mapping homogeneous world points to homogeneous pixels.
    pub fn projection_matrix(&self) -> [[f64; 4]; 3] {
        let inv = self.pose.inverse();
        let r = DMat3::from_quat(inv.rotation);
        let t = inv.translation;
        let k = [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]];
        let rt = [
            [r.x_axis.x, r.y_axis.x, r.z_axis.x, t.x],
            [r.x_axis.y, r.y_axis.y, r.z_axis.y, t.y],
            [r.x_axis.z, r.y_axis.z, r.z_axis.z, t.z],
        ];
        let mut p = [[0.0; 4]; 3];
        for i in 0..3 {
            for j in 0..4 {
                p[i][j] = (0..3).map(|k_| k[i][k_] * rt[k_][j]).sum();
            }
        }
        p
    }
}
