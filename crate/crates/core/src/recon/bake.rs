use glam::DVec3;
use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, Ray, TriangleMesh};
use crate::raster::Image;

/// Albedo given to vertices that no camera sees.
pub const UNSEEN_ALBEDO: DVec3 = DVec3::splat(0.5);

#[derive(Debug, Clone)]
pub struct BakedAlbedo {
    pub mesh: TriangleMesh,
    /// True for vertices that no camera saw.
    pub unseen: Vec<bool>,
}

/// Each vertex gets the mean of bilinear samples from every camera that
/// sees it: the vertex projects inside the image and the segment from the
/// camera center stops short of it (by `1e-4 ·` scene diameter) without a
/// hit. Inputs are linear RGB.
pub fn bake_vertex_albedo(
    mesh: &TriangleMesh,
    images: &[Image],
    cameras: &[CameraModel],
    bvh: &Bvh,
) -> Result<BakedAlbedo> {
    if images.len() != cameras.len() {
        return Err(Error::precondition(format!(
            "{} images but {} cameras",
            images.len(),
            cameras.len()
        )));
    }
    if mesh.is_empty() {
        return Err(Error::precondition("cannot bake albedo onto an empty mesh"));
    }
    for (i, (img, cam)) in images.iter().zip(cameras).enumerate() {
        if img.dims() != (cam.width, cam.height) || img.channels() != 3 {
            return Err(Error::precondition(format!(
                "image {i} is {}x{}x{}, camera expects {}x{}x3",
                img.width(),
                img.height(),
                img.channels(),
                cam.width,
                cam.height
            )));
        }
    }
    let eps = 1e-4 * mesh.diameter();
    let baked: Vec<Option<DVec3>> = mesh
        .positions
        .par_iter()
        .map(|&p| {
            let mut sum = DVec3::ZERO;
            let mut n = 0usize;
            for (img, cam) in images.iter().zip(cameras) {
                let Some((u, v, _)) = cam.project(p) else { continue };
                if !cam.contains_pixel(u, v) {
                    continue;
                }
                let to = p - cam.center();
                let dist = to.length();
                if dist <= eps {
                    continue;
                }
                let ray = Ray::new(cam.center(), to, 0.0, dist - eps);
                if bvh.occluded(mesh, &ray) {
                    continue;
                }
                let mut px = [0f32; 3];
                img.sample_bilinear(u, v, &mut px);
                sum += DVec3::new(px[0] as f64, px[1] as f64, px[2] as f64);
                n += 1;
            }
            (n > 0).then(|| (sum / n as f64).clamp(DVec3::ZERO, DVec3::ONE))
        })
        .collect();

    let mut out = mesh.clone();
    let unseen = baked.iter().map(Option::is_none).collect();
    out.albedo = baked.into_iter().map(|a| a.unwrap_or(UNSEEN_ALBEDO)).collect();
    Ok(BakedAlbedo { mesh: out, unseen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn camera(eye: DVec3) -> CameraModel {
        CameraModel::look_at(eye, DVec3::ZERO, DVec3::Y, 64, 64, 1.2).unwrap()
    }

    #[test]
    fn constant_image_gives_constant_albedo() {
        let mesh = primitives::plane_grid(DVec3::ZERO, 1.0, 4, DVec3::ZERO);
        let bvh = Bvh::build(&mesh);
        let img = Image::filled(64, 64, 3, 0.3);
        let out = bake_vertex_albedo(&mesh, &[img], &[camera(DVec3::new(0.0, 0.0, 3.0))], &bvh).unwrap();
        assert!(out.unseen.iter().all(|u| !u));
        for a in &out.mesh.albedo {
            assert!((*a - DVec3::splat(0.3)).length() < 1e-6);
        }
    }

    #[test]
    fn occluded_vertices_are_flagged() {
        let mut mesh = primitives::plane_grid(DVec3::ZERO, 0.5, 2, DVec3::ZERO);
        let first_lid_vertex = mesh.vertex_count();
        mesh.append(&primitives::quad(DVec3::new(0.0, 0.0, 1.0), 2.0, DVec3::ZERO));
        let bvh = Bvh::build(&mesh);
        let img = Image::filled(64, 64, 3, 0.8);
        let out = bake_vertex_albedo(&mesh, &[img], &[camera(DVec3::new(0.0, 0.0, 3.0))], &bvh).unwrap();
        for v in 0..first_lid_vertex {
            assert!(out.unseen[v]);
            assert_eq!(out.mesh.albedo[v], UNSEEN_ALBEDO);
        }
    }

    #[test]
    fn two_cameras_average_and_order_does_not_matter() {
        let mesh = primitives::plane_grid(DVec3::ZERO, 0.5, 3, DVec3::ZERO);
        let bvh = Bvh::build(&mesh);
        let cams = [
            camera(DVec3::new(0.0, 0.0, 3.0)),
            camera(DVec3::new(1.0, 0.5, 2.5)),
            camera(DVec3::new(-0.7, 0.2, 2.0)),
        ];
        let imgs = [
            Image::filled(64, 64, 3, 0.2),
            Image::filled(64, 64, 3, 0.6),
            Image::filled(64, 64, 3, 0.7),
        ];
        let two = bake_vertex_albedo(&mesh, &imgs[..2], &cams[..2], &bvh).unwrap();
        for a in &two.mesh.albedo {
            assert!((*a - DVec3::splat(0.4)).length() < 1e-6);
        }
        let abc = bake_vertex_albedo(&mesh, &imgs, &cams, &bvh).unwrap();
        let rev_i = [imgs[2].clone(), imgs[0].clone(), imgs[1].clone()];
        let rev_c = [cams[2], cams[0], cams[1]];
        let cab = bake_vertex_albedo(&mesh, &rev_i, &rev_c, &bvh).unwrap();
        assert_eq!(abc.mesh.albedo, cab.mesh.albedo);
    }

    #[test]
    fn mismatched_lists_are_rejected() {
        let mesh = primitives::quad(DVec3::ZERO, 1.0, DVec3::ZERO);
        let bvh = Bvh::build(&mesh);
        assert!(bake_vertex_albedo(&mesh, &[], &[camera(DVec3::Z * 3.0)], &bvh).is_err());
    }
}
