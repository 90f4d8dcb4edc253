//! The editable scene: static background, moving actors, a camera rig and
//! the lighting, plus the edits that turn a reconstruction into new
//! scenarios.

mod document;
mod parse;
mod simulate;

use std::collections::{BTreeMap, HashSet};

use crate::camera::{CameraModel, RigidTransform};
use crate::envlight::{rotate_env, EnvMap};
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;

pub use document::{parse_document, Document, Entry, Section};
pub use parse::{
    load_scene, parse_edits, parse_scene, parse_trajectory, read_edits, read_trajectory, trajectory_to_text,
    SCENE_GRAMMAR_VERSION,
};
pub use simulate::{frame_seed, simulate, simulate_frame, SimulatedFrame, SimulationReport};

/// Rigid poses keyed by frame index. Between keys the pose is interpolated
/// (linear translation, spherical rotation); outside them it holds the
/// nearest key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    keys: BTreeMap<usize, RigidTransform>,
}

impl Trajectory {
    pub fn new(keys: BTreeMap<usize, RigidTransform>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::precondition("a trajectory needs at least one pose"));
        }
        Ok(Trajectory { keys })
    }

    pub fn constant(pose: RigidTransform) -> Self {
        Trajectory {
            keys: BTreeMap::from([(0, pose)]),
        }
    }

    pub fn keys(&self) -> &BTreeMap<usize, RigidTransform> {
        &self.keys
    }

    pub fn first_frame(&self) -> usize {
        *self.keys.keys().next().expect("non-empty")
    }

    pub fn last_frame(&self) -> usize {
        *self.keys.keys().next_back().expect("non-empty")
    }

    pub fn pose_at(&self, frame: usize) -> RigidTransform {
        let before = self.keys.range(..=frame).next_back();
        let after = self.keys.range(frame..).next();
        match (before, after) {
            (Some((&a, pa)), Some((&b, pb))) if a != b => pa.interpolate(pb, (frame - a) as f64 / (b - a) as f64),
            (Some((_, p)), _) | (None, Some((_, p))) => *p,
            (None, None) => unreachable!("trajectories are never empty"),
        }
    }

    /// Every key moved by `offset` frames. Fails if a key would become
    /// negative.
    pub fn shifted(&self, offset: i64) -> Result<Self> {
        let mut keys = BTreeMap::new();
        for (&f, p) in &self.keys {
            let g = f as i64 + offset;
            if g < 0 {
                return Err(Error::precondition(format!(
                    "shifting frame {f} by {offset} leaves the sequence"
                )));
            }
            keys.insert(g as usize, *p);
        }
        Ok(Trajectory { keys })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: String,
    /// Object-frame geometry.
    pub mesh: TriangleMesh,
    pub trajectory: Trajectory,
}

/// Pinhole intrinsics shared by every frame plus the world-from-camera rig
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub intrinsics: CameraModel,
    pub trajectory: Trajectory,
}

impl CameraRig {
    pub fn camera(&self, frame: usize) -> CameraModel {
        CameraModel {
            pose: self.trajectory.pose_at(frame),
            ..self.intrinsics
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub background: TriangleMesh,
    pub actors: Vec<Actor>,
    pub rig: CameraRig,
    /// Source lighting.
    pub env: EnvMap,
    pub frame_count: usize,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 {
            return Err(Error::precondition("a scene needs at least one frame"));
        }
        self.rig.intrinsics.validate()?;
        if self.rig.trajectory.last_frame() >= self.frame_count {
            return Err(Error::precondition(format!(
                "camera pose at frame {} is outside the {} frames",
                self.rig.trajectory.last_frame(),
                self.frame_count
            )));
        }
        let mut seen = HashSet::new();
        for a in &self.actors {
            if !seen.insert(a.id.as_str()) {
                return Err(Error::precondition(format!("duplicate actor id '{}'", a.id)));
            }
            if a.trajectory.keys.is_empty() {
                return Err(Error::precondition(format!("actor '{}' has an empty trajectory", a.id)));
            }
            if a.trajectory.last_frame() >= self.frame_count {
                return Err(Error::precondition(format!(
                    "actor '{}' has a pose at frame {}, outside the {} frames",
                    a.id,
                    a.trajectory.last_frame(),
                    self.frame_count
                )));
            }
        }
        Ok(())
    }

    pub fn actor(&self, id: &str) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn camera(&self, frame: usize) -> CameraModel {
        self.rig.camera(frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Edit {
    Remove(String),
    Insert(Actor),
    /// Replaces an actor's trajectory.
    Retime(String, Trajectory),
    /// Moves every key of an actor's trajectory by a number of frames.
    Shift(String, i64),
    SetEnv(EnvMap),
    /// Rotates the lighting about +z by the given yaw in radians.
    RotateEnv(f64),
    MoveRig(Trajectory),
}

impl Edit {
    fn name(&self) -> &'static str {
        match self {
            Edit::Remove(_) => "remove",
            Edit::Insert(_) => "insert",
            Edit::Retime(..) | Edit::Shift(..) => "retime",
            Edit::SetEnv(_) => "set_env",
            Edit::RotateEnv(_) => "rotate_env",
            Edit::MoveRig(_) => "move_rig",
        }
    }
}

pub type EditScript = Vec<Edit>;

/// Applies edits in order to a copy of `scene`. Errors name the edit's
/// position (from 1) and the offending actor id.
pub fn apply_edits(scene: &Scene, script: &[Edit]) -> Result<Scene> {
    let mut out = scene.clone();
    for (i, edit) in script.iter().enumerate() {
        let fail = |msg: String| Error::precondition(format!("edit {} ({}): {msg}", i + 1, edit.name()));
        let find = |s: &Scene, id: &str| {
            s.actors
                .iter()
                .position(|a| a.id == id)
                .ok_or_else(|| fail(format!("unknown actor '{id}'")))
        };
        match edit {
            Edit::Remove(id) => {
                let k = find(&out, id)?;
                out.actors.remove(k);
            }
            Edit::Insert(actor) => {
                if out.actor(&actor.id).is_some() {
                    return Err(fail(format!("actor '{}' already exists", actor.id)));
                }
                out.actors.push(actor.clone());
            }
            Edit::Retime(id, traj) => {
                let k = find(&out, id)?;
                out.actors[k].trajectory = traj.clone();
            }
            Edit::Shift(id, offset) => {
                let k = find(&out, id)?;
                out.actors[k].trajectory = out.actors[k]
                    .trajectory
                    .shifted(*offset)
                    .map_err(|e| fail(e.to_string()))?;
            }
            Edit::SetEnv(env) => out.env = env.clone(),
            Edit::RotateEnv(yaw) => out.env = rotate_env(&out.env, *yaw),
            Edit::MoveRig(traj) => out.rig.trajectory = traj.clone(),
        }
        out.validate().map_err(|e| fail(e.to_string()))?;
    }
    Ok(out)
}

/// Background plus every actor posed at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGeometry {
    pub mesh: TriangleMesh,
    /// Per triangle: `None` for background, otherwise the actor's index in
    /// [`Scene::actors`].
    pub tags: Vec<Option<usize>>,
}

pub fn frame_geometry(scene: &Scene, frame: usize) -> Result<FrameGeometry> {
    if frame >= scene.frame_count {
        return Err(Error::precondition(format!(
            "frame {frame} is outside the {} frames",
            scene.frame_count
        )));
    }
    let mut mesh = scene.background.clone();
    let mut tags = vec![None; mesh.triangle_count()];
    for (k, actor) in scene.actors.iter().enumerate() {
        let placed = actor.mesh.transformed(&actor.trajectory.pose_at(frame));
        tags.extend(std::iter::repeat_n(Some(k), placed.triangle_count()));
        mesh.append(&placed);
    }
    Ok(FrameGeometry { mesh, tags })
}
