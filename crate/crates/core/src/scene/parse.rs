//! Scene files, trajectory files and edit scripts. The grammar is described
//! in `docs/scene-format.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use glam::{DQuat, DVec3};

use super::document::{Document, Section};
use super::{Actor, CameraRig, Edit, EditScript, Scene, Trajectory};
use crate::camera::{CameraModel, RigidTransform};
use crate::envlight::{decode_sky, rotate_env, EnvMap, SkyParams, SKY_LATENT_DIM};
use crate::error::{Error, Result};
use crate::geometry::{ply, TriangleMesh};

pub const SCENE_GRAMMAR_VERSION: u32 = 1;

/// Default dome height for skies given as parameters.
const DEFAULT_SKY_HEIGHT: usize = 64;

fn at(path: &Path, line: usize, column: usize, msg: impl std::fmt::Display) -> Error {
    Error::format(path, line, format!("column {column}: {msg}"))
}

/// Whitespace-separated tokens with their 1-based columns. A token may be
/// wrapped in double quotes to include spaces.
fn tokens(line: &str, path: &Path, line_no: usize) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '"' {
            chars.next();
            let mut tok = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => break,
                    Some((_, ch)) => tok.push(ch),
                    None => return Err(at(path, line_no, i + 1, "unterminated quote")),
                }
            }
            out.push((tok, i + 1));
        } else {
            let mut tok = String::new();
            while let Some(&(_, ch)) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                tok.push(ch);
                chars.next();
            }
            out.push((tok, i + 1));
        }
    }
    Ok(out)
}

fn content(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("")
}

/// Lines of `frame tx ty tz qw qx qy qz`. Quaternions are normalized;
/// repeated frames are an error.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let mut keys = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks = tokens(content(raw), path, line_no)?;
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 8 {
            return Err(at(
                path,
                line_no,
                toks[0].1,
                format!("expected 'frame tx ty tz qw qx qy qz', found {} fields", toks.len()),
            ));
        }
        let frame: usize = toks[0].0.parse().map_err(|_| {
            at(
                path,
                line_no,
                toks[0].1,
                format!("frame index '{}' is not a non-negative integer", toks[0].0),
            )
        })?;
        let mut v = [0.0; 7];
        for (k, (tok, col)) in toks[1..].iter().enumerate() {
            v[k] = tok
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| at(path, line_no, *col, format!("'{tok}' is not a finite number")))?;
        }
        let pose = RigidTransform::new(DQuat::from_xyzw(v[4], v[5], v[6], v[3]), DVec3::new(v[0], v[1], v[2]))
            .map_err(|e| at(path, line_no, toks[4].1, e))?;
        if keys.insert(frame, pose).is_some() {
            return Err(at(path, line_no, toks[0].1, format!("frame {frame} appears twice")));
        }
    }
    if keys.is_empty() {
        return Err(Error::format(path, 0, "trajectory has no poses"));
    }
    Trajectory::new(keys)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

/// Text form of a trajectory, readable by [`parse_trajectory`].
pub fn trajectory_to_text(t: &Trajectory) -> String {
    let mut s = String::new();
    for (f, p) in t.keys() {
        let (q, x) = (p.rotation, p.translation);
        s.push_str(&format!(
            "{f} {} {} {} {} {} {} {}\n",
            x.x, x.y, x.z, q.w, q.x, q.y, q.z
        ));
    }
    s
}

fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    ply::read(path)
}

/// One edit per line; paths are relative to the script's directory.
///
/// ```text
/// remove car_2
/// insert cone cone.ply cone.traj
/// retime car_1 car_1_late.traj
/// retime car_1 shift 3
/// rotate_env 3.14159
/// set_env overcast.hdr
/// move_rig rig_left.traj
/// ```
pub fn parse_edits(text: &str, path: &Path) -> Result<EditScript> {
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let resolve = |s: &str| -> PathBuf {
        let p = Path::new(s);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut script = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks = tokens(content(raw), path, line_no)?;
        let Some((verb, verb_col)) = toks.first() else {
            continue;
        };
        let args: Vec<&str> = toks[1..].iter().map(|(t, _)| t.as_str()).collect();
        let arity = |n: usize, usage: &str| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(at(path, line_no, *verb_col, format!("usage: {usage}")))
            }
        };
        let number = |k: usize| -> Result<f64> {
            let (tok, col) = &toks[k + 1];
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| at(path, line_no, *col, format!("'{tok}' is not a finite number")))
        };
        // File errors keep their own location; value errors point at the argument.
        let context = |k: usize, e: Error| match e {
            Error::Precondition(_) | Error::Numerical(_) => at(path, line_no, toks[k + 1].1, e),
            other => other,
        };
        let edit = match verb.as_str() {
            "remove" => {
                arity(1, "remove <id>")?;
                Edit::Remove(args[0].to_string())
            }
            "insert" => {
                arity(3, "insert <id> <mesh.ply> <trajectory>")?;
                let mesh = read_mesh(&resolve(args[1])).map_err(|e| context(1, e))?;
                let trajectory = read_trajectory(&resolve(args[2])).map_err(|e| context(2, e))?;
                Edit::Insert(Actor {
                    id: args[0].to_string(),
                    mesh,
                    trajectory,
                })
            }
            "retime" if args.len() == 3 && args[1] == "shift" => {
                let k = args[2].parse::<i64>().map_err(|_| {
                    at(
                        path,
                        line_no,
                        toks[3].1,
                        format!("'{}' is not an integer frame offset", args[2]),
                    )
                })?;
                Edit::Shift(args[0].to_string(), k)
            }
            "retime" => {
                arity(2, "retime <id> <trajectory> | retime <id> shift <frames>")?;
                Edit::Retime(
                    args[0].to_string(),
                    read_trajectory(&resolve(args[1])).map_err(|e| context(1, e))?,
                )
            }
            "rotate_env" => {
                arity(1, "rotate_env <radians>")?;
                Edit::RotateEnv(number(0)?)
            }
            "set_env" => {
                arity(1, "set_env <map.hdr>")?;
                Edit::SetEnv(EnvMap::read(&resolve(args[0])).map_err(|e| context(0, e))?)
            }
            "move_rig" => {
                arity(1, "move_rig <trajectory>")?;
                Edit::MoveRig(read_trajectory(&resolve(args[0])).map_err(|e| context(0, e))?)
            }
            other => return Err(at(path, line_no, *verb_col, format!("unknown edit '{other}'"))),
        };
        script.push(edit);
    }
    Ok(script)
}

pub fn read_edits(path: &Path) -> Result<EditScript> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edits(&text, path)
}

fn lighting(doc: &Document, s: &Section) -> Result<EnvMap> {
    doc.check_keys(s, &["hdr", "sky", "height", "f_int", "f_dir", "z_sky", "rotate"])?;
    let sources = ["hdr", "sky", "f_dir"].iter().filter(|k| s.get(k).is_some()).count();
    if sources != 1 {
        return Err(doc.error(s.line, 1, "[lighting] needs exactly one of 'hdr', 'sky' or 'f_dir'"));
    }
    let env = if let Some(e) = s.get("hdr") {
        for k in ["height", "f_int", "z_sky"] {
            if let Some(extra) = s.get(k) {
                return Err(doc.error(extra.line, 1, format!("'{k}' only applies to parametric skies")));
            }
        }
        EnvMap::read(&doc.resolve(&e.value))?
    } else {
        let height = match s.get("height") {
            Some(e) => doc.value::<usize>(e)?,
            None => DEFAULT_SKY_HEIGHT,
        };
        let params = if let Some(e) = s.get("sky") {
            for k in ["f_int", "z_sky"] {
                if let Some(extra) = s.get(k) {
                    return Err(doc.error(extra.line, 1, format!("'{k}' cannot be combined with 'sky'")));
                }
            }
            let path = doc.resolve(&e.value);
            let text = std::fs::read_to_string(&path).map_err(|err| Error::io(&path, err))?;
            SkyParams::from_text(&text).map_err(|(line, msg)| Error::format(&path, line, msg))?
        } else {
            let f_dir = doc.numbers(s.get("f_dir").expect("checked"), Some(3))?;
            let f_int = doc.require(s, "f_int")?;
            let mut z = [0.0; SKY_LATENT_DIM];
            if let Some(e) = s.get("z_sky") {
                let v = doc.numbers(e, None)?;
                if v.len() > SKY_LATENT_DIM {
                    return Err(doc.error(e.line, e.column, format!("z_sky has at most {SKY_LATENT_DIM} numbers")));
                }
                z[..v.len()].copy_from_slice(&v);
            }
            SkyParams::new(z, doc.value(f_int)?, DVec3::from_slice(&f_dir))
                .map_err(|err| doc.error(f_int.line, 1, err))?
        };
        decode_sky(&params, height)?
    };
    Ok(match s.get("rotate") {
        Some(e) => rotate_env(&env, doc.value(e)?),
        None => env,
    })
}

/// Builds a scene from a parsed document. Sections other than the scene
/// ones (`[render]`, `[recon]`) are left for the caller.
pub fn parse_scene(doc: &Document) -> Result<Scene> {
    let background = match doc.section("background")? {
        Some(s) => {
            doc.check_keys(s, &["mesh"])?;
            read_mesh(&doc.resolve(&doc.require(s, "mesh")?.value))?
        }
        None => TriangleMesh::empty(),
    };

    let cam = doc
        .section("camera")?
        .ok_or_else(|| doc.error(0, 1, "scene needs a [camera] section"))?;
    doc.check_keys(cam, &["intrinsics", "poses"])?;
    let k_entry = doc.require(cam, "intrinsics")?;
    let k = doc.numbers(k_entry, Some(6))?;
    let dim = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(doc.error(
                k_entry.line,
                k_entry.column,
                "image width and height must be positive integers",
            ))
        }
    };
    let intrinsics = CameraModel::new(dim(k[0])?, dim(k[1])?, k[2], k[3], k[4], k[5], RigidTransform::IDENTITY)
        .map_err(|e| doc.error(k_entry.line, k_entry.column, e))?;
    let rig = CameraRig {
        intrinsics,
        trajectory: read_trajectory(&doc.resolve(&doc.require(cam, "poses")?.value))?,
    };

    let mut actors = Vec::new();
    for s in doc.sections_named("actor") {
        doc.check_keys(s, &["mesh", "trajectory"])?;
        let id = s
            .label
            .clone()
            .ok_or_else(|| doc.error(s.line, 1, "actor sections need an id: [actor \"name\"]"))?;
        if actors.iter().any(|a: &Actor| a.id == id) {
            return Err(doc.error(s.line, 1, format!("duplicate actor id '{id}'")));
        }
        actors.push(Actor {
            id,
            mesh: read_mesh(&doc.resolve(&doc.require(s, "mesh")?.value))?,
            trajectory: read_trajectory(&doc.resolve(&doc.require(s, "trajectory")?.value))?,
        });
    }

    let env = match doc.section("lighting")? {
        Some(s) => lighting(doc, s)?,
        None => return Err(doc.error(0, 1, "scene needs a [lighting] section")),
    };

    let last = actors
        .iter()
        .map(|a| a.trajectory.last_frame())
        .chain([rig.trajectory.last_frame()])
        .max()
        .unwrap_or(0);
    let frame_count = match doc.section("scene")? {
        Some(s) => {
            doc.check_keys(s, &["frames"])?;
            match s.get("frames") {
                Some(e) => doc.value::<usize>(e)?,
                None => last + 1,
            }
        }
        None => last + 1,
    };

    let scene = Scene {
        background,
        actors,
        rig,
        env,
        frame_count,
    };
    scene
        .validate()
        .map_err(|e| Error::format(&doc.path, 0, e.to_string()))?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    parse_scene(&Document::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::scene::parse_document;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn fixture(dir: &Path) -> PathBuf {
        ply::write(
            &dir.join("ground.ply"),
            &primitives::plane_grid(DVec3::ZERO, 4.0, 2, DVec3::splat(0.5)),
        )
        .unwrap();
        ply::write(
            &dir.join("box.ply"),
            &primitives::cuboid(DVec3::splat(-0.5), DVec3::splat(0.5), DVec3::ONE),
        )
        .unwrap();
        write(dir, "box.traj", "0 0 0 0.5 1 0 0 0\n3 2 0 0.5 1 0 0 0\n");
        write(dir, "rig.traj", "# eye above\n0 0 -6 3 0.7071 -0.7071 0 0\n");
        write(
            dir,
            "scene.txt",
            "[scene]\nframes = 5\n\n[background]\nmesh = ground.ply\n\n[actor \"box\"]\nmesh = box.ply\ntrajectory = box.traj\n\n\
             [camera]\nintrinsics = 32 24 30 30 16 12\nposes = rig.traj\n\n[lighting]\nf_dir = 0 -1 1\nf_int = 100\nheight = 16\n\n\
             [render]\nspp = 4\n",
        )
    }

    #[test]
    fn loads_a_scene_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let scene = load_scene(&fixture(dir.path())).unwrap();
        assert_eq!(scene.frame_count, 5);
        assert_eq!(scene.actors.len(), 1);
        assert_eq!(scene.actors[0].trajectory.keys().len(), 2);
        assert_eq!(scene.env.height(), 16);
        assert_eq!(scene.rig.intrinsics.width, 32);
        assert!((scene.camera(2).center() - DVec3::new(0.0, -6.0, 3.0)).length() < 1e-12);
    }

    #[test]
    fn trajectory_round_trip_and_errors() {
        let p = Path::new("t.traj");
        let t = parse_trajectory("# c\n2 1 2 3 1 0 0 0\n0 0 0 0 0 0 0 2\n", p).unwrap();
        assert_eq!(t.first_frame(), 0);
        assert!((t.pose_at(0).rotation.length() - 1.0).abs() < 1e-12);
        assert_eq!(parse_trajectory(&trajectory_to_text(&t), p).unwrap(), t);

        let cases = [
            ("0 1 2 3 1 0 0\n", 1, "column 1"),
            ("0 0 0 0 1 0 0 0\n-1 0 0 0 1 0 0 0\n", 2, "column 1"),
            ("0 0 0 0 1 0 0 0\n0 0 0 0 1 0 0 0\n", 2, "twice"),
            ("0 0 nan 0 1 0 0 0\n", 1, "column 5"),
            ("0 0 0 0 0 0 0 0\n", 1, "column 9"),
        ];
        for (text, line, needle) in cases {
            match parse_trajectory(text, p) {
                Err(Error::Format { line: l, message, .. }) => {
                    assert_eq!(l, line, "{text:?}");
                    assert!(message.contains(needle), "{text:?}: {message}");
                }
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(parse_trajectory("# nothing\n", p).is_err());
    }

    #[test]
    fn edit_scripts() {
        let dir = tempfile::tempdir().unwrap();
        let scene_path = fixture(dir.path());
        let script = write(
            dir.path(),
            "edits.txt",
            "# shadow edit\nrotate_env 3.141592653589793\ninsert cone box.ply box.traj\nretime \"box\" shift 1\nremove cone\n",
        );
        let edits = read_edits(&script).unwrap();
        assert_eq!(edits.len(), 4);
        assert!(matches!(edits[2], Edit::Shift(ref id, 1) if id == "box"));
        let scene = load_scene(&scene_path).unwrap();
        let edited = super::super::apply_edits(&scene, &edits).unwrap();
        assert_eq!(edited.actors.len(), 1);

        let p = Path::new("e.txt");
        let err = parse_edits("remove a\nteleport b\n", p).unwrap_err().to_string();
        assert!(err.contains("e.txt:2:") && err.contains("column 1"), "{err}");
        let err = parse_edits("rotate_env  x\n", p).unwrap_err().to_string();
        assert!(err.contains("column 13"), "{err}");
        let err = parse_edits("insert a missing.ply t.traj\n", Path::new("/nonexistent/e.txt")).unwrap_err();
        assert!(err.is_io() && err.to_string().contains("missing.ply"), "{err}");
    }

    #[test]
    fn scene_errors_locate_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let path = dir.path().join("bad.txt");
        let check = |text: &str, needle: &str| {
            let doc = parse_document(text, &path).unwrap();
            let err = parse_scene(&doc).unwrap_err().to_string();
            assert!(err.contains(needle), "{err}");
        };
        check(
            "[camera]\nintrinsics = 32 24 30 30 16 12\nposes = rig.traj\n",
            "[lighting]",
        );
        check(
            "[camera]\nintrinsics = 32 24 30 16 12\nposes = rig.traj\n[lighting]\nhdr = x.hdr\n",
            ":2: column 14",
        );
        check(
            "[camera]\nintrinsics = 32 24 30 30 16 12\nposes = rig.traj\n[lighting]\nf_dir = 0 0 1\nf_int = 1\ncolour = red\n",
            ":7: column 1",
        );
        check(
            "[scene]\nframes = 2\n[actor \"box\"]\nmesh = box.ply\ntrajectory = box.traj\n[camera]\nintrinsics = 32 24 30 30 16 12\nposes = rig.traj\n[lighting]\nf_dir = 0 0 1\nf_int = 1\n",
            "outside",
        );
    }
}
