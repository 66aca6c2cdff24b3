//! World model: a room with textured, tagged objects, a navigation grid and
//! a skybox. Worlds are immutable after load; mutation helpers return copies.

mod json;
mod primitives;

use std::f32::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::NavGrid;
use crate::bugs::BugKind;
use crate::geom::{Aabb, Affine2, Rgb, Vec2, Vec3};
use crate::Scalar;

pub use json::{load_scene, parse_scene_str, serialize_world};
pub use primitives::Primitive;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("texture {path}: {message}")]
    Texture { path: String, message: String },
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
}

/// Position plus heading. Yaw is radians about +y, normalized to [0, 2*pi);
/// yaw 0 faces +x, positive yaw turns toward -z (right-hand rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3<Scalar>,
    pub yaw: Scalar,
}

impl Pose {
    pub fn new(position: Vec3<Scalar>, yaw: Scalar) -> Self {
        Self { position, yaw: normalize_yaw(yaw) }
    }

    pub fn forward(&self) -> Vec3<Scalar> {
        let (s, c) = crate::num::det_sincos(self.yaw as f64);
        Vec3::new(c as Scalar, 0.0, -s as Scalar)
    }
}

pub fn normalize_yaw(yaw: Scalar) -> Scalar {
    let mut y = yaw % TAU;
    if y < 0.0 {
        y += TAU;
    }
    // -1e-9 % tau can still round to tau
    if y >= TAU {
        y = 0.0;
    }
    y
}

/// Triangle mesh in object-local coordinates. Front faces wind
/// counter-clockwise when seen from outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3<Scalar>>,
    pub normals: Vec<Vec3<Scalar>>,
    pub uvs: Vec<Vec2<Scalar>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn validate(&self, id: &str) -> Result<(), SceneError> {
        let n = self.vertices.len();
        if self.normals.len() != n || self.uvs.len() != n {
            return Err(SceneError::Validation(format!(
                "object {id:?}: vertex/normal/uv counts differ ({n}/{}/{})",
                self.normals.len(),
                self.uvs.len()
            )));
        }
        for v in &self.vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(SceneError::Validation(format!("object {id:?}: non-finite vertex")));
            }
        }
        for nv in &self.normals {
            if (nv.length() - 1.0).abs() > 1e-6 {
                return Err(SceneError::Validation(format!(
                    "object {id:?}: normal not unit length ({:?})",
                    nv
                )));
            }
        }
        for uv in &self.uvs {
            if !(uv.x.is_finite() && uv.y.is_finite()) {
                return Err(SceneError::Validation(format!("object {id:?}: non-finite uv")));
            }
        }
        for t in &self.triangles {
            for &i in t {
                if i as usize >= n {
                    return Err(SceneError::Validation(format!(
                        "object {id:?}: triangle index {i} out of range (vertices: {n})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Owned RGB texture, interleaved rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Texture {
    pub fn sample_wrap(&self, u: Scalar, v: Scalar) -> Rgb {
        let fu = u - u.floor();
        let fv = v - v.floor();
        let x = ((fu * self.width as Scalar) as usize).min(self.width - 1);
        let y = ((fv * self.height as Scalar) as usize).min(self.height - 1);
        let i = (y * self.width + x) * 3;
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    /// Copy with every texel hue-flipped.
    pub fn hue_flipped(&self) -> Texture {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for p in self.pixels.chunks_exact(3) {
            let c = Rgb(p[0], p[1], p[2]).hue_flipped();
            pixels.extend_from_slice(&[c.0, c.1, c.2]);
        }
        Texture { width: self.width, height: self.height, pixels }
    }
}

/// Fallback color rendered when an object's texture is missing.
pub const MISSING_TEXTURE_COLOR: Rgb = Rgb(255, 0, 255);

/// Tag attached to an object so the mask camera paints its pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugTag {
    pub kind: BugKind,
    pub color: Rgb,
}

impl BugTag {
    pub fn of(kind: BugKind) -> Self {
        Self { kind, color: kind.tag_color() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectRole {
    /// The ground plane.
    Floor,
    /// Room boundary (walls).
    Boundary,
    /// Regular clutter; default target pool for object bugs.
    #[default]
    Prop,
}

/// Rigid placement plus non-uniform scale. Rotation is yaw-only (about +y),
/// stored in degrees as authored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub position: Vec3<Scalar>,
    pub yaw_deg: Scalar,
    pub scale: Vec3<Scalar>,
}

impl Default for Transform {
    fn default() -> Self {
        Self { position: Vec3::zero(), yaw_deg: 0.0, scale: Vec3::new(1.0, 1.0, 1.0) }
    }
}

impl Transform {
    pub fn apply(&self, p: Vec3<Scalar>) -> Vec3<Scalar> {
        let s = p.scale_by(self.scale);
        let (sin, cos) = crate::num::det_sincos(self.yaw_deg.to_radians() as f64);
        let (sin, cos) = (sin as Scalar, cos as Scalar);
        // rotation about +y, right-hand rule: +x turns toward -z
        Vec3::new(
            cos * s.x + sin * s.z,
            s.y,
            -sin * s.x + cos * s.z,
        ) + self.position
    }

    /// Rotate a direction (normals); ignores translation and scale.
    pub fn apply_dir(&self, d: Vec3<Scalar>) -> Vec3<Scalar> {
        let (sin, cos) = crate::num::det_sincos(self.yaw_deg.to_radians() as f64);
        let (sin, cos) = (sin as Scalar, cos as Scalar);
        Vec3::new(cos * d.x + sin * d.z, d.y, -sin * d.x + cos * d.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub mesh: Arc<Mesh>,
    pub texture: Option<Arc<Texture>>,
    pub uv_transform: Affine2<Scalar>,
    pub transform: Transform,
    pub collidable: bool,
    pub render_layer: u8,
    pub bug_tag: Option<BugTag>,
    pub role: ObjectRole,
}

impl SceneObject {
    /// World-space bounding box of the transformed mesh.
    pub fn world_aabb(&self) -> Aabb<Scalar> {
        let mut b = Aabb::empty();
        for &v in &self.mesh.vertices {
            b.expand(self.transform.apply(v));
        }
        b
    }
}

/// Skybox as a vertical gradient; `below` is the color toward straight down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skybox {
    pub horizon: Rgb,
    pub zenith: Rgb,
    pub below: Rgb,
}

impl Default for Skybox {
    fn default() -> Self {
        Self { horizon: Rgb(150, 200, 235), zenith: Rgb(25, 55, 130), below: Rgb(70, 90, 110) }
    }
}

impl Skybox {
    /// Color for a unit view direction.
    pub fn color(&self, dir: Vec3<Scalar>) -> Rgb {
        if dir.y >= 0.0 {
            self.horizon.lerp(self.zenith, dir.y)
        } else {
            self.horizon.lerp(self.below, -dir.y)
        }
    }
}

/// Floor parameters kept for serialization and nav-grid bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorSpec {
    pub size: [Scalar; 2],
    pub height: Scalar,
}

/// Nav-grid build parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavParams {
    pub cell_size: Scalar,
    pub agent_radius: Scalar,
    pub agent_height: Scalar,
}

impl Default for NavParams {
    fn default() -> Self {
        Self { cell_size: 0.5, agent_radius: 0.3, agent_height: 1.5 }
    }
}

/// Agent start placement as authored (yaw in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub position: Vec3<Scalar>,
    pub yaw_deg: Scalar,
}

impl StartPose {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.yaw_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// All renderable objects, including the floor plane.
    pub objects: Vec<SceneObject>,
    pub floor: FloorSpec,
    pub nav_params: NavParams,
    pub nav: NavGrid,
    pub skybox: Skybox,
    pub agent_start: StartPose,
}

impl World {
    pub fn floor_height(&self) -> Scalar {
        self.floor.height
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Ids of objects with the given role.
    pub fn ids_with_role(&self, role: ObjectRole) -> Vec<&str> {
        self.objects.iter().filter(|o| o.role == role).map(|o| o.id.as_str()).collect()
    }

    /// Returns a copy with the object's tag set (`None` clears it).
    pub fn assign_tag(&self, object_id: &str, tag: Option<BugTag>) -> Result<World, SceneError> {
        let idx = self
            .object_index(object_id)
            .ok_or_else(|| SceneError::UnknownObject(object_id.to_string()))?;
        let mut w = self.clone();
        w.objects[idx].bug_tag = tag;
        Ok(w)
    }

    /// Rebuild the walkable grid against the current collidable flags.
    pub fn rebuild_nav(&mut self) {
        self.nav = NavGrid::build(
            self.floor,
            &self.objects,
            self.nav_params.cell_size,
            self.nav_params.agent_radius,
            self.nav_params.agent_height,
        );
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::Validation(format!("duplicate object id {:?}", o.id)));
            }
            o.mesh.validate(&o.id)?;
        }
        if self.floor.size[0] <= 0.0 || self.floor.size[1] <= 0.0 {
            return Err(SceneError::Validation("floor size must be positive".into()));
        }
        if self.nav.walkable_count() == 0 {
            return Err(SceneError::Validation("no walkable cells".into()));
        }
        // Walkable cells must be free of collision volumes.
        let pad = self.nav_params.agent_radius;
        let y_lo = self.floor.height + 0.01;
        let y_hi = self.floor.height + self.nav_params.agent_height;
        for (ix, iz) in self.nav.walkable_cells() {
            let c = self.nav.cell_center(ix, iz);
            for o in self.objects.iter().filter(|o| o.collidable && o.role != ObjectRole::Floor) {
                if o.world_aabb().blocks_circle(c.x, c.y, pad, y_lo, y_hi) {
                    return Err(SceneError::Validation(format!(
                        "walkable cell ({ix}, {iz}) intersects object {:?}",
                        o.id
                    )));
                }
            }
        }
        let start = self.agent_start.pose();
        if !self.nav.is_walkable_pos(Vec2::new(start.position.x, start.position.z)) {
            return Err(SceneError::Validation("agent start is not on a walkable cell".into()));
        }
        Ok(())
    }

    /// Hash of the canonical serialized scene, recorded in episode metadata.
    pub fn scene_hash(&self) -> String {
        let json = serialize_world(self);
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let out = h.finalize();
        let mut s = String::with_capacity(64);
        for b in out {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    /// The bundled default scene: a 20 x 20 m room with four walls and a
    /// dozen textured props.
    pub fn default_scene() -> World {
        static SCENE: &str = include_str!("../../assets/scenes/default.json");
        parse_scene_str(SCENE, &embedded_texture)
            .expect("bundled default scene must be valid")
    }
}

fn embedded_texture(path: &str) -> Result<Vec<u8>, SceneError> {
    let name = path.rsplit('/').next().unwrap_or(path);
    let bytes: &[u8] = match name {
        "floor.ppm" => include_bytes!("../../assets/textures/floor.ppm"),
        "checker.ppm" => include_bytes!("../../assets/textures/checker.ppm"),
        "brick.ppm" => include_bytes!("../../assets/textures/brick.ppm"),
        "crate.ppm" => include_bytes!("../../assets/textures/crate.ppm"),
        "stripe.ppm" => include_bytes!("../../assets/textures/stripe.ppm"),
        "dots.ppm" => include_bytes!("../../assets/textures/dots.ppm"),
        _ => {
            return Err(SceneError::Texture {
                path: path.to_string(),
                message: "not a bundled texture".into(),
            })
        }
    };
    Ok(bytes.to_vec())
}

/// Read a texture from PPM bytes.
pub fn texture_from_ppm(path: &str, bytes: &[u8]) -> Result<Texture, SceneError> {
    let img = crate::ppm::parse_p6(bytes)
        .map_err(|e| SceneError::Texture { path: path.to_string(), message: e.to_string() })?;
    Ok(Texture { width: img.width, height: img.height, pixels: img.pixels })
}

/// Convenience loader used by tests and the CLI: path or bundled default.
pub fn load_world(path: Option<&Path>) -> Result<World, SceneError> {
    match path {
        Some(p) => load_scene(p),
        None => Ok(World::default_scene()),
    }
}
