//! Scene file schema (JSON) and the load/serialize pair.
//!
//! Files declare objects either as primitives (expanded at load) or explicit
//! meshes. Textures are referenced by path (binary PPM, resolved relative to
//! the scene file) or embedded inline as base64; `serialize_world` always
//! embeds inline so a serialized world is self-contained.

use std::path::Path;
use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    texture_from_ppm, BugTag, FloorSpec, Mesh, NavParams, ObjectRole, Primitive, SceneError,
    SceneObject, Skybox, StartPose, Texture, Transform, World,
};
use crate::agent::NavGrid;
use crate::geom::{Affine2, Vec3};
use crate::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    floor: FloorSection,
    #[serde(default)]
    nav: NavParams,
    #[serde(default = "default_start")]
    agent_start: StartPose,
    #[serde(default)]
    skybox: Skybox,
    #[serde(default)]
    objects: Vec<ObjectEntry>,
}

fn default_start() -> StartPose {
    StartPose { position: Vec3::zero(), yaw_deg: 0.0 }
}

#[derive(Debug, Serialize, Deserialize)]
struct FloorSection {
    size: [Scalar; 2],
    #[serde(default)]
    height: Scalar,
    #[serde(default)]
    texture: Option<TextureRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bug_tag: Option<BugTag>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectEntry {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    primitive: Option<Primitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh: Option<Mesh>,
    #[serde(default)]
    texture: Option<TextureRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uv_transform: Option<Affine2<Scalar>>,
    #[serde(default)]
    transform: TransformEntry,
    #[serde(default = "default_true")]
    collidable: bool,
    #[serde(default)]
    layer: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bug_tag: Option<BugTag>,
    #[serde(default)]
    role: ObjectRole,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct TransformEntry {
    #[serde(default)]
    position: [Scalar; 3],
    #[serde(default)]
    yaw_deg: Scalar,
    #[serde(default = "default_scale")]
    scale: [Scalar; 3],
}

fn default_scale() -> [Scalar; 3] {
    [1.0, 1.0, 1.0]
}

impl TransformEntry {
    fn to_transform(&self) -> Transform {
        Transform {
            position: Vec3::new(self.position[0], self.position[1], self.position[2]),
            yaw_deg: self.yaw_deg,
            scale: Vec3::new(self.scale[0], self.scale[1], self.scale[2]),
        }
    }

    fn from_transform(t: &Transform) -> Self {
        Self {
            position: [t.position.x, t.position.y, t.position.z],
            yaw_deg: t.yaw_deg,
            scale: [t.scale.x, t.scale.y, t.scale.z],
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TextureRef {
    Path(String),
    Inline { width: usize, height: usize, data_b64: String },
}

/// Loads and validates a scene file; texture paths resolve relative to it.
pub fn load_scene(path: &Path) -> Result<World, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SceneError::Io { path: path.display().to_string(), source: e })?;
    let dir = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    parse_scene_str(&text, &move |rel: &str| {
        let p = dir.join(rel);
        std::fs::read(&p).map_err(|e| SceneError::Io { path: p.display().to_string(), source: e })
    })
}

/// Parses scene JSON, fetching texture bytes through `fetch`.
pub fn parse_scene_str(
    text: &str,
    fetch: &dyn Fn(&str) -> Result<Vec<u8>, SceneError>,
) -> Result<World, SceneError> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut objects = Vec::with_capacity(file.objects.len() + 1);

    // floor expands to a plane object owned by the Floor role
    let floor_mesh = Primitive::Plane { size: file.floor.size }.mesh();
    objects.push(SceneObject {
        id: "floor".to_string(),
        mesh: Arc::new(floor_mesh),
        texture: resolve_texture(&file.floor.texture, fetch)?,
        uv_transform: Affine2::identity(),
        transform: Transform {
            position: Vec3::new(0.0, file.floor.height, 0.0),
            ..Transform::default()
        },
        collidable: true,
        render_layer: 0,
        bug_tag: file.floor.bug_tag,
        role: ObjectRole::Floor,
    });

    for entry in &file.objects {
        if entry.id == "floor" {
            return Err(SceneError::Validation("object id \"floor\" is reserved".into()));
        }
        let mesh = match (&entry.primitive, &entry.mesh) {
            (Some(p), None) => p.mesh(),
            (None, Some(m)) => m.clone(),
            _ => {
                return Err(SceneError::Validation(format!(
                    "object {:?} must define exactly one of primitive/mesh",
                    entry.id
                )))
            }
        };
        objects.push(SceneObject {
            id: entry.id.clone(),
            mesh: Arc::new(mesh),
            texture: resolve_texture(&entry.texture, fetch)?,
            uv_transform: entry.uv_transform.unwrap_or_default(),
            transform: entry.transform.to_transform(),
            collidable: entry.collidable,
            render_layer: entry.layer,
            bug_tag: entry.bug_tag,
            role: entry.role,
        });
    }

    let floor = FloorSpec { size: file.floor.size, height: file.floor.height };
    let nav = NavGrid::build(
        floor,
        &objects,
        file.nav.cell_size,
        file.nav.agent_radius,
        file.nav.agent_height,
    );
    let world = World {
        objects,
        floor,
        nav_params: file.nav,
        nav,
        skybox: file.skybox,
        agent_start: file.agent_start,
    };
    world.validate()?;
    Ok(world)
}

fn resolve_texture(
    r: &Option<TextureRef>,
    fetch: &dyn Fn(&str) -> Result<Vec<u8>, SceneError>,
) -> Result<Option<Arc<Texture>>, SceneError> {
    match r {
        None => Ok(None),
        Some(TextureRef::Path(p)) => {
            let bytes = fetch(p)?;
            Ok(Some(Arc::new(texture_from_ppm(p, &bytes)?)))
        }
        Some(TextureRef::Inline { width, height, data_b64 }) => {
            let pixels = base64::engine::general_purpose::STANDARD
                .decode(data_b64)
                .map_err(|e| SceneError::Texture { path: "<inline>".into(), message: e.to_string() })?;
            if pixels.len() != width * height * 3 {
                return Err(SceneError::Texture {
                    path: "<inline>".into(),
                    message: format!(
                        "expected {} bytes for {width}x{height}, got {}",
                        width * height * 3,
                        pixels.len()
                    ),
                });
            }
            Ok(Some(Arc::new(Texture { width: *width, height: *height, pixels })))
        }
    }
}

fn inline_texture(t: &Option<Arc<Texture>>) -> Option<TextureRef> {
    t.as_ref().map(|t| TextureRef::Inline {
        width: t.width,
        height: t.height,
        data_b64: base64::engine::general_purpose::STANDARD.encode(&t.pixels),
    })
}

/// Serializes a world back to scene JSON (meshes explicit, textures inline).
/// Parsing the output yields a world equal to the input.
pub fn serialize_world(world: &World) -> String {
    let floor_obj = world
        .objects
        .iter()
        .find(|o| o.role == ObjectRole::Floor)
        .expect("world has a floor object");
    let file = SceneFile {
        floor: FloorSection {
            size: world.floor.size,
            height: world.floor.height,
            texture: inline_texture(&floor_obj.texture),
            bug_tag: floor_obj.bug_tag,
        },
        nav: world.nav_params,
        agent_start: world.agent_start,
        skybox: world.skybox,
        objects: world
            .objects
            .iter()
            .filter(|o| o.role != ObjectRole::Floor)
            .map(|o| ObjectEntry {
                id: o.id.clone(),
                primitive: None,
                mesh: Some((*o.mesh).clone()),
                texture: inline_texture(&o.texture),
                uv_transform: if o.uv_transform.is_identity() { None } else { Some(o.uv_transform) },
                transform: TransformEntry::from_transform(&o.transform),
                collidable: o.collidable,
                layer: o.render_layer,
                bug_tag: o.bug_tag,
                role: o.role,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("scene serialization cannot fail")
}
