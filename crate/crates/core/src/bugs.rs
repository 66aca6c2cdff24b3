//! The global bug controller and the ten perceptual-bug injectors.
//!
//! Each injector answers two questions: how the bug manifests in the
//! observation, and where the mask camera should paint its tag. Applying
//! bugs is a pure function of (controller, world, frame index), so enabling
//! and disabling a bug is exactly reversible.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Affine2, Rgb};
use crate::scene::{BugTag, ObjectRole, Texture, World, MISSING_TEXTURE_COLOR};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugKind {
    CameraClipping,
    TextureCorruption,
    TextureMissing,
    ZClipping,
    ZFighting,
    GeometryCorruption,
    BlackScreen,
    ScreenTear,
    GeometryClipping,
    BoundaryHole,
}

impl BugKind {
    pub const ALL: [BugKind; 10] = [
        BugKind::CameraClipping,
        BugKind::TextureCorruption,
        BugKind::TextureMissing,
        BugKind::ZClipping,
        BugKind::ZFighting,
        BugKind::GeometryCorruption,
        BugKind::BlackScreen,
        BugKind::ScreenTear,
        BugKind::GeometryClipping,
        BugKind::BoundaryHole,
    ];

    /// Mask color for this kind. Colors are pairwise distinct and never
    /// black (black is the mask background).
    pub fn tag_color(self) -> Rgb {
        match self {
            BugKind::CameraClipping => Rgb(255, 0, 0),
            BugKind::TextureCorruption => Rgb(255, 128, 0),
            BugKind::TextureMissing => Rgb(255, 255, 0),
            BugKind::ZClipping => Rgb(0, 255, 255),
            BugKind::ZFighting => Rgb(0, 0, 255),
            BugKind::GeometryCorruption => Rgb(128, 0, 255),
            BugKind::BlackScreen => Rgb(255, 255, 255),
            BugKind::ScreenTear => Rgb(0, 255, 0),
            BugKind::GeometryClipping => Rgb(255, 0, 128),
            BugKind::BoundaryHole => Rgb(128, 255, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BugKind::CameraClipping => "camera_clipping",
            BugKind::TextureCorruption => "texture_corruption",
            BugKind::TextureMissing => "texture_missing",
            BugKind::ZClipping => "z_clipping",
            BugKind::ZFighting => "z_fighting",
            BugKind::GeometryCorruption => "geometry_corruption",
            BugKind::BlackScreen => "black_screen",
            BugKind::ScreenTear => "screen_tear",
            BugKind::GeometryClipping => "geometry_clipping",
            BugKind::BoundaryHole => "boundary_hole",
        }
    }
}

impl std::str::FromStr for BugKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BugKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown bug kind {s:?}"))
    }
}

impl std::fmt::Display for BugKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-kind parameters; unused fields are ignored by other kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BugParams {
    /// Camera clipping: override for the near plane (baseline is 0.1).
    pub near_plane: Scalar,
    /// Texture corruption: UV scale magnitude range.
    pub uv_scale_range: [Scalar; 2],
    /// Texture corruption: UV shear range.
    pub uv_shear_range: [Scalar; 2],
    /// Geometry corruption: per-vertex displacement bound as a fraction of
    /// the mesh bounding radius, resampled every frame.
    pub max_jitter_frac: Scalar,
    /// Screen tear: how many frames back the stale rows come from.
    pub tear_lag: usize,
    /// Screen tear: fraction of frames torn while the bug is enabled.
    pub tear_duty: f64,
    /// Boundary hole: side length of the collision-free floor patch.
    pub hole_size: Scalar,
    /// Boundary hole: explicit patch center; seeded placement when absent.
    pub hole_center: Option<[Scalar; 2]>,
}

impl Default for BugParams {
    fn default() -> Self {
        Self {
            near_plane: 1.0,
            uv_scale_range: [3.0, 8.0],
            uv_shear_range: [-1.0, 1.0],
            max_jitter_frac: 0.15,
            tear_lag: 1,
            tear_duty: 0.3,
            hole_size: 2.0,
            hole_center: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BugError {
    #[error("bug {kind}: target object {id:?} does not exist")]
    UnknownTarget { kind: BugKind, id: String },
    #[error("bug {kind}: target {id:?} not usable: {reason}")]
    IneligibleTarget { kind: BugKind, id: String, reason: String },
    #[error("bug {kind}: no eligible target object in the scene")]
    NoEligibleTarget { kind: BugKind },
    #[error("bug {kind}: invalid parameters: {message}")]
    InvalidParams { kind: BugKind, message: String },
}

/// One enabled bug with its (possibly defaulted) target and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugSpec {
    pub kind: BugKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub params: BugParams,
}

/// The global controller: the set of enabled bugs plus the episode seed that
/// drives every randomized choice the injectors make.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BugController {
    pub bugs: Vec<BugSpec>,
    pub rng_seed: u64,
}

fn kind_salt(kind: BugKind) -> u64 {
    0x9e37_79b9_7f4a_7c15u64.wrapping_mul(kind as u64 + 1)
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl BugController {
    pub fn new(rng_seed: u64) -> Self {
        Self { bugs: Vec::new(), rng_seed }
    }

    pub fn is_enabled(&self, kind: BugKind) -> bool {
        self.bugs.iter().any(|b| b.kind == kind)
    }

    pub fn spec(&self, kind: BugKind) -> Option<&BugSpec> {
        self.bugs.iter().find(|b| b.kind == kind)
    }

    /// Enables a bug, validating parameters and the target against the
    /// world. Re-enabling a kind replaces its previous configuration.
    pub fn enable(
        &self,
        world: &World,
        kind: BugKind,
        target: Option<&str>,
        params: BugParams,
    ) -> Result<Self, BugError> {
        validate_params(kind, &params)?;
        if let Some(id) = target {
            let obj = world
                .object(id)
                .ok_or_else(|| BugError::UnknownTarget { kind, id: id.to_string() })?;
            check_eligible(kind, obj.id.as_str(), obj.role, obj.texture.is_some())?;
        } else if needs_target(kind) && eligible_ids(world, kind).is_empty() {
            return Err(BugError::NoEligibleTarget { kind });
        }
        let mut c = self.clone();
        c.bugs.retain(|b| b.kind != kind);
        c.bugs.push(BugSpec { kind, target: target.map(str::to_string), params });
        c.bugs.sort_by_key(|b| b.kind);
        Ok(c)
    }

    pub fn disable(&self, kind: BugKind) -> Self {
        let mut c = self.clone();
        c.bugs.retain(|b| b.kind != kind);
        c
    }

    /// Controller restricted to `kinds` (used by window scheduling).
    pub fn restricted(&self, kinds: &BTreeSet<BugKind>) -> Self {
        Self {
            bugs: self.bugs.iter().filter(|b| kinds.contains(&b.kind)).cloned().collect(),
            rng_seed: self.rng_seed,
        }
    }

    /// Deterministic target choice for every enabled bug that takes one:
    /// the explicit target when given, otherwise a seeded uniform pick among
    /// eligible objects.
    pub fn resolved_targets(&self, world: &World) -> Result<Vec<(BugKind, String)>, BugError> {
        let mut out = Vec::new();
        for spec in &self.bugs {
            if !needs_target(spec.kind) {
                continue;
            }
            let id = match &spec.target {
                Some(id) => {
                    let obj = world
                        .object(id)
                        .ok_or_else(|| BugError::UnknownTarget { kind: spec.kind, id: id.clone() })?;
                    check_eligible(spec.kind, &obj.id, obj.role, obj.texture.is_some())?;
                    id.clone()
                }
                None => {
                    let ids = eligible_ids(world, spec.kind);
                    if ids.is_empty() {
                        return Err(BugError::NoEligibleTarget { kind: spec.kind });
                    }
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(splitmix64(self.rng_seed ^ kind_salt(spec.kind)));
                    ids[rng.gen_range(0..ids.len())].clone()
                }
            };
            out.push((spec.kind, id));
        }
        Ok(out)
    }
}

fn needs_target(kind: BugKind) -> bool {
    !matches!(kind, BugKind::CameraClipping | BugKind::BlackScreen | BugKind::ScreenTear)
}

fn check_eligible(kind: BugKind, id: &str, role: ObjectRole, has_texture: bool) -> Result<(), BugError> {
    let fail = |reason: &str| {
        Err(BugError::IneligibleTarget { kind, id: id.to_string(), reason: reason.to_string() })
    };
    match kind {
        BugKind::TextureCorruption if !has_texture => fail("object has no texture to corrupt"),
        BugKind::BoundaryHole if role != ObjectRole::Floor => fail("boundary hole targets the floor"),
        BugKind::GeometryClipping if role == ObjectRole::Floor => {
            fail("geometry clipping targets a non-floor object")
        }
        _ => Ok(()),
    }
}

fn eligible_ids(world: &World, kind: BugKind) -> Vec<String> {
    match kind {
        BugKind::BoundaryHole => world
            .objects
            .iter()
            .filter(|o| o.role == ObjectRole::Floor)
            .map(|o| o.id.clone())
            .collect(),
        BugKind::TextureCorruption | BugKind::TextureMissing => world
            .objects
            .iter()
            .filter(|o| o.role == ObjectRole::Prop && o.texture.is_some())
            .map(|o| o.id.clone())
            .collect(),
        _ => world
            .objects
            .iter()
            .filter(|o| o.role == ObjectRole::Prop)
            .map(|o| o.id.clone())
            .collect(),
    }
}

fn validate_params(kind: BugKind, p: &BugParams) -> Result<(), BugError> {
    let fail = |message: String| Err(BugError::InvalidParams { kind, message });
    match kind {
        BugKind::CameraClipping if !(p.near_plane > 0.0) => {
            fail(format!("near_plane must be positive, got {}", p.near_plane))
        }
        BugKind::TextureCorruption if p.uv_scale_range[0] > p.uv_scale_range[1] => {
            fail("uv_scale_range must be ordered".into())
        }
        BugKind::GeometryCorruption if !(p.max_jitter_frac >= 0.0) => {
            fail("max_jitter_frac must be nonnegative".into())
        }
        BugKind::ScreenTear if p.tear_lag == 0 => fail("tear_lag must be at least 1".into()),
        BugKind::ScreenTear if !(p.tear_duty > 0.0 && p.tear_duty <= 1.0) => {
            fail("tear_duty must be in (0, 1]".into())
        }
        BugKind::BoundaryHole if !(p.hole_size > 0.0) => fail("hole_size must be positive".into()),
        _ => Ok(()),
    }
}

/// Whole-frame effects applied after geometry, in the order listed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameEffect {
    /// Replace the frame with black; the mask becomes all black-screen tag.
    BlackScreen,
    /// Rows from `row_frac` of the height downward come from the frame
    /// `lag` steps back; the mask stamps those rows with the tear tag.
    ScreenTear { row_frac: f32, lag: usize },
}

/// Fully resolved per-frame bug state handed to the renderer and the agent.
#[derive(Debug, Clone)]
pub struct BugState {
    /// World with all structural modifications applied (tags, textures,
    /// layers, duplicates, per-frame geometry jitter).
    pub world: World,
    /// Collision boxes, taken before visual-only geometry changes.
    pub colliders: Vec<Aabb<Scalar>>,
    pub near_plane_override: Option<Scalar>,
    pub effects: Vec<FrameEffect>,
    /// Objects whose visible back faces are labeled as geometry clipping.
    pub geo_clip_targets: Vec<String>,
    /// Floor rectangles with collision removed (`[x0, z0, x1, z1]`).
    pub floor_holes: Vec<[Scalar; 4]>,
    pub frame_index: u64,
    pub rng_seed: u64,
}

impl BugState {
    /// State with no bugs: identity world, no effects.
    pub fn baseline(world: &World, frame_index: u64, rng_seed: u64) -> Self {
        Self {
            world: world.clone(),
            colliders: crate::agent::collect_colliders(world),
            near_plane_override: None,
            effects: Vec::new(),
            geo_clip_targets: Vec::new(),
            floor_holes: Vec::new(),
            frame_index,
            rng_seed,
        }
    }
}

/// Resolves the controller against a world for one frame. Pure: the same
/// (controller, world, frame_index) always produces the same state.
pub fn apply_bugs(
    controller: &BugController,
    world: &World,
    frame_index: u64,
) -> Result<BugState, BugError> {
    let mut state = BugState::baseline(world, frame_index, controller.rng_seed);
    if controller.bugs.is_empty() {
        return Ok(state);
    }
    let targets = controller.resolved_targets(world)?;
    let target_of = |kind: BugKind| -> Option<&str> {
        targets.iter().find(|(k, _)| *k == kind).map(|(_, id)| id.as_str())
    };
    let episode_rng =
        |kind: BugKind| ChaCha8Rng::seed_from_u64(splitmix64(controller.rng_seed ^ kind_salt(kind)));
    let frame_rng = |kind: BugKind| {
        ChaCha8Rng::seed_from_u64(splitmix64(
            splitmix64(controller.rng_seed ^ kind_salt(kind)) ^ frame_index,
        ))
    };

    let mut collision_changed = false;

    // structural pass: everything except per-frame visual jitter
    for spec in &controller.bugs {
        match spec.kind {
            BugKind::CameraClipping => {
                state.near_plane_override = Some(spec.params.near_plane);
            }
            BugKind::BlackScreen => {
                state.effects.push(FrameEffect::BlackScreen);
            }
            BugKind::ScreenTear => {
                let mut rng = frame_rng(spec.kind);
                let torn = rng.gen_bool(spec.params.tear_duty);
                let row_frac = rng.gen_range(0.05f32..0.95);
                if torn && frame_index >= spec.params.tear_lag as u64 {
                    state
                        .effects
                        .push(FrameEffect::ScreenTear { row_frac, lag: spec.params.tear_lag });
                }
            }
            BugKind::TextureMissing => {
                let id = target_of(spec.kind).expect("resolved");
                let idx = state.world.object_index(id).expect("resolved target exists");
                state.world.objects[idx].texture = None;
                state.world.objects[idx].bug_tag = Some(BugTag::of(spec.kind));
            }
            BugKind::TextureCorruption => {
                let id = target_of(spec.kind).expect("resolved");
                let idx = state.world.object_index(id).expect("resolved target exists");
                let mut rng = episode_rng(spec.kind);
                let s = spec.params.uv_scale_range;
                let sh = spec.params.uv_shear_range;
                let mag = |rng: &mut ChaCha8Rng| {
                    let m = rng.gen_range(s[0]..=s[1]);
                    if rng.gen_bool(0.5) {
                        -m
                    } else {
                        m
                    }
                };
                let sx = mag(&mut rng);
                let sy = mag(&mut rng);
                let shx = rng.gen_range(sh[0]..=sh[1]);
                let shy = rng.gen_range(sh[0]..=sh[1]);
                state.world.objects[idx].uv_transform =
                    Affine2 { m: [[sx, shx], [shy, sy]], t: [0.0, 0.0] };
                state.world.objects[idx].bug_tag = Some(BugTag::of(spec.kind));
            }
            BugKind::ZClipping => {
                let id = target_of(spec.kind).expect("resolved");
                let idx = state.world.object_index(id).expect("resolved target exists");
                state.world.objects[idx].render_layer = 1;
                state.world.objects[idx].bug_tag = Some(BugTag::of(spec.kind));
            }
            BugKind::ZFighting => {
                let id = target_of(spec.kind).expect("resolved");
                let idx = state.world.object_index(id).expect("resolved target exists");
                state.world.objects[idx].bug_tag = Some(BugTag::of(spec.kind));
                let mut dup = state.world.objects[idx].clone();
                dup.id = format!("{id}__zfight");
                dup.texture = match &state.world.objects[idx].texture {
                    Some(t) => Some(Arc::new(t.hue_flipped())),
                    None => Some(Arc::new(solid_texture(MISSING_TEXTURE_COLOR.hue_flipped()))),
                };
                dup.collidable = false;
                state.world.objects.insert(idx + 1, dup);
            }
            BugKind::GeometryClipping => {
                let id = target_of(spec.kind).expect("resolved");
                let idx = state.world.object_index(id).expect("resolved target exists");
                if state.world.objects[idx].collidable {
                    state.world.objects[idx].collidable = false;
                    collision_changed = true;
                }
                state.geo_clip_targets.push(id.to_string());
            }
            BugKind::BoundaryHole => {
                let center = match spec.params.hole_center {
                    Some(c) => c,
                    None => {
                        let mut rng = episode_rng(spec.kind);
                        let cells: Vec<_> = world.nav.walkable_cells().collect();
                        let (ix, iz) = cells[rng.gen_range(0..cells.len())];
                        let c = world.nav.cell_center(ix, iz);
                        [c.x, c.y]
                    }
                };
                let h = spec.params.hole_size / 2.0;
                state
                    .floor_holes
                    .push([center[0] - h, center[1] - h, center[0] + h, center[1] + h]);
            }
            BugKind::GeometryCorruption => {} // visual pass below
        }
    }

    if collision_changed {
        state.world.rebuild_nav();
    }
    state.colliders = crate::agent::collect_colliders(&state.world);

    // visual pass: per-frame vertex jitter, after collision boxes were taken
    for spec in &controller.bugs {
        if spec.kind != BugKind::GeometryCorruption {
            continue;
        }
        let id = target_of(spec.kind).expect("resolved");
        let idx = state.world.object_index(id).expect("resolved target exists");
        let obj = &mut state.world.objects[idx];
        let mut bounds = crate::geom::Aabb::empty();
        for &v in &obj.mesh.vertices {
            bounds.expand(v);
        }
        let amp = spec.params.max_jitter_frac * bounds.radius() / (3.0f32).sqrt();
        let mut rng = frame_rng(spec.kind);
        let mut mesh = (*obj.mesh).clone();
        for v in &mut mesh.vertices {
            v.x += rng.gen_range(-amp..=amp);
            v.y += rng.gen_range(-amp..=amp);
            v.z += rng.gen_range(-amp..=amp);
        }
        obj.mesh = Arc::new(mesh);
        obj.bug_tag = Some(BugTag::of(spec.kind));
    }

    Ok(state)
}

fn solid_texture(c: Rgb) -> Texture {
    Texture { width: 2, height: 2, pixels: [c.0, c.1, c.2].repeat(4) }
}

/// Checked-in poses in the default scene where each bug kind reliably shows
/// tagged pixels of its own color in the mask.
pub mod golden {
    use super::*;
    use crate::render::{render_mask, Camera};
    use crate::scene::Pose;
    use crate::geom::Vec3;

    pub struct GoldenPose {
        pub kind: BugKind,
        /// Explicit target in the default scene, when the kind takes one.
        pub target: Option<&'static str>,
        /// Agent pose (feet position plus yaw).
        pub pose: Pose,
        /// Frames to render; most kinds need one, screen tear needs a run
        /// long enough for a torn frame to occur.
        pub frames: usize,
    }

    /// One scripted pose per bug kind, tuned against the bundled scene.
    pub fn golden_poses() -> Vec<GoldenPose> {
        let at = |x: f32, z: f32, yaw: f32| Pose::new(Vec3::new(x, 0.0, z), yaw);
        vec![
            // facing crate_a (at x=4, z=3) from half a meter: the raised
            // near plane culls its front face
            GoldenPose {
                kind: BugKind::CameraClipping,
                target: None,
                pose: at(2.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose {
                kind: BugKind::TextureCorruption,
                target: Some("crate_a"),
                pose: at(1.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose {
                kind: BugKind::TextureMissing,
                target: Some("crate_a"),
                pose: at(1.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose {
                kind: BugKind::ZClipping,
                target: Some("crate_a"),
                pose: at(1.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose {
                kind: BugKind::ZFighting,
                target: Some("crate_a"),
                pose: at(1.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose {
                kind: BugKind::GeometryCorruption,
                target: Some("crate_a"),
                pose: at(1.8, 3.0, 0.0),
                frames: 1,
            },
            GoldenPose { kind: BugKind::BlackScreen, target: None, pose: at(0.0, 0.0, 0.0), frames: 1 },
            GoldenPose { kind: BugKind::ScreenTear, target: None, pose: at(0.0, 0.0, 0.0), frames: 40 },
            // standing inside crate_a with its collision off: only its back
            // faces are visible
            GoldenPose {
                kind: BugKind::GeometryClipping,
                target: Some("crate_a"),
                pose: at(4.0, 3.0, 0.0),
                frames: 1,
            },
            // fallen through the floor: the sky renders below floor height
            GoldenPose {
                kind: BugKind::BoundaryHole,
                target: None,
                pose: Pose::new(Vec3::new(0.0, -2.0, 0.0), 0.0),
                frames: 1,
            },
        ]
    }

    /// Renders the golden pose for a kind and returns how many mask pixels
    /// carry exactly that kind's tag color, along with any pixels of other
    /// (stray) tag colors.
    pub fn check(world: &World, golden: &GoldenPose, eye_height: f32) -> Result<(usize, usize), BugError> {
        let controller = BugController::new(17).enable(
            world,
            golden.kind,
            golden.target,
            BugParams::default(),
        )?;
        let want = golden.kind.tag_color();
        let mut own = 0usize;
        let mut stray = 0usize;
        for frame_index in 0..golden.frames {
            let state = apply_bugs(&controller, world, frame_index as u64)?;
            let camera = Camera::at_agent(golden.pose, eye_height);
            let mask = render_mask(&state, &camera);
            own += mask.count_color(want);
            stray += mask.tagged_count() - mask.count_color(want);
        }
        Ok((own, stray))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_kinds_with_distinct_nonblack_colors() {
        let mut seen = std::collections::HashSet::new();
        for k in BugKind::ALL {
            let c = k.tag_color();
            assert!(!c.is_black(), "{k} tag color must not be black");
            assert!(seen.insert(c), "{k} color collides");
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BugKind::ALL {
            assert_eq!(k.name().parse::<BugKind>().unwrap(), k);
        }
        assert!("flicker".parse::<BugKind>().is_err());
    }

    #[test]
    fn empty_controller_is_identity() {
        let world = World::default_scene();
        let c = BugController::new(7);
        let s = apply_bugs(&c, &world, 3).unwrap();
        assert_eq!(s.world, world);
        assert!(s.effects.is_empty());
        assert!(s.near_plane_override.is_none());
        assert!(s.floor_holes.is_empty());
    }

    #[test]
    fn texture_missing_strips_texture_and_tags() {
        let world = World::default_scene();
        let c = BugController::new(1)
            .enable(&world, BugKind::TextureMissing, Some("crate_a"), BugParams::default())
            .unwrap();
        let s = apply_bugs(&c, &world, 0).unwrap();
        let obj = s.world.object("crate_a").unwrap();
        assert!(obj.texture.is_none());
        assert_eq!(obj.bug_tag, Some(BugTag::of(BugKind::TextureMissing)));
        // other objects untouched
        assert_eq!(s.world.object("crate_b"), world.object("crate_b"));
    }

    #[test]
    fn zfighting_duplicates_in_place() {
        let world = World::default_scene();
        let c = BugController::new(1)
            .enable(&world, BugKind::ZFighting, Some("slab"), BugParams::default())
            .unwrap();
        let s = apply_bugs(&c, &world, 0).unwrap();
        let orig = s.world.object("slab").unwrap();
        let dup = s.world.object("slab__zfight").unwrap();
        assert_eq!(orig.transform, dup.transform);
        assert_eq!(orig.mesh, dup.mesh);
        assert_ne!(orig.texture, dup.texture);
        assert_eq!(orig.bug_tag, Some(BugTag::of(BugKind::ZFighting)));
        assert_eq!(dup.bug_tag, Some(BugTag::of(BugKind::ZFighting)));
    }

    #[test]
    fn geometry_corruption_moves_vertices_within_bound_every_frame() {
        let world = World::default_scene();
        let params = BugParams::default();
        let c = BugController::new(9)
            .enable(&world, BugKind::GeometryCorruption, Some("crate_a"), params.clone())
            .unwrap();
        let base = world.object("crate_a").unwrap().mesh.clone();
        let mut bounds = crate::geom::Aabb::empty();
        for &v in &base.vertices {
            bounds.expand(v);
        }
        let max_jitter = params.max_jitter_frac * bounds.radius() + 1e-5;

        let s0 = apply_bugs(&c, &world, 0).unwrap();
        let s1 = apply_bugs(&c, &world, 1).unwrap();
        let m0 = &s0.world.object("crate_a").unwrap().mesh;
        let m1 = &s1.world.object("crate_a").unwrap().mesh;
        assert_ne!(m0.vertices, m1.vertices, "jitter must differ between frames");
        for (a, b) in base.vertices.iter().zip(m0.vertices.iter()) {
            assert!((*b - *a).length() <= max_jitter);
        }
        // pure: same frame twice gives identical vertices
        let s0b = apply_bugs(&c, &world, 0).unwrap();
        assert_eq!(m0.vertices, s0b.world.object("crate_a").unwrap().mesh.vertices);
        // collision boxes stay the originals
        assert_eq!(s0.colliders, crate::agent::collect_colliders(&world));
    }

    #[test]
    fn enable_disable_returns_to_baseline() {
        let world = World::default_scene();
        for kind in BugKind::ALL {
            let c = BugController::new(3).enable(&world, kind, None, BugParams::default()).unwrap();
            let off = c.disable(kind);
            assert_eq!(off.bugs.len(), 0);
            let s = apply_bugs(&off, &world, 5).unwrap();
            assert_eq!(s.world, world, "disable({kind}) must restore the world");
            assert!(s.effects.is_empty() && s.near_plane_override.is_none());
        }
    }

    #[test]
    fn enable_validates() {
        let world = World::default_scene();
        let c = BugController::new(0);
        assert!(matches!(
            c.enable(&world, BugKind::TextureMissing, Some("ghost"), BugParams::default()),
            Err(BugError::UnknownTarget { .. })
        ));
        let bad = BugParams { near_plane: -2.0, ..BugParams::default() };
        assert!(matches!(
            c.enable(&world, BugKind::CameraClipping, None, bad),
            Err(BugError::InvalidParams { .. })
        ));
        assert!(matches!(
            c.enable(&world, BugKind::BoundaryHole, Some("crate_a"), BugParams::default()),
            Err(BugError::IneligibleTarget { .. })
        ));
    }

    #[test]
    fn default_target_pick_is_seeded_and_eligible() {
        let world = World::default_scene();
        let c = BugController::new(21)
            .enable(&world, BugKind::TextureMissing, None, BugParams::default())
            .unwrap();
        let t1 = c.resolved_targets(&world).unwrap();
        let t2 = c.resolved_targets(&world).unwrap();
        assert_eq!(t1, t2);
        let id = &t1[0].1;
        let obj = world.object(id).unwrap();
        assert_eq!(obj.role, ObjectRole::Prop);
        assert!(obj.texture.is_some());
        // different seed can pick a different object but stays deterministic
        let c2 = BugController { rng_seed: 22, ..c.clone() };
        assert_eq!(c2.resolved_targets(&world).unwrap(), c2.resolved_targets(&world).unwrap());
    }

    #[test]
    fn boundary_hole_has_a_patch_of_the_requested_size() {
        let world = World::default_scene();
        let c = BugController::new(2)
            .enable(&world, BugKind::BoundaryHole, None, BugParams::default())
            .unwrap();
        let s = apply_bugs(&c, &world, 0).unwrap();
        assert_eq!(s.floor_holes.len(), 1);
        let h = s.floor_holes[0];
        assert!((h[2] - h[0] - 2.0).abs() < 1e-5);
        assert!((h[3] - h[1] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn geometry_clipping_opens_nav_cells() {
        let world = World::default_scene();
        let c = BugController::new(4)
            .enable(&world, BugKind::GeometryClipping, Some("crate_c"), BugParams::default())
            .unwrap();
        let s = apply_bugs(&c, &world, 0).unwrap();
        assert!(!s.world.object("crate_c").unwrap().collidable);
        assert!(s.world.nav.walkable_count() > world.nav.walkable_count());
        // the crate's footprint no longer appears among collision boxes
        assert_eq!(s.colliders.len(), crate::agent::collect_colliders(&world).len() - 1);
    }
}
