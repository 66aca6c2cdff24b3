//! Deterministic software renderer producing, per step, the player-view
//! observation and the bug-mask label image.
//!
//! Geometry goes through one fixed-point rasterization pass into a small
//! g-buffer (winning object, facing, UV, flat shade); the observation and
//! the mask are then shaded from the same buffer. All floating-point math
//! is plain IEEE arithmetic and the rasterizer interior is integer, so a
//! given (world, camera, bug state, frame, seed) renders the same bytes on
//! every platform.

mod raster;

pub use raster::{clip_near, orientation, raster_triangle, ScreenVertex, ViewVertex};

use crate::bugs::{splitmix64, BugState, FrameEffect};
use crate::geom::{Rgb, Vec3};
use crate::ppm::Image;
use crate::scene::{Pose, MISSING_TEXTURE_COLOR};
use crate::Scalar;

/// Depth difference treated as a tie; ties resolve by a per-pixel hash so
/// coplanar surfaces produce the mixed, frame-varying look of z-fighting.
pub const Z_TIE_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub pose: Pose,
    /// Vertical field of view, radians.
    pub vertical_fov: Scalar,
    pub near: Scalar,
    pub far: Scalar,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(pose: Pose) -> Self {
        Self {
            pose,
            vertical_fov: (60.0f32).to_radians(),
            near: 0.1,
            far: 100.0,
            width: crate::FRAME_DIM,
            height: crate::FRAME_DIM,
        }
    }

    /// Camera at the agent's eye for its current pose.
    pub fn at_agent(pose: Pose, eye_height: Scalar) -> Self {
        Self::new(Pose { position: pose.position + Vec3::new(0.0, eye_height, 0.0), yaw: pose.yaw })
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(format!("need 0 < near < far, got {} / {}", self.near, self.far));
        }
        if !(self.vertical_fov > 0.0 && (self.vertical_fov as f64) < std::f64::consts::PI) {
            return Err(format!("fov out of (0, pi): {}", self.vertical_fov));
        }
        if self.width == 0 || self.height == 0 {
            return Err("zero resolution".into());
        }
        Ok(())
    }

    pub fn with_near(&self, near: Scalar) -> Self {
        Self { near, ..*self }
    }

    fn basis(&self) -> CamBasis {
        let (s, c) = crate::num::det_sincos(self.pose.yaw as f64);
        let forward = [c, 0.0, -s];
        let right = [s, 0.0, c]; // forward x up
        let up = [0.0, 1.0, 0.0];
        let (sin_h, cos_h) = crate::num::det_sincos(self.vertical_fov as f64 / 2.0);
        let half_h = sin_h / cos_h;
        let half_w = half_h * self.width as f64 / self.height as f64;
        CamBasis {
            eye: [self.pose.position.x as f64, self.pose.position.y as f64, self.pose.position.z as f64],
            forward,
            right,
            up,
            half_w,
            half_h,
        }
    }
}

struct CamBasis {
    eye: [f64; 3],
    forward: [f64; 3],
    right: [f64; 3],
    up: [f64; 3],
    half_w: f64,
    half_h: f64,
}

impl CamBasis {
    fn to_view(&self, p: Vec3<Scalar>) -> [f64; 3] {
        let d = [p.x as f64 - self.eye[0], p.y as f64 - self.eye[1], p.z as f64 - self.eye[2]];
        [dot3(d, self.right), dot3(d, self.up), dot3(d, self.forward)]
    }

    /// Unnormalized world ray through pixel center; forward component is 1.
    fn pixel_ray(&self, px: usize, py: usize, width: usize, height: usize) -> [f64; 3] {
        let ndc_x = (2.0 * (px as f64 + 0.5) / width as f64 - 1.0) * self.half_w;
        let ndc_y = (1.0 - 2.0 * (py as f64 + 0.5) / height as f64) * self.half_h;
        [
            self.forward[0] + self.right[0] * ndc_x + self.up[0] * ndc_y,
            self.forward[1] + self.right[1] * ndc_x + self.up[1] * ndc_y,
            self.forward[2] + self.right[2] * ndc_x + self.up[2] * ndc_y,
        ]
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Projects a world point. `None` when the point lies in front of the near
/// plane (view depth < near). Returns continuous pixel coordinates and the
/// view depth.
pub fn project_vertex(camera: &Camera, p: Vec3<Scalar>) -> Option<(f64, f64, f64)> {
    let b = camera.basis();
    let [x, y, z] = b.to_view(p);
    if z < camera.near as f64 {
        return None;
    }
    let px = (x / (z * b.half_w) + 1.0) * 0.5 * camera.width as f64;
    let py = (1.0 - y / (z * b.half_h)) * 0.5 * camera.height as f64;
    Some((px, py, z))
}

/// Channel-major (3 x H x W) 8-bit frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; 3 * width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let plane = self.width * self.height;
        let i = y * self.width + x;
        Rgb(self.data[i], self.data[plane + i], self.data[2 * plane + i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let plane = self.width * self.height;
        let i = y * self.width + x;
        self.data[i] = c.0;
        self.data[plane + i] = c.1;
        self.data[2 * plane + i] = c.2;
    }

    /// Copy rows `[from_row, height)` of `src` into this frame.
    pub fn splice_rows_from(&mut self, src: &Frame, from_row: usize) {
        assert_eq!((self.width, self.height), (src.width, src.height));
        let plane = self.width * self.height;
        for c in 0..3 {
            let lo = c * plane + from_row * self.width;
            let hi = (c + 1) * plane;
            self.data[lo..hi].copy_from_slice(&src.data[lo..hi]);
        }
    }

    pub fn to_image(&self) -> Image {
        let mut img = Image::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                img.set(x, y, self.get(x, y));
            }
        }
        img
    }
}

/// Bug-mask frame: same layout as [`Frame`], black background, tagged
/// pixels in bug tag colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame(pub Frame);

impl MaskFrame {
    pub fn new(width: usize, height: usize) -> Self {
        MaskFrame(Frame::new(width, height))
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.0.get(x, y)
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.0.set(x, y, c)
    }

    /// Number of non-black (labeled) pixels.
    pub fn tagged_count(&self) -> usize {
        let mut n = 0;
        for y in 0..self.0.height {
            for x in 0..self.0.width {
                if !self.get(x, y).is_black() {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn count_color(&self, c: Rgb) -> usize {
        let mut n = 0;
        for y in 0..self.0.height {
            for x in 0..self.0.width {
                if self.get(x, y) == c {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Per-pixel view depth; initialized to the far plane.
#[derive(Debug, Clone)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthBuffer {
    pub fn new(width: usize, height: usize, far: Scalar) -> Self {
        Self { width, height, data: vec![far as f64; width * height] }
    }
}

const NO_OBJ: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Frag {
    obj: u32,
    back: bool,
    u: f32,
    v: f32,
    shade: f32,
}

impl Default for Frag {
    fn default() -> Self {
        Self { obj: NO_OBJ, back: false, u: 0.0, v: 0.0, shade: 1.0 }
    }
}

struct GBuffer {
    width: usize,
    height: usize,
    frags: Vec<Frag>,
    depth: DepthBuffer,
}

fn zfight_pick_new(x: usize, y: usize, frame_index: u64, seed: u64) -> bool {
    let h = splitmix64(
        splitmix64(seed ^ frame_index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
            ^ ((x as u64) << 24 | y as u64),
    );
    h & 1 == 1
}

/// Directional light for the flat shading of the observation pass.
const LIGHT_DIR: [f64; 3] = [0.386_695_11, 0.842_137_62, 0.376_029_27];

/// Rasterizes the world (with bug modifications) once. `cull_back` controls
/// back-face culling: the observation pass culls, the mask pass renders
/// back faces and records which pixels they won.
fn render_geometry(state: &BugState, camera: &Camera, cull_back: bool) -> GBuffer {
    let (w, h) = (camera.width, camera.height);
    let mut gbuf = GBuffer {
        width: w,
        height: h,
        frags: vec![Frag::default(); w * h],
        depth: DepthBuffer::new(w, h, camera.far),
    };
    let basis = camera.basis();
    let near = camera.near as f64;
    let far = camera.far as f64;

    // layer-0 base pass with depth testing, then higher layers in order
    // without depth testing (they always land on top)
    let mut order: Vec<usize> = (0..state.world.objects.len()).collect();
    order.sort_by_key(|&i| state.world.objects[i].render_layer);

    let mut poly: Vec<ViewVertex> = Vec::with_capacity(8);
    let mut clipped: Vec<ViewVertex> = Vec::with_capacity(8);

    for &obj_idx in &order {
        let obj = &state.world.objects[obj_idx];
        let layered = obj.render_layer > 0;
        for tri in &obj.mesh.triangles {
            let wp: Vec<Vec3<Scalar>> =
                tri.iter().map(|&i| obj.transform.apply(obj.mesh.vertices[i as usize])).collect();
            // flat shade from the world-space geometric normal
            let e1 = wp[1] - wp[0];
            let e2 = wp[2] - wp[0];
            let n = e1.cross(e2).normalized();
            let lambert = dot3([n.x as f64, n.y as f64, n.z as f64], LIGHT_DIR).max(0.0);
            let shade = (0.55 + 0.45 * lambert) as f32;

            poly.clear();
            for (k, &vi) in tri.iter().enumerate() {
                let uv = obj.uv_transform.apply(obj.mesh.uvs[vi as usize]);
                let [x, y, z] = basis.to_view(wp[k]);
                poly.push(ViewVertex { x, y, z, u: uv.x as f64, v: uv.y as f64 });
            }
            clip_near(&poly, near, &mut clipped);
            if clipped.len() < 3 {
                continue;
            }
            // project clipped polygon and fan-triangulate
            let proj: Vec<ScreenVertex> = clipped
                .iter()
                .map(|v| {
                    let px = (v.x / (v.z * basis.half_w) + 1.0) * 0.5 * w as f64;
                    let py = (1.0 - v.y / (v.z * basis.half_h)) * 0.5 * h as f64;
                    ScreenVertex {
                        x: px,
                        y: py,
                        inv_z: 1.0 / v.z,
                        u_over_z: v.u / v.z,
                        v_over_z: v.v / v.z,
                    }
                })
                .collect();
            for k in 1..proj.len() - 1 {
                let tri_screen = [proj[0], proj[k], proj[k + 1]];
                let front = match orientation(&tri_screen) {
                    None => continue,
                    Some(f) => f,
                };
                if cull_back && !front {
                    continue;
                }
                let frag = Frag { obj: obj_idx as u32, back: !front, u: 0.0, v: 0.0, shade };
                let frags = &mut gbuf.frags;
                let depth = &mut gbuf.depth.data;
                raster_triangle(&tri_screen, w, h, &mut |x, y, l0, l1, l2| {
                    let inv_z =
                        l0 * tri_screen[0].inv_z + l1 * tri_screen[1].inv_z + l2 * tri_screen[2].inv_z;
                    let z = 1.0 / inv_z;
                    if z >= far {
                        return;
                    }
                    let i = y * w + x;
                    let take = if layered {
                        true
                    } else {
                        let d = depth[i];
                        let dz = z - d;
                        if dz.abs() < Z_TIE_EPS {
                            zfight_pick_new(x, y, state.frame_index, state.rng_seed)
                        } else {
                            dz < 0.0
                        }
                    };
                    if !take {
                        return;
                    }
                    depth[i] = z;
                    let u = (l0 * tri_screen[0].u_over_z
                        + l1 * tri_screen[1].u_over_z
                        + l2 * tri_screen[2].u_over_z)
                        * z;
                    let v = (l0 * tri_screen[0].v_over_z
                        + l1 * tri_screen[1].v_over_z
                        + l2 * tri_screen[2].v_over_z)
                        * z;
                    frags[i] = Frag { u: u as f32, v: v as f32, ..frag };
                });
            }
        }
    }
    gbuf
}

fn shade_observation(gbuf: &GBuffer, state: &BugState, camera: &Camera) -> Frame {
    let mut frame = Frame::new(gbuf.width, gbuf.height);
    let basis = camera.basis();
    for y in 0..gbuf.height {
        for x in 0..gbuf.width {
            let f = &gbuf.frags[y * gbuf.width + x];
            let color = if f.obj == NO_OBJ {
                let r = basis.pixel_ray(x, y, gbuf.width, gbuf.height);
                let len = dot3(r, r).sqrt();
                state.world.skybox.color(Vec3::new(
                    (r[0] / len) as f32,
                    (r[1] / len) as f32,
                    (r[2] / len) as f32,
                ))
            } else {
                let obj = &state.world.objects[f.obj as usize];
                let base = match &obj.texture {
                    Some(t) => t.sample_wrap(f.u, f.v),
                    None => MISSING_TEXTURE_COLOR,
                };
                let s = f.shade;
                Rgb(
                    (base.0 as f32 * s).round().clamp(0.0, 255.0) as u8,
                    (base.1 as f32 * s).round().clamp(0.0, 255.0) as u8,
                    (base.2 as f32 * s).round().clamp(0.0, 255.0) as u8,
                )
            };
            frame.set(x, y, color);
        }
    }
    frame
}

fn shade_mask(gbuf: &GBuffer, state: &BugState, camera: &Camera) -> MaskFrame {
    let mut mask = MaskFrame::new(gbuf.width, gbuf.height);
    let basis = camera.basis();
    let far = camera.far as f64;
    let floor_y = state.world.floor_height() as f64;
    let cam_clip = state.near_plane_override.is_some();
    let geo_clip: Vec<u32> = state
        .geo_clip_targets
        .iter()
        .filter_map(|id| state.world.object_index(id).map(|i| i as u32))
        .collect();

    for y in 0..gbuf.height {
        for x in 0..gbuf.width {
            let f = &gbuf.frags[y * gbuf.width + x];
            let color = if f.obj == NO_OBJ {
                // sky: label the below-floor rule (map holes / out of bounds)
                let r = basis.pixel_ray(x, y, gbuf.width, gbuf.height);
                let y_at_far = basis.eye[1] + r[1] * far;
                if y_at_far < floor_y {
                    crate::bugs::BugKind::BoundaryHole.tag_color()
                } else {
                    Rgb::BLACK
                }
            } else {
                let obj = &state.world.objects[f.obj as usize];
                if f.back && cam_clip {
                    crate::bugs::BugKind::CameraClipping.tag_color()
                } else if f.back && geo_clip.contains(&f.obj) {
                    crate::bugs::BugKind::GeometryClipping.tag_color()
                } else {
                    obj.bug_tag.map(|t| t.color).unwrap_or(Rgb::BLACK)
                }
            };
            if !color.is_black() {
                mask.set(x, y, color);
            }
        }
    }
    mask
}

fn tear_row(frac: f32, height: usize) -> usize {
    ((frac * height as f32) as usize).clamp(1, height - 1)
}

fn apply_observation_effects(frame: &mut Frame, state: &BugState, tear_source: Option<&Frame>) {
    for eff in &state.effects {
        match *eff {
            FrameEffect::BlackScreen => frame.data.fill(0),
            FrameEffect::ScreenTear { row_frac, .. } => {
                if let Some(src) = tear_source {
                    frame.splice_rows_from(src, tear_row(row_frac, frame.height));
                }
            }
        }
    }
}

fn apply_mask_effects(mask: &mut MaskFrame, state: &BugState) {
    for eff in &state.effects {
        match *eff {
            FrameEffect::BlackScreen => {
                let c = crate::bugs::BugKind::BlackScreen.tag_color();
                for y in 0..mask.0.height {
                    for x in 0..mask.0.width {
                        mask.set(x, y, c);
                    }
                }
            }
            FrameEffect::ScreenTear { row_frac, .. } => {
                let c = crate::bugs::BugKind::ScreenTear.tag_color();
                for y in tear_row(row_frac, mask.0.height)..mask.0.height {
                    for x in 0..mask.0.width {
                        mask.set(x, y, c);
                    }
                }
            }
        }
    }
}

/// Effective camera for a bug state (camera clipping overrides the near plane).
fn effective_camera(camera: &Camera, state: &BugState) -> Camera {
    match state.near_plane_override {
        Some(n) => camera.with_near(n),
        None => *camera,
    }
}

/// Renders the player-view observation. `tear_source` supplies the stale
/// frame for an active screen tear (the first `lag` frames have none).
pub fn render_observation(state: &BugState, camera: &Camera, tear_source: Option<&Frame>) -> Frame {
    let cam = effective_camera(camera, state);
    let gbuf = render_geometry(state, &cam, true);
    let mut frame = shade_observation(&gbuf, state, &cam);
    apply_observation_effects(&mut frame, state, tear_source);
    frame
}

/// Renders the bug-mask label image.
pub fn render_mask(state: &BugState, camera: &Camera) -> MaskFrame {
    let cam = effective_camera(camera, state);
    let gbuf = render_geometry(state, &cam, false);
    let mut mask = shade_mask(&gbuf, state, &cam);
    apply_mask_effects(&mut mask, state);
    mask
}

/// Observation and mask for one step. Equivalent to calling
/// [`render_observation`] and [`render_mask`] separately.
pub fn render_pair(
    state: &BugState,
    camera: &Camera,
    tear_source: Option<&Frame>,
) -> (Frame, MaskFrame) {
    (render_observation(state, camera, tear_source), render_mask(state, camera))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::NavGrid;
    use crate::geom::Vec2;
    use crate::scene::{FloorSpec, NavParams, Skybox, StartPose, World};

    fn sky_only_world() -> World {
        World {
            objects: Vec::new(),
            floor: FloorSpec { size: [4.0, 4.0], height: 0.0 },
            nav_params: NavParams::default(),
            nav: NavGrid::from_cells(1.0, Vec2::new(-2.0, -2.0), 4, 4, vec![true; 16]),
            skybox: Skybox::default(),
            agent_start: StartPose { position: Vec3::zero(), yaw_deg: 0.0 },
        }
    }

    fn default_cam() -> Camera {
        Camera::new(Pose::new(Vec3::new(0.0, 0.75, 0.0), 0.0))
    }

    #[test]
    fn project_center_and_edges() {
        let cam = default_cam();
        let d = (cam.near + cam.far) / 2.0;
        let p = cam.pose.position + cam.pose.forward() * d;
        let (px, py, depth) = project_vertex(&cam, p).unwrap();
        assert!((px - 42.0).abs() < 1e-6, "px = {px}");
        assert!((py - 42.0).abs() < 1e-6, "py = {py}");
        assert!((depth - d as f64).abs() < 1e-4);

        // half the near distance: culled
        let too_close = cam.pose.position + cam.pose.forward() * (0.5 * cam.near);
        assert!(project_vertex(&cam, too_close).is_none());

        // top frustum edge lands on row 0
        let (s, c) = crate::num::det_sincos(cam.vertical_fov as f64 / 2.0);
        let top = cam.pose.position
            + cam.pose.forward() * (d as Scalar)
            + Vec3::new(0.0, (d as f64 * s / c) as Scalar, 0.0);
        let (_, py_top, _) = project_vertex(&cam, top).unwrap();
        assert!(py_top.abs() < 1e-3, "py_top = {py_top}");
    }

    #[test]
    fn empty_world_renders_pure_skybox() {
        let world = sky_only_world();
        let state = BugState::baseline(&world, 0, 0);
        let cam = default_cam();
        let frame = render_observation(&state, &cam, None);
        let basis = cam.basis();
        for y in 0..cam.height {
            for x in 0..cam.width {
                let r = basis.pixel_ray(x, y, cam.width, cam.height);
                let len = dot3(r, r).sqrt();
                let want = world.skybox.color(Vec3::new(
                    (r[0] / len) as f32,
                    (r[1] / len) as f32,
                    (r[2] / len) as f32,
                ));
                assert_eq!(frame.get(x, y), want, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let world = World::default_scene();
        let state = BugState::baseline(&world, 3, 99);
        let cam = default_cam();
        let a = render_observation(&state, &cam, None);
        let b = render_observation(&state, &cam, None);
        assert_eq!(a, b);
        let (pair_frame, pair_mask) = render_pair(&state, &cam, None);
        assert_eq!(a, pair_frame);
        assert_eq!(render_mask(&state, &cam), pair_mask);
    }

    #[test]
    fn default_scene_shows_floor_and_sky() {
        let world = World::default_scene();
        let state = BugState::baseline(&world, 0, 0);
        let cam = default_cam();
        let frame = render_observation(&state, &cam, None);
        // bottom center: the gray floor texture (r ~= g, slightly blue)
        let bottom = frame.get(42, 80);
        assert!(bottom.0.abs_diff(bottom.1) <= 2, "expected gray floor, got {bottom:?}");
        assert!(bottom.2 >= bottom.0 && bottom.2 - bottom.0 <= 8, "expected gray floor, got {bottom:?}");
        assert!(bottom.0 > 40, "floor should not be black, got {bottom:?}");
        // top rows above the walls: sky gradient (blue dominates strongly)
        let top = frame.get(42, 2);
        assert!(top.2 > top.0 + 30, "expected blue sky, got {top:?}");
    }

    #[test]
    fn closed_box_hides_its_back_faces() {
        // camera outside a crate sees its textured front faces; the interior
        // (back faces) never wins a pixel in the observation pass
        let world = World::default_scene();
        let state = BugState::baseline(&world, 0, 0);
        // stand in front of crate_a (at 4, 3) looking at it
        let cam = Camera::at_agent(Pose::new(Vec3::new(1.8, 0.0, 3.0), 0.0), 0.75);
        let gbuf = render_geometry(&state, &cam, true);
        let crate_idx = world.object_index("crate_a").unwrap() as u32;
        let mut crate_px = 0;
        for f in &gbuf.frags {
            if f.obj == crate_idx {
                crate_px += 1;
                assert!(!f.back, "observation pass must never keep back faces");
            }
        }
        assert!(crate_px > 100, "crate should be prominently visible, got {crate_px} px");
    }

    #[test]
    fn no_bugs_means_all_black_mask() {
        let world = World::default_scene();
        let cam = default_cam();
        for frame_index in 0..4 {
            let state = BugState::baseline(&world, frame_index, 7);
            let mask = render_mask(&state, &cam);
            assert_eq!(mask.tagged_count(), 0);
        }
    }

    #[test]
    fn depth_buffer_entries_stay_in_range() {
        let world = World::default_scene();
        let state = BugState::baseline(&world, 0, 0);
        let cam = default_cam();
        let gbuf = render_geometry(&state, &cam, true);
        for &d in &gbuf.depth.data {
            assert!(d >= cam.near as f64 && d <= cam.far as f64);
        }
    }

    #[test]
    fn screen_tear_splices_previous_frame_rows() {
        let world = World::default_scene();
        let cam = default_cam();
        let prev_state = BugState::baseline(&world, 0, 1);
        let prev = render_observation(&prev_state, &cam, None);

        let mut state = BugState::baseline(&world, 1, 1);
        state.effects.push(FrameEffect::ScreenTear { row_frac: 0.5, lag: 1 });
        // make the current view differ: rotate the camera
        let cam2 = Camera::new(Pose::new(Vec3::new(0.0, 0.75, 0.0), 1.2));
        let torn = render_observation(&state, &cam2, Some(&prev));
        let clean = {
            let s = BugState::baseline(&world, 1, 1);
            render_observation(&s, &cam2, None)
        };
        let row = tear_row(0.5, cam.height);
        for y in 0..cam.height {
            for x in 0..cam.width {
                if y >= row {
                    assert_eq!(torn.get(x, y), prev.get(x, y), "stale row {y}");
                } else {
                    assert_eq!(torn.get(x, y), clean.get(x, y), "fresh row {y}");
                }
            }
        }
        let mask = render_mask(&state, &cam2);
        let tear_color = crate::bugs::BugKind::ScreenTear.tag_color();
        assert_eq!(mask.count_color(tear_color), (cam.height - row) * cam.width);
        assert_eq!(mask.tagged_count(), (cam.height - row) * cam.width);
    }

    #[test]
    fn black_screen_blanks_frame_and_fills_mask() {
        let world = World::default_scene();
        let cam = default_cam();
        let mut state = BugState::baseline(&world, 0, 1);
        state.effects.push(FrameEffect::BlackScreen);
        let frame = render_observation(&state, &cam, None);
        assert!(frame.data.iter().all(|&b| b == 0));
        let mask = render_mask(&state, &cam);
        assert_eq!(mask.tagged_count(), cam.width * cam.height);
        assert_eq!(
            mask.count_color(crate::bugs::BugKind::BlackScreen.tag_color()),
            cam.width * cam.height
        );
    }
}
