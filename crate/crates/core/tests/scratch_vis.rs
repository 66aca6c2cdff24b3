use glitchlab_core::bugs::{apply_bugs, BugController, BugKind, BugParams};
use glitchlab_core::render::{render_pair, Camera};
use glitchlab_core::scene::{Pose, World};
use glitchlab_core::geom::Vec3;
use glitchlab_core::ppm::write_p6;
use std::path::Path;

#[test]
fn dump_frames() {
    let world = World::default_scene();
    let out = Path::new("/tmp/vis");
    std::fs::create_dir_all(out).unwrap();
    let poses = [
        ("start", Pose::new(Vec3::new(0.0, 0.0, 0.0), 0.0)),
        ("corner", Pose::new(Vec3::new(-7.0, 0.0, 7.0), 5.6)),
        ("crate", Pose::new(Vec3::new(1.8, 0.0, 3.0), 0.0)),
        ("wall", Pose::new(Vec3::new(8.0, 0.0, 0.0), 0.0)),
    ];
    for (name, pose) in poses {
        let state = apply_bugs(&BugController::new(1), &world, 0).unwrap();
        let cam = Camera::at_agent(pose, 0.75);
        let (frame, _) = render_pair(&state, &cam, None);
        write_p6(&out.join(format!("obs_{name}.ppm")), &frame.to_image()).unwrap();
    }
    for kind in [BugKind::TextureMissing, BugKind::TextureCorruption, BugKind::ZFighting,
                 BugKind::GeometryCorruption, BugKind::CameraClipping, BugKind::ZClipping] {
        let c = BugController::new(1).enable(&world, kind, Some("crate_a"), BugParams::default())
            .or_else(|_| BugController::new(1).enable(&world, kind, None, BugParams::default())).unwrap();
        let state = apply_bugs(&c, &world, 3).unwrap();
        let pose = Pose::new(Vec3::new(1.8, 0.0, 3.0), 0.0);
        let cam = Camera::at_agent(pose, 0.75);
        let (frame, mask) = render_pair(&state, &cam, None);
        write_p6(&out.join(format!("bug_{}.ppm", kind.name())), &frame.to_image()).unwrap();
        write_p6(&out.join(format!("mask_{}.ppm", kind.name())), &mask.0.to_image()).unwrap();
    }
    // geometry clipping from inside
    let c = BugController::new(1).enable(&world, BugKind::GeometryClipping, Some("crate_a"), BugParams::default()).unwrap();
    let state = apply_bugs(&c, &world, 0).unwrap();
    let cam = Camera::at_agent(Pose::new(Vec3::new(4.0, 0.0, 3.0), 0.0), 0.75);
    let (frame, mask) = render_pair(&state, &cam, None);
    write_p6(&out.join("bug_geometry_clipping.ppm"), &frame.to_image()).unwrap();
    write_p6(&out.join("mask_geometry_clipping.ppm"), &mask.0.to_image()).unwrap();
}
