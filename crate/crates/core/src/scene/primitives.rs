//! Primitive mesh generators expanded at scene load.

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::geom::{Vec2, Vec3};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    /// Axis-aligned box centered at the origin.
    Box { size: [Scalar; 3] },
    /// Horizontal quad at y = 0 facing up.
    Plane { size: [Scalar; 2] },
    /// Ramp rising along +x; base rectangle sits at y = 0.
    Wedge { size: [Scalar; 3] },
}

impl Primitive {
    pub fn mesh(&self) -> Mesh {
        match *self {
            Primitive::Box { size } => box_mesh(size),
            Primitive::Plane { size } => plane_mesh(size),
            Primitive::Wedge { size } => wedge_mesh(size),
        }
    }
}

struct MeshBuilder {
    vertices: Vec<Vec3<Scalar>>,
    normals: Vec<Vec3<Scalar>>,
    uvs: Vec<Vec2<Scalar>>,
    triangles: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn new() -> Self {
        Self { vertices: Vec::new(), normals: Vec::new(), uvs: Vec::new(), triangles: Vec::new() }
    }

    /// Quad with corners in counter-clockwise order seen from outside.
    /// UVs tile in world units so textures repeat roughly once per meter.
    fn quad(
        &mut self,
        p00: Vec3<Scalar>,
        p10: Vec3<Scalar>,
        p11: Vec3<Scalar>,
        p01: Vec3<Scalar>,
        u_span: Scalar,
        v_span: Scalar,
    ) {
        let normal = (p10 - p00).cross(p01 - p00).normalized();
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&[p00, p10, p11, p01]);
        self.normals.extend_from_slice(&[normal; 4]);
        self.uvs.extend_from_slice(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(u_span, 0.0),
            Vec2::new(u_span, v_span),
            Vec2::new(0.0, v_span),
        ]);
        self.triangles.push([base, base + 1, base + 2]);
        self.triangles.push([base, base + 2, base + 3]);
    }

    fn tri(&mut self, p0: Vec3<Scalar>, p1: Vec3<Scalar>, p2: Vec3<Scalar>, uv_scale: Scalar) {
        let normal = (p1 - p0).cross(p2 - p0).normalized();
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&[p0, p1, p2]);
        self.normals.extend_from_slice(&[normal; 3]);
        self.uvs.extend_from_slice(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(uv_scale, 0.0),
            Vec2::new(uv_scale, uv_scale),
        ]);
        self.triangles.push([base, base + 1, base + 2]);
    }

    fn build(self) -> Mesh {
        Mesh { vertices: self.vertices, normals: self.normals, uvs: self.uvs, triangles: self.triangles }
    }
}

fn box_mesh(size: [Scalar; 3]) -> Mesh {
    let (hx, hy, hz) = (size[0] / 2.0, size[1] / 2.0, size[2] / 2.0);
    let v = |x: Scalar, y: Scalar, z: Scalar| Vec3::new(x, y, z);
    let mut b = MeshBuilder::new();
    // -x
    b.quad(v(-hx, -hy, -hz), v(-hx, -hy, hz), v(-hx, hy, hz), v(-hx, hy, -hz), size[2], size[1]);
    // +x
    b.quad(v(hx, -hy, hz), v(hx, -hy, -hz), v(hx, hy, -hz), v(hx, hy, hz), size[2], size[1]);
    // +y (top)
    b.quad(v(-hx, hy, hz), v(hx, hy, hz), v(hx, hy, -hz), v(-hx, hy, -hz), size[0], size[2]);
    // -y (bottom)
    b.quad(v(-hx, -hy, -hz), v(hx, -hy, -hz), v(hx, -hy, hz), v(-hx, -hy, hz), size[0], size[2]);
    // +z
    b.quad(v(-hx, -hy, hz), v(hx, -hy, hz), v(hx, hy, hz), v(-hx, hy, hz), size[0], size[1]);
    // -z
    b.quad(v(hx, -hy, -hz), v(-hx, -hy, -hz), v(-hx, hy, -hz), v(hx, hy, -hz), size[0], size[1]);
    b.build()
}

fn plane_mesh(size: [Scalar; 2]) -> Mesh {
    let (hx, hz) = (size[0] / 2.0, size[1] / 2.0);
    let mut b = MeshBuilder::new();
    b.quad(
        Vec3::new(-hx, 0.0, hz),
        Vec3::new(hx, 0.0, hz),
        Vec3::new(hx, 0.0, -hz),
        Vec3::new(-hx, 0.0, -hz),
        size[0],
        size[1],
    );
    b.build()
}

fn wedge_mesh(size: [Scalar; 3]) -> Mesh {
    let (hx, sy, hz) = (size[0] / 2.0, size[1], size[2] / 2.0);
    let v = |x: Scalar, y: Scalar, z: Scalar| Vec3::new(x, y, z);
    let slope_len = (size[0] * size[0] + sy * sy).sqrt();
    let mut b = MeshBuilder::new();
    // bottom (-y)
    b.quad(v(-hx, 0.0, -hz), v(hx, 0.0, -hz), v(hx, 0.0, hz), v(-hx, 0.0, hz), size[0], size[2]);
    // tall back face (+x)
    b.quad(v(hx, 0.0, hz), v(hx, 0.0, -hz), v(hx, sy, -hz), v(hx, sy, hz), size[2], sy);
    // slope
    b.quad(v(-hx, 0.0, -hz), v(-hx, 0.0, hz), v(hx, sy, hz), v(hx, sy, -hz), size[2], slope_len);
    // sides
    b.tri(v(-hx, 0.0, hz), v(hx, 0.0, hz), v(hx, sy, hz), size[0]);
    b.tri(v(hx, 0.0, -hz), v(-hx, 0.0, -hz), v(hx, sy, -hz), size[0]);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_mesh_is_valid_and_closed() {
        let m = Primitive::Box { size: [1.0, 2.0, 3.0] }.mesh();
        m.validate("box").unwrap();
        assert_eq!(m.triangles.len(), 12);
        assert_eq!(m.vertices.len(), 24);
    }

    #[test]
    fn box_normals_point_outward() {
        let m = Primitive::Box { size: [2.0, 2.0, 2.0] }.mesh();
        for (i, tri) in m.triangles.iter().enumerate() {
            let c = (m.vertices[tri[0] as usize]
                + m.vertices[tri[1] as usize]
                + m.vertices[tri[2] as usize])
                * (1.0 / 3.0);
            let n = m.normals[tri[0] as usize];
            assert!(c.dot(n) > 0.0, "triangle {i} normal points inward");
        }
    }

    #[test]
    fn winding_matches_stored_normals() {
        for prim in [
            Primitive::Box { size: [1.0, 1.5, 2.0] },
            Primitive::Plane { size: [4.0, 4.0] },
            Primitive::Wedge { size: [2.0, 1.0, 1.5] },
        ] {
            let m = prim.mesh();
            m.validate("prim").unwrap();
            for tri in &m.triangles {
                let a = m.vertices[tri[0] as usize];
                let b = m.vertices[tri[1] as usize];
                let c = m.vertices[tri[2] as usize];
                let geom_n = (b - a).cross(c - a).normalized();
                let stored = m.normals[tri[0] as usize];
                assert!(geom_n.dot(stored) > 0.99, "winding disagrees with normal in {prim:?}");
            }
        }
    }
}
