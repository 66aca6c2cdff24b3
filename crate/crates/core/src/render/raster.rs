//! Fixed-point half-space triangle rasterization.
//!
//! Screen coordinates snap to 1/16-pixel integers; edge functions and the
//! fill rule then run entirely in integer arithmetic, which is what makes
//! frames bit-identical across platforms. Pixels sample at their centers
//! with a top-left fill rule, so triangles sharing an edge cover every
//! interior pixel exactly once.

/// Projected vertex with perspective-correct attribute setup.
#[derive(Debug, Clone, Copy)]
pub struct ScreenVertex {
    pub x: f64,
    pub y: f64,
    /// 1 / view depth.
    pub inv_z: f64,
    pub u_over_z: f64,
    pub v_over_z: f64,
}

const SUB: i64 = 16; // subpixel resolution

fn snap(v: f64) -> i64 {
    (v * SUB as f64).round() as i64
}

/// Orientation of the snapped triangle: `Some(true)` for a front face
/// (counter-clockwise seen from the camera), `Some(false)` for a back face,
/// `None` when degenerate at subpixel resolution.
pub fn orientation(v: &[ScreenVertex; 3]) -> Option<bool> {
    let (x0, y0) = (snap(v[0].x), snap(v[0].y));
    let (x1, y1) = (snap(v[1].x), snap(v[1].y));
    let (x2, y2) = (snap(v[2].x), snap(v[2].y));
    let area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
    if area2 == 0 {
        None
    } else {
        // screen y grows downward, so a camera-facing counter-clockwise
        // triangle has negative signed area
        Some(area2 < 0)
    }
}

fn is_top_left(dx: i64, dy: i64) -> bool {
    dy < 0 || (dy == 0 && dx > 0)
}

/// Rasterizes a triangle, calling `emit(x, y, l0, l1, l2)` for every covered
/// pixel with barycentric weights in the order the vertices were passed.
/// Back faces are reordered internally; coverage is identical either way.
pub fn raster_triangle(
    v: &[ScreenVertex; 3],
    width: usize,
    height: usize,
    emit: &mut impl FnMut(usize, usize, f64, f64, f64),
) {
    let mut idx = [0usize, 1, 2];
    let mut pts = [(snap(v[0].x), snap(v[0].y)), (snap(v[1].x), snap(v[1].y)), (snap(v[2].x), snap(v[2].y))];
    let area2 =
        (pts[1].0 - pts[0].0) * (pts[2].1 - pts[0].1) - (pts[1].1 - pts[0].1) * (pts[2].0 - pts[0].0);
    if area2 == 0 {
        return;
    }
    if area2 < 0 {
        pts.swap(1, 2);
        idx.swap(1, 2);
    }
    let area2 = area2.abs();
    let [(x0, y0), (x1, y1), (x2, y2)] = pts;

    let min_x = x0.min(x1).min(x2);
    let max_x = x0.max(x1).max(x2);
    let min_y = y0.min(y1).min(y2);
    let max_y = y0.max(y1).max(y2);
    // pixel p samples at coordinate 16 p + 8
    let px_min = ((min_x - 8).div_euclid(SUB)).max(0);
    let px_max = ((max_x - 8).div_euclid(SUB) + 1).min(width as i64 - 1);
    let py_min = ((min_y - 8).div_euclid(SUB)).max(0);
    let py_max = ((max_y - 8).div_euclid(SUB) + 1).min(height as i64 - 1);
    if px_min > px_max || py_min > py_max {
        return;
    }

    // edge i is opposite vertex i
    let edges = [(x2 - x1, y2 - y1, x1, y1), (x0 - x2, y0 - y2, x2, y2), (x1 - x0, y1 - y0, x0, y0)];
    let mut e_row = [0i64; 3];
    let mut bias = [0i64; 3];
    let mut de_x = [0i64; 3];
    let mut de_y = [0i64; 3];
    let (sx, sy) = (px_min * SUB + 8, py_min * SUB + 8);
    for (i, &(dx, dy, ax, ay)) in edges.iter().enumerate() {
        e_row[i] = dx * (sy - ay) - dy * (sx - ax);
        de_x[i] = -dy * SUB;
        de_y[i] = dx * SUB;
        bias[i] = if is_top_left(dx, dy) { 0 } else { -1 };
    }

    let inv_area = 1.0 / area2 as f64;
    let mut lam = [0.0f64; 3];
    for py in py_min..=py_max {
        let mut e = e_row;
        for px in px_min..=px_max {
            if e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0 {
                // weights follow the (possibly swapped) local order; map back
                lam[idx[0]] = e[0] as f64 * inv_area;
                lam[idx[1]] = e[1] as f64 * inv_area;
                lam[idx[2]] = e[2] as f64 * inv_area;
                emit(px as usize, py as usize, lam[0], lam[1], lam[2]);
            }
            for i in 0..3 {
                e[i] += de_x[i];
            }
        }
        for i in 0..3 {
            e_row[i] += de_y[i];
        }
    }
}

/// Vertex in view space carrying interpolated attributes through clipping.
#[derive(Debug, Clone, Copy)]
pub struct ViewVertex {
    pub x: f64,
    pub y: f64,
    /// View depth along the camera forward axis.
    pub z: f64,
    pub u: f64,
    pub v: f64,
}

fn lerp_vv(a: &ViewVertex, b: &ViewVertex, t: f64) -> ViewVertex {
    ViewVertex {
        x: a.x + (b.x - a.x) * t,
        y: a.y + (b.y - a.y) * t,
        z: a.z + (b.z - a.z) * t,
        u: a.u + (b.u - a.u) * t,
        v: a.v + (b.v - a.v) * t,
    }
}

/// Clips a polygon against the near plane `z >= near` (Sutherland-Hodgman).
pub fn clip_near(poly: &[ViewVertex], near: f64, out: &mut Vec<ViewVertex>) {
    out.clear();
    let n = poly.len();
    for i in 0..n {
        let cur = &poly[i];
        let next = &poly[(i + 1) % n];
        let cur_in = cur.z >= near;
        let next_in = next.z >= near;
        if cur_in {
            out.push(*cur);
        }
        if cur_in != next_in {
            let t = (near - cur.z) / (next.z - cur.z);
            out.push(lerp_vv(cur, next, t));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: f64, y: f64) -> ScreenVertex {
        ScreenVertex { x, y, inv_z: 1.0, u_over_z: 0.0, v_over_z: 0.0 }
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        // split a quad along both diagonals; every interior pixel must be
        // covered exactly once per split
        let quads = [
            [(3.2, 2.7), (17.8, 3.1), (18.4, 14.9), (2.6, 15.3)],
            [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)],
            [(1.5, 1.5), (12.5, 2.5), (13.5, 12.5), (0.5, 11.5)],
        ];
        for q in quads {
            let mut counts = vec![0u32; 24 * 24];
            let p: Vec<ScreenVertex> = q.iter().map(|&(x, y)| sv(x, y)).collect();
            let mut emit = |x: usize, y: usize, _: f64, _: f64, _: f64| counts[y * 24 + x] += 1;
            raster_triangle(&[p[0], p[1], p[2]], 24, 24, &mut emit);
            raster_triangle(&[p[0], p[2], p[3]], 24, 24, &mut emit);
            for (i, &c) in counts.iter().enumerate() {
                assert!(c <= 1, "pixel ({}, {}) covered {c} times in quad {q:?}", i % 24, i / 24);
            }
            let covered: u32 = counts.iter().sum();
            assert!(covered > 50, "quad barely covered: {covered}");
        }
    }

    #[test]
    fn barycentrics_sum_to_one_and_match_vertex_order() {
        let tri = [sv(2.0, 2.0), sv(20.0, 2.0), sv(2.0, 20.0)];
        let mut seen = 0;
        raster_triangle(&tri, 24, 24, &mut |x, y, l0, l1, l2| {
            seen += 1;
            assert!((l0 + l1 + l2 - 1.0).abs() < 1e-12);
            // near vertex 1 (right), l1 dominates
            if x >= 17 && y <= 3 {
                assert!(l1 > 0.7, "at ({x},{y}): {l0} {l1} {l2}");
            }
        });
        assert!(seen > 100);

        // back-face order gives identical coverage and weights per vertex
        let tri_rev = [tri[0], tri[2], tri[1]];
        let mut cover_a = Vec::new();
        raster_triangle(&tri, 24, 24, &mut |x, y, l0, l1, l2| cover_a.push((x, y, l0, l1, l2)));
        let mut cover_b = Vec::new();
        raster_triangle(&tri_rev, 24, 24, &mut |x, y, l0, l1, l2| cover_b.push((x, y, l0, l2, l1)));
        assert_eq!(cover_a.len(), cover_b.len());
        for (a, b) in cover_a.iter().zip(&cover_b) {
            assert_eq!((a.0, a.1), (b.0, b.1));
            assert!((a.2 - b.2).abs() < 1e-12 && (a.3 - b.3).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_triangles_are_skipped() {
        let tri = [sv(1.0, 1.0), sv(5.0, 5.0), sv(9.0, 9.0)];
        assert_eq!(orientation(&tri), None);
        let mut hits = 0;
        raster_triangle(&tri, 16, 16, &mut |_, _, _, _, _| hits += 1);
        assert_eq!(hits, 0);
    }

    #[test]
    fn near_clip_splits_crossing_polygons() {
        let poly = [
            ViewVertex { x: 0.0, y: 0.0, z: -1.0, u: 0.0, v: 0.0 },
            ViewVertex { x: 1.0, y: 0.0, z: 3.0, u: 1.0, v: 0.0 },
            ViewVertex { x: -1.0, y: 0.0, z: 3.0, u: 0.0, v: 1.0 },
        ];
        let mut out = Vec::new();
        clip_near(&poly, 1.0, &mut out);
        assert_eq!(out.len(), 4);
        for v in &out {
            assert!(v.z >= 1.0 - 1e-12);
        }
        // fully in front: unchanged
        let poly2 = [
            ViewVertex { x: 0.0, y: 0.0, z: 2.0, u: 0.0, v: 0.0 },
            ViewVertex { x: 1.0, y: 0.0, z: 3.0, u: 0.0, v: 0.0 },
            ViewVertex { x: -1.0, y: 0.0, z: 3.0, u: 0.0, v: 0.0 },
        ];
        clip_near(&poly2, 1.0, &mut out);
        assert_eq!(out.len(), 3);
        // fully behind: nothing
        let poly3 = [
            ViewVertex { x: 0.0, y: 0.0, z: 0.2, u: 0.0, v: 0.0 },
            ViewVertex { x: 1.0, y: 0.0, z: 0.3, u: 0.0, v: 0.0 },
            ViewVertex { x: -1.0, y: 0.0, z: 0.1, u: 0.0, v: 0.0 },
        ];
        clip_near(&poly3, 1.0, &mut out);
        assert!(out.is_empty());
    }
}
