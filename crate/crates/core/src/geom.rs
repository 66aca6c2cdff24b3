//! Minimal vector/matrix types shared by the scene, renderer and agent.

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn length(self) -> T {
        self.dot(self).sqrt()
    }
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let len = self.length();
        if len == T::zero() {
            self
        } else {
            self * (T::one() / len)
        }
    }

    pub fn scale_by(self, s: Self) -> Self {
        Self::new(self.x * s.x, self.y * s.y, self.z * s.z)
    }
}

impl<T: Real> std::ops::Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> std::ops::Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> std::ops::Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> std::ops::Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> std::ops::Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> std::ops::Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// 2D affine map `p -> M p + t`, used for UV coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2<T> {
    pub m: [[T; 2]; 2],
    pub t: [T; 2],
}

impl<T: Real> Affine2<T> {
    pub fn identity() -> Self {
        Self {
            m: [[T::one(), T::zero()], [T::zero(), T::one()]],
            t: [T::zero(), T::zero()],
        }
    }

    pub fn apply(&self, p: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y + self.t[0],
            self.m[1][0] * p.x + self.m[1][1] * p.y + self.t[1],
        )
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

impl<T: Real> Default for Affine2<T> {
    fn default() -> Self {
        Self::identity()
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn empty() -> Self {
        Self {
            min: Vec3::new(T::infinity(), T::infinity(), T::infinity()),
            max: Vec3::new(T::neg_infinity(), T::neg_infinity(), T::neg_infinity()),
        }
    }

    pub fn expand(&mut self, p: Vec3<T>) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.min.z = self.min.z.min(p.z);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
        self.max.z = self.max.z.max(p.z);
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::of(0.5)
    }

    /// Radius of the bounding sphere around the box center.
    pub fn radius(&self) -> T {
        (self.max - self.center()).length()
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// True when the vertical slabs overlap and `(x, z)` lies within the
    /// footprint inflated by `pad` (circle-vs-box in the ground plane).
    pub fn blocks_circle(&self, x: T, z: T, pad: T, y_lo: T, y_hi: T) -> bool {
        if self.max.y < y_lo || self.min.y > y_hi {
            return false;
        }
        let cx = x.max(self.min.x).min(self.max.x);
        let cz = z.max(self.min.z).min(self.max.z);
        let dx = x - cx;
        let dz = z - cz;
        dx * dx + dz * dz <= pad * pad
    }
}

/// 8-bit RGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const BLACK: Rgb = Rgb(0, 0, 0);

    pub fn is_black(self) -> bool {
        self == Self::BLACK
    }

    /// Linear blend, `t` in [0, 1].
    pub fn lerp(self, other: Rgb, t: f32) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (a as f32 + (b as f32 - a as f32) * t).round() as u8;
        Rgb(mix(self.0, other.0), mix(self.1, other.1), mix(self.2, other.2))
    }

    /// Rotate hue by 180 degrees (complementary color), keeping luma roughly
    /// stable. Used to derive a visibly different copy of a texture.
    pub fn hue_flipped(self) -> Rgb {
        let max = self.0.max(self.1).max(self.2);
        let min = self.0.min(self.1).min(self.2);
        let s = max as i16 + min as i16;
        let inv = |c: u8| (s - c as i16).clamp(0, 255) as u8;
        Rgb(inv(self.0), inv(self.1), inv(self.2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_follows_right_hand_rule() {
        let x = Vec3::new(1.0f64, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn affine_identity_is_noop() {
        let a = Affine2::<f32>::identity();
        let p = Vec2::new(0.3, -1.7);
        assert_eq!(a.apply(p), p);
    }

    #[test]
    fn aabb_circle_overlap() {
        let mut b = Aabb::empty();
        b.expand(Vec3::new(-1.0f32, 0.0, -1.0));
        b.expand(Vec3::new(1.0, 2.0, 1.0));
        assert!(b.blocks_circle(1.2, 0.0, 0.3, 0.0, 1.0));
        assert!(!b.blocks_circle(1.4, 0.0, 0.3, 0.0, 1.0));
        // No vertical overlap.
        assert!(!b.blocks_circle(0.0, 0.0, 0.3, 3.0, 4.0));
    }

    #[test]
    fn hue_flip_changes_chromatic_colors() {
        assert_ne!(Rgb(200, 30, 30).hue_flipped(), Rgb(200, 30, 30));
        // Grays map to themselves.
        assert_eq!(Rgb(128, 128, 128).hue_flipped(), Rgb(128, 128, 128));
    }
}
