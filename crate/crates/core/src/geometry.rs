//! Pinhole camera model and rigid transforms.
//!
//! Poses are camera-from-world: `x_cam = R * x_world + t`. Integer pixel
//! coordinates name pixel centers, so `(0, 0)` is the center of the top-left
//! pixel. No lens distortion is modeled.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points at or in front of the camera closer than this are not projected.
pub const DEFAULT_Z_MIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Squared Euclidean distance. Every nearest-neighbor path uses this exact
    /// expression so that results compare bit-for-bit.
    #[inline]
    pub fn distance_squared(&self, o: &Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        self.distance_squared(o).sqrt()
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn axis(&self, axis: usize) -> T {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Vec3<U> {
        Vec3::new(
            U::of(self.x.to_f64_lossy()),
            U::of(self.y.to_f64_lossy()),
            U::of(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `selfᵀ · v`
    #[inline]
    pub fn transpose_mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }
}

/// Quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n == T::zero() {
            return Self::identity();
        }
        let half = angle / T::of(2.0);
        let s = half.sin() / n;
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if !n.is_finite() || n == T::zero() {
            return None;
        }
        Some(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * o`.
    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation_matrix(&self) -> Mat3<T> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let one = T::one();
        let two = T::of(2.0);
        Mat3([
            [
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ],
        ])
    }
}

/// Numeric view identifier, unique across all traversals of a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewId(pub u32);

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ViewId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse().map(ViewId)
    }
}

/// Continuous pixel position.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pixel<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> Pixel<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    /// Integer pixel whose center is nearest.
    pub fn nearest_cell(&self) -> (i64, i64) {
        let half = T::of(0.5);
        (
            (self.u + half).floor().to_i64().unwrap_or(i64::MIN),
            (self.v + half).floor().to_i64().unwrap_or(i64::MIN),
        )
    }

    pub fn distance(&self, o: &Self) -> T {
        let du = self.u - o.u;
        let dv = self.v - o.v;
        (du * du + dv * dv).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

/// Pinhole camera with a camera-from-world pose.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView<T = f64> {
    view_id: ViewId,
    traversal_id: String,
    image_path: String,
    rotation: Quaternion<T>,
    translation: Vec3<T>,
    intrinsics: Intrinsics<T>,
    rot: Mat3<T>,
}

/// Result of projecting a world point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    pub pixel: Pixel<T>,
    pub depth: T,
}

impl<T: Scalar> CameraView<T> {
    /// Validates intrinsics and normalizes the rotation quaternion.
    pub fn new(
        view_id: ViewId,
        traversal_id: impl Into<String>,
        image_path: impl Into<String>,
        rotation: Quaternion<T>,
        translation: Vec3<T>,
        intrinsics: Intrinsics<T>,
    ) -> Result<Self> {
        let traversal_id = traversal_id.into();
        if traversal_id.is_empty() || traversal_id.contains(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "view {view_id}: traversal id must be a nonempty token"
            )));
        }
        let rotation = rotation
            .normalized()
            .ok_or_else(|| Error::invalid(format!("view {view_id}: degenerate quaternion")))?;
        if !translation.is_finite() {
            return Err(Error::invalid(format!("view {view_id}: translation not finite")));
        }
        let Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        } = intrinsics;
        let ok = fx > T::zero()
            && fy > T::zero()
            && fx.is_finite()
            && fy.is_finite()
            && width > 0
            && height > 0
            && cx >= T::zero()
            && cx < T::of(width as f64)
            && cy >= T::zero()
            && cy < T::of(height as f64);
        if !ok {
            return Err(Error::invalid(format!("view {view_id}: invalid intrinsics")));
        }
        Ok(Self {
            view_id,
            traversal_id,
            image_path: image_path.into(),
            rot: rotation.to_rotation_matrix(),
            rotation,
            translation,
            intrinsics,
        })
    }

    pub fn view_id(&self) -> ViewId {
        self.view_id
    }

    pub fn traversal_id(&self) -> &str {
        &self.traversal_id
    }

    pub fn image_path(&self) -> &str {
        &self.image_path
    }

    pub fn rotation(&self) -> Quaternion<T> {
        self.rotation
    }

    pub fn rotation_matrix(&self) -> &Mat3<T> {
        &self.rot
    }

    pub fn translation(&self) -> Vec3<T> {
        self.translation
    }

    pub fn intrinsics(&self) -> &Intrinsics<T> {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rot.mul_vec(p) + self.translation
    }

    /// `-Rᵀ t`
    pub fn camera_center(&self) -> Vec3<T> {
        -self.rot.transpose_mul_vec(&self.translation)
    }

    #[inline]
    pub fn contains(&self, px: &Pixel<T>) -> bool {
        px.u >= T::zero()
            && px.v >= T::zero()
            && px.u < T::of(self.intrinsics.width as f64)
            && px.v < T::of(self.intrinsics.height as f64)
    }

    /// Projects with the default near plane.
    pub fn project(&self, p: &Vec3<T>) -> Option<Projection<T>> {
        self.project_with_near(p, T::of(DEFAULT_Z_MIN))
    }

    /// Returns `None` for points with camera depth `<= z_min` or outside the image.
    pub fn project_with_near(&self, p: &Vec3<T>, z_min: T) -> Option<Projection<T>> {
        let c = self.world_to_camera(p);
        if !(c.z > z_min) {
            return None;
        }
        let k = &self.intrinsics;
        let pixel = Pixel::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy);
        self.contains(&pixel).then_some(Projection { pixel, depth: c.z })
    }

    /// Inverse of [`project`](Self::project) for a known depth.
    pub fn unproject(&self, px: &Pixel<T>, depth: T) -> Result<Vec3<T>> {
        if !(depth > T::zero()) || !depth.is_finite() {
            return Err(Error::invalid(format!(
                "unproject requires positive depth, got {depth}"
            )));
        }
        let k = &self.intrinsics;
        let cam = Vec3::new((px.u - k.cx) / k.fx * depth, (px.v - k.cy) / k.fy * depth, depth);
        Ok(self.rot.transpose_mul_vec(&(cam - self.translation)))
    }
}
