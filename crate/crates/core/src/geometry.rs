//! Pinhole camera model.
//!
//! World frame is right-handed with x right, y down and z forward. A camera
//! with identity rotation looks along +z and its image rows grow with +y, so
//! camera and image axes share signs. Pixel `(u, v)` is column/row.

use nalgebra::{Matrix3, Matrix3x4, Point3, Unit, Vector3, Vector4};
use rand::Rng;

use crate::error::GeometryError;

/// Position in the world frame, metres.
pub type WorldPoint = Point3<f64>;

/// Points at or behind this camera-frame depth do not project.
pub const MIN_DEPTH_M: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-9;
const PARALLEL_TOL: f64 = 1e-9;

/// Real-valued image coordinate (column `u`, row `v`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Integer pixel cell. Cell `(u, v)` covers `[u, u+1) x [v, v+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub u: i64,
    pub v: i64,
}

impl Pixel {
    pub const fn new(u: i64, v: i64) -> Self {
        Self { u, v }
    }

    /// Centre of the cell in continuous image coordinates.
    pub fn centre(self) -> PixelPoint {
        PixelPoint::new(self.u as f64 + 0.5, self.v as f64 + 0.5)
    }
}

/// Intrinsic parameters of a distortion-free pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fx.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("fx must be positive"));
        }
        if !(fy > 0.0 && fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("fy must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics("sensor size must be non-zero"));
        }
        if !(0.0..=width as f64).contains(&cx) {
            return Err(GeometryError::InvalidIntrinsics("cx outside sensor"));
        }
        if !(0.0..=height as f64).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics("cy outside sensor"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Full-HD camera with a 90 degree horizontal field of view.
    pub fn full_hd() -> Self {
        Self {
            fx: 1200.0,
            fy: 1200.0,
            cx: 960.0,
            cy: 540.0,
            width: 1920,
            height: 1080,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.u >= 0 && px.v >= 0 && px.u < self.width as i64 && px.v < self.height as i64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Camera extrinsics: `rotation` maps world directions into the camera
/// frame, `centre` is the camera position in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    centre: WorldPoint,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, centre: WorldPoint) -> Result<Self, GeometryError> {
        if !is_rotation(&rotation) {
            return Err(GeometryError::NotARotation);
        }
        if !centre.coords.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { rotation, centre })
    }

    /// Camera at `centre` looking along +z.
    pub fn looking_forward(centre: WorldPoint) -> Self {
        Self {
            rotation: Matrix3::identity(),
            centre,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn centre(&self) -> WorldPoint {
        self.centre
    }

    /// Extrinsic translation `t = -R c`.
    pub fn translation(&self) -> Vector3<f64> {
        -(self.rotation * self.centre.coords)
    }

    /// The 3x4 extrinsic matrix `[R | t]`.
    pub fn extrinsic(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.set_column(3, &self.translation());
        m
    }

    pub fn to_camera(&self, p: &WorldPoint) -> Vector3<f64> {
        self.rotation * (p - self.centre)
    }
}

fn is_rotation(r: &Matrix3<f64>) -> bool {
    if !r.iter().all(|x| x.is_finite()) {
        return false;
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    err < ORTHONORMAL_TOL && (r.determinant() - 1.0).abs() < ORTHONORMAL_TOL
}

pub fn rotation_x(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(angle_rad), libm::cos(angle_rad));
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(angle_rad), libm::cos(angle_rad));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_z(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(angle_rad), libm::cos(angle_rad));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Projects a homogeneous world point `x` through `K [R | t]`.
///
/// Any non-zero scale of `x` gives the same pixel.
pub fn project_homogeneous(
    x: &Vector4<f64>,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<PixelPoint> {
    let cam = pose.extrinsic() * x;
    // Depth test in metric units, independent of the homogeneous scale.
    if x[3] == 0.0 || cam[2] / x[3] <= MIN_DEPTH_M {
        return None;
    }
    let y = intrinsics.matrix() * cam;
    Some(PixelPoint::new(y[0] / y[2], y[1] / y[2]))
}

/// Projects a world point to real-valued pixel coordinates, or `None` when
/// it lies at or behind the camera plane. No frame clipping is applied.
pub fn project_point(
    p: &WorldPoint,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<PixelPoint> {
    let c = pose.to_camera(p);
    if c.z <= MIN_DEPTH_M {
        return None;
    }
    Some(PixelPoint::new(
        intrinsics.fx * c.x / c.z + intrinsics.cx,
        intrinsics.fy * c.y / c.z + intrinsics.cy,
    ))
}

/// Floors a real pixel coordinate to the containing cell.
pub fn discretise(p: PixelPoint) -> Pixel {
    Pixel::new(libm::floor(p.u) as i64, libm::floor(p.v) as i64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: WorldPoint,
    pub direction: Unit<Vector3<f64>>,
}

impl Ray {
    pub fn new(origin: WorldPoint, direction: Vector3<f64>) -> Self {
        Self {
            origin,
            direction: Unit::new_normalize(direction),
        }
    }

    pub fn at(&self, t: f64) -> WorldPoint {
        self.origin + self.direction.into_inner() * t
    }
}

/// World ray from the camera centre through image point `px`.
pub fn back_project_ray(px: PixelPoint, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> Ray {
    let cam_dir = Vector3::new(
        (px.u - intrinsics.cx) / intrinsics.fx,
        (px.v - intrinsics.cy) / intrinsics.fy,
        1.0,
    );
    Ray::new(pose.centre, pose.rotation.transpose() * cam_dir)
}

/// Midpoint of the shortest segment between two infinite lines.
///
/// Solves the 2x2 normal equations of `min |o1 + t d1 - o2 - s d2|^2` in
/// closed form. The formula is symmetric, so swapping the rays gives a
/// bit-identical result.
pub fn ray_midpoint(r1: &Ray, r2: &Ray) -> Result<WorldPoint, GeometryError> {
    let d1 = r1.direction.into_inner();
    let d2 = r2.direction.into_inner();
    let b = d1.dot(&d2);
    if b.abs() >= 1.0 - PARALLEL_TOL {
        return Err(GeometryError::ParallelRays);
    }
    let w0 = r1.origin - r2.origin;
    let a = d1.dot(&d1);
    let c = d2.dot(&d2);
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let denom = a * c - b * b;
    let t = (b * e - c * d) / denom;
    let s = (a * e - b * d) / denom;
    let p1 = r1.at(t);
    let p2 = r2.at(s);
    Ok(WorldPoint::from((p1.coords + p2.coords) * 0.5))
}

/// Per-axis bounds of the uniform pose noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseNoiseConfig {
    pub max_rot_deg: f64,
    pub max_trans_m: f64,
}

impl PoseNoiseConfig {
    pub fn new(max_rot_deg: f64, max_trans_m: f64) -> Result<Self, GeometryError> {
        if !(max_rot_deg >= 0.0 && max_rot_deg.is_finite()) {
            return Err(GeometryError::InvalidNoise("max_rot_deg must be >= 0"));
        }
        if !(max_trans_m >= 0.0 && max_trans_m.is_finite()) {
            return Err(GeometryError::InvalidNoise("max_trans_m must be >= 0"));
        }
        Ok(Self {
            max_rot_deg,
            max_trans_m,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.max_rot_deg == 0.0 && self.max_trans_m == 0.0
    }
}

fn symmetric_uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Returns a noisy copy of `pose`: rotation `Nx Ny Nz R` with each single
/// axis angle uniform in `±max_rot_deg`, centre shifted uniformly by up to
/// `±max_trans_m` per axis.
pub fn perturb_pose<R: Rng + ?Sized>(
    pose: &CameraPose,
    cfg: &PoseNoiseConfig,
    rng: &mut R,
) -> CameraPose {
    if cfg.is_zero() {
        return *pose;
    }
    let max_rad = cfg.max_rot_deg.to_radians();
    let ax = symmetric_uniform(rng, max_rad);
    let ay = symmetric_uniform(rng, max_rad);
    let az = symmetric_uniform(rng, max_rad);
    let noise = Vector3::new(
        symmetric_uniform(rng, cfg.max_trans_m),
        symmetric_uniform(rng, cfg.max_trans_m),
        symmetric_uniform(rng, cfg.max_trans_m),
    );
    CameraPose {
        rotation: rotation_x(ax) * rotation_y(ay) * rotation_z(az) * pose.rotation,
        centre: pose.centre + noise,
    }
}

/// Angle of the relative rotation between two rotation matrices, radians.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    libm::acos(cos)
}
