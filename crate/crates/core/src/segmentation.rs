//! Classical segmentation of grayscale frames (horizontal-gradient Sobel,
//! threshold, erosion and dilation) and camera pose log parsing.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Matrix3;

use crate::error::{PoseLogError, SegmentationError};
use crate::geometry::{rotation_x, rotation_y, rotation_z, CameraPose, Pixel, WorldPoint};
use crate::mask::BinaryMask;

/// Row-major 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self, SegmentationError> {
        if samples.len() != width as usize * height as usize {
            return Err(SegmentationError::BadDimensions {
                width,
                height,
                len: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    /// Binary mask as a 0/255 image.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            samples: mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect(),
        }
    }
}

/// Signed x-derivative Sobel response with replicated borders, before
/// taking the magnitude and clamping.
pub fn sobel_horizontal_raw(img: &GrayImage) -> Result<Vec<i32>, SegmentationError> {
    let (w, h) = (img.width as i64, img.height as i64);
    if w < 3 || h < 3 {
        return Err(SegmentationError::ImageTooSmall {
            width: img.width,
            height: img.height,
        });
    }
    let at = |x: i64, y: i64| -> i32 {
        let x = x.clamp(0, w - 1) as usize;
        let y = y.clamp(0, h - 1) as usize;
        img.samples[y * w as usize + x] as i32
    };
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let right = at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1);
            let left = at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1);
            out.push(right - left);
        }
    }
    Ok(out)
}

/// Absolute x-derivative Sobel response (kernel `[-1 0 1; -2 0 2; -1 0 1]`)
/// clamped to `0..=255`.
pub fn sobel_horizontal(img: &GrayImage) -> Result<GrayImage, SegmentationError> {
    let raw = sobel_horizontal_raw(img)?;
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        samples: raw.into_iter().map(|r| r.unsigned_abs().min(255) as u8).collect(),
    })
}

/// Pixels with `sample >= t` become positive.
pub fn threshold(img: &GrayImage, t: u8) -> BinaryMask {
    let bits = img.samples.iter().map(|s| *s >= t).collect();
    BinaryMask::from_bits(img.width, img.height, bits).expect("same dimensions")
}

fn morph_once(mask: &BinaryMask, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for v in 0..h {
        for u in 0..w {
            let mut any = false;
            let mut all = true;
            for dv in -1..=1 {
                for du in -1..=1 {
                    // Out-of-frame neighbours read as background.
                    let b = mask.get(Pixel::new(u + du, v + dv));
                    any |= b;
                    all &= b;
                }
            }
            out.set(Pixel::new(u, v), if dilate { any } else { all });
        }
    }
    out
}

/// 3x3 erosion applied `iterations` times.
pub fn erode(mask: &BinaryMask, iterations: u32) -> BinaryMask {
    (0..iterations).fold(mask.clone(), |m, _| morph_once(&m, false))
}

/// 3x3 dilation applied `iterations` times.
pub fn dilate(mask: &BinaryMask, iterations: u32) -> BinaryMask {
    (0..iterations).fold(mask.clone(), |m, _| morph_once(&m, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentParams {
    pub threshold: u8,
    pub erode_iterations: u32,
    pub dilate_iterations: u32,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            threshold: 64,
            erode_iterations: 1,
            dilate_iterations: 2,
        }
    }
}

/// Sobel, threshold, erode, dilate.
pub fn segment(img: &GrayImage, params: &SegmentParams) -> Result<BinaryMask, SegmentationError> {
    let edges = sobel_horizontal(img)?;
    let bin = threshold(&edges, params.threshold);
    Ok(dilate(&erode(&bin, params.erode_iterations), params.dilate_iterations))
}

/// One row of a camera pose log. Angles are degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLogEntry {
    pub frame_id: u64,
    pub centre: WorldPoint,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

pub const POSE_LOG_HEADER: &str = "frame_id,x,y,z,roll,pitch,yaw";

/// Parses a pose log: a header line followed by
/// `frame_id,x,y,z,roll,pitch,yaw` rows with strictly increasing ids.
/// Blank lines are skipped.
pub fn parse_pose_log(text: &str) -> Result<Vec<PoseLogEntry>, PoseLogError> {
    let mut out: Vec<PoseLogEntry> = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim().starts_with("frame_id") => {}
        Some((i, _)) => {
            return Err(PoseLogError::Parse {
                line: i + 1,
                message: "missing header".to_string(),
            })
        }
        None => return Ok(out),
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(PoseLogError::Parse {
                line: line_no,
                message: alloc::format!("expected 7 columns, found {}", fields.len()),
            });
        }
        let frame_id: u64 = fields[0].parse().map_err(|_| PoseLogError::Parse {
            line: line_no,
            message: alloc::format!("bad frame id {:?}", fields[0]),
        })?;
        let mut nums = [0.0f64; 6];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| PoseLogError::Parse {
                    line: line_no,
                    message: alloc::format!("bad number {field:?}"),
                })?;
        }
        if out.last().is_some_and(|prev| prev.frame_id >= frame_id) {
            return Err(PoseLogError::NonMonotonicFrameIds {
                line: line_no,
                frame_id,
            });
        }
        out.push(PoseLogEntry {
            frame_id,
            centre: WorldPoint::new(nums[0], nums[1], nums[2]),
            roll_deg: nums[3],
            pitch_deg: nums[4],
            yaw_deg: nums[5],
        });
    }
    Ok(out)
}

pub fn format_pose_log(entries: &[PoseLogEntry]) -> String {
    let mut s = String::from(POSE_LOG_HEADER);
    s.push('\n');
    for e in entries {
        s.push_str(&alloc::format!(
            "{},{},{},{},{},{},{}\n",
            e.frame_id,
            e.centre.x,
            e.centre.y,
            e.centre.z,
            e.roll_deg,
            e.pitch_deg,
            e.yaw_deg
        ));
    }
    s
}

/// Camera-to-world rotation for yaw about the vertical (world y) axis, then
/// pitch about the camera x axis, then roll about the optical axis.
pub fn camera_to_world(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Matrix3<f64> {
    rotation_y(yaw_deg.to_radians()) * rotation_x(pitch_deg.to_radians()) * rotation_z(roll_deg.to_radians())
}

pub fn pose_from_entry(e: &PoseLogEntry) -> CameraPose {
    let r = camera_to_world(e.yaw_deg, e.pitch_deg, e.roll_deg).transpose();
    CameraPose::new(r, e.centre).expect("composition of rotations")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn sobel_constant_is_zero() {
        let img = GrayImage::filled(8, 6, 77);
        assert!(sobel_horizontal(&img).unwrap().samples().iter().all(|s| *s == 0));
    }

    #[test]
    fn sobel_vertical_edge() {
        let img = GrayImage::from_fn(10, 6, |x, _| if x < 5 { 0 } else { 255 });
        let out = sobel_horizontal(&img).unwrap();
        for y in 0..6 {
            assert_eq!(out.get(4, y), 255);
            assert_eq!(out.get(5, y), 255);
            assert_eq!(out.get(0, y), 0);
            assert_eq!(out.get(2, y), 0);
            assert_eq!(out.get(8, y), 0);
        }
        let raw = sobel_horizontal_raw(&img).unwrap();
        assert_eq!(raw[4], 4 * 255);
    }

    #[test]
    fn sobel_ignores_horizontal_edges() {
        let img = GrayImage::from_fn(9, 9, |_, y| if y < 4 { 10 } else { 200 });
        assert!(sobel_horizontal(&img).unwrap().samples().iter().all(|s| *s == 0));
    }

    #[test]
    fn sobel_rejects_tiny_images() {
        let img = GrayImage::filled(2, 5, 0);
        assert!(matches!(
            sobel_horizontal(&img),
            Err(SegmentationError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn sobel_scales_linearly_with_contrast() {
        let ramp = GrayImage::from_fn(16, 5, |x, _| (x * 7) as u8);
        let double = GrayImage::from_fn(16, 5, |x, _| (x * 14) as u8);
        let a = sobel_horizontal_raw(&ramp).unwrap();
        let b = sobel_horizontal_raw(&double).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2 * x, *y);
        }
    }

    #[test]
    fn threshold_examples() {
        assert!(threshold(&GrayImage::filled(4, 4, 0), 1).is_empty());
        assert_eq!(threshold(&GrayImage::filled(4, 4, 255), 1).count(), 16);
        assert_eq!(threshold(&GrayImage::filled(4, 4, 3), 0).count(), 16);
    }

    #[test]
    fn morphology_examples() {
        let single = BinaryMask::from_pixels(5, 5, [Pixel::new(2, 2)]);
        assert_eq!(erode(&single, 0), single);
        assert_eq!(dilate(&single, 0), single);
        assert!(erode(&single, 1).is_empty());
        let d = dilate(&single, 1);
        let mut block = BinaryMask::new(5, 5);
        for v in 1..=3 {
            for u in 1..=3 {
                block.set(Pixel::new(u, v), true);
            }
        }
        assert_eq!(d, block);
    }

    #[test]
    fn border_pixels_erode() {
        let mut full = BinaryMask::new(6, 6);
        full.fill_rect(
            &crate::mask::PixelRect::new(Pixel::new(0, 0), Pixel::new(5, 5)),
            true,
        );
        assert_eq!(erode(&full, 1).count(), 16);
    }

    fn brute_morph(m: &BinaryMask, dil: bool) -> BinaryMask {
        let mut out = BinaryMask::new(m.width(), m.height());
        for v in 0..m.height() as i64 {
            for u in 0..m.width() as i64 {
                let neigh: Vec<bool> = (-1..=1)
                    .flat_map(|dv| (-1..=1).map(move |du| (du, dv)))
                    .map(|(du, dv)| m.get(Pixel::new(u + du, v + dv)))
                    .collect();
                let val = if dil { neigh.iter().any(|b| *b) } else { neigh.iter().all(|b| *b) };
                out.set(Pixel::new(u, v), val);
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn erosion_dilation_duality(bits in proptest::collection::vec(any::<bool>(), 64 * 64)) {
            let m = BinaryMask::from_bits(64, 64, bits).unwrap();
            let lhs = erode(&m.complement(), 1);
            let rhs = dilate(&m, 1).complement();
            prop_assert_eq!(&dilate(&m, 1), &brute_morph(&m, true));
            prop_assert_eq!(&lhs, &brute_morph(&m.complement(), false));
            for v in 1..63 {
                for u in 1..63 {
                    let p = Pixel::new(u, v);
                    prop_assert_eq!(lhs.get(p), rhs.get(p));
                }
            }
        }

        #[test]
        fn threshold_is_idempotent(samples in proptest::collection::vec(any::<u8>(), 100), t in 1u8..=255) {
            let img = GrayImage::new(10, 10, samples).unwrap();
            let once = threshold(&img, t);
            let twice = threshold(&GrayImage::from_mask(&once), t);
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn pose_log_round_trip_and_errors() {
        let text = "frame_id,x,y,z,roll,pitch,yaw\n0,1,2,3,0,0,0\n1,1.5,2,3,0.1,-0.2,90\n";
        let entries = parse_pose_log(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].yaw_deg, 90.0);
        assert_eq!(parse_pose_log(&format_pose_log(&entries)).unwrap(), entries);

        let bad = "frame_id,x,y,z,roll,pitch,yaw\n0,1,2,3,0,0,0\n1,1,2,x,0,0,0\n";
        assert_eq!(
            parse_pose_log(bad).unwrap_err(),
            PoseLogError::Parse {
                line: 3,
                message: "bad number \"x\"".into()
            }
        );
        let short = "frame_id,x,y,z,roll,pitch,yaw\n0,1,2\n";
        assert!(matches!(parse_pose_log(short), Err(PoseLogError::Parse { line: 2, .. })));
        let backwards = "frame_id,x,y,z,roll,pitch,yaw\n5,0,0,0,0,0,0\n5,0,0,0,0,0,0\n";
        assert_eq!(
            parse_pose_log(backwards).unwrap_err(),
            PoseLogError::NonMonotonicFrameIds { line: 3, frame_id: 5 }
        );
    }

    fn entry(yaw: f64, pitch: f64, roll: f64) -> PoseLogEntry {
        PoseLogEntry {
            frame_id: 0,
            centre: WorldPoint::new(1.0, 2.0, 3.0),
            roll_deg: roll,
            pitch_deg: pitch,
            yaw_deg: yaw,
        }
    }

    #[test]
    fn zero_angles_give_identity() {
        let pose = pose_from_entry(&entry(0.0, 0.0, 0.0));
        assert_eq!(*pose.rotation(), Matrix3::identity());
        assert_eq!(pose.centre(), WorldPoint::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn yaw_turns_optical_axis_about_vertical() {
        let pose = pose_from_entry(&entry(90.0, 0.0, 0.0));
        let axis_world = pose.rotation().transpose() * Vector3::z();
        assert_abs_diff_eq!(axis_world, Vector3::x(), epsilon = 1e-12);
        // Positive pitch looks up (towards -y).
        let pose = pose_from_entry(&entry(0.0, 10.0, 0.0));
        let axis_world = pose.rotation().transpose() * Vector3::z();
        assert!(axis_world.y < 0.0);
    }
}
