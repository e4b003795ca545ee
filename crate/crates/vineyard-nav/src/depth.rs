//! NaN-robust depth lookup and pinhole back-projection.
//!
//! Depth sensors drop readings; a queried pixel is often invalid. The
//! lookup grows a square window around the pixel (5x5, 9x9, ... interior
//! to the image) and takes the mean of the valid values in the first
//! window that has any, then back-projects through the pinhole model.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DepthError {
    #[error("pixel ({x}, {y}) outside {w}x{h} image")]
    OutOfBounds { x: usize, y: usize, w: usize, h: usize },
    #[error("no valid depth anywhere in the image")]
    NoValidDepth,
    #[error("point has non-positive depth {z}")]
    BehindCamera { z: f64 },
    #[error("data length {len} does not match {w}x{h}")]
    BadDimensions { len: usize, w: usize, h: usize },
    #[error("depth value {value} at index {index} is not positive")]
    NonPositiveDepth { index: usize, value: f32 },
}

/// Dense row-major depth grid, meters. NaN marks an invalid reading.
///
/// Sensors that emit 0 for invalid must convert to NaN at ingestion; all
/// stored non-NaN values are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, DepthError> {
        if data.len() != width * height {
            return Err(DepthError::BadDimensions {
                len: data.len(),
                w: width,
                h: height,
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_nan() && value <= 0.0 {
                return Err(DepthError::NonPositiveDepth { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Build from a per-pixel function (tests and synthetic data).
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self, DepthError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        (x < self.width && y < self.height).then(|| self.data[y * self.width + x])
    }
}

/// Pinhole camera parameters, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(format!(
                "intrinsics fx, fy must be > 0, got fx={} fy={}",
                self.fx, self.fy
            ));
        }
        Ok(())
    }
}

/// A camera-frame 3D point, meters. `z` is depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

const WINDOW_STEP: i64 = 2;

/// Inclusive window bounds for expansion step `i`, clipped to the image.
fn window_bounds(x: usize, y: usize, w: usize, h: usize, i: i64) -> (usize, usize, usize, usize) {
    let clip = |v: i64, hi: usize| -> usize { v.clamp(0, hi as i64 - 1) as usize };
    let min_y = clip(y as i64 - i * WINDOW_STEP, h);
    let max_y = clip(y as i64 + i * WINDOW_STEP, h);
    let min_x = clip(x as i64 - i * WINDOW_STEP, w);
    let max_x = clip(x as i64 + i * WINDOW_STEP, w);
    (min_y, max_y, min_x, max_x)
}

/// Mean of the non-NaN values in the inclusive window, row-major order.
fn window_nanmean(
    image: &DepthImage,
    (min_y, max_y, min_x, max_x): (usize, usize, usize, usize),
) -> Option<f64> {
    let mut sum = 0.0f64;
    let mut count = 0u64;
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            let v = image.data[y * image.width + x];
            if !v.is_nan() {
                sum += f64::from(v);
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Look up a reliable depth at `(x, y)` and back-project it.
///
/// The window starts at 5x5 interior to the image (half-width 2 per
/// expansion step) and grows until it contains a valid value or covers the
/// whole image. The depth is the mean of the valid values in the first
/// non-empty window; the ray through the pixel turns it into a camera-frame
/// point:
/// `x = (px - cx) * z / fx`, `y = (py - cy) * z / fy`.
pub fn reliable_depth(
    x: usize,
    y: usize,
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
) -> Result<Point3D, DepthError> {
    let (w, h) = (depth.width(), depth.height());
    if x >= w || y >= h {
        return Err(DepthError::OutOfBounds { x, y, w, h });
    }

    let mut i: i64 = 1;
    let z = loop {
        let bounds = window_bounds(x, y, w, h, i);
        if let Some(z) = window_nanmean(depth, bounds) {
            break z;
        }
        if bounds == (0, h - 1, 0, w - 1) {
            return Err(DepthError::NoValidDepth);
        }
        i += 1;
    };

    Ok(Point3D {
        x: (x as f64 - intrinsics.cx) * z / intrinsics.fx,
        y: (y as f64 - intrinsics.cy) * z / intrinsics.fy,
        z,
    })
}

/// Project a camera-frame point back to pixel coordinates.
pub fn project(point: &Point3D, intrinsics: &CameraIntrinsics) -> Result<(f64, f64), DepthError> {
    if point.z.is_nan() || point.z <= 0.0 {
        return Err(DepthError::BehindCamera { z: point.z });
    }
    Ok((
        point.x * intrinsics.fx / point.z + intrinsics.cx,
        point.y * intrinsics.fy / point.z + intrinsics.cy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0)
    }

    /// Brute-force re-implementation: materialize every window explicitly
    /// and replicate the expansion loop without sharing code paths.
    fn oracle_reliable_z(x: usize, y: usize, image: &DepthImage) -> Option<f64> {
        let (w, h) = (image.width(), image.height());
        let mut i: i64 = 1;
        loop {
            let min_y = (y as i64 - 2 * i).clamp(0, h as i64 - 1) as usize;
            let max_y = (y as i64 + 2 * i).clamp(0, h as i64 - 1) as usize;
            let min_x = (x as i64 - 2 * i).clamp(0, w as i64 - 1) as usize;
            let max_x = (x as i64 + 2 * i).clamp(0, w as i64 - 1) as usize;
            let mut window = Vec::new();
            for yy in min_y..=max_y {
                for xx in min_x..=max_x {
                    window.push(image.get(xx, yy).unwrap());
                }
            }
            let valid: Vec<f64> = window
                .iter()
                .filter(|v| !v.is_nan())
                .map(|v| f64::from(*v))
                .collect();
            if !valid.is_empty() {
                return Some(valid.iter().sum::<f64>() / valid.len() as f64);
            }
            if (min_y, max_y, min_x, max_x) == (0, h - 1, 0, w - 1) {
                return None;
            }
            i += 1;
        }
    }

    #[test]
    fn constant_image_at_principal_point() {
        let img = DepthImage::from_fn(640, 480, |_, _| 2.0).unwrap();
        let p = reliable_depth(320, 240, &img, &intr()).unwrap();
        assert_eq!(p.x, 0.0);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 2.0);
    }

    #[test]
    fn nan_pixel_falls_back_to_window_mean() {
        // Query pixel invalid; the 5x5 window around it means to 1.5.
        let (qx, qy) = (920usize, 100usize); // qx = cx + fx for 920 = 320 + 600
        let img = DepthImage::from_fn(1000, 200, |x, y| {
            if (x, y) == (qx, qy) {
                f32::NAN
            } else {
                1.5
            }
        })
        .unwrap();
        let k = intr();
        let p = reliable_depth(qx, qy, &img, &k).unwrap();
        let oracle = oracle_reliable_z(qx, qy, &img).unwrap();
        assert_eq!(p.z, oracle);
        assert_eq!(p.z, 1.5);
        assert_relative_eq!(p.x, 1.5, epsilon = 1e-12); // (920-320)*1.5/600
        assert_relative_eq!(p.y, (qy as f64 - k.cy) * 1.5 / k.fy, epsilon = 1e-12);
    }

    #[test]
    fn fully_nan_image_is_an_error() {
        let img = DepthImage::from_fn(30, 20, |_, _| f32::NAN).unwrap();
        assert_eq!(
            reliable_depth(10, 10, &img, &intr()).unwrap_err(),
            DepthError::NoValidDepth
        );
    }

    #[test]
    fn out_of_bounds_pixel_is_an_error() {
        let img = DepthImage::from_fn(10, 10, |_, _| 1.0).unwrap();
        assert!(matches!(
            reliable_depth(10, 0, &img, &intr()),
            Err(DepthError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn first_window_is_five_by_five_interior() {
        let (min_y, max_y, min_x, max_x) = window_bounds(10, 10, 100, 100, 1);
        assert_eq!((max_x - min_x + 1, max_y - min_y + 1), (5, 5));
        assert_eq!((min_x, min_y), (8, 8));
    }

    /// Growth is strict until the window covers the image. An off-center
    /// query needs up to max(h,w)/step + 1 iterations (the /2 variant only
    /// holds when the query sits mid-image; both are checked).
    #[test]
    fn windows_grow_strictly_until_fully_clipped() {
        let (w, h) = (64, 48);
        let count_iters = |x: usize, y: usize, bound: usize| {
            let full = (0, h - 1, 0, w - 1);
            let mut prev = window_bounds(x, y, w, h, 1);
            let mut iters = 1;
            let mut i = 2;
            while prev != full {
                let next = window_bounds(x, y, w, h, i);
                assert!(
                    next.0 <= prev.0 && next.1 >= prev.1 && next.2 <= prev.2 && next.3 >= prev.3,
                    "window must not shrink"
                );
                assert_ne!(next, prev, "window must strictly grow until clipped");
                prev = next;
                i += 1;
                iters += 1;
                assert!(iters <= bound, "expansion exceeded {bound} iterations");
            }
        };
        // Worst case: a corner query.
        count_iters(0, 0, w.max(h) / WINDOW_STEP as usize + 1);
        count_iters(5, 40, w.max(h) / WINDOW_STEP as usize + 1);
        // Centered query reaches the edges in half the iterations.
        count_iters(w / 2, h / 2, w.max(h) / (2 * WINDOW_STEP as usize) + 1);
    }

    #[test]
    fn project_round_trips_principal_point() {
        let p = Point3D {
            x: 0.0,
            y: 0.0,
            z: 2.0,
        };
        assert_eq!(project(&p, &intr()).unwrap(), (320.0, 240.0));
    }

    #[test]
    fn project_known_point() {
        let p = Point3D {
            x: 1.5,
            y: 0.0,
            z: 1.5,
        };
        let (x, y) = project(&p, &intr()).unwrap();
        assert_relative_eq!(x, 920.0, epsilon = 1e-12);
        assert_relative_eq!(y, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn project_behind_camera_is_an_error() {
        let p = Point3D {
            x: 0.0,
            y: 0.0,
            z: -1.0,
        };
        assert!(matches!(
            project(&p, &intr()),
            Err(DepthError::BehindCamera { .. })
        ));
    }

    #[test]
    fn round_trip_on_constant_depth() {
        let img = DepthImage::from_fn(640, 480, |_, _| 1.5).unwrap();
        let k = intr();
        for (x, y) in [(0, 0), (320, 240), (639, 479), (17, 402)] {
            let p = reliable_depth(x, y, &img, &k).unwrap();
            let (px, py) = project(&p, &k).unwrap();
            assert!((px - x as f64).abs() < 0.5, "x: {px} vs {x}");
            assert!((py - y as f64).abs() < 0.5, "y: {py} vs {y}");
        }
    }

    #[test]
    fn rejects_bad_dimensions_and_non_positive_values() {
        assert!(matches!(
            DepthImage::new(4, 4, vec![1.0; 15]),
            Err(DepthError::BadDimensions { .. })
        ));
        assert!(matches!(
            DepthImage::new(2, 1, vec![1.0, 0.0]),
            Err(DepthError::NonPositiveDepth { index: 1, .. })
        ));
        assert!(DepthImage::new(2, 1, vec![1.0, f32::NAN]).is_ok());
    }
}
