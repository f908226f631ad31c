//! Editing losses and evaluation metrics over precomputed tensors.
//!
//! Nothing here runs a network: identity embeddings, facial landmarks, head
//! pose angles and images all arrive from outside. The training objective is
//!
//! ```text
//! L_total = λ1·L_id + λ2·L_attr + λ3·L_rec
//! ```
//!
//! with `L_id` an L1 distance between identity embeddings, `L_attr` the sum
//! of a landmark L2 distance and a pose L2 distance, and `L_rec` a mix of
//! `1 - MS-SSIM` and mean absolute pixel error that only applies when the
//! identity and attribute inputs are the same image.

mod image;
mod msssim;

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::Serialize;

pub use self::image::ImageTensor;
pub use self::msssim::{ms_ssim, MsSsim};

use crate::csvio;
use crate::error::{check_len, Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.84;
pub const DEFAULT_LAMBDAS: [f64; 3] = [1.0, 0.01, 0.02];
pub const LANDMARK_COUNT: usize = 68;
/// 0-based index of the first inner (non-jawline) landmark.
pub const FIRST_INNER_LANDMARK: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding is empty".into()));
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// First row of a CSV file of row vectors.
    pub fn read(path: &Path) -> Result<Self> {
        let rows = csvio::read_rows_from_path(path)?;
        let row = rows
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("{}: no embedding row", path.display())))?;
        Embedding::new(row)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }
}

/// 68 facial landmarks in pixel coordinates (z is 0 for 2D sources).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandmarkSet(Vec<Point3>);

impl LandmarkSet {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        check_len(LANDMARK_COUNT, points.len())?;
        Ok(LandmarkSet(points))
    }

    pub fn points(&self) -> &[Point3] {
        &self.0
    }

    /// Faces from a CSV matrix: either 68 rows of `x,y,z` per face or one
    /// 204-column row per face.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Vec<Self>> {
        let width = rows.first().map_or(0, Vec::len);
        let points: Vec<Point3> = match width {
            3 => rows.iter().map(|r| Point3::new(r[0], r[1], r[2])).collect(),
            w if w == 3 * LANDMARK_COUNT => rows
                .iter()
                .flat_map(|r| r.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])))
                .collect(),
            w => {
                return Err(Error::InvalidArgument(format!(
                    "landmark rows must have 3 or {} columns, found {w}",
                    3 * LANDMARK_COUNT
                )))
            }
        };
        if points.is_empty() || !points.len().is_multiple_of(LANDMARK_COUNT) {
            return Err(Error::InvalidArgument(format!(
                "{} landmark points is not a positive multiple of {LANDMARK_COUNT}",
                points.len()
            )));
        }
        points
            .chunks_exact(LANDMARK_COUNT)
            .map(|c| LandmarkSet::new(c.to_vec()))
            .collect()
    }

    pub fn read(path: &Path) -> Result<Vec<Self>> {
        LandmarkSet::from_rows(&csvio::read_rows_from_path(path)?).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Coordinates divided by `resolution`.
    pub fn normalized(&self, resolution: f64) -> LandmarkSet {
        LandmarkSet(
            self.0
                .iter()
                .map(|p| Point3::new(p.x / resolution, p.y / resolution, p.z / resolution))
                .collect(),
        )
    }
}

impl AsRef<[Point3]> for LandmarkSet {
    fn as_ref(&self) -> &[Point3] {
        &self.0
    }
}

/// Head pose in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Result<Self> {
        for (name, v) in [("yaw", yaw), ("pitch", pitch), ("roll", roll)] {
            if !(v > -FRAC_PI_2 && v < FRAC_PI_2) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside (-pi/2, pi/2)")));
            }
        }
        Ok(EulerAngles { yaw, pitch, roll })
    }

    fn delta(&self, other: &EulerAngles) -> [f64; 3] {
        [self.yaw - other.yaw, self.pitch - other.pitch, self.roll - other.roll]
    }

    /// First row of a `yaw,pitch,roll` CSV file.
    pub fn read(path: &Path) -> Result<Self> {
        let rows = csvio::read_rows_from_path(path)?;
        match rows.first().map(Vec::as_slice) {
            Some(&[y, p, r]) => EulerAngles::new(y, p, r),
            _ => Err(Error::InvalidArgument(format!(
                "{}: expected a yaw,pitch,roll row",
                path.display()
            ))),
        }
    }
}

/// `‖F_id - F_out‖₁`
pub fn identity_loss(f_id: &Embedding, f_out: &Embedding) -> Result<f64> {
    check_len(f_id.0.len(), f_out.0.len())?;
    Ok(f_id.0.iter().zip(&f_out.0).map(|(a, b)| (a - b).abs()).sum())
}

/// L2 norm of the stacked coordinate differences, over landmarks 18-68
/// (1-based) when `inner_only`, otherwise all 68.
pub fn landmark_loss(a: &LandmarkSet, b: &LandmarkSet, inner_only: bool) -> f64 {
    let skip = if inner_only { FIRST_INNER_LANDMARK } else { 0 };
    a.0.iter()
        .zip(&b.0)
        .skip(skip)
        .map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn pose_loss(a: &EulerAngles, b: &EulerAngles) -> f64 {
    a.delta(b).iter().map(|d| d * d).sum::<f64>().sqrt()
}

pub fn attr_loss(landmark: f64, pose: f64) -> f64 {
    landmark + pose
}

/// `α·(1 - MS-SSIM) + (1 - α)·mean|I_attr - I_out|` when the identity and
/// attribute inputs were the same image, 0 otherwise.
pub fn reconstruction_loss(attr: &ImageTensor, out: &ImageTensor, alpha: f64, same_inputs: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    attr.check_same_shape(out)?;
    if !same_inputs {
        return Ok(0.0);
    }
    let l1 = attr.mean_abs_diff(out)?;
    let sim = ms_ssim(attr, out)?;
    Ok(alpha * (1.0 - sim) + (1.0 - alpha) * l1)
}

/// Loss weights `λ1, λ2, λ3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub identity: f64,
    pub attribute: f64,
    pub reconstruction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        let [identity, attribute, reconstruction] = DEFAULT_LAMBDAS;
        LossWeights {
            identity,
            attribute,
            reconstruction,
        }
    }
}

pub fn total_loss(identity: f64, attribute: f64, reconstruction: f64, weights: &LossWeights) -> f64 {
    weights.identity * identity + weights.attribute * attribute + weights.reconstruction * reconstruction
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    /// Cosine similarity of identity embeddings.
    pub identity: f64,
    /// Landmark distance on resolution-normalized coordinates.
    pub expression: f64,
    /// Mean squared Euler-angle deviation, radians².
    pub pose: f64,
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_len(a.0.len(), b.0.len())?;
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm embedding".into()));
    }
    Ok(dot / (na * nb))
}

pub fn eval_metrics(
    f_id: &Embedding,
    f_out: &Embedding,
    lm_attr: &LandmarkSet,
    lm_out: &LandmarkSet,
    pose_attr: &EulerAngles,
    pose_out: &EulerAngles,
    resolution: u32,
) -> Result<EvalMetrics> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let r = f64::from(resolution);
    Ok(EvalMetrics {
        identity: cosine_similarity(f_id, f_out)?,
        expression: landmark_loss(&lm_attr.normalized(r), &lm_out.normalized(r), false),
        pose: pose_attr.delta(pose_out).iter().map(|d| d * d).sum::<f64>() / 3.0,
    })
}
