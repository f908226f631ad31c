//! Style space layout, control-signal arithmetic and control-unit planning.
//!
//! The style space concatenates one style vector per convolution layer, each
//! as wide as the layer's input channel count (4928 dimensions for
//! StyleGAN2-256). An edit adds a control signal `ΔS` to a style vector; a
//! [`MaskPlan`] restricts that offset to a chosen set of layers ("control
//! units") and zeroes it everywhere else.

use std::ops::Range;

use serde::Serialize;

use crate::arch::ArchSpec;
use crate::error::{check_len, Error, Result};
use crate::fields::FieldTable;
use crate::losses::Point3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerRange {
    pub layer_id: String,
    pub style_label: Option<String>,
    pub channels: usize,
    pub start: usize,
    pub end: usize,
}

impl LayerRange {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Contiguous per-layer index ranges covering `[0, total_dims)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StyleLayout {
    ranges: Vec<LayerRange>,
    total_dims: usize,
}

impl StyleLayout {
    pub fn new(arch: &ArchSpec) -> Self {
        let mut start = 0;
        let ranges = arch
            .layers()
            .iter()
            .map(|l| {
                let channels = l.channels_in as usize;
                let r = LayerRange {
                    layer_id: l.id.clone(),
                    style_label: l.style_label.clone(),
                    channels,
                    start,
                    end: start + channels,
                };
                start += channels;
                r
            })
            .collect();
        StyleLayout {
            ranges,
            total_dims: start,
        }
    }

    pub fn total_dims(&self) -> usize {
        self.total_dims
    }

    pub fn ranges(&self) -> &[LayerRange] {
        &self.ranges
    }

    /// Layer owning dimension `dim`.
    pub fn layer_of_dim(&self, dim: usize) -> Result<&str> {
        if dim >= self.total_dims {
            return Err(Error::OutOfRange {
                what: "style dimension",
                index: dim,
                len: self.total_dims,
            });
        }
        let i = self.ranges.partition_point(|r| r.end <= dim);
        Ok(&self.ranges[i].layer_id)
    }

    pub fn dims_of_layer(&self, layer_id: &str) -> Result<Range<usize>> {
        self.find(layer_id).map(LayerRange::range)
    }

    fn find(&self, layer_id: &str) -> Result<&LayerRange> {
        self.ranges
            .iter()
            .find(|r| r.layer_id == layer_id)
            .ok_or_else(|| Error::UnknownLayer(layer_id.to_string()))
    }
}

pub fn style_layout(arch: &ArchSpec) -> StyleLayout {
    StyleLayout::new(arch)
}

/// A point `S` in style space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleVector(pub Vec<f64>);

/// An additive style offset `ΔS`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSignal(pub Vec<f64>);

impl StyleVector {
    pub fn for_layout(values: Vec<f64>, layout: &StyleLayout) -> Result<Self> {
        check_len(layout.total_dims(), values.len())?;
        Ok(StyleVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ControlSignal {
    pub fn for_layout(values: Vec<f64>, layout: &StyleLayout) -> Result<Self> {
        check_len(layout.total_dims(), values.len())?;
        Ok(ControlSignal(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of the signal with every masked-out dimension zeroed.
    pub fn masked(&self, plan: &MaskPlan) -> Result<ControlSignal> {
        check_len(plan.mask.len(), self.0.len())?;
        Ok(ControlSignal(
            self.0
                .iter()
                .zip(&plan.mask)
                .map(|(&v, &keep)| if keep { v } else { 0.0 })
                .collect(),
        ))
    }
}

/// Control units enabled for an edit and the resulting dimension mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskPlan {
    pub enabled_layers: Vec<String>,
    /// Generative fields of the last and first enabled layer.
    pub gf_range: (u64, u64),
    #[serde(skip)]
    pub mask: Vec<bool>,
}

impl MaskPlan {
    /// Plan that enables no layer at all.
    pub fn none(layout: &StyleLayout) -> Self {
        MaskPlan {
            enabled_layers: Vec::new(),
            gf_range: (0, 0),
            mask: vec![false; layout.total_dims()],
        }
    }

    fn from_indices(table: &FieldTable, layout: &StyleLayout, enabled: &[usize]) -> Result<Self> {
        check_len(layout.ranges().len(), table.records.len())?;
        for (rec, range) in table.records.iter().zip(layout.ranges()) {
            if rec.layer_id != range.layer_id {
                return Err(Error::InvalidArgument(format!(
                    "field table layer `{}` does not match layout layer `{}`",
                    rec.layer_id, range.layer_id
                )));
            }
        }
        let (&first, &last) = match (enabled.first(), enabled.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidArgument("plan must enable at least one layer".into())),
        };
        let mut mask = vec![false; layout.total_dims()];
        for &i in enabled {
            mask[layout.ranges()[i].range()].fill(true);
        }
        Ok(MaskPlan {
            enabled_layers: enabled.iter().map(|&i| table.records[i].layer_id.clone()).collect(),
            gf_range: (
                table.records[last].generative_field,
                table.records[first].generative_field,
            ),
            mask,
        })
    }

    pub fn enabled_dims(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Run-length encoding of the mask as `(value, run)` pairs.
    pub fn mask_runs(&self) -> Vec<(bool, usize)> {
        let mut runs: Vec<(bool, usize)> = Vec::new();
        for &m in &self.mask {
            match runs.last_mut() {
                Some((v, n)) if *v == m => *n += 1,
                _ => runs.push((m, 1)),
            }
        }
        runs
    }

    /// Mask runs rendered as `count x bit` items, e.g. `4096x1,832x0`.
    pub fn mask_rle(&self) -> String {
        self.mask_runs()
            .iter()
            .map(|(v, n)| format!("{n}x{}", u8::from(*v)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `S_id + mask ⊙ ΔS`; without a plan the whole signal is applied.
pub fn apply_control(style: &StyleVector, delta: &ControlSignal, plan: Option<&MaskPlan>) -> Result<StyleVector> {
    check_len(style.len(), delta.len())?;
    match plan {
        None => Ok(StyleVector(style.0.iter().zip(&delta.0).map(|(s, d)| s + d).collect())),
        Some(plan) => {
            check_len(style.len(), plan.mask.len())?;
            Ok(StyleVector(
                style
                    .0
                    .iter()
                    .zip(&delta.0)
                    .zip(&plan.mask)
                    .map(|((&s, &d), &keep)| if keep { s + d } else { s })
                    .collect(),
            ))
        }
    }
}

/// Enables every layer whose generative field lies in `[min_gf, max_gf]`.
///
/// A layer whose published field value differs from the computed one (conv0
/// of StyleGAN2-256: 506 published, 507 computed) qualifies if either value
/// is in range. The reported `gf_range` always uses computed values.
pub fn plan_by_gf(table: &FieldTable, layout: &StyleLayout, min_gf: u64, max_gf: u64) -> Result<MaskPlan> {
    if min_gf > max_gf {
        return Err(Error::InvalidArgument(format!("min_gf {min_gf} > max_gf {max_gf}")));
    }
    let inside = |v: u64| (min_gf..=max_gf).contains(&v);
    let enabled: Vec<usize> = table
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| inside(r.generative_field) || r.published.is_some_and(inside))
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return Err(Error::EmptySelection {
            min: min_gf,
            max: max_gf,
        });
    }
    MaskPlan::from_indices(table, layout, &enabled)
}

/// Enables the contiguous run of layers `first..=last`.
pub fn plan_by_layers(table: &FieldTable, layout: &StyleLayout, first: &str, last: &str) -> Result<MaskPlan> {
    let index = |id: &str| {
        table
            .records
            .iter()
            .position(|r| r.layer_id == id)
            .ok_or_else(|| Error::UnknownLayer(id.to_string()))
    };
    let (a, b) = (index(first)?, index(last)?);
    if a > b {
        return Err(Error::InvalidArgument(format!("layer `{first}` comes after `{last}`")));
    }
    MaskPlan::from_indices(table, layout, &(a..=b).collect::<Vec<_>>())
}

/// Control-unit layer ranges of the five generative-field configurations
/// evaluated on StyleGAN2-256.
pub const CONTROL_UNIT_CONFIGS: [(&str, &str); 5] = [
    ("conv0", "conv7"),
    ("conv0", "conv4"),
    ("conv0", "conv2"),
    ("conv3", "conv6"),
    ("conv6", "conv11"),
];

/// Plan for configuration `config` (1-based) of [`CONTROL_UNIT_CONFIGS`].
pub fn plan_config(table: &FieldTable, layout: &StyleLayout, config: usize) -> Result<MaskPlan> {
    let (first, last) = config
        .checked_sub(1)
        .and_then(|i| CONTROL_UNIT_CONFIGS.get(i))
        .ok_or_else(|| Error::InvalidArgument(format!("configuration must be 1..=5, got {config}")))?;
    plan_by_layers(table, layout, first, last)
}

/// Mean temple-to-temple distance (landmarks 1 and 17, 1-based) in pixels,
/// using x and y only.
pub fn face_scale<P: AsRef<[Point3]>>(faces: &[P]) -> Result<f64> {
    if faces.is_empty() {
        return Err(Error::Degenerate("no landmark sets".into()));
    }
    let mut total = 0.0;
    for face in faces {
        let pts = face.as_ref();
        if pts.len() < 17 {
            return Err(Error::Degenerate(format!(
                "landmark set has {} points, at least 17 are needed",
                pts.len()
            )));
        }
        let (a, b) = (pts[0], pts[16]);
        total += (a.x - b.x).hypot(a.y - b.y);
    }
    Ok(total / faces.len() as f64)
}
