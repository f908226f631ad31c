//! Analytic generative fields.
//!
//! The generative field of layer `L` is the side length of the output region
//! that one position of that layer's input feature map can influence. It is
//! the receptive-field recurrence run in reverse: walking from the last layer
//! back to `L`, each layer `j` adds `(k_j - 1)` times the accumulated upsample
//! product of layers `j..N`, and the result is offset by one.
//!
//! Values are structural and are not clipped to the output resolution; for
//! the first layer of StyleGAN2-256 the field is 507 pixels on a 256-pixel
//! image.

use serde::Serialize;

use crate::arch::ArchSpec;
use crate::error::{Error, Result};

/// Generative-field column as printed in the published StyleGAN2-256 layer
/// table (conv0..conv12). Row conv0 is one pixel below the formula value.
pub const PUBLISHED_STYLEGAN2_256: [u64; 13] = [506, 379, 251, 187, 123, 91, 59, 43, 27, 19, 11, 7, 3];

/// Generative field of the input of layer `index`, in output pixels.
pub fn generative_field(arch: &ArchSpec, index: usize) -> Result<u64> {
    arch.layer(index)?;
    let mut stride = 1u64;
    let mut field = 1u64;
    for layer in arch.layers()[index..].iter().rev() {
        stride = stride
            .checked_mul(u64::from(layer.upsample))
            .ok_or(Error::Overflow("generative field stride product"))?;
        field = u64::from(layer.kernel - 1)
            .checked_mul(stride)
            .and_then(|term| field.checked_add(term))
            .ok_or(Error::Overflow("generative field"))?;
    }
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldRecord {
    pub layer_id: String,
    pub style_label: Option<String>,
    pub input_resolution: u64,
    pub generative_field: u64,
    pub channels_in: u32,
    /// Published value for this row, when the architecture has one on record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published: Option<u64>,
}

impl FieldRecord {
    /// `(computed, published)` when the two disagree.
    pub fn discrepancy(&self) -> Option<(u64, u64)> {
        self.published
            .filter(|&p| p != self.generative_field)
            .map(|p| (self.generative_field, p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldTable {
    pub arch_name: String,
    pub records: Vec<FieldRecord>,
}

impl FieldTable {
    pub fn compute(arch: &ArchSpec) -> Result<Self> {
        let published = published_fields(arch);
        let records = arch
            .layers()
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                Ok(FieldRecord {
                    layer_id: layer.id.clone(),
                    style_label: layer.style_label.clone(),
                    input_resolution: arch.input_resolution(i)?,
                    generative_field: generative_field(arch, i)?,
                    channels_in: layer.channels_in,
                    published: published.map(|p| p[i]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldTable {
            arch_name: arch.name().to_string(),
            records,
        })
    }

    pub fn fields(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.generative_field).collect()
    }

    pub fn record(&self, layer_id: &str) -> Result<&FieldRecord> {
        self.records
            .iter()
            .find(|r| r.layer_id == layer_id)
            .ok_or_else(|| Error::UnknownLayer(layer_id.to_string()))
    }

    /// Human-readable notes for rows that disagree with a published value.
    pub fn notes(&self) -> Vec<String> {
        self.records
            .iter()
            .filter_map(|r| {
                r.discrepancy().map(|(computed, published)| {
                    format!(
                        "{}: computed generative field {computed} differs from the published value {published} by {}",
                        r.layer_id,
                        computed.abs_diff(published)
                    )
                })
            })
            .collect()
    }

    /// Writes the table as CSV with header
    /// `layer_id,style_label,input_resolution,generative_field,channels_in`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "layer_id",
            "style_label",
            "input_resolution",
            "generative_field",
            "channels_in",
        ])?;
        for r in &self.records {
            w.write_record([
                r.layer_id.clone(),
                r.style_label.clone().unwrap_or_default(),
                r.input_resolution.to_string(),
                r.generative_field.to_string(),
                r.channels_in.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// Entry point matching the other analyses: one record per layer, in order.
pub fn fields_table(arch: &ArchSpec) -> Result<FieldTable> {
    FieldTable::compute(arch)
}

fn published_fields(arch: &ArchSpec) -> Option<&'static [u64; 13]> {
    let preset = ArchSpec::stylegan2(256).ok()?;
    (arch.base_resolution() == preset.base_resolution() && arch.layers() == preset.layers())
        .then_some(&PUBLISHED_STYLEGAN2_256)
}
