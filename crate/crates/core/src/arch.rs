//! Architecture description of a convolutional generator stack.
//!
//! An [`ArchSpec`] is an ordered list of convolution layers, each carrying a
//! kernel size and an integer spatial upsample factor. RGB output layers are
//! not represented. Architectures come either from a TOML file:
//!
//! ```toml
//! name = "toy"
//! base_resolution = 4
//!
//! [[layers]]
//! id = "conv0"
//! kernel = 3
//! upsample = 2
//! channels_in = 8
//! channels_out = 8
//! style_label = "s0"   # optional
//! ```
//!
//! or from [`ArchSpec::stylegan2`], which builds the StyleGAN2 synthesis
//! stack for a given output resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One convolution layer of the generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub id: String,
    pub kernel: u32,
    /// Spatial scale factor applied by the layer; 1 is a plain stride-1 conv.
    pub upsample: u32,
    pub channels_in: u32,
    pub channels_out: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_label: Option<String>,
}

impl LayerSpec {
    pub fn new(id: impl Into<String>, kernel: u32, upsample: u32, channels_in: u32, channels_out: u32) -> Self {
        LayerSpec {
            id: id.into(),
            kernel,
            upsample,
            channels_in,
            channels_out,
            style_label: None,
        }
    }

    pub fn with_style_label(mut self, label: impl Into<String>) -> Self {
        self.style_label = Some(label.into());
        self
    }
}

/// A validated, immutable generator architecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchSpec {
    name: String,
    base_resolution: u32,
    layers: Vec<LayerSpec>,
}

// File form; ids may be omitted and are filled in as conv0..convN-1.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArch {
    name: String,
    base_resolution: u32,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    id: Option<String>,
    kernel: u32,
    upsample: u32,
    channels_in: u32,
    channels_out: u32,
    style_label: Option<String>,
}

impl ArchSpec {
    /// Validates and builds an architecture.
    pub fn new(name: impl Into<String>, base_resolution: u32, layers: Vec<LayerSpec>) -> Result<Self> {
        let arch = ArchSpec {
            name: name.into(),
            base_resolution,
            layers,
        };
        arch.validate()?;
        Ok(arch)
    }

    fn validate(&self) -> Result<()> {
        if self.base_resolution == 0 {
            return Err(Error::InvalidArch("base_resolution must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArch("layer list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |message: String| Error::InvalidLayer {
                layer: layer.id.clone(),
                message,
            };
            if !seen.insert(layer.id.as_str()) {
                return Err(bad("duplicate layer id".into()));
            }
            if layer.kernel == 0 {
                return Err(bad("kernel must be >= 1".into()));
            }
            if layer.upsample == 0 {
                return Err(bad("upsample must be >= 1".into()));
            }
            if layer.channels_in == 0 || layer.channels_out == 0 {
                return Err(bad("channel counts must be positive".into()));
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                if prev.channels_out != layer.channels_in {
                    return Err(bad(format!(
                        "channels_in {} does not match channels_out {} of `{}`",
                        layer.channels_in, prev.channels_out, prev.id
                    )));
                }
            }
        }
        self.output_resolution()?;
        Ok(())
    }

    /// StyleGAN2 synthesis stack (without toRGB layers) for `resolution`.
    ///
    /// The 4×4 block has a single stride-1 conv; each later block adds an
    /// upsampling conv followed by a stride-1 conv. Feature width at block
    /// resolution `r` is `min(512, 16384 / r)`.
    pub fn stylegan2(resolution: u32) -> Result<Self> {
        if !resolution.is_power_of_two() || !(8..=1024).contains(&resolution) {
            return Err(Error::UnsupportedResolution(resolution));
        }
        let width = |r: u32| (16384 / r).min(512);
        let mut layers = vec![LayerSpec::new("conv0", 3, 1, width(4), width(4)).with_style_label("s0")];
        let mut res = 8;
        let mut block = 1;
        while res <= resolution {
            let conv = layers.len();
            layers.push(
                LayerSpec::new(format!("conv{conv}"), 3, 2, width(res / 2), width(res))
                    .with_style_label(format!("s{}", 3 * block - 1)),
            );
            layers.push(
                LayerSpec::new(format!("conv{}", conv + 1), 3, 1, width(res), width(res))
                    .with_style_label(format!("s{}", 3 * block)),
            );
            res *= 2;
            block += 1;
        }
        ArchSpec::new(format!("stylegan2-{resolution}"), 4, layers)
    }

    /// Parses a TOML architecture file and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawArch = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |span| line_of(text, span.start)),
            message: e.message().to_string(),
        })?;
        let layers = raw
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| LayerSpec {
                id: l.id.unwrap_or_else(|| format!("conv{i}")),
                kernel: l.kernel,
                upsample: l.upsample,
                channels_in: l.channels_in,
                channels_out: l.channels_out,
                style_label: l.style_label,
            })
            .collect();
        ArchSpec::new(raw.name, raw.base_resolution, layers)
    }

    /// Renders the architecture in the file format accepted by [`ArchSpec::parse`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("architecture is always serializable")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_resolution(&self) -> u32 {
        self.base_resolution
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, index: usize) -> Result<&LayerSpec> {
        self.layers.get(index).ok_or(Error::OutOfRange {
            what: "layer",
            index,
            len: self.layers.len(),
        })
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| Error::UnknownLayer(id.to_string()))
    }

    /// Side length of the final feature map.
    pub fn output_resolution(&self) -> Result<u64> {
        self.layers.iter().try_fold(u64::from(self.base_resolution), |acc, l| {
            acc.checked_mul(u64::from(l.upsample))
                .ok_or(Error::Overflow("output resolution"))
        })
    }

    /// Side length of the feature map consumed by layer `index`.
    pub fn input_resolution(&self, index: usize) -> Result<u64> {
        self.layer(index)?;
        self.layers[..index]
            .iter()
            .try_fold(u64::from(self.base_resolution), |acc, l| {
                acc.checked_mul(u64::from(l.upsample))
                    .ok_or(Error::Overflow("input resolution"))
            })
    }

    /// Architecture made of layers `from..` only, fed at its own input resolution.
    pub fn suffix(&self, from: usize) -> Result<ArchSpec> {
        let base = self.input_resolution(from)?;
        let base = u32::try_from(base).map_err(|_| Error::Overflow("suffix base resolution"))?;
        ArchSpec::new(format!("{}[{}..]", self.name, from), base, self.layers[from..].to_vec())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
