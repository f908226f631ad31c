//! Brute-force influence footprints.
//!
//! Two independent measurements of how far a single input position of layer
//! `L` spreads by the time it reaches the generator output:
//!
//! * [`boolean_footprint`] pushes an "affected" mask forward using index
//!   arithmetic for each layer type (scatter form).
//! * [`numeric_footprint`] runs a real single-channel executor with strictly
//!   positive random weights twice, once with a perturbed input, and records
//!   where the outputs differ (gather form). Positive weights rule out
//!   cancellation, so both routes must agree.
//!
//! Both report the side of the affected bounding box and whether the affected
//! region touched the simulated border at any stage (`clipped`). Unclipped
//! footprints never exceed the analytic generative field; on stacks without
//! upsampling they equal it.
//!
//! Padding is SAME-centered with offset `floor((k - 1) / 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arch::{ArchSpec, LayerSpec};
use crate::error::{Error, Result};
use crate::fields::generative_field;

/// Largest simulated buffer, in cells.
const MAX_CELLS: usize = 1 << 24;

/// Output differences at or below this magnitude count as unaffected.
pub const NUMERIC_THRESHOLD: f64 = 1e-9;

/// How an upsampling layer realizes its scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Upsampling {
    /// Interleave zeros, then convolve (transposed convolution).
    #[default]
    ZeroInsertTransposed,
    /// Repeat each position `u` times, then apply a stride-1 convolution.
    NearestUpsampleConv,
}

impl Upsampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Upsampling::ZeroInsertTransposed => "zero-insert-transposed",
            Upsampling::NearestUpsampleConv => "nearest-upsample-conv",
        }
    }
}

impl std::str::FromStr for Upsampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-insert-transposed" | "zero-insert" | "transposed" => Ok(Upsampling::ZeroInsertTransposed),
            "nearest-upsample-conv" | "nearest" => Ok(Upsampling::NearestUpsampleConv),
            other => Err(Error::InvalidArgument(format!(
                "unknown upsampling semantics `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
pub enum Dims {
    #[default]
    #[serde(rename = "1D")]
    One,
    #[serde(rename = "2D")]
    Two,
}

/// Simulation setup shared by both oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simulation {
    pub semantics: Upsampling,
    pub dims: Dims,
    /// Side length of the simulated base feature map (replaces the
    /// architecture's own base resolution).
    pub sim_base: u32,
}

impl Simulation {
    pub fn new(semantics: Upsampling, dims: Dims, sim_base: u32) -> Self {
        Simulation {
            semantics,
            dims,
            sim_base,
        }
    }

    /// 1D zero-insert simulation at `sim_base`.
    pub fn one_d(sim_base: u32) -> Self {
        Simulation::new(Upsampling::ZeroInsertTransposed, Dims::One, sim_base)
    }
}

/// Smallest power-of-two base for which an impulse at any layer input fits
/// its full generative field inside the output without touching the border.
pub fn suggested_sim_base(arch: &ArchSpec) -> Result<u32> {
    let field = generative_field(arch, 0)?;
    let upsample = arch.output_resolution()? / u64::from(arch.base_resolution());
    let mut base = 4u64;
    while base * upsample < 2 * field + 4 * upsample {
        base *= 2;
    }
    u32::try_from(base).map_err(|_| Error::Overflow("simulation base"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchClass {
    Exact,
    Under,
    #[serde(rename = "OVER-BUG")]
    OverBug,
}

impl MatchClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchClass::Exact => "exact",
            MatchClass::Under => "under",
            MatchClass::OverBug => "OVER-BUG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FootprintResult {
    pub layer_index: usize,
    pub semantics: Upsampling,
    pub dims: Dims,
    /// Span of the affected output region, pixels per axis.
    pub footprint: u64,
    /// Generative field of the same layer.
    pub analytic: u64,
    pub clipped: bool,
}

impl FootprintResult {
    pub fn match_class(&self) -> MatchClass {
        match self.footprint.cmp(&self.analytic) {
            std::cmp::Ordering::Equal => MatchClass::Exact,
            std::cmp::Ordering::Less => MatchClass::Under,
            std::cmp::Ordering::Greater => MatchClass::OverBug,
        }
    }
}

fn pad_of(kernel: usize) -> isize {
    ((kernel - 1) / 2) as isize
}

/// Per-axis side lengths of every stage for layers `from..`, starting with
/// the input of `from`.
fn stage_sides(arch: &ArchSpec, from: usize, sim: &Simulation) -> Result<Vec<usize>> {
    arch.layer(from)?;
    let mut side = u64::from(sim.sim_base);
    for layer in &arch.layers()[..from] {
        side *= u64::from(layer.upsample);
    }
    let mut sides = Vec::with_capacity(arch.len() - from + 1);
    let cells = |s: u64| match sim.dims {
        Dims::One => Some(s),
        Dims::Two => s.checked_mul(s),
    };
    for layer in std::iter::once(None).chain(arch.layers()[from..].iter().map(Some)) {
        if let Some(layer) = layer {
            side = side
                .checked_mul(u64::from(layer.upsample))
                .ok_or(Error::Overflow("simulated side"))?;
        }
        match cells(side) {
            Some(c) if c <= MAX_CELLS as u64 => sides.push(side as usize),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "simulated feature map of side {side} exceeds the {MAX_CELLS}-cell limit; lower sim_base or use 1D"
                )))
            }
        }
    }
    if sides[0] < 3 {
        return Err(Error::SimulationTooSmall(format!(
            "layer {from} input has side {} with sim_base {}; no interior impulse position exists, use a larger sim_base",
            sides[0], sim.sim_base
        )));
    }
    Ok(sides)
}

/// Square (or 1D) buffer indexed row-major.
#[derive(Clone)]
struct Grid<T> {
    side: usize,
    dims: Dims,
    data: Vec<T>,
}

impl<T: Clone + Default> Grid<T> {
    fn new(side: usize, dims: Dims) -> Self {
        let n = match dims {
            Dims::One => side,
            Dims::Two => side * side,
        };
        Grid {
            side,
            dims,
            data: vec![T::default(); n],
        }
    }

    fn center(&self) -> usize {
        let c = self.side / 2;
        match self.dims {
            Dims::One => c,
            Dims::Two => c * self.side + c,
        }
    }
}

impl<T> Grid<T> {
    fn coords(&self, flat: usize) -> (usize, usize) {
        match self.dims {
            Dims::One => (0, flat),
            Dims::Two => (flat / self.side, flat % self.side),
        }
    }

    fn flat(&self, row: usize, col: usize) -> usize {
        match self.dims {
            Dims::One => col,
            Dims::Two => row * self.side + col,
        }
    }
}

/// Bounding-box span and border contact of the positions where `hit` holds.
fn extent<T>(grid: &Grid<T>, hit: impl Fn(&T) -> bool) -> (u64, bool) {
    let (mut lo_r, mut hi_r, mut lo_c, mut hi_c) = (usize::MAX, 0, usize::MAX, 0);
    for (i, v) in grid.data.iter().enumerate() {
        if hit(v) {
            let (r, c) = grid.coords(i);
            lo_r = lo_r.min(r);
            hi_r = hi_r.max(r);
            lo_c = lo_c.min(c);
            hi_c = hi_c.max(c);
        }
    }
    if lo_c == usize::MAX {
        return (0, false);
    }
    let last = grid.side - 1;
    let mut touches = lo_c == 0 || hi_c == last;
    let mut span = hi_c - lo_c + 1;
    if grid.dims == Dims::Two {
        touches |= lo_r == 0 || hi_r == last;
        span = span.max(hi_r - lo_r + 1);
    }
    (span as u64, touches)
}

// ---------------------------------------------------------------------------
// Boolean route: scatter each affected position to the output interval it
// reaches.

/// Output interval `[lo, hi]` reached from input position `p` along one axis.
fn reach(layer: &LayerSpec, semantics: Upsampling, p: usize) -> (isize, isize) {
    let k = layer.kernel as isize;
    let u = layer.upsample as isize;
    let pad = pad_of(layer.kernel as usize);
    let p = p as isize;
    if u == 1 {
        return (p + pad - k + 1, p + pad);
    }
    match semantics {
        Upsampling::ZeroInsertTransposed => (u * p - pad, u * p - pad + k - 1),
        Upsampling::NearestUpsampleConv => (u * p + pad - k + 1, u * p + u - 1 + pad),
    }
}

/// In-bounds part of [`reach`]. Out-of-bounds targets are dropped, which the
/// caller sees as border contact.
fn reached_positions(layer: &LayerSpec, semantics: Upsampling, p: usize, side: usize) -> Vec<usize> {
    let (lo, hi) = reach(layer, semantics, p);
    (lo.max(0)..=hi.min(side as isize - 1)).map(|o| o as usize).collect()
}

fn propagate_mask(mask: &Grid<bool>, layer: &LayerSpec, semantics: Upsampling, side: usize) -> Grid<bool> {
    let mut out = Grid::new(side, mask.dims);
    for (i, _) in mask.data.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = mask.coords(i);
        let cols = reached_positions(layer, semantics, c, side);
        let rows = match mask.dims {
            Dims::One => vec![0],
            Dims::Two => reached_positions(layer, semantics, r, side),
        };
        for &rr in &rows {
            for &cc in &cols {
                let f = out.flat(rr, cc);
                out.data[f] = true;
            }
        }
    }
    out
}

/// Footprint of a single-position impulse at the center of layer `index`'s
/// input, measured by boolean mask propagation.
pub fn boolean_footprint(arch: &ArchSpec, index: usize, sim: &Simulation) -> Result<FootprintResult> {
    let sides = stage_sides(arch, index, sim)?;
    let mut mask = Grid::new(sides[0], sim.dims);
    let c = mask.center();
    mask.data[c] = true;
    let mut clipped = false;
    for (layer, &side) in arch.layers()[index..].iter().zip(&sides[1..]) {
        mask = propagate_mask(&mask, layer, sim.semantics, side);
        clipped |= extent(&mask, |&m| m).1;
    }
    Ok(FootprintResult {
        layer_index: index,
        semantics: sim.semantics,
        dims: sim.dims,
        footprint: extent(&mask, |&m| m).0,
        analytic: generative_field(arch, index)?,
        clipped,
    })
}

// ---------------------------------------------------------------------------
// Numeric route: a plain single-channel executor in gather form.

struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    fn random(size: usize, dims: Dims, rng: &mut ChaCha8Rng) -> Self {
        let n = match dims {
            Dims::One => size,
            Dims::Two => size * size,
        };
        Kernel {
            size,
            weights: (0..n).map(|_| rng.random_range(0.1..1.0)).collect(),
        }
    }

    fn at(&self, ty: usize, tx: usize) -> f64 {
        self.weights[ty * self.size + tx]
    }
}

fn get(x: &Grid<f64>, r: isize, c: isize) -> f64 {
    let s = x.side as isize;
    if c < 0 || c >= s || r < 0 || r >= s {
        return 0.0;
    }
    x.data[x.flat(r as usize, c as usize)]
}

/// `y[o] = sum_t w[t] * x[o + t - pad]`
fn correlate(x: &Grid<f64>, kernel: &Kernel) -> Grid<f64> {
    let pad = pad_of(kernel.size);
    let mut y = Grid::new(x.side, x.dims);
    let rows = if x.dims == Dims::One { 1 } else { x.side };
    let taps_y = if x.dims == Dims::One { 1 } else { kernel.size };
    for r in 0..rows {
        for c in 0..x.side {
            let mut acc = 0.0;
            for ty in 0..taps_y {
                let rr = if x.dims == Dims::One {
                    0
                } else {
                    r as isize + ty as isize - pad
                };
                for tx in 0..kernel.size {
                    acc += kernel.at(ty, tx) * get(x, rr, c as isize + tx as isize - pad);
                }
            }
            let f = y.flat(r, c);
            y.data[f] = acc;
        }
    }
    y
}

/// `y[o] = sum_t w[t] * z[o - t + pad]`
fn convolve(z: &Grid<f64>, kernel: &Kernel) -> Grid<f64> {
    let pad = pad_of(kernel.size);
    let mut y = Grid::new(z.side, z.dims);
    let rows = if z.dims == Dims::One { 1 } else { z.side };
    let taps_y = if z.dims == Dims::One { 1 } else { kernel.size };
    for r in 0..rows {
        for c in 0..z.side {
            let mut acc = 0.0;
            for ty in 0..taps_y {
                let rr = if z.dims == Dims::One {
                    0
                } else {
                    r as isize - ty as isize + pad
                };
                for tx in 0..kernel.size {
                    acc += kernel.at(ty, tx) * get(z, rr, c as isize - tx as isize + pad);
                }
            }
            let f = y.flat(r, c);
            y.data[f] = acc;
        }
    }
    y
}

fn upsample(x: &Grid<f64>, factor: usize, semantics: Upsampling) -> Grid<f64> {
    let mut z = Grid::new(x.side * factor, x.dims);
    let rows = if x.dims == Dims::One { 1 } else { z.side };
    for r in 0..rows {
        for c in 0..z.side {
            let value = match semantics {
                Upsampling::ZeroInsertTransposed => {
                    let on_grid = c % factor == 0 && (x.dims == Dims::One || r % factor == 0);
                    if on_grid {
                        x.data[x.flat(r / factor, c / factor)]
                    } else {
                        0.0
                    }
                }
                Upsampling::NearestUpsampleConv => x.data[x.flat(r / factor, c / factor)],
            };
            let f = z.flat(r, c);
            z.data[f] = value;
        }
    }
    z
}

fn forward_layer(x: &Grid<f64>, layer: &LayerSpec, kernel: &Kernel, semantics: Upsampling) -> Grid<f64> {
    let u = layer.upsample as usize;
    if u == 1 {
        return correlate(x, kernel);
    }
    let z = upsample(x, u, semantics);
    match semantics {
        Upsampling::ZeroInsertTransposed => convolve(&z, kernel),
        Upsampling::NearestUpsampleConv => correlate(&z, kernel),
    }
}

/// Footprint measured by running the stack twice with random positive
/// weights and a `+1.0` perturbation at the center of layer `index`'s input.
pub fn numeric_footprint(arch: &ArchSpec, index: usize, sim: &Simulation, seed: u64) -> Result<FootprintResult> {
    numeric_footprint_with_impulse(arch, index, sim, seed, 1.0)
}

/// [`numeric_footprint`] with an explicit perturbation magnitude. A
/// perturbation that changes nothing is rejected.
pub fn numeric_footprint_with_impulse(
    arch: &ArchSpec,
    index: usize,
    sim: &Simulation,
    seed: u64,
    magnitude: f64,
) -> Result<FootprintResult> {
    let sides = stage_sides(arch, index, sim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels: Vec<Kernel> = arch.layers()[index..]
        .iter()
        .map(|l| Kernel::random(l.kernel as usize, sim.dims, &mut rng))
        .collect();

    let mut base = Grid::new(sides[0], sim.dims);
    for v in &mut base.data {
        *v = rng.random_range(0.1..1.0);
    }
    let mut perturbed = base.clone();
    let c = perturbed.center();
    perturbed.data[c] += magnitude;

    let differs = |a: &Grid<f64>, b: &Grid<f64>| Grid {
        side: a.side,
        dims: a.dims,
        data: a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs() > NUMERIC_THRESHOLD)
            .collect::<Vec<bool>>(),
    };

    let mut clipped = false;
    for (layer, kernel) in arch.layers()[index..].iter().zip(&kernels) {
        base = forward_layer(&base, layer, kernel, sim.semantics);
        perturbed = forward_layer(&perturbed, layer, kernel, sim.semantics);
        clipped |= extent(&differs(&base, &perturbed), |&m| m).1;
    }
    let (footprint, _) = extent(&differs(&base, &perturbed), |&m| m);
    if footprint == 0 {
        return Err(Error::Degenerate(format!(
            "perturbation of magnitude {magnitude} left the output unchanged"
        )));
    }
    Ok(FootprintResult {
        layer_index: index,
        semantics: sim.semantics,
        dims: sim.dims,
        footprint,
        analytic: generative_field(arch, index)?,
        clipped,
    })
}

/// Boolean footprint for every layer, in layer order.
pub fn verify_arch(arch: &ArchSpec, sim: &Simulation) -> Result<Vec<FootprintResult>> {
    (0..arch.len())
        .into_par_iter()
        .map(|i| boolean_footprint(arch, i, sim))
        .collect()
}
