//! Multi-scale structural similarity.
//!
//! Per scale, local statistics come from an 11×11 Gaussian window (σ = 1.5)
//! applied without padding. Scales are produced by 2×2 average pooling. The
//! first `M - 1` scales contribute their contrast-structure term and the last
//! scale its full SSIM, each raised to its weight. Color images are scored per
//! channel and averaged.

use crate::error::{Error, Result};

use super::ImageTensor;

pub const DEFAULT_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, PartialEq)]
pub struct MsSsim {
    pub scales: usize,
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for MsSsim {
    fn default() -> Self {
        MsSsim {
            scales: 5,
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn zip(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            v: self.v.iter().zip(&other.v).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn downsample(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut v = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let at = |rr: usize, cc: usize| self.v[rr * self.w + cc];
                v.push(
                    0.25 * (at(2 * r, 2 * c) + at(2 * r, 2 * c + 1) + at(2 * r + 1, 2 * c) + at(2 * r + 1, 2 * c + 1)),
                );
            }
        }
        Plane { h, w, v }
    }
}

impl MsSsim {
    /// Scale weights, renormalized to sum to one when fewer than five
    /// scales are used.
    pub fn weights(&self) -> Vec<f64> {
        if self.scales == DEFAULT_WEIGHTS.len() {
            return DEFAULT_WEIGHTS.to_vec();
        }
        let w = &DEFAULT_WEIGHTS[..self.scales];
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    /// Smallest image side this configuration accepts.
    pub fn min_side(&self) -> usize {
        self.window << (self.scales - 1)
    }

    fn kernel(&self) -> Vec<f64> {
        let half = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|x| x / s).collect()
    }

    /// Separable valid-mode filtering.
    fn filter(&self, p: &Plane, g: &[f64]) -> Plane {
        let n = g.len();
        let (h, w) = (p.h, p.w - n + 1);
        let mut tmp = vec![0.0; h * w];
        for r in 0..h {
            let row = &p.v[r * p.w..(r + 1) * p.w];
            for c in 0..w {
                tmp[r * w + c] = g.iter().zip(&row[c..c + n]).map(|(a, b)| a * b).sum();
            }
        }
        let oh = h - n + 1;
        let mut out = vec![0.0; oh * w];
        for r in 0..oh {
            for c in 0..w {
                out[r * w + c] = g.iter().enumerate().map(|(t, a)| a * tmp[(r + t) * w + c]).sum();
            }
        }
        Plane { h: oh, w, v: out }
    }

    /// Mean SSIM and mean contrast-structure term for one scale.
    fn ssim_cs(&self, x: &Plane, y: &Plane, g: &[f64]) -> (f64, f64) {
        let c1 = self.k1 * self.k1;
        let c2 = self.k2 * self.k2;
        let mu_x = self.filter(x, g);
        let mu_y = self.filter(y, g);
        let xx = self.filter(&x.zip(x, |a, b| a * b), g);
        let yy = self.filter(&y.zip(y, |a, b| a * b), g);
        let xy = self.filter(&x.zip(y, |a, b| a * b), g);
        let n = mu_x.v.len() as f64;
        let (mut ssim, mut cs) = (0.0, 0.0);
        for i in 0..mu_x.v.len() {
            let (mx, my) = (mu_x.v[i], mu_y.v[i]);
            let sxx = xx.v[i] - mx * mx;
            let syy = yy.v[i] - my * my;
            let sxy = xy.v[i] - mx * my;
            let cs_i = (2.0 * sxy + c2) / (sxx + syy + c2);
            let l_i = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            cs += cs_i;
            ssim += l_i * cs_i;
        }
        (ssim / n, cs / n)
    }

    fn plane_score(&self, mut x: Plane, mut y: Plane) -> f64 {
        let g = self.kernel();
        let weights = self.weights();
        let mut score = 1.0;
        for (scale, w) in weights.iter().enumerate() {
            let (ssim, cs) = self.ssim_cs(&x, &y, &g);
            if scale + 1 == self.scales {
                score *= ssim.max(0.0).powf(*w);
            } else {
                score *= cs.max(0.0).powf(*w);
                x = x.downsample();
                y = y.downsample();
            }
        }
        score
    }

    pub fn compute(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
        if !(1..=5).contains(&self.scales) {
            return Err(Error::InvalidArgument(format!(
                "scale count {} outside 1..=5",
                self.scales
            )));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidArgument("window size must be odd".into()));
        }
        a.check_same_shape(b)?;
        let side = a.height().min(a.width());
        if side < self.min_side() {
            let fits = (1..=5).rev().find(|&s| self.window << (s - 1) <= side);
            return Err(Error::InvalidArgument(match fits {
                Some(s) => format!(
                    "image side {side} is below {} required for {} scales; use {s} scales",
                    self.min_side(),
                    self.scales
                ),
                None => format!("image side {side} is smaller than the {}-pixel window", self.window),
            }));
        }
        let (h, w) = (a.height(), a.width());
        let total: f64 = (0..a.channels())
            .map(|c| self.plane_score(Plane { h, w, v: a.plane(c) }, Plane { h, w, v: b.plane(c) }))
            .sum();
        Ok(total / a.channels() as f64)
    }
}

/// MS-SSIM with the standard five-scale configuration.
pub fn ms_ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    MsSsim::default().compute(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(side: usize) -> ImageTensor {
        let data = (0..side * side)
            .map(|i| {
                let (r, c) = (i / side, i % side);
                0.25 + 0.5 * (((r * 7 + c * 3) % 23) as f64 / 22.0)
            })
            .collect();
        ImageTensor::new(side, side, 1, data).unwrap()
    }

    #[test]
    fn self_similarity() {
        let img = gradient(176);
        assert!((ms_ssim(&img, &img).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inverted_image_scores_lower() {
        let img = gradient(176);
        let inv = img.map(|v| 1.0 - v);
        assert!(ms_ssim(&img, &inv).unwrap() < 0.9);
    }

    #[test]
    fn constants() {
        let half = ImageTensor::constant(176, 180, 3, 0.5).unwrap();
        assert!((ms_ssim(&half, &half).unwrap() - 1.0).abs() < 1e-12);
        // only the coarsest luminance term survives for two different constants
        let zero = ImageTensor::constant(176, 176, 1, 0.0).unwrap();
        let one = ImageTensor::constant(176, 176, 1, 1.0).unwrap();
        let c1: f64 = 1e-4;
        let expect = (c1 / (1.0 + c1)).powf(0.1333);
        assert!((ms_ssim(&zero, &one).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn size_and_shape_errors() {
        let small = gradient(100);
        let err = ms_ssim(&small, &small).unwrap_err().to_string();
        assert!(err.contains("use 4 scales"), "{err}");
        let cfg = MsSsim {
            scales: 4,
            ..MsSsim::default()
        };
        assert!((cfg.compute(&small, &small).unwrap() - 1.0).abs() < 1e-9);
        assert!(ms_ssim(&gradient(176), &gradient(180)).is_err());
        let bad = MsSsim {
            scales: 0,
            ..MsSsim::default()
        };
        assert!(bad.compute(&small, &small).is_err());
    }

    #[test]
    fn weights_renormalize() {
        let cfg = MsSsim {
            scales: 2,
            ..MsSsim::default()
        };
        let w = cfg.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(MsSsim::default().weights().len(), 5);
    }
}
