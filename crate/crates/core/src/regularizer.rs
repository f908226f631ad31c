//! Diagonal-Gaussian style regularizer.
//!
//! Every style channel is modeled as an independent Gaussian whose mean and
//! standard deviation are estimated from a dataset of style vectors. The
//! log-likelihood (up to constants) is
//!
//! ```text
//! L(S) = -Σ_i (s_i - μ_i)² / (2 σ_i²)
//! ```
//!
//! with each channel weighted by its own `σ_i`. Adding `-L(S)` to a training
//! loss keeps edited style vectors near the data manifold.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::style::StyleVector;

pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sample_count: usize,
    pub epsilon_floor: f64,
}

impl ChannelStats {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, sample_count: usize, epsilon_floor: f64) -> Result<Self> {
        check_len(mu.len(), sigma.len())?;
        if epsilon_floor.is_nan() || epsilon_floor <= 0.0 {
            return Err(Error::InvalidArgument("epsilon floor must be positive".into()));
        }
        if let Some(i) = sigma.iter().position(|&s| s.is_nan() || s < epsilon_floor) {
            return Err(Error::InvalidArgument(format!(
                "sigma[{i}] = {} is below the floor {epsilon_floor}",
                sigma[i]
            )));
        }
        Ok(ChannelStats {
            mu,
            sigma,
            sample_count,
            epsilon_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Writes `dim,mu,sigma` rows with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dim", "mu", "sigma"])?;
        for (i, (m, s)) in self.mu.iter().zip(&self.sigma).enumerate() {
            w.write_record([i.to_string(), m.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// Reads a `dim,mu,sigma` file. Dimensions must be `0..n` in order and
    /// `#` lines are skipped. Sigmas below `epsilon_floor` are rejected.
    pub fn read_csv<R: Read>(input: R, epsilon_floor: f64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["dim", "mu", "sigma"] {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `dim,mu,sigma`".into(),
            });
        }
        let (mut mu, mut sigma) = (Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(row + 2, |p| p.line() as usize);
            let field = |i: usize| -> Result<&str> {
                rec.get(i).map(str::trim).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", rec.len()),
                })
            };
            let dim: usize = field(0)?.parse().map_err(|e| Error::Parse {
                line,
                message: format!("dim: {e}"),
            })?;
            if dim != mu.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected dim {}, found {dim}", mu.len()),
                });
            }
            let num = |i: usize, name: &str| -> Result<f64> {
                field(i)?.parse().map_err(|e| Error::Parse {
                    line,
                    message: format!("{name}: {e}"),
                })
            };
            mu.push(num(1, "mu")?);
            sigma.push(num(2, "sigma")?);
        }
        ChannelStats::new(mu, sigma, 0, epsilon_floor)
    }
}

/// Per-channel mean and population standard deviation, with every sigma
/// raised to at least `epsilon_floor`.
pub fn estimate_stats(styles: &[StyleVector], epsilon_floor: f64) -> Result<ChannelStats> {
    if styles.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 style vectors are required, got {}",
            styles.len()
        )));
    }
    let dim = styles[0].len();
    for s in styles {
        check_len(dim, s.len())?;
    }
    let n = styles.len() as f64;
    let mut mu = vec![0.0; dim];
    for s in styles {
        for (m, v) in mu.iter_mut().zip(&s.0) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for s in styles {
        for ((acc, v), m) in var.iter_mut().zip(&s.0).zip(&mu) {
            *acc += (v - m) * (v - m);
        }
    }
    let sigma = var.into_iter().map(|v| (v / n).sqrt().max(epsilon_floor)).collect();
    ChannelStats::new(mu, sigma, styles.len(), epsilon_floor)
}

/// `L(S) = -Σ (s_i - μ_i)² / (2σ_i²)`, never positive.
pub fn log_likelihood(style: &StyleVector, stats: &ChannelStats) -> Result<f64> {
    check_len(stats.len(), style.len())?;
    Ok(-style
        .0
        .iter()
        .zip(&stats.mu)
        .zip(&stats.sigma)
        .map(|((s, m), sd)| (s - m).powi(2) / (2.0 * sd * sd))
        .sum::<f64>())
}

/// `∂L/∂s_i = -(s_i - μ_i) / σ_i²`
pub fn log_likelihood_grad(style: &StyleVector, stats: &ChannelStats) -> Result<Vec<f64>> {
    check_len(stats.len(), style.len())?;
    Ok(style
        .0
        .iter()
        .zip(&stats.mu)
        .zip(&stats.sigma)
        .map(|((s, m), sd)| -(s - m) / (sd * sd))
        .collect())
}

/// `base_loss + weight · (-L(S))`.
pub fn regularized_objective(base_loss: f64, style: &StyleVector, stats: &ChannelStats, weight: f64) -> Result<f64> {
    if weight.is_nan() || weight < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "weight must be non-negative, got {weight}"
        )));
    }
    Ok(base_loss + weight * -log_likelihood(style, stats)?)
}
