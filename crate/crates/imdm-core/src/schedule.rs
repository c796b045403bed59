//! Noise schedule and reverse-process time grid.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, invalid, Result};

/// Schedule family. Only the linear schedule is supported: it makes the
/// per-step unmask probability on a uniform grid constant, which keeps the
/// enumeration oracles analytic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScheduleKind {
    Linear,
}

/// Monotone non-increasing survival probability `alpha(t)` on `[0, 1]`,
/// clipped to `[clip_eps, 1 - clip_eps]` at the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub clip_eps: f64,
}

impl Schedule {
    pub fn linear(clip_eps: f64) -> Result<Self> {
        if !(clip_eps > 0.0 && clip_eps < 0.5) {
            return Err(invalid(format!("clip_eps must be in (0, 0.5), got {clip_eps}")));
        }
        Ok(Schedule {
            kind: ScheduleKind::Linear,
            clip_eps,
        })
    }

    /// `(alpha(t), alpha'(t))`. Inside the clip regions alpha is flat, so the
    /// derivative there is 0.
    pub fn alpha_at(&self, t: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("t must be in [0, 1], got {t}")));
        }
        let ScheduleKind::Linear = self.kind;
        let raw = 1.0 - t;
        let lo = self.clip_eps;
        let hi = 1.0 - self.clip_eps;
        if raw >= hi {
            Ok((hi, 0.0))
        } else if raw <= lo {
            Ok((lo, 0.0))
        } else {
            Ok((raw, -1.0))
        }
    }

    /// `alpha(t)` alone.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.alpha_at(t)?.0)
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            kind: ScheduleKind::Linear,
            clip_eps: 1e-4,
        }
    }
}

/// Strictly decreasing reverse-time knots `t_0 = 1 > ... > t_T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// The k-th reverse step is `t = knots[k] -> s = knots[k + 1]`.
    pub fn step(&self, k: usize) -> (f64, f64) {
        (self.knots[k], self.knots[k + 1])
    }
}

/// Uniform grid with `t_k = 1 - k/T`; endpoints are exactly 1 and 0.
pub fn make_grid(steps: usize) -> Result<TimeGrid> {
    if steps == 0 {
        return Err(invalid("grid needs at least one step"));
    }
    let t = steps as f64;
    let knots = (0..=steps).map(|k| (steps - k) as f64 / t).collect();
    Ok(TimeGrid { knots })
}
