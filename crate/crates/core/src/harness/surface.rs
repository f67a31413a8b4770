//! Mean-squared-error surfaces over two parameters.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{mean_squared_error, Dataset, Mlp, ParamId};

/// Evenly spaced axis `lo, …, hi` with `steps` points. A single step is the
/// point `lo`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let r = AxisRange { lo, hi, steps };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Config("axis bounds must be finite".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("axis needs at least one step".into()));
        }
        if self.steps >= 2 && self.lo >= self.hi {
            return Err(Error::Config(format!(
                "axis needs lo < hi, got {}:{}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.steps == 1 {
            return self.lo;
        }
        if i + 1 == self.steps {
            return self.hi;
        }
        self.lo + i as f64 * (self.hi - self.lo) / (self.steps - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.point(i)).collect()
    }
}

/// Parses `lo:hi:steps`.
impl FromStr for AxisRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected lo:hi:steps, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(bad());
        };
        AxisRange::new(
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            steps.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub param_a: ParamId,
    pub range_a: AxisRange,
    pub param_b: ParamId,
    pub range_b: AxisRange,
}

/// Sampled surface; `values[i * steps_b + j]` is the error at
/// (`a[i]`, `b[j]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub grid: SurfaceGrid,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub values: Vec<f64>,
}

impl Surface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.b.len() + j]
    }

    /// Grid indices of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .map_or(0, |(k, _)| k);
        (k / self.b.len(), k % self.b.len())
    }
}

/// Installs each grid pair into a copy of `template` and evaluates the mean
/// squared error. Rows are computed in parallel; the output does not depend
/// on scheduling.
pub fn sample_error_surface(template: &Mlp, data: &Dataset, grid: &SurfaceGrid) -> Result<Surface> {
    grid.range_a.validate()?;
    grid.range_b.validate()?;
    template.get(grid.param_a)?;
    template.get(grid.param_b)?;
    if grid.param_a == grid.param_b {
        return Err(Error::Config(format!(
            "surface axes must differ, both are {}",
            grid.param_a
        )));
    }
    let a = grid.range_a.points();
    let b = grid.range_b.points();
    let rows: Vec<Result<Vec<f64>>> = a
        .par_iter()
        .map(|&x| {
            let mut mlp = template.clone();
            mlp.set(grid.param_a, x)?;
            b.iter()
                .map(|&y| {
                    mlp.set(grid.param_b, y)?;
                    mean_squared_error(&mlp, data)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(a.len() * b.len());
    for r in rows {
        values.extend(r?);
    }
    Ok(Surface {
        grid: grid.clone(),
        a,
        b,
        values,
    })
}
