//! Benchmark objectives: Rastrigin and Ackley, plus their multi-modal
//! min-compositions with planted global minimizers.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base (uni-modal) function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Rastrigin,
    Ackley,
}

impl FunctionKind {
    /// Value attained at the base minimizer (the origin).
    pub fn minimum_value(self) -> f64 {
        match self {
            FunctionKind::Rastrigin => -10.0,
            FunctionKind::Ackley => 0.0,
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionKind::Rastrigin => f.write_str("rastrigin"),
            FunctionKind::Ackley => f.write_str("ackley"),
        }
    }
}

/// `R(x) = (1/d) Σ (xᵢ² − 10 cos 2πxᵢ)` evaluated at `x − shift`.
#[inline]
fn rastrigin_shifted(x: &[f64], shift: &[f64]) -> f64 {
    let sum: f64 = x
        .iter()
        .zip(shift)
        .map(|(xi, si)| {
            let z = xi - si;
            z * z - 10.0 * (2.0 * PI * z).cos()
        })
        .sum();
    sum / x.len() as f64
}

#[inline]
fn ackley_shifted(x: &[f64], shift: &[f64]) -> f64 {
    let d = x.len() as f64;
    let (sq, cos) = x.iter().zip(shift).fold((0.0, 0.0), |(sq, cos), (xi, si)| {
        let z = xi - si;
        (sq + z * z, cos + (2.0 * PI * z).cos())
    });
    -20.0 * (-0.2 * (sq / d).sqrt()).exp() - (cos / d).exp() + 20.0 + E
}

#[inline]
fn base_shifted(kind: FunctionKind, x: &[f64], shift: &[f64]) -> f64 {
    match kind {
        FunctionKind::Rastrigin => rastrigin_shifted(x, shift),
        FunctionKind::Ackley => ackley_shifted(x, shift),
    }
}

/// Evaluates the uni-modal base function at `x`.
pub fn eval_base(kind: FunctionKind, x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("point must have at least one coordinate"));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("coordinate {i} is not finite")));
    }
    let origin = vec![0.0; x.len()];
    Ok(base_shifted(kind, x, &origin))
}

/// A benchmark objective with a known set of global minimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    kind: FunctionKind,
    dim: usize,
    minimizers: Vec<Vec<f64>>,
}

/// Names accepted by [`ObjectiveSpec::preset`].
pub const PRESET_NAMES: &[&str] = &[
    "rastrigin1",
    "rastrigin2",
    "rastrigin4",
    "ackley1",
    "ackley2",
    "ackley4",
];

impl ObjectiveSpec {
    pub fn new(kind: FunctionKind, dim: usize, minimizers: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if minimizers.is_empty() {
            return Err(Error::invalid("at least one minimizer is required"));
        }
        for (k, m) in minimizers.iter().enumerate() {
            if m.len() != dim {
                return Err(Error::invalid(format!(
                    "minimizer {k} has {} coordinates, expected {dim}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("minimizer {k} is not finite")));
            }
        }
        for a in 0..minimizers.len() {
            for b in a + 1..minimizers.len() {
                if minimizers[a] == minimizers[b] {
                    return Err(Error::invalid(format!("minimizers {a} and {b} coincide")));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            minimizers,
        })
    }

    /// Builds an objective whose minimizers are `c·(1, …, 1)` for each
    /// scalar offset `c`.
    pub fn broadcast(kind: FunctionKind, dim: usize, offsets: &[f64]) -> Result<Self> {
        let minimizers = offsets.iter().map(|&c| vec![c; dim]).collect();
        Self::new(kind, dim, minimizers)
    }

    /// Looks up a named preset. The trailing digit is the number of planted
    /// minima: 1 → {0}, 2 → {−5, 5} (Rastrigin) or {−3, 3} (Ackley),
    /// 4 → {−7, −3, 3, 7}.
    pub fn preset(name: &str, dim: usize) -> Result<Self> {
        let (kind, offsets): (_, &[f64]) = match name {
            "rastrigin1" => (FunctionKind::Rastrigin, &[0.0]),
            "rastrigin2" => (FunctionKind::Rastrigin, &[-5.0, 5.0]),
            "rastrigin4" => (FunctionKind::Rastrigin, &[-7.0, -3.0, 3.0, 7.0]),
            "ackley1" => (FunctionKind::Ackley, &[0.0]),
            "ackley2" => (FunctionKind::Ackley, &[-3.0, 3.0]),
            "ackley4" => (FunctionKind::Ackley, &[-7.0, -3.0, 3.0, 7.0]),
            other => {
                return Err(Error::invalid(format!(
                    "unknown objective preset `{other}` (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Self::broadcast(kind, dim, offsets)
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimizers(&self) -> &[Vec<f64>] {
        &self.minimizers
    }

    pub fn n_minima(&self) -> usize {
        self.minimizers.len()
    }

    /// Min-composition value `min_k base(x − x̄_k)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, objective expects {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("coordinate {i} is not finite")));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Same as [`eval`](Self::eval) without the dimension and finiteness
    /// checks; used on the solver hot path where both are already enforced.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.minimizers
            .iter()
            .map(|m| base_shifted(self.kind, x, m))
            .fold(f64::INFINITY, f64::min)
    }
}

impl FromStr for FunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rastrigin" => Ok(FunctionKind::Rastrigin),
            "ackley" => Ok(FunctionKind::Ackley),
            other => Err(Error::invalid(format!("unknown function kind `{other}`"))),
        }
    }
}
