//! Problem instances: two depots, a shared target set, and one symmetric
//! metric cost matrix per vehicle.
//!
//! Matrix row/column 0 is the depot of that vehicle; rows `1..=n` are the
//! targets in a fixed order shared by both matrices. Travel between two
//! targets is never more expensive for the first vehicle than for the
//! second; depot rows are independent.

use std::fmt;
use std::path::Path;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weight::{rational_from_decimal, Weight};

/// Which vehicle's metric an edge or tree is priced under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Vehicle {
    First,
    Second,
}

impl Vehicle {
    pub fn index(self) -> usize {
        match self {
            Vehicle::First => 1,
            Vehicle::Second => 2,
        }
    }
}

impl fmt::Display for Vehicle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-numeric cost in cost{matrix} at ({i},{j})")]
    NonNumeric { matrix: u8, i: usize, j: usize },
    #[error("non-finite cost in cost{matrix} at ({i},{j})")]
    NonFinite { matrix: u8, i: usize, j: usize },
    #[error("negative cost at ({i},{j}) in cost{matrix}")]
    NegativeCost { matrix: u8, i: usize, j: usize },
    #[error("alpha must be >= 1 (got {0})")]
    BadAlpha(f64),
}

/// A validated-shape 2DHTSP instance. Metric properties are checked
/// separately by [`Instance::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Instance {
    pub n_targets: usize,
    pub cost1: Vec<Vec<f64>>,
    pub cost2: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl Instance {
    /// Builds an instance, checking structure only: both matrices square of
    /// size `n_targets + 1`, entries finite and non-negative, names (if any)
    /// matching the target count.
    pub fn new(
        cost1: Vec<Vec<f64>>,
        cost2: Vec<Vec<f64>>,
        names: Option<Vec<String>>,
    ) -> Result<Self, InstanceError> {
        if cost1.len() != cost2.len() {
            return Err(InstanceError::Dimension(format!(
                "cost1 has {} rows, cost2 has {}",
                cost1.len(),
                cost2.len()
            )));
        }
        if cost1.is_empty() {
            return Err(InstanceError::Dimension(
                "matrices must at least cover the depot row".into(),
            ));
        }
        let dim = cost1.len();
        for (mi, m) in [(1u8, &cost1), (2u8, &cost2)] {
            for (i, row) in m.iter().enumerate() {
                if row.len() != dim {
                    return Err(InstanceError::Dimension(format!(
                        "cost{mi} row {i} has {} entries, expected {dim}",
                        row.len()
                    )));
                }
                for (j, &x) in row.iter().enumerate() {
                    if !x.is_finite() {
                        return Err(InstanceError::NonFinite { matrix: mi, i, j });
                    }
                    if x < 0.0 {
                        return Err(InstanceError::NegativeCost { matrix: mi, i, j });
                    }
                }
            }
        }
        let n_targets = dim - 1;
        if let Some(names) = &names {
            if names.len() != n_targets {
                return Err(InstanceError::Dimension(format!(
                    "{} names for {} targets",
                    names.len(),
                    n_targets
                )));
            }
        }
        Ok(Instance { n_targets, cost1, cost2, names })
    }

    /// Checks the metric assumptions and returns every violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let dim = self.n_targets + 1;
        for (vehicle, m) in [(Vehicle::First, &self.cost1), (Vehicle::Second, &self.cost2)] {
            for i in 0..dim {
                if m[i][i] != 0.0 {
                    report.push(Violation::Diagonal { vehicle, i });
                }
                for j in (i + 1)..dim {
                    if m[i][j] != m[j][i] {
                        report.push(Violation::Symmetry { vehicle, i, j });
                    }
                }
            }
            // Relative slack absorbs serialization rounding; integer inputs
            // are checked exactly because their f64 sums are exact.
            for a in 0..dim {
                for b in 0..dim {
                    if b == a {
                        continue;
                    }
                    for c in 0..dim {
                        if c == a || c == b {
                            continue;
                        }
                        let via = m[a][b] + m[b][c];
                        if m[a][c] > via + 1e-9 * via.max(1.0) {
                            report.push(Violation::Triangle { vehicle, a, b, c });
                        }
                    }
                }
            }
        }
        for u in 1..dim {
            for v in (u + 1)..dim {
                if self.cost1[u][v] > self.cost2[u][v] {
                    report.push(Violation::Dominance { u, v });
                }
            }
        }
        report
    }

    pub fn write_json(&self, path: &Path) -> Result<(), InstanceError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}

/// Raw document shape; numbers keep their literal text so the exact mode can
/// interpret them as decimals rather than floats.
#[derive(Deserialize)]
struct RawInstance {
    #[allow(dead_code)]
    n_targets: usize,
    cost1: Vec<Vec<serde_json::Number>>,
    cost2: Vec<Vec<serde_json::Number>>,
    #[serde(default)]
    names: Option<Vec<String>>,
}

fn float_matrix(m: &[Vec<serde_json::Number>], matrix: u8) -> Result<Vec<Vec<f64>>, InstanceError> {
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, x)| x.as_f64().ok_or(InstanceError::NonNumeric { matrix, i, j }))
                .collect()
        })
        .collect()
}

fn rational_matrix(
    m: &[Vec<serde_json::Number>],
    matrix: u8,
) -> Result<Vec<Vec<BigRational>>, InstanceError> {
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, x)| {
                    rational_from_decimal(&x.to_string())
                        .ok_or(InstanceError::NonNumeric { matrix, i, j })
                })
                .collect()
        })
        .collect()
}

pub fn read_json(path: &Path) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawInstance = serde_json::from_str(&text)?;
    Instance::new(float_matrix(&raw.cost1, 1)?, float_matrix(&raw.cost2, 2)?, raw.names)
}

/// Reads an instance together with exact rational costs taken from the
/// decimal literals of the document.
pub fn read_json_exact(path: &Path) -> Result<(Instance, Costs<BigRational>), InstanceError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawInstance = serde_json::from_str(&text)?;
    let instance =
        Instance::new(float_matrix(&raw.cost1, 1)?, float_matrix(&raw.cost2, 2)?, raw.names)?;
    let c1 = rational_matrix(&raw.cost1, 1)?;
    let c2 = rational_matrix(&raw.cost2, 2)?;
    let costs = Costs::from_matrices(&c1, &c2);
    Ok((instance, costs))
}

/// One metric-assumption violation, with the indices that witness it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Violation {
    Symmetry { vehicle: Vehicle, i: usize, j: usize },
    Diagonal { vehicle: Vehicle, i: usize },
    Triangle { vehicle: Vehicle, a: usize, b: usize, c: usize },
    Dominance { u: usize, v: usize },
}

impl Violation {
    pub fn rule_name(&self) -> &'static str {
        match self {
            Violation::Symmetry { .. } => "symmetry",
            Violation::Diagonal { .. } => "diagonal",
            Violation::Triangle { vehicle: Vehicle::First, .. } => "triangle-1",
            Violation::Triangle { vehicle: Vehicle::Second, .. } => "triangle-2",
            Violation::Dominance { .. } => "dominance",
        }
    }
}

impl Serialize for Vehicle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.index() as u8)
    }
}

const MAX_REPORTED: usize = 1000;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Total count, including violations beyond the reporting cap.
    pub total: usize,
}

impl ValidationReport {
    fn push(&mut self, v: Violation) {
        self.total += 1;
        if self.violations.len() < MAX_REPORTED {
            self.violations.push(v);
        }
    }

    pub fn pass(&self) -> bool {
        self.total == 0
    }
}

/// Point layout behind a generated instance; exposed so tests can recompute
/// the matrices independently.
#[derive(Clone, Debug)]
pub struct PointLayout {
    pub depot1: (f64, f64),
    pub depot2: (f64, f64),
    pub targets: Vec<(f64, f64)>,
}

pub fn sample_points(n: usize, seed: u64, box_side: f64) -> PointLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = |rng: &mut ChaCha8Rng| {
        if box_side > 0.0 {
            (rng.random_range(0.0..box_side), rng.random_range(0.0..box_side))
        } else {
            (0.0, 0.0)
        }
    };
    let depot1 = point(&mut rng);
    let depot2 = point(&mut rng);
    let targets = (0..n).map(|_| point(&mut rng)).collect();
    PointLayout { depot1, depot2, targets }
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Random Euclidean instance: vehicle 1 pays straight-line distance, vehicle 2
/// pays `alpha` times it from its own depot. Scaling a metric keeps the
/// triangle inequality and `alpha >= 1` forces the dominance assumption, so
/// the output always validates.
pub fn generate(n: usize, alpha: f64, seed: u64, box_side: f64) -> Result<Instance, InstanceError> {
    if !(alpha >= 1.0) {
        return Err(InstanceError::BadAlpha(alpha));
    }
    let layout = sample_points(n, seed, box_side);
    let v1: Vec<(f64, f64)> =
        std::iter::once(layout.depot1).chain(layout.targets.iter().copied()).collect();
    let v2: Vec<(f64, f64)> =
        std::iter::once(layout.depot2).chain(layout.targets.iter().copied()).collect();
    let matrix = |pts: &[(f64, f64)], scale: f64| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|&a| pts.iter().map(|&b| scale * euclid(a, b)).collect())
            .collect()
    };
    Instance::new(matrix(&v1, 1.0), matrix(&v2, alpha), None)
}

/// Dense cost access for the solver, generic over the arithmetic mode.
#[derive(Clone, Debug)]
pub struct Costs<W> {
    n: usize,
    c1: Vec<W>,
    c2: Vec<W>,
}

impl<W: Weight> Costs<W> {
    pub fn from_instance(instance: &Instance) -> Self {
        let conv = |m: &[Vec<f64>]| -> Vec<Vec<W>> {
            m.iter().map(|row| row.iter().map(|&x| W::from_f64(x)).collect()).collect()
        };
        Costs::from_matrices(&conv(&instance.cost1), &conv(&instance.cost2))
    }

    pub fn from_matrices(c1: &[Vec<W>], c2: &[Vec<W>]) -> Self {
        let n = c1.len() - 1;
        let flatten = |m: &[Vec<W>]| m.iter().flat_map(|row| row.iter().cloned()).collect();
        Costs { n, c1: flatten(c1), c2: flatten(c2) }
    }

    pub fn n_targets(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cost(&self, vehicle: Vehicle, u: u32, v: u32) -> &W {
        let stride = self.n + 1;
        let idx = u as usize * stride + v as usize;
        match vehicle {
            Vehicle::First => &self.c1[idx],
            Vehicle::Second => &self.c2[idx],
        }
    }
}
