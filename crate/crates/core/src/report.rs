use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Fraction of a block's largest magnitude below which entries are compared on the block scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Route that produced a covariance report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Numeric,
    UniformRatio,
    ClosedForm,
    FirstOrder,
    MonteCarlo,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Numeric,
        Method::UniformRatio,
        Method::ClosedForm,
        Method::FirstOrder,
        Method::MonteCarlo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Numeric => "numeric",
            Method::UniformRatio => "uniform-ratio",
            Method::ClosedForm => "closed-form",
            Method::FirstOrder => "first-order",
            Method::MonteCarlo => "monte-carlo",
        }
    }

    /// Accepts the canonical names plus the short forms `uniform`, `closed` and `mc`.
    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "numeric" => Some(Method::Numeric),
            "uniform" | "uniform-ratio" => Some(Method::UniformRatio),
            "closed" | "closed-form" => Some(Method::ClosedForm),
            "first-order" => Some(Method::FirstOrder),
            "mc" | "monte-carlo" => Some(Method::MonteCarlo),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which entries of a report carry values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    /// Every entry of `Q_δ`, `Q_ω` and `Q_δω`.
    Full,
    /// `Q_δ` in full and the diagonal of `Q_ω`.
    DeltaAndFrequencyDiagonal,
    /// Only `Q_δ` (first-order model has no frequency state).
    DeltaOnly,
}

/// Block of the output covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Line phase-angle differences, `m × m`.
    Delta,
    /// Node frequencies, `n × n`.
    Omega,
    /// Cross covariance, rows = nodes, columns = lines.
    Cross,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Delta => "delta",
            Quantity::Omega => "omega",
            Quantity::Cross => "cross",
        }
    }

    pub fn parse(s: &str) -> Option<Quantity> {
        match s {
            "delta" => Some(Quantity::Delta),
            "omega" => Some(Quantity::Omega),
            "cross" => Some(Quantity::Cross),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Relative residual of the Lyapunov solve, when one was performed.
    pub lyapunov_residual: Option<f64>,
    /// Per-entry standard errors of a Monte Carlo estimate, same layout as the report.
    pub std_errors: Option<Box<CovarianceBlocks>>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlocks {
    pub q_delta: DMatrix<f64>,
    pub q_omega: DMatrix<f64>,
    pub q_delta_omega: DMatrix<f64>,
}

impl CovarianceBlocks {
    pub fn zeros(nodes: usize, lines: usize) -> Self {
        CovarianceBlocks {
            q_delta: DMatrix::zeros(lines, lines),
            q_omega: DMatrix::zeros(nodes, nodes),
            q_delta_omega: DMatrix::zeros(nodes, lines),
        }
    }

    /// Splits `Q_y` ordered as `(C̃ᵀδ, ω)` into its blocks.
    pub fn from_output(q_y: &DMatrix<f64>, nodes: usize, lines: usize) -> Self {
        CovarianceBlocks {
            q_delta: q_y.view((0, 0), (lines, lines)).into_owned(),
            q_omega: q_y.view((lines, lines), (nodes, nodes)).into_owned(),
            q_delta_omega: q_y.view((lines, 0), (nodes, lines)).into_owned(),
        }
    }

    pub fn block(&self, q: Quantity) -> &DMatrix<f64> {
        match q {
            Quantity::Delta => &self.q_delta,
            Quantity::Omega => &self.q_omega,
            Quantity::Cross => &self.q_delta_omega,
        }
    }
}

/// Stationary covariance of the output `(C̃ᵀδ, ω)`.
#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub method: Method,
    pub coverage: Coverage,
    pub blocks: CovarianceBlocks,
    pub diagnostics: Diagnostics,
}

/// One covered entry of a report, zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub quantity: Quantity,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub std_error: Option<f64>,
}

impl CovarianceReport {
    pub fn new(method: Method, coverage: Coverage, blocks: CovarianceBlocks) -> Self {
        CovarianceReport {
            method,
            coverage,
            blocks,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn q_delta(&self) -> &DMatrix<f64> {
        &self.blocks.q_delta
    }

    pub fn q_omega(&self) -> &DMatrix<f64> {
        &self.blocks.q_omega
    }

    pub fn q_delta_omega(&self) -> &DMatrix<f64> {
        &self.blocks.q_delta_omega
    }

    pub fn node_count(&self) -> usize {
        self.blocks.q_omega.nrows()
    }

    pub fn line_count(&self) -> usize {
        self.blocks.q_delta.nrows()
    }

    pub fn covers(&self, q: Quantity, i: usize, j: usize) -> bool {
        match (self.coverage, q) {
            (Coverage::Full, _) => true,
            (Coverage::DeltaAndFrequencyDiagonal, Quantity::Delta) => true,
            (Coverage::DeltaAndFrequencyDiagonal, Quantity::Omega) => i == j,
            (Coverage::DeltaOnly, Quantity::Delta) => true,
            _ => false,
        }
    }

    /// Covered entries: upper triangles of the symmetric blocks, all of `Q_δω`.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        let se = self.diagnostics.std_errors.as_deref();
        for q in [Quantity::Omega, Quantity::Delta, Quantity::Cross] {
            let block = self.blocks.block(q);
            for i in 0..block.nrows() {
                let start = if q == Quantity::Cross { 0 } else { i };
                for j in start..block.ncols() {
                    if self.covers(q, i, j) {
                        out.push(Entry {
                            quantity: q,
                            i,
                            j,
                            value: block[(i, j)],
                            std_error: se.map(|s| s.block(q)[(i, j)]),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn value(&self, q: Quantity, i: usize, j: usize) -> Option<f64> {
        let block = self.blocks.block(q);
        (i < block.nrows() && j < block.ncols() && self.covers(q, i, j)).then(|| block[(i, j)])
    }

    /// Largest entrywise relative discrepancy against `other` over the entries both cover.
    ///
    /// Each difference is divided by the magnitude of `other`'s entry, floored at
    /// [`RELATIVE_FLOOR`] times the block's Cauchy–Schwarz bound
    /// `√(max Q_aa · max Q_bb)` over the variances of the two variable groups.
    /// Entries that vanish analytically are thus compared on the scale of the
    /// variables they couple.
    pub fn max_relative_discrepancy(&self, other: &CovarianceReport) -> f64 {
        let scales = [Quantity::Omega, Quantity::Delta, Quantity::Cross].map(|q| other.block_scale(q));
        let scale_of = |q: Quantity| match q {
            Quantity::Omega => scales[0],
            Quantity::Delta => scales[1],
            Quantity::Cross => scales[2],
        };
        self.entries()
            .into_iter()
            .filter(|e| other.covers(e.quantity, e.i, e.j))
            .map(|e| {
                let r = other.blocks.block(e.quantity)[(e.i, e.j)];
                let denom = r.abs().max(RELATIVE_FLOOR * scale_of(e.quantity));
                let diff = (e.value - r).abs();
                if denom == 0.0 {
                    diff
                } else {
                    diff / denom
                }
            })
            .fold(0.0, f64::max)
    }

    fn block_scale(&self, q: Quantity) -> f64 {
        let variance = |q: Quantity| {
            let b = self.blocks.block(q);
            if self.covers(q, 0, 0) {
                b.diagonal().amax()
            } else {
                b.amax()
            }
        };
        match q {
            Quantity::Cross if self.covers(Quantity::Omega, 0, 0) && self.covers(Quantity::Delta, 0, 0) => {
                (variance(Quantity::Omega) * variance(Quantity::Delta)).sqrt()
            }
            _ => variance(q),
        }
    }
}
