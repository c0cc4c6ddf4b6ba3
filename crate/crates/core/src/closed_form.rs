//! Explicit variances for identical machines on complete and star graphs.
//!
//! Node and line indices are canonical and zero-based. Complete graphs list
//! lines lexicographically, `(0,1), (0,2), …, (n−2,n−1)`, each oriented from
//! the smaller index. Star graphs have the root at node 0 and line `k`
//! joining the root to leaf `k + 1`, oriented away from the root.
//!
//! Shorthands used throughout:
//!
//! ```text
//! F = 2d² + γηn     H = 2d²(n+1) + γη(n−1)²     E = 2d² + γη     T = Σ bᵢ²
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::report::{CovarianceBlocks, CovarianceReport, Coverage, Method};
use crate::swing::LinearizedSystem;

/// Relative tolerance used when recognising identical machines and line weights.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Star,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Complete => "complete",
            GraphKind::Star => "star",
        }
    }

    pub fn graph(self, n: usize, weight: f64) -> Result<WeightedGraph> {
        match self {
            GraphKind::Complete => WeightedGraph::canonical_complete(n, weight),
            GraphKind::Star => WeightedGraph::canonical_star(n, weight),
        }
    }
}

/// Identical machines `(η, d)` on a graph with uniform line weight `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousParams {
    pub n: usize,
    pub gamma: f64,
    pub eta: f64,
    pub d: f64,
    pub b: Vec<f64>,
}

impl HomogeneousParams {
    pub fn new(n: usize, gamma: f64, eta: f64, d: f64, b: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("closed forms need n ≥ 2, got {n}")));
        }
        if b.len() != n {
            return Err(Error::InvalidSize(format!("noise vector has {} entries, expected {n}", b.len())));
        }
        for (name, v) in [("gamma", gamma), ("eta", eta), ("d", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(i) = b.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::validation("noise", format!("entry {i} must be non-negative, got {}", b[i])));
        }
        Ok(HomogeneousParams { n, gamma, eta, d, b })
    }

    /// A single source of strength `strength` at `node`, all other nodes quiet.
    pub fn single_source(n: usize, gamma: f64, eta: f64, d: f64, node: usize, strength: f64) -> Result<Self> {
        if node >= n {
            return Err(Error::InvalidSize(format!("source node {node} out of range for n = {n}")));
        }
        let mut b = vec![0.0; n];
        b[node] = strength;
        Self::new(n, gamma, eta, d, b)
    }

    pub fn continuous(&self) -> Scalars {
        Scalars {
            n: self.n as f64,
            gamma: self.gamma,
            eta: self.eta,
            d: self.d,
        }
    }

    pub fn b2(&self, i: usize) -> f64 {
        self.b[i] * self.b[i]
    }

    pub fn noise_power(&self) -> f64 {
        self.b.iter().map(|x| x * x).sum()
    }

    /// The linearized system these parameters describe on the canonical graph.
    pub fn linearized(&self, kind: GraphKind) -> Result<LinearizedSystem> {
        LinearizedSystem::uniform(kind.graph(self.n, self.gamma)?, self.eta, self.d, self.b.clone())
    }

    fn sole_source(&self) -> Option<usize> {
        let active: Vec<usize> = (0..self.n).filter(|&i| self.b[i] > 0.0).collect();
        (active.len() == 1).then(|| active[0])
    }

    fn require_single_source(&self, node: usize) -> Result<()> {
        match self.sole_source() {
            Some(s) if s == node => Ok(()),
            _ => Err(Error::Precondition(format!(
                "expected a single nonzero noise entry at node {node}, got {:?}",
                self.b
            ))),
        }
    }
}

/// Network size treated as a real number, for derivatives and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub n: f64,
    pub gamma: f64,
    pub eta: f64,
    pub d: f64,
}

impl Scalars {
    pub fn f(&self) -> f64 {
        2.0 * self.d * self.d + self.gamma * self.eta * self.n
    }

    pub fn h(&self) -> f64 {
        let nm1 = self.n - 1.0;
        2.0 * self.d * self.d * (self.n + 1.0) + self.gamma * self.eta * nm1 * nm1
    }

    pub fn e(&self) -> f64 {
        2.0 * self.d * self.d + self.gamma * self.eta
    }

    fn ge(&self) -> f64 {
        self.gamma * self.eta
    }

    // Single source of variance b2 = b² on a complete graph (or at a star root).

    pub fn complete_source_frequency(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        b2 / (2.0 * d * eta) - (n - 1.0) * gamma * b2 / (d * n * self.f())
    }

    pub fn complete_other_frequency(&self, b2: f64) -> f64 {
        self.gamma * b2 / (self.d * self.n * self.f())
    }

    pub fn complete_incident_line(&self, b2: f64) -> f64 {
        b2 / (2.0 * self.d * self.gamma * self.n)
    }

    // Single source of variance b2 at a star leaf.

    pub fn star_leaf_root_frequency(&self, b2: f64) -> f64 {
        self.complete_other_frequency(b2)
    }

    pub fn star_leaf_source_frequency(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        let (f, h, e) = (self.f(), self.h(), self.e());
        b2 / (2.0 * d * eta) - gamma * b2 / (d * n * f) - gamma * (n - 2.0) * b2 / (d * n * h)
            - gamma * gamma * eta * (n - 2.0) * b2 / (d * n * e * f)
    }

    pub fn star_leaf_other_frequency(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        let (f, h, e) = (self.f(), self.h(), self.e());
        gamma * b2 / (d * n * h) + gamma * gamma * eta * b2 / (d * n * e * f)
    }

    pub fn star_leaf_source_line(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        let c = 2.0 * d * gamma * n;
        ((n - 1.0) / c - (n - 2.0) * (2.0 * d * d + gamma * eta * (n + 1.0)) / (c * self.h())) * b2
    }

    pub fn star_leaf_other_line(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        (2.0 * d * d + gamma * eta * (n + 1.0)) / (2.0 * d * gamma * n * self.h()) * b2
    }

    // Derivatives, complete graph / star root.

    pub fn d_complete_source_d_gamma(&self, b2: f64) -> f64 {
        let f = self.f();
        2.0 * self.d * (1.0 - self.n) * b2 / (self.n * f * f)
    }

    pub fn d_complete_other_d_gamma(&self, b2: f64) -> f64 {
        let f = self.f();
        2.0 * self.d * b2 / (self.n * f * f)
    }

    pub fn d_complete_source_d_n(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, d, .. } = *self;
        let ge = self.ge();
        let den = 2.0 * d * d * n + ge * n * n;
        gamma * (ge * n * n - 2.0 * ge * n - 2.0 * d * d) * b2 / (d * den * den)
    }

    pub fn d_complete_other_d_n(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta: _, d } = *self;
        let ge = self.ge();
        let den = 2.0 * d * d * n + ge * n * n;
        -gamma * (2.0 * d * d + 2.0 * ge * n) * b2 / (d * den * den)
    }

    pub fn complete_source_frequency_gamma_limit(&self, b2: f64) -> f64 {
        let Scalars { n, eta, d, .. } = *self;
        b2 / (2.0 * d * eta) - (n - 1.0) * b2 / (d * eta * n * n)
    }

    pub fn complete_other_frequency_gamma_limit(&self, b2: f64) -> f64 {
        b2 / (self.d * self.eta * self.n * self.n)
    }

    /// Infimum over `n` of the source frequency variance, attained in the continuum at `n = 1 + √(1 + 2d²/(γη))`.
    pub fn complete_source_frequency_lower_bound(&self, b2: f64) -> f64 {
        let Scalars { gamma, eta, d, .. } = *self;
        let ge = self.ge();
        let s = ge.sqrt() + (ge + 2.0 * d * d).sqrt();
        (1.0 / (2.0 * d * eta) - gamma / (d * s * s)) * b2
    }

    // Derivatives, star leaf source.

    pub fn d_star_leaf_source_frequency_d_gamma(&self, b2: f64) -> f64 {
        let Scalars { n, d, .. } = *self;
        let (f, h, e) = (self.f(), self.h(), self.e());
        let ge = self.ge();
        -2.0 * d * b2 / (n * f * f)
            - 2.0 * d * (n + 1.0) * (n - 2.0) * b2 / (n * h * h)
            - 2.0 * d * ge * (4.0 * d * d + ge * (n + 1.0)) * (n - 2.0) * b2 / (n * e * e * f * f)
    }

    pub fn star_leaf_source_frequency_gamma_limit(&self, b2: f64) -> f64 {
        let Scalars { n, eta, d, .. } = *self;
        b2 / (2.0 * d * eta) - b2 / (d * eta) * (1.0 / n - 1.0 / (n * n * (n - 1.0) * (n - 1.0)))
    }

    pub fn d_star_leaf_source_frequency_d_n(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, eta, d } = *self;
        let (f, h, e) = (self.f(), self.h(), self.e());
        let ge = self.ge();
        let d2 = d * d;
        2.0 * gamma * b2 * (d2 + ge * n) / (d * n * n * f * f)
            - gamma * gamma * eta * b2 * (4.0 * d2 + ge * n * (4.0 - n)) / (d * n * n * e * f * f)
            + 2.0 * gamma * b2 * (d2 * (n * n - 4.0 * n - 2.0) + ge * (n - 1.0) * (n * n - 3.0 * n + 1.0))
                / (d * n * n * h * h)
    }

    pub fn d_star_leaf_source_line_d_eta(&self, b2: f64) -> f64 {
        let h = self.h();
        -4.0 * (self.n - 2.0) * self.d * b2 / (h * h)
    }

    pub fn d_star_leaf_other_line_d_eta(&self, b2: f64) -> f64 {
        let h = self.h();
        4.0 * self.d * b2 / (h * h)
    }

    pub fn star_leaf_source_line_eta_limit(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, d, .. } = *self;
        let c = 2.0 * d * gamma * n;
        ((n - 1.0) / c - (n - 2.0) / (c * (n + 1.0))) * b2
    }

    pub fn star_leaf_other_line_eta_limit(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, d, .. } = *self;
        b2 / (2.0 * d * gamma * n * (n + 1.0))
    }

    pub fn d_star_leaf_source_line_d_n(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, d, .. } = *self;
        let ge = self.ge();
        let (d2, h) = (d * d, self.h());
        let num = 4.0 * d2 * d2 * (2.0 * n * n - 2.0 * n - 1.0)
            + 4.0 * d2 * ge * (2.0 * n.powi(3) - 6.0 * n * n + n - 1.0)
            + ge * ge * (n - 1.0) * (2.0 * n.powi(3) - 4.0 * n * n - 3.0 * n + 1.0);
        num * b2 / (2.0 * d * gamma * n * n * h * h)
    }

    pub fn d_star_leaf_other_line_d_n(&self, b2: f64) -> f64 {
        let Scalars { n, gamma, d, .. } = *self;
        let ge = self.ge();
        let (d2, h) = (d * d, self.h());
        let num = 4.0 * d2 * d2 * (1.0 + 2.0 * n)
            + 4.0 * d2 * ge * (2.0 * n * n - n + 1.0)
            + ge * ge * (n - 1.0) * (2.0 * n * n + 3.0 * n - 1.0);
        -num * b2 / (2.0 * d * gamma * n * n * h * h)
    }
}

fn canonical_incidence(kind: GraphKind, n: usize) -> DMatrix<f64> {
    kind.graph(n, 1.0).expect("n ≥ 2 checked by HomogeneousParams").incidence()
}

fn angle_covariance(p: &HomogeneousParams, kind: GraphKind) -> DMatrix<f64> {
    let c = canonical_incidence(kind, p.n);
    let b2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(p.n, p.b.iter().map(|x| x * x)));
    c.transpose() * b2 * c / (2.0 * p.d * p.gamma * p.n as f64)
}

/// Frequency variances on the diagonal and the full angle-difference covariance.
pub fn complete_report(p: &HomogeneousParams) -> Result<CovarianceReport> {
    let n = p.n;
    let s = p.continuous();
    let t = p.noise_power();
    let (f, nf) = (s.f(), n as f64);
    let mut blocks = CovarianceBlocks::zeros(n, n * (n - 1) / 2);
    for i in 0..n {
        let bi = p.b2(i);
        blocks.q_omega[(i, i)] = (1.0 / (2.0 * p.d * p.eta) - p.gamma * (nf - 1.0) / (p.d * nf * f)) * bi
            + p.gamma / (p.d * nf * f) * (t - bi);
    }
    blocks.q_delta = angle_covariance(p, GraphKind::Complete);
    Ok(CovarianceReport::new(Method::ClosedForm, Coverage::DeltaAndFrequencyDiagonal, blocks))
}

/// `tr(Q_δ) = (n−1) tr(B̃²)/(2dγn)`, shared by complete and star graphs.
pub fn angle_trace(p: &HomogeneousParams) -> f64 {
    let n = p.n as f64;
    (n - 1.0) * p.noise_power() / (2.0 * p.d * p.gamma * n)
}

/// Variances caused by one source on a complete graph (or at a star root).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSourceSummary {
    /// Frequency variance at the source.
    pub at_source: f64,
    /// Frequency variance at every other node.
    pub elsewhere: f64,
    /// Angle-difference variance of lines touching the source.
    pub incident_line: f64,
    /// Angle-difference variance of the remaining lines.
    pub other_line: f64,
}

pub fn complete_single_source(p: &HomogeneousParams, source: usize) -> Result<SingleSourceSummary> {
    p.require_single_source(source)?;
    let (s, b2) = (p.continuous(), p.b2(source));
    Ok(SingleSourceSummary {
        at_source: s.complete_source_frequency(b2),
        elsewhere: s.complete_other_frequency(b2),
        incident_line: s.complete_incident_line(b2),
        other_line: 0.0,
    })
}

/// Zero-inertia angle-difference covariance on the complete graph, `C̃ᵀB̃²C̃/(2dγn)`.
pub fn complete_first_order(p: &HomogeneousParams) -> DMatrix<f64> {
    angle_covariance(p, GraphKind::Complete)
}

pub fn star_report(p: &HomogeneousParams) -> Result<CovarianceReport> {
    let n = p.n;
    let s = p.continuous();
    let Scalars { gamma, eta, d, .. } = s;
    let nf = n as f64;
    let (f, h, e, t) = (s.f(), s.h(), s.e(), p.noise_power());
    let b1 = p.b2(0);
    let mut blocks = CovarianceBlocks::zeros(n, n - 1);

    blocks.q_omega[(0, 0)] =
        (1.0 / (2.0 * d * eta) - gamma * (nf - 1.0) / (d * nf * f)) * b1 + gamma / (d * nf * f) * (t - b1);
    for i in 1..n {
        let bi = p.b2(i);
        let rest = t - bi - b1;
        blocks.q_omega[(i, i)] = gamma * b1 / (d * nf * f) + bi / (2.0 * d * eta)
            - gamma * bi / (d * nf * f)
            - gamma * (nf - 2.0) * bi / (d * nf * h)
            - gamma * gamma * eta * (nf - 2.0) * bi / (d * nf * e * f)
            + gamma * rest / (d * nf * h)
            + gamma * gamma * eta * rest / (d * nf * e * f);
    }

    let ge = gamma * eta;
    let c = 2.0 * d * gamma * nf;
    let shared = 2.0 * d * d + ge * (nf + 1.0);
    for k in 0..n - 1 {
        let bk = p.b2(k + 1);
        for q in 0..n - 1 {
            let bq = p.b2(q + 1);
            blocks.q_delta[(k, q)] = if k == q {
                b1 / c + ((nf - 1.0) / c - (nf - 2.0) * shared / (c * h)) * bk + shared * (t - bk - b1) / (c * h)
            } else {
                (h * b1
                    + (-2.0 * d * d * (nf - 1.0) + ge * (2.0 * nf - nf * nf + 1.0)) * (bk + bq)
                    + shared * (t - bk - bq - b1))
                    / (c * h)
            };
        }
    }
    Ok(CovarianceReport::new(Method::ClosedForm, Coverage::DeltaAndFrequencyDiagonal, blocks))
}

/// Root-only source on a star; the expressions coincide with the complete graph's.
pub fn star_single_source_root(p: &HomogeneousParams) -> Result<SingleSourceSummary> {
    complete_single_source(p, 0)
}

/// Variances caused by a single source at a star leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafSourceSummary {
    pub root: f64,
    pub source: f64,
    /// Frequency variance at the quiet leaves; zero when `n = 2`.
    pub other_leaf: f64,
    /// Angle-difference variance of the line feeding the source leaf.
    pub source_line: f64,
    pub other_line: f64,
}

pub fn star_single_source_leaf(p: &HomogeneousParams, leaf: usize) -> Result<LeafSourceSummary> {
    if leaf == 0 {
        return Err(Error::Precondition("node 0 is the star root, not a leaf".into()));
    }
    p.require_single_source(leaf)?;
    let (s, b2) = (p.continuous(), p.b2(leaf));
    let quiet = p.n > 2;
    Ok(LeafSourceSummary {
        root: s.star_leaf_root_frequency(b2),
        source: s.star_leaf_source_frequency(b2),
        other_leaf: if quiet { s.star_leaf_other_frequency(b2) } else { 0.0 },
        source_line: s.star_leaf_source_line(b2),
        other_line: if quiet { s.star_leaf_other_line(b2) } else { 0.0 },
    })
}

/// Zero-inertia angle-difference covariance on the star.
pub fn star_first_order(p: &HomogeneousParams) -> DMatrix<f64> {
    let n = p.n;
    let nf = n as f64;
    let c = 2.0 * p.d * p.gamma * nf;
    let (t, b1) = (p.noise_power(), p.b2(0));
    DMatrix::from_fn(n - 1, n - 1, |k, q| {
        let (bk, bq) = (p.b2(k + 1), p.b2(q + 1));
        if k == q {
            b1 / c + (nf * nf - nf + 1.0) * bk / (c * (1.0 + nf)) + (t - bk - b1) / (c * (1.0 + nf))
        } else {
            b1 / c + (1.0 - nf) * (bk + bq) / (c * (1.0 + nf)) + (t - bk - bq - b1) / (c * (1.0 + nf))
        }
    })
}

/// Continuum threshold `1 + √(1 + 2d²/(γη))` beyond which the source variance grows with `n`.
pub fn critical_size_continuous(d: f64, gamma: f64, eta: f64) -> f64 {
    1.0 + (1.0 + 2.0 * d * d / (gamma * eta)).sqrt()
}

/// `n_c = ⌊1 + √(1 + 2d²/(γη))⌋`.
pub fn critical_size(d: f64, gamma: f64, eta: f64) -> usize {
    critical_size_continuous(d, gamma, eta).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Positive,
    Negative,
    NonPositive,
}

impl Sign {
    pub fn holds(self, x: f64) -> bool {
        match self {
            Sign::Positive => x > 0.0,
            Sign::Negative => x < 0.0,
            Sign::NonPositive => x <= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Gamma,
    Eta,
    N,
}

/// Which scalar a trend entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scalar {
    SourceFrequency,
    OtherFrequency,
    SourceLine,
    OtherLine,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Derivative {
    pub scalar: Scalar,
    pub parameter: Parameter,
    pub value: f64,
    pub expected: Sign,
    pub sign_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    GammaToInfinity,
    NToInfinity,
    EtaToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Limit {
    pub scalar: Scalar,
    pub kind: LimitKind,
    pub value: f64,
}

/// Analytic sensitivities of a single-source configuration. The network size is
/// handled as a real variable in derivatives and limits.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrendReport {
    pub kind: GraphKind,
    pub source: usize,
    /// True when the source is a star leaf; false for the complete graph and the star root.
    pub leaf_source: bool,
    pub critical_size: usize,
    pub lower_bound: Option<f64>,
    pub values: Vec<(Scalar, f64)>,
    pub derivatives: Vec<Derivative>,
    pub limits: Vec<Limit>,
}

impl TrendReport {
    pub fn derivative(&self, scalar: Scalar, parameter: Parameter) -> Option<&Derivative> {
        self.derivatives.iter().find(|d| d.scalar == scalar && d.parameter == parameter)
    }

    pub fn limit(&self, scalar: Scalar, kind: LimitKind) -> Option<f64> {
        self.limits.iter().find(|l| l.scalar == scalar && l.kind == kind).map(|l| l.value)
    }

    pub fn all_signs_hold(&self) -> bool {
        self.derivatives.iter().all(|d| d.sign_holds)
    }
}

pub fn trend_report(kind: GraphKind, p: &HomogeneousParams, source: usize) -> Result<TrendReport> {
    p.require_single_source(source)?;
    let s = p.continuous();
    let b2 = p.b2(source);
    let leaf = kind == GraphKind::Star && source != 0;
    let deriv = |scalar, parameter, value: f64, expected: Sign| Derivative {
        scalar,
        parameter,
        value,
        expected,
        sign_holds: expected.holds(value),
    };
    let limit = |scalar, kind, value| Limit { scalar, kind, value };

    let (values, derivatives, limits, lower_bound) = if !leaf {
        let threshold = critical_size_continuous(p.d, p.gamma, p.eta);
        let n_sign = if s.n > threshold { Sign::Positive } else { Sign::NonPositive };
        (
            vec![
                (Scalar::SourceFrequency, s.complete_source_frequency(b2)),
                (Scalar::OtherFrequency, s.complete_other_frequency(b2)),
                (Scalar::SourceLine, s.complete_incident_line(b2)),
            ],
            vec![
                deriv(Scalar::SourceFrequency, Parameter::Gamma, s.d_complete_source_d_gamma(b2), Sign::Negative),
                deriv(Scalar::OtherFrequency, Parameter::Gamma, s.d_complete_other_d_gamma(b2), Sign::Positive),
                deriv(Scalar::SourceFrequency, Parameter::N, s.d_complete_source_d_n(b2), n_sign),
                deriv(Scalar::OtherFrequency, Parameter::N, s.d_complete_other_d_n(b2), Sign::Negative),
            ],
            vec![
                limit(Scalar::SourceFrequency, LimitKind::GammaToInfinity, s.complete_source_frequency_gamma_limit(b2)),
                limit(Scalar::OtherFrequency, LimitKind::GammaToInfinity, s.complete_other_frequency_gamma_limit(b2)),
                limit(Scalar::SourceFrequency, LimitKind::NToInfinity, b2 / (2.0 * p.d * p.eta)),
                limit(Scalar::OtherFrequency, LimitKind::NToInfinity, 0.0),
            ],
            Some(s.complete_source_frequency_lower_bound(b2)),
        )
    } else {
        let mut derivatives = vec![
            deriv(Scalar::SourceFrequency, Parameter::Gamma, s.d_star_leaf_source_frequency_d_gamma(b2), Sign::Negative),
            deriv(Scalar::SourceFrequency, Parameter::N, s.d_star_leaf_source_frequency_d_n(b2), Sign::Positive),
            deriv(Scalar::SourceLine, Parameter::Eta, s.d_star_leaf_source_line_d_eta(b2), Sign::NonPositive),
            deriv(Scalar::SourceLine, Parameter::N, s.d_star_leaf_source_line_d_n(b2), Sign::Positive),
        ];
        if p.n > 2 {
            derivatives.push(deriv(Scalar::OtherLine, Parameter::Eta, s.d_star_leaf_other_line_d_eta(b2), Sign::Positive));
            derivatives.push(deriv(Scalar::OtherLine, Parameter::N, s.d_star_leaf_other_line_d_n(b2), Sign::Negative));
        }
        (
            vec![
                (Scalar::SourceFrequency, s.star_leaf_source_frequency(b2)),
                (Scalar::OtherFrequency, s.star_leaf_other_frequency(b2)),
                (Scalar::SourceLine, s.star_leaf_source_line(b2)),
                (Scalar::OtherLine, s.star_leaf_other_line(b2)),
            ],
            derivatives,
            vec![
                limit(Scalar::SourceFrequency, LimitKind::GammaToInfinity, s.star_leaf_source_frequency_gamma_limit(b2)),
                limit(Scalar::SourceFrequency, LimitKind::NToInfinity, b2 / (2.0 * p.d * p.eta)),
                limit(Scalar::SourceLine, LimitKind::EtaToZero, s.star_leaf_source_line_eta_limit(b2)),
                limit(Scalar::OtherLine, LimitKind::EtaToZero, s.star_leaf_other_line_eta_limit(b2)),
            ],
            None,
        )
    };

    Ok(TrendReport {
        kind,
        source,
        leaf_source: leaf,
        critical_size: critical_size(p.d, p.gamma, p.eta),
        lower_bound,
        values,
        derivatives,
        limits,
    })
}

/// A linearized system recognised as identical machines on a complete or star graph,
/// with the relabelling to canonical indices.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub kind: GraphKind,
    pub params: HomogeneousParams,
    /// Canonical node index → user node index.
    pub nodes: Vec<usize>,
    /// User line index → (canonical line index, orientation sign).
    pub lines: Vec<(usize, f64)>,
}

fn all_equal(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    let first = *v.first()?;
    v.iter()
        .all(|x| (x - first).abs() <= HOMOGENEITY_TOLERANCE * first.abs())
        .then_some(first)
}

pub fn recognise(lin: &LinearizedSystem) -> Result<CanonicalForm> {
    let g = &lin.weighted;
    let (n, m) = (g.node_count(), g.edge_count());
    let kind = if n >= 2 && m == n * (n - 1) / 2 {
        GraphKind::Complete
    } else if n >= 3 && m == n - 1 && (0..n).any(|v| g.degree(v) == n - 1) {
        GraphKind::Star
    } else {
        return Err(Error::assumption(
            "complete or star topology",
            "closed forms defined only for complete/star",
        ));
    };
    let uniform = |name: &'static str, values: Vec<f64>| {
        all_equal(values).ok_or_else(|| {
            Error::assumption("identical machines and lines", format!("{name} is not uniform"))
        })
    };
    let gamma = uniform("line weight", g.edges().iter().map(|e| e.weight).collect())?;
    let eta = uniform("inertia", lin.inertia.iter().copied().collect())?;
    let d = uniform("damping", lin.damping.iter().copied().collect())?;

    let (nodes, lines) = match kind {
        GraphKind::Complete => {
            let lines = g
                .edges()
                .iter()
                .map(|e| {
                    let (a, b, sign) = if e.from < e.to { (e.from, e.to, 1.0) } else { (e.to, e.from, -1.0) };
                    (a * (2 * n - a - 1) / 2 + (b - a - 1), sign)
                })
                .collect();
            ((0..n).collect::<Vec<_>>(), lines)
        }
        GraphKind::Star => {
            let root = (0..n).find(|&v| g.degree(v) == n - 1).expect("checked above");
            let mut nodes = vec![root];
            nodes.extend((0..n).filter(|&v| v != root));
            let lines = g
                .edges()
                .iter()
                .map(|e: &Edge| {
                    let (leaf, sign) = if e.from == root { (e.to, 1.0) } else { (e.from, -1.0) };
                    let pos = nodes.iter().position(|&v| v == leaf).expect("leaf is a node");
                    (pos - 1, sign)
                })
                .collect();
            (nodes, lines)
        }
    };
    let b = nodes.iter().map(|&v| lin.noise[v]).collect();
    Ok(CanonicalForm {
        kind,
        params: HomogeneousParams::new(n, gamma, eta, d, b)?,
        nodes,
        lines,
    })
}

impl CanonicalForm {
    /// Closed-form report in canonical indices.
    pub fn canonical_report(&self) -> Result<CovarianceReport> {
        match self.kind {
            GraphKind::Complete => complete_report(&self.params),
            GraphKind::Star => star_report(&self.params),
        }
    }

    /// Maps a canonical report back to the user's node and line labels.
    pub fn to_user(&self, canonical: &CovarianceReport) -> CovarianceReport {
        let (n, m) = (self.nodes.len(), self.lines.len());
        let mut user_of = vec![0; n];
        for (c, &u) in self.nodes.iter().enumerate() {
            user_of[u] = c;
        }
        let src = &canonical.blocks;
        let q_omega = DMatrix::from_fn(n, n, |a, b| src.q_omega[(user_of[a], user_of[b])]);
        let q_delta = DMatrix::from_fn(m, m, |a, b| {
            let ((ka, sa), (kb, sb)) = (self.lines[a], self.lines[b]);
            sa * sb * src.q_delta[(ka, kb)]
        });
        let q_delta_omega = DMatrix::from_fn(n, m, |a, b| {
            let (kb, sb) = self.lines[b];
            sb * src.q_delta_omega[(user_of[a], kb)]
        });
        let mut out = canonical.clone();
        out.blocks = CovarianceBlocks {
            q_delta,
            q_omega,
            q_delta_omega,
        };
        out
    }
}

/// Closed-form report for an arbitrary labelling of a homogeneous complete or star network.
pub fn closed_form_report(lin: &LinearizedSystem) -> Result<CovarianceReport> {
    let form = recognise(lin)?;
    Ok(form.to_user(&form.canonical_report()?))
}
