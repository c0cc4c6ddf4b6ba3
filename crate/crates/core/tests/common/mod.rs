#![allow(dead_code)]

pub mod exact;

use gridfluct::{Edge, LinearizedSystem, WeightedGraph};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus each remaining pair with probability `density`,
/// weights uniform in `[lo, hi)`, random orientations.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64, lo: f64, hi: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    let mut linked = vec![vec![false; n]; n];
    for k in 1..n {
        let parent = rng.random_range(0..k);
        linked[parent][k] = true;
        linked[k][parent] = true;
        let w = rng.random_range(lo..hi);
        edges.push(oriented(rng, parent, k, w));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !linked[i][j] && rng.random_bool(density) {
                let w = rng.random_range(lo..hi);
                edges.push(oriented(rng, i, j, w));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

fn oriented(rng: &mut impl Rng, a: usize, b: usize, w: f64) -> Edge {
    if rng.random_bool(0.5) {
        Edge::new(a, b, w)
    } else {
        Edge::new(b, a, w)
    }
}

/// Heterogeneous machines sharing the damping-inertia ratio `alpha`.
pub fn uniform_ratio_system(rng: &mut impl Rng, g: WeightedGraph, alpha: f64) -> LinearizedSystem {
    let n = g.node_count();
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let m = nalgebra::DVector::from_iterator(n, d.iter().map(|x| x / alpha));
    let b = nalgebra::DVector::from_iterator(n, (0..n).map(|_| rng.random_range(0.0..1.0)));
    LinearizedSystem::new(g, m, nalgebra::DVector::from_vec(d), b).unwrap()
}

/// Identical machines with random noise strengths.
pub fn identical_machines(rng: &mut impl Rng, g: WeightedGraph, eta: f64, d: f64) -> LinearizedSystem {
    let n = g.node_count();
    let b = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    LinearizedSystem::uniform(g, eta, d, b).unwrap()
}

/// Random Hurwitz matrix of size `n`: a random matrix shifted left of the
/// imaginary axis by a random margin.
pub fn random_hurwitz(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let abscissa = r.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    r - DMatrix::identity(n, n) * (abscissa + rng.random_range(0.05..2.0))
}

/// Random positive semidefinite intensity `B Bᵀ` of rank up to `n`.
pub fn random_intensity(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let k = rng.random_range(1..=n);
    let b = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose()
}

/// Random orthogonal matrix from the QR factor of a Gaussian-like matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    r.qr().q()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Central difference with step `rel_step·|x|`, and the roundoff floor
/// `100 ε max|f| / h` below which its error cannot be resolved.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, rel_step: f64) -> (f64, f64) {
    let h = rel_step * x.abs();
    let (hi, lo) = (f(x + h), f(x - h));
    ((hi - lo) / (2.0 * h), 100.0 * f64::EPSILON * hi.abs().max(lo.abs()) / h)
}

pub mod trends {
    use gridfluct::closed_form::{GraphKind, Parameter, Scalar, Scalars};

    /// Closed-form value behind a trend entry, for a single source of strength² `b2`.
    pub fn value(kind: GraphKind, scalar: Scalar, s: &Scalars, b2: f64) -> f64 {
        match (kind, scalar) {
            (GraphKind::Complete, Scalar::SourceFrequency) => s.complete_source_frequency(b2),
            (GraphKind::Complete, Scalar::OtherFrequency) => s.complete_other_frequency(b2),
            (GraphKind::Complete, Scalar::SourceLine) => s.complete_incident_line(b2),
            (GraphKind::Complete, Scalar::OtherLine) => 0.0,
            (GraphKind::Star, Scalar::SourceFrequency) => s.star_leaf_source_frequency(b2),
            (GraphKind::Star, Scalar::OtherFrequency) => s.star_leaf_other_frequency(b2),
            (GraphKind::Star, Scalar::SourceLine) => s.star_leaf_source_line(b2),
            (GraphKind::Star, Scalar::OtherLine) => s.star_leaf_other_line(b2),
        }
    }

    pub fn with(s: &Scalars, parameter: Parameter, x: f64) -> Scalars {
        let mut t = *s;
        match parameter {
            Parameter::Gamma => t.gamma = x,
            Parameter::Eta => t.eta = x,
            Parameter::N => t.n = x,
        }
        t
    }

    pub fn get(s: &Scalars, parameter: Parameter) -> f64 {
        match parameter {
            Parameter::Gamma => s.gamma,
            Parameter::Eta => s.eta,
            Parameter::N => s.n,
        }
    }
}
