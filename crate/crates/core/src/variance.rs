//! Stationary output covariance of the linearized network.
//!
//! The state `(δ, ω)` is moved into whitened spectral coordinates
//! `z = UᵀM^{1/2}δ`, `v = UᵀM^{1/2}ω`, where `U` diagonalizes
//! `M^{-1/2} L M^{-1/2}`. The first coordinate of `z` is the rigid rotation of
//! all angles; it has no restoring force and is invisible to line angle
//! differences, so it is dropped. The remaining `2n − 1` coordinates form a
//! Hurwitz system whose Lyapunov solution gives the covariance of
//! `y = (C̃ᵀδ, ω)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{whitened_spectrum, SpectralDecomposition};
use crate::lyapunov;
use crate::report::{CovarianceBlocks, CovarianceReport, Coverage, Method};
use crate::swing::LinearizedSystem;

/// Relative tolerance on `dᵢ/mᵢ` for the uniform damping-inertia assumption.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// The zero-mode-free system `(A₂, B₂, C₂)` in whitened spectral coordinates.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a2: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub spectral: SpectralDecomposition,
    nodes: usize,
    lines: usize,
}

impl ReducedSystem {
    pub fn new(lin: &LinearizedSystem) -> Result<Self> {
        if !lin.weighted.is_connected() {
            return Err(Error::NotConnected);
        }
        let spectral = whitened_spectrum(&lin.laplacian(), &lin.inertia)?;
        Self::with_spectrum(lin, spectral)
    }

    /// Builds the reduced system from a caller-supplied decomposition of `M^{-1/2}LM^{-1/2}`.
    pub fn with_spectrum(lin: &LinearizedSystem, spectral: SpectralDecomposition) -> Result<Self> {
        let (n, m) = (lin.node_count(), lin.line_count());
        if spectral.dim() != n {
            return Err(Error::Shape("spectral decomposition does not match node count".into()));
        }
        let u = &spectral.vectors;
        let lambda = &spectral.eigenvalues;
        let inv_sqrt_m = lin.inertia.map(|x| 1.0 / x.sqrt());
        let ratio = lin.damping.component_div(&lin.inertia);

        // A₂ = [[0, A₂₂], [A₂₃, A₂₄]] with A₂₂ = [0 I], A₂₃ = [0; −Λ_{n−1}], A₂₄ = −UᵀM⁻¹DU.
        let dim = 2 * n - 1;
        let mut a2 = DMatrix::zeros(dim, dim);
        for i in 0..n - 1 {
            a2[(i, n - 1 + i + 1)] = 1.0;
            a2[(n - 1 + i + 1, i)] = -lambda[i + 1];
        }
        let a24 = -(u.transpose() * DMatrix::from_diagonal(&ratio) * u);
        a2.view_mut((n - 1, n - 1), (n, n)).copy_from(&a24);

        // B₂₂ = UᵀM^{-1/2}B̃
        let mut b2 = DMatrix::zeros(dim, n);
        let scaled_noise = DMatrix::from_diagonal(&inv_sqrt_m.component_mul(&lin.noise));
        b2.view_mut((n - 1, 0), (n, n)).copy_from(&(u.transpose() * scaled_noise));

        // C₂ = [[C̃ᵀM^{-1/2}Û, 0], [0, M^{-1/2}U]]
        let u_hat = spectral.nonzero_modes();
        let m_inv_sqrt = DMatrix::from_diagonal(&inv_sqrt_m);
        let mut c2 = DMatrix::zeros(m + n, dim);
        c2.view_mut((0, 0), (m, n - 1))
            .copy_from(&(lin.incidence().transpose() * &m_inv_sqrt * &u_hat));
        c2.view_mut((m, n - 1), (n, n)).copy_from(&(&m_inv_sqrt * u));

        Ok(ReducedSystem {
            a2,
            b2,
            c2,
            spectral,
            nodes: n,
            lines: m,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn line_count(&self) -> usize {
        self.lines
    }

    /// Largest real part of the spectrum of `A₂`; errors unless below `−1e-12`.
    pub fn check_hurwitz(&self) -> Result<f64> {
        lyapunov::ensure_hurwitz(&self.a2)
    }

    pub fn noise_intensity(&self) -> DMatrix<f64> {
        &self.b2 * self.b2.transpose()
    }

    /// Maps a state covariance of the reduced system to output blocks.
    pub fn output_blocks(&self, q_x: &DMatrix<f64>) -> CovarianceBlocks {
        let mut q_y = &self.c2 * q_x * self.c2.transpose();
        q_y = (&q_y + q_y.transpose()) * 0.5;
        CovarianceBlocks::from_output(&q_y, self.nodes, self.lines)
    }
}

/// Stationary output covariance via a Bartels–Stewart solve of the reduced Lyapunov equation.
pub fn asymptotic_variance_numeric(lin: &LinearizedSystem) -> Result<CovarianceReport> {
    numeric_with(&ReducedSystem::new(lin)?, lyapunov::solve)
}

/// Same as [`asymptotic_variance_numeric`] but with the vectorized dense solver.
pub fn asymptotic_variance_kronecker(lin: &LinearizedSystem) -> Result<CovarianceReport> {
    numeric_with(&ReducedSystem::new(lin)?, lyapunov::solve_kronecker)
}

pub fn numeric_with(
    reduced: &ReducedSystem,
    solver: fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<lyapunov::LyapunovSolution>,
) -> Result<CovarianceReport> {
    reduced.check_hurwitz()?;
    let w = reduced.noise_intensity();

    // Scaling each angle mode by √λᵢ turns every undamped mode into a rotation,
    // which keeps the Schur-based solve accurate when λ spans many decades.
    let n = reduced.nodes;
    let lambda = &reduced.spectral.eigenvalues;
    let scale = DVector::from_fn(2 * n - 1, |i, _| if i < n - 1 { lambda[i + 1].sqrt() } else { 1.0 });
    let inv = scale.map(|x| 1.0 / x);
    let a_s = DMatrix::from_fn(2 * n - 1, 2 * n - 1, |i, j| scale[i] * reduced.a2[(i, j)] * inv[j]);
    let w_s = DMatrix::from_fn(2 * n - 1, 2 * n - 1, |i, j| scale[i] * w[(i, j)] * scale[j]);
    let sol = solver(&a_s, &w_s)?;
    let q = DMatrix::from_fn(2 * n - 1, 2 * n - 1, |i, j| inv[i] * sol.q[(i, j)] * inv[j]);

    let mut report = CovarianceReport::new(Method::Numeric, Coverage::Full, reduced.output_blocks(&q));
    report.diagnostics.lyapunov_residual = Some(lyapunov::residual(&reduced.a2, &q, &w));
    Ok(report)
}

/// The blocks `G`, `S`, `R` of the reduced state covariance under a uniform ratio `α = dᵢ/mᵢ`.
///
/// `G` is the angle block over the non-zero modes, `R` the frequency block over
/// all modes and `S` their cross covariance.
#[derive(Debug, Clone)]
pub struct UniformRatioBlocks {
    pub g: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub alpha: f64,
    /// `ρᵢ = 2α² + λᵢ`
    pub rho: DVector<f64>,
    /// `χᵢⱼ = (λᵢ − λⱼ)² + 2α²(λᵢ + λⱼ)`
    pub chi: DMatrix<f64>,
}

impl UniformRatioBlocks {
    /// Reassembles `Q_x = [[G, S], [Sᵀ, R]]`.
    pub fn state_covariance(&self) -> DMatrix<f64> {
        let k = self.g.nrows();
        let n = self.r.nrows();
        let mut q = DMatrix::zeros(k + n, k + n);
        q.view_mut((0, 0), (k, k)).copy_from(&self.g);
        q.view_mut((0, k), (k, n)).copy_from(&self.s);
        q.view_mut((k, 0), (n, k)).copy_from(&self.s.transpose());
        q.view_mut((k, k), (n, n)).copy_from(&self.r);
        q
    }

    /// Trailing `(n−1)×(n−1)` block of `S`, skew-symmetric by construction.
    pub fn s2(&self) -> DMatrix<f64> {
        let k = self.s.nrows();
        self.s.view((0, 1), (k, k)).into_owned()
    }
}

/// Common damping-inertia ratio, or an error naming the nodes that deviate from it.
pub fn uniform_ratio(lin: &LinearizedSystem) -> Result<f64> {
    let ratios = lin.damping.component_div(&lin.inertia);
    let alpha = ratios.mean();
    let offenders: Vec<usize> = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| (*r - alpha).abs() > RATIO_TOLERANCE * alpha)
        .map(|(i, _)| i)
        .collect();
    if offenders.is_empty() {
        Ok(alpha)
    } else {
        Err(Error::assumption(
            "uniform damping-inertia ratio",
            format!("d/m differs from the mean {alpha} at nodes {offenders:?}"),
        ))
    }
}

/// Explicit `G`, `S`, `R` for a given decomposition, valid when all `dᵢ/mᵢ` equal `α`.
pub fn uniform_ratio_blocks(
    lin: &LinearizedSystem,
    spectral: &SpectralDecomposition,
    alpha: f64,
) -> UniformRatioBlocks {
    let n = lin.node_count();
    let u = &spectral.vectors;
    let lambda = &spectral.eigenvalues;
    let a2 = 2.0 * alpha * alpha;

    // κᵢⱼ = uᵢᵀ M^{-1/2} B̃² M^{-1/2} uⱼ
    let xi = lin.noise.component_mul(&lin.noise).component_div(&lin.inertia);
    let kappa = u.transpose() * DMatrix::from_diagonal(&xi) * u;

    let rho = lambda.map(|l| a2 + l);
    let chi = DMatrix::from_fn(n, n, |i, j| {
        let d = lambda[i] - lambda[j];
        d * d + a2 * (lambda[i] + lambda[j])
    });

    let mut s = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        s[(i, 0)] = kappa[(i + 1, 0)] / rho[i + 1];
    }
    for i in 1..n {
        for j in 1..n {
            s[(i - 1, j)] = (lambda[i] - lambda[j]) / chi[(i, j)] * kappa[(i, j)];
        }
    }

    let g = DMatrix::from_fn(n - 1, n - 1, |i, j| {
        2.0 * alpha / chi[(i + 1, j + 1)] * kappa[(i + 1, j + 1)]
    });

    let r = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 && j == 0 {
            kappa[(0, 0)] / (2.0 * alpha)
        } else {
            alpha * (lambda[i] + lambda[j]) / chi[(i, j)] * kappa[(i, j)]
        }
    });

    UniformRatioBlocks {
        g,
        s,
        r,
        alpha,
        rho,
        chi,
    }
}

/// Output covariance from the explicit uniform-ratio blocks.
pub fn asymptotic_variance_uniform_ratio(lin: &LinearizedSystem) -> Result<CovarianceReport> {
    if !lin.weighted.is_connected() {
        return Err(Error::NotConnected);
    }
    let spectral = whitened_spectrum(&lin.laplacian(), &lin.inertia)?;
    uniform_ratio_with_spectrum(lin, &spectral)
}

pub fn uniform_ratio_with_spectrum(
    lin: &LinearizedSystem,
    spectral: &SpectralDecomposition,
) -> Result<CovarianceReport> {
    let alpha = uniform_ratio(lin)?;
    let blocks = uniform_ratio_blocks(lin, spectral, alpha);

    let u = &spectral.vectors;
    let u_hat = spectral.nonzero_modes();
    let m_inv_sqrt = DMatrix::from_diagonal(&lin.inertia.map(|x| 1.0 / x.sqrt()));
    let ct = lin.incidence().transpose();

    let left = &ct * &m_inv_sqrt * &u_hat;
    let q_delta = &left * &blocks.g * left.transpose();
    let node_map = &m_inv_sqrt * u;
    let q_omega = &node_map * &blocks.r * node_map.transpose();
    let q_delta_omega = &node_map * blocks.s.transpose() * left.transpose();

    let out = CovarianceBlocks {
        q_delta: (&q_delta + q_delta.transpose()) * 0.5,
        q_omega: (&q_omega + q_omega.transpose()) * 0.5,
        q_delta_omega,
    };
    Ok(CovarianceReport::new(Method::UniformRatio, Coverage::Full, out))
}

/// Angle-difference covariance of the zero-inertia (first-order) model
/// `dδ = −D⁻¹Lδ dt + D⁻¹B̃ dv`.
#[derive(Debug, Clone)]
pub struct FirstOrderVariance {
    pub q_delta: DMatrix<f64>,
    /// Covariance of the non-zero spectral modes, `(n−1)×(n−1)`.
    pub q_x: DMatrix<f64>,
    pub spectral: SpectralDecomposition,
}

impl FirstOrderVariance {
    pub fn into_report(self) -> CovarianceReport {
        let m = self.q_delta.nrows();
        let n = self.spectral.dim();
        let mut blocks = CovarianceBlocks::zeros(n, m);
        blocks.q_delta = self.q_delta;
        CovarianceReport::new(Method::FirstOrder, Coverage::DeltaOnly, blocks)
    }
}

pub fn first_order_variance(lin: &LinearizedSystem) -> Result<FirstOrderVariance> {
    if !lin.weighted.is_connected() {
        return Err(Error::NotConnected);
    }
    let n = lin.node_count();
    let spectral = whitened_spectrum(&lin.laplacian(), &lin.damping)?;
    let u2 = spectral.nonzero_modes();
    let lambda = &spectral.eigenvalues;
    let d_inv_sqrt = DMatrix::from_diagonal(&lin.damping.map(|x| 1.0 / x.sqrt()));

    let xi = lin.noise.component_mul(&lin.noise).component_div(&lin.damping);
    let w = u2.transpose() * DMatrix::from_diagonal(&xi) * &u2;
    let q_x = DMatrix::from_fn(n - 1, n - 1, |i, j| w[(i, j)] / (lambda[i + 1] + lambda[j + 1]));

    let left = lin.incidence().transpose() * d_inv_sqrt * &u2;
    let q_delta = &left * &q_x * left.transpose();
    Ok(FirstOrderVariance {
        q_delta: (&q_delta + q_delta.transpose()) * 0.5,
        q_x,
        spectral,
    })
}

fn uniform_machines(lin: &LinearizedSystem) -> Result<(f64, f64)> {
    let eta = lin.inertia[0];
    let d = lin.damping[0];
    let same = |v: &DVector<f64>, x: f64| v.iter().all(|&y| (y - x).abs() <= RATIO_TOLERANCE * x);
    if same(&lin.inertia, eta) && same(&lin.damping, d) {
        Ok((eta, d))
    } else {
        Err(Error::assumption(
            "identical inertia and damping",
            "trace law requires M = ηI and D = dI",
        ))
    }
}

/// `tr(Q_ω) = tr(B̃²)/(2dη)` for identical machines; independent of the topology.
pub fn trace_frequency_variance(lin: &LinearizedSystem) -> Result<f64> {
    let (eta, d) = uniform_machines(lin)?;
    Ok(lin.noise_power() / (2.0 * d * eta))
}

/// Trace law together with the trace of the numerically solved `Q_ω`.
pub fn trace_frequency_variance_checked(lin: &LinearizedSystem) -> Result<(f64, f64)> {
    let formula = trace_frequency_variance(lin)?;
    let numeric = asymptotic_variance_numeric(lin)?.q_omega().trace();
    Ok((formula, numeric))
}
