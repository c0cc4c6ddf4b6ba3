//! Swing-equation network model, its synchronous state and the linear
//! stochastic system obtained around that state.
//!
//! The nonlinear dynamics at node `i` are
//!
//! ```text
//! δ̇ᵢ = ωᵢ
//! mᵢ ω̇ᵢ = Pᵢ − dᵢ ωᵢ − Σⱼ Kᵢⱼ sin(δᵢ − δⱼ)
//! ```
//!
//! and the disturbance enters the frequency equation as `mᵢ⁻¹ bᵢ dvᵢ` with
//! independent Brownian motions `vᵢ`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::lyapunov;

/// Power network parameters. Line weights of `topology` are the line capacities `Kᵢⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    pub node_ids: Vec<String>,
    pub topology: WeightedGraph,
    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
    pub power: DVector<f64>,
    pub noise: DVector<f64>,
}

impl PowerNetwork {
    /// Validates the per-node parameters and connectivity. Node ids default to `"1"…"n"`.
    pub fn new(
        topology: WeightedGraph,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        power: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let ids = (1..=topology.node_count()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, topology, inertia, damping, power, noise)
    }

    pub fn with_ids(
        node_ids: Vec<String>,
        topology: WeightedGraph,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        power: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let n = topology.node_count();
        for (name, v) in [
            ("node_ids", node_ids.len()),
            ("inertia", inertia.len()),
            ("damping", damping.len()),
            ("power", power.len()),
            ("noise", noise.len()),
        ] {
            if v != n {
                return Err(Error::validation(name, format!("expected {n} entries, got {v}")));
            }
        }
        let positive = |field: &str, values: &[f64]| -> Result<()> {
            for (i, &x) in values.iter().enumerate() {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::validation(
                        field,
                        format!("node {} must be positive, got {x}", node_ids[i]),
                    ));
                }
            }
            Ok(())
        };
        positive("inertia", &inertia)?;
        positive("damping", &damping)?;
        for (i, &b) in noise.iter().enumerate() {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::validation(
                    "noise",
                    format!("node {} must be non-negative, got {b}", node_ids[i]),
                ));
            }
        }
        if let Some(i) = power.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation("power", format!("node {} is not finite", node_ids[i])));
        }
        if !topology.is_connected() {
            return Err(Error::NotConnected);
        }
        Ok(PowerNetwork {
            node_ids,
            topology,
            inertia: DVector::from_vec(inertia),
            damping: DVector::from_vec(damping),
            power: DVector::from_vec(power),
            noise: DVector::from_vec(noise),
        })
    }

    /// Identical machines with zero injections on a given graph; capacities are the graph weights.
    pub fn homogeneous(topology: WeightedGraph, inertia: f64, damping: f64, noise: Vec<f64>) -> Result<Self> {
        let n = topology.node_count();
        Self::new(topology, vec![inertia; n], vec![damping; n], vec![0.0; n], noise)
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn line_count(&self) -> usize {
        self.topology.edge_count()
    }

    pub fn capacity(&self, line: usize) -> f64 {
        self.topology.edges()[line].weight
    }
}

/// `ω̃ = Σ Pᵢ / Σ dᵢ`.
pub fn synchronized_frequency(net: &PowerNetwork) -> f64 {
    net.power.sum() / net.damping.sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynchronousState {
    /// Node angles in radians with node 0 pinned to zero.
    pub angles: DVector<f64>,
    pub sync_frequency: f64,
    /// Max-norm residual of the power balance at `angles`.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl SynchronousState {
    /// Angle difference `δᵢ − δⱼ` across every line, in line order.
    pub fn line_differences(&self, topology: &WeightedGraph) -> Vec<f64> {
        topology
            .edges()
            .iter()
            .map(|e| wrap_angle(self.angles[e.from] - self.angles[e.to]))
            .collect()
    }
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

pub const SYNC_TOLERANCE: f64 = 1e-10;
const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 10;

/// Power balance `Pᵢ − dᵢ ω̃ − Σⱼ Kᵢⱼ sin(δᵢ − δⱼ)` at every node.
pub fn power_mismatch(net: &PowerNetwork, angles: &DVector<f64>, sync_frequency: f64) -> DVector<f64> {
    let mut f = &net.power - &net.damping * sync_frequency;
    for e in net.topology.edges() {
        let flow = e.weight * (angles[e.from] - angles[e.to]).sin();
        f[e.from] -= flow;
        f[e.to] += flow;
    }
    f
}

/// Solves the synchronous power balance by damped Newton iteration from a flat start.
///
/// Node 0 is the angle reference; its equation is implied by the others because
/// all mismatches sum to zero at the synchronized frequency.
pub fn solve_synchronous_state(net: &PowerNetwork) -> Result<SynchronousState> {
    let n = net.node_count();
    let omega = synchronized_frequency(net);
    let mut angles = DVector::zeros(n);
    let mut f = power_mismatch(net, &angles, omega);
    let mut norm = f.amax();
    if n == 1 {
        return Ok(SynchronousState {
            angles,
            sync_frequency: omega,
            residual_norm: norm,
            iterations: 0,
        });
    }

    for iter in 0..MAX_NEWTON_ITERATIONS {
        if norm <= SYNC_TOLERANCE {
            return Ok(SynchronousState {
                angles,
                sync_frequency: omega,
                residual_norm: norm,
                iterations: iter,
            });
        }
        // ∂fᵢ/∂δₖ = −L(δ)ᵢₖ with weights Kᵢⱼ cos(δᵢ − δⱼ); keep rows/columns 1..n.
        let mut jac = DMatrix::<f64>::zeros(n - 1, n - 1);
        for e in net.topology.edges() {
            let c = e.weight * (angles[e.from] - angles[e.to]).cos();
            for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                if a > 0 {
                    jac[(a - 1, a - 1)] -= c;
                    if b > 0 {
                        jac[(a - 1, b - 1)] += c;
                    }
                }
            }
        }
        let rhs = -f.rows(1, n - 1);
        let step = jac.lu().solve(&rhs).ok_or_else(|| {
            Error::NoSynchronousState(format!("singular Jacobian at iteration {iter}"))
        })?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = angles.clone();
            for i in 1..n {
                trial[i] += scale * step[i - 1];
            }
            let f_trial = power_mismatch(net, &trial, omega);
            let n_trial = f_trial.amax();
            if n_trial < norm {
                angles = trial;
                f = f_trial;
                norm = n_trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoSynchronousState(format!(
                "line search stalled at iteration {iter} with residual {norm:e}"
            )));
        }
    }
    if norm <= SYNC_TOLERANCE {
        return Ok(SynchronousState {
            angles,
            sync_frequency: omega,
            residual_norm: norm,
            iterations: MAX_NEWTON_ITERATIONS,
        });
    }
    Err(Error::NoSynchronousState(format!(
        "Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations (residual {norm:e})"
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityReport {
    pub secure: bool,
    /// `π/2 − |δᵢ − δⱼ|` per line.
    pub margins: Vec<f64>,
}

/// Checks `|δᵢ − δⱼ| < π/2` on every line.
pub fn security_check(state: &SynchronousState, net: &PowerNetwork) -> SecurityReport {
    let margins: Vec<f64> = state
        .line_differences(&net.topology)
        .into_iter()
        .map(|x| FRAC_PI_2 - x.abs())
        .collect();
    let secure = margins.iter().all(|&m| m > 0.0);
    SecurityReport { secure, margins }
}

/// Coefficients of the linear stochastic system around a synchronous state.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    /// Graph with line weights `wᵢⱼ = Kᵢⱼ cos δ*ᵢⱼ` and the network's line orientation.
    pub weighted: WeightedGraph,
    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
    pub noise: DVector<f64>,
}

impl LinearizedSystem {
    pub fn new(weighted: WeightedGraph, inertia: DVector<f64>, damping: DVector<f64>, noise: DVector<f64>) -> Result<Self> {
        let n = weighted.node_count();
        if inertia.len() != n || damping.len() != n || noise.len() != n {
            return Err(Error::Shape("per-node vectors must match the node count".into()));
        }
        if !weighted.is_connected() {
            return Err(Error::NotConnected);
        }
        Ok(LinearizedSystem {
            weighted,
            inertia,
            damping,
            noise,
        })
    }

    /// Uniform machines `M = ηI`, `D = dI` on a weighted graph.
    pub fn uniform(weighted: WeightedGraph, inertia: f64, damping: f64, noise: Vec<f64>) -> Result<Self> {
        let n = weighted.node_count();
        Self::new(
            weighted,
            DVector::from_element(n, inertia),
            DVector::from_element(n, damping),
            DVector::from_vec(noise),
        )
    }

    pub fn node_count(&self) -> usize {
        self.weighted.node_count()
    }

    pub fn line_count(&self) -> usize {
        self.weighted.edge_count()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        self.weighted.laplacian()
    }

    pub fn incidence(&self) -> DMatrix<f64> {
        self.weighted.incidence()
    }

    /// Same system with a different noise vector.
    pub fn with_noise(&self, noise: DVector<f64>) -> Self {
        LinearizedSystem {
            noise,
            ..self.clone()
        }
    }

    /// State matrix of `x = (δ, ω)`: `[[0, I], [−M⁻¹L, −M⁻¹D]]`.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let l = self.laplacian();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
            for j in 0..n {
                a[(n + i, j)] = -l[(i, j)] / self.inertia[i];
            }
            a[(n + i, n + i)] = -self.damping[i] / self.inertia[i];
        }
        a
    }

    /// Input matrix `[0; M⁻¹B̃]` of the Brownian disturbance.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut b = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            b[(n + i, i)] = self.noise[i] / self.inertia[i];
        }
        b
    }

    /// Output map `y = (C̃ᵀδ, ω)`.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.node_count(), self.line_count());
        let mut c = DMatrix::zeros(m + n, 2 * n);
        c.view_mut((0, 0), (m, n)).copy_from(&self.incidence().transpose());
        c.view_mut((m, n), (n, n)).fill_with_identity();
        c
    }

    /// `tr(B̃²) = Σ bᵢ²`.
    pub fn noise_power(&self) -> f64 {
        self.noise.norm_squared()
    }
}

/// Linearizes around a secure synchronous state.
pub fn linearize(net: &PowerNetwork, state: &SynchronousState) -> Result<LinearizedSystem> {
    let security = security_check(state, net);
    if !security.secure {
        let lines = security
            .margins
            .iter()
            .enumerate()
            .filter(|(_, m)| **m <= 0.0)
            .map(|(k, _)| k)
            .collect();
        return Err(Error::InsecureState { lines });
    }
    let edges = net
        .topology
        .edges()
        .iter()
        .map(|e| {
            let diff = state.angles[e.from] - state.angles[e.to];
            Edge::new(e.from, e.to, e.weight * diff.cos())
        })
        .collect();
    let weighted = WeightedGraph::new(net.node_count(), edges)?;
    LinearizedSystem::new(weighted, net.inertia.clone(), net.damping.clone(), net.noise.clone())
}

/// Synchronous state followed by linearization.
pub fn linearize_network(net: &PowerNetwork) -> Result<(SynchronousState, LinearizedSystem)> {
    let state = solve_synchronous_state(net)?;
    let lin = linearize(net, &state)?;
    Ok((state, lin))
}

/// Stationary variances of a single machine against an infinite bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmibVariance {
    pub angle: f64,
    pub frequency: f64,
}

/// `q_δ = β² / (2d√(K² − P²))`, `q_ω = β² / (2ηd)`; the cross term vanishes.
pub fn smib_variance(inertia: f64, damping: f64, capacity: f64, power: f64, noise: f64) -> Result<SmibVariance> {
    if power.abs() >= capacity {
        return Err(Error::NoEquilibrium { power: power.abs(), capacity });
    }
    if !(inertia > 0.0 && damping > 0.0 && noise >= 0.0) {
        return Err(Error::Precondition(
            "SMIB requires η > 0, d > 0 and β ≥ 0".into(),
        ));
    }
    let stiffness = (capacity * capacity - power * power).sqrt();
    let beta2 = noise * noise;
    Ok(SmibVariance {
        angle: beta2 / (2.0 * damping * stiffness),
        frequency: beta2 / (2.0 * inertia * damping),
    })
}

/// Numerical stationary covariance of the 2×2 single-machine system.
pub fn smib_covariance_numeric(inertia: f64, damping: f64, capacity: f64, power: f64, noise: f64) -> Result<DMatrix<f64>> {
    if power.abs() >= capacity {
        return Err(Error::NoEquilibrium { power: power.abs(), capacity });
    }
    let l = (capacity * capacity - power * power).sqrt();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -l / inertia, -damping / inertia]);
    let b = noise / inertia;
    let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, b * b]);
    Ok(lyapunov::solve(&a, &w)?.q)
}
