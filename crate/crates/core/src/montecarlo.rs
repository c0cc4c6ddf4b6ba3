//! Monte Carlo estimate of the stationary output covariance.
//!
//! Trajectories of the full `2n`-state linear SDE are integrated from rest,
//! the burn-in is discarded, and second moments of `y = (C̃ᵀδ, ω)` are averaged
//! over the sampling window. Each trajectory contributes one batch; the
//! estimate is the mean over batches and its standard error is the batch
//! standard deviation over `√trajectories`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::whitened_spectrum;
use crate::lyapunov;
use crate::report::{CovarianceBlocks, CovarianceReport, Coverage, Method};
use crate::swing::LinearizedSystem;
use crate::variance::ReducedSystem;

/// States larger than this (max-norm) abort the run as unstable.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Relative size below which an entry is indistinguishable from accumulated roundoff.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;
/// Number of steps between removals of the mean angle drift.
pub const RESYNC_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact Gaussian transition over each step, `x ← e^{AΔ}x + ξ` with `Cov ξ = ∫₀^Δ e^{As}BBᵀe^{Aᵀs} ds`.
    Exact,
    /// `x ← x + AxΔ + B ΔW`.
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step in seconds.
    pub dt: f64,
    /// Simulated time discarded before sampling.
    pub burn_in: f64,
    /// Length of the sampling window.
    pub horizon: f64,
    pub trajectories: usize,
    pub master_seed: u64,
    /// Steps between consecutive samples.
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default = "exact")]
    pub scheme: Scheme,
    /// Each step draws its noise on `2^noise_refinement` sub-intervals, so a run
    /// at `dt` with refinement `r + 1` shares its noise path with a run at
    /// `dt/2` and refinement `r`.
    #[serde(default)]
    pub noise_refinement: u32,
}

fn one() -> usize {
    1
}

fn exact() -> Scheme {
    Scheme::Exact
}

impl SimConfig {
    /// Defaults derived from the system: `dt = 0.2/√(λ_max α_max + α_max²)`,
    /// burn-in `10/α_min` and a sampling window of `60/α_min`.
    pub fn for_system(lin: &LinearizedSystem, trajectories: usize, master_seed: u64) -> Result<Self> {
        let sde = LinearSde::from_linearized(lin)?;
        let spectrum = whitened_spectrum(&lin.laplacian(), &lin.inertia)?;
        let lambda_max = spectrum.eigenvalues.max();
        let alpha_max = lin.damping.component_div(&lin.inertia).max();
        let dt = 0.2 / (lambda_max * alpha_max + alpha_max * alpha_max).sqrt();
        let alpha_min = sde.slowest_decay;
        Ok(SimConfig {
            dt,
            burn_in: 10.0 / alpha_min,
            horizon: (60.0 / alpha_min).max(100.0 * dt),
            trajectories,
            master_seed,
            sample_stride: 1,
            scheme: Scheme::Exact,
            noise_refinement: 0,
        })
    }

    pub fn validate(&self, slowest_decay: f64) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        if self.trajectories < 2 {
            return Err(Error::validation("trajectories", "at least 2 are needed for standard errors"));
        }
        if self.sample_stride == 0 {
            return Err(Error::validation("sample_stride", "must be at least 1"));
        }
        let min_burn = 10.0 / slowest_decay;
        if !(self.burn_in >= min_burn * (1.0 - 1e-12)) {
            return Err(Error::validation(
                "burn_in",
                format!("{} s is shorter than 10/α_min = {min_burn} s", self.burn_in),
            ));
        }
        if self.horizon < 100.0 * self.dt {
            return Err(Error::validation("horizon", format!("must be at least 100·dt = {}", 100.0 * self.dt)));
        }
        if self.samples_per_trajectory() < 2 {
            return Err(Error::validation("horizon", "window holds fewer than two samples"));
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> usize {
        let r = self.burn_in / self.dt;
        if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round() as usize
        } else {
            r.ceil() as usize
        }
    }

    pub fn samples_per_trajectory(&self) -> usize {
        let r = self.horizon / (self.dt * self.sample_stride as f64);
        if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round() as usize
        } else {
            r.floor() as usize
        }
    }
}

/// Seed pair `(key, stream)` for trajectory `index`: every trajectory draws from
/// its own ChaCha stream under the master key, so streams never overlap.
pub fn trajectory_seed(master_seed: u64, trajectory_index: u64) -> (u64, u64) {
    (master_seed, trajectory_index)
}

fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let (key, stream) = trajectory_seed(master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Linear SDE `dx = Ax dt + B dW` observed through `y = Cx`.
#[derive(Debug, Clone)]
pub struct LinearSde {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Direction along which the state drifts freely without affecting `y`;
    /// its component is removed periodically.
    pub drift_mode: Option<DVector<f64>>,
    /// Slowest decay rate of the observable dynamics, `−max Re λ`.
    pub slowest_decay: f64,
}

impl LinearSde {
    /// Stable system; the decay rate comes from the spectrum of `a`.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || b.nrows() != a.nrows() || c.ncols() != a.nrows() {
            return Err(Error::Shape("A must be square and match B rows and C columns".into()));
        }
        let slowest_decay = -lyapunov::ensure_hurwitz(&a)?;
        Ok(LinearSde {
            a,
            b,
            c,
            drift_mode: None,
            slowest_decay,
        })
    }

    /// The full swing system; stability and decay are taken from the reduced system.
    pub fn from_linearized(lin: &LinearizedSystem) -> Result<Self> {
        let reduced = ReducedSystem::new(lin)?;
        let slowest_decay = -reduced.check_hurwitz()?;
        let n = lin.node_count();
        let drift = DVector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { 0.0 });
        Ok(LinearSde {
            a: lin.state_matrix(),
            b: lin.input_matrix(),
            c: lin.output_matrix(),
            drift_mode: Some(drift),
            slowest_decay,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// One-step map `x ← Φx + Σⱼ Gⱼξⱼ` with independent standard normal `ξⱼ`.
///
/// With noise refinement `r` a step is split into `2^r` sub-intervals and
/// `Gⱼ` carries the noise of sub-interval `j` to the end of the step. A run at
/// `dt` with refinement `r + 1` then consumes its normals exactly as a run at
/// `dt/2` with refinement `r` does, which couples the two paths.
struct Stepper {
    phi: DMatrix<f64>,
    gs: Vec<DMatrix<f64>>,
}

/// Transition and noise factor of the exact scheme over `dt`.
fn exact_transition(sde: &LinearSde, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    // Van Loan: exp([[−A, BBᵀ], [0, Aᵀ]] dt) = [[·, F₁₂], [0, F₂₂]] with Φ = F₂₂ᵀ, Q_Δ = F₂₂ᵀF₁₂.
    let n = sde.state_dim();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-&sde.a * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(&sde.b * sde.b.transpose() * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(sde.a.transpose() * dt));
    let e = m.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let q = &phi * e.view((0, n), (n, n));
    let q = (&q + q.transpose()) * 0.5;

    let eig = SymmetricEigen::new(q);
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..n).filter(|&i| top > 0.0 && eig.eigenvalues[i] > 1e-14 * top).collect();
    let g = DMatrix::from_fn(n, keep.len(), |i, k| eig.eigenvectors[(i, keep[k])] * eig.eigenvalues[keep[k]].sqrt());
    (phi, g)
}

fn exact_stepper(sde: &LinearSde, dt: f64, refinement: u32) -> Stepper {
    let parts = 1usize << refinement;
    let (phi_sub, g_sub) = exact_transition(sde, dt / parts as f64);
    let n = sde.state_dim();
    let mut gs = vec![g_sub; parts];
    let mut carry = DMatrix::identity(n, n);
    for g in gs.iter_mut().rev() {
        *g = &carry * &*g;
        carry = &carry * &phi_sub;
    }
    Stepper { phi: carry, gs }
}

fn euler_stepper(sde: &LinearSde, dt: f64, refinement: u32) -> Stepper {
    let n = sde.state_dim();
    let parts = 1usize << refinement;
    let phi = DMatrix::identity(n, n) + &sde.a * dt;
    let g = &sde.b * (dt / parts as f64).sqrt();
    Stepper { phi, gs: vec![g; parts] }
}

/// Second moments of one trajectory's samples, normalised per sample.
#[derive(Debug, Clone)]
struct Moments {
    index: u64,
    all: DMatrix<f64>,
    halves: [DMatrix<f64>; 2],
    /// Sample mean as a column.
    mean: DMatrix<f64>,
}

fn run_trajectory(sde: &LinearSde, stepper: &Stepper, cfg: &SimConfig, index: u64) -> Result<Moments> {
    let mut rng = trajectory_rng(cfg.master_seed, index);
    let (dim, p, k) = (sde.state_dim(), sde.output_dim(), stepper.gs[0].ncols());
    let mut x = DVector::<f64>::zeros(dim);
    let mut next = DVector::<f64>::zeros(dim);
    let mut xi = DVector::<f64>::zeros(k);
    let mut y = DVector::<f64>::zeros(p);
    let drift_norm = sde.drift_mode.as_ref().map(|v| v.norm_squared());

    let samples = cfg.samples_per_trajectory();
    let half = samples / 2;
    let mut sums = [DMatrix::<f64>::zeros(p, p), DMatrix::<f64>::zeros(p, p)];
    let mut mean = DMatrix::<f64>::zeros(p, 1);

    let total_steps = cfg.burn_in_steps() + samples * cfg.sample_stride;
    let mut taken = 0;
    for step in 1..=total_steps {
        next.gemv(1.0, &stepper.phi, &x, 0.0);
        for g in &stepper.gs {
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            next.gemv(1.0, g, &xi, 1.0);
        }
        std::mem::swap(&mut x, &mut next);

        if step % RESYNC_STEPS == 0 {
            if let (Some(v), Some(nv)) = (&sde.drift_mode, drift_norm) {
                let c = v.dot(&x) / nv;
                x.axpy(-c, v, 1.0);
            }
        }
        if step > cfg.burn_in_steps() && (step - cfg.burn_in_steps()) % cfg.sample_stride == 0 {
            let norm = x.amax();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::StepSize { step, dt: cfg.dt, norm });
            }
            y.gemv(1.0, &sde.c, &x, 0.0);
            let slot = usize::from(taken >= half);
            sums[slot].ger(1.0, &y, &y, 1.0);
            mean.column_mut(0).axpy(1.0, &y, 1.0);
            taken += 1;
        }
    }
    let second_count = (samples - half) as f64;
    let all = (&sums[0] + &sums[1]) / samples as f64;
    let [first, second] = sums;
    Ok(Moments {
        index,
        all,
        halves: [first / half as f64, second / second_count],
        mean: mean / samples as f64,
    })
}

/// Batch mean and standard error over trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub std_error: T,
}

/// Raw Monte Carlo output, ordered like `C`'s rows.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub covariance: Estimate<DMatrix<f64>>,
    /// Estimates over the first and second halves of the sampling window.
    pub halves: [Estimate<DMatrix<f64>>; 2],
    pub mean: Estimate<DVector<f64>>,
    pub trajectories: usize,
    pub samples_per_trajectory: usize,
}

impl McEstimate {
    /// Entries where the two half-window estimates differ by more than `k` mutual
    /// standard errors. Differences below [`ABSOLUTE_FLOOR`] times the largest
    /// covariance entry are treated as roundoff.
    pub fn nonstationary_entries(&self, k: f64) -> Vec<(usize, usize)> {
        let [a, b] = &self.halves;
        let p = a.value.nrows();
        let floor = ABSOLUTE_FLOOR * self.covariance.value.amax();
        let mut out = Vec::new();
        for i in 0..p {
            for j in i..p {
                let se = (a.std_error[(i, j)].powi(2) + b.std_error[(i, j)].powi(2)).sqrt();
                let diff = (a.value[(i, j)] - b.value[(i, j)]).abs();
                if diff > floor && diff > k * se {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn batch_stats<F>(batches: &[Moments], pick: F) -> Estimate<DMatrix<f64>>
where
    F: Fn(&Moments) -> &DMatrix<f64>,
{
    let k = batches.len() as f64;
    let (r, c) = pick(&batches[0]).shape();
    let mut sum = DMatrix::zeros(r, c);
    for m in batches {
        sum += pick(m);
    }
    let mean = sum / k;
    let mut ss = DMatrix::zeros(r, c);
    for m in batches {
        let d = pick(m) - &mean;
        ss += d.component_mul(&d);
    }
    let std_error = (ss / (k - 1.0) / k).map(f64::sqrt);
    Estimate { value: mean, std_error }
}

/// Runs the trajectories with the given indices. The result depends only on
/// the set of indices, not on their order or on thread scheduling.
pub fn simulate_indices(sde: &LinearSde, cfg: &SimConfig, indices: &[u64]) -> Result<McEstimate> {
    cfg.validate(sde.slowest_decay)?;
    if indices.len() < 2 {
        return Err(Error::validation("trajectories", "at least 2 are needed for standard errors"));
    }
    let stepper = match cfg.scheme {
        Scheme::Exact => exact_stepper(sde, cfg.dt, cfg.noise_refinement),
        Scheme::EulerMaruyama => euler_stepper(sde, cfg.dt, cfg.noise_refinement),
    };
    let mut batches = indices
        .par_iter()
        .map(|&i| run_trajectory(sde, &stepper, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    batches.sort_by_key(|m| m.index);

    let mean = batch_stats(&batches, |m| &m.mean);
    let mean_est = Estimate {
        value: mean.value.column(0).into_owned(),
        std_error: mean.std_error.column(0).into_owned(),
    };
    Ok(McEstimate {
        covariance: batch_stats(&batches, |m| &m.all),
        halves: [batch_stats(&batches, |m| &m.halves[0]), batch_stats(&batches, |m| &m.halves[1])],
        mean: mean_est,
        trajectories: batches.len(),
        samples_per_trajectory: cfg.samples_per_trajectory(),
    })
}

pub fn simulate(sde: &LinearSde, cfg: &SimConfig) -> Result<McEstimate> {
    let indices: Vec<u64> = (0..cfg.trajectories as u64).collect();
    simulate_indices(sde, cfg, &indices)
}

/// Monte Carlo covariance report with per-entry standard errors.
pub fn simulate_covariance(lin: &LinearizedSystem, cfg: &SimConfig) -> Result<CovarianceReport> {
    let sde = LinearSde::from_linearized(lin)?;
    let est = simulate(&sde, cfg)?;
    Ok(to_report(lin, &est))
}

pub fn to_report(lin: &LinearizedSystem, est: &McEstimate) -> CovarianceReport {
    let (n, m) = (lin.node_count(), lin.line_count());
    let blocks = CovarianceBlocks::from_output(&est.covariance.value, n, m);
    let mut report = CovarianceReport::new(Method::MonteCarlo, Coverage::Full, blocks);
    report.diagnostics.std_errors = Some(Box::new(CovarianceBlocks::from_output(&est.covariance.std_error, n, m)));
    report.diagnostics.samples = Some(est.trajectories * est.samples_per_trajectory);
    report
}
