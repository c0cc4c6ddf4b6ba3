// Monte Carlo estimate of the stationary covariance with standard errors,
// compared entry by entry with the Lyapunov solution.
//
//     cargo run --release --example monte_carlo

use gridfluct::closed_form::{GraphKind, HomogeneousParams};
use gridfluct::montecarlo::{simulate_covariance, SimConfig};
use gridfluct::{asymptotic_variance_numeric, Quantity};

fn main() -> gridfluct::Result<()> {
    let lin = HomogeneousParams::single_source(5, 10.0, 0.5, 0.3, 1, 0.04)?.linearized(GraphKind::Complete)?;
    let mut cfg = SimConfig::for_system(&lin, 64, 2024)?;
    cfg.horizon = 100.0;
    println!(
        "dt {:.4} s, burn-in {:.1} s, {} samples per trajectory",
        cfg.dt,
        cfg.burn_in,
        cfg.samples_per_trajectory()
    );

    let mc = simulate_covariance(&lin, &cfg)?;
    let exact = asymptotic_variance_numeric(&lin)?;
    let se = mc.diagnostics.std_errors.as_deref().expect("Monte Carlo reports standard errors");
    for i in 0..lin.node_count() {
        let (v, s, q) = (mc.q_omega()[(i, i)], se.block(Quantity::Omega)[(i, i)], exact.q_omega()[(i, i)]);
        println!("  var ω[{i}]: {v:.4e} ± {s:.1e}  (Lyapunov {q:.4e}, z = {:+.2})", (v - q) / s);
    }
    Ok(())
}
