// Stationary covariance of a heterogeneous network by every applicable route:
// the general Lyapunov solve, the uniform damping-inertia ratio formula and the
// zero-inertia approximation.
//
//     cargo run --example variance_routes

use gridfluct::io::{compare, load_network, EXACT_ROUTES};
use gridfluct::variance::trace_frequency_variance_checked;
use gridfluct::{
    asymptotic_variance_numeric, asymptotic_variance_uniform_ratio, first_order_variance, linearize_network,
    LinearizedSystem,
};

fn main() -> gridfluct::Result<()> {
    let net = load_network(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/ring.toml"))?;
    let (_, lin) = linearize_network(&net)?;

    let numeric = asymptotic_variance_numeric(&lin)?;
    println!("Lyapunov residual {:.1e}", numeric.diagnostics.lyapunov_residual.unwrap_or(0.0));
    for (i, id) in net.node_ids.iter().enumerate() {
        println!("  var ω[{id}] = {:.6e}", numeric.q_omega()[(i, i)]);
    }

    // every machine in the ring has d/m = 0.5, so the explicit route applies
    let uniform = asymptotic_variance_uniform_ratio(&lin)?;
    println!("uniform-ratio vs numeric: {:.1e}", uniform.max_relative_discrepancy(&numeric));

    let first = first_order_variance(&lin)?.into_report();
    println!("zero-inertia approximation vs numeric (angles only): {:.1e}", first.max_relative_discrepancy(&numeric));

    // identical machines on the same lines: tr Q_ω depends only on the noise
    let identical = LinearizedSystem::uniform(lin.weighted.clone(), 0.5, 0.25, lin.noise.as_slice().to_vec())?;
    let (formula, solved) = trace_frequency_variance_checked(&identical)?;
    println!("identical machines, tr Q_ω: formula {formula:.9e}, Lyapunov {solved:.9e}");

    let cmp = compare(&lin, &EXACT_ROUTES, None)?;
    print!("{}", cmp.to_csv());
    Ok(())
}
