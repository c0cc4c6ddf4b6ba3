// Operating point of a five-machine ring: Newton solve, security margins and
// the line weights used by the linearization.
//
//     cargo run --example synchronous_state

use gridfluct::io::load_network;
use gridfluct::{linearize, security_check, solve_synchronous_state};

fn main() -> gridfluct::Result<()> {
    let net = load_network(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/ring.toml"))?;
    let state = solve_synchronous_state(&net)?;
    println!(
        "converged in {} iterations (residual {:.1e}), common frequency {:.3e}",
        state.iterations, state.residual_norm, state.sync_frequency
    );
    for (id, angle) in net.node_ids.iter().zip(state.angles.iter()) {
        println!("  δ*[{id}] = {angle:+.6}");
    }

    let security = security_check(&state, &net);
    println!("security condition holds: {}", security.secure);

    let lin = linearize(&net, &state)?;
    for (k, (edge, weight)) in net.topology.edges().iter().zip(lin.weighted.weights().iter()).enumerate() {
        println!(
            "  line {k}: {} - {}  K = {:.2}  w = K cos δ* = {:.6}  margin {:.4} rad",
            net.node_ids[edge.from], net.node_ids[edge.to], edge.weight, weight, security.margins[k]
        );
    }
    Ok(())
}
