// Sweeps declared in files: frequency variance at the disturbed node of a
// complete graph against inertia, and a quiet line's angle variance of a star
// against network size.
//
//     cargo run --example parameter_sweep

use gridfluct::io::{run_sweep, SweepSpec};
use gridfluct::{Method, Quantity};

fn main() -> gridfluct::Result<()> {
    let spec = SweepSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/fig2b_eta.toml"))?;
    let result = run_sweep(&spec)?;
    let closed = result.series(Method::ClosedForm, Quantity::Omega, 2, 2);
    let numeric = result.series(Method::Numeric, Quantity::Omega, 2, 2);
    let worst = closed.iter().zip(&numeric).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    println!("η sweep, {} points, worst closed/numeric gap {worst:.1e}", closed.len());
    print!("{}", result.to_csv());

    let spec = SweepSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/fig6d_star_n.toml"))?;
    let series = run_sweep(&spec)?.series(Method::ClosedForm, Quantity::Delta, 2, 2);
    let decreasing = series.windows(2).all(|w| w[1] < w[0]);
    println!("star n sweep: quiet-line angle variance decreasing in n: {decreasing}");
    Ok(())
}
