// Single machine against an infinite bus: explicit variances next to the
// 2×2 Lyapunov solve, over a few damping values.
//
//     cargo run --example smib

use gridfluct::swing::smib_covariance_numeric;
use gridfluct::smib_variance;

fn main() -> gridfluct::Result<()> {
    let (inertia, capacity, power, noise) = (0.2, 1.0, 0.5, 0.1);
    for damping in [0.05, 0.2, 1.0, 5.0] {
        let v = smib_variance(inertia, damping, capacity, power, noise)?;
        let q = smib_covariance_numeric(inertia, damping, capacity, power, noise)?;
        println!(
            "d = {damping:<4}  var δ {:.9e} (solve {:.9e})  var ω {:.9e} (solve {:.9e})",
            v.angle,
            q[(0, 0)],
            v.frequency,
            q[(1, 1)]
        );
    }
    // beyond the line capacity there is no operating point
    println!("{}", smib_variance(inertia, 1.0, capacity, 1.5, noise).unwrap_err());
    Ok(())
}
