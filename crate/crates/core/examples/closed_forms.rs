// Explicit variances of identical machines on complete and star graphs with a
// single disturbed node, checked against the numeric route, plus the
// parameter trends and the critical network size.
//
//     cargo run --example closed_forms

use gridfluct::asymptotic_variance_numeric;
use gridfluct::closed_form::{
    complete_report, complete_single_source, critical_size, star_report, star_single_source_leaf, trend_report,
    GraphKind, HomogeneousParams,
};

fn main() -> gridfluct::Result<()> {
    // node 1 (zero-based) is the disturbed one
    let complete = HomogeneousParams::single_source(20, 10.0, 0.5, 0.3, 1, 0.04)?;
    let s = complete_single_source(&complete, 1)?;
    println!("complete n=20: var ω source {:.9e}, elsewhere {:.9e}", s.at_source, s.elsewhere);
    println!("  incident line {:.9e}, other lines {:.1e}", s.incident_line, s.other_line);
    let numeric = asymptotic_variance_numeric(&complete.linearized(GraphKind::Complete)?)?;
    println!("  closed vs numeric {:.1e}", complete_report(&complete)?.max_relative_discrepancy(&numeric));
    println!("  critical size n_c = {}", critical_size(0.3, 10.0, 0.5));

    let star = HomogeneousParams::single_source(20, 10.0, 0.5, 0.2, 1, 0.5)?;
    let leaf = star_single_source_leaf(&star, 1)?;
    println!(
        "star n=20, leaf source: var ω root {:.6e}, source {:.6e}, other leaf {:.6e}",
        leaf.root, leaf.source, leaf.other_leaf
    );
    let numeric = asymptotic_variance_numeric(&star.linearized(GraphKind::Star)?)?;
    println!("  closed vs numeric {:.1e}", star_report(&star)?.max_relative_discrepancy(&numeric));

    for (kind, p) in [(GraphKind::Complete, &complete), (GraphKind::Star, &star)] {
        let trends = trend_report(kind, p, 1)?;
        println!("{} trends (all signs as stated: {})", kind.as_str(), trends.all_signs_hold());
        for d in &trends.derivatives {
            println!("  ∂{:?}/∂{:?} = {:+.3e} expected {:?}", d.scalar, d.parameter, d.value, d.expected);
        }
        for l in &trends.limits {
            println!("  {:?} as {:?}: {:.6e}", l.scalar, l.kind, l.value);
        }
    }
    Ok(())
}
