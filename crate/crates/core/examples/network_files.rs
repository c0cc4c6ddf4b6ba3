// Network files: load, validate, write back losslessly, and emit a report as
// long-format CSV and JSON.
//
//     cargo run --example network_files

use gridfluct::io::{emit, load_network, network_to_toml, parse_network, Format};
use gridfluct::{asymptotic_variance_numeric, linearize_network};

fn main() -> gridfluct::Result<()> {
    let net = load_network(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/ring.toml"))?;
    let text = network_to_toml(&net);
    assert_eq!(parse_network(&text)?, net);
    println!("round trip preserved {} nodes and {} lines", net.node_count(), net.line_count());

    let broken = text.replacen("inertia = 0.8", "inertia = -0.8", 1);
    println!("{}", parse_network(&broken).unwrap_err());
    let duplicate = text.replacen("id = \"load-b\"", "id = \"gen-a\"", 1);
    println!("{}", parse_network(&duplicate).unwrap_err());

    let (_, lin) = linearize_network(&net)?;
    let report = asymptotic_variance_numeric(&lin)?;
    let csv = emit(std::slice::from_ref(&report), Format::Csv);
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    let json = emit(&[report], Format::Json);
    println!("JSON report: {} bytes", json.len());
    Ok(())
}
