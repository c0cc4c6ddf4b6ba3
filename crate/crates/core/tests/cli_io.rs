use std::path::{Path, PathBuf};
use std::process::Command;

use gridfluct::io::*;
use gridfluct::{Edge, Error, Method, PowerNetwork, Quantity, WeightedGraph};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

const TWO_NODES: &str = r#"
schema_version = 1

[[nodes]]
id = "a"
inertia = 1.0
damping = 0.5
power = 0.3
noise = 0.1

[[nodes]]
id = "b"
inertia = 2.0
damping = 1.0
power = -0.3
noise = 0.0

[[lines]]
from = "a"
to = "b"
capacity = 1.5
"#;

fn field_of(e: Error) -> String {
    match e {
        Error::Validation { field, .. } => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_two_node_file() {
    let net = parse_network(TWO_NODES).unwrap();
    assert_eq!(net.node_count(), 2);
    assert_eq!(net.line_count(), 1);
    assert_eq!(net.node_ids, ["a", "b"]);
    assert_eq!(net.capacity(0), 1.5);
}

#[test]
fn invalid_records_name_their_field() {
    let dup = TWO_NODES.replacen("id = \"b\"", "id = \"a\"", 1);
    assert_eq!(field_of(parse_network(&dup).unwrap_err()), "nodes[1].id");
    let neg = TWO_NODES.replacen("inertia = 2.0", "inertia = -2.0", 1);
    assert_eq!(field_of(parse_network(&neg).unwrap_err()), "nodes[1].inertia");
    let dangling = TWO_NODES.replacen("to = \"b\"", "to = \"c\"", 1);
    assert_eq!(field_of(parse_network(&dangling).unwrap_err()), "lines[0].to");
    let zero = TWO_NODES.replacen("capacity = 1.5", "capacity = 0.0", 1);
    assert_eq!(field_of(parse_network(&zero).unwrap_err()), "lines[0].capacity");
    let version = TWO_NODES.replacen("schema_version = 1", "schema_version = 9", 1);
    assert_eq!(field_of(parse_network(&version).unwrap_err()), "schema_version");
}

#[test]
fn disconnected_and_malformed_files() {
    let lone = TWO_NODES.split("[[lines]]").next().unwrap();
    assert!(matches!(parse_network(lone), Err(Error::NotConnected)));
    let typo = TWO_NODES.replacen("damping = 1.0", "dampng = 1.0", 1);
    match parse_network(&typo) {
        Err(Error::Parse { message, .. }) => {
            assert!(message.contains("dampng"), "{message}");
            assert!(message.contains("line"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

fn arb_network() -> impl Strategy<Value = PowerNetwork> {
    (2usize..9)
        .prop_flat_map(|n| {
            let tree = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
            let extra = proptest::collection::vec((0..n, 0..n), 0..n);
            let node = (1e-3..1e3f64, 1e-3..1e3f64, -1e2..1e2f64, 0.0..10.0f64);
            let nodes = proptest::collection::vec(node, n);
            let caps = proptest::collection::vec(1e-2..1e3f64, 2 * n);
            (Just(n), tree, extra, nodes, caps)
        })
        .prop_map(|(n, tree, extra, nodes, caps)| {
            let mut edges: Vec<Edge> = Vec::new();
            for (k, parent) in tree.iter().enumerate() {
                edges.push(Edge::new(parent.index(k + 1), k + 1, caps[k]));
            }
            for (a, b) in extra {
                let dup = edges.iter().any(|e| (e.from, e.to) == (a, b) || (e.from, e.to) == (b, a));
                if a != b && !dup {
                    edges.push(Edge::new(a, b, caps[n + edges.len() % n]));
                }
            }
            let g = WeightedGraph::new(n, edges).unwrap();
            let ids = (0..n).map(|i| format!("bus {i}")).collect();
            let (m, d, p, b) = nodes.into_iter().fold((vec![], vec![], vec![], vec![]), |mut acc, x| {
                acc.0.push(x.0);
                acc.1.push(x.1);
                acc.2.push(x.2);
                acc.3.push(x.3);
                acc
            });
            PowerNetwork::with_ids(ids, g, m, d, p, b).unwrap()
        })
}

proptest! {
    #[test]
    fn network_files_round_trip(net in arb_network()) {
        prop_assert_eq!(parse_network(&network_to_toml(&net)).unwrap(), net);
    }
}

#[test]
fn save_and_load_round_trip() {
    let net = load_network(data("ring.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.toml");
    save_network(&net, &path).unwrap();
    assert_eq!(load_network(&path).unwrap(), net);
}

#[test]
fn report_csv_layout() {
    let net = load_network(data("ring.toml")).unwrap();
    let report = run_variance(&net, Method::Numeric).unwrap();
    let csv = reports_to_csv(std::slice::from_ref(&report));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("quantity,index_i,index_j,value,method,stderr"));
    // upper triangles of the two 5×5 blocks plus the full 5×5 cross block
    assert_eq!(lines.count(), 15 + 15 + 25);
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(&fields[..3], ["omega", "1", "1"]);
    assert_eq!(fields[3].parse::<f64>().unwrap(), report.q_omega()[(0, 0)]);
    assert_eq!(fields[4], "numeric");
    assert_eq!(fields[5], "");

    let json: Vec<ReportJson> = serde_json::from_str(&reports_to_json(&[report])).unwrap();
    assert_eq!(json[0].entries.len(), 55);
}

#[test]
fn seventeen_significant_digits() {
    for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
        let s = format_float(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    }
}

#[test]
fn closed_method_on_a_ring_names_the_assumption() {
    let net = load_network(data("ring.toml")).unwrap();
    let err = run_variance(&net, Method::ClosedForm).unwrap_err();
    assert!(err.is_assumption_violation());
    assert!(err.to_string().contains("closed forms defined only for complete/star"), "{err}");
}

#[test]
fn compare_on_a_complete_graph_file() {
    let net = load_network(data("complete20.toml")).unwrap();
    let (_, lin) = gridfluct::linearize_network(&net).unwrap();
    let cmp = compare(&lin, &EXACT_ROUTES, None).unwrap();
    assert_eq!(cmp.routes.len(), 2);
    assert!(cmp.routes.iter().all(|(_, o)| matches!(o, RouteOutcome::Ran { .. })));
    assert!(cmp.max_discrepancy() <= 1e-8, "{}", cmp.max_discrepancy());
}

#[test]
fn eta_sweep_methods_agree() {
    let spec = SweepSpec::load(data("fig2b_eta.toml")).unwrap();
    let r = run_sweep(&spec).unwrap();
    let closed = r.series(Method::ClosedForm, Quantity::Omega, 2, 2);
    let numeric = r.series(Method::Numeric, Quantity::Omega, 2, 2);
    assert_eq!(closed.len(), 9);
    for (a, b) in closed.iter().zip(&numeric) {
        assert!(((a - b) / b).abs() <= 1e-8);
    }
    // rows: point-major, then method in spec order
    assert_eq!(r.rows[0].method, Method::ClosedForm);
    assert_eq!(r.rows[1].method, Method::Numeric);
    assert!(r.rows.windows(2).all(|w| w[0].point <= w[1].point));
}

#[test]
fn star_quiet_line_decreases_with_size() {
    let spec = SweepSpec::load(data("fig6d_star_n.toml")).unwrap();
    let r = run_sweep(&spec).unwrap();
    for m in [Method::ClosedForm, Method::Numeric] {
        let s = r.series(m, Quantity::Delta, 2, 2);
        assert_eq!(s.len(), 8);
        assert!(s.windows(2).all(|w| w[1] < w[0]), "{m}: {s:?}");
    }
}

const SWEEP: &str = r#"
schema_version = 1
methods = ["numeric", "uniform"]
[base]
kind = "star"
n = 6
gamma = 2.0
eta = 0.5
d = 0.4
noise = { pattern = "uniform", strength = 0.1 }
[[axes]]
parameter = "gamma"
values = [1.0, 2.0]
[[axes]]
parameter = "b"
linspace = [0.1, 0.3, 3]
"#;

#[test]
fn sweep_spec_validation() {
    let spec = SweepSpec::parse(SWEEP).unwrap();
    let points = spec.points().unwrap();
    assert_eq!(points.len(), 6);
    assert_eq!(points[1], vec![1.0, 0.2]);
    let r = run_sweep(&spec).unwrap();
    // default selection: 6 frequency and 5 line variances per method
    assert_eq!(r.rows.len(), 6 * 2 * 11);

    let empty = SWEEP.replacen("methods = [\"numeric\", \"uniform\"]", "methods = []", 1);
    assert_eq!(field_of(SweepSpec::parse(&empty).unwrap_err()), "methods");
    let unknown = SWEEP.replacen("parameter = \"gamma\"", "parameter = \"alpha\"", 1);
    assert_eq!(field_of(SweepSpec::parse(&unknown).unwrap_err()), "axes[0].parameter");
    let no_grid = SWEEP.replacen("values = [1.0, 2.0]", "values = []", 1);
    assert_eq!(field_of(SweepSpec::parse(&no_grid).unwrap_err()), "axes[0]");
    let bad_method = SWEEP.replacen("\"uniform\"", "\"magic\"", 1);
    assert_eq!(field_of(SweepSpec::parse(&bad_method).unwrap_err()), "methods[1]");
    let missing = SWEEP.replacen("d = 0.4\n", "", 1);
    assert_eq!(field_of(SweepSpec::parse(&missing).unwrap_err()), "base.d");
}

#[test]
fn closed_sweep_rejects_uncovered_selection() {
    let spec = SWEEP.replacen("[\"numeric\", \"uniform\"]", "[\"closed\"]", 1)
        + "[[select]]\nquantity = \"omega\"\ni = 1\nj = 2\n";
    let err = run_sweep(&SweepSpec::parse(&spec).unwrap()).unwrap_err();
    assert_eq!(field_of(err), "select[0]");
}

#[test]
fn network_sweep_scales_parameters() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data("ring.toml"), dir.path().join("ring.toml")).unwrap();
    let path = dir.path().join("sweep.toml");
    std::fs::write(
        &path,
        "schema_version = 1\nmethods = [\"numeric\"]\n[base]\nkind = \"network\"\npath = \"ring.toml\"\n\
         [[axes]]\nparameter = \"noise_scale\"\nvalues = [1.0, 2.0]\n[[select]]\nquantity = \"omega\"\ni = 2\nj = 2\n",
    )
    .unwrap();
    let r = run_sweep(&SweepSpec::load(&path).unwrap()).unwrap();
    let s = r.series(Method::Numeric, Quantity::Omega, 2, 2);
    assert!((s[1] / s[0] - 4.0).abs() < 1e-12);
}

fn cli(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gridfluct"))
        .args(args)
        .env("GRIDFLUCT_THREADS", threads)
        .output()
        .unwrap()
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cli_success_and_machine_output() {
    let ring = data("ring.toml");
    let ring = ring.to_str().unwrap();
    let o = cli(&["solve", ring, "--format", "csv"], "1");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("record,from,to,value\nsync_frequency,,,"));
    let o = cli(&["variance", ring, "--method", "uniform", "--format", "json"], "1");
    assert_eq!(o.status.code(), Some(0));
    let parsed: Vec<ReportJson> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(parsed[0].method, Method::UniformRatio);
    let o = cli(&["compare", data("complete20.toml").to_str().unwrap(), "--format", "csv"], "1");
    assert_eq!(o.status.code(), Some(0));
    for row in stdout(&o).lines().skip(1) {
        let v: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(v <= 1e-8, "{row}");
    }
}

#[test]
fn cli_exit_codes_and_messages() {
    let ring = data("ring.toml");
    let ring = ring.to_str().unwrap();
    let o = cli(&["variance", ring, "--method", "closed"], "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("complete or star topology"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, TWO_NODES.replacen("damping = 0.5", "damping = 0.0", 1)).unwrap();
    let o = cli(&["solve", bad.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nodes[0].damping"));

    let o = cli(&["solve", dir.path().join("missing.toml").to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(2));

    let unwritable = dir.path().join("no/such/dir/out.csv");
    let o = cli(&["variance", ring, "--format", "csv", "--output", unwritable.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(1));

    // transfer beyond the line capacity has no synchronous state
    let infeasible = dir.path().join("infeasible.toml");
    std::fs::write(
        &infeasible,
        TWO_NODES.replacen("power = 0.3", "power = 2.0", 1).replacen("power = -0.3", "power = -2.0", 1),
    )
    .unwrap();
    let o = cli(&["solve", infeasible.to_str().unwrap()], "1");
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cli_output_is_byte_identical_across_runs_and_thread_counts() {
    let ring = data("ring.toml");
    let mc = data("mc.toml");
    let args = ["simulate", ring.to_str().unwrap(), "--mc-config", mc.to_str().unwrap(), "--format", "csv", "--seed", "5"];
    let a = cli(&args, "1");
    let b = cli(&args, "4");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = cli(&["simulate", ring.to_str().unwrap(), "--mc-config", mc.to_str().unwrap(), "--format", "csv", "--seed", "6"], "4");
    assert_ne!(a.stdout, c.stdout);
    // every entry carries a standard error
    assert!(stdout(&a).lines().skip(1).all(|l| !l.ends_with(',')));

    let spec = data("fig6d_star_n.toml");
    let s1 = cli(&["sweep", "--spec", spec.to_str().unwrap()], "1");
    let s2 = cli(&["sweep", "--spec", spec.to_str().unwrap()], "3");
    assert_eq!(s1.status.code(), Some(0));
    assert_eq!(s1.stdout, s2.stdout);
}

#[test]
fn mc_config_resolution() {
    let net = load_network(data("ring.toml")).unwrap();
    let (_, lin) = gridfluct::linearize_network(&net).unwrap();
    let file = McConfigFile::load(data("mc.toml")).unwrap();
    let cfg = file.resolve(&lin, None).unwrap();
    assert_eq!((cfg.trajectories, cfg.master_seed), (200, 7));
    assert_eq!(file.resolve(&lin, Some(9)).unwrap().master_seed, 9);
    assert!(McConfigFile::parse("schema_version = 1\ntrajectory = 3\n").is_err());
}
