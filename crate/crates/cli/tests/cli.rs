use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn isoheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoheat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SWEEP_HEADER: &str = "schema = 1\n\n[graph]\nh = 1.0\nextent = 1\nfamily = { kind = \"square\", spacing = \"spacing-is-h\" }\n\n";

#[test]
fn generate_square_reports_the_lattice_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = root().join("configs/square.toml");
    let run = isoheat(&["generate", "--config", path_str(&cfg), "--out-dir", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert!(stdout(&run).contains("121 vertices"));
    let report = read_json(&out.join("report.json"));
    let half = std::f64::consts::FRAC_1_SQRT_2;
    assert!((report["assumptions"]["c_p"].as_f64().unwrap() - half).abs() < 1e-12);
    assert!((report["assumptions"]["c_d"].as_f64().unwrap() - half).abs() < 1e-12);
    assert_eq!(report["validation"]["passes"], Value::Bool(true));

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["exit_code"], 0);
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs.iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["graph.json", "validation.csv", "report.json"]);
    for o in outputs {
        let bytes = fs::read(out.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }

    // The emitted graph passes its own check.
    let check = isoheat(&["check", path_str(&out.join("graph.json"))]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = root().join("configs/rhombic.toml");
    for name in ["a", "b"] {
        let run = isoheat(&["generate", "--config", path_str(&cfg), "--out-dir", path_str(&dir.path().join(name))]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
    }
    for file in ["graph.json", "validation.csv", "report.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn check_accepts_the_fixtures() {
    for name in ["square", "triangular", "rhombic"] {
        let run = isoheat(&["check", path_str(&root().join(format!("fixtures/{name}.json")))]);
        assert_eq!(code(&run), 0, "{name}: {}", stdout(&run));
        assert!(!stdout(&run).contains("FAIL"));
    }
    let tri = isoheat(&["check", path_str(&root().join("fixtures/triangular.json"))]);
    assert!(stdout(&tri).contains("omega in [0.577350269190, 0.577350269190]"), "{}", stdout(&tri));
}

#[test]
fn check_rejects_a_corrupted_graph() {
    let dir = tempfile::tempdir().unwrap();
    let mut graph = read_json(&root().join("fixtures/square.json"));
    // Move one vertex off the lattice.
    let positions = graph["vertices"].as_array_mut().expect("vertex array");
    let p = positions[60].as_array_mut().unwrap();
    p[0] = Value::from(p[0].as_f64().unwrap() + 0.05);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_vec(&graph).unwrap()).unwrap();
    let out = dir.path().join("out");
    let run = isoheat(&["check", path_str(&bad), "--out-dir", path_str(&out)]);
    assert_eq!(code(&run), 2, "{}{}", stdout(&run), stderr(&run));
    assert!(stdout(&run).contains("FAIL"));
    let report = read_json(&out.join("check.json"));
    assert_eq!(report["passed"], Value::Bool(false));
    assert_eq!(read_json(&out.join("manifest.json"))["exit_code"], 2);
}

#[test]
fn graph_demo_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = isoheat(&["sweep", "--config", path_str(&root().join("configs/graph.toml")), "--out-dir", path_str(&out)]);
    assert_eq!(code(&run), 2, "{}{}", stdout(&run), stderr(&run));
    assert!(stdout(&run).contains("verdict: Inconclusive"));
    let mut csv = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = csv.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "h_distance").expect("h_distance column");
    let mut rows = 0;
    for rec in csv.records() {
        let v: f64 = rec.unwrap()[col].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn euclidean_sweep_converges_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{SWEEP_HEADER}[sweep]\nregime = \"euclidean\"\nx = [0.0, 0.0]\ny = [1.0, 0.0]\nt = 1.0\nbeta = 0.5\nh = [0.2, 0.1, 0.05]\nthreshold = 1.5\n"
    );
    let cfg = write_config(dir.path(), "e.toml", &body);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let run = isoheat(&["--threads", "2", "sweep", "--config", path_str(&cfg), "--out-dir", path_str(&out)]);
        assert_eq!(code(&run), 0, "{}{}", stdout(&run), stderr(&run));
        assert!(stdout(&run).contains("verdict: Converging"));
        outputs.push(out);
    }
    for file in ["sweep.csv", "sweep.json", "plot.csv"] {
        assert_eq!(fs::read(outputs[0].join(file)).unwrap(), fs::read(outputs[1].join(file)).unwrap());
    }
    let result = read_json(&outputs[0].join("sweep.json"));
    let last = result["rows"].as_array().unwrap().last().unwrap();
    assert!(last["gap"].as_f64().unwrap().abs() < 1.5);
    let manifest = read_json(&outputs[0].join("manifest.json"));
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["tol"].as_f64(), Some(1e-6));
    assert_eq!(manifest["error_bounds"].as_object().unwrap().len(), 3);
}

#[test]
fn monte_carlo_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{SWEEP_HEADER}[sweep]\nregime = \"ldp\"\nx = [0.0, 0.0]\nt = 1.0\nbeta = 0.5\nh = [0.2, 0.1]\nthreshold = 2.0\nregion = {{ center = [1.0, 0.0], radius = 0.25 }}\nmonte_carlo = {{ samples = 2000, seed = 5 }}\n"
    );
    let cfg = write_config(dir.path(), "mc.toml", &body);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["sweep", "--config", path_str(&cfg), "--out-dir", path_str(&out)];
        args.extend_from_slice(extra);
        let r = isoheat(&args);
        assert_eq!(code(&r), 0, "{}{}", stdout(&r), stderr(&r));
        (fs::read(out.join("monte_carlo.csv")).unwrap(), read_json(&out.join("manifest.json")))
    };
    let (plain, m1) = run("plain", &[]);
    let (same, _) = run("same", &["--seed-override", "5"]);
    let (other, m2) = run("other", &["--seed-override", "6"]);
    assert_eq!(plain, same);
    assert_ne!(plain, other);
    assert_eq!(m1["seeds"], serde_json::json!([5]));
    assert_eq!(m2["seeds"], serde_json::json!([6]));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let critical = write_config(
        dir.path(),
        "critical.toml",
        &format!("{SWEEP_HEADER}[sweep]\nregime = \"graph\"\nx = [0.0, 0.0]\ny = [1.0, 0.0]\nt = 1.0\nbeta = 1.0\nh = [0.2]\nthreshold = 1.0\n"),
    );
    let run = isoheat(&["sweep", "--config", path_str(&critical), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("critical"), "{}", stderr(&run));

    let unknown = write_config(dir.path(), "unknown.toml", &format!("{SWEEP_HEADER}colour = 3\n"));
    let run = isoheat(&["generate", "--config", path_str(&unknown), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(code(&run), 1, "{}", stderr(&run));

    let missing = isoheat(&["generate", "--config", path_str(&dir.path().join("nope.toml"))]);
    assert_eq!(code(&missing), 1);
    assert_eq!(code(&isoheat(&["frobnicate"])), 1);
    assert_eq!(code(&isoheat(&["check"])), 1);
    assert_eq!(code(&isoheat(&["check", "x.json", "--tol", "-1"])), 1);
    assert_eq!(code(&isoheat(&["--help"])), 0);
}

#[test]
fn shipped_euclidean_demo_meets_its_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = isoheat(&["sweep", "--config", path_str(&root().join("configs/euclidean.toml")), "--out-dir", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}{}", stdout(&run), stderr(&run));
    let result = read_json(&out.join("sweep.json"));
    let threshold = result["threshold"].as_f64().unwrap();
    let last = result["rows"].as_array().unwrap().last().unwrap();
    assert!(last["gap"].as_f64().unwrap().abs() < threshold);
}
