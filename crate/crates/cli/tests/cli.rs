use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const MINIMAL: &str = "seed = 5\njobs = [\"solve\"]\nproblem.n = 2\ngrid.cells = 64\n";

const LOWER_ORDER: &str = r#"
seed = 11
jobs = ["solve", "admissibility"]
problem.n = 8
perturbation.kind = "lower_order"
perturbation.q = 4
perturbation.alpha = 0.15
perturbation.sign = -1
grid.cells = 256
"#;

#[test]
fn minimal_run_writes_one_report_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let res = mrlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let json: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    assert_eq!(json, vec!["00-solve.json".to_string()]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("00-solve.json")).unwrap()).unwrap();
    assert_eq!(report["job"], "solve");
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], 5);
    let csv = fs::read_to_string(out.join("ratios.csv")).unwrap();
    assert!(csv.starts_with("job,label,ratio,pass"));
}

#[test]
fn inadmissible_triple_is_rejected_with_its_clause() {
    let tmp = TempDir::new().unwrap();
    // nu + 1 = 1 is not below r = 1
    let cfg = write_config(
        tmp.path(),
        "seed = 1\njobs = [\"solve\"]\nproblem.p = 4\nperturbation.kind = \"mixed\"\nperturbation.triple = \"1, 0, 1/2\"\n",
    );
    let out = tmp.path().join("out");
    let res = mrlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_ne!(res.status.code(), Some(0));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("inadmissible triple"), "{err}");
    assert!(err.contains("ν+1 < r"), "{err}");
    assert!(!out.join("00-solve.json").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\njobs = [\"solve\"]\nproblem.bogus = 3\n");
    let res = mrlab(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LOWER_ORDER);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(mrlab(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(mrlab(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"]).status.success());
    for name in ["00-solve.json", "01-admissibility.json", "ratios.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    // a different seed changes the data
    let c = tmp.path().join("c");
    assert!(mrlab(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]).status.success());
    assert_ne!(fs::read(a.join("00-solve.json")).unwrap(), fs::read(c.join("00-solve.json")).unwrap());
}

fn read_sweep(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn sweep_over_n_has_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let res = mrlab(&["sweep", &cfg, "--axis", "n", "--values", "2,4,8", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = read_sweep(&out.join("sweep-n.csv"));
    assert_eq!(&header[..3], &["n", "job", "pass"]);
    assert_eq!(rows.len(), 3);
    let ns: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ns, ["2", "4", "8"]);
}

#[test]
fn eps_sweep_pieces_grow_as_eps_shrinks() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LOWER_ORDER.replace("\"solve\", \"admissibility\"", "\"solve\"").as_str());
    let out = tmp.path().join("out");
    let res = mrlab(&["sweep", &cfg, "--axis", "eps", "--values", "0.2,0.1,0.05,0.025", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = read_sweep(&out.join("sweep-eps.csv"));
    let col = header.iter().position(|h| h == "pieces").expect("pieces column");
    let pieces: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
    assert_eq!(pieces.len(), 4);
    assert!(pieces.windows(2).all(|w| w[1] > w[0]), "{pieces:?}");
}

#[test]
fn sweep_rejects_unknown_axis() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let res = mrlab(&["sweep", &cfg, "--axis", "colour", "--values", "1", "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
