use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kslab::io;
use kslab::linalg::Matrix;

const DESK: &str = "model.m1 = 4\nmodel.m2 = 4\nmodel.p1 = 8\nmodel.p2 = 8\n";

fn kslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, extra: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, format!("{DESK}{extra}")).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bound_grid_rows_and_one_over_n() {
    let f = Fixture::new();
    // (16,16,32,32) with t = 0.5, c1 = 0.05 gives a positive degrees term.
    let cfg = f.dir.path().join("b.toml");
    std::fs::write(
        &cfg,
        "model.m1 = 16\nmodel.m2 = 16\nmodel.p1 = 32\nmodel.p2 = 32\ncoeff.s = 3\npacking.c1 = 0.05\n",
    )
    .unwrap();
    let out = f.out("b");
    let o = kslab(&["bound", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (schema, header, rows) = io::read_table(&out.join("bounds.csv")).unwrap();
    assert_eq!(schema.as_deref(), Some("kslab-bounds/1"));
    assert_eq!(header, kslab::bounds::BOUND_HEADER);
    for name in ["thm1", "cor1", "thm2"] {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r[12] == name)
            .map(|r| r[13].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 3, "{name}");
        for w in vals.windows(2) {
            assert!((w[0] / w[1] - 10.0).abs() < 1e-9, "{name}: {vals:?}");
        }
    }
    let (_, t1_header, t1) = io::read_table(&out.join("table1.csv")).unwrap();
    assert!(t1_header.contains(&"sparse_unstructured".to_string()));
    assert!(t1_header.contains(&"sparse_kronecker".to_string()));
    assert_eq!(t1.len(), 3);
    let svg = std::fs::read_to_string(out.join("bounds.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn vacuous_bound_exits_zero_with_warning() {
    let f = Fixture::new();
    let cfg = f.config("v.toml", "");
    let out = f.out("v");
    let o = kslab(&["bound", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let (_, _, rows) = io::read_table(&out.join("bounds.csv")).unwrap();
    assert!(rows.iter().all(|r| r[14] == "true" && r[13] == "0"));
    let svg = std::fs::read_to_string(out.join("bounds.svg")).unwrap();
    assert!(svg.contains("vacuous"));
}

#[test]
fn pack_desk_config_passes_and_is_deterministic() {
    let f = Fixture::new();
    let cfg = f.config("p.toml", "");
    for run in ["p1", "p2"] {
        let o = kslab(&["pack", "--config", s(&cfg), "--out", s(&f.out(run))]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let report = std::fs::read_to_string(f.out("p1").join("pack_report.json")).unwrap();
    assert!(report.contains("\"sandwich_ok\": true"));
    for entry in std::fs::read_dir(f.out("p1").join("ensemble")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(f.out("p1").join("ensemble").join(&name)).unwrap();
        let b = std::fs::read(f.out("p2").join("ensemble").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
    let o = kslab(&[
        "pack",
        "--config",
        s(&cfg),
        "--out",
        s(&f.out("p3")),
        "--seed",
        "99",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(f.out("p1").join("ensemble/reference_a.csv")).unwrap();
    let c = std::fs::read(f.out("p3").join("ensemble/reference_a.csv")).unwrap();
    assert_ne!(a, c, "--seed must change the draw");
}

#[test]
fn pack_rejects_eps_above_cap() {
    let f = Fixture::new();
    let cfg = f.config("e.toml", "packing.eps_prime = 0.01\n");
    let o = kslab(&["pack", "--config", s(&cfg), "--out", s(&f.out("e"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("eps_prime <= min{r^2/2, r^4/(4p)}"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let f = Fixture::new();
    let cases = [
        ("packing.t = 2.0\n", "packing.t"),
        ("noise.colour = 1\n", "colour"),
        ("coeff.s = 0\n", "coeff.s"),
    ];
    for (extra, field) in cases {
        let cfg = f.config("bad.toml", extra);
        let o = kslab(&["pack", "--config", s(&cfg), "--out", s(&f.out("bad"))]);
        assert_eq!(o.status.code(), Some(2), "{extra}");
        assert!(stderr(&o).contains(field), "{extra}: {}", stderr(&o));
    }
    let missing = f.dir.path().join("missing.toml");
    let o = kslab(&["bound", "--config", s(&missing), "--out", s(&f.out("m"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = kslab(&["bound", "--out", s(&f.out("m"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_schema_noiseless_and_missing_ensemble() {
    let f = Fixture::new();
    let cfg = f.config("z.toml", "noise.sigma = 0.0\nexperiment.trials = 50\n");
    let out = f.out("z");
    let o = kslab(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("error_curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: kslab-error-curve/1"));
    assert_eq!(
        lines.next(),
        Some("N,trials,errors,error_rate,ci_low,ci_high,mean_mse,worst_mse,seed")
    );
    let (_, _, rows) = io::read_table(&out.join("error_curve.csv")).unwrap();
    assert!(rows.iter().all(|r| r[3] == "0"));

    let o = kslab(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--ensemble",
        s(&f.out("nowhere")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_from_packed_ensemble_reports_fano() {
    let f = Fixture::new();
    let cfg = f.config("s.toml", "experiment.trials = 200\n");
    let packed = f.out("packed");
    assert_eq!(
        kslab(&["pack", "--config", s(&cfg), "--out", s(&packed)])
            .status
            .code(),
        Some(0)
    );
    let ens = packed.join("ensemble");
    let out = f.out("sim");
    let o = kslab(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--ensemble",
        s(&ens),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("simulate_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["fano"]["violations"], 0);
    assert_eq!(report["mse"].as_array().unwrap().len(), 4);
    // The inline build from the same config is the same ensemble.
    let inline = f.out("inline");
    kslab(&["simulate", "--config", s(&cfg), "--out", s(&inline)]);
    assert_eq!(
        std::fs::read(out.join("error_curve.csv")).unwrap(),
        std::fs::read(inline.join("error_curve.csv")).unwrap()
    );
}

#[test]
fn rip_identity_duplicate_and_budget() {
    let f = Fixture::new();
    let eye = f.out("eye.csv");
    io::write_matrix(&eye, &Matrix::identity(6, 6)).unwrap();
    let out = f.out("r1");
    let o = kslab(&["rip", "--matrix", s(&eye), "--s", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rip.json")).unwrap()).unwrap();
    assert_eq!(rep["delta"], 0.0);
    assert_eq!(rep["pass"], true);

    let mut dup = Matrix::identity(4, 5);
    dup.set_column(4, &dup.column(1).into_owned());
    let dup_path = f.out("dup.csv");
    io::write_matrix(&dup_path, &dup).unwrap();
    let out = f.out("r2");
    let o = kslab(&[
        "rip",
        "--matrix",
        s(&dup_path),
        "--s",
        "2",
        "--threshold",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rip.json")).unwrap()).unwrap();
    assert_eq!(rep["witness"], serde_json::json!([2, 5]));
    assert_eq!(rep["pass"], false);

    let big = f.out("big.csv");
    io::write_matrix(&big, &Matrix::identity(64, 64)).unwrap();
    let o = kslab(&[
        "rip",
        "--matrix",
        s(&big),
        "--s",
        "10",
        "--out",
        s(&f.out("r3")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hint"));
}

#[test]
fn rip_matches_library_oracle() {
    use rand::SeedableRng;
    let f = Fixture::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let g = Matrix::from_fn(6, 8, |_, _| {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
    });
    let d = kslab::linalg::normalize_columns(&g).unwrap();
    let path = f.out("r.csv");
    io::write_matrix(&path, &d).unwrap();
    let out = f.out("r");
    kslab(&["rip", "--matrix", s(&path), "--s", "2", "--out", s(&out)]);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rip.json")).unwrap()).unwrap();
    let lib = kslab::bounds::rip_constant(&d, 2, kslab::bounds::RIP_BUDGET).unwrap();
    assert_eq!(rep["delta"].as_f64().unwrap(), lib.delta);
    assert_eq!(rep["witness"], serde_json::json!(lib.witness.as_slice()));
}
