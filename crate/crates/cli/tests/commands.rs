use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use symfield::{Artifact, Table};

fn symfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symfield"))
        .args(args)
        .env_remove("SYMFIELD_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = symfield(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

const ROTATION: &str = r#"{"type": "closed-form", "fields": [{"dimension": 2, "components": [
  [{"coef": -1.0, "atom": {"kind": "monomial", "exponents": [0, 1]}}],
  [{"coef": 1.0, "atom": {"kind": "monomial", "exponents": [1, 0]}}]
]}]}"#;

#[test]
fn gen_writes_header_and_spec_sidecar() {
    let d = Dir::new();
    ok(&["gen", "--name", "cubic", "--size", "20", "--seed", "3", "--out", &d.s("c.csv")]);
    let table = Table::read(&d.path("c.csv")).unwrap();
    assert_eq!(table.columns, ["x1", "x2", "target"]);
    assert_eq!(table.data.rows(), 20);
    let spec = json(&d.path("c.spec.json"));
    assert_eq!(spec["spec"]["name"], "cubic");
    assert_eq!(spec["spec"]["seed"], 3);

    ok(&["gen", "--name", "circle3d", "--size", "5", "--out", &d.s("o.csv"), "--spec-out", &d.s("o.json")]);
    assert_eq!(Table::read(&d.path("o.csv")).unwrap().columns, ["x1", "x2", "x3"]);
    assert!(d.path("o.json").exists());
}

#[test]
fn seed_precedence() {
    let d = Dir::new();
    let gen = |out: &str, seed: Option<&str>, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_symfield"));
        cmd.args(["gen", "--name", "cubic", "--size", "10", "--out", &d.s(out)]).env_remove("SYMFIELD_SEED");
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("SYMFIELD_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        std::fs::read(d.path(out)).unwrap()
    };
    let flag = gen("a.csv", Some("7"), Some("9"));
    assert_eq!(flag, gen("b.csv", Some("7"), None));
    assert_eq!(gen("c.csv", None, Some("9")), gen("d.csv", Some("9"), None));
    assert_eq!(gen("e.csv", None, None), gen("f.csv", Some("0"), None));
    assert_ne!(flag, gen("g.csv", Some("8"), None));
}

#[test]
fn exit_codes() {
    let d = Dir::new();
    let out = symfield(&["fit-fn", "--data", &d.s("missing.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(symfield(&["gen", "--name", "spiral", "--out", &d.s("s.csv")]).status.code(), Some(2));

    // dx/dt = x² from x = 1 blows up at t = 1.
    let field = r#"{"type": "closed-form", "fields": [{"dimension": 1, "components": [
      [{"coef": 1.0, "atom": {"kind": "monomial", "exponents": [2]}}]]}]}"#;
    std::fs::write(d.path("sq.json"), field).unwrap();
    let out = symfield(&["flow", "--fields", &d.s("sq.json"), "--x0", "1", "--time", "2", "--steps", "100"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fit_fn_recovers_the_gaussian_quadratic_and_reruns_identically() {
    let d = Dir::new();
    ok(&["gen", "--name", "gaussian-quadratic", "--size", "300", "--seed", "1", "--out", &d.s("g.csv")]);
    ok(&["fit-fn", "--data", &d.s("g.csv"), "--degree", "2", "--out", &d.s("f.json")]);
    ok(&["fit-fn", "--data", &d.s("g.csv"), "--degree", "2", "--out", &d.s("f2.json")]);
    assert_eq!(std::fs::read(d.path("f.json")).unwrap(), std::fs::read(d.path("f2.json")).unwrap());

    let f = Artifact::load(&d.path("f.json")).unwrap().scalar_functions().unwrap().remove(0);
    // (x − 1)² + 4(y − 1)² = 5 − 2x − 8y + x² + 4y².
    let expected = [5.0, -2.0, -8.0, 1.0, 0.0, 4.0];
    for (c, e) in f.coefficients().iter().zip(expected) {
        assert!((c - e).abs() < 1e-8, "{:?}", f.coefficients());
    }
}

#[test]
fn affine_then_quadratic_levelset_on_the_raised_circle() {
    let d = Dir::new();
    ok(&["gen", "--name", "circle3d", "--size", "400", "--seed", "2", "--out", &d.s("c.csv")]);
    ok(&[
        "fit-levelset",
        "--data",
        &d.s("c.csv"),
        "--affine-then-quadratic",
        "--elbow-out",
        &d.s("elbow.json"),
        "--out",
        &d.s("l.json"),
    ]);
    let v = json(&d.path("l.json"));
    assert_eq!(v["type"], "levelset");
    assert!(v["frame"].is_object());
    let Artifact::Levelset { model, frame: Some(frame), .. } = Artifact::load(&d.path("l.json")).unwrap() else {
        panic!("expected a framed level set");
    };
    assert_eq!(frame.reduced_dimension(), 2);
    let table = Table::read(&d.path("c.csv")).unwrap();
    for i in 0..table.data.rows() {
        let u = frame.reduce(table.data.row(i));
        for f in model.components() {
            assert!(f.value(&u).unwrap().abs() < 1e-3);
        }
    }
}

#[test]
fn sim_of_a_field_with_itself_is_one() {
    let d = Dir::new();
    std::fs::write(d.path("r.json"), ROTATION).unwrap();
    ok(&[
        "sim", "--truth", &d.s("r.json"), "--estimate", &d.s("r.json"), "--lower=-1,-1", "--upper", "1,1", "--out",
        &d.s("s.json"),
    ]);
    let v = json(&d.path("s.json"));
    assert!((v["aggregate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["method"], "analytic");

    ok(&["gen", "--name", "cubic", "--size", "50", "--out", &d.s("c.csv")]);
    ok(&[
        "sim", "--truth", &d.s("r.json"), "--estimate", &d.s("r.json"), "--domain-data", &d.s("c.csv"), "--columns",
        "x1,x2", "--method", "monte-carlo", "--samples", "2000", "--out", &d.s("m.json"),
    ]);
    assert!((json(&d.path("m.json"))["aggregate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn flow_satisfies_the_group_law() {
    let d = Dir::new();
    std::fs::write(d.path("r.json"), ROTATION).unwrap();
    let r = d.s("r.json");
    ok(&["flow", "--fields", &r, "--x0", "1,0", "--time", "1.5", "--steps", "300", "--out", &d.s("a.csv")]);
    let a = Table::read(&d.path("a.csv")).unwrap();
    assert_eq!(a.columns, ["t", "x1", "x2"]);
    let mid = a.data.row(150).to_vec();
    assert_eq!(mid[0], 0.75);
    let start = format!("{},{}", mid[1], mid[2]);
    ok(&["flow", "--fields", &r, "--x0", &start, "--time", "0.75", "--steps", "150", "--out", &d.s("b.csv")]);
    let b = Table::read(&d.path("b.csv")).unwrap();
    let (end_a, end_b) = (a.data.row(300), b.data.row(150));
    assert_eq!(end_a[0], 1.5);
    for k in 1..3 {
        assert!((end_a[k] - end_b[k]).abs() < 1e-12);
    }
    assert!((end_a[1] - 1.5f64.cos()).abs() < 1e-10 && (end_a[2] - 1.5f64.sin()).abs() < 1e-10);
}

#[test]
fn transform_to_radius_and_angle() {
    let d = Dir::new();
    std::fs::write(
        d.path("h.json"),
        r#"{"type": "scalar", "model": {"basis": {"dimension": 2, "atoms": [
          {"kind": "monomial", "exponents": [2, 0]}, {"kind": "monomial", "exponents": [0, 2]}]},
          "coefficients": [1.0, 1.0]}}"#,
    )
    .unwrap();
    std::fs::write(d.path("p.csv"), "x,y\n0,1\n-1,0\n0.6,-0.8\n").unwrap();
    ok(&["transform", "--data", &d.s("p.csv"), "--invariants", &d.s("h.json"), "--flow-param", "angle", "--out", &d.s("t.csv")]);
    let t = Table::read(&d.path("t.csv")).unwrap();
    assert_eq!(t.columns, ["h1", "theta"]);
    let pi = std::f64::consts::PI;
    let expected = [(1.0, pi / 2.0), (1.0, pi), (1.0, (-0.8f64).atan2(0.6))];
    for (i, (h, theta)) in expected.into_iter().enumerate() {
        assert!((t.data[(i, 0)] - h).abs() < 1e-15 && (t.data[(i, 1)] - theta).abs() < 1e-15);
    }

    ok(&["transform", "--data", &d.s("p.csv"), "--flow-param", "angle", "--out", &d.s("a.csv")]);
    assert_eq!(Table::read(&d.path("a.csv")).unwrap().columns, ["theta"]);
    assert_eq!(symfield(&["transform", "--data", &d.s("p.csv")]).status.code(), Some(2));
}

/// R² on held-out rows of a regression that predicts the mean target of each
/// of `bins` equal-width bins of `feature`.
fn binned_r2(feature: &[f64], target: &[f64], train: usize, bins: usize) -> f64 {
    let lo = feature.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = feature.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bin = |v: f64| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
    let mut sums = vec![(0.0, 0usize); bins];
    for i in 0..train {
        let b = &mut sums[bin(feature[i])];
        b.0 += target[i];
        b.1 += 1;
    }
    let overall = target[..train].iter().sum::<f64>() / train as f64;
    let test = train..target.len();
    let mean_test = target[test.clone()].iter().sum::<f64>() / test.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in test {
        let (s, n) = sums[bin(feature[i])];
        let pred = if n > 0 { s / n as f64 } else { overall };
        ss_res += (target[i] - pred).powi(2);
        ss_tot += (target[i] - mean_test).powi(2);
    }
    1.0 - ss_res / ss_tot
}

#[test]
fn angle_coordinate_makes_the_disc_pattern_one_dimensional() {
    let d = Dir::new();
    ok(&["gen", "--name", "disc-rot", "--size", "10000", "--seed", "5", "--out", &d.s("d.csv")]);
    // The pattern is periodic in atan(x/y), the polar angle measured from the
    // second axis, so the columns go in swapped.
    ok(&[
        "transform", "--data", &d.s("d.csv"), "--columns", "x2,x1", "--flow-param", "angle", "--keep-target", "--out",
        &d.s("t.csv"),
    ]);
    let raw = Table::read(&d.path("d.csv")).unwrap();
    let t = Table::read(&d.path("t.csv")).unwrap();
    assert_eq!(t.columns, ["theta", "target"]);
    let target = t.column("target").unwrap();
    assert_eq!(target, raw.column("target").unwrap());

    let train = 8000;
    let on_theta = binned_r2(&t.column("theta").unwrap(), &target, train, 200);
    let on_x = binned_r2(&raw.column("x1").unwrap(), &target, train, 200);
    let on_y = binned_r2(&raw.column("x2").unwrap(), &target, train, 200);
    assert!(on_theta >= 0.9, "{on_theta}");
    assert!(on_x <= 0.7 && on_y <= 0.7, "{on_x} {on_y}");
}

#[test]
fn discrete_density_rotation_on_the_disc_pattern() {
    let d = Dir::new();
    ok(&["gen", "--name", "disc-rot", "--size", "1000", "--seed", "0", "--out", &d.s("d.csv")]);
    ok(&[
        "fit-kde", "--data", &d.s("d.csv"), "--columns", "x1,x2", "--weight-column", "target", "--out", &d.s("k.json"),
    ]);
    ok(&[
        "discrete", "--model", &d.s("k.json"), "--data", &d.s("d.csv"), "--columns", "x1,x2", "--family",
        "density-rotation", "--reference-order", "7", "--out", &d.s("r.json"),
    ]);
    let v = json(&d.path("r.json"));
    assert_eq!(v["family"], "density-rotation");
    let theta = v["parameters"][0].as_f64().unwrap();
    assert!(theta > 0.0 && theta < std::f64::consts::TAU);
    let sim = v["generator_similarity"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&sim));
    assert!(!v["local_minima"].as_array().unwrap().is_empty());
}

#[test]
fn discrete_reflection_on_a_parabola() {
    let d = Dir::new();
    let mut csv = String::from("x,y\n");
    for i in 0..101 {
        let x = -2.0 + 0.04 * i as f64;
        csv.push_str(&format!("{x},{}\n", x * x));
    }
    std::fs::write(d.path("p.csv"), csv).unwrap();
    std::fs::write(
        d.path("f.json"),
        r#"{"type": "scalar", "model": {"basis": {"dimension": 2, "atoms": [
          {"kind": "monomial", "exponents": [0, 1]}, {"kind": "monomial", "exponents": [2, 0]}]},
          "coefficients": [1.0, -1.0]}}"#,
    )
    .unwrap();
    ok(&[
        "discrete", "--model", &d.s("f.json"), "--data", &d.s("p.csv"), "--family", "reflection", "--loss",
        "mean-squared", "--learning-rate", "0.1", "--epochs", "2000", "--out", &d.s("r.json"),
    ]);
    let v = json(&d.path("r.json"));
    let w: Vec<f64> = v["parameters"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let norm = w[0].hypot(w[1]);
    assert!((w[0].abs() / norm - 1.0).abs() < 1e-6, "{w:?}");
}
