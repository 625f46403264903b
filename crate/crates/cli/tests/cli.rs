use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowinpaint::io::{write_flo, write_image};
use flowinpaint::synthetic::{edge_scene, EdgeSceneSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flowinpaint"));
    c.env_remove("NXF_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    image: PathBuf,
    flow: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let scene = edge_scene(&EdgeSceneSpec { width: 40, height: 32, ..EdgeSceneSpec::default() });
        let image = root.join("img.png");
        let flow = root.join("gt.flo");
        write_image(&image, &scene.image).unwrap();
        write_flo(&flow, &scene.flow).unwrap();
        Self { _dir: dir, root, image, flow }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn inpaint(&self, out: &Path, extra: &[&str]) -> Output {
        let mut args = vec!["inpaint", "--image", s(&self.image), "--flow", s(&self.flow), "--out", s(out)];
        args.extend_from_slice(extra);
        run(&args)
    }
}

#[test]
fn full_density_reproduces_input() {
    let fx = Fixture::new();
    let out = fx.path("out.flo");
    let o = fx.inpaint(&out, &["--density", "1", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&fx.flow).unwrap());
}

#[test]
fn z_mode_without_zfile_is_a_usage_error() {
    let fx = Fixture::new();
    let o = fx.inpaint(&fx.path("out.flo"), &["--density", "0.1", "--seed", "1", "--mode", "z"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--zfile"));
}

#[test]
fn missing_mask_source_is_a_usage_error() {
    let fx = Fixture::new();
    assert_eq!(fx.inpaint(&fx.path("o.flo"), &[]).status.code(), Some(1));
    assert_eq!(fx.inpaint(&fx.path("o.flo"), &["--density", "0.1"]).status.code(), Some(1));
}

#[test]
fn corrupt_input_is_a_format_error() {
    let fx = Fixture::new();
    let bad = fx.path("bad.flo");
    std::fs::write(&bad, b"not a flow file").unwrap();
    let o = run(&["flowviz", "--flow", s(&bad), "--out", s(&fx.path("c.png"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inpaint_is_deterministic_across_thread_counts() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a.flo"), fx.path("b.flo"));
    let color = fx.path("a.png");
    let args = ["--density", "0.05", "--seed", "9", "--color", s(&color)];
    let o1 = fx.inpaint(&a, &[&args[..], &["--threads", "1"]].concat());
    let o2 = fx.inpaint(&b, &[&args[..], &["--threads", "4"]].concat());
    assert!(o1.status.success() && o2.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o3 = bin()
        .env("NXF_THREADS", "2")
        .args(["inpaint", "--image", s(&fx.image), "--flow", s(&fx.flow), "--out", s(&fx.path("c.flo"))])
        .args(["--density", "0.05", "--seed", "9", "--gt", s(&fx.flow)])
        .output()
        .unwrap();
    assert!(o3.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(fx.path("c.flo")).unwrap());
    assert!(String::from_utf8_lossy(&o3.stdout).starts_with("epe="));
}

#[test]
fn sweep_csv_is_deterministic() {
    let fx = Fixture::new();
    let sweep = |csv: &Path, threads: &str| {
        run(&[
            "eval", "--gt", s(&fx.flow), "--image", s(&fx.image), "--densities", "0.05,0.1",
            "--seeds", "1,2", "--levels", "3", "--csv", s(csv), "--threads", threads,
        ])
    };
    assert!(sweep(&fx.path("a.csv"), "1").status.success());
    assert!(sweep(&fx.path("b.csv"), "3").status.success());
    let a = std::fs::read_to_string(fx.path("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(fx.path("b.csv")).unwrap());
    let lines: Vec<_> = a.lines().collect();
    assert_eq!(lines[0], "density,seed,epe,fl,n_pixels,scope");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.05,1,"));
}

#[test]
fn direct_eval_of_ground_truth_is_zero() {
    let fx = Fixture::new();
    let o = run(&["eval", "--gt", s(&fx.flow), "--est", s(&fx.flow)]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "epe=0.000000 fl=0.000000 n_pixels=1280 scope=all");
    let o = run(&["eval", "--gt", s(&fx.flow), "--est", s(&fx.flow), "--scope", "unknown"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn genmask_and_mask_driven_inpaint() {
    let fx = Fixture::new();
    let mask = fx.path("m.png");
    let o = run(&["genmask", "--width", "40", "--height", "32", "--density", "0.1", "--seed", "4", "--out", s(&mask)]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "known=128 of 1280");
    let (a, b) = (fx.path("a.flo"), fx.path("b.flo"));
    assert!(fx.inpaint(&a, &["--mask", s(&mask)]).status.success());
    assert!(fx.inpaint(&b, &["--density", "0.1", "--seed", "4"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn selfcheck_reports_json_lines() {
    let o = run(&["selfcheck", "--instances", "3", "--size", "16"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 6);
    assert!(stdout.lines().all(|l| l.starts_with("{\"name\":") && l.contains("\"passed\":true")));

    let o = run(&["selfcheck", "--instances", "3", "--size", "16", "--tau", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"name\":\"stability_norm_growth\",\"passed\":false"));
}

#[test]
fn gridsearch_writes_full_table() {
    let fx = Fixture::new();
    let csv = fx.path("grid.csv");
    let o = run(&[
        "gridsearch", "--image", s(&fx.image), "--flow", s(&fx.flow), "--density", "0.1", "--seed", "1",
        "--lambda-steps", "2", "--alpha-steps", "2", "--levels", "2", "--csv", s(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("best lambda="));
}
