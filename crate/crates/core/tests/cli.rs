use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector3;
use stackpick::fixtures;
use stackpick::physics::{SimConfig, World};
use stackpick::planners::ActionPlan;
use stackpick::reconstruct::ObservationSet;
use stackpick::scene::{RigidBox, Scene, Shelf};
use tempfile::TempDir;

fn stackpick(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackpick")).args(args).env_remove("STACKPICK_CONFIG").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two boards leaning on each other: pulling either drops the other.
fn a_frame(dir: &Path) -> PathBuf {
    let t = 20f64.to_radians();
    let (hx, hy) = (0.03, 0.2);
    let ex = hx * t.cos() + hy * t.sin();
    let ey = hx * t.sin() + hy * t.cos();
    let half = Vector3::new(hx, hy, 0.1);
    let boards = vec![
        RigidBox::new("l", half, Vector3::new(0.5 - ex + 0.0005, ey + 0.001, 0.1), -t),
        RigidBox::new("r", half, Vector3::new(0.5 + ex - 0.0005, ey + 0.001, 0.1), t),
    ];
    let mut w = World::new(&Scene::new(Shelf::default(), boards), SimConfig::default()).unwrap();
    w.settle(1.5).unwrap();
    let rest = w.resting_scene(fixtures::MAX_TILT).unwrap();
    let path = dir.join("a-frame.obs.json");
    std::fs::write(&path, ObservationSet::from_scene(&rest).to_json()).unwrap();
    path
}

#[test]
fn gen_reproduces_the_shipped_fixtures() {
    let dir = TempDir::new().unwrap();
    for name in fixtures::NAMES {
        let out = stackpick(&["gen", "--fixture", name, "--out", s(dir.path())]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for ext in ["scene.json", "obs.json"] {
            let file = format!("{name}.{ext}");
            let fresh = std::fs::read_to_string(dir.path().join(&file)).unwrap();
            assert_eq!(fresh, std::fs::read_to_string(shipped(&file)).unwrap(), "{file} is stale");
        }
    }
}

#[test]
fn demo_plans_and_validates() {
    let dir = TempDir::new().unwrap();
    let obs = shipped("structured-demo.obs.json");
    let scene = shipped("structured-demo.scene.json");
    for (approach, len) in [("physics", 2), ("heuristic", 4)] {
        let plan = dir.path().join(format!("{approach}.json"));
        let out = stackpick(&[
            "plan",
            "--obs",
            s(&obs),
            "--task",
            "extract",
            "--target",
            "r0c0",
            "--approach",
            approach,
            "--out",
            s(&plan),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let parsed = ActionPlan::from_json(&std::fs::read_to_string(&plan).unwrap()).unwrap();
        assert_eq!(parsed.len(), len);
        let out = stackpick(&["validate", "--scene", s(&scene), "--plan", s(&plan)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(code(&stackpick(&["check", s(&plan)])), 0);
    }
}

#[test]
fn failed_validation_exits_one() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.json");
    let out = stackpick(&[
        "plan",
        "--obs",
        s(&shipped("counterexample.obs.json")),
        "--task",
        "extract",
        "--target",
        "tower",
        "--approach",
        "heuristic",
        "--out",
        s(&plan),
    ]);
    assert_eq!(code(&out), 0);
    let report = dir.path().join("report.json");
    let out = stackpick(&[
        "validate",
        "--scene",
        s(&shipped("counterexample.scene.json")),
        "--plan",
        s(&plan),
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&out), 1);
    assert!(std::fs::read_to_string(&report).unwrap().contains("\"success\": false"));
    assert_eq!(code(&stackpick(&["check", s(&report)])), 0);
}

#[test]
fn bad_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let obs = shipped("chain.obs.json");
    assert_eq!(code(&stackpick(&["plan", "--obs", s(&obs), "--task", "extract"])), 2);
    assert_eq!(code(&stackpick(&["plan", "--obs", s(&obs), "--task", "clear", "--target", "T"])), 2);
    assert_eq!(code(&stackpick(&["plan", "--obs", s(&obs), "--task", "extract", "--target", "nope"])), 2);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"boxes\": 3}").unwrap();
    assert_eq!(code(&stackpick(&["plan", "--obs", s(&junk), "--task", "clear"])), 2);
    assert_eq!(code(&stackpick(&["check", s(&junk)])), 2);
    assert_eq!(code(&stackpick(&["bench", "--boxes", "5..2"])), 2);
}

#[test]
fn planning_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let obs = a_frame(dir.path());
    let out = stackpick(&["plan", "--obs", s(&obs), "--task", "extract", "--target", "l", "--samples", "4"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let partial = dir.path().join("partial.json");
    let out = stackpick(&["plan", "--obs", s(&obs), "--task", "clear", "--samples", "4", "--out", s(&partial)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = ActionPlan::from_json(&std::fs::read_to_string(&partial).unwrap()).unwrap();
    assert!(plan.is_empty());
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| -> Vec<Vec<u8>> {
        let p = |f: &str| dir.path().join(format!("{tag}-{f}"));
        let gen_dir = dir.path().join(format!("{tag}-gen"));
        std::fs::create_dir(&gen_dir).unwrap();
        let mut outs = vec![
            stackpick(&["gen", "--kind", "structured", "--scenes", "2", "--seed", "4", "--out", s(&gen_dir)]),
            stackpick(&[
                "plan",
                "--obs",
                s(&shipped("structured-demo.obs.json")),
                "--task",
                "clear",
                "--samples",
                "3",
                "--out",
                s(&p("plan.json")),
            ]),
            stackpick(&[
                "bench",
                "--kind",
                "structured",
                "--scenes",
                "2",
                "--boxes",
                "2..3",
                "--samples",
                "3",
                "--csv",
                s(&p("bench.csv")),
                "--json",
                s(&p("bench.json")),
            ]),
            stackpick(&[
                "simulate",
                "--scene",
                s(&shipped("chain.scene.json")),
                "--remove",
                "A",
                "--trajectory",
                s(&p("traj.jsonl")),
                "--out",
                s(&p("outcome.json")),
            ]),
        ];
        for o in outs.drain(..) {
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&gen_dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.extend(["plan.json", "bench.csv", "bench.json", "traj.jsonl", "outcome.json"].map(p));
        files.iter().map(|f| std::fs::read(f).unwrap()).collect()
    };
    let first = run("a");
    assert_eq!(first.len(), 9);
    assert_eq!(first, run("b"));
}

#[test]
fn render_writes_strided_frames() {
    let dir = TempDir::new().unwrap();
    let traj = dir.path().join("traj.jsonl");
    let out =
        stackpick(&["simulate", "--scene", s(&shipped("chain.scene.json")), "--remove", "T", "--trajectory", s(&traj)]);
    assert_eq!(code(&out), 0);
    let frames = std::fs::read_to_string(&traj).unwrap().lines().count() - 1;
    let svg_dir = dir.path().join("svg");
    let out = stackpick(&["render", "--trajectory", s(&traj), "--out", s(&svg_dir), "--frame-stride", "240"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> =
        std::fs::read_dir(&svg_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    // Every 240th frame from the first, plus the final one.
    let last = frames - 1;
    let expected = last / 240 + 1 + usize::from(!last.is_multiple_of(240));
    assert_eq!(names.len(), expected, "{frames} frames gave {names:?}");
    for (i, name) in names.iter().enumerate() {
        assert_eq!(name, &format!("frame_{i:05}.svg"));
    }
    let svg = std::fs::read_to_string(svg_dir.join(names.last().unwrap())).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("data-id=\"B\""));
    assert_eq!(code(&stackpick(&["check", s(&traj)])), 0);
}
