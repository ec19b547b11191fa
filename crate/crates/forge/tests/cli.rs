use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 5
[oracle]
noise_sigma = 0.1
[eval]
count = 32
[synth]
scenes = 6
[synth.scene]
width = 48
height = 36
fx_range = [300.0, 500.0]
depth_range = [0.5, 20.0]
"#;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge")).args(args).env_remove("DEPTHLM_API_KEY").output().expect("run forge")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes the config and a small synthetic dataset; returns (config, manifest).
fn fixture(dir: &Path, config: &str) -> (PathBuf, PathBuf) {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    let data = dir.join("data");
    let o = forge(&["--config", p(&cfg), "synth", "--out", p(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (cfg, data.join("manifest.jsonl"))
}

#[test]
fn config_and_manifest_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nonsense = true\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&forge(&["--config", p(&bad), "prepare", "--manifest", "x.jsonl", "--out", p(&out)])), 2);
    assert_eq!(code(&forge(&["prepare", "--manifest", p(&dir.path().join("missing.jsonl")), "--out", p(&out)])), 2);

    let manifest = dir.path().join("m.jsonl");
    fs::write(&manifest, "{\"schema_version\":\"1\",\"id\":\"a\",\"image_path\":\"a.png\",\"depth_path\":\"a.png\",\"dataset\":\"d\",\"split\":\"eval\"}\n").unwrap();
    let o = forge(&["prepare", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("m.jsonl:1") && err.contains("intrinsics"), "{err}");
}

#[test]
fn unreachable_endpoint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = fixture(dir.path(), SMALL);
    // Bind and drop a listener to get a port nobody serves.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = dir.path().join("endpoint.toml");
    fs::write(&cfg, format!("[eval]\ncount = 8\n[endpoint]\nbase_url = \"http://127.0.0.1:{port}/v1\"\nmax_retries = 0\n")).unwrap();
    let out = dir.path().join("eval");
    let o = forge(&["--config", p(&cfg), "eval", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("metrics.txt")).unwrap().starts_with("PARTIAL:"));
}

#[test]
fn prepare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = fixture(dir.path(), SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = forge(&["--config", p(&cfg), "--task", "speed", "prepare", "--manifest", p(&manifest), "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let sft = fs::read(a.join("sft.jsonl")).unwrap();
    assert_eq!(sft, fs::read(b.join("sft.jsonl")).unwrap());
    let mut images: Vec<_> = fs::read_dir(a.join("images")).unwrap().map(|e| e.unwrap().file_name()).collect();
    images.sort();
    assert!(!images.is_empty());
    for name in &images {
        assert_eq!(fs::read(a.join("images").join(name)).unwrap(), fs::read(b.join("images").join(name)).unwrap());
    }
    let first: Value = serde_json::from_str(std::str::from_utf8(&sft).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["task"], "speed");
    assert!(first["meta"]["given_time"].as_f64().is_some());

    // A different seed gives different samples.
    let out = dir.path().join("c");
    forge(&["--config", p(&cfg), "--seed", "6", "--task", "speed", "prepare", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_ne!(sft, fs::read(out.join("sft.jsonl")).unwrap());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = fixture(dir.path(), SMALL);
    let first = dir.path().join("first");
    let o = forge(&["--config", p(&cfg), "--seed", "41", "eval", "--manifest", p(&manifest), "--out", p(&first)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = first.join("resolved_config.toml");
    assert!(fs::read_to_string(&resolved).unwrap().contains("seed = 41"));
    let second = dir.path().join("second");
    assert_eq!(code(&forge(&["--config", p(&resolved), "eval", "--manifest", p(&manifest), "--out", p(&second)])), 0);
    assert_eq!(fs::read(first.join("samples.jsonl")).unwrap(), fs::read(second.join("samples.jsonl")).unwrap());
}

#[test]
fn pose_without_poses_is_a_manifest_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = fixture(dir.path(), SMALL);
    let o = forge(&["--config", p(&cfg), "--task", "pose", "prepare", "--manifest", p(&manifest), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pose"));
}

#[test]
fn render_draws_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = fixture(dir.path(), SMALL);
    let image = manifest.parent().unwrap().join("images").read_dir().unwrap().next().unwrap().unwrap().path();
    let out = dir.path().join("marked.png");
    let o = forge(&["render", "--image", p(&image), "--pixel", "20,15", "--style", "circle", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let before = image::open(&image).unwrap().to_rgb8();
    let after = image::open(&out).unwrap().to_rgb8();
    assert_eq!(before.dimensions(), after.dimensions());
    let changed = before.pixels().zip(after.pixels()).filter(|(a, b)| a != b).count();
    assert!(changed > 10, "{changed} pixels changed");
}

#[test]
fn reward_scores_a_group() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[prompt]\nvariant = \"marker_grpo\"\n[metrics.grpo]\ngroup_size = 2\n").unwrap();
    let rollouts = dir.path().join("r.jsonl");
    fs::write(
        &rollouts,
        "{\"sample_id\":\"s\",\"gt\":3.0,\"text\":\"<think>close</think> <answer>3.0</answer>\"}\n\
         {\"sample_id\":\"s\",\"gt\":3.0,\"text\":\"<think>far</think> <answer>4.0</answer>\"}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = forge(&["--config", p(&cfg), "reward", "--rollouts", p(&rollouts), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> = fs::read_to_string(out.join("rewards.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let adv: Vec<f64> = lines.iter().map(|l| l["advantage"].as_f64().unwrap()).collect();
    assert_eq!(adv, vec![1.0, -1.0]);
    assert_eq!(lines[1]["reward"].as_f64(), Some(-1.0));

    // Wrong group size names the sample.
    fs::write(&rollouts, "{\"sample_id\":\"lonely\",\"gt\":3.0,\"text\":\"<answer>3</answer>\"}\n").unwrap();
    let o = forge(&["--config", p(&cfg), "reward", "--rollouts", p(&rollouts), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lonely"));
}

#[test]
fn pointcloud_from_manifest_entry() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, manifest) = fixture(dir.path(), SMALL);
    let first: Value = serde_json::from_str(fs::read_to_string(&manifest).unwrap().lines().next().unwrap()).unwrap();
    let out = dir.path().join("cloud");
    let o = forge(&["--config", p(&cfg), "pointcloud", "--manifest", p(&manifest), "--id", first["id"].as_str().unwrap(), "--n", "200", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cloud = forge::ply::read_ply(&out.join("pointcloud.ply")).unwrap();
    assert!(cloud.len() > 100);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("pointcloud_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_u64(), Some(cloud.len() as u64));
}
