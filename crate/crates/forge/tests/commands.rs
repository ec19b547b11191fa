use std::fs;
use std::path::{Path, PathBuf};

use forge::client::EndpointConfig;
use forge::commands::{self, CloudSource, Responder};
use forge::config::PipelineConfig;
use forge::data::{load_manifest, SynthDataset};
use forge::ForgeError;
use forge_core::markers::MarkerStyle;
use forge_core::metrics::ParseStatus;
use forge_core::oracle::OracleConfig;
use forge_core::synth::SynthConfig;
use forge_core::Pixel;

fn small(seed: u64, scenes: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig { seed, ..Default::default() };
    let scene = SynthConfig { width: 48, height: 36, fx_range: (300.0, 500.0), depth_range: (0.5, 20.0), ..Default::default() };
    cfg.synth = SynthDataset { scenes, scene, ..Default::default() };
    cfg
}

fn dataset(cfg: &PipelineConfig, dir: &Path) -> PathBuf {
    commands::synth(cfg, &dir.join("data")).unwrap()
}

#[test]
fn prepare_one_record_per_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(1, 10);
    let manifest = dataset(&cfg, dir.path());
    let s = commands::prepare(&cfg, &manifest, &dir.path().join("sft")).unwrap();
    assert_eq!(fs::read_to_string(&s.sft).unwrap().lines().count(), 10);
}

#[test]
fn refusals_show_up_as_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(2, 64);
    let manifest = dataset(&cfg, dir.path());
    cfg.oracle = Some(OracleConfig { noise_sigma: 0.0, refusal_rate: 0.5, seed: cfg.seed });
    let s = commands::evaluate(&cfg, &manifest, &dir.path().join("eval"), &Responder::from_config(&cfg).unwrap()).unwrap();
    let n = s.report.records.len();
    assert_eq!(n, 8192);
    let failed = s.report.records.iter().filter(|r| r.status == ParseStatus::NoNumber).count();
    let rate = failed as f64 / n as f64;
    assert!((rate - 0.5).abs() <= 0.02, "failure rate {rate}");
    assert_eq!(s.report.average_failure_rate, rate);
}

#[test]
fn baseline_scores_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(3, 8);
    cfg.eval.count = 64;
    let manifest = dataset(&cfg, dir.path());
    let s = commands::baseline(&cfg, &manifest, &dir.path().join("b"), 2.0).unwrap();
    for r in &s.report.records {
        assert_eq!(r.pred, Some(2.0));
    }
    let inliers = s.report.records.iter().filter(|r| (2.0 / r.gt).max(r.gt / 2.0) < 1.25).count();
    assert_eq!(s.report.average_delta1, inliers as f64 / s.report.records.len() as f64);
}

#[test]
fn single_point_cloud_and_no_ply_on_transport_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(4, 1);
    let manifest = dataset(&cfg, dir.path());
    let id = load_manifest(&manifest).unwrap().entries[0].id.clone();
    let source = CloudSource::Entry { manifest, id };

    cfg.oracle = Some(OracleConfig::default());
    let one = commands::pointcloud(&cfg, &source, 1, &dir.path().join("one"), &Responder::from_config(&cfg).unwrap()).unwrap();
    assert_eq!(forge::ply::read_ply(&one.ply).unwrap().len(), 1);

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    cfg.oracle = None;
    cfg.endpoint = Some(EndpointConfig { base_url: format!("http://127.0.0.1:{port}/v1"), max_retries: 0, ..Default::default() });
    let out = dir.path().join("down");
    let err = commands::pointcloud(&cfg, &source, 16, &out, &Responder::from_config(&cfg).unwrap()).unwrap_err();
    assert!(matches!(err, ForgeError::Transport { .. }), "{err:?}");
    assert!(!out.join("pointcloud.ply").exists());
}

#[test]
fn render_styles_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(5, 1);
    let manifest = dataset(&cfg, dir.path());
    let m = load_manifest(&manifest).unwrap();
    let image = m.resolve(&m.entries[0].image_path);
    let center = [Pixel::new(24.0, 18.0)];
    let mut outputs = Vec::new();
    for style in MarkerStyle::ALL {
        let out = dir.path().join(format!("{}.png", style.name()));
        commands::render(&cfg, &image, &center, Some(style), &out).unwrap();
        outputs.push(fs::read(&out).unwrap());
    }
    assert!(outputs[0] != outputs[1] && outputs[1] != outputs[2] && outputs[0] != outputs[2]);

    let err = commands::render(&cfg, &image, &[Pixel::new(48.0, 5.0)], None, &dir.path().join("oob.png")).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    // Two labelled markers: each label region changes.
    let out = dir.path().join("ab.png");
    commands::render(&cfg, &image, &[Pixel::new(10.0, 10.0), Pixel::new(38.0, 26.0)], None, &out).unwrap();
    let before = image::open(&image).unwrap().to_rgb8();
    let after = image::open(&out).unwrap().to_rgb8();
    let left = before.enumerate_pixels().filter(|(x, y, p)| *x < 24 && after.get_pixel(*x, *y) != *p).count();
    let right = before.enumerate_pixels().filter(|(x, y, p)| *x >= 24 && after.get_pixel(*x, *y) != *p).count();
    assert!(left > 0 && right > 0, "left {left}, right {right}");
}
