mod common;

use std::path::Path;

use coopvision::harness::{trace_at, GoldenTrace};
use coopvision::pipeline::{run_scenario, PipelineConfig, PipelineState, Scheme, SchemeConfig};
use coopvision::scene::Scene;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scheme(s: Scheme, cfg: &PipelineConfig) -> SchemeConfig {
    SchemeConfig::new(s, cfg.block_size, &cfg.bank)
}

#[test]
fn without_overlap_sharing_changes_nothing() {
    let scene = Scene::from_file(fixture("empty_overlap.toml")).unwrap();
    let cfg = PipelineConfig::default();
    let a = run_scenario(&scene, &scheme(Scheme::Cevas, &cfg), &cfg, 7).unwrap();
    let b = run_scenario(&scene, &scheme(Scheme::NoShare, &cfg), &cfg, 7).unwrap();
    assert_eq!(a.traces, b.traces);
}

#[test]
fn same_seed_same_run() {
    let scene = Scene::from_file(fixture("crossing.toml")).unwrap();
    let cfg = PipelineConfig::default();
    let mut sc = scheme(Scheme::Cevas, &cfg);
    sc.frame_interval = 5;
    let a = run_scenario(&scene, &sc, &cfg, 3).unwrap();
    let b = run_scenario(&scene, &sc, &cfg, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.metrics).unwrap(),
        serde_json::to_string(&b.metrics).unwrap()
    );
    let c = run_scenario(&scene, &sc, &cfg, 4).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn empty_scene_offloads_nothing_unless_forced() {
    let text = std::fs::read_to_string(fixture("crossing.toml")).unwrap();
    let head = text.split("[[vehicles]]").next().unwrap().replace("horizon_ticks = 300", "horizon_ticks = 12");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, head).unwrap();
    let scene = Scene::from_file(&path).unwrap();
    let cfg = PipelineConfig::default();
    let cevas = run_scenario(&scene, &scheme(Scheme::Cevas, &cfg), &cfg, 1).unwrap();
    assert_eq!(cevas.metrics.mean_data_size_ratio, 0.0);
    let full = run_scenario(&scene, &scheme(Scheme::FullOffload, &cfg), &cfg, 1).unwrap();
    assert_eq!(full.metrics.mean_data_size_ratio, 1.0);
}

#[test]
fn full_offload_sends_every_frame_whole() {
    let scene = Scene::from_file(fixture("stopped.toml")).unwrap();
    let cfg = PipelineConfig::default();
    let run = run_scenario(&scene, &scheme(Scheme::FullOffload, &cfg), &cfg, 1).unwrap();
    assert!(run.traces.iter().flat_map(|t| &t.cameras).all(|c| c.data_size_ratio == 1.0));
}

#[test]
fn accurate_tier_bounds_on_bundled_scenarios() {
    for name in ["crossing.toml", "empty_overlap.toml", "stopped.toml"] {
        let scene = Scene::from_file(fixture(name)).unwrap();
        let cfg = PipelineConfig::default();
        let seed = scene.config.seed;
        let cevas = run_scenario(&scene, &scheme(Scheme::Cevas, &cfg), &cfg, seed).unwrap();
        let fixed = run_scenario(&scene, &scheme(Scheme::NoSelect, &cfg), &cfg, seed).unwrap();
        let full = run_scenario(&scene, &scheme(Scheme::FullOffload, &cfg), &cfg, seed).unwrap();
        assert!(fixed.metrics.mean_iou >= cevas.metrics.mean_iou, "{name}");
        assert!(fixed.metrics.mean_latency >= cevas.metrics.mean_latency, "{name}");
        // Same tier, so filtering can only shrink the per-frame latency.
        for (f, o) in fixed.traces.iter().zip(&full.traces) {
            for (a, b) in f.cameras.iter().zip(&o.cameras) {
                assert!(a.latency.total <= b.latency.total, "{name} tick {} camera {}", f.tick, a.camera_id);
            }
        }
    }
}

#[test]
fn leaving_shared_boxes_out_of_history_still_runs() {
    let scene = Scene::from_file(fixture("crossing.toml")).unwrap();
    let cfg = PipelineConfig {
        shared_in_history: false,
        ..PipelineConfig::default()
    };
    let mut sc = scheme(Scheme::Cevas, &cfg);
    sc.frame_interval = 2;
    let run = run_scenario(&scene, &sc, &cfg, 7).unwrap();
    assert!(run.metrics.mean_iou > 0.5);
}

#[test]
fn too_many_cameras_requested_is_an_error() {
    let scene = Scene::from_file(fixture("crossing.toml")).unwrap();
    let cfg = PipelineConfig {
        camera_count: Some(5),
        ..PipelineConfig::default()
    };
    assert!(PipelineState::new(&scene, &cfg).is_err());
}

/// Recomputes each camera's filter decision in a frozen trace with the
/// literal policy, using the previous tick's merged results as history.
fn check_golden_against_oracle(file: &str) {
    let golden: GoldenTrace = serde_json::from_str(&std::fs::read_to_string(fixture(file)).unwrap()).unwrap();
    let scene = Scene::from_file(fixture("crossing.toml")).unwrap();
    let state = PipelineState::new(&scene, &golden.pipeline).unwrap();
    let prev = (golden.tick > 0).then(|| trace_at(&scene, &golden.scheme, &golden.pipeline, golden.seed, golden.tick - 1).unwrap());
    for (cam_trace, map) in golden.trace.cameras.iter().zip(state.region_maps()) {
        let cam = scene.camera(cam_trace.camera_id).unwrap();
        let flow = match &prev {
            Some(p) => scene.flow_field(cam, p.tick, golden.tick).unwrap(),
            None => coopvision::scene::FlowField::zeros(cam.id, 0, cam.width, cam.height),
        };
        let history = prev
            .as_ref()
            .map(|p| p.cameras.iter().find(|c| c.camera_id == cam.id).unwrap().detection.plain_boxes())
            .unwrap_or_default();
        let case = common::FilterCase {
            width: cam.width,
            height: cam.height,
            block_size: golden.pipeline.block_size,
            labels: map.labels().to_vec(),
            flow: flow.vectors.clone(),
            prev: history,
            t_new: golden.scheme.thresholds.t_new,
            t_dis: golden.scheme.thresholds.t_dis,
        };
        let want = common::literal_filter(&case);
        assert_eq!(cam_trace.filter.offload_blocks, want.offload, "{file} camera {}", cam.id);
        assert_eq!(cam_trace.filter.reused_results.len(), want.reused.len());
        assert_eq!(cam_trace.filter.offload_driving.len(), want.driving.len());
    }
}

#[test]
fn golden_traces_follow_the_literal_policy() {
    check_golden_against_oracle("golden_crossing_t5.json");
    check_golden_against_oracle("golden_crossing_t40.json");
}
