//! Runs every scheme on the bundled crossing scenario and prints the three
//! headline metrics side by side.

use coopvision::pipeline::{run_scenario, PipelineConfig, Scheme, SchemeConfig};
use coopvision::scene::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crossing.toml").to_string());
    let interval: u64 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let scene = Scene::from_file(&path)?;
    for w in scene.lint() {
        eprintln!("lint: {w}");
    }
    let config = PipelineConfig::default();
    println!(
        "{:<12} {:>8} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "scheme", "iou", "size", "latency", "prec", "recall", "dedup"
    );
    for scheme in Scheme::ALL {
        let mut sc = SchemeConfig::new(scheme, config.block_size, &config.bank);
        sc.frame_interval = interval;
        let run = run_scenario(&scene, &sc, &config, scene.config.seed)?;
        let m = &run.metrics;
        println!(
            "{:<12} {:>8.4} {:>10.4} {:>10.4} {:>8.3} {:>8.3} {:>4}/{:<4} {:?}",
            scheme.name(),
            m.mean_iou,
            m.mean_data_size_ratio,
            m.mean_latency,
            m.sharing.precision(),
            m.sharing.recall(),
            m.sharing.count_mismatch_ticks,
            m.sharing.checked_ticks,
            m.tier_usage,
        );
    }
    Ok(())
}
