//! Follows the sharing list through a stretch of the crossing scenario:
//! which detections matched an existing object, which created one, and what
//! each camera received back.

use coopvision::detector::SyntheticDetector;
use coopvision::detector::BoxSource;
use coopvision::pipeline::{run_tick, PipelineConfig, PipelineState, Scheme, SchemeConfig};
use coopvision::scene::Scene;
use coopvision::sharing::MatchOutcome;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let from: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(30);
    let to: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(36);
    let scene = Scene::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crossing.toml"))?;
    let config = PipelineConfig::default();
    let scheme = SchemeConfig::new(Scheme::Cevas, config.block_size, &config.bank);
    let mut state = PipelineState::new(&scene, &config)?;
    for tick in 0..=to {
        let trace = run_tick(&mut state, &scene, &scheme, &config, &SyntheticDetector, tick, scene.config.seed)?;
        if tick < from {
            continue;
        }
        println!(
            "tick {tick}: {} live objects in the overlap, {} vehicles there",
            trace.sharing_live_in_overlap, trace.truth_in_overlap
        );
        for ev in &trace.match_events {
            let what = match &ev.outcome {
                MatchOutcome::Matched { sharing_id, distance, .. } => {
                    format!("matched object {sharing_id} at distance {distance:.4}")
                }
                MatchOutcome::Inserted { sharing_id, nearest } => match nearest {
                    Some(d) => format!("new object {sharing_id}, nearest existing at {d:.3}"),
                    None => format!("new object {sharing_id}, list was empty"),
                },
            };
            println!("  camera {} vehicle {:?}: {what}", ev.camera_id, ev.object_id);
        }
        for c in &trace.cameras {
            let shared = c.detection.boxes.iter().filter(|b| b.source == BoxSource::Shared).count();
            if shared > 0 {
                println!("  camera {} used {shared} shared boxes", c.camera_id);
            }
        }
    }
    Ok(())
}
