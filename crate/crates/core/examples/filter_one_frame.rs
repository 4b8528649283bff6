//! Runs the camera-side filter on one frame and shows which blocks leave the
//! camera.
//!
//! ```text
//! cargo run --example filter_one_frame -- [camera] [tick]
//! ```
//!
//! The previous boxes are the ground truth of the previous tick, so this
//! shows the filter in isolation from detector noise.

use coopvision::filter::{filter_frame, FilterThresholds, PayloadModel};
use coopvision::pipeline::{PipelineConfig, PipelineState};
use coopvision::scene::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let camera: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let tick: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(60);
    let scene = Scene::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crossing.toml"))?;
    let config = PipelineConfig::default();
    let state = PipelineState::new(&scene, &config)?;
    let map = state
        .region_maps()
        .find(|m| m.camera_id == camera)
        .ok_or("no such camera")?;
    let cam = scene.camera(camera).ok_or("no such camera")?;

    let prev = scene.render(cam, tick.saturating_sub(1))?.truth_boxes();
    let frame = scene.render(cam, tick)?;
    let flow = scene.flow_field(cam, tick.saturating_sub(1), tick)?;
    let th = FilterThresholds::for_block_size(config.block_size);
    let out = filter_frame(&frame, &flow, &prev, map, &th, &PayloadModel::default())?;

    println!("camera {camera}, tick {tick}: {} previous boxes", prev.len());
    for row in 0..map.grid.rows as usize {
        let line: String = (0..map.grid.cols as usize)
            .map(|col| {
                let k = row * map.grid.cols as usize + col;
                if out.offload_blocks.contains(&k) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("  {line}");
    }
    let full = PayloadModel::default().full_frame_bytes(&map.grid);
    println!(
        "offloaded {} of {} blocks ({:.1}% of the frame), reused {}, re-detected {}, dropped {}",
        out.offload_blocks.len(),
        map.grid.block_count(),
        100.0 * out.filtered_payload_bytes as f64 / full as f64,
        out.reused_results.len(),
        out.offload_driving.len(),
        out.dropped.len()
    );
    Ok(())
}
