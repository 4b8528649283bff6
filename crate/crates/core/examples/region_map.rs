//! Prints each camera's block partition as a character map.
//!
//! `O` overlapping, `I` incoming, `L` leaving, `.` background.

use coopvision::pipeline::{PipelineConfig, PipelineState};
use coopvision::region::RegionLabel;
use coopvision::scene::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crossing.toml").to_string());
    let block_size: u32 = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(32);
    let scene = Scene::from_file(&path)?;
    let config = PipelineConfig {
        block_size,
        ..PipelineConfig::default()
    };
    let state = PipelineState::new(&scene, &config)?;
    for map in state.region_maps() {
        println!("camera {} ({}x{} blocks)", map.camera_id, map.grid.cols, map.grid.rows);
        for row in map.labels().chunks(map.grid.cols as usize) {
            let line: String = row
                .iter()
                .map(|l| match l {
                    RegionLabel::Overlapping => 'O',
                    RegionLabel::Incoming => 'I',
                    RegionLabel::Leaving => 'L',
                    RegionLabel::Background => '.',
                })
                .collect();
            println!("  {line}");
        }
    }
    Ok(())
}
