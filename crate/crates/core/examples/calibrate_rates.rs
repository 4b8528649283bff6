//! Fits the link and detector constants so the EARO-like scheme reproduces
//! a measured latency-per-rate row, then compares CEVAS under the same
//! constants.

use coopvision::harness::{calibrate, CalibrationTarget};
use coopvision::pipeline::{run_scenario, PipelineConfig, Scheme, SchemeConfig};
use coopvision::scene::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let scene = Scene::from_file(format!("{dir}/crossing.toml"))?;
    let target = CalibrationTarget::from_file(format!("{dir}/latency_target.toml"))?;
    let seeds: Vec<u64> = (0..3).map(|i| scene.config.seed + i).collect();
    let report = calibrate(&scene, &PipelineConfig::default(), &target, &seeds)?;
    println!("{:>6} {:>8} {:>10} {:>8}", "rate", "target", "EARO-like", "CEVAS");
    let cevas = SchemeConfig::new(Scheme::Cevas, report.config.block_size, &report.config.bank);
    for cell in &report.cells {
        let mut c = report.config.clone();
        c.link.transmission_rate = cell.rate;
        let ours = run_scenario(&scene, &cevas, &c, scene.config.seed)?.metrics.mean_latency;
        println!("{:>6} {:>8.3} {:>10.3} {:>8.3}", cell.rate, cell.target, cell.measured, ours);
    }
    println!("worst calibration error {:.2}%", report.max_relative_error * 100.0);
    Ok(())
}
