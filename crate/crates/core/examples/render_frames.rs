//! Renders every camera's view at one tick to binary PPM files.
//!
//! ```text
//! cargo run --example render_frames -- [tick] [out_dir]
//! ```

use std::io::Write;

use coopvision::scene::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let tick: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let out = args.next().unwrap_or_else(|| ".".into());
    let scene = Scene::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crossing.toml"))?;
    std::fs::create_dir_all(&out)?;
    for cam in &scene.cameras {
        let frame = scene.render(cam, tick)?;
        let path = format!("{out}/camera{}_tick{tick}.ppm", cam.id);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write!(f, "P6\n{} {}\n255\n", frame.width, frame.height)?;
        for px in &frame.pixels {
            f.write_all(px)?;
        }
        println!("{path}: {} vehicles visible", frame.ground_truth.len());
    }
    Ok(())
}
