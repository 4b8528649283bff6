//! Writes the golden tick trace that `coopvision replay` checks.
//!
//! ```text
//! cargo run --example freeze_golden -- [tick] [out.json]
//! ```
//!
//! Only rerun this after an intended behavior change; the point of the file
//! is that it does not move otherwise.

use std::path::{Path, PathBuf};

use coopvision::harness::{golden_json, make_golden};
use coopvision::pipeline::{PipelineConfig, Scheme, SchemeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let tick: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let out = std::env::args()
        .nth(2)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join(format!("golden_crossing_t{tick}.json")));
    let pipeline = PipelineConfig::default();
    let scheme = SchemeConfig::new(Scheme::Cevas, pipeline.block_size, &pipeline.bank);
    let base = out.parent().unwrap_or(Path::new("."));
    let scenario = fixtures.join("crossing.toml");
    let rel = pathdiff(&scenario, base).unwrap_or_else(|| scenario.clone());
    let golden = make_golden(&scenario, &rel, scheme, pipeline, 7, tick)?;
    std::fs::write(&out, golden_json(&golden))?;
    let t = &golden.trace;
    println!(
        "tick {} frozen to {}: {} cameras, {} match events, {} live sharing objects",
        t.tick,
        out.display(),
        t.cameras.len(),
        t.match_events.len(),
        t.sharing_live_in_overlap
    );
    Ok(())
}

// Same-directory case is all this needs.
fn pathdiff(target: &Path, base: &Path) -> Option<PathBuf> {
    let base = base.canonicalize().ok()?;
    let target = target.canonicalize().ok()?;
    target.strip_prefix(&base).ok().map(Path::to_path_buf)
}
