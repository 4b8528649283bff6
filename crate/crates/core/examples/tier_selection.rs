//! Shows which detector tier the content-aware selector picks for a range of
//! crowding levels, and what each tier costs on a fixed workload.

use coopvision::detector::{mean_pairwise_iou, select_tier, DetectorBank};
use coopvision::geometry::BBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = DetectorBank::default();
    let t_iou = 0.2;
    // Two 0.2-wide boxes, the second slid right by `shift`.
    for shift in [0.3, 0.17, 0.13, 0.07, 0.0] {
        let a = BBox::new(0.1, 0.1, 0.3, 0.3)?;
        let b = BBox::new(0.1 + shift, 0.1, 0.3 + shift, 0.3)?;
        let m = mean_pairwise_iou(&[a, b]);
        let tier = &bank.tiers[select_tier(m, t_iou, &bank)];
        println!("m = {m:.3} -> {}", tier.name);
    }
    println!();
    for t in &bank.tiers {
        println!(
            "{:<9} {:.1} ms for 10 blocks, misses {:.0}% of objects",
            t.name,
            t.latency_for_blocks(10) * 1e3,
            t.miss_rate * 100.0
        );
    }
    Ok(())
}
