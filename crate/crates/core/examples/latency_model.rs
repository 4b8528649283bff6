//! The analytic link model: transmission time per rate for a few payload
//! sizes, and a `C + B / rate` fit to a measured latency row.

use coopvision::netmodel::{fit_rate_curve, tx_latency, LinkModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rates = [80.0, 100.0, 120.0, 140.0, 160.0];
    println!("{:>10} {}", "bytes", rates.map(|r| format!("{r:>9} Mb/s")).join(""));
    for bytes in [20_000u64, 100_000, 500_000] {
        let row: Vec<String> = rates
            .iter()
            .map(|&r| {
                let link = LinkModel::new(r, 0.005).map(|l| tx_latency(bytes, &l));
                format!("{:>12.2}ms", link.unwrap_or(f64::NAN) * 1e3)
            })
            .collect();
        println!("{bytes:>10} {}", row.join(""));
    }

    let latency = [0.269, 0.263, 0.254, 0.242, 0.227];
    let points: Vec<(f64, f64)> = rates.iter().copied().zip(latency).collect();
    let curve = fit_rate_curve(&points)?;
    println!(
        "\nfit: {:.4} s + {:.3} / rate, worst cell off by {:.1}%",
        curve.constant,
        curve.per_rate,
        curve.max_relative_error(&points) * 100.0
    );
    Ok(())
}
