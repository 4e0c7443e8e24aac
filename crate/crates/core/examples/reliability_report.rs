//! Metrics and verdicts for hand-made distance curves, plus the identity
//! check over the bundled published metric table.

use scenario_search::metrics::{
    bundled_published_rows, check_identities, compute_metrics, export_plot_data, make_series, BandThresholds,
};

fn main() -> anyhow::Result<()> {
    let th = BandThresholds::default();
    // similarities: a clear winner, an even moderate slope, a clear tail
    let mut sims = vec![0.95, 0.92];
    sims.extend((0..10).map(|i| 0.86 - 0.045 * i as f64));
    sims.extend([0.3, 0.2]);
    let curves = [
        ("s-shaped", sims.iter().map(|s| 1.0 - s).collect::<Vec<_>>()),
        ("flat", vec![0.62; 14]),
        ("too short", vec![0.1, 0.5, 0.9]),
    ];
    for (name, d) in &curves {
        let s = make_series(*name, d)?;
        let m = compute_metrics(&s, &th);
        println!(
            "{name:<10} LGap {:.3} Range {:.3} StdDev {:.3} RLGap {:5.1}%  {} {}",
            m.lgap,
            m.range,
            m.std_dev,
            m.rl_gap,
            m.verdict.as_str(),
            m.reason.map(|r| format!("({r:?})")).unwrap_or_default()
        );
    }

    let s = make_series("s-shaped", &curves[0].1)?;
    let plot = export_plot_data(&s, &compute_metrics(&s, &th), &th);
    println!("\nplot document:\n{}", serde_json::to_string_pretty(&plot)?);

    let rows = bundled_published_rows();
    let worst = check_identities(&rows).into_iter().fold(0.0f64, |w, c| w.max(c.rlgap_error));
    println!("\npublished table: {} rows, worst RLGap identity error {worst:.4} pp", rows.len());
    Ok(())
}
