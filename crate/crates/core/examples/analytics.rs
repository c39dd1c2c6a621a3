//! Cumulative curves, severity clusters, hourly histograms and a policy comparison.

use epimob::analytics::{compare_policies, cumulative_curve, hourly_histogram, severity_clusters};
use epimob::engine::EpidemicParams;
use epimob::geo::Resolution;
use epimob::mobility::SyntheticCitySpec;
use epimob::service::{execute, Dataset, DatasetSource, SimulationConfig, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let ds = Dataset::build(DatasetSource::Synthetic(SyntheticDatasetRequest::new(
        SyntheticCitySpec::new(800, 4),
        14,
    )))?;
    let run = |beta: f64| {
        let params = EpidemicParams {
            beta_global: beta,
            i0: 10,
            ..Default::default()
        };
        execute(&ds, &SimulationConfig::new(ds.id.clone(), params, 30), None, &|| {})
    };
    let (base, strong) = (run(0.302)?, run(0.45)?);

    let sev = severity_clusters(&base, Resolution::new(6)?)?;
    println!(
        "{} events in {} clusters at level 6",
        sev.total_events,
        sev.clusters.len()
    );
    if let Some(worst) = sev.clusters.iter().max_by_key(|c| c.count) {
        let hist = hourly_histogram(&base, &[worst.cell])?;
        let peak = (0..24)
            .max_by(|&a, &b| hist.bins[a].total_cmp(&hist.bins[b]))
            .unwrap_or(0);
        println!(
            "worst cluster {} ({:?}); infections peak at {peak:02}:00",
            worst.cell, worst.severity
        );
    }

    let cmp = compare_policies(
        vec![
            (cumulative_curve(&base, "β 0.302", &[])?, &base),
            (cumulative_curve(&strong, "β 0.45", &[])?, &strong),
        ],
        "transmission",
    )?;
    for r in &cmp.ranking {
        println!("#{} {}", r.rank, r.curve);
    }
    Ok(())
}
