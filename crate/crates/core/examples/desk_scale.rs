//! Times dataset construction and a short ensemble on a 2,000-user, 14-day city.

use std::time::Instant;

use epimob::engine::EpidemicParams;
use epimob::mobility::SyntheticCitySpec;
use epimob::service::{execute, Dataset, DatasetSource, SimulationConfig, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let t0 = Instant::now();
    let req = SyntheticDatasetRequest::new(SyntheticCitySpec::new(2000, 1), 14);
    let ds = Dataset::build(DatasetSource::Synthetic(req))?;
    println!(
        "dataset {} built in {:.2?}: {:?}",
        ds.id,
        t0.elapsed(),
        ds.summary().home_work_found
    );

    let m = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let cfg = SimulationConfig::new(ds.id.clone(), EpidemicParams::default(), m);
    let t1 = Instant::now();
    let er = execute(&ds, &cfg, None, &|| {})?;
    let mean: f64 = er.kept_runs().map(|r| r.total_infections() as f64).sum::<f64>() / er.kept.len() as f64;
    println!(
        "{m} runs in {:.2?}; mean infections {mean:.1}, kept {}",
        t1.elapsed(),
        er.kept.len()
    );
    Ok(())
}
