//! Runs a seeded ensemble and prints the daily mean with its percentile band.

use epimob::engine::EpidemicParams;
use epimob::mobility::SyntheticCitySpec;
use epimob::service::{execute, Dataset, DatasetSource, SimulationConfig, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let ds = Dataset::build(DatasetSource::Synthetic(SyntheticDatasetRequest::new(
        SyntheticCitySpec::new(1000, 1),
        14,
    )))?;
    let params = EpidemicParams {
        i0: 10,
        rng_seed: 42,
        ..Default::default()
    };
    let er = execute(&ds, &SimulationConfig::new(ds.id.clone(), params, 50), None, &|| {})?;
    println!("{} runs, {} inside the percentile band", er.runs.len(), er.kept.len());
    for b in &er.band {
        println!("day {:2}: {:6.1} [{:6.1}, {:6.1}]", b.day, b.mean, b.lo, b.hi);
    }
    Ok(())
}
