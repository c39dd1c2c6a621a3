//! Generates a synthetic commuter city and writes its gridded trajectories as JSON lines.

use std::fs::File;
use std::io::BufWriter;

use epimob::mobility::SyntheticCitySpec;
use epimob::service::{Dataset, DatasetSource, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let mut spec = SyntheticCitySpec::new(500, 7);
    spec.commute_share = 0.6;
    let ds = Dataset::build(DatasetSource::Synthetic(SyntheticDatasetRequest::new(spec, 7)))?;
    let ts = &ds.trajectories;
    println!(
        "dataset {}: {} users, {} ticks of {} s, {} synthetic POIs",
        ds.id,
        ts.len(),
        ts.ticks(),
        ts.step(),
        ds.pois.len()
    );
    let path = std::env::temp_dir().join("epimob_city.jsonl");
    ts.write_jsonl(BufWriter::new(File::create(&path)?))?;
    println!("trajectories written to {}", path.display());
    Ok(())
}
