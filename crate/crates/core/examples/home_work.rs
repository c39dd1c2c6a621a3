//! Infers home and work cells from raw GPS points and builds the workplace heatmap.

use epimob::geo::Resolution;
use epimob::mobility::SyntheticCitySpec;
use epimob::places::{extract_home_work_all, workplace_heatmap, HomeWorkParams};
use epimob::service::{Dataset, DatasetSource, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let ds = Dataset::build(DatasetSource::Synthetic(SyntheticDatasetRequest::new(
        SyntheticCitySpec::new(400, 3),
        14,
    )))?;
    let params = HomeWorkParams::default();
    let table = extract_home_work_all(&ds.raw, ds.trajectories.horizon(), &params);
    println!("{} users placed, {} rejected", table.found.len(), table.rejected.len());
    for hw in table.found.iter().take(3) {
        println!(
            "  {}: home {} ({:.2}), work {} ({:.2})",
            hw.uid, hw.home_cell, hw.home_rate, hw.work_cell, hw.work_rate
        );
    }

    let heat = workplace_heatmap(&table.found, ds.trajectories.grid(), Resolution::new(6)?)?;
    let mut busiest: Vec<_> = heat.into_iter().collect();
    busiest.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    for (cell, n) in busiest.iter().take(5) {
        println!("  {cell}: {n} workers");
    }
    Ok(())
}
