//! Calibrates the POI risk field so the visit-weighted mean rate equals the global β.

use std::collections::BTreeMap;

use epimob::mobility::SyntheticCitySpec;
use epimob::risk::RiskConfig;
use epimob::service::{Dataset, DatasetSource, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let ds = Dataset::build(DatasetSource::Synthetic(SyntheticDatasetRequest::new(
        SyntheticCitySpec::new(500, 2),
        7,
    )))?;
    let field = ds.risk_field(&RiskConfig::default(), 0.302)?;
    println!("β global {:.3}, β base {:.4}", field.beta_global, field.beta_base);

    // Daily peak rate per cell, highest first.
    let mut peaks: BTreeMap<_, f64> = BTreeMap::new();
    for &cell in field.cells() {
        let peak = (0..168).map(|slot| field.beta_slot(cell, slot)).fold(0.0, f64::max);
        peaks.insert(cell, peak);
    }
    let mut ranked: Vec<_> = peaks.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (cell, peak) in ranked.iter().take(5) {
        println!("  {cell}: peak β {peak:.3}/day");
    }
    Ok(())
}
