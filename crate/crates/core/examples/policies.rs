//! Composes telecommuting, a lockdown and screening into one restricted mobility plan.

use epimob::geo::{GeoPolygon, Resolution};
use epimob::mobility::SyntheticCitySpec;
use epimob::policy::{compose_plan, PolicyInputs, PolicyKind, PolicySpec, TelecommuteRegion};
use epimob::service::{Dataset, DatasetSource, SyntheticDatasetRequest};

fn main() -> epimob::Result<()> {
    let req = SyntheticDatasetRequest::new(SyntheticCitySpec::new(600, 5), 14);
    let start = req.start;
    let ds = Dataset::build(DatasetSource::Synthetic(req))?;
    let heat = ds.workplaces(Resolution::DEFAULT)?;
    let top = heat.cells.iter().max_by_key(|c| c.count).expect("some workplaces");
    let center = ds.trajectories.grid().center(top.cell);
    let office_block = GeoPolygon::new(vec![
        center.offset_m(-800.0, -800.0),
        center.offset_m(-800.0, 800.0),
        center.offset_m(800.0, 800.0),
        center.offset_m(800.0, -800.0),
    ])?;

    let policies = vec![
        PolicySpec {
            name: "wfh".into(),
            start,
            days: 14,
            seed: 1,
            kind: PolicyKind::Telecommuting {
                regions: vec![TelecommuteRegion {
                    polygon: Some(office_block.clone()),
                    district: None,
                    reduction: 0.7,
                }],
            },
        },
        PolicySpec {
            name: "lockdown".into(),
            start: start + chrono::Days::new(7),
            days: 7,
            seed: 2,
            kind: PolicyKind::Lockdown {
                polygons: vec![office_block],
            },
        },
        PolicySpec {
            name: "gate".into(),
            start,
            days: 14,
            seed: 3,
            kind: PolicyKind::Screening {
                cells: vec![top.cell],
                detect_prob: 0.879,
            },
        },
    ];
    let plan = compose_plan(
        &ds.trajectories,
        &policies,
        PolicyInputs {
            home_work: Some(&ds.home_work),
            history: Some(&ds.history),
            districts: None,
        },
    )?;
    for t in &plan.report.telecommute {
        println!(
            "{}: {} workers at home, {} user-days replaced",
            t.policy,
            t.affected.len(),
            t.days_replaced
        );
    }
    for l in &plan.report.lockdown {
        println!(
            "{}: {} cells locked, {} frozen, {} days from history, {} at home",
            l.policy,
            l.locked_cells,
            l.frozen.len(),
            l.days_from_history,
            l.days_at_home
        );
    }
    println!("screening in {} cells", plan.screening.cells().count());
    Ok(())
}
