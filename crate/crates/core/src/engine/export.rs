use std::io::{BufRead, Write};

use super::{InfectionEvent, SimulationRun};
use crate::error::{Error, Result};

/// JSON Lines, one `{"run":…,"uid":…,"t":…,"cell":…}` per event.
pub fn write_events_jsonl<'a, W: Write>(runs: impl IntoIterator<Item = &'a SimulationRun>, mut w: W) -> Result<()> {
    for r in runs {
        for e in &r.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_events_jsonl<R: BufRead>(r: R) -> Result<Vec<InfectionEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// CSV `run,day,S,E,I,R,cum_infections`.
pub fn write_daily_csv<'a, W: Write>(runs: impl IntoIterator<Item = &'a SimulationRun>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run", "day", "S", "E", "I", "R", "cum_infections"])
        .map_err(std::io::Error::from)?;
    for r in runs {
        for d in &r.daily {
            out.write_record([r.run_index, d.day, d.s, d.e, d.i, d.r, d.cum_infections].map(|v| v.to_string()))
                .map_err(std::io::Error::from)?;
        }
    }
    out.flush()?;
    Ok(())
}
