use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{CompiledMobility, EpidemicState};
use super::{
    continuous_increments, sample_discrete_increment, Compartment, DailyCounts, Detection, EpidemicParams,
    InfectionEvent, SimulationRun,
};
use crate::error::{Error, Result};
use crate::mobility::TrajectorySet;
use crate::policy::ScreeningPlan;
use crate::risk::{kahan_sum, RiskField, SLOTS_PER_WEEK};
use crate::rng::{self, StreamRng, TAG_CONTAGION, TAG_INIT, TAG_QUARANTINE, TAG_RUN, TAG_SCREEN};
use crate::time::SECS_PER_DAY;

/// Inputs shared by every run of one configuration.
#[derive(Debug, Clone)]
pub struct Engine {
    pub(crate) mob: CompiledMobility,
    /// Per dense cell: Δ per hour-of-week, `None` for cells without POI risk.
    delta: Vec<Option<Box<[f64]>>>,
    field_beta_base: f64,
    field_beta_global: f64,
    /// Screening windows as (dense cell, tick range, probability).
    screening: Vec<(u32, std::ops::Range<usize>, f64)>,
    ticks_per_day: usize,
    step: i64,
}

/// Real-valued daily totals from [`Engine::run_fractional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalDay {
    pub day: usize,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
    pub cum_infections: f64,
}

impl Engine {
    pub fn new(ts: &TrajectorySet, field: &RiskField, plan: &ScreeningPlan) -> Result<Self> {
        if field.clock != ts.clock() {
            return Err(Error::invalid(
                "field",
                "risk field and trajectories use different local clocks",
            ));
        }
        if SECS_PER_DAY % ts.step() != 0 {
            return Err(Error::invalid("step", "the step must divide one day"));
        }
        let mob = CompiledMobility::new(ts);
        let delta = mob
            .cells
            .iter()
            .map(|c| {
                field.has_cell(*c).then(|| {
                    (0..SLOTS_PER_WEEK)
                        .map(|s| field.delta(*c, s))
                        .collect::<Vec<_>>()
                        .into_boxed_slice()
                })
            })
            .collect();
        let ticks = ts.ticks();
        let mut screening = Vec::new();
        for w in plan.windows() {
            if w.ticks.end > ticks {
                return Err(Error::invalid("screening", "window extends past the horizon"));
            }
            for c in &w.cells {
                if let Some(i) = mob.cell_index(*c) {
                    screening.push((i, w.ticks.clone(), w.detect_prob));
                }
            }
        }
        Ok(Self {
            mob,
            delta,
            field_beta_base: field.beta_base,
            field_beta_global: field.beta_global,
            screening,
            ticks_per_day: (SECS_PER_DAY / ts.step()) as usize,
            step: ts.step(),
        })
    }

    pub fn population(&self) -> usize {
        self.mob.population()
    }

    pub fn ticks(&self) -> usize {
        self.mob.ticks()
    }

    pub fn mobility(&self) -> &CompiledMobility {
        &self.mob
    }

    pub fn days(&self) -> usize {
        self.ticks().div_ceil(self.ticks_per_day)
    }

    /// Seed of run `run_index` under `params`.
    pub fn run_seed(params: &EpidemicParams, run_index: usize) -> u64 {
        rng::derive_seed(&[params.rng_seed, TAG_RUN, run_index as u64])
    }

    fn check(&self, params: &EpidemicParams) -> Result<()> {
        params.validate()?;
        if params.step != self.step {
            return Err(Error::invalid(
                "params.step",
                format!("step {} does not match the trajectories' {}", params.step, self.step),
            ));
        }
        if params.i0 > self.population() {
            return Err(Error::invalid(
                "params.i0",
                format!(
                    "{} initial infections exceed the population of {}",
                    params.i0,
                    self.population()
                ),
            ));
        }
        Ok(())
    }

    /// The field's base rate shifted so that its weighted mean is `params.beta_global`.
    fn beta_base(&self, params: &EpidemicParams) -> f64 {
        self.field_beta_base + (params.beta_global - self.field_beta_global)
    }

    fn beta(&self, base: f64, cell: u32, tick: usize) -> f64 {
        let d = match &self.delta[cell as usize] {
            Some(row) => row[usize::from(self.mob.slot_of_tick[tick])],
            None => 0.0,
        };
        (base + d).max(0.0)
    }

    /// Initially infected users (sorted indices) for a run seed.
    pub fn initial_infected(&self, params: &EpidemicParams, seed: u64) -> Result<Vec<usize>> {
        self.check(params)?;
        let mut rng = rng::stream(&[seed, TAG_INIT]);
        let mut v = index::sample(&mut rng, self.population(), params.i0).into_vec();
        v.sort_unstable();
        Ok(v)
    }

    pub fn init_state(&self, params: &EpidemicParams, seed: u64) -> Result<EpidemicState> {
        Ok(EpidemicState::new(&self.mob, &self.initial_infected(params, seed)?))
    }

    pub fn run(&self, params: &EpidemicParams, run_index: usize) -> Result<SimulationRun> {
        self.run_observed(params, run_index, Self::run_seed(params, run_index), |_, _| {})
    }

    /// Runs with an explicit seed, calling `observer(t, state)` at the start of
    /// every tick `t` and once more with `t = ticks` at the end.
    pub fn run_observed(
        &self,
        params: &EpidemicParams,
        run_index: usize,
        seed: u64,
        mut observer: impl FnMut(usize, &EpidemicState),
    ) -> Result<SimulationRun> {
        let infected = self.initial_infected(params, seed)?;
        let mut st = EpidemicState::new(&self.mob, &infected);
        let base = self.beta_base(params);
        let (sig, gam) = (params.sigma * params.step_days(), params.gamma * params.step_days());
        let step_days = params.step_days();
        let mut events = Vec::new();
        let mut detections = Vec::new();
        let mut daily = Vec::with_capacity(self.days());
        let (mut onsets, mut removals) = (0usize, 0usize);
        let ticks = self.ticks();

        for t in 0..ticks {
            observer(t, &st);
            let time = self.mob.times[t];

            // Quarantined users keep progressing off-grid.
            let (we, wi) = (
                st.ward_members(Compartment::E).len(),
                st.ward_members(Compartment::I).len(),
            );
            if we + wi > 0 {
                let mut rng = rng::stream(&[seed, TAG_QUARANTINE, t as u64]);
                let k_i = draw(sig * we as f64, we, &mut rng);
                let k_r = draw(gam * wi as f64, wi, &mut rng);
                let to_i = pick(st.ward_members(Compartment::E), k_i, &mut rng);
                let to_r = pick(st.ward_members(Compartment::I), k_r, &mut rng);
                for u in to_i {
                    st.set_compartment(u, Compartment::I);
                }
                for u in to_r {
                    st.set_compartment(u, Compartment::R);
                }
                onsets += k_i;
                removals += k_r;
            }

            for cell in st.active_cells() {
                let counts = Compartment::ALL.map(|c| st.cell_members(cell, c).len());
                let [s, e, i, _] = counts;
                let beta_step = self.beta(base, cell, t) * step_days;
                let [x_e, x_i, x_r] = continuous_increments(counts.map(|v| v as f64), beta_step, sig, gam);
                let mut rng = rng::stream(&[seed, TAG_CONTAGION, u64::from(cell), t as u64]);
                let k_e = if i > 0 && s > 0 { draw(x_e, s, &mut rng) } else { 0 };
                let k_i = draw(x_i, e, &mut rng);
                let k_r = draw(x_r, i, &mut rng);
                let to_e = pick(st.cell_members(cell, Compartment::S), k_e, &mut rng);
                let to_i = pick(st.cell_members(cell, Compartment::E), k_i, &mut rng);
                let to_r = pick(st.cell_members(cell, Compartment::I), k_r, &mut rng);
                let cell_id = self.mob.cells[cell as usize];
                for u in to_e {
                    st.set_compartment(u, Compartment::E);
                    events.push(InfectionEvent {
                        run: run_index,
                        uid: self.mob.uids[u as usize].clone(),
                        t: time,
                        cell: cell_id,
                    });
                }
                for u in to_i {
                    st.set_compartment(u, Compartment::I);
                }
                for u in to_r {
                    st.set_compartment(u, Compartment::R);
                }
                onsets += k_i;
                removals += k_r;
            }

            for (cell, ticks, p) in &self.screening {
                if !ticks.contains(&t) {
                    continue;
                }
                let infectious = st.cell_members(*cell, Compartment::I);
                if infectious.is_empty() {
                    continue;
                }
                let mut rng = rng::stream(&[seed, TAG_SCREEN, u64::from(*cell), t as u64]);
                let caught: Vec<u32> = infectious
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < *p)
                    .collect();
                for u in caught {
                    st.quarantine(u);
                    detections.push(Detection {
                        uid: self.mob.uids[u as usize].clone(),
                        t: time,
                        cell: self.mob.cells[*cell as usize],
                    });
                }
            }

            for &(u, to) in self.mob.moves_after(t) {
                st.move_to(u, to);
            }

            if (t + 1) % self.ticks_per_day == 0 || t + 1 == ticks {
                let [s, e, i, r] = st.totals();
                daily.push(DailyCounts {
                    day: t / self.ticks_per_day,
                    s,
                    e,
                    i,
                    r,
                    quarantined: st.quarantined_count(),
                    cum_infections: events.len(),
                    cum_onsets: onsets,
                    cum_removals: removals,
                });
            }
        }
        observer(ticks, &st);
        Ok(SimulationRun {
            run_index,
            rng_seed: seed,
            initial_infected: infected.iter().map(|&u| self.mob.uids[u].clone()).collect(),
            events,
            daily,
            detections,
        })
    }

    /// Expected-value dynamics: every user carries a probability mass over
    /// S/E/I/R and each cell applies the continuous increments without
    /// sampling. Screening is not modelled here.
    pub fn run_fractional(&self, params: &EpidemicParams) -> Result<Vec<FractionalDay>> {
        let infected = self.initial_infected(params, Self::run_seed(params, 0))?;
        let n = self.population();
        let mut mass = vec![[1.0, 0.0, 0.0, 0.0]; n];
        for &u in &infected {
            mass[u] = [0.0, 0.0, 1.0, 0.0];
        }
        let mut cell = self.mob.initial.clone();
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); self.mob.cells.len()];
        let mut pos = vec![0u32; n];
        for u in 0..n {
            let list = &mut members[cell[u] as usize];
            pos[u] = list.len() as u32;
            list.push(u as u32);
        }
        let base = self.beta_base(params);
        let step_days = params.step_days();
        let (sig, gam) = (params.sigma * step_days, params.gamma * step_days);
        let mut cum = 0.0;
        let mut cum_parts = Vec::new();
        let mut out = Vec::with_capacity(self.days());
        let ticks = self.ticks();
        for t in 0..ticks {
            for (c, list) in members.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                let sums: [f64; 4] = std::array::from_fn(|k| kahan_sum(list.iter().map(|&u| mass[u as usize][k])));
                let nn = list.len() as f64;
                let beta_step = self.beta(base, c as u32, t) * step_days;
                let f_e = beta_step * sums[2] / nn;
                let [x_e, _, _] = continuous_increments(sums, beta_step, sig, gam);
                if x_e > 0.0 {
                    cum_parts.push(x_e);
                }
                for &u in list {
                    let m = &mut mass[u as usize];
                    let (d_e, d_i, d_r) = (m[0] * f_e, m[1] * sig, m[2] * gam);
                    m[0] -= d_e;
                    m[1] += d_e - d_i;
                    m[2] += d_i - d_r;
                    m[3] += d_r;
                }
            }
            for &(u, to) in self.mob.moves_after(t) {
                let from = cell[u as usize] as usize;
                let p = pos[u as usize] as usize;
                members[from].swap_remove(p);
                if let Some(&moved) = members[from].get(p) {
                    pos[moved as usize] = p as u32;
                }
                let list = &mut members[to as usize];
                pos[u as usize] = list.len() as u32;
                list.push(u);
                cell[u as usize] = to;
            }
            if (t + 1) % self.ticks_per_day == 0 || t + 1 == ticks {
                cum += kahan_sum(cum_parts.drain(..));
                let tot: [f64; 4] = std::array::from_fn(|k| kahan_sum(mass.iter().map(|m| m[k])));
                out.push(FractionalDay {
                    day: t / self.ticks_per_day,
                    s: tot[0],
                    e: tot[1],
                    i: tot[2],
                    r: tot[3],
                    cum_infections: cum,
                });
            }
        }
        Ok(out)
    }
}

fn draw(x: f64, cap: usize, rng: &mut StreamRng) -> usize {
    if cap == 0 || x <= 0.0 {
        return 0;
    }
    let k = sample_discrete_increment(x, rng).expect("increments are non-negative");
    (k as usize).min(cap)
}

/// `k` members chosen uniformly without replacement.
fn pick(list: &[u32], k: usize, rng: &mut StreamRng) -> Vec<u32> {
    match k {
        0 => Vec::new(),
        k if k >= list.len() => list.to_vec(),
        1 => vec![list[rng.random_range(0..list.len())]],
        k => index::sample(rng, list.len(), k).into_iter().map(|i| list[i]).collect(),
    }
}

/// One run of `params` over `ts` with explicit seed.
pub fn run_simulation(
    ts: &TrajectorySet,
    field: &RiskField,
    params: &EpidemicParams,
    plan: &ScreeningPlan,
    run_seed: u64,
) -> Result<SimulationRun> {
    Engine::new(ts, field, plan)?.run_observed(params, 0, run_seed, |_, _| {})
}
