use std::collections::{BTreeSet, HashMap};

use super::Compartment;
use crate::geo::CellId;
use crate::mobility::TrajectorySet;

/// Trajectories recoded for the engine: dense cell indices, each user's
/// starting cell, and per-tick move lists. Shared read-only by all runs.
#[derive(Debug, Clone)]
pub struct CompiledMobility {
    pub(crate) cells: Vec<CellId>,
    pub(crate) index: HashMap<CellId, u32>,
    pub(crate) initial: Vec<u32>,
    /// `moves[offsets[t]..offsets[t + 1]]` are the `(user, to)` moves from tick `t` to `t + 1`.
    pub(crate) offsets: Vec<usize>,
    pub(crate) moves: Vec<(u32, u32)>,
    pub(crate) slot_of_tick: Vec<u16>,
    pub(crate) times: Vec<i64>,
    pub(crate) uids: Vec<String>,
}

impl CompiledMobility {
    pub fn new(ts: &TrajectorySet) -> Self {
        let mut cells: Vec<CellId> = ts
            .trajectories()
            .iter()
            .flat_map(|t| t.cells.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        cells.shrink_to_fit();
        let index: HashMap<CellId, u32> = cells.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();
        let ticks = ts.ticks();
        let initial = ts.trajectories().iter().map(|t| index[&t.cells[0]]).collect();
        let mut per_tick: Vec<Vec<(u32, u32)>> = vec![Vec::new(); ticks.saturating_sub(1)];
        for (u, t) in ts.trajectories().iter().enumerate() {
            for k in 1..ticks {
                if t.cells[k] != t.cells[k - 1] {
                    per_tick[k - 1].push((u as u32, index[&t.cells[k]]));
                }
            }
        }
        let mut offsets = Vec::with_capacity(ticks);
        let mut moves = Vec::new();
        offsets.push(0);
        for m in per_tick {
            moves.extend(m);
            offsets.push(moves.len());
        }
        let clock = ts.clock();
        let times: Vec<i64> = (0..ticks).map(|k| ts.time_of(k)).collect();
        let slot_of_tick = times.iter().map(|t| clock.slot_of_week(*t) as u16).collect();
        Self {
            cells,
            index,
            initial,
            offsets,
            moves,
            slot_of_tick,
            times,
            uids: ts.trajectories().iter().map(|t| t.uid.clone()).collect(),
        }
    }

    pub fn ticks(&self) -> usize {
        self.times.len()
    }

    pub fn population(&self) -> usize {
        self.initial.len()
    }

    pub fn cell_index(&self, c: CellId) -> Option<u32> {
        self.index.get(&c).copied()
    }

    pub(crate) fn moves_after(&self, tick: usize) -> &[(u32, u32)] {
        if tick + 1 >= self.offsets.len() {
            return &[];
        }
        &self.moves[self.offsets[tick]..self.offsets[tick + 1]]
    }
}

const WARD: u32 = u32::MAX;

/// Per-cell compartment member lists plus an off-grid ward for quarantined
/// users. Lists are unordered; positions are tracked so removal is O(1).
#[derive(Debug, Clone)]
pub struct EpidemicState {
    comp: Vec<Compartment>,
    cell: Vec<u32>,
    pos: Vec<u32>,
    members: Vec<[Vec<u32>; 4]>,
    ward: [Vec<u32>; 4],
    active: BTreeSet<u32>,
    totals: [usize; 4],
    cell_ids: Vec<CellId>,
}

impl EpidemicState {
    /// Everyone susceptible at their starting cell, except `infected` (sorted user indices).
    pub fn new(mob: &CompiledMobility, infected: &[usize]) -> Self {
        let n = mob.population();
        let mut st = Self {
            comp: vec![Compartment::S; n],
            cell: vec![0; n],
            pos: vec![0; n],
            members: vec![Default::default(); mob.cells.len()],
            ward: Default::default(),
            active: BTreeSet::new(),
            totals: [0; 4],
            cell_ids: mob.cells.clone(),
        };
        let mut inf = vec![false; n];
        for &u in infected {
            inf[u] = true;
        }
        for u in 0..n {
            let c = if inf[u] { Compartment::I } else { Compartment::S };
            st.comp[u] = c;
            st.totals[c.index()] += 1;
            st.insert(u as u32, mob.initial[u], c);
        }
        st
    }

    fn list_mut(&mut self, cell: u32, c: Compartment) -> &mut Vec<u32> {
        if cell == WARD {
            &mut self.ward[c.index()]
        } else {
            &mut self.members[cell as usize][c.index()]
        }
    }

    fn insert(&mut self, u: u32, cell: u32, c: Compartment) {
        let list = self.list_mut(cell, c);
        list.push(u);
        let p = list.len() as u32 - 1;
        self.pos[u as usize] = p;
        self.cell[u as usize] = cell;
        if cell != WARD && matches!(c, Compartment::E | Compartment::I) {
            self.active.insert(cell);
        }
    }

    fn remove(&mut self, u: u32) {
        let (cell, c) = (self.cell[u as usize], self.comp[u as usize]);
        let p = self.pos[u as usize] as usize;
        let list = self.list_mut(cell, c);
        list.swap_remove(p);
        if let Some(&moved) = list.get(p) {
            self.pos[moved as usize] = p as u32;
        }
        if cell != WARD {
            let m = &self.members[cell as usize];
            if m[1].is_empty() && m[2].is_empty() {
                self.active.remove(&cell);
            }
        }
    }

    pub(crate) fn set_compartment(&mut self, u: u32, to: Compartment) {
        let cell = self.cell[u as usize];
        self.remove(u);
        self.totals[self.comp[u as usize].index()] -= 1;
        self.comp[u as usize] = to;
        self.totals[to.index()] += 1;
        self.insert(u, cell, to);
    }

    pub(crate) fn move_to(&mut self, u: u32, cell: u32) {
        if self.cell[u as usize] == WARD || self.cell[u as usize] == cell {
            return;
        }
        let c = self.comp[u as usize];
        self.remove(u);
        self.insert(u, cell, c);
    }

    pub(crate) fn quarantine(&mut self, u: u32) {
        if self.cell[u as usize] == WARD {
            return;
        }
        let c = self.comp[u as usize];
        self.remove(u);
        self.insert(u, WARD, c);
    }

    /// Cells holding exposed or infectious users, in index order.
    pub(crate) fn active_cells(&self) -> Vec<u32> {
        self.active.iter().copied().collect()
    }

    pub(crate) fn cell_members(&self, cell: u32, c: Compartment) -> &[u32] {
        &self.members[cell as usize][c.index()]
    }

    pub(crate) fn ward_members(&self, c: Compartment) -> &[u32] {
        &self.ward[c.index()]
    }

    pub fn population(&self) -> usize {
        self.comp.len()
    }

    /// Totals over all users, quarantined included, indexed S/E/I/R.
    pub fn totals(&self) -> [usize; 4] {
        self.totals
    }

    pub fn compartment(&self, user: usize) -> Compartment {
        self.comp[user]
    }

    pub fn is_quarantined(&self, user: usize) -> bool {
        self.cell[user] == WARD
    }

    pub fn quarantined_count(&self) -> usize {
        self.ward.iter().map(Vec::len).sum()
    }

    /// Current cell of a user on the grid.
    pub fn cell_of(&self, user: usize) -> Option<CellId> {
        let c = self.cell[user];
        (c != WARD).then(|| self.cell_ids[c as usize])
    }

    /// Occupied cells with their S/E/I/R member lists (user indices).
    pub fn cells(&self) -> impl Iterator<Item = (CellId, [&[u32]; 4])> {
        self.members.iter().enumerate().filter_map(|(i, m)| {
            (m.iter().any(|l| !l.is_empty())).then(|| (self.cell_ids[i], [&m[0][..], &m[1][..], &m[2][..], &m[3][..]]))
        })
    }

    /// Quarantined users, per compartment.
    pub fn quarantined(&self) -> [&[u32]; 4] {
        [&self.ward[0], &self.ward[1], &self.ward[2], &self.ward[3]]
    }
}
