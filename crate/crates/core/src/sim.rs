//! Tick-based 2D arena. Free droplets random-walk, bonded droplets move as
//! rigid groups, droplets in sensing range bond by the chemistry rules, and
//! molecule groups take blink slots from the coloring protocol whenever the
//! molecule adjacency graph changes.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{self, AtomInstance, ChemError, ChemTable, Composition, MoleculeRecord};
use crate::coloring::{self, ColoringError, ColoringState, LossModel, NodeStreams};
use crate::derive_seed;
use crate::graph::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid arena config: {0}")]
    InvalidConfig(String),
    #[error("position ({x}, {y}) is outside the arena")]
    OutOfBounds { x: f64, y: f64 },
    #[error("unknown droplet {0}")]
    UnknownDroplet(u32),
    #[error("unknown molecule group {0}")]
    UnknownGroup(u32),
    #[error("max molecule degree {max_degree} needs more than {slots} blink slots")]
    SlotCapacity { max_degree: usize, slots: u32 },
    #[error(transparent)]
    Chem(#[from] ChemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    /// Meters.
    pub width: f64,
    pub height: f64,
    pub sensing_radius: f64,
    /// Meters per tick.
    pub step_length: f64,
    /// Max heading perturbation per tick, radians.
    pub heading_jitter: f64,
    pub slot_count: u32,
    pub ticks_per_slot: u32,
    /// Simulated milliseconds per tick.
    pub tick_ms: u64,
    pub seed: u64,
    /// Per-link announcement loss during slot assignment.
    pub p_fail: f64,
    /// Identical-element pairs bond with the highest order both support.
    pub multi_bonds: bool,
    pub max_coloring_rounds: u32,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            width: 1.5,
            height: 1.0,
            sensing_radius: 0.05,
            step_length: 0.005,
            heading_jitter: 0.5,
            slot_count: 6,
            ticks_per_slot: 5,
            tick_ms: 100,
            seed: 0,
            p_fail: 0.0,
            multi_bonds: true,
            max_coloring_rounds: 1000,
        }
    }
}

impl ArenaConfig {
    pub fn blink_period(&self) -> u64 {
        u64::from(self.slot_count) * u64::from(self.ticks_per_slot)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_owned()));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.width) || !finite_pos(self.height) {
            return bad("arena width and height must be positive");
        }
        if !finite_pos(self.sensing_radius) {
            return bad("sensing_radius must be positive");
        }
        if !self.step_length.is_finite() || self.step_length < 0.0 {
            return bad("step_length must be non-negative");
        }
        if !self.heading_jitter.is_finite() || self.heading_jitter < 0.0 {
            return bad("heading_jitter must be non-negative");
        }
        if self.slot_count < 2 {
            return bad("slot_count must be at least 2");
        }
        if self.ticks_per_slot == 0 {
            return bad("ticks_per_slot must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return bad("p_fail must lie in [0, 1]");
        }
        if self.max_coloring_rounds == 0 {
            return bad("max_coloring_rounds must be at least 1");
        }
        Ok(())
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Droplet {
    pub id: u32,
    pub atom: AtomInstance,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub molecule_id: Option<u32>,
    pub steer_target: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeGroup {
    /// Smallest member droplet id.
    pub id: u32,
    pub members: Vec<u32>,
    pub centers: Vec<u32>,
    pub diatomic: bool,
    pub blink_slot: Option<u32>,
    pub composition: Composition,
    pub record: Option<MoleculeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    AddAtom { symbol: String, x: f64, y: f64 },
    RemoveDroplet { id: u32 },
    BreakMolecule { group_id: u32 },
    Steer { id: u32, x: f64, y: f64 },
    Pause,
    Resume,
    Step { ticks: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Recolored {
        tick: u64,
        groups: usize,
        rounds: u32,
        palette_resets: u32,
    },
    SlotCapacityExceeded {
        tick: u64,
        max_degree: usize,
        slots: u32,
    },
    ColoringIncomplete {
        tick: u64,
        colored: usize,
        total: usize,
    },
    UnassignedGroup {
        tick: u64,
        group: u32,
    },
}

/// Droplets blinking red at a tick, plus groups skipped for lack of a slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlinkState {
    pub on: BTreeSet<u32>,
    pub unassigned_groups: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletView {
    pub id: u32,
    pub symbol: String,
    pub x: f64,
    pub y: f64,
    pub molecule_id: Option<u32>,
    pub blinking: bool,
    pub bonds: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    pub id: u32,
    pub members: Vec<u32>,
    pub centers: Vec<u32>,
    pub diatomic: bool,
    pub slot: Option<u32>,
    pub formula: String,
    pub geometry: Option<String>,
    pub gibbs: Option<f64>,
}

/// Immutable view of the arena published at a tick boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub droplets: Vec<DropletView>,
    pub groups: Vec<GroupView>,
}

impl Snapshot {
    pub fn droplet(&self, id: u32) -> Option<&DropletView> {
        self.droplets.iter().find(|d| d.id == id)
    }

    pub fn group(&self, id: u32) -> Option<&GroupView> {
        self.groups.iter().find(|g| g.id == id)
    }
}

type AdjacencyKey = (Vec<u32>, Vec<(u32, u32)>);

#[derive(Debug, Clone)]
pub struct Arena {
    config: ArenaConfig,
    table: Arc<ChemTable>,
    droplets: BTreeMap<u32, Droplet>,
    groups: Vec<MoleculeGroup>,
    tick: u64,
    next_id: u32,
    rng: ChaCha8Rng,
    in_range: BTreeSet<(u32, u32)>,
    paused: bool,
    epoch: u64,
    adjacency_key: Option<AdjacencyKey>,
    events: Vec<SimEvent>,
}

impl Arena {
    pub fn new(config: ArenaConfig, table: Arc<ChemTable>) -> Result<Self, SimError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Arena {
            config,
            table,
            droplets: BTreeMap::new(),
            groups: Vec::new(),
            tick: 0,
            next_id: 0,
            rng,
            in_range: BTreeSet::new(),
            paused: false,
            epoch: 0,
            adjacency_key: None,
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &ArenaConfig {
        &self.config
    }

    /// Motion parameters can change mid-run; everything else is fixed.
    pub fn set_motion(&mut self, step_length: f64, heading_jitter: f64) -> Result<(), SimError> {
        let mut cfg = self.config.clone();
        cfg.step_length = step_length;
        cfg.heading_jitter = heading_jitter;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn table(&self) -> &Arc<ChemTable> {
        &self.table
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn droplets(&self) -> impl Iterator<Item = &Droplet> {
        self.droplets.values()
    }

    pub fn droplet(&self, id: u32) -> Option<&Droplet> {
        self.droplets.get(&id)
    }

    pub fn groups(&self) -> &[MoleculeGroup] {
        &self.groups
    }

    pub fn group(&self, id: u32) -> Option<&MoleculeGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn take_events(&mut self) -> Vec<SimEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn add_atom(&mut self, symbol: &str, x: f64, y: f64) -> Result<u32, SimError> {
        let element = self.table.element(symbol)?.clone();
        if !self.config.contains(x, y) {
            return Err(SimError::OutOfBounds { x, y });
        }
        let id = self.next_id;
        self.next_id += 1;
        let heading = self.rng.random_range(-PI..PI);
        self.droplets.insert(
            id,
            Droplet {
                id,
                atom: AtomInstance::new(id, element),
                x,
                y,
                heading,
                molecule_id: None,
                steer_target: None,
            },
        );
        Ok(id)
    }

    /// Bonds two droplets immediately with the preferred order, bypassing
    /// the proximity rule. Used to lay out scenes.
    pub fn bond_pair(&mut self, a: u32, b: u32) -> Result<(), SimError> {
        let multi = self.config.multi_bonds;
        let (mut da, mut db) = (self.take_droplet(a)?, self.droplets.remove(&b));
        let Some(db_ref) = db.as_mut() else {
            self.droplets.insert(a, da);
            return Err(SimError::UnknownDroplet(b));
        };
        let order = chem::preferred_order(&da.atom, &db_ref.atom, multi);
        let result = if chem::can_bond(&da.atom, &db_ref.atom) {
            chem::form_bond(&mut da.atom, &mut db_ref.atom, order).map_err(SimError::from)
        } else {
            Err(SimError::Chem(ChemError::BondRefused {
                a,
                b,
                reason: "no free slots".into(),
            }))
        };
        self.droplets.insert(a, da);
        self.droplets.insert(b, db.expect("checked above"));
        result?;
        self.refresh();
        Ok(())
    }

    fn take_droplet(&mut self, id: u32) -> Result<Droplet, SimError> {
        self.droplets
            .remove(&id)
            .ok_or(SimError::UnknownDroplet(id))
    }

    /// Regroups and reassigns slots if the molecule adjacency changed.
    pub fn refresh(&mut self) {
        self.regroup();
        self.recolor_if_changed();
    }

    pub fn apply_command(&mut self, cmd: &Command) -> Result<(), SimError> {
        match cmd {
            Command::AddAtom { symbol, x, y } => {
                self.add_atom(symbol, *x, *y)?;
                self.refresh();
            }
            Command::RemoveDroplet { id } => {
                let removed = self.take_droplet(*id)?;
                for bond in &removed.atom.bonds {
                    if let Some(p) = self.droplets.get_mut(&bond.partner) {
                        p.atom.drop_bond(*id);
                    }
                }
                self.in_range.retain(|&(a, b)| a != *id && b != *id);
                self.refresh();
            }
            Command::BreakMolecule { group_id } => {
                let group = self
                    .group(*group_id)
                    .ok_or(SimError::UnknownGroup(*group_id))?;
                for id in group.members.clone() {
                    let d = self.droplets.get_mut(&id).expect("group members exist");
                    d.atom.bonds.clear();
                }
                self.refresh();
            }
            Command::Steer { id, x, y } => {
                if !self.config.contains(*x, *y) {
                    return Err(SimError::OutOfBounds { x: *x, y: *y });
                }
                let d = self
                    .droplets
                    .get_mut(id)
                    .ok_or(SimError::UnknownDroplet(*id))?;
                d.steer_target = Some((*x, *y));
            }
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::Step { ticks } => {
                for _ in 0..*ticks {
                    self.tick();
                }
            }
        }
        Ok(())
    }

    /// Advances one tick: motion, sensing, bonding, regrouping, and slot
    /// assignment when the molecule adjacency changed.
    pub fn tick(&mut self) {
        self.move_droplets();
        let now = self.pairs_in_range();
        self.bond_stable_pairs(&now);
        self.in_range = now.into_keys().collect();
        self.refresh();
        self.tick += 1;
    }

    fn move_droplets(&mut self) {
        let step = self.config.step_length;
        let jitter = self.config.heading_jitter;
        let (w, h) = (self.config.width, self.config.height);

        let free: Vec<u32> = self
            .droplets
            .values()
            .filter(|d| d.molecule_id.is_none())
            .map(|d| d.id)
            .collect();
        for id in free {
            let noise = self.jitter(jitter);
            let d = self.droplets.get_mut(&id).expect("listed above");
            let (heading, len, arrived) = match d.steer_target {
                Some((tx, ty)) => steer_toward(d.x, d.y, tx, ty, step),
                None => (d.heading + noise, step, false),
            };
            let (mut dx, mut dy) = (len * heading.cos(), len * heading.sin());
            let (nx, flip_x) = reflect(d.x + dx, w);
            let (ny, flip_y) = reflect(d.y + dy, h);
            if flip_x {
                dx = -dx;
            }
            if flip_y {
                dy = -dy;
            }
            d.x = nx;
            d.y = ny;
            if len > 0.0 {
                d.heading = dy.atan2(dx);
            }
            if arrived {
                d.steer_target = None;
            }
        }

        for gi in 0..self.groups.len() {
            let members = self.groups[gi].members.clone();
            let noise = self.jitter(jitter);
            let steered = members
                .iter()
                .map(|id| &self.droplets[id])
                .find_map(|d| d.steer_target.map(|t| (d.id, d.x, d.y, t)));
            let (heading, len, arrived) = match steered {
                Some((_, x, y, (tx, ty))) => steer_toward(x, y, tx, ty, step),
                None => {
                    let (s, c) = members.iter().fold((0.0, 0.0), |(s, c), id| {
                        let hd = self.droplets[id].heading;
                        (s + hd.sin(), c + hd.cos())
                    });
                    (s.atan2(c) + noise, step, false)
                }
            };
            let mut dx = len * heading.cos();
            let mut dy = len * heading.sin();
            let xs: Vec<f64> = members.iter().map(|id| self.droplets[id].x).collect();
            let ys: Vec<f64> = members.iter().map(|id| self.droplets[id].y).collect();
            dx = rigid_axis_delta(&xs, dx, w);
            dy = rigid_axis_delta(&ys, dy, h);
            let new_heading = if dx != 0.0 || dy != 0.0 {
                dy.atan2(dx)
            } else {
                heading
            };
            for id in &members {
                let d = self.droplets.get_mut(id).expect("group member");
                d.x = (d.x + dx).clamp(0.0, w);
                d.y = (d.y + dy).clamp(0.0, h);
                d.heading = new_heading;
            }
            if let (true, Some((sid, ..))) = (arrived, steered) {
                self.droplets
                    .get_mut(&sid)
                    .expect("steered member")
                    .steer_target = None;
            }
        }
    }

    fn jitter(&mut self, amplitude: f64) -> f64 {
        let u: f64 = self.rng.random();
        (2.0 * u - 1.0) * amplitude
    }

    fn pairs_in_range(&self) -> BTreeMap<(u32, u32), f64> {
        let r = self.config.sensing_radius;
        let list: Vec<&Droplet> = self.droplets.values().collect();
        let mut out = BTreeMap::new();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                let dist = (a.x - b.x).hypot(a.y - b.y);
                if dist <= r {
                    out.insert((a.id, b.id), dist);
                }
            }
        }
        out
    }

    /// Pairs in range at the end of the previous tick and now may bond; each
    /// droplet forms at most one new bond per tick, closest pairs first.
    fn bond_stable_pairs(&mut self, now: &BTreeMap<(u32, u32), f64>) {
        let mut candidates: Vec<(f64, u32, u32)> = now
            .iter()
            .filter(|(pair, _)| self.in_range.contains(pair))
            .filter(|((a, b), _)| {
                let (da, db) = (&self.droplets[a].atom, &self.droplets[b].atom);
                da.bond_with(*b).is_none() && chem::can_bond(da, db)
            })
            .map(|(&(a, b), &dist)| (dist, a, b))
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used = BTreeSet::new();
        for (_, a, b) in candidates {
            if used.contains(&a) || used.contains(&b) {
                continue;
            }
            let mut da = self.droplets.remove(&a).expect("candidate exists");
            let db = self.droplets.get_mut(&b).expect("candidate exists");
            let order = chem::preferred_order(&da.atom, &db.atom, self.config.multi_bonds);
            if chem::form_bond(&mut da.atom, &mut db.atom, order).is_ok() {
                used.insert(a);
                used.insert(b);
            }
            self.droplets.insert(a, da);
        }
    }

    /// Recomputes groups as connected components of the bond relation.
    fn regroup(&mut self) {
        let previous: BTreeMap<u32, Option<u32>> =
            self.groups.iter().map(|g| (g.id, g.blink_slot)).collect();
        let mut seen = BTreeSet::new();
        let mut groups = Vec::new();
        let ids: Vec<u32> = self.droplets.keys().copied().collect();
        for id in ids {
            if seen.contains(&id) || !self.droplets[&id].atom.is_bonded() {
                continue;
            }
            let mut members = vec![id];
            seen.insert(id);
            let mut i = 0;
            while i < members.len() {
                for bond in &self.droplets[&members[i]].atom.bonds {
                    if seen.insert(bond.partner) {
                        members.push(bond.partner);
                    }
                }
                i += 1;
            }
            members.sort_unstable();
            let atoms: Vec<AtomInstance> = members
                .iter()
                .map(|m| self.droplets[m].atom.clone())
                .collect();
            let composition = chem::composition_of(&atoms);
            let centers = chem::central_atoms(&atoms).expect("bond components are connected");
            let gid = members[0];
            groups.push(MoleculeGroup {
                id: gid,
                record: self.table.molecule_lookup(&composition).cloned(),
                composition,
                centers: centers.ids,
                diatomic: centers.diatomic,
                blink_slot: previous.get(&gid).copied().flatten(),
                members,
            });
        }
        for d in self.droplets.values_mut() {
            d.molecule_id = None;
        }
        for g in &groups {
            for m in &g.members {
                self.droplets.get_mut(m).expect("member").molecule_id = Some(g.id);
            }
        }
        self.groups = groups;
    }

    /// One node per group (in group-id order); an edge joins two groups when
    /// any pair of their members is within sensing range. Returns the graph
    /// and the group id of each node.
    pub fn molecule_adjacency(&self) -> (Graph, Vec<u32>) {
        let ids: Vec<u32> = self.groups.iter().map(|g| g.id).collect();
        let r = self.config.sensing_radius;
        let pos: Vec<Vec<(f64, f64)>> = self
            .groups
            .iter()
            .map(|g| {
                g.members
                    .iter()
                    .map(|m| (self.droplets[m].x, self.droplets[m].y))
                    .collect()
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let near = pos[i]
                    .iter()
                    .any(|a| pos[j].iter().any(|b| (a.0 - b.0).hypot(a.1 - b.1) <= r));
                if near {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        let g = Graph::from_edges(ids.len(), edges).expect("pairs are distinct and in range");
        (g, ids)
    }

    fn recolor_if_changed(&mut self) {
        let (g, ids) = self.molecule_adjacency();
        let key = (
            ids.clone(),
            g.edges()
                .map(|(u, v)| (ids[u as usize], ids[v as usize]))
                .collect(),
        );
        if self.adjacency_key.as_ref() == Some(&key) {
            return;
        }
        self.adjacency_key = Some(key);
        // Capacity failures are recorded as events; groups keep old slots.
        let _ = self.assign_slots_on(&g);
    }

    /// Runs the coloring protocol over the molecule adjacency graph with a
    /// palette of `slot_count` slots. Groups whose previous slot is still
    /// conflict-free keep it and enter as pre-colored nodes.
    pub fn assign_blink_slots(&mut self) -> Result<(), SimError> {
        let (g, _) = self.molecule_adjacency();
        self.assign_slots_on(&g)
    }

    fn assign_slots_on(&mut self, g: &Graph) -> Result<(), SimError> {
        let slots = self.config.slot_count;
        let max_degree = g.max_vertex_degree();
        if max_degree >= slots as usize {
            self.events.push(SimEvent::SlotCapacityExceeded {
                tick: self.tick,
                max_degree,
                slots,
            });
            return Err(SimError::SlotCapacity { max_degree, slots });
        }
        let n = self.groups.len();
        let mut pre: Vec<Option<u32>> = vec![None; n];
        for i in 0..n {
            if let Some(s) = self.groups[i].blink_slot.filter(|&s| s < slots) {
                let clash = g
                    .neighbors(i as u32)
                    .expect("node in range")
                    .iter()
                    .any(|&j| pre[j as usize] == Some(s));
                if !clash {
                    pre[i] = Some(s);
                }
            }
        }
        self.epoch += 1;
        let state = ColoringState::init_with(g, Some(slots as usize), &pre)
            .expect("palette and precoloring validated above");
        let mut streams = NodeStreams::new(derive_seed(self.config.seed, self.epoch), n);
        let loss = LossModel::new(self.config.p_fail).expect("validated config");
        match coloring::complete(
            state,
            g,
            &mut streams,
            &loss,
            self.config.max_coloring_rounds,
        ) {
            Ok(done) => {
                for (group, slot) in self.groups.iter_mut().zip(&done.slots) {
                    group.blink_slot = Some(*slot);
                }
                self.events.push(SimEvent::Recolored {
                    tick: self.tick,
                    groups: n,
                    rounds: done.stats.rounds_to_completion,
                    palette_resets: done.stats.palette_resets,
                });
            }
            Err(ColoringError::NonConvergence {
                partial,
                colored,
                total,
                ..
            }) => {
                for (group, slot) in self.groups.iter_mut().zip(partial) {
                    group.blink_slot = slot;
                }
                self.events.push(SimEvent::ColoringIncomplete {
                    tick: self.tick,
                    colored,
                    total,
                });
            }
            Err(other) => unreachable!("coloring precondition violated: {other}"),
        }
        Ok(())
    }

    /// Droplets of group `g` blink at tick `t` iff
    /// `(t mod period) / ticks_per_slot == g.blink_slot`. Free droplets never
    /// blink; groups without a slot are reported separately.
    pub fn blinking_now(&self, t: u64) -> BlinkState {
        let tps = u64::from(self.config.ticks_per_slot);
        let current = ((t % self.config.blink_period()) / tps) as u32;
        let mut state = BlinkState::default();
        for g in &self.groups {
            match g.blink_slot {
                Some(s) if s == current => state.on.extend(&g.members),
                Some(_) => {}
                None => state.unassigned_groups.push(g.id),
            }
        }
        state
    }

    /// Like [`Arena::blinking_now`], recording a warning event for each
    /// group left out because it has no slot.
    pub fn blinking_now_logged(&mut self, t: u64) -> BTreeSet<u32> {
        let state = self.blinking_now(t);
        for group in state.unassigned_groups {
            self.events
                .push(SimEvent::UnassignedGroup { tick: t, group });
        }
        state.on
    }

    pub fn snapshot(&self) -> Snapshot {
        let on = self.blinking_now(self.tick).on;
        Snapshot {
            tick: self.tick,
            droplets: self
                .droplets
                .values()
                .map(|d| DropletView {
                    id: d.id,
                    symbol: d.atom.element.symbol.clone(),
                    x: d.x,
                    y: d.y,
                    molecule_id: d.molecule_id,
                    blinking: on.contains(&d.id),
                    bonds: d.atom.bonds.iter().map(|b| b.partner).collect(),
                })
                .collect(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupView {
                    id: g.id,
                    members: g.members.clone(),
                    centers: g.centers.clone(),
                    diatomic: g.diatomic,
                    slot: g.blink_slot,
                    formula: g.composition.to_string(),
                    geometry: g.record.as_ref().map(|r| r.geometry.clone()),
                    gibbs: g.record.as_ref().map(|r| r.gibbs_free_energy),
                })
                .collect(),
        }
    }
}

/// Heading and step length toward a target; `arrived` when the step lands
/// on it.
fn steer_toward(x: f64, y: f64, tx: f64, ty: f64, step: f64) -> (f64, f64, bool) {
    let dist = (tx - x).hypot(ty - y);
    let heading = (ty - y).atan2(tx - x);
    if dist <= step {
        (heading, dist, true)
    } else {
        (heading, step, false)
    }
}

/// Mirrors a coordinate back into `[0, limit]`.
fn reflect(v: f64, limit: f64) -> (f64, bool) {
    if v < 0.0 {
        ((-v).min(limit), true)
    } else if v > limit {
        ((2.0 * limit - v).max(0.0), true)
    } else {
        (v, false)
    }
}

/// Displacement along one axis for a rigid group: reversed if any member
/// would leave the arena, zero if reversing does not help either.
fn rigid_axis_delta(coords: &[f64], delta: f64, limit: f64) -> f64 {
    let fits = |d: f64| coords.iter().all(|c| (0.0..=limit).contains(&(c + d)));
    if fits(delta) {
        delta
    } else if fits(-delta) {
        -delta
    } else {
        0.0
    }
}
