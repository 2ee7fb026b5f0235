//! Virtual camera observer. Arena snapshots pass through a parametric
//! detection-noise channel; synchronously blinking droplets are then
//! clustered into molecule hypotheses.
//!
//! Detection probability factors into distance, visible-count and camera
//! angle terms, each fitted to the shape of the measured accuracy curves
//! rather than to tabulated values. Crowded scenes also misclassify elements
//! and smear the perceived blink timing, which is what delays molecule
//! recognition as droplet counts approach the detection limit.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{self, ChemTable, Composition};
use crate::sim::{Arena, Snapshot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("invalid camera config: {0}")]
    InvalidConfig(String),
    #[error("observation window spans {span} ticks, shorter than one blink period of {period}")]
    InsufficientWindow { span: u64, period: u64 },
    #[error("scene contains no molecules")]
    NoMolecules,
    #[error("molecule count not recognized within {cap} blink periods")]
    NonRecognition { cap: u32 },
    #[error("droplet {0} not found")]
    NotFound(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    /// Camera height above the arena, meters.
    pub distance: f64,
    /// Inclination from vertical, degrees (0 = bird's-eye).
    pub angle: f64,
    pub resolution: String,
    /// Degrees.
    pub hue_tolerance: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            distance: 0.3,
            angle: 0.0,
            resolution: "640x480".into(),
            hue_tolerance: 15.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), ObserverError> {
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(ObserverError::InvalidConfig(
                "distance must be positive".into(),
            ));
        }
        if !(0.0..=90.0).contains(&self.angle) {
            return Err(ObserverError::InvalidConfig(
                "angle must lie in [0, 90] degrees".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of the detection channel. The defaults are fits to the
/// qualitative shape of measured accuracy curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// When false every factor is 1 and observations are exact.
    pub enabled: bool,
    /// Logistic distance term: `floor + (1 - floor) / (1 + exp(k (d - mid)))`.
    pub distance_midpoint: f64,
    pub distance_steepness: f64,
    pub distance_floor: f64,
    /// Count term `1 - slope (n - 1)` up to `max_visible`, zero beyond.
    pub count_slope: f64,
    pub max_visible: u32,
    /// Angle term: `1 - angle_slope * a` up to the knee, then a linear drop
    /// to `angle_floor` at 90°.
    pub angle_knee: f64,
    pub angle_slope: f64,
    pub angle_floor: f64,
    /// Misclassification rate ramps linearly from 0 at `crowd_onset` to its
    /// ceiling at `crowd_full` visible droplets.
    pub misclass_ceiling: f64,
    /// Std. dev. (ticks) of perceived blink timing, ramping over the same
    /// crowding range.
    pub timing_jitter_max: f64,
    pub crowd_onset: u32,
    pub crowd_full: u32,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            enabled: true,
            distance_midpoint: 0.7,
            distance_steepness: 25.0,
            distance_floor: 0.05,
            count_slope: 0.015,
            max_visible: 20,
            angle_knee: 75.0,
            angle_slope: 0.001,
            angle_floor: 0.1,
            misclass_ceiling: 0.1,
            timing_jitter_max: 3.5,
            crowd_onset: 10,
            crowd_full: 18,
        }
    }
}

impl NoiseModel {
    pub fn identity() -> Self {
        NoiseModel {
            enabled: false,
            ..NoiseModel::default()
        }
    }

    pub fn distance_factor(&self, distance: f64) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        let logistic =
            1.0 / (1.0 + (self.distance_steepness * (distance - self.distance_midpoint)).exp());
        self.distance_floor + (1.0 - self.distance_floor) * logistic
    }

    pub fn count_factor(&self, n_visible: u32) -> f64 {
        if !self.enabled || n_visible == 0 {
            return 1.0;
        }
        if n_visible > self.max_visible {
            return 0.0;
        }
        (1.0 - self.count_slope * f64::from(n_visible - 1)).max(0.0)
    }

    pub fn angle_factor(&self, angle: f64) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        let at_knee = 1.0 - self.angle_slope * self.angle_knee;
        if angle <= self.angle_knee {
            1.0 - self.angle_slope * angle
        } else {
            let frac = ((angle - self.angle_knee) / (90.0 - self.angle_knee)).min(1.0);
            at_knee - (at_knee - self.angle_floor) * frac
        }
    }

    fn crowding(&self, n_visible: u32) -> f64 {
        if n_visible <= self.crowd_onset {
            0.0
        } else {
            let span = f64::from(self.crowd_full.saturating_sub(self.crowd_onset).max(1));
            (f64::from(n_visible - self.crowd_onset) / span).min(1.0)
        }
    }

    pub fn misclassification_rate(&self, n_visible: u32) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        self.misclass_ceiling * self.crowding(n_visible)
    }

    pub fn timing_jitter(&self, n_visible: u32) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        self.timing_jitter_max * self.crowding(n_visible)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub camera: CameraConfig,
    pub noise: NoiseModel,
}

impl ObserverConfig {
    pub fn noiseless() -> Self {
        ObserverConfig {
            camera: CameraConfig::default(),
            noise: NoiseModel::identity(),
        }
    }
}

/// Probability that a single droplet is detected and tracked in one frame.
pub fn detection_probability(cfg: &ObserverConfig, n_visible: u32) -> f64 {
    let noise = &cfg.noise;
    noise.distance_factor(cfg.camera.distance)
        * noise.count_factor(n_visible)
        * noise.angle_factor(cfg.camera.angle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u32,
    /// Observed element; may differ from the true one.
    pub symbol: String,
    pub blinking: bool,
    pub x: f64,
    pub y: f64,
    /// Perceived timing error of this sample, ticks.
    pub time_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub tick: u64,
    pub detections: Vec<Detection>,
}

/// Passes one snapshot through the noise channel.
///
/// Every droplet consumes the same fixed number of draws regardless of the
/// outcome, so frames taken with equal seeds under different camera
/// settings share their random numbers.
pub fn observe<R: Rng>(
    snapshot: &Snapshot,
    cfg: &ObserverConfig,
    table: &ChemTable,
    rng: &mut R,
) -> ObservationFrame {
    let n = snapshot.droplets.len() as u32;
    let p_detect = detection_probability(cfg, n);
    let p_mis = cfg.noise.misclassification_rate(n);
    let jitter = cfg.noise.timing_jitter(n);
    let symbols: Vec<&str> = table.elements().map(|e| e.symbol.as_str()).collect();
    let mut detections = Vec::new();
    for d in &snapshot.droplets {
        let u_detect: f64 = rng.random();
        let u_mis: f64 = rng.random();
        let u_pick: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        if u_detect >= p_detect {
            continue;
        }
        let others: Vec<&str> = symbols.iter().copied().filter(|s| *s != d.symbol).collect();
        let symbol = if u_mis < p_mis && !others.is_empty() {
            let i = ((u_pick * others.len() as f64) as usize).min(others.len() - 1);
            others[i].to_owned()
        } else {
            d.symbol.clone()
        };
        detections.push(Detection {
            id: d.id,
            symbol,
            blinking: d.blinking,
            x: d.x,
            y: d.y,
            time_offset: z * jitter,
        });
    }
    ObservationFrame {
        tick: snapshot.tick,
        detections,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeHypothesis {
    pub members: Vec<u32>,
    /// Blink slot shared by the members; `None` for droplets never seen
    /// blinking.
    pub slot: Option<u32>,
    pub centers: Vec<u32>,
    pub diatomic: bool,
    pub composition: Composition,
    pub confidence: f64,
}

impl MoleculeHypothesis {
    /// Droplets seen blinking belong to some molecule, even if their
    /// partners went unseen.
    pub fn is_molecule(&self) -> bool {
        self.slot.is_some()
    }
}

#[derive(Default)]
struct Track {
    blink_times: Vec<f64>,
    votes: BTreeMap<String, u32>,
    pos: (f64, f64),
    detections: u32,
}

/// Nearest slot to a phase within the period; on-interval of slot `s` spans
/// ticks `[s*tps, (s+1)*tps)`.
fn nearest_slot(phase: f64, period: u64, tps: u32) -> u32 {
    let slots = (period / u64::from(tps)) as i64;
    let center_offset = (f64::from(tps) - 1.0) / 2.0;
    let s = ((phase - center_offset) / f64::from(tps)).round() as i64;
    s.rem_euclid(slots) as u32
}

fn circular_phase(times: &[f64], period: u64) -> f64 {
    let p = period as f64;
    let (s, c) = times.iter().fold((0.0, 0.0), |(s, c), t| {
        let a = TAU * t.rem_euclid(p) / p;
        (s + a.sin(), c + a.cos())
    });
    if s == 0.0 && c == 0.0 {
        return times[0].rem_euclid(p);
    }
    (s.atan2(c).rem_euclid(TAU)) * p / TAU
}

/// Groups droplets whose observed blink phase bins to the same slot and
/// that are linked by chains of droplets within `link_radius`.
pub fn cluster_blinks(
    frames: &[ObservationFrame],
    period: u64,
    ticks_per_slot: u32,
    link_radius: f64,
    table: &ChemTable,
) -> Result<Vec<MoleculeHypothesis>, ObserverError> {
    let span = match (
        frames.iter().map(|f| f.tick).min(),
        frames.iter().map(|f| f.tick).max(),
    ) {
        (Some(lo), Some(hi)) => hi - lo + 1,
        _ => 0,
    };
    if span < period || ticks_per_slot == 0 || !period.is_multiple_of(u64::from(ticks_per_slot)) {
        return Err(ObserverError::InsufficientWindow { span, period });
    }
    let mut tracks: BTreeMap<u32, Track> = BTreeMap::new();
    for frame in frames {
        for d in &frame.detections {
            let t = tracks.entry(d.id).or_default();
            t.detections += 1;
            *t.votes.entry(d.symbol.clone()).or_default() += 1;
            t.pos = (d.x, d.y);
            if d.blinking {
                t.blink_times.push(frame.tick as f64 + d.time_offset);
            }
        }
    }

    let ids: Vec<u32> = tracks.keys().copied().collect();
    let slot_of: BTreeMap<u32, u32> = tracks
        .iter()
        .filter(|(_, t)| !t.blink_times.is_empty())
        .map(|(&id, t)| {
            (
                id,
                nearest_slot(
                    circular_phase(&t.blink_times, period),
                    period,
                    ticks_per_slot,
                ),
            )
        })
        .collect();

    // Union-find over blinking droplets sharing a slot and within range.
    let mut parent: BTreeMap<u32, u32> = slot_of.keys().map(|&id| (id, id)).collect();
    fn find(parent: &mut BTreeMap<u32, u32>, x: u32) -> u32 {
        let p = parent[&x];
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    let blinking: Vec<u32> = slot_of.keys().copied().collect();
    for (i, &a) in blinking.iter().enumerate() {
        for &b in &blinking[i + 1..] {
            let (pa, pb) = (tracks[&a].pos, tracks[&b].pos);
            if slot_of[&a] == slot_of[&b] && (pa.0 - pb.0).hypot(pa.1 - pb.1) <= link_radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent.insert(ra.max(rb), ra.min(rb));
                }
            }
        }
    }
    let mut clusters: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &id in &blinking {
        let root = find(&mut parent, id);
        clusters.entry(root).or_default().push(id);
    }

    let observed_symbol = |id: u32| -> String {
        let votes = &tracks[&id].votes;
        let best = votes.values().copied().max().unwrap_or(0);
        votes
            .iter()
            .find(|(_, &c)| c == best)
            .map(|(s, _)| s.clone())
            .unwrap_or_default()
    };
    let frame_count = frames.len() as f64;
    let mut out = Vec::new();
    let mut build = |members: Vec<u32>, slot: Option<u32>| {
        let symbols: Vec<(u32, String)> =
            members.iter().map(|&m| (m, observed_symbol(m))).collect();
        let composition: Composition = symbols.iter().map(|(_, s)| s.as_str()).collect();
        let elements: Vec<(u32, &chem::Element)> = symbols
            .iter()
            .filter_map(|(m, s)| table.element(s).ok().map(|e| (*m, e)))
            .collect();
        let centers = chem::most_electronegative(elements);
        let confidence = match slot {
            Some(s) => {
                let (agree, total) = members.iter().fold((0usize, 0usize), |(a, n), m| {
                    let times = &tracks[m].blink_times;
                    let ok = times
                        .iter()
                        .filter(|&&t| {
                            nearest_slot(t.rem_euclid(period as f64), period, ticks_per_slot) == s
                        })
                        .count();
                    (a + ok, n + times.len())
                });
                agree as f64 / total as f64
            }
            None => f64::from(tracks[&members[0]].detections) / frame_count,
        };
        out.push(MoleculeHypothesis {
            members,
            slot,
            centers: centers.ids,
            diatomic: centers.diatomic,
            composition,
            confidence,
        });
    };
    for members in clusters.into_values() {
        let slot = slot_of[&members[0]];
        build(members, Some(slot));
    }
    for id in ids.into_iter().filter(|id| !slot_of.contains_key(id)) {
        build(vec![id], None);
    }
    out.sort_by_key(|h| h.members[0]);
    Ok(out)
}

/// Default cap on observed blink periods.
pub const DEFAULT_RECOGNITION_CAP: u32 = 20;

/// Observes the running arena one blink period at a time and returns the
/// first period count after which the molecule-hypothesis count matches
/// the true molecule count and still matches one period later.
pub fn rounds_until_recognized(
    arena: &mut Arena,
    cfg: &ObserverConfig,
    seed: u64,
    cap: u32,
) -> Result<u32, ObserverError> {
    cfg.camera.validate()?;
    if arena.groups().is_empty() {
        return Err(ObserverError::NoMolecules);
    }
    let period = arena.config().blink_period();
    let tps = arena.config().ticks_per_slot;
    let radius = arena.config().sensing_radius;
    let table = arena.table().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut previous_ok = false;
    for k in 1..=cap + 1 {
        for _ in 0..period {
            frames.push(observe(&arena.snapshot(), cfg, &table, &mut rng));
            arena.tick();
        }
        let hypotheses = cluster_blinks(&frames, period, tps, radius, &table)?;
        let seen = hypotheses.iter().filter(|h| h.is_molecule()).count();
        let ok = seen == arena.groups().len();
        if previous_ok && ok {
            return Ok(k - 1);
        }
        previous_ok = ok;
    }
    Err(ObserverError::NonRecognition { cap })
}

/// Hidden per-droplet information shown when a droplet is tapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletInfo {
    pub id: u32,
    pub symbol: String,
    pub atomic_number: u32,
    pub atomic_mass: f64,
    pub electronegativity: f64,
    pub bond_status: String,
    pub bonds: Vec<u32>,
    pub molecule_id: Option<u32>,
    pub formula: Option<String>,
    pub geometry: Option<String>,
    pub gibbs: Option<f64>,
}

pub fn query_droplet(
    snapshot: &Snapshot,
    table: &ChemTable,
    id: u32,
) -> Result<DropletInfo, ObserverError> {
    let d = snapshot.droplet(id).ok_or(ObserverError::NotFound(id))?;
    let el = table
        .element(&d.symbol)
        .map_err(|_| ObserverError::NotFound(id))?;
    let group = d.molecule_id.and_then(|g| snapshot.group(g));
    Ok(DropletInfo {
        id,
        symbol: d.symbol.clone(),
        atomic_number: el.atomic_number,
        atomic_mass: el.atomic_mass,
        electronegativity: el.electronegativity,
        bond_status: if d.bonds.is_empty() { "free" } else { "bonded" }.into(),
        bonds: d.bonds.clone(),
        molecule_id: d.molecule_id,
        formula: group.map(|g| g.formula.clone()),
        geometry: group.and_then(|g| g.geometry.clone()),
        gibbs: group.and_then(|g| g.gibbs),
    })
}

/// True molecule partition of a snapshot, as sorted member lists.
pub fn true_partition(snapshot: &Snapshot) -> BTreeSet<Vec<u32>> {
    snapshot.groups.iter().map(|g| g.members.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ArenaConfig, DropletView, GroupView};

    fn snap(n: usize) -> Snapshot {
        Snapshot {
            tick: 0,
            droplets: (0..n as u32)
                .map(|id| DropletView {
                    id,
                    symbol: "H".into(),
                    x: 0.1 * f64::from(id),
                    y: 0.5,
                    molecule_id: None,
                    blinking: false,
                    bonds: vec![],
                })
                .collect(),
            groups: vec![],
        }
    }

    #[test]
    fn anchors() {
        let cfg = ObserverConfig::default();
        let close = ObserverConfig {
            camera: CameraConfig {
                distance: 0.3,
                angle: 0.0,
                ..CameraConfig::default()
            },
            ..cfg.clone()
        };
        assert!(detection_probability(&close, 5) >= 0.9);
        let n = &close.noise;
        assert_eq!(
            detection_probability(&close, 0),
            n.distance_factor(0.3) * n.angle_factor(0.0)
        );
        for d in [0.1, 0.5, 1.0] {
            for a in [0.0, 45.0, 90.0] {
                let c = ObserverConfig {
                    camera: CameraConfig {
                        distance: d,
                        angle: a,
                        ..CameraConfig::default()
                    },
                    ..cfg.clone()
                };
                assert_eq!(detection_probability(&c, 21), 0.0);
            }
        }
        assert!(n.distance_factor(0.6) >= 0.9);
        assert!(n.distance_factor(1.0) <= 0.2);
        assert!((n.count_factor(20) - 0.715).abs() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        assert!(CameraConfig::default().validate().is_ok());
        assert!(CameraConfig {
            distance: 0.0,
            ..CameraConfig::default()
        }
        .validate()
        .is_err());
        assert!(CameraConfig {
            angle: 91.0,
            ..CameraConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn identity_channel_is_exact() {
        let table = ChemTable::builtin();
        let s = snap(15);
        let frame = observe(
            &s,
            &ObserverConfig::noiseless(),
            &table,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(frame.detections.len(), 15);
        assert!(frame
            .detections
            .iter()
            .all(|d| d.symbol == "H" && d.time_offset == 0.0));
    }

    #[test]
    fn crowded_scene_is_invisible() {
        let table = ChemTable::builtin();
        let frame = observe(
            &snap(21),
            &ObserverConfig::default(),
            &table,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(frame.detections.is_empty());
    }

    #[test]
    fn slot_binning() {
        assert_eq!(nearest_slot(2.0, 30, 5), 0);
        assert_eq!(nearest_slot(4.4, 30, 5), 0);
        assert_eq!(nearest_slot(4.6, 30, 5), 1);
        assert_eq!(nearest_slot(29.0, 30, 5), 5);
        assert_eq!(nearest_slot(29.9, 30, 5), 0);
        assert!((circular_phase(&[29.0, 31.0], 30) - 0.0).abs() < 1e-9);
    }

    #[test]
    fn short_window_rejected() {
        let frames: Vec<ObservationFrame> = (0..10)
            .map(|t| ObservationFrame {
                tick: t,
                detections: vec![],
            })
            .collect();
        let err = cluster_blinks(&frames, 30, 5, 0.05, &ChemTable::builtin()).unwrap_err();
        assert_eq!(
            err,
            ObserverError::InsufficientWindow {
                span: 10,
                period: 30
            }
        );
    }

    #[test]
    fn unbonded_droplets_are_singletons() {
        let table = ChemTable::builtin();
        let s = snap(4);
        let frames: Vec<ObservationFrame> = (0..30)
            .map(|t| {
                let mut f = observe(
                    &s,
                    &ObserverConfig::noiseless(),
                    &table,
                    &mut ChaCha8Rng::seed_from_u64(t),
                );
                f.tick = t;
                f
            })
            .collect();
        let hyps = cluster_blinks(&frames, 30, 5, 0.05, &table).unwrap();
        assert_eq!(hyps.len(), 4);
        assert!(hyps
            .iter()
            .all(|h| h.members.len() == 1 && !h.is_molecule()));
    }

    #[test]
    fn query_examples() {
        let table = ChemTable::builtin();
        let mut arena = Arena::new(
            ArenaConfig {
                step_length: 0.0,
                ..ArenaConfig::default()
            },
            std::sync::Arc::new(table.clone()),
        )
        .unwrap();
        let o = arena.add_atom("O", 0.5, 0.5).unwrap();
        let h1 = arena.add_atom("H", 0.53, 0.5).unwrap();
        let h2 = arena.add_atom("H", 0.47, 0.5).unwrap();
        let lone = arena.add_atom("H", 1.0, 0.5).unwrap();
        arena.bond_pair(o, h1).unwrap();
        arena.bond_pair(o, h2).unwrap();
        let s = arena.snapshot();

        let h = query_droplet(&s, &table, lone).unwrap();
        assert_eq!((h.atomic_number, h.electronegativity), (1, 2.20));
        assert_eq!(h.bond_status, "free");

        let info = query_droplet(&s, &table, o).unwrap();
        assert_eq!(info.bond_status, "bonded");
        assert_eq!(info.geometry.as_deref(), Some("bent"));
        assert_eq!(info.gibbs, Some(-237.1));
        assert_eq!(info.formula.as_deref(), Some("H2O"));

        assert_eq!(
            query_droplet(&s, &table, 999),
            Err(ObserverError::NotFound(999))
        );
        let _ = GroupView::clone(&s.groups[0]);
    }

    #[test]
    fn no_molecules_is_an_error() {
        let mut arena = Arena::new(
            ArenaConfig::default(),
            std::sync::Arc::new(ChemTable::builtin()),
        )
        .unwrap();
        arena.add_atom("H", 0.5, 0.5).unwrap();
        assert_eq!(
            rounds_until_recognized(&mut arena, &ObserverConfig::noiseless(), 0, 20),
            Err(ObserverError::NoMolecules)
        );
    }
}
