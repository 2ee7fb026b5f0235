//! Synchronous randomized (Δ+1)-coloring with per-link message loss.
//!
//! Every round each uncolored node draws a tentative slot from its palette
//! and announces it to its neighbors; colored nodes beacon their fixed slot
//! until every neighbor has cached it. A node commits its tentative slot when
//! it heard from every neighbor this round and none of them announced (or is
//! known to hold) the same slot. On a conflict the slot is dropped from the
//! node's palette; an exhausted palette is refilled with every slot not known
//! to be held by a colored neighbor.
//!
//! Randomness comes from per-node streams split off a single seed, so a
//! round's outcome does not depend on the order nodes are visited in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, RngSeed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColoringError {
    #[error("palette of {given} slots is too small, need at least {required} (max degree + 1)")]
    InsufficientPalette { required: usize, given: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pre-colored nodes {0} and {1} are adjacent and share a slot")]
    PrecoloredConflict(u32, u32),
    #[error("coloring already complete")]
    AlreadyComplete,
    #[error("no convergence within {max_rounds} rounds ({colored} of {total} nodes colored)")]
    NonConvergence {
        max_rounds: u32,
        colored: usize,
        total: usize,
        partial: Vec<Option<u32>>,
        stats: RoundStats,
    },
    #[error("assignment is incomplete at node {node}")]
    IncompleteAssignment { node: u32 },
}

/// Independent per-directed-link announcement loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossModel {
    p_fail: f64,
}

impl LossModel {
    pub const LOSSLESS: LossModel = LossModel { p_fail: 0.0 };

    pub fn new(p_fail: f64) -> Result<Self, ColoringError> {
        if !(0.0..=1.0).contains(&p_fail) {
            return Err(ColoringError::InvalidParameter(format!(
                "p_fail {p_fail} outside [0, 1]"
            )));
        }
        Ok(LossModel { p_fail })
    }

    pub fn p_fail(&self) -> f64 {
        self.p_fail
    }
}

/// Per-node random streams: one for slot picks, one for link losses on the
/// node's inbound side.
#[derive(Debug, Clone)]
pub struct NodeStreams {
    picks: Vec<ChaCha8Rng>,
    losses: Vec<ChaCha8Rng>,
}

impl NodeStreams {
    pub fn new(seed: RngSeed, node_count: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let stream = |id: u64| {
            let mut rng = base.clone();
            rng.set_stream(id);
            rng
        };
        NodeStreams {
            picks: (0..node_count as u64).map(|v| stream(2 * v)).collect(),
            losses: (0..node_count as u64).map(|v| stream(2 * v + 1)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// Sorted candidate slots.
    pub palette: Vec<u32>,
    pub tentative: Option<u32>,
    pub fixed: Option<u32>,
    /// Set when at least one of this node's announcements was lost in the
    /// last round; the node re-announces next round.
    pub pending_resend: bool,
    /// Cached fixed slots of neighbors, aligned with the sorted adjacency.
    known_fixed: Vec<Option<u32>>,
}

impl NodeState {
    /// Fixed slots of colored neighbors this node has heard about.
    pub fn known_neighbor_slots(&self) -> impl Iterator<Item = u32> + '_ {
        self.known_fixed.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundStats {
    pub rounds_to_completion: u32,
    /// Colored-node count after each executed round.
    pub colored_per_round: Vec<usize>,
    pub palette_resets: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColoringState {
    pub nodes: Vec<NodeState>,
    pub round: u32,
    pub num_colored: usize,
    pub palette_size: usize,
    pub palette_resets: u32,
    colored_per_round: Vec<usize>,
}

impl ColoringState {
    /// Every node uncolored with the full palette `{0..palette_size}`.
    /// Without an override the palette holds Δ+1 slots.
    pub fn init(g: &Graph, palette_size: Option<usize>) -> Result<Self, ColoringError> {
        Self::init_with(g, palette_size, &[])
    }

    /// Like [`ColoringState::init`], but nodes with `Some(slot)` in
    /// `precolored` start fixed. Precolored slots must be in range and
    /// conflict-free.
    pub fn init_with(
        g: &Graph,
        palette_size: Option<usize>,
        precolored: &[Option<u32>],
    ) -> Result<Self, ColoringError> {
        let required = g.max_vertex_degree() + 1;
        let palette_size = palette_size.unwrap_or(required);
        if palette_size < required {
            return Err(ColoringError::InsufficientPalette {
                required,
                given: palette_size,
            });
        }
        let n = g.node_count();
        if !precolored.is_empty() && precolored.len() != n {
            return Err(ColoringError::InvalidParameter(format!(
                "precolored has {} entries for {n} nodes",
                precolored.len()
            )));
        }
        let slot_of = |v: usize| precolored.get(v).copied().flatten();
        for (u, v) in g.edges() {
            if let (Some(a), Some(b)) = (slot_of(u as usize), slot_of(v as usize)) {
                if a == b {
                    return Err(ColoringError::PrecoloredConflict(u, v));
                }
            }
        }
        let full: Vec<u32> = (0..palette_size as u32).collect();
        let mut num_colored = 0;
        let mut nodes = Vec::with_capacity(n);
        for (v, neighbors) in g.adjacency().iter().enumerate() {
            let fixed = slot_of(v);
            if let Some(slot) = fixed {
                if slot as usize >= palette_size {
                    return Err(ColoringError::InvalidParameter(format!(
                        "precolored slot {slot} of node {v} outside palette of {palette_size}"
                    )));
                }
                num_colored += 1;
            }
            nodes.push(NodeState {
                palette: full.clone(),
                tentative: None,
                fixed,
                pending_resend: false,
                known_fixed: vec![None; neighbors.len()],
            });
        }
        Ok(ColoringState {
            nodes,
            round: 0,
            num_colored,
            palette_size,
            palette_resets: 0,
            colored_per_round: Vec::new(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.num_colored == self.nodes.len()
    }

    pub fn assignment(&self) -> Vec<Option<u32>> {
        self.nodes.iter().map(|n| n.fixed).collect()
    }

    pub fn stats(&self) -> RoundStats {
        RoundStats {
            rounds_to_completion: self.round,
            colored_per_round: self.colored_per_round.clone(),
            palette_resets: self.palette_resets,
        }
    }
}

/// Outcome of one node's round, computed from the state at round start.
struct Decision {
    conflict: bool,
    missing: bool,
    /// Neighbor indices whose fixed slot arrived this round.
    learned: Vec<(usize, u32)>,
    /// Neighbor indices whose announcement was dropped.
    dropped_from: Vec<u32>,
}

/// Executes one synchronous round.
pub fn step_round(
    state: &mut ColoringState,
    g: &Graph,
    rng: &mut NodeStreams,
    loss: &LossModel,
) -> Result<(), ColoringError> {
    if state.is_complete() {
        return Err(ColoringError::AlreadyComplete);
    }
    let n = state.nodes.len();
    if g.node_count() != n || rng.picks.len() != n {
        return Err(ColoringError::InvalidParameter(
            "graph, state and random streams disagree on node count".into(),
        ));
    }

    for (v, node) in state.nodes.iter_mut().enumerate() {
        if node.fixed.is_none() {
            let i = rng.picks[v].random_range(0..node.palette.len());
            node.tentative = Some(node.palette[i]);
        }
    }

    let adjacency = g.adjacency();
    let nodes = &state.nodes;
    let decisions: Vec<Option<Decision>> = (0..n)
        .map(|v| {
            let me = &nodes[v];
            let mine = me.tentative.filter(|_| me.fixed.is_none())?;
            let stream = &mut rng.losses[v];
            let mut d = Decision {
                conflict: false,
                missing: false,
                learned: Vec::new(),
                dropped_from: Vec::new(),
            };
            for (j, &u) in adjacency[v].iter().enumerate() {
                let sender = &nodes[u as usize];
                let heard = match (sender.fixed, me.known_fixed[j]) {
                    (_, Some(cached)) => Some(cached),
                    (fixed, None) => {
                        let delivered = loss.p_fail == 0.0 || stream.random::<f64>() >= loss.p_fail;
                        if !delivered {
                            d.dropped_from.push(u);
                            None
                        } else {
                            if let Some(slot) = fixed {
                                d.learned.push((j, slot));
                            }
                            fixed.or(sender.tentative)
                        }
                    }
                };
                match heard {
                    Some(slot) if slot == mine => d.conflict = true,
                    Some(_) => {}
                    None => d.missing = true,
                }
            }
            Some(d)
        })
        .collect();

    for node in &mut state.nodes {
        node.pending_resend = false;
    }
    let mut newly_fixed = 0;
    for (v, decision) in decisions.into_iter().enumerate() {
        let Some(d) = decision else { continue };
        for u in &d.dropped_from {
            state.nodes[*u as usize].pending_resend = true;
        }
        let node = &mut state.nodes[v];
        for (j, slot) in d.learned {
            node.known_fixed[j] = Some(slot);
        }
        let mine = node.tentative.expect("uncolored node picked this round");
        if d.conflict {
            node.palette.retain(|&s| s != mine);
            if node.palette.is_empty() {
                let taken: Vec<u32> = node.known_neighbor_slots().collect();
                node.palette = (0..state.palette_size as u32)
                    .filter(|s| !taken.contains(s))
                    .collect();
                state.palette_resets += 1;
            }
        } else if !d.missing {
            node.fixed = Some(mine);
            newly_fixed += 1;
        }
    }
    state.num_colored += newly_fixed;
    state.round += 1;
    state.colored_per_round.push(state.num_colored);
    Ok(())
}

/// Completed coloring: one slot per node plus round statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    pub slots: Vec<u32>,
    pub stats: RoundStats,
}

/// Runs rounds from `state` until every node is colored.
pub fn complete(
    mut state: ColoringState,
    g: &Graph,
    rng: &mut NodeStreams,
    loss: &LossModel,
    max_rounds: u32,
) -> Result<Coloring, ColoringError> {
    if max_rounds == 0 {
        return Err(ColoringError::InvalidParameter(
            "max_rounds must be >= 1".into(),
        ));
    }
    while !state.is_complete() {
        if state.round >= max_rounds {
            return Err(ColoringError::NonConvergence {
                max_rounds,
                colored: state.num_colored,
                total: state.nodes.len(),
                partial: state.assignment(),
                stats: state.stats(),
            });
        }
        step_round(&mut state, g, rng, loss)?;
    }
    let slots = state
        .nodes
        .iter()
        .map(|n| n.fixed.expect("complete state"))
        .collect();
    Ok(Coloring {
        slots,
        stats: state.stats(),
    })
}

/// Colors `g` with a Δ+1 palette.
pub fn run_to_completion(
    g: &Graph,
    rng: &mut NodeStreams,
    loss: &LossModel,
    max_rounds: u32,
) -> Result<Coloring, ColoringError> {
    complete(ColoringState::init(g, None)?, g, rng, loss, max_rounds)
}

/// True iff no edge joins two nodes with the same slot.
pub fn verify_coloring(g: &Graph, assignment: &[Option<u32>]) -> Result<bool, ColoringError> {
    if let Some(node) =
        (0..g.node_count()).find(|&v| assignment.get(v).copied().flatten().is_none())
    {
        return Err(ColoringError::IncompleteAssignment { node: node as u32 });
    }
    Ok(g.edges()
        .all(|(u, v)| assignment[u as usize] != assignment[v as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2() -> Graph {
        Graph::from_edges(2, [(0, 1)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn init_uses_delta_plus_one_palette() {
        let st = ColoringState::init(&triangle(), None).unwrap();
        assert_eq!(st.palette_size, 3);
        assert!(st.nodes.iter().all(|n| n.palette == vec![0, 1, 2]));
        assert_eq!(st.round, 0);
        assert_eq!(st.num_colored, 0);

        let single = ColoringState::init(&Graph::empty(1), None).unwrap();
        assert_eq!(single.nodes[0].palette, vec![0]);
    }

    #[test]
    fn init_rejects_small_palette() {
        let star = Graph::from_edges(6, (1..6).map(|l| (0, l))).unwrap();
        assert_eq!(
            ColoringState::init(&star, Some(4)),
            Err(ColoringError::InsufficientPalette {
                required: 6,
                given: 4
            })
        );
        assert!(ColoringState::init(&star, Some(6)).is_ok());
    }

    #[test]
    fn precolored_validation() {
        let g = k2();
        assert_eq!(
            ColoringState::init_with(&g, None, &[Some(1), Some(1)]),
            Err(ColoringError::PrecoloredConflict(0, 1))
        );
        assert!(ColoringState::init_with(&g, None, &[Some(5), None]).is_err());
        let st = ColoringState::init_with(&g, Some(4), &[Some(3), None]).unwrap();
        assert_eq!(st.num_colored, 1);
    }

    #[test]
    fn single_node_fixes_in_one_round() {
        let g = Graph::empty(1);
        let mut st = ColoringState::init(&g, None).unwrap();
        step_round(
            &mut st,
            &g,
            &mut NodeStreams::new(7, 1),
            &LossModel::LOSSLESS,
        )
        .unwrap();
        assert_eq!(st.nodes[0].fixed, Some(0));
        assert_eq!(st.round, 1);
        assert_eq!(
            step_round(
                &mut st,
                &g,
                &mut NodeStreams::new(7, 1),
                &LossModel::LOSSLESS
            ),
            Err(ColoringError::AlreadyComplete)
        );
    }

    /// Scans seeds for a first round on K2 with the requested relation
    /// between the two picks.
    fn first_round_on_k2(want_equal: bool) -> ColoringState {
        let g = k2();
        for seed in 0..1000 {
            let mut st = ColoringState::init(&g, None).unwrap();
            step_round(
                &mut st,
                &g,
                &mut NodeStreams::new(seed, 2),
                &LossModel::LOSSLESS,
            )
            .unwrap();
            if (st.nodes[0].tentative == st.nodes[1].tentative) == want_equal {
                return st;
            }
        }
        panic!("no seed produced the wanted first round");
    }

    #[test]
    fn distinct_picks_both_fix() {
        let st = first_round_on_k2(false);
        assert_eq!(st.nodes[0].fixed, st.nodes[0].tentative);
        assert_eq!(st.nodes[1].fixed, st.nodes[1].tentative);
        assert_eq!(st.num_colored, 2);
    }

    #[test]
    fn equal_picks_both_drop_the_slot() {
        let st = first_round_on_k2(true);
        let slot = st.nodes[0].tentative.unwrap();
        for node in &st.nodes {
            assert_eq!(node.fixed, None);
            assert!(!node.palette.contains(&slot));
            assert_eq!(node.palette.len(), 1);
        }
        assert_eq!(st.num_colored, 0);
    }

    #[test]
    fn exhausted_palette_resets_around_known_slots() {
        // Path 0-1-2 with node 0 pre-colored 0 and a 3-slot palette; force
        // node 1's palette down to a single slot and make it collide.
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let mut st = ColoringState::init_with(&g, Some(3), &[Some(0), None, None]).unwrap();
        st.nodes[1].palette = vec![2];
        st.nodes[2].palette = vec![2];
        st.nodes[1].known_fixed[0] = Some(0);
        step_round(
            &mut st,
            &g,
            &mut NodeStreams::new(11, 3),
            &LossModel::LOSSLESS,
        )
        .unwrap();
        assert_eq!(st.palette_resets, 2);
        assert_eq!(st.nodes[1].palette, vec![1, 2]);
        assert_eq!(st.nodes[2].palette, vec![0, 1, 2]);
    }

    #[test]
    fn full_loss_never_fixes_a_node_with_neighbors() {
        let g = triangle();
        let loss = LossModel::new(1.0).unwrap();
        let err = run_to_completion(&g, &mut NodeStreams::new(3, 3), &loss, 25).unwrap_err();
        match err {
            ColoringError::NonConvergence {
                colored, partial, ..
            } => {
                assert_eq!(colored, 0);
                assert!(partial.iter().all(Option::is_none));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lost_announcements_mark_the_sender() {
        let g = k2();
        let loss = LossModel::new(1.0).unwrap();
        let mut st = ColoringState::init(&g, None).unwrap();
        step_round(&mut st, &g, &mut NodeStreams::new(1, 2), &loss).unwrap();
        assert!(st.nodes.iter().all(|n| n.pending_resend));
    }

    #[test]
    fn max_rounds_zero_rejected() {
        assert!(matches!(
            run_to_completion(
                &triangle(),
                &mut NodeStreams::new(0, 3),
                &LossModel::LOSSLESS,
                0
            ),
            Err(ColoringError::InvalidParameter(_))
        ));
    }

    #[test]
    fn one_round_on_triangle_usually_fails() {
        let trials = 4000;
        let failures = (0..trials)
            .filter(|&seed| {
                run_to_completion(
                    &triangle(),
                    &mut NodeStreams::new(seed, 3),
                    &LossModel::LOSSLESS,
                    1,
                )
                .is_err()
            })
            .count();
        // One round succeeds only if all three picks differ: 3!/27.
        let rate = failures as f64 / trials as f64;
        assert!((rate - 21.0 / 27.0).abs() < 0.03, "{rate}");
    }

    #[test]
    fn verify_examples() {
        let tri = triangle();
        assert!(verify_coloring(&tri, &[Some(0), Some(1), Some(2)]).unwrap());
        assert!(!verify_coloring(&k2(), &[Some(1), Some(1)]).unwrap());
        assert_eq!(
            verify_coloring(&tri, &[Some(0), None, Some(2)]),
            Err(ColoringError::IncompleteAssignment { node: 1 })
        );
        assert_eq!(
            verify_coloring(&tri, &[Some(0)]),
            Err(ColoringError::IncompleteAssignment { node: 1 })
        );
    }

    #[test]
    fn loss_model_range() {
        assert!(LossModel::new(-0.1).is_err());
        assert!(LossModel::new(1.5).is_err());
        assert_eq!(LossModel::new(0.25).unwrap().p_fail(), 0.25);
    }
}
