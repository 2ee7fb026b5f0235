//! Prebuilt arenas for benchmarks and tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::ChemTable;
use crate::sim::{Arena, ArenaConfig, SimError};

/// Member offsets from the molecule centre; the first entry is the centre
/// atom and every other member bonds to it.
struct Template {
    atoms: &'static [(&'static str, f64, f64)],
}

const WATER: Template = Template {
    atoms: &[("O", 0.0, 0.0), ("H", 0.03, 0.0), ("H", -0.03, 0.0)],
};
const METHANE: Template = Template {
    atoms: &[
        ("C", 0.0, 0.0),
        ("H", 0.03, 0.0),
        ("H", -0.03, 0.0),
        ("H", 0.0, 0.03),
        ("H", 0.0, -0.03),
    ],
};
const HYDROGEN: Template = Template {
    atoms: &[("H", -0.02, 0.0), ("H", 0.02, 0.0)],
};
const OXYGEN: Template = Template {
    atoms: &[("O", -0.02, 0.0), ("O", 0.02, 0.0)],
};

const CYCLE: [&Template; 4] = [&WATER, &METHANE, &HYDROGEN, &OXYGEN];

/// Distance between neighbouring molecule centres. Orthogonal neighbours
/// can sense each other, diagonal ones cannot, so no molecule has more than
/// four neighbours.
pub const GRID_SPACING: f64 = 0.085;
const GRID_COLUMNS: usize = 4;
const GRID_ORIGIN: (f64, f64) = (0.3, 0.3);

/// Static arena holding exactly `n_droplets` droplets arranged as complete
/// molecules on a grid. A single leftover droplet becomes a free hydrogen
/// placed away from the grid.
pub fn molecule_grid(
    n_droplets: usize,
    config: ArenaConfig,
    table: Arc<ChemTable>,
) -> Result<Arena, SimError> {
    let mut arena = Arena::new(
        ArenaConfig {
            step_length: 0.0,
            heading_jitter: 0.0,
            ..config
        },
        table,
    )?;
    let mut remaining = n_droplets;
    let mut next = 0;
    let mut placed = 0;
    while remaining >= 2 {
        let t = CYCLE[next % CYCLE.len()];
        next += 1;
        let size = t.atoms.len();
        if size > remaining || remaining - size == 1 {
            continue;
        }
        let (col, row) = (placed % GRID_COLUMNS, placed / GRID_COLUMNS);
        let cx = GRID_ORIGIN.0 + col as f64 * GRID_SPACING;
        let cy = GRID_ORIGIN.1 + row as f64 * GRID_SPACING;
        let ids = t
            .atoms
            .iter()
            .map(|(sym, dx, dy)| arena.add_atom(sym, cx + dx, cy + dy))
            .collect::<Result<Vec<_>, _>>()?;
        for &member in &ids[1..] {
            arena.bond_pair(ids[0], member)?;
        }
        placed += 1;
        remaining -= size;
    }
    if remaining == 1 {
        arena.add_atom("H", 0.1, 0.9)?;
    }
    arena.refresh();
    Ok(arena)
}

/// Static arena of `n` random atoms dropped into a small square and left to
/// bond until nothing changes for a full blink period. Returns `None` when
/// the resulting molecule graph needs more slots than the arena has.
pub fn settled_random_scene(
    n: usize,
    seed: u64,
    config: ArenaConfig,
    table: Arc<ChemTable>,
) -> Result<Option<Arena>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arena = Arena::new(
        ArenaConfig {
            step_length: 0.0,
            heading_jitter: 0.0,
            seed,
            ..config
        },
        table,
    )?;
    let symbols = ["H", "H", "H", "O", "C"];
    let side = 0.04 * (n as f64).sqrt().max(1.0);
    let (ox, oy) = (0.5, 0.4);
    for _ in 0..n {
        let sym = symbols[rng.random_range(0..symbols.len())];
        let (x, y) = (
            ox + rng.random::<f64>() * side,
            oy + rng.random::<f64>() * side,
        );
        arena.add_atom(sym, x, y)?;
    }
    let period = arena.config().blink_period();
    let mut quiet = 0;
    let mut last = bond_count(&arena);
    while quiet < period {
        arena.tick();
        let now = bond_count(&arena);
        quiet = if now == last { quiet + 1 } else { 0 };
        last = now;
    }
    let (g, _) = arena.molecule_adjacency();
    if g.max_vertex_degree() >= arena.config().slot_count as usize {
        return Ok(None);
    }
    Ok(Some(arena))
}

fn bond_count(arena: &Arena) -> usize {
    arena.droplets().map(|d| d.atom.bonds.len()).sum()
}
