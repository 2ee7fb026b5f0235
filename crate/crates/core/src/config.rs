//! Scenario files and timed command scripts.
//!
//! Scenario files are `key = value` lines grouped under `[arena]`,
//! `[chemistry]`, `[camera]` and `[droplets]` headers; `#` starts a comment.
//! The droplet section takes `atom = H 0.5 0.5` and `scatter = H 10` lines.
//!
//! Scripts hold one `<tick> <command> [args]` line each, for example
//! `40 add O 0.7 0.5` or `90 break 3`.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chem::ChemTable;
use crate::derive_seed;
use crate::observer::CameraConfig;
use crate::sim::{Arena, ArenaConfig, Command, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

fn num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .or_else(|_| err(line, format!("bad value for {key}: {value:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Atom {
        symbol: String,
        x: f64,
        y: f64,
    },
    /// Uniformly random positions inside the arena.
    Scatter {
        symbol: String,
        count: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub arena: ArenaConfig,
    pub camera: CameraConfig,
    /// Custom chemistry table; the built-in one is used when absent.
    pub table_path: Option<PathBuf>,
    pub placements: Vec<Placement>,
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut sc = Scenario::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                section = name.trim().to_owned();
                if !["arena", "chemistry", "camera", "droplets"].contains(&section.as_str()) {
                    return err(line, format!("unknown section [{section}]"));
                }
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return err(line, "expected `key = value`");
            };
            let (key, value) = (key.trim(), value.trim());
            sc.set(&section, key, value, line)?;
        }
        sc.arena.validate().or_else(|e| err(0, e.to_string()))?;
        sc.camera.validate().or_else(|e| err(0, e.to_string()))?;
        Ok(sc)
    }
}

impl Scenario {
    fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ConfigError> {
        let a = &mut self.arena;
        match (section, key) {
            ("arena", "width") => a.width = num(line, key, value)?,
            ("arena", "height") => a.height = num(line, key, value)?,
            ("arena", "sensing_radius") => a.sensing_radius = num(line, key, value)?,
            ("arena", "step_length") => a.step_length = num(line, key, value)?,
            ("arena", "heading_jitter") => a.heading_jitter = num(line, key, value)?,
            ("arena", "slot_count") => a.slot_count = num(line, key, value)?,
            ("arena", "ticks_per_slot") => a.ticks_per_slot = num(line, key, value)?,
            ("arena", "tick_ms") => a.tick_ms = num(line, key, value)?,
            ("arena", "seed") => a.seed = num(line, key, value)?,
            ("arena", "p_fail") => a.p_fail = num(line, key, value)?,
            ("arena", "max_coloring_rounds") => a.max_coloring_rounds = num(line, key, value)?,
            ("chemistry", "multi_bonds") => a.multi_bonds = num(line, key, value)?,
            ("chemistry", "table") => self.table_path = Some(PathBuf::from(value)),
            ("camera", "distance") => self.camera.distance = num(line, key, value)?,
            ("camera", "angle") => self.camera.angle = num(line, key, value)?,
            ("camera", "resolution") => self.camera.resolution = value.to_owned(),
            ("camera", "hue_tolerance") => self.camera.hue_tolerance = num(line, key, value)?,
            ("droplets", "atom") => {
                let f: Vec<&str> = value.split_whitespace().collect();
                let [symbol, x, y] = f[..] else {
                    return err(line, "atom takes `SYMBOL X Y`");
                };
                self.placements.push(Placement::Atom {
                    symbol: symbol.to_owned(),
                    x: num(line, "x", x)?,
                    y: num(line, "y", y)?,
                });
            }
            ("droplets", "scatter") => {
                let f: Vec<&str> = value.split_whitespace().collect();
                let [symbol, count] = f[..] else {
                    return err(line, "scatter takes `SYMBOL COUNT`");
                };
                self.placements.push(Placement::Scatter {
                    symbol: symbol.to_owned(),
                    count: num(line, "count", count)?,
                });
            }
            ("", _) => return err(line, "key outside of a section"),
            _ => return err(line, format!("unknown key `{key}` in [{section}]")),
        }
        Ok(())
    }

    pub fn load_table(&self) -> Result<ChemTable, SimError> {
        match &self.table_path {
            Some(p) => Ok(ChemTable::load(p)?),
            None => Ok(ChemTable::builtin()),
        }
    }

    /// Builds the arena and places its droplets. Scattered positions keep
    /// a sensing radius away from the walls.
    pub fn build(&self, table: Arc<ChemTable>) -> Result<Arena, SimError> {
        let mut arena = Arena::new(self.arena.clone(), table)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.arena.seed, 0x5ca7));
        let m = self
            .arena
            .sensing_radius
            .min(self.arena.width / 2.0)
            .min(self.arena.height / 2.0);
        for p in &self.placements {
            match p {
                Placement::Atom { symbol, x, y } => {
                    arena.add_atom(symbol, *x, *y)?;
                }
                Placement::Scatter { symbol, count } => {
                    for _ in 0..*count {
                        let x = rng.random_range(m..=self.arena.width - m);
                        let y = rng.random_range(m..=self.arena.height - m);
                        arena.add_atom(symbol, x, y)?;
                    }
                }
            }
        }
        arena.refresh();
        Ok(arena)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub tick: u64,
    pub command: Command,
}

/// Parses a whole script before anything runs, so a bad line rejects the
/// script. Entries come back ordered by tick, stable within a tick.
pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        let tick: u64 = num(line, "tick", f[0])?;
        let command = match f[1..] {
            ["add", symbol, x, y] => Command::AddAtom {
                symbol: symbol.to_owned(),
                x: num(line, "x", x)?,
                y: num(line, "y", y)?,
            },
            ["remove", id] => Command::RemoveDroplet {
                id: num(line, "id", id)?,
            },
            ["break", id] => Command::BreakMolecule {
                group_id: num(line, "group", id)?,
            },
            ["steer", id, x, y] => Command::Steer {
                id: num(line, "id", id)?,
                x: num(line, "x", x)?,
                y: num(line, "y", y)?,
            },
            ["pause"] => Command::Pause,
            ["resume"] => Command::Resume,
            ["step", n] => Command::Step {
                ticks: num(line, "ticks", n)?,
            },
            _ => return err(line, format!("unrecognized command: {body:?}")),
        };
        out.push(ScriptEntry { tick, command });
    }
    out.sort_by_key(|e| e.tick);
    Ok(out)
}
