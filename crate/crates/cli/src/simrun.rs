//! Batch simulation runs driven by a scenario and a command script.

use std::sync::Arc;

use blinkswarm_core::chem::ChemTable;
use blinkswarm_core::config::{Scenario, ScriptEntry};
use blinkswarm_core::sim::{Arena, SimEvent, Snapshot};

use crate::CliError;

#[derive(Debug, Default)]
pub struct SimOutputs {
    /// `tick,id,symbol,x,y,molecule_id,blinking`
    pub droplets_csv: Vec<u8>,
    /// `tick,group_id,formula,members,centers,diatomic,slot,geometry,gibbs`
    /// with space-separated id lists.
    pub groups_csv: Vec<u8>,
    /// One JSON snapshot per line.
    pub snapshots_jsonl: Vec<u8>,
    pub events: Vec<SimEvent>,
    /// Script commands the arena refused, with the step they were due at.
    pub rejected: Vec<(u64, String)>,
    pub last: Option<Snapshot>,
}

struct Recorder {
    droplets: csv::Writer<Vec<u8>>,
    groups: csv::Writer<Vec<u8>>,
    jsonl: Vec<u8>,
}

impl Recorder {
    fn new() -> Result<Self, CliError> {
        let mut droplets = csv::Writer::from_writer(Vec::new());
        droplets.write_record(["tick", "id", "symbol", "x", "y", "molecule_id", "blinking"])?;
        let mut groups = csv::Writer::from_writer(Vec::new());
        groups.write_record([
            "tick", "group_id", "formula", "members", "centers", "diatomic", "slot", "geometry",
            "gibbs",
        ])?;
        Ok(Recorder {
            droplets,
            groups,
            jsonl: Vec::new(),
        })
    }

    fn record(&mut self, s: &Snapshot) -> Result<(), CliError> {
        let opt = |v: Option<u32>| v.map_or_else(String::new, |x| x.to_string());
        let ids = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        for d in &s.droplets {
            self.droplets.write_record([
                s.tick.to_string(),
                d.id.to_string(),
                d.symbol.clone(),
                format!("{:.6}", d.x),
                format!("{:.6}", d.y),
                opt(d.molecule_id),
                u8::from(d.blinking).to_string(),
            ])?;
        }
        for g in &s.groups {
            self.groups.write_record([
                s.tick.to_string(),
                g.id.to_string(),
                g.formula.clone(),
                ids(&g.members),
                ids(&g.centers),
                u8::from(g.diatomic).to_string(),
                opt(g.slot),
                g.geometry.clone().unwrap_or_default(),
                g.gibbs.map_or_else(String::new, |x| format!("{x:.6}")),
            ])?;
        }
        serde_json::to_writer(&mut self.jsonl, s)?;
        self.jsonl.push(b'\n');
        Ok(())
    }
}

/// Runs `steps` runner steps. Commands due at step `s` are applied before
/// that step's snapshot is recorded; while paused the arena does not
/// advance and nothing is recorded.
pub fn run_sim(
    scenario: &Scenario,
    script: &[ScriptEntry],
    steps: u64,
    table: Arc<ChemTable>,
) -> Result<SimOutputs, CliError> {
    let mut arena: Arena = scenario
        .build(table)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut rec = Recorder::new()?;
    let mut out = SimOutputs::default();
    let mut pending = script.iter().peekable();
    for step in 0..steps {
        while let Some(entry) = pending.next_if(|e| e.tick <= step) {
            if let Err(e) = arena.apply_command(&entry.command) {
                out.rejected.push((step, e.to_string()));
            }
        }
        if arena.is_paused() {
            continue;
        }
        rec.record(&arena.snapshot())?;
        arena.tick();
    }
    out.last = Some(arena.snapshot());
    out.events = arena.take_events();
    out.droplets_csv = rec
        .droplets
        .into_inner()
        .map_err(|e| CliError::Other(e.to_string()))?;
    out.groups_csv = rec
        .groups
        .into_inner()
        .map_err(|e| CliError::Other(e.to_string()))?;
    out.snapshots_jsonl = rec.jsonl;
    Ok(out)
}
