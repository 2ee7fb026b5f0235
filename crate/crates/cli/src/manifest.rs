//! Run manifests: what was run, with which inputs, and where the outputs went.

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub subcommand: String,
    pub version: String,
    pub config_path: Option<String>,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub params: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Content hash of the subcommand, its parameters and the bytes of every
/// input file, so equal manifests imply equal run ids.
pub fn run_id(subcommand: &str, params: &serde_json::Value, inputs: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update(subcommand.as_bytes());
    h.update([0]);
    h.update(params.to_string().as_bytes());
    for input in inputs {
        h.update([0]);
        h.update((input.len() as u64).to_le_bytes());
        h.update(input);
    }
    h.update([0]);
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    let digest = h.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        params: serde_json::Value,
        inputs: &[&[u8]],
        seeds: Vec<u64>,
        out_dir: &str,
    ) -> Self {
        RunManifest {
            run_id: run_id(subcommand, &params, inputs),
            subcommand: subcommand.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_path: None,
            seeds,
            out_dir: out_dir.to_owned(),
            params,
            outputs: Vec::new(),
        }
    }
}
