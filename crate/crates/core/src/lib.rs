//! Swarm chemistry simulator: robots play atoms, bond into molecules, and
//! pick conflict-free blink slots through a distributed coloring protocol
//! so that an observer can tell molecules apart.

pub mod chem;
pub mod coloring;
pub mod config;
pub mod graph;
pub mod observer;
pub mod scenes;
pub mod sim;

/// Derives an independent seed from a base seed and a salt (splitmix64
/// finalizer over their combination).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
