//! Core model for context-aware experience sampling: situational contexts,
//! iLogCal experiment plans, compiled schedules, simulation, data quality and
//! answer-quality prediction. `no_std` with `alloc`; all IO lives elsewhere.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod context;
pub mod plan;
pub mod predictor;
pub mod quality;
pub mod schedule;
pub mod sim;
pub mod time;

/// 64-bit FNV-1a over the concatenated parts, each followed by a separator
/// byte. Stable across platforms and releases, unlike `core::hash`.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in part.iter().chain(core::iter::once(&0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
