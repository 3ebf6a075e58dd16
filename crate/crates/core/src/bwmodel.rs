//! Hop-count-to-bandwidth mapping and capacitated client bandwidth.
//!
//! Point-to-point bandwidth is inversely proportional to hop distance,
//! clamped to [bw_floor, bw_ceil], with a generation-time noise factor
//! fixed per pair for the lifetime of a run and an independent per-slot
//! jitter applied during simulation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Parameters of the hop-to-bandwidth map, in bytes/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthParams {
    /// Bandwidth at hop count 1.
    pub bw_ref: f64,
    /// Lower clamp.
    pub bw_floor: f64,
    /// Upper clamp.
    pub bw_ceil: f64,
    /// Fractional half-width of the per-pair generation noise.
    pub gen_noise: f64,
    /// Fractional half-width of the per-slot noise.
    pub slot_noise: f64,
}

impl Default for BandwidthParams {
    fn default() -> Self {
        BandwidthParams {
            bw_ref: 1.5e6,
            bw_floor: 2.0e4,
            bw_ceil: 1.5e6,
            gen_noise: 0.25,
            slot_noise: 0.05,
        }
    }
}

impl BandwidthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bw_floor > 0.0) {
            return Err(Error::config("bw_floor", "must be > 0"));
        }
        if self.bw_ceil < self.bw_floor {
            return Err(Error::config("bw_ceil", "must be >= bw_floor"));
        }
        if !(0.0..1.0).contains(&self.gen_noise) {
            return Err(Error::config("gen_noise", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.slot_noise) {
            return Err(Error::config("slot_noise", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-pair base bandwidths for one run; symmetric, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n: usize,
    base_bw: Vec<f64>,
}

impl LinkTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Base bandwidth of the link between `i` and `j`, bytes/second.
    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.base_bw[i * self.n + j]
    }
}

/// Clamped inverse-proportional map, before noise.
pub(crate) fn base_link_bw(hops: u32, p: &BandwidthParams) -> f64 {
    (p.bw_ref / f64::from(hops)).clamp(p.bw_floor, p.bw_ceil)
}

/// Build the link table for a topology. The noise factor is sampled once
/// per unordered pair; identical `(t, p, seed)` yield identical tables.
pub fn build_links(t: &Topology, p: &BandwidthParams, seed: u64) -> LinkTable {
    let n = t.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base_bw = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let eps = if p.gen_noise > 0.0 {
                rng.gen_range(-p.gen_noise..p.gen_noise)
            } else {
                0.0
            };
            let bw = base_link_bw(t.hops(i, j), p) * (1.0 + eps);
            base_bw[i * n + j] = bw;
            base_bw[j * n + i] = bw;
        }
    }
    LinkTable { n, base_bw }
}

/// Apply one slot's worth of bandwidth jitter to a base link bandwidth.
/// A fresh draw is expected per (link, slot).
pub fn slot_bandwidth<R: Rng>(base: f64, p: &BandwidthParams, rng: &mut R) -> f64 {
    if p.slot_noise == 0.0 || base == 0.0 {
        return base;
    }
    let delta = rng.gen_range(-p.slot_noise..p.slot_noise);
    base * (1.0 + delta)
}

/// Realized download bandwidth of one client facing a set of servers:
/// each server contributes at most the link bandwidth and its spare
/// upload capacity; the total is capped by the client limit `u`.
pub fn capacitated_client_bw(link_bws: &[f64], server_spare: &[f64], u: f64) -> Result<f64> {
    if link_bws.len() != server_spare.len() {
        return Err(Error::domain(format!(
            "link/server list length mismatch: {} vs {}",
            link_bws.len(),
            server_spare.len()
        )));
    }
    let total: f64 = link_bws
        .iter()
        .zip(server_spare)
        .map(|(l, s)| l.min(*s))
        .sum();
    Ok(total.min(u))
}
