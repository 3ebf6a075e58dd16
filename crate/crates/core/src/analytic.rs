//! Closed-form two-phase model of system bandwidth and fill time.
//!
//! With uniform per-node caps (`u` download, `d` upload) the aggregate
//! bandwidth first grows exponentially while servers are scarce, peaks
//! when supply meets demand, then decays as clients run out. These forms
//! sanity-check simulated trajectories; they ignore link bandwidths
//! entirely.

use crate::error::{Error, Result};

/// Uniform-cap model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Payload size S, bytes.
    pub payload: f64,
    /// Per-client download cap u, bytes/second.
    pub client_cap: f64,
    /// Per-server upload cap d, bytes/second.
    pub server_cap: f64,
    /// Node count N.
    pub nodes: f64,
}

impl PhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.payload > 0.0) {
            return Err(Error::config("payload", "must be > 0"));
        }
        if !(self.client_cap > 0.0) {
            return Err(Error::config("client_cap", "must be > 0"));
        }
        if !(self.server_cap > 0.0) {
            return Err(Error::config("server_cap", "must be > 0"));
        }
        if !(self.nodes > 0.0) {
            return Err(Error::config("nodes", "must be > 0"));
        }
        Ok(())
    }

    fn growth_ratio(&self) -> f64 {
        self.client_cap * self.nodes / (self.server_cap + self.client_cap)
    }
}

/// Aggregate bandwidth during the server-scarce phase: d * e^{(d/S) t}.
pub fn initial_bandwidth(p: &PhaseParams, t: f64) -> f64 {
    p.server_cap * (p.server_cap / p.payload * t).exp()
}

/// Time at which supply meets demand: (S/d) ln(uN / (d+u)).
pub fn t_prime(p: &PhaseParams) -> Result<f64> {
    let ratio = p.growth_ratio();
    if ratio < 1.0 {
        return Err(Error::domain(format!(
            "uN/(d+u) = {ratio} < 1: the growth phase never completes"
        )));
    }
    Ok(p.payload / p.server_cap * ratio.ln())
}

/// Aggregate bandwidth during the client-scarce phase:
/// (ud/(u+d)) N e^{-(u/S)(t - t')}. Defined for t >= t'.
pub fn final_bandwidth(p: &PhaseParams, t: f64) -> Result<f64> {
    let tp = t_prime(p)?;
    if t < tp {
        return Err(Error::domain(format!(
            "final phase starts at t' = {tp}, got t = {t}"
        )));
    }
    Ok(peak_bandwidth(p) * (-(p.client_cap / p.payload) * (t - tp)).exp())
}

/// Peak aggregate bandwidth d u N / (d + u), reached at t'.
pub fn peak_bandwidth(p: &PhaseParams) -> f64 {
    p.server_cap * p.client_cap * p.nodes / (p.server_cap + p.client_cap)
}

/// Approximate time to fill every node: t' + S/u.
pub fn fill_time(p: &PhaseParams) -> Result<f64> {
    Ok(t_prime(p)? + p.payload / p.client_cap)
}

/// Aggregate bandwidth either side can sustain: min of total server
/// upload and total client download capacity.
pub fn system_bandwidth_bound(sum_server: f64, sum_client: f64) -> f64 {
    sum_server.min(sum_client)
}

/// Independent route to the fill time: integrate the bandwidth curve
/// numerically (trapezoid rule for the growth phase, constant peak
/// afterwards, which is how the closed-form fill time is derived) and
/// find when the area reaches S * N.
pub fn fill_time_by_integration(p: &PhaseParams, steps: usize) -> Result<f64> {
    let tp = t_prime(p)?;
    let target = p.payload * p.nodes;

    let mut area = 0.0;
    let dt = tp / steps as f64;
    for k in 0..steps {
        let a = initial_bandwidth(p, k as f64 * dt);
        let b = initial_bandwidth(p, (k + 1) as f64 * dt);
        area += 0.5 * (a + b) * dt;
        if area >= target {
            // Filled before the peak; back out within this step.
            let overshoot = (area - target) / (0.5 * (a + b) * dt);
            return Ok((k as f64 + 1.0 - overshoot) * dt);
        }
    }
    Ok(tp + (target - area) / peak_bandwidth(p))
}
