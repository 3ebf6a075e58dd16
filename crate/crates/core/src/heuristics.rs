//! Client-selection and placement heuristics.
//!
//! Best-client scoring ranks candidates by the sum of reciprocal hop
//! counts to the servers currently able to upload; greedy-global ranks
//! placements by total client-to-nearest-replica distance. Tie-breaks
//! among equal-score clients follow one of four load-balancing policies,
//! then lowest node id so that runs stay deterministic.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Load-balancing tie-break among clients with equal selection score.
/// Variants correspond to policies 1-4 of the evaluation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// 1: prefer the client that downloaded less of the given part.
    LessOfPart,
    /// 2: prefer the client that downloaded more of the given part.
    MoreOfPart,
    /// 3: prefer the client that downloaded less in total.
    LessTotal,
    /// 4: prefer the client that downloaded more in total.
    MoreTotal,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::LessOfPart,
        Policy::MoreOfPart,
        Policy::LessTotal,
        Policy::MoreTotal,
    ];

    /// 1-based policy number as used in the result tables.
    pub fn number(self) -> u32 {
        match self {
            Policy::LessOfPart => 1,
            Policy::MoreOfPart => 2,
            Policy::LessTotal => 3,
            Policy::MoreTotal => 4,
        }
    }
}

impl Default for Policy {
    fn default() -> Self {
        Policy::MoreOfPart
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "less-of-part" => Ok(Policy::LessOfPart),
            "2" | "more-of-part" => Ok(Policy::MoreOfPart),
            "3" | "less-total" => Ok(Policy::LessTotal),
            "4" | "more-total" => Ok(Policy::MoreTotal),
            other => Err(Error::config(
                "policy",
                format!("unknown policy `{other}` (1|2|3|4)"),
            )),
        }
    }
}

/// Inputs to one client-selection decision for a given part.
///
/// `progress_part` and `progress_total` are indexed by node id and hold
/// bytes downloaded of the part in question and over all parts.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub part: usize,
    pub servers: &'a [NodeId],
    pub candidates: &'a [NodeId],
    pub progress_part: &'a [u64],
    pub progress_total: &'a [u64],
}

/// Best-client score of a candidate: sum of 1/hops to each server.
pub fn bc_score(candidate: NodeId, servers: &[NodeId], t: &Topology) -> Result<f64> {
    if servers.is_empty() {
        return Err(Error::domain("best-client score needs a nonempty server set"));
    }
    debug_assert!(!servers.contains(&candidate));
    Ok(servers
        .iter()
        .map(|&s| 1.0 / f64::from(t.hops(candidate, s)))
        .sum())
}

/// Round to 12 significant digits; sums of reciprocals differing only in
/// float dust count as ties so the policies actually get exercised.
fn round_sig12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - exp);
    (x * scale).round() / scale
}

/// Select the candidate with maximal best-client score; score ties fall
/// through to the policy, then to lowest node id. Returns `None` iff
/// there are no candidates.
pub fn best_client_select(ctx: &SelectionContext, t: &Topology, policy: Policy) -> Option<NodeId> {
    debug_assert!(ctx.candidates.iter().all(|c| !ctx.servers.contains(c)));
    let mut best: Option<(f64, NodeId)> = None;
    for &c in ctx.candidates {
        let score: f64 = ctx
            .servers
            .iter()
            .map(|&s| 1.0 / f64::from(t.hops(c, s)))
            .sum();
        let score = round_sig12(score);
        let better = match best {
            None => true,
            Some((bs, bc)) => {
                if score != bs {
                    score > bs
                } else {
                    let (pc, pb) = match policy {
                        Policy::LessOfPart | Policy::MoreOfPart => {
                            (ctx.progress_part[c], ctx.progress_part[bc])
                        }
                        Policy::LessTotal | Policy::MoreTotal => {
                            (ctx.progress_total[c], ctx.progress_total[bc])
                        }
                    };
                    let prefer = match policy {
                        Policy::LessOfPart | Policy::LessTotal => pc < pb,
                        Policy::MoreOfPart | Policy::MoreTotal => pc > pb,
                    };
                    prefer || (pc == pb && c < bc)
                }
            }
        };
        if better {
            best = Some((score, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Network overhead of a replica set: sum over non-replica nodes of the
/// distance to their nearest replica.
pub fn gg_cost(replicas: &[NodeId], t: &Topology) -> Result<f64> {
    if replicas.is_empty() {
        return Err(Error::domain("greedy-global cost needs a nonempty replica set"));
    }
    let mut is_replica = vec![false; t.n()];
    for &r in replicas {
        is_replica[r] = true;
    }
    let mut total = 0u64;
    for i in 0..t.n() {
        if is_replica[i] {
            continue;
        }
        let d = replicas.iter().map(|&r| t.hops(i, r)).min().unwrap();
        total += u64::from(d);
    }
    Ok(total as f64)
}

/// The non-replica node whose addition minimizes `gg_cost`; ties broken
/// by lowest node id.
pub fn greedy_global_place(replicas: &[NodeId], t: &Topology) -> Result<NodeId> {
    if replicas.is_empty() {
        return Err(Error::domain("greedy-global placement needs a nonempty replica set"));
    }
    let n = t.n();
    let mut is_replica = vec![false; n];
    for &r in replicas {
        is_replica[r] = true;
    }
    let nearest: Vec<u32> = (0..n)
        .map(|i| replicas.iter().map(|&r| t.hops(i, r)).min().unwrap())
        .collect();

    let mut best: Option<(u64, NodeId)> = None;
    for cand in 0..n {
        if is_replica[cand] {
            continue;
        }
        let mut cost = 0u64;
        for i in 0..n {
            if is_replica[i] || i == cand {
                continue;
            }
            cost += u64::from(nearest[i].min(t.hops(i, cand)));
        }
        if best.map_or(true, |(bc, _)| cost < bc) {
            best = Some((cost, cand));
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::domain("no non-replica node left to place"))
}

/// Full greedy placement order starting from `root`, with the cost after
/// each step. Costs are non-increasing and end at 0.
pub fn gg_order(t: &Topology, root: NodeId) -> Vec<(NodeId, f64)> {
    let n = t.n();
    let mut placed = vec![false; n];
    placed[root] = true;
    let mut nearest: Vec<u32> = (0..n).map(|i| t.hops(i, root)).collect();
    let mut order = Vec::with_capacity(n - 1);

    for _ in 1..n {
        let mut best: Option<(u64, NodeId)> = None;
        for cand in 0..n {
            if placed[cand] {
                continue;
            }
            let mut cost = 0u64;
            for i in 0..n {
                if placed[i] || i == cand {
                    continue;
                }
                cost += u64::from(nearest[i].min(t.hops(i, cand)));
            }
            if best.map_or(true, |(bc, _)| cost < bc) {
                best = Some((cost, cand));
            }
        }
        let (cost, pick) = best.unwrap();
        placed[pick] = true;
        for i in 0..n {
            nearest[i] = nearest[i].min(t.hops(i, pick));
        }
        order.push((pick, cost as f64));
    }
    order
}

/// First step at which the cost stops dropping fast enough: smallest
/// `k >= 1` with `costs[k] > threshold * costs[k - 1]`, or the list
/// length when no step qualifies (never switch).
pub fn hybrid_switch_index(costs: &[f64], threshold: f64) -> Result<usize> {
    if costs.is_empty() {
        return Err(Error::domain("switch index needs a nonempty cost list"));
    }
    for k in 1..costs.len() {
        if costs[k] > threshold * costs[k - 1] {
            return Ok(k);
        }
    }
    Ok(costs.len())
}
