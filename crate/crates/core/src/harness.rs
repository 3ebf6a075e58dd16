//! Experiment orchestration and reporting.
//!
//! A cell is one (topology kind, part count, heuristic, policy, budget)
//! combination, replicated over seeded runs. Replications derive their
//! seeds from (master seed, run index) only, so the same run index sees
//! the same topology, links and root in every cell and aggregation is
//! independent of execution order. Emitters reproduce the three summary
//! tables and the per-slot fill/bandwidth curves as text plus CSV.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::{run_to_fill, Heuristic, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::heuristics::Policy;
use crate::seeds;
use crate::topology::{Topology, TopologyKind};

/// Everything a full experiment sweep needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kinds: Vec<TopologyKind>,
    pub parts: Vec<u32>,
    pub heuristics: Vec<Heuristic>,
    pub policies: Vec<Policy>,
    /// Upload budget factors; `None` is unlimited.
    pub budgets: Vec<Option<f64>>,
    pub replications: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Mesh size for every run.
    pub nodes: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kinds: TopologyKind::ALL.to_vec(),
            parts: vec![1, 2, 4, 8, 16, 32],
            heuristics: vec![
                Heuristic::BestClient,
                Heuristic::GreedyGlobal,
                Heuristic::Hybrid(0.9),
                Heuristic::Hybrid(0.8),
                Heuristic::Hybrid(0.7),
            ],
            policies: Policy::ALL.to_vec(),
            budgets: vec![None, Some(5.0), Some(2.0), Some(1.2)],
            replications: 100,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            nodes: 100,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::config("topologies", "must not be empty"));
        }
        if self.parts.is_empty() {
            return Err(Error::config("parts", "must not be empty"));
        }
        if self.heuristics.is_empty() {
            return Err(Error::config("heuristics", "must not be empty"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "must not be empty"));
        }
        if self.budgets.is_empty() {
            return Err(Error::config("budgets", "must not be empty"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if self.nodes < 2 {
            return Err(Error::config("nodes", "must be >= 2"));
        }
        Ok(())
    }
}

/// mean(std) aggregation over replicated fill times, with runs that hit
/// the slot limit counted separately and excluded from the moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    /// Total runs, truncated included.
    pub count: u32,
    /// Runs that hit `max_slots` without filling.
    pub truncated: u32,
}

impl SummaryStats {
    pub fn from_fill_slots(fills: &[Option<u32>]) -> SummaryStats {
        let done: Vec<f64> = fills.iter().flatten().map(|&s| f64::from(s)).collect();
        let count = fills.len() as u32;
        let truncated = count - done.len() as u32;
        if done.is_empty() {
            return SummaryStats {
                mean: f64::NAN,
                std: f64::NAN,
                count,
                truncated,
            };
        }
        let mean = done.iter().sum::<f64>() / done.len() as f64;
        let std = if done.len() < 2 {
            0.0
        } else {
            let var = done.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                / (done.len() - 1) as f64;
            var.sqrt()
        };
        SummaryStats {
            mean,
            std,
            count,
            truncated,
        }
    }

    pub fn all_truncated(&self) -> bool {
        self.truncated == self.count
    }

    /// Table cell form: `mean(std)` rounded to integers, or `>max_slots`
    /// when no run completed.
    pub fn render(&self, max_slots: u32) -> String {
        if self.all_truncated() {
            format!(">{max_slots}")
        } else {
            format!("{:.0}({:.0})", self.mean, self.std)
        }
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub kind: TopologyKind,
    pub parts: u32,
    pub heuristic: Heuristic,
    pub policy: Policy,
    pub budget: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    /// Per-run fill slot, indexed by run; `None` = truncated.
    pub fill_slots: Vec<Option<u32>>,
    pub stats: SummaryStats,
}

fn kind_tag(kind: TopologyKind) -> u64 {
    match kind {
        TopologyKind::Line => 0,
        TopologyKind::Triangle => 1,
        TopologyKind::Random => 2,
    }
}

fn cell_config(cell: &CellParams, base: &SimConfig, run_seed: u64) -> SimConfig {
    SimConfig {
        parts: cell.parts,
        heuristic: cell.heuristic,
        policy: cell.policy,
        upload_budget_factor: cell.budget,
        seed: run_seed,
        ..base.clone()
    }
}

fn run_one(
    cell: &CellParams,
    base: &SimConfig,
    nodes: usize,
    master_seed: u64,
    index: u32,
) -> Result<Trajectory> {
    // Topology and run seeds depend only on (master seed, kind, index),
    // never on the cell, so cells see paired environments.
    let topo_seed = seeds::derive2(
        seeds::derive(master_seed, seeds::STREAM_TOPOLOGY),
        kind_tag(cell.kind),
        u64::from(index),
    );
    let run_seed = seeds::derive2(master_seed, seeds::STREAM_RUN, u64::from(index));
    let topo = Topology::generate(cell.kind, nodes, topo_seed)?;
    run_to_fill(&topo, &cell_config(cell, base, run_seed))
}

/// Run all replications of one cell and summarize the fill times
/// (slots; minutes at the default slot length). Runs execute in
/// parallel; the result is independent of completion order.
pub fn run_cell(
    cell: &CellParams,
    base: &SimConfig,
    nodes: usize,
    replications: u32,
    master_seed: u64,
) -> Result<CellResult> {
    let fills: Vec<Option<u32>> = (0..replications)
        .into_par_iter()
        .map(|i| run_one(cell, base, nodes, master_seed, i).map(|t| t.fill_slot))
        .collect::<Result<_>>()?;
    let stats = SummaryStats::from_fill_slots(&fills);
    Ok(CellResult { fill_slots: fills, stats })
}

/// Full trajectories for one cell, for curve emission.
pub fn run_cell_trajectories(
    cell: &CellParams,
    base: &SimConfig,
    nodes: usize,
    replications: u32,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..replications)
        .into_par_iter()
        .map(|i| run_one(cell, base, nodes, master_seed, i))
        .collect()
}

// ---------------------------------------------------------------------------
// Config file parsing
// ---------------------------------------------------------------------------

/// Parse a line-oriented `key = value` document with `#` comments and
/// bracketed section headers. Unknown keys and malformed values are
/// rejected with the offending line; omitted keys keep their defaults.
pub fn parse_config(text: &str) -> Result<(ExperimentSpec, SimConfig)> {
    let mut spec = ExperimentSpec::default();
    let mut sim = SimConfig::default();

    for (idx, raw) in text.lines().enumerate() {
        let lno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(section) = line.strip_prefix('[') {
            let section = section
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(lno, "unterminated section header"))?
                .trim();
            match section {
                "experiment" | "sim" | "bandwidth" => continue,
                other => {
                    return Err(Error::parse(lno, format!("unknown section `[{other}]`")))
                }
            }
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lno, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut spec, &mut sim, key, value)
            .map_err(|e| attach_line(e, lno))?;
    }

    spec.validate()?;
    sim.validate()?;
    // Every requested part count must divide the payload.
    for &p in &spec.parts {
        if sim.payload_bytes % u64::from(p) != 0 {
            return Err(Error::config(
                "parts",
                format!("payload_bytes {} is not divisible by {p}", sim.payload_bytes),
            ));
        }
    }
    Ok((spec, sim))
}

fn attach_line(err: Error, line: usize) -> Error {
    match err {
        Error::Config { field, reason } => Error::parse(line, format!("`{field}`: {reason}")),
        other => other,
    }
}

fn apply_key(spec: &mut ExperimentSpec, sim: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    match key {
        // [experiment]
        "topologies" => {
            spec.kinds = split_list(value)
                .map(TopologyKind::from_str)
                .collect::<Result<_>>()?
        }
        "parts" => spec.parts = parse_list(key, value, "positive integers")?,
        "heuristics" => {
            spec.heuristics = split_list(value).map(parse_heuristic).collect::<Result<_>>()?
        }
        "policies" => {
            spec.policies = split_list(value).map(Policy::from_str).collect::<Result<_>>()?
        }
        "budgets" => {
            spec.budgets = split_list(value).map(parse_budget).collect::<Result<_>>()?
        }
        "replications" => spec.replications = parse_scalar(key, value, "an integer >= 1")?,
        "master_seed" => spec.master_seed = parse_scalar(key, value, "an unsigned integer")?,
        "output_dir" => spec.output_dir = PathBuf::from(value),
        "nodes" => spec.nodes = parse_scalar(key, value, "an integer >= 2")?,

        // [sim]
        "payload_bytes" => sim.payload_bytes = parse_scalar(key, value, "bytes as an integer")?,
        "slot_seconds" => sim.slot_seconds = parse_scalar(key, value, "seconds as a number")?,
        "max_slots" => sim.max_slots = parse_scalar(key, value, "an integer >= 1")?,
        "node_up_cap" => sim.node_up_cap = parse_scalar(key, value, "bytes/second")?,
        "node_down_cap" => sim.node_down_cap = parse_scalar(key, value, "bytes/second")?,
        "budget_factor" => sim.upload_budget_factor = parse_budget(value)?,
        "heuristic" => sim.heuristic = parse_heuristic(value)?,
        "policy" => sim.policy = value.parse()?,
        "root" => sim.root = Some(parse_scalar(key, value, "a node id")?),
        "seed" => sim.seed = parse_scalar(key, value, "an unsigned integer")?,

        // [bandwidth]
        "bw_ref" => sim.bandwidth.bw_ref = parse_scalar(key, value, "bytes/second")?,
        "bw_floor" => sim.bandwidth.bw_floor = parse_scalar(key, value, "bytes/second")?,
        "bw_ceil" => sim.bandwidth.bw_ceil = parse_scalar(key, value, "bytes/second")?,
        "gen_noise" => sim.bandwidth.gen_noise = parse_scalar(key, value, "a fraction in [0,1)")?,
        "slot_noise" => sim.bandwidth.slot_noise = parse_scalar(key, value, "a fraction in [0,1)")?,

        other => {
            return Err(Error::config(
                other,
                "unknown key".to_string(),
            ))
        }
    }
    Ok(())
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list<T: FromStr>(key: &str, value: &str, domain: &str) -> Result<Vec<T>> {
    split_list(value)
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::config(key, format!("`{tok}` is not {domain}")))
        })
        .collect()
}

fn parse_scalar<T: FromStr>(key: &str, value: &str, domain: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("`{value}` is not {domain}")))
}

fn parse_heuristic(tok: &str) -> Result<Heuristic> {
    if tok == "best-client" {
        return Ok(Heuristic::BestClient);
    }
    if tok == "greedy-global" {
        return Ok(Heuristic::GreedyGlobal);
    }
    if let Some(t) = tok.strip_prefix("hybrid-") {
        let threshold: f64 = t.parse().map_err(|_| {
            Error::config("heuristics", format!("`{tok}` has a malformed threshold"))
        })?;
        return Ok(Heuristic::Hybrid(threshold));
    }
    Err(Error::config(
        "heuristics",
        format!("unknown heuristic `{tok}` (best-client|greedy-global|hybrid-<t>)"),
    ))
}

fn parse_budget(tok: &str) -> Result<Option<f64>> {
    if tok == "unlimited" {
        return Ok(None);
    }
    let f: f64 = tok
        .parse()
        .map_err(|_| Error::config("budgets", format!("`{tok}` is not `unlimited` or a number")))?;
    Ok(Some(f))
}

// ---------------------------------------------------------------------------
// Table and curve emission
// ---------------------------------------------------------------------------

/// Rendered table plus its unrounded CSV twin.
#[derive(Debug, Clone)]
pub struct TableOutput {
    pub text: String,
    pub csv: String,
}

#[derive(Debug, Clone)]
struct Column {
    label: String,
    csv_label: String,
    cell: fn(&CellParams, &ColumnValue) -> CellParams,
    value: ColumnValue,
}

#[derive(Debug, Clone)]
enum ColumnValue {
    Heuristic(Heuristic),
    Policy(Policy),
    Budget(f64),
}

fn heuristic_label(h: Heuristic) -> (String, String) {
    match h {
        Heuristic::BestClient => ("Best Client".into(), "best_client".into()),
        Heuristic::GreedyGlobal => ("Greedy Global".into(), "greedy_global".into()),
        Heuristic::Hybrid(t) => (format!("GG {t}"), format!("gg_{t}")),
    }
}

fn table_row_parts(which: u8, kind: TopologyKind, spec: &ExperimentSpec) -> Vec<u32> {
    let wanted: &[u32] = match which {
        1 if kind == TopologyKind::Line => &[1, 2, 4, 8, 16, 32],
        _ => &[1, 16, 32],
    };
    wanted
        .iter()
        .copied()
        .filter(|p| spec.parts.contains(p))
        .collect()
}

fn table_columns(which: u8, spec: &ExperimentSpec) -> Result<Vec<Column>> {
    fn with_heuristic(base: &CellParams, v: &ColumnValue) -> CellParams {
        let ColumnValue::Heuristic(h) = v else { unreachable!() };
        CellParams {
            heuristic: *h,
            ..*base
        }
    }
    fn with_policy(base: &CellParams, v: &ColumnValue) -> CellParams {
        let ColumnValue::Policy(p) = v else { unreachable!() };
        CellParams { policy: *p, ..*base }
    }
    fn with_budget(base: &CellParams, v: &ColumnValue) -> CellParams {
        let ColumnValue::Budget(b) = v else { unreachable!() };
        CellParams {
            budget: Some(*b),
            ..*base
        }
    }

    let columns = match which {
        1 => {
            let order = [
                Heuristic::BestClient,
                Heuristic::GreedyGlobal,
                Heuristic::Hybrid(0.9),
                Heuristic::Hybrid(0.8),
                Heuristic::Hybrid(0.7),
            ];
            order
                .into_iter()
                .filter(|h| spec.heuristics.contains(h))
                .map(|h| {
                    let (label, csv_label) = heuristic_label(h);
                    Column {
                        label,
                        csv_label,
                        cell: with_heuristic,
                        value: ColumnValue::Heuristic(h),
                    }
                })
                .collect::<Vec<_>>()
        }
        2 => Policy::ALL
            .into_iter()
            .filter(|p| spec.policies.contains(p))
            .map(|p| Column {
                label: format!("Policy {}", p.number()),
                csv_label: format!("policy_{}", p.number()),
                cell: with_policy,
                value: ColumnValue::Policy(p),
            })
            .collect(),
        3 => [5.0, 2.0, 1.2]
            .into_iter()
            .filter(|b| spec.budgets.contains(&Some(*b)))
            .map(|b| Column {
                label: format!("{b}"),
                csv_label: format!("budget_{b}"),
                cell: with_budget,
                value: ColumnValue::Budget(b),
            })
            .collect(),
        other => {
            return Err(Error::config(
                "which",
                format!("no table {other}; expected 1, 2 or 3"),
            ))
        }
    };
    Ok(columns)
}

/// Run the cells of one of the three summary tables and render it.
/// Rows and columns mirror the published layout; cells excluded by the
/// experiment spec render as `n/a`.
pub fn emit_table(spec: &ExperimentSpec, base: &SimConfig, which: u8) -> Result<TableOutput> {
    spec.validate()?;
    let columns = table_columns(which, spec)?;

    // Tables 1 and 3 report the second policy; table 2 sweeps policies.
    // Tables 1 and 2 run without budgets; table 3 sweeps them.
    let base_cell = CellParams {
        kind: TopologyKind::Line,
        parts: 1,
        heuristic: Heuristic::BestClient,
        policy: Policy::MoreOfPart,
        budget: None,
    };

    let mut rows: Vec<(TopologyKind, u32)> = Vec::new();
    for kind in TopologyKind::ALL {
        if !spec.kinds.contains(&kind) {
            continue;
        }
        for p in table_row_parts(which, kind, spec) {
            rows.push((kind, p));
        }
    }

    let mut csv = String::from("table,topology,parts,column,mean,std,count,truncated\n");
    let mut grid: Vec<Vec<String>> = Vec::new();
    for &(kind, parts) in &rows {
        let mut line = vec![kind.to_string(), parts.to_string()];
        for col in &columns {
            let cell = (col.cell)(
                &CellParams {
                    kind,
                    parts,
                    ..base_cell
                },
                &col.value,
            );
            let result = run_cell(&cell, base, spec.nodes, spec.replications, spec.master_seed)?;
            let stats = result.stats;
            line.push(stats.render(base.max_slots));
            let _ = writeln!(
                csv,
                "{which},{kind},{parts},{},{},{},{},{}",
                col.csv_label,
                if stats.all_truncated() { String::from("") } else { stats.mean.to_string() },
                if stats.all_truncated() { String::from("") } else { stats.std.to_string() },
                stats.count,
                stats.truncated,
            );
        }
        grid.push(line);
    }

    let mut headers = vec![String::from("Topology"), String::from("Parts")];
    headers.extend(columns.iter().map(|c| c.label.clone()));
    let text = render_grid(&headers, &grid);
    Ok(TableOutput { text, csv })
}

fn render_grid(headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            let cell = if cell.is_empty() { "n/a" } else { cell };
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let fmt_row = |out: &mut String, cells: &[String]| {
        for i in 0..cols {
            let cell = cells.get(i).map(String::as_str).unwrap_or("n/a");
            let cell = if cell.is_empty() { "n/a" } else { cell };
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{:>width$}", cell, width = widths[i]);
        }
        out.push('\n');
    };
    fmt_row(&mut out, headers);
    let rule_len = widths.iter().sum::<usize>() + 2 * (cols - 1);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for row in rows {
        fmt_row(&mut out, row);
    }
    out
}

/// Pointwise mean of the fill and bandwidth curves across replications,
/// as CSV. Runs shorter than the longest are padded with their terminal
/// fill count and zero bandwidth.
pub fn emit_curves(
    cell: &CellParams,
    base: &SimConfig,
    nodes: usize,
    replications: u32,
    master_seed: u64,
) -> Result<String> {
    let trajectories = run_cell_trajectories(cell, base, nodes, replications, master_seed)?;
    let longest = trajectories.iter().map(|t| t.filled.len()).max().unwrap_or(0);
    let mut out = String::from("slot,filled_mean,bw_mean\n");
    for slot in 0..longest {
        let mut filled_sum = 0.0;
        let mut bw_sum = 0.0;
        for t in &trajectories {
            let filled = t
                .filled
                .get(slot)
                .copied()
                .unwrap_or_else(|| *t.filled.last().unwrap());
            filled_sum += f64::from(filled);
            bw_sum += t.system_bw.get(slot).copied().unwrap_or(0.0);
        }
        let k = trajectories.len() as f64;
        let _ = writeln!(out, "{slot},{},{}", filled_sum / k, bw_sum / k);
    }
    Ok(out)
}
