//! Synthetic 100-node topologies as symmetric hop-count matrices.
//!
//! The generator targets only the class-mean hop distances the network
//! model calls for; hop counts are sampled per unordered pair as uniform
//! integers centered on the class mean, so no explicit edge graph or
//! routing exists. Three kinds:
//!
//! * `line` — 4 clusters in a row; intra-cluster mean 4, adjacent
//!   clusters 9, one cluster apart 12, two apart 15.
//! * `triangle` — 3 clusters; intra-cluster mean 4, any inter-cluster
//!   pair 12.
//! * `random` — no clusters; every pair mean 10.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    Line,
    Triangle,
    Random,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [
        TopologyKind::Line,
        TopologyKind::Triangle,
        TopologyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Line => "line",
            TopologyKind::Triangle => "triangle",
            TopologyKind::Random => "random",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(TopologyKind::Line),
            "triangle" => Ok(TopologyKind::Triangle),
            "random" => Ok(TopologyKind::Random),
            other => Err(Error::config(
                "kind",
                format!("unknown topology kind `{other}` (line|triangle|random)"),
            )),
        }
    }
}

/// Which unordered node pairs a distance query ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    All,
    IntraCluster,
    InterCluster,
    /// Inter-cluster pairs whose cluster labels differ by exactly `k`.
    InterClusterAt(u32),
}

/// Symmetric hop-count matrix over `n` nodes with cluster labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    kind: TopologyKind,
    /// Row-major n*n matrix; 0 on the diagonal, >= 1 elsewhere.
    hops: Vec<u32>,
    cluster_of: Vec<u32>,
}

// Per-pair sampling windows: uniform integers centered on the class mean.
const INTRA_WINDOW: (u32, u32) = (2, 6); // mean 4
const LINE_ADJACENT_WINDOW: (u32, u32) = (7, 11); // mean 9
const LINE_ONE_APART_WINDOW: (u32, u32) = (10, 14); // mean 12
const LINE_TWO_APART_WINDOW: (u32, u32) = (13, 17); // mean 15
const TRIANGLE_INTER_WINDOW: (u32, u32) = (10, 14); // mean 12
const RANDOM_WINDOW: (u32, u32) = (5, 15); // mean 10

const LINE_CLUSTERS: usize = 4;
const TRIANGLE_CLUSTERS: usize = 3;

impl Topology {
    /// Generate a topology of the given kind. Identical `(kind, n, seed)`
    /// arguments yield a bit-identical matrix.
    pub fn generate(kind: TopologyKind, n: usize, seed: u64) -> Result<Topology> {
        if n < 2 {
            return Err(Error::config("n", format!("need at least 2 nodes, got {n}")));
        }
        let cluster_of = match kind {
            TopologyKind::Line => {
                if n % LINE_CLUSTERS != 0 {
                    return Err(Error::config(
                        "n",
                        format!("line topology needs n divisible by {LINE_CLUSTERS}, got {n}"),
                    ));
                }
                contiguous_clusters(n, LINE_CLUSTERS)
            }
            TopologyKind::Triangle => {
                // Cluster sizes may differ by one (e.g. 34/33/33 at n=100).
                if n < TRIANGLE_CLUSTERS {
                    return Err(Error::config(
                        "n",
                        format!("triangle topology needs n >= {TRIANGLE_CLUSTERS}, got {n}"),
                    ));
                }
                contiguous_clusters(n, TRIANGLE_CLUSTERS)
            }
            TopologyKind::Random => vec![0; n],
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hops = vec![0u32; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (lo, hi) = pair_window(kind, cluster_of[i], cluster_of[j]);
                let h = rng.gen_range(lo..=hi);
                hops[i * n + j] = h;
                hops[j * n + i] = h;
            }
        }

        Ok(Topology {
            n,
            kind,
            hops,
            cluster_of,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    /// Hop count between nodes `i` and `j`.
    pub fn hops(&self, i: NodeId, j: NodeId) -> u32 {
        self.hops[i * self.n + j]
    }

    pub fn cluster_of(&self, i: NodeId) -> u32 {
        self.cluster_of[i]
    }

    /// Arithmetic mean hop count over the unordered pairs selected by
    /// `class`. Errors if the class selects no pairs.
    pub fn mean_distance(&self, class: PairClass) -> Result<f64> {
        let mut sum = 0u64;
        let mut count = 0u64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let ci = self.cluster_of[i];
                let cj = self.cluster_of[j];
                let selected = match class {
                    PairClass::All => true,
                    PairClass::IntraCluster => ci == cj,
                    PairClass::InterCluster => ci != cj,
                    PairClass::InterClusterAt(k) => ci.abs_diff(cj) == k && ci != cj,
                };
                if selected {
                    sum += u64::from(self.hops(i, j));
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::domain(format!(
                "pair class {class:?} selects no pairs in this topology"
            )));
        }
        Ok(sum as f64 / count as f64)
    }

    /// Plain-text export: `n kind`, then the hop matrix row by row, then
    /// one line of cluster labels.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.n, self.kind));
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.hops(i, j).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let labels: Vec<String> = self.cluster_of.iter().map(|c| c.to_string()).collect();
        out.push_str(&labels.join(" "));
        out.push('\n');
        out
    }

    /// Parse the `to_text` format back; round-trips losslessly.
    pub fn from_text(text: &str) -> Result<Topology> {
        let mut lines = text.lines().enumerate();
        let (lno, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty topology document"))?;
        let mut head = header.split_whitespace();
        let n: usize = head
            .next()
            .ok_or_else(|| Error::parse(lno + 1, "missing node count"))?
            .parse()
            .map_err(|_| Error::parse(lno + 1, "node count is not an integer"))?;
        let kind: TopologyKind = head
            .next()
            .ok_or_else(|| Error::parse(lno + 1, "missing topology kind"))?
            .parse()
            .map_err(|_| Error::parse(lno + 1, "unknown topology kind"))?;
        if head.next().is_some() {
            return Err(Error::parse(lno + 1, "trailing tokens after header"));
        }

        let mut hops = vec![0u32; n * n];
        for i in 0..n {
            let (lno, row) = lines
                .next()
                .ok_or_else(|| Error::parse(i + 2, "missing matrix row"))?;
            let values: Vec<u32> = row
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u32>()
                        .map_err(|_| Error::parse(lno + 1, format!("bad hop count `{tok}`")))
                })
                .collect::<Result<_>>()?;
            if values.len() != n {
                return Err(Error::parse(
                    lno + 1,
                    format!("expected {n} entries in row, got {}", values.len()),
                ));
            }
            hops[i * n..(i + 1) * n].copy_from_slice(&values);
        }

        let (lno, labels_line) = lines
            .next()
            .ok_or_else(|| Error::parse(n + 2, "missing cluster labels"))?;
        let cluster_of: Vec<u32> = labels_line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>()
                    .map_err(|_| Error::parse(lno + 1, format!("bad cluster label `{tok}`")))
            })
            .collect::<Result<_>>()?;
        if cluster_of.len() != n {
            return Err(Error::parse(
                lno + 1,
                format!("expected {n} cluster labels, got {}", cluster_of.len()),
            ));
        }

        let topo = Topology {
            n,
            kind,
            hops,
            cluster_of,
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.hops(i, i) != 0 {
                return Err(Error::domain(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..self.n {
                if self.hops(i, j) == 0 {
                    return Err(Error::domain(format!("zero hop count between {i} and {j}")));
                }
                if self.hops(i, j) != self.hops(j, i) {
                    return Err(Error::domain(format!("asymmetric hops between {i} and {j}")));
                }
            }
        }
        Ok(())
    }
}

fn contiguous_clusters(n: usize, clusters: usize) -> Vec<u32> {
    // First (n % clusters) clusters take one extra node.
    let base = n / clusters;
    let extra = n % clusters;
    let mut labels = Vec::with_capacity(n);
    for c in 0..clusters {
        let size = base + usize::from(c < extra);
        labels.extend(std::iter::repeat(c as u32).take(size));
    }
    labels
}

fn pair_window(kind: TopologyKind, ci: u32, cj: u32) -> (u32, u32) {
    match kind {
        TopologyKind::Random => RANDOM_WINDOW,
        TopologyKind::Line => match ci.abs_diff(cj) {
            0 => INTRA_WINDOW,
            1 => LINE_ADJACENT_WINDOW,
            2 => LINE_ONE_APART_WINDOW,
            _ => LINE_TWO_APART_WINDOW,
        },
        TopologyKind::Triangle => {
            if ci == cj {
                INTRA_WINDOW
            } else {
                TRIANGLE_INTER_WINDOW
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_random_stays_in_window() {
        for seed in 0..50 {
            let t = Topology::generate(TopologyKind::Random, 2, seed).unwrap();
            let h = t.hops(0, 1);
            assert!((5..=15).contains(&h), "hop {h} outside sampling window");
            assert_eq!(t.hops(0, 0), 0);
            assert_eq!(t.hops(1, 1), 0);
            assert_eq!(t.hops(1, 0), h);
        }
    }

    #[test]
    fn single_pair_mean_is_the_pair() {
        let t = Topology::from_text("2 random\n0 7\n7 0\n0 0\n").unwrap();
        assert_eq!(t.mean_distance(PairClass::All).unwrap(), 7.0);
    }

    #[test]
    fn random_all_pairs_mean_near_ten() {
        let t = Topology::generate(TopologyKind::Random, 100, 11).unwrap();
        let m = t.mean_distance(PairClass::All).unwrap();
        assert!((m - 10.0).abs() <= 0.5, "mean {m}");
    }

    #[test]
    fn triangle_99_inter_cluster_mean_near_twelve() {
        let t = Topology::generate(TopologyKind::Triangle, 99, 3).unwrap();
        let m = t.mean_distance(PairClass::InterCluster).unwrap();
        assert!((m - 12.0).abs() <= 0.5, "mean {m}");
    }

    #[test]
    fn line_class_means_hit_targets() {
        let t = Topology::generate(TopologyKind::Line, 100, 5).unwrap();
        let intra = t.mean_distance(PairClass::IntraCluster).unwrap();
        let adj = t.mean_distance(PairClass::InterClusterAt(1)).unwrap();
        let one = t.mean_distance(PairClass::InterClusterAt(2)).unwrap();
        let two = t.mean_distance(PairClass::InterClusterAt(3)).unwrap();
        assert!((intra - 4.0).abs() <= 0.5, "intra {intra}");
        assert!((adj - 9.0).abs() <= 0.5, "adjacent {adj}");
        assert!((one - 12.0).abs() <= 0.5, "one apart {one}");
        assert!((two - 15.0).abs() <= 0.5, "two apart {two}");
    }

    #[test]
    fn triangle_100_uses_uneven_clusters() {
        let t = Topology::generate(TopologyKind::Triangle, 100, 9).unwrap();
        let mut sizes = [0usize; 3];
        for i in 0..100 {
            sizes[t.cluster_of(i) as usize] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, [33, 33, 34]);
        let m = t.mean_distance(PairClass::IntraCluster).unwrap();
        assert!((m - 4.0).abs() <= 0.5, "intra {m}");
    }

    #[test]
    fn symmetry_and_zero_diagonal_for_all_kinds() {
        for kind in TopologyKind::ALL {
            let t = Topology::generate(kind, 96, 17).unwrap();
            for i in 0..96 {
                assert_eq!(t.hops(i, i), 0);
                for j in 0..96 {
                    assert_eq!(t.hops(i, j), t.hops(j, i));
                    if i != j {
                        assert!(t.hops(i, j) >= 1);
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in TopologyKind::ALL {
            let a = Topology::generate(kind, 100, 123).unwrap();
            let b = Topology::generate(kind, 100, 123).unwrap();
            assert_eq!(a, b);
            let c = Topology::generate(kind, 100, 124).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn distance_targets_hold_on_95_of_100_topologies() {
        let within = |t: &Topology, class: PairClass, target: f64| -> bool {
            (t.mean_distance(class).unwrap() - target).abs() <= 0.5
        };
        for kind in TopologyKind::ALL {
            let mut ok = 0;
            for seed in 0..100 {
                let t = Topology::generate(kind, 100, seed).unwrap();
                let hit = match kind {
                    TopologyKind::Line => {
                        within(&t, PairClass::IntraCluster, 4.0)
                            && within(&t, PairClass::InterClusterAt(1), 9.0)
                            && within(&t, PairClass::InterClusterAt(2), 12.0)
                            && within(&t, PairClass::InterClusterAt(3), 15.0)
                    }
                    TopologyKind::Triangle => {
                        within(&t, PairClass::IntraCluster, 4.0)
                            && within(&t, PairClass::InterCluster, 12.0)
                    }
                    TopologyKind::Random => within(&t, PairClass::All, 10.0),
                };
                ok += usize::from(hit);
            }
            assert!(ok >= 95, "{kind}: only {ok}/100 within targets");
        }
    }

    #[test]
    fn invalid_sizes_are_config_errors_naming_n() {
        for (kind, n) in [
            (TopologyKind::Line, 10),
            (TopologyKind::Line, 1),
            (TopologyKind::Triangle, 2),
            (TopologyKind::Random, 1),
        ] {
            match Topology::generate(kind, n, 0) {
                Err(Error::Config { field, .. }) => assert_eq!(field, "n"),
                other => panic!("expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn text_round_trip_is_lossless() {
        for kind in TopologyKind::ALL {
            let t = Topology::generate(kind, 24, 77).unwrap();
            let back = Topology::from_text(&t.to_text()).unwrap();
            assert_eq!(t, back);
        }
    }

    #[test]
    fn from_text_rejects_malformed_documents() {
        assert!(matches!(
            Topology::from_text(""),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Topology::from_text("2 random\n0 3\n3 0 9\n0 0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        // Asymmetric matrix is structurally invalid.
        assert!(Topology::from_text("2 random\n0 3\n4 0\n0 0\n").is_err());
    }

    #[test]
    fn mean_distance_empty_class_is_domain_error() {
        let t = Topology::generate(TopologyKind::Random, 10, 1).unwrap();
        assert!(matches!(
            t.mean_distance(PairClass::InterCluster),
            Err(Error::Domain(_))
        ));
    }
}
