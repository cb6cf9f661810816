//! Temporal interaction graph storage and time-respecting queries.
//!
//! A [`TemporalGraph`] is an immutable, chronologically ordered event list
//! with a per-node adjacency index. All queries are strict about time:
//! history at time `t` is everything that happened strictly before `t`.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SeanError};

/// One timestamped interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub src: usize,
    pub dst: usize,
    pub t: f64,
    pub edge_feat: Vec<f64>,
    /// Dynamic binary label attached to `src` at `t`, when the dataset has one.
    pub label: Option<u8>,
}

/// One row of a node's adjacency index.
#[derive(Debug, Clone, Copy)]
pub struct AdjEntry {
    pub event_idx: usize,
    pub other: usize,
    pub t: f64,
}

/// Immutable temporal interaction graph.
///
/// Construction validates chronological order, node-id ranges, and feature
/// dimensions; afterwards the graph is safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct TemporalGraph {
    events: Vec<Event>,
    num_nodes: usize,
    feat_dim: usize,
    adjacency: Vec<Vec<AdjEntry>>,
    /// For bipartite datasets, the number of source-side nodes; destination
    /// candidates are `[offset, num_nodes)`.
    bipartite_offset: Option<usize>,
}

/// The sampled historical neighborhood of `target` at `query_t`.
///
/// Entries are ordered most-recent-first. `freq[j]` counts interactions
/// between the target and entry `j`'s neighbor strictly before `query_t`
/// (with multiplicity); `neigh_degree[j]` is that neighbor's total
/// incidence count strictly before `query_t`. A self-loop contributes two
/// incidences.
#[derive(Debug, Clone)]
pub struct NeighborView {
    pub target: usize,
    pub query_t: f64,
    pub entries: Vec<AdjEntry>,
    pub freq: Vec<u64>,
    pub neigh_degree: Vec<u64>,
}

impl NeighborView {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Edge features of entry `j`, borrowed from the graph's event store.
    pub fn edge_feat<'g>(&self, g: &'g TemporalGraph, j: usize) -> &'g [f64] {
        &g.events[self.entries[j].event_idx].edge_feat
    }

    /// Most recent event time in the view, if any.
    pub fn freshest_t(&self) -> Option<f64> {
        self.entries.first().map(|e| e.t)
    }
}

/// Chronological split fractions. Must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        if train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0 {
            return Err(SeanError::Validation(format!(
                "split fractions must be non-negative, got {train_frac}/{val_frac}/{test_frac}"
            )));
        }
        let sum = train_frac + val_frac + test_frac;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SeanError::Validation(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(Self {
            train_frac,
            val_frac,
            test_frac,
        })
    }
}

impl Default for SplitSpec {
    /// The conventional 70/15/15 chronological split.
    fn default() -> Self {
        Self {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
        }
    }
}

impl TemporalGraph {
    /// Builds and validates a graph from an already-chronological event list.
    pub fn new(
        events: Vec<Event>,
        num_nodes: usize,
        feat_dim: usize,
        bipartite_offset: Option<usize>,
    ) -> Result<Self> {
        let mut prev_t = 0.0f64;
        for (i, e) in events.iter().enumerate() {
            if e.t < 0.0 {
                return Err(SeanError::Validation(format!(
                    "event {i}: negative timestamp {}",
                    e.t
                )));
            }
            if e.t < prev_t {
                return Err(SeanError::Validation(format!(
                    "event {i}: timestamp {} decreases below {prev_t}",
                    e.t
                )));
            }
            prev_t = e.t;
            if e.src >= num_nodes || e.dst >= num_nodes {
                return Err(SeanError::Validation(format!(
                    "event {i}: endpoint out of range ({}, {}) with num_nodes {num_nodes}",
                    e.src, e.dst
                )));
            }
            if e.edge_feat.len() != feat_dim {
                return Err(SeanError::Validation(format!(
                    "event {i}: feature dim {} differs from graph-wide {feat_dim}",
                    e.edge_feat.len()
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        for (idx, e) in events.iter().enumerate() {
            adjacency[e.src].push(AdjEntry {
                event_idx: idx,
                other: e.dst,
                t: e.t,
            });
            adjacency[e.dst].push(AdjEntry {
                event_idx: idx,
                other: e.src,
                t: e.t,
            });
        }
        Ok(Self {
            events,
            num_nodes,
            feat_dim,
            adjacency,
            bipartite_offset,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn bipartite_offset(&self) -> Option<usize> {
        self.bipartite_offset
    }

    /// Range of valid destination candidates for negative sampling:
    /// the item side for bipartite graphs, every node otherwise.
    pub fn dst_candidates(&self) -> Range<usize> {
        match self.bipartite_offset {
            Some(offset) => offset..self.num_nodes,
            None => 0..self.num_nodes,
        }
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.num_nodes {
            return Err(SeanError::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes,
            });
        }
        Ok(())
    }

    /// Number of adjacency entries of `node` strictly before `t`.
    /// Each incident event counts once per endpoint occurrence.
    pub fn temporal_degree(&self, node: usize, t: f64) -> Result<u64> {
        self.check_node(node)?;
        let adj = &self.adjacency[node];
        Ok(adj.partition_point(|e| e.t < t) as u64)
    }

    /// The `sample_size` most recent interactions of `node` strictly before
    /// `t` (fewer if unavailable), with occurrence and degree statistics.
    pub fn neighbor_view(&self, node: usize, t: f64, sample_size: usize) -> Result<NeighborView> {
        self.check_node(node)?;
        let adj = &self.adjacency[node];
        let cut = adj.partition_point(|e| e.t < t);
        let start = cut.saturating_sub(sample_size);
        let entries: Vec<AdjEntry> = adj[start..cut].iter().rev().copied().collect();

        // Full-history occurrence counts for the target's partners.
        let mut partner_counts: HashMap<usize, u64> = HashMap::new();
        for e in &adj[..cut] {
            *partner_counts.entry(e.other).or_insert(0) += 1;
        }
        let freq: Vec<u64> = entries.iter().map(|e| partner_counts[&e.other]).collect();
        let neigh_degree: Vec<u64> = entries
            .iter()
            .map(|e| self.temporal_degree(e.other, t).expect("validated id"))
            .collect();

        Ok(NeighborView {
            target: node,
            query_t: t,
            entries,
            freq,
            neigh_degree,
        })
    }

    /// Chronological split at floor boundaries; ranges partition `[0, n)`.
    pub fn chronological_split(
        &self,
        spec: SplitSpec,
    ) -> Result<(Range<usize>, Range<usize>, Range<usize>)> {
        let n = self.events.len();
        if n == 0 {
            return Err(SeanError::EmptyGraph);
        }
        let b1 = (spec.train_frac * n as f64).floor() as usize;
        let b2 = ((spec.train_frac + spec.val_frac) * n as f64).floor() as usize;
        let b2 = b2.min(n);
        Ok((0..b1, b1..b2, b2..n))
    }

    /// Copy with `floor(rate * n)` uniformly chosen events (without
    /// replacement) given a fresh destination, uniform over nodes other
    /// than the source and the original destination. Timestamps, features,
    /// and labels are untouched.
    pub fn perturb_links(&self, rate: f64, seed: u64) -> TemporalGraph {
        self.perturb_links_indexed(rate, seed).0
    }

    /// As [`perturb_links`](Self::perturb_links), also returning the sorted
    /// indices of the rewired events.
    pub fn perturb_links_indexed(&self, rate: f64, seed: u64) -> (TemporalGraph, Vec<usize>) {
        assert!(
            (0.0..=1.0).contains(&rate),
            "perturb_links: rate {rate} outside [0, 1]"
        );
        let n = self.events.len();
        let k = (rate * n as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen: Vec<usize> = if k == 0 {
            Vec::new()
        } else {
            sample(&mut rng, n, k).into_vec()
        };
        chosen.sort_unstable();

        let mut events = self.events.clone();
        for &idx in &chosen {
            let src = events[idx].src;
            let old = events[idx].dst;
            let new_dst = loop {
                let cand = rng.gen_range(0..self.num_nodes);
                if cand != src && cand != old {
                    break cand;
                }
            };
            events[idx].dst = new_dst;
        }
        let g = TemporalGraph::new(events, self.num_nodes, self.feat_dim, self.bipartite_offset)
            .expect("perturbation preserves validity");
        (g, chosen)
    }

    /// Holds out `floor(fraction * num_nodes)` nodes and drops every event
    /// in `[0, train_end)` touching them. Later events are untouched.
    /// Returns the reduced graph and the sorted unseen-node set.
    pub fn mask_inductive_nodes(
        &self,
        train_end: usize,
        fraction: f64,
        seed: u64,
    ) -> Result<(TemporalGraph, Vec<usize>)> {
        if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
            return Err(SeanError::Validation(format!(
                "inductive fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let k = (fraction * self.num_nodes as f64).floor() as usize;
        if k == 0 {
            return Err(SeanError::Validation(format!(
                "inductive fraction {fraction} selects zero unseen nodes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unseen = sample(&mut rng, self.num_nodes, k).into_vec();
        unseen.sort_unstable();
        let unseen_set: std::collections::HashSet<usize> = unseen.iter().copied().collect();

        let events: Vec<Event> = self
            .events
            .iter()
            .enumerate()
            .filter(|(i, e)| {
                *i >= train_end || (!unseen_set.contains(&e.src) && !unseen_set.contains(&e.dst))
            })
            .map(|(_, e)| e.clone())
            .collect();
        let g = TemporalGraph::new(events, self.num_nodes, self.feat_dim, self.bipartite_offset)?;
        Ok((g, unseen))
    }

    /// Writes the unipartite CSV layout (`src,dst,timestamp,state_label,f...`).
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let feat_header: String = (1..=self.feat_dim).map(|i| format!(",f{i}")).collect();
        writeln!(out, "src,dst,timestamp,state_label{feat_header}")?;
        for e in &self.events {
            let feats: String = e.edge_feat.iter().map(|f| format!(",{f}")).collect();
            writeln!(
                out,
                "{},{},{},{}{}",
                e.src,
                e.dst,
                e.t,
                e.label.unwrap_or(0),
                feats
            )?;
        }
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| SeanError::Parse {
        line,
        message: format!("{what}: cannot parse {field:?}"),
    })
}

struct RawRow {
    a: usize,
    b: usize,
    t: f64,
    label: u8,
    feats: Vec<f64>,
}

/// Parses `a,b,timestamp,state_label,f1..fF` rows after one header line.
/// The feature width is fixed by the first data row.
fn parse_rows(path: &Path) -> Result<Vec<RawRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut feat_dim: Option<usize> = None;
    let mut prev_t = f64::NEG_INFINITY;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        if i == 0 {
            continue; // header
        }
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(SeanError::Parse {
                line: line_no,
                message: format!("expected at least 4 columns, found {}", fields.len()),
            });
        }
        let this_dim = fields.len() - 4;
        match feat_dim {
            None => feat_dim = Some(this_dim),
            Some(d) if d != this_dim => {
                return Err(SeanError::Parse {
                    line: line_no,
                    message: format!("expected {d} feature columns, found {this_dim}"),
                });
            }
            _ => {}
        }
        let a = parse_field(fields[0], line_no, "source id")?;
        let b = parse_field(fields[1], line_no, "destination id")?;
        let t: f64 = parse_field(fields[2], line_no, "timestamp")?;
        if t < 0.0 {
            return Err(SeanError::Parse {
                line: line_no,
                message: format!("negative timestamp {t}"),
            });
        }
        if t < prev_t {
            return Err(SeanError::Validation(format!(
                "line {line_no}: timestamp {t} breaks chronological order"
            )));
        }
        prev_t = t;
        let label_f: f64 = parse_field(fields[3], line_no, "state label")?;
        if label_f != 0.0 && label_f != 1.0 {
            return Err(SeanError::Parse {
                line: line_no,
                message: format!("state label must be 0 or 1, found {label_f}"),
            });
        }
        let mut feats = Vec::with_capacity(this_dim);
        for f in &fields[4..] {
            feats.push(parse_field(*f, line_no, "edge feature")?);
        }
        rows.push(RawRow {
            a,
            b,
            t,
            label: label_f as u8,
            feats,
        });
    }
    Ok(rows)
}

/// Loads the JODIE interaction layout: `user,item,timestamp,state_label,f...`
/// with one header line. Item ids are offset by the number of distinct
/// users so the combined node-id space is contiguous.
pub fn load_jodie_csv(path: &Path) -> Result<TemporalGraph> {
    let rows = parse_rows(path)?;
    let num_users = match rows.iter().map(|r| r.a).max() {
        Some(max_user) => {
            let distinct: std::collections::HashSet<usize> = rows.iter().map(|r| r.a).collect();
            if distinct.len() != max_user + 1 {
                return Err(SeanError::Validation(format!(
                    "user ids must be contiguous from 0: {} distinct ids, max id {max_user}",
                    distinct.len()
                )));
            }
            max_user + 1
        }
        None => 0,
    };
    let num_items = match rows.iter().map(|r| r.b).max() {
        Some(max_item) => {
            let distinct: std::collections::HashSet<usize> = rows.iter().map(|r| r.b).collect();
            if distinct.len() != max_item + 1 {
                return Err(SeanError::Validation(format!(
                    "item ids must be contiguous from 0: {} distinct ids, max id {max_item}",
                    distinct.len()
                )));
            }
            max_item + 1
        }
        None => 0,
    };
    let feat_dim = rows.first().map(|r| r.feats.len()).unwrap_or(0);
    let events = rows
        .into_iter()
        .map(|r| Event {
            src: r.a,
            dst: r.b + num_users,
            t: r.t,
            edge_feat: r.feats,
            label: Some(r.label),
        })
        .collect();
    TemporalGraph::new(events, num_users + num_items, feat_dim, Some(num_users))
}

/// Loads a unipartite CSV (`src,dst,timestamp,state_label,f...`) without
/// any re-indexing; node count is the highest id plus one.
pub fn load_unipartite_csv(path: &Path) -> Result<TemporalGraph> {
    let rows = parse_rows(path)?;
    let num_nodes = rows
        .iter()
        .map(|r| r.a.max(r.b) + 1)
        .max()
        .unwrap_or(0);
    let feat_dim = rows.first().map(|r| r.feats.len()).unwrap_or(0);
    let events = rows
        .into_iter()
        .map(|r| Event {
            src: r.a,
            dst: r.b,
            t: r.t,
            edge_feat: r.feats,
            label: Some(r.label),
        })
        .collect();
    TemporalGraph::new(events, num_nodes, feat_dim, None)
}

/// Seeded generator with planted recurrence: every event picks a uniform
/// source; with probability `recur_prob` the destination repeats one of the
/// source's previous destinations (event-weighted), otherwise it is uniform
/// over other nodes. Timestamps are the integers `1..=num_events`.
pub fn generate_synthetic(
    num_nodes: usize,
    num_events: usize,
    feat_dim: usize,
    recur_prob: f64,
    seed: u64,
) -> Result<TemporalGraph> {
    if num_nodes < 2 {
        return Err(SeanError::Validation(format!(
            "synthetic graph needs at least 2 nodes, got {num_nodes}"
        )));
    }
    if num_events == 0 {
        return Err(SeanError::Validation("synthetic graph needs events".into()));
    }
    if !(0.0..=1.0).contains(&recur_prob) {
        return Err(SeanError::Validation(format!(
            "recur_prob must lie in [0, 1], got {recur_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut past_dsts: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    let mut events = Vec::with_capacity(num_events);
    for i in 0..num_events {
        let src = rng.gen_range(0..num_nodes);
        let repeat = !past_dsts[src].is_empty() && rng.gen::<f64>() < recur_prob;
        let dst = if repeat {
            past_dsts[src][rng.gen_range(0..past_dsts[src].len())]
        } else {
            loop {
                let cand = rng.gen_range(0..num_nodes);
                if cand != src {
                    break cand;
                }
            }
        };
        past_dsts[src].push(dst);
        let edge_feat = (0..feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        events.push(Event {
            src,
            dst,
            t: (i + 1) as f64,
            edge_feat,
            label: None,
        });
    }
    TemporalGraph::new(events, num_nodes, feat_dim, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_graph() -> TemporalGraph {
        // (A,B,1), (A,B,2), (A,C,3) with A=0, B=1, C=2
        let events = vec![
            Event { src: 0, dst: 1, t: 1.0, edge_feat: vec![], label: None },
            Event { src: 0, dst: 1, t: 2.0, edge_feat: vec![], label: None },
            Event { src: 0, dst: 2, t: 3.0, edge_feat: vec![], label: None },
        ];
        TemporalGraph::new(events, 4, 0, None).unwrap()
    }

    #[test]
    fn neighbor_view_matches_hand_scan() {
        let g = toy_graph();
        let v = g.neighbor_view(0, 4.0, 10).unwrap();
        let partners: Vec<usize> = v.entries.iter().map(|e| e.other).collect();
        let times: Vec<f64> = v.entries.iter().map(|e| e.t).collect();
        assert_eq!(partners, vec![2, 1, 1]);
        assert_eq!(times, vec![3.0, 2.0, 1.0]);
        assert_eq!(v.freq, vec![1, 2, 2]);
        assert_eq!(v.neigh_degree, vec![1, 2, 2]);
    }

    #[test]
    fn neighbor_view_is_empty_before_history() {
        let g = toy_graph();
        assert!(g.neighbor_view(0, 1.0, 10).unwrap().is_empty());
    }

    #[test]
    fn neighbor_view_respects_sample_size() {
        let g = toy_graph();
        let v = g.neighbor_view(0, 4.0, 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.entries[0].other, 2);
        assert_eq!(v.entries[0].t, 3.0);
    }

    #[test]
    fn neighbor_view_rejects_out_of_range_node() {
        let g = toy_graph();
        assert!(matches!(
            g.neighbor_view(9, 1.0, 5),
            Err(SeanError::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn temporal_degree_counts_strict_history() {
        let g = toy_graph();
        assert_eq!(g.temporal_degree(0, 4.0).unwrap(), 3);
        assert_eq!(g.temporal_degree(0, 0.0).unwrap(), 0);
        assert_eq!(g.temporal_degree(3, 100.0).unwrap(), 0); // isolated node
        assert_eq!(g.temporal_degree(1, 3.0).unwrap(), 2);
    }

    #[test]
    fn split_at_floor_boundaries() {
        let events = (0..100)
            .map(|i| Event { src: 0, dst: 1, t: i as f64, edge_feat: vec![], label: None })
            .collect();
        let g = TemporalGraph::new(events, 2, 0, None).unwrap();
        let (tr, va, te) = g.chronological_split(SplitSpec::default()).unwrap();
        assert_eq!((tr, va, te), (0..70, 70..85, 85..100));
    }

    #[test]
    fn split_small_and_degenerate_counts() {
        let make = |n: usize| {
            let events = (0..n)
                .map(|i| Event { src: 0, dst: 1, t: i as f64, edge_feat: vec![], label: None })
                .collect();
            TemporalGraph::new(events, 2, 0, None).unwrap()
        };
        let (tr, va, te) = make(10).chronological_split(SplitSpec::default()).unwrap();
        assert_eq!((tr, va, te), (0..7, 7..8, 8..10));
        let (tr, va, te) = make(1).chronological_split(SplitSpec::default()).unwrap();
        assert_eq!((tr, va, te), (0..0, 0..0, 0..1));
    }

    #[test]
    fn empty_graph_split_errors() {
        let g = TemporalGraph::new(vec![], 2, 0, None).unwrap();
        assert!(matches!(
            g.chronological_split(SplitSpec::default()),
            Err(SeanError::EmptyGraph)
        ));
    }

    #[test]
    fn jodie_loader_reindexes_items() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(
            &path,
            "user_id,item_id,timestamp,state_label,f1,f2\n\
             0,0,1.0,0,0.5,0.5\n\
             1,1,2.0,0,0.25,-0.5\n\
             0,1,3.0,1,0.125,0.75\n",
        )
        .unwrap();
        let g = load_jodie_csv(&path).unwrap();
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.num_events(), 3);
        assert_eq!(g.feat_dim(), 2);
        assert_eq!(g.bipartite_offset(), Some(2));
        assert_eq!(g.events()[0].dst, 2); // item 0 offset by 2 users
        assert_eq!(g.events()[2].label, Some(1));
        assert_eq!(g.dst_candidates(), 2..4);
    }

    #[test]
    fn jodie_loader_names_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "user_id,item_id,timestamp,state_label,f1,f2\n\
             0,0,1.0,0,0.5,0.5\n\
             0,1,2.0,0,0.25\n",
        )
        .unwrap();
        match load_jodie_csv(&path) {
            Err(SeanError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn jodie_loader_rejects_nonmonotone_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wobble.csv");
        std::fs::write(
            &path,
            "user_id,item_id,timestamp,state_label\n0,0,5.0,0\n0,0,4.0,0\n",
        )
        .unwrap();
        assert!(matches!(
            load_jodie_csv(&path),
            Err(SeanError::Validation(_))
        ));
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = generate_synthetic(50, 1000, 4, 0.8, 7).unwrap();
        let b = generate_synthetic(50, 1000, 4, 0.8, 7).unwrap();
        assert_eq!(a.events(), b.events());
        assert_eq!(a.num_events(), 1000);
        assert!(a.events().iter().all(|e| e.src < 50 && e.dst < 50));
        // strictly increasing integer timestamps
        assert!(a
            .events()
            .iter()
            .enumerate()
            .all(|(i, e)| e.t == (i + 1) as f64));
    }

    #[test]
    fn synthetic_zero_recurrence_matches_collision_rate() {
        let num_nodes = 50;
        let g = generate_synthetic(num_nodes, 20_000, 0, 0.0, 13).unwrap();
        // Under pure uniform sampling the chance that a fresh destination
        // repeats one of the source's earlier picks is |distinct past| / (V-1),
        // evaluated against the trace itself.
        let mut past: Vec<std::collections::HashSet<usize>> = vec![Default::default(); num_nodes];
        let mut expected = 0.0f64;
        let mut observed = 0u32;
        for e in g.events() {
            expected += past[e.src].len() as f64 / (num_nodes - 1) as f64;
            if past[e.src].contains(&e.dst) {
                observed += 1;
            }
            past[e.src].insert(e.dst);
        }
        let expected_frac = expected / g.num_events() as f64;
        let observed_frac = observed as f64 / g.num_events() as f64;
        assert!(
            (observed_frac - expected_frac).abs() < 0.02,
            "observed {observed_frac} vs expected {expected_frac}"
        );
    }

    #[test]
    fn perturb_rate_zero_is_identity() {
        let g = generate_synthetic(20, 200, 2, 0.5, 3).unwrap();
        let p = g.perturb_links(0.0, 99);
        assert_eq!(g.events(), p.events());
    }

    #[test]
    fn perturb_rate_one_replaces_every_destination() {
        let g = generate_synthetic(20, 100, 0, 0.5, 3).unwrap();
        let (p, idx) = g.perturb_links_indexed(1.0, 5);
        assert_eq!(idx.len(), 100);
        let changed = g
            .events()
            .iter()
            .zip(p.events())
            .filter(|(a, b)| a.dst != b.dst)
            .count();
        assert_eq!(changed, 100);
        for (a, b) in g.events().iter().zip(p.events()) {
            assert_eq!(a.src, b.src);
            assert_eq!(a.t, b.t);
            assert_eq!(a.edge_feat, b.edge_feat);
            assert_ne!(b.src, b.dst);
        }
    }

    #[test]
    fn perturb_is_seed_deterministic() {
        let g = generate_synthetic(20, 300, 1, 0.5, 3).unwrap();
        let a = g.perturb_links(0.3, 11);
        let b = g.perturb_links(0.3, 11);
        assert_eq!(a.events(), b.events());
        // original untouched, count exact
        let changed = g
            .events()
            .iter()
            .zip(a.events())
            .filter(|(x, y)| x.dst != y.dst)
            .count();
        assert_eq!(changed, 90);
    }

    #[test]
    fn inductive_mask_drops_training_events_of_unseen_nodes() {
        let g = generate_synthetic(100, 500, 0, 0.4, 21).unwrap();
        let (tr, _, _) = g.chronological_split(SplitSpec::default()).unwrap();
        let (vis, unseen) = g.mask_inductive_nodes(tr.end, 0.1, 17).unwrap();
        assert_eq!(unseen.len(), 10);
        let unseen_set: std::collections::HashSet<_> = unseen.iter().copied().collect();
        let dropped = g.num_events() - vis.num_events();
        let new_train_end = tr.end - dropped;
        for e in &vis.events()[..new_train_end] {
            assert!(!unseen_set.contains(&e.src) && !unseen_set.contains(&e.dst));
        }
        // deterministic
        let (_, unseen2) = g.mask_inductive_nodes(tr.end, 0.1, 17).unwrap();
        assert_eq!(unseen, unseen2);
    }

    #[test]
    fn inductive_mask_rejects_empty_selection() {
        let g = generate_synthetic(5, 50, 0, 0.0, 1).unwrap();
        assert!(g.mask_inductive_nodes(35, 0.1, 1).is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_synthetic_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        let g = generate_synthetic(30, 400, 3, 0.6, 9).unwrap();
        g.export_csv(&path).unwrap();
        let back = load_unipartite_csv(&path).unwrap();
        assert_eq!(back.num_events(), g.num_events());
        assert_eq!(back.feat_dim(), g.feat_dim());
        for (a, b) in g.events().iter().zip(back.events()) {
            assert_eq!(a.src, b.src);
            assert_eq!(a.dst, b.dst);
            assert_eq!(a.t, b.t);
            assert_eq!(a.edge_feat, b.edge_feat);
        }
    }
}
