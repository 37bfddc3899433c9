//! Bipartite follower → elite networks, degree filters, activity metrics and
//! pseudonymous identifiers.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Follower,
    Elite,
}

/// Public identity of one entity. Elites carry a display name and a party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityRecord {
    pub pseudo_id: String,
    pub kind: EntityKind,
    pub name: Option<String>,
    pub party: Option<String>,
}

/// Binary follower → elite adjacency.
///
/// Followers are rows and elites are columns. Edges are kept sorted by
/// `(follower, elite)` and never repeat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteNetwork {
    follower_ids: Vec<String>,
    elite_ids: Vec<String>,
    edges: Vec<(u32, u32)>,
}

impl BipartiteNetwork {
    /// Builds a network from explicit index pairs. Duplicate pairs collapse.
    pub fn from_parts(
        follower_ids: Vec<String>,
        elite_ids: Vec<String>,
        mut edges: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let (n, m) = (follower_ids.len(), elite_ids.len());
        if let Some(&(i, j)) = edges
            .iter()
            .find(|&&(i, j)| i as usize >= n || j as usize >= m)
        {
            return Err(Error::InvalidArgument(format!(
                "edge ({i}, {j}) out of bounds for a {n}x{m} network"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self {
            follower_ids,
            elite_ids,
            edges,
        })
    }

    pub fn empty() -> Self {
        Self {
            follower_ids: Vec::new(),
            elite_ids: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn follower_ids(&self) -> &[String] {
        &self.follower_ids
    }

    pub fn elite_ids(&self) -> &[String] {
        &self.elite_ids
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn n_followers(&self) -> usize {
        self.follower_ids.len()
    }

    pub fn n_elites(&self) -> usize {
        self.elite_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Out-degree of every follower (number of elites followed).
    pub fn follower_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n_followers()];
        for &(i, _) in &self.edges {
            deg[i as usize] += 1;
        }
        deg
    }

    /// In-degree of every elite (number of followers).
    pub fn elite_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n_elites()];
        for &(_, j) in &self.edges {
            deg[j as usize] += 1;
        }
        deg
    }

    /// Compressed rows: `(offsets, elite indices)` with follower `i`'s elites
    /// at `indices[offsets[i]..offsets[i + 1]]`.
    pub fn row_adjacency(&self) -> (Vec<usize>, Vec<u32>) {
        let mut offsets = vec![0usize; self.n_followers() + 1];
        for &(i, _) in &self.edges {
            offsets[i as usize + 1] += 1;
        }
        for i in 0..self.n_followers() {
            offsets[i + 1] += offsets[i];
        }
        // edges are sorted by follower, so the elite column is already in row order
        let indices = self.edges.iter().map(|&(_, j)| j).collect();
        (offsets, indices)
    }

    /// Compressed columns: `(offsets, follower indices)`.
    pub fn col_adjacency(&self) -> (Vec<usize>, Vec<u32>) {
        let m = self.n_elites();
        let mut offsets = vec![0usize; m + 1];
        for &(_, j) in &self.edges {
            offsets[j as usize + 1] += 1;
        }
        for j in 0..m {
            offsets[j + 1] += offsets[j];
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0u32; self.edges.len()];
        for &(i, j) in &self.edges {
            indices[cursor[j as usize]] = i;
            cursor[j as usize] += 1;
        }
        (offsets, indices)
    }

    /// Keeps the listed followers and elites (by index), renumbering both sides
    /// in their original relative order.
    fn restrict(&self, keep_followers: &[bool], keep_elites: &[bool]) -> Self {
        fn remap(keep: &[bool]) -> Vec<Option<u32>> {
            let mut next = 0u32;
            keep.iter()
                .map(|&k| {
                    k.then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        }
        let fmap = remap(keep_followers);
        let emap = remap(keep_elites);
        let edges = self
            .edges
            .iter()
            .filter_map(|&(i, j)| Some((fmap[i as usize]?, emap[j as usize]?)))
            .collect();
        let pick = |ids: &[String], keep: &[bool]| {
            ids.iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(id, _)| id.clone())
                .collect()
        };
        Self {
            follower_ids: pick(&self.follower_ids, keep_followers),
            elite_ids: pick(&self.elite_ids, keep_elites),
            edges,
        }
    }

    /// Checks the structural invariants of a filtered network.
    pub fn check_filtered(&self, min_elites_followed: u32) -> Result<()> {
        if let Some(i) = self
            .follower_degrees()
            .iter()
            .position(|&d| d < min_elites_followed)
        {
            return Err(Error::InvalidArgument(format!(
                "follower {} follows fewer than {min_elites_followed} elites",
                self.follower_ids[i]
            )));
        }
        if let Some(j) = self.elite_degrees().iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "elite {} has no followers",
                self.elite_ids[j]
            )));
        }
        Ok(())
    }
}

/// Builds an unfiltered network from `(follower_id, elite_id)` records.
///
/// Indices are assigned in first-seen order on each side and duplicate
/// records collapse into one edge. Accounts that appear as elites are
/// dropped from the follower side, so elite → elite links are ignored.
pub fn ingest_edges<I, S>(records: I) -> Result<BipartiteNetwork>
where
    I: IntoIterator<Item = Result<(S, S)>>,
    S: AsRef<str>,
{
    let mut follower_index: HashMap<String, u32> = HashMap::new();
    let mut elite_index: HashMap<String, u32> = HashMap::new();
    let mut follower_ids = Vec::new();
    let mut elite_ids = Vec::new();
    let mut edges = Vec::new();

    for (n, record) in records.into_iter().enumerate() {
        let (follower, elite) = record?;
        let (follower, elite) = (follower.as_ref().trim(), elite.as_ref().trim());
        if follower.is_empty() || elite.is_empty() {
            return Err(Error::Parse {
                path: "<edges>".into(),
                line: n as u64 + 1,
                message: "empty entity id".into(),
            });
        }
        let i = *follower_index.entry(follower.to_owned()).or_insert_with(|| {
            follower_ids.push(follower.to_owned());
            follower_ids.len() as u32 - 1
        });
        let j = *elite_index.entry(elite.to_owned()).or_insert_with(|| {
            elite_ids.push(elite.to_owned());
            elite_ids.len() as u32 - 1
        });
        edges.push((i, j));
    }

    let net = BipartiteNetwork::from_parts(follower_ids, elite_ids, edges)?;
    if net
        .follower_ids
        .iter()
        .any(|id| elite_index.contains_key(id))
    {
        let keep_f: Vec<bool> = net
            .follower_ids
            .iter()
            .map(|id| !elite_index.contains_key(id))
            .collect();
        let keep_e = vec![true; net.n_elites()];
        return Ok(net.restrict(&keep_f, &keep_e));
    }
    Ok(net)
}

/// Optional account-popularity cut applied to followers before scaling.
#[derive(Clone, Copy, Debug)]
pub struct PopularityCut<'a> {
    pub min_account_followers: u64,
    /// Follower count of each account, keyed by the network's follower ids.
    /// Accounts missing from the map do not pass the cut.
    pub account_followers: &'a HashMap<String, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub followers_before: usize,
    pub elites_before: usize,
    pub edges_before: usize,
    pub dropped_low_degree: usize,
    pub dropped_low_popularity: usize,
    pub dropped_elites: usize,
    pub followers_after: usize,
    pub elites_after: usize,
    pub edges_after: usize,
}

/// Removes followers that follow fewer than `min_elites_followed` elites (and,
/// optionally, accounts below a popularity threshold), then drops elites that
/// are left without followers.
pub fn filter_network(
    net: &BipartiteNetwork,
    min_elites_followed: u32,
    popularity: Option<PopularityCut<'_>>,
) -> Result<(BipartiteNetwork, FilterReport)> {
    if min_elites_followed == 0 {
        return Err(Error::InvalidArgument(
            "min_elites_followed must be at least 1".into(),
        ));
    }
    let degrees = net.follower_degrees();
    let mut dropped_low_degree = 0;
    let mut dropped_low_popularity = 0;
    let keep_f: Vec<bool> = net
        .follower_ids
        .iter()
        .zip(&degrees)
        .map(|(id, &d)| {
            if d < min_elites_followed {
                dropped_low_degree += 1;
                return false;
            }
            if let Some(cut) = popularity {
                let count = cut.account_followers.get(id).copied();
                if count.is_none_or(|c| c < cut.min_account_followers) {
                    dropped_low_popularity += 1;
                    return false;
                }
            }
            true
        })
        .collect();

    let mut elite_has_follower = vec![false; net.n_elites()];
    for &(i, j) in &net.edges {
        if keep_f[i as usize] {
            elite_has_follower[j as usize] = true;
        }
    }
    let out = net.restrict(&keep_f, &elite_has_follower);
    let report = FilterReport {
        followers_before: net.n_followers(),
        elites_before: net.n_elites(),
        edges_before: net.edge_count(),
        dropped_low_degree,
        dropped_low_popularity,
        dropped_elites: net.n_elites() - out.n_elites(),
        followers_after: out.n_followers(),
        elites_after: out.n_elites(),
        edges_after: out.edge_count(),
    };
    Ok((out, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub mean_elite_in_degree: f64,
    pub mean_follower_out_degree: f64,
}

pub fn degree_summary(net: &BipartiteNetwork) -> Result<DegreeSummary> {
    if net.n_followers() == 0 || net.n_elites() == 0 {
        return Err(Error::Empty("network"));
    }
    let e = net.edge_count() as f64;
    Ok(DegreeSummary {
        mean_elite_in_degree: e / net.n_elites() as f64,
        mean_follower_out_degree: e / net.n_followers() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub pseudo_id: String,
    /// Posts per day since account creation.
    pub mean_tweets_per_day: f64,
    pub followers: u64,
    pub followees: u64,
}

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS` or a full RFC 3339 timestamp.
/// Offsets are folded into UTC.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    Err(Error::InvalidArgument(format!("not an ISO-8601 date: {s:?}")))
}

/// Mean posts per day between account creation and collection.
///
/// Elapsed time is counted in whole days, truncating any partial day.
pub fn compute_activity(
    pseudo_id: &str,
    total_posts: u64,
    created_at: NaiveDateTime,
    collected_at: NaiveDateTime,
    followers: u64,
    followees: u64,
) -> Result<ActivityRecord> {
    let days = (collected_at - created_at).num_days();
    if days <= 0 {
        return Err(Error::InvalidArgument(format!(
            "{pseudo_id}: collection date must be at least one day after creation"
        )));
    }
    Ok(ActivityRecord {
        pseudo_id: pseudo_id.to_owned(),
        mean_tweets_per_day: total_posts as f64 / days as f64,
        followers,
        followees,
    })
}

/// Bijection from raw account ids to random 128-bit hex pseudo ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PseudoIdMap {
    forward: HashMap<String, String>,
    order: Vec<String>,
}

impl PseudoIdMap {
    /// Draws one pseudo id per distinct raw id, in first-seen order, from a
    /// ChaCha stream seeded with `seed`. Collisions are redrawn.
    pub fn generate<'a>(raw_ids: impl IntoIterator<Item = &'a str>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut forward = HashMap::new();
        let mut used = HashSet::new();
        let mut order = Vec::new();
        for raw in raw_ids {
            if forward.contains_key(raw) {
                continue;
            }
            let pseudo = loop {
                let candidate = format!("{:032x}", rng.random::<u128>());
                if used.insert(candidate.clone()) {
                    break candidate;
                }
            };
            forward.insert(raw.to_owned(), pseudo);
            order.push(raw.to_owned());
        }
        Self { forward, order }
    }

    /// Rebuilds a map from persisted `(raw, pseudo)` pairs, rejecting
    /// anything that is not a bijection.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut forward = HashMap::new();
        let mut used = HashSet::new();
        let mut order = Vec::new();
        for (raw, pseudo) in pairs {
            if !used.insert(pseudo.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "pseudo id {pseudo} assigned twice"
                )));
            }
            if forward.insert(raw.clone(), pseudo).is_some() {
                return Err(Error::InvalidArgument(format!("raw id {raw} mapped twice")));
            }
            order.push(raw);
        }
        Ok(Self { forward, order })
    }

    pub fn get(&self, raw: &str) -> Option<&str> {
        self.forward.get(raw).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `(raw, pseudo)` pairs in assignment order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order
            .iter()
            .map(|raw| (raw.as_str(), self.forward[raw].as_str()))
    }

    /// Verifies that no two raw ids share a pseudo id.
    pub fn is_bijection(&self) -> bool {
        let distinct: HashSet<&String> = self.forward.values().collect();
        distinct.len() == self.forward.len() && self.order.len() == self.forward.len()
    }

    /// Rewrites every id of `net` to its pseudo id.
    pub fn pseudonymize(&self, net: &BipartiteNetwork) -> Result<BipartiteNetwork> {
        let map = |ids: &[String]| -> Result<Vec<String>> {
            ids.iter()
                .map(|id| {
                    self.get(id)
                        .map(str::to_owned)
                        .ok_or_else(|| Error::UnknownEntity(id.clone()))
                })
                .collect()
        };
        Ok(BipartiteNetwork {
            follower_ids: map(&net.follower_ids)?,
            elite_ids: map(&net.elite_ids)?,
            edges: net.edges.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pairs(list: &[(&str, &str)]) -> Vec<Result<(String, String)>> {
        list.iter()
            .map(|&(a, b)| Ok((a.to_owned(), b.to_owned())))
            .collect()
    }

    fn random_network(seed: u64, n: usize, m: usize, density: f64) -> BipartiteNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.random::<f64>() < density {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        BipartiteNetwork::from_parts(
            (0..n).map(|i| format!("u{i}")).collect(),
            (0..m).map(|j| format!("m{j}")).collect(),
            edges,
        )
        .unwrap()
    }

    #[test]
    fn empty_stream_gives_empty_network() {
        let net = ingest_edges(Vec::<Result<(String, String)>>::new()).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.n_followers(), 0);
        assert_eq!(net.n_elites(), 0);
    }

    #[test]
    fn duplicate_records_collapse() {
        let net = ingest_edges(pairs(&[("u1", "m1"), ("u1", "m1")])).unwrap();
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn first_seen_index_order() {
        let net = ingest_edges(pairs(&[("b", "y"), ("a", "x"), ("b", "x")])).unwrap();
        assert_eq!(net.follower_ids(), ["b", "a"]);
        assert_eq!(net.elite_ids(), ["y", "x"]);
        assert_eq!(net.edges(), [(0, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn empty_id_is_a_parse_error() {
        let err = ingest_edges(pairs(&[("u1", "m1"), ("", "m1")])).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn elite_to_elite_links_are_ignored() {
        let net = ingest_edges(pairs(&[("u1", "m1"), ("m2", "m1"), ("u1", "m2")])).unwrap();
        assert_eq!(net.follower_ids(), ["u1"]);
        assert_eq!(net.elite_ids(), ["m1", "m2"]);
        assert_eq!(net.edge_count(), 2);
    }

    #[test]
    fn low_degree_follower_dropped() {
        let net = ingest_edges(pairs(&[
            ("u1", "m1"),
            ("u1", "m2"),
            ("u2", "m1"),
            ("u2", "m2"),
            ("u2", "m3"),
        ]))
        .unwrap();
        let (out, report) = filter_network(&net, 3, None).unwrap();
        assert_eq!(out.follower_ids(), ["u2"]);
        assert_eq!(report.dropped_low_degree, 1);
        assert_eq!(out.n_elites(), 3);
    }

    #[test]
    fn orphaned_elites_pruned_after_follower_filter() {
        let net = ingest_edges(pairs(&[
            ("u1", "m1"),
            ("u1", "m2"),
            ("u1", "m3"),
            ("u2", "m4"),
        ]))
        .unwrap();
        let (out, report) = filter_network(&net, 3, None).unwrap();
        assert_eq!(out.elite_ids(), ["m1", "m2", "m3"]);
        assert_eq!(report.dropped_elites, 1);
        out.check_filtered(3).unwrap();
    }

    #[test]
    fn zero_threshold_rejected() {
        assert!(filter_network(&BipartiteNetwork::empty(), 0, None).is_err());
    }

    #[test]
    fn popularity_cut_drops_unknown_and_small_accounts() {
        let net = ingest_edges(pairs(&[("a", "m1"), ("b", "m1"), ("c", "m2")])).unwrap();
        let counts: HashMap<String, u64> = [("a".to_string(), 30u64), ("b".to_string(), 10)]
            .into_iter()
            .collect();
        let cut = PopularityCut {
            min_account_followers: 25,
            account_followers: &counts,
        };
        let (out, report) = filter_network(&net, 1, Some(cut)).unwrap();
        assert_eq!(out.follower_ids(), ["a"]);
        assert_eq!(out.elite_ids(), ["m1"]);
        assert_eq!(report.dropped_low_popularity, 2);
    }

    /// Exhaustive oracle: recount degrees by scanning the raw edge list.
    fn brute_force_filter(
        net: &BipartiteNetwork,
        min: u32,
    ) -> (Vec<String>, Vec<String>) {
        let followers: Vec<String> = (0..net.n_followers())
            .filter(|&i| {
                net.edges().iter().filter(|e| e.0 as usize == i).count() as u32 >= min
            })
            .map(|i| net.follower_ids()[i].clone())
            .collect();
        let elites: Vec<String> = (0..net.n_elites())
            .filter(|&j| {
                net.edges().iter().any(|&(i, jj)| {
                    jj as usize == j && followers.contains(&net.follower_ids()[i as usize])
                })
            })
            .map(|j| net.elite_ids()[j].clone())
            .collect();
        (followers, elites)
    }

    #[test]
    fn six_by_four_matches_exhaustive_enumeration() {
        for seed in 0..200 {
            let net = random_network(seed, 6, 4, 0.45);
            for min in 1..=4 {
                let (out, _) = filter_network(&net, min, None).unwrap();
                let (f, e) = brute_force_filter(&net, min);
                assert_eq!(out.follower_ids(), f.as_slice(), "seed {seed} min {min}");
                assert_eq!(out.elite_ids(), e.as_slice(), "seed {seed} min {min}");
            }
        }
    }

    #[test]
    fn degree_summary_complete_two_by_two() {
        let net = BipartiteNetwork::from_parts(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
        )
        .unwrap();
        let s = degree_summary(&net).unwrap();
        assert_eq!(s.mean_elite_in_degree, 2.0);
        assert_eq!(s.mean_follower_out_degree, 2.0);
    }

    #[test]
    fn degree_summary_matches_recount() {
        let net = random_network(7, 20, 5, 0.4);
        let s = degree_summary(&net).unwrap();
        let mut in_total = 0usize;
        for j in 0..5u32 {
            in_total += net.edges().iter().filter(|e| e.1 == j).count();
        }
        let mut out_total = 0usize;
        for i in 0..20u32 {
            out_total += net.edges().iter().filter(|e| e.0 == i).count();
        }
        assert!((s.mean_elite_in_degree - in_total as f64 / 5.0).abs() < 1e-12);
        assert!((s.mean_follower_out_degree - out_total as f64 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn degree_summary_empty_is_error() {
        assert!(degree_summary(&BipartiteNetwork::empty()).is_err());
    }

    #[test]
    fn adjacency_views_agree_with_edges() {
        let net = random_network(3, 15, 6, 0.3);
        let (ro, ri) = net.row_adjacency();
        let (co, ci) = net.col_adjacency();
        let mut from_rows = Vec::new();
        for i in 0..net.n_followers() {
            for &j in &ri[ro[i]..ro[i + 1]] {
                from_rows.push((i as u32, j));
            }
        }
        let mut from_cols = Vec::new();
        for j in 0..net.n_elites() {
            for &i in &ci[co[j]..co[j + 1]] {
                from_cols.push((i, j as u32));
            }
        }
        from_cols.sort_unstable();
        assert_eq!(from_rows, net.edges());
        assert_eq!(from_cols, net.edges());
    }

    #[test]
    fn activity_examples() {
        let d = |s| parse_timestamp(s).unwrap();
        let a = compute_activity("x", 0, d("2020-01-01"), d("2020-03-01"), 1, 1).unwrap();
        assert_eq!(a.mean_tweets_per_day, 0.0);
        let a = compute_activity("x", 100, d("2023-01-01"), d("2023-02-20"), 1, 1).unwrap();
        assert_eq!(a.mean_tweets_per_day, 2.0);
        let a = compute_activity("x", 3650, d("2020-01-01"), d("2022-09-27"), 1, 1).unwrap();
        assert_eq!(crate::format::f5(a.mean_tweets_per_day), "3.65000");
    }

    #[test]
    fn partial_days_truncate() {
        let a = compute_activity(
            "x",
            10,
            parse_timestamp("2023-01-01T12:00:00Z").unwrap(),
            parse_timestamp("2023-01-03T06:00:00Z").unwrap(),
            0,
            0,
        )
        .unwrap();
        assert_eq!(a.mean_tweets_per_day, 10.0);
    }

    #[test]
    fn nonpositive_span_is_error() {
        let d = parse_timestamp("2023-01-01").unwrap();
        assert!(compute_activity("x", 1, d, d, 0, 0).is_err());
        let later = parse_timestamp("2023-01-05").unwrap();
        assert!(compute_activity("x", 1, later, d, 0, 0).is_err());
    }

    #[test]
    fn bad_date_rejected() {
        assert!(parse_timestamp("01/02/2023").is_err());
    }

    #[test]
    fn pseudo_ids_are_a_seeded_bijection() {
        let raw: Vec<String> = (0..5000).map(|i| format!("acct{i}")).collect();
        let map = PseudoIdMap::generate(raw.iter().map(String::as_str), 42);
        assert_eq!(map.len(), 5000);
        assert!(map.is_bijection());
        let again = PseudoIdMap::generate(raw.iter().map(String::as_str), 42);
        assert_eq!(map, again);
        let other = PseudoIdMap::generate(raw.iter().map(String::as_str), 43);
        assert_ne!(map.get("acct0"), other.get("acct0"));
        assert!(map.pairs().all(|(_, p)| p.len() == 32));
        let rebuilt =
            PseudoIdMap::from_pairs(map.pairs().map(|(a, b)| (a.to_owned(), b.to_owned())))
                .unwrap();
        assert_eq!(rebuilt, map);
    }

    #[test]
    fn duplicate_pseudo_rejected() {
        let pairs = vec![("a".to_string(), "p".to_string()), ("b".into(), "p".into())];
        assert!(PseudoIdMap::from_pairs(pairs).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(seed in 0u64..500, min in 1u32..5) {
            let net = random_network(seed, 25, 8, 0.3);
            let (once, _) = filter_network(&net, min, None).unwrap();
            let (twice, report) = filter_network(&once, min, None).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(report.dropped_low_degree + report.dropped_elites, 0);
        }

        #[test]
        fn min_one_only_prunes_isolated_elites(seed in 0u64..500) {
            let mut net = random_network(seed, 12, 6, 0.25);
            // add an isolated follower-free elite
            net.elite_ids.push("lonely".into());
            let (out, report) = filter_network(&net, 1, None).unwrap();
            let isolated_followers = net.follower_degrees().iter().filter(|&&d| d == 0).count();
            prop_assert_eq!(report.dropped_low_degree, isolated_followers);
            prop_assert_eq!(out.edge_count(), net.edge_count());
            let isolated_elites = net.elite_degrees().iter().filter(|&&d| d == 0).count();
            prop_assert_eq!(report.dropped_elites, isolated_elites);
        }
    }
}
