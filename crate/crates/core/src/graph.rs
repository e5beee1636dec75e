//! Follow and interaction graphs over labelled users, and political homophily
//! measured as nominal assortativity of the stance label.
//!
//! Assortativity always uses the symmetric convention: every edge of weight
//! `w` adds `w/2` to both `e[i][j]` and `e[j][i]`, so directed graphs are
//! symmetrised before `r` is computed. The directed mixing matrix is still
//! available from [`mixing_matrix`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, StanceLabel};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Follow,
    Interaction,
}

/// Directed or undirected weighted edge between node indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph {
    /// Sorted by user id when built from a dataset.
    pub nodes: Vec<(String, StanceLabel)>,
    pub edges: Vec<Edge>,
    pub directed: bool,
    pub kind: GraphKind,
}

impl LabeledGraph {
    /// Checks endpoints, weights and self-loops.
    pub fn new(
        nodes: Vec<(String, StanceLabel)>,
        edges: Vec<(usize, usize, f64)>,
        directed: bool,
        kind: GraphKind,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut out = Vec::with_capacity(edges.len());
        for (src, dst, weight) in edges {
            if src >= n || dst >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({src}, {dst}) references a missing node"
                )));
            }
            if src == dst {
                return Err(Error::InvalidInput(format!("self-loop on node {src}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge ({src}, {dst}) has weight {weight}"
                )));
            }
            out.push(Edge { src, dst, weight });
        }
        Ok(LabeledGraph {
            nodes,
            edges: out,
            directed,
            kind,
        })
    }

    pub fn label(&self, node: usize) -> StanceLabel {
        self.nodes[node].1
    }

    fn label_indices(&self) -> Vec<usize> {
        self.nodes.iter().map(|(_, l)| l.index()).collect()
    }

    fn edge_triples(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.src, e.dst, e.weight)).collect()
    }
}

/// Per-kind weights summed into interaction edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionWeights {
    pub retweet: f64,
    pub reply: f64,
    pub mention: f64,
    pub favourite: f64,
}

impl Default for InteractionWeights {
    fn default() -> Self {
        InteractionWeights {
            retweet: 1.0,
            reply: 1.0,
            mention: 1.0,
            favourite: 1.0,
        }
    }
}

fn labeled_nodes(dataset: &Dataset) -> Result<(Vec<(String, StanceLabel)>, HashMap<&str, usize>)> {
    let nodes: Vec<(String, StanceLabel)> = dataset
        .labeled_users()
        .map(|(u, l)| (u.user_id.clone(), l))
        .collect();
    if nodes.len() < 2 {
        return Err(Error::DegenerateGraph(format!(
            "{} labeled users; at least 2 required",
            nodes.len()
        )));
    }
    let index = dataset
        .labeled_users()
        .enumerate()
        .map(|(i, (u, _))| (u.user_id.as_str(), i))
        .collect();
    Ok((nodes, index))
}

/// Directed follow graph over labelled users: `u -> v` when `u` lists `v` as
/// a followee or `v` lists `u` as a follower. Unit weights, no duplicates.
pub fn build_follow_graph(dataset: &Dataset) -> Result<LabeledGraph> {
    let (nodes, index) = labeled_nodes(dataset)?;
    let mut pairs = BTreeSet::new();
    for (user, _) in dataset.labeled_users() {
        let u = index[user.user_id.as_str()];
        for followee in &user.followees {
            if let Some(&v) = index.get(followee.as_str()) {
                pairs.insert((u, v));
            }
        }
        for follower in &user.followers {
            if let Some(&w) = index.get(follower.as_str()) {
                pairs.insert((w, u));
            }
        }
    }
    let edges = pairs
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a, b, 1.0))
        .collect();
    LabeledGraph::new(nodes, edges, true, GraphKind::Follow)
}

pub fn build_interaction_graph(dataset: &Dataset) -> Result<LabeledGraph> {
    build_interaction_graph_with(dataset, &InteractionWeights::default())
}

/// Directed weighted graph where `w(u -> v)` sums `u`'s retweets of, replies
/// to and mentions of `v`, plus `u`'s favourites of tweets by `v`.
pub fn build_interaction_graph_with(
    dataset: &Dataset,
    weights: &InteractionWeights,
) -> Result<LabeledGraph> {
    let (nodes, index) = labeled_nodes(dataset)?;
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (user, _) in dataset.labeled_users() {
        let u = index[user.user_id.as_str()];
        let mut add = |target: &str, w: f64| {
            if let Some(&v) = index.get(target) {
                if v != u && w > 0.0 {
                    *acc.entry((u, v)).or_default() += w;
                }
            }
        };
        for tweet in &user.timeline {
            if let Some(t) = &tweet.retweet_of {
                add(t, weights.retweet);
            }
            if let Some(t) = &tweet.reply_to {
                add(t, weights.reply);
            }
            for m in &tweet.mentions {
                add(m, weights.mention);
            }
        }
        for fav in &user.favourites {
            add(&fav.author_id, weights.favourite);
        }
    }
    let edges = acc.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    LabeledGraph::new(nodes, edges, true, GraphKind::Interaction)
}

/// Fractions of edge weight by (source label, target label), PI first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingMatrix {
    pub e: [[f64; 2]; 2],
    /// Row sums.
    pub a: [f64; 2],
    /// Column sums.
    pub b: [f64; 2],
}

impl MixingMatrix {
    fn from_counts(mut e: [[f64; 2]; 2]) -> Self {
        let total: f64 = e.iter().flatten().sum();
        for row in e.iter_mut() {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let a = [e[0][0] + e[0][1], e[1][0] + e[1][1]];
        let b = [e[0][0] + e[1][0], e[0][1] + e[1][1]];
        MixingMatrix { e, a, b }
    }

    /// Within-label share, taken as one minus the off-diagonal so that a
    /// graph without cross edges has trace exactly 1.
    pub fn trace(&self) -> f64 {
        1.0 - self.e[0][1] - self.e[1][0]
    }

    /// Within-label weight expected if labels were independent: sum of a_i b_i.
    pub fn independence_baseline(&self) -> f64 {
        self.a[0] * self.b[0] + self.a[1] * self.b[1]
    }

    /// Nominal assortativity of this matrix.
    pub fn assortativity(&self) -> Result<f64> {
        let baseline = self.independence_baseline();
        let denom = 1.0 - baseline;
        if denom.abs() < 1e-15 {
            return Err(Error::UndefinedAssortativity);
        }
        Ok(((self.trace() - baseline) / denom).clamp(-1.0, 1.0))
    }
}

fn mixing_from(labels: &[usize], edges: &[(usize, usize, f64)], symmetric: bool) -> Result<MixingMatrix> {
    if edges.is_empty() {
        return Err(Error::DegenerateGraph("graph has no edges".into()));
    }
    let mut e = [[0.0; 2]; 2];
    for &(s, d, w) in edges {
        let (i, j) = (labels[s], labels[d]);
        if symmetric {
            e[i][j] += w / 2.0;
            e[j][i] += w / 2.0;
        } else {
            e[i][j] += w;
        }
    }
    Ok(MixingMatrix::from_counts(e))
}

/// Mixing matrix in the graph's own orientation: directed fractions for
/// directed graphs, symmetric ones otherwise.
pub fn mixing_matrix(graph: &LabeledGraph) -> Result<MixingMatrix> {
    mixing_from(&graph.label_indices(), &graph.edge_triples(), !graph.directed)
}

/// Mixing matrix with every edge counted half in each direction.
pub fn symmetric_mixing_matrix(graph: &LabeledGraph) -> Result<MixingMatrix> {
    mixing_from(&graph.label_indices(), &graph.edge_triples(), true)
}

/// Newman's nominal assortativity `r = (Σe_ii − Σa_i b_i) / (1 − Σa_i b_i)`
/// over the symmetric mixing matrix.
pub fn nominal_assortativity(graph: &LabeledGraph) -> Result<f64> {
    symmetric_mixing_matrix(graph)?.assortativity()
}

/// Per node with any incident weight: the share of that weight going to
/// neighbours with the same label (edges taken as undirected).
fn same_label_fractions(labels: &[usize], edges: &[(usize, usize, f64)], n: usize) -> Vec<f64> {
    let mut same = vec![0.0; n];
    let mut total = vec![0.0; n];
    for &(s, d, w) in edges {
        total[s] += w;
        total[d] += w;
        if labels[s] == labels[d] {
            same[s] += w;
            same[d] += w;
        }
    }
    same.iter()
        .zip(&total)
        .filter(|(_, &t)| t > 0.0)
        .map(|(s, t)| s / t)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomophilyReport {
    pub assortativity_r: f64,
    /// Label-permutation p-value; the headline figure.
    pub p_value: f64,
    /// Mann–Whitney U p-value comparing observed same-label neighbour
    /// fractions against those of the permuted graphs.
    pub mww_p_value: f64,
    pub mww_statistic: f64,
    pub method: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_permutations: usize,
    /// Mixing matrix in the graph's own orientation.
    pub mixing: MixingMatrix,
}

pub const MIN_PERMUTATIONS: usize = 100;

pub const HOMOPHILY_METHOD: &str = "p: label permutation on r (+1 smoothed); \
mww_p: Mann-Whitney U of per-node same-label neighbour fractions, observed vs permuted";

/// Assortativity with two significance measures.
///
/// The headline p-value is `(1 + #{r_perm >= r}) / (1 + n_permutations)`
/// where each replicate shuffles labels over nodes while keeping every edge.
/// Replicate `i` draws from its own ChaCha stream, so results do not depend
/// on thread scheduling.
pub fn homophily_significance(
    graph: &LabeledGraph,
    n_permutations: usize,
    seed: u64,
) -> Result<HomophilyReport> {
    if n_permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_PERMUTATIONS} permutations required, got {n_permutations}"
        )));
    }
    if graph.edges.len() < 2 {
        return Err(Error::DegenerateGraph(format!(
            "{} edge(s); significance needs at least 2",
            graph.edges.len()
        )));
    }
    let labels = graph.label_indices();
    let edges = graph.edge_triples();
    let n = graph.nodes.len();
    let observed = mixing_from(&labels, &edges, true)?.assortativity()?;
    let observed_fractions = same_label_fractions(&labels, &edges, n);

    let replicates: Vec<(Option<f64>, Vec<f64>)> = (0..n_permutations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut rng);
            let r = mixing_from(&shuffled, &edges, true)
                .and_then(|m| m.assortativity())
                .ok();
            (r, same_label_fractions(&shuffled, &edges, n))
        })
        .collect();

    let at_least = replicates
        .iter()
        .filter(|(r, _)| r.is_some_and(|r| r >= observed - 1e-12))
        .count();
    let p_value = (at_least + 1) as f64 / (n_permutations + 1) as f64;
    let pooled: Vec<f64> = replicates.into_iter().flat_map(|(_, f)| f).collect();
    let mww = stats::mann_whitney_u(&observed_fractions, &pooled)?;

    Ok(HomophilyReport {
        assortativity_r: observed,
        p_value,
        mww_p_value: mww.p_value,
        mww_statistic: mww.statistic,
        method: HOMOPHILY_METHOD.to_string(),
        n_nodes: n,
        n_edges: graph.edges.len(),
        n_permutations,
        mixing: mixing_matrix(graph)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    GraphMl,
    Csv,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Dot => "dot",
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Csv => "csv",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" | "gv" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::GraphMl),
            "csv" => Ok(GraphFormat::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Serialises the graph with node attribute `stance` and edge attribute
/// `weight`. Nodes are written in user-id order and edges in (source,
/// target) id order, so repeated exports are byte-identical.
pub fn render_graph(graph: &LabeledGraph, format: GraphFormat) -> String {
    let mut order: Vec<usize> = (0..graph.nodes.len()).collect();
    order.sort_by(|&a, &b| graph.nodes[a].0.cmp(&graph.nodes[b].0));
    let mut edges: Vec<&Edge> = graph.edges.iter().collect();
    edges.sort_by(|a, b| {
        (&graph.nodes[a.src].0, &graph.nodes[a.dst].0)
            .cmp(&(&graph.nodes[b.src].0, &graph.nodes[b.dst].0))
    });
    let kind = match graph.kind {
        GraphKind::Follow => "follow",
        GraphKind::Interaction => "interaction",
    };
    let mut out = String::new();
    match format {
        GraphFormat::Dot => {
            let (keyword, arrow) = if graph.directed {
                ("digraph", "->")
            } else {
                ("graph", "--")
            };
            let _ = writeln!(out, "{keyword} {kind} {{");
            for &i in &order {
                let (id, label) = &graph.nodes[i];
                let _ = writeln!(out, "  {} [stance=\"{label}\"];", dot_quote(id));
            }
            for e in edges {
                let _ = writeln!(
                    out,
                    "  {} {arrow} {} [weight={}];",
                    dot_quote(&graph.nodes[e.src].0),
                    dot_quote(&graph.nodes[e.dst].0),
                    e.weight
                );
            }
            out.push_str("}\n");
        }
        GraphFormat::GraphMl => {
            out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
            out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
            out.push_str("  <key id=\"stance\" for=\"node\" attr.name=\"stance\" attr.type=\"string\"/>\n");
            out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
            let default = if graph.directed { "directed" } else { "undirected" };
            let _ = writeln!(out, "  <graph id=\"{kind}\" edgedefault=\"{default}\">");
            for &i in &order {
                let (id, label) = &graph.nodes[i];
                let _ = writeln!(
                    out,
                    "    <node id=\"{}\"><data key=\"stance\">{label}</data></node>",
                    xml_escape(id)
                );
            }
            for e in edges {
                let _ = writeln!(
                    out,
                    "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data></edge>",
                    xml_escape(&graph.nodes[e.src].0),
                    xml_escape(&graph.nodes[e.dst].0),
                    e.weight
                );
            }
            out.push_str("  </graph>\n</graphml>\n");
        }
        GraphFormat::Csv => {
            out.push_str("src,dst,weight,src_stance,dst_stance\n");
            for e in edges {
                let (s, sl) = &graph.nodes[e.src];
                let (d, dl) = &graph.nodes[e.dst];
                let _ = writeln!(out, "{},{},{},{sl},{dl}", csv_field(s), csv_field(d), e.weight);
            }
        }
    }
    out
}

/// Writes [`render_graph`] output to `path` and returns the byte count.
pub fn export_graph(graph: &LabeledGraph, format: GraphFormat, path: &Path) -> Result<u64> {
    let text = render_graph(graph, format);
    std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    Ok(text.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Territory, Tweet, UserRecord};
    use StanceLabel::{AI, PI};

    fn nodes(labels: &[StanceLabel]) -> Vec<(String, StanceLabel)> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("n{i:02}"), *l))
            .collect()
    }

    fn undirected(labels: &[StanceLabel], edges: &[(usize, usize)]) -> LabeledGraph {
        let e = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        LabeledGraph::new(nodes(labels), e, false, GraphKind::Follow).unwrap()
    }

    fn labeled(id: &str, label: StanceLabel) -> UserRecord {
        let mut u = UserRecord::new(id, "");
        u.label = Some(label);
        u
    }

    fn tweet(author: &str) -> Tweet {
        Tweet {
            tweet_id: "t".into(),
            author_id: author.into(),
            text: String::new(),
            created_at: 0,
            retweet_of: None,
            reply_to: None,
            mentions: vec![],
            urls: vec![],
            retweet_count: 0,
            favourite_count: 0,
        }
    }

    #[test]
    fn mixing_matrix_examples() {
        let g = undirected(&[PI, PI, AI, AI, PI, AI], &[(0, 1), (2, 3), (4, 5)]);
        let m = mixing_matrix(&g).unwrap();
        let third = 1.0 / 3.0;
        let sixth = 1.0 / 6.0;
        for (got, want) in m.e.iter().flatten().zip([third, sixth, sixth, third]) {
            assert!((got - want).abs() < 1e-15);
        }
        let single = LabeledGraph::new(nodes(&[PI, PI]), vec![(0, 1, 1.0)], true, GraphKind::Follow).unwrap();
        assert_eq!(mixing_matrix(&single).unwrap().e, [[1.0, 0.0], [0.0, 0.0]]);

        let empty = undirected(&[PI, AI], &[]);
        assert!(mixing_matrix(&empty).is_err());
    }

    #[test]
    fn weight_scaling_leaves_mixing_unchanged() {
        let g = LabeledGraph::new(
            nodes(&[PI, AI, PI]),
            vec![(0, 1, 1.5), (1, 2, 0.25), (2, 0, 3.0)],
            true,
            GraphKind::Interaction,
        )
        .unwrap();
        let mut doubled = g.clone();
        doubled.edges.iter_mut().for_each(|e| e.weight *= 2.0);
        assert_eq!(mixing_matrix(&g).unwrap(), mixing_matrix(&doubled).unwrap());
        assert_eq!(nominal_assortativity(&g).unwrap(), nominal_assortativity(&doubled).unwrap());
    }

    #[test]
    fn assortativity_examples() {
        let homophilous = undirected(&[PI, PI, AI, AI], &[(0, 1), (2, 3)]);
        assert_eq!(nominal_assortativity(&homophilous).unwrap(), 1.0);

        let bipartite = undirected(&[PI, PI, AI, AI], &[(0, 2), (0, 3), (1, 2), (1, 3)]);
        assert_eq!(nominal_assortativity(&bipartite).unwrap(), -1.0);

        let path = undirected(&[PI, PI, AI, AI], &[(0, 1), (1, 2), (2, 3)]);
        assert!((nominal_assortativity(&path).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let monochrome = undirected(&[PI, PI, PI], &[(0, 1), (1, 2)]);
        assert!(matches!(nominal_assortativity(&monochrome), Err(Error::UndefinedAssortativity)));
    }

    #[test]
    fn graph_invariants_rejected() {
        assert!(LabeledGraph::new(nodes(&[PI, AI]), vec![(0, 0, 1.0)], true, GraphKind::Follow).is_err());
        assert!(LabeledGraph::new(nodes(&[PI, AI]), vec![(0, 2, 1.0)], true, GraphKind::Follow).is_err());
        assert!(LabeledGraph::new(nodes(&[PI, AI]), vec![(0, 1, 0.0)], true, GraphKind::Follow).is_err());
    }

    #[test]
    fn follow_graph_dedups_and_drops_unlabeled() {
        let mut d = Dataset::new(Territory::catalonia(), 0);
        let mut a = labeled("a", PI);
        a.followees = vec!["b".into(), "c".into(), "outsider".into()];
        let mut b = labeled("b", AI);
        b.followers = vec!["a".into()];
        let c = UserRecord::new("c", "");
        d.insert(a);
        d.insert(b);
        d.insert(c);
        let g = build_follow_graph(&d).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, vec![Edge { src: 0, dst: 1, weight: 1.0 }]);

        let mut lonely = Dataset::new(Territory::catalonia(), 0);
        lonely.insert(labeled("a", PI));
        assert!(matches!(build_follow_graph(&lonely), Err(Error::DegenerateGraph(_))));
    }

    #[test]
    fn interaction_weights_sum_per_pair() {
        let mut d = Dataset::new(Territory::catalonia(), 0);
        let mut u = labeled("u", PI);
        let mut rt = tweet("u");
        rt.retweet_of = Some("v".into());
        let mut mention = tweet("u");
        mention.mentions = vec!["v".into()];
        u.timeline = vec![rt.clone(), mention];
        u.favourites = vec![tweet("v")];
        d.insert(u);
        d.insert(labeled("v", AI));
        let g = build_interaction_graph(&d).unwrap();
        assert_eq!(g.edges, vec![Edge { src: 0, dst: 1, weight: 3.0 }]);

        d.users.get_mut("u").unwrap().timeline = vec![rt.clone(), rt];
        d.users.get_mut("u").unwrap().favourites.clear();
        let g = build_interaction_graph(&d).unwrap();
        assert_eq!(g.edges[0].weight, 2.0);

        d.users.get_mut("u").unwrap().timeline.clear();
        let g = build_interaction_graph(&d).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (2, 0));
    }

    #[test]
    fn perfect_homophily_is_significant() {
        // Two 10-node cliques.
        let labels: Vec<StanceLabel> = (0..20).map(|i| if i < 10 { PI } else { AI }).collect();
        let mut edges = Vec::new();
        for block in [0, 10] {
            for i in block..block + 10 {
                for j in i + 1..block + 10 {
                    edges.push((i, j));
                }
            }
        }
        let g = undirected(&labels, &edges);
        let report = homophily_significance(&g, 1000, 3).unwrap();
        assert_eq!(report.assortativity_r, 1.0);
        assert!(report.p_value <= 0.01, "{}", report.p_value);
        assert!(report.p_value > 0.0);
        assert!(report.mww_p_value < 0.01);
        assert_eq!(report, homophily_significance(&g, 1000, 3).unwrap());
    }

    #[test]
    fn significance_preconditions() {
        let g = undirected(&[PI, AI], &[(0, 1)]);
        assert!(matches!(homophily_significance(&g, 200, 0), Err(Error::DegenerateGraph(_))));
        let g = undirected(&[PI, AI, PI], &[(0, 1), (1, 2)]);
        assert!(homophily_significance(&g, 99, 0).is_err());
    }

    #[test]
    fn exports_are_deterministic() {
        let g = LabeledGraph::new(
            vec![("b".into(), AI), ("a".into(), PI)],
            vec![(1, 0, 1.0)],
            true,
            GraphKind::Follow,
        )
        .unwrap();
        let dot = render_graph(&g, GraphFormat::Dot);
        assert_eq!(dot.matches("->").count(), 1);
        assert!(dot.find("\"a\"").unwrap() < dot.find("\"b\" [").unwrap());
        assert_eq!(dot, render_graph(&g, GraphFormat::Dot));

        let csv = render_graph(&g, GraphFormat::Csv);
        assert_eq!(csv, "src,dst,weight,src_stance,dst_stance\na,b,1,PI,AI\n");

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("g1.graphml");
        let p2 = dir.path().join("g2.graphml");
        let n1 = export_graph(&g, GraphFormat::GraphMl, &p1).unwrap();
        export_graph(&g, GraphFormat::GraphMl, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(n1, std::fs::metadata(&p1).unwrap().len());
        assert!(matches!("svg".parse::<GraphFormat>(), Err(Error::UnknownFormat(_))));
    }
}
