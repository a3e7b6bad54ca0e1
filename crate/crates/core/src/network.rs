//! Road network of population zones.
//!
//! Nodes are zone centroids carrying population and housing data; edges join
//! adjacent zones. Distances between users and stations are always graph
//! shortest paths, never straight lines.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("edge {index} references unknown node {node}")]
    UnknownEndpoint { index: usize, node: u32 },
    #[error("edge {index} ({a}-{b}) has non-positive length {length}")]
    BadLength {
        index: usize,
        a: u32,
        b: u32,
        length: f64,
    },
    #[error("node {node}: {what}")]
    BadNode { node: u32, what: String },
    #[error("network is disconnected: nodes {unreached:?} are not reachable from node {origin}")]
    Disconnected { origin: u32, unreached: Vec<u32> },
    #[error("network file: {0}")]
    Format(String),
    #[error("network file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fractions of residents living in single, attached and apartment housing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HousingMix {
    pub single: f64,
    pub attached: f64,
    pub apartment: f64,
}

impl HousingMix {
    pub fn sum(&self) -> f64 {
        self.single + self.attached + self.apartment
    }
}

/// Number of household income brackets used by the price-sensitive dataset.
pub const INCOME_BRACKETS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub x_km: f64,
    pub y_km: f64,
    pub population: f64,
    pub city_center: bool,
    pub housing_mix: HousingMix,
    /// Population share per income bracket, lowest bracket first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub income_mix: Option<[f64; INCOME_BRACKETS]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub node_a: u32,
    pub node_b: u32,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    index: HashMap<u32, usize>,
}

const MIX_TOLERANCE: f64 = 1e-9;

fn check_fractions(node: u32, name: &str, values: &[f64]) -> Result<(), NetworkError> {
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(NetworkError::BadNode {
            node,
            what: format!("{name} fractions must lie in [0, 1], got {values:?}"),
        });
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > MIX_TOLERANCE {
        return Err(NetworkError::BadNode {
            node,
            what: format!("{name} fractions must sum to 1, got {sum}"),
        });
    }
    Ok(())
}

impl Network {
    /// Builds and validates a network. Connectivity is checked as well.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        let mut net = Network {
            nodes,
            edges,
            index: HashMap::new(),
        };
        net.reindex()?;
        net.validate()?;
        Ok(net)
    }

    /// Rebuilds the id lookup; needed after deserialization.
    pub(crate) fn reindex(&mut self) -> Result<(), NetworkError> {
        self.index.clear();
        for (pos, node) in self.nodes.iter().enumerate() {
            if self.index.insert(node.id, pos).is_some() {
                return Err(NetworkError::DuplicateNode(node.id));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        for node in &self.nodes {
            if !(node.population >= 0.0 && node.population.is_finite()) {
                return Err(NetworkError::BadNode {
                    node: node.id,
                    what: format!(
                        "population must be finite and non-negative, got {}",
                        node.population
                    ),
                });
            }
            let mix = node.housing_mix;
            check_fractions(
                node.id,
                "housing",
                &[mix.single, mix.attached, mix.apartment],
            )?;
            if let Some(income) = &node.income_mix {
                check_fractions(node.id, "income", income)?;
            }
        }
        for (index, edge) in self.edges.iter().enumerate() {
            for node in [edge.node_a, edge.node_b] {
                if !self.index.contains_key(&node) {
                    return Err(NetworkError::UnknownEndpoint { index, node });
                }
            }
            if !(edge.length_km > 0.0 && edge.length_km.is_finite()) {
                return Err(NetworkError::BadLength {
                    index,
                    a: edge.node_a,
                    b: edge.node_b,
                    length: edge.length_km,
                });
            }
        }
        if let Some(first) = self.nodes.first() {
            self.shortest_path_distances(first.id)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of a node id in `nodes`.
    pub fn position(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.position(id).map(|p| &self.nodes[p])
    }

    pub fn total_population(&self) -> f64 {
        self.nodes.iter().map(|n| n.population).sum()
    }

    /// Euclidean distance between two node centroids.
    pub fn euclidean(&self, a: u32, b: u32) -> Option<f64> {
        let (na, nb) = (self.node(a)?, self.node(b)?);
        Some((na.x_km - nb.x_km).hypot(na.y_km - nb.y_km))
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (a, b) = (self.index[&e.node_a], self.index[&e.node_b]);
            adj[a].push((b, e.length_km));
            adj[b].push((a, e.length_km));
        }
        adj
    }

    /// Single-source shortest-path lengths (km), indexed like `nodes`.
    ///
    /// Fails if some node cannot be reached, naming the unreachable nodes.
    pub fn shortest_path_distances(&self, source: u32) -> Result<Vec<f64>, NetworkError> {
        let start = self
            .position(source)
            .ok_or_else(|| NetworkError::Format(format!("unknown source node {source}")))?;
        let dist = dijkstra(&self.adjacency(), start);
        let unreached: Vec<u32> = dist
            .iter()
            .zip(&self.nodes)
            .filter(|(d, _)| d.is_infinite())
            .map(|(_, n)| n.id)
            .collect();
        if !unreached.is_empty() {
            return Err(NetworkError::Disconnected {
                origin: source,
                unreached,
            });
        }
        Ok(dist)
    }

    /// Reads the two-table network file (see [`Network::write_csv`]).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::parse_csv(&text)
    }

    /// Parses the network file format: a node table, one blank line, then an
    /// edge table. Both tables are comma-separated with a header row:
    ///
    /// ```text
    /// id,x_km,y_km,population,city_center,single,attached,apartment,income_1,income_2,income_3,income_4,income_5
    /// node_a,node_b,length_km
    /// ```
    ///
    /// Income columns and `length_km` may be left empty; an empty length is
    /// replaced by the Euclidean distance between the endpoints.
    pub fn parse_csv(text: &str) -> Result<Self, NetworkError> {
        let text = text.replace("\r\n", "\n");
        let mut blocks = text.splitn(2, "\n\n");
        let node_block = blocks.next().unwrap_or("");
        let edge_block = blocks.next().ok_or_else(|| {
            NetworkError::Format("missing blank line before the edge table".into())
        })?;
        let node_lines = node_block.lines().count() as u64;

        let mut nodes = Vec::new();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(node_block.as_bytes());
        check_header(reader.headers(), &NODE_HEADER[..8], 1)?;
        for row in reader.deserialize::<NodeRow>() {
            let row = row.map_err(|e| csv_error(e, 0))?;
            nodes.push(row.into_node());
        }

        let mut raw_edges = Vec::new();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(edge_block.trim_start_matches('\n').as_bytes());
        check_header(reader.headers(), &EDGE_HEADER, node_lines + 2)?;
        for row in reader.deserialize::<EdgeRow>() {
            raw_edges.push(row.map_err(|e| csv_error(e, node_lines + 1))?);
        }

        let mut net = Network {
            nodes,
            edges: Vec::new(),
            index: HashMap::new(),
        };
        net.reindex()?;
        for (index, row) in raw_edges.into_iter().enumerate() {
            let length_km = match row.length_km {
                Some(len) => len,
                None => {
                    net.euclidean(row.node_a, row.node_b)
                        .ok_or(NetworkError::UnknownEndpoint {
                            index,
                            node: if net.position(row.node_a).is_none() {
                                row.node_a
                            } else {
                                row.node_b
                            },
                        })?
                }
            };
            net.edges.push(Edge {
                node_a: row.node_a,
                node_b: row.node_b,
                length_km,
            });
        }
        net.validate()?;
        Ok(net)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<(), NetworkError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(NODE_HEADER).map_err(|e| csv_error(e, 0))?;
        for n in &self.nodes {
            let mut rec = vec![
                n.id.to_string(),
                n.x_km.to_string(),
                n.y_km.to_string(),
                n.population.to_string(),
                u8::from(n.city_center).to_string(),
                n.housing_mix.single.to_string(),
                n.housing_mix.attached.to_string(),
                n.housing_mix.apartment.to_string(),
            ];
            match &n.income_mix {
                Some(mix) => rec.extend(mix.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), INCOME_BRACKETS)),
            }
            w.write_record(&rec).map_err(|e| csv_error(e, 0))?;
        }
        let nodes = w
            .into_inner()
            .map_err(|e| NetworkError::Io(e.into_error()))?;
        out.write_all(&nodes)?;
        out.write_all(b"\n")?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(EDGE_HEADER).map_err(|e| csv_error(e, 0))?;
        for e in &self.edges {
            w.write_record([
                e.node_a.to_string(),
                e.node_b.to_string(),
                e.length_km.to_string(),
            ])
            .map_err(|e| csv_error(e, 0))?;
        }
        out.write_all(
            &w.into_inner()
                .map_err(|e| NetworkError::Io(e.into_error()))?,
        )?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

const NODE_HEADER: [&str; 13] = [
    "id",
    "x_km",
    "y_km",
    "population",
    "city_center",
    "single",
    "attached",
    "apartment",
    "income_1",
    "income_2",
    "income_3",
    "income_4",
    "income_5",
];
const EDGE_HEADER: [&str; 3] = ["node_a", "node_b", "length_km"];

fn check_header(
    headers: csv::Result<&csv::StringRecord>,
    expected: &[&str],
    line: u64,
) -> Result<(), NetworkError> {
    let headers = headers.map_err(|e| csv_error(e, 0))?;
    let got: Vec<&str> = headers.iter().take(expected.len()).collect();
    if got != expected {
        return Err(NetworkError::Parse {
            line,
            message: format!("expected header starting with {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

fn csv_error(e: csv::Error, line_offset: u64) -> NetworkError {
    match e.position() {
        Some(pos) => NetworkError::Parse {
            line: pos.line() + line_offset,
            message: e.to_string(),
        },
        None => NetworkError::Format(e.to_string()),
    }
}

#[derive(Deserialize)]
struct NodeRow {
    id: u32,
    x_km: f64,
    y_km: f64,
    population: f64,
    city_center: u8,
    single: f64,
    attached: f64,
    apartment: f64,
    #[serde(default)]
    income_1: Option<f64>,
    #[serde(default)]
    income_2: Option<f64>,
    #[serde(default)]
    income_3: Option<f64>,
    #[serde(default)]
    income_4: Option<f64>,
    #[serde(default)]
    income_5: Option<f64>,
}

impl NodeRow {
    fn into_node(self) -> Node {
        let income = [
            self.income_1,
            self.income_2,
            self.income_3,
            self.income_4,
            self.income_5,
        ];
        let income_mix = if income.iter().all(Option::is_some) {
            Some(income.map(Option::unwrap))
        } else {
            None
        };
        Node {
            id: self.id,
            x_km: self.x_km,
            y_km: self.y_km,
            population: self.population,
            city_center: self.city_center != 0,
            housing_mix: HousingMix {
                single: self.single,
                attached: self.attached,
                apartment: self.apartment,
            },
            income_mix,
        }
    }
}

#[derive(Deserialize)]
struct EdgeRow {
    node_a: u32,
    node_b: u32,
    #[serde(default)]
    length_km: Option<f64>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], start: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: start,
    });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, len) in &adj[node] {
            let cand = d + len;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(HeapEntry {
                    dist: cand,
                    node: next,
                });
            }
        }
    }
    dist
}

/// Seeded random-geometric stand-in for a census zone network.
///
/// Nodes are uniform in a rectangle and joined by Gabriel-graph edges (which
/// always contain a Euclidean minimum spanning tree, so the result is
/// connected). Populations are lognormal; the nodes closest to the rectangle
/// centre are flagged as city centre.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticNetwork {
    pub nodes: usize,
    pub width_km: f64,
    pub height_km: f64,
    pub population_median: f64,
    pub population_sigma: f64,
    pub center_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticNetwork {
    fn default() -> Self {
        // 317 zones and ~180k residents, roughly the size of a mid-sized city.
        SyntheticNetwork {
            nodes: 317,
            width_km: 24.0,
            height_km: 16.0,
            population_median: 500.0,
            population_sigma: 0.5,
            center_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticNetwork {
    pub fn generate(&self) -> Result<Network, NetworkError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pop = LogNormal::new(self.population_median.ln(), self.population_sigma)
            .map_err(|e| NetworkError::Format(e.to_string()))?;
        let gamma = Gamma::new(2.0, 1.0).expect("valid gamma parameters");
        let dirichlet = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            let mut out: Vec<f64> = draws.iter().map(|d| d / total).collect();
            // absorb rounding so the fractions sum to exactly one
            let rest: f64 = out[..n - 1].iter().sum();
            out[n - 1] = (1.0 - rest).max(0.0);
            out
        };

        let mut nodes = Vec::with_capacity(self.nodes);
        for id in 0..self.nodes {
            let x = rng.random::<f64>() * self.width_km;
            let y = rng.random::<f64>() * self.height_km;
            let population = pop.sample(&mut rng).round().max(1.0);
            let housing = dirichlet(&mut rng, 3);
            let income = dirichlet(&mut rng, INCOME_BRACKETS);
            nodes.push(Node {
                id: id as u32,
                x_km: x,
                y_km: y,
                population,
                city_center: false,
                housing_mix: HousingMix {
                    single: housing[0],
                    attached: housing[1],
                    apartment: housing[2],
                },
                income_mix: Some([income[0], income[1], income[2], income[3], income[4]]),
            });
        }

        let (cx, cy) = (self.width_km / 2.0, self.height_km / 2.0);
        let mut by_center: Vec<usize> = (0..nodes.len()).collect();
        let center_dist = |n: &Node| (n.x_km - cx).hypot(n.y_km - cy);
        by_center.sort_by(|&a, &b| center_dist(&nodes[a]).total_cmp(&center_dist(&nodes[b])));
        let central = ((nodes.len() as f64) * self.center_fraction).round() as usize;
        for &p in by_center.iter().take(central) {
            nodes[p].city_center = true;
        }

        let edges = gabriel_edges(&nodes);
        Network::new(nodes, edges)
    }
}

fn gabriel_edges(nodes: &[Node]) -> Vec<Edge> {
    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let (na, nb) = (&nodes[a], &nodes[b]);
            let (mx, my) = ((na.x_km + nb.x_km) / 2.0, (na.y_km + nb.y_km) / 2.0);
            let r2 = ((na.x_km - nb.x_km).powi(2) + (na.y_km - nb.y_km).powi(2)) / 4.0;
            let blocked = nodes.iter().enumerate().any(|(c, nc)| {
                c != a && c != b && (nc.x_km - mx).powi(2) + (nc.y_km - my).powi(2) < r2
            });
            if !blocked {
                let length_km = (na.x_km - nb.x_km).hypot(na.y_km - nb.y_km);
                if length_km > 0.0 {
                    edges.push(Edge {
                        node_a: na.id,
                        node_b: nb.id,
                        length_km,
                    });
                }
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, x: f64, y: f64) -> Node {
        Node {
            id,
            x_km: x,
            y_km: y,
            population: 100.0,
            city_center: false,
            housing_mix: HousingMix {
                single: 0.5,
                attached: 0.25,
                apartment: 0.25,
            },
            income_mix: None,
        }
    }

    fn edge(a: u32, b: u32, len: f64) -> Edge {
        Edge {
            node_a: a,
            node_b: b,
            length_km: len,
        }
    }

    #[test]
    fn two_node_graph() {
        let net = Network::new(
            vec![node(0, 0.0, 0.0), node(1, 3.0, 0.0)],
            vec![edge(0, 1, 3.0)],
        )
        .unwrap();
        assert_eq!(net.shortest_path_distances(0).unwrap(), vec![0.0, 3.0]);
    }

    #[test]
    fn triangle_takes_two_hop_path() {
        let nodes = vec![node(0, 0.0, 0.0), node(1, 1.0, 0.0), node(2, 2.0, 0.0)];
        let net = Network::new(
            nodes,
            vec![edge(0, 1, 1.0), edge(1, 2, 1.0), edge(0, 2, 3.0)],
        )
        .unwrap();
        assert_eq!(net.shortest_path_distances(0).unwrap()[2], 2.0);
    }

    #[test]
    fn disconnected_graph_names_component() {
        let nodes = vec![node(0, 0.0, 0.0), node(1, 1.0, 0.0), node(7, 5.0, 5.0)];
        let err = Network::new(nodes, vec![edge(0, 1, 1.0)]).unwrap_err();
        match err {
            NetworkError::Disconnected { unreached, .. } => assert_eq!(unreached, vec![7]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_mix_and_lengths() {
        let mut bad = node(0, 0.0, 0.0);
        bad.housing_mix.single = 0.9;
        assert!(Network::new(vec![bad], vec![]).is_err());
        let nodes = vec![node(0, 0.0, 0.0), node(1, 1.0, 0.0)];
        assert!(matches!(
            Network::new(nodes, vec![edge(0, 1, 0.0)]),
            Err(NetworkError::BadLength { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_euclidean_fill() {
        let text = "id,x_km,y_km,population,city_center,single,attached,apartment,income_1,income_2,income_3,income_4,income_5\n\
                    0,0,0,10,1,1,0,0,,,,,\n\
                    1,3,4,20,0,0.5,0.5,0,0.2,0.2,0.2,0.2,0.2\n\
                    \n\
                    node_a,node_b,length_km\n\
                    0,1,\n";
        let net = Network::parse_csv(text).unwrap();
        assert_eq!(net.edges[0].length_km, 5.0);
        assert!(net.nodes[0].city_center);
        assert!(net.nodes[0].income_mix.is_none());
        assert!(net.nodes[1].income_mix.is_some());
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        let again = Network::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again, net);
    }

    #[test]
    fn csv_requires_header() {
        let text = "0,0,0,10,1,1,0,0\n\nnode_a,node_b,length_km\n";
        assert!(matches!(
            Network::parse_csv(text),
            Err(NetworkError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn synthetic_network_is_connected_and_deterministic() {
        let spec = SyntheticNetwork {
            nodes: 60,
            seed: 3,
            ..Default::default()
        };
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.nodes.iter().filter(|n| n.city_center).count(), 6);
        assert!(a.edges.len() >= a.nodes.len() - 1);
    }
}
