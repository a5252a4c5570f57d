//! Fat-Tree and Jellyfish substrate graphs, hop counts between NFV servers,
//! and the per-request communication-cost matrix derived from them.

use std::collections::{BTreeSet, VecDeque};
use std::io::{self, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TopologyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Switch,
    Host,
    NfvServer,
}

/// Simple undirected graph of switches and end nodes.
#[derive(Debug, Clone)]
pub struct SwitchGraph {
    kinds: Vec<NodeKind>,
    adj: Vec<Vec<usize>>,
}

impl SwitchGraph {
    fn with_nodes(kinds: Vec<NodeKind>) -> Self {
        let n = kinds.len();
        Self {
            kinds,
            adj: vec![Vec::new(); n],
        }
    }

    fn connect(&mut self, a: usize, b: usize) {
        debug_assert_ne!(a, b);
        self.adj[a].push(b);
        self.adj[b].push(a);
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn switch_count(&self) -> usize {
        self.count(NodeKind::Switch)
    }

    /// Hosts plus NFV servers.
    pub fn end_node_count(&self) -> usize {
        self.node_count() - self.switch_count()
    }

    /// NFV servers in ascending node order; position `i` is `ServerId(i)`.
    pub fn nfv_servers(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| self.kinds[n] == NodeKind::NfvServer)
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adj.iter().enumerate() {
            for &b in ns {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_simple(&self) -> bool {
        self.adj.iter().enumerate().all(|(a, ns)| {
            let set: BTreeSet<_> = ns.iter().collect();
            set.len() == ns.len() && !ns.contains(&a)
        })
    }

    pub fn bfs(&self, src: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.bfs(0).iter().all(Option::is_some)
    }

    /// Writes `n <id> <kind>` lines followed by `e <u> <v>` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, k) in self.kinds.iter().enumerate() {
            let k = match k {
                NodeKind::Switch => "switch",
                NodeKind::Host => "host",
                NodeKind::NfvServer => "nfv-server",
            };
            writeln!(w, "n {i} {k}")?;
        }
        for (a, b) in self.edges() {
            writeln!(w, "e {a} {b}")?;
        }
        Ok(())
    }
}

/// Standard k-ary fat-tree. Node order: core switches, then per pod the
/// aggregation and edge switches, then end nodes edge switch by edge switch.
/// `nfv_per_pod` end nodes of every pod are marked as NFV servers.
pub fn build_fat_tree(
    k: usize,
    nfv_per_pod: usize,
    seed: u64,
) -> Result<SwitchGraph, TopologyError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(TopologyError::InvalidParameter(format!(
            "fat-tree k must be even and >= 2, got {k}"
        )));
    }
    let half = k / 2;
    let per_pod_end = half * half;
    if nfv_per_pod > per_pod_end {
        return Err(TopologyError::InvalidParameter(format!(
            "nfv_per_pod {nfv_per_pod} exceeds {per_pod_end} end nodes per pod"
        )));
    }
    let n_core = half * half;
    let n_switch = n_core + k * k;
    let n_end = k * per_pod_end;
    let mut kinds = vec![NodeKind::Switch; n_switch];
    kinds.extend(std::iter::repeat_n(NodeKind::Host, n_end));
    let mut g = SwitchGraph::with_nodes(kinds);

    let agg = |pod: usize, i: usize| n_core + pod * k + i;
    let edge = |pod: usize, i: usize| n_core + pod * k + half + i;
    let end = |pod: usize, e: usize, h: usize| n_switch + pod * per_pod_end + e * half + h;

    for pod in 0..k {
        for a in 0..half {
            for c in 0..half {
                g.connect(agg(pod, a), a * half + c);
            }
            for e in 0..half {
                g.connect(agg(pod, a), edge(pod, e));
            }
        }
        for e in 0..half {
            for h in 0..half {
                g.connect(edge(pod, e), end(pod, e, h));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pod in 0..k {
        let base = n_switch + pod * per_pod_end;
        for idx in rand::seq::index::sample(&mut rng, per_pod_end, nfv_per_pod) {
            g.kinds[base + idx] = NodeKind::NfvServer;
        }
    }
    Ok(g)
}

/// Random regular switch graph (pairing model, repaired by degree-preserving
/// edge swaps until simple and connected), with `servers_per_switch` end
/// nodes per switch of which `n_nfv` are marked as NFV servers.
pub fn build_jellyfish(
    n_switches: usize,
    degree: usize,
    servers_per_switch: usize,
    n_nfv: usize,
    seed: u64,
) -> Result<SwitchGraph, TopologyError> {
    let bad = |msg: String| Err(TopologyError::InvalidParameter(msg));
    if n_switches == 0 {
        return bad("jellyfish needs at least one switch".into());
    }
    if !(n_switches * degree).is_multiple_of(2) {
        return bad(format!(
            "n_switches*degree = {} is odd",
            n_switches * degree
        ));
    }
    if degree >= n_switches && !(n_switches == 1 && degree == 0) {
        return bad(format!(
            "degree {degree} needs more than {n_switches} switches"
        ));
    }
    if n_switches > 2 && degree < 2 {
        return bad(format!(
            "degree {degree} cannot connect {n_switches} switches"
        ));
    }
    if n_switches == 2 && degree != 1 {
        return bad("two switches need degree 1".into());
    }
    if n_nfv > n_switches * servers_per_switch {
        return bad(format!(
            "{n_nfv} NFV servers exceed the available end nodes"
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..64)
        .find_map(|_| random_simple_regular(n_switches, degree, &mut rng))
        .ok_or_else(|| {
            TopologyError::InvalidParameter(format!(
                "could not realize a simple {degree}-regular graph on {n_switches} switches"
            ))
        })?;
    let edges = connect_components(n_switches, edges, &mut rng);

    let n_end = n_switches * servers_per_switch;
    let mut kinds = vec![NodeKind::Switch; n_switches];
    kinds.extend(std::iter::repeat_n(NodeKind::Host, n_end));
    let mut g = SwitchGraph::with_nodes(kinds);
    for &(a, b) in &edges {
        g.connect(a, b);
    }
    for s in 0..n_switches {
        for h in 0..servers_per_switch {
            g.connect(s, n_switches + s * servers_per_switch + h);
        }
    }
    for idx in rand::seq::index::sample(&mut rng, n_end.max(1), n_nfv.min(n_end)) {
        g.kinds[n_switches + idx] = NodeKind::NfvServer;
    }
    Ok(g)
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn random_simple_regular(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    stubs.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = stubs.chunks(2).map(|p| norm(p[0], p[1])).collect();
    if edges.is_empty() {
        return Some(edges);
    }

    let budget = 200 * edges.len() + 1000;
    for _ in 0..budget {
        let Some(i) = first_bad_edge(&edges) else {
            return Some(edges);
        };
        let j = rng.random_range(0..edges.len());
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, e) = edges[j];
        let (x, y) = if rng.random_bool(0.5) {
            (norm(a, c), norm(b, e))
        } else {
            (norm(a, e), norm(b, c))
        };
        if x.0 == x.1 || y.0 == y.1 || x == y {
            continue;
        }
        let others: BTreeSet<_> = edges
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i && k != j)
            .map(|(_, &ed)| ed)
            .collect();
        if others.contains(&x) || others.contains(&y) {
            continue;
        }
        edges[i] = x;
        edges[j] = y;
    }
    first_bad_edge(&edges).is_none().then_some(edges)
}

fn first_bad_edge(edges: &[(usize, usize)]) -> Option<usize> {
    let mut seen = BTreeSet::new();
    edges
        .iter()
        .position(|&(a, b)| a == b || !seen.insert((a, b)))
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

fn is_bridge(n: usize, edges: &[(usize, usize)], idx: usize) -> bool {
    let rest: Vec<_> = edges
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != idx)
        .map(|(_, &e)| e)
        .collect();
    let comp = components(n, &rest);
    let (a, b) = edges[idx];
    comp[a] != comp[b]
}

/// Merges components with cross swaps `(a,b),(c,d) -> (a,c),(b,d)`, taking
/// `(a,b)` off a cycle so the first component stays connected.
fn connect_components(
    n: usize,
    mut edges: Vec<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    loop {
        let comp = components(n, &edges);
        if comp.iter().all(|&c| c == 0) {
            return edges;
        }
        let in_comp = |c: usize| -> Vec<usize> {
            (0..edges.len())
                .filter(|&i| comp[edges[i].0] == c)
                .collect()
        };
        let mut first = in_comp(0);
        first.shuffle(rng);
        let Some(&i) = first.iter().find(|&&i| !is_bridge(n, &edges, i)) else {
            return edges;
        };
        let target = comp.iter().copied().find(|&c| c != 0).unwrap_or(1);
        let second = in_comp(target);
        let Some(&j) = second.choose(rng) else {
            return edges;
        };
        let (a, b) = edges[i];
        let (c, d) = edges[j];
        edges[i] = norm(a, c);
        edges[j] = norm(b, d);
    }
}

/// Shortest-path hop counts between every pair of NFV servers.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMatrix {
    pub hops: Vec<Vec<Option<u32>>>,
}

impl HopMatrix {
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn unreachable_pairs(&self) -> usize {
        self.hops.iter().flatten().filter(|h| h.is_none()).count()
    }
}

pub fn hop_matrix(graph: &SwitchGraph) -> HopMatrix {
    let servers = graph.nfv_servers();
    let hops = servers
        .iter()
        .map(|&s| {
            let dist = graph.bfs(s);
            servers.iter().map(|&t| dist[t]).collect()
        })
        .collect();
    HopMatrix { hops }
}

/// Per-request communication cost `w[s'][s]`; unreachable pairs hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommCostMatrix {
    pub cost: Vec<Vec<f64>>,
    pub hops: Option<HopMatrix>,
}

impl CommCostMatrix {
    pub fn from_costs(cost: Vec<Vec<f64>>) -> Self {
        Self { cost, hops: None }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.cost[from][to]
    }

    pub fn reachable(&self, from: usize, to: usize) -> bool {
        self.cost[from][to].is_finite()
    }

    /// Redraws every off-diagonal entry from the stored hop counts.
    pub fn resample<R: Rng>(&mut self, base_cost: f64, variation: f64, rng: &mut R) {
        if let Some(h) = &self.hops {
            self.cost = draw_costs(h, base_cost, variation, rng);
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_matrix(
            &mut w,
            self.cost.iter().map(|r| {
                r.iter().map(|c| {
                    if c.is_finite() {
                        c.to_string()
                    } else {
                        "inf".to_string()
                    }
                })
            }),
        )
    }
}

fn write_matrix<W: Write, R, C>(w: &mut W, rows: R) -> io::Result<()>
where
    R: ExactSizeIterator<Item = C>,
    C: Iterator<Item = String>,
{
    let n = rows.len();
    write!(w, "server")?;
    for j in 0..n {
        write!(w, ",{j}")?;
    }
    writeln!(w)?;
    for (i, row) in rows.enumerate() {
        write!(w, "{i}")?;
        for c in row {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

impl HopMatrix {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_matrix(
            &mut w,
            self.hops.iter().map(|r| {
                r.iter()
                    .map(|h| h.map_or_else(|| "inf".to_string(), |h| h.to_string()))
            }),
        )
    }
}

fn draw_costs<R: Rng>(
    hops: &HopMatrix,
    base_cost: f64,
    variation: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    hops.hops
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, h)| match h {
                    _ if i == j => 0.0,
                    None => f64::INFINITY,
                    Some(h) => {
                        let u = if variation > 0.0 {
                            rng.random_range(-variation..variation)
                        } else {
                            0.0
                        };
                        f64::from(*h) * base_cost * (1.0 + u)
                    }
                })
                .collect()
        })
        .collect()
}

/// `cost[s'][s] = hops · base_cost · (1 + u)` with `u ~ U(-v, v)` drawn once
/// per ordered pair.
pub fn comm_cost_matrix(
    hops: &HopMatrix,
    base_cost: f64,
    variation_frac: f64,
    seed: u64,
) -> CommCostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CommCostMatrix {
        cost: draw_costs(hops, base_cost, variation_frac, &mut rng),
        hops: Some(hops.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fat_tree_counts() {
        for k in [2usize, 4, 6, 8, 24] {
            let g = build_fat_tree(k, 1, 7).unwrap();
            assert_eq!(g.switch_count(), 5 * k * k / 4, "k={k}");
            assert_eq!(g.end_node_count(), k * k * k / 4, "k={k}");
            assert!(g.is_connected());
            assert!(g.is_simple());
            assert_eq!(g.count(NodeKind::NfvServer), k);
        }
        let g = build_fat_tree(24, 1, 0).unwrap();
        assert_eq!(g.switch_count(), 720);
        assert_eq!(g.end_node_count(), 3456);
    }

    #[test]
    fn fat_tree_rejects_odd_k() {
        assert!(build_fat_tree(3, 1, 0).is_err());
        assert!(build_fat_tree(0, 0, 0).is_err());
    }

    /// Independent hop oracle: end nodes in a fat-tree are 2 hops apart under
    /// the same edge switch, 4 within a pod and 6 across pods.
    fn fat_tree_hops_by_position(k: usize, a: usize, b: usize) -> u32 {
        let half = k / 2;
        let per_pod = half * half;
        let (pa, pb) = (a / per_pod, b / per_pod);
        let (ea, eb) = (a / half, b / half);
        match () {
            _ if a == b => 0,
            _ if ea == eb => 2,
            _ if pa == pb => 4,
            _ => 6,
        }
    }

    #[test]
    fn fat_tree_hops_match_position_oracle() {
        let k = 4;
        let g = build_fat_tree(k, 4, 3).unwrap();
        let n_switch = 5 * k * k / 4;
        let servers = g.nfv_servers();
        let h = hop_matrix(&g);
        for (i, &a) in servers.iter().enumerate() {
            for (j, &b) in servers.iter().enumerate() {
                let want = fat_tree_hops_by_position(k, a - n_switch, b - n_switch);
                assert_eq!(h.hops[i][j], Some(want));
            }
        }
        assert!(h.hops.iter().flatten().any(|&x| x == Some(6)));
        assert!(h.hops.iter().flatten().any(|&x| x == Some(2)));
    }

    #[test]
    fn single_server_matrix() {
        let g = build_fat_tree(2, 1, 0).unwrap();
        let mut g = g;
        let servers = g.nfv_servers();
        for &s in &servers[1..] {
            g.kinds[s] = NodeKind::Host;
        }
        let h = hop_matrix(&g);
        assert_eq!(h.hops, vec![vec![Some(0)]]);
    }

    #[test]
    fn jellyfish_k4_is_complete() {
        for seed in 0..10 {
            let g = build_jellyfish(4, 3, 1, 2, seed).unwrap();
            let edges: Vec<_> = g
                .edges()
                .into_iter()
                .filter(|&(a, b)| a < 4 && b < 4)
                .collect();
            assert_eq!(edges, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        }
    }

    #[test]
    fn jellyfish_ring_is_one_cycle() {
        for seed in 0..20 {
            let g = build_jellyfish(6, 2, 0, 0, seed).unwrap();
            assert!(g.is_simple());
            // BFS oracle: connected and every switch has degree 2, hence a 6-cycle.
            assert!(g.bfs(0).iter().all(Option::is_some));
            assert!((0..6).all(|v| g.neighbors(v).len() == 2));
            assert_eq!(g.bfs(0).iter().flatten().max(), Some(&3));
        }
    }

    #[test]
    fn jellyfish_full_scale_switch_count() {
        let g = build_jellyfish(720, 8, 5, 24, 1).unwrap();
        assert_eq!(g.switch_count(), 720);
        assert_eq!(g.count(NodeKind::NfvServer), 24);
        assert!(g.is_connected());
        assert!(g.is_simple());
    }

    #[test]
    fn jellyfish_rejects_unrealizable() {
        assert!(build_jellyfish(5, 3, 1, 1, 0).is_err());
        assert!(build_jellyfish(4, 4, 1, 1, 0).is_err());
        assert!(build_jellyfish(4, 1, 1, 1, 0).is_err());
    }

    #[test]
    fn comm_cost_examples() {
        let hops = HopMatrix {
            hops: vec![vec![Some(0), Some(3)], vec![Some(2), Some(0)]],
        };
        let c = comm_cost_matrix(&hops, 1.0, 0.0, 1);
        assert_eq!(c.get(0, 1), 3.0);
        assert_eq!(c.get(0, 0), 0.0);
        let c = comm_cost_matrix(&hops, 1.0, 0.1, 1);
        assert!((1.8..=2.2).contains(&c.get(1, 0)));
        assert_eq!(c.get(1, 1), 0.0);
    }

    #[test]
    fn unreachable_is_infinite() {
        let hops = HopMatrix {
            hops: vec![vec![Some(0), None], vec![None, Some(0)]],
        };
        let c = comm_cost_matrix(&hops, 1.0, 0.1, 1);
        assert!(!c.reachable(0, 1));
        assert_eq!(hops.unreachable_pairs(), 2);
    }

    #[test]
    fn exports_are_well_formed() {
        let g = build_fat_tree(2, 1, 0).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().filter(|l| l.starts_with("e ")).count(),
            g.edges().len()
        );
        // k=2: the two end nodes sit in different pods, 6 hops apart.
        let c = comm_cost_matrix(&hop_matrix(&g), 1.0, 0.0, 0);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "server,0,1\n0,0,6\n1,6,0\n"
        );
    }

    proptest! {
        #[test]
        fn comm_cost_within_band_and_deterministic(seed in any::<u64>(), v in 0.0f64..0.9, base in 0.1f64..5.0) {
            let g = build_fat_tree(4, 2, seed).unwrap();
            let h = hop_matrix(&g);
            let a = comm_cost_matrix(&h, base, v, seed);
            let b = comm_cost_matrix(&h, base, v, seed);
            prop_assert_eq!(&a, &b);
            for i in 0..h.len() {
                for j in 0..h.len() {
                    let hops = f64::from(h.hops[i][j].unwrap());
                    let c = a.get(i, j);
                    prop_assert!(c >= hops * base * (1.0 - v) - 1e-12);
                    prop_assert!(c <= hops * base * (1.0 + v) + 1e-12);
                }
            }
        }

        #[test]
        fn jellyfish_always_connected(seed in any::<u64>(), n in 5usize..40, d in 2usize..5) {
            prop_assume!(n * d % 2 == 0 && d < n);
            let g = build_jellyfish(n, d, 1, 1, seed).unwrap();
            prop_assert!(g.is_connected());
            prop_assert!(g.is_simple());
            prop_assert!((0..n).all(|v| g.neighbors(v).iter().filter(|&&u| u < n).count() == d));
        }
    }
}
