//! Items, the dominance DAG between them, and the bundle encoding of that order.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type ItemId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PosetError {
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("invalid poset: {0:?}")]
    Invalid(Vec<Defect>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Defect {
    Cycle(Vec<String>),
    TransitiveEdge(String, String),
    DuplicateLabel(String),
    SelfLoop(String),
    DuplicateEdge(String, String),
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::Cycle(c) => write!(f, "cycle through {}", c.join(" -> ")),
            Defect::TransitiveEdge(a, b) => write!(f, "transitive edge ({a},{b})"),
            Defect::DuplicateLabel(l) => write!(f, "duplicate label {l}"),
            Defect::SelfLoop(l) => write!(f, "self loop on {l}"),
            Defect::DuplicateEdge(a, b) => write!(f, "duplicate edge ({a},{b})"),
        }
    }
}

/// Edge `(worse, better)` means the buyer interested in `worse` is also happy with `better`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPoset {
    labels: Vec<String>,
    edges: Vec<(ItemId, ItemId)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PosetJson {
    pub items: Vec<String>,
    pub edges: Vec<(String, String)>,
}

/// Ground-element sets per item; containment reproduces the order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleMap(pub Vec<BTreeSet<usize>>);

impl ItemPoset {
    /// Unchecked constructor; call [`ItemPoset::validate`] before use.
    pub fn new_raw(labels: Vec<String>, edges: Vec<(ItemId, ItemId)>) -> Self {
        ItemPoset { labels, edges }
    }

    pub fn new(labels: &[&str], edges: &[(&str, &str)]) -> Result<Self, PosetError> {
        let json = PosetJson {
            items: labels.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        };
        Ok(Self::from_json(&json)?.0)
    }

    /// Parses, validates and reduces. Transitive edges are dropped and reported as warnings;
    /// any other defect is an error.
    pub fn from_json(json: &PosetJson) -> Result<(Self, Vec<String>), PosetError> {
        let mut ids = BTreeMap::new();
        for (i, l) in json.items.iter().enumerate() {
            ids.entry(l.clone()).or_insert(i);
        }
        let mut edges = Vec::new();
        for (a, b) in &json.edges {
            let ia = *ids.get(a).ok_or_else(|| PosetError::UnknownItem(a.clone()))?;
            let ib = *ids.get(b).ok_or_else(|| PosetError::UnknownItem(b.clone()))?;
            edges.push((ia, ib));
        }
        let raw = ItemPoset { labels: json.items.clone(), edges };
        let defects = raw.validate();
        let fatal: Vec<Defect> =
            defects.iter().filter(|d| !matches!(d, Defect::TransitiveEdge(..))).cloned().collect();
        if !fatal.is_empty() {
            return Err(PosetError::Invalid(fatal));
        }
        let warnings: Vec<String> = defects.iter().map(|d| format!("dropped {d}")).collect();
        Ok((raw.reduced(), warnings))
    }

    pub fn to_json(&self) -> PosetJson {
        PosetJson {
            items: self.labels.clone(),
            edges: self.edges.iter().map(|&(a, b)| (self.labels[a].clone(), self.labels[b].clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, g: ItemId) -> &str {
        &self.labels[g]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<ItemId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn edges(&self) -> &[(ItemId, ItemId)] {
        &self.edges
    }

    pub fn validate(&self) -> Vec<Defect> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for l in &self.labels {
            if !seen.insert(l) {
                out.push(Defect::DuplicateLabel(l.clone()));
            }
        }
        let mut seen_edges = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                out.push(Defect::SelfLoop(self.labels[a].clone()));
            } else if !seen_edges.insert((a, b)) {
                out.push(Defect::DuplicateEdge(self.labels[a].clone(), self.labels[b].clone()));
            }
        }
        if let Some(cycle) = self.find_cycle() {
            out.push(Defect::Cycle(cycle.iter().map(|&i| self.labels[i].clone()).collect()));
            return out;
        }
        for &(a, b) in &seen_edges {
            if a != b && self.reachable_avoiding_edge(a, b) {
                out.push(Defect::TransitiveEdge(self.labels[a].clone(), self.labels[b].clone()));
            }
        }
        out
    }

    fn out_lists(&self) -> Vec<Vec<ItemId>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(a, b) in &self.edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
            }
        }
        for l in &mut adj {
            l.sort();
        }
        adj
    }

    fn find_cycle(&self) -> Option<Vec<ItemId>> {
        let adj = self.out_lists();
        let n = self.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<ItemId> = Vec::new();
        fn dfs(u: usize, adj: &[Vec<usize>], state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[u] = 1;
            stack.push(u);
            for &w in &adj[u] {
                if state[w] == 1 {
                    let pos = stack.iter().position(|&x| x == w).unwrap();
                    let mut c = stack[pos..].to_vec();
                    c.push(w);
                    return Some(c);
                }
                if state[w] == 0 {
                    if let Some(c) = dfs(w, adj, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state[u] = 2;
            None
        }
        (0..n).find_map(|u| if state[u] == 0 { dfs(u, &adj, &mut state, &mut stack) } else { None })
    }

    fn reachable_avoiding_edge(&self, a: ItemId, b: ItemId) -> bool {
        let adj = self.out_lists();
        let mut seen = vec![false; self.len()];
        let mut todo: Vec<ItemId> = adj[a].iter().copied().filter(|&w| w != b).collect();
        while let Some(u) = todo.pop() {
            if u == b {
                return true;
            }
            if !std::mem::replace(&mut seen[u], true) {
                todo.extend(adj[u].iter().copied());
            }
        }
        false
    }

    fn reduced(&self) -> ItemPoset {
        let mut edges: Vec<(ItemId, ItemId)> = Vec::new();
        for &(a, b) in &self.edges {
            if !edges.contains(&(a, b)) && !self.reachable_avoiding_edge(a, b) {
                edges.push((a, b));
            }
        }
        ItemPoset { labels: self.labels.clone(), edges }
    }

    fn check(&self, g: ItemId) -> Result<(), PosetError> {
        if g < self.len() {
            Ok(())
        } else {
            Err(PosetError::UnknownItem(g.to_string()))
        }
    }

    /// Items immediately better than `g`.
    pub fn successors(&self, g: ItemId) -> Result<Vec<ItemId>, PosetError> {
        self.check(g)?;
        Ok(self.out_lists()[g].clone())
    }

    /// Items immediately worse than `g`.
    pub fn predecessors(&self, g: ItemId) -> Result<Vec<ItemId>, PosetError> {
        self.check(g)?;
        let mut p: Vec<ItemId> = self.edges.iter().filter(|e| e.1 == g).map(|e| e.0).collect();
        p.sort();
        p.dedup();
        Ok(p)
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_lists().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `closure[a][b]` iff `b` is reachable from `a` (strictly better).
    pub fn closure(&self) -> Vec<Vec<bool>> {
        let adj = self.out_lists();
        let n = self.len();
        let mut c = vec![vec![false; n]; n];
        for (a, row) in c.iter_mut().enumerate() {
            let mut todo = adj[a].clone();
            while let Some(u) = todo.pop() {
                if !std::mem::replace(&mut row[u], true) {
                    todo.extend(adj[u].iter().copied());
                }
            }
        }
        c
    }

    /// Worst-first topological order, ties by id.
    pub fn topo_order(&self) -> Vec<ItemId> {
        let adj = self.out_lists();
        let mut indeg = vec![0usize; self.len()];
        for l in &adj {
            for &b in l {
                indeg[b] += 1;
            }
        }
        let mut ready: BTreeSet<ItemId> = (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::new();
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            out.push(u);
            for &w in &adj[u] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        out
    }

    /// Longest path length from `g` to a sink.
    pub fn reverse_depth(&self) -> Vec<usize> {
        let adj = self.out_lists();
        let mut d = vec![0usize; self.len()];
        for &u in self.topo_order().iter().rev() {
            d[u] = adj[u].iter().map(|&w| d[w] + 1).max().unwrap_or(0);
        }
        d
    }

    pub fn to_single_minded(&self) -> BundleMap {
        let order = self.topo_order();
        let mut ground = vec![0usize; self.len()];
        for (k, &g) in order.iter().enumerate() {
            ground[g] = k;
        }
        let c = self.closure();
        BundleMap(
            (0..self.len())
                .map(|g| {
                    let mut s: BTreeSet<usize> = (0..self.len()).filter(|&w| c[w][g]).map(|w| ground[w]).collect();
                    s.insert(ground[g]);
                    s
                })
                .collect(),
        )
    }

    /// `(worst, first, second)` when the poset is exactly the two-edge star.
    pub fn star(&self) -> Option<(ItemId, ItemId, ItemId)> {
        if self.len() != 3 || self.edges.len() != 2 {
            return None;
        }
        let (c0, a) = self.edges[0];
        let (c1, b) = self.edges[1];
        (c0 == c1 && a != b).then(|| (c0, a.min(b), a.max(b)))
    }
}

impl BundleMap {
    /// The order induced by strict containment, as `(worse, better)` cover pairs.
    pub fn induced_edges(&self) -> Vec<(ItemId, ItemId)> {
        let n = self.0.len();
        let lt = |a: usize, b: usize| self.0[a].is_subset(&self.0[b]) && self.0[a] != self.0[b];
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if lt(a, b) && !(0..n).any(|m| lt(a, m) && lt(m, b)) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(n: usize, edges: &[(usize, usize)]) -> ItemPoset {
        ItemPoset::new_raw((0..n).map(|i| format!("I{i}")).collect(), edges.to_vec())
    }

    #[test]
    fn structural_defects() {
        let p = ItemPoset::new_raw(vec!["C".into(), "A".into()], vec![(0, 1)]);
        assert!(p.validate().is_empty());
        let p = ItemPoset::new_raw(vec!["C".into(), "A".into(), "B".into()], vec![(0, 1), (1, 2), (0, 2)]);
        assert_eq!(p.validate(), vec![Defect::TransitiveEdge("C".into(), "B".into())]);
        let p = ItemPoset::new_raw(vec!["A".into(), "B".into()], vec![(0, 1), (1, 0)]);
        assert!(matches!(p.validate()[0], Defect::Cycle(_)));
    }

    #[test]
    fn transitive_edges_are_reduced_with_warning() {
        let json = PosetJson {
            items: vec!["C".into(), "A".into(), "B".into()],
            edges: vec![("C".into(), "A".into()), ("A".into(), "B".into()), ("C".into(), "B".into())],
        };
        let (p, w) = ItemPoset::from_json(&json).unwrap();
        assert_eq!(p.edges().len(), 2);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn neighbourhoods() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        assert_eq!(p.successors(2).unwrap(), vec![0, 1]);
        assert!(p.successors(0).unwrap().is_empty());
        assert_eq!(p.max_out_degree(), 2);
        assert_eq!(p.star(), Some((2, 0, 1)));
        let line = ItemPoset::new(&["1", "2", "3"], &[("3", "2"), ("2", "1")]).unwrap();
        assert_eq!(line.successors(2).unwrap(), vec![1]);
        assert_eq!(line.max_out_degree(), 1);
        assert_eq!(ItemPoset::new(&["X"], &[]).unwrap().max_out_degree(), 0);
        assert!(p.successors(7).is_err());
    }

    #[test]
    fn bundles() {
        let anti = ItemPoset::new(&["A", "B"], &[]).unwrap();
        let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(anti.to_single_minded().0, vec![s(&[0]), s(&[1])]);
        let line = ItemPoset::new(&["C", "A"], &[("C", "A")]).unwrap();
        assert_eq!(line.to_single_minded().0, vec![s(&[0]), s(&[0, 1])]);
        let star = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        assert_eq!(star.to_single_minded().0, vec![s(&[0, 1]), s(&[0, 2]), s(&[0])]);
    }

    fn random_dag() -> impl Strategy<Value = ItemPoset> {
        (1usize..=8).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
                let mut edges = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        if bits[a * n + b] {
                            edges.push((a, b));
                        }
                    }
                }
                raw(n, &edges).reduced()
            })
        })
    }

    proptest! {
        #[test]
        fn bundle_order_roundtrips(p in random_dag()) {
            prop_assert!(p.validate().is_empty());
            let mut induced = p.to_single_minded().induced_edges();
            let mut edges = p.edges().to_vec();
            induced.sort();
            edges.sort();
            prop_assert_eq!(induced, edges);
        }

        #[test]
        fn successors_match_closure(p in random_dag()) {
            let c = p.closure();
            for g in 0..p.len() {
                prop_assert!(!c[g][g]);
                for s in p.successors(g).unwrap() {
                    prop_assert!(c[g][s]);
                    prop_assert!(s != g);
                }
            }
        }
    }
}
