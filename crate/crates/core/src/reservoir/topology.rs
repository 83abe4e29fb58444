use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a reservoir receives feedforward input from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Input,
    Reservoir(usize),
}

/// Breadth x depth grid of reservoirs with an explicit feedforward
/// connectivity map.
///
/// Reservoirs are indexed chain-major: the reservoir at breadth `b` and depth
/// `d` has canonical index `b * depth + d`. State concatenation always follows
/// canonical index order, while evolution follows `order`, a topological
/// order of the connectivity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRecord", into = "TopologyRecord")]
pub struct TopologyGrid {
    breadth: usize,
    depth: usize,
    sources: Vec<Vec<Source>>,
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TopologyRecord {
    breadth: usize,
    depth: usize,
    sources: Vec<Vec<Source>>,
}

impl TryFrom<TopologyRecord> for TopologyGrid {
    type Error = Error;

    fn try_from(r: TopologyRecord) -> Result<Self> {
        TopologyGrid::with_connectivity(r.breadth, r.depth, r.sources)
    }
}

impl From<TopologyGrid> for TopologyRecord {
    fn from(t: TopologyGrid) -> Self {
        TopologyRecord {
            breadth: t.breadth,
            depth: t.depth,
            sources: t.sources,
        }
    }
}

impl TopologyGrid {
    /// Dense grid: `breadth` parallel chains of `depth` reservoirs. The first
    /// reservoir of each chain reads the input, every other one reads its
    /// predecessor in the chain.
    pub fn grid(breadth: usize, depth: usize) -> Result<Self> {
        if breadth == 0 || depth == 0 {
            return Err(Error::Topology(format!(
                "breadth and depth must be positive (got {breadth}x{depth})"
            )));
        }
        let sources = (0..breadth)
            .flat_map(|b| {
                (0..depth).map(move |d| {
                    if d == 0 {
                        vec![Source::Input]
                    } else {
                        vec![Source::Reservoir(b * depth + d - 1)]
                    }
                })
            })
            .collect();
        Self::with_connectivity(breadth, depth, sources)
    }

    pub fn with_connectivity(
        breadth: usize,
        depth: usize,
        sources: Vec<Vec<Source>>,
    ) -> Result<Self> {
        if breadth == 0 || depth == 0 {
            return Err(Error::Topology(format!(
                "breadth and depth must be positive (got {breadth}x{depth})"
            )));
        }
        let n = breadth * depth;
        if sources.len() != n {
            return Err(Error::Topology(format!(
                "connectivity lists {} reservoirs, grid has {n}",
                sources.len()
            )));
        }
        for (l, srcs) in sources.iter().enumerate() {
            if srcs.is_empty() {
                return Err(Error::Topology(format!(
                    "reservoir {l} has no incoming connection"
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for s in srcs {
                if !seen.insert(*s) {
                    return Err(Error::Topology(format!(
                        "reservoir {l} lists source {s:?} twice"
                    )));
                }
                if let Source::Reservoir(k) = *s {
                    if k >= n {
                        return Err(Error::Topology(format!(
                            "reservoir {l} reads from nonexistent reservoir {k}"
                        )));
                    }
                    if k == l {
                        return Err(Error::Topology(format!(
                            "reservoir {l} feeds itself; recurrence belongs in the recurrent matrix"
                        )));
                    }
                }
            }
        }
        let order = topological_order(&sources)?;
        Ok(TopologyGrid {
            breadth,
            depth,
            sources,
            order,
        })
    }

    pub fn breadth(&self) -> usize {
        self.breadth
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// N_L, the total number of reservoirs.
    pub fn n_reservoirs(&self) -> usize {
        self.breadth * self.depth
    }

    pub fn index(&self, b: usize, d: usize) -> usize {
        b * self.depth + d
    }

    pub fn sources(&self, l: usize) -> &[Source] {
        &self.sources[l]
    }

    pub fn reads_input(&self, l: usize) -> bool {
        self.sources[l].contains(&Source::Input)
    }

    /// Reservoir sources of `l`, in listed order.
    pub fn reservoir_sources(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        self.sources[l].iter().filter_map(|s| match s {
            Source::Reservoir(k) => Some(*k),
            Source::Input => None,
        })
    }

    /// Reservoirs connected to the input, in canonical order.
    pub fn input_connected(&self) -> Vec<usize> {
        (0..self.n_reservoirs())
            .filter(|&l| self.reads_input(l))
            .collect()
    }

    /// Evolution order: every reservoir appears after all of its sources.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Width of the concatenated input vector seen by reservoir `l`.
    pub fn input_width(&self, l: usize, n_inputs: usize, neurons: usize) -> usize {
        self.sources[l]
            .iter()
            .map(|s| match s {
                Source::Input => n_inputs,
                Source::Reservoir(_) => neurons,
            })
            .sum()
    }
}

fn topological_order(sources: &[Vec<Source>]) -> Result<Vec<usize>> {
    let n = sources.len();
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for (l, srcs) in sources.iter().enumerate() {
        for s in srcs {
            if let Source::Reservoir(k) = *s {
                indegree[l] += 1;
                children[k].push(l);
            }
        }
    }
    // Kahn's algorithm, always taking the smallest ready index so the order
    // is canonical for a given map.
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&l| indegree[l] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(l) = ready.pop_first() {
        order.push(l);
        for &c in &children[l] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        return Err(Error::Topology(
            "feedforward connectivity contains a cycle".into(),
        ));
    }
    if !order.iter().any(|&l| sources[l].contains(&Source::Input)) {
        return Err(Error::Topology("no reservoir reads the input".into()));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_grid_is_parallel_chains() {
        let t = TopologyGrid::grid(2, 3).unwrap();
        assert_eq!(t.n_reservoirs(), 6);
        assert_eq!(t.sources(0), &[Source::Input]);
        assert_eq!(t.sources(1), &[Source::Reservoir(0)]);
        assert_eq!(t.sources(3), &[Source::Input]);
        assert_eq!(t.sources(5), &[Source::Reservoir(4)]);
        assert_eq!(t.input_connected(), vec![0, 3]);
        assert_eq!(t.order(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_cycles_and_orphans() {
        let cyc = vec![
            vec![Source::Input, Source::Reservoir(1)],
            vec![Source::Reservoir(0)],
        ];
        assert!(TopologyGrid::with_connectivity(1, 2, cyc).is_err());
        let orphan = vec![vec![Source::Input], vec![]];
        assert!(TopologyGrid::with_connectivity(1, 2, orphan).is_err());
        assert!(TopologyGrid::grid(0, 1).is_err());
    }

    #[test]
    fn order_respects_backward_edges() {
        // reservoir 0 reads from 1, which reads the input
        let srcs = vec![vec![Source::Reservoir(1)], vec![Source::Input]];
        let t = TopologyGrid::with_connectivity(1, 2, srcs).unwrap();
        assert_eq!(t.order(), &[1, 0]);
    }

    #[test]
    fn serde_revalidates() {
        let t = TopologyGrid::grid(2, 2).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: TopologyGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
        let bad = r#"{"breadth":1,"depth":2,"sources":[["input"],[]]}"#;
        assert!(serde_json::from_str::<TopologyGrid>(bad).is_err());
    }
}
