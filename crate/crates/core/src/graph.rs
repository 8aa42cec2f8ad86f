//! The rooted dependency tree induced by a generator: one edge `n → α(n)`
//! per position, rooted at position 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    // parent[n] for n in 2..=len; slots 0 and 1 are 0.
    parent: Vec<usize>,
    depth: Vec<usize>,
}

/// Builds the tree on `1..=len`. Any axiom violation on `2..=len` is an error.
pub fn build_tree(spec: &GeneratorSpec, len: usize) -> Result<DependencyTree> {
    if len == 0 {
        return Err(Error::Domain {
            index: 0,
            lower: 1,
            upper: usize::MAX,
        });
    }
    let parent = spec.parents(len)?;
    DependencyTree::from_parents(parent)
}

impl DependencyTree {
    /// From a parent vector indexed by position (entries 0 and 1 ignored).
    pub fn from_parents(mut parent: Vec<usize>) -> Result<Self> {
        if parent.len() < 2 {
            parent.resize(2, 0);
        }
        parent[0] = 0;
        parent[1] = 0;
        let mut depth = vec![0; parent.len()];
        for n in 2..parent.len() {
            let a = parent[n];
            if a == 0 || a >= n {
                return Err(Error::AxiomViolation { n, value: a as i64 });
            }
            depth[n] = depth[a] + 1;
        }
        Ok(DependencyTree { parent, depth })
    }

    /// Number of positions `N`.
    pub fn node_count(&self) -> usize {
        self.parent.len() - 1
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.node_count() {
            return Err(Error::Domain {
                index: n,
                lower: 1,
                upper: self.node_count(),
            });
        }
        Ok(())
    }

    /// `α(n)`, or `None` at the root.
    pub fn parent(&self, n: usize) -> Result<Option<usize>> {
        self.check(n)?;
        Ok((n >= 2).then(|| self.parent[n]))
    }

    /// The parent vector indexed by position; slots 0 and 1 are 0.
    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    /// Number of edges between `n` and the root.
    pub fn depth(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        Ok(self.depth[n])
    }

    /// Edges `(n, α(n))` in ascending `n`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (2..=self.node_count()).map(|n| (n, self.parent[n]))
    }

    /// `[n, α(n), α(α(n)), …, 1]`.
    pub fn path_to_root(&self, n: usize) -> Result<Vec<usize>> {
        self.check(n)?;
        let mut path = vec![n];
        let mut cur = n;
        while cur > 1 {
            cur = self.parent[cur];
            path.push(cur);
        }
        Ok(path)
    }

    /// Lowest common ancestor. Parents strictly decrease, so the larger index
    /// is never an ancestor of the smaller one and can always step up.
    pub fn lowest_common_ancestor(&self, m: usize, n: usize) -> Result<usize> {
        self.check(m)?;
        self.check(n)?;
        let (mut a, mut b) = (m, n);
        while a != b {
            if a > b {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        Ok(a)
    }

    /// Edge count of the path from `m` to `n` through their common ancestor.
    pub fn tree_distance(&self, m: usize, n: usize) -> Result<usize> {
        let lca = self.lowest_common_ancestor(m, n)?;
        Ok(self.depth[m] + self.depth[n] - 2 * self.depth[lca])
    }

    /// Graphviz description: every node, then one `n -> α(n)` line per edge in
    /// ascending `n`.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph dependency {\n");
        for n in 1..=self.node_count() {
            let _ = writeln!(out, "  {n};");
        }
        for (n, a) in self.edges() {
            let _ = writeln!(out, "  {n} -> {a};");
        }
        out.push_str("}\n");
        out
    }

    /// `{"n": parent, …}` keyed by decimal position.
    pub fn to_json_map(&self) -> BTreeMap<String, usize> {
        // Keys sort lexicographically here ("10" < "2"); use `to_json` for
        // numeric order.
        self.edges().map(|(n, a)| (n.to_string(), a)).collect()
    }

    /// JSON tree dump with keys in ascending numeric order.
    pub fn to_json(&self) -> String {
        let body: Vec<String> = self.edges().map(|(n, a)| format!("\"{n}\":{a}")).collect();
        format!("{{{}}}", body.join(","))
    }
}
