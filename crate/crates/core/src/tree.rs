//! Spatial trees and generation-`n` occupation snapshots.

/// One individual. `parent` is an index into [`SpatialTree::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// 1-based birth rank among the parent's children (last letter of the label).
    pub rank: u32,
    pub generation: usize,
    pub position: f64,
}

/// A tree with positions, stored in depth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTree {
    horizon: usize,
    nodes: Vec<TreeNode>,
}

impl SpatialTree {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            nodes: vec![TreeNode { parent: None, rank: 0, generation: 0, position: 0.0 }],
        }
    }

    pub(crate) fn push(&mut self, parent: usize, rank: u32, position: f64) -> usize {
        let generation = self.nodes[parent].generation + 1;
        self.nodes.push(TreeNode { parent: Some(parent), rank, generation, position });
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ulam–Harris label of node `i`: the sequence of birth ranks from the root.
    pub fn label(&self, mut i: usize) -> Vec<u32> {
        let mut label = Vec::with_capacity(self.nodes[i].generation);
        while let Some(p) = self.nodes[i].parent {
            label.push(self.nodes[i].rank);
            i = p;
        }
        label.reverse();
        label
    }

    /// Positions of the individuals alive at the horizon.
    pub fn occupation(&self) -> OccupationSample {
        OccupationSample::new(
            self.horizon,
            self.nodes.iter().filter(|v| v.generation == self.horizon).map(|v| v.position).collect(),
        )
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn check(&self) -> Option<String> {
        let root = self.nodes.first()?;
        if root.parent.is_some() || root.position != 0.0 || root.generation != 0 {
            return Some("root must be at generation 0, position 0".into());
        }
        for (i, v) in self.nodes.iter().enumerate().skip(1) {
            match v.parent {
                Some(p) if p < i && self.nodes[p].generation + 1 == v.generation => {}
                _ => return Some(format!("node {i} has no valid parent")),
            }
            if v.generation > self.horizon {
                return Some(format!("node {i} lies beyond the horizon"));
            }
        }
        None
    }
}

/// Sorted generation-`n` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSample {
    pub n: usize,
    positions: Vec<f64>,
}

impl OccupationSample {
    pub fn new(n: usize, mut positions: Vec<f64>) -> Self {
        positions.sort_unstable_by(f64::total_cmp);
        Self { n, positions }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// `#{V(u) <= sqrt(n) x} / n`. `x` may be infinite.
    pub fn statistic(&self, x: f64) -> f64 {
        let n = self.n.max(1) as f64;
        let below = if x == f64::INFINITY {
            self.positions.len()
        } else if x == f64::NEG_INFINITY {
            0
        } else {
            let c = n.sqrt() * x;
            self.positions.partition_point(|&v| v <= c)
        };
        below as f64 / n
    }

    /// Little-endian record: `rep_id: u64, count: u64, positions: f64...`.
    pub fn write_binary(&self, rep: u64, out: &mut Vec<u8>) {
        out.extend_from_slice(&rep.to_le_bytes());
        out.extend_from_slice(&(self.positions.len() as u64).to_le_bytes());
        for v in &self.positions {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// `#{leaves with V(u) <= sqrt(n) x} / n`.
pub fn occupation_statistic(tree: &SpatialTree, x: f64) -> f64 {
    tree.occupation().statistic(x)
}
