use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// The thought makes an attempt at answering the question.
    pub answer_bearing: bool,
    /// 1-based step that created the node; `None` for the root.
    pub added_at: Option<usize>,
    #[serde(skip)]
    pub latent: Vec<f32>,
}

/// A rooted tree of thoughts. Node 0 is the question; every other node
/// points at an earlier parent, so the graph is acyclic and connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningGraph {
    nodes: Vec<GraphNode>,
    /// Terminal node of the correct walk, when the trace is solvable.
    pub answer_node: Option<usize>,
}

impl ReasoningGraph {
    pub fn new(root_latent: Vec<f32>) -> Self {
        ReasoningGraph {
            nodes: alloc::vec![GraphNode {
                parent: None,
                depth: 0,
                answer_bearing: false,
                added_at: None,
                latent: root_latent,
            }],
            answer_node: None,
        }
    }

    pub const ROOT: usize = 0;

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &GraphNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_child(&mut self, parent: usize, answer_bearing: bool, step: usize, latent: Vec<f32>) -> usize {
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(GraphNode {
            parent: Some(parent),
            depth,
            answer_bearing,
            added_at: Some(step),
            latent,
        });
        self.nodes.len() - 1
    }

    pub(crate) fn set_answer_bearing(&mut self, id: usize) {
        self.nodes[id].answer_bearing = true;
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    /// The attempt implied after `step` steps: the deepest answer-bearing
    /// node present by then, the most recently added one among equals.
    pub fn attempt_at(&self, step: usize) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.answer_bearing && n.added_at.is_some_and(|s| s <= step))
            .max_by_key(|(id, n)| (n.depth, *id))
            .map(|(id, _)| id)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, node) in self.nodes.iter().enumerate() {
            match node.parent {
                None if id != Self::ROOT => return Err(Error::invalid("orphan node")),
                Some(p) if p >= id => return Err(Error::invalid("parent must precede child")),
                Some(p) if node.depth != self.nodes[p].depth + 1 => {
                    return Err(Error::invalid("depth inconsistent with parent"))
                }
                _ => {}
            }
        }
        if let Some(a) = self.answer_node {
            if a >= self.nodes.len() {
                return Err(Error::invalid("answer node out of range"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn attempt_prefers_depth_then_recency() {
        let mut g = ReasoningGraph::new(vec![]);
        let a = g.add_child(0, true, 1, vec![]);
        let b = g.add_child(a, false, 2, vec![]);
        let c = g.add_child(b, true, 3, vec![]);
        let d = g.add_child(0, true, 4, vec![]);
        let e = g.add_child(d, true, 5, vec![]);
        let f = g.add_child(e, true, 6, vec![]);
        assert_eq!(g.attempt_at(0), None);
        assert_eq!(g.attempt_at(2), Some(a));
        assert_eq!(g.attempt_at(5), Some(c));
        assert_eq!(g.attempt_at(6), Some(f)); // depth 3 ties with c, f is newer
        assert_eq!(g.ancestors(f), vec![e, d, 0]);
        g.validate().unwrap();
    }
}
