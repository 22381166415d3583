use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridIndex, Point2, Segment};
use crate::Real;

/// Blend of distance and hazard: `J = alpha * D + (1 - alpha) * beta * B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> CostWeights<T> {
    pub fn cost(&self, dist: T, hazard: T) -> T {
        self.alpha * dist + (T::one() - self.alpha) * self.beta * hazard
    }

    /// `(dD, dB, dJ)` for one edge.
    pub fn edge(&self, dist: T, hazard: T) -> EdgeCost<T> {
        EdgeCost {
            dist,
            hazard,
            cost: self.cost(dist, hazard),
        }
    }

    /// Whether hazard can influence any cost comparison.
    pub fn uses_hazard(&self) -> bool {
        self.alpha < T::one()
    }
}

/// Increments contributed by a single edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCost<T> {
    pub dist: T,
    pub hazard: T,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    pub id: usize,
    pub state: Point2<T>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub edge_dist: T,
    pub edge_hazard: T,
    /// Accumulated path length from the root.
    pub dist_to_come: T,
    /// Accumulated edge hazard from the root.
    pub hazard_to_come: T,
    pub cost_to_come: T,
}

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("node {id}: stored {field} {stored} but recomputed {recomputed}")]
    Mismatch {
        id: usize,
        field: &'static str,
        stored: f64,
        recomputed: f64,
    },
    #[error("node {0}: broken structure ({1})")]
    Structure(usize, &'static str),
}

/// Search tree rooted at the start state. Node ids are dense insertion
/// indices and always equal the node's position in the spatial index.
#[derive(Debug, Clone)]
pub struct Tree<T> {
    nodes: Vec<TreeNode<T>>,
    index: GridIndex<T>,
    weights: CostWeights<T>,
}

impl<T: Real> Tree<T> {
    pub fn new(root: Point2<T>, cell: T, weights: CostWeights<T>) -> Self {
        let mut index = GridIndex::new(cell);
        index.insert(root);
        Self {
            nodes: vec![TreeNode {
                id: 0,
                state: root,
                parent: None,
                children: Vec::new(),
                edge_dist: T::zero(),
                edge_hazard: T::zero(),
                dist_to_come: T::zero(),
                hazard_to_come: T::zero(),
                cost_to_come: T::zero(),
            }],
            index,
            weights,
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> CostWeights<T> {
        self.weights
    }

    pub fn node(&self, id: usize) -> &TreeNode<T> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn index(&self) -> &GridIndex<T> {
        &self.index
    }

    pub fn nearest(&self, q: Point2<T>) -> usize {
        self.index.nearest(q).expect("tree always holds its root")
    }

    pub fn near(&self, q: Point2<T>, radius: T) -> Vec<usize> {
        self.index.near(q, radius)
    }

    /// Cost-to-come `child` would have if attached under `parent` via `edge`.
    pub fn cost_through(&self, parent: usize, edge: &EdgeCost<T>) -> T {
        let p = &self.nodes[parent];
        self.weights
            .cost(p.dist_to_come + edge.dist, p.hazard_to_come + edge.hazard)
    }

    pub fn add_node(&mut self, state: Point2<T>, parent: usize, edge: EdgeCost<T>) -> usize {
        let id = self.nodes.len();
        let inserted = self.index.insert(state);
        debug_assert_eq!(inserted, id);
        let p = &self.nodes[parent];
        let dist = p.dist_to_come + edge.dist;
        let hazard = p.hazard_to_come + edge.hazard;
        self.nodes.push(TreeNode {
            id,
            state,
            parent: Some(parent),
            children: Vec::new(),
            edge_dist: edge.dist,
            edge_hazard: edge.hazard,
            dist_to_come: dist,
            hazard_to_come: hazard,
            cost_to_come: self.weights.cost(dist, hazard),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn is_ancestor(&self, ancestor: usize, mut id: usize) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// Moves `id` under `new_parent` and refreshes the whole subtree.
    pub fn reparent(&mut self, id: usize, new_parent: usize, edge: EdgeCost<T>) {
        assert!(
            !self.is_ancestor(id, new_parent),
            "reparenting would create a cycle"
        );
        if let Some(old) = self.nodes[id].parent {
            self.nodes[old].children.retain(|&c| c != id);
        }
        self.nodes[new_parent].children.push(id);
        let n = &mut self.nodes[id];
        n.parent = Some(new_parent);
        n.edge_dist = edge.dist;
        n.edge_hazard = edge.hazard;
        self.propagate(id);
    }

    /// Recomputes accumulations of `id` and all descendants from their
    /// parents' stored values and stored edge increments.
    fn propagate(&mut self, id: usize) {
        let mut queue = VecDeque::from([id]);
        while let Some(i) = queue.pop_front() {
            let parent = self.nodes[i].parent.expect("non-root");
            let (pd, ph) = {
                let p = &self.nodes[parent];
                (p.dist_to_come, p.hazard_to_come)
            };
            let w = self.weights;
            let n = &mut self.nodes[i];
            n.dist_to_come = pd + n.edge_dist;
            n.hazard_to_come = ph + n.edge_hazard;
            n.cost_to_come = w.cost(n.dist_to_come, n.hazard_to_come);
            queue.extend(n.children.iter().copied());
        }
    }

    /// States from the root to `id`, root first.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut ids = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            ids.push(p);
            cur = p;
        }
        ids.reverse();
        ids
    }

    /// Node ids in breadth-first order from the root.
    pub fn breadth_first(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            queue.extend(self.nodes[i].children.iter().copied());
        }
        order
    }

    /// Re-evaluates every edge top-down with `reevaluate(parent, child)`.
    /// Returning `None` drops the child and its whole subtree; otherwise the
    /// edge takes the new `(dist, hazard)` increments. Survivors are
    /// compacted in original id order. Returns the old-to-new id map.
    pub fn prune<E>(
        &mut self,
        mut reevaluate: impl FnMut(Point2<T>, Point2<T>) -> Result<Option<(T, T)>, E>,
    ) -> Result<Vec<Option<usize>>, E> {
        let n = self.nodes.len();
        let mut alive = vec![false; n];
        let mut edges = vec![(T::zero(), T::zero()); n];
        alive[0] = true;
        for i in self.breadth_first().into_iter().skip(1) {
            let parent = self.nodes[i].parent.expect("non-root");
            if !alive[parent] {
                continue;
            }
            if let Some(e) = reevaluate(self.nodes[parent].state, self.nodes[i].state)? {
                alive[i] = true;
                edges[i] = e;
            }
        }
        let mut remap = vec![None; n];
        let mut next = 0;
        for i in 0..n {
            if alive[i] {
                remap[i] = Some(next);
                next += 1;
            }
        }
        let mut rebuilt = Tree::new(self.nodes[0].state, self.index.cell_size(), self.weights);
        for i in 1..n {
            if !alive[i] {
                continue;
            }
            let parent = remap[self.nodes[i].parent.expect("non-root")].expect("alive parent");
            let (d, h) = edges[i];
            let id = rebuilt.index.insert(self.nodes[i].state);
            rebuilt.nodes.push(TreeNode {
                id,
                state: self.nodes[i].state,
                parent: Some(parent),
                children: Vec::new(),
                edge_dist: d,
                edge_hazard: h,
                dist_to_come: T::zero(),
                hazard_to_come: T::zero(),
                cost_to_come: T::zero(),
            });
        }
        for i in 1..rebuilt.nodes.len() {
            let parent = rebuilt.nodes[i].parent.expect("non-root");
            rebuilt.nodes[parent].children.push(i);
        }
        for &c in rebuilt.nodes[0].children.clone().iter() {
            rebuilt.propagate(c);
        }
        *self = rebuilt;
        Ok(remap)
    }

    /// From-scratch audit: every node's (D, B, J) is recomputed along its
    /// parent chain from geometry and `hazard(edge)` and compared to the
    /// stored values; structural invariants are checked too.
    pub fn audit(&self, hazard: impl Fn(&Segment<T>) -> T, tolerance: T) -> Result<(), AuditError> {
        let root = &self.nodes[0];
        if root.parent.is_some()
            || root.dist_to_come != T::zero()
            || root.hazard_to_come != T::zero()
            || root.cost_to_come != T::zero()
        {
            return Err(AuditError::Structure(
                0,
                "root has a parent or non-zero accumulation",
            ));
        }
        if self.index.len() != self.nodes.len() {
            return Err(AuditError::Structure(
                0,
                "index size differs from node count",
            ));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i || self.index.point(i) != n.state {
                return Err(AuditError::Structure(
                    i,
                    "index contents differ from node states",
                ));
            }
            if let Some(p) = n.parent {
                if p >= self.nodes.len() || !self.nodes[p].children.contains(&i) {
                    return Err(AuditError::Structure(
                        i,
                        "parent does not list node as child",
                    ));
                }
            } else if i != 0 {
                return Err(AuditError::Structure(i, "non-root without parent"));
            }
            for &c in &n.children {
                if self.nodes[c].parent != Some(i) {
                    return Err(AuditError::Structure(i, "child points at another parent"));
                }
            }
        }
        // fresh per-edge values, then sums along each chain
        let fresh: Vec<(T, T)> = self
            .nodes
            .iter()
            .map(|n| match n.parent {
                None => (T::zero(), T::zero()),
                Some(p) => {
                    let s = Segment::new(self.nodes[p].state, n.state);
                    (s.length(), hazard(&s))
                }
            })
            .collect();
        for (i, n) in self.nodes.iter().enumerate() {
            let mut d = T::zero();
            let mut h = T::zero();
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = self.nodes[cur].parent {
                d = d + fresh[cur].0;
                h = h + fresh[cur].1;
                cur = p;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(AuditError::Structure(
                        i,
                        "parent chain does not reach the root",
                    ));
                }
            }
            let j = self.weights.cost(d, h);
            let check = |field: &'static str, stored: T, recomputed: T| {
                if !((stored - recomputed).abs() <= tolerance) {
                    Err(AuditError::Mismatch {
                        id: i,
                        field,
                        stored: stored.as_f64(),
                        recomputed: recomputed.as_f64(),
                    })
                } else {
                    Ok(())
                }
            };
            check("D", n.dist_to_come, d)?;
            check("B", n.hazard_to_come, h)?;
            check("J", n.cost_to_come, j)?;
            let direct = self.weights.cost(n.dist_to_come, n.hazard_to_come);
            check("J(D,B)", n.cost_to_come, direct)?;
        }
        Ok(())
    }

    /// Lookup table `id,north,east,parent,D,B,J` (parent empty for the root).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,north,east,parent,D,B,J\n");
        for n in &self.nodes {
            let parent = n.parent.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.9e},{:.9e},{:.9e}\n",
                n.id,
                n.state.north.as_f64(),
                n.state.east.as_f64(),
                parent,
                n.dist_to_come.as_f64(),
                n.hazard_to_come.as_f64(),
                n.cost_to_come.as_f64()
            ));
        }
        out
    }
}
