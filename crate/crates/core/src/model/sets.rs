use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, Rect};
use crate::error::{Error, Result};

/// Candidate-load set a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SetLabel {
    J,
    K,
    L,
}

impl SetLabel {
    pub const ALL: [SetLabel; 3] = [SetLabel::J, SetLabel::K, SetLabel::L];

    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::J => "J",
            SetLabel::K => "K",
            SetLabel::L => "L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "J" | "j" => Some(SetLabel::J),
            "K" | "k" => Some(SetLabel::K),
            "L" | "l" => Some(SetLabel::L),
            _ => None,
        }
    }
}

/// The three disjoint candidate node sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSets {
    pub j: Vec<usize>,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
}

impl NodeSets {
    pub fn get(&self, label: SetLabel) -> &[usize] {
        match label {
            SetLabel::J => &self.j,
            SetLabel::K => &self.k,
            SetLabel::L => &self.l,
        }
    }

    pub fn total(&self) -> usize {
        self.j.len() + self.k.len() + self.l.len()
    }

    /// Candidates in column order: J, then K, then L.
    pub fn candidates(&self) -> Vec<(usize, SetLabel)> {
        SetLabel::ALL
            .iter()
            .flat_map(|&s| self.get(s).iter().map(move |&n| (n, s)))
            .collect()
    }

    /// Builds sets from explicit node lists, checking the same invariants as
    /// [`define_node_sets`].
    pub fn from_lists(mesh: &Mesh, mut j: Vec<usize>, mut k: Vec<usize>, mut l: Vec<usize>) -> Result<Self> {
        for (label, list) in [("J", &mut j), ("K", &mut k), ("L", &mut l)] {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::NodeSet {
                    set: label.into(),
                    reason: "empty selection".into(),
                });
            }
            if let Some(&bad) = list.iter().find(|&&n| n >= mesh.node_count()) {
                return Err(Error::UnknownNode(bad));
            }
        }
        let sets = Self { j, k, l };
        for (a, b) in [(SetLabel::J, SetLabel::K), (SetLabel::J, SetLabel::L), (SetLabel::K, SetLabel::L)] {
            if let Some(n) = sets.get(a).iter().find(|n| sets.get(b).binary_search(n).is_ok()) {
                return Err(Error::NodeSet {
                    set: format!("{}/{}", a.as_str(), b.as_str()),
                    reason: format!("node {n} belongs to both sets"),
                });
            }
        }
        Ok(sets)
    }
}

/// Selects the nodes inside each rectangle (boundaries inclusive).
pub fn define_node_sets(mesh: &Mesh, rects: [Rect; 3]) -> Result<NodeSets> {
    let footprint = mesh.footprint();
    for (label, r) in SetLabel::ALL.iter().zip(&rects) {
        let inside = footprint.contains(r.x[0], r.y[0]) && footprint.contains(r.x[1], r.y[1]);
        if !inside {
            return Err(Error::NodeSet {
                set: label.as_str().into(),
                reason: format!("rectangle {r:?} leaves the mesh footprint"),
            });
        }
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        if rects[a].intersects(&rects[b]) {
            return Err(Error::NodeSet {
                set: format!("{}/{}", SetLabel::ALL[a].as_str(), SetLabel::ALL[b].as_str()),
                reason: "rectangles overlap".into(),
            });
        }
    }
    let [j, k, l] = rects.map(|r| mesh.nodes_in(&r));
    NodeSets::from_lists(mesh, j, k, l)
}
