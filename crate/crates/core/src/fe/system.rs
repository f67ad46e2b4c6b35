use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::element::{RectElement, ELEMENT_DOFS, NODE_DOFS};
use super::skyline::Skyline;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{BoundaryConditions, Dof, Mesh, Model, ShellStiffness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadDirection {
    #[serde(rename = "-z")]
    NegZ,
    #[serde(rename = "+z")]
    PosZ,
}

impl LoadDirection {
    pub fn sign(self) -> f64 {
        match self {
            LoadDirection::NegZ => -1.0,
            LoadDirection::PosZ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub node: usize,
    /// Magnitude [N].
    pub force: f64,
    pub direction: LoadDirection,
}

/// Concentrated out-of-plane forces, at most one per node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    pub loads: Vec<PointLoad>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl LoadCase {
    pub fn new(loads: Vec<PointLoad>) -> Self {
        Self {
            loads,
            description: String::new(),
        }
    }

    /// Single force in -z.
    pub fn single(node: usize, force: f64) -> Self {
        Self::new(vec![PointLoad {
            node,
            force,
            direction: LoadDirection::NegZ,
        }])
    }

    /// Forces in -z at the given nodes.
    pub fn downward(pairs: &[(usize, f64)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(node, force)| PointLoad {
                    node,
                    force,
                    direction: LoadDirection::NegZ,
                })
                .collect(),
        )
    }

    /// Consistent nodal forces of a uniform pressure `q` [N/mm²] acting in -z.
    pub fn uniform_pressure(mesh: &Mesh, q: f64) -> Self {
        let mut per_node = vec![0.0; mesh.node_count()];
        let quarter = 0.25 * q * mesh.element_size * mesh.element_size;
        for e in 0..mesh.element_count() {
            for n in mesh.element_nodes(e) {
                per_node[n] += quarter;
            }
        }
        let pairs: Vec<_> = per_node.into_iter().enumerate().collect();
        let mut lc = Self::downward(&pairs);
        lc.description = format!("uniform pressure {q} N/mm^2");
        lc
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.loads {
            l.force *= factor;
        }
        out
    }

    pub fn validate(&self, node_count: usize) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.loads {
            if l.node >= node_count {
                return Err(Error::UnknownNode(l.node));
            }
            if !l.force.is_finite() {
                return Err(Error::Precondition(format!("non-finite force at node {}", l.node)));
            }
            if !seen.insert(l.node) {
                return Err(Error::Precondition(format!("node {} is loaded more than once", l.node)));
            }
        }
        Ok(())
    }
}

/// Per-node `[u, v, w, rx, ry]` on the mesh grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub grid: GridSpec,
    pub values: Vec<[f64; NODE_DOFS]>,
}

impl DisplacementField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            grid: GridSpec::of_mesh(mesh),
            values: vec![[0.0; NODE_DOFS]; mesh.node_count()],
        }
    }

    pub fn w(&self, node: usize) -> f64 {
        self.values[node][Dof::W.index()]
    }

    pub fn element_dofs(&self, mesh: &Mesh, element: usize) -> [f64; ELEMENT_DOFS] {
        let nodes = mesh.element_nodes(element);
        std::array::from_fn(|k| self.values[nodes[k / NODE_DOFS]][k % NODE_DOFS])
    }

    /// Out-of-plane deflections of `nodes`, in the given order.
    pub fn extract_w(&self, nodes: &[usize]) -> Result<Vec<f64>> {
        nodes
            .iter()
            .map(|&n| self.values.get(n).map(|v| v[Dof::W.index()]).ok_or(Error::UnknownNode(n)))
            .collect()
    }
}

/// Free-function form of [`DisplacementField::extract_w`].
pub fn extract_w(disp: &DisplacementField, nodes: &[usize]) -> Result<Vec<f64>> {
    disp.extract_w(nodes)
}

/// Constrained, factorized stiffness system.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    grid: GridSpec,
    /// Equation number for each global DOF `node * 5 + dof`.
    dof_map: Vec<Option<usize>>,
    stiffness: Skyline,
    factor: Skyline,
    /// `K[eq][constrained dof]` couplings, for prescribed displacements.
    coupling: Vec<(usize, usize, f64)>,
}

impl SystemMatrix {
    pub fn equations(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn node_count(&self) -> usize {
        self.dof_map.len() / NODE_DOFS
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn equation(&self, node: usize, dof: Dof) -> Option<usize> {
        self.dof_map[node * NODE_DOFS + dof.index()]
    }

    pub fn is_constrained(&self, node: usize, dof: Dof) -> bool {
        self.equation(node, dof).is_none()
    }

    /// Unfactorized constrained stiffness.
    pub fn stiffness(&self) -> &Skyline {
        &self.stiffness
    }

    pub fn load_vector(&self, loads: &LoadCase) -> Result<Vec<f64>> {
        loads.validate(self.node_count())?;
        let mut f = vec![0.0; self.equations()];
        for l in &loads.loads {
            if let Some(eq) = self.equation(l.node, Dof::W) {
                f[eq] += l.direction.sign() * l.force;
            }
        }
        Ok(f)
    }

    fn expand(&self, x: &[f64]) -> DisplacementField {
        let values = (0..self.node_count())
            .map(|n| std::array::from_fn(|d| self.dof_map[n * NODE_DOFS + d].map_or(0.0, |eq| x[eq])))
            .collect();
        DisplacementField {
            grid: self.grid,
            values,
        }
    }

    /// Solves `K u = f`. Loads on constrained DOFs go straight to the supports.
    pub fn solve(&self, loads: &LoadCase) -> Result<DisplacementField> {
        let mut f = self.load_vector(loads)?;
        self.factor.solve_in_place(&mut f);
        Ok(self.expand(&f))
    }

    /// Solves with non-zero values on constrained DOFs.
    pub fn solve_prescribed(
        &self,
        loads: &LoadCase,
        prescribed: &[(usize, Dof, f64)],
    ) -> Result<DisplacementField> {
        let mut f = self.load_vector(loads)?;
        let mut fixed = BTreeMap::new();
        for &(node, dof, value) in prescribed {
            if node >= self.node_count() {
                return Err(Error::UnknownNode(node));
            }
            if !self.is_constrained(node, dof) {
                return Err(Error::Precondition(format!(
                    "node {node} {dof:?} is free; only constrained DOFs can be prescribed"
                )));
            }
            fixed.insert(node * NODE_DOFS + dof.index(), value);
        }
        for &(eq, gdof, k) in &self.coupling {
            if let Some(v) = fixed.get(&gdof) {
                f[eq] -= k * v;
            }
        }
        self.factor.solve_in_place(&mut f);
        let mut field = self.expand(&f);
        for (gdof, v) in fixed {
            field.values[gdof / NODE_DOFS][gdof % NODE_DOFS] = v;
        }
        Ok(field)
    }

    /// Writes the constrained stiffness as `row col value` lines (lower triangle, 0-based).
    pub fn dump_triplets(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "# constrained stiffness, lower triangle, n = {}", self.equations()).map_err(io)?;
        for (i, j, v) in self.stiffness.triplets() {
            writeln!(out, "{i} {j} {v:?}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Nodes in equation order: along the shorter grid direction first, which
/// keeps the skyline bandwidth at one short grid line.
fn equation_order(mesh: &Mesh) -> Vec<usize> {
    let (nx, ny) = mesh.node_dims();
    if nx <= ny {
        (0..mesh.node_count()).collect()
    } else {
        (0..nx).flat_map(|i| (0..ny).map(move |j| mesh.node_index(i, j))).collect()
    }
}

/// Assembles and factorizes the plate system.
///
/// `stiffness` is indexed like [`Mesh::laminate_names`].
pub fn assemble(mesh: &Mesh, stiffness: &[ShellStiffness], bc: &BoundaryConditions) -> Result<SystemMatrix> {
    if let Some(missing) = mesh.laminate_names().get(stiffness.len()) {
        return Err(Error::Unknown {
            kind: "laminate stiffness",
            id: missing.clone(),
        });
    }
    let mask = bc.constrained_mask(mesh);
    let mut dof_map = vec![None; mesh.node_count() * NODE_DOFS];
    let mut n_eq = 0;
    for node in equation_order(mesh) {
        let flags = mask[node];
        for d in 0..NODE_DOFS {
            if !flags[d] {
                dof_map[node * NODE_DOFS + d] = Some(n_eq);
                n_eq += 1;
            }
        }
    }

    let element_dofs = |e: usize| -> [usize; ELEMENT_DOFS] {
        let nodes = mesh.element_nodes(e);
        std::array::from_fn(|k| nodes[k / NODE_DOFS] * NODE_DOFS + k % NODE_DOFS)
    };

    let mut first: Vec<usize> = (0..n_eq).collect();
    for e in 0..mesh.element_count() {
        let eqs: Vec<usize> = element_dofs(e).iter().filter_map(|&g| dof_map[g]).collect();
        if let Some(&lo) = eqs.iter().min() {
            for &eq in &eqs {
                first[eq] = first[eq].min(lo);
            }
        }
    }

    let mut k = Skyline::with_profile(first);
    let mut coupling = BTreeMap::new();
    let geometry = RectElement::square(mesh.element_size);
    let mut cache: Vec<Option<Box<[[f64; ELEMENT_DOFS]; ELEMENT_DOFS]>>> = vec![None; stiffness.len()];
    for e in 0..mesh.element_count() {
        let lam = mesh.element_laminate_id(e);
        let ke = cache[lam].get_or_insert_with(|| Box::new(geometry.stiffness(&stiffness[lam])));
        let gdofs = element_dofs(e);
        for p in 0..ELEMENT_DOFS {
            let Some(ep) = dof_map[gdofs[p]] else { continue };
            for q in 0..ELEMENT_DOFS {
                match dof_map[gdofs[q]] {
                    Some(eq) if eq <= ep => k.add(ep, eq, ke[p][q]),
                    Some(_) => {}
                    None => *coupling.entry((ep, gdofs[q])).or_insert(0.0) += ke[p][q],
                }
            }
        }
    }

    let mut factor = k.clone();
    factor.factorize().map_err(|modes| Error::Singular { modes })?;
    Ok(SystemMatrix {
        grid: GridSpec::of_mesh(mesh),
        dof_map,
        stiffness: k,
        factor,
        coupling: coupling.into_iter().map(|((eq, g), v)| (eq, g, v)).collect(),
    })
}

impl Model {
    pub fn assemble(&self) -> Result<SystemMatrix> {
        assemble(&self.mesh, &self.stiffness, &self.boundary)
    }
}
