//! Coarse-grained lossless network: nodes with inertia, damping and static
//! voltage, edges with susceptance only.
//!
//! Powers are in MW, angles in rad. A line carries `E_a E_b B sin(θ_a − θ_b)`
//! from `a` to `b`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average 2021 demand: 219 423 GWh spread over 8760 h.
pub const ZA_2021_MEAN_DEMAND_MW: f64 = 219_423_000.0 / 8760.0;

/// Inertia scale used when a node omits `inertia`.
pub const DEFAULT_M0: f64 = 5000.0;
/// Damping scale used when a node omits `damping`.
pub const DEFAULT_D0: f64 = 3500.0;
/// Heuristic inertia and damping never drop below this fraction of the scale.
pub const HEURISTIC_FLOOR: f64 = 0.1;

/// Contents of the bundled grid file.
pub const BUNDLED_GRID_JSON: &str = include_str!("../data/za26.json");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridNode {
    pub id: String,
    pub name: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub inertia: f64,
    pub damping: f64,
    pub voltage: f64,
    pub gen_capacity: f64,
    pub load_weight: f64,
    /// MW drawn by the node.
    pub load: f64,
    /// MW dispatched at the node.
    pub generation: f64,
    /// `generation - load`.
    pub p_mech: f64,
}

impl GridNode {
    /// A node with unit voltage, no capacity and no load.
    pub fn new(id: impl Into<String>, inertia: f64, damping: f64) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            lat: None,
            lon: None,
            inertia,
            damping,
            voltage: 1.0,
            gen_capacity: 0.0,
            load_weight: 1.0,
            load: 0.0,
            generation: 0.0,
            p_mech: 0.0,
        }
    }
}

/// Line between node indices `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridEdge {
    pub a: usize,
    pub b: usize,
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    nodes: Vec<GridNode>,
    edges: Vec<GridEdge>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeFlow {
    pub a: usize,
    pub b: usize,
    /// MW from `a` to `b`.
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub theta: Vec<f64>,
    pub slack: usize,
    pub iterations: usize,
    /// Max-norm of the nodal power mismatch.
    pub residual: f64,
}

impl GridModel {
    pub fn new(nodes: Vec<GridNode>, edges: Vec<GridEdge>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Schema("grid has no nodes".into()));
        }
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate node id {:?}", n.id)));
            }
            for (what, v) in [
                ("inertia", n.inertia),
                ("damping", n.damping),
                ("voltage", n.voltage),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Schema(format!(
                        "node {:?}: {what} must be > 0, got {v}",
                        n.id
                    )));
                }
            }
            for (what, v) in [
                ("gen_capacity", n.gen_capacity),
                ("load_weight", n.load_weight),
                ("load", n.load),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Schema(format!(
                        "node {:?}: {what} must be >= 0, got {v}",
                        n.id
                    )));
                }
            }
        }
        for e in &edges {
            if e.a >= nodes.len() || e.b >= nodes.len() {
                return Err(Error::Schema(format!(
                    "edge ({}, {}) references a missing node",
                    e.a, e.b
                )));
            }
            if e.a == e.b {
                return Err(Error::Schema(format!(
                    "self-loop at node {:?}",
                    nodes[e.a].id
                )));
            }
            if !(e.susceptance > 0.0 && e.susceptance.is_finite()) {
                return Err(Error::Schema(format!(
                    "edge {:?}-{:?}: susceptance must be > 0",
                    nodes[e.a].id, nodes[e.b].id
                )));
            }
        }
        let g = Self {
            nodes,
            edges,
            index,
        };
        g.check_connected()?;
        Ok(g)
    }

    /// The synthetic 26-node, 41-line South African example.
    pub fn bundled() -> Self {
        parse_grid(BUNDLED_GRID_JSON).expect("bundled grid is valid")
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GridEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Looks a node up by id, then by name.
    pub fn find(&self, key: &str) -> Option<usize> {
        self.index_of(key)
            .or_else(|| self.nodes.iter().position(|n| n.name == key))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| match (e.a == i, e.b == i) {
                (true, _) => Some(e.b),
                (_, true) => Some(e.a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn p_mech(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.p_mech).collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.nodes.iter().map(|n| n.gen_capacity).sum()
    }

    pub fn total_load(&self) -> f64 {
        self.nodes.iter().map(|n| n.load).sum()
    }

    /// `|Σ p_mech|` relative to `Σ |p_mech|` (0 when nothing is injected).
    pub fn power_imbalance(&self) -> f64 {
        let s: f64 = self.nodes.iter().map(|n| n.p_mech).sum();
        let a: f64 = self.nodes.iter().map(|n| n.p_mech.abs()).sum();
        if a == 0.0 {
            0.0
        } else {
            s.abs() / a
        }
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        let mut comp = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let c = groups.len();
            let mut stack = vec![start];
            comp[start] = c;
            let mut members = Vec::new();
            while let Some(u) = stack.pop() {
                members.push(u);
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = c;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        if groups.len() > 1 {
            let names: Vec<String> = groups
                .iter()
                .map(|g| {
                    let ids: Vec<&str> = g.iter().map(|&i| self.nodes[i].id.as_str()).collect();
                    format!("[{}]", ids.join(", "))
                })
                .collect();
            return Err(Error::Topology(format!(
                "{} disconnected components: {}",
                groups.len(),
                names.join(" ")
            )));
        }
        Ok(())
    }

    /// Spreads `total_demand` over the load weights and dispatches generation
    /// in proportion to capacity.
    pub fn balance_power(&self, total_demand: f64) -> Result<GridModel> {
        if !(total_demand > 0.0 && total_demand.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "total demand must be positive, got {total_demand}"
            )));
        }
        let wsum: f64 = self.nodes.iter().map(|n| n.load_weight).sum();
        let n = self.nodes.len() as f64;
        let loads: Vec<f64> = self
            .nodes
            .iter()
            .map(|node| {
                if wsum > 0.0 {
                    total_demand * node.load_weight / wsum
                } else {
                    total_demand / n
                }
            })
            .collect();
        self.with_loads(&loads)
    }

    /// Sets the nodal loads and re-dispatches generation so that the
    /// injections sum to zero. The last node absorbs the rounding residual.
    pub fn with_loads(&self, loads: &[f64]) -> Result<GridModel> {
        if loads.len() != self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} loads for {} nodes",
                loads.len(),
                self.nodes.len()
            )));
        }
        let demand: f64 = loads.iter().sum();
        let capacity = self.total_capacity();
        if demand > capacity {
            return Err(Error::Infeasible { demand, capacity });
        }
        let mut g = self.clone();
        let share = if capacity > 0.0 {
            demand / capacity
        } else {
            0.0
        };
        let last = g.nodes.len() - 1;
        let mut acc = 0.0;
        for (i, node) in g.nodes.iter_mut().enumerate() {
            node.load = loads[i];
            node.generation = node.gen_capacity * share;
            if i < last {
                node.p_mech = node.generation - node.load;
                acc += node.p_mech;
            } else {
                node.p_mech = -acc;
            }
        }
        Ok(g)
    }

    pub fn edge_flow(&self, e: &GridEdge, theta: &[f64]) -> f64 {
        let (na, nb) = (&self.nodes[e.a], &self.nodes[e.b]);
        na.voltage * nb.voltage * e.susceptance * (theta[e.a] - theta[e.b]).sin()
    }

    pub fn flows(&self, theta: &[f64]) -> Vec<EdgeFlow> {
        self.edges
            .iter()
            .map(|e| EdgeFlow {
                a: e.a,
                b: e.b,
                flow: self.edge_flow(e, theta),
            })
            .collect()
    }

    /// Net power leaving each node through the network.
    pub fn network_injection(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        self.network_injection_into(theta, &mut out);
        out
    }

    pub(crate) fn network_injection_into(&self, theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let f = self.edge_flow(e, theta);
            out[e.a] += f;
            out[e.b] -= f;
        }
    }

    /// `p_mech_j − Σ_ℓ E_j E_ℓ B_jℓ sin(θ_j − θ_ℓ)`.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let mut r = self.network_injection(theta);
        for (ri, n) in r.iter_mut().zip(&self.nodes) {
            *ri = n.p_mech - *ri;
        }
        r
    }

    /// Node carrying the largest generation (first on ties).
    pub fn slack(&self) -> usize {
        let mut best = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.generation > self.nodes[best].generation {
                best = i;
            }
        }
        best
    }

    /// Newton solve of the lossless flow equations, started from the
    /// linearised solution, with the slack angle pinned at zero.
    pub fn fixed_point(&self) -> Result<FixedPoint> {
        const MAX_ITER: usize = 100;
        let n = self.nodes.len();
        let slack = self.slack();
        let scale = self.nodes.iter().fold(0.0f64, |m, x| m.max(x.p_mech.abs()));
        let tol = 1e-10 * scale;
        let mut theta = vec![0.0; n];
        if scale == 0.0 {
            return Ok(FixedPoint {
                theta,
                slack,
                iterations: 0,
                residual: 0.0,
            });
        }
        let keep: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
        if keep.is_empty() {
            return Err(Error::NoFixedPoint(format!(
                "single node with nonzero injection {}",
                self.nodes[0].p_mech
            )));
        }

        // Linearised start: Laplacian with unit cosines.
        let p: Vec<f64> = keep.iter().map(|&i| self.nodes[i].p_mech).collect();
        let lap = self.reduced_jacobian(&theta, &keep, true);
        let x = solve_dense(lap, p)
            .ok_or_else(|| Error::NoFixedPoint("singular network Laplacian".into()))?;
        for (k, &i) in keep.iter().enumerate() {
            theta[i] = x[k];
        }

        let mut residual = f64::INFINITY;
        for it in 0..=MAX_ITER {
            let r = self.residuals(&theta);
            residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !residual.is_finite() {
                break;
            }
            if residual < tol {
                if let Some(e) = self
                    .edges
                    .iter()
                    .find(|e| (theta[e.a] - theta[e.b]).abs() >= FRAC_PI_2)
                {
                    return Err(Error::NoFixedPoint(format!(
                        "solution left the stable branch on line {}-{}",
                        self.nodes[e.a].id, self.nodes[e.b].id
                    )));
                }
                return Ok(FixedPoint {
                    theta,
                    slack,
                    iterations: it,
                    residual,
                });
            }
            if it == MAX_ITER {
                break;
            }
            let rhs: Vec<f64> = keep.iter().map(|&i| r[i]).collect();
            let jac = self.reduced_jacobian(&theta, &keep, false);
            let Some(step) = solve_dense(jac, rhs) else {
                break;
            };
            for (k, &i) in keep.iter().enumerate() {
                theta[i] += step[k];
            }
        }
        Err(Error::NoFixedPoint(format!(
            "Newton iteration did not converge in {MAX_ITER} steps (residual {residual:.3e} MW)"
        )))
    }

    /// Jacobian of the network injection with respect to the non-slack angles.
    fn reduced_jacobian(&self, theta: &[f64], keep: &[usize], linear: bool) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let m = keep.len();
        let mut j = vec![vec![0.0; m]; m];
        for e in &self.edges {
            let w = self.nodes[e.a].voltage * self.nodes[e.b].voltage * e.susceptance;
            let w = if linear {
                w
            } else {
                w * (theta[e.a] - theta[e.b]).cos()
            };
            let (pa, pb) = (pos[e.a], pos[e.b]);
            if pa != usize::MAX {
                j[pa][pa] += w;
            }
            if pb != usize::MAX {
                j[pb][pb] += w;
            }
            if pa != usize::MAX && pb != usize::MAX {
                j[pa][pb] -= w;
                j[pb][pa] -= w;
            }
        }
        j
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let norm = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * norm {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(row);
            for (x, &p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdValue {
    Text(String),
    Number(i64),
}

impl IdValue {
    fn into_string(self) -> String {
        match self {
            IdValue::Text(s) => s,
            IdValue::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct NodeRecord {
    id: IdValue,
    name: Option<String>,
    lat: Option<f64>,
    lon: Option<f64>,
    #[serde(default)]
    gen_capacity_mw: f64,
    load_weight: Option<f64>,
    population: Option<f64>,
    inertia: Option<f64>,
    damping: Option<f64>,
    #[serde(default = "unit")]
    voltage_pu: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct EdgeRecord {
    a: IdValue,
    b: IdValue,
    susceptance: f64,
}

#[derive(Deserialize)]
struct GridFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    m0: Option<f64>,
    d0: Option<f64>,
}

/// Parses a grid file.
///
/// Node fields other than `id` are optional: `name` defaults to the id,
/// `gen_capacity_mw` to 0, `voltage_pu` to 1, `load_weight` to `population`
/// and then to 1. Missing `inertia` becomes `m0 · capacity / mean capacity`
/// and missing `damping` becomes `d0 · N · (load share + capacity share) / 2`,
/// both floored at 0.1 of their scale. `m0` and `d0` may be given at the top
/// level of the file.
pub fn parse_grid(text: &str) -> Result<GridModel> {
    let file: GridFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let m0 = file.m0.unwrap_or(DEFAULT_M0);
    let d0 = file.d0.unwrap_or(DEFAULT_D0);
    let count = file.nodes.len() as f64;
    let weights: Vec<f64> = file
        .nodes
        .iter()
        .map(|r| r.load_weight.or(r.population).unwrap_or(1.0))
        .collect();
    let wsum: f64 = weights.iter().sum();
    let csum: f64 = file.nodes.iter().map(|r| r.gen_capacity_mw).sum();
    let cmean = csum / count;

    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (r, &w) in file.nodes.into_iter().zip(&weights) {
        let cap_ratio = if cmean > 0.0 {
            r.gen_capacity_mw / cmean
        } else {
            1.0
        };
        let load_share = if wsum > 0.0 { w / wsum } else { 1.0 / count };
        let cap_share = if csum > 0.0 {
            r.gen_capacity_mw / csum
        } else {
            1.0 / count
        };
        let inertia = r
            .inertia
            .unwrap_or_else(|| m0 * cap_ratio.max(HEURISTIC_FLOOR));
        let damping = r
            .damping
            .unwrap_or_else(|| d0 * (0.5 * count * (load_share + cap_share)).max(HEURISTIC_FLOOR));
        let id = r.id.into_string();
        nodes.push(GridNode {
            name: r.name.unwrap_or_else(|| id.clone()),
            id,
            lat: r.lat,
            lon: r.lon,
            inertia,
            damping,
            voltage: r.voltage_pu,
            gen_capacity: r.gen_capacity_mw,
            load_weight: w,
            load: 0.0,
            generation: 0.0,
            p_mech: 0.0,
        });
    }
    let index: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut edges = Vec::with_capacity(file.edges.len());
    for r in file.edges {
        let (a, b) = (r.a.into_string(), r.b.into_string());
        let lookup = |id: &str| {
            index.get(id).copied().ok_or_else(|| {
                Error::Schema(format!("edge {a}-{b} references unknown node {id:?}"))
            })
        };
        edges.push(GridEdge {
            a: lookup(&a)?,
            b: lookup(&b)?,
            susceptance: r.susceptance,
        });
    }
    GridModel::new(nodes, edges)
}

pub fn load_grid(path: &Path) -> Result<GridModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_grid(&text)
}
