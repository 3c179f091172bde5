//! Domain vocabulary shared by every other module: topologies, functions,
//! workloads and the two decision outputs (placement and routing).
//!
//! Units are fixed across the crate: delay in ms, workload in requests/s,
//! memory in GB and compute in core-units. Cumulative delay therefore
//! carries ms·req/s.
//!
//! Scenario files are JSON documents:
//!
//! ```json
//! {
//!   "nodes": [{"id": 0, "cores": 50.0, "memory_gb": 100.0}],
//!   "delays": [[0.0]],
//!   "functions": [{"id": 0, "memory_gb": 10.0, "cores_per_request": 1.0}],
//!   "workload": [[3.0]],
//!   "criticality": [0]
//! }
//! ```
//!
//! A function may give `cores_per_request_by_node` (one entry per node)
//! instead of the scalar form, and an optional `instance_cores` reservation
//! held by every running instance. `criticality` is optional.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    /// Core capacity in core-units.
    pub cores: f64,
    /// Memory capacity in GB.
    pub memory: f64,
}

/// Symmetric, zero-diagonal matrix of inter-node delays in ms.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DelayMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "delay row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        Ok(Self {
            n,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// Uniform off-diagonal delay.
    pub fn uniform(n: usize, delay: f64) -> Self {
        let mut entries = vec![delay; n * n];
        for i in 0..n {
            entries[i * n + i] = 0.0;
        }
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row-major flattening.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Multiply every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|d| d * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub delays: DelayMatrix,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_cores(&self) -> f64 {
        self.nodes.iter().map(|n| n.cores).sum()
    }

    pub fn total_memory(&self) -> f64 {
        self.nodes.iter().map(|n| n.memory).sum()
    }
}

/// Per-request compute demand of a function, either homogeneous across nodes
/// or given per destination node.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreDemand {
    Uniform(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub id: usize,
    /// Memory held by each instance, GB.
    pub memory_req: f64,
    pub cores_per_request: CoreDemand,
    /// Cores reserved by an instance regardless of load. Zero unless the
    /// scenario sets it.
    pub instance_cores: f64,
}

impl FunctionSpec {
    pub fn new(id: usize, memory_req: f64, cores_per_request: f64) -> Self {
        Self {
            id,
            memory_req,
            cores_per_request: CoreDemand::Uniform(cores_per_request),
            instance_cores: 0.0,
        }
    }

    pub fn with_instance_cores(mut self, cores: f64) -> Self {
        self.instance_cores = cores;
        self
    }

    /// Core-units consumed on node `j` per unit of request rate routed there.
    #[inline]
    pub fn cores_at(&self, j: usize) -> f64 {
        match &self.cores_per_request {
            CoreDemand::Uniform(k) => *k,
            CoreDemand::PerNode(v) => v[j],
        }
    }

    pub fn cores_row(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.cores_at(j)).collect()
    }
}

/// Request rates, one row per function and one column per node.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMatrix {
    functions: usize,
    nodes: usize,
    entries: Vec<f64>,
}

impl WorkloadMatrix {
    pub fn zeros(functions: usize, nodes: usize) -> Self {
        Self {
            functions,
            nodes,
            entries: vec![0.0; functions * nodes],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], nodes: usize) -> Result<Self> {
        if let Some((f, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != nodes) {
            return Err(Error::Dimension(format!(
                "workload row {f} has {} columns, topology has {nodes} nodes",
                row.len()
            )));
        }
        Ok(Self {
            functions: rows.len(),
            nodes,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn get(&self, f: usize, i: usize) -> f64 {
        self.entries[f * self.nodes + i]
    }

    pub fn set(&mut self, f: usize, i: usize, rate: f64) {
        self.entries[f * self.nodes + i] = rate;
    }

    pub fn row(&self, f: usize) -> &[f64] {
        &self.entries[f * self.nodes..(f + 1) * self.nodes]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.functions).map(|f| self.row(f).to_vec()).collect()
    }

    pub fn function_total(&self, f: usize) -> f64 {
        self.row(f).iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn is_valid(&self) -> bool {
        self.entries.iter().all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// Boolean placement of one function over the nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlacementVector(pub Vec<bool>);

impl PlacementVector {
    pub fn empty(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    /// Placement over `n` nodes whose node `i` is set iff bit `i` of `mask` is.
    pub fn from_mask(mask: u32, n: usize) -> Self {
        Self((0..n).map(|i| mask & (1 << i) != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i]
    }
}

/// Fractions `x[i][j]` of the traffic arriving at node `i` that node `j` serves.
/// Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct RoutingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl From<RoutingMatrix> for Vec<Vec<f64>> {
    fn from(m: RoutingMatrix) -> Self {
        m.rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for RoutingMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl RoutingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("routing matrix is not square".into()));
        }
        Ok(Self {
            n,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Mutable deployment bookkeeping for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentState {
    pub available_memory: Vec<f64>,
    pub available_cores: Vec<f64>,
    pub placed: Vec<Option<PlacementVector>>,
    pub routes: Vec<Option<RoutingMatrix>>,
    /// Cumulative routed delay T, ms·req/s.
    pub cumulative_delay: f64,
    /// Cumulative cost C, core-units.
    pub cumulative_cost: f64,
}

impl DeploymentState {
    pub fn fresh(topology: &Topology, functions: usize) -> Self {
        Self {
            available_memory: topology.nodes.iter().map(|n| n.memory).collect(),
            available_cores: topology.nodes.iter().map(|n| n.cores).collect(),
            placed: vec![None; functions],
            routes: vec![None; functions],
            cumulative_delay: 0.0,
            cumulative_cost: 0.0,
        }
    }
}

/// A validation failure with the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NodeId { position: usize, id: usize },
    NodeCores { node: usize },
    NodeMemory { node: usize },
    DelayShape { rows: usize, nodes: usize },
    NonzeroDiagonal { node: usize },
    Asymmetric { i: usize, j: usize },
    NegativeDelay { i: usize, j: usize },
    NonFiniteDelay { i: usize, j: usize },
    FunctionId { position: usize, id: usize },
    FunctionMemory { function: usize },
    FunctionCores { function: usize, node: usize },
    InstanceCores { function: usize },
    WorkloadEntry { function: usize, node: usize },
    Criticality { len: usize, functions: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeId { position, id } => {
                write!(f, "node at position {position} has id {id}, ids must be dense")
            }
            Violation::NodeCores { node } => write!(f, "non-positive cores at node {node}"),
            Violation::NodeMemory { node } => write!(f, "non-positive memory at node {node}"),
            Violation::DelayShape { rows, nodes } => {
                write!(f, "delay matrix is {rows}x{rows} for {nodes} nodes")
            }
            Violation::NonzeroDiagonal { node } => write!(f, "nonzero diagonal at {node}"),
            Violation::Asymmetric { i, j } => write!(f, "asymmetric at ({i},{j})"),
            Violation::NegativeDelay { i, j } => write!(f, "negative delay at ({i},{j})"),
            Violation::NonFiniteDelay { i, j } => write!(f, "non-finite delay at ({i},{j})"),
            Violation::FunctionId { position, id } => {
                write!(f, "function at position {position} has id {id}, ids must be dense")
            }
            Violation::FunctionMemory { function } => {
                write!(f, "non-positive memory requirement for function {function}")
            }
            Violation::FunctionCores { function, node } => write!(
                f,
                "non-positive cores per request for function {function} at node {node}"
            ),
            Violation::InstanceCores { function } => {
                write!(f, "negative instance cores for function {function}")
            }
            Violation::WorkloadEntry { function, node } => write!(
                f,
                "workload entry ({function},{node}) is negative or non-finite"
            ),
            Violation::Criticality { len, functions } => {
                write!(f, "criticality has {len} entries for {functions} functions")
            }
        }
    }
}

/// Check every node and delay invariant. `Ok` iff none is violated.
pub fn validate_topology(t: &Topology) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = t.nodes.len();
    for (pos, node) in t.nodes.iter().enumerate() {
        if node.id != pos {
            out.push(Violation::NodeId {
                position: pos,
                id: node.id,
            });
        }
        if !(node.cores > 0.0) || !node.cores.is_finite() {
            out.push(Violation::NodeCores { node: pos });
        }
        if !(node.memory > 0.0) || !node.memory.is_finite() {
            out.push(Violation::NodeMemory { node: pos });
        }
    }
    if t.delays.len() != n {
        out.push(Violation::DelayShape {
            rows: t.delays.len(),
            nodes: n,
        });
        return Err(out);
    }
    for i in 0..n {
        for j in 0..n {
            let d = t.delays.get(i, j);
            if !d.is_finite() {
                out.push(Violation::NonFiniteDelay { i, j });
                continue;
            }
            if d < 0.0 {
                out.push(Violation::NegativeDelay { i, j });
            }
            if i == j && d != 0.0 {
                out.push(Violation::NonzeroDiagonal { node: i });
            }
            if i < j && d != t.delays.get(j, i) {
                out.push(Violation::Asymmetric { i, j });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A topology, the functions to place, and one workload snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub functions: Vec<FunctionSpec>,
    pub workload: WorkloadMatrix,
    pub criticality: Option<Vec<u32>>,
}

impl Scenario {
    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn function_count(&self) -> usize {
        self.functions.len()
    }

    /// Full validation: topology, functions, workload and criticality.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = validate_topology(&self.topology).err().unwrap_or_default();
        let n = self.node_count();
        for (pos, f) in self.functions.iter().enumerate() {
            if f.id != pos {
                out.push(Violation::FunctionId {
                    position: pos,
                    id: f.id,
                });
            }
            if !(f.memory_req > 0.0) || !f.memory_req.is_finite() {
                out.push(Violation::FunctionMemory { function: pos });
            }
            if !(f.instance_cores >= 0.0) || !f.instance_cores.is_finite() {
                out.push(Violation::InstanceCores { function: pos });
            }
            for j in 0..n {
                let k = f.cores_at(j);
                if !(k > 0.0) || !k.is_finite() {
                    out.push(Violation::FunctionCores {
                        function: pos,
                        node: j,
                    });
                }
            }
        }
        for fi in 0..self.workload.functions() {
            for i in 0..self.workload.nodes() {
                let w = self.workload.get(fi, i);
                if !w.is_finite() || w < 0.0 {
                    out.push(Violation::WorkloadEntry {
                        function: fi,
                        node: i,
                    });
                }
            }
        }
        if let Some(c) = &self.criticality {
            if c.len() != self.functions.len() {
                out.push(Violation::Criticality {
                    len: c.len(),
                    functions: self.functions.len(),
                });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn with_workload(&self, workload: WorkloadMatrix) -> Self {
        Self {
            workload,
            ..self.clone()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "scenario",
            message: e.to_string(),
        })?;
        let scenario = raw.into_scenario()?;
        scenario.validate().map_err(Error::Validation)?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario.to_json_string()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeFile {
    id: usize,
    cores: f64,
    memory_gb: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FunctionFile {
    id: usize,
    memory_gb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cores_per_request: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cores_per_request_by_node: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    instance_cores: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    nodes: Vec<NodeFile>,
    delays: Vec<Vec<f64>>,
    functions: Vec<FunctionFile>,
    workload: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    criticality: Option<Vec<u32>>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let n = self.nodes.len();
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| NodeSpec {
                id: n.id,
                cores: n.cores,
                memory: n.memory_gb,
            })
            .collect();
        let delays = DelayMatrix::from_rows(&self.delays)?;
        if delays.len() != n {
            return Err(Error::Dimension(format!(
                "delay matrix is {}x{} for {n} nodes",
                delays.len(),
                delays.len()
            )));
        }
        let mut functions = Vec::with_capacity(self.functions.len());
        for f in self.functions {
            let demand = match (f.cores_per_request, f.cores_per_request_by_node) {
                (Some(k), None) => CoreDemand::Uniform(k),
                (None, Some(v)) => {
                    if v.len() != n {
                        return Err(Error::Dimension(format!(
                            "function {} gives {} per-node core demands for {n} nodes",
                            f.id,
                            v.len()
                        )));
                    }
                    CoreDemand::PerNode(v)
                }
                (Some(_), Some(_)) => {
                    return Err(Error::Parse {
                        what: "scenario",
                        message: format!(
                            "function {} sets both cores_per_request and cores_per_request_by_node",
                            f.id
                        ),
                    })
                }
                (None, None) => {
                    return Err(Error::Parse {
                        what: "scenario",
                        message: format!("function {} has no core demand", f.id),
                    })
                }
            };
            functions.push(FunctionSpec {
                id: f.id,
                memory_req: f.memory_gb,
                cores_per_request: demand,
                instance_cores: f.instance_cores,
            });
        }
        if self.workload.len() != functions.len() {
            return Err(Error::Dimension(format!(
                "workload has {} rows for {} functions",
                self.workload.len(),
                functions.len()
            )));
        }
        let workload = WorkloadMatrix::from_rows(&self.workload, n)?;
        Ok(Scenario {
            topology: Topology { nodes, delays },
            functions,
            workload,
            criticality: self.criticality,
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            nodes: s
                .topology
                .nodes
                .iter()
                .map(|n| NodeFile {
                    id: n.id,
                    cores: n.cores,
                    memory_gb: n.memory,
                })
                .collect(),
            delays: s.topology.delays.rows(),
            functions: s
                .functions
                .iter()
                .map(|f| {
                    let (scalar, by_node) = match &f.cores_per_request {
                        CoreDemand::Uniform(k) => (Some(*k), None),
                        CoreDemand::PerNode(v) => (None, Some(v.clone())),
                    };
                    FunctionFile {
                        id: f.id,
                        memory_gb: f.memory_req,
                        cores_per_request: scalar,
                        cores_per_request_by_node: by_node,
                        instance_cores: f.instance_cores,
                    }
                })
                .collect(),
            workload: s.workload.rows(),
            criticality: s.criticality.clone(),
        }
    }
}
