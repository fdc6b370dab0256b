//! The deliverable: a station-annotated precedence graph over the scheduled
//! tasks, with typed dependency edges, acyclicity checking and DOT/JSON
//! export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::replay_check;
use crate::model::{BusType, DiagnosticClass, EcuId, Instance, ProcessType};
use crate::real::Real;
use crate::sched::Schedule;

pub const GRAPH_VERSION: &str = "pg-v1";

/// One scheduled task as a graph node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskNode {
    pub ecu: EcuId,
    pub process: ProcessType,
    pub bus: BusType,
    pub station: u32,
    /// Position within the (bus, station) serial sequence.
    pub seq: u32,
}

/// Station marker a bus-readiness edge hangs off; assembly events themselves
/// are not task nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub bus: BusType,
    /// Station of the last enabling assembly event.
    pub station: u32,
}

/// Reference to a task node or a readiness anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    Task(usize),
    Anchor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Chain of one ECU's processes.
    ProcessOrder,
    /// Master prerequisite before a dependent task.
    MasterDependency,
    /// Bus infrastructure complete before the bus's first task.
    BusReadiness,
    /// Serial flow inside one (bus, station) cell.
    StationFlow,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::ProcessOrder => "process_order",
            EdgeKind::MasterDependency => "master_dependency",
            EdgeKind::BusReadiness => "bus_readiness",
            EdgeKind::StationFlow => "station_flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeRef,
    pub to: NodeRef,
    pub kind: EdgeKind,
}

/// DAG of scheduled tasks with typed dependency edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedenceGraph {
    pub nodes: Vec<TaskNode>,
    pub anchors: Vec<Anchor>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schedule does not replay cleanly: {0} violation(s)")]
    InfeasibleSchedule(usize),
    #[error("constraint engine error: {0}")]
    Constraint(#[from] crate::constraints::ConstraintError),
}

/// Station where the bus's infrastructure becomes complete, i.e. the last
/// enabling assembly event: all terminators (CAN/FlexRay), the second cold
/// starter (FlexRay), the masters (LIN/MOST). None when the bus needs no
/// enabling or an enabler is never assembled.
fn readiness_station(instance: &Instance, bus: BusType) -> Option<u32> {
    let station_of = |pred: &dyn Fn(&crate::model::Ecu) -> bool| -> Option<u32> {
        let mut stations = Vec::new();
        for e in instance.topology.iter().filter(|e| e.bus == bus) {
            if pred(e) {
                stations.push(instance.assembly_station(&e.id)?);
            }
        }
        stations.iter().max().copied()
    };
    match bus {
        BusType::Can => station_of(&|e| e.is_terminator),
        BusType::FlexRay => {
            let terminators = station_of(&|e| e.is_terminator)?;
            let mut cold: Vec<u32> = instance
                .topology
                .iter()
                .filter(|e| e.bus == bus && e.is_cold_starter)
                .filter_map(|e| instance.assembly_station(&e.id))
                .collect();
            cold.sort_unstable();
            let second_cold = cold.get(1).copied()?;
            Some(terminators.max(second_cold))
        }
        BusType::Lin | BusType::Most => station_of(&|e| e.dc == DiagnosticClass::Dc4),
        BusType::Lvds => None,
    }
}

/// Materializes the scheduled tasks as a precedence graph: one node per
/// assigned task, process-order chains per ECU, master dependencies, a
/// bus-readiness edge from the enabling assembly's station marker to the
/// first task per bus, and serial station-flow edges inside each cell.
pub fn build_precedence_graph<R: Real>(
    instance: &Instance,
    schedule: &Schedule<R>,
) -> Result<PrecedenceGraph, GraphError> {
    let violations = replay_check(instance, &schedule.state)?;
    if !violations.is_empty() {
        return Err(GraphError::InfeasibleSchedule(violations.len()));
    }

    let mut nodes = Vec::new();
    let mut node_index: BTreeMap<(EcuId, ProcessType), usize> = BTreeMap::new();
    let mut keys: Vec<(BusType, u32)> = schedule.state.sequences().map(|(k, _)| *k).collect();
    keys.sort_by_key(|(b, s)| (*s, *b));
    for (bus, station) in &keys {
        for (seq, entry) in schedule.state.sequence(*bus, *station).iter().enumerate() {
            node_index.insert((entry.ecu.clone(), entry.process), nodes.len());
            nodes.push(TaskNode {
                ecu: entry.ecu.clone(),
                process: entry.process,
                bus: *bus,
                station: *station,
                seq: seq as u32,
            });
        }
    }

    let mut edges = Vec::new();

    // Process-order chains over each ECU's scheduled processes.
    let mut per_ecu: BTreeMap<&EcuId, Vec<usize>> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        per_ecu.entry(&node.ecu).or_default().push(i);
    }
    for chain in per_ecu.values_mut() {
        chain.sort_by_key(|&i| nodes[i].process);
        for pair in chain.windows(2) {
            edges.push(Edge {
                from: NodeRef::Task(pair[0]),
                to: NodeRef::Task(pair[1]),
                kind: EdgeKind::ProcessOrder,
            });
        }
    }

    // Master dependencies realized by the schedule.
    for (i, node) in nodes.iter().enumerate() {
        let Some(ecu) = instance.ecu(&node.ecu) else {
            continue;
        };
        if let Some(prereq) = crate::constraints::master_prerequisite(instance, ecu, node.process) {
            if let Some(&from) = node_index.get(&prereq) {
                edges.push(Edge {
                    from: NodeRef::Task(from),
                    to: NodeRef::Task(i),
                    kind: EdgeKind::MasterDependency,
                });
            }
        }
    }

    // Bus readiness: the enabling assembly's station marker feeds the first
    // task on the bus.
    let mut anchors = Vec::new();
    for bus in instance.buses() {
        let Some(ready_at) = readiness_station(instance, bus) else {
            continue;
        };
        let first_task = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.bus == bus)
            .min_by_key(|(_, n)| (n.station, n.seq))
            .map(|(i, _)| i);
        if let Some(to) = first_task {
            let anchor = anchors.len();
            anchors.push(Anchor {
                bus,
                station: ready_at,
            });
            edges.push(Edge {
                from: NodeRef::Anchor(anchor),
                to: NodeRef::Task(to),
                kind: EdgeKind::BusReadiness,
            });
        }
    }

    // Serial flow inside each cell.
    for (bus, station) in &keys {
        let cell = schedule.state.sequence(*bus, *station);
        for pair in cell.windows(2) {
            let from = node_index[&(pair[0].ecu.clone(), pair[0].process)];
            let to = node_index[&(pair[1].ecu.clone(), pair[1].process)];
            edges.push(Edge {
                from: NodeRef::Task(from),
                to: NodeRef::Task(to),
                kind: EdgeKind::StationFlow,
            });
        }
    }

    Ok(PrecedenceGraph {
        nodes,
        anchors,
        edges,
    })
}

/// Kahn's algorithm; `Err` carries one explicit cycle.
pub fn check_dag(graph: &PrecedenceGraph) -> Result<(), Vec<NodeRef>> {
    let mut ids: Vec<NodeRef> = (0..graph.nodes.len()).map(NodeRef::Task).collect();
    ids.extend((0..graph.anchors.len()).map(NodeRef::Anchor));

    let mut out: BTreeMap<NodeRef, Vec<NodeRef>> = BTreeMap::new();
    let mut indegree: BTreeMap<NodeRef, usize> = ids.iter().map(|id| (*id, 0)).collect();
    for edge in &graph.edges {
        out.entry(edge.from).or_default().push(edge.to);
        *indegree.entry(edge.to).or_insert(0) += 1;
    }

    let mut queue: Vec<NodeRef> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut seen = 0usize;
    while let Some(id) = queue.pop() {
        seen += 1;
        for next in out.get(&id).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("edge endpoints exist");
            *d -= 1;
            if *d == 0 {
                queue.push(*next);
            }
        }
    }
    if seen == indegree.len() {
        return Ok(());
    }

    // Walk the leftover subgraph until a node repeats, then cut the loop out.
    let remaining: Vec<NodeRef> = indegree
        .iter()
        .filter(|(_, d)| **d > 0)
        .map(|(id, _)| *id)
        .collect();
    let start = remaining[0];
    let mut path = vec![start];
    let mut current = start;
    loop {
        let next = out
            .get(&current)
            .into_iter()
            .flatten()
            .find(|n| remaining.contains(n))
            .copied()
            .expect("cyclic subgraph has successors");
        if let Some(pos) = path.iter().position(|n| *n == next) {
            path.drain(..pos);
            return Err(path);
        }
        path.push(next);
        current = next;
    }
}

/// Topological order that is stable with ascending station index, within a
/// station by bus then sequence position.
pub fn station_topological_order(graph: &PrecedenceGraph) -> Vec<NodeRef> {
    let mut order: Vec<NodeRef> = (0..graph.nodes.len()).map(NodeRef::Task).collect();
    order.extend((0..graph.anchors.len()).map(NodeRef::Anchor));
    let key = |id: &NodeRef| -> (u32, u8, BusType, u32) {
        match id {
            // Anchors precede the tasks of their station.
            NodeRef::Anchor(i) => {
                let a = &graph.anchors[*i];
                (a.station, 0, a.bus, 0)
            }
            NodeRef::Task(i) => {
                let n = &graph.nodes[*i];
                (n.station, 1, n.bus, n.seq)
            }
        }
    };
    order.sort_by_key(key);
    order
}

fn node_label(node: &TaskNode) -> String {
    format!("{}/{}@{}", node.ecu, node.process, node.station)
}

fn anchor_label(anchor: &Anchor) -> String {
    format!("{} ready@{}", anchor.bus, anchor.station)
}

/// Plain DOT rendering: one cluster per station, node labels
/// `ecu/process@station`, the edge kind as an attribute.
pub fn export_dot(graph: &PrecedenceGraph) -> String {
    let mut by_station: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for node in &graph.nodes {
        by_station
            .entry(node.station)
            .or_default()
            .push(format!("    \"{}\";\n", node_label(node)));
    }
    for anchor in &graph.anchors {
        by_station.entry(anchor.station).or_default().push(format!(
            "    \"{}\" [shape=point];\n",
            anchor_label(anchor)
        ));
    }

    let mut dot = String::from("digraph precedence {\n  rankdir=LR;\n");
    for (station, lines) in &by_station {
        let _ = write!(
            dot,
            "  subgraph cluster_station_{station} {{\n    label=\"station {station}\";\n"
        );
        for line in lines {
            dot.push_str(line);
        }
        dot.push_str("  }\n");
    }
    for edge in &graph.edges {
        let name = |id: &NodeRef| match id {
            NodeRef::Task(i) => node_label(&graph.nodes[*i]),
            NodeRef::Anchor(i) => anchor_label(&graph.anchors[*i]),
        };
        let _ = writeln!(
            dot,
            "  \"{}\" -> \"{}\" [kind={}];",
            name(&edge.from),
            name(&edge.to),
            edge.kind.name()
        );
    }
    dot.push_str("}\n");
    dot
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: String,
    #[serde(flatten)]
    graph: PrecedenceGraph,
}

/// Versioned JSON dump; `graph_from_json` is its inverse.
pub fn graph_to_json(graph: &PrecedenceGraph) -> String {
    serde_json::to_string_pretty(&GraphFile {
        version: GRAPH_VERSION.to_owned(),
        graph: graph.clone(),
    })
    .expect("graph serializes")
}

pub fn graph_from_json(json: &str) -> Result<PrecedenceGraph, String> {
    let file: GraphFile = serde_json::from_str(json).map_err(|e| format!("bad graph json: {e}"))?;
    if file.version != GRAPH_VERSION {
        return Err(format!(
            "unsupported graph version '{}', expected '{GRAPH_VERSION}'",
            file.version
        ));
    }
    Ok(file.graph)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

/// Export in either supported format.
pub fn export(graph: &PrecedenceGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => export_dot(graph),
        ExportFormat::Json => graph_to_json(graph),
    }
}
