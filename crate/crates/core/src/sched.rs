//! Station assignment: the greedy first-fit scheduler, a conservative
//! sequential baseline, a bounded exhaustive oracle for small instances, the
//! weighted objective and the utilization/parallelization metrics.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{check_constraints, Rule, ScheduleState};
use crate::model::{
    validate_instance, BusType, EcuId, Instance, ProcessType, StructuralViolation, Task,
};
use crate::real::Real;

pub const SCHEDULE_VERSION: &str = "sched-v1";

/// Weights of the objective plus an optional cycle-time override.
/// The defaults make the station count dominate lexicographically while the
/// duration term breaks ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams<R: Real = f64> {
    pub alpha: R,
    pub beta: R,
    pub ct_override: Option<u32>,
}

impl<R: Real> Default for SchedulerParams<R> {
    fn default() -> Self {
        SchedulerParams {
            alpha: R::from_f64_lit(1e6),
            beta: R::one(),
            ct_override: None,
        }
    }
}

/// Utilization and parallelization of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<R: Real = f64> {
    pub utilization: R,
    pub parallelization: R,
}

/// Solver output: the placement state plus the per-station and per-cell
/// usage flags and the objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<R: Real = f64> {
    pub state: ScheduleState,
    /// Usage flag per station, indexed by `station - 1`.
    pub z: Vec<bool>,
    /// Usage flag per nonempty (bus, station) cell.
    pub y: BTreeMap<(BusType, u32), bool>,
    pub f: R,
    pub alpha: R,
    pub beta: R,
    /// Effective cycle time the schedule was computed against.
    pub ct_s: u32,
}

impl<R: Real> Schedule<R> {
    pub fn station_count(&self) -> usize {
        self.z.iter().filter(|z| **z).count()
    }

    pub fn total_cd(&self) -> u64 {
        self.state
            .sequences()
            .map(|(_, entries)| entries.iter().map(|e| e.duration_s as u64).sum::<u64>())
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid instance: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidInstance(Vec<StructuralViolation>),
    #[error("invalid params: alpha + beta must be positive")]
    InvalidParams,
    #[error("no admissible station for {process} on '{ecu}'; blocking rules: {}", format_histogram(.histogram))]
    Infeasible {
        ecu: EcuId,
        process: ProcessType,
        histogram: BTreeMap<Rule, usize>,
    },
    #[error("dependency deadlock at {process} on '{ecu}'")]
    Deadlock { ecu: EcuId, process: ProcessType },
    #[error("instance too large for the exhaustive oracle: {0}")]
    TooLarge(String),
    #[error("empty schedule has no metrics")]
    EmptySchedule,
    #[error("constraint engine error: {0}")]
    Constraint(#[from] crate::constraints::ConstraintError),
}

fn format_histogram(h: &BTreeMap<Rule, usize>) -> String {
    h.iter()
        .map(|(rule, n)| format!("{rule}x{n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Deterministic base priority: process type ascending, then bus, then
/// assembly station, then diagnostic address, then id. Task indexes are
/// returned in that order.
fn base_order(instance: &Instance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.tasks.len()).collect();
    order.sort_by_key(|&i| {
        let t = &instance.tasks[i];
        let e = instance.ecu(&t.ecu_id);
        (
            t.process,
            e.map(|e| e.bus),
            instance.assembly_station(&t.ecu_id).unwrap_or(u32::MAX),
            e.map(|e| e.diagnostic_address).unwrap_or(u8::MAX),
            t.ecu_id.clone(),
        )
    });
    order
}

/// Static prerequisite task indexes per task: the ECU's own earlier
/// processes plus the master-side prerequisite.
fn prerequisites(instance: &Instance) -> Vec<Vec<usize>> {
    let index_of = |ecu: &EcuId, process: ProcessType| -> Option<usize> {
        instance
            .tasks
            .iter()
            .position(|t| &t.ecu_id == ecu && t.process == process)
    };
    instance
        .tasks
        .iter()
        .map(|task| {
            let mut deps = Vec::new();
            for other in instance.tasks_of(&task.ecu_id) {
                if other.process < task.process {
                    deps.push(index_of(&task.ecu_id, other.process).unwrap());
                }
            }
            if let Some(ecu) = instance.ecu(&task.ecu_id) {
                if let Some((master, process)) =
                    crate::constraints::master_prerequisite(instance, ecu, task.process)
                {
                    if let Some(i) = index_of(&master, process) {
                        deps.push(i);
                    }
                }
            }
            deps.sort_unstable();
            deps.dedup();
            deps
        })
        .collect()
}

/// Tasks in placement order: the base priority refined so that every
/// prerequisite precedes its dependents (master chains unlock their slaves).
fn placement_order(instance: &Instance) -> Result<Vec<usize>, ScheduleError> {
    let order = base_order(instance);
    let prereqs = prerequisites(instance);
    let n = order.len();
    let mut placed = vec![false; n];
    let mut result = Vec::with_capacity(n);
    while result.len() < n {
        let next = order
            .iter()
            .copied()
            .find(|&i| !placed[i] && prereqs[i].iter().all(|&j| placed[j]));
        match next {
            Some(i) => {
                placed[i] = true;
                result.push(i);
            }
            None => {
                let blocked = order.iter().copied().find(|&i| !placed[i]).unwrap();
                let t = &instance.tasks[blocked];
                return Err(ScheduleError::Deadlock {
                    ecu: t.ecu_id.clone(),
                    process: t.process,
                });
            }
        }
    }
    Ok(result)
}

/// Extra placement restrictions of the baseline plan.
#[derive(Clone, Copy, PartialEq)]
enum Restriction {
    None,
    /// A station hosts the tasks of a single bus; combined with the
    /// process-ascending placement order this yields one process type per
    /// station region and no cross-bus parallelism.
    OneBusPerStation,
}

fn station_single_bus(state: &ScheduleState, instance: &Instance, task: &Task, station: u32) -> bool {
    let bus = instance.ecu(&task.ecu_id).map(|e| e.bus);
    for (key, entries) in state.sequences() {
        if key.1 != station || entries.is_empty() {
            continue;
        }
        if Some(key.0) != bus {
            return false;
        }
    }
    true
}

fn effective_ct<R: Real>(instance: &Instance, params: &SchedulerParams<R>) -> u32 {
    params.ct_override.unwrap_or(instance.ct_s)
}

fn run_greedy<R: Real>(
    instance: &Instance,
    params: &SchedulerParams<R>,
    restriction: Restriction,
) -> Result<Schedule<R>, ScheduleError> {
    if params.alpha + params.beta <= R::zero() {
        return Err(ScheduleError::InvalidParams);
    }
    let report = validate_instance(instance);
    if !report.is_empty() {
        return Err(ScheduleError::InvalidInstance(report));
    }

    let ct = effective_ct(instance, params);
    let mut work = instance.clone();
    work.ct_s = ct;

    let order = placement_order(&work)?;
    let mut state = ScheduleState::new();
    let max_station = work.stations.iter().map(|s| s.index).max().unwrap_or(0);

    for i in order {
        let task = &work.tasks[i];
        let ecu = work.ecu(&task.ecu_id).expect("validated");
        let bus = ecu.bus;
        let first = work.assembly_station(&task.ecu_id).expect("validated");
        let mut histogram: BTreeMap<Rule, usize> = BTreeMap::new();
        let mut placed_at = None;
        for station in first..=max_station {
            if restriction == Restriction::OneBusPerStation
                && !station_single_bus(&state, &work, task, station)
            {
                continue;
            }
            let violations = check_constraints(task, station, &state, &work)?;
            if violations.is_empty() {
                placed_at = Some(station);
                break;
            }
            for v in violations {
                *histogram.entry(v.rule).or_insert(0) += 1;
            }
        }
        match placed_at {
            Some(station) => state.assign(&task.ecu_id, bus, task.process, task.duration_s, station),
            None => {
                return Err(ScheduleError::Infeasible {
                    ecu: task.ecu_id.clone(),
                    process: task.process,
                    histogram,
                })
            }
        }
    }

    Ok(finish_schedule(instance, state, params, ct))
}

fn finish_schedule<R: Real>(
    instance: &Instance,
    state: ScheduleState,
    params: &SchedulerParams<R>,
    ct: u32,
) -> Schedule<R> {
    let n_stations = instance.stations.len();
    let mut z = vec![false; n_stations];
    let mut y = BTreeMap::new();
    let mut cd_total = 0u64;
    for (key, entries) in state.sequences() {
        if entries.is_empty() {
            continue;
        }
        y.insert(*key, true);
        if key.1 >= 1 && (key.1 as usize) <= n_stations {
            z[(key.1 - 1) as usize] = true;
        }
        cd_total += entries.iter().map(|e| e.duration_s as u64).sum::<u64>();
    }
    let used = z.iter().filter(|b| **b).count() as u64;
    let f = params.alpha * R::from_count(used) + params.beta * R::from_count(cd_total);
    Schedule {
        state,
        z,
        y,
        f,
        alpha: params.alpha,
        beta: params.beta,
        ct_s: ct,
    }
}

/// Greedy first-fit pass: tasks in placement order, each scanned upward from
/// its assembly station to the first admissible station. The process chain
/// holds by construction afterwards.
pub fn schedule<R: Real>(
    instance: &Instance,
    params: &SchedulerParams<R>,
) -> Result<Schedule<R>, ScheduleError> {
    run_greedy(instance, params, Restriction::None)
}

/// Conservative sequential plan standing in for a manual layout: a station
/// hosts a single bus's tasks, so nothing runs in parallel, and the
/// process-ascending order groups stations into per-process regions.
pub fn baseline_sequential<R: Real>(instance: &Instance) -> Result<Schedule<R>, ScheduleError> {
    run_greedy(instance, &SchedulerParams::default(), Restriction::OneBusPerStation)
}

/// Recomputes the objective `alpha * used stations + beta * total CD`.
pub fn objective<R: Real>(schedule: &Schedule<R>, alpha: R, beta: R) -> R {
    alpha * R::from_count(schedule.station_count() as u64) + beta * R::from_count(schedule.total_cd())
}

/// Utilization: mean over used stations of the per-bus CD/CT load of the
/// cells in use (may exceed one when several buses near the cycle time).
/// Parallelization: mean over used stations of the fraction of the
/// instance's bus types active there.
pub fn compute_metrics<R: Real>(
    schedule: &Schedule<R>,
    instance: &Instance,
) -> Result<Metrics<R>, ScheduleError> {
    let used = schedule.station_count() as u64;
    if used == 0 {
        return Err(ScheduleError::EmptySchedule);
    }
    let ct = R::from_count(schedule.ct_s as u64);
    let buses = instance.buses().len() as u64;

    let mut u = R::zero();
    let mut p_cells = 0u64;
    for ((bus, station), flag) in &schedule.y {
        if !*flag {
            continue;
        }
        let cd = schedule.state.cd_at(*bus, *station) as u64;
        u = u + R::from_count(cd) / ct;
        p_cells += 1;
    }
    let used_r = R::from_count(used);
    Ok(Metrics {
        utilization: u / used_r,
        parallelization: R::from_count(p_cells) / (used_r * R::from_count(buses)),
    })
}

/// Hard caps of the exhaustive oracle.
pub const ORACLE_MAX_TASKS: usize = 12;
pub const ORACLE_MAX_STATIONS: usize = 10;

/// Exhaustive depth-first search over admissible assignments, minimizing the
/// objective with default weights. Tasks are explored in placement order and
/// stations ascending, so among equal-objective schedules the first complete
/// assignment vector in that exploration order wins.
pub fn oracle_optimal<R: Real>(instance: &Instance) -> Result<Schedule<R>, ScheduleError> {
    if instance.tasks.len() > ORACLE_MAX_TASKS {
        return Err(ScheduleError::TooLarge(format!(
            "{} tasks, cap {ORACLE_MAX_TASKS}",
            instance.tasks.len()
        )));
    }
    if instance.stations.len() > ORACLE_MAX_STATIONS {
        return Err(ScheduleError::TooLarge(format!(
            "{} stations, cap {ORACLE_MAX_STATIONS}",
            instance.stations.len()
        )));
    }
    let params = SchedulerParams::<R>::default();
    let report = validate_instance(instance);
    if !report.is_empty() {
        return Err(ScheduleError::InvalidInstance(report));
    }

    let order = placement_order(instance)?;
    let max_station = instance.stations.iter().map(|s| s.index).max().unwrap_or(0);
    // The duration term is fixed across complete schedules (every task adds
    // its duration to exactly one cell), so the bound below is exact in beta.
    let total_duration: u64 = instance.tasks.iter().map(|t| t.duration_s as u64).sum();
    let beta_term = params.beta * R::from_count(total_duration);

    struct Dfs<'a, R: Real> {
        instance: &'a Instance,
        order: &'a [usize],
        max_station: u32,
        alpha: R,
        beta_term: R,
        best_f: Option<R>,
        best_state: Option<ScheduleState>,
    }

    impl<R: Real> Dfs<'_, R> {
        fn run(&mut self, depth: usize, state: &mut ScheduleState, used: &mut BTreeMap<u32, u32>) {
            let bound = self.alpha * R::from_count(used.len() as u64) + self.beta_term;
            if let Some(best) = self.best_f {
                if bound >= best {
                    return;
                }
            }
            if depth == self.order.len() {
                self.best_f = Some(bound);
                self.best_state = Some(state.clone());
                return;
            }
            let task = &self.instance.tasks[self.order[depth]];
            let bus = self.instance.ecu(&task.ecu_id).expect("validated").bus;
            let first = self
                .instance
                .assembly_station(&task.ecu_id)
                .expect("validated");
            for station in first..=self.max_station {
                let admissible = check_constraints(task, station, state, self.instance)
                    .map(|v| v.is_empty())
                    .unwrap_or(false);
                if !admissible {
                    continue;
                }
                state.assign(&task.ecu_id, bus, task.process, task.duration_s, station);
                *used.entry(station).or_insert(0) += 1;
                self.run(depth + 1, state, used);
                if let Some(count) = used.get_mut(&station) {
                    *count -= 1;
                    if *count == 0 {
                        used.remove(&station);
                    }
                }
                state.unassign(&task.ecu_id, bus, task.process, task.duration_s, station);
            }
        }
    }

    let mut dfs = Dfs {
        instance,
        order: &order,
        max_station,
        alpha: params.alpha,
        beta_term,
        best_f: None,
        best_state: None,
    };
    let mut state = ScheduleState::new();
    let mut used = BTreeMap::new();
    dfs.run(0, &mut state, &mut used);

    match dfs.best_state {
        Some(state) => Ok(finish_schedule(instance, state, &params, instance.ct_s)),
        None => Err(ScheduleError::Infeasible {
            ecu: instance
                .tasks
                .first()
                .map(|t| t.ecu_id.clone())
                .unwrap_or_else(|| EcuId::from("")),
            process: instance
                .tasks
                .first()
                .map(|t| t.process)
                .unwrap_or(ProcessType::IdCheck),
            histogram: BTreeMap::new(),
        }),
    }
}

#[derive(Serialize, Deserialize)]
struct AssignmentV1<R> {
    ecu: String,
    process: String,
    bus: String,
    station: u32,
    start_offset_s: u32,
    duration_s: u32,
    #[serde(skip)]
    _marker: std::marker::PhantomData<R>,
}

#[derive(Serialize, Deserialize)]
struct StationV1 {
    index: u32,
    z: bool,
    cd: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct MetricsV1<R> {
    u: Option<R>,
    p: Option<R>,
    f: R,
    alpha: R,
    beta: R,
}

#[derive(Serialize, Deserialize)]
struct ScheduleV1<R> {
    version: String,
    derivative: String,
    ct_s: u32,
    assignments: Vec<AssignmentV1<R>>,
    stations: Vec<StationV1>,
    metrics: MetricsV1<R>,
}

/// Serializes a schedule as the versioned JSON document: assignments in
/// (station, bus, sequence) order with start offsets, per-station usage and
/// cumulative durations, and the metrics block.
pub fn schedule_to_json<R: Real + Serialize>(schedule: &Schedule<R>, instance: &Instance) -> String {
    let mut assignments = Vec::new();
    let mut keys: Vec<(BusType, u32)> = schedule.state.sequences().map(|(k, _)| *k).collect();
    keys.sort_by_key(|(b, s)| (*s, *b));
    for (bus, station) in keys {
        let mut offset = 0u32;
        for entry in schedule.state.sequence(bus, station) {
            assignments.push(AssignmentV1 {
                ecu: entry.ecu.to_string(),
                process: entry.process.name().to_owned(),
                bus: bus.name().to_owned(),
                station,
                start_offset_s: offset,
                duration_s: entry.duration_s,
                _marker: std::marker::PhantomData,
            });
            offset += entry.duration_s;
        }
    }

    let stations = instance
        .stations
        .iter()
        .map(|s| {
            let mut cd = BTreeMap::new();
            for bus in instance.buses() {
                let v = schedule.state.cd_at(bus, s.index);
                if v > 0 {
                    cd.insert(bus.name().to_owned(), v);
                }
            }
            StationV1 {
                index: s.index,
                z: schedule
                    .z
                    .get((s.index - 1) as usize)
                    .copied()
                    .unwrap_or(false),
                cd,
            }
        })
        .collect();

    let metrics = match compute_metrics(schedule, instance) {
        Ok(m) => MetricsV1 {
            u: Some(m.utilization),
            p: Some(m.parallelization),
            f: schedule.f,
            alpha: schedule.alpha,
            beta: schedule.beta,
        },
        Err(_) => MetricsV1 {
            u: None,
            p: None,
            f: schedule.f,
            alpha: schedule.alpha,
            beta: schedule.beta,
        },
    };

    serde_json::to_string_pretty(&ScheduleV1 {
        version: SCHEDULE_VERSION.to_owned(),
        derivative: instance.derivative.clone(),
        ct_s: schedule.ct_s,
        assignments,
        stations,
        metrics,
    })
    .expect("schedule serializes")
}

/// Rebuilds a schedule from its JSON document against the owning instance.
pub fn schedule_from_json<R: Real + DeserializeOwned>(
    json: &str,
    instance: &Instance,
) -> Result<Schedule<R>, String> {
    let doc: ScheduleV1<R> =
        serde_json::from_str(json).map_err(|e| format!("bad schedule json: {e}"))?;
    if doc.version != SCHEDULE_VERSION {
        return Err(format!(
            "unsupported schedule version '{}', expected '{SCHEDULE_VERSION}'",
            doc.version
        ));
    }
    let mut rows = doc.assignments;
    rows.sort_by(|a, b| {
        (a.station, &a.bus, a.start_offset_s).cmp(&(b.station, &b.bus, b.start_offset_s))
    });
    let mut state = ScheduleState::new();
    for row in &rows {
        let bus: BusType = row.bus.parse()?;
        let process: ProcessType = row.process.parse()?;
        state.assign(
            &EcuId::from(row.ecu.as_str()),
            bus,
            process,
            row.duration_s,
            row.station,
        );
    }
    let params = SchedulerParams {
        alpha: doc.metrics.alpha,
        beta: doc.metrics.beta,
        ct_override: Some(doc.ct_s),
    };
    Ok(finish_schedule(instance, state, &params, doc.ct_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::replay_check;
    use crate::model::{
        DiagnosticClass, Ecu, SignalCap, Station, StationPower, Terminal,
    };
    use std::collections::BTreeMap;

    fn ecu(id: &str, bus: BusType, dc: DiagnosticClass) -> Ecu {
        Ecu {
            id: EcuId::from(id),
            name: id.to_owned(),
            bus,
            diagnostic_address: 0x10,
            dc,
            terminal: Terminal::T15,
            master_id: None,
            is_cold_starter: false,
            is_terminator: false,
            hv_required: false,
        }
    }

    fn full_station(i: u32) -> Station {
        Station::new(i, StationPower::External)
            .with_hv()
            .with_signals([SignalCap::V, SignalCap::P, SignalCap::Vpe])
    }

    /// Gateway on CAN assembled at station 12, terminators in place early.
    fn gateway_instance() -> Instance {
        let mut gw = ecu("gateway", BusType::Can, DiagnosticClass::Dc4);
        gw.is_terminator = true;
        let mut other = ecu("body", BusType::Can, DiagnosticClass::Dc3);
        other.is_terminator = true;
        let stations = (1..=14).map(full_station).collect();
        let mut assembly = BTreeMap::new();
        assembly.insert(EcuId::from("gateway"), 12);
        assembly.insert(EcuId::from("body"), 1);
        Instance {
            topology: vec![gw, other],
            stations,
            assembly,
            tasks: vec![Task::new("gateway", ProcessType::IdCheck, 20)],
            derivative: "gw".into(),
            ct_s: 88,
        }
    }

    fn two_bus_instance() -> Instance {
        let mut gw = ecu("gateway", BusType::Can, DiagnosticClass::Dc4);
        gw.is_terminator = true;
        let mut body = ecu("body", BusType::Can, DiagnosticClass::Dc3);
        body.is_terminator = true;
        let lin_master = ecu("cabin", BusType::Lin, DiagnosticClass::Dc4);
        let stations = (1..=8).map(full_station).collect();
        let mut assembly = BTreeMap::new();
        assembly.insert(EcuId::from("gateway"), 1);
        assembly.insert(EcuId::from("body"), 2);
        assembly.insert(EcuId::from("cabin"), 2);
        Instance {
            topology: vec![gw, body, lin_master],
            stations,
            assembly,
            tasks: vec![
                Task::new("gateway", ProcessType::IdCheck, 20),
                Task::new("cabin", ProcessType::IdCheck, 15),
            ],
            derivative: "two-bus".into(),
            ct_s: 88,
        }
    }

    #[test]
    fn empty_task_list_gives_zero_objective() {
        let mut instance = gateway_instance();
        instance.tasks.clear();
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        assert_eq!(s.station_count(), 0);
        assert_eq!(s.f, 0.0);
        assert!(matches!(
            compute_metrics(&s, &instance),
            Err(ScheduleError::EmptySchedule)
        ));
    }

    #[test]
    fn single_task_lands_on_its_assembly_station() {
        let instance = gateway_instance();
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        assert_eq!(
            s.state.station_of(&EcuId::from("gateway"), ProcessType::IdCheck),
            Some(12)
        );
        assert_eq!(s.state.cd_at(BusType::Can, 12), 20);
        assert_eq!(s.station_count(), 1);
        assert!(replay_check(&instance, &s.state).unwrap().is_empty());
    }

    #[test]
    fn missing_signal_everywhere_is_infeasible() {
        let mut instance = gateway_instance();
        instance.tasks[0].needs_vpe = true;
        for s in &mut instance.stations {
            s.signal_caps.remove(&SignalCap::Vpe);
        }
        let err = schedule::<f64>(&instance, &SchedulerParams::default()).unwrap_err();
        match err {
            ScheduleError::Infeasible { histogram, .. } => {
                assert!(histogram.contains_key(&Rule::Signals));
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn objective_examples() {
        let instance = gateway_instance();
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        // 1 station used, CD total 20, alpha 1e6, beta 1.
        assert_eq!(s.f, 1_000_020.0);
        assert_eq!(objective(&s, 1e6, 1.0), 1_000_020.0);
        // Doubling beta doubles the CD term only.
        assert_eq!(objective(&s, 1e6, 2.0), 1_000_040.0);
        assert_eq!(objective(&s, 0.0, 1.0), 20.0);
    }

    #[test]
    fn objective_matches_stored_f() {
        let instance = two_bus_instance();
        let params = SchedulerParams::default();
        let s: Schedule = schedule(&instance, &params).unwrap();
        assert_eq!(objective(&s, s.alpha, s.beta), s.f);
    }

    #[test]
    fn metrics_mini_example() {
        // One used station, buses {CAN, LIN}, CD_CAN = 44, CT = 88, LIN idle:
        // U = 0.5 and P = 0.5.
        let mut instance = two_bus_instance();
        instance.tasks = vec![Task::new("gateway", ProcessType::IdCheck, 44)];
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        assert_eq!(s.station_count(), 1);
        let m = compute_metrics(&s, &instance).unwrap();
        assert!((m.utilization - 0.5).abs() < 1e-12);
        assert!((m.parallelization - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_buses_share_a_station() {
        let instance = two_bus_instance();
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        // CAN waits for its second terminator at station 2; LIN master is
        // assembled at 2 as well, so both ID checks run at station 2.
        assert_eq!(s.station_count(), 1);
        assert_eq!(
            s.state.station_of(&EcuId::from("gateway"), ProcessType::IdCheck),
            Some(2)
        );
        assert_eq!(
            s.state.station_of(&EcuId::from("cabin"), ProcessType::IdCheck),
            Some(2)
        );
        let m = compute_metrics(&s, &instance).unwrap();
        assert!((m.parallelization - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_is_deterministic() {
        let instance = two_bus_instance();
        let a: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        let b: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            schedule_to_json(&a, &instance),
            schedule_to_json(&b, &instance)
        );
    }

    #[test]
    fn baseline_single_task_equals_greedy() {
        let instance = gateway_instance();
        let g: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        let b: Schedule = baseline_sequential(&instance).unwrap();
        assert_eq!(g.state, b.state);
    }

    #[test]
    fn baseline_never_mixes_buses_per_station() {
        let instance = two_bus_instance();
        let b: Schedule = baseline_sequential(&instance).unwrap();
        for station in b.state.used_stations() {
            let mut buses = Vec::new();
            for bus in BusType::ALL {
                if !b.state.sequence(bus, station).is_empty() {
                    buses.push(bus);
                }
            }
            assert_eq!(buses.len(), 1);
        }
        let g: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        assert!(g.station_count() <= b.station_count());
    }

    #[test]
    fn oracle_single_task_matches_greedy() {
        let mut instance = gateway_instance();
        instance.stations = (1..=10).map(full_station).collect();
        instance.assembly.insert(EcuId::from("gateway"), 8);
        let g: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        let o: Schedule = oracle_optimal(&instance).unwrap();
        assert_eq!(
            o.state.station_of(&EcuId::from("gateway"), ProcessType::IdCheck),
            g.state.station_of(&EcuId::from("gateway"), ProcessType::IdCheck)
        );
        assert_eq!(o.f, g.f);
    }

    #[test]
    fn oracle_prefers_one_station_for_independent_buses() {
        let instance = two_bus_instance();
        let o: Schedule = oracle_optimal(&instance).unwrap();
        assert_eq!(o.station_count(), 1);
    }

    #[test]
    fn oracle_caps_are_enforced() {
        let mut instance = two_bus_instance();
        instance.stations = (1..=11).map(full_station).collect();
        assert!(matches!(
            oracle_optimal::<f64>(&instance),
            Err(ScheduleError::TooLarge(_))
        ));
    }

    #[test]
    fn schedule_json_round_trips() {
        let instance = two_bus_instance();
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        let json = schedule_to_json(&s, &instance);
        assert!(json.contains("sched-v1"));
        let back: Schedule = schedule_from_json(&json, &instance).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let mut instance = gateway_instance();
        instance.assembly.remove(&EcuId::from("gateway"));
        assert!(matches!(
            schedule::<f64>(&instance, &SchedulerParams::default()),
            Err(ScheduleError::InvalidInstance(_))
        ));
    }

    #[test]
    fn slave_chain_schedules_despite_up_chain_dependency() {
        // A DC1 slave's ID check waits for its master's configuration; the
        // placement order must front-load the master's chain.
        let mut gw = ecu("gateway", BusType::Can, DiagnosticClass::Dc4);
        gw.is_terminator = true;
        let mut body = ecu("body", BusType::Can, DiagnosticClass::Dc3);
        body.is_terminator = true;
        let mut slave = ecu("door", BusType::Can, DiagnosticClass::Dc1);
        slave.master_id = Some(EcuId::from("gateway"));
        let stations = (1..=8).map(full_station).collect();
        let mut assembly = BTreeMap::new();
        assembly.insert(EcuId::from("gateway"), 1);
        assembly.insert(EcuId::from("body"), 1);
        assembly.insert(EcuId::from("door"), 2);
        let instance = Instance {
            topology: vec![gw, body, slave],
            stations,
            assembly,
            tasks: vec![
                Task::new("door", ProcessType::IdCheck, 10),
                Task::new("gateway", ProcessType::IdCheck, 10),
                Task::new("gateway", ProcessType::Configuration, 15),
            ],
            derivative: "chain".into(),
            ct_s: 88,
        };
        let s: Schedule = schedule(&instance, &SchedulerParams::default()).unwrap();
        let master_conf = s
            .state
            .station_of(&EcuId::from("gateway"), ProcessType::Configuration)
            .unwrap();
        let slave_id = s
            .state
            .station_of(&EcuId::from("door"), ProcessType::IdCheck)
            .unwrap();
        assert!(master_conf <= slave_id);
        assert!(replay_check(&instance, &s.state).unwrap().is_empty());
    }
}
