//! Domain types shared by every other module, plus structural validation of
//! topologies and instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Vehicle bus technology an ECU is attached to.
///
/// The enum order is the canonical iteration order used for deterministic
/// scheduling and reporting.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Can,
    FlexRay,
    Lin,
    Most,
    Lvds,
}

impl BusType {
    pub const ALL: [BusType; 5] = [
        BusType::Can,
        BusType::FlexRay,
        BusType::Lin,
        BusType::Most,
        BusType::Lvds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BusType::Can => "can",
            BusType::FlexRay => "flexray",
            BusType::Lin => "lin",
            BusType::Most => "most",
            BusType::Lvds => "lvds",
        }
    }
}

impl fmt::Display for BusType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BusType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "can" => Ok(BusType::Can),
            "flexray" => Ok(BusType::FlexRay),
            "lin" => Ok(BusType::Lin),
            "most" => Ok(BusType::Most),
            "lvds" => Ok(BusType::Lvds),
            other => Err(format!("unknown bus type '{other}'")),
        }
    }
}

/// Diagnostic class of an ECU, ordered DC0 < DC1 < DC2 < DC3 < DC4.
///
/// DC0: not diagnostic capable. DC1: diagnostic capable slave. DC2:
/// diagnostic and flashable slave. DC3: standalone diagnostic and flashable.
/// DC4: standalone with diagnostic capable slaves (master).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum DiagnosticClass {
    #[serde(rename = "0")]
    Dc0,
    #[serde(rename = "1")]
    Dc1,
    #[serde(rename = "2")]
    Dc2,
    #[serde(rename = "3")]
    Dc3,
    #[serde(rename = "4")]
    Dc4,
}

impl DiagnosticClass {
    pub fn level(self) -> u8 {
        match self {
            DiagnosticClass::Dc0 => 0,
            DiagnosticClass::Dc1 => 1,
            DiagnosticClass::Dc2 => 2,
            DiagnosticClass::Dc3 => 3,
            DiagnosticClass::Dc4 => 4,
        }
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            0 => Some(DiagnosticClass::Dc0),
            1 => Some(DiagnosticClass::Dc1),
            2 => Some(DiagnosticClass::Dc2),
            3 => Some(DiagnosticClass::Dc3),
            4 => Some(DiagnosticClass::Dc4),
            _ => None,
        }
    }

    /// Slaves (DC0..DC2) hang below a DC4 master on the same bus.
    pub fn is_slave(self) -> bool {
        self.level() < 3
    }
}

impl fmt::Display for DiagnosticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DC{}", self.level())
    }
}

/// Supply terminal per DIN 72552: terminal 15 is ignition-switched,
/// terminal 30 is permanent battery supply.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Terminal {
    #[serde(rename = "15")]
    T15,
    #[serde(rename = "30")]
    T30,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::T15 => f.write_str("15"),
            Terminal::T30 => f.write_str("30"),
        }
    }
}

impl FromStr for Terminal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "15" | "t15" => Ok(Terminal::T15),
            "30" | "t30" => Ok(Terminal::T30),
            other => Err(format!("unknown terminal '{other}'")),
        }
    }
}

/// Unique identifier of an ECU within one instance.
///
/// Derived from the cleaned ECU name; an ECU present on several buses is
/// modeled as distinct entries sharing the name, disambiguated by bus.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EcuId(String);

impl EcuId {
    pub fn new(id: impl Into<String>) -> Self {
        EcuId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EcuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EcuId {
    fn from(s: &str) -> Self {
        EcuId(s.to_owned())
    }
}

/// One electronic control unit of the vehicle topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ecu {
    pub id: EcuId,
    /// Cleaned lowercase name as it appears in planning text.
    pub name: String,
    pub bus: BusType,
    /// Diagnostic address on the vehicle network, one byte.
    pub diagnostic_address: u8,
    pub dc: DiagnosticClass,
    pub terminal: Terminal,
    /// Master this ECU hangs below; set exactly for DC0..DC2 slaves.
    pub master_id: Option<EcuId>,
    /// FlexRay node that transmits startup frames.
    pub is_cold_starter: bool,
    /// Carries the end-of-line resistor on CAN or FlexRay.
    pub is_terminator: bool,
    /// Needs a high-voltage connection for its DVC processes.
    pub hv_required: bool,
}

/// Power capability of a production station.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum StationPower {
    /// No vehicle power at all; no DVC task can run here.
    None,
    /// Ignition only, enough for terminal 15 ECUs.
    Ignition,
    /// External power supply, enough for terminal 30 ECUs.
    External,
}

impl fmt::Display for StationPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StationPower::None => f.write_str("none"),
            StationPower::Ignition => f.write_str("ignition"),
            StationPower::External => f.write_str("external"),
        }
    }
}

impl FromStr for StationPower {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(StationPower::None),
            "ignition" => Ok(StationPower::Ignition),
            "external" => Ok(StationPower::External),
            other => Err(format!("unknown station power '{other}'")),
        }
    }
}

/// Test signal a commissioning step may require from the station.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum SignalCap {
    /// Vehicle speed signal.
    V,
    /// Transmission parking signal.
    P,
    /// Vehicle protective environment signal.
    Vpe,
}

impl fmt::Display for SignalCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalCap::V => f.write_str("v"),
            SignalCap::P => f.write_str("p"),
            SignalCap::Vpe => f.write_str("vpe"),
        }
    }
}

impl FromStr for SignalCap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" => Ok(SignalCap::V),
            "p" => Ok(SignalCap::P),
            "vpe" => Ok(SignalCap::Vpe),
            other => Err(format!("unknown signal '{other}'")),
        }
    }
}

/// One production station along the line, 1-based and strictly increasing
/// downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Station {
    pub index: u32,
    pub power: StationPower,
    pub hv_capable: bool,
    pub signal_caps: BTreeSet<SignalCap>,
}

impl Station {
    pub fn new(index: u32, power: StationPower) -> Self {
        Station {
            index,
            power,
            hv_capable: false,
            signal_caps: BTreeSet::new(),
        }
    }

    pub fn with_hv(mut self) -> Self {
        self.hv_capable = true;
        self
    }

    pub fn with_signals(mut self, signals: impl IntoIterator<Item = SignalCap>) -> Self {
        self.signal_caps.extend(signals);
        self
    }
}

/// DVC process type; the total order is the per-ECU process chain.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ProcessType {
    IdCheck,
    Flash,
    Configuration,
    CalCom,
}

impl ProcessType {
    pub const ALL: [ProcessType; 4] = [
        ProcessType::IdCheck,
        ProcessType::Flash,
        ProcessType::Configuration,
        ProcessType::CalCom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcessType::IdCheck => "id_check",
            ProcessType::Flash => "flash",
            ProcessType::Configuration => "configuration",
            ProcessType::CalCom => "cal_com",
        }
    }
}

impl fmt::Display for ProcessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "id_check" | "idcheck" | "id check" => Ok(ProcessType::IdCheck),
            "flash" => Ok(ProcessType::Flash),
            "configuration" | "conf" => Ok(ProcessType::Configuration),
            "cal_com" | "calcom" | "cal com" => Ok(ProcessType::CalCom),
            other => Err(format!("unknown process '{other}'")),
        }
    }
}

/// One schedulable DVC process on one ECU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub ecu_id: EcuId,
    pub process: ProcessType,
    pub duration_s: u32,
    pub needs_v: bool,
    pub needs_p: bool,
    pub needs_vpe: bool,
    pub needs_hv: bool,
    /// Number of calibration/commissioning sub-operations folded into
    /// `duration_s`; reporting metadata, > 1 only for CalCom.
    pub sub_op_count: u32,
}

impl Task {
    pub fn new(ecu_id: impl Into<EcuId>, process: ProcessType, duration_s: u32) -> Self {
        Task {
            ecu_id: ecu_id.into(),
            process,
            duration_s,
            needs_v: false,
            needs_p: false,
            needs_vpe: false,
            needs_hv: false,
            sub_op_count: 1,
        }
    }
}

impl From<String> for EcuId {
    fn from(s: String) -> Self {
        EcuId(s)
    }
}

/// A schedulable problem: topology, station line, assembly plan and task list
/// for one vehicle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub topology: Vec<Ecu>,
    pub stations: Vec<Station>,
    /// Assembly station per ECU.
    pub assembly: BTreeMap<EcuId, u32>,
    pub tasks: Vec<Task>,
    /// Vehicle derivative label, e.g. a product key from the order.
    pub derivative: String,
    /// Cycle time limit per station in seconds.
    pub ct_s: u32,
}

impl Instance {
    pub fn ecu(&self, id: &EcuId) -> Option<&Ecu> {
        self.topology.iter().find(|e| &e.id == id)
    }

    pub fn station(&self, index: u32) -> Option<&Station> {
        self.stations.iter().find(|s| s.index == index)
    }

    /// Bus types present in the topology, in canonical order.
    pub fn buses(&self) -> Vec<BusType> {
        let present: BTreeSet<BusType> = self.topology.iter().map(|e| e.bus).collect();
        present.into_iter().collect()
    }

    pub fn assembly_station(&self, id: &EcuId) -> Option<u32> {
        self.assembly.get(id).copied()
    }

    /// The task of `ecu` for `process`, if any.
    pub fn task_for(&self, ecu: &EcuId, process: ProcessType) -> Option<&Task> {
        self.tasks
            .iter()
            .find(|t| &t.ecu_id == ecu && t.process == process)
    }

    pub fn tasks_of<'a>(&'a self, ecu: &'a EcuId) -> impl Iterator<Item = &'a Task> + 'a {
        self.tasks.iter().filter(move |t| &t.ecu_id == ecu)
    }
}

/// Structural rule violated by a topology or instance; the names are stable
/// identifiers used in reports and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructuralRule {
    ColdStarterNotFlexRay,
    DuplicateEcuId,
    DuplicateTask,
    FlexRayColdStarterCount,
    LinMasterCount,
    MasterBusMismatch,
    MasterMissing,
    MasterNotDC4,
    SlaveWithoutMaster,
    StandaloneWithMaster,
    StationIndexInvalid,
    SubOpCountInvalid,
    TaskEcuNotAssembled,
    TerminatorBusInvalid,
    TerminatorCount,
    UnknownAssemblyStation,
    UnknownTaskEcu,
}

impl StructuralRule {
    pub fn name(self) -> &'static str {
        match self {
            StructuralRule::ColdStarterNotFlexRay => "ColdStarterNotFlexRay",
            StructuralRule::DuplicateEcuId => "DuplicateEcuId",
            StructuralRule::DuplicateTask => "DuplicateTask",
            StructuralRule::FlexRayColdStarterCount => "FlexRayColdStarterCount",
            StructuralRule::LinMasterCount => "LinMasterCount",
            StructuralRule::MasterBusMismatch => "MasterBusMismatch",
            StructuralRule::MasterMissing => "MasterMissing",
            StructuralRule::MasterNotDC4 => "MasterNotDC4",
            StructuralRule::SlaveWithoutMaster => "SlaveWithoutMaster",
            StructuralRule::StandaloneWithMaster => "StandaloneWithMaster",
            StructuralRule::StationIndexInvalid => "StationIndexInvalid",
            StructuralRule::SubOpCountInvalid => "SubOpCountInvalid",
            StructuralRule::TaskEcuNotAssembled => "TaskEcuNotAssembled",
            StructuralRule::TerminatorBusInvalid => "TerminatorBusInvalid",
            StructuralRule::TerminatorCount => "TerminatorCount",
            StructuralRule::UnknownAssemblyStation => "UnknownAssemblyStation",
            StructuralRule::UnknownTaskEcu => "UnknownTaskEcu",
        }
    }
}

impl fmt::Display for StructuralRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One structural violation; violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralViolation {
    pub rule: StructuralRule,
    pub ecu: Option<EcuId>,
    pub station: Option<u32>,
    pub detail: String,
}

impl StructuralViolation {
    fn new(rule: StructuralRule, ecu: Option<EcuId>, detail: impl Into<String>) -> Self {
        StructuralViolation {
            rule,
            ecu,
            station: None,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for StructuralViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.ecu {
            Some(ecu) => write!(f, "{} [{}]: {}", self.rule, ecu, self.detail),
            None => write!(f, "{}: {}", self.rule, self.detail),
        }
    }
}

fn sort_report(mut report: Vec<StructuralViolation>) -> Vec<StructuralViolation> {
    report.sort_by(|a, b| {
        let ka = (a.ecu.as_ref().map(|e| e.as_str()).unwrap_or(""), a.rule.name());
        let kb = (b.ecu.as_ref().map(|e| e.as_str()).unwrap_or(""), b.rule.name());
        ka.cmp(&kb)
    });
    report
}

/// Checks every per-ECU invariant plus the per-bus infrastructure rules:
/// CAN/FlexRay need at least two terminators, FlexRay at least two cold
/// starters, LIN exactly one DC4 master. Pure and deterministic; the report
/// is sorted by ECU id, then rule name.
pub fn validate_topology(topology: &[Ecu], stations: &[Station]) -> Vec<StructuralViolation> {
    let mut report = Vec::new();

    // Station indexes must be unique and contiguous from 1.
    let mut indexes: Vec<u32> = stations.iter().map(|s| s.index).collect();
    indexes.sort_unstable();
    for (i, idx) in indexes.iter().enumerate() {
        if *idx != (i + 1) as u32 {
            report.push(StructuralViolation {
                rule: StructuralRule::StationIndexInvalid,
                ecu: None,
                station: Some(*idx),
                detail: format!("expected station index {} at position {}", i + 1, idx),
            });
            break;
        }
    }

    let mut seen_ids: BTreeSet<&EcuId> = BTreeSet::new();
    for ecu in topology {
        if !seen_ids.insert(&ecu.id) {
            report.push(StructuralViolation::new(
                StructuralRule::DuplicateEcuId,
                Some(ecu.id.clone()),
                "ECU id appears more than once",
            ));
        }
    }

    for ecu in topology {
        match &ecu.master_id {
            Some(master_id) => {
                if !ecu.dc.is_slave() {
                    report.push(StructuralViolation::new(
                        StructuralRule::StandaloneWithMaster,
                        Some(ecu.id.clone()),
                        format!("{} ECU must not reference a master", ecu.dc),
                    ));
                }
                match topology.iter().find(|e| &e.id == master_id) {
                    None => report.push(StructuralViolation::new(
                        StructuralRule::MasterMissing,
                        Some(ecu.id.clone()),
                        format!("master '{master_id}' not present in topology"),
                    )),
                    Some(master) => {
                        if master.dc != DiagnosticClass::Dc4 {
                            report.push(StructuralViolation::new(
                                StructuralRule::MasterNotDC4,
                                Some(ecu.id.clone()),
                                format!("master '{}' has {}", master.id, master.dc),
                            ));
                        }
                        if master.bus != ecu.bus {
                            report.push(StructuralViolation::new(
                                StructuralRule::MasterBusMismatch,
                                Some(ecu.id.clone()),
                                format!(
                                    "master '{}' sits on {} but slave on {}",
                                    master.id, master.bus, ecu.bus
                                ),
                            ));
                        }
                    }
                }
            }
            None => {
                if ecu.dc.is_slave() {
                    report.push(StructuralViolation::new(
                        StructuralRule::SlaveWithoutMaster,
                        Some(ecu.id.clone()),
                        format!("{} ECU needs a master", ecu.dc),
                    ));
                }
            }
        }

        if ecu.is_cold_starter && ecu.bus != BusType::FlexRay {
            report.push(StructuralViolation::new(
                StructuralRule::ColdStarterNotFlexRay,
                Some(ecu.id.clone()),
                format!("cold starter on {}", ecu.bus),
            ));
        }
        if ecu.is_terminator && !matches!(ecu.bus, BusType::Can | BusType::FlexRay) {
            report.push(StructuralViolation::new(
                StructuralRule::TerminatorBusInvalid,
                Some(ecu.id.clone()),
                format!("terminator on {}", ecu.bus),
            ));
        }
    }

    // Per-bus infrastructure rules, evaluated only for buses present.
    for bus in BusType::ALL {
        let members: Vec<&Ecu> = topology.iter().filter(|e| e.bus == bus).collect();
        if members.is_empty() {
            continue;
        }
        if matches!(bus, BusType::Can | BusType::FlexRay) {
            let terminators = members.iter().filter(|e| e.is_terminator).count();
            if terminators < 2 {
                report.push(StructuralViolation::new(
                    StructuralRule::TerminatorCount,
                    None,
                    format!("{bus} has {terminators} terminator(s), needs 2"),
                ));
            }
        }
        if bus == BusType::FlexRay {
            let cold = members.iter().filter(|e| e.is_cold_starter).count();
            if cold < 2 {
                report.push(StructuralViolation::new(
                    StructuralRule::FlexRayColdStarterCount,
                    None,
                    format!("flexray has {cold} cold starter(s), needs 2"),
                ));
            }
        }
        if bus == BusType::Lin {
            let masters = members
                .iter()
                .filter(|e| e.dc == DiagnosticClass::Dc4)
                .count();
            if masters != 1 {
                report.push(StructuralViolation::new(
                    StructuralRule::LinMasterCount,
                    None,
                    format!("lin has {masters} DC4 master(s), needs exactly 1"),
                ));
            }
        }
    }

    sort_report(report)
}

/// Full structural validation of an instance: topology rules plus task and
/// assembly coherence. An empty report means every downstream module can
/// rely on lookups succeeding.
pub fn validate_instance(instance: &Instance) -> Vec<StructuralViolation> {
    let mut report = validate_topology(&instance.topology, &instance.stations);

    for (ecu_id, station) in &instance.assembly {
        if instance.station(*station).is_none() {
            report.push(StructuralViolation {
                rule: StructuralRule::UnknownAssemblyStation,
                ecu: Some(ecu_id.clone()),
                station: Some(*station),
                detail: format!("assembly station {station} not on the line"),
            });
        }
    }

    let mut seen: BTreeSet<(&EcuId, ProcessType)> = BTreeSet::new();
    for task in &instance.tasks {
        if instance.ecu(&task.ecu_id).is_none() {
            report.push(StructuralViolation::new(
                StructuralRule::UnknownTaskEcu,
                Some(task.ecu_id.clone()),
                format!("{} task references unknown ECU", task.process),
            ));
        } else if instance.assembly_station(&task.ecu_id).is_none() {
            report.push(StructuralViolation::new(
                StructuralRule::TaskEcuNotAssembled,
                Some(task.ecu_id.clone()),
                format!("{} task on ECU without assembly station", task.process),
            ));
        }
        if !seen.insert((&task.ecu_id, task.process)) {
            report.push(StructuralViolation::new(
                StructuralRule::DuplicateTask,
                Some(task.ecu_id.clone()),
                format!("duplicate {} task", task.process),
            ));
        }
        if task.sub_op_count > 1 && task.process != ProcessType::CalCom {
            report.push(StructuralViolation::new(
                StructuralRule::SubOpCountInvalid,
                Some(task.ecu_id.clone()),
                format!("sub_op_count {} on {}", task.sub_op_count, task.process),
            ));
        }
    }

    sort_report(report)
}
