//! Seeded synthetic instances and labeled corpora at realistic scale, so the
//! whole pipeline runs and is benchmarked without proprietary planning data.
//!
//! All randomness comes from a self-contained SplitMix64 stream, never the
//! platform generator, so identical seeds produce identical bytes on every
//! platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extract::{Label, LabeledCorpus, LabeledRow};
use crate::ingest::{AssemblyRow, TaskRow, VehicleOrder};
use crate::model::{
    validate_topology, BusType, DiagnosticClass, Ecu, EcuId, Instance, ProcessType, SignalCap,
    Station, StationPower, Task, Terminal,
};
use crate::sched::{baseline_sequential, schedule, SchedulerParams};

/// SplitMix64: `x += 0x9e3779b97f4a7c15`, then two xor-multiply mixing
/// rounds. Small, fully specified and good enough for benchmark synthesis.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `[0, n)` via the multiply-shift reduction.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform value in `[lo, hi]`.
    pub fn range_u32(&mut self, lo: u32, hi: u32) -> u32 {
        lo + self.below((hi - lo + 1) as u64) as u32
    }

    /// True with probability `num / den`.
    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below((i + 1) as u64) as usize;
            items.swap(i, j);
        }
    }
}

/// Task-count and line-shape profile of a synthetic instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub n_id: usize,
    pub n_flash: usize,
    pub n_conf: usize,
    pub n_calcom: usize,
    pub n_stations: u32,
    pub ct_s: u32,
}

impl Default for Profile {
    /// Derivative-scale defaults: some eighty ECUs go through the ID check,
    /// a handful are flashed, about fifty are configured and around forty
    /// calibrated and commissioned.
    fn default() -> Self {
        Profile {
            n_id: 80,
            n_flash: 4,
            n_conf: 51,
            n_calcom: 38,
            n_stations: 30,
            ct_s: 88,
        }
    }
}

impl Profile {
    /// Small profile within the exhaustive oracle's caps.
    pub fn small() -> Self {
        Profile {
            n_id: 5,
            n_flash: 1,
            n_conf: 3,
            n_calcom: 2,
            n_stations: 8,
            ct_s: 25,
        }
    }

    pub fn task_count(&self) -> usize {
        self.n_id + self.n_flash + self.n_conf + self.n_calcom
    }
}

#[derive(Debug, Clone, Eq, PartialEq)]
pub struct CorpusCounts {
    pub assembly: usize,
    pub powered: usize,
    pub neither: usize,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
}

const COMPONENTS: &[&str] = &[
    "zentralsteuergeraet",
    "tuersteuergeraet",
    "klimasteuergeraet",
    "motorsteuergeraet",
    "getriebesteuergeraet",
    "bremssteuergeraet",
    "airbagsteuergeraet",
    "lenksaeulenmodul",
    "sitzsteuergeraet",
    "kamerasteuergeraet",
    "radarsensor",
    "parklenkassistent",
    "anhaengersteuergeraet",
    "batteriemanagement",
    "ladesteuergeraet",
    "heckklappenmodul",
    "scheinwerfermodul",
    "kombiinstrument",
    "infotainmenteinheit",
    "audioverstaerker",
    "dachbedieneinheit",
    "regensensormodul",
    "spiegelsteuergeraet",
    "wischersteuergeraet",
    "standheizungsmodul",
    "niveauregulierung",
    "reifendruckmodul",
    "keylessmodul",
    "gurtstraffermodul",
    "innenlichtmodul",
];

const POSITIONS: &[&str] = &["vorne", "hinten", "links", "rechts", "mitte", "oben"];

/// Distinct two-token ECU names. Positioned variants keep every pair at a
/// comfortable edit distance, so fuzzy windows never cross-match names.
fn ecu_names(n: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(n);
    for position in POSITIONS {
        for component in COMPONENTS {
            if names.len() == n {
                return names;
            }
            names.push(format!("{component} {position}"));
        }
    }
    assert!(names.len() >= n, "name pool exhausted at {n}");
    names
}

struct TopologyDraft {
    ecus: Vec<Ecu>,
    /// Ids that must be assembled in the first stations.
    infrastructure: Vec<EcuId>,
}

fn draw_topology(rng: &mut SplitMix64, pool_size: usize) -> TopologyDraft {
    let names = ecu_names(pool_size + 16);
    let mut ecus: Vec<Ecu> = Vec::new();
    let mut da: u8 = 0x10;
    let next_da = |da: &mut u8| {
        let v = *da;
        *da = da.wrapping_add(1);
        v
    };

    // Spread the pool over all five buses: round-robin for tiny pools, two
    // per bus then uniform for larger ones.
    let mut buses = Vec::with_capacity(pool_size);
    for i in 0..pool_size {
        let bus = if pool_size < 10 {
            BusType::ALL[i % 5]
        } else if i < 10 {
            BusType::ALL[i / 2]
        } else {
            *rng.pick(&BusType::ALL)
        };
        buses.push(bus);
    }

    let mut first_on_bus: BTreeMap<BusType, EcuId> = BTreeMap::new();
    for (i, bus) in buses.iter().enumerate() {
        let name = names[i].clone();
        let id = EcuId::new(name.clone());
        let is_first = !first_on_bus.contains_key(bus);
        let dc = if is_first {
            // Bus heads are the standalone units; LVDS links carry no master.
            if *bus == BusType::Lvds {
                DiagnosticClass::Dc3
            } else {
                DiagnosticClass::Dc4
            }
        } else {
            match bus {
                BusType::Lvds => DiagnosticClass::Dc3,
                BusType::Lin => *rng.pick(&[
                    DiagnosticClass::Dc0,
                    DiagnosticClass::Dc1,
                    DiagnosticClass::Dc2,
                ]),
                _ => {
                    let roll = rng.below(100);
                    if roll < 45 {
                        DiagnosticClass::Dc3
                    } else if roll < 65 {
                        DiagnosticClass::Dc2
                    } else if roll < 85 {
                        DiagnosticClass::Dc1
                    } else {
                        DiagnosticClass::Dc0
                    }
                }
            }
        };
        let master_id = if dc.is_slave() {
            Some(first_on_bus.get(bus).expect("bus head exists").clone())
        } else {
            None
        };
        if is_first {
            first_on_bus.insert(*bus, id.clone());
        }
        let terminal = if rng.chance(1, 4) {
            Terminal::T30
        } else {
            Terminal::T15
        };
        ecus.push(Ecu {
            id,
            name,
            bus: *bus,
            diagnostic_address: next_da(&mut da),
            dc,
            terminal,
            master_id,
            is_cold_starter: false,
            is_terminator: false,
            hv_required: rng.chance(1, 10),
        });
    }

    // Bus infrastructure: terminators on CAN and FlexRay, cold starters on
    // FlexRay, fill-in ECUs (no tasks) where a bus is too thin.
    let mut fill_index = pool_size;
    let mut infrastructure: Vec<EcuId> = first_on_bus.values().cloned().collect();
    for bus in [BusType::Can, BusType::FlexRay] {
        let mut members: Vec<usize> = ecus
            .iter()
            .enumerate()
            .filter(|(_, e)| e.bus == bus)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        while members.len() < 2 {
            let name = names[fill_index].clone();
            fill_index += 1;
            let id = EcuId::new(name.clone());
            ecus.push(Ecu {
                id,
                name,
                bus,
                diagnostic_address: next_da(&mut da),
                dc: DiagnosticClass::Dc3,
                terminal: Terminal::T15,
                master_id: None,
                is_cold_starter: false,
                is_terminator: false,
                hv_required: false,
            });
            members.push(ecus.len() - 1);
        }
        for &m in members.iter().take(2) {
            ecus[m].is_terminator = true;
            if bus == BusType::FlexRay {
                ecus[m].is_cold_starter = true;
            }
            infrastructure.push(ecus[m].id.clone());
        }
    }
    infrastructure.sort();
    infrastructure.dedup();

    TopologyDraft {
        ecus,
        infrastructure,
    }
}

fn draw_stations(rng: &mut SplitMix64, n_stations: u32, zone: u32, uniform: bool) -> Vec<Station> {
    let mut stations = Vec::new();
    for index in 1..=n_stations {
        let station = if uniform {
            Station::new(index, StationPower::External)
                .with_hv()
                .with_signals([SignalCap::V, SignalCap::P, SignalCap::Vpe])
        } else if index <= 2 {
            // The infrastructure lands here; keep the head of the line warm.
            Station::new(index, StationPower::External)
        } else if index <= zone {
            let roll = rng.below(10);
            let power = if roll < 6 {
                StationPower::External
            } else if roll < 9 {
                StationPower::Ignition
            } else {
                StationPower::None
            };
            let mut s = Station::new(index, power);
            if power == StationPower::External && rng.chance(1, 3) {
                s = s.with_hv();
            }
            if power != StationPower::None && rng.chance(3, 10) {
                s = s.with_signals([SignalCap::V, SignalCap::P]);
            }
            s
        } else {
            Station::new(index, StationPower::External)
                .with_hv()
                .with_signals([SignalCap::V, SignalCap::P, SignalCap::Vpe])
        };
        stations.push(station);
    }
    stations
}

fn attempt_instance(seed: u64, profile: &Profile, attempt: u64) -> Instance {
    let mut rng = SplitMix64::new(seed ^ attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let pool_size = profile
        .n_id
        .max(profile.n_flash)
        .max(profile.n_conf)
        .max(profile.n_calcom);

    let draft = draw_topology(&mut rng, pool_size);
    let zone = (profile.n_stations / 3).max(2);
    // Tiny instances model a single assembly takt on a uniformly equipped
    // line segment; larger ones spread assembly across the head of the line
    // with varied station capabilities.
    let single_takt = pool_size <= 8;
    let stations = draw_stations(&mut rng, profile.n_stations, zone, single_takt);

    let mut assembly: BTreeMap<EcuId, u32> = BTreeMap::new();
    if single_takt {
        let takt = rng.range_u32(1, zone);
        for (i, ecu) in draft.ecus.iter().enumerate() {
            let station = if i >= pool_size { 1 } else { takt };
            assembly.insert(ecu.id.clone(), station);
        }
    } else {
        // Infrastructure first within stations 1..2, the rest drawn
        // ascending across the zone.
        for id in &draft.infrastructure {
            assembly.insert(id.clone(), rng.range_u32(1, 2.min(zone)));
        }
        let mut remaining: Vec<&Ecu> = draft
            .ecus
            .iter()
            .filter(|e| !assembly.contains_key(&e.id))
            .collect();
        let mut draws: Vec<u32> = (0..remaining.len())
            .map(|_| rng.range_u32(1, zone))
            .collect();
        draws.sort_unstable();
        for (ecu, station) in remaining.drain(..).zip(draws) {
            assembly.insert(ecu.id.clone(), station);
        }
    }

    // Task selection over the pool (never over fill-in infrastructure).
    let pool: Vec<&Ecu> = draft.ecus.iter().take(pool_size).collect();
    let sample = |rng: &mut SplitMix64, k: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        rng.shuffle(&mut idx);
        idx.truncate(k.min(pool.len()));
        idx.sort_unstable();
        idx
    };

    let mut tasks = Vec::new();
    for &i in sample(&mut rng, profile.n_id).iter() {
        tasks.push(Task::new(
            pool[i].id.clone(),
            ProcessType::IdCheck,
            rng.range_u32(5, 8),
        ));
    }
    // Flashing targets the standalone (high-DC) units first. Flash runs are
    // the long ones, scaled down only when a tight cycle time demands it.
    let (flash_lo, flash_hi) = if profile.ct_s >= 32 {
        (20, 25)
    } else {
        let hi = (profile.ct_s * 3 / 4).max(5);
        ((profile.ct_s / 2).max(5).min(hi), hi)
    };
    let mut flash_order: Vec<usize> = (0..pool.len()).collect();
    rng.shuffle(&mut flash_order);
    flash_order.sort_by_key(|&i| std::cmp::Reverse(pool[i].dc));
    for &i in flash_order
        .iter()
        .filter(|&&i| pool[i].dc >= DiagnosticClass::Dc2)
        .take(profile.n_flash)
    {
        tasks.push(Task::new(
            pool[i].id.clone(),
            ProcessType::Flash,
            rng.range_u32(flash_lo, flash_hi),
        ));
    }
    for &i in sample(&mut rng, profile.n_conf).iter() {
        tasks.push(Task::new(
            pool[i].id.clone(),
            ProcessType::Configuration,
            rng.range_u32(5, 9),
        ));
    }
    for &i in sample(&mut rng, profile.n_calcom).iter() {
        let mut t = Task::new(
            pool[i].id.clone(),
            ProcessType::CalCom,
            rng.range_u32(5, 10),
        );
        t.sub_op_count = rng.range_u32(1, 4);
        t.needs_v = rng.chance(1, 4);
        t.needs_p = rng.chance(1, 4);
        t.needs_vpe = rng.chance(1, 4);
        tasks.push(t);
    }
    // HV-bound ECUs carry the HV requirement into every process.
    for t in &mut tasks {
        t.needs_hv = draft
            .ecus
            .iter()
            .find(|e| e.id == t.ecu_id)
            .map(|e| e.hv_required)
            .unwrap_or(false);
    }

    Instance {
        topology: draft.ecus,
        stations,
        assembly,
        tasks,
        derivative: format!("synthetic-{seed}"),
        ct_s: profile.ct_s,
    }
}

/// Deterministic pseudo-random instance for `(seed, profile)`: ECUs over all
/// five bus types with masters owning the slaves, infrastructure inserted so
/// topology validation passes, assembly ascending over the head of the line,
/// and capabilities chosen so a feasible schedule exists (checked
/// constructively; up to 100 redraws before giving up).
pub fn gen_instance(seed: u64, profile: &Profile) -> Result<Instance, SynthError> {
    if profile.n_id == 0 || profile.n_flash == 0 || profile.n_conf == 0 || profile.n_calcom == 0 {
        return Err(SynthError::InfeasibleProfile(
            "task counts must be positive".into(),
        ));
    }
    if profile.n_stations < 5 {
        return Err(SynthError::InfeasibleProfile(format!(
            "{} stations, need at least 5",
            profile.n_stations
        )));
    }
    for attempt in 0..100 {
        let instance = attempt_instance(seed, profile, attempt);
        if !validate_topology(&instance.topology, &instance.stations).is_empty() {
            continue;
        }
        // The baseline plan is part of the evaluation harness, so a usable
        // instance must admit it as well as the greedy schedule.
        if schedule::<f64>(&instance, &SchedulerParams::default()).is_ok()
            && baseline_sequential::<f64>(&instance).is_ok()
        {
            return Ok(instance);
        }
    }
    Err(SynthError::InfeasibleProfile(format!(
        "no feasible instance for seed {seed} within 100 retries"
    )))
}

const INSTALL_SYNONYMS: &[&str] = &["einbauen", "anbringen", "befestigen"];
const POWER_SYNONYMS: &[&str] = &["spannungsversorgung aktiv", "energieversorgung herstellen"];
const NEITHER_VERBS: &[&str] = &[
    "pruefen",
    "reinigen",
    "ausrichten",
    "verkleben",
    "nachziehen",
    "abdichten",
];
const NEITHER_NOUNS: &[&str] = &[
    "dichtung",
    "zierleiste",
    "teppichboden",
    "dachhimmel",
    "radhausschale",
    "schwellerblende",
    "kabelkanal",
    "daemmmatte",
];

/// One character substituted somewhere in a (non-space) position; the token
/// structure survives, so a long pattern still clears the 90% similarity bar
/// while exact matching fails.
fn misspell(rng: &mut SplitMix64, word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let positions: Vec<usize> = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ' ')
        .map(|(i, _)| i)
        .collect();
    let pos = *rng.pick(&positions);
    let alphabet = "abcdefghijklmnopqrstuvwxyz";
    let mut out: Vec<char> = chars.clone();
    loop {
        let replacement = alphabet
            .chars()
            .nth(rng.below(26) as usize)
            .expect("alphabet index");
        if replacement != chars[pos] {
            out[pos] = replacement;
            break;
        }
    }
    out.into_iter().collect()
}

/// Template-based labeled corpus with exact class counts. A quarter of the
/// positive rows carry a one-character misspelling on a long token (fuzzy
/// search still matches, exact matching fails) and a tenth use wording
/// outside the keyword lists (only a trained classifier catches those).
pub fn gen_corpus(seed: u64, counts: &CorpusCounts) -> LabeledCorpus {
    let mut rng = SplitMix64::new(seed);
    let keywords = crate::extract::KeywordConfig::default();
    let names = ecu_names(24);
    let long_names: Vec<&String> = names.iter().filter(|n| n.len() >= 10).collect();

    let mut rows: Vec<LabeledRow> = Vec::new();

    for i in 0..counts.assembly {
        let station = rng.range_u32(1, 30);
        let (text, name) = if i < counts.assembly / 4 {
            let name = (*rng.pick(&long_names)).clone();
            let kw = rng.pick(&keywords.install).clone();
            (format!("{} {kw}", misspell(&mut rng, &name)), name)
        } else if i < counts.assembly / 4 + counts.assembly / 10 {
            let name = names[rng.below(names.len() as u64) as usize].clone();
            let syn = *rng.pick(INSTALL_SYNONYMS);
            (format!("{name} {syn}"), name)
        } else {
            let name = names[rng.below(names.len() as u64) as usize].clone();
            let kw = rng.pick(&keywords.install).clone();
            let text = match rng.below(3) {
                0 => format!("{name} {kw}"),
                1 => format!("{name} im takt {kw}"),
                _ => format!("{kw} {name} und sichern"),
            };
            (text, name)
        };
        rows.push(LabeledRow {
            text: crate::ingest::clean_text(&text),
            label: Label::EcuAssembly,
            station,
            ecu_name: Some(name),
        });
    }

    for i in 0..counts.powered {
        let station = rng.range_u32(1, 30);
        let text = if i < counts.powered / 4 {
            // Only 'bestromung' is long enough to stay above the bar with
            // one edit.
            format!("station {}", misspell(&mut rng, "bestromung"))
        } else if i < counts.powered / 4 + counts.powered / 10 {
            (*rng.pick(POWER_SYNONYMS)).to_owned()
        } else {
            let kw = rng.pick(&keywords.power).clone();
            match rng.below(3) {
                0 => format!("fahrzeug {kw} ab hier"),
                1 => format!("station {kw}"),
                _ => format!("{kw} fuer pruefablauf"),
            }
        };
        rows.push(LabeledRow {
            text: crate::ingest::clean_text(&text),
            label: Label::PoweredStation,
            station,
            ecu_name: None,
        });
    }

    for _ in 0..counts.neither {
        let station = rng.range_u32(1, 30);
        let noun = *rng.pick(NEITHER_NOUNS);
        let verb = *rng.pick(NEITHER_VERBS);
        let text = match rng.below(3) {
            0 => format!("{noun} {verb}"),
            1 => format!("{noun} {verb} und dokumentieren"),
            _ => format!("{verb} der {noun}"),
        };
        rows.push(LabeledRow {
            text: crate::ingest::clean_text(&text),
            label: Label::Neither,
            station,
            ecu_name: None,
        });
    }

    rng.shuffle(&mut rows);
    rows
}

/// Everything needed to serialize an instance as its source files.
#[derive(Debug, Clone)]
pub struct InstanceBundle {
    pub instance: Instance,
    pub assembly_rows: Vec<AssemblyRow>,
    pub task_rows: Vec<TaskRow>,
    pub order: VehicleOrder,
}

/// Renders an instance as its planning sources: clean assembly text per ECU
/// (plus neutral filler rows), commissioning rows with the assembly station
/// as the advisory planned station, and a small vehicle order.
pub fn instance_bundle(seed: u64, profile: &Profile) -> Result<InstanceBundle, SynthError> {
    let instance = gen_instance(seed, profile)?;
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(1));
    let keywords = crate::extract::KeywordConfig::default();

    let mut assembly_rows = Vec::new();
    let mut line_no = 1u32;
    for ecu in &instance.topology {
        let station = instance.assembly_station(&ecu.id).unwrap_or(1);
        let kw = rng.pick(&keywords.install).clone();
        assembly_rows.push(AssemblyRow {
            psl: instance.derivative.clone(),
            station,
            short_text: format!("{} {kw}", ecu.name),
            long_text: format!("{} an halterung {kw} und stecker setzen", ecu.name),
            line_no,
        });
        line_no += 1;
        if rng.chance(1, 6) {
            let noun = *rng.pick(NEITHER_NOUNS);
            let verb = *rng.pick(NEITHER_VERBS);
            assembly_rows.push(AssemblyRow {
                psl: instance.derivative.clone(),
                station,
                short_text: format!("{noun} {verb}"),
                long_text: String::new(),
                line_no,
            });
            line_no += 1;
        }
    }

    let task_rows = instance
        .tasks
        .iter()
        .map(|t| {
            let name = instance
                .ecu(&t.ecu_id)
                .map(|e| e.name.clone())
                .unwrap_or_else(|| t.ecu_id.to_string());
            TaskRow {
                ecu_name: name,
                duration_s: t.duration_s,
                planned_station: instance.assembly_station(&t.ecu_id).unwrap_or(1),
                process: t.process,
                needs_v: t.needs_v,
                needs_p: t.needs_p,
                needs_vpe: t.needs_vpe,
                needs_hv: Some(t.needs_hv),
                sub_ops: t.sub_op_count,
            }
        })
        .collect();

    let order = VehicleOrder {
        product_key: instance.derivative.clone(),
        configuration_codes: vec![
            ("1a1".into(), "interior mirror".into()),
            ("2b4".into(), "comfort access".into()),
            ("7x9".into(), "assistance package".into()),
        ],
    };

    Ok(InstanceBundle {
        instance,
        assembly_rows,
        task_rows,
        order,
    })
}

/// Manifest describing generated files: seed, profile and content hashes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    pub ct_s: Option<u32>,
    pub files: BTreeMap<String, String>,
}

pub const MANIFEST_VERSION: &str = "manifest-v1";

fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Serializes the bundle into the instance directory convention and returns
/// the manifest (also written as `manifest.json`).
pub fn write_instance_dir(
    bundle: &InstanceBundle,
    seed: u64,
    profile: &Profile,
    dir: &std::path::Path,
) -> std::io::Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let files: Vec<(&str, String)> = vec![
        (
            "topology.csv",
            crate::ingest::write_topology(&bundle.instance.topology),
        ),
        (
            "stations.csv",
            crate::ingest::write_stations(&bundle.instance.stations),
        ),
        (
            "assembly_graph.csv",
            crate::ingest::write_assembly_graph(&bundle.assembly_rows),
        ),
        (
            "commissioning.csv",
            crate::ingest::write_commissioning(&bundle.task_rows),
        ),
        ("order.csv", crate::ingest::write_order(&bundle.order)),
    ];
    let mut manifest = Manifest {
        version: MANIFEST_VERSION.to_owned(),
        seed,
        profile: Some(profile.clone()),
        ct_s: Some(bundle.instance.ct_s),
        files: BTreeMap::new(),
    };
    for (name, content) in &files {
        std::fs::write(dir.join(name), content)?;
        manifest
            .files
            .insert((*name).to_owned(), sha256_hex(content.as_bytes()));
    }
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

/// Serializes a corpus as `corpus.csv` plus manifest.
pub fn write_corpus_dir(
    corpus: &LabeledCorpus,
    seed: u64,
    dir: &std::path::Path,
) -> std::io::Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let content = crate::extract::corpus_to_csv(corpus);
    std::fs::write(dir.join("corpus.csv"), &content)?;
    let mut files = BTreeMap::new();
    files.insert("corpus.csv".to_owned(), sha256_hex(content.as_bytes()));
    let manifest = Manifest {
        version: MANIFEST_VERSION.to_owned(),
        seed,
        profile: None,
        ct_s: None,
        files,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}
