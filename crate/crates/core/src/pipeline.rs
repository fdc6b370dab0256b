//! Wiring from an instance directory (the five planning sources) to a
//! schedulable [`Instance`]: parse, extract the assembly stations from the
//! free-text graph, and bind commissioning rows to topology ECUs.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::extract::{self, ExtractionResult, KeywordConfig};
use crate::ingest::{self, IngestError, RowError, VehicleOrder};
use crate::model::{EcuId, Instance, Task};
use crate::synth::Manifest;

/// Extraction method used to recover ECU assembly stations from the
/// assembly precedence graph.
#[derive(Debug, Clone)]
pub enum ExtractMethod {
    Fuzzy { threshold: u8 },
    Regex,
    Nb { model: crate::NbModel64 },
}

impl Default for ExtractMethod {
    fn default() -> Self {
        ExtractMethod::Fuzzy { threshold: 90 }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("'{file}': {source}")]
    Ingest {
        file: String,
        #[source]
        source: IngestError,
    },
    #[error("extraction failed: {0}")]
    Extract(#[from] extract::ExtractError),
    #[error("manifest unreadable: {0}")]
    Manifest(String),
}

/// A loaded instance plus the intermediate products worth reporting.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub order: VehicleOrder,
    pub extraction: ExtractionResult,
}

fn load<T>(
    dir: &Path,
    file: &str,
    parse: impl FnOnce(&[u8]) -> Result<ingest::ParseReport<T>, IngestError>,
) -> Result<Vec<T>, PipelineError> {
    let wrap = |source: IngestError| PipelineError::Ingest {
        file: file.to_owned(),
        source,
    };
    let bytes = std::fs::read(dir.join(file)).map_err(|e| wrap(IngestError::Io(e)))?;
    parse(&bytes).map_err(wrap)?.into_strict().map_err(wrap)
}

/// Loads the instance directory convention: `topology.csv`, `stations.csv`,
/// `assembly_graph.csv`, `commissioning.csv`, `order.csv`, and optionally
/// `manifest.json` carrying the cycle time (default 88 s without one).
///
/// Assembly stations are recovered from the free-text graph with the given
/// extraction method; the commissioning spec's planned stations stay
/// advisory.
pub fn load_instance_dir(dir: &Path, method: &ExtractMethod) -> Result<LoadedInstance, PipelineError> {
    let topology = load(dir, "topology.csv", ingest::parse_topology)?;
    let stations = load(dir, "stations.csv", ingest::parse_stations)?;
    let assembly_rows = load(dir, "assembly_graph.csv", ingest::parse_assembly_graph)?;
    let task_rows = load(dir, "commissioning.csv", ingest::parse_commissioning)?;
    let order = load(dir, "order.csv", ingest::parse_order)?
        .into_iter()
        .next()
        .expect("order parse yields one order");

    let ct_s = match std::fs::read(dir.join("manifest.json")) {
        Ok(bytes) => {
            let manifest: Manifest = serde_json::from_slice(&bytes)
                .map_err(|e| PipelineError::Manifest(e.to_string()))?;
            manifest
                .ct_s
                .or(manifest.profile.as_ref().map(|p| p.ct_s))
                .unwrap_or(88)
        }
        Err(_) => 88,
    };

    let ecu_names: Vec<String> = {
        let mut names: Vec<String> = topology.iter().map(|e| e.name.clone()).collect();
        names.sort();
        names.dedup();
        names
    };
    let keywords = KeywordConfig::default();
    let extraction = match method {
        ExtractMethod::Fuzzy { threshold } => {
            extract::fuzzy_extract(&assembly_rows, &ecu_names, &keywords, *threshold)?
        }
        ExtractMethod::Regex => extract::regex_extract(&assembly_rows, &ecu_names, &keywords),
        ExtractMethod::Nb { model } => extract::nb_extract(&assembly_rows, model, &ecu_names)?,
    };

    // Assembly stations apply to every topology entry sharing the name (an
    // ECU on several buses is one physical box).
    let mut assembly: BTreeMap<EcuId, u32> = BTreeMap::new();
    for ecu in &topology {
        if let Some(station) = extraction.ecu_stations.get(&ecu.name) {
            assembly.insert(ecu.id.clone(), *station);
        }
    }

    // Bind commissioning rows to ECUs by name; ambiguous names (multi-bus
    // boxes) cannot be resolved here and are data errors.
    let mut tasks = Vec::new();
    for (i, row) in task_rows.iter().enumerate() {
        let matches: Vec<&crate::model::Ecu> =
            topology.iter().filter(|e| e.name == row.ecu_name).collect();
        let ecu = match matches.as_slice() {
            [one] => *one,
            [] => {
                return Err(PipelineError::Ingest {
                    file: "commissioning.csv".into(),
                    source: IngestError::Row(RowError {
                        line_no: (i + 1) as u32,
                        message: format!("unknown ECU '{}'", row.ecu_name),
                    }),
                })
            }
            _ => {
                return Err(PipelineError::Ingest {
                    file: "commissioning.csv".into(),
                    source: IngestError::Row(RowError {
                        line_no: (i + 1) as u32,
                        message: format!("ambiguous ECU '{}' (several buses)", row.ecu_name),
                    }),
                })
            }
        };
        let mut task = Task::new(ecu.id.clone(), row.process, row.duration_s);
        task.needs_v = row.needs_v;
        task.needs_p = row.needs_p;
        task.needs_vpe = row.needs_vpe;
        task.needs_hv = row.needs_hv.unwrap_or(ecu.hv_required);
        task.sub_op_count = row.sub_ops;
        tasks.push(task);
    }

    let instance = Instance {
        topology,
        stations,
        assembly,
        tasks,
        derivative: order.product_key.clone(),
        ct_s,
    };

    Ok(LoadedInstance {
        instance,
        order,
        extraction,
    })
}
