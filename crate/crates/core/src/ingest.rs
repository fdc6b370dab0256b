//! Parsing of the heterogeneous planning sources into validated domain
//! objects, applying the text-cleaning pipeline to every free-text field.
//!
//! Five CSV schemas are fixed here (see the per-parser docs). Parsing is
//! lenient at row granularity: bad rows are collected as [`RowError`]s and
//! counted, so that `parsed + rejected + deduplicated = input rows` always
//! holds. The `*_strict` helpers turn any row error into a failure.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BusType, DiagnosticClass, Ecu, EcuId, ProcessType, SignalCap, Station, StationPower, Terminal,
};

/// The four heterogeneous planning sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Topology,
    AssemblyGraph,
    CommissioningSpec,
    VehicleOrder,
}

/// One raw CSV record before typing; `line_no` is 1-based over data rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub source: SourceKind,
    pub line_no: u32,
    pub fields: Vec<String>,
}

/// A row that could not be turned into a domain object.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("row {line_no}: {message}")]
pub struct RowError {
    pub line_no: u32,
    pub message: String,
}

impl RowError {
    fn new(line_no: u32, message: impl Into<String>) -> Self {
        RowError {
            line_no,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("empty file: no data rows")]
    EmptyFile,
    #[error("{0}")]
    Row(#[from] RowError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of parsing one file. Row count conservation:
/// `items.len() + row_errors.len() + deduplicated == input_rows`.
#[derive(Debug, Clone)]
pub struct ParseReport<T> {
    pub items: Vec<T>,
    pub row_errors: Vec<RowError>,
    pub deduplicated: usize,
    pub input_rows: usize,
}

impl<T> ParseReport<T> {
    /// Fails on the first row error, otherwise hands out the items.
    pub fn into_strict(self) -> Result<Vec<T>, IngestError> {
        match self.row_errors.into_iter().next() {
            Some(err) => Err(IngestError::Row(err)),
            None => Ok(self.items),
        }
    }
}

/// Vehicle order: a derivative product key plus its configuration codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleOrder {
    pub product_key: String,
    pub configuration_codes: Vec<(String, String)>,
}

/// One free-text row of the assembly precedence graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyRow {
    pub psl: String,
    pub station: u32,
    pub short_text: String,
    pub long_text: String,
    pub line_no: u32,
}

/// One row of the commissioning specification. The planned station is
/// advisory metadata; the scheduler recomputes stations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRow {
    pub ecu_name: String,
    pub duration_s: u32,
    pub planned_station: u32,
    pub process: ProcessType,
    pub needs_v: bool,
    pub needs_p: bool,
    pub needs_vpe: bool,
    pub needs_hv: Option<bool>,
    pub sub_ops: u32,
}

/// Normalizes planning text: lowercase, umlauts transliterated (ae/oe/ue/ss),
/// whitespace runs collapsed, ends trimmed. Idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        match ch {
            'ä' | 'Ä' => out.push_str("ae"),
            'ö' | 'Ö' => out.push_str("oe"),
            'ü' | 'Ü' => out.push_str("ue"),
            'ß' => out.push_str("ss"),
            c => out.extend(c.to_lowercase()),
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    let mut in_space = true; // leading whitespace is dropped
    for ch in out.chars() {
        if ch.is_whitespace() {
            if !in_space {
                collapsed.push(' ');
                in_space = true;
            }
        } else {
            collapsed.push(ch);
            in_space = false;
        }
    }
    while collapsed.ends_with(' ') {
        collapsed.pop();
    }
    collapsed
}

const TOPOLOGY_HEADERS: &[&str] = &[
    "name",
    "bus",
    "da",
    "dc",
    "terminal",
    "master",
    "cold_starter",
    "terminator",
    "hv",
];
const STATIONS_HEADERS: &[&str] = &["index", "power", "hv", "signals"];
const ASSEMBLY_HEADERS: &[&str] = &["psl", "station", "short_text", "long_text"];
const COMMISSIONING_HEADERS_SHORT: &[&str] = &["ecu", "duration_s", "planned_station", "process"];
const COMMISSIONING_HEADERS_FULL: &[&str] = &[
    "ecu",
    "duration_s",
    "planned_station",
    "process",
    "needs_v",
    "needs_p",
    "needs_vpe",
    "needs_hv",
    "sub_ops",
];
const ORDER_HEADERS: &[&str] = &["product_key", "code", "description"];

struct CsvRows {
    rows: Vec<(u32, Vec<String>)>,
}

/// Reads the CSV, checks the header against one of the allowed layouts and
/// returns trimmed data rows with 1-based line numbers.
fn read_rows(content: &[u8], allowed_headers: &[&[&str]]) -> Result<CsvRows, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(content);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(IngestError::EmptyFile);
    }
    let matched = allowed_headers
        .iter()
        .find(|expected| headers.len() == expected.len() && headers.iter().eq(expected.iter()));
    if matched.is_none() {
        return Err(IngestError::Schema(format!(
            "header [{}] does not match expected [{}]",
            headers.join(","),
            allowed_headers
                .iter()
                .map(|h| h.join(","))
                .collect::<Vec<_>>()
                .join("] or ["),
        )));
    }
    let width = headers.len();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut fields: Vec<String> = record.iter().map(|f| f.trim().to_owned()).collect();
        fields.resize(width, String::new());
        rows.push(((i + 1) as u32, fields));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(CsvRows { rows })
}

fn parse_bool(field: &str, what: &str) -> Result<bool, String> {
    match field.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        other => Err(format!("bad {what} flag '{other}'")),
    }
}

fn parse_u32(field: &str, what: &str) -> Result<u32, String> {
    field
        .trim()
        .parse::<u32>()
        .map_err(|_| format!("bad {what} '{field}'"))
}

/// Generic per-file pipeline: clean each row's fields, drop byte-identical
/// duplicates (after cleaning), then type the row.
fn typed_rows<T>(
    raw: CsvRows,
    clean_mask: &[bool],
    mut typer: impl FnMut(u32, &[String]) -> Result<Option<T>, String>,
) -> ParseReport<T> {
    let input_rows = raw.rows.len();
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut items = Vec::new();
    let mut row_errors = Vec::new();
    let mut deduplicated = 0usize;
    for (line_no, fields) in raw.rows {
        let cleaned: Vec<String> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if clean_mask.get(i).copied().unwrap_or(false) {
                    clean_text(f)
                } else {
                    f.trim().to_owned()
                }
            })
            .collect();
        if !seen.insert(cleaned.clone()) {
            deduplicated += 1;
            continue;
        }
        match typer(line_no, &cleaned) {
            Ok(Some(item)) => items.push(item),
            Ok(None) => row_errors.push(RowError::new(line_no, "unusable row")),
            Err(msg) => row_errors.push(RowError::new(line_no, msg)),
        }
    }
    ParseReport {
        items,
        row_errors,
        deduplicated,
        input_rows,
    }
}

fn parse_da(field: &str) -> Result<u8, String> {
    let s = field.trim().trim_start_matches("0x").trim_start_matches("0X");
    u8::from_str_radix(s, 16).map_err(|_| format!("non-hex diagnostic address '{field}'"))
}

/// Parses `topology.csv` (headers `name,bus,da,dc,terminal,master,
/// cold_starter,terminator,hv`). Master references are by name on the same
/// bus; ids are the cleaned names, disambiguated as `name@bus` when one name
/// appears on several buses.
pub fn parse_topology(content: &[u8]) -> Result<ParseReport<Ecu>, IngestError> {
    type RowTuple = (
        String,
        BusType,
        u8,
        DiagnosticClass,
        Terminal,
        Option<String>,
        bool,
        bool,
        bool,
    );

    let raw = read_rows(content, &[TOPOLOGY_HEADERS])?;
    let clean_mask = [true, false, false, false, false, true, false, false, false];
    let report: ParseReport<(u32, RowTuple)> = typed_rows(raw, &clean_mask, |line, f| {
        let name = f[0].clone();
        if name.is_empty() {
            return Err("empty ECU name".into());
        }
        let bus = BusType::from_str(&f[1])?;
        let da = parse_da(&f[2])?;
        let dc_level = f[3]
            .parse::<u8>()
            .map_err(|_| format!("bad DC '{}'", f[3]))?;
        let dc = DiagnosticClass::from_level(dc_level)
            .ok_or_else(|| format!("DC out of range 0..4: '{}'", f[3]))?;
        let terminal = Terminal::from_str(&f[4])?;
        let master_name = if f[5].is_empty() { None } else { Some(f[5].clone()) };
        let cold_starter = parse_bool(&f[6], "cold_starter")?;
        let terminator = parse_bool(&f[7], "terminator")?;
        let hv = parse_bool(&f[8], "hv")?;
        Ok(Some((
            line,
            (
                name,
                bus,
                da,
                dc,
                terminal,
                master_name,
                cold_starter,
                terminator,
                hv,
            ),
        )))
    });

    // Second pass: assign ids and resolve same-bus master references.
    let rows = report.items;
    let mut row_errors = report.row_errors;

    let duplicated_names: BTreeSet<&str> = {
        let mut seen = BTreeSet::new();
        let mut dup = BTreeSet::new();
        for (_, row) in &rows {
            if !seen.insert(row.0.as_str()) {
                dup.insert(row.0.as_str());
            }
        }
        dup
    };
    let id_of = |name: &str, bus: BusType| -> EcuId {
        if duplicated_names.contains(name) {
            EcuId::new(format!("{name}@{bus}"))
        } else {
            EcuId::new(name)
        }
    };

    let mut ecus = Vec::new();
    for (line_no, row) in &rows {
        let (name, bus, da, dc, terminal, master_name, cold_starter, terminator, hv) = row;
        let master_id = match master_name {
            None => None,
            Some(master_name) => {
                match rows
                    .iter()
                    .find(|(_, r)| &r.0 == master_name && r.1 == *bus)
                {
                    Some((_, m)) => Some(id_of(&m.0, m.1)),
                    None => {
                        row_errors.push(RowError::new(
                            *line_no,
                            format!("master '{master_name}' not found on {bus}"),
                        ));
                        continue;
                    }
                }
            }
        };
        ecus.push(Ecu {
            id: id_of(name, *bus),
            name: name.clone(),
            bus: *bus,
            diagnostic_address: *da,
            dc: *dc,
            terminal: *terminal,
            master_id,
            is_cold_starter: *cold_starter,
            is_terminator: *terminator,
            hv_required: *hv,
        });
    }

    Ok(ParseReport {
        items: ecus,
        row_errors,
        deduplicated: report.deduplicated,
        input_rows: report.input_rows,
    })
}

/// Parses `stations.csv` (headers `index,power,hv,signals`; power in
/// none|ignition|external; signals a semicolon-joined subset of v;p;vpe).
pub fn parse_stations(content: &[u8]) -> Result<ParseReport<Station>, IngestError> {
    let raw = read_rows(content, &[STATIONS_HEADERS])?;
    Ok(typed_rows(raw, &[false; 4], |_line, f| {
        let index = parse_u32(&f[0], "station index")?;
        let power = StationPower::from_str(&f[1])?;
        let hv = parse_bool(&f[2], "hv")?;
        let mut signal_caps = BTreeSet::new();
        for part in f[3].split(';').filter(|p| !p.trim().is_empty()) {
            signal_caps.insert(SignalCap::from_str(part)?);
        }
        Ok(Some(Station {
            index,
            power,
            hv_capable: hv,
            signal_caps,
        }))
    }))
}

/// Parses `assembly_graph.csv` (headers `psl,station,short_text,long_text`).
pub fn parse_assembly_graph(content: &[u8]) -> Result<ParseReport<AssemblyRow>, IngestError> {
    let raw = read_rows(content, &[ASSEMBLY_HEADERS])?;
    Ok(typed_rows(
        raw,
        &[true, false, true, true],
        |line_no, f| {
            let station = parse_u32(&f[1], "station")?;
            Ok(Some(AssemblyRow {
                psl: f[0].clone(),
                station,
                short_text: f[2].clone(),
                long_text: f[3].clone(),
                line_no,
            }))
        },
    ))
}

/// Parses `commissioning.csv` (headers `ecu,duration_s,planned_station,
/// process` optionally followed by `needs_v,needs_p,needs_vpe,needs_hv,
/// sub_ops`).
pub fn parse_commissioning(content: &[u8]) -> Result<ParseReport<TaskRow>, IngestError> {
    let raw = read_rows(
        content,
        &[COMMISSIONING_HEADERS_SHORT, COMMISSIONING_HEADERS_FULL],
    )?;
    let full = raw.rows.first().map(|r| r.1.len() == 9).unwrap_or(false);
    let clean_mask = [true, false, false, false, false, false, false, false, false];
    Ok(typed_rows(raw, &clean_mask, move |_line, f| {
        let ecu_name = f[0].clone();
        if ecu_name.is_empty() {
            return Err("empty ECU name".into());
        }
        let duration_s = parse_u32(&f[1], "duration_s")?;
        let planned_station = parse_u32(&f[2], "planned_station")?;
        let process = ProcessType::from_str(&f[3])?;
        let (needs_v, needs_p, needs_vpe, needs_hv, sub_ops) = if full {
            (
                parse_bool(&f[4], "needs_v")?,
                parse_bool(&f[5], "needs_p")?,
                parse_bool(&f[6], "needs_vpe")?,
                if f[7].is_empty() {
                    None
                } else {
                    Some(parse_bool(&f[7], "needs_hv")?)
                },
                if f[8].is_empty() {
                    1
                } else {
                    parse_u32(&f[8], "sub_ops")?
                },
            )
        } else {
            (false, false, false, None, 1)
        };
        if sub_ops == 0 {
            return Err("sub_ops must be positive".into());
        }
        if sub_ops > 1 && process != ProcessType::CalCom {
            return Err(format!("sub_ops {sub_ops} only allowed for cal_com"));
        }
        Ok(Some(TaskRow {
            ecu_name,
            duration_s,
            planned_station,
            process,
            needs_v,
            needs_p,
            needs_vpe,
            needs_hv,
            sub_ops,
        }))
    }))
}

/// Parses `order.csv` (headers `product_key,code,description`) into one
/// vehicle order; configuration codes must be unique within the order.
pub fn parse_order(content: &[u8]) -> Result<ParseReport<VehicleOrder>, IngestError> {
    let raw = read_rows(content, &[ORDER_HEADERS])?;
    let report = typed_rows(raw, &[true, true, true], |line, f| {
        Ok(Some((line, f[0].clone(), f[1].clone(), f[2].clone())))
    });

    let mut row_errors = report.row_errors;
    let mut product_key = String::new();
    let mut codes: Vec<(String, String)> = Vec::new();
    let mut seen_codes: BTreeSet<String> = BTreeSet::new();
    for (line, pk, code, desc) in &report.items {
        if product_key.is_empty() {
            product_key = pk.clone();
        }
        if !seen_codes.insert(code.clone()) {
            row_errors.push(RowError::new(
                *line,
                format!("duplicate configuration code '{code}'"),
            ));
            continue;
        }
        codes.push((code.clone(), desc.clone()));
    }

    let order = VehicleOrder {
        product_key,
        configuration_codes: codes,
    };
    Ok(ParseReport {
        items: vec![order],
        row_errors,
        deduplicated: report.deduplicated,
        input_rows: report.input_rows,
    })
}

/// Typed output of [`parse_source`].
#[derive(Debug)]
pub enum ParsedSource {
    Topology(ParseReport<Ecu>),
    AssemblyGraph(ParseReport<AssemblyRow>),
    CommissioningSpec(ParseReport<TaskRow>),
    VehicleOrder(ParseReport<VehicleOrder>),
}

/// Dispatches on the source kind; see the per-source parsers for schemas.
pub fn parse_source(kind: SourceKind, content: &[u8]) -> Result<ParsedSource, IngestError> {
    Ok(match kind {
        SourceKind::Topology => ParsedSource::Topology(parse_topology(content)?),
        SourceKind::AssemblyGraph => ParsedSource::AssemblyGraph(parse_assembly_graph(content)?),
        SourceKind::CommissioningSpec => {
            ParsedSource::CommissioningSpec(parse_commissioning(content)?)
        }
        SourceKind::VehicleOrder => ParsedSource::VehicleOrder(parse_order(content)?),
    })
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new().from_writer(buf)
}

/// Serializes ECUs back to the `topology.csv` schema.
pub fn write_topology(ecus: &[Ecu]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(TOPOLOGY_HEADERS).unwrap();
        for e in ecus {
            let master = e
                .master_id
                .as_ref()
                .map(|id| {
                    ecus.iter()
                        .find(|m| &m.id == id)
                        .map(|m| m.name.clone())
                        .unwrap_or_else(|| id.to_string())
                })
                .unwrap_or_default();
            w.write_record([
                e.name.as_str(),
                e.bus.name(),
                &format!("0x{:02x}", e.diagnostic_address),
                &e.dc.level().to_string(),
                &e.terminal.to_string(),
                &master,
                if e.is_cold_starter { "true" } else { "false" },
                if e.is_terminator { "true" } else { "false" },
                if e.hv_required { "true" } else { "false" },
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}

/// Serializes stations back to the `stations.csv` schema.
pub fn write_stations(stations: &[Station]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(STATIONS_HEADERS).unwrap();
        for s in stations {
            let signals = s
                .signal_caps
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                s.index.to_string().as_str(),
                &s.power.to_string(),
                if s.hv_capable { "true" } else { "false" },
                &signals,
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}

/// Serializes assembly rows back to the `assembly_graph.csv` schema.
pub fn write_assembly_graph(rows: &[AssemblyRow]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(ASSEMBLY_HEADERS).unwrap();
        for r in rows {
            w.write_record([
                r.psl.as_str(),
                &r.station.to_string(),
                &r.short_text,
                &r.long_text,
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}

/// Serializes commissioning rows back to the full `commissioning.csv` schema.
pub fn write_commissioning(rows: &[TaskRow]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(COMMISSIONING_HEADERS_FULL).unwrap();
        for r in rows {
            w.write_record([
                r.ecu_name.as_str(),
                &r.duration_s.to_string(),
                &r.planned_station.to_string(),
                r.process.name(),
                if r.needs_v { "true" } else { "false" },
                if r.needs_p { "true" } else { "false" },
                if r.needs_vpe { "true" } else { "false" },
                match r.needs_hv {
                    Some(true) => "true",
                    Some(false) => "false",
                    None => "",
                },
                &r.sub_ops.to_string(),
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}

/// Serializes a vehicle order back to the `order.csv` schema.
pub fn write_order(order: &VehicleOrder) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(ORDER_HEADERS).unwrap();
        for (code, desc) in &order.configuration_codes {
            w.write_record([order.product_key.as_str(), code, desc])
                .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}
