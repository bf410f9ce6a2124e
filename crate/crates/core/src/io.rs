//! CSV input and output formats.
//!
//! * table: `id,x11,x12,x21,x22`, one 2x2 table per row.
//! * pharma: `id,events,reports,total_events,total_reports`: a drug with
//!   `events` reports of the event out of `reports`, against database totals.
//! * support: `id,atom,cdf` long format, one row per attainable p-value.
//!   Optional extra columns: `observed` (1 on the observed atom, needed to
//!   adjust), `is_null` and `gen_prob` (truth flag and generating point
//!   probability, used by the oracle).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exact::{fisher_exact, ContingencyTable, TailDirection};
use crate::null_model::{NullDistribution, TestResult};
use crate::numeric::fmt_sig;
use crate::oracle::HypothesisSpec;
use crate::procedures::Family;

pub const TABLE_HEADER: [&str; 5] = ["id", "x11", "x12", "x21", "x22"];
pub const PHARMA_HEADER: [&str; 5] = ["id", "events", "reports", "total_events", "total_reports"];
pub const SUPPORT_HEADER: [&str; 3] = ["id", "atom", "cdf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Table,
    Pharma,
    Support,
}

impl InputFormat {
    /// Tail used when the user does not pick one: pharmacovigilance data asks
    /// whether the drug raises the event rate.
    pub fn default_tail(self) -> TailDirection {
        match self {
            InputFormat::Pharma => TailDirection::Greater,
            _ => TailDirection::Less,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "pharma" => Ok(Self::Pharma),
            "support" => Ok(Self::Support),
            other => Err(Error::Parameter(format!("unknown input format '{other}'"))),
        }
    }
}

/// A family read from disk, with the ids and (for count formats) tables.
#[derive(Debug, Clone)]
pub struct LoadedFamily {
    pub ids: Vec<String>,
    pub tables: Vec<Option<ContingencyTable>>,
    pub family: Family,
}

fn input_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Input {
        line,
        msg: msg.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

/// Checks that the header starts with `required` and maps optional columns.
fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    required: &[&str],
    optional: &[&str],
) -> Result<HashMap<String, usize>> {
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got.len() < required.len() || got[..required.len()] != *required {
        return Err(input_err(
            1,
            format!(
                "expected header '{}', found '{}'",
                required.join(","),
                got.join(",")
            ),
        ));
    }
    let mut extra = HashMap::new();
    for (pos, name) in got.iter().enumerate().skip(required.len()) {
        if !optional.contains(name) {
            return Err(input_err(1, format!("unexpected column '{name}'")));
        }
        extra.insert(name.to_string(), pos);
    }
    Ok(extra)
}

fn field<T: FromStr>(rec: &csv::StringRecord, pos: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec
        .get(pos)
        .ok_or_else(|| input_err(line, format!("missing column '{name}'")))?;
    raw.parse()
        .map_err(|_| input_err(line, format!("cannot parse {name} '{raw}'")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn read_rows<R: Read>(input: R, header: &[&str]) -> Result<Vec<(String, [u64; 4], u64)>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, header, &[])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            input_err(line, e.to_string())
        })?;
        let line = line_of(&rec);
        let id: String = field(&rec, 0, header[0], line)?;
        let mut counts = [0u64; 4];
        for (k, c) in counts.iter_mut().enumerate() {
            *c = field(&rec, k + 1, header[k + 1], line)?;
        }
        rows.push((id, counts, line));
    }
    if rows.is_empty() {
        return Err(input_err(1, "no data rows"));
    }
    Ok(rows)
}

/// Reads `id,x11,x12,x21,x22`.
pub fn read_tables<R: Read>(input: R) -> Result<Vec<(String, ContingencyTable)>> {
    Ok(read_rows(input, &TABLE_HEADER)?
        .into_iter()
        .map(|(id, [a, b, c, d], _)| (id, ContingencyTable::new(a, b, c, d)))
        .collect())
}

/// Table for one drug: its event and non-event reports against those of all
/// other drugs.
pub fn pharma_table(
    events: u64,
    reports: u64,
    total_events: u64,
    total_reports: u64,
) -> std::result::Result<ContingencyTable, String> {
    if events > reports {
        return Err(format!("events {events} exceed reports {reports}"));
    }
    if events > total_events {
        return Err(format!(
            "events {events} exceed total_events {total_events}"
        ));
    }
    if total_events > total_reports || reports > total_reports {
        return Err("totals are smaller than the drug's counts".into());
    }
    let non_events = reports - events;
    let other_non_events = (total_reports - total_events)
        .checked_sub(non_events)
        .ok_or("drug non-event reports exceed database non-event reports")?;
    Ok(ContingencyTable::new(
        events,
        non_events,
        total_events - events,
        other_non_events,
    ))
}

/// Reads `id,events,reports,total_events,total_reports`.
pub fn read_pharma<R: Read>(input: R) -> Result<Vec<(String, ContingencyTable)>> {
    read_rows(input, &PHARMA_HEADER)?
        .into_iter()
        .map(|(id, [e, r, te, tr], line)| {
            pharma_table(e, r, te, tr)
                .map(|t| (id, t))
                .map_err(|msg| input_err(line, msg))
        })
        .collect()
}

/// All rows of one hypothesis in a support file.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRecord {
    pub id: String,
    pub atoms: Vec<f64>,
    pub cdf: Vec<f64>,
    pub observed: Option<f64>,
    pub is_null: Option<bool>,
    pub gen_prob: Option<Vec<f64>>,
    first_line: u64,
}

impl SupportRecord {
    pub fn distribution(&self) -> Result<NullDistribution> {
        NullDistribution::new(self.atoms.clone(), self.cdf.clone())
            .map_err(|e| input_err(self.first_line, format!("hypothesis '{}': {e}", self.id)))
    }
}

fn parse_flag(raw: &str, line: u64, name: &str) -> Result<bool> {
    match raw {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        _ => Err(input_err(
            line,
            format!("cannot parse {name} '{raw}' as 0/1"),
        )),
    }
}

/// Reads the long `id,atom,cdf[,observed][,is_null][,gen_prob]` format, grouping
/// rows by id in order of first appearance.
pub fn read_support<R: Read>(input: R) -> Result<Vec<SupportRecord>> {
    let mut rdr = reader(input);
    let extra = check_header(
        &mut rdr,
        &SUPPORT_HEADER,
        &["observed", "is_null", "gen_prob"],
    )?;
    let mut records: Vec<SupportRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            input_err(line, e.to_string())
        })?;
        let line = line_of(&rec);
        let id: String = field(&rec, 0, "id", line)?;
        let atom: f64 = field(&rec, 1, "atom", line)?;
        let cdf: f64 = field(&rec, 2, "cdf", line)?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            records.push(SupportRecord {
                id: id.clone(),
                atoms: vec![],
                cdf: vec![],
                observed: None,
                is_null: None,
                gen_prob: extra.contains_key("gen_prob").then(Vec::new),
                first_line: line,
            });
            records.len() - 1
        });
        let r = &mut records[slot];
        r.atoms.push(atom);
        r.cdf.push(cdf);
        if let Some(&pos) = extra.get("observed") {
            let raw: String = field(&rec, pos, "observed", line)?;
            if parse_flag(&raw, line, "observed")? {
                if r.observed.is_some() {
                    return Err(input_err(line, format!("'{id}' has two observed atoms")));
                }
                r.observed = Some(atom);
            }
        }
        if let Some(&pos) = extra.get("is_null") {
            let raw: String = field(&rec, pos, "is_null", line)?;
            let flag = parse_flag(&raw, line, "is_null")?;
            match r.is_null {
                Some(prev) if prev != flag => {
                    return Err(input_err(
                        line,
                        format!("'{id}' has conflicting is_null flags"),
                    ))
                }
                _ => r.is_null = Some(flag),
            }
        }
        if let Some(&pos) = extra.get("gen_prob") {
            let w: f64 = field(&rec, pos, "gen_prob", line)?;
            r.gen_prob.as_mut().expect("column present").push(w);
        }
    }
    if records.is_empty() {
        return Err(input_err(1, "no data rows"));
    }
    Ok(records)
}

/// Reads any input format into a family of test results.
pub fn read_family<R: Read>(
    input: R,
    format: InputFormat,
    tail: TailDirection,
) -> Result<LoadedFamily> {
    let (ids, tables, results) = match format {
        InputFormat::Table | InputFormat::Pharma => {
            let rows = if format == InputFormat::Table {
                read_tables(input)?
            } else {
                read_pharma(input)?
            };
            let results = rows.iter().map(|(_, t)| fisher_exact(t, tail)).collect();
            let (ids, tables): (Vec<String>, Vec<Option<ContingencyTable>>) =
                rows.into_iter().map(|(id, t)| (id, Some(t))).unzip();
            (ids, tables, results)
        }
        InputFormat::Support => {
            let records = read_support(input)?;
            let mut results = Vec::with_capacity(records.len());
            for r in &records {
                let observed = r.observed.ok_or_else(|| {
                    input_err(
                        r.first_line,
                        format!("'{}' has no observed atom (add an 'observed' column)", r.id),
                    )
                })?;
                let result = TestResult::from_observed(r.distribution()?, observed)
                    .map_err(|e| input_err(r.first_line, e.to_string()))?;
                results.push(result);
            }
            let ids = records.into_iter().map(|r| r.id).collect();
            (ids, vec![None; results.len()], results)
        }
    };
    Ok(LoadedFamily {
        ids,
        tables,
        family: Family::new(results)?,
    })
}

/// Reads an oracle specification: the support format with an `is_null`
/// column and, for false nulls, a `gen_prob` column.
pub fn read_oracle_spec<R: Read>(input: R) -> Result<Vec<HypothesisSpec>> {
    read_support(input)?
        .into_iter()
        .map(|r| {
            let model = r.distribution()?;
            let is_null = r.is_null.unwrap_or(true);
            let spec = match (&r.gen_prob, is_null) {
                (Some(w), false) => HypothesisSpec::false_null(model, w.clone()),
                (None, false) => {
                    return Err(input_err(
                        r.first_line,
                        format!("false null '{}' needs gen_prob values", r.id),
                    ))
                }
                (Some(w), true) => {
                    // a true null is generated by its own model
                    let own = model.point_masses();
                    if w.iter().zip(&own).any(|(a, b)| (a - b).abs() > 1e-9) {
                        return Err(input_err(
                            r.first_line,
                            format!("true null '{}' has gen_prob different from its cdf", r.id),
                        ));
                    }
                    Ok(HypothesisSpec::true_null(model))
                }
                (None, true) => Ok(HypothesisSpec::true_null(model)),
            };
            spec.map_err(|e| input_err(r.first_line, format!("'{}': {e}", r.id)))
        })
        .collect()
}

fn number(x: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => fmt_sig(x, d),
        None => format!("{x}"),
    }
}

/// Writes `id,atom,cdf,observed` for every hypothesis.
pub fn write_support<W: Write>(
    mut out: W,
    loaded: &LoadedFamily,
    digits: Option<usize>,
) -> Result<()> {
    writeln!(out, "id,atom,cdf,observed")?;
    for (id, r) in loaded.ids.iter().zip(loaded.family.results()) {
        let observed = r.null.index_of(r.p_value);
        for (j, (&a, &f)) in r.null.atoms().iter().zip(r.null.cdf()).enumerate() {
            let flag = u8::from(observed == Some(j));
            writeln!(
                out,
                "{id},{},{},{flag}",
                number(a, digits),
                number(f, digits)
            )?;
        }
    }
    Ok(())
}
