//! Observed-data records, cohort validation, CSV ingestion and the
//! provider-preference instrument.
//!
//! A [`Cohort`] is the i.i.d. sample `(time, event, treatment, covariates,
//! instrument)` every estimator works on. It is validated once on
//! construction and immutable afterwards.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: observed time `min(T, C)`, event indicator `1{T <= C}`,
/// binary treatment, baseline covariates and binary instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub time: f64,
    pub event: bool,
    pub treatment: bool,
    pub covariates: Vec<f64>,
    pub instrument: bool,
}

impl ObservedRecord {
    pub fn new(time: f64, event: bool, treatment: bool, instrument: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            treatment,
            covariates,
            instrument,
        }
    }
}

/// A validated sample.
///
/// Guarantees at least two records, at least one observed event, a common
/// covariate dimension, and both levels of treatment and of instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    records: Vec<ObservedRecord>,
    p: usize,
}

impl Cohort {
    pub fn new(records: Vec<ObservedRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::cohort(format!("need at least 2 records, got {}", records.len())));
        }
        let p = records[0].covariates.len();
        for (row, r) in records.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::InvalidRecord {
                    row,
                    message: format!("time {} is not a finite nonnegative number", r.time),
                });
            }
            if r.covariates.len() != p {
                return Err(Error::InvalidRecord {
                    row,
                    message: format!("expected {p} covariates, found {}", r.covariates.len()),
                });
            }
            if let Some(j) = r.covariates.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidRecord {
                    row,
                    message: format!("covariate {} is not finite", j + 1),
                });
            }
        }
        if !records.iter().any(|r| r.event) {
            return Err(Error::cohort("no observed events"));
        }
        for (name, get) in [
            ("instrument", (|r: &ObservedRecord| r.instrument) as fn(&ObservedRecord) -> bool),
            ("treatment", |r: &ObservedRecord| r.treatment),
        ] {
            for level in [false, true] {
                if !records.iter().any(|r| get(r) == level) {
                    return Err(Error::cohort(format!("{name} level {} absent", level as u8)));
                }
            }
        }
        Ok(Self { records, p })
    }

    pub fn records(&self) -> &[ObservedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Covariate dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize) -> &ObservedRecord {
        &self.records[i]
    }

    /// Sub-cohort of the given rows, in the given order. Re-validated.
    pub fn subset(&self, rows: &[usize]) -> Result<Cohort> {
        Cohort::new(rows.iter().map(|&i| self.records[i].clone()).collect())
    }

    pub fn into_records(self) -> Vec<ObservedRecord> {
        self.records
    }

    pub fn event_fraction(&self) -> f64 {
        self.records.iter().filter(|r| r.event).count() as f64 / self.len() as f64
    }
}

/// Column names used when reading and writing CSV files.
///
/// An empty `covariates` list selects every `x<k>` column, ordered by `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSchema {
    pub time: String,
    pub event: String,
    pub treatment: String,
    pub instrument: String,
    pub covariates: Vec<String>,
    pub provider: String,
}

impl Default for CohortSchema {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
            treatment: "a".into(),
            instrument: "z".into(),
            covariates: Vec::new(),
            provider: "provider".into(),
        }
    }
}

struct ColumnIndex {
    time: usize,
    event: usize,
    treatment: usize,
    instrument: Option<usize>,
    provider: Option<usize>,
    covariates: Vec<(String, usize)>,
}

impl CohortSchema {
    fn resolve(&self, headers: &csv::StringRecord, need_instrument: bool, need_provider: bool) -> Result<ColumnIndex> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));

        let covariates = if self.covariates.is_empty() {
            let mut auto: Vec<(u32, String, usize)> = headers
                .iter()
                .enumerate()
                .filter_map(|(i, h)| {
                    let h = h.trim();
                    let k = h.strip_prefix('x')?.parse::<u32>().ok()?;
                    Some((k, h.to_string(), i))
                })
                .collect();
            auto.sort_by_key(|(k, _, _)| *k);
            auto.into_iter().map(|(_, h, i)| (h, i)).collect()
        } else {
            self.covariates.iter().map(|c| Ok((c.clone(), require(c)?))).collect::<Result<Vec<_>>>()?
        };

        Ok(ColumnIndex {
            time: require(&self.time)?,
            event: require(&self.event)?,
            treatment: require(&self.treatment)?,
            instrument: if need_instrument {
                Some(require(&self.instrument)?)
            } else {
                find(&self.instrument)
            },
            provider: if need_provider { Some(require(&self.provider)?) } else { None },
            covariates,
        })
    }
}

fn cell<'a>(rec: &'a csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<&'a str> {
    let v = rec.get(idx).map(str::trim).unwrap_or("");
    if v.is_empty() {
        return Err(Error::InvalidRecord {
            row,
            message: format!("missing value in column `{column}`"),
        });
    }
    Ok(v)
}

fn number(rec: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64> {
    let v = cell(rec, idx, row, column)?;
    v.parse::<f64>().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_string(),
        value: v.to_string(),
    })
}

fn flag(rec: &csv::StringRecord, idx: usize, row: usize, column: &str, what: &str) -> Result<bool> {
    let v = number(rec, idx, row, column)?;
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(Error::InvalidRecord {
            row,
            message: format!("{what} not in {{0,1}} (found {v})"),
        })
    }
}

struct ParsedRow {
    record: ObservedRecord,
    provider: Option<String>,
}

fn parse_rows<R: Read>(reader: R, schema: &CohortSchema, need_instrument: bool, need_provider: bool) -> Result<Vec<ParsedRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = schema.resolve(&headers, need_instrument, need_provider)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let covariates = cols
            .covariates
            .iter()
            .map(|(name, i)| number(&rec, *i, row, name))
            .collect::<Result<Vec<_>>>()?;
        let instrument = match cols.instrument {
            Some(i) if need_instrument => flag(&rec, i, row, &schema.instrument, "instrument")?,
            _ => false,
        };
        let provider = match cols.provider {
            Some(i) => Some(cell(&rec, i, row, &schema.provider)?.to_string()),
            None => None,
        };
        out.push(ParsedRow {
            record: ObservedRecord {
                time: number(&rec, cols.time, row, &schema.time)?,
                event: flag(&rec, cols.event, row, &schema.event, "event")?,
                treatment: flag(&rec, cols.treatment, row, &schema.treatment, "treatment")?,
                covariates,
                instrument,
            },
            provider,
        });
    }
    Ok(out)
}

/// Parse and validate a cohort from any CSV reader. Row order is preserved.
pub fn read_cohort<R: Read>(reader: R, schema: &CohortSchema) -> Result<Cohort> {
    let rows = parse_rows(reader, schema, true, false)?;
    Cohort::new(rows.into_iter().map(|r| r.record).collect())
}

pub fn load_cohort(path: impl AsRef<Path>, schema: &CohortSchema) -> Result<Cohort> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cohort(file, schema)
}

/// Write a cohort as `time,event,a,z,x1..xp` with shortest round-trip floats.
pub fn write_cohort<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "event".into(), "a".into(), "z".into()];
    header.extend((1..=cohort.p()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for r in cohort.records() {
        let mut row = vec![
            r.time.to_string(),
            (r.event as u8).to_string(),
            (r.treatment as u8).to_string(),
            (r.instrument as u8).to_string(),
        ];
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn save_cohort(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cohort(cohort, file)
}

/// A raw provider-level encounter before the instrument is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEncounter {
    pub provider_id: String,
    pub time: f64,
    pub event: bool,
    pub treated: bool,
    pub covariates: Vec<f64>,
}

pub fn read_encounters<R: Read>(reader: R, schema: &CohortSchema) -> Result<Vec<RawEncounter>> {
    parse_rows(reader, schema, false, true)?
        .into_iter()
        .enumerate()
        .map(|(row, r)| {
            let provider_id = r.provider.unwrap_or_default();
            if provider_id.is_empty() {
                return Err(Error::InvalidRecord {
                    row,
                    message: "empty provider id".into(),
                });
            }
            Ok(RawEncounter {
                provider_id,
                time: r.record.time,
                event: r.record.event,
                treated: r.record.treatment,
                covariates: r.record.covariates,
            })
        })
        .collect()
}

pub fn load_encounters(path: impl AsRef<Path>, schema: &CohortSchema) -> Result<Vec<RawEncounter>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_encounters(file, schema)
}

/// Per-provider prescribing summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderSummary {
    pub provider_id: String,
    pub n: usize,
    pub fraction_treated: f64,
    /// `None` when the provider was excluded for having too few encounters.
    pub high_preference: Option<bool>,
}

/// Provider-level assignment of the preference instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceAssignment {
    /// Sorted by provider id.
    pub providers: Vec<ProviderSummary>,
    pub excluded_rows: usize,
}

impl PreferenceAssignment {
    pub fn level(&self, provider_id: &str) -> Option<bool> {
        self.providers
            .binary_search_by(|p| p.provider_id.as_str().cmp(provider_id))
            .ok()
            .and_then(|i| self.providers[i].high_preference)
    }
}

/// Compute provider prescribing fractions and dichotomize them.
///
/// Providers with fewer than `min_patients` encounters are excluded; the
/// remaining ones are high preference iff their fraction treated is
/// strictly above `threshold`.
pub fn assign_preference(encounters: &[RawEncounter], threshold: f64, min_patients: usize) -> Result<PreferenceAssignment> {
    if encounters.is_empty() {
        return Err(Error::invalid("no encounters"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid("threshold must be in (0,1)"));
    }
    if min_patients == 0 {
        return Err(Error::invalid("min_patients must be positive"));
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in encounters {
        let c = counts.entry(e.provider_id.as_str()).or_default();
        c.0 += 1;
        c.1 += e.treated as usize;
    }
    let mut excluded_rows = 0;
    let providers = counts
        .into_iter()
        .map(|(id, (n, treated))| {
            let fraction_treated = treated as f64 / n as f64;
            let high_preference = if n < min_patients {
                excluded_rows += n;
                None
            } else {
                Some(fraction_treated > threshold)
            };
            ProviderSummary {
                provider_id: id.to_string(),
                n,
                fraction_treated,
                high_preference,
            }
        })
        .collect();
    Ok(PreferenceAssignment { providers, excluded_rows })
}

/// Build an analysis cohort whose instrument is the provider's dichotomized
/// prescribing preference. Kept encounters retain their input order.
pub fn build_preference_iv(encounters: &[RawEncounter], threshold: f64, min_patients: usize) -> Result<(Cohort, PreferenceAssignment)> {
    let assignment = assign_preference(encounters, threshold, min_patients)?;
    let records: Vec<ObservedRecord> = encounters
        .iter()
        .filter_map(|e| {
            assignment.level(&e.provider_id).map(|z| ObservedRecord {
                time: e.time,
                event: e.event,
                treatment: e.treated,
                covariates: e.covariates.clone(),
                instrument: z,
            })
        })
        .collect();
    if records.is_empty() {
        return Err(Error::cohort("all providers excluded; cohort is empty"));
    }
    let cohort = Cohort::new(records)?;
    Ok((cohort, assignment))
}

/// Linear-interpolation sample quantile of a sorted slice (the "type 7" rule).
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The `q`-quantile of observed follow-up times.
pub fn event_time_quantile(cohort: &Cohort, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile {q} outside (0,1)")));
    }
    let mut times: Vec<f64> = cohort.records().iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&times, q))
}
