//! Publication records, ingestion and counting scopes.
//!
//! A [`Corpus`] is validated once on construction and never mutated; every
//! filter returns a new corpus. Country codes are opaque uppercase tokens and
//! entities (single countries or country sets) come from configuration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input/output encoding of a publications file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Guess from a file extension; anything other than `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => RecordFormat::Jsonl,
            _ => RecordFormat::Csv,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" => Ok(RecordFormat::Jsonl),
            other => Err(Error::Config(format!("unknown record format {other:?}"))),
        }
    }
}

/// One publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub id: String,
    pub year: i32,
    pub citations: u64,
    /// Affiliation countries in source order; non-empty and duplicate-free.
    pub countries: Vec<String>,
}

fn valid_country(code: &str) -> bool {
    !code.is_empty()
        && code
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
}

impl PublicationRecord {
    pub fn new(
        id: impl Into<String>,
        year: i32,
        citations: u64,
        countries: Vec<String>,
    ) -> std::result::Result<Self, String> {
        let id = id.into();
        if id.is_empty() {
            return Err("empty id".into());
        }
        if countries.is_empty() {
            return Err("empty country set".into());
        }
        let mut seen = HashSet::with_capacity(countries.len());
        for c in &countries {
            if !valid_country(c) {
                return Err(format!("invalid country code {c:?}"));
            }
            if !seen.insert(c.as_str()) {
                return Err(format!("duplicate country code {c:?}"));
            }
        }
        Ok(Self {
            id,
            year,
            citations,
            countries,
        })
    }

    pub fn has_country(&self, code: &str) -> bool {
        self.countries.iter().any(|c| c == code)
    }
}

/// A named country or set of countries (e.g. a single nation, or a bloc).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDefinition {
    pub name: String,
    members: BTreeSet<String>,
}

impl EntityDefinition {
    pub fn new<I, S>(name: impl Into<String>, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let members: BTreeSet<String> = members.into_iter().map(Into::into).collect();
        if members.is_empty() {
            return Err(Error::Config(format!("entity {name:?} has no members")));
        }
        if let Some(bad) = members.iter().find(|c| !valid_country(c)) {
            return Err(Error::Config(format!(
                "entity {name:?}: invalid country code {bad:?}"
            )));
        }
        Ok(Self { name, members })
    }

    /// Entity containing every country that appears in `corpus`.
    pub fn all_countries(name: impl Into<String>, corpus: &Corpus) -> Result<Self> {
        let members: BTreeSet<&str> = corpus
            .records()
            .iter()
            .flat_map(|r| r.countries.iter().map(String::as_str))
            .collect();
        Self::new(name, members)
    }

    pub fn members(&self) -> &BTreeSet<String> {
        &self.members
    }

    pub fn contains(&self, code: &str) -> bool {
        self.members.contains(code)
    }

    pub fn is_disjoint(&self, other: &EntityDefinition) -> bool {
        self.members.is_disjoint(&other.members)
    }
}

/// Entity definitions file: a JSON object mapping entity name to an array of
/// country codes. Entities come back sorted by name.
pub fn read_entities(reader: impl Read) -> Result<Vec<EntityDefinition>> {
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_reader(reader)?;
    raw.into_iter()
        .map(|(name, members)| EntityDefinition::new(name, members))
        .collect()
}

/// Counting scope of a record relative to an entity (and optional partner).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Scope {
    /// Every country of the record belongs to the named entity.
    Domestic(String),
    /// The record touches both entities and nothing outside their union.
    CollaborationPair(String, String),
    External,
}

/// Classify `record` against `entity`, and against `partner` when given.
///
/// With a partner, records domestic to the partner are reported as
/// `Domestic(partner)`.
pub fn classify_scope(
    record: &PublicationRecord,
    entity: &EntityDefinition,
    partner: Option<&EntityDefinition>,
) -> Result<Scope> {
    if let Some(p) = partner {
        if !entity.is_disjoint(p) {
            return Err(Error::Config(format!(
                "partner {:?} overlaps entity {:?}",
                p.name, entity.name
            )));
        }
    }
    Ok(classify_unchecked(record, entity, partner))
}

fn classify_unchecked(
    record: &PublicationRecord,
    entity: &EntityDefinition,
    partner: Option<&EntityDefinition>,
) -> Scope {
    let in_entity = record.countries.iter().filter(|c| entity.contains(c)).count();
    if in_entity == record.countries.len() {
        return Scope::Domestic(entity.name.clone());
    }
    let Some(partner) = partner else {
        return Scope::External;
    };
    let in_partner = record
        .countries
        .iter()
        .filter(|c| partner.contains(c))
        .count();
    if in_partner == record.countries.len() {
        Scope::Domestic(partner.name.clone())
    } else if in_entity > 0 && in_partner > 0 && in_entity + in_partner == record.countries.len() {
        Scope::CollaborationPair(entity.name.clone(), partner.name.clone())
    } else {
        Scope::External
    }
}

/// Which records [`Corpus::subset`] keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScopeFilter {
    /// No scope restriction.
    Any,
    Domestic,
    /// Pair papers between the entity and this partner.
    Collaboration(EntityDefinition),
    /// Records that are not domestic to the entity.
    External,
}

/// Inclusive year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearFilter {
    pub from: i32,
    pub to: i32,
}

impl YearFilter {
    pub fn single(year: i32) -> Self {
        Self {
            from: year,
            to: year,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        self.from <= year && year <= self.to
    }
}

impl FromStr for YearFilter {
    type Err = Error;

    /// `2014` or `2010-2014`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid year filter {s:?}"));
        let (a, b) = match s.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), s.trim()),
        };
        let from: i32 = a.parse().map_err(|_| bad())?;
        let to: i32 = b.parse().map_err(|_| bad())?;
        if from > to {
            return Err(bad());
        }
        Ok(Self { from, to })
    }
}

impl fmt::Display for YearFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.from == self.to {
            write!(f, "{}", self.from)
        } else {
            write!(f, "{}-{}", self.from, self.to)
        }
    }
}

/// An ordered, validated collection of publication records with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    label: String,
    records: Vec<PublicationRecord>,
}

impl Corpus {
    pub fn new(label: impl Into<String>, records: Vec<PublicationRecord>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: r.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            label: label.into(),
            records,
        })
    }

    // Records taken from an already validated corpus keep their invariants.
    fn from_validated(label: String, records: Vec<PublicationRecord>) -> Self {
        Self { label, records }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn records(&self) -> &[PublicationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Smallest and largest year present, `None` when empty.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.records.iter().map(|r| r.year).min()?;
        let max = self.records.iter().map(|r| r.year).max()?;
        Some((min, max))
    }

    /// Distinct years present, ascending.
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.records.iter().map(|r| r.year).collect();
        set.into_iter().collect()
    }

    pub fn citations(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.citations)
    }

    /// Records of `entity` under `filter`, restricted to `years` when given.
    /// An empty result is not an error.
    pub fn subset(
        &self,
        entity: &EntityDefinition,
        filter: &ScopeFilter,
        years: Option<YearFilter>,
    ) -> Result<Corpus> {
        let partner = match filter {
            ScopeFilter::Collaboration(p) => {
                if !entity.is_disjoint(p) {
                    return Err(Error::Config(format!(
                        "partner {:?} overlaps entity {:?}",
                        p.name, entity.name
                    )));
                }
                Some(p)
            }
            _ => None,
        };
        let records = self
            .records
            .iter()
            .filter(|r| years.is_none_or(|y| y.contains(r.year)))
            .filter(|r| {
                let scope = classify_unchecked(r, entity, partner);
                match filter {
                    ScopeFilter::Any => true,
                    ScopeFilter::Domestic => {
                        matches!(scope, Scope::Domestic(ref n) if *n == entity.name)
                    }
                    ScopeFilter::Collaboration(_) => matches!(scope, Scope::CollaborationPair(..)),
                    ScopeFilter::External => {
                        !matches!(scope, Scope::Domestic(ref n) if *n == entity.name)
                    }
                }
            })
            .cloned()
            .collect();
        let label = match filter {
            ScopeFilter::Collaboration(p) => format!("{} and {}", entity.name, p.name),
            _ => entity.name.clone(),
        };
        Ok(Corpus::from_validated(label, records))
    }

    /// Keep only records whose year lies in `years`.
    pub fn filter_years(&self, years: YearFilter) -> Corpus {
        let records = self
            .records
            .iter()
            .filter(|r| years.contains(r.year))
            .cloned()
            .collect();
        Corpus::from_validated(format!("{} [{years}]", self.label), records)
    }

    /// Concatenate corpora, rejecting ids that appear in more than one.
    pub fn concat(label: impl Into<String>, parts: Vec<Corpus>) -> Result<Corpus> {
        let records = parts.into_iter().flat_map(|c| c.records).collect();
        Corpus::new(label, records)
    }
}

fn ingest_err(line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        line,
        message: message.into(),
    }
}

fn parse_year(s: &str, line: usize) -> Result<i32> {
    s.parse()
        .map_err(|_| ingest_err(line, format!("year {s:?} is not an integer")))
}

fn parse_citations(s: &str, line: usize) -> Result<u64> {
    s.parse().map_err(|_| {
        ingest_err(
            line,
            format!("citations {s:?} is not a non-negative integer"),
        )
    })
}

/// Read publication records. CSV sources need a header naming `id`, `year`,
/// `citations` and `countries`; countries inside one field are `|`-separated.
/// Lines starting with `#` are skipped in both formats. Error line numbers
/// are 1-based physical lines of the source.
pub fn ingest_records(
    label: impl Into<String>,
    source: impl Read,
    format: RecordFormat,
) -> Result<Corpus> {
    let records = match format {
        RecordFormat::Csv => read_csv(source)?,
        RecordFormat::Jsonl => read_jsonl(source)?,
    };
    let mut ids = HashSet::with_capacity(records.len());
    for (line, r) in &records {
        if !ids.insert(r.id.as_str()) {
            return Err(Error::DuplicateId {
                id: r.id.clone(),
                line: *line,
            });
        }
    }
    let records = records.into_iter().map(|(_, r)| r).collect();
    Ok(Corpus::from_validated(label.into(), records))
}

/// [`ingest_records`] from a file path, format chosen by extension unless given.
pub fn ingest_path(path: &Path, format: Option<RecordFormat>) -> Result<Corpus> {
    let format = format.unwrap_or_else(|| RecordFormat::from_path(path));
    let file = std::fs::File::open(path)?;
    ingest_records(
        path.display().to_string(),
        std::io::BufReader::new(file),
        format,
    )
}

const CSV_COLUMNS: [&str; 4] = ["id", "year", "citations", "countries"];

fn read_csv(source: impl Read) -> Result<Vec<(usize, PublicationRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ingest_err(1, format!("header is missing column {name:?}")))?;
    }

    let mut out = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut row).map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            ingest_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let year = parse_year(field(1), line)?;
        let citations = parse_citations(field(2), line)?;
        let countries_field = field(3);
        let countries = if countries_field.is_empty() {
            Vec::new()
        } else {
            countries_field.split('|').map(str::to_owned).collect()
        };
        let record = PublicationRecord::new(field(0), year, citations, countries)
            .map_err(|m| ingest_err(line, m))?;
        out.push((line, record));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    year: i32,
    citations: i64,
    countries: Vec<String>,
}

fn read_jsonl(source: impl Read) -> Result<Vec<(usize, PublicationRecord)>> {
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let raw: JsonRecord =
            serde_json::from_str(text).map_err(|e| ingest_err(line_no, e.to_string()))?;
        let citations = u64::try_from(raw.citations).map_err(|_| {
            ingest_err(
                line_no,
                format!("citations {} is not a non-negative integer", raw.citations),
            )
        })?;
        let record = PublicationRecord::new(raw.id, raw.year, citations, raw.countries)
            .map_err(|m| ingest_err(line_no, m))?;
        out.push((line_no, record));
    }
    Ok(out)
}

/// Write records in the canonical publications format.
pub fn write_records(corpus: &Corpus, sink: impl Write, format: RecordFormat) -> Result<()> {
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(CSV_COLUMNS)?;
            for r in corpus.records() {
                w.write_record([
                    r.id.as_str(),
                    &r.year.to_string(),
                    &r.citations.to_string(),
                    &r.countries.join("|"),
                ])?;
            }
            w.flush()?;
        }
        RecordFormat::Jsonl => {
            let mut sink = std::io::BufWriter::new(sink);
            for r in corpus.records() {
                serde_json::to_writer(&mut sink, r)?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
    }
    Ok(())
}
