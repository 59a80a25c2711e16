//! Streaming ingestion of Wikibase JSON entity-document dumps.
//!
//! A dump carries one entity document per line, either as bare JSON lines
//! or wrapped in the classic array framing (a leading `[` line, per-line
//! trailing commas, a closing `]` line). Both framings are accepted. This
//! module decodes lines into [`EntityDocument`]s, turns documents into
//! model [`Statement`]s, assembles whole [`WikibaseGraph`]s, and drives
//! single-pass *local* validation in which each entity is checked against
//! one shape using only the statements on its own line.
//!
//! Decoding is deliberately lossy in documented ways: `somevalue` and
//! `novalue` snaks are dropped (counted), references arrays are ignored
//! (counted), and datavalue kinds without a model mapping follow the
//! [`UnsupportedSnakPolicy`]. Labels, descriptions, aliases and sitelinks
//! are skipped silently — they play no role in validation.

use std::io::{self, BufRead};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Schema, ShapeLabel};
use crate::model::{
    DataValue, EntityId, EntityKind, GraphError, ModelError, Qualifier, Rank, Statement, Value,
    WikibaseGraph,
};
use crate::validator::{CompileError, Outcome, UnknownShape, Validator, ValidatorOptions};

/// Lines per parallel parsing batch. Output order is restored within each
/// batch, so records are always emitted in input order.
const BATCH_LINES: usize = 256;

/// How much of the dump an ingest run materializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Build one [`WikibaseGraph`] holding every decoded statement.
    #[default]
    FullGraph,
    /// Keep only one entity's statements at a time and validate in-stream.
    LocalOnly,
}

/// What to do with `value` snaks whose datavalue kind has no model mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnsupportedSnakPolicy {
    /// Drop the snak and count it.
    #[default]
    Skip,
    /// Abort the run at the offending line.
    Error,
}

/// Knobs for an ingest run.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub mode: IngestMode,
    pub on_unsupported_snak: UnsupportedSnakPolicy,
    /// Upper bound on a single line, in bytes. Longer lines are rejected
    /// before JSON parsing.
    pub max_line_bytes: usize,
    /// Abort on the first malformed line instead of counting and skipping.
    pub strict: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            mode: IngestMode::FullGraph,
            on_unsupported_snak: UnsupportedSnakPolicy::Skip,
            max_line_bytes: 256 << 20,
            strict: false,
        }
    }
}

/// Counters accumulated over an ingest run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestStats {
    /// Physical lines read, framing included.
    pub lines: u64,
    /// Entity documents decoded.
    pub entities: u64,
    /// Statements materialized into a graph.
    pub statements: u64,
    /// `somevalue` / `novalue` snaks dropped.
    pub skipped_snaks: u64,
    /// Value snaks dropped under [`UnsupportedSnakPolicy::Skip`].
    pub unsupported_snaks: u64,
    /// Reference records ignored (the model keeps qualifiers only).
    pub references_ignored: u64,
    /// Statements dropped because their id was already present.
    pub duplicate_statements: u64,
    /// Lines counted and skipped as malformed (non-strict mode only).
    pub malformed_lines: u64,
}

impl IngestStats {
    pub fn merge(&mut self, other: &IngestStats) {
        self.lines += other.lines;
        self.entities += other.entities;
        self.statements += other.statements;
        self.skipped_snaks += other.skipped_snaks;
        self.unsupported_snaks += other.unsupported_snaks;
        self.references_ignored += other.references_ignored;
        self.duplicate_statements += other.duplicate_statements;
        self.malformed_lines += other.malformed_lines;
    }
}

/// Why a single dump line was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("line exceeds the {limit}-byte limit ({got} bytes)")]
    Oversize { got: usize, limit: usize },
    #[error("malformed entity line: {0}")]
    Malformed(String),
    #[error("unsupported datavalue kind `{0}`")]
    UnsupportedSnak(String),
}

/// Why an ingest run aborted.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Line { line: usize, source: LineError },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    UnknownShape(#[from] UnknownShape),
}

/// One decoded statement record: the mainsnak value, qualifier pairs, rank
/// and the dump's statement id. Records without an id get one synthesized
/// when statements are built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub statement_id: Option<String>,
    pub value: Value,
    pub qualifiers: Vec<Qualifier>,
    pub rank: Rank,
}

/// One entity's local information: its id and decoded claims grouped by
/// property. The dump's `type` field is checked against the id's kind
/// during parsing and not stored separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityDocument {
    id: EntityId,
    claims: IndexMap<EntityId, Vec<Claim>>,
}

impl EntityDocument {
    pub fn new(id: EntityId) -> Self {
        EntityDocument { id, claims: IndexMap::new() }
    }

    /// Append a claim under `property`, which must be a property id.
    pub fn push_claim(&mut self, property: EntityId, claim: Claim) -> Result<(), ModelError> {
        if !property.is_property() {
            return Err(ModelError::NotAProperty(property));
        }
        self.claims.entry(property).or_default().push(claim);
        Ok(())
    }

    pub fn id(&self) -> EntityId {
        self.id
    }

    pub fn entity_type(&self) -> EntityKind {
        self.id.kind()
    }

    /// Claims grouped by property, in dump order.
    pub fn claims(&self) -> impl Iterator<Item = (EntityId, &[Claim])> {
        self.claims.iter().map(|(p, claims)| (*p, claims.as_slice()))
    }

    pub fn claim_count(&self) -> usize {
        self.claims.values().map(Vec::len).sum()
    }
}

// ---------------------------------------------------------------------------
// Line decoding
// ---------------------------------------------------------------------------

/// Raw dump record shapes. Unknown fields (labels, descriptions, sitelinks,
/// `qualifiers-order`, …) are ignored by serde.
#[derive(Deserialize)]
struct RawEntity {
    id: String,
    #[serde(rename = "type")]
    entity_type: Option<String>,
    #[serde(default)]
    claims: IndexMap<String, Vec<RawClaim>>,
}

#[derive(Deserialize)]
struct RawClaim {
    id: Option<String>,
    mainsnak: RawSnak,
    #[serde(default)]
    qualifiers: IndexMap<String, Vec<RawSnak>>,
    rank: Option<String>,
    #[serde(default)]
    references: Vec<serde_json::Value>,
}

/// The snak's own `property` field is ignored: the enclosing claims or
/// qualifiers map key is authoritative for the property id.
#[derive(Deserialize)]
struct RawSnak {
    snaktype: String,
    datavalue: Option<RawDatavalue>,
}

#[derive(Deserialize)]
struct RawDatavalue {
    #[serde(rename = "type")]
    kind: String,
    value: serde_json::Value,
}

enum DecodedSnak {
    Value(Value),
    /// `somevalue` / `novalue`: declared out of scope, always dropped.
    Missing,
    /// Unmapped datavalue kind under [`UnsupportedSnakPolicy::Skip`].
    Unsupported,
}

fn malformed(msg: impl Into<String>) -> LineError {
    LineError::Malformed(msg.into())
}

impl From<ModelError> for LineError {
    fn from(err: ModelError) -> Self {
        malformed(err.to_string())
    }
}

fn decode_snak(snak: &RawSnak, policy: UnsupportedSnakPolicy) -> Result<DecodedSnak, LineError> {
    match snak.snaktype.as_str() {
        "somevalue" | "novalue" => return Ok(DecodedSnak::Missing),
        "value" => {}
        other => return Err(malformed(format!("unknown snaktype `{other}`"))),
    }
    let dv = snak
        .datavalue
        .as_ref()
        .ok_or_else(|| malformed("value snak without a datavalue"))?;
    let v = &dv.value;
    let value = match dv.kind.as_str() {
        "wikibase-entityid" => Value::EntityRef(decode_entity_id(v)?),
        "time" => {
            let timestamp = field_str(v, "time")?;
            let precision = v
                .get("precision")
                .and_then(serde_json::Value::as_u64)
                .filter(|p| *p <= u8::MAX as u64)
                .ok_or_else(|| malformed("time value without a valid precision"))?;
            Value::Data(DataValue::time(timestamp, precision as u8)?)
        }
        "string" => {
            let s = v.as_str().ok_or_else(|| malformed("string value is not a JSON string"))?;
            Value::Data(DataValue::simple(crate::model::BuiltinDatatype::String, s)?)
        }
        "quantity" => {
            let amount = field_str(v, "amount")?;
            let unit = match v.get("unit").and_then(serde_json::Value::as_str) {
                None | Some("1") => None,
                Some(iri) => Some(decode_unit_entity(iri)?),
            };
            Value::Data(DataValue::quantity(amount, unit)?)
        }
        "monolingualtext" => {
            let text = field_str(v, "text")?;
            let language = field_str(v, "language")?;
            Value::Data(DataValue::monolingual(text, language)?)
        }
        "globecoordinate" => {
            let lat = field_f64(v, "latitude")?;
            let lon = field_f64(v, "longitude")?;
            Value::Data(DataValue::coordinate(lat, lon))
        }
        other => {
            return match policy {
                UnsupportedSnakPolicy::Skip => Ok(DecodedSnak::Unsupported),
                UnsupportedSnakPolicy::Error => Err(LineError::UnsupportedSnak(other.to_string())),
            }
        }
    };
    Ok(DecodedSnak::Value(value))
}

fn field_str<'v>(v: &'v serde_json::Value, key: &str) -> Result<&'v str, LineError> {
    v.get(key)
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| malformed(format!("datavalue without a string `{key}` field")))
}

fn field_f64(v: &serde_json::Value, key: &str) -> Result<f64, LineError> {
    v.get(key)
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| malformed(format!("datavalue without a numeric `{key}` field")))
}

/// Entity-id datavalues occur in two forms: `{"id":"Q42944"}` and the
/// older `{"entity-type":"item","numeric-id":42944}`.
fn decode_entity_id(v: &serde_json::Value) -> Result<EntityId, LineError> {
    if let Some(id) = v.get("id").and_then(serde_json::Value::as_str) {
        return Ok(id.parse()?);
    }
    let kind = v.get("entity-type").and_then(serde_json::Value::as_str);
    let n = v.get("numeric-id").and_then(serde_json::Value::as_u64).filter(|n| *n >= 1);
    match (kind, n) {
        (Some("item"), Some(n)) => Ok(EntityId::item(n)),
        (Some("property"), Some(n)) => Ok(EntityId::property(n)),
        _ => Err(malformed("entity-id value without `id` or `entity-type`/`numeric-id`")),
    }
}

/// Quantity units are either the literal `"1"` (unitless, mapped to `None`
/// before this is called) or a concept IRI ending in the unit's entity id.
fn decode_unit_entity(iri: &str) -> Result<EntityId, LineError> {
    iri.rsplit('/')
        .next()
        .and_then(|tail| tail.parse().ok())
        .ok_or_else(|| malformed(format!("quantity unit `{iri}` is not an entity IRI")))
}

fn parse_property_key(key: &str) -> Result<EntityId, LineError> {
    let id: EntityId = key.parse()?;
    if !id.is_property() {
        return Err(malformed(format!("claims key `{key}` is not a property id")));
    }
    Ok(id)
}

/// Decode one dump line into an [`EntityDocument`].
///
/// Returns `Ok(None)` for framing lines (`[`, `]`, `,`, blank); a trailing
/// comma after the entity object is stripped. Snak-level counters
/// (`skipped_snaks`, `unsupported_snaks`, `references_ignored`) accumulate
/// into `stats`; line- and entity-level counting is the caller's job.
pub fn parse_entity_line(
    line: &str,
    options: &IngestOptions,
    stats: &mut IngestStats,
) -> Result<Option<EntityDocument>, LineError> {
    if line.len() > options.max_line_bytes {
        return Err(LineError::Oversize { got: line.len(), limit: options.max_line_bytes });
    }
    let mut body = line.trim();
    if matches!(body, "" | "[" | "]" | ",") {
        return Ok(None);
    }
    body = body.strip_suffix(',').map(str::trim_end).unwrap_or(body);

    let raw: RawEntity = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let id: EntityId = raw.id.parse()?;
    match (raw.entity_type.as_deref(), id.kind()) {
        (None, _) | (Some("item"), EntityKind::Item) | (Some("property"), EntityKind::Property) => {}
        (Some(ty @ ("item" | "property")), _) => {
            return Err(malformed(format!("entity type `{ty}` disagrees with id `{}`", raw.id)))
        }
        (Some(other), _) => return Err(malformed(format!("unknown entity type `{other}`"))),
    }

    let mut doc = EntityDocument::new(id);
    for (key, raw_claims) in raw.claims {
        let property = parse_property_key(&key)?;
        for rc in raw_claims {
            stats.references_ignored += rc.references.len() as u64;
            let value = match decode_snak(&rc.mainsnak, options.on_unsupported_snak)? {
                DecodedSnak::Value(v) => v,
                DecodedSnak::Missing => {
                    stats.skipped_snaks += 1;
                    continue;
                }
                DecodedSnak::Unsupported => {
                    stats.unsupported_snaks += 1;
                    continue;
                }
            };
            let mut qualifiers = Vec::new();
            for (qkey, snaks) in rc.qualifiers {
                let qprop = parse_property_key(&qkey)?;
                for snak in snaks {
                    match decode_snak(&snak, options.on_unsupported_snak)? {
                        DecodedSnak::Value(v) => {
                            qualifiers.push(Qualifier::new(qprop, v).expect("key is a property"))
                        }
                        DecodedSnak::Missing => stats.skipped_snaks += 1,
                        DecodedSnak::Unsupported => stats.unsupported_snaks += 1,
                    }
                }
            }
            let rank = match rc.rank.as_deref() {
                None | Some("normal") => Rank::Normal,
                Some("preferred") => Rank::Preferred,
                Some("deprecated") => Rank::Deprecated,
                Some(other) => return Err(malformed(format!("unknown rank `{other}`"))),
            };
            doc.push_claim(property, Claim { statement_id: rc.id, value, qualifiers, rank })
                .expect("key is a property");
        }
    }
    Ok(Some(doc))
}

// ---------------------------------------------------------------------------
// Documents to statements
// ---------------------------------------------------------------------------

/// One [`Statement`] per claim, in dump order. Statement ids come from the
/// dump record; records without one get `<subject>$synth<n>` with `n`
/// counting synthesized ids within the document. Qualifier pairs keep the
/// model's set semantics: the same property may appear with several values,
/// identical (property, value) duplicates collapse.
pub fn doc_to_statements(doc: &EntityDocument) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut synthesized = 0usize;
    for (property, claims) in doc.claims() {
        for claim in claims {
            let statement_id = claim.statement_id.clone().unwrap_or_else(|| {
                synthesized += 1;
                format!("{}$synth{synthesized}", doc.id())
            });
            let mut st = Statement::new(statement_id, doc.id(), property, claim.value.clone())
                .expect("document claims are keyed by property ids");
            for q in &claim.qualifiers {
                st = st
                    .with_qualifier(q.property(), q.value().clone())
                    .expect("qualifier properties are checked at decode time");
            }
            out.push(st.with_rank(claim.rank));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Batched streaming driver
// ---------------------------------------------------------------------------

/// Read lines in batches, decode (and `map`) them on parallel workers, and
/// `fold` the results sequentially in input order.
///
/// Malformed lines are counted and skipped, or abort the run under
/// `strict`; [`LineError::UnsupportedSnak`] always aborts (the policy that
/// produces it is an explicit request for hard failure).
fn drive<R, T, F, G>(
    reader: R,
    options: &IngestOptions,
    map: F,
    mut fold: G,
) -> Result<IngestStats, IngestError>
where
    R: BufRead,
    T: Send,
    F: Fn(EntityDocument, &mut IngestStats) -> Result<T, LineError> + Sync,
    G: FnMut(usize, T, &mut IngestStats) -> Result<(), IngestError>,
{
    let mut stats = IngestStats::default();
    let mut line_no = 0usize;
    let mut lines = reader.lines();
    loop {
        let mut batch = Vec::with_capacity(BATCH_LINES);
        for line in lines.by_ref().take(BATCH_LINES) {
            line_no += 1;
            batch.push((line_no, line?));
        }
        if batch.is_empty() {
            return Ok(stats);
        }
        stats.lines += batch.len() as u64;
        let results: Vec<_> = batch
            .par_iter()
            .map(|(n, line)| {
                let mut local = IngestStats::default();
                let out = parse_entity_line(line, options, &mut local)
                    .and_then(|doc| doc.map(|d| map(d, &mut local)).transpose());
                (*n, out, local)
            })
            .collect();
        for (n, out, local) in results {
            stats.merge(&local);
            match out {
                Ok(Some(item)) => {
                    stats.entities += 1;
                    fold(n, item, &mut stats)?;
                }
                Ok(None) => {}
                Err(source) => {
                    if options.strict || matches!(source, LineError::UnsupportedSnak(_)) {
                        return Err(IngestError::Line { line: n, source });
                    }
                    stats.malformed_lines += 1;
                }
            }
        }
    }
}

/// Load a whole dump into one graph.
///
/// Lines are parsed on parallel workers and merged by a single writer, so
/// statement order matches the dump. Duplicate statement ids are counted
/// and dropped (aborting under `strict`).
pub fn load_graph(
    reader: impl BufRead,
    options: &IngestOptions,
) -> Result<(WikibaseGraph, IngestStats), IngestError> {
    let mut graph = WikibaseGraph::new();
    let stats = drive(
        reader,
        options,
        |doc, _| Ok(doc_to_statements(&doc)),
        |n, statements, stats| {
            for st in statements {
                match graph.add_statement(st) {
                    Ok(()) => stats.statements += 1,
                    Err(GraphError::DuplicateStatementId(id)) => {
                        if options.strict {
                            return Err(IngestError::Line {
                                line: n,
                                source: malformed(format!("duplicate statement id `{id}`")),
                            });
                        }
                        stats.duplicate_statements += 1;
                    }
                }
            }
            Ok(())
        },
    )?;
    Ok((graph, stats))
}

/// One line of a streaming validation report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRecord {
    pub entity: EntityId,
    pub shape: ShapeLabel,
    pub outcome: Outcome,
    /// True when the verdict leaned on an assumed cross-entity reference.
    pub approx: bool,
}

#[derive(Serialize)]
struct RawRecord<'a> {
    entity: String,
    shape: &'a str,
    status: &'static str,
    approx: bool,
}

impl ReportRecord {
    /// The JSON-lines encoding:
    /// `{"entity":"Q80","shape":"Person","status":"conforms","approx":false}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RawRecord {
            entity: self.entity.to_string(),
            shape: self.shape.name(),
            status: self.outcome.as_str(),
            approx: self.approx,
        })
        .expect("record serialization is infallible")
    }
}

/// Validate every entity line against one shape using only its own
/// statements, emitting one [`ReportRecord`] per entity in input order.
///
/// Verdicts are local: conditions and the focus entity evaluate exactly,
/// cross-entity shape references are assumed to hold and flagged via
/// [`ReportRecord::approx`]. A local `fails` is always also a full-graph
/// `fails`; the approximation only ever accepts more.
pub fn stream_validate(
    reader: impl BufRead,
    schema: &Schema,
    target_shape: &ShapeLabel,
    options: &IngestOptions,
    validator_options: ValidatorOptions,
    mut emit: impl FnMut(ReportRecord),
) -> Result<IngestStats, IngestError> {
    let validator = Validator::new(schema, validator_options)?;
    if schema.get(target_shape).is_none() {
        return Err(UnknownShape(target_shape.clone()).into());
    }
    drive(
        reader,
        options,
        |doc, local| {
            let mut neighborhood = WikibaseGraph::new();
            for st in doc_to_statements(&doc) {
                match neighborhood.add_statement(st) {
                    Ok(()) => local.statements += 1,
                    Err(GraphError::DuplicateStatementId(id)) => {
                        if options.strict {
                            return Err(malformed(format!("duplicate statement id `{id}`")));
                        }
                        local.duplicate_statements += 1;
                    }
                }
            }
            let verdict = validator
                .validate_local(&neighborhood, doc.id(), target_shape)
                .expect("target shape existence is checked before streaming");
            Ok(ReportRecord {
                entity: doc.id(),
                shape: target_shape.clone(),
                outcome: verdict.outcome,
                approx: verdict.approximate,
            })
        },
        |_, record, _| {
            emit(record);
            Ok(())
        },
    )
}

/// Read a JSON-lines validation report.
///
/// Accepts both the streaming records written by [`stream_validate`]
/// (`entity` + `approx` fields) and full-graph report rows as printed by
/// the CLI's JSON format (`node` + `trace` fields, `approx` defaulting to
/// false). Blank lines are skipped.
pub fn read_report(reader: impl BufRead) -> Result<Vec<ReportRecord>, IngestError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        let record =
            parse_report_line(body).map_err(|source| IngestError::Line { line: idx + 1, source })?;
        records.push(record);
    }
    Ok(records)
}

fn parse_report_line(body: &str) -> Result<ReportRecord, LineError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let entity: EntityId = v
        .get("entity")
        .or_else(|| v.get("node"))
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| malformed("report record without an `entity` or `node` field"))?
        .parse()?;
    let shape = v
        .get("shape")
        .and_then(serde_json::Value::as_str)
        .filter(|s| !s.is_empty())
        .map(ShapeLabel::new)
        .ok_or_else(|| malformed("report record without a `shape` field"))?;
    let status = field_str(&v, "status")
        .map_err(|_| malformed("report record without a `status` field"))?;
    let outcome = match status {
        "conforms" => Outcome::Conforming,
        "fails" => Outcome::NonConforming,
        "limit" => Outcome::EngineLimit,
        other => return Err(malformed(format!("unknown status `{other}`"))),
    };
    let approx = v.get("approx").and_then(serde_json::Value::as_bool).unwrap_or(false);
    Ok(ReportRecord { entity, shape, outcome, approx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture::*;
    use crate::model::BuiltinDatatype;

    fn parse_one(line: &str) -> EntityDocument {
        parse_one_with(line, &IngestOptions::default()).0.expect("not a framing line")
    }

    fn parse_one_with(line: &str, options: &IngestOptions) -> (Option<EntityDocument>, IngestStats) {
        let mut stats = IngestStats::default();
        let doc = parse_entity_line(line, options, &mut stats).expect("line should decode");
        (doc, stats)
    }

    fn parse_err(line: &str) -> LineError {
        let mut stats = IngestStats::default();
        parse_entity_line(line, &IngestOptions::default(), &mut stats)
            .expect_err("line should be rejected")
    }

    /// The minimal accepted record shape, field names bit-exact.
    const MINIMAL: &str = concat!(
        r#"{"id":"Q80","type":"item","claims":{"P108":[{"id":"Q80$4fe7940f","mainsnak":"#,
        r#"{"snaktype":"value","property":"P108","datavalue":{"type":"wikibase-entityid","value":{"id":"Q42944"}}},"#,
        r#""qualifiers":{"P580":[{"snaktype":"value","property":"P580","datavalue":"#,
        r#"{"type":"time","value":{"time":"+1984-01-01T00:00:00Z","precision":9}}}]},"rank":"normal"}]}}"#,
    );

    #[test]
    fn the_minimal_record_shape_decodes() {
        let doc = parse_one(MINIMAL);
        assert_eq!(doc.id(), TIM_BL);
        assert_eq!(doc.entity_type(), EntityKind::Item);
        assert_eq!(doc.claim_count(), 1);
        let (property, claims) = doc.claims().next().unwrap();
        assert_eq!(property, EMPLOYER);
        let claim = &claims[0];
        assert_eq!(claim.statement_id.as_deref(), Some("Q80$4fe7940f"));
        assert_eq!(claim.value, Value::EntityRef(CERN));
        assert_eq!(claim.qualifiers, vec![Qualifier::new(START, year(1984)).unwrap()]);
        assert_eq!(claim.rank, Rank::Normal);
    }

    #[test]
    fn dump_framing_lines_are_skipped_not_rejected() {
        let options = IngestOptions::default();
        for framing in ["[", "]", ",", "", "   "] {
            let (doc, stats) = parse_one_with(framing, &options);
            assert_eq!(doc, None, "{framing:?} is framing");
            assert_eq!(stats, IngestStats::default());
        }
        // A trailing comma after the entity object is dump framing too.
        let doc = parse_one(&format!("{MINIMAL},"));
        assert_eq!(doc.id(), TIM_BL);
        let doc = parse_one(&format!("  {MINIMAL}, "));
        assert_eq!(doc.id(), TIM_BL);
    }

    #[test]
    fn missing_value_snaks_are_dropped_and_counted() {
        let line = r#"{"id":"Q1","type":"item","claims":{
            "P1":[{"mainsnak":{"snaktype":"somevalue"}}],
            "P2":[{"mainsnak":{"snaktype":"value","datavalue":{"type":"string","value":"kept"}},
                   "qualifiers":{"P3":[{"snaktype":"novalue"}]}}]}}"#
            .replace('\n', " ");
        let (doc, stats) = parse_one_with(&line, &IngestOptions::default());
        let doc = doc.unwrap();
        // The somevalue claim vanished, the novalue qualifier vanished, the
        // ordinary claim survived bare.
        assert_eq!(doc.claim_count(), 1);
        let (property, claims) = doc.claims().next().unwrap();
        assert_eq!(property, EntityId::property(2));
        assert!(claims[0].qualifiers.is_empty());
        assert_eq!(stats.skipped_snaks, 2);
    }

    #[test]
    fn unsupported_datavalue_kinds_follow_the_policy() {
        let line = r#"{"id":"Q1","claims":{"P1":[{"mainsnak":
            {"snaktype":"value","datavalue":{"type":"musical-notation","value":"𝄞"}}}]}}"#
            .replace('\n', " ");
        let (doc, stats) = parse_one_with(&line, &IngestOptions::default());
        assert_eq!(doc.unwrap().claim_count(), 0);
        assert_eq!(stats.unsupported_snaks, 1);

        let strict = IngestOptions {
            on_unsupported_snak: UnsupportedSnakPolicy::Error,
            ..IngestOptions::default()
        };
        let mut stats = IngestStats::default();
        assert_eq!(
            parse_entity_line(&line, &strict, &mut stats),
            Err(LineError::UnsupportedSnak("musical-notation".into()))
        );
    }

    #[test]
    fn malformed_lines_are_rejected_with_reasons() {
        for (line, why) in [
            ("{not json", "bad JSON"),
            (r#"{"type":"item"}"#, "missing id"),
            (r#"{"id":"X80"}"#, "bad entity id"),
            (r#"{"id":"Q80","type":"property"}"#, "type disagrees with id"),
            (r#"{"id":"L616","type":"lexeme"}"#, "unknown entity type"),
            (r#"{"id":"Q1","claims":{"Q5":[]}}"#, "claims key is an item"),
            (
                r#"{"id":"Q1","claims":{"P1":[{"mainsnak":{"snaktype":"value"}}]}}"#,
                "value snak without datavalue",
            ),
            (
                r#"{"id":"Q1","claims":{"P1":[{"mainsnak":{"snaktype":"wat"}}]}}"#,
                "unknown snaktype",
            ),
            (
                r#"{"id":"Q1","claims":{"P1":[{"mainsnak":
                   {"snaktype":"value","datavalue":{"type":"string","value":""}}}]}}"#,
                "empty lexical form",
            ),
            (
                r#"{"id":"Q1","claims":{"P1":[{"mainsnak":
                   {"snaktype":"value","datavalue":{"type":"string","value":"x"}},"rank":"best"}]}}"#,
                "unknown rank",
            ),
        ] {
            let line = line.replace('\n', " ");
            assert!(
                matches!(parse_err(&line), LineError::Malformed(_)),
                "{why}: {line}"
            );
        }
    }

    #[test]
    fn oversize_lines_are_rejected_before_parsing() {
        let options = IngestOptions { max_line_bytes: 8, ..IngestOptions::default() };
        let mut stats = IngestStats::default();
        // Not even valid JSON — the size check must fire first.
        let err = parse_entity_line("{oversized junk line}", &options, &mut stats).unwrap_err();
        assert_eq!(err, LineError::Oversize { got: 21, limit: 8 });
    }

    #[test]
    fn entity_ids_decode_from_both_dump_forms() {
        let by_id = r#"{"id":"Q1","claims":{"P1":[{"mainsnak":{"snaktype":"value",
            "datavalue":{"type":"wikibase-entityid","value":{"id":"Q42944"}}}}]}}"#
            .replace('\n', " ");
        let numeric = r#"{"id":"Q1","claims":{"P1":[{"mainsnak":{"snaktype":"value",
            "datavalue":{"type":"wikibase-entityid","value":{"entity-type":"item","numeric-id":42944}}}}]}}"#
            .replace('\n', " ");
        let claim_value = |line: &str| {
            let doc = parse_one(line);
            let value = doc.claims().next().unwrap().1[0].value.clone();
            value
        };
        assert_eq!(claim_value(&by_id), Value::EntityRef(CERN));
        assert_eq!(claim_value(&numeric), Value::EntityRef(CERN));

        let property = numeric.replace(r#""entity-type":"item""#, r#""entity-type":"property""#);
        assert_eq!(claim_value(&property), Value::EntityRef(EntityId::property(42944)));

        let zero = numeric.replace("42944", "0");
        assert!(matches!(parse_err(&zero), LineError::Malformed(_)));
    }

    #[test]
    fn quantity_units_resolve_to_entities() {
        let template = |unit: &str| {
            format!(
                r#"{{"id":"Q1","claims":{{"P1":[{{"mainsnak":{{"snaktype":"value",
                "datavalue":{{"type":"quantity","value":{{"amount":"+2","unit":{unit}}}}}}}}}]}}}}"#,
            )
            .replace('\n', " ")
        };
        let claim_value = |line: &str| {
            let doc = parse_one(line);
            let value = doc.claims().next().unwrap().1[0].value.clone();
            value
        };
        assert_eq!(
            claim_value(&template(r#""1""#)),
            Value::Data(DataValue::quantity("+2", None).unwrap())
        );
        assert_eq!(
            claim_value(&template(r#""http://www.wikidata.org/entity/Q11573""#)),
            Value::Data(DataValue::quantity("+2", Some(EntityId::item(11573))).unwrap())
        );
        assert!(matches!(parse_err(&template(r#""meters""#)), LineError::Malformed(_)));
    }

    #[test]
    fn remaining_datavalue_kinds_decode_to_model_values() {
        let line = r#"{"id":"Q1","claims":{
            "P1":[{"mainsnak":{"snaktype":"value","datavalue":{"type":"string","value":"hello"}}}],
            "P2":[{"mainsnak":{"snaktype":"value","datavalue":
                {"type":"monolingualtext","value":{"text":"Londres","language":"fr"}}}}],
            "P3":[{"mainsnak":{"snaktype":"value","datavalue":
                {"type":"globecoordinate","value":{"latitude":51.5,"longitude":-0.12}}}}]}}"#
            .replace('\n', " ");
        let doc = parse_one(&line);
        let values: Vec<Value> =
            doc.claims().map(|(_, claims)| claims[0].value.clone()).collect();
        assert_eq!(
            values,
            vec![
                Value::Data(DataValue::simple(BuiltinDatatype::String, "hello").unwrap()),
                Value::Data(DataValue::monolingual("Londres", "fr").unwrap()),
                Value::Data(DataValue::coordinate(51.5, -0.12)),
            ]
        );
    }

    #[test]
    fn statements_inherit_ids_ranks_and_repeated_qualifier_properties() {
        let line = r#"{"id":"Q1","claims":{"P1":[
            {"id":"Q1$a","rank":"preferred",
             "mainsnak":{"snaktype":"value","datavalue":{"type":"string","value":"x"}},
             "qualifiers":{"P580":[
                {"snaktype":"value","datavalue":{"type":"time","value":{"time":"+1984-01-01T00:00:00Z","precision":9}}},
                {"snaktype":"value","datavalue":{"type":"time","value":{"time":"+1985-01-01T00:00:00Z","precision":9}}},
                {"snaktype":"value","datavalue":{"type":"time","value":{"time":"+1985-01-01T00:00:00Z","precision":9}}}]}},
            {"mainsnak":{"snaktype":"value","datavalue":{"type":"string","value":"y"}},"rank":"deprecated"}]}}"#
            .replace('\n', " ");
        let doc = parse_one(&line);
        let statements = doc_to_statements(&doc);
        assert_eq!(statements.len(), 2);

        let first = &statements[0];
        assert_eq!(first.statement_id(), "Q1$a");
        assert_eq!(first.rank(), Rank::Preferred);
        // Same property twice with different values stays two qualifiers;
        // the identical third snak collapses under set semantics.
        assert_eq!(
            first.qualifiers(),
            [
                Qualifier::new(START, year(1984)).unwrap(),
                Qualifier::new(START, year(1985)).unwrap(),
            ]
        );

        let second = &statements[1];
        assert_eq!(second.statement_id(), "Q1$synth1");
        assert_eq!(second.rank(), Rank::Deprecated);
        assert_eq!(second.subject(), EntityId::item(1));
    }

    #[test]
    fn zero_claim_documents_produce_no_statements() {
        let doc = parse_one(r#"{"id":"Q5","type":"item"}"#);
        assert_eq!(doc.claim_count(), 0);
        assert_eq!(doc_to_statements(&doc), Vec::new());
    }

    #[test]
    fn report_records_encode_their_wire_shape() {
        let record = ReportRecord {
            entity: TIM_BL,
            shape: ShapeLabel::new("Person"),
            outcome: Outcome::Conforming,
            approx: true,
        };
        assert_eq!(
            record.to_json_line(),
            r#"{"entity":"Q80","shape":"Person","status":"conforms","approx":true}"#
        );
    }
}
