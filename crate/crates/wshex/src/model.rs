//! The Wikibase graph data model.
//!
//! A Wikibase graph is a tuple of items, properties, data values and
//! qualified statements. Statements relate a subject entity to a value
//! through a property and carry a finite *set* of qualifier (property,
//! value) pairs — the distinguishing feature of the model compared to
//! plain directed labeled graphs.

use std::fmt;
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use ordered_float::OrderedFloat;
use thiserror::Error;

/// Errors constructing model values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("`{0}` is not a property id")]
    NotAProperty(EntityId),
    #[error("data value lexical form must be non-empty")]
    EmptyLexical,
    #[error("invalid entity id `{0}`: expected Q<n> or P<n> with n >= 1")]
    InvalidEntityId(String),
}

/// Errors mutating a [`WikibaseGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate statement id `{0}`")]
    DuplicateStatementId(String),
}

/// Whether an entity is an item (`Q…`) or a property (`P…`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Item,
    Property,
}

/// A Wikibase entity identifier: `Q<n>` for items, `P<n>` for properties.
///
/// Two ids are equal iff their kind and numeric part are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    kind: EntityKind,
    numeric_id: u64,
}

impl EntityId {
    /// `Q<n>`. Panics if `n` is zero (ids are 1-based).
    pub const fn item(n: u64) -> Self {
        assert!(n >= 1, "entity ids are 1-based");
        EntityId { kind: EntityKind::Item, numeric_id: n }
    }

    /// `P<n>`. Panics if `n` is zero (ids are 1-based).
    pub const fn property(n: u64) -> Self {
        assert!(n >= 1, "entity ids are 1-based");
        EntityId { kind: EntityKind::Property, numeric_id: n }
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn numeric_id(&self) -> u64 {
        self.numeric_id
    }

    pub fn is_property(&self) -> bool {
        self.kind == EntityKind::Property
    }

    pub fn is_item(&self) -> bool {
        self.kind == EntityKind::Item
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.kind {
            EntityKind::Item => 'Q',
            EntityKind::Property => 'P',
        };
        write!(f, "{letter}{}", self.numeric_id)
    }
}

impl FromStr for EntityId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModelError::InvalidEntityId(s.to_string());
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('Q') => EntityKind::Item,
            Some('P') => EntityKind::Property,
            _ => return Err(err()),
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let n: u64 = digits.parse().map_err(|_| err())?;
        if n == 0 {
            return Err(err());
        }
        Ok(EntityId { kind, numeric_id: n })
    }
}

/// The closed set of Wikibase built-in datatypes.
///
/// Unknown datatype names are a parse error, never silently accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinDatatype {
    String,
    Time,
    Quantity,
    MonolingualText,
    Url,
    ExternalIdentifier,
    GlobeCoordinate,
    CommonsMedia,
    MathematicalExpression,
    GeographicShape,
    MusicalNotation,
    TabularData,
    Item,
    Property,
    Lexeme,
    Form,
    Sense,
}

impl BuiltinDatatype {
    pub const ALL: [BuiltinDatatype; 17] = [
        BuiltinDatatype::String,
        BuiltinDatatype::Time,
        BuiltinDatatype::Quantity,
        BuiltinDatatype::MonolingualText,
        BuiltinDatatype::Url,
        BuiltinDatatype::ExternalIdentifier,
        BuiltinDatatype::GlobeCoordinate,
        BuiltinDatatype::CommonsMedia,
        BuiltinDatatype::MathematicalExpression,
        BuiltinDatatype::GeographicShape,
        BuiltinDatatype::MusicalNotation,
        BuiltinDatatype::TabularData,
        BuiltinDatatype::Item,
        BuiltinDatatype::Property,
        BuiltinDatatype::Lexeme,
        BuiltinDatatype::Form,
        BuiltinDatatype::Sense,
    ];

    /// The surface-syntax name, e.g. `Time`, `MonolingualText`.
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinDatatype::String => "String",
            BuiltinDatatype::Time => "Time",
            BuiltinDatatype::Quantity => "Quantity",
            BuiltinDatatype::MonolingualText => "MonolingualText",
            BuiltinDatatype::Url => "URL",
            BuiltinDatatype::ExternalIdentifier => "ExternalIdentifier",
            BuiltinDatatype::GlobeCoordinate => "GlobeCoordinate",
            BuiltinDatatype::CommonsMedia => "CommonsMedia",
            BuiltinDatatype::MathematicalExpression => "MathematicalExpression",
            BuiltinDatatype::GeographicShape => "GeographicShape",
            BuiltinDatatype::MusicalNotation => "MusicalNotation",
            BuiltinDatatype::TabularData => "TabularData",
            BuiltinDatatype::Item => "Item",
            BuiltinDatatype::Property => "Property",
            BuiltinDatatype::Lexeme => "Lexeme",
            BuiltinDatatype::Form => "Form",
            BuiltinDatatype::Sense => "Sense",
        }
    }

    /// Resolve a surface-syntax name. The enumeration is closed: `None`
    /// means the name must be rejected by callers.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|dt| dt.name() == name)
    }
}

impl fmt::Display for BuiltinDatatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Datatype-specific decoded payload of a [`DataValue`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StructuredValue {
    /// Calendar timestamp in the dump's `+YYYY-MM-DDTHH:MM:SSZ` form plus
    /// the Wikibase precision integer (9 = year, 11 = day, …).
    Time { timestamp: String, precision: u8 },
    /// Decimal amount kept lexically, with an optional unit entity.
    Quantity { amount: String, unit: Option<EntityId> },
    MonolingualText { text: String, language: String },
    GlobeCoordinate { latitude: OrderedFloat<f64>, longitude: OrderedFloat<f64> },
}

impl StructuredValue {
    pub fn datatype(&self) -> BuiltinDatatype {
        match self {
            StructuredValue::Time { .. } => BuiltinDatatype::Time,
            StructuredValue::Quantity { .. } => BuiltinDatatype::Quantity,
            StructuredValue::MonolingualText { .. } => BuiltinDatatype::MonolingualText,
            StructuredValue::GlobeCoordinate { .. } => BuiltinDatatype::GlobeCoordinate,
        }
    }
}

/// A literal (non-entity) value: a datatype, a non-empty lexical form and
/// an optional decoded payload whose datatype always matches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataValue {
    datatype: BuiltinDatatype,
    lexical: String,
    structured: Option<StructuredValue>,
}

impl DataValue {
    /// A data value with no decoded payload.
    pub fn simple(datatype: BuiltinDatatype, lexical: impl Into<String>) -> Result<Self, ModelError> {
        let lexical = lexical.into();
        if lexical.is_empty() {
            return Err(ModelError::EmptyLexical);
        }
        Ok(DataValue { datatype, lexical, structured: None })
    }

    /// A time value; the lexical form is the timestamp itself.
    pub fn time(timestamp: impl Into<String>, precision: u8) -> Result<Self, ModelError> {
        let timestamp = timestamp.into();
        if timestamp.is_empty() {
            return Err(ModelError::EmptyLexical);
        }
        Ok(DataValue {
            datatype: BuiltinDatatype::Time,
            lexical: timestamp.clone(),
            structured: Some(StructuredValue::Time { timestamp, precision }),
        })
    }

    /// A quantity; the lexical form is the decimal amount.
    pub fn quantity(amount: impl Into<String>, unit: Option<EntityId>) -> Result<Self, ModelError> {
        let amount = amount.into();
        if amount.is_empty() {
            return Err(ModelError::EmptyLexical);
        }
        Ok(DataValue {
            datatype: BuiltinDatatype::Quantity,
            lexical: amount.clone(),
            structured: Some(StructuredValue::Quantity { amount, unit }),
        })
    }

    pub fn monolingual(text: impl Into<String>, language: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.is_empty() {
            return Err(ModelError::EmptyLexical);
        }
        Ok(DataValue {
            datatype: BuiltinDatatype::MonolingualText,
            lexical: text.clone(),
            structured: Some(StructuredValue::MonolingualText { text, language: language.into() }),
        })
    }

    pub fn coordinate(latitude: f64, longitude: f64) -> Self {
        DataValue {
            datatype: BuiltinDatatype::GlobeCoordinate,
            lexical: format!("{latitude},{longitude}"),
            structured: Some(StructuredValue::GlobeCoordinate {
                latitude: OrderedFloat(latitude),
                longitude: OrderedFloat(longitude),
            }),
        }
    }

    pub fn datatype(&self) -> BuiltinDatatype {
        self.datatype
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn structured(&self) -> Option<&StructuredValue> {
        self.structured.as_ref()
    }
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^^{}", self.lexical, self.datatype)
    }
}

/// A statement or qualifier value: either another graph entity or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    EntityRef(EntityId),
    Data(DataValue),
}

impl Value {
    pub fn as_entity(&self) -> Option<EntityId> {
        match self {
            Value::EntityRef(id) => Some(*id),
            Value::Data(_) => None,
        }
    }

    pub fn is_entity(&self) -> bool {
        matches!(self, Value::EntityRef(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::EntityRef(id) => id.fmt(f),
            Value::Data(dv) => dv.fmt(f),
        }
    }
}

impl From<EntityId> for Value {
    fn from(id: EntityId) -> Self {
        Value::EntityRef(id)
    }
}

impl From<DataValue> for Value {
    fn from(dv: DataValue) -> Self {
        Value::Data(dv)
    }
}

/// One qualifier pair attached to a statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Qualifier {
    property: EntityId,
    value: Value,
}

impl Qualifier {
    pub fn new(property: EntityId, value: impl Into<Value>) -> Result<Self, ModelError> {
        if !property.is_property() {
            return Err(ModelError::NotAProperty(property));
        }
        Ok(Qualifier { property, value: value.into() })
    }

    pub fn property(&self) -> EntityId {
        self.property
    }

    pub fn value(&self) -> &Value {
        &self.value
    }
}

/// Statement rank. Stored for fidelity with the dump format but never
/// constrained by validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Rank {
    Preferred,
    #[default]
    Normal,
    Deprecated,
}

/// One qualified statement: subject, property, value and a finite set of
/// qualifiers. The statement id keeps two statements that agree on all
/// four components distinct, mirroring Wikibase statement nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    statement_id: String,
    subject: EntityId,
    property: EntityId,
    value: Value,
    qualifiers: Vec<Qualifier>,
    rank: Rank,
}

impl Statement {
    pub fn new(
        statement_id: impl Into<String>,
        subject: EntityId,
        property: EntityId,
        value: impl Into<Value>,
    ) -> Result<Self, ModelError> {
        if !property.is_property() {
            return Err(ModelError::NotAProperty(property));
        }
        Ok(Statement {
            statement_id: statement_id.into(),
            subject,
            property,
            value: value.into(),
            qualifiers: Vec::new(),
            rank: Rank::Normal,
        })
    }

    /// Add a qualifier. The qualifier list has set semantics: re-adding an
    /// identical (property, value) pair is a no-op.
    pub fn with_qualifier(mut self, property: EntityId, value: impl Into<Value>) -> Result<Self, ModelError> {
        let q = Qualifier::new(property, value)?;
        if !self.qualifiers.contains(&q) {
            self.qualifiers.push(q);
        }
        Ok(self)
    }

    pub fn with_rank(mut self, rank: Rank) -> Self {
        self.rank = rank;
        self
    }

    pub fn statement_id(&self) -> &str {
        &self.statement_id
    }

    pub fn subject(&self) -> EntityId {
        self.subject
    }

    pub fn property(&self) -> EntityId {
        self.property
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn qualifiers(&self) -> &[Qualifier] {
        &self.qualifiers
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }
}

/// The tuple of items, properties and qualified statements, indexed by
/// statement subject.
///
/// Every entity referenced anywhere (subject, entity-valued statement
/// value, entity-valued qualifier value) is auto-registered in the item or
/// property set, so the entity-closure invariant holds by construction.
/// The graph is immutable after construction; all queries are read-only.
#[derive(Debug, Clone, Default)]
pub struct WikibaseGraph {
    items: IndexSet<EntityId>,
    properties: IndexSet<EntityId>,
    by_subject: IndexMap<EntityId, Vec<Statement>>,
    statement_ids: IndexSet<String>,
}

impl WikibaseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn register(&mut self, id: EntityId) {
        match id.kind() {
            EntityKind::Item => self.items.insert(id),
            EntityKind::Property => self.properties.insert(id),
        };
    }

    /// Insert one statement, auto-registering every referenced entity.
    pub fn add_statement(&mut self, st: Statement) -> Result<(), GraphError> {
        if !self.statement_ids.insert(st.statement_id.clone()) {
            return Err(GraphError::DuplicateStatementId(st.statement_id));
        }
        self.register(st.subject);
        self.register(st.property);
        if let Value::EntityRef(id) = st.value {
            self.register(id);
        }
        for q in &st.qualifiers {
            self.register(q.property);
            if let Value::EntityRef(id) = q.value {
                self.register(id);
            }
        }
        self.by_subject.entry(st.subject).or_default().push(st);
        Ok(())
    }

    /// The output neighborhood of `node`: exactly the statements whose
    /// subject equals `node`, as an owned snapshot. Unknown nodes yield
    /// the empty set.
    pub fn neighs(&self, node: EntityId) -> Vec<Statement> {
        self.statements_of(node).to_vec()
    }

    /// Borrowing variant of [`neighs`](Self::neighs) for hot paths.
    pub fn statements_of(&self, node: EntityId) -> &[Statement] {
        self.by_subject.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn items(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.items.iter().copied()
    }

    pub fn properties(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.properties.iter().copied()
    }

    pub fn contains_entity(&self, id: EntityId) -> bool {
        match id.kind() {
            EntityKind::Item => self.items.contains(&id),
            EntityKind::Property => self.properties.contains(&id),
        }
    }

    /// Subjects that carry at least one statement, in insertion order.
    pub fn subjects(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.by_subject.keys().copied()
    }

    pub fn all_statements(&self) -> impl Iterator<Item = &Statement> {
        self.by_subject.values().flatten()
    }

    pub fn statement_count(&self) -> usize {
        self.statement_ids.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn property_count(&self) -> usize {
        self.properties.len()
    }
}

/// Well-known entity ids and helpers for the Tim Berners-Lee example graph.
pub mod fixture {
    use super::*;

    pub const TIM_BL: EntityId = EntityId::item(80);
    pub const VINT_CERF: EntityId = EntityId::item(92743);
    pub const LONDON: EntityId = EntityId::item(84);
    pub const CERN: EntityId = EntityId::item(42944);
    pub const UK: EntityId = EntityId::item(145);
    pub const SPAIN: EntityId = EntityId::item(29);
    /// Princess of Asturias award.
    pub const PA: EntityId = EntityId::item(329157);
    pub const HUMAN: EntityId = EntityId::item(5);
    pub const NEW_HAVEN: EntityId = EntityId::item(49145);

    pub const INSTANCE_OF: EntityId = EntityId::property(31);
    pub const BIRTH_DATE: EntityId = EntityId::property(569);
    pub const BIRTH_PLACE: EntityId = EntityId::property(19);
    pub const COUNTRY: EntityId = EntityId::property(27);
    pub const EMPLOYER: EntityId = EntityId::property(108);
    pub const AWARDED: EntityId = EntityId::property(166);
    pub const START: EntityId = EntityId::property(580);
    pub const END: EntityId = EntityId::property(582);
    pub const POINT_TIME: EntityId = EntityId::property(585);
    pub const TOGETHER_WITH: EntityId = EntityId::property(1706);

    /// A year-precision time value in the dump's timestamp form.
    pub fn year(y: u32) -> Value {
        Value::Data(DataValue::time(format!("+{y:04}-01-01T00:00:00Z"), 9).expect("non-empty"))
    }
}

/// The Tim Berners-Lee example graph: 11 statements over 9 items and 10
/// properties, with year-precision time values for the bare years of the
/// original listing.
pub fn load_fixture_graph() -> WikibaseGraph {
    use fixture::*;

    let mut g = WikibaseGraph::new();
    let mut add = |st: Statement| g.add_statement(st).expect("fixture ids are unique");

    add(Statement::new("Q80$s1", TIM_BL, INSTANCE_OF, HUMAN).unwrap());
    add(Statement::new("Q80$s2", TIM_BL, BIRTH_DATE, year(1955)).unwrap());
    add(Statement::new("Q80$s3", TIM_BL, BIRTH_PLACE, LONDON).unwrap());
    add(Statement::new("Q80$s4", TIM_BL, EMPLOYER, CERN)
        .unwrap()
        .with_qualifier(START, year(1980))
        .unwrap()
        .with_qualifier(END, year(1980))
        .unwrap());
    add(Statement::new("Q80$s5", TIM_BL, EMPLOYER, CERN)
        .unwrap()
        .with_qualifier(START, year(1984))
        .unwrap()
        .with_qualifier(END, year(1994))
        .unwrap());
    add(Statement::new("Q80$s6", TIM_BL, AWARDED, PA)
        .unwrap()
        .with_qualifier(POINT_TIME, year(2002))
        .unwrap()
        .with_qualifier(TOGETHER_WITH, VINT_CERF)
        .unwrap());
    add(Statement::new("Q84$s1", LONDON, COUNTRY, UK).unwrap());
    add(Statement::new("Q92743$s1", VINT_CERF, INSTANCE_OF, HUMAN).unwrap());
    add(Statement::new("Q92743$s2", VINT_CERF, BIRTH_PLACE, NEW_HAVEN).unwrap());
    add(Statement::new("Q42944$s1", CERN, AWARDED, PA)
        .unwrap()
        .with_qualifier(POINT_TIME, year(2013))
        .unwrap());
    add(Statement::new("Q329157$s1", PA, COUNTRY, SPAIN).unwrap());

    g
}
