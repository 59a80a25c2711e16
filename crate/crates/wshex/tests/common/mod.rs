//! Shared test support: a reference implementation of the validation
//! semantics plus random schema/graph generators.
//!
//! The reference checker is a direct transcription of the inference
//! rules — exhaustive partition search over statement bags and a
//! whole-universe greatest fixed point — written independently of the
//! production engine so the two can be cross-checked. It is exponential
//! on purpose; keep the inputs it sees small.

#![allow(dead_code)] // each integration-test binary uses a different slice

pub mod rules;

use indexmap::IndexSet;

use wshex::ast::{
    preds_ps, preds_te, NodeConstraint, Openness, PropertySpec, QualifierSpec, Schema, ShapeExpr,
    ShapeLabel, TripleExpr,
};
use wshex::model::{BuiltinDatatype, EntityId, Statement, Value, WikibaseGraph};

/// Every (value, shape) pair the reference checker considers conformant:
/// the greatest fixed point of the rule system over the graph's values
/// plus `extra` (so isolated query nodes can be asked about too).
pub fn reference_typing(
    graph: &WikibaseGraph,
    schema: &Schema,
    pedantic: bool,
    extra: &[Value],
) -> IndexSet<(Value, ShapeLabel)> {
    let core = schema.desugar().expect("reference checker needs valid ranges");
    let ck = Checker { graph, schema: &core, pedantic };

    let mut universe: IndexSet<Value> = IndexSet::new();
    for subject in graph.subjects() {
        universe.insert(Value::EntityRef(subject));
    }
    for st in graph.all_statements() {
        universe.insert(st.value().clone());
        for q in st.qualifiers() {
            universe.insert(q.value().clone());
        }
    }
    universe.extend(extra.iter().cloned());

    // Start from everything and strip refuted pairs until stable.
    let mut sigma: IndexSet<(Value, ShapeLabel)> = universe
        .iter()
        .flat_map(|v| core.labels().map(|l| (v.clone(), l.clone())))
        .collect();
    loop {
        let next: IndexSet<(Value, ShapeLabel)> = sigma
            .iter()
            .filter(|(v, l)| ck.check_se(v, ck.schema.get(l).expect("label defined"), &sigma))
            .cloned()
            .collect();
        if next.len() == sigma.len() {
            return sigma;
        }
        sigma = next;
    }
}

/// Does `node` conform to `shape` under the reference semantics?
pub fn reference_conforms(
    graph: &WikibaseGraph,
    schema: &Schema,
    pedantic: bool,
    node: EntityId,
    shape: &ShapeLabel,
) -> bool {
    let focus = Value::EntityRef(node);
    reference_typing(graph, schema, pedantic, std::slice::from_ref(&focus))
        .contains(&(focus.clone(), shape.clone()))
}

struct Checker<'a> {
    graph: &'a WikibaseGraph,
    schema: &'a Schema,
    pedantic: bool,
}

impl Checker<'_> {
    fn check_se(
        &self,
        focus: &Value,
        se: &ShapeExpr,
        sigma: &IndexSet<(Value, ShapeLabel)>,
    ) -> bool {
        match se {
            ShapeExpr::Cond(nc) => cond_holds(focus, nc),
            ShapeExpr::And(a, b) => self.check_se(focus, a, sigma) && self.check_se(focus, b, sigma),
            ShapeExpr::Ref(label) => sigma.contains(&(focus.clone(), label.clone())),
            ShapeExpr::Shape { closed, te } => {
                let neighs = match focus {
                    Value::EntityRef(id) => self.graph.neighs(*id),
                    Value::Data(_) => Vec::new(),
                };
                let bag: Vec<&Statement> = if *closed {
                    neighs.iter().collect()
                } else {
                    // An open shape only looks at the statements whose
                    // property the expression mentions.
                    let preds = preds_te(te);
                    neighs.iter().filter(|st| preds.contains(&st.property())).collect()
                };
                self.check_te(&bag, te, sigma)
            }
        }
    }

    fn check_te(
        &self,
        bag: &[&Statement],
        te: &TripleExpr,
        sigma: &IndexSet<(Value, ShapeLabel)>,
    ) -> bool {
        match te {
            TripleExpr::Empty => bag.is_empty(),
            TripleExpr::Tc(tc) => {
                bag.len() == 1 && {
                    let st = bag[0];
                    st.property() == tc.predicate()
                        && self.check_se(st.value(), tc.value(), sigma)
                        && self.check_qs(st, tc.qualifiers(), sigma)
                }
            }
            TripleExpr::EachOf(a, b) => self.any_split(bag, |x, y| {
                self.check_te(x, a, sigma) && self.check_te(y, b, sigma)
            }),
            TripleExpr::OneOf(a, b) => {
                self.check_te(bag, a, sigma) || self.check_te(bag, b, sigma)
            }
            TripleExpr::Star(x) => {
                bag.is_empty()
                    || self.any_split(bag, |piece, rest| {
                        // The first piece must be non-empty or the
                        // recursion would not terminate.
                        !piece.is_empty()
                            && self.check_te(piece, x, sigma)
                            && self.check_te(rest, te, sigma)
                    })
            }
            TripleExpr::Repeat(..) => unreachable!("reference checker runs on desugared schemas"),
        }
    }

    /// Try every two-way split of the bag (2^n of them).
    fn any_split(
        &self,
        bag: &[&Statement],
        mut ok: impl FnMut(&[&Statement], &[&Statement]) -> bool,
    ) -> bool {
        let n = bag.len();
        assert!(n < 20, "reference checker bag too large ({n})");
        (0u32..(1 << n)).any(|mask| {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (i, st) in bag.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    left.push(*st);
                } else {
                    right.push(*st);
                }
            }
            ok(&left, &right)
        })
    }

    fn check_qs(
        &self,
        st: &Statement,
        spec: &QualifierSpec,
        sigma: &IndexSet<(Value, ShapeLabel)>,
    ) -> bool {
        let pairs: Vec<(EntityId, &Value)> =
            st.qualifiers().iter().map(|q| (q.property(), q.value())).collect();
        let scoped: Vec<(EntityId, &Value)> = match spec.openness {
            Openness::Closed => pairs,
            Openness::Open => {
                let preds = preds_ps(&spec.body);
                pairs.into_iter().filter(|(p, _)| preds.contains(p)).collect()
            }
        };
        self.check_ps(&scoped, &spec.body, sigma)
    }

    fn check_ps(
        &self,
        pairs: &[(EntityId, &Value)],
        ps: &PropertySpec,
        sigma: &IndexSet<(Value, ShapeLabel)>,
    ) -> bool {
        match ps {
            PropertySpec::EmptyQs => pairs.is_empty(),
            PropertySpec::PropQs { property, value } => {
                pairs.len() == 1
                    && pairs[0].0 == *property
                    && self.check_se(pairs[0].1, value, sigma)
            }
            PropertySpec::EachOfQs(a, b) => {
                if self.pedantic {
                    // Literal reading: both conjuncts against the same set.
                    self.check_ps(pairs, a, sigma) && self.check_ps(pairs, b, sigma)
                } else {
                    self.any_split_qs(pairs, |x, y| {
                        self.check_ps(x, a, sigma) && self.check_ps(y, b, sigma)
                    })
                }
            }
            PropertySpec::OneOfQs(a, b) => {
                self.check_ps(pairs, a, sigma) || self.check_ps(pairs, b, sigma)
            }
            PropertySpec::StarQs(x) => {
                pairs.is_empty()
                    || self.any_split_qs(pairs, |piece, rest| {
                        !piece.is_empty()
                            && self.check_ps(piece, x, sigma)
                            && self.check_ps(rest, ps, sigma)
                    })
            }
            PropertySpec::RepeatQs(..) => {
                unreachable!("reference checker runs on desugared schemas")
            }
        }
    }

    fn any_split_qs(
        &self,
        pairs: &[(EntityId, &Value)],
        mut ok: impl FnMut(&[(EntityId, &Value)], &[(EntityId, &Value)]) -> bool,
    ) -> bool {
        let n = pairs.len();
        assert!(n < 20, "reference checker qualifier set too large ({n})");
        (0u32..(1 << n)).any(|mask| {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (i, pv) in pairs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    left.push(*pv);
                } else {
                    right.push(*pv);
                }
            }
            ok(&left, &right)
        })
    }
}

fn cond_holds(focus: &Value, nc: &NodeConstraint) -> bool {
    match nc {
        NodeConstraint::AnyValue => true,
        NodeConstraint::Datatype(dt) => match focus {
            Value::EntityRef(id) => match dt {
                BuiltinDatatype::Item => id.is_item(),
                BuiltinDatatype::Property => id.is_property(),
                _ => false,
            },
            Value::Data(dv) => {
                !matches!(dt, BuiltinDatatype::Item | BuiltinDatatype::Property)
                    && dv.datatype() == *dt
            }
        },
        NodeConstraint::ValueSet(values) => values.iter().any(|w| match (w, focus) {
            (Value::EntityRef(a), Value::EntityRef(b)) => a == b,
            (Value::Data(a), Value::Data(b)) => {
                a.datatype() == b.datatype() && a.lexical() == b.lexical()
            }
            _ => false,
        }),
    }
}

pub mod gen {
    //! Random schemas and graphs small enough for the reference checker.

    use rand::prelude::*;

    use wshex::ast::{
        Cardinality, NodeConstraint, PropertySpec, QualifierSpec, Schema, ShapeExpr, ShapeLabel,
        TripleExpr,
    };
    use wshex::model::{DataValue, EntityId, Statement, Value, WikibaseGraph};

    pub const PROPS: [u64; 5] = [1, 2, 3, 4, 5];
    pub const ITEMS: [u64; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

    pub fn some_property(rng: &mut impl Rng) -> EntityId {
        EntityId::property(*PROPS.choose(rng).unwrap())
    }

    pub fn some_item(rng: &mut impl Rng) -> EntityId {
        EntityId::item(*ITEMS.choose(rng).unwrap())
    }

    pub fn some_value(rng: &mut impl Rng) -> Value {
        match rng.gen_range(0..4) {
            0 => Value::EntityRef(some_item(rng)),
            1 => Value::Data(DataValue::time(format!("+19{:02}-01-01T00:00:00Z", rng.gen_range(0..100)), 9).unwrap()),
            2 => Value::Data(DataValue::simple(wshex::model::BuiltinDatatype::String, format!("s{}", rng.gen_range(0..4))).unwrap()),
            _ => Value::Data(DataValue::quantity(rng.gen_range(1..20).to_string(), None).unwrap()),
        }
    }

    fn node_constraint(rng: &mut impl Rng) -> NodeConstraint {
        match rng.gen_range(0..4) {
            0 => NodeConstraint::AnyValue,
            1 => NodeConstraint::Datatype(match rng.gen_range(0..4) {
                0 => wshex::model::BuiltinDatatype::Time,
                1 => wshex::model::BuiltinDatatype::String,
                2 => wshex::model::BuiltinDatatype::Quantity,
                _ => wshex::model::BuiltinDatatype::Item,
            }),
            _ => {
                let n = rng.gen_range(1..=3);
                NodeConstraint::ValueSet((0..n).map(|_| some_value(rng)).collect())
            }
        }
    }

    fn cardinality(rng: &mut impl Rng) -> Cardinality {
        match rng.gen_range(0..5) {
            0 => Cardinality::Optional,
            1 => Cardinality::Star,
            2 => Cardinality::Plus,
            3 => {
                let min = rng.gen_range(0..2);
                Cardinality::Range { min, max: Some(min + rng.gen_range(0..2)) }
            }
            _ => Cardinality::Range { min: rng.gen_range(1..3), max: None },
        }
    }

    /// A value expression: conds mostly, sometimes a reference into the
    /// schema's label pool (cycles included — references resolve against
    /// the fixed point).
    fn value_expr(rng: &mut impl Rng, labels: &[ShapeLabel]) -> ShapeExpr {
        if !labels.is_empty() && rng.gen_bool(0.3) {
            ShapeExpr::Ref(labels.choose(rng).unwrap().clone())
        } else if rng.gen_bool(0.1) {
            ShapeExpr::and(
                ShapeExpr::Cond(node_constraint(rng)),
                ShapeExpr::Cond(node_constraint(rng)),
            )
        } else {
            ShapeExpr::Cond(node_constraint(rng))
        }
    }

    fn prop_leaf(rng: &mut impl Rng, labels: &[ShapeLabel]) -> PropertySpec {
        PropertySpec::prop(some_property(rng), value_expr(rng, labels))
    }

    pub fn property_spec(rng: &mut impl Rng, labels: &[ShapeLabel], depth: u32) -> PropertySpec {
        if depth == 0 {
            return prop_leaf(rng, labels);
        }
        match rng.gen_range(0..6) {
            0 => PropertySpec::EmptyQs,
            1 => PropertySpec::each_of(
                property_spec(rng, labels, depth - 1),
                property_spec(rng, labels, depth - 1),
            ),
            2 => PropertySpec::one_of(
                property_spec(rng, labels, depth - 1),
                property_spec(rng, labels, depth - 1),
            ),
            3 => PropertySpec::star(property_spec(rng, labels, depth - 1)),
            4 => PropertySpec::repeat(property_spec(rng, labels, depth - 1), cardinality(rng)),
            _ => prop_leaf(rng, labels),
        }
    }

    fn tc_leaf(rng: &mut impl Rng, labels: &[ShapeLabel]) -> TripleExpr {
        let qs = if rng.gen_bool(0.3) {
            let body = property_spec(rng, labels, 1);
            if rng.gen_bool(0.5) {
                QualifierSpec::open(body)
            } else {
                QualifierSpec::closed(body)
            }
        } else {
            QualifierSpec::default()
        };
        TripleExpr::tc_with(some_property(rng), value_expr(rng, labels), qs)
    }

    pub fn triple_expr(rng: &mut impl Rng, labels: &[ShapeLabel], depth: u32) -> TripleExpr {
        if depth == 0 {
            return tc_leaf(rng, labels);
        }
        match rng.gen_range(0..7) {
            0 => TripleExpr::Empty,
            1 => TripleExpr::each_of(
                triple_expr(rng, labels, depth - 1),
                triple_expr(rng, labels, depth - 1),
            ),
            2 => TripleExpr::one_of(
                triple_expr(rng, labels, depth - 1),
                triple_expr(rng, labels, depth - 1),
            ),
            3 => TripleExpr::star(triple_expr(rng, labels, depth - 1)),
            4 => TripleExpr::repeat(triple_expr(rng, labels, depth - 1), cardinality(rng)),
            _ => tc_leaf(rng, labels),
        }
    }

    /// A random schema of 1–4 interlinked shapes.
    pub fn schema(rng: &mut impl Rng) -> Schema {
        let k = rng.gen_range(1..=4);
        let labels: Vec<ShapeLabel> = (0..k).map(|i| ShapeLabel::new(format!("S{i}"))).collect();
        let mut schema = Schema::new();
        for label in &labels {
            let se = match rng.gen_range(0..10) {
                0 => ShapeExpr::Cond(node_constraint(rng)),
                1 => ShapeExpr::and(
                    ShapeExpr::Cond(node_constraint(rng)),
                    ShapeExpr::Shape { closed: rng.gen_bool(0.5), te: triple_expr(rng, &labels, 1) },
                ),
                _ => ShapeExpr::Shape {
                    closed: rng.gen_bool(0.3),
                    te: triple_expr(rng, &labels, 2),
                },
            };
            schema.define(label.clone(), se);
        }
        schema
    }

    /// A random graph over the shared item/property pools: up to
    /// `max_statements` per subject, up to two qualifiers per statement.
    pub fn graph(rng: &mut impl Rng, max_statements: usize) -> WikibaseGraph {
        let mut g = WikibaseGraph::new();
        let mut seq = 0u32;
        for &q in ITEMS.iter().take(rng.gen_range(2..=ITEMS.len())) {
            let subject = EntityId::item(q);
            for _ in 0..rng.gen_range(0..=max_statements) {
                seq += 1;
                let mut st = Statement::new(
                    format!("Q{q}${seq}"),
                    subject,
                    some_property(rng),
                    some_value(rng),
                )
                .unwrap();
                for _ in 0..rng.gen_range(0..=2) {
                    st = st.with_qualifier(some_property(rng), some_value(rng)).unwrap();
                }
                g.add_statement(st).unwrap();
            }
        }
        g
    }
}
