//! The acceptance gate: one test per ship criterion, each printing a
//! single `criterion N: PASS` line (run with `--nocapture` to see them)
//! and failing loudly when its criterion is not met.
//!
//! 1. the worked-example conformance matrix, with the optionalized
//!    variant and the qualifier cascade, in under a second;
//! 2. 500 randomized schema/graph pairs agreeing with the exhaustive
//!    reference checker, in under a minute;
//! 3. the inference-rule checklist: both polarities of all 15 rules;
//! 4. parse→render→parse stability on the fixed corpus plus 200
//!    rendered random schemas;
//! 5. the reification-pattern conversion golden: structure, verdict
//!    parity and the two cardinality-preservation notes;
//! 6. dump ingestion parity with the in-memory graph, and local-mode
//!    soundness (never rejecting what the full graph accepts);
//! 7. open shapes immune to foreign statements, closed conformance
//!    always broken by them, over at least 1000 cases each;
//! 8. ambiguous repetition over 20 statements resolving (or hitting
//!    the step budget) well inside 30 seconds.

mod common;

use std::io::Cursor;
use std::time::{Duration, Instant};

use indexmap::IndexSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wshex::ast::{NodeConstraint, Schema, ShapeExpr, ShapeLabel, TripleExpr};
use wshex::convert::{convert, parse_shexc_subset};
use wshex::dump::{load_graph, stream_validate, IngestMode, IngestOptions};
use wshex::model::fixture::{CERN, LONDON, NEW_HAVEN, PA, SPAIN, TIM_BL, UK, VINT_CERF};
use wshex::model::{load_fixture_graph, DataValue, EntityId, Statement, Value, WikibaseGraph};
use wshex::parser::{parse_schema, render_schema};
use wshex::validator::{Outcome, Validator, ValidatorOptions};

use common::{gen, reference_typing};

const STRICT: &str = include_str!("fixtures/fixture_31.wshex");
const LENIENT: &str = include_str!("fixtures/fixture_31_lenient.wshex");
const OPTIONAL: &str = include_str!("fixtures/fixture_31_optional.wshex");
const SOURCE_SHEX: &str = include_str!("fixtures/listing1.shex");
const CONVERTED: &str = include_str!("fixtures/listing1_converted.wshex");
const DUMP: &str = include_str!("fixtures/fixture.jsonl");

/// The hand-derived verdicts of the worked-example graph against the
/// strict schema; criterion 6 replays them on the dump-loaded graph.
const MATRIX: [(EntityId, &str, bool); 8] = [
    (UK, "Country", true),
    (SPAIN, "Country", true),
    (CERN, "Organization", true),
    (LONDON, "Place", true),
    (PA, "Award", true),
    (NEW_HAVEN, "Place", false),
    (VINT_CERF, "Person", false),
    (TIM_BL, "Person", false),
];

fn pass(n: u32, what: &str, detail: String) {
    println!("criterion {n} ({what}): PASS — {detail}");
}

fn label(name: &str) -> ShapeLabel {
    ShapeLabel::new(name)
}

fn compile(schema: &Schema) -> Validator {
    Validator::new(schema, ValidatorOptions::default()).expect("schema compiles")
}

fn verdict(v: &Validator, graph: &WikibaseGraph, node: EntityId, shape: &str) -> Outcome {
    v.conforms(graph, node, &label(shape)).expect("shape is defined")
}

fn assert_matrix(graph: &WikibaseGraph, strict: &Validator, optional: &Validator) {
    for (node, shape, expected) in MATRIX {
        let want = if expected { Outcome::Conforming } else { Outcome::NonConforming };
        assert_eq!(verdict(strict, graph, node, shape), want, "{node}@{shape}");
    }
    assert_eq!(
        verdict(optional, graph, TIM_BL, "Person"),
        Outcome::Conforming,
        "optional cardinalities must repair the reference chain"
    );
}

#[test]
fn criterion_1_worked_example_conformance_matrix() {
    let started = Instant::now();
    let graph = load_fixture_graph();
    let strict = compile(&parse_schema(STRICT).expect("strict schema parses"));
    let optional = compile(&parse_schema(OPTIONAL).expect("optional schema parses"));
    assert_matrix(&graph, &strict, &optional);

    // The first researcher must fail through the award's companion
    // qualifier: into the referenced Person check, not anywhere closer.
    let report = strict.validate(&graph, &[(TIM_BL, label("Person"))]).unwrap();
    let trace = report.entries[0].trace.join(" > ");
    assert!(
        trace.contains("PropertyQs :P1706") && trace.contains("Ref @<Person>"),
        "the failure must cascade through the companion qualifier, got: {trace}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "matrix must evaluate in under 1s, took {elapsed:?}");
    pass(
        1,
        "worked-example conformance matrix",
        format!("9 pinned verdicts plus the qualifier cascade in {elapsed:?}"),
    );
}

/// Engine and reference checker must agree on every (entity, shape)
/// pair, including one entity absent from the graph.
fn agreement(schema: &Schema, graph: &WikibaseGraph, pedantic: bool) -> usize {
    let validator = Validator::new(schema, ValidatorOptions { pedantic, ..Default::default() })
        .expect("generated schemas compile");
    let mut nodes: Vec<EntityId> = graph.subjects().collect();
    nodes.push(EntityId::item(999));
    let targets: Vec<(EntityId, ShapeLabel)> = nodes
        .iter()
        .flat_map(|n| schema.labels().map(|l| (*n, l.clone())))
        .collect();
    let report = validator.validate(graph, &targets).expect("labels are defined");

    let extra: Vec<Value> = nodes.iter().map(|n| Value::EntityRef(*n)).collect();
    let sigma = reference_typing(graph, schema, pedantic, &extra);
    for entry in &report.entries {
        let engine = match entry.outcome {
            Outcome::Conforming => true,
            Outcome::NonConforming => false,
            Outcome::EngineLimit => panic!("these inputs must not exhaust the budget"),
        };
        let reference = sigma.contains(&(Value::EntityRef(entry.node), entry.shape.clone()));
        assert_eq!(
            engine, reference,
            "engine and reference disagree on {}@{} (pedantic: {pedantic})",
            entry.node, entry.shape
        );
    }
    report.entries.len()
}

fn tc_count_te(te: &TripleExpr) -> usize {
    match te {
        TripleExpr::Empty => 0,
        TripleExpr::Tc(_) => 1,
        TripleExpr::EachOf(a, b) | TripleExpr::OneOf(a, b) => tc_count_te(a) + tc_count_te(b),
        TripleExpr::Star(x) | TripleExpr::Repeat(x, _) => tc_count_te(x),
    }
}

fn tc_count_se(se: &ShapeExpr) -> usize {
    match se {
        ShapeExpr::Cond(_) | ShapeExpr::Ref(_) => 0,
        ShapeExpr::And(a, b) => tc_count_se(a) + tc_count_se(b),
        ShapeExpr::Shape { te, .. } => tc_count_te(te),
    }
}

/// The randomized cases must stay within the advertised size envelope:
/// at most 8 statements per node, 4 qualifiers per statement and 6
/// triple constraints per shape.
fn assert_case_bounds(schema: &Schema, graph: &WikibaseGraph) {
    for (label, se) in schema.shapes() {
        assert!(tc_count_se(se) <= 6, "shape {label} exceeds 6 triple constraints");
    }
    for subject in graph.subjects() {
        let stmts = graph.statements_of(subject);
        assert!(stmts.len() <= 8, "{subject} exceeds 8 statements");
        for st in stmts {
            assert!(st.qualifiers().len() <= 4, "a statement of {subject} exceeds 4 qualifiers");
        }
    }
}

#[test]
fn criterion_2_randomized_agreement_with_the_reference_checker() {
    let started = Instant::now();
    let mut verdicts = 0usize;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002 ^ seed);
        let schema = gen::schema(&mut rng);
        let graph = gen::graph(&mut rng, 8);
        assert_case_bounds(&schema, &graph);
        verdicts += agreement(&schema, &graph, seed % 2 == 1);
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "sweep must finish in under 60s, took {elapsed:?}");
    pass(
        2,
        "randomized engine/reference agreement",
        format!("{verdicts} verdicts across 500 schema/graph pairs in {elapsed:?}"),
    );
}

#[test]
fn criterion_3_inference_rule_checklist() {
    let table = common::rules::checks();

    let rules: IndexSet<&str> = table.iter().map(|c| c.rule).collect();
    assert_eq!(rules.len(), 15, "fifteen rules across the three families");
    for rule in &rules {
        for accepting in [true, false] {
            assert!(
                table.iter().any(|c| c.rule == *rule && c.accepting == accepting),
                "{rule} lacks an accepting={accepting} scenario"
            );
        }
    }
    for c in &table {
        assert!(
            c.holds,
            "{} rule {} must {} — scenario: {}",
            c.family,
            c.rule,
            if c.accepting { "accept" } else { "reject" },
            c.scenario
        );
    }

    // The scenarios whose exact inputs are part of the contract.
    let pinned: IndexSet<&str> = table.iter().filter_map(|c| c.pinned).collect();
    for tag in [
        "empty-bag-star",
        "empty-set-emptyqs",
        "openqs-filtering",
        "closeqs-nonfiltering",
        "literal-eachofqs",
    ] {
        assert!(pinned.contains(tag), "pinned scenario `{tag}` is missing from the checklist");
    }

    pass(3, "inference-rule checklist", format!("{} scenarios across 15 rules hold", table.len()));
}

#[test]
fn criterion_4_render_reparse_stability() {
    // Fixed corpus: the conversion golden plus the worked-example trio.
    for (name, text) in [
        ("conversion golden", CONVERTED),
        ("strict", STRICT),
        ("lenient", LENIENT),
        ("optional", OPTIONAL),
    ] {
        let first = parse_schema(text).expect("fixed corpus parses");
        let second = parse_schema(&render_schema(&first))
            .unwrap_or_else(|e| panic!("{name}: rendered schema must reparse: {e:?}"));
        assert_eq!(second, first, "{name}: reparse must reproduce the parse");
    }

    // Randomized corpus: rendered random schemas are the parse inputs,
    // compared after desugaring (rendering spells lowered sugar — e.g.
    // an optional — back as sugar, which the reparse lowers again).
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let mut stable = 0usize;
    for case in 0..200 {
        let text = render_schema(&gen::schema(&mut rng));
        let first = parse_schema(&text)
            .unwrap_or_else(|e| panic!("case {case}: rendered schema must parse: {e:?}\n{text}"));
        let second = parse_schema(&render_schema(&first)).expect("second render still parses");
        assert_eq!(
            second.desugar().unwrap(),
            first.desugar().unwrap(),
            "case {case}: desugared reparse diverged\n{text}"
        );
        assert_eq!(second, first, "case {case}: reparse must reproduce the parse\n{text}");
        stable += 1;
    }
    pass(4, "parse→render→parse stability", format!("fixed corpus plus {stable}/200 random schemas"));
}

#[test]
fn criterion_5_conversion_golden() {
    // (a) the reification-pattern source parses
    let subset = parse_shexc_subset(SOURCE_SHEX).expect("the source entity schema parses");
    let report = convert(&subset);
    assert!(report.rejected.is_empty(), "every construct converts: {:?}", report.rejected);

    let golden = parse_schema(CONVERTED).expect("the hand-written equivalent parses");
    assert_eq!(report.converted, golden, "conversion must reproduce the hand-written schema");

    // (b) identical verdicts over the worked-example corpus
    let graph = load_fixture_graph();
    let converted = compile(&report.converted);
    let hand_written = compile(&golden);
    let mut compared = 0usize;
    for node in graph.items() {
        for shape in golden.labels() {
            assert_eq!(
                converted.conforms(&graph, node, shape).unwrap(),
                hand_written.conforms(&graph, node, shape).unwrap(),
                "converted and hand-written schemas disagree on {node}@{shape}"
            );
            compared += 1;
        }
    }

    // (c) exactly the two cardinality-preservation notes
    let notes: Vec<(&str, &str)> =
        report.notes.iter().map(|n| (n.shape.name(), n.message.as_str())).collect();
    assert_eq!(
        notes,
        [
            (
                "Researcher",
                "preserved source cardinality `*` on reference-valued qualifier \
                 :P1706 @<Researcher>"
            ),
            (
                "Award",
                "preserved source cardinality `?` on reference-valued constraint \
                 :P17 @<Country>"
            ),
        ]
    );

    pass(
        5,
        "conversion golden",
        format!("structural match, {compared} identical verdicts, both preservation notes"),
    );
}

#[test]
fn criterion_6_dump_ingestion_parity_and_local_soundness() {
    // Full-graph mode: the framed five-document dump reproduces the
    // worked-example matrix…
    let (graph, stats) =
        load_graph(Cursor::new(DUMP), &IngestOptions::default()).expect("the dump loads");
    assert_eq!(stats.entities, 5, "five framed entity documents");
    let strict_schema = parse_schema(STRICT).expect("strict schema parses");
    let strict = compile(&strict_schema);
    let optional = compile(&parse_schema(OPTIONAL).expect("optional schema parses"));
    assert_matrix(&graph, &strict, &optional);

    // …and agrees with the in-memory construction of the same graph on
    // every (item, shape) pair.
    let reference_graph = load_fixture_graph();
    let mut compared = 0usize;
    for node in reference_graph.items() {
        for shape in strict_schema.labels() {
            assert_eq!(
                strict.conforms(&graph, node, shape).unwrap(),
                strict.conforms(&reference_graph, node, shape).unwrap(),
                "dump-loaded and in-memory graphs disagree on {node}@{shape}"
            );
            compared += 1;
        }
    }

    // Local mode is sound: a record it rejects is never a target the
    // full graph accepts.
    let local_options = IngestOptions { mode: IngestMode::LocalOnly, ..Default::default() };
    let mut locals = 0usize;
    for shape in strict_schema.labels() {
        stream_validate(
            Cursor::new(DUMP),
            &strict_schema,
            shape,
            &local_options,
            ValidatorOptions::default(),
            |record| {
                let full = strict.conforms(&graph, record.entity, shape).unwrap();
                assert!(
                    !(record.outcome == Outcome::NonConforming && full == Outcome::Conforming),
                    "local mode rejected {}@{shape} which the full graph accepts",
                    record.entity
                );
                locals += 1;
            },
        )
        .expect("streaming validation succeeds");
    }

    pass(
        6,
        "dump ingestion parity and local soundness",
        format!("{compared} full-mode verdicts match, {locals} local records sound"),
    );
}

/// Rewrite every shape in the expression tree as open.
fn opened_se(se: &ShapeExpr) -> ShapeExpr {
    match se {
        ShapeExpr::Cond(nc) => ShapeExpr::Cond(nc.clone()),
        ShapeExpr::And(a, b) => ShapeExpr::and(opened_se(a), opened_se(b)),
        ShapeExpr::Ref(l) => ShapeExpr::Ref(l.clone()),
        ShapeExpr::Shape { te, .. } => ShapeExpr::Shape { closed: false, te: opened_te(te) },
    }
}

fn opened_te(te: &TripleExpr) -> TripleExpr {
    match te {
        TripleExpr::Empty => TripleExpr::Empty,
        TripleExpr::EachOf(a, b) => TripleExpr::each_of(opened_te(a), opened_te(b)),
        TripleExpr::OneOf(a, b) => TripleExpr::one_of(opened_te(a), opened_te(b)),
        TripleExpr::Star(x) => TripleExpr::star(opened_te(x)),
        TripleExpr::Repeat(x, card) => TripleExpr::repeat(opened_te(x), *card),
        TripleExpr::Tc(tc) => {
            TripleExpr::tc_with(tc.predicate(), opened_se(tc.value()), tc.qualifiers().clone())
        }
    }
}

fn opened_schema(schema: &Schema) -> Schema {
    let mut out = Schema::new();
    for (label, se) in schema.shapes() {
        out.define(label.clone(), opened_se(se));
    }
    out
}

/// A statement whose predicate no generated schema ever mentions.
fn foreign_statement(subject: EntityId, tag: u32) -> Statement {
    Statement::new(
        format!("{subject}$foreign{tag}"),
        subject,
        EntityId::property(77),
        Value::Data(DataValue::quantity((tag + 1).to_string(), None).unwrap()),
    )
    .unwrap()
}

/// All verdicts for subjects (plus one absent entity) against all labels.
fn all_verdicts(
    validator: &Validator,
    graph: &WikibaseGraph,
    schema: &Schema,
) -> Vec<(EntityId, ShapeLabel, Outcome)> {
    let mut nodes: Vec<EntityId> = graph.subjects().collect();
    nodes.push(EntityId::item(999));
    let targets: Vec<(EntityId, ShapeLabel)> = nodes
        .iter()
        .flat_map(|n| schema.labels().map(|l| (*n, l.clone())))
        .collect();
    let report = validator.validate(graph, &targets).expect("labels are defined");
    report.entries.into_iter().map(|e| (e.node, e.shape, e.outcome)).collect()
}

/// A schema whose single shape `S` is a closed cover of the subject's
/// statements: one starred any-valued constraint per present predicate.
fn closed_cover(graph: &WikibaseGraph, subject: EntityId) -> Schema {
    let preds: IndexSet<EntityId> =
        graph.statements_of(subject).iter().map(|st| st.property()).collect();
    let te = preds
        .into_iter()
        .map(|p| TripleExpr::star(TripleExpr::tc(p, ShapeExpr::Cond(NodeConstraint::AnyValue))))
        .reduce(TripleExpr::each_of)
        .unwrap_or(TripleExpr::Empty);
    let mut schema = Schema::new();
    schema.define(label("S"), ShapeExpr::closed_shape(te));
    schema
}

#[test]
fn criterion_7_openness_and_closedness_under_foreign_statements() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);

    // Open shapes: a statement with an unmentioned predicate never
    // changes any verdict, conforming or not.
    let mut open_cases = 0usize;
    while open_cases < 1000 {
        let schema = opened_schema(&gen::schema(&mut rng));
        let mut graph = gen::graph(&mut rng, 4);
        let validator = compile(&schema);
        let before = all_verdicts(&validator, &graph, &schema);
        for (tag, subject) in graph.subjects().collect::<Vec<_>>().into_iter().enumerate() {
            graph.add_statement(foreign_statement(subject, tag as u32)).unwrap();
        }
        let after = all_verdicts(&validator, &graph, &schema);
        assert_eq!(before, after, "a foreign statement flipped an open-shape verdict");
        open_cases += before.len();
    }

    // Closed shapes: one fresh-predicate statement always breaks a
    // conforming node.
    let mut closed_cases = 0usize;
    while closed_cases < 1000 {
        let graph = gen::graph(&mut rng, 4);
        for subject in graph.subjects().collect::<Vec<_>>() {
            let schema = closed_cover(&graph, subject);
            let validator = compile(&schema);
            assert_eq!(
                verdict(&validator, &graph, subject, "S"),
                Outcome::Conforming,
                "the closed cover of {subject} must conform before spoiling"
            );
            let mut spoiled = graph.clone();
            spoiled.add_statement(foreign_statement(subject, 0)).unwrap();
            assert_eq!(
                verdict(&validator, &spoiled, subject, "S"),
                Outcome::NonConforming,
                "a foreign statement must break closed conformance of {subject}"
            );
            closed_cases += 1;
        }
    }

    pass(
        7,
        "open-shape immunity / closed-shape sensitivity",
        format!("{open_cases} verdicts immune, {closed_cases} conforming nodes flipped"),
    );
}

#[test]
fn criterion_8_ambiguous_repetition_stays_within_budget() {
    let p = EntityId::property(1);
    let any = || ShapeExpr::Cond(NodeConstraint::AnyValue);
    // Every statement matches both alternatives, so a naive matcher
    // faces an exponential number of derivations over 20 statements.
    let te = TripleExpr::star(TripleExpr::one_of(
        TripleExpr::tc(p, any()),
        TripleExpr::each_of(TripleExpr::tc(p, any()), TripleExpr::tc(p, any())),
    ));
    let mut schema = Schema::new();
    schema.define(label("S"), ShapeExpr::shape(te));

    let mut graph = WikibaseGraph::new();
    for i in 0..20u64 {
        let st = Statement::new(
            format!("Q1${i}"),
            EntityId::item(1),
            p,
            Value::EntityRef(EntityId::item(2 + i)),
        )
        .unwrap();
        graph.add_statement(st).unwrap();
    }

    let validator = compile(&schema); // default step budget
    let started = Instant::now();
    let outcome = verdict(&validator, &graph, EntityId::item(1), "S");
    let elapsed = started.elapsed();

    assert!(elapsed < Duration::from_secs(30), "must answer within 30s, took {elapsed:?}");
    assert!(
        matches!(outcome, Outcome::Conforming | Outcome::EngineLimit),
        "ambiguity must resolve or hit the budget, never misreport: got {outcome:?}"
    );
    pass(
        8,
        "bounded effort on ambiguous repetition",
        format!("20 ambiguous statements answered {outcome:?} in {elapsed:?}"),
    );
}
