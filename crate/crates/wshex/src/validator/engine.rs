//! The evaluation core: a chaotic-iteration worklist over (value, shape)
//! pairs and a memoized bitmask matcher for bag partitioning.
//!
//! Every consulted pair starts out assumed `Conforming`. Evaluating a
//! pair may downgrade it (`min`-clamp — statuses never move up), which
//! re-enqueues everything recorded as depending on it. The rule system
//! is negation-free, so evaluation is monotone in the assumptions and
//! the loop settles on the greatest fixed point: exactly the pairs with
//! a (possibly infinite) derivation. A plain memo table would not be
//! safe here — a pair evaluated early can cache a verdict based on an
//! assumption that is refuted later, and the stale cache entry would
//! make results depend on evaluation order.
//!
//! Bags are matched over subset bitmasks (hence the 128-statement
//! ceiling per scoped neighborhood). `EachOf` only enumerates subsets of
//! the statements both operands could consume — statements only one side
//! can take are routed there directly — and `Star` pins the lowest
//! remaining statement into the current piece so each decomposition is
//! generated once. Each pair evaluation gets a fresh step budget;
//! running out yields `InProgress`, never a wrong verdict.

use std::collections::{HashMap, VecDeque};

use indexmap::{IndexMap, IndexSet};

use super::{
    satisfies_cond, Compiled, LabelId, PsId, PsNode, QsId, SeId, SeNode, ShapeAssignment, TeId,
    TeNode, ValidationStatus, ValidatorOptions,
};
use crate::model::{EntityId, Qualifier, Statement, Value, WikibaseGraph};

/// One evaluation obligation: does this value conform to this shape?
pub(crate) type PairKey = (Value, LabelId);

/// What consulted an assumption — either another pair, or the ad-hoc
/// root expression of a bag-matching entry point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum DepKey {
    Pair(Value, LabelId),
    Root,
}

/// Largest scoped bag the bitmask matcher can represent.
const MAX_BAG: usize = 128;

fn full_mask(n: usize) -> u128 {
    debug_assert!(n <= MAX_BAG);
    if n == MAX_BAG {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// Per-bag scratch state: the scoped elements (statements or
/// qualifiers), a (node, mask) result memo, a per-element leaf memo, and
/// cached per-node eligibility masks. Valid only for one evaluation —
/// assumptions are frozen while a single evaluation runs, so the memos
/// can never go stale across a downgrade.
struct BagCtx<T> {
    items: Vec<T>,
    memo: HashMap<(usize, u128), ValidationStatus>,
    leaf: HashMap<(usize, usize), ValidationStatus>,
    pmask: HashMap<usize, u128>,
}

impl<T> BagCtx<T> {
    fn new(items: Vec<T>) -> Self {
        BagCtx { items, memo: HashMap::new(), leaf: HashMap::new(), pmask: HashMap::new() }
    }

    fn mask(&self) -> u128 {
        full_mask(self.items.len())
    }
}

type StmtCtx<'s> = BagCtx<&'s Statement>;
type QualCtx<'s> = BagCtx<&'s Qualifier>;

pub(crate) struct Engine<'a> {
    comp: &'a Compiled,
    graph: &'a WikibaseGraph,
    budget_per_eval: u64,
    pedantic: bool,
    /// Frozen mode: entity references are answered from this assignment
    /// instead of being evaluated.
    frozen: Option<&'a ShapeAssignment>,
    /// Streaming mode: shape checks on entities other than this one are
    /// assumed to hold (and flagged approximate).
    local_focus: Option<EntityId>,
    approx: bool,
    /// While tracing, assumption reads are non-recording so the failure
    /// walk cannot pollute the solved state.
    tracing: bool,
    assumptions: IndexMap<PairKey, ValidationStatus>,
    dependents: IndexMap<PairKey, IndexSet<DepKey>>,
    pending: VecDeque<PairKey>,
    in_pending: IndexSet<PairKey>,
    root_dirty: bool,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        comp: &'a Compiled,
        graph: &'a WikibaseGraph,
        options: ValidatorOptions,
    ) -> Self {
        Engine {
            comp,
            graph,
            budget_per_eval: options.step_budget,
            pedantic: options.pedantic,
            frozen: None,
            local_focus: None,
            approx: false,
            tracing: false,
            assumptions: IndexMap::new(),
            dependents: IndexMap::new(),
            pending: VecDeque::new(),
            in_pending: IndexSet::new(),
            root_dirty: false,
        }
    }

    pub(crate) fn frozen(
        comp: &'a Compiled,
        graph: &'a WikibaseGraph,
        options: ValidatorOptions,
        assignment: &'a ShapeAssignment,
    ) -> Self {
        Engine { frozen: Some(assignment), ..Engine::new(comp, graph, options) }
    }

    pub(crate) fn local(
        comp: &'a Compiled,
        graph: &'a WikibaseGraph,
        options: ValidatorOptions,
        focus: EntityId,
    ) -> Self {
        Engine { local_focus: Some(focus), ..Engine::new(comp, graph, options) }
    }

    pub(crate) fn approximate(&self) -> bool {
        self.approx
    }

    /// Solve the given pairs (and everything they transitively consult)
    /// to the greatest fixed point.
    pub(crate) fn solve_pairs(&mut self, keys: Vec<PairKey>) {
        for key in keys {
            self.ensure(key);
        }
        self.drain();
    }

    pub(crate) fn status_of(&self, key: &PairKey) -> ValidationStatus {
        self.assumptions.get(key).copied().unwrap_or(ValidationStatus::InProgress)
    }

    /// The conforming entity pairs the fixed point settled on.
    pub(crate) fn assignment(&self) -> ShapeAssignment {
        let mut out = ShapeAssignment::default();
        for ((v, l), s) in &self.assumptions {
            if *s == ValidationStatus::Conforming {
                if let Value::EntityRef(id) = v {
                    out.insert(*id, self.comp.labels[*l].clone());
                }
            }
        }
        out
    }

    /// Match an explicit statement bag against a compiled triple
    /// expression, iterating the worklist until the answer is stable
    /// under the final assumptions.
    pub(crate) fn solve_bag(&mut self, stmts: &[&Statement], te: TeId) -> ValidationStatus {
        if stmts.len() > MAX_BAG {
            return ValidationStatus::InProgress;
        }
        self.solve_root(|eng, budget| {
            let mut ctx = BagCtx::new(stmts.to_vec());
            let mask = ctx.mask();
            eng.match_te(&mut ctx, te, mask, &DepKey::Root, budget)
        })
    }

    /// Match an explicit qualifier set against a compiled qualifier
    /// specifier.
    pub(crate) fn solve_quals(&mut self, quals: &[Qualifier], qs: QsId) -> ValidationStatus {
        self.solve_root(|eng, budget| eng.match_qualifiers(quals, qs, &DepKey::Root, budget))
    }

    fn solve_root<F>(&mut self, mut eval: F) -> ValidationStatus
    where
        F: FnMut(&mut Self, &mut u64) -> ValidationStatus,
    {
        loop {
            self.root_dirty = false;
            let mut budget = self.budget_per_eval;
            let t = eval(self, &mut budget);
            self.drain();
            if !self.root_dirty {
                return t;
            }
        }
    }

    // -- worklist ------------------------------------------------------

    fn ensure(&mut self, key: PairKey) {
        if !self.assumptions.contains_key(&key) {
            self.assumptions.insert(key.clone(), ValidationStatus::Conforming);
            self.enqueue(key);
        }
    }

    fn enqueue(&mut self, key: PairKey) {
        if self.in_pending.insert(key.clone()) {
            self.pending.push_back(key);
        }
    }

    fn drain(&mut self) {
        while let Some(key) = self.pending.pop_front() {
            self.in_pending.swap_remove(&key);
            let t = self.eval_pair(&key);
            let cur = self.assumptions[&key];
            if t < cur {
                self.assumptions.insert(key.clone(), t);
                if let Some(deps) = self.dependents.get(&key) {
                    let deps: Vec<DepKey> = deps.iter().cloned().collect();
                    for dep in deps {
                        match dep {
                            DepKey::Pair(v, l) => self.enqueue((v, l)),
                            DepKey::Root => self.root_dirty = true,
                        }
                    }
                }
            }
        }
    }

    fn eval_pair(&mut self, key: &PairKey) -> ValidationStatus {
        let mut budget = self.budget_per_eval;
        let root = self.comp.roots[key.1];
        let cur = DepKey::Pair(key.0.clone(), key.1);
        self.eval_se(&key.0, root, &cur, &mut budget)
    }

    /// Read (and in normal mode, register interest in) the assumption
    /// for `v` against the shape `label`.
    fn consult(&mut self, v: &Value, label: LabelId, cur: &DepKey) -> ValidationStatus {
        if let Some(focus) = self.local_focus {
            let exact = match v {
                Value::Data(_) => true,
                Value::EntityRef(id) => self.comp.cond_only[label] || *id == focus,
            };
            if !exact {
                self.approx = true;
                return ValidationStatus::Conforming;
            }
        }
        if let Some(assignment) = self.frozen {
            if let Value::EntityRef(id) = v {
                return assignment.contains(*id, &self.comp.labels[label]).into();
            }
        }
        let key = (v.clone(), label);
        if self.tracing {
            return self.status_of(&key);
        }
        self.ensure(key.clone());
        self.dependents.entry(key.clone()).or_default().insert(cur.clone());
        self.assumptions[&key]
    }

    // -- shape expressions ---------------------------------------------

    fn eval_se(&mut self, v: &Value, se: SeId, cur: &DepKey, budget: &mut u64) -> ValidationStatus {
        let comp = self.comp;
        match &comp.ses[se] {
            SeNode::Cond(nc) => satisfies_cond(nc, v).into(),
            SeNode::And(a, b) => {
                let ta = self.eval_se(v, *a, cur, budget);
                if ta == ValidationStatus::NonConforming {
                    return ta;
                }
                ta.min(self.eval_se(v, *b, cur, budget))
            }
            SeNode::Ref(l) => self.consult(v, *l, cur),
            SeNode::Shape { closed, te } => self.eval_shape(v, *closed, *te, cur, budget),
        }
    }

    /// Scope the neighborhood (closed shapes keep everything, open
    /// shapes only the statements whose predicate the expression
    /// mentions) and match it as a bag.
    fn eval_shape(
        &mut self,
        v: &Value,
        closed: bool,
        te: TeId,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        let all: &[Statement] = match v {
            Value::EntityRef(id) => self.graph.statements_of(*id),
            Value::Data(_) => &[],
        };
        let scoped: Vec<&Statement> = if closed {
            all.iter().collect()
        } else {
            let preds = &self.comp.te_preds[te];
            all.iter().filter(|st| preds.contains(&st.property())).collect()
        };
        if scoped.len() > MAX_BAG {
            return ValidationStatus::InProgress;
        }
        let mut ctx = BagCtx::new(scoped);
        let mask = ctx.mask();
        self.match_te(&mut ctx, te, mask, cur, budget)
    }

    // -- triple expressions over statement bags --------------------------

    fn stmt_pmask(&self, ctx: &mut StmtCtx<'_>, te: TeId) -> u128 {
        if let Some(&m) = ctx.pmask.get(&te) {
            return m;
        }
        let preds = &self.comp.te_preds[te];
        let mut m = 0u128;
        for (i, st) in ctx.items.iter().enumerate() {
            if preds.contains(&st.property()) {
                m |= 1 << i;
            }
        }
        ctx.pmask.insert(te, m);
        m
    }

    fn match_te(
        &mut self,
        ctx: &mut StmtCtx<'_>,
        te: TeId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if *budget == 0 {
            return ValidationStatus::InProgress;
        }
        *budget -= 1;
        if let Some(&s) = ctx.memo.get(&(te, mask)) {
            return s;
        }
        let out = match self.comp.tes[te] {
            TeNode::Empty => (mask == 0).into(),
            TeNode::Tc { .. } => {
                if mask.count_ones() != 1 {
                    ValidationStatus::NonConforming
                } else {
                    self.stmt_leaf(ctx, te, mask.trailing_zeros() as usize, cur, budget)
                }
            }
            TeNode::OneOf(a, b) => {
                let ta = self.match_te(ctx, a, mask, cur, budget);
                if ta == ValidationStatus::Conforming {
                    ta
                } else {
                    ta.max(self.match_te(ctx, b, mask, cur, budget))
                }
            }
            TeNode::EachOf(a, b) => self.match_each_of(ctx, a, b, mask, cur, budget),
            TeNode::Star(x) => self.match_star(ctx, te, x, mask, cur, budget),
        };
        if *budget > 0 {
            ctx.memo.insert((te, mask), out);
        }
        out
    }

    /// Partition `mask` between the two operands. Statements only one
    /// operand's predicates cover are routed there outright; only the
    /// genuinely ambiguous remainder is enumerated.
    fn match_each_of(
        &mut self,
        ctx: &mut StmtCtx<'_>,
        a: TeId,
        b: TeId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        let ma = self.stmt_pmask(ctx, a);
        let mb = self.stmt_pmask(ctx, b);
        if mask & !(ma | mb) != 0 {
            return ValidationStatus::NonConforming;
        }
        let forced_a = mask & !mb;
        let free = mask & ma & mb;
        let mut best = ValidationStatus::NonConforming;
        let mut sub = free;
        loop {
            if *budget == 0 {
                return best.max(ValidationStatus::InProgress);
            }
            *budget -= 1;
            let left = forced_a | sub;
            let ta = self.match_te(ctx, a, left, cur, budget);
            if ta != ValidationStatus::NonConforming {
                let tb = self.match_te(ctx, b, mask & !left, cur, budget);
                best = best.max(ta.min(tb));
                if best == ValidationStatus::Conforming {
                    return best;
                }
            }
            if sub == 0 {
                return best;
            }
            sub = (sub - 1) & free;
        }
    }

    /// Split `mask` into non-empty pieces each matching `x`. The lowest
    /// remaining statement is pinned into the current piece, so every
    /// decomposition is tried exactly once; a single-constraint body
    /// short-circuits to"every statement matches on its own".
    fn match_star(
        &mut self,
        ctx: &mut StmtCtx<'_>,
        star: TeId,
        x: TeId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if mask == 0 {
            return ValidationStatus::Conforming;
        }
        let mx = self.stmt_pmask(ctx, x);
        if mask & !mx != 0 {
            return ValidationStatus::NonConforming;
        }
        if matches!(self.comp.tes[x], TeNode::Tc { .. }) {
            let mut best = ValidationStatus::Conforming;
            let mut m = mask;
            while m != 0 {
                let idx = m.trailing_zeros() as usize;
                m &= m - 1;
                best = best.min(self.stmt_leaf(ctx, x, idx, cur, budget));
                if best == ValidationStatus::NonConforming {
                    break;
                }
            }
            return best;
        }
        let low = mask & mask.wrapping_neg();
        let rest = mask & !low;
        let mut best = ValidationStatus::NonConforming;
        let mut sub = rest;
        loop {
            if *budget == 0 {
                return best.max(ValidationStatus::InProgress);
            }
            *budget -= 1;
            let piece = low | sub;
            let tp = self.match_te(ctx, x, piece, cur, budget);
            if tp != ValidationStatus::NonConforming {
                let tr = self.match_te(ctx, star, mask & !piece, cur, budget);
                best = best.max(tp.min(tr));
                if best == ValidationStatus::Conforming {
                    return best;
                }
            }
            if sub == 0 {
                return best;
            }
            sub = (sub - 1) & rest;
        }
    }

    /// Does one statement match one triple constraint (predicate, value
    /// expression, qualifier specifier)?
    fn stmt_leaf(
        &mut self,
        ctx: &mut StmtCtx<'_>,
        tc: TeId,
        idx: usize,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if let Some(&s) = ctx.leaf.get(&(tc, idx)) {
            return s;
        }
        let TeNode::Tc { predicate, value, qual } = self.comp.tes[tc] else {
            unreachable!("leaves are triple constraints")
        };
        let st = ctx.items[idx];
        let out = if st.property() != predicate {
            ValidationStatus::NonConforming
        } else {
            let tv = self.eval_se(st.value(), value, cur, budget);
            if tv == ValidationStatus::NonConforming {
                tv
            } else {
                tv.min(self.match_qualifiers(st.qualifiers(), qual, cur, budget))
            }
        };
        if *budget > 0 {
            ctx.leaf.insert((tc, idx), out);
        }
        out
    }

    // -- qualifier specifiers over qualifier sets -------------------------

    /// Scope a statement's qualifier set (closed specifiers keep every
    /// qualifier, open ones only those whose property the specifier
    /// mentions) and match it as a bag.
    fn match_qualifiers(
        &mut self,
        quals: &[Qualifier],
        qs: QsId,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        let node = &self.comp.qss[qs];
        let body = node.body;
        let scoped: Vec<&Qualifier> = if node.closed {
            quals.iter().collect()
        } else {
            let preds = &self.comp.ps_preds[body];
            quals.iter().filter(|q| preds.contains(&q.property())).collect()
        };
        if scoped.len() > MAX_BAG {
            return ValidationStatus::InProgress;
        }
        let mut ctx = BagCtx::new(scoped);
        let mask = ctx.mask();
        self.match_ps(&mut ctx, body, mask, cur, budget)
    }

    fn qual_pmask(&self, ctx: &mut QualCtx<'_>, ps: PsId) -> u128 {
        if let Some(&m) = ctx.pmask.get(&ps) {
            return m;
        }
        let preds = &self.comp.ps_preds[ps];
        let mut m = 0u128;
        for (i, q) in ctx.items.iter().enumerate() {
            if preds.contains(&q.property()) {
                m |= 1 << i;
            }
        }
        ctx.pmask.insert(ps, m);
        m
    }

    fn match_ps(
        &mut self,
        ctx: &mut QualCtx<'_>,
        ps: PsId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if *budget == 0 {
            return ValidationStatus::InProgress;
        }
        *budget -= 1;
        if let Some(&s) = ctx.memo.get(&(ps, mask)) {
            return s;
        }
        let out = match self.comp.pss[ps] {
            PsNode::Empty => (mask == 0).into(),
            PsNode::Prop { .. } => {
                if mask.count_ones() != 1 {
                    ValidationStatus::NonConforming
                } else {
                    self.qual_leaf(ctx, ps, mask.trailing_zeros() as usize, cur, budget)
                }
            }
            PsNode::OneOf(a, b) => {
                let ta = self.match_ps(ctx, a, mask, cur, budget);
                if ta == ValidationStatus::Conforming {
                    ta
                } else {
                    ta.max(self.match_ps(ctx, b, mask, cur, budget))
                }
            }
            PsNode::EachOf(a, b) if self.pedantic => {
                // literal conjunction: both operands must match the
                // whole set, instead of partitioning it between them
                let ta = self.match_ps(ctx, a, mask, cur, budget);
                if ta == ValidationStatus::NonConforming {
                    ta
                } else {
                    ta.min(self.match_ps(ctx, b, mask, cur, budget))
                }
            }
            PsNode::EachOf(a, b) => self.match_each_of_qs(ctx, a, b, mask, cur, budget),
            PsNode::Star(x) => self.match_star_qs(ctx, ps, x, mask, cur, budget),
        };
        if *budget > 0 {
            ctx.memo.insert((ps, mask), out);
        }
        out
    }

    fn match_each_of_qs(
        &mut self,
        ctx: &mut QualCtx<'_>,
        a: PsId,
        b: PsId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        let ma = self.qual_pmask(ctx, a);
        let mb = self.qual_pmask(ctx, b);
        if mask & !(ma | mb) != 0 {
            return ValidationStatus::NonConforming;
        }
        let forced_a = mask & !mb;
        let free = mask & ma & mb;
        let mut best = ValidationStatus::NonConforming;
        let mut sub = free;
        loop {
            if *budget == 0 {
                return best.max(ValidationStatus::InProgress);
            }
            *budget -= 1;
            let left = forced_a | sub;
            let ta = self.match_ps(ctx, a, left, cur, budget);
            if ta != ValidationStatus::NonConforming {
                let tb = self.match_ps(ctx, b, mask & !left, cur, budget);
                best = best.max(ta.min(tb));
                if best == ValidationStatus::Conforming {
                    return best;
                }
            }
            if sub == 0 {
                return best;
            }
            sub = (sub - 1) & free;
        }
    }

    fn match_star_qs(
        &mut self,
        ctx: &mut QualCtx<'_>,
        star: PsId,
        x: PsId,
        mask: u128,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if mask == 0 {
            return ValidationStatus::Conforming;
        }
        let mx = self.qual_pmask(ctx, x);
        if mask & !mx != 0 {
            return ValidationStatus::NonConforming;
        }
        if matches!(self.comp.pss[x], PsNode::Prop { .. }) {
            let mut best = ValidationStatus::Conforming;
            let mut m = mask;
            while m != 0 {
                let idx = m.trailing_zeros() as usize;
                m &= m - 1;
                best = best.min(self.qual_leaf(ctx, x, idx, cur, budget));
                if best == ValidationStatus::NonConforming {
                    break;
                }
            }
            return best;
        }
        let low = mask & mask.wrapping_neg();
        let rest = mask & !low;
        let mut best = ValidationStatus::NonConforming;
        let mut sub = rest;
        loop {
            if *budget == 0 {
                return best.max(ValidationStatus::InProgress);
            }
            *budget -= 1;
            let piece = low | sub;
            let tp = self.match_ps(ctx, x, piece, cur, budget);
            if tp != ValidationStatus::NonConforming {
                let tr = self.match_ps(ctx, star, mask & !piece, cur, budget);
                best = best.max(tp.min(tr));
                if best == ValidationStatus::Conforming {
                    return best;
                }
            }
            if sub == 0 {
                return best;
            }
            sub = (sub - 1) & rest;
        }
    }

    fn qual_leaf(
        &mut self,
        ctx: &mut QualCtx<'_>,
        ps: PsId,
        idx: usize,
        cur: &DepKey,
        budget: &mut u64,
    ) -> ValidationStatus {
        if let Some(&s) = ctx.leaf.get(&(ps, idx)) {
            return s;
        }
        let PsNode::Prop { property, value } = self.comp.pss[ps] else {
            unreachable!("leaves are property constraints")
        };
        let q = ctx.items[idx];
        let out = if q.property() != property {
            ValidationStatus::NonConforming
        } else {
            self.eval_se(q.value(), value, cur, budget)
        };
        if *budget > 0 {
            ctx.leaf.insert((ps, idx), out);
        }
        out
    }

    // -- failure traces ----------------------------------------------------
    //
    // A best-effort walk, taken after the fixed point stabilizes, that
    // re-derives the failure and records the rule names from the root
    // down to the deepest rule that could not be applied. Assumption
    // reads are non-recording here (`tracing`), so the walk cannot
    // change the solved state.

    pub(crate) fn trace_pair(&mut self, v: &Value, label: LabelId) -> Vec<String> {
        self.tracing = true;
        let mut budget = self.budget_per_eval;
        let mut visited = IndexSet::new();
        visited.insert((v.clone(), label));
        let mut path = Vec::new();
        self.trace_se(v, self.comp.roots[label], &mut visited, &mut path, &mut budget);
        self.tracing = false;
        path
    }

    fn trace_se(
        &mut self,
        v: &Value,
        se: SeId,
        visited: &mut IndexSet<PairKey>,
        path: &mut Vec<String>,
        budget: &mut u64,
    ) {
        match &self.comp.ses[se] {
            SeNode::Cond(_) => path.push("Cond".into()),
            SeNode::And(a, b) => {
                let (a, b) = (*a, *b);
                path.push("AND".into());
                let ta = self.eval_se(v, a, &DepKey::Root, budget);
                let failing = if ta == ValidationStatus::NonConforming { a } else { b };
                self.trace_se(v, failing, visited, path, budget);
            }
            SeNode::Ref(l) => {
                let l = *l;
                path.push(format!("Ref @<{}>", self.comp.labels[l]));
                if visited.insert((v.clone(), l)) {
                    self.trace_se(v, self.comp.roots[l], visited, path, budget);
                }
            }
            SeNode::Shape { closed, te } => {
                let (closed, te) = (*closed, *te);
                path.push(if closed { "ClosedShape".into() } else { "OpenShape".into() });
                let all: &[Statement] = match v {
                    Value::EntityRef(id) => self.graph.statements_of(*id),
                    Value::Data(_) => &[],
                };
                let scoped: Vec<&Statement> = if closed {
                    all.iter().collect()
                } else {
                    let preds = &self.comp.te_preds[te];
                    all.iter().filter(|st| preds.contains(&st.property())).collect()
                };
                if scoped.len() > MAX_BAG {
                    return;
                }
                let mut ctx = BagCtx::new(scoped);
                let mask = ctx.mask();
                self.trace_te(&mut ctx, te, mask, visited, path, budget);
            }
        }
    }

    fn trace_te(
        &mut self,
        ctx: &mut StmtCtx<'_>,
        te: TeId,
        mask: u128,
        visited: &mut IndexSet<PairKey>,
        path: &mut Vec<String>,
        budget: &mut u64,
    ) {
        match self.comp.tes[te] {
            TeNode::Empty => path.push("Empty".into()),
            TeNode::Tc { predicate, value, qual } => {
                path.push(format!("TripleConstraint :{predicate}"));
                if mask.count_ones() != 1 {
                    return;
                }
                let st = ctx.items[mask.trailing_zeros() as usize];
                if st.property() != predicate {
                    return;
                }
                if self.eval_se(st.value(), value, &DepKey::Root, budget)
                    == ValidationStatus::NonConforming
                {
                    self.trace_se(st.value(), value, visited, path, budget);
                } else {
                    self.trace_qualifiers(st.qualifiers(), qual, visited, path, budget);
                }
            }
            TeNode::OneOf(a, b) => {
                path.push("OneOf".into());
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                self.trace_te(ctx, a, mask, &mut visited.clone(), &mut pa, budget);
                self.trace_te(ctx, b, mask, &mut visited.clone(), &mut pb, budget);
                // report the branch that got furthest before failing
                path.extend(if pa.len() >= pb.len() { pa } else { pb });
            }
            TeNode::EachOf(a, b) => {
                path.push("EachOf".into());
                let ma = self.stmt_pmask(ctx, a);
                let mb = self.stmt_pmask(ctx, b);
                if mask & !(ma | mb) != 0 {
                    return; // a statement neither operand covers: EachOf itself is the blocker
                }
                let forced_a = mask & !mb;
                let free = mask & ma & mb;
                let mut sub = free;
                let mut tried = 0u32;
                loop {
                    tried += 1;
                    let left = forced_a | sub;
                    if self.match_te(ctx, a, left, &DepKey::Root, budget)
                        == ValidationStatus::Conforming
                    {
                        self.trace_te(ctx, b, mask & !left, visited, path, budget);
                        return;
                    }
                    if sub == 0 || tried >= 256 {
                        break;
                    }
                    sub = (sub - 1) & free;
                }
                // no split satisfies the first operand; explain it on
                // its fullest candidate set
                self.trace_te(ctx, a, forced_a | free, visited, path, budget);
            }
            TeNode::Star(x) => {
                path.push("Star".into());
                let mx = self.stmt_pmask(ctx, x);
                if mask & !mx != 0 {
                    return; // a statement the body never covers: Star itself is the blocker
                }
                // explain the singleton that gets deepest before failing
                let mut best: Option<Vec<String>> = None;
                let mut m = mask;
                while m != 0 {
                    let bit = m & m.wrapping_neg();
                    m &= m - 1;
                    if self.match_te(ctx, x, bit, &DepKey::Root, budget)
                        == ValidationStatus::NonConforming
                    {
                        let mut p = Vec::new();
                        self.trace_te(ctx, x, bit, &mut visited.clone(), &mut p, budget);
                        if best.as_ref().is_none_or(|b| p.len() > b.len()) {
                            best = Some(p);
                        }
                    }
                }
                if let Some(b) = best {
                    path.extend(b);
                }
            }
        }
    }

    fn trace_qualifiers(
        &mut self,
        quals: &[Qualifier],
        qs: QsId,
        visited: &mut IndexSet<PairKey>,
        path: &mut Vec<String>,
        budget: &mut u64,
    ) {
        let node = &self.comp.qss[qs];
        let body = node.body;
        let scoped: Vec<&Qualifier> = if node.closed {
            path.push("CloseQs".into());
            quals.iter().collect()
        } else {
            path.push("OpenQs".into());
            let preds = &self.comp.ps_preds[body];
            quals.iter().filter(|q| preds.contains(&q.property())).collect()
        };
        if scoped.len() > MAX_BAG {
            return;
        }
        let mut ctx = BagCtx::new(scoped);
        let mask = ctx.mask();
        self.trace_ps(&mut ctx, body, mask, visited, path, budget);
    }

    fn trace_ps(
        &mut self,
        ctx: &mut QualCtx<'_>,
        ps: PsId,
        mask: u128,
        visited: &mut IndexSet<PairKey>,
        path: &mut Vec<String>,
        budget: &mut u64,
    ) {
        match self.comp.pss[ps] {
            PsNode::Empty => path.push("EmptyQs".into()),
            PsNode::Prop { property, value } => {
                path.push(format!("PropertyQs :{property}"));
                if mask.count_ones() != 1 {
                    return;
                }
                let q = ctx.items[mask.trailing_zeros() as usize];
                if q.property() == property
                    && self.eval_se(q.value(), value, &DepKey::Root, budget)
                        == ValidationStatus::NonConforming
                {
                    self.trace_se(q.value(), value, visited, path, budget);
                }
            }
            PsNode::OneOf(a, b) => {
                path.push("OneOfQs".into());
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                self.trace_ps(ctx, a, mask, &mut visited.clone(), &mut pa, budget);
                self.trace_ps(ctx, b, mask, &mut visited.clone(), &mut pb, budget);
                path.extend(if pa.len() >= pb.len() { pa } else { pb });
            }
            PsNode::EachOf(a, b) if self.pedantic => {
                path.push("EachOfQs".into());
                let ta = self.match_ps(ctx, a, mask, &DepKey::Root, budget);
                let failing = if ta == ValidationStatus::NonConforming { a } else { b };
                self.trace_ps(ctx, failing, mask, visited, path, budget);
            }
            PsNode::EachOf(a, b) => {
                path.push("EachOfQs".into());
                let ma = self.qual_pmask(ctx, a);
                let mb = self.qual_pmask(ctx, b);
                if mask & !(ma | mb) != 0 {
                    return;
                }
                let forced_a = mask & !mb;
                let free = mask & ma & mb;
                let mut sub = free;
                let mut tried = 0u32;
                loop {
                    tried += 1;
                    let left = forced_a | sub;
                    if self.match_ps(ctx, a, left, &DepKey::Root, budget)
                        == ValidationStatus::Conforming
                    {
                        self.trace_ps(ctx, b, mask & !left, visited, path, budget);
                        return;
                    }
                    if sub == 0 || tried >= 256 {
                        break;
                    }
                    sub = (sub - 1) & free;
                }
                self.trace_ps(ctx, a, forced_a | free, visited, path, budget);
            }
            PsNode::Star(x) => {
                path.push("StarQs".into());
                let mx = self.qual_pmask(ctx, x);
                if mask & !mx != 0 {
                    return;
                }
                let mut best: Option<Vec<String>> = None;
                let mut m = mask;
                while m != 0 {
                    let bit = m & m.wrapping_neg();
                    m &= m - 1;
                    if self.match_ps(ctx, x, bit, &DepKey::Root, budget)
                        == ValidationStatus::NonConforming
                    {
                        let mut p = Vec::new();
                        self.trace_ps(ctx, x, bit, &mut visited.clone(), &mut p, budget);
                        if best.as_ref().is_none_or(|b| p.len() > b.len()) {
                            best = Some(p);
                        }
                    }
                }
                if let Some(b) = best {
                    path.extend(b);
                }
            }
        }
    }
}
