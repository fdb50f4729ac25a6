//! Rule planning (safety) and semi-naive evaluation per stratum.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;

use indexmap::IndexSet;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use super::{
    stratify, AggFunc, Aggregate, Atom, BinOp, CmpOp, Literal, PredKey, Program, ProgramError,
    Rule, Term,
};
use crate::term::{Fact, GroundTerm};

const MAX_EXPONENT: u32 = 4096;
const MAX_INTERVAL: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("evaluation error in rule on line {line} `{rule}` with {binding}: {message}")]
    Runtime {
        line: usize,
        rule: String,
        binding: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
enum Guard {
    None,
    Assign(usize),
    Compare(CmpOp, Term),
}

#[derive(Debug, Clone)]
struct ElementPlan {
    terms: Vec<Term>,
    steps: Vec<Step>,
    locals: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Step {
    Scan {
        atom: Atom,
        /// Ordinal among top-level scans, used to pick the delta scan.
        ordinal: usize,
        /// First argument is ground when the scan runs.
        keyed: bool,
    },
    Filter(Term, CmpOp, Term),
    Assign(usize, Term),
    Negation(Atom),
    Aggregate {
        func: AggFunc,
        elements: Vec<ElementPlan>,
        guard: Guard,
    },
}

#[derive(Debug, Clone)]
struct Plan {
    steps: Vec<Step>,
    scans: usize,
}

fn term_vars(t: &Term) -> (Vec<usize>, Vec<usize>) {
    let (mut plain, mut computed) = (Vec::new(), Vec::new());
    t.visit_vars(&mut |v, c| if c { computed.push(v) } else { plain.push(v) });
    (plain, computed)
}

fn all_vars_term(t: &Term, out: &mut Vec<usize>) {
    t.visit_vars(&mut |v, _| out.push(v));
}

fn all_vars_atom(a: &Atom, out: &mut Vec<usize>) {
    a.args.iter().for_each(|t| all_vars_term(t, out));
}

fn all_vars_literal(l: &Literal, out: &mut Vec<usize>) {
    match l {
        Literal::Pos(a) | Literal::Neg(a) => all_vars_atom(a, out),
        Literal::Cmp(a, _, b) => {
            all_vars_term(a, out);
            all_vars_term(b, out);
        }
        Literal::Agg(agg) => {
            for e in &agg.elements {
                e.terms.iter().for_each(|t| all_vars_term(t, out));
                e.condition.iter().for_each(|l| all_vars_literal(l, out));
            }
            if let Some((_, t)) = &agg.guard {
                all_vars_term(t, out);
            }
        }
    }
}

fn body_has_interval(l: &Literal) -> bool {
    match l {
        Literal::Pos(a) | Literal::Neg(a) => a.args.iter().any(Term::has_interval),
        Literal::Cmp(a, _, b) => a.has_interval() || b.has_interval(),
        Literal::Agg(agg) => {
            agg.elements.iter().any(|e| {
                e.terms.iter().any(Term::has_interval) || e.condition.iter().any(body_has_interval)
            }) || agg.guard.as_ref().is_some_and(|(_, t)| t.has_interval())
        }
    }
}

fn has_external_atom(a: &Atom) -> bool {
    fn ext(t: &Term) -> bool {
        match t {
            Term::External(..) => true,
            Term::Func(_, a) | Term::Tuple(a) => a.iter().any(ext),
            Term::Binary(_, a, b) | Term::Interval(a, b) => ext(a) || ext(b),
            Term::Neg(a) => ext(a),
            _ => false,
        }
    }
    a.args.iter().any(ext)
}

struct Planner<'r> {
    rule: &'r Rule,
}

impl Planner<'_> {
    fn unsafe_var(&self, v: usize) -> ProgramError {
        ProgramError::Unsafe {
            line: self.rule.line,
            variable: self.rule.var_names[v].clone(),
            rule: self.rule.to_string(),
        }
    }

    /// Orders `lits` so every step only needs variables bound before it.
    /// `outside` counts, per literal, the variables occurring elsewhere in the rule.
    fn plan(
        &self,
        lits: &[Literal],
        bound: &mut HashSet<usize>,
        outer_vars: &HashSet<usize>,
        ordinal: &mut usize,
    ) -> Result<Vec<Step>, ProgramError> {
        let mut remaining: Vec<usize> = (0..lits.len()).collect();
        let mut steps = Vec::new();
        while !remaining.is_empty() {
            let mut chosen = None;
            for (ri, &li) in remaining.iter().enumerate() {
                if let Some(step) = self.try_non_scan(lits, li, bound, outer_vars, ordinal)? {
                    chosen = Some((ri, step));
                    break;
                }
            }
            if chosen.is_none() {
                for (ri, &li) in remaining.iter().enumerate() {
                    if let Literal::Pos(atom) = &lits[li] {
                        let mut plain = Vec::new();
                        let mut computed = Vec::new();
                        for t in &atom.args {
                            let (p, c) = term_vars(t);
                            plain.extend(p);
                            computed.extend(c);
                        }
                        if computed.iter().all(|v| bound.contains(v) || plain.contains(v)) {
                            let keyed = atom.args.first().is_some_and(|t| {
                                !matches!(t, Term::Anon) && {
                                    let mut vs = Vec::new();
                                    all_vars_term(t, &mut vs);
                                    vs.iter().all(|v| bound.contains(v))
                                } && !contains_anon(t)
                            });
                            bound.extend(plain);
                            let step = Step::Scan {
                                atom: atom.clone(),
                                ordinal: *ordinal,
                                keyed,
                            };
                            *ordinal += 1;
                            chosen = Some((ri, step));
                            break;
                        }
                    }
                }
            }
            match chosen {
                Some((ri, step)) => {
                    remaining.remove(ri);
                    steps.push(step);
                }
                None => {
                    let mut vars = Vec::new();
                    for &li in &remaining {
                        all_vars_literal(&lits[li], &mut vars);
                    }
                    vars.sort_unstable();
                    let v = vars
                        .into_iter()
                        .find(|v| !bound.contains(v))
                        .expect("a stuck literal has an unbound variable");
                    return Err(self.unsafe_var(v));
                }
            }
        }
        Ok(steps)
    }

    fn try_non_scan(
        &self,
        lits: &[Literal],
        li: usize,
        bound: &mut HashSet<usize>,
        outer_vars: &HashSet<usize>,
        ordinal: &mut usize,
    ) -> Result<Option<Step>, ProgramError> {
        let all_bound = |t: &Term, bound: &HashSet<usize>| {
            let mut vs = Vec::new();
            all_vars_term(t, &mut vs);
            vs.iter().all(|v| bound.contains(v))
        };
        match &lits[li] {
            Literal::Pos(_) => Ok(None),
            Literal::Cmp(a, op, b) => {
                if contains_anon(a) || contains_anon(b) {
                    return Err(self.unsafe_anon());
                }
                if all_bound(a, bound) && all_bound(b, bound) {
                    return Ok(Some(Step::Filter(a.clone(), *op, b.clone())));
                }
                if *op == CmpOp::Eq {
                    if let Term::Var(v) = a {
                        if !bound.contains(v) && all_bound(b, bound) {
                            bound.insert(*v);
                            return Ok(Some(Step::Assign(*v, b.clone())));
                        }
                    }
                    if let Term::Var(v) = b {
                        if !bound.contains(v) && all_bound(a, bound) {
                            bound.insert(*v);
                            return Ok(Some(Step::Assign(*v, a.clone())));
                        }
                    }
                }
                Ok(None)
            }
            Literal::Neg(atom) => {
                let mut vs = Vec::new();
                all_vars_atom(atom, &mut vs);
                if vs.iter().all(|v| bound.contains(v)) {
                    Ok(Some(Step::Negation(atom.clone())))
                } else {
                    Ok(None)
                }
            }
            Literal::Agg(agg) => self.try_aggregate(agg, lits, li, bound, outer_vars, ordinal),
        }
    }

    fn unsafe_anon(&self) -> ProgramError {
        ProgramError::Unsafe {
            line: self.rule.line,
            variable: "_".into(),
            rule: self.rule.to_string(),
        }
    }

    fn try_aggregate(
        &self,
        agg: &Aggregate,
        lits: &[Literal],
        li: usize,
        bound: &mut HashSet<usize>,
        outer_vars: &HashSet<usize>,
        _ordinal: &mut usize,
    ) -> Result<Option<Step>, ProgramError> {
        // variables of this aggregate that also occur elsewhere are global
        let mut elsewhere: HashSet<usize> = outer_vars.clone();
        for (j, l) in lits.iter().enumerate() {
            if j != li {
                let mut vs = Vec::new();
                all_vars_literal(l, &mut vs);
                elsewhere.extend(vs);
            }
        }
        let mut elem_vars = Vec::new();
        for e in &agg.elements {
            e.terms.iter().for_each(|t| all_vars_term(t, &mut elem_vars));
            e.condition.iter().for_each(|l| all_vars_literal(l, &mut elem_vars));
        }
        let (guard, assigned) = match &agg.guard {
            None => (Guard::None, None),
            Some((CmpOp::Eq, Term::Var(v))) if !bound.contains(v) => (Guard::Assign(*v), Some(*v)),
            Some((op, t)) => {
                let mut vs = Vec::new();
                all_vars_term(t, &mut vs);
                if !vs.iter().all(|v| bound.contains(v)) {
                    return Ok(None);
                }
                (Guard::Compare(*op, t.clone()), None)
            }
        };
        let globals: Vec<usize> = elem_vars
            .iter()
            .copied()
            .filter(|v| elsewhere.contains(v) || Some(*v) == assigned)
            .collect();
        if !globals.iter().all(|v| bound.contains(v)) {
            return Ok(None);
        }
        let mut elements = Vec::new();
        for e in &agg.elements {
            let mut local_bound = bound.clone();
            let mut nested_ordinal = 0;
            let steps = self.plan(&e.condition, &mut local_bound, &HashSet::new(), &mut nested_ordinal)?;
            let mut tvars = Vec::new();
            e.terms.iter().for_each(|t| all_vars_term(t, &mut tvars));
            if let Some(v) = tvars.into_iter().find(|v| !local_bound.contains(v)) {
                return Err(self.unsafe_var(v));
            }
            if e.terms.iter().any(contains_anon) {
                return Err(self.unsafe_anon());
            }
            let mut locals: Vec<usize> = local_bound.difference(bound).copied().collect();
            locals.sort_unstable();
            elements.push(ElementPlan {
                terms: e.terms.clone(),
                steps,
                locals,
            });
        }
        if let Some(v) = assigned {
            bound.insert(v);
        }
        Ok(Some(Step::Aggregate {
            func: agg.func,
            elements,
            guard,
        }))
    }
}

fn contains_anon(t: &Term) -> bool {
    match t {
        Term::Anon => true,
        Term::Func(_, a) | Term::Tuple(a) | Term::External(_, a) => a.iter().any(contains_anon),
        Term::Binary(_, a, b) | Term::Interval(a, b) => contains_anon(a) || contains_anon(b),
        Term::Neg(a) => contains_anon(a),
        _ => false,
    }
}

fn plan_rule(rule: &Rule) -> Result<Plan, ProgramError> {
    if rule.body.iter().any(body_has_interval) {
        return Err(ProgramError::Unsupported {
            line: rule.line,
            construct: "interval in rule body".into(),
        });
    }
    if let Some(h) = &rule.head {
        if h.args.iter().any(contains_anon) {
            return Err(ProgramError::Unsafe {
                line: rule.line,
                variable: "_".into(),
                rule: rule.to_string(),
            });
        }
        if has_external_atom(h) {
            return Err(ProgramError::Unsupported {
                line: rule.line,
                construct: "external term in rule head".into(),
            });
        }
    }
    let planner = Planner { rule };
    let mut outer = HashSet::new();
    if let Some(h) = &rule.head {
        let mut vs = Vec::new();
        all_vars_atom(h, &mut vs);
        outer.extend(vs);
    }
    let mut bound = HashSet::new();
    let mut ordinal = 0;
    let steps = planner.plan(&rule.body, &mut bound, &outer, &mut ordinal)?;
    if let Some(h) = &rule.head {
        let mut vs = Vec::new();
        all_vars_atom(h, &mut vs);
        vs.sort_unstable();
        if let Some(v) = vs.into_iter().find(|v| !bound.contains(v)) {
            return Err(planner.unsafe_var(v));
        }
    }
    Ok(Plan {
        steps,
        scans: ordinal,
    })
}

/// Checks that every variable of the rule is bound by a positive literal
/// or a safe assignment.
pub(crate) fn check_safety(rule: &Rule) -> Result<(), ProgramError> {
    plan_rule(rule).map(|_| ())
}

#[derive(Default)]
struct Relation {
    tuples: IndexSet<Vec<GroundTerm>>,
    by_first: Option<HashMap<GroundTerm, Vec<usize>>>,
}

impl Relation {
    fn insert(&mut self, tuple: Vec<GroundTerm>) -> bool {
        let first = tuple.first().cloned();
        let (idx, fresh) = self.tuples.insert_full(tuple);
        if fresh {
            if let (Some(index), Some(key)) = (&mut self.by_first, first) {
                index.entry(key).or_default().push(idx);
            }
        }
        fresh
    }

    fn ensure_index(&mut self) {
        if self.by_first.is_none() {
            let mut index: HashMap<GroundTerm, Vec<usize>> = HashMap::new();
            for (i, t) in self.tuples.iter().enumerate() {
                if let Some(k) = t.first() {
                    index.entry(k.clone()).or_default().push(i);
                }
            }
            self.by_first = Some(index);
        }
    }
}

#[derive(Default)]
struct Store {
    rels: HashMap<PredKey, Relation>,
}

impl Store {
    fn insert(&mut self, key: &PredKey, tuple: Vec<GroundTerm>) -> bool {
        if let Some(rel) = self.rels.get_mut(key) {
            return rel.insert(tuple);
        }
        self.rels.entry(key.clone()).or_default().insert(tuple)
    }

    fn len(&self, key: &PredKey) -> usize {
        self.rels.get(key).map_or(0, |r| r.tuples.len())
    }
}

struct Ctx<'a> {
    store: &'a Store,
    rule: &'a Rule,
    /// (scan ordinal, index range) restricting one scan to the delta.
    delta: Option<(usize, Range<usize>)>,
    limits: &'a HashMap<PredKey, usize>,
}

type Binding = Vec<Option<GroundTerm>>;

impl Ctx<'_> {
    fn runtime(&self, binding: &Binding, message: impl Into<String>) -> EvalError {
        let shown: Vec<String> = binding
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                v.as_ref()
                    .map(|t| format!("{}={}", self.rule.var_names[i], t))
            })
            .collect();
        EvalError::Runtime {
            line: self.rule.line,
            rule: self.rule.to_string(),
            binding: if shown.is_empty() {
                "no bindings".into()
            } else {
                shown.join(", ")
            },
            message: message.into(),
        }
    }

    fn eval(&self, t: &Term, b: &Binding) -> Result<GroundTerm, EvalError> {
        Ok(match t {
            Term::Var(v) => b[*v]
                .clone()
                .ok_or_else(|| self.runtime(b, "variable used before binding"))?,
            Term::Number(n) => GroundTerm::Number(n.clone()),
            Term::Str(s) => GroundTerm::Str(s.clone()),
            Term::Const(c) => GroundTerm::Const(c.clone()),
            Term::Func(name, args) => GroundTerm::Func {
                name: name.clone(),
                args: args.iter().map(|a| self.eval(a, b)).collect::<Result<_, _>>()?,
            },
            Term::Tuple(args) => {
                GroundTerm::Tuple(args.iter().map(|a| self.eval(a, b)).collect::<Result<_, _>>()?)
            }
            Term::Neg(a) => match self.eval(a, b)? {
                GroundTerm::Number(n) => GroundTerm::Number(-n),
                other => return Err(self.runtime(b, format!("arithmetic on non-number {other}"))),
            },
            Term::Binary(op, x, y) => {
                let (x, y) = (self.eval(x, b)?, self.eval(y, b)?);
                let (GroundTerm::Number(x), GroundTerm::Number(y)) = (&x, &y) else {
                    let bad = if x.as_number().is_none() { &x } else { &y };
                    return Err(self.runtime(b, format!("arithmetic on non-number {bad}")));
                };
                GroundTerm::Number(self.arith(*op, x, y, b)?)
            }
            Term::Anon => return Err(self.runtime(b, "anonymous variable in expression")),
            Term::Interval(..) => return Err(self.runtime(b, "interval outside a rule head")),
            Term::External(name, _) => {
                return Err(self.runtime(b, format!("external function @{name} is not available")))
            }
        })
    }

    fn arith(&self, op: BinOp, x: &BigInt, y: &BigInt, b: &Binding) -> Result<BigInt, EvalError> {
        Ok(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div | BinOp::Mod if y.is_zero() => {
                return Err(self.runtime(b, "division by zero"))
            }
            BinOp::Div => x / y,
            BinOp::Mod => x % y,
            BinOp::Pow => {
                if y.is_negative() {
                    return Err(self.runtime(b, "negative exponent"));
                }
                match y.to_u32().filter(|e| *e <= MAX_EXPONENT) {
                    Some(e) => num_traits::pow::Pow::pow(x, e),
                    None => return Err(self.runtime(b, "exponent too large")),
                }
            }
        })
    }

    /// Matches a pattern against a ground term, binding plain variables.
    fn unify(
        &self,
        p: &Term,
        g: &GroundTerm,
        b: &mut Binding,
        trail: &mut Vec<usize>,
    ) -> Result<bool, EvalError> {
        match (p, g) {
            (Term::Anon, _) => Ok(true),
            (Term::Var(v), _) => match &b[*v] {
                Some(cur) => Ok(cur == g),
                None => {
                    b[*v] = Some(g.clone());
                    trail.push(*v);
                    Ok(true)
                }
            },
            (Term::Number(n), GroundTerm::Number(m)) => Ok(n == m),
            (Term::Str(s), GroundTerm::Str(t)) => Ok(s == t),
            (Term::Const(c), GroundTerm::Const(d)) => Ok(c == d),
            (Term::Func(n, args), GroundTerm::Func { name, args: gargs }) => {
                if n != name || args.len() != gargs.len() {
                    return Ok(false);
                }
                self.unify_all(args, gargs, b, trail)
            }
            (Term::Tuple(args), GroundTerm::Tuple(gargs)) => {
                if args.len() != gargs.len() {
                    return Ok(false);
                }
                self.unify_all(args, gargs, b, trail)
            }
            (Term::Binary(..) | Term::Neg(_), _) => Ok(&self.eval(p, b)? == g),
            _ => Ok(false),
        }
    }

    fn unify_all(
        &self,
        ps: &[Term],
        gs: &[GroundTerm],
        b: &mut Binding,
        trail: &mut Vec<usize>,
    ) -> Result<bool, EvalError> {
        // structural positions first so computed ones see their variables bound
        for (p, g) in ps.iter().zip(gs) {
            if !matches!(p, Term::Binary(..) | Term::Neg(_)) && !self.unify(p, g, b, trail)? {
                return Ok(false);
            }
        }
        for (p, g) in ps.iter().zip(gs) {
            if matches!(p, Term::Binary(..) | Term::Neg(_)) && !self.unify(p, g, b, trail)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn undo(b: &mut Binding, trail: &mut Vec<usize>, mark: usize) {
        for v in trail.drain(mark..) {
            b[v] = None;
        }
    }

    fn candidates(&self, atom: &Atom, range: Range<usize>, keyed: bool, b: &Binding) -> Result<Vec<usize>, EvalError> {
        let key = atom.key();
        let Some(rel) = self.store.rels.get(&key) else {
            return Ok(Vec::new());
        };
        if keyed {
            if let Some(index) = &rel.by_first {
                let k = self.eval(&atom.args[0], b)?;
                let Some(ids) = index.get(&k) else {
                    return Ok(Vec::new());
                };
                let lo = ids.partition_point(|&i| i < range.start);
                let hi = ids.partition_point(|&i| i < range.end);
                return Ok(ids[lo..hi].to_vec());
            }
        }
        Ok(range.collect())
    }

    fn run(
        &self,
        steps: &[Step],
        b: &mut Binding,
        trail: &mut Vec<usize>,
        emit: &mut dyn FnMut(&Binding) -> Result<(), EvalError>,
    ) -> Result<(), EvalError> {
        let Some((step, rest)) = steps.split_first() else {
            return emit(b);
        };
        match step {
            Step::Scan {
                atom,
                ordinal,
                keyed,
            } => {
                let key = atom.key();
                let limit = self.limits.get(&key).copied().unwrap_or(self.store.len(&key));
                let range = match &self.delta {
                    Some((o, r)) if o == ordinal => r.clone(),
                    _ => 0..limit,
                };
                let Some(rel) = self.store.rels.get(&key) else {
                    return Ok(());
                };
                for i in self.candidates(atom, range, *keyed, b)? {
                    let tuple = &rel.tuples[i];
                    let mark = trail.len();
                    if self.unify_all(&atom.args, tuple, b, trail)? {
                        self.run(rest, b, trail, emit)?;
                    }
                    Self::undo(b, trail, mark);
                }
                Ok(())
            }
            Step::Filter(x, op, y) => {
                let (x, y) = (self.eval(x, b)?, self.eval(y, b)?);
                if op.holds(x.cmp(&y)) {
                    self.run(rest, b, trail, emit)?;
                }
                Ok(())
            }
            Step::Assign(v, t) => {
                let value = self.eval(t, b)?;
                b[*v] = Some(value);
                let r = self.run(rest, b, trail, emit);
                b[*v] = None;
                r
            }
            Step::Negation(atom) => {
                if !self.exists(atom, b)? {
                    self.run(rest, b, trail, emit)?;
                }
                Ok(())
            }
            Step::Aggregate {
                func,
                elements,
                guard,
            } => {
                let value = self.aggregate(*func, elements, b, trail)?;
                match guard {
                    Guard::None => {
                        if value != AggValue::Inf && value != AggValue::Sup {
                            self.run(rest, b, trail, emit)?;
                        }
                        Ok(())
                    }
                    Guard::Assign(v) => {
                        let AggValue::Term(t) = value else {
                            return Ok(());
                        };
                        b[*v] = Some(t);
                        let r = self.run(rest, b, trail, emit);
                        b[*v] = None;
                        r
                    }
                    Guard::Compare(op, t) => {
                        let rhs = AggValue::Term(self.eval(t, b)?);
                        if op.holds(value.cmp(&rhs)) {
                            self.run(rest, b, trail, emit)?;
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    fn exists(&self, atom: &Atom, b: &mut Binding) -> Result<bool, EvalError> {
        let key = atom.key();
        let Some(rel) = self.store.rels.get(&key) else {
            return Ok(false);
        };
        if !atom.args.iter().any(contains_anon) {
            let tuple = atom
                .args
                .iter()
                .map(|t| self.eval(t, b))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(rel.tuples.contains(&tuple));
        }
        let mut trail = Vec::new();
        for tuple in &rel.tuples {
            let ok = self.unify_all(&atom.args, tuple, b, &mut trail)?;
            Self::undo(b, &mut trail, 0);
            if ok {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn aggregate(
        &self,
        func: AggFunc,
        elements: &[ElementPlan],
        b: &mut Binding,
        trail: &mut Vec<usize>,
    ) -> Result<AggValue, EvalError> {
        let inner = Ctx {
            store: self.store,
            rule: self.rule,
            delta: None,
            limits: self.limits,
        };
        let mut tuples: BTreeSet<Vec<GroundTerm>> = BTreeSet::new();
        for e in elements {
            let mut collect = |bb: &Binding| -> Result<(), EvalError> {
                let t = e
                    .terms
                    .iter()
                    .map(|t| inner.eval(t, bb))
                    .collect::<Result<Vec<_>, _>>()?;
                tuples.insert(t);
                Ok(())
            };
            inner.run(&e.steps, b, trail, &mut collect)?;
            for &v in &e.locals {
                b[v] = None;
            }
        }
        let weights = || tuples.iter().filter_map(|t| t.first().and_then(GroundTerm::as_number));
        Ok(match func {
            AggFunc::Count => AggValue::Term(GroundTerm::number(tuples.len())),
            AggFunc::Sum => AggValue::Term(GroundTerm::Number(weights().sum())),
            AggFunc::SumPlus => AggValue::Term(GroundTerm::Number(
                weights().filter(|w| w.is_positive()).sum(),
            )),
            AggFunc::Min => tuples
                .iter()
                .filter_map(|t| t.first())
                .min()
                .map_or(AggValue::Sup, |t| AggValue::Term(t.clone())),
            AggFunc::Max => tuples
                .iter()
                .filter_map(|t| t.first())
                .max()
                .map_or(AggValue::Inf, |t| AggValue::Term(t.clone())),
        })
    }

    fn expand_head(&self, t: &Term, b: &Binding) -> Result<Vec<GroundTerm>, EvalError> {
        match t {
            Term::Interval(lo, hi) => {
                let (lo, hi) = (self.eval(lo, b)?, self.eval(hi, b)?);
                let (GroundTerm::Number(lo), GroundTerm::Number(hi)) = (&lo, &hi) else {
                    return Err(self.runtime(b, "interval bounds must be integers"));
                };
                if hi < lo {
                    return Ok(Vec::new());
                }
                let span = (hi - lo).to_usize().filter(|n| *n < MAX_INTERVAL);
                let Some(span) = span else {
                    return Err(self.runtime(b, "interval too large"));
                };
                Ok((0..=span).map(|i| GroundTerm::Number(lo + i)).collect())
            }
            Term::Func(name, args) => Ok(self
                .expand_args(args, b)?
                .into_iter()
                .map(|args| GroundTerm::Func {
                    name: name.clone(),
                    args,
                })
                .collect()),
            Term::Tuple(args) => Ok(self
                .expand_args(args, b)?
                .into_iter()
                .map(GroundTerm::Tuple)
                .collect()),
            _ if t.has_interval() => Err(self.runtime(b, "interval inside arithmetic")),
            _ => Ok(vec![self.eval(t, b)?]),
        }
    }

    fn expand_args(&self, args: &[Term], b: &Binding) -> Result<Vec<Vec<GroundTerm>>, EvalError> {
        let mut out = vec![Vec::with_capacity(args.len())];
        for a in args {
            let alts = self.expand_head(a, b)?;
            if alts.len() == 1 {
                for o in &mut out {
                    o.push(alts[0].clone());
                }
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * alts.len());
            for o in &out {
                for alt in &alts {
                    let mut v = o.clone();
                    v.push(alt.clone());
                    next.push(v);
                }
            }
            if next.len() > MAX_INTERVAL {
                return Err(self.runtime(b, "interval expansion too large"));
            }
            out = next;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum AggValue {
    Inf,
    Term(GroundTerm),
    Sup,
}

/// Computes the stratified model of `program` over `input`: the input facts
/// plus everything derived, as a sorted set.
pub fn evaluate(
    program: &Program,
    input: impl IntoIterator<Item = Fact>,
) -> Result<BTreeSet<Fact>, EvalError> {
    let strata = stratify(program)?;
    let mut planned: Vec<(&Rule, Plan, usize)> = Vec::new();
    for rule in program.derivation_rules() {
        let plan = plan_rule(rule)?;
        let head = rule.head.as_ref().expect("derivation rule").key();
        planned.push((rule, plan, strata.level_of(&head).unwrap_or(0)));
    }
    for rule in program.constraints() {
        plan_rule(rule)?;
    }

    let mut store = Store::default();
    for f in input {
        let key = PredKey::new(f.predicate, f.args.len());
        store.insert(&key, f.args);
    }

    for level in 0..strata.len() {
        let rules: Vec<&(&Rule, Plan, usize)> = planned.iter().filter(|r| r.2 == level).collect();
        if rules.is_empty() {
            continue;
        }
        let in_level: HashSet<&PredKey> = strata.levels[level].iter().collect();
        for (_, plan, _) in &rules {
            index_keyed_scans(&plan.steps, &mut store);
        }

        // first round: every rule against the full store
        let mut round_start: HashMap<PredKey, usize> = HashMap::new();
        for p in &strata.levels[level] {
            round_start.insert(p.clone(), store.len(p));
        }
        let mut derived = Vec::new();
        for (rule, plan, _) in &rules {
            fire(&store, rule, plan, None, &HashMap::new(), &mut derived)?;
        }
        let mut delta = insert_all(&mut store, derived, &round_start);

        while delta.values().any(|r| !r.is_empty()) {
            let limits: HashMap<PredKey, usize> =
                in_level.iter().map(|p| ((*p).clone(), store.len(p))).collect();
            let mut derived = Vec::new();
            for (rule, plan, _) in &rules {
                for (ordinal, atom) in scan_atoms(&plan.steps) {
                    let key = atom.key();
                    if !in_level.contains(&key) {
                        continue;
                    }
                    let Some(range) = delta.get(&key).filter(|r| !r.is_empty()) else {
                        continue;
                    };
                    fire(&store, rule, plan, Some((ordinal, range.clone())), &limits, &mut derived)?;
                }
            }
            let starts = limits;
            delta = insert_all(&mut store, derived, &starts);
        }
    }

    let mut out = BTreeSet::new();
    for (key, rel) in store.rels {
        for tuple in rel.tuples {
            out.insert(Fact::new(key.name.clone(), tuple));
        }
    }
    Ok(out)
}

fn index_keyed_scans(steps: &[Step], store: &mut Store) {
    for s in steps {
        match s {
            Step::Scan {
                atom, keyed: true, ..
            } => {
                store.rels.entry(atom.key()).or_default().ensure_index();
            }
            Step::Aggregate { elements, .. } => {
                for e in elements {
                    index_keyed_scans(&e.steps, store);
                }
            }
            _ => {}
        }
    }
}

fn scan_atoms(steps: &[Step]) -> Vec<(usize, &Atom)> {
    steps
        .iter()
        .filter_map(|s| match s {
            Step::Scan { atom, ordinal, .. } => Some((*ordinal, atom)),
            _ => None,
        })
        .collect()
}

fn insert_all(
    store: &mut Store,
    derived: Vec<(PredKey, Vec<GroundTerm>)>,
    starts: &HashMap<PredKey, usize>,
) -> HashMap<PredKey, Range<usize>> {
    for (key, tuple) in derived {
        store.insert(&key, tuple);
    }
    starts
        .iter()
        .map(|(k, &s)| (k.clone(), s..store.len(k)))
        .collect()
}

fn fire(
    store: &Store,
    rule: &Rule,
    plan: &Plan,
    delta: Option<(usize, Range<usize>)>,
    limits: &HashMap<PredKey, usize>,
    out: &mut Vec<(PredKey, Vec<GroundTerm>)>,
) -> Result<(), EvalError> {
    let head = rule.head.as_ref().expect("derivation rule");
    let key = head.key();
    let ctx = Ctx {
        store,
        rule,
        delta,
        limits,
    };
    debug_assert!(plan.scans == 0 || plan.scans >= scan_atoms(&plan.steps).len());
    let mut binding: Binding = vec![None; rule.var_names.len()];
    let mut trail = Vec::new();
    let mut emit = |b: &Binding| -> Result<(), EvalError> {
        for args in ctx.expand_args(&head.args, b)? {
            let exists = store
                .rels
                .get(&key)
                .is_some_and(|r| r.tuples.contains(&args));
            if !exists {
                out.push((key.clone(), args));
            }
        }
        Ok(())
    };
    ctx.run(&plan.steps, &mut binding, &mut trail, &mut emit)
}
