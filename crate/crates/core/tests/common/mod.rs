//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use valasp_core::spec::{load_spec, ValidationSpec};
use valasp_core::term::{Fact, GroundTerm};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn spec(name: &str) -> ValidationSpec {
    load_spec(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn num(n: i64) -> GroundTerm {
    GroundTerm::number(n)
}

pub fn fact(p: &str, args: &[i64]) -> Fact {
    Fact::new(p, args.iter().map(|a| num(*a)).collect())
}

/// A random relation over `1..=n` for the partial-order example.
pub fn random_relation(rng: &mut impl Rng, n: i64) -> Vec<(i64, i64)> {
    let density = rng.gen_range(0.2..0.95);
    let mut pairs = Vec::new();
    for a in 1..=n {
        for b in 1..=n {
            if rng.gen_bool(density) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Reflexive on every element mentioned, symmetric and transitive.
pub fn is_equivalence(pairs: &[(i64, i64)]) -> bool {
    let set: BTreeSet<(i64, i64)> = pairs.iter().copied().collect();
    let elements: BTreeSet<i64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let reflexive = elements.iter().all(|&x| set.contains(&(x, x)));
    let symmetric = set.iter().all(|&(a, b)| set.contains(&(b, a)));
    let transitive = set
        .iter()
        .all(|&(a, b)| set.iter().filter(|&&(c, _)| c == b).all(|&(_, d)| set.contains(&(a, d))));
    reflexive && symmetric && transitive
}

/// A random undirected graph on `1..=n`; edges are returned in both directions.
pub fn random_graph(rng: &mut impl Rng, n: i64) -> Vec<(i64, i64)> {
    let density = rng.gen_range(0.05..0.6);
    let mut edges = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.gen_bool(density) {
                edges.push((a, b));
                edges.push((b, a));
            }
        }
    }
    edges
}

/// Breadth-first search from the smallest node reaches every node.
pub fn is_connected(n: i64, edges: &[(i64, i64)]) -> bool {
    let mut adj: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
    }
    let mut seen = BTreeSet::from([1]);
    let mut queue = VecDeque::from([1]);
    while let Some(x) = queue.pop_front() {
        for &y in adj.get(&x).map(Vec::as_slice).unwrap_or_default() {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen.len() as i64 == n
}

pub fn graph_facts(n: i64, edges: &[(i64, i64)]) -> Vec<Fact> {
    let mut facts: Vec<Fact> = (1..=n).map(|i| fact("node", &[i])).collect();
    facts.extend(edges.iter().map(|&(a, b)| fact("edge", &[a, b])));
    facts
}

// Generated stratified programs: EDB predicates e0/1, e1/2 and IDB
// predicates p0..p3 with fixed arities. Positive body atoms use predicates
// up to the head's level, negated ones strictly below it.

const EDB: [(&str, usize); 2] = [("e0", 1), ("e1", 2)];
const IDB: [(&str, usize); 4] = [("p0", 1), ("p1", 2), ("p2", 1), ("p3", 2)];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

#[derive(Debug, Clone)]
pub enum Arg {
    Var(usize),
    Const(i64),
}

#[derive(Debug, Clone)]
pub struct GenAtom {
    pub pred: &'static str,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone)]
pub struct GenRule {
    pub level: usize,
    pub head: GenAtom,
    pub pos: Vec<GenAtom>,
    pub neg: Vec<GenAtom>,
    /// `(a, b)`: variable a < variable b.
    pub less: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct GenProgram {
    pub domain: i64,
    pub facts: Vec<Fact>,
    pub rules: Vec<GenRule>,
}

fn render_atom(a: &GenAtom) -> String {
    let args: Vec<String> = a
        .args
        .iter()
        .map(|x| match x {
            Arg::Var(v) => VARS[*v].to_string(),
            Arg::Const(c) => c.to_string(),
        })
        .collect();
    format!("{}({})", a.pred, args.join(","))
}

impl GenRule {
    pub fn render(&self) -> String {
        let mut body: Vec<String> = self.pos.iter().map(render_atom).collect();
        body.extend(self.neg.iter().map(|a| format!("not {}", render_atom(a))));
        body.extend(self.less.iter().map(|(a, b)| format!("{} < {}", VARS[*a], VARS[*b])));
        format!("{} :- {}.", render_atom(&self.head), body.join(", "))
    }
}

impl GenProgram {
    /// Rules only; facts are passed to the engine separately.
    pub fn rules_text(&self) -> String {
        self.rules.iter().map(|r| r.render() + "\n").collect()
    }
}

fn pick_pred(rng: &mut impl Rng, max_idb: Option<usize>) -> (&'static str, usize) {
    let mut pool: Vec<(&'static str, usize)> = EDB.to_vec();
    if let Some(m) = max_idb {
        pool.extend(IDB[..=m].iter().copied());
    }
    *pool.choose(rng).unwrap()
}

fn gen_args(rng: &mut impl Rng, arity: usize, vars: &[usize], domain: i64) -> Vec<Arg> {
    (0..arity)
        .map(|_| {
            if vars.is_empty() || rng.gen_bool(0.1) {
                Arg::Const(rng.gen_range(0..domain))
            } else {
                Arg::Var(*vars.choose(rng).unwrap())
            }
        })
        .collect()
}

pub fn random_program(rng: &mut impl Rng, max_rules: usize, domain: i64) -> GenProgram {
    let mut facts = Vec::new();
    for _ in 0..rng.gen_range(1..=3 * domain) {
        let (p, arity) = *EDB.choose(rng).unwrap();
        let args: Vec<i64> = (0..arity).map(|_| rng.gen_range(0..domain)).collect();
        facts.push(fact(p, &args));
    }
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=max_rules) {
        let level = rng.gen_range(0..IDB.len());
        let (head_pred, head_arity) = IDB[level];
        let mut pos = Vec::new();
        let mut bound: Vec<usize> = Vec::new();
        for i in 0..rng.gen_range(1..=3) {
            // positive atoms may recurse through predicates up to the head's level
            let (p, arity) = pick_pred(rng, Some(level));
            let args: Vec<Arg> = (0..arity)
                .map(|_| {
                    if rng.gen_bool(0.08) {
                        Arg::Const(rng.gen_range(0..domain))
                    } else if !bound.is_empty() && rng.gen_bool(0.5) {
                        Arg::Var(*bound.choose(rng).unwrap())
                    } else {
                        let v = rng.gen_range(0..VARS.len().min(2 + i));
                        Arg::Var(v)
                    }
                })
                .collect();
            for a in &args {
                if let Arg::Var(v) = a {
                    if !bound.contains(v) {
                        bound.push(*v);
                    }
                }
            }
            pos.push(GenAtom { pred: p, args });
        }
        let mut neg = Vec::new();
        if rng.gen_bool(0.4) {
            let lower = if level == 0 { None } else { Some(level - 1) };
            let (p, arity) = pick_pred(rng, lower);
            neg.push(GenAtom { pred: p, args: gen_args(rng, arity, &bound, domain) });
        }
        let mut less = Vec::new();
        if bound.len() >= 2 && rng.gen_bool(0.3) {
            let mut two: Vec<usize> = bound.choose_multiple(rng, 2).copied().collect();
            two.sort();
            less.push((two[0], two[1]));
        }
        let head = GenAtom { pred: head_pred, args: gen_args(rng, head_arity, &bound, domain) };
        rules.push(GenRule { level, head, pos, neg, less });
    }
    GenProgram { domain, facts, rules }
}

fn ground_args(args: &[Arg], env: &[i64]) -> Vec<i64> {
    args.iter()
        .map(|a| match a {
            Arg::Var(v) => env[*v],
            Arg::Const(c) => *c,
        })
        .collect()
}

/// Naive fixpoint: for each level in order, ground every rule against every
/// assignment of its variables over the domain until nothing changes.
pub fn naive_model(program: &GenProgram) -> BTreeSet<Fact> {
    let mut model: BTreeSet<(String, Vec<i64>)> = program
        .facts
        .iter()
        .map(|f| (f.predicate.clone(), f.args.iter().map(|a| a.as_number().unwrap().try_into().unwrap()).collect()))
        .collect();
    for level in 0..IDB.len() {
        let rules: Vec<&GenRule> = program.rules.iter().filter(|r| r.level == level).collect();
        loop {
            let mut added = false;
            for rule in &rules {
                let assignments = (program.domain as usize).pow(VARS.len() as u32);
                for code in 0..assignments {
                    let mut env = [0i64; 4];
                    let mut c = code;
                    for slot in env.iter_mut() {
                        *slot = (c % program.domain as usize) as i64;
                        c /= program.domain as usize;
                    }
                    let holds = rule.pos.iter().all(|a| model.contains(&(a.pred.to_string(), ground_args(&a.args, &env))))
                        && rule.neg.iter().all(|a| !model.contains(&(a.pred.to_string(), ground_args(&a.args, &env))))
                        && rule.less.iter().all(|&(a, b)| env[a] < env[b]);
                    if holds {
                        added |= model.insert((rule.head.pred.to_string(), ground_args(&rule.head.args, &env)));
                    }
                }
            }
            if !added {
                break;
            }
        }
    }
    model.into_iter().map(|(p, args)| fact(&p, &args)).collect()
}
