//! Predicate dependency graph and stratification.

use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Atom, Literal, PredKey, Program, ProgramError};

/// Predicates grouped by stratum, lowest first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Strata {
    pub levels: Vec<Vec<PredKey>>,
}

impl Strata {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level_of(&self, key: &PredKey) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(key))
    }
}

fn body_deps(lit: &Literal, strict: bool, out: &mut Vec<(PredKey, bool)>) {
    match lit {
        Literal::Pos(a) => out.push((a.key(), strict)),
        Literal::Neg(a) => out.push((a.key(), true)),
        Literal::Cmp(..) => {}
        Literal::Agg(agg) => {
            for e in &agg.elements {
                for l in &e.condition {
                    body_deps(l, true, out);
                }
            }
        }
    }
}

/// Assigns each predicate the lowest stratum such that negated and
/// aggregated dependencies sit strictly below. Fails on a cycle through
/// negation or an aggregate.
pub fn stratify(program: &Program) -> Result<Strata, ProgramError> {
    let mut graph: DiGraph<PredKey, bool> = DiGraph::new();
    let mut nodes: HashMap<PredKey, NodeIndex> = HashMap::new();
    let mut node = |g: &mut DiGraph<PredKey, bool>, k: PredKey| {
        *nodes.entry(k.clone()).or_insert_with(|| g.add_node(k))
    };
    for rule in &program.rules {
        let head = rule.head.as_ref().map(Atom::key);
        let head_ix = head.map(|h| node(&mut graph, h));
        let mut deps = Vec::new();
        for lit in &rule.body {
            body_deps(lit, false, &mut deps);
        }
        for (dep, strict) in deps {
            let d = node(&mut graph, dep);
            if let Some(h) = head_ix {
                graph.add_edge(d, h, strict);
            }
        }
    }

    // tarjan_scc yields components in reverse topological order
    let mut sccs = tarjan_scc(&graph);
    sccs.reverse();
    let mut comp_of = vec![0usize; graph.node_count()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &n in comp {
            comp_of[n.index()] = ci;
        }
    }
    for comp in &sccs {
        for &n in comp {
            for e in graph.edges_directed(n, petgraph::Direction::Outgoing) {
                use petgraph::visit::EdgeRef;
                if *e.weight() && comp_of[e.target().index()] == comp_of[n.index()] {
                    let mut cycle: Vec<String> = comp.iter().map(|&i| graph[i].to_string()).collect();
                    cycle.sort();
                    return Err(ProgramError::NotStratified { cycle });
                }
            }
        }
    }

    let mut level = vec![0usize; sccs.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        let mut l = 0;
        for &n in comp {
            for e in graph.edges_directed(n, petgraph::Direction::Incoming) {
                use petgraph::visit::EdgeRef;
                let src = comp_of[e.source().index()];
                if src != ci {
                    l = l.max(level[src] + usize::from(*e.weight()));
                }
            }
        }
        level[ci] = l;
    }

    let count = level.iter().max().map_or(0, |m| m + 1);
    let mut levels = vec![Vec::new(); count];
    for (ci, comp) in sccs.iter().enumerate() {
        for &n in comp {
            levels[level[ci]].push(graph[n].clone());
        }
    }
    for l in &mut levels {
        l.sort();
    }
    Ok(Strata { levels })
}
