#![no_main]

use libfuzzer_sys::fuzz_target;
use valasp_core::datalog::{evaluate, parse_program, AggElement, Atom, BinOp, Literal, Program, Term};

// Evaluation only runs on programs whose least model is small: no
// intervals, no multiplication or powers, and recursive rules cannot grow
// numbers (`+`, `-`) or nest terms in their heads.
fn bounded(program: &Program) -> bool {
    program.rules.iter().all(|rule| {
        let derived = !rule.body.is_empty();
        let head_ok = rule.head.as_ref().map_or(true, |h| {
            h.args.iter().all(|t| term_ok(t, derived) && !(derived && matches!(t, Term::Func(..) | Term::Tuple(_))))
        });
        head_ok && rule.body.iter().all(|l| literal_ok(l, derived))
    })
}

fn term_ok(t: &Term, derived: bool) -> bool {
    match t {
        Term::Interval(..) => false,
        Term::Binary(op, a, b) => {
            let growing = matches!(op, BinOp::Mul | BinOp::Pow)
                || (derived && matches!(op, BinOp::Add | BinOp::Sub));
            !growing && term_ok(a, derived) && term_ok(b, derived)
        }
        Term::Neg(a) => term_ok(a, derived),
        Term::Func(_, args) | Term::Tuple(args) | Term::External(_, args) => args.iter().all(|a| term_ok(a, derived)),
        Term::Var(_) | Term::Anon | Term::Number(_) | Term::Str(_) | Term::Const(_) => true,
    }
}

fn atom_ok(a: &Atom, derived: bool) -> bool {
    a.args.iter().all(|t| term_ok(t, derived))
}

fn literal_ok(l: &Literal, derived: bool) -> bool {
    match l {
        Literal::Pos(a) | Literal::Neg(a) => atom_ok(a, derived),
        Literal::Cmp(a, _, b) => term_ok(a, derived) && term_ok(b, derived),
        Literal::Agg(agg) => {
            agg.guard.as_ref().map_or(true, |(_, g)| term_ok(g, derived))
                && agg.elements.iter().all(|AggElement { terms, condition }| {
                    terms.iter().all(|t| term_ok(t, derived)) && condition.iter().all(|c| literal_ok(c, derived))
                })
        }
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(program) = parse_program(text) {
        if text.len() < 256 && bounded(&program) {
            let _ = evaluate(&program, Vec::new());
        }
    }
});
