use std::collections::BTreeMap;
use std::fmt::Write;

use crate::scalar::Scalar;

use super::term::{Cmp, Formula, LinTerm, Problem, Sort};

/// Full SMT-LIB2 script for `problem`, ending with `check-sat` and `get-value`.
pub fn emit_script<S: Scalar>(problem: &Problem<S>) -> String {
    let mut out = String::new();
    out.push_str(&emit_header(problem.logic()));
    for (name, sort) in problem.decls() {
        out.push_str(&emit_declaration(name, *sort));
    }
    for f in problem.assertions() {
        out.push_str(&emit_assert(f, problem.decls()));
    }
    out.push_str("(check-sat)\n");
    out.push_str(&emit_get_value(problem.decls().keys().map(String::as_str)));
    out
}

pub(crate) fn emit_header(logic: &str) -> String {
    format!("(set-option :produce-models true)\n(set-logic {logic})\n")
}

pub(crate) fn emit_declaration(name: &str, sort: Sort) -> String {
    let mut s = format!("(declare-fun {} () {})\n", symbol(name), sort.smt_name());
    if sort.is_nonneg() {
        let zero = if sort.is_integer() { "0" } else { "0.0" };
        let _ = writeln!(s, "(assert (>= {} {zero}))", symbol(name));
    }
    s
}

pub(crate) fn emit_assert<S: Scalar>(f: &Formula<S>, decls: &BTreeMap<String, Sort>) -> String {
    let mut s = String::from("(assert ");
    write_formula(&mut s, f, decls);
    s.push_str(")\n");
    s
}

pub(crate) fn emit_get_value<'a>(names: impl Iterator<Item = &'a str>) -> String {
    let names: Vec<String> = names.map(symbol).collect();
    if names.is_empty() {
        return String::new();
    }
    format!("(get-value ({}))\n", names.join(" "))
}

/// Quote symbols that are not plain SMT-LIB simple symbols.
pub(crate) fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn write_formula<S: Scalar>(out: &mut String, f: &Formula<S>, decls: &BTreeMap<String, Sort>) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(t, op) => write_atom(out, t, *op, decls),
        Formula::And(ps) | Formula::Or(ps) => {
            out.push_str(if matches!(f, Formula::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for p in ps {
                out.push(' ');
                write_formula(out, p, decls);
            }
            out.push(')');
        }
        Formula::Not(p) => {
            out.push_str("(not ");
            write_formula(out, p, decls);
            out.push(')');
        }
        Formula::Implies(g, b) => {
            out.push_str("(=> ");
            write_formula(out, g, decls);
            out.push(' ');
            write_formula(out, b, decls);
            out.push(')');
        }
    }
}

/// Emits `lhs ⋈ rhs` with the variables on the left and the negated constant on
/// the right. Strict comparisons over integer terms become non-strict with the
/// bound shifted by one.
fn write_atom<S: Scalar>(
    out: &mut String,
    t: &LinTerm<S>,
    op: Cmp,
    decls: &BTreeMap<String, Sort>,
) {
    let integral = t.constant_part().is_integral()
        && t.coeffs()
            .all(|(n, c)| c.is_integral() && decls.get(n).is_some_and(|s| s.is_integer()));
    let mut rhs = -t.constant_part().clone();
    let mut op = op;
    if integral && !t.is_constant() {
        match op {
            Cmp::Lt => {
                op = Cmp::Le;
                rhs = rhs - S::one();
            }
            Cmp::Gt => {
                op = Cmp::Ge;
                rhs = rhs + S::one();
            }
            _ => {}
        }
    }
    let _ = write!(out, "({} ", op.smt_op());
    write_sum(out, t);
    let _ = write!(out, " {})", rhs.to_smt());
}

fn write_sum<S: Scalar>(out: &mut String, t: &LinTerm<S>) {
    let terms: Vec<String> = t
        .coeffs()
        .map(|(n, c)| {
            if c.is_one() {
                symbol(n)
            } else if (-c.clone()).is_one() {
                format!("(- {})", symbol(n))
            } else {
                format!("(* {} {})", c.to_smt(), symbol(n))
            }
        })
        .collect();
    match terms.len() {
        0 => out.push('0'),
        1 => out.push_str(&terms[0]),
        _ => {
            let _ = write!(out, "(+ {})", terms.join(" "));
        }
    }
}
