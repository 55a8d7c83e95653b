use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::scalar::{is_zero, Scalar};

use super::SmtError;

/// Variable sort. `Nat` and `NonNegReal` are emitted as `Int`/`Real` plus `v >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Int,
    Nat,
    Real,
    NonNegReal,
}

impl Sort {
    pub fn is_integer(self) -> bool {
        matches!(self, Sort::Int | Sort::Nat)
    }

    pub fn is_nonneg(self) -> bool {
        matches!(self, Sort::Nat | Sort::NonNegReal)
    }

    pub fn smt_name(self) -> &'static str {
        if self.is_integer() {
            "Int"
        } else {
            "Real"
        }
    }
}

/// Linear combination of variables plus a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinTerm<S> {
    coeffs: BTreeMap<String, S>,
    constant: S,
}

impl<S: Scalar> Default for LinTerm<S> {
    fn default() -> Self {
        LinTerm {
            coeffs: BTreeMap::new(),
            constant: S::zero(),
        }
    }
}

impl<S: Scalar> LinTerm<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::zero().plus(S::one(), name)
    }

    pub fn constant(c: S) -> Self {
        LinTerm {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    /// Sum of the named variables with unit coefficients.
    pub fn sum_of<I, N>(names: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<String>,
    {
        names
            .into_iter()
            .fold(Self::zero(), |t, n| t.plus(S::one(), n))
    }

    /// Add `coeff·name`, merging with an existing entry.
    pub fn plus(mut self, coeff: S, name: impl Into<String>) -> Self {
        self.add_term(coeff, name);
        self
    }

    pub fn add_term(&mut self, coeff: S, name: impl Into<String>) {
        if is_zero(&coeff) {
            return;
        }
        let name = name.into();
        let merged = match self.coeffs.remove(&name) {
            Some(old) => old + coeff,
            None => coeff,
        };
        if !is_zero(&merged) {
            self.coeffs.insert(name, merged);
        }
    }

    pub fn plus_const(mut self, c: S) -> Self {
        self.constant = self.constant + c;
        self
    }

    pub fn add(mut self, other: &LinTerm<S>) -> Self {
        for (n, c) in &other.coeffs {
            self.add_term(c.clone(), n.clone());
        }
        self.constant = self.constant + other.constant.clone();
        self
    }

    pub fn sub(self, other: &LinTerm<S>) -> Self {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, k: &S) -> Self {
        if is_zero(k) {
            return Self::zero();
        }
        LinTerm {
            coeffs: self
                .coeffs
                .iter()
                .map(|(n, c)| (n.clone(), c.clone() * k.clone()))
                .collect(),
            constant: self.constant.clone() * k.clone(),
        }
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&str, &S)> {
        self.coeffs.iter().map(|(n, c)| (n.as_str(), c))
    }

    pub fn constant_part(&self) -> &S {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(String::as_str)
    }

    /// Value under `model`; missing variables are an error.
    pub fn eval(&self, model: &Model) -> Result<BigRational, SmtError> {
        let mut acc = self.constant.to_rational();
        for (n, c) in &self.coeffs {
            let v = model
                .get(n)
                .ok_or_else(|| SmtError::UnassignedVariable(n.clone()))?;
            acc += c.to_rational() * v;
        }
        Ok(acc)
    }
}

/// Relation of an atom `term ⋈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, v: &BigRational) -> bool {
        match self {
            Cmp::Eq => v.is_zero(),
            Cmp::Le => !v.is_positive(),
            Cmp::Lt => v.is_negative(),
            Cmp::Ge => !v.is_negative(),
            Cmp::Gt => v.is_positive(),
        }
    }

    pub fn smt_op(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

/// Quantifier-free formula over linear atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula<S> {
    True,
    False,
    /// `term ⋈ 0`
    Atom(LinTerm<S>, Cmp),
    And(Vec<Formula<S>>),
    Or(Vec<Formula<S>>),
    Not(Box<Formula<S>>),
    Implies(Box<Formula<S>>, Box<Formula<S>>),
}

impl<S: Scalar> Formula<S> {
    /// `lhs ⋈ rhs`
    pub fn cmp(lhs: LinTerm<S>, op: Cmp, rhs: &LinTerm<S>) -> Self {
        Formula::Atom(lhs.sub(rhs), op)
    }

    pub fn eq(lhs: LinTerm<S>, rhs: &LinTerm<S>) -> Self {
        Self::cmp(lhs, Cmp::Eq, rhs)
    }

    pub fn le(lhs: LinTerm<S>, rhs: &LinTerm<S>) -> Self {
        Self::cmp(lhs, Cmp::Le, rhs)
    }

    pub fn lt(lhs: LinTerm<S>, rhs: &LinTerm<S>) -> Self {
        Self::cmp(lhs, Cmp::Lt, rhs)
    }

    pub fn ge(lhs: LinTerm<S>, rhs: &LinTerm<S>) -> Self {
        Self::cmp(lhs, Cmp::Ge, rhs)
    }

    pub fn gt(lhs: LinTerm<S>, rhs: &LinTerm<S>) -> Self {
        Self::cmp(lhs, Cmp::Gt, rhs)
    }

    /// `term ⋈ c` for a constant `c`.
    pub fn cmp_const(term: LinTerm<S>, op: Cmp, c: i64) -> Self {
        Formula::Atom(term.plus_const(-S::from_i64(c)), op)
    }

    /// Conjunction; flattens nested conjunctions and drops `True`.
    pub fn and(parts: impl IntoIterator<Item = Formula<S>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction; an empty disjunction is `False`.
    pub fn or(parts: impl IntoIterator<Item = Formula<S>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula<S>) -> Self {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(guard: Formula<S>, body: Formula<S>) -> Self {
        Formula::Implies(Box::new(guard), Box::new(body))
    }

    pub fn eval(&self, model: &Model) -> Result<bool, SmtError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(t, op) => op.holds(&t.eval(model)?),
            Formula::And(ps) => {
                for p in ps {
                    if !p.eval(model)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(ps) => {
                for p in ps {
                    if p.eval(model)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Not(p) => !p.eval(model)?,
            Formula::Implies(g, b) => !g.eval(model)? || b.eval(model)?,
        })
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula<S>> {
        match self {
            Formula::And(ps) => ps.iter().flat_map(|p| p.conjuncts()).collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    pub fn collect_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(t, _) => out.extend(t.variables()),
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| p.collect_variables(out)),
            Formula::Not(p) => p.collect_variables(out),
            Formula::Implies(g, b) => {
                g.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }
}

/// Variable declarations and asserted conjuncts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem<S> {
    decls: BTreeMap<String, Sort>,
    assertions: Vec<Formula<S>>,
}

impl<S: Scalar> Default for Problem<S> {
    fn default() -> Self {
        Problem {
            decls: BTreeMap::new(),
            assertions: Vec::new(),
        }
    }
}

impl<S: Scalar> Problem<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare `name`; redeclaring with the same sort is a no-op.
    pub fn declare(&mut self, name: impl Into<String>, sort: Sort) -> Result<(), SmtError> {
        let name = name.into();
        match self.decls.get(&name) {
            Some(&s) if s == sort => Ok(()),
            Some(&s) => Err(SmtError::Redeclared {
                name,
                old: s,
                new: sort,
            }),
            None => {
                self.decls.insert(name, sort);
                Ok(())
            }
        }
    }

    /// Assert `f`; every variable it mentions must already be declared.
    pub fn assert(&mut self, f: Formula<S>) -> Result<(), SmtError> {
        let mut vars = Vec::new();
        f.collect_variables(&mut vars);
        if let Some(v) = vars.into_iter().find(|v| !self.decls.contains_key(*v)) {
            return Err(SmtError::Undeclared(v.to_string()));
        }
        self.assertions.extend(f.conjuncts().into_iter().cloned());
        Ok(())
    }

    pub fn decls(&self) -> &BTreeMap<String, Sort> {
        &self.decls
    }

    pub fn assertions(&self) -> &[Formula<S>] {
        &self.assertions
    }

    /// Every assertion and sort side condition holds in `model`.
    pub fn check_model(&self, model: &Model) -> Result<(), SmtError> {
        for (name, sort) in &self.decls {
            let v = model
                .get(name)
                .ok_or_else(|| SmtError::UnassignedVariable(name.clone()))?;
            if sort.is_integer() && !v.is_integer() {
                return Err(SmtError::ModelRejected(format!(
                    "{name} = {v} is not an integer"
                )));
            }
            if sort.is_nonneg() && v.is_negative() {
                return Err(SmtError::ModelRejected(format!("{name} = {v} is negative")));
            }
        }
        for (i, f) in self.assertions.iter().enumerate() {
            if !f.eval(model)? {
                return Err(SmtError::ModelRejected(format!("assertion #{i} is false")));
            }
        }
        Ok(())
    }

    pub fn logic(&self) -> &'static str {
        let ints = self.decls.values().any(|s| s.is_integer());
        let reals = self.decls.values().any(|s| !s.is_integer());
        match (ints, reals) {
            (_, false) => "QF_LIA",
            (false, true) => "QF_LRA",
            (true, true) => "QF_LIRA",
        }
    }
}

/// Exact assignment of declared variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<String, BigRational>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, v: BigRational) {
        self.values.insert(name.into(), v);
    }

    pub fn get(&self, name: &str) -> Option<&BigRational> {
        self.values.get(name)
    }

    /// Value of an integer-sorted variable.
    pub fn int(&self, name: &str) -> Option<i64> {
        let v = self.values.get(name)?;
        i64::from_rational(v)
    }

    /// Value of a natural-sorted variable; missing or negative values read as 0.
    pub fn nat(&self, name: &str) -> u64 {
        self.int(name)
            .and_then(|v| u64::try_from(v).ok())
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BigRational)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
