//! Threshold/remainder predicates closed under boolean connectives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{InputAssignment, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("coefficient for {0:?}, which is not an input symbol")]
    UnknownSymbol(String),
    #[error("remainder modulus {0} is smaller than 2")]
    BadModulus(i64),
}

/// Predicate tree over input counts.
///
/// Serialized externally tagged, e.g.
/// `{"not": {"threshold": {"coeffs": {"A": 1, "B": -1}, "c": 1}}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Predicate {
    /// `Σ a_σ·X(σ) < c`
    Threshold {
        coeffs: BTreeMap<String, i64>,
        c: i64,
    },
    /// `Σ a_σ·X(σ) ≡ c (mod m)`
    Remainder {
        coeffs: BTreeMap<String, i64>,
        c: i64,
        m: i64,
    },
    Not(Box<Predicate>),
    And(Box<[Predicate; 2]>),
    Or(Box<[Predicate; 2]>),
}

impl Predicate {
    pub fn threshold<'a>(coeffs: impl IntoIterator<Item = (&'a str, i64)>, c: i64) -> Self {
        Predicate::Threshold {
            coeffs: collect(coeffs),
            c,
        }
    }

    pub fn remainder<'a>(coeffs: impl IntoIterator<Item = (&'a str, i64)>, c: i64, m: i64) -> Self {
        Predicate::Remainder {
            coeffs: collect(coeffs),
            c,
            m,
        }
    }

    pub fn negate(self) -> Self {
        Predicate::Not(Box::new(self))
    }

    pub fn and(self, other: Predicate) -> Self {
        Predicate::And(Box::new([self, other]))
    }

    pub fn or(self, other: Predicate) -> Self {
        Predicate::Or(Box::new([self, other]))
    }

    /// Every coefficient key is a symbol of `alphabet` and every modulus is at least 2.
    pub fn validate(&self, alphabet: &[String]) -> Result<(), PredicateError> {
        match self {
            Predicate::Threshold { coeffs, .. } | Predicate::Remainder { coeffs, .. } => {
                if let Predicate::Remainder { m, .. } = self {
                    if *m < 2 {
                        return Err(PredicateError::BadModulus(*m));
                    }
                }
                for k in coeffs.keys() {
                    if !alphabet.contains(k) {
                        return Err(PredicateError::UnknownSymbol(k.clone()));
                    }
                }
                Ok(())
            }
            Predicate::Not(p) => p.validate(alphabet),
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps[0].validate(alphabet)?;
                ps[1].validate(alphabet)
            }
        }
    }

    /// Direct evaluation; missing symbols count as zero.
    pub fn eval(&self, x: &BTreeMap<String, u64>) -> bool {
        let sum = |coeffs: &BTreeMap<String, i64>| -> i128 {
            coeffs
                .iter()
                .map(|(k, &a)| a as i128 * x.get(k).copied().unwrap_or(0) as i128)
                .sum()
        };
        match self {
            Predicate::Threshold { coeffs, c } => sum(coeffs) < *c as i128,
            Predicate::Remainder { coeffs, c, m } => {
                let m = *m as i128;
                sum(coeffs).rem_euclid(m) == (*c as i128).rem_euclid(m)
            }
            Predicate::Not(p) => !p.eval(x),
            Predicate::And(ps) => ps[0].eval(x) && ps[1].eval(x),
            Predicate::Or(ps) => ps[0].eval(x) || ps[1].eval(x),
        }
    }
}

fn collect<'a>(coeffs: impl IntoIterator<Item = (&'a str, i64)>) -> BTreeMap<String, i64> {
    coeffs
        .into_iter()
        .map(|(k, a)| (k.to_string(), a))
        .collect()
}

/// Evaluate `pd` on an input of `p`.
pub fn eval_predicate(p: &Protocol, pd: &Predicate, x: &InputAssignment) -> bool {
    let named = x
        .iter()
        .map(|(s, n)| (p.alphabet()[s].clone(), n))
        .collect();
    pd.eval(&named)
}
