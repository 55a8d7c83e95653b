//! Just enough S-expression reading for solver responses.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }
}

/// Net parenthesis depth of `text`, ignoring `|...|` symbols and strings.
pub fn depth_delta(text: &str) -> i64 {
    let mut depth = 0;
    let mut in_bar = false;
    let mut in_str = false;
    for c in text.chars() {
        match c {
            '|' if !in_str => in_bar = !in_bar,
            '"' if !in_bar => in_str = !in_str,
            '(' if !in_bar && !in_str => depth += 1,
            ')' if !in_bar && !in_str => depth -= 1,
            _ => {}
        }
    }
    depth
}

pub fn parse(text: &str) -> Result<Sexp, String> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let e = parse_at(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(format!("trailing input after s-expression in {text:?}"));
    }
    Ok(e)
}

fn tokenize(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '|' | '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some(d) if d == c => break,
                        Some(d) => s.push(d),
                        None => return Err("unterminated quoted token".into()),
                    }
                }
                out.push(s);
            }
            _ => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn parse_at(tokens: &[String], pos: &mut usize) -> Result<Sexp, String> {
    let tok = tokens.get(*pos).ok_or("unexpected end of s-expression")?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_at(tokens, pos)?),
                    None => return Err("unbalanced parentheses".into()),
                }
            }
        }
        ")" => Err("unexpected ')'".into()),
        _ => Ok(Sexp::Atom(tok.clone())),
    }
}

/// Numeric value: numerals, decimals, `(- v)`, `(/ a b)`.
pub fn value(e: &Sexp) -> Result<BigRational, String> {
    match e {
        Sexp::Atom(a) => decimal(a),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => Ok(-value(x)?),
            [Sexp::Atom(op), a, b] if op == "/" => {
                let d = value(b)?;
                if d.is_zero() {
                    return Err("division by zero in model value".into());
                }
                Ok(value(a)? / d)
            }
            _ => Err(format!("unsupported value {e:?}")),
        },
    }
}

fn decimal(a: &str) -> Result<BigRational, String> {
    let bad = || format!("not a number: {a:?}");
    match a.split_once('.') {
        None => Ok(BigRational::from_integer(
            BigInt::from_str(a).map_err(|_| bad())?,
        )),
        Some((int, frac)) => {
            let digits = format!("{int}{frac}");
            let num = BigInt::from_str(&digits).map_err(|_| bad())?;
            let den = (0..frac.len()).fold(BigInt::one(), |acc, _| acc * 10);
            Ok(BigRational::new(num, den))
        }
    }
}
