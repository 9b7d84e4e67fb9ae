//! Textual functional language used by experiment configs.
//!
//! An expression is an affine combination of built-in terms:
//!
//! ```text
//! expr  := ['+' | '-'] term { ('+' | '-') term }
//! term  := NUMBER [ '*' call ] | call
//! call  := count(i) | count_pow(i, k) | indicator_le(i, k) | indicator_ge(i, k)
//!        | exp_neg(a, i) | cumsum_g(i, [g0, g1, ...]) | cumsum_geom(i, r)
//!        | max_radius_gt(i)
//! ```
//!
//! `cumsum_g` is `G(n) = Σ_{j<n} g_j` with `g_j = 0` past the list, and
//! `max_radius_gt(i)` is `1{c_i >= 1}` with atom `i` standing for the region
//! outside a ball. Printing an [`Expr`] gives a canonical string that parses
//! back to the same value.

use std::fmt;

use thiserror::Error;

use crate::functional::{Functional, Sign};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Count(usize),
    CountPow(usize, u32),
    IndicatorLe(usize, u32),
    IndicatorGe(usize, u32),
    ExpNeg(f64, usize),
    CumsumG(usize, Vec<f64>),
    CumsumGeom(usize, f64),
    MaxRadiusGt(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    /// `None` is the constant term.
    pub basis: Option<Basis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Basis {
    pub fn atom(&self) -> usize {
        match *self {
            Basis::Count(i)
            | Basis::CountPow(i, _)
            | Basis::IndicatorLe(i, _)
            | Basis::IndicatorGe(i, _)
            | Basis::ExpNeg(_, i)
            | Basis::CumsumG(i, _)
            | Basis::CumsumGeom(i, _)
            | Basis::MaxRadiusGt(i) => i,
        }
    }

    fn eval_count(&self, n: u32, prefix: &[f64]) -> f64 {
        match *self {
            Basis::Count(_) => f64::from(n),
            Basis::CountPow(_, k) => f64::from(n).powi(k as i32),
            Basis::IndicatorLe(_, k) => f64::from(u8::from(n <= k)),
            Basis::IndicatorGe(_, k) => f64::from(u8::from(n >= k)),
            Basis::ExpNeg(a, _) => (-a * f64::from(n)).exp(),
            Basis::CumsumG(..) => prefix[(n as usize).min(prefix.len() - 1)],
            Basis::CumsumGeom(_, r) => {
                if r == 1.0 {
                    f64::from(n)
                } else {
                    (1.0 - r.powi(n as i32)) / (1.0 - r)
                }
            }
            Basis::MaxRadiusGt(_) => f64::from(u8::from(n >= 1)),
        }
    }

    /// Declared signs of `D` and `D²` for this term.
    fn signs(&self) -> (Sign, Sign) {
        match *self {
            Basis::Count(_) => (Sign::NonNeg, Sign::Zero),
            Basis::CountPow(_, 0) => (Sign::Zero, Sign::Zero),
            Basis::CountPow(_, 1) => (Sign::NonNeg, Sign::Zero),
            Basis::CountPow(..) => (Sign::NonNeg, Sign::NonNeg),
            Basis::IndicatorLe(..) => (Sign::NonPos, Sign::Unknown),
            Basis::IndicatorGe(_, 0) => (Sign::Zero, Sign::Zero),
            Basis::IndicatorGe(..) => (Sign::NonNeg, Sign::Unknown),
            Basis::ExpNeg(0.0, _) => (Sign::Zero, Sign::Zero),
            Basis::ExpNeg(a, _) if a > 0.0 => (Sign::NonPos, Sign::NonNeg),
            Basis::ExpNeg(..) => (Sign::NonNeg, Sign::NonNeg),
            Basis::CumsumG(..) | Basis::CumsumGeom(..) | Basis::MaxRadiusGt(_) => (Sign::NonNeg, Sign::NonPos),
        }
    }

    fn bound(&self) -> Option<f64> {
        match self {
            Basis::Count(_) => None,
            Basis::CountPow(_, 0) => Some(1.0),
            Basis::CountPow(..) => None,
            Basis::IndicatorLe(..) | Basis::IndicatorGe(..) | Basis::MaxRadiusGt(_) => Some(1.0),
            Basis::ExpNeg(a, _) => (*a >= 0.0).then_some(1.0),
            Basis::CumsumG(_, g) => Some(g.iter().sum()),
            Basis::CumsumGeom(_, r) => (*r < 1.0).then(|| 1.0 / (1.0 - r)),
        }
    }
}

impl Expr {
    pub fn max_atom(&self) -> Option<usize> {
        self.terms
            .iter()
            .filter_map(|t| t.basis.as_ref().map(Basis::atom))
            .max()
    }

    pub fn to_functional(&self) -> Functional {
        let label = self.to_string();
        let mut sign_d = Sign::Zero;
        let mut sign_d2 = Sign::Zero;
        let mut bound = Some(0.0);
        let compiled: Vec<(f64, Option<Basis>, Vec<f64>)> = self
            .terms
            .iter()
            .map(|t| {
                let prefix = match &t.basis {
                    Some(Basis::CumsumG(_, g)) => {
                        let mut acc = vec![0.0];
                        for v in g {
                            acc.push(acc.last().unwrap() + v);
                        }
                        acc
                    }
                    _ => Vec::new(),
                };
                (t.coef, t.basis.clone(), prefix)
            })
            .collect();
        for t in &self.terms {
            match &t.basis {
                None => bound = bound.map(|b| b + t.coef.abs()),
                Some(b) => {
                    let (d, d2) = b.signs();
                    sign_d = sign_d.plus(d.scale(t.coef));
                    sign_d2 = sign_d2.plus(d2.scale(t.coef));
                    bound = match (bound, b.bound()) {
                        (Some(acc), Some(x)) => Some(acc + t.coef.abs() * x),
                        _ => None,
                    };
                }
            }
        }
        let mut f = Functional::new(label, move |c| {
            compiled
                .iter()
                .map(|(coef, basis, prefix)| match basis {
                    None => *coef,
                    Some(b) => coef * b.eval_count(c[b.atom()], prefix),
                })
                .sum()
        })
        .with_signs(sign_d, sign_d2);
        if let Some(b) = bound {
            f = f.with_bound(b);
        }
        f
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Count(i) => write!(f, "count({i})"),
            Basis::CountPow(i, k) => write!(f, "count_pow({i}, {k})"),
            Basis::IndicatorLe(i, k) => write!(f, "indicator_le({i}, {k})"),
            Basis::IndicatorGe(i, k) => write!(f, "indicator_ge({i}, {k})"),
            Basis::ExpNeg(a, i) => write!(f, "exp_neg({}, {i})", fmt_num(*a)),
            Basis::CumsumG(i, g) => {
                let items: Vec<String> = g.iter().map(|v| fmt_num(*v)).collect();
                write!(f, "cumsum_g({i}, [{}])", items.join(", "))
            }
            Basis::CumsumGeom(i, r) => write!(f, "cumsum_geom({i}, {})", fmt_num(*r)),
            Basis::MaxRadiusGt(i) => write!(f, "max_radius_gt({i})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let neg = t.coef.is_sign_negative();
            let mag = t.coef.abs();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match &t.basis {
                None => f.write_str(&fmt_num(mag))?,
                Some(b) if mag == 1.0 => write!(f, "{b}")?,
                Some(b) => write!(f, "{}*{b}", fmt_num(mag))?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
}

struct Lexed {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let (l0, c0) = (line, col);
        if ch == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if ch.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let simple = match ch {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Lexed {
                tok,
                line: l0,
                column: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError {
                line: l0,
                column: c0,
                message: format!("malformed number '{text}'"),
            })?;
            col += i - start;
            out.push(Lexed {
                tok: Tok::Num(value),
                line: l0,
                column: c0,
            });
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Lexed {
                tok: Tok::Ident(text),
                line: l0,
                column: c0,
            });
            continue;
        }
        return Err(ParseError {
            line: l0,
            column: c0,
            message: format!("unexpected character '{ch}'"),
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |l| (l.line, l.column))
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError {
            line,
            column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected a number"),
        }
    }

    fn index(&mut self, what: &str) -> Result<u32, ParseError> {
        let (line, column) = self.here();
        let v = self.number()?;
        if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return Err(ParseError {
                line,
                column,
                message: format!("{what} must be a non-negative integer, got {v}"),
            });
        }
        Ok(v as u32)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = Vec::new();
        let mut sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        loop {
            let mut t = self.term()?;
            t.coef *= sign;
            terms.push(t);
            sign = match self.peek() {
                Some(Tok::Plus) => 1.0,
                Some(Tok::Minus) => -1.0,
                None => break,
                Some(_) => return self.err("expected '+', '-' or end of expression"),
            };
            self.pos += 1;
        }
        Ok(Expr { terms })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let coef = *v;
                self.pos += 1;
                if self.peek() == Some(&Tok::Star) {
                    self.pos += 1;
                    let basis = self.call()?;
                    Ok(Term {
                        coef,
                        basis: Some(basis),
                    })
                } else {
                    Ok(Term { coef, basis: None })
                }
            }
            Some(Tok::Ident(_)) => Ok(Term {
                coef: 1.0,
                basis: Some(self.call()?),
            }),
            _ => self.err("expected a number or a function call"),
        }
    }

    fn call(&mut self) -> Result<Basis, ParseError> {
        let (line, column) = self.here();
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.err("expected a function name"),
        };
        self.pos += 1;
        self.expect(Tok::LParen, "'('")?;
        let basis = match name.as_str() {
            "count" => Basis::Count(self.index("atom")? as usize),
            "count_pow" => {
                let i = self.index("atom")? as usize;
                self.expect(Tok::Comma, "','")?;
                Basis::CountPow(i, self.index("power")?)
            }
            "indicator_le" | "indicator_ge" => {
                let i = self.index("atom")? as usize;
                self.expect(Tok::Comma, "','")?;
                let k = self.index("threshold")?;
                if name == "indicator_le" {
                    Basis::IndicatorLe(i, k)
                } else {
                    Basis::IndicatorGe(i, k)
                }
            }
            "exp_neg" => {
                let a = self.number()?;
                self.expect(Tok::Comma, "','")?;
                Basis::ExpNeg(a, self.index("atom")? as usize)
            }
            "cumsum_g" => {
                let i = self.index("atom")? as usize;
                self.expect(Tok::Comma, "','")?;
                let (gl, gc) = self.here();
                self.expect(Tok::LBracket, "'['")?;
                let mut g = Vec::new();
                if self.peek() != Some(&Tok::RBracket) {
                    loop {
                        g.push(self.number()?);
                        if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, "']'")?;
                let valid = g.iter().all(|v| *v >= 0.0) && g.windows(2).all(|w| w[1] <= w[0]);
                if !valid {
                    return Err(ParseError {
                        line: gl,
                        column: gc,
                        message: "cumsum_g increments must be non-negative and non-increasing".into(),
                    });
                }
                Basis::CumsumG(i, g)
            }
            "cumsum_geom" => {
                let i = self.index("atom")? as usize;
                self.expect(Tok::Comma, "','")?;
                let (rl, rc) = self.here();
                let r = self.number()?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(ParseError {
                        line: rl,
                        column: rc,
                        message: format!("cumsum_geom ratio must lie in [0, 1], got {r}"),
                    });
                }
                Basis::CumsumGeom(i, r)
            }
            "max_radius_gt" => Basis::MaxRadiusGt(self.index("atom")? as usize),
            other => {
                return Err(ParseError {
                    line,
                    column,
                    message: format!("unknown function '{other}'"),
                })
            }
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(basis)
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let lines: Vec<&str> = src.split('\n').collect();
    let end = (lines.len(), lines.last().map_or(0, |l| l.chars().count()) + 1);
    if toks.is_empty() {
        return Err(ParseError {
            line: end.0,
            column: end.1,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser { toks, pos: 0, end };
    p.expr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_affine_combination() {
        let e = parse("1 - 2*indicator_le(0, 3) + exp_neg(0.5, 1)").unwrap();
        assert_eq!(e.terms.len(), 3);
        assert_eq!(e.terms[1].coef, -2.0);
        let f = e.to_functional();
        assert_eq!(f.eval(&[0, 0]), 1.0 - 2.0 + 1.0);
        assert_eq!(f.eval(&[4, 0]), 1.0 + 1.0);
    }

    #[test]
    fn error_positions() {
        let err = parse("count(0) + bogus(1)").unwrap_err();
        assert_eq!((err.line, err.column), (1, 12));
        let err = parse("count(0").unwrap_err();
        assert_eq!((err.line, err.column), (1, 8));
        let err = parse("count(0)\n + indicator_le(0 3)").unwrap_err();
        assert_eq!((err.line, err.column), (2, 19));
        assert!(parse("cumsum_g(0, [1, 2])").is_err());
        assert!(parse("count(1.5)").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn declared_signs() {
        let f = parse("cumsum_g(0, [1, 1, 0.5])").unwrap().to_functional();
        assert_eq!(
            (f.declared_sign_d(), f.declared_sign_d2()),
            (Sign::NonNeg, Sign::NonPos)
        );
        assert_eq!(f.bounded_by(), Some(2.5));
        let f = parse("2 - count(0)").unwrap().to_functional();
        assert_eq!((f.declared_sign_d(), f.declared_sign_d2()), (Sign::NonPos, Sign::Zero));
        assert_eq!(f.bounded_by(), None);
    }

    #[test]
    fn cumsum_matches_definition() {
        let f = parse("cumsum_g(0, [1, 0.5, 0.25])").unwrap().to_functional();
        let expect = [0.0, 1.0, 1.5, 1.75, 1.75, 1.75];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(f.eval(&[n as u32]), *e);
        }
        let g = parse("cumsum_geom(0, 0.5)").unwrap().to_functional();
        assert!((g.eval(&[3]) - 1.75).abs() < 1e-15);
    }

    fn arb_basis() -> impl Strategy<Value = Basis> {
        let atom = 0usize..4;
        prop_oneof![
            atom.clone().prop_map(Basis::Count),
            (atom.clone(), 0u32..4).prop_map(|(i, k)| Basis::CountPow(i, k)),
            (atom.clone(), 0u32..50).prop_map(|(i, k)| Basis::IndicatorLe(i, k)),
            (atom.clone(), 0u32..50).prop_map(|(i, k)| Basis::IndicatorGe(i, k)),
            (-5.0f64..5.0, atom.clone()).prop_map(|(a, i)| Basis::ExpNeg(a, i)),
            (atom.clone(), proptest::collection::vec(0.0f64..3.0, 0..6)).prop_map(|(i, mut g)| {
                g.sort_by(|a, b| b.partial_cmp(a).unwrap());
                Basis::CumsumG(i, g)
            }),
            (atom.clone(), 0.0f64..=1.0).prop_map(|(i, r)| Basis::CumsumGeom(i, r)),
            atom.prop_map(Basis::MaxRadiusGt),
        ]
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        proptest::collection::vec(
            (-10.0f64..10.0, proptest::option::of(arb_basis())).prop_map(|(coef, basis)| Term { coef, basis }),
            1..5,
        )
        .prop_map(|terms| Expr { terms })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), printed);
        }
    }
}
