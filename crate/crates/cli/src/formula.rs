//! Parser for per-degree parameter formulas.
//!
//! A formula is a sum of terms `c * (1+l)^p` with complex `c`, for example
//! `2 - (1+l)^(-2)`, `1 + 1*i`, `0.5*(1+l)^(-3)` or `2i`. The whole formula
//! may be wrapped as `1/(...)` to request the reciprocal rule.

use krein_ball::triple_engine::{DiagonalRule, PowerTerm};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(f64),
    I,
    L,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => push(&mut out, &mut i, Token::Plus),
            '-' => push(&mut out, &mut i, Token::Minus),
            '*' => push(&mut out, &mut i, Token::Star),
            '/' => push(&mut out, &mut i, Token::Slash),
            '^' => push(&mut out, &mut i, Token::Caret),
            '(' => push(&mut out, &mut i, Token::Open),
            ')' => push(&mut out, &mut i, Token::Close),
            'i' | 'j' => push(&mut out, &mut i, Token::I),
            'l' => push(&mut out, &mut i, Token::L),
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{text}'"))?;
                out.push(Token::Num(v));
                // implicit product in "2i" or "2(1+l)^..."
                if i < bytes.len() && matches!(bytes[i], b'i' | b'j' | b'(') {
                    out.push(Token::Star);
                }
            }
            _ => return Err(format!("unexpected character '{c}'")),
        }
    }
    Ok(out)
}

fn push(out: &mut Vec<Token>, i: &mut usize, t: Token) {
    out.push(t);
    *i += 1;
}

/// Sum of power terms, kept unmerged.
type Poly = Vec<PowerTerm>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<Token> {
        self.tokens.get(self.pos + offset).copied()
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Token) -> Result<(), String> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(format!("expected {t:?}, found {got:?}")),
        }
    }

    fn sum(&mut self) -> Result<Poly, String> {
        let mut acc = Poly::new();
        let mut sign = 1.0;
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                sign = -1.0;
            }
            Some(Token::Plus) => self.pos += 1,
            _ => {}
        }
        loop {
            let term = self.product()?;
            acc.extend(term.into_iter().map(|t| PowerTerm {
                coef: t.coef * sign,
                power: t.power,
            }));
            match self.peek() {
                Some(Token::Plus) => sign = 1.0,
                Some(Token::Minus) => sign = -1.0,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn product(&mut self) -> Result<Poly, String> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = multiply(&acc, &rhs);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    let [t] = rhs.as_slice() else {
                        return Err("only a single term c*(1+l)^p may appear as a divisor".into());
                    };
                    if t.coef.norm() == 0.0 {
                        return Err("division by zero".into());
                    }
                    let inv = PowerTerm {
                        coef: t.coef.inv(),
                        power: -t.power,
                    };
                    acc = multiply(&acc, &[inv]);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn is_degree_base(&self) -> bool {
        self.peek() == Some(Token::Open)
            && self.peek_at(1) == Some(Token::Num(1.0))
            && self.peek_at(2) == Some(Token::Plus)
            && self.peek_at(3) == Some(Token::L)
            && self.peek_at(4) == Some(Token::Close)
    }

    fn factor(&mut self) -> Result<Poly, String> {
        if self.is_degree_base() {
            self.pos += 5;
            let power = if self.peek() == Some(Token::Caret) {
                self.pos += 1;
                self.exponent()?
            } else {
                1.0
            };
            return Ok(vec![PowerTerm {
                coef: Complex64::new(1.0, 0.0),
                power,
            }]);
        }
        match self.next() {
            Some(Token::Num(v)) => Ok(constant(Complex64::new(v, 0.0))),
            Some(Token::I) => Ok(constant(Complex64::new(0.0, 1.0))),
            Some(Token::Minus) => {
                let inner = self.factor()?;
                Ok(inner
                    .into_iter()
                    .map(|t| PowerTerm {
                        coef: -t.coef,
                        power: t.power,
                    })
                    .collect())
            }
            Some(Token::Open) => {
                let inner = self.sum()?;
                self.expect(Token::Close)?;
                Ok(inner)
            }
            Some(Token::L) => Err("the degree may only appear as (1+l)".into()),
            other => Err(format!("unexpected token {other:?}")),
        }
    }

    fn exponent(&mut self) -> Result<f64, String> {
        let paren = self.peek() == Some(Token::Open);
        if paren {
            self.pos += 1;
        }
        let sign = match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Token::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        let v = match self.next() {
            Some(Token::Num(v)) => v,
            other => return Err(format!("expected a real exponent, found {other:?}")),
        };
        if paren {
            self.expect(Token::Close)?;
        }
        Ok(sign * v)
    }
}

fn constant(c: Complex64) -> Poly {
    vec![PowerTerm {
        coef: c,
        power: 0.0,
    }]
}

fn multiply(a: &[PowerTerm], b: &[PowerTerm]) -> Poly {
    a.iter()
        .flat_map(|x| {
            b.iter().map(move |y| PowerTerm {
                coef: x.coef * y.coef,
                power: x.power + y.power,
            })
        })
        .collect()
}

fn merge(terms: Poly) -> Poly {
    let mut out: Poly = Vec::new();
    for t in terms {
        match out.iter_mut().find(|o| o.power == t.power) {
            Some(o) => o.coef += t.coef,
            None => out.push(t),
        }
    }
    out.retain(|t| t.coef.norm() != 0.0);
    out
}

/// Parses a formula into a diagonal rule.
pub fn parse_rule(src: &str) -> Result<DiagonalRule, String> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err("empty formula".into());
    }
    let mut p = Parser { tokens, pos: 0 };
    // 1/(...) with a multi-term body is the reciprocal rule
    let reciprocal = p.peek() == Some(Token::Num(1.0))
        && p.peek_at(1) == Some(Token::Slash)
        && p.peek_at(2) == Some(Token::Open);
    if reciprocal {
        p.pos += 3;
        let body = p
            .sum()
            .and_then(|b| p.expect(Token::Close).map(|_| merge(b)));
        if let Ok(body) = body {
            if p.peek().is_none() && body.len() > 1 {
                return Ok(DiagonalRule {
                    terms: body,
                    inverted: true,
                });
            }
        }
        p.pos = 0;
    }
    let terms = p.sum()?;
    if let Some(t) = p.peek() {
        return Err(format!("trailing input at {t:?}"));
    }
    Ok(DiagonalRule {
        terms: merge(terms),
        inverted: false,
    })
}

/// Parses a complex constant such as `1`, `-2.5`, `i`, `0.5 + 2i`.
pub fn parse_complex(src: &str) -> Result<Complex64, String> {
    let rule = parse_rule(src)?;
    if rule.inverted || rule.terms.iter().any(|t| t.power != 0.0) {
        return Err(format!("'{src}' is not a constant"));
    }
    Ok(rule.terms.iter().map(|t| t.coef).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_documented_forms() {
        let r = parse_rule("2 - (1+l)^(-2)").unwrap();
        assert_eq!(r.value(0).unwrap(), c(1.0, 0.0));
        assert!((r.value(3).unwrap() - c(2.0 - 1.0 / 16.0, 0.0)).norm() < 1e-15);

        assert_eq!(
            parse_rule("1 + 1*i").unwrap().value(7).unwrap(),
            c(1.0, 1.0)
        );
        let r = parse_rule("0.5*(1+l)^(-3)").unwrap();
        assert!((r.value(1).unwrap() - c(0.0625, 0.0)).norm() < 1e-15);
        assert_eq!(parse_rule("2i").unwrap().value(0).unwrap(), c(0.0, 2.0));
        assert_eq!(parse_rule("-1").unwrap().value(0).unwrap(), c(-1.0, 0.0));
    }

    #[test]
    fn reciprocal_rule() {
        let r = parse_rule("1/(1 + (1+l))").unwrap();
        assert!(r.inverted);
        assert!((r.value(1).unwrap() - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let s = parse_rule("1/(1+l)^2").unwrap();
        assert!(!s.inverted);
        assert!((s.value(1).unwrap() - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn products_distribute() {
        let r = parse_rule("(1 + i)*(2 + (1+l)^(-1))").unwrap();
        let v = r.value(1).unwrap();
        assert!((v - c(1.0, 1.0) * 2.5).norm() < 1e-15);
        let e = parse_rule("1e-3*(1+l)^(1.5)").unwrap();
        assert!((e.value(3).unwrap() - c(8e-3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "2 +",
            "l",
            "(1+l",
            "2 $ 3",
            "1/(1+l) - ",
            "(2+l)^2",
            "1/0",
        ] {
            assert!(parse_rule(bad).is_err(), "{bad}");
        }
        assert!(parse_complex("(1+l)").is_err());
        assert_eq!(parse_complex("0.5 - 2i").unwrap(), c(0.5, -2.0));
    }
}
