//! Recursive-descent parser and evaluator for the function DSL.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := atom ('^' number)?
//! atom   := number | variable | func '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1..xn`, `y1..yn` and `t`; functions are `abs`, `max`,
//! `sqrt` and `exp`. Positions in errors are 0-based character offsets.

use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::group::HPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    X(usize),
    Y(usize),
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Abs(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Evaluates at `p`. Domain errors surface as NaN or infinities; callers
    /// check finiteness.
    pub fn eval(&self, p: &HPoint) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X(i)) => p.x[*i],
            Expr::Var(Var::Y(i)) => p.y[*i],
            Expr::Var(Var::T) => p.t,
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, e) => {
                let base = a.eval(p);
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    base.powi(*e as i32)
                } else {
                    base.powf(*e)
                }
            }
            Expr::Abs(a) => a.eval(p).abs(),
            Expr::Max(a, b) => a.eval(p).max(b.eval(p)),
            Expr::Sqrt(a) => a.eval(p).sqrt(),
            Expr::Exp(a) => a.eval(p).exp(),
        }
    }

    /// Whether the expression mentions `t`.
    pub fn uses_t(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == Var::T,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) | Expr::Sqrt(a) | Expr::Exp(a) => a.uses_t(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Max(a, b) => {
                a.uses_t() || b.uses_t()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Lexer> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-5
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
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| HeisError::Syntax {
                pos: start,
                msg: format!("malformed number `{s}`"),
            })?;
            toks.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^(),".contains(c) || c == '\u{2212}' {
            toks.push((Tok::Sym(if c == '\u{2212}' { '-' } else { c }), i));
            i += 1;
        } else {
            return Err(HeisError::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    n: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T> {
        Err(HeisError::Syntax {
            pos: self.pos(),
            msg: format!("expected {wanted}, found {}", describe(self.peek())),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let sign = if *self.peek() == Tok::Sym('-') {
            self.bump();
            -1.0
        } else {
            1.0
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Pow(Box::new(base), sign * v))
            }
            _ => self.unexpected("a numeric exponent"),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Sym('(') {
                    self.call(name, pos)
                } else {
                    self.variable(name, pos)
                }
            }
            other => Err(HeisError::Syntax {
                pos,
                msg: format!("expected a number, variable, function or `(`, found {}", describe(&other)),
            }),
        }
    }

    fn variable(&self, name: String, pos: usize) -> Result<Expr> {
        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        let unknown = || HeisError::UnknownIdentifier { pos, name: name.clone() };
        let (head, idx) = name.split_at(1);
        let k: usize = idx.parse().map_err(|_| unknown())?;
        if k == 0 || k > self.n || idx.starts_with('0') {
            return Err(unknown());
        }
        match head {
            "x" => Ok(Expr::Var(Var::X(k - 1))),
            "y" => Ok(Expr::Var(Var::Y(k - 1))),
            _ => Err(unknown()),
        }
    }

    fn call(&mut self, name: String, pos: usize) -> Result<Expr> {
        let arity = match name.as_str() {
            "abs" | "sqrt" | "exp" => 1,
            "max" => 2,
            _ => return Err(HeisError::UnknownIdentifier { pos, name }),
        };
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Sym(',') {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(')')?;
        if args.len() != arity {
            return Err(HeisError::Arity {
                pos,
                name,
                expected: arity,
                got: args.len(),
            });
        }
        let mut it = args.into_iter().map(Box::new);
        let a = it.next().unwrap();
        Ok(match name.as_str() {
            "abs" => Expr::Abs(a),
            "sqrt" => Expr::Sqrt(a),
            "exp" => Expr::Exp(a),
            _ => Expr::Max(a, it.next().unwrap()),
        })
    }
}

/// Parses `text` as a function of `n`-dimensional Heisenberg coordinates.
pub fn parse_expr(text: &str, n: usize) -> Result<Expr> {
    if n == 0 {
        return Err(HeisError::InvalidParameter("dimension n must be >= 1".into()));
    }
    let lexer = lex(text)?;
    let mut p = Parser { toks: lexer.toks, at: 0, n };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.unexpected("an operator or end of input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, t: f64) -> HPoint {
        HPoint::h1(x, y, t)
    }

    #[test]
    fn parses_and_evaluates() {
        let e = parse_expr("x1^2 + y1^2", 1).unwrap();
        assert_eq!(e.eval(&at(3.0, 4.0, 7.0)), 25.0);
        assert!(!e.uses_t());
        let e = parse_expr("x1^2 + y1^2 + t^2", 1).unwrap();
        assert_eq!(e.eval(&at(1.0, 2.0, 3.0)), 14.0);
        assert!(e.uses_t());
        let e = parse_expr("max(abs(x1), 2) * sqrt(4) / exp(0) - -1", 1).unwrap();
        assert_eq!(e.eval(&at(-3.0, 0.0, 0.0)), 7.0);
        let e = parse_expr("x2 * y2 + 1.5e1", 2).unwrap();
        let p = HPoint::new(&[0.0, 2.0], &[0.0, 3.0], 0.0).unwrap();
        assert_eq!(e.eval(&p), 21.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-x1^2", 1).unwrap();
        assert_eq!(e.eval(&at(3.0, 0.0, 0.0)), -9.0);
        let e = parse_expr("\u{2212}(x1^2)", 1).unwrap();
        assert_eq!(e.eval(&at(3.0, 0.0, 0.0)), -9.0);
        let e = parse_expr("2 + 3 * 4 - 8 / 2 / 2", 1).unwrap();
        assert_eq!(e.eval(&at(0.0, 0.0, 0.0)), 12.0);
        let e = parse_expr("abs(y1)^0.5", 1).unwrap();
        assert_eq!(e.eval(&at(0.0, -4.0, 0.0)), 2.0);
        let e = parse_expr("x1^-1", 1).unwrap();
        assert_eq!(e.eval(&at(4.0, 0.0, 0.0)), 0.25);
    }

    #[test]
    fn reports_errors_with_positions() {
        assert_eq!(
            parse_expr("x1 + * y1", 1).unwrap_err(),
            HeisError::Syntax {
                pos: 5,
                msg: "expected a number, variable, function or `(`, found `*`".into()
            }
        );
        assert!(matches!(
            parse_expr("x2 + 1", 1),
            Err(HeisError::UnknownIdentifier { pos: 0, .. })
        ));
        assert!(matches!(parse_expr("z1", 1), Err(HeisError::UnknownIdentifier { .. })));
        assert!(matches!(parse_expr("cos(x1)", 1), Err(HeisError::UnknownIdentifier { .. })));
        assert!(matches!(
            parse_expr("max(x1)", 1),
            Err(HeisError::Arity { pos: 0, expected: 2, got: 1, .. })
        ));
        assert!(matches!(parse_expr("(x1 + 1", 1), Err(HeisError::Syntax { pos: 7, .. })));
        assert!(matches!(parse_expr("x1 y1", 1), Err(HeisError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_expr("x1 ^ y1", 1), Err(HeisError::Syntax { pos: 5, .. })));
        assert!(matches!(parse_expr("x1 $ 2", 1), Err(HeisError::Syntax { pos: 3, .. })));
    }
}
