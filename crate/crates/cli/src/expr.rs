//! Arithmetic expressions in one variable `t` for user nonlinearities.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right associative, so `-t^2` is
//! `-(t^2)` and `2^3^2` is `2^9`. Functions: `abs`, `ln`, `exp`, and
//! `piecewise(c, a, b)`, which is `a` where `c <= 0` and `b` elsewhere.
//! Identifiers other than `t` are looked up in the parameter table given to
//! [`Expr::parse`].

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Ln,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Piecewise(Box<Node>, Box<Node>, Box<Node>),
}

impl Node {
    fn conditions<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Const(_) | Node::Var => {}
            Node::Neg(a) | Node::Call(_, a) => a.conditions(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.conditions(out);
                b.conditions(out);
            }
            Node::Piecewise(c, a, b) => {
                out.push(c);
                c.conditions(out);
                a.conditions(out);
                b.conditions(out);
            }
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var => t,
            Node::Neg(a) => -a.eval(t),
            Node::Add(a, b) => a.eval(t) + b.eval(t),
            Node::Sub(a, b) => a.eval(t) - b.eval(t),
            Node::Mul(a, b) => a.eval(t) * b.eval(t),
            Node::Div(a, b) => a.eval(t) / b.eval(t),
            Node::Pow(a, b) => pow(a.eval(t), b.eval(t)),
            Node::Call(Func::Abs, a) => a.eval(t).abs(),
            Node::Call(Func::Ln, a) => a.eval(t).ln(),
            Node::Call(Func::Exp, a) => a.eval(t).exp(),
            Node::Piecewise(c, a, b) => {
                if c.eval(t) <= 0.0 {
                    a.eval(t)
                } else {
                    b.eval(t)
                }
            }
        }
    }
}

// integer exponents keep odd powers of negative numbers real
fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() < 2f64.powi(31) {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str, params: &BTreeMap<String, f64>) -> Result<Expr, ParseError> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            params,
            len: source.len(),
        };
        let root = p.expr()?;
        if let Some((at, tok)) = p.tokens.get(p.pos) {
            return Err(ParseError {
                position: *at,
                message: format!("unexpected {tok}"),
            });
        }
        Ok(Expr {
            source: source.to_string(),
            root,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.root.eval(t)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Points in `±[1e-8, 1e8]` where some `piecewise` switches branch,
    /// located by a log-spaced scan and bisection.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut conditions = Vec::new();
        self.root.conditions(&mut conditions);
        let scan: Vec<f64> = (0..=1600).map(|i| 10f64.powf(-8.0 + i as f64 / 100.0)).collect();
        let mut out = Vec::new();
        for c in conditions {
            for sign in [1.0, -1.0] {
                let side = |t: f64| c.eval(sign * t) <= 0.0;
                for w in scan.windows(2) {
                    let (mut lo, mut hi) = (w[0], w[1]);
                    let left = side(lo);
                    if left == side(hi) {
                        continue;
                    }
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if side(mid) == left {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    out.push(sign * hi);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(x) => write!(f, "number {x}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Op(c) => write!(f, "`{c}`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part, only when followed by digits
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let x: f64 = text.parse().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Token::Num(x)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                message: format!("unexpected character `{}`", src[i..].chars().next().unwrap()),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    len: usize,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Token::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(at, _)| *at)
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError {
                position: self.here(),
                message: format!("expected `{op}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let at = self.here();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ParseError {
                position: at,
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok {
            Token::Num(x) => Ok(Node::Const(x)),
            Token::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) if self.peek_op() == Some('(') => {
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.peek_op() == Some(',') {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                call(&name, args).map_err(|message| ParseError {
                    position: at,
                    message,
                })
            }
            Token::Ident(name) => {
                if name == "t" {
                    Ok(Node::Var)
                } else if let Some(&v) = self.params.get(&name) {
                    Ok(Node::Const(v))
                } else {
                    Err(ParseError {
                        position: at,
                        message: format!("unknown name `{name}`"),
                    })
                }
            }
            tok => Err(ParseError {
                position: at,
                message: format!("unexpected {tok}"),
            }),
        }
    }
}

fn call(name: &str, mut args: Vec<Node>) -> Result<Node, String> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
        }
    };
    let func = match name {
        "abs" => Func::Abs,
        "ln" => Func::Ln,
        "exp" => Func::Exp,
        "piecewise" => {
            arity(3)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            let c = args.pop().unwrap();
            return Ok(Node::Piecewise(Box::new(c), Box::new(a), Box::new(b)));
        }
        _ => return Err(format!("unknown function `{name}`")),
    };
    arity(1)?;
    Ok(Node::Call(func, Box::new(args.pop().unwrap())))
}
