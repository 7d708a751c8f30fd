//! Arithmetic expressions over named variables, with forward-mode
//! differentiation on the parse tree.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | '+' unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin`, `cos`, `exp`, `sqrt`, `log`, `tan`. Constant: `pi`.

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

/// Maximum number of independent variables a [`Jet`] tracks.
pub const MAX_VARS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
    Tan,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "log" | "ln" => Func::Log,
            "tan" => Func::Tan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Tan => "tan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected token '{0}'")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("function '{name}' takes {expected} argument(s), got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("malformed number '{0}'")]
    BadNumber(String),
    #[error("expected {expected} expressions, found {found}")]
    Count { expected: usize, found: usize },
}

/// Parse failure with a 1-based character column into the source.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at column {column}")]
pub struct ExprError {
    pub kind: ExprErrorKind,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "{x}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Op(c) => write!(f, "{c}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Comma => f.write_str(","),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let value = text
                .parse::<f64>()
                .map_err(|_| ExprError { kind: ExprErrorKind::BadNumber(text.clone()), column: col })?;
            out.push((Tok::Num(value), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => return Err(ExprError { kind: ExprErrorKind::UnexpectedChar(c), column: col }),
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    end_col: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, kind: ExprErrorKind) -> ExprError {
        ExprError { kind, column: self.col() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let col = self.col();
        match self.next() {
            None => Err(ExprError { kind: ExprErrorKind::UnexpectedEnd, column: col }),
            Some(Tok::Num(x)) => Ok(Expr::Num(x)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    Some(t) => {
                        self.pos -= 1;
                        Err(self.err(ExprErrorKind::UnexpectedToken(t.to_string())))
                    }
                    None => Err(self.err(ExprErrorKind::UnexpectedEnd)),
                }
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let func = Func::lookup(&name)
                        .ok_or(ExprError { kind: ExprErrorKind::UnknownIdentifier(name.clone()), column: col })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    loop {
                        match self.next() {
                            Some(Tok::Comma) => args.push(self.expr()?),
                            Some(Tok::RParen) => break,
                            Some(t) => {
                                self.pos -= 1;
                                return Err(self.err(ExprErrorKind::UnexpectedToken(t.to_string())));
                            }
                            None => return Err(self.err(ExprErrorKind::UnexpectedEnd)),
                        }
                    }
                    if args.len() != 1 {
                        return Err(ExprError {
                            kind: ExprErrorKind::Arity { name, expected: 1, found: args.len() },
                            column: col,
                        });
                    }
                    return Ok(Expr::Call(func, Box::new(args.pop().unwrap())));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(f) = Func::lookup(&name) {
                    return Err(ExprError {
                        kind: ExprErrorKind::Arity { name: f.name().to_string(), expected: 1, found: 0 },
                        column: col,
                    });
                }
                Err(ExprError { kind: ExprErrorKind::UnknownIdentifier(name), column: col })
            }
            Some(t) => Err(ExprError { kind: ExprErrorKind::UnexpectedToken(t.to_string()), column: col }),
        }
    }
}

/// Parses a single expression over the variables `vars`. Jet evaluation
/// supports at most [`MAX_VARS`] of them.
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, vars, end_col: src.chars().count() + 1 };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.err(ExprErrorKind::UnexpectedToken(t.to_string())));
    }
    Ok(e)
}

/// Parses `count` semicolon-separated expressions. Column numbers refer to
/// the full source string.
pub fn parse_list(src: &str, vars: &[&str], count: usize) -> Result<Vec<Expr>, ExprError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in src.split(';') {
        let parsed = parse(piece, vars).map_err(|e| ExprError { column: e.column + offset, ..e })?;
        out.push(parsed);
        offset += piece.chars().count() + 1;
    }
    if out.len() != count {
        return Err(ExprError { kind: ExprErrorKind::Count { expected: count, found: out.len() }, column: 1 });
    }
    Ok(out)
}

/// Value together with its partial derivatives with respect to up to
/// [`MAX_VARS`] independent variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub d: [T; MAX_VARS],
}

impl<T: Real> Jet<T> {
    pub fn constant(v: T) -> Self {
        Self { v, d: [T::zero(); MAX_VARS] }
    }

    /// Independent variable number `i` with value `v`.
    pub fn var(v: T, i: usize) -> Self {
        let mut d = [T::zero(); MAX_VARS];
        d[i] = T::one();
        Self { v, d }
    }

    fn chain(self, v: T, dv: T) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Self { v, d }
    }

    fn combine(a: Self, b: Self, v: T, da: T, db: T) -> Self {
        let mut d = [T::zero(); MAX_VARS];
        for i in 0..MAX_VARS {
            d[i] = da * a.d[i] + db * b.d[i];
        }
        Self { v, d }
    }

    fn is_constant(&self) -> bool {
        self.d.iter().all(|x| *x == T::zero())
    }
}

impl Expr {
    /// Plain evaluation.
    pub fn eval<T: Real>(&self, vars: &[T]) -> T {
        match self {
            Expr::Num(x) => T::of(*x),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars), b.eval(vars));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(vars);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Log => a.ln(),
                    Func::Tan => a.tan(),
                }
            }
        }
    }

    /// Forward-mode evaluation: value and exact partial derivatives.
    pub fn eval_jet<T: Real>(&self, vars: &[Jet<T>]) -> Jet<T> {
        match self {
            Expr::Num(x) => Jet::constant(T::of(*x)),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => {
                let a = a.eval_jet(vars);
                a.chain(-a.v, -T::one())
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval_jet(vars), b.eval_jet(vars));
                match op {
                    BinOp::Add => Jet::combine(a, b, a.v + b.v, T::one(), T::one()),
                    BinOp::Sub => Jet::combine(a, b, a.v - b.v, T::one(), -T::one()),
                    BinOp::Mul => Jet::combine(a, b, a.v * b.v, b.v, a.v),
                    BinOp::Div => {
                        let v = a.v / b.v;
                        Jet::combine(a, b, v, T::one() / b.v, -v / b.v)
                    }
                    BinOp::Pow => {
                        let v = a.v.powf(b.v);
                        if b.is_constant() {
                            // d(a^c) = c a^(c-1) da, valid for negative a with integer c
                            let da = if b.v == T::zero() { T::zero() } else { b.v * a.v.powf(b.v - T::one()) };
                            a.chain(v, da)
                        } else {
                            Jet::combine(a, b, v, b.v * a.v.powf(b.v - T::one()), v * a.v.ln())
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval_jet(vars);
                match f {
                    Func::Sin => a.chain(a.v.sin(), a.v.cos()),
                    Func::Cos => a.chain(a.v.cos(), -a.v.sin()),
                    Func::Exp => {
                        let e = a.v.exp();
                        a.chain(e, e)
                    }
                    Func::Sqrt => {
                        let s = a.v.sqrt();
                        a.chain(s, T::half() / s)
                    }
                    Func::Log => a.chain(a.v.ln(), T::one() / a.v),
                    Func::Tan => {
                        let t = a.v.tan();
                        a.chain(t, T::one() + t * t)
                    }
                }
            }
        }
    }
}
