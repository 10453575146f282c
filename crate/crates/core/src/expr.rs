//! Single-variable arithmetic expressions for the coefficient `a(t)` and the
//! nonlinearity `f(u)`.
//!
//! Grammar (whitespace is insignificant, no implicit multiplication):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | 'e' | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! func   := exp | log | sqrt | abs | sin | cos
//! ```
//!
//! A rational `p/q` is just a division of two literals.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    E,
    Pi,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::E => std::f64::consts::E,
            Constant::Pi => std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Const(Constant),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression in one declared variable.
///
/// Immutable once built; evaluation takes `&self` and is safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    var: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::UnknownIdentifier { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when followed by digits, so `2e` stays `2` `e`
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
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    expected: "a number".into(),
                    found: format!("`{text}`"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((start, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    pos: start,
                    expected: "an operand or operator".into(),
                    found: format!("`{ch}`"),
                });
            }
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].1
    }

    fn pos(&self) -> usize {
        self.toks[self.idx].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].1.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Tok::Op('^')) {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == self.var {
                    return Ok(Node::Var);
                }
                if let Some(func) = Func::from_name(&name) {
                    if !matches!(self.peek(), Tok::LParen) {
                        return Err(self.err(&format!("`(` after `{name}`")));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "e" => Ok(Node::Const(Constant::E)),
                    "pi" => Ok(Node::Const(Constant::Pi)),
                    _ => Err(ParseError::UnknownIdentifier { pos, name }),
                }
            }
            _ => Err(self.err("a number, variable, function call or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::RParen) {
            self.bump();
            Ok(())
        } else {
            Err(self.err("`)`"))
        }
    }
}

/// Parse `source` as an expression in the single variable `var`.
pub fn parse(source: &str, var: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks, idx: 0, var };
    let root = p.expr()?;
    if !matches!(p.peek(), Tok::End) {
        return Err(p.err("an operator or end of input"));
    }
    Ok(Expr {
        var: var.to_string(),
        root,
    })
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn pow(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exp < 0.0 {
        return Err(EvalError::Domain("zero raised to a negative power"));
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(EvalError::Domain("negative base with non-integer exponent"));
    }
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        return finite(base.powi(exp as i32));
    }
    finite(base.powf(exp))
}

fn eval_node(node: &Node, x: f64) -> Result<f64, EvalError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Var => x,
        Node::Const(c) => c.value(),
        Node::Neg(inner) => -eval_node(inner, x)?,
        Node::Binary(op, l, r) => {
            let a = eval_node(l, x)?;
            let b = eval_node(r, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => pow(a, b)?,
            }
        }
        Node::Call(func, arg) => {
            let a = eval_node(arg, x)?;
            match func {
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(EvalError::Domain("log of a nonpositive number"));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(EvalError::Domain("sqrt of a negative number"));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
            }
        }
    };
    finite(v)
}

impl Expr {
    /// Evaluate at `value` of the declared variable.
    pub fn eval(&self, value: f64) -> Result<f64, EvalError> {
        if !value.is_finite() {
            return Err(EvalError::NonFinite);
        }
        eval_node(&self.root, value)
    }

    pub fn var(&self) -> &str {
        &self.var
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// `c * self`, used for scaling experiments.
    pub fn scaled(&self, c: f64) -> Expr {
        Expr {
            var: self.var.clone(),
            root: Node::Binary(BinOp::Mul, Box::new(Node::Num(c)), Box::new(self.root.clone())),
        }
    }

    /// True when the expression is the literal zero function after constant
    /// folding of literals only (no sampling).
    pub fn is_literal_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }
}

struct Printer<'a> {
    node: &'a Node,
    var: &'a str,
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |node| Printer { node, var: self.var };
        match self.node {
            // `{:?}` is the shortest round-tripping representation
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var => f.write_str(self.var),
            Node::Const(Constant::E) => f.write_str("e"),
            Node::Const(Constant::Pi) => f.write_str("pi"),
            Node::Neg(inner) => write!(f, "(-{})", sub(inner)),
            Node::Binary(op, l, r) => write!(f, "({} {} {})", sub(l), op.symbol(), sub(r)),
            Node::Call(func, arg) => write!(f, "{}({})", func.name(), sub(arg)),
        }
    }
}

/// Fully parenthesised; reparsing the output yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            var: &self.var,
        }
        .fmt(f)
    }
}
