//! Potential expression language.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 't' | name | name '(' args ')' | '(' expr ')'
//! cond  := expr ('<' | '<=' | '>' | '>=') expr        (only inside case)
//! ```
//!
//! `case(c1, e1, c2, e2, …, default)` picks the first branch whose condition
//! holds. Evaluation never panics: division by zero, logarithms or square
//! roots of negative arguments and unbound parameters produce NaN, which
//! [`crate::potential::PotentialSpec`] rejects during validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at position {position}: expected {}, found {found}", expected.join(" | "))]
    Parse { position: usize, expected: Vec<String>, found: String },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Coth,
    Pow,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "log" | "ln" => Func::Log,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "coth" => Func::Coth,
            "pow" => Func::Pow,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Pow => n == 2,
            Func::Min | Func::Max => n >= 1,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub lhs: Node,
    pub op: CmpOp,
    pub rhs: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Param(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Case(Vec<(Cond, Node)>, Box<Node>),
}

/// A parsed expression in the variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

pub fn parse_expression(src: &str) -> Result<Expr, ExprError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let root = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(p.error_at(tok.pos, &["operator", "end of input"], &tok.kind.to_string()));
    }
    Ok(Expr { source: src.trim().to_string(), root })
}

impl Expr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_params(&self.root, &mut out);
        out
    }

    /// Substitutes parameter values; fails on any parameter left unbound.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<Expr, ExprError> {
        let root = substitute(&self.root, params);
        let mut left = BTreeSet::new();
        collect_params(&root, &mut left);
        if let Some(name) = left.into_iter().next() {
            return Err(ExprError::UnboundParameter(name));
        }
        Ok(Expr { source: self.source.clone(), root })
    }

    pub fn eval<T: Real>(&self, t: T) -> T {
        eval_node(&self.root, t)
    }

    /// Abscissae where a `case` condition compares `t` against a constant.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        collect_breaks(&self.root, &mut out);
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        out.dedup();
        out
    }

    pub fn is_constant(&self) -> bool {
        !mentions_var(&self.root)
    }

    /// `self op other` as a new tree, keeping both operands' structure.
    pub fn combine(&self, op: BinOp, other: &Expr) -> Expr {
        let sym = match op {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        };
        Expr {
            source: format!("({}) {sym} ({})", self.source, other.source),
            root: Node::Bin(op, Box::new(self.root.clone()), Box::new(other.root.clone())),
        }
    }

    pub fn constant(v: f64) -> Expr {
        Expr { source: format!("{v}"), root: Node::Num(v) }
    }
}

fn collect_params(n: &Node, out: &mut BTreeSet<String>) {
    match n {
        Node::Param(p) => {
            out.insert(p.clone());
        }
        Node::Num(_) | Node::Var => {}
        Node::Neg(a) => collect_params(a, out),
        Node::Bin(_, a, b) => {
            collect_params(a, out);
            collect_params(b, out);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_params(a, out)),
        Node::Case(branches, default) => {
            for (c, e) in branches {
                collect_params(&c.lhs, out);
                collect_params(&c.rhs, out);
                collect_params(e, out);
            }
            collect_params(default, out);
        }
    }
}

fn substitute(n: &Node, params: &BTreeMap<String, f64>) -> Node {
    match n {
        Node::Param(p) => match params.get(p) {
            Some(v) => Node::Num(*v),
            None => match p.as_str() {
                "pi" => Node::Num(std::f64::consts::PI),
                "e" => Node::Num(std::f64::consts::E),
                _ => n.clone(),
            },
        },
        Node::Num(_) | Node::Var => n.clone(),
        Node::Neg(a) => Node::Neg(Box::new(substitute(a, params))),
        Node::Bin(op, a, b) => Node::Bin(*op, Box::new(substitute(a, params)), Box::new(substitute(b, params))),
        Node::Call(f, args) => Node::Call(*f, args.iter().map(|a| substitute(a, params)).collect()),
        Node::Case(branches, default) => Node::Case(
            branches
                .iter()
                .map(|(c, e)| {
                    (
                        Cond { lhs: substitute(&c.lhs, params), op: c.op, rhs: substitute(&c.rhs, params) },
                        substitute(e, params),
                    )
                })
                .collect(),
            Box::new(substitute(default, params)),
        ),
    }
}

fn mentions_var(n: &Node) -> bool {
    match n {
        Node::Var => true,
        Node::Num(_) | Node::Param(_) => false,
        Node::Neg(a) => mentions_var(a),
        Node::Bin(_, a, b) => mentions_var(a) || mentions_var(b),
        Node::Call(_, args) => args.iter().any(mentions_var),
        Node::Case(branches, default) => {
            branches.iter().any(|(c, e)| mentions_var(&c.lhs) || mentions_var(&c.rhs) || mentions_var(e))
                || mentions_var(default)
        }
    }
}

fn collect_breaks(n: &Node, out: &mut Vec<f64>) {
    match n {
        Node::Num(_) | Node::Var | Node::Param(_) => {}
        Node::Neg(a) => collect_breaks(a, out),
        Node::Bin(_, a, b) => {
            collect_breaks(a, out);
            collect_breaks(b, out);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_breaks(a, out)),
        Node::Case(branches, default) => {
            for (c, e) in branches {
                let side = match (&c.lhs, &c.rhs) {
                    (Node::Var, other) | (other, Node::Var) if !mentions_var(other) => Some(other),
                    _ => None,
                };
                if let Some(other) = side {
                    let v: f64 = eval_node(other, 0.0_f64);
                    if v.is_finite() {
                        out.push(v);
                    }
                }
                collect_breaks(e, out);
            }
            collect_breaks(default, out);
        }
    }
}

pub(crate) fn eval_cond<T: Real>(c: &Cond, t: T) -> bool {
    let (a, b) = (eval_node(&c.lhs, t), eval_node(&c.rhs, t));
    match c.op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

fn eval_node<T: Real>(n: &Node, t: T) -> T {
    match n {
        Node::Num(v) => lit(*v),
        Node::Var => t,
        Node::Param(_) => T::nan(),
        Node::Neg(a) => -eval_node(a, t),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval_node(a, t), eval_node(b, t));
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == T::zero() {
                        T::nan()
                    } else {
                        x / y
                    }
                }
                BinOp::Pow => power(x, y),
            }
        }
        Node::Call(f, args) => {
            let x = eval_node(&args[0], t);
            match f {
                Func::Log => {
                    if x > T::zero() {
                        x.ln()
                    } else {
                        T::nan()
                    }
                }
                Func::Exp => x.exp(),
                Func::Sqrt => {
                    if x >= T::zero() {
                        x.sqrt()
                    } else {
                        T::nan()
                    }
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Coth => {
                    if x == T::zero() {
                        T::nan()
                    } else {
                        T::one() / x.tanh()
                    }
                }
                Func::Pow => power(x, eval_node(&args[1], t)),
                Func::Abs => x.abs(),
                Func::Min => args[1..].iter().fold(x, |m, a| m.min(eval_node(a, t))),
                Func::Max => args[1..].iter().fold(x, |m, a| m.max(eval_node(a, t))),
            }
        }
        Node::Case(branches, default) => {
            for (c, e) in branches {
                if eval_cond(c, t) {
                    return eval_node(e, t);
                }
            }
            eval_node(default, t)
        }
    }
}

pub(crate) fn power<T: Real>(x: T, y: T) -> T {
    if y == y.round() && y.abs() <= lit(64.0) {
        if x == T::zero() && y < T::zero() {
            return T::nan();
        }
        return x.powi(y.to_i32().expect("small integer exponent"));
    }
    if x < T::zero() || (x == T::zero() && y < T::zero()) {
        return T::nan();
    }
    x.powf(y)
}

// ---------------------------------------------------------------------------
// lexer / parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Cmp(CmpOp),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::Cmp(c) => write!(
                f,
                "`{}`",
                match c {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                }
            ),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
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
            let v: f64 = text.parse().map_err(|_| ExprError::Parse {
                position: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push(Token { kind: Tok::Num(v), pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: Tok::Ident(src[start..i].to_string()), pos: start });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '<' | '>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                Tok::Cmp(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            _ => {
                return Err(ExprError::Parse {
                    position: start,
                    expected: vec!["number".into(), "name".into(), "operator".into()],
                    found: format!("`{c}`"),
                })
            }
        };
        i += 1;
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_pos(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.pos + 1)
    }

    fn error_at(&self, position: usize, expected: &[&str], found: &str) -> ExprError {
        ExprError::Parse { position, expected: expected.iter().map(|s| s.to_string()).collect(), found: found.into() }
    }

    fn error_here(&self, expected: &[&str]) -> ExprError {
        match self.peek() {
            Some(t) => self.error_at(t.pos, expected, &t.kind.to_string()),
            None => self.error_at(self.end_pos(), expected, "end of input"),
        }
    }

    fn eat(&mut self, kind: &Tok) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: Tok, label: &str) -> Result<(), ExprError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error_here(&[label]))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(Tok::Op('+')) => BinOp::Add,
                Some(Tok::Op('-')) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(Tok::Op('*')) => BinOp::Mul,
                Some(Tok::Op('/')) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(&Tok::Op('-')) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Op('+')) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(&Tok::Op('^')) {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        const ATOM: &[&str] = &["number", "`t`", "name", "function call", "`(`"];
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here(ATOM));
        };
        match tok.kind {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.peek().is_some_and(|t| t.kind == Tok::LParen) {
                    self.pos += 1;
                    return self.call(&name, tok.pos);
                }
                Ok(if name == "t" { Node::Var } else { Node::Param(name) })
            }
            _ => Err(self.error_here(ATOM)),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node, ExprError> {
        if name == "case" {
            return self.case();
        }
        let Some(func) = Func::from_name(name) else {
            return Err(self.error_at(
                at,
                &["log", "exp", "sqrt", "sin", "cos", "sinh", "cosh", "tanh", "coth", "pow", "abs", "min", "max", "case"],
                &format!("`{name}`"),
            ));
        };
        let mut args = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        if !func.arity_ok(args.len()) {
            return Err(self.error_at(at, &["different number of arguments"], &format!("{} arguments", args.len())));
        }
        Ok(Node::Call(func, args))
    }

    fn case(&mut self) -> Result<Node, ExprError> {
        let mut branches = Vec::new();
        loop {
            let first = self.expr()?;
            let cmp = match self.peek().map(|t| &t.kind) {
                Some(Tok::Cmp(c)) => Some(*c),
                _ => None,
            };
            match cmp {
                Some(op) => {
                    self.pos += 1;
                    let rhs = self.expr()?;
                    self.expect(Tok::Comma, "`,` after case condition")?;
                    let value = self.expr()?;
                    branches.push((Cond { lhs: first, op, rhs }, value));
                    if !self.eat(&Tok::Comma) {
                        return Err(self.error_here(&["`,` followed by default value"]));
                    }
                }
                None => {
                    if branches.is_empty() {
                        return Err(self.error_here(&["comparison (`<`, `<=`, `>`, `>=`)"]));
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Node::Case(branches, Box::new(first)));
                }
            }
        }
    }
}
