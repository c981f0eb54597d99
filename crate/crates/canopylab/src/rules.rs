//! Boolean threshold rules over statistics layers.
//!
//! Grammar (usual precedence, `!` over `&&` over `||`, both left-associative):
//!
//! ```text
//! expr       := or
//! or         := and ("||" and)*
//! and        := unary ("&&" unary)*
//! unary      := "!" unary | "(" expr ")" | comparison
//! comparison := layer op number        op in < <= > >= == !=
//! layer      := quantity "." statistic | "count"
//! ```
//!
//! Layer names are checked against the statistics-stack vocabulary at parse
//! time. Evaluating a rule yields a binary mask; cells that are nodata in any
//! referenced layer come out invalid, never false.

use std::fmt;

use crate::error::{Error, Result};
use crate::parallel::map_rows;
use crate::raster::BinaryMask;
use crate::stats::{StatsStack, is_stack_band};

/// Comparison operators usable in a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Parsed rule expression.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleExpr {
    Cmp {
        layer: String,
        op: CmpOp,
        value: f64,
    },
    And(Box<RuleExpr>, Box<RuleExpr>),
    Or(Box<RuleExpr>, Box<RuleExpr>),
    Not(Box<RuleExpr>),
}

impl RuleExpr {
    /// Layer names referenced anywhere in the expression.
    pub fn layers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_layers(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_layers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            RuleExpr::Cmp { layer, .. } => out.push(layer),
            RuleExpr::And(a, b) | RuleExpr::Or(a, b) => {
                a.collect_layers(out);
                b.collect_layers(out);
            }
            RuleExpr::Not(a) => a.collect_layers(out),
        }
    }
}

/// Fully parenthesized printer; `parse_rule(expr.to_string())` reproduces the
/// expression exactly.
impl fmt::Display for RuleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleExpr::Cmp { layer, op, value } => {
                write!(f, "{layer} {} {value}", op.symbol())
            }
            RuleExpr::And(a, b) => write!(f, "({a} && {b})"),
            RuleExpr::Or(a, b) => write!(f, "({a} || {b})"),
            RuleExpr::Not(a) => write!(f, "!({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Layer(String),
    Number(f64),
    Op(CmpOp),
    AndAnd,
    OrOr,
    Bang,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, pos: usize, msg: impl Into<String>) -> Error {
        Error::RuleSyntax {
            pos,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Token)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let b = self.src[self.pos];
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.pos += 1;
                }
                b'(' => {
                    self.pos += 1;
                    out.push((start, Token::LParen));
                }
                b')' => {
                    self.pos += 1;
                    out.push((start, Token::RParen));
                }
                b'&' => {
                    if self.src.get(self.pos + 1) == Some(&b'&') {
                        self.pos += 2;
                        out.push((start, Token::AndAnd));
                    } else {
                        return Err(self.error(start, "expected `&&`"));
                    }
                }
                b'|' => {
                    if self.src.get(self.pos + 1) == Some(&b'|') {
                        self.pos += 2;
                        out.push((start, Token::OrOr));
                    } else {
                        return Err(self.error(start, "expected `||`"));
                    }
                }
                b'!' => {
                    if self.src.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        out.push((start, Token::Op(CmpOp::Ne)));
                    } else {
                        self.pos += 1;
                        out.push((start, Token::Bang));
                    }
                }
                b'<' => {
                    if self.src.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        out.push((start, Token::Op(CmpOp::Le)));
                    } else {
                        self.pos += 1;
                        out.push((start, Token::Op(CmpOp::Lt)));
                    }
                }
                b'>' => {
                    if self.src.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        out.push((start, Token::Op(CmpOp::Ge)));
                    } else {
                        self.pos += 1;
                        out.push((start, Token::Op(CmpOp::Gt)));
                    }
                }
                b'=' => {
                    if self.src.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        out.push((start, Token::Op(CmpOp::Eq)));
                    } else {
                        return Err(self.error(start, "expected `==`"));
                    }
                }
                _ if b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'+' => {
                    out.push((start, self.number()?));
                }
                _ if b.is_ascii_alphabetic() || b == b'_' => {
                    out.push((start, self.layer()?));
                }
                _ => {
                    return Err(self.error(start, format!("unexpected character `{}`", b as char)));
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<Token> {
        let start = self.pos;
        if matches!(self.src[self.pos], b'-' | b'+') {
            self.pos += 1;
        }
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || self.src[self.pos] == b'.'
                || self.src[self.pos] == b'e'
                || self.src[self.pos] == b'E'
                || ((self.src[self.pos] == b'-' || self.src[self.pos] == b'+')
                    && matches!(self.src[self.pos - 1], b'e' | b'E')))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(start, format!("bad number `{text}`")))?;
        Ok(Token::Number(value))
    }

    fn layer(&mut self) -> Result<Token> {
        let start = self.pos;
        let ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
        while self.pos < self.src.len() && ident(self.src[self.pos]) {
            self.pos += 1;
        }
        // Optional ".statistic" suffix.
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let tail = self.pos;
            while self.pos < self.src.len() && ident(self.src[self.pos]) {
                self.pos += 1;
            }
            if self.pos == tail {
                return Err(self.error(start, "layer name ends with a bare `.`"));
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string();
        if !is_stack_band(&name) {
            return Err(Error::UnknownLayer { name });
        }
        Ok(Token::Layer(name))
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::RuleSyntax {
            pos: self.here(),
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<RuleExpr> {
        let mut node = self.and()?;
        while self.peek() == Some(&Token::OrOr) {
            self.bump();
            let rhs = self.and()?;
            node = RuleExpr::Or(Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn and(&mut self) -> Result<RuleExpr> {
        let mut node = self.unary()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.bump();
            let rhs = self.unary()?;
            node = RuleExpr::And(Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn unary(&mut self) -> Result<RuleExpr> {
        match self.peek() {
            Some(Token::Bang) => {
                self.bump();
                Ok(RuleExpr::Not(Box::new(self.unary()?)))
            }
            Some(Token::LParen) => {
                self.bump();
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.bump();
                        Ok(inner)
                    }
                    _ => Err(self.error("expected `)`")),
                }
            }
            Some(Token::Layer(_)) => self.comparison(),
            _ => Err(self.error("expected `!`, `(`, or a layer name")),
        }
    }

    fn comparison(&mut self) -> Result<RuleExpr> {
        let layer = match self.peek() {
            Some(Token::Layer(name)) => name.clone(),
            _ => return Err(self.error("expected a layer name")),
        };
        self.bump();
        let op = match self.peek() {
            Some(Token::Op(op)) => *op,
            _ => return Err(self.error("expected a comparison operator")),
        };
        self.bump();
        let value = match self.peek() {
            Some(Token::Number(v)) => *v,
            _ => return Err(self.error("expected a number")),
        };
        self.bump();
        Ok(RuleExpr::Cmp { layer, op, value })
    }
}

/// Parse a rule string into its expression tree.
pub fn parse_rule(text: &str) -> Result<RuleExpr> {
    let tokens = Lexer::new(text).tokens()?;
    if tokens.is_empty() {
        return Err(Error::RuleSyntax {
            pos: 0,
            msg: "empty rule".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.error("trailing input after expression"));
    }
    Ok(expr)
}

/// The built-in tree rule: multi-return pulses with meter-scale elevation
/// spread. Thresholds are starting points, not fitted values.
pub fn default_tree_rule() -> RuleExpr {
    parse_rule("num_returns.max >= 2 && elevation.std >= 1.0").expect("built-in rule parses")
}

/// Evaluate a rule per cell over a statistics stack.
pub fn evaluate_rule(expr: &RuleExpr, stack: &StatsStack) -> Result<BinaryMask> {
    let bound = bind(expr, stack)?;
    let spec = stack.multiband.spec;
    let nodata = &stack.multiband.nodata;
    let rows = map_rows(spec.height, |row| {
        let mut bits = Vec::with_capacity(spec.width);
        let mut valid = Vec::with_capacity(spec.width);
        for col in 0..spec.width {
            let i = spec.index(row, col);
            if nodata[i] {
                bits.push(false);
                valid.push(false);
            } else {
                bits.push(eval_bound(&bound, i));
                valid.push(true);
            }
        }
        (bits, valid)
    });
    let mut bits = Vec::with_capacity(spec.len());
    let mut valid = Vec::with_capacity(spec.len());
    for (b, v) in rows {
        bits.extend(b);
        valid.extend(v);
    }
    BinaryMask::new(spec, bits, valid)
}

/// Expression with layer names resolved to band planes.
enum Bound<'a> {
    Cmp {
        plane: &'a [f64],
        op: CmpOp,
        value: f64,
    },
    And(Box<Bound<'a>>, Box<Bound<'a>>),
    Or(Box<Bound<'a>>, Box<Bound<'a>>),
    Not(Box<Bound<'a>>),
}

fn bind<'a>(expr: &RuleExpr, stack: &'a StatsStack) -> Result<Bound<'a>> {
    match expr {
        RuleExpr::Cmp { layer, op, value } => {
            let plane = stack.band(layer).ok_or_else(|| Error::UnknownLayer {
                name: layer.clone(),
            })?;
            Ok(Bound::Cmp {
                plane,
                op: *op,
                value: *value,
            })
        }
        RuleExpr::And(a, b) => Ok(Bound::And(
            Box::new(bind(a, stack)?),
            Box::new(bind(b, stack)?),
        )),
        RuleExpr::Or(a, b) => Ok(Bound::Or(
            Box::new(bind(a, stack)?),
            Box::new(bind(b, stack)?),
        )),
        RuleExpr::Not(a) => Ok(Bound::Not(Box::new(bind(a, stack)?))),
    }
}

fn eval_bound(b: &Bound<'_>, i: usize) -> bool {
    match b {
        Bound::Cmp { plane, op, value } => op.apply(plane[i], *value),
        Bound::And(x, y) => eval_bound(x, i) && eval_bound(y, i),
        Bound::Or(x, y) => eval_bound(x, i) || eval_bound(y, i),
        Bound::Not(x) => !eval_bound(x, i),
    }
}
