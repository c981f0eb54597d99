//! Rule-language oracles: a naive per-cell interpreter and an independent
//! precedence-climbing parser, plus random expression generators.

use std::collections::HashMap;

use canopylab::rules::{CmpOp, RuleExpr};
use canopylab::stats::{STACK_BANDS, StatsStack};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

/// Evaluate an expression cell by cell with fresh name lookups.
/// Returns (bits, valid); a cell nodata in any referenced layer is invalid.
pub fn naive_eval(expr: &RuleExpr, stack: &StatsStack) -> (Vec<bool>, Vec<bool>) {
    let planes: HashMap<&str, &[f64]> = stack
        .multiband
        .band_names
        .iter()
        .map(|n| (n.as_str(), stack.band(n).unwrap()))
        .collect();
    let n = stack.multiband.spec.len();
    let mut bits = vec![false; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if stack.multiband.nodata[i] {
            continue;
        }
        bits[i] = walk(expr, &planes, i);
        valid[i] = true;
    }
    (bits, valid)
}

fn walk(expr: &RuleExpr, planes: &HashMap<&str, &[f64]>, i: usize) -> bool {
    match expr {
        RuleExpr::Cmp { layer, op, value } => {
            let v = planes[layer.as_str()][i];
            match op {
                CmpOp::Lt => v < *value,
                CmpOp::Le => v <= *value,
                CmpOp::Gt => v > *value,
                CmpOp::Ge => v >= *value,
                CmpOp::Eq => v == *value,
                CmpOp::Ne => v != *value,
            }
        }
        RuleExpr::And(a, b) => walk(a, planes, i) && walk(b, planes, i),
        RuleExpr::Or(a, b) => walk(a, planes, i) || walk(b, planes, i),
        RuleExpr::Not(a) => !walk(a, planes, i),
    }
}

const OPS: [(&str, CmpOp); 6] = [
    ("<", CmpOp::Lt),
    ("<=", CmpOp::Le),
    (">", CmpOp::Gt),
    (">=", CmpOp::Ge),
    ("==", CmpOp::Eq),
    ("!=", CmpOp::Ne),
];

/// Random expression tree of limited depth over the canonical layers.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> RuleExpr {
    if depth == 0 || rng.random_bool(0.35) {
        let layer = STACK_BANDS[rng.random_range(0..STACK_BANDS.len())].to_string();
        let (_, op) = OPS[rng.random_range(0..OPS.len())];
        let value = rng.random_range(-20..120) as f64 / 10.0;
        return RuleExpr::Cmp { layer, op, value };
    }
    match rng.random_range(0..3) {
        0 => RuleExpr::And(
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
        1 => RuleExpr::Or(
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
        _ => RuleExpr::Not(Box::new(random_expr(rng, depth - 1))),
    }
}

/// A flat, parenthesis-free expression string with random `!` prefixes.
pub fn random_flat_expr(rng: &mut ChaCha8Rng) -> String {
    let terms = rng.random_range(2..=6);
    let mut out = String::new();
    for t in 0..terms {
        if t > 0 {
            out.push_str(if rng.random_bool(0.5) { " && " } else { " || " });
        }
        for _ in 0..rng.random_range(0..=2) {
            out.push('!');
        }
        let layer = STACK_BANDS[rng.random_range(0..STACK_BANDS.len())];
        let (sym, _) = OPS[rng.random_range(0..OPS.len())];
        let value = rng.random_range(-50..150);
        out.push_str(&format!("{layer} {sym} {value}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Cmp(String, CmpOp, f64),
    And,
    Or,
    Not,
}

fn lex_flat(text: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("&&") {
            toks.push(Tok::And);
            rest = r.trim_start();
        } else if let Some(r) = rest.strip_prefix("||") {
            toks.push(Tok::Or);
            rest = r.trim_start();
        } else if let Some(r) = rest.strip_prefix('!') {
            toks.push(Tok::Not);
            rest = r.trim_start();
        } else {
            // layer op number, whitespace separated by construction
            let mut parts = rest.splitn(3, ' ');
            let layer = parts.next().unwrap().to_string();
            let sym = parts.next().unwrap();
            let tail = parts.next().unwrap();
            let num_end = tail
                .find(|c: char| !(c.is_ascii_digit() || c == '-' || c == '.'))
                .unwrap_or(tail.len());
            let value: f64 = tail[..num_end].parse().unwrap();
            let op = OPS.iter().find(|(s, _)| *s == sym).unwrap().1;
            toks.push(Tok::Cmp(layer, op, value));
            rest = tail[num_end..].trim_start();
        }
    }
    toks
}

/// Precedence climbing over the flat token stream: `!` then `&&` then `||`,
/// left-associative. Independent of the production recursive descent.
pub fn precedence_climb(text: &str) -> RuleExpr {
    let toks = lex_flat(text);
    let mut pos = 0;
    let expr = parse_or(&toks, &mut pos);
    assert_eq!(pos, toks.len(), "oracle consumed the whole input");
    expr
}

fn parse_or(toks: &[Tok], pos: &mut usize) -> RuleExpr {
    let mut node = parse_and(toks, pos);
    while toks.get(*pos) == Some(&Tok::Or) {
        *pos += 1;
        node = RuleExpr::Or(Box::new(node), Box::new(parse_and(toks, pos)));
    }
    node
}

fn parse_and(toks: &[Tok], pos: &mut usize) -> RuleExpr {
    let mut node = parse_not(toks, pos);
    while toks.get(*pos) == Some(&Tok::And) {
        *pos += 1;
        node = RuleExpr::And(Box::new(node), Box::new(parse_not(toks, pos)));
    }
    node
}

fn parse_not(toks: &[Tok], pos: &mut usize) -> RuleExpr {
    if toks.get(*pos) == Some(&Tok::Not) {
        *pos += 1;
        return RuleExpr::Not(Box::new(parse_not(toks, pos)));
    }
    match &toks[*pos] {
        Tok::Cmp(layer, op, value) => {
            *pos += 1;
            RuleExpr::Cmp {
                layer: layer.clone(),
                op: *op,
                value: *value,
            }
        }
        other => panic!("oracle expected a comparison, got {other:?}"),
    }
}

/// Random 13-band stack with scattered nodata, values in 0..10-ish ranges.
pub fn random_stack(rng: &mut ChaCha8Rng, width: usize, height: usize) -> StatsStack {
    use canopylab::raster::{GridSpec, MultibandRaster};
    let spec = GridSpec::new(0.0, height as f64, 1.0, width, height).unwrap();
    let n = spec.len();
    let planes: Vec<Vec<f64>> = (0..STACK_BANDS.len())
        .map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect())
        .collect();
    let nodata: Vec<bool> = (0..n).map(|_| rng.random_bool(0.15)).collect();
    let mb = MultibandRaster::new(
        spec,
        STACK_BANDS.iter().map(|s| s.to_string()).collect(),
        planes,
        nodata,
    )
    .unwrap();
    StatsStack::from_multiband(mb, 0.75).unwrap()
}
