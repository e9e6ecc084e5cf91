//! Sensor conditions and capability conditions: the guard language of
//! strategies, control rules, and testing goals.
//!
//! Sensor conditions are Boolean formulas over linear comparisons of sensor
//! readings (`LIT101 < 600 and FIT201 >= 1`). Capability conditions constrain
//! which capability set a transition may use; `_` stands for the set being
//! used, upper-case identifiers are globally scoped variables, and set
//! literals are written `{[MV101,open],[P101,on]}`.
//!
//! Shorthand forms normalise at parse time:
//! `c in E` becomes `{c} <= E`, `c notin E` becomes `not ({c} <= E)`,
//! `E1 != E2` becomes `not (E1 == E2)`, and a bare set literal `Y` becomes
//! `_ == Y`.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::capability::{Capability, CapabilitySet, CumulativeSet};
use crate::component::{ComponentId, Readings};

fn fmt_cap_collection(set: &CumulativeSet, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{{")?;
    for (i, c) in set.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{c}")?;
    }
    write!(f, "}}")
}

/// Global variable binding for one whole test: each variable is frozen to the
/// first capability set it is used with.
pub type Assignment = BTreeMap<String, CapabilitySet>;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum CondError {
    #[error("unknown sensor `{0}`")]
    UnknownSensor(ComponentId),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        };
        f.write_str(s)
    }
}

/// Boolean formula over linear comparisons of sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorCondition {
    True,
    Cmp { sensor: ComponentId, op: CmpOp, value: f64 },
    And(Box<SensorCondition>, Box<SensorCondition>),
    Or(Box<SensorCondition>, Box<SensorCondition>),
    Not(Box<SensorCondition>),
}

impl SensorCondition {
    pub fn cmp(sensor: impl Into<ComponentId>, op: CmpOp, value: f64) -> Self {
        SensorCondition::Cmp { sensor: sensor.into(), op, value }
    }

    pub fn and(self, other: SensorCondition) -> Self {
        SensorCondition::And(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, readings: &Readings) -> Result<bool, CondError> {
        match self {
            SensorCondition::True => Ok(true),
            SensorCondition::Cmp { sensor, op, value } => {
                let reading = readings
                    .get(sensor)
                    .ok_or_else(|| CondError::UnknownSensor(sensor.clone()))?;
                Ok(op.eval(reading, *value))
            }
            SensorCondition::And(a, b) => Ok(a.eval(readings)? && b.eval(readings)?),
            SensorCondition::Or(a, b) => Ok(a.eval(readings)? || b.eval(readings)?),
            SensorCondition::Not(a) => Ok(!a.eval(readings)?),
        }
    }

    /// Every sensor mentioned anywhere in the formula.
    pub fn sensors(&self) -> BTreeSet<ComponentId> {
        let mut out = BTreeSet::new();
        self.collect_sensors(&mut out);
        out
    }

    fn collect_sensors(&self, out: &mut BTreeSet<ComponentId>) {
        match self {
            SensorCondition::True => {}
            SensorCondition::Cmp { sensor, .. } => {
                out.insert(sensor.clone());
            }
            SensorCondition::And(a, b) | SensorCondition::Or(a, b) => {
                a.collect_sensors(out);
                b.collect_sensors(out);
            }
            SensorCondition::Not(a) => a.collect_sensors(out),
        }
    }

    /// Comparison constants per sensor, for range validation against a model.
    pub fn comparisons(&self) -> Vec<(ComponentId, f64)> {
        let mut out = Vec::new();
        self.collect_cmps(&mut out);
        out
    }

    fn collect_cmps(&self, out: &mut Vec<(ComponentId, f64)>) {
        match self {
            SensorCondition::True => {}
            SensorCondition::Cmp { sensor, value, .. } => out.push((sensor.clone(), *value)),
            SensorCondition::And(a, b) | SensorCondition::Or(a, b) => {
                a.collect_cmps(out);
                b.collect_cmps(out);
            }
            SensorCondition::Not(a) => a.collect_cmps(out),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let prec = match self {
            SensorCondition::Or(..) => 1,
            SensorCondition::And(..) => 2,
            _ => 3,
        };
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            SensorCondition::True => write!(f, "true")?,
            SensorCondition::Cmp { sensor, op, value } => write!(f, "{sensor} {op} {value}")?,
            SensorCondition::And(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " and ")?;
                b.fmt_prec(f, 2)?;
            }
            SensorCondition::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " or ")?;
                b.fmt_prec(f, 1)?;
            }
            SensorCondition::Not(a) => {
                write!(f, "not ")?;
                a.fmt_prec(f, 3)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for SensorCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A set-valued expression inside a capability condition. Literals are plain
/// capability collections: unlike a set used in a step, a literal may mention
/// several values of one component (useful when comparing against the
/// cumulative set of a whole history).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetExpr {
    /// The `_` placeholder for the capability set being used this step.
    Used,
    Var(String),
    Lit(CumulativeSet),
}

impl SetExpr {
    fn eval<'a>(
        &'a self,
        used: &'a CumulativeSet,
        alpha: &'a Assignment,
    ) -> Result<&'a CumulativeSet, CondError> {
        match self {
            SetExpr::Used => Ok(used),
            SetExpr::Var(name) => alpha
                .get(name)
                .map(|s| s.as_set())
                .ok_or_else(|| CondError::UnboundVariable(name.clone())),
            SetExpr::Lit(set) => Ok(set),
        }
    }
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Used => write!(f, "_"),
            SetExpr::Var(v) => write!(f, "{v}"),
            SetExpr::Lit(set) => fmt_cap_collection(set, f),
        }
    }
}

/// Boolean formula constraining the capability set used by a transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapCondition {
    True,
    Subset(SetExpr, SetExpr),
    Eq(SetExpr, SetExpr),
    And(Box<CapCondition>, Box<CapCondition>),
    Or(Box<CapCondition>, Box<CapCondition>),
    Not(Box<CapCondition>),
}

impl CapCondition {
    /// `_ == Y`
    pub fn exactly(set: CapabilitySet) -> Self {
        CapCondition::Eq(SetExpr::Used, SetExpr::Lit(set.into_inner()))
    }

    /// `_ == Y` for a plain capability collection.
    pub fn pinned(set: CumulativeSet) -> Self {
        CapCondition::Eq(SetExpr::Used, SetExpr::Lit(set))
    }

    /// `cap in _`
    pub fn includes(cap: Capability) -> Self {
        CapCondition::Subset(SetExpr::Lit(CumulativeSet::from([cap])), SetExpr::Used)
    }

    /// `cap notin _`
    pub fn excludes(cap: Capability) -> Self {
        CapCondition::Not(Box::new(CapCondition::includes(cap)))
    }

    pub fn and(self, other: CapCondition) -> Self {
        CapCondition::And(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, used: &CapabilitySet, alpha: &Assignment) -> Result<bool, CondError> {
        self.eval_raw(used.as_set(), alpha)
    }

    /// Evaluation against a plain capability collection; lets analyses ask
    /// hypothetical questions about sets that no single step could use.
    pub fn eval_raw(&self, used: &CumulativeSet, alpha: &Assignment) -> Result<bool, CondError> {
        match self {
            CapCondition::True => Ok(true),
            CapCondition::Subset(a, b) => Ok(a.eval(used, alpha)?.is_subset(b.eval(used, alpha)?)),
            CapCondition::Eq(a, b) => Ok(a.eval(used, alpha)? == b.eval(used, alpha)?),
            CapCondition::And(a, b) => Ok(a.eval_raw(used, alpha)? && b.eval_raw(used, alpha)?),
            CapCondition::Or(a, b) => Ok(a.eval_raw(used, alpha)? || b.eval_raw(used, alpha)?),
            CapCondition::Not(a) => Ok(!a.eval_raw(used, alpha)?),
        }
    }

    /// Evaluates with the freeze-on-first-use rule: variables not yet bound in
    /// `alpha` are tentatively bound to `used`. Returns the verdict along with
    /// the tentative bindings, which the caller commits only when the
    /// transition actually fires.
    pub fn eval_binding(
        &self,
        used: &CapabilitySet,
        alpha: &Assignment,
    ) -> Result<(bool, Vec<(String, CapabilitySet)>), CondError> {
        let mut fresh = Vec::new();
        let mut extended = alpha.clone();
        for var in self.variables() {
            if !extended.contains_key(&var) {
                extended.insert(var.clone(), used.clone());
                fresh.push((var, used.clone()));
            }
        }
        let ok = self.eval(used, &extended)?;
        Ok((ok, fresh))
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        let expr = |e: &SetExpr, out: &mut BTreeSet<String>| {
            if let SetExpr::Var(v) = e {
                out.insert(v.clone());
            }
        };
        match self {
            CapCondition::True => {}
            CapCondition::Subset(a, b) | CapCondition::Eq(a, b) => {
                expr(a, out);
                expr(b, out);
            }
            CapCondition::And(a, b) | CapCondition::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            CapCondition::Not(a) => a.collect_vars(out),
        }
    }

    /// Every capability mentioned in a set literal.
    pub fn literal_capabilities(&self) -> BTreeSet<Capability> {
        let mut out = BTreeSet::new();
        self.collect_caps(&mut out);
        out
    }

    fn collect_caps(&self, out: &mut BTreeSet<Capability>) {
        let expr = |e: &SetExpr, out: &mut BTreeSet<Capability>| {
            if let SetExpr::Lit(set) = e {
                out.extend(set.iter().cloned());
            }
        };
        match self {
            CapCondition::True => {}
            CapCondition::Subset(a, b) | CapCondition::Eq(a, b) => {
                expr(a, out);
                expr(b, out);
            }
            CapCondition::And(a, b) | CapCondition::Or(a, b) => {
                a.collect_caps(out);
                b.collect_caps(out);
            }
            CapCondition::Not(a) => a.collect_caps(out),
        }
    }

    /// Renames a variable everywhere it occurs.
    pub fn rename_var(&mut self, from: &str, to: &str) {
        let rn = |e: &mut SetExpr| {
            if let SetExpr::Var(v) = e {
                if v == from {
                    *v = to.to_string();
                }
            }
        };
        match self {
            CapCondition::True => {}
            CapCondition::Subset(a, b) | CapCondition::Eq(a, b) => {
                rn(a);
                rn(b);
            }
            CapCondition::And(a, b) | CapCondition::Or(a, b) => {
                a.rename_var(from, to);
                b.rename_var(from, to);
            }
            CapCondition::Not(a) => a.rename_var(from, to),
        }
    }

    /// `Some(set)` when the condition is the literal pin `_ == Y` (or `Y == _`).
    pub fn as_literal_pin(&self) -> Option<&CumulativeSet> {
        match self {
            CapCondition::Eq(SetExpr::Used, SetExpr::Lit(y))
            | CapCondition::Eq(SetExpr::Lit(y), SetExpr::Used) => Some(y),
            _ => None,
        }
    }

    /// True when the empty set satisfies the condition with no variable
    /// bindings, i.e. a "do nothing" step is admitted.
    pub fn admits_empty(&self) -> bool {
        matches!(
            self.eval_binding(&CapabilitySet::empty(), &Assignment::new()),
            Ok((true, _))
        )
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        // `cap in E` / `cap notin E` sugar for singleton subset atoms
        if let CapCondition::Subset(SetExpr::Lit(set), rhs) = self {
            if set.len() == 1 {
                let cap = set.iter().next().unwrap();
                return write!(f, "{cap} in {rhs}");
            }
        }
        if let CapCondition::Not(inner) = self {
            if let CapCondition::Subset(SetExpr::Lit(set), rhs) = inner.as_ref() {
                if set.len() == 1 {
                    let cap = set.iter().next().unwrap();
                    return write!(f, "{cap} notin {rhs}");
                }
            }
        }
        let prec = match self {
            CapCondition::Or(..) => 1,
            CapCondition::And(..) => 2,
            _ => 3,
        };
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            CapCondition::True => write!(f, "true")?,
            CapCondition::Subset(a, b) => write!(f, "{a} <= {b}")?,
            CapCondition::Eq(a, b) => write!(f, "{a} == {b}")?,
            CapCondition::And(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " and ")?;
                b.fmt_prec(f, 2)?;
            }
            CapCondition::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " or ")?;
                b.fmt_prec(f, 1)?;
            }
            CapCondition::Not(a) => {
                write!(f, "not ")?;
                match a.as_ref() {
                    CapCondition::True | CapCondition::Not(_) => a.fmt_prec(f, 3)?,
                    _ => {
                        write!(f, "(")?;
                        a.fmt_prec(f, 0)?;
                        write!(f, ")")?;
                    }
                }
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for CapCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse failure with the byte offset into the source expression.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{msg} at offset {offset} in `{src}`")]
pub struct ParseError {
    pub msg: String,
    pub offset: usize,
    pub src: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Underscore,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    KwTrue,
    KwAnd,
    KwOr,
    KwNot,
    KwIn,
    KwNotin,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn lex(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0, toks: Vec::new() };
        lx.run()?;
        Ok(lx.toks)
    }

    fn err(&self, msg: impl Into<String>, offset: usize) -> ParseError {
        ParseError { msg: msg.into(), offset, src: self.src.to_string() }
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() {
            let start = self.pos;
            let c = bytes[self.pos] as char;
            match c {
                ' ' | '\t' | '\n' | '\r' => {
                    self.pos += 1;
                }
                '(' => self.push(Tok::LParen, start),
                ')' => self.push(Tok::RParen, start),
                '[' => self.push(Tok::LBracket, start),
                ']' => self.push(Tok::RBracket, start),
                '{' => self.push(Tok::LBrace, start),
                '}' => self.push(Tok::RBrace, start),
                ',' => self.push(Tok::Comma, start),
                '_' => self.push(Tok::Underscore, start),
                '<' => {
                    if bytes.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        self.toks.push((Tok::Le, start));
                    } else {
                        self.push(Tok::Lt, start);
                    }
                }
                '>' => {
                    if bytes.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        self.toks.push((Tok::Ge, start));
                    } else {
                        self.push(Tok::Gt, start);
                    }
                }
                '=' => {
                    if bytes.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                    } else {
                        self.pos += 1;
                    }
                    self.toks.push((Tok::EqEq, start));
                }
                '!' => {
                    if bytes.get(self.pos + 1) == Some(&b'=') {
                        self.pos += 2;
                        self.toks.push((Tok::Ne, start));
                    } else {
                        return Err(self.err("expected `!=`", start));
                    }
                }
                c if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let mut end = self.pos + 1;
                    while end < bytes.len()
                        && ((bytes[end] as char).is_ascii_digit() || bytes[end] == b'.')
                    {
                        end += 1;
                    }
                    let text = &self.src[self.pos..end];
                    let n: f64 = text
                        .parse()
                        .map_err(|_| self.err(format!("bad number `{text}`"), start))?;
                    self.pos = end;
                    self.toks.push((Tok::Number(n), start));
                }
                c if c.is_ascii_alphabetic() => {
                    let mut end = self.pos + 1;
                    while end < bytes.len()
                        && ((bytes[end] as char).is_ascii_alphanumeric() || bytes[end] == b'_')
                    {
                        end += 1;
                    }
                    let word = &self.src[self.pos..end];
                    self.pos = end;
                    let tok = match word {
                        "true" => Tok::KwTrue,
                        "and" => Tok::KwAnd,
                        "or" => Tok::KwOr,
                        "not" => Tok::KwNot,
                        "in" => Tok::KwIn,
                        "notin" => Tok::KwNotin,
                        _ => Tok::Ident(word.to_string()),
                    };
                    self.toks.push((tok, start));
                }
                other => return Err(self.err(format!("unexpected character `{other}`"), start)),
            }
        }
        Ok(())
    }

    fn push(&mut self, t: Tok, start: usize) {
        self.pos += 1;
        self.toks.push((t, start));
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Parser { src, toks: Lexer::lex(src)?, idx: 0 })
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let offset = self
            .toks
            .get(self.idx)
            .map(|(_, o)| *o)
            .unwrap_or(self.src.len());
        ParseError { msg: msg.into(), offset, src: self.src.to_string() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let before = self.idx;
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => {
                self.idx = before;
                Err(self.err_here(format!("expected {what}")))
            }
        }
    }

    fn at_end(&self) -> bool {
        self.idx >= self.toks.len()
    }

    // -- sensor conditions --------------------------------------------------

    fn sensor_or(&mut self) -> Result<SensorCondition, ParseError> {
        let mut lhs = self.sensor_and()?;
        while self.peek() == Some(&Tok::KwOr) {
            self.next();
            let rhs = self.sensor_and()?;
            lhs = SensorCondition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn sensor_and(&mut self) -> Result<SensorCondition, ParseError> {
        let mut lhs = self.sensor_unary()?;
        while self.peek() == Some(&Tok::KwAnd) {
            self.next();
            let rhs = self.sensor_unary()?;
            lhs = SensorCondition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn sensor_unary(&mut self) -> Result<SensorCondition, ParseError> {
        match self.peek() {
            Some(Tok::KwNot) => {
                self.next();
                Ok(SensorCondition::Not(Box::new(self.sensor_unary()?)))
            }
            Some(Tok::LParen) => {
                self.next();
                let inner = self.sensor_or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::KwTrue) => {
                self.next();
                Ok(SensorCondition::True)
            }
            Some(Tok::Ident(_)) => {
                let name = match self.next() {
                    Some(Tok::Ident(n)) => n,
                    _ => unreachable!(),
                };
                let before = self.idx;
                let op = match self.next() {
                    Some(Tok::Lt) => CmpOp::Lt,
                    Some(Tok::Le) => CmpOp::Le,
                    Some(Tok::EqEq) => CmpOp::Eq,
                    Some(Tok::Ge) => CmpOp::Ge,
                    Some(Tok::Gt) => CmpOp::Gt,
                    _ => {
                        self.idx = before;
                        return Err(self.err_here("expected comparison operator"));
                    }
                };
                let before = self.idx;
                let value = match self.next() {
                    Some(Tok::Number(n)) => n,
                    _ => {
                        self.idx = before;
                        return Err(self.err_here("expected numeric constant"));
                    }
                };
                Ok(SensorCondition::Cmp { sensor: ComponentId::new(name), op, value })
            }
            _ => Err(self.err_here("expected sensor condition")),
        }
    }

    // -- capability conditions ----------------------------------------------

    fn cap_or(&mut self) -> Result<CapCondition, ParseError> {
        let mut lhs = self.cap_and()?;
        while self.peek() == Some(&Tok::KwOr) {
            self.next();
            let rhs = self.cap_and()?;
            lhs = CapCondition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cap_and(&mut self) -> Result<CapCondition, ParseError> {
        let mut lhs = self.cap_unary()?;
        while self.peek() == Some(&Tok::KwAnd) {
            self.next();
            let rhs = self.cap_unary()?;
            lhs = CapCondition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cap_unary(&mut self) -> Result<CapCondition, ParseError> {
        match self.peek() {
            Some(Tok::KwNot) => {
                self.next();
                Ok(CapCondition::Not(Box::new(self.cap_unary()?)))
            }
            Some(Tok::LParen) => {
                self.next();
                let inner = self.cap_or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::KwTrue) => {
                self.next();
                Ok(CapCondition::True)
            }
            Some(Tok::LBracket) => {
                // single capability shorthand: `[c,v] in E` / `[c,v] notin E`
                let cap = self.capability()?;
                let before = self.idx;
                match self.next() {
                    Some(Tok::KwIn) => {
                        let rhs = self.set_expr()?;
                        Ok(CapCondition::Subset(
                            SetExpr::Lit(CumulativeSet::from([cap.clone()])),
                            rhs,
                        ))
                    }
                    Some(Tok::KwNotin) => {
                        let rhs = self.set_expr()?;
                        Ok(CapCondition::Not(Box::new(CapCondition::Subset(
                            SetExpr::Lit(CumulativeSet::from([cap])),
                            rhs,
                        ))))
                    }
                    _ => {
                        self.idx = before;
                        Err(self.err_here("expected `in` or `notin` after capability"))
                    }
                }
            }
            _ => {
                let lhs = self.set_expr()?;
                match self.peek() {
                    Some(Tok::EqEq) => {
                        self.next();
                        let rhs = self.set_expr()?;
                        Ok(CapCondition::Eq(lhs, rhs))
                    }
                    Some(Tok::Ne) => {
                        self.next();
                        let rhs = self.set_expr()?;
                        Ok(CapCondition::Not(Box::new(CapCondition::Eq(lhs, rhs))))
                    }
                    Some(Tok::Le) => {
                        self.next();
                        let rhs = self.set_expr()?;
                        Ok(CapCondition::Subset(lhs, rhs))
                    }
                    _ => match lhs {
                        // a bare set literal abbreviates `_ == Y`
                        SetExpr::Lit(set) => Ok(CapCondition::pinned(set)),
                        _ => Err(self.err_here("expected `==`, `!=` or `<=`")),
                    },
                }
            }
        }
    }

    fn set_expr(&mut self) -> Result<SetExpr, ParseError> {
        match self.peek() {
            Some(Tok::Underscore) => {
                self.next();
                Ok(SetExpr::Used)
            }
            Some(Tok::Ident(_)) => {
                let name = match self.next() {
                    Some(Tok::Ident(n)) => n,
                    _ => unreachable!(),
                };
                Ok(SetExpr::Var(name))
            }
            Some(Tok::LBrace) => {
                self.next();
                let mut caps = Vec::new();
                if self.peek() == Some(&Tok::RBrace) {
                    self.next();
                    return Ok(SetExpr::Lit(CumulativeSet::new()));
                }
                loop {
                    caps.push(self.capability()?);
                    let before = self.idx;
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBrace) => break,
                        _ => {
                            self.idx = before;
                            return Err(self.err_here("expected `,` or `}` in set literal"));
                        }
                    }
                }
                Ok(SetExpr::Lit(caps.into_iter().collect()))
            }
            _ => Err(self.err_here("expected `_`, variable, or set literal")),
        }
    }

    fn capability(&mut self) -> Result<Capability, ParseError> {
        self.expect(Tok::LBracket, "`[`")?;
        let before = self.idx;
        let name = match self.next() {
            Some(Tok::Ident(n)) => n,
            _ => {
                self.idx = before;
                return Err(self.err_here("expected component name"));
            }
        };
        self.expect(Tok::Comma, "`,`")?;
        let before = self.idx;
        let cap = match self.next() {
            Some(Tok::Ident(word)) => {
                let value = word
                    .parse()
                    .map_err(|e: String| self.err_here(e))?;
                Capability::force(name.as_str(), value)
            }
            Some(Tok::Number(n)) => Capability::spoof(name.as_str(), n),
            _ => {
                self.idx = before;
                return Err(self.err_here("expected actuator state or spoof value"));
            }
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok(cap)
    }
}

/// Parses a sensor condition such as `LIT101 >= 250 and LIT101 <= 1100`.
pub fn parse_sensor_condition(src: &str) -> Result<SensorCondition, ParseError> {
    let mut p = Parser::new(src)?;
    let cond = p.sensor_or()?;
    if !p.at_end() {
        return Err(p.err_here("trailing input after condition"));
    }
    Ok(cond)
}

/// Parses a capability condition such as `[MV101,open] in _ and X == _`.
pub fn parse_cap_condition(src: &str) -> Result<CapCondition, ParseError> {
    let mut p = Parser::new(src)?;
    let cond = p.cap_or()?;
    if !p.at_end() {
        return Err(p.err_here("trailing input after condition"));
    }
    Ok(cond)
}

/// Parses a single capability literal, e.g. `[MV101,open]`.
pub fn parse_capability(src: &str) -> Result<Capability, ParseError> {
    let mut p = Parser::new(src)?;
    let cap = p.capability()?;
    if !p.at_end() {
        return Err(p.err_here("trailing input after capability"));
    }
    Ok(cap)
}

/// Parses a capability-set literal such as `{[MV101,open],[P101,on]}` into a
/// usable step set (one capability per component).
pub fn parse_capability_set(src: &str) -> Result<CapabilitySet, ParseError> {
    let mut p = Parser::new(src)?;
    let expr = p.set_expr()?;
    if !p.at_end() {
        return Err(p.err_here("trailing input after set"));
    }
    match expr {
        SetExpr::Lit(set) => CapabilitySet::new(set).map_err(|e| ParseError {
            msg: e,
            offset: 0,
            src: src.to_string(),
        }),
        _ => Err(ParseError { msg: "expected a set literal".into(), offset: 0, src: src.to_string() }),
    }
}
