//! Bounded-response safety properties over finite-domain ports.
//!
//! Text form: `G ( atoms => atoms )` or `G ( atoms => F<=k ( atoms ) )`,
//! where `atoms` is `true` or `port=value` literals joined by `&`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("property syntax error at byte {pos}: {msg}")]
pub struct PropertyError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub port: String,
    pub value: String,
}

impl Literal {
    pub fn new(port: impl Into<String>, value: impl Into<String>) -> Self {
        Literal {
            port: port.into(),
            value: value.into(),
        }
    }
}

/// Conjunction of literals. Empty means `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Conj(pub Vec<Literal>);

impl Conj {
    pub fn truth() -> Self {
        Conj(Vec::new())
    }

    pub fn of(lits: &[(&str, &str)]) -> Self {
        Conj(lits.iter().map(|(p, v)| Literal::new(*p, *v)).collect())
    }

    pub fn is_true(&self) -> bool {
        self.0.is_empty()
    }

    /// Evaluates against a valuation; a literal on a missing port is false.
    pub fn holds(&self, val: &BTreeMap<String, String>) -> bool {
        self.0.iter().all(|l| val.get(&l.port) == Some(&l.value))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Consequent {
    /// Must hold in the same tick.
    Now(Conj),
    /// Must hold within `k` ticks, the triggering tick counting as tick 0.
    Within { k: u32, atoms: Conj },
}

/// `G (antecedent => consequent)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Property {
    pub antecedent: Conj,
    pub consequent: Consequent,
}

impl Property {
    pub fn always(antecedent: Conj, consequent: Conj) -> Self {
        Property {
            antecedent,
            consequent: Consequent::Now(consequent),
        }
    }

    pub fn bounded_response(antecedent: Conj, k: u32, atoms: Conj) -> Self {
        Property {
            antecedent,
            consequent: Consequent::Within { k, atoms },
        }
    }

    /// The response conjunction and its deadline (0 for `Now`).
    pub fn response(&self) -> (&Conj, u32) {
        match &self.consequent {
            Consequent::Now(c) => (c, 0),
            Consequent::Within { k, atoms } => (atoms, *k),
        }
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.antecedent.0.iter().chain(self.response().0 .0.iter())
    }

    pub fn ports(&self) -> BTreeSet<&str> {
        self.literals().map(|l| l.port.as_str()).collect()
    }
}

fn write_conj(f: &mut fmt::Formatter<'_>, c: &Conj) -> fmt::Result {
    if c.is_true() {
        return f.write_str("true");
    }
    for (i, l) in c.0.iter().enumerate() {
        if i > 0 {
            f.write_str(" & ")?;
        }
        write!(f, "{}={}", l.port, l.value)?;
    }
    Ok(())
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("G (")?;
        write_conj(f, &self.antecedent)?;
        f.write_str(" => ")?;
        match &self.consequent {
            Consequent::Now(c) => write_conj(f, c)?,
            Consequent::Within { k, atoms } => {
                write!(f, "F<={k} (")?;
                write_conj(f, atoms)?;
                f.write_str(")")?;
            }
        }
        f.write_str(")")
    }
}

pub fn render_property(p: &Property) -> String {
    p.to_string()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PropertyError> {
        Err(PropertyError {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), PropertyError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(format!("expected `{tok}`"))
        }
    }

    fn ident(&mut self) -> Result<String, PropertyError> {
        self.skip_ws();
        let len: usize = self
            .rest()
            .chars()
            .take_while(|c| is_ident_char(*c))
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            return self.err("expected identifier");
        }
        let s = self.rest()[..len].to_string();
        self.pos += len;
        Ok(s)
    }

    /// `true` only when it is a whole word, so a port named `trueish` parses.
    fn eat_true(&mut self) -> bool {
        self.skip_ws();
        let r = self.rest();
        let after = r.get(4..).unwrap_or("");
        let literal_follows =
            after.trim_start().starts_with('=') && !after.trim_start().starts_with("=>");
        if r.starts_with("true") && !after.starts_with(is_ident_char) && !literal_follows {
            self.pos += 4;
            true
        } else {
            false
        }
    }

    fn conj(&mut self) -> Result<Conj, PropertyError> {
        if self.eat_true() {
            return Ok(Conj::truth());
        }
        let mut lits = Vec::new();
        loop {
            let port = self.ident()?;
            self.expect("=")?;
            let value = self.ident()?;
            lits.push(Literal { port, value });
            if !self.eat("&") {
                break;
            }
        }
        Ok(Conj(lits))
    }

    fn at_eventually(&mut self) -> bool {
        self.skip_ws();
        let r = self.rest();
        r.starts_with('F') && r[1..].trim_start().starts_with("<=")
    }

    fn bound(&mut self) -> Result<u32, PropertyError> {
        self.skip_ws();
        let start = self.pos;
        let neg = self.eat("-");
        self.skip_ws();
        let len = self.rest().chars().take_while(char::is_ascii_digit).count();
        if len == 0 {
            return self.err("expected tick bound");
        }
        let digits = &self.rest()[..len];
        self.pos += len;
        let k: u32 = digits.parse().map_err(|_| PropertyError {
            pos: start,
            msg: "tick bound out of range".into(),
        })?;
        if neg || k == 0 {
            return Err(PropertyError {
                pos: start,
                msg: "tick bound must be at least 1".into(),
            });
        }
        Ok(k)
    }

    fn property(&mut self) -> Result<Property, PropertyError> {
        self.expect("G")?;
        self.expect("(")?;
        let antecedent = self.conj()?;
        self.expect("=>")?;
        let consequent = if self.at_eventually() {
            self.expect("F")?;
            self.expect("<=")?;
            let k = self.bound()?;
            self.expect("(")?;
            let atoms = self.conj()?;
            self.expect(")")?;
            Consequent::Within { k, atoms }
        } else {
            Consequent::Now(self.conj()?)
        };
        self.expect(")")?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.err("trailing input");
        }
        Ok(Property {
            antecedent,
            consequent,
        })
    }
}

pub fn parse_property(text: &str) -> Result<Property, PropertyError> {
    Parser { src: text, pos: 0 }.property()
}

impl FromStr for Property {
    type Err = PropertyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_property(s)
    }
}

impl TryFrom<String> for Property {
    type Error = PropertyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_property(&s)
    }
}

impl From<Property> for String {
    fn from(p: Property) -> String {
        p.to_string()
    }
}
