use std::fmt;

use indexmap::IndexMap;

/// Position of a token in DSL source. Columns count characters, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self { line, column, length }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// An identifier with its location. Equality ignores the span.
#[derive(Debug, Clone, Eq)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: SourceSpan) -> Self {
        Self {
            name: name.into(),
            span,
        }
    }

    /// An identifier not tied to any source text.
    pub fn synthetic(name: impl Into<String>) -> Self {
        Self::new(name, SourceSpan::default())
    }

    pub fn as_str(&self) -> &str {
        &self.name
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Comparison {
        signal: Ident,
        /// Whether the source wrote `LEVEL` after the signal. Semantically inert.
        level: bool,
        op: CompareOp,
        value: f64,
    },
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

impl Condition {
    pub fn compare(signal: &str, op: CompareOp, value: f64) -> Self {
        Condition::Comparison {
            signal: Ident::synthetic(signal),
            level: false,
            op,
            value,
        }
    }

    pub fn and(self, rhs: Condition) -> Self {
        Condition::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Condition) -> Self {
        Condition::Or(Box::new(self), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Condition::Not(Box::new(self))
    }

    /// Signals referenced by this condition, in first-occurrence order.
    pub fn signals(&self) -> Vec<&Ident> {
        let mut out: Vec<&Ident> = Vec::new();
        self.visit(&mut |c| {
            if let Condition::Comparison { signal, .. } = c {
                if !out.iter().any(|s| s.name == signal.name) {
                    out.push(signal);
                }
            }
        });
        out
    }

    /// Every signal occurrence, duplicates included.
    pub fn signal_occurrences(&self) -> Vec<&Ident> {
        let mut out = Vec::new();
        self.visit(&mut |c| {
            if let Condition::Comparison { signal, .. } = c {
                out.push(signal);
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Condition)) {
        f(self);
        match self {
            Condition::Comparison { .. } => {}
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Condition::Not(inner) => inner.visit(f),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Condition::Comparison { .. } => 1,
            Condition::And(l, r) | Condition::Or(l, r) => 1 + l.depth().max(r.depth()),
            Condition::Not(inner) => 1 + inner.depth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Slowly,
    Quickly,
    /// Normalized speed in `[0, 1]`.
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Move { actuator: Ident, speed: Speed },
    /// `PLAY sound "file"`; `sound` carries the span of the keyword.
    Play { sound: Ident, file: String },
    Set { actuator: Ident, value: f64 },
    Wait { duration_us: u64, unit: TimeUnit },
}

/// Unit a `WAIT` was written in; kept so formatting reproduces the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Millis,
    Micros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub name: Ident,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub condition: Condition,
    pub then_behavior: Ident,
    pub else_behavior: Option<Ident>,
    /// Location of the `WHEN` keyword.
    pub span: SourceSpan,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.condition == other.condition
            && self.then_behavior == other.then_behavior
            && self.else_behavior == other.else_behavior
    }
}

/// Rules in source order plus definitions keyed by name, also in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BehaviorProgram {
    pub rules: Vec<Rule>,
    pub definitions: IndexMap<String, Definition>,
}

impl BehaviorProgram {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.definitions.is_empty()
    }
}
