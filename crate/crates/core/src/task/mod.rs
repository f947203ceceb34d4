//! Assembly-task formalism: objects, predicates, configurations and steps.
//!
//! A task is a state-transition system. Configurations are sets of ground
//! predicates over the declared objects, and steps rewrite configurations
//! through STRIPS-style precondition / add / delete sets. Tasks are written
//! in a small declarative language (see [`parse_task_definition`]) and can be
//! written back in canonical form with [`TaskDefinition::to_canonical_string`].

mod format;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use parser::{parse_task_definition, Diagnostic, DiagnosticKind, ParseError};

/// The elementary actions a step may be composed of.
pub const ELEMENTARY_ACTIONS: [&str; 6] = ["join", "split", "mount", "remove", "put", "take"];

/// Maximum predicate arity.
pub const MAX_ARITY: usize = 2;

/// Index of a step inside [`TaskDefinition::steps`].
pub type StepId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("step `{step}` is not applicable, missing preconditions: {}", join_predicates(.missing))]
    PreconditionViolation { step: String, missing: Vec<Predicate> },
}

fn join_predicates(preds: &[Predicate]) -> String {
    preds.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Element,
    Tray,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectDecl {
    pub name: String,
    pub kind: ObjectKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PredicateSchema {
    pub name: String,
    pub arity: usize,
}

/// A ground predicate such as `do_contain(T_in, E4)`.
///
/// The derived ordering (name, then arguments) is the canonical ordering used
/// by [`Configuration`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<String>,
}

impl Predicate {
    pub fn new<S: Into<String>>(name: S, args: &[&str]) -> Self {
        Predicate {
            name: name.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// A set of predicates that hold in one assembly state.
///
/// Backed by an ordered set, so equality and hashing are independent of the
/// order predicates were written in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    predicates: BTreeSet<Predicate>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.predicates.contains(p)
    }

    pub fn insert(&mut self, p: Predicate) -> bool {
        self.predicates.insert(p)
    }

    pub fn remove(&mut self, p: &Predicate) -> bool {
        self.predicates.remove(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter()
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn predicates(&self) -> &BTreeSet<Predicate> {
        &self.predicates
    }

    /// Stable 64-bit FNV-1a digest of the canonical predicate listing.
    pub fn digest(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.predicates {
            for byte in p.to_string().bytes().chain(std::iter::once(b';')) {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }
}

impl FromIterator<Predicate> for Configuration {
    fn from_iter<I: IntoIterator<Item = Predicate>>(iter: I) -> Self {
        Configuration {
            predicates: iter.into_iter().collect(),
        }
    }
}

impl From<BTreeSet<Predicate>> for Configuration {
    fn from(predicates: BTreeSet<Predicate>) -> Self {
        Configuration { predicates }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}}}",
            join_predicates(&self.predicates.iter().cloned().collect::<Vec<_>>())
        )
    }
}

/// One elementary action inside a step, e.g. `take(E4, T_in)`. Kept as a label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActionInstance {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// An atomic bundle of elementary actions with its preconditions and effects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub name: String,
    pub actions: Vec<ActionInstance>,
    pub preconditions: BTreeSet<Predicate>,
    pub add_effects: BTreeSet<Predicate>,
    pub del_effects: BTreeSet<Predicate>,
}

/// A validated task definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskDefinition {
    pub objects: Vec<ObjectDecl>,
    pub predicate_schemas: Vec<PredicateSchema>,
    pub steps: Vec<Step>,
    pub initial: Configuration,
    pub goal: Configuration,
}

impl TaskDefinition {
    /// Element names in declaration order. The position is the detector class id.
    pub fn elements(&self) -> impl Iterator<Item = &str> {
        self.objects
            .iter()
            .filter(|o| o.kind == ObjectKind::Element)
            .map(|o| o.name.as_str())
    }

    pub fn trays(&self) -> impl Iterator<Item = &str> {
        self.objects
            .iter()
            .filter(|o| o.kind == ObjectKind::Tray)
            .map(|o| o.name.as_str())
    }

    pub fn element_count(&self) -> usize {
        self.elements().count()
    }

    pub fn tray_count(&self) -> usize {
        self.trays().count()
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements().position(|e| e == name)
    }

    pub fn tray_index(&self, name: &str) -> Option<usize> {
        self.trays().position(|t| t == name)
    }

    pub fn object(&self, name: &str) -> Option<&ObjectDecl> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn step_by_name(&self, name: &str) -> Option<(StepId, &Step)> {
        self.steps.iter().enumerate().find(|(_, s)| s.name == name)
    }

    /// Canonical text form: LF line endings, two-space indentation, predicate
    /// sets in canonical order. Parsing the output yields an equal definition.
    pub fn to_canonical_string(&self) -> String {
        format::write_canonical(self)
    }
}

/// True iff every precondition of `step` holds in `config`.
pub fn check_preconditions(config: &Configuration, step: &Step) -> bool {
    step.preconditions.iter().all(|p| config.contains(p))
}

/// Applies `step` to `config`: `(config \ del) ∪ add`.
pub fn apply_step(config: &Configuration, step: &Step) -> Result<Configuration, TaskError> {
    let missing: Vec<Predicate> = step
        .preconditions
        .iter()
        .filter(|p| !config.contains(p))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(TaskError::PreconditionViolation {
            step: step.name.clone(),
            missing,
        });
    }
    let mut next = config.clone();
    for p in &step.del_effects {
        next.remove(p);
    }
    for p in &step.add_effects {
        next.insert(p.clone());
    }
    Ok(next)
}
