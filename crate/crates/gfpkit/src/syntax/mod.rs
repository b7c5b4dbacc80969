//! Formula syntax: AST, signatures, parsing, printing, fragment
//! classification, normal forms, and syntactic transformations.

mod ast;
mod fragments;
mod normalize;
mod fixpoints;
mod gso;
mod parser;
mod printer;

pub use ast::{Formula, LfpComponent};
pub use fragments::{classify_fragment, strict_normal_form, FragmentReport};
pub use fixpoints::eliminate_simultaneous_fixpoints;
pub use gso::gnfp_to_gso;
pub use normalize::{normalize, NormalizeMode};
pub use parser::{parse, parse_signature};
pub use printer::render;

use crate::symbols::Var;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// A finite relational signature: relation names with arities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub relations: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new(rels: impl IntoIterator<Item = (impl Into<String>, usize)>) -> Self {
        Signature {
            relations: rels.into_iter().map(|(n, a)| (n.into(), a)).collect(),
        }
    }

    /// Maximum arity over all relations (0 for the empty signature).
    pub fn width(&self) -> usize {
        self.relations.values().copied().max().unwrap_or(0)
    }

    pub fn arity(&self, rel: &str) -> Option<usize> {
        self.relations.get(rel).copied()
    }

    pub fn contains(&self, rel: &str) -> bool {
        self.relations.contains_key(rel)
    }

    /// Restriction to a subset of the relation names.
    pub fn restrict(&self, names: &BTreeSet<String>) -> Signature {
        Signature {
            relations: self
                .relations
                .iter()
                .filter(|(n, _)| names.contains(*n))
                .map(|(n, a)| (n.clone(), *a))
                .collect(),
        }
    }
}

/// A signature together with a distinguished subset of guard relations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardedSignature {
    pub sigma: Signature,
    /// Names of the guard relations; always a subset of `sigma`.
    pub guards: BTreeSet<String>,
}

impl GuardedSignature {
    /// All relations double as guards.
    pub fn full(sigma: Signature) -> Self {
        let guards = sigma.relations.keys().cloned().collect();
        GuardedSignature { sigma, guards }
    }

    pub fn with_guards(sigma: Signature, guards: impl IntoIterator<Item = impl Into<String>>) -> Result<Self, SyntaxError> {
        let guards: BTreeSet<String> = guards.into_iter().map(Into::into).collect();
        for g in &guards {
            if !sigma.contains(g) {
                return Err(SyntaxError::UnknownGuardRelation(g.clone()));
            }
        }
        Ok(GuardedSignature { sigma, guards })
    }

    pub fn is_guard_relation(&self, rel: &str) -> bool {
        self.guards.contains(rel)
    }

    /// Width of the guard sub-signature (0 if there are no guard relations).
    pub fn guard_width(&self) -> usize {
        self.guards
            .iter()
            .filter_map(|g| self.sigma.arity(g))
            .max()
            .unwrap_or(0)
    }
}

/// Errors raised by parsing, validation, and syntactic transformations.
#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
    #[error("relation {rel} used with {got} arguments but declared with arity {expected}")]
    Arity {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("relation {0} is not declared in the signature")]
    UnknownRelation(String),
    #[error("guard relation {0} is not part of the signature")]
    UnknownGuardRelation(String),
    #[error("invalid guard: {0}")]
    InvalidGuard(String),
    #[error("fixpoint component index {index} out of range for a system of {len} equations")]
    FixpointIndex { index: usize, len: usize },
    #[error("fixpoint {0}: argument tuple length does not match the bound variable tuple")]
    FixpointArity(String),
    #[error("predicate variable {0} occurs with inconsistent arities")]
    PredArity(String),
    #[error("formula is not in the expected fragment: {0}")]
    NotInFragment(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Variable-set convenience alias used throughout the syntax module.
pub type VarSet = BTreeSet<Var>;
