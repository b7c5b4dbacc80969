//! Interned identifiers with a pretty-name table.
//!
//! Variables (first- and second-order) are represented as compact integer
//! ids. A [`Symbols`] table owns the id-to-name mapping and a deterministic
//! fresh-variable counter, so renaming-heavy operations (normalization,
//! fixpoint elimination) produce reproducible output for a given parse.

use std::collections::HashMap;
use std::fmt;

/// A first-order variable, interned in a [`Symbols`] table.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(pub u32);

/// A fixpoint / second-order predicate variable, interned in a [`Symbols`] table.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PredVar(pub u32);

/// Name table for interned variables.
///
/// Fresh names are `_v0, _v1, ...` (first-order) and `_X0, _X1, ...`
/// (predicate variables), drawn from monotone counters; user-supplied names
/// are never shadowed because user identifiers cannot start with `_v`/`_X`
/// followed by the counter unless they literally collide, in which case the
/// counter skips ahead.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    var_names: Vec<String>,
    var_ids: HashMap<String, u32>,
    pred_names: Vec<String>,
    pred_ids: HashMap<String, u32>,
    fresh_var: u32,
    fresh_pred: u32,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern a first-order variable name.
    pub fn var(&mut self, name: &str) -> Var {
        if let Some(&id) = self.var_ids.get(name) {
            return Var(id);
        }
        let id = self.var_names.len() as u32;
        self.var_names.push(name.to_string());
        self.var_ids.insert(name.to_string(), id);
        Var(id)
    }

    /// Intern a predicate-variable name.
    pub fn pred(&mut self, name: &str) -> PredVar {
        if let Some(&id) = self.pred_ids.get(name) {
            return PredVar(id);
        }
        let id = self.pred_names.len() as u32;
        self.pred_names.push(name.to_string());
        self.pred_ids.insert(name.to_string(), id);
        PredVar(id)
    }

    /// Mint a fresh first-order variable distinct from all interned ones.
    pub fn fresh_var(&mut self) -> Var {
        loop {
            let name = format!("_v{}", self.fresh_var);
            self.fresh_var += 1;
            if !self.var_ids.contains_key(&name) {
                return self.var(&name);
            }
        }
    }

    /// Mint a fresh predicate variable distinct from all interned ones.
    pub fn fresh_pred(&mut self) -> PredVar {
        loop {
            let name = format!("_X{}", self.fresh_pred);
            self.fresh_pred += 1;
            if !self.pred_ids.contains_key(&name) {
                return self.pred(&name);
            }
        }
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.var_names[v.0 as usize]
    }

    pub fn pred_name(&self, p: PredVar) -> &str {
        &self.pred_names[p.0 as usize]
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let mut s = Symbols::new();
        let x = s.var("x");
        let y = s.var("y");
        assert_ne!(x, y);
        assert_eq!(s.var("x"), x);
        assert_eq!(s.var_name(x), "x");
    }

    #[test]
    fn fresh_vars_avoid_collisions() {
        let mut s = Symbols::new();
        let v0 = s.var("_v0");
        let f = s.fresh_var();
        assert_ne!(f, v0);
        assert_eq!(s.var_name(f), "_v1");
    }

    #[test]
    fn fresh_counter_is_deterministic() {
        let mut a = Symbols::new();
        let mut b = Symbols::new();
        a.var("p");
        b.var("p");
        assert_eq!(a.fresh_var(), b.fresh_var());
        assert_eq!(a.fresh_pred(), b.fresh_pred());
    }
}
