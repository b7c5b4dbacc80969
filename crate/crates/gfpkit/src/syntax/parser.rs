//! Hand-rolled lexer and recursive-descent parser for the formula grammar
//! and for signature declaration files.
//!
//! Grammar sketch (identifiers are `[A-Za-z_][A-Za-z0-9_]*`; `&` binds
//! tighter than `|`; quantifier bodies extend as far right as possible):
//!
//! ```text
//! e ::= e & e | e | e | R(x,y) | x = y | true | false | (e)
//!     | exists x,y. e
//!     | gneg[ALPHA](e)
//!     | lfp[X(x1,..,xn); ALPHA; BODY](t1,..,tn)
//!     | lfp{i}[X1(..); A1; B1 ; X2(..); A2; B2](t1,..,tn)
//!     | forall2 X:n. e | exists2 X:n. e
//! ```
//!
//! An applied identifier is a second-order atom when a surrounding
//! `lfp`/`forall2`/`exists2` binds it, and a relation atom otherwise.

use super::ast::{Formula, LfpComponent};
use super::{GuardedSignature, Signature, SyntaxError};
use crate::symbols::{PredVar, Symbols, Var};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(usize),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Colon,
    Eq,
    Amp,
    Pipe,
}

struct Lexer {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            '[' => {
                toks.push((i, Tok::LBracket));
                i += 1;
            }
            ']' => {
                toks.push((i, Tok::RBracket));
                i += 1;
            }
            '{' => {
                toks.push((i, Tok::LBrace));
                i += 1;
            }
            '}' => {
                toks.push((i, Tok::RBrace));
                i += 1;
            }
            ',' => {
                toks.push((i, Tok::Comma));
                i += 1;
            }
            ';' => {
                toks.push((i, Tok::Semi));
                i += 1;
            }
            '.' => {
                toks.push((i, Tok::Dot));
                i += 1;
            }
            ':' => {
                toks.push((i, Tok::Colon));
                i += 1;
            }
            '=' => {
                toks.push((i, Tok::Eq));
                i += 1;
            }
            '&' => {
                toks.push((i, Tok::Amp));
                i += 1;
            }
            '|' => {
                toks.push((i, Tok::Pipe));
                i += 1;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let n: usize = text[start..i].parse().map_err(|_| SyntaxError::Parse {
                    at: start,
                    msg: "number out of range".into(),
                })?;
                toks.push((start, Tok::Number(n)));
            }
            _ => {
                return Err(SyntaxError::Parse {
                    at: i,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(toks)
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map(|(i, _)| *i).unwrap_or(self.len)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        let at = self.at();
        match self.next() {
            Some(t) if t == want => Ok(()),
            got => Err(SyntaxError::Parse {
                at,
                msg: format!("expected {want:?}, found {got:?}"),
            }),
        }
    }

    fn expect_ident(&mut self) -> Result<String, SyntaxError> {
        let at = self.at();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            got => Err(SyntaxError::Parse {
                at,
                msg: format!("expected identifier, found {got:?}"),
            }),
        }
    }

    fn expect_number(&mut self) -> Result<usize, SyntaxError> {
        let at = self.at();
        match self.next() {
            Some(Tok::Number(n)) => Ok(n),
            got => Err(SyntaxError::Parse {
                at,
                msg: format!("expected number, found {got:?}"),
            }),
        }
    }
}

struct Parser<'a> {
    lx: Lexer,
    syms: &'a mut Symbols,
    /// Predicate variables currently in scope, by name.
    preds: Vec<(String, PredVar)>,
}

const KEYWORDS: &[&str] = &["true", "false", "exists", "gneg", "lfp", "forall2", "exists2"];

impl<'a> Parser<'a> {
    fn lookup_pred(&self, name: &str) -> Option<PredVar> {
        self.preds
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
    }

    fn formula(&mut self) -> Result<Formula, SyntaxError> {
        let mut parts = vec![self.conjunction()?];
        while self.lx.peek() == Some(&Tok::Pipe) {
            self.lx.next();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut parts = vec![self.primary()?];
        while self.lx.peek() == Some(&Tok::Amp) {
            self.lx.next();
            parts.push(self.primary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn var_list(&mut self) -> Result<Vec<Var>, SyntaxError> {
        let mut vars = vec![self.var()?];
        while self.lx.peek() == Some(&Tok::Comma) {
            self.lx.next();
            vars.push(self.var()?);
        }
        Ok(vars)
    }

    fn var(&mut self) -> Result<Var, SyntaxError> {
        let at = self.lx.at();
        let name = self.lx.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(SyntaxError::Parse {
                at,
                msg: format!("keyword {name} cannot be a variable"),
            });
        }
        Ok(self.syms.var(&name))
    }

    fn primary(&mut self) -> Result<Formula, SyntaxError> {
        let at = self.lx.at();
        match self.lx.next() {
            Some(Tok::LParen) => {
                let f = self.formula()?;
                self.lx.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                "exists" => {
                    let vars = self.var_list()?;
                    self.lx.expect(Tok::Dot)?;
                    let body = self.formula()?;
                    Ok(Formula::Exists(vars, Box::new(body)))
                }
                "gneg" => {
                    self.lx.expect(Tok::LBracket)?;
                    let alpha = self.formula()?;
                    self.lx.expect(Tok::RBracket)?;
                    self.lx.expect(Tok::LParen)?;
                    let body = self.formula()?;
                    self.lx.expect(Tok::RParen)?;
                    if !alpha.is_guard_shape() {
                        return Err(SyntaxError::InvalidGuard(
                            "negation guard must be an atom, an equality, or true".into(),
                        ));
                    }
                    Ok(Formula::GuardedNeg(Box::new(alpha), Box::new(body)))
                }
                "lfp" => self.lfp(),
                "forall2" | "exists2" => {
                    let pname = self.lx.expect_ident()?;
                    self.lx.expect(Tok::Colon)?;
                    let arity = self.lx.expect_number()?;
                    self.lx.expect(Tok::Dot)?;
                    let p = self.syms.pred(&pname);
                    self.preds.push((pname, p));
                    let body = self.formula()?;
                    self.preds.pop();
                    Ok(if name == "forall2" {
                        Formula::GsoForall(p, arity, Box::new(body))
                    } else {
                        Formula::GsoExists(p, arity, Box::new(body))
                    })
                }
                _ => match self.lx.peek() {
                    Some(Tok::LParen) => {
                        self.lx.next();
                        let mut args = Vec::new();
                        if self.lx.peek() != Some(&Tok::RParen) {
                            args = self.var_list()?;
                        }
                        self.lx.expect(Tok::RParen)?;
                        Ok(match self.lookup_pred(&name) {
                            Some(p) => Formula::SecondOrderAtom(p, args),
                            None => Formula::Atom(name, args),
                        })
                    }
                    Some(Tok::Eq) => {
                        self.lx.next();
                        let rhs = self.var()?;
                        let lhs = self.syms.var(&name);
                        Ok(Formula::Equality(lhs, rhs))
                    }
                    _ => Err(SyntaxError::Parse {
                        at,
                        msg: format!("identifier {name} must be applied or equated"),
                    }),
                },
            },
            got => Err(SyntaxError::Parse {
                at,
                msg: format!("expected a formula, found {got:?}"),
            }),
        }
    }

    /// Parse the tail of an `lfp` form, after the keyword.
    fn lfp(&mut self) -> Result<Formula, SyntaxError> {
        let mut index = None;
        if self.lx.peek() == Some(&Tok::LBrace) {
            self.lx.next();
            index = Some(self.lx.expect_number()?);
            self.lx.expect(Tok::RBrace)?;
        }
        self.lx.expect(Tok::LBracket)?;
        // Parse the equation heads first so every body sees all of them.
        let mut heads: Vec<(String, PredVar, Vec<Var>)> = Vec::new();
        let mut raw: Vec<(Formula, Formula)> = Vec::new();
        loop {
            let pname = self.lx.expect_ident()?;
            self.lx.expect(Tok::LParen)?;
            let vars = self.var_list()?;
            self.lx.expect(Tok::RParen)?;
            let p = self.syms.pred(&pname);
            heads.push((pname, p, vars));
            self.lx.expect(Tok::Semi)?;
            let alpha = self.formula()?;
            if !alpha.is_guard_shape() {
                return Err(SyntaxError::InvalidGuard(
                    "fixpoint guard must be an atom, an equality, or true".into(),
                ));
            }
            self.lx.expect(Tok::Semi)?;
            // Bodies may refer to every equation of the system, including
            // later ones; scope the heads seen so far plus re-scan below.
            let mark = self.preds.len();
            for (n, p, _) in &heads {
                self.preds.push((n.clone(), *p));
            }
            let body = self.formula()?;
            self.preds.truncate(mark);
            raw.push((alpha, body));
            if self.lx.peek() == Some(&Tok::Semi) {
                self.lx.next();
            } else {
                break;
            }
        }
        self.lx.expect(Tok::RBracket)?;
        self.lx.expect(Tok::LParen)?;
        let args = if self.lx.peek() == Some(&Tok::RParen) {
            Vec::new()
        } else {
            self.var_list()?
        };
        self.lx.expect(Tok::RParen)?;

        // Forward references (a body mentioning a later head) were parsed as
        // relation atoms; patch them now that all heads are known.
        let by_name: BTreeMap<String, PredVar> =
            heads.iter().map(|(n, p, _)| (n.clone(), *p)).collect();
        let system: Vec<LfpComponent> = heads
            .iter()
            .zip(raw)
            .map(|((_, p, vars), (alpha, body))| LfpComponent {
                pred: *p,
                vars: vars.clone(),
                guard: Box::new(alpha),
                body: Box::new(patch_forward_refs(body, &by_name)),
            })
            .collect();

        let f = match (index, system.len()) {
            (None, 1) => Formula::Lfp(system.into_iter().next().unwrap(), args),
            (None, n) => {
                return Err(SyntaxError::Parse {
                    at: self.lx.at(),
                    msg: format!("a system of {n} equations needs an lfp{{i}} component index"),
                })
            }
            (Some(i), n) => {
                if i >= n {
                    return Err(SyntaxError::FixpointIndex { index: i, len: n });
                }
                Formula::SimultaneousLfp(i, system, args)
            }
        };
        Ok(f)
    }
}

fn patch_forward_refs(f: Formula, preds: &BTreeMap<String, PredVar>) -> Formula {
    match f {
        Formula::Atom(name, args) => match preds.get(&name) {
            Some(p) => Formula::SecondOrderAtom(*p, args),
            None => Formula::Atom(name, args),
        },
        Formula::And(ps) => Formula::And(
            ps.into_iter()
                .map(|p| patch_forward_refs(p, preds))
                .collect(),
        ),
        Formula::Or(ps) => Formula::Or(
            ps.into_iter()
                .map(|p| patch_forward_refs(p, preds))
                .collect(),
        ),
        Formula::Exists(vs, body) => {
            Formula::Exists(vs, Box::new(patch_forward_refs(*body, preds)))
        }
        Formula::GuardedNeg(alpha, body) => Formula::GuardedNeg(
            alpha,
            Box::new(patch_forward_refs(*body, preds)),
        ),
        Formula::Lfp(comp, args) => {
            // An inner binder of the same name shadows the outer head.
            let mut inner = preds.clone();
            inner.retain(|_, p| *p != comp.pred);
            Formula::Lfp(
                LfpComponent {
                    pred: comp.pred,
                    vars: comp.vars,
                    guard: comp.guard,
                    body: Box::new(patch_forward_refs(*comp.body, &inner)),
                },
                args,
            )
        }
        Formula::SimultaneousLfp(i, system, args) => {
            let bound: Vec<PredVar> = system.iter().map(|c| c.pred).collect();
            let mut inner = preds.clone();
            inner.retain(|_, p| !bound.contains(p));
            Formula::SimultaneousLfp(
                i,
                system
                    .into_iter()
                    .map(|c| LfpComponent {
                        pred: c.pred,
                        vars: c.vars,
                        guard: c.guard,
                        body: Box::new(patch_forward_refs(*c.body, &inner)),
                    })
                    .collect(),
                args,
            )
        }
        other => other,
    }
}

/// Parse a formula, interning identifiers into `syms`.
pub fn parse(text: &str, syms: &mut Symbols) -> Result<Formula, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser {
        lx: Lexer {
            toks,
            pos: 0,
            len: text.len(),
        },
        syms,
        preds: Vec::new(),
    };
    let f = p.formula()?;
    if p.lx.peek().is_some() {
        return Err(SyntaxError::Parse {
            at: p.lx.at(),
            msg: "trailing input after formula".into(),
        });
    }
    f.validate(p.syms)?;
    Ok(f)
}

/// Parse a signature declaration file.
///
/// One declaration per line: `rel NAME/ARITY [guard]`. Blank lines and
/// `#`-comments are ignored. Relations marked `guard` form the guard
/// sub-signature; if no relation is marked, every relation is a guard.
pub fn parse_signature(text: &str) -> Result<GuardedSignature, SyntaxError> {
    let mut relations = BTreeMap::new();
    let mut guards = Vec::new();
    let mut any_guard_flag = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let kw = parts.next().unwrap();
        if kw != "rel" {
            return Err(SyntaxError::Parse {
                at: lineno,
                msg: format!("expected `rel`, found {kw}"),
            });
        }
        let decl = parts.next().ok_or_else(|| SyntaxError::Parse {
            at: lineno,
            msg: "missing NAME/ARITY".into(),
        })?;
        let (name, arity) = decl.split_once('/').ok_or_else(|| SyntaxError::Parse {
            at: lineno,
            msg: format!("declaration {decl} must be NAME/ARITY"),
        })?;
        let arity: usize = arity.parse().map_err(|_| SyntaxError::Parse {
            at: lineno,
            msg: format!("bad arity in {decl}"),
        })?;
        relations.insert(name.to_string(), arity);
        match parts.next() {
            Some("guard") => {
                any_guard_flag = true;
                guards.push(name.to_string());
            }
            Some(extra) => {
                return Err(SyntaxError::Parse {
                    at: lineno,
                    msg: format!("unexpected token {extra}"),
                })
            }
            None => {}
        }
    }
    let sigma = Signature { relations };
    if any_guard_flag {
        GuardedSignature::with_guards(sigma, guards)
    } else {
        Ok(GuardedSignature::full(sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_connectives() {
        let mut s = Symbols::new();
        let f = parse("R(x,y) & (P(x) | x = y)", &mut s).unwrap();
        match f {
            Formula::And(parts) => {
                assert_eq!(parts.len(), 2);
                assert!(matches!(parts[1], Formula::Or(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let mut s = Symbols::new();
        let f = parse("P(x) | Q(x) & S(x)", &mut s).unwrap();
        match f {
            Formula::Or(parts) => {
                assert!(matches!(parts[0], Formula::Atom(..)));
                assert!(matches!(parts[1], Formula::And(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exists_extends_right() {
        let mut s = Symbols::new();
        let f = parse("exists y. R(x,y) & P(y)", &mut s).unwrap();
        assert!(matches!(f, Formula::Exists(_, _)));
    }

    #[test]
    fn lfp_binds_its_head_in_the_body() {
        let mut s = Symbols::new();
        let f = parse(
            "lfp[X(x); P(x); Q(x) | exists y. R(y,x) & X(y)](z)",
            &mut s,
        )
        .unwrap();
        assert!(f.free_pred_vars().is_empty());
        if let Formula::Lfp(comp, args) = &f {
            assert_eq!(args.len(), 1);
            // The head is free in the bare body; the Lfp node binds it.
            assert!(comp.body.free_pred_vars().contains(&comp.pred));
            // X occurs bound inside the body.
            let mut found = false;
            fn scan(f: &Formula, p: crate::symbols::PredVar, found: &mut bool) {
                match f {
                    Formula::SecondOrderAtom(q, _) if *q == p => *found = true,
                    Formula::And(ps) | Formula::Or(ps) => {
                        ps.iter().for_each(|x| scan(x, p, found))
                    }
                    Formula::Exists(_, b) => scan(b, p, found),
                    _ => {}
                }
            }
            scan(&comp.body, comp.pred, &mut found);
            assert!(found);
        } else {
            panic!("expected lfp");
        }
    }

    #[test]
    fn simultaneous_system_with_forward_reference() {
        let mut s = Symbols::new();
        let f = parse(
            "lfp{0}[X(x); P(x); Y(x) ; Y(y); Q(y); X(y)](z)",
            &mut s,
        )
        .unwrap();
        if let Formula::SimultaneousLfp(0, system, _) = &f {
            assert_eq!(system.len(), 2);
            // The first body references Y, declared later.
            assert!(matches!(*system[0].body, Formula::SecondOrderAtom(..)));
            assert!(f.validate(&s).is_ok());
        } else {
            panic!("expected simultaneous lfp");
        }
    }

    #[test]
    fn second_order_quantifier_scopes_name() {
        let mut s = Symbols::new();
        let f = parse("forall2 X:1. (X(x) | gneg[true](X(x)))", &mut s).unwrap();
        if let Formula::GsoForall(p, 1, body) = &f {
            assert!(body.free_pred_vars().contains(p));
        } else {
            panic!("expected forall2");
        }
    }

    #[test]
    fn rejects_trailing_garbage_and_bad_guards() {
        let mut s = Symbols::new();
        assert!(parse("P(x) P(y)", &mut s).is_err());
        assert!(parse("gneg[P(x) & Q(x)](P(x))", &mut s).is_err());
    }

    #[test]
    fn signature_file_round_trip() {
        let sig = parse_signature("# test\nrel R/2 guard\nrel P/1\n").unwrap();
        assert_eq!(sig.sigma.arity("R"), Some(2));
        assert!(sig.is_guard_relation("R"));
        assert!(!sig.is_guard_relation("P"));
        let all = parse_signature("rel R/2\nrel P/1\n").unwrap();
        assert!(all.is_guard_relation("P"));
    }
}
