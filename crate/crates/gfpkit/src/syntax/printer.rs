//! Formula printer. Output re-parses to the same AST: conjunctions and
//! disjunctions are always parenthesized, so precedence never matters.

use super::ast::{Formula, LfpComponent};
use crate::symbols::Symbols;

/// Render a formula in the concrete grammar accepted by [`super::parse`].
pub fn render(f: &Formula, syms: &Symbols) -> String {
    let mut out = String::new();
    write_formula(f, syms, &mut out);
    out
}

fn write_formula(f: &Formula, syms: &Symbols, out: &mut String) {
    match f {
        Formula::Atom(rel, args) => {
            out.push_str(rel);
            write_args(args, syms, out);
        }
        Formula::SecondOrderAtom(p, args) => {
            out.push_str(syms.pred_name(*p));
            write_args(args, syms, out);
        }
        Formula::Equality(x, y) => {
            out.push_str(syms.var_name(*x));
            out.push_str(" = ");
            out.push_str(syms.var_name(*y));
        }
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::And(parts) => write_junction(parts, " & ", syms, out),
        Formula::Or(parts) => write_junction(parts, " | ", syms, out),
        Formula::Exists(vars, body) => {
            out.push_str("exists ");
            for (i, v) in vars.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(syms.var_name(*v));
            }
            out.push_str(". ");
            write_formula(body, syms, out);
        }
        Formula::GuardedNeg(alpha, body) => {
            out.push_str("gneg[");
            write_formula(alpha, syms, out);
            out.push_str("](");
            write_formula(body, syms, out);
            out.push(')');
        }
        Formula::Lfp(comp, args) => {
            out.push_str("lfp[");
            write_component(comp, syms, out);
            out.push(']');
            write_args(args, syms, out);
        }
        Formula::SimultaneousLfp(i, system, args) => {
            out.push_str(&format!("lfp{{{i}}}["));
            for (j, comp) in system.iter().enumerate() {
                if j > 0 {
                    out.push_str(" ; ");
                }
                write_component(comp, syms, out);
            }
            out.push(']');
            write_args(args, syms, out);
        }
        Formula::GsoForall(p, arity, body) => {
            out.push_str(&format!("forall2 {}:{arity}. ", syms.pred_name(*p)));
            write_formula(body, syms, out);
        }
        Formula::GsoExists(p, arity, body) => {
            out.push_str(&format!("exists2 {}:{arity}. ", syms.pred_name(*p)));
            write_formula(body, syms, out);
        }
    }
}

fn write_component(comp: &LfpComponent, syms: &Symbols, out: &mut String) {
    out.push_str(syms.pred_name(comp.pred));
    write_args(&comp.vars, syms, out);
    out.push_str("; ");
    write_formula(&comp.guard, syms, out);
    out.push_str("; ");
    write_formula(&comp.body, syms, out);
}

fn write_junction(parts: &[Formula], sep: &str, syms: &Symbols, out: &mut String) {
    out.push('(');
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_formula(p, syms, out);
    }
    out.push(')');
}

fn write_args(args: &[crate::symbols::Var], syms: &Symbols, out: &mut String) {
    out.push('(');
    for (i, v) in args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(syms.var_name(*v));
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn round_trip(text: &str) {
        let mut s = Symbols::new();
        let f = parse(text, &mut s).unwrap();
        let printed = render(&f, &s);
        let g = parse(&printed, &mut s).unwrap();
        assert_eq!(f, g, "round trip changed {text} -> {printed}");
    }

    #[test]
    fn round_trips_representative_formulas() {
        round_trip("R(x,y)");
        round_trip("x = y");
        round_trip("true & false");
        round_trip("(P(x) | Q(x)) & R(x,y)");
        round_trip("exists y. R(x,y) & P(y)");
        round_trip("gneg[R(x,y)](exists z. R(x,z))");
        round_trip("gneg[true](P(x))");
        round_trip("lfp[X(x); P(x); Q(x) | exists y. R(y,x) & X(y)](z)");
        round_trip("lfp{1}[X(x); P(x); Y(x) ; Y(y); Q(y); X(y)](z)");
        round_trip("forall2 X:2. exists2 Y:1. (X(a,b) | Y(a))");
    }

    #[test]
    fn nested_parens_survive() {
        let mut s = Symbols::new();
        let f = parse("P(x) & (Q(x) & S(x))", &mut s).unwrap();
        let printed = render(&f, &s);
        assert_eq!(printed, "(P(x) & (Q(x) & S(x)))");
        assert_eq!(parse(&printed, &mut s).unwrap(), f);
    }
}
