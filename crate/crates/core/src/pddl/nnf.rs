//! Negation normal form: push negations down to literals.
//!
//! The only rewrites are double-negation elimination, De Morgan's laws, and
//! quantifier duality. No distribution or other logical simplification
//! happens, so formula size stays linear in the input.

use super::ast::Formula;

/// Returns an equivalent formula with negation only in literal polarity.
/// Idempotent: `to_nnf(to_nnf(f)) == to_nnf(f)`.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::Lit(l) => {
            let mut l = l.clone();
            if negate {
                l.positive = !l.positive;
            }
            Formula::Lit(l)
        }
        Formula::Not(inner) => nnf(inner, !negate),
        Formula::And(cs) => {
            let parts = cs.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                Formula::Or(parts)
            } else {
                Formula::And(parts)
            }
        }
        Formula::Or(ds) => {
            let parts = ds.iter().map(|d| nnf(d, negate)).collect();
            if negate {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Exists(qs, body) => {
            let b = Box::new(nnf(body, negate));
            if negate {
                Formula::Forall(qs.clone(), b)
            } else {
                Formula::Exists(qs.clone(), b)
            }
        }
        Formula::Forall(qs, body) => {
            let b = Box::new(nnf(body, negate));
            if negate {
                Formula::Exists(qs.clone(), b)
            } else {
                Formula::Forall(qs.clone(), b)
            }
        }
    }
}

/// True when negation appears only as literal polarity.
pub fn is_nnf(f: &Formula) -> bool {
    match f {
        Formula::Lit(_) => true,
        Formula::Not(_) => false,
        Formula::And(cs) => cs.iter().all(is_nnf),
        Formula::Or(ds) => ds.iter().all(is_nnf),
        Formula::Exists(_, body) | Formula::Forall(_, body) => is_nnf(body),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{Literal, Term};

    fn atom(p: u32) -> Formula {
        Formula::Lit(Literal::new(p, vec![Term::Obj(0)], true))
    }

    #[test]
    fn de_morgan_conjunction() {
        let f = Formula::Not(Box::new(Formula::And(vec![atom(1), atom(2)])));
        let g = to_nnf(&f);
        match &g {
            Formula::Or(ds) => {
                assert_eq!(ds.len(), 2);
                for d in ds {
                    match d {
                        Formula::Lit(l) => assert!(!l.positive),
                        _ => panic!("expected literal"),
                    }
                }
            }
            _ => panic!("expected disjunction"),
        }
        assert!(is_nnf(&g));
    }

    #[test]
    fn double_negation() {
        let f = Formula::Not(Box::new(Formula::Not(Box::new(atom(1)))));
        assert_eq!(to_nnf(&f), atom(1));
    }

    #[test]
    fn quantifier_duality() {
        let q = crate::pddl::QuantVar { var: 0, ty: 0 };
        let f = Formula::Not(Box::new(Formula::Forall(vec![q], Box::new(atom(1)))));
        match to_nnf(&f) {
            Formula::Exists(_, body) => match *body {
                Formula::Lit(l) => assert!(!l.positive),
                _ => panic!("expected literal body"),
            },
            _ => panic!("expected existential"),
        }
    }

    #[test]
    fn idempotent() {
        let f = Formula::Not(Box::new(Formula::Or(vec![
            atom(1),
            Formula::Not(Box::new(Formula::And(vec![atom(2), atom(3)]))),
        ])));
        let once = to_nnf(&f);
        assert_eq!(to_nnf(&once), once);
        assert!(is_nnf(&once));
    }
}
