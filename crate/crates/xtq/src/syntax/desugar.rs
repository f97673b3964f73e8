//! Desugaring of parsed programs.
//!
//! Three rewrites happen here, in order:
//!
//! 1. abbreviated atoms such as `//book` receive a generated content
//!    variable, so later stages can assume every path binds something;
//! 2. composite sources `(s1 || s2)(p)` distribute the suffix pattern to
//!    every source — the pattern is copied *after* step 1, so the copies
//!    share their variables and stay syntactically equal;
//! 3. tree patterns whose root is a disjunction, `(p1 || p2)(p)`, distribute
//!    the body into each branch, again sharing variables.

use crate::error::{Error, Result};

use super::*;

pub fn desugar(mut program: Program) -> Result<Program> {
    for f in &mut program.functions {
        desugar_stmt(&mut f.body)?;
    }
    desugar_stmt(&mut program.statement)?;
    Ok(program)
}

/// Desugar a bare extraction pattern outside of any statement.
pub fn lower_pattern(mut ep: Ep) -> Result<Ep> {
    let mut gen = VarGen::default();
    fill_ep(&mut ep, &mut gen);
    lower_ep(ep)
}

fn desugar_stmt(stmt: &mut QwcStatement) -> Result<()> {
    let mut gen = VarGen::default();
    fill_qexpr(&mut stmt.query, &mut gen);
    let query = std::mem::replace(&mut stmt.query, QExpr::Conj(Vec::new()));
    stmt.query = lower_qexpr(query)?;
    Ok(())
}

// -- step 1: abbreviation filling ---------------------------------------------

fn fill_qexpr(q: &mut QExpr, gen: &mut VarGen) {
    match q {
        QExpr::Doc { pattern, .. } => {
            if let Some(p) = pattern {
                fill_ep(p, gen);
            }
        }
        QExpr::Input { pattern } | QExpr::Func { pattern } => fill_vp(pattern, gen),
        QExpr::Conj(items) | QExpr::Disj(items) => {
            for item in items {
                fill_qexpr(item, gen);
            }
        }
        QExpr::Suffixed(inner, suffix) => {
            fill_qexpr(inner, gen);
            fill_ep(suffix, gen);
        }
    }
}

fn fill_ep(ep: &mut Ep, gen: &mut VarGen) {
    match ep {
        Ep::Path(_, atom) => {
            if atom.content.is_none() {
                atom.content = Some(AtomSide::Var(gen.fresh()));
            }
        }
        Ep::Tree(a, b) | Ep::Fold(a, b) => {
            fill_ep(a, gen);
            fill_ep(b, gen);
        }
        Ep::Conj(items) | Ep::Disj(items) => {
            for item in items {
                fill_ep(item, gen);
            }
        }
    }
}

fn fill_vp(vp: &mut Vp, gen: &mut VarGen) {
    match vp {
        Vp::Univ | Vp::Const(_) | Vp::Var(_) => {}
        Vp::VarPtn(_, inner) | Vp::View(inner) | Vp::Set(inner) => fill_vp(inner, gen),
        Vp::Doc(ep) => fill_ep(ep, gen),
        Vp::Cons(a, b) => {
            fill_vp(a, gen);
            fill_vp(b, gen);
        }
        Vp::Tuple(items) | Vp::DUnion(items) => {
            for item in items {
                fill_vp(item, gen);
            }
        }
        Vp::Opt(items) => {
            for (_, item) in items {
                fill_vp(item, gen);
            }
        }
    }
}

// -- steps 2 and 3: distribution ------------------------------------------------

fn lower_qexpr(q: QExpr) -> Result<QExpr> {
    match q {
        QExpr::Doc { doc, pattern } => match pattern {
            Some(p) => Ok(QExpr::Doc { doc, pattern: Some(lower_ep(p)?) }),
            None => Err(Error::syntax(
                1,
                1,
                format!("document source \"{doc}\" needs an extraction pattern"),
            )),
        },
        q @ (QExpr::Input { .. } | QExpr::Func { .. }) => Ok(q),
        QExpr::Conj(items) => Ok(QExpr::Conj(
            items.into_iter().map(lower_qexpr).collect::<Result<_>>()?,
        )),
        QExpr::Disj(items) => Ok(QExpr::Disj(
            items.into_iter().map(lower_qexpr).collect::<Result<_>>()?,
        )),
        QExpr::Suffixed(inner, suffix) => {
            let suffix = lower_ep(suffix)?;
            distribute_suffix(*inner, &suffix)
        }
    }
}

fn distribute_suffix(q: QExpr, suffix: &Ep) -> Result<QExpr> {
    match q {
        QExpr::Doc { doc, pattern: None } => {
            Ok(QExpr::Doc { doc, pattern: Some(suffix.clone()) })
        }
        QExpr::Doc { pattern: Some(p), doc } => Ok(QExpr::Doc {
            doc,
            pattern: Some(lower_ep(Ep::Tree(Box::new(p), Box::new(suffix.clone())))?),
        }),
        QExpr::Disj(items) => Ok(QExpr::Disj(
            items
                .into_iter()
                .map(|i| distribute_suffix(i, suffix))
                .collect::<Result<_>>()?,
        )),
        QExpr::Conj(items) => Ok(QExpr::Conj(
            items
                .into_iter()
                .map(|i| distribute_suffix(i, suffix))
                .collect::<Result<_>>()?,
        )),
        QExpr::Suffixed(inner, s) => {
            let q = distribute_suffix(*inner, &s)?;
            distribute_suffix(q, suffix)
        }
        q @ (QExpr::Input { .. } | QExpr::Func { .. }) => Err(Error::syntax(
            1,
            1,
            format!("a pattern suffix cannot apply to this source: {q:?}"),
        )),
    }
}

/// Push tree bodies through disjunctive roots so every tree has a path root.
fn lower_ep(ep: Ep) -> Result<Ep> {
    Ok(match ep {
        p @ Ep::Path(_, _) => p,
        Ep::Tree(root, body) => {
            let body = lower_ep(*body)?;
            match lower_ep(*root)? {
                Ep::Disj(roots) => Ep::Disj(
                    roots
                        .into_iter()
                        .map(|r| lower_ep(Ep::Tree(Box::new(r), Box::new(body.clone()))))
                        .collect::<Result<_>>()?,
                ),
                root @ Ep::Path(_, _) => Ep::Tree(Box::new(root), Box::new(body)),
                Ep::Tree(a, b) => {
                    // ((a)(b))(c) keeps nesting rightwards: a(b(c))
                    lower_ep(Ep::Tree(a, Box::new(Ep::Tree(b, Box::new(body)))))?
                }
                other => {
                    return Err(Error::syntax(
                        1,
                        1,
                        format!("this pattern cannot be the root of a tree: {other:?}"),
                    ))
                }
            }
        }
        Ep::Fold(a, b) => Ep::Fold(Box::new(lower_ep(*a)?), Box::new(lower_ep(*b)?)),
        Ep::Conj(items) => {
            Ep::Conj(items.into_iter().map(lower_ep).collect::<Result<_>>()?)
        }
        Ep::Disj(items) => {
            Ep::Disj(items.into_iter().map(lower_ep).collect::<Result<_>>()?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn ds(src: &str) -> Program {
        desugar(parse_program(src).expect("parse")).expect("desugar")
    }

    #[test]
    fn fills_abbreviated_atoms() {
        let p = ds(r#"query doc("bib.xml")//book(/title=>$t) construct {title=>$t}"#);
        match &p.statement.query {
            QExpr::Doc { pattern: Some(Ep::Tree(root, _)), .. } => match &**root {
                Ep::Path(_, atom) => {
                    assert!(matches!(&atom.content, Some(AtomSide::Var(v)) if v.starts_with(GEN_PREFIX)))
                }
                other => panic!("expected path, got {other:?}"),
            },
            other => panic!("expected tree under doc, got {other:?}"),
        }
    }

    #[test]
    fn distributes_composite_sources_sharing_variables() {
        let p = ds(r#"query (doc("a.xml")||doc("b.xml")||doc("c.xml"))(//book(/title=>$t))
                      construct {title=>$t}"#);
        match &p.statement.query {
            QExpr::Disj(items) => {
                assert_eq!(items.len(), 3);
                let pats: Vec<_> = items
                    .iter()
                    .map(|i| match i {
                        QExpr::Doc { pattern: Some(p), .. } => p.clone(),
                        other => panic!("expected doc, got {other:?}"),
                    })
                    .collect();
                assert_eq!(pats[0], pats[1]);
                assert_eq!(pats[1], pats[2]);
            }
            other => panic!("expected disjunction, got {other:?}"),
        }
    }

    #[test]
    fn distributes_tree_bodies_through_disjunctive_roots() {
        let p = ds(r#"query doc("bib.xml")//book((/author=>$a||/editor=>$e)(/email=>$m))
                      construct {email=>$m}"#);
        let body = match &p.statement.query {
            QExpr::Doc { pattern: Some(Ep::Tree(_, body)), .. } => body,
            other => panic!("expected tree, got {other:?}"),
        };
        match &**body {
            Ep::Disj(branches) => {
                assert_eq!(branches.len(), 2);
                for b in branches {
                    match b {
                        Ep::Tree(_, inner) => match &**inner {
                            Ep::Path(_, atom) => {
                                assert_eq!(atom.content, Some(AtomSide::Var("$m".into())))
                            }
                            other => panic!("expected path, got {other:?}"),
                        },
                        other => panic!("expected tree, got {other:?}"),
                    }
                }
            }
            other => panic!("expected disjunction, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bare_documents() {
        let r = desugar(parse_program(r#"query doc("a.xml") construct nil"#).unwrap());
        assert!(r.is_err());
    }
}
