//! Pattern matching: evaluating document extraction patterns over fragments.
//!
//! Every atomic pattern is matched per element; `/` ranges over the children
//! of a fragment and `//` over each element and its descendants in document
//! order.  Mismatches yield null bindings which the `#` reduction removes
//! from the resulting sets (or collapses to a null singleton when nothing
//! matched at all).

use crate::bind::{reduce_nulls, reident, Binding, IdGen, Member, Val};
use crate::sxd::{fragment_equiv, text_of, Fragment, XContent, XElem};
use crate::syntax::{AtomPtn, AtomSide, Axis, Ep};

/// Match a document extraction pattern against a fragment.
pub fn match_document(d: &Fragment, p: &Ep, ids: &mut IdGen) -> Binding {
    match p {
        Ep::Path(axis, atom) => {
            let members = locate(d, *axis)
                .into_iter()
                .map(|e| Member::new(ids.fresh(), match_atom(e, atom)))
                .collect();
            Binding::Set(reduce_nulls(members))
        }
        Ep::Tree(root, body) => {
            let Ep::Path(axis, atom) = root.as_ref() else {
                // lowering leaves only path roots; anything else cannot match
                return Binding::Set(vec![Member::new(ids.fresh(), Binding::NullUnit)]);
            };
            let members = locate(d, *axis)
                .into_iter()
                .map(|e| {
                    let rb = match_atom(e, atom);
                    let b = if rb.is_null() {
                        rb
                    } else {
                        let inner = match_document(&children_of(e), body, ids);
                        Binding::tuple(vec![rb, inner])
                    };
                    Member::new(ids.fresh(), b)
                })
                .collect();
            Binding::Set(reduce_nulls(members))
        }
        Ep::Fold(first, rest) => {
            let folded = match_document(d, first, ids);
            let Binding::Set(ms) = folded else { return folded };
            if ms.len() == 1 && ms[0].b.is_null() {
                return Binding::Set(ms);
            }
            let shared = match_document(d, rest, ids);
            let members = ms
                .into_iter()
                .map(|m| Member {
                    prov: m.prov,
                    b: Binding::tuple(vec![m.b, reident(&shared, ids)]),
                })
                .collect();
            Binding::Set(members)
        }
        Ep::Conj(items) => {
            Binding::tuple(items.iter().map(|p| match_document(d, p, ids)).collect())
        }
        Ep::Disj(items) => {
            Binding::dunion(items.iter().map(|p| match_document(d, p, ids)).collect())
        }
    }
}

/// The elements an axis ranges over: children, or each element followed by
/// its descendants in document order.
fn locate(d: &Fragment, axis: Axis) -> Vec<&XElem> {
    match axis {
        Axis::Child => d.iter().collect(),
        Axis::Descendant => {
            let mut out = Vec::new();
            for e in d.iter() {
                preorder(e, &mut out);
            }
            out
        }
    }
}

fn preorder<'a>(e: &'a XElem, out: &mut Vec<&'a XElem>) {
    out.push(e);
    if let XContent::Nodes(fr) = &e.content {
        for c in fr.iter() {
            preorder(c, out);
        }
    }
}

fn children_of(e: &XElem) -> Fragment {
    match &e.content {
        XContent::Nodes(fr) => fr.clone(),
        XContent::Text(_) => Fragment::default(),
    }
}

/// Match one element against an atomic pattern.
fn match_atom(e: &XElem, atom: &AtomPtn) -> Binding {
    let name_fits = match &atom.name {
        AtomSide::Name(n) => Some(n == &e.name),
        AtomSide::Var(_) => None,
        AtomSide::Const(c) => Some(c == &e.name),
    };
    match (&atom.name, &atom.content) {
        (AtomSide::Var(x), Some(AtomSide::Var(y))) => Binding::tuple(vec![
            Binding::bound(x.clone(), Val::Name(e.name.clone()), e.location.clone()),
            Binding::bound(y.clone(), Val::Cont(e.content.clone()), e.location.clone()),
        ]),
        (AtomSide::Var(x), Some(AtomSide::Const(c))) => {
            if content_matches(&e.content, c) {
                Binding::bound(x.clone(), Val::Name(e.name.clone()), e.location.clone())
            } else {
                Binding::null(x.clone())
            }
        }
        (AtomSide::Var(x), None) => {
            Binding::bound(x.clone(), Val::Name(e.name.clone()), e.location.clone())
        }
        (_, Some(AtomSide::Var(y))) => {
            if name_fits == Some(true) {
                Binding::bound(y.clone(), Val::Cont(e.content.clone()), e.location.clone())
            } else {
                Binding::null(y.clone())
            }
        }
        (_, Some(AtomSide::Const(c))) | (_, Some(AtomSide::Name(c))) => {
            if name_fits == Some(true) && content_matches(&e.content, c) {
                Binding::Unit
            } else {
                Binding::NullUnit
            }
        }
        (_, None) => {
            if name_fits == Some(true) {
                Binding::Unit
            } else {
                Binding::NullUnit
            }
        }
    }
}

/// Does element content equal a constant?  Text content compares directly;
/// node content must be the single text run carrying the constant.
fn content_matches(c: &XContent, s: &str) -> bool {
    match c {
        XContent::Text(t) => t == s,
        XContent::Nodes(fr) => {
            if fr.is_empty() {
                s.is_empty()
            } else {
                fr.len() == 1 && fr.0[0].is_text() && text_of(c) == s
            }
        }
    }
}

/// Value-level structural equality of two contents, locations aside.
pub fn content_equiv(a: &XContent, b: &XContent) -> bool {
    match (a, b) {
        (XContent::Text(x), XContent::Text(y)) => x == y,
        (XContent::Nodes(x), XContent::Nodes(y)) => fragment_equiv(x, y),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bind::accords;
    use crate::sxd::{parse_xml, Location};
    use crate::syntax::{parse_pattern, parse_program};
    use crate::term::mt_ep;

    const BIB: &str = include_str!("../tests/corpus/bib.xml");

    fn bib() -> Fragment {
        parse_xml(BIB.as_bytes(), 1).expect("corpus document parses")
    }

    fn pattern(src: &str) -> Ep {
        parse_pattern(src).expect("pattern parses")
    }

    fn run(doc: &Fragment, src: &str) -> Binding {
        let mut ids = IdGen::default();
        match_document(doc, &pattern(src), &mut ids)
    }

    fn atom_text(b: &Binding) -> (String, Vec<u32>) {
        match b {
            Binding::Var(_, Some((v, l))) => {
                let path = match l {
                    Location::At { path, .. } => path.clone(),
                    Location::Null => Vec::new(),
                };
                (v.text(), path)
            }
            other => panic!("expected a bound atom, got {other}"),
        }
    }

    #[test]
    fn matches_children_and_descendants() {
        let doc = bib();
        let b = run(&doc, "//author=>$a");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        assert_eq!(ms.len(), 4);
        assert!(ms.iter().all(|m| !m.b.is_null()));
        // children of the root see no author elements
        let b = run(&doc, "/author=>$a");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        assert_eq!(ms.len(), 1);
        assert!(ms[0].b.is_null());
    }

    #[test]
    fn attribute_and_constant_atoms() {
        let doc = bib();
        let b = run(&doc, "//book=>$b/@year=>$y");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        assert_eq!(ms.len(), 2);
        let Binding::Tuple(parts) = &ms[0].b else { panic!("expected a tuple") };
        let Binding::Set(years) = &parts[1] else { panic!("expected a year set") };
        let (y, path) = atom_text(&years[0].b);
        assert_eq!(y, "1996");
        assert_eq!(path, vec![1, 1, 1]);
        // constant content keeps only the matching member
        let b = run(&doc, "//book=>$b/@year=>\"1989\"");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        let hits: Vec<bool> = ms
            .iter()
            .map(|m| match &m.b {
                Binding::Tuple(parts) => matches!(&parts[1],
                    Binding::Set(ys) if ys.len() == 1 && !ys[0].b.is_null()),
                other => panic!("expected a tuple, got {other}"),
            })
            .collect();
        assert_eq!(hits, vec![false, true]);
    }

    #[test]
    fn name_variables_bind_names() {
        let doc = parse_xml(b"<a><x>1</x><y>2</y></a>", 1).unwrap();
        let b = run(&doc, "//a=>$c/$n=>$v");
        let Binding::Set(outer) = &b else { panic!("expected a set") };
        let Binding::Tuple(parts) = &outer[0].b else { panic!("expected a tuple") };
        let Binding::Set(pairs) = &parts[1] else { panic!("expected a set") };
        assert_eq!(pairs.len(), 2);
        let Binding::Tuple(nv) = &pairs[0].b else { panic!("expected a pair") };
        assert_eq!(atom_text(&nv[0]).0, "x");
        assert_eq!(atom_text(&nv[1]).0, "1");
    }

    #[test]
    fn folding_duplicates_the_shared_side() {
        let doc = bib();
        let b = run(&doc, "//book=>$b(/author=>$a;/editor=>$e)");
        let Binding::Set(books) = &b else { panic!("expected a set") };
        let Binding::Tuple(parts) = &books[0].b else { panic!("expected a tuple") };
        let Binding::Set(pairs) = &parts[1] else { panic!("expected the fold set") };
        assert_eq!(pairs.len(), 2, "one pair per author of the first book");
        for m in pairs {
            let Binding::Tuple(pair) = &m.b else { panic!("expected a pair") };
            assert_eq!(pair.len(), 2);
            let Binding::Set(editors) = &pair[1] else { panic!("expected editors") };
            assert_eq!(editors.len(), 1);
        }
        // the duplicated editor sets carry distinct member identifiers
        let (Binding::Tuple(p0), Binding::Tuple(p1)) = (&pairs[0].b, &pairs[1].b) else {
            panic!("expected pairs");
        };
        let (Binding::Set(e0), Binding::Set(e1)) = (&p0[1], &p1[1]) else {
            panic!("expected editor sets");
        };
        assert_ne!(e0[0].prov, e1[0].prov);
        assert!(e0[0].b.equiv(&e1[0].b));
    }

    #[test]
    fn fold_with_no_matches_keeps_the_null_singleton() {
        let doc = bib();
        let b = run(&doc, "//book=>$b(/translator=>$x;/editor=>$e)");
        let Binding::Set(books) = &b else { panic!("expected a set") };
        let Binding::Tuple(parts) = &books[0].b else { panic!("expected a tuple") };
        let Binding::Set(fold) = &parts[1] else { panic!("expected the fold set") };
        assert_eq!(fold.len(), 1);
        assert!(fold[0].b.is_null());
    }

    #[test]
    fn produces_the_running_example_binding() {
        let doc = bib();
        let ep = pattern(
            "//book=>$b(/title=>$t, (/author=>$a(/last=>$l,/first=>$f) ||
                                     /editor=>$e(/last=>$l,/first=>$f)))",
        );
        let mut ids = IdGen::default();
        let b = match_document(&doc, &ep, &mut ids);
        assert!(accords(&b, &mt_ep(&ep).unwrap()));

        let Binding::Set(books) = &b else { panic!("expected a set") };
        assert_eq!(books.len(), 2);
        let Binding::Tuple(first) = &books[0].b else { panic!("expected a tuple") };
        assert_eq!(first.len(), 3);
        assert_eq!(atom_text(&first[0]).1, vec![1, 1]);
        let Binding::Set(titles) = &first[1] else { panic!("expected titles") };
        assert_eq!(
            atom_text(&titles[0].b).0,
            "Selected Poems And Four Plays of William Butler Yeats"
        );
        let Binding::DUnion(branches) = &first[2] else { panic!("expected a d-union") };
        let (Binding::Set(authors), Binding::Set(editors)) = (&branches[0], &branches[1])
        else {
            panic!("expected author and editor sets");
        };
        assert_eq!((authors.len(), editors.len()), (2, 1));
        let Binding::Tuple(a1) = &authors[0].b else { panic!("expected a tuple") };
        assert_eq!(a1.len(), 3);
        assert_eq!(atom_text(&a1[0]).1, vec![1, 1, 3]);
        let (Binding::Set(ls), Binding::Set(fs)) = (&a1[1], &a1[2]) else {
            panic!("expected last/first sets");
        };
        assert_eq!(atom_text(&ls[0].b), ("Yeats".into(), vec![1, 1, 3, 1]));
        assert_eq!(atom_text(&fs[0].b), ("Willam".into(), vec![1, 1, 3, 2]));
        // second book: two authors, two editors
        let Binding::Tuple(second) = &books[1].b else { panic!("expected a tuple") };
        let Binding::DUnion(branches) = &second[2] else { panic!("expected a d-union") };
        let (Binding::Set(authors), Binding::Set(editors)) = (&branches[0], &branches[1])
        else {
            panic!("expected author and editor sets");
        };
        assert_eq!((authors.len(), editors.len()), (2, 2));
        let Binding::Tuple(e2) = &editors[1].b else { panic!("expected a tuple") };
        let (Binding::Set(ls), Binding::Set(fs)) = (&e2[1], &e2[2]) else {
            panic!("expected last/first sets");
        };
        assert_eq!(atom_text(&ls[0].b).0, "Jarolim");
        assert_eq!(atom_text(&fs[0].b).0, "Edie");
    }

    #[test]
    fn null_reduction_inside_trees() {
        let doc = parse_xml(b"<r><a><k>1</k></a><b><k>2</k></b></r>", 1).unwrap();
        // only <a> carries the root name; <b> members reduce away
        let b = run(&doc, "//a=>$x/k=>$k");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        assert_eq!(ms.len(), 1);
        // nothing matches at all: the null singleton remains
        let b = run(&doc, "//c=>$x/k=>$k");
        let Binding::Set(ms) = &b else { panic!("expected a set") };
        assert_eq!(ms.len(), 1);
        assert!(ms[0].b.is_null());
    }

    #[test]
    fn bindings_accord_their_patterns() {
        let doc = bib();
        for src in [
            "//book=>$b",
            "//book=>$b(/title=>$t,/author=>$a)",
            "//book=>$b(/author=>$a;/editor=>$e)",
            "//book=>$b(/author=>$a(/last=>$l)||/editor=>$e(/last=>$l))",
            "//$n=>$v",
            "//book=>$b/@year=>\"1996\"",
        ] {
            let ep = pattern(src);
            let mut ids = IdGen::default();
            let b = match_document(&doc, &ep, &mut ids);
            let t = mt_ep(&ep).unwrap();
            assert!(accords(&b, &t), "{src}: {b} does not accord {t}");
        }
    }

    #[test]
    fn full_statement_patterns_accord() {
        let src = r#"query doc("bib.xml")//book=>$b(/title=>$t,
                        (/author=>$a||/editor=>$e)(/last=>$l, /first=>$f))
                     construct {result=>($t,$l)}"#;
        let p = crate::syntax::desugar(parse_program(src).unwrap()).unwrap();
        let crate::syntax::QExpr::Doc { pattern: Some(ep), .. } = &p.statement.query
        else {
            panic!("expected a doc source");
        };
        let mut ids = IdGen::default();
        let b = match_document(&bib(), ep, &mut ids);
        assert!(accords(&b, &mt_ep(ep).unwrap()));
    }
}
