//! Bindings: the values produced by matching patterns against documents.
//!
//! A binding mirrors the shape of a matching term: atoms bind variables to
//! located values, and tuples, d-unions and sets compose them.  Set members
//! carry provenance identifiers so filtering can tell apart duplicated
//! sub-bindings that came from the same document node.

use std::fmt;

use crate::sxd::{fragment_equiv, to_sxd, Fragment, Location, XContent};
use crate::term::Term;

/// A value bound to a variable: an element's content, or its name.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Cont(XContent),
    Name(String),
}

impl Val {
    /// Value equality up to locations inside fragments.
    pub fn equiv(&self, other: &Val) -> bool {
        match (self, other) {
            (Val::Name(a), Val::Name(b)) => a == b,
            (Val::Cont(XContent::Text(a)), Val::Cont(XContent::Text(b))) => a == b,
            (Val::Cont(XContent::Nodes(a)), Val::Cont(XContent::Nodes(b))) => {
                fragment_equiv(a, b)
            }
            // a lone text run and its node form denote different shapes
            _ => false,
        }
    }

    /// The character data of the value.
    pub fn text(&self) -> String {
        match self {
            Val::Name(n) => n.clone(),
            Val::Cont(c) => crate::sxd::text_of(c),
        }
    }

    pub fn as_fragment(&self) -> Option<&Fragment> {
        match self {
            Val::Cont(XContent::Nodes(f)) => Some(f),
            _ => None,
        }
    }
}

/// Identifier of a set member used for filtering provenance.
pub type MemberId = u64;

/// Deterministic source of member identifiers.
#[derive(Debug, Default)]
pub struct IdGen(u64);

impl IdGen {
    pub fn fresh(&mut self) -> MemberId {
        self.0 += 1;
        self.0
    }
}

/// A member of a set binding together with the identifiers of the extraction
/// members it derives from.
#[derive(Debug, Clone)]
pub struct Member {
    pub prov: Vec<MemberId>,
    pub b: Binding,
}

impl Member {
    pub fn new(id: MemberId, b: Binding) -> Member {
        Member { prov: vec![id], b }
    }

    pub fn merged_prov(a: &[MemberId], b: &[MemberId]) -> Vec<MemberId> {
        let mut v: Vec<MemberId> = a.iter().chain(b).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone)]
pub enum Binding {
    /// `x ↦ (v, l)` when bound, `x ↦ null` on a mismatch.
    Var(String, Option<(Val, Location)>),
    /// `ε` — the successful match of a pattern binding nothing.
    Unit,
    /// A failed match of a pattern binding nothing; reduced like a null.
    NullUnit,
    Tuple(Vec<Binding>),
    DUnion(Vec<Binding>),
    Set(Vec<Member>),
    /// A binding known to take one branch of an option term:
    /// `Branch(i, n, b)` accords branch `i` of an `n`-branch option.
    Branch(usize, usize, Box<Binding>),
    /// `⊥` — a binding eliminated by filtering.
    False,
}

impl Binding {
    pub fn bound(var: impl Into<String>, v: Val, l: Location) -> Binding {
        Binding::Var(var.into(), Some((v, l)))
    }

    pub fn null(var: impl Into<String>) -> Binding {
        Binding::Var(var.into(), None)
    }

    /// Conjunctive composition: associative, with `ε` as the identity.
    pub fn tuple(parts: Vec<Binding>) -> Binding {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Binding::Tuple(inner) => out.extend(inner),
                Binding::Unit => {}
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Binding::Unit,
            1 => out.pop().unwrap(),
            _ => Binding::Tuple(out),
        }
    }

    /// Disjunctive composition: associative.
    pub fn dunion(parts: Vec<Binding>) -> Binding {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Binding::DUnion(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Binding::DUnion(out)
        }
    }

    pub fn branch(i: usize, of: usize, b: Binding) -> Binding {
        Binding::Branch(i, of, Box::new(b))
    }

    /// Is this binding null (a mismatch)?  Tuples are null when any component
    /// is; d-unions when every branch is.  Sets are never null themselves —
    /// they may contain a null singleton instead.
    pub fn is_null(&self) -> bool {
        match self {
            Binding::Var(_, v) => v.is_none(),
            Binding::NullUnit => true,
            Binding::Unit | Binding::Set(_) => false,
            Binding::Tuple(bs) => bs.iter().any(Binding::is_null),
            Binding::DUnion(bs) => bs.iter().all(Binding::is_null),
            Binding::Branch(_, _, b) => b.is_null(),
            Binding::False => false,
        }
    }

    /// `%(b)`: replace every location bound to a variable by the null
    /// location.
    pub fn content_projection(&self) -> Binding {
        match self {
            Binding::Var(x, Some((v, _))) => {
                Binding::Var(x.clone(), Some((v.clone(), Location::Null)))
            }
            Binding::Var(..) | Binding::Unit | Binding::NullUnit | Binding::False => {
                self.clone()
            }
            Binding::Tuple(bs) => {
                Binding::Tuple(bs.iter().map(Binding::content_projection).collect())
            }
            Binding::DUnion(bs) => {
                Binding::DUnion(bs.iter().map(Binding::content_projection).collect())
            }
            Binding::Set(ms) => Binding::Set(
                ms.iter()
                    .map(|m| Member { prov: m.prov.clone(), b: m.b.content_projection() })
                    .collect(),
            ),
            Binding::Branch(i, n, b) => {
                Binding::Branch(*i, *n, Box::new(b.content_projection()))
            }
        }
    }

    /// Structural equality: shapes, variable names, values (up to fragment
    /// locations) and the locations of the atoms themselves.  Member
    /// identifiers are ignored.
    pub fn equiv(&self, other: &Binding) -> bool {
        match (self, other) {
            (Binding::Var(x, a), Binding::Var(y, b)) => {
                x == y
                    && match (a, b) {
                        (None, None) => true,
                        (Some((v, l)), Some((w, k))) => l == k && v.equiv(w),
                        _ => false,
                    }
            }
            (Binding::Unit, Binding::Unit) => true,
            (Binding::NullUnit, Binding::NullUnit) => true,
            (Binding::False, Binding::False) => true,
            (Binding::Tuple(a), Binding::Tuple(b))
            | (Binding::DUnion(a), Binding::DUnion(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.equiv(y))
            }
            (Binding::Set(a), Binding::Set(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.b.equiv(&y.b))
            }
            (Binding::Branch(i, n, a), Binding::Branch(j, m, b)) => {
                i == j && n == m && a.equiv(b)
            }
            _ => false,
        }
    }

    /// All locations bound to variables are the null location.
    pub fn is_content(&self) -> bool {
        match self {
            Binding::Var(_, Some((_, l))) => l.is_null(),
            Binding::Var(_, None)
            | Binding::Unit
            | Binding::NullUnit
            | Binding::False => true,
            Binding::Tuple(bs) | Binding::DUnion(bs) => {
                bs.iter().all(Binding::is_content)
            }
            Binding::Set(ms) => ms.iter().all(|m| m.b.is_content()),
            Binding::Branch(_, _, b) => b.is_content(),
        }
    }
}

/// Reduce the redundant null bindings of a set: if every member is null the
/// set collapses to a singleton null, otherwise the nulls are removed.
pub fn reduce_nulls(mut members: Vec<Member>) -> Vec<Member> {
    if members.is_empty() {
        return members;
    }
    if members.iter().all(|m| m.b.is_null()) {
        members.truncate(1);
        members
    } else {
        members.retain(|m| !m.b.is_null());
        members
    }
}

/// A structural copy with fresh member identifiers throughout, used when a
/// sub-binding is duplicated and the copies must be filterable independently.
pub fn reident(b: &Binding, ids: &mut IdGen) -> Binding {
    match b {
        Binding::Set(ms) => Binding::Set(
            ms.iter()
                .map(|m| Member { prov: vec![ids.fresh()], b: reident(&m.b, ids) })
                .collect(),
        ),
        Binding::Tuple(bs) => {
            Binding::Tuple(bs.iter().map(|c| reident(c, ids)).collect())
        }
        Binding::DUnion(bs) => {
            Binding::DUnion(bs.iter().map(|c| reident(c, ids)).collect())
        }
        Binding::Branch(i, n, inner) => {
            Binding::Branch(*i, *n, Box::new(reident(inner, ids)))
        }
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// accordance
// ---------------------------------------------------------------------------

/// Does the binding accord with the matching term?
pub fn accords(b: &Binding, t: &Term) -> bool {
    match t {
        Term::Opt(branches) => match b {
            Binding::Branch(i, n, inner) => {
                *n == branches.len() && *i < *n && accords(inner, &branches[*i])
            }
            _ => branches.iter().any(|br| accords(b, br)),
        },
        Term::Content(inner) => b.is_content() && accords(b, inner),
        _ => match b {
            Binding::Var(x, _) => matches!(t, Term::Var(y) if x == y),
            Binding::Unit | Binding::NullUnit => matches!(t, Term::Eps),
            Binding::Tuple(bs) => match t {
                // components pair up in any order: terms are read modulo
                // tuple commutativity
                Term::Tuple(ts) => {
                    (bs.len() == ts.len() && components_accord(bs, ts))
                        || null_extension(b, ts)
                }
                _ => false,
            },
            Binding::DUnion(bs) => match t {
                Term::DUnion(ts) => bs.len() == ts.len() && components_accord(bs, ts),
                _ => false,
            },
            Binding::Set(ms) => match t {
                Term::Set { elem, index, .. } => accords_set(ms, elem, index),
                _ => false,
            },
            Binding::Branch(..) => false,
            Binding::False => false,
        },
    }
}

/// A null binding accords with a wider tuple when it accords with one of the
/// components.
fn null_extension(b: &Binding, ts: &[Term]) -> bool {
    if !b.is_null() {
        return false;
    }
    if let Binding::Tuple(bs) = b {
        // the null tuple matches part of the components; the rest is padding
        bs.len() <= ts.len() && matching(bs, ts, &mut vec![false; ts.len()])
    } else {
        ts.iter().any(|tc| accords(b, tc))
    }
}

/// Pair every binding component with a distinct according term component.
fn components_accord(bs: &[Binding], ts: &[Term]) -> bool {
    matching(bs, ts, &mut vec![false; ts.len()])
}

fn matching(bs: &[Binding], ts: &[Term], used: &mut [bool]) -> bool {
    let Some((b, rest)) = bs.split_first() else {
        return true;
    };
    for (i, t) in ts.iter().enumerate() {
        if !used[i] && accords(b, t) {
            used[i] = true;
            if matching(rest, ts, used) {
                return true;
            }
            used[i] = false;
        }
    }
    false
}

fn accords_set(ms: &[Member], elem: &Term, index: &Term) -> bool {
    for m in ms {
        let fits = accords(&m.b, elem)
            || (m.b.is_null() && {
                if let Term::Tuple(ts) = elem {
                    null_extension(&m.b, ts)
                } else {
                    accords(&m.b, elem)
                }
            });
        if !fits {
            return false;
        }
    }
    // every member carries a unique sub-binding of the index, and members
    // are told apart by it
    if matches!(index, Term::Eps) {
        return true;
    }
    let mut keys: Vec<Binding> = Vec::with_capacity(ms.len());
    for m in ms {
        match index_sub_binding(&m.b, index) {
            Some(k) => keys.push(k),
            None => return m.b.is_null() && ms.len() == 1,
        }
    }
    if ms.len() > 1 {
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                if keys[i].equiv(&keys[j]) {
                    return false;
                }
            }
        }
    }
    true
}

/// The sub-binding of the index term occurring in a member binding, when it
/// is unique.  Candidates are searched through tuple components and branch
/// markers; distinct candidates for the same unit make the member invalid.
pub fn index_sub_binding(b: &Binding, r: &Term) -> Option<Binding> {
    match r {
        Term::Eps => Some(Binding::Unit),
        Term::Var(x) => {
            let mut found: Option<Binding> = None;
            collect_var(b, x, &mut found)?;
            found
        }
        Term::Content(inner) => {
            index_sub_binding(b, inner).map(|s| s.content_projection())
        }
        Term::Tuple(units) => {
            let mut parts = Vec::with_capacity(units.len());
            for u in units {
                parts.push(index_sub_binding(b, u)?);
            }
            Some(Binding::Tuple(parts))
        }
        Term::Opt(branches) => {
            // the branch the binding actually takes
            if let Some(i) = branch_taken(b, branches.len()) {
                return index_sub_binding(b, &branches[i]);
            }
            branches.iter().find_map(|br| index_sub_binding(b, br))
        }
        Term::DUnion(_) | Term::Set { .. } => None,
    }
}

/// Collect the unique atom for variable `x`; `None` result via `?` marks a
/// conflict between distinct occurrences.
fn collect_var(b: &Binding, x: &str, found: &mut Option<Binding>) -> Option<()> {
    match b {
        Binding::Var(y, _) if y == x => match found {
            Some(prev) if !prev.equiv(b) => None,
            Some(_) => Some(()),
            None => {
                *found = Some(b.clone());
                Some(())
            }
        },
        Binding::Tuple(bs) | Binding::DUnion(bs) => {
            for c in bs {
                collect_var(c, x, found)?;
            }
            Some(())
        }
        Binding::Branch(_, _, inner) => collect_var(inner, x, found),
        _ => Some(()),
    }
}

fn branch_taken(b: &Binding, of: usize) -> Option<usize> {
    match b {
        Binding::Branch(i, n, _) if *n == of => Some(*i),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// display
// ---------------------------------------------------------------------------

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Var(x, None) => write!(f, "{x}->null"),
            Binding::Var(x, Some((v, l))) => {
                let shown = match v {
                    Val::Name(n) => format!("'{n}'"),
                    Val::Cont(XContent::Text(s)) => format!("{s:?}"),
                    Val::Cont(XContent::Nodes(fr)) => to_sxd(fr),
                };
                if l.is_null() {
                    write!(f, "{x}->({shown})")
                } else {
                    write!(f, "{x}->({shown},{l})")
                }
            }
            Binding::Unit => f.write_str("~"),
            Binding::NullUnit => f.write_str("null"),
            Binding::False => f.write_str("_|_"),
            Binding::Tuple(bs) => {
                f.write_str("(")?;
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str(")")
            }
            Binding::DUnion(bs) => {
                f.write_str("(")?;
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("||")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str(")")
            }
            Binding::Set(ms) => {
                f.write_str("{")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", m.b)?;
                }
                f.write_str("}")
            }
            Binding::Branch(i, _, b) => write!(f, "<{i}:{b}>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sxd::XElem;

    fn loc(path: &[u32]) -> Location {
        Location::at(1, path.to_vec())
    }

    fn text_val(s: &str) -> Val {
        Val::Cont(XContent::Nodes(Fragment::one(XElem::text(s, Location::Null))))
    }

    #[test]
    fn nullness_follows_the_composition() {
        let live = Binding::bound("$a", text_val("x"), loc(&[1]));
        let dead = Binding::null("$b");
        assert!(!live.is_null());
        assert!(dead.is_null());
        assert!(Binding::Tuple(vec![live.clone(), dead.clone()]).is_null());
        assert!(!Binding::DUnion(vec![live.clone(), dead.clone()]).is_null());
        assert!(Binding::DUnion(vec![dead.clone(), dead.clone()]).is_null());
        assert!(!Binding::Set(vec![Member::new(1, dead.clone())]).is_null());
    }

    #[test]
    fn reduction_removes_or_collapses_nulls() {
        let live = Member::new(1, Binding::bound("$a", text_val("x"), loc(&[1])));
        let dead = Member::new(2, Binding::null("$a"));
        let dead2 = Member::new(3, Binding::null("$a"));
        let r = reduce_nulls(vec![live.clone(), dead.clone()]);
        assert_eq!(r.len(), 1);
        assert!(!r[0].b.is_null());
        let r = reduce_nulls(vec![dead, dead2]);
        assert_eq!(r.len(), 1);
        assert!(r[0].b.is_null());
        assert!(reduce_nulls(Vec::new()).is_empty());
    }

    #[test]
    fn projection_blanks_atom_locations() {
        let b = Binding::Tuple(vec![
            Binding::bound("$l", text_val("Yeats"), loc(&[1, 2])),
            Binding::bound("$f", text_val("Willam"), loc(&[1, 3])),
        ]);
        let p = b.content_projection();
        assert!(p.is_content());
        assert!(!b.is_content());
        // values survive, locations do not
        assert!(p.equiv(&Binding::Tuple(vec![
            Binding::bound("$l", text_val("Yeats"), Location::Null),
            Binding::bound("$f", text_val("Willam"), Location::Null),
        ])));
    }

    #[test]
    fn accordance_of_composites() {
        use crate::syntax::parse_term;
        use crate::term::from_user;
        let t = from_user(&parse_term("{($b,$t)}").unwrap());
        let m1 = Binding::Tuple(vec![
            Binding::bound("$b", text_val("one"), loc(&[1])),
            Binding::bound("$t", text_val("t1"), loc(&[1, 1])),
        ]);
        let m2 = Binding::Tuple(vec![
            Binding::bound("$b", text_val("two"), loc(&[2])),
            Binding::bound("$t", text_val("t2"), loc(&[2, 1])),
        ]);
        let ok = Binding::Set(vec![Member::new(1, m1.clone()), Member::new(2, m2)]);
        assert!(accords(&ok, &t));
        // duplicated index sub-bindings break accordance
        let dup = Binding::Set(vec![Member::new(1, m1.clone()), Member::new(2, m1)]);
        assert!(!accords(&dup, &t));
        // a null member accords a wider tuple term
        let null_set = Binding::Set(vec![Member::new(3, Binding::null("$b"))]);
        assert!(accords(&null_set, &t));
    }

    #[test]
    fn branch_markers_accord_their_option_side() {
        use crate::syntax::parse_term;
        use crate::term::from_user;
        let t = from_user(&parse_term("($a|$e)").unwrap());
        let a = Binding::branch(0, 2, Binding::bound("$a", text_val("x"), loc(&[1])));
        let e = Binding::branch(1, 2, Binding::bound("$e", text_val("y"), loc(&[2])));
        assert!(accords(&a, &t));
        assert!(accords(&e, &t));
        let wrong = Binding::branch(1, 2, Binding::bound("$a", text_val("x"), loc(&[1])));
        assert!(!accords(&wrong, &t));
        // unmarked bindings may take either side
        assert!(accords(&Binding::bound("$e", text_val("y"), loc(&[2])), &t));
    }
}
