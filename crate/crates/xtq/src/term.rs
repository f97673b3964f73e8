//! Matching terms: the structural sketch of extracted data.
//!
//! A term describes the shape of a binding — which variables are grouped in
//! tuples, which alternate in d-unions or options, and how sets nest.  The
//! restructuring rules rewrite a term (and, in lockstep, its binding) into
//! the shape a construction pattern expects.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{AtomSide, Cp, Ep, NamePtn, QExpr, UTerm};

/// A matching term.  Tuples are kept flat (associativity) and empty terms are
/// dropped from them (extension); comparisons go through [`Term::equiv`],
/// which also ignores component order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Tuple(Vec<Term>),
    DUnion(Vec<Term>),
    Opt(Vec<Term>),
    Set {
        elem: Box<Term>,
        index: Box<Term>,
        /// Set by the fold rule; folded sets cannot take part in distribution.
        folded: bool,
    },
    /// `t%` — the content projection of a term, with locations dropped.
    Content(Box<Term>),
    /// The empty term, written `~`.
    Eps,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    /// Build a tuple, flattening nested tuples and dropping empty terms.
    pub fn tuple(items: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for item in items {
            match item {
                Term::Eps => {}
                Term::Tuple(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Term::Eps,
            1 => out.pop().expect("single"),
            _ => Term::Tuple(out),
        }
    }

    pub fn dunion(items: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for item in items {
            match item {
                Term::DUnion(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().expect("single")
        } else {
            Term::DUnion(out)
        }
    }

    pub fn opt(items: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for item in items {
            match item {
                Term::Opt(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().expect("single")
        } else {
            Term::Opt(out)
        }
    }

    pub fn set(elem: Term, index: Term) -> Term {
        Term::Set { elem: Box::new(elem), index: Box::new(index), folded: false }
    }

    pub fn folded_set(elem: Term, index: Term) -> Term {
        Term::Set { elem: Box::new(elem), index: Box::new(index), folded: true }
    }

    pub fn content(t: Term) -> Term {
        Term::Content(Box::new(t))
    }

    pub fn is_content(&self) -> bool {
        matches!(self, Term::Content(_))
    }

    pub fn is_set(&self) -> bool {
        matches!(self, Term::Set { .. })
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Var(v) => {
                out.insert(v.as_str());
            }
            Term::Tuple(ts) | Term::DUnion(ts) | Term::Opt(ts) => {
                for t in ts {
                    t.collect_vars(out);
                }
            }
            Term::Set { elem, index, .. } => {
                elem.collect_vars(out);
                index.collect_vars(out);
            }
            Term::Content(t) => t.collect_vars(out),
            Term::Eps => {}
        }
    }

    /// Canonical key: equal keys mean equal terms up to commutativity and
    /// associativity of tuples, d-unions and options.
    pub fn canon_key(&self) -> String {
        match self {
            Term::Var(v) => v.clone(),
            Term::Tuple(ts) => {
                let mut keys: Vec<_> = ts.iter().map(|t| t.canon_key()).collect();
                keys.sort();
                format!("({})", keys.join(","))
            }
            Term::DUnion(ts) => {
                let mut keys: Vec<_> = ts.iter().map(|t| t.canon_key()).collect();
                keys.sort();
                format!("({})", keys.join("||"))
            }
            Term::Opt(ts) => {
                let mut keys: Vec<_> = ts.iter().map(|t| t.canon_key()).collect();
                keys.sort();
                format!("({})", keys.join("|"))
            }
            Term::Set { elem, index, folded } => {
                // indexes compare with duplicated option branches collapsed:
                // merging identical sources yields (r|r), which identifies
                // members exactly as r does
                let tag = if *folded { "f" } else { "" };
                format!(
                    "{{{}}}{}_{}",
                    elem.canon_key(),
                    tag,
                    normalize_index(index).canon_key()
                )
            }
            Term::Content(t) => format!("{}%", t.canon_key()),
            Term::Eps => "~".into(),
        }
    }

    /// Structural equivalence: equality up to the commutative, associative
    /// and extension rules.
    pub fn equiv(&self, other: &Term) -> bool {
        self.canon_key() == other.canon_key()
    }

    /// Size in nodes; used to bound blind rewriting searches.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Eps => 1,
            Term::Tuple(ts) | Term::DUnion(ts) | Term::Opt(ts) => {
                1 + ts.iter().map(Term::size).sum::<usize>()
            }
            Term::Set { elem, index, .. } => 1 + elem.size() + index.size(),
            Term::Content(t) => 1 + t.size(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Tuple(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Term::DUnion(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "||")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Term::Opt(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Term::Set { elem, index, .. } => match index.as_ref() {
                Term::Var(_) | Term::Content(_) | Term::Eps => write!(f, "{{{elem}}}_{index}"),
                _ => write!(f, "{{{elem}}}_({index})"),
            },
            Term::Content(t) => match t.as_ref() {
                Term::Var(_) => write!(f, "{t}%"),
                _ => write!(f, "({t})%"),
            },
            Term::Eps => write!(f, "~"),
        }
    }
}

// ---------------------------------------------------------------------------
// term derivation
// ---------------------------------------------------------------------------

/// The index of a fresh set term: the element term with sets dropped, since
/// set members are identified by the element data they carry directly.
pub fn project_index(elem: &Term) -> Term {
    fn go(t: &Term) -> Option<Term> {
        match t {
            Term::Var(v) => Some(Term::Var(v.clone())),
            Term::Content(inner) => Some(Term::content((**inner).clone())),
            Term::Tuple(ts) => {
                let kept: Vec<_> = ts.iter().filter_map(go).collect();
                if kept.is_empty() {
                    None
                } else {
                    Some(Term::tuple(kept))
                }
            }
            Term::DUnion(ts) | Term::Opt(ts) => {
                let kept: Vec<_> = ts.iter().filter_map(go).collect();
                if kept.is_empty() {
                    None
                } else {
                    Some(Term::opt(kept))
                }
            }
            Term::Set { .. } => None,
            Term::Eps => None,
        }
    }
    go(elem).unwrap_or(Term::Eps)
}

/// The matching term of a query expression.
pub fn mt(q: &QExpr) -> Result<Term> {
    match q {
        QExpr::Doc { pattern: Some(p), .. } => mt_ep(p),
        QExpr::Doc { pattern: None, .. } => {
            Err(Error::internal("document source without a pattern"))
        }
        QExpr::Input { pattern } | QExpr::Func { pattern } => mt_vp(pattern),
        QExpr::Conj(items) => Ok(Term::tuple(items.iter().map(mt).collect::<Result<_>>()?)),
        QExpr::Disj(items) => Ok(Term::dunion(items.iter().map(mt).collect::<Result<_>>()?)),
        QExpr::Suffixed(_, _) => Err(Error::internal("suffixed source survived desugaring")),
    }
}

fn atom_term(atom: &crate::syntax::AtomPtn) -> Term {
    let name = match &atom.name {
        AtomSide::Var(v) => Some(Term::var(v.clone())),
        _ => None,
    };
    let content = match &atom.content {
        Some(AtomSide::Var(v)) => Some(Term::var(v.clone())),
        _ => None,
    };
    match (name, content) {
        (Some(n), Some(c)) => Term::tuple(vec![n, c]),
        (Some(n), None) => n,
        (None, Some(c)) => c,
        (None, None) => Term::Eps,
    }
}

/// The matching term of a document extraction pattern.
pub fn mt_ep(ep: &Ep) -> Result<Term> {
    match ep {
        Ep::Path(_, atom) => {
            let t = atom_term(atom);
            let index = project_index(&t);
            Ok(Term::set(t, index))
        }
        Ep::Tree(root, body) | Ep::Fold(root, body) => {
            let (elem, index) = match mt_ep(root)? {
                Term::Set { elem, index, .. } => (*elem, *index),
                other => {
                    return Err(Error::Inference(format!(
                        "pattern root has no set structure: {other}"
                    )))
                }
            };
            let body = mt_ep(body)?;
            Ok(Term::set(Term::tuple(vec![elem, body]), index))
        }
        Ep::Conj(items) => {
            Ok(Term::tuple(items.iter().map(mt_ep).collect::<Result<_>>()?))
        }
        Ep::Disj(items) => {
            Ok(Term::dunion(items.iter().map(mt_ep).collect::<Result<_>>()?))
        }
    }
}

/// The matching term of a value extraction pattern.
pub fn mt_vp(vp: &crate::syntax::Vp) -> Result<Term> {
    use crate::syntax::Vp;
    match vp {
        Vp::Univ | Vp::Const(_) => Ok(Term::Eps),
        Vp::Var(v) => Ok(Term::var(v.clone())),
        Vp::VarPtn(v, inner) => {
            Ok(Term::tuple(vec![Term::var(v.clone()), mt_vp(inner)?]))
        }
        Vp::View(inner) => mt_vp(inner),
        Vp::Doc(ep) => mt_ep(ep),
        Vp::Cons(h, t) => Ok(Term::tuple(vec![mt_vp(h)?, mt_vp(t)?])),
        Vp::Tuple(items) => {
            Ok(Term::tuple(items.iter().map(mt_vp).collect::<Result<_>>()?))
        }
        Vp::DUnion(items) => {
            Ok(Term::dunion(items.iter().map(mt_vp).collect::<Result<_>>()?))
        }
        Vp::Opt(items) => Ok(Term::opt(
            items.iter().map(|(_, p)| mt_vp(p)).collect::<Result<_>>()?,
        )),
        Vp::Set(inner) => {
            // A set pattern keyed by a constant selects at most one entry, so
            // the set wrapper is transparent in the term.
            if const_keyed(inner) {
                return mt_vp(inner);
            }
            let elem = mt_vp(inner)?;
            let index = project_index(&elem);
            Ok(Term::set(elem, index))
        }
    }
}

fn const_keyed(vp: &crate::syntax::Vp) -> bool {
    use crate::syntax::Vp;
    match vp {
        Vp::Tuple(items) => items.iter().any(|i| matches!(i, Vp::Const(_))),
        _ => false,
    }
}

/// Convert a user-written term (a `groupby`/`hid`/`elim` argument or a parsed
/// test term) into a matching term; set indexes are recovered by projection.
pub fn from_user(ut: &UTerm) -> Term {
    match ut {
        UTerm::Var(v) => Term::var(v.clone()),
        UTerm::Tuple(ts) => Term::tuple(ts.iter().map(from_user).collect()),
        UTerm::DUnion(ts) => Term::dunion(ts.iter().map(from_user).collect()),
        UTerm::Opt(ts) => Term::opt(ts.iter().map(from_user).collect()),
        UTerm::Set(inner) => {
            let elem = from_user(inner);
            let index = project_index(&elem);
            if index.is_content() {
                Term::folded_set(elem, index)
            } else {
                Term::set(elem, index)
            }
        }
        UTerm::Content(t) => Term::content(from_user(t)),
    }
}

/// The argument matching term of a construction pattern.  Every set must
/// already carry a `groupby` suffix (suffix inference runs beforehand).
pub fn at(cp: &Cp) -> Result<Term> {
    match cp {
        Cp::Str(_) | Cp::Num(_) | Cp::Bool(_) | Cp::Empty | Cp::Nil => Ok(Term::Eps),
        Cp::Var(v) | Cp::Loc(v) => Ok(Term::var(v.clone())),
        Cp::Fun(f) => at(&f.arg),
        Cp::Elem(name, inner) => {
            let n = match name {
                NamePtn::Lit(_) => Term::Eps,
                // attribute name variables are stored with a leading '@'
                NamePtn::Var(v) => Term::var(v.trim_start_matches('@')),
                NamePtn::Fun(f) => at(&f.arg)?,
            };
            Ok(Term::tuple(vec![n, at(inner)?]))
        }
        Cp::Label(_, inner) => at(inner),
        Cp::Tuple(items) => Ok(Term::tuple(items.iter().map(at).collect::<Result<_>>()?)),
        Cp::DUnion(items) => Ok(Term::dunion(items.iter().map(at).collect::<Result<_>>()?)),
        Cp::Opt(items) => Ok(Term::opt(items.iter().map(at).collect::<Result<_>>()?)),
        Cp::Hid(p, t) => Ok(Term::tuple(vec![at(p)?, from_user(t)])),
        Cp::Elim(p, t) => Ok(Term::dunion(vec![at(p)?, from_user(t)])),
        Cp::Set { elem, groupby, .. } => {
            let index = match groupby {
                Some(r) => from_user(r),
                None => {
                    return Err(Error::Inference(
                        "set construction without an index; inference must fill it".into(),
                    ))
                }
            };
            let elem = at(elem)?;
            if let Term::Content(key) = &index {
                // Under a content index the key variables denote the fold key,
                // a single content unit of the element.
                let elem = fold_key_subst(elem, key)?;
                Ok(Term::folded_set(elem, index.clone()))
            } else {
                Ok(Term::set(elem, index))
            }
        }
        Cp::Cons(h, t) => Ok(Term::tuple(vec![at(h)?, at(t)?])),
    }
}

/// Replace the top-level components of `elem` that spell out the fold key by
/// the single content unit the folded set actually carries.
fn fold_key_subst(elem: Term, key: &Term) -> Result<Term> {
    let mut comps = match elem {
        Term::Tuple(ts) => ts,
        other => vec![other],
    };
    let units: Vec<Term> = match key {
        Term::Tuple(ts) => ts.clone(),
        other => vec![other.clone()],
    };
    let mut insert_at = None;
    for unit in &units {
        let k = unit.canon_key();
        match comps.iter().position(|c| c.canon_key() == k) {
            Some(i) => {
                comps.remove(i);
                insert_at = Some(insert_at.map_or(i, |j: usize| j.min(i)));
            }
            None => {
                return Err(Error::Inference(format!(
                    "fold key unit {unit} does not appear in the set element"
                )))
            }
        }
    }
    let at = insert_at.unwrap_or(0).min(comps.len());
    comps.insert(at, Term::content(key.clone()));
    Ok(Term::tuple(comps))
}

/// Normalize an index term: canonical option collapse of duplicated branches.
/// Indexes `r|r` arise when merged d-union branches share their variables.
pub fn normalize_index(t: &Term) -> Term {
    match t {
        Term::Opt(ts) => {
            let mut out: Vec<Term> = Vec::new();
            for item in ts {
                let item = normalize_index(item);
                if !out.iter().any(|o| o.equiv(&item)) {
                    out.push(item);
                }
            }
            Term::opt(out)
        }
        Term::Tuple(ts) => Term::tuple(ts.iter().map(normalize_index).collect()),
        Term::DUnion(ts) => Term::dunion(ts.iter().map(normalize_index).collect()),
        Term::Content(inner) => Term::content(normalize_index(inner)),
        Term::Set { elem, index, folded } => Term::Set {
            elem: Box::new(normalize_index(elem)),
            index: Box::new(normalize_index(index)),
            folded: *folded,
        },
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// subordination
// ---------------------------------------------------------------------------

/// `u <= t`: u is a (transitive) subterm of t.  Components of tuples,
/// d-unions and options count, including regroupings of several components;
/// set elements count; content terms and set indexes are opaque.
pub fn subterm(u: &Term, t: &Term) -> bool {
    if u.equiv(t) {
        return true;
    }
    match t {
        Term::Tuple(ts) => {
            if let Term::Tuple(us) = u {
                if multiset_covers(ts, us) {
                    return true;
                }
            }
            ts.iter().any(|c| subterm(u, c))
        }
        Term::DUnion(ts) => {
            if let Term::DUnion(us) = u {
                if multiset_covers(ts, us) {
                    return true;
                }
            }
            ts.iter().any(|c| subterm(u, c))
        }
        Term::Opt(ts) => {
            if let Term::Opt(us) = u {
                if multiset_covers(ts, us) {
                    return true;
                }
            }
            ts.iter().any(|c| subterm(u, c))
        }
        Term::Set { elem, .. } => subterm(u, elem),
        _ => false,
    }
}

/// Do the components `ts` contain every component of `us`, as multisets of
/// equivalence classes?
fn multiset_covers(ts: &[Term], us: &[Term]) -> bool {
    let mut pool: Vec<String> = ts.iter().map(Term::canon_key).collect();
    for u in us {
        let key = u.canon_key();
        match pool.iter().position(|k| *k == key) {
            Some(i) => {
                pool.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

// ---------------------------------------------------------------------------
// restructuring rules
// ---------------------------------------------------------------------------

/// A restructuring rule with a binding transformation attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    TplDupl,
    SetDistr,
    SetFlatten,
    SetFold,
    DunSetMerge,
    OptIdem,
    OptSetAlter,
    OptTplAlter,
    /// The factoring direction of the bidirectional option/tuple exchange.
    OptTplFactor,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::TplDupl => "tpl-dupl",
            Rule::SetDistr => "set-distr",
            Rule::SetFlatten => "set-flatten",
            Rule::SetFold => "set-fold",
            Rule::DunSetMerge => "dun-set-merge",
            Rule::OptIdem => "opt-idem",
            Rule::OptSetAlter => "opt-set-alter",
            Rule::OptTplAlter | Rule::OptTplFactor => "opt-tpl-alter",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One restructuring step: a rule applied at a node of the term.
///
/// Paths address children of tuples, d-unions and set elements (index 0);
/// rules never apply inside option branches, content terms or set indexes.
#[derive(Debug, Clone)]
pub struct Step {
    pub rule: Rule,
    pub path: Vec<usize>,
    /// Which components take part, for rules with a choice:
    /// distributed/factored/folded component positions, merged branch pair,
    /// or collapsed branch pair.
    pub pick: Vec<usize>,
    pub before: Term,
    pub after: Term,
}

pub type Route = Vec<Step>;

/// Fetch the subterm at `path`.
pub fn at_path<'a>(t: &'a Term, path: &[usize]) -> Result<&'a Term> {
    let mut cur = t;
    for &i in path {
        cur = match cur {
            Term::Tuple(ts) | Term::DUnion(ts) => {
                ts.get(i).ok_or_else(|| Error::internal("term path out of range"))?
            }
            Term::Set { elem, .. } if i == 0 => elem,
            _ => return Err(Error::internal("term path through a leaf")),
        };
    }
    Ok(cur)
}

/// Replace the subterm at `path`, re-canonicalizing along the way.
pub fn replace_at(t: &Term, path: &[usize], new: Term) -> Result<Term> {
    if path.is_empty() {
        return Ok(new);
    }
    let (i, rest) = (path[0], &path[1..]);
    Ok(match t {
        Term::Tuple(ts) => {
            let mut ts = ts.clone();
            let slot = ts.get_mut(i).ok_or_else(|| Error::internal("term path out of range"))?;
            *slot = replace_at(slot, rest, new)?;
            Term::tuple(ts)
        }
        Term::DUnion(ts) => {
            let mut ts = ts.clone();
            let slot = ts.get_mut(i).ok_or_else(|| Error::internal("term path out of range"))?;
            *slot = replace_at(slot, rest, new)?;
            Term::dunion(ts)
        }
        Term::Set { elem, index, folded } if i == 0 => Term::Set {
            elem: Box::new(replace_at(elem, rest, new)?),
            index: index.clone(),
            folded: *folded,
        },
        _ => return Err(Error::internal("term path through a leaf")),
    })
}

/// Apply `rule` at the node addressed by `path`, with `pick` selecting the
/// participating components.  Returns the rewritten whole term.
pub fn apply_rule(t: &Term, rule: Rule, path: &[usize], pick: &[usize]) -> Result<Term> {
    let node = at_path(t, path)?;
    let new = apply_here(node, rule, pick)?;
    replace_at(t, path, new)
}

/// The immediate result of applying `rule` at a node, before the result is
/// re-absorbed into the surrounding term.
pub fn rule_result(node: &Term, rule: Rule, pick: &[usize]) -> Result<Term> {
    apply_here(node, rule, pick)
}

fn pick_err(rule: Rule) -> Error {
    Error::internal(format!("rule {rule} does not apply at this node"))
}

fn apply_here(node: &Term, rule: Rule, pick: &[usize]) -> Result<Term> {
    match rule {
        Rule::TplDupl => Ok(Term::Tuple(vec![node.clone(), node.clone()])),
        Rule::SetDistr => {
            // pick = [set position, distributed component positions...]
            let Term::Tuple(ts) = node else { return Err(pick_err(rule)) };
            let (&set_pos, moved) = pick.split_first().ok_or_else(|| pick_err(rule))?;
            let Some(Term::Set { elem, index, folded: false }) = ts.get(set_pos) else {
                return Err(pick_err(rule));
            };
            let idx_vars = index.vars();
            let mut moving = Vec::new();
            for &m in moved {
                let c = ts.get(m).ok_or_else(|| pick_err(rule))?;
                if m == set_pos || c.is_content() || c.vars().intersection(&idx_vars).next().is_some()
                {
                    return Err(pick_err(rule));
                }
                moving.push(c.clone());
            }
            if moving.is_empty() {
                return Err(pick_err(rule));
            }
            moving.push((**elem).clone());
            let new_set = Term::Set {
                elem: Box::new(Term::tuple(moving)),
                index: index.clone(),
                folded: false,
            };
            let rest: Vec<Term> = ts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != set_pos && !moved.contains(i))
                .map(|(_, c)| c.clone())
                .chain(std::iter::once(new_set))
                .collect();
            Ok(Term::tuple(rest))
        }
        Rule::SetFlatten => {
            let Term::Set { elem, index: r2, folded: false } = node else {
                return Err(pick_err(rule));
            };
            let Term::Set { elem: inner, index: r1, folded: false } = elem.as_ref() else {
                return Err(pick_err(rule));
            };
            Ok(Term::set(
                (**inner).clone(),
                Term::tuple(vec![(**r2).clone(), (**r1).clone()]),
            ))
        }
        Rule::SetFold => {
            // pick = positions of the key components within the element tuple
            let Term::Set { elem, folded: false, .. } = node else {
                return Err(pick_err(rule));
            };
            let Term::Tuple(comps) = elem.as_ref() else { return Err(pick_err(rule)) };
            if pick.is_empty() || pick.len() >= comps.len() {
                return Err(pick_err(rule));
            }
            let key: Vec<Term> = pick
                .iter()
                .map(|&i| comps.get(i).cloned().ok_or_else(|| pick_err(rule)))
                .collect::<Result<_>>()?;
            let key = Term::content(Term::tuple(key));
            Ok(Term::folded_set(
                Term::tuple(vec![node.clone(), key.clone()]),
                key,
            ))
        }
        Rule::DunSetMerge => {
            // pick = the two merged branch positions, in result order
            let Term::DUnion(branches) = node else { return Err(pick_err(rule)) };
            let [i, j] = pick else { return Err(pick_err(rule)) };
            let (Some(Term::Set { elem: e1, index: r1, folded: false }), Some(Term::Set { elem: e2, index: r2, folded: false })) =
                (branches.get(*i), branches.get(*j))
            else {
                return Err(pick_err(rule));
            };
            let merged = Term::set(
                Term::opt(vec![(**e1).clone(), (**e2).clone()]),
                Term::opt(vec![(**r1).clone(), (**r2).clone()]),
            );
            let rest: Vec<Term> = branches
                .iter()
                .enumerate()
                .filter(|(k, _)| k != i && k != j)
                .map(|(_, b)| b.clone())
                .collect();
            let mut out = vec![merged];
            out.extend(rest);
            Ok(Term::dunion(out))
        }
        Rule::OptIdem => {
            // pick = the two equivalent branch positions; the second is dropped
            let Term::Opt(branches) = node else { return Err(pick_err(rule)) };
            let [i, j] = pick else { return Err(pick_err(rule)) };
            let (Some(a), Some(b)) = (branches.get(*i), branches.get(*j)) else {
                return Err(pick_err(rule));
            };
            if !a.equiv(b) {
                return Err(pick_err(rule));
            }
            let rest: Vec<Term> = branches
                .iter()
                .enumerate()
                .filter(|(k, _)| k != j)
                .map(|(_, b)| b.clone())
                .collect();
            Ok(Term::opt(rest))
        }
        Rule::OptSetAlter => {
            // pick = the two combined branch positions, in result order
            let Term::Opt(branches) = node else { return Err(pick_err(rule)) };
            let [i, j] = pick else { return Err(pick_err(rule)) };
            let (Some(Term::Set { elem: e1, index: r1, folded: false }), Some(Term::Set { elem: e2, index: r2, folded: false })) =
                (branches.get(*i), branches.get(*j))
            else {
                return Err(pick_err(rule));
            };
            if !r1.equiv(r2) {
                return Err(pick_err(rule));
            }
            let merged = Term::set(
                Term::opt(vec![(**e1).clone(), (**e2).clone()]),
                (**r1).clone(),
            );
            let rest: Vec<Term> = branches
                .iter()
                .enumerate()
                .filter(|(k, _)| k != i && k != j)
                .map(|(_, b)| b.clone())
                .collect();
            let mut out = vec![merged];
            out.extend(rest);
            Ok(Term::opt(out))
        }
        Rule::OptTplAlter => {
            // pick = [option position, distributed component positions...]
            let Term::Tuple(ts) = node else { return Err(pick_err(rule)) };
            let (&opt_pos, moved) = pick.split_first().ok_or_else(|| pick_err(rule))?;
            let Some(Term::Opt(branches)) = ts.get(opt_pos) else {
                return Err(pick_err(rule));
            };
            if moved.is_empty() || moved.contains(&opt_pos) {
                return Err(pick_err(rule));
            }
            let moving: Vec<Term> = moved
                .iter()
                .map(|&m| ts.get(m).cloned().ok_or_else(|| pick_err(rule)))
                .collect::<Result<_>>()?;
            let new_opt = Term::Opt(
                branches
                    .iter()
                    .map(|b| {
                        let mut items = moving.clone();
                        items.push(b.clone());
                        Term::tuple(items)
                    })
                    .collect(),
            );
            let rest: Vec<Term> = ts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != opt_pos && !moved.contains(i))
                .map(|(_, c)| c.clone())
                .chain(std::iter::once(new_opt))
                .collect();
            Ok(Term::tuple(rest))
        }
        Rule::OptTplFactor => {
            // pick per branch: the component positions of the factored part in
            // branch 0; other branches are matched by key.
            let Term::Opt(branches) = node else { return Err(pick_err(rule)) };
            if branches.is_empty() {
                return Err(pick_err(rule));
            }
            let first = match &branches[0] {
                Term::Tuple(ts) => ts.clone(),
                other => vec![other.clone()],
            };
            let factored: Vec<Term> = pick
                .iter()
                .map(|&i| first.get(i).cloned().ok_or_else(|| pick_err(rule)))
                .collect::<Result<_>>()?;
            if factored.is_empty() || factored.len() >= first.len() {
                return Err(pick_err(rule));
            }
            let keys: Vec<String> = factored.iter().map(Term::canon_key).collect();
            let mut residues = Vec::new();
            for b in branches {
                let comps = match b {
                    Term::Tuple(ts) => ts.clone(),
                    other => vec![other.clone()],
                };
                let mut pool = comps;
                for k in &keys {
                    match pool.iter().position(|c| c.canon_key() == *k) {
                        Some(p) => {
                            pool.remove(p);
                        }
                        None => return Err(pick_err(rule)),
                    }
                }
                if pool.is_empty() {
                    return Err(pick_err(rule));
                }
                residues.push(Term::tuple(pool));
            }
            let mut items = factored;
            items.push(Term::Opt(residues));
            Ok(Term::tuple(items))
        }
    }
}

/// All positions where rules may apply: the node itself, tuple and d-union
/// components, and set elements — never option branches, content terms or
/// set indexes.
pub fn rule_positions(t: &Term) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    match t {
        Term::Tuple(ts) | Term::DUnion(ts) => {
            for (i, c) in ts.iter().enumerate() {
                for mut p in rule_positions(c) {
                    p.insert(0, i);
                    out.push(p);
                }
            }
        }
        Term::Set { elem, .. } => {
            for mut p in rule_positions(elem) {
                p.insert(0, 0);
                out.push(p);
            }
        }
        _ => {}
    }
    out
}

/// All single-step rewrites of `t` (with single-component picks for the
/// distribution-style rules, which lose no reachability since tuples are
/// kept flat).  `dupl` enables the size-increasing duplication rule.
pub fn successors(t: &Term, dupl: bool) -> Vec<(Step, Term)> {
    let mut out = Vec::new();
    for path in rule_positions(t) {
        let node = match at_path(t, &path) {
            Ok(n) => n,
            Err(_) => continue,
        };
        let try_rule = |rule: Rule, pick: Vec<usize>, out: &mut Vec<(Step, Term)>| {
            if let Ok(new_node) = apply_here(node, rule, &pick) {
                if let Ok(whole) = replace_at(t, &path, new_node.clone()) {
                    out.push((
                        Step {
                            rule,
                            path: path.clone(),
                            pick,
                            before: node.clone(),
                            after: new_node,
                        },
                        whole,
                    ));
                }
            }
        };
        if dupl {
            try_rule(Rule::TplDupl, Vec::new(), &mut out);
        }
        match node {
            Term::Tuple(ts) => {
                for (s, c) in ts.iter().enumerate() {
                    let is_set = c.is_set();
                    let is_opt = matches!(c, Term::Opt(_));
                    if !is_set && !is_opt {
                        continue;
                    }
                    for m in 0..ts.len() {
                        if m == s {
                            continue;
                        }
                        if is_set {
                            try_rule(Rule::SetDistr, vec![s, m], &mut out);
                        }
                        if is_opt {
                            try_rule(Rule::OptTplAlter, vec![s, m], &mut out);
                        }
                    }
                }
            }
            Term::Set { elem, .. } => {
                try_rule(Rule::SetFlatten, Vec::new(), &mut out);
                if let Term::Tuple(comps) = elem.as_ref() {
                    // fold by each single component and by each prefix pair;
                    // larger keys arise from regrouped tuples, which stay
                    // single components here because tuples are flat — so
                    // enumerate all subsets up to a small width instead.
                    for pick in subsets_upto(comps.len(), 3) {
                        try_rule(Rule::SetFold, pick, &mut out);
                    }
                }
            }
            Term::DUnion(bs) => {
                for i in 0..bs.len() {
                    for j in 0..bs.len() {
                        if i != j {
                            try_rule(Rule::DunSetMerge, vec![i, j], &mut out);
                        }
                    }
                }
            }
            Term::Opt(bs) => {
                for i in 0..bs.len() {
                    for j in 0..bs.len() {
                        if i == j {
                            continue;
                        }
                        if i < j {
                            try_rule(Rule::OptIdem, vec![i, j], &mut out);
                        }
                        try_rule(Rule::OptSetAlter, vec![i, j], &mut out);
                    }
                }
                let width = match &bs[0] {
                    Term::Tuple(ts) => ts.len(),
                    _ => 1,
                };
                for pick in subsets_upto(width, 2) {
                    try_rule(Rule::OptTplFactor, pick, &mut out);
                }
            }
            _ => {}
        }
    }
    out
}

fn subsets_upto(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len.min(n) {
        let mut next = Vec::new();
        for base in &frontier {
            let start = base.last().map_or(0, |&l| l + 1);
            for i in start..n {
                let mut s = base.clone();
                s.push(i);
                out.push(s.clone());
                next.push(s);
            }
        }
        frontier = next;
    }
    out
}

/// `u` possibly occurs in `t`: some restructuring of `t` has `u` as a
/// subterm.  Implemented as a bounded breadth-first search over rewrites.
pub fn possibly_occurs(u: &Term, t: &Term) -> bool {
    if !u.vars().is_subset(&t.vars()) {
        return false;
    }
    let size_cap = t.size() + u.size() + 6;
    let needs_dupl = {
        // duplication only helps when u repeats a variable more than t does
        let mut t_counts = std::collections::HashMap::new();
        count_vars(t, &mut t_counts);
        let mut u_counts = std::collections::HashMap::new();
        count_vars(u, &mut u_counts);
        u_counts.iter().any(|(v, c)| t_counts.get(v).is_none_or(|tc| c > tc))
    };
    let mut seen = std::collections::HashSet::new();
    let mut queue = std::collections::VecDeque::new();
    seen.insert(t.canon_key());
    queue.push_back(t.clone());
    let mut visited = 0usize;
    while let Some(cur) = queue.pop_front() {
        if subterm(u, &cur) {
            return true;
        }
        visited += 1;
        if visited > 20_000 {
            return false;
        }
        for (_, next) in successors(&cur, needs_dupl) {
            if next.size() > size_cap {
                continue;
            }
            if seen.insert(next.canon_key()) {
                queue.push_back(next);
            }
        }
    }
    false
}

fn count_vars(t: &Term, out: &mut std::collections::HashMap<String, usize>) {
    match t {
        Term::Var(v) => *out.entry(v.clone()).or_insert(0) += 1,
        Term::Tuple(ts) | Term::DUnion(ts) | Term::Opt(ts) => {
            for c in ts {
                count_vars(c, out);
            }
        }
        Term::Set { elem, .. } => count_vars(elem, out),
        Term::Content(inner) => count_vars(inner, out),
        Term::Eps => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, parse_term};

    fn term_of(src: &str) -> Term {
        from_user(&parse_term(src).expect("term"))
    }

    fn original_term(query: &str) -> Term {
        let p = crate::syntax::desugar(parse_program(query).expect("parse")).expect("desugar");
        mt(&p.statement.query).expect("mt")
    }

    #[test]
    fn derives_terms_for_tree_patterns() {
        let t = original_term(
            r#"query doc("bib.xml")//book=>$b(/title=>$t, (/author=>$a(/last=>$l,/first=>$f) ||
                          /editor=>$e(/last=>$l,/first=>$f)))
               construct nil"#,
        );
        let expected = term_of(
            "{($b,({$t},({($a,({$l},{$f}))}||{($e,({$l},{$f}))})))}",
        );
        assert!(t.equiv(&expected), "got {t}, expected {expected}");
        // the shared-suffix sugar yields the same term
        let sugared = original_term(
            r#"query doc("bib.xml")//book=>$b(/title=>$t,(/author=>$a||/editor=>$e)
                          (/last=>$l, /first=>$f))
               construct nil"#,
        );
        assert!(sugared.equiv(&expected), "got {sugared}");
    }

    #[test]
    fn derives_indexes_by_projection() {
        let t = original_term(
            r#"query doc("bib.xml")//book(/title=>$t;/author=>$a) construct nil"#,
        );
        match t {
            Term::Set { elem, index, .. } => {
                assert!(matches!(*index, Term::Var(ref v) if v.starts_with("$!g")));
                match *elem {
                    Term::Tuple(ref items) => {
                        let inner = items.iter().find_map(|i| match i {
                            Term::Set { elem, index, .. } => Some((elem.clone(), index.clone())),
                            _ => None,
                        });
                        let (e, i) = inner.expect("fold set");
                        assert!(i.equiv(&Term::var("$t")));
                        assert!(subterm(&term_of("{$a}"), &e));
                    }
                    ref other => panic!("expected tuple, got {other}"),
                }
            }
            other => panic!("expected set, got {other}"),
        }
    }

    #[test]
    fn equivalence_ignores_order_and_grouping() {
        assert!(term_of("($a,($b,$c))").equiv(&term_of("(($c,$b),$a)")));
        assert!(term_of("($a||$b)").equiv(&term_of("($b||$a)")));
        assert!(!term_of("($a,$b)").equiv(&term_of("($a|$b)")));
        assert!(!term_of("{$a}").equiv(&term_of("{($a,$b)}")));
    }

    #[test]
    fn subterm_follows_the_paper_examples() {
        let t = term_of("($a,({$l},{$f}))");
        assert!(subterm(&term_of("{$f}"), &t));
        let whole = term_of("{($a,({$l},{$f}))}");
        assert!(subterm(&term_of("$f"), &whole));
        // regroupings of tuple components are subterms
        let t3 = term_of("($a,$b,$c)");
        assert!(subterm(&term_of("($a,$c)"), &t3));
        assert!(!subterm(&term_of("($a,$d)"), &t3));
        // indexes are not subterms
        let s = Term::set(Term::var("$a"), Term::var("$b"));
        assert!(!subterm(&Term::var("$b"), &s));
    }

    #[test]
    fn applies_the_merge_and_alter_rules() {
        // ({$a}_a || {$e}_e)  ~>  {$a|$e}_(a|e)
        let t = Term::dunion(vec![
            Term::set(Term::var("$a"), Term::var("$a")),
            Term::set(Term::var("$e"), Term::var("$e")),
        ]);
        let merged = apply_rule(&t, Rule::DunSetMerge, &[], &[0, 1]).expect("merge");
        match &merged {
            Term::Set { elem, index, .. } => {
                assert!(elem.equiv(&term_of("($a|$e)")));
                assert!(index.equiv(&term_of("($a|$e)")));
            }
            other => panic!("expected set, got {other}"),
        }
        // (($a,$x)|($e,$x)) ~> ($x,($a|$e)) by factoring
        let alt = Term::Opt(vec![
            Term::tuple(vec![Term::var("$a"), Term::var("$x")]),
            Term::tuple(vec![Term::var("$e"), Term::var("$x")]),
        ]);
        let factored = apply_rule(&alt, Rule::OptTplFactor, &[], &[1]).expect("factor");
        assert!(factored.equiv(&term_of("($x,($a|$e))")), "got {factored}");
    }

    #[test]
    fn folds_keep_the_full_pairs() {
        let t = term_of("{($l,$f,$x)}");
        let folded = apply_rule(&t, Rule::SetFold, &[], &[0, 1]).expect("fold");
        match &folded {
            Term::Set { elem, index, folded: true } => {
                assert!(index.equiv(&term_of("($l,$f)%")));
                match elem.as_ref() {
                    Term::Tuple(items) => {
                        assert_eq!(items.len(), 2);
                        assert!(items.iter().any(|i| i.equiv(&t)));
                        assert!(items.iter().any(|i| i.equiv(&term_of("($l,$f)%"))));
                    }
                    other => panic!("expected tuple, got {other}"),
                }
            }
            other => panic!("expected folded set, got {other:?}"),
        }
        // folded sets refuse distribution
        let pair = Term::tuple(vec![Term::var("$z"), folded]);
        assert!(apply_rule(&pair, Rule::SetDistr, &[], &[1, 0]).is_err());
    }

    #[test]
    fn distribution_respects_the_preconditions() {
        // index variables must stay outside
        let t = Term::tuple(vec![
            Term::var("$a"),
            Term::set(Term::var("$x"), Term::var("$a")),
        ]);
        assert!(apply_rule(&t, Rule::SetDistr, &[], &[1, 0]).is_err());
        // content terms must stay outside
        let t = Term::tuple(vec![
            Term::content(Term::var("$c")),
            Term::set(Term::var("$x"), Term::var("$x")),
        ]);
        assert!(apply_rule(&t, Rule::SetDistr, &[], &[1, 0]).is_err());
    }

    #[test]
    fn possibly_occurring_terms() {
        let t = original_term(
            r#"query doc("bib.xml")//book=>$b(/author=>$a, /editor=>$e) construct nil"#,
        );
        assert!(possibly_occurs(&term_of("($b,$a)"), &t));
        assert!(possibly_occurs(&term_of("{($a,$e)}"), &t));
        assert!(possibly_occurs(&term_of("($b,$b)"), &t));
        assert!(!possibly_occurs(&term_of("($a|$e)"), &t));
        assert!(!possibly_occurs(&term_of("$z"), &t));
    }

    #[test]
    fn normalizes_duplicated_option_indexes() {
        let r = Term::opt(vec![term_of("($l,$f)"), term_of("($f,$l)")]);
        assert!(normalize_index(&r).equiv(&term_of("($l,$f)")));
    }
}
