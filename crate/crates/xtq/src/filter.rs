//! Filtering bindings by where clauses.
//!
//! A condition talks about a few *units* — variables and sets drawn from the
//! query's matching term.  Scope analysis locates those units, checks that
//! predicates, `par` arms and `with` stages combine them consistently, and
//! completes partially covered disjunctions with `any(...)` arms so that every
//! branch of the data receives a verdict.
//!
//! Evaluation then runs on the *original* extracted binding: each predicate
//! enumerates restriction rows (one per combination of its iterated units),
//! and a row's footprint — the member identifiers it crossed — records which
//! data it judged.  A piece of the restructured binding stays alive when its
//! own footprint is covered by a passing row; `par` arms vote independently
//! per disjunctive branch and `with` stages must all agree.  Dead members are
//! pruned with the usual collapse rules: a tuple dies with any component, a
//! set dies when all its members do, and a d-union turns dead branches into
//! nulls unless every branch died.

use std::collections::{BTreeMap, BTreeSet};

use crate::bind::{accords, Binding, IdGen, Member, MemberId, Val};
use crate::error::{Error, Result};
use crate::extract::match_document;
use crate::sxd::Location;
use crate::syntax::{
    lower_pattern, AtomPtn, AtomSide, CmpOp, Cond, Cp, Ep, FunInvoke, NamePtn, Operand,
    Quant, UTerm,
};
use crate::term::Term;

// ---------------------------------------------------------------------------
// units and scopes
// ---------------------------------------------------------------------------

/// One unit of a condition's scope: a variable or a set (or a whole d-union,
/// for arguments spanning branches) located in the query's matching term.
#[derive(Debug, Clone)]
pub struct Unit {
    pub term: Term,
    pub key: String,
    pub vars: BTreeSet<String>,
    pub set_like: bool,
    /// Joined through `hid`: iterated for context, not itself restricted.
    pub context: bool,
}

/// A predicate condition with its resolved units.
#[derive(Debug, Clone)]
pub struct ScopedPred {
    pub cond: Cond,
    pub units: Vec<Unit>,
}

/// A d-union of the query term through which parallel arms split, with the
/// variables that tell its branches apart.
#[derive(Debug, Clone)]
pub struct DInfo {
    pub term: Term,
    pub canon: String,
    pub branch_vars: Vec<BTreeSet<String>>,
    pub distinctive: Vec<BTreeSet<String>>,
}

/// A condition with every scope resolved and checked.
#[derive(Debug, Clone)]
pub enum ScopedCond {
    Pred(ScopedPred),
    Par { dunion: DInfo, arms: Vec<(BTreeSet<usize>, ScopedCond)> },
    With(Box<ScopedCond>, Box<ScopedCond>),
}

impl ScopedCond {
    fn units(&self) -> Vec<&Unit> {
        let mut out = Vec::new();
        self.collect_units(&mut out);
        out
    }

    fn collect_units<'a>(&'a self, out: &mut Vec<&'a Unit>) {
        match self {
            ScopedCond::Pred(p) => out.extend(p.units.iter()),
            ScopedCond::Par { arms, .. } => {
                for (_, a) in arms {
                    a.collect_units(out);
                }
            }
            ScopedCond::With(l, r) => {
                l.collect_units(out);
                r.collect_units(out);
            }
        }
    }

    /// Units of the node's own scope: a `with` is scoped by its last stage.
    fn scope_units(&self) -> Vec<&Unit> {
        match self {
            ScopedCond::Pred(p) => p.units.iter().collect(),
            ScopedCond::Par { arms, .. } => {
                let mut out = Vec::new();
                for (_, a) in arms {
                    out.extend(a.scope_units());
                }
                out
            }
            ScopedCond::With(_, r) => r.scope_units(),
        }
    }

    fn dinfos(&self) -> Vec<&DInfo> {
        let mut out = Vec::new();
        self.collect_dinfos(&mut out);
        out
    }

    fn collect_dinfos<'a>(&'a self, out: &mut Vec<&'a DInfo>) {
        match self {
            ScopedCond::Pred(_) => {}
            ScopedCond::Par { dunion, arms } => {
                out.push(dunion);
                for (_, a) in arms {
                    a.collect_dinfos(out);
                }
            }
            ScopedCond::With(l, r) => {
                l.collect_dinfos(out);
                r.collect_dinfos(out);
            }
        }
    }
}

/// The scope of a scoped condition as a term: the tuple of a predicate's
/// units, the last stage of a `with`, an option of the arm scopes for `par`.
pub fn scope_of(sc: &ScopedCond) -> Term {
    match sc {
        ScopedCond::Pred(p) => {
            Term::tuple(p.units.iter().map(|u| u.term.clone()).collect())
        }
        ScopedCond::With(_, r) => scope_of(r),
        ScopedCond::Par { arms, .. } => {
            Term::opt(arms.iter().map(|(_, a)| scope_of(a)).collect())
        }
    }
}

fn owned_vars(t: &Term) -> BTreeSet<String> {
    t.vars().into_iter().map(str::to_string).collect()
}

fn subterms<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
    out.push(t);
    match t {
        Term::Tuple(ts) | Term::DUnion(ts) | Term::Opt(ts) => {
            for c in ts {
                subterms(c, out);
            }
        }
        // indexes repeat element data and would only produce phantom matches
        Term::Set { elem, .. } => subterms(elem, out),
        Term::Content(inner) => subterms(inner, out),
        Term::Var(_) | Term::Eps => {}
    }
}

fn dunion_subterms(t: &Term) -> Vec<&Term> {
    let mut all = Vec::new();
    subterms(t, &mut all);
    all.retain(|s| matches!(s, Term::DUnion(_)));
    all
}

fn term_contains(t: &Term, key: &str) -> bool {
    let mut all = Vec::new();
    subterms(t, &mut all);
    all.iter().any(|s| s.canon_key() == key)
}

/// The smallest subterm of `t` of one of the wanted kinds whose variables
/// cover `vars`.
fn covering<'a>(t: &'a Term, vars: &BTreeSet<String>, sets_only: bool) -> Option<&'a Term> {
    let mut all = Vec::new();
    subterms(t, &mut all);
    all.retain(|s| match s {
        Term::Set { .. } => true,
        Term::DUnion(_) => !sets_only,
        _ => false,
    });
    all.sort_by_key(|s| s.size());
    all.into_iter().find(|s| vars.iter().all(|v| owned_vars(s).contains(v)))
}

// -- collecting the argument units of a predicate ---------------------------

struct UnitReq {
    vars: BTreeSet<String>,
    set_like: bool,
    context: bool,
}

fn atom_req(var: &str, context: bool, out: &mut Vec<UnitReq>) {
    out.push(UnitReq {
        vars: std::iter::once(var.to_string()).collect(),
        set_like: false,
        context,
    });
}

fn cond_units(c: &Cond, context: bool, out: &mut Vec<UnitReq>) -> Result<()> {
    match c {
        Cond::Cmp { lhs, rhs, .. } => {
            operand_units(lhs, context, out)?;
            operand_units(rhs, context, out)?;
        }
        Cond::PathTest { var, .. } => atom_req(var, context, out),
        Cond::Fun(f) => cp_units(&f.arg, context, out)?,
        Cond::Not(inner) => cond_units(inner, context, out)?,
        Cond::And(cs) | Cond::Or(cs) | Cond::OptBranch(cs) => {
            for c in cs {
                cond_units(c, context, out)?;
            }
        }
        Cond::Quantified { term, domain, .. } => {
            // the quantifier ranges over a set; its body speaks about members
            let dom = domain.clone().unwrap_or_else(|| UTerm::Set(Box::new(term.clone())));
            uterm_units(&dom, context, out);
        }
        Cond::Any(u) => uterm_units(u, context, out),
        Cond::Par(..) | Cond::With(..) => {
            return Err(Error::InconsistentCondition(
                "'par' and 'with' cannot appear inside a predicate".into(),
            ))
        }
    }
    Ok(())
}

fn operand_units(o: &Operand, context: bool, out: &mut Vec<UnitReq>) -> Result<()> {
    match o {
        Operand::Cp(cp) => cp_units(cp, context, out),
        Operand::Sel { var, .. } => {
            atom_req(var, context, out);
            Ok(())
        }
    }
}

fn cp_units(cp: &Cp, context: bool, out: &mut Vec<UnitReq>) -> Result<()> {
    match cp {
        Cp::Var(x) | Cp::Loc(x) => atom_req(x, context, out),
        Cp::Str(_) | Cp::Num(_) | Cp::Bool(_) | Cp::Empty | Cp::Nil => {}
        Cp::Fun(f) => cp_units(&f.arg, context, out)?,
        Cp::Elem(name, inner) => {
            if let NamePtn::Var(v) = name {
                atom_req(v, context, out);
            }
            cp_units(inner, context, out)?;
        }
        Cp::Label(_, inner) => cp_units(inner, context, out)?,
        Cp::Cons(h, t) => {
            cp_units(h, context, out)?;
            cp_units(t, context, out)?;
        }
        Cp::Tuple(cs) | Cp::DUnion(cs) | Cp::Opt(cs) => {
            for c in cs {
                cp_units(c, context, out)?;
            }
        }
        Cp::Hid(base, t) | Cp::Elim(base, t) => {
            cp_units(base, context, out)?;
            uterm_units(t, true, out);
        }
        Cp::Set { elem, .. } => {
            let mut vars = Vec::new();
            cp_vars(elem, &mut vars);
            out.push(UnitReq {
                vars: vars.into_iter().collect(),
                set_like: true,
                context,
            });
        }
    }
    Ok(())
}

fn cp_vars(cp: &Cp, out: &mut Vec<String>) {
    match cp {
        Cp::Var(x) | Cp::Loc(x) => out.push(x.clone()),
        Cp::Str(_) | Cp::Num(_) | Cp::Bool(_) | Cp::Empty | Cp::Nil => {}
        Cp::Fun(f) => cp_vars(&f.arg, out),
        Cp::Elem(name, inner) => {
            if let NamePtn::Var(v) = name {
                out.push(v.clone());
            }
            cp_vars(inner, out);
        }
        Cp::Label(_, inner) => cp_vars(inner, out),
        Cp::Cons(h, t) => {
            cp_vars(h, out);
            cp_vars(t, out);
        }
        Cp::Tuple(cs) | Cp::DUnion(cs) | Cp::Opt(cs) => {
            cs.iter().for_each(|c| cp_vars(c, out))
        }
        Cp::Hid(base, t) | Cp::Elim(base, t) => {
            cp_vars(base, out);
            out.extend(t.vars());
        }
        Cp::Set { elem, .. } => cp_vars(elem, out),
    }
}

fn uterm_units(u: &UTerm, context: bool, out: &mut Vec<UnitReq>) {
    match u {
        UTerm::Var(x) => atom_req(x, context, out),
        UTerm::Set(inner) => out.push(UnitReq {
            vars: inner.vars().into_iter().collect(),
            set_like: true,
            context,
        }),
        UTerm::Tuple(cs) | UTerm::DUnion(cs) | UTerm::Opt(cs) => {
            for c in cs {
                uterm_units(c, context, out);
            }
        }
        UTerm::Content(inner) => uterm_units(inner, context, out),
    }
}

fn resolve_units(c: &Cond, t: &Term) -> Result<Vec<Unit>> {
    let mut reqs = Vec::new();
    cond_units(c, false, &mut reqs)?;
    let mut units: Vec<Unit> = Vec::new();
    for req in reqs {
        let term = if req.set_like {
            covering(t, &req.vars, true)
                .or_else(|| covering(t, &req.vars, false))
                .ok_or_else(|| {
                    Error::Scope(format!(
                        "no set of the query groups {} together",
                        req.vars.iter().cloned().collect::<Vec<_>>().join(", ")
                    ))
                })?
                .clone()
        } else {
            let var = req.vars.iter().next().expect("atom request has a variable");
            if !term_contains(t, var) {
                return Err(Error::Scope(format!(
                    "variable {var} is not bound by the query"
                )));
            }
            Term::Var(var.clone())
        };
        let key = term.canon_key();
        match units.iter_mut().find(|u| u.key == key) {
            Some(u) => u.context &= req.context,
            None => units.push(Unit {
                vars: owned_vars(&term),
                set_like: term.is_set() || matches!(term, Term::DUnion(_)),
                term,
                key,
                context: req.context,
            }),
        }
    }
    // units must not nest: a predicate cannot restrict a set and, at the same
    // time, data inside that set
    for a in &units {
        for b in &units {
            if a.key != b.key && term_contains(&a.term, &b.key) {
                return Err(Error::InconsistentCondition(format!(
                    "the argument mixes {} with {}, which lies inside it; \
                     stage the restrictions with 'with' instead",
                    a.term, b.term
                )));
            }
        }
    }
    Ok(units)
}

// -- consistency of with-stages and par-arms --------------------------------

/// Is the scope made of `finer` units strictly below the scope made of
/// `coarser` units?  A unit refines another by sitting strictly inside it;
/// context units may reappear unchanged, and a set may be restricted again.
fn refines(finer: &[&Unit], coarser: &[&Unit]) -> bool {
    finer.iter().all(|v| {
        coarser.iter().any(|u| {
            (u.key != v.key && term_contains(&u.term, &v.key))
                || (u.key == v.key && u.context)
                || (u.key == v.key && u.set_like && v.set_like)
        })
    })
}

fn locate_par(
    arm_units: &[Vec<&Unit>],
    t: &Term,
) -> Result<(DInfo, Vec<BTreeSet<usize>>)> {
    for d in dunion_subterms(t) {
        let Term::DUnion(bs) = d else { continue };
        let branch_vars: Vec<BTreeSet<String>> = bs.iter().map(owned_vars).collect();
        let distinctive: Vec<BTreeSet<String>> = branch_vars
            .iter()
            .enumerate()
            .map(|(i, bv)| {
                bv.iter()
                    .filter(|v| {
                        branch_vars
                            .iter()
                            .enumerate()
                            .all(|(j, other)| i == j || !other.contains(*v))
                    })
                    .cloned()
                    .collect()
            })
            .collect();
        if distinctive.iter().any(BTreeSet::is_empty) {
            continue;
        }
        let touched: Vec<BTreeSet<usize>> = arm_units
            .iter()
            .map(|units| {
                let vars: BTreeSet<&String> =
                    units.iter().flat_map(|u| u.vars.iter()).collect();
                distinctive
                    .iter()
                    .enumerate()
                    .filter(|(_, dv)| dv.iter().any(|v| vars.contains(v)))
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        let all_placed = touched.iter().all(|b| !b.is_empty());
        let disjoint = touched
            .iter()
            .enumerate()
            .all(|(i, a)| touched.iter().skip(i + 1).all(|b| a.is_disjoint(b)));
        if all_placed && disjoint {
            return Ok((
                DInfo {
                    term: d.clone(),
                    canon: d.canon_key(),
                    branch_vars,
                    distinctive,
                },
                touched,
            ));
        }
    }
    Err(Error::InconsistentCondition(
        "parallel arms must restrict different branches of one disjunction".into(),
    ))
}

/// Resolve and check the scopes of a whole condition.
pub fn compute_scope(c: &Cond, t: &Term) -> Result<ScopedCond> {
    match c {
        Cond::With(c1, c2) => {
            let l = compute_scope(c1, t)?;
            let r = compute_scope(c2, t)?;
            if !matches!(r, ScopedCond::Pred(_)) {
                return Err(Error::InconsistentCondition(
                    "the right-hand side of 'with' must be a predicate".into(),
                ));
            }
            let fine = l.scope_units();
            let coarse = r.scope_units();
            let par_same = matches!(l, ScopedCond::Par { .. })
                && scope_keys(&fine) == scope_keys(&coarse);
            if !refines(&fine, &coarse) && !par_same {
                return Err(Error::InconsistentCondition(format!(
                    "'with' stages must be successively coarser: {} does not \
                     aggregate {}",
                    Term::tuple(coarse.iter().map(|u| u.term.clone()).collect()),
                    Term::tuple(fine.iter().map(|u| u.term.clone()).collect()),
                )));
            }
            Ok(ScopedCond::With(Box::new(l), Box::new(r)))
        }
        Cond::Par(..) => {
            let mut arms = Vec::new();
            par_arms(c, &mut arms);
            let scoped: Vec<ScopedCond> =
                arms.iter().map(|a| compute_scope(a, t)).collect::<Result<_>>()?;
            let unit_lists: Vec<Vec<&Unit>> = scoped.iter().map(|s| s.units()).collect();
            let (dunion, touched) = locate_par(&unit_lists, t)?;
            Ok(ScopedCond::Par {
                dunion,
                arms: touched.into_iter().zip(scoped).collect(),
            })
        }
        _ => Ok(ScopedCond::Pred(ScopedPred {
            cond: c.clone(),
            units: resolve_units(c, t)?,
        })),
    }
}

fn scope_keys(units: &[&Unit]) -> BTreeSet<String> {
    units.iter().map(|u| u.key.clone()).collect()
}

fn par_arms<'a>(c: &'a Cond, out: &mut Vec<&'a Cond>) {
    match c {
        Cond::Par(l, r) => {
            par_arms(l, out);
            par_arms(r, out);
        }
        other => out.push(other),
    }
}

// ---------------------------------------------------------------------------
// parallel completion
// ---------------------------------------------------------------------------

/// Complete a condition with `any(...)` arms for the disjunctive branches it
/// leaves unrestricted, so filtering reaches a verdict on every branch.
pub fn complement(c: &Cond, t: &Term) -> Result<Cond> {
    compute_scope(c, t)?;
    let out = comp_rec(c, t)?;
    compute_scope(&out, t)?;
    Ok(out)
}

/// Does the condition already cover every branch of every disjunction its
/// units enter?
pub fn parallel_complete(c: &Cond, t: &Term) -> Result<bool> {
    let sc = compute_scope(c, t)?;
    Ok(pads_for(&sc.units(), t).is_empty())
}

fn comp_rec(c: &Cond, t: &Term) -> Result<Cond> {
    match c {
        Cond::With(c1, c2) => {
            let head = Cond::With(Box::new(comp_rec(c1, t)?), c2.clone());
            let sc2 = compute_scope(c2, t)?;
            Ok(attach_pads(head, pads_for(&sc2.units(), t)))
        }
        Cond::Par(..) => {
            // completion looks at the joint cover of all arms
            let mut arms = Vec::new();
            par_arms(c, &mut arms);
            let scoped: Vec<ScopedCond> =
                arms.iter().map(|a| compute_scope(a, t)).collect::<Result<_>>()?;
            let all_units: Vec<&Unit> = scoped.iter().flat_map(|s| s.units()).collect();
            Ok(attach_pads(c.clone(), pads_for(&all_units, t)))
        }
        pred => {
            let sc = compute_scope(pred, t)?;
            Ok(attach_pads(pred.clone(), pads_for(&sc.units(), t)))
        }
    }
}

fn attach_pads(mut c: Cond, pads: Vec<UTerm>) -> Cond {
    for p in pads {
        c = Cond::Par(Box::new(c), Box::new(Cond::Any(p)));
    }
    c
}

/// The `any(...)` arguments needed to cover the branches the units miss.
fn pads_for(units: &[&Unit], t: &Term) -> Vec<UTerm> {
    let vars: BTreeSet<&String> = units.iter().flat_map(|u| u.vars.iter()).collect();
    let mut pads = Vec::new();
    for d in dunion_subterms(t) {
        let Term::DUnion(bs) = d else { continue };
        let branch_vars: Vec<BTreeSet<String>> = bs.iter().map(owned_vars).collect();
        let distinctive: Vec<BTreeSet<String>> = branch_vars
            .iter()
            .enumerate()
            .map(|(i, bv)| {
                bv.iter()
                    .filter(|v| {
                        branch_vars
                            .iter()
                            .enumerate()
                            .all(|(j, other)| i == j || !other.contains(*v))
                    })
                    .cloned()
                    .collect()
            })
            .collect();
        let covered: Vec<bool> = distinctive
            .iter()
            .map(|dv| dv.iter().any(|v| vars.contains(v)))
            .collect();
        if covered.iter().any(|c| *c) && !covered.iter().all(|c| *c) {
            for (k, c) in covered.iter().enumerate() {
                if !c {
                    pads.push(branch_pad(&bs[k]));
                }
            }
        }
    }
    pads
}

/// The written form of a branch for an `any(...)` pad: its element data, one
/// level of sets kept as sets.
fn branch_pad(branch: &Term) -> UTerm {
    match branch {
        Term::Set { elem, .. } => pad_of(elem),
        other => pad_of(other),
    }
}

fn pad_of(t: &Term) -> UTerm {
    match t {
        Term::Var(x) => UTerm::Var(x.clone()),
        Term::Tuple(ts) => UTerm::Tuple(ts.iter().map(pad_of).collect()),
        Term::DUnion(ts) => UTerm::DUnion(ts.iter().map(pad_of).collect()),
        Term::Opt(ts) => UTerm::Opt(ts.iter().map(pad_of).collect()),
        Term::Set { elem, .. } => UTerm::Set(Box::new(pad_of(elem))),
        Term::Content(inner) => pad_of(inner),
        Term::Eps => UTerm::Tuple(Vec::new()),
    }
}

// ---------------------------------------------------------------------------
// restriction rows
// ---------------------------------------------------------------------------

type IdSet = BTreeSet<MemberId>;
type Region = (String, usize);

/// A set value presented to a predicate: the live members under the row's
/// context.
#[derive(Debug, Clone)]
pub struct LiveMember {
    pub ids: IdSet,
    pub elem: Term,
    pub b: Binding,
}

#[derive(Debug, Clone)]
pub enum EnvVal {
    Atom(Option<(Val, Location)>),
    SetV(Vec<LiveMember>),
}

type Env = BTreeMap<String, EnvVal>;

/// One restriction row: an assignment of the predicate's units, its member
/// footprint, and the verdict.
#[derive(Debug, Clone)]
pub struct Row {
    pub ids: IdSet,
    pub env: Env,
    pub pass: bool,
}

/// The evaluated restriction of one predicate.
#[derive(Debug, Clone)]
pub struct Gate {
    pub rows: Vec<Row>,
    pub touched: IdSet,
}

impl Gate {
    fn alive(&self, ids: &IdSet) -> bool {
        let seen: IdSet = ids.intersection(&self.touched).copied().collect();
        seen.is_empty()
            || self
                .rows
                .iter()
                .any(|r| r.pass && seen.iter().all(|i| r.ids.contains(i)))
    }
}

/// The evaluated liveness tree of a whole condition.
#[derive(Debug, Clone)]
pub enum LiveNode {
    Gate(Gate),
    Seq(Vec<LiveNode>),
    Par { canon: String, arms: Vec<(BTreeSet<usize>, LiveNode)> },
}

impl LiveNode {
    fn alive(&self, ids: &IdSet, regions: &[Region]) -> bool {
        match self {
            LiveNode::Gate(g) => g.alive(ids),
            LiveNode::Seq(ns) => ns.iter().all(|n| n.alive(ids, regions)),
            LiveNode::Par { canon, arms } => arms.iter().any(|(owned, node)| {
                let foreign = regions
                    .iter()
                    .any(|(d, k)| d == canon && !owned.contains(k));
                !foreign && node.alive(ids, regions)
            }),
        }
    }
}

fn alive_under(prior: &[&LiveNode], ids: &IdSet, regions: &[Region]) -> bool {
    prior.iter().all(|n| n.alive(ids, regions))
}

/// Row enumeration for one predicate over the original binding.
struct Walker<'a> {
    units: &'a [Unit],
    prior: Vec<&'a LiveNode>,
    dlist: &'a [DInfo],
    /// Arm context: per par d-union, the branches this evaluation owns.
    owned: Vec<(String, BTreeSet<usize>)>,
    /// Restrict liveness to these members (used by the satisfaction check).
    live_ids: Option<&'a IdSet>,
}

impl<'a> Walker<'a> {
    fn alive(&self, ids: &IdSet, regions: &[Region]) -> bool {
        if let Some(live) = self.live_ids {
            if !ids.iter().all(|i| live.contains(i)) {
                return false;
            }
        }
        alive_under(&self.prior, ids, regions)
    }

    fn unit_at(&self, t: &Term) -> Option<&'a Unit> {
        let key = t.canon_key();
        self.units.iter().find(|u| u.key == key)
    }

    fn has_units(&self, t: &Term) -> bool {
        let mut all = Vec::new();
        subterms(t, &mut all);
        all.iter()
            .any(|s| self.units.iter().any(|u| u.key == s.canon_key()))
    }

    fn branch_regions(&self, branch: &Term) -> Vec<Region> {
        let vars = owned_vars(branch);
        let mut out = Vec::new();
        for d in self.dlist {
            let hits: Vec<usize> = d
                .distinctive
                .iter()
                .enumerate()
                .filter(|(_, dv)| dv.iter().any(|v| vars.contains(v)))
                .map(|(k, _)| k)
                .collect();
            if hits.len() == 1 {
                out.push((d.canon.clone(), hits[0]));
            }
        }
        out
    }

    fn branch_owned(&self, regions: &[Region]) -> bool {
        regions.iter().all(|(d, k)| {
            self.owned
                .iter()
                .filter(|(od, _)| od == d)
                .all(|(_, set)| set.contains(k))
        })
    }

    /// Branch commitments inside a member's own body (option markers).
    fn member_regions(&self, t: &Term, b: &Binding, out: &mut Vec<Region>) {
        match (t, b) {
            (Term::Opt(ts), Binding::Branch(k, _, inner)) if *k < ts.len() => {
                out.extend(self.branch_regions(&ts[*k]));
                self.member_regions(&ts[*k], inner, out);
            }
            (Term::Tuple(ts), Binding::Tuple(bs)) if ts.len() == bs.len() => {
                for (ct, cb) in ts.iter().zip(bs) {
                    self.member_regions(ct, cb, out);
                }
            }
            (Term::Content(inner), b) => self.member_regions(inner, b, out),
            // members of inner sets commit on their own; d-unions span
            _ => {}
        }
    }

    fn member_alive(
        &self,
        elem: &Term,
        m: &Member,
        fixed: &IdSet,
        regions: &[Region],
    ) -> bool {
        let mut ids = fixed.clone();
        ids.extend(m.prov.iter().copied());
        let mut rg = regions.to_vec();
        self.member_regions(elem, &m.b, &mut rg);
        self.alive(&ids, &rg)
    }

    // -- rows --------------------------------------------------------------

    fn rows(&self, t: &Term, b: &Binding) -> Result<Vec<Row>> {
        self.rows_at(t, b, &IdSet::new(), &[])
    }

    fn rows_at(
        &self,
        t: &Term,
        b: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<Vec<Row>> {
        if let Some(u) = self.unit_at(t) {
            return self.unit_rows(u, t, b, fixed, regions);
        }
        if !self.has_units(t) {
            return Ok(vec![Row { ids: IdSet::new(), env: Env::new(), pass: false }]);
        }
        if b.is_null() {
            // a null-extended piece: its units are present but hold nothing
            let mut env = Env::new();
            self.null_env(t, &mut env);
            return Ok(vec![Row { ids: IdSet::new(), env, pass: false }]);
        }
        match (t, b) {
            (Term::Tuple(ts), Binding::Tuple(bs)) if ts.len() == bs.len() => {
                let mut acc =
                    vec![Row { ids: IdSet::new(), env: Env::new(), pass: false }];
                for (ct, cb) in ts.iter().zip(bs) {
                    let sub = self.rows_at(ct, cb, fixed, regions)?;
                    acc = cross(acc, sub);
                    if acc.is_empty() {
                        return Ok(acc);
                    }
                }
                Ok(acc)
            }
            (Term::Set { elem, .. }, Binding::Set(ms)) => {
                let mut out = Vec::new();
                for m in ms {
                    if !self.member_alive(elem, m, fixed, regions) {
                        continue;
                    }
                    let mut inner_fixed = fixed.clone();
                    inner_fixed.extend(m.prov.iter().copied());
                    for mut row in self.rows_at(elem, &m.b, &inner_fixed, regions)? {
                        row.ids.extend(m.prov.iter().copied());
                        out.push(row);
                    }
                }
                Ok(out)
            }
            (Term::DUnion(ts), Binding::DUnion(bs)) if ts.len() == bs.len() => {
                let mut out = Vec::new();
                for (ct, cb) in ts.iter().zip(bs) {
                    out.extend(self.branch_rows(ct, cb, fixed, regions)?);
                }
                Ok(out)
            }
            (Term::Opt(ts), Binding::Branch(k, _, inner)) if *k < ts.len() => {
                self.branch_rows(&ts[*k], inner, fixed, regions)
            }
            (Term::Opt(ts), other) => {
                // an unmarked binding accords some branch; find it
                for ct in ts {
                    if accords(other, ct) {
                        return self.branch_rows(ct, other, fixed, regions);
                    }
                }
                Err(Error::internal(format!(
                    "binding {other} fits no branch of {t} during filtering"
                )))
            }
            (Term::Content(inner), b) => self.rows_at(inner, b, fixed, regions),
            (Term::Var(_) | Term::Eps, _) => {
                Ok(vec![Row { ids: IdSet::new(), env: Env::new(), pass: false }])
            }
            _ => Err(Error::internal(format!(
                "binding {b} does not fit {t} during filtering"
            ))),
        }
    }

    fn null_env(&self, t: &Term, env: &mut Env) {
        let mut all = Vec::new();
        subterms(t, &mut all);
        for s in all {
            let key = s.canon_key();
            if let Some(u) = self.units.iter().find(|u| u.key == key) {
                env.insert(
                    u.key.clone(),
                    if u.set_like {
                        EnvVal::SetV(Vec::new())
                    } else {
                        EnvVal::Atom(None)
                    },
                );
            }
        }
    }

    fn branch_rows(
        &self,
        ct: &Term,
        cb: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<Vec<Row>> {
        if !self.has_units(ct) {
            return Ok(Vec::new());
        }
        let tags = self.branch_regions(ct);
        if !self.branch_owned(&tags) {
            return Ok(Vec::new());
        }
        let mut rg = regions.to_vec();
        rg.extend(tags);
        self.rows_at(ct, cb, fixed, &rg)
    }

    fn unit_rows(
        &self,
        u: &Unit,
        t: &Term,
        b: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<Vec<Row>> {
        if !u.set_like {
            let Term::Var(x) = &u.term else {
                return Err(Error::internal("unit shape"));
            };
            let val = match b {
                Binding::Var(y, v) if y == x => v.clone(),
                other if other.is_null() => None,
                other => {
                    return Err(Error::internal(format!(
                        "expected an atom for {x}, found {other}"
                    )))
                }
            };
            let mut env = Env::new();
            env.insert(u.key.clone(), EnvVal::Atom(val));
            return Ok(vec![Row { ids: IdSet::new(), env, pass: false }]);
        }
        let (ids, members) = self.set_view(t, b, fixed, regions)?;
        let mut env = Env::new();
        env.insert(u.key.clone(), EnvVal::SetV(members));
        Ok(vec![Row { ids, env, pass: false }])
    }

    /// The live members under a set-like unit, with the footprint of the
    /// whole live subtree.
    fn set_view(
        &self,
        t: &Term,
        b: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<(IdSet, Vec<LiveMember>)> {
        match (t, b) {
            (Term::Set { elem, .. }, Binding::Set(ms)) => {
                let mut ids = IdSet::new();
                let mut members = Vec::new();
                for m in ms {
                    if !self.member_alive(elem, m, fixed, regions) {
                        continue;
                    }
                    let mut inner_fixed = fixed.clone();
                    inner_fixed.extend(m.prov.iter().copied());
                    let (sub_ids, pruned) =
                        self.live_view(elem, &m.b, &inner_fixed, regions)?;
                    let mut mids: IdSet = m.prov.iter().copied().collect();
                    mids.extend(sub_ids);
                    ids.extend(mids.iter().copied());
                    if !pruned.is_null() {
                        members.push(LiveMember {
                            ids: mids,
                            elem: (**elem).clone(),
                            b: pruned,
                        });
                    }
                }
                Ok((ids, members))
            }
            (Term::DUnion(ts), Binding::DUnion(bs)) if ts.len() == bs.len() => {
                let mut ids = IdSet::new();
                let mut members = Vec::new();
                for (ct, cb) in ts.iter().zip(bs) {
                    let mut rg = regions.to_vec();
                    rg.extend(self.branch_regions(ct));
                    let (sub_ids, sub_members) = self.set_view(ct, cb, fixed, &rg)?;
                    ids.extend(sub_ids);
                    members.extend(sub_members);
                }
                Ok((ids, members))
            }
            (Term::Opt(ts), Binding::Branch(k, _, inner)) if *k < ts.len() => {
                let mut rg = regions.to_vec();
                rg.extend(self.branch_regions(&ts[*k]));
                self.set_view(&ts[*k], inner, fixed, &rg)
            }
            (Term::Content(inner), b) => self.set_view(inner, b, fixed, regions),
            (t, b) if b.is_null() => {
                let _ = t;
                Ok((IdSet::new(), Vec::new()))
            }
            _ => Err(Error::internal(format!(
                "no set value at {t} during filtering"
            ))),
        }
    }

    /// A copy of the binding with dead members dropped, and the footprint of
    /// what remains.
    fn live_view(
        &self,
        t: &Term,
        b: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<(IdSet, Binding)> {
        match (t, b) {
            (_, Binding::Var(..) | Binding::Unit | Binding::NullUnit | Binding::False) => {
                Ok((IdSet::new(), b.clone()))
            }
            (Term::Tuple(ts), Binding::Tuple(bs)) if ts.len() == bs.len() => {
                let mut ids = IdSet::new();
                let mut out = Vec::with_capacity(bs.len());
                for (ct, cb) in ts.iter().zip(bs) {
                    let (sub, pruned) = self.live_view(ct, cb, fixed, regions)?;
                    ids.extend(sub);
                    out.push(pruned);
                }
                Ok((ids, Binding::Tuple(out)))
            }
            (Term::DUnion(ts), Binding::DUnion(bs)) if ts.len() == bs.len() => {
                let mut ids = IdSet::new();
                let mut out = Vec::with_capacity(bs.len());
                for (ct, cb) in ts.iter().zip(bs) {
                    let mut rg = regions.to_vec();
                    rg.extend(self.branch_regions(ct));
                    let (sub, pruned) = self.live_view(ct, cb, fixed, &rg)?;
                    ids.extend(sub);
                    out.push(pruned);
                }
                Ok((ids, Binding::DUnion(out)))
            }
            (Term::Opt(ts), Binding::Branch(k, n, inner)) if *k < ts.len() => {
                let mut rg = regions.to_vec();
                rg.extend(self.branch_regions(&ts[*k]));
                let (ids, pruned) = self.live_view(&ts[*k], inner, fixed, &rg)?;
                Ok((ids, Binding::Branch(*k, *n, Box::new(pruned))))
            }
            (Term::Set { elem, .. }, Binding::Set(ms)) => {
                let mut ids = IdSet::new();
                let mut out = Vec::new();
                for m in ms {
                    if !self.member_alive(elem, m, fixed, regions) {
                        continue;
                    }
                    let mut inner_fixed = fixed.clone();
                    inner_fixed.extend(m.prov.iter().copied());
                    let (sub, pruned) =
                        self.live_view(elem, &m.b, &inner_fixed, regions)?;
                    ids.extend(m.prov.iter().copied());
                    ids.extend(sub);
                    out.push(Member { prov: m.prov.clone(), b: pruned });
                }
                Ok((ids, Binding::Set(out)))
            }
            (Term::Content(inner), b) => self.live_view(inner, b, fixed, regions),
            _ => Err(Error::internal(format!(
                "binding {b} does not fit {t} during filtering"
            ))),
        }
    }
}

fn cross(acc: Vec<Row>, sub: Vec<Row>) -> Vec<Row> {
    if sub.len() == 1 && sub[0].env.is_empty() && sub[0].ids.is_empty() {
        return acc;
    }
    if acc.len() == 1 && acc[0].env.is_empty() && acc[0].ids.is_empty() {
        return sub;
    }
    let mut out = Vec::with_capacity(acc.len() * sub.len());
    for a in &acc {
        for s in &sub {
            let mut ids = a.ids.clone();
            ids.extend(s.ids.iter().copied());
            let mut env = a.env.clone();
            env.extend(s.env.iter().map(|(k, v)| (k.clone(), v.clone())));
            out.push(Row { ids, env, pass: false });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// predicate evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    True,
    False,
    /// A null or missing operand: the predicate has no answer and fails.
    Undef,
}

use Verdict::{False, True, Undef};

fn v_not(v: Verdict) -> Verdict {
    match v {
        True => False,
        False => True,
        Undef => Undef,
    }
}

fn v_and(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (False, _) | (_, False) => False,
        (Undef, _) | (_, Undef) => Undef,
        _ => True,
    }
}

fn v_or(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (True, _) | (_, True) => True,
        (Undef, _) | (_, Undef) => Undef,
        _ => False,
    }
}

/// A value during predicate evaluation.
#[derive(Debug, Clone)]
enum CV {
    Num(f64),
    Str(String),
    Bool(bool),
    Loc(Location),
    V(Val),
    SetLen(usize),
    Null,
}

impl CV {
    fn text(&self) -> Option<String> {
        match self {
            CV::Num(n) => Some(crate::syntax::fmt_num(*n)),
            CV::Str(s) => Some(s.clone()),
            CV::Bool(b) => Some(b.to_string()),
            CV::V(v) => Some(v.text()),
            CV::SetLen(_) | CV::Loc(_) | CV::Null => None,
        }
    }

    fn num(&self) -> Option<f64> {
        match self {
            CV::Num(n) => Some(*n),
            CV::SetLen(n) => Some(*n as f64),
            CV::Str(s) => s.trim().parse().ok(),
            CV::V(v) => v.text().trim().parse().ok(),
            CV::Bool(_) | CV::Loc(_) | CV::Null => None,
        }
    }
}

fn env_atom_vars(env: &Env) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (k, v) in env {
        match v {
            EnvVal::Atom(_) => {
                out.insert(k.clone());
            }
            EnvVal::SetV(_) => {}
        }
    }
    out
}

fn cond_var_names(c: &Cond) -> BTreeSet<String> {
    let mut reqs = Vec::new();
    let _ = cond_units(c, false, &mut reqs);
    reqs.into_iter().filter(|r| !r.set_like).flat_map(|r| r.vars).collect()
}

fn eval_cond(c: &Cond, env: &Env) -> Result<Verdict> {
    match c {
        Cond::Cmp { op, lhs, rhs } => {
            let a = operand_values(lhs, env)?;
            let b = operand_values(rhs, env)?;
            // selections are existential: some matched pair must satisfy it
            let mut best = if a.is_empty() || b.is_empty() { Undef } else { False };
            for x in &a {
                for y in &b {
                    best = v_or(best, compare(*op, x, y));
                    if best == True {
                        return Ok(True);
                    }
                }
            }
            Ok(best)
        }
        Cond::PathTest { var, path } => {
            let Some(EnvVal::Atom(v)) = env.get(var) else { return Ok(Undef) };
            let Some((val, _)) = v else { return Ok(Undef) };
            let vals = sel_values(val, path)?;
            Ok(if vals.is_empty() { False } else { True })
        }
        Cond::Fun(f) => eval_fun(f, env),
        Cond::Not(inner) => Ok(v_not(eval_cond(inner, env)?)),
        Cond::And(cs) => {
            let mut out = True;
            for c in cs {
                out = v_and(out, eval_cond(c, env)?);
            }
            Ok(out)
        }
        Cond::Or(cs) => {
            let mut out = False;
            for c in cs {
                out = v_or(out, eval_cond(c, env)?);
            }
            Ok(out)
        }
        Cond::OptBranch(cs) => {
            // dispatch on the branch this row came from: the arm whose
            // variables the row actually carries
            let present = env_atom_vars(env);
            for arm in cs {
                if cond_var_names(arm).is_subset(&present) {
                    return eval_cond(arm, env);
                }
            }
            Ok(Undef)
        }
        Cond::Quantified { quant, term, domain, body } => {
            let dom = domain.clone().unwrap_or_else(|| UTerm::Set(Box::new(term.clone())));
            let vars: BTreeSet<String> = dom.vars().into_iter().collect();
            let Some(EnvVal::SetV(members)) = lookup_set(env, &vars) else {
                return Ok(Undef);
            };
            let mut out = match quant {
                Quant::ForEach => True,
                Quant::ForSome => False,
            };
            for m in members {
                let mut inner = env.clone();
                member_env(&m.elem, &m.b, &mut inner);
                let v = match eval_cond(body, &inner)? {
                    True => True,
                    _ => False,
                };
                out = match quant {
                    Quant::ForEach => v_and(out, v),
                    Quant::ForSome => v_or(out, v),
                };
            }
            Ok(out)
        }
        Cond::Any(_) => Ok(True),
        Cond::Par(..) | Cond::With(..) => {
            Err(Error::internal("composite condition evaluated as a predicate"))
        }
    }
}

fn lookup_set<'e>(env: &'e Env, vars: &BTreeSet<String>) -> Option<&'e EnvVal> {
    // a set argument names some of the variables inside the grouping set
    env.values().find(|v| {
        matches!(v, EnvVal::SetV(_))
            && match v {
                EnvVal::SetV(ms) => {
                    let have: BTreeSet<String> = ms
                        .iter()
                        .flat_map(|m| owned_vars(&m.elem))
                        .collect();
                    if ms.is_empty() {
                        true
                    } else {
                        vars.iter().all(|v| have.contains(v))
                    }
                }
                _ => false,
            }
    })
}

fn member_env(t: &Term, b: &Binding, env: &mut Env) {
    match (t, b) {
        (Term::Var(x), Binding::Var(_, v)) => {
            env.insert(x.clone(), EnvVal::Atom(v.clone()));
        }
        (Term::Var(x), other) if other.is_null() => {
            env.insert(x.clone(), EnvVal::Atom(None));
        }
        (Term::Tuple(ts), Binding::Tuple(bs)) if ts.len() == bs.len() => {
            for (ct, cb) in ts.iter().zip(bs) {
                member_env(ct, cb, env);
            }
        }
        (Term::DUnion(ts), Binding::DUnion(bs)) if ts.len() == bs.len() => {
            for (ct, cb) in ts.iter().zip(bs) {
                member_env(ct, cb, env);
            }
        }
        (Term::Opt(ts), Binding::Branch(k, _, inner)) if *k < ts.len() => {
            member_env(&ts[*k], inner, env);
        }
        (Term::Content(inner), b) => member_env(inner, b, env),
        (Term::Set { elem, .. }, Binding::Set(ms)) => {
            let members = ms
                .iter()
                .filter(|m| !m.b.is_null())
                .map(|m| LiveMember {
                    ids: IdSet::new(),
                    elem: (**elem).clone(),
                    b: m.b.clone(),
                })
                .collect();
            env.insert(t.canon_key(), EnvVal::SetV(members));
        }
        _ => {}
    }
}

fn operand_values(o: &Operand, env: &Env) -> Result<Vec<CV>> {
    match o {
        Operand::Cp(cp) => Ok(vec![resolve_cp(cp, env)?]),
        Operand::Sel { var, path } => {
            let Some(EnvVal::Atom(v)) = env.get(var) else { return Ok(vec![CV::Null]) };
            let Some((val, _)) = v else { return Ok(vec![CV::Null]) };
            let vals = sel_values(val, path)?;
            if vals.is_empty() {
                return Ok(vec![CV::Null]);
            }
            Ok(vals.into_iter().map(|(v, _)| CV::V(v)).collect())
        }
    }
}

fn resolve_cp(cp: &Cp, env: &Env) -> Result<CV> {
    match cp {
        Cp::Var(x) => match env.get(x) {
            Some(EnvVal::Atom(Some((v, _)))) => Ok(CV::V(v.clone())),
            _ => Ok(CV::Null),
        },
        Cp::Str(s) => Ok(CV::Str(s.clone())),
        Cp::Num(n) => Ok(CV::Num(*n)),
        Cp::Bool(b) => Ok(CV::Bool(*b)),
        Cp::Empty => Ok(CV::Str(String::new())),
        Cp::Nil => Ok(CV::Null),
        Cp::Loc(x) => match env.get(x) {
            Some(EnvVal::Atom(Some((_, l)))) => Ok(CV::Loc(l.clone())),
            _ => Ok(CV::Null),
        },
        Cp::Fun(f) if f.name == "count" => {
            let inner = flat_args(&f.arg);
            let [arg] = inner.as_slice() else {
                return Err(Error::Type("count takes one set argument".into()));
            };
            match resolve_cp(arg, env)? {
                CV::SetLen(n) => Ok(CV::Num(n as f64)),
                CV::Null => Ok(CV::Null),
                _ => Err(Error::Type("count takes a set argument".into())),
            }
        }
        Cp::Fun(f) => match eval_fun(f, env)? {
            True => Ok(CV::Bool(true)),
            False => Ok(CV::Bool(false)),
            Undef => Ok(CV::Null),
        },
        Cp::Hid(base, _) | Cp::Elim(base, _) => resolve_cp(base, env),
        Cp::Set { elem, .. } => {
            let mut vars = Vec::new();
            cp_vars(elem, &mut vars);
            let vars: BTreeSet<String> = vars.into_iter().collect();
            match lookup_set(env, &vars) {
                Some(EnvVal::SetV(ms)) => Ok(CV::SetLen(ms.len())),
                _ => Ok(CV::Null),
            }
        }
        Cp::Tuple(_) | Cp::DUnion(_) | Cp::Opt(_) | Cp::Elem(..) | Cp::Label(..)
        | Cp::Cons(..) => Err(Error::Type(format!(
            "a condition cannot compare the construction pattern {cp:?}"
        ))),
    }
}

fn flat_args(cp: &Cp) -> Vec<&Cp> {
    match cp {
        Cp::Tuple(cs) => cs.iter().collect(),
        one => vec![one],
    }
}

fn eval_fun(f: &FunInvoke, env: &Env) -> Result<Verdict> {
    let args = flat_args(&f.arg);
    let vals: Vec<CV> = args
        .iter()
        .map(|a| resolve_cp(a, env))
        .collect::<Result<_>>()?;
    let texts: Vec<Option<String>> = vals.iter().map(CV::text).collect();
    let two = |test: &dyn Fn(&str, &str) -> bool| -> Verdict {
        match (texts.first(), texts.get(1)) {
            (Some(Some(a)), Some(Some(b))) => {
                if test(a, b) {
                    True
                } else {
                    False
                }
            }
            _ => Undef,
        }
    };
    match f.name.as_str() {
        "contains" => Ok(two(&|a, b| a.contains(b))),
        "startwith" => Ok(two(&|a, b| a.starts_with(b))),
        "endwith" => Ok(two(&|a, b| a.ends_with(b))),
        "commondomain" => Ok(two(&|a, b| {
            match (a.rsplit_once('@'), b.rsplit_once('@')) {
                (Some((_, da)), Some((_, db))) => da == db,
                _ => false,
            }
        })),
        "count" => Err(Error::Type("count is a value, not a predicate".into())),
        other => Err(Error::UnknownFunction(other.into())),
    }
}

fn compare(op: CmpOp, a: &CV, b: &CV) -> Verdict {
    if matches!(a, CV::Null) || matches!(b, CV::Null) {
        return Undef;
    }
    if let (CV::Loc(x), CV::Loc(y)) = (a, b) {
        use std::cmp::Ordering::*;
        return match op {
            CmpOp::Succ => {
                if x.immediately_precedes(y) {
                    True
                } else {
                    False
                }
            }
            CmpOp::Eq => {
                if x == y {
                    True
                } else {
                    False
                }
            }
            CmpOp::Ne => {
                if x == y {
                    False
                } else {
                    True
                }
            }
            _ => match x.doc_order(y) {
                None => Undef,
                Some(ord) => {
                    let ok = match op {
                        CmpOp::Lt => ord == Less,
                        CmpOp::Le => ord != Greater,
                        CmpOp::Gt => ord == Greater,
                        CmpOp::Ge => ord != Less,
                        _ => unreachable!(),
                    };
                    if ok {
                        True
                    } else {
                        False
                    }
                }
            },
        };
    }
    if matches!(a, CV::Loc(_)) || matches!(b, CV::Loc(_)) {
        return Undef;
    }
    // numbers first, then node equivalence, then character data
    if let (Some(x), Some(y)) = (a.num(), b.num()) {
        let ok = match op {
            CmpOp::Eq => x == y,
            CmpOp::Ne => x != y,
            CmpOp::Lt => x < y,
            CmpOp::Le => x <= y,
            CmpOp::Gt => x > y,
            CmpOp::Ge => x >= y,
            CmpOp::Succ => return Undef,
        };
        return if ok { True } else { False };
    }
    if let (CV::V(x), CV::V(y)) = (a, b) {
        if matches!(op, CmpOp::Eq | CmpOp::Ne) {
            let eq = x.equiv(y);
            let ok = (op == CmpOp::Eq) == eq;
            return if ok { True } else { False };
        }
    }
    match (a.text(), b.text()) {
        (Some(x), Some(y)) => {
            let ok = match op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                CmpOp::Succ => return Undef,
            };
            if ok {
                True
            } else {
                False
            }
        }
        _ => Undef,
    }
}

// -- path selections ---------------------------------------------------------

/// Values matched by a path inside a bound value; `$a/last=>"Li"` tests for a
/// match, `$a/last` in a comparison yields the matched contents.
fn sel_values(val: &Val, path: &Ep) -> Result<Vec<(Val, Location)>> {
    let Some(frag) = val.as_fragment() else { return Ok(Vec::new()) };
    let (bound, wanted) = bind_tail(path);
    let lowered = lower_pattern(bound)?;
    let mut ids = IdGen::default();
    let b = match_document(frag, &lowered, &mut ids);
    let mut out = Vec::new();
    collect_var(&b, "$0", &mut out);
    if let Some(w) = wanted {
        out.retain(|(v, _)| v.text() == w);
    }
    Ok(out)
}

/// Rebind the tail of a selection path to `$0`, returning any constant the
/// path tested so it can be checked against the matched values.
fn bind_tail(ep: &Ep) -> (Ep, Option<String>) {
    match ep {
        Ep::Path(ax, atom) => match &atom.content {
            None | Some(AtomSide::Var(_)) => (
                Ep::Path(
                    *ax,
                    AtomPtn {
                        name: atom.name.clone(),
                        content: Some(AtomSide::Var("$0".into())),
                    },
                ),
                None,
            ),
            Some(AtomSide::Const(c)) => (
                Ep::Path(
                    *ax,
                    AtomPtn {
                        name: atom.name.clone(),
                        content: Some(AtomSide::Var("$0".into())),
                    },
                ),
                Some(c.clone()),
            ),
            Some(AtomSide::Name(_)) => (ep.clone(), None),
        },
        Ep::Tree(root, body) => {
            let (b, w) = bind_tail(body);
            (Ep::Tree(root.clone(), Box::new(b)), w)
        }
        Ep::Fold(a, b) => {
            let (nb, w) = bind_tail(b);
            (Ep::Fold(a.clone(), Box::new(nb)), w)
        }
        other => (other.clone(), None),
    }
}

fn collect_var(b: &Binding, var: &str, out: &mut Vec<(Val, Location)>) {
    match b {
        Binding::Var(x, Some((v, l))) if x == var => out.push((v.clone(), l.clone())),
        Binding::Var(..) | Binding::Unit | Binding::NullUnit | Binding::False => {}
        Binding::Tuple(bs) | Binding::DUnion(bs) => {
            bs.iter().for_each(|c| collect_var(c, var, out))
        }
        Binding::Set(ms) => ms.iter().for_each(|m| collect_var(&m.b, var, out)),
        Binding::Branch(_, _, inner) => collect_var(inner, var, out),
    }
}

// ---------------------------------------------------------------------------
// evaluating a whole condition into a liveness tree
// ---------------------------------------------------------------------------

/// Evaluate a scoped condition over the original binding into a liveness
/// tree.  `live_ids`, when given, restricts every enumeration to those
/// members (the satisfaction check passes the filtered footprint here).
fn eval_tree(
    sc: &ScopedCond,
    t_o: &Term,
    b_o: &Binding,
    dlist: &[DInfo],
    prior: &[&LiveNode],
    owned: &[(String, BTreeSet<usize>)],
    live_ids: Option<&IdSet>,
) -> Result<LiveNode> {
    match sc {
        ScopedCond::Pred(p) => {
            let walker = Walker {
                units: &p.units,
                prior: prior.to_vec(),
                dlist,
                owned: owned.to_vec(),
                live_ids,
            };
            let mut rows = walker.rows(t_o, b_o)?;
            let mut touched = IdSet::new();
            for row in &mut rows {
                row.pass = eval_cond(&p.cond, &row.env)? == True;
                touched.extend(row.ids.iter().copied());
            }
            Ok(LiveNode::Gate(Gate { rows, touched }))
        }
        ScopedCond::With(l, r) => {
            let left = eval_tree(l, t_o, b_o, dlist, prior, owned, live_ids)?;
            let mut with_left: Vec<&LiveNode> = prior.to_vec();
            with_left.push(&left);
            let right = eval_tree(r, t_o, b_o, dlist, &with_left, owned, live_ids)?;
            Ok(LiveNode::Seq(vec![left, right]))
        }
        ScopedCond::Par { dunion, arms } => {
            let mut out = Vec::new();
            for (branches, arm) in arms {
                let mut arm_owned = owned.to_vec();
                arm_owned.push((dunion.canon.clone(), branches.clone()));
                out.push((
                    branches.clone(),
                    eval_tree(arm, t_o, b_o, dlist, prior, &arm_owned, live_ids)?,
                ));
            }
            Ok(LiveNode::Par { canon: dunion.canon.clone(), arms: out })
        }
    }
}

// ---------------------------------------------------------------------------
// pruning
// ---------------------------------------------------------------------------

enum Pruned {
    Live(Binding),
    Dead,
}

struct Pruner<'a> {
    root: &'a LiveNode,
    dlist: &'a [DInfo],
}

impl Pruner<'_> {
    fn walker(&self) -> Walker<'_> {
        Walker {
            units: &[],
            prior: Vec::new(),
            dlist: self.dlist,
            owned: Vec::new(),
            live_ids: None,
        }
    }

    fn member_alive(&self, elem: &Term, m: &Member, fixed: &IdSet, regions: &[Region]) -> bool {
        let mut ids = fixed.clone();
        ids.extend(m.prov.iter().copied());
        let mut rg = regions.to_vec();
        self.walker().member_regions(elem, &m.b, &mut rg);
        self.root.alive(&ids, &rg)
    }

    fn prune(
        &self,
        t: &Term,
        b: &Binding,
        fixed: &IdSet,
        regions: &[Region],
    ) -> Result<Pruned> {
        match (t, b) {
            (_, Binding::Var(..) | Binding::Unit | Binding::NullUnit) => {
                Ok(Pruned::Live(b.clone()))
            }
            (_, Binding::False) => Ok(Pruned::Dead),
            (Term::Tuple(ts), Binding::Tuple(bs)) if ts.len() == bs.len() => {
                let mut out = Vec::with_capacity(bs.len());
                for (ct, cb) in ts.iter().zip(bs) {
                    match self.prune(ct, cb, fixed, regions)? {
                        Pruned::Live(p) => out.push(p),
                        // a tuple dies with any of its components
                        Pruned::Dead => return Ok(Pruned::Dead),
                    }
                }
                Ok(Pruned::Live(Binding::Tuple(out)))
            }
            (Term::DUnion(ts), Binding::DUnion(bs)) if ts.len() == bs.len() => {
                let mut out = Vec::with_capacity(bs.len());
                let mut any_live = false;
                for (ct, cb) in ts.iter().zip(bs) {
                    let mut rg = regions.to_vec();
                    rg.extend(self.walker().branch_regions(ct));
                    match self.prune(ct, cb, fixed, &rg)? {
                        Pruned::Live(p) => {
                            any_live = true;
                            out.push(p);
                        }
                        // a dead branch turns null while any branch lives
                        Pruned::Dead => out.push(deep_null(cb)),
                    }
                }
                if any_live {
                    Ok(Pruned::Live(Binding::DUnion(out)))
                } else {
                    Ok(Pruned::Dead)
                }
            }
            (Term::Opt(ts), Binding::Branch(k, n, inner)) if *k < ts.len() => {
                let mut rg = regions.to_vec();
                rg.extend(self.walker().branch_regions(&ts[*k]));
                match self.prune(&ts[*k], inner, fixed, &rg)? {
                    Pruned::Live(p) => {
                        Ok(Pruned::Live(Binding::Branch(*k, *n, Box::new(p))))
                    }
                    Pruned::Dead => Ok(Pruned::Dead),
                }
            }
            (Term::Set { elem, .. }, Binding::Set(ms)) => {
                let mut out = Vec::new();
                for m in ms {
                    if !self.member_alive(elem, m, fixed, regions) {
                        continue;
                    }
                    let mut inner_fixed = fixed.clone();
                    inner_fixed.extend(m.prov.iter().copied());
                    match self.prune(elem, &m.b, &inner_fixed, regions)? {
                        Pruned::Live(p) => out.push(Member { prov: m.prov.clone(), b: p }),
                        Pruned::Dead => {}
                    }
                }
                // a set whose members all died is dead; an extracted empty
                // set stays what it is
                if out.is_empty() && !ms.is_empty() {
                    Ok(Pruned::Dead)
                } else {
                    Ok(Pruned::Live(Binding::Set(out)))
                }
            }
            (Term::Content(inner), b) => self.prune(inner, b, fixed, regions),
            _ => Err(Error::internal(format!(
                "binding {b} does not fit {t} during filtering"
            ))),
        }
    }
}

/// The null stand-in for a filtered-out branch: same shape, no data.  The
/// member identifiers are dropped — the data they named is gone.
fn deep_null(b: &Binding) -> Binding {
    match b {
        Binding::Var(x, _) => Binding::Var(x.clone(), None),
        Binding::Unit | Binding::NullUnit => Binding::NullUnit,
        Binding::False => Binding::False,
        Binding::Tuple(bs) => Binding::Tuple(bs.iter().map(deep_null).collect()),
        Binding::DUnion(bs) => Binding::DUnion(bs.iter().map(deep_null).collect()),
        Binding::Branch(k, n, inner) => {
            Binding::Branch(*k, *n, Box::new(deep_null(inner)))
        }
        Binding::Set(ms) => match ms.first() {
            None => Binding::Set(Vec::new()),
            Some(m) => Binding::Set(vec![Member { prov: Vec::new(), b: deep_null(&m.b) }]),
        },
    }
}

/// Filter the binding `b_cut` (the restructured binding at the point where
/// filtering applies, shaped like `t_cut`) by a scoped condition whose rows
/// are drawn from the original binding `b_o` of `t_o`.  Returns
/// [`Binding::False`] when everything is filtered out.
pub fn filter(
    t_o: &Term,
    b_o: &Binding,
    t_cut: &Term,
    b_cut: &Binding,
    sc: &ScopedCond,
) -> Result<Binding> {
    let dinfos: Vec<DInfo> = sc.dinfos().into_iter().cloned().collect();
    let root = eval_tree(sc, t_o, b_o, &dinfos, &[], &[], None)?;
    let pruner = Pruner { root: &root, dlist: &dinfos };
    match pruner.prune(t_cut, b_cut, &IdSet::new(), &[])? {
        Pruned::Live(b) => Ok(b),
        Pruned::Dead => Ok(Binding::False),
    }
}

// ---------------------------------------------------------------------------
// restriction sets as a first-class surface
// ---------------------------------------------------------------------------

/// A restriction set: the passing rows of one predicate.
#[derive(Debug, Clone)]
pub struct RSet {
    pub units: Vec<Unit>,
    pub rows: Vec<Row>,
}

/// Enumerate and evaluate one predicate over the original binding.
pub fn restriction_set(t_o: &Term, b_o: &Binding, c: &Cond) -> Result<RSet> {
    let units = resolve_units(c, t_o)?;
    let walker =
        Walker { units: &units, prior: Vec::new(), dlist: &[], owned: Vec::new(), live_ids: None };
    let mut rows = walker.rows(t_o, b_o)?;
    for row in &mut rows {
        row.pass = eval_cond(c, &row.env)? == True;
    }
    rows.retain(|r| r.pass);
    Ok(RSet { units, rows })
}

/// Expand a restriction set to the rows of a finer predicate: the finer rows
/// whose footprint extends some remembered row of `s`.
pub fn expand(t_o: &Term, b_o: &Binding, s: &RSet, to: &Cond) -> Result<RSet> {
    let units = resolve_units(to, t_o)?;
    let walker = Walker {
        units: &units,
        prior: Vec::new(),
        dlist: &[],
        owned: Vec::new(),
        live_ids: None,
    };
    let mut rows = walker.rows(t_o, b_o)?;
    rows.retain(|r| s.rows.iter().any(|sr| sr.ids.is_subset(&r.ids)));
    for r in &mut rows {
        r.pass = true;
    }
    Ok(RSet { units, rows })
}

/// Combine two restriction sets over the same units: the union of their rows.
pub fn combine(a: &RSet, b: &RSet) -> RSet {
    let mut rows = a.rows.clone();
    for r in &b.rows {
        if !rows.iter().any(|x| x.ids == r.ids) {
            rows.push(r.clone());
        }
    }
    RSet { units: a.units.clone(), rows }
}

/// Fix one unit of a restriction set to a value: the rows that bind the
/// variable to an equivalent atom.
pub fn bound(s: &RSet, var: &str, to: &Binding) -> RSet {
    let rows = s
        .rows
        .iter()
        .filter(|r| match (r.env.get(var), to) {
            (Some(EnvVal::Atom(a)), Binding::Var(y, b)) if y == var => match (a, b) {
                (None, None) => true,
                (Some((v, l)), Some((w, k))) => l == k && v.equiv(w),
                _ => false,
            },
            _ => false,
        })
        .cloned()
        .collect();
    RSet { units: s.units.clone(), rows }
}

// ---------------------------------------------------------------------------
// the information lattice on bindings
// ---------------------------------------------------------------------------

/// `b1 ⊑ b2`: `b2` holds at least the information of `b1`.  Nulls sit below
/// everything of the same shape; a set is below another when each of its
/// members is below some member there.
pub fn leq(a: &Binding, b: &Binding) -> bool {
    match (a, b) {
        (Binding::False, _) => true,
        (Binding::Var(x, None), Binding::Var(y, _)) => x == y,
        (Binding::Var(x, Some(v)), Binding::Var(y, Some(w))) => {
            x == y && v.0.equiv(&w.0) && v.1 == w.1
        }
        (Binding::NullUnit, Binding::NullUnit | Binding::Unit) => true,
        (Binding::Unit, Binding::Unit) => true,
        (Binding::Tuple(xs), Binding::Tuple(ys))
        | (Binding::DUnion(xs), Binding::DUnion(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| leq(x, y))
        }
        (Binding::Branch(i, n, x), Binding::Branch(j, m, y)) => {
            i == j && n == m && leq(x, y)
        }
        (Binding::Set(xs), Binding::Set(ys)) => {
            xs.iter().all(|x| ys.iter().any(|y| leq(&x.b, &y.b)))
        }
        (x, Binding::Branch(_, _, y)) => leq(x, y),
        (Binding::Branch(_, _, x), y) => leq(x, y),
        _ => false,
    }
}

/// The join of two bindings of one shape, when they are compatible: unions of
/// sets, non-null atoms over null ones.
pub fn join(a: &Binding, b: &Binding) -> Option<Binding> {
    match (a, b) {
        (Binding::False, other) | (other, Binding::False) => Some(other.clone()),
        (Binding::Var(x, None), Binding::Var(y, v))
        | (Binding::Var(x, v), Binding::Var(y, None))
            if x == y =>
        {
            Some(Binding::Var(x.clone(), v.clone()))
        }
        (Binding::Var(x, Some(v)), Binding::Var(y, Some(w))) => {
            if x == y && v.0.equiv(&w.0) && v.1 == w.1 {
                Some(Binding::Var(x.clone(), Some(v.clone())))
            } else {
                None
            }
        }
        (Binding::Unit, Binding::Unit | Binding::NullUnit)
        | (Binding::NullUnit, Binding::Unit) => Some(Binding::Unit),
        (Binding::NullUnit, Binding::NullUnit) => Some(Binding::NullUnit),
        (Binding::Tuple(xs), Binding::Tuple(ys)) if xs.len() == ys.len() => {
            let parts: Option<Vec<Binding>> =
                xs.iter().zip(ys).map(|(x, y)| join(x, y)).collect();
            Some(Binding::Tuple(parts?))
        }
        (Binding::DUnion(xs), Binding::DUnion(ys)) if xs.len() == ys.len() => {
            let parts: Option<Vec<Binding>> =
                xs.iter().zip(ys).map(|(x, y)| join(x, y)).collect();
            Some(Binding::DUnion(parts?))
        }
        (Binding::Branch(i, n, x), Binding::Branch(j, m, y)) if i == j && n == m => {
            Some(Binding::Branch(*i, *n, Box::new(join(x, y)?)))
        }
        (Binding::Set(xs), Binding::Set(ys)) => {
            let mut out = xs.clone();
            for y in ys {
                if !out.iter().any(|x| x.b.equiv(&y.b)) {
                    out.push(y.clone());
                }
            }
            // a null member is absorbed by real ones
            if out.len() > 1 {
                out.retain(|m| !m.b.is_null());
            }
            Some(Binding::Set(out))
        }
        (x, Binding::Branch(i, n, y)) | (Binding::Branch(i, n, y), x) => {
            Some(Binding::Branch(*i, *n, Box::new(join(x, y)?)))
        }
        _ => None,
    }
}

/// Project a binding onto a raw scope: for each unit, the set of its
/// occurrences.  Pairings across units are not kept — projection is lossy.
pub fn project(t: &Term, b: &Binding, scope: &Term) -> Result<Binding> {
    let units = raw_units(scope);
    let mut parts = Vec::new();
    for u in units {
        match &u {
            Term::Var(x) => {
                let mut hits = Vec::new();
                collect_var(b, x, &mut hits);
                let mut ids = IdGen::default();
                let members = hits
                    .into_iter()
                    .map(|(v, l)| Member::new(ids.fresh(), Binding::bound(x.clone(), v, l)))
                    .collect();
                parts.push(Binding::Set(members));
            }
            set => {
                let mut found = Vec::new();
                collect_shape(t, b, &set.canon_key(), &mut found);
                let mut members = Vec::new();
                for f in found {
                    if let Binding::Set(ms) = f {
                        members.extend(ms.iter().cloned());
                    }
                }
                parts.push(Binding::Set(members));
            }
        }
    }
    Ok(Binding::tuple(parts))
}

fn raw_units(scope: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    fn go(t: &Term, out: &mut Vec<Term>) {
        match t {
            Term::Tuple(ts) | Term::Opt(ts) => ts.iter().for_each(|c| go(c, out)),
            Term::Content(inner) => go(inner, out),
            other => out.push(other.clone()),
        }
    }
    go(scope, &mut out);
    out.dedup_by_key(|t| t.canon_key());
    out
}

fn collect_shape(t: &Term, b: &Binding, key: &str, out: &mut Vec<Binding>) {
    if t.canon_key() == key {
        out.push(b.clone());
        return;
    }
    match (t, b) {
        (Term::Tuple(ts), Binding::Tuple(bs)) | (Term::DUnion(ts), Binding::DUnion(bs))
            if ts.len() == bs.len() =>
        {
            for (ct, cb) in ts.iter().zip(bs) {
                collect_shape(ct, cb, key, out);
            }
        }
        (Term::Opt(ts), Binding::Branch(k, _, inner)) if *k < ts.len() => {
            collect_shape(&ts[*k], inner, key, out);
        }
        (Term::Set { elem, .. }, Binding::Set(ms)) => {
            for m in ms {
                collect_shape(elem, &m.b, key, out);
            }
        }
        (Term::Content(inner), b) => collect_shape(inner, b, key, out),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// satisfaction
// ---------------------------------------------------------------------------

/// Does the filtered binding satisfy the condition?  Every surviving datum a
/// predicate speaks about must take part in a passing row; parallel arms
/// answer for their own branches.
pub fn satisfies(
    t_o: &Term,
    b_o: &Binding,
    filtered: &Binding,
    sc: &ScopedCond,
) -> Result<bool> {
    let mut live = IdSet::new();
    collect_ids(filtered, &mut live);
    let dinfos: Vec<DInfo> = sc.dinfos().into_iter().cloned().collect();
    check_sat(sc, t_o, b_o, &dinfos, &live, &[])
}

fn collect_ids(b: &Binding, out: &mut IdSet) {
    match b {
        Binding::Var(..) | Binding::Unit | Binding::NullUnit | Binding::False => {}
        Binding::Tuple(bs) | Binding::DUnion(bs) => {
            bs.iter().for_each(|c| collect_ids(c, out))
        }
        Binding::Branch(_, _, inner) => collect_ids(inner, out),
        Binding::Set(ms) => {
            for m in ms {
                out.extend(m.prov.iter().copied());
                collect_ids(&m.b, out);
            }
        }
    }
}

fn check_sat(
    sc: &ScopedCond,
    t_o: &Term,
    b_o: &Binding,
    dlist: &[DInfo],
    live: &IdSet,
    owned: &[(String, BTreeSet<usize>)],
) -> Result<bool> {
    match sc {
        ScopedCond::Pred(p) => {
            let gate = sat_gate(p, t_o, b_o, dlist, live, owned)?;
            Ok(gate.touched.iter().all(|id| {
                gate.rows.iter().any(|r| r.pass && r.ids.contains(id))
            }))
        }
        ScopedCond::With(l, r) => Ok(check_sat(l, t_o, b_o, dlist, live, owned)?
            && check_sat(r, t_o, b_o, dlist, live, owned)?),
        ScopedCond::Par { dunion, arms } => {
            // every datum must pass in an arm that owns it, or be foreign to
            // every arm that saw it
            let mut gates = Vec::new();
            for (branches, arm) in arms {
                let mut arm_owned = owned.to_vec();
                arm_owned.push((dunion.canon.clone(), branches.clone()));
                if !sat_flat(arm, t_o, b_o, dlist, live, &arm_owned, &mut gates)? {
                    return Ok(false);
                }
            }
            let mut all_touched = IdSet::new();
            for (_, g) in &gates {
                all_touched.extend(g.touched.iter().copied());
            }
            for id in &all_touched {
                let ok = gates.iter().any(|(_, g)| {
                    g.rows.iter().any(|r| r.pass && r.ids.contains(id))
                }) || gates
                    .iter()
                    .all(|(_, g)| !g.touched.contains(id));
                if !ok {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Evaluate the gates of an arm (a predicate or a with-chain); nested pars
/// recurse through `check_sat`.  Returns false early when a nested check
/// fails.
fn sat_flat(
    sc: &ScopedCond,
    t_o: &Term,
    b_o: &Binding,
    dlist: &[DInfo],
    live: &IdSet,
    owned: &[(String, BTreeSet<usize>)],
    gates: &mut Vec<(BTreeSet<usize>, Gate)>,
) -> Result<bool> {
    match sc {
        ScopedCond::Pred(p) => {
            let g = sat_gate(p, t_o, b_o, dlist, live, owned)?;
            let branches = owned.last().map(|(_, b)| b.clone()).unwrap_or_default();
            gates.push((branches, g));
            Ok(true)
        }
        ScopedCond::With(l, r) => Ok(sat_flat(l, t_o, b_o, dlist, live, owned, gates)?
            && sat_flat(r, t_o, b_o, dlist, live, owned, gates)?),
        ScopedCond::Par { .. } => check_sat(sc, t_o, b_o, dlist, live, owned),
    }
}

fn sat_gate(
    p: &ScopedPred,
    t_o: &Term,
    b_o: &Binding,
    dlist: &[DInfo],
    live: &IdSet,
    owned: &[(String, BTreeSet<usize>)],
) -> Result<Gate> {
    let walker = Walker {
        units: &p.units,
        prior: Vec::new(),
        dlist,
        owned: owned.to_vec(),
        live_ids: Some(live),
    };
    let mut rows = walker.rows(t_o, b_o)?;
    let mut touched = IdSet::new();
    for row in &mut rows {
        row.pass = eval_cond(&p.cond, &row.env)? == True;
        touched.extend(row.ids.iter().copied());
    }
    Ok(Gate { rows, touched })
}
