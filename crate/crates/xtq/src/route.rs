//! Planning restructuring routes between matching terms.
//!
//! [`can_restructure`] searches for a sequence of rule applications turning a
//! source term into (an equivalent of) a target term.  The search is
//! syntax-directed: the target's shape decides which rule family applies, so
//! planning stays near-linear in the term sizes instead of exploring blindly,
//! and every found route is verified by replaying it.

use crate::term::{
    apply_rule, at_path, normalize_index, rule_result, Route, Rule, Step, Term,
};

/// Plan a route from `src` to `tgt`.  `None` means no route exists (or none
/// the planner can find; found routes always replay to the target).
pub fn can_restructure(src: &Term, tgt: &Term) -> Option<Route> {
    if src.vars() != tgt.vars() {
        return None;
    }
    let mut p = Planner { cur: src.clone(), route: Vec::new() };
    p.goal(Vec::new(), tgt).ok()?;
    if p.cur.equiv(tgt) {
        Some(p.route)
    } else {
        None
    }
}

type R = Result<(), ()>;

struct Planner {
    cur: Term,
    route: Route,
}

/// Positions of pieces (per owner) among the children of one tuple node,
/// kept up to date as rules rearrange the tuple.
struct Tracker {
    lists: Vec<Vec<usize>>,
}

impl Tracker {
    fn solo(positions: Vec<usize>) -> Tracker {
        Tracker { lists: vec![positions] }
    }

    /// Children `a` and `b` were consumed and one child appended at the end
    /// of a tuple that now has `new_len` children.
    fn remove2_append1(&mut self, a: usize, b: usize, new_len: usize) {
        for list in &mut self.lists {
            for q in list.iter_mut() {
                if *q == a || *q == b {
                    *q = new_len - 1;
                } else {
                    *q -= usize::from(a < *q) + usize::from(b < *q);
                }
            }
            list.sort_unstable();
            list.dedup();
        }
    }

    /// `extra` children were inserted right after child `at`, all owned by
    /// `owner`.
    fn expand(&mut self, owner: usize, at: usize, extra: usize) {
        for list in &mut self.lists {
            for q in list.iter_mut() {
                if *q > at {
                    *q += extra;
                }
            }
        }
        for e in 1..=extra {
            self.lists[owner].push(at + e);
        }
        self.lists[owner].sort_unstable();
    }

    /// One child was inserted right after child `at` and handed to `owner`.
    fn insert_for(&mut self, owner: usize, at: usize) {
        for list in &mut self.lists {
            for q in list.iter_mut() {
                if *q > at {
                    *q += 1;
                }
            }
        }
        self.lists[owner].push(at + 1);
        self.lists[owner].sort_unstable();
    }
}

impl Planner {
    fn node(&self, path: &[usize]) -> Result<Term, ()> {
        at_path(&self.cur, path).cloned().map_err(|_| ())
    }

    fn apply(&mut self, rule: Rule, path: &[usize], pick: &[usize]) -> R {
        let before = at_path(&self.cur, path).map_err(|_| ())?.clone();
        let after = rule_result(&before, rule, pick).map_err(|_| ())?;
        let next = apply_rule(&self.cur, rule, path, pick).map_err(|_| ())?;
        self.route.push(Step { rule, path: path.to_vec(), pick: pick.to_vec(), before, after });
        self.cur = next;
        Ok(())
    }

    fn snapshot(&self) -> (Term, usize) {
        (self.cur.clone(), self.route.len())
    }

    fn rollback(&mut self, snap: (Term, usize)) {
        self.cur = snap.0;
        self.route.truncate(snap.1);
    }

    /// Rewrite the node at `path` into an equivalent of `tgt`.
    fn goal(&mut self, path: Vec<usize>, tgt: &Term) -> R {
        let node = self.node(&path)?;
        if node.equiv(tgt) {
            return Ok(());
        }
        match tgt {
            Term::Set { .. } => self.goal_set(&path, tgt),
            Term::Tuple(tcs) => self.goal_tuple(&path, tcs),
            Term::DUnion(tbs) => self.goal_dunion(&path, tbs),
            Term::Opt(tbs) => self.goal_opt(&path, tbs),
            // atoms only match up to equivalence
            Term::Var(_) | Term::Content(_) | Term::Eps => Err(()),
        }
    }

    // -- tuples ------------------------------------------------------------

    fn goal_tuple(&mut self, path: &[usize], tcs: &[Term]) -> R {
        let mut node = self.node(path)?;
        // duplicated option branches collapse first
        while let Term::Opt(branches) = &node {
            let Some((i, j)) = pair_of_equals(branches) else { break };
            self.apply(Rule::OptIdem, path, &[i, j])?;
            node = self.node(path)?;
        }
        // a remaining option factors out the components shared by its
        // branches — the ones the target keeps outside the option
        if let Term::Opt(branches) = &node {
            let keep: Vec<&Term> =
                tcs.iter().filter(|c| !matches!(c, Term::Opt(_))).collect();
            let first: Vec<Term> = match &branches[0] {
                Term::Tuple(ts) => ts.clone(),
                other => vec![other.clone()],
            };
            let mut picks = Vec::new();
            let mut used = vec![false; first.len()];
            for want in &keep {
                let k = want.canon_key();
                let found = first
                    .iter()
                    .enumerate()
                    .find(|(i, c)| !used[*i] && c.canon_key() == k)
                    .map(|(i, _)| i)
                    .ok_or(())?;
                used[found] = true;
                picks.push(found);
            }
            if picks.is_empty() || picks.len() >= first.len() {
                return Err(());
            }
            self.apply(Rule::OptTplFactor, path, &picks)?;
            node = self.node(path)?;
        }

        let tc_vars: Vec<_> = tcs.iter().map(Term::vars).collect();
        let mut tracker = Tracker { lists: vec![Vec::new(); tcs.len()] };

        if let Term::Tuple(pieces) = &node {
            // assign each piece to the target components sharing its
            // variables, duplicating pieces that several components need
            let piece_vars: Vec<_> = pieces.iter().map(Term::vars).collect();
            let mut extra = 0usize;
            for (p, pv) in piece_vars.iter().enumerate() {
                let users: Vec<usize> = tc_vars
                    .iter()
                    .enumerate()
                    .filter(|(_, tv)| pv.intersection(tv).next().is_some())
                    .map(|(i, _)| i)
                    .collect();
                if users.is_empty() {
                    return Err(());
                }
                let base = p + extra;
                tracker.lists[users[0]].push(base);
                for (n, &u) in users.iter().enumerate().skip(1) {
                    self.apply(Rule::TplDupl, &join(path, base + n - 1), &[])?;
                    tracker.insert_for(u, base + n - 1);
                    extra += 1;
                }
            }
        } else {
            // a lone piece: every target component sharing its variables
            // receives one copy
            let pv = node.vars();
            let users: Vec<usize> = tc_vars
                .iter()
                .enumerate()
                .filter(|(_, tv)| pv.intersection(tv).next().is_some())
                .map(|(i, _)| i)
                .collect();
            if users.len() < 2 {
                return Err(());
            }
            self.apply(Rule::TplDupl, path, &[])?;
            tracker.lists[users[0]].push(0);
            tracker.lists[users[1]].push(1);
            for &u in &users[2..] {
                self.apply(Rule::TplDupl, &join(path, 0), &[])?;
                tracker.insert_for(u, 0);
            }
        }

        // every component must receive exactly its variables
        for (i, tc) in tcs.iter().enumerate() {
            let mut got = std::collections::BTreeSet::new();
            for &p in &tracker.lists[i] {
                got.extend(
                    self.node(&join(path, p))?
                        .vars()
                        .into_iter()
                        .map(str::to_owned),
                );
            }
            let want: std::collections::BTreeSet<String> =
                tc.vars().into_iter().map(str::to_owned).collect();
            if got != want {
                return Err(());
            }
        }

        for (i, tc) in tcs.iter().enumerate() {
            match tc {
                Term::Set { .. } => self.build_set_among(path, &mut tracker, i, tc)?,
                _ => {
                    let mine = tracker.lists[i].clone();
                    if mine.len() != 1 {
                        return Err(());
                    }
                    self.goal(join(path, mine[0]), tc)?;
                }
            }
        }
        if self.node(path)?.equiv(&Term::Tuple(tcs.to_vec())) {
            Ok(())
        } else {
            Err(())
        }
    }

    // -- d-unions and options ----------------------------------------------

    fn goal_dunion(&mut self, path: &[usize], tbs: &[Term]) -> R {
        let Term::DUnion(branches) = self.node(path)? else { return Err(()) };
        if branches.len() != tbs.len() {
            return Err(());
        }
        // pair source and target branches by trying var-compatible matchings
        for perm in perms(tbs.len()) {
            if !perm.iter().zip(tbs).all(|(&s, t)| branches[s].vars() == t.vars()) {
                continue;
            }
            let snap = self.snapshot();
            if perm
                .iter()
                .zip(tbs)
                .try_for_each(|(&s, t)| self.goal(join(path, s), t))
                .is_ok()
            {
                return Ok(());
            }
            self.rollback(snap);
        }
        Err(())
    }

    fn goal_opt(&mut self, path: &[usize], tbs: &[Term]) -> R {
        // drop duplicated branches until the widths agree
        while let Term::Opt(branches) = self.node(path)? {
            if branches.len() <= tbs.len() {
                break;
            }
            let Some((i, j)) = pair_of_equals(&branches) else { return Err(()) };
            self.apply(Rule::OptIdem, path, &[i, j])?;
        }
        // no rewriting happens inside option branches, so what remains must
        // already match
        if self.node(path)?.equiv(&Term::Opt(tbs.to_vec())) {
            Ok(())
        } else {
            Err(())
        }
    }

    // -- sets ----------------------------------------------------------------

    /// Rewrite the whole node at `path` into the target set.
    fn goal_set(&mut self, path: &[usize], tgt: &Term) -> R {
        let (core, keys) = unfold_chain(tgt)?;
        self.build_plain(path, &core)?;
        self.apply_folds(path.to_vec(), &keys)?;
        if self.node(path)?.equiv(tgt) {
            Ok(())
        } else {
            Err(())
        }
    }

    /// Apply a chain of folds, outermost key first, descending into the kept
    /// set for each inner key.
    fn apply_folds(&mut self, mut path: Vec<usize>, keys: &[Term]) -> R {
        for key in keys {
            let Term::Set { elem, .. } = self.node(&path)? else { return Err(()) };
            let comps: Vec<Term> = match elem.as_ref() {
                Term::Tuple(ts) => ts.clone(),
                other => vec![other.clone()],
            };
            let units: Vec<Term> = match key {
                Term::Tuple(ts) => ts.clone(),
                other => vec![other.clone()],
            };
            let mut pick = Vec::new();
            let mut used = vec![false; comps.len()];
            for unit in &units {
                let k = unit.canon_key();
                let i = comps
                    .iter()
                    .enumerate()
                    .find(|(i, c)| !used[*i] && c.canon_key() == k)
                    .map(|(i, _)| i)
                    .ok_or(())?;
                used[i] = true;
                pick.push(i);
            }
            self.apply(Rule::SetFold, &path, &pick)?;
            // the kept set is the first component of the folded element
            path.extend([0, 0]);
        }
        Ok(())
    }

    /// Rewrite the node at `path` into the (non-folded) target set.
    fn build_plain(&mut self, path: &[usize], tgt: &Term) -> R {
        let Term::Set { elem: tgt_elem, index: tgt_index, .. } = tgt else {
            return Err(());
        };
        let want = units(&normalize_index(tgt_index));
        loop {
            let node = self.node(path)?;
            if node.equiv(tgt) {
                return Ok(());
            }
            match node {
                Term::Set { ref index, .. } => {
                    let have = units(&normalize_index(index));
                    if multiset_eq(&have, &want) {
                        return self.goal(join(path, 0), tgt_elem);
                    }
                    let rest = multiset_diff(&want, &have).ok_or(())?;
                    if rest.is_empty() {
                        return Err(());
                    }
                    let synth = Term::set((**tgt_elem).clone(), Term::tuple(rest));
                    self.build_plain(&join(path, 0), &synth)?;
                    self.apply(Rule::SetFlatten, path, &[])?;
                }
                Term::DUnion(ref branches) => {
                    let order = merge_order(branches, &want).ok_or(())?;
                    self.merge_all(path, &order)?;
                }
                Term::Opt(ref branches) => {
                    if branches.iter().all(Term::is_set) && same_set_indexes(branches) {
                        self.alter_all(path, branches.len())?;
                    } else {
                        self.factor_common(path, branches)?;
                    }
                }
                Term::Tuple(ref ts) => {
                    let mut tr = Tracker::solo((0..ts.len()).collect());
                    return self.build_set_among(path, &mut tr, 0, tgt);
                }
                _ => return Err(()),
            }
        }
    }

    /// Merge the branches of the d-union at `path` into one set, pairing
    /// them off in the given original-branch order.
    fn merge_all(&mut self, path: &[usize], order: &[usize]) -> R {
        if order.len() < 2 {
            return Err(());
        }
        let mut consumed = vec![order[0], order[1]];
        self.apply(Rule::DunSetMerge, path, &[order[0], order[1]])?;
        for &k in &order[2..] {
            // the merged set sits first; unconsumed branches follow in order
            let pos = 1 + (0..k).filter(|j| !consumed.contains(j)).count();
            self.apply(Rule::DunSetMerge, path, &[0, pos])?;
            consumed.push(k);
        }
        Ok(())
    }

    fn alter_all(&mut self, path: &[usize], n: usize) -> R {
        for _ in 1..n {
            self.apply(Rule::OptSetAlter, path, &[0, 1])?;
        }
        Ok(())
    }

    fn factor_common(&mut self, path: &[usize], branches: &[Term]) -> R {
        let first: Vec<Term> = match &branches[0] {
            Term::Tuple(ts) => ts.clone(),
            other => vec![other.clone()],
        };
        let mut pick = Vec::new();
        for (i, c) in first.iter().enumerate() {
            let k = c.canon_key();
            let everywhere = branches.iter().skip(1).all(|b| {
                let comps: Vec<&Term> = match b {
                    Term::Tuple(ts) => ts.iter().collect(),
                    other => vec![other],
                };
                comps.iter().any(|bc| bc.canon_key() == k)
            });
            if everywhere {
                pick.push(i);
            }
        }
        if pick.is_empty() || pick.len() >= first.len() {
            return Err(());
        }
        self.apply(Rule::OptTplFactor, path, &pick)
    }

    /// Build the target set from the pieces owned by `me` among the children
    /// of the tuple at `path`, leaving other owners' positions valid.
    fn build_set_among(
        &mut self,
        path: &[usize],
        tr: &mut Tracker,
        me: usize,
        tgt: &Term,
    ) -> R {
        let (core, keys) = unfold_chain(tgt)?;
        let Term::Set { index: tgt_index, .. } = &core else { return Err(()) };
        let want = units(&normalize_index(tgt_index));

        // normalize pieces: merge d-unions the target index asks for, combine
        // same-index option sets, factor options holding shared components
        loop {
            let mut changed = false;
            for &p in &tr.lists[me].clone() {
                let piece = self.node(&join(path, p))?;
                match piece {
                    Term::DUnion(ref branches) => {
                        if let Some(order) = merge_order(branches, &want) {
                            self.merge_all(&join(path, p), &order)?;
                            changed = true;
                        }
                    }
                    Term::Opt(ref branches) => {
                        if branches.iter().all(Term::is_set) && same_set_indexes(branches)
                        {
                            self.alter_all(&join(path, p), branches.len())?;
                            changed = true;
                        } else if branches.iter().any(|b| matches!(b, Term::Tuple(_))) {
                            let before = self.tuple_len(path)?;
                            self.factor_common(&join(path, p), branches)?;
                            let after = self.tuple_len(path)?;
                            tr.expand(me, p, after - before);
                            changed = true;
                        }
                    }
                    _ => {}
                }
                if changed {
                    break;
                }
            }
            if !changed {
                break;
            }
        }

        // pick the outermost core set: the piece whose index units sit
        // earliest in the target index
        let mut c1 = None;
        let mut best_rank = usize::MAX;
        for &p in &tr.lists[me] {
            if let Term::Set { ref index, .. } = self.node(&join(path, p))? {
                let have = units(&normalize_index(index));
                if multiset_diff(&want, &have).is_some() {
                    let rank = have
                        .first()
                        .and_then(|u| {
                            let k = u.canon_key();
                            want.iter().position(|w| w.canon_key() == k)
                        })
                        .unwrap_or(usize::MAX - 1);
                    if rank < best_rank {
                        best_rank = rank;
                        c1 = Some(p);
                    }
                }
            }
        }
        let Some(mut c1) = c1 else { return Err(()) };

        // move every other piece of mine into the outermost core
        while let Some(&q) = tr.lists[me].iter().find(|&&q| q != c1) {
            let len = self.tuple_len(path)?;
            self.apply(Rule::SetDistr, path, &[c1, q])?;
            tr.remove2_append1(c1, q, len - 1);
            c1 = len - 2;
        }

        // the single remaining piece becomes the target set; when all other
        // children were consumed the tuple has collapsed onto that piece
        let p = *tr.lists[me].first().ok_or(())?;
        let piece = match self.node(path)? {
            Term::Tuple(_) => join(path, p),
            _ => path.to_vec(),
        };
        self.build_plain(&piece, &core)?;
        self.apply_folds(piece.clone(), &keys)?;
        if self.node(&piece)?.equiv(tgt) {
            Ok(())
        } else {
            Err(())
        }
    }

    fn tuple_len(&self, path: &[usize]) -> Result<usize, ()> {
        match self.node(path)? {
            Term::Tuple(ts) => Ok(ts.len()),
            _ => Err(()),
        }
    }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn join(path: &[usize], i: usize) -> Vec<usize> {
    let mut p = path.to_vec();
    p.push(i);
    p
}

fn pair_of_equals(branches: &[Term]) -> Option<(usize, usize)> {
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            if branches[i].equiv(&branches[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

fn perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in perms(n - 1) {
        for slot in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(slot, n - 1);
            out.push(p);
        }
    }
    out
}

/// Split a folded target into its innermost non-folded core and the chain of
/// fold keys, outermost first.
fn unfold_chain(tgt: &Term) -> Result<(Term, Vec<Term>), ()> {
    let mut keys = Vec::new();
    let mut cur = tgt.clone();
    loop {
        match cur {
            Term::Set { ref elem, ref index, folded: true } => {
                let Term::Content(key) = index.as_ref() else { return Err(()) };
                let Term::Tuple(comps) = elem.as_ref() else { return Err(()) };
                if comps.len() != 2 {
                    return Err(());
                }
                let kept = comps.iter().find(|c| c.is_set()).ok_or(())?;
                let marker = comps.iter().find(|c| c.is_content()).ok_or(())?;
                if !marker.equiv(index) {
                    return Err(());
                }
                keys.push((**key).clone());
                cur = kept.clone();
            }
            other => return Ok((other, keys)),
        }
    }
}

/// The unit list of an index term.
fn units(r: &Term) -> Vec<Term> {
    match r {
        Term::Eps => Vec::new(),
        Term::Tuple(ts) => ts.clone(),
        other => vec![other.clone()],
    }
}

fn multiset_eq(a: &[Term], b: &[Term]) -> bool {
    a.len() == b.len() && multiset_diff(b, a).is_some_and(|d| d.is_empty())
}

/// `big` minus `small`, or `None` if `small` is not contained in `big`.
/// Keeps the order of `big`.
fn multiset_diff(big: &[Term], small: &[Term]) -> Option<Vec<Term>> {
    let mut taken = vec![false; big.len()];
    for s in small {
        let k = s.canon_key();
        let i = big
            .iter()
            .enumerate()
            .find(|(i, b)| !taken[*i] && b.canon_key() == k)
            .map(|(i, _)| i)?;
        taken[i] = true;
    }
    Some(
        big.iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(b, _)| b.clone())
            .collect(),
    )
}

/// Decide whether (and in which order) the branches of a d-union should be
/// merged into a single set, given the units wanted by the target index.
fn merge_order(branches: &[Term], want: &[Term]) -> Option<Vec<usize>> {
    let branch_units: Vec<Vec<Term>> = branches
        .iter()
        .map(|b| match b {
            Term::Set { index, folded: false, .. } => Some(units(&normalize_index(index))),
            _ => None,
        })
        .collect::<Option<_>>()?;
    // an option unit whose branches match the branch indexes, in order
    for w in want {
        if let Term::Opt(wbs) = w {
            if wbs.len() == branches.len() {
                let mut order = Vec::new();
                let mut used = vec![false; branches.len()];
                let mut ok = true;
                for wb in wbs {
                    let wu = units(wb);
                    match branch_units
                        .iter()
                        .enumerate()
                        .find(|(i, bu)| !used[*i] && multiset_eq(bu, &wu))
                        .map(|(i, _)| i)
                    {
                        Some(i) => {
                            used[i] = true;
                            order.push(i);
                        }
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Some(order);
                }
            }
        }
    }
    // otherwise all branches must carry the same units, which collapse into
    // one wanted unit after the merge
    let first = &branch_units[0];
    if branch_units.iter().all(|bu| multiset_eq(bu, first))
        && multiset_diff(want, first).is_some()
    {
        return Some((0..branches.len()).collect());
    }
    None
}

fn same_set_indexes(branches: &[Term]) -> bool {
    let mut key = None;
    for b in branches {
        let Term::Set { index, .. } = b else { return false };
        let k = normalize_index(index).canon_key();
        if *key.get_or_insert_with(|| k.clone()) != k {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{desugar, parse_program, parse_term};
    use crate::term::{from_user, mt};

    fn term_of(src: &str) -> Term {
        from_user(&parse_term(src).expect("term"))
    }

    fn original_term(query: &str) -> Term {
        let p = desugar(parse_program(query).expect("parse")).expect("desugar");
        mt(&p.statement.query).expect("mt")
    }

    fn count(route: &Route, rule: &str) -> usize {
        route.iter().filter(|s| s.rule.name() == rule).count()
    }

    fn check(route: &Route, src: &Term, tgt: &Term) {
        let mut cur = src.clone();
        for step in route {
            cur = apply_rule(&cur, step.rule, &step.path, &step.pick).expect("step applies");
        }
        assert!(cur.equiv(tgt), "route ends at {cur}, wanted {tgt}");
    }

    #[test]
    fn plans_the_disjunctive_inversion() {
        let src = original_term(
            r#"query doc("bib.xml")//book=>$b(/title=>$t,(/author=>$a||/editor=>$e)
                          (/last=>$l, /first=>$f))
               construct nil"#,
        );
        // the doubly folded inversion: people over books over roles
        let inner = term_of("{(($a|$e),($b,$t,$l,$f))}");
        let middle = Term::folded_set(
            Term::tuple(vec![Term::content(Term::var("$t")), inner]),
            Term::content(Term::var("$t")),
        );
        let outer_key = Term::content(term_of("($l,$f)"));
        let tgt = Term::folded_set(
            Term::tuple(vec![outer_key.clone(), middle]),
            outer_key,
        );
        let route = can_restructure(&src, &tgt).expect("route exists");
        check(&route, &src, &tgt);
        assert_eq!(count(&route, "dun-set-merge"), 1);
        assert_eq!(count(&route, "opt-tpl-alter"), 1);
        assert_eq!(count(&route, "set-fold"), 2);
        assert!(count(&route, "set-distr") >= 4);
        assert!(count(&route, "set-flatten") >= 3);
        assert_eq!(count(&route, "tpl-dupl"), 0);
    }

    #[test]
    fn merges_identical_branches_with_idempotence() {
        let one = term_of("{($t,{$p})}");
        let src = Term::dunion(vec![one.clone(), one.clone(), one.clone()]);
        let route = can_restructure(&src, &one).expect("route exists");
        check(&route, &src, &one);
        assert_eq!(count(&route, "dun-set-merge"), 2);
        assert_eq!(count(&route, "opt-idem"), 2);
    }

    #[test]
    fn duplicates_shared_sources() {
        let src = term_of("{($b,{$a},{$e})}");
        let flat = term_of("{($b,$a,$e)}");
        let tgt = Term::Tuple(vec![src.clone(), flat.clone()]);
        let route = can_restructure(&src, &tgt).expect("route exists");
        check(&route, &src, &tgt);
        assert_eq!(count(&route, "tpl-dupl"), 1);
        assert!(count(&route, "set-distr") >= 2);
        assert!(count(&route, "set-flatten") >= 2);
    }

    #[test]
    fn rejects_impossible_targets() {
        let src = term_of("{$x}");
        assert!(can_restructure(&src, &term_of("($x,{$x})")).is_none());
        let src = original_term(
            r#"query doc("b.xml")//book=>$b(/author=>$a,/editor=>$e) construct nil"#,
        );
        // an option cannot appear without a disjunctive source
        assert!(can_restructure(&src, &term_of("{($b,($a|$e))}")).is_none());
        // variables cannot vanish
        assert!(can_restructure(&src, &term_of("{($b,{$a})}")).is_none());
    }

    #[test]
    fn plans_simple_folds() {
        let src = term_of("{($a,$t)}");
        let key = Term::content(Term::var("$t"));
        let tgt = Term::folded_set(Term::tuple(vec![src.clone(), key.clone()]), key);
        let route = can_restructure(&src, &tgt).expect("route exists");
        check(&route, &src, &tgt);
        assert_eq!(route.len(), 1);
        assert_eq!(route[0].rule.name(), "set-fold");
    }

    #[test]
    fn collapses_duplicated_merge_indexes() {
        let one = term_of("{($t,$p)}");
        let src = Term::dunion(vec![one.clone(), one.clone()]);
        let route = can_restructure(&src, &one).expect("route exists");
        check(&route, &src, &one);
    }

    #[test]
    fn flattens_nested_extraction() {
        let src = original_term(
            r#"query doc("b.xml")//book=>$b(/title=>$t) construct nil"#,
        );
        let tgt = term_of("{($b,$t)}");
        let route = can_restructure(&src, &tgt).expect("route exists");
        check(&route, &src, &tgt);
        assert!(count(&route, "set-distr") >= 1);
        assert_eq!(count(&route, "set-flatten"), 1);
    }
}
