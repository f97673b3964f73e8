//! Transforming bindings along a restructuring route.
//!
//! Each term rewriting step has a binding-level counterpart, applied at the
//! same path.  Null bindings that stand in for absent structure pass through
//! unchanged — the surrounding term grows, but a null binding accords the
//! wider term as it is.  Option branches are tracked with branch markers so
//! later steps (and accordance checks) know which side a binding took.

use crate::bind::{reduce_nulls, Binding, Member};
use crate::error::{Error, Result};
use crate::term::{Rule, Step, Term};

/// Apply a whole route to a binding.
pub fn apply_route(b: &Binding, route: &[Step]) -> Result<Binding> {
    let mut cur = b.clone();
    for step in route {
        cur = apply_step(&cur, step)?;
    }
    Ok(cur)
}

/// Apply one restructuring step to a binding.
pub fn apply_step(b: &Binding, step: &Step) -> Result<Binding> {
    walk(b, &step.path, step)
}

fn walk(b: &Binding, path: &[usize], step: &Step) -> Result<Binding> {
    let Some((&i, rest)) = path.split_first() else {
        return at_node(b, step);
    };
    match b {
        // rebuild raw: replacing a component leaves the node's arity alone,
        // and the grouped pair of a folded set must not flatten away
        Binding::Tuple(bs) if i < bs.len() => {
            let mut out = bs.clone();
            out[i] = walk(&bs[i], rest, step)?;
            Ok(Binding::Tuple(out))
        }
        Binding::DUnion(bs) if i < bs.len() => {
            let mut out = bs.clone();
            out[i] = walk(&bs[i], rest, step)?;
            Ok(Binding::DUnion(out))
        }
        Binding::Set(ms) if i == 0 => {
            let members = ms
                .iter()
                .map(|m| {
                    Ok(Member { prov: m.prov.clone(), b: walk(&m.b, rest, step)? })
                })
                .collect::<Result<_>>()?;
            Ok(Binding::Set(members))
        }
        _ => vacuous(b, step),
    }
}

/// A binding without the structure a step descends into must be a null
/// stand-in; it accords the rewritten term unchanged.
fn vacuous(b: &Binding, step: &Step) -> Result<Binding> {
    if b.is_null() || matches!(b, Binding::False) {
        Ok(b.clone())
    } else {
        Err(Error::internal(format!(
            "binding does not fit the {} step at {:?}: {b}",
            step.rule, step.path
        )))
    }
}

fn at_node(b: &Binding, step: &Step) -> Result<Binding> {
    match step.rule {
        Rule::TplDupl => Ok(Binding::Tuple(vec![b.clone(), b.clone()])),
        Rule::SetDistr => distribute(b, step),
        Rule::SetFlatten => flatten(b, step),
        Rule::SetFold => fold(b, step),
        Rule::DunSetMerge => merge(b, step),
        Rule::OptIdem => idem(b, step),
        Rule::OptSetAlter => set_alter(b, step),
        Rule::OptTplAlter => tpl_alter(b, step),
        Rule::OptTplFactor => tpl_factor(b, step),
    }
}

fn distribute(b: &Binding, step: &Step) -> Result<Binding> {
    let Binding::Tuple(bs) = b else { return vacuous(b, step) };
    let Some((&set_pos, moved)) = step.pick.split_first() else {
        return Err(Error::internal("set-distr step without positions"));
    };
    let Some(Binding::Set(ms)) = bs.get(set_pos) else {
        return vacuous(b, step);
    };
    let moving: Vec<Binding> = moved
        .iter()
        .map(|&m| {
            bs.get(m)
                .cloned()
                .ok_or_else(|| Error::internal("set-distr position out of range"))
        })
        .collect::<Result<_>>()?;
    let members: Vec<Member> = ms
        .iter()
        .map(|m| {
            let mut parts = moving.clone();
            parts.push(m.b.clone());
            Member { prov: m.prov.clone(), b: Binding::tuple(parts) }
        })
        .collect();
    let rest: Vec<Binding> = bs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != set_pos && !moved.contains(i))
        .map(|(_, c)| c.clone())
        .chain(std::iter::once(Binding::Set(members)))
        .collect();
    Ok(Binding::tuple(rest))
}

fn flatten(b: &Binding, step: &Step) -> Result<Binding> {
    let Binding::Set(outer) = b else { return vacuous(b, step) };
    let mut flat = Vec::new();
    for m in outer {
        match &m.b {
            Binding::Set(inner) => {
                for n in inner {
                    flat.push(Member {
                        prov: Member::merged_prov(&m.prov, &n.prov),
                        b: n.b.clone(),
                    });
                }
            }
            other if other.is_null() => flat.push(m.clone()),
            other => {
                return Err(Error::internal(format!(
                    "set-flatten over a non-set member: {other}"
                )))
            }
        }
    }
    Ok(Binding::Set(flat))
}

fn fold(b: &Binding, step: &Step) -> Result<Binding> {
    let Binding::Set(ms) = b else { return vacuous(b, step) };
    let mut groups: Vec<(Binding, Vec<Member>)> = Vec::new();
    for m in ms {
        let key = fold_key(&m.b, &step.pick)?;
        match groups.iter_mut().find(|(k, _)| k.equiv(&key)) {
            Some((_, g)) => g.push(m.clone()),
            None => groups.push((key, vec![m.clone()])),
        }
    }
    let members = groups
        .into_iter()
        .map(|(key, g)| {
            let prov = g
                .iter()
                .skip(1)
                .fold(g[0].prov.clone(), |acc, m| Member::merged_prov(&acc, &m.prov));
            Member { prov, b: Binding::Tuple(vec![Binding::Set(g), key]) }
        })
        .collect();
    Ok(Binding::Set(members))
}

/// The content-projected key of one member under the picked positions.
fn fold_key(b: &Binding, pick: &[usize]) -> Result<Binding> {
    if let Binding::Tuple(bs) = b {
        if pick.iter().all(|&i| i < bs.len()) {
            let parts: Vec<Binding> = pick.iter().map(|&i| bs[i].clone()).collect();
            let key = if parts.len() == 1 {
                parts.into_iter().next().expect("single")
            } else {
                Binding::Tuple(parts)
            };
            return Ok(key.content_projection());
        }
    }
    if b.is_null() {
        Ok(b.content_projection())
    } else {
        Err(Error::internal(format!("set-fold key positions missing in {b}")))
    }
}

fn merge(b: &Binding, step: &Step) -> Result<Binding> {
    let Binding::DUnion(bs) = b else { return vacuous(b, step) };
    let [i, j] = step.pick[..] else {
        return Err(Error::internal("dun-set-merge needs two branches"));
    };
    let Term::DUnion(tbs) = &step.before else {
        return Err(Error::internal("dun-set-merge away from a d-union"));
    };
    let (arity1, arity2) = (elem_arity(&tbs[i]), elem_arity(&tbs[j]));
    let total = arity1 + arity2;
    let mut members = Vec::new();
    for (branch, offset, arity) in [(i, 0, arity1), (j, arity1, arity2)] {
        let Some(Binding::Set(ms)) = bs.get(branch) else {
            return Err(Error::internal("dun-set-merge over a non-set branch"));
        };
        for m in ms {
            members.push(Member {
                prov: m.prov.clone(),
                b: remark(&m.b, offset, arity, total)?,
            });
        }
    }
    let rest: Vec<Binding> = bs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .map(|(_, c)| c.clone())
        .collect();
    let mut out = vec![Binding::Set(reduce_nulls(members))];
    out.extend(rest);
    Ok(Binding::dunion(out))
}

/// How many option branches a set's element contributes when merged.
fn elem_arity(branch: &Term) -> usize {
    match branch {
        Term::Set { elem, .. } => match elem.as_ref() {
            Term::Opt(items) => items.len(),
            _ => 1,
        },
        _ => 1,
    }
}

/// Re-tag a member binding for its place in a merged option.
fn remark(b: &Binding, offset: usize, arity: usize, total: usize) -> Result<Binding> {
    match b {
        Binding::Branch(k, n, inner) if *n == arity => {
            Ok(Binding::Branch(offset + k, total, inner.clone()))
        }
        _ if arity == 1 => Ok(Binding::branch(offset, total, b.clone())),
        _ => Err(Error::internal("unmarked binding in a nested option merge")),
    }
}

fn idem(b: &Binding, step: &Step) -> Result<Binding> {
    let Term::Opt(branches) = &step.before else {
        return Err(Error::internal("opt-idem away from an option"));
    };
    let n = branches.len();
    let [i, j] = step.pick[..] else {
        return Err(Error::internal("opt-idem needs a branch pair"));
    };
    Ok(match b {
        Binding::Branch(k, m, inner) if *m == n => {
            let k = if *k == j { i } else { *k };
            let k = k - usize::from(j < k);
            if n - 1 == 1 {
                (**inner).clone()
            } else {
                Binding::Branch(k, n - 1, inner.clone())
            }
        }
        other => other.clone(),
    })
}

fn set_alter(b: &Binding, step: &Step) -> Result<Binding> {
    let Term::Opt(branches) = &step.before else {
        return Err(Error::internal("opt-set-alter away from an option"));
    };
    let n = branches.len();
    let [i, j] = step.pick[..] else {
        return Err(Error::internal("opt-set-alter needs a branch pair"));
    };
    let Binding::Branch(k, m, inner) = b else {
        return vacuous(b, step);
    };
    if *m != n {
        return Err(Error::internal("option marker does not fit the branches"));
    }
    if *k == i || *k == j {
        let side = usize::from(*k != i);
        let Binding::Set(ms) = inner.as_ref() else {
            return if inner.is_null() { Ok(b.clone()) } else { vacuous(b, step) };
        };
        let pushed = Binding::Set(
            ms.iter()
                .map(|m| Member {
                    prov: m.prov.clone(),
                    b: Binding::branch(side, 2, m.b.clone()),
                })
                .collect(),
        );
        Ok(if n == 2 { pushed } else { Binding::branch(0, n - 1, pushed) })
    } else {
        let pos = k - usize::from(i < *k) - usize::from(j < *k);
        Ok(Binding::Branch(1 + pos, n - 1, inner.clone()))
    }
}

fn tpl_alter(b: &Binding, step: &Step) -> Result<Binding> {
    let Binding::Tuple(bs) = b else { return vacuous(b, step) };
    let Some((&opt_pos, moved)) = step.pick.split_first() else {
        return Err(Error::internal("opt-tpl-alter step without positions"));
    };
    let comp = bs
        .get(opt_pos)
        .ok_or_else(|| Error::internal("opt-tpl-alter position out of range"))?;
    let moving: Vec<Binding> = moved
        .iter()
        .map(|&m| {
            bs.get(m)
                .cloned()
                .ok_or_else(|| Error::internal("opt-tpl-alter position out of range"))
        })
        .collect::<Result<_>>()?;
    let new_comp = match comp {
        Binding::Branch(k, n, inner) => {
            let mut parts = moving.clone();
            parts.push((**inner).clone());
            Binding::Branch(*k, *n, Box::new(Binding::tuple(parts)))
        }
        other => {
            let Term::Tuple(ts) = &step.before else {
                return Err(Error::internal("opt-tpl-alter away from a tuple"));
            };
            let Some(Term::Opt(branches)) = ts.get(opt_pos) else {
                return Err(Error::internal("opt-tpl-alter without an option"));
            };
            let k = branches
                .iter()
                .position(|br| crate::bind::accords(other, br))
                .ok_or_else(|| {
                    Error::internal("binding fits no branch of the option")
                })?;
            let mut parts = moving.clone();
            parts.push(other.clone());
            Binding::Branch(k, branches.len(), Box::new(Binding::tuple(parts)))
        }
    };
    let rest: Vec<Binding> = bs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != opt_pos && !moved.contains(i))
        .map(|(_, c)| c.clone())
        .chain(std::iter::once(new_comp))
        .collect();
    Ok(Binding::tuple(rest))
}

fn tpl_factor(b: &Binding, step: &Step) -> Result<Binding> {
    let Term::Opt(branches) = &step.before else {
        return Err(Error::internal("opt-tpl-alter away from an option"));
    };
    let (k, inner) = match b {
        Binding::Branch(k, n, inner) if *n == branches.len() => (*k, inner.as_ref()),
        other if other.is_null() => return Ok(other.clone()),
        other => {
            let k = branches
                .iter()
                .position(|br| crate::bind::accords(other, br))
                .ok_or_else(|| {
                    Error::internal("binding fits no branch of the option")
                })?;
            (k, other)
        }
    };
    // the factored parts are picked in branch 0; find them in branch k by key
    let comps_of = |t: &Term| match t {
        Term::Tuple(ts) => ts.clone(),
        other => vec![other.clone()],
    };
    let first = comps_of(&branches[0]);
    let keys: Vec<String> = step
        .pick
        .iter()
        .map(|&i| {
            first
                .get(i)
                .map(Term::canon_key)
                .ok_or_else(|| Error::internal("factored position out of range"))
        })
        .collect::<Result<_>>()?;
    let mine = comps_of(&branches[k]);
    let mut pool: Vec<usize> = (0..mine.len()).collect();
    let mut positions = Vec::with_capacity(keys.len());
    for key in &keys {
        let at = pool
            .iter()
            .position(|&p| mine[p].canon_key() == *key)
            .ok_or_else(|| Error::internal("factored part missing from a branch"))?;
        positions.push(pool.remove(at));
    }
    let parts = match inner {
        Binding::Tuple(bs) if bs.len() == mine.len() => bs.clone(),
        other if mine.len() == 1 => vec![other.clone()],
        other if other.is_null() => return Ok(b.clone()),
        _ => return vacuous(b, step),
    };
    let factored: Vec<Binding> =
        positions.iter().map(|&p| parts[p].clone()).collect();
    let residue: Vec<Binding> = parts
        .iter()
        .enumerate()
        .filter(|(i, _)| !positions.contains(i))
        .map(|(_, c)| c.clone())
        .collect();
    let mut items = factored;
    items.push(Binding::Branch(
        k,
        branches.len(),
        Box::new(Binding::tuple(residue)),
    ));
    Ok(Binding::tuple(items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bind::{accords, IdGen};
    use crate::extract::match_document;
    use crate::route::can_restructure;
    use crate::sxd::{parse_xml, Fragment, Location};
    use crate::syntax::{parse_pattern, parse_term};
    use crate::term::{from_user, mt_ep};

    const BIB: &str = include_str!("../tests/corpus/bib.xml");

    fn bib() -> Fragment {
        parse_xml(BIB.as_bytes(), 1).expect("corpus document parses")
    }

    /// Every variable atom in a binding, with its text value and location.
    fn atoms(b: &Binding, out: &mut Vec<(String, String, Vec<u32>)>) {
        match b {
            Binding::Var(x, Some((v, l))) => {
                let path = match l {
                    Location::At { path, .. } => path.clone(),
                    Location::Null => Vec::new(),
                };
                out.push((x.clone(), v.text(), path));
            }
            Binding::Var(..) | Binding::Unit | Binding::NullUnit | Binding::False => {}
            Binding::Tuple(bs) | Binding::DUnion(bs) => {
                bs.iter().for_each(|c| atoms(c, out))
            }
            Binding::Set(ms) => ms.iter().for_each(|m| atoms(&m.b, out)),
            Binding::Branch(_, _, inner) => atoms(inner, out),
        }
    }

    fn member_atoms(b: &Binding) -> Vec<(String, String, Vec<u32>)> {
        let mut v = Vec::new();
        atoms(b, &mut v);
        v.sort();
        v
    }

    const E1: &str = "//book=>$b(/title=>$t, (/author=>$a(/last=>$l,/first=>$f) ||
                                             /editor=>$e(/last=>$l,/first=>$f)))";

    /// The doubly folded inversion of E1: people over books over roles.
    fn inverted_target() -> Term {
        let inner = from_user(&parse_term("{(($a|$e),($b,$t,$l,$f))}").unwrap());
        let title_key = Term::content(Term::var("$t"));
        let middle = Term::folded_set(
            Term::tuple(vec![title_key.clone(), inner]),
            title_key,
        );
        let person_key = Term::content(Term::tuple(vec![
            Term::var("$l"),
            Term::var("$f"),
        ]));
        Term::folded_set(Term::tuple(vec![person_key.clone(), middle]), person_key)
    }

    #[test]
    fn route_to_the_flat_tuples_yields_the_expected_rows() {
        let ep = parse_pattern(E1).unwrap();
        let src = mt_ep(&ep).unwrap();
        let tgt = inverted_target();
        let route = can_restructure(&src, &tgt).expect("route exists");

        let mut ids = IdGen::default();
        let sample = match_document(&bib(), &ep, &mut ids);

        // the flat relation appears just before the folding steps
        let cut = route
            .iter()
            .position(|s| s.rule == Rule::SetFold)
            .expect("route folds");
        let flat = apply_route(&sample, &route[..cut]).unwrap();
        let Binding::Set(ms) = &flat else { panic!("expected a set") };
        assert_eq!(ms.len(), 7);

        let title1 = "Selected Poems And Four Plays of William Butler Yeats";
        let title2 = "The Selected Poems of Paul Blackburn";
        let book = |p: &[u32]| ("$b".to_string(), String::new(), p.to_vec());
        let rows: Vec<Vec<(String, String, Vec<u32>)>> = vec![
            vec![
                book(&[1, 1]),
                ("$t".into(), title1.into(), vec![1, 1, 2]),
                ("$a".into(), String::new(), vec![1, 1, 3]),
                ("$l".into(), "Yeats".into(), vec![1, 1, 3, 1]),
                ("$f".into(), "Willam".into(), vec![1, 1, 3, 2]),
            ],
            vec![
                book(&[1, 1]),
                ("$t".into(), title1.into(), vec![1, 1, 2]),
                ("$a".into(), String::new(), vec![1, 1, 4]),
                ("$l".into(), "Artificial".into(), vec![1, 1, 4, 1]),
                ("$f".into(), "Data".into(), vec![1, 1, 4, 2]),
            ],
            vec![
                book(&[1, 1]),
                ("$t".into(), title1.into(), vec![1, 1, 2]),
                ("$e".into(), String::new(), vec![1, 1, 5]),
                ("$l".into(), "Rosenthal".into(), vec![1, 1, 5, 1]),
                ("$f".into(), "M.L.".into(), vec![1, 1, 5, 2]),
            ],
            vec![
                book(&[1, 2]),
                ("$t".into(), title2.into(), vec![1, 2, 2]),
                ("$a".into(), String::new(), vec![1, 2, 3]),
                ("$l".into(), "Blackburn".into(), vec![1, 2, 3, 1]),
                ("$f".into(), "Paul".into(), vec![1, 2, 3, 2]),
            ],
            vec![
                book(&[1, 2]),
                ("$t".into(), title2.into(), vec![1, 2, 2]),
                ("$a".into(), String::new(), vec![1, 2, 4]),
                ("$l".into(), "Aritifical".into(), vec![1, 2, 4, 1]),
                ("$f".into(), "Info.".into(), vec![1, 2, 4, 2]),
            ],
            vec![
                book(&[1, 2]),
                ("$t".into(), title2.into(), vec![1, 2, 2]),
                ("$e".into(), String::new(), vec![1, 2, 5]),
                ("$l".into(), "Rosenthal".into(), vec![1, 2, 5, 1]),
                ("$f".into(), "M.L.".into(), vec![1, 2, 5, 2]),
            ],
            vec![
                book(&[1, 2]),
                ("$t".into(), title2.into(), vec![1, 2, 2]),
                ("$e".into(), String::new(), vec![1, 2, 6]),
                ("$l".into(), "Jarolim".into(), vec![1, 2, 6, 1]),
                ("$f".into(), "Edie".into(), vec![1, 2, 6, 2]),
            ],
        ];
        // person containers concatenate their text; compare those by location only
        let norm = |row: &[(String, String, Vec<u32>)]| -> Vec<(String, String, Vec<u32>)> {
            let mut out: Vec<_> = row
                .iter()
                .map(|(x, v, p)| {
                    let v = if x == "$b" || x == "$a" || x == "$e" {
                        String::new()
                    } else {
                        v.clone()
                    };
                    (x.clone(), v, p.clone())
                })
                .collect();
            out.sort();
            out
        };
        let mut got: Vec<Vec<(String, String, Vec<u32>)>> =
            ms.iter().map(|m| norm(&member_atoms(&m.b))).collect();
        for want in &rows {
            let key = norm(want);
            let at = got
                .iter()
                .position(|g| *g == key)
                .unwrap_or_else(|| panic!("missing row {key:?} in {got:?}"));
            got.remove(at);
        }
        assert!(got.is_empty(), "unexpected rows: {got:?}");
    }

    #[test]
    fn full_route_folds_into_accordant_groups() {
        let ep = parse_pattern(E1).unwrap();
        let src = mt_ep(&ep).unwrap();
        let tgt = inverted_target();
        let route = can_restructure(&src, &tgt).expect("route exists");

        let mut ids = IdGen::default();
        let sample = match_document(&bib(), &ep, &mut ids);
        let out = apply_route(&sample, &route).unwrap();
        assert!(accords(&out, &tgt), "{out} does not accord {tgt}");

        // six persons: Rosenthal groups across both books
        let Binding::Set(persons) = &out else { panic!("expected a set") };
        assert_eq!(persons.len(), 6);
        let rosenthal = persons
            .iter()
            .find(|m| {
                let mut v = Vec::new();
                atoms(&m.b, &mut v);
                v.iter().any(|(x, t, p)| x == "$l" && t == "Rosenthal" && p.is_empty())
            })
            .expect("a grouped Rosenthal entry");
        // the key is the content-projected pair; the kept set sits beside it
        let Binding::Tuple(parts) = &rosenthal.b else { panic!("expected a pair") };
        assert_eq!(parts.len(), 2);
        let Binding::Set(by_title) = &parts[0] else { panic!("expected the kept set") };
        assert_eq!(by_title.len(), 2, "one title group per book");
    }

    #[test]
    fn distribution_carries_values_into_members() {
        let doc = parse_xml(
            b"<r><book><title>x</title></book><book><title>y</title></book></r>",
            1,
        )
        .unwrap();
        let ep = parse_pattern("//book=>$b(/title=>$t)").unwrap();
        let src = mt_ep(&ep).unwrap();
        let tgt = from_user(&parse_term("{($b,$t)}").unwrap());
        let route = can_restructure(&src, &tgt).expect("route exists");
        let mut ids = IdGen::default();
        let b = match_document(&doc, &ep, &mut ids);
        let out = apply_route(&b, &route).unwrap();
        assert!(accords(&out, &tgt));
        let Binding::Set(ms) = &out else { panic!("expected a set") };
        assert_eq!(ms.len(), 2);
        let mut v = Vec::new();
        atoms(&out, &mut v);
        assert!(v.iter().any(|(x, t, _)| x == "$t" && t == "x"));
        assert!(v.iter().any(|(x, t, _)| x == "$t" && t == "y"));
    }

    #[test]
    fn merged_null_branch_is_dropped() {
        // no <editor> anywhere: the editor side contributes a null singleton
        let doc = parse_xml(b"<r><book><author>a</author></book></r>", 1).unwrap();
        let ep = parse_pattern("//book=>$b(/author=>$a||/editor=>$e)").unwrap();
        let src = mt_ep(&ep).unwrap();
        let tgt = from_user(&parse_term("{($b,{($a|$e)})}").unwrap());
        let route = can_restructure(&src, &tgt).expect("route exists");
        let mut ids = IdGen::default();
        let b = match_document(&doc, &ep, &mut ids);
        let out = apply_route(&b, &route).unwrap();
        assert!(accords(&out, &tgt), "{out} does not accord {tgt}");
        let Binding::Set(books) = &out else { panic!("expected a set") };
        let Binding::Tuple(parts) = &books[0].b else { panic!("expected a tuple") };
        let Binding::Set(people) = parts.iter().find_map(|p| match p {
            s @ Binding::Set(_) => Some(s),
            _ => None,
        }).expect("a merged set component") else {
            unreachable!()
        };
        assert_eq!(people.len(), 1);
        let Binding::Branch(0, 2, inner) = &people[0].b else {
            panic!("expected the author branch, got {}", people[0].b);
        };
        assert!(!inner.is_null());
    }

    #[test]
    fn fold_groups_by_content_not_location() {
        let doc = parse_xml(
            b"<r><p><k>x</k><v>1</v></p><p><k>x</k><v>2</v></p><p><k>y</k><v>3</v></p></r>",
            1,
        )
        .unwrap();
        let ep = parse_pattern("//p=>$p(/k=>$k,/v=>$v)").unwrap();
        let src = mt_ep(&ep).unwrap();
        let flat = from_user(&parse_term("{($p,$k,$v)}").unwrap());
        let key = Term::content(Term::var("$k"));
        let tgt = Term::folded_set(Term::tuple(vec![flat, key.clone()]), key);
        let route = can_restructure(&src, &tgt).expect("route exists");
        let mut ids = IdGen::default();
        let b = match_document(&doc, &ep, &mut ids);
        let out = apply_route(&b, &route).unwrap();
        assert!(accords(&out, &tgt), "{out} does not accord {tgt}");
        let Binding::Set(groups) = &out else { panic!("expected a set") };
        assert_eq!(groups.len(), 2, "x and y groups");
        let sizes: Vec<usize> = groups
            .iter()
            .map(|g| match &g.b {
                Binding::Tuple(parts) => match &parts[0] {
                    Binding::Set(inner) => inner.len(),
                    other => panic!("expected the kept set, got {other}"),
                },
                other => panic!("expected a pair, got {other}"),
            })
            .collect();
        assert_eq!(sizes, vec![2, 1]);
    }
}
