//! Target queries and their result sets.

use std::collections::BTreeSet;

use super::ast::{Formula, Term};
use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, ObjectId, RelationId};

/// A query `q(s1..sn)` whose satisfying tuples are the positive examples.
///
/// Result sets are computed for the range-restricted conjunctive fragment:
/// optional leading existential quantifiers over a conjunction of positive
/// atoms in which every target variable occurs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetQuery {
    formula: Formula,
    arity: usize,
}

impl TargetQuery {
    pub fn new(formula: Formula) -> Result<Self> {
        let targets = formula.targets();
        let arity = targets.iter().copied().max().unwrap_or(0);
        if arity == 0 {
            return Err(Error::InvalidFormula(
                "a target query needs at least one free variable s1".into(),
            ));
        }
        if let Some(missing) = (1..=arity).find(|i| !targets.contains(i)) {
            return Err(Error::InvalidFormula(format!(
                "target variables must be s1..s{arity}; s{missing} is missing"
            )));
        }
        if !formula.counting_vars().is_empty() {
            return Err(Error::UnsupportedQuery(
                "counting variables are not allowed in target queries".into(),
            ));
        }
        conjuncts(&formula)?;
        Ok(TargetQuery { formula, arity })
    }

    /// The binary template `relation(s1, s2)`.
    pub fn binary(relation: &str) -> Self {
        TargetQuery {
            formula: Formula::atom(relation, vec![Term::Target(1), Term::Target(2)]),
            arity: 2,
        }
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// For single-atom queries over distinct targets in order, the relation name.
    pub fn as_relation(&self) -> Option<&str> {
        match &self.formula {
            Formula::Atom(a)
                if a.terms
                    .iter()
                    .enumerate()
                    .all(|(i, t)| *t == Term::Target(i + 1)) =>
            {
                Some(&a.relation)
            }
            _ => None,
        }
    }
}

/// Splits `exists x1..xk . a1 & ... & am` into its atoms.
fn conjuncts(f: &Formula) -> Result<Vec<&super::ast::Atom>> {
    let mut body = f;
    while let Formula::Exists(_, inner) = body {
        body = inner;
    }
    let mut out = Vec::new();
    let mut stack = vec![body];
    while let Some(node) = stack.pop() {
        match node {
            Formula::Atom(a) => out.push(a),
            Formula::And(a, b) => {
                stack.push(b);
                stack.push(a);
            }
            Formula::Not(_) => {
                return Err(Error::UnsupportedQuery(
                    "negation makes the result set unbounded; use it in features only".into(),
                ))
            }
            other => {
                return Err(Error::UnsupportedQuery(format!(
                    "only existentially quantified conjunctions of atoms are supported, found `{other}`"
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum JoinArg {
    Var(usize),
    Const(ObjectId),
}

struct JoinAtom {
    relation: RelationId,
    args: Vec<JoinArg>,
}

/// `S(q)`: every target tuple satisfying the query in `kb`, computed by an
/// index-driven backtracking join.
pub fn result_set(kb: &KnowledgeBase, query: &TargetQuery) -> Result<BTreeSet<Vec<ObjectId>>> {
    let atoms = conjuncts(&query.formula)?;
    let n = query.arity;
    let mut var_names: Vec<String> = Vec::new();
    let mut join = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let Some(relation) = kb.relation_id(&atom.relation) else {
            // an unknown relation has an empty extension
            return Ok(BTreeSet::new());
        };
        if kb.arity(relation) != atom.terms.len() {
            return Err(Error::ArityMismatch {
                relation: atom.relation.clone(),
                expected: kb.arity(relation),
                found: atom.terms.len(),
            });
        }
        let mut args = Vec::with_capacity(atom.terms.len());
        for t in &atom.terms {
            args.push(match t {
                Term::Target(i) => JoinArg::Var(i - 1),
                Term::Var(name) => {
                    let idx = match var_names.iter().position(|v| v == name) {
                        Some(p) => p,
                        None => {
                            var_names.push(name.clone());
                            var_names.len() - 1
                        }
                    };
                    JoinArg::Var(n + idx)
                }
                Term::Const(name) => match kb.object_id(name) {
                    Some(o) => JoinArg::Const(o),
                    None => return Ok(BTreeSet::new()),
                },
                Term::Counting(_) => unreachable!("rejected by TargetQuery::new"),
            });
        }
        join.push(JoinAtom { relation, args });
    }
    let mut bindings = vec![None; n + var_names.len()];
    let mut done = vec![false; join.len()];
    let mut out = BTreeSet::new();
    join_rec(kb, &join, &mut done, &mut bindings, n, &mut out);
    Ok(out)
}

fn join_rec(
    kb: &KnowledgeBase,
    atoms: &[JoinAtom],
    done: &mut [bool],
    bindings: &mut [Option<ObjectId>],
    n: usize,
    out: &mut BTreeSet<Vec<ObjectId>>,
) {
    let bound = |a: &JoinArg, b: &[Option<ObjectId>]| match *a {
        JoinArg::Var(v) => b[v],
        JoinArg::Const(o) => Some(o),
    };
    // next atom: the one with the smallest candidate list
    let mut best: Option<(usize, &[u32])> = None;
    for (i, atom) in atoms.iter().enumerate() {
        if done[i] {
            continue;
        }
        let mut candidates = kb.facts_of(atom.relation);
        for (pos, arg) in atom.args.iter().enumerate() {
            if let Some(o) = bound(arg, bindings) {
                let list = kb.facts_with(atom.relation, pos, o);
                if list.len() < candidates.len() {
                    candidates = list;
                }
            }
        }
        if best.is_none_or(|(_, c)| candidates.len() < c.len()) {
            best = Some((i, candidates));
        }
    }
    let Some((idx, candidates)) = best else {
        let tuple: Vec<ObjectId> = bindings[..n]
            .iter()
            .map(|b| b.expect("range restricted"))
            .collect();
        out.insert(tuple);
        return;
    };
    done[idx] = true;
    let atom = &atoms[idx];
    let mut newly = Vec::with_capacity(atom.args.len());
    for &fi in candidates {
        let fact = kb.fact(fi);
        newly.clear();
        let mut ok = true;
        for (arg, &obj) in atom.args.iter().zip(fact.args.iter()) {
            match *arg {
                JoinArg::Const(c) => ok &= c == obj,
                JoinArg::Var(v) => match bindings[v] {
                    Some(b) => ok &= b == obj,
                    None => {
                        bindings[v] = Some(obj);
                        newly.push(v);
                    }
                },
            }
            if !ok {
                break;
            }
        }
        if ok {
            join_rec(kb, atoms, done, bindings, n, out);
        }
        for &v in &newly {
            bindings[v] = None;
        }
    }
    done[idx] = false;
}
