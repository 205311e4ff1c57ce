//! Substitution, query evaluation and the potential-program function `pot`,
//! which maps a state and a program to its set of `(action, tail)`
//! continuations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{DomainError, GenerativeDomain};
use crate::program::{
    par_absorbing, seq_canonical, ActionTerm, Atom, Literal, NormalEntry, PotentialSet, Program,
    Query, Term,
};

/// Binding of query variables to ground terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    bindings: BTreeMap<Arc<str>, Term>,
}

impl Substitution {
    pub fn empty() -> Substitution {
        Substitution::default()
    }

    pub fn single(var: &str, value: Term) -> Substitution {
        let mut s = Substitution::empty();
        s.bind(var, value);
        s
    }

    /// Binds `var`; panics if `value` is not ground.
    pub fn bind(&mut self, var: &str, value: Term) {
        assert!(value.is_ground(), "substitutions bind ground terms only");
        self.bindings.insert(var.into(), value);
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<str>, &Term)> {
        self.bindings.iter()
    }

    /// Union of two substitutions; `None` if they disagree on a variable.
    pub fn merge(&self, other: &Substitution) -> Option<Substitution> {
        let mut out = self.clone();
        for (k, v) in &other.bindings {
            match out.bindings.get(k) {
                Some(existing) if existing != v => return None,
                Some(_) => {}
                None => {
                    out.bindings.insert(k.clone(), v.clone());
                }
            }
        }
        Some(out)
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        if self.is_empty() || a.is_ground() {
            return a.clone();
        }
        Atom {
            name: a.name.clone(),
            args: a.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    pub fn apply_query(&self, q: &Query) -> Query {
        if self.is_empty() {
            return q.clone();
        }
        Query::new(q.literals.iter().map(|l| Literal {
            negated: l.negated,
            atom: self.apply_atom(&l.atom),
        }))
    }

    fn touches_atom(&self, a: &Atom) -> bool {
        a.variables().any(|v| self.bindings.contains_key(v))
    }

    fn touches_query(&self, q: &Query) -> bool {
        q.literals.iter().any(|l| self.touches_atom(&l.atom))
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// Result of evaluating a query: the substitutions under which it holds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SubstitutionSet(pub BTreeSet<Substitution>);

impl SubstitutionSet {
    pub fn none() -> SubstitutionSet {
        SubstitutionSet::default()
    }

    /// `{ {} }`: a ground query that holds.
    pub fn unit() -> SubstitutionSet {
        SubstitutionSet(BTreeSet::from([Substitution::empty()]))
    }

    pub fn holds(&self) -> bool {
        !self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Substitution> {
        self.0.iter()
    }
}

impl FromIterator<Substitution> for SubstitutionSet {
    fn from_iter<I: IntoIterator<Item = Substitution>>(iter: I) -> Self {
        SubstitutionSet(iter.into_iter().collect())
    }
}

/// Evaluates a conjunction left to right: positive literals extend the
/// current substitutions through the domain, negated literals filter them.
/// A negated literal must be ground once earlier bindings are applied.
pub fn eval_query<D: GenerativeDomain>(
    dom: &D,
    q: &Query,
    s: &D::State,
) -> Result<SubstitutionSet, DomainError> {
    let mut current = vec![Substitution::empty()];
    for lit in q.literals.iter() {
        let mut next = Vec::new();
        for theta in &current {
            let atom = theta.apply_atom(&lit.atom);
            if lit.negated {
                if !atom.is_ground() {
                    return Err(DomainError::UnsafeQuery(format!(
                        "negated literal `{}` is not ground",
                        lit
                    )));
                }
                if dom.eval_atom(&atom, s)?.is_empty() {
                    next.push(theta.clone());
                }
            } else {
                for extra in dom.eval_atom(&atom, s)? {
                    if let Some(m) = theta.merge(&extra) {
                        next.push(m);
                    }
                }
            }
        }
        current = next;
        if current.is_empty() {
            break;
        }
    }
    Ok(current.into_iter().collect())
}

/// Replaces every variable bound in `theta`, in action arguments and query
/// arguments alike. Unchanged subtrees are shared with the input.
pub fn substitute(theta: &Substitution, p: &Program) -> Program {
    subst(theta, p).unwrap_or_else(|| p.clone())
}

fn subst_arc(theta: &Substitution, p: &Arc<Program>) -> Arc<Program> {
    match subst(theta, p) {
        Some(q) => Arc::new(q),
        None => p.clone(),
    }
}

/// `None` when nothing changes.
fn subst(theta: &Substitution, p: &Program) -> Option<Program> {
    if theta.is_empty() {
        return None;
    }
    match p {
        Program::Epsilon | Program::AnyAction => None,
        Program::Act(a) => theta.touches_atom(a).then(|| Program::Act(theta.apply_atom(a))),
        Program::Seq(a, b) | Program::Par(a, b) => {
            let (na, nb) = (subst(theta, a), subst(theta, b));
            if na.is_none() && nb.is_none() {
                return None;
            }
            let na = na.map(Arc::new).unwrap_or_else(|| a.clone());
            let nb = nb.map(Arc::new).unwrap_or_else(|| b.clone());
            Some(match p {
                Program::Seq(..) => Program::Seq(na, nb),
                _ => Program::Par(na, nb),
            })
        }
        Program::Choice(items) => {
            let changed: Vec<Option<Program>> = items.iter().map(|i| subst(theta, i)).collect();
            if changed.iter().all(Option::is_none) {
                return None;
            }
            Some(Program::Choice(
                changed
                    .into_iter()
                    .zip(items.iter())
                    .map(|(c, orig)| c.unwrap_or_else(|| orig.clone()))
                    .collect(),
            ))
        }
        Program::Cond(q, body) | Program::NegCond(q, body) | Program::Loop(q, body) => {
            let q_changed = theta.touches_query(q);
            let nb = subst_arc(theta, body);
            if !q_changed && Arc::ptr_eq(&nb, body) {
                return None;
            }
            let nq = if q_changed { theta.apply_query(q) } else { q.clone() };
            Some(match p {
                Program::Cond(..) => Program::Cond(nq, nb),
                Program::NegCond(..) => Program::NegCond(nq, nb),
                _ => Program::Loop(nq, nb),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("selected action `{0}` is not ground")]
    UnboundActionVariable(String),
    #[error("interpretation exceeded its budget of {0} steps")]
    StepBudgetExceeded(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Interpreter switches for `pot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PotOptions {
    /// When set, `p ; p'` also offers the continuations of `p'` if `p` can
    /// terminate in the current state (a false guard, an exited loop, `eps`).
    /// Off by default: a blocked or finished left operand blocks the sequence.
    pub transparent_termination: bool,
    /// Maximum number of interpretation steps for one call.
    pub step_budget: Option<usize>,
}

/// Continuations of `p` in state `s` with default options.
pub fn pot<D: GenerativeDomain>(
    dom: &D,
    s: &D::State,
    p: &Program,
) -> Result<PotentialSet, SemanticsError> {
    pot_with(dom, s, p, PotOptions::default())
}

pub fn pot_with<D: GenerativeDomain>(
    dom: &D,
    s: &D::State,
    p: &Program,
    opts: PotOptions,
) -> Result<PotentialSet, SemanticsError> {
    let mut interp = Interp {
        dom,
        state: s,
        opts,
        steps: 0,
    };
    let mut out = Vec::new();
    interp.collect(p, &mut out)?;
    Ok(PotentialSet::from_entries(out))
}

struct Interp<'a, D: GenerativeDomain> {
    dom: &'a D,
    state: &'a D::State,
    opts: PotOptions,
    steps: usize,
}

impl<D: GenerativeDomain> Interp<'_, D> {
    fn tick(&mut self) -> Result<(), SemanticsError> {
        self.steps += 1;
        match self.opts.step_budget {
            Some(b) if self.steps > b => Err(SemanticsError::StepBudgetExceeded(b)),
            _ => Ok(()),
        }
    }

    fn query(&self, q: &Query) -> Result<SubstitutionSet, SemanticsError> {
        Ok(self.dom.eval_query(q, self.state)?)
    }

    fn push_action(&self, a: &ActionTerm, out: &mut Vec<NormalEntry>) -> Result<(), SemanticsError> {
        if !a.is_ground() {
            return Err(SemanticsError::UnboundActionVariable(a.to_string()));
        }
        out.push(NormalEntry {
            head: a.clone(),
            tail: Program::Epsilon,
        });
        Ok(())
    }

    fn collect(&mut self, p: &Program, out: &mut Vec<NormalEntry>) -> Result<(), SemanticsError> {
        self.tick()?;
        match p {
            Program::Epsilon => {}
            Program::Act(a) => self.push_action(a, out)?,
            Program::AnyAction => {
                for a in self.dom.ground_actions(self.state) {
                    self.push_action(&a, out)?;
                }
            }
            Program::Seq(first, then) => {
                if matches!(**first, Program::Epsilon) {
                    return self.collect(then, out);
                }
                let mut heads = Vec::new();
                self.collect(first, &mut heads)?;
                out.extend(heads.into_iter().map(|e| NormalEntry {
                    head: e.head,
                    tail: seq_canonical(e.tail, (**then).clone()),
                }));
                if self.opts.transparent_termination && self.can_terminate(first)? {
                    self.collect(then, out)?;
                }
            }
            Program::Choice(items) => {
                for item in items.iter() {
                    self.collect(item, out)?;
                }
            }
            Program::Par(left, right) => {
                let mut l = Vec::new();
                self.collect(left, &mut l)?;
                let mut r = Vec::new();
                self.collect(right, &mut r)?;
                out.extend(l.into_iter().map(|e| NormalEntry {
                    head: e.head,
                    tail: par_absorbing(e.tail, (**right).clone()),
                }));
                out.extend(r.into_iter().map(|e| NormalEntry {
                    head: e.head,
                    tail: par_absorbing((**left).clone(), e.tail),
                }));
            }
            Program::Cond(q, body) => {
                for theta in self.query(q)?.iter() {
                    self.collect(&substitute(theta, body), out)?;
                }
            }
            Program::NegCond(q, body) => {
                if !self.query(q)?.holds() {
                    self.collect(body, out)?;
                }
            }
            Program::Loop(q, body) => {
                // one unfolding, ?(q){body} ; loop, with the loop left symbolic in the tail
                let mut heads = Vec::new();
                for theta in self.query(q)?.iter() {
                    self.collect(&substitute(theta, body), &mut heads)?;
                }
                out.extend(heads.into_iter().map(|e| NormalEntry {
                    head: e.head,
                    tail: seq_canonical(e.tail, p.clone()),
                }));
            }
        }
        Ok(())
    }

    /// Whether `p` may finish without acting in the current state.
    fn can_terminate(&mut self, p: &Program) -> Result<bool, SemanticsError> {
        self.tick()?;
        Ok(match p {
            Program::Epsilon => true,
            Program::Act(_) | Program::AnyAction => false,
            Program::Seq(a, b) | Program::Par(a, b) => {
                self.can_terminate(a)? && self.can_terminate(b)?
            }
            Program::Choice(items) => {
                for i in items.iter() {
                    if self.can_terminate(i)? {
                        return Ok(true);
                    }
                }
                false
            }
            Program::Cond(q, body) => {
                let subs = self.query(q)?;
                if subs.is_empty() {
                    return Ok(true);
                }
                for theta in subs.iter() {
                    if self.can_terminate(&substitute(theta, body))? {
                        return Ok(true);
                    }
                }
                false
            }
            Program::NegCond(q, body) => self.query(q)?.holds() || self.can_terminate(body)?,
            Program::Loop(q, _) => !self.query(q)?.holds(),
        })
    }
}
