//! Normal form `sum(a ; p)` of condition-free programs.

use std::fmt;

use thiserror::Error;

use super::{canonicalize, seq_canonical, ActionTerm, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalFormError {
    #[error("program is not condition-free: found `{0}`")]
    NotConditionFree(String),
    #[error("action `{0}` is not ground")]
    NonGroundAction(String),
}

/// One alternative of a normal form: a ground action followed by a tail.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalEntry {
    pub head: ActionTerm,
    pub tail: Program,
}

impl fmt::Display for NormalEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ; {}", self.head, self.tail)
    }
}

/// Set of normal-form entries, ordered and deduplicated on
/// `(head, canonical tail)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PotentialSet {
    entries: Vec<NormalEntry>,
}

impl PotentialSet {
    pub fn new() -> PotentialSet {
        PotentialSet::default()
    }

    /// Canonicalizes every tail, then sorts and deduplicates.
    pub fn from_entries(entries: impl IntoIterator<Item = NormalEntry>) -> PotentialSet {
        let mut entries: Vec<NormalEntry> = entries
            .into_iter()
            .map(|e| NormalEntry {
                tail: canonicalize(&e.tail),
                head: e.head,
            })
            .collect();
        entries.sort();
        entries.dedup();
        PotentialSet { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NormalEntry> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&NormalEntry> {
        self.entries.get(i)
    }

    pub fn entries(&self) -> &[NormalEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<NormalEntry> {
        self.entries
    }

    /// Distinct heads in order.
    pub fn heads(&self) -> Vec<&ActionTerm> {
        let mut heads: Vec<&ActionTerm> = self.entries.iter().map(|e| &e.head).collect();
        heads.dedup();
        heads
    }

    /// The normal form rendered as a program: `(h1 ; t1) + (h2 ; t2) + ...`.
    pub fn to_program(&self) -> Program {
        let items: Vec<Program> = self
            .entries
            .iter()
            .map(|e| Program::seq(Program::Act(e.head.clone()), e.tail.clone()))
            .collect();
        match items.len() {
            1 => items.into_iter().next().unwrap(),
            _ => Program::Choice(items.into()),
        }
    }
}

impl<'a> IntoIterator for &'a PotentialSet {
    type Item = &'a NormalEntry;
    type IntoIter = std::slice::Iter<'a, NormalEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

impl FromIterator<NormalEntry> for PotentialSet {
    fn from_iter<I: IntoIterator<Item = NormalEntry>>(iter: I) -> Self {
        PotentialSet::from_entries(iter)
    }
}

/// Interleaving of a finished or remaining branch with its sibling; a
/// finished (`eps`) side is absorbed.
pub fn par_absorbing(left: Program, right: Program) -> Program {
    match (left, right) {
        (Program::Epsilon, r) => r,
        (l, Program::Epsilon) => l,
        (l, r) => Program::par(l, r),
    }
}

/// Rewrites a condition-free program into its normal form.
///
/// The rules, read as left-to-right rewrites:
/// * `eps ; p = p` and `p + p = p`
/// * `(p1 + p2) ; p = p1 ; p + p2 ; p`, with `;` associative
/// * `p1 || (p2 + p3) = p1 || p2 + p1 || p3` (and its mirror)
/// * `(a1 ; p1) || (a2 ; p2) = a1 ; (p1 || a2 ; p2) + a2 ; (a1 ; p1 || p2)`,
///   of which `a1 || (a2 ; p)` and `a1 || a2` are the instances with an
///   empty remainder.
///
/// Interleaving keeps the sibling operand whole in each tail, which is the
/// choice distribution above folded back with `p ; (p1 + p2) = p ; p1 + p ; p2`.
/// A standalone action `a` yields the entry `(a, eps)`.
pub fn reduce_to_normal_form(p: &Program) -> Result<PotentialSet, NormalFormError> {
    if let Some(bad) = first_condition(p) {
        return Err(NormalFormError::NotConditionFree(bad.to_string()));
    }
    let mut out = Vec::new();
    prefixes(p, &mut out)?;
    Ok(PotentialSet::from_entries(out))
}

fn prefixes(p: &Program, out: &mut Vec<NormalEntry>) -> Result<(), NormalFormError> {
    match p {
        Program::Epsilon => {}
        Program::Act(a) => {
            if !a.is_ground() {
                return Err(NormalFormError::NonGroundAction(a.to_string()));
            }
            out.push(NormalEntry {
                head: a.clone(),
                tail: Program::Epsilon,
            });
        }
        Program::Seq(first, then) => {
            let mut heads = Vec::new();
            prefixes(first, &mut heads)?;
            let then_c = canonicalize(then);
            out.extend(heads.into_iter().map(|e| NormalEntry {
                head: e.head,
                tail: seq_canonical(e.tail, then_c.clone()),
            }));
            // eps ; p = p once `first` has rewritten to eps in some branch
            if nullable(first)? {
                prefixes(then, out)?;
            }
        }
        Program::Choice(items) => {
            for item in items.iter() {
                prefixes(item, out)?;
            }
        }
        Program::Par(left, right) => {
            let mut l = Vec::new();
            prefixes(left, &mut l)?;
            let mut r = Vec::new();
            prefixes(right, &mut r)?;
            out.extend(l.into_iter().map(|e| NormalEntry {
                head: e.head,
                tail: par_absorbing(e.tail, (**right).clone()),
            }));
            out.extend(r.into_iter().map(|e| NormalEntry {
                head: e.head,
                tail: par_absorbing((**left).clone(), e.tail),
            }));
        }
        Program::Cond(..) | Program::NegCond(..) | Program::Loop(..) | Program::AnyAction => {
            return Err(NormalFormError::NotConditionFree(p.to_string()));
        }
    }
    Ok(())
}

fn first_condition(p: &Program) -> Option<&Program> {
    match p {
        Program::Epsilon | Program::Act(_) => None,
        Program::Seq(a, b) | Program::Par(a, b) => first_condition(a).or_else(|| first_condition(b)),
        Program::Choice(items) => items.iter().find_map(first_condition),
        _ => Some(p),
    }
}

/// Whether the program rewrites to `eps` along some branch of its choices.
fn nullable(p: &Program) -> Result<bool, NormalFormError> {
    Ok(match p {
        Program::Epsilon => true,
        Program::Act(_) => false,
        Program::Seq(a, b) | Program::Par(a, b) => nullable(a)? && nullable(b)?,
        Program::Choice(items) => {
            let mut any = false;
            for i in items.iter() {
                any |= nullable(i)?;
            }
            any
        }
        Program::Cond(..) | Program::NegCond(..) | Program::Loop(..) | Program::AnyAction => {
            return Err(NormalFormError::NotConditionFree(p.to_string()));
        }
    })
}
