//! Abstract syntax of action programs and structural canonicalization.
//!
//! Every node holds its children behind `Arc`, so cloning a program or a
//! tail stored in the search tree is O(1) and values can be shared across
//! threads freely.

mod normal_form;

use std::fmt;
use std::sync::Arc;

pub use normal_form::{par_absorbing, reduce_to_normal_form, NormalEntry, NormalFormError, PotentialSet};

/// A ground constant, a variable (uppercase-initial) or an integer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Arc<str>),
    Var(Arc<str>),
    Int(i64),
}

impl Term {
    /// Builds a constant or variable from an identifier, by its first character.
    pub fn ident(name: &str) -> Term {
        if name.starts_with(|c: char| c.is_ascii_uppercase()) {
            Term::Var(name.into())
        } else {
            Term::Const(name.into())
        }
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(name.into())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.into())
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Var(v) => f.write_str(v),
            Term::Int(i) => write!(f, "{i}"),
        }
    }
}

/// A named compound `name(arg, ...)`. Used both for actions and for query
/// predicates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub name: Arc<str>,
    pub args: Arc<[Term]>,
}

/// Actions share the representation of predicate atoms.
pub type ActionTerm = Atom;

impl Atom {
    pub fn new(name: &str, args: impl IntoIterator<Item = Term>) -> Atom {
        assert!(!name.is_empty(), "atom name must be non-empty");
        Atom {
            name: name.into(),
            args: args.into_iter().collect(),
        }
    }

    /// An atom with no arguments.
    pub fn nullary(name: &str) -> Atom {
        Atom::new(name, [])
    }

    /// Ground atom whose arguments are all constants.
    pub fn ground(name: &str, args: &[&str]) -> Atom {
        Atom::new(name, args.iter().map(|a| Term::constant(a)))
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Arc<str>> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// One conjunct of a query, possibly negated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal { negated: false, atom }
    }

    pub fn neg(atom: Atom) -> Literal {
        Literal { negated: true, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// A conjunction of literals. The empty conjunction is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    pub literals: Arc<[Literal]>,
}

impl Query {
    pub fn truth() -> Query {
        Query::default()
    }

    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Query {
        Query {
            literals: literals.into_iter().collect(),
        }
    }

    pub fn atom(atom: Atom) -> Query {
        Query::new([Literal::pos(atom)])
    }

    pub fn is_true(&self) -> bool {
        self.literals.is_empty()
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return f.write_str("true");
        }
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// An action program.
///
/// `Choice` is n-ary. After [`canonicalize`] its items are sorted, free of
/// duplicates and never themselves choices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Program {
    Epsilon,
    Act(ActionTerm),
    Seq(Arc<Program>, Arc<Program>),
    Choice(Arc<[Program]>),
    Par(Arc<Program>, Arc<Program>),
    Cond(Query, Arc<Program>),
    NegCond(Query, Arc<Program>),
    Loop(Query, Arc<Program>),
    /// The choice over every ground action applicable in the current state.
    AnyAction,
}

impl Program {
    pub fn act(a: ActionTerm) -> Program {
        Program::Act(a)
    }

    pub fn seq(first: Program, then: Program) -> Program {
        Program::Seq(Arc::new(first), Arc::new(then))
    }

    pub fn choice(items: impl IntoIterator<Item = Program>) -> Program {
        Program::Choice(items.into_iter().collect())
    }

    pub fn par(left: Program, right: Program) -> Program {
        Program::Par(Arc::new(left), Arc::new(right))
    }

    pub fn cond(q: Query, body: Program) -> Program {
        Program::Cond(q, Arc::new(body))
    }

    pub fn neg_cond(q: Query, body: Program) -> Program {
        Program::NegCond(q, Arc::new(body))
    }

    pub fn while_loop(q: Query, body: Program) -> Program {
        Program::Loop(q, Arc::new(body))
    }

    /// `a1 ; a2 ; ... ; an`, right-associated. Empty input gives `eps`.
    pub fn sequence(items: impl IntoIterator<Item = Program>) -> Program {
        let items: Vec<Program> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .reduce(|rest, p| Program::seq(p, rest))
            .unwrap_or(Program::Epsilon)
    }

    /// True if the program uses only `eps`, actions, `;`, `+` and `||`.
    pub fn is_condition_free(&self) -> bool {
        match self {
            Program::Epsilon | Program::Act(_) => true,
            Program::Seq(a, b) | Program::Par(a, b) => {
                a.is_condition_free() && b.is_condition_free()
            }
            Program::Choice(items) => items.iter().all(Program::is_condition_free),
            Program::Cond(..) | Program::NegCond(..) | Program::Loop(..) | Program::AnyAction => {
                false
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Program::Epsilon | Program::Act(_) | Program::AnyAction => 1,
            Program::Seq(a, b) | Program::Par(a, b) => 1 + a.depth().max(b.depth()),
            Program::Choice(items) => 1 + items.iter().map(Program::depth).max().unwrap_or(0),
            Program::Cond(_, p) | Program::NegCond(_, p) | Program::Loop(_, p) => 1 + p.depth(),
        }
    }
}

impl From<ActionTerm> for Program {
    fn from(a: ActionTerm) -> Program {
        Program::Act(a)
    }
}

/// Fully parenthesized rendering of the tree as given (no canonicalization).
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Epsilon => f.write_str("eps"),
            Program::AnyAction => f.write_str("any"),
            Program::Act(a) => write!(f, "{a}"),
            Program::Seq(a, b) => write!(f, "({a} ; {b})"),
            Program::Par(a, b) => write!(f, "({a} || {b})"),
            Program::Choice(items) => {
                f.write_str("(")?;
                for (i, p) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
            Program::Cond(q, p) => write!(f, "?({q}) {{ {p} }}"),
            Program::NegCond(q, p) => write!(f, "!?({q}) {{ {p} }}"),
            Program::Loop(q, p) => write!(f, "while ({q}) {{ {p} }}"),
        }
    }
}

/// Sequential composition of two canonical programs, keeping the result
/// canonical: `eps` is a left unit and sequences nest to the right.
pub fn seq_canonical(first: Program, then: Program) -> Program {
    match first {
        Program::Epsilon => then,
        Program::Seq(a, b) => {
            let rest = seq_canonical((*b).clone(), then);
            Program::Seq(a, Arc::new(rest))
        }
        other => Program::Seq(Arc::new(other), Arc::new(then)),
    }
}

/// Choice over canonical items: flattened, sorted, deduplicated. A single
/// remaining item is returned as itself.
pub fn choice_canonical(items: impl IntoIterator<Item = Program>) -> Program {
    let mut flat = Vec::new();
    for p in items {
        match p {
            Program::Choice(inner) => flat.extend(inner.iter().cloned()),
            other => flat.push(other),
        }
    }
    flat.sort();
    flat.dedup();
    if flat.len() == 1 {
        flat.pop().unwrap()
    } else {
        Program::Choice(flat.into())
    }
}

/// Whether `p` is already in structural canonical form.
pub fn is_canonical(p: &Program) -> bool {
    match p {
        Program::Epsilon | Program::Act(_) | Program::AnyAction => true,
        Program::Seq(a, b) => {
            !matches!(**a, Program::Epsilon | Program::Seq(..)) && is_canonical(a) && is_canonical(b)
        }
        Program::Choice(items) => {
            items.len() >= 2
                && items.windows(2).all(|w| w[0] < w[1])
                && items.iter().all(|i| !matches!(i, Program::Choice(_)) && is_canonical(i))
        }
        Program::Par(a, b) => is_canonical(a) && is_canonical(b),
        Program::Cond(_, body) | Program::NegCond(_, body) | Program::Loop(_, body) => is_canonical(body),
    }
}

/// Structural canonical form. Already canonical programs are returned as a
/// cheap clone that shares all subtrees.
pub fn canonicalize(p: &Program) -> Program {
    if is_canonical(p) {
        return p.clone();
    }
    match p {
        Program::Epsilon | Program::Act(_) | Program::AnyAction => p.clone(),
        Program::Seq(a, b) => seq_canonical(canonicalize(a), canonicalize(b)),
        Program::Choice(items) => choice_canonical(items.iter().map(canonicalize)),
        Program::Par(a, b) => Program::par(canonicalize(a), canonicalize(b)),
        Program::Cond(q, body) => Program::cond(q.clone(), canonicalize(body)),
        Program::NegCond(q, body) => Program::neg_cond(q.clone(), canonicalize(body)),
        Program::Loop(q, body) => Program::while_loop(q.clone(), canonicalize(body)),
    }
}

/// Equality up to canonicalization.
pub fn program_equals(a: &Program, b: &Program) -> bool {
    a == b || canonicalize(a) == canonicalize(b)
}
