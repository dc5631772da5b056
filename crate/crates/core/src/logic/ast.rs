use std::collections::BTreeSet;
use std::fmt;

/// A term of an atom. Target and counting variables carry the number written
/// after `s` / `u` (so `s1` is `Target(1)`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Target(usize),
    Counting(usize),
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }
}

impl Formula {
    pub fn atom(relation: impl Into<String>, terms: Vec<Term>) -> Self {
        Formula::Atom(Atom {
            relation: relation.into(),
            terms,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn exists(var: impl Into<String>, body: Formula) -> Self {
        Formula::Exists(var.into(), Box::new(body))
    }

    pub fn forall(var: impl Into<String>, body: Formula) -> Self {
        Formula::Forall(var.into(), Box::new(body))
    }

    fn walk_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(x) | Formula::Exists(_, x) | Formula::Forall(_, x) => x.walk_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.walk_atoms(f);
                b.walk_atoms(f);
            }
        }
    }

    /// Target variable numbers occurring in the formula.
    pub fn targets(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            out.extend(a.terms.iter().filter_map(|t| match t {
                Term::Target(i) => Some(*i),
                _ => None,
            }))
        });
        out
    }

    /// Counting variable numbers occurring in the formula.
    pub fn counting_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            out.extend(a.terms.iter().filter_map(|t| match t {
                Term::Counting(i) => Some(*i),
                _ => None,
            }))
        });
        out
    }

    pub fn relations(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.walk_atoms(&mut |a| {
            out.insert(a.relation.as_str());
        });
        out
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(x) => x.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Formula::Exists(_, x) | Formula::Forall(_, x) => 1 + x.quantifier_depth(),
        }
    }

    /// True when no negation, implication or universal quantifier occurs.
    pub fn is_positive_existential(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.is_positive_existential() && b.is_positive_existential()
            }
            Formula::Exists(_, x) => x.is_positive_existential(),
            Formula::Not(_) | Formula::Implies(..) | Formula::Forall(..) => false,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Target(i) => write!(f, "s{i}"),
            Term::Counting(i) => write!(f, "u{i}"),
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "`{c}`"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

fn is_quantifier(x: &Formula) -> bool {
    matches!(x, Formula::Exists(..) | Formula::Forall(..))
}

struct Operand<'a>(&'a Formula, bool);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Prints in the parser's concrete syntax with just enough parentheses for the
/// output to parse back to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self {
            Atom(a) => write!(f, "{a}"),
            Not(x) => {
                let wrap = !matches!(**x, Atom(_) | Not(_));
                write!(f, "!{}", Operand(x, wrap))
            }
            And(a, b) => {
                let wl = matches!(**a, Or(..) | Implies(..)) || is_quantifier(a);
                let wr = matches!(**b, And(..) | Or(..) | Implies(..)) || is_quantifier(b);
                write!(f, "{} & {}", Operand(a, wl), Operand(b, wr))
            }
            Or(a, b) => {
                let wl = matches!(**a, Implies(..)) || is_quantifier(a);
                let wr = matches!(**b, Or(..) | Implies(..)) || is_quantifier(b);
                write!(f, "{} | {}", Operand(a, wl), Operand(b, wr))
            }
            Implies(a, b) => {
                let wl = matches!(**a, Implies(..)) || is_quantifier(a);
                let wr = matches!(**b, Implies(..)) || is_quantifier(b);
                write!(f, "{} => {}", Operand(a, wl), Operand(b, wr))
            }
            Exists(v, x) => write!(f, "exists {v} . {x}"),
            Forall(v, x) => write!(f, "forall {v} . {x}"),
        }
    }
}
