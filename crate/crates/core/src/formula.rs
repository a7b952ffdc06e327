//! Primitive positive formulas: conjunctions of atoms with optional
//! existential quantification.

use crate::error::{arg, Result};
use crate::language::ConstraintLanguage;
use crate::relation::{eq_relation, Relation};
use crate::search::{Budget, Network};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomRel {
    /// The equality relation of the domain.
    Eq,
    /// A member of the constraint language.
    Named(String),
    /// The empty nullary relation. Only needed to define the empty relation.
    False,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub rel: AtomRel,
    /// Indices into `free ++ bound`.
    pub args: Vec<usize>,
}

impl Atom {
    pub fn named(name: impl Into<String>, args: Vec<usize>) -> Self {
        Atom { rel: AtomRel::Named(name.into()), args }
    }

    pub fn eq(a: usize, b: usize) -> Self {
        Atom { rel: AtomRel::Eq, args: vec![a, b] }
    }

    pub fn falsum() -> Self {
        Atom { rel: AtomRel::False, args: vec![] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FormulaClass {
    pub quantifier_free: bool,
    pub equality_free: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PPFormula {
    pub name: String,
    pub free: Vec<String>,
    pub bound: Vec<String>,
    pub atoms: Vec<Atom>,
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl PPFormula {
    pub fn new(name: impl Into<String>, free: Vec<String>, bound: Vec<String>, atoms: Vec<Atom>) -> Result<Self> {
        let f = PPFormula { name: name.into(), free, bound, atoms };
        f.validate()?;
        Ok(f)
    }

    /// Formula with free variables `x1..xn`, bound variables `y1..ym`.
    pub fn with_counts(name: impl Into<String>, nfree: usize, nbound: usize, atoms: Vec<Atom>) -> Result<Self> {
        Self::new(name, default_names("x", nfree), default_names("y", nbound), atoms)
    }

    /// The single atom `name(x1..xn)`.
    pub fn atom_of(name: &str, arity: usize) -> Self {
        Self::with_counts(name, arity, 0, vec![Atom::named(name, (0..arity).collect())]).expect("well-formed")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let mut names: Vec<&String> = self.free.iter().chain(&self.bound).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return arg(format!("formula {} repeats a variable name", self.name));
        }
        for a in &self.atoms {
            if let Some(&v) = a.args.iter().find(|&&v| v >= n) {
                return arg(format!("atom argument {v} beyond {n} variables in {}", self.name));
            }
            match a.rel {
                AtomRel::Eq if a.args.len() != 2 => return arg("equality atom needs two arguments"),
                AtomRel::False if !a.args.is_empty() => return arg("false atom takes no arguments"),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.free.len()
    }

    pub fn num_vars(&self) -> usize {
        self.free.len() + self.bound.len()
    }

    pub fn classify(&self) -> FormulaClass {
        FormulaClass {
            quantifier_free: self.bound.is_empty(),
            equality_free: !self.atoms.iter().any(|a| a.rel == AtomRel::Eq),
        }
    }

    /// Maximum number of atoms any single variable occurs in.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.num_vars()];
        for a in &self.atoms {
            let mut vs = a.args.clone();
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                deg[v] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Relation names used by the atoms.
    pub fn relation_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .atoms
            .iter()
            .filter_map(|a| match &a.rel {
                AtomRel::Named(n) => Some(n.as_str()),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Checks every atom resolves in `lang` with the right arity.
    pub fn check_against(&self, lang: &ConstraintLanguage) -> Result<()> {
        for a in &self.atoms {
            if let AtomRel::Named(n) = &a.rel {
                let Some(r) = lang.get(n) else {
                    return arg(format!("formula {} uses unknown relation {n}", self.name));
                };
                if r.arity() != a.args.len() {
                    return arg(format!("atom {n} has {} arguments, relation arity is {}", a.args.len(), r.arity()));
                }
            }
        }
        Ok(())
    }

    /// The set of assignments to the free variables that extend to a model.
    pub fn evaluate(&self, lang: &ConstraintLanguage) -> Result<Relation> {
        self.evaluate_budgeted(lang, &mut Budget::new(500_000_000, None))
    }

    pub fn evaluate_budgeted(&self, lang: &ConstraintLanguage, budget: &mut Budget) -> Result<Relation> {
        self.validate()?;
        self.check_against(lang)?;
        let k = lang.domain();
        let eq = eq_relation(k)?;
        let falsum = Relation::empty(k, 0)?;
        let cons = self.atoms.iter().map(|a| {
            let r = match &a.rel {
                AtomRel::Eq => &eq,
                AtomRel::False => &falsum,
                AtomRel::Named(n) => lang.get(n).expect("checked above"),
            };
            (r, a.args.clone())
        });
        let mut net = Network::new(k, self.num_vars(), cons);
        let head: Vec<usize> = (0..self.arity()).collect();
        net.set_existential_tail(&head);
        let mut tuples = Vec::new();
        net.for_each_solution(budget, |a| {
            tuples.push(a[..head.len()].to_vec());
            true
        })?;
        Relation::new(k, self.arity(), tuples)
    }

    /// Renames every variable index through `map` (into a formula with
    /// `nfree` free and `nbound` bound variables).
    pub(crate) fn remap_atoms(&self, map: &[usize]) -> Vec<Atom> {
        self.atoms
            .iter()
            .map(|a| Atom { rel: a.rel.clone(), args: a.args.iter().map(|&v| map[v]).collect() })
            .collect()
    }
}

/// Conjunction of every atom over `Γ ∪ {eq}` that holds on all tuples of `r`,
/// with free variables `x1..xn`. It evaluates to the smallest qfpp-definable
/// relation containing `r`.
///
/// Atoms that mention a duplicated column are implied by the same atom on the
/// first copy plus an equality atom, so only first copies are enumerated.
pub fn canonical_qfpp(r: &Relation, lang: &ConstraintLanguage) -> Result<PPFormula> {
    if r.domain() != lang.domain() {
        return arg("relation and language have different domains");
    }
    let n = r.arity();
    if r.is_empty() {
        return PPFormula::with_counts("canonical", n, 0, vec![Atom::falsum()]);
    }
    let cols = r.columns();
    let mut reps: Vec<usize> = Vec::new();
    let mut atoms = Vec::new();
    for i in 0..n {
        match reps.iter().find(|&&j| cols[j] == cols[i]) {
            Some(&j) => atoms.push(Atom::eq(j, i)),
            None => reps.push(i),
        }
    }
    let rows = r.tuples();
    for (name, g) in lang.iter() {
        if g.arity() == 0 {
            continue;
        }
        let mut seq = Vec::with_capacity(g.arity());
        let live: Vec<Vec<usize>> = vec![(0..g.len()).collect(); rows.len()];
        entailed(g, rows, &reps, &mut seq, &live, &mut |s| atoms.push(Atom::named(name.clone(), s.to_vec())));
    }
    PPFormula::with_counts("canonical", n, 0, atoms)
}

/// Enumerates index sequences `s` over `reps` such that every row of the
/// source relation, read at `s`, is a tuple of `g`. `live[r]` lists the
/// tuples of `g` that agree with row `r` on the current prefix.
fn entailed(
    g: &Relation,
    rows: &[Vec<u8>],
    reps: &[usize],
    seq: &mut Vec<usize>,
    live: &[Vec<usize>],
    emit: &mut impl FnMut(&[usize]),
) {
    let p = seq.len();
    if p == g.arity() {
        emit(seq);
        return;
    }
    for &i in reps {
        let mut next = Vec::with_capacity(rows.len());
        let mut ok = true;
        for (row, cand) in rows.iter().zip(live) {
            let keep: Vec<usize> = cand.iter().copied().filter(|&gi| g.tuples()[gi][p] == row[i]).collect();
            if keep.is_empty() {
                ok = false;
                break;
            }
            next.push(keep);
        }
        if ok {
            seq.push(i);
            entailed(g, rows, reps, seq, &next, emit);
            seq.pop();
        }
    }
}
