//! Finite atomic measures on `(0, ∞)`.
//!
//! A measure is stored as a flat, nondecreasing array of atom times; an atom
//! of multiplicity `m` appears `m` times. The three primitives used by every
//! other module are the distribution function `ν(t) = ν((0, t])`, the location
//! of the `n`-th atom `A_ν(n) = min{t ≥ 0 : ν(t) ≥ n}` (with `min ∅ = ∞`) and
//! the restriction `ν|_x` to `(0, x]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("atom {0} is not a strictly positive finite time")]
    InvalidAtom(f64),
    #[error("atoms are not sorted: {0} follows {1}")]
    Unsorted(f64, f64),
    #[error("cannot parse atom {0:?}")]
    Parse(String),
}

/// Read access shared by owned measures and borrowed views.
pub trait Measure {
    fn atoms(&self) -> &[f64];

    /// Total mass `|ν|`.
    fn mass(&self) -> usize {
        self.atoms().len()
    }

    /// `ν((0, t])`. Atoms exactly at `t` are counted.
    fn count_up_to(&self, t: f64) -> usize {
        count_up_to(self.atoms(), t)
    }

    /// `A_ν(n)`; `0` for `n = 0` and `f64::INFINITY` when `ν` has fewer than `n` atoms.
    fn atom_location(&self, n: usize) -> f64 {
        atom_location(self.atoms(), n)
    }

    /// `ν|_x`, the atoms lying in `(0, x]`.
    fn restrict(&self, x: f64) -> AtomicMeasure {
        let k = self.count_up_to(x);
        AtomicMeasure {
            atoms: self.atoms()[..k].to_vec(),
        }
    }

    fn is_empty(&self) -> bool {
        self.atoms().is_empty()
    }
}

/// `ν((0, t])` over a sorted atom slice.
#[inline]
pub fn count_up_to(atoms: &[f64], t: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    atoms.partition_point(|&a| a <= t)
}

/// `A_ν(n)` over a sorted atom slice.
#[inline]
pub fn atom_location(atoms: &[f64], n: usize) -> f64 {
    match n {
        0 => 0.0,
        n if n <= atoms.len() => atoms[n - 1],
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AtomicMeasure {
    atoms: Vec<f64>,
}

impl AtomicMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a measure from arbitrary atoms, sorting them.
    pub fn new(mut atoms: Vec<f64>) -> Result<Self, MeasureError> {
        if let Some(&bad) = atoms.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(MeasureError::InvalidAtom(bad));
        }
        atoms.sort_by(f64::total_cmp);
        Ok(Self { atoms })
    }

    /// Builds a measure from atoms that must already be sorted.
    pub fn from_sorted(atoms: Vec<f64>) -> Result<Self, MeasureError> {
        for w in atoms.windows(2) {
            if w[1] < w[0] {
                return Err(MeasureError::Unsorted(w[1], w[0]));
            }
        }
        if let Some(&bad) = atoms.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(MeasureError::InvalidAtom(bad));
        }
        Ok(Self { atoms })
    }

    /// `k·δ_x`.
    pub fn dirac(x: f64, k: usize) -> Result<Self, MeasureError> {
        Self::from_sorted(vec![x; k])
    }

    pub(crate) fn from_sorted_unchecked(atoms: Vec<f64>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0] <= w[1]));
        Self { atoms }
    }

    pub fn into_atoms(self) -> Vec<f64> {
        self.atoms
    }

    pub fn view(&self) -> MeasureView<'_> {
        MeasureView { atoms: &self.atoms }
    }

    /// Comma-separated ascending atom times.
    pub fn to_csv_row(&self) -> String {
        self.to_string()
    }

    pub fn from_csv_row(row: &str) -> Result<Self, MeasureError> {
        row.parse()
    }
}

impl Measure for AtomicMeasure {
    fn atoms(&self) -> &[f64] {
        &self.atoms
    }
}

impl TryFrom<Vec<f64>> for AtomicMeasure {
    type Error = MeasureError;

    fn try_from(atoms: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(atoms)
    }
}

impl From<AtomicMeasure> for Vec<f64> {
    fn from(m: AtomicMeasure) -> Self {
        m.atoms
    }
}

impl fmt::Display for AtomicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.view().fmt(f)
    }
}

impl FromStr for AtomicMeasure {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let atoms = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| MeasureError::Parse(tok.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_sorted(atoms)
    }
}

/// Borrowed measure, e.g. one individual's offspring inside a forest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureView<'a> {
    atoms: &'a [f64],
}

impl<'a> MeasureView<'a> {
    pub(crate) fn new(atoms: &'a [f64]) -> Self {
        Self { atoms }
    }

    pub fn to_owned(&self) -> AtomicMeasure {
        AtomicMeasure::from_sorted_unchecked(self.atoms.to_vec())
    }
}

impl Measure for MeasureView<'_> {
    fn atoms(&self) -> &[f64] {
        self.atoms
    }
}

impl fmt::Display for MeasureView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(atoms: &[f64]) -> AtomicMeasure {
        AtomicMeasure::new(atoms.to_vec()).unwrap()
    }

    #[test]
    fn count_examples() {
        assert_eq!(m(&[1.0, 3.0]).count_up_to(2.5), 1);
        assert_eq!(AtomicMeasure::empty().count_up_to(10.0), 0);
        assert_eq!(m(&[0.5, 0.5, 2.0]).count_up_to(0.5), 2);
        assert_eq!(m(&[0.5]).count_up_to(0.0), 0);
    }

    #[test]
    fn atom_location_examples() {
        let nu = m(&[1.0, 3.0]);
        assert_eq!(nu.atom_location(2), 3.0);
        assert!(nu.atom_location(3).is_infinite());
        assert_eq!(nu.atom_location(0), 0.0);
        assert_eq!(AtomicMeasure::empty().atom_location(0), 0.0);
    }

    #[test]
    fn restrict_examples() {
        let nu = m(&[0.5, 2.0, 4.0]);
        assert_eq!(nu.restrict(2.0).atoms(), &[0.5, 2.0]);
        assert_eq!(nu.restrict(5.0), nu);
        assert!(m(&[0.5]).restrict(0.0).is_empty());
    }

    #[test]
    fn rejects_bad_atoms() {
        assert_eq!(
            AtomicMeasure::new(vec![1.0, 0.0]),
            Err(MeasureError::InvalidAtom(0.0))
        );
        assert!(AtomicMeasure::new(vec![f64::NAN]).is_err());
        assert_eq!(
            AtomicMeasure::from_sorted(vec![2.0, 1.0]),
            Err(MeasureError::Unsorted(1.0, 2.0))
        );
    }

    #[test]
    fn csv_row() {
        let nu = m(&[3.0, 0.25, 1.0]);
        assert_eq!(nu.to_csv_row(), "0.25,1,3");
        assert_eq!(AtomicMeasure::from_csv_row("0.25, 1,3").unwrap(), nu);
        assert_eq!(AtomicMeasure::from_csv_row("").unwrap(), AtomicMeasure::empty());
        assert!(AtomicMeasure::from_csv_row("1,x").is_err());
    }

    fn measure_strategy() -> impl Strategy<Value = AtomicMeasure> {
        // Coarse grid so that multiple atoms and ties at t are common.
        prop::collection::vec(1u32..40, 0..25)
            .prop_map(|v| m(&v.into_iter().map(|k| k as f64 / 4.0).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn next_atom_lies_beyond_t(nu in measure_strategy(), t in 0.0f64..12.0) {
            prop_assert!(nu.atom_location(nu.count_up_to(t) + 1) > t);
            let k = nu.count_up_to(t);
            if k >= 1 {
                prop_assert!(nu.atom_location(k) <= t);
            }
        }

        #[test]
        fn restriction_laws(nu in measure_strategy(), x in 0.0f64..12.0, t in 0.0f64..12.0) {
            let r = nu.restrict(x);
            prop_assert_eq!(r.restrict(x), r.clone());
            prop_assert_eq!(r.count_up_to(t), nu.count_up_to(t.min(x)));
        }

        #[test]
        fn count_inverts_location(nu in measure_strategy()) {
            let atoms = nu.atoms();
            for n in 1..=nu.mass() {
                let loc = nu.atom_location(n);
                let c = nu.count_up_to(loc);
                prop_assert!(c >= n);
                let simple = atoms.iter().filter(|&&a| a == loc).count() == 1;
                if simple {
                    prop_assert_eq!(c, n);
                }
            }
        }

        #[test]
        fn count_is_monotone(nu in measure_strategy(), s in 0.0f64..12.0, ds in 0.0f64..3.0) {
            prop_assert!(nu.count_up_to(s) <= nu.count_up_to(s + ds));
        }
    }
}
