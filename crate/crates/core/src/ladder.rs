//! Weak ascending ladder decomposition of a Lukasiewicz walk.
//!
//! `T(k+1) = inf{ℓ > T(k) : S(ℓ) ≥ S(T(k))}`, `Z(k) = S(T(k))`, and the
//! renewal process `R` adds, at each ladder epoch, an age read off the offspring
//! measure of the individual `T(k) − 1` that produced the jump.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::Walk;
use crate::measures::{atom_location, Measure};
use crate::models::{LifeSampler, Variant};

#[derive(Debug, Error, PartialEq)]
pub enum LadderError {
    #[error("ladder process truncated: no epoch beyond index {horizon} (needed one past {needed})")]
    Truncated { horizon: usize, needed: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Which atom of `P_{T(k)−1}` supplies the age increment of `R`.
///
/// `Verbatim` reads `A(ΔZ)` (so a tie `ΔZ = 0` adds nothing). `AtomRank`
/// reads `A(ΔZ + 1)`, the birth age of the child through which the walk
/// reaches the new level; with decreasing sibling order this makes the height
/// of an individual exactly the `R` value of its reversed walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeConvention {
    Verbatim,
    AtomRank,
}

impl Default for AgeConvention {
    fn default() -> Self {
        AgeConvention::AtomRank
    }
}

impl AgeConvention {
    /// Age increment for a jump to level `dz` above the previous maximum.
    #[inline]
    pub fn age(self, atoms: &[f64], dz: usize) -> f64 {
        match self {
            AgeConvention::Verbatim => atom_location(atoms, dz),
            AgeConvention::AtomRank => atom_location(atoms, dz + 1),
        }
    }
}

/// Ladder epochs, heights and accumulated ages of a walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTriple {
    pub t_epochs: Vec<usize>,
    pub z_heights: Vec<i64>,
    pub r_ages: Vec<f64>,
    /// Last walk index inspected.
    pub horizon: usize,
    /// Fewer epochs than requested were found.
    pub truncated: bool,
}

impl LadderTriple {
    pub fn len(&self) -> usize {
        self.t_epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_epochs.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,T,Z,R")?;
        for k in 0..self.len() {
            writeln!(w, "{k},{},{},{}", self.t_epochs[k], self.z_heights[k], self.r_ages[k])?;
        }
        Ok(())
    }
}

/// Scans the walk once and records up to `max_k` ladder epochs after `T(0) = 0`.
pub fn ladder_decompose(walk: &Walk, max_k: usize, convention: AgeConvention) -> LadderTriple {
    let s = &walk.s;
    let mut t_epochs = vec![0];
    let mut z_heights = vec![0];
    let mut r_ages = vec![0.0];
    let mut level = s[0];
    let mut r = 0.0;
    let mut horizon = 0;
    for (l, &sl) in s.iter().enumerate().skip(1) {
        if t_epochs.len() > max_k {
            break;
        }
        horizon = l;
        if sl >= level {
            let dz = (sl - level) as usize;
            r += convention.age(walk.offspring(l - 1).atoms(), dz);
            level = sl;
            t_epochs.push(l);
            z_heights.push(sl);
            r_ages.push(r);
        }
    }
    LadderTriple {
        truncated: t_epochs.len() <= max_k,
        t_epochs,
        z_heights,
        r_ages,
        horizon,
    }
}

/// Right-continuous nondecreasing step function: value `knots[i].1` on
/// `[knots[i].0, knots[i+1].0)`, covered up to `end`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepPath {
    pub knots: Vec<(f64, f64)>,
    pub end: f64,
}

impl StepPath {
    /// Staircase `s ↦ f(⌊scale·s⌋)` built from a sequence.
    pub fn from_sequence(values: &[f64], scale: f64) -> StepPath {
        StepPath {
            knots: values.iter().enumerate().map(|(k, &v)| (k as f64 / scale, v)).collect(),
            end: values.len() as f64 / scale,
        }
    }
}

/// `inf{s ≥ 0 : path(s) > t}`; the flag is raised (and the right endpoint
/// returned) when the covered range has no such `s`.
pub fn local_time_inverse(path: &StepPath, t: f64) -> (f64, bool) {
    match path.knots.iter().find(|k| k.1 > t) {
        Some(k) => (k.0, false),
        None => (path.end, true),
    }
}

/// `(R_p, Z_p)(L_p(t)−)` with `T_p(s) = T([p v_p s])/p`, `Z_p(s) = v_p Z([p v_p s])`
/// and `R_p(s) = v_p R([p v_p s])`.
///
/// The left limit at `L_p(t) = k*/(p v_p)` reads index `k* − 1`, where
/// `k* = min{k : T(k) > pt}`. Only the walk up to `⌊pt⌋` matters.
pub fn ladder_compose_at(triple: &LadderTriple, p: u64, v_p: f64, t: f64) -> Result<(f64, f64), LadderError> {
    if !(t >= 0.0) || !(v_p > 0.0) || p == 0 {
        return Err(LadderError::Argument(format!("p = {p}, v_p = {v_p}, t = {t}")));
    }
    let pt = p as f64 * t;
    let k_star = triple.t_epochs.iter().position(|&tk| tk as f64 > pt);
    let k = match k_star {
        Some(k) => k - 1,
        // No recorded epoch beyond pt: fine if the scan covered ⌊pt⌋.
        None if triple.horizon as f64 >= pt.floor() => triple.len() - 1,
        None => {
            return Err(LadderError::Truncated {
                horizon: triple.horizon,
                needed: pt,
            })
        }
    };
    Ok((v_p * triple.r_ages[k], v_p * triple.z_heights[k] as f64))
}

/// One draw under the size-biased measure, with its importance weight `μ(V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBiasedTriple {
    pub v: f64,
    pub z_hat: u64,
    pub r_hat: f64,
    pub weight: f64,
    pub u: f64,
}

impl SizeBiasedTriple {
    pub fn from_draw(v: f64, atoms: &[f64], u: f64, convention: AgeConvention) -> SizeBiasedTriple {
        let mu = atoms.len();
        let z = (u * mu as f64).floor() as usize;
        let r = if mu == 0 { 0.0 } else { convention.age(atoms, z) };
        SizeBiasedTriple {
            v,
            z_hat: z as u64,
            r_hat: r,
            weight: mu as f64,
            u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SizeBiasedSample {
    pub draws: Vec<SizeBiasedTriple>,
    pub warnings: Vec<String>,
}

impl SizeBiasedSample {
    pub fn weights(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.weight).collect()
    }

    /// `(Σw)² / Σw²`.
    pub fn effective_sample_size(&self) -> f64 {
        let (s, s2) = self
            .draws
            .iter()
            .fold((0.0, 0.0), |(s, s2), d| (s + d.weight, s2 + d.weight * d.weight));
        if s2 == 0.0 {
            0.0
        } else {
            s * s / s2
        }
    }

    pub fn mean_weight(&self) -> f64 {
        self.draws.iter().map(|d| d.weight).sum::<f64>() / self.draws.len() as f64
    }

    /// Multinomial resampling proportional to the weights.
    pub fn resample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<SizeBiasedTriple> {
        let mut cum = Vec::with_capacity(self.draws.len());
        let mut total = 0.0;
        for d in &self.draws {
            total += d.weight;
            cum.push(total);
        }
        if total == 0.0 {
            return Vec::new();
        }
        (0..m)
            .map(|_| {
                let x = rng.random::<f64>() * total;
                let i = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
                self.draws[i]
            })
            .collect()
    }
}

/// Draws `(V, μ, U)` and records `(V, ⌊Uμ(V)⌋, age)` with weight `μ(V)`.
pub fn size_biased_triple<R: Rng + ?Sized>(
    sampler: &LifeSampler,
    n_samples: usize,
    convention: AgeConvention,
    rng: &mut R,
) -> SizeBiasedSample {
    let mut draws = Vec::with_capacity(n_samples);
    let mut buf = Vec::new();
    for _ in 0..n_samples {
        let v = sampler.sample_into(rng, &mut buf);
        let u = rng.random::<f64>();
        draws.push(SizeBiasedTriple::from_draw(v, &buf, u, convention));
    }
    let mut out = SizeBiasedSample {
        draws,
        warnings: Vec::new(),
    };
    let ess = out.effective_sample_size();
    if ess < n_samples as f64 / 10.0 {
        out.warnings
            .push(format!("weight effective sample size {ess:.0} below n/10 = {}", n_samples / 10));
    }
    out
}

/// Data at the first ladder epoch of a fresh walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstLadder {
    /// `V_{T(1)−1}`.
    pub v: f64,
    pub z: u64,
    pub r: f64,
    pub t: u64,
}

/// Runs a walk until `S(ℓ) ≥ 0` for some `ℓ ≥ 1`; `None` past `max_steps`.
///
/// Only the individual making the final jump needs its atoms, so for the
/// binary homogeneous model counts are drawn directly and the atoms of the
/// last individual are filled in as uniform order statistics.
pub fn first_ladder<R: Rng + ?Sized>(
    sampler: &LifeSampler,
    convention: AgeConvention,
    max_steps: u64,
    buf: &mut Vec<f64>,
    rng: &mut R,
) -> Option<FirstLadder> {
    let binary = matches!(sampler.spec().variant, Variant::BinaryHomogeneous { .. });
    let mut s: i64 = 0;
    for t in 1..=max_steps {
        let (v, n) = if binary {
            sampler.sample_count(rng)
        } else {
            let v = sampler.sample_into(rng, buf);
            (v, buf.len() as u64)
        };
        s += n as i64 - 1;
        if s >= 0 {
            if binary {
                buf.clear();
                buf.extend((0..n).map(|_| v * rng.random::<f64>()));
                buf.sort_by(f64::total_cmp);
            }
            let z = s as u64;
            return Some(FirstLadder {
                v,
                z,
                r: convention.age(buf, z as usize),
                t,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicMeasure;

    fn walk_from_counts(counts: &[usize]) -> Walk {
        let measures: Vec<AtomicMeasure> = counts
            .iter()
            .map(|&c| AtomicMeasure::new((1..=c).map(|i| i as f64 * 0.5).collect()).unwrap())
            .collect();
        let lives: Vec<f64> = counts.iter().map(|&c| (c as f64 * 0.5).max(1.0)).collect();
        Walk::from_measures(&lives, &measures).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let w = walk_from_counts(&[2, 0, 1, 0]);
        assert_eq!(w.s, vec![0, 1, 0, 0, -1]);
        let tr = ladder_decompose(&w, 5, AgeConvention::Verbatim);
        assert_eq!(tr.t_epochs, vec![0, 1]);
        assert_eq!(tr.z_heights, vec![0, 1]);
        assert_eq!(tr.r_ages, vec![0.0, 0.5]);
        assert!(tr.truncated);

        let w = walk_from_counts(&[1; 5]);
        let tr = ladder_decompose(&w, 10, AgeConvention::Verbatim);
        assert_eq!(tr.t_epochs, vec![0, 1, 2, 3, 4, 5]);
        assert!(tr.z_heights.iter().all(|&z| z == 0));
        assert!(tr.r_ages.iter().all(|&r| r == 0.0));
        let tr = ladder_decompose(&w, 10, AgeConvention::AtomRank);
        assert_eq!(tr.r_ages, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);

        let w = walk_from_counts(&[0; 4]);
        let tr = ladder_decompose(&w, 3, AgeConvention::Verbatim);
        assert_eq!(tr.t_epochs, vec![0]);
        assert!(tr.truncated);
    }

    #[test]
    fn decompose_stops_at_max_k() {
        let w = walk_from_counts(&[1; 10]);
        let tr = ladder_decompose(&w, 3, AgeConvention::Verbatim);
        assert_eq!(tr.t_epochs, vec![0, 1, 2, 3]);
        assert!(!tr.truncated);
    }

    #[test]
    fn local_time_examples() {
        let jump = StepPath {
            knots: vec![(0.0, 0.0), (2.0, 5.0)],
            end: 10.0,
        };
        assert_eq!(local_time_inverse(&jump, 3.0), (2.0, false));
        let quick = StepPath {
            knots: vec![(0.0, 0.0), (0.5, 1.0)],
            end: 1.0,
        };
        assert_eq!(local_time_inverse(&quick, 0.0), (0.5, false));
        let stairs = StepPath::from_sequence(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0);
        assert_eq!(local_time_inverse(&stairs, 2.5), (3.0, false));
        // Grid scan oracle.
        let brute = (0..=5000)
            .map(|i| i as f64 * 1e-3)
            .find(|&s| (s.floor() as usize) < 5 && [0.0, 1.0, 2.0, 3.0, 4.0][s.floor() as usize] > 2.5)
            .unwrap();
        assert!((brute - 3.0).abs() < 1e-9);
        assert_eq!(local_time_inverse(&stairs, 7.0), (5.0, true));
    }

    #[test]
    fn compose_examples() {
        let stairs = LadderTriple {
            t_epochs: vec![0, 1, 2, 3, 4],
            z_heights: vec![0, 1, 2, 3, 4],
            r_ages: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            horizon: 4,
            truncated: false,
        };
        assert_eq!(ladder_compose_at(&stairs, 1, 1.0, 2.5).unwrap(), (2.0, 2.0));
        assert_eq!(ladder_compose_at(&stairs, 1, 1.0, 0.0).unwrap(), (0.0, 0.0));
        // At a jump of T_p the left limit excludes the straddling excursion.
        assert_eq!(ladder_compose_at(&stairs, 1, 1.0, 2.0).unwrap(), (2.0, 2.0));
        assert!(matches!(
            ladder_compose_at(&stairs, 1, 1.0, 9.0),
            Err(LadderError::Truncated { .. })
        ));
        // A scan that saw no epoch past T(1) up to index 6 still answers at pt = 5.
        let quiet = LadderTriple {
            t_epochs: vec![0, 1],
            z_heights: vec![0, 1],
            r_ages: vec![0.0, 0.3],
            horizon: 6,
            truncated: true,
        };
        assert_eq!(ladder_compose_at(&quiet, 1, 2.0, 5.0).unwrap(), (0.6, 2.0));
    }

    #[test]
    fn size_biased_examples() {
        let t = SizeBiasedTriple::from_draw(2.5, &[1.0, 2.0], 0.6, AgeConvention::Verbatim);
        assert_eq!((t.z_hat, t.r_hat, t.weight), (1, 1.0, 2.0));
        let t = SizeBiasedTriple::from_draw(2.5, &[1.0, 2.0], 0.6, AgeConvention::AtomRank);
        assert_eq!(t.r_hat, 2.0);
        let barren = SizeBiasedTriple::from_draw(1.0, &[], 0.3, AgeConvention::Verbatim);
        assert_eq!((barren.weight, barren.r_hat), (0.0, 0.0));
        let sample = SizeBiasedSample {
            draws: vec![barren, t],
            warnings: vec![],
        };
        let mut rng = crate::rng::substream(1, 0, 0);
        assert!(sample.resample(100, &mut rng).iter().all(|d| d.weight == 2.0));
    }
}
