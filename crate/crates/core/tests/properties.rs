//! Exact structural invariants over random small forests.

use cmj_core::forest::{
    brute_force_height, contour_of, reflect_below_supremum, ForestOptions, ForestPaths, SiblingOrder, Walk,
};
use cmj_core::ladder::{ladder_decompose, AgeConvention};
use cmj_core::measures::{AtomicMeasure, Measure};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Individual {
    life: f64,
    atoms: Vec<f64>,
}

fn individual() -> impl Strategy<Value = Individual> {
    // Integer grid ages make ties (equal birth ages) common.
    (1u32..=12, prop::collection::vec(1u32..=12, 0..4)).prop_map(|(l, fr)| {
        let life = l as f64 * 0.25;
        let mut atoms: Vec<f64> = fr.into_iter().map(|f| (f.min(l)) as f64 * 0.25).collect();
        atoms.sort_by(f64::total_cmp);
        Individual { life, atoms }
    })
}

fn walk_of(ind: &[Individual]) -> Walk {
    let lives: Vec<f64> = ind.iter().map(|i| i.life).collect();
    let ms: Vec<AtomicMeasure> = ind.iter().map(|i| AtomicMeasure::new(i.atoms.clone()).unwrap()).collect();
    Walk::from_measures(&lives, &ms).unwrap()
}

fn order() -> impl Strategy<Value = SiblingOrder> {
    prop_oneof![Just(SiblingOrder::Increasing), Just(SiblingOrder::Decreasing)]
}

fn forest(ind: &[Individual], order: SiblingOrder) -> ForestPaths {
    let opts = ForestOptions {
        order,
        ..ForestOptions::default()
    };
    ForestPaths::from_walk(walk_of(ind), &opts).unwrap()
}

/// Individuals until every tree is complete (the walk reaches a new minimum at the end).
fn complete(ind: &[Individual]) -> Vec<Individual> {
    let mut out = Vec::new();
    let mut pending = 0i64;
    let mut open = false;
    for i in ind {
        pending += i.atoms.len() as i64 - if open { 1 } else { 0 };
        out.push(i.clone());
        open = pending > 0;
        if !open && out.len() > 1 {
            break;
        }
    }
    // Close any open tree with barren individuals.
    for _ in 0..pending {
        out.push(Individual {
            life: 1.0,
            atoms: vec![],
        });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn height_matches_brute_force(ind in prop::collection::vec(individual(), 1..40), ord in order()) {
        let f = forest(&ind, ord);
        let brute = brute_force_height(&f.tree_table()).unwrap();
        for (h, b) in f.h.iter().zip(&brute) {
            prop_assert!((h - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lukasiewicz_increments(ind in prop::collection::vec(individual(), 1..40)) {
        let w = walk_of(&ind);
        for k in 0..w.len() {
            prop_assert_eq!(w.s[k + 1] - w.s[k], w.offspring(k).mass() as i64 - 1);
        }
    }

    #[test]
    fn roots_at_new_minima(ind in prop::collection::vec(individual(), 1..40), ord in order()) {
        let f = forest(&ind, ord);
        let table = f.tree_table();
        let mut running_min = 0;
        for k in 0..f.len() {
            let new_min = k == 0 || f.s()[k] < running_min;
            prop_assert_eq!(table.parent[k].is_none(), new_min);
            prop_assert_eq!(f.h[k] == 0.0, new_min);
            running_min = running_min.min(f.s()[k]);
        }
        let roots = table.parent.iter().filter(|p| p.is_none()).count();
        prop_assert_eq!(roots, f.walk.trees_among_first(f.len()));
    }

    #[test]
    fn contour_duration_is_twice_total_length(ind in prop::collection::vec(individual(), 1..30), ord in order()) {
        let ind = complete(&ind);
        let f = forest(&ind, ord);
        let c = f.contour.as_ref().unwrap();
        let total: f64 = ind.iter().map(|i| i.life).sum();
        prop_assert!((c.duration() - 2.0 * total).abs() < 1e-9);
        prop_assert_eq!(f.tree_ends.len(), f.walk.trees_among_first(f.len()));
        // Per tree as well.
        let table = f.tree_table();
        let mut start = 0.0;
        let mut k = 0;
        for &end in &f.tree_ends {
            let mut len = ind[k].life;
            k += 1;
            while k < ind.len() && table.parent[k].is_some() {
                len += ind[k].life;
                k += 1;
            }
            prop_assert!((end - start - 2.0 * len).abs() < 1e-9);
            start = end;
        }
        // Same contour from the explicit table.
        let direct = contour_of(&table, ord).unwrap();
        prop_assert_eq!(&direct, c);
        // Unit speed and nonnegative.
        for w in c.points.windows(2) {
            prop_assert!(((w[1].1 - w[0].1).abs() - (w[1].0 - w[0].0)).abs() < 1e-9);
            prop_assert!(w[1].1 >= -1e-12);
        }
    }

    #[test]
    fn contour_visits_each_birth(ind in prop::collection::vec(individual(), 1..30), ord in order()) {
        let ind = complete(&ind);
        let f = forest(&ind, ord);
        let c = f.contour.as_ref().unwrap();
        for &h in &f.h {
            prop_assert!(c.points.iter().any(|p| (p.1 - h).abs() < 1e-12) || h == 0.0);
        }
    }

    #[test]
    fn ladder_epochs_are_zeros_of_reflection(ind in prop::collection::vec(individual(), 1..60)) {
        let w = walk_of(&ind);
        let tr = ladder_decompose(&w, usize::MAX - 1, AgeConvention::Verbatim);
        let refl = reflect_below_supremum(&w.s);
        let zeros: Vec<usize> = refl.iter().enumerate().filter(|(_, &r)| r == 0).map(|(k, _)| k).collect();
        prop_assert_eq!(&tr.t_epochs, &zeros);
        for k in 0..tr.len() {
            prop_assert_eq!(tr.z_heights[k], w.s[tr.t_epochs[k]]);
            if k > 0 {
                let t = tr.t_epochs[k];
                let dz = (tr.z_heights[k] - tr.z_heights[k - 1]) as usize;
                let parent = w.offspring(t - 1);
                prop_assert_eq!(tr.r_ages[k] - tr.r_ages[k - 1], parent.atom_location(dz));
                prop_assert!(tr.r_ages[k] - tr.r_ages[k - 1] <= w.lives[t - 1]);
                prop_assert!(tr.t_epochs[k] > tr.t_epochs[k - 1]);
                prop_assert!(tr.z_heights[k] >= tr.z_heights[k - 1]);
            }
        }
    }

    /// With decreasing sibling order and the atom-rank age, the height of
    /// individual n is the final R value of the walk read backwards from n.
    #[test]
    fn height_is_reversed_ladder_age(ind in prop::collection::vec(individual(), 1..40)) {
        let f = forest(&ind, SiblingOrder::Decreasing);
        for n in 0..ind.len() {
            let rev: Vec<Individual> = ind[..n].iter().rev().cloned().collect();
            let w = walk_of(&rev);
            let tr = ladder_decompose(&w, usize::MAX - 1, AgeConvention::AtomRank);
            let r = *tr.r_ages.last().unwrap();
            prop_assert!((r - f.h[n]).abs() < 1e-12, "n = {}: R = {}, H = {}", n, r, f.h[n]);
        }
    }
}
