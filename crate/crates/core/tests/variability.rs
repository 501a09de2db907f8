mod common;

use common::{rng, uniform_matrix};
use ltv_core::{total_variability, variability, Interval, MarkovOperator, Matrix};
use proptest::prelude::*;
use rand::Rng;

fn scalar_ops(values: &[f64]) -> Vec<MarkovOperator> {
    values.iter().map(|v| MarkovOperator::new(vec![Matrix::from_element(1, 1, *v)]).unwrap()).collect()
}

#[test]
fn matches_dense_grid_minimization_in_one_dimension() {
    let mut r = rng(3);
    for _ in 0..20 {
        let vals: Vec<f64> = (0..12).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let ops = scalar_ops(&vals);
        let interval = Interval::new(3, 11).unwrap();
        let v = variability(&ops, &interval).unwrap();
        let slice = &vals[2..11];
        let mut best = f64::INFINITY;
        let mut g = -1.0;
        while g <= 1.0 {
            let c = slice.iter().map(|x| (x - g).powi(2)).sum::<f64>() / slice.len() as f64;
            best = best.min(c);
            g += 1e-5;
        }
        assert!((v - best).abs() < 1e-6, "{v} vs {best}");
    }
}

#[test]
fn empty_interval_is_rejected() {
    assert!(Interval::new(5, 4).is_err());
    assert!(Interval::new(0, 4).is_err());
    let ops = scalar_ops(&[1.0, 2.0]);
    assert!(variability(&ops, &Interval { start: 2, end: 1 }).is_err());
}

fn random_ops(seed: u64, n: usize) -> Vec<MarkovOperator> {
    let mut r = rng(seed);
    (0..n).map(|_| MarkovOperator::new(vec![uniform_matrix(&mut r, 2, 1, 1.0), uniform_matrix(&mut r, 2, 1, 1.0)]).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn total_is_length_times_mean(seed in 0u64..10_000, a in 1usize..20, len in 0usize..20) {
        let ops = random_ops(seed, 40);
        let i = Interval::new(a, a + len).unwrap();
        let v = variability(&ops, &i).unwrap();
        let tot = total_variability(&ops, &i).unwrap();
        prop_assert!((tot - i.len() as f64 * v).abs() <= 1e-12 * (1.0 + tot));
    }

    #[test]
    fn total_is_monotone_under_inclusion(seed in 0u64..10_000, a in 1usize..10, b in 0usize..10, c in 0usize..10, d in 0usize..10) {
        let ops = random_ops(seed, 40);
        let outer = Interval::new(a, a + b + c + d).unwrap();
        let inner = Interval::new(a + b, a + b + c).unwrap();
        prop_assert!(total_variability(&ops, &inner).unwrap() <= total_variability(&ops, &outer).unwrap() + 1e-12);
    }

    #[test]
    fn zero_iff_constant(seed in 0u64..10_000, len in 1usize..10) {
        let ops = random_ops(seed, 1);
        let same = vec![ops[0].clone(); len];
        prop_assert_eq!(variability(&same, &Interval::new(1, len).unwrap()).unwrap(), 0.0);
        let mut diff = same.clone();
        diff.push(ops[0].scaled(2.0));
        prop_assert!(variability(&diff, &Interval::new(1, len + 1).unwrap()).unwrap() > 0.0);
    }
}
