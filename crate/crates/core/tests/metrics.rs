use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sram_mcmc::metrics::{
    ground_truth_distribution, histogram_distribution, kl_divergence, marginal_kl, mc_expectation,
    DiscreteDistribution, GridSpec, KlMode,
};
use sram_mcmc::{GmmModel, SampleTrace};

fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

fn dist(p: Vec<f64>) -> DiscreteDistribution {
    DiscreteDistribution::new(vec![p.len()], p).unwrap()
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(1e-6f64..1.0, n),
            prop::collection::vec(1e-6f64..1.0, n),
        )
    })
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_on_itself((f, g) in pair()) {
        let (f, g) = (normalized(&f), normalized(&g));
        prop_assert!(kl_divergence(&dist(f.clone()), &dist(g)).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&dist(f.clone()), &dist(f)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_ignores_joint_bin_order((f, g) in pair(), key in any::<u64>()) {
        let (f, g) = (normalized(&f), normalized(&g));
        let mut perm: Vec<usize> = (0..f.len()).collect();
        perm.sort_by_key(|&i| (i as u64 ^ key).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let pf: Vec<f64> = perm.iter().map(|&i| f[i]).collect();
        let pg: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
        let a = kl_divergence(&dist(f), &dist(g)).unwrap();
        let b = kl_divergence(&dist(pf), &dist(pg)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn histograms_are_distributions(
        pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..300),
        bins in 2usize..20,
        eps in 0.01f64..2.0,
    ) {
        let grid = GridSpec { lower: vec![-5.0, -5.0], upper: vec![5.0, 5.0], bins: vec![bins, bins], pseudo_count: eps };
        let samples: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
        let h = histogram_distribution(&samples, &grid).unwrap();
        prop_assert!((h.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(h.probs.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn truth_is_a_distribution(d in 0.1f64..6.0, n in 1usize..=3, bins in 4usize..25) {
        let m = GmmModel::symmetric_pair(d, n).unwrap();
        let t = ground_truth_distribution(&m, &GridSpec::for_model(&m, bins, 0.5)).unwrap();
        prop_assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn expectation_is_linear(
        xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..200),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let trace = SampleTrace {
            seed: 0,
            burn_in: 0,
            samples: xs.iter().map(|&(x, y)| vec![x, y]).collect(),
            iterations: Vec::new(),
        };
        let f = |x: &[f64]| x[0] * x[1];
        let g = |x: &[f64]| x[1].sin();
        let lhs = mc_expectation(&trace, |x| a * f(x) + b * g(x)).unwrap();
        let rhs = a * mc_expectation(&trace, f).unwrap() + b * mc_expectation(&trace, g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        prop_assert_eq!(mc_expectation(&trace, |_| 1.0).unwrap(), 1.0);
    }
}

/// Exact draws from the mixture: pick a component, then independent normals.
fn iid_draws(model: &GmmModel, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let j = model
                .weights()
                .iter()
                .position(|w| {
                    acc += w;
                    u < acc
                })
                .unwrap_or(model.num_mixtures() - 1);
            model
                .mean(j)
                .iter()
                .zip(model.stddev(j))
                .map(|(m, s)| m + s * z.sample(&mut rng))
                .collect()
        })
        .collect()
}

#[test]
fn exact_draws_have_small_marginal_kl() {
    for n in [1, 2, 4] {
        let m = GmmModel::symmetric_pair(1.0, n).unwrap();
        let grid = GridSpec::for_model(&m, 30, 0.5);
        let kl = marginal_kl(
            &iid_draws(&m, 100_000, n as u64),
            &m,
            &grid,
            KlMode::Marginal1d,
        )
        .unwrap();
        assert!(kl < 0.02, "N={n}: {kl}");
    }
}

#[test]
fn smoothing_dominates_at_short_traces() {
    let m = GmmModel::symmetric_pair(1.0, 2).unwrap();
    let grid = GridSpec::for_model(&m, 30, 0.5);
    let short = marginal_kl(&iid_draws(&m, 500, 1), &m, &grid, KlMode::Joint).unwrap();
    let long = marginal_kl(&iid_draws(&m, 100_000, 1), &m, &grid, KlMode::Joint).unwrap();
    assert!(short > 5.0 * long, "{short} vs {long}");
}
