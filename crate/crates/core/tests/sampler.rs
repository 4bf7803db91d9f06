use gibbs_core::models::catalog;
use gibbs_core::rng::{derive_seed, stream_rng};
use gibbs_core::sampler::{detailed_balance_log, sample, InitialState, SamplerConfig};
use gibbs_core::stats::{mean, standard_error};
use gibbs_core::{GibbsModel, Model, Pattern2, Point2, Window2};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

fn unit() -> Window2 {
    Window2::cube(1.0).unwrap()
}

fn final_counts(model: &Model, chains: u64, salt: u64) -> Vec<f64> {
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let cfg = SamplerConfig::for_volume(1.0, derive_seed(salt, &[c]));
            sample(model, &unit(), &cfg).unwrap().0.len() as f64
        })
        .collect()
}

#[test]
fn poisson_chain_mean_count() {
    let m = Model::poisson(200.0, 0.05).unwrap();
    let n = final_counts(&m, 100, 1);
    let (mu, se) = (mean(&n), standard_error(&n));
    assert!((mu - 200.0).abs() <= 3.0 * se, "mean {mu}, se {se}");
}

#[test]
fn poisson_chain_count_distribution() {
    let m = Model::poisson(200.0, 0.05).unwrap();
    let n = final_counts(&m, 600, 2);
    let law = Poisson::new(200.0).unwrap();
    // Bins (-inf, 170), [170, 175), ..., [225, 230), [230, inf).
    let cuts: Vec<u64> = (0..=12).map(|i| 170 + 5 * i).collect();
    let mut observed = vec![0.0; cuts.len() + 1];
    for &k in &n {
        let k = k as u64;
        let bin = cuts.iter().take_while(|&&c| k >= c).count();
        observed[bin] += 1.0;
    }
    let mut probs = Vec::new();
    let mut prev = 0.0;
    for &c in &cuts {
        let cdf = law.cdf(c - 1);
        probs.push(cdf - prev);
        prev = cdf;
    }
    probs.push(1.0 - prev);
    let total = n.len() as f64;
    let stat: f64 = observed.iter().zip(&probs).map(|(o, p)| (o - total * p).powi(2) / (total * p)).sum();
    assert!(probs.iter().all(|p| total * p >= 5.0));
    let dof = (observed.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    assert!(p_value > 0.01, "chi-square {stat} on {dof} dof, p = {p_value}");
}

#[test]
fn hard_core_is_respected() {
    for name in ["shc1", "shc2"] {
        let m = catalog::by_name::<f64>(name).unwrap();
        let delta = m.hard_core().unwrap();
        for seed in 0..10 {
            let mut cfg = SamplerConfig::for_volume(1.0, seed);
            cfg.init = InitialState::Empty;
            let (x, _) = sample(&m, &unit(), &cfg).unwrap();
            assert!(x.min_pairwise_distance() > delta, "{name} seed {seed}");
        }
    }
}

#[test]
fn strauss_mean_count() {
    let m = catalog::by_name::<f64>("s1").unwrap();
    let n = final_counts(&m, 60, 3);
    let mu = mean(&n);
    assert!((mu - 99.0).abs() <= 9.9, "mean count {mu}");
}

#[test]
fn seed_determinism() {
    let m = catalog::by_name::<f64>("t1").unwrap();
    let cfg = SamplerConfig::for_volume(1.0, 42);
    let a = sample(&m, &unit(), &cfg).unwrap();
    let b = sample(&m, &unit(), &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let c = sample(&m, &unit(), &SamplerConfig::for_volume(1.0, 43)).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn poisson_ratios_are_inverse() {
    let m = Model::poisson(200.0, 0.05).unwrap();
    let w = Window2::cube(2.0).unwrap();
    let x = Pattern2::from_coords(&[[0.1, 0.1], [0.11, 0.1], [1.5, 1.2]]).unwrap();
    let u = Point2::new([0.105, 0.12]);
    let (b, d) = detailed_balance_log(&m, &w, &x, &u).unwrap();
    let want = (200.0f64 * 4.0 / 4.0).ln();
    assert!((b - want).abs() < 1e-12);
    assert!((d + want).abs() < 1e-12);
}

#[test]
fn hard_core_birth_is_rejected() {
    let m = catalog::by_name::<f64>("shc1").unwrap();
    let x = Pattern2::from_coords(&[[0.5, 0.5]]).unwrap();
    let (b, _) = detailed_balance_log(&m, &unit(), &x, &Point2::new([0.51, 0.5])).unwrap();
    assert_eq!(b, f64::NEG_INFINITY);
}

#[test]
fn detailed_balance_products() {
    let mut rng = stream_rng(9, 0);
    for name in catalog::NAMES {
        let m = catalog::by_name::<f64>(name).unwrap();
        for _ in 0..50 {
            let n = rng.random_range(0..80);
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
            let x = Pattern2::from_coords(&pts).unwrap();
            let u = Point2::new([rng.random(), rng.random()]);
            let (b, d) = detailed_balance_log(&m, &unit(), &x, &u).unwrap();
            if b.is_finite() {
                assert!((b + d).abs() <= 1e-12, "{name}: {b} + {d}");
            } else {
                assert_eq!(b, f64::NEG_INFINITY, "{name}");
            }
        }
    }
}

#[test]
fn single_precision_chain() {
    let m = GibbsModel::<f32>::strauss(200.0, 0.2, 0.05).unwrap();
    let w = gibbs_core::Window::<f32, 2>::cube(1.0).unwrap();
    let (x, diag) = sample(&m, &w, &SamplerConfig::for_volume(1.0, 5)).unwrap();
    assert!((60..140).contains(&x.len()), "{}", x.len());
    assert!(diag.acceptance_rate_birth > 0.0 && diag.acceptance_rate_birth <= 1.0);
}
