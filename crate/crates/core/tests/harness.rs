use std::fs;

use gibbs_core::estimator::estimate_beta;
use gibbs_core::experiment::{
    emit_tables, empty_space_from_patterns, estimate_empty_space, failure_rows, poisson_empty_space, poisson_sigma2_planar,
    read_summary, run_coverage_study, run_experiment, run_study, sigma2_theoretical, simulate, with_threads,
    EmptySpaceDesign, ExperimentConfig, SamplerSettings, StudyConfig, StudySummary,
};
use gibbs_core::models::catalog;
use gibbs_core::{Model, Window2};

fn quick(label: &str, model: Model, side: f64, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(label, model, side);
    cfg.replications = reps;
    cfg.master_seed = 99;
    cfg.sampler.steps_per_volume = 20_000.0;
    cfg
}

#[test]
fn thread_count_does_not_change_results() {
    let mut cfg = quick("s1", catalog::by_name("s1").unwrap(), 1.0, 8);
    cfg.range_grid = Some(gibbs_core::range::parse_grid("0.02:0.08:13").unwrap());
    let one = with_threads(Some(1), || run_experiment::<2>(&cfg)).unwrap().unwrap();
    let three = with_threads(Some(3), || run_experiment::<2>(&cfg)).unwrap().unwrap();
    assert_eq!(one.records, three.records);
    assert_eq!(one.summary, three.summary);
    cfg.master_seed += 1;
    let other = run_experiment::<2>(&cfg).unwrap();
    assert_ne!(one.summary, other.summary);
}

#[test]
fn single_replication_summary() {
    let cfg = quick("s2", catalog::by_name("s2").unwrap(), 1.0, 1);
    let out = run_experiment::<2>(&cfg).unwrap();
    let w = Window2::cube(1.0).unwrap();
    let x = simulate(&cfg.model, &w, &cfg.sampler, cfg.replication_seed(0)).unwrap();
    assert_eq!(out.summary.mean_count, Some(x.len() as f64));
    for (c, r) in out.summary.columns.iter().zip(cfg.r_tildes()) {
        let rep = estimate_beta(&x, &w, r, &cfg.quadrature, cfg.alpha).unwrap();
        assert_eq!(c.mean_beta, Some(rep.beta_hat));
        assert_eq!(c.sd_beta, Some(0.0));
        assert_eq!(c.coverage_rate, Some(if rep.covers(200.0) { 1.0 } else { 0.0 }));
    }
}

#[test]
fn degenerate_replications_are_counted() {
    // At R̃ = 0.15 a Poisson(400) pattern leaves no empty space.
    let mut cfg = quick("dense", Model::poisson(400.0, 0.05).unwrap(), 1.0, 5);
    cfg.sampler.direct_poisson = true;
    cfg.multipliers = vec![1.0, 3.0];
    let out = run_experiment::<2>(&cfg).unwrap();
    let [ok, bad] = &out.summary.columns[..] else { panic!() };
    assert_eq!((ok.successes, ok.failure_count), (5, 0));
    assert_eq!((bad.successes, bad.failure_count), (0, 5));
    assert_eq!(bad.mean_beta, None);
    assert_eq!(bad.coverage_rate, None);
    assert!(bad.mean_v == Some(0.0) && bad.residual_mean.is_some());
    let rows = failure_rows(&[out]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.stage == "p=3"));
}

#[test]
fn tables_and_json_round_trip() {
    let exps: Vec<ExperimentConfig> = ["s1", "g2"]
        .iter()
        .flat_map(|n| [1.0, 1.5].map(|side| quick(n, catalog::by_name(n).unwrap(), side, 3)))
        .collect();
    let outcomes = run_study::<2>(&exps, Some(2)).unwrap();
    let summary = StudySummary::from_outcomes(&outcomes);
    let dir = tempfile::tempdir().unwrap();
    let written = emit_tables(&summary, &failure_rows(&outcomes), dir.path()).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["table1.csv", "table3.csv", "failures.csv", "summary.json", "tables.txt"]);

    let t1 = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let lines: Vec<&str> = t1.lines().collect();
    assert_eq!(lines.len(), 1 + 4);
    assert_eq!(lines[0], "model,L,n_bar,mean_p0.9,sd_p0.9,mean_p1,sd_p1,mean_p1.1,sd_p1.1,mean_p1.2,sd_p1.2");
    assert!(lines[3].starts_with("g2,1,"));
    // Shortest round-trip formatting.
    let first: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(Some(first), summary.rows[0].columns[0].mean_beta);

    assert_eq!(read_summary(&dir.path().join("summary.json")).unwrap(), summary);
    let text = fs::read_to_string(dir.path().join("tables.txt")).unwrap();
    assert!(text.contains("Coverage"));

    let one = StudySummary { rows: vec![summary.rows[0].clone()] };
    let dir1 = tempfile::tempdir().unwrap();
    emit_tables(&one, &[], dir1.path()).unwrap();
    assert_eq!(fs::read_to_string(dir1.path().join("table3.csv")).unwrap().lines().count(), 2);
    assert!(emit_tables(&StudySummary { rows: vec![] }, &[], dir1.path()).is_err());
}

#[test]
fn study_file_expands() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/study.toml");
    let study = StudyConfig::load(path).unwrap();
    let exps = study.experiments().unwrap();
    assert_eq!(exps.len(), 20);
    let g1 = exps.iter().find(|e| e.label == "g1").unwrap();
    assert_eq!(g1.model, catalog::by_name::<f64>("g1").unwrap());
    assert_eq!(g1.reference_range, 0.05);
    assert!(g1.range_grid.is_none());
    let s1 = &exps[0];
    assert_eq!(s1.model, catalog::by_name::<f64>("s1").unwrap());
    assert_eq!(s1.range_grid.as_ref().map(Vec::len), Some(13));
    let seeds: std::collections::HashSet<u64> = exps.iter().map(|e| e.master_seed).collect();
    assert_eq!(seeds.len(), exps.len());
    assert!(StudyConfig::parse("replications = 1\nwindows = [1.0]\nmultipliers = [1.0]\nbogus = 1\nmodels = []").is_err());
}

#[test]
fn poisson_empty_space_tables() {
    let beta = 200.0;
    let r = 0.05;
    let design = EmptySpaceDesign::for_radius(r);
    let w = Window2::cube(2.0).unwrap();
    let settings = SamplerSettings { direct_poisson: true, ..SamplerSettings::default() };
    let est = estimate_empty_space(&Model::poisson(beta, r).unwrap(), &w, &settings, 40, &design, 3).unwrap();
    let exact = poisson_empty_space::<2>(beta, &design).unwrap();
    let sup = est.f_hat.iter().zip(&exact.f_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(sup <= 0.02, "sup-norm {sup}");
    assert!(est.f_hat.windows(2).all(|p| p[0] <= p[1]));
    // The Monte-Carlo lattice spacing is adjusted to tile the window, so the
    // displacements agree only up to rounding.
    assert_eq!(est.displacements.len(), exact.displacements.len());
    for (a, b) in est.displacements.iter().zip(&exact.displacements) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
    for (a, b) in est.pair_empty.iter().zip(&exact.pair_empty) {
        assert!((a - b).abs() <= 0.02, "{a} vs {b}");
    }
    let s_mc = sigma2_theoretical(beta, &est).unwrap();
    let s_exact = sigma2_theoretical(beta, &exact).unwrap();
    assert!((s_mc / s_exact - 1.0).abs() < 0.1, "{s_mc} vs {s_exact}");
}

#[test]
fn analytic_plug_in_matches_closed_form() {
    for (beta, r) in [(200.0, 0.05), (50.0, 0.05), (200.0, 0.06)] {
        let ese = poisson_empty_space::<2>(beta, &EmptySpaceDesign::for_radius(r)).unwrap();
        let lattice = sigma2_theoretical(beta, &ese).unwrap();
        let closed = poisson_sigma2_planar(beta, r);
        assert!((lattice / closed - 1.0).abs() < 0.02, "{lattice} vs {closed}");
    }
}

#[test]
fn coincident_balls_under_hard_core() {
    let m = catalog::by_name::<f64>("shc1").unwrap();
    let w = Window2::cube(1.0).unwrap();
    let settings = SamplerSettings { steps_per_volume: 20_000.0, ..SamplerSettings::default() };
    let patterns: Vec<_> = (0..4).map(|s| simulate(&m, &w, &settings, s).unwrap()).collect();
    let design = EmptySpaceDesign { radii: vec![0.01], pair_radius: 0.01, spacing: 0.002, stride: 2 };
    let est = empty_space_from_patterns(&patterns, &w, &design).unwrap();
    let zero = est.displacements.iter().position(|v| *v == [0.0, 0.0]).unwrap();
    assert_eq!(est.pair_empty[zero], est.empty_prob);
    assert_eq!(est.empty_prob, 1.0 - est.f_hat[0]);
}

#[test]
fn coverage_study_on_poisson() {
    let mut cfg = quick("poisson", Model::poisson(200.0, 0.05).unwrap(), 1.0, 60);
    cfg.sampler.direct_poisson = true;
    let c = run_coverage_study::<2>(&cfg, 0.05).unwrap();
    assert_eq!((c.replications, c.successes), (60, 60));
    let rate = c.coverage_rate.unwrap();
    assert!(rate > 0.8, "{rate}");
}
