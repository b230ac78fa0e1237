mod common;

use std::collections::BTreeMap;
use std::path::Path;

use gmc_core::harness::{
    ablation_study, candidate_pairs, grid_candidates, grid_search, kernel_sweep, run_experiment,
    space_size, Dataset, ExperimentConfig, HarnessError,
};
use gmc_core::metrics::summarize;
use gmc_core::wcs::SybylPair;
use gmc_core::{KernelKind, TaskKind};

fn config(task: TaskKind, out: &Path) -> ExperimentConfig {
    let manifest = match task {
        TaskKind::Classification => "cls_manifest.csv",
        TaskKind::Regression => "reg_manifest.csv",
    };
    let mut c = ExperimentConfig {
        manifest: Some(common::fixtures().join(manifest)),
        mol2_dir: Some(common::mol2_dir()),
        train: common::tiny_config(task),
        ..Default::default()
    };
    c.train.epochs = 8;
    c.wcs.kappa = 2.0;
    // both classes land in test and val for these fixture seeds
    c.study.seeds = vec![3, 4, 8];
    c.study.out = out.to_path_buf();
    c
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walk(dir) {
        out.insert(
            e.strip_prefix(dir).unwrap().display().to_string(),
            std::fs::read(&e).unwrap(),
        );
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

#[test]
fn three_seed_run_reports_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(TaskKind::Classification, a.path())).unwrap();
    let auc = report.metric("auc").unwrap();
    assert_eq!(auc.seeds, vec![3, 4, 8]);
    assert!(auc.values.iter().all(|v| (0.0..=1.0).contains(v)));
    let s = auc.summary.as_ref().unwrap();
    assert_eq!(s, &summarize(&auc.values, 0.95).unwrap());

    let csv = std::fs::read_to_string(a.path().join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("auc,") && r.split(',').nth(1).unwrap().parse::<u64>().is_ok()).count(), 3);
    assert!(rows.iter().any(|r| r.starts_with("auc,mean,")));
    assert!(rows.iter().any(|r| r.starts_with("auc,ci_half,")));
    for seed in [3, 4, 8] {
        for f in [
            "split.csv",
            "history.csv",
            "test_predictions.csv",
            "model.gmcm",
        ] {
            assert!(
                a.path().join(format!("seed_{seed}/{f}")).is_file(),
                "seed {seed} {f}"
            );
        }
    }
    let manifest = std::fs::read_to_string(a.path().join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("config "));
    assert!(manifest.lines().any(|l| l.starts_with("input ")));
    assert!(manifest.contains("seed_8/model.gmcm"));

    let first = tree(a.path());
    run_experiment(&config(TaskKind::Classification, a.path())).unwrap();
    assert!(first == tree(a.path()), "rerun changed the artifacts");
}

#[test]
fn regression_run_reports_rmse_and_pearson() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Regression, out.path());
    c.study.seeds = vec![3, 4];
    let report = run_experiment(&c).unwrap();
    assert!(report
        .metric("rmse")
        .unwrap()
        .values
        .iter()
        .all(|v| *v >= 0.0));
    assert_eq!(report.metric("pearson").unwrap().seeds, vec![3, 4]);
}

#[test]
fn failed_seeds_are_skipped_not_fatal() {
    // seed 5 leaves the fixture test partition empty
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, out.path());
    c.study.seeds = vec![3, 5];
    let report = run_experiment(&c).unwrap();
    assert_eq!(
        report.failures.iter().map(|f| f.0).collect::<Vec<_>>(),
        vec![5]
    );
    assert_eq!(report.metric("auc").unwrap().seeds, vec![3]);
    assert!(report.metric("auc").unwrap().summary.is_none());
    let seeds = std::fs::read_to_string(out.path().join("seeds.csv")).unwrap();
    assert!(seeds.lines().any(|l| l.starts_with("5,failed,")));

    c.study.seeds = vec![5];
    assert!(matches!(
        run_experiment(&c),
        Err(HarnessError::AllSeedsFailed { seed: 5, .. })
    ));
}

#[test]
fn missing_inputs_fail_before_any_work() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, &out.path().join("run"));
    c.mol2_dir = Some(out.path().join("nowhere"));
    let t = std::time::Instant::now();
    match run_experiment(&c) {
        Err(HarnessError::MissingPath { path, .. }) => assert!(path.ends_with("nowhere")),
        other => panic!("{other:?}"),
    }
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert!(!out.path().join("run").exists());
}

#[test]
fn grid_budget_bounds_the_candidates() {
    let space: BTreeMap<String, Vec<String>> = [
        ("depth".to_string(), vec!["2".into(), "3".into()]),
        (
            "dropout".to_string(),
            vec!["0".into(), "0.1".into(), "0.2".into()],
        ),
    ]
    .into();
    assert_eq!(space_size(&space), 6);
    let one = grid_candidates(&space, 1, 4).unwrap();
    assert_eq!(one.len(), 1);
    let three = grid_candidates(&space, 3, 4).unwrap();
    assert_eq!(three.len(), 3);
    assert_eq!(three, grid_candidates(&space, 3, 4).unwrap());
    let all = grid_candidates(&space, 50, 4).unwrap();
    assert_eq!(all.len(), 6);
    for c in &three {
        assert!(all.contains(c));
    }
    assert!(matches!(
        grid_candidates(&BTreeMap::new(), 3, 0),
        Err(HarnessError::EmptySpace)
    ));
}

#[test]
fn grid_search_rejects_a_diverging_learning_rate() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, out.path());
    c.study
        .search
        .insert("max_lr".into(), vec!["1e3".into(), "1e-3".into()]);
    c.study.hpo_budget = 3;
    let data = Dataset::load(&c).unwrap();
    let result = grid_search(&c, &data).unwrap();
    assert_eq!(result.candidates.len(), 2);
    let wild = result
        .candidates
        .iter()
        .position(|c| c.settings["max_lr"] == "1e3")
        .unwrap();
    assert_ne!(result.best_index, wild);
    assert_eq!(result.best.train.max_lr, 1e-3);
    assert!(result.candidates[result.best_index].score.is_finite());
}

#[test]
fn sweep_covers_every_point() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, out.path());
    c.train.epochs = 3;
    let data = Dataset::load(&c).unwrap();
    let kinds = [KernelKind::Exponential, KernelKind::Lorentz];
    let r = kernel_sweep(&c, &data, &[0.5, 1.0], &[1.0, 2.0], &kinds).unwrap();
    assert_eq!(r.points.len(), 8);
    assert!(r.points.iter().all(|p| p.error.is_none()));
    let top = r
        .points
        .iter()
        .map(|p| p.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let w = r.points.iter().find(|p| p.score == top).unwrap();
    assert_eq!(
        (r.best.kernel, r.best.kappa, r.best.tau),
        (w.kernel, w.kappa, w.tau)
    );
    assert!(matches!(
        kernel_sweep(&c, &data, &[], &[1.0], &kinds),
        Err(HarnessError::EmptySpace)
    ));
}

#[test]
fn ablation_edge_cases() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, out.path());
    c.train.epochs = 4;
    c.study.seeds = vec![3, 4];
    let data = Dataset::load(&c).unwrap();

    let none = ablation_study(&c, &data, &[]).unwrap();
    assert!(none.results.is_empty());
    assert_eq!(none.baseline.len(), 2);

    // I and Si never share a molecule, so the mask removes nothing
    let absent = SybylPair::new("I", "Si").unwrap();
    let study = ablation_study(&c, &data, std::slice::from_ref(&absent)).unwrap();
    let r = &study.results[0];
    assert_eq!(r.frequency, 0);
    assert_eq!(r.delta, vec![0.0, 0.0]);

    let cl = SybylPair::new("C.3", "Cl").unwrap();
    let missing = Dataset::from_records(
        data.records
            .iter()
            .filter(|r| r.molecule.atoms.iter().all(|a| a.sybyl_type != "Cl"))
            .cloned()
            .collect(),
        &c,
    )
    .unwrap();
    assert!(
        matches!(ablation_study(&c, &missing, &[cl]), Err(HarnessError::UnknownSybylType(t)) if t == "Cl")
    );
}

#[test]
fn ablation_summary_matches_the_deltas() {
    let out = tempfile::tempdir().unwrap();
    let mut c = config(TaskKind::Classification, out.path());
    c.train.epochs = 4;
    let data = Dataset::load(&c).unwrap();
    let params = data.wcs_params(&c);
    let pairs: Vec<SybylPair> = candidate_pairs(&data, &params, 1)
        .into_iter()
        .take(2)
        .map(|p| p.0)
        .collect();
    assert_eq!(pairs.len(), 2);
    let study = ablation_study(&c, &data, &pairs).unwrap();
    let base: Vec<f64> = study
        .baseline
        .iter()
        .map(|(_, r)| *r.as_ref().unwrap())
        .collect();
    for r in &study.results {
        assert_eq!(r.seeds, vec![3, 4, 8]);
        assert_eq!(r.baseline, base);
        for i in 0..3 {
            assert_eq!(r.delta[i], r.ablated[i] - r.baseline[i]);
        }
        assert_eq!(
            r.summary.as_ref().unwrap(),
            &summarize(&r.delta, 0.95).unwrap()
        );
        assert!(r.frequency >= 1);
    }
}
