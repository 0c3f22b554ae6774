mod common;

use common::*;
use mda_core::alignment::fit;
use mda_core::error::Error;
use mda_core::features::{load_binary, make_task, normalize};
use mda_core::harness::{run_method, run_suite, run_task, Dataset, HarnessConfig, Method, SuiteSpec};

fn quick_config() -> HarnessConfig {
    let mut cfg = HarnessConfig::default();
    cfg.alignment.iterations = 3;
    cfg.subspace_dim = 4;
    cfg
}

#[test]
fn nearest_neighbour_on_identical_domains_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    let spec = SuiteSpec::new(Dataset::Office31, dir.path(), quick_config());
    let out = run_task(&spec, "A", "W", Method::Source1nn).unwrap();
    assert_eq!(out.accuracy, 1.0);
    assert!(out.diagnostics.is_none());
}

#[test]
fn run_task_matches_direct_library_call() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    let cfg = quick_config();
    let spec = SuiteSpec::new(Dataset::Office31, dir.path(), cfg.clone());
    let via_harness = run_task(&spec, "A", "D", Method::Mda).unwrap();

    let root = dir.path().join("office31");
    let src = normalize(&load_binary(root.join("A.mdaf")).unwrap(), cfg.normalize);
    let tgt = normalize(&load_binary(root.join("D.mdaf")).unwrap(), cfg.normalize);
    let truth = tgt.labels().unwrap().to_vec();
    let model = fit(&make_task(src, tgt).unwrap(), &cfg.alignment).unwrap();
    assert_eq!(via_harness.accuracy, accuracy(model.target_labels(), &truth));
    assert_eq!(via_harness.diagnostics.as_ref(), Some(model.diagnostics()));
}

#[test]
fn suite_is_deterministic_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    let spec = SuiteSpec::new(Dataset::Office31, dir.path(), quick_config());
    let first = run_suite(&spec, 1).unwrap().to_csv();
    let second = run_suite(&spec, 1).unwrap().to_csv();
    let parallel = run_suite(&spec, 3).unwrap().to_csv();
    assert_eq!(first, second);
    assert_eq!(first, parallel);
    assert!(first.starts_with("method,A->W,A->D,W->A,W->D,D->A,D->W,average\n"));
    assert_eq!(first.lines().count(), 1 + Method::ALL.len());
}

#[test]
fn tasks_do_not_influence_each_other() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    let mut spec = SuiteSpec::new(Dataset::Office31, dir.path(), quick_config());
    let full = run_suite(&spec, 1).unwrap();
    spec.tasks = vec![("D".into(), "W".into())];
    let single = run_suite(&spec, 1).unwrap();
    for m in 0..full.methods.len() {
        assert_eq!(full.accuracies[m][5], single.accuracies[m][0]);
    }
}

#[test]
fn missing_features_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    std::fs::remove_file(dir.path().join("office31/D.mdaf")).unwrap();
    let spec = SuiteSpec::new(Dataset::Office31, dir.path(), quick_config());
    match run_suite(&spec, 1) {
        Err(Error::MissingFiles(paths)) => {
            assert_eq!(paths, vec![dir.path().join("office31/D.mdaf")]);
        }
        other => panic!("expected missing files, got {other:?}"),
    }
    assert!(matches!(
        run_task(&spec, "A", "D", Method::Mda),
        Err(Error::MissingFiles(_))
    ));
}

#[test]
fn baselines_run_on_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    write_office31_fixtures(dir.path());
    let spec = SuiteSpec::new(Dataset::Office31, dir.path(), quick_config());
    let task = spec.load_task("A", "D").unwrap();
    for m in [Method::SrmOnly, Method::MedaIr] {
        let out = run_method(&task, m, &spec.config).unwrap();
        assert!((0.0..=1.0).contains(&out.accuracy));
        assert_eq!(out.confusion.len(), 31);
    }
    let srm = run_method(&task, Method::SrmOnly, &spec.config).unwrap();
    let diag = srm.diagnostics.unwrap();
    assert_eq!(diag.len(), 1);
    assert_eq!(diag[0].mu, 0.5);
}
