//! Experiment harness: reproducibility, replicate independence, output format.

use cfn_core::harness::{
    self, ExperimentConfig, ExperimentId, ExperimentOutput, HospitalKnobs, Knobs, LinearGaussianKnobs,
    PerturbationKnobs, SelectionBiasKnobs,
};

/// Small versions of every experiment so each run takes well under a second.
fn small(id: ExperimentId, seed: u64, replicates: usize) -> ExperimentConfig {
    let hospital = HospitalKnobs { source_samples: 400, train_samples: 300, target_samples: 200 };
    let knobs = match id {
        ExperimentId::LinearGaussian => {
            Knobs::LinearGaussian(LinearGaussianKnobs { grid_points: 11, samples: 2_000, ..Default::default() })
        }
        ExperimentId::CrossHospital => Knobs::CrossHospital(hospital),
        ExperimentId::Perturbation => {
            Knobs::Perturbation(PerturbationKnobs { hospital, sigma_step: 0.25, sigma_points: 4 })
        }
        ExperimentId::SelectionBias => {
            Knobs::SelectionBias(SelectionBiasKnobs { population: 3_000, ..Default::default() })
        }
    };
    ExperimentConfig::new(id, seed, "unused").with_replicates(replicates).with_knobs(knobs)
}

fn csv_texts(config: &ExperimentConfig, output: &ExperimentOutput) -> Vec<String> {
    output.tables().iter().map(|t| t.to_csv(config).unwrap()).collect()
}

#[test]
fn reruns_produce_identical_bytes_and_seeds_matter() {
    for id in ExperimentId::ALL {
        let config = small(id, 17, 3);
        let a = csv_texts(&config, &harness::run(&config).unwrap());
        let b = csv_texts(&config, &harness::run(&config).unwrap());
        assert_eq!(a, b, "{id} is not reproducible");
        let other = small(id, 18, 3);
        let c = csv_texts(&other, &harness::run(&other).unwrap());
        assert_ne!(a, c, "{id} ignores its seed");
    }
}

#[test]
fn replicates_do_not_depend_on_how_many_run() {
    let two = harness::run(&small(ExperimentId::SelectionBias, 5, 2)).unwrap();
    let five = harness::run(&small(ExperimentId::SelectionBias, 5, 5)).unwrap();
    let (ExperimentOutput::SelectionBias(two), ExperimentOutput::SelectionBias(five)) = (two, five) else {
        panic!("wrong output kind");
    };
    let first_two: Vec<_> = five.rows.iter().filter(|r| r.replicate < 2).cloned().collect();
    assert_eq!(two.rows, first_two);
}

#[test]
fn written_tables_carry_a_provenance_comment() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(ExperimentId::CrossHospital, 3, 2);
    config.out_dir = dir.path().join("nested");
    let (_, paths) = harness::run_and_write(&config).unwrap();
    assert_eq!(paths.len(), 6);
    for p in &paths {
        let text = std::fs::read_to_string(p).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# experiment=cross-hospital seed=3 replicates=2 config="), "{first}");
        assert!(first.contains(&config.hash()));
        let header = text.lines().nth(1).unwrap();
        assert!(!header.starts_with('#'));
        // Every data row has as many fields as the header.
        let width = header.split(',').count();
        assert!(text.lines().skip(2).all(|l| l.split(',').count() == width), "{}", p.display());
    }
}

#[test]
fn experiment_rows_are_complete() {
    let config = small(ExperimentId::Perturbation, 9, 2);
    let ExperimentOutput::Perturbation(p) = harness::run(&config).unwrap() else {
        panic!("wrong output kind");
    };
    assert_eq!(p.rows.len(), 2 * 4 * 2);
    // Perturbation noise of scale sigma gives a counterfactual error near sigma².
    for r in &p.rows {
        assert!((r.counterfactual_mse / (r.sigma * r.sigma) - 1.0).abs() < 0.2, "{r:?}");
    }

    let config = small(ExperimentId::LinearGaussian, 9, 2);
    let ExperimentOutput::LinearGaussian(lg) = harness::run(&config).unwrap() else {
        panic!("wrong output kind");
    };
    assert_eq!(lg.rows.len(), 2 * 11 * 3);
    assert_eq!(lg.weights.len(), 2);
}

#[test]
fn invalid_configurations_are_validation_faults() {
    let zero = small(ExperimentId::CrossHospital, 1, 0);
    assert!(harness::run(&zero).unwrap_err().is_validation());
    let empty = small(ExperimentId::Perturbation, 1, 1)
        .with_knobs(Knobs::Perturbation(PerturbationKnobs { sigma_points: 0, ..Default::default() }));
    assert!(harness::run(&empty).unwrap_err().is_validation());
}
