use dpglm::data::{meta_path, write_dataset};
use dpglm::instances::{generate, InstanceSpec, LipschitzHardSpec, RegressionSpec, SmoothHardSpec};
use dpglm::Dataset;
use proptest::prelude::*;

fn specs() -> Vec<InstanceSpec> {
    vec![
        InstanceSpec::Regression(RegressionSpec {
            d: 10,
            n: 100,
            w_star_norm: 1.0,
            noise_std: 0.1,
            x_bound: 1.0,
            rank: None,
        }),
        InstanceSpec::Regression(RegressionSpec {
            d: 12,
            n: 80,
            w_star_norm: 2.0,
            noise_std: 0.5,
            x_bound: 2.0,
            rank: Some(4),
        }),
        InstanceSpec::SmoothHard(SmoothHardSpec {
            n: 64,
            d: 9,
            d_prime: 8,
            p_mass: 0.75,
            b_bias: 0.3,
            signs: vec![],
            y_bound: 1.0,
            x_bound: 1.0,
            dummy: true,
            dummy_c: None,
        }),
        InstanceSpec::LipschitzHard(LipschitzHardSpec {
            n: 200,
            d: 6,
            d_prime: 4,
            alpha_mass: 0.5,
            beta_shape: 1.0 / 16.0,
            radius: 1.0,
            p_norm: 2.0,
            x_bound: 1.0,
        }),
    ]
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (i, spec) in specs().iter().enumerate() {
        let inst = generate(spec, 42).unwrap();
        let path = dir.path().join(format!("{i}.csv"));
        write_dataset(&path, &inst.dataset, &inst.meta).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), spec.n());
        assert!(text.lines().all(|l| l.split(',').count() == spec.d() + 1));
        let (back, meta) = Dataset::read(&path).unwrap();
        assert_eq!(back, inst.dataset);
        assert_eq!(meta, inst.meta);
        assert_eq!(meta.generator, spec.kind());
        assert!(meta.rank.is_some());
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for spec in specs() {
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_dataset(
            &a,
            &generate(&spec, 7).unwrap().dataset,
            &generate(&spec, 7).unwrap().meta,
        )
        .unwrap();
        write_dataset(
            &b,
            &generate(&spec, 7).unwrap().dataset,
            &generate(&spec, 7).unwrap().meta,
        )
        .unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(
            std::fs::read(meta_path(&a)).unwrap(),
            std::fs::read(meta_path(&b)).unwrap()
        );
    }
}

#[test]
fn smooth_hard_metadata_records_realized_bias() {
    let inst = generate(&specs()[2], 0).unwrap();
    let b = inst.meta.params["realized_b"].as_f64().unwrap();
    // 63 packing rows over 8 coordinates: 5 points each, 4 positive.
    assert!((b - 0.6).abs() < 1e-15);
    assert_eq!(inst.meta.params["dummy_c"].as_f64(), Some(1e-6));
    assert_eq!(inst.meta.rank, Some(9));
}

#[test]
fn comparator_has_zero_excess() {
    for spec in specs() {
        let inst = generate(&spec, 3).unwrap();
        let c = inst.oracle.comparator().to_vec();
        assert!(inst.oracle.excess_risk(&c).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn generators_respect_feature_bound(seed in any::<u64>(), d in 2usize..12, n in 20usize..120, x in 0.1f64..4.0) {
        let all = [
            InstanceSpec::Regression(RegressionSpec { d, n, w_star_norm: 1.0, noise_std: 0.3, x_bound: x, rank: Some(1 + d / 2) }),
            InstanceSpec::SmoothHard(SmoothHardSpec {
                n, d, d_prime: d - 1, p_mass: 1.0, b_bias: 0.5, signs: vec![], y_bound: 1.0, x_bound: x,
                dummy: true, dummy_c: None,
            }),
            InstanceSpec::LipschitzHard(LipschitzHardSpec {
                n, d, d_prime: d, alpha_mass: 0.7, beta_shape: 0.5, radius: 2.0, p_norm: 1.5, x_bound: x,
            }),
        ];
        for spec in all {
            let inst = generate(&spec, seed).unwrap();
            prop_assert!(inst.dataset.max_feature_norm() <= x * (1.0 + 1e-12));
            prop_assert!(inst.dataset.labels().iter().all(|y| y.abs() <= inst.dataset.y_bound()));
        }
    }
}
