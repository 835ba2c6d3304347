use super::*;

use rand::Rng;

use crate::sensing::{build_matrix, MatrixScheme};
use crate::signals::{Signal, Source, SourceStats, Split};

// tiny end-to-end shapes keep the finite-difference checks fast
const TINY_M: usize = 6;
const TINY_N: usize = 10;

fn tiny_arch() -> VaeArchitecture {
    VaeArchitecture {
        input_dim: TINY_M,
        encoder_hidden: 8,
        latent_dim: 3,
        decoder_hidden: 8,
        output_dim: TINY_N,
    }
}

fn tiny_matrix(seed: u64) -> MeasurementMatrix {
    build_matrix(&MatrixDesign::gaussian(
        MatrixScheme::UnitVarianceBaseline,
        TINY_M,
        TINY_N,
        1.0,
        3.0,
        SourceStats {
            mu_x: 0.0,
            sigma_x: 0.5,
        },
        seed,
    ))
    .unwrap()
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn tiny_dataset(frames: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let frames = (0..frames)
        .map(|_| Signal::new(random_vec(TINY_N, &mut rng)).unwrap())
        .collect();
    Dataset::from_frames(frames, Split::Train, Source::Synthetic).unwrap()
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let matrix = tiny_matrix(3);
    let model = init_model(&tiny_arch(), 5).unwrap();
    let mut rng = seeded_rng(7);
    let y = random_vec(TINY_M, &mut rng);
    let noise = standard_normal_vec(3, &mut rng);
    let lambda = 1e-3;
    let beta = 0.7;

    let rel = gradient_check(&model, &y, &matrix, lambda, beta, &noise, 1e-5).unwrap();
    assert!(rel < 1e-4, "relative error {rel}");
}

#[test]
fn latent_gradient_matches_finite_differences() {
    let matrix = tiny_matrix(11);
    let model = init_model(&tiny_arch(), 13).unwrap();
    let mut rng = seeded_rng(17);
    let y = random_vec(TINY_M, &mut rng);
    let z = standard_normal_vec(3, &mut rng);
    let lambda = 1e-3;

    let (_, grad) = latent_objective(&model, &z, &y, Some(&matrix), lambda).unwrap();
    let step = 1e-6;
    for i in 0..3 {
        let probe = |delta: f64| {
            let mut zp = z.clone();
            zp[i] += delta;
            latent_objective(&model, &zp, &y, Some(&matrix), lambda)
                .unwrap()
                .0
        };
        let numeric = (probe(step) - probe(-step)) / (2.0 * step);
        assert!(
            (numeric - grad[i]).abs() <= 1e-5 * (1.0 + numeric.abs()),
            "coordinate {i}: {numeric} vs {}",
            grad[i]
        );
    }
}

#[test]
fn reparameterization_is_mean_plus_scaled_noise() {
    let model = init_model(&tiny_arch(), 1).unwrap();
    let mut rng = seeded_rng(2);
    let y = random_vec(TINY_M, &mut rng);
    let noise = standard_normal_vec(3, &mut rng);
    let s = encode_with_noise(&model, &y, noise.clone()).unwrap();
    for i in 0..3 {
        let expected = s.mean[i] + (s.log_var[i] / 2.0).exp() * noise[i];
        assert!((s.z[i] - expected).abs() < 1e-15);
    }
    // zero noise collapses to the mean
    let s0 = encode_with_noise(&model, &y, vec![0.0; 3]).unwrap();
    assert_eq!(s0.z, s0.mean);
}

#[test]
fn kl_is_nonnegative_and_zero_at_standard_normal() {
    assert_eq!(kl_divergence(&[0.0; 4], &[0.0; 4]), 0.0);
    let mut rng = seeded_rng(3);
    for _ in 0..100 {
        let mean = random_vec(5, &mut rng);
        let log_var: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
        assert!(kl_divergence(&mean, &log_var) >= 0.0);
    }
}

#[test]
fn decoder_output_stays_in_open_unit_interval() {
    let model = init_model(&tiny_arch(), 4).unwrap();
    let mut rng = seeded_rng(5);
    for _ in 0..20 {
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let g = decode(&model, &z).unwrap();
        assert_eq!(g.len(), TINY_N);
        assert!(g.iter().all(|v| v.abs() < 1.0));
    }
    // far-out latents saturate but never exceed the activation bound
    for _ in 0..20 {
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let g = decode(&model, &z).unwrap();
        assert!(g.iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn log_var_is_clamped() {
    let mut model = init_model(&tiny_arch(), 6).unwrap();
    // drive the log-var head far positive via its bias
    model.enc_lv.b.iter_mut().for_each(|b| *b = 1e3);
    let s = encode_with_noise(&model, &vec![0.1; TINY_M], vec![0.0; 3]).unwrap();
    assert!(s.log_var.iter().all(|&v| v == LOG_VAR_CLAMP));
}

#[test]
fn init_is_seeded_and_in_fan_in_bounds() {
    let a = init_model(&tiny_arch(), 9).unwrap();
    let b = init_model(&tiny_arch(), 9).unwrap();
    let c = init_model(&tiny_arch(), 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let bound = 1.0 / (TINY_M as f64).sqrt();
    assert!(a.enc1.w.iter().all(|v| v.abs() < bound));
    assert!(a.enc1.b.iter().all(|&v| v == 0.0));
}

#[test]
fn training_runs_reduce_the_loss_and_are_deterministic() {
    let matrix = tiny_matrix(21);
    let dataset = tiny_dataset(40, 22);
    let channel = ChannelConfig::new(0.01, 23).unwrap();
    let config = TrainConfig {
        epochs: 30,
        batch_size: 10,
        optimizer: AdamConfig {
            learning_rate: 5e-3,
            ..Default::default()
        },
        lambda_l1: 1e-5,
        beta_kl: 0.1,
        seed: 24,
    };
    let init = init_model(&tiny_arch(), 25).unwrap();
    let trained = train(init.clone(), &dataset, &matrix, &channel, &config).unwrap();
    let trace = trained.training_trace();
    assert_eq!(trace.len(), config.epochs);
    assert!(
        trace[config.epochs - 1] < trace[0] * 0.9,
        "loss did not drop: {} -> {}",
        trace[0],
        trace[config.epochs - 1]
    );
    assert_eq!(trained.bound_design(), Some(matrix.design()));

    let again = train(init, &dataset, &matrix, &channel, &config).unwrap();
    assert_eq!(trained, again);
}

#[test]
fn train_rejects_mismatched_dimensions() {
    let matrix = tiny_matrix(31);
    let dataset = tiny_dataset(8, 32);
    let channel = ChannelConfig::new(0.01, 33).unwrap();
    let bad_arch = VaeArchitecture {
        input_dim: TINY_M + 1,
        ..tiny_arch()
    };
    let model = init_model(&bad_arch, 34).unwrap();
    assert!(matches!(
        train(model, &dataset, &matrix, &channel, &TrainConfig::default()),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn absurd_learning_rate_reports_divergence() {
    let matrix = tiny_matrix(41);
    let dataset = tiny_dataset(12, 42);
    let channel = ChannelConfig::new(0.01, 43).unwrap();
    let config = TrainConfig {
        epochs: 4,
        batch_size: 4,
        optimizer: AdamConfig {
            // one step throws every parameter to ~1e200; the next forward
            // pass overflows
            learning_rate: 1e200,
            ..Default::default()
        },
        ..Default::default()
    };
    let model = init_model(&tiny_arch(), 44).unwrap();
    assert!(matches!(
        train(model, &dataset, &matrix, &channel, &config),
        Err(Error::Diverged { .. })
    ));
}

#[test]
fn checkpoint_round_trip_preserves_inference() {
    let matrix = tiny_matrix(51);
    let dataset = tiny_dataset(20, 52);
    let channel = ChannelConfig::new(0.01, 53).unwrap();
    let config = TrainConfig {
        epochs: 3,
        batch_size: 5,
        seed: 54,
        ..Default::default()
    };
    let trained = train(
        init_model(&tiny_arch(), 55).unwrap(),
        &dataset,
        &matrix,
        &channel,
        &config,
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    trained.save(&path).unwrap();
    let loaded = VaeModel::load(&path).unwrap();
    assert_eq!(trained, loaded);

    let mut rng = seeded_rng(56);
    let y = random_vec(TINY_M, &mut rng);
    assert_eq!(
        reconstruct(&trained, &y).unwrap(),
        reconstruct(&loaded, &y).unwrap()
    );
}

#[test]
fn reconstruct_uses_the_posterior_mean() {
    let model = init_model(&tiny_arch(), 61).unwrap();
    let mut rng = seeded_rng(62);
    let y = random_vec(TINY_M, &mut rng);
    let s = encode_with_noise(&model, &y, vec![0.0; 3]).unwrap();
    assert_eq!(
        reconstruct(&model, &y).unwrap(),
        decode(&model, &s.mean).unwrap()
    );
}

#[test]
fn latent_opt_never_worsens_with_more_steps() {
    let matrix = tiny_matrix(71);
    let model = init_model(&tiny_arch(), 72).unwrap();
    let mut rng = seeded_rng(73);
    let y = random_vec(TINY_M, &mut rng);
    let base = LatentOptConfig {
        restarts: 2,
        steps: 0,
        seed: 74,
        ..Default::default()
    };
    let start = reconstruct_via_latent_opt(&model, &y, &matrix, &base).unwrap();
    let refined = reconstruct_via_latent_opt(
        &model,
        &y,
        &matrix,
        &LatentOptConfig {
            steps: 100,
            ..base
        },
    )
    .unwrap();
    assert!(refined.best_objective <= start.best_objective);
    assert!(refined.best_objective.is_finite());
    assert!(refined.x_hat.iter().all(|v| v.abs() < 1.0));
}

#[test]
fn representation_error_of_a_decoded_point_is_small() {
    let model = init_model(&tiny_arch(), 81).unwrap();
    let mut rng = seeded_rng(82);
    let z: Vec<f64> = standard_normal_vec(3, &mut rng);
    let target = decode(&model, &z).unwrap();
    // the target is exactly representable, so descent should get close
    let err = representation_error(
        &model,
        &target,
        &LatentOptConfig {
            restarts: 5,
            steps: 400,
            learning_rate: 0.1,
            lambda_l1: 0.0,
            seed: 83,
        },
    )
    .unwrap();
    assert!(err < 0.05, "representation error {err}");
}

#[test]
fn bound_diagnostic_compares_both_sides() {
    let d = bound_diagnostic(&[0.0, 0.0], &[3.0, 4.0], 0.5, 0.1, 0.2);
    assert!((d.lhs - 5.0).abs() < 1e-12);
    assert!((d.rhs - (6.0 * 0.1 + 3.0 * 0.5 + 2.0 * 0.2)).abs() < 1e-12);
    assert!(!d.holds);
    let tight = bound_diagnostic(&[0.0], &[0.1], 0.5, 0.1, 0.2);
    assert!(tight.holds);
}

#[test]
fn loss_parts_sum_to_total() {
    let matrix = tiny_matrix(91);
    let model = init_model(&tiny_arch(), 92).unwrap();
    let mut rng = seeded_rng(93);
    let y = random_vec(TINY_M, &mut rng);
    let s = encode(&model, &y, 94).unwrap();
    let parts = loss(&model, &y, &matrix, 1e-5, 1.0, &s).unwrap();
    assert!(
        (parts.total - (parts.recon + 1e-5 * parts.l1 + parts.kl)).abs() < 1e-12
    );
    assert!(parts.recon >= 0.0 && parts.l1 >= 0.0 && parts.kl >= 0.0);
}
