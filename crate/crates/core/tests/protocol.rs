use oam_qkd::channel::{ChannelElement, ChannelSpec, EveMode};
use oam_qkd::devices::DeviceConfig;
use oam_qkd::modecalc::BeamGeometry;
use oam_qkd::protocol::{run_session, SessionConfig};

fn session(d: usize, photons: u64, seed: u64) -> SessionConfig {
    SessionConfig {
        d,
        num_mubs: 2,
        oam_sector: 0,
        photons,
        channel: ChannelSpec::default(),
        test_fraction: 0.1,
        qber_abort_threshold: 0.11,
        emission_rate: 1.0e6,
        seed,
        device: DeviceConfig::new(d, BeamGeometry::new(1.0e7, 1.0).unwrap()),
        threads: 1,
    }
}

#[test]
fn noiseless_key_rate() {
    let n = 100_000u64;
    let (stats, _) = run_session(&session(4, n, 1)).unwrap();
    assert_eq!(stats.qber_estimate, 0.0);
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((stats.sifted_count as f64 - n as f64 / 2.0).abs() < 5.0 * sigma);
    // (1 - test_fraction) * N/2 * log2 d, up to sampling noise
    let expected = 0.9 * n as f64 / 2.0 * 2.0;
    assert!((stats.key_bits - expected).abs() < 0.02 * expected);
}

#[test]
fn wrong_basis_outcomes_are_uniform() {
    let d = 8;
    let (_, recs) = run_session(&session(d, 40_000, 2)).unwrap();
    let mut counts = vec![0u64; d];
    for r in recs.iter().filter(|r| r.delivered && r.alice_basis != r.bob_basis) {
        counts[r.bob_outcome.unwrap()] += 1;
    }
    let total: u64 = counts.iter().sum();
    assert!(total >= 10_000);
    let expected = total as f64 / d as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (d - 1) as f64;
    assert!((chi2 - dof) / (2.0 * dof).sqrt() < 5.0, "chi2 = {chi2}");
}

#[test]
fn every_eve_strategy_is_detected() {
    for mode in [EveMode::RandomBasis, EveMode::FixedBasis(0), EveMode::FixedBasis(1)] {
        let mut cfg = session(4, 20_000, 3);
        cfg.channel = ChannelSpec::new(vec![ChannelElement::Eve(mode)]);
        cfg.test_fraction = 0.5;
        let (stats, _) = run_session(&cfg).unwrap();
        assert!(stats.qber_estimate > 0.1, "{mode}: qber {}", stats.qber_estimate);
        assert!(stats.aborted);
    }
}

#[test]
fn eve_random_d4_aborts_at_default_threshold() {
    let mut cfg = session(4, 100_000, 8);
    cfg.channel = ChannelSpec::new(vec![ChannelElement::Eve(EveMode::RandomBasis)]);
    let (stats, _) = run_session(&cfg).unwrap();
    let n = stats.sacrificed_count as f64;
    let sigma = (0.375 * 0.625 / n).sqrt();
    assert!((stats.qber_estimate - 0.375).abs() < 3.0 * sigma);
    assert!(stats.aborted);
}

#[test]
fn loss_drops_rounds_before_sifting() {
    let mut cfg = session(2, 50_000, 4);
    cfg.channel = ChannelSpec::new(vec![ChannelElement::Loss { probability: 0.3 }]);
    let (stats, recs) = run_session(&cfg).unwrap();
    let sigma = (50_000.0f64 * 0.3 * 0.7).sqrt();
    assert!((stats.delivered as f64 - 35_000.0).abs() < 5.0 * sigma);
    assert!(recs.iter().all(|r| r.delivered == r.bob_outcome.is_some()));
    assert!(recs.iter().filter(|r| r.sifted).all(|r| r.delivered && r.alice_basis == r.bob_basis));
    assert!(recs.iter().filter(|r| r.sacrificed).all(|r| r.sifted));
    assert_eq!(stats.qber_estimate, 0.0);
    let kept = recs.iter().filter(|r| r.sifted && !r.sacrificed).count() as f64;
    assert_eq!(stats.key_bits, kept);
}

#[test]
fn identical_configs_identical_results() {
    let mut cfg = session(8, 5_000, 6);
    cfg.channel = ChannelSpec::new(vec![
        ChannelElement::TimeVaryingRotation { angular_velocity: 3.0 },
        ChannelElement::Loss { probability: 0.1 },
        ChannelElement::Eve(EveMode::RandomBasis),
    ]);
    let (s0, r0) = run_session(&cfg).unwrap();
    let (s1, r1) = run_session(&cfg).unwrap();
    assert_eq!(r0, r1);
    assert_eq!(s0.without_wall_clock(), s1.without_wall_clock());
    cfg.seed = 7;
    let (_, r2) = run_session(&cfg).unwrap();
    assert_ne!(r0, r2);
}

#[test]
fn detuning_is_visible_only_when_nonzero() {
    let mut cfg = session(4, 20_000, 9);
    cfg.oam_sector = 2;
    cfg.channel = ChannelSpec::new(vec![ChannelElement::FrequencyShift { angular_velocity: 40.0 }]);
    let (stats, _) = run_session(&cfg).unwrap();
    assert_eq!(stats.qber_estimate, 0.0);
    cfg.device.detuning_epsilon = 0.6;
    let (stats, recs) = run_session(&cfg).unwrap();
    assert!(stats.qber_estimate > 0.0);
    // only Fourier-basis rounds see the detuning
    assert!(recs.iter().filter(|r| r.sifted && r.alice_basis == 0).all(|r| !r.is_error()));
}

#[test]
fn gouy_without_compensation_breaks_b2_only() {
    let mut cfg = session(4, 20_000, 10);
    cfg.channel = ChannelSpec::new(vec![ChannelElement::Gouy { z: 0.3 }]);
    let (_, recs) = run_session(&cfg).unwrap();
    assert!(recs.iter().filter(|r| r.sifted && r.alice_basis == 0).all(|r| !r.is_error()));
    assert!(recs.iter().any(|r| r.sifted && r.alice_basis == 1 && r.is_error()));
    cfg.device.compensate_gouy = true;
    cfg.device.propagation_z = 0.3;
    let (_, recs) = run_session(&cfg).unwrap();
    assert!(recs.iter().filter(|r| r.sifted).all(|r| !r.is_error()));
}
