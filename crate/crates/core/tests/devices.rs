use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oam_qkd::devices::{
    b1_probabilities, b2_probabilities, measure_b2, modal_convert, prepare_b1, prepare_b2, ConvertDirection,
    DeviceConfig,
};
use oam_qkd::modecalc::BeamGeometry;
use oam_qkd::qstate::{make_b1_state, make_b2_state, Basis, Frame, PureState};

fn cfg(d: usize) -> DeviceConfig {
    DeviceConfig::new(d, BeamGeometry::new(1.0e7, 1.0).unwrap())
}

#[test]
fn prepare_measure_round_trip() {
    for d in [2, 4, 8] {
        let c = cfg(d);
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        for k in 0..d {
            for _ in 0..20 {
                assert_eq!(measure_b2(&prepare_b2(d, k, &c).unwrap(), &c, &mut rng).unwrap(), k);
            }
            let p = b1_probabilities(&prepare_b1(d, k, &c).unwrap(), &c).unwrap();
            assert_eq!(p[k], 1.0);
        }
    }
}

#[test]
fn b2_chain_on_b1_input_is_uniform() {
    let c = cfg(4);
    for k in 0..4 {
        let p = b2_probabilities(&make_b1_state(4, k).unwrap(), &c).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }
    let p = b1_probabilities(&make_b2_state(4, 2).unwrap(), &c).unwrap();
    assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-12));
}

proptest! {
    #[test]
    fn device_weights_equal_born_weights(
        d_exp in 1u32..4,
        raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        let d = 1usize << d_exp;
        let amps: Vec<Complex64> = raw[..d].iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
        let s = PureState::normalized(amps, 0, Frame::HgSide).unwrap();
        let c = cfg(d);
        let born1 = Basis::computational(d).probabilities(&s).unwrap();
        let born2 = oam_qkd::qstate::fourier_unitary(d).probabilities(&s).unwrap();
        for (a, b) in b1_probabilities(&s, &c).unwrap().iter().zip(&born1) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in b2_probabilities(&s, &c).unwrap().iter().zip(&born2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn converter_round_trip(k in 0usize..8, l in -4i32..5) {
        let s = make_b2_state(8, k).unwrap().with_sector(l);
        let there = modal_convert(&s, ConvertDirection::HgToLg).unwrap();
        let back = modal_convert(&there, ConvertDirection::LgToHg).unwrap();
        prop_assert_eq!(back, s);
    }
}
