//! Property tests for the structural invariants.

use irrm_core::model::{CouplingMode, EbKind, IrrmModel, ModelConfig};
use irrm_core::wavelet;
use irrm_core::{Shape, Tensor};
use proptest::prelude::*;

fn tensor_strategy() -> impl Strategy<Value = Tensor<f32>> {
    (1usize..3, 1usize..4, 1usize..9, 1usize..9).prop_flat_map(|(n, c, h2, w2)| {
        let shape = Shape::new(n, c, 2 * h2, 2 * w2);
        proptest::collection::vec(-2.0f32..2.0, shape.numel())
            .prop_map(move |data| Tensor::from_vec(shape, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn haar_reconstruction_is_exact(x in tensor_strategy()) {
        let bands = wavelet::haar_forward(&x).unwrap();
        let back = wavelet::haar_inverse(&bands).unwrap();
        prop_assert!(x.max_abs_diff(&back) < 1e-6);
    }

    #[test]
    fn haar_conserves_energy(x in tensor_strategy()) {
        let bands = wavelet::haar_forward(&x).unwrap();
        let lhs = x.sum_sq();
        let rhs = bands.low.sum_sq() + bands.high.sum_sq();
        prop_assert!((lhs - rhs).abs() <= 1e-5 * lhs.max(1.0));
    }

    #[test]
    fn residual_pair_inverts_arbitrary_tensors(x in tensor_strategy()) {
        let (base, high) = wavelet::residual_decompose(&x).unwrap();
        let back = wavelet::residual_recompose(&base, &high).unwrap();
        prop_assert!(x.max_abs_diff(&back) < 1e-6);
    }

    #[test]
    fn upsample_then_average_is_identity(x in tensor_strategy()) {
        let roundtrip = x.nearest_up2().avg_pool2().unwrap();
        prop_assert!(roundtrip.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn element_count_is_conserved(seed in 0u64..50, h2 in 1usize..5, w2 in 1usize..5) {
        let cfg = ModelConfig {
            irbs_per_rdm: 1,
            hidden: 4,
            eb_kind: if seed % 2 == 0 { EbKind::Rb } else { EbKind::RbPlus },
            coupling: if seed % 3 == 0 {
                CouplingMode::SharedScaleShift
            } else {
                CouplingMode::ThreeBlock
            },
            long_skip: seed % 5 != 0,
            ..ModelConfig::preset_s(4)
        };
        let m = IrrmModel::init(cfg, seed).unwrap();
        let shape = Shape::new(1, 3, 8 * h2, 8 * w2);
        let x = Tensor::<f32>::full(shape, 0.5);
        let (y, z) = m.forward(&x).unwrap();
        prop_assert_eq!(y.numel() + z.numel(), x.numel());
    }
}
