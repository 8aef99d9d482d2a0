//! Property-based invariants of the kinematics, assembly, and data
//! machinery.

use hyperfit::assembly::{assemble, Dataset, ModeBlock, Sample, Units};
use hyperfit::data::{apply_noise, generate_synthetic, truths, NoiseSpec};
use hyperfit::kinematics::{
    deformation_gradient, invariants, LoadingMode, ModeKind, StructuralFrame,
};
use hyperfit::library::{make_isotropic_library, stress_contribution, KinematicContext};
use proptest::prelude::*;

fn stretch() -> impl Strategy<Value = f64> {
    0.5f64..4.5
}

fn shear() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

proptest! {
    #[test]
    fn gradients_are_isochoric(l1 in stretch(), l2 in stretch(), g in shear()) {
        let cases: Vec<(ModeKind, Vec<f64>)> = vec![
            (ModeKind::Ut, vec![l1]),
            (ModeKind::Ps, vec![l1]),
            (ModeKind::Ebt, vec![l1]),
            (ModeKind::Bt, vec![l1, l2]),
            (ModeKind::AnisoBt, vec![l1, l2]),
            (ModeKind::Ss, vec![g]),
            (ModeKind::ShearFn, vec![g]),
            (ModeKind::ShearNs, vec![g]),
        ];
        for (kind, params) in cases {
            let f = deformation_gradient(kind, &params).unwrap();
            prop_assert!((f.det() - 1.0).abs() < 1e-12, "{kind:?} det {}", f.det());
        }
    }

    #[test]
    fn shear_invariants_match_closed_form(g in shear()) {
        for kind in [
            ModeKind::Ss,
            ModeKind::ShearFs,
            ModeKind::ShearSf,
            ModeKind::ShearFn,
            ModeKind::ShearNf,
            ModeKind::ShearSn,
            ModeKind::ShearNs,
        ] {
            let f = deformation_gradient(kind, &[g]).unwrap();
            let inv = invariants(&f, None).unwrap();
            prop_assert!((inv.i1 - (3.0 + g * g)).abs() < 1e-10);
            prop_assert!((inv.i2 - (3.0 + g * g)).abs() < 1e-10);
        }
    }

    #[test]
    fn stretch_sum_of_squares_equals_i1(l1 in stretch(), l2 in stretch()) {
        let f = deformation_gradient(ModeKind::Bt, &[l1, l2]).unwrap();
        let inv = invariants(&f, Some(&StructuralFrame::canonical())).unwrap();
        let sum: f64 = inv.stretches.iter().map(|s| s * s).sum();
        prop_assert!((sum - inv.i1).abs() < 1e-10);
        let a = inv.aniso.unwrap();
        prop_assert!((a.i4f + a.i4s + a.i4n - inv.i1).abs() < 1e-10);
    }

    #[test]
    fn standardization_round_trips(scale in 0.5f64..2000.0, seed in 0u64..64) {
        // A small neo-Hookean dataset at an arbitrary stress scale.
        let lib = make_isotropic_library(2, &[]).unwrap();
        let mode = LoadingMode::standard(ModeKind::Ut);
        let samples: Vec<Sample> = (0..10)
            .map(|i| {
                let l = 1.1 + 0.3 * i as f64;
                let ctx = KinematicContext::for_mode(ModeKind::Ut, &[l], None).unwrap();
                let s = stress_contribution(&lib, 0, &mode, &ctx, None).unwrap();
                let noise = hyperfit::rng::standard_normal(seed, i as u64);
                Sample {
                    params: vec![l],
                    values: vec![scale * (s[0] + 0.1 * noise)],
                }
            })
            .collect();
        let data = Dataset {
            blocks: vec![ModeBlock { mode, samples }],
            units: Units::Pa,
        };
        let sys = assemble(&data, &lib).unwrap();
        // De-standardizing every retained column reproduces the weighted
        // matrix to near machine precision.
        for (jj, &j) in sys.retained_cols.iter().enumerate() {
            for i in 0..sys.n_obs() {
                let back = sys.design[(i, jj)] * sys.col_std[j] + sys.col_mean[j];
                let want = sys.weighted_design[(i, j)];
                let tol = 1e-12 * want.abs().max(sys.col_std[j]);
                prop_assert!((back - want).abs() <= tol, "col {j} row {i}");
            }
        }
    }

    #[test]
    fn noise_streams_are_reproducible(seed in 0u64..1000, rel in 0.01f64..0.3) {
        let truth = truths::mr2();
        let modes = vec![LoadingMode::standard(ModeKind::Ut)];
        let spec = NoiseSpec { relative_std: rel, seed };
        let a = generate_synthetic(&truth, &modes, 12, (0.8, 3.0), &spec).unwrap();
        let b = generate_synthetic(&truth, &modes, 12, (0.8, 3.0), &spec).unwrap();
        prop_assert_eq!(&a, &b);
        let clean = generate_synthetic(&truth, &modes, 12, (0.8, 3.0), &NoiseSpec::none()).unwrap();
        let c = apply_noise(&clean, &spec);
        let d = apply_noise(&clean, &spec);
        prop_assert_eq!(&c, &d);
    }

    #[test]
    fn equal_rms_blocks_get_unit_weights(r in 0.1f64..100.0, n_blocks in 1usize..5) {
        let blocks: Vec<ModeBlock> = (0..n_blocks)
            .map(|_| ModeBlock {
                mode: LoadingMode::standard(ModeKind::Ut),
                samples: vec![
                    Sample { params: vec![1.3], values: vec![r] },
                    Sample { params: vec![1.7], values: vec![-r] },
                ],
            })
            .collect();
        let data = Dataset { blocks, units: Units::Pa };
        let w = hyperfit::assembly::mode_weights(&data).unwrap();
        for wi in w {
            prop_assert!((wi - 1.0).abs() < 1e-12);
        }
    }
}
