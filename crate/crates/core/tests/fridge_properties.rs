mod common;

use proptest::prelude::*;

use qrefrig_core::densim::{distance, DensityMatrix, Norm};
use qrefrig_core::fridge::{build_cooling_circuit, choose_r, run_fridge_ideal, top_mass};
use qrefrig_core::linalg::{haar_unitary, CMatrix};

use common::{h2, rng};

/// `diag(1 − q, q)^{⊗2}` as a dense matrix.
fn biased_pair(q: f64) -> CMatrix {
    let p = [1.0 - q, q];
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |i, _| (p[i >> 1] * p[i & 1]).into()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn no_two_qubit_unitary_beats_the_top_mass(seed in any::<u64>(), q in 0.0f64..0.5) {
        let u = haar_unitary(4, &mut rng(seed));
        let out = &u * biased_pair(q) * u.adjoint();
        // Population of |0⟩ on the first qubit: labels 00 and 01.
        let population = out[(0, 0)].re + out[(1, 1)].re;
        prop_assert!(population <= top_mass(q, 2) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn permutation_matrix_has_one_unit_per_row_and_column(q in 0.0f64..0.5, r_block in 1usize..=6) {
        let m = build_cooling_circuit(q, r_block).unwrap().permutation_unitary();
        for i in 0..m.nrows() {
            let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)].re).collect();
            let col: Vec<f64> = (0..m.nrows()).map(|j| m[(j, i)].re).collect();
            prop_assert!(m.iter().all(|z| z.im == 0.0 && (z.re == 0.0 || z.re == 1.0)));
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn compiled_network_realizes_the_permutation(q in 0.0f64..0.5, r_block in 1usize..=5) {
        let spec = build_cooling_circuit(q, r_block).unwrap();
        let dim = 1usize << r_block;
        let mut u = CMatrix::identity(dim, dim);
        for stage in &spec.stages {
            u = stage.to_unitary(r_block).unwrap() * u;
        }
        prop_assert_eq!(u, spec.permutation_unitary());
    }

    #[test]
    fn cooling_conserves_total_entropy(q in 0.0f64..0.5, r_block in 1usize..=6) {
        let spec = build_cooling_circuit(q, r_block).unwrap();
        let out = qrefrig_core::fridge::run_circuit(&spec, None, &spec.ideal_input()).unwrap();
        prop_assert!((out.entropy() - r_block as f64 * h2(q)).abs() <= 1e-10);
        let rep = run_fridge_ideal(&spec, &spec.ideal_input()).unwrap();
        prop_assert!(rep.waste_entropy <= (r_block - 1) as f64 + 1e-12);
        prop_assert!((0.0..=2.0).contains(&rep.reset_distance));
    }

    #[test]
    fn perturbed_inputs_move_the_output_no_further_than_the_perturbation(
        seed in any::<u64>(), q in 0.01f64..0.45, r_block in 1usize..=4, s in 0.0f64..0.3,
    ) {
        let spec = build_cooling_circuit(q, r_block).unwrap();
        let ideal_in = spec.ideal_input();
        let noise = DensityMatrix::random_mixed(r_block, &mut rng(seed));
        let mixed = ideal_in.matrix() * nalgebra::Complex::from(1.0 - s) + noise.matrix() * nalgebra::Complex::from(s);
        let input = DensityMatrix::new(mixed).unwrap();
        let delta = distance(&input, &ideal_in, Norm::One).unwrap();
        let ideal = run_fridge_ideal(&spec, &ideal_in).unwrap().reset_distance;
        let moved = run_fridge_ideal(&spec, &input).unwrap().reset_distance;
        prop_assert!(moved <= ideal + delta + 1e-12);
    }

    #[test]
    fn block_size_grows_with_bias_and_shrinks_with_tolerance(
        q in 0.01f64..0.45, dq in 0.0f64..0.04, eps in 0.01f64..0.5, deps in 0.0f64..0.2,
    ) {
        let r = choose_r(q, eps).unwrap();
        prop_assert!(choose_r((q + dq).min(0.45), eps).unwrap() >= r);
        prop_assert!(choose_r(q, eps + deps).unwrap() <= r);
        prop_assert!(2.0 * (1.0 - top_mass(q, r)) < eps);
        if r > 1 {
            prop_assert!(2.0 * (1.0 - top_mass(q, r - 1)) >= eps);
        }
    }
}
