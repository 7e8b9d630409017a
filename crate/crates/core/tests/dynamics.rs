mod common;

use atomcorr::couplings::{couplings_for, CouplingMatrices};
use atomcorr::dynamics::{
    build_hamiltonian, build_liouvillian, build_liouvillian_with, steady_state, steady_state_with,
    unvec, vectorize, SolverChoice, SolverKind, StoragePolicy,
};
use atomcorr::{DensityMatrix, Interaction, RydbergStrength, SystemSpec, C64};
use common::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> M {
    let a = M::from_shape_fn((d, d), |_| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + &dag(&a)) * c(0.5)
}

fn ladder(spacings: &[f64], v_nn: f64) -> SystemSpec {
    SystemSpec::ladder_chain(
        spacings,
        0.2,
        0.7,
        0.3,
        Interaction::Rydberg(RydbergStrength::Dimensionless { v_nn }),
    )
}

#[test]
fn hamiltonian_matches_kronecker_construction() {
    for spec in [
        SystemSpec::two_level_chain(&[1.0, 0.6, 0.4], 0.3, Interaction::Dipole),
        ladder(&[1.0, 2.0], 1.7),
    ] {
        let k = couplings_for(&spec).unwrap();
        let h = build_hamiltonian(&spec, &k).unwrap();
        let oracle = MasterEquation::new(&spec, &k);
        assert!(max_abs_diff(h.matrix(), oracle.hamiltonian()) < 1e-15);
    }
}

#[test]
fn liouvillian_matches_matrix_product_rhs_on_matrix_units() {
    let specs = [
        SystemSpec::two_level_chain(&[1.0], 0.3, Interaction::Dipole),
        SystemSpec::two_level_chain(&[0.25], 0.1, Interaction::Dipole),
        ladder(&[1.5], 2.0),
    ];
    for spec in specs {
        let k = couplings_for(&spec).unwrap();
        let l = build_liouvillian(&spec, &k).unwrap();
        let oracle = MasterEquation::new(&spec, &k);
        let d = spec.dim();
        for r in 0..d {
            for col in 0..d {
                let mut e = Array2::zeros((d, d));
                e[[r, col]] = c(1.0);
                assert!(max_abs_diff(&l.apply(&e), &oracle.rhs(&e)) <= 1e-12);
            }
        }
    }
}

#[test]
fn trace_and_hermiticity_are_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for spec in [
        SystemSpec::two_level_chain(&[1.0, 0.5], 0.4, Interaction::Dipole),
        ladder(&[1.0, 1.0], 3.0),
    ] {
        let l = build_liouvillian(&spec, &couplings_for(&spec).unwrap()).unwrap();
        for _ in 0..20 {
            let rho = random_hermitian(&mut rng, spec.dim());
            let out = l.apply(&rho);
            assert!(trace(&out).norm() <= 1e-12);
            assert!(max_abs_diff(&out, &dag(&out)) <= 1e-12);
        }
    }
}

#[test]
fn vectorization_is_column_stacking() {
    let m = Array2::from_shape_fn((3, 3), |(r, col)| c((10 * r + col) as f64));
    let v = vectorize(&m);
    assert_eq!(v[1], c(10.0));
    assert_eq!(v[3], c(1.0));
    assert_eq!(unvec(&v, 3), m);
}

#[test]
fn four_atom_ladder_liouvillian_dimension() {
    let spec = ladder(&[5.0, 5.0, 5.0], 2.0);
    let l = build_liouvillian_with(&spec, &couplings_for(&spec).unwrap(), StoragePolicy::Sparse)
        .unwrap();
    assert_eq!(spec.dim(), 81);
    assert_eq!(l.dim(), 6561);
    assert!(!l.is_dense());
}

#[test]
fn steady_states_match_time_integration() {
    let specs = [
        SystemSpec::two_level_chain(&[], 0.01, Interaction::None),
        SystemSpec::two_level_chain(&[], 0.7, Interaction::None),
        SystemSpec::two_level_chain(&[1.0], 0.3, Interaction::Dipole),
        SystemSpec::ladder_chain(&[], 0.3, 0.5, 0.2, Interaction::None),
    ];
    for spec in specs {
        let k = couplings_for(&spec).unwrap();
        let rep = steady_state(&build_liouvillian(&spec, &k).unwrap()).unwrap();
        let oracle = integrate_to_steady_state(&MasterEquation::new(&spec, &k), 1e-12);
        let diff = max_abs_diff(rep.rho.matrix(), &oracle);
        assert!(diff <= 1e-8, "{spec:?}: {diff:e}");
        assert!(rep.residual <= 1e-10);
        assert_eq!(rep.null_space_dim, 1);
    }
}

#[test]
fn solvers_agree_for_dipole_pair_at_one_wavelength() {
    let spec = SystemSpec::two_level_chain(&[1.0], 0.01, Interaction::Dipole);
    let l = build_liouvillian(&spec, &couplings_for(&spec).unwrap()).unwrap();
    let a = steady_state_with(&l, SolverChoice::Force(SolverKind::TraceRowReplacement)).unwrap();
    let b = steady_state_with(&l, SolverChoice::Force(SolverKind::TimeIntegration)).unwrap();
    assert!(max_abs_diff(a.rho.matrix(), b.rho.matrix()) <= 1e-8);
}

#[test]
fn steady_state_is_a_valid_density_matrix() {
    let spec = SystemSpec::two_level_chain(&[0.3, 0.3], 0.5, Interaction::Dipole);
    let rep =
        steady_state(&build_liouvillian(&spec, &couplings_for(&spec).unwrap()).unwrap()).unwrap();
    let m = rep.rho.matrix();
    assert!(max_abs_diff(m, &dag(m)) <= 1e-10);
    assert!((trace(m) - c(1.0)).norm() <= 1e-12);
    assert!(rep.rho.min_eigenvalue() >= -1e-10);
}

fn permutation_matrix(n: usize, d: usize, perm: &[usize]) -> M {
    // new atom a carries old atom perm[a]
    let dim = d.pow(n as u32);
    let mut p = M::zeros((dim, dim));
    for s in 0..dim {
        let digits: Vec<usize> = (0..n)
            .map(|a| (s / d.pow((n - 1 - a) as u32)) % d)
            .collect();
        let t: usize = (0..n)
            .map(|a| digits[perm[a]] * d.pow((n - 1 - a) as u32))
            .sum();
        p[[t, s]] = c(1.0);
    }
    p
}

#[test]
fn relabeling_atoms_conjugates_the_steady_state() {
    let perm = [2, 0, 1];
    for spec in [
        SystemSpec::two_level_chain(&[0.7, 0.4], 0.3, Interaction::Dipole),
        ladder(&[1.0, 1.3], 2.5),
    ] {
        let other = spec.permuted(&perm);
        let a = steady_state(&build_liouvillian(&spec, &couplings_for(&spec).unwrap()).unwrap())
            .unwrap();
        let b = steady_state(&build_liouvillian(&other, &couplings_for(&other).unwrap()).unwrap())
            .unwrap();
        let p = permutation_matrix(3, spec.local_dim(), &perm);
        let conj = p.dot(a.rho.matrix()).dot(&p.t());
        assert!(max_abs_diff(&conj, b.rho.matrix()) <= 1e-10);
    }
}

#[test]
fn uncoupled_atoms_reach_a_product_state() {
    for spec in [
        SystemSpec::two_level_chain(&[1.0, 1.0], 0.4, Interaction::None),
        SystemSpec::ladder_chain(&[1.0, 1.0], 0.4, 0.8, 0.1, Interaction::None),
    ] {
        let mut single = spec.clone();
        single.positions.truncate(1);
        let one =
            steady_state(&build_liouvillian(&single, &couplings_for(&single).unwrap()).unwrap())
                .unwrap();
        let all = steady_state(&build_liouvillian(&spec, &CouplingMatrices::uncoupled(3)).unwrap())
            .unwrap();
        let product = DensityMatrix::product(&[one.rho.clone(), one.rho.clone(), one.rho]);
        assert!(max_abs_diff(all.rho.matrix(), product.matrix()) <= 1e-10);
    }
}
