mod common;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_orthogonal, random_orthogonal_symplectic, random_symplectic};
use semitrace::symplectic::{
    generalized_eigenspace, generalized_eigenspace_direct, kernel, meyer_bound_check, restricted_det, symplectic_defect,
    symplectic_j, EigenspaceSplit, Monodromy, PhaseDim, RankPolicy, Subspace,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_matrices_are_symplectic(seed in any::<u64>(), n in 1usize..=4) {
        let s = random_symplectic(n, &mut rng(seed));
        prop_assert!(symplectic_defect(&s.matrix) <= 1e-8);
        prop_assert!(Monodromy::from_matrix(s.matrix.clone(), 1e-8).is_ok());
        let u = random_orthogonal_symplectic(n, &mut rng(seed ^ 1));
        prop_assert!(symplectic_defect(&u) <= 1e-10);
        prop_assert!((u.transpose() * &u - DMatrix::identity(2 * n, 2 * n)).amax() <= 1e-10);
    }

    #[test]
    fn products_and_inverses_stay_symplectic(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let a = random_symplectic(n, &mut r).matrix;
        let b = random_symplectic(n, &mut r).matrix;
        let j = symplectic_j(PhaseDim::new(n).unwrap());
        let inv = -&j * a.transpose() * &j;
        prop_assert!((&a * &inv - DMatrix::identity(2 * n, 2 * n)).amax() <= 1e-8 * a.amax().powi(2));
        prop_assert!(symplectic_defect(&(&a * &b)) <= 1e-7);
    }

    #[test]
    fn split_invariants(seed in any::<u64>(), n in 1usize..=4) {
        let policy = RankPolicy::default();
        let s = random_symplectic(n, &mut rng(seed));
        let split = EigenspaceSplit::new(&s.matrix, policy).unwrap();
        prop_assert_eq!(split.e1().dim() % 2, 0);
        prop_assert_eq!(split.e1().dim(), s.e1_dim);
        prop_assert_eq!(split.e1().dim() + split.v1().dim(), 2 * n);
        let tol = 10.0 * policy.rank_tol * s.matrix.amax().max(1.0);
        prop_assert!(split.e1().invariance_residual(&s.matrix) <= tol);
        prop_assert!(split.v1().invariance_residual(&s.matrix) <= tol);
    }

    #[test]
    fn eigenspace_oracles_agree(seed in any::<u64>(), n in 1usize..=4) {
        let s = random_symplectic(n, &mut rng(seed));
        let by_kernels = generalized_eigenspace(&s.matrix, Complex64::new(1.0, 0.0), RankPolicy::default()).unwrap();
        let direct = generalized_eigenspace_direct(&s.matrix, 1.0, RankPolicy::new(1e-11).unwrap()).unwrap();
        prop_assert!(by_kernels.same_as(&direct, 1e-6));
    }

    #[test]
    fn eigenspaces_follow_conjugation(seed in any::<u64>(), n in 1usize..=3) {
        let policy = RankPolicy::default();
        let mut r = rng(seed);
        let s = random_symplectic(n, &mut r);
        let u = random_orthogonal_symplectic(n, &mut r);
        let conj = &u * &s.matrix * u.transpose();
        let e1 = EigenspaceSplit::new(&s.matrix, policy).unwrap().e1().clone();
        let moved = EigenspaceSplit::new(&conj, policy).unwrap().e1().clone();
        let image = e1.image_under(&u, policy).unwrap();
        prop_assert!(moved.same_as(&image, 1e-7));
    }

    #[test]
    fn restricted_det_ignores_basis(seed in any::<u64>(), n in 1usize..=4) {
        let policy = RankPolicy::default();
        let mut r = rng(seed);
        let s = random_symplectic(n, &mut r);
        let split = EigenspaceSplit::new(&s.matrix, policy).unwrap();
        let v1 = split.v1();
        prop_assume!(v1.dim() > 0);
        let a = split.minus_identity();
        let base = restricted_det(&a, v1, policy).unwrap();
        let rotated = Subspace::from_columns(&(v1.basis() * random_orthogonal(v1.dim(), &mut r)), policy).unwrap();
        let again = restricted_det(&a, &rotated, policy).unwrap();
        prop_assert!((again - base).abs() <= 1e-10 * base.abs());
    }

    #[test]
    fn dimension_bound_holds(seed in any::<u64>(), n in 1usize..=4) {
        let policy = RankPolicy::default();
        let mut r = rng(seed);
        let s = random_symplectic(n, &mut r);
        let d = 2 * n;
        let fixed = kernel(&(&s.matrix - DMatrix::<f64>::identity(d, d)), 1.0, policy).unwrap();
        prop_assume!(fixed.dim() > 0);
        // a random subspace V of ker(M - I), and W an isotropic part of V ∩ V^w
        let keep = r.gen_range(1..=fixed.dim());
        let v = Subspace::from_columns(&(fixed.basis() * random_orthogonal(fixed.dim(), &mut r).columns(0, keep)), policy).unwrap();
        let j = symplectic_j(PhaseDim::new(n).unwrap());
        let jv = Subspace::from_columns(&(&j * v.basis()), policy).unwrap();
        let radical = v.intersection(&jv.complement(policy).unwrap(), policy).unwrap();
        let w = if radical.dim() == 0 || r.gen_bool(0.3) {
            Subspace::zero(d)
        } else {
            let take = r.gen_range(1..=radical.dim());
            Subspace::from_columns(&radical.basis().columns(0, take).into_owned(), policy).unwrap()
        };
        prop_assert!(meyer_bound_check(&s.matrix, &v, &w, policy).unwrap());
    }

    #[test]
    fn kernel_of_projector_complement(seed in any::<u64>(), d in 2usize..=8, k in 0usize..=8) {
        let k = k.min(d);
        let mut r = rng(seed);
        let q = random_orthogonal(d, &mut r);
        let cols: Vec<DVector<f64>> = (0..k).map(|i| q.column(i).into_owned()).collect();
        let space = Subspace::span(&cols, d, RankPolicy::default()).unwrap();
        prop_assert_eq!(space.dim(), k);
        let complement = space.complement(RankPolicy::default()).unwrap();
        prop_assert_eq!(complement.dim(), d - k);
        let ker = kernel(&space.projector(), 1.0, RankPolicy::default()).unwrap();
        prop_assert!(ker.same_as(&complement, 1e-10));
    }
}
