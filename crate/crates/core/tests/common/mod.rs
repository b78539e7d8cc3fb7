#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use semitrace::symplectic::{symplectic_j, PhaseDim};

/// How one degree of freedom of a block-diagonal symplectic matrix behaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    Identity,
    Rotation(f64),
    Hyperbolic(f64),
    /// Part of the unipotent shear `[[I, S], [0, I]]`.
    Shear,
}

#[derive(Debug, Clone)]
pub struct RandomSymplectic {
    pub matrix: DMatrix<f64>,
    pub modes: Vec<ModeKind>,
    pub shear_rank: usize,
    /// Expected `dim ker((M - I)^{2n})`.
    pub e1_dim: usize,
    /// Expected `dim ker(M - I)`.
    pub fixed_dim: usize,
}

fn random_orthonormal<R: Rng>(k: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    while out.len() < count {
        let mut v = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
        for u in &out {
            v -= u * u.dot(&v);
        }
        if v.norm() > 0.2 {
            out.push(v.normalize());
        }
    }
    out
}

fn symmetric<R: Rng>(d: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

/// `P B P^{-1}` with `B` block diagonal over modes and `P = exp(J S)`.
pub fn random_symplectic<R: Rng>(n: usize, rng: &mut R) -> RandomSymplectic {
    let modes: Vec<ModeKind> = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => ModeKind::Identity,
            1 => ModeKind::Rotation(rng.gen_range(0.5..2.0 * PI - 0.5)),
            2 => ModeKind::Hyperbolic(rng.gen_range(1.5..3.0) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 }),
            _ => ModeKind::Shear,
        })
        .collect();
    let mut b = DMatrix::<f64>::identity(2 * n, 2 * n);
    for (j, mode) in modes.iter().enumerate() {
        match *mode {
            ModeKind::Rotation(theta) => {
                let (s, c) = theta.sin_cos();
                b[(j, j)] = c;
                b[(j, n + j)] = s;
                b[(n + j, j)] = -s;
                b[(n + j, n + j)] = c;
            }
            ModeKind::Hyperbolic(l) => {
                b[(j, j)] = l;
                b[(n + j, n + j)] = 1.0 / l;
            }
            ModeKind::Identity | ModeKind::Shear => {}
        }
    }
    let shear: Vec<usize> = (0..n).filter(|&j| modes[j] == ModeKind::Shear).collect();
    let k = shear.len();
    let shear_rank = if k == 0 { 0 } else { rng.gen_range(0..=k) };
    if shear_rank > 0 {
        let mut s = DMatrix::<f64>::zeros(k, k);
        for u in random_orthonormal(k, shear_rank, rng) {
            let weight = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            s += &u * u.transpose() * weight;
        }
        for (a, &ja) in shear.iter().enumerate() {
            for (c, &jc) in shear.iter().enumerate() {
                b[(ja, n + jc)] = s[(a, c)];
            }
        }
    }
    let j = symplectic_j(PhaseDim::new(n).unwrap());
    let p = (&j * symmetric(2 * n, 0.25, rng)).exp();
    let p_inv = -&j * p.transpose() * &j;
    let unit_modes = modes.iter().filter(|m| matches!(m, ModeKind::Identity | ModeKind::Shear)).count();
    RandomSymplectic {
        matrix: &p * b * p_inv,
        e1_dim: 2 * unit_modes,
        fixed_dim: 2 * unit_modes - shear_rank,
        modes,
        shear_rank,
    }
}

pub const CORPUS: [&[f64]; 4] = [
    &[1.0, std::f64::consts::SQRT_2],
    &[1.0, 2.0],
    &[1.0, 1.0],
    &[1.0, 1.0, std::f64::consts::SQRT_2],
];

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `exp([[X, -Y], [Y, X]])` with `X` antisymmetric and `Y` symmetric: orthogonal and symplectic.
pub fn random_orthogonal_symplectic<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let x = &a - a.transpose();
    let y = symmetric(n, 1.0, rng);
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    k.view_mut((0, 0), (n, n)).copy_from(&x);
    k.view_mut((n, n), (n, n)).copy_from(&x);
    k.view_mut((0, n), (n, n)).copy_from(&(-&y));
    k.view_mut((n, 0), (n, n)).copy_from(&y);
    k.exp()
}

/// A random orthogonal `k x k` matrix.
pub fn random_orthogonal<R: Rng>(k: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_columns(&random_orthonormal(k, k, rng))
}
