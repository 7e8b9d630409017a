//! Reference implementations built from explicit Kronecker products and
//! dense matrix arithmetic. Nothing here goes through the library's basis
//! mapping, vectorization or expectation tables.
#![allow(dead_code)]

use std::f64::consts::TAU;

use atomcorr::couplings::CouplingMatrices;
use atomcorr::{LevelScheme, SystemSpec, C64};
use ndarray::Array2;

pub type M = Array2<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn unit(d: usize, to: usize, from: usize) -> M {
    let mut m = M::zeros((d, d));
    m[[to, from]] = c(1.0);
    m
}

fn kron(a: &M, b: &M) -> M {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    M::from_shape_fn((ra * rb, ca * cb), |(r, col)| {
        a[[r / rb, col / cb]] * b[[r % rb, col % cb]]
    })
}

/// `|to><from|` on `atom` (0-based, most significant) in an `n`-atom space.
pub fn op(n: usize, d: usize, atom: usize, to: usize, from: usize) -> M {
    let mut m = M::eye(1);
    for a in 0..n {
        let f = if a == atom {
            unit(d, to, from)
        } else {
            M::eye(d)
        };
        m = kron(&m, &f);
    }
    m
}

pub fn dag(m: &M) -> M {
    m.t().mapv(|z| z.conj())
}

pub const G: usize = 0;
pub const E: usize = 1;
pub const R: usize = 2;

/// Right-hand side of the master equation written with matrix products.
pub struct MasterEquation {
    h: M,
    /// `(coefficient, A, B)` meaning `-coef/2 ([A, B rho] + h.c.)`.
    dissipators: Vec<(f64, M, M)>,
}

impl MasterEquation {
    pub fn new(spec: &SystemSpec, k: &CouplingMatrices) -> Self {
        let n = spec.n_atoms();
        let d = spec.local_dim();
        let dim = d.pow(n as u32);
        let three = spec.scheme == LevelScheme::ThreeLevelLadder;
        let mut h = M::zeros((dim, dim));
        for i in 0..n {
            let eg = op(n, d, i, E, G);
            h = h + (&eg + &dag(&eg)) * c(spec.omega_p);
            if three {
                let re = op(n, d, i, R, E);
                h = h + (&re + &dag(&re)) * c(spec.omega_c);
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                h = h - op(n, d, i, E, G).dot(&op(n, d, j, G, E)) * c(k.omega[[i, j]]);
                if three {
                    h = h + op(n, d, i, R, R).dot(&op(n, d, j, R, R)) * c(k.v[[i, j]]);
                }
            }
        }
        let mut dissipators = Vec::new();
        for i in 0..n {
            for j in 0..n {
                dissipators.push((k.gamma[[i, j]], op(n, d, i, E, G), op(n, d, j, G, E)));
            }
            if three {
                dissipators.push((spec.gamma_c, op(n, d, i, R, E), op(n, d, i, E, R)));
            }
        }
        Self { h, dissipators }
    }

    pub fn hamiltonian(&self) -> &M {
        &self.h
    }

    pub fn rhs(&self, rho: &M) -> M {
        let i = C64::new(0.0, 1.0);
        let mut out = (self.h.dot(rho) - rho.dot(&self.h)) * (-i);
        for (g, a, b) in &self.dissipators {
            if *g == 0.0 {
                continue;
            }
            // [A, B rho] + h.c. with rho kept as the argument
            let br = b.dot(rho);
            let term = a.dot(&br) - br.dot(a) + rho.dot(&dag(b)).dot(&dag(a))
                - dag(a).dot(rho).dot(&dag(b));
            out = out - term * c(0.5 * g);
        }
        out
    }
}

fn max_norm(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn frob(m: &M) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Cash-Karp integration from `|g..g><g..g|` until `||d rho/dt||_F < tol`.
pub fn integrate_to_steady_state(eq: &MasterEquation, tol: f64) -> M {
    const A: [[f64; 5]; 5] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
        [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
        [
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    const B5: [f64; 6] = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    const B4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];
    let dim = eq.h.nrows();
    let mut rho = M::zeros((dim, dim));
    rho[[0, 0]] = c(1.0);
    let mut h = 0.01;
    for _ in 0..10_000_000 {
        let k0 = eq.rhs(&rho);
        if frob(&k0) < tol {
            return rho;
        }
        let mut ks = vec![k0];
        for row in A.iter() {
            let mut y = rho.clone();
            for (a, k) in row.iter().zip(&ks) {
                if *a != 0.0 {
                    y = y + k * c(h * a);
                }
            }
            ks.push(eq.rhs(&y));
        }
        let mut y5 = rho.clone();
        let mut diff = M::zeros((dim, dim));
        for s in 0..6 {
            y5 = y5 + &ks[s] * c(h * B5[s]);
            diff = diff + &ks[s] * c(h * (B5[s] - B4[s]));
        }
        let err = max_norm(&diff);
        let allowed = 1e-15;
        if err <= allowed {
            rho = y5;
        }
        let f = if err == 0.0 {
            4.0
        } else {
            (0.9 * (allowed / err).powf(0.2)).clamp(0.1, 4.0)
        };
        h = (h * f).min(5.0);
    }
    panic!("oracle integration did not converge");
}

pub fn phases(positions: &[[f64; 3]], alpha: f64) -> Vec<C64> {
    let (s, co) = alpha.sin_cos();
    positions
        .iter()
        .map(|r| C64::from_polar(1.0, TAU * (co * r[0] + s * r[1])))
        .collect()
}

/// `B = sum_j exp(-i k.r_j) A_ge^j`.
pub fn detector_operator(n: usize, d: usize, positions: &[[f64; 3]], alpha: f64) -> M {
    let p = phases(positions, alpha);
    let dim = d.pow(n as u32);
    let mut b = M::zeros((dim, dim));
    for j in 0..n {
        b = b + op(n, d, j, G, E) * p[j].conj();
    }
    b
}

pub fn trace(m: &M) -> C64 {
    m.diag().sum()
}

/// `tr(rho B1^dag B2^dag B2 B1)`.
pub fn brute_g2(rho: &M, n: usize, d: usize, positions: &[[f64; 3]], a1: f64, a2: f64) -> f64 {
    let b1 = detector_operator(n, d, positions, a1);
    let b2 = detector_operator(n, d, positions, a2);
    trace(&rho.dot(&dag(&b1)).dot(&dag(&b2)).dot(&b2).dot(&b1)).re
}

/// `tr(rho B^dag B)`.
pub fn brute_g1(rho: &M, n: usize, d: usize, positions: &[[f64; 3]], a: f64) -> f64 {
    let b = detector_operator(n, d, positions, a);
    trace(&rho.dot(&dag(&b)).dot(&b)).re
}

pub fn max_abs_diff(a: &M, b: &M) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
