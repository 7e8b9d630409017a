//! Pairwise interaction parameters.
//!
//! Dipole-dipole: the retarded dyadic kernel `chi_pq(r)` and its projections
//! onto the transition dipole give the collective decay `gamma_ij` and the
//! coherent exchange `omega_ij`. The overall prefactor is fixed by requiring
//! `gamma_ii = gamma_p`, which for dipoles perpendicular to the separation
//! gives the familiar factor `3/2`.
//!
//! Rydberg: van-der-Waals shifts `V_ij = C6 / r_ij^6`.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use crate::{Error, Interaction, LevelScheme, Result, RydbergStrength, SystemSpec, C64};

/// Below this `eta` the imaginary parts are summed as a power series to avoid
/// the `1/eta^3` cancellation.
const SERIES_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdiTensorInput {
    /// Separation vector in units of `lambda_p`.
    pub separation: [f64; 3],
    /// Unit dipole orientation.
    pub dipole: [f64; 3],
}

impl DdiTensorInput {
    /// `eta = |k| |r| = 2 pi |r| / lambda_p`.
    pub fn eta(&self) -> f64 {
        2.0 * PI * norm(self.separation)
    }
}

/// Coupling constants in units of `gamma_p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMatrices {
    /// Collective decay rates; diagonal is exactly 1.
    pub gamma: Array2<f64>,
    /// Coherent dipole-dipole exchange; zero diagonal.
    pub omega: Array2<f64>,
    /// Rydberg-Rydberg shifts; zero diagonal.
    pub v: Array2<f64>,
}

impl CouplingMatrices {
    /// Independent atoms: `gamma = I`, no coherent couplings.
    pub fn uncoupled(n: usize) -> Self {
        CouplingMatrices {
            gamma: Array2::eye(n),
            omega: Array2::zeros((n, n)),
            v: Array2::zeros((n, n)),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.gamma.nrows()
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `(1/eta + a i/eta^2 - a/eta^3) e^{i eta}` for `a = 1` (transverse) or
/// `a = 3` (longitudinal part of the kernel).
fn radial_kernel(eta: f64, a: f64) -> C64 {
    let (s, c) = eta.sin_cos();
    let re = c / eta - a * s / (eta * eta) - a * c / eta.powi(3);
    let im = if eta < SERIES_CUTOFF {
        // sum_k (-1)^k eta^2k [1/(2k+1)! - a/(2k+2)! + a/(2k+3)!]
        let e2 = eta * eta;
        let mut acc = 0.0;
        let mut pow = 1.0;
        for k in 0..12u32 {
            let coeff =
                1.0 / factorial(2 * k + 1) - a / factorial(2 * k + 2) + a / factorial(2 * k + 3);
            let term = pow * coeff;
            acc += if k % 2 == 0 { term } else { -term };
            pow *= e2;
        }
        acc
    } else {
        s / eta + a * c / (eta * eta) - a * s / eta.powi(3)
    };
    C64::new(re, im)
}

/// Normalized dyadic kernel `chi_pq / (k0^3 / 4 pi eps0)`.
pub fn chi_tensor(input: &DdiTensorInput) -> Result<[[C64; 3]; 3]> {
    let eta = input.eta();
    if !(eta > 0.0) {
        return Err(Error::Geometry(
            "chi tensor is singular at zero separation".into(),
        ));
    }
    let r = norm(input.separation);
    let transverse = radial_kernel(eta, 1.0);
    let longitudinal = radial_kernel(eta, 3.0);
    let mut chi = [[C64::new(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            let delta = if p == q { 1.0 } else { 0.0 };
            let rr = input.separation[p] * input.separation[q] / (r * r);
            chi[p][q] = transverse * delta - longitudinal * rr;
        }
    }
    Ok(chi)
}

/// `d^T chi d^*` for a real dipole orientation.
pub fn project(chi: &[[C64; 3]; 3], dipole: [f64; 3]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..3 {
        for q in 0..3 {
            acc += chi[p][q] * dipole[p] * dipole[q];
        }
    }
    acc
}

/// `gamma_ij / gamma_p` for dipoles perpendicular to the separation.
pub fn perpendicular_gamma(eta: f64) -> f64 {
    1.5 * radial_kernel(eta, 1.0).im
}

/// `omega_ij / gamma_p` for dipoles perpendicular to the separation.
pub fn perpendicular_omega(eta: f64) -> f64 {
    1.5 * radial_kernel(eta, 1.0).re
}

/// Unit direction of a collinear chain, or an error if the atoms do not lie
/// on one line. `None` for a single atom.
fn chain_axis(spec: &SystemSpec) -> Result<Option<[f64; 3]>> {
    let p = &spec.positions;
    if p.len() < 2 {
        return Ok(None);
    }
    let d = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
    let len = norm(d);
    let u = [d[0] / len, d[1] / len, d[2] / len];
    let scale = p.iter().map(|x| norm(*x)).fold(len, f64::max);
    for x in &p[2..] {
        let w = [x[0] - p[0][0], x[1] - p[0][1], x[2] - p[0][2]];
        let cross = [
            w[1] * u[2] - w[2] * u[1],
            w[2] * u[0] - w[0] * u[2],
            w[0] * u[1] - w[1] * u[0],
        ];
        if norm(cross) > 1e-12 * scale {
            return Err(Error::Geometry(
                "dipole-dipole couplings need a collinear chain so the dipoles can be \
                 perpendicular to every separation"
                    .into(),
            ));
        }
    }
    Ok(Some(u))
}

pub fn ddi_couplings(spec: &SystemSpec) -> Result<CouplingMatrices> {
    if spec.scheme != LevelScheme::TwoLevel {
        return Err(Error::InvalidSpec(
            "dipole-dipole couplings need two-level atoms".into(),
        ));
    }
    chain_axis(spec)?;
    let n = spec.n_atoms();
    let mut out = CouplingMatrices::uncoupled(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let eta = 2.0 * PI * spec.separation(i, j);
            let (g, w) = (perpendicular_gamma(eta), perpendicular_omega(eta));
            out.gamma[[i, j]] = g;
            out.gamma[[j, i]] = g;
            out.omega[[i, j]] = w;
            out.omega[[j, i]] = w;
        }
    }
    Ok(out)
}

pub fn rri_couplings(spec: &SystemSpec, strength: RydbergStrength) -> Result<CouplingMatrices> {
    if spec.scheme != LevelScheme::ThreeLevelLadder {
        return Err(Error::InvalidSpec(
            "Rydberg couplings need three-level ladder atoms".into(),
        ));
    }
    let n = spec.n_atoms();
    let mut out = CouplingMatrices::uncoupled(n);
    if n < 2 {
        return Ok(out);
    }
    let mut r_min = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = spec.separation(i, j);
            if r == 0.0 {
                return Err(Error::Geometry(format!("atoms {i} and {j} coincide")));
            }
            r_min = r_min.min(r);
        }
    }
    let pair = |r: f64| -> Result<f64> {
        match strength {
            RydbergStrength::Dimensionless { v_nn } => Ok(v_nn * (r_min / r).powi(6)),
            RydbergStrength::Physical {
                c6,
                lambda_p_um,
                gamma_p,
            } => {
                let lambda = lambda_p_um.ok_or_else(|| {
                    Error::InvalidSpec("physical C6 mode needs lambda_p_um".into())
                })?;
                let rate = gamma_p
                    .ok_or_else(|| Error::InvalidSpec("physical C6 mode needs gamma_p".into()))?;
                if !(lambda > 0.0 && rate > 0.0) {
                    return Err(Error::InvalidSpec(
                        "lambda_p_um and gamma_p must be positive".into(),
                    ));
                }
                // C6 / hbar in rad/s um^6, separation converted to um
                let c6_angular = c6 * 2.0 * PI * 1e9;
                Ok(c6_angular / (r * lambda).powi(6) / rate)
            }
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pair(spec.separation(i, j))?;
            out.v[[i, j]] = v;
            out.v[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Couplings implied by `spec.interaction`.
pub fn couplings_for(spec: &SystemSpec) -> Result<CouplingMatrices> {
    match spec.interaction {
        Interaction::None => Ok(CouplingMatrices::uncoupled(spec.n_atoms())),
        Interaction::Dipole => ddi_couplings(spec),
        Interaction::Rydberg(strength) => rri_couplings(spec, strength),
    }
}
