//! Photon correlation functions from a steady state.
//!
//! All angle dependence sits in unit-modulus phases, so the atomic
//! expectation values are tabulated once per steady state:
//!
//! ```text
//! two_op[i,j]       = <A_eg^i A_ge^j>
//! four_op[i,j,k,l]  = <A_eg^i A_eg^j A_ge^k A_ge^l>
//! ```
//!
//! together with their factorized counterparts, in which the operators are
//! grouped by atom and only same-atom products are averaged.
//!
//! For a detector along `k(alpha) = (cos alpha, sin alpha, 0)` (lengths in
//! `lambda_p`) the phase of atom `j` is `p(j) = exp(i 2 pi k.r_j)` and
//!
//! ```text
//! G1     = sum_ij   two_op[i,j]     p(i) conj(p(j))
//! G2     = sum_ijkl four_op[i,j,k,l] p1(i) conj(p1(l)) p2(j) conj(p2(k))
//! ```
//!
//! `G_n` (`U_n`) restricts the `G2` (`U2`) sum to quadruples whose index set
//! has exactly `n` elements, and `C_n = G2 - G_n + U_n`.

use std::f64::consts::TAU;

use ndarray::{Array2, Array4};

use crate::quantum::Basis;
use crate::{DensityMatrix, Error, Level, Result, SystemSpec, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct ExpectationTable {
    positions: Vec<[f64; 3]>,
    two_op: Array2<C64>,
    four_op: Array4<C64>,
    u_two_op: Array2<C64>,
    u_four_op: Array4<C64>,
    coherences: Vec<C64>,
    populations: Vec<f64>,
    /// Single-atom reduced states.
    reduced: Vec<Array2<C64>>,
}

/// Number of distinct values among the indices.
pub fn index_class(idx: [usize; 4]) -> usize {
    let mut distinct = 0;
    for (p, v) in idx.iter().enumerate() {
        if !idx[..p].contains(v) {
            distinct += 1;
        }
    }
    distinct
}

/// The operator sequence behind `four_op[i,j,k,l]`, leftmost first.
fn four_op_sequence(i: usize, j: usize, k: usize, l: usize) -> [(usize, Level, Level); 4] {
    [
        (i, Level::E, Level::G),
        (j, Level::E, Level::G),
        (k, Level::G, Level::E),
        (l, Level::G, Level::E),
    ]
}

/// `<prod ops>_U`: group by atom in order and average each group with the
/// atom's reduced state.
fn factorized(reduced: &[Array2<C64>], ops: &[(usize, Level, Level)]) -> C64 {
    let mut value = C64::new(1.0, 0.0);
    let mut seen = Vec::with_capacity(ops.len());
    for &(atom, _, _) in ops {
        if seen.contains(&atom) {
            continue;
        }
        seen.push(atom);
        // product of |a><b| factors collapses to |first.to><last.from| or zero
        let mut product: Option<(Level, Level)> = None;
        let mut vanishes = false;
        for &(_, to, from) in ops.iter().filter(|op| op.0 == atom) {
            product = match product {
                None => Some((to, from)),
                Some((a, b)) if b == to => Some((a, from)),
                Some(_) => {
                    vanishes = true;
                    None
                }
            };
            if vanishes {
                break;
            }
        }
        match product {
            Some((a, b)) if !vanishes => value *= reduced[atom][[b.index(), a.index()]],
            _ => return ZERO,
        }
    }
    value
}

impl ExpectationTable {
    pub fn build(rho: &DensityMatrix, spec: &SystemSpec) -> Result<Self> {
        spec.validate()?;
        let basis = spec.basis();
        if rho.dim() != basis.dim {
            return Err(Error::Dimension {
                expected: basis.dim,
                found: rho.dim(),
            });
        }
        let n = spec.n_atoms();
        let m = rho.matrix();
        // tr(rho X) for a product of transitions X: X|s> = |X(s)>
        let trace_with = |ops: &[(usize, Level, Level)]| -> C64 {
            (0..basis.dim)
                .filter_map(|s| Basis::apply_product(&basis, s, ops).map(|t| m[[s, t]]))
                .sum()
        };

        let reduced: Vec<_> = (0..n).map(|a| rho.partial_trace_to(n, a)).collect();
        let coherences: Vec<C64> = reduced
            .iter()
            .map(|r| r[[Level::G.index(), Level::E.index()]])
            .collect();
        let populations: Vec<f64> = reduced
            .iter()
            .map(|r| r[[Level::E.index(), Level::E.index()]].re)
            .collect();

        let two_op = Array2::from_shape_fn((n, n), |(i, j)| {
            trace_with(&[(i, Level::E, Level::G), (j, Level::G, Level::E)])
        });
        let u_two_op = Array2::from_shape_fn((n, n), |(i, j)| {
            factorized(
                &reduced,
                &[(i, Level::E, Level::G), (j, Level::G, Level::E)],
            )
        });
        let four_op = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            if i == j || k == l {
                ZERO
            } else {
                trace_with(&four_op_sequence(i, j, k, l))
            }
        });
        let u_four_op = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            factorized(&reduced, &four_op_sequence(i, j, k, l))
        });

        Ok(Self {
            positions: spec.positions.clone(),
            two_op,
            four_op,
            u_two_op,
            u_four_op,
            coherences,
            populations,
            reduced,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn two_op(&self) -> &Array2<C64> {
        &self.two_op
    }

    pub fn four_op(&self) -> &Array4<C64> {
        &self.four_op
    }

    pub fn u_two_op(&self) -> &Array2<C64> {
        &self.u_two_op
    }

    pub fn u_four_op(&self) -> &Array4<C64> {
        &self.u_four_op
    }

    /// `<A_eg^i>`.
    pub fn coherences(&self) -> &[C64] {
        &self.coherences
    }

    /// `<A_ee^i>`.
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// `max_{ijkl} |four_op - u_four_op|`; zero for product states.
    pub fn max_atomic_correlation(&self) -> f64 {
        self.four_op
            .iter()
            .zip(self.u_four_op.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Table of the same populations with every `<A_eg^i>` set to zero.
    ///
    /// Only defined for uncorrelated tables (`four_op == u_four_op` to 1e-10
    /// relative), where `four_op` is then rebuilt from the factorization.
    pub fn without_coherences(&self) -> Result<Self> {
        let scale = self.four_op.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if self.max_atomic_correlation() > 1e-10 * scale {
            return Err(Error::InvalidSpec(
                "coherences can only be removed from an uncorrelated table".into(),
            ));
        }
        let n = self.n_atoms();
        let reduced: Vec<_> = self
            .reduced
            .iter()
            .map(|r| Array2::from_shape_fn(r.dim(), |(a, b)| if a == b { r[[a, b]] } else { ZERO }))
            .collect();
        let u_two_op = Array2::from_shape_fn((n, n), |(i, j)| {
            factorized(
                &reduced,
                &[(i, Level::E, Level::G), (j, Level::G, Level::E)],
            )
        });
        let u_four_op = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            factorized(&reduced, &four_op_sequence(i, j, k, l))
        });
        Ok(Self {
            positions: self.positions.clone(),
            two_op: u_two_op.clone(),
            four_op: u_four_op.clone(),
            u_two_op,
            u_four_op,
            coherences: vec![ZERO; n],
            populations: self.populations.clone(),
            reduced,
        })
    }

    /// `1e-12 (N max_i <A_ee^i>)^2`, the smallest usable `G1 G1` product.
    pub fn denominator_guard(&self) -> f64 {
        let imax = self.populations.iter().cloned().fold(0.0, f64::max);
        let s = self.n_atoms() as f64 * imax;
        1e-12 * s * s
    }
}

pub fn build_expectation_table(rho: &DensityMatrix, spec: &SystemSpec) -> Result<ExpectationTable> {
    ExpectationTable::build(rho, spec)
}

/// Far-field detector in the plane of chain and laser.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorDirection {
    pub alpha: f64,
    pub phase_factors: Vec<C64>,
}

impl DetectorDirection {
    pub fn new(alpha: f64, positions: &[[f64; 3]]) -> Self {
        let (s, c) = alpha.sin_cos();
        let phase_factors = positions
            .iter()
            .map(|r| C64::from_polar(1.0, TAU * (c * r[0] + s * r[1])))
            .collect();
        Self {
            alpha,
            phase_factors,
        }
    }
}

fn pair_sum(t: &Array2<C64>, d: &DetectorDirection) -> f64 {
    let p = &d.phase_factors;
    let mut acc = ZERO;
    for ((i, j), v) in t.indexed_iter() {
        acc += v * p[i] * p[j].conj();
    }
    acc.re
}

pub fn g1(table: &ExpectationTable, d: &DetectorDirection) -> f64 {
    pair_sum(&table.two_op, d)
}

/// `G1` with inter-atom correlations factorized away.
pub fn u1(table: &ExpectationTable, d: &DetectorDirection) -> f64 {
    pair_sum(&table.u_two_op, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationBreakdown {
    pub g2_full: f64,
    /// `G_n` at index `n - 1`; the `n = 1` entry is identically zero.
    pub g2_part: [f64; 4],
    pub u2_full: f64,
    pub u2_part: [f64; 4],
    /// `C_n` at index `n - 1`.
    pub c_n: [f64; 4],
    pub g1_d1: f64,
    pub g1_d2: f64,
    /// `None` when `G1(d1) G1(d2)` is below [`ExpectationTable::denominator_guard`].
    pub g2_normalized: Option<f64>,
}

impl CorrelationBreakdown {
    pub fn g_part(&self, n: usize) -> f64 {
        self.g2_part[n - 1]
    }

    pub fn u_part(&self, n: usize) -> f64 {
        self.u2_part[n - 1]
    }

    pub fn c(&self, n: usize) -> f64 {
        self.c_n[n - 1]
    }

    pub fn intensity_product(&self) -> f64 {
        self.g1_d1 * self.g1_d2
    }
}

/// Full sum and per-class partial sums of a four-index table.
fn quad_sums(t: &Array4<C64>, p1: &[C64], p2: &[C64]) -> (f64, [f64; 4]) {
    let mut full = ZERO;
    let mut parts = [ZERO; 4];
    for ((i, j, k, l), v) in t.indexed_iter() {
        if *v == ZERO {
            continue;
        }
        let term = v * p1[i] * p1[l].conj() * p2[j] * p2[k].conj();
        full += term;
        parts[index_class([i, j, k, l]) - 1] += term;
    }
    (full.re, parts.map(|z| z.re))
}

pub fn g2_breakdown(
    table: &ExpectationTable,
    d1: &DetectorDirection,
    d2: &DetectorDirection,
) -> CorrelationBreakdown {
    let (g2_full, g2_part) = quad_sums(&table.four_op, &d1.phase_factors, &d2.phase_factors);
    let (u2_full, u2_part) = quad_sums(&table.u_four_op, &d1.phase_factors, &d2.phase_factors);
    let c_n = std::array::from_fn(|n| g2_full - g2_part[n] + u2_part[n]);
    let g1_d1 = g1(table, d1);
    let g1_d2 = g1(table, d2);
    let den = g1_d1 * g1_d2;
    let g2_normalized = (den >= table.denominator_guard() && den > 0.0).then(|| g2_full / den);
    CorrelationBreakdown {
        g2_full,
        g2_part,
        u2_full,
        u2_part,
        c_n,
        g1_d1,
        g1_d2,
        g2_normalized,
    }
}
