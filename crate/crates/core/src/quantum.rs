//! Operator algebra on the `N`-atom tensor-product space.
//!
//! Basis convention: atom 0 is the most significant tensor factor and the
//! local levels are ordered `(g, e, r)`. A basis index `s` therefore encodes
//! the level of atom `a` as the digit `(s / d^(N-1-a)) % d` in base `d`.

use ndarray::{Array2, Axis};
use ndarray_linalg::{EigVals, Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Local atomic level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G,
    E,
    R,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::R => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::G => "g",
            Level::E => "e",
            Level::R => "r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelScheme {
    /// `{g, e}`, used for dipole-dipole coupled atoms.
    TwoLevel,
    /// `{g, e, r}` ladder with a Rydberg state on top.
    ThreeLevelLadder,
}

impl LevelScheme {
    pub fn local_dim(self) -> usize {
        match self {
            LevelScheme::TwoLevel => 2,
            LevelScheme::ThreeLevelLadder => 3,
        }
    }

    pub fn levels(self) -> &'static [Level] {
        match self {
            LevelScheme::TwoLevel => &[Level::G, Level::E],
            LevelScheme::ThreeLevelLadder => &[Level::G, Level::E, Level::R],
        }
    }

    pub fn contains(self, level: Level) -> bool {
        level.index() < self.local_dim()
    }

    pub fn name(self) -> &'static str {
        match self {
            LevelScheme::TwoLevel => "two-level",
            LevelScheme::ThreeLevelLadder => "three-level ladder",
        }
    }
}

/// How the van-der-Waals coupling `V_ij = C6 / r_ij^6` is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RydbergStrength {
    /// Nearest-neighbour shift `v_nn` in units of `gamma_p`; other pairs
    /// scale as `v_nn * (r_nn / r_ij)^6` with `r_nn` the smallest separation.
    Dimensionless { v_nn: f64 },
    /// `c6` in units of `2 pi x GHz um^6`, `lambda_p` in um, `gamma_p` as a
    /// decay rate in 1/s. Both the wavelength and the rate must be supplied.
    Physical {
        c6: f64,
        lambda_p_um: Option<f64>,
        gamma_p: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interaction {
    None,
    /// Dipole-dipole coupling on the lower transition.
    Dipole,
    /// Rydberg-Rydberg coupling between atoms in `|r>`.
    Rydberg(RydbergStrength),
}

/// Full description of one driven atom chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub scheme: LevelScheme,
    /// Atom positions in units of `lambda_p`.
    pub positions: Vec<[f64; 3]>,
    pub omega_p: f64,
    pub omega_c: f64,
    pub gamma_c: f64,
    pub interaction: Interaction,
}

impl SystemSpec {
    /// Two-level chain along `x` with the given nearest-neighbour spacings.
    pub fn two_level_chain(spacings: &[f64], omega_p: f64, interaction: Interaction) -> Self {
        SystemSpec {
            scheme: LevelScheme::TwoLevel,
            positions: chain_positions(spacings),
            omega_p,
            omega_c: 0.0,
            gamma_c: 0.0,
            interaction,
        }
    }

    /// Three-level ladder chain along `x`.
    pub fn ladder_chain(
        spacings: &[f64],
        omega_p: f64,
        omega_c: f64,
        gamma_c: f64,
        interaction: Interaction,
    ) -> Self {
        SystemSpec {
            scheme: LevelScheme::ThreeLevelLadder,
            positions: chain_positions(spacings),
            omega_p,
            omega_c,
            gamma_c,
            interaction,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn local_dim(&self) -> usize {
        self.scheme.local_dim()
    }

    /// Hilbert-space dimension `d^N`.
    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.n_atoms() as u32)
    }

    pub fn separation(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Same spec with the atom labels permuted: new atom `k` is old atom `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.positions = perm.iter().map(|&p| self.positions[p]).collect();
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_atoms();
        if n == 0 {
            return Err(Error::InvalidSpec("at least one atom is required".into()));
        }
        if self.positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("positions must be finite".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.separation(i, j) == 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "atoms {i} and {j} share the same position"
                    )));
                }
            }
        }
        for (name, v) in [
            ("omega_p", self.omega_p),
            ("omega_c", self.omega_c),
            ("gamma_c", self.gamma_c),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        match self.scheme {
            LevelScheme::TwoLevel => {
                if self.omega_c != 0.0 || self.gamma_c != 0.0 {
                    return Err(Error::InvalidSpec(
                        "omega_c and gamma_c must be zero for two-level atoms".into(),
                    ));
                }
                if let Interaction::Rydberg(_) = self.interaction {
                    return Err(Error::InvalidSpec(
                        "Rydberg interaction needs the three-level ladder scheme".into(),
                    ));
                }
            }
            LevelScheme::ThreeLevelLadder => {
                if self.interaction == Interaction::Dipole {
                    return Err(Error::InvalidSpec(
                        "dipole-dipole interaction is only modelled for two-level atoms".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis::new(self.n_atoms(), self.local_dim())
    }
}

/// Positions `x_0 = 0, x_k = x_{k-1} + spacings[k-1]` on the `x` axis.
pub fn chain_positions(spacings: &[f64]) -> Vec<[f64; 3]> {
    let mut x = 0.0;
    let mut out = vec![[0.0, 0.0, 0.0]];
    for s in spacings {
        x += s;
        out.push([x, 0.0, 0.0]);
    }
    out
}

/// Digit bookkeeping for the product basis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Basis {
    pub n_atoms: usize,
    pub local_dim: usize,
    pub dim: usize,
}

impl Basis {
    pub fn new(n_atoms: usize, local_dim: usize) -> Self {
        Basis {
            n_atoms,
            local_dim,
            dim: local_dim.pow(n_atoms as u32),
        }
    }

    fn stride(&self, atom: usize) -> usize {
        self.local_dim.pow((self.n_atoms - 1 - atom) as u32)
    }

    pub fn level_of(&self, state: usize, atom: usize) -> usize {
        (state / self.stride(atom)) % self.local_dim
    }

    /// `|to><from|` on `atom` applied to basis ket `state`.
    pub fn apply(&self, state: usize, atom: usize, to: Level, from: Level) -> Option<usize> {
        let stride = self.stride(atom);
        let cur = (state / stride) % self.local_dim;
        (cur == from.index()).then(|| state - cur * stride + to.index() * stride)
    }

    /// Apply a product of transitions `ops[0] ops[1] ... ops[m-1]` to a ket.
    /// Each entry is `(atom, to, from)`; the rightmost factor acts first.
    pub fn apply_product(&self, state: usize, ops: &[(usize, Level, Level)]) -> Option<usize> {
        ops.iter()
            .rev()
            .try_fold(state, |s, &(atom, to, from)| self.apply(s, atom, to, from))
    }
}

/// Dense operator on the full `d^N`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAtomOperator(Array2<C64>);

impl MultiAtomOperator {
    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(MultiAtomOperator(m))
    }

    pub fn identity(dim: usize) -> Self {
        MultiAtomOperator(Array2::eye(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        MultiAtomOperator(Array2::zeros((dim, dim)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        MultiAtomOperator(self.0.t().mapv(|z| z.conj()))
    }

    pub fn scaled(&self, c: C64) -> Self {
        MultiAtomOperator(&self.0 * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(MultiAtomOperator(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(MultiAtomOperator(&self.0 - &other.0))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Array2<C64>);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const POSITIVITY_TOL: f64 = 1e-10;

    pub fn new(m: Array2<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let herm = m.indexed_iter().fold(0.0_f64, |acc, ((i, j), z)| {
            acc.max((z - m[[j, i]].conj()).norm())
        });
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidSpec(format!(
                "density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr: C64 = m.diag().sum();
        if (tr - 1.0).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidSpec(format!(
                "density matrix trace {tr} != 1"
            )));
        }
        let rho = DensityMatrix(m);
        let min_eig = rho.min_eigenvalue();
        if min_eig < -Self::POSITIVITY_TOL {
            return Err(Error::InvalidSpec(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// `|s><s|` for a single basis state.
    pub fn basis_state(dim: usize, state: usize) -> Self {
        let mut m = Array2::zeros((dim, dim));
        m[[state, state]] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// Tensor product of single-atom states, atom 0 most significant.
    pub fn product(factors: &[DensityMatrix]) -> Self {
        let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for f in factors {
            acc = kron(&acc, &f.0);
        }
        DensityMatrix(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self.0.eigh(UPLO::Lower) {
            Ok((w, _)) => w.iter().cloned().fold(f64::INFINITY, f64::min),
            // eigh only fails on NaN input; fall back to the general solver
            Err(_) => self
                .0
                .eigvals()
                .map(|w| w.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
                .unwrap_or(f64::NAN),
        }
    }

    /// Reduced state of one atom.
    pub fn partial_trace_to(&self, basis_n_atoms: usize, atom: usize) -> Array2<C64> {
        let d = (self.dim() as f64).powf(1.0 / basis_n_atoms as f64).round() as usize;
        let basis = Basis::new(basis_n_atoms, d);
        let mut out = Array2::zeros((d, d));
        for s in 0..self.dim() {
            let a = basis.level_of(s, atom);
            for b in 0..d {
                let t = s - a * basis.stride(atom) + b * basis.stride(atom);
                out[[a, b]] += self.0[[s, t]];
            }
        }
        out
    }
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&(b * x));
    }
    out
}

/// `A_{alpha beta}` of atom `atom` (0-based): `I x ... x |alpha><beta| x ... x I`.
pub fn embed_operator(
    spec: &SystemSpec,
    atom: usize,
    alpha: Level,
    beta: Level,
) -> Result<MultiAtomOperator> {
    let n = spec.n_atoms();
    if atom >= n {
        return Err(Error::AtomIndex {
            index: atom,
            n_atoms: n,
        });
    }
    for level in [alpha, beta] {
        if !spec.scheme.contains(level) {
            return Err(Error::LevelNotInScheme {
                level: level.label(),
                scheme: spec.scheme.name(),
            });
        }
    }
    let basis = spec.basis();
    let mut m = Array2::zeros((basis.dim, basis.dim));
    for s in 0..basis.dim {
        if let Some(t) = basis.apply(s, atom, alpha, beta) {
            m[[t, s]] = C64::new(1.0, 0.0);
        }
    }
    Ok(MultiAtomOperator(m))
}

pub fn op_product(a: &MultiAtomOperator, b: &MultiAtomOperator) -> Result<MultiAtomOperator> {
    check_dim(a.dim(), b.dim())?;
    Ok(MultiAtomOperator(a.0.dot(&b.0)))
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &MultiAtomOperator, b: &MultiAtomOperator) -> Result<MultiAtomOperator> {
    op_product(a, b)?.sub(&op_product(b, a)?)
}

/// `tr(rho op)`.
pub fn expectation(rho: &DensityMatrix, op: &MultiAtomOperator) -> Result<C64> {
    check_dim(rho.dim(), op.dim())?;
    // tr(AB) = sum_ij A_ij B_ji without forming the product
    Ok(rho
        .0
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(op.0.column(i))
                .map(|(a, b)| a * b)
                .sum::<C64>()
        })
        .sum())
}
