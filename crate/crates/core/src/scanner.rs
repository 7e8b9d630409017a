//! Detector-angle scans and the two measurement protocols.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{extract_with_kind, ContourKind, ContourSet};
use crate::correlations::{
    g2_breakdown, CorrelationBreakdown, DetectorDirection, ExpectationTable,
};
use crate::couplings::{couplings_for, CouplingMatrices};
use crate::dynamics::{build_liouvillian, steady_state, SteadyStateReport};
use crate::quantum::chain_positions;
use crate::{Error, Interaction, LevelScheme, Result, SystemSpec};

pub const DEFAULT_GRID_POINTS: usize = 201;
/// Relative denominator guard of ratio fields.
pub const RATIO_GUARD: f64 = 1e-12;

/// Uniform grid on `[0, pi]` used for both detector angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub n_points: usize,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl AngleGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidSpec(format!(
                "angle grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { n_points })
    }

    pub fn alpha(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            PI
        } else {
            PI * i as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.alpha(i)).collect()
    }

    pub fn step(&self) -> f64 {
        PI / (self.n_points - 1) as f64
    }
}

/// Values on an [`AngleGrid`]; `values[[i1, i2]]` belongs to
/// `(alpha(i1), alpha(i2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: AngleGrid,
    pub values: Array2<f64>,
    /// `true` marks an undefined cell; its value is NaN.
    pub mask: Array2<bool>,
}

impl ScalarField {
    pub fn from_fn(grid: AngleGrid, f: impl Fn(usize, usize) -> Option<f64>) -> Self {
        let n = grid.n_points;
        let mut values = Array2::from_elem((n, n), f64::NAN);
        let mut mask = Array2::from_elem((n, n), true);
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = f(i, j) {
                    values[[i, j]] = v;
                    mask[[i, j]] = false;
                }
            }
        }
        Self { grid, values, mask }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.mask[[i, j]]).then(|| self.values[[i, j]])
    }

    pub fn unmasked(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values
            .indexed_iter()
            .filter(|(ix, _)| !self.mask[*ix])
            .map(|(ix, v)| (ix, *v))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.unmasked().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> Option<f64> {
        self.unmasked().map(|(_, v)| v).reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.unmasked().map(|(_, v)| v).reduce(f64::max)
    }

    pub fn count_where(&self, pred: impl Fn(f64) -> bool) -> usize {
        self.unmasked().filter(|&(_, v)| pred(v)).count()
    }

    /// Cells not smaller than any unmasked 8-neighbour and within
    /// `rel_tol * max` of the global maximum.
    pub fn near_global_maxima(&self, rel_tol: f64) -> Vec<(usize, usize)> {
        let Some(top) = self.max() else {
            return Vec::new();
        };
        let n = self.grid.n_points as isize;
        self.unmasked()
            .filter(|&(_, v)| v >= top - rel_tol * top.abs())
            .filter(|&((i, j), v)| {
                (-1..=1).all(|di| {
                    (-1..=1).all(|dj| {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || b < 0 || a >= n || b >= n {
                            return true;
                        }
                        self.get(a as usize, b as usize).is_none_or(|w| w <= v)
                    })
                })
            })
            .map(|(ix, _)| ix)
            .collect()
    }

    /// `max |F(a1, a2) - F(a2, a1)|` over cells unmasked in both orders.
    pub fn asymmetry(&self) -> f64 {
        self.unmasked()
            .filter_map(|((i, j), v)| self.get(j, i).map(|w| (v - w).abs()))
            .fold(0.0, f64::max)
    }

    /// Bilinear interpolation at `(a1, a2)`; `None` inside masked cells.
    pub fn interpolate(&self, a1: f64, a2: f64) -> Option<f64> {
        let h = self.grid.step();
        let last = self.grid.n_points - 2;
        let (i, j) = (
            ((a1 / h).floor() as usize).min(last),
            ((a2 / h).floor() as usize).min(last),
        );
        let (tx, ty) = (a1 / h - i as f64, a2 / h - j as f64);
        let f00 = self.get(i, j)?;
        let f10 = self.get(i + 1, j)?;
        let f01 = self.get(i, j + 1)?;
        let f11 = self.get(i + 1, j + 1)?;
        Some(
            f00 * (1.0 - tx) * (1.0 - ty)
                + f10 * tx * (1.0 - ty)
                + f01 * (1.0 - tx) * ty
                + f11 * tx * ty,
        )
    }
}

/// Cellwise `num / den`, masked where `|den| < RATIO_GUARD * max|den|`.
pub fn ratio_field(num: &ScalarField, den: &ScalarField) -> Result<ScalarField> {
    if num.grid != den.grid {
        return Err(Error::Dimension {
            expected: num.grid.n_points,
            found: den.grid.n_points,
        });
    }
    let guard = RATIO_GUARD * den.max_abs();
    Ok(ScalarField::from_fn(num.grid, |i, j| {
        let (a, b) = (num.get(i, j)?, den.get(i, j)?);
        (b.abs() >= guard && b != 0.0).then(|| a / b)
    }))
}

/// Quantities available per grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldKind {
    G2,
    /// `G_n`, `n` in 2..=4.
    GPart(u8),
    U2,
    /// `U_n`, `n` in 2..=4.
    UPart(u8),
    /// `C_n`, `n` in 2..=4.
    C(u8),
    /// `C_n / G2` with the ratio guard.
    CRatio(u8),
    /// `G2 / (G1(alpha1) G1(alpha2))`.
    G2Normalized,
    /// `G1(alpha1) G1(alpha2)`.
    IntensityProduct,
}

impl FieldKind {
    pub const DEFAULT_SET: [FieldKind; 6] = [
        FieldKind::G2,
        FieldKind::C(2),
        FieldKind::C(3),
        FieldKind::C(4),
        FieldKind::G2Normalized,
        FieldKind::IntensityProduct,
    ];

    fn plain(self, b: &CorrelationBreakdown) -> Option<f64> {
        let ix = |n: u8| n as usize - 1;
        match self {
            FieldKind::G2 => Some(b.g2_full),
            FieldKind::GPart(n) => Some(b.g2_part[ix(n)]),
            FieldKind::U2 => Some(b.u2_full),
            FieldKind::UPart(n) => Some(b.u2_part[ix(n)]),
            FieldKind::C(n) => Some(b.c_n[ix(n)]),
            FieldKind::G2Normalized => b.g2_normalized,
            FieldKind::IntensityProduct => Some(b.intensity_product()),
            FieldKind::CRatio(_) => None,
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::G2 => write!(f, "G2"),
            FieldKind::GPart(n) => write!(f, "G2_{n}"),
            FieldKind::U2 => write!(f, "U2"),
            FieldKind::UPart(n) => write!(f, "U2_{n}"),
            FieldKind::C(n) => write!(f, "C{n}"),
            FieldKind::CRatio(n) => write!(f, "C{n}_over_G2"),
            FieldKind::G2Normalized => write!(f, "g2norm"),
            FieldKind::IntensityProduct => write!(f, "intensity_product"),
        }
    }
}

impl FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let order = |d: &str| match d {
            "2" => Ok(2u8),
            "3" => Ok(3),
            "4" => Ok(4),
            _ => Err(format!("unknown field `{s}`")),
        };
        match s {
            "G2" => Ok(FieldKind::G2),
            "U2" => Ok(FieldKind::U2),
            "g2norm" => Ok(FieldKind::G2Normalized),
            "intensity_product" => Ok(FieldKind::IntensityProduct),
            _ => {
                if let Some(d) = s.strip_prefix("G2_") {
                    order(d).map(FieldKind::GPart)
                } else if let Some(d) = s.strip_prefix("U2_") {
                    order(d).map(FieldKind::UPart)
                } else if let Some(d) = s.strip_prefix('C').and_then(|r| r.strip_suffix("_over_G2"))
                {
                    order(d).map(FieldKind::CRatio)
                } else if let Some(d) = s.strip_prefix('C') {
                    order(d).map(FieldKind::C)
                } else {
                    Err(format!("unknown field `{s}`"))
                }
            }
        }
    }
}

impl Serialize for FieldKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Steady state and expectation table of one system.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub spec: SystemSpec,
    pub couplings: CouplingMatrices,
    pub steady: SteadyStateReport,
    pub table: ExpectationTable,
    pub assembly_secs: f64,
}

pub fn prepare(spec: &SystemSpec) -> Result<PreparedSystem> {
    let start = Instant::now();
    let couplings = couplings_for(spec)?;
    let l = build_liouvillian(spec, &couplings)?;
    let assembly_secs = start.elapsed().as_secs_f64();
    let steady = steady_state(&l)?;
    drop(l);
    let table = ExpectationTable::build(&steady.rho, spec)?;
    Ok(PreparedSystem {
        spec: spec.clone(),
        couplings,
        steady,
        table,
        assembly_secs,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidSpec("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("cannot start worker pool: {e}")))
}

/// Breakdown for every `(i1, i2)` cell, row-major.
pub fn breakdown_grid(
    table: &ExpectationTable,
    grid: AngleGrid,
    workers: usize,
) -> Result<Vec<CorrelationBreakdown>> {
    let dirs: Vec<_> = grid
        .alphas()
        .into_iter()
        .map(|a| DetectorDirection::new(a, table.positions()))
        .collect();
    let n = grid.n_points;
    Ok(pool(workers)?.install(|| {
        (0..n * n)
            .into_par_iter()
            .map(|c| g2_breakdown(table, &dirs[c / n], &dirs[c % n]))
            .collect()
    }))
}

pub fn fields_from_breakdowns(
    grid: AngleGrid,
    cells: &[CorrelationBreakdown],
    kinds: &[FieldKind],
) -> BTreeMap<FieldKind, ScalarField> {
    let n = grid.n_points;
    let mut out = BTreeMap::new();
    let g2 = ScalarField::from_fn(grid, |i, j| Some(cells[i * n + j].g2_full));
    for &kind in kinds {
        let field = match kind {
            FieldKind::CRatio(k) => {
                let c = ScalarField::from_fn(grid, |i, j| FieldKind::C(k).plain(&cells[i * n + j]));
                ratio_field(&c, &g2).expect("same grid")
            }
            _ => ScalarField::from_fn(grid, |i, j| kind.plain(&cells[i * n + j])),
        };
        out.insert(kind, field);
    }
    out
}

pub fn scan_prepared(
    table: &ExpectationTable,
    grid: AngleGrid,
    kinds: &[FieldKind],
    workers: usize,
) -> Result<BTreeMap<FieldKind, ScalarField>> {
    for k in kinds {
        if let FieldKind::GPart(n) | FieldKind::UPart(n) | FieldKind::C(n) | FieldKind::CRatio(n) =
            k
        {
            if !(2..=4).contains(n) {
                return Err(Error::InvalidSpec(format!("field order {n} outside 2..=4")));
            }
        }
    }
    let cells = breakdown_grid(table, grid, workers)?;
    Ok(fields_from_breakdowns(grid, &cells, kinds))
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub prepared: PreparedSystem,
    pub fields: BTreeMap<FieldKind, ScalarField>,
}

pub fn scan(
    spec: &SystemSpec,
    grid: AngleGrid,
    kinds: &[FieldKind],
    workers: usize,
) -> Result<ScanResult> {
    let prepared = prepare(spec)?;
    let fields = scan_prepared(&prepared.table, grid, kinds, workers)?;
    Ok(ScanResult { prepared, fields })
}

/// Boundary of the region `c / g2 >= threshold`.
pub fn ratio_regions(
    c_field: &ScalarField,
    g2_field: &ScalarField,
    threshold: f64,
) -> Result<ContourSet> {
    let ratio = ratio_field(c_field, g2_field)?;
    Ok(extract_with_kind(
        &ratio,
        threshold,
        ContourKind::RatioThreshold,
    ))
}

/// Outcome of a protocol comparing two `G2` maps.
#[derive(Debug, Clone)]
pub struct RatioExperiment {
    pub ratio: ScalarField,
    /// `max |R - 1|` over unmasked cells.
    pub max_deviation: f64,
    pub residuals: [f64; 2],
    /// Table of the numerator system.
    pub reference: ExpectationTable,
}

impl RatioExperiment {
    fn new(ratio: ScalarField, residuals: [f64; 2], reference: ExpectationTable) -> Self {
        let max_deviation = ratio
            .unmasked()
            .map(|(_, v)| (v - 1.0).abs())
            .fold(0.0, f64::max);
        Self {
            ratio,
            max_deviation,
            residuals,
            reference,
        }
    }
}

/// Fraction of contour vertices where the interpolated ratio deviates from
/// 1 by at least `min_deviation`; `None` for an empty set.
pub fn contour_overlap(ratio: &ScalarField, set: &ContourSet, min_deviation: f64) -> Option<f64> {
    let mut total = 0usize;
    let mut hit = 0usize;
    for p in set.vertices() {
        total += 1;
        if ratio
            .interpolate(p[0], p[1])
            .is_some_and(|r| (r - 1.0).abs() >= min_deviation)
        {
            hit += 1;
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

/// Mean nearest-neighbour distance along the chain order.
pub fn mean_spacing(spec: &SystemSpec) -> f64 {
    let n = spec.n_atoms();
    if n < 2 {
        return 1.0;
    }
    (1..n).map(|i| spec.separation(i - 1, i)).sum::<f64>() / (n - 1) as f64
}

/// Copy of `spec` scaled so that [`mean_spacing`] equals `s`.
pub fn with_spacing(spec: &SystemSpec, s: f64) -> SystemSpec {
    let f = s / mean_spacing(spec);
    let mut out = spec.clone();
    for r in &mut out.positions {
        *r = r.map(|x| x * f);
    }
    out
}

fn g2_at(table: &ExpectationTable, a1: f64, a2: f64) -> f64 {
    let d1 = DetectorDirection::new(a1, table.positions());
    let d2 = DetectorDirection::new(a2, table.positions());
    g2_breakdown(table, &d1, &d2).g2_full
}

/// `R(a1, a2) = G2_{s1}(a1, a2) / G2_{s2}(b1, b2)` with
/// `s1 cos a = s2 cos b`, both evaluated at exact angles.
pub fn scaling_experiment(
    spec: &SystemSpec,
    s1: f64,
    s2: f64,
    grid: AngleGrid,
    workers: usize,
) -> Result<RatioExperiment> {
    if !(s1 > 0.0 && s1 <= s2 && s2.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "scaling needs 0 < s1 <= s2, got s1 = {s1}, s2 = {s2}"
        )));
    }
    let first = prepare(&with_spacing(spec, s1))?;
    let second = prepare(&with_spacing(spec, s2))?;
    let alphas = grid.alphas();
    let mapped: Vec<f64> = alphas
        .iter()
        .map(|a| ((s1 / s2) * a.cos()).clamp(-1.0, 1.0).acos())
        .collect();
    let n = grid.n_points;
    let (num, den): (Vec<f64>, Vec<f64>) = pool(workers)?.install(|| {
        (0..n * n)
            .into_par_iter()
            .map(|c| {
                let (i, j) = (c / n, c % n);
                (
                    g2_at(&first.table, alphas[i], alphas[j]),
                    g2_at(&second.table, mapped[i], mapped[j]),
                )
            })
            .unzip()
    });
    let num = ScalarField::from_fn(grid, |i, j| Some(num[i * n + j]));
    let den = ScalarField::from_fn(grid, |i, j| Some(den[i * n + j]));
    Ok(RatioExperiment::new(
        ratio_field(&num, &den)?,
        [first.steady.residual, second.steady.residual],
        first.table,
    ))
}

/// `G2` with `Omega_c = omega_c_1` over `G2` with `Omega_c = omega_c_2`.
pub fn rabi_ratio_experiment(
    spec: &SystemSpec,
    omega_c_1: f64,
    omega_c_2: f64,
    grid: AngleGrid,
    workers: usize,
) -> Result<RatioExperiment> {
    if spec.scheme != LevelScheme::ThreeLevelLadder {
        return Err(Error::InvalidSpec(
            "the coupling-ratio protocol needs ladder atoms".into(),
        ));
    }
    let mut a = spec.clone();
    a.omega_c = omega_c_1;
    let mut b = spec.clone();
    b.omega_c = omega_c_2;
    let first = prepare(&a)?;
    let second = prepare(&b)?;
    let fa = scan_prepared(&first.table, grid, &[FieldKind::G2], workers)?;
    let fb = scan_prepared(&second.table, grid, &[FieldKind::G2], workers)?;
    Ok(RatioExperiment::new(
        ratio_field(&fa[&FieldKind::G2], &fb[&FieldKind::G2])?,
        [first.steady.residual, second.steady.residual],
        first.table,
    ))
}

#[derive(Debug, Clone)]
pub struct RandomSpacingReport {
    pub spec: SystemSpec,
    pub residual: f64,
    pub fields: BTreeMap<FieldKind, ScalarField>,
    pub c2_zero: ContourSet,
    pub c4_zero: ContourSet,
}

/// Dipole-coupled chain with the given spacings and the drive of `template`.
pub fn random_spacing_check(
    template: &SystemSpec,
    spacings: &[f64],
    grid: AngleGrid,
    workers: usize,
) -> Result<RandomSpacingReport> {
    if template.scheme != LevelScheme::TwoLevel {
        return Err(Error::InvalidSpec(
            "spacing check applies to dipole-coupled two-level atoms".into(),
        ));
    }
    let mut spec = template.clone();
    spec.positions = chain_positions(spacings);
    spec.interaction = Interaction::Dipole;
    let result = scan(
        &spec,
        grid,
        &[FieldKind::G2, FieldKind::C(2), FieldKind::C(4)],
        workers,
    )?;
    let c2_zero = crate::contour::extract_contours(&result.fields[&FieldKind::C(2)], 0.0);
    let c4_zero = crate::contour::extract_contours(&result.fields[&FieldKind::C(4)], 0.0);
    Ok(RandomSpacingReport {
        spec,
        residual: result.prepared.steady.residual,
        fields: result.fields,
        c2_zero,
        c4_zero,
    })
}
