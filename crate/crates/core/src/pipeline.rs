//! Executes a [`RunConfig`] and writes its artifacts.
//!
//! Output formats:
//!
//! - `<field>.csv`: header `alpha1,alpha2,value,masked`, then one row per
//!   cell with `alpha1` outer and `alpha2` inner, numbers as `{:.16e}`,
//!   masked cells as `NaN` with flag `1`.
//! - `*_contour.txt`: one `alpha1,alpha2` line per vertex, polylines
//!   separated by a blank line.
//! - `rho.txt`, `liouvillian.txt`: one matrix row per line, entries
//!   `re,im` separated by single spaces.
//! - `manifest.json`: input echo, solver report, timings, field statistics,
//!   produced files and the error message of a failed run. Ratio runs add
//!   the share of `C2 = 0` and `C4 = 0` vertices of the numerator system
//!   lying where `|R - 1| >= OVERLAP_DEVIATION`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde_json::{json, Map, Value};

use crate::config::{to_toml, Command, ContourRequestKind, RunConfig};
use crate::contour::{extract_with_kind, ContourKind, ContourSet};
use crate::correlations::ExpectationTable;
use crate::couplings::couplings_for;
use crate::dynamics::{build_liouvillian, steady_state, Superoperator};
use crate::heatmap::write_png;
use crate::scanner::{
    contour_overlap, rabi_ratio_experiment, scaling_experiment, scan_prepared, AngleGrid,
    FieldKind, RatioExperiment, ScalarField,
};
use crate::{Result, SystemSpec, C64};

/// `|R - 1|` above which a ratio cell counts as deviating in the
/// contour-overlap report.
pub const OVERLAP_DEVIATION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct RunReport {
    /// All requested artifacts were written and the steady state met its
    /// residual bound.
    pub success: bool,
    pub files: Vec<PathBuf>,
    pub manifest: Value,
    pub error: Option<String>,
}

pub fn format_field_csv(field: &ScalarField) -> String {
    let alphas = field.grid.alphas();
    let n = field.grid.n_points;
    let mut out = String::with_capacity(n * n * 72 + 32);
    out.push_str("alpha1,alpha2,value,masked\n");
    for (i, a1) in alphas.iter().enumerate() {
        for (j, a2) in alphas.iter().enumerate() {
            let m = field.mask[[i, j]];
            let v = if m { f64::NAN } else { field.values[[i, j]] };
            writeln!(out, "{a1:.16e},{a2:.16e},{v:.16e},{}", u8::from(m)).unwrap();
        }
    }
    out
}

pub fn format_polylines(set: &ContourSet) -> String {
    let mut out = String::new();
    for (k, line) in set.polylines.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for p in line {
            writeln!(out, "{:.16e},{:.16e}", p[0], p[1]).unwrap();
        }
    }
    out
}

pub fn format_complex_matrix(m: &Array2<C64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        for (c, z) in row.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e},{:.16e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

fn write_complex_matrix(path: &Path, m: &Array2<C64>) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for row in m.rows() {
        let mut line = String::with_capacity(row.len() * 48);
        for (c, z) in row.iter().enumerate() {
            if c > 0 {
                line.push(' ');
            }
            write!(line, "{:.16e},{:.16e}", z.re, z.im).unwrap();
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
    manifest: Map<String, Value>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.cfg.output_dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn field_outputs(&mut self, kind: FieldKind, field: &ScalarField) -> Result<()> {
        let name = kind.to_string();
        self.write(&format!("{name}.csv"), &format_field_csv(field))?;
        let cap = (kind == FieldKind::G2Normalized).then(|| self.cfg.g2_cap());
        if self.cfg.emit_heatmaps {
            let path = self.cfg.output_dir.join(format!("{name}.png"));
            write_png(&path, field, cap)?;
            self.files.push(path);
        }
        let mut stats = json!({
            "masked": field.masked_count(),
            "min": field.min(),
            "max": field.max(),
        });
        if let Some(c) = cap {
            stats["cap"] = json!(c);
            stats["above_cap"] = json!(field.count_where(|v| v > c));
        }
        self.section("fields").insert(name, stats);
        Ok(())
    }

    fn section(&mut self, key: &str) -> &mut Map<String, Value> {
        self.manifest
            .entry(key)
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .unwrap()
    }

    fn solve(&mut self, spec: &SystemSpec) -> Result<ExpectationTable> {
        let t = Instant::now();
        let couplings = couplings_for(spec)?;
        let l: Superoperator = build_liouvillian(spec, &couplings)?;
        let assembly = t.elapsed().as_secs_f64();
        if self.cfg.debug.dump_liouvillian {
            let path = self.cfg.output_dir.join("liouvillian.txt");
            write_complex_matrix(&path, &l.to_dense())?;
            self.files.push(path);
        }
        let report = steady_state(&l)?;
        drop(l);
        if self.cfg.debug.dump_rho || self.cfg.command == Command::SteadyState {
            self.write("rho.txt", &format_complex_matrix(report.rho.matrix()))?;
        }
        let table = ExpectationTable::build(&report.rho, spec)?;
        self.manifest.insert(
            "solver".into(),
            json!({
                "kind": report.solver,
                "residual": report.residual,
                "null_space_dim": report.null_space_dim,
                "hilbert_dim": spec.dim(),
                "populations_e": table.populations(),
            }),
        );
        let timings = self.section("timings");
        timings.insert("assembly_secs".into(), json!(assembly));
        timings.insert("solve_secs".into(), json!(report.elapsed_secs));
        Ok(table)
    }

    fn contour_outputs(
        &mut self,
        fields: &std::collections::BTreeMap<FieldKind, ScalarField>,
    ) -> Result<()> {
        for req in self.cfg.contours.clone() {
            let kind = match req.kind {
                ContourRequestKind::Level => ContourKind::LevelSet,
                ContourRequestKind::Ratio => ContourKind::RatioThreshold,
            };
            let set = extract_with_kind(&fields[&req.source_field()], req.value, kind);
            let name = req.file_name();
            self.write(&name, &format_polylines(&set))?;
            self.section("contours").insert(
                name,
                json!({ "field": req.field, "kind": req.kind, "value": req.value,
                        "polylines": set.polylines.len(), "vertices": set.n_vertices() }),
            );
        }
        Ok(())
    }

    fn ratio_outputs(&mut self, exp: &RatioExperiment) -> Result<()> {
        self.write("ratio.csv", &format_field_csv(&exp.ratio))?;
        if self.cfg.emit_heatmaps {
            let path = self.cfg.output_dir.join("ratio.png");
            write_png(&path, &exp.ratio, None)?;
            self.files.push(path);
        }
        self.manifest.insert(
            "ratio".into(),
            json!({
                "max_abs_deviation_from_1": exp.max_deviation,
                "masked": exp.ratio.masked_count(),
                "min": exp.ratio.min(),
                "max": exp.ratio.max(),
                "residuals": exp.residuals,
            }),
        );
        let grid = exp.ratio.grid;
        let fields = scan_prepared(
            &exp.reference,
            grid,
            &[FieldKind::C(2), FieldKind::C(4)],
            self.cfg.workers,
        )?;
        let mut overlap = Map::new();
        for n in [2u8, 4] {
            let set = extract_with_kind(&fields[&FieldKind::C(n)], 0.0, ContourKind::LevelSet);
            overlap.insert(
                format!("C{n}"),
                json!({
                    "vertices": set.n_vertices(),
                    "fraction_deviating": contour_overlap(&exp.ratio, &set, OVERLAP_DEVIATION),
                }),
            );
        }
        let ratio = self.section("ratio");
        ratio.insert("overlap_min_deviation".into(), json!(OVERLAP_DEVIATION));
        ratio.insert("contour_overlap".into(), Value::Object(overlap));
        Ok(())
    }

    fn execute(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let spec = cfg.effective_system();
        let grid = AngleGrid::new(cfg.grid)?;
        match cfg.command {
            Command::Scan | Command::Contours => {
                let table = self.solve(&spec)?;
                let t = Instant::now();
                let mut kinds: BTreeSet<FieldKind> =
                    cfg.contours.iter().map(|c| c.source_field()).collect();
                if cfg.command == Command::Scan {
                    kinds.extend(cfg.fields.iter().copied());
                }
                let kinds: Vec<_> = kinds.into_iter().collect();
                let fields = scan_prepared(&table, grid, &kinds, cfg.workers)?;
                self.section("timings")
                    .insert("scan_secs".into(), json!(t.elapsed().as_secs_f64()));
                if cfg.command == Command::Scan {
                    for kind in &cfg.fields {
                        self.field_outputs(*kind, &fields[kind])?;
                    }
                }
                self.contour_outputs(&fields)
            }
            Command::Scaling => {
                let exp =
                    scaling_experiment(&spec, cfg.scaling.s1, cfg.scaling.s2, grid, cfg.workers)?;
                self.ratio_outputs(&exp)
            }
            Command::RabiRatio => {
                let r = cfg.rabi_ratio;
                let exp =
                    rabi_ratio_experiment(&spec, r.omega_c_1, r.omega_c_2, grid, cfg.workers)?;
                self.ratio_outputs(&exp)
            }
            Command::SteadyState => self.solve(&spec).map(drop),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut ctx = Ctx {
        cfg,
        files: Vec::new(),
        manifest: Map::new(),
    };
    ctx.manifest.insert("command".into(), json!(cfg.command));
    ctx.manifest.insert("input".into(), json!(to_toml(cfg)));
    ctx.manifest.insert(
        "system".into(),
        serde_json::to_value(cfg.effective_system()).unwrap(),
    );
    let outcome = ctx.execute();
    let error = outcome.as_ref().err().map(ToString::to_string);
    ctx.section("timings")
        .insert("total_secs".into(), json!(start.elapsed().as_secs_f64()));
    ctx.manifest.insert(
        "status".into(),
        json!(if error.is_none() { "ok" } else { "failed" }),
    );
    ctx.manifest.insert("error".into(), json!(error));
    let names: Vec<String> = ctx
        .files
        .iter()
        .map(|p| {
            p.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    ctx.manifest.insert("files".into(), json!(names));
    let manifest = Value::Object(ctx.manifest);
    let manifest_path = cfg.output_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    ctx.files.push(manifest_path);
    Ok(RunReport {
        success: error.is_none(),
        files: ctx.files,
        manifest,
        error,
    })
}
