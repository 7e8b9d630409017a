//! TOML run configuration and the scenario library.
//!
//! ```toml
//! scenario = "ddi_fig2"        # preset supplying every default below
//! command = "scan"             # scan | contours | scaling | rabi-ratio | steady-state
//! grid = 201
//! fields = ["G2", "C2", "C3", "C4", "g2norm", "intensity_product"]
//! output_dir = "out"
//! workers = 1
//! emit_heatmaps = false
//! interaction_off = false
//!
//! [[contours]]
//! field = "C2"
//! kind = "level"               # level: C = value; ratio: C / G2 = value
//! value = 0.0
//!
//! [system]                     # each key overrides the preset
//! scheme = "two-level"         # or "three-level-ladder"
//! spacings = [1.0, 1.0, 1.0]   # or positions = [[x, y, z], ...]
//! omega_p = 0.01
//! omega_c = 0.0
//! gamma_c = 0.0
//! interaction = { kind = "dipole" }
//! # interaction = { kind = "rydberg", mode = "dimensionless", v_nn = 2.34 }
//!
//! [scaling]
//! s1 = 1.0
//! s2 = 1.5
//!
//! [rabi_ratio]
//! omega_c_1 = 0.01
//! omega_c_2 = 0.05
//!
//! [debug]
//! dump_liouvillian = false
//! dump_rho = false
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quantum::chain_positions;
use crate::scanner::{FieldKind, DEFAULT_GRID_POINTS};
use crate::{Error, Interaction, LevelScheme, Result, RydbergStrength, SystemSpec};

/// Nearest-neighbour Rydberg shift of the `rri_fig6` preset, in `gamma_p`.
///
/// `C6 = 2 pi x 50 GHz um^6` at `r = 5 lambda_p` with `lambda_p = 0.78 um`
/// and `gamma_p = 2 pi x 6.07 MHz` gives 2.342.
pub const DEFAULT_V_NN: f64 = 2.34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Scan,
    Contours,
    Scaling,
    RabiRatio,
    SteadyState,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scan => "scan",
            Command::Contours => "contours",
            Command::Scaling => "scaling",
            Command::RabiRatio => "rabi-ratio",
            Command::SteadyState => "steady-state",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Command::Scan,
            Command::Contours,
            Command::Scaling,
            Command::RabiRatio,
            Command::SteadyState,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourRequestKind {
    /// Zero set (or any level) of the signed field.
    Level,
    /// Boundary of `field / G2 >= value`.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourRequest {
    pub field: FieldKind,
    pub kind: ContourRequestKind,
    pub value: f64,
}

impl ContourRequest {
    pub fn level(field: FieldKind, value: f64) -> Self {
        Self {
            field,
            kind: ContourRequestKind::Level,
            value,
        }
    }

    pub fn ratio(field: FieldKind, value: f64) -> Self {
        Self {
            field,
            kind: ContourRequestKind::Ratio,
            value,
        }
    }

    /// `C2_contour.txt`, `C3_ratio10_contour.txt`.
    pub fn file_name(&self) -> String {
        match self.kind {
            ContourRequestKind::Level if self.value == 0.0 => format!("{}_contour.txt", self.field),
            ContourRequestKind::Level => format!("{}_level{}_contour.txt", self.field, self.value),
            ContourRequestKind::Ratio => format!("{}_ratio{}_contour.txt", self.field, self.value),
        }
    }

    /// Field the contour is traced on.
    pub fn source_field(&self) -> FieldKind {
        match (self.kind, self.field) {
            (ContourRequestKind::Ratio, FieldKind::C(n)) => FieldKind::CRatio(n),
            (_, f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    pub s1: f64,
    pub s2: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { s1: 1.0, s2: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiRatioParams {
    pub omega_c_1: f64,
    pub omega_c_2: f64,
}

impl Default for RabiRatioParams {
    fn default() -> Self {
        Self {
            omega_c_1: 0.01,
            omega_c_2: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugFlags {
    #[serde(default)]
    pub dump_liouvillian: bool,
    #[serde(default)]
    pub dump_rho: bool,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub command: Command,
    pub system: SystemSpec,
    pub grid: usize,
    pub fields: Vec<FieldKind>,
    pub contours: Vec<ContourRequest>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub emit_heatmaps: bool,
    /// Replace the interaction by `None` (uncoupled control runs).
    pub interaction_off: bool,
    pub scaling: ScalingParams,
    pub rabi_ratio: RabiRatioParams,
    pub debug: DebugFlags,
}

impl RunConfig {
    /// System actually simulated, with `interaction_off` applied.
    pub fn effective_system(&self) -> SystemSpec {
        let mut s = self.system.clone();
        if self.interaction_off {
            s.interaction = Interaction::None;
        }
        s
    }

    /// Display cap for `g2norm`: 2 for dipole-coupled, 20 for ladder atoms.
    pub fn g2_cap(&self) -> f64 {
        match self.system.scheme {
            LevelScheme::TwoLevel => 2.0,
            LevelScheme::ThreeLevelLadder => 20.0,
        }
    }
}

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> RunConfig,
}

impl Scenario {
    pub fn config(&self) -> RunConfig {
        (self.build)()
    }
}

fn base(
    name: &str,
    command: Command,
    system: SystemSpec,
    contours: Vec<ContourRequest>,
) -> RunConfig {
    RunConfig {
        scenario: Some(name.to_string()),
        command,
        system,
        grid: DEFAULT_GRID_POINTS,
        fields: FieldKind::DEFAULT_SET.to_vec(),
        contours,
        output_dir: PathBuf::from("out"),
        workers: 1,
        emit_heatmaps: false,
        interaction_off: false,
        scaling: ScalingParams::default(),
        rabi_ratio: RabiRatioParams::default(),
        debug: DebugFlags::default(),
    }
}

fn ddi_spec(spacings: &[f64]) -> SystemSpec {
    SystemSpec::two_level_chain(spacings, 0.01, Interaction::Dipole)
}

fn rri_spec() -> SystemSpec {
    SystemSpec::ladder_chain(
        &[5.0, 5.0, 5.0],
        0.01,
        1.0,
        0.05,
        Interaction::Rydberg(RydbergStrength::Dimensionless { v_nn: DEFAULT_V_NN }),
    )
}

fn ddi_contours() -> Vec<ContourRequest> {
    vec![
        ContourRequest::level(FieldKind::C(2), 0.0),
        ContourRequest::level(FieldKind::C(4), 0.0),
        ContourRequest::ratio(FieldKind::C(3), 10.0),
        ContourRequest::ratio(FieldKind::C(4), 10.0),
    ]
}

fn rri_contours() -> Vec<ContourRequest> {
    vec![
        ContourRequest::level(FieldKind::C(2), 0.0),
        ContourRequest::level(FieldKind::C(4), 0.0),
        ContourRequest::ratio(FieldKind::C(3), 5.0),
    ]
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "ddi_fig2",
        description: "4 dipole-coupled two-level atoms, spacing lambda_p, Omega_p = 0.01",
        build: || base("ddi_fig2", Command::Scan, ddi_spec(&[1.0, 1.0, 1.0]), ddi_contours()),
    },
    Scenario {
        name: "rri_fig6",
        description: "4 Rydberg ladder atoms, spacing 5 lambda_p, Omega_p = 0.01, Omega_c = 1, gamma_c = 0.05",
        build: || base("rri_fig6", Command::Scan, rri_spec(), rri_contours()),
    },
    Scenario {
        name: "ddi_random",
        description: "dipole-coupled chain with spacings 1.3, 0.6, 0.4 lambda_p",
        build: || {
            let contours = vec![ContourRequest::level(FieldKind::C(2), 0.0), ContourRequest::level(FieldKind::C(4), 0.0)];
            base("ddi_random", Command::Scan, ddi_spec(&[1.3, 0.6, 0.4]), contours)
        },
    },
    Scenario {
        name: "scaling_fig8a",
        description: "G2 at spacing lambda_p over G2 at 1.5 lambda_p in rescaled angles",
        build: || base("scaling_fig8a", Command::Scaling, ddi_spec(&[1.0, 1.0, 1.0]), Vec::new()),
    },
    Scenario {
        name: "rri_ratio_fig8b",
        description: "G2 at Omega_c = 0.01 over G2 at Omega_c = 0.05 for the Rydberg chain",
        build: || base("rri_ratio_fig8b", Command::RabiRatio, rri_spec(), Vec::new()),
    },
];

pub fn scenario(name: &str) -> Result<RunConfig> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .map(Scenario::config)
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_string(),
            available: SCENARIOS
                .iter()
                .map(|s| s.name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<LevelScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacings: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interaction: Option<Interaction>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fields: Option<Vec<FieldKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    emit_heatmaps: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interaction_off: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contours: Option<Vec<ContourRequest>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<RawSystem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<ScalingParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rabi_ratio: Option<RabiRatioParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    debug: Option<DebugFlags>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field_err(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigField {
        field: field.to_string(),
        message: message.into(),
    }
}

fn check_rate(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(field_err(
            field,
            format!("must be finite and non-negative, got {v}"),
        ));
    }
    Ok(())
}

fn resolve_system(base: Option<SystemSpec>, raw: RawSystem) -> Result<SystemSpec> {
    if raw.spacings.is_some() && raw.positions.is_some() {
        return Err(field_err(
            "system",
            "give either `spacings` or `positions`, not both",
        ));
    }
    let positions = match (raw.spacings, raw.positions) {
        (Some(s), _) => {
            if let Some(bad) = s.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
                return Err(field_err(
                    "system.spacings",
                    format!("spacings must be positive, got {bad}"),
                ));
            }
            Some(chain_positions(&s))
        }
        (None, p) => p,
    };
    let missing = |f: &str| field_err(&format!("system.{f}"), "required when no scenario is given");
    let spec = match base {
        Some(b) => SystemSpec {
            scheme: raw.scheme.unwrap_or(b.scheme),
            positions: positions.unwrap_or(b.positions),
            omega_p: raw.omega_p.unwrap_or(b.omega_p),
            omega_c: raw.omega_c.unwrap_or(b.omega_c),
            gamma_c: raw.gamma_c.unwrap_or(b.gamma_c),
            interaction: raw.interaction.unwrap_or(b.interaction),
        },
        None => SystemSpec {
            scheme: raw.scheme.ok_or_else(|| missing("scheme"))?,
            positions: positions.ok_or_else(|| missing("spacings"))?,
            omega_p: raw.omega_p.ok_or_else(|| missing("omega_p"))?,
            omega_c: raw.omega_c.unwrap_or(0.0),
            gamma_c: raw.gamma_c.unwrap_or(0.0),
            interaction: raw.interaction.ok_or_else(|| missing("interaction"))?,
        },
    };
    check_rate("system.omega_p", spec.omega_p)?;
    check_rate("system.omega_c", spec.omega_c)?;
    check_rate("system.gamma_c", spec.gamma_c)?;
    spec.validate()
        .map_err(|e| field_err("system", e.to_string()))?;
    Ok(spec)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let preset = raw.scenario.as_deref().map(scenario).transpose()?;
    let mut cfg = match preset {
        Some(p) => p,
        None => {
            let system = resolve_system(None, raw.system.unwrap_or_default())?;
            let mut c = base("", Command::Scan, system, Vec::new());
            c.scenario = None;
            return finish(
                c,
                RawConfig {
                    system: None,
                    ..raw
                },
            );
        }
    };
    if let Some(sys) = raw.system {
        cfg.system = resolve_system(Some(cfg.system.clone()), sys)?;
    }
    finish(
        cfg,
        RawConfig {
            system: None,
            ..raw
        },
    )
}

fn finish(mut cfg: RunConfig, raw: RawConfig) -> Result<RunConfig> {
    if let Some(c) = raw.command {
        cfg.command = c;
    }
    if let Some(g) = raw.grid {
        cfg.grid = g;
    }
    if let Some(f) = raw.fields {
        cfg.fields = f;
    }
    if let Some(d) = raw.output_dir {
        cfg.output_dir = d;
    }
    if let Some(w) = raw.workers {
        cfg.workers = w;
    }
    if let Some(h) = raw.emit_heatmaps {
        cfg.emit_heatmaps = h;
    }
    if let Some(i) = raw.interaction_off {
        cfg.interaction_off = i;
    }
    if let Some(c) = raw.contours {
        cfg.contours = c;
    }
    if let Some(s) = raw.scaling {
        cfg.scaling = s;
    }
    if let Some(r) = raw.rabi_ratio {
        cfg.rabi_ratio = r;
    }
    if let Some(d) = raw.debug {
        cfg.debug = d;
    }
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &RunConfig) -> Result<()> {
    if cfg.grid < 2 {
        return Err(field_err(
            "grid",
            format!("needs at least 2 points, got {}", cfg.grid),
        ));
    }
    if cfg.workers == 0 {
        return Err(field_err("workers", "must be at least 1"));
    }
    for f in &cfg.fields {
        if let FieldKind::GPart(n) | FieldKind::UPart(n) | FieldKind::C(n) | FieldKind::CRatio(n) =
            f
        {
            if !(2..=4).contains(n) {
                return Err(field_err("fields", format!("order {n} outside 2..=4")));
            }
        }
    }
    for c in &cfg.contours {
        if c.value.is_nan() {
            return Err(field_err("contours.value", "must not be NaN"));
        }
        if c.kind == ContourRequestKind::Ratio && !matches!(c.field, FieldKind::C(_)) {
            return Err(field_err(
                "contours.field",
                format!("ratio contours need a C field, got {}", c.field),
            ));
        }
    }
    let s = cfg.scaling;
    if !(s.s1 > 0.0 && s.s1 <= s.s2 && s.s2.is_finite()) {
        return Err(field_err(
            "scaling",
            format!("need 0 < s1 <= s2, got s1 = {}, s2 = {}", s.s1, s.s2),
        ));
    }
    check_rate("rabi_ratio.omega_c_1", cfg.rabi_ratio.omega_c_1)?;
    check_rate("rabi_ratio.omega_c_2", cfg.rabi_ratio.omega_c_2)?;
    if cfg.command == Command::RabiRatio && cfg.system.scheme != LevelScheme::ThreeLevelLadder {
        return Err(field_err(
            "command",
            "rabi-ratio needs a three-level-ladder system",
        ));
    }
    cfg.system
        .validate()
        .map_err(|e| field_err("system", e.to_string()))
}

/// Self-contained TOML for `cfg`; `parse_config(&to_toml(cfg)) == cfg`.
pub fn to_toml(cfg: &RunConfig) -> String {
    let raw = RawConfig {
        scenario: cfg.scenario.clone(),
        command: Some(cfg.command),
        grid: Some(cfg.grid),
        fields: Some(cfg.fields.clone()),
        output_dir: Some(cfg.output_dir.clone()),
        workers: Some(cfg.workers),
        emit_heatmaps: Some(cfg.emit_heatmaps),
        interaction_off: Some(cfg.interaction_off),
        contours: Some(cfg.contours.clone()),
        system: Some(RawSystem {
            scheme: Some(cfg.system.scheme),
            spacings: None,
            positions: Some(cfg.system.positions.clone()),
            omega_p: Some(cfg.system.omega_p),
            omega_c: Some(cfg.system.omega_c),
            gamma_c: Some(cfg.system.gamma_c),
            interaction: Some(cfg.system.interaction),
        }),
        scaling: Some(cfg.scaling),
        rabi_ratio: Some(cfg.rabi_ratio),
        debug: Some(cfg.debug),
    };
    toml::to_string(&raw).expect("config is representable as TOML")
}
