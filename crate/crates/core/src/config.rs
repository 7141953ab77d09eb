//! JSON run configuration.
//!
//! Every field has a default and unknown keys are rejected, so a config is
//! fully validated before any compute starts. The README documents the
//! schema field by field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HjError, Result};
use crate::geometry::{DefectSpec, HoleShape, PerforatedDomain, Rect};
use crate::hamiltonians::HamiltonianModel;
use crate::solvers::InitialData;

const OP: &str = "config::RunConfig";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Free,
    KineticWeight,
    KineticPlusPotential,
    StripeWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: FamilyName,
    /// Weight deep inside holes (`kinetic_weight`).
    pub alpha: f64,
    /// Potential height inside holes (`kinetic_plus_potential`).
    pub beta: f64,
    /// Ramp width of the hole profiles.
    pub rho: f64,
    /// Lipschitz constant of `g` used for `C₀`; defaults to `|p|` of the initial datum.
    pub lip_g: Option<f64>,
    /// Overrides `C₀` (and with it the clamp radius and `K₀`).
    pub c0: Option<f64>,
    /// Overrides the stencil speed bound `M₀`.
    pub m0: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { family: FamilyName::Free, alpha: 2.0, beta: 0.5, rho: 0.05, lip_g: None, c0: None, m0: Some(3.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoleConfig {
    None,
    Disc { radius: f64 },
    Square { half_width: f64 },
}

impl Default for HoleConfig {
    fn default() -> Self {
        HoleConfig::Disc { radius: 0.25 }
    }
}

impl From<HoleConfig> for HoleShape {
    fn from(h: HoleConfig) -> Self {
        match h {
            HoleConfig::None => HoleShape::None,
            HoleConfig::Disc { radius } => HoleShape::Disc { radius },
            HoleConfig::Square { half_width } => HoleShape::Square { half_width },
        }
    }
}

/// Hole scale as a function of `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaConfig {
    /// `η = value` for every `ε`.
    Fixed { value: f64 },
    /// `η = coefficient·ε^exponent`.
    Power { coefficient: f64, exponent: f64 },
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig::Fixed { value: 1.0 }
    }
}

impl EtaConfig {
    pub fn eta(&self, eps: f64) -> f64 {
        match *self {
            EtaConfig::Fixed { value } => value,
            EtaConfig::Power { coefficient, exponent } => coefficient * eps.powf(exponent),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectConfig {
    #[default]
    None,
    Singleton0,
    LineE1,
    SquaresE1,
    Explicit(Vec<[i64; 2]>),
}

impl From<&DefectConfig> for DefectSpec {
    fn from(d: &DefectConfig) -> Self {
        match d {
            DefectConfig::None => DefectSpec::None,
            DefectConfig::Singleton0 => DefectSpec::Singleton0,
            DefectConfig::LineE1 => DefectSpec::LineE1,
            DefectConfig::SquaresE1 => DefectSpec::SquaresE1,
            DefectConfig::Explicit(v) => DefectSpec::Explicit(v.iter().copied().collect()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub hole: HoleConfig,
    pub eta: EtaConfig,
    pub defects: DefectConfig,
}

impl DomainConfig {
    /// Unit-scale domain at `ε` (the hole scaled by `η(ε)`).
    pub fn at(&self, eps: f64) -> Result<PerforatedDomain> {
        PerforatedDomain::new(self.hole.into(), self.eta.eta(eps), (&self.defects).into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Node spacing of the oscillating solvers, in fast (cell) units.
    pub h: f64,
    /// Time step in fast units; defaults to `h`.
    pub dt: Option<f64>,
    /// Spacing of the metric-route lattices.
    pub metric_h: f64,
    /// Spacing of the cell-route lattice.
    pub cell_h: f64,
    /// Time step of the cell route; defaults to `cell_h`.
    pub cell_dt: Option<f64>,
    /// Box in fast cells `[[x0, y0], [x1, y1]]` for defect solves; derived when absent.
    pub bbox: Option<[[i64; 2]; 2]>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { h: 0.02, dt: None, metric_h: 0.05, cell_h: 0.05, cell_dt: None, bbox: None }
    }
}

impl GridConfig {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.h)
    }
    pub fn cell_dt(&self) -> f64 {
        self.cell_dt.unwrap_or(self.cell_h)
    }
    pub fn bbox_rect(&self) -> Option<Rect> {
        self.bbox.map(|[lo, hi]| Rect::cells(lo, hi))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Effective,
    Solve,
    Rate,
    Dilute,
    Defect,
    Validate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    #[default]
    Ueps,
    TildeUeps,
    Weps,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Linear { p: [f64; 2] },
    Zero,
    Constant { c: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Linear { p: [-1.0, 0.0] }
    }
}

impl From<InitialConfig> for InitialData {
    fn from(g: InitialConfig) -> Self {
        match g {
            InitialConfig::Linear { p } => InitialData::linear(p),
            InitialConfig::Zero => InitialData::zero(),
            InitialConfig::Constant { c } => InitialData::constant(c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub epsilons: Vec<f64>,
    pub p_list: Vec<[f64; 2]>,
    pub k_list: Vec<u32>,
    pub lambda_list: Vec<f64>,
    /// Horizon `T`.
    pub horizon: f64,
    /// Probe times; each must be a kept multiple of `ε·dt`.
    pub times: Vec<f64>,
    /// Probe points (slow coordinates); defaults to a 5×5 grid in the unit ball.
    pub probes: Option<Vec<[f64; 2]>>,
    pub g: InitialConfig,
    /// Radius and side count of the `v`-grid for `L̄`.
    pub v_radius: f64,
    pub v_grid: usize,
    /// Solver used by `solve`.
    pub solver: SolverName,
    /// Tolerance of the inequality checks.
    pub tol: f64,
    /// Also run the hole-free control solve of the rate experiment.
    pub floor_run: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Effective,
            epsilons: vec![0.25, 0.125, 0.0625],
            p_list: vec![[-1.0, 0.0], [1.0, 0.0]],
            k_list: vec![2, 4, 8],
            lambda_list: vec![0.2, 0.1, 0.05, 0.025],
            horizon: 1.0,
            times: vec![0.5, 1.0],
            probes: None,
            g: InitialConfig::default(),
            v_radius: 2.0,
            v_grid: 9,
            solver: SolverName::Ueps,
            tol: 0.05,
            floor_run: true,
        }
    }
}

impl ExperimentConfig {
    /// Configured probes or the default 5×5 grid over `[-1/√2, 1/√2]²`.
    pub fn probe_points(&self) -> Vec<[f64; 2]> {
        self.probes.clone().unwrap_or_else(|| {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut out = Vec::with_capacity(25);
            for j in 0..5 {
                for i in 0..5 {
                    out.push([-s + i as f64 * s / 2.0, -s + j as f64 * s / 2.0]);
                }
            }
            out
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Seeds the sampled diagnostics only; every DP is deterministic.
    pub seed: u64,
    /// Record wall-clock runtimes (otherwise written as 0 for reproducible files).
    pub timing: bool,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), seed: 0, timing: false, threads: 0 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HjError::Json { op: OP, source: e })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HjError::Io { op: OP, source: e })?;
        Self::from_json(&text)
    }

    /// Checks ranges that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: String| Err(HjError::invalid(OP, m));
        if e.epsilons.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return bad(format!("epsilons must lie in (0, 1], got {:?}", e.epsilons));
        }
        if e.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("epsilons must be strictly decreasing".into());
        }
        if !(e.horizon > 0.0) || e.times.iter().any(|&t| !(t > 0.0 && t <= e.horizon + 1e-12)) {
            return bad(format!("need horizon > 0 and probe times in (0, horizon], got {} / {:?}", e.horizon, e.times));
        }
        if !(e.tol >= 0.0) {
            return bad(format!("tol = {} must be nonnegative", e.tol));
        }
        for (name, h) in
            [("grid.h", self.grid.h), ("grid.metric_h", self.grid.metric_h), ("grid.cell_h", self.grid.cell_h)]
        {
            if !(h > 0.0 && h <= 1.0) {
                return bad(format!("{name} = {h} must lie in (0, 1]"));
            }
        }
        HoleShape::from(self.domain.hole).validate()?;
        self.build_model(&self.domain.at(e.epsilons.first().copied().unwrap_or(1.0))?)?;
        let mut grids = Vec::new();
        match e.kind {
            ExperimentKind::Effective => {
                grids.extend([("grid.metric_h", self.grid.metric_h), ("grid.cell_h", self.grid.cell_h)])
            }
            ExperimentKind::Rate => grids.extend([("grid.h", self.grid.h), ("grid.metric_h", self.grid.metric_h)]),
            ExperimentKind::Solve | ExperimentKind::Dilute | ExperimentKind::Defect => {
                grids.push(("grid.h", self.grid.h))
            }
            ExperimentKind::Validate => {}
        }
        for &eps in &e.epsilons {
            let hole = self.domain.at(eps)?.effective_hole();
            for &(name, h) in &grids {
                if h > hole.feature_size() / 4.0 + 1e-12 {
                    return Err(HjError::UnresolvedHole {
                        op: OP,
                        detail: format!(
                            "{name} = {h} exceeds a quarter of the hole feature size {:.6} at epsilon = {eps}",
                            hole.feature_size()
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn initial_data(&self) -> InitialData {
        self.experiment.g.into()
    }

    /// The Hamiltonian on `dom` (its hole drives the in-hole profiles).
    pub fn build_model(&self, dom: &PerforatedDomain) -> Result<HamiltonianModel> {
        let m = &self.model;
        let hole = dom.effective_hole();
        let mut model = match m.family {
            FamilyName::Free => HamiltonianModel::free(),
            FamilyName::KineticWeight => HamiltonianModel::kinetic_weight(hole, m.alpha, m.rho)?,
            FamilyName::KineticPlusPotential => HamiltonianModel::kinetic_plus_potential(hole, m.beta, m.rho)?,
            FamilyName::StripeWeight => HamiltonianModel::stripe_weight(),
        };
        model = model.with_lip_g(m.lip_g.unwrap_or(self.initial_data().lip))?;
        if let Some(c0) = m.c0 {
            model = model.with_c0(c0)?;
        }
        if let Some(m0) = m.m0 {
            model = model.with_m0(m0)?;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.experiment.kind, ExperimentKind::Effective);
        assert_eq!(c.experiment.probe_points().len(), 25);
        let e = RunConfig::from_json(r#"{"model": {"famly": "free"}}"#).unwrap_err();
        assert!(e.is_config_error());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn tagged_sections_parse() {
        let c = RunConfig::from_json(
            r#"{"domain": {"hole": {"shape": "square", "half_width": 0.46}, "eta": {"schedule": "power", "coefficient": 1.0, "exponent": 0.5},
                "defects": {"explicit": [[0, 0], [3, 0]]}},
                "experiment": {"kind": "defect", "g": {"kind": "zero"}}}"#,
        )
        .unwrap();
        assert_eq!(c.domain.eta.eta(0.25), 0.5);
        assert!(matches!(c.domain.defects, DefectConfig::Explicit(ref v) if v.len() == 2));
        assert_eq!(c.initial_data(), InitialData::zero());
    }

    #[test]
    fn range_errors_are_config_errors() {
        let e = RunConfig::from_json(r#"{"experiment": {"epsilons": [0.1, 0.2]}}"#).unwrap_err();
        assert!(e.is_config_error());
        let e = RunConfig::from_json(r#"{"domain": {"hole": {"shape": "disc", "radius": 0.7}}}"#).unwrap_err();
        assert!(e.is_config_error());
        let e = RunConfig::from_json(
            r#"{"domain": {"eta": {"schedule": "power", "coefficient": 1.0, "exponent": 0.5}}, "grid": {"h": 0.1},
                "experiment": {"kind": "dilute"}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("unresolved hole"), "{e}");
    }
}
