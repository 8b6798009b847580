//! Experiment configuration, read from a TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tdse_core::potentials::catalog::{builtin, BUILTIN};
use tdse_core::potentials::{FamilySpec, InteractionFamily, PotentialFamily};
use tdse_core::propagator::PropagatorConfig;
use tdse_core::sensitivity::QuotientKind;
use tdse_core::symbolcalc::CutoffProfile;
use tdse_core::{make_grid, SpatialGrid, WaveFunction};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Validate,
    Propagate,
    EpsSweep,
    Parametrix,
    Commutator,
    Sensitivity,
    Continuity,
    TwoParticle,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Validate,
        Suite::Propagate,
        Suite::EpsSweep,
        Suite::Parametrix,
        Suite::Commutator,
        Suite::Sensitivity,
        Suite::Continuity,
        Suite::TwoParticle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Validate => "validate",
            Suite::Propagate => "propagate",
            Suite::EpsSweep => "eps_sweep",
            Suite::Parametrix => "parametrix",
            Suite::Commutator => "commutator",
            Suite::Sensitivity => "sensitivity",
            Suite::Continuity => "continuity",
            Suite::TwoParticle => "two_particle",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub family: FamilyConfig,
    pub grid: GridConfig,
    pub initial: InitialState,
    pub propagator: PropagatorConfig,
    pub validate: ValidateConfig,
    pub propagate: PropagateConfig,
    pub eps_sweep: EpsSweepConfig,
    pub parametrix: ParametrixConfig,
    pub commutator: CommutatorConfig,
    pub sensitivity: SensitivityConfig,
    pub continuity: ContinuityConfig,
    pub two_particle: TwoParticleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            suites: Suite::ALL.to_vec(),
            family: FamilyConfig::default(),
            grid: GridConfig::default(),
            initial: InitialState::default(),
            propagator: PropagatorConfig::default(),
            validate: ValidateConfig::default(),
            propagate: PropagateConfig::default(),
            eps_sweep: EpsSweepConfig::default(),
            parametrix: ParametrixConfig::default(),
            commutator: CommutatorConfig::default(),
            sensitivity: SensitivityConfig::default(),
            continuity: ContinuityConfig::default(),
            two_particle: TwoParticleConfig::default(),
        }
    }
}

/// Either a builtin family by name or a custom expression family;
/// [`DEFAULT_FAMILY`] when neither is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub builtin: Option<String>,
    pub custom: Option<FamilySpec>,
    pub rho: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { builtin: None, custom: None, rho: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, half_width: 10.0, points: 256 }
    }
}

/// Gaussian wave packet `exp(-|x - c|^2 / 2w^2 + i k.x)`, normalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub center: [f64; 2],
    pub width: f64,
    pub momentum: [f64; 2],
}

impl Default for InitialState {
    fn default() -> Self {
        Self { center: [0.5, 0.0], width: 0.8, momentum: [1.0, 0.0] }
    }
}

impl InitialState {
    pub fn centered(width: f64) -> Self {
        Self { center: [0.0, 0.0], width, momentum: [0.0, 0.0] }
    }

    pub fn at_rest(x: f64, width: f64) -> Self {
        Self { center: [x, 0.0], width, momentum: [0.0, 0.0] }
    }

    pub fn build(&self, grid: &SpatialGrid) -> WaveFunction {
        WaveFunction::gaussian(grid, self.center, self.width, self.momentum)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub half_width: f64,
    pub points: usize,
    pub t_samples: usize,
    pub t_max: f64,
    pub rho_samples: usize,
    pub alpha_max: u32,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { half_width: 10.0, points: 256, t_samples: 9, t_max: 2.0 * std::f64::consts::PI, rho_samples: 4, alpha_max: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    pub orders: Vec<i32>,
    pub drift_tol: f64,
    pub fail_on_boundary: bool,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        Self { orders: vec![1, 2], drift_tol: 1e-8, fail_on_boundary: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSweepConfig {
    pub family: String,
    pub half_width: f64,
    pub points: usize,
    pub t_final: f64,
    pub initial: InitialState,
    pub eps: Vec<f64>,
    /// Cutoff shift; the admissible minimum from the ellipticity scan when absent.
    pub mu: Option<f64>,
    pub profile: CutoffProfile,
    pub order: i32,
    pub final_tol: f64,
    pub stability_ratio: f64,
}

impl Default for EpsSweepConfig {
    fn default() -> Self {
        Self {
            family: "harmonic".into(),
            half_width: 10.0,
            points: 256,
            t_final: 0.1,
            initial: InitialState::centered(1.0),
            eps: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            mu: None,
            profile: CutoffProfile::Gaussian,
            order: 1,
            final_tol: 1e-3,
            stability_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixConfig {
    pub family: String,
    pub half_width: f64,
    pub points: usize,
    pub t: f64,
    /// Shifts `mu - C1` at which the residual is measured.
    pub offsets: Vec<f64>,
    pub probes: usize,
    pub power_iterations: usize,
    pub target_slope: f64,
    pub slope_tol: f64,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        Self {
            family: "quartic".into(),
            half_width: 6.0,
            points: 128,
            t: 0.0,
            offsets: (0..6).map(|i| 4.0 * 10f64.powf(i as f64 / 5.0)).collect(),
            probes: 16,
            power_iterations: 30,
            target_slope: -0.5,
            slope_tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommutatorConfig {
    pub t: f64,
    pub mu: Option<f64>,
    pub eps: Vec<f64>,
    pub probes: usize,
    pub power_iterations: usize,
    pub max_growth: f64,
}

impl Default for CommutatorConfig {
    fn default() -> Self {
        Self {
            t: 0.0,
            mu: None,
            eps: (0..=6).map(|k| 0.5f64.powi(k)).collect(),
            probes: 16,
            power_iterations: 30,
            max_growth: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub family: String,
    pub half_width: f64,
    pub points: usize,
    pub t_final: f64,
    pub initial: InitialState,
    pub taus: Vec<f64>,
    pub order: i32,
    pub kind: QuotientKind,
    pub min_order: f64,
    /// Parameters at which `max_t ||w||_0 / ||u0||_1` is compared.
    pub rhos: Vec<f64>,
    /// Allowed relative deviation of that constant from its value at `family.rho`.
    pub constant_tol: f64,
    pub quotient_factor: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            family: "anharmonic".into(),
            half_width: 8.0,
            points: 128,
            t_final: 2.0,
            initial: InitialState::at_rest(0.5, 0.8),
            taus: vec![1e-1, 1e-2, 1e-3],
            order: 0,
            kind: QuotientKind::Central,
            min_order: 1.8,
            rhos: vec![0.5, 1.0, 2.0],
            constant_tol: 0.5,
            quotient_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityConfig {
    pub family: String,
    pub half_width: f64,
    pub points: usize,
    pub t_final: f64,
    pub initial: InitialState,
    pub deltas: Vec<f64>,
    pub order: i32,
    /// Smallest accepted log-log slope of the modulus; 1 is Lipschitz.
    pub min_slope: f64,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            family: "anharmonic".into(),
            half_width: 8.0,
            points: 128,
            t_final: 1.0,
            initial: InitialState::at_rest(0.5, 0.8),
            deltas: vec![1e-1, 3e-2, 1e-2, 3e-3],
            order: 0,
            min_slope: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoParticleConfig {
    /// Second particle's builtin family; the first particle's family when absent.
    pub second: Option<String>,
    pub interaction: String,
    pub interaction_growth_order: f64,
    pub interaction_delta: f64,
    pub half_width: f64,
    pub points: usize,
    pub centers: [f64; 2],
    pub width: f64,
    pub orders: Vec<i32>,
    pub drift_tol: f64,
    pub factorization: bool,
    pub factorization_tol: f64,
}

impl Default for TwoParticleConfig {
    fn default() -> Self {
        Self {
            second: None,
            interaction: "0.1*(1 + x^2)".into(),
            interaction_growth_order: 0.0,
            interaction_delta: 1.0,
            half_width: 6.0,
            points: 64,
            centers: [0.5, -0.5],
            width: 0.8,
            orders: vec![1],
            drift_tol: 1e-7,
            factorization: true,
            factorization_tol: 1e-6,
        }
    }
}

pub const DEFAULT_FAMILY: &str = "confined_quartic";

/// Family name meaning "use the `[family]` section".
pub const INHERIT: &str = "inherit";

/// Everything a suite with its own family, grid and horizon needs.
pub struct SuiteSetup {
    pub family: PotentialFamily,
    pub grid: SpatialGrid,
    pub propagator: PropagatorConfig,
    pub initial: WaveFunction,
}

fn field_error(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolves the family for the experiment grid's dimension.
    pub fn potential_family(&self) -> Result<PotentialFamily, CliError> {
        self.family_for_dim(self.grid.dim)
    }

    pub fn family_for_dim(&self, dim: usize) -> Result<PotentialFamily, CliError> {
        match (&self.family.builtin, &self.family.custom) {
            (Some(_), Some(_)) => Err(field_error("family", "give either `builtin` or `custom`, not both")),
            (None, None) => Ok(builtin(DEFAULT_FAMILY, dim)?),
            (Some(name), None) => builtin(name, dim).map_err(|_| {
                field_error("family.builtin", format!("unknown builtin family `{name}` (known: {})", BUILTIN.join(", ")))
            }),
            (None, Some(spec)) => {
                if spec.dim != dim {
                    return Err(field_error(
                        "family.custom.dim",
                        format!("family is {}-dimensional but the grid is {dim}-dimensional", spec.dim),
                    ));
                }
                PotentialFamily::from_spec(spec).map_err(|e| field_error("family.custom", e))
            }
        }
    }

    /// Family for a suite section: a builtin name or [`INHERIT`].
    pub fn suite_family(&self, section: &str, name: &str) -> Result<PotentialFamily, CliError> {
        if name == INHERIT {
            return self.potential_family();
        }
        builtin(name, self.grid.dim).map_err(|_| {
            field_error(
                &format!("{section}.family"),
                format!("unknown builtin family `{name}` (known: {}, or `{INHERIT}`)", BUILTIN.join(", ")),
            )
        })
    }

    pub fn suite_setup(
        &self,
        section: &str,
        family: &str,
        half_width: f64,
        points: usize,
        t_final: f64,
        initial: &InitialState,
    ) -> Result<SuiteSetup, CliError> {
        let family = self.suite_family(section, family)?;
        let (lo, hi) = family.rho_range();
        if !(self.family.rho >= lo && self.family.rho <= hi) {
            return Err(field_error(
                "family.rho",
                format!("{} outside the range [{lo}, {hi}] of `{}` used by {section}", self.family.rho, family.name()),
            ));
        }
        let grid = make_grid(self.grid.dim, half_width, points).map_err(|e| field_error(section, e))?;
        let propagator = PropagatorConfig { t_final, ..self.propagator.clone() };
        propagator.steps().map_err(|e| field_error(&format!("{section}.t_final"), e))?;
        if !(initial.width > 0.0) {
            return Err(field_error(&format!("{section}.initial.width"), "must be positive"));
        }
        let initial = initial.build(&grid);
        Ok(SuiteSetup { family, grid, propagator, initial })
    }

    pub fn eps_sweep_setup(&self) -> Result<SuiteSetup, CliError> {
        let e = &self.eps_sweep;
        self.suite_setup("eps_sweep", &e.family, e.half_width, e.points, e.t_final, &e.initial)
    }

    pub fn sensitivity_setup(&self) -> Result<SuiteSetup, CliError> {
        let s = &self.sensitivity;
        self.suite_setup("sensitivity", &s.family, s.half_width, s.points, s.t_final, &s.initial)
    }

    pub fn continuity_setup(&self) -> Result<SuiteSetup, CliError> {
        let c = &self.continuity;
        self.suite_setup("continuity", &c.family, c.half_width, c.points, c.t_final, &c.initial)
    }

    pub fn parametrix_setup(&self) -> Result<(PotentialFamily, SpatialGrid), CliError> {
        let p = &self.parametrix;
        let family = self.suite_family("parametrix", &p.family)?;
        let grid = make_grid(self.grid.dim, p.half_width, p.points).map_err(|e| field_error("parametrix", e))?;
        Ok((family, grid))
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid, CliError> {
        make_grid(self.grid.dim, self.grid.half_width, self.grid.points).map_err(|e| field_error("grid", e))
    }

    pub fn second_family(&self) -> Result<PotentialFamily, CliError> {
        match &self.two_particle.second {
            None => self.family_for_dim(1).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{m} (two_particle uses the family on a line)")),
                other => other,
            }),
            Some(name) => builtin(name, 1).map_err(|_| {
                field_error(
                    "two_particle.second",
                    format!("unknown builtin family `{name}` (known: {})", BUILTIN.join(", ")),
                )
            }),
        }
    }

    pub fn interaction(&self) -> Result<InteractionFamily, CliError> {
        let tp = &self.two_particle;
        InteractionFamily::new("interaction", &tp.interaction, tp.interaction_growth_order, tp.interaction_delta)
            .map_err(|e| field_error("two_particle.interaction", e))
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.suites.is_empty() {
            return Err(field_error("suites", "at least one suite is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.suites {
            if !seen.insert(*s) {
                return Err(field_error("suites", format!("suite `{}` is listed twice", s.name())));
            }
        }
        self.spatial_grid()?;
        let fam = self.potential_family()?;
        let (lo, hi) = fam.rho_range();
        if !(self.family.rho >= lo && self.family.rho <= hi) {
            return Err(field_error("family.rho", format!("{} outside the family's range [{lo}, {hi}]", self.family.rho)));
        }
        if !(self.initial.width > 0.0) {
            return Err(field_error("initial.width", "must be positive"));
        }
        let p = &self.propagator;
        if !(p.dt > 0.0) {
            return Err(field_error("propagator.dt", "must be positive"));
        }
        p.steps().map_err(|e| field_error("propagator.t_final", e))?;
        if p.cutoff.is_some() {
            return Err(field_error("propagator.cutoff", "set cutoffs through the eps_sweep section"));
        }

        let v = &self.validate;
        make_grid(self.grid.dim, v.half_width, v.points).map_err(|e| field_error("validate", e))?;
        if v.t_samples == 0 || v.rho_samples == 0 {
            return Err(field_error("validate", "sample counts must be positive"));
        }
        check_orders("propagate.orders", &self.propagate.orders)?;

        let selected = |s: Suite| self.suites.contains(&s);
        if selected(Suite::EpsSweep) {
            self.eps_sweep_setup()?;
        }
        if selected(Suite::Parametrix) {
            self.parametrix_setup()?;
        }
        if selected(Suite::Sensitivity) {
            self.sensitivity_setup()?;
        }
        if selected(Suite::Continuity) {
            self.continuity_setup()?;
        }

        let e = &self.eps_sweep;
        nonempty("eps_sweep.eps", &e.eps)?;
        if e.eps.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            return Err(field_error("eps_sweep.eps", "every value must lie in (0, 1]"));
        }
        check_orders("eps_sweep.order", &[e.order])?;

        nonempty("parametrix.offsets", &self.parametrix.offsets)?;
        if self.parametrix.offsets.iter().any(|x| !(*x > 0.0)) {
            return Err(field_error("parametrix.offsets", "offsets above C1 must be positive"));
        }
        if self.parametrix.probes == 0 && self.parametrix.power_iterations == 0 {
            return Err(field_error("parametrix.probes", "need probes or power iterations"));
        }

        nonempty("commutator.eps", &self.commutator.eps)?;
        if self.commutator.eps.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            return Err(field_error("commutator.eps", "every value must lie in (0, 1]"));
        }

        let s = &self.sensitivity;
        nonempty("sensitivity.taus", &s.taus)?;
        if s.taus.contains(&0.0) {
            return Err(field_error("sensitivity.taus", "offsets must be nonzero"));
        }
        check_orders("sensitivity.order", &[s.order])?;
        if selected(Suite::Sensitivity) {
            let (lo, hi) = self.suite_family("sensitivity", &s.family)?.rho_range();
            for r in &s.rhos {
                if !(*r >= lo && *r <= hi) {
                    return Err(field_error("sensitivity.rhos", format!("{r} outside the family's range [{lo}, {hi}]")));
                }
            }
        }

        nonempty("continuity.deltas", &self.continuity.deltas)?;
        check_orders("continuity.order", &[self.continuity.order])?;

        if self.suites.contains(&Suite::TwoParticle) {
            let tp = &self.two_particle;
            self.second_family()?;
            self.family_for_dim(1)?;
            self.interaction()?;
            make_grid(1, tp.half_width, tp.points).map_err(|e| field_error("two_particle", e))?;
            if tp.points > tdse_core::multiparticle::MAX_POINTS_PER_PARTICLE {
                return Err(field_error(
                    "two_particle.points",
                    format!("at most {} points per particle", tdse_core::multiparticle::MAX_POINTS_PER_PARTICLE),
                ));
            }
            if tp.orders.iter().any(|a| *a < 0) {
                return Err(field_error("two_particle.orders", "only non-negative orders are available"));
            }
            check_orders("two_particle.orders", &tp.orders)?;
        }
        Ok(())
    }
}

fn nonempty(path: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        Err(field_error(path, "must not be empty"))
    } else {
        Ok(())
    }
}

fn check_orders(path: &str, orders: &[i32]) -> Result<(), CliError> {
    let max = tdse_core::operators::MAX_NORM_ORDER;
    match orders.iter().find(|a| a.abs() > max) {
        Some(a) => Err(field_error(path, format!("order {a} exceeds |a| <= {max}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.suites.len(), 8);
    }

    #[test]
    fn unknown_family_names_the_field() {
        let err = ExperimentConfig::from_toml("[family]\nbuiltin = \"nope\"\n").unwrap_err();
        assert!(err.to_string().contains("family.builtin"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[grid]\npionts = 3\n").unwrap_err();
        assert!(err.to_string().contains("pionts"), "{err}");
    }

    #[test]
    fn empty_suite_list_is_rejected() {
        let err = ExperimentConfig::from_toml("suites = []\n").unwrap_err();
        assert!(err.to_string().starts_with("configuration error: suites"), "{err}");
    }

    #[test]
    fn custom_family_parses() {
        let text = r#"
suites = ["propagate"]
[family.custom]
name = "wide"
dim = 1
scalar = "<x>^4"
growth_order = 1.0
delta = 1.0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.potential_family().unwrap().name(), "wide");
        let bad = text.replace("<x>^4", "x^^4");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("family.custom"));
    }

    #[test]
    fn horizon_must_be_a_multiple_of_dt() {
        let err = ExperimentConfig::from_toml("[propagator]\ndt = 0.3\nt_final = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("propagator.t_final"), "{err}");
    }

    #[test]
    fn suite_family_inherits_on_request() {
        let text = r#"
[family.custom]
name = "wide"
dim = 1
scalar = "rho*<x>^4"
growth_order = 1.0
delta = 1.0
[sensitivity]
family = "inherit"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.sensitivity_setup().unwrap().family.name(), "wide");
        assert_eq!(cfg.eps_sweep_setup().unwrap().family.name(), "harmonic");
    }
}
