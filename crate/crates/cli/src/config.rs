//! Declarative run configuration.
//!
//! One TOML file drives every subcommand; flags only override config keys.
//! Unknown keys are rejected so a typo cannot silently disarm a threshold.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;
use tlab_core::energy::{ElCoefficients, MolecularField};
use tlab_core::flow::FlowConfig;
use tlab_core::suite::{GeneratorKind, VerifyOptions, VerifyThresholds};
use tlab_core::TorusGrid;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub charts: ChartsSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub thresholds: ThresholdsSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub parities: Vec<u8>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 2, sizes: vec![64, 64], lengths: vec![1.0, 1.0], parities: vec![0, 0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChartsSection {
    pub eps_pole: f64,
    pub slack_k: f64,
    pub abs_tol: f64,
}

impl Default for ChartsSection {
    fn default() -> Self {
        ChartsSection { eps_pole: tlab_core::DEFAULT_EPS_POLE, slack_k: 1.0, abs_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub seed_start: u64,
    pub seed_count: u64,
    pub generator: String,
    pub band: usize,
    pub amplitude: f64,
    pub theta_amp: f64,
    pub chi_amp: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            seed_start: 1,
            seed_count: 50,
            generator: "pole_free".into(),
            band: 3,
            amplitude: 0.25,
            theta_amp: 0.9,
            chi_amp: 1.2,
        }
    }
}

impl EnsembleSection {
    pub fn generator_kind(&self) -> Result<GeneratorKind, CliError> {
        match self.generator.as_str() {
            "pole_free" => Ok(GeneratorKind::PoleFree {
                band: self.band,
                theta_amp: self.theta_amp,
                chi_amp: self.chi_amp,
            }),
            "random" => Ok(GeneratorKind::Random { band: self.band, amplitude: self.amplitude }),
            other => Err(CliError::Usage(format!(
                "unknown ensemble generator {other:?} (expected \"pole_free\" or \"random\")"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub cfl: f64,
    pub steps: usize,
    pub record_every: usize,
    /// Explicit dt override; when absent the CFL-saturated step is used.
    pub dt: Option<f64>,
    pub energy_jitter: f64,
    /// Steps between snapshot checkpoints (0 = final state only).
    pub checkpoint_every: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            cfl: 0.2,
            steps: 1000,
            record_every: 10,
            dt: None,
            energy_jitter: 1.0,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsSection {
    pub gamma: f64,
    pub reynolds: f64,
    pub beta: [f64; 3],
    pub mu1: f64,
    pub molecular_field: String,
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        CoefficientsSection {
            gamma: 0.5,
            reynolds: 1.0,
            beta: [1.0, 1.0, 1.0],
            mu1: 1.0,
            molecular_field: "laplacian".into(),
        }
    }
}

impl CoefficientsSection {
    pub fn coefficients(&self) -> ElCoefficients {
        ElCoefficients {
            gamma: self.gamma,
            reynolds: self.reynolds,
            beta1: self.beta[0],
            beta2: self.beta[1],
            beta3: self.beta[2],
            mu1: self.mu1,
        }
    }

    pub fn molecular_field(&self) -> Result<MolecularField, CliError> {
        match self.molecular_field.as_str() {
            "laplacian" => Ok(MolecularField::Laplacian),
            "tension" => Ok(MolecularField::Tension),
            other => Err(CliError::Usage(format!(
                "unknown molecular_field {other:?} (expected \"laplacian\" or \"tension\")"
            ))),
        }
    }
}

/// Armed thresholds; the defaults pin the acceptance tolerances.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsSection {
    pub unit_norm: f64,
    pub eq210_rel: f64,
    pub chart_violations: f64,
    pub frame_recon_sup: Option<f64>,
    pub frame_route_sup: Option<f64>,
    pub eq22_rel: Option<f64>,
    pub eq211_rel: Option<f64>,
    pub d1_rel: Option<f64>,
    pub d2_rel: Option<f64>,
    pub eq213_ratio: Option<f64>,
}

impl Default for ThresholdsSection {
    fn default() -> Self {
        ThresholdsSection {
            unit_norm: 1e-12,
            eq210_rel: 1e-12,
            chart_violations: 0.0,
            frame_recon_sup: None,
            frame_route_sup: None,
            eq22_rel: Some(2e-2),
            eq211_rel: Some(2e-2),
            d1_rel: Some(2e-2),
            d2_rel: Some(2e-2),
            eq213_ratio: Some(1.05),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Rerun the ensemble on a refined grid and report stability.
    pub refine: bool,
    pub refine_factor: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { refine: true, refine_factor: 2 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.thresholds;
        let positive = [
            ("unit_norm", Some(t.unit_norm)),
            ("eq210_rel", Some(t.eq210_rel)),
            ("frame_recon_sup", t.frame_recon_sup),
            ("frame_route_sup", t.frame_route_sup),
            ("eq22_rel", t.eq22_rel),
            ("eq211_rel", t.eq211_rel),
            ("d1_rel", t.d1_rel),
            ("d2_rel", t.d2_rel),
            ("eq213_ratio", t.eq213_ratio),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(CliError::Usage(format!("threshold {name} must be > 0, got {v}")));
                }
            }
        }
        if t.chart_violations < 0.0 {
            return Err(CliError::Usage("threshold chart_violations must be >= 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        TorusGrid::new(
            self.grid.dim,
            &self.grid.sizes,
            &self.grid.lengths,
            &self.grid.parities,
        )
        .map_err(CliError::from)
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            eps_pole: self.charts.eps_pole,
            m_values: vec![1.0, 2.0, 4.0],
            chart_slack_k: self.charts.slack_k,
            chart_abs_tol: self.charts.abs_tol,
            thresholds: VerifyThresholds {
                unit_norm: self.thresholds.unit_norm,
                eq210_rel: self.thresholds.eq210_rel,
                chart_violations: self.thresholds.chart_violations,
                frame_recon_sup: self.thresholds.frame_recon_sup,
                frame_route_sup: self.thresholds.frame_route_sup,
                eq22_rel: self.thresholds.eq22_rel,
                eq211_rel: self.thresholds.eq211_rel,
                d1_rel: self.thresholds.d1_rel,
                d2_rel: self.thresholds.d2_rel,
                eq213_ratio: self.thresholds.eq213_ratio,
            },
        }
    }

    pub fn flow_config(&self, grid: &TorusGrid) -> FlowConfig {
        let mut cfg = FlowConfig::with_cfl_dt(
            grid,
            self.flow.cfl,
            self.flow.steps,
            self.flow.record_every,
        );
        if let Some(dt) = self.flow.dt {
            cfg.dt = dt;
        }
        cfg.eps_pole = self.charts.eps_pole;
        cfg.energy_jitter = self.flow.energy_jitter;
        cfg
    }
}
