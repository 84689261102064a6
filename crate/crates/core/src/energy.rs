//! Term-by-term audit of the liquid-crystal energy-dissipation balance for
//! supplied velocity/director pairs.
//!
//! The velocity field is ingested, never evolved: the module evaluates the
//! kinetic + elastic energy and each dissipation integral
//!
//! ```text
//! (γ/Re)∫|∇v|²  +  ((1-γ)/Re)[ β₁∫(d⊗d:D)² + β₂∫D:D + β₃∫|Dd|²
//!                              + μ₁∫(|h|² - (h·d)²) ]
//! ```
//!
//! with h = Δd by default (a switch selects the tension-field variant for
//! comparison).  Spatial indices are contracted over the grid dimension:
//! on T² the 2×2 strain tensor acts on the first two director components.

use crate::director::{ChartAxis, DirectorField};
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::frame::{grad_norm_sq, grad_norm_sq_chart_check, tension};
use crate::grid::{GridMeta, Parity};
use crate::report::EstimateReport;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ElCoefficients {
    pub gamma: f64,
    pub reynolds: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub mu1: f64,
}

impl Default for ElCoefficients {
    fn default() -> Self {
        ElCoefficients { gamma: 0.5, reynolds: 1.0, beta1: 1.0, beta2: 1.0, beta3: 1.0, mu1: 1.0 }
    }
}

impl ElCoefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.reynolds > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reynolds must be positive, got {}",
                self.reynolds
            )));
        }
        if !(self.mu1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu1 must be positive, got {}",
                self.mu1
            )));
        }
        Ok(())
    }
}

/// Molecular field entering the rotational dissipation term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MolecularField {
    /// h = Δd, as the energy law states it.
    #[default]
    Laplacian,
    /// h = Δd + |∇d|²d, for side-by-side comparison.
    Tension,
}

/// Plain periodic velocity field (m = dim, parity even — the twist acts on
/// the director only).
#[derive(Clone, Debug)]
pub struct VelocityField {
    base: SampledField,
}

impl VelocityField {
    pub fn from_base(base: SampledField) -> Result<VelocityField> {
        let dim = base.grid().dim();
        if base.components() != dim {
            return Err(Error::ComponentMismatch { expected: dim, got: base.components() });
        }
        if base.parity() != Parity::Even {
            return Err(Error::InvalidParameter(
                "velocity fields must carry even antipodal parity".into(),
            ));
        }
        Ok(VelocityField { base })
    }

    pub fn zero(grid: &crate::grid::TorusGrid) -> VelocityField {
        VelocityField { base: SampledField::zeros(grid, grid.dim(), Parity::Even) }
    }

    pub fn base(&self) -> &SampledField {
        &self.base
    }

    /// ‖∇·v‖_∞ — for callers that want to enforce incompressibility.
    pub fn divergence_sup(&self) -> f64 {
        crate::field::divergence(&self.base).sup_magnitude()
    }
}

/// Velocity gradient G_ij = ∂v_i/∂x_j as a dim²-component field
/// (row-major: component i·dim + j).
fn velocity_gradient(v: &VelocityField) -> SampledField {
    let grid = *v.base.grid();
    let dim = grid.dim();
    let mut out = SampledField::zeros(&grid, dim * dim, Parity::Even);
    for j in 0..dim {
        let dj = v.base.diff_central(j);
        for node in 0..grid.node_count() {
            let src = dj.at(node);
            let dst = out.at_mut(node);
            for i in 0..dim {
                dst[i * dim + j] = src[i];
            }
        }
    }
    out
}

/// Rate-of-strain tensor D = (∇v + ∇vᵀ)/2 and vorticity Ω = (∇v - ∇vᵀ)/2.
pub fn strain_tensors(v: &VelocityField) -> (SampledField, SampledField) {
    let grid = *v.base.grid();
    let dim = grid.dim();
    let g = velocity_gradient(v);
    let mut d = SampledField::zeros(&grid, dim * dim, Parity::Even);
    let mut w = SampledField::zeros(&grid, dim * dim, Parity::Even);
    for node in 0..grid.node_count() {
        let src = g.at(node);
        for i in 0..dim {
            for j in 0..dim {
                let sym = 0.5 * (src[i * dim + j] + src[j * dim + i]);
                let asym = 0.5 * (src[i * dim + j] - src[j * dim + i]);
                d.at_mut(node)[i * dim + j] = sym;
                w.at_mut(node)[i * dim + j] = asym;
            }
        }
    }
    (d, w)
}

/// Each dissipation integral of the energy law, reported separately.
///
/// Entries: `viscous`, `beta1_alignment`, `beta2_strain`, `beta3_stretch`,
/// `mu1_rotation`, `min_rotation_integrand`, `total`.  The β terms carry
/// their signed coefficients; `total` is the full dissipation (≥ 0 whenever
/// all β ≥ 0, which is asserted in that case).
pub fn dissipation_terms(
    v: &VelocityField,
    d: &DirectorField,
    coeffs: &ElCoefficients,
    h_variant: MolecularField,
) -> Result<EstimateReport> {
    coeffs.validate()?;
    v.base.same_grid(d.base())?;
    let grid = *d.grid();
    let dim = grid.dim();

    let grad_v = velocity_gradient(v);
    let (dt, _) = strain_tensors(v);
    let h_field = match h_variant {
        MolecularField::Laplacian => d.base().laplacian(),
        MolecularField::Tension => tension(d),
    };

    let cell = grid.cell_volume();
    let mut i_gradv = 0.0;
    let mut i_align = 0.0;
    let mut i_strain = 0.0;
    let mut i_stretch = 0.0;
    let mut i_rot = 0.0;
    let mut min_rot = f64::INFINITY;
    for node in 0..grid.node_count() {
        let g = grad_v.at(node);
        let dd = dt.at(node);
        let dir = d.base().at(node);
        let h = h_field.at(node);

        i_gradv += g.iter().map(|x| x * x).sum::<f64>();
        let mut align = 0.0;
        let mut frob = 0.0;
        let mut stretch = 0.0;
        for i in 0..dim {
            let mut dd_row = 0.0;
            for j in 0..dim {
                let dij = dd[i * dim + j];
                align += dir[i] * dir[j] * dij;
                frob += dij * dij;
                dd_row += dij * dir[j];
            }
            stretch += dd_row * dd_row;
        }
        i_align += align * align;
        i_strain += frob;
        i_stretch += stretch;
        let h_sq: f64 = h.iter().map(|x| x * x).sum();
        let h_dot_d: f64 = h.iter().zip(dir).map(|(a, b)| a * b).sum();
        let rot = h_sq - h_dot_d * h_dot_d;
        min_rot = min_rot.min(rot);
        i_rot += rot;
    }

    let visc = coeffs.gamma / coeffs.reynolds * i_gradv * cell;
    let el = (1.0 - coeffs.gamma) / coeffs.reynolds;
    let t_align = el * coeffs.beta1 * i_align * cell;
    let t_strain = el * coeffs.beta2 * i_strain * cell;
    let t_stretch = el * coeffs.beta3 * i_stretch * cell;
    let t_rot = el * coeffs.mu1 * i_rot * cell;
    let total = visc + t_align + t_strain + t_stretch + t_rot;

    let mut rep = EstimateReport::new("dissipation_terms", GridMeta::from(&grid));
    rep.put("viscous", visc);
    rep.put("beta1_alignment", t_align);
    rep.put("beta2_strain", t_strain);
    rep.put("beta3_stretch", t_stretch);
    rep.put("mu1_rotation", t_rot);
    rep.put("min_rotation_integrand", if min_rot.is_finite() { min_rot } else { 0.0 });
    rep.put("total", total);
    // the balance gives -total as the energy rate; nonnegativity of the
    // dissipation is only a theorem when every β is nonnegative
    if coeffs.beta1 >= 0.0 && coeffs.beta2 >= 0.0 && coeffs.beta3 >= 0.0 {
        rep.check_le("total_nonnegative_defect", (-total).max(0.0), 1e-12);
    }
    Ok(rep)
}

/// Kinetic + elastic energy, with the elastic part computed on the
/// Cartesian route and cross-checked against the chart expression
/// ∫ sin²θ|∇φ|² + |∇θ|² on masked nodes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ElEnergy {
    pub total: f64,
    pub kinetic: f64,
    pub elastic: f64,
    /// Chart-route elastic integral over the masked region.
    pub elastic_chart_masked: f64,
    /// Relative discrepancy between the two routes on the masked region.
    pub chart_rel_discrepancy: f64,
    pub masked_fraction: f64,
}

pub fn energy(
    v: &VelocityField,
    d: &DirectorField,
    coeffs: &ElCoefficients,
    eps_pole: f64,
) -> Result<ElEnergy> {
    coeffs.validate()?;
    v.base.same_grid(d.base())?;
    let kinetic = 0.5 * v.base.magnitude_sq().integrate()?;
    let gradsq = grad_norm_sq(d);
    let el_factor = (1.0 - coeffs.gamma) / (2.0 * coeffs.reynolds);
    let elastic = el_factor * gradsq.integrate()?;

    let check = grad_norm_sq_chart_check(d, ChartAxis::Z, eps_pole)?;
    let cart_masked = gradsq.integrate_masked(&check.mask)?;
    let chart_masked = check.chart_value.integrate_masked(&check.mask)?;
    let rel = if cart_masked.abs() <= 1e-14 {
        0.0
    } else {
        (cart_masked - chart_masked).abs() / cart_masked.abs()
    };

    Ok(ElEnergy {
        total: kinetic + elastic,
        kinetic,
        elastic,
        elastic_chart_masked: el_factor * chart_masked,
        chart_rel_discrepancy: rel,
        masked_fraction: check.mask.fraction(),
    })
}
