//! Tension field and its moving-frame decompositions.
//!
//! The tension field τ = Δd + |∇d|²d of a unit field is tangent to the
//! sphere up to discretization error, so it splits along the frame as
//! τ = g₁ d⊥₁ + g₂ d⊥₂.  The coefficients are computed twice, by two
//! genuinely independent routes:
//!
//! * projection:  g₁ = τ·d⊥₁, g₂ = τ·d⊥₂  (no chart derivatives), and
//! * divergence:  g₁ = ∇·u₁ + b·∇θ, g₂ = ∇·∇θ - b·u₁  (pure chart data).
//!
//! Their agreement at second order is the module's core self-test.  The
//! same frame identities expand ∇τ and ∇Δd into three orthogonal blocks
//! whose Pythagorean sums are checked against direct differencing.

use crate::director::{chart_extract, frame_vectors, ChartAxis, DirectorField};
use crate::error::Result;
use crate::field::{divergence, grad_l2_sq_masked, gradient, SampledField};
use crate::grid::{GridMeta, Mask, Parity};
use crate::report::EstimateReport;

/// Σ_{i,j} (∂_i d_j)² — the Cartesian squared gradient, parity even.
pub fn grad_norm_sq(d: &DirectorField) -> SampledField {
    let grid = d.grid();
    let mut out = SampledField::zeros(grid, 1, Parity::Even);
    for axis in 0..grid.dim() {
        let g = d.base().diff_central(axis).magnitude_sq();
        out = out.add_scaled(&g, 1.0);
    }
    out
}

/// Chart-side value sin²θ|∇φ|² + |∇θ|² = |u₁|² + |∇θ|² on masked nodes,
/// with its sup discrepancy against the Cartesian gradient square.
pub struct ChartGradCheck {
    pub chart_value: SampledField,
    pub mask: Mask,
    pub sup_discrepancy: f64,
}

pub fn grad_norm_sq_chart_check(
    d: &DirectorField,
    axis: ChartAxis,
    eps_pole: f64,
) -> Result<ChartGradCheck> {
    let cart = grad_norm_sq(d);
    let ch = chart_extract(d, axis, eps_pole)?;
    let chart_value = ch.u1.magnitude_sq().add_scaled(&ch.grad_theta.magnitude_sq(), 1.0);
    let mut sup: f64 = 0.0;
    for node in 0..d.grid().node_count() {
        if ch.mask.get(node) {
            sup = sup.max((cart.at(node)[0] - chart_value.at(node)[0]).abs());
        }
    }
    Ok(ChartGradCheck { chart_value, mask: ch.mask, sup_discrepancy: sup })
}

/// τ = Δd + |∇d|²d.  Vanishes (to discretization order) exactly on
/// harmonic maps, and is the right-hand side of the heat flow.
pub fn tension(d: &DirectorField) -> SampledField {
    tension_of_unit(d.base())
}

/// Tension of an arbitrary unit-norm field (any parity) — used for the
/// rotated director of the tilted chart system.
pub fn tension_of_unit(f: &SampledField) -> SampledField {
    let mut gradsq = SampledField::zeros(f.grid(), 1, Parity::Even);
    for axis in 0..f.grid().dim() {
        gradsq = gradsq.add_scaled(&f.diff_central(axis).magnitude_sq(), 1.0);
    }
    f.laplacian().add_scaled(&f.mul_scalar_field(&gradsq), 1.0)
}

/// Frame coefficients of τ by both routes, with their masked diagnostics.
pub struct TensionDecomposition {
    pub tau: SampledField,
    pub gradsq: SampledField,
    /// Projection-route coefficients τ·d⊥₁ (even), τ·d⊥₂ (odd).
    pub g1: SampledField,
    pub g2: SampledField,
    /// Divergence-route coefficients ∇·u₁ + b·∇θ and ∇·∇θ - b·u₁.
    pub g1_div: SampledField,
    pub g2_div: SampledField,
    /// Chart mask; divergence-route values need one erosion.
    pub mask: Mask,
    pub div_mask: Mask,
    /// sup |τ - g₁d⊥₁ - g₂d⊥₂| over the chart mask (projection route);
    /// equals the residual tangency defect |τ·d|.
    pub recon_sup: f64,
    /// recon_sup / h_max² — the constant K of the K·h² tolerance.
    pub recon_k: f64,
    /// sup over the eroded mask of the route differences in g₁ and g₂.
    pub route_sup: f64,
}

pub fn decompose_tension(
    d: &DirectorField,
    axis: ChartAxis,
    eps_pole: f64,
) -> Result<TensionDecomposition> {
    let grid = *d.grid();
    let tau = tension(d);
    let gradsq = grad_norm_sq(d);
    let fr = frame_vectors(d, axis, eps_pole)?;
    let ch = chart_extract(d, axis, eps_pole)?;

    let mut g1 = tau.dot(&fr.dperp1);
    let mut g2 = tau.dot(&fr.dperp2);
    for node in 0..grid.node_count() {
        if !fr.mask.get(node) {
            g1.at_mut(node)[0] = 0.0;
            g2.at_mut(node)[0] = 0.0;
        }
    }

    let g1_div = divergence(&ch.u1).add_scaled(&ch.b.dot(&ch.grad_theta), 1.0);
    let g2_div = divergence(&ch.grad_theta).add_scaled(&ch.b.dot(&ch.u1), -1.0);

    let mut recon_sup: f64 = 0.0;
    for node in 0..grid.node_count() {
        if !fr.mask.get(node) {
            continue;
        }
        let t = tau.at(node);
        let p1 = fr.dperp1.at(node);
        let p2 = fr.dperp2.at(node);
        let a = g1.at(node)[0];
        let b = g2.at(node)[0];
        let mut mag = 0.0;
        for c in 0..3 {
            let r = t[c] - a * p1[c] - b * p2[c];
            mag += r * r;
        }
        recon_sup = recon_sup.max(mag.sqrt());
    }

    let div_mask = ch.mask.erode(1);
    let mut route_sup: f64 = 0.0;
    for node in 0..grid.node_count() {
        if !div_mask.get(node) {
            continue;
        }
        route_sup = route_sup.max((g1.at(node)[0] - g1_div.at(node)[0]).abs());
        route_sup = route_sup.max((g2.at(node)[0] - g2_div.at(node)[0]).abs());
    }

    let h = grid.max_spacing();
    Ok(TensionDecomposition {
        tau,
        gradsq,
        g1,
        g2,
        g1_div,
        g2_div,
        mask: ch.mask,
        div_mask,
        recon_sup,
        recon_k: recon_sup / (h * h),
        route_sup,
    })
}

/// Residuals of the frame derivative identities
///
/// ```text
/// ∂_k d    =  (sinθ ∂_k φ) d⊥₁ + (∂_k θ) d⊥₂
/// ∂_k d⊥₁  = -(sinθ ∂_k φ) d   - (cosθ ∂_k φ) d⊥₂
/// ∂_k d⊥₂  = -(∂_k θ) d        + (cosθ ∂_k φ) d⊥₁
/// ```
///
/// with the left sides obtained by differencing the assembled frame fields
/// and the right sides from chart components (sinθ ∂_k φ = u₁ₖ, cosθ ∂_k φ
/// = bₖ, ∂_k θ = (∇θ)ₖ).  Reports masked sup residuals per identity.
pub fn frame_derivative_residuals(
    d: &DirectorField,
    axis: ChartAxis,
    eps_pole: f64,
) -> Result<EstimateReport> {
    let grid = *d.grid();
    let ch = chart_extract(d, axis, eps_pole)?;
    let fr = frame_vectors(d, axis, eps_pole)?;
    // the frame fields are zeroed off-mask, so their differences are only
    // meaningful one erosion in
    let emask = ch.mask.erode(1);
    let fraction = emask.fraction();

    let mut sup_d: f64 = 0.0;
    let mut sup_p1: f64 = 0.0;
    let mut sup_p2: f64 = 0.0;
    for k in 0..grid.dim() {
        let dd = d.base().diff_central(k);
        let dp1 = fr.dperp1.diff_central(k);
        let dp2 = fr.dperp2.diff_central(k);
        for node in 0..grid.node_count() {
            if !emask.get(node) {
                continue;
            }
            let u1k = ch.u1.at(node)[k];
            let btk = ch.b.at(node)[k];
            let gtk = ch.grad_theta.at(node)[k];
            let dv = d.base().at(node);
            let p1 = fr.dperp1.at(node);
            let p2 = fr.dperp2.at(node);
            for c in 0..3 {
                let r_d = dd.at(node)[c] - (u1k * p1[c] + gtk * p2[c]);
                let r_p1 = dp1.at(node)[c] - (-u1k * dv[c] - btk * p2[c]);
                let r_p2 = dp2.at(node)[c] - (-gtk * dv[c] + btk * p1[c]);
                sup_d = sup_d.max(r_d.abs());
                sup_p1 = sup_p1.max(r_p1.abs());
                sup_p2 = sup_p2.max(r_p2.abs());
            }
        }
    }

    let mut rep = EstimateReport::new(
        format!("frame_derivative_residuals[{}]", axis.token()),
        GridMeta::from(&grid),
    );
    rep.put_masked("d_sup", sup_d, fraction);
    rep.put_masked("dperp1_sup", sup_p1, fraction);
    rep.put_masked("dperp2_sup", sup_p2, fraction);
    Ok(rep)
}

/// Frame expansion of ∇τ and ∇Δd into three orthogonal blocks.
///
/// With u₁ = sinθ∇φ, u₂ = ∇θ, b = cosθ∇φ and the frame coefficients
/// (g₁, g₂) of τ, the derivative identities give, per direction k,
///
/// ```text
/// ∂_k τ  = (∂_k g₁ + g₂ bₖ) d⊥₁ + (∂_k g₂ - g₁ bₖ) d⊥₂ - (g₁ u₁ₖ + g₂ u₂ₖ) d
/// ∂_k Δd = ∂_k τ - |∇d|² (u₁ₖ d⊥₁ + u₂ₖ d⊥₂) - ∂_k(|∇d|²) d
/// ```
///
/// so the squared norms split into d⊥₁/d⊥₂/d blocks.  Reports the direct
/// and block-sum values and their relative Pythagorean discrepancies, all
/// over the once-eroded chart mask.
pub fn grad_tension_frame_split(
    d: &DirectorField,
    axis: ChartAxis,
    eps_pole: f64,
) -> Result<EstimateReport> {
    let grid = *d.grid();
    let dim = grid.dim();
    let dec = decompose_tension(d, axis, eps_pole)?;
    let ch = chart_extract(d, axis, eps_pole)?;
    let emask = dec.mask.erode(1);
    let fraction = emask.fraction();

    let lap = d.base().laplacian();
    let direct_tau = grad_l2_sq_masked(&dec.tau, &emask);
    let direct_lap = grad_l2_sq_masked(&lap, &emask);

    let dg1 = gradient(&dec.g1);
    let dg2 = gradient(&dec.g2);
    let dgs = gradient(&dec.gradsq);

    let cell = grid.cell_volume();
    let mut tau_b1 = 0.0;
    let mut tau_b2 = 0.0;
    let mut tau_bd = 0.0;
    let mut lap_b1 = 0.0;
    let mut lap_b2 = 0.0;
    let mut lap_bd = 0.0;
    for node in 0..grid.node_count() {
        if !emask.get(node) {
            continue;
        }
        let g1 = dec.g1.at(node)[0];
        let g2 = dec.g2.at(node)[0];
        let gs = dec.gradsq.at(node)[0];
        for k in 0..dim {
            let u1k = ch.u1.at(node)[k];
            let u2k = ch.grad_theta.at(node)[k];
            let bk = ch.b.at(node)[k];
            let p1 = dg1.at(node)[k] + g2 * bk;
            let p2 = dg2.at(node)[k] - g1 * bk;
            let pd = g1 * u1k + g2 * u2k;
            tau_b1 += p1 * p1;
            tau_b2 += p2 * p2;
            tau_bd += pd * pd;
            let q1 = p1 - gs * u1k;
            let q2 = p2 - gs * u2k;
            let qd = pd + dgs.at(node)[k];
            lap_b1 += q1 * q1;
            lap_b2 += q2 * q2;
            lap_bd += qd * qd;
        }
    }
    tau_b1 *= cell;
    tau_b2 *= cell;
    tau_bd *= cell;
    lap_b1 *= cell;
    lap_b2 *= cell;
    lap_bd *= cell;

    let rel = |direct: f64, blocks: f64| {
        if direct <= 1e-30 && blocks <= 1e-30 {
            0.0
        } else {
            (direct - blocks).abs() / direct.max(blocks)
        }
    };

    let mut rep = EstimateReport::new(
        format!("grad_tension_frame_split[{}]", axis.token()),
        GridMeta::from(&grid),
    );
    rep.put_masked("grad_tau_direct", direct_tau, fraction);
    rep.put("grad_tau_blocks", tau_b1 + tau_b2 + tau_bd);
    rep.put("grad_tau_pythag_rel", rel(direct_tau, tau_b1 + tau_b2 + tau_bd));
    rep.put("tau_block_perp1", tau_b1);
    rep.put("tau_block_perp2", tau_b2);
    rep.put("tau_block_parallel", tau_bd);
    rep.put_masked("grad_lap_direct", direct_lap, fraction);
    rep.put("grad_lap_blocks", lap_b1 + lap_b2 + lap_bd);
    rep.put("grad_lap_pythag_rel", rel(direct_lap, lap_b1 + lap_b2 + lap_bd));
    Ok(rep)
}
