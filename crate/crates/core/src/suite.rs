//! Verification-suite orchestration: one call runs every identity and
//! inequality instrument on a field and folds the results into a single
//! [`EstimateReport`]; ensemble and refinement runners aggregate the same
//! metrics across seeds and grids.
//!
//! Assertion arming policy: exact identities (the nodewise cross-term
//! cancellation, the π/2 chart bound, unit norm) are always armed; every
//! O(h²) residual and every inequality ratio is armed only when the caller
//! supplies a threshold, so that algebraic identities and nonconstructive
//! estimates never blur into one pass flag.

use crate::director::{gen_pole_free, gen_random_bandlimited, ChartAxis, DirectorField};
use crate::error::Result;
use crate::estimates::{
    assemble_operator_pair, chart_comparison, cross_term_identities, d1_d2, delta_theta_bound,
    tension_projections, theorem_ratios, CHART_ABS_TOL, CHART_SLACK_K,
};
use crate::frame::{
    decompose_tension, frame_derivative_residuals, grad_norm_sq_chart_check,
    grad_tension_frame_split,
};
use crate::grid::{GridMeta, TorusGrid};
use crate::norms::{gn_agmon_ratios, sobolev_seminorms};
use crate::report::EstimateReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Optional tolerances; a `None` leaves the metric report-only.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyThresholds {
    /// Unit-norm defect (always armed).
    pub unit_norm: f64,
    /// Nodewise cross-term cancellation (always armed).
    pub eq210_rel: f64,
    /// Allowed chart-comparison violations (always armed; normally 0).
    pub chart_violations: f64,
    pub frame_recon_sup: Option<f64>,
    pub frame_route_sup: Option<f64>,
    pub eq22_rel: Option<f64>,
    pub eq211_rel: Option<f64>,
    pub d1_rel: Option<f64>,
    pub d2_rel: Option<f64>,
    pub eq213_ratio: Option<f64>,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        VerifyThresholds {
            unit_norm: 1e-12,
            eq210_rel: 1e-12,
            chart_violations: 0.0,
            frame_recon_sup: None,
            frame_route_sup: None,
            eq22_rel: None,
            eq211_rel: None,
            d1_rel: None,
            d2_rel: None,
            eq213_ratio: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub eps_pole: f64,
    pub m_values: Vec<f64>,
    pub chart_slack_k: f64,
    pub chart_abs_tol: f64,
    pub thresholds: VerifyThresholds,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            eps_pole: crate::DEFAULT_EPS_POLE,
            m_values: vec![1.0, 2.0, 4.0],
            chart_slack_k: CHART_SLACK_K,
            chart_abs_tol: CHART_ABS_TOL,
            thresholds: VerifyThresholds::default(),
        }
    }
}

/// Run the full identity/inequality battery on one director field.
pub fn verify_director(
    d: &DirectorField,
    label: &str,
    opts: &VerifyOptions,
) -> Result<EstimateReport> {
    let grid = d.grid();
    let th = &opts.thresholds;
    let mut rep = EstimateReport::new(label, GridMeta::from(grid));

    rep.check_le("unit_residual", d.unit_residual(), th.unit_norm);

    // frame decomposition of the tension field
    let dec = decompose_tension(d, ChartAxis::Z, opts.eps_pole)?;
    rep.put_masked("frame.recon_sup", dec.recon_sup, dec.mask.fraction());
    rep.put("frame.recon_k", dec.recon_k);
    rep.put_masked("frame.route_sup", dec.route_sup, dec.div_mask.fraction());
    if let Some(t) = th.frame_recon_sup {
        rep.arm("frame.recon_sup", t);
    }
    if let Some(t) = th.frame_route_sup {
        rep.arm("frame.route_sup", t);
    }

    rep.absorb("frame_deriv", &frame_derivative_residuals(d, ChartAxis::Z, opts.eps_pole)?);
    rep.absorb("split", &grad_tension_frame_split(d, ChartAxis::Z, opts.eps_pole)?);

    // chart-versus-Cartesian gradient square
    let gc = grad_norm_sq_chart_check(d, ChartAxis::Z, opts.eps_pole)?;
    rep.put_masked("gradsq_chart_sup", gc.sup_discrepancy, gc.mask.fraction());

    // seminorms and interpolation ratios
    let s = sobolev_seminorms(d)?;
    rep.put("norms.h1", s.norms.h1);
    rep.put("norms.h2", s.norms.h2);
    rep.put("norms.h3", s.norms.h3);
    rep.put("norms.l4", s.norms.l4);
    rep.put("norms.l6", s.norms.l6);
    rep.put("norms.linf", s.norms.linf);
    rep.put("norms.eq22_residual", s.eq_identity_residual);
    if let Some(t) = th.eq22_rel {
        rep.arm("norms.eq22_residual", t);
    }
    rep.absorb("gn", &gn_agmon_ratios(d)?);

    // cross-term identities and the paired quadratic forms (z chart)
    let pair = assemble_operator_pair(d, ChartAxis::Z, opts.eps_pole)?;
    let cross = cross_term_identities(&pair)?;
    rep.absorb("cross", &cross);
    rep.arm("cross.eq210_rel_sup", th.eq210_rel);
    if let Some(t) = th.eq211_rel {
        rep.arm("cross.eq211_rel", t);
    }
    let proj = tension_projections(d, ChartAxis::Z, opts.eps_pole)?;
    let dd = d1_d2(&pair, &proj, &opts.m_values)?;
    rep.absorb("d1d2", &dd);
    for &m in &opts.m_values {
        let tag = if m.fract() == 0.0 { format!("m{}", m as i64) } else { format!("m{m}") };
        if let Some(t) = th.d1_rel {
            rep.arm(&format!("d1d2.d1_rel_{tag}"), t);
        }
        if let Some(t) = th.d2_rel {
            rep.arm(&format!("d1d2.d2_rel_{tag}"), t);
        }
    }

    // per-axis Δθ bound and theorem ratios
    let dt = delta_theta_bound(d, opts.eps_pole)?;
    for (k, e) in &dt.entries {
        rep.put_masked(format!("ratios.{k}"), e.ratio, e.masked_fraction);
    }
    if let Some(t) = th.eq213_ratio {
        rep.arm("ratios.eq213_z", t);
    }
    let ratios = theorem_ratios(d, opts.eps_pole)?;
    for (k, e) in &ratios.entries {
        if k.starts_with("eq213") || k == "chart214" {
            continue; // recorded separately with their own context
        }
        rep.put_masked(format!("ratios.{k}"), e.ratio, e.masked_fraction);
    }

    let cc = chart_comparison(d, opts.eps_pole, opts.chart_slack_k, opts.chart_abs_tol)?;
    rep.put_masked("chart214.max_ratio", cc.max_ratio, cc.triple_fraction);
    rep.check_le("chart214.violations", cc.violations as f64, th.chart_violations);

    rep.absorb("control", &crate::estimates::control_terms(d, opts.eps_pole)?);
    Ok(rep)
}

/// Convergence entries between the same field sampled on a grid and its
/// refinement: `<key>_ratio` = coarse/fine for residuals that must shrink,
/// `<key>_rel_change` for ratio instruments that must stay put.
pub fn refinement_report(coarse: &EstimateReport, fine: &EstimateReport) -> EstimateReport {
    let mut rep = EstimateReport::new(
        format!("refinement[{} -> {}]", coarse.label, fine.label),
        fine.grid.clone(),
    );
    let shrink_keys = [
        "frame.recon_sup",
        "frame.route_sup",
        "frame_deriv.d_sup",
        "frame_deriv.dperp1_sup",
        "frame_deriv.dperp2_sup",
        "norms.eq22_residual",
        "cross.eq211_rel",
        "cross.div_phi_sup",
        "cross.div_grad_sup",
        "split.grad_tau_pythag_rel",
        "split.grad_lap_pythag_rel",
        "gradsq_chart_sup",
    ];
    for key in shrink_keys {
        if let (Some(a), Some(b)) = (coarse.value(key), fine.value(key)) {
            if b > 0.0 {
                rep.put(format!("{key}_ratio"), a / b);
            }
        }
    }
    let stable_keys = [
        "gn.gn2",
        "gn.l6",
        "gn.agmon",
        "ratios.thm21",
        "ratios.thm22",
        "ratios.thm23a",
        "ratios.thm23b",
        "ratios.eq213_z",
        "chart214.max_ratio",
        "control.ct_u1_ratio",
        "control.ct_grad_theta_ratio",
        "control.ct_grad_gradsq_ratio",
    ];
    for key in stable_keys {
        if let (Some(a), Some(b)) = (coarse.value(key), fine.value(key)) {
            let scale = a.abs().max(b.abs());
            if scale > 1e-12 {
                rep.put(format!("{key}_rel_change"), (a - b).abs() / scale);
            }
        }
    }
    rep
}

/// Seeded field family for ensemble sweeps.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum GeneratorKind {
    /// Angle-ansatz fields confined away from the z poles.
    PoleFree { band: usize, theta_amp: f64, chi_amp: f64 },
    /// Normalized random trigonometric 3-vectors.
    Random { band: usize, amplitude: f64 },
}

impl Default for GeneratorKind {
    fn default() -> Self {
        GeneratorKind::PoleFree { band: 3, theta_amp: 0.9, chi_amp: 1.2 }
    }
}

pub fn generate(grid: &TorusGrid, kind: &GeneratorKind, seed: u64) -> Result<DirectorField> {
    match *kind {
        GeneratorKind::PoleFree { band, theta_amp, chi_amp } => {
            gen_pole_free(grid, seed, band, theta_amp, chi_amp)
        }
        GeneratorKind::Random { band, amplitude } => {
            gen_random_bandlimited(grid, seed, band, amplitude)
        }
    }
}

/// Ensemble aggregate: per-seed verification metrics reduced to their
/// maxima (plus the minimum triple-mask fraction), deterministically by
/// seed order.  Seeds are evaluated on a worker pool.
pub fn run_ensemble(
    grid: &TorusGrid,
    kind: &GeneratorKind,
    seed_start: u64,
    seed_count: u64,
    opts: &VerifyOptions,
) -> Result<EstimateReport> {
    let seeds: Vec<u64> = (seed_start..seed_start + seed_count).collect();
    let per_seed: Vec<(u64, EstimateReport)> = seeds
        .par_iter()
        .map(|&seed| {
            let d = generate(grid, kind, seed)?;
            let rep = verify_director(&d, &format!("seed{seed}"), opts)?;
            Ok((seed, rep))
        })
        .collect::<Result<Vec<_>>>()?;

    let max_keys = [
        "frame.recon_sup",
        "frame.route_sup",
        "norms.eq22_residual",
        "cross.eq210_rel_sup",
        "cross.eq211_rel",
        "gn.gn2",
        "gn.l6",
        "gn.agmon",
        "ratios.thm21",
        "ratios.thm22",
        "ratios.thm23a",
        "ratios.thm23b",
        "ratios.eq213_z",
        "chart214.max_ratio",
        "chart214.violations",
        "control.ct_u1_ratio",
        "control.ct_grad_theta_ratio",
        "control.ct_grad_gradsq_ratio",
    ];
    let d_keys: Vec<String> = opts
        .m_values
        .iter()
        .flat_map(|&m| {
            let tag = if m.fract() == 0.0 { format!("m{}", m as i64) } else { format!("m{m}") };
            [format!("d1d2.d1_rel_{tag}"), format!("d1d2.d2_rel_{tag}")]
        })
        .collect();

    let mut rep = EstimateReport::new(
        format!("ensemble[seeds {seed_start}..{}]", seed_start + seed_count),
        GridMeta::from(grid),
    );
    let mut all_pass = true;
    for (_, r) in &per_seed {
        all_pass &= r.pass;
    }
    rep.put("seed_count", seed_count as f64);
    rep.put("all_seeds_pass", if all_pass { 1.0 } else { 0.0 });
    rep.pass &= all_pass;

    for key in max_keys.iter().map(|s| s.to_string()).chain(d_keys) {
        let mut max: Option<f64> = None;
        for (_, r) in &per_seed {
            if let Some(v) = r.value(&key) {
                max = Some(max.map_or(v, |m: f64| m.max(v)));
            }
        }
        if let Some(v) = max {
            rep.put(format!("max.{key}"), v);
        }
    }
    let mut min_triple: Option<f64> = None;
    for (_, r) in &per_seed {
        if let Some(e) = r.entries.get("chart214.max_ratio") {
            if let Some(f) = e.masked_fraction {
                min_triple = Some(min_triple.map_or(f, |m: f64| m.min(f)));
            }
        }
    }
    if let Some(f) = min_triple {
        rep.put("min_triple_fraction", f);
    }
    Ok(rep)
}

/// Ensemble stability across one grid refinement: reruns the sweep at the
/// refined resolution and reports the relative change of every aggregated
/// maximum.
pub fn ensemble_refinement(
    grid: &TorusGrid,
    refined: &TorusGrid,
    kind: &GeneratorKind,
    seed_start: u64,
    seed_count: u64,
    opts: &VerifyOptions,
) -> Result<EstimateReport> {
    let coarse = run_ensemble(grid, kind, seed_start, seed_count, opts)?;
    let fine = run_ensemble(refined, kind, seed_start, seed_count, opts)?;
    let mut rep = EstimateReport::new("ensemble_refinement", GridMeta::from(refined));
    rep.pass &= coarse.pass && fine.pass;
    for (k, e) in &coarse.entries {
        let Some(f) = fine.entries.get(k) else { continue };
        rep.put(format!("coarse.{k}"), e.value);
        rep.put(format!("fine.{k}"), f.value);
        if k.starts_with("max.") {
            let scale = e.value.abs().max(f.value.abs());
            if scale > 1e-12 {
                rep.put(format!("stability.{k}"), (e.value - f.value).abs() / scale);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::director::gen_equator;

    fn grid(n: usize, parities: [u8; 2]) -> TorusGrid {
        TorusGrid::new(2, &[n, n], &[1.0, 1.0], &parities[..]).unwrap()
    }

    #[test]
    fn verify_f1_passes_default_assertions() {
        let d = gen_equator(&grid(64, [1, 0]), 0.5).unwrap();
        let rep = verify_director(&d, "f1", &VerifyOptions::default()).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        assert!(rep.value("ratios.thm21").unwrap() > 9.0);
    }

    #[test]
    fn verify_report_is_deterministic() {
        let g = grid(64, [0, 0]);
        let opts = VerifyOptions::default();
        let d1 = generate(&g, &GeneratorKind::default(), 7).unwrap();
        let d2 = generate(&g, &GeneratorKind::default(), 7).unwrap();
        let r1 = verify_director(&d1, "x", &opts).unwrap();
        let r2 = verify_director(&d2, "x", &opts).unwrap();
        assert_eq!(r1.to_json(), r2.to_json());
    }

    #[test]
    fn ensemble_aggregates_and_passes() {
        let g = grid(64, [0, 0]);
        let mut opts = VerifyOptions::default();
        opts.thresholds.eq22_rel = Some(2e-2);
        opts.thresholds.eq211_rel = Some(2e-2);
        opts.thresholds.d1_rel = Some(2e-2);
        opts.thresholds.d2_rel = Some(2e-2);
        opts.thresholds.eq213_ratio = Some(1.05);
        let rep = run_ensemble(&g, &GeneratorKind::default(), 1, 5, &opts).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
        assert!(rep.value("max.ratios.eq213_z").unwrap() <= 1.05);
        assert_eq!(rep.value("all_seeds_pass").unwrap(), 1.0);
    }

    #[test]
    fn refinement_report_extracts_ratio_entries() {
        let opts = VerifyOptions::default();
        let d64 = gen_equator(&grid(64, [1, 0]), 0.5).unwrap();
        let d128 = gen_equator(&grid(128, [1, 0]), 0.5).unwrap();
        let r64 = verify_director(&d64, "n64", &opts).unwrap();
        let r128 = verify_director(&d128, "n128", &opts).unwrap();
        let rr = refinement_report(&r64, &r128);
        let ratio = rr.value("frame.recon_sup_ratio").unwrap();
        assert!((3.0..=5.0).contains(&ratio), "recon ratio {ratio}");
    }
}
