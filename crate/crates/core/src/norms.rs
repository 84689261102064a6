//! Discrete Lᵖ norms, Sobolev seminorms, and the interpolation-inequality
//! ratio instruments.
//!
//! Inequalities with nonconstructive constants are never asserted against a
//! universal bound here; each instrument returns a finite ratio whose
//! ensemble maxima are tracked for stability under refinement.

use crate::director::DirectorField;
use crate::error::Result;
use crate::field::SampledField;
use crate::frame::{grad_norm_sq, tension};
use crate::grid::GridMeta;
use crate::report::EstimateReport;
use serde::{Deserialize, Serialize};

/// Numerator floor below which a ratio is 0 by convention (constant fields).
const RATIO_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lp {
    L2,
    L4,
    L6,
    LInf,
}

/// (∫ |f|ᵖ)^{1/p} of the pointwise Euclidean magnitude; max over nodes for
/// p = ∞.  |f|ᵖ is even regardless of the parity of f, so the integral is
/// always well defined.
pub fn lp_norm(f: &SampledField, p: Lp) -> f64 {
    match p {
        Lp::LInf => f.sup_magnitude(),
        Lp::L2 | Lp::L4 | Lp::L6 => {
            let sq = f.magnitude_sq();
            let power = match p {
                Lp::L2 => 1,
                Lp::L4 => 2,
                Lp::L6 => 3,
                Lp::LInf => unreachable!(),
            };
            let mut acc = 0.0;
            for node in 0..f.grid().node_count() {
                acc += sq.at(node)[0].powi(power);
            }
            let integral = acc * f.grid().cell_volume();
            integral.powf(1.0 / (2.0 * power as f64))
        }
    }
}

/// Lᵖ data of |∇d| together with the Sobolev ladder of d:
/// h1 = ‖∇d‖, h2 = ‖Δd‖, h3 = ‖∇Δd‖.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub l2: f64,
    pub l4: f64,
    pub l6: f64,
    pub linf: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

/// Seminorms plus the relative residual of the discrete identity
/// ‖Δd‖² = ‖τ‖² + ‖∇d‖⁴_{L⁴}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeminormReport {
    pub norms: NormBundle,
    pub eq_identity_residual: f64,
}

/// ∫ Σ_{j,k,l} (∂_k∂_l f_j)² by direct second differences: the diagonal
/// entries are the three-point second difference, the off-diagonal ones the
/// cross stencil (f₊₊ - f₊₋ - f₋₊ + f₋₋)/(4 h_k h_l), twist signs included.
/// On the torus this equals ‖Δf‖² up to O(h²); it is computed as an
/// independent cross-check of representing ‖∇²f‖ by ‖Δf‖.
pub fn hessian_frobenius_sq(f: &SampledField) -> f64 {
    let grid = *f.grid();
    let dim = grid.dim();
    let m = f.components();
    let sample = |node: usize, steps: &[(usize, i32)]| -> (usize, f64) {
        let mut cur = node;
        let mut sign = 1.0;
        for &(axis, off) in steps {
            let (next, crossed) = grid.neighbor(cur, axis, off);
            if crossed {
                sign *= f.parity().wrap_sign(grid.parity(axis));
            }
            cur = next;
        }
        (cur, sign)
    };
    let mut acc = 0.0;
    for node in 0..grid.node_count() {
        let here = f.at(node);
        for k in 0..dim {
            let hk = grid.spacing(k);
            // diagonal: (f(+k) - 2f + f(-k)) / h_k²
            let (np, sp) = sample(node, &[(k, 1)]);
            let (nm, sm) = sample(node, &[(k, -1)]);
            for j in 0..m {
                let v = (sp * f.at(np)[j] - 2.0 * here[j] + sm * f.at(nm)[j]) / (hk * hk);
                acc += v * v;
            }
            for l in k + 1..dim {
                let hl = grid.spacing(l);
                let (npp, spp) = sample(node, &[(k, 1), (l, 1)]);
                let (npm, spm) = sample(node, &[(k, 1), (l, -1)]);
                let (nmp, smp) = sample(node, &[(k, -1), (l, 1)]);
                let (nmm, smm) = sample(node, &[(k, -1), (l, -1)]);
                for j in 0..m {
                    let v = (spp * f.at(npp)[j] - spm * f.at(npm)[j] - smp * f.at(nmp)[j]
                        + smm * f.at(nmm)[j])
                        / (4.0 * hk * hl);
                    // off-diagonal pairs enter the Frobenius sum twice
                    acc += 2.0 * v * v;
                }
            }
        }
    }
    acc * grid.cell_volume()
}

pub fn sobolev_seminorms(d: &DirectorField) -> Result<SeminormReport> {
    let grid = d.grid();
    let gradsq = grad_norm_sq(d);
    let lap = d.base().laplacian();
    let tau = tension(d);

    let h1_sq = gradsq.integrate()?;
    let h2_sq = lap.magnitude_sq().integrate()?;
    let tau_sq = tau.magnitude_sq().integrate()?;
    let l4_pow4 = gradsq.magnitude_sq().integrate()?;

    let mut h3_sq = 0.0;
    for axis in 0..grid.dim() {
        h3_sq += lap.diff_central(axis).magnitude_sq().integrate()?;
    }

    let mut l6_pow6 = 0.0;
    for node in 0..grid.node_count() {
        l6_pow6 += gradsq.at(node)[0].powi(3);
    }
    l6_pow6 *= grid.cell_volume();

    let norms = NormBundle {
        l2: h1_sq.sqrt(),
        l4: l4_pow4.powf(0.25),
        l6: l6_pow6.powf(1.0 / 6.0),
        linf: {
            let mut sup: f64 = 0.0;
            for node in 0..grid.node_count() {
                sup = sup.max(gradsq.at(node)[0]);
            }
            sup.sqrt()
        },
        h1: h1_sq.sqrt(),
        h2: h2_sq.sqrt(),
        h3: h3_sq.sqrt(),
    };

    let residual = if h2_sq <= RATIO_FLOOR {
        0.0
    } else {
        (h2_sq - tau_sq - l4_pow4).abs() / h2_sq
    };
    Ok(SeminormReport { norms, eq_identity_residual: residual })
}

/// Interpolation-inequality ratio instruments.
///
/// Entries (all 0 on constant fields by the numerator-first convention):
///
/// * `gn2` (T² only): ‖∇d‖⁴_{L⁴} / (‖∇d‖²(‖Δd‖² + ‖∇d‖²))
/// * `l6`: ‖∇d‖³_{L⁶} / (‖∇d‖(‖Δd‖ + ‖∇d‖)²) on T²,
///   ‖∇d‖³_{L⁶} / (‖Δd‖³ + 1) on T³
/// * `agmon`: ‖∇d‖_{L∞} / (‖Δd‖^{1/2}‖∇Δd‖^{1/2} + ‖∇d‖)
/// * `agmon_strict`: same without the additive ‖∇d‖ (reported both ways
///   because the additive term only exists to keep near-constant fields
///   finite)
/// * `eq22_residual`: the ‖Δd‖² identity residual
pub fn gn_agmon_ratios(d: &DirectorField) -> Result<EstimateReport> {
    let s = sobolev_seminorms(d)?;
    let n = s.norms;
    let dim = d.grid().dim();

    let ratio = |num: f64, den: f64| if num <= RATIO_FLOOR { 0.0 } else { num / den };

    let mut rep = EstimateReport::new("gn_agmon_ratios", GridMeta::from(d.grid()));
    if dim == 2 {
        rep.put("gn2", ratio(n.l4.powi(4), n.h1.powi(2) * (n.h2.powi(2) + n.h1.powi(2))));
        rep.put("l6", ratio(n.l6.powi(3), n.h1 * (n.h2 + n.h1).powi(2)));
    } else {
        rep.put("l6", ratio(n.l6.powi(3), n.h2.powi(3) + 1.0));
    }
    rep.put("agmon", ratio(n.linf, (n.h2 * n.h3).sqrt() + n.h1));
    let strict_den = (n.h2 * n.h3).sqrt();
    rep.put("agmon_strict", if strict_den <= RATIO_FLOOR { 0.0 } else { ratio(n.linf, strict_den) });
    rep.put("eq22_residual", s.eq_identity_residual);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::director::{gen_equator, gen_random_bandlimited};
    use crate::field::SampledField;
    use crate::grid::{Parity, TorusGrid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn grid(n: usize, parities: [u8; 2]) -> TorusGrid {
        TorusGrid::new(2, &[n, n], &[1.0, 1.0], &parities[..]).unwrap()
    }

    #[test]
    fn lp_norms_of_simple_fields() {
        let g = grid(64, [0, 0]);
        let one = SampledField::scalar_from_fn(&g, Parity::Even, |_| 1.0);
        assert_abs_diff_eq!(lp_norm(&one, Lp::L2), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lp_norm(&one, Lp::L4), 1.0, epsilon = 1e-14);

        // |∇d| of the equator map is the constant sin(πh)/h ≈ π
        let gt = grid(64, [1, 0]);
        let d = gen_equator(&gt, 0.5).unwrap();
        let gm = crate::frame::grad_norm_sq(&d);
        let l4 = {
            let mut acc = 0.0;
            for node in 0..gt.node_count() {
                acc += gm.at(node)[0].powi(2);
            }
            (acc * gt.cell_volume()).powf(0.25)
        };
        let h = gt.spacing(0);
        assert_abs_diff_eq!(l4, PI, epsilon = PI.powi(3) * h * h);

        let f = SampledField::scalar_from_fn(&g, Parity::Even, |x| (2.0 * PI * x[1]).sin());
        assert!(lp_norm(&f, Lp::LInf) >= 0.999);
    }

    #[test]
    fn holder_ordering_on_unit_volume() {
        let g = grid(64, [0, 0]);
        let d = gen_random_bandlimited(&g, 17, 3, 0.3).unwrap();
        let s = sobolev_seminorms(&d).unwrap().norms;
        assert!(s.l2 <= s.l4 + 1e-12);
        assert!(s.l4 <= s.l6 + 1e-12);
        assert!(s.l6 <= s.linf + 1e-12);
        assert!(s.h1 >= 0.0 && s.h2 >= 0.0 && s.h3 >= 0.0);
    }

    #[test]
    fn equator_map_norms_and_identity() {
        let g = grid(64, [1, 0]);
        let d = gen_equator(&g, 0.5).unwrap();
        let s = sobolev_seminorms(&d).unwrap();
        let h = g.spacing(0);
        assert_abs_diff_eq!(s.norms.h1, PI, epsilon = PI.powi(3) * h * h);
        assert_abs_diff_eq!(s.norms.h2, PI * PI, epsilon = 5.0 * PI.powi(4) * h * h);
        // ‖τ‖ ≈ 0 and ‖∇d‖⁴_{L⁴} = ‖Δd‖² up to the stencil symbol mismatch
        assert!(s.eq_identity_residual <= 5.0 * PI * PI * h * h);
    }

    #[test]
    fn constant_field_yields_zeros() {
        let g = grid(16, [0, 0]);
        let d = DirectorField::from_base(SampledField::from_fn(&g, 3, Parity::Odd, |_, o| {
            o.copy_from_slice(&[0.0, 0.0, 1.0]);
        }))
        .unwrap();
        let s = sobolev_seminorms(&d).unwrap();
        assert_eq!(s.norms.h1, 0.0);
        assert_eq!(s.norms.h2, 0.0);
        assert_eq!(s.norms.h3, 0.0);
        assert_eq!(s.eq_identity_residual, 0.0);
        let r = gn_agmon_ratios(&d).unwrap();
        assert_eq!(r.value("gn2").unwrap(), 0.0);
        assert_eq!(r.value("agmon").unwrap(), 0.0);
        assert_eq!(r.value("agmon_strict").unwrap(), 0.0);
    }

    #[test]
    fn f1_gn2_ratio_matches_analytic_value() {
        let g = grid(64, [1, 0]);
        let d = gen_equator(&g, 0.5).unwrap();
        let r = gn_agmon_ratios(&d).unwrap();
        // π⁴ / (π²(π⁴ + π²)) = 1/(π² + 1)
        let expected = 1.0 / (PI * PI + 1.0);
        assert_abs_diff_eq!(r.value("gn2").unwrap(), expected, epsilon = 2e-3);
    }

    #[test]
    fn eq22_residual_improves_under_refinement() {
        let mut vals = Vec::new();
        for n in [64usize, 128] {
            let g = grid(n, [0, 0]);
            let mut worst: f64 = 0.0;
            for seed in 1..=20 {
                let d = gen_random_bandlimited(&g, seed, 3, 0.25).unwrap();
                worst = worst.max(sobolev_seminorms(&d).unwrap().eq_identity_residual);
            }
            vals.push(worst);
        }
        assert!(vals[0] <= 2e-2, "residual at N=64: {}", vals[0]);
        let order = (vals[0] / vals[1]).log2();
        assert!(order >= 1.5, "order {order}");
    }
}
