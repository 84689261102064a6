//! Sampled fields and the sign-aware finite-difference calculus.
//!
//! A [`SampledField`] stores m real samples per node together with the
//! antipodal parity that fixes its wrap signs.  `diff_central` and
//! `laplacian` are the only stencils in the crate (second-order central);
//! `integrate` is the rectangle rule, which is spectrally accurate for
//! smooth periodic integrands and rejects odd-parity input outright —
//! an odd integrand always means a parity bookkeeping bug upstream.

use crate::error::{Error, Result};
use crate::grid::{Mask, Parity, TorusGrid};

#[derive(Clone, Debug)]
pub struct SampledField {
    grid: TorusGrid,
    components: usize,
    parity: Parity,
    values: Vec<f64>,
}

impl SampledField {
    pub fn zeros(grid: &TorusGrid, components: usize, parity: Parity) -> SampledField {
        assert!(components >= 1);
        SampledField {
            grid: *grid,
            components,
            parity,
            values: vec![0.0; components * grid.node_count()],
        }
    }

    /// Build nodewise from coordinates.  The closure fills the m samples of
    /// one node; twist compatibility of the sampled function is the
    /// caller's responsibility (generators check it where it matters).
    pub fn from_fn<F>(grid: &TorusGrid, components: usize, parity: Parity, mut f: F) -> SampledField
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut out = SampledField::zeros(grid, components, parity);
        for node in 0..grid.node_count() {
            let x = grid.coords(node);
            let start = node * components;
            f(&x[..grid.dim()], &mut out.values[start..start + components]);
        }
        out
    }

    pub fn scalar_from_fn<F>(grid: &TorusGrid, parity: Parity, mut f: F) -> SampledField
    where
        F: FnMut(&[f64]) -> f64,
    {
        SampledField::from_fn(grid, 1, parity, |x, out| out[0] = f(x))
    }

    pub fn from_values(
        grid: &TorusGrid,
        components: usize,
        parity: Parity,
        values: Vec<f64>,
    ) -> Result<SampledField> {
        if values.len() != components * grid.node_count() {
            return Err(Error::ComponentMismatch {
                expected: components * grid.node_count(),
                got: values.len(),
            });
        }
        Ok(SampledField { grid: *grid, components, parity, values })
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn parity(&self) -> Parity {
        self.parity
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let start = node * self.components;
        &self.values[start..start + self.components]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let start = node * self.components;
        &mut self.values[start..start + self.components]
    }

    pub fn same_grid(&self, other: &SampledField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.describe(), other.grid.describe()));
        }
        Ok(())
    }

    /// Neighbor samples one step along `axis`, multiplied by the wrap sign
    /// s_i = (-1)^{a_i p} when the step crosses the identified face.
    pub fn shift_sample(&self, node: usize, axis: usize, offset: i32) -> Vec<f64> {
        let mut out = vec![0.0; self.components];
        self.shift_into(node, axis, offset, &mut out);
        out
    }

    #[inline]
    fn shift_into(&self, node: usize, axis: usize, offset: i32, out: &mut [f64]) {
        let (nb, crossed) = self.grid.neighbor(node, axis, offset);
        let sign = if crossed { self.parity.wrap_sign(self.grid.parity(axis)) } else { 1.0 };
        let src = &self.values[nb * self.components..(nb + 1) * self.components];
        for (o, &v) in out.iter_mut().zip(src) {
            *o = sign * v;
        }
    }

    /// Second-order central difference along `axis`; parity is preserved.
    pub fn diff_central(&self, axis: usize) -> SampledField {
        assert!(axis < self.grid.dim());
        let m = self.components;
        let inv2h = 1.0 / (2.0 * self.grid.spacing(axis));
        let mut out = SampledField::zeros(&self.grid, m, self.parity);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for node in 0..self.grid.node_count() {
            self.shift_into(node, axis, 1, &mut plus);
            self.shift_into(node, axis, -1, &mut minus);
            let dst = out.at_mut(node);
            for c in 0..m {
                dst[c] = (plus[c] - minus[c]) * inv2h;
            }
        }
        out
    }

    /// Sum over axes of the three-point second difference; parity preserved.
    pub fn laplacian(&self) -> SampledField {
        let m = self.components;
        let mut out = SampledField::zeros(&self.grid, m, self.parity);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for axis in 0..self.grid.dim() {
            let invh2 = 1.0 / (self.grid.spacing(axis) * self.grid.spacing(axis));
            for node in 0..self.grid.node_count() {
                self.shift_into(node, axis, 1, &mut plus);
                self.shift_into(node, axis, -1, &mut minus);
                let here = &self.values[node * m..(node + 1) * m];
                let dst = out.at_mut(node);
                for c in 0..m {
                    dst[c] += (plus[c] - 2.0 * here[c] + minus[c]) * invh2;
                }
            }
        }
        out
    }

    /// Rectangle-rule integral of a scalar field.  Only even-parity fields
    /// have a well-defined integral over the twisted torus.
    pub fn integrate(&self) -> Result<f64> {
        if self.components != 1 {
            return Err(Error::ComponentMismatch { expected: 1, got: self.components });
        }
        if self.parity == Parity::Odd {
            return Err(Error::OddIntegrand);
        }
        Ok(self.values.iter().sum::<f64>() * self.grid.cell_volume())
    }

    /// Rectangle-rule integral restricted to masked nodes.
    pub fn integrate_masked(&self, mask: &Mask) -> Result<f64> {
        if self.components != 1 {
            return Err(Error::ComponentMismatch { expected: 1, got: self.components });
        }
        if self.parity == Parity::Odd {
            return Err(Error::OddIntegrand);
        }
        let mut acc = 0.0;
        for node in 0..self.grid.node_count() {
            if mask.get(node) {
                acc += self.values[node];
            }
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// One scalar component as its own field.
    pub fn component(&self, c: usize) -> SampledField {
        assert!(c < self.components);
        let n = self.grid.node_count();
        let mut values = Vec::with_capacity(n);
        for node in 0..n {
            values.push(self.values[node * self.components + c]);
        }
        SampledField { grid: self.grid, components: 1, parity: self.parity, values }
    }

    /// Pointwise Euclidean dot product of two m-component fields;
    /// the result parity is the XOR of the input parities.
    pub fn dot(&self, other: &SampledField) -> SampledField {
        assert_eq!(self.components, other.components);
        assert_eq!(self.grid, other.grid);
        let m = self.components;
        let n = self.grid.node_count();
        let mut values = Vec::with_capacity(n);
        for node in 0..n {
            let a = &self.values[node * m..(node + 1) * m];
            let b = &other.values[node * m..(node + 1) * m];
            values.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
        }
        SampledField {
            grid: self.grid,
            components: 1,
            parity: self.parity.xor(other.parity),
            values,
        }
    }

    /// Pointwise squared magnitude |f|² (always even parity).
    pub fn magnitude_sq(&self) -> SampledField {
        let m = self.components;
        let n = self.grid.node_count();
        let mut values = Vec::with_capacity(n);
        for node in 0..n {
            let a = &self.values[node * m..(node + 1) * m];
            values.push(a.iter().map(|x| x * x).sum());
        }
        SampledField { grid: self.grid, components: 1, parity: Parity::Even, values }
    }

    pub fn scaled(&self, factor: f64) -> SampledField {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// self + factor · other (same parity required: mixing parities in a
    /// sum has no consistent wrap sign).
    pub fn add_scaled(&self, other: &SampledField, factor: f64) -> SampledField {
        assert_eq!(self.components, other.components);
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.parity, other.parity);
        let mut out = self.clone();
        for (o, &v) in out.values.iter_mut().zip(&other.values) {
            *o += factor * v;
        }
        out
    }

    /// Pointwise product with a scalar field; parity XORs.
    pub fn mul_scalar_field(&self, scalar: &SampledField) -> SampledField {
        assert_eq!(scalar.components, 1);
        assert_eq!(self.grid, scalar.grid);
        let m = self.components;
        let mut out = self.clone();
        out.parity = self.parity.xor(scalar.parity);
        for node in 0..self.grid.node_count() {
            let s = scalar.values[node];
            for c in 0..m {
                out.values[node * m + c] *= s;
            }
        }
        out
    }

    /// Max over nodes of the pointwise Euclidean magnitude.
    pub fn sup_magnitude(&self) -> f64 {
        let m = self.components;
        let mut best: f64 = 0.0;
        for node in 0..self.grid.node_count() {
            let a = &self.values[node * m..(node + 1) * m];
            let v: f64 = a.iter().map(|x| x * x).sum();
            best = best.max(v);
        }
        best.sqrt()
    }

    pub fn sup_magnitude_masked(&self, mask: &Mask) -> f64 {
        let m = self.components;
        let mut best: f64 = 0.0;
        for node in 0..self.grid.node_count() {
            if !mask.get(node) {
                continue;
            }
            let a = &self.values[node * m..(node + 1) * m];
            let v: f64 = a.iter().map(|x| x * x).sum();
            best = best.max(v);
        }
        best.sqrt()
    }
}

/// Divergence Σ_k ∂_k f_k of a dim-vector field (m must equal grid.dim()).
pub fn divergence(f: &SampledField) -> SampledField {
    let dim = f.grid().dim();
    assert_eq!(f.components(), dim, "divergence needs one component per axis");
    let mut out = SampledField::zeros(f.grid(), 1, f.parity());
    for axis in 0..dim {
        let d = f.diff_central(axis);
        for node in 0..f.grid().node_count() {
            out.values[node] += d.at(node)[axis];
        }
    }
    out
}

/// Gradient (∂_0 f, …, ∂_{dim-1} f) of a scalar field as a dim-vector field.
pub fn gradient(f: &SampledField) -> SampledField {
    assert_eq!(f.components(), 1, "gradient takes a scalar field");
    let dim = f.grid().dim();
    let mut out = SampledField::zeros(f.grid(), dim, f.parity());
    for axis in 0..dim {
        let d = f.diff_central(axis);
        for node in 0..f.grid().node_count() {
            out.at_mut(node)[axis] = d.values[node];
        }
    }
    out
}

/// Σ_k ∫ |∂_k f|² over masked nodes — the squared L² norm of the full
/// gradient of an m-component field.
pub fn grad_l2_sq_masked(f: &SampledField, mask: &Mask) -> f64 {
    let mut acc = 0.0;
    for axis in 0..f.grid().dim() {
        let d = f.diff_central(axis);
        acc += d.magnitude_sq().integrate_masked(mask).expect("|∂f|² is even");
    }
    acc
}
