//! Uniform lattice on the (possibly twisted) torus.
//!
//! The domain is Q = ∏ [0, L_i] with the face x_i = L_i identified with
//! x_i = 0 up to the sign (-1)^{a_i}, a_i ∈ {0, 1}.  Fields carry an
//! antipodal parity flag; crossing a twisted face multiplies an odd-parity
//! field by -1 and leaves an even-parity field alone.  All stencils in the
//! crate go through [`TorusGrid::neighbor`] so the sign bookkeeping lives
//! in exactly one place.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MIN_NODES_PER_AXIS: usize = 8;

/// Sign behavior of a field under the antipodal map d → -d.
///
/// Derived fields inherit parity multiplicatively: the parity of a product
/// is the XOR of the factors' parities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn xor(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Wrap sign s_i = (-1)^{a_i · p} picked up when a field sample
    /// crosses the identified face of axis `i`.
    #[inline]
    pub fn wrap_sign(self, axis_parity: u8) -> f64 {
        match (self, axis_parity) {
            (Parity::Odd, 1) => -1.0,
            _ => 1.0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }

    pub fn from_token(tok: &str) -> Option<Parity> {
        match tok {
            "even" => Some(Parity::Even),
            "odd" => Some(Parity::Odd),
            _ => None,
        }
    }
}

/// Uniform node lattice on the twisted torus.
///
/// Nodes sit at x_i = j_i · h_i, j_i = 0 … N_i - 1, with h_i = L_i / N_i;
/// the node layout is axis-0-fastest.  Internally the axis arrays always
/// have length 3; a 2-d grid keeps a dummy third axis of size 1 so that
/// loops can stay dimension-generic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    sizes: [usize; 3],
    lengths: [f64; 3],
    parities: [u8; 3],
    spacings: [f64; 3],
}

impl TorusGrid {
    pub fn new(dim: usize, sizes: &[usize], lengths: &[f64], parities: &[u8]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidDim(dim));
        }
        if sizes.len() != dim || lengths.len() != dim || parities.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "expected {dim} entries per axis parameter, got sizes={}, lengths={}, parities={}",
                sizes.len(),
                lengths.len(),
                parities.len()
            )));
        }
        let mut s = [1usize; 3];
        let mut l = [1.0f64; 3];
        let mut p = [0u8; 3];
        let mut h = [1.0f64; 3];
        for i in 0..dim {
            if sizes[i] < MIN_NODES_PER_AXIS {
                return Err(Error::SizeTooSmall { axis: i, size: sizes[i] });
            }
            if !(lengths[i] > 0.0) {
                return Err(Error::NonPositiveLength { axis: i, length: lengths[i] });
            }
            if parities[i] > 1 {
                return Err(Error::InvalidParity { axis: i, parity: parities[i] });
            }
            s[i] = sizes[i];
            l[i] = lengths[i];
            p[i] = parities[i];
            h[i] = lengths[i] / sizes[i] as f64;
        }
        Ok(TorusGrid { dim, sizes: s, lengths: l, parities: p, spacings: h })
    }

    /// Same axes and twist, refined by an integer factor per axis.
    pub fn refined(&self, factor: usize) -> Result<TorusGrid> {
        let sizes: Vec<usize> = (0..self.dim).map(|i| self.sizes[i] * factor).collect();
        TorusGrid::new(self.dim, &sizes, &self.lengths[..self.dim], &self.parities[..self.dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    #[inline]
    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    #[inline]
    pub fn parity(&self, axis: usize) -> u8 {
        self.parities[axis]
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacings[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.sizes[0] * self.sizes[1] * self.sizes[2]
    }

    /// Cell volume ∏ h_i of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacings[..self.dim].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    #[inline]
    pub fn decode(&self, node: usize) -> [usize; 3] {
        let j0 = node % self.sizes[0];
        let rest = node / self.sizes[0];
        let j1 = rest % self.sizes[1];
        let j2 = rest / self.sizes[1];
        [j0, j1, j2]
    }

    #[inline]
    pub fn encode(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.sizes[0] * (idx[1] + self.sizes[1] * idx[2])
    }

    /// Node coordinates x_i = j_i · h_i (third entry 0 on 2-d grids).
    #[inline]
    pub fn coords(&self, node: usize) -> [f64; 3] {
        let j = self.decode(node);
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = j[i] as f64 * self.spacings[i];
        }
        x
    }

    /// Index of the neighbor one step along `axis`, plus whether the step
    /// crossed the identified face (so callers can apply the wrap sign).
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, offset: i32) -> (usize, bool) {
        debug_assert!(axis < self.dim);
        debug_assert!(offset == 1 || offset == -1);
        let mut j = self.decode(node);
        let n = self.sizes[axis];
        let (jnew, crossed) = if offset == 1 {
            if j[axis] + 1 == n {
                (0, true)
            } else {
                (j[axis] + 1, false)
            }
        } else if j[axis] == 0 {
            (n - 1, true)
        } else {
            (j[axis] - 1, false)
        };
        j[axis] = jnew;
        (self.encode(j), crossed)
    }

    /// Short human-readable description, used in error messages.
    pub fn describe(&self) -> String {
        let n: Vec<String> = self.sizes[..self.dim].iter().map(|v| v.to_string()).collect();
        let a: Vec<String> = self.parities[..self.dim].iter().map(|v| v.to_string()).collect();
        format!("T{}[{}|a={}]", self.dim, n.join("x"), a.join(","))
    }
}

/// Serializable grid metadata attached to reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub parities: Vec<u8>,
}

impl From<&TorusGrid> for GridMeta {
    fn from(g: &TorusGrid) -> Self {
        GridMeta {
            dim: g.dim,
            sizes: g.sizes[..g.dim].to_vec(),
            lengths: g.lengths[..g.dim].to_vec(),
            parities: g.parities[..g.dim].to_vec(),
        }
    }
}

/// Per-node boolean mask (chart validity, pole exclusion).
///
/// Masks have no parity: they are derived from even quantities such as
/// sin θ and wrap across faces without sign.
#[derive(Clone, Debug)]
pub struct Mask {
    grid: TorusGrid,
    flags: Vec<bool>,
}

impl Mask {
    pub fn all_true(grid: &TorusGrid) -> Mask {
        Mask { grid: *grid, flags: vec![true; grid.node_count()] }
    }

    pub fn from_flags(grid: &TorusGrid, flags: Vec<bool>) -> Mask {
        assert_eq!(flags.len(), grid.node_count());
        Mask { grid: *grid, flags }
    }

    #[inline]
    pub fn get(&self, node: usize) -> bool {
        self.flags[node]
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.flags.len() as f64
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|&b| b)
    }

    pub fn intersect(&self, other: &Mask) -> Mask {
        assert_eq!(self.grid, other.grid);
        let flags = self.flags.iter().zip(&other.flags).map(|(&a, &b)| a && b).collect();
        Mask { grid: self.grid, flags }
    }

    /// Shrink the mask by `steps` applications of the stencil footprint:
    /// after eroding once, a node is kept only if all its ±1 neighbors
    /// along every axis are kept.  Quantities obtained by differencing a
    /// masked field are only trustworthy on the once-eroded mask, twice
    /// differenced on the twice-eroded mask, and so on.
    pub fn erode(&self, steps: usize) -> Mask {
        let mut cur = self.flags.clone();
        for _ in 0..steps {
            let mut next = cur.clone();
            for node in 0..self.grid.node_count() {
                if !cur[node] {
                    continue;
                }
                let mut keep = true;
                for axis in 0..self.grid.dim() {
                    let (p, _) = self.grid.neighbor(node, axis, 1);
                    let (m, _) = self.grid.neighbor(node, axis, -1);
                    if !cur[p] || !cur[m] {
                        keep = false;
                        break;
                    }
                }
                next[node] = keep;
            }
            cur = next;
        }
        Mask { grid: self.grid, flags: cur }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings_are_exact_ratios() {
        let g = TorusGrid::new(2, &[64, 64], &[1.0, 1.0], &[1, 0]).unwrap();
        assert_eq!(g.spacing(0), 1.0 / 64.0);
        assert_eq!(g.spacing(1), 1.0 / 64.0);
        assert_eq!(g.node_count(), 64 * 64);

        let g3 = TorusGrid::new(3, &[32, 32, 32], &[1.0, 1.0, 1.0], &[1, 0, 0]).unwrap();
        assert_eq!(g3.dim(), 3);
        assert_eq!(g3.node_count(), 32 * 32 * 32);
        assert_eq!(g3.cell_volume(), (1.0f64 / 32.0).powi(3));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            TorusGrid::new(2, &[4, 64], &[1.0, 1.0], &[0, 0]),
            Err(Error::SizeTooSmall { axis: 0, size: 4 })
        ));
        assert!(matches!(
            TorusGrid::new(4, &[8, 8, 8, 8], &[1.0; 4], &[0; 4]),
            Err(Error::InvalidDim(4))
        ));
        assert!(matches!(
            TorusGrid::new(2, &[8, 8], &[1.0, -1.0], &[0, 0]),
            Err(Error::NonPositiveLength { axis: 1, .. })
        ));
        assert!(matches!(
            TorusGrid::new(2, &[8, 8], &[1.0, 1.0], &[0, 2]),
            Err(Error::InvalidParity { axis: 1, parity: 2 })
        ));
    }

    #[test]
    fn neighbor_wraps_and_flags_crossings() {
        let g = TorusGrid::new(2, &[8, 8], &[1.0, 1.0], &[1, 0]).unwrap();
        let node = g.encode([7, 3, 0]);
        let (nb, crossed) = g.neighbor(node, 0, 1);
        assert_eq!(g.decode(nb), [0, 3, 0]);
        assert!(crossed);
        let (nb, crossed) = g.neighbor(node, 0, -1);
        assert_eq!(g.decode(nb), [6, 3, 0]);
        assert!(!crossed);
        let (nb, crossed) = g.neighbor(g.encode([0, 0, 0]), 1, -1);
        assert_eq!(g.decode(nb), [0, 7, 0]);
        assert!(crossed);
    }

    #[test]
    fn node_order_is_axis0_fastest() {
        let g = TorusGrid::new(2, &[8, 16], &[1.0, 2.0], &[0, 0]).unwrap();
        assert_eq!(g.decode(0), [0, 0, 0]);
        assert_eq!(g.decode(1), [1, 0, 0]);
        assert_eq!(g.decode(8), [0, 1, 0]);
        for node in 0..g.node_count() {
            assert_eq!(g.encode(g.decode(node)), node);
        }
    }

    #[test]
    fn parity_algebra() {
        assert_eq!(Parity::Odd.xor(Parity::Odd), Parity::Even);
        assert_eq!(Parity::Odd.xor(Parity::Even), Parity::Odd);
        assert_eq!(Parity::Odd.wrap_sign(1), -1.0);
        assert_eq!(Parity::Odd.wrap_sign(0), 1.0);
        assert_eq!(Parity::Even.wrap_sign(1), 1.0);
    }

    #[test]
    fn erode_shaves_the_mask_boundary() {
        let g = TorusGrid::new(2, &[8, 8], &[1.0, 1.0], &[0, 0]).unwrap();
        let mut flags = vec![true; g.node_count()];
        flags[g.encode([4, 4, 0])] = false;
        let m = Mask::from_flags(&g, flags);
        let e = m.erode(1);
        assert!(!e.get(g.encode([4, 4, 0])));
        assert!(!e.get(g.encode([3, 4, 0])));
        assert!(!e.get(g.encode([4, 5, 0])));
        assert!(e.get(g.encode([3, 3, 0])));
        assert_eq!(m.count() - e.count(), 4);
    }
}
