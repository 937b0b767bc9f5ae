//! Rectangular grid geometry shared by distributions, classifiers, and masks.
//!
//! A grid covers a closed box domain with `shape[d]` cells per dimension.
//! Values (densities, labels, mask bits) live at cell centers and are stored
//! in flat row-major order (last dimension fastest). All integrals downstream
//! are midpoint sums over cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a rectangular grid: per-dimension domain interval and cell count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    domain: Vec<[f64; 2]>,
    shape: Vec<usize>,
    #[serde(skip)]
    steps: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    len: usize,
}

impl GridGeometry {
    pub fn new(domain: Vec<[f64; 2]>, shape: Vec<usize>) -> Result<Self> {
        if domain.is_empty() || domain.len() != shape.len() {
            return Err(Error::InvalidSpec(format!(
                "domain has {} dimensions but shape has {}",
                domain.len(),
                shape.len()
            )));
        }
        for (d, (iv, &n)) in domain.iter().zip(&shape).enumerate() {
            if !(iv[0].is_finite() && iv[1].is_finite() && iv[0] < iv[1]) {
                return Err(Error::InvalidSpec(format!(
                    "domain interval {:?} in dimension {d} is not a finite lo < hi pair",
                    iv
                )));
            }
            if n < 2 {
                return Err(Error::InvalidSpec(format!(
                    "shape entry {n} in dimension {d} is below the minimum of 2 cells"
                )));
            }
        }
        let mut g = GridGeometry {
            domain,
            shape,
            steps: Vec::new(),
            strides: Vec::new(),
            len: 0,
        };
        g.rebuild_derived();
        Ok(g)
    }

    /// Recompute steps/strides/len; needed after deserialization.
    pub(crate) fn rebuild_derived(&mut self) {
        self.steps = self
            .domain
            .iter()
            .zip(&self.shape)
            .map(|(iv, &n)| (iv[1] - iv[0]) / n as f64)
            .collect();
        let dim = self.shape.len();
        let mut strides = vec![1usize; dim];
        for d in (0..dim.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * self.shape[d + 1];
        }
        self.strides = strides;
        self.len = self.shape.iter().product();
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Cell edge length per dimension.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps.iter().product()
    }

    pub fn linear(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    pub fn multi(&self, linear: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.dim()];
        self.multi_into(linear, &mut out);
        out
    }

    pub fn multi_into(&self, linear: usize, out: &mut [usize]) {
        let mut rem = linear;
        for (d, &s) in self.strides.iter().enumerate() {
            out[d] = rem / s;
            rem %= s;
        }
    }

    /// Center coordinate of a cell along one dimension.
    pub fn coord(&self, d: usize, index: usize) -> f64 {
        self.domain[d][0] + (index as f64 + 0.5) * self.steps[d]
    }

    pub fn center(&self, linear: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.center_into(linear, &mut out);
        out
    }

    pub fn center_into(&self, linear: usize, out: &mut [f64]) {
        let mut rem = linear;
        for (d, &s) in self.strides.iter().enumerate() {
            out[d] = self.coord(d, rem / s);
            rem %= s;
        }
    }

    /// Cell containing a point; coordinates outside the domain clamp to the
    /// nearest cell.
    pub fn clamp_point(&self, point: &[f64]) -> usize {
        debug_assert_eq!(point.len(), self.dim());
        let mut idx = 0usize;
        for d in 0..self.dim() {
            let rel = (point[d] - self.domain[d][0]) / self.steps[d];
            let i = (rel.floor() as i64).clamp(0, self.shape[d] as i64 - 1) as usize;
            idx += i * self.strides[d];
        }
        idx
    }

    /// Cell multi-index shifted by `offset`, clamped to the grid per dimension.
    pub fn clamped_offset_linear(&self, multi: &[usize], offset: &[i64]) -> usize {
        let mut idx = 0usize;
        for d in 0..self.dim() {
            let i = (multi[d] as i64 + offset[d]).clamp(0, self.shape[d] as i64 - 1) as usize;
            idx += i * self.strides[d];
        }
        idx
    }

    /// Grid enlarged by `pad[d]` cells on each side of dimension `d`, keeping
    /// cell size and center alignment.
    pub fn padded(&self, pad: &[usize]) -> GridGeometry {
        debug_assert_eq!(pad.len(), self.dim());
        let domain = self
            .domain
            .iter()
            .zip(&self.steps)
            .zip(pad)
            .map(|((iv, &h), &p)| [iv[0] - p as f64 * h, iv[1] + p as f64 * h])
            .collect();
        let shape = self.shape.iter().zip(pad).map(|(&n, &p)| n + 2 * p).collect();
        let mut g = GridGeometry {
            domain,
            shape,
            steps: Vec::new(),
            strides: Vec::new(),
            len: 0,
        };
        g.rebuild_derived();
        g
    }

    /// Whether another grid has identical cell size and center alignment.
    /// Returns the per-dimension offset that converts an `other` multi-index
    /// into a `self` multi-index: `self_multi = other_multi + offset`.
    pub fn alignment_offset(&self, other: &GridGeometry) -> Option<Vec<i64>> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut off = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let h = self.steps[d];
            if ((other.steps[d] - h) / h).abs() > 1e-9 {
                return None;
            }
            let shift = (other.domain[d][0] - self.domain[d][0]) / h;
            let k = shift.round();
            if (shift - k).abs() > 1e-6 {
                return None;
            }
            off.push(k as i64);
        }
        Some(off)
    }

    /// Visit every cell in linear order with its multi-index.
    pub fn visit_cells(&self, mut f: impl FnMut(usize, &[usize])) {
        let dim = self.dim();
        let mut multi = vec![0usize; dim];
        for linear in 0..self.len {
            f(linear, &multi);
            for d in (0..dim).rev() {
                multi[d] += 1;
                if multi[d] < self.shape[d] {
                    break;
                }
                multi[d] = 0;
            }
        }
    }
}

/// `dst[c + shift] += w * src[c]` for every cell `c` of `src_grid`.
///
/// `shift` is in destination cells and must keep the whole shifted block in
/// range: `0 <= shift[d]` and `src_shape[d] + shift[d] <= dst_shape[d]`.
pub fn accumulate_shifted(
    dst: &mut [f64],
    dst_grid: &GridGeometry,
    src: &[f64],
    src_grid: &GridGeometry,
    shift: &[usize],
    w: f64,
) {
    let dim = src_grid.dim();
    assert_eq!(dst_grid.dim(), dim);
    for d in 0..dim {
        assert!(src_grid.shape()[d] + shift[d] <= dst_grid.shape()[d]);
    }
    fn rec(
        dst: &mut [f64],
        src: &[f64],
        dst_strides: &[usize],
        src_strides: &[usize],
        src_shape: &[usize],
        shift: &[usize],
        level: usize,
        dst_base: usize,
        src_base: usize,
        w: f64,
    ) {
        if level == src_shape.len() - 1 {
            let n = src_shape[level];
            let dst_row = &mut dst[dst_base + shift[level]..dst_base + shift[level] + n];
            let src_row = &src[src_base..src_base + n];
            for (o, i) in dst_row.iter_mut().zip(src_row) {
                *o += w * i;
            }
        } else {
            for i in 0..src_shape[level] {
                rec(
                    dst,
                    src,
                    dst_strides,
                    src_strides,
                    src_shape,
                    shift,
                    level + 1,
                    dst_base + (i + shift[level]) * dst_strides[level],
                    src_base + i * src_strides[level],
                    w,
                );
            }
        }
    }
    rec(
        dst,
        src,
        dst_grid.strides(),
        src_grid.strides(),
        src_grid.shape(),
        shift,
        0,
        0,
        0,
        w,
    );
}

impl GridGeometry {
    /// Deserialize-and-validate entry point for persisted grids.
    pub fn from_parts(domain: Vec<[f64; 2]>, shape: Vec<usize>) -> Result<Self> {
        Self::new(domain, shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> GridGeometry {
        GridGeometry::new(vec![[0.0, 1.0], [0.0, 2.0]], vec![4, 8]).unwrap()
    }

    #[test]
    fn strides_are_row_major() {
        let g = grid2();
        assert_eq!(g.strides(), &[8, 1]);
        assert_eq!(g.len(), 32);
        assert_eq!(g.linear(&[2, 3]), 19);
        assert_eq!(g.multi(19), vec![2, 3]);
    }

    #[test]
    fn centers_and_volume() {
        let g = grid2();
        assert!((g.cell_volume() - 0.25 * 0.25).abs() < 1e-15);
        assert_eq!(g.center(0), vec![0.125, 0.125]);
        let last = g.center(g.len() - 1);
        assert!((last[0] - 0.875).abs() < 1e-12 && (last[1] - 1.875).abs() < 1e-12);
    }

    #[test]
    fn clamping_is_total() {
        let g = grid2();
        assert_eq!(g.clamp_point(&[-5.0, -5.0]), 0);
        assert_eq!(g.clamp_point(&[5.0, 5.0]), g.len() - 1);
        assert_eq!(g.clamp_point(&[0.13, 0.13]), g.linear(&[0, 0]));
    }

    #[test]
    fn padding_keeps_alignment() {
        let g = grid2();
        let p = g.padded(&[2, 3]);
        assert_eq!(p.shape(), &[8, 14]);
        let off = p.alignment_offset(&g).unwrap();
        assert_eq!(off, vec![2, 3]);
        // padded cell (2,3) coincides with original cell (0,0)
        assert_eq!(p.center(p.linear(&[2, 3])), g.center(0));
    }

    #[test]
    fn shifted_accumulation_places_block() {
        let g = GridGeometry::new(vec![[0.0, 1.0]], vec![3]).unwrap();
        let pg = g.padded(&[1]);
        let src = vec![1.0, 2.0, 3.0];
        let mut dst = vec![0.0; pg.len()];
        accumulate_shifted(&mut dst, &pg, &src, &g, &[2], 0.5);
        assert_eq!(dst, vec![0.0, 0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn rejects_degenerate_domains() {
        assert!(GridGeometry::new(vec![[1.0, 1.0]], vec![4]).is_err());
        assert!(GridGeometry::new(vec![[0.0, 1.0]], vec![1]).is_err());
        assert!(GridGeometry::new(vec![], vec![]).is_err());
    }

    #[test]
    fn visit_cells_matches_linear_order() {
        let g = grid2();
        let mut seen = 0usize;
        g.visit_cells(|lin, multi| {
            assert_eq!(lin, seen);
            assert_eq!(g.linear(multi), lin);
            seen += 1;
        });
        assert_eq!(seen, g.len());
    }
}
