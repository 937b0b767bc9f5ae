//! Uniform L^p vicinity kernels: volumes, PDFs, grid stencils, and sampling.
//!
//! A kernel is the uniform density on the L^p ball of radius `epsilon` in
//! `dim` dimensions. Discretizing a kernel against a grid yields a stencil:
//! a map from integer cell offsets to the kernel mass over each cell, used by
//! the convolution and exact-mu machinery.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Norm order of the vicinity ball; only these three are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormOrder {
    L1,
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl NormOrder {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(NormOrder::L1),
            "2" => Ok(NormOrder::L2),
            "inf" | "Inf" | "INF" | "oo" => Ok(NormOrder::LInf),
            other => Err(Error::InvalidSpec(format!(
                "unsupported norm order {other:?}; expected 1, 2, or inf"
            ))),
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormOrder::L1 => write!(f, "1"),
            NormOrder::L2 => write!(f, "2"),
            NormOrder::LInf => write!(f, "inf"),
        }
    }
}

/// Uniform vicinity on the L^p ball of radius `epsilon` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VicinityKernel {
    pub p: NormOrder,
    pub epsilon: f64,
    pub dim: usize,
}

impl VicinityKernel {
    pub fn new(p: NormOrder, epsilon: f64, dim: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "kernel radius must be positive and finite, got {epsilon}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidSpec("kernel dimension must be >= 1".into()));
        }
        Ok(VicinityKernel { p, epsilon, dim })
    }

    /// L^p norm of an offset vector.
    pub fn norm(&self, delta: &[f64]) -> f64 {
        debug_assert_eq!(delta.len(), self.dim);
        match self.p {
            NormOrder::L1 => delta.iter().map(|x| x.abs()).sum(),
            NormOrder::L2 => delta.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::LInf => delta.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Volume of the ball: (2 eps Gamma(1+1/p))^n / Gamma(1+n/p), with the
    /// p -> infinity limit (2 eps)^n.
    pub fn volume(&self) -> f64 {
        kernel_volume(self.p, self.dim, self.epsilon)
    }

    /// Uniform density at an offset: 1/volume inside the ball, 0 outside.
    pub fn pdf(&self, delta: &[f64]) -> f64 {
        if self.norm(delta) <= self.epsilon {
            1.0 / self.volume()
        } else {
            0.0
        }
    }

    /// Offset drawn uniformly from the ball. Deterministic given the rng state.
    pub fn sample_offset(&self, rng: &mut Rng) -> Vec<f64> {
        let n = self.dim;
        match self.p {
            NormOrder::LInf => (0..n)
                .map(|_| rng.gen_range(-self.epsilon..self.epsilon))
                .collect(),
            NormOrder::L2 => {
                // Gaussian direction, radius eps * U^(1/n).
                let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                let r = self.epsilon * rng.gen::<f64>().powf(1.0 / n as f64);
                for x in &mut v {
                    *x *= r / norm;
                }
                v
            }
            NormOrder::L1 => {
                // Exponential magnitudes onto the simplex, random signs,
                // radius eps * U^(1/n).
                let g: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = g.iter().sum::<f64>().max(1e-300);
                let r = self.epsilon * rng.gen::<f64>().powf(1.0 / n as f64);
                g.iter()
                    .map(|&gi| {
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        sign * r * gi / total
                    })
                    .collect()
            }
        }
    }

    /// Shrunken kernel radius eps * (1 - (2 kappa)^(1/n)); closed form exists
    /// only for the L-infinity norm. Other norms go through the numeric path
    /// in the geometry module.
    pub fn shrink(&self, kappa: f64) -> Result<VicinityKernel> {
        if !(0.0..0.5).contains(&kappa) {
            return Err(Error::KappaOutOfRange { kappa });
        }
        if self.p != NormOrder::LInf {
            return Err(Error::UnsupportedNorm {
                p: self.p.to_string(),
            });
        }
        Ok(VicinityKernel {
            p: self.p,
            epsilon: self.epsilon * (1.0 - (2.0 * kappa).powf(1.0 / self.dim as f64)),
            dim: self.dim,
        })
    }

    /// Kernel with the same norm and dimension but a different radius.
    pub fn with_epsilon(&self, epsilon: f64) -> VicinityKernel {
        VicinityKernel {
            p: self.p,
            epsilon,
            dim: self.dim,
        }
    }

    /// Grid stencil of the kernel: offset -> kernel mass over that cell.
    ///
    /// Requires cell sizes no coarser than epsilon/5 per dimension.
    pub fn discretize(&self, cell_sizes: &[f64]) -> Result<Stencil> {
        for (d, &h) in cell_sizes.iter().enumerate() {
            let max_allowed = self.epsilon / 5.0;
            if h > max_allowed * (1.0 + 1e-12) {
                return Err(Error::ResolutionTooCoarse {
                    dim: d,
                    cell_size: h,
                    max_allowed,
                });
            }
        }
        Ok(self.discretize_unchecked(cell_sizes))
    }

    /// Stencil construction without the resolution floor. The box-overlap
    /// arithmetic stays exact for L-infinity at any radius, so the bound
    /// pipeline uses this for shrunken kernels whose radius falls below the
    /// floor; radii under half a cell collapse to the identity stencil.
    pub(crate) fn discretize_unchecked(&self, cell_sizes: &[f64]) -> Stencil {
        assert_eq!(cell_sizes.len(), self.dim);
        let radius: Vec<i64> = cell_sizes
            .iter()
            .map(|&h| (self.epsilon / h + 0.5).floor() as i64)
            .collect();

        let mut offsets: Vec<Vec<i64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut current = vec![-radius[0]; 0];
        current.clear();
        enumerate_box(&radius, &mut current, &mut |offset| {
            let w = match self.p {
                NormOrder::LInf => self.linf_cell_mass(offset, cell_sizes),
                _ => self.supersampled_cell_mass(offset, cell_sizes),
            };
            if w > 0.0 {
                offsets.push(offset.to_vec());
                weights.push(w);
            }
        });

        if weights.is_empty() {
            // Kernel entirely inside one cell.
            offsets.push(vec![0; self.dim]);
            weights.push(1.0);
        } else if self.p != NormOrder::LInf {
            // Supersampling only approximates cell masses; rescale so the
            // stencil meets its normalization contract.
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
        }

        Stencil::new(offsets, weights)
    }

    /// Exact box-box intersection mass for the L-infinity kernel, which
    /// factorizes per axis.
    fn linf_cell_mass(&self, offset: &[i64], cell_sizes: &[f64]) -> f64 {
        let mut mass = 1.0;
        for d in 0..self.dim {
            let h = cell_sizes[d];
            let lo = offset[d] as f64 * h - 0.5 * h;
            let hi = offset[d] as f64 * h + 0.5 * h;
            let len = (hi.min(self.epsilon) - lo.max(-self.epsilon)).max(0.0);
            mass *= len / (2.0 * self.epsilon);
        }
        mass
    }

    /// 4^n-point subcell supersampling of the uniform PDF for p in {1, 2}.
    fn supersampled_cell_mass(&self, offset: &[i64], cell_sizes: &[f64]) -> f64 {
        const SUB: [f64; 4] = [-0.375, -0.125, 0.125, 0.375];
        let n = self.dim;
        let mut inside = 0usize;
        let total_pts = 4usize.pow(n as u32);
        let mut idx = vec![0usize; n];
        let mut pt = vec![0.0f64; n];
        for _ in 0..total_pts {
            for d in 0..n {
                pt[d] = (offset[d] as f64 + SUB[idx[d]]) * cell_sizes[d];
            }
            if self.norm(&pt) <= self.epsilon {
                inside += 1;
            }
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < 4 {
                    break;
                }
                idx[d] = 0;
            }
        }
        let cell_volume: f64 = cell_sizes.iter().product();
        inside as f64 / total_pts as f64 * cell_volume / self.volume()
    }
}

/// Closed-form L^p ball volume.
pub fn kernel_volume(p: NormOrder, dim: usize, epsilon: f64) -> f64 {
    let n = dim as f64;
    match p {
        NormOrder::LInf => (2.0 * epsilon).powi(dim as i32),
        NormOrder::L1 => (2.0 * epsilon * gamma(2.0)).powi(dim as i32) / gamma(1.0 + n),
        NormOrder::L2 => (2.0 * epsilon * gamma(1.5)).powi(dim as i32) / gamma(1.0 + n / 2.0),
    }
}

fn enumerate_box(radius: &[i64], current: &mut Vec<i64>, f: &mut impl FnMut(&[i64])) {
    if current.len() == radius.len() {
        f(current);
        return;
    }
    let r = radius[current.len()];
    for o in -r..=r {
        current.push(o);
        enumerate_box(radius, current, f);
        current.pop();
    }
}

/// Discretized kernel: integer cell offsets with the kernel mass over each
/// cell. Weights are non-negative and sum to 1.
#[derive(Debug, Clone)]
pub struct Stencil {
    offsets: Vec<Vec<i64>>,
    weights: Vec<f64>,
    radius: Vec<usize>,
}

impl Stencil {
    fn new(offsets: Vec<Vec<i64>>, weights: Vec<f64>) -> Stencil {
        let dim = offsets[0].len();
        let mut radius = vec![0usize; dim];
        for o in &offsets {
            for d in 0..dim {
                radius[d] = radius[d].max(o[d].unsigned_abs() as usize);
            }
        }
        Stencil {
            offsets,
            weights,
            radius,
        }
    }

    pub fn dim(&self) -> usize {
        self.radius.len()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest absolute offset per dimension; the padding a convolution needs.
    pub fn radius(&self) -> &[usize] {
        &self.radius
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.offsets
            .iter()
            .map(|o| o.as_slice())
            .zip(self.weights.iter().copied())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weight of a specific offset, 0 if absent.
    pub fn weight_at(&self, offset: &[i64]) -> f64 {
        self.offsets
            .iter()
            .position(|o| o.as_slice() == offset)
            .map_or(0.0, |i| self.weights[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    const CHI2_CRIT_7DF_999: f64 = 24.321886347856854;

    fn kernel(p: NormOrder, eps: f64, dim: usize) -> VicinityKernel {
        VicinityKernel::new(p, eps, dim).unwrap()
    }

    #[test]
    fn volume_closed_forms() {
        assert!((kernel(NormOrder::LInf, 0.5, 2).volume() - 1.0).abs() < 1e-12);
        assert!((kernel(NormOrder::L2, 1.0, 2).volume() - std::f64::consts::PI).abs() < 1e-12);
        assert!((kernel(NormOrder::L1, 1.0, 2).volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l1_volume_matches_monte_carlo() {
        // Independent oracle: hit rate of the bounding box, 10^6 points.
        let k = kernel(NormOrder::L1, 1.0, 2);
        let mut rng = rng_from_seed(1);
        let n = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = rng.gen_range(-1.0..1.0);
            let y = rng.gen_range(-1.0..1.0);
            if f64::abs(x) + f64::abs(y) <= 1.0 {
                hits += 1;
            }
        }
        let mc = 4.0 * hits as f64 / n as f64;
        assert!(
            (mc - k.volume()).abs() / k.volume() < 0.01,
            "mc={mc} formula={}",
            k.volume()
        );
    }

    #[test]
    fn pdf_examples() {
        let k1 = kernel(NormOrder::LInf, 0.5, 1);
        assert!((k1.pdf(&[0.0]) - 1.0).abs() < 1e-12);
        assert_eq!(k1.pdf(&[0.6]), 0.0);
        let k2 = kernel(NormOrder::L2, 1.0, 2);
        assert!((k2.pdf(&[0.6, 0.6]) - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn stencil_box_overlap_hand_example() {
        // cell = eps/2 sits above the public resolution floor, so this runs
        // on the unchecked path where box overlap is still exact.
        let k = kernel(NormOrder::LInf, 0.5, 1);
        let s = k.discretize_unchecked(&[0.25]);
        assert_eq!(s.len(), 5);
        for (o, expected) in [(-2i64, 0.125), (-1, 0.25), (0, 0.25), (1, 0.25), (2, 0.125)] {
            assert!((s.weight_at(&[o]) - expected).abs() < 1e-12, "offset {o}");
        }
        assert!((s.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stencil_one_cell_wide_kernel() {
        // Kernel edge lands on cell boundaries: (0.25, 0.5, 0.25).
        let k = kernel(NormOrder::LInf, 0.1, 1);
        let s = k.discretize_unchecked(&[0.1]);
        assert_eq!(s.len(), 3);
        assert!((s.weight_at(&[0]) - 0.5).abs() < 1e-12);
        assert!((s.weight_at(&[-1]) - 0.25).abs() < 1e-12);
        assert!((s.weight_at(&[1]) - 0.25).abs() < 1e-12);
        assert!((s.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stencil_weights_normalized_for_all_norms() {
        for p in [NormOrder::L1, NormOrder::L2, NormOrder::LInf] {
            for dim in 1..=3usize {
                let k = kernel(p, 0.3, dim);
                let s = k.discretize(&vec![0.05; dim]).unwrap();
                assert!(
                    (s.weight_sum() - 1.0).abs() < 1e-10,
                    "p={p} dim={dim} sum={}",
                    s.weight_sum()
                );
                assert!(s.iter().all(|(_, w)| w >= 0.0));
            }
        }
    }

    #[test]
    fn stencil_resolution_floor() {
        let k = kernel(NormOrder::LInf, 0.1, 1);
        match k.discretize(&[0.05]) {
            Err(Error::ResolutionTooCoarse { dim: 0, .. }) => {}
            other => panic!("expected ResolutionTooCoarse, got {other:?}"),
        }
        assert!(k.discretize(&[0.02]).is_ok());
    }

    #[test]
    fn tiny_kernel_collapses_to_identity_stencil() {
        let k = kernel(NormOrder::L2, 0.001, 2);
        let s = k.discretize_unchecked(&[0.1, 0.1]);
        assert_eq!(s.len(), 1);
        assert!((s.weight_at(&[0, 0]) - 1.0).abs() < 1e-15);
    }

    /// Aggregate a half-step stencil onto the parent cell partition so the two
    /// resolutions become comparable; children split across parent boundaries
    /// contribute fractionally.
    fn aggregate_to_parent(child: &Stencil, dim: usize, parent_radius: i64) -> Vec<f64> {
        let side = (2 * parent_radius + 1) as usize;
        let mut acc = vec![0.0f64; side.pow(dim as u32)];
        for (o, w) in child.iter() {
            // Child cell at fine offset c covers [c/2 - 1/4, c/2 + 1/4] in
            // parent-step units; split it across the parent cells it touches.
            let mut parts: Vec<(usize, f64)> = vec![(0, w)];
            for d in 0..dim {
                let c = o[d] as f64 / 2.0;
                let lo = c - 0.25;
                let hi = c + 0.25;
                let mut next = Vec::new();
                for &(base, frac) in &parts {
                    for pi in (lo + 0.5).floor() as i64..=(hi - 1e-12 + 0.5).floor() as i64 {
                        let plo = pi as f64 - 0.5;
                        let phi = pi as f64 + 0.5;
                        let olap = (hi.min(phi) - lo.max(plo)).max(0.0) / (hi - lo);
                        if olap > 0.0 {
                            let idx = (pi + parent_radius).clamp(0, side as i64 - 1) as usize;
                            next.push((base * side + idx, frac * olap));
                        }
                    }
                }
                parts = next;
            }
            for (idx, frac) in parts {
                acc[idx] += frac;
            }
        }
        acc
    }

    #[test]
    fn stencil_converges_under_cell_halving() {
        for p in [NormOrder::L1, NormOrder::L2] {
            let k = kernel(p, 0.3, 2);
            let coarse = k.discretize(&[0.02, 0.02]).unwrap();
            let fine = k.discretize(&[0.01, 0.01]).unwrap();
            let pr = coarse.radius()[0] as i64;
            let agg = aggregate_to_parent(&fine, 2, pr);
            let side = (2 * pr + 1) as usize;
            let mut sup = 0.0f64;
            for (o, w) in coarse.iter() {
                let idx = ((o[0] + pr) as usize) * side + (o[1] + pr) as usize;
                sup = sup.max((agg[idx] - w).abs());
            }
            assert!(sup < 1e-3, "p={p} sup-norm diff {sup}");
        }
    }

    #[test]
    fn sample_support_and_mean() {
        let k = kernel(NormOrder::LInf, 0.15, 2);
        let mut rng = rng_from_seed(7);
        let n = 100_000usize;
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let v = k.sample_offset(&mut rng);
            assert!(v.iter().all(|x| x.abs() <= 0.15));
            sums[0] += v[0];
            sums[1] += v[1];
        }
        // Per-component standard error of the mean: eps / sqrt(3 n).
        let sigma = 0.15 / (3.0 * n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn l2_half_radius_fraction() {
        let k = kernel(NormOrder::L2, 1.0, 2);
        let mut rng = rng_from_seed(11);
        let n = 100_000usize;
        let inside = (0..n)
            .filter(|_| k.norm(&k.sample_offset(&mut rng)) <= 0.5)
            .count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.01, "frac={frac}");
    }

    /// Chi-squared uniformity over 8 equal-probability bins of the ball.
    fn chi2_statistic(k: &VicinityKernel, seed: u64, n: usize) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut counts = [0usize; 8];
        // Radius that halves the ball volume in the same norm.
        let r_half = k.epsilon * 0.5f64.powf(1.0 / k.dim as f64);
        for _ in 0..n {
            let v = k.sample_offset(&mut rng);
            let bin = if k.dim == 1 {
                // 8 equal segments of [-eps, eps].
                (((v[0] + k.epsilon) / (2.0 * k.epsilon) * 8.0) as usize).min(7)
            } else {
                let quad = (v[0] >= 0.0) as usize * 2 + (v[1] >= 0.0) as usize;
                quad * 2 + (k.norm(&v) <= r_half) as usize
            };
            counts[bin] += 1;
        }
        let expected = n as f64 / 8.0;
        counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    }

    #[test]
    fn sampling_uniformity_chi_squared() {
        for (p, dim) in [
            (NormOrder::LInf, 1),
            (NormOrder::LInf, 2),
            (NormOrder::L2, 2),
            (NormOrder::L1, 2),
            (NormOrder::L1, 3),
        ] {
            let k = kernel(p, 0.4, dim);
            let stat = chi2_statistic(&k, 1234, 100_000);
            assert!(
                stat < CHI2_CRIT_7DF_999,
                "p={p} dim={dim} chi2={stat} exceeds 0.999 critical value"
            );
        }
    }

    #[test]
    fn shrink_closed_form() {
        let k1 = kernel(NormOrder::LInf, 0.15, 1);
        assert!((k1.shrink(0.1).unwrap().epsilon - 0.12).abs() < 1e-12);
        let k2 = kernel(NormOrder::LInf, 0.15, 2);
        assert!((k2.shrink(0.1).unwrap().epsilon - 0.08291796067500631).abs() < 1e-12);
        assert_eq!(k2.shrink(0.0).unwrap().epsilon, 0.15);
    }

    #[test]
    fn shrink_errors() {
        let k = kernel(NormOrder::LInf, 0.15, 2);
        assert!(matches!(k.shrink(0.5), Err(Error::KappaOutOfRange { .. })));
        assert!(matches!(k.shrink(-0.01), Err(Error::KappaOutOfRange { .. })));
        let k2 = kernel(NormOrder::L2, 0.15, 2);
        assert!(matches!(k2.shrink(0.1), Err(Error::UnsupportedNorm { .. })));
    }

    #[test]
    fn shrink_is_monotone_and_vanishes() {
        for dim in [1usize, 2, 4] {
            let k = kernel(NormOrder::LInf, 0.3, dim);
            let mut prev = f64::INFINITY;
            for i in 0..50 {
                let kappa = i as f64 * 0.01;
                let e = k.shrink(kappa).unwrap().epsilon;
                assert!(e <= prev + 1e-15);
                prev = e;
            }
            assert!(k.shrink(0.499999).unwrap().epsilon < 1e-5 * k.epsilon);
        }
    }
}
