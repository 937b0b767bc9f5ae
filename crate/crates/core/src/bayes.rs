//! Irreducible-error bounds: Bayes error, convolved and hardened
//! distributions, the boundary region, and the deterministic / probabilistic
//! robust error bounds with tolerance sweeps.
//!
//! The deterministic pipeline convolves the distribution with the vicinity
//! kernel, hardens the result to one-hot argmax classes, convolves again, and
//! collects the region where the twice-convolved posterior is mixed; cells in
//! that region contribute their full marginal mass to the error. The
//! probabilistic bound runs the same pipeline with the kernel shrunk to the
//! radius within which probabilistically consistent inputs are
//! deterministically robust.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::GridDistribution;
use crate::error::{Error, Result};
use crate::geometry;
use crate::grid::{accumulate_shifted, GridGeometry};
use crate::kernels::{NormOrder, Stencil, VicinityKernel};

/// Boundary membership threshold: a cell joins the boundary region when the
/// hardened-convolved max posterior falls below 1 - TAU. Stencil edge weights
/// introduce posterior leakage around 1e-10..1e-8, so the default sits well
/// above that without absorbing real boundary ramps.
pub const DEFAULT_TAU: f64 = 1e-6;

/// Seed for the Monte-Carlo overlap integrals behind the numeric shrink
/// solver (L1/L2 kernels); fixed so bound computations are reproducible.
const SHRINK_SOLVER_SEED: u64 = 0x7c3a_1f24_9d01_55aa;

/// Cells belonging to the boundary region of a hardened-convolved
/// distribution.
#[derive(Debug, Clone)]
pub struct BoundaryMask {
    grid: GridGeometry,
    mask: Vec<bool>,
}

impl BoundaryMask {
    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn is_boundary(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// One entry of a probabilistic-robust bound sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaBound {
    pub kappa: f64,
    /// Radius of the shrunken vicinity used for this entry.
    pub shrunken_epsilon: f64,
    /// Error-form bound b_p(kappa).
    pub prob_robust_error: f64,
    /// Accuracy-form bound 1 - b_p(kappa).
    pub prob_robust_accuracy_bound: f64,
}

/// Bounds for one distribution/kernel pair: the vanilla, deterministic, and
/// probabilistic bounds in both error and accuracy form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub p: NormOrder,
    pub epsilon: f64,
    pub tau: f64,
    pub grid_shape: Vec<usize>,
    /// b_a, the irreducible error of vanilla accuracy.
    pub bayes_error: f64,
    pub vanilla_accuracy_bound: f64,
    /// b_d, the irreducible error of deterministic robust accuracy.
    pub det_robust_error: f64,
    pub det_robust_accuracy_bound: f64,
    /// b_p(kappa) entries, ascending in kappa.
    pub entries: Vec<KappaBound>,
}

/// Sum of (marginal - max class density) * volume outside the mask plus the
/// full marginal mass inside it. With no mask this is the Bayes error.
fn error_sum(dist: &GridDistribution, mask: Option<&BoundaryMask>) -> f64 {
    let vol = dist.grid().cell_volume();
    let k = dist.num_classes();
    let mut acc = 0.0;
    for cell in 0..dist.grid().len() {
        let mut marginal = 0.0;
        let mut max_density = f64::NEG_INFINITY;
        for class in 0..k {
            let v = dist.density(class, cell);
            marginal += v;
            if v > max_density {
                max_density = v;
            }
        }
        if mask.is_some_and(|m| m.is_boundary(cell)) {
            acc += marginal * vol;
        } else {
            acc += (marginal - max_density) * vol;
        }
    }
    acc
}

/// Irreducible error of vanilla accuracy: the expected posterior mass of the
/// non-argmax classes.
pub fn bayes_error(dist: &GridDistribution) -> f64 {
    error_sum(dist, None)
}

/// Convolve each class density with the kernel's grid stencil. The output
/// grid is padded by the stencil radius per side with zero-extended input, so
/// total mass is preserved.
pub fn convolve(dist: &GridDistribution, kernel: &VicinityKernel) -> Result<GridDistribution> {
    let stencil = kernel.discretize(dist.grid().steps())?;
    Ok(convolve_with_stencil(dist, &stencil))
}

/// Convolution against a prebuilt stencil.
pub fn convolve_with_stencil(dist: &GridDistribution, stencil: &Stencil) -> GridDistribution {
    let grid = dist.grid();
    let pad = stencil.radius().to_vec();
    let out_grid = grid.padded(&pad);
    let class_densities: Vec<Vec<f64>> = (0..dist.num_classes())
        .into_par_iter()
        .map(|class| {
            let src = dist.class_density(class);
            let mut dst = vec![0.0; out_grid.len()];
            let mut shift = vec![0usize; grid.dim()];
            for (offset, w) in stencil.iter() {
                for d in 0..grid.dim() {
                    shift[d] = (pad[d] as i64 + offset[d]) as usize;
                }
                accumulate_shifted(&mut dst, &out_grid, src, grid, &shift, w);
            }
            dst
        })
        .collect();
    GridDistribution::from_raw(out_grid, class_densities)
}

/// Reassign each cell's marginal mass entirely to its argmax-posterior class
/// (ties to the lowest class index). The marginal is unchanged cell by cell.
pub fn harden(dist: &GridDistribution) -> GridDistribution {
    let n = dist.grid().len();
    let k = dist.num_classes();
    let mut class_densities = vec![vec![0.0; n]; k];
    for cell in 0..n {
        let label = dist.argmax_class(cell);
        class_densities[label][cell] = dist.marginal(cell);
    }
    GridDistribution::from_raw(dist.grid().clone(), class_densities)
}

/// Boundary region of an already-convolved distribution: harden it, convolve
/// with the kernel again, and mark the cells of the input grid where the
/// resulting max posterior is below 1 - tau. Cells outside the support are
/// never boundary cells.
pub fn boundary_region(
    convolved: &GridDistribution,
    kernel: &VicinityKernel,
) -> Result<BoundaryMask> {
    let stencil = kernel.discretize(convolved.grid().steps())?;
    Ok(boundary_region_with(convolved, &stencil, DEFAULT_TAU))
}

/// Boundary region with an explicit stencil and threshold.
pub fn boundary_region_with(
    convolved: &GridDistribution,
    stencil: &Stencil,
    tau: f64,
) -> BoundaryMask {
    let dagger = convolve_with_stencil(&harden(convolved), stencil);
    mask_from_dagger(convolved.grid(), &dagger, tau)
}

/// K-membership read off the twice-convolved distribution, restricted to the
/// cells of `grid`.
fn mask_from_dagger(grid: &GridGeometry, dagger: &GridDistribution, tau: f64) -> BoundaryMask {
    let offset = dagger
        .grid()
        .alignment_offset(grid)
        .expect("dagger grid is an aligned padding of the input grid");
    let k = dagger.num_classes();
    let mut mask = vec![false; grid.len()];
    let mut dagger_multi = vec![0usize; grid.dim()];
    grid.visit_cells(|cell, multi| {
        for d in 0..grid.dim() {
            dagger_multi[d] = (multi[d] as i64 + offset[d]) as usize;
        }
        let dcell = dagger.grid().linear(&dagger_multi);
        let mut marginal = 0.0;
        let mut max_density = f64::NEG_INFINITY;
        for class in 0..k {
            let v = dagger.density(class, dcell);
            marginal += v;
            if v > max_density {
                max_density = v;
            }
        }
        mask[cell] = marginal > 0.0 && max_density < (1.0 - tau) * marginal;
    });
    BoundaryMask {
        grid: grid.clone(),
        mask,
    }
}

/// Deterministic-robust Bayes error b_d: the Bayes error of the convolved
/// distribution with boundary-region cells contributing their full marginal
/// mass.
pub fn det_robust_bayes_error(dist: &GridDistribution, kernel: &VicinityKernel) -> Result<f64> {
    let stencil = kernel.discretize(dist.grid().steps())?;
    Ok(det_robust_error_with(dist, &stencil, DEFAULT_TAU))
}

/// Deterministic pipeline against a prebuilt stencil and threshold.
pub fn det_robust_error_with(dist: &GridDistribution, stencil: &Stencil, tau: f64) -> f64 {
    let convolved = convolve_with_stencil(dist, stencil);
    let mask = boundary_region_with(&convolved, stencil, tau);
    error_sum(&convolved, Some(&mask))
}

/// Shrunken vicinity radius for a tolerance level: closed form for
/// L-infinity, numerically solved overlap construction otherwise.
pub fn shrunken_epsilon(kernel: &VicinityKernel, kappa: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&kappa) {
        return Err(Error::KappaOutOfRange { kappa });
    }
    match kernel.p {
        NormOrder::LInf => Ok(kernel.shrink(kappa)?.epsilon),
        _ => geometry::solve_shrink_numeric(kernel, kappa, SHRINK_SOLVER_SEED),
    }
}

/// Probabilistic-robust bound for one tolerance level: the deterministic
/// pipeline run with the shrunken kernel.
pub fn prob_robust_bound(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    kappa: f64,
) -> Result<KappaBound> {
    prob_robust_bound_with_tau(dist, kernel, kappa, DEFAULT_TAU)
}

pub fn prob_robust_bound_with_tau(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    kappa: f64,
    tau: f64,
) -> Result<KappaBound> {
    let eps = shrunken_epsilon(kernel, kappa)?;
    // The shrunken radius heads to zero as kappa approaches 1/2, so the
    // resolution floor cannot apply here; box overlap stays exact and radii
    // under half a cell collapse to the identity stencil, degrading the bound
    // toward the vanilla one.
    let stencil = kernel
        .with_epsilon(eps.max(f64::MIN_POSITIVE))
        .discretize_unchecked(dist.grid().steps());
    let error = det_robust_error_with(dist, &stencil, tau);
    Ok(KappaBound {
        kappa,
        shrunken_epsilon: eps,
        prob_robust_error: error,
        prob_robust_accuracy_bound: 1.0 - error,
    })
}

/// Probabilistic-robust bounds over an ascending tolerance list. The
/// accuracy bounds must come out non-decreasing; a decrease signals a
/// grid-resolution artifact and is reported as an error.
pub fn kappa_sweep(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    kappas: &[f64],
) -> Result<Vec<KappaBound>> {
    kappa_sweep_with_tau(dist, kernel, kappas, DEFAULT_TAU)
}

pub fn kappa_sweep_with_tau(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    kappas: &[f64],
    tau: f64,
) -> Result<Vec<KappaBound>> {
    if kappas.is_empty() {
        return Err(Error::InvalidSpec(
            "kappa sweep needs at least one value".into(),
        ));
    }
    for pair in kappas.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidSpec(format!(
                "kappa list must be strictly ascending ({} then {})",
                pair[0], pair[1]
            )));
        }
    }
    for &kappa in kappas {
        if !(0.0..0.5).contains(&kappa) {
            return Err(Error::KappaOutOfRange { kappa });
        }
    }
    let entries: Vec<KappaBound> = kappas
        .par_iter()
        .map(|&kappa| prob_robust_bound_with_tau(dist, kernel, kappa, tau))
        .collect::<Result<_>>()?;
    for pair in entries.windows(2) {
        if pair[1].prob_robust_accuracy_bound < pair[0].prob_robust_accuracy_bound {
            return Err(Error::MonotonicityViolation {
                kappa_lo: pair[0].kappa,
                bound_lo: pair[0].prob_robust_accuracy_bound,
                kappa_hi: pair[1].kappa,
                bound_hi: pair[1].prob_robust_accuracy_bound,
            });
        }
    }
    Ok(entries)
}

/// Full report: vanilla, deterministic, and per-kappa probabilistic bounds.
pub fn bounds_report(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    kappas: &[f64],
    tau: f64,
) -> Result<BoundsReport> {
    let stencil = kernel.discretize(dist.grid().steps())?;
    let b_a = bayes_error(dist);
    let b_d = det_robust_error_with(dist, &stencil, tau);
    let entries = kappa_sweep_with_tau(dist, kernel, kappas, tau)?;
    Ok(BoundsReport {
        p: kernel.p,
        epsilon: kernel.epsilon,
        tau,
        grid_shape: dist.grid().shape().to_vec(),
        bayes_error: b_a,
        vanilla_accuracy_bound: 1.0 - b_a,
        det_robust_error: b_d,
        det_robust_accuracy_bound: 1.0 - b_d,
        entries,
    })
}

/// Deterministic bound at several boundary thresholds, sharing the two
/// convolutions; used to report tau sensitivity.
pub fn det_robust_error_tau_sensitivity(
    dist: &GridDistribution,
    kernel: &VicinityKernel,
    taus: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let stencil = kernel.discretize(dist.grid().steps())?;
    let convolved = convolve_with_stencil(dist, &stencil);
    let dagger = convolve_with_stencil(&harden(&convolved), &stencil);
    Ok(taus
        .iter()
        .map(|&tau| {
            let mask = mask_from_dagger(convolved.grid(), &dagger, tau);
            (tau, error_sum(&convolved, Some(&mask)))
        })
        .collect())
}
