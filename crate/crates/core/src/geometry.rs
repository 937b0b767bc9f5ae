//! Vicinity-overlap geometry.
//!
//! Everything the probabilistic bound relies on geometrically lives here:
//! the overlap of two shifted vicinities, the maximal change of the vicinity
//! prediction probability under an input shift, the inverse of that function
//! (minimum adversarial distance), the numerically solved shrunken radius for
//! general norms, and the directional-derivative bound on mu.
//!
//! L-infinity kernels use exact product formulas with the diagonal as the
//! worst shift direction; L1/L2 kernels go through Monte-Carlo overlap
//! integrals with a common random sample set, which keeps the integrand
//! exactly monotone in the shift magnitude so bisection stays sound.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{NormOrder, VicinityKernel};
use crate::rng::{derive_seed, rng_from_seed};

/// Points used by the public Monte-Carlo overlap integral.
const OVERLAP_MC_POINTS: usize = 1_000_000;
/// Points used inside direction searches and bisections.
const SEARCH_MC_POINTS: usize = 1 << 18;
/// Coarse sphere directions per dimension for the L1 search.
const SEARCH_DIRECTIONS_PER_DIM: usize = 128;
/// Absolute bisection tolerance in the shift magnitude.
const BISECT_TOL: f64 = 1e-9;

/// Overlap value with the Monte-Carlo standard error when one applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

/// One row of an overlap profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub phi: f64,
    pub min_overlap: f64,
    pub max_mu_change: f64,
    pub worst_direction: Vec<f64>,
}

/// Minimal-overlap profile of a kernel over shift magnitudes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapProfile {
    pub kernel: VicinityKernel,
    pub rows: Vec<ProfileRow>,
}

/// Fraction of the vicinity volume shared with a copy shifted by `shift`.
///
/// Exact per-axis product for L-infinity; Monte-Carlo with 10^6 points and a
/// reported standard error for L1/L2.
pub fn overlap(kernel: &VicinityKernel, shift: &[f64], seed: u64) -> OverlapEstimate {
    assert_eq!(shift.len(), kernel.dim);
    match kernel.p {
        NormOrder::LInf => OverlapEstimate {
            value: linf_overlap(kernel, shift),
            stderr: None,
        },
        _ => {
            let samples = ball_samples(kernel, OVERLAP_MC_POINTS, seed);
            let value = overlap_fraction(kernel, &samples, shift);
            let stderr = (value * (1.0 - value) / samples.len() as f64).sqrt();
            OverlapEstimate {
                value,
                stderr: Some(stderr),
            }
        }
    }
}

fn linf_overlap(kernel: &VicinityKernel, shift: &[f64]) -> f64 {
    let two_eps = 2.0 * kernel.epsilon;
    shift
        .iter()
        .map(|s| (two_eps - s.abs()).max(0.0) / two_eps)
        .product()
}

fn ball_samples(kernel: &VicinityKernel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| kernel.sample_offset(&mut rng)).collect()
}

fn overlap_fraction(kernel: &VicinityKernel, samples: &[Vec<f64>], shift: &[f64]) -> f64 {
    let mut delta = vec![0.0; kernel.dim];
    let hits = samples
        .iter()
        .filter(|t| {
            for d in 0..kernel.dim {
                delta[d] = t[d] - shift[d];
            }
            kernel.norm(&delta) <= kernel.epsilon
        })
        .count();
    hits as f64 / samples.len() as f64
}

fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut dirs = Vec::with_capacity(count + dim);
    // Always include the axis directions.
    for d in 0..dim {
        let mut e = vec![0.0; dim];
        e[d] = 1.0;
        dirs.push(e);
    }
    while dirs.len() < count + dim {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

fn scaled(dir: &[f64], phi: f64) -> Vec<f64> {
    dir.iter().map(|x| x * phi).collect()
}

/// Shared state for the L1/L2 numeric paths: one sample set and one direction
/// set reused across every shift magnitude, so overlap estimates are exactly
/// non-increasing in phi.
struct McContext {
    samples: Vec<Vec<f64>>,
    directions: Vec<Vec<f64>>,
}

impl McContext {
    fn new(kernel: &VicinityKernel, seed: u64) -> McContext {
        let samples = ball_samples(kernel, SEARCH_MC_POINTS, derive_seed(seed, 0));
        let directions = match kernel.p {
            // Isotropic: any single direction represents them all.
            NormOrder::L2 => unit_directions(kernel.dim, 0, derive_seed(seed, 1)),
            _ => unit_directions(
                kernel.dim,
                SEARCH_DIRECTIONS_PER_DIM * kernel.dim,
                derive_seed(seed, 1),
            ),
        };
        McContext {
            samples,
            directions,
        }
    }

    fn min_overlap(&self, kernel: &VicinityKernel, phi: f64) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_idx = 0;
        for (i, dir) in self.directions.iter().enumerate() {
            let v = overlap_fraction(kernel, &self.samples, &scaled(dir, phi));
            if v < best {
                best = v;
                best_idx = i;
            }
        }
        (best, best_idx)
    }
}

/// The minimum over unit directions of the overlap at shift magnitude `phi`,
/// with the worst direction.
///
/// L-infinity: analytic, the diagonal is the worst direction. L2: direction
/// independent by isotropy. L1: coarse sphere sampling plus local refinement.
pub fn min_direction_overlap(
    kernel: &VicinityKernel,
    phi: f64,
    seed: u64,
) -> (OverlapEstimate, Vec<f64>) {
    assert!(phi >= 0.0);
    let n = kernel.dim;
    match kernel.p {
        NormOrder::LInf => {
            let diag = vec![1.0 / (n as f64).sqrt(); n];
            let value = linf_overlap(kernel, &scaled(&diag, phi));
            (
                OverlapEstimate {
                    value,
                    stderr: None,
                },
                diag,
            )
        }
        NormOrder::L2 => {
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            (overlap(kernel, &scaled(&e1, phi), seed), e1)
        }
        NormOrder::L1 => {
            let ctx = McContext::new(kernel, seed);
            let (_, best_idx) = ctx.min_overlap(kernel, phi);
            let refined = refine_direction(kernel, &ctx, phi, ctx.directions[best_idx].clone());
            let est = overlap(kernel, &scaled(&refined, phi), derive_seed(seed, 2));
            (est, refined)
        }
    }
}

/// Shrinking random perturbations around the best coarse direction.
fn refine_direction(
    kernel: &VicinityKernel,
    ctx: &McContext,
    phi: f64,
    mut dir: Vec<f64>,
) -> Vec<f64> {
    let mut rng = rng_from_seed(0x51ab_e11e);
    let mut best = overlap_fraction(kernel, &ctx.samples, &scaled(&dir, phi));
    let mut sigma = 0.3;
    for _ in 0..40 {
        let cand: Vec<f64> = dir
            .iter()
            .map(|&x| {
                let step: f64 = StandardNormal.sample(&mut rng);
                x + sigma * step
            })
            .collect();
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        let cand: Vec<f64> = cand.into_iter().map(|x| x / norm).collect();
        let v = overlap_fraction(kernel, &ctx.samples, &scaled(&cand, phi));
        if v < best {
            best = v;
            dir = cand;
        }
        sigma *= 0.85;
    }
    dir
}

/// Maximal possible change of mu_k under a shift of magnitude `phi`:
/// 1 minus the minimal directional overlap.
pub fn max_mu_change(kernel: &VicinityKernel, phi: f64, seed: u64) -> f64 {
    1.0 - min_direction_overlap(kernel, phi, seed).0.value
}

/// Overlap profile over a list of shift magnitudes.
pub fn overlap_profile(kernel: &VicinityKernel, phis: &[f64], seed: u64) -> OverlapProfile {
    let rows = phis
        .iter()
        .map(|&phi| {
            let (est, dir) = min_direction_overlap(kernel, phi, seed);
            ProfileRow {
                phi,
                min_overlap: est.value,
                max_mu_change: 1.0 - est.value,
                worst_direction: dir,
            }
        })
        .collect();
    OverlapProfile {
        kernel: *kernel,
        rows,
    }
}

/// Bracket beyond which two vicinities cannot overlap in any direction.
fn bracket_hi(kernel: &VicinityKernel) -> f64 {
    2.0 * kernel.epsilon * (kernel.dim as f64).sqrt()
}

/// Monotone evaluation of the minimal directional overlap used inside the
/// bisections: analytic for L-infinity, fixed common samples and a fixed
/// direction set otherwise.
fn min_overlap_fixed(kernel: &VicinityKernel, ctx: Option<&McContext>, phi: f64) -> f64 {
    match kernel.p {
        NormOrder::LInf => {
            let n = kernel.dim;
            let diag = vec![1.0 / (n as f64).sqrt(); n];
            linf_overlap(kernel, &scaled(&diag, phi))
        }
        _ => ctx.expect("mc context").min_overlap(kernel, phi).0,
    }
}

/// Verify the bisection precondition: the minimal overlap is non-increasing
/// over a phi grid (it is, exactly, for the fixed evaluation sets).
fn check_monotone(kernel: &VicinityKernel, ctx: Option<&McContext>) -> Result<()> {
    let hi = bracket_hi(kernel);
    let mut prev = f64::INFINITY;
    for i in 0..=16 {
        let phi = hi * i as f64 / 16.0;
        let v = min_overlap_fixed(kernel, ctx, phi);
        if v > prev + 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "overlap profile is not monotone at phi={phi}"
            )));
        }
        prev = v;
    }
    Ok(())
}

/// Smallest shift magnitude at which the minimal directional overlap drops to
/// `target`, by bisection.
fn invert_overlap(kernel: &VicinityKernel, ctx: Option<&McContext>, target: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = bracket_hi(kernel);
    // overlap(lo) = 1 >= target >= 0 = overlap(hi)
    let mut iters = 0;
    while hi - lo > BISECT_TOL && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if min_overlap_fixed(kernel, ctx, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    0.5 * (lo + hi)
}

/// Distance below which no adversarial example of a probabilistically
/// consistent input can exist: the shift magnitude where the maximal mu
/// change reaches 1/2 - kappa.
pub fn min_adv_distance(kernel: &VicinityKernel, kappa: f64, seed: u64) -> Result<f64> {
    if !(0.0..0.5).contains(&kappa) {
        return Err(Error::KappaOutOfRange { kappa });
    }
    let ctx = match kernel.p {
        NormOrder::LInf => None,
        _ => Some(McContext::new(kernel, seed)),
    };
    check_monotone(kernel, ctx.as_ref())?;
    // max_mu_change = target  <=>  min overlap = 1/2 + kappa.
    Ok(invert_overlap(kernel, ctx.as_ref(), 0.5 + kappa))
}

/// Radius of the deterministically robust vicinity around a probabilistically
/// consistent input, solved numerically in the kernel's own norm.
///
/// Along a direction, two consistent inputs with different labels can
/// approach until their vicinities overlap by exactly 2 kappa; the nearest
/// adversarial example then sits at the midpoint, a kernel-norm distance of
/// half that shift away. The safe radius is the minimum of this construction
/// over directions. For L-infinity the minimizing direction is the diagonal
/// and the result must match eps(1 - (2 kappa)^(1/n)) within 1e-6 relative;
/// kappa = 0 degenerates to the full radius.
pub fn solve_shrink_numeric(kernel: &VicinityKernel, kappa: f64, seed: u64) -> Result<f64> {
    if !(0.0..0.5).contains(&kappa) {
        return Err(Error::KappaOutOfRange { kappa });
    }
    if kappa == 0.0 {
        return Ok(kernel.epsilon);
    }
    let target = 2.0 * kappa;
    match kernel.p {
        NormOrder::LInf => {
            // Numeric path: bisect the analytic diagonal overlap.
            check_monotone(kernel, None)?;
            let phi_star = invert_overlap(kernel, None, target);
            let diag = vec![1.0 / (kernel.dim as f64).sqrt(); kernel.dim];
            Ok(kernel.norm(&scaled(&diag, 0.5 * phi_star)))
        }
        NormOrder::L2 => {
            // Isotropic: every direction yields the same construction.
            let ctx = McContext::new(kernel, seed);
            check_monotone(kernel, Some(&ctx))?;
            let mut e1 = vec![0.0; kernel.dim];
            e1[0] = 1.0;
            let phi_star = bisect_direction(kernel, &ctx.samples, &e1, target);
            Ok(0.5 * phi_star)
        }
        NormOrder::L1 => l1_min_construction_radius(kernel, target, seed),
    }
}

/// Smallest phi with overlap at most `target` along a fixed direction.
fn bisect_direction(
    kernel: &VicinityKernel,
    samples: &[Vec<f64>],
    dir: &[f64],
    target: f64,
) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = bracket_hi(kernel);
    let mut iters = 0;
    while hi - lo > BISECT_TOL && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if overlap_fraction(kernel, samples, &scaled(dir, mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    0.5 * (lo + hi)
}

/// The worst construction direction depends on the overlap target for L1
/// balls, so minimize the construction radius itself: coarse direction set,
/// local refinement, then a final bisection with the full sample budget.
fn l1_min_construction_radius(kernel: &VicinityKernel, target: f64, seed: u64) -> Result<f64> {
    let coarse = ball_samples(kernel, 16_384, derive_seed(seed, 0));
    let dirs = unit_directions(
        kernel.dim,
        SEARCH_DIRECTIONS_PER_DIM * kernel.dim,
        derive_seed(seed, 1),
    );
    let radius_for = |dir: &[f64], samples: &[Vec<f64>]| -> f64 {
        0.5 * bisect_direction(kernel, samples, dir, target) * kernel.norm(dir)
    };
    let mut best_dir = dirs[0].clone();
    let mut best_r = f64::INFINITY;
    for dir in &dirs {
        let r = radius_for(dir, &coarse);
        if r < best_r {
            best_r = r;
            best_dir = dir.clone();
        }
    }
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    let mut sigma = 0.3;
    for _ in 0..40 {
        let cand: Vec<f64> = best_dir
            .iter()
            .map(|&x| {
                let step: f64 = StandardNormal.sample(&mut rng);
                x + sigma * step
            })
            .collect();
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            let cand: Vec<f64> = cand.into_iter().map(|x| x / norm).collect();
            let r = radius_for(&cand, &coarse);
            if r < best_r {
                best_r = r;
                best_dir = cand;
            }
        }
        sigma *= 0.85;
    }
    let full = ball_samples(kernel, SEARCH_MC_POINTS, derive_seed(seed, 3));
    Ok(radius_for(&best_dir, &full))
}

/// Bound on the directional derivative of mu: 1/(2 eps) analytically in one
/// dimension, a finite-difference sweep over a worst-case half-space step
/// classifier in two.
pub fn directional_derivative_bound(kernel: &VicinityKernel) -> Result<f64> {
    match kernel.dim {
        1 => Ok(1.0 / (2.0 * kernel.epsilon)),
        2 => Ok(numeric_slope_bound_2d(kernel)),
        n => Err(Error::DimUnsupported {
            dim: n,
            reason: "directional derivative bound is analytic in 1-D and numeric in 2-D".into(),
        }),
    }
}

/// Max finite-difference slope of mu for the half-space classifier
/// h(x) = 1 iff x_0 >= 0, stepping along the boundary normal.
fn numeric_slope_bound_2d(kernel: &VicinityKernel) -> f64 {
    let h = kernel.epsilon / 100.0;
    let stencil = kernel.discretize_unchecked(&[h, h]);
    let steps = (kernel.epsilon / h).ceil() as i64 + 2;
    let mu = |cell: i64| -> f64 {
        // Stencil-weighted frequency of label 1 around cell*h along axis 0.
        let mut acc = 0.0;
        let mut total = 0.0;
        for (o, w) in stencil.iter() {
            total += w;
            if cell + o[0] >= 0 {
                acc += w;
            }
        }
        acc / total
    };
    let mut max_slope = 0.0f64;
    let mut prev = mu(-steps);
    for c in (-steps + 1)..=steps {
        let cur = mu(c);
        max_slope = max_slope.max((cur - prev).abs() / h);
        prev = cur;
    }
    max_slope
}
