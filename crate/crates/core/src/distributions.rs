//! Grid-discretized joint distributions.
//!
//! A [`GridDistribution`] stores the joint density p(x, y=k) at cell centers
//! for each class k, normalized so the midpoint sum over all cells and
//! classes is 1. Distributions are built from analytic specifications
//! (truncated normal mixtures, the two-moons construction, piecewise uniform
//! boxes) or from labeled samples via kernel density estimation, and are
//! immutable afterwards.

use std::io::{BufWriter, Write as _};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;

/// Joint distribution p(x, y) discretized at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    grid: GridGeometry,
    class_densities: Vec<Vec<f64>>,
}

/// Posterior class probabilities at one cell.
///
/// At cells with zero marginal density the posterior is declared uniform and
/// `zero_marginal` is set, which keeps the downstream argmax total.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub probs: Vec<f64>,
    pub zero_marginal: bool,
}

impl GridDistribution {
    /// Assemble from per-class density grids. Validates shapes, finiteness,
    /// non-negativity, and total mass (must be 1 within 1e-6).
    pub fn new(grid: GridGeometry, class_densities: Vec<Vec<f64>>) -> Result<Self> {
        if class_densities.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 classes, got {}",
                class_densities.len()
            )));
        }
        for dens in &class_densities {
            if dens.len() != grid.len() {
                return Err(Error::Format(format!(
                    "density array length {} does not match grid cell count {}",
                    dens.len(),
                    grid.len()
                )));
            }
        }
        let d = GridDistribution {
            grid,
            class_densities,
        };
        d.check_values()?;
        let mass = d.total_mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "total mass {mass} is not 1 within 1e-6"
            )));
        }
        Ok(d)
    }

    /// Like [`GridDistribution::new`] but without the unit-mass requirement;
    /// used by the bound pipeline for intermediate products that only need to
    /// preserve the input's mass.
    pub(crate) fn from_raw(grid: GridGeometry, class_densities: Vec<Vec<f64>>) -> Self {
        GridDistribution {
            grid,
            class_densities,
        }
    }

    /// Evaluate a joint density function at every cell center and normalize.
    /// `f(x, k)` must return the (possibly unnormalized) joint density of
    /// class `k` at point `x`.
    pub fn from_density_fn(
        grid: GridGeometry,
        num_classes: usize,
        f: impl Fn(&[f64], usize) -> f64 + Sync,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let centers: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.center(i)).collect();
        let mut class_densities = Vec::with_capacity(num_classes);
        for k in 0..num_classes {
            let dens: Vec<f64> = centers.par_iter().map(|x| f(x, k)).collect();
            class_densities.push(dens);
        }
        let mut d = GridDistribution {
            grid,
            class_densities,
        };
        d.check_values()?;
        d.normalize()?;
        Ok(d)
    }

    fn check_values(&self) -> Result<()> {
        for dens in &self.class_densities {
            for (cell, &v) in dens.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFiniteDensity { cell });
                }
            }
        }
        Ok(())
    }

    /// Scale all densities so the total mass is exactly 1. Errors if any
    /// class carries no mass.
    fn normalize(&mut self) -> Result<()> {
        let vol = self.grid.cell_volume();
        for (k, dens) in self.class_densities.iter().enumerate() {
            if dens.iter().sum::<f64>() * vol == 0.0 {
                return Err(Error::EmptyClass { class: k });
            }
        }
        let total = self.total_mass();
        for dens in &mut self.class_densities {
            for v in dens.iter_mut() {
                *v /= total;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn num_classes(&self) -> usize {
        self.class_densities.len()
    }

    /// Joint density p(x=cell, y=class).
    pub fn density(&self, class: usize, cell: usize) -> f64 {
        self.class_densities[class][cell]
    }

    pub fn class_density(&self, class: usize) -> &[f64] {
        &self.class_densities[class]
    }

    /// Marginal density p(x=cell) = sum over classes.
    pub fn marginal(&self, cell: usize) -> f64 {
        self.class_densities.iter().map(|d| d[cell]).sum()
    }

    /// Posterior P(y | x=cell); uniform (flagged) at zero-marginal cells.
    pub fn posterior(&self, cell: usize) -> Posterior {
        let mut probs = vec![0.0; self.num_classes()];
        let zero_marginal = !self.posterior_into(cell, &mut probs);
        Posterior {
            probs,
            zero_marginal,
        }
    }

    /// Allocation-free posterior; returns false when the marginal is zero and
    /// the uniform fallback was used.
    pub fn posterior_into(&self, cell: usize, out: &mut [f64]) -> bool {
        let marginal = self.marginal(cell);
        if marginal == 0.0 {
            let u = 1.0 / self.num_classes() as f64;
            out.iter_mut().for_each(|p| *p = u);
            return false;
        }
        for (k, p) in out.iter_mut().enumerate() {
            *p = self.class_densities[k][cell] / marginal;
        }
        true
    }

    /// Class with maximal joint density at a cell; ties break to the lowest
    /// class index. Zero-marginal cells resolve to class 0 via the uniform
    /// posterior convention.
    pub fn argmax_class(&self, cell: usize) -> usize {
        let mut best = 0usize;
        let mut best_v = self.class_densities[0][cell];
        for k in 1..self.num_classes() {
            let v = self.class_densities[k][cell];
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        best
    }

    /// Total probability mass (midpoint sum).
    pub fn total_mass(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.class_densities
            .iter()
            .map(|d| d.iter().sum::<f64>())
            .sum::<f64>()
            * vol
    }

    /// Probability mass of one class.
    pub fn class_mass(&self, class: usize) -> f64 {
        self.class_densities[class].iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let doc = GridDistributionFile {
            format_version: 1,
            domain: self.grid.domain().to_vec(),
            shape: self.grid.shape().to_vec(),
            num_classes: self.num_classes(),
            class_densities: self.class_densities.clone(),
        };
        serde_json::to_writer(&mut w, &doc).map_err(|e| Error::Format(e.to_string()))?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let doc: GridDistributionFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format_version != 1 {
            return Err(Error::Format(format!(
                "unsupported distribution format version {}",
                doc.format_version
            )));
        }
        if doc.class_densities.len() != doc.num_classes {
            return Err(Error::Format(
                "num_classes does not match density array count".into(),
            ));
        }
        let grid = GridGeometry::from_parts(doc.domain, doc.shape)?;
        GridDistribution::new(grid, doc.class_densities)
    }
}

#[derive(Serialize, Deserialize)]
struct GridDistributionFile {
    format_version: u32,
    domain: Vec<[f64; 2]>,
    shape: Vec<usize>,
    num_classes: usize,
    class_densities: Vec<Vec<f64>>,
}

/// One Gaussian component of a mixture class: per-dimension mean and scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weight: f64,
}

/// Axis-aligned uniform box component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub weight: f64,
}

/// The supported analytic / estimated distribution families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SpecKind {
    /// Per class, a mixture of axis-aligned Gaussians truncated to the domain.
    TruncatedNormalMixture { classes: Vec<Vec<MixtureComponent>> },
    /// Two interleaving crescents: unit upper semicircle centered at the
    /// origin vs. the reflected unit semicircle centered at (1, 0.5), arc
    /// parameter uniform, isotropic Gaussian noise.
    Moons { noise: f64 },
    /// Per class, a mixture of uniform boxes.
    PiecewiseUniform { classes: Vec<Vec<UniformBox>> },
    /// Kernel density estimate from labeled samples: one axis-aligned
    /// Gaussian per sample, bandwidth per dimension from Scott's factor
    /// n^(-1/(d+4)) times the per-dimension sample standard deviation unless
    /// overridden.
    KdeSamples {
        /// One row per sample: coordinates then an integer class label.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<Vec<Vec<f64>>>,
        /// Delimited text file with the same row layout.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples_path: Option<String>,
        /// Per-dimension bandwidth override.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth: Option<Vec<f64>>,
    },
}

/// Buildable description of a grid distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub spec_version: u32,
    pub priors: Vec<f64>,
    pub domain: Vec<[f64; 2]>,
    pub shape: Vec<usize>,
    #[serde(flatten)]
    pub kind: SpecKind,
}

impl DistributionSpec {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut spec: DistributionSpec =
            serde_json::from_slice(&bytes).map_err(|e| Error::Format(e.to_string()))?;
        // Resolve a relative samples_path against the spec file's directory.
        if let SpecKind::KdeSamples {
            samples_path: Some(sp),
            ..
        } = &mut spec.kind
        {
            let p = Path::new(sp.as_str());
            if p.is_relative() {
                if let Some(parent) = path.parent() {
                    *sp = parent.join(p).to_string_lossy().into_owned();
                }
            }
        }
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.spec_version != 1 {
            return Err(Error::InvalidSpec(format!(
                "unsupported spec_version {}",
                self.spec_version
            )));
        }
        let k = self.priors.len();
        if k < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 class priors, got {k}"
            )));
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.priors.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "priors must be positive and sum to 1 within 1e-12 (sum={sum})"
            )));
        }
        match &self.kind {
            SpecKind::TruncatedNormalMixture { classes } => {
                if classes.len() != k {
                    return Err(Error::InvalidSpec(
                        "class count does not match priors length".into(),
                    ));
                }
                for class in classes {
                    if class.is_empty() {
                        return Err(Error::InvalidSpec("class has no components".into()));
                    }
                    let wsum: f64 = class.iter().map(|c| c.weight).sum();
                    if (wsum - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "component weights must sum to 1 (got {wsum})"
                        )));
                    }
                    for c in class {
                        if c.mean.len() != self.domain.len() || c.scale.len() != self.domain.len()
                        {
                            return Err(Error::InvalidSpec(
                                "component mean/scale dimension mismatch".into(),
                            ));
                        }
                        if c.scale.iter().any(|&s| s <= 0.0) || c.weight <= 0.0 {
                            return Err(Error::InvalidSpec(
                                "component scales and weights must be positive".into(),
                            ));
                        }
                    }
                }
            }
            SpecKind::Moons { noise } => {
                if self.domain.len() != 2 {
                    return Err(Error::InvalidSpec("moons is two-dimensional".into()));
                }
                if k != 2 {
                    return Err(Error::InvalidSpec("moons has exactly 2 classes".into()));
                }
                if *noise <= 0.0 {
                    return Err(Error::InvalidSpec("moons noise must be positive".into()));
                }
            }
            SpecKind::PiecewiseUniform { classes } => {
                if classes.len() != k {
                    return Err(Error::InvalidSpec(
                        "class count does not match priors length".into(),
                    ));
                }
                for class in classes {
                    if class.is_empty() {
                        return Err(Error::InvalidSpec("class has no boxes".into()));
                    }
                    let wsum: f64 = class.iter().map(|b| b.weight).sum();
                    if (wsum - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "box weights must sum to 1 (got {wsum})"
                        )));
                    }
                    for b in class {
                        if b.lo.len() != self.domain.len()
                            || b.hi.len() != self.domain.len()
                            || b.lo.iter().zip(&b.hi).any(|(l, h)| l >= h)
                            || b.weight <= 0.0
                        {
                            return Err(Error::InvalidSpec("malformed uniform box".into()));
                        }
                    }
                }
            }
            SpecKind::KdeSamples { .. } => {} // validated against the loaded table
        }
        Ok(())
    }
}

/// Build, validate, and normalize a grid distribution from a spec.
///
/// Analytic kinds evaluate the class-conditional PDF at cell centers,
/// multiply by priors, and renormalize the total mass to 1. Construction is
/// deterministic given the spec.
pub fn build_distribution(spec: &DistributionSpec) -> Result<GridDistribution> {
    spec.validate()?;
    let grid = GridGeometry::new(spec.domain.clone(), spec.shape.clone())?;
    let k = spec.priors.len();

    let conditionals: Vec<Vec<f64>> = match &spec.kind {
        SpecKind::TruncatedNormalMixture { classes } => {
            eval_conditionals(&grid, k, |x, class| mixture_pdf(&classes[class], x))
        }
        SpecKind::Moons { noise } => {
            let arcs = moons_arcs();
            eval_conditionals(&grid, k, |x, class| arc_pdf(&arcs[class], *noise, x))
        }
        SpecKind::PiecewiseUniform { classes } => {
            eval_conditionals(&grid, k, |x, class| boxes_pdf(&classes[class], x))
        }
        SpecKind::KdeSamples {
            samples,
            samples_path,
            bandwidth,
        } => {
            let table = match (samples, samples_path) {
                (Some(rows), _) => SampleTable::from_rows(rows.clone(), grid.dim())?,
                (None, Some(path)) => SampleTable::load(Path::new(path), grid.dim())?,
                (None, None) => {
                    return Err(Error::InvalidSpec(
                        "kde_samples needs inline samples or a samples_path".into(),
                    ))
                }
            };
            kde_conditionals(&grid, k, &table, bandwidth.as_deref())?
        }
    };

    let vol = grid.cell_volume();
    let mut joint: Vec<Vec<f64>> = conditionals
        .into_iter()
        .zip(&spec.priors)
        .map(|(dens, &prior)| dens.into_iter().map(|v| v * prior).collect::<Vec<f64>>())
        .collect();

    for dens in &joint {
        for (cell, &v) in dens.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFiniteDensity { cell });
            }
        }
    }

    // The analytic mass is 1 by construction, so the midpoint sum over the
    // domain measures how much the domain clips.
    let mass_on_domain: f64 = joint.iter().map(|d| d.iter().sum::<f64>()).sum::<f64>() * vol;
    if mass_on_domain < 0.99 {
        return Err(Error::DomainTooSmall {
            clipped_percent: (1.0 - mass_on_domain) * 100.0,
        });
    }
    for (class, dens) in joint.iter().enumerate() {
        if dens.iter().sum::<f64>() * vol == 0.0 {
            return Err(Error::EmptyClass { class });
        }
    }
    for dens in &mut joint {
        for v in dens.iter_mut() {
            *v /= mass_on_domain;
        }
    }
    GridDistribution::new(grid, joint)
}

fn eval_conditionals(
    grid: &GridGeometry,
    num_classes: usize,
    f: impl Fn(&[f64], usize) -> f64 + Sync,
) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.center(i)).collect();
    (0..num_classes)
        .map(|k| centers.par_iter().map(|x| f(x, k)).collect())
        .collect()
}

fn normal_pdf_1d(x: f64, mean: f64, scale: f64) -> f64 {
    let z = (x - mean) / scale;
    (-0.5 * z * z).exp() / (scale * (2.0 * std::f64::consts::PI).sqrt())
}

fn mixture_pdf(components: &[MixtureComponent], x: &[f64]) -> f64 {
    components
        .iter()
        .map(|c| {
            let mut p = c.weight;
            for d in 0..x.len() {
                p *= normal_pdf_1d(x[d], c.mean[d], c.scale[d]);
            }
            p
        })
        .sum()
}

fn boxes_pdf(boxes: &[UniformBox], x: &[f64]) -> f64 {
    boxes
        .iter()
        .map(|b| {
            let inside = x
                .iter()
                .zip(&b.lo)
                .zip(&b.hi)
                .all(|((&xi, &lo), &hi)| xi >= lo && xi < hi);
            if inside {
                let vol: f64 = b.lo.iter().zip(&b.hi).map(|(l, h)| h - l).product();
                b.weight / vol
            } else {
                0.0
            }
        })
        .sum()
}

const MOON_ARC_POINTS: usize = 1024;

/// Midpoint samples of the two unit semicircle arcs.
fn moons_arcs() -> [Vec<[f64; 2]>; 2] {
    let mut upper = Vec::with_capacity(MOON_ARC_POINTS);
    let mut lower = Vec::with_capacity(MOON_ARC_POINTS);
    for i in 0..MOON_ARC_POINTS {
        let t = (i as f64 + 0.5) / MOON_ARC_POINTS as f64 * std::f64::consts::PI;
        upper.push([t.cos(), t.sin()]);
        lower.push([1.0 - t.cos(), 0.5 - t.sin()]);
    }
    [upper, lower]
}

/// Density of a uniformly parameterized arc convolved with isotropic
/// Gaussian noise, by midpoint quadrature over the arc parameter.
fn arc_pdf(arc: &[[f64; 2]], noise: f64, x: &[f64]) -> f64 {
    let inv_two_var = 1.0 / (2.0 * noise * noise);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * noise * noise);
    // Gaussian terms beyond 8 sigma are below 1e-14 of the peak.
    let cutoff = (8.0 * noise) * (8.0 * noise);
    let mut acc = 0.0;
    for c in arc {
        let dx = x[0] - c[0];
        let dy = x[1] - c[1];
        let d2 = dx * dx + dy * dy;
        if d2 < cutoff {
            acc += (-d2 * inv_two_var).exp();
        }
    }
    acc * norm / arc.len() as f64
}

/// Labeled sample table: coordinate rows grouped by class.
pub struct SampleTable {
    pub by_class: Vec<Vec<Vec<f64>>>,
}

impl SampleTable {
    /// Parse rows of `coords..., label`; the label must be a non-negative
    /// integer and every row must have `dim` coordinates.
    pub fn from_rows(rows: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        let mut by_class: Vec<Vec<Vec<f64>>> = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim + 1 {
                return Err(Error::Format(format!(
                    "sample row {i} has {} values, expected {} coordinates plus a label",
                    row.len(),
                    dim
                )));
            }
            let label_f = row[dim];
            if label_f < 0.0 || label_f.fract() != 0.0 || !label_f.is_finite() {
                return Err(Error::Format(format!(
                    "sample row {i} has non-integer label {label_f}"
                )));
            }
            let label = label_f as usize;
            if by_class.len() <= label {
                by_class.resize_with(label + 1, Vec::new);
            }
            by_class[label].push(row[..dim].to_vec());
        }
        Ok(SampleTable { by_class })
    }

    /// Load delimited text: one row per sample, whitespace- or
    /// comma-separated, last column the integer label. Lines starting with
    /// `#` are comments.
    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = if line.contains(',') {
                line.split(',').map(str::trim).collect()
            } else {
                line.split_whitespace().collect()
            };
            let mut row = Vec::with_capacity(fields.len());
            for f in fields {
                row.push(f.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: cannot parse {f:?}", lineno + 1))
                })?);
            }
            rows.push(row);
        }
        Self::from_rows(rows, dim)
    }
}

/// Scott's factor bandwidth: n^(-1/(d+4)) times the per-dimension sample
/// standard deviation.
fn scott_bandwidth(samples: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let n = samples.len() as f64;
    let factor = n.powf(-1.0 / (dim as f64 + 4.0));
    let mut bw = Vec::with_capacity(dim);
    for d in 0..dim {
        let mean = samples.iter().map(|s| s[d]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "samples have zero variance in dimension {d}; supply an explicit bandwidth"
            )));
        }
        bw.push(factor * sd);
    }
    Ok(bw)
}

fn kde_conditionals(
    grid: &GridGeometry,
    num_classes: usize,
    table: &SampleTable,
    bandwidth_override: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>> {
    if table.by_class.len() > num_classes {
        return Err(Error::InvalidSpec(format!(
            "samples contain label {} but only {num_classes} priors were given",
            table.by_class.len() - 1
        )));
    }
    let dim = grid.dim();
    let centers: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.center(i)).collect();
    let mut out = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let samples = table.by_class.get(k).map_or(&[][..], |v| &v[..]);
        if samples.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "kde_samples requires at least 2 samples per class; class {k} has {}",
                samples.len()
            )));
        }
        let bw = match bandwidth_override {
            Some(b) => {
                if b.len() != dim || b.iter().any(|&h| h <= 0.0) {
                    return Err(Error::InvalidSpec(
                        "bandwidth override must be positive per dimension".into(),
                    ));
                }
                b.to_vec()
            }
            None => scott_bandwidth(samples, dim)?,
        };
        let inv_n = 1.0 / samples.len() as f64;
        let dens: Vec<f64> = centers
            .par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for s in samples {
                    let mut p = 1.0;
                    for d in 0..dim {
                        p *= normal_pdf_1d(x[d], s[d], bw[d]);
                    }
                    acc += p;
                }
                acc * inv_n
            })
            .collect();
        out.push(dens);
    }
    Ok(out)
}

/// Canonical ready-made specs used by the test suites and the CLI presets.
pub mod presets {
    use super::*;

    /// 1-D two-Normal running example: equal priors, N(-1, 0.8) vs
    /// N(+1, 0.8) on [-5, 5] with 2000 cells.
    pub fn normals_1d() -> DistributionSpec {
        DistributionSpec {
            spec_version: 1,
            priors: vec![0.5, 0.5],
            domain: vec![[-5.0, 5.0]],
            shape: vec![2000],
            kind: SpecKind::TruncatedNormalMixture {
                classes: vec![
                    vec![MixtureComponent {
                        mean: vec![-1.0],
                        scale: vec![0.8],
                        weight: 1.0,
                    }],
                    vec![MixtureComponent {
                        mean: vec![1.0],
                        scale: vec![0.8],
                        weight: 1.0,
                    }],
                ],
            },
        }
    }

    /// 1-D step distribution: uniform marginal 1/2 on [-1, 1], class 0 on
    /// [-1, 0), class 1 on [0, 1). The grid is aligned so the interval
    /// endpoints fall on cell boundaries.
    pub fn step_1d() -> DistributionSpec {
        DistributionSpec {
            spec_version: 1,
            priors: vec![0.5, 0.5],
            domain: vec![[-1.2, 1.2]],
            shape: vec![2400],
            kind: SpecKind::PiecewiseUniform {
                classes: vec![
                    vec![UniformBox {
                        lo: vec![-1.0],
                        hi: vec![0.0],
                        weight: 1.0,
                    }],
                    vec![UniformBox {
                        lo: vec![0.0],
                        hi: vec![1.0],
                        weight: 1.0,
                    }],
                ],
            },
        }
    }

    /// Two-moons with noise 0.1 on [-1.5, 2.5] x [-1.0, 1.5], 400 x 250 cells.
    pub fn moons() -> DistributionSpec {
        DistributionSpec {
            spec_version: 1,
            priors: vec![0.5, 0.5],
            domain: vec![[-1.5, 2.5], [-1.0, 1.5]],
            shape: vec![400, 250],
            kind: SpecKind::Moons { noise: 0.1 },
        }
    }

    pub fn by_name(name: &str) -> Result<DistributionSpec> {
        match name {
            "normals1d" => Ok(normals_1d()),
            "step1d" => Ok(step_1d()),
            "moons" => Ok(moons()),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset {other:?}; expected normals1d, step1d, or moons"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normals_build_normalizes() {
        let d = build_distribution(&presets::normals_1d()).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-6);
        assert_eq!(d.num_classes(), 2);
        assert!((d.class_mass(0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn posterior_is_density_ratio() {
        let grid = GridGeometry::new(vec![[0.0, 1.0]], vec![2]).unwrap();
        // Cell densities (0.3, 0.1) and (0.1, 0.3), scaled to unit mass.
        let d = GridDistribution::new(
            grid,
            vec![vec![0.3 * 2.5, 0.1 * 2.5], vec![0.1 * 2.5, 0.3 * 2.5]],
        )
        .unwrap();
        let p = d.posterior(0);
        assert!(!p.zero_marginal);
        assert!((p.probs[0] - 0.75).abs() < 1e-12);
        assert!((p.probs[1] - 0.25).abs() < 1e-12);
        assert!((d.marginal(0) - 0.4 * 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_marginal_posterior_is_uniform_flagged() {
        let grid = GridGeometry::new(vec![[0.0, 1.0]], vec![2]).unwrap();
        let d = GridDistribution::new(grid, vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let p = d.posterior(0);
        assert!(p.zero_marginal);
        assert_eq!(p.probs, vec![0.5, 0.5]);
        assert_eq!(d.marginal(0), 0.0);
    }

    #[test]
    fn normals_posterior_balanced_at_center() {
        let d = build_distribution(&presets::normals_1d()).unwrap();
        let cell = d.grid().clamp_point(&[0.0]);
        let p = d.posterior(cell);
        assert!((p.probs[0] - 0.5).abs() < 3e-3);
        assert!((p.probs[0] + p.probs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_components_sum_to_one_everywhere() {
        let d = build_distribution(&presets::step_1d()).unwrap();
        let mut buf = vec![0.0; 2];
        for cell in 0..d.grid().len() {
            d.posterior_into(cell, &mut buf);
            assert!((buf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_sums_to_one() {
        let d = build_distribution(&presets::step_1d()).unwrap();
        let vol = d.grid().cell_volume();
        let mass: f64 = (0..d.grid().len()).map(|c| d.marginal(c) * vol).sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn step_distribution_is_exact_on_aligned_grid() {
        let d = build_distribution(&presets::step_1d()).unwrap();
        let g = d.grid().clone();
        let inside = g.clamp_point(&[0.5]);
        let outside = g.clamp_point(&[1.1]);
        assert!((d.marginal(inside) - 0.5).abs() < 1e-12);
        assert_eq!(d.marginal(outside), 0.0);
        assert_eq!(d.argmax_class(g.clamp_point(&[-0.3])), 0);
        assert_eq!(d.argmax_class(g.clamp_point(&[0.3])), 1);
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_distribution(&presets::normals_1d()).unwrap();
        let b = build_distribution(&presets::normals_1d()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn domain_too_small_reports_clipped_mass() {
        let mut spec = presets::normals_1d();
        spec.domain = vec![[-1.0, 1.0]];
        spec.shape = vec![400];
        match build_distribution(&spec) {
            Err(Error::DomainTooSmall { clipped_percent }) => {
                assert!(clipped_percent > 1.0 && clipped_percent < 100.0);
            }
            other => panic!("expected DomainTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn empty_class_detected() {
        // Class 1 has a tiny prior and sits entirely outside the domain, so
        // the clipped mass stays under 1% and the empty class is the error.
        let spec = DistributionSpec {
            spec_version: 1,
            priors: vec![0.995, 0.005],
            domain: vec![[0.0, 1.0]],
            shape: vec![100],
            kind: SpecKind::PiecewiseUniform {
                classes: vec![
                    vec![UniformBox {
                        lo: vec![0.2],
                        hi: vec![0.8],
                        weight: 1.0,
                    }],
                    vec![UniformBox {
                        lo: vec![5.0],
                        hi: vec![6.0],
                        weight: 1.0,
                    }],
                ],
            },
        };
        match build_distribution(&spec) {
            Err(Error::EmptyClass { class: 1 }) => {}
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn kde_requires_two_samples_per_class() {
        let spec = DistributionSpec {
            spec_version: 1,
            priors: vec![0.5, 0.5],
            domain: vec![[-3.0, 3.0]],
            shape: vec![100],
            kind: SpecKind::KdeSamples {
                samples: Some(vec![
                    vec![-1.0, 0.0],
                    vec![-1.2, 0.0],
                    vec![1.0, 1.0], // single class-1 sample
                ]),
                samples_path: None,
                bandwidth: None,
            },
        };
        match build_distribution(&spec) {
            Err(Error::InvalidSpec(msg)) => assert!(msg.contains("at least 2 samples")),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn kde_builds_and_is_deterministic() {
        let spec = DistributionSpec {
            spec_version: 1,
            priors: vec![0.5, 0.5],
            domain: vec![[-4.0, 4.0]],
            shape: vec![400],
            kind: SpecKind::KdeSamples {
                samples: Some(vec![
                    vec![-1.0, 0.0],
                    vec![-0.8, 0.0],
                    vec![-1.3, 0.0],
                    vec![-0.9, 0.0],
                    vec![1.0, 1.0],
                    vec![0.9, 1.0],
                    vec![1.2, 1.0],
                    vec![1.1, 1.0],
                ]),
                samples_path: None,
                bandwidth: None,
            },
        };
        let a = build_distribution(&spec).unwrap();
        let b = build_distribution(&spec).unwrap();
        assert_eq!(a, b);
        assert!((a.total_mass() - 1.0).abs() < 1e-6);
        assert_eq!(a.argmax_class(a.grid().clamp_point(&[-1.0])), 0);
        assert_eq!(a.argmax_class(a.grid().clamp_point(&[1.0])), 1);
    }

    #[test]
    fn non_finite_density_rejected() {
        let grid = GridGeometry::new(vec![[0.0, 1.0]], vec![4]).unwrap();
        let r = GridDistribution::from_density_fn(grid, 2, |x, _| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                1.0
            }
        });
        assert!(matches!(r, Err(Error::NonFiniteDensity { .. })));
    }

    #[test]
    fn distribution_roundtrip() {
        let d = build_distribution(&presets::step_1d()).unwrap();
        let dir = std::env::temp_dir().join("bayesbound-test-dist");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("step.dist.json");
        d.save(&path).unwrap();
        let loaded = GridDistribution::load(&path).unwrap();
        assert_eq!(d, loaded);
    }

    #[test]
    fn sample_table_parses_delimited_text() {
        let dir = std::env::temp_dir().join("bayesbound-test-samples");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.csv");
        std::fs::write(&path, "# header comment\n0.5, 1.5, 0\n-0.25 2.5 1\n\n").unwrap();
        let t = SampleTable::load(&path, 2).unwrap();
        assert_eq!(t.by_class.len(), 2);
        assert_eq!(t.by_class[0], vec![vec![0.5, 1.5]]);
        assert_eq!(t.by_class[1], vec![vec![-0.25, 2.5]]);
        assert!(SampleTable::load(&path, 3).is_err());
    }

    #[test]
    fn spec_roundtrip_preserves_kind() {
        let dir = std::env::temp_dir().join("bayesbound-test-spec");
        std::fs::create_dir_all(&dir).unwrap();
        for (name, spec) in [
            ("normals", presets::normals_1d()),
            ("step", presets::step_1d()),
            ("moons", presets::moons()),
        ] {
            let path = dir.join(format!("{name}.spec.json"));
            spec.save(&path).unwrap();
            let loaded = DistributionSpec::load(&path).unwrap();
            let a = serde_json::to_string(&spec).unwrap();
            let b = serde_json::to_string(&loaded).unwrap();
            assert_eq!(a, b);
        }
    }
}
