//! Problem file ingestion: JSON with `dimension`, `grid`, `function`,
//! `basis` and optional `options`.

use serde::Deserialize;

use vpx_core::bases;
use vpx_core::solver::{SingularityPolicy, SolveOptions};
use vpx_core::{BasisFamily, DiscreteDomain, Problem};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub grid: GridSpec,
    pub function: FunctionSpec,
    pub basis: BasisSpec,
    #[serde(default)]
    pub options: FileOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum GridSpec {
    /// Per-axis ranges; points enumerated row-major, last axis fastest.
    Cartesian(Vec<AxisSpec>),
    /// Points listed outright, one coordinate row each.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum FunctionSpec {
    Builtin(String),
    Values(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum BasisSpec {
    Monomials { degree: u32 },
    Trig { harmonics: u32 },
    Gaussians { centers: Vec<Vec<f64>>, widths: Vec<f64> },
    Tabulated { columns: Vec<Vec<f64>>, labels: Vec<String> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileOptions {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub singular_policy: Option<PolicyName>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    Fail,
    Retry,
}

impl From<PolicyName> for SingularityPolicy {
    fn from(p: PolicyName) -> SingularityPolicy {
        match p {
            PolicyName::Fail => SingularityPolicy::Fail,
            PolicyName::Retry => SingularityPolicy::PerturbRetry,
        }
    }
}

/// Flag values that override the file's `options` block.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub singular_policy: Option<SingularityPolicy>,
}

pub fn solve_options(file: &FileOptions, flags: &Overrides) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(t) = flags.tol.or(file.tol) {
        opts.termination_tol = t;
    }
    if let Some(n) = flags.max_iter.or(file.max_iter) {
        opts.max_iterations = n;
    }
    if let Some(s) = flags.seed.or(file.seed) {
        opts.seed = s;
    }
    if let Some(p) = flags
        .singular_policy
        .or_else(|| file.singular_policy.map(SingularityPolicy::from))
    {
        opts.singularity_policy = p;
    }
    opts
}

fn cartesian_points(axes: &[AxisSpec], dimension: usize) -> Result<Vec<f64>, String> {
    if axes.len() != dimension {
        return Err(format!(
            "grid.cartesian lists {} axes but dimension is {}",
            axes.len(),
            dimension
        ));
    }
    let mut total = 1usize;
    for (i, ax) in axes.iter().enumerate() {
        if ax.count == 0 {
            return Err(format!("grid.cartesian axis {i} has count 0"));
        }
        if !(ax.min.is_finite() && ax.max.is_finite()) {
            return Err(format!("grid.cartesian axis {i} has a non-finite bound"));
        }
        total = total
            .checked_mul(ax.count)
            .ok_or_else(|| "cartesian grid size overflows".to_string())?;
    }
    // coordinate formula is part of the format: min + i * ((max-min)/(count-1))
    let steps: Vec<f64> = axes
        .iter()
        .map(|ax| {
            if ax.count == 1 {
                0.0
            } else {
                (ax.max - ax.min) / (ax.count - 1) as f64
            }
        })
        .collect();
    let mut coords = Vec::with_capacity(total * dimension);
    let mut idx = vec![0usize; dimension];
    for _ in 0..total {
        for (j, ax) in axes.iter().enumerate() {
            coords.push(ax.min + idx[j] as f64 * steps[j]);
        }
        // last axis advances fastest
        for j in (0..dimension).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].count {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(coords)
}

fn builtin_function(name: &str) -> Result<Box<dyn Fn(&[f64]) -> f64>, String> {
    match name {
        "exp" => Ok(Box::new(|x: &[f64]| x.iter().sum::<f64>().exp())),
        "runge" => Ok(Box::new(|x: &[f64]| {
            1.0 / (1.0 + 25.0 * x.iter().map(|c| c * c).sum::<f64>())
        })),
        "product" => Ok(Box::new(|x: &[f64]| x.iter().product())),
        "abs-sum" => Ok(Box::new(|x: &[f64]| x.iter().map(|c| c.abs()).sum())),
        other => Err(format!(
            "unknown builtin function \"{other}\" (available: exp, runge, product, abs-sum)"
        )),
    }
}

fn build_family(
    spec: &BasisSpec,
    dimension: usize,
    domain: &DiscreteDomain,
) -> Result<BasisFamily, String> {
    let fam = match spec {
        BasisSpec::Monomials { degree } => bases::monomials(dimension, *degree),
        BasisSpec::Trig { harmonics } => bases::trig(dimension, *harmonics),
        BasisSpec::Gaussians { centers, widths } => bases::gaussians(dimension, centers, widths),
        BasisSpec::Tabulated { columns, labels } => bases::tabulated(domain, columns, labels),
    };
    fam.map_err(|e| format!("basis: {e}"))
}

/// Instantiates the grid, target values and basis family described by the
/// file, already wrapped in a solvable problem.
pub fn build_problem(file: &ProblemFile) -> Result<Problem, String> {
    if file.dimension == 0 {
        return Err("dimension must be at least 1".into());
    }
    let coords = match &file.grid {
        GridSpec::Cartesian(axes) => cartesian_points(axes, file.dimension)?,
        GridSpec::Explicit(points) => {
            let mut coords = Vec::with_capacity(points.len() * file.dimension);
            for (k, p) in points.iter().enumerate() {
                if p.len() != file.dimension {
                    return Err(format!(
                        "grid.explicit point {k} has {} coordinates, expected {}",
                        p.len(),
                        file.dimension
                    ));
                }
                coords.extend_from_slice(p);
            }
            coords
        }
    };
    let point_count = coords.len() / file.dimension;
    let values = match &file.function {
        FunctionSpec::Builtin(name) => {
            let f = builtin_function(name)?;
            (0..point_count)
                .map(|k| f(&coords[k * file.dimension..(k + 1) * file.dimension]))
                .collect()
        }
        FunctionSpec::Values(values) => {
            if values.len() != point_count {
                return Err(format!(
                    "function.values lists {} entries but the grid has {} points",
                    values.len(),
                    point_count
                ));
            }
            values.clone()
        }
    };
    let domain = DiscreteDomain::new(file.dimension, coords, values)
        .map_err(|e| format!("grid: {e}"))?;
    let family = build_family(&file.basis, file.dimension, &domain)?;
    Problem::new(domain, family).map_err(|e| format!("problem: {e}"))
}

/// Valid model for a problem: a0 plus one coefficient per family member.
pub fn check_coefficients(problem: &Problem, coefficients: &[f64]) -> Result<(), String> {
    let expected = problem.family().len() + 1;
    if coefficients.len() != expected {
        return Err(format!(
            "coefficient vector has {} entries, family needs {expected} (a0 first)",
            coefficients.len()
        ));
    }
    if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
        return Err(format!("coefficient vector holds a non-finite entry {bad}"));
    }
    Ok(())
}

/// Used by certify: accepts either a bare coefficient file or a full solve
/// report, both of which carry a `coefficients` array.
#[derive(Debug, Deserialize)]
pub struct CoefficientsFile {
    pub coefficients: Vec<f64>,
}
