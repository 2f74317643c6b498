//! Problem data: the sample grid, the basis family defining the model, and
//! residual bookkeeping for candidate coefficient vectors.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Evaluable basis function `g_i: R^d -> R`.
pub type BasisFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Construction errors for problem data.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("domain holds no points")]
    EmptyDomain,
    #[error("points must have dimension at least 1")]
    ZeroDimensional,
    #[error("{coords} coordinates do not form whole points of dimension {dim}")]
    CoordCount { coords: usize, dim: usize },
    #[error("{points} points paired with {values} target values")]
    ValueCount { points: usize, values: usize },
    #[error("non-finite coordinate or value at point {index}")]
    NonFinite { index: usize },
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("a basis family needs at least one function")]
    EmptyFamily,
    #[error("{functions} basis functions paired with {labels} labels")]
    LabelCount { functions: usize, labels: usize },
    #[error("domain dimension {domain} does not match family dimension {family}")]
    DimensionMismatch { domain: usize, family: usize },
    #[error("domain has {available} points; need at least {needed}")]
    TooFewPoints { needed: usize, available: usize },
}

/// Finite evaluation set: the points the approximation error is measured on,
/// together with the sampled target value f(x) at each point.
///
/// Points are pairwise distinct under exact coordinate comparison, and every
/// downstream argmax scan breaks ties by the point order fixed here.
#[derive(Debug, Clone)]
pub struct DiscreteDomain {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
}

impl DiscreteDomain {
    /// Builds from a flat row-major coordinate buffer: point k occupies
    /// `coords[k*dim .. (k+1)*dim]`.
    pub fn new(dim: usize, coords: Vec<f64>, values: Vec<f64>) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::ZeroDimensional);
        }
        if coords.len() % dim != 0 {
            return Err(ProblemError::CoordCount {
                coords: coords.len(),
                dim,
            });
        }
        let points = coords.len() / dim;
        if points == 0 {
            return Err(ProblemError::EmptyDomain);
        }
        if values.len() != points {
            return Err(ProblemError::ValueCount {
                points,
                values: values.len(),
            });
        }
        for index in 0..points {
            let p = &coords[index * dim..(index + 1) * dim];
            if p.iter().any(|c| !c.is_finite()) || !values[index].is_finite() {
                return Err(ProblemError::NonFinite { index });
            }
        }
        let domain = DiscreteDomain { dim, coords, values };
        if let Some((first, second)) = domain.find_duplicate() {
            return Err(ProblemError::DuplicatePoint { first, second });
        }
        Ok(domain)
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        // coordinates are finite, so the lexicographic order is total
        order.sort_unstable_by(|&a, &b| {
            self.point(a)
                .partial_cmp(self.point(b))
                .expect("finite coordinates")
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Some((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The model's basis functions g1..gn with printable labels. The constant
/// term is not a member: it is carried by the leading model coefficient.
#[derive(Clone)]
pub struct BasisFamily {
    dim: usize,
    functions: Vec<Arc<BasisFn>>,
    labels: Vec<String>,
}

impl BasisFamily {
    pub fn new(
        dim: usize,
        functions: Vec<Arc<BasisFn>>,
        labels: Vec<String>,
    ) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::ZeroDimensional);
        }
        if functions.is_empty() {
            return Err(ProblemError::EmptyFamily);
        }
        if functions.len() != labels.len() {
            return Err(ProblemError::LabelCount {
                functions: functions.len(),
                labels: labels.len(),
            });
        }
        Ok(BasisFamily { dim, functions, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis functions n (the model has n+1 coefficients).
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn evaluate(&self, i: usize, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        (self.functions[i])(x)
    }

    /// (g1(x), ..., gn(x)): the embedding the hull geometry works in.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        self.functions.iter().map(|g| g(x)).collect()
    }

    /// (1, g1(x), ..., gn(x)): one row of the equal-deviation system without
    /// its sign column.
    pub fn lift_with_one(&self, x: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(1.0);
        v.extend(self.lift(x));
        v
    }
}

impl fmt::Debug for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisFamily")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .finish()
    }
}

/// Model coefficients (a0, a1, ..., an); a0 multiplies the implicit constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub a: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(a: Vec<f64>) -> Self {
        CoefficientVector { a }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// A domain paired with a compatible basis family. Construction checks the
/// dimensions agree and that the domain is large enough to hold a signed
/// basis of n+2 points.
#[derive(Debug, Clone)]
pub struct Problem {
    domain: DiscreteDomain,
    family: BasisFamily,
}

impl Problem {
    pub fn new(domain: DiscreteDomain, family: BasisFamily) -> Result<Self, ProblemError> {
        if domain.dim() != family.dim() {
            return Err(ProblemError::DimensionMismatch {
                domain: domain.dim(),
                family: family.dim(),
            });
        }
        let needed = family.len() + 2;
        if domain.len() < needed {
            return Err(ProblemError::TooFewPoints {
                needed,
                available: domain.len(),
            });
        }
        Ok(Problem { domain, family })
    }

    pub fn domain(&self) -> &DiscreteDomain {
        &self.domain
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.family.len()
    }
}

/// Residuals r_k = f(x_k) - L(A, x_k) over the whole domain, with the largest
/// magnitude and the lowest index attaining it.
#[derive(Debug, Clone)]
pub struct DeviationProfile {
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub argmax_index: usize,
}

/// a0 + a1*g1(x) + ... + an*gn(x).
///
/// Panics on coefficient or point dimension mismatch; those are caller bugs,
/// not data conditions.
pub fn evaluate_model(coeffs: &CoefficientVector, family: &BasisFamily, x: &[f64]) -> f64 {
    assert_eq!(
        coeffs.len(),
        family.len() + 1,
        "model needs n+1 coefficients"
    );
    let mut acc = coeffs.a[0];
    for (i, ai) in coeffs.a[1..].iter().enumerate() {
        acc += ai * family.evaluate(i, x);
    }
    acc
}

/// Residual profile of a coefficient vector over the whole domain. The argmax
/// tie-break is the lowest index, independent of evaluation order.
pub fn deviation_profile(coeffs: &CoefficientVector, problem: &Problem) -> DeviationProfile {
    let dom = problem.domain();
    let fam = problem.family();
    let mut residuals = Vec::with_capacity(dom.len());
    let mut max_abs = 0.0;
    let mut argmax_index = 0;
    for k in 0..dom.len() {
        let r = dom.value(k) - evaluate_model(coeffs, fam, dom.point(k));
        if r.abs() > max_abs {
            max_abs = r.abs();
            argmax_index = k;
        }
        residuals.push(r);
    }
    DeviationProfile { residuals, max_abs, argmax_index }
}

/// Indices within `tol` of the extreme positive and negative deviations:
/// E+ = {k : r_k >= max_abs - tol}, E- = {k : r_k <= -(max_abs - tol)},
/// both ascending.
pub fn extreme_sets(profile: &DeviationProfile, tol: f64) -> (Vec<usize>, Vec<usize>) {
    assert!(tol >= 0.0, "extreme-set tolerance must be nonnegative");
    let cut = profile.max_abs - tol;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, r) in profile.residuals.iter().enumerate() {
        if *r >= cut {
            plus.push(k);
        }
        if *r <= -cut {
            minus.push(k);
        }
    }
    (plus, minus)
}

/// Default membership tolerance for `extreme_sets`.
pub fn default_extreme_tol(max_abs: f64) -> f64 {
    1e-9 * max_abs.max(1.0)
}
