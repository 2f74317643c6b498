//! Ready-made basis families: graded monomials, trigonometric harmonics,
//! gaussian bumps, and per-grid-point tabulated functions.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::problem::{BasisFamily, BasisFn, DiscreteDomain, ProblemError};

/// Upper bound on family size; larger requests are refused rather than
/// silently attempted.
pub const MAX_FAMILY_SIZE: usize = 10_000;

#[derive(Debug, Error)]
pub enum BasesError {
    #[error("family would hold {count} functions; the limit is {max}")]
    TooManyFunctions { count: usize, max: usize },
    #[error("families need at least one variable")]
    ZeroDimension,
    #[error("monomial families need total degree at least 1")]
    ZeroDegree,
    #[error("trigonometric families need at least one harmonic")]
    ZeroHarmonics,
    #[error("center {index} has {found} coordinates; expected {expected}")]
    CenterDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{centers} centers but {widths} width coefficients")]
    WidthCount { centers: usize, widths: usize },
    #[error("width coefficient {index} is {value}; widths must be positive and finite")]
    BadWidth { index: usize, value: f64 },
    #[error("table column {column} holds {rows} values; the domain has {expected} points")]
    TableShape {
        column: usize,
        rows: usize,
        expected: usize,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn var_name(dim: usize, i: usize) -> String {
    if dim <= 3 {
        ["x", "y", "z"][i].to_string()
    } else {
        format!("x{}", i + 1)
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > (usize::MAX as u128) {
            return None;
        }
    }
    Some(acc as usize)
}

/// Exponent tuples of total degree `degree`, lexicographically descending.
fn exponents_of_degree(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if dim == 1 {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for lead in (0..=degree).rev() {
        prefix.push(lead);
        exponents_of_degree(dim - 1, degree - lead, prefix, out);
        prefix.pop();
    }
}

fn monomial_label(dim: usize, exps: &[u32]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in exps.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let name = var_name(dim, i);
        if e == 1 {
            parts.push(name);
        } else {
            parts.push(format!("{name}^{e}"));
        }
    }
    parts.join("*")
}

/// All monomials of total degree 1 through `total_degree` in graded order,
/// lexicographically descending inside each degree; the constant term is
/// excluded (it is the model's fixed a0 term).
pub fn monomials(dim: usize, total_degree: u32) -> Result<BasisFamily, BasesError> {
    if dim == 0 {
        return Err(BasesError::ZeroDimension);
    }
    if total_degree == 0 {
        return Err(BasesError::ZeroDegree);
    }
    let count = binomial(dim + total_degree as usize, dim)
        .and_then(|c| c.checked_sub(1))
        .ok_or(BasesError::TooManyFunctions {
            count: usize::MAX,
            max: MAX_FAMILY_SIZE,
        })?;
    if count > MAX_FAMILY_SIZE {
        return Err(BasesError::TooManyFunctions {
            count,
            max: MAX_FAMILY_SIZE,
        });
    }

    let mut functions: Vec<Arc<BasisFn>> = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for degree in 1..=total_degree {
        let mut tuples = Vec::new();
        exponents_of_degree(dim, degree, &mut Vec::new(), &mut tuples);
        for exps in tuples {
            labels.push(monomial_label(dim, &exps));
            functions.push(Arc::new(move |x: &[f64]| {
                exps.iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product()
            }) as Arc<BasisFn>);
        }
    }
    Ok(BasisFamily::new(dim, functions, labels)?)
}

/// sin(k x_i) and cos(k x_i) for k = 1..=harmonics: per harmonic, all sine
/// terms axis by axis, then all cosine terms.
pub fn trig(dim: usize, harmonics: u32) -> Result<BasisFamily, BasesError> {
    if dim == 0 {
        return Err(BasesError::ZeroDimension);
    }
    if harmonics == 0 {
        return Err(BasesError::ZeroHarmonics);
    }
    let count = 2 * dim * harmonics as usize;
    if count > MAX_FAMILY_SIZE {
        return Err(BasesError::TooManyFunctions {
            count,
            max: MAX_FAMILY_SIZE,
        });
    }
    let mut functions: Vec<Arc<BasisFn>> = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for k in 1..=harmonics {
        let freq = k as f64;
        for axis in 0..dim {
            let arg = if k == 1 {
                var_name(dim, axis)
            } else {
                format!("{k}*{}", var_name(dim, axis))
            };
            labels.push(format!("sin({arg})"));
            functions.push(Arc::new(move |x: &[f64]| (freq * x[axis]).sin()) as Arc<BasisFn>);
        }
        for axis in 0..dim {
            let arg = if k == 1 {
                var_name(dim, axis)
            } else {
                format!("{k}*{}", var_name(dim, axis))
            };
            labels.push(format!("cos({arg})"));
            functions.push(Arc::new(move |x: &[f64]| (freq * x[axis]).cos()) as Arc<BasisFn>);
        }
    }
    Ok(BasisFamily::new(dim, functions, labels)?)
}

/// Bumps exp(-c ||x - mu||^2), one per center, width coefficient c paired
/// by position.
pub fn gaussians(
    dim: usize,
    centers: &[Vec<f64>],
    widths: &[f64],
) -> Result<BasisFamily, BasesError> {
    if dim == 0 {
        return Err(BasesError::ZeroDimension);
    }
    if centers.len() != widths.len() {
        return Err(BasesError::WidthCount {
            centers: centers.len(),
            widths: widths.len(),
        });
    }
    if centers.len() > MAX_FAMILY_SIZE {
        return Err(BasesError::TooManyFunctions {
            count: centers.len(),
            max: MAX_FAMILY_SIZE,
        });
    }
    for (i, c) in centers.iter().enumerate() {
        if c.len() != dim {
            return Err(BasesError::CenterDimension {
                index: i,
                expected: dim,
                found: c.len(),
            });
        }
    }
    for (i, &w) in widths.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(BasesError::BadWidth { index: i, value: w });
        }
    }
    let mut functions: Vec<Arc<BasisFn>> = Vec::with_capacity(centers.len());
    let mut labels = Vec::with_capacity(centers.len());
    for (center, &width) in centers.iter().zip(widths) {
        let mu = center.clone();
        labels.push(format!("gauss(c={width}, mu={mu:?})"));
        functions.push(Arc::new(move |x: &[f64]| {
            let d2: f64 = x.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
            (-width * d2).exp()
        }) as Arc<BasisFn>);
    }
    Ok(BasisFamily::new(dim, functions, labels)?)
}

/// A family given by explicit per-grid-point values, bound to the exact
/// points of one domain. Column j holds the j-th function's value at every
/// domain point, in domain order.
///
/// Evaluation looks the point up by its bit pattern and panics off-grid;
/// tabulated families cannot be evaluated anywhere else.
pub fn tabulated(
    domain: &DiscreteDomain,
    columns: &[Vec<f64>],
    labels: &[String],
) -> Result<BasisFamily, BasesError> {
    let m = domain.len();
    if columns.len() > MAX_FAMILY_SIZE {
        return Err(BasesError::TooManyFunctions {
            count: columns.len(),
            max: MAX_FAMILY_SIZE,
        });
    }
    for (j, col) in columns.iter().enumerate() {
        if col.len() != m {
            return Err(BasesError::TableShape {
                column: j,
                rows: col.len(),
                expected: m,
            });
        }
    }

    let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(m);
    for k in 0..m {
        let key: Vec<u64> = domain.point(k).iter().map(|v| v.to_bits()).collect();
        index.insert(key, k);
    }
    let index = Arc::new(index);

    let mut functions: Vec<Arc<BasisFn>> = Vec::with_capacity(columns.len());
    for col in columns {
        let col = col.clone();
        let index = Arc::clone(&index);
        functions.push(Arc::new(move |x: &[f64]| {
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let row = index
                .get(&key)
                .unwrap_or_else(|| panic!("tabulated family evaluated off its grid at {x:?}"));
            col[*row]
        }) as Arc<BasisFn>);
    }
    Ok(BasisFamily::new(domain.dim(), functions, labels.to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_monomials_in_one_variable() {
        let fam = monomials(1, 3).unwrap();
        assert_eq!(fam.len(), 3);
        assert_eq!(fam.labels(), &["x", "x^2", "x^3"]);
        let lift = fam.lift(&[2.0]);
        assert_eq!(lift, vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn linear_monomials_in_two_variables() {
        let fam = monomials(2, 1).unwrap();
        assert_eq!(fam.labels(), &["x", "y"]);
    }

    #[test]
    fn quadratic_monomials_in_two_variables() {
        let fam = monomials(2, 2).unwrap();
        assert_eq!(fam.labels(), &["x", "y", "x^2", "x*y", "y^2"]);
        let lift = fam.lift(&[2.0, 3.0]);
        assert_eq!(lift, vec![2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn monomial_count_matches_binomial() {
        for dim in 1..=4usize {
            for degree in 1..=6u32 {
                let fam = monomials(dim, degree).unwrap();
                let expect = binomial(dim + degree as usize, dim).unwrap() - 1;
                assert_eq!(fam.len(), expect, "dim {dim} degree {degree}");
            }
        }
    }

    #[test]
    fn oversized_family_is_refused() {
        let err = monomials(4, 50).unwrap_err();
        assert!(matches!(err, BasesError::TooManyFunctions { .. }));
    }

    #[test]
    fn trig_matches_host_library() {
        let fam = trig(1, 1).unwrap();
        assert_eq!(fam.labels(), &["sin(x)", "cos(x)"]);
        for &x in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert!((fam.evaluate(0, &[x]) - x.sin()).abs() <= 1e-15);
            assert!((fam.evaluate(1, &[x]) - x.cos()).abs() <= 1e-15);
        }
    }

    #[test]
    fn second_harmonic_ordering() {
        let fam = trig(2, 2).unwrap();
        assert_eq!(
            fam.labels(),
            &[
                "sin(x)", "sin(y)", "cos(x)", "cos(y)", "sin(2*x)", "sin(2*y)", "cos(2*x)",
                "cos(2*y)"
            ]
        );
    }

    #[test]
    fn gaussian_peaks_at_center() {
        let fam = gaussians(2, &[vec![0.0, 0.0]], &[1.0]).unwrap();
        assert_eq!(fam.evaluate(0, &[0.0, 0.0]), 1.0);
        let off = fam.evaluate(0, &[1.0, 0.0]);
        assert!((off - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_shape_errors() {
        let err = gaussians(2, &[vec![0.0]], &[1.0]).unwrap_err();
        assert!(matches!(err, BasesError::CenterDimension { .. }));
        let err = gaussians(1, &[vec![0.0]], &[]).unwrap_err();
        assert!(matches!(err, BasesError::WidthCount { .. }));
    }

    #[test]
    fn tabulated_lookup() {
        let dom = DiscreteDomain::new(1, vec![0.0, 1.0, 2.0], vec![5.0, 6.0, 7.0]).unwrap();
        let fam = tabulated(&dom, &[vec![10.0, 20.0, 30.0]], &["t".to_string()]).unwrap();
        assert_eq!(fam.evaluate(0, dom.point(1)), 20.0);
        assert_eq!(fam.evaluate(0, dom.point(2)), 30.0);
    }

    #[test]
    fn tabulated_wrong_rows() {
        let dom = DiscreteDomain::new(1, vec![0.0, 1.0, 2.0], vec![5.0, 6.0, 7.0]).unwrap();
        let err = tabulated(&dom, &[vec![10.0, 20.0]], &["t".to_string()]).unwrap_err();
        assert!(matches!(
            err,
            BasesError::TableShape {
                column: 0,
                rows: 2,
                expected: 3
            }
        ));
    }
}
