//! Report construction and serialization. Field order is fixed and floats
//! print in shortest round-trip form, so equal results serialize to equal
//! bytes.

use serde::Serialize;

use vpx_core::solver::{
    CertifyOutcome, OptimalityCertificate, RefusalReason, SolveResult, SolveStatus,
};

#[derive(Debug, Serialize)]
pub struct Report {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub iterations: Vec<IterationEntry>,
    pub certificate: Option<CertificateBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct IterationEntry {
    pub entering_index: usize,
    pub entering_sign: i8,
    pub leaving_index: usize,
    pub gamma: f64,
    pub sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct CertificateBlock {
    pub plus_indices: Vec<usize>,
    pub minus_indices: Vec<usize>,
    pub weights_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
    pub common_point: Vec<f64>,
    pub residual: f64,
}

impl From<&OptimalityCertificate> for CertificateBlock {
    fn from(c: &OptimalityCertificate) -> CertificateBlock {
        CertificateBlock {
            plus_indices: c.e_plus_indices.clone(),
            minus_indices: c.e_minus_indices.clone(),
            weights_plus: c.weights_plus.clone(),
            weights_minus: c.weights_minus.clone(),
            common_point: c.common_point.clone(),
            residual: c.residual,
        }
    }
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::OptimalCertified => "optimal-certified",
        SolveStatus::IterationLimit => "iteration-limit",
        SolveStatus::SingularBasis => "singular-basis",
    }
}

pub fn solve_report(result: &SolveResult) -> Report {
    Report {
        status: status_name(result.status).to_string(),
        sigma: Some(result.sigma),
        coefficients: Some(result.coefficients.a.clone()),
        iterations: result
            .iterations
            .iter()
            .map(|it| IterationEntry {
                entering_index: it.exchange.entering_index,
                entering_sign: it.exchange.entering_sign,
                leaving_index: it.exchange.leaving_index,
                gamma: it.exchange.gamma,
                sigma: it.sigma,
            })
            .collect(),
        certificate: result.certificate.as_ref().map(CertificateBlock::from),
        detail: result.detail.clone(),
    }
}

pub fn oracle_report(coefficients: &[f64], sigma: f64) -> Report {
    Report {
        status: "optimal".to_string(),
        sigma: Some(sigma),
        coefficients: Some(coefficients.to_vec()),
        iterations: Vec::new(),
        certificate: None,
        detail: None,
    }
}

pub fn certify_report(coefficients: &[f64], max_abs: f64, outcome: &CertifyOutcome) -> Report {
    match outcome {
        CertifyOutcome::Certified(cert) => Report {
            status: "certified".to_string(),
            sigma: Some(max_abs),
            coefficients: Some(coefficients.to_vec()),
            iterations: Vec::new(),
            certificate: Some(CertificateBlock::from(cert)),
            detail: None,
        },
        CertifyOutcome::Refused(reason) => Report {
            status: "refused".to_string(),
            sigma: Some(max_abs),
            coefficients: Some(coefficients.to_vec()),
            iterations: Vec::new(),
            certificate: None,
            detail: Some(refusal_text(reason)),
        },
    }
}

fn refusal_text(reason: &RefusalReason) -> String {
    reason.to_string()
}

pub fn render(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports are plain data");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_roundtrip_floats() {
        let r = oracle_report(&[0.1, 0.5], 1.0 / 3.0);
        let text = render(&r);
        assert!(text.contains("0.3333333333333333"), "{text}");
        assert!(text.contains("0.1"), "{text}");
        assert!(!text.contains("0.10000000"), "{text}");
    }

    #[test]
    fn render_is_deterministic() {
        let r = oracle_report(&[1.0, -2.0], 0.25);
        assert_eq!(render(&r), render(&r));
    }
}
