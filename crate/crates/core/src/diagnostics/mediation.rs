//! Single-mediator decomposition with the Sobel test.
//!
//! Fits `M ~ T` for path `a`, `Y ~ M + T` for path `b` and the direct
//! effect, and `Y ~ T` for the total effect. The indirect effect `a*b` is
//! tested with `z = ab / sqrt(b^2 se_a^2 + a^2 se_b^2)`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::matcher::MatchSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationReport {
    pub mediator: String,
    pub n: usize,
    pub path_a: f64,
    pub se_a: f64,
    pub path_b: f64,
    pub se_b: f64,
    pub direct_effect: f64,
    pub total_effect: f64,
    pub indirect_effect: f64,
    pub sobel_z: f64,
    pub sobel_p: f64,
    /// `indirect / total`; absent when the total effect is exactly zero.
    pub proportion_mediated: Option<f64>,
}

pub fn sobel_z(a: f64, b: f64, se_a: f64, se_b: f64) -> f64 {
    a * b / (b * b * se_a * se_a + a * a * se_b * se_b).sqrt()
}

/// Two-sided normal p-value.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Slope and standard error of `y ~ 1 + x`.
fn simple_ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (xc, yc) = (centered(x), centered(y));
    let sxx = dot(&xc, &xc);
    let slope = dot(&xc, &yc) / sxx;
    let rss: f64 = xc.iter().zip(&yc).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let sigma2 = rss / (x.len() as f64 - 2.0);
    (slope, (sigma2 / sxx).sqrt())
}

pub fn sobel_test(treatment: &[bool], mediator: &[f64], outcome: &[f64], name: &str) -> Result<MediationReport> {
    let n = treatment.len();
    if mediator.len() != n || outcome.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if mediator.len() != n { mediator.len() } else { outcome.len() } });
    }
    if n < 4 {
        return Err(Error::invalid("mediation analysis needs at least 4 observations"));
    }
    if mediator.iter().chain(outcome).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mediation input".into()));
    }
    if treatment.iter().all(|&t| t) || treatment.iter().all(|&t| !t) {
        return Err(Error::SingleClass);
    }
    let t: Vec<f64> = treatment.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (tc, mc, yc) = (centered(&t), centered(mediator), centered(outcome));
    if dot(&mc, &mc) == 0.0 {
        return Err(Error::invalid(format!("mediator `{name}` has zero variance")));
    }

    let (a, se_a) = simple_ols(&t, mediator);
    let (total, _) = simple_ols(&t, outcome);

    // Y ~ M + T on centered data
    let (smm, stt, smt) = (dot(&mc, &mc), dot(&tc, &tc), dot(&mc, &tc));
    let (smy, sty) = (dot(&mc, &yc), dot(&tc, &yc));
    let det = smm * stt - smt * smt;
    if det.abs() <= 1e-12 * smm * stt {
        return Err(Error::invalid(format!("mediator `{name}` is collinear with treatment")));
    }
    let b = (stt * smy - smt * sty) / det;
    let direct = (smm * sty - smt * smy) / det;
    let rss: f64 = (0..n).map(|i| (yc[i] - b * mc[i] - direct * tc[i]).powi(2)).sum();
    let sigma2 = rss / (n as f64 - 3.0);
    let se_b = (sigma2 * stt / det).sqrt();

    let indirect = a * b;
    let z = sobel_z(a, b, se_a, se_b);
    Ok(MediationReport {
        mediator: name.to_string(),
        n,
        path_a: a,
        se_a,
        path_b: b,
        se_b,
        direct_effect: direct,
        total_effect: total,
        indirect_effect: indirect,
        sobel_z: z,
        sobel_p: if z.is_nan() { 1.0 } else { two_sided_p(z) },
        proportion_mediated: (total != 0.0).then(|| indirect / total),
    })
}

/// Sobel test on the matched sample: each pair contributes its treated and
/// its control row (controls reused across pairs appear once per pair).
pub fn mediation_on_matches(set: &MatchSet, mediator: &[f64], outcome: &[f64], name: &str) -> Result<MediationReport> {
    let mut t = Vec::with_capacity(2 * set.len());
    let mut m = Vec::with_capacity(2 * set.len());
    let mut y = Vec::with_capacity(2 * set.len());
    for p in &set.pairs {
        for (row, id, treated) in [(p.treated, &p.treated_id, true), (p.control, &p.control_id, false)] {
            let (mv, yv) = match (mediator.get(row), outcome.get(row)) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => (*a, *b),
                _ => return Err(Error::MissingOutcome { unit: id.clone() }),
            };
            t.push(treated);
            m.push(mv);
            y.push(yv);
        }
    }
    sobel_test(&t, &m, &y, name)
}
