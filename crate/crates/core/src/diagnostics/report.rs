use serde::{Deserialize, Serialize};

use super::{ConnectionCheck, DiagnosticsError, JacobiEstimate};

/// Column names of the time-series CSV.
pub const SERIES_HEADER: &str = "t,Q1,Q2,dQ1_lhs,dQ1_rhs,bound_slack";

/// The Gronwall fit uses samples with `t ≥ GRONWALL_WINDOW_START · T`.
pub const GRONWALL_WINDOW_START: f64 = 0.1;

/// Relative head-room in the integrated Gronwall envelope.
pub const ENVELOPE_MARGIN: f64 = 0.05;

/// One sampled time of a comparison run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub q1: f64,
    pub q2: f64,
    /// Time difference of `Q₁` (centred inside, second-order one-sided at the ends).
    pub dq1_lhs: f64,
    /// `−∫ ∇̃²d²(X̃, Ỹ)`.
    pub dq1_rhs: f64,
    /// `Q₂ + C·Q₁ − ½·dq1_lhs`; negative where the inequality fails.
    pub bound_slack: f64,
}

impl SeriesRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            self.t, self.q1, self.q2, self.dq1_lhs, self.dq1_rhs, self.bound_slack
        )
    }
}

/// Pointwise checks evaluated on the last valid pair of states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeChecks {
    pub t: f64,
    pub connection: ConnectionCheckSummary,
    /// L² norm of `direct − via_B` for `φ₂ = ∇u₂`.
    pub laplacian_discrepancy: f64,
    pub jacobi_first_order: f64,
    pub jacobi_second_order: f64,
    /// `|Q₂ − Q₂(frame)|`.
    pub q2_frame_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionCheckSummary {
    pub checked: usize,
    pub bound_violations: usize,
    pub identity_violations: usize,
    pub max_bound_ratio: f64,
    pub max_identity_defect: f64,
    pub max_skew_defect: f64,
}

impl From<ConnectionCheck> for ConnectionCheckSummary {
    fn from(c: ConnectionCheck) -> Self {
        ConnectionCheckSummary {
            checked: c.checked,
            bound_violations: c.bound_violations,
            identity_violations: c.identity_violations,
            max_bound_ratio: c.max_bound_ratio,
            max_identity_defect: c.max_identity_defect,
            max_skew_defect: c.max_skew_defect,
        }
    }
}

impl NodeChecks {
    pub(crate) fn new(
        t: f64,
        c: ConnectionCheck,
        lap: f64,
        j: JacobiEstimate,
        q2_frame_defect: f64,
    ) -> Self {
        NodeChecks {
            t,
            connection: c.into(),
            laplacian_discrepancy: lap,
            jacobi_first_order: j.first_order,
            jacobi_second_order: j.second_order,
            q2_frame_defect,
        }
    }
}

/// Time series and fitted constants of a two-solution comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub series: Vec<SeriesRow>,
    /// Pointwise Hessian constant fitted on random samples.
    pub hessian_constant: f64,
    /// `C` in `½ dQ₁/dt ≤ Q₂ + C·Q₁`.
    pub q1_inequality_constant: f64,
    /// Largest `|dq1_lhs − dq1_rhs|`.
    pub max_consistency: f64,
    /// Rows with `½·dq1_lhs − (Q₂ + C·Q₁)` above `max_consistency`.
    pub q1_inequality_violations: usize,
    /// `None` when `Q₁ + Q₂` vanishes (identical runs).
    pub gronwall_c: Option<f64>,
    /// Rows with `Q(t) > Q(0)·e^{2Ct}·(1 + 5%)`.
    pub gronwall_envelope_violations: Option<usize>,
    /// `max_t [½ΔQ/Δt − C·Q]` over consecutive samples.
    pub gronwall_pointwise_excess: Option<f64>,
    /// Smallest `C` with `½ΔQ/Δt ≤ C·Q` between every pair of consecutive samples.
    pub gronwall_c_pointwise: Option<f64>,
    pub checks: Option<NodeChecks>,
}

impl DiagnosticsReport {
    pub fn times(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.t).collect()
    }

    pub fn q_total(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.q1 + r.q2).collect()
    }

    pub fn series_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for r in &self.series {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Assembles the report from raw samples `(t, Q₁, Q₂, rhs)`.
    pub(crate) fn assemble(
        samples: &[(f64, f64, f64, f64)],
        hessian_constant: f64,
        q1_inequality_constant: f64,
        checks: Option<NodeChecks>,
    ) -> Self {
        let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let q1: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let lhs = time_derivative(&times, &q1);
        let series: Vec<SeriesRow> = samples
            .iter()
            .zip(&lhs)
            .map(|(&(t, q1, q2, rhs), &dq)| SeriesRow {
                t,
                q1,
                q2,
                dq1_lhs: dq,
                dq1_rhs: rhs,
                bound_slack: q2 + q1_inequality_constant * q1 - 0.5 * dq,
            })
            .collect();
        let max_consistency = series
            .iter()
            .map(|r| (r.dq1_lhs - r.dq1_rhs).abs())
            .fold(0.0, f64::max);
        let q1_inequality_violations = series
            .iter()
            .filter(|r| -r.bound_slack > max_consistency)
            .count();
        let mut report = DiagnosticsReport {
            series,
            hessian_constant,
            q1_inequality_constant,
            max_consistency,
            q1_inequality_violations,
            gronwall_c: None,
            gronwall_envelope_violations: None,
            gronwall_pointwise_excess: None,
            gronwall_c_pointwise: None,
            checks,
        };
        if let Ok(c) = gronwall_fit(&report) {
            let q = report.q_total();
            let t = report.times();
            let q0 = q[0];
            report.gronwall_c = Some(c);
            report.gronwall_envelope_violations = Some(
                t.iter()
                    .zip(&q)
                    .filter(|(&t, &q)| q > q0 * (2.0 * c * t).exp() * (1.0 + ENVELOPE_MARGIN))
                    .count(),
            );
            let rates: Vec<(f64, f64)> = (1..q.len())
                .map(|k| {
                    (
                        0.5 * (q[k] - q[k - 1]) / (t[k] - t[k - 1]),
                        0.5 * (q[k] + q[k - 1]),
                    )
                })
                .collect();
            report.gronwall_pointwise_excess = Some(
                rates
                    .iter()
                    .map(|(r, m)| r - c * m)
                    .fold(f64::NEG_INFINITY, f64::max),
            );
            report.gronwall_c_pointwise = Some(
                rates
                    .iter()
                    .map(|(r, m)| r / m)
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
        report
    }
}

/// Derivative of the quadratic through three neighbouring samples: centred
/// inside, one-sided at the two ends. Spacing may be uneven.
fn time_derivative(t: &[f64], q: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 3 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let j = k.clamp(1, n - 2);
            quadratic_slope([t[j - 1], t[j], t[j + 1]], [q[j - 1], q[j], q[j + 1]], t[k])
        })
        .collect()
}

fn quadratic_slope(x: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        d += y[i] * ((at - x[a]) + (at - x[b])) / ((x[i] - x[a]) * (x[i] - x[b]));
    }
    d
}

/// Half the least-squares slope of `log(Q₁ + Q₂)` against `t` over the window
/// `[0.1·T, T]`.
pub fn gronwall_fit(report: &DiagnosticsReport) -> Result<f64, DiagnosticsError> {
    let t = report.times();
    let q = report.q_total();
    let Some(&t_end) = t.last() else {
        return Err(DiagnosticsError::DegenerateData);
    };
    let window: Vec<(f64, f64)> = t
        .iter()
        .zip(&q)
        .filter(|(&t, _)| t >= GRONWALL_WINDOW_START * t_end)
        .map(|(&t, &q)| (t, q))
        .collect();
    if window.len() < 2 || window.iter().any(|&(_, q)| !(q > f64::MIN_POSITIVE)) {
        return Err(DiagnosticsError::DegenerateData);
    }
    let n = window.len() as f64;
    let mean_t = window.iter().map(|w| w.0).sum::<f64>() / n;
    let mean_y = window.iter().map(|w| w.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, q) in &window {
        sxy += (t - mean_t) * (q.ln() - mean_y);
        sxx += (t - mean_t) * (t - mean_t);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::DegenerateData);
    }
    Ok(0.5 * sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(f: impl Fn(f64) -> f64) -> Vec<(f64, f64, f64, f64)> {
        (0..=20)
            .map(|k| k as f64 * 0.05)
            .map(|t| (t, f(t), 0.0, 0.0))
            .collect()
    }

    #[test]
    fn fit_recovers_exponential_rate() {
        let r = DiagnosticsReport::assemble(&samples(|t| 1e-6 * (0.8 * t).exp()), 1.0, 1.0, None);
        assert!((r.gronwall_c.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(r.gronwall_envelope_violations, Some(0));
    }

    #[test]
    fn zero_series_is_degenerate() {
        let r = DiagnosticsReport::assemble(&samples(|_| 0.0), 1.0, 1.0, None);
        assert!(r.gronwall_c.is_none());
        assert!(matches!(
            gronwall_fit(&r),
            Err(DiagnosticsError::DegenerateData)
        ));
        assert!(r.series.iter().all(|s| s.dq1_lhs == 0.0));
    }

    #[test]
    fn time_derivative_is_exact_for_quadratics() {
        let t: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let q: Vec<f64> = t.iter().map(|t| 3.0 * t * t - t).collect();
        for (d, t) in time_derivative(&t, &q).iter().zip(&t) {
            assert!((d - (6.0 * t - 1.0)).abs() < 1e-12);
        }
    }
}
