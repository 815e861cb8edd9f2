//! Central-difference verification of analytic gradients.

/// Outcome of comparing one analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Relative error between one analytic and one numeric component. Pairs where
/// both magnitudes are below `negligible` are treated as matching: they are
/// beneath the noise floor of the difference quotient itself.
fn rel_err(analytic: f64, numeric: f64, negligible: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < negligible {
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

/// Compares `analytic` against central finite differences of `loss` at
/// `params`, component by component, and reports the worst relative error.
pub fn grad_check<F: Fn(&[f64]) -> f64>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        tolerance,
    };
    let mut buf = params.to_vec();
    for k in 0..params.len() {
        let orig = buf[k];
        buf[k] = orig + step;
        let up = loss(&buf);
        buf[k] = orig - step;
        let down = loss(&buf);
        buf[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = rel_err(analytic[k], numeric, 1e-6);
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_index = k;
            report.worst_analytic = analytic[k];
            report.worst_numeric = numeric;
        }
    }
    report
}
