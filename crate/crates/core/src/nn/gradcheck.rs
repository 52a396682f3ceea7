//! Central finite-difference verification of analytic gradients.

use super::{flatten, named_params, with_scalar_mut, Parameterized};

/// Denominator floor for the relative error, so gradients that are zero up
/// to rounding noise do not register as large relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub n_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// `(loss(θ + h·e_i) − loss(θ − h·e_i)) / 2h` for every scalar `i`.
pub fn numeric_gradient<P, F>(model: &P, h: f64, loss: F) -> Vec<f64>
where
    P: Parameterized + Clone,
    F: Fn(&P) -> f64,
{
    let n = flatten(model).len();
    let mut probe = model.clone();
    (0..n)
        .map(|i| {
            let mut original = 0.0;
            with_scalar_mut(&mut probe, i, |x| {
                original = *x;
                *x = original + h;
            });
            let plus = loss(&probe);
            with_scalar_mut(&mut probe, i, |x| *x = original - h);
            let minus = loss(&probe);
            with_scalar_mut(&mut probe, i, |x| *x = original);
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

pub fn check_gradients<P, F>(model: &P, analytic: &P, h: f64, loss: F) -> GradCheckReport
where
    P: Parameterized + Clone,
    F: Fn(&P) -> f64,
{
    let numeric = numeric_gradient(model, h, loss);
    let analytic_flat = flatten(analytic);
    assert_eq!(numeric.len(), analytic_flat.len(), "gradient layout differs from model");

    let mut owners = Vec::with_capacity(numeric.len());
    for (name, t) in named_params(model) {
        for k in 0..t.len() {
            owners.push((name.clone(), k));
        }
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        n_checked: numeric.len(),
    };
    for (i, (&a, &n)) in analytic_flat.iter().zip(&numeric).enumerate() {
        let err = relative_error(a, n);
        if err > report.max_rel_error || report.worst_param.is_empty() {
            report.max_rel_error = err;
            report.worst_param = owners[i].0.clone();
            report.worst_index = owners[i].1;
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    report
}
