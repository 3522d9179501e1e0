use alloc::string::String;
use alloc::vec::Vec;

use super::params::{Gradients, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is ~0 are judged on absolute error.
    pub floor: f64,
    /// Check at most this many entries per array (evenly strided).
    pub max_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-4,
            tolerance: 1e-4,
            floor: 1e-6,
            max_per_param: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradCheckEntry>,
    pub failures: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

/// Compares `analytic` against central finite differences of `loss` for
/// every trainable entry. The store is restored before returning.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<F>(
    store: &mut ParameterStore,
    mut loss: F,
    analytic: &Gradients,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    F: FnMut(&ParameterStore) -> f64,
{
    let mut report = GradCheckReport {
        tolerance: cfg.tolerance,
        ..GradCheckReport::default()
    };
    let ids: Vec<_> = store.ids().filter(|&id| store.info(id).trainable).collect();
    for id in ids {
        let n = store.get(id).len();
        let stride = match cfg.max_per_param {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for k in (0..n).step_by(stride) {
            let orig = store.get(id)[k];
            store.get_mut(id)[k] = orig + cfg.step;
            let plus = loss(store);
            store.get_mut(id)[k] = orig - cfg.step;
            let minus = loss(store);
            store.get_mut(id)[k] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic.get(id)[k];
            let denom = a.abs().max(numeric.abs()).max(cfg.floor);
            let rel = (a - numeric).abs() / denom;
            let entry = GradCheckEntry {
                param: store.info(id).name.clone(),
                index: k,
                analytic: a,
                numeric,
                rel_error: rel,
            };
            report.checked += 1;
            if !(rel <= cfg.tolerance) {
                report.failures.push(entry.clone());
            }
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some(entry);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Init;

    #[test]
    fn linear_model_is_exact() {
        let mut s = ParameterStore::new(0);
        let w = s.add("w", &[3], Init::Uniform(1.0));
        let x = [0.5, -2.0, 3.0];
        let f = |st: &ParameterStore| st.get(w).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let mut g = s.zero_gradients();
        g.get_mut(w).copy_from_slice(&x);
        let cfg = GradCheckConfig { tolerance: 1e-7, ..GradCheckConfig::default() };
        let r = grad_check(&mut s, f, &g, &cfg);
        assert!(r.passed());
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let mut s = ParameterStore::new(0);
        let w = s.add("w", &[2], Init::Constant(0.3));
        let f = |st: &ParameterStore| st.get(w).iter().map(|v| v * v).sum::<f64>();
        let mut g = s.zero_gradients();
        g.get_mut(w).copy_from_slice(&[0.6, 0.6 * 1.01]);
        let r = grad_check(&mut s, f, &g, &GradCheckConfig::default());
        assert!(!r.passed());
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].index, 1);
        assert_eq!(s.get(w), &[0.3, 0.3]);
    }
}
