use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::params::{ParamId, ParamStore};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: String,
    pub max_rel_error: f64,
    /// Element (within the tensor) with the largest error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamError>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn failing(&self) -> impl Iterator<Item = &ParamError> {
        self.params.iter().filter(move |p| p.max_rel_error >= self.tolerance)
    }
}

/// Compares `analytic` (laid out like the store) against central finite
/// differences of `loss`, element by element. Relative error is
/// `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn grad_check<F>(store: &mut ParamStore, loss: F, analytic: &[f64], tolerance: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
{
    let ids = store.ids().to_vec();
    grad_check_params(store, &ids, loss, analytic, tolerance)
}

/// [`grad_check`] restricted to the listed tensors.
pub fn grad_check_params<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    mut loss: F,
    analytic: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
{
    if analytic.len() != store.len() {
        return Err(Error::Dimension {
            expected: store.len(),
            found: analytic.len(),
        });
    }
    let first = loss(store);
    let second = loss(store);
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    let mut params = Vec::with_capacity(ids.len());
    let mut max_rel_error: f64 = 0.0;
    for &id in ids {
        let mut worst = ParamError {
            name: String::from(store.name(id)),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (k, i) in id.range().enumerate() {
            let orig = store.values()[i];
            store.values_mut()[i] = orig + FD_STEP;
            let plus = loss(store);
            store.values_mut()[i] = orig - FD_STEP;
            let minus = loss(store);
            store.values_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > worst.max_rel_error || k == 0 {
                worst.max_rel_error = rel;
                worst.worst_index = k;
                worst.analytic = a;
                worst.numeric = numeric;
            }
        }
        max_rel_error = max_rel_error.max(worst.max_rel_error);
        params.push(worst);
    }
    Ok(GradCheckReport {
        params,
        max_rel_error,
        tolerance,
    })
}
