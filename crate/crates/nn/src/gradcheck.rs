//! Central finite differences against tape gradients.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::param::ParamStore;
use crate::tape::{Tape, Var};

/// Gradients smaller than this fraction of `max(1, |loss|)` are compared in
/// absolute terms; below it the finite difference is mostly roundoff.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst coordinate, if any was checked.
    pub worst: Option<(String, usize)>,
    pub coordinates_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of `loss_fn` with central differences of step
/// `perturbation`. At most `coords_per_param` coordinates are sampled from
/// each parameter (`None` checks all of them).
pub fn grad_check<F, R>(
    store: &mut ParamStore,
    perturbation: f64,
    coords_per_param: Option<usize>,
    rng: &mut R,
    loss_fn: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
    R: Rng + ?Sized,
{
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    store.zero_grad();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss, store)?;
    let floor = RELATIVE_FLOOR * tape.value(loss).item().abs().max(1.0);
    drop(tape);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        coordinates_checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).value.len();
        let coords: Vec<usize> = match coords_per_param {
            Some(k) if k < n => sample(rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for c in coords {
            let original = store.get(id).value.data()[c];
            store.get_mut(id).value.data_mut()[c] = original + perturbation;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[c] = original - perturbation;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[c] = original;

            let numeric = (plus - minus) / (2.0 * perturbation);
            let analytic = store.get(id).grad.data()[c];
            let err = relative_error(analytic, numeric, floor);
            report.coordinates_checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((store.get(id).name.clone(), c));
            }
        }
    }
    store.zero_grad();
    Ok(report)
}
