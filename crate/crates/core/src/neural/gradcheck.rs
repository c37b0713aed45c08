//! Central finite-difference gradient checking.

use rand::Rng;

use super::tensor::{Grads, ParamStore};

/// Lower bound on the denominator of the relative error. A central difference
/// with step 1e-5 on a loss of magnitude ~10 carries roughly 1e-10 of
/// rounding noise, so gradients much below this floor cannot be resolved to
/// relative precision; they are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic and numeric value of the worst
    /// coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub samples: usize,
    /// Coordinates redrawn because the loss has a kink (a ReLU switching
    /// sides) within one step of the current value.
    pub kinks: usize,
}

/// Two central differences, at `step` and `step / 2`, must agree to this
/// relative precision (beyond rounding noise) for the loss to count as
/// smooth around a coordinate.
pub const KINK_TOLERANCE: f64 = 1e-5;

/// Compares `analytic` against central differences of `loss` at `samples`
/// coordinates: a parameter tensor is drawn uniformly, then a coordinate
/// within it. `loss` must be deterministic.
///
/// Where the loss is piecewise smooth, a coordinate whose perturbation
/// crosses a kink has no meaningful central difference. Such coordinates are
/// recognised by the estimate changing with the step size and are replaced
/// by fresh draws (at most `10 * samples` draws in total).
pub fn grad_check<F>(
    params: &mut ParamStore,
    analytic: &Grads,
    mut loss: F,
    samples: usize,
    step: f64,
    rng: &mut impl Rng,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let ids: Vec<_> = params
        .ids()
        .filter(|&id| !params.get(id).is_empty())
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        samples: 0,
        kinks: 0,
    };
    let mut central = |params: &mut ParamStore, id, k, h: f64| {
        let orig = params.get(id).data()[k];
        params.get_mut(id).data_mut()[k] = orig + h;
        let up = loss(params);
        params.get_mut(id).data_mut()[k] = orig - h;
        let down = loss(params);
        params.get_mut(id).data_mut()[k] = orig;
        let noise = f64::EPSILON * (up.abs() + down.abs()) / (2.0 * h);
        ((up - down) / (2.0 * h), noise)
    };
    for _ in 0..10 * samples {
        if report.samples == samples {
            break;
        }
        let id = ids[rng.gen_range(0..ids.len())];
        let k = rng.gen_range(0..params.get(id).len());
        let (numeric, noise) = central(params, id, k, step);
        let (half, half_noise) = central(params, id, k, step / 2.0);
        let smooth = KINK_TOLERANCE * numeric.abs().max(REL_ERROR_FLOOR) + 4.0 * (noise + half_noise);
        if (numeric - half).abs() > smooth {
            report.kinks += 1;
            continue;
        }
        report.samples += 1;
        let a = analytic.get(id).data()[k];
        let err = relative_error(a, numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((params.param(id).name.clone(), k, a, numeric));
        }
    }
    report
}
