//! One-dimensional curvature estimation.
//!
//! Works in two phases. A step-scale search doubles a trial step until the
//! objective rises on both sides of the center, which yields a curvature
//! scale for the direction. Extrapolated central second differences then
//! refine the curvature: the step shrinks geometrically and a Neville
//! tableau removes the even-order error terms, keeping the entry whose
//! neighbor disagreement is smallest.

use nalgebra::DVector;

use crate::error::{CovError, Result};
use crate::objective::ObjectiveFunction;

/// Step doublings allowed before a direction is declared flat.
const DOUBLING_CAP: u32 = 60;
/// Bracketed-but-cancelled scale computations tolerated before giving up.
const SCALE_RESTART_CAP: u32 = 3;
/// Maximum number of step sizes in the extrapolation tableau.
const TABLEAU: usize = 10;
/// Extrapolation stops once a column's best error exceeds this multiple of
/// the best error seen anywhere in the tableau.
const SAFETY: f64 = 2.0;
/// Geometric step-shrink factor between tableau columns.
const SHRINK: f64 = std::f64::consts::SQRT_2;

/// Result of the step-scale search.
#[derive(Debug, Clone, Copy)]
pub struct StepScale {
    /// First step at which the objective rose on both sides of the center.
    pub h: f64,
    /// Curvature scale: the step over the square root of the bracketing
    /// second difference. Roughly the standard deviation the direction
    /// would have if the objective were a Gaussian negative log-likelihood.
    pub sigma: f64,
    /// Objective evaluations consumed, including the center.
    pub evaluations: usize,
}

/// A second-derivative estimate with its error bound and bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureEstimate {
    pub value: f64,
    /// Maximum disagreement between the winning tableau entry and its
    /// neighbors; an a-posteriori error bound.
    pub error_estimate: f64,
    /// Step size of the column the winning entry came from.
    pub step: f64,
    /// Objective evaluations consumed.
    pub evaluations: usize,
}

/// Searches for the step scale of a one-dimensional function with a
/// minimum at (or very near) zero.
///
/// Starts at machine-epsilon^(1/4) and doubles until g rises on both sides
/// of the center. Directions that never rise on both sides within
/// [`DOUBLING_CAP`] doublings produce [`CovError::FlatDirection`].
pub fn find_initial_scale<G: Fn(f64) -> f64>(g: G) -> Result<StepScale> {
    let f0 = g(0.0);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "curvature scale search",
        });
    }
    let mut scale = scale_search(&g, f0)?;
    scale.evaluations += 1;
    Ok(scale)
}

/// Step-scale search with the center value already in hand.
pub(crate) fn scale_search<G: Fn(f64) -> f64>(g: &G, f0: f64) -> Result<StepScale> {
    let mut h = f64::EPSILON.powf(0.25);
    let mut evaluations = 0usize;
    let mut restarts = 0u32;
    for doublings in 0..=DOUBLING_CAP {
        let fp = g(h);
        let fm = g(-h);
        evaluations += 2;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(CovError::NonFiniteValue {
                context: "curvature scale search",
            });
        }
        if fp > f0 && fm > f0 {
            // Grouping the subtractions this way keeps precision when the
            // center value is large.
            let denom = (fp - f0) + (fm - f0);
            if denom > 0.0 {
                return Ok(StepScale {
                    h,
                    sigma: h / denom.sqrt(),
                    evaluations,
                });
            }
            // Bracketed, yet the second difference cancelled to nothing.
            // Keep doubling from the current step a few more times.
            restarts += 1;
            if restarts > SCALE_RESTART_CAP {
                return Err(CovError::LostPrecision {
                    context: "curvature scale search",
                });
            }
        }
        if doublings == DOUBLING_CAP {
            break;
        }
        h *= 2.0;
    }
    Err(CovError::FlatDirection {
        doublings: DOUBLING_CAP,
    })
}

/// Estimates g''(0) by extrapolating central second differences, starting
/// from `h_start` and shrinking the step by sqrt(2) per tableau column.
pub fn ridders_curvature<G: Fn(f64) -> f64>(g: G, h_start: f64) -> Result<CurvatureEstimate> {
    if !h_start.is_finite() || h_start <= 0.0 {
        return Err(CovError::InvalidOptions(format!(
            "h_start must be positive and finite, got {h_start}"
        )));
    }
    let f0 = g(0.0);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "curvature extrapolation",
        });
    }
    let mut est = ridders_from_center(&g, f0, h_start)?;
    est.evaluations += 1;
    Ok(est)
}

/// Extrapolation tableau with the center value already in hand.
pub(crate) fn ridders_from_center<G: Fn(f64) -> f64>(
    g: &G,
    f0: f64,
    h_start: f64,
) -> Result<CurvatureEstimate> {
    let mut evaluations = 0usize;
    let mut f_mag = f0.abs();
    let mut second_diff = |h: f64, f_mag: &mut f64| -> Result<f64> {
        let fp = g(h);
        let fm = g(-h);
        evaluations += 2;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(CovError::NonFiniteValue {
                context: "curvature extrapolation",
            });
        }
        *f_mag = f_mag.max(fp.abs()).max(fm.abs());
        Ok(((fp - f0) + (fm - f0)) / (h * h))
    };

    let mut tab = [[0.0f64; TABLEAU]; TABLEAU];
    // One running step variable, shrunk by a single multiplication per
    // column, so the step sequence cannot drift from the intended
    // h_start * SHRINK^-k.
    let mut hh = h_start;
    tab[0][0] = second_diff(hh, &mut f_mag)?;

    let mut best_value = tab[0][0];
    let mut best_error = f64::INFINITY;
    let mut best_step = hh;
    let mut usable_entry = false;

    for i in 1..TABLEAU {
        hh /= SHRINK;
        tab[0][i] = second_diff(hh, &mut f_mag)?;
        // The second-difference error expands in even powers of h, so each
        // extrapolation order divides out another factor SHRINK^2.
        let mut fac = SHRINK * SHRINK;
        let mut column_best = f64::INFINITY;
        for j in 1..=i {
            tab[j][i] = (tab[j - 1][i] * fac - tab[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let err = (tab[j][i] - tab[j - 1][i])
                .abs()
                .max((tab[j][i] - tab[j - 1][i - 1]).abs());
            column_best = column_best.min(err);
            if err <= best_error {
                best_error = err;
                best_value = tab[j][i];
                best_step = hh;
            }
            if err <= tab[j][i].abs() {
                usable_entry = true;
            }
        }
        if column_best > SAFETY * best_error {
            break;
        }
    }

    if !usable_entry {
        return Err(CovError::LostPrecision {
            context: "curvature extrapolation",
        });
    }
    // Neighbor disagreement alone systematically underestimates the error
    // at the winning entry (it is chosen precisely because its neighbors
    // happen to agree). A second difference also carries unavoidable
    // rounding noise of about 4 eps |f| / h^2, so never report less.
    let rounding_floor = 4.0 * f64::EPSILON * f_mag / (best_step * best_step);
    Ok(CurvatureEstimate {
        value: best_value,
        error_estimate: best_error.max(rounding_floor),
        step: best_step,
        evaluations,
    })
}

/// Second derivative of the objective along `direction` at `base`:
/// scale search first, then extrapolation starting at half the scale.
///
/// The direction is used as given; pass a unit vector when the plain
/// directional curvature is wanted.
pub fn curvature_along(
    objective: &dyn ObjectiveFunction,
    base: &DVector<f64>,
    direction: &DVector<f64>,
) -> Result<CurvatureEstimate> {
    let g = line_function(objective, base, direction)?;
    let f0 = g(0.0);
    if !f0.is_finite() {
        return Err(CovError::NonFiniteValue {
            context: "curvature center",
        });
    }
    let mut est = curvature_along_line(&g, f0)?;
    est.evaluations += 1;
    Ok(est)
}

/// Scale search plus extrapolation for a line with known center value.
/// Evaluation counts exclude the center.
pub(crate) fn curvature_along_line<G: Fn(f64) -> f64>(g: &G, f0: f64) -> Result<CurvatureEstimate> {
    let scale = scale_search(g, f0)?;
    let mut est = ridders_from_center(g, f0, scale.sigma * 0.5)?;
    est.evaluations += scale.evaluations;
    Ok(est)
}

/// Restricts an objective to a line, checking dimensions once up front.
pub(crate) fn line_function<'a>(
    objective: &'a dyn ObjectiveFunction,
    base: &'a DVector<f64>,
    direction: &'a DVector<f64>,
) -> Result<impl Fn(f64) -> f64 + 'a> {
    if objective.dim() != base.len() {
        return Err(CovError::DimensionMismatch {
            left: objective.dim(),
            right: base.len(),
        });
    }
    if base.len() != direction.len() {
        return Err(CovError::DimensionMismatch {
            left: base.len(),
            right: direction.len(),
        });
    }
    Ok(move |t: f64| {
        let mut theta = base.clone();
        theta.axpy(t, direction, 1.0);
        objective.eval(&theta)
    })
}
