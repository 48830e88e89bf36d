//! The objective-function abstraction every estimation stage works against.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;

/// A scalar objective f(θ), typically a negative log-likelihood.
///
/// Implementations must be deterministic: repeated evaluation at the same
/// point returns the same value. `concurrent_safe` tells callers whether
/// `eval` may be invoked from several threads at once; implementations with
/// interior mutability that is not thread-safe should return `false`, and
/// callers will then evaluate sequentially.
pub trait ObjectiveFunction: Sync {
    /// Number of parameters.
    fn dim(&self) -> usize;

    /// Evaluates the objective at `theta`.
    fn eval(&self, theta: &DVector<f64>) -> f64;

    /// Whether `eval` may be called concurrently.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Adapts a plain closure to [`ObjectiveFunction`]. Handy in tests and for
/// analytically defined objectives.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: Fn(&DVector<f64>) -> f64 + Sync> ObjectiveFunction for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        (self.f)(theta)
    }
}

/// Wraps an objective and counts every evaluation.
///
/// The estimation routines report their own evaluation counts; this wrapper
/// exists so callers (and the test suite) can verify those reports against
/// an independent tally.
pub struct CountingObjective<'a> {
    inner: &'a dyn ObjectiveFunction,
    count: AtomicUsize,
}

impl<'a> CountingObjective<'a> {
    pub fn new(inner: &'a dyn ObjectiveFunction) -> Self {
        CountingObjective {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    /// Total evaluations made through this wrapper so far.
    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    /// Resets the tally to zero.
    pub fn reset(&self) {
        self.count.store(0, Ordering::SeqCst);
    }
}

impl ObjectiveFunction for CountingObjective<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, theta: &DVector<f64>) -> f64 {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.eval(theta)
    }

    fn concurrent_safe(&self) -> bool {
        self.inner.concurrent_safe()
    }
}
