//! A cubic polynomial stand-in for the logistic function.
//!
//! The logistic σ(x) = 1/(1+e^{-x}) is transcendental, so the encrypted
//! trainer evaluates the degree-3 least-squares approximation on [-8, 8]
//! over the basis {1, x, x³} instead. The odd basis is deliberate:
//! σ(x) - 1/2 is odd, so the constant term is exactly 1/2, the even terms
//! vanish, and the approximation satisfies p(-x) = 1 - p(x) identically —
//! the same reflection symmetry the logistic has.
//!
//! The fit is computed at runtime from the continuous least-squares normal
//! equations, with the two logistic moments integrated by Simpson's rule on
//! a fixed fine grid, so the coefficients are deterministic.

use once_cell::sync::Lazy;

/// Half-width of the fit interval.
pub const FIT_RANGE: f64 = 8.0;

/// σ(x) = 1/(1+e^{-x}), the function being approximated.
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The fitted cubic `c0 + c1·x + c3·x³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmoidPoly3 {
    /// Constant coefficient; exactly 1/2 by symmetry.
    pub c0: f64,
    /// Linear coefficient.
    pub c1: f64,
    /// Cubic coefficient (negative: the fit flattens the tails).
    pub c3: f64,
}

/// Simpson integration of an even integrand over [0, FIT_RANGE],
/// representing its integral over the symmetric interval up to the factor
/// of two that cancels from both sides of the normal equations.
fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    const INTERVALS: usize = 1 << 16;
    let h = FIT_RANGE / INTERVALS as f64;
    let mut acc = f(0.0) + f(FIT_RANGE);
    for i in 1..INTERVALS {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * f(i as f64 * h);
    }
    acc * h / 3.0
}

static FIT: Lazy<SigmoidPoly3> = Lazy::new(|| {
    // Minimize ∫ (c1·x + c3·x³ - g(x))² over [-8,8] for the odd part
    // g(x) = σ(x) - 1/2. All integrands are even, so [0,8] suffices.
    // Normal equations: [∫x²  ∫x⁴][c1]   [∫x·g ]
    //                   [∫x⁴  ∫x⁶][c3] = [∫x³·g]
    let a11 = simpson(|x| x * x);
    let a12 = simpson(|x| x.powi(4));
    let a22 = simpson(|x| x.powi(6));
    let b1 = simpson(|x| x * (logistic(x) - 0.5));
    let b2 = simpson(|x| x.powi(3) * (logistic(x) - 0.5));
    let det = a11 * a22 - a12 * a12;
    SigmoidPoly3 {
        c0: 0.5,
        c1: (b1 * a22 - b2 * a12) / det,
        c3: (a11 * b2 - a12 * b1) / det,
    }
});

impl SigmoidPoly3 {
    /// The least-squares fit on [-8, 8] (computed once, then cached).
    pub fn fitted() -> Self {
        *FIT
    }

    /// Evaluates the cubic at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + self.c1 * x + self.c3 * x * x * x
    }

    /// Maximum deviation from the logistic over a dense grid on [-8, 8].
    pub fn max_fit_error(&self, grid_points: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=grid_points {
            let x = -FIT_RANGE + 2.0 * FIT_RANGE * i as f64 / grid_points as f64;
            worst = worst.max((self.eval(x) - logistic(x)).abs());
        }
        worst
    }
}
