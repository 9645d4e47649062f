use crate::error::Result;

#[derive(Debug, Clone)]
pub struct ArmijoOutcome<T> {
    pub alpha: f64,
    pub backtracks: usize,
    /// No `p ≤ max_backtracks` passed; the unit step was taken instead.
    pub fallback: bool,
    pub objective: f64,
    pub trial: T,
}

/// Backtracking on `α = β^p`, accepting the first `p` with
/// `f(X) − f(trial(α)) ≥ γ · α · ‖direction‖²`.
///
/// `trial(α)` returns the objective at the projected trial point together
/// with whatever the caller wants to keep. On failure the `α = 1` trial is
/// returned with `fallback = true`.
pub fn armijo_search<T>(
    f_current: f64,
    direction_norm_sq: f64,
    beta: f64,
    gamma: f64,
    max_backtracks: usize,
    mut trial: impl FnMut(f64) -> Result<(f64, T)>,
) -> Result<ArmijoOutcome<T>> {
    let mut unit: Option<(f64, T)> = None;
    let mut alpha = 1.0;
    for p in 0..=max_backtracks {
        let (f_new, payload) = trial(alpha)?;
        if f_current - f_new >= gamma * alpha * direction_norm_sq {
            return Ok(ArmijoOutcome {
                alpha,
                backtracks: p,
                fallback: false,
                objective: f_new,
                trial: payload,
            });
        }
        if p == 0 {
            unit = Some((f_new, payload));
        }
        alpha *= beta;
    }
    let (objective, trial) = unit.expect("at least one trial evaluated");
    Ok(ArmijoOutcome {
        alpha: 1.0,
        backtracks: max_backtracks,
        fallback: true,
        objective,
        trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x) = ½ x², gradient step x − α x from x = 1
    fn quadratic(alpha: f64) -> Result<(f64, f64)> {
        let x = 1.0 - alpha * 1.0;
        Ok((0.5 * x * x, x))
    }

    #[test]
    fn zero_direction_accepts_unit_step() {
        let out = armijo_search(0.5, 0.0, 0.5, 1e-4, 50, |_| Ok((0.5, ()))).unwrap();
        assert_eq!((out.alpha, out.backtracks, out.fallback), (1.0, 0, false));
    }

    #[test]
    fn strict_decrease_at_unit_step() {
        let out = armijo_search(0.5, 1.0, 0.5, 1e-4, 50, quadratic).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert!(!out.fallback);
        assert_eq!(out.trial, 0.0);
    }

    #[test]
    fn backtracks_on_overshoot() {
        // f(x) = 2x², gradient 4 from x = 1; α = 1 overshoots to x = −3
        let trial = |alpha: f64| -> Result<(f64, f64)> {
            let x = 1.0 - alpha * 4.0;
            Ok((2.0 * x * x, x))
        };
        let out = armijo_search(2.0, 16.0, 0.5, 1e-4, 50, trial).unwrap();
        assert_eq!(out.alpha, 0.25);
        assert_eq!(out.backtracks, 2);
    }

    #[test]
    fn ascent_direction_falls_back() {
        // moving along +gradient always increases f
        let trial = |alpha: f64| -> Result<(f64, f64)> {
            let x = 1.0 + alpha;
            Ok((0.5 * x * x, x))
        };
        let out = armijo_search(0.5, 1.0, 0.5, 1e-4, 10, trial).unwrap();
        assert!(out.fallback);
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.trial, 2.0);
    }
}
