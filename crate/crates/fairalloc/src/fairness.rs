//! Alpha-fair utility mathematics.
//!
//! The utility of a cumulative reward `r` is `phi(r) = r^(1-alpha) / (1-alpha)`
//! for a fairness exponent `alpha` in `[0, 1)`. `alpha = 0` is plain reward
//! maximization; larger `alpha` trades efficiency for equity through the
//! diminishing-return curvature of `phi`.

use crate::error::{Error, Result};

/// Check `alpha` lies in `[0, 1)`.
pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "fairness exponent must lie in [0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Alpha-fair utility `r^(1-alpha) / (1-alpha)`.
///
/// Positively homogeneous of degree `1 - alpha`: `phi(b*r) = b^(1-alpha) * phi(r)`.
pub fn phi(alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("phi needs a nonnegative reward, got {r}")));
    }
    Ok(r.powf(1.0 - alpha) / (1.0 - alpha))
}

/// Derivative of the alpha-fair utility, `r^(-alpha)`.
///
/// Non-increasing in `r`, and satisfies `r * phi_prime(r) = (1-alpha) * phi(r)`.
pub fn phi_prime(alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::Domain(format!("phi_prime needs a positive reward, got {r}")));
    }
    Ok(r.powf(-alpha))
}

/// Weighted aggregate fairness `sum_i w_i * phi(R_i)`.
///
/// `weights = None` means uniform unit weights.
pub fn aggregate_fairness(alpha: f64, weights: Option<&[f64]>, rewards: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    if let Some(w) = weights {
        if w.len() != rewards.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} rewards",
                w.len(),
                rewards.len()
            )));
        }
        if w.iter().any(|&wi| !wi.is_finite() || wi < 0.0) {
            return Err(Error::Domain("weights must be nonnegative".into()));
        }
    }
    let mut total = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        total += w * phi(alpha, r)?;
    }
    Ok(total)
}

/// Approximation factor `c_alpha = (1-alpha)^-(1-alpha)`.
///
/// Equals 1 at `alpha = 0`, peaks at `e^(1/e) < 1.445` near `alpha = 1 - 1/e`.
pub fn approx_factor(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha).powf(-(1.0 - alpha)))
}

/// The two-instance ratio whose maximum over `eta` lower-bounds the
/// approximation factor achievable by any online policy.
fn lb_objective(alpha: f64, eta: f64) -> f64 {
    let e = 1.0 - alpha;
    let num = eta.powf(e) + (1.0 - eta).powf(e);
    let den = (1.0 - eta / 2.0).powf(e) + (eta / 2.0).powf(e);
    num / den
}

/// Lower bound to the approximation factor: maximize the two-instance ratio
/// over `eta` in `[0, 1/2]`.
///
/// Returns `(ratio, eta_star)`. Grid search at step 1e-5 bracketed and then
/// refined by golden-section search to width 1e-9.
pub fn lb_ratio(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "lower-bound ratio needs alpha in (0, 1), got {alpha}"
        )));
    }
    let step: f64 = 1e-5;
    let n = (0.5 / step).round() as usize;
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let eta = (i as f64 * step).min(0.5);
        let v = lb_objective(alpha, eta);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement inside the bracketing grid cell.
    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1) as f64 * step).min(0.5);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = lb_objective(alpha, x1);
    let mut f2 = lb_objective(alpha, x2);
    while hi - lo > 1e-9 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = lb_objective(alpha, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = lb_objective(alpha, x1);
        }
    }
    let eta_star = 0.5 * (lo + hi);
    Ok((lb_objective(alpha, eta_star), eta_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_alpha_zero_is_identity() {
        assert_eq!(phi(0.0, 7.0).unwrap(), 7.0);
    }

    #[test]
    fn phi_half_of_four() {
        assert!((phi(0.5, 4.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn phi_rejects_negative_reward() {
        assert!(phi(0.5, -1.0).is_err());
    }

    #[test]
    fn phi_prime_values() {
        assert_eq!(phi_prime(0.0, 17.0).unwrap(), 1.0);
        assert!((phi_prime(0.5, 4.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(phi_prime(0.5, 0.0).is_err());
    }

    #[test]
    fn euler_identity_at_nine() {
        // r * phi'(r) = (1 - alpha) * phi(r)
        let alpha = 0.5;
        let r = 9.0;
        let lhs = r * phi_prime(alpha, r).unwrap();
        let rhs = (1.0 - alpha) * phi(alpha, r).unwrap();
        assert!((lhs - 3.0).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        assert!((aggregate_fairness(0.5, None, &[4.0, 4.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!((aggregate_fairness(0.0, None, &[3.0, 5.0]).unwrap() - 8.0).abs() < 1e-12);
        let w = [2.0, 0.0];
        assert!((aggregate_fairness(0.5, Some(&w), &[4.0, 100.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!(aggregate_fairness(0.5, Some(&[1.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn approx_factor_endpoints_and_peak() {
        assert_eq!(approx_factor(0.0).unwrap(), 1.0);
        assert!((approx_factor(0.5).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        // Max over a fine grid stays below 1.445 and sits near alpha = 1 - 1/e.
        let mut max_v = 0.0;
        let mut argmax = 0.0;
        let mut a = 0.0;
        while a < 1.0 {
            let v = approx_factor(a).unwrap();
            if v > max_v {
                max_v = v;
                argmax = a;
            }
            a += 1e-4;
        }
        assert!(max_v <= 1.445);
        assert!((argmax - (1.0 - 1.0 / std::f64::consts::E)).abs() < 1e-3);
        assert!(approx_factor(1.0).is_err());
    }

    #[test]
    fn lb_objective_degenerates_at_zero() {
        assert!((lb_objective(0.3, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lb_ratio_at_half() {
        // Independent oracle: direct evaluation of the ratio at the
        // hand-computed maximizer. At alpha = 1/2, eta = 0.2:
        //   (sqrt(.2) + sqrt(.8)) / (sqrt(.9) + sqrt(.1)) = 1.0606601...
        let hand = (0.2f64.sqrt() + 0.8f64.sqrt()) / (0.9f64.sqrt() + 0.1f64.sqrt());
        assert!((hand - 1.0606601).abs() < 1e-6);
        let (ratio, eta) = lb_ratio(0.5).unwrap();
        assert!((ratio - hand).abs() < 1e-4, "ratio {ratio} vs oracle {hand}");
        assert!((eta - 0.20).abs() < 0.02, "eta_star {eta}");
    }

    #[test]
    fn lb_ratio_bounds_over_grid() {
        for i in 1..10 {
            let alpha = i as f64 / 10.0;
            let (ratio, eta) = lb_ratio(alpha).unwrap();
            assert!(ratio > 1.0, "alpha={alpha} ratio={ratio}");
            assert!(ratio <= approx_factor(alpha).unwrap() + 1e-9);
            assert!((0.0..=0.5).contains(&eta));
        }
        assert!(lb_ratio(0.0).is_err());
        assert!(lb_ratio(1.0).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_concave(
            alpha in 0.0..0.999f64,
            r1 in 0.0..1e6f64,
            r2 in 0.0..1e6f64,
            lambda in 0.0..1.0f64,
        ) {
            let alpha = alpha.min(0.999);
            let mix = lambda * r1 + (1.0 - lambda) * r2;
            let lhs = phi(alpha, mix).unwrap();
            let rhs = lambda * phi(alpha, r1).unwrap() + (1.0 - lambda) * phi(alpha, r2).unwrap();
            prop_assert!(lhs >= rhs - 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn phi_homogeneity(
            alpha in 0.0..0.999f64,
            r in 1e-3..1e6f64,
            beta in 1e-3..1e3f64,
        ) {
            let lhs = phi(alpha, beta * r).unwrap();
            let rhs = beta.powf(1.0 - alpha) * phi(alpha, r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            let dl = phi_prime(alpha, beta * r).unwrap();
            let dr = beta.powf(-alpha) * phi_prime(alpha, r).unwrap();
            prop_assert!((dl - dr).abs() <= 1e-12 * dr.abs().max(1.0));
        }

        #[test]
        fn phi_prime_matches_finite_differences(
            alpha in 0.0..0.95f64,
            r in 1.0..1e6f64,
        ) {
            let h = r * 1e-5;
            let fd = (phi(alpha, r + h).unwrap() - phi(alpha, r - h).unwrap()) / (2.0 * h);
            let exact = phi_prime(alpha, r).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs());
        }
    }
}
