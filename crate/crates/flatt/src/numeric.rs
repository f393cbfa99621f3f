//! Independent numerical oracles: central finite differences with optional
//! Richardson pairing, the classical RK4 stepper, and composite Simpson line
//! integrals. The verification suites use these to cross-check the symbolic
//! pipeline, so nothing here may call into [`crate::expr`] differentiation.

use crate::{Error, Result};

/// Central finite-difference scheme of order 2, optionally paired with a
/// Richardson step `(4·D_{h/2} - D_h)/3`.
#[derive(Debug, Clone, Copy)]
pub struct FdScheme {
    pub h: f64,
    pub richardson: bool,
}

impl FdScheme {
    pub fn central(h: f64) -> FdScheme {
        assert!(
            (1e-8..=1e-1).contains(&h),
            "finite-difference step {h} outside [1e-8, 1e-1]"
        );
        FdScheme {
            h,
            richardson: false,
        }
    }

    pub fn richardson(h: f64) -> FdScheme {
        FdScheme {
            richardson: true,
            ..FdScheme::central(h)
        }
    }
}

/// Default scheme used by the cross-checks: base step 1e-4 with Richardson
/// pairing (see docs/tolerances.md).
pub fn default_scheme() -> FdScheme {
    FdScheme::richardson(1e-4)
}

/// Central-difference partial derivative of `f` at `p` along coordinate `k`
/// (1-based).
pub fn fd_partial<F>(f: F, p: &[f64], k: usize, scheme: &FdScheme) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let axis = k
        .checked_sub(1)
        .filter(|a| *a < p.len())
        .ok_or(Error::AxisOutOfRange {
            index: k,
            n: p.len(),
        })?;
    let central = |h: f64| -> Result<f64> {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[axis] += h;
        lo[axis] -= h;
        Ok((f(&hi)? - f(&lo)?) / (2.0 * h))
    };
    if scheme.richardson {
        let d_h = central(scheme.h)?;
        let d_h2 = central(scheme.h / 2.0)?;
        Ok((4.0 * d_h2 - d_h) / 3.0)
    } else {
        central(scheme.h)
    }
}

/// One classical RK4 step for `state' = rhs(t, state)`.
pub fn rk4_step<F>(rhs: F, state: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    assert!(dt != 0.0, "rk4_step needs a nonzero step");
    let shifted = |base: &[f64], k: &[f64], scale: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(s, ki)| s + scale * ki).collect()
    };
    let k1 = rhs(t, state)?;
    let k2 = rhs(t + dt / 2.0, &shifted(state, &k1, dt / 2.0))?;
    let k3 = rhs(t + dt / 2.0, &shifted(state, &k2, dt / 2.0))?;
    let k4 = rhs(t + dt, &shifted(state, &k3, dt))?;
    Ok(state
        .iter()
        .enumerate()
        .map(|(i, s)| s + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrate `state' = rhs(t, state)` from `t0` to `t1` with `steps` fixed
/// RK4 steps.
pub fn rk4_integrate<F>(rhs: F, state: &[f64], t0: f64, t1: f64, steps: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    assert!(steps >= 1);
    let dt = (t1 - t0) / steps as f64;
    let mut current = state.to_vec();
    if dt == 0.0 {
        return Ok(current);
    }
    for i in 0..steps {
        current = rk4_step(&rhs, &current, t0 + i as f64 * dt, dt)?;
    }
    Ok(current)
}

/// Composite Simpson quadrature of the 1-form `form` along the straight
/// segment `a -> b`: integrates `t ↦ ⟨form(a + t(b-a)), b-a⟩` over `[0,1]`.
/// `subintervals` must be even and at least 2.
pub fn simpson_line_integral<F>(form: F, a: &[f64], b: &[f64], subintervals: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    assert!(
        subintervals >= 2 && subintervals.is_multiple_of(2),
        "Simpson needs an even number of subintervals >= 2, got {subintervals}"
    );
    assert_eq!(a.len(), b.len());
    let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let integrand = |t: f64| -> Result<f64> {
        let point: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
        let omega = form(&point)?;
        Ok(omega.iter().zip(&delta).map(|(w, d)| w * d).sum())
    };
    let h = 1.0 / subintervals as f64;
    let mut sum = integrand(0.0)? + integrand(1.0)?;
    for i in 1..subintervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_partial_on_square() {
        let f = |p: &[f64]| Ok(p[0] * p[0]);
        let d = fd_partial(f, &[3.0], 1, &FdScheme::central(1e-4)).unwrap();
        assert!((d - 6.0).abs() < 1e-7);
    }

    #[test]
    fn fd_partial_of_constant_is_zero() {
        let f = |_: &[f64]| Ok(2.5);
        let d = fd_partial(f, &[1.0, 2.0], 2, &FdScheme::central(1e-3)).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn richardson_sharpens_exponential_derivative() {
        let f = |p: &[f64]| Ok(p[0].exp());
        let d = fd_partial(f, &[0.0], 1, &FdScheme::richardson(1e-3)).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_zero_rhs_keeps_state() {
        let res = rk4_integrate(|_, s| Ok(vec![0.0; s.len()]), &[1.0, -2.0], 0.0, 1.0, 10).unwrap();
        assert_eq!(res, vec![1.0, -2.0]);
    }

    #[test]
    fn rk4_exponential_growth() {
        let res = rk4_integrate(|_, s| Ok(vec![s[0]]), &[1.0], 0.0, 1.0, 1000).unwrap();
        assert!((res[0] - std::f64::consts::E).abs() < 1e-10);
    }

    #[test]
    fn rk4_rotation_generator() {
        // y' = J y with J the rotation generator turns (1,0) into (0,1) at t = π/2
        let rhs = |_: f64, s: &[f64]| Ok(vec![-s[1], s[0]]);
        let res = rk4_integrate(rhs, &[1.0, 0.0], 0.0, std::f64::consts::FRAC_PI_2, 1000).unwrap();
        assert!((res[0]).abs() < 1e-9);
        assert!((res[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_error_slope_is_fourth_order() {
        let exact = std::f64::consts::E;
        let err = |steps: usize| {
            let res = rk4_integrate(|_, s| Ok(vec![s[0]]), &[1.0], 0.0, 1.0, steps).unwrap();
            (res[0] - exact).abs()
        };
        let (e1, e2, e3) = (err(8), err(16), err(32));
        let s1 = (e1 / e2).log2();
        let s2 = (e2 / e3).log2();
        let slope = (s1 + s2) / 2.0;
        assert!((3.5..=4.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn simpson_on_dx1() {
        let form = |_: &[f64]| Ok(vec![1.0, 0.0]);
        let v = simpson_line_integral(form, &[0.0, 0.0], &[1.0, 0.0], 10).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_on_x1_dx1() {
        let form = |p: &[f64]| Ok(vec![p[0], 0.0]);
        let v = simpson_line_integral(form, &[0.0, 0.0], &[2.0, 0.0], 10).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_on_exponential_form() {
        let form = |p: &[f64]| Ok(vec![p[0].exp(), 0.0]);
        let v = simpson_line_integral(form, &[0.0, 0.0], &[1.0, 0.0], 1000).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_error_slope_is_fourth_order() {
        let exact = std::f64::consts::E - 1.0;
        let err = |sub: usize| {
            let form = |p: &[f64]| Ok(vec![p[0].exp(), 0.0]);
            (simpson_line_integral(form, &[0.0, 0.0], &[1.0, 0.0], sub).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(4), err(8), err(16));
        let slope = ((e1 / e2).log2() + (e2 / e3).log2()) / 2.0;
        assert!((3.5..=4.5).contains(&slope), "slope {slope}");
    }
}
