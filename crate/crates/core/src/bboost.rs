//! The Brownian Boost system: the flow `S`, the ODE pair `(f, g)`, the stake pair
//! `(a, b)` and the prize totals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gk15, integrate, least_squares, log_add_exp};
use crate::params::{check_finite, check_positive};

/// `H(z) = z + 2 ln z - 1/z`, increasing on `(0, inf)` with `H(1/z) = -H(z)`.
pub fn h_func(z: f64) -> f64 {
    z + 2.0 * z.ln() - 1.0 / z
}

/// Inverse of [`h_func`] by safeguarded Newton iteration.
pub fn h_inverse(y: f64) -> Result<f64> {
    check_finite("y", y)?;
    if y < 0.0 {
        return Ok(1.0 / h_inverse_nonneg(-y));
    }
    Ok(h_inverse_nonneg(y))
}

fn h_inverse_nonneg(y: f64) -> f64 {
    if y == 0.0 {
        return 1.0;
    }
    // For z >= 1, z - 1 <= H(z) <= 3z, so the root lies in [max(1, y/3), y + 1].
    let mut lo = (y / 3.0).max(1.0);
    let mut hi = y + 1.0;
    let mut z = if y < 4.0 { 1.0 + y / 4.0 } else { (y - 2.0 * y.ln()).max(lo) };
    for _ in 0..200 {
        let fz = h_func(z) - y;
        if fz > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let dz = fz / (1.0 + 2.0 / z + 1.0 / (z * z));
        let mut next = z - dz;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 2.0 * f64::EPSILON * z || hi - lo <= 2.0 * f64::EPSILON * hi {
            return next;
        }
        z = next;
    }
    z
}

/// One point of the flow: `s = S_rho(x, u)` and `j = s^rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub s: f64,
    pub j: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    check_positive("rho", rho)
}

fn flow_j(rho: f64, ln_x: f64, u: f64) -> f64 {
    let j0 = (rho * ln_x).exp();
    // H(j0) written with the logarithm directly to keep precision for extreme x.
    let h0 = j0 + 2.0 * rho * ln_x - 1.0 / j0;
    let y = h0 - 8.0 * rho * rho * u;
    if y < 0.0 {
        1.0 / h_inverse_nonneg(-y)
    } else {
        h_inverse_nonneg(y)
    }
}

/// `S_rho(x, u)`, the solution of `S' = -8 rho S^(1+rho) / (1 + S^rho)^2` with `S(0) = x`,
/// through `S^rho = H^-1(H(x^rho) - 8 rho^2 u)`.
pub fn flow(rho: f64, x: f64, u: f64) -> Result<FlowPoint> {
    check_rho(rho)?;
    check_positive("x", x)?;
    check_finite("u", u)?;
    let j = flow_j(rho, x.ln(), u);
    let s = j.powf(1.0 / rho);
    if !s.is_finite() || s == 0.0 {
        return Err(Error::Range(format!("S = J^(1/rho) out of range for J = {j}, rho = {rho}")));
    }
    Ok(FlowPoint { s, j })
}

/// Independent adaptive RK4 (step doubling) integration of the flow ODE.
pub fn rk4_flow(rho: f64, x: f64, u: f64, tol: f64) -> Result<f64> {
    check_rho(rho)?;
    check_positive("x", x)?;
    check_finite("u", u)?;
    check_positive("tol", tol)?;
    let rhs = |s: f64| {
        let t = s.powf(rho);
        -8.0 * rho * s * t / ((1.0 + t) * (1.0 + t))
    };
    let step = |s: f64, h: f64| {
        let k1 = rhs(s);
        let k2 = rhs(s + 0.5 * h * k1);
        let k3 = rhs(s + 0.5 * h * k2);
        let k4 = rhs(s + h * k3);
        s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let dir = u.signum();
    let mut t = 0.0;
    let mut s = x;
    let mut h = 0.01 * dir;
    let mut steps = 0usize;
    while (u - t) * dir > 0.0 {
        if (t + h - u) * dir > 0.0 {
            h = u - t;
        }
        let full = step(s, h);
        let half = step(step(s, 0.5 * h), 0.5 * h);
        let err = (half - full).abs() / 15.0;
        if err <= tol * half.abs().max(f64::MIN_POSITIVE) {
            t += h;
            s = half + (half - full) / 15.0;
            if err < 0.01 * tol * half.abs() {
                h *= 2.0;
            }
        } else {
            h *= 0.5;
        }
        steps += 1;
        if steps > 10_000_000 || h == 0.0 {
            return Err(Error::NonConvergence("RK4 flow integration did not finish".into()));
        }
    }
    Ok(s)
}

/// `Phi_f = 1 - 2 (1 + (1-rho) J) / (1 + J)^2` as a function of `J = S^rho`.
pub fn phi_f(rho: f64, j: f64) -> f64 {
    1.0 - 2.0 * (1.0 + (1.0 - rho) * j) / ((1.0 + j) * (1.0 + j))
}

/// `Phi_g = 1 - 2 ((1-rho) J + J^2) / (1 + J)^2`.
pub fn phi_g(rho: f64, j: f64) -> f64 {
    if j > 1.0 {
        let k = 1.0 / j;
        1.0 - 2.0 * ((1.0 - rho) * k + 1.0) / ((1.0 + k) * (1.0 + k))
    } else {
        1.0 - 2.0 * ((1.0 - rho) * j + j * j) / ((1.0 + j) * (1.0 + j))
    }
}

/// `(f, g)` and the stakes `(a, b)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdePairEval {
    pub r: f64,
    pub s: f64,
    pub f: f64,
    pub g: f64,
    pub ln_f: f64,
    pub ln_g: f64,
    pub a: f64,
    pub b: f64,
    /// Estimated absolute quadrature error in `ln f` and `ln g`.
    pub quad_error: f64,
}

fn pair_eval(rho: f64, x: f64, r: f64, ln_f: f64, ln_g: f64, quad_error: f64) -> OdePairEval {
    let den = 2.0 * log_add_exp(rho * ln_f, rho * ln_g);
    let base = (2.0 * rho).ln();
    let ln_a = base + (1.0 + rho) * ln_f + rho * ln_g - den;
    let ln_b = base + rho * ln_f + (1.0 + rho) * ln_g - den;
    let j = flow_j(rho, x.ln(), r);
    OdePairEval {
        r,
        s: j.powf(1.0 / rho),
        f: ln_f.exp(),
        g: ln_g.exp(),
        ln_f,
        ln_g,
        a: ln_a.exp(),
        b: ln_b.exp(),
        quad_error,
    }
}

fn log_rates(rho: f64, ln_x: f64) -> impl Fn(f64) -> [f64; 2] {
    move |u| {
        let j = flow_j(rho, ln_x, u);
        [2.0 * phi_f(rho, j), -2.0 * phi_g(rho, j)]
    }
}

/// `f = exp(2 int_0^r Phi_f)`, `g = x exp(-2 int_0^r Phi_g)` by adaptive quadrature.
pub fn ode_pair(rho: f64, x: f64, r: f64, tol: f64) -> Result<OdePairEval> {
    check_rho(rho)?;
    check_positive("x", x)?;
    check_finite("r", r)?;
    check_positive("tol", tol)?;
    let q = integrate(log_rates(rho, x.ln()), 0.0, r, tol, tol, 100_000)?;
    Ok(pair_eval(rho, x, r, q.value[0], x.ln() + q.value[1], q.error[0].max(q.error[1])))
}

/// `(f, g, a, b)` on a grid of `r` values, integrating between neighbouring nodes.
pub fn ode_profile(rho: f64, x: f64, rs: &[f64], tol: f64) -> Result<Vec<OdePairEval>> {
    check_rho(rho)?;
    check_positive("x", x)?;
    check_positive("tol", tol)?;
    for &r in rs {
        check_finite("r", r)?;
    }
    let ln_x = x.ln();
    let rate = log_rates(rho, ln_x);
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&i, &j| rs[i].total_cmp(&rs[j]));
    let mut out = vec![None; rs.len()];
    // March right from zero over the nonnegative nodes, then left over the negative ones.
    let (neg, pos): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| rs[i] < 0.0);
    for nodes in [pos, neg.into_iter().rev().collect()] {
        let (mut u, mut lf, mut lg, mut err) = (0.0, 0.0, ln_x, 0.0);
        for i in nodes {
            let q = integrate(&rate, u, rs[i], tol, tol, 100_000)?;
            lf += q.value[0];
            lg += q.value[1];
            err += q.error[0].max(q.error[1]);
            u = rs[i];
            out[i] = Some(pair_eval(rho, x, u, lf, lg, err));
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every node visited")).collect())
}

/// `v(x)` with `S_rho(x, v) = 1`: `8 rho v = 2 ln x + (x^rho - x^-rho) / rho`.
pub fn battlefield_point(rho: f64, x: f64) -> Result<f64> {
    check_rho(rho)?;
    check_positive("x", x)?;
    let l = x.ln();
    Ok((2.0 * l + 2.0 * (rho * l).sinh() / rho) / (8.0 * rho))
}

/// Equilibrium drift `(1 - S_rho(1, u)^rho) / (1 + S_rho(1, u)^rho)`.
pub fn drift(rho: f64, u: f64) -> Result<f64> {
    check_rho(rho)?;
    check_finite("u", u)?;
    let j = flow_j(rho, 0.0, u);
    Ok((1.0 - j) / (1.0 + j))
}

/// Integrals of `f` and `g` over the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrizeTotals {
    pub int_f: f64,
    pub int_g: f64,
    /// Estimated mass of `f` and `g` outside the integration range.
    pub tail_bound: f64,
    pub quad_error: f64,
    /// Half-width `T` of the range `[v - T, v + T]` around the battlefield point.
    pub half_width: f64,
}

fn gk15_value<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let (v, e) = gk15(f, a, b);
    (v, e.iter().cloned().fold(0.0, f64::max))
}

/// `int f` and `int g` over the line. The range is `[v - T, v + T]` (extended to contain
/// zero) with `e^(-2T) T^zeta` below `tol / 10`; within each panel `ln f` and `ln g` are
/// carried from the panel's left end by a fixed 15-point rule.
pub fn prize_totals(rho: f64, x: f64, tol: f64) -> Result<PrizeTotals> {
    check_rho(rho)?;
    check_positive("x", x)?;
    check_positive("tol", tol)?;
    let zeta = ((1.0 + rho) / (2.0 * rho * rho)).max(0.0);
    let mut t = 5.0f64;
    while -2.0 * t + zeta * t.ln() > (tol / 10.0).ln() {
        t += 0.5;
    }
    let v = battlefield_point(rho, x)?;
    let lo = (v - t).min(0.0);
    let hi = (v + t).max(0.0);
    let h = 0.125;
    let mut rate = log_rates(rho, x.ln());
    let mut int_f = 0.0;
    let mut int_g = 0.0;
    let mut quad_error = 0.0;
    let mut edge = [0.0f64; 4];
    for dir in [1.0f64, -1.0] {
        let limit = if dir > 0.0 { hi } else { -lo };
        let panels = (limit / h).ceil() as usize;
        let (mut lf, mut lg) = (0.0, x.ln());
        for k in 0..panels {
            let u0 = dir * k as f64 * h;
            let u1 = dir * ((k + 1) as f64 * h).min(limit);
            let (lf0, lg0) = (lf, lg);
            let mut inner_err = 0.0f64;
            let mut dens = |xi: f64| {
                let (d, e) = gk15_value(&mut rate, u0, xi);
                inner_err = inner_err.max(e);
                [(lf0 + d[0]).exp(), (lg0 + d[1]).exp()]
            };
            let (vals, errs) = gk15(&mut dens, u0, u1);
            int_f += dir * vals[0];
            int_g += dir * vals[1];
            quad_error += errs[0].max(errs[1]);
            let (d, e) = gk15_value(&mut rate, u0, u1);
            lf += d[0];
            lg += d[1];
            quad_error += (e + inner_err) * (lf.exp() + lg.exp()) * h;
        }
        let i = if dir > 0.0 { 0 } else { 2 };
        edge[i] = lf.exp();
        edge[i + 1] = lg.exp();
    }
    let tail_bound = edge.iter().sum::<f64>() / (2.0 - zeta / t).max(1.0);
    Ok(PrizeTotals { int_f, int_g, tail_bound, quad_error, half_width: t })
}

/// Fitted tail exponents of `f`, `g`, `a`, `b` at `x = 1` against their predicted values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rho: f64,
    pub zeta_f: f64,
    pub zeta_g: f64,
    pub zeta_a: f64,
    pub zeta_b: f64,
    pub theory_f: f64,
    pub theory_g: f64,
    pub theory_a: f64,
    pub theory_b: f64,
}

/// Fits `ln q(1, u) + 2u` on `u` in `[20, 60]` against
/// `zeta ln u + c0 + c1 / u + c2 ln u / u` for each of `q = f, g, a, b`.
///
/// The two `1/u` terms absorb the leading correction to the power law, which would
/// otherwise bias a straight-line fit by several percent for `rho < 1`.
pub fn decay_check(rho: f64) -> Result<DecayFit> {
    check_rho(rho)?;
    let us: Vec<f64> = (0..=80).map(|i| 20.0 + 0.5 * i as f64).collect();
    let prof = ode_profile(rho, 1.0, &us, 1e-13)?;
    let rows: Vec<Vec<f64>> = us.iter().map(|&u| vec![1.0, u.ln(), 1.0 / u, u.ln() / u]).collect();
    let fit = |sel: &dyn Fn(&OdePairEval) -> f64| -> Result<f64> {
        let y: Vec<f64> = prof.iter().zip(&us).map(|(e, &u)| sel(e) + 2.0 * u).collect();
        Ok(least_squares(&rows, &y)?[1])
    };
    let zf = (1.0 + rho) / (2.0 * rho * rho);
    let zg = (1.0 - rho) / (2.0 * rho * rho);
    Ok(DecayFit {
        rho,
        zeta_f: fit(&|e| e.ln_f)?,
        zeta_g: fit(&|e| e.ln_g)?,
        zeta_a: fit(&|e| e.a.ln())?,
        zeta_b: fit(&|e| e.b.ln())?,
        theory_f: zf,
        theory_g: zg,
        theory_a: zf - 1.0,
        theory_b: zg - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_inverse_roundtrip() {
        for &z in &[1e-8, 0.01, 0.5, 1.0, 2.0, 37.0, 1e6] {
            let back = h_inverse(h_func(z)).unwrap();
            assert!(((back - z) / z).abs() < 1e-14, "{z} {back}");
        }
    }

    #[test]
    fn flow_hits_two() {
        // H(2) = 1.5 + 2 ln 2, and S_1(1, u) = 2 when -8u = H(2).
        let u = -(1.5 + 2.0 * 2f64.ln()) / 8.0;
        assert!((flow(1.0, 1.0, u).unwrap().s - 2.0).abs() < 1e-14);
        assert!((flow(1.0, 1.0, -0.36079).unwrap().s - 2.0).abs() < 1e-4);
    }

    #[test]
    fn flow_rejects_bad_input() {
        assert!(flow(0.0, 1.0, 0.0).is_err());
        assert!(flow(1.0, 0.0, 0.0).is_err());
        assert!(flow(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn battlefield_point_at_e() {
        let e = std::f64::consts::E;
        assert!((battlefield_point(1.0, e).unwrap() - (2.0 + e - 1.0 / e) / 8.0).abs() < 1e-15);
        assert!((flow(1.0, e, battlefield_point(1.0, e).unwrap()).unwrap().s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn drift_at_origin_and_far_right() {
        assert!(drift(1.0, 0.0).unwrap().abs() < 1e-15);
        // 1 - R is 1 / (4 rho^2 u) to leading order.
        let d = drift(1.0, 100.0).unwrap();
        assert!(((1.0 - d) * 400.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn ode_pair_starts_at_x() {
        let e = ode_pair(0.7, 2.0, 0.0, 1e-12).unwrap();
        assert_eq!(e.f, 1.0);
        assert!((e.g - 2.0).abs() < 1e-15);
    }
}
