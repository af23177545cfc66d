//! The four basic rational functions of `beta^rho`, the shift map and its orbits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::brent;
use crate::params::{check_positive, GameParams};

/// Default relative tolerance for inverting `phi0`.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Values of the basic functions at one `beta`.
///
/// `c_minus_one = 1/gamma - 1` and `d_minus_one = 1/delta - 1` are formed from
/// cancellation-free ratios of quadratics, as are their logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicQuad {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub c_minus_one: f64,
    pub d_minus_one: f64,
    pub ln_c_minus_one: f64,
    pub ln_d_minus_one: f64,
}

/// The quadratics in `t = beta^rho`, all divided by `max(1, t)^2`.
///
/// `qa = (1-k)t^2 + 2(1-kr)t + 1+k`, `qb = (1-k)t^2 + 2(1+kr)t + 1+k`,
/// `qc = (1+k)t^2 + 2(1-kr)t + 1-k`, `qd = (1+k)t^2 + 2(1+kr)t + 1-k`,
/// `sq = (1+t)^2`.
#[derive(Debug, Clone, Copy)]
struct Quads {
    qa: f64,
    qb: f64,
    qc: f64,
    qd: f64,
    sq: f64,
}

fn quads(p: &GameParams, ln_t: f64) -> Quads {
    let k = p.kappa;
    let kr = p.kappa * p.rho;
    if ln_t <= 0.0 {
        let t = ln_t.exp();
        let q = |c2: f64, c1: f64, c0: f64| (c2 * t + c1) * t + c0;
        Quads {
            qa: q(1.0 - k, 2.0 * (1.0 - kr), 1.0 + k),
            qb: q(1.0 - k, 2.0 * (1.0 + kr), 1.0 + k),
            qc: q(1.0 + k, 2.0 * (1.0 - kr), 1.0 - k),
            qd: q(1.0 + k, 2.0 * (1.0 + kr), 1.0 - k),
            sq: (1.0 + t) * (1.0 + t),
        }
    } else {
        let u = (-ln_t).exp();
        let q = |c2: f64, c1: f64, c0: f64| c2 + (c1 + c0 * u) * u;
        Quads {
            qa: q(1.0 - k, 2.0 * (1.0 - kr), 1.0 + k),
            qb: q(1.0 - k, 2.0 * (1.0 + kr), 1.0 + k),
            qc: q(1.0 + k, 2.0 * (1.0 - kr), 1.0 - k),
            qd: q(1.0 + k, 2.0 * (1.0 + kr), 1.0 - k),
            sq: (1.0 + u) * (1.0 + u),
        }
    }
}

fn quad_from_ln_beta(p: &GameParams, ln_beta: f64) -> Result<BasicQuad> {
    let beta = ln_beta.exp();
    let q = quads(p, p.rho * ln_beta);
    let phi0 = beta * (q.qb / q.qa);
    let phi1 = beta * (q.qc / q.qd);
    if !phi0.is_finite() || !phi1.is_finite() || phi1 == 0.0 {
        return Err(Error::Range(format!("phi maps overflow at beta = {beta}")));
    }
    Ok(BasicQuad {
        beta,
        gamma: q.qa / (2.0 * q.sq),
        delta: q.qb / (2.0 * q.sq),
        phi0,
        phi1,
        c_minus_one: q.qd / q.qa,
        d_minus_one: q.qc / q.qb,
        ln_c_minus_one: q.qd.ln() - q.qa.ln(),
        ln_d_minus_one: q.qc.ln() - q.qb.ln(),
    })
}

/// Evaluates `gamma`, `delta`, `phi0`, `phi1` at `beta`.
///
/// `beta^rho` is formed once as `exp(rho ln beta)`; a range error is reported if it
/// leaves the floating-point range.
pub fn basic_quad(p: &GameParams, beta: f64) -> Result<BasicQuad> {
    let p = p.validated()?;
    check_positive("beta", beta)?;
    let ln_t = p.rho * beta.ln();
    let t = ln_t.exp();
    if !t.is_finite() || t == 0.0 {
        return Err(Error::Range(format!("beta^rho out of range for beta = {beta}, rho = {}", p.rho)));
    }
    quad_from_ln_beta(&p, beta.ln())
}

/// `ln phi0(e^y) - y`, a bounded function of `y`.
fn ln_phi0_excess(p: &GameParams, y: f64) -> f64 {
    let q = quads(p, p.rho * y);
    q.qb.ln() - q.qa.ln()
}

/// Solves `phi0(beta) = x` and returns `ln beta`.
fn ln_beta_from_phi0(p: &GameParams, x: f64, tol: f64) -> Result<f64> {
    let target = x.ln();
    let f = |y: f64| y + ln_phi0_excess(p, y) - target;
    let hi = target;
    let f_hi = f(hi);
    if f_hi == 0.0 {
        return Ok(hi);
    }
    // phi0(beta) >= beta, so beta <= x; step left geometrically until the sign flips.
    let mut step = std::f64::consts::LN_2;
    let mut lo = hi - step;
    let mut f_lo = f(lo);
    let mut doublings = 0;
    while f_lo > 0.0 {
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NonConvergence(format!("could not bracket phi0^-1({x})")));
        }
        step *= 2.0;
        lo = hi - step;
        f_lo = f(lo);
    }
    // phi0 has log-derivative at most about 2 in ln beta, so this tolerance in ln beta
    // keeps |phi0(beta) - x| below tol * x.
    brent(f, lo, hi, f_lo, f_hi, tol / 4.0, 400)
}

/// `beta` with `phi0(beta) = x`, to relative tolerance `tol`.
pub fn beta_from_phi0(p: &GameParams, x: f64, tol: f64) -> Result<f64> {
    let p = p.validated()?;
    check_positive("x", x)?;
    check_positive("tol", tol)?;
    Ok(ln_beta_from_phi0(&p, x, tol)?.exp())
}

/// The shift map `s(x) = phi1(phi0^-1(x))`.
pub fn s_map(p: &GameParams, x: f64) -> Result<f64> {
    s_map_tol(p, x, DEFAULT_TOL)
}

pub fn s_map_tol(p: &GameParams, x: f64, tol: f64) -> Result<f64> {
    let p = p.validated()?;
    check_positive("x", x)?;
    let ln_b = ln_beta_from_phi0(&p, x, tol)?;
    Ok(quad_from_ln_beta(&p, ln_b)?.phi1)
}

/// The inverse shift `s^-1(x) = 1 / s(1/x)`.
pub fn s_inverse(p: &GameParams, x: f64) -> Result<f64> {
    check_positive("x", x)?;
    Ok(1.0 / s_map(p, 1.0 / x)?)
}

/// `c(x) = 1/gamma(beta(x))` and `d(x) = 1/delta(beta(x))`.
pub fn c_and_d(p: &GameParams, x: f64) -> Result<(f64, f64)> {
    let p = p.validated()?;
    check_positive("x", x)?;
    let q = quad_from_ln_beta(&p, ln_beta_from_phi0(&p, x, DEFAULT_TOL)?)?;
    Ok((1.0 / q.gamma, 1.0 / q.delta))
}

/// One point `s_i(x)` of a shift orbit together with the quantities built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub index: i64,
    pub phi: f64,
    pub beta: f64,
    pub ln_c_minus_one: f64,
    pub ln_d_minus_one: f64,
}

/// Orbit points for indices `lo..=hi`, possibly shortened at either end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub lo: i64,
    pub hi: i64,
    pub points: Vec<OrbitPoint>,
    pub truncated_left: bool,
    pub truncated_right: bool,
}

impl Orbit {
    pub fn get(&self, i: i64) -> Option<&OrbitPoint> {
        if i < self.lo || i > self.hi {
            None
        } else {
            self.points.get((i - self.lo) as usize)
        }
    }
}

/// Whether an orbit value is too extreme to continue: `x^(2 rho)` near the edge of range.
fn beyond_range(p: &GameParams, x: f64) -> bool {
    let l = x.ln().abs();
    !x.is_finite() || x <= 0.0 || p.rho * l > 345.0 || l > 690.0
}

fn point(p: &GameParams, index: i64, ln_beta: f64) -> Result<OrbitPoint> {
    let q = quad_from_ln_beta(p, ln_beta)?;
    Ok(OrbitPoint {
        index,
        phi: q.phi0,
        beta: q.beta,
        ln_c_minus_one: q.ln_c_minus_one,
        ln_d_minus_one: q.ln_d_minus_one,
    })
}

/// Computes `s_i(x)` for `i` in `lo..=hi` (with `lo <= 0 <= hi`).
///
/// Forward steps solve `phi0(beta_{i+1}) = phi1(beta_i)`. Backward steps use
/// `beta_{i-1} = 1 / beta'` where `phi0(beta') = 1 / s_i`, so that
/// `phi1(beta_{i-1}) = s_i`. Either end stops early once the orbit value leaves
/// the representable range, setting the matching truncation flag.
pub fn shift_orbit(p: &GameParams, x: f64, lo: i64, hi: i64, tol: f64) -> Result<Orbit> {
    let p = p.validated()?;
    check_positive("x", x)?;
    if lo > 0 || hi < 0 {
        return Err(Error::InvalidParameter(format!("orbit range {lo}..={hi} must contain 0")));
    }
    let ln_b0 = ln_beta_from_phi0(&p, x, tol)?;
    let p0 = point(&p, 0, ln_b0)?;
    let mut fwd = vec![p0];
    let mut truncated_right = false;
    let mut ln_b = ln_b0;
    for i in 1..=hi {
        let q = quad_from_ln_beta(&p, ln_b)?;
        let next = q.phi1;
        if beyond_range(&p, next) {
            truncated_right = true;
            break;
        }
        ln_b = ln_beta_from_phi0(&p, next, tol)?;
        fwd.push(point(&p, i, ln_b)?);
    }
    let mut back = Vec::new();
    let mut truncated_left = false;
    let mut cur = x;
    for i in 1..=(-lo) {
        let inv = 1.0 / cur;
        if beyond_range(&p, inv) {
            truncated_left = true;
            break;
        }
        let ln_bp = ln_beta_from_phi0(&p, inv, tol)?;
        let pt = match point(&p, -i, -ln_bp) {
            Ok(pt) if !beyond_range(&p, pt.phi) => pt,
            _ => {
                truncated_left = true;
                break;
            }
        };
        cur = pt.phi;
        back.push(pt);
    }
    let new_lo = -(back.len() as i64);
    let new_hi = fwd.len() as i64 - 1;
    back.reverse();
    back.extend(fwd);
    Ok(Orbit { lo: new_lo, hi: new_hi, points: back, truncated_left, truncated_right })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: f64, r: f64) -> GameParams {
        GameParams::new(k, r).unwrap()
    }

    #[test]
    fn unit_corner_values() {
        let q = basic_quad(&p(1.0, 1.0), 1.0).unwrap();
        assert!((q.gamma - 0.25).abs() < 1e-15);
        assert!((q.delta - 0.75).abs() < 1e-15);
        assert!((q.phi0 - 3.0).abs() < 1e-15);
        assert!((q.phi1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.c_minus_one - 3.0).abs() < 1e-15);
        assert!((q.d_minus_one - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unit_corner_shift() {
        let pp = p(1.0, 1.0);
        assert!((s_map(&pp, 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((s_inverse(&pp, 1.0 / 3.0).unwrap() - 3.0).abs() < 1e-11);
        assert!((beta_from_phi0(&pp, 3.0, 1e-14).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_beta() {
        let pp = p(0.5, 1.0);
        assert!(matches!(basic_quad(&pp, 0.0), Err(Error::InvalidParameter(_))));
        assert!(basic_quad(&pp, -1.0).is_err());
        assert!(basic_quad(&pp, f64::NAN).is_err());
        assert!(matches!(basic_quad(&p(0.5, 3.0), 1e200), Err(Error::Range(_))));
    }

    #[test]
    fn symmetries_hold() {
        for &(k, r) in &[(1.0, 1.0), (0.5, 0.5), (0.3, 1.7), (0.9, 0.2)] {
            let pp = p(k, r);
            let neg = GameParams { kappa: -k, rho: r };
            for &b in &[0.01, 0.3, 1.0, 2.5, 70.0] {
                let q = basic_quad(&pp, b).unwrap();
                let qi = basic_quad(&pp, 1.0 / b).unwrap();
                assert!((qi.phi0 * q.phi1 - 1.0).abs() < 1e-13);
                // phi1 at kappa equals phi0 at -kappa; evaluate the latter through the quadratics.
                let qn = quads(&neg, r * b.ln());
                let phi0_neg = b * qn.qb / qn.qa;
                assert!(((phi0_neg - q.phi1) / q.phi1).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn orbit_unit_corner_from_domain_edge() {
        let pp = p(1.0, 1.0);
        let o = shift_orbit(&pp, 3.0, -3, 3, 1e-13).unwrap();
        assert!((o.get(1).unwrap().phi - 1.0 / 3.0).abs() < 1e-12);
        assert!((o.get(0).unwrap().beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_orbit_truncates_at_unit_kappa() {
        let pp = p(1.0, 1.0);
        let o = shift_orbit(&pp, 2.0, -60, 60, 1e-12).unwrap();
        assert!(o.truncated_left && o.truncated_right);
        assert!(o.lo > -60 && o.hi < 60);
        for w in o.points.windows(2) {
            assert!(w[0].phi > w[1].phi);
        }
    }
}
