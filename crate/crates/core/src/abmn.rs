//! Default and standard solutions of the ABMN equations on a finite window,
//! the Mina margin map and its supremum over the central domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{brent, golden_max, least_squares, log_add_exp, log_rel_residual, rel_residual};
use crate::params::{check_positive, GameParams, Regime};
use crate::phimaps::{shift_orbit, Orbit, DEFAULT_TOL};

/// Geometric tail estimates for the parts of `m` and `n` outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub m_left: f64,
    pub m_right: f64,
    pub n_left: f64,
    pub n_right: f64,
}

impl TailBounds {
    /// Largest tail relative to the corresponding total.
    pub fn relative(&self, m_total: f64, n_total: f64) -> f64 {
        let m = (self.m_left + self.m_right) / m_total;
        let n = (self.n_left + self.n_right) / n_total;
        m.max(n)
    }
}

/// A solution of the ABMN equations on the index window `lo..=hi`.
///
/// Increments `m_{k,k+1}` and `n_{k+1,k} = n_k - n_{k+1}` are stored as logarithms for
/// `k` in `lo..hi`; stakes `a_i`, `b_i` for `i` in `lo+1..hi`; values `m_i`, `n_i` and
/// orbit points `phi_i = s_i(x)` for `i` in `lo..=hi`. Values are anchored at
/// `m_{-inf} = 0` and `n_{+inf} = 0` using the tail estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmnWindow {
    pub params: GameParams,
    pub x: f64,
    pub lo: i64,
    pub hi: i64,
    pub phi: Vec<f64>,
    pub ln_m_inc: Vec<f64>,
    pub ln_n_inc: Vec<f64>,
    pub ln_a: Vec<f64>,
    pub ln_b: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    /// `m_{+inf} - m_{-inf}`.
    pub m_inf_total: f64,
    /// `n_{-inf} - n_{+inf}`.
    pub n_neg_inf_total: f64,
    pub tails: TailBounds,
    pub truncated_left: bool,
    pub truncated_right: bool,
    /// Logarithm of the factor applied to the default solution (zero for the default itself).
    pub ln_scale: f64,
}

impl AbmnWindow {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    fn at(&self, lo: i64, v: &[f64], i: i64) -> Option<f64> {
        if i < lo {
            return None;
        }
        v.get((i - lo) as usize).copied()
    }

    pub fn m_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo, &self.m, i)
    }

    pub fn n_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo, &self.n, i)
    }

    pub fn phi_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo, &self.phi, i)
    }

    pub fn a_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo + 1, &self.a, i)
    }

    pub fn b_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo + 1, &self.b, i)
    }

    pub fn ln_a_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo + 1, &self.ln_a, i)
    }

    pub fn ln_b_at(&self, i: i64) -> Option<f64> {
        self.at(self.lo + 1, &self.ln_b, i)
    }

    /// `ln m_{k,k+1}`.
    pub fn ln_m_inc_at(&self, k: i64) -> Option<f64> {
        self.at(self.lo, &self.ln_m_inc, k)
    }

    /// `ln (n_k - n_{k+1})`.
    pub fn ln_n_inc_at(&self, k: i64) -> Option<f64> {
        self.at(self.lo, &self.ln_n_inc, k)
    }

    /// Index `i` in the window with `phi_i` in the central domain.
    pub fn battlefield(&self) -> Option<i64> {
        let d = self.params.central_domain().ok()?;
        self.phi.iter().position(|&v| d.contains(v)).map(|j| self.lo + j as i64)
    }

    pub fn relative_tail(&self) -> f64 {
        self.tails.relative(self.m_inf_total, self.n_neg_inf_total)
    }

    /// Borrowed view of the arrays that enter the ABMN equations.
    pub fn arrays(&self) -> AbmnArrays<'_> {
        AbmnArrays {
            kappa: self.params.kappa,
            rho: self.params.rho,
            ln_m_inc: &self.ln_m_inc,
            ln_n_inc: &self.ln_n_inc,
            ln_a: &self.ln_a,
            ln_b: &self.ln_b,
        }
    }
}

/// Log increments `ln m_{k,k+1}` and `ln(n_k - n_{k+1})` for `k` in `orbit.lo..orbit.hi`.
fn log_increments(p: &GameParams, x: f64, orbit: &Orbit) -> (Vec<f64>, Vec<f64>) {
    let ln_k = p.kappa.ln();
    let ln_kx = ln_k + x.ln();
    let count = (orbit.hi - orbit.lo) as usize;
    let mut lm = vec![0.0; count];
    let mut ln = vec![0.0; count];
    let idx = |k: i64| (k - orbit.lo) as usize;
    // k = -1 is the normalising increment; walk outwards from it.
    if orbit.lo <= -1 {
        lm[idx(-1)] = ln_k;
        ln[idx(-1)] = ln_kx;
    }
    let (mut sc, mut sd) = (0.0, 0.0);
    for k in 0..orbit.hi {
        let pt = orbit.get(k).expect("orbit index");
        sc += pt.ln_c_minus_one;
        sd += pt.ln_d_minus_one;
        lm[idx(k)] = ln_k + sc;
        ln[idx(k)] = ln_kx + sd;
    }
    let (mut sc, mut sd) = (0.0, 0.0);
    let mut k = -2;
    while k >= orbit.lo {
        let pt = orbit.get(k + 1).expect("orbit index");
        sc += pt.ln_c_minus_one;
        sd += pt.ln_d_minus_one;
        lm[idx(k)] = ln_k - sc;
        ln[idx(k)] = ln_kx - sd;
        k -= 1;
    }
    (lm, ln)
}

fn ln_sum(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|&l| (l - mx).exp()).sum::<f64>().ln()
}

/// `ln(r / (1 - r))` for a ratio clamped into `[0, 1)`, or `+inf` if `r >= 1`.
fn ln_geometric_tail(ln_r: f64) -> f64 {
    if ln_r >= 0.0 {
        f64::INFINITY
    } else {
        ln_r - (-ln_r.exp()).ln_1p()
    }
}

fn build_window(p: GameParams, x: f64, orbit: Orbit, ln_scale: f64) -> Result<AbmnWindow> {
    if orbit.hi - orbit.lo < 2 {
        return Err(Error::InsufficientData("window needs at least three orbit points".into()));
    }
    let (mut lm, mut lnn) = log_increments(&p, x, &orbit);
    for v in lm.iter_mut().chain(lnn.iter_mut()) {
        *v += ln_scale;
    }
    let (lo, hi) = (orbit.lo, orbit.hi);
    let limit = ((1.0 - p.kappa) / (1.0 + p.kappa)).ln();
    let first = orbit.get(lo).expect("orbit");
    let last = orbit.get(hi).expect("orbit");
    // Ratios of successive increments beyond each end, bounded below by their limits.
    let r_ml = (-first.ln_c_minus_one).max(limit);
    let r_nl = (-first.ln_d_minus_one).max(limit);
    let r_mr = last.ln_c_minus_one.max(limit);
    let r_nr = last.ln_d_minus_one.max(limit);
    let nk = lm.len();
    let ln_tails = [
        lm[0] + ln_geometric_tail(r_ml),
        lm[nk - 1] + ln_geometric_tail(r_mr),
        lnn[0] + ln_geometric_tail(r_nl),
        lnn[nk - 1] + ln_geometric_tail(r_nr),
    ];
    let tails = TailBounds {
        m_left: ln_tails[0].exp(),
        m_right: ln_tails[1].exp(),
        n_left: ln_tails[2].exp(),
        n_right: ln_tails[3].exp(),
    };
    let ln_m_total = log_add_exp(ln_sum(&lm), log_add_exp(ln_tails[0], ln_tails[1]));
    let ln_n_total = log_add_exp(ln_sum(&lnn), log_add_exp(ln_tails[2], ln_tails[3]));

    let mut m = Vec::with_capacity(nk + 1);
    let mut acc = tails.m_left;
    m.push(acc);
    for &l in &lm {
        acc += l.exp();
        m.push(acc);
    }
    let mut n = vec![0.0; nk + 1];
    let mut acc = tails.n_right;
    n[nk] = acc;
    for j in (0..nk).rev() {
        acc += lnn[j].exp();
        n[j] = acc;
    }

    let (kap, rho) = (p.kappa, p.rho);
    let ln_kr = (kap * rho).ln();
    let mut ln_a = Vec::with_capacity(nk - 1);
    let mut ln_b = Vec::with_capacity(nk - 1);
    for j in 1..nk {
        let big_m = log_add_exp(lm[j - 1], lm[j]);
        let big_n = log_add_exp(lnn[j - 1], lnn[j]);
        let den = 2.0 * log_add_exp(rho * big_m, rho * big_n);
        ln_a.push(ln_kr + (1.0 + rho) * big_m + rho * big_n - den);
        ln_b.push(ln_kr + rho * big_m + (1.0 + rho) * big_n - den);
    }
    Ok(AbmnWindow {
        params: p,
        x,
        lo,
        hi,
        phi: orbit.points.iter().map(|q| q.phi).collect(),
        a: ln_a.iter().map(|v| v.exp()).collect(),
        b: ln_b.iter().map(|v| v.exp()).collect(),
        ln_a,
        ln_b,
        ln_m_inc: lm,
        ln_n_inc: lnn,
        m,
        n,
        m_inf_total: ln_m_total.exp(),
        n_neg_inf_total: ln_n_total.exp(),
        tails,
        truncated_left: orbit.truncated_left,
        truncated_right: orbit.truncated_right,
        ln_scale,
    })
}

/// Default solution with `m_{-1,0} = kappa` and `n_{-1} - n_0 = kappa x` on an
/// explicit window `lo..=hi` (`lo <= -1`, `hi >= 1`).
pub fn default_solution_on(p: &GameParams, x: f64, lo: i64, hi: i64) -> Result<AbmnWindow> {
    let p = p.validated()?;
    check_positive("x", x)?;
    if lo > -1 || hi < 1 {
        return Err(Error::InvalidParameter(format!("window {lo}..={hi} must contain -1..=1")));
    }
    let orbit = shift_orbit(&p, x, lo, hi, DEFAULT_TOL)?;
    build_window(p, x, orbit, 0.0)
}

/// Default solution on the symmetric window `-half_len..=half_len`.
pub fn default_solution(p: &GameParams, x: f64, half_len: usize) -> Result<AbmnWindow> {
    if half_len < 1 {
        return Err(Error::InvalidParameter("half_len must be at least 1".into()));
    }
    let h = half_len as i64;
    default_solution_on(p, x, -h, h)
}

/// The standard solution: the default one scaled so that `m_{-inf} = 0` and `m_{+inf} = 1`.
pub fn standard_solution(p: &GameParams, x: f64, half_len: usize) -> Result<AbmnWindow> {
    standardize(&default_solution(p, x, half_len)?)
}

/// Rescales a default window so that `m_{+inf} - m_{-inf} = 1`.
pub fn standardize(w: &AbmnWindow) -> Result<AbmnWindow> {
    let shift = -w.m_inf_total.ln();
    if !shift.is_finite() {
        return Err(Error::Range("m total is zero or infinite".into()));
    }
    let orbit = shift_orbit(&w.params, w.x, w.lo, w.hi, DEFAULT_TOL)?;
    build_window(w.params, w.x, orbit, w.ln_scale + shift)
}

/// Borrowed log-arrays entering the ABMN equations, indexed from the window's left end.
///
/// The increments have one more entry than the stakes.
#[derive(Debug, Clone, Copy)]
pub struct AbmnArrays<'a> {
    pub kappa: f64,
    pub rho: f64,
    pub ln_m_inc: &'a [f64],
    pub ln_n_inc: &'a [f64],
    pub ln_a: &'a [f64],
    pub ln_b: &'a [f64],
}

/// Residuals of the four equations at one interior site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteResidual {
    pub index: i64,
    pub eq: [f64; 4],
}

impl SiteResidual {
    pub fn max(&self) -> f64 {
        self.eq.iter().cloned().fold(0.0, f64::max)
    }
}

fn lottery_weights(rho: f64, ln_a: f64, ln_b: f64) -> (f64, f64) {
    if ln_a == f64::NEG_INFINITY && ln_b == f64::NEG_INFINITY {
        return (0.5, 0.5);
    }
    // both directly, so the smaller weight keeps full relative precision
    let d = rho * (ln_b - ln_a);
    (1.0 / (1.0 + d.exp()), 1.0 / (1.0 + (-d).exp()))
}

impl AbmnArrays<'_> {
    /// Relative residuals `|L - R| / (|L| + |R|)` of the four equations at each interior site.
    ///
    /// The first two equations are unchanged by adding a constant to every `m_i`
    /// (resp. `n_i`); they are evaluated after translating so that `m_{i-1} = 0`
    /// (resp. `n_{i+1} = 0`), which keeps full relative precision where the values
    /// themselves are dominated by far-away increments. Equation one then reads
    /// `2 (a^r + b^r)(m_{i-1,i} + a) = (a^r (1+k) + b^r (1-k)) M_i`, and likewise for the
    /// second. All four sides are divided by `a^r + b^r` where it appears.
    ///
    /// Entry `j` of the result refers to the site at array position `j + 1`.
    pub fn residuals(&self) -> Result<Vec<[f64; 4]>> {
        let k = self.ln_m_inc.len();
        if self.ln_n_inc.len() != k || self.ln_a.len() + 1 != k || self.ln_b.len() + 1 != k {
            return Err(Error::InvalidParameter("inconsistent ABMN array lengths".into()));
        }
        let (kap, rho) = (self.kappa, self.rho);
        let ln_kr = (kap * rho).ln();
        let ln2 = std::f64::consts::LN_2;
        let mut out = Vec::with_capacity(k.saturating_sub(1));
        for j in 1..k {
            let (la, lb) = (self.ln_a[j - 1], self.ln_b[j - 1]);
            let (pa, pb) = lottery_weights(rho, la, lb);
            let cm = (1.0 - kap) + 2.0 * kap * pb;
            let cp = (1.0 - kap) + 2.0 * kap * pa;
            let big_m = log_add_exp(self.ln_m_inc[j - 1], self.ln_m_inc[j]);
            let big_n = log_add_exp(self.ln_n_inc[j - 1], self.ln_n_inc[j]);
            let r1 = log_rel_residual(ln2 + log_add_exp(self.ln_m_inc[j - 1], la), cp.ln() + big_m);
            let r2 = log_rel_residual(ln2 + log_add_exp(self.ln_n_inc[j], lb), cm.ln() + big_n);
            let lhs = 2.0 * log_add_exp(rho * la, rho * lb);
            let r3 = log_rel_residual(lhs, ln_kr + (rho - 1.0) * la + rho * lb + big_m);
            let r4 = log_rel_residual(lhs, ln_kr + rho * la + (rho - 1.0) * lb + big_n);
            out.push([r1, r2, r3, r4]);
        }
        Ok(out)
    }
}

/// Per-site residuals of the ABMN equations at the window's interior sites.
pub fn abmn_residuals(w: &AbmnWindow) -> Result<Vec<SiteResidual>> {
    Ok(w.arrays()
        .residuals()?
        .into_iter()
        .enumerate()
        .map(|(j, eq)| SiteResidual { index: w.lo + 1 + j as i64, eq })
        .collect())
}

/// Relative residuals of the first two equations written with the stored values
/// `m_i`, `n_i` as they stand. These lose precision wherever the values are
/// dominated by distant increments or underflow; see [`abmn_residuals`].
pub fn abmn_value_residuals(w: &AbmnWindow) -> Vec<SiteResidual> {
    let (kap, rho) = (w.params.kappa, w.params.rho);
    (w.lo + 1..w.hi)
        .map(|i| {
            let (la, lb) = (w.ln_a_at(i).unwrap_or(0.0), w.ln_b_at(i).unwrap_or(0.0));
            let (pa, pb) = lottery_weights(rho, la, lb);
            let cm = (1.0 - kap) + 2.0 * kap * pb;
            let cp = (1.0 - kap) + 2.0 * kap * pa;
            let m = |i: i64| w.m_at(i).unwrap_or(f64::NAN);
            let n = |i: i64| w.n_at(i).unwrap_or(f64::NAN);
            let r1 = rel_residual(2.0 * (m(i) + la.exp()), cm * m(i - 1) + cp * m(i + 1));
            let r2 = rel_residual(2.0 * (n(i) + lb.exp()), cm * n(i - 1) + cp * n(i + 1));
            SiteResidual { index: i, eq: [r1, r2, 0.0, 0.0] }
        })
        .collect()
}

/// Unique `k` with `s_k(x)` in the central domain.
pub fn battlefield_index(p: &GameParams, x: f64) -> Result<i64> {
    let p = p.validated()?;
    check_positive("x", x)?;
    let d = p.central_domain()?;
    let mut cur = x;
    let mut k = 0i64;
    const MAX_STEPS: i64 = 10_000_000;
    while !d.contains(cur) {
        if k.abs() > MAX_STEPS {
            return Err(Error::NonConvergence(format!("orbit of {x} did not reach the central domain")));
        }
        // `s` maps `hi` to `lo`, so an orbit starting within rounding of the closed end
        // `hi` can step straight across the domain; such a point counts as `hi`.
        if cur > d.hi {
            let next = crate::phimaps::s_map(&p, cur)?;
            if next <= d.lo {
                return Ok(k);
            }
            cur = next;
            k += 1;
        } else {
            let prev = crate::phimaps::s_inverse(&p, cur)?;
            k -= 1;
            if prev > d.hi {
                return Ok(k);
            }
            cur = prev;
        }
    }
    Ok(k)
}

/// Mina margin with its tail bound and the window that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginValue {
    pub value: f64,
    /// Bound on the relative contribution of indices outside the final window.
    pub tail_bound: f64,
    pub half_len: usize,
    pub battlefield: i64,
}

/// Smallest half-length of the windows used for margins.
pub const MIN_HALF_LEN: i64 = 64;

/// Mina margin `M(x) = n_{-inf} / m_{+inf}` of the default solution, with the window
/// centred on the battlefield index and doubled until the relative tail is below `rel_tol`.
pub fn mina_margin(p: &GameParams, x: f64, rel_tol: f64) -> Result<MarginValue> {
    let p = p.validated()?;
    check_positive("rel_tol", rel_tol)?;
    let k = battlefield_index(&p, x)?;
    let mut half = MIN_HALF_LEN;
    loop {
        let w = default_solution_on(&p, x, (k - half).min(-1), (k + half).max(1))?;
        let tail = w.relative_tail();
        if tail < rel_tol {
            let ln_v = w.n_neg_inf_total.ln() - w.m_inf_total.ln();
            return Ok(MarginValue { value: ln_v.exp(), tail_bound: tail, half_len: half as usize, battlefield: k });
        }
        if half >= 1 << 20 {
            return Err(Error::NonConvergence(format!("tail bound {tail} above {rel_tol} at x = {x}")));
        }
        half *= 2;
    }
}

/// Supremum of the Mina margin over the central domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    pub params: GameParams,
    pub value: f64,
    pub argmax: f64,
    /// Largest tail bound among the margins evaluated.
    pub tail_bound: f64,
    /// `(x, M(x))` on the log-uniform mesh.
    pub mesh: Vec<(f64, f64)>,
}

/// Maximises `M` over a log-uniform mesh of the central domain, then refines the
/// best cell by golden section search in `ln x`.
pub fn lambda_max(p: &GameParams, mesh: usize, tol: f64) -> Result<LambdaMax> {
    let p = p.validated()?;
    check_positive("tol", tol)?;
    if mesh < 2 {
        return Err(Error::InvalidParameter("mesh must have at least two points".into()));
    }
    let d = p.central_domain()?;
    let (l0, l1) = (d.lo.ln(), d.hi.ln());
    let xs: Vec<f64> = (1..=mesh).map(|j| (l0 + (l1 - l0) * j as f64 / mesh as f64).exp()).collect();
    let vals: Vec<MarginValue> = xs.par_iter().map(|&x| mina_margin(&p, x, tol)).collect::<Result<_>>()?;
    let mut tail = vals.iter().map(|v| v.tail_bound).fold(0.0, f64::max);
    let (best, _) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("non-empty mesh");
    let cell = (l1 - l0) / mesh as f64;
    let ln_best = xs[best].ln();
    let a = (ln_best - cell).max(l0 + 1e-12 * cell);
    let b = (ln_best + cell).min(l1);
    let mut err: Option<Error> = None;
    let (ln_arg, mut value) = golden_max(
        |lx| match mina_margin(&p, lx.exp(), tol) {
            Ok(v) => {
                tail = tail.max(v.tail_bound);
                v.value
            }
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        },
        a,
        b,
        1e-10,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let mut argmax = ln_arg.exp();
    if vals[best].value > value {
        value = vals[best].value;
        argmax = xs[best];
    }
    Ok(LambdaMax {
        params: p,
        value,
        argmax,
        tail_bound: tail,
        mesh: xs.into_iter().zip(vals.into_iter().map(|v| v.value)).collect(),
    })
}

/// Finite-window margin `n_{k,-j} / m_{-j,k}` built from the default increments with
/// indices `-j..k`.
pub fn finite_margin(p: &GameParams, x: f64, j: usize, k: usize) -> Result<f64> {
    let p = p.validated()?;
    check_positive("x", x)?;
    if j < 1 || k < 1 {
        return Err(Error::InvalidParameter("finite margin needs j >= 1 and k >= 1".into()));
    }
    let orbit = shift_orbit(&p, x, 1 - j as i64, k as i64 - 1, DEFAULT_TOL)?;
    if orbit.truncated_left || orbit.truncated_right {
        return Err(Error::Range(format!("orbit of {x} leaves the floating range inside the window")));
    }
    // The increment helper never reads the end points of the orbit it is given, so
    // padding by one copy on each side yields exactly the increments -j..k.
    let mut padded = orbit.clone();
    padded.lo -= 1;
    padded.hi += 1;
    padded.points.insert(0, orbit.points[0]);
    padded.points.push(*orbit.points.last().expect("orbit"));
    let (lm, ln) = log_increments(&p, x, &padded);
    Ok((ln_sum(&ln) - ln_sum(&lm)).exp())
}

/// Roots of `finite_margin(x) - 1` in `(x_lo, x_hi]`, located by sign changes on a
/// log-uniform mesh and refined by Brent's method.
pub fn margin_roots(p: &GameParams, j: usize, k: usize, x_lo: f64, x_hi: f64, mesh: usize) -> Result<Vec<f64>> {
    let p = p.validated()?;
    check_positive("x_lo", x_lo)?;
    check_positive("x_hi", x_hi)?;
    if x_hi <= x_lo || mesh < 2 {
        return Err(Error::InvalidParameter("need x_lo < x_hi and mesh >= 2".into()));
    }
    let (l0, l1) = (x_lo.ln(), x_hi.ln());
    let lxs: Vec<f64> = (1..=mesh).map(|i| l0 + (l1 - l0) * i as f64 / mesh as f64).collect();
    let g = |lx: f64| finite_margin(&p, lx.exp(), j, k).map(|v| v.ln());
    let vals: Vec<f64> = lxs.par_iter().map(|&lx| g(lx)).collect::<Result<_>>()?;
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..mesh {
        if vals[i] == 0.0 {
            roots.push(lxs[i].exp());
            continue;
        }
        if i + 1 < mesh && vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
            let mut failure = None;
            let r = brent(
                |lx| match g(lx) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                lxs[i],
                lxs[i + 1],
                vals[i],
                vals[i + 1],
                1e-14,
                200,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            roots.push(r?.exp());
        }
    }
    roots.dedup_by(|a, b| ((*a - *b) / *b).abs() < 1e-9);
    Ok(roots)
}

/// Left-tail decay of a window with the battlefield at index 0, against the
/// predicted laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// Fitted slope of `ln m_{-i-1,-i} - zeta ln i` in `i`.
    pub rate: f64,
    /// `ln((1 - kappa) / (1 + kappa))`.
    pub rate_theory: f64,
    /// Power `zeta = (1 - rho) / (2 rho^2)` removed before fitting.
    pub zeta: f64,
    /// Predicted `n/m` ratio at `i_max`: `(8 rho^2 kappa / (1 - kappa^2))^(1/rho) i^(1/rho)`,
    /// which is `8 kappa i / (1 - kappa^2)` at `rho = 1`.
    pub predicted_ratio: f64,
    /// `n_{-i,-i-1} / m_{-i-1,-i}` over the prediction at `i = i_max`.
    pub tail_ratio: f64,
    /// `b_{-i} / a_{-i}` over the prediction at `i = i_max`.
    pub stake_ratio: f64,
    pub i_min: i64,
    pub i_max: i64,
}

/// Fits the left-tail decay of a window built with the battlefield at index 0.
///
/// Requires `kappa < 1`, `rho <= 1` and at least 50 tail indices in `i_min..=i_max`.
pub fn asymptotic_fit(w: &AbmnWindow, i_min: i64, i_max: i64) -> Result<AsymptoticFit> {
    let p = w.params;
    p.require(Regime::Sublinear)?;
    if w.battlefield() != Some(0) {
        return Err(Error::InvalidParameter("battlefield index must be 0".into()));
    }
    if i_min < 1 || i_max - i_min < 50 || -(i_max + 1) < w.lo {
        return Err(Error::InsufficientData(format!(
            "need 50 tail indices inside the window (lo = {}, requested {i_min}..={i_max})",
            w.lo
        )));
    }
    let (kap, rho) = (p.kappa, p.rho);
    let zeta = (1.0 - rho) / (2.0 * rho * rho);
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for i in i_min..=i_max {
        let lm = w.ln_m_inc_at(-i - 1).expect("checked window");
        rows.push(vec![1.0, i as f64]);
        ys.push(lm - zeta * (i as f64).ln());
    }
    let coef = least_squares(&rows, &ys)?;
    let predicted = (8.0 * rho * rho * kap / (1.0 - kap * kap) * (i_max as f64)).powf(1.0 / rho);
    let j = -i_max - 1;
    let inc = (w.ln_n_inc_at(j).expect("window") - w.ln_m_inc_at(j).expect("window")).exp();
    let stake = (w.ln_b_at(-i_max).expect("window") - w.ln_a_at(-i_max).expect("window")).exp();
    Ok(AsymptoticFit {
        rate: coef[1],
        rate_theory: ((1.0 - kap) / (1.0 + kap)).ln(),
        zeta,
        predicted_ratio: predicted,
        tail_ratio: inc / predicted,
        stake_ratio: stake / predicted,
        i_min,
        i_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: f64, r: f64) -> GameParams {
        GameParams::new(k, r).unwrap()
    }

    #[test]
    fn unit_corner_increments() {
        let w = default_solution(&p(1.0, 1.0), 3.0, 5).unwrap();
        assert!((w.ln_m_inc_at(-1).unwrap().exp() - 1.0).abs() < 1e-14);
        assert!((w.ln_m_inc_at(0).unwrap().exp() - 3.0).abs() < 1e-11);
        assert!((w.ln_n_inc_at(-1).unwrap().exp() - 3.0).abs() < 1e-14);
        assert!((w.ln_n_inc_at(0).unwrap().exp() - 1.0).abs() < 1e-11);
        assert!((w.a_at(0).unwrap() - 1.0).abs() < 1e-11);
        assert!((w.b_at(0).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn window_validation() {
        assert!(default_solution(&p(0.5, 1.0), 0.0, 5).is_err());
        assert!(default_solution(&p(0.5, 1.0), 1.0, 0).is_err());
        assert!(default_solution_on(&p(0.5, 1.0), 1.0, 0, 3).is_err());
    }

    #[test]
    fn standard_solution_normalised() {
        let w = standard_solution(&p(0.5, 1.0), 1.2, 80).unwrap();
        assert!((w.m_inf_total - 1.0).abs() < 1e-12);
        assert!(w.m[0] >= 0.0 && *w.m.last().unwrap() <= 1.0 + 1e-12);
        assert!(w.n.last().unwrap().abs() < 1e-10);
    }

    #[test]
    fn residuals_are_small() {
        for &(k, r, x) in &[(1.0, 1.0, 3.0), (0.5, 0.5, 1.3), (0.2, 1.5, 0.7), (0.9, 1.0, 40.0)] {
            let w = default_solution(&p(k, r), x, 40).unwrap();
            for s in abmn_residuals(&w).unwrap() {
                assert!(s.max() < 1e-10, "{k} {r} {x} {s:?}");
            }
            let core = w.lo + 6..w.hi - 5;
            for s in abmn_value_residuals(&w).into_iter().filter(|s| core.contains(&s.index)) {
                assert!(s.max() < 1e-9, "{k} {r} {x} {s:?}");
            }
        }
    }

    #[test]
    fn perturbed_stake_is_detected() {
        let mut w = default_solution(&p(1.0, 1.0), 3.0, 5).unwrap();
        let j = (0 - w.lo - 1) as usize;
        w.ln_a[j] += 1.01f64.ln();
        w.a[j] *= 1.01;
        let r = abmn_residuals(&w).unwrap();
        let site = r.iter().find(|s| s.index == 0).unwrap();
        assert!(site.max() > 1e-3);
    }

    #[test]
    fn battlefield_indices() {
        let pp = p(0.5, 1.0);
        let x0 = 1.2;
        assert_eq!(battlefield_index(&pp, x0).unwrap(), 0);
        let mut x = x0;
        for _ in 0..3 {
            x = crate::phimaps::s_inverse(&pp, x).unwrap();
        }
        assert_eq!(battlefield_index(&pp, x).unwrap(), 3);
        let y = crate::phimaps::s_map(&pp, crate::phimaps::s_map(&pp, x0).unwrap()).unwrap();
        assert_eq!(battlefield_index(&pp, y).unwrap(), -2);
    }

    #[test]
    fn margin_at_one_and_reciprocal() {
        let pp = p(0.7, 0.8);
        assert!((mina_margin(&pp, 1.0, 1e-13).unwrap().value - 1.0).abs() < 1e-12);
        let a = mina_margin(&pp, 1.7, 1e-13).unwrap().value;
        let b = mina_margin(&pp, 1.0 / 1.7, 1e-13).unwrap().value;
        assert!((a * b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_margin_symmetric_at_one() {
        // At x = 1 the reflection pairs increment l with -2 - l, so sites -(k+1)..=k are symmetric.
        assert!((finite_margin(&p(0.9, 1.0), 1.0, 10, 9).unwrap() - 1.0).abs() < 1e-14);
        assert!((finite_margin(&p(0.9, 1.0), 1.0, 9, 9).unwrap() - 1.0).abs() < 1e-8);
        assert!(finite_margin(&p(0.9, 1.0), 1.0, 0, 9).is_err());
    }

    #[test]
    fn tail_asymptotics_at_rho_one() {
        let w = default_solution(&p(0.5, 1.0), 1.0, 260).unwrap();
        let f = asymptotic_fit(&w, 150, 200).unwrap();
        assert!((f.tail_ratio - 1.0).abs() < 0.1, "{f:?}");
        assert!((f.stake_ratio - 1.0).abs() < 0.1, "{f:?}");
        assert!((f.rate / f.rate_theory - 1.0).abs() < 0.01, "{f:?}");
        assert!(matches!(asymptotic_fit(&w, 150, 180), Err(Error::InsufficientData(_))));
        let unit = default_solution(&p(1.0, 0.5), 1.0, 260).unwrap();
        assert!(asymptotic_fit(&unit, 150, 200).is_err());
    }
}
