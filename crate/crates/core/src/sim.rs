//! Monte Carlo play of the game, Penny Forfeit, one-step deviation checks and the
//! scaled-drift diffusion.
//!
//! Random streams come from ChaCha8 seeded with `seed` and switched to stream number
//! `path_index`, so each path's draws depend only on `(seed, path_index)` and results
//! do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abmn::{default_solution_on, AbmnWindow};
use crate::bboost::{flow, ode_pair};
use crate::error::{Error, Result};
use crate::numeric::log_add_exp;
use crate::params::{check_finite, check_positive, GameParams};

/// Generator for one simulated path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Stakes `(a_i, b_i)` by site, held constant beyond the tabulated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeProfile {
    /// Site of the first tabulated entry.
    pub first: i64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl StakeProfile {
    pub fn from_window(w: &AbmnWindow) -> Self {
        Self { first: w.lo + 1, a: w.a.clone(), b: w.b.clone() }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        Self { first: 0, a: vec![a], b: vec![b] }
    }

    pub fn stakes(&self, site: i64) -> (f64, f64) {
        let last = self.a.len() as i64 - 1;
        let j = (site - self.first).clamp(0, last) as usize;
        (self.a[j], self.b[j])
    }

    /// Probability that the counter moves right from `site`.
    pub fn right_probability(&self, p: &GameParams, site: i64) -> f64 {
        let (a, b) = self.stakes(site);
        p.kappa * stake_win_probability(p.rho, a, b) + 0.5 * (1.0 - p.kappa)
    }
}

/// Maxine's chance in the stake lottery, `a^rho / (a^rho + b^rho)`, fair when both are zero.
pub fn stake_win_probability(rho: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.5
    } else if a == 0.0 {
        0.0
    } else if b == 0.0 {
        1.0
    } else {
        1.0 / (1.0 + (rho * (b.ln() - a.ln())).exp())
    }
}

/// Payments made when the game ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalPayments {
    /// Maxine's and Mina's receipts when Maxine wins.
    pub m_inf: f64,
    pub n_inf: f64,
    /// Receipts when Mina wins.
    pub m_neg_inf: f64,
    pub n_neg_inf: f64,
    /// Receipts when the game is unfinished.
    pub m_star: f64,
    pub n_star: f64,
}

impl TerminalPayments {
    /// Boundary data of a window: `m_{+inf}`, `n_{+inf}`, `m_{-inf}`, `n_{-inf}` with
    /// unfinished games paying one unit less than the worse end to each player.
    pub fn from_window(w: &AbmnWindow) -> Self {
        let m_neg = 0.0;
        let n_pos = 0.0;
        Self {
            m_inf: w.m_inf_total,
            n_inf: n_pos,
            m_neg_inf: m_neg,
            n_neg_inf: w.n_neg_inf_total,
            m_star: m_neg - 1.0,
            n_star: n_pos - 1.0,
        }
    }
}

/// Settings for simulating one game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: GameParams,
    pub start: i64,
    /// Site regarded as the battlefield; escape is measured from here.
    pub center: i64,
    pub escape_radius: i64,
    pub max_turns: u64,
    pub terminal: TerminalPayments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finish {
    /// The counter escaped to the right.
    Maxine,
    /// The counter escaped to the left.
    Mina,
    Unfinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub finish: Finish,
    pub turns: u64,
    pub final_site: i64,
    pub cost_plus: f64,
    pub cost_minus: f64,
    /// `P+ = T+ - C+`.
    pub payoff_plus: f64,
    /// `P- = T- - C-`.
    pub payoff_minus: f64,
}

fn validate_config(cfg: &SimConfig) -> Result<()> {
    cfg.params.validated()?;
    if cfg.escape_radius < 1 {
        return Err(Error::InvalidParameter("escape radius must be at least 1".into()));
    }
    if (cfg.start - cfg.center).abs() >= cfg.escape_radius {
        return Err(Error::InvalidParameter("start lies outside the escape radius".into()));
    }
    Ok(())
}

/// Plays one game: every turn both players pay their stakes; with probability `kappa`
/// the stake lottery decides the move, otherwise a fair coin does.
pub fn play_tlp<R: Rng>(cfg: &SimConfig, profile: &StakeProfile, rng: &mut R) -> Result<GameOutcome> {
    validate_config(cfg)?;
    let p = cfg.params;
    let mut site = cfg.start;
    let (mut cp, mut cm) = (0.0, 0.0);
    let mut turns = 0;
    let finish = loop {
        if site - cfg.center >= cfg.escape_radius {
            break Finish::Maxine;
        }
        if cfg.center - site >= cfg.escape_radius {
            break Finish::Mina;
        }
        if turns >= cfg.max_turns {
            break Finish::Unfinished;
        }
        let (a, b) = profile.stakes(site);
        cp += a;
        cm += b;
        let heads = if rng.random::<f64>() < p.kappa {
            rng.random::<f64>() < stake_win_probability(p.rho, a, b)
        } else {
            rng.random::<f64>() < 0.5
        };
        site += if heads { 1 } else { -1 };
        turns += 1;
    };
    let t = cfg.terminal;
    let (tp, tm) = match finish {
        Finish::Maxine => (t.m_inf, t.n_inf),
        Finish::Mina => (t.m_neg_inf, t.n_neg_inf),
        Finish::Unfinished => (t.m_star, t.n_star),
    };
    Ok(GameOutcome {
        finish,
        turns,
        final_site: site,
        cost_plus: cp,
        cost_minus: cm,
        payoff_plus: tp - cp,
        payoff_minus: tm - cm,
    })
}

/// Sample means over many games.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlpSummary {
    pub paths: u64,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub stderr_plus: f64,
    pub stderr_minus: f64,
    pub maxine_wins: u64,
    pub mina_wins: u64,
    pub unfinished: u64,
    pub mean_turns: f64,
}

/// Plays `paths` independent games in parallel; path `k` uses `path_rng(seed, k)` and
/// the reduction runs in path order.
pub fn run_tlp(cfg: &SimConfig, profile: &StakeProfile, paths: u64, seed: u64) -> Result<TlpSummary> {
    validate_config(cfg)?;
    if paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let outcomes: Vec<GameOutcome> = (0..paths)
        .into_par_iter()
        .map(|k| play_tlp(cfg, profile, &mut path_rng(seed, k)))
        .collect::<Result<_>>()?;
    let n = paths as f64;
    let mean = |f: &dyn Fn(&GameOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
    let mp = mean(&|o| o.payoff_plus);
    let mm = mean(&|o| o.payoff_minus);
    let vp = outcomes.iter().map(|o| (o.payoff_plus - mp).powi(2)).sum::<f64>() / (n - 1.0);
    let vm = outcomes.iter().map(|o| (o.payoff_minus - mm).powi(2)).sum::<f64>() / (n - 1.0);
    let count = |f: Finish| outcomes.iter().filter(|o| o.finish == f).count() as u64;
    Ok(TlpSummary {
        paths,
        mean_plus: mp,
        mean_minus: mm,
        stderr_plus: (vp / n).sqrt(),
        stderr_minus: (vm / n).sqrt(),
        maxine_wins: count(Finish::Maxine),
        mina_wins: count(Finish::Mina),
        unfinished: count(Finish::Unfinished),
        mean_turns: mean(&|o| o.turns as f64),
    })
}

/// Equilibrium of the one-turn Penny Forfeit game with prize gaps `M` and `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PennyForfeit {
    pub a: f64,
    pub b: f64,
    /// Whether the stakes are known to be global best responses (`rho <= 1`).
    pub global_max: bool,
}

/// `(a, b) = kappa rho (M^(1+rho) N^rho, M^rho N^(1+rho)) / (M^rho + N^rho)^2`.
pub fn penny_forfeit(p: &GameParams, big_m: f64, big_n: f64) -> Result<PennyForfeit> {
    let p = p.validated()?;
    check_positive("M", big_m)?;
    check_positive("N", big_n)?;
    let (rho, lm, ln) = (p.rho, big_m.ln(), big_n.ln());
    let den = 2.0 * log_add_exp(rho * lm, rho * ln);
    let base = (p.kappa * rho).ln();
    Ok(PennyForfeit {
        a: (base + (1.0 + rho) * lm + rho * ln - den).exp(),
        b: (base + rho * lm + (1.0 + rho) * ln - den).exp(),
        global_max: rho <= 1.0,
    })
}

/// Maxine's expected gain over `m_{-1}` from staking `z` against `b`, with gap `M`.
pub fn forfeit_value_plus(p: &GameParams, big_m: f64, z: f64, b: f64) -> f64 {
    (p.kappa * stake_win_probability(p.rho, z, b) + 0.5 * (1.0 - p.kappa)) * big_m - z
}

/// Best responses on the uniform grid `k * kappa * M / grid` (resp. `N`), `k = 0..=grid`,
/// each against the other player's closed-form stake.
pub fn penny_forfeit_grid(p: &GameParams, big_m: f64, big_n: f64, grid: usize) -> Result<(f64, f64)> {
    let eq = penny_forfeit(p, big_m, big_n)?;
    if grid < 2 {
        return Err(Error::InvalidParameter("grid needs at least two cells".into()));
    }
    let best = |gap: f64, other: f64| {
        (0..=grid)
            .map(|k| p.kappa * gap * k as f64 / grid as f64)
            .map(|z| (z, forfeit_value_plus(p, gap, z, other)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|v| v.0)
            .unwrap_or(0.0)
    };
    Ok((best(big_m, eq.b), best(big_n, eq.a)))
}

/// Outcome of testing unilateral stake deviations at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    pub index: i64,
    /// Best grid value minus the value at the equilibrium stake, in units of that stake.
    pub maxine_gain: f64,
    pub mina_gain: f64,
    /// Distance of the grid maximiser from the equilibrium stake, in grid cells.
    pub maxine_offset_cells: f64,
    pub mina_offset_cells: f64,
    /// Loss from doubling the stake, in units of the stake (positive when doubling hurts).
    pub maxine_doubling_loss: f64,
    pub mina_doubling_loss: f64,
    /// Whether the one-step value varies over the grid by more than [`RESOLUTION_FLOOR`].
    pub maxine_resolved: bool,
    pub mina_resolved: bool,
    /// `|value(a_i) - m_i| / M_i`.
    pub maxine_value_error: f64,
    /// `|value(b_i) - n_i| / N_i`.
    pub mina_value_error: f64,
}

/// One-step value of staking `t s` minus that of staking `s`, in units of `s`, when the
/// opponent stakes `q s` and the prize gap is `G`:
/// `A q^rho (t^rho - 1) / ((t^rho + q^rho)(1 + q^rho)) - (t - 1)` with `A = kappa G / s`.
/// The factored form avoids subtracting two values of size `A`, which can be huge.
fn scaled_gain(p: &GameParams, ln_gap_over_s: f64, ln_q: f64, t: f64) -> f64 {
    let rho = p.rho;
    let rq = rho * ln_q;
    let ln_a = p.kappa.ln() + ln_gap_over_s;
    let lottery = if t == 0.0 {
        -(ln_a - log_add_exp(0.0, rq)).exp()
    } else {
        let rt = rho * t.ln();
        let e = rt.exp_m1();
        e.signum() * (ln_a + rq + e.abs().ln() - log_add_exp(rt, rq) - log_add_exp(0.0, rq)).exp()
    };
    lottery - (t - 1.0)
}

/// Landscapes whose largest deviation from the value at the equilibrium stake is below
/// this (in units of the stake) are flat to rounding, and their grid argmax carries no
/// information.
pub const RESOLUTION_FLOOR: f64 = 1e-9;

/// Scans stakes `t * a_i` for `t = 2k / grid`, `k = 0..=grid` (and likewise for Mina),
/// holding the opponent's stake fixed.
pub fn deviation_gap(w: &AbmnWindow, i: i64, grid: usize) -> Result<DeviationGap> {
    if grid < 2 || grid % 2 != 0 {
        return Err(Error::InvalidParameter("grid must be an even number of cells".into()));
    }
    let (la, lb) = match (w.ln_a_at(i), w.ln_b_at(i)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidParameter(format!("site {i} is not interior to the window"))),
    };
    let p = w.params;
    let (lmp, lmc) = (w.ln_m_inc_at(i - 1).expect("interior"), w.ln_m_inc_at(i).expect("interior"));
    let (lnp, lnc) = (w.ln_n_inc_at(i - 1).expect("interior"), w.ln_n_inc_at(i).expect("interior"));
    let big_m = log_add_exp(lmp, lmc);
    let big_n = log_add_exp(lnp, lnc);
    let cell = 2.0 / grid as f64;
    let scan = |ln_gap_over_s: f64, ln_q: f64| {
        let vals: Vec<f64> = (0..=grid).map(|k| scaled_gain(&p, ln_gap_over_s, ln_q, k as f64 * cell)).collect();
        let (k_best, v_best) =
            vals.iter().cloned().enumerate().max_by(|x, y| x.1.total_cmp(&y.1)).expect("non-empty grid");
        let spread = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (v_best, ((k_best as f64 * cell) - 1.0).abs() / cell, -vals[grid], spread > RESOLUTION_FLOOR)
    };
    let (gp, op, dp, rp) = scan(big_m - la, lb - la);
    let (gm, om, dm, rm) = scan(big_n - lb, la - lb);
    let pa = stake_win_probability(p.rho, la.exp(), lb.exp());
    let pb = stake_win_probability(p.rho, lb.exp(), la.exp());
    let half = 0.5 * (1.0 - p.kappa);
    // value(a_i) - m_i = (kappa pa + half) M_i - a_i - m_{i-1,i}
    let vp = (p.kappa * pa + half) - (la - big_m).exp() - (lmp - big_m).exp();
    let vm = (p.kappa * pb + half) - (lb - big_n).exp() - (lnc - big_n).exp();
    Ok(DeviationGap {
        index: i,
        maxine_gain: gp,
        mina_gain: gm,
        maxine_offset_cells: op,
        mina_offset_cells: om,
        maxine_doubling_loss: dp,
        mina_doubling_loss: dm,
        maxine_resolved: rp,
        mina_resolved: rm,
        maxine_value_error: vp.abs(),
        mina_value_error: vm.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftKind {
    /// Drift `(1 - J) / (1 + J)` with `J = S_rho(1, z)^rho`.
    Equilibrium,
    Zero,
}

/// Euler-Maruyama settings for `dZ = R(Z) dt + dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub rho: f64,
    pub z0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: u64,
    pub seed: u64,
    pub drift: DriftKind,
    /// Negate every Gaussian increment.
    pub antithetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeSummary {
    pub times: Vec<f64>,
    pub mean_path: Vec<f64>,
    pub final_values: Vec<f64>,
    /// `(E Z_T - z0) / T`.
    pub mean_slope: f64,
    /// Pooled sample variance of the increments divided by `dt`.
    pub increment_variance_per_dt: f64,
}

fn sde_steps(cfg: &SdeConfig) -> Result<usize> {
    check_positive("rho", cfg.rho)?;
    check_finite("z0", cfg.z0)?;
    check_positive("horizon", cfg.horizon)?;
    check_positive("dt", cfg.dt)?;
    if cfg.paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    Ok((cfg.horizon / cfg.dt).round().max(1.0) as usize)
}

/// One path `Z_0, Z_dt, ...` and its Gaussian increments.
pub fn sde_path(cfg: &SdeConfig, path_index: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = sde_steps(cfg)?;
    let mut rng = path_rng(cfg.seed, path_index);
    let sq = cfg.dt.sqrt();
    let sign = if cfg.antithetic { -1.0 } else { 1.0 };
    let mut z = cfg.z0;
    let mut path = Vec::with_capacity(steps + 1);
    let mut noise = Vec::with_capacity(steps);
    path.push(z);
    for _ in 0..steps {
        let r = match cfg.drift {
            DriftKind::Equilibrium => crate::bboost::drift(cfg.rho, z)?,
            DriftKind::Zero => 0.0,
        };
        let dw = sign * sq * rng.sample::<f64, _>(StandardNormal);
        z += r * cfg.dt + dw;
        noise.push(dw);
        path.push(z);
    }
    Ok((path, noise))
}

/// Simulates all paths in parallel and reduces in path order.
pub fn simulate_sde(cfg: &SdeConfig) -> Result<SdeSummary> {
    let steps = sde_steps(cfg)?;
    let paths: Vec<Vec<f64>> =
        (0..cfg.paths).into_par_iter().map(|k| sde_path(cfg, k).map(|v| v.0)).collect::<Result<_>>()?;
    let n = cfg.paths as f64;
    let mut mean_path = vec![0.0; steps + 1];
    for path in &paths {
        for (m, z) in mean_path.iter_mut().zip(path) {
            *m += z / n;
        }
    }
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for path in &paths {
        for w in path.windows(2) {
            let d = w[1] - w[0];
            s1 += d;
            s2 += d * d;
        }
    }
    let count = n * steps as f64;
    let var = (s2 - s1 * s1 / count) / (count - 1.0);
    let horizon = steps as f64 * cfg.dt;
    Ok(SdeSummary {
        times: (0..=steps).map(|k| k as f64 * cfg.dt).collect(),
        mean_slope: (mean_path[steps] - cfg.z0) / horizon,
        final_values: paths.iter().map(|p| p[steps]).collect(),
        mean_path,
        increment_variance_per_dt: var / cfg.dt,
    })
}

/// Discrete quantities at site `floor(u / kappa)` against their continuum limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRow {
    pub kappa: f64,
    pub u: f64,
    pub index: i64,
    /// `kappa^-1 (2 p_i - 1)`.
    pub drift_discrete: f64,
    /// `(1 - S^rho) / (1 + S^rho)` at `S = S_rho(x, u)`.
    pub drift_continuum: f64,
    /// `kappa^-2 a_i` and `kappa^-2 b_i`.
    pub a_discrete: f64,
    pub b_discrete: f64,
    pub a_continuum: f64,
    pub b_continuum: f64,
}

impl ScaledRow {
    pub fn drift_error(&self) -> f64 {
        (self.drift_discrete - self.drift_continuum).abs()
    }

    pub fn a_error(&self) -> f64 {
        (self.a_discrete - self.a_continuum).abs()
    }

    pub fn b_error(&self) -> f64 {
        (self.b_discrete - self.b_continuum).abs()
    }
}

/// `floor(v)` that treats values within `1e-9` of an integer as that integer.
pub fn robust_floor(v: f64) -> i64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r as i64
    } else {
        v.floor() as i64
    }
}

/// Compares default windows at each `kappa` (battlefield at index 0) with the
/// Brownian Boost drift and stakes at the points `u`.
pub fn scaled_drift_check(rho: f64, x: f64, kappas: &[f64], us: &[f64]) -> Result<Vec<ScaledRow>> {
    check_positive("rho", rho)?;
    let mut rows = Vec::new();
    for &kappa in kappas {
        let p = GameParams::new(kappa, rho)?;
        let idx: Vec<i64> = us.iter().map(|&u| robust_floor(u / kappa)).collect();
        let lo = idx.iter().cloned().min().unwrap_or(0).min(0) - 2;
        let hi = idx.iter().cloned().max().unwrap_or(0).max(0) + 2;
        let w = default_solution_on(&p, x, lo, hi)?;
        if w.battlefield() != Some(0) {
            return Err(Error::InvalidParameter(format!("x = {x} is not in the central domain")));
        }
        for (&u, &i) in us.iter().zip(&idx) {
            let (la, lb) = (w.ln_a_at(i).expect("window"), w.ln_b_at(i).expect("window"));
            let cont = ode_pair(rho, x, u, 1e-12)?;
            let j = flow(rho, x, u)?.j;
            let k2 = 2.0 * kappa.ln();
            rows.push(ScaledRow {
                kappa,
                u,
                index: i,
                drift_discrete: (0.5 * rho * (la - lb)).tanh(),
                drift_continuum: (1.0 - j) / (1.0 + j),
                a_discrete: (la - k2).exp(),
                b_discrete: (lb - k2).exp(),
                a_continuum: cont.a,
                b_continuum: cont.b,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stake_probabilities() {
        assert_eq!(stake_win_probability(1.0, 0.0, 0.0), 0.5);
        assert_eq!(stake_win_probability(1.0, 1.0, 0.0), 1.0);
        assert!((stake_win_probability(2.0, 1.0, 2.0) - 0.2).abs() < 1e-15);
        let p = GameParams::new(0.4, 1.0).unwrap();
        let prof = StakeProfile::constant(1.0, 0.0);
        assert!((prof.right_probability(&p, 7) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn penny_forfeit_unit_case() {
        let p = GameParams::new(1.0, 1.0).unwrap();
        let e = penny_forfeit(&p, 4.0, 4.0).unwrap();
        assert!((e.a - 1.0).abs() < 1e-15 && (e.b - 1.0).abs() < 1e-15);
        assert!(e.global_max);
        assert!(!penny_forfeit(&GameParams::new(0.2, 2.0).unwrap(), 1.0, 1.0).unwrap().global_max);
        assert!(penny_forfeit(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn robust_floor_handles_representation_error() {
        assert_eq!(robust_floor(-1.0 / 0.1), -10);
        assert_eq!(robust_floor(0.5 / 0.1), 5);
        assert_eq!(robust_floor(2.7), 2);
        assert_eq!(robust_floor(-2.3), -3);
    }

    #[test]
    fn config_validation() {
        let p = GameParams::new(0.5, 1.0).unwrap();
        let t = TerminalPayments { m_inf: 1.0, n_inf: 0.0, m_neg_inf: 0.0, n_neg_inf: 1.0, m_star: -1.0, n_star: -1.0 };
        let cfg = SimConfig { params: p, start: 10, center: 0, escape_radius: 5, max_turns: 10, terminal: t };
        let prof = StakeProfile::constant(0.0, 0.0);
        assert!(play_tlp(&cfg, &prof, &mut path_rng(1, 0)).is_err());
    }
}
