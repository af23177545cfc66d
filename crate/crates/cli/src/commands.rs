use rayon::prelude::*;
use serde_json::json;
use tlp_core::abmn::{
    abmn_residuals, default_solution, finite_margin, lambda_max, margin_roots, standard_solution,
};
use tlp_core::bboost::{battlefield_point, ode_profile, prize_totals};
use tlp_core::numeric::golden_max;
use tlp_core::sim::{
    path_rng, play_tlp, run_tlp, scaled_drift_check, Finish, simulate_sde, DriftKind, SdeConfig, SimConfig, StakeProfile, TerminalPayments,
};
use tlp_core::{Error, GameParams, Result};

use crate::args::{AbmnArgs, LambdaArgs, LambdaFigure, MarginArgs, MarginFigure, OdeArgs, OdeFigure, SimArgs, SimMode};

/// Files produced by a command, in emission order, and a line for the terminal.
pub struct Run {
    pub outputs: Vec<(String, Vec<u8>)>,
    pub message: String,
}

/// Reals in CSV: 17 significant digits, enough to round-trip a 64-bit float.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s.into_bytes()
}

pub fn abmn(a: &AbmnArgs) -> Result<Run> {
    let p = GameParams::new(a.kappa, a.rho)?;
    let w = if a.standard { standard_solution(&p, a.x, a.half_len)? } else { default_solution(&p, a.x, a.half_len)? };
    let res: std::collections::HashMap<i64, f64> = abmn_residuals(&w)?.iter().map(|s| (s.index, s.max())).collect();
    let worst = res.values().cloned().fold(0.0, f64::max);
    let rows = (w.lo..=w.hi)
        .map(|i| {
            vec![
                i.to_string(),
                opt(w.phi_at(i)),
                opt(w.a_at(i)),
                opt(w.b_at(i)),
                opt(w.m_at(i)),
                opt(w.n_at(i)),
                opt(w.ln_m_inc_at(i)),
                opt(w.ln_n_inc_at(i)),
                opt(res.get(&i).copied()),
            ]
        })
        .collect();
    let table = csv_bytes(&["i", "phi", "a", "b", "m", "n", "log_m_inc", "log_n_inc", "residual"], rows);
    let summary = json!({
        "kappa": a.kappa,
        "rho": a.rho,
        "x": a.x,
        "lo": w.lo,
        "hi": w.hi,
        "battlefield": w.battlefield(),
        "m_inf_total": w.m_inf_total,
        "n_neg_inf_total": w.n_neg_inf_total,
        "mina_margin": w.n_neg_inf_total / w.m_inf_total,
        "relative_tail": w.relative_tail(),
        "max_residual": worst,
        "truncated_left": w.truncated_left,
        "truncated_right": w.truncated_right,
    });
    Ok(Run {
        outputs: vec![("abmn.csv".into(), table), ("abmn.json".into(), json_bytes(&summary))],
        message: format!("window {}..={}, max residual {worst:.3e}", w.lo, w.hi),
    })
}

pub fn lambda(a: &LambdaArgs) -> Result<Run> {
    if a.locus {
        return locus(a);
    }
    let (kappas, rhos) = match a.figure {
        Some(LambdaFigure::Kappaisone) => (vec![1.0], (1..100).map(|i| 0.8 + 0.002 * i as f64).collect()),
        None => (a.kappa.clone(), a.rho.clone()),
    };
    let mut rows = Vec::new();
    let mut last = None;
    for &k in &kappas {
        for &r in &rhos {
            let l = lambda_max(&GameParams::new(k, r)?, a.mesh, a.tol)?;
            rows.push(vec![num(k), num(r), num(l.value), num(l.argmax), num(l.tail_bound)]);
            last = Some(l);
        }
    }
    let message = match (rows.len(), last) {
        (1, Some(l)) => format!("lambda_max = {:.12} at x = {:.8}", l.value, l.argmax),
        (n, _) => format!("{n} grid points"),
    };
    let table = csv_bytes(&["kappa", "rho", "lambda_max", "argmax_x", "truncation_bound"], rows);
    Ok(Run { outputs: vec![("lambda_max.csv".into(), table)], message })
}

fn locus(a: &LambdaArgs) -> Result<Run> {
    let rho = match a.rho.as_slice() {
        [r] => *r,
        _ => return Err(Error::InvalidParameter("--locus needs exactly one --rho".into())),
    };
    if !(a.kappa_lo > 0.0 && a.kappa_lo < a.kappa_hi && a.kappa_hi <= 1.0) || a.steps < 2 {
        return Err(Error::InvalidParameter("need 0 < kappa-lo < kappa-hi <= 1 and steps >= 2".into()));
    }
    let eval = |k: f64, mesh: usize| -> Result<(f64, f64)> {
        let l = lambda_max(&GameParams::new(k, rho)?, mesh, a.tol)?;
        Ok((l.value - 1.0, l.tail_bound))
    };
    let h = (a.kappa_hi - a.kappa_lo) / a.steps as f64;
    let mut scan = Vec::new();
    for i in 0..=a.steps {
        let k = a.kappa_lo + h * i as f64;
        let (v, t) = eval(k, a.mesh.min(128))?;
        scan.push((k, v, t));
    }
    let best = (0..scan.len()).min_by(|&i, &j| scan[i].1.total_cmp(&scan[j].1)).expect("non-empty scan");
    let lo = scan[best.saturating_sub(1)].0;
    let hi = scan[(best + 1).min(scan.len() - 1)].0;
    let mut err = None;
    let (k_min, neg) = golden_max(
        |k| match eval(k, a.mesh) {
            Ok(v) => -v.0,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-10,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (depth, bound) = (-neg, eval(k_min, a.mesh)?.1);
    let rows = scan.iter().map(|&(k, v, t)| vec![num(k), num(v), num(t)]).collect();
    let table = csv_bytes(&["kappa", "lambda_minus_one", "truncation_bound"], rows);
    let summary = json!({
        "rho": rho,
        "kappa_min": k_min,
        "depth": depth,
        "truncation_bound": bound,
        "below_bound": depth <= bound,
        "bracket": [lo, hi],
    });
    Ok(Run {
        outputs: vec![("locus.csv".into(), table), ("locus.json".into(), json_bytes(&summary))],
        message: format!("dip at kappa = {k_min:.8} in [{lo:.4}, {hi:.4}], depth {depth:.3e}, bound {bound:.1e}"),
    })
}

pub fn margin(a: &MarginArgs) -> Result<Run> {
    let a = match a.figure {
        Some(MarginFigure::Mmm) => MarginArgs {
            kappa: 0.9,
            rho: 1.0,
            j: 9,
            k: 9,
            x_lo: 1.0,
            x_hi: 145.0,
            roots: true,
            ..a.clone()
        },
        None => a.clone(),
    };
    let p = GameParams::new(a.kappa, a.rho)?;
    if !(a.x_lo > 0.0 && a.x_lo < a.x_hi) || a.points < 1 {
        return Err(Error::InvalidParameter("need 0 < x-lo < x-hi and points >= 1".into()));
    }
    let (l0, l1) = (a.x_lo.ln(), a.x_hi.ln());
    let mut rows = Vec::with_capacity(a.points);
    for i in 1..=a.points {
        let x = (l0 + (l1 - l0) * i as f64 / a.points as f64).exp();
        rows.push(vec![num(x), num(finite_margin(&p, x, a.j, a.k)?)]);
    }
    let mut outputs = vec![("margin.csv".into(), csv_bytes(&["x", "margin"], rows))];
    let mut message = format!("{} points on ({}, {}]", a.points, a.x_lo, a.x_hi);
    if a.roots {
        let roots = margin_roots(&p, a.j, a.k, a.x_lo, a.x_hi, a.root_mesh)?;
        let listed: Vec<String> = roots.iter().map(|r| format!("{r:.6}")).collect();
        message = format!("{} roots: {}", roots.len(), listed.join(" "));
        outputs.push(("margin_roots.json".into(), json_bytes(&json!({ "count": roots.len(), "roots": roots }))));
    }
    Ok(Run { outputs, message })
}

pub fn ode(a: &OdeArgs) -> Result<Run> {
    let a = match a.figure {
        Some(OdeFigure::Odepair) => OdeArgs { rho: 1.0, x: 1.0, r_lo: -3.0, r_hi: 3.0, ..a.clone() },
        None => a.clone(),
    };
    if !(a.r_lo < a.r_hi) || !(a.step > 0.0) {
        return Err(Error::InvalidParameter("need r-lo < r-hi and step > 0".into()));
    }
    let n = ((a.r_hi - a.r_lo) / a.step).round() as usize;
    let rs: Vec<f64> = (0..=n).map(|i| a.r_lo + a.step * i as f64).collect();
    let prof = ode_profile(a.rho, a.x, &rs, a.tol)?;
    let rows = prof
        .iter()
        .map(|e| {
            let j = e.s.powf(a.rho);
            vec![num(e.r), num(e.s), num(e.f), num(e.g), num(e.a), num(e.b), num((1.0 - j) / (1.0 + j))]
        })
        .collect();
    let table = csv_bytes(&["u", "S", "f", "g", "a", "b", "R"], rows);
    let best = prof.iter().max_by(|x, y| x.a.total_cmp(&y.a)).expect("non-empty profile");
    let totals = prize_totals(a.rho, a.x, a.tol)?;
    let summary = json!({
        "rho": a.rho,
        "x": a.x,
        "battlefield_point": battlefield_point(a.rho, a.x)?,
        "int_f": totals.int_f,
        "int_g": totals.int_g,
        "tail_bound": totals.tail_bound,
        "a_max": best.a,
        "a_argmax": best.r,
    });
    Ok(Run {
        outputs: vec![("ode.csv".into(), table), ("ode.json".into(), json_bytes(&summary))],
        message: format!("max a = {:.6} at u = {:.4}", best.a, best.r),
    })
}

pub fn simulate(a: &SimArgs) -> Result<Run> {
    match a.mode {
        SimMode::Tlp => sim_tlp(a),
        SimMode::Sde => sim_sde(a),
        SimMode::ScaledCheck => sim_scaled(a),
    }
}

fn sim_tlp(a: &SimArgs) -> Result<Run> {
    let p = GameParams::new(a.kappa, a.rho)?;
    let w = standard_solution(&p, a.x, a.half_len)?;
    let center = w.battlefield().unwrap_or(0);
    let cfg = SimConfig {
        params: p,
        start: a.start,
        center,
        escape_radius: a.escape_radius,
        max_turns: a.max_turns,
        terminal: TerminalPayments::from_window(&w),
    };
    let s = run_tlp(&cfg, &StakeProfile::from_window(&w), a.paths, a.seed)?;
    let n = s.paths as f64;
    let summary = json!({
        "kappa": a.kappa,
        "rho": a.rho,
        "x": a.x,
        "start": a.start,
        "paths": s.paths,
        "seed": a.seed,
        "frequencies": {
            "maxine": s.maxine_wins as f64 / n,
            "mina": s.mina_wins as f64 / n,
            "unfinished": s.unfinished as f64 / n,
        },
        "mean_payoff_plus": s.mean_plus,
        "stderr_plus": s.stderr_plus,
        "m_start": w.m_at(a.start),
        "mean_payoff_minus": s.mean_minus,
        "stderr_minus": s.stderr_minus,
        "n_start": w.n_at(a.start),
        "mean_turns": s.mean_turns,
    });
    let mut outputs = vec![("simulate_tlp.json".into(), json_bytes(&summary))];
    if a.dump_paths {
        let profile = StakeProfile::from_window(&w);
        let games: Vec<_> = (0..a.paths)
            .into_par_iter()
            .map(|k| play_tlp(&cfg, &profile, &mut path_rng(a.seed, k)))
            .collect::<Result<_>>()?;
        let rows = games
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let finish = match g.finish {
                    Finish::Maxine => "maxine",
                    Finish::Mina => "mina",
                    Finish::Unfinished => "unfinished",
                };
                vec![
                    k.to_string(),
                    finish.to_string(),
                    g.turns.to_string(),
                    g.final_site.to_string(),
                    num(g.cost_plus),
                    num(g.cost_minus),
                    num(g.payoff_plus),
                    num(g.payoff_minus),
                ]
            })
            .collect();
        let header =
            ["path", "finish", "turns", "final_site", "cost_plus", "cost_minus", "payoff_plus", "payoff_minus"];
        outputs.push(("simulate_paths.csv".into(), csv_bytes(&header, rows)));
    }
    Ok(Run {
        outputs,
        message: format!(
            "P+ {:.6} +- {:.1e}, P- {:.6} +- {:.1e}, unfinished {}",
            s.mean_plus, s.stderr_plus, s.mean_minus, s.stderr_minus, s.unfinished
        ),
    })
}

fn sim_sde(a: &SimArgs) -> Result<Run> {
    let cfg = SdeConfig {
        rho: a.rho,
        z0: a.z0,
        horizon: a.horizon,
        dt: a.dt,
        paths: a.paths,
        seed: a.seed,
        drift: if a.zero_drift { DriftKind::Zero } else { DriftKind::Equilibrium },
        antithetic: a.antithetic,
    };
    let s = simulate_sde(&cfg)?;
    let rows = s.times.iter().zip(&s.mean_path).map(|(t, m)| vec![num(*t), num(*m)]).collect();
    let summary = json!({
        "config": cfg,
        "mean_slope": s.mean_slope,
        "increment_variance_per_dt": s.increment_variance_per_dt,
    });
    Ok(Run {
        outputs: vec![("sde.csv".into(), csv_bytes(&["t", "mean"], rows)), ("sde.json".into(), json_bytes(&summary))],
        message: format!("mean slope {:.6}, increment variance / dt {:.6}", s.mean_slope, s.increment_variance_per_dt),
    })
}

fn sim_scaled(a: &SimArgs) -> Result<Run> {
    let rows = scaled_drift_check(a.rho, a.x, &a.kappas, &a.us)?;
    let nu = a.us.len();
    let ratio = |k: usize, f: &dyn Fn(usize) -> f64| if k >= nu { opt(Some(f(k) / f(k - nu))) } else { String::new() };
    let table = (0..rows.len())
        .map(|k| {
            let r = &rows[k];
            vec![
                num(r.kappa),
                num(r.u),
                r.index.to_string(),
                num(r.drift_discrete),
                num(r.drift_continuum),
                num(r.drift_error()),
                num(r.a_discrete),
                num(r.a_continuum),
                num(r.a_error()),
                ratio(k, &|j| rows[j].a_error()),
                num(r.b_discrete),
                num(r.b_continuum),
                num(r.b_error()),
                ratio(k, &|j| rows[j].b_error()),
            ]
        })
        .collect();
    let header = [
        "kappa",
        "u",
        "index",
        "drift_discrete",
        "drift_continuum",
        "drift_error",
        "a_discrete",
        "a_continuum",
        "a_error",
        "a_error_ratio",
        "b_discrete",
        "b_continuum",
        "b_error",
        "b_error_ratio",
    ];
    Ok(Run {
        outputs: vec![("scaled_check.csv".into(), csv_bytes(&header, table))],
        message: format!("{} rows over kappa in {:?}", rows.len(), a.kappas),
    })
}
