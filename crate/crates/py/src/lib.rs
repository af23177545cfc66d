use pyo3::prelude::*;

/// Equilibria of the stake-governed tug-of-war and its Brownian Boost limit.
#[pymodule]
mod tlp {
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    use tlp_core::abmn::{self as solution, AbmnWindow};
    use tlp_core::bboost;
    use tlp_core::sim::{self, SimConfig, StakeProfile, TerminalPayments};
    use tlp_core::GameParams;

    fn err(e: tlp_core::Error) -> PyErr {
        if e.is_validation() {
            PyValueError::new_err(e.to_string())
        } else {
            PyRuntimeError::new_err(e.to_string())
        }
    }

    fn params(kappa: f64, rho: f64) -> PyResult<GameParams> {
        GameParams::new(kappa, rho).map_err(err)
    }

    fn column(w: &AbmnWindow, f: impl Fn(i64) -> Option<f64>) -> Vec<Option<f64>> {
        (w.lo..=w.hi).map(f).collect()
    }

    /// Supremum of the Mina margin over the central domain.
    #[pyfunction]
    #[pyo3(signature = (kappa, rho, mesh = 512, tol = 1e-15))]
    fn lambda_max<'py>(py: Python<'py>, kappa: f64, rho: f64, mesh: usize, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let l = solution::lambda_max(&params(kappa, rho)?, mesh, tol).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("value", l.value)?;
        d.set_item("argmax", l.argmax)?;
        d.set_item("tail_bound", l.tail_bound)?;
        Ok(d)
    }

    /// `(M(x), tail bound)` for the default solution.
    #[pyfunction]
    #[pyo3(signature = (kappa, rho, x, tol = 1e-15))]
    fn mina_margin(kappa: f64, rho: f64, x: f64, tol: f64) -> PyResult<(f64, f64)> {
        let m = solution::mina_margin(&params(kappa, rho)?, x, tol).map_err(err)?;
        Ok((m.value, m.tail_bound))
    }

    /// Margin of the trail truncated to `j` sites left and `k` right of the battlefield.
    #[pyfunction]
    fn finite_margin(kappa: f64, rho: f64, x: f64, j: usize, k: usize) -> PyResult<f64> {
        solution::finite_margin(&params(kappa, rho)?, x, j, k).map_err(err)
    }

    /// Roots of `M - 1` for the truncated trail on `(x_lo, x_hi]`.
    #[pyfunction]
    #[pyo3(signature = (kappa, rho, j, k, x_lo, x_hi, mesh = 20_000))]
    fn margin_roots(kappa: f64, rho: f64, j: usize, k: usize, x_lo: f64, x_hi: f64, mesh: usize) -> PyResult<Vec<f64>> {
        solution::margin_roots(&params(kappa, rho)?, j, k, x_lo, x_hi, mesh).map_err(err)
    }

    /// Default or standard solution window as columns indexed from `lo`; `None` where undefined.
    #[pyfunction]
    #[pyo3(signature = (kappa, rho, x, half_len = 40, standard = false))]
    fn abmn<'py>(
        py: Python<'py>,
        kappa: f64,
        rho: f64,
        x: f64,
        half_len: usize,
        standard: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let p = params(kappa, rho)?;
        let w = if standard { solution::standard_solution(&p, x, half_len) } else { solution::default_solution(&p, x, half_len) }
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("lo", w.lo)?;
        d.set_item("hi", w.hi)?;
        d.set_item("battlefield", w.battlefield())?;
        d.set_item("phi", column(&w, |i| w.phi_at(i)))?;
        d.set_item("m", column(&w, |i| w.m_at(i)))?;
        d.set_item("n", column(&w, |i| w.n_at(i)))?;
        d.set_item("a", column(&w, |i| w.a_at(i)))?;
        d.set_item("b", column(&w, |i| w.b_at(i)))?;
        d.set_item("m_inf_total", w.m_inf_total)?;
        d.set_item("n_neg_inf_total", w.n_neg_inf_total)?;
        Ok(d)
    }

    /// `f`, `g`, `S` and the stakes `a`, `b` at `r`.
    #[pyfunction]
    #[pyo3(signature = (rho, x, r, tol = 1e-12))]
    fn ode_pair<'py>(py: Python<'py>, rho: f64, x: f64, r: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let e = bboost::ode_pair(rho, x, r, tol).map_err(err)?;
        let d = PyDict::new(py);
        for (k, v) in [("s", e.s), ("f", e.f), ("g", e.g), ("a", e.a), ("b", e.b)] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Point where `f = g`.
    #[pyfunction]
    fn battlefield_point(rho: f64, x: f64) -> PyResult<f64> {
        bboost::battlefield_point(rho, x).map_err(err)
    }

    /// `(int f, int g)` over the line.
    #[pyfunction]
    #[pyo3(signature = (rho, x, tol = 1e-12))]
    fn prize_totals(rho: f64, x: f64, tol: f64) -> PyResult<(f64, f64)> {
        let t = bboost::prize_totals(rho, x, tol).map_err(err)?;
        Ok((t.int_f, t.int_g))
    }

    /// Monte Carlo play under the standard solution's stakes.
    #[pyfunction]
    #[pyo3(signature = (kappa, rho, x, paths, seed, start = 0, escape_radius = 50, max_turns = 1_000_000, half_len = 80))]
    #[allow(clippy::too_many_arguments)]
    fn simulate_tlp<'py>(
        py: Python<'py>,
        kappa: f64,
        rho: f64,
        x: f64,
        paths: u64,
        seed: u64,
        start: i64,
        escape_radius: i64,
        max_turns: u64,
        half_len: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let p = params(kappa, rho)?;
        let w = solution::standard_solution(&p, x, half_len).map_err(err)?;
        let cfg = SimConfig {
            params: p,
            start,
            center: w.battlefield().unwrap_or(0),
            escape_radius,
            max_turns,
            terminal: TerminalPayments::from_window(&w),
        };
        let s = sim::run_tlp(&cfg, &StakeProfile::from_window(&w), paths, seed).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("mean_plus", s.mean_plus)?;
        d.set_item("stderr_plus", s.stderr_plus)?;
        d.set_item("m_start", w.m_at(start))?;
        d.set_item("mean_minus", s.mean_minus)?;
        d.set_item("stderr_minus", s.stderr_minus)?;
        d.set_item("n_start", w.n_at(start))?;
        d.set_item("maxine_wins", s.maxine_wins)?;
        d.set_item("mina_wins", s.mina_wins)?;
        d.set_item("unfinished", s.unfinished)?;
        Ok(d)
    }
}
