//! Small numerical building blocks: root bracketing, golden section search,
//! Gauss-Kronrod quadrature and log-space helpers.

use crate::error::{Error, Result};

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Relative residual `|l - r| / (|l| + |r|)`, zero when both sides vanish.
pub fn rel_residual(l: f64, r: f64) -> f64 {
    let den = l.abs() + r.abs();
    if den == 0.0 {
        0.0
    } else {
        (l - r).abs() / den
    }
}

/// Relative residual of two positive quantities given by their logarithms.
pub fn log_rel_residual(ln_l: f64, ln_r: f64) -> f64 {
    if ln_l == ln_r {
        return 0.0;
    }
    ((ln_l - ln_r) / 2.0).tanh().abs()
}

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Stops when the bracket is narrower than `xtol + 4 eps |x|`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonConvergence(format!("root not bracketed on [{a}, {b}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::NonConvergence(format!("Brent iteration limit reached near {b}")))
}

/// Golden section search for a maximum of a unimodal function on `[a, b]`.
///
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// One 15-point Kronrod panel of a vector integrand; returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for j in 0..N {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            let s = f1[j] + f2[j];
            k[j] += WGK[i] * s;
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for j in 0..N {
        k[j] *= h;
        g[j] *= h;
        err[j] = (k[j] - g[j]).abs();
    }
    (k, err)
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quad<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
}

/// Globally adaptive Gauss-Kronrod quadrature of a vector integrand.
///
/// Bisects the panel with the largest error until every component satisfies
/// `error <= abs_tol + rel_tol * |value|`.
pub fn integrate<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quad<N>> {
    if a == b {
        return Ok(Quad { value: [0.0; N], error: [0.0; N] });
    }
    let mut panels: Vec<(f64, f64, [f64; N], [f64; N])> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    panels.push((a, b, v, e));
    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for p in &panels {
            for j in 0..N {
                value[j] += p.2[j];
                error[j] += p.3[j];
            }
        }
        let done = (0..N).all(|j| error[j] <= abs_tol + rel_tol * value[j].abs());
        if done {
            return Ok(Quad { value, error });
        }
        if panels.len() >= max_panels {
            return Err(Error::NonConvergence(format!(
                "quadrature on [{a}, {b}] exceeded {max_panels} panels (error {error:?})"
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                let ex = x.1 .3.iter().cloned().fold(0.0, f64::max);
                let ey = y.1 .3.iter().cloned().fold(0.0, f64::max);
                ex.total_cmp(&ey)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Ordinary least squares on the given basis; returns the coefficients.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.len() < p || p == 0 {
        return Err(Error::InsufficientData("fewer observations than coefficients".into()));
    }
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            aty[i] += r[i] * yi;
            for j in 0..p {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations.
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| ata[i][col].abs().total_cmp(&ata[j][col].abs()))
            .unwrap_or(col);
        if ata[piv][col] == 0.0 {
            return Err(Error::InsufficientData("singular least-squares system".into()));
        }
        ata.swap(col, piv);
        aty.swap(col, piv);
        for row in col + 1..p {
            let factor = ata[row][col] / ata[col][col];
            for k in col..p {
                ata[row][k] -= factor * ata[col][k];
            }
            aty[row] -= factor * aty[col];
        }
    }
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = aty[i];
        for k in i + 1..p {
            s -= ata[i][k] * coef[k];
        }
        coef[i] = s / ata[i][i];
    }
    Ok(coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(1.0f64.ln(), 3.0f64.ln());
        assert!((v - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn brent_finds_cube_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, -2.0, 6.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        assert!(brent(|x| x, 1.0, 2.0, 1.0, 2.0, 1e-12, 10).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_of_known_integrals() {
        let q = integrate(|x| [x.exp(), 1.0 / (1.0 + x * x)], 0.0, 3.0, 1e-14, 1e-14, 1000).unwrap();
        assert!((q.value[0] - (3f64.exp() - 1.0)).abs() < 1e-12);
        assert!((q.value[1] - 3f64.atan()).abs() < 1e-14);
        let q = integrate(|x| [x.sqrt()], 0.0, 1.0, 1e-12, 1e-12, 1000).unwrap();
        assert!((q.value[0] - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 - 0.5 * x).collect();
        let c = least_squares(&rows, &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
    }
}
