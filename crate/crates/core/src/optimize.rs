//! Small numerical solvers: bracketing scan, bisection, and Nelder-Mead.

use nalgebra::DVector;

/// First interval `[a, b]` on the grid `start + k * step` (up to `limit`)
/// where `f(a) > 0 >= f(b)`. Returns `(start, start)` if `f(start) <= 0`.
pub fn scan_for_root(f: &mut dyn FnMut(f64) -> f64, start: f64, step: f64, limit: f64) -> Option<(f64, f64)> {
    let mut a = start;
    if f(a) <= 0.0 {
        return Some((a, a));
    }
    while a < limit {
        let b = (a + step).min(limit);
        if f(b) <= 0.0 {
            return Some((a, b));
        }
        a = b;
    }
    None
}

/// Bisection for a sign change with `f(lo) > 0 >= f(hi)`, stopping when the
/// bracket is narrower than `tol`. Returns the midpoint of the last bracket.
pub fn bisect(f: &mut dyn FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop when the simplex values span less than this.
    pub f_tol: f64,
    /// Stop as soon as the best value is below this.
    pub target: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, max_evals: 2000, f_tol: 1e-16, target: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Derivative-free Nelder-Mead minimisation with standard coefficients.
pub fn nelder_mead(f: &mut dyn FnMut(&DVector<f64>) -> f64, x0: &DVector<f64>, opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += opts.initial_step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if evals >= opts.max_evals || best <= opts.target || (worst - best).abs() <= opts.f_tol {
            break;
        }
        let centroid = simplex[..n].iter().fold(DVector::zeros(n), |acc, (x, _)| acc + x) / n as f64;
        let reflected = &centroid + (&centroid - &simplex[n].0) * alpha;
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = &centroid + (&reflected - &centroid) * gamma;
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let contracted = if fr < simplex[n].1 {
            &centroid + (&reflected - &centroid) * rho
        } else {
            &centroid + (&simplex[n].0 - &centroid) * rho
        };
        let fc = eval(&contracted, &mut evals);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let x = &x_best + (&entry.0 - &x_best) * sigma;
            let v = eval(&x, &mut evals);
            *entry = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}
