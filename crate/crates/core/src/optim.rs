//! Derivative-free Nelder–Mead simplex minimization.

/// Standard simplex coefficients.
pub const REFLECTION: f64 = 1.0;
pub const EXPANSION: f64 = 2.0;
pub const CONTRACTION: f64 = 0.5;
pub const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Converged when the spread of simplex values is below `f_tol`...
    pub f_tol: f64,
    /// ...and every vertex is within `x_tol` (sup norm) of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, initial_step: 0.5, f_tol: 1e-12, x_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
}

struct Budget<F> {
    f: F,
    used: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.max {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        // NaN compares false everywhere; push it to the worst position
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Minimizes `f` from `x0`. The first evaluation is always `f(x0)`, so the
/// returned value never exceeds it.
pub fn nelder_mead(f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut budget = Budget { f, used: 0, max: opts.max_evals.max(1) };
    let f0 = budget.eval(x0).expect("budget >= 1");
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    let mut iterations = 0;

    let finish = |simplex: &mut Vec<(Vec<f64>, f64)>, used, iterations, converged, exhausted| {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex[0].clone();
        NelderMeadResult { x, f, evaluations: used, iterations, converged, budget_exhausted: exhausted }
    };

    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        match budget.eval(&v) {
            Some(fv) => simplex.push((v, fv)),
            None => return finish(&mut simplex, budget.used, 0, false, true),
        }
    }
    if n == 0 {
        return finish(&mut simplex, budget.used, 0, true, false);
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_spread = simplex.iter().map(|v| (v.1 - best).abs()).fold(0.0, f64::max);
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.0.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread <= opts.f_tol && x_spread <= opts.x_tol {
            return finish(&mut simplex, budget.used, iterations, true, false);
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v.0[j]).sum::<f64>() / n as f64).collect();
        let toward = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, x)| c + coef * (x - c)).collect()
        };
        let worst_x = simplex[n].0.clone();

        let reflected = toward(&worst_x, -REFLECTION);
        let Some(fr) = budget.eval(&reflected) else {
            return finish(&mut simplex, budget.used, iterations, false, true);
        };
        let second_worst = simplex[n - 1].1;

        if fr < best {
            let expanded = toward(&reflected, EXPANSION);
            let Some(fe) = budget.eval(&expanded) else {
                simplex[n] = (reflected, fr);
                return finish(&mut simplex, budget.used, iterations, false, true);
            };
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (reflected, fr);
            continue;
        }
        let outside = fr < worst;
        let contracted = if outside { toward(&reflected, CONTRACTION) } else { toward(&worst_x, CONTRACTION) };
        let Some(fc) = budget.eval(&contracted) else {
            if outside {
                simplex[n] = (reflected, fr);
            }
            return finish(&mut simplex, budget.used, iterations, false, true);
        };
        if (outside && fc <= fr) || (!outside && fc < worst) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor.iter().zip(&v.0).map(|(a, x)| a + SHRINK * (x - a)).collect();
            match budget.eval(&x) {
                Some(fx) => *v = (x, fx),
                None => return finish(&mut simplex, budget.used, iterations, false, true),
            }
        }
    }
}
