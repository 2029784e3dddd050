//! Power-law fit `n = a·x^b + c` of cutoff photon numbers against `x = κT_c`.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Fitted power law and the `x` range it is valid on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFit<T = f64> {
    pub a: T,
    pub b: T,
    pub c: T,
    /// Root mean square relative residual over the fitted samples.
    pub residual: T,
    pub range: (T, T),
    pub iterations: usize,
}

impl CutoffFit<f64> {
    /// Published coefficients `(1.457, 1.132, −0.8766)` over `κT_c ∈ [10², 10⁵]`.
    pub fn reference() -> Self {
        Self {
            a: 1.457,
            b: 1.132,
            c: -0.8766,
            residual: f64::NAN,
            range: (1e2, 1e5),
            iterations: 0,
        }
    }
}

impl<T: Real> CutoffFit<T> {
    pub fn eval(&self, x: T) -> T {
        self.a * x.powf(self.b) + self.c
    }

    /// Prediction at `x`, or `None` outside the fitted range.
    pub fn predict(&self, x: T) -> Option<T> {
        let slack = T::lit(1e-9);
        let (lo, hi) = self.range;
        (x >= lo * (T::one() - slack) && x <= hi * (T::one() + slack)).then(|| self.eval(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig<T = f64> {
    pub initial: (T, T, T),
    pub max_iterations: usize,
    /// Convergence threshold on the relative parameter step.
    pub tolerance: T,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            initial: (T::one(), T::one(), T::zero()),
            max_iterations: 200,
            tolerance: T::lit(1e-12),
        }
    }
}

type Vec3<T> = [T; 3];
type Mat3<T> = [[T; 3]; 3];

fn solve3<T: Real>(mut m: Mat3<T>, mut v: Vec3<T>) -> Option<Vec3<T>> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if !(m[pivot][col].abs() > T::zero()) {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            v[row] = v[row] - f * v[col];
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut s = v[row];
        for k in row + 1..3 {
            s = s - m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x.iter().all(|x| x.is_finite()).then_some(x)
}

fn cost<T: Real>(samples: &[(T, T)], p: &Vec3<T>) -> T {
    samples.iter().fold(T::zero(), |acc, &(x, y)| {
        let r = (p[0] * x.powf(p[1]) + p[2] - y) / y;
        acc + r * r
    })
}

/// Least-squares fit of `a·x^b + c` on relative residuals, starting from
/// `(1, 1, 0)`.
pub fn fit_cutoff_curve<T: Real>(samples: &[(T, T)]) -> Result<CutoffFit<T>> {
    fit_cutoff_curve_with(samples, &FitConfig::default())
}

pub fn fit_cutoff_curve_with<T: Real>(samples: &[(T, T)], cfg: &FitConfig<T>) -> Result<CutoffFit<T>> {
    if samples.len() < 4 {
        return Err(invalid("samples", "need at least four (kappa*t_c, n_cutoff) samples"));
    }
    if samples
        .iter()
        .any(|&(x, y)| !(x > T::zero()) || !(y > T::zero()) || !x.is_finite() || !y.is_finite())
    {
        return Err(invalid("samples", "abscissae and cutoffs must be positive and finite"));
    }
    let lo = samples.iter().map(|s| s.0).fold(T::infinity(), T::min);
    let hi = samples.iter().map(|s| s.0).fold(T::neg_infinity(), T::max);
    if hi / lo < T::lit(100.0) * (T::one() - T::lit(1e-9)) {
        return Err(invalid("samples", "abscissae must span at least two decades"));
    }

    let mut p: Vec3<T> = [cfg.initial.0, cfg.initial.1, cfg.initial.2];
    let mut current = cost(samples, &p);
    let mut mu = T::lit(1e-3);
    let mut iterations = 0;
    let mut converged = current == T::zero();
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let mut jtj = [[T::zero(); 3]; 3];
        let mut jtr = [T::zero(); 3];
        for &(x, y) in samples {
            let xb = x.powf(p[1]);
            let r = (p[0] * xb + p[2] - y) / y;
            let j = [xb / y, p[0] * xb * x.ln() / y, T::one() / y];
            for a in 0..3 {
                jtr[a] = jtr[a] + j[a] * r;
                for b in 0..3 {
                    jtj[a][b] = jtj[a][b] + j[a] * j[b];
                }
            }
        }
        // inner loop: raise the damping until a step lowers the cost
        loop {
            let mut damped = jtj;
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] = row[k] + mu * jtj[k][k].max(T::min_positive_value());
            }
            let step = solve3(damped, jtr.map(|v| -v));
            let candidate = step.map(|d| [p[0] + d[0], p[1] + d[1], p[2] + d[2]]);
            match (step, candidate) {
                (Some(d), Some(next)) if cost(samples, &next) <= current => {
                    let new_cost = cost(samples, &next);
                    let rel = (0..3)
                        .map(|k| d[k].abs() / (next[k].abs() + cfg.tolerance))
                        .fold(T::zero(), T::max);
                    p = next;
                    current = new_cost;
                    mu = (mu / T::lit(3.0)).max(T::lit(1e-15));
                    converged = rel <= cfg.tolerance || current == T::zero();
                    break;
                }
                _ => {
                    mu = mu * T::lit(4.0);
                    if mu > T::lit(1e30) {
                        // no descent direction left at working precision
                        converged = true;
                        break;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    let n = T::from_usize(samples.len()).unwrap();
    Ok(CutoffFit {
        a: p[0],
        b: p[1],
        c: p[2],
        residual: (current / n).sqrt(),
        range: (lo, hi),
        iterations,
    })
}
