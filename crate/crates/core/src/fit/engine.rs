//! The least-squares engine: Levenberg-Marquardt damping with adaptive
//! lambda, central-difference Jacobians in transformed parameter space,
//! bounds via smooth transforms, and covariance from the normal matrix.

use crate::{Error, Result};

/// Smooth reparametrization keeping a parameter inside its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Unbounded.
    Identity,
    /// Positive scale parameters: p = exp(u).
    Log,
    /// Interval parameters: p = lo + (hi - lo) * sigmoid(u).
    Logistic,
}

/// One fit parameter: initial value, bounds, transform and fixed flag.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    pub lower: f64,
    pub upper: f64,
    pub transform: Transform,
    pub fixed: bool,
}

impl ParamSpec {
    /// Unbounded free parameter.
    pub fn free(name: &str, init: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            transform: Transform::Identity,
            fixed: false,
        }
    }

    /// Positive scale parameter fitted in log space.
    pub fn positive(name: &str, init: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init,
            lower: 0.0,
            upper: f64::INFINITY,
            transform: Transform::Log,
            fixed: false,
        }
    }

    /// Interval parameter fitted through a logistic transform.
    pub fn bounded(name: &str, init: f64, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init,
            lower,
            upper,
            transform: Transform::Logistic,
            fixed: false,
        }
    }

    /// Parameter held at `value` throughout the fit.
    pub fn fixed(name: &str, value: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            init: value,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            transform: Transform::Identity,
            fixed: true,
        }
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.transform {
            Transform::Identity => p,
            Transform::Log => p.ln(),
            Transform::Logistic => {
                let s = (p - self.lower) / (self.upper - self.lower);
                (s / (1.0 - s)).ln()
            }
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        match self.transform {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::Logistic => {
                let s = 1.0 / (1.0 + (-u).exp());
                self.lower + (self.upper - self.lower) * s
            }
        }
    }

    /// dp/du at internal value `u`.
    fn jacobian_factor(&self, u: f64) -> f64 {
        match self.transform {
            Transform::Identity => 1.0,
            Transform::Log => u.exp(),
            Transform::Logistic => {
                let s = 1.0 / (1.0 + (-u).exp());
                (self.upper - self.lower) * s * (1.0 - s)
            }
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.lower < self.upper) && !self.fixed {
            return Err(Error::invalid(format!(
                "parameter {}: bounds [{}, {}] are not ordered",
                self.name, self.lower, self.upper
            )));
        }
        if self.fixed {
            return Ok(());
        }
        match self.transform {
            Transform::Log if !(self.init > 0.0) => Err(Error::invalid(format!(
                "parameter {}: log transform needs init > 0, got {}",
                self.name, self.init
            ))),
            Transform::Logistic if !(self.init > self.lower && self.init < self.upper) => {
                Err(Error::invalid(format!(
                    "parameter {}: init {} not strictly inside ({}, {})",
                    self.name, self.init, self.lower, self.upper
                )))
            }
            _ if !self.init.is_finite() => {
                Err(Error::invalid(format!("parameter {}: init not finite", self.name)))
            }
            _ => Ok(()),
        }
    }
}

/// Model, data and parameter specs of one weighted least-squares problem.
///
/// The model maps the full external parameter vector and the abscissa array
/// to a prediction array of the same length as `y`.
pub struct FitProblem<'a> {
    pub model: Box<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + 'a>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub params: Vec<ParamSpec>,
}

/// Fitted parameters with 1-sigma uncertainties and diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub parameters: Vec<f64>,
    /// 1-sigma uncertainties; 0 for fixed parameters.
    pub uncertainties: Vec<f64>,
    /// Full covariance with zero rows/columns for fixed parameters.
    pub covariance: Vec<Vec<f64>>,
    pub fixed: Vec<bool>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.parameters[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.uncertainties[i])
    }

    /// Covariance submatrix for the named parameters, in the given order.
    pub fn covariance_block(&self, names: &[&str]) -> Option<Vec<Vec<f64>>> {
        let idx: Option<Vec<usize>> = names
            .iter()
            .map(|n| self.names.iter().position(|m| m == n))
            .collect();
        let idx = idx?;
        Some(
            idx.iter()
                .map(|&i| idx.iter().map(|&j| self.covariance[i][j]).collect())
                .collect(),
        )
    }
}

const MAX_ITERATIONS: usize = 500;
const CHI2_RTOL: f64 = 1e-9;
const STEP_TOL: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_ACCEPT: f64 = 0.3;
const LAMBDA_REJECT: f64 = 2.0;
const LAMBDA_MAX: f64 = 1e13;

struct Workspace<'p, 'a> {
    problem: &'p FitProblem<'a>,
    free_idx: Vec<usize>,
    sqrt_w: Vec<f64>,
}

impl<'p, 'a> Workspace<'p, 'a> {
    fn external(&self, u: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.problem.params.iter().map(|s| s.init).collect();
        for (k, &i) in self.free_idx.iter().enumerate() {
            p[i] = self.problem.params[i].to_external(u[k]);
        }
        p
    }

    /// Weighted residuals sqrt(w_i) (y_i - f_i).
    fn residuals(&self, u: &[f64]) -> Result<Vec<f64>> {
        let p = self.external(u);
        let f = (self.problem.model)(&p, &self.problem.x)?;
        if f.len() != self.problem.y.len() {
            return Err(Error::invalid(format!(
                "model returned {} values for {} points",
                f.len(),
                self.problem.y.len()
            )));
        }
        Ok(self
            .problem
            .y
            .iter()
            .zip(f.iter())
            .zip(self.sqrt_w.iter())
            .map(|((y, f), sw)| sw * (y - f))
            .collect())
    }

    fn chi2(r: &[f64]) -> f64 {
        r.iter().map(|v| v * v).sum()
    }

    /// Central-difference Jacobian of the residuals, n x m.
    fn jacobian(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.problem.y.len();
        let m = u.len();
        let mut jac = vec![vec![0.0; m]; n];
        let mut up = u.to_vec();
        for j in 0..m {
            let h = (1e-6 * u[j].abs()).max(1e-9);
            up[j] = u[j] + h;
            let r_plus = self.residuals(&up)?;
            up[j] = u[j] - h;
            let r_minus = self.residuals(&up)?;
            up[j] = u[j];
            for i in 0..n {
                jac[i][j] = (r_plus[i] - r_minus[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

fn normal_matrix(jac: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = jac.first().map_or(0, |row| row.len());
    let mut a = vec![vec![0.0; m]; m];
    for row in jac {
        for j in 0..m {
            for k in j..m {
                a[j][k] += row[j] * row[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            a[j][k] = a[k][j];
        }
    }
    a
}

fn gradient(jac: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let m = jac.first().map_or(0, |row| row.len());
    let mut g = vec![0.0; m];
    for (row, &ri) in jac.iter().zip(r.iter()) {
        for j in 0..m {
            g[j] += row[j] * ri;
        }
    }
    g
}

/// Cholesky solve of (A)x = b; None if not positive definite.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = a.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            let t = l[i][k] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i][i];
    }
    for i in (0..m).rev() {
        for k in (i + 1)..m {
            let t = l[k][i] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i][i];
    }
    Some(x)
}

/// Gauss-Jordan inverse with partial pivoting; reports the pivot-ratio
/// condition estimate on failure.
fn invert(a: &[Vec<f64>]) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let m = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0f64;
    for col in 0..m {
        let (pivot_row, pivot) = (col..m)
            .map(|r| (r, aug[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        min_pivot = min_pivot.min(pivot);
        max_pivot = max_pivot.max(pivot);
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(0.0);
        }
        aug.swap(col, pivot_row);
        let inv = 1.0 / aug[col][col];
        for v in aug[col].iter_mut() {
            *v *= inv;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let factor = aug[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..2 * m {
                let t = factor * aug[col][c];
                aug[r][c] -= t;
            }
        }
    }
    let rcond = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
    if rcond < 1e-14 {
        return Err(rcond);
    }
    Ok(aug.into_iter().map(|mut row| row.split_off(m)).collect())
}

/// Minimizes sum w_i (y_i - f_i(p))^2 over the free parameters.
///
/// Damped normal equations with adaptive lambda (x0.3 on accepted steps,
/// x2 on rejected ones); Jacobians by central differences with step
/// max(1e-6 |u|, 1e-9) in transformed space; convergence when the relative
/// chi^2 decrease falls below 1e-9 or the step norm below 1e-10, capped at
/// 500 iterations. The covariance is (J^T W J)^{-1} * chi2/dof mapped back
/// to external parameter space.
pub fn least_squares(problem: &FitProblem) -> Result<FitResult> {
    let n = problem.y.len();
    if problem.x.len() != n || problem.weights.len() != n {
        return Err(Error::invalid(format!(
            "data length mismatch: x={}, y={}, w={}",
            problem.x.len(),
            n,
            problem.weights.len()
        )));
    }
    if problem.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    for spec in &problem.params {
        spec.check()?;
    }
    let free_idx: Vec<usize> = problem
        .params
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.fixed)
        .map(|(i, _)| i)
        .collect();
    let m = free_idx.len();
    if m == 0 {
        return Err(Error::invalid("no free parameters"));
    }
    if n < m + 1 {
        return Err(Error::invalid(format!(
            "underdetermined: {n} points for {m} free parameters"
        )));
    }

    let ws = Workspace {
        problem,
        free_idx: free_idx.clone(),
        sqrt_w: problem.weights.iter().map(|w| w.sqrt()).collect(),
    };

    let mut u: Vec<f64> = free_idx
        .iter()
        .map(|&i| problem.params[i].to_internal(problem.params[i].init))
        .collect();

    let mut r = ws.residuals(&u)?;
    let mut chi2 = Workspace::chi2(&r);
    let mut lambda = LAMBDA_INIT;
    let mut converged = chi2 <= 1e-20;
    let mut iterations = 0usize;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = ws.jacobian(&u)?;
        let a = normal_matrix(&jac);
        let g = gradient(&jac, &r);
        let damping: Vec<f64> = (0..m).map(|j| a[j][j].max(1e-10)).collect();
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = a.clone();
            for j in 0..m {
                damped[j][j] += lambda * damping[j];
            }
            let Some(step) = cholesky_solve(&damped, &neg_g) else {
                lambda *= LAMBDA_REJECT;
                continue;
            };
            let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_r = ws.residuals(&trial)?;
            let trial_chi2 = Workspace::chi2(&trial_r);
            if trial_chi2 <= chi2 {
                debug_assert!(trial_chi2 <= chi2, "objective increased on accepted step");
                let rel_decrease = (chi2 - trial_chi2) / chi2.max(1e-300);
                u = trial;
                r = trial_r;
                chi2 = trial_chi2;
                lambda = (lambda * LAMBDA_ACCEPT).max(1e-13);
                accepted = true;
                if rel_decrease < CHI2_RTOL || step_norm < STEP_TOL || chi2 <= 1e-20 {
                    converged = true;
                }
                break;
            }
            if step_norm < STEP_TOL {
                // cannot move: treat the current point as the optimum
                converged = true;
                accepted = true;
                break;
            }
            lambda *= LAMBDA_REJECT;
        }
        if !accepted {
            break; // lambda exhausted without an acceptable step
        }
    }

    // covariance at the optimum
    let jac = ws.jacobian(&u)?;
    let a = normal_matrix(&jac);
    let dof = n - m;
    let scale = chi2 / dof as f64;
    let cov_u = invert(&a).map_err(|rcond| Error::SingularNormalMatrix { rcond })?;

    let n_par = problem.params.len();
    let mut covariance = vec![vec![0.0; n_par]; n_par];
    let factors: Vec<f64> = free_idx
        .iter()
        .enumerate()
        .map(|(k, &i)| problem.params[i].jacobian_factor(u[k]))
        .collect();
    for (kj, &j) in free_idx.iter().enumerate() {
        for (kk, &k) in free_idx.iter().enumerate() {
            covariance[j][k] = cov_u[kj][kk] * scale * factors[kj] * factors[kk];
        }
    }
    // enforce exact symmetry against inversion round-off
    for j in 0..n_par {
        for k in 0..j {
            let s = 0.5 * (covariance[j][k] + covariance[k][j]);
            covariance[j][k] = s;
            covariance[k][j] = s;
        }
    }

    let parameters = ws.external(&u);
    let uncertainties: Vec<f64> = (0..n_par).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    Ok(FitResult {
        names: problem.params.iter().map(|s| s.name.clone()).collect(),
        parameters,
        uncertainties,
        covariance,
        fixed: problem.params.iter().map(|s| s.fixed).collect(),
        chi2,
        dof,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    fn linear_problem<'a>(x: Vec<f64>, y: Vec<f64>) -> FitProblem<'a> {
        FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * v + p[1]).collect())),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![ParamSpec::free("a", 0.3), ParamSpec::free("b", -0.2)],
        }
    }

    #[test]
    fn linear_exact_recovery() {
        let x: Vec<f64> = (0..25).map(|k| k as f64 * 0.4).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.25).collect();
        let fit = least_squares(&linear_problem(x, y)).unwrap();
        assert!(fit.converged);
        assert!((fit.param("a").unwrap() - 2.5).abs() < 1e-10);
        assert!((fit.param("b").unwrap() + 1.25).abs() < 1e-10);
    }

    #[test]
    fn self_fit_converges_immediately() {
        let x: Vec<f64> = (0..30).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v / 2.0).exp() * 3.0).collect();
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * (-v / p[1]).exp()).collect())),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![ParamSpec::positive("a", 3.0), ParamSpec::positive("tau", 2.0)],
        };
        let fit = least_squares(&problem).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 3, "took {} iterations", fit.iterations);
        assert!(fit.chi2 <= 1e-12, "chi2 = {}", fit.chi2);
    }

    #[test]
    fn exponential_recovery_from_bad_guess() {
        let truth = (4.0, 7.0);
        let x: Vec<f64> = (0..60).map(|k| k as f64 * 0.5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|v| truth.0 * (-v / truth.1).exp() + noise.sample(&mut rng))
            .collect();
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * (-v / p[1]).exp()).collect())),
            weights: vec![1.0 / (0.01f64 * 0.01); y.len()],
            x,
            y,
            // initial guess 10x off
            params: vec![ParamSpec::positive("a", 40.0), ParamSpec::positive("tau", 0.7)],
        };
        let fit = least_squares(&problem).unwrap();
        assert!(fit.converged);
        let (a, sa) = (fit.param("a").unwrap(), fit.sigma("a").unwrap());
        let (t, st) = (fit.param("tau").unwrap(), fit.sigma("tau").unwrap());
        assert!((a - truth.0).abs() < 3.0 * sa, "a = {a} +- {sa}");
        assert!((t - truth.1).abs() < 3.0 * st, "tau = {t} +- {st}");
    }

    #[test]
    fn chi2_per_dof_calibrated() {
        // quadratic model with known Gaussian noise: chi2/dof lands in
        // [0.5, 1.5] in at least 90 of 100 seeded trials
        let x: Vec<f64> = (0..50).map(|k| -2.0 + k as f64 * 0.08).collect();
        let sigma = 0.05;
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, sigma).unwrap();
            let y: Vec<f64> = x
                .iter()
                .map(|v| 1.3 * v * v - 0.7 * v + 0.2 + noise.sample(&mut rng))
                .collect();
            let problem = FitProblem {
                model: Box::new(|p, x| {
                    Ok(x.iter().map(|v| p[0] * v * v + p[1] * v + p[2]).collect())
                }),
                weights: vec![1.0 / (sigma * sigma); y.len()],
                x: x.clone(),
                y,
                params: vec![
                    ParamSpec::free("a", 1.0),
                    ParamSpec::free("b", 0.0),
                    ParamSpec::free("c", 0.0),
                ],
            };
            let fit = least_squares(&problem).unwrap();
            let per_dof = fit.chi2 / fit.dof as f64;
            if (0.5..=1.5).contains(&per_dof) {
                hits += 1;
            }
        }
        assert!(hits >= 90, "only {hits}/100 trials in band");
    }

    #[test]
    fn fixed_parameters_stay_put() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 5.0).collect();
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * v + p[1]).collect())),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![ParamSpec::free("a", 1.0), ParamSpec::fixed("b", 5.0)],
        };
        let fit = least_squares(&problem).unwrap();
        assert_eq!(fit.param("b").unwrap(), 5.0);
        assert_eq!(fit.sigma("b").unwrap(), 0.0);
        assert!((fit.param("a").unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn bounds_are_honored() {
        // data prefer a = -1 but the bound keeps a in (0.5, 4)
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * v).collect())),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![
                ParamSpec::bounded("a", 2.0, 0.5, 4.0),
                ParamSpec::fixed("unused", 0.0),
            ],
        };
        let fit = least_squares(&problem).unwrap();
        let a = fit.param("a").unwrap();
        assert!(a >= 0.5 && a <= 4.0);
        assert!((a - 0.5) < 0.05, "a should press against the lower bound, got {a}");
    }

    #[test]
    fn underdetermined_is_rejected() {
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| p[0] * v + p[1]).collect())),
            x: vec![1.0, 2.0],
            y: vec![1.0, 2.0],
            weights: vec![1.0, 1.0],
            params: vec![ParamSpec::free("a", 1.0), ParamSpec::free("b", 0.0)],
        };
        assert!(least_squares(&problem).is_err());
    }

    #[test]
    fn singular_normal_matrix_reports_condition() {
        // two perfectly degenerate parameters
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 0.01 * v * v).collect();
        let problem = FitProblem {
            model: Box::new(|p, x| Ok(x.iter().map(|v| (p[0] + p[1]) * v).collect())),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![ParamSpec::free("a", 1.0), ParamSpec::free("b", 1.0)],
        };
        match least_squares(&problem) {
            Err(Error::SingularNormalMatrix { rcond }) => assert!(rcond < 1e-10),
            other => panic!("expected singular normal matrix, got {other:?}"),
        }
    }

    #[test]
    fn covariance_matches_chi2_curvature() {
        // finite-difference Hessian of chi2/2 against (J^T W J) = C^{-1} * (chi2/dof)
        let truth = (2.0, 5.0);
        let x: Vec<f64> = (0..100).map(|k| k as f64 * 0.25).collect();
        let sigma = 0.005;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, sigma).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|v| truth.0 * (-v / truth.1).exp() + noise.sample(&mut rng))
            .collect();
        let w = vec![1.0 / (sigma * sigma); y.len()];
        let model = |p: &[f64], x: &[f64]| -> Vec<f64> {
            x.iter().map(|v| p[0] * (-v / p[1]).exp()).collect()
        };
        let problem = FitProblem {
            model: Box::new(move |p, x| Ok(model(p, x))),
            weights: w.clone(),
            x: x.clone(),
            y: y.clone(),
            params: vec![ParamSpec::free("a", 2.2), ParamSpec::free("tau", 4.5)],
        };
        let fit = least_squares(&problem).unwrap();
        assert!(fit.converged);

        let chi2_at = |p: &[f64]| -> f64 {
            x.iter()
                .zip(y.iter())
                .zip(w.iter())
                .map(|((xv, yv), wv)| {
                    let f = p[0] * (-xv / p[1]).exp();
                    wv * (yv - f) * (yv - f)
                })
                .sum()
        };
        let p0 = [fit.param("a").unwrap(), fit.param("tau").unwrap()];
        let h = [1e-5 * p0[0], 1e-5 * p0[1]];
        let mut hess = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut pp = p0;
                pp[i] += h[i];
                pp[j] += h[j];
                let fpp = chi2_at(&pp);
                let mut pm = p0;
                pm[i] += h[i];
                pm[j] -= h[j];
                let fpm = chi2_at(&pm);
                let mut mp = p0;
                mp[i] -= h[i];
                mp[j] += h[j];
                let fmp = chi2_at(&mp);
                let mut mm = p0;
                mm[i] -= h[i];
                mm[j] -= h[j];
                let fmm = chi2_at(&mm);
                hess[i][j] = (fpp - fpm - fmp + fmm) / (8.0 * h[i] * h[j]);
            }
        }
        // invert the 2x2 covariance scaled back to J^T W J
        let scale = fit.chi2 / fit.dof as f64;
        let c = &fit.covariance;
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let jtwj = [
            [c[1][1] / det * scale, -c[0][1] / det * scale],
            [-c[1][0] / det * scale, c[0][0] / det * scale],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let rel = (hess[i][j] - jtwj[i][j]).abs() / jtwj[i][j].abs().max(1e-12);
                assert!(rel < 0.05, "H[{i}][{j}]: {} vs {}", hess[i][j], jtwj[i][j]);
            }
        }
    }

    #[test]
    fn covariance_symmetric_psd() {
        let x: Vec<f64> = (0..40).map(|k| k as f64 * 0.3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 2.0 * (-v / 3.0).exp() + 0.5 + noise.sample(&mut rng))
            .collect();
        let problem = FitProblem {
            model: Box::new(|p, x| {
                Ok(x.iter().map(|v| p[0] * (-v / p[1]).exp() + p[2]).collect())
            }),
            weights: vec![1.0; y.len()],
            x,
            y,
            params: vec![
                ParamSpec::positive("a", 1.5),
                ParamSpec::positive("tau", 2.0),
                ParamSpec::free("c", 0.0),
            ],
        };
        let fit = least_squares(&problem).unwrap();
        let c = &fit.covariance;
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[i][j] - c[j][i]).abs() <= 1e-8 * c[i][i].max(c[j][j]).max(1e-30));
            }
        }
        // PSD via eigen surrogate: diagonal dominance of the Cholesky
        assert!(cholesky_solve(c, &[0.0, 0.0, 0.0]).is_some() || c[0][0] == 0.0);
    }
}
