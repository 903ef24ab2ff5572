//! Unconstrained minimizers selected by name.

use nalgebra::{DMatrix, DVector};

/// Stopping rules shared by all optimizers.
#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Converged when the infinity norm of the gradient drops below this.
    pub gtol: f64,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub fx: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Infinity norm of the finite-difference gradient at `x`.
    pub grad_inf: f64,
    /// Objective value after each accepted iteration, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

pub trait Optimizer: Send + Sync {
    fn name(&self) -> &'static str;
    fn minimize(
        &self,
        f: &dyn Fn(&DVector<f64>) -> f64,
        x0: DVector<f64>,
        opts: &OptimOptions,
    ) -> OptimResult;
}

/// Registered optimizer names; the first is the default.
pub fn optimizer_names() -> &'static [&'static str] {
    &["bfgs", "nelder-mead"]
}

pub fn optimizer(name: &str) -> Option<Box<dyn Optimizer>> {
    match name {
        "bfgs" => Some(Box::new(Bfgs)),
        "nelder-mead" => Some(Box::new(NelderMead)),
        _ => None,
    }
}

/// Relative step of the central-difference gradient.
pub const FD_STEP: f64 = 1e-5;

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central-difference gradient with step `FD_STEP * max(1, |x_i|)`.
pub fn fd_gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = FD_STEP * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = finite(f(&xp));
        xp[i] = x[i] - h;
        let fm = finite(f(&xp));
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian built from gradient differences.
pub fn fd_hessian(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DMatrix<f64> {
    let k = x.len();
    let mut h = DMatrix::zeros(k, k);
    let mut xp = x.clone();
    for i in 0..k {
        let step = 1e-4 * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let gp = fd_gradient(f, &xp);
        xp[i] = x[i] - step;
        let gm = fd_gradient(f, &xp);
        xp[i] = x[i];
        h.set_column(i, &((gp - gm) / (2.0 * step)));
    }
    (&h + h.transpose()) * 0.5
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quasi-Newton BFGS with Armijo backtracking and a capped step.
pub struct Bfgs;

/// Largest change of any coordinate in one line-search trial.
const MAX_STEP: f64 = 5.0;

impl Optimizer for Bfgs {
    fn name(&self) -> &'static str {
        "bfgs"
    }

    fn minimize(
        &self,
        f: &dyn Fn(&DVector<f64>) -> f64,
        x0: DVector<f64>,
        opts: &OptimOptions,
    ) -> OptimResult {
        let k = x0.len();
        let mut x = x0;
        let mut fx = finite(f(&x));
        let mut g = fd_gradient(f, &x);
        let mut hinv = DMatrix::<f64>::identity(k, k);
        let mut trace = vec![fx];
        let mut n_iter = 0;
        let mut fresh = true;
        while n_iter < opts.max_iter && inf_norm(&g) >= opts.gtol {
            let mut p = -(&hinv * &g);
            let mut slope = g.dot(&p);
            if !(slope < 0.0) {
                hinv = DMatrix::identity(k, k);
                p = -g.clone();
                slope = g.dot(&p);
                fresh = true;
            }
            let pmax = inf_norm(&p);
            if pmax > MAX_STEP {
                p *= MAX_STEP / pmax;
                slope = g.dot(&p);
            }
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-12 {
                let xn = &x + &p * step;
                let fnew = finite(f(&xn));
                if fnew <= fx + 1e-4 * step * slope {
                    accepted = Some((xn, fnew));
                    break;
                }
                step *= 0.5;
            }
            let Some((xn, fnew)) = accepted else {
                if fresh {
                    break;
                }
                hinv = DMatrix::identity(k, k);
                fresh = true;
                continue;
            };
            n_iter += 1;
            let gn = fd_gradient(f, &xn);
            let s = &xn - &x;
            let y = &gn - &g;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                if fresh {
                    hinv = DMatrix::identity(k, k) * (sy / y.dot(&y));
                }
                let rho = 1.0 / sy;
                let hy = &hinv * &y;
                let yhy = y.dot(&hy);
                hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                    - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                fresh = false;
            }
            x = xn;
            fx = fnew;
            g = gn;
            trace.push(fx);
        }
        let grad_inf = inf_norm(&g);
        OptimResult {
            converged: grad_inf < opts.gtol,
            x,
            fx,
            n_iter,
            grad_inf,
            trace,
        }
    }
}

/// Derivative-free simplex search; convergence is still judged on the gradient.
pub struct NelderMead;

impl Optimizer for NelderMead {
    fn name(&self) -> &'static str {
        "nelder-mead"
    }

    fn minimize(
        &self,
        f: &dyn Fn(&DVector<f64>) -> f64,
        x0: DVector<f64>,
        opts: &OptimOptions,
    ) -> OptimResult {
        let k = x0.len();
        let eval = |x: &DVector<f64>| finite(f(x));
        let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(k + 1);
        let f0 = eval(&x0);
        simplex.push((x0.clone(), f0));
        for i in 0..k {
            let mut v = x0.clone();
            v[i] += 0.5 * x0[i].abs().max(1.0);
            let fv = eval(&v);
            simplex.push((v, fv));
        }
        let mut trace = vec![f0];
        let mut n_iter = 0;
        // the simplex loop runs more iterations than BFGS needs; each is cheap
        let budget = opts.max_iter * 4;
        while n_iter < budget {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN"));
            let best = simplex[0].1;
            let worst = simplex[k].1;
            let size = simplex
                .iter()
                .map(|(v, _)| inf_norm(&(v - &simplex[0].0)))
                .fold(0.0, f64::max);
            if (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) && size < 1e-8 {
                break;
            }
            n_iter += 1;
            let centroid = simplex[..k]
                .iter()
                .fold(DVector::zeros(k), |acc, (v, _)| acc + v)
                / k as f64;
            let xw = simplex[k].0.clone();
            let xr = &centroid + (&centroid - &xw);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = &centroid + (&xr - &centroid) * 2.0;
                let fe = eval(&xe);
                simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[k - 1].1 {
                simplex[k] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst {
                    let xc = &centroid + (&xr - &centroid) * 0.5;
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = &centroid + (&xw - &centroid) * 0.5;
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < worst.min(fr) {
                    simplex[k] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let v = &x0 + (&item.0 - &x0) * 0.5;
                        let fv = eval(&v);
                        *item = (v, fv);
                    }
                }
            }
            let b = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            if b < *trace.last().expect("non-empty") {
                trace.push(b);
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN"));
        let (x, fx) = simplex.swap_remove(0);
        let grad_inf = inf_norm(&fd_gradient(f, &x));
        OptimResult {
            converged: grad_inf < opts.gtol,
            x,
            fx,
            n_iter,
            grad_inf,
            trace,
        }
    }
}
