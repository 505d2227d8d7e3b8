//! Preconditioned conjugate gradients and BiCGSTAB on padded grid vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::assemble::Stencil;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub iterations: usize,
    /// Relative residual `‖b − Mx‖₂ / ‖b‖₂` recomputed after the solve.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Iteration controls: stop at `tol`, accept anything at or below `accept`.
#[derive(Clone, Copy, Debug)]
pub struct KrylovControl {
    pub tol: f64,
    pub accept: f64,
    pub max_iter: usize,
}

/// Iterations without a new best residual before giving up early.
const STALL: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn true_residual(st: &Stencil, b: &[f64], x: &[f64]) -> f64 {
    let bn = norm(b);
    if bn == 0.0 {
        return norm(x);
    }
    let mut r = vec![0.0; b.len()];
    st.residual(b, x, &mut r);
    norm(&r) / bn
}

fn finish(
    method: &str,
    st: &Stencil,
    b: &[f64],
    x: &[f64],
    iterations: usize,
    history: Vec<f64>,
    ctl: &KrylovControl,
) -> Result<SolveStats> {
    let residual = true_residual(st, b, x);
    if residual <= ctl.accept && residual.is_finite() {
        Ok(SolveStats {
            method: method.to_string(),
            iterations,
            residual,
            history,
        })
    } else {
        Err(Error::NumericalFailure {
            iterations,
            residual,
            history,
        })
    }
}

pub fn pcg(
    st: &Stencil,
    b: &[f64],
    x: &mut [f64],
    ctl: &KrylovControl,
    mut precond: impl FnMut(&[f64], &mut [f64]),
) -> Result<SolveStats> {
    let n = b.len();
    x.fill(0.0);
    let bn = norm(b);
    if bn == 0.0 {
        return finish("multigrid-pcg", st, b, x, 0, vec![], ctl);
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let (mut best, mut since_best) = (f64::INFINITY, 0);
    let mut it = 0;
    while it < ctl.max_iter {
        it += 1;
        st.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let res = norm(&r) / bn;
        history.push(res);
        if res <= ctl.tol || !res.is_finite() {
            break;
        }
        if res < best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL {
                break;
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    finish("multigrid-pcg", st, b, x, it, history, ctl)
}

pub fn bicgstab(
    st: &Stencil,
    b: &[f64],
    x: &mut [f64],
    ctl: &KrylovControl,
    mut precond: impl FnMut(&[f64], &mut [f64]),
) -> Result<SolveStats> {
    let n = b.len();
    x.fill(0.0);
    let bn = norm(b);
    if bn == 0.0 {
        return finish("multigrid-bicgstab", st, b, x, 0, vec![], ctl);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = Vec::new();
    let (mut best, mut since_best) = (f64::INFINITY, 0);
    let mut it = 0;
    while it < ctl.max_iter {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        precond(&p, &mut p_hat);
        st.apply(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        // r becomes s.
        for k in 0..n {
            r[k] -= alpha * v[k];
        }
        if norm(&r) / bn <= ctl.tol {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            history.push(norm(&r) / bn);
            break;
        }
        precond(&r, &mut s_hat);
        st.apply(&s_hat, &mut t);
        omega = dot(&t, &r) / dot(&t, &t);
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] -= omega * t[k];
        }
        let res = norm(&r) / bn;
        history.push(res);
        if res <= ctl.tol || !res.is_finite() {
            break;
        }
        if res < best {
            best = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL {
                break;
            }
        }
    }
    finish("multigrid-bicgstab", st, b, x, it, history, ctl)
}
