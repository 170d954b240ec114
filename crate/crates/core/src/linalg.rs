//! Restarted, right-preconditioned GMRES on complex vectors.

use crate::torus::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` with `A M^{-1} y = b`, `x = M^{-1} y`, starting from `x`.
pub fn gmres(
    mut apply: impl FnMut(&[C64]) -> Vec<C64>,
    mut precond: impl FnMut(&[C64]) -> Vec<C64>,
    b: &[C64],
    x: &mut [C64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let bnorm = norm(b).max(1e-300);
    let n = b.len();
    let mut total = 0;
    loop {
        let ax = apply(x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= rel_tol || total >= max_iter {
            return GmresOutcome {
                iterations: total,
                relative_residual: beta / bnorm,
                converged: beta / bnorm <= rel_tol,
            };
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut z: Vec<Vec<C64>> = Vec::new();
        let mut h = vec![vec![C64::new(0.0, 0.0); restart]; restart + 1];
        let mut cs = vec![C64::new(0.0, 0.0); restart];
        let mut sn = vec![C64::new(0.0, 0.0); restart];
        let mut g = vec![C64::new(0.0, 0.0); restart + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        while k < restart && total < max_iter {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik = dot(&v[i], &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = C64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let a = h[k][k];
            let bb = h[k + 1][k];
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[k] = C64::new(1.0, 0.0);
                sn[k] = C64::new(0.0, 0.0);
            } else {
                cs[k] = a / den;
                sn[k] = bb / den;
            }
            h[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            h[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            total += 1;
            k += 1;
            let done = g[k].norm() / bnorm <= rel_tol * 0.5 || wn == 0.0;
            if wn > 0.0 {
                v.push(w.iter().map(|x| x / wn).collect());
            }
            if done {
                break;
            }
        }
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (i, yi) in y.iter().enumerate() {
                s += yi * z[i][j];
            }
            x[j] += s;
        }
    }
}
