//! Restarted GMRES for the linear systems behind steady states.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` from the initial guess `x`, stopping when
/// `|b - A x| <= rtol |b|` or after `max_iter` operator applications.
pub fn gmres<F>(op: F, b: &[f64], x: &mut [f64], restart: usize, rtol: f64, max_iter: usize) -> GmresReport
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    loop {
        let ax = op(x);
        iterations += 1;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let beta = norm(&r);
        if beta <= rtol * bnorm || iterations >= max_iter {
            return GmresReport { iterations, relative_residual: beta / bnorm };
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = op(&v[k]);
            iterations += 1;
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= h[i][k] * b);
            }
            // One reorthogonalisation pass keeps the basis clean at tight tolerances.
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                h[i][k] += c;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let hk1 = norm(&w);
            if g[k + 1].abs() <= rtol * bnorm || iterations >= max_iter || hk1 == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / hk1).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for t in 0..n {
                x[t] += yj * v[j][t];
            }
        }
    }
}
