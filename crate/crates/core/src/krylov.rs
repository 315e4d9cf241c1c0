//! Restarted right-preconditioned GMRES on real vectors.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            restart: 60,
            max_iter: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with `x = M y`; `apply` is `A`, `precond` is `M`.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut total = 0;
    let mut rel = f64::INFINITY;
    while total < opts.max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol {
            return GmresOutcome {
                x,
                iterations: total,
                relative_residual: rel,
                converged: true,
            };
        }
        let m = opts.restart.min(opts.max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let zj = precond(&v[j]);
            let mut w = apply(&zj);
            z.push(zj);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            // one reorthogonalization pass
            for i in 0..=j {
                let c = dot(&w, &v[i]);
                h[i][j] += c;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= c * vk;
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= opts.tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / wn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, zk) in x.iter_mut().zip(&z[i]) {
                *xk += yi * zk;
            }
        }
        if used == 0 {
            break;
        }
        if rel <= opts.tol {
            let ax = apply(&x);
            let r: f64 = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
            rel = r / bnorm;
            if rel <= opts.tol * 10.0 {
                return GmresOutcome {
                    x,
                    iterations: total,
                    relative_residual: rel,
                    converged: true,
                };
            }
        }
    }
    GmresOutcome {
        x,
        iterations: total,
        relative_residual: rel,
        converged: rel <= opts.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 40;
        let a = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = 3.0 * x[i];
                    if i > 0 {
                        s -= x[i - 1];
                    }
                    if i + 1 < n {
                        s -= 0.5 * x[i + 1];
                    }
                    s
                })
                .collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = gmres(a, |v: &[f64]| v.to_vec(), &b, None, GmresOptions { restart: 7, ..Default::default() });
        assert!(out.converged);
        let r: f64 = a(&out.x).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(r < 1e-10);
    }

    #[test]
    fn preconditioner_reduces_iterations() {
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 10.0).collect();
        let a = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| diag[i] * x[i] + if i > 0 { 0.1 * x[i - 1] } else { 0.0 }).collect() };
        let b = vec![1.0; n];
        let plain = gmres(a, |v: &[f64]| v.to_vec(), &b, None, GmresOptions::default());
        let pre = gmres(a, |v: &[f64]| v.iter().zip(&diag).map(|(p, d)| p / d).collect(), &b, None, GmresOptions::default());
        assert!(plain.converged && pre.converged);
        assert!(pre.iterations < plain.iterations);
    }
}
