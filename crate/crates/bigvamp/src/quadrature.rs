//! Gauss–Hermite quadrature for expectations under `N(0, 1)`.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem of the
//! probabilists' Hermite Jacobi matrix and are cached per node count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Initial node count of [`expect_adaptive`].
pub const START_NODES: usize = 61;
/// Largest node count tried by [`expect_adaptive`].
pub const MAX_NODES: usize = START_NODES * 16;
/// Relative-change tolerance between successive node counts.
pub const REL_TOL: f64 = 1e-6;

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn cache() -> &'static Mutex<HashMap<usize, Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights (summing to one) of the `n`-point rule for `N(0, 1)`.
pub fn gauss_hermite(n: usize) -> Rule {
    if let Some(r) = cache().lock().expect("quadrature cache poisoned").get(&n) {
        return r.clone();
    }
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (nodes, first) = tridiagonal_eigen(vec![0.0; n], off);
    let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(first).map(|(x, v0)| (x, v0 * v0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let rule: Rule = Arc::new((pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect()));
    cache().lock().expect("quadrature cache poisoned").insert(n, rule.clone());
    rule
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e`, with the first component of each unit eigenvector
/// (implicit QL with Wilkinson shifts, O(n²)).
fn tridiagonal_eigen(mut d: Vec<f64>, e: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = d.len();
    let mut e: Vec<f64> = e.into_iter().chain(std::iter::once(0.0)).collect();
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    for l in 0..n {
        for _ in 0..100 {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

/// `E[f(ξ)]`, `ξ ~ N(0, 1)`, with a fixed node count.
pub fn expect_n<F: Fn(f64) -> f64>(n: usize, f: F) -> f64 {
    let rule = gauss_hermite(n);
    rule.0.iter().zip(rule.1.iter()).map(|(&x, &w)| w * f(x)).sum()
}

/// Outcome of an adaptive expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub value: f64,
    pub rel_change: f64,
    pub nodes: usize,
    pub converged: bool,
}

/// Doubles the node count from [`START_NODES`] until successive estimates
/// agree to [`REL_TOL`] or [`MAX_NODES`] is reached.
pub fn expect_adaptive<F: Fn(f64) -> f64>(f: F) -> Adaptive {
    let mut n = START_NODES;
    let mut prev = expect_n(n, &f);
    loop {
        let n2 = n * 2;
        let cur = expect_n(n2, &f);
        let scale = prev.abs().max(cur.abs());
        let diff = (cur - prev).abs();
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        if rel < REL_TOL || diff < f64::MIN_POSITIVE {
            return Adaptive { value: cur, rel_change: rel, nodes: n2, converged: true };
        }
        if n2 >= MAX_NODES {
            return Adaptive { value: cur, rel_change: rel, nodes: n2, converged: false };
        }
        n = n2;
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        assert!((expect_n(61, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!(expect_n(61, |x| x).abs() < 1e-12);
        assert!((expect_n(61, |x| x * x) - 1.0).abs() < 1e-11);
        assert!((expect_n(61, |x| x.powi(4)) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn large_rules_are_exact_on_moments() {
        for n in [2, 3, 976] {
            let (x, w) = &*gauss_hermite(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let m2: f64 = x.iter().zip(w).map(|(x, w)| w * x * x).sum();
            assert!((m2 - 1.0).abs() < 1e-10, "n={n}: {m2}");
        }
        let (x, w) = &*gauss_hermite(2);
        assert!((x[1] - 1.0).abs() < 1e-14 && (w[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn adaptive_smooth_function() {
        // E[cos ξ] = e^{-1/2}.
        let a = expect_adaptive(|x| x.cos());
        assert!(a.converged);
        assert!((a.value - (-0.5f64).exp()).abs() < 1e-12);
    }
}
