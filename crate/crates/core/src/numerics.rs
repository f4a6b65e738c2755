//! Small numerical kernels: Gauss-Legendre rules, monotone root finding,
//! Chebyshev nodes with barycentric weights, least-squares line fits.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if q == 0 {
        return (1.0, 0.0);
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(q: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(q);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    x.iter().zip(&w).map(|(&xi, &wi)| (m + h * xi, h * wi)).collect()
}

/// Solves `f(t) = 0` for increasing `f`, starting from `guess`.
/// Returns `(root, |f(root)|)`.
pub fn increasing_root(f: impl Fn(f64) -> f64, guess: f64, tol: f64) -> (f64, f64) {
    let mut step = 0.25;
    let (mut lo, mut hi);
    let f0 = f(guess);
    if f0 == 0.0 {
        return (guess, 0.0);
    }
    if f0 < 0.0 {
        lo = guess;
        hi = guess + step;
        while f(hi) < 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            if step > 1e9 {
                return (hi, f(hi).abs());
            }
        }
    } else {
        hi = guess;
        lo = guess - step;
        while f(lo) > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if step > 1e9 {
                return (lo, f(lo).abs());
            }
        }
    }
    // Illinois-modified regula falsi; robust and superlinear.
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut side = 0i32;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = (lo * fhi - hi * flo) / (fhi - flo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let fm = f(mid);
        if fm.abs() <= tol || (hi - lo) < 1e-15 * (1.0 + mid.abs()) {
            return (mid, fm.abs());
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    (mid, f(mid).abs())
}

/// Chebyshev points of the second kind on `[a, b]` and barycentric weights.
pub fn chebyshev_nodes(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    if m == 1 {
        return (vec![0.5 * (a + b)], vec![1.0]);
    }
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for j in 0..m {
        let t = (PI * j as f64 / (m - 1) as f64).cos();
        x.push(0.5 * (a + b) + 0.5 * (b - a) * t);
        let mut wj = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == m - 1 {
            wj *= 0.5;
        }
        w.push(wj);
    }
    (x, w)
}

/// Barycentric coefficients `c_j(s)` so that `p(s) = sum c_j p(x_j)`.
pub fn barycentric_coeffs(nodes: &[f64], weights: &[f64], s: f64, out: &mut Vec<f64>) {
    out.clear();
    for (j, &x) in nodes.iter().enumerate() {
        if s == x {
            out.extend((0..nodes.len()).map(|k| if k == j { 1.0 } else { 0.0 }));
            return;
        }
    }
    let mut denom = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        let t = w / (s - x);
        out.push(t);
        denom += t;
    }
    for c in out.iter_mut() {
        *c /= denom;
    }
}

/// Least-squares line `y = slope x + intercept` with coefficient of determination.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    LineFit { slope, intercept, r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in [1usize, 2, 5, 12, 40] {
            let rule = gauss_legendre_on(q, 0.0, 2.0);
            for deg in 0..(2 * q) {
                let got: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-11 * exact.max(1.0), "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn root_of_increasing_function() {
        let (r, res) = increasing_root(|t| t.powi(3) + t - 10.0, 0.0, 1e-14);
        assert!(res < 1e-12);
        assert!((r.powi(3) + r - 10.0).abs() < 1e-12);
        let (r, _) = increasing_root(|t| t - 1e5, 3.0, 1e-12);
        assert!((r - 1e5).abs() < 1e-6);
    }

    #[test]
    fn barycentric_is_exact_for_polynomials() {
        let (x, w) = chebyshev_nodes(9, -0.3, 0.7);
        let p = |s: f64| 1.0 - 2.0 * s + 3.0 * s.powi(5) - s.powi(8);
        let vals: Vec<f64> = x.iter().map(|&s| p(s)).collect();
        let mut c = Vec::new();
        for s in [-0.29, 0.0, 0.123, 0.7] {
            barycentric_coeffs(&x, &w, s, &mut c);
            let got: f64 = c.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!((got - p(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 2.0).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
