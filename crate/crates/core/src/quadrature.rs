//! Gauss rules on the interval, the reference triangle (collapsed/Duffy) and
//! the reference square.

/// Gauss–Legendre nodes and weights on `[-1, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, d)
}

/// Legendre polynomial values `P_0..=P_n` at `x`.
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for j in 2..=n {
        let jf = j as f64;
        let v = ((2.0 * jf - 1.0) * x * out[j - 1] - (jf - 1.0) * out[j - 2]) / jf;
        out.push(v);
    }
    out
}

/// A rule on a reference domain: points and weights.
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss rule on `[0, 1]` with `n` points.
pub fn unit_interval(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|t| 0.5 * t).collect(),
    )
}

/// Collapsed Gauss rule on the triangle `(0,0), (1,0), (0,1)`; exact for
/// total degree `2n - 2`.
pub fn reference_triangle(n: usize) -> Rule {
    let (x, w) = unit_interval(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &u) in x.iter().enumerate() {
        for (j, &v) in x.iter().enumerate() {
            points.push([u, v * (1.0 - u)]);
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    Rule { points, weights }
}

/// Tensor Gauss rule on `[0, 1]^2`; exact for degree `2n - 1` per variable.
pub fn reference_square(n: usize) -> Rule {
    let (x, w) = unit_interval(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &u) in x.iter().enumerate() {
        for (j, &v) in x.iter().enumerate() {
            points.push([u, v]);
            weights.push(w[i] * w[j]);
        }
    }
    Rule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // int_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        let n = 4;
        let rule = reference_triangle(n);
        for a in 0..=6 {
            for b in 0..=(6 - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn square_rule_weights_sum_to_one() {
        let rule = reference_square(3);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}
