//! Natural cubic spline over complex samples.

use num_complex::Complex64;

pub(crate) struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<Complex64>,
    /// Second derivatives at the knots.
    m2: Vec<Complex64>,
}

impl CubicSpline {
    /// `xs` must be strictly increasing and at least two points long.
    pub(crate) fn natural(xs: &[f64], ys: &[Complex64]) -> Self {
        let n = xs.len();
        debug_assert!(n >= 2 && ys.len() == n);
        let mut m2 = vec![Complex64::default(); n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![Complex64::default(); k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                let prev = rhs[i - 1];
                rhs[i] -= prev * w;
            }
            m2[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                let next = m2[i + 2];
                m2[i + 1] = (rhs[i] - next * upper[i]) / diag[i];
            }
        }
        CubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m2,
        }
    }

    /// Evaluate; outside the knot range the edge value is held.
    pub(crate) fn eval(&self, x: f64) -> Complex64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        self.ys[i] * a
            + self.ys[i + 1] * b
            + (self.m2[i] * (a * a * a - a) + self.m2[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }
}
