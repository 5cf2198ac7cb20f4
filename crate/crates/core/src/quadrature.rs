//! Shared quadrature kernels: Gauss-Legendre rules with runtime-computed nodes,
//! a tanh-sinh (double-exponential) rule for cells with endpoint singularities
//! like |cos v|^rho, and compensated summation.

/// Gauss-Legendre rule on [-1, 1]. Nodes are roots of the Legendre polynomial,
/// found by Newton iteration from the Chebyshev initial guess.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> GaussLegendre {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // evaluate P_n and P_n' by the three-term recurrence
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        acc.value() * half
    }
}

/// Tanh-sinh rule on (-1, 1): x_j = tanh(pi/2 sinh(jh)). Points cluster doubly
/// exponentially at the endpoints, so integrable endpoint singularities
/// converge at nearly spectral rate.
#[derive(Clone, Debug)]
pub struct TanhSinh {
    /// (abscissa in (-1,1), weight) pairs, symmetric about 0.
    points: Vec<(f64, f64)>,
}

impl TanhSinh {
    /// `step` is the trapezoidal spacing h; 0.25 gives ~31 points and ~1e-9
    /// relative accuracy on algebraic endpoint singularities.
    pub fn with_step(step: f64) -> TanhSinh {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut points = Vec::new();
        let mut j = 0i32;
        loop {
            let t = step * j as f64;
            let sh = half_pi * t.sinh();
            let x = sh.tanh();
            let w = step * half_pi * t.cosh() / sh.cosh().powi(2);
            if 1.0 - x.abs() < 1e-17 || w < 1e-300 {
                break;
            }
            if j == 0 {
                points.push((x, w));
            } else {
                points.push((x, w));
                points.push((-x, w));
            }
            j += 1;
        }
        TanhSinh { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = CompensatedSum::new();
        for &(x, w) in &self.points {
            let t = mid + half * x;
            // clamp strictly inside to protect singular endpoints
            if t > a && t < b {
                acc.add(w * f(t));
            }
        }
        acc.value() * half
    }
}

/// Neumaier compensated accumulator: deterministic, order-dependent, accurate.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> CompensatedSum {
        CompensatedSum { sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
