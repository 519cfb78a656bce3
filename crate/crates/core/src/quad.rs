//! Composite Gauss–Legendre quadrature.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed rule applied on a list of panels.
#[derive(Debug, Clone)]
pub struct Composite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<f64>,
}

impl Composite {
    /// `points`-point rule on each panel between consecutive `edges`.
    pub fn new(edges: Vec<f64>, points: usize) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[1] > w[0]));
        let (nodes, weights) = gauss_legendre(points);
        Self {
            nodes,
            weights,
            edges,
        }
    }

    /// Same rule with every panel split in two.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for w in self.edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        if let Some(&last) = self.edges.last() {
            edges.push(last);
        }
        Self {
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.edges.len().saturating_sub(1) * self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for w in self.edges.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            let mut s = 0.0;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                s += wt * f(mid + half * x);
            }
            total += half * s;
        }
        total
    }
}
