use super::EnergyError;
use crate::geometry::Point;

/// Gauss-Legendre rule applied per boundary edge.
///
/// The boundary is polygonal and the 1/r kernel is smooth on each edge for
/// strictly interior evaluation points, so a fixed-order rule per edge
/// converges spectrally. Nodes and weights are computed once at
/// construction by Newton iteration on the Legendre recurrence.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    points_per_edge: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub const DEFAULT_POINTS_PER_EDGE: usize = 32;

    pub fn new(points_per_edge: usize) -> Result<Self, EnergyError> {
        if points_per_edge < 2 {
            return Err(EnergyError::InvalidQuadrature {
                points_per_edge,
            });
        }
        let (nodes, weights) = gauss_legendre(points_per_edge);
        Ok(Quadrature {
            points_per_edge,
            nodes,
            weights,
        })
    }

    pub fn points_per_edge(&self) -> usize {
        self.points_per_edge
    }

    /// Integrates `f` along the segment from `a` to `b` with respect to arc
    /// length.
    pub fn integrate_edge<F: Fn(Point) -> f64>(&self, a: Point, b: Point, f: F) -> f64 {
        let half = (b - a) * 0.5;
        let mid = a + half;
        let jac = half.norm();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * jac
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::new(Self::DEFAULT_POINTS_PER_EDGE).expect("default order is valid")
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's approximation for the i-th root, refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // cos maps i=0 to the largest root; store ascending.
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}
