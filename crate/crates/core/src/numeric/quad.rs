use std::sync::OnceLock;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Shared 32-point rule.
    pub fn gl32() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(32))
    }

    /// Shared 4-point rule.
    pub fn gl4() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(4))
    }

    /// Shared 8-point rule.
    pub fn gl8() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(8))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrates `N` functions at once over `[a, b]`; `f` may fail.
    pub fn try_integrate_n<const N: usize, E, F>(&self, mut f: F, a: f64, b: f64) -> Result<[f64; N], E>
    where
        F: FnMut(f64) -> Result<[f64; N], E>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let y = f(mid + half * x)?;
            for k in 0..N {
                acc[k] += w * y[k];
            }
        }
        for v in acc.iter_mut() {
            *v *= half;
        }
        Ok(acc)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Cell boundaries on `[a, b]` graded toward a singular point `sing > b`:
/// every cell is no longer than its distance to `sing`, and no longer than
/// `(b - a) / min_cells`.
pub fn graded_cells(a: f64, b: f64, sing: f64, min_cells: usize) -> Vec<f64> {
    debug_assert!(a <= b);
    let max_len = (b - a) / min_cells.max(1) as f64;
    let mut pts = vec![b];
    let mut x = b;
    while x > a {
        let dist = (sing - x).max(0.0);
        let len = if dist > 0.0 { dist.min(max_len) } else { max_len };
        let next = if x - len <= a + 1e-3 * len { a } else { x - len };
        pts.push(next);
        x = next;
    }
    pts.reverse();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16, 32] {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::gl8();
        // degree 15 is exact for 8 nodes
        let v = g.integrate(|x| x.powi(14) + x.powi(15), 0.0, 1.0);
        assert!((v - (1.0 / 15.0 + 1.0 / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn log_singularity_with_grading() {
        // ∫_0^{1-d} 1/(1-x) dx = ln(1/d)
        let b = 1.0 - 1e-9;
        let d = 1.0 - b;
        let cells = graded_cells(0.0, b, 1.0, 4);
        let g = GaussLegendre::gl32();
        let v: f64 = cells.windows(2).map(|c| g.integrate(|x| 1.0 / (1.0 - x), c[0], c[1])).sum();
        // nodes next to the pole lose digits in 1 - x, so the floor is well above eps
        assert!((v - (1.0 / d).ln()).abs() < 1e-8 * (1.0 / d).ln(), "{v}");
    }

    #[test]
    fn graded_cells_cover_interval() {
        let c = graded_cells(2.0, 3.0, 10.0, 4);
        assert_eq!(c.first(), Some(&2.0));
        assert_eq!(c.last(), Some(&3.0));
        assert_eq!(c.len(), 5);
    }
}
