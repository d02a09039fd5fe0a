use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::QuadratureSpec;
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `order`-point rule with Newton iteration on the Legendre
    /// polynomial roots.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

fn cached_rule(order: usize) -> GaussLegendre {
    static CACHE: OnceLock<Mutex<HashMap<usize, GaussLegendre>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(order)
        .or_insert_with(|| GaussLegendre::new(order))
        .clone()
}

/// Axis-aligned rectangle `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x_lo < self.x_hi && self.y_lo < self.y_hi)
    }
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate_1d<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    assert!(a <= b, "integrate_1d needs a <= b, got [{a}, {b}]");
    if a == b {
        return Ok(0.0);
    }
    let rule = cached_rule(spec.order);
    let h = (b - a) / spec.panels as f64;
    let mut total = 0.0;
    for panel in 0..spec.panels {
        let lo = a + panel as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        for (t, w) in rule.nodes().iter().zip(rule.weights()) {
            let x = mid + half * t;
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    context: "integrate_1d",
                    x,
                    value: v,
                });
            }
            total += w * v * half;
        }
    }
    Ok(total)
}

/// Tensor-product Gauss–Legendre integral of `f` over `rect`.
pub fn integrate_2d<F>(mut f: F, rect: &Rect, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
{
    assert!(
        !rect.is_degenerate(),
        "integrate_2d needs a non-degenerate rectangle"
    );
    let rule = cached_rule(spec.order);
    let hx = (rect.x_hi - rect.x_lo) / spec.panels as f64;
    let hy = (rect.y_hi - rect.y_lo) / spec.panels as f64;
    let mut total = 0.0;
    for px in 0..spec.panels {
        let x_mid = rect.x_lo + (px as f64 + 0.5) * hx;
        for py in 0..spec.panels {
            let y_mid = rect.y_lo + (py as f64 + 0.5) * hy;
            for (tx, wx) in rule.nodes().iter().zip(rule.weights()) {
                let x = x_mid + 0.5 * hx * tx;
                for (ty, wy) in rule.nodes().iter().zip(rule.weights()) {
                    let y = y_mid + 0.5 * hy * ty;
                    let v = f(x, y);
                    if !v.is_finite() {
                        return Err(Error::NonFiniteSample {
                            context: "integrate_2d",
                            x,
                            value: v,
                        });
                    }
                    total += wx * wy * v * 0.25 * hx * hy;
                }
            }
        }
    }
    Ok(total)
}
