//! Marginal density families on closed intervals, the power rate, product
//! distributions with the Delta field, the five power-rate conditions, and
//! first-order stochastic dominance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_1d, QuadratureSpec, Rect, ToleranceConfig};

const NORMALIZATION_SPEC: QuadratureSpec = QuadratureSpec {
    order: 16,
    panels: 128,
};
/// Resolution of the cached cumulative table used by `cdf` for kinds without
/// a closed-form antiderivative.
const CDF_PANELS: usize = 512;

/// Parametric density shape, prior to normalization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    /// Constant on the support.
    Uniform,
    /// `a * x^b`. The prefactor is cosmetic since densities are normalized.
    Power { a: f64, b: f64 },
    /// `lambda * exp(-lambda * x)` truncated to the support.
    TruncatedExponential { lambda: f64 },
    /// `h1(x) * exp(h2(x))` with `h1`, `h2` given by their coefficient lists
    /// (lowest degree first).
    PolyExp {
        coeffs: Vec<f64>,
        exp_coeffs: Vec<f64>,
    },
    /// Pointwise samples `(x, pdf)` joined by a C1 monotone-x cubic Hermite
    /// interpolant.
    Tabulated { samples: Vec<(f64, f64)> },
}

/// A normalized probability density on a closed interval `[lo, hi]` with
/// `lo >= 0`. The pdf is positive and bounded on the support and
/// differentiable in the interior.
#[derive(Debug, Clone)]
pub struct Density1D {
    kind: DensityKind,
    lo: f64,
    hi: f64,
    /// Multiplier that makes the raw shape integrate to one.
    norm: f64,
    /// Cumulative mass at `CDF_PANELS + 1` equally spaced nodes.
    cdf_table: Vec<f64>,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
}

impl Density1D {
    pub fn new(kind: DensityKind, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Invalid {
                what: "density support",
                reason: format!("need 0 <= lo < hi, got [{lo}, {hi}]"),
            });
        }
        if let DensityKind::Tabulated { samples } = &kind {
            if samples.len() < 4 {
                return Err(Error::Invalid {
                    what: "tabulated density",
                    reason: "need at least 4 samples".into(),
                });
            }
            let mut prev = f64::NEG_INFINITY;
            for &(x, f) in samples {
                if x <= prev {
                    return Err(Error::Invalid {
                        what: "tabulated density",
                        reason: "sample abscissae must be strictly increasing".into(),
                    });
                }
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::Invalid {
                        what: "tabulated density",
                        reason: format!("pdf sample at x={x} is not positive and finite"),
                    });
                }
                prev = x;
            }
            let first = samples.first().unwrap().0;
            let last = samples.last().unwrap().0;
            if (first - lo).abs() > 1e-9 * (hi - lo) || (last - hi).abs() > 1e-9 * (hi - lo) {
                return Err(Error::Invalid {
                    what: "tabulated density",
                    reason: "samples must span the declared support".into(),
                });
            }
        }
        let mut density = Self {
            kind,
            lo,
            hi,
            norm: 1.0,
            cdf_table: Vec::new(),
        };
        let raw_mass = integrate_1d(|x| density.raw_pdf(x), lo, hi, &NORMALIZATION_SPEC)?;
        if !(raw_mass > 0.0 && raw_mass.is_finite()) {
            return Err(Error::Invalid {
                what: "density",
                reason: format!("shape has non-positive mass {raw_mass} on [{lo}, {hi}]"),
            });
        }
        density.norm = 1.0 / raw_mass;

        // Positivity spot check on a fine grid.
        for k in 0..=256 {
            let x = lo + (hi - lo) * k as f64 / 256.0;
            let f = density.pdf(x);
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::Invalid {
                    what: "density",
                    reason: format!("pdf not positive and bounded at x={x}: {f}"),
                });
            }
        }

        // Cumulative table for cdf queries.
        let mut table = Vec::with_capacity(CDF_PANELS + 1);
        table.push(0.0);
        let h = (hi - lo) / CDF_PANELS as f64;
        let panel_spec = QuadratureSpec::new(8, 1);
        let mut acc = 0.0;
        for k in 0..CDF_PANELS {
            let a = lo + k as f64 * h;
            acc += integrate_1d(|x| density.pdf(x), a, a + h, &panel_spec)?;
            table.push(acc);
        }
        density.cdf_table = table;
        Ok(density)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DensityKind::Uniform, lo, hi)
    }

    pub fn power(a: f64, b: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DensityKind::Power { a, b }, lo, hi)
    }

    pub fn truncated_exponential(lambda: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DensityKind::TruncatedExponential { lambda }, lo, hi)
    }

    pub fn poly_exp(coeffs: Vec<f64>, exp_coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DensityKind::PolyExp { coeffs, exp_coeffs }, lo, hi)
    }

    /// Tabulates `shape` at `n` equally spaced points on `[lo, hi]`.
    pub fn tabulated_from_fn<F: Fn(f64) -> f64>(
        shape: F,
        n: usize,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                (x, shape(x))
            })
            .collect();
        Self::new(DensityKind::Tabulated { samples }, lo, hi)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn raw_pdf(&self, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::Power { a, b } => a * x.powf(*b),
            DensityKind::TruncatedExponential { lambda } => lambda * (-lambda * x).exp(),
            DensityKind::PolyExp { coeffs, exp_coeffs } => {
                poly_eval(coeffs, x) * poly_eval(exp_coeffs, x).exp()
            }
            DensityKind::Tabulated { samples } => hermite_eval(samples, x).0,
        }
    }

    fn raw_pdf_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Uniform => 0.0,
            DensityKind::Power { a, b } => a * b * x.powf(b - 1.0),
            DensityKind::TruncatedExponential { lambda } => -lambda * lambda * (-lambda * x).exp(),
            DensityKind::PolyExp { coeffs, exp_coeffs } => {
                let h1 = poly_eval(coeffs, x);
                let h1p = poly_derivative_eval(coeffs, x);
                let h2p = poly_derivative_eval(exp_coeffs, x);
                (h1p + h1 * h2p) * poly_eval(exp_coeffs, x).exp()
            }
            DensityKind::Tabulated { .. } => {
                // Central finite difference, step scaled by the support width.
                let h = 1e-6 * (self.hi - self.lo);
                let a = (x - h).max(self.lo);
                let b = (x + h).min(self.hi);
                (self.raw_pdf(b) - self.raw_pdf(a)) / (b - a)
            }
        }
    }

    /// Normalized pdf; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        self.norm * self.raw_pdf(x)
    }

    /// Derivative of the normalized pdf (one-sided at the endpoints for the
    /// tabulated kind).
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        self.norm * self.raw_pdf_derivative(x)
    }

    /// CDF, clamped to `[0, 1]`; 0 below and 1 above the support.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        match &self.kind {
            DensityKind::Uniform => (x - self.lo) / (self.hi - self.lo),
            DensityKind::Power { a, b } => {
                let anti = |t: f64| {
                    if (*b + 1.0).abs() < 1e-12 {
                        a * t.ln()
                    } else {
                        a * t.powf(b + 1.0) / (b + 1.0)
                    }
                };
                (self.norm * (anti(x) - anti(self.lo))).clamp(0.0, 1.0)
            }
            DensityKind::TruncatedExponential { lambda } => {
                let anti = |t: f64| -(-lambda * t).exp();
                (self.norm * (anti(x) - anti(self.lo))).clamp(0.0, 1.0)
            }
            _ => {
                // Cached cumulative table plus a local correction integral.
                let h = (self.hi - self.lo) / CDF_PANELS as f64;
                let k = (((x - self.lo) / h).floor() as usize).min(CDF_PANELS - 1);
                let a = self.lo + k as f64 * h;
                let local =
                    integrate_1d(|t| self.pdf(t), a, x, &QuadratureSpec::new(8, 1)).unwrap_or(0.0);
                (self.cdf_table[k] + local).clamp(0.0, 1.0)
            }
        }
    }

    /// Power rate `x * f'(x) / f(x)` at an interior point of the support.
    pub fn power_rate(&self, x: f64) -> Result<f64> {
        if !(x > self.lo && x < self.hi) && !(self.lo == 0.0 && x == 0.0) {
            return Err(Error::OutOfDomain {
                what: "power_rate point",
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(match &self.kind {
            DensityKind::Uniform => 0.0,
            DensityKind::Power { b, .. } => *b,
            DensityKind::TruncatedExponential { lambda } => -lambda * x,
            DensityKind::PolyExp { coeffs, exp_coeffs } => {
                x * (poly_derivative_eval(coeffs, x) / poly_eval(coeffs, x)
                    + poly_derivative_eval(exp_coeffs, x))
            }
            DensityKind::Tabulated { .. } => x * self.raw_pdf_derivative(x) / self.raw_pdf(x),
        })
    }
}

/// C1 cubic Hermite interpolation through `(x, f)` samples with
/// finite-difference tangents. Returns `(value, derivative)`.
fn hermite_eval(samples: &[(f64, f64)], x: f64) -> (f64, f64) {
    let n = samples.len();
    let x = x.clamp(samples[0].0, samples[n - 1].0);
    let seg = match samples.partition_point(|&(sx, _)| sx <= x) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let (x0, y0) = samples[seg];
    let (x1, y1) = samples[seg + 1];
    let h = x1 - x0;
    let slope = |i: usize, j: usize| (samples[j].1 - samples[i].1) / (samples[j].0 - samples[i].0);
    let m0 = if seg == 0 {
        slope(0, 1)
    } else {
        slope(seg - 1, seg + 1)
    };
    let m1 = if seg + 2 >= n {
        slope(seg, seg + 1)
    } else {
        slope(seg, seg + 2)
    };
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1;
    let deriv = ((6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * h * m0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * h * m1)
        / h;
    (value, deriv)
}

/// Independent product of two marginals over the valuation rectangle
/// `V = [x_A, x_B] x [y_A, y_C]`.
#[derive(Debug, Clone)]
pub struct ProductDistribution {
    dx: Density1D,
    dy: Density1D,
}

impl ProductDistribution {
    pub fn new(dx: Density1D, dy: Density1D) -> Result<Self> {
        let (xlo, xhi) = dx.support();
        let (ylo, yhi) = dy.support();
        if !(xlo < xhi && ylo < yhi) {
            return Err(Error::Invalid {
                what: "product distribution",
                reason: "degenerate valuation rectangle".into(),
            });
        }
        Ok(Self { dx, dy })
    }

    pub fn iid(d: Density1D) -> Result<Self> {
        Self::new(d.clone(), d)
    }

    pub fn dx(&self) -> &Density1D {
        &self.dx
    }

    pub fn dy(&self) -> &Density1D {
        &self.dy
    }

    pub fn rect(&self) -> Rect {
        let (xlo, xhi) = self.dx.support();
        let (ylo, yhi) = self.dy.support();
        Rect::new(xlo, xhi, ylo, yhi)
    }

    /// Joint density `f(x, y) = f1(x) f2(y)`.
    pub fn joint_pdf(&self, x: f64, y: f64) -> f64 {
        self.dx.pdf(x) * self.dy.pdf(y)
    }

    /// Whether the two marginals were built from the same specification.
    pub fn is_iid(&self) -> bool {
        self.dx.kind() == self.dy.kind() && self.dx.support() == self.dy.support()
    }

    /// The field `3 f1 f2 + x f1' f2 + y f2' f1` whose sign determines how
    /// interior buyer utility moves seller revenue.
    pub fn delta(&self, x: f64, y: f64) -> Result<f64> {
        let r = self.rect();
        if x < r.x_lo || x > r.x_hi || y < r.y_lo || y > r.y_hi {
            return Err(Error::OutOfDomain {
                what: "delta x",
                value: x,
                lo: r.x_lo,
                hi: r.x_hi,
            });
        }
        Ok(3.0 * self.dx.pdf(x) * self.dy.pdf(y)
            + x * self.dx.pdf_derivative(x) * self.dy.pdf(y)
            + y * self.dy.pdf_derivative(y) * self.dx.pdf(x))
    }

    /// `delta` via the factored form `f * (3 + PR1 + PR2)`; used as an
    /// algebraic cross-check of `delta`.
    pub fn delta_factored(&self, x: f64, y: f64) -> Result<f64> {
        let pr = self.dx.power_rate(x)? + self.dy.power_rate(y)?;
        Ok(self.joint_pdf(x, y) * (3.0 + pr))
    }
}

/// Outcome of a grid-certified condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition_id: u8,
    pub holds: bool,
    /// Minimal slack of the defining inequality; negative means violated.
    pub worst_margin: f64,
    /// Grid point attaining the worst margin (x for marginal conditions).
    pub worst_point: (f64, f64),
}

/// Interior tensor grid used by the condition checkers.
fn interior_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
        .collect()
}

/// Evaluates Conditions 1-5 on an `grid_n x grid_n` tensor grid and reports
/// the worst margin.
///
/// * Condition 1: `PR(f1) + PR(f2) <= -3` everywhere.
/// * Condition 2: `PR(f1) + PR(f2) >= -3` everywhere.
/// * Condition 3: both power rates constant (spread at most `abs_tol`).
/// * Condition 4: `-2 <= PR(f1) <= y_A f2(y_A) - 2` and symmetrically.
/// * Condition 5: both power rates weakly monotone (no sign change in the
///   discrete differences beyond `slope_tol`).
pub fn check_condition(
    d: &ProductDistribution,
    id: u8,
    grid_n: usize,
    tol: &ToleranceConfig,
) -> Result<ConditionReport> {
    assert!(
        grid_n >= 16,
        "condition grid must have at least 16 points per axis"
    );
    assert!((1..=5).contains(&id), "condition id must be in 1..=5");
    let r = d.rect();
    let xs = interior_grid(r.x_lo, r.x_hi, grid_n);
    let ys = interior_grid(r.y_lo, r.y_hi, grid_n);
    let prx: Vec<f64> = xs
        .iter()
        .map(|&x| d.dx().power_rate(x))
        .collect::<Result<_>>()?;
    let pry: Vec<f64> = ys
        .iter()
        .map(|&y| d.dy().power_rate(y))
        .collect::<Result<_>>()?;

    let mut worst = f64::INFINITY;
    let mut worst_point = (xs[0], ys[0]);
    let mut consider = |margin: f64, point: (f64, f64)| {
        if margin < worst {
            worst = margin;
            worst_point = point;
        }
    };

    match id {
        1 | 2 => {
            for (i, &px) in prx.iter().enumerate() {
                for (j, &py) in pry.iter().enumerate() {
                    let sum = px + py;
                    let margin = if id == 1 { -3.0 - sum } else { sum + 3.0 };
                    consider(margin, (xs[i], ys[j]));
                }
            }
        }
        3 => {
            for (pr, ts) in [(&prx, &xs), (&pry, &ys)] {
                let max = pr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = pr.iter().cloned().fold(f64::INFINITY, f64::min);
                let arg = pr.iter().position(|&v| v == max || v == min).unwrap_or(0);
                consider(tol.abs_tol - (max - min), (ts[arg], ts[arg]));
            }
        }
        4 => {
            let (ylo, _) = d.dy().support();
            let (xlo, _) = d.dx().support();
            let ub_x = ylo * d.dy().pdf(ylo) - 2.0;
            let ub_y = xlo * d.dx().pdf(xlo) - 2.0;
            for (i, &px) in prx.iter().enumerate() {
                consider((px + 2.0).min(ub_x - px), (xs[i], r.y_lo));
            }
            for (j, &py) in pry.iter().enumerate() {
                consider((py + 2.0).min(ub_y - py), (r.x_lo, ys[j]));
            }
        }
        5 => {
            for (pr, ts) in [(&prx, &xs), (&pry, &ys)] {
                let diffs: Vec<f64> = pr.windows(2).map(|w| w[1] - w[0]).collect();
                let min_up = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
                let min_down = diffs.iter().map(|v| -v).fold(f64::INFINITY, f64::min);
                // Monotone in either direction: the better of the two signs.
                let margin = min_up.max(min_down) + tol.slope_tol;
                let arg = diffs
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                consider(margin, (ts[arg], ts[arg]));
            }
        }
        _ => unreachable!(),
    }

    Ok(ConditionReport {
        condition_id: id,
        holds: worst >= -tol.abs_tol,
        worst_margin: worst,
        worst_point,
    })
}

/// First-order stochastic dominance: `true` iff `G(x) <= F(x)` at every grid
/// point of the union interval, strictly below at some point.
pub fn fosd_dominates(g: &Density1D, f: &Density1D, grid_n: usize, tol: &ToleranceConfig) -> bool {
    let (glo, ghi) = g.support();
    let (flo, fhi) = f.support();
    let lo = glo.min(flo);
    let hi = ghi.max(fhi);
    let mut strict = false;
    for k in 0..=grid_n {
        let x = lo + (hi - lo) * k as f64 / grid_n as f64;
        let gv = g.cdf(x);
        let fv = f.cdf(x);
        if gv > fv + tol.abs_tol {
            return false;
        }
        if gv < fv - tol.abs_tol {
            strict = true;
        }
    }
    strict
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn constructors_normalize_every_kind() {
        let spec = QuadratureSpec::default();
        let densities = vec![
            Density1D::uniform(0.0, 1.0).unwrap(),
            Density1D::power(7.0, -2.0, 1.0, 2.0).unwrap(),
            Density1D::truncated_exponential(1.5, 0.5, 3.0).unwrap(),
            Density1D::poly_exp(vec![1.0, 0.0, 1.0], vec![0.0, 0.5], 0.5, 2.0).unwrap(),
            Density1D::tabulated_from_fn(|x| 2.0 / (x * x), 256, 1.0, 2.0).unwrap(),
        ];
        for d in densities {
            let (lo, hi) = d.support();
            let mass = integrate_1d(|x| d.pdf(x), lo, hi, &spec).unwrap();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn power_rate_examples() {
        let u = Density1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.power_rate(0.37).unwrap(), 0.0);

        let p = Density1D::power(5.0, -2.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(p.power_rate(1.31).unwrap(), -2.0, epsilon = 1e-12);
        let p2 = Density1D::power(1.0, 1.7, 0.5, 1.5).unwrap();
        assert_abs_diff_eq!(p2.power_rate(0.9).unwrap(), 1.7, epsilon = 1e-12);

        let e = Density1D::truncated_exponential(1.0, 1.0, 3.0).unwrap();
        assert_abs_diff_eq!(e.power_rate(2.0).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn power_rate_outside_support_is_domain_error() {
        let u = Density1D::uniform(1.0, 2.0).unwrap();
        assert!(u.power_rate(0.5).is_err());
        assert!(u.power_rate(2.0).is_err());
    }

    #[test]
    fn tabulated_power_rate_tracks_analytic() {
        let analytic = Density1D::power(2.0, -2.0, 1.0, 2.0).unwrap();
        let tab = Density1D::tabulated_from_fn(|x| 2.0 / (x * x), 256, 1.0, 2.0).unwrap();
        for k in 1..40 {
            let x = 1.0 + k as f64 / 41.0;
            let want = analytic.power_rate(x).unwrap();
            let got = tab.power_rate(x).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-4);
        }
    }

    #[test]
    fn delta_is_three_f_for_uniform_squared() {
        let d = ProductDistribution::iid(Density1D::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d.delta(0.3, 0.8).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.delta(0.9, 0.1).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_negative_for_inverse_square_pair() {
        let d = ProductDistribution::iid(Density1D::power(2.0, -2.0, 1.0, 2.0).unwrap()).unwrap();
        // PR = -2 for both marginals, so delta = -f < 0.
        for (x, y) in [(1.2, 1.4), (1.8, 1.1), (1.5, 1.5)] {
            let f = d.joint_pdf(x, y);
            assert_abs_diff_eq!(d.delta(x, y).unwrap(), -f, epsilon = 1e-10);
            assert!(d.delta(x, y).unwrap() < 0.0);
        }
    }

    #[test]
    fn delta_matches_factored_form() {
        let pairs = vec![
            ProductDistribution::iid(Density1D::uniform(0.2, 1.7).unwrap()).unwrap(),
            ProductDistribution::new(
                Density1D::power(1.0, -1.5, 1.0, 2.5).unwrap(),
                Density1D::truncated_exponential(0.8, 0.5, 2.0).unwrap(),
            )
            .unwrap(),
            ProductDistribution::iid(
                Density1D::poly_exp(vec![0.5, 1.0], vec![0.0, 0.3], 0.5, 2.0).unwrap(),
            )
            .unwrap(),
        ];
        for d in pairs {
            let r = d.rect();
            for i in 1..7 {
                for j in 1..7 {
                    let x = r.x_lo + (r.x_hi - r.x_lo) * i as f64 / 8.0;
                    let y = r.y_lo + (r.y_hi - r.y_lo) * j as f64 / 8.0;
                    assert_abs_diff_eq!(
                        d.delta(x, y).unwrap(),
                        d.delta_factored(x, y).unwrap(),
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn condition_checks_on_reference_distributions() {
        let uniform = ProductDistribution::iid(Density1D::uniform(0.0, 1.0).unwrap()).unwrap();
        let c2 = check_condition(&uniform, 2, 32, &tol()).unwrap();
        assert!(c2.holds);
        assert_abs_diff_eq!(c2.worst_margin, 3.0, epsilon = 1e-12);

        let c1 = check_condition(&uniform, 1, 32, &tol()).unwrap();
        assert!(!c1.holds);

        let c3 = check_condition(&uniform, 3, 32, &tol()).unwrap();
        assert!(c3.holds);

        let inv_sq =
            ProductDistribution::iid(Density1D::power(2.0, -2.0, 1.0, 2.0).unwrap()).unwrap();
        let c1 = check_condition(&inv_sq, 1, 32, &tol()).unwrap();
        assert!(c1.holds);
        assert_abs_diff_eq!(c1.worst_margin, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn condition4_uniform_on_high_support_holds() {
        // Uniform on [2,3]: PR = 0 and y_A f2(y_A) - 2 = 0, so margin is 0.
        let d = ProductDistribution::iid(Density1D::uniform(2.0, 3.0).unwrap()).unwrap();
        let rep = check_condition(&d, 4, 32, &tol()).unwrap();
        assert!(rep.holds, "margin {}", rep.worst_margin);

        // Uniform on [1.2,2.2]: upper bound is -0.8 < PR = 0, fails.
        let low = ProductDistribution::iid(Density1D::uniform(1.2, 2.2).unwrap()).unwrap();
        let rep = check_condition(&low, 4, 32, &tol()).unwrap();
        assert!(!rep.holds);
        assert!(rep.worst_margin < 0.0);
    }

    #[test]
    fn condition5_holds_for_nonneg_poly_exp() {
        let d = ProductDistribution::iid(
            Density1D::poly_exp(vec![1.0, 0.0, 2.0], vec![0.0, 0.5], 0.5, 2.5).unwrap(),
        )
        .unwrap();
        let rep = check_condition(&d, 5, 48, &tol()).unwrap();
        assert!(rep.holds, "margin {}", rep.worst_margin);
    }

    #[test]
    fn fosd_examples() {
        let base = Density1D::uniform(0.0, 1.0).unwrap();
        let shifted = Density1D::uniform(0.5, 1.5).unwrap();
        assert!(fosd_dominates(&shifted, &base, 256, &tol()));
        assert!(!fosd_dominates(&base, &shifted, 256, &tol()));
        assert!(!fosd_dominates(&base, &base, 256, &tol()));
    }
}
