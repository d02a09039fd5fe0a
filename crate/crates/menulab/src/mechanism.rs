//! Menus, buyer best response, IC/IR validation, utility/payment duality, and
//! revenue evaluated both directly and through the boundary formula.

use crate::csvio;
use crate::distributions::ProductDistribution;
use crate::error::{Error, Result};
use crate::grid::GridMatrix;
use crate::numerics::{integrate_1d, integrate_2d, QuadratureSpec, Rect, ToleranceConfig};

/// One menu item: allocation probabilities for the two items and a payment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MenuItem {
    pub q1: f64,
    pub q2: f64,
    pub t: f64,
}

impl MenuItem {
    pub const NULL: MenuItem = MenuItem {
        q1: 0.0,
        q2: 0.0,
        t: 0.0,
    };

    pub fn new(q1: f64, q2: f64, t: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&q1) && (0.0..=1.0).contains(&q2)) {
            return Err(Error::Invalid {
                what: "menu item",
                reason: format!("allocation probabilities ({q1}, {q2}) outside [0,1]"),
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Invalid {
                what: "menu item",
                reason: format!("payment {t} must be a nonnegative real"),
            });
        }
        Ok(Self { q1, q2, t })
    }

    /// Buyer utility of picking this item at type `(x, y)`.
    #[inline]
    pub fn utility(&self, x: f64, y: f64) -> f64 {
        x * self.q1 + y * self.q2 - self.t
    }

    pub fn linf_distance(&self, other: &MenuItem) -> f64 {
        (self.q1 - other.q1)
            .abs()
            .max((self.q2 - other.q2).abs())
            .max((self.t - other.t).abs())
    }

    fn is_null(&self, tol: f64) -> bool {
        self.linf_distance(&MenuItem::NULL) <= tol
    }
}

/// A finite menu in taxation-principle form. Always contains the null item,
/// which anchors individual rationality.
#[derive(Debug, Clone, PartialEq)]
pub struct Menu {
    items: Vec<MenuItem>,
}

impl Menu {
    /// Builds a menu, appending the null item when absent and merging items
    /// closer than `clustering_tol`.
    pub fn new(mut items: Vec<MenuItem>, tol: &ToleranceConfig) -> Self {
        if !items.iter().any(|it| it.is_null(tol.clustering_tol)) {
            items.push(MenuItem::NULL);
        }
        let mut kept: Vec<MenuItem> = Vec::new();
        for item in items {
            if !kept
                .iter()
                .any(|k| k.linf_distance(&item) <= tol.clustering_tol)
            {
                kept.push(item);
            }
        }
        kept.sort_by(|a, b| {
            a.t.partial_cmp(&b.t)
                .unwrap()
                .then(a.q1.partial_cmp(&b.q1).unwrap())
                .then(a.q2.partial_cmp(&b.q2).unwrap())
        });
        Self { items: kept }
    }

    /// Builds a menu keeping items distinct down to floating-point noise;
    /// used where nearby items are meaningful (e.g. supporting planes).
    pub fn new_exact(items: Vec<MenuItem>) -> Self {
        let mut kept: Vec<MenuItem> = Vec::new();
        for item in items {
            if !kept.iter().any(|k| k.linf_distance(&item) <= 1e-12) {
                kept.push(item);
            }
        }
        if !kept.iter().any(|it| it.is_null(1e-12)) {
            kept.push(MenuItem::NULL);
        }
        kept.sort_by(|a, b| {
            a.t.partial_cmp(&b.t)
                .unwrap()
                .then(a.q1.partial_cmp(&b.q1).unwrap())
                .then(a.q2.partial_cmp(&b.q2).unwrap())
        });
        Self { items: kept }
    }

    pub fn null_only() -> Self {
        Self {
            items: vec![MenuItem::NULL],
        }
    }

    /// Two-item bundle at a single posted price.
    pub fn bundle(price: f64) -> Self {
        Self {
            items: vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: price,
                },
            ],
        }
    }

    /// One posted price per item plus the implied bundle at the sum.
    pub fn separate(p1: f64, p2: f64) -> Self {
        Self {
            items: vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.0,
                    t: p1,
                },
                MenuItem {
                    q1: 0.0,
                    q2: 1.0,
                    t: p2,
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: p1 + p2,
                },
            ],
        }
    }

    pub fn items(&self) -> &[MenuItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of items excluding the null anchor.
    pub fn non_null_len(&self, tol: &ToleranceConfig) -> usize {
        self.items
            .iter()
            .filter(|it| !it.is_null(tol.clustering_tol))
            .count()
    }

    /// Utility-maximizing item for type `(x, y)`. Among maximizers within
    /// `abs_tol` the item with the largest payment wins, so utilities are
    /// always nonnegative and selections deterministic.
    pub fn best_response(&self, x: f64, y: f64, tol: &ToleranceConfig) -> (usize, f64) {
        assert!(!self.items.is_empty(), "menu must be nonempty");
        let mut best = 0usize;
        let mut best_u = self.items[0].utility(x, y);
        for (k, item) in self.items.iter().enumerate().skip(1) {
            let u = item.utility(x, y);
            if u > best_u + tol.abs_tol
                || (u >= best_u - tol.abs_tol && item.t > self.items[best].t)
            {
                best = k;
                best_u = u;
            }
        }
        // The null item guarantees a nonnegative supremum.
        (best, best_u.max(0.0))
    }

    /// Serializes as `q1,q2,t` rows at 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q1,q2,t\n");
        for item in &self.items {
            out.push_str(&format!(
                "{},{},{}\n",
                csvio::sig12(item.q1),
                csvio::sig12(item.q2),
                csvio::sig12(item.t)
            ));
        }
        out
    }

    pub fn from_csv(text: &str, tol: &ToleranceConfig) -> Result<Self> {
        let mut items = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with("q1") {
                continue;
            }
            let fields = csvio::parse_fields(trimmed, 3, lineno + 1)?;
            items.push(MenuItem::new(fields[0], fields[1], fields[2])?);
        }
        Ok(Menu::new(items, tol))
    }
}

/// Marker for the unit-demand restriction `q1 + q2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnitDemandFlag {
    pub enabled: bool,
}

impl UnitDemandFlag {
    pub const ON: UnitDemandFlag = UnitDemandFlag { enabled: true };
    pub const OFF: UnitDemandFlag = UnitDemandFlag { enabled: false };
}

/// A mechanism tabulated on a valuation grid: per-type allocations, payment,
/// and utility, plus the probability mass carried by each type (uniform when
/// the mechanism was not produced from a discrete instance).
#[derive(Debug, Clone)]
pub struct GridMechanism {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub q1: GridMatrix,
    pub q2: GridMatrix,
    pub t: GridMatrix,
    pub u: GridMatrix,
    pub mass: GridMatrix,
}

/// Worst violations per validation category; all zero (within tolerance) for
/// a valid mechanism.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub worst_ir: f64,
    pub worst_ic: f64,
    pub worst_consistency: f64,
    pub worst_unit_demand: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

impl GridMechanism {
    /// Tabulates a menu on the grid via best response.
    pub fn from_menu(menu: &Menu, xs: Vec<f64>, ys: Vec<f64>, tol: &ToleranceConfig) -> Self {
        let (nx, ny) = (xs.len(), ys.len());
        let mut q1 = GridMatrix::zeros(nx, ny);
        let mut q2 = GridMatrix::zeros(nx, ny);
        let mut t = GridMatrix::zeros(nx, ny);
        let mut u = GridMatrix::zeros(nx, ny);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let (k, util) = menu.best_response(x, y, tol);
                let item = menu.items()[k];
                q1.set(i, j, item.q1);
                q2.set(i, j, item.q2);
                t.set(i, j, item.t);
                u.set(i, j, util);
            }
        }
        let mass = GridMatrix::filled(nx, ny, 1.0 / (nx * ny) as f64);
        Self {
            xs,
            ys,
            q1,
            q2,
            t,
            u,
            mass,
        }
    }

    /// Same as `from_menu` on an `n x n` grid spanning the support of `d`,
    /// with cell masses taken from `d`.
    pub fn from_menu_on(
        menu: &Menu,
        d: &ProductDistribution,
        n: usize,
        tol: &ToleranceConfig,
    ) -> Self {
        let r = d.rect();
        let xs = linspace(r.x_lo, r.x_hi, n);
        let ys = linspace(r.y_lo, r.y_hi, n);
        let mut gm = Self::from_menu(menu, xs, ys, tol);
        gm.mass = node_masses(d, &gm.xs, &gm.ys);
        gm
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    /// Expected payment under the stored per-type masses.
    pub fn expected_revenue(&self) -> f64 {
        self.t
            .iter()
            .map(|((i, j), v)| v * self.mass.get(i, j))
            .sum()
    }

    /// All distinct `(q1, q2, t)` triples at `tol` resolution, in first-seen
    /// order over the grid.
    pub fn distinct_triples(&self, tol: f64) -> Vec<MenuItem> {
        let mut out: Vec<MenuItem> = Vec::new();
        for ((i, j), q1) in self.q1.iter() {
            let item = MenuItem {
                q1,
                q2: self.q2.get(i, j),
                t: self.t.get(i, j),
            };
            if !out.iter().any(|k| k.linf_distance(&item) <= tol) {
                out.push(item);
            }
        }
        out
    }

    /// Bilinear interpolation of the utility field.
    pub fn utility_at(&self, x: f64, y: f64) -> f64 {
        let (i, fx) = locate(&self.xs, x);
        let (j, fy) = locate(&self.ys, y);
        let u00 = self.u.get(i, j);
        let u10 = self.u.get(i + 1, j);
        let u01 = self.u.get(i, j + 1);
        let u11 = self.u.get(i + 1, j + 1);
        u00 * (1.0 - fx) * (1.0 - fy)
            + u10 * fx * (1.0 - fy)
            + u01 * (1.0 - fx) * fy
            + u11 * fx * fy
    }

    /// Exhaustive IC/IR/utility-consistency check, plus the unit-demand bound
    /// when enabled. Violations are reported, not thrown.
    pub fn validate(&self, unit_demand: UnitDemandFlag, ic_tol: f64) -> ValidationReport {
        let mut report = ValidationReport::default();
        let (nx, ny) = (self.nx(), self.ny());
        let n = nx * ny;
        let type_of = |k: usize| (k / ny, k % ny);

        for k in 0..n {
            let (i, j) = type_of(k);
            let (x, y) = (self.xs[i], self.ys[j]);
            let u = self.u.get(i, j);

            let ir = -u;
            if ir > report.worst_ir {
                report.worst_ir = ir;
            }

            let consistency =
                (u - (x * self.q1.get(i, j) + y * self.q2.get(i, j) - self.t.get(i, j))).abs();
            if consistency > report.worst_consistency {
                report.worst_consistency = consistency;
            }

            if unit_demand.enabled {
                let excess = self.q1.get(i, j) + self.q2.get(i, j) - 1.0;
                if excess > report.worst_unit_demand {
                    report.worst_unit_demand = excess;
                }
            }

            for l in 0..n {
                if l == k {
                    continue;
                }
                let (a, b) = type_of(l);
                let deviation =
                    x * self.q1.get(a, b) + y * self.q2.get(a, b) - self.t.get(a, b) - u;
                if deviation > report.worst_ic {
                    report.worst_ic = deviation;
                }
            }
        }

        if report.worst_ir > ic_tol {
            report
                .failures
                .push(format!("IR violated by {:.3e}", report.worst_ir));
        }
        if report.worst_ic > ic_tol {
            report
                .failures
                .push(format!("IC violated by {:.3e}", report.worst_ic));
        }
        if report.worst_consistency > ic_tol {
            report.failures.push(format!(
                "utility inconsistent with (q, t) by {:.3e}",
                report.worst_consistency
            ));
        }
        if unit_demand.enabled && report.worst_unit_demand > ic_tol {
            report.failures.push(format!(
                "unit demand violated by {:.3e}",
                report.worst_unit_demand
            ));
        }
        report
    }

    /// Serializes as `x,y,q1,q2,t,u` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,q1,q2,t,u\n");
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.ys.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    csvio::sig12(x),
                    csvio::sig12(y),
                    csvio::sig12(self.q1.get(i, j)),
                    csvio::sig12(self.q2.get(i, j)),
                    csvio::sig12(self.t.get(i, j)),
                    csvio::sig12(self.u.get(i, j)),
                ));
            }
        }
        out
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Probability mass of the Voronoi cell around each grid node.
pub(crate) fn node_masses(d: &ProductDistribution, xs: &[f64], ys: &[f64]) -> GridMatrix {
    let col = axis_masses(|a, b| d.dx().cdf(b) - d.dx().cdf(a), xs);
    let row = axis_masses(|a, b| d.dy().cdf(b) - d.dy().cdf(a), ys);
    let mut mass = GridMatrix::from_fn(xs.len(), ys.len(), |i, j| col[i] * row[j]);
    let total = mass.sum();
    if total > 0.0 {
        mass.scale(1.0 / total);
    }
    mass
}

fn axis_masses<F: Fn(f64, f64) -> f64>(cell_mass: F, grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|k| {
            let lo = if k == 0 {
                f64::NEG_INFINITY
            } else {
                0.5 * (grid[k - 1] + grid[k])
            };
            let hi = if k + 1 == n {
                f64::INFINITY
            } else {
                0.5 * (grid[k] + grid[k + 1])
            };
            cell_mass(lo.max(-1e300), hi.min(1e300))
        })
        .collect()
}

/// Finds the cell index and fractional offset of `x` in a sorted grid,
/// clamping to the grid hull.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let mut i = grid.partition_point(|&g| g <= x) - 1;
    if i >= n - 1 {
        i = n - 2;
    }
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

/// Conditional expected payment at fixed `x`, integrated exactly in `y`.
///
/// For fixed `x` each item's utility is an affine function of `y`, so the
/// best response follows the upper envelope of finitely many lines and the
/// inner integral collapses to CDF differences over envelope segments. This
/// removes the payment-field discontinuities from the quadrature entirely.
fn revenue_slice(menu: &Menu, d: &ProductDistribution, x: f64, tol: &ToleranceConfig) -> f64 {
    let (y_lo, y_hi) = d.dy().support();
    let items = menu.items();
    let mut cuts: Vec<f64> = Vec::with_capacity(2 + items.len() * items.len() / 2);
    cuts.push(y_lo);
    cuts.push(y_hi);
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let dq2 = items[a].q2 - items[b].q2;
            if dq2.abs() > 1e-14 {
                let offset_a = x * items[a].q1 - items[a].t;
                let offset_b = x * items[b].q1 - items[b].t;
                let y = (offset_b - offset_a) / dq2;
                if y > y_lo && y < y_hi {
                    cuts.push(y);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (c0, c1) = (pair[0], pair[1]);
        if c1 - c0 < 1e-15 {
            continue;
        }
        let (k, _) = menu.best_response(x, 0.5 * (c0 + c1), tol);
        total += items[k].t * (d.dy().cdf(c1) - d.dy().cdf(c0));
    }
    total
}

/// Expected payment of a menu under `d`. The inner integral over `y` is exact
/// per envelope segment; the outer integral over `x` uses composite quadrature
/// with panel doubling until successive estimates agree to `rel_tol`.
pub fn menu_revenue(
    menu: &Menu,
    d: &ProductDistribution,
    spec: &QuadratureSpec,
    tol: &ToleranceConfig,
) -> Result<f64> {
    let mut panels = spec.panels.max(64);
    let mut previous = menu_revenue_fixed(menu, d, &QuadratureSpec::new(spec.order, panels))?;
    for _ in 0..4 {
        panels *= 2;
        let latest = menu_revenue_fixed(menu, d, &QuadratureSpec::new(spec.order, panels))?;
        let scale = latest.abs().max(1e-12);
        if (latest - previous).abs() / scale < tol.rel_tol {
            return Ok(latest);
        }
        previous = latest;
    }
    let latest = menu_revenue_fixed(menu, d, &QuadratureSpec::new(spec.order, panels * 2))?;
    let scale = latest.abs().max(1e-12);
    if (latest - previous).abs() / scale < tol.rel_tol {
        Ok(latest)
    } else {
        Err(Error::NoConvergence { previous, latest })
    }
}

/// Expected payment at a fixed outer-quadrature resolution. Used inside
/// optimization loops where the refinement loop would dominate runtime.
pub fn menu_revenue_fixed(
    menu: &Menu,
    d: &ProductDistribution,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let tol = ToleranceConfig::default();
    let (x_lo, x_hi) = d.dx().support();
    integrate_1d(
        |x| revenue_slice(menu, d, x, &tol) * d.dx().pdf(x),
        x_lo,
        x_hi,
        spec,
    )
}

/// Evaluates the five-term boundary representation of expected revenue:
/// positive utility flux through the top and right edges, negative flux
/// through the bottom and left edges, minus the interior integral of
/// `u * delta`. Utilities between grid nodes are interpolated bilinearly.
pub fn revenue_via_boundary_formula(
    gm: &GridMechanism,
    d: &ProductDistribution,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let report = gm.validate(UnitDemandFlag::OFF, 1e-8);
    if !report.is_valid() {
        return Err(Error::Validation(report.failures.join("; ")));
    }
    let r = d.rect();
    let hull_mismatch = (gm.xs[0] - r.x_lo)
        .abs()
        .max((gm.xs[gm.nx() - 1] - r.x_hi).abs())
        .max((gm.ys[0] - r.y_lo).abs())
        .max((gm.ys[gm.ny() - 1] - r.y_hi).abs());
    if hull_mismatch > 1e-9 * (r.x_hi - r.x_lo).max(r.y_hi - r.y_lo) {
        return Err(Error::Validation(
            "mechanism grid must span the support rectangle for the boundary formula".into(),
        ));
    }

    let (x_a, x_b) = (r.x_lo, r.x_hi);
    let (y_a, y_c) = (r.y_lo, r.y_hi);
    let f1 = |x: f64| d.dx().pdf(x);
    let f2 = |y: f64| d.dy().pdf(y);

    // Edge terms: BD (right) and CD (top) enter positively, AC (left) and AB
    // (bottom) negatively.
    let bd = integrate_1d(
        |y| x_b * gm.utility_at(x_b, y) * f1(x_b) * f2(y),
        y_a,
        y_c,
        spec,
    )?;
    let cd = integrate_1d(
        |x| y_c * gm.utility_at(x, y_c) * f1(x) * f2(y_c),
        x_a,
        x_b,
        spec,
    )?;
    let ac = integrate_1d(
        |y| x_a * gm.utility_at(x_a, y) * f1(x_a) * f2(y),
        y_a,
        y_c,
        spec,
    )?;
    let ab = integrate_1d(
        |x| y_a * gm.utility_at(x, y_a) * f1(x) * f2(y_a),
        x_a,
        x_b,
        spec,
    )?;

    let area = integrate_2d(
        |x, y| gm.utility_at(x, y) * d.delta(x, y).unwrap_or(0.0),
        &Rect::new(x_a, x_b, y_a, y_c),
        spec,
    )?;

    Ok(bd + cd - ac - ab - area)
}

/// Recovers payments from a discretely convex utility field using forward
/// difference quotients for the allocation slopes (backward at the top and
/// right edges, matching the sup-gradient convention).
pub fn payment_from_utility(
    xs: &[f64],
    ys: &[f64],
    u: &GridMatrix,
    abs_tol: f64,
) -> Result<(GridMatrix, GridMatrix, GridMatrix)> {
    let (nx, ny) = (xs.len(), ys.len());

    // Discrete convexity along rows and columns.
    for j in 0..ny {
        for i in 1..nx - 1 {
            let left = (u.get(i, j) - u.get(i - 1, j)) / (xs[i] - xs[i - 1]);
            let right = (u.get(i + 1, j) - u.get(i, j)) / (xs[i + 1] - xs[i]);
            if right < left - abs_tol {
                return Err(Error::Precondition(format!(
                    "u not convex along x at nodes ({}, {}, {}) row {}",
                    i - 1,
                    i,
                    i + 1,
                    j
                )));
            }
        }
    }
    for i in 0..nx {
        for j in 1..ny - 1 {
            let below = (u.get(i, j) - u.get(i, j - 1)) / (ys[j] - ys[j - 1]);
            let above = (u.get(i, j + 1) - u.get(i, j)) / (ys[j + 1] - ys[j]);
            if above < below - abs_tol {
                return Err(Error::Precondition(format!(
                    "u not convex along y at nodes ({}, {}, {}) column {}",
                    j - 1,
                    j,
                    j + 1,
                    i
                )));
            }
        }
    }

    let mut q1 = GridMatrix::zeros(nx, ny);
    let mut q2 = GridMatrix::zeros(nx, ny);
    let mut t = GridMatrix::zeros(nx, ny);
    for i in 0..nx {
        for j in 0..ny {
            let ux = if i + 1 < nx {
                (u.get(i + 1, j) - u.get(i, j)) / (xs[i + 1] - xs[i])
            } else {
                (u.get(i, j) - u.get(i - 1, j)) / (xs[i] - xs[i - 1])
            };
            let uy = if j + 1 < ny {
                (u.get(i, j + 1) - u.get(i, j)) / (ys[j + 1] - ys[j])
            } else {
                (u.get(i, j) - u.get(i, j - 1)) / (ys[j] - ys[j - 1])
            };
            q1.set(i, j, ux);
            q2.set(i, j, uy);
            t.set(i, j, xs[i] * ux + ys[j] * uy - u.get(i, j));
        }
    }
    Ok((q1, q2, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Density1D;
    use approx::assert_abs_diff_eq;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn uniform_pair() -> ProductDistribution {
        ProductDistribution::iid(Density1D::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn best_response_examples() {
        let menu = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: 1.0,
                },
            ],
            &tol(),
        );
        let (k, u) = menu.best_response(0.8, 0.9, &tol());
        assert_eq!(menu.items()[k].t, 1.0);
        assert_abs_diff_eq!(u, 0.7, epsilon = 1e-12);

        let (k, u) = menu.best_response(0.4, 0.4, &tol());
        assert_eq!(menu.items()[k], MenuItem::NULL);
        assert_eq!(u, 0.0);

        // Exact tie: the higher-payment item wins.
        let (k, u) = menu.best_response(0.5, 0.5, &tol());
        assert_eq!(menu.items()[k].t, 1.0);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn menu_revenue_examples() {
        let d = uniform_pair();
        let spec = QuadratureSpec::default();

        assert_eq!(
            menu_revenue(&Menu::null_only(), &d, &spec, &tol()).unwrap(),
            0.0
        );

        let p = (2.0f64 / 3.0).sqrt();
        let bundle = Menu::bundle(p);
        let want = p - p.powi(3) / 2.0;
        assert_abs_diff_eq!(
            menu_revenue(&bundle, &d, &spec, &tol()).unwrap(),
            want,
            epsilon = 1e-4
        );

        let separate = Menu::separate(0.5, 0.5);
        assert_abs_diff_eq!(
            menu_revenue(&separate, &d, &spec, &tol()).unwrap(),
            0.5,
            epsilon = 1e-4
        );
    }

    #[test]
    fn boundary_formula_matches_direct_revenue_at_33() {
        let d = uniform_pair();
        let spec = QuadratureSpec::new(8, 32);
        let tol = tol();

        let null = GridMechanism::from_menu_on(&Menu::null_only(), &d, 33, &tol);
        assert_abs_diff_eq!(
            revenue_via_boundary_formula(&null, &d, &spec).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let p = (2.0f64 / 3.0).sqrt();
        let bundle = GridMechanism::from_menu_on(&Menu::bundle(p), &d, 33, &tol);
        let direct = p - p.powi(3) / 2.0;
        let via_boundary = revenue_via_boundary_formula(&bundle, &d, &spec).unwrap();
        assert!(
            (via_boundary - direct).abs() / direct < 1e-3,
            "boundary {via_boundary} vs direct {direct}"
        );
        // The gap to the node-sampled grid expectation shrinks under grid
        // refinement (the sampled payment field is discontinuous, so this
        // converges at first order rather than matching at fixed resolution).
        let coarse_gap = (via_boundary - bundle.expected_revenue()).abs();
        let fine = GridMechanism::from_menu_on(&Menu::bundle(p), &d, 65, &tol);
        let fine_boundary =
            revenue_via_boundary_formula(&fine, &d, &QuadratureSpec::new(8, 64)).unwrap();
        let fine_gap = (fine_boundary - fine.expected_revenue()).abs();
        assert!(
            fine_gap < coarse_gap,
            "refinement did not shrink the gap: {coarse_gap} -> {fine_gap}"
        );

        let separate = GridMechanism::from_menu_on(&Menu::separate(0.5, 0.5), &d, 33, &tol);
        let via_boundary = revenue_via_boundary_formula(&separate, &d, &spec).unwrap();
        assert!(
            (via_boundary - 0.5).abs() / 0.5 < 1e-3,
            "boundary {via_boundary} vs direct 0.5"
        );
    }

    #[test]
    fn boundary_formula_rejects_invalid_mechanism() {
        let d = uniform_pair();
        let tol = tol();
        let mut gm = GridMechanism::from_menu_on(&Menu::bundle(0.8), &d, 9, &tol);
        let broken = gm.t.get(4, 4) + 0.1;
        gm.t.set(4, 4, broken);
        let err = revenue_via_boundary_formula(&gm, &d, &QuadratureSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn payment_from_utility_examples() {
        let xs = linspace(0.0, 1.0, 21);
        let ys = linspace(0.0, 1.0, 21);

        // Bundle at price 1: u = max(0, x + y - 1).
        let u = GridMatrix::from_fn(21, 21, |i, j| (xs[i] + ys[j] - 1.0).max(0.0));
        let (q1, q2, t) = payment_from_utility(&xs, &ys, &u, 1e-9).unwrap();
        // Well inside the positive region both forward slopes are 1.
        assert_abs_diff_eq!(q1.get(16, 16), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q2.get(16, 16), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(16, 16), 1.0, epsilon = 1e-12);

        // Null mechanism.
        let zero = GridMatrix::zeros(21, 21);
        let (_, _, t) = payment_from_utility(&xs, &ys, &zero, 1e-9).unwrap();
        assert_eq!(t.get(10, 10), 0.0);

        // Single item at price 0.5: u = max(0, x - 0.5).
        let u = GridMatrix::from_fn(21, 21, |i, _| (xs[i] - 0.5).max(0.0));
        let (_, _, t) = payment_from_utility(&xs, &ys, &u, 1e-9).unwrap();
        assert_abs_diff_eq!(t.get(18, 3), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn payment_from_utility_rejects_nonconvex() {
        let xs = linspace(0.0, 1.0, 5);
        let ys = linspace(0.0, 1.0, 5);
        let u = GridMatrix::from_fn(5, 5, |i, _| if i == 2 { 0.5 } else { 0.0 });
        assert!(payment_from_utility(&xs, &ys, &u, 1e-9).is_err());
    }

    #[test]
    fn validate_flags_constructed_violations() {
        let d = uniform_pair();
        let tol = tol();
        let gm = GridMechanism::from_menu_on(&Menu::bundle(0.9), &d, 9, &tol);
        assert!(gm.validate(UnitDemandFlag::OFF, 1e-8).is_valid());

        // Raise one payment without adjusting utility.
        let mut broken = gm.clone();
        let bumped = broken.t.get(3, 3) + 0.1;
        broken.t.set(3, 3, bumped);
        let report = broken.validate(UnitDemandFlag::OFF, 1e-8);
        assert!(!report.is_valid());
        assert!(report.worst_consistency > 0.05);

        // A (1,1)-allocating mechanism violates unit demand.
        let report = gm.validate(UnitDemandFlag::ON, 1e-8);
        assert!(!report.is_valid());
        assert!(report.worst_unit_demand > 0.9);
    }

    #[test]
    fn best_response_utility_is_convex_on_segments() {
        let menu = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.3,
                    t: 0.55,
                },
                MenuItem {
                    q1: 0.4,
                    q2: 1.0,
                    t: 0.6,
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: 1.1,
                },
            ],
            &tol(),
        );
        let tol = tol();
        let u = |x: f64, y: f64| menu.best_response(x, y, &tol).1;
        let endpoints = [
            ((0.1, 0.2), (0.9, 0.8)),
            ((0.0, 1.0), (1.0, 0.0)),
            ((0.5, 0.1), (0.6, 0.95)),
        ];
        for ((x0, y0), (x1, y1)) in endpoints {
            let mid = u(0.5 * (x0 + x1), 0.5 * (y0 + y1));
            let avg = 0.5 * (u(x0, y0) + u(x1, y1));
            assert!(
                mid <= avg + tol.abs_tol,
                "convexity violated: {mid} > {avg}"
            );
        }
    }

    #[test]
    fn shifting_all_payments_shifts_non_null_utility() {
        let base = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.5,
                    t: 0.4,
                },
            ],
            &tol(),
        );
        let shifted = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.5,
                    t: 0.6,
                },
            ],
            &tol(),
        );
        let tol = tol();
        // At a type that strictly prefers the non-null item both before and
        // after the shift, utility drops by exactly the constant.
        let (_, u0) = base.best_response(0.95, 0.9, &tol);
        let (_, u1) = shifted.best_response(0.95, 0.9, &tol);
        assert_abs_diff_eq!(u0 - u1, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn unit_demand_choice_depends_only_on_x_minus_y() {
        let menu = Menu::new(
            vec![
                MenuItem {
                    q1: 1.0,
                    q2: 0.0,
                    t: 0.4,
                },
                MenuItem {
                    q1: 0.7,
                    q2: 0.3,
                    t: 0.35,
                },
                MenuItem {
                    q1: 0.0,
                    q2: 1.0,
                    t: 0.45,
                },
            ],
            &tol(),
        );
        let tol = tol();
        // All items satisfy q1 + q2 = 1 except the null anchor; compare type
        // pairs with equal x - y and both choosing non-null items.
        for (dx, base) in [(0.5, 1.2), (0.2, 1.5), (-0.3, 1.8)] {
            let (k1, _) = menu.best_response(base + dx, base, &tol);
            let (k2, _) = menu.best_response(base + dx + 0.2, base + 0.2, &tol);
            assert_eq!(k1, k2, "choice changed along x - y = {dx}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        prop_compose! {
            fn arb_menu()(raw in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=2.0), 1..6)) -> Menu {
                let items = raw.into_iter().map(|(q1, q2, t)| MenuItem { q1, q2, t }).collect();
                Menu::new(items, &ToleranceConfig::default())
            }
        }

        proptest! {
            // The best-response utility is a supremum of linear functions,
            // hence convex along every segment of the valuation square.
            #[test]
            fn best_response_utility_is_convex(
                menu in arb_menu(),
                x0 in 0.0f64..=1.0, y0 in 0.0f64..=1.0,
                x1 in 0.0f64..=1.0, y1 in 0.0f64..=1.0,
            ) {
                let cfg = ToleranceConfig::default();
                let u = |x: f64, y: f64| menu.best_response(x, y, &cfg).1;
                let mid = u(0.5 * (x0 + x1), 0.5 * (y0 + y1));
                let avg = 0.5 * (u(x0, y0) + u(x1, y1));
                prop_assert!(mid <= avg + cfg.abs_tol);
            }

            // Tabulated mechanisms built from a menu always validate.
            #[test]
            fn menu_mechanisms_validate(menu in arb_menu(), n in 3usize..8) {
                let cfg = ToleranceConfig::default();
                let xs = linspace(0.0, 1.0, n);
                let ys = linspace(0.0, 1.0, n);
                let gm = GridMechanism::from_menu(&menu, xs, ys, &cfg);
                prop_assert!(gm.validate(UnitDemandFlag::OFF, 1e-8).is_valid());
            }
        }
    }

    #[test]
    fn menu_csv_round_trip() {
        let menu = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.25,
                    t: 0.553366,
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: 0.861934,
                },
            ],
            &tol(),
        );
        let text = menu.to_csv();
        let back = Menu::from_csv(&text, &tol()).unwrap();
        assert_eq!(menu.len(), back.len());
        for (a, b) in menu.items().iter().zip(back.items()) {
            assert!(a.linf_distance(b) < 1e-10);
        }
    }
}
