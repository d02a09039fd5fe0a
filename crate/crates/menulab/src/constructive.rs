//! Executable counterparts of the monotonicity machinery: lowest-type
//! normalization, the two-step translation/rotation plane construction, and
//! the symmetric bundle construction for identically distributed items.

use crate::distributions::{check_condition, ProductDistribution};
use crate::error::{Error, Result};
use crate::mechanism::{
    linspace, revenue_via_boundary_formula, GridMechanism, Menu, MenuItem, UnitDemandFlag,
};
use crate::numerics::{bundle_cdf, maximize_scalar, QuadratureSpec, Rect, ToleranceConfig};

/// Which edge of the rectangle a profile lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Bottom edge, varying x at the lowest y.
    Ab,
    /// Left edge, varying y at the lowest x.
    Ac,
}

/// Utility restricted to one of the two low edges, sampled on a grid. Valid
/// profiles are convex, nonnegative, zero at the corner shared with the
/// lowest type, with slopes between 0 and 1.
#[derive(Debug, Clone)]
pub struct EdgeProfile {
    pub edge: EdgeKind,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

impl EdgeProfile {
    pub fn new(
        edge: EdgeKind,
        coords: Vec<f64>,
        values: Vec<f64>,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        if coords.len() != values.len() || coords.len() < 2 {
            return Err(Error::Precondition(
                "edge profile needs matching grids of length >= 2".into(),
            ));
        }
        if values[0].abs() > 1e-7 {
            return Err(Error::Precondition(format!(
                "edge profile must vanish at the corner, found {}",
                values[0]
            )));
        }
        let mut prev_slope = f64::NEG_INFINITY;
        for k in 0..coords.len() - 1 {
            let slope = (values[k + 1] - values[k]) / (coords[k + 1] - coords[k]);
            if !(-1e-7..=1.0 + tol.slope_tol).contains(&slope) {
                return Err(Error::Precondition(format!(
                    "edge profile slope {slope} outside [0, 1] near coordinate {}",
                    coords[k]
                )));
            }
            if slope < prev_slope - tol.slope_tol {
                return Err(Error::Precondition(format!(
                    "edge profile not convex near coordinate {}",
                    coords[k]
                )));
            }
            prev_slope = prev_slope.max(slope);
        }
        if values.iter().any(|v| *v < -1e-9) {
            return Err(Error::Precondition(
                "edge profile must be nonnegative".into(),
            ));
        }
        Ok(Self {
            edge,
            coords,
            values,
        })
    }

    /// Distinct successive-difference slopes, clamped into `[0, 1]`.
    fn slope_set(&self) -> Vec<f64> {
        let mut slopes: Vec<f64> = self
            .coords
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(c, v)| ((v[1] - v[0]) / (c[1] - c[0])).clamp(0.0, 1.0))
            .collect();
        slopes.push(1.0);
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        slopes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        slopes
    }
}

/// A supporting plane `u(x, y) = q1 x + q2 y + k`; the implied payment is
/// `-k` once the plane is anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPlane {
    pub q1: f64,
    pub q2: f64,
    pub k: f64,
}

impl SupportPlane {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.q1 * x + self.q2 * y + self.k
    }
}

/// Shifts all payments by the lowest type's utility so that the lowest type
/// is fully extracted; expected revenue rises by exactly that amount.
/// Returns the normalized mechanism and the shift applied.
pub fn normalize_lowest_type(gm: &GridMechanism) -> Result<(GridMechanism, f64)> {
    let shift = gm.u.get(0, 0);
    if shift.abs() <= 1e-15 {
        return Ok((gm.clone(), 0.0));
    }
    let mut out = gm.clone();
    for i in 0..gm.nx() {
        for j in 0..gm.ny() {
            out.t.set(i, j, gm.t.get(i, j) + shift);
            out.u.set(i, j, gm.u.get(i, j) - shift);
        }
    }
    let report = out.validate(UnitDemandFlag::OFF, 1e-8);
    if !report.is_valid() {
        return Err(Error::Solver(format!(
            "normalization broke validity, which contradicts convex increasing utility: {}",
            report.failures.join("; ")
        )));
    }
    Ok((out, shift))
}

/// The translation/rotation supremum: every pair of edge subgradients (plus
/// the unit cap) seeds a plane that is raised until first contact with one
/// edge profile, then rotated about that contact line until it meets the
/// other profile or its free slope reaches 1. The output utility is the
/// pointwise supremum of all resulting planes, tabulated on a `grid_n`
/// square grid over `rect`.
pub fn two_step_supremum(
    ab: &EdgeProfile,
    ac: &EdgeProfile,
    rect: &Rect,
    grid_n: usize,
    tol: &ToleranceConfig,
) -> Result<GridMechanism> {
    if ab.edge != EdgeKind::Ab || ac.edge != EdgeKind::Ac {
        return Err(Error::Precondition(
            "profiles must be tagged AB and AC respectively".into(),
        ));
    }
    let planes = two_step_planes(ab, ac, rect)?;
    let xs = linspace(rect.x_lo, rect.x_hi, grid_n);
    let ys = linspace(rect.y_lo, rect.y_hi, grid_n);
    let items: Vec<MenuItem> = planes
        .iter()
        .map(|p| MenuItem {
            q1: p.q1,
            q2: p.q2,
            t: (-p.k).max(0.0),
        })
        .collect();
    let menu = Menu::new_exact(items);
    Ok(GridMechanism::from_menu(&menu, xs, ys, tol))
}

/// The plane family behind `two_step_supremum`, in absolute coordinates.
pub fn two_step_planes(
    ab: &EdgeProfile,
    ac: &EdgeProfile,
    rect: &Rect,
) -> Result<Vec<SupportPlane>> {
    let (x_a, y_a) = (rect.x_lo, rect.y_lo);

    // Translation height for a slope along one profile: the smallest gap
    // between the profile and the ray of that slope from the corner.
    let contact_height = |profile: &EdgeProfile, slope: f64, corner: f64| -> f64 {
        profile
            .coords
            .iter()
            .zip(&profile.values)
            .map(|(&c, &v)| v - slope * (c - corner))
            .fold(f64::INFINITY, f64::min)
    };
    // Largest slope that keeps a plane of height `k` under the profile.
    let rotation_cap = |profile: &EdgeProfile, k: f64, corner: f64| -> f64 {
        profile
            .coords
            .iter()
            .zip(&profile.values)
            .filter(|(&c, _)| c > corner + 1e-14)
            .map(|(&c, &v)| (v - k) / (c - corner))
            .fold(f64::INFINITY, f64::min)
            .min(1.0)
    };

    let mut planes: Vec<SupportPlane> = Vec::new();
    for &s_ab in &ab.slope_set() {
        for &s_ac in &ac.slope_set() {
            let k_ab = contact_height(ab, s_ab, x_a);
            let k_ac = contact_height(ac, s_ac, y_a);
            let k = k_ab.min(k_ac);
            let (q1, q2) = if k_ab <= k_ac {
                // First contact on the bottom edge: rotate the y-slope up.
                (s_ab, rotation_cap(ac, k, y_a).max(s_ac))
            } else {
                (rotation_cap(ab, k, x_a).max(s_ab), s_ac)
            };
            // Convert the corner-anchored height to an absolute intercept.
            let plane = SupportPlane {
                q1,
                q2,
                k: k - q1 * x_a - q2 * y_a,
            };
            if !planes.iter().any(|p| {
                (p.q1 - plane.q1).abs() < 1e-12
                    && (p.q2 - plane.q2).abs() < 1e-12
                    && (p.k - plane.k).abs() < 1e-12
            }) {
                planes.push(plane);
            }
        }
    }
    Ok(planes)
}

/// Outcome of the weak-improvement check.
#[derive(Debug, Clone)]
pub struct ImprovementReport {
    pub input_revenue: f64,
    pub output_revenue: f64,
    /// Smallest pointwise `u* - u` over the grid (should be >= -abs_tol).
    pub min_pointwise_margin: f64,
    /// Largest deviation of `u*` from `u` on the two low edges.
    pub edge_mismatch: f64,
    /// Number of distinct supporting planes in the construction.
    pub plane_count: usize,
}

/// Rebuilds the utility from the mechanism's low-edge profiles via the
/// two-step construction and verifies that boundary-formula revenue weakly
/// improves. Requires the negative-delta condition (condition 1). The input
/// is normalized first so the lowest type is fully extracted.
pub fn verify_condition1_improvement(
    gm: &GridMechanism,
    d: &ProductDistribution,
    spec: &QuadratureSpec,
    tol: &ToleranceConfig,
) -> Result<ImprovementReport> {
    let cond = check_condition(d, 1, 48, tol)?;
    if !cond.holds {
        return Err(Error::Precondition(format!(
            "condition 1 fails with margin {}",
            cond.worst_margin
        )));
    }
    let (gm, _) = normalize_lowest_type(gm)?;
    let gm = &gm;
    let ab = EdgeProfile::new(
        EdgeKind::Ab,
        gm.xs.clone(),
        (0..gm.nx()).map(|i| gm.u.get(i, 0)).collect(),
        tol,
    )?;
    let ac = EdgeProfile::new(
        EdgeKind::Ac,
        gm.ys.clone(),
        (0..gm.ny()).map(|j| gm.u.get(0, j)).collect(),
        tol,
    )?;
    let rect = d.rect();
    let star = two_step_supremum(&ab, &ac, &rect, gm.nx().max(gm.ny()), tol)?;
    let planes = two_step_planes(&ab, &ac, &rect)?;

    let input_revenue = revenue_via_boundary_formula(gm, d, spec)?;
    let output_revenue = revenue_via_boundary_formula(&star, d, spec)?;

    // Pointwise domination margin on the input grid.
    let mut min_margin = f64::INFINITY;
    for (i, &x) in gm.xs.iter().enumerate() {
        for (j, &y) in gm.ys.iter().enumerate() {
            let sup = planes.iter().map(|p| p.value(x, y)).fold(0.0f64, f64::max);
            min_margin = min_margin.min(sup - gm.u.get(i, j));
        }
    }
    let mut edge_mismatch = 0.0f64;
    for (i, &x) in gm.xs.iter().enumerate() {
        let sup = planes
            .iter()
            .map(|p| p.value(x, rect.y_lo))
            .fold(0.0f64, f64::max);
        edge_mismatch = edge_mismatch.max((sup - gm.u.get(i, 0)).abs());
    }
    for (j, &y) in gm.ys.iter().enumerate() {
        let sup = planes
            .iter()
            .map(|p| p.value(rect.x_lo, y))
            .fold(0.0f64, f64::max);
        edge_mismatch = edge_mismatch.max((sup - gm.u.get(0, j)).abs());
    }

    Ok(ImprovementReport {
        input_revenue,
        output_revenue,
        min_pointwise_margin: min_margin,
        edge_mismatch,
        plane_count: planes.len(),
    })
}

/// For identically distributed items whose power rate stays at or below
/// -3/2, the optimal mechanism is a pure bundle; this builds it by searching
/// the bundle price.
pub fn symmetric_bundle_construction(
    d: &ProductDistribution,
    spec: &QuadratureSpec,
    tol: &ToleranceConfig,
) -> Result<Menu> {
    if !d.is_iid() {
        return Err(Error::Precondition(
            "bundle construction needs identical marginals".into(),
        ));
    }
    let (lo, hi) = d.dx().support();
    let mut worst = f64::INFINITY;
    for k in 0..64 {
        let x = lo + (hi - lo) * (k as f64 + 0.5) / 64.0;
        worst = worst.min(-1.5 - d.dx().power_rate(x)?);
    }
    if worst < -tol.abs_tol {
        return Err(Error::Precondition(format!(
            "power rate exceeds -3/2 with margin {worst}"
        )));
    }
    let mut err = None;
    let (price, _) = maximize_scalar(
        |p| match bundle_cdf(d, p, spec) {
            Ok(c) => p * (1.0 - c),
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        },
        2.0 * lo,
        2.0 * hi,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Menu::bundle(price))
}
