//! Structural analysis of solved mechanisms: menu extraction and counts,
//! menu monotonicity, allocation-region geometry, and piecewise-linearity of
//! edge utilities.

use crate::csvio;
use crate::mechanism::{GridMechanism, Menu, MenuItem};
use crate::numerics::ToleranceConfig;

/// Allocation pattern of a grid type under Pavlov's characterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// Keeps both items: `q = (0, 0)`.
    Zero,
    /// Sells item 2 deterministically: `q = (*, 1)`.
    Vert,
    /// Sells item 1 deterministically: `q = (1, *)`.
    Horz,
    /// Sells both: `q = (1, 1)`.
    Full,
    /// None of the patterns; indicates a characterization violation.
    Other,
}

impl RegionLabel {
    fn code(&self) -> &'static str {
        match self {
            RegionLabel::Zero => "ZERO",
            RegionLabel::Vert => "VERT",
            RegionLabel::Horz => "HORZ",
            RegionLabel::Full => "FULL",
            RegionLabel::Other => "OTHER",
        }
    }
}

/// Per-type labels over the mechanism grid.
#[derive(Debug, Clone)]
pub struct RegionMap {
    nx: usize,
    ny: usize,
    labels: Vec<RegionLabel>,
}

impl RegionMap {
    pub fn get(&self, i: usize, j: usize) -> RegionLabel {
        self.labels[i * self.ny + j]
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Emits a label grid: one row per y value (descending), columns over x.
    pub fn to_csv(&self, xs: &[f64], ys: &[f64]) -> String {
        let mut out = String::from("y\\x");
        for &x in xs {
            out.push(',');
            out.push_str(&csvio::sig12(x));
        }
        out.push('\n');
        for j in (0..self.ny).rev() {
            out.push_str(&csvio::sig12(ys[j]));
            for i in 0..self.nx {
                out.push(',');
                out.push_str(self.get(i, j).code());
            }
            out.push('\n');
        }
        out
    }
}

/// Discrete geometry findings for a labeled mechanism.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub zero_lower_left: bool,
    pub zero_convex: bool,
    pub full_upward_closed: bool,
    pub vert_boundaries_vertical: bool,
    pub horz_boundaries_horizontal: bool,
    pub interface_monotone: bool,
    pub other_count: usize,
    /// Whether the full-allocation region meets the zero region (separates
    /// the two qualitative shapes of the characterization; reported, never
    /// asserted).
    pub full_touches_zero: bool,
    pub witnesses: Vec<String>,
}

impl GeometryReport {
    pub fn all_hold(&self) -> bool {
        self.zero_lower_left
            && self.zero_convex
            && self.full_upward_closed
            && self.vert_boundaries_vertical
            && self.horz_boundaries_horizontal
            && self.interface_monotone
            && self.other_count == 0
    }
}

/// Greedy mass-weighted clustering of the per-type triples under L-infinity
/// distance `tol`; cluster representatives are mass-weighted means. The null
/// item is appended when no cluster covers it.
pub fn extract_menu(gm: &GridMechanism, tol: f64) -> Menu {
    struct Cluster {
        weight: f64,
        q1: f64,
        q2: f64,
        t: f64,
    }
    impl Cluster {
        fn representative(&self) -> MenuItem {
            MenuItem {
                q1: self.q1 / self.weight,
                q2: self.q2 / self.weight,
                t: self.t / self.weight,
            }
        }
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for ((i, j), q1) in gm.q1.iter() {
        let item = MenuItem {
            q1,
            q2: gm.q2.get(i, j),
            t: gm.t.get(i, j),
        };
        // Types carrying no mass cannot influence representatives but may
        // still seed a cluster, so give them a vanishing weight.
        let weight = gm.mass.get(i, j).max(1e-300);
        match clusters
            .iter_mut()
            .find(|c| c.representative().linf_distance(&item) <= tol)
        {
            Some(c) => {
                c.weight += weight;
                c.q1 += weight * item.q1;
                c.q2 += weight * item.q2;
                c.t += weight * item.t;
            }
            None => clusters.push(Cluster {
                weight,
                q1: weight * item.q1,
                q2: weight * item.q2,
                t: weight * item.t,
            }),
        }
    }
    // Snap solver roundoff onto the exact bounds so representatives print
    // cleanly and downstream pattern matching sees exact probabilities.
    let snap = |v: f64| {
        if v.abs() <= 1e-9 {
            0.0
        } else if (v - 1.0).abs() <= 1e-9 {
            1.0
        } else {
            v
        }
    };
    let items: Vec<MenuItem> = clusters
        .iter()
        .map(|c| {
            let r = c.representative();
            MenuItem {
                q1: snap(r.q1.clamp(0.0, 1.0)),
                q2: snap(r.q2.clamp(0.0, 1.0)),
                t: snap(r.t.max(0.0)),
            }
        })
        .collect();
    let cfg = ToleranceConfig {
        clustering_tol: tol,
        ..ToleranceConfig::default()
    };
    Menu::new(items, &cfg)
}

/// Slack used when comparing allocation probabilities across menu items;
/// covers clustering and LP roundoff without masking real violations.
const ALLOCATION_SLACK: f64 = 1e-6;

/// Checks that the menu can be ordered so payments strictly increase while
/// both allocation probabilities weakly increase. Returns the first
/// violating adjacent pair as witness.
pub fn check_menu_monotonicity(
    menu: &Menu,
    tol: &ToleranceConfig,
) -> (bool, Option<(MenuItem, MenuItem)>) {
    let mut items: Vec<MenuItem> = menu.items().to_vec();
    items.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    // Merge payment ties: items sharing t (within abs_tol) must agree in q,
    // otherwise no strictly-increasing labeling exists.
    let mut merged: Vec<MenuItem> = Vec::new();
    for item in items {
        match merged.last() {
            Some(last) if (item.t - last.t).abs() <= tol.abs_tol => {
                if (item.q1 - last.q1).abs() > ALLOCATION_SLACK
                    || (item.q2 - last.q2).abs() > ALLOCATION_SLACK
                {
                    return (false, Some((*last, item)));
                }
            }
            _ => merged.push(item),
        }
    }
    for pair in merged.windows(2) {
        if pair[1].q1 < pair[0].q1 - ALLOCATION_SLACK || pair[1].q2 < pair[0].q2 - ALLOCATION_SLACK
        {
            return (false, Some((pair[0], pair[1])));
        }
    }
    (true, None)
}

/// Labels every grid type and checks the discrete signatures of the graph
/// representation: convex lower-left zero region, upward-closed full region,
/// vertical/horizontal slice boundaries, and a monotone interface between
/// the two deterministic-sale regions.
pub fn classify_regions(gm: &GridMechanism, tol: &ToleranceConfig) -> (RegionMap, GeometryReport) {
    let (nx, ny) = (gm.nx(), gm.ny());
    let ctol = tol.clustering_tol;
    let mut labels = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (q1, q2) = (gm.q1.get(i, j), gm.q2.get(i, j));
            let label = if q1 <= ctol && q2 <= ctol {
                RegionLabel::Zero
            } else if (1.0 - q1).abs() <= ctol && (1.0 - q2).abs() <= ctol {
                RegionLabel::Full
            } else if (1.0 - q2).abs() <= ctol {
                RegionLabel::Vert
            } else if (1.0 - q1).abs() <= ctol {
                RegionLabel::Horz
            } else {
                RegionLabel::Other
            };
            labels.push(label);
        }
    }
    let map = RegionMap { nx, ny, labels };
    let mut witnesses = Vec::new();

    let is = |i: usize, j: usize, l: RegionLabel| map.get(i, j) == l;

    // Zero region: downward closed and midpoint convex.
    let zero_cells: Vec<(usize, usize)> = (0..nx)
        .flat_map(|i| (0..ny).map(move |j| (i, j)))
        .filter(|&(i, j)| is(i, j, RegionLabel::Zero))
        .collect();
    let mut zero_lower_left = true;
    'll: for &(i, j) in &zero_cells {
        for a in 0..=i {
            for b in 0..=j {
                if !is(a, b, RegionLabel::Zero) {
                    zero_lower_left = false;
                    witnesses.push(format!(
                        "zero region not downward closed at ({a},{b}) under ({i},{j})"
                    ));
                    break 'll;
                }
            }
        }
    }
    let mut zero_convex = true;
    'cv: for (a, &(i1, j1)) in zero_cells.iter().enumerate() {
        for &(i2, j2) in &zero_cells[a + 1..] {
            let floor = ((i1 + i2) / 2, (j1 + j2) / 2);
            let ceil = ((i1 + i2).div_ceil(2), (j1 + j2).div_ceil(2));
            if !is(floor.0, floor.1, RegionLabel::Zero) && !is(ceil.0, ceil.1, RegionLabel::Zero) {
                zero_convex = false;
                witnesses.push(format!(
                    "zero region midpoint of ({i1},{j1}) and ({i2},{j2}) escapes the region"
                ));
                break 'cv;
            }
        }
    }

    // Full region: upward closed.
    let mut full_upward_closed = true;
    'uc: for i in 0..nx {
        for j in 0..ny {
            if is(i, j, RegionLabel::Full) {
                for a in i..nx {
                    for b in j..ny {
                        if !is(a, b, RegionLabel::Full) {
                            full_upward_closed = false;
                            witnesses.push(format!(
                                "full region not upward closed at ({a},{b}) above ({i},{j})"
                            ));
                            break 'uc;
                        }
                    }
                }
            }
        }
    }

    // Vertical slices: same-column VERT types share q1, and no column mixes
    // VERT with FULL (the boundary between them is a vertical line).
    let mut vert_ok = true;
    for i in 0..nx {
        let col: Vec<usize> = (0..ny).filter(|&j| is(i, j, RegionLabel::Vert)).collect();
        if col.is_empty() {
            continue;
        }
        let q1s: Vec<f64> = col.iter().map(|&j| gm.q1.get(i, j)).collect();
        let spread = q1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - q1s.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > ctol {
            vert_ok = false;
            witnesses.push(format!(
                "column {i} has non-constant q1 across its vertical slice"
            ));
        }
        if (0..ny).any(|j| is(i, j, RegionLabel::Full)) {
            vert_ok = false;
            witnesses.push(format!("column {i} mixes partial and full allocations"));
        }
    }

    // Horizontal slices, symmetrically.
    let mut horz_ok = true;
    for j in 0..ny {
        let row: Vec<usize> = (0..nx).filter(|&i| is(i, j, RegionLabel::Horz)).collect();
        if row.is_empty() {
            continue;
        }
        let q2s: Vec<f64> = row.iter().map(|&i| gm.q2.get(i, j)).collect();
        let spread = q2s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - q2s.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > ctol {
            horz_ok = false;
            witnesses.push(format!(
                "row {j} has non-constant q2 across its horizontal slice"
            ));
        }
        if (0..nx).any(|i| is(i, j, RegionLabel::Full)) {
            horz_ok = false;
            witnesses.push(format!("row {j} mixes partial and full allocations"));
        }
    }

    // Interface between the two deterministic-sale regions points upper
    // right: no HORZ type strictly upper-left of a VERT type.
    let mut interface_monotone = true;
    'im: for i in 0..nx {
        for j in 0..ny {
            if !is(i, j, RegionLabel::Horz) {
                continue;
            }
            for a in i + 1..nx {
                for b in 0..j {
                    if is(a, b, RegionLabel::Vert) {
                        interface_monotone = false;
                        witnesses.push(format!(
                            "horizontal-slice type ({i},{j}) sits upper-left of vertical-slice type ({a},{b})"
                        ));
                        break 'im;
                    }
                }
            }
        }
    }

    // Contact between full and zero regions (8-neighborhood).
    let mut full_touches_zero = false;
    'tz: for i in 0..nx {
        for j in 0..ny {
            if !is(i, j, RegionLabel::Full) {
                continue;
            }
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a >= 0
                        && b >= 0
                        && (a as usize) < nx
                        && (b as usize) < ny
                        && is(a as usize, b as usize, RegionLabel::Zero)
                    {
                        full_touches_zero = true;
                        break 'tz;
                    }
                }
            }
        }
    }

    let report = GeometryReport {
        zero_lower_left,
        zero_convex,
        full_upward_closed,
        vert_boundaries_vertical: vert_ok,
        horz_boundaries_horizontal: horz_ok,
        interface_monotone,
        other_count: map.count(RegionLabel::Other),
        full_touches_zero,
        witnesses,
    };
    (map, report)
}

/// Breakpoints and per-segment slopes of a sampled one-dimensional function.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDecomposition {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl SegmentDecomposition {
    pub fn segment_count(&self) -> usize {
        self.slopes.len()
    }
}

/// Splits successive-difference slopes into segments; a new segment opens
/// when adjacent slopes differ by more than `slope_tol`.
pub fn piecewise_linear_segments(
    coords: &[f64],
    values: &[f64],
    slope_tol: f64,
) -> SegmentDecomposition {
    assert!(
        coords.len() == values.len() && coords.len() >= 3,
        "need at least 3 samples"
    );
    let slopes: Vec<f64> = coords
        .windows(2)
        .zip(values.windows(2))
        .map(|(c, v)| (v[1] - v[0]) / (c[1] - c[0]))
        .collect();
    let mut breakpoints = Vec::new();
    let mut segment_slopes = Vec::new();
    let mut run_sum = slopes[0];
    let mut run_len = 1usize;
    for (k, pair) in slopes.windows(2).enumerate() {
        if (pair[1] - pair[0]).abs() > slope_tol {
            segment_slopes.push(run_sum / run_len as f64);
            breakpoints.push(coords[k + 1]);
            run_sum = 0.0;
            run_len = 0;
        }
        run_sum += pair[1];
        run_len += 1;
    }
    segment_slopes.push(run_sum / run_len as f64);
    SegmentDecomposition {
        breakpoints,
        slopes: segment_slopes,
    }
}

/// Utility restrictions to the rectangle edges (AB bottom, CD top, AC left,
/// BD right).
#[derive(Debug, Clone)]
pub struct EdgeUtilities {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Utility samples along the four edges of the grid.
pub fn edge_utilities(gm: &GridMechanism) -> EdgeUtilities {
    let (nx, ny) = (gm.nx(), gm.ny());
    EdgeUtilities {
        bottom: (0..nx).map(|i| gm.u.get(i, 0)).collect(),
        top: (0..nx).map(|i| gm.u.get(i, ny - 1)).collect(),
        left: (0..ny).map(|j| gm.u.get(0, j)).collect(),
        right: (0..ny).map(|j| gm.u.get(nx - 1, j)).collect(),
    }
}

/// `(raw, clustered)` menu-item counts: raw deduplicates at 1e-9, clustered
/// applies `extract_menu` at `tol`. Both counts include the null item.
pub fn count_menu_items(gm: &GridMechanism, tol: f64) -> (usize, usize) {
    let raw = gm.distinct_triples(1e-9).len();
    let clustered = extract_menu(gm, tol).len();
    (raw, clustered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Density1D, ProductDistribution};
    use crate::mechanism::GridMechanism;
    use approx::assert_abs_diff_eq;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn uniform_pair() -> ProductDistribution {
        ProductDistribution::iid(Density1D::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn extract_menu_bundle_and_degenerate_cases() {
        let d = uniform_pair();
        let gm = GridMechanism::from_menu_on(&Menu::bundle(0.9), &d, 15, &tol());
        let menu = extract_menu(&gm, 5e-3);
        assert_eq!(menu.len(), 2);

        // All types share one non-null triple: null gets appended.
        let every = Menu::new(
            vec![MenuItem {
                q1: 1.0,
                q2: 1.0,
                t: 0.0,
            }],
            &tol(),
        );
        let gm = GridMechanism::from_menu_on(&every, &d, 9, &tol());
        let menu = extract_menu(&gm, 5e-3);
        assert_eq!(menu.len(), 2);
    }

    #[test]
    fn extract_menu_is_idempotent_through_rebuild() {
        let d = uniform_pair();
        let gm = GridMechanism::from_menu_on(&Menu::separate(0.5, 0.5), &d, 17, &tol());
        let menu = extract_menu(&gm, 5e-3);
        let rebuilt = GridMechanism::from_menu_on(&menu, &d, 17, &tol());
        let again = extract_menu(&rebuilt, 5e-3);
        assert_eq!(menu.len(), again.len());
        for (a, b) in menu.items().iter().zip(again.items()) {
            assert!(a.linf_distance(b) <= 5e-3);
        }
    }

    #[test]
    fn monotonicity_examples() {
        let cfg = tol();
        let good = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: 1.0,
                },
            ],
            &cfg,
        );
        assert!(check_menu_monotonicity(&good, &cfg).0);

        let bad = Menu::new(
            vec![
                MenuItem::NULL,
                MenuItem {
                    q1: 1.0,
                    q2: 0.0,
                    t: 0.5,
                },
                MenuItem {
                    q1: 0.0,
                    q2: 1.0,
                    t: 0.6,
                },
            ],
            &cfg,
        );
        let (holds, witness) = check_menu_monotonicity(&bad, &cfg);
        assert!(!holds);
        let (lo, hi) = witness.unwrap();
        assert!(hi.q1 < lo.q1);
    }

    #[test]
    fn regions_of_bundle_only_mechanism() {
        let d = uniform_pair();
        let gm = GridMechanism::from_menu_on(&Menu::bundle(0.9), &d, 21, &tol());
        let (map, report) = classify_regions(&gm, &tol());
        assert_eq!(map.count(RegionLabel::Vert), 0);
        assert_eq!(map.count(RegionLabel::Horz), 0);
        assert_eq!(map.count(RegionLabel::Other), 0);
        assert!(map.count(RegionLabel::Zero) > 0);
        assert!(map.count(RegionLabel::Full) > 0);
        assert!(report.all_hold(), "witnesses: {:?}", report.witnesses);
        // The bundle boundary is the price diagonal, so the two regions meet.
        assert!(report.full_touches_zero);
    }

    #[test]
    fn regions_of_null_mechanism_are_all_zero() {
        let d = uniform_pair();
        let gm = GridMechanism::from_menu_on(&Menu::null_only(), &d, 9, &tol());
        let (map, report) = classify_regions(&gm, &tol());
        assert_eq!(map.count(RegionLabel::Zero), 81);
        assert!(report.all_hold(), "witnesses: {:?}", report.witnesses);
    }

    #[test]
    fn segment_decomposition_examples() {
        let xs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();

        let linear: Vec<f64> = xs.iter().map(|x| 0.3 * x + 0.1).collect();
        let d = piecewise_linear_segments(&xs, &linear, 1e-4);
        assert_eq!(d.segment_count(), 1);
        assert_abs_diff_eq!(d.slopes[0], 0.3, epsilon = 1e-12);

        let hinge: Vec<f64> = xs.iter().map(|x| (x - 0.5f64).max(0.0)).collect();
        let d = piecewise_linear_segments(&xs, &hinge, 1e-4);
        assert_eq!(d.segment_count(), 2);
        assert_abs_diff_eq!(d.slopes[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.slopes[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.breakpoints[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn segment_count_matches_distinct_slopes_on_synthetic_convex_pl() {
        let xs: Vec<f64> = (0..=60).map(|k| k as f64 / 60.0).collect();
        // Convex piecewise-linear: slopes 0, 0.4, 1 with grid-aligned kinks.
        let f = |x: f64| 0.0f64.max(0.4 * (x - 0.3)).max(x - 0.6);
        let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let d = piecewise_linear_segments(&xs, &values, 1e-4);
        assert_eq!(d.segment_count(), 3);
        let mut slopes = d.slopes.clone();
        slopes.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
        assert_eq!(slopes.len(), 3);
    }

    #[test]
    fn count_menu_items_on_bundle() {
        let d = uniform_pair();
        let gm = GridMechanism::from_menu_on(&Menu::bundle(0.9), &d, 15, &tol());
        let (raw, clustered) = count_menu_items(&gm, 5e-3);
        assert_eq!(raw, 2);
        assert_eq!(clustered, 2);
    }

    #[test]
    fn full_region_upward_closed_for_any_valid_menu_mechanism() {
        let d = uniform_pair();
        let menus = vec![
            Menu::separate(0.45, 0.6),
            Menu::new(
                vec![
                    MenuItem::NULL,
                    MenuItem {
                        q1: 1.0,
                        q2: 0.3,
                        t: 0.5,
                    },
                    MenuItem {
                        q1: 0.3,
                        q2: 1.0,
                        t: 0.5,
                    },
                    MenuItem {
                        q1: 1.0,
                        q2: 1.0,
                        t: 0.9,
                    },
                ],
                &tol(),
            ),
        ];
        for menu in menus {
            let gm = GridMechanism::from_menu_on(&menu, &d, 19, &tol());
            let (_, report) = classify_regions(&gm, &tol());
            assert!(
                report.full_upward_closed,
                "witnesses: {:?}",
                report.witnesses
            );
        }
    }
}
