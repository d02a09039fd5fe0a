//! Small-menu families with box-bounded parameter vectors, optimized by
//! multi-start simplex search and compared against the LP optimum on a
//! shared discrete instance.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::ProductDistribution;
use crate::error::{Error, Result};
use crate::lp_solver::{discretize, solve_optimal, DiscreteInstance};
use crate::mechanism::{menu_revenue_fixed, Menu, MenuItem};
use crate::numerics::{nelder_mead_from, NelderMeadOptions, QuadratureSpec, ToleranceConfig};

/// The four structured menu shapes known to cover the optimum in their
/// respective density regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyId {
    /// Null, one item-1-heavy, one item-2-heavy, and the full bundle.
    FourItem,
    /// Null, one item-1-heavy, and the full bundle.
    ThreeItem,
    /// Symmetric pairs plus the bundle; requires identical marginals.
    SixItemSymmetric,
    /// Unit-demand menu: two pure posted prices and two mixing items.
    UnitDemandFive,
}

/// A parameterized menu family with named components and box bounds.
#[derive(Debug, Clone)]
pub struct MenuFamily {
    pub id: FamilyId,
    pub names: Vec<&'static str>,
    pub bounds: Vec<(f64, f64)>,
}

impl MenuFamily {
    /// Builds the family for a given valuation rectangle; payments are
    /// bounded by the maximal total surplus.
    pub fn new(id: FamilyId, d: &ProductDistribution) -> Self {
        let r = d.rect();
        let t_max = r.x_hi + r.y_hi;
        let t = (0.0, t_max);
        let q = (0.0, 1.0);
        let (names, bounds) = match id {
            FamilyId::FourItem => (
                vec!["alpha", "beta", "t_alpha", "t_beta", "t_bundle"],
                vec![q, q, t, t, t],
            ),
            FamilyId::ThreeItem => (vec!["alpha", "t_alpha", "t_bundle"], vec![q, t, t]),
            FamilyId::SixItemSymmetric => (
                vec!["alpha1", "alpha2", "t1", "t2", "t_bundle"],
                vec![q, q, t, t, t],
            ),
            FamilyId::UnitDemandFive => (
                vec!["alpha", "beta", "t1", "t2", "t_alpha", "t_beta"],
                vec![q, q, t, t, t, t],
            ),
        };
        Self { id, names, bounds }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Instantiates the menu at `params`; out-of-box parameters are clamped
    /// to the nearest valid point and flagged.
    pub fn instantiate(&self, params: &[f64], tol: &ToleranceConfig) -> Result<(Menu, bool)> {
        if params.len() != self.dimension() {
            return Err(Error::Precondition(format!(
                "family expects {} parameters, got {}",
                self.dimension(),
                params.len()
            )));
        }
        let mut clamped = false;
        let p: Vec<f64> = params
            .iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                let c = v.clamp(lo, hi);
                if (c - v).abs() > 1e-12 {
                    clamped = true;
                }
                c
            })
            .collect();
        let items = match self.id {
            FamilyId::FourItem => vec![
                MenuItem {
                    q1: 1.0,
                    q2: p[0],
                    t: p[2],
                },
                MenuItem {
                    q1: p[1],
                    q2: 1.0,
                    t: p[3],
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: p[4],
                },
            ],
            FamilyId::ThreeItem => vec![
                MenuItem {
                    q1: 1.0,
                    q2: p[0],
                    t: p[1],
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: p[2],
                },
            ],
            FamilyId::SixItemSymmetric => vec![
                MenuItem {
                    q1: 1.0,
                    q2: p[0],
                    t: p[2],
                },
                MenuItem {
                    q1: 1.0,
                    q2: p[1],
                    t: p[3],
                },
                MenuItem {
                    q1: p[0],
                    q2: 1.0,
                    t: p[2],
                },
                MenuItem {
                    q1: p[1],
                    q2: 1.0,
                    t: p[3],
                },
                MenuItem {
                    q1: 1.0,
                    q2: 1.0,
                    t: p[4],
                },
            ],
            FamilyId::UnitDemandFive => vec![
                MenuItem {
                    q1: 1.0,
                    q2: 0.0,
                    t: p[2],
                },
                MenuItem {
                    q1: 0.0,
                    q2: 1.0,
                    t: p[3],
                },
                MenuItem {
                    q1: 1.0 - p[0],
                    q2: p[0],
                    t: p[4],
                },
                MenuItem {
                    q1: p[1],
                    q2: 1.0 - p[1],
                    t: p[5],
                },
            ],
        };
        Ok((Menu::new(items, tol), clamped))
    }

    /// Deterministic stratified seed set covering the parameter box.
    pub fn seed_points(&self, restarts: usize) -> Vec<Vec<f64>> {
        let dim = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d_65_6e_75 ^ (dim as u64) << 8);
        let mut seeds = Vec::with_capacity(restarts);
        for r in 0..restarts {
            let point: Vec<f64> = self
                .bounds
                .iter()
                .map(|&(lo, hi)| {
                    // One stratum per restart along each axis, jittered.
                    let stratum = (r as f64 + rng.gen_range(0.05..0.95)) / restarts as f64;
                    lo + (hi - lo) * stratum
                })
                .collect();
            seeds.push(point);
        }
        seeds
    }

    /// Lifts a smaller family's optimum into this family by duplicating
    /// items, so the search is guaranteed to start no worse than the nested
    /// optimum. Supported: three-item into four-item, four-item into the
    /// symmetric six-item family (symmetrizing the two slice items).
    pub fn embed(&self, from: &MenuFamily, params: &[f64]) -> Option<Vec<f64>> {
        match (from.id, self.id) {
            (FamilyId::ThreeItem, FamilyId::FourItem) => {
                // The second slice item duplicates the bundle.
                Some(vec![params[0], 1.0, params[1], params[2], params[2]])
            }
            (FamilyId::FourItem, FamilyId::SixItemSymmetric) => {
                let alpha = 0.5 * (params[0] + params[1]);
                let t_slice = 0.5 * (params[2] + params[3]);
                Some(vec![alpha, alpha, t_slice, t_slice, params[4]])
            }
            _ => None,
        }
    }
}

/// Quadrature used for the continuous objective inside the optimizer.
fn objective_spec() -> QuadratureSpec {
    QuadratureSpec::new(8, 48)
}

/// Multi-start search over the family's parameter box, maximizing continuous
/// menu revenue. Deterministic given the restart count.
pub fn optimize_family(
    fam: &MenuFamily,
    d: &ProductDistribution,
    restarts: usize,
    tol: &ToleranceConfig,
) -> Result<(Vec<f64>, f64)> {
    optimize_family_seeded(fam, d, restarts, &[], tol)
}

/// `optimize_family` with extra caller-supplied seed points (used to realize
/// family-nesting guarantees).
pub fn optimize_family_seeded(
    fam: &MenuFamily,
    d: &ProductDistribution,
    restarts: usize,
    extra_seeds: &[Vec<f64>],
    tol: &ToleranceConfig,
) -> Result<(Vec<f64>, f64)> {
    assert!(
        restarts >= 8,
        "family optimization expects at least 8 restarts"
    );
    if fam.id == FamilyId::SixItemSymmetric && !d.is_iid() {
        return Err(Error::Precondition(
            "the symmetric six-item family requires identical marginals".into(),
        ));
    }
    let spec = objective_spec();
    let mut objective = |p: &[f64]| -> f64 {
        match fam.instantiate(p, tol) {
            Ok((menu, _)) => menu_revenue_fixed(&menu, d, &spec).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let opts = NelderMeadOptions::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut seeds = fam.seed_points(restarts);
    seeds.extend_from_slice(extra_seeds);
    for seed in &seeds {
        let (p, v) = nelder_mead_from(&mut objective, seed, &opts);
        let p: Vec<f64> = p
            .iter()
            .zip(&fam.bounds)
            .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
            .collect();
        let v = objective(&p).max(v);
        let replace = match &best {
            None => true,
            Some((bp, bv)) => v > *bv + 1e-15 || ((v - *bv).abs() <= 1e-15 && p < *bp),
        };
        if replace {
            best = Some((p, v));
        }
    }
    Ok(best.unwrap())
}

/// Expected payment of a menu on a discrete instance via per-type best
/// responses.
pub fn menu_revenue_on_instance(
    menu: &Menu,
    inst: &DiscreteInstance,
    tol: &ToleranceConfig,
) -> f64 {
    let mut total = 0.0;
    for (i, &x) in inst.xs.iter().enumerate() {
        for (j, &y) in inst.ys.iter().enumerate() {
            let (k, _) = menu.best_response(x, y, tol);
            total += menu.items()[k].t * inst.mass.get(i, j);
        }
    }
    total
}

/// Gap report between the LP optimum and the optimized family on one shared
/// instance.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub lp_revenue: f64,
    pub family_revenue: f64,
    /// `(lp - family) / lp`.
    pub relative_gap: f64,
    pub params: Vec<f64>,
}

/// Optimizes the family, polishes the parameters against the instance
/// revenue so both sides of the gap share discretization error, and reports
/// the relative gap to the LP optimum.
pub fn gap_vs_lp(
    fam: &MenuFamily,
    d: &ProductDistribution,
    n: usize,
    restarts: usize,
    tol: &ToleranceConfig,
) -> Result<GapReport> {
    let inst = discretize(d, n)?;
    let lp_revenue = solve_optimal(&inst, false)?.expected_revenue();
    gap_vs_lp_on(fam, d, &inst, lp_revenue, restarts, tol)
}

/// `gap_vs_lp` against an already-solved instance.
pub fn gap_vs_lp_on(
    fam: &MenuFamily,
    d: &ProductDistribution,
    inst: &DiscreteInstance,
    lp_revenue: f64,
    restarts: usize,
    tol: &ToleranceConfig,
) -> Result<GapReport> {
    let (continuous_params, _) = optimize_family_seeded(fam, d, restarts, &[], tol)?;
    let mut discrete_objective = |p: &[f64]| -> f64 {
        match fam.instantiate(p, tol) {
            Ok((menu, _)) => menu_revenue_on_instance(&menu, inst, tol),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let opts = NelderMeadOptions {
        initial_step: 0.05,
        ..NelderMeadOptions::default()
    };
    let (params, family_revenue) =
        nelder_mead_from(&mut discrete_objective, &continuous_params, &opts);
    let params: Vec<f64> = params
        .iter()
        .zip(&fam.bounds)
        .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
        .collect();
    let family_revenue = discrete_objective(&params).max(family_revenue);

    Ok(GapReport {
        lp_revenue,
        family_revenue,
        relative_gap: (lp_revenue - family_revenue) / lp_revenue.max(1e-300),
        params,
    })
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
    fn degenerate_four_item_collapses_to_bundle() {
        let d = uniform_pair();
        let fam = MenuFamily::new(FamilyId::FourItem, &d);
        let (menu, clamped) = fam.instantiate(&[1.0, 1.0, 0.7, 0.7, 0.7], &tol()).unwrap();
        assert!(!clamped);
        assert_eq!(menu.len(), 2);
    }

    #[test]
    fn separate_style_four_item_construction() {
        let d = uniform_pair();
        let fam = MenuFamily::new(FamilyId::FourItem, &d);
        let (menu, _) = fam.instantiate(&[0.0, 0.0, 0.5, 0.5, 1.0], &tol()).unwrap();
        assert_eq!(menu.len(), 4);
        let rev = menu_revenue_fixed(&menu, &d, &QuadratureSpec::new(8, 64)).unwrap();
        assert_abs_diff_eq!(rev, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn unit_demand_items_split_one_unit() {
        let d = uniform_pair();
        let fam = MenuFamily::new(FamilyId::UnitDemandFive, &d);
        let (menu, _) = fam
            .instantiate(&[0.3, 0.3, 0.4, 0.4, 0.35, 0.35], &tol())
            .unwrap();
        for item in menu.items() {
            let total = item.q1 + item.q2;
            assert!(total.abs() < 1e-12 || (total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_box_parameters_are_clamped_and_flagged() {
        let d = uniform_pair();
        let fam = MenuFamily::new(FamilyId::ThreeItem, &d);
        let (menu, clamped) = fam.instantiate(&[1.4, -0.2, 0.9], &tol()).unwrap();
        assert!(clamped);
        for item in menu.items() {
            assert!(item.q2 <= 1.0 && item.t >= 0.0);
        }
        assert!(fam.instantiate(&[0.5, 0.5], &tol()).is_err());
    }

    #[test]
    fn optimizer_is_deterministic() {
        let d = uniform_pair();
        let fam = MenuFamily::new(FamilyId::ThreeItem, &d);
        let a = optimize_family(&fam, &d, 8, &tol()).unwrap();
        let b = optimize_family(&fam, &d, 8, &tol()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn four_item_nests_three_item() {
        let d = uniform_pair();
        let cfg = tol();
        let three = MenuFamily::new(FamilyId::ThreeItem, &d);
        let four = MenuFamily::new(FamilyId::FourItem, &d);
        let (p3, r3) = optimize_family(&three, &d, 8, &cfg).unwrap();
        let embedded = four.embed(&three, &p3).unwrap();
        let (_, r4) = optimize_family_seeded(&four, &d, 8, &[embedded], &cfg).unwrap();
        assert!(r4 >= r3 - 1e-6, "nesting violated: {r3} vs {r4}");
    }

    #[test]
    fn six_item_family_requires_identical_marginals() {
        let d = ProductDistribution::new(
            Density1D::uniform(0.0, 1.0).unwrap(),
            Density1D::uniform(0.5, 1.5).unwrap(),
        )
        .unwrap();
        let fam = MenuFamily::new(FamilyId::SixItemSymmetric, &d);
        assert!(optimize_family(&fam, &d, 8, &tol()).is_err());
    }

    #[test]
    fn every_instantiated_menu_validates_as_mechanism() {
        let d = uniform_pair();
        let cfg = tol();
        for id in [
            FamilyId::FourItem,
            FamilyId::ThreeItem,
            FamilyId::SixItemSymmetric,
            FamilyId::UnitDemandFive,
        ] {
            let fam = MenuFamily::new(id, &d);
            for seed in fam.seed_points(5) {
                let (menu, _) = fam.instantiate(&seed, &cfg).unwrap();
                let gm = crate::mechanism::GridMechanism::from_menu_on(&menu, &d, 9, &cfg);
                let report = gm.validate(crate::mechanism::UnitDemandFlag::OFF, 1e-8);
                assert!(report.is_valid(), "{:?}: {:?}", id, report.failures);
            }
        }
    }
}
