//! Scenario ingestion and experiment orchestration: parse a JSON config,
//! run the declared experiments per scenario, and emit deterministic CSV
//! artifacts plus a summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baselines::{audit_ratios, BaselineReport};
use crate::constructive::verify_condition1_improvement;
use crate::csvio;
use crate::distributions::{
    check_condition, fosd_dominates, Density1D, DensityKind, ProductDistribution,
};
use crate::error::{Error, Result};
use crate::lp_solver::{discretize, solve_optimal, MAX_GRID_TYPES};
use crate::mechanism::GridMechanism;
use crate::menu_analysis::{
    check_menu_monotonicity, classify_regions, count_menu_items, edge_utilities, extract_menu,
    piecewise_linear_segments,
};
use crate::numerics::{QuadratureSpec, ToleranceConfig};
use crate::parametric::{gap_vs_lp, FamilyId, MenuFamily};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "MENULAB_OUT_DIR";

/// Marginal specification as it appears in scenario configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(flatten)]
    pub kind: DensityKind,
    pub support: [f64; 2],
}

impl DensitySpec {
    pub fn build(&self) -> Result<Density1D> {
        Density1D::new(self.kind.clone(), self.support[0], self.support[1])
    }
}

/// One experiment to run on a scenario.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ExperimentSpec {
    /// Solve the LP and emit instance/mechanism/menu artifacts.
    Solve,
    /// Region, menu-count, monotonicity, and edge-segment analysis.
    Analyze,
    /// Baseline revenues and approximation-ratio audits.
    Audit,
    /// Revenue monotonicity against a stochastically dominant scenario.
    FosdPair { other: String },
    /// Two-step supremum transform and weak-improvement check.
    Constructive,
    /// Parametric family optimization and LP gap.
    Parametric { family: String },
}

/// A named distribution pair with a grid size and an experiment list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub dx: DensitySpec,
    pub dy: DensitySpec,
    pub grid_n: usize,
    #[serde(default)]
    pub unit_demand: bool,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub scenarios: Vec<Scenario>,
}

/// Result of one experiment; `passed` is `None` for report-only experiments
/// and experiments whose preconditions did not hold.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub scenario: String,
    pub experiment: String,
    pub passed: Option<bool>,
    pub details: Vec<String>,
    pub duration: Duration,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub outcomes: Vec<ExperimentOutcome>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed != Some(false))
    }
}

fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1_0000_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn parse_config(text: &str) -> Result<Config> {
    let config: Config = serde_json::from_str(text).map_err(|e| Error::Config {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(Error::Config {
            line: 1,
            column: 1,
            message: format!(
                "schema version {} not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            ),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &config.scenarios {
        if !seen.insert(s.id.clone()) {
            return Err(Error::Config {
                line: 1,
                column: 1,
                message: format!("duplicate scenario id {}", s.id),
            });
        }
        if s.grid_n * s.grid_n > MAX_GRID_TYPES {
            return Err(Error::Config {
                line: 1,
                column: 1,
                message: format!(
                    "scenario {}: grid_n {} exceeds the solver guard",
                    s.id, s.grid_n
                ),
            });
        }
    }
    for s in &config.scenarios {
        for e in &s.experiments {
            if let ExperimentSpec::FosdPair { other } = e {
                if !seen.contains(other) {
                    return Err(Error::Config {
                        line: 1,
                        column: 1,
                        message: format!("scenario {} references unknown scenario {other}", s.id),
                    });
                }
            }
        }
    }
    Ok(config)
}

fn scenario_distribution(s: &Scenario) -> Result<ProductDistribution> {
    ProductDistribution::new(s.dx.build()?, s.dy.build()?)
}

/// Payment-grid monotonicity under the highest-payment tie rule.
fn payment_grid_monotone(gm: &GridMechanism, tol: &ToleranceConfig) -> (bool, bool) {
    let menu = extract_menu(gm, 1e-9);
    let rebuilt = GridMechanism::from_menu(&menu, gm.xs.clone(), gm.ys.clone(), tol);
    let slack = 1e-9;
    let mut in_x = true;
    let mut in_y = true;
    for j in 0..rebuilt.ny() {
        for i in 1..rebuilt.nx() {
            if rebuilt.t.get(i, j) < rebuilt.t.get(i - 1, j) - slack {
                in_x = false;
            }
        }
    }
    for i in 0..rebuilt.nx() {
        for j in 1..rebuilt.ny() {
            if rebuilt.t.get(i, j) < rebuilt.t.get(i, j - 1) - slack {
                in_y = false;
            }
        }
    }
    (in_x, in_y)
}

/// Outcome of the revenue-monotonicity experiment on a dominated/dominant
/// scenario pair.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub preconditions_hold: bool,
    pub precondition_details: Vec<String>,
    pub revenue_low: f64,
    pub revenue_high: f64,
    /// `Some(ok)` only when the preconditions held.
    pub revenue_monotone: Option<bool>,
    pub payment_monotone_low: (bool, bool),
    pub payment_monotone_high: (bool, bool),
}

/// Solves the dominated and dominant scenarios on aligned grids and checks
/// that optimal revenue does not fall, along with the payment-grid
/// monotonicity used in the proof. Precondition failures (dominance or the
/// negative-delta condition) are reported with margins, not asserted.
pub fn revenue_monotonicity_experiment(
    d_low: &ProductDistribution,
    d_high: &ProductDistribution,
    n: usize,
    tol: &ToleranceConfig,
) -> Result<MonotonicityReport> {
    let mut details = Vec::new();
    let mut preconditions = true;

    if !fosd_dominates(d_high.dx(), d_low.dx(), 512, tol) {
        preconditions = false;
        details.push("first marginal of the high scenario does not dominate".into());
    }
    if !fosd_dominates(d_high.dy(), d_low.dy(), 512, tol) {
        preconditions = false;
        details.push("second marginal of the high scenario does not dominate".into());
    }
    for (name, d) in [("low", d_low), ("high", d_high)] {
        let c = check_condition(d, 1, 48, tol)?;
        if !c.holds {
            preconditions = false;
            details.push(format!(
                "condition 1 fails for the {name} scenario (margin {:.6})",
                c.worst_margin
            ));
        }
    }

    let gm_low = solve_optimal(&discretize(d_low, n)?, false)?;
    let gm_high = solve_optimal(&discretize(d_high, n)?, false)?;
    let revenue_low = gm_low.expected_revenue();
    let revenue_high = gm_high.expected_revenue();

    Ok(MonotonicityReport {
        preconditions_hold: preconditions,
        precondition_details: details,
        revenue_low,
        revenue_high,
        revenue_monotone: preconditions.then_some(revenue_high >= revenue_low - 1e-6),
        payment_monotone_low: payment_grid_monotone(&gm_low, tol),
        payment_monotone_high: payment_grid_monotone(&gm_high, tol),
    })
}

fn family_from_name(name: &str) -> Result<FamilyId> {
    match name {
        "four_item" => Ok(FamilyId::FourItem),
        "three_item" => Ok(FamilyId::ThreeItem),
        "six_item_symmetric" => Ok(FamilyId::SixItemSymmetric),
        "unit_demand_five" => Ok(FamilyId::UnitDemandFive),
        other => Err(Error::Config {
            line: 1,
            column: 1,
            message: format!("unknown menu family {other}"),
        }),
    }
}

/// Computed artifacts of one scenario, cached across its experiments.
struct ScenarioState {
    d: ProductDistribution,
    mechanism: Option<GridMechanism>,
}

impl ScenarioState {
    fn mechanism(&mut self, s: &Scenario) -> Result<&GridMechanism> {
        if self.mechanism.is_none() {
            let inst = discretize(&self.d, s.grid_n)?;
            self.mechanism = Some(solve_optimal(&inst, s.unit_demand)?);
        }
        Ok(self.mechanism.as_ref().unwrap())
    }
}

/// A deterministic key/value artifact.
fn write_kv_csv(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Runs every experiment of one scenario sequentially, returning outcomes
/// and any baseline rows produced. Failed gates become report-only outcomes;
/// anything else aborts the scenario.
fn run_scenario(
    s: &Scenario,
    dists: &BTreeMap<String, ProductDistribution>,
    out_dir: &Path,
    tol: &ToleranceConfig,
    spec: &QuadratureSpec,
) -> Result<(Vec<ExperimentOutcome>, Vec<BaselineReport>)> {
    let mut state = ScenarioState {
        d: dists[&s.id].clone(),
        mechanism: None,
    };
    let mut outcomes = Vec::new();
    let mut baseline_rows = Vec::new();
    for exp in &s.experiments {
        let started = Instant::now();
        let (label, passed, details) = match run_experiment(
            s,
            exp,
            &mut state,
            dists,
            out_dir,
            tol,
            spec,
            &mut baseline_rows,
        ) {
            Ok(outcome) => outcome,
            // A failed gate is an outcome, not a run abort.
            Err(Error::Precondition(msg)) => ("precondition".to_string(), None, vec![msg]),
            Err(e @ (Error::Config { .. } | Error::Io(_))) => return Err(e),
            Err(e) => {
                return Err(Error::Solver(format!("scenario {}: {e}", s.id)));
            }
        };
        outcomes.push(ExperimentOutcome {
            scenario: s.id.clone(),
            experiment: label,
            passed,
            details,
            duration: started.elapsed(),
        });
    }
    Ok((outcomes, baseline_rows))
}

/// Executes the config at `path` and writes artifacts. The artifact
/// directory resolves from the `MENULAB_OUT_DIR` environment variable, then
/// the config's `out_dir`, then `menulab_out`.
pub fn run(config_path: &Path) -> Result<RunReport> {
    run_with_options(config_path, false)
}

/// `run` with optional scenario-level concurrency. Scenario pipelines are
/// independent (they write distinct files and only read each other's
/// distributions), so results and artifacts are identical either way; the
/// shared artifacts are merged in declaration order.
pub fn run_with_options(config_path: &Path, parallel: bool) -> Result<RunReport> {
    let text = std::fs::read_to_string(config_path)?;
    let config = parse_config(&text)?;
    let out_dir = std::env::var(OUT_DIR_ENV)
        .ok()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| "menulab_out".to_string());
    let out_dir = PathBuf::from(out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let tol = ToleranceConfig::default();
    let spec = QuadratureSpec::default();
    let mut dists: BTreeMap<String, ProductDistribution> = BTreeMap::new();
    for s in &config.scenarios {
        dists.insert(s.id.clone(), scenario_distribution(s)?);
    }

    let per_scenario: Vec<Result<(Vec<ExperimentOutcome>, Vec<BaselineReport>)>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = config
                .scenarios
                .iter()
                .map(|s| scope.spawn(|| run_scenario(s, &dists, &out_dir, &tol, &spec)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        })
    } else {
        config
            .scenarios
            .iter()
            .map(|s| run_scenario(s, &dists, &out_dir, &tol, &spec))
            .collect()
    };

    let mut outcomes = Vec::new();
    let mut baseline_rows: Vec<BaselineReport> = Vec::new();
    for result in per_scenario {
        let (scenario_outcomes, scenario_rows) = result?;
        outcomes.extend(scenario_outcomes);
        baseline_rows.extend(scenario_rows);
    }

    // Baseline rows collect across scenarios into one artifact.
    if !baseline_rows.is_empty() {
        let mut out = String::from(BaselineReport::csv_header());
        out.push('\n');
        for row in &baseline_rows {
            out.push_str(&row.to_csv_row());
            out.push('\n');
        }
        std::fs::write(out_dir.join("baselines.csv"), out)?;
    }

    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: fnv1a_hex(text.as_bytes()),
        out_dir: out_dir.clone(),
        outcomes,
    };

    let mut summary = format!(
        "menulab {} config_hash={} scenarios={}\n",
        report.version,
        report.config_hash,
        config.scenarios.len()
    );
    for o in &report.outcomes {
        let status = match o.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "report",
        };
        summary.push_str(&format!("{} {} {}", o.scenario, o.experiment, status));
        for d in &o.details {
            summary.push_str(&format!(" | {d}"));
        }
        summary.push('\n');
    }
    std::fs::write(out_dir.join("summary.txt"), summary)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_experiment(
    s: &Scenario,
    exp: &ExperimentSpec,
    state: &mut ScenarioState,
    dists: &BTreeMap<String, ProductDistribution>,
    out_dir: &Path,
    tol: &ToleranceConfig,
    spec: &QuadratureSpec,
    baseline_rows: &mut Vec<BaselineReport>,
) -> Result<(String, Option<bool>, Vec<String>)> {
    match exp {
        ExperimentSpec::Solve => {
            let inst = discretize(&state.d, s.grid_n)?;
            std::fs::write(
                out_dir.join(format!("{}_instance.csv", s.id)),
                inst.to_csv(),
            )?;
            let gm = state.mechanism(s)?;
            std::fs::write(out_dir.join(format!("{}_mechanism.csv", s.id)), gm.to_csv())?;
            let menu = extract_menu(gm, tol.clustering_tol);
            std::fs::write(out_dir.join(format!("{}_menu.csv", s.id)), menu.to_csv())?;
            let details = vec![format!("revenue {}", csvio::sig12(gm.expected_revenue()))];
            Ok(("solve".into(), None, details))
        }
        ExperimentSpec::Analyze => {
            let gm = state.mechanism(s)?.clone();
            let (map, geometry) = classify_regions(&gm, tol);
            std::fs::write(
                out_dir.join(format!("{}_regions.csv", s.id)),
                map.to_csv(&gm.xs, &gm.ys),
            )?;

            let menu = extract_menu(&gm, tol.clustering_tol);
            let (monotone, _) = check_menu_monotonicity(&menu, tol);
            let edges = edge_utilities(&gm);
            let right = piecewise_linear_segments(&gm.ys, &edges.right, tol.slope_tol);
            let top = piecewise_linear_segments(&gm.xs, &edges.top, tol.slope_tol);

            let mut rows: Vec<(String, String)> = Vec::new();
            let (raw, _) = count_menu_items(&gm, tol.clustering_tol);
            rows.push(("raw_items".into(), raw.to_string()));
            // Clustering sensitivity sweep, reported side by side.
            for cluster_tol in [1e-3, 5e-3, 1e-2] {
                let (_, clustered) = count_menu_items(&gm, cluster_tol);
                rows.push((
                    format!("clustered_items_tol_{cluster_tol:e}"),
                    clustered.to_string(),
                ));
            }
            rows.push(("menu_monotone".into(), monotone.to_string()));
            rows.push((
                "right_edge_segments".into(),
                right.segment_count().to_string(),
            ));
            rows.push(("top_edge_segments".into(), top.segment_count().to_string()));
            rows.push(("other_labels".into(), geometry.other_count.to_string()));
            rows.push(("geometry_all_hold".into(), geometry.all_hold().to_string()));
            rows.push((
                "full_touches_zero".into(),
                geometry.full_touches_zero.to_string(),
            ));
            write_kv_csv(&out_dir.join(format!("{}_analysis.csv", s.id)), &rows)?;
            Ok((
                "analyze".into(),
                None,
                vec![format!("geometry {}", geometry.all_hold())],
            ))
        }
        ExperimentSpec::Audit => {
            let report = audit_ratios(&s.id, &state.d, s.grid_n, tol)?;
            let passed = report.all_applicable_pass;
            let details = report.audit_outcomes.clone();
            baseline_rows.push(report);
            Ok(("audit".into(), Some(passed), details))
        }
        ExperimentSpec::FosdPair { other } => {
            let d_low = state.d.clone();
            let d_high = dists[other].clone();
            let report = revenue_monotonicity_experiment(&d_low, &d_high, s.grid_n, tol)?;
            let mut rows: Vec<(String, String)> = vec![
                ("revenue_low".into(), csvio::sig12(report.revenue_low)),
                ("revenue_high".into(), csvio::sig12(report.revenue_high)),
                (
                    "preconditions_hold".into(),
                    report.preconditions_hold.to_string(),
                ),
            ];
            for d in &report.precondition_details {
                rows.push(("precondition".into(), d.replace(',', ";")));
            }
            rows.push((
                "revenue_monotone".into(),
                report
                    .revenue_monotone
                    .map(|b| b.to_string())
                    .unwrap_or_else(|| "n/a".into()),
            ));
            rows.push((
                "payment_monotone_low".into(),
                format!(
                    "{}/{}",
                    report.payment_monotone_low.0, report.payment_monotone_low.1
                ),
            ));
            rows.push((
                "payment_monotone_high".into(),
                format!(
                    "{}/{}",
                    report.payment_monotone_high.0, report.payment_monotone_high.1
                ),
            ));
            write_kv_csv(
                &out_dir.join(format!("{}_vs_{}_monotonicity.csv", s.id, other)),
                &rows,
            )?;
            let details: Vec<String> = report
                .precondition_details
                .iter()
                .cloned()
                .chain(std::iter::once(format!(
                    "revenue {} -> {}",
                    csvio::sig12(report.revenue_low),
                    csvio::sig12(report.revenue_high)
                )))
                .collect();
            Ok(("fosd_pair".into(), report.revenue_monotone, details))
        }
        ExperimentSpec::Constructive => {
            let gm = state.mechanism(s)?.clone();
            let d = state.d.clone();
            // Rebuild on a support-spanning grid for the boundary formula.
            let menu = extract_menu(&gm, tol.clustering_tol);
            let full = GridMechanism::from_menu_on(&menu, &d, 33, tol);
            let report = verify_condition1_improvement(&full, &d, spec, tol)?;
            let rows: Vec<(String, String)> = vec![
                ("input_revenue".into(), csvio::sig12(report.input_revenue)),
                ("output_revenue".into(), csvio::sig12(report.output_revenue)),
                (
                    "min_pointwise_margin".into(),
                    csvio::sig12(report.min_pointwise_margin),
                ),
                ("edge_mismatch".into(), csvio::sig12(report.edge_mismatch)),
                ("plane_count".into(), report.plane_count.to_string()),
            ];
            write_kv_csv(&out_dir.join(format!("{}_constructive.csv", s.id)), &rows)?;
            let passed = report.output_revenue >= report.input_revenue - 1e-6
                && report.min_pointwise_margin >= -1e-6
                && report.edge_mismatch <= 1e-6;
            Ok(("constructive".into(), Some(passed), vec![]))
        }
        ExperimentSpec::Parametric { family } => {
            let id = family_from_name(family)?;
            let fam = MenuFamily::new(id, &state.d);
            let gap = gap_vs_lp(&fam, &state.d, s.grid_n, 8, tol)?;
            let (menu, _) = fam.instantiate(&gap.params, tol)?;
            std::fs::write(
                out_dir.join(format!("{}_parametric_{}_menu.csv", s.id, family)),
                menu.to_csv(),
            )?;
            let record = serde_json::json!({
                "family": family,
                "names": fam.names,
                "params": gap.params,
                "lp_revenue": gap.lp_revenue,
                "family_revenue": gap.family_revenue,
                "relative_gap": gap.relative_gap,
            });
            std::fs::write(
                out_dir.join(format!("{}_parametric_{}.json", s.id, family)),
                serde_json::to_string_pretty(&record).expect("json"),
            )?;
            let details = vec![format!("gap {}", csvio::sig12(gap.relative_gap))];
            Ok(("parametric".into(), None, details))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parse_and_validation() {
        let good = r#"{
            "schema_version": 1,
            "scenarios": [
                {"id": "a", "dx": {"kind": "uniform", "support": [0, 1]},
                 "dy": {"kind": "uniform", "support": [0, 1]},
                 "grid_n": 5, "experiments": [{"op": "solve"}]}
            ]
        }"#;
        let config = parse_config(good).unwrap();
        assert_eq!(config.scenarios.len(), 1);
        assert_eq!(config.scenarios[0].experiments, vec![ExperimentSpec::Solve]);

        let bad_version = good.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            parse_config(&bad_version),
            Err(Error::Config { .. })
        ));

        let bad_ref = good.replace(
            r#"{"op": "solve"}"#,
            r#"{"op": "fosd_pair", "other": "missing"}"#,
        );
        assert!(matches!(parse_config(&bad_ref), Err(Error::Config { .. })));

        let err = parse_config("{ not json").unwrap_err();
        match err {
            Error::Config { line, .. } => assert!(line >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn density_spec_round_trip() {
        let text = r#"{"kind": "power", "a": 2.0, "b": -2.0, "support": [1, 2]}"#;
        let spec: DensitySpec = serde_json::from_str(text).unwrap();
        let d = spec.build().unwrap();
        assert_eq!(d.support(), (1.0, 2.0));
        assert!((d.power_rate(1.5).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_scenarios_have_equal_revenue() {
        let tol = ToleranceConfig::default();
        let d = ProductDistribution::iid(Density1D::power(2.0, -2.0, 1.0, 2.0).unwrap()).unwrap();
        let report = revenue_monotonicity_experiment(&d, &d, 5, &tol).unwrap();
        // Identical marginals cannot strictly dominate themselves.
        assert!(!report.preconditions_hold);
        assert!((report.revenue_low - report.revenue_high).abs() <= 1e-8);
    }

    #[test]
    fn monotonicity_reports_precondition_failure_without_asserting() {
        let tol = ToleranceConfig::default();
        let low = ProductDistribution::iid(Density1D::uniform(0.0, 1.0).unwrap()).unwrap();
        let high = ProductDistribution::iid(Density1D::uniform(0.2, 1.2).unwrap()).unwrap();
        let report = revenue_monotonicity_experiment(&low, &high, 5, &tol).unwrap();
        assert!(
            !report.preconditions_hold,
            "uniform violates the negative-delta condition"
        );
        assert!(report.revenue_monotone.is_none());
        assert!(!report.precondition_details.is_empty());
    }
}
