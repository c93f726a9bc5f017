use equiders::dispatch::fit_scenario;
use equiders::domain::{Intervention, Scenario};
use equiders::ingest::fixtures::{affine_fixture, surplus_rich_fixture};
use equiders::linmodel::{
    build_linearized, export_mps, linearized_census, parse_mps, MilpModel, Owner, Relation, RowRole, VarKind, VarRole,
};
use equiders::solve::{solve_lp, LpStatus};

/// One gas-heated archetype with every intervention, alone in its tract,
/// under a budget.
fn single_archetype() -> Scenario {
    let mut s = surplus_rich_fixture();
    s.archetypes.truncate(1);
    let id = s.archetypes[0].id.clone();
    s.profiles.retain(|k, _| *k == id);
    s.budget = Some(1e4);
    s
}

fn built(s: &Scenario) -> (MilpModel, equiders::linmodel::ModelMap) {
    let fits = fit_scenario(s, 16).unwrap();
    build_linearized(s, &fits).unwrap()
}

#[test]
fn single_archetype_census() {
    let s = single_archetype();
    let c = linearized_census(&s);
    assert_eq!((c.columns, c.rows, c.binaries), (22, 29, 2));
    let (m, _) = built(&s);
    assert_eq!(m.num_vars(), 22);
    assert_eq!(m.num_rows(), 29);
    assert_eq!(m.binaries().count(), 2);
    m.validate().unwrap();
}

#[test]
fn census_matches_builds_across_fixtures() {
    let mut cases = vec![affine_fixture(), surplus_rich_fixture(), single_archetype()];
    let mut no_budget = single_archetype();
    no_budget.budget = None;
    cases.push(no_budget);
    let mut electric = surplus_rich_fixture();
    electric.archetypes[0].heating_fuel = equiders::domain::HeatingFuel::Electric;
    electric.archetypes[0].baseline_heating_fuel_expenditure = 0.0;
    cases.push(electric);
    cases.push(equiders::ingest::generate_synthetic(4, 2, 3, 48).unwrap());
    for s in &cases {
        let c = linearized_census(s);
        let (m, _) = built(s);
        assert_eq!((m.num_vars(), m.num_rows(), m.binaries().count()), (c.columns, c.rows, c.binaries));
    }
}

#[test]
fn net_metering_credits_every_flow_at_retail() {
    let s = affine_fixture().with_ratio(1.0);
    let (m, _) = built(&s);
    let a = &s.archetypes[0];
    let row = &m.constraints[m.row(&format!("burden[{}]", a.id)).unwrap()];
    let coeff = |name: &str| {
        let j = m.column(&format!("{name}[{}]", a.id)).unwrap();
        row.coeffs.iter().find(|&&(k, _)| k == j).map(|&(_, v)| v).unwrap()
    };
    let want = -s.tariff.electricity_price / a.annual_income;
    for name in ["sc", "st", "sg"] {
        assert!((coeff(name) - want).abs() < 1e-18, "{name}");
    }
    assert!((coeff("ec") - 1.0 / a.annual_income).abs() < 1e-18);
}

#[test]
fn net_billing_credits_exports_at_the_export_rate() {
    let s = affine_fixture();
    let (m, _) = built(&s);
    let a = &s.archetypes[0];
    let row = &m.constraints[m.row(&format!("burden[{}]", a.id)).unwrap()];
    let sg = m.column(&format!("sg[{}]", a.id)).unwrap();
    let got = row.coeffs.iter().find(|&&(k, _)| k == sg).unwrap().1;
    assert!((got + s.tariff.pv_remuneration / a.annual_income).abs() < 1e-18);
}

#[test]
fn zero_roof_prunes_rooftop_and_battery() {
    let mut s = affine_fixture();
    s.archetypes[0].max_rooftop_kw = 0.0;
    let (m, map) = built(&s);
    let id = &s.archetypes[0].id;
    for role in [VarRole::RooftopKw, VarRole::BatteryKwh, VarRole::SurplusFlag, VarRole::HasBattery, VarRole::SelfConsumed] {
        assert!(map.archetype_col(id, role).is_none(), "{role:?}");
    }
    assert_eq!(m.binaries().count(), 0);
    let c = linearized_census(&s);
    assert_eq!((m.num_vars(), m.num_rows()), (c.columns, c.rows));
    assert_eq!(c.columns, 2 + 4);
}

#[test]
fn ineligible_interventions_add_nothing() {
    let mut s = affine_fixture();
    s.archetypes[0].eligibility.remove(&Intervention::Battery);
    let (m, map) = built(&s);
    assert!(map.archetype_col(&s.archetypes[0].id, VarRole::BatteryKwh).is_none());
    assert_eq!(m.binaries().count(), 1);
}

#[test]
fn budget_row_sums_spend() {
    let s = single_archetype();
    let (m, map) = built(&s);
    let rows = map.rows(&Owner::Global, RowRole::Budget);
    assert_eq!(rows.len(), 1);
    let row = &m.constraints[rows[0]];
    assert_eq!(row.relation, Relation::Le);
    assert_eq!(row.rhs, 1e4);
    let nb = s.archetypes[0].count as f64;
    let id = &s.archetypes[0].id;
    for role in [VarRole::WeatherizationCost, VarRole::RooftopCost, VarRole::BatteryCost] {
        let j = map.archetype_col(id, role).unwrap();
        assert_eq!(row.coeffs.iter().find(|&&(k, _)| k == j).unwrap().1, nb);
    }
    let cs = map.tract_col(&s.tracts[0].id, VarRole::CommunitySolarCost).unwrap();
    assert_eq!(row.coeffs.iter().find(|&&(k, _)| k == cs).unwrap().1, 1.0);
}

/// With z, δ and d pinned, the disjunction rows leave exactly one value for
/// sc and st̄: the fitted lines above Z¹, and ζ·d with no storage below.
#[test]
fn disjunction_selects_the_active_branch() {
    let s = affine_fixture();
    let fits = fit_scenario(&s, 16).unwrap();
    let (m, map) = build_linearized(&s, &fits).unwrap();
    let a = &s.archetypes[0];
    let f = &fits[&a.id];
    let zeta = s.tracts[0].solar_annual_yield;
    let col = |r| map.archetype_col(&a.id, r).unwrap();
    let (d, z, delta, sc, stbar) = (
        col(VarRole::RooftopKw),
        col(VarRole::SurplusFlag),
        col(VarRole::HasBattery),
        col(VarRole::SelfConsumed),
        col(VarRole::StorageOpportunity),
    );
    for (zv, dv) in [(0.0, 0.0), (0.0, 0.4), (0.0, 1.0), (1.0, 1.0), (1.0, 2.5), (1.0, 4.0)] {
        let fixed = [(z, zv), (delta, 0.0), (d, dv)];
        let (want_sc, want_st) = if zv == 1.0 {
            (f.sc_line(dv), f.st_line(dv))
        } else {
            (zeta * dv, 0.0)
        };
        for sense in [1.0, -1.0] {
            for target in [sc, stbar] {
                let mut probe = m.clone();
                probe.set_objective([(target, sense)], 0.0);
                let lp = solve_lp(&probe, &fixed);
                assert_eq!(lp.status, LpStatus::Optimal, "z={zv} d={dv}");
                let tol = 1e-7 * zeta.max(1.0);
                assert!((lp.x[sc] - want_sc).abs() < tol, "z={zv} d={dv}: sc {} vs {want_sc}", lp.x[sc]);
                assert!((lp.x[stbar] - want_st).abs() < tol, "z={zv} d={dv}: st̄ {} vs {want_st}", lp.x[stbar]);
            }
        }
    }
    // z = 1 below Z¹ and z = 0 above it are both cut off.
    assert_eq!(solve_lp(&m, &[(z, 1.0), (d, 0.5)]).status, LpStatus::Infeasible);
    assert_eq!(solve_lp(&m, &[(z, 0.0), (d, 2.0)]).status, LpStatus::Infeasible);
}

#[test]
fn one_row_golden_file() {
    let mut m = MilpModel::new("one");
    let x = m.add_var("x", VarKind::Continuous, 0.0, 4.0);
    m.add_row("c1", [(x, 1.0)], Relation::Ge, 1.0);
    m.set_objective([(x, 2.0)], 0.0);
    let golden = include_str!("data/one_row.mps");
    let out = export_mps(&m);
    assert!(out.names.is_none());
    assert_eq!(out.text, golden);
    assert_eq!(parse_mps(golden).unwrap(), m);
}

#[test]
fn long_names_are_mangled_with_a_sidecar() {
    let (m, _) = built(&affine_fixture());
    let out = export_mps(&m);
    let names = out.names.expect("long names need a sidecar");
    assert_eq!(names.columns.len(), m.num_vars());
    assert_eq!(names.columns[0].0, "C0000001");
    assert_eq!(names.columns[0].1, m.variables[0].name);
    assert_eq!(names.rows.len(), m.num_rows());
    let back = parse_mps(&out.text).unwrap();
    assert_eq!(export_mps(&back).text, out.text);
    assert_eq!(back.objective, m.objective);
}

#[test]
fn mps_parse_errors() {
    let golden = include_str!("data/one_row.mps");
    let bad_section = golden.replace("RANGES", "SECTIONS");
    let e = parse_mps(&bad_section).unwrap_err();
    assert!(e.message.contains("unknown section `SECTIONS`"), "{e}");
    assert_eq!(e.line, 10);

    let bad_rhs = golden.replace("    RHS       c1", "    RHS       c9");
    let e = parse_mps(&bad_rhs).unwrap_err();
    assert!(e.message.contains("undeclared row `c9`"), "{e}");

    let bad_col = golden.replace("    x         c1", "    x         c2");
    assert!(parse_mps(&bad_col).unwrap_err().message.contains("undeclared row"));

    assert!(parse_mps(&golden.replace("ENDATA\n", "")).unwrap_err().message.contains("ENDATA"));
    assert!(parse_mps(&golden.replace(" UP BND       x         4", " UP BND       y         4"))
        .unwrap_err()
        .message
        .contains("undeclared column"));
}
