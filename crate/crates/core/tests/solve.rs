use equiders::dispatch::fit_scenario;
use equiders::domain::{validate_solution, Scenario};
use equiders::ingest::fixtures::{affine_fixture, surplus_rich_fixture};
use equiders::ingest::generate_synthetic;
use equiders::linmodel::{build_linearized, parse_mps, MilpModel, Relation, VarKind, VarRole};
use equiders::solve::{
    branch_and_bound, enumerate_binaries, solve_linearized, solve_lp, solve_lp_bounds, LpOptions, LpStatus, MipStatus,
    SolveOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lp_lower_bound_row() {
    let mut m = MilpModel::new("ge");
    let x = m.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY);
    m.add_row("r", [(x, 1.0)], Relation::Ge, 3.0);
    m.set_objective([(x, 1.0)], 0.0);
    let s = solve_lp(&m, &[]);
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.x[x] - 3.0).abs() < 1e-12);
    assert!((s.objective - 3.0).abs() < 1e-12);
}

#[test]
fn lp_upper_bound_row() {
    let mut m = MilpModel::new("le");
    let x = m.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY);
    m.add_row("r", [(x, 1.0)], Relation::Le, 5.0);
    m.set_objective([(x, -1.0)], 0.0);
    let s = solve_lp(&m, &[]);
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.x[x] - 5.0).abs() < 1e-12);
}

#[test]
fn lp_reports_infeasible_and_unbounded() {
    let mut m = MilpModel::new("bad");
    let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
    m.add_row("r", [(x, 1.0)], Relation::Ge, 2.0);
    assert_eq!(solve_lp(&m, &[]).status, LpStatus::Infeasible);

    let mut m = MilpModel::new("open");
    let x = m.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY);
    m.set_objective([(x, -1.0)], 0.0);
    assert_eq!(solve_lp(&m, &[]).status, LpStatus::Unbounded);
}

fn random_lp(rng: &mut ChaCha8Rng) -> MilpModel {
    let n = rng.random_range(2..9);
    let rows = rng.random_range(1..7);
    let mut m = MilpModel::new("rand");
    let x0: Vec<f64> = (0..n)
        .map(|j| {
            let up = rng.random_range(1.0..10.0);
            m.add_var(format!("x{j}"), VarKind::Continuous, 0.0, up);
            rng.random_range(0.0..up)
        })
        .collect();
    for i in 0..rows {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                coeffs.push((j, rng.random_range(-5.0..5.0f64).round()));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (rel, rhs) = match rng.random_range(0..3) {
            0 => (Relation::Le, act + rng.random_range(0.0..3.0)),
            1 => (Relation::Ge, act - rng.random_range(0.0..3.0)),
            _ => (Relation::Eq, act),
        };
        m.add_row(format!("r{i}"), coeffs, rel, rhs);
    }
    m.set_objective((0..n).map(|j| (j, rng.random_range(-4.0..4.0f64).round())), 0.0);
    m
}

/// Weak duality with every column boxed: for sign-feasible row multipliers
/// y, `bᵀy + Σ min(rⱼ lⱼ, rⱼ uⱼ)` with r = c − Aᵀy bounds the primal from
/// below. The multipliers come from the solver; the bound is recomputed here.
#[test]
fn duals_certify_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD0A1);
    for case in 0..300 {
        let m = random_lp(&mut rng);
        let s = solve_lp(&m, &[]);
        assert_eq!(s.status, LpStatus::Optimal, "case {case}");
        assert!(m.max_violation(&s.x) < 1e-7, "case {case}");

        let mut y = s.duals.clone();
        for (yi, c) in y.iter_mut().zip(&m.constraints) {
            match c.relation {
                Relation::Le => assert!(*yi <= 1e-9, "case {case}: y {yi}"),
                Relation::Ge => assert!(*yi >= -1e-9, "case {case}: y {yi}"),
                Relation::Eq => {}
            }
            *yi = match c.relation {
                Relation::Le => yi.min(0.0),
                Relation::Ge => yi.max(0.0),
                Relation::Eq => *yi,
            };
        }
        let mut r = vec![0.0; m.num_vars()];
        for &(j, c) in &m.objective {
            r[j] += c;
        }
        for (c, yi) in m.constraints.iter().zip(&y) {
            for &(j, a) in &c.coeffs {
                r[j] -= a * yi;
            }
        }
        let dual: f64 = m.constraints.iter().zip(&y).map(|(c, yi)| c.rhs * yi).sum::<f64>()
            + m.variables.iter().zip(&r).map(|(v, rj)| (rj * v.lower).min(rj * v.upper)).sum::<f64>();
        let primal = m.objective_value(&s.x);
        assert!(dual <= primal + 1e-7, "case {case}");
        assert!(
            primal - dual <= 1e-6 * primal.abs().max(1.0),
            "case {case}: primal {primal} dual {dual}"
        );
        for (rep, rj) in s.reduced_costs.iter().zip(&r) {
            assert!((rep - rj).abs() < 1e-6, "case {case}");
        }
    }
}

/// With z = δ = 0 fixed and no budget, rooftop PV only lowers the burden,
/// so the relaxed model sizes the array right up to Z¹.
#[test]
fn no_surplus_branch_fills_to_threshold() {
    let s = affine_fixture();
    let fits = fit_scenario(&s, 16).unwrap();
    let (m, map) = build_linearized(&s, &fits).unwrap();
    let id = &s.archetypes[0].id;
    let col = |r| map.archetype_col(id, r).unwrap();
    let (d, z, delta) = (col(VarRole::RooftopKw), col(VarRole::SurplusFlag), col(VarRole::HasBattery));
    let z1 = fits[id].z1_kw.min(s.archetypes[0].max_rooftop_kw);
    assert_eq!(z1, 1.0);

    let fixed = [(z, 0.0), (delta, 0.0)];
    let lp = solve_lp(&m, &fixed);
    assert_eq!(lp.status, LpStatus::Optimal);
    assert!((lp.x[d] - z1).abs() < 1e-9, "d = {}", lp.x[d]);

    let mut grid = Vec::new();
    for k in 0..=40 {
        let dv = 0.05 * k as f64;
        let mut probe = m.clone();
        probe.variables[d].lower = dv;
        probe.variables[d].upper = dv;
        let r = solve_lp(&probe, &fixed);
        grid.push((dv, r.status, r.objective));
    }
    for w in grid.windows(2) {
        let ((d0, s0, o0), (d1, s1, o1)) = (w[0], w[1]);
        if d1 <= z1 + 1e-12 {
            assert_eq!((s0, s1), (LpStatus::Optimal, LpStatus::Optimal));
            assert!(o1 < o0, "objective must fall between {d0} and {d1}");
        } else {
            assert_eq!(s1, LpStatus::Infeasible, "d = {d1} needs z = 1");
        }
    }
    let best = grid
        .iter()
        .filter(|g| g.1 == LpStatus::Optimal)
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    assert!((best.0 - z1).abs() < 1e-12);
    assert!((best.2 - lp.objective).abs() < 1e-9 * lp.objective.abs().max(1.0));
}

#[test]
fn no_binaries_is_one_node() {
    let mut s = affine_fixture();
    s.archetypes[0].max_rooftop_kw = 0.0;
    let fits = fit_scenario(&s, 8).unwrap();
    let (m, _) = build_linearized(&s, &fits).unwrap();
    assert_eq!(m.binaries().count(), 0);
    let r = branch_and_bound(&m, 0.0, 1000);
    assert_eq!(r.status, MipStatus::Optimal);
    assert_eq!(r.nodes, 1);
}

fn enumeration_agrees(s: &Scenario, max_nodes: u64) {
    let fits = fit_scenario(s, 16).unwrap();
    let (m, _) = build_linearized(s, &fits).unwrap();
    let r = branch_and_bound(&m, 0.0, 1_000_000);
    assert_eq!(r.status, MipStatus::Optimal);
    assert!(r.nodes <= max_nodes, "{} nodes", r.nodes);
    let brute = enumerate_binaries(&m).expect("feasible");
    let tol = 1e-9 * brute.objective.abs().max(1.0);
    assert!((r.objective - brute.objective).abs() <= tol, "{} vs {}", r.objective, brute.objective);
}

#[test]
fn one_battery_archetype_matches_enumeration() {
    let s = affine_fixture();
    enumeration_agrees(&s, 7);
    enumeration_agrees(&s.with_ratio(0.2), 7);
    enumeration_agrees(&s.with_ratio(1.0), 7);
    enumeration_agrees(&s.with_budget(Some(50.0)), 7);
}

#[test]
fn decomposition_matches_full_search() {
    let s = generate_synthetic(20, 4, 5, 24 * 28).unwrap();
    assert_eq!(s.archetypes.len(), 20);
    let fast = solve_linearized(&s, &SolveOptions::default()).unwrap();
    let full = solve_linearized(
        &s,
        &SolveOptions {
            decompose: false,
            gap_tol: 1e-9,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(fast.mip.method, "decomposed");
    assert!(full.mip.method.starts_with("branch_and_bound"), "{}", full.mip.method);
    let (a, b) = (fast.mip.objective, full.mip.objective);
    assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()), "{a} vs {b}");
    validate_solution(&s, &fast.solution, Default::default()).unwrap();
}

#[test]
fn zero_budget_deploys_nothing() {
    for s in [surplus_rich_fixture(), generate_synthetic(8, 2, 3, 24 * 7).unwrap()] {
        let s = s.with_budget(Some(0.0));
        let solved = solve_linearized(&s, &SolveOptions::default()).unwrap();
        let sol = &solved.solution;
        for a in &sol.archetypes {
            assert_eq!(
                (a.weatherization_fraction, a.rooftop_kw, a.battery_kwh, a.community_solar_share_kwh, a.community_wind_share_kwh),
                (0.0, 0.0, 0.0, 0.0, 0.0),
                "{}",
                a.id
            );
        }
        assert!(sol.tracts.iter().all(|t| t.community_solar_kw == 0.0 && t.community_wind_kw == 0.0));
        assert_eq!(sol.total_annualized_cost, 0.0);
        let base = s.baseline_inequity();
        assert!((sol.inequity_objective - base).abs() <= 1e-9 * base, "{} vs {base}", sol.inequity_objective);
    }
}

#[test]
fn halved_budget_falls_back_and_binds() {
    let s = surplus_rich_fixture();
    let free = solve_linearized(&s, &SolveOptions::default()).unwrap();
    assert_eq!(free.mip.method, "decomposed");
    let spend = free.solution.total_annualized_cost;
    assert!(spend > 0.0);

    let tight = s.with_budget(Some(spend / 2.0));
    let solved = solve_linearized(&tight, &SolveOptions::default()).unwrap();
    assert!(solved.mip.method.contains("budget binds"), "{}", solved.mip.method);
    let used = solved.solution.total_annualized_cost;
    assert!((used - spend / 2.0).abs() <= 1e-6 * spend, "{used} vs {}", spend / 2.0);
    assert!(solved.solution.inequity_objective >= free.solution.inequity_objective - 1e-12);
    validate_solution(&tight, &solved.solution, Default::default()).unwrap();
}

#[test]
fn node_limit_reports_feasible_with_gap() {
    let s = generate_synthetic(6, 2, 4, 24 * 7).unwrap();
    let spend = solve_linearized(&s, &SolveOptions::default()).unwrap().solution.total_annualized_cost;
    let tight = s.with_budget(Some(spend * 0.3));
    let fits = fit_scenario(&tight, 16).unwrap();
    let (m, _) = build_linearized(&tight, &fits).unwrap();
    let r = branch_and_bound(&m, 0.0, 1);
    assert_eq!(r.nodes, 1);
    assert_ne!(r.status, MipStatus::Infeasible);
    if r.status == MipStatus::Feasible {
        assert!(r.gap >= 0.0);
        assert!(r.best_bound <= r.objective + 1e-9);
    }
}

/// A tract block whose pivot sequence once drifted far enough from B⁻¹A to
/// stop early at a point off its equality rows, and under Bland's rule to
/// reach a singular basis and report infeasibility.
#[test]
fn long_pivot_sequences_stay_on_the_rows() {
    let m = parse_mps(include_str!("data/drift_block.mps")).unwrap();
    let binaries: Vec<usize> = m.binaries().collect();
    assert_eq!(binaries.len(), 5);
    let mut lower: Vec<f64> = m.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = m.variables.iter().map(|v| v.upper).collect();
    for &j in &binaries {
        let v = if j == 49 { 1.0 } else { 0.0 };
        lower[j] = v;
        upper[j] = v;
    }
    let variants = [
        LpOptions::default(),
        LpOptions { bland_after: 0, ..Default::default() },
        LpOptions { refresh_every: 1, ..Default::default() },
        LpOptions { pivot_tol: 1e-7, ..Default::default() },
    ];
    let objectives: Vec<f64> = variants
        .iter()
        .map(|o| {
            let lp = solve_lp_bounds(&m, &lower, &upper, o);
            assert_eq!(lp.status, LpStatus::Optimal, "{o:?}");
            assert!(m.max_violation(&lp.x) < 1e-7, "{o:?}: {}", m.max_violation(&lp.x));
            lp.objective
        })
        .collect();
    for o in &objectives {
        assert!((o - objectives[0]).abs() <= 1e-9 * objectives[0].abs(), "{objectives:?}");
    }
    let brute = enumerate_binaries(&m).unwrap();
    assert!(m.max_violation(&brute.x) < 1e-7);
    assert!(brute.objective <= objectives[0] + 1e-12);
}
