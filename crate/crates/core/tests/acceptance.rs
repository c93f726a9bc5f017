//! Acceptance gate: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test --release --test acceptance`. Exits non-zero when
//! any criterion fails.

use std::time::Instant;

use equiders::benchmark::{compare, export_time_mps, hourly_model, solve_time_model, TimeOptions, DEFAULT_ERROR_THRESHOLD_PCT, DEFAULT_MPS_CELL_LIMIT};
use equiders::cli::run_validation;
use equiders::dispatch::{fit_scenario, greedy_dispatch, greedy_totals};
use equiders::domain::{
    validate_solution, ArchetypeId, HeatingFuel, HourlyProfiles, HouseholdArchetype, Intervention,
    InterventionCatalog, Scenario, Solution, TariffScheme, Tract, TractId, ValidationTolerances,
};
use equiders::ingest::fixtures::{affine_fixture, surplus_rich_fixture};
use equiders::ingest::SyntheticSpec;
use equiders::linmodel::{build_linearized, export_mps, parse_mps, MilpModel, Owner, Relation, VarKind, VarRole};
use equiders::solve::{
    branch_and_bound, enumerate_binaries, solve_linearized, solve_model, LpStatus, SolveOptions, Solved,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

/// Every solution produced along the way, for the cross-cutting checks.
#[derive(Default)]
struct Corpus {
    solutions: Vec<(String, Scenario, Solution)>,
}

impl Corpus {
    fn keep(&mut self, label: impl Into<String>, scenario: &Scenario, s: &Solution) {
        self.solutions.push((label.into(), scenario.clone(), s.clone()));
    }
}

fn synthetic(seed: u64) -> Scenario {
    SyntheticSpec::new(seed, 10, 5, 8760).generate().expect("synthetic scenario")
}

fn validation_bound(corpus: &mut Corpus) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 1..=3u64 {
        let scenario = synthetic(seed).with_ratio(0.6);
        let v = match run_validation(&scenario, &SolveOptions::default(), 128, DEFAULT_ERROR_THRESHOLD_PCT) {
            Ok(v) => v,
            Err(e) => return outcome("validation bound", false, format!("seed {seed}: {e}")),
        };
        let worst = v
            .report
            .indicators
            .iter()
            .max_by(|a, b| a.error_pct.total_cmp(&b.error_pct))
            .unwrap();
        let fast = v.linearized_secs <= 10.0 && v.time_secs <= 300.0;
        ok &= v.report.passed() && fast && v.report.indicators.len() == 4;
        parts.push(format!(
            "seed {seed}: max err {:.3}% ({}), lin {:.2}s, time {:.2}s",
            worst.error_pct, worst.name, v.linearized_secs, v.time_secs
        ));
        corpus.keep(format!("validate lin seed {seed}"), &scenario, &v.linearized);
        corpus.keep(format!("validate time seed {seed}"), &scenario, &v.time);
    }
    outcome("validation bound", ok, parts.join("; "))
}

fn net_metering_null(corpus: &mut Corpus) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut scenarios: Vec<(String, Scenario)> =
        (1..=3).map(|s| (format!("seed {s}"), synthetic(s).with_ratio(1.0))).collect();
    scenarios.push(("affine".into(), affine_fixture().with_ratio(1.0)));
    scenarios.push(("surplus-rich".into(), surplus_rich_fixture().with_ratio(1.0)));
    for (label, s) in &scenarios {
        let lin = solve_linearized(s, &SolveOptions::default()).map(|x| x.solution);
        let time = solve_time_model(s, &TimeOptions::default()).map(|x| x.solution);
        for (kind, r) in [("lin", lin), ("time", time)] {
            match r {
                Ok(sol) => {
                    worst = worst.max(sol.total_battery_kwh());
                    ok &= sol.total_battery_kwh() == 0.0;
                    count += 1;
                    corpus.keep(format!("ratio 1.0 {kind} {label}"), s, &sol);
                }
                Err(e) => return outcome("net-metering null", false, format!("{label} {kind}: {e}")),
            }
        }
    }
    let rich = surplus_rich_fixture().with_ratio(0.6);
    let lin = solve_linearized(&rich, &SolveOptions::default()).unwrap().solution;
    let time = solve_time_model(&rich, &TimeOptions::default()).unwrap().solution;
    ok &= lin.total_battery_kwh() > 0.0 && time.total_battery_kwh() > 0.0;
    let detail = format!(
        "max battery at ratio 1.0 over {count} solves = {worst} kWh; surplus-rich at 0.6: lin {:.1} kWh, time {:.1} kWh",
        lin.total_battery_kwh(),
        time.total_battery_kwh()
    );
    corpus.keep("surplus-rich 0.6 lin", &rich, &lin);
    corpus.keep("surplus-rich 0.6 time", &rich, &time);
    outcome("net-metering null", ok, detail)
}

fn surplus_gating(corpus: &Corpus) -> Outcome {
    let mut batteries = 0;
    let mut bad = Vec::new();
    for (label, _, s) in &corpus.solutions {
        for a in s.archetypes.iter().filter(|a| a.has_battery) {
            batteries += 1;
            if a.rooftop_kw < a.z1_kw - 1e-6 {
                bad.push(format!("{label}/{}: d {} < Z1 {}", a.id, a.rooftop_kw, a.z1_kw));
            }
        }
    }
    let detail = format!(
        "{} solutions, {batteries} battery deployments, {} below Z1 {}",
        corpus.solutions.len(),
        bad.len(),
        bad.first().cloned().unwrap_or_default()
    );
    outcome("surplus gating", bad.is_empty() && batteries > 0, detail)
}

/// Best revenue over every schedule on a 0.01 kWh grid. Loads, PV, the
/// capacity and the power limit are integers in grid units. Charge left at
/// day end is credited at the export rate, as any generation not
/// self-consumed or stored.
fn dp_revenue(load: &[i64], pv: &[i64], cap: i64, power: i64, pel: f64, rem: f64) -> f64 {
    let step = 0.01;
    let mut next: Vec<f64> = (0..=cap).map(|s| rem * s as f64 * step).collect();
    for t in (0..load.len()).rev() {
        let direct = load[t].min(pv[t]);
        let surplus = pv[t] - direct;
        let deficit = load[t] - direct;
        let cur: Vec<f64> = (0..=cap)
            .map(|s| {
                let base = pel * direct as f64 * step;
                let best = if surplus > 0 {
                    (0..=surplus.min(power).min(cap - s))
                        .map(|c| rem * (surplus - c) as f64 * step + next[(s + c) as usize])
                        .fold(f64::NEG_INFINITY, f64::max)
                } else {
                    (0..=deficit.min(power).min(s))
                        .map(|x| pel * x as f64 * step + next[(s - x) as usize])
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                base + best
            })
            .collect();
        next = cur;
    }
    next[0]
}

fn dispatch_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15A7C);
    let pel = 0.2;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let load: Vec<i64> = (0..24).map(|_| rng.random_range(0..=150)).collect();
        let pv: Vec<i64> = (0..24)
            .map(|h| if (6..19).contains(&h) { rng.random_range(0..=300) } else { 0 })
            .collect();
        let dur = [1.0, 2.0, 4.0][rng.random_range(0..3)];
        let power: i64 = rng.random_range(1..=50);
        let cap = power * dur as i64;
        let rem = pel * rng.random_range(0..=5) as f64 / 5.0;

        let to_kwh = |v: &[i64]| v.iter().map(|&x| x as f64 * 0.01).collect::<Vec<_>>();
        let profiles = HourlyProfiles::new(to_kwh(&load), to_kwh(&pv));
        let g = greedy_dispatch(&profiles, 1.0, cap as f64 * 0.01, dur).expect("greedy dispatch");
        let gen = profiles.annual_yield();
        let served = g.self_consumed_kwh + g.stored_kwh;
        let greedy = pel * served + rem * (gen - served);
        let oracle = dp_revenue(&load, &pv, cap, power, pel, rem);
        worst = worst.max((greedy - oracle).abs());
    }
    let tol = pel * 0.01;
    outcome(
        "dispatch oracle",
        worst <= tol,
        format!("200 instances, max |greedy - DP| = {worst:.2e} $ (one grid step = {tol:.0e} $)"),
    )
}

fn random_milp(rng: &mut ChaCha8Rng) -> MilpModel {
    let nb = rng.random_range(1..=12);
    let nc = rng.random_range(1..=6);
    let mut m = MilpModel::new("random");
    let mut point = Vec::new();
    for j in 0..nb {
        m.add_var(format!("b{j}"), VarKind::Binary, 0.0, 1.0);
        point.push(rng.random_range(0..=1) as f64);
    }
    for j in 0..nc {
        let ub = rng.random_range(1.0..10.0);
        m.add_var(format!("x{j}"), VarKind::Continuous, 0.0, ub);
        point.push(rng.random_range(0.0..ub));
    }
    let n = nb + nc;
    for i in 0..rng.random_range(2..=8) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-5.0..5.0)));
            }
        }
        let at: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let slack = rng.random_range(0.0..3.0);
        if rng.random_bool(0.5) {
            m.add_row(format!("r{i}"), coeffs, Relation::Le, at + slack);
        } else {
            m.add_row(format!("r{i}"), coeffs, Relation::Ge, at - slack);
        }
    }
    m.set_objective((0..n).map(|j| (j, rng.random_range(-4.0..4.0))), 0.0);
    m
}

fn small_scenario_models() -> Vec<(String, MilpModel)> {
    let mut out = Vec::new();
    for seed in 1..=4u64 {
        let base = SyntheticSpec::new(seed, 2, 3, 24 * 14).generate().unwrap();
        let fits = fit_scenario(&base, 16).unwrap();
        let (model, _) = build_linearized(&base, &fits).unwrap();
        out.push((format!("linearized seed {seed}"), model.clone()));
        let mut tight = model;
        if let Some(r) = tight.constraints.iter().position(|c| c.name == "budget") {
            tight.constraints[r].rhs = 2000.0;
            out.push((format!("linearized seed {seed} budget 2000"), tight));
        }
        let budgeted = base.with_budget(Some(1500.0));
        let (model, _) = build_linearized(&budgeted, &fits).unwrap();
        out.push((format!("linearized seed {seed} budget 1500"), model));
        let (model, _) = hourly_model(&SyntheticSpec::new(seed, 1, 2, 24).generate().unwrap(), DEFAULT_MPS_CELL_LIMIT).unwrap();
        out.push((format!("hourly seed {seed}"), model));
    }
    out
}

fn mip_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0B1_D0E5);
    let mut models: Vec<(String, MilpModel)> = (0..150).map(|i| (format!("random {i}"), random_milp(&mut rng))).collect();
    models.extend(small_scenario_models());
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (label, m) in &models {
        let free = m.binaries().filter(|&j| m.variables[j].lower < m.variables[j].upper).count();
        if free > 12 {
            bad.push(format!("{label}: {free} binaries"));
            continue;
        }
        let bb = branch_and_bound(m, 0.0, 1_000_000);
        let en = enumerate_binaries(m);
        match (bb.has_solution(), en) {
            (false, None) => {}
            (true, Some(e)) if e.status == LpStatus::Optimal => {
                let err = (bb.objective - e.objective).abs() / e.objective.abs().max(1.0);
                worst = worst.max(err);
                if err > 1e-9 {
                    bad.push(format!("{label}: bnb {} vs enum {}", bb.objective, e.objective));
                }
            }
            (b, e) => bad.push(format!("{label}: bnb solved {b}, enumeration {:?}", e.map(|s| s.status))),
        }
        compared += 1;
    }

    // Slack budget: the decomposed path against full branch and bound.
    let mut dec_worst: f64 = 0.0;
    for seed in 1..=4u64 {
        let s = SyntheticSpec::new(seed, 3, 4, 8760).generate().unwrap();
        let fits = fit_scenario(&s, 32).unwrap();
        let (model, map) = build_linearized(&s, &fits).unwrap();
        let base = SolveOptions {
            gap_tol: 1e-9,
            ..SolveOptions::default()
        };
        let dec = solve_model(&model, &map, &base);
        let full = solve_model(&model, &map, &SolveOptions { decompose: false, ..base });
        let err = (dec.objective - full.objective).abs() / full.objective.abs().max(1e-12);
        dec_worst = dec_worst.max(err);
        if err > 1e-6 || !dec.method.contains("decompos") {
            bad.push(format!("seed {seed}: decomposed {} ({}) vs bnb {}", dec.objective, dec.method, full.objective));
        }
    }
    let detail = format!(
        "{compared} models, max rel diff bnb/enum {worst:.1e}; decomposed vs bnb max rel {dec_worst:.1e}{}",
        bad.first().map(|b| format!("; first failure: {b}")).unwrap_or_default()
    );
    outcome("MIP oracle", bad.is_empty(), detail)
}

fn over_burden_columns(s: &Scenario, solved: &Solved) -> f64 {
    let thr = s.tariff.burden_threshold;
    s.archetypes
        .iter()
        .map(|a| {
            let own = Owner::Archetype(a.id.clone());
            let over = solved.map.value(&solved.mip.x, &own, VarRole::OverBurden);
            let eb = solved.map.value(&solved.mip.x, &own, VarRole::Burden);
            (over - (eb - thr).max(0.0)).abs()
        })
        .fold(0.0, f64::max)
}

fn model_invariants(corpus: &mut Corpus) -> Outcome {
    let mut bad = Vec::new();
    let mut worst_over: f64 = 0.0;
    let mut ladders = Vec::new();
    for seed in [4u64, 5] {
        let s = SyntheticSpec::new(seed, 3, 4, 8760).generate().unwrap();
        let free = solve_linearized(&s, &SolveOptions::default()).unwrap();
        worst_over = worst_over.max(over_burden_columns(&s, &free));
        let full = free.solution.total_annualized_cost;
        let mut prev = f64::INFINITY;
        let mut ladder = Vec::new();
        for k in 0..5 {
            let b = full * k as f64 / 4.0;
            let sb = s.with_budget(Some(b));
            let solved = match solve_linearized(&sb, &SolveOptions::default()) {
                Ok(x) => x,
                Err(e) => {
                    bad.push(format!("seed {seed} budget {b:.0}: {e}"));
                    continue;
                }
            };
            worst_over = worst_over.max(over_burden_columns(&sb, &solved));
            let inequity = solved.solution.inequity_objective;
            if inequity > prev + 1e-9 * prev.abs().max(1.0) {
                bad.push(format!("seed {seed}: inequity rose to {inequity} at budget {b:.0}"));
            }
            prev = inequity;
            ladder.push(format!("{inequity:.3}"));
            corpus.keep(format!("ladder seed {seed} k {k}"), &sb, &solved.solution);
        }
        ladders.push(format!("seed {seed} [{}]", ladder.join(" ")));
        corpus.keep(format!("free seed {seed}"), &s, &free.solution);
    }
    if worst_over > 1e-9 {
        bad.push(format!("over-burden column off by {worst_over:.2e}"));
    }
    let mut invalid = 0;
    for (label, s, sol) in &corpus.solutions {
        if let Err(v) = validate_solution(s, sol, ValidationTolerances::default()) {
            invalid += 1;
            bad.push(format!("{label}: {}", v.join("; ")));
        }
    }
    let detail = format!(
        "{} solutions validated ({invalid} invalid); max |Δ+ - max(0, eb - 0.06)| = {worst_over:.1e}; ladders {}{}",
        corpus.solutions.len(),
        ladders.join(", "),
        bad.first().map(|b| format!("; first failure: {b}")).unwrap_or_default()
    );
    outcome("model invariants", bad.is_empty(), detail)
}

fn exactness_fixture(corpus: &mut Corpus) -> Outcome {
    let s = affine_fixture();
    let lin = solve_linearized(&s, &SolveOptions::default()).unwrap().solution;
    let time = solve_time_model(&s, &TimeOptions::default()).unwrap().solution;
    let report = compare(&time, &lin, &s, DEFAULT_ERROR_THRESHOLD_PCT);
    let worst = report.indicators.iter().map(|i| i.error_pct).fold(0.0, f64::max);
    corpus.keep("affine lin", &s, &lin);
    corpus.keep("affine time", &s, &time);
    outcome(
        "exactness fixture",
        worst <= 1e-9,
        format!(
            "max indicator error {worst:.2e}%; rooftop lin {:.4} / time {:.4} kW, battery lin {:.4} / time {:.4} kWh",
            lin.total_rooftop_kw(),
            time.total_rooftop_kw(),
            lin.total_battery_kwh(),
            time.total_battery_kwh()
        ),
    )
}

/// One day, one archetype without battery eligibility and with a burden
/// that stays above the threshold at any rooftop size.
fn hourly_day_scenario() -> Scenario {
    let load: Vec<f64> = (0..24).map(|h| if (17..22).contains(&h) { 2.0 } else { 0.6 }).collect();
    let pv: Vec<f64> = (0..24)
        .map(|h: i32| if (6..18).contains(&h) { (std::f64::consts::PI * (h - 6) as f64 / 12.0).sin().max(0.05) * 0.7 } else { 0.0 })
        .collect();
    let profiles = HourlyProfiles::new(load, pv);
    let price = 0.2;
    let tract = Tract {
        id: TractId::new("t"),
        solar_annual_yield: profiles.annual_yield(),
        wind_annual_yield: 10.0,
        community_solar_cap_kw: 0.0,
        community_wind_cap_kw: 0.0,
    };
    let a = HouseholdArchetype {
        id: ArchetypeId::new("nb"),
        tract_id: tract.id.clone(),
        count: 1,
        annual_income: 20.0,
        heating_fuel: HeatingFuel::Gas,
        baseline_electricity_expenditure: profiles.annual_load() * price,
        baseline_heating_fuel_expenditure: 5.0,
        baseline_other_fuel_expenditure: 1.0,
        weatherization_savings_fraction: 0.1,
        max_rooftop_kw: 6.0,
        eligibility: [Intervention::RooftopSolar].into_iter().collect(),
    };
    Scenario {
        profiles: [(a.id.clone(), profiles)].into_iter().collect(),
        archetypes: vec![a],
        tracts: vec![tract],
        catalog: InterventionCatalog::reference(),
        tariff: TariffScheme::new(price, 0.5 * price),
        budget: None,
        cost_weight_lambda: 1e-9,
    }
}

fn mps_round_trip() -> Outcome {
    let mut bad = Vec::new();
    let fixtures = [
        ("affine", affine_fixture()),
        ("surplus-rich", surplus_rich_fixture()),
        ("synthetic", SyntheticSpec::new(1, 2, 3, 48).generate().unwrap()),
    ];
    for (label, s) in &fixtures {
        let fits = fit_scenario(s, 16).unwrap();
        let (model, _) = build_linearized(s, &fits).unwrap();
        let first = export_mps(&model);
        match parse_mps(&first.text) {
            Ok(parsed) => {
                if export_mps(&parsed).text != first.text {
                    bad.push(format!("{label}: second export differs"));
                }
            }
            Err(e) => bad.push(format!("{label}: {e}")),
        }
    }

    let s = hourly_day_scenario();
    let a = &s.archetypes[0];
    let prof = &s.profiles[&a.id];
    let export = export_time_mps(&s, DEFAULT_MPS_CELL_LIMIT).unwrap();
    let parsed = parse_mps(&export.text).unwrap();
    let (original, _) = hourly_model(&s, DEFAULT_MPS_CELL_LIMIT).unwrap();
    let col = |name: &str| original.column(&format!("{name}[{}]", a.id)).expect(name);
    let (d, sc, sg) = (col("d_rts"), col("sc"), col("sg"));
    let mut worst: f64 = 0.0;
    for k in 0..=12 {
        let size = a.max_rooftop_kw * k as f64 / 12.0;
        let mut m = parsed.clone();
        m.variables[d].lower = size;
        m.variables[d].upper = size;
        let Some(lp) = enumerate_binaries(&m) else {
            bad.push(format!("hourly LP infeasible at d = {size}"));
            continue;
        };
        let g = greedy_totals(prof, size, 0.0, s.catalog.battery_duration_hours).unwrap();
        let gen = size * prof.annual_yield();
        let sg_greedy = gen - g.self_consumed_kwh;
        let e = (lp.x[sc] - g.self_consumed_kwh).abs().max((lp.x[sg] - sg_greedy).abs()) / gen.max(1.0);
        worst = worst.max(e);
    }
    if worst > 1e-9 {
        bad.push(format!("hourly LP differs from greedy by {worst:.2e} (relative)"));
    }
    let detail = format!(
        "3 fixtures re-exported; hourly 24 h LP vs greedy sc/sg max rel diff {worst:.1e} over 13 sizes{}",
        bad.first().map(|b| format!("; first failure: {b}")).unwrap_or_default()
    );
    outcome("MPS round-trip", bad.is_empty(), detail)
}

fn main() {
    let t0 = Instant::now();
    let mut corpus = Corpus::default();
    let validation = validation_bound(&mut corpus);
    let null = net_metering_null(&mut corpus);
    let dispatch = dispatch_oracle();
    let mip = mip_oracle();
    let exact = exactness_fixture(&mut corpus);
    let mps = mps_round_trip();
    let invariants = model_invariants(&mut corpus);
    let gating = surplus_gating(&corpus);

    let results = [validation, null, gating, dispatch, mip, invariants, exact, mps];
    for r in &results {
        println!("{} {:<20} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed,
        results.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
