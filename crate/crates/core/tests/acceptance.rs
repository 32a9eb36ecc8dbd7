//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero on any
//! failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_defer::harness::{run_experiment, BaselineSpec, DataSource, ExperimentConfig, Method};
use robust_defer::msm::{solve_lfp, solve_lfp_bruteforce, weight_bounds, WeightBounds};
use robust_defer::objective::{
    personalized_worst_case_regret, plugin_regret, worst_case_regret, Comparison, Objective,
    Routing, Weighting,
};
use robust_defer::policy::{BaselinePolicy, LinearPolicy, LinearRouter, Router};
use robust_defer::propensity::{fit_nominal_propensity, AssignmentModel};
use robust_defer::synth::{generate_synthetic, generate_toy, oracle_evaluate, tilted_propensity};
use robust_defer::train::{evaluate_human_only, train_confhai, HaiVariant, TrainConfig};
use robust_defer::{CostModel, GammaSpec, LogGammaSpec, LoggedDataset};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    check(
        start.elapsed() <= budget,
        format!(
            "runtime {:.1}s exceeds {:.0}s",
            start.elapsed().as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

/// The toy has one constant covariate, so every row shares one routing
/// decision; a short run reaches it.
const TOY_ITERATIONS: usize = 300;

/// Collects the messages of all failed checks.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn expect(&mut self, ok: bool, msg: String) {
        if !ok {
            self.0.push(msg);
        }
    }

    fn finish(self, detail: String) -> Outcome {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            Err(format!("{} [{detail}]", self.0.join("; ")))
        }
    }
}

fn toy_golden_values() -> Outcome {
    let start = Instant::now();
    let (gamma, n) = (0.3, 50_000);
    let never = BaselinePolicy::never_treat(2);
    let always = BaselinePolicy::Arm { arm: 1, n_arms: 2 };
    let cost = CostModel::default();
    let (mut human, mut nominal, mut worst, mut deferred, mut team) =
        (vec![], vec![], vec![], vec![], vec![]);
    for seed in 0..5 {
        let (data, _) = generate_toy(n, gamma, seed).map_err(|e| e.to_string())?;
        let (test, toy) = generate_toy(n, gamma, 1000 + seed).map_err(|e| e.to_string())?;
        human.push(evaluate_human_only(&data, &cost).map_err(|e| e.to_string())?);
        let prop = fit_nominal_propensity(&data, 1e-4, 0.01).map_err(|e| e.to_string())?;
        let p = prop.logged_propensities(&data);
        let w: Vec<f64> = p.iter().map(|v| 1.0 / v).collect();
        let absolute = |weighting| Objective {
            data: &data,
            cost: &cost,
            comparison: Comparison::Absolute,
            routing: Routing::Homogeneous,
            weighting,
        };
        nominal.push(
            absolute(Weighting::Hajek(&w))
                .evaluate(&always, &Router::never_defer())
                .map_err(|e| e.to_string())?
                .total,
        );
        let bounds = weight_bounds(&p, &GammaSpec::Scalar(4.0), None).map_err(|e| e.to_string())?;
        worst.push(
            absolute(Weighting::WorstCase(&bounds))
                .evaluate(&always, &Router::never_defer())
                .map_err(|e| e.to_string())?
                .total,
        );
        let config = TrainConfig {
            iterations: TOY_ITERATIONS,
            seed,
            ..TrainConfig::default()
        };
        let sys =
            train_confhai(&data, &bounds, &never, &cost, &config).map_err(|e| e.to_string())?;
        let eval = oracle_evaluate(&sys.policy, &sys.router, &test, &toy.truth, &never, &cost)
            .map_err(|e| e.to_string())?;
        deferred.push(eval.routing_fractions[0]);
        team.push(eval.team_risk);
    }
    let (h, nm, wc, d, t) = (
        mean(&human),
        mean(&nominal),
        mean(&worst),
        mean(&deferred),
        mean(&team),
    );
    let mut checks = Checks::default();
    checks.expect(
        (h + 1.2).abs() <= 0.05,
        format!("human value {h:.4} not within 0.05 of -1.2"),
    );
    checks.expect(
        (nm + 1.6).abs() <= 0.05,
        format!("nominal always-treat {nm:.4} not within 0.05 of -1.6"),
    );
    checks.expect(
        (wc + 1.0).abs() <= 0.05,
        format!("worst-case always-treat {wc:.4} not within 0.05 of -1"),
    );
    checks.expect(
        deferred.iter().all(|&f| f >= 0.99),
        format!("deferral fractions {deferred:?} below 0.99"),
    );
    checks.expect(
        (t + 1.2).abs() <= 0.05,
        format!("ConfHAI team risk {t:.4} not within 0.05 of -1.2"),
    );
    let elapsed = start.elapsed().as_secs_f64();
    checks.expect(
        elapsed <= 60.0,
        format!("runtime {elapsed:.1}s exceeds 60s"),
    );
    checks.finish(format!(
        "human {h:.4}, nominal {nm:.4}, worst-case {wc:.4}, deferred {d:.4}, team {t:.4}, {elapsed:.1}s"
    ))
}

fn lfp_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = 0.0f64;
    for instance in 0..1000 {
        let n = rng.gen_range(1..=12);
        let gamma = 100f64.powf(rng.gen::<f64>());
        let nominal: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let bounds =
            weight_bounds(&nominal, &GammaSpec::Scalar(gamma), None).map_err(|e| e.to_string())?;
        let fast = solve_lfp(&r, &bounds).map_err(|e| e.to_string())?;
        let brute = solve_lfp_bruteforce(&r, &bounds).map_err(|e| e.to_string())?;
        let gap = (fast.value - brute.value).abs();
        worst_gap = worst_gap.max(gap);
        check(
            gap <= 1e-9,
            format!(
                "instance {instance}: |{} - {}| = {gap:e}",
                fast.value, brute.value
            ),
        )?;
        let at_lower = |i: usize| {
            fast.weights[i] == bounds.lower()[i] && bounds.lower()[i] != bounds.upper()[i]
        };
        let max_lower = (0..n)
            .filter(|&i| at_lower(i))
            .map(|i| r[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let min_upper = (0..n)
            .filter(|&i| !at_lower(i))
            .map(|i| r[i])
            .fold(f64::INFINITY, f64::min);
        check(
            max_lower <= min_upper,
            format!("instance {instance}: weights are not a threshold rule"),
        )?;
        check(
            (0..n).all(|i| {
                fast.weights[i] == bounds.lower()[i] || fast.weights[i] == bounds.upper()[i]
            }),
            format!("instance {instance}: weights off the box corners"),
        )?;
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "1000 instances, max gap {worst_gap:e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

struct GradientSetup {
    data: LoggedDataset,
    bounds_homog: WeightBounds,
    bounds_person: WeightBounds,
    assignment: AssignmentModel,
    baseline: BaselinePolicy,
    cost: CostModel,
}

fn gradient_setup(seed: u64) -> GradientSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d, k) = (200, 3, 3);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();
    let ts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..2.0)).collect();
    let hs: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let nominal: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.6)).collect();
    let data = LoggedDataset::new(xs, ts, ys, Some(hs.clone()), 3, Some(k)).unwrap();
    GradientSetup {
        bounds_homog: weight_bounds(&nominal, &GammaSpec::Scalar(3.0), None).unwrap(),
        bounds_person: weight_bounds(
            &nominal,
            &GammaSpec::PerExpert(vec![1.5, 3.0, 6.0]),
            Some(&hs),
        )
        .unwrap(),
        assignment: AssignmentModel::known(vec![0.2, 0.3, 0.5]).unwrap(),
        baseline: BaselinePolicy::Linear(
            LinearPolicy::from_weights(3, d, (0..8).map(|i| 0.1 * i as f64 - 0.3).collect())
                .unwrap(),
        ),
        cost: CostModel::Constant(0.25),
        data,
    }
}

/// Relative error `|g - g_fd| / max(|g|, |g_fd|, 1e-8)` in the Euclidean norm.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    diff / scale.max(1e-8)
}

fn gradient_checks() -> Outcome {
    let setup = gradient_setup(7);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    let mut report = Vec::new();
    for (name, k) in [
        ("vs-baseline", 1usize),
        ("vs-human", 1),
        ("personalized", 3),
    ] {
        let objective = Objective {
            data: &setup.data,
            cost: &setup.cost,
            comparison: if name == "vs-human" {
                Comparison::Human
            } else {
                Comparison::Baseline(&setup.baseline)
            },
            routing: if k == 1 {
                Routing::Homogeneous
            } else {
                Routing::Personalized(&setup.assignment)
            },
            weighting: Weighting::WorstCase(if k == 1 {
                &setup.bounds_homog
            } else {
                &setup.bounds_person
            }),
        };
        let (mut worst_fixed, mut worst_fresh) = (0.0f64, 0.0f64);
        for point in 0..50 {
            let pw: Vec<f64> = (0..2 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rw: Vec<f64> = (0..k * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let policy = LinearPolicy::from_weights(3, 3, pw.clone()).unwrap();
            let router = Router::Linear(LinearRouter::from_weights(k, 3, rw.clone()).unwrap());
            let (value, grad) = objective
                .value_and_gradient(&policy, &router)
                .map_err(|e| e.to_string())?;
            let weights = value.worst_case_weights;
            let analytic: Vec<f64> = grad.policy.iter().chain(&grad.router).copied().collect();
            let total = pw.len() + rw.len();
            let (mut fd_fixed, mut fd_fresh) = (vec![0.0; total], vec![0.0; total]);
            for j in 0..total {
                let eval = |delta: f64, fixed: bool| -> f64 {
                    let (mut p, mut r) = (pw.clone(), rw.clone());
                    if j < pw.len() {
                        p[j] += delta;
                    } else {
                        r[j - pw.len()] += delta;
                    }
                    let pol = LinearPolicy::from_weights(3, 3, p).unwrap();
                    let rou = Router::Linear(LinearRouter::from_weights(k, 3, r).unwrap());
                    if fixed {
                        objective
                            .evaluate_at_weights(&pol, &rou, &weights)
                            .unwrap()
                            .total
                    } else {
                        objective.evaluate(&pol, &rou).unwrap().total
                    }
                };
                fd_fixed[j] = (eval(h, true) - eval(-h, true)) / (2.0 * h);
                fd_fresh[j] = (eval(h, false) - eval(-h, false)) / (2.0 * h);
            }
            let (ef, er) = (rel_err(&analytic, &fd_fixed), rel_err(&analytic, &fd_fresh));
            worst_fixed = worst_fixed.max(ef);
            worst_fresh = worst_fresh.max(er);
            check(
                ef <= 1e-4,
                format!("{name} point {point}: fixed-weight relative error {ef:e}"),
            )?;
            check(
                er <= 1e-4,
                format!("{name} point {point}: re-maximized relative error {er:e}"),
            )?;
        }
        report.push(format!(
            "{name} max rel err {worst_fixed:.1e}/{worst_fresh:.1e}"
        ));
    }
    Ok(report.join(", "))
}

fn degenerate_reductions() -> Outcome {
    let setup = gradient_setup(11);
    let data = &setup.data;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nominal: Vec<f64> = (0..data.n()).map(|_| rng.gen_range(0.1..0.6)).collect();
    let w: Vec<f64> = nominal.iter().map(|p| 1.0 / p).collect();
    let gamma_one =
        weight_bounds(&nominal, &GammaSpec::Scalar(1.0), None).map_err(|e| e.to_string())?;
    let single = data.without_experts();
    let k1 = LoggedDataset::new(
        single.rows().map(|r| r.to_vec()).collect(),
        single.treatments().to_vec(),
        single.risks().to_vec(),
        Some(vec![0; data.n()]),
        3,
        Some(1),
    )
    .map_err(|e| e.to_string())?;
    let only = AssignmentModel::known(vec![1.0]).map_err(|e| e.to_string())?;
    let (mut gap_gamma, mut gap_k) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let policy =
            LinearPolicy::from_weights(3, 3, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
        let router = Router::Linear(
            LinearRouter::from_weights(1, 3, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap(),
        );
        let robust = worst_case_regret(
            &single,
            &policy,
            &router,
            &setup.baseline,
            &setup.cost,
            &gamma_one,
        )
        .map_err(|e| e.to_string())?;
        let plug = plugin_regret(&single, &policy, &router, &setup.baseline, &setup.cost, &w)
            .map_err(|e| e.to_string())?;
        gap_gamma = gap_gamma.max((robust.total - plug.total).abs());
        let bounds =
            weight_bounds(&nominal, &GammaSpec::Scalar(2.5), None).map_err(|e| e.to_string())?;
        let homog = worst_case_regret(&k1, &policy, &router, &setup.baseline, &setup.cost, &bounds)
            .map_err(|e| e.to_string())?;
        let person = personalized_worst_case_regret(
            &k1,
            &policy,
            &router,
            &setup.baseline,
            &setup.cost,
            &bounds,
            &only,
        )
        .map_err(|e| e.to_string())?;
        gap_k = gap_k.max((homog.total - person.total).abs());
    }
    check(
        gap_gamma <= 1e-12,
        format!("Γ=1 vs plug-in gap {gap_gamma:e}"),
    )?;
    check(
        gap_k <= 1e-12,
        format!("K=1 personalized vs homogeneous gap {gap_k:e}"),
    )?;
    let bounds =
        weight_bounds(&nominal, &GammaSpec::Scalar(5.0), None).map_err(|e| e.to_string())?;
    for baseline in [setup.baseline.clone(), BaselinePolicy::never_treat(3)] {
        let v = worst_case_regret(
            &single,
            &baseline,
            &Router::never_defer(),
            &baseline,
            &setup.cost,
            &bounds,
        )
        .map_err(|e| e.to_string())?;
        check(
            v.total == 0.0,
            format!(
                "worst_case_regret(π_c, φ≡0) = {:e}, expected exactly 0",
                v.total
            ),
        )?;
    }
    Ok(format!(
        "Γ=1 gap {gap_gamma:.1e}, K=1 gap {gap_k:.1e}, self-regret exactly 0"
    ))
}

fn msm_tightness() -> Outcome {
    let odds = |p: f64| p / (1.0 - p);
    let gammas = [1f64.exp(), 2.5f64.exp(), 4f64.exp()];
    let (_, truth) = generate_synthetic(20_000, &gammas, 3, None).map_err(|e| e.to_string())?;
    // The ratio is a multiplicative factor, so it is compared relatively:
    // for π near 1 the rounding of π alone moves odds(π) by ~1e-16/(1-π).
    let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
    for i in 0..truth.len() {
        let g = gammas[truth.expert[i]];
        let ratio = odds(truth.ptrue[i]) / odds(truth.pnominal[i]);
        let target = if truth.u[i] { g } else { 1.0 / g };
        worst = worst.max((ratio / target - 1.0).abs());
        worst_abs = worst_abs.max((ratio - target).abs());
    }
    check(
        worst <= 1e-12,
        format!("odds ratio off the boundary by a factor {worst:e}"),
    )?;
    let mut worst_identity = 0.0f64;
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        for u in [false, true] {
            worst_identity = worst_identity.max((tilted_propensity(p, u, 1.0) - p).abs());
        }
    }
    check(
        worst_identity <= 1e-12,
        format!("Γ=1 tilt deviates by {worst_identity:e}"),
    )?;
    Ok(format!(
        "20000 rows, max relative odds-ratio error {worst:.1e} (absolute {worst_abs:.1e}), Γ=1 identity error {worst_identity:.1e}"
    ))
}

fn synthetic_config(
    log_gamma_true: LogGammaSpec,
    methods: Vec<Method>,
    grid: Vec<LogGammaSpec>,
) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic {
            n_train: 2000,
            n_test: 20_000,
            log_gamma_true,
            n_experts: None,
            beta0: None,
        },
        methods,
        log_gamma_grid: grid,
        seeds: (0..10).collect(),
        train: TrainConfig::default(),
        cost: CostModel::default(),
        baseline: BaselineSpec::NeverTreat,
        hai_variant: HaiVariant::Ipw,
        epsilon: 0.01,
        regularization: 1e-4,
        output_dir: None,
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn fig2a_orderings() -> Outcome {
    let start = Instant::now();
    let grid = [0.01, 1.0, 2.5, 4.0].map(LogGammaSpec::Scalar).to_vec();
    let methods = vec![
        Method::Human,
        Method::Ao,
        Method::Confao,
        Method::Hai,
        Method::Confhai,
    ];
    let config = synthetic_config(LogGammaSpec::Scalar(2.5), methods, grid);
    let report = single_threaded(|| run_experiment(&config)).map_err(|e| e.to_string())?;
    check(
        !report.is_partial(),
        format!("{} cells failed", report.failed()),
    )?;
    let at = |m: Method, g: &str| report.regrets(m, g);
    let (confhai, human, confao) = (
        mean(&at(Method::Confhai, "2.5")),
        mean(&at(Method::Human, "2.5")),
        mean(&at(Method::Confao, "2.5")),
    );
    let (c0, h0) = (at(Method::Confhai, "0.01"), at(Method::Hai, "0.01"));
    let se = (sample_var(&c0) / c0.len() as f64 + sample_var(&h0) / h0.len() as f64).sqrt();
    let gap = (mean(&c0) - mean(&h0)).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let mut checks = Checks::default();
    checks.expect(
        confhai < 0.0,
        format!("ConfHAI mean regret {confhai:.4} at log Γ = 2.5 is not negative"),
    );
    checks.expect(
        confhai < human,
        format!("ConfHAI {confhai:.4} not below human {human:.4}"),
    );
    checks.expect(
        confhai < confao,
        format!("ConfHAI {confhai:.4} not below ConfAO {confao:.4}"),
    );
    checks.expect(
        gap <= 2.0 * se,
        format!(
            "log Γ = 0.01: |ConfHAI - HAI| = {gap:.4} exceeds 2 SE = {:.4}",
            2.0 * se
        ),
    );
    checks.expect(
        elapsed <= 600.0,
        format!("runtime {elapsed:.1}s exceeds 600s"),
    );
    checks.finish(format!(
        "log Γ=2.5: ConfHAI {confhai:.4}, human {human:.4}, ConfAO {confao:.4}, AO {:.4}, HAI {:.4}; log Γ=0.01: ConfHAI {:.4}, HAI {:.4}, 2 SE {:.4}; {elapsed:.1}s",
        mean(&at(Method::Ao, "2.5")),
        mean(&at(Method::Hai, "2.5")),
        mean(&c0),
        mean(&h0),
        2.0 * se,
    ))
}

fn heterogeneous_experts() -> Outcome {
    let start = Instant::now();
    let spec = LogGammaSpec::PerExpert(vec![1.0, 2.5, 4.0]);
    let config = synthetic_config(
        spec.clone(),
        vec![Method::Confhai, Method::ConfhaiPerson],
        vec![spec.clone()],
    );
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    check(
        !report.is_partial(),
        format!("{} cells failed", report.failed()),
    )?;
    let label = spec.label();
    let (homog, person) = (
        mean(&report.regrets(Method::Confhai, &label)),
        mean(&report.regrets(Method::ConfhaiPerson, &label)),
    );
    check(
        person <= homog,
        format!("ConfHAIPerson {person:.4} > ConfHAI {homog:.4}"),
    )?;
    Ok(format!(
        "ConfHAIPerson {person:.4} <= ConfHAI {homog:.4}; {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn pessimism_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for seed in 0..20 {
        let (data, truth) =
            generate_synthetic(500, &[2.5f64.exp()], seed, None).map_err(|e| e.to_string())?;
        let never = BaselinePolicy::never_treat(2);
        let cost = CostModel::Constant(rng.gen_range(0.0..0.5));
        let policy =
            LinearPolicy::from_weights(2, 5, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
        let router = Router::Linear(
            LinearRouter::from_weights(1, 5, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap(),
        );
        let nominal: Vec<f64> = (0..data.n())
            .map(|i| {
                if data.treatments()[i] == 1 {
                    truth.pnominal[i]
                } else {
                    1.0 - truth.pnominal[i]
                }
            })
            .collect();
        let mut previous = f64::NEG_INFINITY;
        for gamma in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let bounds = weight_bounds(&nominal, &GammaSpec::Scalar(gamma), None)
                .map_err(|e| e.to_string())?;
            let v = worst_case_regret(&data, &policy, &router, &never, &cost, &bounds)
                .map_err(|e| e.to_string())?
                .total;
            check(
                v >= previous,
                format!("seed {seed}: objective fell from {previous} to {v} at Γ = {gamma}"),
            )?;
            previous = v;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} evaluations over 20 datasets, nondecreasing in Γ"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("toy example golden values", toy_golden_values),
        ("LFP solver matches brute force", lfp_oracle_equivalence),
        ("gradient finite-difference checks", gradient_checks),
        ("degenerate reductions", degenerate_reductions),
        ("synthetic MSM tightness", msm_tightness),
        ("confounded synthetic orderings", fig2a_orderings),
        ("heterogeneous experts", heterogeneous_experts),
        ("pessimism monotone in Γ", pessimism_monotonicity),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
