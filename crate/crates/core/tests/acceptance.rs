//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails. Names given on the command line select criteria by
//! substring.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaus::dynamics::{evolve, Space};
use qaus::experiments::{chi_sweep, noise_sweep, run_experiment, schedule_sweep, Config, Experiment, ScheduleRow};
use qaus::integrator::IntegratorConfig;
use qaus::problem::{make_plus_state, reduced_plus_state, HamiltonianSpec, ProblemInstance};
use qaus::schedule::{total_time, Schedule, ScheduleKind, ScheduleParams};
use qaus::spectrum::{gap, sigma_z_matrix_elements, ExcitedBasis, SpectrumPoint};
use qaus::thermal::{excitation_rate, scaling_report, BathParams, BathPolicy, DEFAULT_BETA_SLOPE};

use common::{apply_sigma_z, column, dot, emission_weight, hamiltonian, real_parts, schedule_duration, sorted_eigen};

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn from_parts(parts: Vec<(bool, String)>) -> Self {
        let passed = parts.iter().all(|p| p.0);
        let detail = parts
            .into_iter()
            .map(|(ok, text)| format!("[{}] {text}", if ok { "ok" } else { "FAILED" }))
            .collect::<Vec<_>>()
            .join("; ");
        Self { passed, detail }
    }
}

fn spectrum_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut level_err, mut element_err) = (0.0f64, 0.0f64);
    for n in 2..=6u32 {
        let dim = 1usize << n;
        let marked = rng.gen_range(0..dim);
        let basis = ExcitedBasis::new(ProblemInstance::new(n, marked).unwrap());
        for _ in 0..20 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let (values, vectors) = sorted_eigen(hamiltonian(n, marked, s));
            let p = SpectrumPoint::at(s, dim);
            let mut closed = vec![p.e0, p.e1];
            closed.resize(dim, 1.0);
            for (a, b) in values.iter().zip(&closed) {
                level_err = level_err.max((a - b).abs());
            }
            let ground = column(&vectors, 0);
            let elements = sigma_z_matrix_elements(s, dim);
            for qubit in 0..n {
                let flipped = apply_sigma_z(&ground, qubit);
                for v in &basis.antisymmetric {
                    element_err = element_err.max((dot(&real_parts(v), &flipped).abs() - elements.antisymmetric).abs());
                }
                for (k, v) in basis.symmetric.iter().enumerate() {
                    let expected = if k == 0 { elements.complement } else { elements.symmetric };
                    element_err = element_err.max((dot(&real_parts(v), &flipped).abs() - expected).abs());
                }
            }
        }
    }
    Verdict::from_parts(vec![
        (level_err <= 1e-10, format!("eigenvalues worst {level_err:.2e} (tol 1e-10)")),
        (element_err <= 1e-10, format!("sigma^z elements worst {element_err:.2e} (tol 1e-10)")),
    ])
}

fn schedule_identities() -> Verdict {
    let eps = 0.01;
    let mut endpoints = true;
    let (mut fd_err, mut time_err) = (0.0f64, 0.0f64);
    for n in 2..=16u32 {
        let dim = 1usize << n;
        let schedule = Schedule::exact(ScheduleParams::new(dim, eps).unwrap());
        let total = total_time(dim, eps);
        endpoints &= schedule.s(0.0).unwrap() == 0.0;
        endpoints &= schedule.s(0.5 * total).unwrap() == 0.5;
        endpoints &= schedule.s(total).unwrap() == 1.0;
        let h = 1e-6 * total;
        for j in 1..100 {
            let t = total * j as f64 / 100.0;
            let fd = (schedule.s(t + h).unwrap() - schedule.s(t - h).unwrap()) / (2.0 * h);
            let target = eps * gap(schedule.s(t).unwrap(), dim).powi(2);
            fd_err = fd_err.max(((fd - target) / target).abs());
        }
        let t = schedule_duration(dim, eps, total, 200_000);
        time_err = time_err.max(((t - total) / total).abs());
    }
    Verdict::from_parts(vec![
        (endpoints, "s(0) = 0, s(T/2) = 1/2, s(T) = 1 exactly for n = 2..16".into()),
        (fd_err <= 1e-6, format!("finite-difference slope worst relative {fd_err:.2e} (tol 1e-6)")),
        (time_err <= 1e-3, format!("integrated total time worst relative {time_err:.2e} (tol 1e-3)")),
    ])
}

fn probabilities(rows: &[ScheduleRow], kind: &ScheduleKind) -> Vec<(u32, f64)> {
    rows.iter().filter(|r| &r.kind == kind).map(|r| (r.qubits, r.outcome.success_probability)).collect()
}

fn spread(values: &[(u32, f64)]) -> (f64, f64) {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn sweep_config(pieces: Vec<usize>, include_exact: bool) -> Config {
    let mut config = Config::default();
    config.schedule_sweep.n_min = 4;
    config.schedule_sweep.n_max = 14;
    config.schedule_sweep.pieces = pieces;
    config.schedule_sweep.include_exact = include_exact;
    config
}

fn unperturbed() -> Verdict {
    let rows = schedule_sweep(&sweep_config(vec![], true)).unwrap();
    let exact = probabilities(&rows, &ScheduleKind::Exact);
    let (lo, hi) = spread(&exact);
    let all_valid = rows.iter().all(|r| r.outcome.status.is_valid());
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let config = IntegratorConfig::default();
    let mut agreement = 0.0f64;
    for n in 4..=8u32 {
        let dim = 1usize << n;
        let instance = ProblemInstance::new(n, rng.gen_range(0..dim)).unwrap();
        let spec = HamiltonianSpec::new(instance);
        let schedule = Schedule::exact(ScheduleParams::new(dim, 0.01).unwrap());
        let reduced = evolve(&spec, &schedule, &config, Space::Reduced, &reduced_plus_state(dim)).unwrap();
        let full = evolve(&spec, &schedule, &config, Space::Full, &make_plus_state(&instance)).unwrap();
        agreement = agreement.max((reduced.success_probability - full.success_probability).abs());
    }
    Verdict::from_parts(vec![
        (all_valid, "all runs within the norm-drift ceiling".into()),
        (lo >= 0.9, format!("min P_s over n = 4..14 is {lo:.6} (>= 0.9)")),
        (hi - lo < 0.05, format!("P_s spread {:.2e} (< 0.05)", hi - lo)),
        (agreement <= 1e-6, format!("reduced vs full worst |dP| {agreement:.2e} for n = 4..8 (tol 1e-6)")),
    ])
}

fn piecewise() -> Verdict {
    let rows = schedule_sweep(&sweep_config(vec![1, 3, 4], false)).unwrap();
    let one = probabilities(&rows, &ScheduleKind::Piecewise(1));
    let three = probabilities(&rows, &ScheduleKind::Piecewise(3));
    let four = probabilities(&rows, &ScheduleKind::Piecewise(4));
    let (lo, hi) = spread(&three);
    let worst = three
        .iter()
        .zip(&four)
        .map(|(a, b)| (a.0, b.1 - a.1))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let decreasing = one.windows(2).all(|w| w[1].1 < w[0].1);
    let fmt = |v: &[(u32, f64)]| v.iter().map(|(n, p)| format!("{n}:{p:.4}")).collect::<Vec<_>>().join(" ");
    Verdict::from_parts(vec![
        (
            hi - lo < 0.05,
            format!("3-piece spread {:.4} (< 0.05) over n = 4..14, P_s = {}", hi - lo, fmt(&three)),
        ),
        (worst.1 >= 0.0, format!("min P(4-piece) - P(3-piece) = {:.2e} at n = {}", worst.1, worst.0)),
        (decreasing, format!("1-piece strictly decreasing, P_s = {}", fmt(&one))),
    ])
}

fn misspecification() -> Verdict {
    let mut config = Config::default();
    config.chi_sweep.n_min = 4;
    config.chi_sweep.n_max = 24;
    config.chi_sweep.chi = vec![0.16, 0.08, 0.04, 0.02];
    config.chi_sweep.tail_points = 4;
    let sweep = chi_sweep(&config).unwrap();
    let mut parts = vec![(sweep.rows.iter().all(|r| r.outcome.status.is_valid()), "all runs valid".to_string())];
    for c in &sweep.crossings {
        let slope = c.tail_slope.unwrap_or(f64::NAN);
        let r2 = c.tail_r2.unwrap_or(f64::NAN);
        parts.push((
            slope < 0.0 && r2 >= 0.98,
            format!(
                "chi {}: tail n = {}..{} slope {slope:.4}, R^2 {r2:.5}, crossing n = {:?} ({:.2})",
                c.chi,
                c.tail_n_min.unwrap_or(0),
                c.tail_n_max.unwrap_or(0),
                c.crossing_n,
                c.crossing_interpolated.unwrap_or(f64::NAN)
            ),
        ));
    }
    let crossings: Vec<Option<u32>> = sweep.crossings.iter().map(|c| c.crossing_n).collect();
    let steps: Vec<i64> = crossings.windows(2).filter_map(|w| Some(w[1]? as i64 - w[0]? as i64)).collect();
    let spacing_ok = crossings.iter().all(Option::is_some) && steps.iter().all(|d| (1..=3).contains(d));
    parts.push((spacing_ok, format!("crossing shift per halving {steps:?} (2 +/- 1)")));
    Verdict::from_parts(parts)
}

fn noise_ensemble() -> Verdict {
    let mut config = Config::default();
    config.noise_sweep.qubits = vec![6, 8, 10];
    config.noise_sweep.n_sigma2 = vec![0.01, 0.03, 0.1, 3.0];
    config.noise_sweep.instances = 200;
    config.noise_sweep.resamples = 1000;
    let sweep = noise_sweep(&config).unwrap();
    let invalid = sweep.records.iter().filter(|r| !r.status.is_valid()).count();
    let mut parts = vec![(invalid == 0, format!("{invalid} invalid runs of {}", sweep.records.len()))];
    let k = sweep.decay_constant.unwrap_or(f64::NAN);
    parts.push(((1.6..=2.6).contains(&k), format!("(a) decay constant {k:.3} from {} points, in [1.6, 2.6]", sweep.fit_points)));
    for m in sweep.medians.iter().filter(|m| m.scaled_variance() > 2.9) {
        let target = 1.0 / m.dim as f64;
        let off = (m.mean_of_medians - target).abs();
        parts.push((
            off <= 2.0 * m.error_bar,
            format!(
                "(b) n = {}: median {:.4e} vs 1/N {:.4e}, {:.2} error bars",
                m.qubits,
                m.mean_of_medians,
                target,
                off / m.error_bar
            ),
        ));
    }
    for x in &config.noise_sweep.n_sigma2 {
        if 7.0 * x >= 1.0 {
            continue;
        }
        let group: Vec<_> = sweep.medians.iter().filter(|m| (m.scaled_variance() - x).abs() < 1e-9 * x.max(1.0)).collect();
        let mut worst = 0.0f64;
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                worst = worst.max((a.mean_of_medians - b.mean_of_medians).abs() / (a.error_bar + b.error_bar));
            }
        }
        let values = group.iter().map(|m| format!("{:.5}+/-{:.5}", m.mean_of_medians, m.error_bar)).collect::<Vec<_>>();
        parts.push((worst <= 1.0, format!("(c) N sigma^2 = {x}: {} (worst separation {worst:.2} of summed bars)", values.join(", "))));
    }
    Verdict::from_parts(parts)
}

fn thermal() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut rate_err = 0.0f64;
    for n in 2..=6u32 {
        let dim = 1usize << n;
        let marked = rng.gen_range(0..dim);
        let instance = ProblemInstance::new(n, marked).unwrap();
        let bath = BathParams::new(1.0, 0.1).unwrap();
        for _ in 0..20 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let (values, vectors) = sorted_eigen(hamiltonian(n, marked, s));
            let ground = column(&vectors, 0);
            let mut brute = 0.0;
            for level in 2..dim {
                let v = column(&vectors, level);
                let weight: f64 = (0..n).map(|q| dot(&v, &apply_sigma_z(&ground, q)).powi(2)).sum();
                brute += emission_weight(values[level] - values[0], 1.0, 0.1) * weight;
            }
            let closed = excitation_rate(s, &instance, &bath).unwrap();
            let err = if brute == 0.0 { closed.abs() } else { ((closed - brute) / brute).abs() };
            rate_err = rate_err.max(err);
        }
    }
    let reference = BathParams::new(1.0, 0.1).unwrap();
    let report = |policy| scaling_report(6..=16, &reference, policy, 0.01).unwrap();

    let fixed = report(BathPolicy::FixedBeta);
    let ratio = fixed.last_plateau_ratio().unwrap();

    let linear = report(BathPolicy::BetaLinearInN { slope: DEFAULT_BETA_SLOPE });
    let p_min = linear.rows.iter().map(|r| r.thermal_p_at_half).fold(f64::INFINITY, f64::min);
    let e_first = linear.rows[0].expected_excitations;
    let e_max = linear.rows.iter().map(|r| r.expected_excitations).fold(0.0, f64::max);
    let e_last = linear.rows.last().unwrap().expected_excitations;

    let scaled = report(BathPolicy::GScaled);
    let per_qubit: Vec<f64> = scaled.rows.iter().map(|r| r.expected_excitations / r.qubits as f64).collect();
    let k = per_qubit.len();
    let per_qubit_max = per_qubit.iter().copied().fold(0.0, f64::max);
    let per_qubit_ratio = per_qubit[k - 1] / per_qubit[k - 2];
    let totals = (scaled.rows[0].expected_excitations, scaled.rows[k - 1].expected_excitations);

    Verdict::from_parts(vec![
        (rate_err <= 1e-8, format!("rate vs brute force worst relative {rate_err:.2e} for n = 2..6 (tol 1e-8)")),
        ((ratio - 1.0).abs() <= 0.05, format!("fixed beta: N P_thermal ratio n = 15 -> 16 is {ratio:.4} (within 5%)")),
        (p_min >= 1.0 / 3.0, format!("beta = 2 n ln 2: min P_thermal(1/2) {p_min:.4} (>= 1/3)")),
        (
            e_max.is_finite() && e_max <= e_first,
            format!("beta = 2 n ln 2: expected excitations {e_first:.4} at n = 6, {e_last:.4} at n = 16, max {e_max:.4}"),
        ),
        (
            per_qubit_max <= 2.0 * per_qubit[0] && (per_qubit_ratio - 1.0).abs() <= 0.05,
            format!(
                "g ~ N^(-1/4): expected excitations per qubit {:.3} -> {:.3} (max {per_qubit_max:.3}, last ratio {per_qubit_ratio:.4}); totals {:.2} -> {:.2}",
                per_qubit[0],
                per_qubit[k - 1],
                totals.0,
                totals.1
            ),
        ),
    ])
}

const DETERMINISM_CONFIG: &str = r#"
[run]
seed = 99

[schedule_sweep]
n_min = 3
n_max = 9
curve_qubits = 6
curve_points = 51

[chi_sweep]
n_min = 4
n_max = 12

[noise_sweep]
qubits = [4, 6]
n_sigma2 = [0.0, 0.03, 3.0]
instances = 8
resamples = 100

[thermal_report]
n_min = 3
n_max = 12
"#;

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv") || p.ends_with("params.toml"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let base = Config::from_toml_str(DETERMINISM_CONFIG).unwrap();
    let mut parts = Vec::new();
    for experiment in Experiment::ALL {
        let mut first = base.clone();
        first.run.out = tmp.path().join(format!("{}_a", experiment.name()));
        first.run.workers = 1;
        let report = run_experiment(experiment, &first).unwrap();
        let manifest = first.run.out.join(format!("{}.manifest.toml", experiment.name()));
        let mut replay = Config::load(Some(&manifest)).unwrap();
        replay.run.out = tmp.path().join(format!("{}_b", experiment.name()));
        replay.run.workers = 4;
        run_experiment(experiment, &replay).unwrap();
        let a = outputs(&first.run.out);
        let b = outputs(&replay.run.out);
        parts.push((
            a == b && report.invalid_runs == 0 && a.len() >= 2,
            format!("{}: {} files identical after manifest replay on 4 workers", experiment.command(), a.len()),
        ));
    }
    Verdict::from_parts(parts)
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("spectrum_oracle", spectrum_oracle),
        ("schedule_identities", schedule_identities),
        ("unperturbed_algorithm", unperturbed),
        ("piecewise_schedules", piecewise),
        ("chi_misspecification", misspecification),
        ("noise_ensemble", noise_ensemble),
        ("thermal_analysis", thermal),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let verdict = check();
        let status = if verdict.passed { "PASS" } else { "FAIL" };
        println!("{status} {name} ({:.1} s): {}", started.elapsed().as_secs_f64(), verdict.detail);
        if !verdict.passed {
            failed.push(name);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
