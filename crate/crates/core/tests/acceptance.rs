//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion to stderr, then fails if any criterion failed.
//!
//! Run with `cargo test --release --test acceptance` for realistic runtimes;
//! the workspace test profile is already optimized.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use wpt_relay::ao_driver::{
    default_source_init, rate_diagonal, rate_exact_matrix, reconstruct_matrices, relay_power_balance, run_ao_with,
    AoOptions, MonotonePolicy, PowerAllocation, Scheme,
};
use wpt_relay::channel_model::{generate_channels, Geometry, SystemParams};
use wpt_relay::experiments::{argmax, is_unimodal, sweep_distance, sweep_rho, SweepConfig, SweepResult};
use wpt_relay::hpm_plm::{design_energy_beam, diagonalize, harvested_proxy};
use wpt_relay::linalg::hermitian_eigenvalues;
use wpt_relay::oracles::{exhaustive_pairing_check, random_feasible_dominance, relay_closed_form_check, DominanceKind};

const SEED: u64 = 2024;
const ALPHA: f64 = 0.05;

struct Outcome {
    id: usize,
    passed: bool,
    summary: String,
}

fn say(line: &str) {
    // bypasses the test harness capture so the lines always show
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(o: &Outcome) {
    say(&format!("criterion {} {}: {}", o.id, if o.passed { "PASS" } else { "FAIL" }, o.summary));
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// ------------------------------------------------------------- statistics

/// One-sided exact sign test: p-value of observing at least `n_pos` positive
/// differences out of `n_pos + n_neg` under a fair coin. Ties are dropped.
fn sign_test_p(diffs: &[f64]) -> (usize, usize, f64) {
    let n_pos = diffs.iter().filter(|d| **d > 0.0).count();
    let n_neg = diffs.iter().filter(|d| **d < 0.0).count();
    let n = n_pos + n_neg;
    if n == 0 {
        return (0, 0, 1.0);
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_c = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= n_pos {
            tail += (ln_c + ln_half_n).exp();
        }
    }
    (n_pos, n_neg, tail.min(1.0))
}

/// Paired differences `a - b` over trials where both are finite.
fn paired(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| x - y).collect()
}

/// True when `a > b` is significant at level `ALPHA`.
fn significantly_greater(a: &[f64], b: &[f64]) -> (bool, String) {
    let (p, n, pv) = sign_test_p(&paired(a, b));
    (pv < ALPHA, format!("{p}+/{n}- p={pv:.2e}"))
}

// ---------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let (grid, res) = relay_closed_form_check(50, 10_000, SEED).expect("oracle runs");
    let el = t.elapsed();
    let passed = grid.passed && res.passed && el < Duration::from_secs(10);
    Outcome {
        id: 1,
        passed,
        summary: format!(
            "50 r=2 instances, max |closed form - grid| = {:.2e} (tol 1e-5), max equality residual {:.2e} (tol 1e-8), {} (limit 10s)",
            grid.max_violation,
            res.max_violation,
            secs(el)
        ),
    }
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let r3 = exhaustive_pairing_check(3, 20, SEED).expect("oracle runs");
    let r4 = exhaustive_pairing_check(4, 5, SEED).expect("oracle runs");
    let el = t.elapsed();
    Outcome {
        id: 2,
        passed: r3.passed && r4.passed && el < Duration::from_secs(30),
        summary: format!(
            "canonical pairing optimal: r=3 x20 excess {:.2e}, r=4 x5 excess {:.2e} (tol 1e-9), {} (limit 30s)",
            r3.max_violation,
            r4.max_violation,
            secs(el)
        ),
    }
}

fn criterion_3() -> Outcome {
    // identity and rank one on production channel draws
    let params = SystemParams::default();
    let geom = Geometry::new(10.0, 0.65).unwrap();
    let mut worst_identity = 0.0f64;
    let mut worst_rank = 0.0f64;
    for seed in 0..20 {
        let ch = generate_channels(&params, &geom, SEED + seed).unwrap();
        let beam = design_energy_beam(&ch.h_rd, params.p_d).unwrap();
        let target = params.p_d * beam.lambda_max;
        worst_identity = worst_identity.max((harvested_proxy(&ch.h_rd, &beam.q_d) - target).abs() / target);
        let mut ev = hermitian_eigenvalues(&beam.q_d);
        ev.sort_by(f64::total_cmp);
        worst_rank = worst_rank.max(ev[ev.len() - 2].abs() / ev[ev.len() - 1]);
    }
    let dom = random_feasible_dominance(DominanceKind::EnergyBeam, 100, 20, SEED).expect("oracle runs");
    Outcome {
        id: 3,
        passed: worst_identity <= 1e-10 && worst_rank < 1e-10 && dom.passed && !dom.inconclusive,
        summary: format!(
            "harvest identity rel err {:.2e} (tol 1e-10), second/first eigenvalue {:.2e}, dominance over 20x100 covariances excess {:.2e}",
            worst_identity, worst_rank, dom.max_violation
        ),
    }
}

struct Census {
    converged: usize,
    monotone: usize,
    max_iter_used: usize,
    allocations: Vec<(u64, Scheme, PowerAllocation)>,
}

/// Half the default source powers, projected back by one relay solve inside
/// the AO; a start that is not already a fixed point.
fn half_init(params: &SystemParams, seed: u64, scheme: Scheme) -> PowerAllocation {
    let ch = generate_channels(params, &Geometry::new(10.0, 0.65).unwrap(), seed).unwrap();
    let sys = diagonalize(&ch, params).unwrap();
    let x: Vec<f64> = default_source_init(&sys, params, scheme).iter().map(|v| 0.5 * v).collect();
    PowerAllocation { lambda_f: vec![1.0; params.r], lambda_rs_tilde: x }
}

fn census(params: &SystemParams, scheme: Scheme, perturbed: bool) -> Census {
    let geom = Geometry::new(10.0, 0.65).unwrap();
    let opts = AoOptions { monotone: MonotonePolicy::Warn, ..AoOptions::default() };
    let mut c = Census { converged: 0, monotone: 0, max_iter_used: 0, allocations: Vec::new() };
    for k in 0..100 {
        let seed = SEED + k;
        let ch = generate_channels(params, &geom, seed).unwrap();
        let init = perturbed.then(|| half_init(params, seed, scheme));
        let Ok(res) = run_ao_with(&ch, params, scheme, init.as_ref(), &opts) else { continue };
        if res.converged && res.iterations <= 500 {
            c.converged += 1;
            c.allocations.push((seed, scheme, res.allocation.clone()));
        }
        if res.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)) {
            c.monotone += 1;
        }
        c.max_iter_used = c.max_iter_used.max(res.iterations);
    }
    c
}

fn criterion_4_5() -> (Outcome, Outcome) {
    let params = SystemParams { rho: 0.7, p_d: 0.5, p_s: 0.1, eps: 1e-6, max_iter: 500, ..SystemParams::default() };
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok4 = true;
    let mut allocations = Vec::new();
    for scheme in [Scheme::P3B, Scheme::P3C] {
        for perturbed in [false, true] {
            let c = census(&params, scheme, perturbed);
            ok4 &= c.converged == 100 && c.monotone == 100;
            parts.push(format!(
                "{scheme}{} {}/100 converged, {}/100 monotone, max {} iter",
                if perturbed { " (half-power start)" } else { "" },
                c.converged,
                c.monotone,
                c.max_iter_used
            ));
            allocations.extend(c.allocations);
        }
    }
    let el = t.elapsed();
    ok4 &= el < Duration::from_secs(60);
    let o4 = Outcome { id: 4, passed: ok4, summary: format!("{}; {} (limit 60s)", parts.join("; "), secs(el)) };

    let geom = Geometry::new(10.0, 0.65).unwrap();
    let mut worst_rate = 0.0f64;
    let mut worst_power = 0.0f64;
    for (seed, _scheme, alloc) in &allocations {
        let ch = generate_channels(&params, &geom, *seed).unwrap();
        let sys = diagonalize(&ch, &params).unwrap();
        let diag = rate_diagonal(alloc, &sys, &params).unwrap();
        let (f, q_s, q_d) = reconstruct_matrices(&sys, alloc, params.p_d).unwrap();
        let exact = rate_exact_matrix(&f, &q_s, Some(&q_d), &ch, &params).unwrap();
        worst_rate = worst_rate.max((diag - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
        let (fwd, harvested) = relay_power_balance(&f, &q_s, &q_d, &ch, &params);
        worst_power = worst_power.max((fwd - harvested).abs() / harvested);
    }
    let o5 = Outcome {
        id: 5,
        passed: !allocations.is_empty() && worst_rate <= 1e-9 && worst_power <= 1e-8,
        summary: format!(
            "{} converged allocations: diagonal vs determinant rate rel err {:.2e} (tol 1e-9), matrix power constraint rel err {:.2e} (tol 1e-8)",
            allocations.len(),
            worst_rate,
            worst_power
        ),
    };
    (o4, o5)
}

fn criterion_6() -> Outcome {
    let cfg = SweepConfig { base_seed: SEED, ..SweepConfig::default() };
    let t = Instant::now();
    let res = sweep_rho(&cfg).expect("sweep runs");
    let el = t.elapsed();
    let mut ok = el < Duration::from_secs(15 * 60);
    let mut parts = Vec::new();
    for (scheme, target) in [(Scheme::P3B, 0.72), (Scheme::P3C, 0.74), (Scheme::NoEF, 0.88)] {
        let curve = res.curve(scheme, 0).unwrap();
        let best = cfg.rho_grid[argmax(&curve).unwrap()];
        let uni = is_unimodal(&curve);
        let near = (best - target).abs() <= 0.1 + 1e-9;
        ok &= uni && near;
        parts.push(format!("{scheme} argmax {best} (target {target}, unimodal {uni})"));
    }
    let b = res.curve(Scheme::P3B, 0).unwrap();
    let c = res.curve(Scheme::P3C, 0).unwrap();
    let below = b.iter().zip(&c).all(|(pb, pc)| pc <= pb);
    ok &= below;
    Outcome {
        id: 6,
        passed: ok,
        summary: format!("{}; p3c <= p3b at all 49 points: {below}; {} (limit 15min)", parts.join(", "), secs(el)),
    }
}

fn distance_config(p_d: f64, p_s: f64, ratios: Vec<f64>) -> SweepConfig {
    let mut cfg = SweepConfig { ratio_grid: ratios, base_seed: SEED, ..SweepConfig::default() };
    cfg.params.p_d = p_d;
    cfg.params.p_s = p_s;
    cfg
}

/// Per-trial rates at the mean curve's best PS ratio.
fn at_best(res: &SweepResult, scheme: Scheme, i: usize) -> Vec<f64> {
    let j = argmax(&res.curve(scheme, i).unwrap()).unwrap();
    res.samples(scheme, i, j).unwrap().to_vec()
}

fn ratio_index(res: &SweepResult, ratio: f64) -> usize {
    res.config.ratio_grid.iter().position(|r| (r - ratio).abs() < 1e-9).unwrap()
}

/// Relative gap `(noEF - EF) / noEF` of the best-ratio mean rates.
fn relative_gap(res: &SweepResult, i: usize) -> f64 {
    let ef = res.best_rho(Scheme::P3B, i).unwrap().rate_at_best;
    let no = res.best_rho(Scheme::NoEF, i).unwrap().rate_at_best;
    (no - ef) / no
}

/// Fraction of paired bootstrap resamples in which the EF average-rate
/// maximizer lies strictly above the no-EF one.
fn bootstrap_reversal(res: &SweepResult, i: usize, n_boot: usize, seed: u64) -> f64 {
    let n_rho = res.config.rho_grid.len();
    let n_t = res.config.n_trials;
    let table = |s| -> Vec<Vec<f64>> { (0..n_rho).map(|j| res.samples(s, i, j).unwrap().to_vec()).collect() };
    let (ef, no) = (table(Scheme::P3B), table(Scheme::NoEF));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut hits = 0;
    let mut idx = vec![0usize; n_t];
    for _ in 0..n_boot {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n_t);
        }
        let curve = |tab: &Vec<Vec<f64>>| -> Vec<f64> {
            tab.iter()
                .map(|row| {
                    let vals: Vec<f64> = idx.iter().map(|&t| row[t]).filter(|v| v.is_finite()).collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                })
                .collect()
        };
        if let (Some(a), Some(b)) = (argmax(&curve(&ef)), argmax(&curve(&no))) {
            if a > b {
                hits += 1;
            }
        }
    }
    hits as f64 / n_boot as f64
}

fn criterion_7(res: &SweepResult) -> Outcome {
    let n = res.config.ratio_grid.len();
    let mut subs = Vec::new();
    let mut ok = true;

    // no-EF rate must not drop significantly as the relay moves away from D
    let mut violations = Vec::new();
    let means: Vec<f64> = (0..n).map(|i| res.best_rho(Scheme::NoEF, i).unwrap().rate_at_best).collect();
    for i in 0..n - 1 {
        let (sig, detail) = significantly_greater(&at_best(res, Scheme::NoEF, i), &at_best(res, Scheme::NoEF, i + 1));
        if sig {
            violations.push(format!("{}>{} ({detail})", res.config.ratio_grid[i], res.config.ratio_grid[i + 1]));
        }
    }
    let mono = violations.is_empty();
    ok &= mono;
    let means_txt: Vec<String> = means.iter().map(|m| format!("{m:.2}")).collect();
    subs.push(format!(
        "[{}] no-EF increasing in d_DR/d_DS over {:?}: means [{}]{}",
        if mono { "pass" } else { "fail" },
        res.config.ratio_grid,
        means_txt.join(", "),
        if mono { String::new() } else { format!(", significant drops {}", violations.join(" ")) }
    ));

    let i3 = ratio_index(res, 0.3);
    let (sig, detail) = significantly_greater(&at_best(res, Scheme::P3B, i3), &at_best(res, Scheme::NoEF, i3));
    ok &= sig;
    subs.push(format!("[{}] EF beats no-EF at 0.3 ({detail})", if sig { "pass" } else { "fail" }));

    let i9 = ratio_index(res, 0.9);
    let (sig, detail) = significantly_greater(&at_best(res, Scheme::NoEF, i9), &at_best(res, Scheme::P3B, i9));
    ok &= sig;
    subs.push(format!("[{}] no-EF beats EF at 0.9 ({detail})", if sig { "pass" } else { "fail" }));

    // best ratio is the maximizer of the average rate; a reversal counts only
    // if it persists in 95% of paired bootstrap resamples of the trials
    let mut reversals = Vec::new();
    let mut notes = Vec::new();
    for i in 0..n {
        let grid = &res.config.rho_grid;
        let (mb, mn) =
            (res.best_rho(Scheme::P3B, i).unwrap().best_rho, res.best_rho(Scheme::NoEF, i).unwrap().best_rho);
        let frac = bootstrap_reversal(res, i, 1000, SEED + i as u64);
        let per_trial = |s| -> Vec<f64> {
            res.trial_best(s, i).unwrap().iter().map(|b| b.map_or(f64::NAN, |(j, _)| grid[j])).collect()
        };
        let (sig, detail) = significantly_greater(&per_trial(Scheme::P3B), &per_trial(Scheme::NoEF));
        if sig {
            notes.push(format!("per-trial maximizers favour EF at {} ({detail})", res.config.ratio_grid[i]));
        }
        if frac >= 1.0 - ALPHA {
            reversals.push(format!(
                "{} (argmax {mb} vs {mn}, {:.0}% of resamples)",
                res.config.ratio_grid[i],
                100.0 * frac
            ));
        }
    }
    let ordered = reversals.is_empty();
    ok &= ordered;
    subs.push(format!(
        "[{}] best rho no-EF >= EF at every ratio{}{}",
        if ordered { "pass" } else { "fail" },
        if ordered { String::new() } else { format!(": reversed at {}", reversals.join(", ")) },
        if notes.is_empty() { String::new() } else { format!(" (info: {})", notes.join(", ")) }
    ));
    Outcome { id: 7, passed: ok, summary: subs.join("; ") }
}

fn criterion_8(res7: &SweepResult) -> Outcome {
    let t = Instant::now();
    let res = sweep_distance(&distance_config(5.0, 0.01, vec![0.5, 0.9])).expect("sweep runs");
    let (sig, detail) = significantly_greater(&at_best(&res, Scheme::NoEF, 0), &at_best(&res, Scheme::P3B, 0));
    let ef = res.best_rho(Scheme::P3B, 0).unwrap().rate_at_best;
    let no = res.best_rho(Scheme::NoEF, 0).unwrap().rate_at_best;
    let gap_high = relative_gap(&res, 1);
    let gap_low = relative_gap(res7, ratio_index(res7, 0.9));
    let smaller = gap_high < gap_low;
    Outcome {
        id: 8,
        passed: !sig && smaller,
        summary: format!(
            "[{}] EF >= no-EF at 0.5: means {ef:.3} vs {no:.3}, reverse test {detail}; [{}] gap at 0.9 (noEF-EF)/noEF {gap_high:.3} vs {gap_low:.3} at P_D=0.5; {}",
            if sig { "fail" } else { "pass" },
            if smaller { "pass" } else { "fail" },
            secs(t.elapsed())
        ),
    }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_wpt-relay"))
        .args(args)
        .env_remove("WPT_RELAY_SEED")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["single", "--seed", "5", "--rho", "0.6"],
        vec!["sweep-rho", "--seed", "5", "--trials", "6", "--out", out_s],
        vec!["sweep-distance", "--seed", "5", "--trials", "3", "--pd", "5", "--ps", "0.01", "--out", out_s],
        vec!["sweep-rho", "--seed", "5", "--trials", "6", "--threads", "1", "--out", out_s],
        vec!["validate", "--seed", "5", "--out", out_s],
    ];
    let mut ok = true;
    let mut names = Vec::new();
    for args in &runs {
        let _ = std::fs::remove_dir_all(&out);
        let (c1, s1) = run_cli(args);
        let f1 = if out.exists() { read_dir_files(&out) } else { Vec::new() };
        let _ = std::fs::remove_dir_all(&out);
        let (c2, s2) = run_cli(args);
        let f2 = if out.exists() { read_dir_files(&out) } else { Vec::new() };
        let same = c1 == 0 && c2 == 0 && s1 == s2 && f1 == f2;
        ok &= same;
        names.push(format!("{} {}", args[0], if same { "identical" } else { "DIFFERENT" }));
    }
    // worker count must not change the table either
    let _ = std::fs::remove_dir_all(&out);
    run_cli(&runs[1]);
    let many = read_dir_files(&out);
    let _ = std::fs::remove_dir_all(&out);
    run_cli(&runs[3]);
    let one = read_dir_files(&out);
    let thread_inv = many == one;
    ok &= thread_inv;
    names.push(format!("thread count invariant {thread_inv}"));
    Outcome { id: 9, passed: ok, summary: format!("repeated CLI runs: {}", names.join(", ")) }
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = Vec::new();
    for o in [criterion_1(), criterion_2(), criterion_3()] {
        report(&o);
        outcomes.push(o);
    }
    let (o4, o5) = criterion_4_5();
    report(&o4);
    report(&o5);
    outcomes.push(o4);
    outcomes.push(o5);
    let o6 = criterion_6();
    report(&o6);
    outcomes.push(o6);

    let t = Instant::now();
    let ratios = wpt_relay::config::default_distance_grid();
    let res7 = sweep_distance(&distance_config(0.5, 0.1, ratios)).expect("sweep runs");
    say(&format!("(distance sweep at P_D=0.5 W, P_S=0.1 W: {})", secs(t.elapsed())));
    let o7 = criterion_7(&res7);
    report(&o7);
    outcomes.push(o7);
    let o8 = criterion_8(&res7);
    report(&o8);
    outcomes.push(o8);
    let o9 = criterion_9();
    report(&o9);
    outcomes.push(o9);

    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    say(&format!("acceptance: {}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn sign_test_reference_values() {
    // P(X >= 8 | n = 10) = 56 / 1024
    let (p, n, pv) = sign_test_p(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 0.0]);
    assert_eq!((p, n), (8, 2));
    assert!((pv - 56.0 / 1024.0).abs() < 1e-12);
    assert_eq!(sign_test_p(&[]).2, 1.0);
    let (_, _, all) = sign_test_p(&[1.0; 200]);
    assert!((all - 0.5f64.powi(200)).abs() < 1e-70);
}
