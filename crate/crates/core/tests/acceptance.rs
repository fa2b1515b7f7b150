//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr (not
//! captured by the harness) and then asserts the same condition.
//!
//! Run with `cargo test -p wicknlw --test acceptance`.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use wicknlw::dynamics::{evolve, evolve_with, hamiltonian_wick, nonlinear_force, DynParams, Forcing};
use wicknlw::experiments::chaos::{chaos_convergence_study, ChaosConfig};
use wicknlw::experiments::invariance::{invariance_test, InvarianceReport};
use wicknlw::experiments::universality::{
    universality_experiment, Nonlinearity, ScaledForcing, UniversalityReport,
};
use wicknlw::gaussian::{gamma_n, sample_mu_indexed, sigma_n, MuParams};
use wicknlw::gibbs::{sample_gibbs, ChainOptions, Observable, SamplerMethod};
use wicknlw::spectral::to_grid;
use wicknlw::stats::mean_stderr;
use wicknlw::wick::{hermite, scaling_identity_check, wick_binomial, wick_power, WickContext};

fn report(id: usize, pass: bool, started: Instant, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "acceptance criterion {id:>2}: {verdict} ({:.1} s) {detail}",
        started.elapsed().as_secs_f64()
    );
}

/// Deterministic uniform stream for test inputs (SplitMix64).
struct TestRng(u64);

impl TestRng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

// ---------------------------------------------------------------- criterion 1

/// `H_k(x; σ) = Σ_j k! / (j! (k-2j)!) (-σ/2)^j x^{k-2j}`.
fn hermite_closed_form(k: usize, x: f64, sigma: f64) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    (0..=k / 2)
        .map(|j| fact(k) / (fact(j) * fact(k - 2 * j)) * (-sigma / 2.0).powi(j as i32) * x.powi((k - 2 * j) as i32))
        .sum()
}

#[test]
fn criterion_01_hermite_algebra() {
    let t0 = Instant::now();
    let mut rng = TestRng(1);
    let mut worst = 0.0f64;
    let mut scaling_ok = true;
    let mut fd_ratios = Vec::new();
    let mut fd_ok = true;
    for _ in 0..200 {
        let x = rng.uniform(-5.0, 5.0);
        let sigma = rng.uniform(0.5, 5.0);
        for k in 0..=8 {
            let h = hermite(k, x, sigma);
            let closed = hermite_closed_form(k, x, sigma);
            worst = worst.max((h - closed).abs() / (1.0 + closed.abs()));
            scaling_ok &= scaling_identity_check(k, x, sigma);
            if k >= 1 {
                // central difference error for ∂ₓH_k = k H_{k-1} shrinks by 4 when h halves
                let exact = k as f64 * hermite(k - 1, x, sigma);
                let d = |step: f64| (hermite(k, x + step, sigma) - hermite(k, x - step, sigma)) / (2.0 * step);
                let (e1, e2) = (d(1e-2) - exact, d(5e-3) - exact);
                let scale = 1.0 + exact.abs();
                if k <= 2 {
                    fd_ok &= e1.abs() <= 1e-9 * scale;
                } else if e1.abs() > 1e-6 * scale {
                    let r = e1 / e2;
                    fd_ratios.push(r);
                    fd_ok &= (3.9..=4.1).contains(&r);
                }
            }
        }
    }
    let pass = worst <= 1e-10 && scaling_ok && fd_ok && !fd_ratios.is_empty();
    report(
        1,
        pass,
        t0,
        &format!(
            "max rel err {worst:.2e}, scaling identity {scaling_ok}, {} FD ratios in [3.9, 4.1]: {fd_ok}",
            fd_ratios.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_wick_binomial() {
    let t0 = Instant::now();
    let ctx = WickContext::new(8, 1.0, 2).unwrap();
    let p = MuParams::new(8, 1.0, 22).unwrap();
    let mut worst = 0.0f64;
    for i in 0..5u64 {
        let z = sample_mu_indexed(&p, 2 * i).u;
        let w = sample_mu_indexed(&p, 2 * i + 1).u.scale(0.7);
        let sum = &z + &w;
        for k in 0..=5 {
            let lhs = wick_binomial(&z, &w, k, &ctx).unwrap();
            let rhs = wick_power(&sum, k, &ctx).unwrap();
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                worst = worst.max((a - b).abs() / (1.0 + b.abs()));
            }
        }
    }
    let pass = worst <= 1e-10;
    report(2, pass, t0, &format!("max pointwise rel err {worst:.2e} over 5 field pairs, k <= 5"));
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 3

fn hermite_pair_rows(n_samples: usize, seed: u64) -> Vec<(usize, usize, usize, f64, f64, f64)> {
    let n = 4;
    let rho = 1.0;
    let sigma = sigma_n(n, rho);
    let gamma = gamma_n(n, rho);
    let points = [
        ([0.0, 0.0], [0.0, 0.0]),
        ([0.0, 0.0], [0.4, 0.0]),
        ([0.3, 1.1], [1.0, 2.0]),
    ];
    let params = MuParams::new(n, rho, seed).unwrap();
    let values: Vec<Vec<(f64, f64)>> = (0..n_samples as u64)
        .map(|i| {
            let u = sample_mu_indexed(&params, i).u;
            points
                .iter()
                .map(|(x, y)| (u.eval_at(*x) / sigma.sqrt(), u.eval_at(*y) / sigma.sqrt()))
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for (pi, (x, y)) in points.iter().enumerate() {
        let inner = gamma.eval_at([x[0] - y[0], x[1] - y[1]]) / sigma;
        for k in 1..=4usize {
            for m in 1..=4usize {
                let prods: Vec<f64> = values
                    .iter()
                    .map(|v| hermite(k, v[pi].0, 1.0) * hermite(m, v[pi].1, 1.0))
                    .collect();
                let e = mean_stderr(&prods);
                let fact = (1..=k).product::<usize>() as f64;
                let target = if k == m { fact * inner.powi(k as i32) } else { 0.0 };
                rows.push((pi, k, m, e.mean, e.stderr, target));
            }
        }
    }
    rows
}

#[test]
fn criterion_03_hermite_pair_moments() {
    let t0 = Instant::now();
    let rows = hermite_pair_rows(100_000, 3);
    let worst = rows
        .iter()
        .map(|&(_, _, _, mean, se, target)| (mean - target).abs() / se)
        .fold(0.0, f64::max);
    let pass = worst <= 3.0;
    report(3, pass, t0, &format!("{} comparisons, max |z| = {worst:.2}", rows.len()));
    assert!(pass, "{rows:?}");
}

// ---------------------------------------------------------------- criterion 4

fn chaos_moment_config(n_samples: usize) -> ChaosConfig {
    let mut cfg = ChaosConfig::new(3, vec![1, 4, 8], 1.0, n_samples, 4);
    cfg.time = 0.5;
    cfg.cauchy = false;
    cfg
}

#[test]
fn criterion_04_chaos_second_moments() {
    let t0 = Instant::now();
    let r = chaos_convergence_study(&chaos_moment_config(10_000)).unwrap();
    let moment_z = r.moments.iter().map(|m| m.z_score.abs()).fold(0.0, f64::max);
    let cross_z = r
        .cross
        .iter()
        .flat_map(|c| [c.re.z(0.0).abs(), c.im.z(0.0).abs()])
        .fold(0.0, f64::max);
    let find = |l: usize, n: usize, mode: (i32, i32)| {
        r.moments
            .iter()
            .find(|m| m.order == l && m.cutoff == n && m.mode == mode)
            .unwrap()
            .analytic
    };
    let desk = find(1, 1, (1, 0)) == 0.5 && (find(2, 1, (0, 0)) - 4.0).abs() < 1e-14;
    let pass = moment_z <= 3.0 && cross_z <= 3.0 && desk;
    report(
        4,
        pass,
        t0,
        &format!(
            "{} moments max |z| = {moment_z:.2}, {} cross moments max |z| = {cross_z:.2}, desk values {desk}",
            r.moments.len(),
            2 * r.cross.len()
        ),
    );
    assert!(pass, "{r:#?}");
}

// ---------------------------------------------------------------- criterion 5

fn cauchy_config(n_samples: usize) -> ChaosConfig {
    let mut cfg = ChaosConfig::new(3, vec![4, 8, 16, 32], 1.0, n_samples, 5);
    cfg.orders = vec![3];
    cfg.eps_reg = 0.25;
    cfg.modes = vec![(0, 0)];
    cfg
}

#[test]
fn criterion_05_cauchy_decay() {
    let t0 = Instant::now();
    let r = chaos_convergence_study(&cauchy_config(1000)).unwrap();
    let d: Vec<f64> = r.cauchy.iter().map(|c| c.distance).collect();
    let pass = d.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = r
        .cauchy
        .iter()
        .map(|c| format!("d({})={:.2}±{:.2}", c.cutoff, c.distance, c.stderr))
        .collect();
    report(5, pass, t0, &shown.join(" "));
    assert!(pass, "Cauchy distances not strictly decreasing: {shown:?}");
}

// ---------------------------------------------------------------- criterion 6

fn max_relative_drift(n: usize, dt: f64, seed: u64) -> (f64, f64) {
    let ctx = WickContext::new(n, 1.0, 1).unwrap();
    let params = MuParams::new(n, 1.0, seed).unwrap();
    let run = sample_gibbs(&params, &ctx, 1, SamplerMethod::Metropolis, &ChainOptions { chains: 1, ..Default::default() })
        .unwrap();
    let s0 = &run.samples[0].state;
    let p = DynParams::new(ctx, dt).unwrap();
    let traj = evolve(s0, 1.0, &p, 1).unwrap();
    let e0 = hamiltonian_wick(s0, &ctx).unwrap();
    let drift = traj
        .states
        .iter()
        .map(|s| (hamiltonian_wick(s, &ctx).unwrap() - e0).abs() / e0.abs())
        .fold(0.0, f64::max);
    (drift, e0)
}

#[test]
fn criterion_06_integrator_quality() {
    let t0 = Instant::now();
    let (d1, e0) = max_relative_drift(16, 1e-3, 6);
    let (d2, _) = max_relative_drift(16, 5e-4, 6);
    let ratio = d1 / d2;
    let pass = d1 < 1e-4 && (3.5..=4.5).contains(&ratio);
    report(
        6,
        pass,
        t0,
        &format!("H(0) = {e0:.3}, drift(dt) = {d1:.3e}, drift(dt/2) = {d2:.3e}, ratio {ratio:.3}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 7

/// Adaptive Simpson quadrature on one panel.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// `E[x²]` for the density `∝ exp(-ρx²/2 - H_4(x; 1/ρ)/4)` with `H_4` written out.
fn zero_mode_oracle(rho: f64) -> f64 {
    let s = 1.0 / rho;
    let density = |x: f64| (-0.5 * rho * x * x - (x.powi(4) - 6.0 * s * x * x + 3.0 * s * s) / 4.0).exp();
    // fixed panels first, so no bump can hide between the initial nodes
    let integrate = |g: &dyn Fn(f64) -> f64| -> f64 {
        (0..96)
            .map(|i| {
                let a = -12.0 + 0.25 * i as f64;
                adaptive_simpson(g, a, a + 0.25, 1e-15)
            })
            .sum()
    };
    let z = integrate(&density);
    let m2 = integrate(&|x| x * x * density(x));
    m2 / z
}

fn zero_mode_estimates(n_samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let ctx = WickContext::new(0, 1.0, 1).unwrap();
    let params = MuParams::new(0, 1.0, seed).unwrap();
    [SamplerMethod::Importance, SamplerMethod::Metropolis]
        .iter()
        .map(|&method| {
            let run = sample_gibbs(&params, &ctx, n_samples, method, &ChainOptions::default()).unwrap();
            let e = run.estimate(Observable::ModeSquare((0, 0)), &ctx).unwrap();
            (e.mean, e.stderr)
        })
        .collect()
}

#[test]
fn criterion_07_gibbs_zero_mode() {
    let t0 = Instant::now();
    let target = zero_mode_oracle(1.0);
    let est = zero_mode_estimates(100_000, 7);
    let z: Vec<f64> = est.iter().map(|(m, s)| (m - target) / s).collect();
    let pass = z.iter().all(|z| z.abs() <= 3.0);
    report(
        7,
        pass,
        t0,
        &format!(
            "quadrature {target:.6}; importance {:.6}±{:.1e} (z {:.2}); metropolis {:.6}±{:.1e} (z {:.2})",
            est[0].0, est[0].1, z[0], est[1].0, est[1].1, z[1]
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 8

fn invariance_run(n_samples: usize, seed: u64) -> InvarianceReport {
    let ctx = WickContext::new(8, 1.0, 1).unwrap();
    let p = DynParams::new(ctx, 1e-3).unwrap();
    invariance_test(&ctx, 1.0, &p, n_samples, seed).unwrap()
}

#[test]
fn criterion_08_invariance() {
    let t0 = Instant::now();
    let r = invariance_run(10_000, 8);
    let max_z = r.rows.iter().map(|row| row.z_score.abs()).fold(0.0, f64::max);
    let pass = r.n_failed == 0 && r.rows.iter().all(|row| row.z_score.abs() <= 3.0);
    let shown: Vec<String> = r.rows.iter().map(|row| format!("{}:{:+.2}", row.name, row.z_score)).collect();
    report(
        8,
        pass,
        t0,
        &format!(
            "{} observables, max |z| = {max_z:.2} [{}], max energy drift {:.1e}",
            r.rows.len(),
            shown.join(" "),
            r.max_relative_drift
        ),
    );
    assert!(pass, "{r:#?}");
}

// ---------------------------------------------------------------- criterion 9

fn universality_run() -> UniversalityReport {
    let dt = DynParams::default_dt(32, 1.0);
    universality_experiment(Nonlinearity::Sine, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 1.0, -0.1, 0.5, dt, 9).unwrap()
}

/// Largest deviation of the rescaled pure-cubic forcing from `λ H₃(u; σ_ε)`,
/// on the grid and after projection.
fn pure_cubic_identity_defect(fields: usize) -> f64 {
    let lambda0 = 0.8;
    let f = Nonlinearity::Cubic { coefficient: lambda0 };
    let mut worst = 0.0f64;
    for i in 0..fields {
        let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0][i % 3];
        let sf = ScaledForcing::new(f, eps, 1.0).unwrap();
        let n = sf.cutoff();
        let u = sample_mu_indexed(&MuParams::new(n, 1.0, 900 + i as u64).unwrap(), 0).u;
        let ctx = WickContext::new(n, 1.0, 1).unwrap();
        let g = to_grid(&u, ctx.grid()).unwrap();
        let lhs = sf.grid_forcing(&g);
        for (a, x) in lhs.values().iter().zip(g.values()) {
            let b = lambda0 * hermite(3, *x, sigma_n(n, 1.0));
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        let spectral = sf.force(&u).unwrap();
        let wick = nonlinear_force(&u, &ctx).unwrap().scale(lambda0);
        worst = worst.max((&spectral - &wick).max_abs() / (1.0 + wick.max_abs()));
    }
    worst
}

#[test]
fn criterion_09_universality() {
    let t0 = Instant::now();
    let r = universality_run();
    let d: Vec<f64> = r.rows.iter().map(|row| row.distance.unwrap_or(f64::NAN)).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let defect = pure_cubic_identity_defect(100);
    let pass = decreasing && defect <= 1e-10;
    let shown: Vec<String> = d
        .iter()
        .zip(&r.rows)
        .map(|(d, row)| format!("eps=1/{}:{d:.4e}", row.cutoff))
        .collect();
    report(
        9,
        pass,
        t0,
        &format!(
            "{} reference refinement {:.2e}; pure cubic identity defect {defect:.1e}",
            shown.join(" "),
            r.reference_refinement.unwrap_or(f64::NAN)
        ),
    );
    assert!(pass, "{r:#?}");
}

// ---------------------------------------------------------------- criterion 10

/// Bit patterns of every number produced by reduced versions of criteria 3 to 9.
fn fingerprint() -> Vec<u64> {
    let mut out: Vec<f64> = Vec::new();
    for (_, k, m, mean, se, _) in hermite_pair_rows(2_000, 3) {
        out.extend([k as f64, m as f64, mean, se]);
    }
    let r = chaos_convergence_study(&chaos_moment_config(500)).unwrap();
    out.extend(r.moments.iter().flat_map(|m| [m.mc_estimate, m.stderr]));
    out.extend(r.cross.iter().flat_map(|c| [c.re.mean, c.im.mean, c.re.stderr]));
    let mut cfg = cauchy_config(20);
    cfg.cutoffs = vec![4, 8];
    let r = chaos_convergence_study(&cfg).unwrap();
    out.extend(r.cauchy.iter().map(|c| c.distance));
    let (d, e) = max_relative_drift(8, 1e-2, 6);
    out.extend([d, e]);
    for (m, s) in zero_mode_estimates(5_000, 7) {
        out.extend([m, s]);
    }
    let ctx = WickContext::new(4, 1.0, 1).unwrap();
    let p = DynParams::new(ctx, 1e-2).unwrap();
    let r = invariance_test(&ctx, 0.2, &p, 200, 8).unwrap();
    out.extend(r.rows.iter().flat_map(|row| [row.mean_t0, row.mean_t, row.z_score]));
    out.push(r.max_relative_drift);
    let traj = evolve_with(
        &sample_mu_indexed(&MuParams::new(8, 1.0, 9).unwrap(), 0),
        0.1,
        0.01,
        &ScaledForcing::new(Nonlinearity::Sine, 0.125, 1.0).unwrap(),
        0,
    )
    .unwrap();
    out.extend(traj.last().u.modes().flat_map(|(_, c): (_, Complex64)| [c.re, c.im]));
    out.iter().map(|x| x.to_bits()).collect()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn criterion_10_determinism() {
    let t0 = Instant::now();
    let a = in_pool(1, fingerprint);
    let b = in_pool(3, fingerprint);
    let c = fingerprint();
    let pass = !a.is_empty() && a == b && b == c;
    report(
        10,
        pass,
        t0,
        &format!("{} numbers identical across reruns with 1, 3 and default worker counts", a.len()),
    );
    assert!(pass);
}
