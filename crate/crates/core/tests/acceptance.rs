//! Acceptance criteria 1 to 11, one pass/fail line each.
//!
//! Runs as a plain binary so the lines appear in every `cargo test` log. The
//! process exits with status 1 when any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use sectlab::diameter::{
    crosspolytope_section_diameter_exact, direction_sampling_diameter, ellipsoid_section_diameter,
};
use sectlab::ensembles::{Ensemble, EnsembleKind};
use sectlab::harness::{run_sweep, sweep_csv_bytes, verify_theorem, SweepConfig, TrialRecord};
use sectlab::kernels::{kernel_basis, DEFAULT_REL_TOL};
use sectlab::proofkit::{
    binomial_tail_bound, corollary_capacity, corollary_sim, lemma_smallball_sim, separated_net,
};
use sectlab::widths::{localized_mean_width, mc_mean_width, row_sum_width};
use sectlab::{ConvexBody, RngStream};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn gaussian_matrix(k: usize, n: usize, stream: &RngStream) -> DMatrix<f64> {
    Ensemble::new(EnsembleKind::Gaussian, n).unwrap().sample_matrix(k, stream).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let l2 = mc_mean_width(&ConvexBody::l2(16), 200_000, &RngStream::new(101, 0)).unwrap();
    let t_l2 = start.elapsed();
    let exact_l2 = 2f64.sqrt() * (ln_gamma(8.5) - ln_gamma(8.0)).exp();
    let start = Instant::now();
    let linf = mc_mean_width(&ConvexBody::linf(10), 200_000, &RngStream::new(101, 1)).unwrap();
    let t_linf = start.elapsed();
    let exact_linf = 10.0 * (2.0 / PI).sqrt();
    let e2 = (l2.mean / exact_l2 - 1.0).abs();
    let einf = (linf.mean / exact_linf - 1.0).abs();
    let fast = t_l2 < Duration::from_secs(10) && t_linf < Duration::from_secs(10);
    outcome(
        e2 < 0.01 && einf < 0.01 && fast,
        format!(
            "l2: {:.5} vs {:.5} (rel {:.2e}, {:.2} s); linf: {:.5} vs {:.5} (rel {:.2e}, {:.2} s)",
            l2.mean,
            exact_l2,
            e2,
            secs(t_l2),
            linf.mean,
            exact_linf,
            einf,
            secs(t_linf)
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let body = ConvexBody::l1(10);
    let ratios: Vec<f64> = (0..100u64)
        .map(|i| {
            let g = gaussian_matrix(3, 10, &RngStream::new(202, i));
            let exact = crosspolytope_section_diameter_exact(&g, DEFAULT_REL_TOL).unwrap().value;
            let kb = kernel_basis(&g, DEFAULT_REL_TOL).unwrap();
            let sampled = direction_sampling_diameter(&body, &kb, 100_000, 500, &RngStream::new(203, i))
                .unwrap()
                .value;
            sampled / exact
        })
        .collect();
    let elapsed = start.elapsed();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    outcome(
        lo >= 0.95 && hi <= 1.0 + 1e-12 && elapsed < Duration::from_secs(120),
        format!("sampled/exact in [{lo:.4}, {hi:.6}] over 100 instances, {:.1} s", secs(elapsed)),
    )
}

fn random_shape(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5).qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.5f64..3.0).powi(2)));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn criterion_3() -> Outcome {
    let (n, m) = (12, 5);
    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..20u64 {
        let mut rng = RngStream::new(303, i).rng();
        let shape = random_shape(n, &mut rng);
        let body = ConvexBody::ellipsoid(shape.clone()).unwrap();
        let kb = kernel_basis(&gaussian_matrix(n - m, n, &RngStream::new(304, i)), DEFAULT_REL_TOL).unwrap();
        assert_eq!(kb.dim(), m);
        let exact = ellipsoid_section_diameter(&shape, &kb).unwrap().value;
        let oracle = (0..16u64)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = RngStream::new(305, i * 16 + chunk).rng();
                let mut best = 0.0f64;
                for _ in 0..62_500 {
                    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                    let x = kb.lift(&z);
                    let g = body.gauge(&x).unwrap();
                    best = best.max(2.0 * x.norm() / g);
                }
                best
            })
            .reduce(|| 0.0, f64::max);
        let gap = exact / oracle - 1.0;
        worst = worst.max(gap);
        ok &= exact >= oracle * (1.0 - 1e-12) && gap <= 0.01;
    }
    outcome(ok, format!("20 instances, exact/oracle - 1 at most {worst:.2e} (10^6 directions each)"))
}

fn cell_medians(records: &[TrialRecord]) -> Vec<(usize, usize, f64)> {
    let mut cells: Vec<(usize, usize)> = records.iter().map(|r| (r.n, r.k)).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
        .into_iter()
        .map(|(n, k)| {
            let mut d: Vec<f64> =
                records.iter().filter(|r| r.n == n && r.k == k).filter_map(|r| r.diam_value).collect();
            d.sort_by(f64::total_cmp);
            let len = d.len();
            let med = if len == 0 {
                f64::NAN
            } else if len % 2 == 1 {
                d[len / 2]
            } else {
                0.5 * (d[len / 2 - 1] + d[len / 2])
            };
            (n, k, med)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig {
        body_spec: "l1".into(),
        ensemble_spec: "gaussian".into(),
        n_list: vec![256],
        k_list: vec![8, 16, 32, 64],
        trials: 200,
        master_seed: 1,
        ..SweepConfig::default()
    };
    let records = run_sweep(&cfg).unwrap();
    let report = verify_theorem(&records, 0.75).unwrap();
    let elapsed = start.elapsed();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let scaled: Vec<f64> = report.cells.iter().map(|c| c.median_diam_sqrtk).collect();
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let fractions: Vec<String> = report.cells.iter().map(|c| format!("{:.3}", c.fraction)).collect();
    outcome(
        report.passed && errors == 0 && spread < 1.3 && elapsed < Duration::from_secs(900),
        format!(
            "C = {:.4}, fractions [{}], median diam*sqrt(k) spread {spread:.3}, {errors} errors, {:.0} s",
            records[0].constant,
            fractions.join(", "),
            secs(elapsed)
        ),
    )
}

/// Least squares for `y ≈ Xβ` through the normal equations.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> DVector<f64> {
    let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let y = DVector::from_column_slice(y);
    (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * y))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig {
        body_spec: "l1".into(),
        ensemble_spec: "uniform".into(),
        n_list: vec![64, 256, 1024],
        k_list: vec![16, 64],
        trials: 100,
        master_seed: 2,
        ..SweepConfig::default()
    };
    let records = run_sweep(&cfg).unwrap();
    let report = verify_theorem(&records, 0.75).unwrap();
    let elapsed = start.elapsed();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    // cells with k ≥ n have a trivial kernel and zero diameter; they carry no scaling information
    let cells: Vec<(usize, usize, f64)> = cell_medians(&records).into_iter().filter(|c| c.2 > 0.0).collect();
    let rows: Vec<Vec<f64>> = cells
        .iter()
        .map(|&(n, k, _)| vec![1.0, (k as f64).ln(), (n as f64).ln().sqrt().ln()])
        .collect();
    let y: Vec<f64> = cells.iter().map(|c| c.2.ln()).collect();
    let beta = least_squares(&rows, &y);
    let (ek, en) = (beta[1], beta[2]);
    let fractions: Vec<String> =
        report.cells.iter().map(|c| format!("({},{}) {:.2}", c.n, c.k, c.fraction)).collect();
    outcome(
        report.passed
            && errors == 0
            && (-0.65..=-0.35).contains(&ek)
            && en > 0.0
            && elapsed < Duration::from_secs(1200),
        format!(
            "exponent vs k {ek:.3}, vs sqrt(log n) {en:.3} over {} nonzero cells; C = {:.4}; fractions [{}]; {:.0} s",
            cells.len(),
            records[0].constant,
            fractions.join(", "),
            secs(elapsed)
        ),
    )
}

fn criterion_6() -> Outcome {
    let (n, k, samples) = (64, 32, 20_000);
    let ens = Ensemble::new(EnsembleKind::Gaussian, n).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, body) in [
        ("l1", ConvexBody::l1(n)),
        ("l2", ConvexBody::l2(n)),
        ("linf", ConvexBody::linf(n)),
    ] {
        let gw = mc_mean_width(&body, samples, &RngStream::new(606, 0)).unwrap();
        let rw = row_sum_width(&body, &ens, k, samples, &RngStream::new(606, 1)).unwrap();
        let z = (gw.mean - rw.mean).abs() / (gw.stderr.powi(2) + rw.stderr.powi(2)).sqrt();
        ok &= z <= 3.0;
        parts.push(format!("{name} {:.4}/{:.4} z={z:.2}", gw.mean, rw.mean));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let epsilons = [0.005, 0.01, 0.05, 0.08];
    let ks = [24usize, 48, 100, 200, 300, 400, 500, 600];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut analytic_ok = true;
    let mut sim_ok = true;
    let mut worst_margin = f64::INFINITY;
    for &eps in &epsilons {
        for k in 24..=600 {
            analytic_ok &= binomial_tail_bound(eps, k).unwrap().holds();
        }
        let laws = [
            (EnsembleKind::Gaussian, normal.inverse_cdf((1.0 + eps) / 2.0)),
            (EnsembleKind::UniformCube, eps * 3f64.sqrt()),
        ];
        for &k in &ks {
            for (i, (kind, lambda)) in laws.iter().enumerate() {
                let stream = RngStream::new(707, (k * 10 + i) as u64).substream((eps * 1e4) as u64);
                let out = lemma_smallball_sim(kind, *lambda, eps, k, 10_000, &stream).unwrap();
                sim_ok &= out.consistent(3.0);
                worst_margin = worst_margin.min(out.bound + 3.0 * out.wilson_width - out.failure_rate);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        analytic_ok && sim_ok && elapsed < Duration::from_secs(300),
        format!(
            "analytic <= 2^(-6 eps k) on all of k=24..600: {analytic_ok}; simulated ({} points, gaussian and uniform, 10^4 trials) min slack {worst_margin:.4}; {:.1} s",
            epsilons.len() * ks.len() * 2,
            secs(elapsed)
        ),
    )
}

fn criterion_8() -> Outcome {
    let g = EnsembleKind::Gaussian;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (eps, k, trials) = (0.05, 40, 10_000);
    let lambda = normal.inverse_cdf((1.0 + eps) / 2.0);
    let stream = RngStream::new(808, 0);
    let lemma = lemma_smallball_sim(&g, lambda, eps, k, trials, &stream).unwrap();
    let one = corollary_sim(1, &g, lambda, eps, k, trials, &stream).unwrap();
    let reduces = one.failures == lemma.failures;
    let cap = corollary_capacity(eps, k) as usize;
    let counts: Vec<usize> = std::iter::successors(Some(1usize), |c| Some(c * 2)).take_while(|&c| c <= cap).collect();
    let sims: Vec<_> = counts
        .iter()
        .map(|&c| corollary_sim(c, &g, lambda, eps, k, trials, &RngStream::new(808, c as u64)).unwrap())
        .collect();
    let lemma_se = (lemma.failure_rate * (1.0 - lemma.failure_rate) / trials as f64).sqrt();
    let monotone = sims.iter().all(|s| {
        let se = (s.failure_rate * (1.0 - s.failure_rate) / trials as f64).sqrt();
        s.failure_rate >= lemma.failure_rate - 3.0 * (se * se + lemma_se * lemma_se).sqrt()
    }) && sims.windows(2).all(|w| {
        let se = |r: f64| (r * (1.0 - r) / trials as f64).sqrt();
        w[1].failure_rate >= w[0].failure_rate - 3.0 * (se(w[0].failure_rate).powi(2) + se(w[1].failure_rate).powi(2)).sqrt()
    });
    let four = &sims[2];
    let four_se = (four.failure_rate * (1.0 - four.failure_rate) / trials as f64).sqrt();
    let union = four.failure_rate <= 4.0 * lemma.failure_rate + 3.0 * (four_se.powi(2) + 16.0 * lemma_se.powi(2)).sqrt();
    let full = sims.last().unwrap();
    let at_cap = counts.last() == Some(&cap) && full.consistent(3.0);
    let rates: Vec<String> = counts.iter().zip(&sims).map(|(c, s)| format!("N={c}: {:.4}", s.failure_rate)).collect();
    outcome(
        reduces && monotone && union && at_cap,
        format!(
            "N=1 equals lemma: {reduces}; monotone: {monotone}; union bound at N=4: {union}; N=2^(3 eps k)={cap} within bound {:.4}: {at_cap}; [{}]",
            full.bound,
            rates.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let configs: Vec<(ConvexBody, f64, f64)> = vec![
        (ConvexBody::l2(5), 1.0, 2.5),
        (ConvexBody::l2(5), 1.0, 1.9),
        (ConvexBody::l1(32), 0.5, 0.3),
        (ConvexBody::linf(8), 2.0, 1.0),
        (ConvexBody::ellipsoid_axes(&[1.0, 2.0, 0.5, 3.0]).unwrap(), 1.5, 0.8),
    ];
    for (i, (body, r, rho)) in configs.iter().enumerate() {
        let net = separated_net(body, *r, *rho, 500, &RngStream::new(909, i as u64)).unwrap();
        let valid = net.verify(body, 1e-9).unwrap();
        let single_ok = *rho <= 2.0 * r || net.cardinality == 1;
        ok &= valid && single_ok;
        parts.push(format!("n={} r={r} rho={rho}: {} points", body.dim(), net.cardinality));
    }
    // Sudakov-sized configuration
    let (n, eps, k, r) = (32, 1.0 / 600.0, 3200usize, 0.5);
    let body = ConvexBody::l1(n);
    let lw = localized_mean_width(&body, r, 20_000, &RngStream::new(909, 100)).unwrap();
    let rho = lw.mean / (eps * k as f64).sqrt();
    let net = separated_net(&body, r, rho, 2000, &RngStream::new(909, 101)).unwrap();
    let target = (3.0 * eps * k as f64).exp2();
    let sudakov = net.verify(&body, 1e-9).unwrap() && (net.cardinality as f64) <= target;
    ok &= sudakov;
    parts.push(format!("Sudakov l1 n=32 rho={rho:.4}: {} points <= {target}", net.cardinality));
    outcome(ok, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let kinds = [
        EnsembleKind::Gaussian,
        EnsembleKind::UniformCube,
        EnsembleKind::SymmetricExponential,
        EnsembleKind::StudentT { nu: 5.0 },
    ];
    let results: Vec<(f64, f64, bool)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(1010, i).rng();
            let n = rng.random_range(2..=64usize);
            let k = rng.random_range(1..=n + 8);
            let kind = kinds[(i % 4) as usize];
            let g: DMatrix<f64> =
                Ensemble::new(kind, n).unwrap().sample_matrix(k, &RngStream::new(1011, i)).unwrap();
            let kb = kernel_basis(&g, DEFAULT_REL_TOL).unwrap();
            let smax = g.clone().svd(false, false).singular_values.max();
            let rank = g.clone().svd(false, false).rank(DEFAULT_REL_TOL * smax);
            let annihilated = if kb.dim() == 0 { 0.0 } else { (&g * &kb.basis).norm() / smax };
            let ortho = if kb.dim() == 0 {
                0.0
            } else {
                (kb.basis.transpose() * &kb.basis - DMatrix::identity(kb.dim(), kb.dim())).norm()
            };
            (annihilated, ortho, kb.dim() == n - rank)
        })
        .collect();
    let worst_gamma = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_ortho = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let dims_ok = results.iter().all(|r| r.2);
    outcome(
        worst_gamma <= 1e-10 && worst_ortho <= 1e-12 && dims_ok,
        format!(
            "1000 matrices: max |Gamma B|/|Gamma| {worst_gamma:.2e}, max |B^T B - I| {worst_ortho:.2e} (Frobenius), m = n - rank on all: {dims_ok}"
        ),
    )
}

fn criterion_11() -> Outcome {
    let configs = [
        SweepConfig {
            n_list: vec![12, 48],
            k_list: vec![3, 6],
            trials: 12,
            width_samples: 3000,
            master_seed: 11,
            ..SweepConfig::default()
        },
        SweepConfig {
            body_spec: "linf".into(),
            ensemble_spec: "exponential".into(),
            n_list: vec![16],
            k_list: vec![4, 8],
            trials: 8,
            width_samples: 2000,
            dirs: 2000,
            refine: 100,
            master_seed: 12,
            ..SweepConfig::default()
        },
    ];
    let pool = |threads: usize| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let mut ok = true;
    let mut sizes = Vec::new();
    for cfg in &configs {
        let run = |threads: usize| pool(threads).install(|| sweep_csv_bytes(&run_sweep(cfg).unwrap()).unwrap());
        let a = run(1);
        let b = run(1);
        let c = run(8);
        ok &= a == b && a == c;
        sizes.push(a.len());
    }
    outcome(ok, format!("two configurations, repeated and 1 vs 8 workers, CSV sizes {sizes:?} bytes, identical: {ok}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("width oracles", criterion_1),
        ("exact diameter oracle agreement", criterion_2),
        ("ellipsoid exactness", criterion_3),
        ("probability 3/4 reproduction, gaussian l1", criterion_4),
        ("sqrt(log n / k) scaling, uniform l1", criterion_5),
        ("gaussian row-sum width equals mean width", criterion_6),
        ("small-ball lemma suite", criterion_7),
        ("union-bound corollary", criterion_8),
        ("separated nets", criterion_9),
        ("kernel invariants", criterion_10),
        ("determinism", criterion_11),
    ];
    let only: Option<usize> = std::env::var("SECTLAB_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {id:>2} {}: {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
