//! Acceptance gate: one PASS/FAIL line per primary criterion. Exits
//! non-zero when any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use riskstop::coverage::coverage_parallel;
use riskstop_core::binomial::binom_tail_pvalue;
use riskstop_core::calibrate::select_fixed_sequence;
use riskstop_core::metrics::auroc;
use riskstop_core::monitor::{Budget, MonitorState};
use riskstop_core::pca::fit_pca;
use riskstop_core::probe::{fit_logistic, LogisticObjective, TrainConfig};
use riskstop_core::risk::{score_set, stop_index_at};
use riskstop_core::scorer::ScoreMode;
use riskstop_core::segment::{join_steps, segment_thoughts};
use riskstop_core::sim::coverage::{fit_pipeline, run_repeat, CoverageConfig};
use riskstop_core::sim::{generate_set, SimConfig};
use riskstop_core::smooth::SmoothingSpec;
use riskstop_core::trace::SplitTag;

const COVERAGE_BUDGET: Duration = Duration::from_secs(600);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn coverage() -> Verdict {
    let cfg = CoverageConfig::default();
    let start = Instant::now();
    let (report, _) = match coverage_parallel(&cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("eps={} viol={:.3}<=bound {:.3}", r.epsilon, r.violation_fraction, r.bound))
        .collect();
    let pass = report.rows.len() == 4 && report.rows.iter().all(|r| r.within_bound()) && elapsed < COVERAGE_BUDGET;
    verdict(pass, format!("R={} [{}] in {:.0?}", cfg.repeats, rows.join("; "), elapsed))
}

fn binomial() -> Verdict {
    let mut worst = 0.0f64;
    for &rate in &[0.05, 0.1, 0.5] {
        for n in 0..=200usize {
            for k in 0..=n {
                let ours = binom_tail_pvalue(n as u64, rate, k as u64).unwrap();
                worst = worst.max((ours - oracles::binomial_cdf_direct(n, rate, k)).abs());
            }
        }
    }
    let half = binom_tail_pvalue(10, 0.5, 5).unwrap();
    verdict(
        worst <= 1e-12 && half == 0.623046875,
        format!("max |diff| {worst:.2e}, P(Bin(10,.5)<=5) = {half}"),
    )
}

fn fixed_sequence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for case in 0..1000 {
        let len = rng.random_range(1..=8);
        let epsilon = [0.05, 0.1, 0.2, 0.5][case % 4];
        let p: Vec<f64> = (0..len)
            .map(|_| match rng.random_range(0..4) {
                0 => epsilon,
                1 => rng.random_range(0.0..epsilon),
                _ => rng.random_range(0.0..1.0),
            })
            .collect();
        if select_fixed_sequence(&p, epsilon) != oracles::fixed_sequence_oracle(&p, epsilon) {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("{mismatches}/1000 mismatches"))
}

fn probe_training() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_grad = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(5..40);
        let dim = rng.random_range(1..10);
        let features: Vec<f64> = (0..n * dim).map(|_| normal(&mut rng)).collect();
        let targets: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let obj = LogisticObjective {
            features: &features,
            dim,
            targets: &targets,
            sample_weights: &weights,
            l2: rng.random_range(0.0..0.5),
        };
        let x: Vec<f64> = (0..=dim).map(|_| normal(&mut rng)).collect();
        let (_, g, gb) = obj.loss_and_gradient(&x[..dim], x[dim]);
        let fd = oracles::finite_difference(|p| obj.loss(&p[..dim], p[dim]), &x, 1e-5);
        for (a, f) in g.iter().chain([&gb]).zip(&fd) {
            worst_grad = worst_grad.max((a - f).abs() / a.abs().max(f.abs()).max(1e-3));
        }
    }

    let dim = 3;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for i in 0..100 {
        let y = i % 2 == 1;
        features.push(if y { 1.0 } else { -1.0 } * rng.random_range(0.1..3.0));
        features.push(normal(&mut rng));
        features.push(normal(&mut rng));
        targets.push(y);
    }
    let fit = fit_logistic(&features, dim, &targets, &TrainConfig::default()).unwrap();
    let scores: Vec<f64> = features
        .chunks(dim)
        .map(|r| r.iter().zip(&fit.weights).map(|(a, b)| a * b).sum::<f64>() + fit.bias)
        .collect();
    let toy = auroc(&scores, &targets).unwrap();

    let mut auroc_mismatch = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..200);
        let levels = rng.random_range(2..30);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let mut l: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        l[0] = true;
        l[1] = false;
        if auroc(&s, &l).unwrap() != oracles::pairwise_auroc(&s, &l) {
            auroc_mismatch += 1;
        }
    }
    verdict(
        worst_grad < 1e-5 && toy == 1.0 && auroc_mismatch == 0,
        format!("grad rel err {worst_grad:.2e}, toy AUROC {toy}, AUROC mismatches {auroc_mismatch}/50"),
    )
}

fn pca() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut eig, mut var, mut ortho) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let rows: Vec<Vec<f32>> = (0..50)
            .map(|_| (0..20).map(|_| normal(&mut rng) as f32).collect())
            .collect();
        let wide: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
        let model = fit_pca(&rows, 20).unwrap();
        let cov = oracles::covariance(&wide);
        let (values, _) = oracles::power_iteration_eigen(&cov, 20);
        for (a, b) in model.explained_variance().iter().zip(&values) {
            eig = eig.max((a - b).abs() / b.abs());
        }
        let trace: f64 = (0..20).map(|j| cov[j][j]).sum();
        let total: f64 = model.explained_variance().iter().sum();
        var = var.max((total - trace).abs() / trace);
        for a in 0..20 {
            for b in 0..20 {
                let dot: f64 = model.component(a).iter().zip(model.component(b)).map(|(x, y)| x * y).sum();
                ortho = ortho.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    verdict(
        eig < 1e-6 && var < 1e-6 && ortho < 1e-6,
        format!("eigenvalue rel {eig:.2e}, variance rel {var:.2e}, orthonormality {ortho:.2e}"),
    )
}

fn monitor() -> Verdict {
    let base = SimConfig::default();
    let train = generate_set(&SimConfig { seed: 11, n_traces: 200, ..base.clone() }, SplitTag::Train).unwrap().0;
    let test = generate_set(&SimConfig { seed: 12, n_traces: 100, ..base }, SplitTag::Test).unwrap().0;
    let (pca, scorer) = fit_pipeline(
        &train,
        ScoreMode::Consistent,
        256,
        &TrainConfig::default(),
        SmoothingSpec::default(),
    )
    .unwrap();
    let scores = score_set(&test, &scorer, &pca).unwrap();
    let mut mismatches = 0;
    let mut checked = 0;
    for lambda in [Some(0.5), Some(0.7), Some(0.9), None] {
        for (trace, s) in test.traces().iter().zip(&scores) {
            let mut state = MonitorState::new(&scorer, &pca, lambda).unwrap();
            let source = trace.steps.iter().map(|st| (st.embedding.as_slice(), u64::from(st.token_count)));
            let (stop, _) = state.run_stream(source, &Budget::steps(trace.len())).unwrap();
            checked += 1;
            if stop != stop_index_at(s, lambda) {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches}/{checked} stop-index mismatches over 100 traces"))
}

fn efficiency() -> Verdict {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/efficiency.json");
    let cfg: CoverageConfig = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let outcome = run_repeat(&cfg, 0).unwrap();
    let o = &outcome.outcomes[0];
    let savings = 1.0 - o.mean_stop_step / o.mean_full_steps;
    verdict(
        o.epsilon == 0.1 && cfg.delta == 0.1 && savings >= 0.2 && o.test_risk <= cfg.delta,
        format!(
            "lambda {:?}, mean steps {:.2} vs {:.2} ({:.1}% saved), inconsistency {:.3} <= {}",
            o.selected_lambda,
            o.mean_stop_step,
            o.mean_full_steps,
            100.0 * savings,
            o.test_risk,
            cfg.delta
        ),
    )
}

fn segmentation() -> Verdict {
    let worked = [
        (
            "A = 1.\n\nWait, check A.\n\nBut B fails.\n\nDone.",
            vec!["A = 1.\n\nWait, check A.", "But B fails.", "Done."],
        ),
        ("Only one section, but short.", vec!["Only one section, but short."]),
        ("X.\n\nY.\n\nZ.", vec!["X.\n\nY.\n\nZ."]),
    ];
    let examples_ok = worked
        .iter()
        .all(|(text, want)| segment_thoughts(text).unwrap() == *want);

    let pieces = [
        "wait", "Wait", "BUT", "but", "\n\n", "\n", "\n\n\n", " ", "x", "waiting", "butter", ",", "é", "rebut", "Wait!",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut broken = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let text: String = (0..n).map(|_| pieces[rng.random_range(0..pieces.len())]).collect();
        let steps = segment_thoughts(&text).unwrap();
        if join_steps(&steps) != text || steps.is_empty() {
            broken += 1;
        }
    }
    verdict(
        examples_ok && broken == 0,
        format!("worked examples {}, {broken}/1000 fuzz cases broke reconstruction", if examples_ok { "exact" } else { "WRONG" }),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        ("coverage", coverage),
        ("binomial-tail", binomial),
        ("fixed-sequence", fixed_sequence),
        ("probe-training", probe_training),
        ("pca", pca),
        ("monitor-equivalence", monitor),
        ("end-to-end-efficiency", efficiency),
        ("segmentation", segmentation),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
