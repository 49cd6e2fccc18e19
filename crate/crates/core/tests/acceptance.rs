//! Acceptance criteria, one line of output per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary is always printed:
//! `cargo test -p bayeserr --test acceptance`.

use std::process::Command;
use std::time::{Duration, Instant};

use bayeserr::bounds::{computable_bias_bound, ishida_bias_bound, slow_rate_term};
use bayeserr::calibration::{
    minmax_oracle, pav_fit_unweighted, CalibrationMethod, PairedEstimator,
};
use bayeserr::cli::commands::{
    feebee_table, generate, order_break_sweep, simulate_bias, BiasSimulation,
};
use bayeserr::evaluation::{
    bootstrap_paired, fit_loglog_slope, order_break_probability, BootstrapOptions, CiMethod,
};
use bayeserr::synthdata::{CorruptionSpec, PosteriorModel};
use bayeserr::{estimate_bayes_error, Seed, SoftLabelSet};
use rand::Rng;

type Check = Result<String, String>;

const ISOTONIC: PairedEstimator = PairedEstimator::Calibrated(CalibrationMethod::Isotonic);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn benchmark() -> PosteriorModel {
    PosteriorModel::preset("benchmark").unwrap()
}

/// Isotonic and uncorrected estimates minus the clean estimate.
fn corruption_errors(n: usize, m: Option<u64>, spec: CorruptionSpec, seed: u64) -> (f64, f64, f64) {
    let g = generate(&benchmark(), n, m, Some(&spec), Seed(seed)).unwrap();
    let paired = g.paired.unwrap();
    let clean = estimate_bayes_error(&g.soft);
    let iso = ISOTONIC.estimate(&paired).unwrap();
    let raw = PairedEstimator::Corrupted.estimate(&paired).unwrap();
    (clean, iso - clean, raw - clean)
}

fn c1_reference_bounds() -> Check {
    let b = computable_bias_bound(0.0005, 50).unwrap();
    let ishida = ishida_bias_bound(10_000, 50).unwrap();
    ensure(
        b.value <= 0.00276 && (ishida - 0.557).abs() <= 0.001,
        format!(
            "computable B = {:.6} (<= 0.00276), Ishida = {ishida:.5} (0.557 +- 0.001)",
            b.value
        ),
    )
}

fn c2_bound_dominance() -> Check {
    let mut rng = Seed(2).rng();
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let n: u64 = rng.random_range(1..=10_000_000);
        let m: u64 = rng.random_range(1..=100_000);
        let gap = ishida_bias_bound(n, m).unwrap() - slow_rate_term(m);
        worst = worst.min(gap);
    }
    ensure(
        worst >= 0.0,
        format!("min Ishida - sqrt(pi/2m) over 10^4 pairs = {worst:.3e}"),
    )
}

struct BiasRuns {
    a: BiasSimulation,
    b: BiasSimulation,
    c: BiasSimulation,
}

fn run_bias_simulations() -> BiasRuns {
    let m_list = [10, 25, 50, 100, 250, 500, 1000];
    let run = |name: &str, seed: u64| {
        simulate_bias(
            &PosteriorModel::preset(name).unwrap(),
            &m_list,
            2000,
            200,
            Seed(seed),
        )
        .unwrap()
    };
    BiasRuns {
        a: run("a", 31),
        b: run("b", 32),
        c: run("c", 33),
    }
}

fn c3_bias_slopes(runs: &BiasRuns) -> Check {
    let sa = runs.a.slope.as_ref().map(|s| s.slope);
    let sb = runs.b.slope.as_ref().map(|s| s.slope);
    let a_ok = sa.is_some_and(|s| (-1.05..=-0.75).contains(&s));
    let b_ok = sb.is_some_and(|s| (-0.60..=-0.40).contains(&s));
    let mut c_ok = true;
    let mut c_margin = f64::INFINITY;
    for r in &runs.c.rows {
        let limit = 0.1125 / r.m as f64 + 3.0 * r.stderr;
        c_ok &= r.bias <= limit;
        c_margin = c_margin.min(limit - r.bias);
    }
    ensure(
        a_ok && b_ok && c_ok,
        format!(
            "slope (a) = {} in [-1.05, -0.75], slope (b) = {} in [-0.60, -0.40], \
             (c) min margin to 0.1125/m + 3se = {c_margin:.3e}",
            sa.map_or("n/a".into(), |s| format!("{s:.4}")),
            sb.map_or("n/a".into(), |s| format!("{s:.4}")),
        ),
    )
}

fn c4_bias_below_bound(runs: &BiasRuns) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sim) in [("a", &runs.a), ("b", &runs.b), ("c", &runs.c)] {
        let mut margin = f64::INFINITY;
        for r in &sim.rows {
            let gap = r.thm21_bound + 3.0 * r.stderr - r.bias;
            ok &= gap >= 0.0;
            margin = margin.min(gap);
        }
        parts.push(format!("({name}) min margin {margin:.3e}"));
    }
    ensure(ok, parts.join(", "))
}

fn c5_isotonic_consistency() -> Check {
    let spec = CorruptionSpec::Beta { a: 2.0, b: 0.7 };
    let g = generate(&benchmark(), 10_000, None, Some(&spec), Seed(0)).unwrap();
    let paired = g.paired.unwrap();
    let clean = estimate_bayes_error(&g.soft);
    let iso = ISOTONIC.estimate(&paired).unwrap();
    let raw = PairedEstimator::Corrupted.estimate(&paired).unwrap();
    let opts = BootstrapOptions {
        resamples: 1000,
        level: 0.95,
        method: CiMethod::Bca,
        seed: Seed(0),
    };
    let ci = bootstrap_paired(&paired, ISOTONIC, &opts).map_err(|e| e.to_string())?;
    ensure(
        (iso - clean).abs() <= 0.01 && raw - clean >= 0.05,
        format!(
            "clean {clean:.4}, isotonic {iso:.4} (|diff| {:.4} <= 0.01, BCa 95% [{:.4}, {:.4}]), \
             uncorrected {raw:.4} (overestimates by {:.4} >= 0.05)",
            (iso - clean).abs(),
            ci.lower,
            ci.upper,
            raw - clean
        ),
    )
}

fn c6_rate() -> Check {
    let spec = CorruptionSpec::Beta { a: 2.0, b: 0.7 };
    let sizes = [1000u64, 4000, 16000];
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            median(
                (0..50)
                    .map(|s| corruption_errors(n as usize, None, spec, 100 + s).1.abs())
                    .collect(),
            )
        })
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let slope = fit_loglog_slope(&sizes, &medians)
        .map_err(|e| e.to_string())?
        .slope;
    ensure(
        monotone && slope <= -0.25,
        format!("median |error| at n = 1000/4000/16000: {medians:.5?}, log-log slope {slope:.3} <= -0.25"),
    )
}

fn c7_noisy_corruption() -> Check {
    let spec = CorruptionSpec::Beta { a: 2.0, b: 0.5 };
    let ms = [3u64, 5, 10, 25, 50, 100];
    let medians: Vec<f64> = ms
        .iter()
        .map(|&m| {
            median(
                (0..20)
                    .map(|s| corruption_errors(10_000, Some(m), spec, 200 + s).1.abs())
                    .collect(),
            )
        })
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    ensure(
        monotone,
        format!("median |isotonic - clean| over 20 seeds at m = {ms:?}: {medians:.5?}"),
    )
}

fn c8_pav_oracle() -> Check {
    let mut rng = Seed(8).rng();
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(1..=40);
        let y: Vec<f64> = if case % 2 == 0 {
            (0..n).map(|_| rng.random::<f64>()).collect()
        } else {
            (0..n).map(|_| f64::from(rng.random::<bool>())).collect()
        };
        let fast = pav_fit_unweighted(&y).unwrap();
        let slow = minmax_oracle(&y).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(
        worst <= 1e-12,
        format!("max |PAV - min-max| over 200 sequences = {worst:.3e}"),
    )
}

fn c9_perturbation_inequality() -> Check {
    let mut rng = Seed(9).rng();
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ra = estimate_bayes_error(&SoftLabelSet::new(a.clone()).unwrap());
        let rb = estimate_bayes_error(&SoftLabelSet::new(b.clone()).unwrap());
        let mean_abs = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        let rmse = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt();
        // Slack of a few ulps for the summations.
        let tol = 8.0 * f64::EPSILON;
        if (ra - rb).abs() > mean_abs + tol || mean_abs > rmse + tol {
            violations += 1;
        }
    }
    ensure(
        violations == 0,
        format!("{violations} violations in 1000 random pairs"),
    )
}

fn c10_feebee_direction() -> Check {
    let spec = CorruptionSpec::Beta { a: 2.0, b: 0.7 };
    let g = generate(&benchmark(), 10_000, None, Some(&spec), Seed(0)).unwrap();
    let paired = g.paired.unwrap();
    let e = estimate_bayes_error(&g.soft) + 0.01;
    let table = feebee_table(
        &paired,
        &[PairedEstimator::Corrupted, ISOTONIC],
        e,
        100,
        Seed(0),
    )
    .map_err(|e| e.to_string())?;
    let score = |name: &str| table.iter().find(|r| r.method == name).unwrap().score;
    let (iso, raw) = (score("isotonic"), score("corrupted"));
    ensure(
        iso < raw && iso >= 0.0 && raw >= 0.0,
        format!("FeeBee score isotonic {iso:.5} < corrupted {raw:.5} (E = {e:.4}, N = 100)"),
    )
}

fn c11_order_breakage() -> Check {
    let sigmas = [0.0, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.5, 1.0];
    let sweep = order_break_sweep(
        &benchmark(),
        &sigmas,
        2.0,
        0.7,
        None,
        10_000,
        &[ISOTONIC],
        Seed(11),
    )
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut checked = 0;
    let mut worst = 0.0f64;
    for row in sweep.rows.iter().filter(|r| r.tau >= 0.999) {
        let d = (row.estimates["isotonic"] - sweep.clean_estimate).abs();
        ok &= d <= 0.01;
        worst = worst.max(d);
        checked += 1;
    }
    let p = order_break_probability(0.95).map_err(|e| e.to_string())?;
    // 1 - 0.95 and the halving are exact in binary, so the only deviation from
    // 0.025 is the representation error of the input 0.95.
    let p_ok = (p - 0.025).abs() <= f64::EPSILON;
    ensure(
        ok && checked > 0 && p_ok,
        format!(
            "{checked} sigma values with tau >= 0.999, max |isotonic - clean| = {worst:.5}; \
             order_break_probability(0.95) = {p}"
        ),
    )
}

fn c12_determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_bayeserr");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        Ok(out.stdout)
    };
    let gen_dir = d.join("gen");
    let gen_dir = gen_dir.to_str().unwrap();
    let paired = format!("{gen_dir}/paired.csv");
    let soft = format!("{gen_dir}/soft.csv");
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "gen",
            "--n",
            "3000",
            "--m",
            "20",
            "--corruption",
            "beta",
            "--seed",
            "5",
            "--out",
            gen_dir,
        ],
        vec![
            "estimate",
            "--input",
            &paired,
            "--method",
            "corrupted,isotonic",
            "--ci",
            "--resamples",
            "200",
            "--seed",
            "3",
        ],
        vec![
            "estimate",
            "--input",
            &paired,
            "--method",
            "hist-10,beta,platt",
            "--ci",
            "percentile",
            "--resamples",
            "200",
        ],
        vec![
            "bias-bound",
            "--n",
            "10000",
            "--m",
            "50",
            "--E",
            "0.0005",
            "--c",
            "0.4",
            "--delta",
            "0.05",
            "--input",
            &soft,
        ],
        vec![
            "simulate-bias",
            "--dist",
            "c",
            "--m-list",
            "10,50",
            "--n",
            "500",
            "--repeats",
            "20",
            "--seed",
            "4",
        ],
        vec![
            "feebee",
            "--input",
            &paired,
            "--method",
            "corrupted,isotonic,hist-10",
            "--E",
            "0.1",
            "--N",
            "10",
            "--seed",
            "6",
        ],
        vec![
            "order-break",
            "--sigma-list",
            "0,0.5,1",
            "--n",
            "2000",
            "--method",
            "isotonic,beta",
            "--seed",
            "7",
        ],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let first = run(args)?;
        let second = run(args)?;
        if first != second {
            differing.push(args[0]);
        }
    }
    ensure(
        differing.is_empty(),
        format!(
            "{} commands run twice, byte-differing: {differing:?}",
            commands.len()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report =
        |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Check| {
            let start = Instant::now();
            let result = f();
            let elapsed = start.elapsed();
            let late = limit.is_some_and(|l| elapsed > l);
            let (status, detail) = match result {
                Ok(d) if !late => ("PASS", d),
                Ok(d) => (
                    "FAIL",
                    format!("{d}; exceeded time limit {:?}", limit.unwrap()),
                ),
                Err(d) => ("FAIL", d),
            };
            if status == "FAIL" {
                failures += 1;
            }
            println!(
                "{status} [{id:>2}] {name} ({:.2}s): {detail}",
                elapsed.as_secs_f64()
            );
        };

    report(
        1,
        "bound values",
        Some(Duration::from_secs(1)),
        &mut c1_reference_bounds,
    );
    report(
        2,
        "bound dominance",
        Some(Duration::from_secs(1)),
        &mut c2_bound_dominance,
    );

    let mut runs = None;
    report(
        3,
        "bias-decay slopes",
        Some(Duration::from_secs(600)),
        &mut || {
            let r = runs.insert(run_bias_simulations());
            c3_bias_slopes(r)
        },
    );
    report(4, "bias below bound", None, &mut || {
        c4_bias_below_bound(runs.as_ref().unwrap())
    });
    report(
        5,
        "isotonic consistency",
        Some(Duration::from_secs(30)),
        &mut c5_isotonic_consistency,
    );
    report(
        6,
        "rate check",
        Some(Duration::from_secs(300)),
        &mut c6_rate,
    );
    report(7, "noisy corruption", None, &mut c7_noisy_corruption);
    report(
        8,
        "PAV oracle equivalence",
        Some(Duration::from_secs(10)),
        &mut c8_pav_oracle,
    );
    report(
        9,
        "perturbation inequality",
        None,
        &mut c9_perturbation_inequality,
    );
    report(10, "FeeBee direction", None, &mut c10_feebee_direction);
    report(11, "order breakage", None, &mut c11_order_breakage);
    report(12, "CLI determinism", None, &mut c12_determinism);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria passed");
}
