//! End-to-end acceptance checks. Runs as a plain binary so each criterion
//! prints a PASS/FAIL line; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use oamp_core::algorithms::diagnostics::{ks_critical_1pct, ks_statistic};
use oamp_core::algorithms::oamp::{LeForm, Oamp};
use oamp_core::algorithms::{run_algorithm, AlgorithmSpec};
use oamp_core::config::{Algorithm, BStrategy, DenoiserChoice, SpectrumKind, VarianceSource};
use oamp_core::estimators::{
    compute_b_derivative_expectation, compute_b_ep, compute_b_integral, compute_b_montecarlo, moments, Denoiser,
};
use oamp_core::harness::{ortho_summary, run_experiment, welch_test, RunResult};
use oamp_core::linalg::{geometric_spectrum, sample_haar, sample_haar_dense, SpectrumSpec};
use oamp_core::model::build_system;
use oamp_core::quadrature::GaussianExpectation;
use oamp_core::rng::stream;
use oamp_core::{mse_from_gs, BernoulliGaussianPrior, Error, ExperimentConfig, GsModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn desk_runs() -> (RunResult, RunResult, f64) {
    let start = Instant::now();
    let standard = run_experiment(&ExperimentConfig::default()).expect("standard desk run");
    let optimized = run_experiment(&ExperimentConfig {
        algorithm: Algorithm::OampWOptimized,
        ..ExperimentConfig::default()
    })
    .expect("optimized desk run");
    (standard, optimized, start.elapsed().as_secs_f64())
}

fn se_agreement(run: &RunResult) -> (f64, usize) {
    let floor = 10.0 * run.config.sigma2();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for row in &run.aggregate {
        if row.se_mse > floor {
            worst = worst.max((db(row.mean_gs_mse) - db(row.se_mse)).abs());
            checked += 1;
        }
    }
    (worst, checked)
}

fn criterion_1(standard: &RunResult, optimized: &RunResult, secs: f64) -> Outcome {
    let (ws, cs) = se_agreement(standard);
    let (wo, co) = se_agreement(optimized);
    let diverged = standard.diverged.len() + optimized.diverged.len();
    Outcome {
        pass: ws < 1.0 && wo < 1.0 && cs > 0 && secs < 600.0 && diverged == 0,
        detail: format!(
            "max |sim - SE| standard {ws:.3} dB over {cs} iters, optimized {wo:.3} dB over {co} iters; \
             {} trials each, {diverged} diverged; both runs {secs:.1} s",
            standard.config.trials
        ),
    }
}

fn final_samples(run: &RunResult) -> Vec<f64> {
    run.trajectories
        .iter()
        .map(|(_, t)| t.records.last().unwrap().gs_mse)
        .collect()
}

fn criterion_2(standard: &RunResult, optimized: &RunResult) -> Outcome {
    let a = final_samples(standard);
    let b = final_samples(optimized);
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let (t, p) = welch_test(&a, &b);
    let se_a = *standard.se.mse().last().unwrap();
    let se_b = *optimized.se.mse().last().unwrap();
    Outcome {
        pass: mb < ma && p < 0.05 && se_b < se_a,
        detail: format!(
            "final standard {:.2} dB vs optimized {:.2} dB (t = {t:.1}, p = {p:.1e}); SE {:.2} vs {:.2} dB",
            db(ma),
            db(mb),
            db(se_a),
            db(se_b)
        ),
    }
}

fn ortho_config(b: BStrategy, source: VarianceSource) -> ExperimentConfig {
    ExperimentConfig {
        experiment: "orthogonality".into(),
        n: 4096,
        iterations: 15,
        b_strategy: b,
        variance_source: source,
        ..ExperimentConfig::default()
    }
}

const ORTHO_SEEDS: usize = 20;
const ORTHO_SEED: u64 = 99;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn criterion_3_4() -> (Outcome, Outcome) {
    let bound = 5.0 / 4096f64.sqrt();
    let oamp = ortho_summary(&ortho_config(BStrategy::Derivative, VarianceSource::Se), ORTHO_SEEDS, ORTHO_SEED)
        .expect("OAMP orthogonality runs");
    let integral = ortho_summary(&ortho_config(BStrategy::Integral, VarianceSource::Se), ORTHO_SEEDS, ORTHO_SEED)
        .expect("integral-B runs");
    let em = ortho_summary(&ortho_config(BStrategy::Zero, VarianceSource::Oracle), ORTHO_SEEDS, ORTHO_SEED)
        .expect("un-orthogonalized runs");
    let cross = max_abs(&oamp.worst_cross);
    let signal = max_abs(&oamp.signal);
    let em5 = max_abs(&em.worst_cross[..5]);
    let c3 = Outcome {
        pass: cross < bound && signal < bound && em5 > bound,
        detail: format!(
            "bound {bound:.4}; OAMP max seed-mean |corr| errors {cross:.4}, signal {signal:.4}; \
             B = 0 reaches {em5:.3} by iteration 5 (integral B for reference: {:.4} / {:.4})",
            max_abs(&integral.worst_cross),
            max_abs(&integral.signal)
        ),
    };
    let kurt = max_abs(&oamp.kurtosis);
    let c4 = Outcome {
        pass: kurt < 0.2,
        detail: format!(
            "max |seed-mean excess kurtosis| over 15 iterations {kurt:.4} (B = 0 reference: {:.3})",
            max_abs(&em.kurtosis)
        ),
    };
    (c3, c4)
}

fn criterion_5() -> Outcome {
    let prior = BernoulliGaussianPrior::new(0.25).unwrap();
    let quad = GaussianExpectation::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, v) in [0.5, 0.1, 0.01].into_iter().enumerate() {
        let den = Denoiser::bg_mmse(0.25, 1.0, v).unwrap();
        let bi = compute_b_integral(&den, &prior, 1.0, v).unwrap();
        let bd = compute_b_derivative_expectation(&den, &prior, 1.0, v).unwrap();
        let mmse = moments(&den, &prior, 1.0, v, &quad).unwrap().mse();
        let be = compute_b_ep(mmse, v).unwrap();
        let (bm, se) = compute_b_montecarlo(&den, &prior, 1.0, v, 10_000_000, 0xb0 + k as u64).unwrap();
        let spread = (bi - bd).abs().max((bi - be).abs()).max((bd - be).abs());
        let z = (bm - bi).abs() / se;
        pass &= spread < 1e-3 && z < 3.0;
        parts.push(format!("v={v}: B={bi:.5} spread {spread:.1e}, MC {z:.2} SE"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn svd_w_gap(base: &ExperimentConfig, seeds: &[u64]) -> f64 {
    let mut gap = 0.0f64;
    for (a, b) in [
        (Algorithm::OampSvd, Algorithm::OampW),
        (Algorithm::OampSvdOptimized, Algorithm::OampWOptimized),
    ] {
        for &seed in seeds {
            let x = run_algorithm(&ExperimentConfig { algorithm: a, ..base.clone() }, seed).unwrap();
            let y = run_algorithm(&ExperimentConfig { algorithm: b, ..base.clone() }, seed).unwrap();
            for (p, q) in x.records.iter().zip(&y.records) {
                for (u, w) in [
                    (p.gs_mse, q.gs_mse),
                    (p.raw_mse, q.raw_mse),
                    (p.alpha_gamma, q.alpha_gamma),
                    (p.v_gamma, q.v_gamma),
                    (p.v_phi, q.v_phi),
                ] {
                    gap = gap.max((u - w).abs());
                }
            }
        }
    }
    gap
}

fn criterion_6() -> Outcome {
    let base = ExperimentConfig {
        iterations: 30,
        ..ExperimentConfig::default()
    };
    let bg = ExperimentConfig {
        denoiser: DenoiserChoice::BgMmse,
        ..base.clone()
    };
    let svd_gap = svd_w_gap(&bg, &[1, 2, 3]);
    let soft_gap = svd_w_gap(&base, &[1]);
    let mut vamp_gap = 0.0f64;
    for seed in [4, 5] {
        let v = run_algorithm(&ExperimentConfig { algorithm: Algorithm::Vamp, ..bg.clone() }, seed).unwrap();
        let w = run_algorithm(
            &ExperimentConfig {
                algorithm: Algorithm::OampW,
                b_strategy: BStrategy::Ep,
                ..bg.clone()
            },
            seed,
        )
        .unwrap();
        for (p, q) in v.records.iter().zip(&w.records) {
            vamp_gap = vamp_gap.max((p.gs_mse - q.gs_mse).abs()).max((p.v_phi - q.v_phi).abs());
        }
    }
    let spec = AlgorithmSpec::from_config(&base).unwrap();
    let sys = build_system(&base, 6).unwrap();
    let oamp = Oamp::new(&sys, &spec, LeForm::Operator).unwrap();
    let serial = oamp.serial_messages(10).unwrap();
    let (chain, _) = oamp.parallel_messages(20).unwrap();
    let bitwise = serial == chain;
    Outcome {
        pass: svd_gap < 1e-8 && vamp_gap < 1e-10 && bitwise,
        detail: format!(
            "svd vs w (bg-mmse, 30 iters) max gap {svd_gap:.1e} (soft threshold {soft_gap:.1e}); \
             vamp vs w+ep {vamp_gap:.1e}; parallel chain bitwise equal: {bitwise}"
        ),
    }
}

fn criterion_7() -> Outcome {
    let iidg = ExperimentConfig {
        experiment: "amp_iidg".into(),
        n: 2048,
        iterations: 8,
        trials: 5,
        algorithm: Algorithm::Amp,
        spectrum: SpectrumKind::IidgSample,
        ..ExperimentConfig::default()
    };
    let res = run_experiment(&iidg).expect("AMP on IIDG");
    let worst = res
        .aggregate
        .iter()
        .map(|r| (db(r.mean_gs_mse) - db(r.se_mse)).abs())
        .fold(0.0f64, f64::max);
    let haar = ExperimentConfig {
        experiment: "amp_kappa10".into(),
        trials: 10,
        ..ExperimentConfig::default()
    };
    let oamp = run_experiment(&haar).expect("OAMP desk run");
    let oamp_final = oamp.aggregate.last().unwrap().mean_gs_mse;
    let (amp_desc, amp_worse) = match run_experiment(&ExperimentConfig {
        algorithm: Algorithm::Amp,
        ..haar.clone()
    }) {
        Ok(r) => {
            let f = r.aggregate.last().unwrap().mean_gs_mse;
            let desc = format!("{:.2} dB ({} of 10 diverged)", db(f), r.diverged.len());
            (desc, f > oamp_final || !r.diverged.is_empty())
        }
        Err(e @ (Error::Divergence { .. } | Error::ExperimentFailure(_))) => (format!("diverged ({e})"), true),
        Err(e) => panic!("AMP desk run: {e}"),
    };
    Outcome {
        pass: worst < 1.0 && res.diverged.is_empty() && amp_worse,
        detail: format!(
            "IIDG n=2048 max |sim - SE| {worst:.3} dB over 8 iters; kappa=10: AMP {amp_desc} vs OAMP {:.2} dB",
            db(oamp_final)
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // GS-optimal scaling against a brute-force grid
    let mut grid_gap = 0.0f64;
    for (alpha, v) in [(1.0, 0.1), (0.7, 0.3), (1.4, 0.05), (0.2, 2.0)] {
        let g = GsModel::new(alpha, v).unwrap();
        let (omega, mse) = mse_from_gs(g).unwrap();
        let (mut best_w, mut best) = (0.0, f64::INFINITY);
        for k in 0..=200_000 {
            let w = k as f64 * 1e-5 * 4.0;
            let e = (w * alpha - 1.0).powi(2) + w * w * v;
            if e < best {
                best = e;
                best_w = w;
            }
        }
        grid_gap = grid_gap.max((best_w - omega).abs() / 4e-5).max((best - mse).abs() / 1e-9);
    }
    pass &= grid_gap <= 1.0;
    notes.push(format!("mse grid ok: {}", grid_gap <= 1.0));

    // spectrum constraints
    let mut spec_err = 0.0f64;
    for (m, n, kappa) in [(666, 1024, 10.0), (975, 1500, 10.0), (2662, 4096, 100.0)] {
        let d = geometric_spectrum(SpectrumSpec::new(m, n, kappa)).unwrap();
        let step = kappa.powf(1.0 / m as f64);
        let ratio = d.windows(2).map(|w| (w[0] / w[1] - step).abs()).fold(0.0f64, f64::max);
        let energy = d.iter().map(|a| a * a).sum::<f64>();
        spec_err = spec_err.max(ratio).max((energy - n as f64).abs() / n as f64);
    }
    pass &= spec_err < 1e-10;
    notes.push(format!("spectrum ratio/energy err {spec_err:.1e}"));

    // Haar orthogonality
    let mut rng = stream(8);
    let ortho = sample_haar(1024, &mut rng)
        .unwrap()
        .orthogonality_error()
        .max(sample_haar_dense(256, &mut rng).unwrap().orthogonality_error());
    pass &= ortho < 1e-10;
    notes.push(format!("haar |VV^T - I| {ortho:.1e}"));

    // marginal of V c
    let n = 256;
    let seeds = 2000;
    let norm = (1..=n).map(|i| (i * i) as f64).sum::<f64>().sqrt();
    let c: Vec<f64> = (1..=n).map(|i| i as f64 / norm).collect();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for seed in 0..seeds {
        let vc = sample_haar(n, &mut stream(10_000 + seed)).unwrap().apply(&c).unwrap();
        for i in 0..n {
            s1[i] += vc[i];
            s2[i] += vc[i] * vc[i];
        }
    }
    let k = seeds as f64;
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for i in 0..n {
        let mean = s1[i] / k;
        let var = (s2[i] / k - mean * mean) * k / (k - 1.0);
        worst_mean = worst_mean.max(mean.abs());
        worst_var = worst_var.max((var * n as f64 - 1.0).abs());
    }
    let marginal = worst_mean < 4.0 / k.sqrt() && worst_var < 0.15;
    pass &= marginal;
    notes.push(format!("Vc mean {worst_mean:.1e}, var rel dev {worst_var:.3}"));

    // left invariance: entry (1,1) of QV vs V
    let n = 64;
    let q1 = 37;
    let plain: Vec<f64> = (0..1000)
        .map(|s| sample_haar(n, &mut stream(20_000 + s)).unwrap().apply(&unit(n, 0)).unwrap()[0])
        .collect();
    let permuted: Vec<f64> = (0..1000)
        .map(|s| sample_haar(n, &mut stream(30_000 + s)).unwrap().apply(&unit(n, 0)).unwrap()[q1])
        .collect();
    let ks = ks_statistic(&plain, &permuted);
    let crit = ks_critical_1pct(1000, 1000);
    pass &= ks < crit;
    notes.push(format!("KS {ks:.4} < {crit:.4}"));

    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Outcome {
        pass: false,
        detail: format!(
            "panicked: {}",
            e.downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        ),
    });
    println!(
        "criterion {id} {} {name}: {} [{:.1} s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    outcome.pass
}

fn main() {
    let mut ok = true;
    let desk = catch_unwind(desk_runs).ok();
    ok &= report(1, "SE vs simulation (desk, 100 trials)", || {
        let (s, o, secs) = desk.as_ref().expect("desk runs failed");
        criterion_1(s, o, *secs)
    });
    ok &= report(2, "optimized LE beats standard", || {
        let (s, o, _) = desk.as_ref().expect("desk runs failed");
        criterion_2(s, o)
    });
    let mut c4 = None;
    ok &= report(3, "orthogonality (n=4096, 20 seeds)", || {
        let (c3, k) = criterion_3_4();
        c4 = Some(k);
        c3
    });
    ok &= report(4, "Gaussianity (n=4096, 20 seeds)", || c4.take().expect("criterion 3 runs failed"));
    ok &= report(5, "B strategies agree", criterion_5);
    ok &= report(6, "algebraic equivalences", criterion_6);
    ok &= report(7, "AMP regime", criterion_7);
    ok &= report(8, "formula checks", criterion_8);
    if !ok {
        std::process::exit(1);
    }
}
