//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run a subset with `cargo test -p lif-validation --test acceptance -- 4 9`.

use std::process::ExitCode;
use std::time::Instant;

use faer::{Mat, Side};
use lif::config::{ExperimentConfig, Scheme};
use lif::experiment::{self, ExperimentOutput};
use lif::simulate::Sampler;
use lif_core::covariance::{
    bin_cov_matrix, entry_decay_fit, matern_spectral_density, preconditioned_cov_entry, spectral_normalizer,
    FilteredCovariance,
};
use lif_core::lattice::build_perturbed_lattice;
use lif_core::lif::{singleton_estimate, bin_sums};
use lif_core::optimize::{estimate, EstimationMode, OptimizerConfig};
use lif_core::partition::{partition_nonuniform, partition_rectangular, partition_singleton, partition_uniform};
use lif_core::precondition::precondition_all;
use lif_core::special::bessel_k;
use lif_core::{Lattice, MaternParams, Partition, PreconditionedSample};
use lif_validation::{mean_sd, preset, Report};

const NU: f64 = 0.5;

fn lattice(per_axis: usize, side: f64, delta: f64, seed: u64) -> Lattice {
    build_perturbed_lattice(per_axis, 2, side, delta, seed).unwrap()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn run(cfg: &ExperimentConfig, threads: usize) -> ExperimentOutput {
    pool(threads).install(|| experiment::run(cfg)).unwrap()
}

fn xi_column(out: &ExperimentOutput, k: usize) -> Vec<f64> {
    out.records.iter().filter(|r| r.ok()).map(|r| r.xi_hat[k]).collect()
}

fn growth(per_axis: usize) -> ExperimentConfig {
    let mut cfg = preset("isotropic_growth.toml");
    cfg.lattice.per_axis = per_axis;
    cfg
}

fn min_eigenvalue(m: &lif_core::linalg::DenseMatrix) -> f64 {
    let k = m.order();
    let a = Mat::<f64>::from_fn(k, k, |i, j| m.get(i, j));
    a.self_adjoint_eigenvalues(Side::Lower).unwrap().into_iter().fold(f64::INFINITY, f64::min)
}

fn max_diag(m: &lif_core::linalg::DenseMatrix) -> f64 {
    (0..m.order()).map(|i| m.get(i, i)).fold(0.0, f64::max)
}

fn criterion_1(report: &mut Report) {
    let t = Instant::now();
    let (mut worst_norm, mut worst_moment) = (0.0f64, 0.0f64);
    for (i, delta) in [0.0, 1.0, 3.0].into_iter().enumerate() {
        let lat = lattice(50, 5.0, delta, 100 + i as u64);
        for m in [2, 3] {
            let pc = precondition_all(&lat, m, NU).unwrap();
            for s in 0..lat.len() {
                let norm: f64 = pc.site(s).1.iter().map(|a| a * a).sum();
                worst_norm = worst_norm.max((norm - 1.0).abs());
                worst_moment = worst_moment.max(pc.moment_residual(&lat, s));
            }
        }
    }
    let pass = worst_norm <= 1e-12 && worst_moment <= 1e-8;
    let detail = format!("max |Σa²-1| = {worst_norm:.2e} (≤ 1e-12), max moment = {worst_moment:.2e} (≤ 1e-8)");
    report.record("criterion 1 preconditioner", pass, &detail, t);
}

fn criterion_2(report: &mut Report) {
    let t = Instant::now();
    let grid = [1.0, 2.5, 5.0, 10.0];
    let (mut worst_psd, mut worst_order) = (f64::INFINITY, f64::INFINITY);
    for seed in 0..3u64 {
        let lat = lattice(14, 5.0, 1.0, 200 + seed);
        let pc = precondition_all(&lat, 2, NU).unwrap();
        let part = partition_uniform(lat.len(), 2, 300 + seed).unwrap();
        let all: Vec<usize> = (0..lat.len()).collect();
        for bin in [all.as_slice(), part.bin(0), part.bin(1)] {
            let scaled: Vec<_> = grid
                .iter()
                .map(|&rho| {
                    let mut k = bin_cov_matrix(&lat, &pc, bin, &[rho]).unwrap().matrix;
                    let c = f64::powf(rho, 2.0 * NU);
                    let o = k.order();
                    for i in 0..o {
                        for j in 0..o {
                            k.set(i, j, c * k.get(i, j));
                        }
                    }
                    k
                })
                .collect();
            for k in &scaled {
                worst_psd = worst_psd.min(min_eigenvalue(k) / max_diag(k));
            }
            for w in scaled.windows(2) {
                let o = w[0].order();
                let d = lif_core::linalg::DenseMatrix::from_fn(o, |i, j| w[1].get(i, j) - w[0].get(i, j));
                worst_order = worst_order.min(min_eigenvalue(&d) / max_diag(&w[1]));
            }
        }
    }
    let mut norms = Vec::new();
    for (i, n_axis) in [20, 40, 80].into_iter().enumerate() {
        let lat = lattice(n_axis, 5.0, 1.0, 400 + i as u64);
        let pc = precondition_all(&lat, 2, NU).unwrap();
        let cov = FilteredCovariance::new(&lat, &pc, &[5.0]).unwrap();
        let all: Vec<usize> = (0..lat.len()).collect();
        let zeros = vec![0.0; lat.len()];
        let b = cov.bin_sums(&all, &zeros).unwrap().b;
        norms.push(f64::powf(5.0, 2.0 * NU) * b.sqrt() / (lat.len() as f64).sqrt());
    }
    let ratio = norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = worst_psd >= -1e-8 && worst_order >= -1e-8 && ratio <= 3.0;
    let detail = format!(
        "min λ/max diag = {worst_psd:.2e}, ordering min λ/max diag = {worst_order:.2e} (≥ -1e-8), \
         Frobenius/√n = {norms:.3?} ratio {ratio:.3} (≤ 3)"
    );
    report.record("criterion 2 covariance", pass, &detail, t);
}

fn criterion_3(report: &mut Report) {
    let t = Instant::now();
    let lat = lattice(20, 5.0, 1.0, 500);
    let n = lat.len();
    let pc = precondition_all(&lat, 2, NU).unwrap();
    let truth = MaternParams::isotropic(1.0, 5.0, NU).unwrap();
    let raw = Sampler::new(&lat, &truth, 1e-10).unwrap().sample(501, 0);
    let y: PreconditionedSample = pc.apply(&raw).unwrap();
    let rho = [10.0];
    let dense: Vec<f64> = (0..n * n)
        .map(|k| preconditioned_cov_entry(&lat, &pc, k / n, k % n, &rho).unwrap())
        .collect();
    let schemes: Vec<(&str, Partition)> = vec![
        ("uniform", partition_uniform(n, 4, 502).unwrap()),
        ("nonuniform", partition_nonuniform(n, 4, 503).unwrap()),
        ("rectangular", partition_rectangular(&lat, &[3, 3]).unwrap()),
        ("singleton", partition_singleton(n).unwrap()),
    ];
    let mut worst = 0.0f64;
    for (_, part) in &schemes {
        let sums = bin_sums(&lat, &y, &pc, part, &rho).unwrap();
        for (tb, s) in sums.iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    // Zero-masked dense matrix: off-bin entries contribute nothing.
                    if part.bin_of(i) == tb && part.bin_of(j) == tb {
                        let k = dense[i * n + j];
                        a += y.values[i] * k * y.values[j];
                        b += k * k;
                    }
                }
            }
            worst = worst.max((s.a - a).abs() / a.abs()).max((s.b - b).abs() / b.abs());
        }
    }
    let names: Vec<&str> = schemes.iter().map(|s| s.0).collect();
    let detail = format!("max relative (a, b) difference {worst:.2e} (≤ 1e-10) over {names:?}");
    report.record("criterion 3 block-diagonal", worst <= 1e-10, &detail, t);
}

/// `K_1(x) = 1/x + ln(x/2) I_1(x) - (x/4) Σ (ψ(k+1) + ψ(k+2)) (x²/4)^k / (k! (k+1)!)`.
fn k1_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let euler = 0.577_215_664_901_532_9;
    let (mut i1, mut tail) = (0.0, 0.0);
    let mut term = 1.0; // (x²/4)^k / (k! (k+1)!)
    let mut psi = -euler; // ψ(k+1)
    for k in 0..60 {
        let kf = k as f64;
        let psi_next = psi + 1.0 / (kf + 1.0);
        i1 += term;
        tail += (psi + psi_next) * term;
        term *= q / ((kf + 1.0) * (kf + 2.0));
        psi = psi_next;
    }
    1.0 / x + (x / 2.0).ln() * (x / 2.0) * i1 - x / 4.0 * tail
}

fn criterion_4(report: &mut Report) {
    let t = Instant::now();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut closed = 0.0f64;
    for x in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0] {
        let k_half = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        closed = closed.max(rel(bessel_k(0.5, x).unwrap(), k_half));
        closed = closed.max(rel(bessel_k(1.5, x).unwrap(), k_half * (1.0 + 1.0 / x)));
    }
    let series = rel(bessel_k(1.0, 1.0).unwrap(), k1_series(1.0));
    // f(h) = 2 ∫_0^∞ cos(ωh) S(ω) dω, Simpson up to W plus the ω^{-2} tail at h = 0.
    let p = MaternParams::isotropic(1.0, 1.0, NU).unwrap();
    let norm = spectral_normalizer(NU, 1);
    let s = |w: f64| matern_spectral_density(&[w], &p).unwrap() * norm;
    let (w_max, steps) = (2.0e4, 4_000_000usize);
    let dw = w_max / steps as f64;
    let mut fourier = 0.0f64;
    for h in [0.0, 0.5, 1.0] {
        let mut acc = 0.0;
        for i in 0..=steps {
            let w = i as f64 * dw;
            let c = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * (w * h).cos() * s(w);
        }
        let mut f = 2.0 * acc * dw / 3.0;
        if h == 0.0 {
            f += 2.0 * s(w_max) * w_max;
        }
        fourier = fourier.max((f - (-h).exp()).abs());
    }
    let pass = closed <= 1e-12 && series <= 1e-9 && fourier <= 1e-4;
    let detail = format!(
        "closed forms {closed:.2e} (≤ 1e-12), K_1(1) vs series {series:.2e} (≤ 1e-9), Fourier inversion {fourier:.2e} (≤ 1e-4)"
    );
    report.record("criterion 4 Bessel/Matérn", pass, &detail, t);
}

struct Cache {
    n30: Option<ExperimentOutput>,
    n50: Option<ExperimentOutput>,
}

fn criterion_5(report: &mut Report, cache: &mut Cache) {
    let t = Instant::now();
    let out30 = run(&growth(30), 1);
    let (m30, s30) = mean_sd(&xi_column(&out30, 0));
    let out50 = run(&growth(50), rayon::current_num_threads());
    let (m50, s50) = mean_sd(&xi_column(&out50, 0));
    let pass = (1.35..=1.85).contains(&m30)
        && (0.15..=0.35).contains(&s30)
        && (1.20..=1.42).contains(&m50)
        && (0.07..=0.16).contains(&s50);
    let detail = format!(
        "N=30 mean {m30:.4} ∈ [1.35, 1.85], sd {s30:.4} ∈ [0.15, 0.35]; \
         N=50 mean {m50:.4} ∈ [1.20, 1.42], sd {s50:.4} ∈ [0.07, 0.16]; failures {}+{}",
        out30.summary.failures, out50.summary.failures
    );
    report.record("criterion 5 isotropic growth", pass, &detail, t);

    let t = Instant::now();
    let out70 = run(&growth(70), rayon::current_num_threads());
    let (_, s70) = mean_sd(&xi_column(&out70, 0));
    let pass = s30 > s50 && s50 > s70 && s30 / s70 >= 2.0;
    let detail = format!(
        "sd N=30 {s30:.4} > N=50 {s50:.4} > N=70 {s70:.4}, ratio {:.2} (≥ 2)",
        s30 / s70
    );
    report.record("criterion 5 supplementary sd decay", pass, &detail, t);
    cache.n30 = Some(out30);
    cache.n50 = Some(out50);
}

fn criterion_6(report: &mut Report) {
    let t = Instant::now();
    let cfg = preset("anisotropic_regular.toml");
    let out = run(&cfg, rayon::current_num_threads());
    let targets = [0.9931, 1.0214];
    let mut pass = out.summary.succeeded == cfg.replicates;
    let mut parts = Vec::new();
    for (k, target) in targets.iter().enumerate() {
        let (m, s) = mean_sd(&xi_column(&out, k));
        pass &= (m - target).abs() <= 0.05 && (0.01..=0.06).contains(&s);
        parts.push(format!("ξ{}: mean {m:.4} (target {target} ± 0.05), sd {s:.4} ∈ [0.01, 0.06]", k + 1));
    }
    let bound_hits = out.records.iter().filter(|r| r.rho_hat.iter().any(|&v| v <= 0.1 || v >= 50.0)).count();
    let detail = format!("{}; bound hits {bound_hits}; failures {}", parts.join("; "), out.summary.failures);
    report.record("criterion 6 anisotropic regular grid", pass, &detail, t);
}

fn criterion_7(report: &mut Report, cache: &mut Cache) {
    let t = Instant::now();
    let r = growth(50).replicates as f64;
    let mut stats = Vec::new();
    for b in [1, 4, 16] {
        let owned;
        let out = match (b, cache.n50.as_ref()) {
            (1, Some(o)) => o,
            _ => {
                let mut cfg = growth(50);
                cfg.partition.scheme = Scheme::Uniform;
                cfg.partition.bins = b;
                owned = run(&cfg, rayon::current_num_threads());
                &owned
            }
        };
        stats.push((b, mean_sd(&xi_column(out, 0))));
    }
    let means: Vec<f64> = stats.iter().map(|s| s.1 .0).collect();
    let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
    // Two standard errors of a sample sd: sd / √(2(R-1)) each.
    let sd_ok = stats.windows(2).all(|w| {
        let (a, b) = (w[0].1 .1, w[1].1 .1);
        b >= a - 2.0 * a / (2.0 * (r - 1.0)).sqrt()
    });
    let pass = spread <= 0.05 && sd_ok;
    let cells: Vec<String> = stats.iter().map(|(b, (m, s))| format!("b={b}: {m:.4}/{s:.4}")).collect();
    let detail = format!("mean/sd {}; mean spread {spread:.4} (≤ 0.05); sd non-decreasing within 2 se: {sd_ok}", cells.join(", "));
    report.record("criterion 7 bin-count stability", pass, &detail, t);
}

fn criterion_8(report: &mut Report) {
    let t = Instant::now();
    let lat = lattice(50, 5.0, 1.0, 800);
    let truth = MaternParams::isotropic(1.0, 5.0, NU).unwrap();
    let raw = Sampler::new(&lat, &truth, 1e-10).unwrap().sample(801, 0);
    let pc = precondition_all(&lat, 2, NU).unwrap();
    let y = pc.apply(&raw).unwrap();
    let part = partition_singleton(lat.len()).unwrap();
    let mut identical = true;
    let mut xi = Vec::new();
    for rho in [2.0, 5.0, 10.0, 20.0] {
        let direct = singleton_estimate(&lat, &y, &pc, &[rho]).unwrap();
        let mode = EstimationMode::FixedRho(vec![rho]);
        let lif = estimate(&lat, &y, &pc, &part, &OptimizerConfig::default(), &mode, Some(&truth)).unwrap();
        identical &= direct == lif.microergodic_hat;
        xi.push(lif.xi_hat.unwrap()[0]);
    }
    let (lo, hi) = xi.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let variation = hi / lo - 1.0;
    let pass = identical && variation <= 0.10;
    let detail = format!("bit-identical {identical}; ξ̂ over ρ ∈ {{2,5,10,20}} = {xi:.4?}, max/min - 1 = {variation:.4} (≤ 0.10)");
    report.record("criterion 8 singleton special case", pass, &detail, t);
}

fn criterion_9(report: &mut Report) {
    let t = Instant::now();
    let lat = lattice(40, 5.0, 1.0, 900);
    let pc = precondition_all(&lat, 2, NU).unwrap();
    let fit = entry_decay_fit(&lat, &pc, &[5.0], 20, lif::diagnose::DECAY_FLOOR).unwrap();
    let detail = format!("slope {:.3} (≤ -2.5) over {} envelope points", fit.slope, fit.points.len());
    report.record("criterion 9 entry decay", fit.slope <= -2.5, &detail, t);
}

fn criterion_10(report: &mut Report, cache: &mut Cache) {
    let t = Instant::now();
    let cfg = growth(30);
    let one = cache.n30.take().unwrap_or_else(|| run(&cfg, 1));
    let eight = run(&cfg, 8);
    let dir = tempfile::tempdir().unwrap();
    let (p1, p8) = (dir.path().join("t1.csv"), dir.path().join("t8.csv"));
    experiment::write_replicates(&p1, &one.records).unwrap();
    experiment::write_replicates(&p8, &eight.records).unwrap();
    let (b1, b8) = (std::fs::read(&p1).unwrap(), std::fs::read(&p8).unwrap());
    let detail = format!("{} vs {} bytes, identical {}", b1.len(), b8.len(), b1 == b8);
    report.record("criterion 10 determinism", b1 == b8, &detail, t);
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: u32| selected.is_empty() || selected.contains(&k);
    let mut report = Report::default();
    let mut cache = Cache { n30: None, n50: None };
    if want(1) {
        criterion_1(&mut report);
    }
    if want(2) {
        criterion_2(&mut report);
    }
    if want(3) {
        criterion_3(&mut report);
    }
    if want(4) {
        criterion_4(&mut report);
    }
    if want(5) {
        criterion_5(&mut report, &mut cache);
    }
    if want(6) {
        criterion_6(&mut report);
    }
    if want(7) {
        criterion_7(&mut report, &mut cache);
    }
    if want(8) {
        criterion_8(&mut report);
    }
    if want(9) {
        criterion_9(&mut report);
    }
    if want(10) {
        criterion_10(&mut report, &mut cache);
    }
    let failed = report.failed();
    println!("{} checks, {} failed {:?}", report.len(), failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
