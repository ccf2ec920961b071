//! One line per acceptance criterion. Tolerances and runtime limits are
//! pinned here and compared against the measured values the harness reports,
//! independently of the thresholds carried inside the harness itself.

use std::path::PathBuf;

use mlinbound_core::harness::{run, Experiment, ExperimentConfig, ExperimentResult};

fn config(file: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(file);
    ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn measured(r: &ExperimentResult, name: &str) -> f64 {
    r.check(name).unwrap_or_else(|| panic!("{} has no check `{name}`", r.experiment)).measured
}

enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

struct Line {
    id: u32,
    label: &'static str,
    ok: bool,
    detail: String,
}

struct Criterion<'a> {
    id: u32,
    label: &'static str,
    result: &'a ExperimentResult,
    limit_s: Option<f64>,
}

impl Criterion<'_> {
    fn judge(&self, bounds: &[(&str, Bound)]) -> Line {
        let mut ok = true;
        let mut parts = Vec::new();
        for (name, b) in bounds {
            let v = measured(self.result, name);
            let (pass, rel, t) = match *b {
                Bound::AtMost(t) => (v <= t, "<=", t),
                Bound::AtLeast(t) => (v >= t, ">=", t),
            };
            ok &= pass;
            parts.push(format!("{name}={v:.4e}{rel}{t:.3e}"));
        }
        if let Some(limit) = self.limit_s {
            let within = self.result.wall_clock_s <= limit;
            ok &= within;
            parts.push(format!("time={:.1}s<={limit}s", self.result.wall_clock_s));
        }
        Line { id: self.id, label: self.label, ok, detail: parts.join(" ") }
    }
}

fn main() {
    use Bound::*;
    let decomp = run(Experiment::DecompVerify, &config("decomp-verify.conf")).unwrap();
    let oracle = run(Experiment::AtomsumOracle, &config("atomsum-oracle.conf")).unwrap();
    let planch = run(Experiment::PlancherelCheck, &config("plancherel-check.conf")).unwrap();
    let n_m2 = run(Experiment::ScalingN, &config("scaling-N-m2.conf")).unwrap();
    let n_m3 = run(Experiment::ScalingN, &config("scaling-N-m3.conf")).unwrap();
    let lam = run(Experiment::ScalingLambda, &config("scaling-lambda.conf")).unwrap();
    let recon = run(Experiment::WaveletRecon, &config("wavelet-recon.conf")).unwrap();
    let decay = run(Experiment::CoeffDecay, &config("coeff-decay.conf")).unwrap();
    let rough = run(Experiment::RoughDecay, &config("rough-decay.conf")).unwrap();
    let horm = run(Experiment::HormanderDecay, &config("hormander-decay.conf")).unwrap();

    let mut lines = vec![
        Criterion { id: 1, label: "combinatorial exactness", result: &decomp, limit_s: Some(30.0) }
            .judge(&[("failures", AtMost(0.0))]),
        Criterion { id: 2, label: "oracle equivalence", result: &oracle, limit_s: Some(300.0) }
            .judge(&[("max_rel_error", AtMost(1e-8))]),
        Criterion { id: 3, label: "plancherel baseline", result: &planch, limit_s: Some(10.0) }
            .judge(&[("ratio_min", AtLeast(1.0 - 1e-6)), ("ratio_max", AtMost(1.0 + 1e-12))]),
    ];

    let mut n_scaling = Criterion { id: 4, label: "N-scaling", result: &n_m2, limit_s: None }
        .judge(&[("slope_random", AtMost(0.25 + 0.10)), ("ratio_random", AtMost(4.0))]);
    let m3 = Criterion { id: 4, label: "N-scaling m=3", result: &n_m3, limit_s: None }
        .judge(&[("slope_random", AtMost(1.0 / 3.0 + 0.12)), ("ratio_random", AtMost(4.0))]);
    let total = n_m2.wall_clock_s + n_m3.wall_clock_s;
    n_scaling.ok &= m3.ok && total <= 900.0;
    n_scaling.detail = format!("m=2 {} | m=3 {} | time={total:.1}s<=900s", n_scaling.detail, m3.detail);
    lines.push(n_scaling);

    lines.extend([
        Criterion { id: 5, label: "lambda-scaling", result: &lam, limit_s: None }
            .judge(&[("slope", AtMost(1.3)), ("ratio", AtMost(4.0))]),
        Criterion { id: 6, label: "wavelet suite", result: &recon, limit_s: Some(120.0) }.judge(&[
            ("moment_max", AtMost(1e-6)),
            ("norm_error", AtMost(1e-6)),
            ("inner_max", AtMost(1e-4)),
            ("roundtrip", AtMost(1e-3)),
        ]),
        Criterion { id: 7, label: "smooth coefficient decay", result: &decay, limit_s: None }
            .judge(&[("decay", AtLeast(3.5))]),
        Criterion { id: 8, label: "rough-kernel suite", result: &rough, limit_s: Some(600.0) }.judge(&[
            ("mean_zero", AtMost(1e-10)),
            ("annulus_mass_min", AtLeast(1.0 - 1e-6)),
            ("shell_violations", AtMost(0.0)),
            ("mu_decay", AtLeast(0.05)),
        ]),
        Criterion { id: 9, label: "hormander suite", result: &horm, limit_s: Some(600.0) }.judge(&[
            ("slice_support_violations", AtMost(0.0)),
            ("partition_residual", AtMost(1e-10)),
            ("lambda_decay", AtLeast(2.0)),
        ]),
        // The band counting runs inside rough-decay, so its limit bounds the whole run.
        Criterion { id: 10, label: "frequency-band counting", result: &rough, limit_s: Some(60.0) }
            .judge(&[("band_energy_ratio", AtMost(1.0 + 1e-12)), ("band_count_excess", AtMost(0.0))]),
    ]);

    for l in &lines {
        println!("{} criterion {:>2} {:<26} {}", if l.ok { "PASS" } else { "FAIL" }, l.id, l.label, l.detail);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.ok).map(|l| l.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", lines.len());
}
