//! Experiment orchestration: config → plan → estimator → records, report,
//! data files and a run manifest on disk.
//!
//! Records and the report are a pure function of the config, the seed and
//! the code version. The worker count only sizes the thread pool; every
//! random draw is indexed by sample, never by worker.

mod config;
mod records;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    plan, DiagnosticsSection, EstimatorKind, ExperimentConfig, GeometryCheckSection, GeometrySection,
    ModulusKind, ModulusSection, Plan, WindowSection,
};
pub use records::{format_num, read_records, render_report, write_dat, write_records, Record, Value};

use crate::error::{Error, Result};
use crate::geometry::{
    classify_separation, random_separated_pair, CellularSet, Cube, PartialCase, TwoParticleBox,
};
use crate::grid::GridSpec;
use crate::kernel_field::{coefficients, FieldSampler, GaussianConditional, KernelSpace, modulus_empirical};
use crate::rng::{derive_stream, DERIVATION_RULE};
use crate::stats::{ks_one_sample, normal_cdf, normal_window_mass};
use crate::wegner::{wegner_one, wegner_two, WegnerReport};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.toml";

/// Version string recorded with every run.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stored next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub estimator: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub seed_rule: String,
    pub workers: usize,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub samples: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub report: String,
}

/// Plot file: name, header line and `(x, y)` rows.
pub type DataFile = (String, String, Vec<(f64, f64)>);

/// Output of an estimator before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Execution {
    pub records: Vec<Record>,
    pub data: Vec<DataFile>,
    pub samples: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_toml(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

/// Parses and validates a config file without running it.
pub fn validate(path: &Path) -> Result<Plan> {
    let (cfg, _) = load_config(path)?;
    plan(&cfg)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs the experiment described by the config file at `path`.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let (mut cfg, text) = load_config(path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = match (&opts.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_absolute() => o.clone(),
        (None, Some(o)) => path.parent().unwrap_or(Path::new(".")).join(o),
        (None, None) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            PathBuf::from("runs").join(stem)
        }
    };
    run_config(&cfg, &text, opts.workers, &out_dir)
}

/// Runs an already parsed config and writes every artifact into `out_dir`.
pub fn run_config(
    cfg: &ExperimentConfig,
    config_text: &str,
    workers: Option<usize>,
    out_dir: &Path,
) -> Result<RunOutcome> {
    let plan = plan(cfg)?;
    let workers = workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    fs::create_dir_all(out_dir)?;
    let config_hash = sha256_hex(config_text.as_bytes());

    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let exec = pool.install(|| execute(&plan))?;

    let mut records = vec![Record::new("run")
        .str("estimator", cfg.estimator.name())
        .uint("seed", cfg.seed)
        .str("config_hash", &config_hash)
        .str("code_version", CODE_VERSION)];
    records.extend(exec.records);
    let records_path = out_dir.join(RECORDS_FILE);
    write_records(&records_path, &records)?;
    // The report is rendered from what was written, so `report` reproduces it.
    let report = render_report(&read_records(&records_path)?)?;
    fs::write(out_dir.join(REPORT_FILE), &report)?;
    for (name, header, rows) in &exec.data {
        write_dat(&out_dir.join(name), header, rows)?;
    }
    fs::write(out_dir.join(CONFIG_COPY), config_text)?;

    let manifest = RunManifest {
        estimator: cfg.estimator.name().into(),
        config_hash,
        code_version: CODE_VERSION.into(),
        seed: cfg.seed,
        seed_rule: DERIVATION_RULE.into(),
        workers,
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        samples: exec.samples,
        failed: exec.failed,
        first_failure: exec.first_failure,
    };
    fs::write(
        out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest is serializable"),
    )?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest,
        report,
    })
}

/// Re-renders `report.txt` of a finished run from its records.
pub fn rerender(run_dir: &Path) -> Result<String> {
    if !run_dir.join(MANIFEST_FILE).is_file() {
        return Err(Error::Record(format!(
            "{} has no {MANIFEST_FILE}; a report without a manifest is invalid",
            run_dir.display()
        )));
    }
    let report = render_report(&read_records(&run_dir.join(RECORDS_FILE))?)?;
    fs::write(run_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Runs the estimator of a plan on the current thread pool.
pub fn execute(plan: &Plan) -> Result<Execution> {
    match plan {
        Plan::OneVolume(cfg) => {
            let r = wegner_one(cfg)?;
            Ok(wegner_execution(&r, Some(cfg.energy), None))
        }
        Plan::TwoVolume(cfg) => {
            let r = wegner_two(cfg)?;
            Ok(wegner_execution(&r, None, Some(cfg.window())))
        }
        Plan::GeometryCheck { section, seed } => Ok(geometry_check(section, *seed)),
        Plan::FieldDiagnostics {
            kernel,
            bx,
            h,
            samples,
            seed,
            coefficients: k,
        } => field_diagnostics(kernel, bx, *h, *samples, *seed, *k),
        Plan::Modulus {
            kernel,
            bx,
            bx_prime,
            h,
            b,
            n_outer,
            n_inner,
            seed,
        } => {
            let prime = bx_prime.as_ref().map(|p| p.shadow());
            let law = GaussianConditional::new(kernel, &bx.shadow(), prime.as_ref(), *h)?;
            let mut records = Vec::new();
            let mut empirical = Vec::new();
            let mut closed = Vec::new();
            for &width in b {
                let est = modulus_empirical(&law, width, *n_outer, *n_inner, *seed)?;
                let exact = normal_window_mass(width);
                records.push(
                    Record::new("modulus")
                        .num("b", width)
                        .num("nu_hat", est.value)
                        .num("std_error", est.std_error)
                        .num("closed_form", exact)
                        .num("bound", width / (2.0 * std::f64::consts::PI).sqrt())
                        .num("conditional_sd", law.conditional_sd())
                        .int("n_outer", *n_outer)
                        .int("n_inner", *n_inner),
                );
                empirical.push((width, est.value));
                closed.push((width, exact));
            }
            Ok(Execution {
                records,
                data: vec![
                    ("modulus.dat".into(), "b nu_hat".into(), empirical),
                    ("modulus_closed_form.dat".into(), "b closed_form".into(), closed),
                ],
                samples: *n_outer,
                failed: 0,
                first_failure: None,
            })
        }
    }
}

fn wegner_execution(r: &WegnerReport, energy: Option<f64>, window: Option<(f64, f64)>) -> Execution {
    let estimator = match r.estimator {
        crate::wegner::Estimator::OneVolume => "one-volume",
        crate::wegner::Estimator::TwoVolume => "two-volume",
    };
    let (mean_a, mean_b) = r.mean_level_counts.unzip();
    let mut records = vec![Record::new("summary")
        .str("estimator", estimator)
        .int("samples", r.samples)
        .int("succeeded", r.succeeded)
        .int("failed", r.failed)
        .opt_num("energy", energy)
        .opt_num("j_lo", window.map(|w| w.0))
        .opt_num("j_hi", window.map(|w| w.1))
        .num("volume", r.volume)
        .opt_num("volume_prime", r.volume_prime)
        .num("moment", r.moment)
        .num("z", r.z)
        .opt_num("z_prime", r.z_prime)
        .opt_num("c_hat", r.c_hat)
        .bool("monotone", r.monotone)
        .bool("shape_holds", r.shape_holds)
        .opt_num("level_count_correlation", r.level_count_correlation)
        .opt_num("mean_count", mean_a)
        .opt_num("mean_count_prime", mean_b)];
    for row in &r.rows {
        records.push(
            Record::new("epsilon")
                .str("estimator", estimator)
                .num("epsilon", row.epsilon)
                .int("hits", row.hits)
                .num("p_hat", row.p_hat)
                .num("ci_lo", row.ci_lo)
                .num("ci_hi", row.ci_hi)
                .num("rhs", row.rhs)
                .num("rhs_unit", row.rhs_unit)
                .opt_num("c_hat", r.c_hat)
                .num("volume", r.volume)
                .opt_num("volume_prime", r.volume_prime)
                .num("moment", r.moment)
                .num("modulus", row.modulus)
                .num("modulus_arg", row.modulus_arg)
                .num("z", r.z)
                .opt_num("z_prime", r.z_prime)
                .num("slope", row.slope),
        );
    }
    let p_hat = r.rows.iter().map(|x| (x.epsilon, x.p_hat)).collect();
    let rhs = r.rows.iter().map(|x| (x.epsilon, x.rhs)).collect();
    Execution {
        records,
        data: vec![
            ("p_hat.dat".into(), "epsilon p_hat".into(), p_hat),
            ("rhs.dat".into(), "epsilon rhs".into(), rhs),
        ],
        samples: r.samples,
        failed: r.failed,
        first_failure: r.first_failure.clone(),
    }
}

/// Disjointness of closed cube unions, checked face by face.
fn disjoint_by_faces(a: &[Cube], b: &[Cube]) -> bool {
    a.iter().all(|ca| {
        b.iter().all(|cb| {
            (0..ca.dim()).any(|i| {
                let (lo_a, hi_a) = (ca.center[i] - ca.half_side, ca.center[i] + ca.half_side);
                let (lo_b, hi_b) = (cb.center[i] - cb.half_side, cb.center[i] + cb.half_side);
                hi_a < lo_b || hi_b < lo_a
            })
        })
    })
}

/// Brute-force complete/partial verdict used to cross-check the classifier.
fn brute_force_verdict(a: &TwoParticleBox, b: &TwoParticleBox) -> (bool, Vec<PartialCase>) {
    let cubes = [a.cube1(), a.cube2(), b.cube1(), b.cube2()];
    let complete = disjoint_by_faces(&cubes[..2], &cubes[2..]);
    let partial = PartialCase::ALL
        .into_iter()
        .filter(|&case| {
            let i = case as usize;
            let rest: Vec<Cube> = (0..4).filter(|&j| j != i).map(|j| cubes[j].clone()).collect();
            disjoint_by_faces(std::slice::from_ref(&cubes[i]), &rest)
        })
        .collect();
    (complete, partial)
}

/// Random separated pairs classified by the separation dichotomy.
fn geometry_check(section: &GeometryCheckSection, seed: u64) -> Execution {
    let mut records = Vec::new();
    let (mut total, mut classified_total, mut violations_total) = (0, 0, 0);
    for &dim in &section.dims {
        let outcomes: Vec<(bool, bool, [bool; 4], bool)> = (0..section.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = derive_stream(seed, ((dim as u64) << 40) | t);
                let (a, b, _) =
                    random_separated_pair(&mut rng, dim, section.max_half_side, section.radius_factor);
                let v = classify_separation(&a, &b);
                let (complete_bf, partial_bf) = brute_force_verdict(&a, &b);
                let agree = complete_bf == v.complete && partial_bf == v.partial_cases;
                let mut cases = [false; 4];
                for c in &v.partial_cases {
                    cases[*c as usize] = true;
                }
                (v.is_classified(), v.complete, cases, agree)
            })
            .collect();
        let classified = outcomes.iter().filter(|o| o.0).count();
        let mismatches = outcomes.iter().filter(|o| !o.3).count();
        let violations = outcomes.iter().filter(|o| !o.0 || !o.3).count();
        let count_case = |k: usize| outcomes.iter().filter(|o| o.2[k]).count();
        records.push(
            Record::new("geometry")
                .int("dim", dim)
                .int("trials", section.trials)
                .int("classified", classified)
                .int("violations", violations)
                .int("complete", outcomes.iter().filter(|o| o.1).count())
                .int("case_a", count_case(0))
                .int("case_b", count_case(1))
                .int("case_c", count_case(2))
                .int("case_d", count_case(3))
                .int("brute_force_mismatches", mismatches)
                .num("radius_factor", section.radius_factor)
                .num("max_half_side", section.max_half_side),
        );
        total += section.trials;
        classified_total += classified;
        violations_total += violations;
    }
    records.push(
        Record::new("separation")
            .int("trials", total)
            .int("classified", classified_total)
            .int("violations", violations_total),
    );
    Execution {
        records,
        data: Vec::new(),
        samples: total,
        failed: 0,
        first_failure: None,
    }
}

/// Empirical law of the leading orthonormal coefficients of the field.
fn field_diagnostics(
    kernel: &crate::kernel_field::CovarianceKernel,
    bx: &TwoParticleBox,
    h: f64,
    samples: usize,
    seed: u64,
    k: usize,
) -> Result<Execution> {
    let shadow: CellularSet = bx.shadow();
    let space = KernelSpace::assemble(kernel, GridSpec::cells(&shadow, h)?)?;
    let k = k.min(space.dim());
    let sampler = FieldSampler::for_space(&space)?;
    let draws: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = sampler.sample_stream(seed, i);
            coefficients(&space, &v).iter().take(k).copied().collect()
        })
        .collect();
    let n = samples as f64;
    let means: Vec<f64> = (0..k).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / n).collect();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for d in &draws {
        for a in 0..k {
            for b in 0..k {
                cov[(a, b)] += (d[a] - means[a]) * (d[b] - means[b]);
            }
        }
    }
    cov /= n - 1.0;
    let deviation = (cov - DMatrix::<f64>::identity(k, k)).abs().max();

    let mut records = vec![Record::new("diagnostics")
        .int("samples", samples)
        .int("coefficients", k)
        .int("space_dim", space.dim())
        .num("z", space.z())
        .num("max_cov_deviation", deviation)
        .num("orthonormality_defect", space.orthonormality_defect())];
    let mut variances = Vec::new();
    for (j, &mean) in means.iter().enumerate() {
        let column: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (ks_d, ks_p) = ks_one_sample(&column, normal_cdf);
        records.push(
            Record::new("coefficient")
                .int("index", j)
                .num("mean", mean)
                .num("variance", var)
                .num("ks_d", ks_d)
                .num("ks_p", ks_p),
        );
        variances.push((j as f64, var));
    }
    Ok(Execution {
        records,
        data: vec![("coefficient_variance.dat".into(), "index variance".into(), variances)],
        samples,
        failed: 0,
        first_failure: None,
    })
}
