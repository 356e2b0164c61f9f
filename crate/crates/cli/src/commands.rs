use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use sqhard_core::experiment::{power_curve, ExperimentConfig, PowerCurve};
use sqhard_core::metrics::{verify_instance, VerificationReport, VerifyOptions};
use sqhard_core::oracle::{instance_lb_report, sq_lb_arithmetic, LowerBoundReport, PackStats};
use sqhard_core::packing::{pack_batched_svd, pack_frobenius, BatchedSvdOptions, SubspacePack};
use sqhard_core::planting::{
    build_instance, derive_params, read_instance_file, write_samples_csv, CoreChoice, Mode, PlantedInstance, Seeds,
};
use sqhard_core::rng::derive_seed;
use sqhard_core::{json, Error};

use crate::config::{self, output_path, GenerateConfig};
use crate::{CoreKind, ExperimentArgs, GenerateArgs, LowerBoundArgs, PackKind, ReportArgs, SampleArgs, Variant, VerifyArgs};

pub const CONFIG: u8 = 2;
pub const CONSTRUCTION: u8 = 3;
pub const VERIFICATION: u8 = 4;
pub const IO: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Exit code for a library error; `fallback` covers the command-specific
/// failure class.
fn code_for(e: &Error, fallback: u8) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Schema(_) => IO,
        Error::Parameter(_) | Error::ShapeMismatch { .. } | Error::BasisCap { .. } => CONFIG,
        _ => fallback,
    }
}

fn lib(fallback: u8) -> impl Fn(Error) -> Failure {
    move |e| Failure::new(code_for(&e, fallback), e)
}

fn io_err(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::new(IO, anyhow!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(IO, anyhow!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::new(IO, anyhow!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Outcome {
    let mut w = create(path)?;
    let bytes = json::to_vec(value).map_err(io_err(path))?;
    w.write_all(&bytes)
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Failure::new(IO, anyhow!("{}: {e}", path.display())))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> sqhard_core::Result<()>) -> Outcome {
    let mut w = create(path)?;
    f(&mut w).map_err(io_err(path))?;
    w.flush().map_err(|e| Failure::new(IO, anyhow!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn generate(a: &GenerateArgs) -> Outcome {
    let cfg = match &a.config {
        Some(p) => config::load::<GenerateConfig>(p).map_err(|e| Failure::new(CONFIG, e))?,
        None => GenerateConfig::default(),
    };
    let mode: Mode = a
        .mode
        .clone()
        .or(cfg.mode)
        .unwrap_or_else(|| "sqrt-k".into())
        .parse()
        .map_err(lib(CONFIG))?;
    let k = a.k.or(cfg.k).unwrap_or(8);
    let d = a.d.or(cfg.d).unwrap_or(64);
    let c_delta = a.c_delta.or(cfg.c_delta).unwrap_or(0.1);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let epsilon = a.epsilon.or(cfg.epsilon);
    let spec = derive_params(mode, k, epsilon, c_delta, d, Seeds::from_master(seed)).map_err(lib(CONFIG))?;

    let lp = CoreChoice::Lp {
        alpha: a.lp_alpha.or(cfg.lp_alpha),
        n: a.lp_n.or(cfg.lp_n),
    };
    let choice = match a.core.or(cfg.core).unwrap_or(CoreKind::Auto) {
        CoreKind::Explicit => CoreChoice::Explicit,
        CoreKind::Lp => lp,
        CoreKind::Auto => match CoreChoice::for_mode(mode) {
            CoreChoice::Explicit => CoreChoice::Explicit,
            CoreChoice::Lp { .. } => lp,
        },
    };
    let built = build_instance(&spec, &choice).map_err(lib(CONSTRUCTION))?;
    for note in &spec.advisories {
        eprintln!("advisory: {note}");
    }

    let file = built.instance.to_file();
    let opts = VerifyOptions {
        seed: derive_seed(seed, 4),
        ..VerifyOptions::default()
    };
    let report = verify_instance(&file, &opts);
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    if !report.passed() {
        for r in report.failures() {
            eprintln!("gate failed: {} (value {}, threshold {})", r.check, r.value, r.threshold);
        }
        if !a.skip_gates {
            return Err(Failure::new(CONSTRUCTION, anyhow!("instance failed its gates; nothing exported")));
        }
    }

    let out = output_path(a.output.as_deref(), "instance.json");
    write_json(&out, &file)?;
    eprintln!(
        "wrote {} (k = {}, m = {}, t = {}, d = {}, delta = {:.6e})",
        out.display(),
        built.instance.weights().len(),
        spec.m,
        spec.t,
        spec.d,
        spec.delta
    );

    let pack_size = a.pack_size.or(cfg.pack_size).unwrap_or(64);
    if pack_size > 0 {
        let method = a.pack_method.or(cfg.pack_method).unwrap_or(PackKind::BatchedSvd);
        let c = a.pack_c.or(cfg.pack_c).unwrap_or(0.1);
        let (pack, c_used) = build_pack(method, pack_size, spec.m, spec.d, c, spec.seeds.pack)?;
        let pack_path = sibling(&out, "pack.json");
        write_json(&pack_path, &pack.to_file())?;
        let chi2 = built.mixture.chi2_vs_standard().map_err(lib(CONSTRUCTION))?;
        let stats = PackStats {
            nu: pack.max_op_norm(),
            set_size: pack.len() as f64,
            c: c_used,
        };
        eprintln!("wrote {} ({} frames, max |U V'|_op = {:.4})", pack_path.display(), pack.len(), stats.nu);
        match instance_lb_report(&spec, &stats, chi2, None) {
            Ok(lb) => {
                let lb_path = sibling(&out, "lb.json");
                write_json(&lb_path, &lb)?;
                eprintln!("wrote {}", lb_path.display());
                print!("{}", lb.to_text());
            }
            Err(e) => eprintln!("warning: no lower-bound report at these parameters: {e}"),
        }
    }
    Ok(())
}

fn build_pack(
    method: PackKind,
    count: usize,
    m: usize,
    d: usize,
    c: f64,
    seed: u64,
) -> Result<(SubspacePack, Option<f64>), Failure> {
    match method {
        PackKind::BatchedSvd => {
            let pack = pack_batched_svd(&BatchedSvdOptions::new(count, m, d, c, seed)).map_err(lib(CONSTRUCTION))?;
            Ok((pack, Some(c)))
        }
        PackKind::Frobenius => {
            let threshold = 4.0 * (m as f64) * (d as f64).powf(-0.5 + c);
            let pack = pack_frobenius(count, m, d, threshold, seed, 1000 * count).map_err(lib(CONSTRUCTION))?;
            Ok((pack, None))
        }
    }
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    let file = read_instance_file(&a.instance).map_err(io_err(&a.instance))?;
    let opts = VerifyOptions {
        tv_samples: a.tv_samples,
        pdf_points: a.pdf_points,
        seed: a.seed,
        ..VerifyOptions::default()
    };
    let report = verify_instance(&file, &opts);
    print!("{}", report.to_text());
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    if let Some(p) = &a.csv {
        write_with(p, |w| report.write_csv(w))?;
    }
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|r| r.check.as_str()).collect();
        Err(Failure::new(VERIFICATION, anyhow!("failed checks: {}", names.join(", "))))
    }
}

pub fn sample(a: &SampleArgs) -> Outcome {
    if a.n == 0 {
        return Err(Failure::new(CONFIG, anyhow!("-n must be at least 1")));
    }
    let inst = PlantedInstance::import(&a.instance).map_err(lib(VERIFICATION))?;
    let seed = a
        .seed
        .or_else(|| inst.spec().map(|s| s.seeds.sampling))
        .unwrap_or(0);
    let (xs, labels) = inst.sample_labeled(a.n, seed);
    let d = sqhard_core::Density::dim(&inst);
    let out = output_path(a.output.as_deref(), "samples.csv");
    match a.variant {
        Variant::Blind => write_with(&out, |w| write_samples_csv(w, &xs, d, None))?,
        Variant::Keyed => write_with(&out, |w| write_samples_csv(w, &xs, d, Some(&labels)))?,
        Variant::Both => {
            write_with(&out, |w| write_samples_csv(w, &xs, d, None))?;
            let keyed = sibling(&out, "keyed.csv");
            write_with(&keyed, |w| write_samples_csv(w, &xs, d, Some(&labels)))?;
            eprintln!("wrote {}", keyed.display());
        }
    }
    eprintln!("wrote {} ({} samples, d = {d}, seed {seed})", out.display(), a.n);
    Ok(())
}

pub fn experiment(a: &ExperimentArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => config::load::<ExperimentConfig>(p).map_err(|e| Failure::new(CONFIG, e))?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.null_only |= a.null_only;
    cfg.validate().map_err(lib(CONFIG))?;
    let curve = power_curve(&cfg).map_err(lib(CONSTRUCTION))?;
    let out = output_path(a.output.as_deref(), "power.json");
    write_json(&out, &curve)?;
    let csv = out.with_extension("csv");
    write_with(&csv, |w| curve.write_csv(w))?;
    print!("{}", curve.to_text());
    eprintln!("wrote {} and {}", out.display(), csv.display());
    Ok(())
}

enum AnyReport {
    Power(PowerCurve),
    Verification(VerificationReport),
    LowerBound(LowerBoundReport),
}

fn read_report(path: &Path) -> Result<AnyReport, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::new(IO, anyhow!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Failure::new(IO, anyhow!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::new(IO, anyhow!("{}: {e}", path.display()));
    if value.is_array() {
        return Ok(AnyReport::Verification(serde_json::from_value(value).map_err(bad)?));
    }
    if value.get("rows").is_some() {
        return Ok(AnyReport::Power(serde_json::from_value(value).map_err(bad)?));
    }
    if value.get("vstat_parameter").is_some() {
        return Ok(AnyReport::LowerBound(serde_json::from_value(value).map_err(bad)?));
    }
    Err(Failure::new(
        CONFIG,
        anyhow!(
            "{} is not a power curve, verification report or lower-bound report",
            path.display()
        ),
    ))
}

pub fn report(a: &ReportArgs) -> Outcome {
    let rep = read_report(&a.input)?;
    let text_only = a.svg.is_none() && a.csv.is_none();
    match &rep {
        AnyReport::Power(curve) => {
            if let Some(svg) = &a.svg {
                let mut w = create(svg)?;
                w.write_all(curve.to_svg().as_bytes())
                    .and_then(|_| w.flush())
                    .map_err(|e| Failure::new(IO, anyhow!("{}: {e}", svg.display())))?;
                let csv = a.csv.clone().unwrap_or_else(|| svg.with_extension("csv"));
                write_with(&csv, |w| curve.write_csv(w))?;
            } else if let Some(csv) = &a.csv {
                write_with(csv, |w| curve.write_csv(w))?;
            }
            if a.text || text_only {
                print!("{}", curve.to_text());
            }
        }
        AnyReport::Verification(v) => {
            if a.svg.is_some() {
                return Err(Failure::new(CONFIG, anyhow!("SVG output is available for power curves only")));
            }
            if let Some(csv) = &a.csv {
                write_with(csv, |w| v.write_csv(w))?;
            }
            if a.text || text_only {
                print!("{}", v.to_text());
            }
        }
        AnyReport::LowerBound(lb) => {
            if a.svg.is_some() || a.csv.is_some() {
                return Err(Failure::new(CONFIG, anyhow!("lower-bound reports render as text only")));
            }
            print!("{}", lb.to_text());
        }
    }
    Ok(())
}

pub fn lower_bound(a: &LowerBoundArgs) -> Outcome {
    let rep = sq_lb_arithmetic(a.gamma, a.beta, a.s, a.gamma_prime.unwrap_or(a.gamma)).map_err(lib(CONFIG))?;
    print!("{}", rep.to_text());
    if let Some(p) = &a.json {
        write_json(p, &rep)?;
    }
    Ok(())
}
