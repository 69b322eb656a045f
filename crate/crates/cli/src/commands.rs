use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use diffpad::metrics::box_miou;
use diffpad::pipeline::derive_seed;
use diffpad::suite::{run_case, suite_cases, SuiteSpec};
use diffpad::theory::{empirical_bound_check, BoundCheckConfig};
use diffpad::{
    localize, DiffPadConfig, GaussianPrior, Image, PatchBox, PatchKind, ResultSummary, ScheduleConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_denoiser, load_config, RunArgs};
use crate::io::{list_images, read_image, write_image};

#[derive(Debug, Args)]
pub struct DefendArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defended image; diagnostics go to `<output>.json`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Known patch location as `top,left,side`; adds an miou field.
    #[arg(long)]
    pub truth_box: Option<BoxArg>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct VerifyBoundArgs {
    /// Dimension of the standard normal data distribution.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Per-coordinate perturbation of the patched input.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Number of perturbed coordinates.
    #[arg(long, default_value_t = 4)]
    pub area: usize,
    /// Euler–Maruyama steps of the reverse SDE.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON config; only its schedule section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of clean images to patch.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// CSV report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Patch areas in percent of the image area.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 5.0, 7.0])]
    pub sizes: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = PatchKind::ALL.map(KindArg))]
    pub kinds: Vec<KindArg>,
    /// Placements per (size, kind).
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxArg(pub PatchBox);

impl FromStr for BoxArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [top, left, side] = parts[..] else {
            return Err(format!("expected top,left,side, got `{s}`"));
        };
        let num = |v: &str| v.parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
        let side = num(side)?;
        if side == 0 {
            return Err("side must be at least 1".into());
        }
        Ok(BoxArg(PatchBox::new(num(top)?, num(left)?, side)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindArg(pub PatchKind);

impl FromStr for KindArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse().map(KindArg).map_err(|e: diffpad::Error| e.to_string())
    }
}

impl std::fmt::Display for KindArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.name())
    }
}

#[derive(Serialize)]
struct DefendReport<'a> {
    input: &'a Path,
    output: &'a Path,
    #[serde(flatten)]
    summary: ResultSummary,
    config: &'a DiffPadConfig,
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn same_format(a: &Path, b: &Path) -> bool {
    let ext = |p: &Path| p.extension().map(|e| e.to_ascii_lowercase());
    ext(a).is_some() && ext(a) == ext(b)
}

pub fn defend(args: &DefendArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let x = read_image(&args.input)?;
    let den = build_denoiser(&cfg, x.shape(), None)?;
    let mut result = diffpad::defend(&x, &cfg, den.as_ref())?;
    if args.run.no_timing {
        result = result.without_timing();
    }
    if result.clean_flag && same_format(&args.input, &args.output) {
        // untouched input: keep the original encoding byte for byte
        std::fs::copy(&args.input, &args.output)
            .with_context(|| format!("cannot write {}", args.output.display()))?;
    } else {
        write_image(&args.output, &result.output)?;
    }
    log::info!(
        "{}: clean={} detected={:?} mse={:.3}",
        args.input.display(),
        result.clean_flag,
        result.detected,
        result.diagnostics.restoration_mse
    );
    let report = DefendReport {
        input: &args.input,
        output: &args.output,
        summary: result.summary(),
        config: &cfg,
    };
    write_json(Some(&sidecar_path(&args.output)), &report)
}

#[derive(Serialize)]
struct LocalizeReport {
    clean_flag: bool,
    detected: Option<PatchBox>,
    restoration_mse: f64,
    tau: Option<f64>,
    estimated_area: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<PatchBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    miou: Option<f64>,
    runtime_ms: f64,
}

pub fn localize_cmd(args: &LocalizeArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let x = read_image(&args.input)?;
    let truth = args.truth_box.map(|b| b.0);
    if let Some(b) = &truth {
        b.check_fits(x.height(), x.width())?;
    }
    let den = build_denoiser(&cfg, x.shape(), None)?;
    let start = std::time::Instant::now();
    let loc = localize(&x, &cfg, den.as_ref())?;
    let runtime_ms = if args.run.no_timing {
        0.0
    } else {
        start.elapsed().as_secs_f64() * 1e3
    };
    let report = LocalizeReport {
        clean_flag: loc.clean_flag,
        detected: loc.detected,
        restoration_mse: loc.restoration_mse,
        tau: loc.tau,
        estimated_area: loc.estimated_area,
        truth,
        miou: truth.map(|t| box_miou(loc.detected.as_ref(), Some(&t))),
        runtime_ms,
    };
    write_json(args.output.as_deref(), &report)
}

pub fn verify_bound(args: &VerifyBoundArgs) -> Result<()> {
    let schedule: ScheduleConfig = load_config(args.config.as_deref())?.schedule;
    let sched = schedule.build()?;
    let prior = GaussianPrior::standard(args.dim)?;
    let cfg = BoundCheckConfig {
        epsilon: args.epsilon,
        area: args.area,
        xi: args.xi,
        trials: args.trials,
        steps: args.steps,
        seed: args.seed,
    };
    let report = empirical_bound_check(&prior, &cfg, &sched)?;
    write_json(None, &report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub image_id: String,
    pub clean_flag: bool,
    pub mse: f64,
    pub tau: Option<f64>,
    pub area: Option<usize>,
    pub box_top: Option<usize>,
    pub box_left: Option<usize>,
    pub box_side: Option<usize>,
    pub miou: f64,
    pub psnr: f64,
    pub runtime_ms: f64,
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    if !args.input_dir.is_dir() {
        bail!("{} is not a directory", args.input_dir.display());
    }
    let paths = list_images(&args.input_dir)?;
    let images: Vec<Image> = paths.iter().map(|p| read_image(p)).collect::<Result<_>>()?;
    let spec = SuiteSpec {
        fractions: args.sizes.iter().map(|p| p / 100.0).collect(),
        kinds: args.kinds.iter().map(|k| k.0).collect(),
        seeds: args.seeds,
    };

    let mut jobs = Vec::new();
    let mut denoisers = Vec::new();
    for (i, (path, img)) in paths.iter().zip(&images).enumerate() {
        // one denoiser per distinct shape; the common case is a single one
        if !denoisers.iter().any(|(s, _)| *s == img.shape()) {
            denoisers.push((img.shape(), build_denoiser(&cfg, img.shape(), Some(&paths))?));
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let image_seed = derive_seed(cfg.pipeline.seed, 1000 + i as u64);
        for (j, case) in suite_cases(&spec, img.height(), img.width(), i as u64, cfg.pipeline.seed)?
            .into_iter()
            .enumerate()
        {
            let mut c = cfg.clone();
            c.pipeline.seed = derive_seed(image_seed, j as u64);
            jobs.push((format!("{stem}/{}", case.label()), i, case, c));
        }
    }

    let rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|(id, i, case, c)| {
            let img = &images[*i];
            let den = &denoisers
                .iter()
                .find(|(s, _)| *s == img.shape())
                .expect("built above")
                .1;
            let out = run_case(img, case, c, den.as_ref())?;
            let r = &out.result;
            Ok(BenchRow {
                image_id: id.clone(),
                clean_flag: r.clean_flag,
                mse: r.diagnostics.restoration_mse,
                tau: r.diagnostics.tau,
                area: r.diagnostics.estimated_area,
                box_top: r.detected.map(|b| b.top),
                box_left: r.detected.map(|b| b.left),
                box_side: r.detected.map(|b| b.side),
                miou: out.miou,
                psnr: out.psnr,
                runtime_ms: if args.run.no_timing {
                    0.0
                } else {
                    r.diagnostics.runtime_ms
                },
            })
        })
        .collect::<Result<_>>()?;

    let sink: Box<dyn Write> = match &args.output {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?)
        }
        None => Box::new(std::io::stdout()),
    };
    write_csv(sink, &rows)
}

pub fn write_csv(sink: impl Write, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const CSV_HEADER: [&str; 11] = [
    "image_id",
    "clean_flag",
    "mse",
    "tau",
    "area",
    "box_top",
    "box_left",
    "box_side",
    "miou",
    "psnr",
    "runtime_ms",
];
