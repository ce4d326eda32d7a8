//! The four subcommands. Each writes only inside its output directory and
//! returns a summary for the caller to print.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dareplane::grid::{psnr, read_ppm, write_ppm, Grid2, Image};
use dareplane::rep::{FieldKind, FieldSpec};
use dareplane::sparsity::{inspect_archive, MAGIC};
use dareplane::train::{fit_with, FitConfig, FitReport, Model, ModelSpec};
use dareplane::wavelet::{
    dtcwt2d_forward, dtcwt2d_inverse, orientation_deg, subband_atom, textured_crop, FilterBank, FilterBankName,
    PlaneTransform, SUBBAND_ANGLES,
};

use crate::config::Config;
use crate::scene::build_dataset;
use crate::CliError;

/// Coefficient budgets of two arms may differ by at most this fraction.
pub const BUDGET_TOLERANCE: f64 = 0.05;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn transform_label(t: &PlaneTransform) -> String {
    match t {
        PlaneTransform::Dtcwt { bank, levels } => format!("dtcwt {bank} level {levels}"),
        PlaneTransform::Dwt { wavelet, levels } => format!("dwt {wavelet} level {levels}"),
    }
}

/// Plane coefficients of a model with this geometry.
pub fn coefficient_budget(spec: &ModelSpec) -> Result<usize, CliError> {
    let count = |s: &FieldSpec| -> Result<usize, CliError> {
        Ok(dareplane::rep::DaRePlaneField::zeros(s)?.coefficient_count())
    };
    Ok(count(&spec.density_spec())? + count(&spec.appearance_spec())?)
}

#[derive(Debug)]
pub struct FitOutcome {
    pub config: FitConfig,
    pub model: Model,
    pub report: FitReport,
    pub metrics: String,
    pub out_dir: PathBuf,
}

fn metrics_text(cfg: &Config, fit: &FitConfig, model: &Model, report: &FitReport, frames: &[usize]) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "scene\t{}", cfg.raw("scene").unwrap_or(""));
    let _ = writeln!(w, "transform\t{}", transform_label(&fit.model.transform));
    let _ = writeln!(w, "steps\t{}", fit.schedule.steps);
    let _ = writeln!(w, "seed\t{}", fit.seed);
    let _ = writeln!(w, "view\tframe\tpsnr\tssim");
    for (i, v) in report.views.iter().enumerate() {
        let _ = writeln!(w, "{i}\t{}\t{}\t{:.6}", frames[i], fmt_db(v.psnr), v.ssim);
    }
    let _ = writeln!(w, "mean_psnr\t{}", fmt_db(report.mean_psnr()));
    let _ = writeln!(w, "mean_ssim\t{:.6}", report.mean_ssim());
    if fit.model.kind == FieldKind::Dynamic {
        let _ = writeln!(w, "frame\tpsnr");
        for (f, p) in &report.frame_psnr {
            let _ = writeln!(w, "{f}\t{}", fmt_db(*p));
        }
        let _ = writeln!(w, "frame_psnr_variance\t{:.6}", report.frame_psnr_variance());
    }
    let _ = writeln!(w, "sparsity\t{:.6}", report.sparsity);
    let _ = writeln!(w, "archive_bytes\t{}", report.archive.len());
    let _ = writeln!(w, "coefficients\t{}", model.coefficient_count());
    s
}

/// Fits the configured scene and writes `config.txt`, `train.log`,
/// `metrics.txt`, `model.dare` and held-out renders into `out`.
pub fn fit(cfg: &Config, out: &Path) -> Result<FitOutcome, CliError> {
    let fit_cfg = cfg.fit_config()?;
    let data = build_dataset(cfg)?;
    create_dir(out)?;
    write_file(&out.join("config.txt"), cfg.echo().as_bytes())?;
    let log_path = out.join("train.log");
    let file = fs::File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let mut log = BufWriter::new(file);
    let mut log_err = None;
    let result = fit_with(&data, &fit_cfg, &mut |entry| {
        if log_err.is_none() {
            // flushed per line so the log can be followed during a run
            if let Err(e) = writeln!(log, "{}", entry.line()).and_then(|()| log.flush()) {
                log_err = Some(e);
            }
        }
    });
    let flushed = log.flush();
    if let Some(e) = log_err.or(flushed.err()) {
        return Err(CliError::io(&log_path, e));
    }
    let (model, report) = result?;
    let frames: Vec<usize> = data.test.iter().map(|v| v.frame).collect();
    let metrics = metrics_text(cfg, &fit_cfg, &model, &report, &frames);
    write_file(&out.join("metrics.txt"), metrics.as_bytes())?;
    write_file(&out.join("model.dare"), &report.archive)?;
    for (i, (img, v)) in report.renders.iter().zip(&data.test).enumerate() {
        write_ppm(out.join(format!("render_{i:03}.ppm")), img)?;
        write_ppm(out.join(format!("truth_{i:03}.ppm")), &v.image)?;
    }
    Ok(FitOutcome {
        config: fit_cfg,
        model,
        report,
        metrics,
        out_dir: out.to_path_buf(),
    })
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub a: FitOutcome,
    pub b: FitOutcome,
    pub budget_a: usize,
    pub budget_b: usize,
    pub delta_psnr: f64,
    pub report: String,
}

/// The DWT baseline of `cfg`: the same run with the plane transform
/// swapped and ranks scaled so both arms hold about as many coefficients.
pub fn baseline_config(cfg: &Config) -> Result<Config, CliError> {
    let a = cfg.fit_config()?;
    let mut b = cfg.clone();
    b.set("transform", "dwt")?;
    b.set("wavelet", cfg.str("baseline_wavelet")?)?;
    b.set("level", cfg.str("baseline_level")?)?;
    let tb = b.transform()?;
    let factor = (a.model.transform.redundancy() / tb.redundancy()).round().max(1.0) as usize;
    let scale = |r: [usize; 3]| r.map(|x| (x * factor).to_string()).join(",");
    b.set("density_ranks", scale(a.model.density_ranks))?;
    b.set("appearance_ranks", scale(a.model.appearance_ranks))?;
    Ok(b)
}

/// Runs `fit` for both arms (into `out/a` and `out/b`) after checking that
/// their coefficient budgets agree, then writes `compare.txt` and
/// side-by-side renders (truth, arm a, arm b).
pub fn compare_configs(cfg_a: &Config, cfg_b: &Config, out: &Path) -> Result<CompareOutcome, CliError> {
    let (fa, fb) = (cfg_a.fit_config()?, cfg_b.fit_config()?);
    let (budget_a, budget_b) = (coefficient_budget(&fa.model)?, coefficient_budget(&fb.model)?);
    let gap = (budget_a as f64 - budget_b as f64).abs() / budget_a.max(budget_b) as f64;
    if gap > BUDGET_TOLERANCE {
        return Err(CliError::Config(format!(
            "coefficient budgets differ by {:.1}% ({budget_a} vs {budget_b}), limit {:.0}%",
            gap * 100.0,
            BUDGET_TOLERANCE * 100.0
        )));
    }
    create_dir(out)?;
    let a = fit(cfg_a, &out.join("a"))?;
    let b = fit(cfg_b, &out.join("b"))?;
    let delta_psnr = a.report.mean_psnr() - b.report.mean_psnr();

    let mut s = String::new();
    let _ = writeln!(
        s,
        "arm\ttransform\tcoefficients\tmean_psnr\tmean_ssim\tframe_psnr_variance"
    );
    for (name, arm, budget) in [("a", &a, budget_a), ("b", &b, budget_b)] {
        let _ = writeln!(
            s,
            "{name}\t{}\t{budget}\t{}\t{:.6}\t{:.6}",
            transform_label(&arm.config.model.transform),
            fmt_db(arm.report.mean_psnr()),
            arm.report.mean_ssim(),
            arm.report.frame_psnr_variance()
        );
    }
    let _ = writeln!(s, "delta_psnr\t{}", fmt_db(delta_psnr));
    let _ = writeln!(s, "frame\tpsnr_a\tpsnr_b");
    for ((f, pa), (_, pb)) in a.report.frame_psnr.iter().zip(&b.report.frame_psnr) {
        let _ = writeln!(s, "{f}\t{}\t{}", fmt_db(*pa), fmt_db(*pb));
    }
    write_file(&out.join("compare.txt"), s.as_bytes())?;

    let truth = build_dataset(cfg_a)?;
    for (i, ((ra, rb), v)) in a
        .report
        .renders
        .iter()
        .zip(&b.report.renders)
        .zip(&truth.test)
        .enumerate()
    {
        write_ppm(
            out.join(format!("side_by_side_{i:03}.ppm")),
            &hstack(&[&v.image, ra, rb]),
        )?;
    }
    Ok(CompareOutcome {
        a,
        b,
        budget_a,
        budget_b,
        delta_psnr,
        report: s,
    })
}

/// [`compare_configs`] against the DWT baseline of `cfg`.
pub fn compare(cfg: &Config, out: &Path) -> Result<CompareOutcome, CliError> {
    compare_configs(cfg, &baseline_config(cfg)?, out)
}

/// Images of equal height placed left to right.
fn hstack(imgs: &[&Image]) -> Image {
    let h = imgs[0].height();
    let w: usize = imgs.iter().map(|i| i.width()).sum();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for img in imgs {
            for x in 0..img.width() {
                data.extend_from_slice(img.pixel(x, y));
            }
        }
    }
    Image::from_vec(w, h, 3, data).expect("sized buffer")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    pub relative_error: f64,
    pub psnr: f64,
    /// Measured orientation of each of the six subband atoms, degrees.
    pub orientations: [f64; 6],
    pub subband_files: Vec<PathBuf>,
    pub report: String,
}

fn luminance(img: &Image) -> Grid2 {
    let c = img.channels();
    Grid2::from_fn(img.height(), img.width(), |i, j| {
        img.pixel(j, i).iter().sum::<f64>() / c as f64
    })
}

/// Analyzes an image (the `image` key, or a synthetic texture of `size`)
/// and writes the magnitude of every real and imaginary subband, scaled by
/// the largest coefficient, plus `transform.txt`.
pub fn transform(cfg: &Config, out: &Path) -> Result<TransformOutcome, CliError> {
    let bank: FilterBankName = cfg
        .str("bank")?
        .parse()
        .map_err(|e: dareplane::Error| CliError::Config(format!("key 'bank': {e}")))?;
    let levels: usize = cfg.get("level")?;
    if levels == 0 {
        return Err(CliError::Config("key 'level' must be positive".into()));
    }
    let plane = match cfg.raw("image") {
        Some(p) => luminance(&read_ppm(p)?),
        None => textured_crop(cfg.get("seed")?, cfg.get("size")?),
    };
    let fb = FilterBank::new(bank);
    let coeffs = dtcwt2d_forward(&plane, levels, &fb)?;
    let recon = dtcwt2d_inverse(&coeffs, &fb)?;
    let relative_error = recon.rel_l2(&plane);
    let peak = plane.max_abs().max(f64::MIN_POSITIVE);
    let psnr = psnr(&Image::from_grid(&recon), &Image::from_grid(&plane), peak)?;

    create_dir(out)?;
    let scale = coeffs
        .levels
        .iter()
        .flat_map(|l| l.real.iter().chain(&l.imag))
        .map(|g| g.max_abs())
        .fold(0.0, f64::max);
    let mut subband_files = Vec::new();
    for (li, level) in coeffs.levels.iter().enumerate() {
        for (part, grids) in [("re", &level.real), ("im", &level.imag)] {
            for (k, g) in grids.iter().enumerate() {
                let mag = g.map(|v| if scale > 0.0 { v.abs() / scale } else { 0.0 });
                let path = out.join(format!(
                    "subband_l{}_{part}_{:+03}.ppm",
                    li + 1,
                    SUBBAND_ANGLES[k] as i64
                ));
                write_ppm(&path, &Image::from_grid(&mag))?;
                subband_files.push(path);
            }
        }
    }
    // Level-1 atoms are too small to carry a clear orientation; measure
    // the second level of a two-level transform.
    let mut orientations = [0.0; 6];
    for (k, o) in orientations.iter_mut().enumerate() {
        *o = orientation_deg(&subband_atom(bank, 2, 2, k, 64)?);
    }

    let mut s = String::new();
    let _ = writeln!(s, "bank\t{bank}");
    let _ = writeln!(s, "levels\t{levels}");
    let _ = writeln!(s, "size\t{}x{}", plane.rows(), plane.cols());
    let _ = writeln!(s, "relative_error\t{relative_error:.3e}");
    let _ = writeln!(s, "reconstruction_psnr\t{}", fmt_db(psnr));
    let _ = writeln!(s, "subband\tnominal_deg\tmeasured_deg");
    for k in 0..6 {
        let _ = writeln!(s, "{k}\t{:+.0}\t{:+.2}", SUBBAND_ANGLES[k], orientations[k]);
    }
    write_file(&out.join("transform.txt"), s.as_bytes())?;
    Ok(TransformOutcome {
        relative_error,
        psnr,
        orientations,
        subband_files,
        report: s,
    })
}

/// Reads an archive (the file itself, or the `archive` key of a config)
/// and reports its header, sizes and checksum status.
pub fn inspect(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    // A text file that parses as a config names the archive; anything
    // else is inspected as an archive.
    let config = match std::str::from_utf8(&bytes) {
        Ok(text) if !bytes.starts_with(&MAGIC) => Some(Config::parse(text)?),
        _ => None,
    };
    let bytes = match config {
        Some(cfg) => {
            let p = PathBuf::from(cfg.str("archive")?);
            fs::read(&p).map_err(|e| CliError::io(&p, e))?
        }
        None => bytes,
    };
    let info = inspect_archive(&bytes).map_err(dareplane::Error::from)?;
    let mut s = String::new();
    let _ = writeln!(s, "format version {}", info.version);
    let _ = writeln!(s, "total bytes {}", info.total_bytes);
    let _ = writeln!(s, "quantized {}", if info.quantized { "8-bit" } else { "no" });
    for (i, f) in info.fields.iter().enumerate() {
        let _ = writeln!(
            s,
            "field {i}: {} n {} t {} ranks {:?} feature_dim {} out_dim {} {}",
            match f.kind {
                FieldKind::Dynamic => "dynamic",
                FieldKind::Static => "static",
            },
            f.n,
            f.t,
            f.ranks,
            f.feature_dim,
            f.out_dim,
            transform_label(&f.transform)
        );
    }
    let _ = writeln!(s, "mask entries {}", info.mask_entries);
    let _ = writeln!(s, "retained {}", info.retained);
    let _ = writeln!(s, "sparsity {:.6}", info.sparsity());
    let _ = writeln!(s, "mask stream bytes {}", info.mask_stream_bytes);
    let _ = writeln!(s, "value bytes {}", info.value_bytes);
    let _ = writeln!(s, "dense bytes {}", info.dense_bytes);
    let _ = writeln!(s, "CRC OK ({:08x})", info.crc);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_matches_budget() {
        let c = Config::parse("scene=rotating-texture-4d\nsteps=1\ndensity_ranks=2\nappearance_ranks=3\n").unwrap();
        let b = baseline_config(&c).unwrap();
        assert_eq!(b.str("transform").unwrap(), "dwt");
        assert_eq!(b.str("density_ranks").unwrap(), "8,8,8");
        let (ba, bb) = (
            coefficient_budget(&c.fit_config().unwrap().model).unwrap(),
            coefficient_budget(&b.fit_config().unwrap().model).unwrap(),
        );
        assert_eq!(ba, bb);
    }

    #[test]
    fn budget_mismatch_is_rejected() {
        let c = Config::parse("scene=rotating-texture-4d\nsteps=1\n").unwrap();
        let mut b = baseline_config(&c).unwrap();
        b.set("appearance_ranks", "40").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let e = compare_configs(&c, &b, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("budgets"));
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn hstack_places_side_by_side() {
        let a = Image::filled(2, 2, &[1.0, 0.0, 0.0]).unwrap();
        let b = Image::filled(3, 2, &[0.0, 1.0, 0.0]).unwrap();
        let s = hstack(&[&a, &b]);
        assert_eq!((s.width(), s.height()), (5, 2));
        assert_eq!(s.pixel(1, 1), &[1.0, 0.0, 0.0]);
        assert_eq!(s.pixel(2, 0), &[0.0, 1.0, 0.0]);
    }
}
