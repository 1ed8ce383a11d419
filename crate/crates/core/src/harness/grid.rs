//! Mask → complete → image → score, for single cells and whole grids.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::config::{load_scene, DataSource, ExperimentConfig};
use super::io::{load_matrix, save_mask, save_matrix};
use super::render::write_pgm;
use crate::dip::{dip_complete_complex, trace_to_csv, DipConfig};
use crate::error::{Error, Result};
use crate::lowrank::{complete_ialm, complete_nnm, SolverConfig};
use crate::matrix::ComplexMatrix;
use crate::metrics::{add_noise, MetricsReport};
use crate::radar::{fftshift, rd_image, simulate_echo, to_db_image};
use crate::sampling::{
    apply_mask, gen_mask, invert_pretransform, merge_complex, pretransform, split_complex, Mask,
    MaskKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ZeroFill,
    Nnm,
    Ialm,
    Dip,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ZeroFill, Method::Nnm, Method::Ialm, Method::Dip];

    pub fn name(self) -> &'static str {
        match self {
            Method::ZeroFill => "zero-fill",
            Method::Nnm => "nnm",
            Method::Ialm => "ialm",
            Method::Dip => "dip",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Output of one completion run.
#[derive(Clone, Debug, PartialEq)]
pub struct Completed {
    pub matrix: ComplexMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// DIP training traces (real part, imaginary part) as CSV.
    pub traces: Option<(String, String)>,
}

/// Runs `method` on `observed` (already masked). Low-rank NNM works on the
/// real and imaginary parts separately; for column and compressed masks it
/// runs on a pre-transformed copy seeded with `seed`.
pub fn complete(
    method: Method,
    observed: &ComplexMatrix,
    mask: &Mask,
    seed: u64,
    solver: &SolverConfig,
    dip: &DipConfig,
) -> Result<Completed> {
    let observed = apply_mask(observed, mask)?;
    match method {
        Method::ZeroFill => Ok(Completed {
            matrix: observed,
            iterations: 0,
            converged: true,
            traces: None,
        }),
        Method::Nnm => {
            let transform = mask.kind != MaskKind::Pixel;
            let (data, work_mask, perm) = if transform {
                let (d, m, p) = pretransform(&observed, mask, seed)?;
                (d, m, Some(p))
            } else {
                (observed, mask.clone(), None)
            };
            let (re, im) = split_complex(&data);
            let a = complete_nnm(&re, &work_mask, solver)?;
            let b = complete_nnm(&im, &work_mask, solver)?;
            let mut matrix = merge_complex(&a.matrix, &b.matrix)?;
            if let Some(p) = perm {
                matrix = invert_pretransform(&matrix, &p)?;
            }
            Ok(Completed {
                matrix,
                iterations: a.iterations.max(b.iterations),
                converged: a.succeeded() && b.succeeded(),
                traces: None,
            })
        }
        Method::Ialm => {
            let c = complete_ialm(&observed, mask, solver)?;
            if c.unobserved_lines {
                warn!("ialm: mask leaves whole rows or columns unobserved");
            }
            Ok(Completed {
                converged: c.succeeded(),
                iterations: c.iterations,
                matrix: c.matrix,
                traces: None,
            })
        }
        Method::Dip => {
            let cfg = DipConfig {
                seed,
                ..dip.clone()
            };
            let r = dip_complete_complex(&observed, mask, &cfg)?;
            Ok(Completed {
                iterations: r.iterations(),
                converged: r.stopped_early(),
                traces: Some((trace_to_csv(&r.real.trace), trace_to_csv(&r.imag.trace))),
                matrix: r.matrix,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSpec {
    pub method: Method,
    pub kind: MaskKind,
    pub ratio: f64,
    pub seed: u64,
    /// Injected noise level; `None` for clean data.
    pub noise_snr_db: Option<f64>,
}

impl CellSpec {
    pub fn scenario(&self) -> String {
        match self.noise_snr_db {
            Some(snr) => format!("{}+noise{}db", self.kind, snr),
            None => self.kind.to_string(),
        }
    }

    fn dir_name(&self) -> String {
        format!("{}_{}_{}_{}", self.method, self.scenario(), self.ratio, self.seed)
    }
}

#[derive(Clone, Debug)]
pub struct CellSettings<'a> {
    pub solver: &'a SolverConfig,
    pub dip: &'a DipConfig,
    pub top_db: f64,
    pub center: bool,
    /// Where to write the completed matrix, rasters and traces.
    pub artifact_dir: Option<&'a Path>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub report: MetricsReport,
    pub error: Option<String>,
}

/// Seed offset that keeps injected noise independent of the mask draw.
const NOISE_SEED_OFFSET: u64 = 0x006e_6f69_7365;

fn db_raster(image: &ComplexMatrix, top_db: f64, center: bool) -> Result<crate::matrix::RealMatrix> {
    let db = to_db_image(image, top_db)?;
    Ok(if center { fftshift(&db) } else { db })
}

/// One grid cell. `full` is the clean echo used as the scoring reference;
/// noise (if any) is injected before masking. Failures land in the report
/// (NaN scores, `converged = false`) instead of aborting.
pub fn run_cell(full: &ComplexMatrix, spec: &CellSpec, settings: &CellSettings<'_>) -> CellOutcome {
    let start = Instant::now();
    let result = run_cell_inner(full, spec, settings);
    let runtime_s = start.elapsed().as_secs_f64();
    let mut report = MetricsReport {
        method: spec.method.to_string(),
        scenario: spec.scenario(),
        ratio: spec.ratio,
        seed: spec.seed,
        rmse: f64::NAN,
        correlation: f64::NAN,
        contrast: f64::NAN,
        snr_db: None,
        runtime_s,
        iterations: 0,
        converged: false,
    };
    match result {
        Ok((scores, completed, solve_s)) => {
            report.rmse = scores.rmse;
            report.correlation = scores.correlation;
            report.contrast = scores.contrast;
            report.snr_db = Some(scores.snr_db);
            report.runtime_s = solve_s;
            report.iterations = completed.iterations;
            report.converged = completed.converged;
            CellOutcome {
                report,
                error: None,
            }
        }
        Err(e) => {
            warn!("{}: {e}", spec.dir_name());
            CellOutcome {
                report,
                error: Some(e.to_string()),
            }
        }
    }
}

fn run_cell_inner(
    full: &ComplexMatrix,
    spec: &CellSpec,
    settings: &CellSettings<'_>,
) -> Result<(crate::metrics::Scores, Completed, f64)> {
    let (rows, cols) = full.dims();
    let mask = gen_mask(spec.kind, spec.ratio, rows, cols, spec.seed)?;
    let input = match spec.noise_snr_db {
        Some(snr) => add_noise(full, snr, spec.seed.wrapping_add(NOISE_SEED_OFFSET))?,
        None => full.clone(),
    };
    let observed = apply_mask(&input, &mask)?;
    let start = Instant::now();
    let completed = complete(spec.method, &observed, &mask, spec.seed, settings.solver, settings.dip)?;
    let solve_s = start.elapsed().as_secs_f64();
    if !completed.matrix.is_finite() {
        return Err(Error::Network(format!("{} produced non-finite output", spec.method)));
    }
    let reference = rd_image(full)?;
    let image = rd_image(&completed.matrix)?;
    let scores = MetricsReport::score(&reference, &image)?;

    if let Some(dir) = settings.artifact_dir {
        fs::create_dir_all(dir)?;
        save_matrix(&completed.matrix, dir.join("completed.cisr"))?;
        save_mask(&mask, dir.join("mask.imsk"))?;
        if image.as_slice().iter().any(|z| z.norm() > 0.0) {
            write_pgm(
                &db_raster(&image, settings.top_db, settings.center)?,
                settings.top_db,
                dir.join("image.pgm"),
            )?;
        }
        if let Some((re, im)) = &completed.traces {
            fs::write(dir.join("trace_re.csv"), re)?;
            fs::write(dir.join("trace_im.csv"), im)?;
        }
    }
    Ok((scores, completed, solve_s))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub scenario: String,
    pub ratio: f64,
    pub runs: usize,
    pub rmse: f64,
    pub correlation: f64,
    pub contrast: f64,
    pub runtime_s: f64,
    /// Runs that failed or did not converge.
    pub flagged: usize,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str =
        "method,scenario,ratio,runs,rmse,correlation,contrast,runtime_s,flagged";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.scenario,
            self.ratio,
            self.runs,
            self.rmse,
            self.correlation,
            self.contrast,
            self.runtime_s,
            self.flagged
        )
    }
}

/// Median ignoring NaNs; NaN when nothing is left.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per (method, scenario, ratio) medians over seeds, in first-seen order.
pub fn summarize(reports: &[MetricsReport]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(String, String, u64), Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        let key = (r.method.clone(), r.scenario.clone(), r.ratio.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let col = |f: fn(&MetricsReport) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                method: key.0.clone(),
                scenario: key.1.clone(),
                ratio: f64::from_bits(key.2),
                runs: rows.len(),
                rmse: col(|r| r.rmse),
                correlation: col(|r| r.correlation),
                contrast: col(|r| r.contrast),
                runtime_s: col(|r| r.runtime_s),
                flagged: rows.iter().filter(|r| !r.converged || r.rmse.is_nan()).count(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridReport {
    pub reports: Vec<MetricsReport>,
    pub errors: Vec<Option<String>>,
    pub summary: Vec<SummaryRow>,
    pub results_csv: String,
    pub summary_csv: String,
    pub timing_csv: String,
}

fn load_source(source: &DataSource) -> Result<ComplexMatrix> {
    match source {
        DataSource::Scene(path) => simulate_echo(&load_scene(path)?),
        DataSource::Matrix(path) => load_matrix(path),
    }
}

/// Every cell of the grid in a fixed order: noise level (clean first),
/// scenario, ratio, seed, method.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<CellSpec> {
    let noise: Vec<Option<f64>> = std::iter::once(None)
        .chain(cfg.noise_snr_db.iter().map(|&s| Some(s)))
        .collect();
    let mut cells = Vec::new();
    for &noise_snr_db in &noise {
        for &kind in &cfg.scenarios {
            for &ratio in &cfg.ratios {
                for &seed in &cfg.seeds {
                    for &method in &cfg.methods {
                        cells.push(CellSpec {
                            method,
                            kind,
                            ratio,
                            seed,
                            noise_snr_db,
                        });
                    }
                }
            }
        }
    }
    cells
}

/// Runs the whole grid and writes `results.csv`, `summary.csv`,
/// `timing.csv`, the reference raster and per-cell artifacts under
/// `output_dir`.
///
/// With `single_thread` everything runs on one thread and `runtime_s` in
/// `results.csv` / `summary.csv` is written as 0 so reruns are
/// byte-identical; measured times go to `timing.csv` either way.
pub fn run_grid(cfg: &ExperimentConfig, single_thread: bool) -> Result<GridReport> {
    cfg.validate()?;
    let full = load_source(&cfg.source)?;
    if full.is_empty() {
        return Err(Error::invalid("input matrix is empty"));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let reference = rd_image(&full)?;
    write_pgm(
        &db_raster(&reference, cfg.top_db, cfg.center)?,
        cfg.top_db,
        cfg.output_dir.join("reference.pgm"),
    )?;

    let cells = grid_cells(cfg);
    info!("running {} cells", cells.len());
    let cell_root = cfg.output_dir.join("cells");
    let run = |spec: &CellSpec| {
        let dir: Option<PathBuf> = cfg.artifacts.then(|| cell_root.join(spec.dir_name()));
        let settings = CellSettings {
            solver: &cfg.solver,
            dip: &cfg.dip,
            top_db: cfg.top_db,
            center: cfg.center,
            artifact_dir: dir.as_deref(),
        };
        run_cell(&full, spec, &settings)
    };
    let outcomes: Vec<CellOutcome> = if single_thread {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| cells.iter().map(run).collect())
    } else {
        cells.par_iter().map(run).collect()
    };

    let mut timing_csv = String::from("method,scenario,ratio,seed,runtime_s\n");
    for o in &outcomes {
        let r = &o.report;
        timing_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.scenario, r.ratio, r.seed, r.runtime_s
        ));
    }
    let mut reports: Vec<MetricsReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    if single_thread {
        for r in &mut reports {
            r.runtime_s = 0.0;
        }
    }
    let summary = summarize(&reports);

    let mut results_csv = format!("{}\n", MetricsReport::CSV_HEADER);
    for r in &reports {
        results_csv.push_str(&r.to_csv_row());
        results_csv.push('\n');
    }
    let mut summary_csv = format!("{}\n", SummaryRow::CSV_HEADER);
    for s in &summary {
        summary_csv.push_str(&s.to_csv_row());
        summary_csv.push('\n');
    }
    fs::write(cfg.output_dir.join("results.csv"), &results_csv)?;
    fs::write(cfg.output_dir.join("summary.csv"), &summary_csv)?;
    fs::write(cfg.output_dir.join("timing.csv"), &timing_csv)?;

    Ok(GridReport {
        errors: outcomes.into_iter().map(|o| o.error).collect(),
        reports,
        summary,
        results_csv,
        summary_csv,
        timing_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{RadarParams, Scene};

    fn echo() -> ComplexMatrix {
        simulate_echo(&Scene::random_compact(RadarParams::with_grid(16, 16), 3, 2, 1).unwrap()).unwrap()
    }

    fn settings<'a>(solver: &'a SolverConfig, dip: &'a DipConfig) -> CellSettings<'a> {
        CellSettings {
            solver,
            dip,
            top_db: 20.0,
            center: false,
            artifact_dir: None,
        }
    }

    fn spec(method: Method, kind: MaskKind, ratio: f64) -> CellSpec {
        CellSpec {
            method,
            kind,
            ratio,
            seed: 0,
            noise_snr_db: None,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svt".parse::<Method>().is_err());
    }

    #[test]
    fn zero_fill_cells() {
        let (solver, dip) = (SolverConfig::default(), DipConfig::default());
        let s = settings(&solver, &dip);
        let full = echo();
        let none = run_cell(&full, &spec(Method::ZeroFill, MaskKind::Pixel, 0.0), &s);
        assert_eq!(none.report.rmse, 0.0);
        assert!((none.report.correlation - 1.0).abs() < 1e-12);
        let half = run_cell(&full, &spec(Method::ZeroFill, MaskKind::Pixel, 0.5), &s);
        assert!(half.report.rmse > 0.0);
        assert!(half.report.converged);
        half.report.validate().unwrap();
    }

    #[test]
    fn nnm_uses_pretransform_on_column_masks() {
        let (solver, dip) = (SolverConfig::default(), DipConfig::default());
        let out = run_cell(&echo(), &spec(Method::Nnm, MaskKind::Column, 0.3), &settings(&solver, &dip));
        assert!(out.error.is_none(), "{:?}", out.error);
        assert!(out.report.rmse.is_finite());
    }

    #[test]
    fn ialm_column_cell_is_flagged() {
        let (solver, dip) = (SolverConfig::default(), DipConfig::default());
        let out = run_cell(&echo(), &spec(Method::Ialm, MaskKind::Column, 0.7), &settings(&solver, &dip));
        assert!(!out.report.converged);
    }

    #[test]
    fn scenario_labels() {
        let mut s = spec(Method::Dip, MaskKind::Compressed, 0.5);
        assert_eq!(s.scenario(), "compressed");
        s.noise_snr_db = Some(-10.0);
        assert_eq!(s.scenario(), "compressed+noise-10db");
    }

    #[test]
    fn medians_and_summary() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, f64::NAN, 2.0, 3.0]), 2.5);
        assert!(median(&[f64::NAN]).is_nan());
        let base = MetricsReport {
            method: "nnm".into(),
            scenario: "pixel".into(),
            ratio: 0.5,
            seed: 0,
            rmse: 0.1,
            correlation: 0.9,
            contrast: 1.0,
            snr_db: None,
            runtime_s: 1.0,
            iterations: 1,
            converged: true,
        };
        let reports: Vec<_> = [0.3, 0.1, 0.2]
            .iter()
            .enumerate()
            .map(|(i, &rmse)| MetricsReport {
                seed: i as u64,
                rmse,
                converged: i != 1,
                ..base.clone()
            })
            .collect();
        let s = summarize(&reports);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].runs, s[0].rmse, s[0].flagged), (3, 0.2, 1));
    }
}
