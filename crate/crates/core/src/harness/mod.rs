//! Experiment runners: sum-rate sweep, convergence traces and radiation
//! patterns. Each runner returns its results in memory; the `write_*`
//! functions serialize them as CSV with 17 significant digits.
//!
//! Realizations are dispatched to the current rayon pool. Every random
//! quantity is seeded from `(master seed, realization, SNR index)` through
//! [`crate::seed::derive`] and results are gathered in realization order, so
//! output is identical for any worker count.

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::{draw_channels, fixed_channels, noise_power, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::{angle_grid, radiation_pattern, sum_rate, PatternPoint, PATTERN_FLOOR_DB};
use crate::optimizer::multi_init_dab;
use crate::pa::PaParams;
use crate::precoding::{mrt, project_power, zf};
use crate::seed;
use crate::units::{db_to_linear, dbm_to_watts, ratio_db_floored};

pub use config::{PatternConfig, PrecoderKind, SweepConfig};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs `f` on a dedicated pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn channel_seed(master: u64, realization: usize) -> u64 {
    seed::derive(master, seed::DOMAIN_CHANNEL, realization as u64)
}

fn job_seed(master: u64, realization: usize, snr_index: usize) -> u64 {
    seed::derive(
        seed::derive(master, seed::DOMAIN_JOB, realization as u64),
        seed::DOMAIN_INIT,
        snr_index as u64,
    )
}

/// One evaluated (SNR, realization, precoder) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub realization: usize,
    pub precoder: PrecoderKind,
    pub sum_rate: f64,
    /// Winning initialization for DAB rows.
    pub init: Option<String>,
}

/// Per-SNR mean and standard error of one precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub snr_db: f64,
    pub precoder: PrecoderKind,
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResults {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    /// Non-fatal problems, e.g. a realization where ZF was singular.
    pub warnings: Vec<String>,
}

impl SweepResults {
    pub fn rates(&self, snr_db: f64, precoder: PrecoderKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.snr_db == snr_db && r.precoder == precoder)
            .map(|r| r.sum_rate)
            .collect()
    }

    pub fn summary_for(&self, snr_db: f64, precoder: PrecoderKind) -> Option<&SweepSummary> {
        self.summary
            .iter()
            .find(|s| s.snr_db == snr_db && s.precoder == precoder)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct RealizationOutput {
    rows: Vec<SweepRow>,
    warnings: Vec<String>,
    /// Best-so-far DAB trace per SNR index.
    traces: Vec<Vec<f64>>,
}

fn run_realization(
    plan: &config::SweepPlan,
    realization: usize,
    want: &[PrecoderKind],
) -> Result<RealizationOutput> {
    let channels = draw_channels(&plan.geometry, channel_seed(plan.seed, realization))?;
    let pa = &plan.pa;
    let mut out = RealizationOutput {
        rows: Vec::new(),
        warnings: Vec::new(),
        traces: Vec::new(),
    };
    let mrt_p = mrt(&channels).and_then(|p| project_power(&p, pa, plan.p_tot));
    let zf_p = zf(&channels).and_then(|p| project_power(&p, pa, plan.p_tot));
    for (s, &snr_db) in plan.snr_db.iter().enumerate() {
        let n0 = noise_power(db_to_linear(snr_db), plan.geometry.gamma2, plan.p_tot)?;
        for &kind in want {
            let (rate, init) = match kind {
                PrecoderKind::Mrt | PrecoderKind::Zf => {
                    let p = if kind == PrecoderKind::Mrt { &mrt_p } else { &zf_p };
                    match p {
                        Ok(p) => (sum_rate(p, &channels, pa, n0), None),
                        Err(e) => {
                            out.warnings.push(format!(
                                "realization {realization}, snr {snr_db} dB: {} skipped: {e}",
                                kind.as_str()
                            ));
                            continue;
                        }
                    }
                }
                PrecoderKind::Dab => {
                    let opts = plan.optimizer.options(job_seed(plan.seed, realization, s))?;
                    let res = multi_init_dab(&channels, pa, n0, plan.p_tot, &opts)?;
                    for (label, why) in &res.failures {
                        out.warnings.push(format!(
                            "realization {realization}, snr {snr_db} dB: init {label} skipped: {why}"
                        ));
                    }
                    out.traces.push(res.best_so_far());
                    (res.rate, Some(res.label.to_string()))
                }
            };
            out.rows.push(SweepRow {
                snr_db,
                realization,
                precoder: kind,
                sum_rate: rate,
                init,
            });
        }
    }
    Ok(out)
}

fn run_realizations(plan: &config::SweepPlan, want: &[PrecoderKind]) -> Result<Vec<RealizationOutput>> {
    (0..plan.n_channels)
        .into_par_iter()
        .map(|r| run_realization(plan, r, want))
        .collect()
}

/// Ergodic sum-rate sweep over SNR for the configured precoders.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResults> {
    let plan = cfg.plan()?;
    let outputs = run_realizations(&plan, &plan.precoders)?;
    let mut results = SweepResults::default();
    for out in outputs {
        results.rows.extend(out.rows);
        results.warnings.extend(out.warnings);
    }
    // rows grouped by SNR first, then realization, then precoder
    results.rows.sort_by(|a, b| {
        let sa = plan.snr_db.iter().position(|&s| s == a.snr_db);
        let sb = plan.snr_db.iter().position(|&s| s == b.snr_db);
        sa.cmp(&sb).then(a.realization.cmp(&b.realization))
    });
    for &snr_db in &plan.snr_db {
        for &kind in &plan.precoders {
            let xs = results.rates(snr_db, kind);
            let (mean, std_err) = mean_and_stderr(&xs);
            results.summary.push(SweepSummary {
                snr_db,
                precoder: kind,
                mean,
                std_err,
                count: xs.len(),
            });
        }
    }
    Ok(results)
}

/// Path of the aggregate table written next to a sweep CSV.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    path.with_file_name(format!("{stem}_summary.csv"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes per-row results to `path` and per-SNR means to [`summary_path`].
pub fn write_sweep(results: &SweepResults, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["snr_db", "realization", "precoder", "sum_rate", "init"])?;
    for r in &results.rows {
        w.write_record([
            fmt_f64(r.snr_db),
            r.realization.to_string(),
            r.precoder.as_str().to_string(),
            fmt_f64(r.sum_rate),
            r.init.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&summary_path(path))?;
    w.write_record(["snr_db", "precoder", "mean_rate", "std_err", "count"])?;
    for s in &results.summary {
        w.write_record([
            fmt_f64(s.snr_db),
            s.precoder.as_str().to_string(),
            fmt_f64(s.mean),
            fmt_f64(s.std_err),
            s.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean best-so-far DAB trace for one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub snr_db: f64,
    /// Mean over realizations of the best rate across initializations after
    /// each iteration (index 0 is the best starting point).
    pub mean_rate: Vec<f64>,
    /// Per-realization best-so-far traces.
    pub per_realization: Vec<Vec<f64>>,
}

impl ConvergenceTrace {
    /// First iteration at which the mean trace reaches `fraction` of its
    /// final value.
    pub fn iterations_to(&self, fraction: f64) -> usize {
        let target = fraction * self.mean_rate.last().copied().unwrap_or(0.0);
        self.mean_rate
            .iter()
            .position(|&r| r >= target)
            .unwrap_or(self.mean_rate.len())
    }
}

/// Convergence of the multi-start ascent, averaged over realizations, for
/// each configured SNR.
pub fn run_convergence(cfg: &SweepConfig) -> Result<Vec<ConvergenceTrace>> {
    let plan = cfg.plan()?;
    let outputs = run_realizations(&plan, &[PrecoderKind::Dab])?;
    let traces = plan
        .snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr_db)| {
            let per_realization: Vec<Vec<f64>> = outputs.iter().map(|o| o.traces[s].clone()).collect();
            let len = per_realization.iter().map(Vec::len).min().unwrap_or(0);
            let n = per_realization.len() as f64;
            let mean_rate = (0..len)
                .map(|i| per_realization.iter().map(|t| t[i]).sum::<f64>() / n)
                .collect();
            ConvergenceTrace {
                snr_db,
                mean_rate,
                per_realization,
            }
        })
        .collect();
    Ok(traces)
}

pub fn write_convergence(traces: &[ConvergenceTrace], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "mean_rate", "snr_db"])?;
    for t in traces {
        for (i, r) in t.mean_rate.iter().enumerate() {
            w.write_record([i.to_string(), fmt_f64(*r), fmt_f64(t.snr_db)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Radiation patterns of MRT and DAB for one fixed scenario.
#[derive(Debug, Clone)]
pub struct PatternResults {
    pub channels: ChannelSet,
    pub mrt: Vec<PatternPoint>,
    pub dab: Vec<PatternPoint>,
    pub mrt_rate: f64,
    pub dab_rate: f64,
    pub dab_init: String,
}

/// Pattern in dB relative to the maximum linear-term power of the same
/// precoder, floored at [`PATTERN_FLOOR_DB`]. Returns `(linear, distortion)`.
pub fn normalized_db(points: &[PatternPoint]) -> Vec<(f64, f64)> {
    let peak = points.iter().map(|p| p.linear_power).fold(0.0, f64::max);
    points
        .iter()
        .map(|p| {
            (
                ratio_db_floored(p.linear_power, peak, PATTERN_FLOOR_DB),
                ratio_db_floored(p.distortion_power, peak, PATTERN_FLOOR_DB),
            )
        })
        .collect()
}

/// Builds `h_k = a(ψ_k)` (γ² = 1), computes MRT and DAB and evaluates both
/// patterns on the configured grid.
pub fn run_pattern(cfg: &PatternConfig) -> Result<PatternResults> {
    cfg.validate()?;
    let pa: PaParams = cfg.pa.params("pa")?;
    let p_tot = dbm_to_watts(cfg.p_tot_dbm);
    let channels = fixed_channels(&cfg.user_aods_deg, cfg.antennas)?;
    let n0 = noise_power(db_to_linear(cfg.snr_db), 1.0, p_tot)?;
    let grid = angle_grid(cfg.grid_step_deg)?;

    let mrt_p = project_power(&mrt(&channels)?, &pa, p_tot)?;
    let opts = cfg
        .optimizer
        .options(seed::derive(cfg.seed, seed::DOMAIN_JOB, 0))?;
    let dab = multi_init_dab(&channels, &pa, n0, p_tot, &opts)?;
    Ok(PatternResults {
        mrt: radiation_pattern(&mrt_p, &pa, &grid)?,
        dab: radiation_pattern(&dab.precoder, &pa, &grid)?,
        mrt_rate: sum_rate(&mrt_p, &channels, &pa, n0),
        dab_rate: dab.rate,
        dab_init: dab.label.to_string(),
        channels,
    })
}

pub fn write_pattern(results: &PatternResults, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["psi_deg", "precoder", "linear_power_db", "distortion_power_db"])?;
    for (name, points) in [("mrt", &results.mrt), ("dab", &results.dab)] {
        for (pt, (lin, dist)) in points.iter().zip(normalized_db(points)) {
            w.write_record([fmt_f64(pt.psi), name.to_string(), fmt_f64(lin), fmt_f64(dist)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sweep() -> SweepConfig {
        let mut cfg = SweepConfig::default();
        cfg.geometry.antennas = 4;
        cfg.geometry.paths = 3;
        cfg.n_channels = 3;
        cfg.snr_db_list = vec![0.0, 20.0];
        cfg.optimizer.max_iters = 5;
        cfg.optimizer.n_random_inits = 2;
        cfg
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        let x = 19.952_623_149_688_797;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_shape_and_dominance() {
        let cfg = tiny_sweep();
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.rows.len(), 3 * 2 * 3);
        assert_eq!(res.summary.len(), 2 * 3);
        for snr in [0.0, 20.0] {
            let m = res.rates(snr, PrecoderKind::Mrt);
            let z = res.rates(snr, PrecoderKind::Zf);
            let d = res.rates(snr, PrecoderKind::Dab);
            for i in 0..3 {
                assert!(d[i] >= m[i].max(z[i]));
            }
        }
    }

    #[test]
    fn convergence_trace_shape() {
        let cfg = tiny_sweep();
        let traces = run_convergence(&cfg).unwrap();
        assert_eq!(traces.len(), 2);
        for t in &traces {
            assert_eq!(t.mean_rate.len(), 6);
            assert!(t.mean_rate.windows(2).all(|w| w[1] >= w[0]));
            assert!(t.iterations_to(0.99) <= 5);
        }
    }

    #[test]
    fn summary_file_name() {
        assert_eq!(summary_path(Path::new("/tmp/out/run.csv")), PathBuf::from("/tmp/out/run_summary.csv"));
    }

    #[test]
    fn unwritable_path_errors() {
        let res = SweepResults::default();
        let err = write_sweep(&res, Path::new("/nonexistent-dir/x/sweep.csv")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
