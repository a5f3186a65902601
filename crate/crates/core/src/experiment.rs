//! Seeded Monte Carlo experiment harness with CSV artifacts.
//!
//! Each experiment kind fans replicates out in parallel, aggregates in
//! replicate order, and writes its datasets as CSV. Every output is
//! bit-for-bit reproducible from `(config, master_seed)`: replicate `i` of
//! batch `g` draws from a stream seeded by mixing `(master_seed, g, i)`,
//! independent of thread count, and floats are written in shortest
//! round-trip form.
//!
//! Datasets:
//!
//! - `tau_hist` — `fig3.csv` (`N,run_id,tau_e_scaled`) plus per-N
//!   `outcomes_n<N>.csv`; first-extinction times scaled by `N²`.
//! - `gamma_hit` — `gamma_hit.csv` (per-start probability of extinction
//!   before the coexistence line), `fig4.csv` (`run_id,tau_gamma` for the
//!   first start), per-start `outcomes_init<j>.csv`.
//! - `pm_curve` — `fig5.csv` (`m0,pm_analytic,pm_mc,se`).
//! - `etau_curve` — `fig6.csv` (`m0,etau_analytic,etau_mc,se`, times in
//!   `N²` units).
//! - `reduced_vs_ctmc` — `reduced_vs_ctmc.csv` (`source,run_id,tau`):
//!   scaled chain extinction times against the reduced diffusion.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::analytics::{build_scale_table, expected_tau, hit_prob_pm, ScaleTable};
use crate::diffusion::simulate_mstar;
use crate::error::{Error, Result};
use crate::flow::project_mstar;
use crate::model::{DMState, Params};
use crate::sim::{
    replicate_rng, replicate_seed, run_batch, state_from_scaled, Extinct, Mode, SimConfig,
    StoppingRecord,
};
use crate::stats::{ks_statistic, summarize, summarize_proportion, SummaryStats};

/// Lower cutoff of the quadrature interval `[eps, 1 - eps]`.
pub const DEFAULT_EPS: f64 = 1e-6;

/// What an experiment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Distribution of the scaled first-extinction time across population sizes.
    TauHist,
    /// Order of coexistence-line hit versus first extinction, per start.
    GammaHit,
    /// First-extinction-is-generalist probability against the analytic curve.
    PmCurve,
    /// Mean first-extinction time against the analytic curve.
    EtauCurve,
    /// Chain extinction times against the reduced diffusion.
    ReducedVsCtmc,
}

fn one_or_many<'de, D>(de: D) -> std::result::Result<Vec<u32>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(u32),
        Many(Vec<u32>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(n) => vec![n],
        OneOrMany::Many(v) => v,
    })
}

fn default_dt() -> f64 {
    1e-4
}

fn default_n_grid() -> usize {
    1000
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Experiment description; the JSON config file mirrors these field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Population size(s); scalar or list in JSON.
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<u32>,
    pub q: f64,
    /// Scaled starting points `(d0, m0)`.
    pub inits: Vec<(f64, f64)>,
    pub runs: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Euler-Maruyama step for reduced-diffusion kinds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Scale-table grid size for analytic kinds.
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.n.is_empty() {
            return Err(Error::Config("at least one population size required".into()));
        }
        if self.inits.is_empty() {
            return Err(Error::Config("at least one starting point required".into()));
        }
        for &(d, m) in &self.inits {
            if !(d.is_finite() && m.is_finite()) || m < 0.0 || m + d.abs() > 1.0 {
                return Err(Error::Config(format!(
                    "start ({d}, {m}) is outside the state triangle"
                )));
            }
        }
        for &n in &self.n {
            Params::new(n, self.q)?;
        }
        if self.dt <= 0.0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

/// One analytic-versus-Monte-Carlo comparison point.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub analytic: f64,
    pub mc: f64,
    pub se: f64,
    pub z: f64,
    /// `|z| > 3`.
    pub flagged: bool,
}

/// Aggregated results of one experiment.
#[derive(Debug)]
pub struct ExperimentReport {
    /// Named summary per group (per population size or per start).
    pub summaries: Vec<(String, SummaryStats)>,
    /// Files written under the configured output directory.
    pub files: Vec<PathBuf>,
    /// Analytic-vs-MC table for the curve kinds.
    pub comparison: Option<Vec<ComparisonRow>>,
    /// Kolmogorov-Smirnov distance for `reduced_vs_ctmc`.
    pub ks: Option<f64>,
}

/// One point of a pm/etau sweep.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    /// Realized scaled initial generalist proportion.
    pub m0: f64,
    /// Projection of the realized start onto the coexistence line.
    pub x_start: f64,
    pub pm_analytic: f64,
    pub pm_mc: f64,
    pub pm_se: f64,
    /// Times in `N²` chain-time units.
    pub etau_analytic: f64,
    pub etau_mc: f64,
    pub etau_se: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

fn outcome_rows(records: &[StoppingRecord], batch_seed: u64) -> Vec<String> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "{},{},{},{},{},{},{}",
                i,
                replicate_seed(batch_seed, i as u64),
                fmt_opt(r.tau_gamma),
                fmt_opt(r.tau_e),
                r.first_extinct.map(|e| e.to_string()).unwrap_or_default(),
                fmt_opt(r.tau_f),
                r.fixed.map(|s| s.to_string()).unwrap_or_default(),
            )
        })
        .collect()
}

/// Derived master seed for batch `g` of an experiment.
fn batch_seed(master_seed: u64, group: u64) -> u64 {
    replicate_seed(master_seed, group)
}

fn run_group(
    p: Params,
    init: (f64, f64),
    mode: Mode,
    runs: u64,
    seed: u64,
) -> Result<(DMState, Vec<StoppingRecord>)> {
    let state = state_from_scaled(init.0, init.1, p)?;
    let cfg = SimConfig::new(p, state, mode);
    let records = run_batch(&cfg, runs, seed)?;
    Ok((state, records))
}

/// Run an experiment, write its CSV artifacts, and return the summaries.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    match cfg.kind {
        ExperimentKind::TauHist => run_tau_hist(cfg),
        ExperimentKind::GammaHit => run_gamma_hit(cfg),
        ExperimentKind::PmCurve | ExperimentKind::EtauCurve => run_curve(cfg),
        ExperimentKind::ReducedVsCtmc => run_reduced_vs_ctmc(cfg),
    }
}

fn run_tau_hist(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let init = cfg.inits[0];
    let mut fig3_rows = Vec::new();
    let mut summaries = Vec::new();
    let mut files = Vec::new();
    for (g, &n) in cfg.n.iter().enumerate() {
        let p = Params::new(n, cfg.q)?;
        let seed = batch_seed(cfg.master_seed, g as u64);
        let (_, records) = run_group(p, init, Mode::ToFirstExtinction, cfg.runs, seed)?;
        let n2 = f64::from(n) * f64::from(n);
        let scaled: Vec<f64> = records
            .iter()
            .map(|r| r.tau_e.expect("extinction mode always stops at extinction") / n2)
            .collect();
        for (i, tau) in scaled.iter().enumerate() {
            fig3_rows.push(format!("{n},{i},{tau}"));
        }
        let path = cfg.out_dir.join(format!("outcomes_n{n}.csv"));
        write_csv(
            &path,
            "run_id,seed,tau_gamma,tau_e,first_extinct,tau_f,fixed",
            outcome_rows(&records, seed),
        )?;
        files.push(path);
        summaries.push((format!("n={n}"), summarize(&scaled)));
    }
    let fig3 = cfg.out_dir.join("fig3.csv");
    write_csv(&fig3, "N,run_id,tau_e_scaled", fig3_rows)?;
    files.push(fig3);
    Ok(ExperimentReport {
        summaries,
        files,
        comparison: None,
        ks: None,
    })
}

/// True when the run went extinct strictly before touching the
/// coexistence line.
fn extinct_before_gamma(r: &StoppingRecord) -> bool {
    match (r.tau_e, r.tau_gamma) {
        (Some(te), Some(tg)) => te < tg,
        (Some(_), None) => true,
        _ => false,
    }
}

fn run_gamma_hit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let p = Params::new(cfg.n[0], cfg.q)?;
    let mut summaries = Vec::new();
    let mut files = Vec::new();
    let mut table_rows = Vec::new();
    for (j, &init) in cfg.inits.iter().enumerate() {
        let seed = batch_seed(cfg.master_seed, j as u64);
        let (state, records) = run_group(p, init, Mode::ToGammaOrExtinction, cfg.runs, seed)?;
        let hits = records.iter().filter(|r| extinct_before_gamma(r)).count() as u64;
        let (p_hat, se) = summarize_proportion(hits, cfg.runs);
        let y = state.scaled(p);
        table_rows.push(format!(
            "{},{},{},{hits},{p_hat},{se}",
            y.d(),
            y.m(),
            cfg.runs
        ));
        let path = cfg.out_dir.join(format!("outcomes_init{j}.csv"));
        write_csv(
            &path,
            "run_id,seed,tau_gamma,tau_e,first_extinct,tau_f,fixed",
            outcome_rows(&records, seed),
        )?;
        files.push(path);
        if j == 0 {
            let fig4 = cfg.out_dir.join("fig4.csv");
            write_csv(
                &fig4,
                "run_id,tau_gamma",
                records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| format!("{i},{}", fmt_opt(r.tau_gamma))),
            )?;
            files.push(fig4);
            let gammas: Vec<f64> = records.iter().filter_map(|r| r.tau_gamma).collect();
            if !gammas.is_empty() {
                let mut s = summarize(&gammas);
                s.proportion = Some((p_hat, se));
                summaries.push((format!("init=({}, {})", y.d(), y.m()), s));
                continue;
            }
        }
        // Proportion-only summary for the remaining starts.
        let taus: Vec<f64> = records
            .iter()
            .map(|r| r.tau_e.or(r.tau_gamma).unwrap_or(0.0))
            .collect();
        let mut s = summarize(&taus);
        s.proportion = Some((p_hat, se));
        summaries.push((format!("init=({}, {})", y.d(), y.m()), s));
    }
    let table = cfg.out_dir.join("gamma_hit.csv");
    write_csv(
        &table,
        "d0,m0,runs,n_ext_before_gamma,p_ext_before_gamma,se",
        table_rows,
    )?;
    files.push(table);
    Ok(ExperimentReport {
        summaries,
        files,
        comparison: None,
        ks: None,
    })
}

/// Shared sweep of the pm/etau curve kinds: one batch per start against a
/// prebuilt scale table.
pub fn curve_sweep(cfg: &ExperimentConfig, table: &ScaleTable) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let p = Params::new(cfg.n[0], cfg.q)?;
    let n2 = f64::from(p.n) * f64::from(p.n);
    let mut points = Vec::with_capacity(cfg.inits.len());
    for (j, &init) in cfg.inits.iter().enumerate() {
        let seed = batch_seed(cfg.master_seed, j as u64);
        let (state, records) = run_group(p, init, Mode::ToFirstExtinction, cfg.runs, seed)?;
        let y = state.scaled(p);
        let x_start = if state.m == 0 {
            0.0
        } else {
            project_mstar(y, cfg.q)?
        };
        let m_hits = records
            .iter()
            .filter(|r| r.first_extinct == Some(Extinct::M))
            .count() as u64;
        let (pm_mc, pm_se) = summarize_proportion(m_hits, cfg.runs);
        let taus: Vec<f64> = records
            .iter()
            .map(|r| r.tau_e.expect("extinction mode") / n2)
            .collect();
        let tau_summary = summarize(&taus);
        let x_eval = x_start.clamp(table.lo(), table.hi());
        points.push(CurvePoint {
            m0: y.m(),
            x_start,
            pm_analytic: hit_prob_pm(x_start, table),
            pm_mc,
            pm_se,
            etau_analytic: if state.m == 0 { 0.0 } else { expected_tau(x_eval, table) },
            etau_mc: tau_summary.mean,
            etau_se: tau_summary.se,
        });
        let _ = (j, seed);
    }
    Ok(points)
}

fn comparison_rows(kind: ExperimentKind, points: &[CurvePoint]) -> Vec<ComparisonRow> {
    points
        .iter()
        .map(|pt| {
            let (analytic, mc, se) = match kind {
                ExperimentKind::EtauCurve => (pt.etau_analytic, pt.etau_mc, pt.etau_se),
                _ => (pt.pm_analytic, pt.pm_mc, pt.pm_se),
            };
            let z = if se > 0.0 { (mc - analytic) / se } else { 0.0 };
            ComparisonRow {
                x: pt.x_start,
                analytic,
                mc,
                se,
                z,
                flagged: z.abs() > 3.0,
            }
        })
        .collect()
}

/// Pair analytic values with chain estimates for a curve experiment,
/// flagging points further than three standard errors apart.
pub fn compare_analytic_mc(cfg: &ExperimentConfig) -> Result<Vec<ComparisonRow>> {
    match cfg.kind {
        ExperimentKind::PmCurve | ExperimentKind::EtauCurve => {}
        _ => {
            return Err(Error::Config(
                "analytic comparison is defined for the curve kinds".into(),
            ))
        }
    }
    let table = build_scale_table(cfg.q, cfg.n_grid, DEFAULT_EPS)?;
    let points = curve_sweep(cfg, &table)?;
    Ok(comparison_rows(cfg.kind, &points))
}

fn run_curve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let table = build_scale_table(cfg.q, cfg.n_grid, DEFAULT_EPS)?;
    let points = curve_sweep(cfg, &table)?;
    let (name, path) = match cfg.kind {
        ExperimentKind::PmCurve => ("fig5.csv", cfg.out_dir.join("fig5.csv")),
        _ => ("fig6.csv", cfg.out_dir.join("fig6.csv")),
    };
    let rows: Vec<String> = points
        .iter()
        .map(|pt| match cfg.kind {
            ExperimentKind::PmCurve => {
                format!("{},{},{},{}", pt.m0, pt.pm_analytic, pt.pm_mc, pt.pm_se)
            }
            _ => format!(
                "{},{},{},{}",
                pt.m0, pt.etau_analytic, pt.etau_mc, pt.etau_se
            ),
        })
        .collect();
    let header = match cfg.kind {
        ExperimentKind::PmCurve => "m0,pm_analytic,pm_mc,se",
        _ => "m0,etau_analytic,etau_mc,se",
    };
    write_csv(&path, header, rows)?;
    let summaries = points
        .iter()
        .map(|pt| {
            let mut s = summarize(&[pt.etau_mc]);
            s.proportion = Some((pt.pm_mc, pt.pm_se));
            (format!("m0={}", pt.m0), s)
        })
        .collect();
    let _ = name;
    Ok(ExperimentReport {
        summaries,
        files: vec![path],
        comparison: Some(comparison_rows(cfg.kind, &points)),
        ks: None,
    })
}

/// Scaled chain extinction times and reduced-diffusion absorption times
/// from matched starts.
pub fn reduced_vs_ctmc_samples(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let p = Params::new(cfg.n[0], cfg.q)?;
    let init = cfg.inits[0];
    let seed = batch_seed(cfg.master_seed, 0);
    let (state, records) = run_group(p, init, Mode::ToFirstExtinction, cfg.runs, seed)?;
    let n2 = f64::from(p.n) * f64::from(p.n);
    let ctmc: Vec<f64> = records
        .iter()
        .map(|r| r.tau_e.expect("extinction mode") / n2)
        .collect();

    let x0 = if state.m == 0 {
        0.0
    } else {
        project_mstar(state.scaled(p), cfg.q)?
    };
    let em_seed = batch_seed(cfg.master_seed, 1);
    let q = cfg.q;
    let dt = cfg.dt;
    let reduced: Vec<f64> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(em_seed, i);
            simulate_mstar(x0, q, dt, &mut rng).map(|(_, tau)| tau)
        })
        .collect::<Result<_>>()?;
    Ok((ctmc, reduced))
}

fn run_reduced_vs_ctmc(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (ctmc, reduced) = reduced_vs_ctmc_samples(cfg)?;
    let path = cfg.out_dir.join("reduced_vs_ctmc.csv");
    let rows = ctmc
        .iter()
        .enumerate()
        .map(|(i, tau)| format!("ctmc,{i},{tau}"))
        .chain(
            reduced
                .iter()
                .enumerate()
                .map(|(i, tau)| format!("diffusion,{i},{tau}")),
        )
        .collect::<Vec<_>>();
    write_csv(&path, "source,run_id,tau", rows)?;
    let ks = ks_statistic(&ctmc, &reduced);
    Ok(ExperimentReport {
        summaries: vec![
            ("ctmc".into(), summarize(&ctmc)),
            ("diffusion".into(), summarize(&reduced)),
        ],
        files: vec![path],
        comparison: None,
        ks: Some(ks),
    })
}

/// The four figure datasets as preset experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Figure {
    /// Standard dataset grid for the figure, overridable population size,
    /// run count, and seed.
    pub fn config(
        self,
        n: Option<Vec<u32>>,
        runs: u64,
        master_seed: u64,
        q: f64,
        out_dir: PathBuf,
    ) -> ExperimentConfig {
        let third = 1.0 / 3.0;
        let m0_grid: Vec<(f64, f64)> = (0..=9).map(|k| (0.0, k as f64 / 10.0)).collect();
        let (kind, n_default, inits) = match self {
            Figure::Fig3 => (ExperimentKind::TauHist, vec![100, 1000], vec![(0.0, third)]),
            Figure::Fig4 => (ExperimentKind::GammaHit, vec![1000], vec![(third, third)]),
            Figure::Fig5 => (ExperimentKind::PmCurve, vec![1000], m0_grid.clone()),
            Figure::Fig6 => (ExperimentKind::EtauCurve, vec![1000], m0_grid),
        };
        ExperimentConfig {
            kind,
            n: n.unwrap_or(n_default),
            q,
            inits,
            runs,
            master_seed,
            dt: default_dt(),
            n_grid: default_n_grid(),
            out_dir,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            n: vec![40],
            q: 0.5,
            inits: vec![(0.0, 0.4)],
            runs: 20,
            master_seed: 7,
            dt: 1e-3,
            n_grid: 200,
            out_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn config_json_round_trip_and_scalar_n() {
        let json = r#"{
            "kind": "pm_curve",
            "n": 100,
            "q": 0.5,
            "inits": [[0.0, 0.3]],
            "runs": 10
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::PmCurve);
        assert_eq!(cfg.n, vec![100]);
        assert_eq!(cfg.dt, 1e-4);
        assert_eq!(cfg.n_grid, 1000);
        let json = r#"{"kind": "tau_hist", "n": [100, 200], "q": 0.5,
                       "inits": [[0.0, 0.3]], "runs": 10, "master_seed": 3}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.n, vec![100, 200]);
        assert_eq!(cfg.master_seed, 3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::TauHist, dir.path());
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(ExperimentKind::TauHist, dir.path());
        cfg.inits = vec![(0.9, 0.9)];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(ExperimentKind::TauHist, dir.path());
        cfg.q = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tau_hist_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::TauHist, dir.path());
        cfg.n = vec![30, 40];
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.summaries.len(), 2);
        let fig3 = fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
        let mut lines = fig3.lines();
        assert_eq!(lines.next(), Some("N,run_id,tau_e_scaled"));
        assert_eq!(fig3.lines().count(), 1 + 2 * 20);
        assert!(dir.path().join("outcomes_n30.csv").exists());
        assert!(dir.path().join("outcomes_n40.csv").exists());
    }

    #[test]
    fn outcomes_header_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentKind::GammaHit, dir.path());
        run_experiment(&cfg).unwrap();
        let outcomes = fs::read_to_string(dir.path().join("outcomes_init0.csv")).unwrap();
        assert!(outcomes.starts_with("run_id,seed,tau_gamma,tau_e,first_extinct,tau_f,fixed\n"));
        let fig4 = fs::read_to_string(dir.path().join("fig4.csv")).unwrap();
        assert!(fig4.starts_with("run_id,tau_gamma\n"));
        let table = fs::read_to_string(dir.path().join("gamma_hit.csv")).unwrap();
        assert!(table.starts_with("d0,m0,runs,n_ext_before_gamma,p_ext_before_gamma,se\n"));
    }

    #[test]
    fn curve_kinds_write_their_figures() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::PmCurve, dir.path());
        cfg.inits = vec![(0.0, 0.2), (0.0, 0.6)];
        let report = run_experiment(&cfg).unwrap();
        let fig5 = fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
        assert!(fig5.starts_with("m0,pm_analytic,pm_mc,se\n"));
        assert_eq!(fig5.lines().count(), 3);
        assert!(report.comparison.is_some());

        cfg.kind = ExperimentKind::EtauCurve;
        run_experiment(&cfg).unwrap();
        let fig6 = fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
        assert!(fig6.starts_with("m0,etau_analytic,etau_mc,se\n"));
    }

    #[test]
    fn zero_generalist_start_is_certain_extinction() {
        // m0 = 0: the generalist is extinct at time zero, so the Monte
        // Carlo and analytic extinction probabilities are both one.
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::PmCurve, dir.path());
        cfg.inits = vec![(0.0, 0.0)];
        let table = crate::analytics::build_scale_table(cfg.q, cfg.n_grid, DEFAULT_EPS).unwrap();
        let points = curve_sweep(&cfg, &table).unwrap();
        assert_eq!(points[0].pm_mc, 1.0);
        assert_eq!(points[0].pm_analytic, 1.0);
        assert_eq!(points[0].etau_mc, 0.0);
        assert_eq!(points[0].x_start, 0.0);
    }

    #[test]
    fn comparison_flags_use_three_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::PmCurve, dir.path());
        cfg.inits = vec![(0.0, 0.3), (0.0, 0.7)];
        cfg.runs = 200;
        let rows = compare_analytic_mc(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.flagged, row.z.abs() > 3.0);
        }
        cfg.kind = ExperimentKind::TauHist;
        assert!(compare_analytic_mc(&cfg).is_err());
    }

    #[test]
    fn reduced_vs_ctmc_reports_ks() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(ExperimentKind::ReducedVsCtmc, dir.path());
        cfg.runs = 30;
        let report = run_experiment(&cfg).unwrap();
        let ks = report.ks.unwrap();
        assert!((0.0..=1.0).contains(&ks));
        let csv = fs::read_to_string(dir.path().join("reduced_vs_ctmc.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 60);
    }

    #[test]
    fn experiments_are_byte_identical_across_reruns() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        for (kind, name) in [
            (ExperimentKind::TauHist, "fig3.csv"),
            (ExperimentKind::GammaHit, "fig4.csv"),
            (ExperimentKind::PmCurve, "fig5.csv"),
        ] {
            let mut a = tiny_cfg(kind, dir1.path());
            let mut b = tiny_cfg(kind, dir2.path());
            a.runs = 15;
            b.runs = 15;
            run_experiment(&a).unwrap();
            run_experiment(&b).unwrap();
            let fa = fs::read(dir1.path().join(name)).unwrap();
            let fb = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(fa, fb, "{name} differs between identical reruns");
        }
    }

    #[test]
    fn figure_presets_have_documented_grids() {
        let cfg = Figure::Fig5.config(None, 1000, 7, 0.5, PathBuf::from("out"));
        assert_eq!(cfg.inits.len(), 10);
        assert_eq!(cfg.inits[0], (0.0, 0.0));
        assert_eq!(cfg.inits[9], (0.0, 0.9));
        let cfg = Figure::Fig3.config(None, 1000, 7, 0.5, PathBuf::from("out"));
        assert_eq!(cfg.n, vec![100, 1000]);
        let cfg = Figure::Fig4.config(Some(vec![500]), 100, 7, 0.5, PathBuf::from("out"));
        assert_eq!(cfg.n, vec![500]);
    }
}
