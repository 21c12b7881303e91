//! Experiment orchestration: a configuration and a command in, a result
//! table (plus optional figures) out.
//!
//! [`run`] validates the configuration, evaluates the command on a rayon
//! pool of the requested size and returns the table; [`write_outputs`]
//! writes `result.tsv`, `result.meta` (JSON) and, on request, `*.svg`.
//! Results depend only on the configuration and seed: the worker count
//! changes nothing but the wall time.

mod config;
mod plot;
mod table;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

pub use config::{
    parse_preset, ChainConfig, DecayParams, EnvironmentConfig, ExperimentConfig, FreeEnergyParams, IbpParams,
    LyapunovParams, OracleParams, ScanParams,
};
pub use plot::{render_svg, Figure};
pub use table::{Cell, ResultTable, TableMeta};

use crate::chain::{ChainError, ChainSpec};
use crate::disorder::{
    concentration_probe, decay_fit, derivative_constants, log_log_slope, monotonicity_scan,
    smallbeta_bound_check, DisorderError,
};
use crate::levy::{ibp_residual, EnvironmentLaw, LevyError, LevyTriple};
use crate::lyapunov::{
    c_beta_f_estimate, c_derivative_at_zero, c_of_f, cycle_mgf, perron_log_root, varadhan_direct,
    LyapunovError, Potential,
};
use crate::replica::{replica_rng, Estimate};
use crate::transfer::{replica_summaries, ReplicaPlan, TransferError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("table: {0}")]
    Table(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

/// The experiment commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FreeEnergy,
    Lyapunov,
    IbpCheck,
    DisorderScan,
    DecayFit,
    OracleCompare,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::FreeEnergy,
        Command::Lyapunov,
        Command::IbpCheck,
        Command::DisorderScan,
        Command::DecayFit,
        Command::OracleCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FreeEnergy => "free-energy",
            Command::Lyapunov => "lyapunov",
            Command::IbpCheck => "ibp-check",
            Command::DisorderScan => "disorder-scan",
            Command::DecayFit => "decay-fit",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown command `{s}`")))
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub figures: Vec<Figure>,
    pub wall_time: Duration,
    pub workers: usize,
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub table: PathBuf,
    pub meta: PathBuf,
    pub plots: Vec<PathBuf>,
    /// Figures that failed to render; the tables are unaffected.
    pub plot_errors: Vec<String>,
}

/// Validates `config` for `command` and evaluates it.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    config.validate(command)?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let workers = pool.current_num_threads();
    let chain = config.chain_spec()?;
    let triple = config.triple()?;
    let meta = TableMeta {
        command: command.name().to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        notes: Vec::new(),
    };
    let ctx = Context {
        config,
        chain: &chain,
        triple: &triple,
    };
    let (table, figures) = pool.install(|| match command {
        Command::FreeEnergy => ctx.free_energy(meta),
        Command::Lyapunov => ctx.lyapunov(meta),
        Command::IbpCheck => ctx.ibp_check(meta),
        Command::DisorderScan => ctx.disorder_scan(meta),
        Command::DecayFit => ctx.decay_fit(meta),
        Command::OracleCompare => ctx.oracle_compare(meta),
    })?;
    Ok(RunOutput {
        table,
        figures,
        wall_time: started.elapsed(),
        workers,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    // write-then-rename so a failed write never leaves a truncated file
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Writes `result.tsv` and `result.meta` into `dir` (created if needed),
/// then the figures when `plot` is set. Figure failures are collected, not
/// raised, so they can never affect the tables.
pub fn write_outputs(output: &RunOutput, dir: &Path, plot: bool) -> Result<Written, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Written {
        table: dir.join("result.tsv"),
        meta: dir.join("result.meta"),
        ..Written::default()
    };
    write_file(&written.table, &output.table.to_tsv())?;
    write_file(
        &written.meta,
        &output.table.to_json(output.wall_time.as_secs_f64(), output.workers),
    )?;
    if plot {
        for figure in &output.figures {
            match plot::write_svg(figure, dir) {
                Ok(path) => written.plots.push(path),
                Err(e) => written.plot_errors.push(format!("{}: {e}", figure.file_name)),
            }
        }
    }
    Ok(written)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn note_estimate(table: &mut ResultTable, key: &str, e: Estimate) {
    table.note(&format!("{key}_mean"), fmt_f64(e.mean));
    table.note(&format!("{key}_stderr"), fmt_f64(e.stderr));
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    chain: &'a ChainSpec,
    triple: &'a LevyTriple,
}

type Outcome = Result<(ResultTable, Vec<Figure>), ExperimentError>;

impl Context<'_> {
    fn note_environment(&self, table: &mut ResultTable) {
        let t = self.triple;
        let atoms: Vec<String> = t.atoms().iter().map(|a| format!("[{:?}, {:?}]", a.jump, a.mass)).collect();
        table.note(
            "environment",
            format!(
                "drift={:?} gauss_var={:?} jumps=[{}]",
                t.drift(),
                t.gauss_var(),
                atoms.join(", ")
            ),
        );
    }

    fn free_energy(&self, meta: TableMeta) -> Outcome {
        let p = &self.config.free_energy;
        let n = p.n as f64;
        let plan = ReplicaPlan::new(p.n, p.replicas, self.config.seed);
        let per_replica = replica_summaries(self.chain, self.triple, &p.betas, plan)?;
        let mut table = ResultTable::new(
            meta,
            &[
                "beta",
                "n",
                "replicas",
                "pn_mean",
                "pn_stderr",
                "overlap_mean",
                "overlap_stderr",
                "pprime_mean",
                "pprime_stderr",
                "martingale_mean",
                "martingale_stderr",
            ],
        );
        self.note_environment(&mut table);
        let mut curve = Vec::new();
        for (j, &beta) in p.betas.iter().enumerate() {
            let slope = self.triple.cumulant_derivative(beta)?;
            let column = |g: &dyn Fn(&crate::transfer::QuenchedSummary) -> f64| {
                Estimate::from_samples(&per_replica.iter().map(|r| g(&r[j])).collect::<Vec<_>>())
            };
            let pn = column(&|s| s.log_z / n);
            let overlap = column(&|s| s.overlap);
            let pprime = column(&|s| (s.energy - n * slope) / n);
            let martingale = column(&|s| s.log_z.exp());
            curve.push((beta, pn.mean));
            table.push_row(vec![
                beta.into(),
                p.n.into(),
                p.replicas.into(),
                pn.mean.into(),
                pn.stderr.into(),
                overlap.mean.into(),
                overlap.stderr.into(),
                pprime.mean.into(),
                pprime.stderr.into(),
                martingale.mean.into(),
                martingale.stderr.into(),
            ])?;
        }
        let figure = Figure {
            file_name: "free_energy.svg".into(),
            title: format!("p_n(beta), n = {}", p.n),
            x_label: "beta".into(),
            y_label: "p_n".into(),
            series: vec![("p_n".into(), curve)],
        };
        Ok((table, vec![figure]))
    }

    fn lyapunov(&self, meta: TableMeta) -> Outcome {
        let p = &self.config.lyapunov;
        let f = self.config.potential(self.chain)?;
        let mu = self.chain.invariant_measure()?;
        let plan = ReplicaPlan::new(p.quenched_n, p.replicas, self.config.seed);
        let mut table = ResultTable::new(
            meta,
            &[
                "start",
                "kappa",
                "domain_margin",
                "c_of_f",
                "perron_log_root",
                "varadhan",
                "mu_dot_f",
                "c_prime_fd",
                "c_beta_f_mean",
                "c_beta_f_stderr",
            ],
        );
        table.note("potential", format!("{:?}", f.values()));
        table.note("varadhan_n", p.n);
        table.note("beta", fmt_f64(p.beta));
        self.note_environment(&mut table);
        let perron = perron_log_root(self.chain, &f)?;
        for x in 0..self.chain.len() {
            let report = c_of_f(self.chain, x, &f)?;
            let derivative = c_derivative_at_zero(self.chain, x, &f, p.h)?;
            let quenched = c_beta_f_estimate(self.chain, self.triple, x, p.beta, &f, plan)?;
            table.push_row(vec![
                Cell::Text(self.chain.states()[x].clone()),
                self.chain.kappa(x)?.into(),
                report.domain_margin.into(),
                report.c.into(),
                perron.into(),
                varadhan_direct(self.chain, x, &f, p.n)?.into(),
                mu.dot(f.values()).into(),
                derivative.finite_difference.into(),
                quenched.at_n.mean.into(),
                quenched.at_n.stderr.into(),
            ])?;
        }
        Ok((table, vec![self.phi_figure(&f, p.phi_points)?]))
    }

    /// `φ(c)` around the root, from the configured start.
    fn phi_figure(&self, f: &Potential, points: usize) -> Result<Figure, ExperimentError> {
        let start = self.chain.start();
        let root = c_of_f(self.chain, start, f)?.c;
        let width = (f.sup() - f.inf()).max(0.5);
        let (lo, hi) = (root - width, root + width);
        let mut curve = Vec::new();
        for k in 0..points {
            let c = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            match cycle_mgf(self.chain, start, f, c) {
                Ok(phi) => curve.push((c, phi)),
                Err(LyapunovError::Divergent { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Figure {
            file_name: "phi.svg".into(),
            title: format!("cycle mgf from {}", self.chain.states()[start]),
            x_label: "c".into(),
            y_label: "phi(c)".into(),
            series: vec![("phi".into(), curve), ("1".into(), vec![(lo, 1.0), (hi, 1.0)])],
        })
    }

    fn ibp_check(&self, meta: TableMeta) -> Outcome {
        let mut table = ResultTable::new(meta, &["function", "lhs", "rhs", "residual", "order"]);
        self.note_environment(&mut table);
        let mut worst: f64 = 0.0;
        for tf in self.config.ibp_functions()? {
            let check = ibp_residual(self.triple, tf.f, tf.df)?;
            worst = worst.max(check.residual);
            table.push_row(vec![
                tf.name.into(),
                check.lhs.into(),
                check.rhs.into(),
                check.residual.into(),
                check.order.unwrap_or(0).into(),
            ])?;
        }
        table.note("max_residual", fmt_f64(worst));
        Ok((table, Vec::new()))
    }

    fn disorder_scan(&self, meta: TableMeta) -> Outcome {
        let p = &self.config.disorder_scan;
        let plan = ReplicaPlan::new(p.n, p.replicas, self.config.seed);
        let scan = monotonicity_scan(self.chain, self.triple, &p.betas, plan)?;
        let small = smallbeta_bound_check(self.chain, self.triple, p.small_beta, plan)?;
        let mut table = ResultTable::new(
            meta,
            &[
                "beta",
                "pn_mean",
                "pn_stderr",
                "overlap_mean",
                "pprime_mean",
                "pprime_stderr",
                "c1",
                "c2",
                "sandwich_ok",
                "verdict",
            ],
        );
        table.note("n", p.n);
        table.note("replicas", p.replicas);
        self.note_environment(&mut table);
        table.note("monotone", scan.is_monotone());
        table.note("verdict_codes", "1=strong 0=undetermined -1=violated");
        table.note("small_beta", fmt_f64(small.beta));
        note_estimate(&mut table, "small_beta_pn", small.pn);
        table.note("small_beta_target", fmt_f64(small.target));
        table.note("small_beta_threshold", fmt_f64(small.threshold));
        table.note("small_beta_passed", small.passed);
        for (j, &beta) in scan.beta_grid.iter().enumerate() {
            // at β = 0 both constants vanish (their β → 0 limit)
            let (c1, c2) = if beta > 0.0 {
                let c = derivative_constants(self.triple, beta)?;
                (c.c1, c.c2)
            } else {
                (0.0, 0.0)
            };
            table.push_row(vec![
                beta.into(),
                scan.pn[j].mean.into(),
                scan.pn[j].stderr.into(),
                scan.overlap[j].into(),
                scan.pprime_cov[j].mean.into(),
                scan.pprime_cov[j].stderr.into(),
                c1.into(),
                c2.into(),
                scan.sandwich_ok[j].into(),
                i64::from(scan.verdicts[j].code()).into(),
            ])?;
        }
        let figure = Figure {
            file_name: "disorder_scan.svg".into(),
            title: format!("p_n(beta), n = {}", p.n),
            x_label: "beta".into(),
            y_label: "p_n".into(),
            series: vec![(
                "p_n".into(),
                scan.beta_grid.iter().zip(&scan.pn).map(|(b, e)| (*b, e.mean)).collect(),
            )],
        };
        Ok((table, vec![figure]))
    }

    fn decay_fit(&self, meta: TableMeta) -> Outcome {
        let p = &self.config.decay_fit;
        let seed = self.config.seed;
        let fit = decay_fit(self.chain, self.triple, p.beta, &p.horizons, p.replicas, seed)?;
        let sds = concentration_probe(self.chain, self.triple, p.beta, &p.horizons, p.replicas, seed)?;
        let mut table = ResultTable::new(meta, &["n", "mean_log_z", "mean_log_z_stderr", "pn_mean", "pn_sd"]);
        table.note("beta", fmt_f64(p.beta));
        table.note("replicas", p.replicas);
        self.note_environment(&mut table);
        note_estimate(&mut table, "slope", fit.slope);
        note_estimate(&mut table, "intercept", fit.intercept);
        table.note("slope_ci_low", fmt_f64(fit.ci.0));
        table.note("slope_ci_high", fmt_f64(fit.ci.1));
        table.note("verdict", fit.verdict.code());
        let sd_slope = if sds.iter().all(|s| s.1 > 0.0) {
            log_log_slope(&sds)
        } else {
            f64::NAN
        };
        table.note("sd_log_log_slope", fmt_f64(sd_slope));
        for ((n, e), (_, sd)) in fit.horizons.iter().zip(&fit.mean_log_z).zip(&sds) {
            table.push_row(vec![
                (*n).into(),
                e.mean.into(),
                e.stderr.into(),
                (e.mean / *n as f64).into(),
                (*sd).into(),
            ])?;
        }
        let points: Vec<(f64, f64)> = fit.horizons.iter().zip(&fit.mean_log_z).map(|(n, e)| (*n as f64, e.mean)).collect();
        let line: Vec<(f64, f64)> = points
            .iter()
            .map(|(n, _)| (*n, fit.intercept.mean + fit.slope.mean * n))
            .collect();
        let figure = Figure {
            file_name: "decay_fit.svg".into(),
            title: format!("E log Z_n, beta = {}", p.beta),
            x_label: "n".into(),
            y_label: "E log Z_n".into(),
            series: vec![("mean".into(), points), ("fit".into(), line)],
        };
        Ok((table, vec![figure]))
    }

    fn oracle_compare(&self, meta: TableMeta) -> Outcome {
        let p = &self.config.oracle_compare;
        let size = self.chain.len();
        let potentials: Vec<Vec<f64>> = match &p.potentials {
            Some(list) => list.clone(),
            None => {
                let mut rng = replica_rng(self.config.seed, 0);
                (0..p.random)
                    .map(|_| (0..size).map(|_| p.scale * rng.random_range(-1.0..=1.0)).collect())
                    .collect()
            }
        };
        let mut table = ResultTable::new(meta, &["potential", "c_of_f", "perron_log_root", "abs_diff"]);
        table.note("start", &self.chain.states()[self.chain.start()]);
        let mut worst: f64 = 0.0;
        for (k, values) in potentials.into_iter().enumerate() {
            let f = Potential::new(values)?;
            let c = c_of_f(self.chain, self.chain.start(), &f)?.c;
            let perron = perron_log_root(self.chain, &f)?;
            let diff = (c - perron).abs();
            worst = worst.max(diff);
            table.push_row(vec![k.into(), c.into(), perron.into(), diff.into()])?;
        }
        table.note("max_abs_diff", fmt_f64(worst));
        Ok((table, Vec::new()))
    }
}
