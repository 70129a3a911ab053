//! The six experiments. Each returns typed results; [`run_experiment`]
//! turns them into output tables.
//!
//! Randomness is derived per task: realization `m` of a sweep point uses
//! stream `m` of the run seed (fields of a disordered chain first, then the
//! environment state, then the probe angles when randomized), and disorder
//! draw `d` of the spectral sub-run uses stream `SPECTRAL_STREAM + d`.
//! Results are gathered in index order, so the worker count never changes
//! the output.

use std::f64::consts::PI;

use chaos_probe_core::dephasing::{
    haar_from_effective, perturbed_eigensystems, random_product_state, realization_rng,
    DecoherenceTrace, GridPropagator, PerturbedEigensystems, TimeGrid,
};
use chaos_probe_core::geomphase::{
    geometric_phase, normalize_curve, phase_series, probe_trajectory, unitary_phase, Orientation,
};
use chaos_probe_core::nonmarkov::{blp_measure, largest_revival_measure, DistinguishabilityTrace};
use chaos_probe_core::operators::{build_coupling, build_environment, ProbeConfig, SpinRegister};
use chaos_probe_core::spectral::{
    eigenvalues, level_statistics, magnetization_parity_sector, magnetization_sector,
    parity_sectors, restrict_terms, LEAKAGE_TOLERANCE,
};
use chaos_probe_core::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{
    Experiment, ModelConfig, NormalizeOrientation, PhaseSource, RunConfig, SectorSpec,
    SpectralConfig,
};
use crate::error::{CliError, Context, Result};
use crate::output::Table;
use crate::stats::mean_stderr;

/// First stream used by disorder draws of the spectral sub-run.
pub const SPECTRAL_STREAM: u64 = 1 << 32;

fn describe(value: Option<f64>) -> String {
    value.map_or_else(
        || "base parameters".to_string(),
        |v| format!("sweep value {v}"),
    )
}

fn grid(cfg: &RunConfig) -> Result<TimeGrid> {
    Ok(TimeGrid::new(
        cfg.probe.omega,
        cfg.periods,
        cfg.steps_per_period,
    )?)
}

/// Draws the probe for one realization, after the environment state.
fn realization_probe(cfg: &RunConfig, base: ProbeConfig, rng: &mut ChaCha8Rng) -> ProbeConfig {
    if cfg.randomize_probe {
        ProbeConfig {
            theta: rng.random_range(0.0..PI),
            phi: rng.random_range(0.0..2.0 * PI),
            ..base
        }
    } else {
        base
    }
}

/// Hamiltonian pieces shared by every realization of one sweep point.
struct Point<'a> {
    cfg: &'a RunConfig,
    model: ModelConfig,
    value: Option<f64>,
    reg: SpinRegister,
    grid: TimeGrid,
    probe: ProbeConfig,
}

impl<'a> Point<'a> {
    fn new(cfg: &'a RunConfig, value: Option<f64>, model: ModelConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            model,
            value,
            reg: cfg.register()?,
            grid: grid(cfg)?,
            probe: cfg.probe()?,
        })
    }

    fn eigensystems(&self, rng: &mut ChaCha8Rng) -> Result<PerturbedEigensystems> {
        let env = build_environment(&self.model.environment(self.reg.len(), rng), self.reg)
            .at(|| describe(self.value))?;
        let coupling = build_coupling(self.probe.g, self.reg)?;
        perturbed_eigensystems(&env, &coupling).at(|| describe(self.value))
    }

    /// Applies `f` to every trace of this point, in realization order.
    ///
    /// `Effective` yields one trace for a fixed Hamiltonian and one per
    /// disorder draw otherwise.
    fn map_traces<T, F>(&self, source: PhaseSource, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&DecoherenceTrace, &ProbeConfig) -> Result<T> + Sync,
    {
        let r = self.cfg.realizations as u64;
        let seed = self.cfg.seed;
        let disordered = self.model.is_disordered();
        match (source, disordered) {
            (PhaseSource::Effective, false) => {
                let pe = self.eigensystems(&mut realization_rng(seed, 0))?;
                let trace = GridPropagator::new(&pe, &self.grid).effective();
                Ok(vec![f(&trace, &self.probe)?])
            }
            (PhaseSource::Effective, true) => (0..r)
                .into_par_iter()
                .map(|m| {
                    let mut rng = realization_rng(seed, m);
                    let pe = self.eigensystems(&mut rng)?;
                    f(
                        &GridPropagator::new(&pe, &self.grid).effective(),
                        &self.probe,
                    )
                })
                .collect(),
            (PhaseSource::Realizations, false) => {
                let pe = self.eigensystems(&mut realization_rng(seed, 0))?;
                let prop = GridPropagator::new(&pe, &self.grid);
                (0..r)
                    .into_par_iter()
                    .map(|m| {
                        let mut rng = realization_rng(seed, m);
                        let state = random_product_state(self.reg, &mut rng);
                        let probe = realization_probe(self.cfg, self.probe, &mut rng);
                        f(&prop.sampled(&state)?, &probe)
                    })
                    .collect()
            }
            (PhaseSource::Realizations, true) => (0..r)
                .into_par_iter()
                .map(|m| {
                    let mut rng = realization_rng(seed, m);
                    let pe = self.eigensystems(&mut rng)?;
                    let state = random_product_state(self.reg, &mut rng);
                    let probe = realization_probe(self.cfg, self.probe, &mut rng);
                    f(
                        &GridPropagator::new(&pe, &self.grid).sampled(&state)?,
                        &probe,
                    )
                })
                .collect(),
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub mean_absdelta: Option<f64>,
    pub stderr: Option<f64>,
    pub eta: Option<f64>,
    pub nblp: Option<f64>,
    pub nlr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub orientation: NormalizeOrientation,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn column(&self, pick: impl Fn(&SweepRow) -> Option<f64>) -> Option<Vec<f64>> {
        self.rows.iter().map(pick).collect()
    }

    pub fn params(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.param).collect()
    }

    pub fn mean_absdelta(&self) -> Option<Vec<f64>> {
        self.column(|r| r.mean_absdelta)
    }

    pub fn eta(&self) -> Option<Vec<f64>> {
        self.column(|r| r.eta)
    }

    pub fn nblp(&self) -> Option<Vec<f64>> {
        self.column(|r| r.nblp)
    }

    pub fn nlr(&self) -> Option<Vec<f64>> {
        self.column(|r| r.nlr)
    }

    /// Column rescaled onto `[0, 1]`; `None` when absent or constant.
    pub fn normalized(&self, column: Option<Vec<f64>>) -> Option<Vec<f64>> {
        let orientation = match self.orientation {
            NormalizeOrientation::Inverted => Orientation::Inverted,
            NormalizeOrientation::Direct => Orientation::Direct,
        };
        normalize_curve(&column?, orientation).ok()
    }

    pub fn to_table(&self) -> Table {
        let norms = [
            self.normalized(self.mean_absdelta()),
            self.normalized(self.eta()),
            self.normalized(self.nblp()),
            self.normalized(self.nlr()),
        ];
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![
                    Some(r.param),
                    r.mean_absdelta,
                    r.stderr,
                    r.eta,
                    r.nblp,
                    r.nlr,
                ];
                row.extend(norms.iter().map(|c| c.as_ref().map(|c| c[i])));
                row
            })
            .collect();
        Table::new(
            "sweep",
            &[
                "param",
                "mean_absdelta",
                "stderr",
                "eta",
                "nblp",
                "nlr",
                "norm_absdelta",
                "norm_eta",
                "norm_nblp",
                "norm_nlr",
            ],
            rows,
        )
    }
}

/// `η` for one model, averaged over disorder draws for disordered chains.
pub fn spectral_eta(
    cfg: &RunConfig,
    spectral: &SpectralConfig,
    model: &ModelConfig,
    value: Option<f64>,
) -> Result<f64> {
    let draws = if model.is_disordered() {
        spectral.realizations.unwrap_or(1)
    } else {
        1
    };
    let etas = (0..draws as u64)
        .into_par_iter()
        .map(|d| spectral_eta_draw(cfg, spectral, model, value, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(etas.iter().sum::<f64>() / etas.len() as f64)
}

fn spectral_eta_draw(
    cfg: &RunConfig,
    spectral: &SpectralConfig,
    model: &ModelConfig,
    value: Option<f64>,
    draw: u64,
) -> Result<f64> {
    let reg = SpinRegister::with_limit(spectral.len, 30)
        .map_err(|e| CliError::config("spectral.L", e.to_string()))?;
    let mut rng = realization_rng(cfg.seed, SPECTRAL_STREAM + draw);
    let terms = model.environment(reg.len(), &mut rng).terms(reg)?;
    let tolerance = if spectral.allow_leakage {
        f64::INFINITY
    } else {
        LEAKAGE_TOLERANCE
    };
    let h = match spectral.sector {
        SectorSpec::Full => terms.to_operator()?,
        SectorSpec::ParityEven => {
            restrict_terms(&terms, &parity_sectors(reg).0, tolerance).at(|| describe(value))?
        }
        SectorSpec::ParityOdd => {
            restrict_terms(&terms, &parity_sectors(reg).1, tolerance).at(|| describe(value))?
        }
        SectorSpec::Magnetization(n) => {
            restrict_terms(&terms, &magnetization_sector(reg, n)?, tolerance)
                .at(|| describe(value))?
        }
        SectorSpec::MagnetizationEven(n) | SectorSpec::MagnetizationOdd(n) => {
            let even = matches!(spectral.sector, SectorSpec::MagnetizationEven(_));
            let sector = magnetization_parity_sector(reg, n, even)?;
            restrict_terms(&terms, &sector, tolerance).at(|| describe(value))?
        }
    };
    let values = eigenvalues(&h).at(|| describe(value))?;
    Ok(level_statistics(&values).at(|| describe(value))?.eta)
}

/// `η` at every sweep value.
pub fn eta_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let spectral = cfg
        .spectral
        .as_ref()
        .ok_or_else(|| CliError::config("spectral", "required by eta-sweep"))?;
    let points = cfg.sweep_models()?;
    let etas = points
        .par_iter()
        .map(|(v, model)| spectral_eta(cfg, spectral, model, *v))
        .collect::<Result<Vec<_>>>()?;
    let rows = points
        .iter()
        .zip(etas)
        .map(|((v, _), eta)| SweepRow {
            param: v.unwrap_or(f64::NAN),
            mean_absdelta: None,
            stderr: None,
            eta: Some(eta),
            nblp: None,
            nlr: None,
        })
        .collect();
    Ok(sweep_result(cfg, rows))
}

fn sweep_result(cfg: &RunConfig, rows: Vec<SweepRow>) -> SweepResult {
    SweepResult {
        parameter: cfg
            .sweep
            .as_ref()
            .map(|s| s.parameter.clone())
            .unwrap_or_default(),
        orientation: cfg.orientation,
        rows,
    }
}

fn join_eta(cfg: &RunConfig, mut result: SweepResult) -> Result<SweepResult> {
    if cfg.spectral.is_some() {
        let etas = eta_sweep(cfg)?;
        for (row, e) in result.rows.iter_mut().zip(etas.rows) {
            row.eta = e.eta;
        }
    }
    Ok(result)
}

/// `δΦ` of every realization at one model.
pub fn realization_deltas(
    cfg: &RunConfig,
    value: Option<f64>,
    model: ModelConfig,
) -> Result<Vec<f64>> {
    let point = Point::new(cfg, value, model)?;
    point.map_traces(cfg.phase_source, |trace, probe| {
        Ok(geometric_phase(probe, trace).at(|| describe(value))?.delta)
    })
}

/// Mean `|δΦ|` and its standard error at every sweep value, joined with
/// `η` when a spectral sub-run is configured.
pub fn phase_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let points = cfg.sweep_models()?;
    let deltas = points
        .par_iter()
        .map(|(v, model)| realization_deltas(cfg, *v, model.clone()))
        .collect::<Result<Vec<_>>>()?;
    let rows = points
        .iter()
        .zip(deltas)
        .map(|((v, _), d)| {
            let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
            let (mean, stderr) = mean_stderr(&abs);
            SweepRow {
                param: v.unwrap_or(f64::NAN),
                mean_absdelta: Some(mean),
                stderr,
                eta: None,
                nblp: None,
                nlr: None,
            }
        })
        .collect();
    join_eta(cfg, sweep_result(cfg, rows))
}

/// BLP and largest-revival measures from the effective factor, with the
/// probe pair `|±x⟩`.
pub fn nonmarkov_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let points = cfg.sweep_models()?;
    let measures = points
        .par_iter()
        .map(|(v, model)| {
            let point = Point::new(cfg, *v, model.clone())?;
            point.map_traces(PhaseSource::Effective, |trace, probe| {
                let d = DistinguishabilityTrace::from_decoherence(probe.omega, trace)
                    .at(|| describe(*v))?;
                Ok((blp_measure(&d), largest_revival_measure(&d)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = points
        .iter()
        .zip(measures)
        .map(|((v, _), m)| {
            let n = m.len() as f64;
            SweepRow {
                param: v.unwrap_or(f64::NAN),
                mean_absdelta: None,
                stderr: None,
                eta: None,
                nblp: Some(m.iter().map(|x| x.0).sum::<f64>() / n),
                nlr: Some(m.iter().map(|x| x.1).sum::<f64>() / n),
            }
        })
        .collect();
    join_eta(cfg, sweep_result(cfg, rows))
}

/// Mean decoherence factor with the probe's eigenbranch and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub trace: DecoherenceTrace,
    pub lambda_plus: Vec<f64>,
    pub phase: Vec<f64>,
    pub theta: f64,
}

impl TraceResult {
    /// `(Φ, Φ_u, |δΦ|)` at the end of every period.
    pub fn per_period(&self) -> Vec<(f64, f64, f64)> {
        let spp = self.trace.grid.steps_per_period;
        (1..=self.trace.grid.periods)
            .map(|p| {
                let phi = self.phase[p * spp];
                let phi_u = unitary_phase(self.theta, p);
                (phi, phi_u, (1.0 - phi / phi_u).abs())
            })
            .collect()
    }

    pub fn to_tables(&self) -> Vec<Table> {
        let times = self.trace.grid.times();
        let rows = (0..times.len())
            .map(|i| {
                let r = self.trace.values[i];
                vec![
                    Some(times[i]),
                    Some(r.re),
                    Some(r.im),
                    Some(r.norm()),
                    Some(self.lambda_plus[i]),
                    Some(self.phase[i]),
                ]
            })
            .collect();
        let trace = Table::new(
            "trace",
            &["t", "re_r", "im_r", "abs_r", "lambda_plus", "phi"],
            rows,
        );
        let window = self.trace.per_period_mean_abs();
        let cumulative = self.trace.cumulative_mean_abs();
        let rows = self
            .per_period()
            .into_iter()
            .enumerate()
            .map(|(i, (phi, phi_u, d))| {
                vec![
                    Some((i + 1) as f64),
                    Some(phi),
                    Some(phi_u),
                    Some(d),
                    Some(window[i]),
                    Some(cumulative[i]),
                ]
            })
            .collect();
        let periods = Table::new(
            "periods",
            &[
                "period",
                "phi",
                "phi_u",
                "abs_delta",
                "mean_abs_r",
                "cumulative_mean_abs_r",
            ],
            rows,
        );
        vec![trace, periods]
    }
}

/// Decoherence factor averaged over the configured realizations, or the
/// effective factor.
pub fn trace_run(cfg: &RunConfig) -> Result<TraceResult> {
    let point = Point::new(cfg, None, cfg.model.clone())?;
    let traces = point.map_traces(cfg.phase_source, |t, _| Ok(t.clone()))?;
    let trace = if traces.len() == 1 {
        traces.into_iter().next().expect("one trace")
    } else {
        DecoherenceTrace::mean(&traces, cfg.seed)?
    };
    let probe = cfg.probe()?;
    let traj = probe_trajectory(&probe, &trace)?;
    let phase = phase_series(&traj)?;
    Ok(TraceResult {
        lambda_plus: traj.lambda_plus,
        phase,
        theta: probe.theta,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub param: Option<f64>,
    pub realizations: usize,
    pub rms: f64,
}

/// Realization counts at which convergence is reported: powers of ten up
/// to `r`, and `r` itself.
pub fn checkpoints(r: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |&k| k.checked_mul(10))
        .take_while(|&k| k < r)
        .collect();
    out.push(r);
    out
}

/// RMS distance between the running realization mean and the effective
/// factor over `t ≤ t_max`.
pub fn convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    let t_max = cfg.t_max.unwrap_or(f64::INFINITY);
    let mut out = Vec::new();
    for (v, model) in cfg.sweep_models()? {
        let point = Point::new(cfg, v, model)?;
        let traces = point.map_traces(PhaseSource::Realizations, |t, _| Ok(t.values.clone()))?;
        let effective = point
            .map_traces(PhaseSource::Effective, |t, _| Ok(t.values.clone()))?
            .remove(0);
        let keep = point
            .grid
            .times()
            .iter()
            .take_while(|&&t| t <= t_max * (1.0 + 1e-12))
            .count();
        let mut sum = vec![Complex64::new(0.0, 0.0); keep];
        let marks = checkpoints(traces.len());
        for (m, values) in traces.iter().enumerate() {
            for (s, x) in sum.iter_mut().zip(values) {
                *s += x;
            }
            if marks.contains(&(m + 1)) {
                let r = (m + 1) as f64;
                let ms = sum
                    .iter()
                    .zip(&effective)
                    .map(|(s, e)| (s / r - e).norm_sqr())
                    .sum::<f64>()
                    / keep as f64;
                out.push(ConvergenceRow {
                    param: v,
                    realizations: m + 1,
                    rms: ms.sqrt(),
                });
            }
        }
    }
    Ok(out)
}

/// Haar-averaged Loschmidt echo against a Monte-Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LeResult {
    pub times: Vec<f64>,
    pub haar: Vec<f64>,
    pub mc_mean: Vec<f64>,
    pub mc_stderr: Vec<f64>,
}

/// Normalized complex Gaussian vector.
pub fn haar_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut psi: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    psi
}

pub fn loschmidt(cfg: &RunConfig) -> Result<LeResult> {
    let point = Point::new(cfg, None, cfg.model.clone())?;
    let pe = point.eigensystems(&mut realization_rng(cfg.seed, 0))?;
    let prop = GridPropagator::new(&pe, &point.grid);
    let haar = haar_from_effective(pe.dim(), &prop.effective().values);
    let echoes = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|m| {
            Ok(prop
                .sampled(&haar_state(pe.dim(), &mut realization_rng(cfg.seed, m)))?
                .loschmidt_echo())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = point.grid.len();
    let (mut mc_mean, mut mc_stderr) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let column: Vec<f64> = echoes.iter().map(|e| e[i]).collect();
        let (m, e) = mean_stderr(&column);
        mc_mean.push(m);
        mc_stderr.push(e.unwrap_or(f64::NAN));
    }
    Ok(LeResult {
        times: point.grid.times().to_vec(),
        haar,
        mc_mean,
        mc_stderr,
    })
}

/// Runs the configured experiment and returns its output tables.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<Table>> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        Experiment::Trace => trace_run(cfg)?.to_tables(),
        Experiment::PhaseSweep => vec![phase_sweep(cfg)?.to_table()],
        Experiment::EtaSweep => vec![eta_sweep(cfg)?.to_table()],
        Experiment::Nonmarkov => vec![nonmarkov_sweep(cfg)?.to_table()],
        Experiment::Convergence => {
            let rows = convergence(cfg)?
                .into_iter()
                .map(|r| vec![r.param, Some(r.realizations as f64), Some(r.rms)])
                .collect();
            vec![Table::new(
                "convergence",
                &["param", "realizations", "rms"],
                rows,
            )]
        }
        Experiment::Le => {
            let le = loschmidt(cfg)?;
            let rows = (0..le.times.len())
                .map(|i| {
                    vec![
                        Some(le.times[i]),
                        Some(le.haar[i]),
                        Some(le.mc_mean[i]),
                        Some(le.mc_stderr[i]),
                    ]
                })
                .collect();
            vec![Table::new(
                "le",
                &["t", "haar_le", "mc_mean", "mc_stderr"],
                rows,
            )]
        }
    })
}

/// [`run_experiment`] on a pool of `workers` threads.
pub fn run_with_workers(cfg: &RunConfig, workers: usize) -> Result<Vec<Table>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    pool.install(|| run_experiment(cfg))
}
