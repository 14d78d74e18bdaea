use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, InitSpec};
use crate::engine::{coupled_comparison, grid_index, COMPARISON_SLACK, Nonlinearity, SimulationPlan, Simulator, Trajectory};
use crate::error::{Error, Result};
use crate::noise::{build_embedding, covariance_diagnostic, SpatialField, SpectralCovariance};
use crate::observables::{
    estimate_eta, k_beta, predicted_variance, EtaCurve, KBetaMethod, LimitConstants, RegionMask,
};
use crate::rng::{domain, StreamKey};
use crate::stats::{
    correlation_decay_check, default_decay_lags, functional_cov_check, increment_moment_fit, ks_distance,
    lemma31_check, log_grid, moment_ratio_check, rate_fit, scaling_fit, standardize, variance_limit_check,
    Rule, SampleSet, Standardization, StatsReport,
};

pub const VARIANCE_TOLERANCE: f64 = 0.15;
pub const SCALING_TOLERANCE: f64 = 0.05;
pub const KS_THRESHOLD: f64 = 0.05;
pub const CORRELATION_TOLERANCE: f64 = 0.05;
pub const FCLT_COVARIANCE_TOLERANCE: f64 = 0.15;
pub const NOISE_RATIO_TOLERANCE: f64 = 0.1;
pub const MOMENT_RATIO_TOLERANCE: f64 = 0.2;
pub const STANDARDIZATION_TOLERANCE: f64 = 0.15;
/// Monte Carlo `k_beta` must agree with the closed form within this many standard errors.
pub const KBETA_AGREEMENT_SIGMAS: f64 = 4.0;
/// Number of panels of the `eta` grid on `[0, T]`.
pub const ETA_PANELS: usize = 16;
pub const LEMMA31_S_RANGE: (f64, f64) = (1e-3, 1e3);
pub const TIGHTNESS_LAGS: usize = 6;
/// Shortest increment lag, in steps.
pub const TIGHTNESS_MIN_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub replica_id: u64,
    pub radius: f64,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantRow {
    pub name: String,
    pub d: usize,
    pub beta: f64,
    /// Region the constant refers to; filled from the config unless set by the stage.
    pub region_kind: String,
    pub params: String,
    pub value: f64,
    pub stderr: f64,
    pub method: String,
}

impl ConstantRow {
    fn new(name: &str, params: impl Into<String>, value: f64, stderr: f64, method: &str) -> Self {
        Self {
            name: name.into(),
            d: 0,
            beta: f64::NAN,
            region_kind: String::new(),
            params: params.into(),
            value,
            stderr,
            method: method.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "message", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    /// `sigma(1) = 0`: the CLT normalization vanishes and no statistic is computed.
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub kind: String,
    pub config_hash: String,
    #[serde(skip)]
    pub config_echo: String,
    pub seed: u64,
    pub n_replicas: usize,
    pub outcome: Outcome,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<SampleRow>,
    #[serde(skip)]
    pub constants: Vec<ConstantRow>,
    pub reports: Vec<StatsReport>,
    /// Wall-clock duration; kept out of every output file.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ResultSet {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.kind.name().into(),
            config_hash: config.hash(),
            config_echo: config.echo(),
            seed: config.seed,
            n_replicas: config.n_replicas,
            outcome: Outcome::Completed,
            notes: Vec::new(),
            samples: Vec::new(),
            constants: Vec::new(),
            reports: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Completed && self.reports.iter().all(|r| r.pass)
    }

    /// 0 pass, 1 statistical failure, 2 degenerate configuration.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Degenerate(_) => 2,
            Outcome::Completed if self.passed() => 0,
            Outcome::Completed => 1,
        }
    }

    pub fn report(&self, metric: &str) -> Option<&StatsReport> {
        self.reports.iter().find(|r| r.metric == metric)
    }
}

/// Marks a report as informational: kept in the output, never failing the run.
fn info(mut report: StatsReport) -> StatsReport {
    report.metric.push_str("-info");
    report.pass = true;
    report
}

fn failed(metric: &str, params: impl Into<String>, target: f64, rule: Rule) -> StatsReport {
    StatsReport::new(metric, params, f64::NAN, f64::NAN, target, 0.0, rule)
}

/// Runs `config` on `workers` threads (0 picks the rayon default).
///
/// Statistical failures are reported in the result set; configuration errors
/// and numerical blow-ups are returned as errors.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ResultSet> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    let mut out = ResultSet::empty(config);
    pool.install(|| -> Result<()> {
        let staged = match config.kind {
            ExperimentKind::Constants => run_constants(config, &mut out),
            ExperimentKind::Lemma31 => run_lemma31(config, &mut out),
            ExperimentKind::NoiseValidate => run_noise_validate(config, &mut out),
            _ => run_simulation(config, &mut out),
        };
        match staged {
            Err(Error::Degenerate(msg)) => {
                out.outcome = Outcome::Degenerate(msg);
                out.reports.clear();
                Ok(())
            }
            other => other,
        }
    })?;
    for row in &mut out.constants {
        row.d = config.spec.d();
        row.beta = config.spec.beta();
        if row.region_kind.is_empty() {
            row.region_kind = config.region.name().into();
        }
    }
    out.elapsed = started.elapsed();
    Ok(out)
}

fn run_constants(config: &ExperimentConfig, out: &mut ResultSet) -> Result<()> {
    let spec = &config.spec;
    let closed = (spec.d() == 1).then(|| k_beta(config.region, spec, KBetaMethod::ClosedForm)).transpose()?;
    if let Some(k) = closed {
        out.constants.push(ConstantRow::new("k_beta", "", k.value, k.stderr, "closed-form"));
    }
    for (i, kind) in [crate::observables::RegionKind::Ball, crate::observables::RegionKind::Box]
        .into_iter()
        .enumerate()
    {
        let method = KBetaMethod::MonteCarlo {
            samples: config.kbeta_samples,
            seed: config.seed.wrapping_add(i as u64),
        };
        let mc = k_beta(kind, spec, method)?;
        let p = format!("samples={}", config.kbeta_samples);
        let mut row = ConstantRow::new("k_beta", p.clone(), mc.value, mc.stderr, "monte-carlo");
        row.region_kind = kind.name().into();
        out.constants.push(row);
        if let Some(k) = closed {
            out.reports.push(StatsReport::new(
                "kbeta-mc-agreement",
                p,
                mc.value,
                mc.stderr,
                k.value,
                KBETA_AGREEMENT_SIGMAS * mc.stderr,
                Rule::Within,
            ));
        }
    }
    Ok(())
}

fn run_lemma31(config: &ExperimentConfig, out: &mut ResultSet) -> Result<()> {
    let d = config.spec.d();
    let ys: Vec<Vec<f64>> = config
        .lemma31_y
        .iter()
        .map(|&y| {
            let mut v = vec![0.0; d];
            v[0] = y;
            v
        })
        .collect();
    let grid = log_grid(LEMMA31_S_RANGE.0, LEMMA31_S_RANGE.1, config.lemma31_points);
    for r in lemma31_check(&config.spec, &ys, &grid)? {
        let p = format!("|y|={}", r.y_norm);
        out.constants.push(ConstantRow::new("lemma31_max_ratio", format!("{p};argmax_s={}", r.argmax_s), r.max_ratio, 0.0, "poisson-series"));
        out.constants.push(ConstantRow::new("lemma31_refined_max_ratio", p.clone(), r.refined_max_ratio, 0.0, "poisson-series"));
        out.constants.push(ConstantRow::new("lemma31_ratio_small_s", format!("{p};s={}", grid[0]), r.ratios[0], 0.0, "poisson-series"));
        out.constants.push(ConstantRow::new(
            "lemma31_ratio_large_s",
            format!("{p};s={}", grid[grid.len() - 1]),
            r.ratios[grid.len() - 1],
            0.0,
            "poisson-series",
        ));
        out.reports.extend(r.reports);
    }
    Ok(())
}

fn run_noise_validate(config: &ExperimentConfig, out: &mut ResultSet) -> Result<()> {
    let noise = build_embedding(config.lattice, config.spec)?;
    let self_energy = noise.self_energy();
    out.constants.push(ConstantRow::new("self_energy", format!("h={}", config.lattice.spacing()), self_energy.value, self_energy.stderr, "chord"));
    out.constants.push(ConstantRow::new("clamped_mass", "", noise.clamped_mass(), 0.0, "embedding"));
    let slices: Vec<SpatialField> = (0..config.noise_slices as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamKey::new(config.seed, domain::NOISE_CHECK, i).at_step(0);
            noise.sample_slice(config.dt, &mut rng)
        })
        .collect();
    let d = config.spec.d();
    let lags: Vec<Vec<isize>> = (1..=config.noise_max_lag as isize)
        .map(|k| {
            let mut v = vec![0; d];
            v[0] = k;
            v
        })
        .collect();
    let report = covariance_diagnostic(&slices, &lags, &noise, config.dt)?;
    for e in &report.entries {
        out.reports.push(StatsReport::new(
            "noise-covariance-ratio",
            format!("lag={:?};rho={}", e.lag, e.distance),
            e.ratio,
            e.stderr / e.theoretical,
            1.0,
            NOISE_RATIO_TOLERANCE,
            Rule::Within,
        ));
    }
    Ok(())
}

/// Step grid used by one simulation experiment.
struct Schedule {
    /// Times written to `samples.csv`.
    output_times: Vec<f64>,
    eta_times: Vec<f64>,
    tightness_pairs: Vec<(f64, f64)>,
    all_times: Vec<f64>,
}

fn schedule(config: &ExperimentConfig) -> Schedule {
    let dt = config.dt;
    let steps = grid_index(config.t_final, dt).unwrap_or(0);
    let at = |k: usize| k as f64 * dt;
    let mut eta_steps: Vec<usize> = (0..=ETA_PANELS).map(|i| (i * steps + ETA_PANELS / 2) / ETA_PANELS).collect();
    eta_steps.dedup();
    let eta_times: Vec<f64> = eta_steps.iter().map(|&k| at(k)).collect();

    let mut tightness_pairs = Vec::new();
    if config.kind == ExperimentKind::Tightness {
        let max_steps = grid_index(config.tightness_max_lag, dt).unwrap_or(0);
        let base = steps.saturating_sub(max_steps);
        if max_steps >= TIGHTNESS_MIN_STEPS {
            let (lo, hi) = (TIGHTNESS_MIN_STEPS as f64, max_steps as f64);
            let mut lags: Vec<usize> = (0..TIGHTNESS_LAGS)
                .map(|i| (lo * (hi / lo).powf(i as f64 / (TIGHTNESS_LAGS - 1) as f64)).round() as usize)
                .collect();
            lags.dedup();
            tightness_pairs = lags.iter().map(|&m| (at(base), at(base + m))).collect();
        }
    }

    let mut all_steps: Vec<usize> = eta_steps;
    let mut extra: Vec<f64> = config.record_times.clone();
    extra.push(config.t_final);
    match config.kind {
        ExperimentKind::Fclt => extra.extend(&config.fclt_times),
        ExperimentKind::Decay => extra.push(config.decay_time),
        _ => {}
    }
    for &(s, t) in &tightness_pairs {
        extra.push(s);
        extra.push(t);
    }
    all_steps.extend(extra.iter().filter_map(|&t| grid_index(t, dt)));
    all_steps.sort_unstable();
    all_steps.dedup();
    Schedule {
        output_times: config.record_times.clone(),
        eta_times,
        tightness_pairs,
        all_times: all_steps.iter().map(|&k| at(k)).collect(),
    }
}

fn run_replicas(sim: &Simulator<'_>, seed: u64, n: usize) -> Result<Vec<Trajectory>> {
    let results: Vec<Result<Trajectory>> = (0..n as u64).into_par_iter().map(|r| sim.run(seed, r)).collect();
    // The first failure in replica order, independent of scheduling.
    results.into_iter().collect()
}

fn limit_constants(
    config: &ExperimentConfig,
    trajectories: &[Trajectory],
    window: &RegionMask,
    eta_times: &[f64],
    out: &mut ResultSet,
) -> Result<LimitConstants> {
    let spec = config.spec;
    let method = if spec.d() == 1 {
        KBetaMethod::ClosedForm
    } else {
        KBetaMethod::MonteCarlo {
            samples: config.kbeta_samples,
            seed: config.seed,
        }
    };
    let k = k_beta(config.region, &spec, method)?;
    out.constants.push(ConstantRow::new("k_beta", "", k.value, k.stderr, method.name()));

    // For affine sigma and constant data, E sigma(u) = sigma(E u) = sigma(u0) exactly.
    let affine = matches!(config.sigma.kind(), Nonlinearity::Linear | Nonlinearity::Affine { .. });
    let (eta, method) = match config.init {
        InitSpec::Constant { value } if affine => {
            (EtaCurve::constant(config.sigma.eval(value), eta_times.to_vec()), "exact")
        }
        _ => (estimate_eta(trajectories, &config.sigma, window, eta_times)?, "window-mean"),
    };
    for ((&t, &v), &se) in eta.times.iter().zip(&eta.values).zip(&eta.stderrs) {
        out.constants.push(ConstantRow::new("eta", format!("t={t}"), v, se, method));
    }
    Ok(LimitConstants { spec, k_beta: k, eta })
}

fn time_index(traj: &Trajectory, t: f64) -> usize {
    traj.record_times
        .iter()
        .position(|&r| (r - t).abs() <= 1e-9 * t.abs().max(1e-12))
        .expect("scheduled time is recorded")
}

fn run_simulation(config: &ExperimentConfig, out: &mut ResultSet) -> Result<()> {
    let noise: SpectralCovariance = build_embedding(config.lattice, config.spec)?;
    let sched = schedule(config);
    let regions = config.regions()?;
    let mut plan = SimulationPlan::new(config.t_final, config.dt, &sched.all_times, regions)?
        .with_window(config.window_collar);
    if config.kind == ExperimentKind::Decay {
        plan = plan.with_stored_fields(&[config.decay_time])?;
    }
    let init = config.init.build(config.lattice)?;
    let sim = Simulator::new(&noise, config.sigma, &init, plan)?;
    let trajectories = run_replicas(&sim, config.seed, config.n_replicas)?;

    let radii = &config.r_list;
    for traj in &trajectories {
        for &t in &sched.output_times {
            let k = time_index(traj, t);
            for (j, &r) in radii.iter().enumerate() {
                out.samples.push(SampleRow {
                    replica_id: traj.replica_id,
                    radius: r,
                    time: t,
                    value: traj.average(k, j),
                });
            }
        }
    }

    let window = RegionMask::interior(&config.lattice, config.window_collar)?;
    let constants = limit_constants(config, &trajectories, &window, &sched.eta_times, out)?;
    let t = config.t_final;
    if !radii.is_empty() {
        let integral = constants.eta.integrated_square(t)?;
        out.constants.push(ConstantRow::new("int_eta_sq", format!("t={t}"), integral, 0.0, "trapezoid"));
        for &r in radii {
            let v = predicted_variance(t, r, &constants)?;
            out.constants.push(ConstantRow::new("predicted_variance", format!("R={r};t={t}"), v, 0.0, "limit"));
        }
    }
    let sets = |time: f64| -> Result<Vec<SampleSet>> {
        let k = time_index(&trajectories[0], time);
        radii
            .iter()
            .enumerate()
            .map(|(j, &r)| SampleSet::from_trajectories(&trajectories, k, j, r))
            .collect()
    };
    let need_radii = |n: usize| -> Result<()> {
        if radii.len() < n {
            return Err(Error::config("R_list", format!("{} needs at least {n} radii", config.kind)));
        }
        Ok(())
    };
    let largest = radii.len().checked_sub(1);

    match config.kind {
        ExperimentKind::VarianceLimit => {
            need_radii(2)?;
            let report = variance_limit_check(&sets(t)?, &constants, VARIANCE_TOLERANCE)?;
            out.reports.extend(report.reports);
        }
        ExperimentKind::Clt => {
            need_radii(3)?;
            clt_reports(config, &sets(t)?, &constants, out)?;
            if let InitSpec::Cosine { .. } = config.init {
                comparison_report(config, &noise, &init, out)?;
            }
        }
        ExperimentKind::Fclt => {
            need_radii(1)?;
            let j = largest.unwrap();
            let r = functional_cov_check(
                &trajectories,
                j,
                &config.fclt_times,
                radii[j],
                &constants,
                FCLT_COVARIANCE_TOLERANCE,
                CORRELATION_TOLERANCE,
            )?;
            out.reports.extend(r.reports);
        }
        ExperimentKind::Tightness => {
            need_radii(2)?;
            if sched.tightness_pairs.is_empty() {
                return Err(Error::config("tightness_max_lag", "shorter than the minimum increment lag"));
            }
            let j = largest.unwrap();
            for (i, &r) in radii.iter().enumerate() {
                let fit = increment_moment_fit(&trajectories, i, r, &sched.tightness_pairs, config.tightness_p)?;
                out.notes.extend(fit.warnings.iter().cloned());
                for (&lag, &m) in fit.lags.iter().zip(&fit.moments) {
                    out.constants.push(ConstantRow::new("increment_moment", format!("R={r};p={};lag={lag}", config.tightness_p), m, 0.0, "empirical"));
                }
                out.reports.push(if i == j { fit.report } else { info(fit.report) });
            }
            let pair = (sched.tightness_pairs[0].0, sched.tightness_pairs.last().unwrap().1);
            out.reports.push(moment_ratio_check(
                &trajectories,
                (j - 1, radii[j - 1]),
                (j, radii[j]),
                pair,
                config.tightness_p,
                &config.spec,
                MOMENT_RATIO_TOLERANCE,
            )?);
        }
        ExperimentKind::Decay => {
            let k = time_index(&trajectories[0], config.decay_time);
            let fields: Vec<&SpatialField> = trajectories.iter().map(|tr| &tr.fields[&k]).collect();
            let lags = default_decay_lags(config.lattice.n(), config.decay_lags);
            let r = correlation_decay_check(&fields, &config.sigma, &window, &lags, config.spec.beta())?;
            for e in &r.entries {
                out.constants.push(ConstantRow::new("decay_psi", format!("xi={};t={}", e.distance, config.decay_time), e.psi, 0.0, "empirical"));
                out.constants.push(ConstantRow::new("decay_product", format!("xi={};t={}", e.distance, config.decay_time), e.product, 0.0, "empirical"));
            }
            out.reports.push(r.report);
        }
        _ => unreachable!("non-simulation kinds are dispatched earlier"),
    }
    Ok(())
}

fn clt_reports(
    config: &ExperimentConfig,
    sets: &[SampleSet],
    constants: &LimitConstants,
    out: &mut ResultSet,
) -> Result<()> {
    let n = config.n_replicas;
    let mut ks_pairs = Vec::new();
    let mut sigma_pairs = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let z = standardize(set, Standardization::Empirical)?;
        let ks = ks_distance(&z)?;
        ks_pairs.push((set.radius, ks));
        sigma_pairs.push((set.radius, set.variance().sqrt()));
        let report = StatsReport::new(
            "ks-distance",
            format!("R={};t={};N={n}", set.radius, set.time),
            ks,
            0.0,
            KS_THRESHOLD,
            0.0,
            Rule::AtMost,
        );
        out.reports.push(if i + 1 == sets.len() { report } else { info(report) });
    }

    let exponent = 0.5 * config.spec.variance_exponent();
    let fit = scaling_fit(&sigma_pairs)?;
    out.reports.push(StatsReport::new(
        "scaling-exponent",
        format!("R={:?}", config.r_list),
        fit.slope,
        fit.stderr,
        exponent,
        SCALING_TOLERANCE,
        Rule::Within,
    ));

    let params = format!("R={:?};N={n}", config.r_list);
    match rate_fit(&ks_pairs, n) {
        Ok(rate) => {
            out.notes.extend(rate.warnings.iter().cloned());
            out.reports.push(StatsReport::new("rate-exponent", params.clone(), rate.exponent, rate.stderr, 0.0, 0.0, Rule::AtMost));
        }
        Err(Error::InsufficientData(msg)) => {
            out.notes.push(format!("rate fit: {msg}"));
            out.reports.push(failed("rate-exponent", params.clone(), 0.0, Rule::AtMost));
        }
        Err(e) => return Err(e),
    }
    // Non-increasing in R, allowing one increase whose larger-R point is under the floor.
    let floor = crate::stats::ks_floor(n, crate::stats::KS_FLOOR_1PCT);
    let increases: Vec<usize> = (1..ks_pairs.len()).filter(|&i| ks_pairs[i].1 > ks_pairs[i - 1].1).collect();
    let monotone = increases.is_empty() || (increases.len() == 1 && ks_pairs[increases[0]].1 < floor);
    out.reports.push(StatsReport::condition("rate-monotone", params, monotone));

    let last = sets.last().unwrap();
    let predicted = predicted_variance(last.time, last.radius, constants)?;
    let factor = (last.variance() / predicted).sqrt();
    out.reports.push(StatsReport::new(
        "standardization-factor",
        format!("R={};t={}", last.radius, last.time),
        factor,
        0.0,
        1.0,
        STANDARDIZATION_TOLERANCE,
        Rule::Within,
    ));
    Ok(())
}

fn comparison_report(
    config: &ExperimentConfig,
    noise: &SpectralCovariance,
    init: &crate::engine::InitialCondition,
    out: &mut ResultSet,
) -> Result<()> {
    if !config.sigma.kind().is_monotone() {
        out.notes.push("weak comparison skipped: sigma is not monotone".into());
        return Ok(());
    }
    let (lower, upper) = init.bounds();
    let steps = grid_index(config.t_final, config.dt).unwrap_or(0);
    let report = coupled_comparison(
        noise,
        &config.sigma,
        (lower, upper),
        steps,
        config.dt,
        config.seed,
        0..config.comparison_replicas as u64,
    )?;
    out.reports.push(StatsReport::new(
        "weak-comparison",
        format!("c1={lower};c2={upper};replicas={};steps={steps}", report.replicas),
        report.max_violation,
        0.0,
        0.0,
        COMPARISON_SLACK,
        Rule::AtMost,
    ));
    Ok(())
}
