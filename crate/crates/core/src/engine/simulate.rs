use std::collections::BTreeMap;

use super::initial::InitialCondition;
use super::nonlinearity::NonlinearitySpec;
use super::semigroup::{HeatSemigroup, SemigroupWorkspace};
use crate::error::{Error, Result};
use crate::noise::{NoiseWorkspace, SpatialField, SpectralCovariance};
use crate::observables::{Region, RegionMask};
use crate::rng::{domain, StreamKey};

/// Relative tolerance when matching a time to the step grid.
const GRID_TOLERANCE: f64 = 1e-9;

/// Heat-kernel reach: mass of `p_T` beyond `6 sqrt(T)` is negligible.
pub fn collar_width(t_final: f64) -> f64 {
    6.0 * t_final.sqrt()
}

/// Index `k` with `time = k * dt`, or an error if `time` is off the grid.
pub fn grid_index(time: f64, dt: f64) -> Option<usize> {
    if time.is_nan() || time < 0.0 {
        return None;
    }
    let k = (time / dt).round();
    ((time - k * dt).abs() <= GRID_TOLERANCE * dt.max(time)).then_some(k as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub field: SpatialField,
    pub time: f64,
    pub step_index: usize,
}

impl FieldState {
    pub fn initial(field: SpatialField) -> Self {
        Self {
            field,
            time: 0.0,
            step_index: 0,
        }
    }
}

/// One exponential-Euler step `u <- S_dt [u + sigma(u) dW]`.
#[derive(Debug, Clone)]
pub struct Stepper {
    dt: f64,
    semigroup: HeatSemigroup,
}

impl Stepper {
    pub fn new(lattice: crate::noise::Lattice, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            semigroup: HeatSemigroup::new(lattice, dt)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn workspace(&self) -> SemigroupWorkspace {
        self.semigroup.workspace()
    }

    /// Advances `values` in place; returns `false` if any cell became non-finite.
    #[inline]
    pub fn advance(
        &self,
        values: &mut [f64],
        slice: &[f64],
        sigma: &NonlinearitySpec,
        work: &mut SemigroupWorkspace,
    ) -> bool {
        for (u, &w) in values.iter_mut().zip(slice) {
            *u += sigma.eval(*u) * w;
        }
        self.semigroup.apply(values, work);
        values.iter().all(|v| v.is_finite())
    }
}

/// Single step on a standalone state.
pub fn step(
    state: &FieldState,
    slice: &SpatialField,
    sigma: &NonlinearitySpec,
    dt: f64,
) -> Result<FieldState> {
    if slice.lattice() != state.field.lattice() {
        return Err(Error::InvalidParameter("noise slice lattice differs from field lattice".into()));
    }
    let stepper = Stepper::new(*state.field.lattice(), dt)?;
    let mut values = state.field.values().to_vec();
    if !stepper.advance(&mut values, slice.values(), sigma, &mut stepper.workspace()) {
        return Err(Error::Instability {
            replica: 0,
            step: state.step_index + 1,
        });
    }
    let step_index = state.step_index + 1;
    Ok(FieldState {
        field: SpatialField::new(*state.field.lattice(), values)?,
        time: step_index as f64 * dt,
        step_index,
    })
}

/// Time grid and recording schedule shared by every replica.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub dt: f64,
    pub steps: usize,
    /// Sorted, distinct step indices at which averages are recorded.
    pub record_steps: Vec<usize>,
    pub regions: Vec<Region>,
    /// Record steps at which the full field is kept.
    pub store_field_steps: Vec<usize>,
    /// Collar of the interior window for `sigma(u)` summaries; `None` disables them.
    pub window_collar: Option<f64>,
}

impl SimulationPlan {
    /// Snaps `record_times` and `t_final` to the step grid; off-grid times are errors.
    pub fn new(t_final: f64, dt: f64, record_times: &[f64], regions: Vec<Region>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", format!("dt must be positive, got {dt}")));
        }
        let steps = grid_index(t_final, dt)
            .ok_or_else(|| Error::config("T", format!("T={t_final} is not a multiple of dt={dt}")))?;
        let mut record_steps = Vec::with_capacity(record_times.len());
        for &t in record_times {
            let k = grid_index(t, dt).ok_or_else(|| {
                Error::config("record_times", format!("t={t} is not a multiple of dt={dt}"))
            })?;
            if k > steps {
                return Err(Error::config("record_times", format!("t={t} exceeds T={t_final}")));
            }
            record_steps.push(k);
        }
        record_steps.sort_unstable();
        record_steps.dedup();
        Ok(Self {
            dt,
            steps,
            record_steps,
            regions,
            store_field_steps: Vec::new(),
            window_collar: None,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps.iter().map(|&k| k as f64 * self.dt).collect()
    }

    pub fn time_index(&self, time: f64) -> Option<usize> {
        let k = grid_index(time, self.dt)?;
        self.record_steps.binary_search(&k).ok()
    }

    pub fn with_stored_fields(mut self, times: &[f64]) -> Result<Self> {
        let mut steps = Vec::new();
        for &t in times {
            let k = grid_index(t, self.dt)
                .filter(|k| self.record_steps.binary_search(k).is_ok())
                .ok_or_else(|| Error::config("store_fields", format!("t={t} is not a record time")))?;
            steps.push(k);
        }
        steps.sort_unstable();
        steps.dedup();
        self.store_field_steps = steps;
        Ok(self)
    }

    pub fn with_window(mut self, collar: f64) -> Self {
        self.window_collar = Some(collar);
        self
    }
}

/// Recorded path of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub replica_id: u64,
    pub record_times: Vec<f64>,
    /// `region_averages[time][region]`
    pub region_averages: Vec<Vec<f64>>,
    /// Interior-window mean of `sigma(u)` per record time (empty when disabled).
    pub window_sigma_means: Vec<f64>,
    /// Stored fields keyed by record-time index.
    pub fields: BTreeMap<usize, SpatialField>,
}

impl Trajectory {
    pub fn average(&self, time_index: usize, region_index: usize) -> f64 {
        self.region_averages[time_index][region_index]
    }

    /// Path of one region's average across record times.
    pub fn path(&self, region_index: usize) -> Vec<f64> {
        self.region_averages.iter().map(|row| row[region_index]).collect()
    }
}

/// Runs replicas of one configuration. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    noise: &'a SpectralCovariance,
    sigma: NonlinearitySpec,
    initial: SpatialField,
    plan: SimulationPlan,
    stepper: Stepper,
    masks: Vec<RegionMask>,
    window: Option<RegionMask>,
    /// `E u` at each record step.
    means: Vec<SpatialField>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        noise: &'a SpectralCovariance,
        sigma: NonlinearitySpec,
        init: &InitialCondition,
        plan: SimulationPlan,
    ) -> Result<Self> {
        let lattice = *noise.lattice();
        let collar = collar_width(plan.t_final());
        for region in &plan.regions {
            region.check_margin(&lattice, collar)?;
        }
        let masks = plan
            .regions
            .iter()
            .map(|r| RegionMask::new(r, &lattice))
            .collect::<Result<Vec<_>>>()?;
        let window = plan
            .window_collar
            .map(|c| RegionMask::interior(&lattice, c))
            .transpose()?;
        let initial = init.to_field(lattice)?;
        let means = plan
            .record_steps
            .iter()
            .map(|&k| super::semigroup::heat_semigroup(&initial, k as f64 * plan.dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            noise,
            sigma,
            initial,
            stepper: Stepper::new(lattice, plan.dt)?,
            plan,
            masks,
            window,
            means,
        })
    }

    pub fn plan(&self) -> &SimulationPlan {
        &self.plan
    }

    pub fn mean_at(&self, time_index: usize) -> &SpatialField {
        &self.means[time_index]
    }

    pub fn run(&self, seed: u64, replica: u64) -> Result<Trajectory> {
        self.run_observed(seed, replica, |_, _| {})
    }

    /// Like [`Simulator::run`], calling `observe(step, values)` after every step.
    pub fn run_observed(
        &self,
        seed: u64,
        replica: u64,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<Trajectory> {
        let key = StreamKey::new(seed, domain::DYNAMICS, replica);
        let lattice = *self.noise.lattice();
        let mut u = self.initial.values().to_vec();
        let mut slice = vec![0.0; lattice.cells()];
        let mut noise_work: NoiseWorkspace = self.noise.workspace();
        let mut heat_work = self.stepper.workspace();

        let times = self.plan.record_steps.len();
        let mut traj = Trajectory {
            replica_id: replica,
            record_times: self.plan.record_times(),
            region_averages: Vec::with_capacity(times),
            window_sigma_means: Vec::new(),
            fields: BTreeMap::new(),
        };
        let mut next = 0;
        if self.plan.record_steps.first() == Some(&0) {
            self.record(&mut traj, next, &u);
            next += 1;
        }
        for n in 0..self.plan.steps {
            let mut rng = key.at_step(n as u64);
            self.noise.sample_into(self.plan.dt, &mut rng, &mut slice, &mut noise_work);
            if !self.stepper.advance(&mut u, &slice, &self.sigma, &mut heat_work) {
                return Err(Error::Instability { replica, step: n + 1 });
            }
            observe(n + 1, &u);
            if next < times && self.plan.record_steps[next] == n + 1 {
                self.record(&mut traj, next, &u);
                next += 1;
            }
        }
        Ok(traj)
    }

    fn record(&self, traj: &mut Trajectory, time_index: usize, u: &[f64]) {
        let mean = self.means[time_index].values();
        traj.region_averages
            .push(self.masks.iter().map(|m| m.integrate_centered(u, mean)).collect());
        if let Some(window) = &self.window {
            traj.window_sigma_means.push(window.mean_of(u, |v| self.sigma.eval(v)));
        }
        let step = self.plan.record_steps[time_index];
        if self.plan.store_field_steps.binary_search(&step).is_ok() {
            traj.fields
                .insert(time_index, SpatialField::from_parts(*self.noise.lattice(), u.to_vec()));
        }
    }
}
