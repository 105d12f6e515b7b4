//! Striking-task simulation: ball trajectory prediction with a linear
//! Gaussian filter, hit-likelihood start-time selection, replanning, and
//! trial scoring — all driven by a simulated clock so runs are reproducible.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use rand::Rng;

use crate::adaptation::{self, LaplaceOptions, TaskTarget};
use crate::basis::Order;
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::kinematics::ForwardKinematics;
use crate::model::ProMP;

/// One timestamped ball position from the (simulated) vision system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallObservation {
    pub time: f64,
    pub position: Vector3<f64>,
}

/// Ballistic filter configuration. The dynamics are constant-acceleration
/// free flight with gravity on the vertical axis; a table bounce flips the
/// vertical velocity scaled by the restitution coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub gravity: f64,
    /// White acceleration noise, standard deviation per axis (m/s^2).
    pub process_noise: f64,
    /// Isotropic observation noise, standard deviation (m).
    pub obs_noise: f64,
    pub table_height: f64,
    pub restitution: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            gravity: 9.81,
            process_noise: 0.1,
            obs_noise: 0.01,
            table_height: 0.0,
            restitution: 0.87,
        }
    }
}

/// Filtered ball state with open-loop prediction: query any future time and
/// get a Gaussian over the ball position there.
#[derive(Debug, Clone)]
pub struct BallTrajectoryEstimate {
    time: f64,
    state: Vector6<f64>,
    cov: Matrix6<f64>,
    cfg: KalmanConfig,
}

/// Smallest positive time at which a ballistic height profile crosses the
/// table going down.
fn bounce_time(z0: f64, vz: f64, gravity: f64, table: f64) -> Option<f64> {
    // z(t) = z0 + vz t - g t^2 / 2 = table
    let disc = vz * vz + 2.0 * gravity * (z0 - table);
    if disc < 0.0 || gravity <= 0.0 {
        return None;
    }
    let sq = libm::sqrt(disc);
    let down = (vz + sq) / gravity;
    if down > 1e-12 && z0 >= table - 1e-9 {
        Some(down)
    } else {
        None
    }
}

fn free_flight_mean(state: &mut Vector6<f64>, dt: f64, gravity: f64) {
    for a in 0..3 {
        state[a] += state[3 + a] * dt;
    }
    state[2] -= 0.5 * gravity * dt * dt;
    state[5] -= gravity * dt;
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for a in 0..3 {
        f[(a, 3 + a)] = dt;
    }
    f
}

fn process_noise(dt: f64, q: f64) -> Matrix6<f64> {
    let q2 = q * q;
    let mut out = Matrix6::zeros();
    let dt2 = dt * dt;
    for a in 0..3 {
        out[(a, a)] = q2 * dt2 * dt2 / 4.0;
        out[(a, 3 + a)] = q2 * dt2 * dt / 2.0;
        out[(3 + a, a)] = out[(a, 3 + a)];
        out[(3 + a, 3 + a)] = q2 * dt2;
    }
    out
}

/// Advance mean and covariance through free flight and table bounces.
fn propagate(state: &mut Vector6<f64>, cov: &mut Matrix6<f64>, dt: f64, cfg: &KalmanConfig) {
    let mut remaining = dt;
    while remaining > 0.0 {
        let step = match bounce_time(state[2], state[5], cfg.gravity, cfg.table_height) {
            Some(tb) if tb < remaining => tb,
            _ => remaining,
        };
        let f = transition(step);
        free_flight_mean(state, step, cfg.gravity);
        *cov = f * *cov * f.transpose() + process_noise(step, cfg.process_noise);
        remaining -= step;
        if remaining > 0.0 {
            // Bounce: flip the vertical velocity, scaled by restitution.
            let mut b = Matrix6::identity();
            b[(5, 5)] = -cfg.restitution;
            state[5] *= -cfg.restitution;
            state[2] = cfg.table_height;
            *cov = b * *cov * b.transpose();
        }
    }
}

impl BallTrajectoryEstimate {
    /// Gaussian over the ball position at time `t`. Queries before the
    /// filter time extrapolate the mean backward (bounce-free) with
    /// uncertainty growing in `|dt|` just as for forward prediction.
    pub fn query(&self, t: f64) -> GaussianState {
        let mut state = self.state;
        let mut cov = self.cov;
        let dt = t - self.time;
        if dt >= 0.0 {
            propagate(&mut state, &mut cov, dt, &self.cfg);
        } else {
            let f = transition(dt);
            free_flight_mean(&mut state, dt, self.cfg.gravity);
            cov = f * cov * f.transpose() + process_noise(-dt, self.cfg.process_noise);
        }
        let mean = DVector::from_row_slice(&[state[0], state[1], state[2]]);
        let mut pos_cov = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                pos_cov[(i, j)] = cov[(i, j)];
            }
        }
        GaussianState::new(mean, pos_cov).expect("propagated covariance stays symmetric")
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.state[3], self.state[4], self.state[5])
    }
}

/// Filter a stream of ball observations into a predictive estimate.
pub fn kf_predict(obs: &[BallObservation], cfg: &KalmanConfig) -> Result<BallTrajectoryEstimate> {
    if obs.len() < 2 {
        return Err(Error::input(
            "ball prediction needs at least two observations",
        ));
    }
    for pair in obs.windows(2) {
        if pair[1].time < pair[0].time {
            return Err(Error::input("ball observations must be ordered in time"));
        }
    }

    let r = cfg.obs_noise * cfg.obs_noise;
    let mut state = Vector6::zeros();
    let mut cov = Matrix6::zeros();
    for a in 0..3 {
        state[a] = obs[0].position[a];
        cov[(a, a)] = r;
        // Velocity starts unknown.
        cov[(3 + a, 3 + a)] = 100.0;
    }
    let mut time = obs[0].time;

    for o in &obs[1..] {
        let dt = o.time - time;
        if dt > 0.0 {
            propagate(&mut state, &mut cov, dt, cfg);
            time = o.time;
        }
        // Measurement update on the position block.
        let p_pos = cov.fixed_view::<3, 3>(0, 0).into_owned();
        let s = p_pos + nalgebra::Matrix3::identity() * r;
        let s_inv = s.try_inverse().ok_or_else(|| {
            Error::numerical("innovation covariance is singular in the ball filter")
        })?;
        let p_all = cov.fixed_view::<6, 3>(0, 0).into_owned();
        let gain = p_all * s_inv;
        let innovation = o.position - Vector3::new(state[0], state[1], state[2]);
        state += gain * innovation;
        let mut kh = Matrix6::zeros();
        kh.view_mut((0, 0), (6, 3)).copy_from(&gain);
        cov = (Matrix6::identity() - kh) * cov;
        // Keep the covariance numerically symmetric.
        cov = (cov + cov.transpose()) * 0.5;
    }

    Ok(BallTrajectoryEstimate {
        time,
        state,
        cov,
        cfg: *cfg,
    })
}

/// Prior over the normalized hit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitTimePrior {
    /// Prefer hitting mid-movement, where the racket moves fastest.
    Gaussian {
        mean: f64,
        std: f64,
    },
    Uniform,
}

impl HitTimePrior {
    /// The striking default: `N(0.5, 0.1^2)` over the normalized time.
    pub fn standard() -> Self {
        HitTimePrior::Gaussian {
            mean: 0.5,
            std: 0.1,
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        match *self {
            HitTimePrior::Gaussian { mean, std } => {
                let d = (z - mean) / std;
                libm::exp(-0.5 * d * d) / (std * libm::sqrt(2.0 * PI))
            }
            HitTimePrior::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Integral of the product of two Gaussian densities, in closed form:
/// the density of `N(mean_b, cov_a + cov_b)` evaluated at `mean_a`.
pub fn gaussian_overlap(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input("overlap requires equal dimensions"));
    }
    let merged = GaussianState::new(b.mean().clone(), a.cov() + b.cov())?;
    merged.density(a.mean())
}

/// Racket task-space distributions over a fixed phase grid; they do not
/// depend on the candidate start time, so the grid is shared across the
/// start-time search.
struct RacketGrid {
    phases: Vec<f64>,
    weights: Vec<f64>,
    racket: Vec<GaussianState>,
    prior: Vec<f64>,
}

impl RacketGrid {
    fn build(
        p: &ProMP,
        fk: &dyn ForwardKinematics,
        prior: &HitTimePrior,
        n_grid: usize,
    ) -> Result<Self> {
        if n_grid < 8 {
            return Err(Error::input("hit-likelihood grid needs at least 8 cells"));
        }
        let dz = 1.0 / n_grid as f64;
        let mut phases = Vec::with_capacity(n_grid + 1);
        let mut weights = Vec::with_capacity(n_grid + 1);
        let mut racket = Vec::with_capacity(n_grid + 1);
        let mut prior_vals = Vec::with_capacity(n_grid + 1);
        for i in 0..=n_grid {
            let z = i as f64 * dz;
            let w = if i == 0 || i == n_grid { 0.5 } else { 1.0 };
            phases.push(z);
            weights.push(w * dz);
            racket.push(adaptation::task_distribution(p, z, fk)?);
            prior_vals.push(prior.density(z));
        }
        Ok(RacketGrid {
            phases,
            weights,
            racket,
            prior: prior_vals,
        })
    }

    /// Trapezoid estimate of the hit likelihood for a movement starting at
    /// `t0` with the given duration.
    fn likelihood(&self, ball: &BallTrajectoryEstimate, t0: f64, duration: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (i, z) in self.phases.iter().enumerate() {
            if self.prior[i] == 0.0 {
                continue;
            }
            let ball_dist = ball.query(t0 + z * duration);
            acc += self.weights[i] * self.prior[i] * gaussian_overlap(&self.racket[i], &ball_dist)?;
        }
        Ok(acc)
    }

    /// Phase with the largest integrand: the most promising hit time.
    fn best_phase(
        &self,
        ball: &BallTrajectoryEstimate,
        t0: f64,
        duration: f64,
    ) -> Result<(f64, GaussianState)> {
        let mut best = (self.phases[0], f64::NEG_INFINITY);
        for (i, &z) in self.phases.iter().enumerate() {
            let ball_dist = ball.query(t0 + z * duration);
            let v = self.prior[i] * gaussian_overlap(&self.racket[i], &ball_dist)?;
            if v > best.1 {
                best = (z, v);
            }
        }
        Ok((best.0, ball.query(t0 + best.0 * duration)))
    }
}

/// Likelihood of hitting the ball for a movement `(t0, duration)`: the
/// racket/ball overlap marginalized over the normalized hit time.
pub fn hit_likelihood(
    p: &ProMP,
    fk: &dyn ForwardKinematics,
    ball: &BallTrajectoryEstimate,
    t0: f64,
    duration: f64,
    prior: &HitTimePrior,
    n_grid: usize,
) -> Result<f64> {
    if duration <= 0.0 || duration.is_nan() {
        return Err(Error::input("movement duration must be positive"));
    }
    let grid = RacketGrid::build(p, fk, prior, n_grid)?;
    grid.likelihood(ball, t0, duration)
}

/// Grid search for the start time maximizing the hit likelihood. Ties break
/// toward the earliest start.
#[allow(clippy::too_many_arguments)]
pub fn optimal_start_time(
    p: &ProMP,
    fk: &dyn ForwardKinematics,
    ball: &BallTrajectoryEstimate,
    duration: f64,
    prior: &HitTimePrior,
    t0_range: (f64, f64),
    t0_steps: usize,
    n_grid: usize,
) -> Result<(f64, f64)> {
    if duration <= 0.0 || duration.is_nan() {
        return Err(Error::input("movement duration must be positive"));
    }
    if t0_steps == 0 || t0_range.1 < t0_range.0 {
        return Err(Error::input("start-time range must be non-empty"));
    }
    let grid = RacketGrid::build(p, fk, prior, n_grid)?;
    let mut best = (t0_range.0, f64::NEG_INFINITY);
    for i in 0..=t0_steps {
        let t0 = if t0_steps == 0 {
            t0_range.0
        } else {
            t0_range.0 + (t0_range.1 - t0_range.0) * i as f64 / t0_steps as f64
        };
        let h = grid.likelihood(ball, t0, duration)?;
        if h > best.1 {
            best = (t0, h);
        }
    }
    Ok(best)
}

/// True ballistic ball path used by the simulator, bounces included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallFlight {
    pub launch_time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub gravity: f64,
    pub table_height: f64,
    pub restitution: f64,
}

impl BallFlight {
    /// Solve the launch velocity so the ball passes through `target` exactly
    /// `flight_time` seconds after launch (assuming no bounce in between).
    pub fn through_point(
        start: Vector3<f64>,
        target: Vector3<f64>,
        launch_time: f64,
        flight_time: f64,
        gravity: f64,
    ) -> Result<Self> {
        if flight_time <= 0.0 || flight_time.is_nan() {
            return Err(Error::input("flight time must be positive"));
        }
        let mut velocity = (target - start) / flight_time;
        velocity[2] += 0.5 * gravity * flight_time;
        Ok(BallFlight {
            launch_time,
            position: start,
            velocity,
            gravity,
            table_height: f64::NEG_INFINITY,
            restitution: 0.87,
        })
    }

    pub fn with_table(mut self, height: f64, restitution: f64) -> Self {
        self.table_height = height;
        self.restitution = restitution;
        self
    }

    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        let mut pos = self.position;
        let mut vel = self.velocity;
        let mut remaining = (t - self.launch_time).max(0.0);
        while remaining > 0.0 {
            let step = match bounce_time(pos[2], vel[2], self.gravity, self.table_height) {
                Some(tb) if tb < remaining => tb,
                _ => remaining,
            };
            pos += vel * step;
            pos[2] -= 0.5 * self.gravity * step * step;
            vel[2] -= self.gravity * step;
            remaining -= step;
            if remaining > 0.0 {
                vel[2] *= -self.restitution;
                pos[2] = self.table_height;
            }
        }
        pos
    }
}

/// A pre-generated trial: the true flight plus the noisy observation stream
/// a vision system would deliver.
#[derive(Debug, Clone)]
pub struct SimulatedBall {
    flight: BallFlight,
    observations: Vec<BallObservation>,
}

impl SimulatedBall {
    pub fn new<R: Rng + ?Sized>(
        flight: BallFlight,
        horizon: f64,
        obs_rate: f64,
        obs_noise: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if obs_rate <= 0.0 || obs_rate.is_nan() {
            return Err(Error::input("observation rate must be positive"));
        }
        let count = (horizon * obs_rate) as usize + 1;
        let mut observations = Vec::with_capacity(count);
        for i in 0..count {
            let t = flight.launch_time + i as f64 / obs_rate;
            let truth = flight.position_at(t);
            let noise = Vector3::new(
                obs_noise * normal_sample(rng),
                obs_noise * normal_sample(rng),
                obs_noise * normal_sample(rng),
            );
            observations.push(BallObservation {
                time: t,
                position: truth + noise,
            });
        }
        Ok(SimulatedBall {
            flight,
            observations,
        })
    }

    pub fn observations(&self) -> &[BallObservation] {
        &self.observations
    }

    pub fn true_position(&self, t: f64) -> Vector3<f64> {
        self.flight.position_at(t)
    }

    pub fn flight(&self) -> &BallFlight {
        &self.flight
    }
}

fn normal_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

#[derive(Debug, Clone)]
pub struct TrialOptions {
    /// Movement duration; defaults come from the demonstrations' mean.
    pub duration: f64,
    pub hit_prior: HitTimePrior,
    pub n_grid: usize,
    /// Declare a hit when the racket comes within this distance (m).
    pub hit_radius: f64,
    pub replan: bool,
    /// Observations required before the first plan.
    pub min_observations: usize,
    pub t0_steps: usize,
    /// Start times are searched in `[now, now + planning_horizon]`.
    pub planning_horizon: f64,
    /// Plans below this hit likelihood are discarded; the trial declines
    /// (no-move) if no plan ever clears it.
    pub likelihood_threshold: f64,
    pub execution_steps: usize,
    pub kalman: KalmanConfig,
    pub laplace: LaplaceOptions,
}

impl TrialOptions {
    /// Defaults scaled to a workspace of the given radius and task dimension:
    /// the no-move threshold is `1e-6` times the peak density of an isotropic
    /// Gaussian whose standard deviation is the workspace radius.
    pub fn for_workspace(duration: f64, workspace_radius: f64, task_dim: usize) -> Self {
        TrialOptions {
            duration,
            hit_prior: HitTimePrior::standard(),
            n_grid: 64,
            hit_radius: 0.08,
            replan: true,
            min_observations: 5,
            t0_steps: 40,
            planning_horizon: 1.0,
            likelihood_threshold: 1e-6 * reference_density(workspace_radius, task_dim),
            execution_steps: 200,
            kalman: KalmanConfig::default(),
            laplace: LaplaceOptions::default(),
        }
    }
}

/// Peak density of an isotropic Gaussian with standard deviation `radius`.
pub fn reference_density(radius: f64, dim: usize) -> f64 {
    libm::pow(2.0 * PI * radius * radius, -(dim as f64) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub hit: bool,
    pub min_distance: f64,
    /// Number of times the plan was recomputed after the first one.
    pub replans: usize,
    /// `None` when the trial declined to move.
    pub start_time: Option<f64>,
}

impl TrialOutcome {
    pub fn no_move(&self) -> bool {
        self.start_time.is_none()
    }
}

/// Run one trial: observe the ball, repeatedly predict and adapt the
/// primitive until the chosen start time arrives, then execute the mean
/// trajectory against the true ball path.
pub fn play_trial(
    p: &ProMP,
    fk: &dyn ForwardKinematics,
    ball: &SimulatedBall,
    opts: &TrialOptions,
) -> Result<TrialOutcome> {
    let obs = ball.observations();
    let min_obs = opts.min_observations.max(2);
    let mut plan: Option<(f64, ProMP)> = None;
    let mut passes = 0usize;
    // The racket's task-space distributions over the phase grid depend only
    // on the primitive, so they are shared by every planning pass.
    let grid = RacketGrid::build(p, fk, &opts.hit_prior, opts.n_grid)?;

    let mut i = min_obs;
    while i <= obs.len() {
        let now = obs[i - 1].time;
        let est = kf_predict(&obs[..i], &opts.kalman)?;
        let mut best = (now, f64::NEG_INFINITY);
        for s in 0..=opts.t0_steps {
            let t0 = now + opts.planning_horizon * s as f64 / opts.t0_steps as f64;
            let h = grid.likelihood(&est, t0, opts.duration)?;
            if h > best.1 {
                best = (t0, h);
            }
        }
        let (t0, h) = best;
        passes += 1;
        if h >= opts.likelihood_threshold {
            let (z_hit, ball_dist) = grid.best_phase(&est, t0, opts.duration)?;
            let target = TaskTarget {
                z: z_hit,
                dist: ball_dist,
            };
            let (conditioned, _) = adaptation::condition_task(p, &target, fk, &opts.laplace)?;
            plan = Some((t0, conditioned));
        }

        if !opts.replan && plan.is_some() {
            break;
        }
        let next_time = obs.get(i).map(|o| o.time).unwrap_or(f64::INFINITY);
        if let Some((t0, _)) = &plan {
            if *t0 <= next_time {
                break;
            }
        }
        i += 1;
    }

    let replans = passes.saturating_sub(1);
    let Some((t0, adapted)) = plan else {
        return Ok(TrialOutcome {
            hit: false,
            min_distance: f64::INFINITY,
            replans,
            start_time: None,
        });
    };

    // Start from the current (resting) joint state: the learned mean at
    // phase zero.
    let phi0 = p
        .basis()
        .block_feature_matrix(0.0, p.dof(), Order::Position)?;
    let rest = &phi0 * p.mu_w();
    let executed = adaptation::condition_point(&adapted, 0.0, Order::Position, &rest)?;

    let mut min_distance = f64::INFINITY;
    for s in 0..=opts.execution_steps {
        let z = s as f64 / opts.execution_steps as f64;
        let phi = p
            .basis()
            .block_feature_matrix(z, p.dof(), Order::Position)?;
        let joints = &phi * executed.mu_w();
        let racket = fk.evaluate(&joints)?;
        let truth = ball.true_position(t0 + z * opts.duration);
        let diff = DVector::from_row_slice(&[
            racket[0] - truth[0],
            racket[1] - truth[1],
            racket[2] - truth[2],
        ]);
        min_distance = min_distance.min(diff.norm());
    }

    Ok(TrialOutcome {
        hit: min_distance < opts.hit_radius,
        min_distance,
        replans,
        start_time: Some(t0),
    })
}

/// A trained striking primitive plus the arm it drives: the synthetic
/// stand-in for the demonstration-taught forehand.
#[derive(Debug, Clone)]
pub struct StrikingScenario {
    pub promp: ProMP,
    pub arm: crate::kinematics::XzPlanarArm,
    /// Mean demonstration duration; the default movement duration.
    pub duration: f64,
    /// Racket task-space mean at the middle of the movement.
    pub hit_point: Vector3<f64>,
}

/// Build a strike scenario: synthesize arm demonstrations of a smooth swing,
/// train a MAP primitive on them, and report where the racket passes at
/// mid-movement so balls can be aimed there.
pub fn striking_scenario<R: Rng + ?Sized>(rng: &mut R) -> Result<StrikingScenario> {
    use crate::basis::BasisConfig;
    use crate::kinematics::{PlanarArm, XzPlanarArm};
    use crate::model::Demonstration;
    use crate::training::{em_train, EmOptions, NIWPrior, TrainingMode};

    let arm = XzPlanarArm::new(PlanarArm::new(alloc::vec![0.5, 0.45, 0.4])?);
    let basis = BasisConfig::standard();
    let dof = 3;

    // Swing profile per joint: start pose, end pose, eased in between.
    let start_pose = [-0.9, 0.6, 0.3];
    let end_pose = [0.4, -0.3, -0.2];
    let samples = 80;
    let demos_n = 8;
    let mut demos = Vec::with_capacity(demos_n);
    let mut total_duration = 0.0;
    for _ in 0..demos_n {
        let duration = 0.5 + 0.1 * rng.random_range(-1.0..1.0);
        total_duration += duration;
        let offset: Vec<f64> = (0..dof).map(|_| 0.04 * normal_sample(rng)).collect();
        let amp = 1.0 + 0.05 * normal_sample(rng);
        let times: Vec<f64> = (0..samples)
            .map(|i| duration * i as f64 / (samples - 1) as f64)
            .collect();
        let mut joints = DMatrix::zeros(samples, dof);
        for (i, &t) in times.iter().enumerate() {
            let z = t / duration;
            let ease = z * z * (3.0 - 2.0 * z);
            for d in 0..dof {
                joints[(i, d)] = start_pose[d]
                    + amp * (end_pose[d] - start_pose[d]) * ease
                    + offset[d]
                    + 1e-3 * normal_sample(rng);
            }
        }
        demos.push(Demonstration::new(times, joints)?);
    }

    let prior = NIWPrior::default_for(basis.k() * dof);
    let (promp, _) = em_train(
        &demos,
        &basis,
        dof,
        &TrainingMode::Map(prior),
        &EmOptions::default(),
    )?;

    let mid = adaptation::task_distribution(&promp, 0.5, &arm)?;
    let hit_point = Vector3::new(mid.mean()[0], mid.mean()[1], mid.mean()[2]);
    Ok(StrikingScenario {
        promp,
        arm,
        duration: total_duration / demos_n as f64,
        hit_point,
    })
}

impl StrikingScenario {
    /// Wrap an already-trained primitive: the hit point is wherever its
    /// racket distribution passes at mid-movement.
    pub fn new(promp: ProMP, arm: crate::kinematics::XzPlanarArm, duration: f64) -> Result<Self> {
        if duration <= 0.0 || duration.is_nan() {
            return Err(Error::input("movement duration must be positive"));
        }
        let mid = adaptation::task_distribution(&promp, 0.5, &arm)?;
        let hit_point = Vector3::new(mid.mean()[0], mid.mean()[1], mid.mean()[2]);
        Ok(StrikingScenario {
            promp,
            arm,
            duration,
            hit_point,
        })
    }

    /// A ball launched to pass through `hit_point + offset` exactly
    /// `flight_time` seconds in, observed at 60 Hz with 1 cm noise.
    pub fn aimed_ball<R: Rng + ?Sized>(
        &self,
        flight_time: f64,
        offset: Vector3<f64>,
        rng: &mut R,
    ) -> Result<SimulatedBall> {
        let start = self.hit_point + Vector3::new(1.4, 0.0, 0.9) + offset;
        let flight =
            BallFlight::through_point(start, self.hit_point + offset, 0.0, flight_time, 9.81)?;
        SimulatedBall::new(flight, flight_time + 0.3, 60.0, 0.01, rng)
    }

    /// Trial options matched to this scenario's workspace, with the ball
    /// filter running bounce-free (the simulated flights never touch a
    /// table).
    pub fn trial_options(&self) -> TrialOptions {
        let mut opts = TrialOptions::for_workspace(self.duration, self.arm.reach(), 3);
        opts.kalman.table_height = f64::NEG_INFINITY;
        opts
    }
}
