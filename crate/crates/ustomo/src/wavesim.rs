//! Leapfrog FDTD solver for the damped 2D acoustic wave equation.
//!
//! The pressure field obeys `v·u_tt - ∇²u = f(t)·δ(x - x_s)` with
//! `v = 1/c²`, zero initial conditions, and an absorbing sponge layer
//! implemented by a damping term that is zero inside the sensor region and
//! ramps up quadratically towards the domain edge. The update is
//!
//! ```text
//! (1 + η·dt/2) u⁺ = 2u - (1 - η·dt/2) u⁻ + c²dt² (∇²u + f δ)
//! ```
//!
//! i.e. leapfrog with semi-implicit damping, which stays stable at the
//! undamped CFL limit. The Dirac source is injected at the grid node nearest
//! the transmitter with the consistent `1/dx²` scaling so that traces are
//! comparable across grid resolutions; receivers sample the nearest node
//! after every step.
//!
//! One [`ModelConfig`] describes one model tier; the shipped presets build
//! the physical / accurate / surrogate hierarchy from this single solver.

use ndarray::{Array2, Array3};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::scene::{centered_origin, SosField};
use crate::{Error, Result};

/// Largest sound speed any generated field can contain, m/s. The CFL check
/// uses this bound rather than the current field so that a configuration is
/// valid for every admissible medium.
pub const C_MAX: f64 = 1800.0;

/// 2D stability bound for the explicit 5-point scheme: `c·dt/dx ≤ 1/√2`.
pub const CFL_LIMIT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Model tier of the three-level hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Stand-in for the true measurement process (test data only).
    Physical,
    /// High-quality numerical model (training data, reference inversions).
    Accurate,
    /// Cheap model used for iterative inversion.
    Surrogate,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tier::Physical => write!(f, "physical"),
            Tier::Accurate => write!(f, "accurate"),
            Tier::Surrogate => write!(f, "surrogate"),
        }
    }
}

/// One forward-model tier: grid, time stepping, absorbing layer, noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Cells per side (square grid).
    pub n_grid: usize,
    /// Grid spacing, meters.
    pub dx: f64,
    /// Time step, seconds.
    pub dt: f64,
    /// Number of recorded time samples per trace.
    pub n_steps: usize,
    /// Thickness of the absorbing layer on every edge, meters.
    pub abc_thickness: f64,
    /// Peak damping rate at the domain edge, 1/s.
    pub eta_max: f64,
    /// Measurement-noise variance added to this tier's signals, pressure².
    pub noise_variance: f64,
    pub tier: Tier,
}

impl ModelConfig {
    /// CFL number for the worst admissible medium.
    pub fn cfl_number(&self) -> f64 {
        C_MAX * self.dt / self.dx
    }

    /// Absorbing-layer thickness in whole cells.
    pub fn abc_cells(&self) -> usize {
        (self.abc_thickness / self.dx + 0.5).floor() as usize
    }

    /// Half-open cell range `[lo, hi)` of the interior (undamped) region.
    pub fn interior_range(&self) -> (usize, usize) {
        let a = self.abc_cells();
        (a, self.n_grid - a)
    }

    /// Physical side length of the interior region, meters.
    pub fn interior_side(&self) -> f64 {
        self.n_grid as f64 * self.dx - 2.0 * self.abc_thickness
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 8 {
            return Err(Error::Config(format!("grid too small: {}", self.n_grid)));
        }
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("dx and dt must be positive".into()));
        }
        if self.n_steps < 1 {
            return Err(Error::Config("need at least one time step".into()));
        }
        let cfl = self.cfl_number();
        if cfl > CFL_LIMIT * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "CFL violation: c_max*dt/dx = {cfl:.4} > 1/sqrt(2)"
            )));
        }
        if !(self.abc_thickness >= 0.0) || self.abc_thickness >= self.n_grid as f64 * self.dx / 2.0
        {
            return Err(Error::Config(format!(
                "absorbing layer thickness {} out of range",
                self.abc_thickness
            )));
        }
        if self.eta_max < 0.0 || self.noise_variance < 0.0 {
            return Err(Error::Config("eta_max and noise variance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Transmitter/receiver ring shared by all tiers.
///
/// Positions are defined in physical coordinates and snapped to the nearest
/// grid node per tier; the snap discrepancy between tiers is part of the
/// modelling error by design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub center: [f64; 2],
    pub radius: f64,
    pub transmitter_angles: Vec<f64>,
    pub receiver_angles: Vec<f64>,
}

impl SensorGeometry {
    /// Equally spaced ring with zero angular offset.
    pub fn ring(radius: f64, n_transmitters: usize, n_receivers: usize) -> Self {
        let angles = |m: usize| {
            (0..m)
                .map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64)
                .collect::<Vec<_>>()
        };
        Self {
            center: [0.0, 0.0],
            radius,
            transmitter_angles: angles(n_transmitters),
            receiver_angles: angles(n_receivers),
        }
    }

    pub fn n_transmitters(&self) -> usize {
        self.transmitter_angles.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.receiver_angles.len()
    }

    pub fn transmitter_position(&self, k: usize) -> [f64; 2] {
        self.position(self.transmitter_angles[k])
    }

    pub fn receiver_position(&self, k: usize) -> [f64; 2] {
        self.position(self.receiver_angles[k])
    }

    fn position(&self, angle: f64) -> [f64; 2] {
        [
            self.center[0] + self.radius * angle.cos(),
            self.center[1] + self.radius * angle.sin(),
        ]
    }

    /// Checks angle ordering and that every snapped sensor node lies
    /// strictly inside the interior region of `config`.
    pub fn validate_for(&self, config: &ModelConfig) -> Result<()> {
        for angles in [&self.transmitter_angles, &self.receiver_angles] {
            if angles.is_empty() {
                return Err(Error::Config("sensor ring must not be empty".into()));
            }
            let two_pi = 2.0 * std::f64::consts::PI;
            if angles.windows(2).any(|w| w[0] >= w[1])
                || angles[0] < 0.0
                || *angles.last().unwrap() >= two_pi
            {
                return Err(Error::Config(
                    "sensor angles must be strictly increasing in [0, 2pi)".into(),
                ));
            }
        }
        let (lo, hi) = config.interior_range();
        let all = self
            .transmitter_angles
            .iter()
            .chain(self.receiver_angles.iter());
        for &angle in all {
            let (i, j) = snap_node(config, self.position(angle));
            // One-cell margin keeps the 5-point stencil of a sensor node
            // entirely inside the undamped region.
            if i <= lo || i >= hi - 1 || j <= lo || j >= hi - 1 {
                return Err(Error::Config(format!(
                    "sensor at angle {angle:.3} rad snaps to node ({i}, {j}) outside the interior"
                )));
            }
        }
        Ok(())
    }
}

/// Windowed sine pulse `f(t) = A·exp(ξ(t-t0)²)·sin(2π f0 t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceWaveform {
    /// Envelope curvature, 1/s²; negative for a decaying envelope.
    pub xi: f64,
    /// Carrier frequency, Hz.
    pub f0: f64,
    /// Envelope centre, seconds.
    pub t0: f64,
    pub amplitude: f64,
}

impl SourceWaveform {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi < 0.0) {
            return Err(Error::Config("xi must be negative".into()));
        }
        if !(self.f0 > 0.0) {
            return Err(Error::Config("f0 must be positive".into()));
        }
        Ok(())
    }
}

/// Evaluates the source pulse at time `t`.
pub fn eval_source(w: &SourceWaveform, t: f64) -> f64 {
    let dt = t - w.t0;
    w.amplitude * (w.xi * dt * dt).exp() * (2.0 * std::f64::consts::PI * w.f0 * t).sin()
}

/// A full set of pressure traces: one per transmitter/receiver pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `data[[s, r, t]]`: trace of transmitter `s` at receiver `r`.
    pub data: Array3<f64>,
    pub dt: f64,
    pub geometry: SensorGeometry,
    /// Tier that produced the data, if known (not stored on disk).
    pub tier: Option<Tier>,
}

impl MeasurementSet {
    pub fn n_transmitters(&self) -> usize {
        self.data.dim().0
    }
    pub fn n_receivers(&self) -> usize {
        self.data.dim().1
    }
    pub fn n_samples(&self) -> usize {
        self.data.dim().2
    }
}

/// Snaps a physical position to the nearest grid node of `config`'s grid
/// (centred on the origin). Returns `(row, col)`.
pub fn snap_node(config: &ModelConfig, pos: [f64; 2]) -> (usize, usize) {
    let n = config.n_grid;
    let origin = centered_origin(n, config.dx);
    let j = ((pos[0] - origin[0]) / config.dx).round();
    let i = ((pos[1] - origin[1]) / config.dx).round();
    let clamp = |x: f64| x.max(0.0).min((n - 1) as f64) as usize;
    (clamp(i), clamp(j))
}

/// Quadratic damping profile: zero on the interior, `eta_max · ξ²` in the
/// layer where `ξ` is the relative depth, reaching `eta_max` on the
/// outermost cells.
pub fn build_damping_profile(config: &ModelConfig) -> Array2<f64> {
    let n = config.n_grid;
    let a = config.abc_cells();
    let mut eta = Array2::zeros((n, n));
    if a == 0 {
        return eta;
    }
    let depth = |idx: usize| -> f64 {
        if idx < a {
            (a - idx) as f64 / a as f64
        } else if idx >= n - a {
            (idx + 1 - (n - a)) as f64 / a as f64
        } else {
            0.0
        }
    };
    for i in 0..n {
        let di = depth(i);
        for j in 0..n {
            let d = di.max(depth(j));
            eta[[i, j]] = config.eta_max * d * d;
        }
    }
    eta
}

// ---------------------------------------------------------------------------
// Stepping kernel (shared with the adjoint solver)
// ---------------------------------------------------------------------------

/// Precomputed per-cell update coefficients.
pub(crate) struct Coeffs {
    pub n: usize,
    /// `1 / (1 + η·dt/2)`
    pub inv_a: Vec<f64>,
    /// `1 - η·dt/2`
    pub b: Vec<f64>,
    /// `c²·dt² / dx²` (Laplacian and source scale combined)
    pub e2: Vec<f64>,
}

pub(crate) fn build_coeffs(field: &SosField, config: &ModelConfig) -> Coeffs {
    let n = config.n_grid;
    let eta = build_damping_profile(config);
    let mut inv_a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    let mut e2 = vec![0.0; n * n];
    let hdt = 0.5 * config.dt;
    let scale = config.dt * config.dt / (config.dx * config.dx);
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let e = eta[[i, j]];
            inv_a[idx] = 1.0 / (1.0 + e * hdt);
            b[idx] = 1.0 - e * hdt;
            let c = field.values[[i, j]];
            e2[idx] = c * c * scale;
        }
    }
    Coeffs { n, inv_a, b, e2 }
}

/// Grids at least this wide parallelize the stencil over row chunks.
const PAR_ROWS_THRESHOLD: usize = 192;

/// One leapfrog step without sources. Boundary cells stay zero (Dirichlet).
pub(crate) fn leapfrog_step(c: &Coeffs, prev: &[f64], cur: &[f64], next: &mut [f64]) {
    let n = c.n;
    let row = |next_rows: &mut [f64], i0: usize, rows: usize| {
        for ri in 0..rows {
            let i = i0 + ri;
            let base = i * n;
            let up = &cur[base - n..base];
            let mid = &cur[base..base + n];
            let down = &cur[base + n..base + 2 * n];
            let pv = &prev[base..base + n];
            let ia = &c.inv_a[base..base + n];
            let bb = &c.b[base..base + n];
            let ee = &c.e2[base..base + n];
            let out = &mut next_rows[ri * n..(ri + 1) * n];
            for j in 1..n - 1 {
                let lap = up[j] + down[j] + mid[j - 1] + mid[j + 1] - 4.0 * mid[j];
                out[j] = ia[j] * (2.0 * mid[j] - bb[j] * pv[j] + ee[j] * lap);
            }
        }
    };
    if n >= PAR_ROWS_THRESHOLD {
        next[n..(n - 1) * n]
            .par_chunks_mut(n * 16)
            .enumerate()
            .for_each(|(chunk, slice)| {
                let i0 = 1 + chunk * 16;
                row(slice, i0, slice.len() / n);
            });
    } else {
        row(&mut next[n..(n - 1) * n], 1, n - 2);
    }
}

/// Variant that also records the per-cell drive `∇²u·dx² + f·[x=src]`
/// (the quantity the adjoint correlation needs) into `drive`.
pub(crate) fn leapfrog_step_with_drive(
    c: &Coeffs,
    prev: &[f64],
    cur: &[f64],
    next: &mut [f64],
    drive: &mut [f32],
) {
    let n = c.n;
    for i in 1..n - 1 {
        let base = i * n;
        for j in 1..n - 1 {
            let idx = base + j;
            let lap = cur[idx - n] + cur[idx + n] + cur[idx - 1] + cur[idx + 1] - 4.0 * cur[idx];
            drive[idx] = lap as f32;
            next[idx] = c.inv_a[idx] * (2.0 * cur[idx] - c.b[idx] * prev[idx] + c.e2[idx] * lap);
        }
    }
}

/// Injects a point source value `f` at `node` into an already-stepped field.
pub(crate) fn add_point_source(c: &Coeffs, next: &mut [f64], node: usize, f: f64) {
    next[node] += c.inv_a[node] * c.e2[node] * f;
}

fn check_finite(buf: &[f64], step: usize) -> Result<()> {
    if buf.iter().any(|v| !v.is_finite()) {
        Err(Error::Instability { step })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Public simulation entry points
// ---------------------------------------------------------------------------

fn validate_simulation(
    field: &SosField,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<()> {
    config.validate()?;
    waveform.validate()?;
    geometry.validate_for(config)?;
    if field.n() != config.n_grid {
        return Err(Error::Dimension(format!(
            "field grid {} does not match config grid {}",
            field.n(),
            config.n_grid
        )));
    }
    if (field.dx - config.dx).abs() > 1e-12 * config.dx {
        return Err(Error::Dimension(format!(
            "field spacing {} does not match config spacing {}",
            field.dx, config.dx
        )));
    }
    Ok(())
}

/// Simulates one shot. Returns the `M_r × M_t` traces of every receiver.
pub fn simulate(
    field: &SosField,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
    transmitter_index: usize,
) -> Result<Array2<f64>> {
    validate_simulation(field, config, geometry, waveform)?;
    if transmitter_index >= geometry.n_transmitters() {
        return Err(Error::Config(format!(
            "transmitter index {transmitter_index} out of range"
        )));
    }
    let coeffs = build_coeffs(field, config);
    simulate_with_coeffs(&coeffs, config, geometry, waveform, transmitter_index)
}

pub(crate) fn simulate_with_coeffs(
    coeffs: &Coeffs,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
    transmitter_index: usize,
) -> Result<Array2<f64>> {
    let n = config.n_grid;
    let (si, sj) = snap_node(config, geometry.transmitter_position(transmitter_index));
    let src = si * n + sj;
    let recv: Vec<usize> = (0..geometry.n_receivers())
        .map(|r| {
            let (i, j) = snap_node(config, geometry.receiver_position(r));
            i * n + j
        })
        .collect();

    let mut prev = vec![0.0; n * n];
    let mut cur = vec![0.0; n * n];
    let mut next = vec![0.0; n * n];
    let mut traces = Array2::zeros((geometry.n_receivers(), config.n_steps));

    for step in 0..config.n_steps {
        let f = eval_source(waveform, step as f64 * config.dt);
        leapfrog_step(coeffs, &prev, &cur, &mut next);
        add_point_source(coeffs, &mut next, src, f);
        for (r, &node) in recv.iter().enumerate() {
            let v = next[node];
            if !v.is_finite() {
                return Err(Error::Instability { step });
            }
            traces[[r, step]] = v;
        }
        if step % 128 == 127 {
            check_finite(&next, step)?;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(traces)
}

/// Simulates all transmitters, one at a time, into a [`MeasurementSet`].
pub fn simulate_all(
    field: &SosField,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<MeasurementSet> {
    validate_simulation(field, config, geometry, waveform)?;
    let coeffs = build_coeffs(field, config);
    let shots: Vec<Result<Array2<f64>>> = (0..geometry.n_transmitters())
        .into_par_iter()
        .map(|s| simulate_with_coeffs(&coeffs, config, geometry, waveform, s))
        .collect();
    let m_s = geometry.n_transmitters();
    let m_r = geometry.n_receivers();
    let mut data = Array3::zeros((m_s, m_r, config.n_steps));
    for (s, shot) in shots.into_iter().enumerate() {
        data.index_axis_mut(ndarray::Axis(0), s).assign(&shot?);
    }
    Ok(MeasurementSet {
        data,
        dt: config.dt,
        geometry: geometry.clone(),
        tier: Some(config.tier),
    })
}

/// Adds i.i.d. zero-mean Gaussian noise to every sample; deterministic per
/// seed. `variance = 0` returns an identical copy.
pub fn add_noise(m: &MeasurementSet, variance: f64, seed: u64) -> MeasurementSet {
    let mut out = m.clone();
    if variance == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("noise distribution");
    let mut rng = rng_from_seed(seed);
    for v in out.data.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    out
}

/// Interior energy of a homogeneous-medium shot at every step, for
/// absorbing-layer diagnostics: `E = Σ_interior (v·u_t² + |∇u|²)·dx²/2`.
pub fn interior_energy_history(
    field: &SosField,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
    transmitter_index: usize,
) -> Result<Vec<f64>> {
    validate_simulation(field, config, geometry, waveform)?;
    let n = config.n_grid;
    let coeffs = build_coeffs(field, config);
    let (si, sj) = snap_node(config, geometry.transmitter_position(transmitter_index));
    let src = si * n + sj;
    let (lo, hi) = config.interior_range();

    let mut prev = vec![0.0; n * n];
    let mut cur = vec![0.0; n * n];
    let mut next = vec![0.0; n * n];
    let mut energies = Vec::with_capacity(config.n_steps);
    let inv_dt = 1.0 / config.dt;
    let scale = config.dt * config.dt; // recover v = dt²/(e2·dx²) lazily

    for step in 0..config.n_steps {
        let f = eval_source(waveform, step as f64 * config.dt);
        leapfrog_step(&coeffs, &prev, &cur, &mut next);
        add_point_source(&coeffs, &mut next, src, f);
        let mut e = 0.0;
        for i in lo..hi {
            for j in lo..hi {
                let idx = i * n + j;
                let v = scale / (coeffs.e2[idx] * config.dx * config.dx);
                let ut = (next[idx] - cur[idx]) * inv_dt;
                let gx = (next[idx + 1] - next[idx - 1]) / (2.0 * config.dx);
                let gy = (next[idx + n] - next[idx - n]) / (2.0 * config.dx);
                e += 0.5 * (v * ut * ut + gx * gx + gy * gy) * config.dx * config.dx;
            }
        }
        energies.push(e);
        if !e.is_finite() {
            return Err(Error::Instability { step });
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(energies)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Shipped model hierarchies.
pub mod presets {
    use super::*;

    /// The three tiers plus the shared acquisition setup.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct TierSet {
        pub physical: ModelConfig,
        pub accurate: ModelConfig,
        pub surrogate: ModelConfig,
        pub geometry: SensorGeometry,
        pub waveform: SourceWaveform,
    }

    impl TierSet {
        pub fn config(&self, tier: Tier) -> &ModelConfig {
            match tier {
                Tier::Physical => &self.physical,
                Tier::Accurate => &self.accurate,
                Tier::Surrogate => &self.surrogate,
            }
        }

        pub fn validate(&self) -> Result<()> {
            for cfg in [&self.physical, &self.accurate, &self.surrogate] {
                cfg.validate()?;
                self.geometry.validate_for(cfg)?;
            }
            self.waveform.validate()?;
            Ok(())
        }
    }

    /// Desk-scale hierarchy: a 200 mm interior shared by all tiers, 50 kHz
    /// source, 8 transmitters and 16 receivers on a 90 mm ring.
    ///
    /// The accurate grid is exactly twice as fine as the surrogate grid so
    /// that block projection applies; the physical tier is slightly finer
    /// than the accurate one and not commensurate with either, which keeps
    /// test data free of inverse crimes. The surrogate's absorbing layer is
    /// thin (0.42 wavelengths against 1.1 on the fine tiers), so its
    /// boundary reflections, coarser numerical dispersion, and sensor
    /// snapping form the modelling error the correction network has to
    /// learn.
    pub fn desk() -> TierSet {
        let dt = 3.0e-7;
        let n_steps = 700;
        let noise_train = 0.0005 * 0.0005;
        let physical = ModelConfig {
            n_grid: 344,
            dx: 0.2 / 258.0,
            dt,
            n_steps,
            abc_thickness: 43.0 * 0.2 / 258.0,
            eta_max: 4.0e5,
            noise_variance: 0.0006 * 0.0006,
            tier: Tier::Physical,
        };
        let accurate = ModelConfig {
            n_grid: 342,
            dx: 0.2 / 256.0,
            dt,
            n_steps,
            abc_thickness: 43.0 * 0.2 / 256.0,
            eta_max: 4.0e5,
            noise_variance: noise_train,
            tier: Tier::Accurate,
        };
        let surrogate = ModelConfig {
            n_grid: 144,
            dx: 0.2 / 128.0,
            dt,
            n_steps,
            abc_thickness: 8.0 * 0.2 / 128.0,
            eta_max: 1.2e6,
            noise_variance: noise_train,
            tier: Tier::Surrogate,
        };
        TierSet {
            physical,
            accurate,
            surrogate,
            geometry: SensorGeometry::ring(0.09, 8, 16),
            waveform: SourceWaveform {
                xi: -1.0e10,
                f0: 5.0e4,
                t0: 2.5e-5,
                amplitude: 1.0,
            },
        }
    }

    /// Full-scale hierarchy with the published grid sizes, spacings,
    /// absorbing-layer thicknesses, and noise variances. Hours of compute
    /// per reconstruction; kept for reference and for configuration tests.
    pub fn full_scale() -> TierSet {
        let dt = 1.0e-7;
        let n_steps = 2363;
        let noise_train = 0.0005 * 0.0005;
        let physical = ModelConfig {
            n_grid: 1056,
            dx: 0.2557e-3,
            dt,
            n_steps,
            abc_thickness: 35.0e-3,
            eta_max: 4.0e5,
            noise_variance: 0.0006 * 0.0006,
            tier: Tier::Physical,
        };
        let accurate = ModelConfig {
            n_grid: 1024,
            dx: 0.2637e-3,
            dt,
            n_steps,
            abc_thickness: 35.0e-3,
            eta_max: 4.0e5,
            noise_variance: noise_train,
            tier: Tier::Accurate,
        };
        let surrogate = ModelConfig {
            n_grid: 256,
            dx: 0.8398e-3,
            dt,
            n_steps,
            abc_thickness: 7.5e-3,
            eta_max: 4.0e5,
            noise_variance: noise_train,
            tier: Tier::Surrogate,
        };
        TierSet {
            physical,
            accurate,
            surrogate,
            geometry: SensorGeometry::ring(0.09, 16, 64),
            waveform: SourceWaveform {
                xi: -1.0e10,
                f0: 5.0e4,
                t0: 2.5e-5,
                amplitude: 1.0,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SosField;

    fn mini_config() -> ModelConfig {
        ModelConfig {
            n_grid: 48,
            dx: 0.2 / 40.0,
            dt: 1.5e-6,
            n_steps: 80,
            abc_thickness: 4.0 * 0.2 / 40.0,
            eta_max: 2.0e5,
            noise_variance: 0.0,
            tier: Tier::Surrogate,
        }
    }

    fn mini_geometry() -> SensorGeometry {
        SensorGeometry::ring(0.08, 2, 4)
    }

    fn paper_waveform() -> SourceWaveform {
        SourceWaveform {
            xi: -1.0e10,
            f0: 5.0e4,
            t0: 2.5e-5,
            amplitude: 1.0,
        }
    }

    #[test]
    fn source_pulse_reference_values() {
        let w = paper_waveform();
        // sin(0) = 0 regardless of the envelope.
        assert_eq!(eval_source(&w, 0.0), 0.0);
        // At the envelope centre: exp(0)·sin(2π·5e4·2.5e-5) = sin(2.5π) = 1.
        assert!((eval_source(&w, 2.5e-5) - 1.0).abs() < 1e-12);
        // 20 µs off-centre the envelope is exp(-4) ≈ 0.0183.
        assert!(eval_source(&w, 2.5e-5 + 2.0e-5).abs() < 0.02);
        assert!(eval_source(&w, 2.5e-5 - 2.0e-5).abs() < 0.02);
    }

    #[test]
    fn damping_profile_shape() {
        let cfg = mini_config();
        let eta = build_damping_profile(&cfg);
        let n = cfg.n_grid;
        let a = cfg.abc_cells();
        assert_eq!(a, 4);
        // Interior cells are undamped.
        assert_eq!(eta[[n / 2, n / 2]], 0.0);
        assert_eq!(eta[[a, a]], 0.0);
        // Outermost cells carry the full damping rate.
        assert_eq!(eta[[0, n / 2]], cfg.eta_max);
        assert_eq!(eta[[n - 1, n - 1]], cfg.eta_max);
        // Quadratic ramp: half depth gives a quarter of the peak.
        assert!((eta[[a / 2, n / 2]] - cfg.eta_max / 4.0).abs() < 1e-12);
        // Monotone towards the edge.
        for i in (1..=a).rev() {
            assert!(eta[[i - 1, n / 2]] > eta[[i, n / 2]]);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_traces() {
        let cfg = mini_config();
        let field = SosField::constant(1500.0, &cfg);
        let w = SourceWaveform {
            amplitude: 0.0,
            ..paper_waveform()
        };
        let traces = simulate(&field, &cfg, &mini_geometry(), &w, 0).unwrap();
        assert!(traces.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_all_dims_and_shot_independence() {
        let cfg = mini_config();
        let field = SosField::constant(1500.0, &cfg);
        let geo = mini_geometry();
        let m = simulate_all(&field, &cfg, &geo, &paper_waveform()).unwrap();
        assert_eq!(m.data.dim(), (2, 4, cfg.n_steps));
        // Each slab equals the corresponding single-shot run.
        for s in 0..2 {
            let single = simulate(&field, &cfg, &geo, &paper_waveform(), s).unwrap();
            assert_eq!(m.data.index_axis(ndarray::Axis(0), s), single.view());
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let cfg = ModelConfig {
            dt: 4.0e-6,
            ..mini_config()
        };
        assert!(cfg.validate().is_err());
        let field = SosField::constant(1500.0, &cfg);
        assert!(matches!(
            simulate(&field, &cfg, &mini_geometry(), &paper_waveform(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sensor_outside_interior_is_rejected() {
        let cfg = mini_config();
        let geo = SensorGeometry::ring(0.099, 2, 4);
        assert!(geo.validate_for(&cfg).is_err());
    }

    #[test]
    fn noise_statistics_match_requested_variance() {
        let geo = SensorGeometry::ring(0.08, 8, 16);
        let m = MeasurementSet {
            data: Array3::zeros((8, 16, 8000)),
            dt: 1e-7,
            geometry: geo,
            tier: None,
        };
        let var = 0.0005 * 0.0005;
        let noisy = add_noise(&m, var, 99);
        let n = noisy.data.len() as f64;
        assert!(n >= 1.0e6);
        let mean = noisy.data.sum() / n;
        let est = noisy.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!((est - var).abs() < 0.02 * var, "estimated {est}, wanted {var}");
        // Determinism and the zero-variance identity.
        let again = add_noise(&m, var, 99);
        assert_eq!(noisy.data, again.data);
        let clean = add_noise(&m, 0.0, 1);
        assert_eq!(clean.data, m.data);
    }

    #[test]
    fn desk_preset_is_consistent() {
        let desk = presets::desk();
        desk.validate().unwrap();
        // All tiers share the 200 mm interior.
        for cfg in [&desk.physical, &desk.accurate, &desk.surrogate] {
            assert!(
                (cfg.interior_side() - 0.2).abs() < 1e-9,
                "interior side {} for {:?}",
                cfg.interior_side(),
                cfg.tier
            );
        }
        // Accurate and surrogate grids are commensurate for projection.
        let ratio = desk.surrogate.dx / desk.accurate.dx;
        assert!((ratio - ratio.round()).abs() < 1e-12);
        // Tiers are pairwise distinct (no inverse crime by construction).
        assert_ne!(desk.physical.dx, desk.accurate.dx);
        assert_ne!(desk.accurate.dx, desk.surrogate.dx);
        assert_ne!(desk.physical.n_grid, desk.accurate.n_grid);
    }

    #[test]
    fn full_scale_preset_matches_published_parameters() {
        let fs = presets::full_scale();
        fs.validate().unwrap();
        assert_eq!(fs.accurate.n_grid, 1024);
        assert_eq!(fs.surrogate.n_grid, 256);
        assert_eq!(fs.physical.n_grid, 1056);
        assert!((fs.accurate.dx - 0.2637e-3).abs() < 1e-12);
        assert!((fs.surrogate.dx - 0.8398e-3).abs() < 1e-12);
        assert!((fs.physical.dx - 0.2557e-3).abs() < 1e-12);
        assert_eq!(fs.geometry.n_transmitters(), 16);
        assert_eq!(fs.geometry.n_receivers(), 64);
        assert!((fs.physical.noise_variance - 0.0006 * 0.0006).abs() < 1e-18);
        // Interior sides agree to within a tenth of a millimetre.
        for cfg in [&fs.physical, &fs.accurate, &fs.surrogate] {
            assert!((cfg.interior_side() - 0.2).abs() < 1e-4);
        }
    }

    #[test]
    fn reflecting_boundaries_preserve_energy_without_damping() {
        let cfg = ModelConfig {
            eta_max: 0.0,
            n_steps: 400,
            ..mini_config()
        };
        let field = SosField::constant(1500.0, &cfg);
        let e = interior_energy_history(&field, &cfg, &mini_geometry(), &paper_waveform(), 0)
            .unwrap();
        let peak = e.iter().cloned().fold(0.0, f64::max);
        let last = *e.last().unwrap();
        assert!(last > 0.5 * peak, "final {last} vs peak {peak}");
    }
}
