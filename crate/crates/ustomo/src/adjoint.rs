//! Data misfit, adjoint-state gradient, and iterative reconstruction.
//!
//! The misfit is plain least squares over all transmitter/receiver/time
//! samples, `J = ½ Σ (sim - data)²`, with no regularization term. The
//! gradient with respect to the slowness-squared parameter `v = 1/c²` is the
//! exact reverse-mode derivative of the discrete leapfrog scheme: the wave
//! equation is linear in `v`, so optimizing in `v` keeps the adjoint formula
//! exact. Adjoint sources are injected at the identical snapped receiver
//! nodes used for sampling; without that symmetry the finite-difference
//! check fails.
//!
//! [`reconstruct`] runs projected gradient descent with an Armijo
//! backtracking line search, optional Gaussian smoothing of the gradient,
//! and bound clamping of the sound speed on every iterate. The gradient is
//! restricted to the interior (undamped) region; absorbing-layer cells keep
//! their initial value.

use ndarray::Array2;
use rayon::prelude::*;

use crate::scene::SosField;
use crate::wavesim::{
    self, add_point_source, build_coeffs, eval_source, Coeffs, MeasurementSet, ModelConfig,
    SensorGeometry, SourceWaveform,
};
use crate::{Error, Result};

/// Step-size policy of [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Always take the scaled steepest-descent step.
    Fixed,
    /// Armijo backtracking around the scaled step.
    Backtracking,
}

/// Options of the iterative reconstruction.
#[derive(Debug, Clone)]
pub struct InversionOptions {
    pub max_iterations: usize,
    /// Starting model; a constant 1500 m/s field when `None`.
    pub initial_field: Option<SosField>,
    pub step_rule: StepRule,
    /// First trial step, expressed as the largest pointwise change of `c²`
    /// in (m/s)² it may apply at the background speed.
    pub initial_step: f64,
    /// Gaussian smoothing radius applied to the gradient, meters
    /// (0 disables). Defaults to one wavelength at 50 kHz.
    pub smoothing_radius: f64,
    /// Clamp `[c_min, c_max]` applied to every iterate, m/s.
    pub bounds: (f64, f64),
    /// Stop when the relative misfit decrease falls below this.
    pub convergence_tol: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            initial_field: None,
            step_rule: StepRule::Backtracking,
            initial_step: 6.0e4,
            smoothing_radius: 0.03,
            bounds: (1100.0, 1800.0),
            convergence_tol: 1.0e-4,
        }
    }
}

impl InversionOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        if !(self.bounds.0 > 0.0 && self.bounds.0 < self.bounds.1) {
            return Err(Error::Config("bounds must be ordered and positive".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Config("initial step must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`reconstruct`]: the final field plus the per-iteration record.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub field: SosField,
    /// Misfit at iterate 0, 1, ... (non-increasing under backtracking).
    pub misfit_history: Vec<f64>,
    /// Accepted step length per successful iteration.
    pub step_history: Vec<f64>,
    pub iterations: usize,
}

fn check_target(
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
) -> Result<()> {
    let (s, r, t) = target.data.dim();
    if s != geometry.n_transmitters() || r != geometry.n_receivers() || t != config.n_steps {
        return Err(Error::Dimension(format!(
            "measurement dims ({s}, {r}, {t}) do not match geometry/config ({}, {}, {})",
            geometry.n_transmitters(),
            geometry.n_receivers(),
            config.n_steps
        )));
    }
    Ok(())
}

/// Least-squares data misfit of `field` against `target`.
pub fn misfit(
    field: &SosField,
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<f64> {
    check_target(target, config, geometry)?;
    let coeffs = build_coeffs(field, config);
    misfit_with_coeffs(&coeffs, target, config, geometry, waveform)
}

fn misfit_with_coeffs(
    coeffs: &Coeffs,
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<f64> {
    let parts: Vec<Result<f64>> = (0..geometry.n_transmitters())
        .into_par_iter()
        .map(|s| {
            let traces = wavesim::simulate_with_coeffs(coeffs, config, geometry, waveform, s)?;
            let slab = target.data.index_axis(ndarray::Axis(0), s);
            let mut j = 0.0;
            for (sim, dat) in traces.iter().zip(slab.iter()) {
                let r = sim - dat;
                j += r * r;
            }
            Ok(j)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(0.5 * total)
}

/// Misfit gradient `∂J/∂v` with `v = 1/c²`, zero in the absorbing layer.
pub fn gradient(
    field: &SosField,
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<Array2<f64>> {
    misfit_and_gradient(field, target, config, geometry, waveform).map(|(_, g)| g)
}

/// Fused misfit + gradient (the gradient pass simulates everything anyway).
pub fn misfit_and_gradient(
    field: &SosField,
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
) -> Result<(f64, Array2<f64>)> {
    check_target(target, config, geometry)?;
    let coeffs = build_coeffs(field, config);
    let n = config.n_grid;

    let shots: Vec<Result<(f64, Vec<f64>)>> = (0..geometry.n_transmitters())
        .into_par_iter()
        .map(|s| shot_misfit_and_e2_gradient(&coeffs, target, config, geometry, waveform, s))
        .collect();

    let mut total_j = 0.0;
    let mut grad_e2 = vec![0.0; n * n];
    for shot in shots {
        let (j, g) = shot?;
        total_j += j;
        for (acc, x) in grad_e2.iter_mut().zip(g.iter()) {
            *acc += x;
        }
    }

    // Chain rule e2 = (dt²/dx²)/v  =>  ∂J/∂v = -∂J/∂e2 · (dt²/dx²)/v².
    let scale = config.dt * config.dt / (config.dx * config.dx);
    let mut grad_v = Array2::zeros((n, n));
    let (lo, hi) = config.interior_range();
    for i in lo..hi {
        for j in lo..hi {
            let c = field.values[[i, j]];
            let v = 1.0 / (c * c);
            grad_v[[i, j]] = -grad_e2[i * n + j] * scale / (v * v);
        }
    }
    Ok((total_j, grad_v))
}

/// Forward solve with stored drive history, then the exact reverse sweep.
/// Returns this shot's misfit contribution and `∂J/∂e2` (flat, full grid).
fn shot_misfit_and_e2_gradient(
    coeffs: &Coeffs,
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
    shot: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = config.n_grid;
    let nn = n * n;
    let steps = config.n_steps;
    let (si, sj) = wavesim::snap_node(config, geometry.transmitter_position(shot));
    let src = si * n + sj;
    let recv: Vec<usize> = (0..geometry.n_receivers())
        .map(|r| {
            let (i, j) = wavesim::snap_node(config, geometry.receiver_position(r));
            i * n + j
        })
        .collect();

    // Forward pass, recording the drive (∇²u·dx² + f at the source node).
    let mut prev = vec![0.0; nn];
    let mut cur = vec![0.0; nn];
    let mut next = vec![0.0; nn];
    let mut drives: Vec<f32> = vec![0.0; nn * steps];
    let slab = target.data.index_axis(ndarray::Axis(0), shot);
    let mut residual = Array2::zeros((recv.len(), steps));
    let mut j_shot = 0.0;
    for t in 0..steps {
        let f = eval_source(waveform, t as f64 * config.dt);
        let drive = &mut drives[t * nn..(t + 1) * nn];
        wavesim::leapfrog_step_with_drive(coeffs, &prev, &cur, &mut next, drive);
        drive[src] += f as f32;
        add_point_source(coeffs, &mut next, src, f);
        for (ri, &node) in recv.iter().enumerate() {
            let v = next[node];
            if !v.is_finite() {
                return Err(Error::Instability { step: t });
            }
            let r = v - slab[[ri, t]];
            residual[[ri, t]] = r;
            j_shot += r * r;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    j_shot *= 0.5;

    // Reverse sweep: ga accumulates ∂J/∂u^{t+1} (direct receiver term added
    // in-loop), gb the partial ∂J/∂u^{t} coming from later steps.
    let mut ga = vec![0.0; nn];
    let mut gb = vec![0.0; nn];
    let mut w = vec![0.0; nn];
    let mut ew = vec![0.0; nn];
    let mut ga_new = vec![0.0; nn];
    let mut grad_e2 = vec![0.0; nn];
    for t in (0..steps).rev() {
        for (ri, &node) in recv.iter().enumerate() {
            ga[node] += residual[[ri, t]];
        }
        let drive = &drives[t * nn..(t + 1) * nn];
        for idx in 0..nn {
            let wi = coeffs.inv_a[idx] * ga[idx];
            w[idx] = wi;
            grad_e2[idx] += wi * drive[idx] as f64;
            ew[idx] = coeffs.e2[idx] * wi;
        }
        // ga_new = gb + 2w + ∇²(e2∘w); boundary cells stay zero because the
        // forward map never writes them.
        for i in 1..n - 1 {
            let base = i * n;
            for j in 1..n - 1 {
                let idx = base + j;
                let lap = ew[idx - n] + ew[idx + n] + ew[idx - 1] + ew[idx + 1] - 4.0 * ew[idx];
                ga_new[idx] = gb[idx] + 2.0 * w[idx] + lap;
            }
        }
        for idx in 0..nn {
            gb[idx] = -coeffs.b[idx] * w[idx];
        }
        std::mem::swap(&mut ga, &mut ga_new);
        for v in ga_new.iter_mut() {
            *v = 0.0;
        }
    }
    Ok((j_shot, grad_e2))
}

/// Separable Gaussian smoother with an L1-normalized kernel (mean
/// preserving), reflecting boundaries. Used on the gradient only.
fn gaussian_smooth(g: &Array2<f64>, sigma_cells: f64) -> Array2<f64> {
    if sigma_cells < 1e-9 {
        return g.clone();
    }
    let half = (3.0 * sigma_cells).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * half + 1);
    for k in -(half as i64)..=(half as i64) {
        let x = k as f64;
        kernel.push((-x * x / (2.0 * sigma_cells * sigma_cells)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let n = g.nrows();
    let m = g.ncols();
    let reflect = |idx: i64, len: usize| -> usize {
        let len = len as i64;
        let mut i = idx;
        loop {
            if i < 0 {
                i = -i;
            } else if i >= len {
                i = 2 * len - 2 - i;
            } else {
                return i as usize;
            }
        }
    };
    let mut tmp = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                acc += kv * g[[i, reflect(j as i64 + ki as i64 - half as i64, m)]];
            }
            tmp[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[[reflect(i as i64 + ki as i64 - half as i64, n), j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Iterative reconstruction of the sound-speed field from one measurement
/// set, on the grid of `config`. The data-generating tier is never
/// consulted: only the samples, the geometry, and this config matter.
pub fn reconstruct(
    target: &MeasurementSet,
    config: &ModelConfig,
    geometry: &SensorGeometry,
    waveform: &SourceWaveform,
    opts: &InversionOptions,
) -> Result<Reconstruction> {
    opts.validate()?;
    config.validate()?;
    check_target(target, config, geometry)?;

    let mut field = match &opts.initial_field {
        Some(f) => {
            if f.n() != config.n_grid {
                return Err(Error::Dimension(format!(
                    "initial field grid {} does not match config grid {}",
                    f.n(),
                    config.n_grid
                )));
            }
            f.clone()
        }
        None => SosField::constant(1500.0, config),
    };

    let (lo, hi) = config.interior_range();
    let v_bounds = (
        1.0 / (opts.bounds.1 * opts.bounds.1),
        1.0 / (opts.bounds.0 * opts.bounds.0),
    );
    let sigma_cells = opts.smoothing_radius / (3.0 * config.dx);

    let mut v = field.slowness_squared();
    let mut misfit_history = Vec::with_capacity(opts.max_iterations + 1);
    let mut step_history = Vec::new();
    let mut alpha: Option<f64> = None;
    let mut consecutive_failures = 0usize;

    let (mut j_cur, mut g) = misfit_and_gradient(&field, target, config, geometry, waveform)?;
    misfit_history.push(j_cur);

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if j_cur == 0.0 {
            break;
        }
        let g_s = gaussian_smooth(&g, sigma_cells);
        let mut g_inf: f64 = 0.0;
        for i in lo..hi {
            for jj in lo..hi {
                g_inf = g_inf.max(g_s[[i, jj]].abs());
            }
        }
        if g_inf == 0.0 {
            break;
        }
        // First trial step: the requested c² change at the mean speed,
        // translated into v units.
        let c_mean = field.mean();
        let v_mean = 1.0 / (c_mean * c_mean);
        let alpha0 = opts.initial_step * v_mean * v_mean / g_inf;
        let mut a = alpha.unwrap_or(alpha0).min(alpha0 * 64.0);

        // Directional derivative of J along d = -g_s.
        let mut gd = 0.0;
        for i in lo..hi {
            for jj in lo..hi {
                gd -= g[[i, jj]] * g_s[[i, jj]];
            }
        }

        let try_step = |a: f64| -> Result<(f64, Array2<f64>, SosField)> {
            let mut v_trial = v.clone();
            for i in lo..hi {
                for jj in lo..hi {
                    v_trial[[i, jj]] =
                        (v[[i, jj]] - a * g_s[[i, jj]]).clamp(v_bounds.0, v_bounds.1);
                }
            }
            let f_trial = SosField::from_slowness_squared(&v_trial, field.dx, field.origin)?;
            let coeffs = build_coeffs(&f_trial, config);
            let j = misfit_with_coeffs(&coeffs, target, config, geometry, waveform)?;
            Ok((j, v_trial, f_trial))
        };

        let armijo = 1.0e-4;
        let mut accepted = None;
        match opts.step_rule {
            StepRule::Fixed => {
                let (j_new, v_new, f_new) = try_step(a)?;
                if j_new.is_finite() && j_new < j_cur {
                    accepted = Some((a, j_new, v_new, f_new));
                }
            }
            StepRule::Backtracking => {
                for _bt in 0..10 {
                    let (j_new, v_new, f_new) = try_step(a)?;
                    if j_new.is_finite() && j_new <= j_cur + armijo * a * gd {
                        accepted = Some((a, j_new, v_new, f_new));
                        break;
                    }
                    a *= 0.5;
                }
            }
        }

        match accepted {
            Some((a_acc, j_new, v_new, f_new)) => {
                consecutive_failures = 0;
                alpha = Some(a_acc * 2.0);
                v = v_new;
                field = f_new;
                let j_prev = j_cur;
                iterations += 1;
                step_history.push(a_acc);
                let converged = (j_prev - j_new) / j_prev < opts.convergence_tol;
                if converged || iterations == opts.max_iterations {
                    misfit_history.push(j_new);
                    j_cur = j_new;
                    if converged {
                        break;
                    }
                } else {
                    let (j_next, g_next) =
                        misfit_and_gradient(&field, target, config, geometry, waveform)?;
                    misfit_history.push(j_next);
                    j_cur = j_next;
                    g = g_next;
                }
            }
            None => {
                consecutive_failures += 1;
                alpha = None; // restart the step-size schedule
                if consecutive_failures >= 5 {
                    return Err(Error::Divergence {
                        iterations,
                        last_stable: Box::new(field),
                        misfit_history,
                    });
                }
            }
        }
    }

    Ok(Reconstruction {
        field,
        misfit_history,
        step_history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{centered_origin, SosField};
    use crate::wavesim::{presets, simulate_all, Tier};
    use ndarray::Array2;

    fn fd_config() -> ModelConfig {
        ModelConfig {
            n_grid: 24,
            dx: 0.0125,
            dt: 4.0e-6,
            n_steps: 60,
            abc_thickness: 4.0 * 0.0125,
            eta_max: 1.5e5,
            noise_variance: 0.0,
            tier: Tier::Surrogate,
        }
    }

    fn fd_geometry() -> SensorGeometry {
        SensorGeometry::ring(0.08, 3, 5)
    }

    fn fd_waveform() -> SourceWaveform {
        SourceWaveform {
            xi: -1.0e10,
            f0: 5.0e4,
            t0: 2.5e-5,
            amplitude: 1.0,
        }
    }

    fn random_interior_field(cfg: &ModelConfig, seed: u64, base: f64, spread: f64) -> SosField {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(seed);
        let n = cfg.n_grid;
        let mut vals = Array2::from_elem((n, n), base);
        let (lo, hi) = cfg.interior_range();
        for i in lo..hi {
            for j in lo..hi {
                vals[[i, j]] = base + spread * (rng.random::<f64>() - 0.5);
            }
        }
        SosField::new(vals, cfg.dx, centered_origin(n, cfg.dx)).unwrap()
    }

    #[test]
    fn zero_residual_gives_zero_misfit_and_gradient() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let field = random_interior_field(&cfg, 5, 1500.0, 120.0);
        let data = simulate_all(&field, &cfg, &geo, &w).unwrap();
        let (j, g) = misfit_and_gradient(&field, &data, &cfg, &geo, &w).unwrap();
        assert_eq!(j, 0.0);
        let gmax = g.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(gmax < 1e-12, "gradient should vanish, got {gmax}");
    }

    #[test]
    fn misfit_quadratic_expansion() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let field = random_interior_field(&cfg, 6, 1500.0, 80.0);
        let mut data = simulate_all(&field, &cfg, &geo, &w).unwrap();
        let delta = 3.7e-3;
        data.data[[1, 2, 30]] += delta;
        let j = misfit(&field, &data, &cfg, &geo, &w).unwrap();
        assert!((j - 0.5 * delta * delta).abs() < 1e-15);
    }

    /// Central finite differences of the misfit along random interior
    /// directions, step swept over three decades; the adjoint gradient must
    /// agree to better than 1e-3 relative error.
    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let field = random_interior_field(&cfg, 7, 1500.0, 100.0);
        let truth = random_interior_field(&cfg, 8, 1520.0, 100.0);
        let data = simulate_all(&truth, &cfg, &geo, &w).unwrap();

        let (_, g) = misfit_and_gradient(&field, &data, &cfg, &geo, &w).unwrap();
        let v0 = field.slowness_squared();
        let (lo, hi) = cfg.interior_range();
        let v_scale = 1.0 / (1500.0f64 * 1500.0);

        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(99);
        for dir_idx in 0..6 {
            let n = cfg.n_grid;
            let mut d = Array2::zeros((n, n));
            for i in lo..hi {
                for j in lo..hi {
                    d[[i, j]] = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
            let gd: f64 = g.iter().zip(d.iter()).map(|(a, b)| a * b).sum();

            let mut best = f64::INFINITY;
            for decade in 0..3 {
                let h = v_scale * 1.0e-4 * 10f64.powi(-decade);
                let jp = {
                    let v = &v0 + &d.mapv(|x| x * h);
                    let f = SosField::from_slowness_squared(&v, field.dx, field.origin).unwrap();
                    misfit(&f, &data, &cfg, &geo, &w).unwrap()
                };
                let jm = {
                    let v = &v0 - &d.mapv(|x| x * h);
                    let f = SosField::from_slowness_squared(&v, field.dx, field.origin).unwrap();
                    misfit(&f, &data, &cfg, &geo, &w).unwrap()
                };
                let fd = (jp - jm) / (2.0 * h);
                let rel = (gd - fd).abs() / fd.abs().max(1e-300);
                best = best.min(rel);
            }
            assert!(best < 1e-3, "direction {dir_idx}: relative error {best}");
        }
    }

    #[test]
    fn slow_inclusion_pushes_v_upward_at_its_center() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let n = cfg.n_grid;
        let mut vals = Array2::from_elem((n, n), 1500.0);
        let origin = centered_origin(n, cfg.dx);
        for i in 0..n {
            for j in 0..n {
                let x = origin[0] + j as f64 * cfg.dx;
                let y = origin[1] + i as f64 * cfg.dx;
                if (x * x + y * y).sqrt() < 0.03 {
                    vals[[i, j]] = 1400.0;
                }
            }
        }
        let truth = SosField::new(vals, cfg.dx, origin).unwrap();
        let data = simulate_all(&truth, &cfg, &geo, &w).unwrap();
        let guess = SosField::constant(1500.0, &cfg);
        let g = gradient(&guess, &data, &cfg, &geo, &w).unwrap();
        // Descent takes v ← v - αg, so g < 0 raises v (lowers c) there.
        assert!(
            g[[n / 2, n / 2]] < 0.0,
            "expected negative v-gradient at the slow inclusion, got {}",
            g[[n / 2, n / 2]]
        );
    }

    #[test]
    fn reconstruct_is_a_fixed_point_on_consistent_data() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let init = random_interior_field(&cfg, 11, 1500.0, 60.0);
        let data = simulate_all(&init, &cfg, &geo, &w).unwrap();
        let opts = InversionOptions {
            initial_field: Some(init.clone()),
            max_iterations: 5,
            ..Default::default()
        };
        let rec = reconstruct(&data, &cfg, &geo, &w, &opts).unwrap();
        assert_eq!(rec.misfit_history[0], 0.0);
        assert_eq!(rec.iterations, 0);
        assert_eq!(rec.field.values, init.values);
    }

    #[test]
    fn reconstruct_decreases_misfit_and_respects_bounds() {
        let cfg = fd_config();
        let geo = fd_geometry();
        let w = fd_waveform();
        let truth = random_interior_field(&cfg, 21, 1480.0, 150.0);
        let data = simulate_all(&truth, &cfg, &geo, &w).unwrap();
        let opts = InversionOptions {
            max_iterations: 12,
            smoothing_radius: 0.02,
            convergence_tol: 0.0,
            ..Default::default()
        };
        let rec = reconstruct(&data, &cfg, &geo, &w, &opts).unwrap();
        for pair in rec.misfit_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "misfit must not increase: {pair:?}");
        }
        assert!(rec.misfit_history.last().unwrap() < &rec.misfit_history[0]);
        for &c in rec.field.values.iter() {
            assert!((1100.0..=1800.0).contains(&c));
        }
        // The data-generating tier label is irrelevant to the inversion.
        let mut relabeled = data.clone();
        relabeled.tier = Some(Tier::Physical);
        let rec2 = reconstruct(&relabeled, &cfg, &geo, &w, &opts).unwrap();
        assert_eq!(rec2.field.values, rec.field.values);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let desk = presets::desk();
        let geo = &desk.geometry;
        let m = MeasurementSet {
            data: ndarray::Array3::zeros((geo.n_transmitters(), geo.n_receivers(), 10)),
            dt: desk.surrogate.dt,
            geometry: geo.clone(),
            tier: None,
        };
        let field = SosField::constant(1500.0, &desk.surrogate);
        assert!(matches!(
            misfit(&field, &m, &desk.surrogate, geo, &desk.waveform),
            Err(Error::Dimension(_))
        ));
    }
}
