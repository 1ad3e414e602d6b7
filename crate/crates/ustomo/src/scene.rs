//! Random speed-of-sound scenes and grid resampling.
//!
//! Training scenes follow the data-generation recipe: a smooth Gaussian
//! random background around 1500 m/s, clamped to [1100, 1800] m/s, with a
//! few constant-speed inclusions dropped inside the sensor ring. Test scenes
//! use star-shaped inclusions and a quieter background so that they are
//! drawn from a visibly different distribution than the training set.
//!
//! All generators are pure functions of their seed: equal inputs give
//! bit-identical fields, on any platform.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, rng_from_seed};
use crate::wavesim::ModelConfig;
use crate::{Error, Result};

/// A square speed-of-sound field in m/s on a uniform grid.
///
/// `values[[i, j]]` is the sound speed at the cell centre
/// `origin + (j*dx, i*dx)`; `origin` is the physical coordinate of cell
/// `(0, 0)`. Grids produced by this crate are centred on the physical
/// origin, so `origin = -(n-1)/2 * dx` on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SosField {
    pub values: Array2<f64>,
    pub dx: f64,
    pub origin: [f64; 2],
}

impl SosField {
    /// Wraps raw values, checking positivity and squareness.
    pub fn new(values: Array2<f64>, dx: f64, origin: [f64; 2]) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Dimension(format!(
                "field must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if !(dx > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive: {dx}")));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Config(
                "sound speeds must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { values, dx, origin })
    }

    /// Constant field on the grid of `config`, centred on the origin.
    pub fn constant(c: f64, config: &ModelConfig) -> Self {
        let n = config.n_grid;
        Self {
            values: Array2::from_elem((n, n), c),
            dx: config.dx,
            origin: centered_origin(n, config.dx),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Physical coordinate of cell centre `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + j as f64 * self.dx,
            self.origin[1] + i as f64 * self.dx,
        ]
    }

    /// Mean sound speed over the whole grid.
    pub fn mean(&self) -> f64 {
        self.values.sum() / (self.values.len() as f64)
    }

    /// Slowness-squared parameter `v = 1/c^2`, the native unknown of the
    /// wave equation.
    pub fn slowness_squared(&self) -> Array2<f64> {
        self.values.mapv(|c| 1.0 / (c * c))
    }

    /// Inverse of [`SosField::slowness_squared`].
    pub fn from_slowness_squared(v: &Array2<f64>, dx: f64, origin: [f64; 2]) -> Result<Self> {
        Self::new(v.mapv(|x| 1.0 / x.sqrt()), dx, origin)
    }
}

/// Origin (corner cell centre) of an `n`-cell grid centred on (0, 0).
pub fn centered_origin(n: usize, dx: f64) -> [f64; 2] {
    let o = -((n - 1) as f64) * dx / 2.0;
    [o, o]
}

/// Inclusion outline used by the scene generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InclusionShape {
    Circle,
    /// Polar perturbation `r(θ) = r0·(1 + a·cos(kθ))` with `k` drawn from
    /// `star_points_range`. With amplitude `a = 0` the star degenerates to a
    /// circle.
    Star,
}

/// Parameters of the random scene generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneParams {
    /// Pointwise mean of the background, m/s.
    pub mean_c: f64,
    /// Pointwise standard deviation of the background, m/s.
    pub sigma_background: f64,
    /// Lower clamp applied to every generated value, m/s.
    pub clamp_lo: f64,
    /// Upper clamp applied to every generated value, m/s.
    pub clamp_hi: f64,
    /// Correlation length of the background random field, meters.
    pub correlation_length: f64,
    /// Number of inclusions superposed on the background.
    pub n_inclusions: usize,
    /// Standard deviation of the per-inclusion constant speed, m/s.
    pub inclusion_sigma_c: f64,
    /// Uniform range of the inclusion base radius, meters.
    pub inclusion_radius_range: (f64, f64),
    pub inclusion_shape: InclusionShape,
    /// Inclusive range of the star point count `k`.
    pub star_points_range: (u32, u32),
    /// Relative amplitude of the star's polar perturbation (0 = circle).
    pub star_amplitude: f64,
    /// Radius of the imaged object, meters. The background tapers to
    /// `mean_c` outside this disc so that all structure stays within reach
    /// of the sensor ring; inclusions are also confined to it.
    pub object_radius: f64,
    /// Width of the cosine taper at the object rim, meters.
    pub taper_width: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Training-set preset: smooth background with sigma 91 m/s and three
    /// circular inclusions with speed sigma 50 m/s, clamped to
    /// [1100, 1800] m/s.
    pub fn training(seed: u64) -> Self {
        Self {
            mean_c: 1500.0,
            sigma_background: 91.0,
            clamp_lo: 1100.0,
            clamp_hi: 1800.0,
            correlation_length: 0.02,
            n_inclusions: 3,
            inclusion_sigma_c: 50.0,
            inclusion_radius_range: (0.010, 0.030),
            inclusion_shape: InclusionShape::Circle,
            star_points_range: (4, 8),
            star_amplitude: 0.3,
            object_radius: 0.080,
            taper_width: 0.010,
            seed,
        }
    }

    /// Test-set preset: quieter background (sigma 23 m/s) and star-shaped
    /// inclusions, otherwise as [`SceneParams::training`].
    pub fn test(seed: u64) -> Self {
        Self {
            sigma_background: 23.0,
            inclusion_shape: InclusionShape::Star,
            ..Self::training(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.clamp_lo < self.mean_c && self.mean_c < self.clamp_hi) {
            return Err(Error::Config(format!(
                "clamp range [{}, {}] must bracket the mean {}",
                self.clamp_lo, self.clamp_hi, self.mean_c
            )));
        }
        if self.sigma_background < 0.0 || self.inclusion_sigma_c < 0.0 || self.star_amplitude < 0.0
        {
            return Err(Error::Config("sigmas must be non-negative".into()));
        }
        if !(self.correlation_length > 0.0) {
            return Err(Error::Config("correlation length must be positive".into()));
        }
        let (r_lo, r_hi) = self.inclusion_radius_range;
        if !(0.0 < r_lo && r_lo <= r_hi) {
            return Err(Error::Config("bad inclusion radius range".into()));
        }
        if self.star_points_range.0 > self.star_points_range.1 {
            return Err(Error::Config("bad star point range".into()));
        }
        Ok(())
    }
}

struct Inclusion {
    center: [f64; 2],
    radius: f64,
    speed: f64,
    star_points: u32,
    star_phase: f64,
    amplitude: f64,
}

impl Inclusion {
    /// Outline radius at polar angle `theta` around the inclusion centre.
    fn outline(&self, theta: f64) -> f64 {
        self.radius * (1.0 + self.amplitude * ((self.star_points as f64) * (theta - self.star_phase)).cos())
    }

    fn outer_radius(&self) -> f64 {
        self.radius * (1.0 + self.amplitude)
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let dxp = p[0] - self.center[0];
        let dyp = p[1] - self.center[1];
        let r = (dxp * dxp + dyp * dyp).sqrt();
        r <= self.outline(dyp.atan2(dxp))
    }
}

const PLACEMENT_RETRIES: usize = 100;

/// Generates a random speed-of-sound field on the grid of `config`.
///
/// The background is a stationary Gaussian random field (squared-exponential
/// covariance, synthesized by Gaussian-filtering white noise) with the
/// requested pointwise mean and standard deviation, clamped first; the
/// inclusions are then written on top with constant clamped speeds.
/// Deterministic given `params.seed`.
pub fn generate_field(params: &SceneParams, config: &ModelConfig) -> Result<SosField> {
    params.validate()?;
    let n = config.n_grid;
    if n < 16 {
        return Err(Error::Config(format!("grid too small for scene generation: {n}")));
    }

    let dx = config.dx;
    let origin = centered_origin(n, dx);

    // Background: filtered white noise, L2-normalized kernel keeps unit
    // pointwise variance, then scale/shift/clamp.
    let mut rng = rng_from_seed(derive_seed(params.seed, "background", 0));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut white = Array2::zeros((n, n));
    for v in white.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let sigma_cells = params.correlation_length / (dx * std::f64::consts::SQRT_2);
    let smooth = gaussian_filter_l2(&white, sigma_cells);

    let r_taper_in = (params.object_radius - params.taper_width).max(0.0);
    let mut values = Array2::from_elem((n, n), params.mean_c);
    for i in 0..n {
        for j in 0..n {
            let x = origin[0] + j as f64 * dx;
            let y = origin[1] + i as f64 * dx;
            let r = (x * x + y * y).sqrt();
            let w = taper(r, r_taper_in, params.object_radius);
            let c = params.mean_c + params.sigma_background * smooth[[i, j]] * w;
            values[[i, j]] = c.clamp(params.clamp_lo, params.clamp_hi);
        }
    }

    // Inclusions: rejection-sampled inside the object disc, non-overlapping.
    let mut rng = rng_from_seed(derive_seed(params.seed, "inclusions", 0));
    let mut placed: Vec<Inclusion> = Vec::with_capacity(params.n_inclusions);
    for _ in 0..params.n_inclusions {
        let mut ok = None;
        for _attempt in 0..PLACEMENT_RETRIES {
            let r_lo = params.inclusion_radius_range.0;
            let r_hi = params.inclusion_radius_range.1;
            let radius = r_lo + (r_hi - r_lo) * rng.random::<f64>();
            let amplitude = match params.inclusion_shape {
                InclusionShape::Circle => 0.0,
                InclusionShape::Star => params.star_amplitude,
            };
            let outer = radius * (1.0 + amplitude);
            let max_center_r = r_taper_in - outer;
            if max_center_r <= 0.0 {
                continue;
            }
            let rc = max_center_r * rng.random::<f64>().sqrt();
            let th = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let center = [rc * th.cos(), rc * th.sin()];
            let speed = Normal::new(params.mean_c, params.inclusion_sigma_c.max(f64::MIN_POSITIVE))
                .expect("inclusion speed dist")
                .sample(&mut rng)
                .clamp(params.clamp_lo, params.clamp_hi);
            let (k_lo, k_hi) = params.star_points_range;
            let star_points = rng.random_range(k_lo..=k_hi);
            let star_phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let cand = Inclusion {
                center,
                radius,
                speed,
                star_points,
                star_phase,
                amplitude,
            };
            let overlaps = placed.iter().any(|p| {
                let ddx = p.center[0] - cand.center[0];
                let ddy = p.center[1] - cand.center[1];
                (ddx * ddx + ddy * ddy).sqrt() < p.outer_radius() + cand.outer_radius()
            });
            if !overlaps {
                ok = Some(cand);
                break;
            }
        }
        match ok {
            Some(inc) => placed.push(inc),
            None => {
                return Err(Error::Placement {
                    retries: PLACEMENT_RETRIES,
                })
            }
        }
    }

    for inc in &placed {
        let outer = inc.outer_radius();
        // Only rasterize the bounding box of the inclusion.
        let i_lo = (((inc.center[1] - outer) - origin[1]) / dx).floor().max(0.0) as usize;
        let i_hi = ((((inc.center[1] + outer) - origin[1]) / dx).ceil() as usize).min(n - 1);
        let j_lo = (((inc.center[0] - outer) - origin[0]) / dx).floor().max(0.0) as usize;
        let j_hi = ((((inc.center[0] + outer) - origin[0]) / dx).ceil() as usize).min(n - 1);
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let p = [origin[0] + j as f64 * dx, origin[1] + i as f64 * dx];
                if inc.contains(p) {
                    values[[i, j]] = inc.speed;
                }
            }
        }
    }

    SosField::new(values, dx, origin)
}

/// [`generate_field`] restricted to the test-set distribution: star-shaped
/// inclusions on a 23 m/s background.
pub fn generate_test_field(params: &SceneParams, config: &ModelConfig) -> Result<SosField> {
    let params = SceneParams {
        inclusion_shape: InclusionShape::Star,
        sigma_background: 23.0,
        ..params.clone()
    };
    generate_field(&params, config)
}

fn taper(r: f64, r_in: f64, r_out: f64) -> f64 {
    if r <= r_in {
        1.0
    } else if r >= r_out {
        0.0
    } else {
        let t = (r - r_in) / (r_out - r_in);
        0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Separable Gaussian filter with an L2-normalized kernel and reflecting
/// boundaries. White noise in, unit-pointwise-variance smooth field out.
fn gaussian_filter_l2(input: &Array2<f64>, sigma_cells: f64) -> Array2<f64> {
    if sigma_cells < 1e-9 {
        return input.clone();
    }
    let half = (3.0 * sigma_cells).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * half + 1);
    for k in -(half as i64)..=(half as i64) {
        let x = k as f64;
        kernel.push((-x * x / (2.0 * sigma_cells * sigma_cells)).exp());
    }
    let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
    for k in &mut kernel {
        *k /= norm;
    }

    let n = input.nrows();
    let m = input.ncols();
    let reflect = |idx: i64, len: usize| -> usize {
        let len = len as i64;
        let mut i = idx;
        // Mirror without repeating the edge sample.
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
                let jj = reflect(j as i64 + ki as i64 - half as i64, m);
                acc += kv * input[[i, jj]];
            }
            tmp[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((n, m));
    for j in 0..m {
        for i in 0..n {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let ii = reflect(i as i64 + ki as i64 - half as i64, n);
                acc += kv * tmp[[ii, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Projects a fine field onto the (coarser) grid of `target` by block
/// averaging.
///
/// The two grids must be centred on the same origin, the spacing ratio must
/// be an integer, and the cell edges must line up so that every target cell
/// is covered by a whole block of source cells. Block means conserve the
/// field mean over any aligned region and act as an anti-aliasing filter.
pub fn project(field: &SosField, target: &ModelConfig) -> Result<SosField> {
    let ratio = target.dx / field.dx;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.abs() {
        return Err(Error::Resample(format!(
            "spacing ratio {ratio} is not a positive integer"
        )));
    }
    let k = k as usize;
    let n_t = target.n_grid;
    let origin_t = centered_origin(n_t, target.dx);

    // Left edge of target cell 0 relative to the left edge of source cell 0,
    // in source cells. Must be a non-negative integer for exact coverage.
    let src_edge = field.origin[0] - field.dx / 2.0;
    let tgt_edge = origin_t[0] - target.dx / 2.0;
    let off = (tgt_edge - src_edge) / field.dx;
    let off_i = off.round();
    if (off - off_i).abs() > 1e-6 || off_i < 0.0 {
        return Err(Error::Resample(format!(
            "grids are not aligned on cell edges (offset {off} source cells)"
        )));
    }
    let off_i = off_i as usize;
    if off_i + n_t * k > field.n() {
        return Err(Error::Resample(format!(
            "source grid ({} cells) does not cover the target (needs {})",
            field.n(),
            off_i + n_t * k
        )));
    }

    let inv = 1.0 / ((k * k) as f64);
    let mut out = Array2::zeros((n_t, n_t));
    for bi in 0..n_t {
        for bj in 0..n_t {
            let mut acc = 0.0;
            for di in 0..k {
                for dj in 0..k {
                    acc += field.values[[off_i + bi * k + di, off_i + bj * k + dj]];
                }
            }
            out[[bi, bj]] = acc * inv;
        }
    }
    SosField::new(out, target.dx, origin_t)
}

/// Samples `field` at the cell centres of `target`'s grid by bilinear
/// interpolation, clamping to the source extent.
///
/// Used to hand one "true" scene to a tier whose grid is not commensurate
/// with the scene's native grid (the physical tier in the shipped presets).
pub fn resample_bilinear(field: &SosField, target: &ModelConfig) -> Result<SosField> {
    let n_t = target.n_grid;
    let origin_t = centered_origin(n_t, target.dx);
    let n_s = field.n();
    let mut out = Array2::zeros((n_t, n_t));
    for i in 0..n_t {
        for j in 0..n_t {
            let x = origin_t[0] + j as f64 * target.dx;
            let y = origin_t[1] + i as f64 * target.dx;
            let fx = ((x - field.origin[0]) / field.dx).clamp(0.0, (n_s - 1) as f64);
            let fy = ((y - field.origin[1]) / field.dx).clamp(0.0, (n_s - 1) as f64);
            let j0 = (fx.floor() as usize).min(n_s - 2);
            let i0 = (fy.floor() as usize).min(n_s - 2);
            let tx = fx - j0 as f64;
            let ty = fy - i0 as f64;
            let v00 = field.values[[i0, j0]];
            let v01 = field.values[[i0, j0 + 1]];
            let v10 = field.values[[i0 + 1, j0]];
            let v11 = field.values[[i0 + 1, j0 + 1]];
            out[[i, j]] = v00 * (1.0 - tx) * (1.0 - ty)
                + v01 * tx * (1.0 - ty)
                + v10 * (1.0 - tx) * ty
                + v11 * tx * ty;
        }
    }
    SosField::new(out, target.dx, origin_t)
}

/// Root-mean-square difference between two fields of identical shape, m/s.
pub fn rmse(a: &SosField, b: &SosField) -> Result<f64> {
    if a.values.dim() != b.values.dim() {
        return Err(Error::Dimension(format!(
            "rmse requires equal shapes, got {:?} vs {:?}",
            a.values.dim(),
            b.values.dim()
        )));
    }
    let n = a.values.len() as f64;
    let sum: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / n).sqrt())
}
