//! Ground states and extremals by preconditioned descent and by fixed-point
//! iteration of the integral form, plus decay and shape diagnostics.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    dot, energy_report, h1_operator, parts, relative_dual_norm, weak_form, EnergyReport, Parts, RESIDUAL_TRIM,
};
use crate::error::{Error, Result};
use crate::exponents::{decay_constant, existence_verdict, Existence, ProblemParams};
use crate::grid::{h1_norm_sq, radial_derivative, RadialFunction, RadialGrid};
use crate::hlslab::talenti_bubble;
use crate::kernel::{helmholtz_solve, riesz_green_apply, KernelMatrix};

/// Step halvings tried before the line search gives up.
const MAX_HALVINGS: usize = 40;
/// Relative slack for accepting a step whose energy ties the current one.
const ACCEPT_SLACK: f64 = 1e-14;
/// Energy band treated as roundoff; inside it a step is accepted when the
/// residual drops.
const ROUNDOFF_BAND: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub step: f64,
    pub rescale_every: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iter: 2000, tol: 1e-8, step: 1.0, rescale_every: 25, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_iter < 1 {
            bad.push("max_iter ≥ 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bad.push("tol > 0");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            bad.push("step > 0");
        }
        if self.rescale_every < 1 {
            bad.push("rescale_every ≥ 1");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!("solver settings violate {}", bad.join(", "))))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Subcritical,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    GradientFlow,
    FixedPoint,
}

/// Named starting profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPreset {
    /// `e^{−r²}`.
    #[default]
    Gaussian,
    /// Talenti bubble with `t = 1`.
    Bubble,
    /// Sum of three Gaussians with seeded amplitudes and widths.
    Random,
}

#[derive(Debug, Clone)]
pub enum Init {
    Preset(InitPreset),
    Profile(RadialFunction),
}

impl From<InitPreset> for Init {
    fn from(p: InitPreset) -> Self {
        Init::Preset(p)
    }
}

/// Evaluates an initial profile on `grid`.
pub fn initial_profile(init: &Init, grid: &Arc<RadialGrid>, seed: u64) -> Result<RadialFunction> {
    match init {
        Init::Profile(u) => {
            u.check_same_grid(grid)?;
            Ok(u.map(f64::abs))
        }
        Init::Preset(InitPreset::Gaussian) => Ok(RadialFunction::from_fn(grid.clone(), |r| (-r * r).exp())),
        Init::Preset(InitPreset::Bubble) => {
            let dim = grid.dim();
            Ok(RadialFunction::from_fn(grid.clone(), |r| talenti_bubble(dim, 1.0, r)))
        }
        Init::Preset(InitPreset::Random) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bumps: Vec<(f64, f64)> =
                (0..3).map(|_| (rng.random_range(0.5..1.5), rng.random_range(0.5..2.0))).collect();
            Ok(RadialFunction::from_fn(grid.clone(), |r| bumps.iter().map(|(a, s)| a * (-(r / s).powi(2)).exp()).sum()))
        }
    }
}

/// Least-squares tail slope and the pointwise bound verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub window: [f64; 2],
    /// `C` in `u ≤ C r^{−(N−2)/2}`, when a bound was checked.
    pub bound_constant: Option<f64>,
    /// `max u(r) r^{(N−2)/2} / C` over the window.
    pub worst_bound_ratio: Option<f64>,
    pub bound_ok: Option<bool>,
    /// Set when the bound fails by at most 5%, attributed to discretization.
    pub within_discretization_slack: Option<bool>,
}

/// Fits `log u ≈ a + slope·log r` over nodes in `window` with `u > 0`, and
/// checks `u ≤ C r^{−(N−2)/2}` there when `bound` supplies `C`.
pub fn fit_decay(u: &RadialFunction, window: (f64, f64), bound: Option<f64>) -> Result<DecayFit> {
    let g = u.grid();
    let pts: Vec<(f64, f64)> = g
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(r, v)| **r >= window.0 && **r <= window.1 && **v > 0.0)
        .map(|(r, v)| (*r, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (r, v)| (a + r.ln(), b + v.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (r, v)| {
        let dx = r.ln() - mx;
        (a + dx * (v.ln() - my), b + dx * dx)
    });
    let slope = sxy / sxx;
    let half = 0.5 * (g.dim() as f64 - 2.0);
    let worst = bound.map(|c| pts.iter().map(|(r, v)| v * r.powf(half) / c).fold(f64::NEG_INFINITY, f64::max));
    Ok(DecayFit {
        slope,
        window: [window.0, window.1],
        bound_constant: bound,
        worst_bound_ratio: worst,
        bound_ok: worst.map(|w| w <= 1.0),
        within_discretization_slack: worst.map(|w| w > 1.0 && w <= 1.05),
    })
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `I` after Nehari projection (subcritical) or `Q` (critical), one
    /// entry per accepted iterate, starting with the initial profile.
    pub energy_history: Vec<f64>,
    #[serde(rename = "final")]
    pub final_report: EnergyReport,
    pub decay: DecayFit,
    pub method: Method,
    pub mode: Mode,
    /// Relative weak residual of the returned profile.
    pub residual: f64,
    /// Critical mode: the residual with its component along the dilation
    /// orbit removed. Domain truncation breaks scale invariance, so this is
    /// the quantity that decides convergence there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_modulo_dilation: Option<f64>,
    pub warnings: Vec<String>,
}

/// Reads a report written by a solve.
pub fn parse_solve_report(text: &str) -> Result<SolveReport> {
    Ok(serde_json::from_str(text)?)
}

fn check_kernel_for(params: &ProblemParams, grid: &Arc<RadialGrid>, kernel: &KernelMatrix) -> Result<()> {
    if !kernel.grid().same_as(grid) || kernel.dim() != params.dim || kernel.mu() != params.mu {
        return Err(Error::GridMismatch("kernel was assembled for a different grid or (N, μ)".into()));
    }
    Ok(())
}

fn require_existence(params: &ProblemParams) -> Result<f64> {
    let p = params.p.ok_or_else(|| Error::WrongMode("subcritical solve needs an explicit p".into()))?;
    if existence_verdict(params)? != Existence::Exists {
        return Err(Error::Nonexistence(format!(
            "p = {p} is outside the open range between the critical exponents; \
             the Pohozaev obstruction forces u = 0"
        )));
    }
    Ok(p)
}

fn require_critical(params: &ProblemParams) -> Result<f64> {
    params.check_base()?;
    if params.p.is_some() {
        return Err(Error::WrongMode("critical solve takes p = 2*_{α,μ}; drop the explicit p".into()));
    }
    Ok(params.exponent())
}

/// Nehari projection using precomputed parts.
fn project_nehari(u: &RadialFunction, pr: Parts, p: f64) -> Result<(RadialFunction, Parts)> {
    if !(pr.nonlocal_d > 0.0) {
        return Err(if u.is_zero() { Error::ZeroFunction } else { Error::ZeroNonlocal });
    }
    let t = ((pr.kinetic + pr.mass) / pr.nonlocal_d).powf(1.0 / (2.0 * p - 2.0));
    Ok((u.scaled(t), pr.scaled(t, p)))
}

fn nehari_energy(pr: &Parts, p: f64) -> f64 {
    0.5 * pr.kinetic + 0.5 * pr.mass - pr.nonlocal_d / (2.0 * p)
}

/// Scales onto `D = 1`.
fn normalize_d(u: &RadialFunction, pr: Parts, q: f64) -> Result<(RadialFunction, Parts)> {
    if !(pr.nonlocal_d > 0.0) {
        return Err(if u.is_zero() { Error::ZeroFunction } else { Error::ZeroNonlocal });
    }
    let t = pr.nonlocal_d.powf(-1.0 / (2.0 * q));
    Ok((u.scaled(t), pr.scaled(t, q)))
}

fn subcritical_residual(g: &RadialGrid, pr: &Parts, u: &RadialFunction, p: f64) -> Result<f64> {
    let f = weak_form(g, pr, u.values(), p, true);
    relative_dual_norm(&h1_operator(g), f, u.values())
}

/// Relative `D^{−1,2}` residual of a `D = 1` profile after Lagrange rescaling.
fn critical_residual(g: &RadialGrid, pr: &Parts, u: &RadialFunction, q: f64) -> Result<f64> {
    let c = (pr.kinetic / pr.nonlocal_d).powf(1.0 / (2.0 * q - 2.0));
    let scaled = pr.scaled(c, q);
    let v = u.scaled(c);
    let f = weak_form(g, &scaled, v.values(), q, false);
    relative_dual_norm(&g.stiffness(), f, v.values())
}

/// `ξ = r u′ + (N−2)/2 u`, the tangent of the `D^{1,2}`-isometric dilation orbit.
fn dilation_generator(u: &RadialFunction) -> Vec<f64> {
    let half = 0.5 * (u.grid().dim() as f64 - 2.0);
    let du = radial_derivative(u);
    u.grid().nodes().iter().zip(du.values()).zip(u.values()).map(|((r, d), x)| r * d + half * x).collect()
}

/// Relative `D^{1,2}` size of `v − u` after removing its component along the
/// dilation orbit through `v`.
fn change_modulo_dilation(u: &RadialFunction, v: &RadialFunction) -> f64 {
    let a = v.grid().stiffness();
    let diff: Vec<f64> = v.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
    let xi = dilation_generator(v);
    let a_xi = a.mul_vec(&xi);
    let xi_norm = dot(&a_xi, &xi);
    let along = dot(&a_xi, &diff);
    let full = dot(&a.mul_vec(&diff), &diff);
    let projected = if xi_norm > 0.0 { full - along * along / xi_norm } else { full };
    let den = dot(&a.mul_vec(v.values()), v.values());
    if den > 0.0 {
        (projected.max(0.0) / den).sqrt()
    } else {
        0.0
    }
}

/// Critical residual with the component along the dilation generator
/// `ξ = r u′ + (N−2)/2 u` removed, in the `D^{1,2}` inner product.
fn critical_residual_modulo_dilation(g: &RadialGrid, pr: &Parts, u: &RadialFunction, q: f64) -> Result<f64> {
    let c = (pr.kinetic / pr.nonlocal_d).powf(1.0 / (2.0 * q - 2.0));
    let scaled = pr.scaled(c, q);
    let v = u.scaled(c);
    let mut f = weak_form(g, &scaled, v.values(), q, false);
    let n = f.len();
    let trim = RESIDUAL_TRIM.min(n / 2);
    f[..trim].fill(0.0);
    f[n - trim..].fill(0.0);
    let xi = dilation_generator(&v);
    let a = g.stiffness();
    let full = dot(&f, &a.solve(&f)?);
    let along = dot(&f, &xi);
    let xi_norm = dot(&a.mul_vec(&xi), &xi);
    let projected = if xi_norm > 0.0 { full - along * along / xi_norm } else { full };
    let den = dot(&a.mul_vec(v.values()), v.values());
    Ok(if den > 0.0 { (projected.max(0.0) / den).sqrt() } else { 0.0 })
}

/// Residuals, energies and tail diagnostics of a profile, independent of how
/// it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: Mode,
    #[serde(rename = "final")]
    pub final_report: EnergyReport,
    pub decay: DecayFit,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_modulo_dilation: Option<f64>,
    pub warnings: Vec<String>,
}

/// Evaluates a profile: energy report, weak residuals and the tail fit over
/// `[r_max/10, r_max]`, with the decay bound checked in critical mode.
pub fn diagnose(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<Diagnostics> {
    let g = u.grid().clone();
    check_kernel_for(params, &g, kernel)?;
    let final_report = energy_report(u, params, kernel)?;
    let (mode, bound, residual, modulo) = if params.is_critical() {
        let q = params.exponent();
        let pr = parts(u, q, params, kernel)?;
        let c = decay_constant(params.dim, params.alpha, params.mu).ok();
        let modulo = critical_residual_modulo_dilation(&g, &pr, u, q)?;
        (Mode::Critical, c, critical_residual(&g, &pr, u, q)?, Some(modulo))
    } else {
        let p = params.exponent();
        let pr = parts(u, p, params, kernel)?;
        (Mode::Subcritical, None, subcritical_residual(&g, &pr, u, p)?, None)
    };
    let mut warnings = Vec::new();
    let window = (g.r_max() / 10.0, g.r_max());
    let decay = match fit_decay(u, window, bound) {
        Ok(d) => d,
        Err(Error::EmptyWindow) => {
            warnings.push("tail window holds no positive values; slope reported as NaN".into());
            DecayFit {
                slope: f64::NAN,
                window: [window.0, window.1],
                bound_constant: bound,
                worst_bound_ratio: None,
                bound_ok: None,
                within_discretization_slack: None,
            }
        }
        Err(e) => return Err(e),
    };
    Ok(Diagnostics { mode, final_report, decay, residual, residual_modulo_dilation: modulo, warnings })
}

fn finish(
    u: RadialFunction,
    params: &ProblemParams,
    kernel: &KernelMatrix,
    state: LoopState,
    method: Method,
) -> Result<(RadialFunction, SolveReport)> {
    let d = diagnose(&u, params, kernel)?;
    let mut warnings = state.warnings;
    warnings.extend(d.warnings);
    let report = SolveReport {
        converged: state.converged,
        iterations: state.iterations,
        energy_history: state.history,
        final_report: d.final_report,
        decay: d.decay,
        method,
        mode: d.mode,
        residual: d.residual,
        residual_modulo_dilation: d.residual_modulo_dilation,
        warnings,
    };
    Ok((u, report))
}

#[derive(Debug, Default)]
struct LoopState {
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
    warnings: Vec<String>,
}

/// Nehari-projected `H¹` gradient flow for `I`.
pub fn solve_subcritical(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    kernel: &KernelMatrix,
    config: &SolverConfig,
    init: &Init,
) -> Result<(RadialFunction, SolveReport)> {
    config.validate()?;
    let p = require_existence(params)?;
    check_kernel_for(params, grid, kernel)?;
    let u0 = initial_profile(init, grid, config.seed)?;
    if u0.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pr0 = parts(&u0, p, params, kernel)?;
    let (mut u, mut pr) = project_nehari(&u0, pr0, p)?;
    let h1 = h1_operator(grid);
    let omega_free_grad = |u: &RadialFunction, pr: &Parts| weak_form(grid, pr, u.values(), p, true);

    let mut state = LoopState::default();
    state.history.push(nehari_energy(&pr, p));
    let mut step = config.step;
    for iter in 0..config.max_iter {
        let residual = subcritical_residual(grid, &pr, &u, p)?;
        if residual < config.tol {
            state.converged = true;
            break;
        }
        let direction = h1.solve(&omega_free_grad(&u, &pr))?;
        let current = nehari_energy(&pr, p);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.values().iter().zip(&direction).map(|(a, d)| (a - step * d).abs()).collect();
            let trial = u.with_values(trial);
            if !trial.is_zero() {
                let tp = parts(&trial, p, params, kernel)?;
                if tp.nonlocal_d > 0.0 {
                    let (v, vp) = project_nehari(&trial, tp, p)?;
                    let e = nehari_energy(&vp, p);
                    let tied = e <= current + ROUNDOFF_BAND * current.abs()
                        && subcritical_residual(grid, &vp, &v, p)? < residual;
                    if e <= current + ACCEPT_SLACK * current.abs() || tied {
                        accepted = Some((v, vp, e));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        state.iterations = iter + 1;
        match accepted {
            Some((v, vp, e)) => {
                u = v;
                pr = vp;
                state.history.push(e);
                step = config.step;
            }
            None => {
                state.warnings.push(format!("line search stalled at iteration {}", iter + 1));
                break;
            }
        }
    }
    if !state.converged && subcritical_residual(grid, &pr, &u, p)? < config.tol {
        state.converged = true;
    }
    finish(u, params, kernel, state, Method::GradientFlow)
}

/// Index shift `k` that moves half of the nonlocal mass inside `r ≤ 1`,
/// taking the smallest admissible dilation.
fn levy_shift(grid: &RadialGrid, density: &[f64]) -> (isize, bool) {
    let total: f64 = density.iter().sum();
    let n = density.len();
    let mut acc = 0.0;
    let mut half = n - 1;
    for (i, d) in density.iter().enumerate() {
        acc += d;
        if acc >= 0.5 * total {
            half = i;
            break;
        }
    }
    let unit = grid.nodes().iter().rposition(|&r| r <= 1.0).unwrap_or(0);
    let margin = (n / 20).max(3);
    let at_boundary = half < margin || half + margin >= n;
    (half as isize - unit as isize, at_boundary)
}

fn critical_density(grid: &RadialGrid, pr: &Parts, u: &RadialFunction, q: f64) -> Vec<f64> {
    grid.weights().iter().zip(&pr.potential).zip(u.values()).map(|((w, v), x)| w * v * x.abs().powf(q)).collect()
}

/// Applies the half-mass renormalization; returns the new state when the
/// shift is nonzero.
fn levy_renormalize(
    u: &RadialFunction,
    pr: &Parts,
    q: f64,
    params: &ProblemParams,
    kernel: &KernelMatrix,
    warnings: &mut Vec<String>,
    iteration: usize,
) -> Result<Option<(RadialFunction, Parts)>> {
    let g = u.grid();
    let (k, at_boundary) = levy_shift(g, &critical_density(g, pr, u, q));
    if at_boundary {
        warnings
            .push(format!("concentration warning: half-mass radius near the grid boundary at iteration {iteration}"));
    }
    if k == 0 {
        return Ok(None);
    }
    let v = u.dilate(k);
    let vp = parts(&v, q, params, kernel)?;
    Ok(Some(normalize_d(&v, vp, q)?))
}

/// Descent of `Q` on `D = 1` in the `D^{1,2}` metric, with periodic
/// half-mass renormalization. The returned profile has `D = 1`.
pub fn solve_critical(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    kernel: &KernelMatrix,
    config: &SolverConfig,
    init: &Init,
) -> Result<(RadialFunction, SolveReport)> {
    config.validate()?;
    let q = require_critical(params)?;
    check_kernel_for(params, grid, kernel)?;
    let u0 = initial_profile(init, grid, config.seed)?;
    if u0.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pr0 = parts(&u0, q, params, kernel)?;
    let (mut u, mut pr) = normalize_d(&u0, pr0, q)?;
    let stiff = grid.stiffness();

    let mut state = LoopState::default();
    state.history.push(pr.kinetic);
    let mut step = config.step;
    for iter in 0..config.max_iter {
        if iter > 0 && iter % config.rescale_every == 0 {
            if let Some((v, vp)) = levy_renormalize(&u, &pr, q, params, kernel, &mut state.warnings, iter)? {
                u = v;
                pr = vp;
            }
        }
        if critical_residual_modulo_dilation(grid, &pr, &u, q)? < config.tol {
            state.converged = true;
            break;
        }
        let residual = critical_residual(grid, &pr, &u, q)?;
        // half the D^{1,2} gradient of Q at D = 1: u − K A⁻¹(W V u^{q−1})
        let source: Vec<f64> = grid
            .weights()
            .iter()
            .zip(&pr.potential)
            .zip(u.values())
            .map(|((w, v), x)| w * v * x.abs().powf(q - 1.0))
            .collect();
        let pulled = stiff.solve(&source)?;
        let direction: Vec<f64> = u.values().iter().zip(&pulled).map(|(x, y)| x - pr.kinetic * y).collect();
        let current = pr.kinetic;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.values().iter().zip(&direction).map(|(a, d)| (a - step * d).abs()).collect();
            let trial = u.with_values(trial);
            if !trial.is_zero() {
                let tp = parts(&trial, q, params, kernel)?;
                if tp.nonlocal_d > 0.0 {
                    let (v, vp) = normalize_d(&trial, tp, q)?;
                    let tied = vp.kinetic <= current + ROUNDOFF_BAND * current
                        && critical_residual(grid, &vp, &v, q)? < residual;
                    if vp.kinetic <= current + ACCEPT_SLACK * current || tied {
                        accepted = Some((v, vp));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        state.iterations = iter + 1;
        match accepted {
            Some((v, vp)) => {
                state.history.push(vp.kinetic);
                u = v;
                pr = vp;
                step = config.step;
            }
            None => {
                state.warnings.push(format!("line search stalled at iteration {}", iter + 1));
                break;
            }
        }
    }
    if !state.converged && critical_residual_modulo_dilation(grid, &pr, &u, q)? < config.tol {
        state.converged = true;
    }
    finish(u, params, kernel, state, Method::GradientFlow)
}

/// Normalized fixed-point iteration of the integral form:
/// `u ← (I−Δ)⁻¹(V u^{p−1})` (subcritical, unit `H¹` norm per sweep) or
/// `u ← (−Δ)⁻¹(V u^{2*−1})` (critical, `D = 1` per sweep).
pub fn solve_fixed_point(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    kernel: &KernelMatrix,
    config: &SolverConfig,
    init: &Init,
) -> Result<(RadialFunction, SolveReport)> {
    config.validate()?;
    let critical = params.is_critical();
    let p = if critical { require_critical(params)? } else { require_existence(params)? };
    check_kernel_for(params, grid, kernel)?;
    let u0 = initial_profile(init, grid, config.seed)?;
    if u0.is_zero() {
        return Err(Error::ZeroFunction);
    }

    let normalize = |u: RadialFunction| -> Result<(f64, RadialFunction, Parts)> {
        let pr = parts(&u, p, params, kernel)?;
        if critical {
            if !(pr.nonlocal_d > 0.0) {
                return Err(Error::ZeroNonlocal);
            }
            let c = pr.nonlocal_d.powf(1.0 / (2.0 * p));
            Ok((c, u.scaled(1.0 / c), pr.scaled(1.0 / c, p)))
        } else {
            let c = (pr.kinetic + pr.mass).sqrt();
            if !(c > 0.0) {
                return Err(Error::ZeroFunction);
            }
            Ok((c, u.scaled(1.0 / c), pr.scaled(1.0 / c, p)))
        }
    };
    let record = |pr: &Parts| {
        if critical {
            pr.kinetic
        } else {
            let t = ((pr.kinetic + pr.mass) / pr.nonlocal_d).powf(1.0 / (2.0 * p - 2.0));
            nehari_energy(&pr.scaled(t, p), p)
        }
    };

    let (_, mut u, mut pr) = normalize(u0)?;
    let mut state = LoopState::default();
    state.history.push(record(&pr));
    let mut factors: Vec<f64> = Vec::new();
    for iter in 0..config.max_iter {
        let mut renormalized = false;
        if critical && iter > 0 && iter % config.rescale_every == 0 {
            if let Some((v, vp)) = levy_renormalize(&u, &pr, p, params, kernel, &mut state.warnings, iter)? {
                u = v;
                pr = vp;
                renormalized = true;
            }
        }
        let source: Vec<f64> = pr.potential.iter().zip(u.values()).map(|(v, x)| v * x.abs().powf(p - 1.0)).collect();
        let source = u.with_values(source);
        let image = if critical { riesz_green_apply(&source, false)? } else { helmholtz_solve(&source)? };
        let image = image.map(f64::abs);
        let (c, v, vp) = normalize(image)?;
        factors.push(c);
        let change = if critical {
            change_modulo_dilation(&u, &v)
        } else {
            let diff = v.with_values(v.values().iter().zip(u.values()).map(|(a, b)| a - b).collect());
            h1_norm_sq(&diff).sqrt()
        };
        u = v;
        pr = vp;
        state.history.push(record(&pr));
        state.iterations = iter + 1;
        if !renormalized && change < config.tol {
            state.converged = true;
            break;
        }
    }
    if !state.converged && factors.len() >= 10 {
        let tail = &factors[factors.len() - 10..];
        let rising = tail.windows(2).all(|w| w[1] > w[0]);
        let falling = tail.windows(2).all(|w| w[1] < w[0]);
        if rising || falling {
            state
                .warnings
                .push(format!("renormalization factor drifting monotonically (last {:e})", tail[tail.len() - 1]));
        }
    }
    // T(v) = c v with T homogeneous of degree 2p−1; λv is a true solution
    // for λ^{2p−2} = 1/c. Critical profiles stay at D = 1.
    if !critical {
        if let Some(&c) = factors.last() {
            u = u.scaled(c.powf(-1.0 / (2.0 * p - 2.0)));
        }
    }
    finish(u, params, kernel, state, Method::FixedPoint)
}

/// Dispatches on method and on the mode encoded in `params`.
pub fn solve(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    kernel: &KernelMatrix,
    config: &SolverConfig,
    init: &Init,
    method: Method,
) -> Result<(RadialFunction, SolveReport)> {
    match (method, params.is_critical()) {
        (Method::FixedPoint, _) => solve_fixed_point(params, grid, kernel, config, init),
        (Method::GradientFlow, true) => solve_critical(params, grid, kernel, config, init),
        (Method::GradientFlow, false) => solve_subcritical(params, grid, kernel, config, init),
    }
}

/// `min_λ sqrt(mean((u − λv)²)) / max|u|` over all nodes.
pub fn relative_rms_after_scaling(u: &RadialFunction, v: &RadialFunction) -> Result<f64> {
    v.check_same_grid(u.grid())?;
    let vv = dot(v.values(), v.values());
    let lambda = if vv > 0.0 { dot(u.values(), v.values()) / vv } else { 0.0 };
    Ok(rms_ratio(u.values(), v.values(), lambda))
}

fn rms_ratio(u: &[f64], v: &[f64], lambda: f64) -> f64 {
    let n = u.len() as f64;
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum();
    let peak = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    (sq / n).sqrt() / peak
}

/// Best match of `u` within the bubble family `λ U_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub scale: f64,
    pub amplitude: f64,
    /// `sqrt(mean((u − λU_t)²)) / max|λU_t|` over the grid nodes.
    pub rms: f64,
}

/// Fits amplitude by least squares and `log t` by a scan plus golden-section
/// refinement.
pub fn bubble_fit(u: &RadialFunction) -> BubbleFit {
    let g = u.grid();
    let dim = g.dim();
    let eval = |log_t: f64| -> (f64, f64) {
        let t = log_t.exp();
        let b: Vec<f64> = g.nodes().iter().map(|&r| talenti_bubble(dim, t, r)).collect();
        let bb = dot(&b, &b);
        let lambda = dot(u.values(), &b) / bb;
        let peak = b.iter().fold(0.0f64, |m, x| m.max(x.abs())) * lambda.abs();
        let n = b.len() as f64;
        let sq: f64 = u.values().iter().zip(&b).map(|(a, x)| (a - lambda * x).powi(2)).sum();
        ((sq / n).sqrt() / peak.max(f64::MIN_POSITIVE), lambda)
    };
    let (lo, hi) = (g.r_min().ln(), g.r_max().ln());
    let samples = 200;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=samples {
        let x = lo + (hi - lo) * k as f64 / samples as f64;
        let (e, _) = eval(x);
        if e < best.0 {
            best = (e, x);
        }
    }
    let width = (hi - lo) / samples as f64;
    let (mut a, mut b) = (best.1 - width, best.1 + width);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (eval(c).0, eval(d).0);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d).0;
        }
    }
    let x = 0.5 * (a + b);
    let (rms, amplitude) = eval(x);
    BubbleFit { scale: x.exp(), amplitude, rms }
}
