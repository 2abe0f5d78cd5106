//! Radial reductions of the nonlocal kernels.
//!
//! For `|x| = r`, `|y| = s` the spherical integral of `|x−y|^{−μ}` is
//! `k(r,s) = (rs)^{−μ/2} φ(|log(s/r)|)` with
//! `φ(d) = ω_{N−2} ∫_0^π sin^{N−2}θ (4sinh²(d/2) + 4sin²(θ/2))^{−μ/2} dθ`.
//! On a log-uniform grid the matrix is therefore a diagonal scaling of a
//! symmetric Toeplitz matrix, and only `n` values of `φ` are needed.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::{sphere_area, RadialFunction, RadialGrid};
use crate::quadrature::GaussLegendre;

const ANGULAR_TOL: f64 = 1e-10;
const BESSEL_TOL: f64 = 1e-12;
const BESSEL_MAX_HALVINGS: usize = 24;
/// Panels of the cell average that halve toward the singular point.
const CELL_PANELS: usize = 48;

fn check_kernel_params(dim: usize, mu: f64) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(mu > 0.0 && mu < dim as f64) {
        return Err(Error::Domain(format!("kernel exponent μ = {mu} outside (0, {dim})")));
    }
    Ok(())
}

/// `φ(d)` for `d > 0`, by Gauss–Legendre on panels that grow geometrically
/// away from the near-singular point `θ = 0`.
fn angular_profile(dim: usize, mu: f64, d: f64) -> Result<f64> {
    let delta = 2.0 * (0.5 * d).sinh();
    let delta2 = delta * delta;
    let nf = dim as f64;
    let omega = sphere_area(dim - 1)?;
    let integrand = |theta: f64| {
        let h = (0.5 * theta).sin();
        theta.sin().powf(nf - 2.0) * (delta2 + 4.0 * h * h).powf(-0.5 * mu)
    };
    let mut edges = vec![0.0];
    let mut e = delta.min(PI);
    while e < PI {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(PI);
    let sum_with =
        |rule: &GaussLegendre| -> f64 { edges.windows(2).map(|w| rule.integrate(w[0], w[1], integrand)).sum() };
    let mut prev = sum_with(GaussLegendre::cached(16));
    for n in [32, 64] {
        let next = sum_with(GaussLegendre::cached(n));
        if (next - prev).abs() <= ANGULAR_TOL * next.abs() {
            return Ok(omega * next);
        }
        prev = next;
    }
    Err(Error::Nonconvergence(format!("angular kernel at d = {d}")))
}

/// `φ(0)`, finite only for `μ < N−1`.
fn angular_profile_at_zero(dim: usize, mu: f64) -> Result<f64> {
    let nf = dim as f64;
    if mu >= nf - 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sphere_area(dim - 1)? * 2f64.powf(nf - 2.0 - mu) * beta((nf - 1.0 - mu) / 2.0, (nf - 1.0) / 2.0))
}

/// Spherical integral of `|x−y|^{−μ}` over `|x| = r`, for fixed `|y| = s`:
/// `ω_{N−2} ∫_0^π sin^{N−2}θ (r²+s²−2rs cosθ)^{−μ/2} dθ`.
///
/// At `r = s` the value is infinite when `μ ≥ N−1`.
pub fn angular_kernel(dim: usize, mu: f64, r: f64, s: f64) -> Result<f64> {
    check_kernel_params(dim, mu)?;
    if !(r > 0.0 && s > 0.0 && r.is_finite() && s.is_finite()) {
        return Err(Error::Domain(format!("radii must be positive, got r = {r}, s = {s}")));
    }
    let d = (s / r).ln().abs();
    let phi = if d == 0.0 { angular_profile_at_zero(dim, mu)? } else { angular_profile(dim, mu, d)? };
    Ok((r * s).powf(-0.5 * mu) * phi)
}

/// Log-cell average of the kernel around the diagonal, scaled to `r = 1`:
/// `(1/h) ∫_{−h/2}^{h/2} e^{(N−μ/2)t} φ(|t|) dt`.
fn diagonal_cell_average(dim: usize, mu: f64, h: f64) -> Result<f64> {
    let c = dim as f64 - 0.5 * mu;
    let rule = GaussLegendre::cached(16);
    let mut total = 0.0;
    let mut hi = 0.5 * h;
    for _ in 0..CELL_PANELS {
        let lo = 0.5 * hi;
        let nodes: Vec<f64> = rule.nodes.iter().map(|x| lo + 0.5 * (hi - lo) * (1.0 + x)).collect();
        let values = nodes
            .iter()
            .map(|&t| angular_profile(dim, mu, t).map(|phi| 2.0 * (c * t).cosh() * phi))
            .collect::<Result<Vec<f64>>>()?;
        total += 0.5 * (hi - lo) * rule.weights.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>();
        hi = lo;
    }
    // remaining [0, hi]: φ ≈ C t^γ with the local exponent read off two samples
    let phi_hi = angular_profile(dim, mu, hi)?;
    let phi_half = angular_profile(dim, mu, 0.5 * hi)?;
    let gamma_loc = (phi_hi / phi_half).log2();
    total += 2.0 * hi * phi_hi / (gamma_loc + 1.0);
    Ok(total / h)
}

/// Radial kernel matrix on a log-uniform grid, stored as
/// `k[i][j] = a_i a_j φ_{|i−j|}` with `a_i = r_i^{−μ/2}`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    dim: usize,
    mu: f64,
    grid: Arc<RadialGrid>,
    scale: Vec<f64>,
    profile: Vec<f64>,
}

/// Assembles the kernel on `grid`; diagonal entries are log-cell averages.
pub fn assemble_kernel(dim: usize, mu: f64, grid: &Arc<RadialGrid>) -> Result<KernelMatrix> {
    check_kernel_params(dim, mu)?;
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!("grid is for N = {}, kernel for N = {dim}", grid.dim())));
    }
    let h = grid.log_step();
    let n = grid.len();
    let mut profile =
        (1..n).into_par_iter().map(|k| angular_profile(dim, mu, k as f64 * h)).collect::<Result<Vec<f64>>>()?;
    profile.insert(0, diagonal_cell_average(dim, mu, h)?);

    let omega = grid.sphere_area();
    for (k, &phi) in profile.iter().enumerate().skip(1) {
        let d = k as f64 * h;
        let lower = omega * (2.0 * (0.5 * d).cosh()).powf(-mu);
        let upper = omega * (2.0 * (0.5 * d).sinh()).powf(-mu);
        if !(phi >= lower * (1.0 - 1e-12) && phi <= upper * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("kernel bound violated at offset {k}")));
        }
    }
    let scale = grid.nodes().iter().map(|r| r.powf(-0.5 * mu)).collect();
    Ok(KernelMatrix { dim, mu, grid: Arc::clone(grid), scale, profile })
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (self.scale[i] * self.scale[j]) * self.profile[i.abs_diff(j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.entry(i, j)).collect()
    }

    /// `y_i = Σ_j k[i][j] x_j`, rows in parallel, each summed in order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len(), "kernel applied to vector of wrong length");
        let sx: Vec<f64> = self.scale.iter().zip(x).map(|(a, v)| a * v).collect();
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let acc: f64 = sx.iter().enumerate().map(|(j, v)| self.profile[i.abs_diff(j)] * v).sum();
                self.scale[i] * acc
            })
            .collect()
    }

    /// Debug dump with header `i,j,r_i,s_j,k`.
    pub fn to_csv(&self) -> String {
        let r = self.grid.nodes();
        let mut out = String::from("i,j,r_i,s_j,k\n");
        for i in 0..self.len() {
            for j in 0..self.len() {
                let _ = writeln!(out, "{i},{j},{:?},{:?},{:?}", r[i], r[j], self.entry(i, j));
            }
        }
        out
    }

    fn check_compatible(&self, u: &RadialFunction, params: &ProblemParams) -> Result<()> {
        u.check_same_grid(&self.grid)?;
        if params.dim != self.dim || params.mu != self.mu {
            return Err(Error::GridMismatch(format!(
                "kernel assembled for (N, μ) = ({}, {}), problem has ({}, {})",
                self.dim, self.mu, params.dim, params.mu
            )));
        }
        Ok(())
    }
}

/// `w(r) = ∫_0^∞ k(r,s) |u(s)|^p s^{N−1−α} ds`, the radial form of
/// `∫ |u(y)|^p |y|^{−α} |x−y|^{−μ} dy`.
pub fn weighted_potential(
    u: &RadialFunction,
    p: f64,
    params: &ProblemParams,
    kernel: &KernelMatrix,
) -> Result<RadialFunction> {
    kernel.check_compatible(u, params)?;
    let g = u.grid();
    let density: Vec<f64> = u
        .values()
        .iter()
        .zip(g.nodes())
        .zip(g.weights())
        .map(|((v, r), w)| v.abs().powf(p) * r.powf(-params.alpha) * w)
        .collect();
    Ok(u.with_values(kernel.apply(&density)))
}

/// `∫∫ f(|x|) g(|y|) |x|^{−α} |x−y|^{−μ} |y|^{−β} dx dy` for radial `f`, `g`.
pub fn radial_double_integral(
    f: &RadialFunction,
    g: &RadialFunction,
    alpha: f64,
    beta_w: f64,
    kernel: &KernelMatrix,
) -> Result<f64> {
    let grid = f.grid();
    g.check_same_grid(grid)?;
    if !kernel.grid().same_as(grid) {
        return Err(Error::GridMismatch("kernel was assembled on a different grid".into()));
    }
    let weighted = |u: &RadialFunction, w: f64| -> Vec<f64> {
        u.values().iter().zip(grid.nodes()).zip(grid.weights()).map(|((v, r), q)| v * r.powf(-w) * q).collect()
    };
    let inner = kernel.apply(&weighted(g, beta_w));
    let outer = weighted(f, alpha);
    Ok(grid.sphere_area() * outer.iter().zip(&inner).map(|(a, b)| a * b).sum::<f64>())
}

/// Cumulative trapezoid of `g` in the log variable, starting at `start`.
fn cumulative_log_trapezoid(g: &[f64], h: f64, start: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    let mut acc = start;
    out.push(acc);
    for w in g.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Inverse of `−Δ` on radial functions:
/// `u(x) = c_N ∫ f(y) |x−y|^{2−N} dy`, `c_N = 1/((N−2)ω_{N−1})`.
///
/// With `bare` the constant `c_N` is dropped. The part of `f` beyond `r_max`
/// is extrapolated as a power law; fails when `f r²` does not decay there.
pub fn riesz_green_apply(f: &RadialFunction, bare: bool) -> Result<RadialFunction> {
    let g = f.grid();
    let dim = g.dim();
    if dim < 3 {
        return Err(Error::InvalidDimension(dim));
    }
    let nf = dim as f64;
    let r = g.nodes();
    let v = f.values();
    let n = r.len();
    let h = g.log_step();

    // ∫_0^{r_i} f s^{N−1} ds and ∫_{r_i}^{r_max} f s ds, both in t = log s
    let inner: Vec<f64> = v.iter().zip(r).map(|(f, r)| f * r.powf(nf)).collect();
    let outer: Vec<f64> = v.iter().zip(r).map(|(f, r)| f * r * r).collect();
    let below = cumulative_log_trapezoid(&inner, h, v[0] * r[0].powf(nf) / nf);
    let mut above = cumulative_log_trapezoid(&outer, h, 0.0);
    let total_above = above[n - 1] + tail_beyond(&outer, h)?;
    for a in above.iter_mut() {
        *a = total_above - *a;
    }

    let c = if bare { g.sphere_area() } else { 1.0 / (nf - 2.0) };
    let values = (0..n).map(|i| c * (r[i].powf(2.0 - nf) * below[i] + above[i])).collect();
    Ok(f.with_values(values))
}

/// Power-law estimate of `∫_{r_max}^∞ f s ds` from the last nodes of
/// `f r²`; fails when `f r²` does not decay there.
fn tail_beyond(outer: &[f64], h: f64) -> Result<f64> {
    let n = outer.len();
    let last = outer[n - 1];
    let scale: f64 = outer.iter().map(|x| x.abs()).sum::<f64>() * h;
    if last == 0.0 || last.abs() <= 1e-14 * scale {
        return Ok(0.0);
    }
    let back = 8.min(n - 1);
    let prev = outer[n - 1 - back];
    if prev == 0.0 || prev.signum() != last.signum() || last.abs() >= prev.abs() {
        return Err(Error::DivergentIntegral(format!(
            "source does not decay faster than r^-2 near r_max (|f r²| = {:e})",
            last.abs()
        )));
    }
    let rate = (prev / last).ln() / (back as f64 * h);
    Ok(last / rate)
}

/// Outgoing-wave flux coefficient for `(I−Δ)`: `u ~ r^{−(N−1)/2} e^{−r}`.
fn helmholtz_robin(grid: &RadialGrid) -> f64 {
    let nf = grid.dim() as f64;
    let rm = grid.r_max();
    (1.0 + (nf - 1.0) / (2.0 * rm)) * rm.powf(nf - 1.0)
}

/// Solves `(I−Δ)u = f`: piecewise-linear stiffness, lumped mass and an
/// exponential-decay Robin condition at `r_max`.
pub fn helmholtz_solve(f: &RadialFunction) -> Result<RadialFunction> {
    let g = f.grid();
    let mut m = g.stiffness_with_exterior(helmholtz_robin(g));
    for (d, w) in m.diag.iter_mut().zip(g.weights()) {
        *d += w;
    }
    let rhs: Vec<f64> = f.values().iter().zip(g.weights()).map(|(v, w)| v * w).collect();
    Ok(f.with_values(m.solve(&rhs)?))
}

/// Bessel kernel `g_τ`, the inverse Fourier symbol `(1 + 4π²|ξ|²)^{−τ/2}`
/// written with angular frequency, so that `g_2 = (I−Δ)^{−1}` kernel:
/// `g_τ(r) = (4π)^{−N/2} Γ(τ/2)^{−1} ∫_0^∞ e^{−r²/(4s) − s} s^{(τ−N)/2−1} ds`.
pub fn bessel_kernel(dim: usize, tau: f64, r: f64) -> Result<f64> {
    if dim < 1 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("Bessel order τ = {tau} must be positive")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius r = {r} must be positive")));
    }
    let a = 0.5 * (tau - dim as f64);
    let q = 0.25 * r * r;
    // integrand in x = log s is exp(ψ(x)), ψ concave
    let psi = |x: f64| -q * (-x).exp() - x.exp() + a * x;
    let peak = (0.5 * (a + (a * a + r * r).sqrt())).ln();
    let top = psi(peak);
    let drop = 60.0;
    let find_edge = |dir: f64| {
        let mut step = 1.0;
        let mut x = peak + dir * step;
        while top - psi(x) < drop {
            step *= 2.0;
            x = peak + dir * step;
        }
        x
    };
    let lo = find_edge(-1.0);
    let hi = find_edge(1.0);

    let trapezoid = |m: usize| {
        let dx = (hi - lo) / m as f64;
        let interior: f64 = (1..m).map(|k| (psi(lo + k as f64 * dx) - top).exp()).sum();
        dx * (interior + 0.5 * ((psi(lo) - top).exp() + (psi(hi) - top).exp()))
    };
    let mut m = 64;
    let mut prev = trapezoid(m);
    for _ in 0..BESSEL_MAX_HALVINGS {
        m *= 2;
        let next = trapezoid(m);
        if (next - prev).abs() <= BESSEL_TOL * next.abs() {
            let pref = (4.0 * PI).powf(-0.5 * dim as f64) / gamma(0.5 * tau);
            return Ok(pref * top.exp() * next);
        }
        prev = next;
    }
    Err(Error::Nonconvergence(format!("Bessel kernel quadrature at r = {r}")))
}
