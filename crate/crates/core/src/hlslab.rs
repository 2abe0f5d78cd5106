//! Full-space Monte Carlo for weighted double integrals, Stein–Weiss ratio
//! spot checks, Talenti bubbles and a Brezis–Lieb splitting experiment.
//!
//! Samples are drawn in fixed-size chunks, each from its own ChaCha stream,
//! and reduced in chunk order, so estimates do not depend on thread count.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::exponents::{hls_exponent_check, ProblemParams};
use crate::grid::{sphere_area, RadialFunction, RadialGrid};
use crate::kernel::{assemble_kernel, radial_double_integral};

const CHUNK: usize = 16_384;
/// Stream offset separating norm estimates from double-integral samples.
const NORM_STREAM: u64 = 1 << 40;
/// Tail parameter of the beta-prime radial proposal: density ~ R^{−N−2b}.
const TAIL_B: f64 = 1.0;

/// `[N(N−2)]^{(N−2)/4} (t/(t²+r²))^{(N−2)/2}`.
pub fn talenti_bubble(dim: usize, t: f64, r: f64) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf(0.25 * (n - 2.0)) * (t / (t * t + r * r)).powf(0.5 * (n - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Isotropic proposal with radius `σ√Z`, `Z ~ BetaPrime(a, b)`; the density
/// behaves like `|x|^{2a−N}` at the origin and `|x|^{−N−2b}` at infinity.
#[derive(Debug, Clone, Copy)]
struct RadialProposal {
    dim: usize,
    a: f64,
    b: f64,
    scale: f64,
    log_norm: f64,
    ga: Gamma<f64>,
    gb: Gamma<f64>,
}

impl RadialProposal {
    /// Matched to a `|x|^{−κ}` singularity at the origin.
    fn new(dim: usize, kappa: f64, scale: f64) -> Result<Self> {
        let a = 0.5 * (dim as f64 - kappa);
        let b = TAIL_B;
        let bad = |e| Error::Domain(format!("proposal shape: {e}"));
        Ok(RadialProposal {
            dim,
            a,
            b,
            scale,
            log_norm: beta(a, b).ln() + sphere_area(dim)?.ln(),
            ga: Gamma::new(a, 1.0).map_err(bad)?,
            gb: Gamma::new(b, 1.0).map_err(bad)?,
        })
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let z = self.ga.sample(rng) / self.gb.sample(rng);
        let r = self.scale * z.sqrt();
        random_direction(rng, out);
        out.iter_mut().for_each(|x| *x *= r);
    }

    /// Density on `ℝ^N` at radius `r`.
    fn density(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        let z = (r / self.scale).powi(2);
        // f_R(r) = (2r/σ²) z^{a−1} (1+z)^{−a−b} / B(a,b), spread over ω r^{N−1}
        let log_fr =
            (2.0 * r / (self.scale * self.scale)).ln() + (self.a - 1.0) * z.ln() - (self.a + self.b) * z.ln_1p();
        (log_fr - self.log_norm - (n - 1.0) * r.ln()).exp()
    }
}

fn random_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
            s += *x * *x;
        }
        if s > 0.0 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// Uniform in `(0, 1]`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Density `∝ |z|^{−μ}` on the ball of radius `ell`.
#[derive(Debug, Clone, Copy)]
struct SingularBall {
    dim: usize,
    mu: f64,
    ell: f64,
    norm: f64,
}

impl SingularBall {
    fn new(dim: usize, mu: f64, ell: f64) -> Result<Self> {
        let n = dim as f64;
        Ok(SingularBall { dim, mu, ell, norm: (n - mu) / (sphere_area(dim)? * ell.powf(n - mu)) })
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let r = self.ell * open_unit(rng).powf(1.0 / (self.dim as f64 - self.mu));
        random_direction(rng, out);
        out.iter_mut().for_each(|x| *x *= r);
    }

    fn density(&self, r: f64) -> f64 {
        if r < self.ell {
            self.norm * r.powf(-self.mu)
        } else {
            0.0
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Runs `draw` over deterministic chunks and returns the mean estimate.
fn chunked_estimate<F>(samples: usize, seed: u64, stream_base: u64, draw: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let v = draw(&mut rng);
                if !v.is_finite() {
                    return Err(Error::NonfiniteSample);
                }
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = samples as f64;
    let mean = s / n;
    let var = if samples > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { value: mean, stderr: (var / n).sqrt(), samples, seed })
}

/// Importance-sampled `∫∫ f(x) g(y) / (|x|^α |x−y|^μ |y|^β) dx dy` over
/// `ℝ^N × ℝ^N`.
///
/// `x` follows a heavy-tailed radial law with an `|x|^{−α}` core; `y` is
/// drawn from an even mixture of the matching `|y|^{−β}` law and an
/// `|y−x|^{−μ}` law on the unit ball around `x`.
#[allow(clippy::too_many_arguments)]
pub fn mc_double_integral<F, G>(
    f: F,
    g: G,
    alpha: f64,
    beta_w: f64,
    mu: f64,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    check_weights(dim, alpha, beta_w, mu)?;
    let px = RadialProposal::new(dim, alpha, 1.0)?;
    let py = RadialProposal::new(dim, beta_w, 1.0)?;
    let near = SingularBall::new(dim, mu, 1.0)?;
    chunked_estimate(samples, seed, 0, |rng| {
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        px.sample_into(rng, &mut x);
        if rng.random::<bool>() {
            py.sample_into(rng, &mut y);
        } else {
            near.sample_into(rng, &mut y);
            y.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
        }
        let fx = f(&x);
        if fx == 0.0 {
            return 0.0;
        }
        let gy = g(&y);
        if gy == 0.0 {
            return 0.0;
        }
        let (rx, ry, rxy) = (norm2(&x), norm2(&y), dist(&x, &y));
        let q = px.density(rx) * (0.5 * py.density(ry) + 0.5 * near.density(rxy));
        fx * gy * rx.powf(-alpha) * ry.powf(-beta_w) * rxy.powf(-mu) / q
    })
}

fn check_weights(dim: usize, alpha: f64, beta_w: f64, mu: f64) -> Result<()> {
    let n = dim as f64;
    if dim < 1 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(alpha >= 0.0 && alpha < n && beta_w >= 0.0 && beta_w < n && mu > 0.0 && mu < n) {
        return Err(Error::Domain(format!(
            "weights need 0 ≤ α, β < N and 0 < μ < N, got α = {alpha}, β = {beta_w}, μ = {mu}"
        )));
    }
    Ok(())
}

/// `(∫ |f|^r)^{1/r}` by importance sampling.
fn mc_lebesgue_norm<F>(f: &F, r: f64, dim: usize, samples: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let px = RadialProposal::new(dim, 0.0, 1.0)?;
    let est = chunked_estimate(samples, seed, NORM_STREAM, |rng| {
        let mut x = vec![0.0; dim];
        px.sample_into(rng, &mut x);
        let v = f(&x).abs();
        if v == 0.0 {
            0.0
        } else {
            v.powf(r) / px.density(norm2(&x))
        }
    })?;
    let norm = est.value.powf(1.0 / r);
    // delta method for the 1/r power
    let stderr = if est.value > 0.0 { norm * est.stderr / (r * est.value) } else { 0.0 };
    Ok(McEstimate { value: norm, stderr, ..est })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlsRatio {
    pub ratio: f64,
    pub double_integral: McEstimate,
    pub f_norm: McEstimate,
    pub g_norm: McEstimate,
}

/// `∫∫ f g |x|^{−α}|x−y|^{−μ}|y|^{−β} / (|f|_r |g|_s)`, all by Monte Carlo
/// with one seed.
#[allow(clippy::too_many_arguments)]
pub fn hls_ratio<F, G>(
    f: F,
    g: G,
    r: f64,
    s: f64,
    alpha: f64,
    beta_w: f64,
    mu: f64,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<HlsRatio>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    if !hls_exponent_check(r, s, alpha, beta_w, mu, dim) {
        return Err(Error::ExponentRelation);
    }
    let double_integral = mc_double_integral(&f, &g, alpha, beta_w, mu, dim, samples, seed)?;
    let f_norm = mc_lebesgue_norm(&f, r, dim, samples, seed)?;
    let g_norm = mc_lebesgue_norm(&g, s, dim, samples, seed)?;
    let den = f_norm.value * g_norm.value;
    let ratio = if den > 0.0 { double_integral.value / den } else { 0.0 };
    Ok(HlsRatio { ratio, double_integral, f_norm, g_norm })
}

/// `amplitude·(1 − |x|²/radius²)₊²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn unit() -> Self {
        Bump { radius: 1.0, amplitude: 1.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let s = 1.0 - (r / self.radius).powi(2);
        if s > 0.0 {
            self.amplitude * s * s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEstimate {
    /// `|D(u + v_R) − D(v_R) − D(u)| / D(u)`.
    pub defect: f64,
    pub stderr: f64,
    pub shift: f64,
    /// Estimate of `D(u + v_R) − D(v_R) − D(u)`.
    pub difference: McEstimate,
    pub base: McEstimate,
}

/// Density `∝ |x − c|^{−κ}` on the ball of radius `rho` around `c`.
#[derive(Debug, Clone)]
struct CenteredBall {
    center: Vec<f64>,
    inner: SingularBall,
}

impl CenteredBall {
    fn new(center: Vec<f64>, kappa: f64, rho: f64) -> Result<Self> {
        let dim = center.len();
        Ok(CenteredBall { inner: SingularBall::new(dim, kappa, rho)?, center })
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.inner.sample_into(rng, out);
        out.iter_mut().zip(&self.center).for_each(|(a, b)| *a += b);
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.inner.density(dist(x, &self.center))
    }
}

/// Desk-scale Brezis–Lieb splitting at `p = 2*_{α,μ}` for `u` at the origin
/// and `v` translated by `shift·e₁`.
///
/// The difference is estimated with common random numbers from an even
/// mixture of densities adapted to the two supports.
pub fn brezis_lieb_split(
    u: Bump,
    v: Bump,
    shift: f64,
    params: &ProblemParams,
    samples: usize,
    seed: u64,
) -> Result<SplitEstimate> {
    params.check_base()?;
    if params.p.is_some() {
        return Err(Error::WrongMode("the splitting experiment runs at p = 2*_{α,μ}".into()));
    }
    let both = u.amplitude != 0.0 && v.amplitude != 0.0;
    if both && shift <= u.radius + v.radius {
        return Err(Error::Overlap(format!("radii {} and {} at distance {shift}", u.radius, v.radius)));
    }
    let dim = params.dim;
    let (alpha, mu) = (params.alpha, params.mu);
    let p = params.exponent();
    let power = |w: f64| w.abs().powf(p);

    let mut far = vec![0.0; dim];
    far[0] = shift;
    let near_ball = CenteredBall::new(vec![0.0; dim], alpha, u.radius)?;
    let far_ball = CenteredBall::new(far.clone(), 0.0, v.radius)?;
    let mix_density = |x: &[f64]| 0.5 * near_ball.density(x) + 0.5 * far_ball.density(x);
    let draw = |rng: &mut ChaCha8Rng, out: &mut [f64]| {
        if rng.random::<bool>() {
            near_ball.sample_into(rng, out)
        } else {
            far_ball.sample_into(rng, out)
        }
    };
    let fu = |x: &[f64]| u.eval(norm2(x));
    let fv = |x: &[f64]| v.eval(dist(x, &far));

    let difference = chunked_estimate(samples, seed, 0, |rng| {
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        draw(rng, &mut x);
        draw(rng, &mut y);
        let (ux, vx, uy, vy) = (fu(&x), fv(&x), fu(&y), fv(&y));
        let whole = power(ux + vx) * power(uy + vy);
        let split = power(vx) * power(vy) + power(ux) * power(uy);
        let integrand = whole - split;
        if integrand == 0.0 {
            return 0.0;
        }
        let weight = norm2(&x).powf(-alpha) * norm2(&y).powf(-alpha) * dist(&x, &y).powf(-mu);
        integrand * weight / (mix_density(&x) * mix_density(&y))
    })?;
    let base =
        mc_double_integral(|x: &[f64]| power(fu(x)), |x: &[f64]| power(fu(x)), alpha, alpha, mu, dim, samples, seed)?;
    if !(base.value > 0.0) {
        return Err(Error::ZeroNonlocal);
    }
    let defect = difference.value.abs() / base.value;
    let rel = (difference.stderr / difference.value.abs().max(f64::MIN_POSITIVE)).powi(2)
        + (base.stderr / base.value).powi(2);
    let stderr = if difference.value == 0.0 { difference.stderr / base.value } else { defect * rel.sqrt() };
    Ok(SplitEstimate { defect, stderr, shift, difference, base })
}

/// One Gaussian pair evaluated by Monte Carlo and by the radial kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCase {
    #[serde(rename = "N")]
    pub dim: usize,
    pub alpha: f64,
    pub beta_w: f64,
    pub mu: f64,
    /// Widths in `e^{−a|x|²}` and `e^{−b|y|²}`.
    pub a: f64,
    pub b: f64,
    pub quadrature: f64,
    pub mc: McEstimate,
    /// `|mc − quadrature| / stderr`.
    pub z_score: f64,
    pub pass: bool,
}

/// The twenty `(N, α, β, μ, a, b)` cases of the consistency suite.
pub fn consistency_cases() -> Vec<(usize, f64, f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(20);
    let dims = [3usize, 4, 5];
    let weights = [(0.0, 0.0), (0.25, 0.0), (0.5, 0.5), (0.0, 1.0), (1.0, 0.25)];
    let mus = [0.5, 1.0, 1.5, 2.0];
    let widths = [(1.0, 1.0), (0.5, 2.0), (2.0, 1.0), (0.7, 0.7)];
    for k in 0..20 {
        let (alpha, beta_w) = weights[k % 5];
        let (a, b) = widths[(k / 5) % 4];
        out.push((dims[k % 3], alpha, beta_w, mus[k % 4], a, b));
    }
    out
}

/// Monte Carlo against the kernel-matrix quadrature on `grid_n` nodes over
/// `[1e−4, 100]`, one seed per case (`seed + k`).
pub fn consistency_suite(samples: usize, seed: u64, grid_n: usize) -> Result<Vec<ConsistencyCase>> {
    consistency_cases()
        .into_iter()
        .enumerate()
        .map(|(k, (dim, alpha, beta_w, mu, a, b))| {
            let grid = Arc::new(RadialGrid::new(dim, 1e-4, 100.0, grid_n)?);
            let kernel = assemble_kernel(dim, mu, &grid)?;
            let f = RadialFunction::from_fn(grid.clone(), |r| (-a * r * r).exp());
            let g = RadialFunction::from_fn(grid.clone(), |r| (-b * r * r).exp());
            let quadrature = radial_double_integral(&f, &g, alpha, beta_w, &kernel)?;
            let mc = mc_double_integral(
                |x: &[f64]| (-a * norm2(x).powi(2)).exp(),
                |y: &[f64]| (-b * norm2(y).powi(2)).exp(),
                alpha,
                beta_w,
                mu,
                dim,
                samples,
                seed.wrapping_add(k as u64),
            )?;
            let z_score = (mc.value - quadrature).abs() / mc.stderr.max(f64::MIN_POSITIVE);
            Ok(ConsistencyCase { dim, alpha, beta_w, mu, a, b, quadrature, mc, z_score, pass: z_score <= 3.0 })
        })
        .collect()
}

/// `∫∫ e^{−a|x|²} e^{−b|y|²} / |x−y| dx dy` in three dimensions.
pub fn gaussian_coulomb(a: f64, b: f64) -> f64 {
    2.0 * PI.powf(2.5) / (a * b * (a + b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_quadrature_matches_coulomb_closed_form() {
        let grid = Arc::new(RadialGrid::default_for(3).unwrap());
        let kernel = assemble_kernel(3, 1.0, &grid).unwrap();
        let f = RadialFunction::from_fn(grid.clone(), |r| (-r * r).exp());
        let g = RadialFunction::from_fn(grid.clone(), |r| (-2.0 * r * r).exp());
        let v = radial_double_integral(&f, &g, 0.0, 0.0, &kernel).unwrap();
        assert!((v / gaussian_coulomb(1.0, 2.0) - 1.0).abs() < 1e-4);
    }

    fn gauss(x: &[f64]) -> f64 {
        (-x.iter().map(|v| v * v).sum::<f64>()).exp()
    }

    #[test]
    fn bubble_values() {
        assert!((talenti_bubble(3, 1.0, 0.0) - 3f64.powf(0.25)).abs() < 1e-14);
        assert!((talenti_bubble(4, 1.0, 0.0) - 8f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn proposal_density_normalizes() {
        // ∫ p dx = ω ∫ p(r) r^{N−1} dr = 1, checked by the trapezoid rule in log r
        for &(dim, kappa) in &[(3usize, 0.0), (3, 0.5), (5, 1.2)] {
            let p = RadialProposal::new(dim, kappa, 1.0).unwrap();
            let omega = sphere_area(dim).unwrap();
            let (lo, hi, m) = (-30.0f64, 30.0f64, 200_000);
            let h = (hi - lo) / m as f64;
            let total: f64 = (0..=m)
                .map(|k| {
                    let r = (lo + k as f64 * h).exp();
                    let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                    w * omega * p.density(r) * r.powi(dim as i32)
                })
                .sum::<f64>()
                * h;
            assert!((total - 1.0).abs() < 1e-6, "dim {dim}: {total}");
        }
    }

    #[test]
    fn gaussian_coulomb_within_three_sigma() {
        let est = mc_double_integral(gauss, gauss, 0.0, 0.0, 1.0, 3, 200_000, 3).unwrap();
        let exact = gaussian_coulomb(1.0, 1.0);
        assert!((exact - 24.739).abs() < 1e-3);
        assert!((est.value - exact).abs() < 3.0 * est.stderr, "{est:?}");
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn zero_integrand_and_reproducibility() {
        let z = mc_double_integral(|_: &[f64]| 0.0, gauss, 0.0, 0.0, 1.0, 3, 10_000, 1).unwrap();
        assert_eq!(z.value, 0.0);
        assert_eq!(z.stderr, 0.0);
        let a = mc_double_integral(gauss, gauss, 0.2, 0.2, 1.0, 3, 40_000, 9).unwrap();
        let b = mc_double_integral(gauss, gauss, 0.2, 0.2, 1.0, 3, 40_000, 9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn ratio_homogeneity_and_relation() {
        let r = 6.0 / 5.0;
        let a = hls_ratio(gauss, gauss, r, r, 0.0, 0.0, 1.0, 3, 20_000, 5).unwrap();
        let b = hls_ratio(|x: &[f64]| 7.5 * gauss(x), gauss, r, r, 0.0, 0.0, 1.0, 3, 20_000, 5).unwrap();
        assert!((a.ratio - b.ratio).abs() <= 1e-12 * a.ratio);
        assert!(matches!(hls_ratio(gauss, gauss, 2.0, 2.0, 0.0, 0.0, 1.0, 3, 1000, 5), Err(Error::ExponentRelation)));
    }

    #[test]
    fn split_degenerate_and_overlap() {
        let params = ProblemParams::critical(3, 0.25, 1.0);
        let none = Bump { radius: 1.0, amplitude: 0.0 };
        let s = brezis_lieb_split(Bump::unit(), none, 0.0, &params, 10_000, 1).unwrap();
        assert_eq!(s.defect, 0.0);
        assert!(matches!(brezis_lieb_split(Bump::unit(), Bump::unit(), 1.5, &params, 1000, 1), Err(Error::Overlap(_))));
    }
}
