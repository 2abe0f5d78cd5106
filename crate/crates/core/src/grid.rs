//! Log-uniform radial grids and the discrete calculus of radial functions.
//!
//! Nodes are `r_i = r_min·ρ^i`. Integrals `∫_0^∞ f(r) r^{N−1} dr` use the
//! end-corrected (Gregory) trapezoid rule in `log r`, with the origin cell
//! `[0, r_min]` filled by the constant extension of `f`. Kinetic energy is
//! the exact Dirichlet energy of the piecewise-linear interpolant, plus the
//! energy of the harmonic extension `u(r_max)(r_max/r)^{N−2}` beyond the last
//! node. On this grid the dilation `u ↦ ρ^{k(N−2)/2} u(ρ^k ·)` is an index
//! shift, so scale-invariant functionals stay invariant to rounding.

use std::fmt::Write as _;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::Tridiagonal;

/// Gregory end-correction coefficients.
const GREGORY: [f64; 6] = [1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0, 863.0 / 60480.0, 275.0 / 24192.0];

/// Area `ω_{N−1} = 2π^{N/2}/Γ(N/2)` of the unit sphere in `ℝ^N`.
pub fn sphere_area(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let half = dim as f64 / 2.0;
    Ok(2.0 * std::f64::consts::PI.powf(half) / gamma(half))
}

/// Log-uniform node set with quadrature weights for `∫ f r^{N−1} dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    r_min: f64,
    r_max: f64,
    log_step: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    omega: f64,
}

impl RadialGrid {
    pub fn new(dim: usize, r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(r_min.is_finite() && r_max.is_finite() && r_min > 0.0 && r_max > r_min) {
            return Err(Error::InvalidGrid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        let log_step = (r_max / r_min).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| r_min * (i as f64 * log_step).exp()).collect();
        nodes[n - 1] = r_max;

        let nf = dim as f64;
        let coef = gregory_coefficients(n);
        let mut weights: Vec<f64> = nodes.iter().zip(&coef).map(|(&r, &c)| c * log_step * r.powf(nf)).collect();
        weights[0] += r_min.powf(nf) / nf;

        Ok(RadialGrid { dim, r_min, r_max, log_step, nodes, weights, omega: sphere_area(dim)? })
    }

    /// `[1e−4, 100]` with 1024 nodes.
    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, 1e-4, 100.0, 1024)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Spacing `h = log ρ` in the logarithmic variable.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// Node ratio `ρ = r_{i+1}/r_i`.
    pub fn ratio(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `w_i` with `Σ w_i f(r_i) ≈ ∫_0^{r_max} f(r) r^{N−1} dr`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ω_{N−1}`.
    pub fn sphere_area(&self) -> f64 {
        self.omega
    }

    /// Same node set (compares dimension, extent and count).
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.dim == other.dim
            && self.nodes.len() == other.nodes.len()
            && self.r_min == other.r_min
            && self.r_max == other.r_max
    }

    /// Stiffness matrix of the kinetic form (without the factor `ω_{N−1}`):
    /// `uᵀAu = ∫_0^∞ |u_h'|² r^{N−1} dr` for the piecewise-linear `u_h`
    /// continued harmonically past `r_max`.
    pub fn stiffness(&self) -> Tridiagonal {
        let nf = self.dim as f64;
        self.stiffness_with_exterior((nf - 2.0) * self.r_max.powf(nf - 2.0))
    }

    /// Interior stiffness plus `exterior` on the last diagonal entry, the
    /// flux coefficient of whatever continuation is assumed past `r_max`.
    pub fn stiffness_with_exterior(&self, exterior: f64) -> Tridiagonal {
        let n = self.len();
        let nf = self.dim as f64;
        let edge = (nf * self.log_step).exp_m1() / (nf * self.log_step.exp_m1().powi(2));
        let a: Vec<f64> = self.nodes[..n - 1].iter().map(|&r| edge * r.powf(nf - 2.0)).collect();
        let mut diag = vec![0.0; n];
        for (i, &ae) in a.iter().enumerate() {
            diag[i] += ae;
            diag[i + 1] += ae;
        }
        diag[n - 1] += exterior;
        let off: Vec<f64> = a.iter().map(|x| -x).collect();
        Tridiagonal { lower: off.clone(), diag, upper: off }
    }
}

fn gregory_coefficients(n: usize) -> Vec<f64> {
    let mut c = vec![1.0; n];
    c[0] = 0.5;
    c[n - 1] = 0.5;
    let order = GREGORY.len().min((n - 1) / 2);
    for (k, &gk) in GREGORY.iter().enumerate().take(order) {
        let k = k + 1;
        let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..=k {
            let binom = binomial(k, j);
            let sign_j = if j % 2 == 0 { 1.0 } else { -1.0 };
            // backward difference ∇^k at the last node
            c[n - 1 - j] -= gk * sign_j * binom;
            // (−1)^k Δ^k at the first node; Δ^k f_0 = Σ (−1)^{k−j} C(k,j) f_j
            let sign_kj = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            c[j] -= gk * sign_k * sign_kj * binom;
        }
    }
    c
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Values of a radial profile on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(RadialFunction { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialFunction { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        RadialFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Same grid, new values (length unchecked beyond a debug assertion).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.grid.len());
        RadialFunction { grid: Arc::clone(&self.grid), values }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    /// `ρ^{k(N−2)/2} u(ρ^k r)`: the scale-invariant dilation by `τ = ρ^k`.
    ///
    /// Beyond `r_max` the profile continues harmonically; below `r_min` it is
    /// constant.
    pub fn dilate(&self, k: isize) -> Self {
        let n = self.len() as isize;
        let nf = self.grid.dim() as f64;
        let h = self.grid.log_step();
        let amp = (k as f64 * h * (nf - 2.0) / 2.0).exp();
        let last = self.values[(n - 1) as usize];
        let values = (0..n)
            .map(|i| {
                let j = i + k;
                let v = if j < 0 {
                    self.values[0]
                } else if j >= n {
                    last * (-((j - n + 1) as f64) * h * (nf - 2.0)).exp()
                } else {
                    self.values[j as usize]
                };
                amp * v
            })
            .collect();
        self.with_values(values)
    }

    pub fn check_same_grid(&self, other: &RadialGrid) -> Result<()> {
        if self.grid.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "profile has {} nodes on [{}, {}], expected {} on [{}, {}]",
                self.grid.len(),
                self.grid.r_min(),
                self.grid.r_max(),
                other.len(),
                other.r_min(),
                other.r_max()
            )))
        }
    }

    /// Reads a profile CSV and checks it sits on `grid`.
    pub fn from_csv(grid: Arc<RadialGrid>, text: &str) -> Result<Self> {
        let rows = parse_profile_csv(text)?;
        if rows.len() != grid.len() {
            return Err(Error::GridMismatch(format!("profile has {} rows, grid has {} nodes", rows.len(), grid.len())));
        }
        for (i, (&(r, _), &node)) in rows.iter().zip(grid.nodes()).enumerate() {
            if (r - node).abs() > 1e-12 * node {
                return Err(Error::GridMismatch(format!("row {} has r = {r}, grid node is {node}", i + 1)));
            }
        }
        let values = rows.into_iter().map(|(_, u)| u).collect();
        RadialFunction::new(grid, values)
    }

    /// CSV with header `r,u`, one node per line, shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        out.push_str("r,u\n");
        for (r, u) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r:?},{u:?}");
        }
        out
    }
}

/// Parses `r,u` CSV rows: header required, strictly ascending finite `r`,
/// finite `u`.
pub fn parse_profile_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "r,u" => {}
        Some((i, _)) => return Err(parse_err(i, "expected header `r,u`")),
        None => return Err(parse_err(0, "empty profile")),
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, line) in lines {
        let mut fields = line.trim().split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(i, "expected two comma-separated fields"));
        };
        let r: f64 = a.trim().parse().map_err(|_| parse_err(i, "r is not a number"))?;
        let u: f64 = b.trim().parse().map_err(|_| parse_err(i, "u is not a number"))?;
        if !r.is_finite() || !u.is_finite() {
            return Err(parse_err(i, "non-finite value"));
        }
        if let Some(&(prev, _)) = rows.last() {
            if r <= prev {
                return Err(parse_err(i, "r must be strictly ascending"));
            }
        }
        rows.push((r, u));
    }
    if rows.is_empty() {
        return Err(parse_err(0, "profile has no rows"));
    }
    Ok(rows)
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line: line + 1, msg: msg.to_string() }
}

/// `∫_{ℝ^N} f dx = ω_{N−1} Σ w_i f(r_i)`.
pub fn integrate(f: &RadialFunction) -> f64 {
    let g = f.grid();
    g.sphere_area() * g.weights().iter().zip(f.values()).map(|(w, v)| w * v).sum::<f64>()
}

/// First derivative by the three-point stencil on uneven spacing (exact on
/// quadratics); one-sided at both ends.
pub fn radial_derivative(f: &RadialFunction) -> RadialFunction {
    let r = f.grid().nodes();
    let u = f.values();
    let n = r.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = r[i] - r[i - 1];
        let h2 = r[i + 1] - r[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * u[i - 1] + (h2 - h1) / (h1 * h2) * u[i] + h1 / (h2 * (h1 + h2)) * u[i + 1];
    }
    let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1] - h1 / (h2 * (h1 + h2)) * u[2];
    let (h1, h2) = (r[n - 2] - r[n - 3], r[n - 1] - r[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * u[n - 3] - (h1 + h2) / (h1 * h2) * u[n - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * u[n - 1];
    f.with_values(d)
}

/// `f'' + (N−1) f'/r` by five-point stencils (exact on quartics), shifted
/// inward at the ends.
pub fn radial_laplacian(f: &RadialFunction) -> RadialFunction {
    let r = f.grid().nodes();
    let u = f.values();
    let n = r.len();
    let nf = f.grid().dim() as f64;
    let width = n.min(5);
    let lap = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(width / 2).min(n - width);
            let xs = &r[lo..lo + width];
            let w = fornberg_weights(r[i], xs, 2);
            let (d1, d2) = xs
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(a, b), (j, _)| (a + w[1][j] * u[lo + j], b + w[2][j] * u[lo + j]));
            d2 + (nf - 1.0) * d1 / r[i]
        })
        .collect();
    f.with_values(lap)
}

/// Finite-difference weights for derivatives `0..=order` at `z` from nodes
/// `xs` (Fornberg's recursion).
fn fornberg_weights(z: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// `∫_{ℝ^N} |∇f|² dx` for the piecewise-linear interpolant with harmonic
/// continuation past `r_max`.
pub fn dirichlet_norm_sq(f: &RadialFunction) -> f64 {
    let g = f.grid();
    let a = g.stiffness();
    let au = a.mul_vec(f.values());
    g.sphere_area() * au.iter().zip(f.values()).map(|(x, y)| x * y).sum::<f64>()
}

/// `∫ |u|² dx`.
pub fn mass_sq(f: &RadialFunction) -> f64 {
    let g = f.grid();
    g.sphere_area() * g.weights().iter().zip(f.values()).map(|(w, v)| w * v * v).sum::<f64>()
}

/// `‖f‖²_{H¹} = ∫|∇f|² + ∫f²`.
pub fn h1_norm_sq(f: &RadialFunction) -> f64 {
    dirichlet_norm_sq(f) + mass_sq(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(dim: usize, r_min: f64, r_max: f64, n: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(dim, r_min, r_max, n).unwrap())
    }

    fn bubble3(r: f64) -> f64 {
        3f64.powf(0.25) / (1.0 + r * r).sqrt()
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(4).unwrap(), 2.0 * PI * PI, max_relative = 1e-14);
        assert!(matches!(sphere_area(1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn grid_invariants() {
        let g = RadialGrid::default_for(3).unwrap();
        let rho = g.ratio();
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] / w[0]) - rho).abs() < 1e-13);
        }
        assert!(g.weights().iter().all(|&w| w > 0.0));
        for dim in 3..=6 {
            let g = RadialGrid::default_for(dim).unwrap();
            let nf = dim as f64;
            let exact = (g.r_max().powf(nf) - g.r_min().powf(nf)) / nf;
            let quad: f64 = g.weights().iter().sum::<f64>() - g.r_min().powf(nf) / nf;
            assert!((quad - exact).abs() / exact < 1e-8, "dim {dim}: {quad} vs {exact}");
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(RadialGrid::new(3, 0.0, 1.0, 10).is_err());
        assert!(RadialGrid::new(3, 2.0, 1.0, 10).is_err());
        assert!(RadialGrid::new(3, 1e-3, 1.0, 2).is_err());
        assert!(RadialGrid::new(1, 1e-3, 1.0, 10).is_err());
    }

    #[test]
    fn integrate_examples() {
        // node at r = 1 takes the midpoint value of the jump
        let g = grid(3, 1e-3, 10.0, 4001);
        assert!(g.nodes().iter().any(|&r| (r - 1.0).abs() < 1e-12));
        let ball = RadialFunction::from_fn(g.clone(), |r| {
            if (r - 1.0).abs() < 1e-12 {
                0.5
            } else if r < 1.0 {
                1.0
            } else {
                0.0
            }
        });
        assert_relative_eq!(integrate(&ball), 4.0 * PI / 3.0, max_relative = 1e-4);
        assert_eq!(integrate(&RadialFunction::zeros(g.clone())), 0.0);

        let g = RadialGrid::default_for(3).map(Arc::new).unwrap();
        let gauss = RadialFunction::from_fn(g, |r| (-r * r).exp());
        assert_relative_eq!(integrate(&gauss), PI.powf(1.5), max_relative = 1e-6);
    }

    #[test]
    fn derivative_examples() {
        let g = RadialGrid::default_for(3).map(Arc::new).unwrap();
        let lin = RadialFunction::from_fn(g.clone(), |r| r);
        for &d in radial_derivative(&lin).values() {
            assert!((d - 1.0).abs() < 1e-10);
        }
        let quad = RadialFunction::from_fn(g.clone(), |r| r * r);
        let d = radial_derivative(&quad);
        for (i, &r) in g.nodes().iter().enumerate().skip(100).take(800) {
            assert!((d.values()[i] - 2.0 * r).abs() <= 1e-8 * 2.0 * r);
        }
        let b = RadialFunction::from_fn(g.clone(), bubble3);
        let d = radial_derivative(&b);
        let i =
            (0..g.len()).min_by(|&a, &b| (g.nodes()[a] - 1.0).abs().total_cmp(&(g.nodes()[b] - 1.0).abs())).unwrap();
        let r = g.nodes()[i];
        let exact = -3f64.powf(0.25) * r / (1.0 + r * r).powf(1.5);
        assert!((d.values()[i] - exact).abs() < 1e-4);
        assert!((r - 1.0).abs() < 1e-12);
        assert!((d.values()[i] + 3f64.powf(0.25) / 8f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn laplacian_examples() {
        let g = RadialGrid::default_for(3).map(Arc::new).unwrap();
        let quad = RadialFunction::from_fn(g.clone(), |r| r * r);
        let lap = radial_laplacian(&quad);
        for &v in &lap.values()[10..1000] {
            assert!((v - 6.0).abs() < 1e-6);
        }
        // cancellation error grows like ε/(h r)²
        let c = RadialFunction::from_fn(g.clone(), |_| 2.5);
        for (v, r) in radial_laplacian(&c).values().iter().zip(g.nodes()) {
            assert!(v.abs() * r * r < 1e-9);
        }
        let b = RadialFunction::from_fn(g.clone(), bubble3);
        let lap = radial_laplacian(&b);
        for (i, &r) in g.nodes().iter().enumerate() {
            if (0.01..=10.0).contains(&r) {
                let rhs = bubble3(r).powi(5);
                assert!((-lap.values()[i] - rhs).abs() < 1e-4 * rhs, "r = {r}");
            }
        }
    }

    #[test]
    fn dirichlet_examples() {
        let g = RadialGrid::default_for(3).map(Arc::new).unwrap();
        assert_eq!(dirichlet_norm_sq(&RadialFunction::zeros(g.clone())), 0.0);
        // ∫|∇e^{−|x|²/2}|² dx = ∫ r² e^{−r²} dx = (3/2) π^{3/2}
        let gauss = RadialFunction::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        assert_relative_eq!(dirichlet_norm_sq(&gauss), 1.5 * PI.powf(1.5), max_relative = 1e-4);
        assert_relative_eq!(h1_norm_sq(&gauss), 1.5 * PI.powf(1.5) + PI.powf(1.5), max_relative = 1e-4);
        // −ΔU = U⁵ ⇒ ∫|∇U|² = ∫U⁶
        let b = RadialFunction::from_fn(g.clone(), bubble3);
        let u6 = integrate(&b.map(|v| v.powi(6)));
        assert_relative_eq!(dirichlet_norm_sq(&b), u6, max_relative = 1e-3);
    }

    #[test]
    fn dilation_is_index_shift() {
        let g = RadialGrid::default_for(3).map(Arc::new).unwrap();
        let b = RadialFunction::from_fn(g.clone(), bubble3);
        let d = b.dilate(3);
        let tau = g.ratio().powi(3);
        for i in 0..g.len() - 3 {
            let r = g.nodes()[i];
            assert_relative_eq!(d.values()[i], tau.sqrt() * bubble3(tau * r), max_relative = 1e-12);
        }
        assert_eq!(b.dilate(0), b);
        assert_eq!(b.dilate(-4).values()[0], b.values()[0] * (-4.0 * g.log_step() / 2.0).exp());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let g = grid(3, 1e-2, 10.0, 17);
        let f = RadialFunction::from_fn(g.clone(), |r| (-r).exp() / 3.0);
        let text = f.to_csv();
        assert!(text.starts_with("r,u\n"));
        let back = RadialFunction::from_csv(g.clone(), &text).unwrap();
        assert_eq!(back, f);

        let truncated: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
        assert!(matches!(RadialFunction::from_csv(g.clone(), &truncated), Err(Error::GridMismatch(_))));
        assert!(parse_profile_csv("").is_err());
        assert!(parse_profile_csv("x,y\n1,2\n").is_err());
        assert!(parse_profile_csv("r,u\n1,2\n1,3\n").is_err());
        assert!(parse_profile_csv("r,u\n1,nan\n").is_err());
        assert!(parse_profile_csv("r,u\n1,2,3\n").is_err());
        assert!(parse_profile_csv("r,u\n").is_err());
    }
}
