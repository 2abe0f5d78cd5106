//! Energies, identities and residuals of the discrete problem.
//!
//! With grid weights `W`, stiffness `A` and `V = r^{−α} w` (the outer weight
//! times the weighted potential), the discrete functionals are
//! `kinetic = ω uᵀAu`, `mass = ω Σ W u²`, `D = ω Σ W V |u|^p` and
//! `I = kinetic/2 + mass/2 − D/(2p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{existence_verdict, Existence, ProblemParams};
use crate::grid::{RadialFunction, RadialGrid};
use crate::kernel::{weighted_potential, KernelMatrix};
use crate::quadrature::Tridiagonal;

/// Floor for relative-residual denominators.
pub const EPS_GUARD: f64 = 1e-300;
/// Boundary nodes left out of weak residual norms at each end.
pub const RESIDUAL_TRIM: usize = 3;

/// Scalar diagnostics of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub mass: f64,
    #[serde(rename = "nonlocal_D")]
    pub nonlocal_d: f64,
    #[serde(rename = "energy_I")]
    pub energy_i: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    /// `kinetic / D^{1/2*}`; only reported in critical mode.
    pub quotient: Option<f64>,
}

/// Discrete pieces shared by every functional.
#[derive(Debug, Clone)]
pub struct Parts {
    pub kinetic: f64,
    pub mass: f64,
    pub nonlocal_d: f64,
    /// `V_i = r_i^{−α} w_i`.
    pub potential: Vec<f64>,
    /// `A u`, without the factor `ω`.
    pub stiffness_u: Vec<f64>,
}

impl Parts {
    /// Parts of `t·u` given the parts of `u`, by exact homogeneity.
    pub fn scaled(&self, t: f64, p: f64) -> Parts {
        let tp = t.abs().powf(p);
        Parts {
            kinetic: t * t * self.kinetic,
            mass: t * t * self.mass,
            nonlocal_d: tp * tp * self.nonlocal_d,
            potential: self.potential.iter().map(|v| tp * v).collect(),
            stiffness_u: self.stiffness_u.iter().map(|v| t * v).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates kinetic, mass, `D` and the potential `V` at exponent `p`.
pub fn parts(u: &RadialFunction, p: f64, params: &ProblemParams, kernel: &KernelMatrix) -> Result<Parts> {
    let g = u.grid();
    let omega = g.sphere_area();
    let w = weighted_potential(u, p, params, kernel)?;
    let potential: Vec<f64> = w.values().iter().zip(g.nodes()).map(|(w, r)| w * r.powf(-params.alpha)).collect();
    let stiffness_u = g.stiffness().mul_vec(u.values());
    let kinetic = omega * dot(&stiffness_u, u.values());
    let mass = omega * g.weights().iter().zip(u.values()).map(|(w, v)| w * v * v).sum::<f64>();
    let nonlocal_d = omega
        * g.weights().iter().zip(&potential).zip(u.values()).map(|((w, v), x)| w * v * x.abs().powf(p)).sum::<f64>();
    Ok(Parts { kinetic, mass, nonlocal_d, potential, stiffness_u })
}

/// `D(u) = ∫∫ |u(x)|^p |u(y)|^p / (|x|^α |x−y|^μ |y|^α) dx dy`.
pub fn double_integral_d(u: &RadialFunction, p: f64, params: &ProblemParams, kernel: &KernelMatrix) -> Result<f64> {
    Ok(parts(u, p, params, kernel)?.nonlocal_d)
}

/// Per-node share of `D`: `ω W_i V_i |u_i|^p`, summing to `D`.
pub fn nonlocal_density(u: &RadialFunction, p: f64, params: &ProblemParams, kernel: &KernelMatrix) -> Result<Vec<f64>> {
    let g = u.grid();
    let pr = parts(u, p, params, kernel)?;
    let omega = g.sphere_area();
    Ok(g.weights()
        .iter()
        .zip(&pr.potential)
        .zip(u.values())
        .map(|((w, v), x)| omega * w * v * x.abs().powf(p))
        .collect())
}

fn subcritical_exponent(params: &ProblemParams) -> Result<f64> {
    params.p.ok_or_else(|| Error::WrongMode("subcritical functional needs an explicit exponent p".into()))
}

fn critical_exponent(params: &ProblemParams) -> Result<f64> {
    if params.p.is_some() {
        return Err(Error::WrongMode("critical functional takes p = 2*_{α,μ}; drop the explicit p".into()));
    }
    Ok(params.exponent())
}

fn relative(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.abs().max(EPS_GUARD)
    }
}

/// Pohožaev coefficient `(2N − 2α − μ)/(2p)`.
pub fn pohozaev_coefficient(params: &ProblemParams, p: f64) -> f64 {
    let n = params.dim as f64;
    (2.0 * n - 2.0 * params.alpha - params.mu) / (2.0 * p)
}

fn pohozaev_from(parts: &Parts, params: &ProblemParams, p: f64, with_mass: bool) -> f64 {
    let n = params.dim as f64;
    let mass_term = if with_mass { 0.5 * n * parts.mass } else { 0.0 };
    let lhs = 0.5 * (n - 2.0) * parts.kinetic + mass_term;
    let rhs = pohozaev_coefficient(params, p) * parts.nonlocal_d;
    relative(lhs - rhs, lhs)
}

/// Full report for the subcritical functional `I`.
pub fn energy_subcritical(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<EnergyReport> {
    let p = subcritical_exponent(params)?;
    let pr = parts(u, p, params, kernel)?;
    let norm = pr.kinetic + pr.mass;
    Ok(EnergyReport {
        kinetic: pr.kinetic,
        mass: pr.mass,
        nonlocal_d: pr.nonlocal_d,
        energy_i: 0.5 * pr.kinetic + 0.5 * pr.mass - pr.nonlocal_d / (2.0 * p),
        nehari_residual: relative(norm - pr.nonlocal_d, norm),
        pohozaev_residual: pohozaev_from(&pr, params, p, true),
        quotient: None,
    })
}

/// Report for the critical problem, evaluated at the Lagrange rescaling of
/// `u` (so that it solves the Euler–Lagrange equation with unit coefficient
/// when `u` is a constrained critical point).
pub fn energy_critical(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<EnergyReport> {
    let q = critical_exponent(params)?;
    let c = lagrange_scale(u, params, kernel)?;
    let v = u.scaled(c);
    let pr = parts(&v, q, params, kernel)?;
    Ok(EnergyReport {
        kinetic: pr.kinetic,
        mass: pr.mass,
        nonlocal_d: pr.nonlocal_d,
        energy_i: 0.5 * pr.kinetic - pr.nonlocal_d / (2.0 * q),
        nehari_residual: relative(pr.kinetic - pr.nonlocal_d, pr.kinetic),
        pohozaev_residual: pohozaev_from(&pr, params, q, false),
        quotient: Some(pr.kinetic / pr.nonlocal_d.powf(1.0 / q)),
    })
}

/// Dispatches on the mode encoded in `params`.
pub fn energy_report(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<EnergyReport> {
    if params.is_critical() {
        energy_critical(u, params, kernel)
    } else {
        energy_subcritical(u, params, kernel)
    }
}

/// Scales `u` onto the Nehari manifold: `t = ((kinetic+mass)/D)^{1/(2p−2)}`.
pub fn nehari_project(
    u: &RadialFunction,
    params: &ProblemParams,
    kernel: &KernelMatrix,
) -> Result<(f64, RadialFunction)> {
    let p = subcritical_exponent(params)?;
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pr = parts(u, p, params, kernel)?;
    if !(pr.nonlocal_d > 0.0) {
        return Err(Error::ZeroNonlocal);
    }
    let t = ((pr.kinetic + pr.mass) / pr.nonlocal_d).powf(1.0 / (2.0 * p - 2.0));
    Ok((t, u.scaled(t)))
}

/// `Q(u) = kinetic / D^{1/2*}` at `p = 2*_{α,μ}`.
pub fn critical_quotient(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<f64> {
    let q = critical_exponent(params)?;
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pr = parts(u, q, params, kernel)?;
    if !(pr.nonlocal_d > 0.0) {
        return Err(Error::ZeroNonlocal);
    }
    Ok(pr.kinetic / pr.nonlocal_d.powf(1.0 / q))
}

/// Factor `c` with `kinetic(cu) = D(cu)`: `c^{2·2*−2} = kinetic/D`.
pub fn lagrange_scale(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<f64> {
    let q = critical_exponent(params)?;
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let pr = parts(u, q, params, kernel)?;
    if !(pr.nonlocal_d > 0.0) {
        return Err(Error::ZeroNonlocal);
    }
    Ok((pr.kinetic / pr.nonlocal_d).powf(1.0 / (2.0 * q - 2.0)))
}

/// `ω[(A + W)u − W V |u|^{p−2}u]`, the gradient of `I` in nodal values.
pub fn subcritical_gradient(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<Vec<f64>> {
    let p = subcritical_exponent(params)?;
    let pr = parts(u, p, params, kernel)?;
    let g = u.grid();
    let omega = g.sphere_area();
    Ok(weak_form(g, &pr, u.values(), p, true).into_iter().map(|x| omega * x).collect())
}

/// `(A u)_i + [W_i u_i] − W_i V_i |u_i|^{p−2} u_i`.
pub(crate) fn weak_form(g: &RadialGrid, pr: &Parts, u: &[f64], p: f64, with_mass: bool) -> Vec<f64> {
    g.weights()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let x = u[i];
            let nonlinear = if x == 0.0 { 0.0 } else { pr.potential[i] * x.abs().powf(p - 2.0) * x };
            let mass = if with_mass { w * x } else { 0.0 };
            pr.stiffness_u[i] + mass - w * nonlinear
        })
        .collect()
}

/// Dual norm `sqrt(Fᵀ M⁻¹ F)` relative to `sqrt(uᵀ M u)`, with `F` zeroed on
/// the trimmed boundary nodes.
pub(crate) fn relative_dual_norm(m: &Tridiagonal, mut f: Vec<f64>, u: &[f64]) -> Result<f64> {
    let n = f.len();
    let trim = RESIDUAL_TRIM.min(n / 2);
    f[..trim].fill(0.0);
    f[n - trim..].fill(0.0);
    let y = m.solve(&f)?;
    let num = dot(&f, &y).max(0.0).sqrt();
    let den = dot(&m.mul_vec(u), u).max(0.0).sqrt();
    Ok(relative(num, den))
}

pub(crate) fn h1_operator(g: &RadialGrid) -> Tridiagonal {
    let mut m = g.stiffness();
    for (d, w) in m.diag.iter_mut().zip(g.weights()) {
        *d += w;
    }
    m
}

/// Residual of `−Δu + u = |x|^{−α} w |u|^{p−2}u`: pointwise values
/// (variational discrete Laplacian) and the relative `H^{−1}` norm.
pub fn residual_subcritical(
    u: &RadialFunction,
    params: &ProblemParams,
    kernel: &KernelMatrix,
) -> Result<(RadialFunction, f64)> {
    let p = subcritical_exponent(params)?;
    if u.is_zero() {
        return Ok((u.clone(), 0.0));
    }
    let g = u.grid();
    let pr = parts(u, p, params, kernel)?;
    let f = weak_form(g, &pr, u.values(), p, true);
    let pointwise = f.iter().zip(g.weights()).map(|(x, w)| x / w).collect();
    let norm = relative_dual_norm(&h1_operator(g), f, u.values())?;
    Ok((u.with_values(pointwise), norm))
}

/// Residual of `−Δu = |x|^{−α} w |u|^{2*−2}u` after Lagrange rescaling;
/// the weak norm is the relative `D^{−1,2}` dual norm.
pub fn residual_critical(
    u: &RadialFunction,
    params: &ProblemParams,
    kernel: &KernelMatrix,
) -> Result<(RadialFunction, f64)> {
    let q = critical_exponent(params)?;
    if u.is_zero() {
        return Ok((u.clone(), 0.0));
    }
    let c = lagrange_scale(u, params, kernel)?;
    let v = u.scaled(c);
    let g = u.grid();
    let pr = parts(&v, q, params, kernel)?;
    let f = weak_form(g, &pr, v.values(), q, false);
    let pointwise = f.iter().zip(g.weights()).map(|(x, w)| x / w).collect();
    let norm = relative_dual_norm(&g.stiffness(), f, v.values())?;
    Ok((u.with_values(pointwise), norm))
}

/// Relative Pohožaev defect
/// `((N−2)/2·kinetic + N/2·mass − (2N−2α−μ)/(2p)·D) / LHS`;
/// the mass term is absent in critical mode.
pub fn pohozaev_residual(u: &RadialFunction, params: &ProblemParams, kernel: &KernelMatrix) -> Result<f64> {
    let p = params.exponent();
    let pr = parts(u, p, params, kernel)?;
    Ok(pohozaev_from(&pr, params, p, !params.is_critical()))
}

/// Which quantity the combined Nehari and Pohožaev identities force to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forced {
    Kinetic,
    Mass,
    Both,
}

/// Coefficients of `a·kinetic + b·mass = 0`, obtained by subtracting the
/// Nehari identity scaled by `c = (2N−2α−μ)/(2p)` from the Pohožaev identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub kinetic_coefficient: f64,
    pub mass_coefficient: f64,
    pub forces: Forced,
}

/// Algebraic obstruction for `p` outside `(2_{*α,μ}, 2*_{α,μ})`.
pub fn nonexistence_demo(params: &ProblemParams) -> Result<NonexistenceReport> {
    if existence_verdict(params)? == Existence::Exists {
        return Err(Error::WrongMode("p lies inside the existence range".into()));
    }
    let p = params.exponent();
    let n = params.dim as f64;
    let c = pohozaev_coefficient(params, p);
    let a = 0.5 * (n - 2.0) - c;
    let b = 0.5 * n - c;
    debug_assert!((a >= 0.0 && b >= 0.0) || (a <= 0.0 && b <= 0.0));
    let forces = if a != 0.0 && b != 0.0 {
        Forced::Both
    } else if a == 0.0 {
        Forced::Mass
    } else {
        Forced::Kinetic
    };
    Ok(NonexistenceReport { kinetic_coefficient: a, mass_coefficient: b, forces })
}

/// `kinetic/mass` implied by Nehari and Pohožaev jointly:
/// `(N/2 − c)/(c − (N−2)/2)`, positive exactly in the existence range.
pub fn implied_kinetic_mass_ratio(params: &ProblemParams) -> Result<f64> {
    let p = subcritical_exponent(params)?;
    let n = params.dim as f64;
    let c = pohozaev_coefficient(params, p);
    Ok((0.5 * n - c) / (c - 0.5 * (n - 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::assemble_kernel;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(mu: f64) -> (Arc<RadialGrid>, KernelMatrix) {
        let g = Arc::new(RadialGrid::default_for(3).unwrap());
        let k = assemble_kernel(3, mu, &g).unwrap();
        (g, k)
    }

    #[test]
    fn coulomb_gaussian() {
        let (g, k) = setup(1.0);
        let params = ProblemParams::subcritical(3, 0.0, 1.0, 1.0);
        let u = RadialFunction::from_fn(g, |r| (-r * r).exp());
        let d = double_integral_d(&u, 1.0, &params, &k).unwrap();
        assert_relative_eq!(d, 2.0 * PI.powf(2.5) / 2f64.sqrt(), max_relative = 1e-4);
    }

    #[test]
    fn homogeneity_and_zero() {
        let (g, k) = setup(1.0);
        let params = ProblemParams::subcritical(3, 0.25, 1.0, 2.0);
        let u = RadialFunction::from_fn(g.clone(), |r| (-r).exp() / (1.0 + r));
        let d1 = double_integral_d(&u, 2.0, &params, &k).unwrap();
        let d2 = double_integral_d(&u.scaled(2.0), 2.0, &params, &k).unwrap();
        assert_relative_eq!(d2, 16.0 * d1, max_relative = 1e-14);
        let zero = RadialFunction::zeros(g);
        let rep = energy_subcritical(&zero, &params, &k).unwrap();
        assert_eq!(rep.kinetic, 0.0);
        assert_eq!(rep.nehari_residual, 0.0);
        assert_eq!(rep.pohozaev_residual, 0.0);
        assert!(matches!(nehari_project(&zero, &params, &k), Err(Error::ZeroFunction)));
    }

    #[test]
    fn report_consistency_and_nehari() {
        let (g, k) = setup(1.0);
        let params = ProblemParams::subcritical(3, 0.0, 1.0, 2.0);
        let u = RadialFunction::from_fn(g, |r| (-r * r / 2.0).exp());
        let rep = energy_subcritical(&u, &params, &k).unwrap();
        assert_relative_eq!(
            rep.energy_i,
            rep.kinetic / 2.0 + rep.mass / 2.0 - rep.nonlocal_d / 4.0,
            max_relative = 1e-12
        );
        assert!(rep.quotient.is_none());
        assert!(rep.pohozaev_residual.abs() > 1e-3);
        let (t, v) = nehari_project(&u, &params, &k).unwrap();
        assert!(t > 0.0);
        let rep = energy_subcritical(&v, &params, &k).unwrap();
        assert!(rep.nehari_residual.abs() < 1e-12);
        let (t2, _) = nehari_project(&v, &params, &k).unwrap();
        assert!((t2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_invariances() {
        let g = Arc::new(RadialGrid::default_for(3).unwrap());
        let k = assemble_kernel(3, 1.0, &g).unwrap();
        let params = ProblemParams::critical(3, 0.25, 1.0);
        let u = RadialFunction::from_fn(g, |r| (-2.0 * (r.ln() - 0.3).powi(2)).exp());
        let q = critical_quotient(&u, &params, &k).unwrap();
        assert_relative_eq!(critical_quotient(&u.scaled(3.0), &params, &k).unwrap(), q, max_relative = 1e-12);
        for shift in [-7, 5, 40] {
            let qd = critical_quotient(&u.dilate(shift), &params, &k).unwrap();
            assert_relative_eq!(qd, q, max_relative = 1e-10);
        }
    }

    #[test]
    fn bubble_beats_gaussian_for_alpha_zero() {
        let g = Arc::new(RadialGrid::default_for(3).unwrap());
        let k = assemble_kernel(3, 1.0, &g).unwrap();
        let params = ProblemParams::critical(3, 0.0, 1.0);
        let bubble = RadialFunction::from_fn(g.clone(), |r| 1.0 / (1.0 + r * r).sqrt());
        let gauss = RadialFunction::from_fn(g, |r| (-r * r).exp());
        let qb = critical_quotient(&bubble, &params, &k).unwrap();
        let qg = critical_quotient(&gauss, &params, &k).unwrap();
        assert!(qb <= qg, "{qb} vs {qg}");
    }

    #[test]
    fn critical_report_is_lagrange_normalized() {
        let g = Arc::new(RadialGrid::default_for(3).unwrap());
        let k = assemble_kernel(3, 1.0, &g).unwrap();
        let params = ProblemParams::critical(3, 0.0, 1.0);
        let u = RadialFunction::from_fn(g, |r| 0.1 / (1.0 + r * r).sqrt());
        let rep = energy_critical(&u, &params, &k).unwrap();
        assert!(rep.nehari_residual.abs() < 1e-12);
        assert!(rep.quotient.unwrap() > 0.0);
        assert!(energy_critical(&u, &ProblemParams::subcritical(3, 0.0, 1.0, 2.0), &k).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Arc::new(RadialGrid::new(3, 1e-3, 30.0, 200).unwrap());
        let k = assemble_kernel(3, 1.0, &g).unwrap();
        let params = ProblemParams::subcritical(3, 0.25, 1.0, 2.0);
        let u = RadialFunction::from_fn(g.clone(), |r| (-r).exp());
        let grad = subcritical_gradient(&u, &params, &k).unwrap();
        let dir: Vec<f64> = g.nodes().iter().map(|r| (r * 1.3).sin() * (-r / 4.0).exp()).collect();
        let eps = 1e-5;
        let shifted = |s: f64| {
            let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            energy_subcritical(&u.with_values(v), &params, &k).unwrap().energy_i
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        assert_relative_eq!(dot(&grad, &dir), fd, max_relative = 1e-6);
    }

    #[test]
    fn nonexistence_coefficients() {
        let rep = nonexistence_demo(&ProblemParams::subcritical(3, 0.0, 1.0, 5.0)).unwrap();
        assert_relative_eq!(rep.kinetic_coefficient, 0.0);
        assert_relative_eq!(rep.mass_coefficient, 1.0);
        assert_eq!(rep.forces, Forced::Mass);
        let rep = nonexistence_demo(&ProblemParams::subcritical(3, 0.0, 1.0, 5.0 / 3.0)).unwrap();
        assert_relative_eq!(rep.kinetic_coefficient, -1.0, max_relative = 1e-12);
        assert!(rep.mass_coefficient.abs() < 1e-12);
        let rep = nonexistence_demo(&ProblemParams::subcritical(3, 0.0, 1.0, 6.0)).unwrap();
        assert!(rep.kinetic_coefficient > 0.0 && rep.mass_coefficient > 0.0);
        assert_eq!(rep.forces, Forced::Both);
        assert!(matches!(nonexistence_demo(&ProblemParams::subcritical(3, 0.0, 1.0, 2.0)), Err(Error::WrongMode(_))));
    }

    #[test]
    fn report_json_is_flat() {
        let rep = EnergyReport {
            kinetic: 1.0,
            mass: 2.0,
            nonlocal_d: 3.0,
            energy_i: 0.5,
            nehari_residual: 0.0,
            pohozaev_residual: 1e-4,
            quotient: None,
        };
        let v: serde_json::Value = serde_json::to_value(rep).unwrap();
        assert_eq!(v["nonlocal_D"], 3.0);
        assert_eq!(v["energy_I"], 0.5);
        assert!(v["quotient"].is_null());
        let back: EnergyReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, rep);
    }
}
