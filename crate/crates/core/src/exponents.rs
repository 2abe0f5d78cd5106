//! Exponent bookkeeping for the weighted Choquard problem.
//!
//! Everything here is a closed-form evaluation over the parameter tuple
//! `(N, α, μ, p)`: critical exponents, admissible ranges, the existence
//! verdict, the integrability classes of positive solutions, the weighted
//! Hardy–Littlewood–Sobolev exponent relation, the bootstrap recursion used
//! to lift `W^{2,r}` regularity, and the decay coefficient of minimizers.

use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::sphere_area;

/// Relative tolerance used when comparing user-supplied exponents.
pub const RELATION_TOL: f64 = 1e-12;

/// Upper bound on bootstrap steps before the recursion is declared stuck.
pub const MAX_BOOTSTRAP_STEPS: usize = 1000;

/// The tuple `(N, α, μ, p)` consumed by every formula in the crate.
///
/// `p` is absent in critical mode, where the nonlinearity sits at the upper
/// critical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub dim: usize,
    pub alpha: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// A single violated hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NonFinite,
    DimensionTooSmall,
    NegativeAlpha,
    KernelExponentRange,
    WeightBudget,
    AtOrBelowLowerCritical,
    AtOrAboveUpperCritical,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::NonFinite => "parameters must be finite",
            Violation::DimensionTooSmall => "N ≥ 3",
            Violation::NegativeAlpha => "α ≥ 0",
            Violation::KernelExponentRange => "0 < μ < N",
            Violation::WeightBudget => "2α+μ ≤ N",
            Violation::AtOrBelowLowerCritical => "p > 2_{*α,μ}",
            Violation::AtOrAboveUpperCritical => "p < 2*_{α,μ}",
        };
        f.write_str(s)
    }
}

impl ProblemParams {
    pub fn critical(dim: usize, alpha: f64, mu: f64) -> Self {
        ProblemParams { dim, alpha, mu, p: None }
    }

    pub fn subcritical(dim: usize, alpha: f64, mu: f64, p: f64) -> Self {
        ProblemParams { dim, alpha, mu, p: Some(p) }
    }

    /// Weight budget `2α + μ`.
    pub fn weight(&self) -> f64 {
        2.0 * self.alpha + self.mu
    }

    /// Violations of the `(N, α, μ)` hypotheses, ignoring `p`.
    pub fn base_violations(&self) -> Vec<Violation> {
        base_violations(self.dim, self.alpha, self.mu)
    }

    /// Fails with [`Error::InvalidParameters`] unless `(N, α, μ)` are admissible.
    pub fn check_base(&self) -> Result<()> {
        into_result(self.base_violations())
    }

    /// The exponent of the nonlinearity: `p` if present, else `2*_{α,μ}`.
    pub fn exponent(&self) -> f64 {
        self.p.unwrap_or_else(|| upper_critical_unchecked(self.dim, self.alpha, self.mu))
    }

    pub fn is_critical(&self) -> bool {
        self.p.is_none()
    }
}

fn base_violations(dim: usize, alpha: f64, mu: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if !alpha.is_finite() || !mu.is_finite() {
        out.push(Violation::NonFinite);
        return out;
    }
    let n = dim as f64;
    if dim < 3 {
        out.push(Violation::DimensionTooSmall);
    }
    if alpha < 0.0 {
        out.push(Violation::NegativeAlpha);
    }
    if !(mu > 0.0 && mu < n) {
        out.push(Violation::KernelExponentRange);
    }
    if 2.0 * alpha + mu > n {
        out.push(Violation::WeightBudget);
    }
    out
}

/// Folds a violation list into a single [`Error::InvalidParameters`].
pub fn violations_error(violations: Vec<Violation>) -> Error {
    let msg: Vec<String> = violations.iter().map(|v| format!("{v} violated")).collect();
    Error::InvalidParameters(msg.join("; "))
}

fn into_result(violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations_error(violations))
    }
}

fn upper_critical_unchecked(dim: usize, alpha: f64, mu: f64) -> f64 {
    let n = dim as f64;
    (2.0 * n - 2.0 * alpha - mu) / (n - 2.0)
}

fn lower_critical_unchecked(dim: usize, alpha: f64, mu: f64) -> f64 {
    let n = dim as f64;
    2.0 - (2.0 * alpha + mu) / n
}

/// Upper critical exponent `2*_{α,μ} = (2N − 2α − μ)/(N − 2)`.
pub fn upper_critical(dim: usize, alpha: f64, mu: f64) -> Result<f64> {
    into_result(base_violations(dim, alpha, mu))?;
    Ok(upper_critical_unchecked(dim, alpha, mu))
}

/// Lower critical exponent `2_{*α,μ} = 2 − (2α + μ)/N`.
pub fn lower_critical(dim: usize, alpha: f64, mu: f64) -> Result<f64> {
    into_result(base_violations(dim, alpha, mu))?;
    Ok(lower_critical_unchecked(dim, alpha, mu))
}

/// Lists every violated hypothesis; `Ok(())` iff all hold.
///
/// When `p` is present it must lie strictly between the two critical
/// exponents.
pub fn validate_params(params: &ProblemParams) -> std::result::Result<(), Vec<Violation>> {
    let mut out = params.base_violations();
    if let Some(p) = params.p {
        if !p.is_finite() {
            if !out.contains(&Violation::NonFinite) {
                out.push(Violation::NonFinite);
            }
        } else if !out.contains(&Violation::NonFinite) {
            if p <= lower_critical_unchecked(params.dim, params.alpha, params.mu) {
                out.push(Violation::AtOrBelowLowerCritical);
            }
            if p >= upper_critical_unchecked(params.dim, params.alpha, params.mu) {
                out.push(Violation::AtOrAboveUpperCritical);
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Existence {
    Exists,
    NonexistenceByPohozaev,
}

/// Ground states exist iff `2_{*α,μ} < p < 2*_{α,μ}`; at or beyond either
/// endpoint the Pohožaev obstruction forces `u ≡ 0`.
pub fn existence_verdict(params: &ProblemParams) -> Result<Existence> {
    params.check_base()?;
    let p = params
        .p
        .filter(|p| p.is_finite())
        .ok_or_else(|| Error::InvalidParameters("a finite exponent p is required".into()))?;
    let upper = upper_critical_unchecked(params.dim, params.alpha, params.mu);
    let lower = lower_critical_unchecked(params.dim, params.alpha, params.mu);
    if p >= upper || p <= lower {
        Ok(Existence::NonexistenceByPohozaev)
    } else {
        Ok(Existence::Exists)
    }
}

/// Open interval whose upper end may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_nonempty(&self) -> bool {
        self.lo < self.hi
    }
}

impl Serialize for OpenInterval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(2))?;
        for x in [self.lo, self.hi] {
            if x.is_finite() {
                seq.serialize_element(&x)?;
            } else if x > 0.0 {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element("-inf")?;
            }
        }
        seq.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegularityCase {
    C1,
    C2,
    C3,
    C4,
}

impl fmt::Display for RegularityCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Integrability class of a positive solution pair `(u, v)` of the
/// critical integral system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityVerdict {
    pub case_label: RegularityCase,
    pub p_interval: OpenInterval,
    pub q_interval: OpenInterval,
}

impl RegularityVerdict {
    /// The `q` paired with `p` through `1/q = 1/p − (N−2−2α−μ)/(2N)`,
    /// or `None` when the right-hand side is not positive.
    pub fn linked_q(dim: usize, weight: f64, p: f64) -> Option<f64> {
        let n = dim as f64;
        let inv_q = 1.0 / p - (n - 2.0 - weight) / (2.0 * n);
        (inv_q > 0.0).then(|| 1.0 / inv_q)
    }
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Classifies `(N, 2α+μ)` into the integrability cases C1–C4.
///
/// Overlapping hypotheses resolve to the first matching case in order
/// C1, C2, C3, C4.
pub fn regularity_class(dim: usize, alpha: f64, mu: f64) -> Result<RegularityVerdict> {
    into_result(base_violations(dim, alpha, mu))?;
    let n = dim as f64;
    let a = 2.0 * alpha + mu;
    let low_dim = (3..=6).contains(&dim);
    let case = if low_dim && n - 2.0 <= a && a <= n.min(4.0) {
        RegularityCase::C1
    } else if ((5..=6).contains(&dim) && 4.0 < a && a <= n) || (dim >= 7 && n - 2.0 <= a && a <= n) {
        RegularityCase::C2
    } else if (low_dim && 0.0 < a && a < n - 2.0)
        || (dim >= 7 && ((0.0..=4.0).contains(&a) || ((n + 2.0) / 2.0 <= a && a < n - 2.0)))
    {
        RegularityCase::C3
    } else if dim >= 7 && 4.0 < a && a < (n + 2.0) / 2.0 {
        RegularityCase::C4
    } else {
        return Err(Error::UncoveredRange { dim, weight: a });
    };

    let two_n = 2.0 * n;
    let (p_interval, q_interval) = match case {
        RegularityCase::C1 => (
            OpenInterval { lo: n / (n - 2.0), hi: f64::INFINITY },
            OpenInterval { lo: two_n / (n - 2.0 + a), hi: ratio_or_inf(two_n, 2.0 + a - n) },
        ),
        RegularityCase::C2 => (
            OpenInterval { lo: n / (n - 2.0), hi: ratio_or_inf(two_n, a - 4.0) },
            OpenInterval { lo: two_n / (n + a - 2.0), hi: ratio_or_inf(two_n, 2.0 * a - n - 2.0) },
        ),
        RegularityCase::C3 => (
            OpenInterval { lo: two_n / (n - 2.0 + a), hi: ratio_or_inf(two_n, n - 2.0 - a) },
            OpenInterval { lo: ratio_or_inf(n, a), hi: f64::INFINITY },
        ),
        // The printed upper q-endpoint 2N/(2(2α+μ)−N−2) is negative throughout
        // this case; it is read as +∞.
        RegularityCase::C4 => (
            OpenInterval { lo: two_n / (n - 2.0 + a), hi: ratio_or_inf(two_n, a - 4.0) },
            OpenInterval { lo: n / a, hi: ratio_or_inf(two_n, 2.0 * a - n - 2.0) },
        ),
    };
    Ok(RegularityVerdict { case_label: case, p_interval, q_interval })
}

/// Stein–Weiss admissibility of `(r, s, α, β, μ, N)`.
pub fn hls_exponent_check(r: f64, s: f64, alpha: f64, beta: f64, mu: f64, dim: usize) -> bool {
    let n = dim as f64;
    let finite = [r, s, alpha, beta, mu].iter().all(|x| x.is_finite());
    if !finite || !(r > 1.0 && s > 1.0) || !(mu > 0.0 && mu < n) || dim == 0 {
        return false;
    }
    let balance = 1.0 / r + 1.0 / s + (alpha + beta + mu) / n;
    let balanced = (balance - 2.0).abs() <= RELATION_TOL * 2.0;
    let a = alpha / n;
    let alpha_window = 1.0 - 1.0 / r - mu / n < a && a < 1.0 - 1.0 / r;
    balanced && alpha_window && alpha + beta >= 0.0 && alpha + beta + mu <= n
}

/// Trace of the `W^{2,r}` bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapTrace {
    /// `r_0, r_1, …`; the last entry is `≥ N/2` (possibly `+∞`).
    pub radii: Vec<f64>,
    /// Number of recursion steps taken (`radii.len() − 1`).
    pub steps: usize,
}

/// Iterates `1/r_{n+1} = (p−1)(1/r_n − 2/N)` from
/// `1/r_0 = (N−μ−2α)/N · (1 − 1/p)` until `r_n ≥ N/2`.
///
/// A non-positive reciprocal means the next exponent is unbounded and is
/// recorded as `+∞`.
pub fn bootstrap_iteration(params: &ProblemParams) -> Result<BootstrapTrace> {
    validate_params(params).map_err(violations_error)?;
    let p = params.p.ok_or_else(|| Error::InvalidParameters("bootstrap needs a subcritical p".into()))?;
    let n = params.dim as f64;
    let half_dim = n / 2.0;
    let mut inv = (n - params.mu - 2.0 * params.alpha) / n * (1.0 - 1.0 / p);
    let mut radii = vec![ratio_or_inf(1.0, inv)];
    while *radii.last().unwrap() < half_dim {
        if radii.len() > MAX_BOOTSTRAP_STEPS {
            return Err(Error::Nonconvergence(format!("bootstrap exceeded {MAX_BOOTSTRAP_STEPS} steps")));
        }
        inv = (p - 1.0) * (inv - 2.0 / n);
        radii.push(ratio_or_inf(1.0, inv));
    }
    let steps = radii.len() - 1;
    Ok(BootstrapTrace { radii, steps })
}

/// Which closed form to use for the decay coefficient of minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayConstantForm {
    /// `[(N−α)·2^{2μ}/ω²_{N−1}]^{1/(2·2*)}`, the constant produced by the
    /// chain of estimates.
    #[default]
    ProofChain,
    /// `[(N−α)²·2^{μ}/ω²_{N−1}]^{1/(2−2α−μ)}`, the closed form as displayed
    /// in the theorem statement.
    Statement,
}

/// Coefficient `C` in `u(|x|) ≤ C |x|^{−(N−2)/2}` for nonnegative
/// minimizers normalized to `‖u‖_{α,μ} = 1`.
pub fn decay_constant(dim: usize, alpha: f64, mu: f64) -> Result<f64> {
    decay_constant_with(dim, alpha, mu, DecayConstantForm::ProofChain)
}

pub fn decay_constant_with(dim: usize, alpha: f64, mu: f64, form: DecayConstantForm) -> Result<f64> {
    into_result(base_violations(dim, alpha, mu))?;
    let n = dim as f64;
    let a = 2.0 * alpha + mu;
    if !(a > 0.0 && a <= n.min(4.0)) {
        return Err(Error::InvalidParameters("0 < μ+2α ≤ min{4, N} violated".into()));
    }
    let omega = sphere_area(dim)?;
    match form {
        DecayConstantForm::ProofChain => {
            let base = (n - alpha) * 2f64.powf(2.0 * mu) / (omega * omega);
            Ok(base.powf(1.0 / (2.0 * upper_critical_unchecked(dim, alpha, mu))))
        }
        DecayConstantForm::Statement => {
            let expo = 2.0 - a;
            if expo == 0.0 {
                return Err(Error::Domain("displayed exponent 1/(2−2α−μ) is undefined at 2α+μ = 2".into()));
            }
            let base = (n - alpha).powi(2) * 2f64.powf(mu) / (omega * omega);
            Ok(base.powf(1.0 / expo))
        }
    }
}

/// Power of `|x|` in the minimizer decay bound, `−(N−2)/2`.
pub fn decay_exponent(dim: usize) -> f64 {
    -(dim as f64 - 2.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn critical_exponent_examples() {
        assert_relative_eq!(upper_critical(3, 0.0, 1.0).unwrap(), 5.0);
        assert_relative_eq!(upper_critical(4, 1.0, 2.0).unwrap(), 2.0);
        // 2α+μ = N boundary
        assert_relative_eq!(upper_critical(4, 0.5, 3.0).unwrap(), 2.0);
        assert_relative_eq!(lower_critical(3, 0.5, 2.0).unwrap(), 1.0);
        assert_relative_eq!(lower_critical(3, 0.0, 1.0).unwrap(), 5.0 / 3.0);
        assert_relative_eq!(lower_critical(6, 1.0, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn kernel_exponent_equal_to_dimension_is_rejected() {
        assert!(upper_critical(4, 0.0, 4.0).is_err());
        assert!(upper_critical(3, 2.0, 1.0).is_err());
        assert!(lower_critical(3, 0.0, 3.0).is_err());
    }

    #[test]
    fn validation_lists_violations() {
        assert_eq!(validate_params(&ProblemParams::subcritical(3, 0.0, 1.0, 2.0)), Ok(()));
        let err = validate_params(&ProblemParams::critical(3, 2.0, 1.0)).unwrap_err();
        assert_eq!(err, vec![Violation::WeightBudget]);
        assert_eq!(err[0].to_string(), "2α+μ ≤ N");
        let err = validate_params(&ProblemParams::subcritical(3, 0.0, 1.0, 5.0)).unwrap_err();
        assert_eq!(err, vec![Violation::AtOrAboveUpperCritical]);
        let err = validate_params(&ProblemParams::subcritical(2, -1.0, 3.0, 1.5)).unwrap_err();
        assert!(err.contains(&Violation::DimensionTooSmall));
        assert!(err.contains(&Violation::NegativeAlpha));
        assert!(err.contains(&Violation::KernelExponentRange));
    }

    #[test]
    fn existence_examples() {
        let v = |p| existence_verdict(&ProblemParams::subcritical(3, 0.0, 1.0, p)).unwrap();
        assert_eq!(v(2.0), Existence::Exists);
        assert_eq!(v(5.0), Existence::NonexistenceByPohozaev);
        assert_eq!(v(5.0 / 3.0), Existence::NonexistenceByPohozaev);
        assert!(existence_verdict(&ProblemParams::critical(3, 0.0, 1.0)).is_err());
    }

    #[test]
    fn regularity_examples() {
        let v = regularity_class(3, 0.5, 1.0).unwrap();
        assert_eq!(v.case_label, RegularityCase::C1);
        assert_relative_eq!(v.p_interval.lo, 3.0);
        assert!(v.p_interval.hi.is_infinite());
        assert_relative_eq!(v.q_interval.lo, 2.0);
        assert_relative_eq!(v.q_interval.hi, 6.0);

        let v = regularity_class(5, 0.0, 4.5).unwrap();
        assert_eq!(v.case_label, RegularityCase::C2);
        assert_relative_eq!(v.p_interval.lo, 5.0 / 3.0);
        assert_relative_eq!(v.p_interval.hi, 20.0);
        assert_relative_eq!(v.q_interval.lo, 4.0 / 3.0);
        assert_relative_eq!(v.q_interval.hi, 5.0);

        let v = regularity_class(7, 0.0, 3.0).unwrap();
        assert_eq!(v.case_label, RegularityCase::C3);
        assert_relative_eq!(v.p_interval.lo, 7.0 / 4.0);
        assert_relative_eq!(v.p_interval.hi, 7.0);
        assert_relative_eq!(v.q_interval.lo, 7.0 / 3.0);
        assert!(v.q_interval.hi.is_infinite());

        let v = regularity_class(10, 0.0, 5.0).unwrap();
        assert_eq!(v.case_label, RegularityCase::C4);
        assert!(v.q_interval.hi.is_infinite());
    }

    #[test]
    fn hls_examples() {
        let r = 6.0 / 5.0;
        assert!(hls_exponent_check(r, r, 0.0, 0.0, 1.0, 3));
        assert!(!hls_exponent_check(2.0, 2.0, 0.0, 0.0, 3.0, 3));
        assert!(!hls_exponent_check(1.0, 2.0, 0.0, 0.0, 1.0, 3));
    }

    #[test]
    fn bootstrap_examples() {
        let t = bootstrap_iteration(&ProblemParams::subcritical(3, 0.0, 1.0, 2.0)).unwrap();
        assert_eq!(t.steps, 0);
        assert_relative_eq!(t.radii[0], 3.0, max_relative = 1e-14);

        let t = bootstrap_iteration(&ProblemParams::subcritical(6, 0.0, 4.0, 1.9)).unwrap();
        assert_eq!(t.steps, 0);
        assert_relative_eq!(t.radii[0], 1.0 / ((1.0 / 3.0) * (1.0 - 1.0 / 1.9)), max_relative = 1e-14);

        assert!(bootstrap_iteration(&ProblemParams::subcritical(3, 0.0, 1.0, 5.0)).is_err());
    }

    #[test]
    fn decay_constant_examples() {
        let c = decay_constant(3, 0.0, 1.0).unwrap();
        assert_relative_eq!(c, (12.0 / (16.0 * PI * PI)).powf(0.1), max_relative = 1e-14);
        assert!((c - 0.7728).abs() < 5e-5);
        assert_relative_eq!(decay_exponent(3), -0.5);
        // ω₃ = 2π², 2*_{0,2} = 3 in N = 4
        let c = decay_constant(4, 0.0, 2.0).unwrap();
        assert_relative_eq!(c, (64.0 / (4.0 * PI.powi(4))).powf(1.0 / 6.0), max_relative = 1e-14);
        assert!((c - 0.740_08).abs() < 1e-4);
        assert!(decay_constant(6, 0.0, 5.0).is_err());
        assert!(decay_constant_with(3, 0.0, 2.0, DecayConstantForm::Statement).is_err());
        let s = decay_constant_with(3, 0.0, 1.0, DecayConstantForm::Statement).unwrap();
        assert_relative_eq!(s, 18.0 / (16.0 * PI * PI), max_relative = 1e-14);
    }

    #[test]
    fn interval_serializes_infinity_as_string() {
        let v = OpenInterval { lo: 3.0, hi: f64::INFINITY };
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[3.0,"inf"]"#);
    }
}
