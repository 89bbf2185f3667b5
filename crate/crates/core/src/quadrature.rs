//! Narrow-band Riemann sums for surface integrals, band-width policies, the
//! level-set family integral `I(η)` and fits of its η-dependence.
//!
//! The sum assembled by [`integrate`] is
//!
//! ```text
//! S_N = Σ_nodes f(x) · ε⁻¹ δ(±(φ(x) − η₀)/ε) · |∇φ(x)| · h^dim
//! ```
//!
//! with the sign chosen by the band side: the kernels are one-sided, so
//! `Side::Negative` negates the kernel argument (the inner band is sampled by
//! `δ(−φ/ε)`). A nonzero `shift` η₀ integrates over the η₀-level set.

use crate::geometry::{ImplicitField, Integrand, Point};
use crate::grid::{reduce_over_slabs, GridSpec};
use crate::kernels::Kernel;
use crate::numerics::least_squares;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("no grid node lies inside the active band (eps = {eps:.3e})")]
    EmptyBand { eps: f64 },
    #[error("integrand singular point {point:?} lies inside the active band and the kernel support reaches the level set (rho = 0)")]
    SingularOnBand { point: Point },
    #[error("epsilon policy produced a non-positive band width {0}")]
    InvalidEpsilon(f64),
    #[error("cannot parse epsilon policy {0:?}: expected `<const>`, `a*h^b` or `a*N^b`")]
    PolicyParse(String),
    #[error("family fit is ill-conditioned")]
    IllConditionedFit,
    #[error("family fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Band side relative to the zero level set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Sample `φ − η₀ ∈ [ρε, ε]` (outer band for the sign convention here).
    Positive,
    /// Sample `φ − η₀ ∈ [−ε, −ρε]` by negating the kernel argument.
    Negative,
}

impl Side {
    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "positive" | "+" => Some(Side::Positive),
            "negative" | "-" => Some(Side::Negative),
            _ => None,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

/// How the band width ε is derived from the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy {
    Constant(f64),
    /// `ε = a · h^alpha`
    PowerOfH {
        a: f64,
        alpha: f64,
    },
    /// `ε = a · N^beta`
    PowerOfN {
        a: f64,
        beta: f64,
    },
}

impl EpsilonPolicy {
    pub fn eval(&self, grid: &GridSpec) -> Result<f64, QuadratureError> {
        let eps = match *self {
            EpsilonPolicy::Constant(c) => c,
            EpsilonPolicy::PowerOfH { a, alpha } => a * grid.spacing().powf(alpha),
            EpsilonPolicy::PowerOfN { a, beta } => a * (grid.n_cells as f64).powf(beta),
        };
        if eps.is_nan() || eps <= 0.0 || !eps.is_finite() {
            return Err(QuadratureError::InvalidEpsilon(eps));
        }
        Ok(eps)
    }

    /// Parses the micro-grammar `const | a*h^b | a*N^b`.
    pub fn parse(s: &str) -> Result<EpsilonPolicy, QuadratureError> {
        let text = s.trim();
        if let Ok(c) = text.parse::<f64>() {
            return Ok(EpsilonPolicy::Constant(c));
        }
        let bad = || QuadratureError::PolicyParse(s.to_string());
        let (lhs, rhs) = text.split_once('*').ok_or_else(bad)?;
        let a: f64 = lhs.trim().parse().map_err(|_| bad())?;
        let rhs = rhs.trim();
        let (var, expo) = match rhs.split_once('^') {
            Some((v, e)) => (v.trim(), e.trim().parse::<f64>().map_err(|_| bad())?),
            None => (rhs, 1.0),
        };
        match var {
            "h" => Ok(EpsilonPolicy::PowerOfH { a, alpha: expo }),
            "N" | "n" => Ok(EpsilonPolicy::PowerOfN { a, beta: expo }),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for EpsilonPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            EpsilonPolicy::Constant(c) => write!(f, "{c}"),
            EpsilonPolicy::PowerOfH { a, alpha } => write!(f, "{a}*h^{alpha}"),
            EpsilonPolicy::PowerOfN { a, beta } => write!(f, "{a}*N^{beta}"),
        }
    }
}

/// One narrow-band integration task.
#[derive(Debug, Clone)]
pub struct QuadratureJob {
    pub field: ImplicitField,
    pub integrand: Integrand,
    pub kernel: Kernel,
    pub policy: EpsilonPolicy,
    pub grid: GridSpec,
    pub side: Side,
    /// η₀: integrate over the η₀-level set by substituting φ − η₀.
    pub shift: f64,
}

/// Result of one band sum.
#[derive(Debug, Clone, Copy)]
pub struct Integration {
    pub value: f64,
    pub eps: f64,
    pub band_count: u64,
    pub seconds: f64,
    /// ε below 2h: the band is unresolved by the grid (warning, not an error).
    pub under_resolved: bool,
}

/// Assembles the band Riemann sum `S_N` for `job`.
pub fn integrate(job: &QuadratureJob) -> Result<Integration, QuadratureError> {
    let grid = &job.grid;
    assert_eq!(grid.dim, job.field.dim, "grid and field dimension mismatch");
    let eps = job.policy.eval(grid)?;
    let h = grid.spacing();
    let rho = job.kernel.support_lo;
    let sign = job.side.sign();

    // A flagged singular point inside the band is only integrable when the
    // kernel support stays away from the level set (rho > 0).
    if rho == 0.0 {
        for &c in &job.integrand.singular_points {
            let arg = sign * (job.field.phi(c) - job.shift) / eps;
            if (0.0..=1.0).contains(&arg) {
                return Err(QuadratureError::SingularOnBand { point: c });
            }
        }
    }

    let element = h.powi(grid.dim as i32);
    let field = &job.field;
    let integrand = &job.integrand;
    let kernel = &job.kernel;
    let shift = job.shift;

    let start = Instant::now();
    let (value, band_count) = reduce_over_slabs(grid, |p: Point| {
        let arg = sign * (field.phi(p) - shift) / eps;
        if arg < rho || arg > 1.0 {
            return None;
        }
        let delta = kernel.eval(arg) / eps;
        Some(integrand.eval(p) * delta * field.grad_norm(p) * element)
    });
    let seconds = start.elapsed().as_secs_f64();

    if band_count == 0 {
        return Err(QuadratureError::EmptyBand { eps });
    }
    Ok(Integration {
        value,
        eps,
        band_count,
        seconds,
        under_resolved: eps < 2.0 * h,
    })
}

/// Estimates the family integral `I(η) = ∫_{Γ_η} f dS` with a small probe
/// band around the η-level set.
///
/// With `side = None` the estimate is symmetrized (average of the two sides),
/// appropriate for smooth fields; passing a side probes one-sided behavior,
/// e.g. approaching a cusp from inside.
pub fn family_integral(
    grid: &GridSpec,
    field: &ImplicitField,
    integrand: &Integrand,
    probe_kernel: &Kernel,
    eps_probe: f64,
    eta: f64,
    side: Option<Side>,
) -> Result<f64, QuadratureError> {
    if eps_probe.is_nan() || eps_probe <= 0.0 {
        return Err(QuadratureError::InvalidEpsilon(eps_probe));
    }
    let one = |s: Side| {
        integrate(&QuadratureJob {
            field: field.clone(),
            integrand: integrand.clone(),
            kernel: probe_kernel.clone(),
            policy: EpsilonPolicy::Constant(eps_probe),
            grid: *grid,
            side: s,
            shift: eta,
        })
    };
    match side {
        Some(s) => Ok(one(s)?.value),
        None => {
            let plus = one(Side::Positive)?.value;
            let minus = one(Side::Negative)?.value;
            Ok(0.5 * (plus + minus))
        }
    }
}

/// Default probe for [`family_integral`]: two vanishing moments make it exact
/// on fields whose family integral is polynomial of degree ≤ 2.
pub fn default_probe_kernel() -> Kernel {
    Kernel::c_inf_2()
}

/// Default probe band width: four grid cells.
pub fn default_probe_eps(grid: &GridSpec) -> f64 {
    4.0 * grid.spacing()
}

/// Model used by [`fit_family`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    Polynomial(usize),
    PowerLaw,
}

/// Fit of `I(η)` samples: polynomial coefficients (constant first), or
/// `I₀ + c·η^β` with the exponent of the leading non-constant term.
#[derive(Debug, Clone)]
pub struct FamilyFit {
    pub model: FitModel,
    pub coeffs: Vec<f64>,
    pub exponent: Option<f64>,
    pub max_residual: f64,
}

/// Samples of the family integral together with an optional fit.
#[derive(Debug, Clone)]
pub struct FamilyIntegralSamples {
    pub etas: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: Option<FamilyFit>,
}

/// Least-squares fit of family-integral samples.
///
/// `Polynomial(deg)` needs at least `deg + 2` samples. `PowerLaw` needs at
/// least 4 samples at strictly positive η spanning at least a factor 4 (the
/// three-parameter model `I₀ + c·η^β` is degenerate on narrow ranges); the
/// exponent is located by a residual scan over β with a parabolic refinement.
pub fn fit_family(
    etas: &[f64],
    values: &[f64],
    model: FitModel,
) -> Result<FamilyFit, QuadratureError> {
    assert_eq!(etas.len(), values.len());
    match model {
        FitModel::Polynomial(deg) => {
            if etas.len() < deg + 2 {
                return Err(QuadratureError::TooFewSamples {
                    needed: deg + 2,
                    got: etas.len(),
                });
            }
            let basis: Vec<Box<dyn Fn(f64) -> f64>> = (0..=deg)
                .map(|k| {
                    let k = k as i32;
                    Box::new(move |x: f64| x.powi(k)) as Box<dyn Fn(f64) -> f64>
                })
                .collect();
            let refs: Vec<&dyn Fn(f64) -> f64> = basis.iter().map(|b| b.as_ref()).collect();
            let (coeffs, max_residual) =
                least_squares(etas, values, &refs).ok_or(QuadratureError::IllConditionedFit)?;
            Ok(FamilyFit {
                model,
                coeffs,
                exponent: None,
                max_residual,
            })
        }
        FitModel::PowerLaw => {
            if etas.len() < 4 {
                return Err(QuadratureError::TooFewSamples {
                    needed: 4,
                    got: etas.len(),
                });
            }
            if etas.iter().any(|&e| e <= 0.0) {
                return Err(QuadratureError::IllConditionedFit);
            }
            let lo = etas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = etas.iter().cloned().fold(0.0f64, f64::max);
            if hi / lo < 4.0 {
                return Err(QuadratureError::IllConditionedFit);
            }
            let sq_residual = |beta: f64| -> Option<(f64, Vec<f64>)> {
                let pow = move |x: f64| x.powf(beta);
                let one = |_: f64| 1.0;
                let (coeffs, _) = least_squares(etas, values, &[&one, &pow])?;
                let ss: f64 = etas
                    .iter()
                    .zip(values)
                    .map(|(&e, &v)| {
                        let m = coeffs[0] + coeffs[1] * e.powf(beta);
                        (m - v) * (m - v)
                    })
                    .sum();
                Some((ss, coeffs))
            };
            let mut best: Option<(f64, f64, Vec<f64>)> = None;
            let mut beta = 0.02f64;
            while beta < 0.99 {
                if let Some((ss, coeffs)) = sq_residual(beta) {
                    if best.as_ref().is_none_or(|b| ss < b.0) {
                        best = Some((ss, beta, coeffs));
                    }
                }
                beta += 0.0025;
            }
            let (_, mut beta, _) = best.ok_or(QuadratureError::IllConditionedFit)?;
            // Parabolic refinement around the scan minimum.
            let mut step = 0.0025;
            for _ in 0..30 {
                let candidates = [beta - step, beta, beta + step];
                let mut local_best = beta;
                let mut local_ss = f64::INFINITY;
                for &b in &candidates {
                    if b <= 0.0 || b >= 1.0 {
                        continue;
                    }
                    if let Some((ss, _)) = sq_residual(b) {
                        if ss < local_ss {
                            local_ss = ss;
                            local_best = b;
                        }
                    }
                }
                if local_best == beta {
                    step *= 0.5;
                } else {
                    beta = local_best;
                }
            }
            let (_, coeffs) = sq_residual(beta).ok_or(QuadratureError::IllConditionedFit)?;
            let max_residual = etas
                .iter()
                .zip(values)
                .map(|(&e, &v)| (coeffs[0] + coeffs[1] * e.powf(beta) - v).abs())
                .fold(0.0, f64::max);
            Ok(FamilyFit {
                model,
                coeffs,
                exponent: Some(beta),
                max_residual,
            })
        }
    }
}
