//! Compactly supported averaging kernels with vanishing moments.
//!
//! A kernel is `δ(r) = w(r)·q(r)` on `[ρ, 1]`, where `w` is a smooth weight
//! and `q` a polynomial of degree `m` chosen so that
//!
//! ```text
//! ∫₀¹ δ(r) dr = 1,     ∫₀¹ δ(r) rᵖ dr = 0   for p = 1..m.
//! ```
//!
//! The `m+1` coefficients solve the (m+1)×(m+1) system with entries
//! `M_{p+q} = ∫ρ¹ w(r) r^{p+q} dr`. The scaled kernel `ε⁻¹δ(η/ε)` is
//! one-sided: only the band `η ∈ [ρε, ε]` contributes, and the sign of the
//! argument passed by the caller selects which side of the interface is used.

use crate::numerics::{composite_gauss_legendre, solve_dense};
use thiserror::Error;

/// Panels × nodes of the composite Gauss–Legendre rule used to build the
/// moment matrices. The weights vanish to all orders at the support ends, so
/// this converges well past the 1e-10 construction target.
const MOMENT_GL_NODES: usize = 64;
const MOMENT_GL_PANELS: usize = 8;

/// Exponents below this evaluate to zero: `exp(-700)` is already below the
/// smallest normal f64 after multiplication by any coefficient in use.
const EXPONENT_FLOOR: f64 = -700.0;

const CONDITION_LIMIT: f64 = 1e12;

/// The smooth weight inside the kernel product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFamily {
    /// `w(r) = exp(2/((2r−1)²−1))` on (0,1); zero outside.
    Bump,
    /// `w(r) = exp(1/(2(r−ρ)(r−1)))` on (ρ,1); zero outside. Vanishes to all
    /// orders at both support ends, so the kernel is C\u{221E}.
    ShiftedBump,
}

impl WeightFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bump" => Some(WeightFamily::Bump),
            "shifted" | "shifted-bump" => Some(WeightFamily::ShiftedBump),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightFamily::Bump => "bump",
            WeightFamily::ShiftedBump => "shifted",
        }
    }
}

/// Evaluates the weight of `family` with lower support bound `support_lo`.
///
/// Total function: returns exactly 0 outside the support and never overflows
/// (the exponent is clamped where the analytic limit is 0).
pub fn weight_eval(family: WeightFamily, support_lo: f64, r: f64) -> f64 {
    match family {
        WeightFamily::Bump => {
            if r <= 0.0 || r >= 1.0 {
                return 0.0;
            }
            let t = (2.0 * r - 1.0) * (2.0 * r - 1.0) - 1.0;
            let e = 2.0 / t;
            if e <= EXPONENT_FLOOR {
                0.0
            } else {
                e.exp()
            }
        }
        WeightFamily::ShiftedBump => {
            if r <= support_lo || r >= 1.0 {
                return 0.0;
            }
            let t = (r - support_lo) * (r - 1.0);
            let e = 0.5 / t;
            if e <= EXPONENT_FLOOR {
                0.0
            } else {
                e.exp()
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("vanishing moment count must be at least 1, got {0}")]
    InvalidMomentCount(usize),
    #[error("support_lo must lie in [0, 1), got {0}")]
    InvalidSupport(f64),
    #[error("moment system is numerically singular (condition estimate {condition:.3e})")]
    SingularMomentSystem { condition: f64 },
}

/// A constructed averaging kernel `δ(r) = w(r)·(c₀ + c₁ r + … + c_m r^m)`
/// supported on `[support_lo, 1]`, with `vanishing_moments` vanishing moments.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub family: WeightFamily,
    pub support_lo: f64,
    /// Polynomial coefficients, constant term first.
    pub coeffs: Vec<f64>,
    pub vanishing_moments: usize,
    /// `k` in `δ_ε(η) = O(ε^{-k})`; 1 under the `ε⁻¹δ(η/ε)` scaling.
    pub amplitude_exponent: usize,
    /// `‖Ax−b‖∞` of the solved moment system.
    pub residual: f64,
    /// Infinity-norm condition estimate of the moment matrix.
    pub condition: f64,
}

/// Builds the kernel of `family` with `m ≥ 1` vanishing moments supported on
/// `[rho, 1]` by solving the weighted moment system.
pub fn build_kernel(family: WeightFamily, m: usize, rho: f64) -> Result<Kernel, KernelError> {
    if m < 1 {
        return Err(KernelError::InvalidMomentCount(m));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(KernelError::InvalidSupport(rho));
    }
    let moments: Vec<f64> = (0..=2 * m)
        .map(|p| {
            composite_gauss_legendre(
                |r| weight_eval(family, rho, r) * r.powi(p as i32),
                rho,
                1.0,
                MOMENT_GL_NODES,
                MOMENT_GL_PANELS,
            )
        })
        .collect();
    let a: Vec<Vec<f64>> = (0..=m)
        .map(|p| (0..=m).map(|q| moments[p + q]).collect())
        .collect();
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    let solved = solve_dense(&a, &b).ok_or(KernelError::SingularMomentSystem {
        condition: f64::INFINITY,
    })?;
    if !solved.condition.is_finite() || solved.condition > CONDITION_LIMIT {
        return Err(KernelError::SingularMomentSystem {
            condition: solved.condition,
        });
    }
    Ok(Kernel {
        family,
        support_lo: rho,
        coeffs: solved.solution,
        vanishing_moments: m,
        amplitude_exponent: 1,
        residual: solved.residual,
        condition: solved.condition,
    })
}

impl Kernel {
    /// The kernel with one vanishing moment on `[0,1]` (bump weight).
    pub fn c_inf_1() -> Kernel {
        build_kernel(WeightFamily::Bump, 1, 0.0).expect("reference kernel")
    }

    /// The kernel with two vanishing moments on `[0,1]` (bump weight).
    pub fn c_inf_2() -> Kernel {
        build_kernel(WeightFamily::Bump, 2, 0.0).expect("reference kernel")
    }

    /// The singularity-avoiding kernel with one vanishing moment on [0.1, 1].
    pub fn shifted_01_1() -> Kernel {
        build_kernel(WeightFamily::ShiftedBump, 1, 0.1).expect("reference kernel")
    }

    /// Short label used in CSV series headers.
    pub fn label(&self) -> String {
        match self.family {
            WeightFamily::Bump => format!("dinf{}", self.vanishing_moments),
            WeightFamily::ShiftedBump => {
                format!("d{}inf{}", self.support_lo, self.vanishing_moments)
            }
        }
    }

    /// Pointwise value `w(r)·q(r)` inside `[support_lo, 1]`, exactly 0 outside.
    pub fn eval(&self, r: f64) -> f64 {
        if r < self.support_lo || r > 1.0 {
            return 0.0;
        }
        let w = weight_eval(self.family, self.support_lo, r);
        if w == 0.0 {
            return 0.0;
        }
        let mut q = 0.0;
        for &c in self.coeffs.iter().rev() {
            q = q * r + c;
        }
        w * q
    }

    /// `∫₀¹ δ(r) rᵖ dr` by the same rule used in construction.
    pub fn moment(&self, p: usize) -> f64 {
        composite_gauss_legendre(
            |r| self.eval(r) * r.powi(p as i32),
            self.support_lo,
            1.0,
            MOMENT_GL_NODES,
            MOMENT_GL_PANELS,
        )
    }

    /// Scaled evaluation `ε⁻¹ δ(η/ε)`.
    ///
    /// The kernels are one-sided (support in `[ρ, 1]` of the scaled argument);
    /// callers select the band side by the sign of `eta` they pass.
    pub fn eval_scaled(&self, eta: f64, eps: f64) -> f64 {
        debug_assert!(eps > 0.0);
        self.eval(eta / eps) / eps
    }
}
