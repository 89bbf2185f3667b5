//! Narrow-band quadrature for integrals over implicitly defined curves and
//! surfaces on uniform Cartesian grids.
//!
//! A closed hypersurface is given as the zero level set of a function `phi`
//! sampled on the grid nodes of `[-1,1]^n`. Surface integrals are computed by
//! Riemann sums of `f(x) δ_ε(φ(x)) |∇φ(x)| h^n` where `δ_ε` is a compactly
//! supported one-sided averaging kernel with vanishing moments. With enough
//! vanishing moments the kernel averaging is exact for smooth surfaces, so the
//! computed error is pure discretization error; near corners and cusps the
//! error is governed by the kernel's moment count and the band width.
//!
//! The crate provides:
//!
//! - [`kernels`]: construction of the averaging kernels by solving weighted
//!   moment systems, reproducing the published coefficient sets.
//! - [`geometry`]: analytic level-set fields (circle, cusped star, ℓ1 balls,
//!   powers of distance), test integrands, and closest-point projection.
//! - [`grid`]: node iteration over `[-1,1]^n` (optionally padded), narrow-band
//!   filtering, and deterministic compensated summation.
//! - [`redistance`]: first-order fast sweeping to build signed distance
//!   functions from grid-sampled level sets.
//! - [`quadrature`]: the band sums, epsilon policies, the level-set family
//!   integral `I(η)` and its polynomial / power-law fits.
//! - [`studies`]: pre-registered convergence experiments with CSV output,
//!   observed orders and exponential fits.

pub mod geometry;
pub mod grid;
pub mod kernels;
pub mod numerics;
pub mod quadrature;
pub mod redistance;
pub mod studies;

pub use geometry::{ImplicitField, Integrand, Point, ShapeDescriptor, ShapeKind};
pub use grid::{BandSide, CompensatedSum, GridSpec};
pub use kernels::{Kernel, WeightFamily};
pub use quadrature::{EpsilonPolicy, Integration, QuadratureJob, Side};
pub use studies::{ConvergenceReport, StudyId};

/// Runs `f` on a dedicated rayon pool with `workers` threads (0 = default).
///
/// Partitioning of band sums is fixed by the grid layout, not by the pool
/// size, so results are bit-identical for any worker count.
pub fn run_with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}
