//! First-order fast sweeping: builds a signed distance grid from an arbitrary
//! grid-sampled level-set function.
//!
//! Interface-adjacent nodes are initialized by 1D linear interpolation of the
//! zero crossing along each axis (minimum over axes) and frozen; the rest is
//! filled by Gauss–Seidel sweeps over all `2^dim` axis orderings with the
//! Godunov upwind solve of `|∇d| = 1`. The magnitude at a node never
//! increases after initialization.

use crate::geometry::ImplicitField;
use crate::grid::GridSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RedistanceError {
    #[error("level set values have uniform sign: no interface to redistance")]
    NoInterface,
    #[error("fast sweeping did not converge: last max change {residual:.3e} > tol {tol:.3e}")]
    NotConverged { residual: f64, tol: f64 },
    #[error("expected {expected} node values, got {got}")]
    WrongSampleCount { expected: usize, got: usize },
}

/// Signed distance estimates on the nodes of `grid`.
#[derive(Debug, Clone)]
pub struct DistanceGrid {
    pub grid: GridSpec,
    /// Signed distances, lexicographic node order.
    pub values: Vec<f64>,
    /// Interface-adjacent nodes initialized directly; never updated by sweeps.
    pub frozen: Vec<bool>,
}

/// Outcome of [`fast_sweep`].
#[derive(Debug, Clone, Copy)]
pub struct SweepStats {
    pub rounds: usize,
    pub max_change: f64,
}

/// Default tolerance: 1e-12 times the domain diameter.
pub fn default_tolerance(dim: usize) -> f64 {
    1e-12 * 2.0 * (dim as f64).sqrt()
}

pub const DEFAULT_MAX_ROUNDS: usize = 50;

/// Initializes interface-adjacent distances from node samples of φ.
///
/// For a node whose sign differs from an axis neighbor, the zero crossing is
/// placed by 1D linear interpolation: `dᵢ = h·|φ|/|φ − φ_nb|` along that axis
/// (nearer crossing per axis). Axes with crossings combine to the distance of
/// the plane through the crossings, `d = (Σ dᵢ⁻²)^{-1/2}`, never larger than
/// the per-axis minimum. Where the interface is oblique and crosses only one
/// axis within a cell that estimate is still first-order, so the node also
/// takes `|φ|/‖∇φ‖` (central differences) when the sampled gradient is usable;
/// the smaller of the two is kept — second-order at smooth interfaces. The
/// node is frozen; exact zeros freeze at distance 0.
pub fn initialize_interface(
    grid: &GridSpec,
    phi_samples: &[f64],
) -> Result<DistanceGrid, RedistanceError> {
    assert_eq!(grid.pad_cells, 0, "redistancing uses unpadded grids");
    let expected = grid.node_count();
    if phi_samples.len() != expected {
        return Err(RedistanceError::WrongSampleCount {
            expected,
            got: phi_samples.len(),
        });
    }
    let has_pos = phi_samples.iter().any(|&v| v > 0.0);
    let has_neg = phi_samples.iter().any(|&v| v < 0.0);
    let has_zero = phi_samples.contains(&0.0);
    if !(has_pos && has_neg || has_zero) {
        return Err(RedistanceError::NoInterface);
    }

    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let mut values = vec![f64::INFINITY; expected];
    let mut frozen = vec![false; expected];

    let strides: Vec<usize> = if grid.dim == 2 {
        vec![n, 1]
    } else {
        vec![n * n, n, 1]
    };
    for idx in 0..expected {
        let v = phi_samples[idx];
        if v == 0.0 {
            values[idx] = 0.0;
            frozen[idx] = true;
            continue;
        }
        let mut inv_sq = 0.0f64;
        let mut grad_sq = 0.0f64;
        for (axis, &stride) in strides.iter().enumerate() {
            let coord = axis_index(idx, axis, n, grid.dim);
            let mut axis_dist = f64::INFINITY;
            let lo = if coord > 0 {
                phi_samples[idx - stride]
            } else {
                v
            };
            let hi = if coord + 1 < n {
                phi_samples[idx + stride]
            } else {
                v
            };
            if v * lo < 0.0 {
                axis_dist = axis_dist.min(h * v.abs() / (v - lo).abs());
            }
            if v * hi < 0.0 {
                axis_dist = axis_dist.min(h * v.abs() / (v - hi).abs());
            }
            if axis_dist.is_finite() {
                inv_sq += 1.0 / (axis_dist * axis_dist);
            }
            let g = (hi - lo) / (2.0 * h)
                * if coord == 0 || coord + 1 == n {
                    2.0
                } else {
                    1.0
                };
            grad_sq += g * g;
        }
        if inv_sq > 0.0 {
            let mut d = 1.0 / inv_sq.sqrt();
            if grad_sq > 1e-28 {
                d = d.min(v.abs() / grad_sq.sqrt());
            }
            values[idx] = d.copysign(v);
            frozen[idx] = true;
        } else {
            values[idx] = f64::INFINITY.copysign(v);
        }
    }
    Ok(DistanceGrid {
        grid: *grid,
        values,
        frozen,
    })
}

#[inline]
fn axis_index(flat: usize, axis: usize, n: usize, dim: usize) -> usize {
    if dim == 2 {
        match axis {
            0 => flat / n,
            _ => flat % n,
        }
    } else {
        match axis {
            0 => flat / (n * n),
            1 => (flat / n) % n,
            _ => flat % n,
        }
    }
}

/// Godunov upwind solve of `|∇d| = 1` from the sorted neighbor minima.
fn godunov_update(mut a: f64, mut b: f64, c: Option<f64>, h: f64) -> f64 {
    if let Some(cv) = c {
        // Sort the three values ascending.
        let mut v = [a, b, cv];
        v.sort_by(|x, y| x.total_cmp(y));
        let [a3, b3, c3] = v;
        if !a3.is_finite() {
            return f64::INFINITY;
        }
        let u1 = a3 + h;
        if u1 <= b3 {
            return u1;
        }
        let u2 = 0.5 * (a3 + b3 + (2.0 * h * h - (a3 - b3) * (a3 - b3)).sqrt());
        if u2 <= c3 {
            return u2;
        }
        let s = a3 + b3 + c3;
        return (s + (s * s - 3.0 * (a3 * a3 + b3 * b3 + c3 * c3 - h * h)).sqrt()) / 3.0;
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if !a.is_finite() {
        return f64::INFINITY;
    }
    if b - a >= h || !b.is_finite() {
        a + h
    } else {
        0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
    }
}

/// Gauss–Seidel sweeps in all `2^dim` axis orderings until the max node
/// change per round drops to `tol` or `max_rounds` is exhausted.
pub fn fast_sweep(
    dg: &mut DistanceGrid,
    max_rounds: usize,
    tol: f64,
) -> Result<SweepStats, RedistanceError> {
    let grid = dg.grid;
    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let dim = grid.dim;
    let total = grid.node_count();

    let mut magnitude: Vec<f64> = dg.values.iter().map(|v| v.abs()).collect();
    let signs: Vec<f64> = dg.values.iter().map(|v| sign_of(*v)).collect();

    let strides: Vec<usize> = if dim == 2 {
        vec![n, 1]
    } else {
        vec![n * n, n, 1]
    };

    let mut last_change = f64::INFINITY;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let mut max_change = 0.0f64;
        for ordering in 0..(1usize << dim) {
            for seq in 0..total {
                let idx = ordered_index(seq, ordering, n, dim);
                if dg.frozen[idx] {
                    continue;
                }
                let mut mins = [f64::INFINITY; 3];
                for (axis, &stride) in strides.iter().enumerate() {
                    let coord = axis_index(idx, axis, n, dim);
                    let mut m = f64::INFINITY;
                    if coord > 0 {
                        m = m.min(magnitude[idx - stride]);
                    }
                    if coord + 1 < n {
                        m = m.min(magnitude[idx + stride]);
                    }
                    mins[axis] = m;
                }
                let update = if dim == 2 {
                    godunov_update(mins[0], mins[1], None, h)
                } else {
                    godunov_update(mins[0], mins[1], Some(mins[2]), h)
                };
                if update < magnitude[idx] {
                    let change = if magnitude[idx].is_finite() {
                        magnitude[idx] - update
                    } else {
                        f64::INFINITY
                    };
                    max_change = max_change.max(change);
                    magnitude[idx] = update;
                }
            }
        }
        last_change = max_change;
        if max_change <= tol {
            break;
        }
    }

    for i in 0..total {
        if !dg.frozen[i] {
            dg.values[i] = magnitude[i] * signs[i];
        }
    }
    if last_change > tol {
        return Err(RedistanceError::NotConverged {
            residual: last_change,
            tol,
        });
    }
    Ok(SweepStats {
        rounds,
        max_change: last_change,
    })
}

fn sign_of(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Maps a sweep sequence number to a flat index under one of the `2^dim`
/// axis-direction orderings (bit k set = axis k descends).
#[inline]
fn ordered_index(seq: usize, ordering: usize, n: usize, dim: usize) -> usize {
    if dim == 2 {
        let i = seq / n;
        let j = seq % n;
        let i = if ordering & 1 != 0 { n - 1 - i } else { i };
        let j = if ordering & 2 != 0 { n - 1 - j } else { j };
        i * n + j
    } else {
        let i = seq / (n * n);
        let r = seq % (n * n);
        let j = r / n;
        let k = r % n;
        let i = if ordering & 1 != 0 { n - 1 - i } else { i };
        let j = if ordering & 2 != 0 { n - 1 - j } else { j };
        let k = if ordering & 4 != 0 { n - 1 - k } else { k };
        i * n * n + j * n + k
    }
}

impl DistanceGrid {
    /// Wraps the node distances as an implicit field (multilinear
    /// interpolation between nodes, exact at nodes) with `|∇d| ≡ 1`.
    pub fn as_field(&self) -> ImplicitField {
        let grid = self.grid;
        let values = std::sync::Arc::new(self.values.clone());
        let n = grid.nodes_per_axis();
        let h = grid.spacing();
        let dim = grid.dim;
        ImplicitField::new(
            dim,
            true,
            move |p| {
                let idx = |x: f64| -> (usize, f64) {
                    let t = (x + 1.0) / h;
                    let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
                    (i, (t - i as f64).clamp(0.0, 1.0))
                };
                let (i, fx) = idx(p[0]);
                let (j, fy) = idx(p[1]);
                if dim == 2 {
                    let at = |a: usize, b: usize| values[a * n + b];
                    let v0 = at(i, j) * (1.0 - fy) + at(i, j + 1) * fy;
                    let v1 = at(i + 1, j) * (1.0 - fy) + at(i + 1, j + 1) * fy;
                    v0 * (1.0 - fx) + v1 * fx
                } else {
                    let (k, fz) = idx(p[2]);
                    let at = |a: usize, b: usize, c: usize| values[a * n * n + b * n + c];
                    let lerp = |u: f64, v: f64, t: f64| u * (1.0 - t) + v * t;
                    let v00 = lerp(at(i, j, k), at(i, j, k + 1), fz);
                    let v01 = lerp(at(i, j + 1, k), at(i, j + 1, k + 1), fz);
                    let v10 = lerp(at(i + 1, j, k), at(i + 1, j, k + 1), fz);
                    let v11 = lerp(at(i + 1, j + 1, k), at(i + 1, j + 1, k + 1), fz);
                    lerp(lerp(v00, v01, fy), lerp(v10, v11, fy), fx)
                }
            },
            |_| 1.0,
        )
    }
}

/// Samples a field on the grid nodes in lexicographic order.
pub fn sample_field(grid: &GridSpec, field: &ImplicitField) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    for slab in 0..grid.slab_count() {
        grid.for_each_in_slab(slab, |idx, p| out[idx] = field.phi(p));
    }
    out
}
