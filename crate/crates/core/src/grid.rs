//! Uniform Cartesian node grids on `[-1,1]^n`, narrow-band filtering, and
//! deterministic compensated summation.
//!
//! Nodes sit at coordinates `i·h − 1` with `h = 2/N`, `i = 0..=N` per axis,
//! matching the sampling convention `φ_{i,j} = φ(ih−1, jh−1)`. A grid may be
//! padded: the index range extends symmetrically beyond `0..=N` (coordinates
//! keep the same formula), which covers bands that overhang the box — the
//! lattice sums conceptually run over all of `hZ^n`.
//!
//! Band sums are partitioned into one slab per outermost index. The partition
//! depends only on the grid layout, never on the worker count, and partial
//! sums are merged in ascending slab order, so results are bit-identical for
//! any parallelism.

use crate::geometry::{ImplicitField, Point};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("no grid node lies inside the requested band")]
    EmptyBand,
}

/// A uniform node grid over `[-1,1]^dim` with `n_cells` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub dim: usize,
    pub n_cells: usize,
    /// Extra node layers beyond each side of `0..=N`.
    pub pad_cells: usize,
}

/// Which side of the zero level set a band covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSide {
    /// `φ ∈ (0, ε]`
    Positive,
    /// `φ ∈ [−ε, 0)`
    Negative,
    /// `|φ| ≤ ε`
    Both,
}

/// A node yielded by band iteration.
#[derive(Debug, Clone, Copy)]
pub struct BandNode {
    /// Flat lexicographic node index over the padded grid.
    pub index: usize,
    pub point: Point,
    pub phi: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n_cells: usize) -> GridSpec {
        assert!(dim == 2 || dim == 3, "dim must be 2 or 3");
        assert!(n_cells >= 2);
        GridSpec {
            dim,
            n_cells,
            pad_cells: 0,
        }
    }

    pub fn with_padding(mut self, pad_cells: usize) -> GridSpec {
        self.pad_cells = pad_cells;
        self
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    /// Nodes per axis including padding.
    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.n_cells + 1 + 2 * self.pad_cells
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Coordinate of axis index `i` (`i` counts from the padded edge).
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.pad_cells as f64) * self.spacing() - 1.0
    }

    /// Point of a flat lexicographic node index.
    #[inline]
    pub fn point(&self, flat: usize) -> Point {
        let n = self.nodes_per_axis();
        if self.dim == 2 {
            let i = flat / n;
            let j = flat % n;
            [self.coord(i), self.coord(j), 0.0]
        } else {
            let i = flat / (n * n);
            let r = flat % (n * n);
            [self.coord(i), self.coord(r / n), self.coord(r % n)]
        }
    }

    /// Visits every node of one outer-index slab in lexicographic order.
    #[inline]
    pub fn for_each_in_slab(&self, slab: usize, mut visit: impl FnMut(usize, Point)) {
        let n = self.nodes_per_axis();
        let x = self.coord(slab);
        if self.dim == 2 {
            let base = slab * n;
            for j in 0..n {
                visit(base + j, [x, self.coord(j), 0.0]);
            }
        } else {
            let base = slab * n * n;
            for j in 0..n {
                let y = self.coord(j);
                for k in 0..n {
                    visit(base + j * n + k, [x, y, self.coord(k)]);
                }
            }
        }
    }

    pub fn slab_count(&self) -> usize {
        self.nodes_per_axis()
    }
}

/// Collects the nodes with `φ` inside the band, in lexicographic order.
///
/// `Positive` means `φ ∈ (0, ε]`, `Negative` `φ ∈ [−ε, 0)`, `Both` `|φ| ≤ ε`;
/// exact zeros belong to `Both` only. Fails with `EmptyBand` when no node
/// qualifies.
pub fn iterate_band(
    grid: &GridSpec,
    field: &ImplicitField,
    eps: f64,
    side: BandSide,
) -> Result<Vec<BandNode>, GridError> {
    assert!(eps > 0.0);
    let mut out = Vec::new();
    for slab in 0..grid.slab_count() {
        grid.for_each_in_slab(slab, |index, point| {
            let phi = field.phi(point);
            let inside = match side {
                BandSide::Positive => phi > 0.0 && phi <= eps,
                BandSide::Negative => phi < 0.0 && phi >= -eps,
                BandSide::Both => phi.abs() <= eps,
            };
            if inside {
                out.push(BandNode { index, point, phi });
            }
        });
    }
    if out.is_empty() {
        Err(GridError::EmptyBand)
    } else {
        Ok(out)
    }
}

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum in. Merging in a fixed order makes chunked
    /// accumulation independent of how chunks were scheduled.
    #[inline]
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.compensation += other.compensation;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a stream of terms.
pub fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Parallel slab-partitioned reduction over the whole grid.
///
/// `eval` maps a node to `Some(term)` when it lies in the active band (terms
/// of 0.0 still count as band nodes) and `None` otherwise. Each slab
/// accumulates its own compensated partial in lexicographic order; partials
/// are merged in ascending slab order. The partitioning is fixed by the grid,
/// never by the worker count, so the result is bit-identical for any
/// parallelism. Returns the sum and the number of band nodes.
pub fn reduce_over_slabs<F>(grid: &GridSpec, eval: F) -> (f64, u64)
where
    F: Fn(Point) -> Option<f64> + Sync,
{
    let partials: Vec<(CompensatedSum, u64)> = (0..grid.slab_count())
        .into_par_iter()
        .map(|slab| {
            let mut acc = CompensatedSum::new();
            let mut n = 0u64;
            grid.for_each_in_slab(slab, |_, p| {
                if let Some(t) = eval(p) {
                    n += 1;
                    acc.add(t);
                }
            });
            (acc, n)
        })
        .collect();
    let mut total = CompensatedSum::new();
    let mut nodes = 0u64;
    for (partial, n) in partials {
        total.merge(partial);
        nodes += n;
    }
    (total.value(), nodes)
}
