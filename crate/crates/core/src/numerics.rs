//! Small numerical building blocks: Gauss–Legendre quadrature, dense linear
//! solves with partial pivoting, and least-squares fitting.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Computed by Newton iteration on the Legendre polynomial recurrence; for the
/// orders used here (≤ 128) the nodes are accurate to a few ulps.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integration of `f` over `[a, b]` with
/// `subintervals` panels of an `n`-point rule each.
pub fn composite_gauss_legendre(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
    subintervals: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mut total = 0.0;
    let width = (b - a) / subintervals as f64;
    for k in 0..subintervals {
        let lo = a + width * k as f64;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            panel += w * f(mid + half * x);
        }
        total += panel * half;
    }
    total
}

/// Solution of a dense linear system by Gaussian elimination with partial
/// pivoting, together with the residual `‖Ax−b‖∞` and an estimate of the
/// infinity-norm condition number.
#[derive(Debug, Clone)]
pub struct SolvedSystem {
    pub solution: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

/// Solves `A x = b` (row-major `a`, square). Returns `None` when a pivot
/// underflows to zero.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<SolvedSystem> {
    let n = b.len();
    let x = eliminate(a, b)?;

    let mut residual = 0.0f64;
    for i in 0..n {
        let mut r = -b[i];
        for j in 0..n {
            r += a[i][j] * x[j];
        }
        residual = residual.max(r.abs());
    }

    // ‖A⁻¹‖∞ estimated column by column; the systems here are tiny.
    let mut inv_norm_rows = vec![0.0f64; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = eliminate(a, &e)?;
        for i in 0..n {
            inv_norm_rows[i] += col[i].abs();
        }
    }
    let inv_norm = inv_norm_rows.iter().cloned().fold(0.0, f64::max);
    let a_norm = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    Some(SolvedSystem {
        solution: x,
        residual,
        condition: a_norm * inv_norm,
    })
}

#[allow(clippy::needless_range_loop)] // two rows of `m` are live per update
fn eliminate(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.to_vec()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Least-squares fit of `y ≈ Σ c_k basis_k(x)` via normal equations.
/// Returns the coefficients and the maximum absolute residual.
pub fn least_squares(
    xs: &[f64],
    ys: &[f64],
    basis: &[&dyn Fn(f64) -> f64],
) -> Option<(Vec<f64>, f64)> {
    let n = basis.len();
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let row: Vec<f64> = basis.iter().map(|b| b(x)).collect();
        for (i, ri) in row.iter().enumerate() {
            for (j, rj) in row.iter().enumerate() {
                ata[i][j] += ri * rj;
            }
            atb[i] += ri * y;
        }
    }
    let solved = solve_dense(&ata, &atb)?;
    if !solved.condition.is_finite() || solved.condition > 1e14 {
        return None;
    }
    let coeffs = solved.solution;
    let mut max_res = 0.0f64;
    for (&x, &y) in xs.iter().zip(ys) {
        let model: f64 = basis.iter().zip(&coeffs).map(|(b, c)| c * b(x)).sum();
        max_res = max_res.max((model - y).abs());
    }
    Some((coeffs, max_res))
}
