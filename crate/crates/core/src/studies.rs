//! Pre-registered convergence experiments, order computation, exponential
//! fits, and CSV/summary reporting.
//!
//! Study definitions are plain data so the registry can be inspected and
//! diffed. Rows execute through [`crate::quadrature::integrate`]; a report
//! carries per-N errors, observed orders (`log₂(e_N / e_{2N})`) and an
//! optional least-squares exponential fit `e ≈ C·α^N`.

use crate::geometry::{
    cusp_star_offset_length, diamond_inverse_sqrt_reference, make_integrand, IntegrandKind,
    ShapeDescriptor, ShapeKind,
};
use crate::grid::GridSpec;
use crate::kernels::{build_kernel, Kernel, KernelError, WeightFamily};
use crate::quadrature::{integrate, EpsilonPolicy, QuadratureError, QuadratureJob, Side};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("N = {0} exceeds the 3D resource cap of 800")]
    ResourceCap(usize),
    #[error(
        "this study needs the band-width constant a0; run the calibration helper or pass --a0"
    )]
    MissingA0,
    #[error("exponential fit failed: {0}")]
    FitFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyId {
    Table1,
    LipschitzCircle,
    Table2,
    Table3,
    Table4,
    Table5,
}

impl StudyId {
    pub fn parse(s: &str) -> Option<StudyId> {
        match s {
            "table1" => Some(StudyId::Table1),
            "lipschitz-circle" => Some(StudyId::LipschitzCircle),
            "table2" => Some(StudyId::Table2),
            "table3" => Some(StudyId::Table3),
            "table4" => Some(StudyId::Table4),
            "table5" => Some(StudyId::Table5),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StudyId::Table1 => "table1",
            StudyId::LipschitzCircle => "lipschitz-circle",
            StudyId::Table2 => "table2",
            StudyId::Table3 => "table3",
            StudyId::Table4 => "table4",
            StudyId::Table5 => "table5",
        }
    }

    pub fn all() -> &'static [StudyId] {
        &[
            StudyId::Table1,
            StudyId::LipschitzCircle,
            StudyId::Table2,
            StudyId::Table3,
            StudyId::Table4,
            StudyId::Table5,
        ]
    }
}

/// How a series derives its band width.
#[derive(Debug, Clone, Copy)]
pub enum PolicyDef {
    Fixed(EpsilonPolicy),
    /// `ε = a0^a0_exp · N^beta`, with a0 supplied at run time.
    A0PowerOfN {
        a0_exp: i32,
        beta: f64,
    },
}

/// Extra node layers so the whole band stays on the lattice even where the
/// level set touches the box boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadRule {
    None,
    /// Band reach in coordinates equals ε.
    BandReach,
    /// Band reach is √ε (level value is a squared distance).
    SqrtBandReach,
}

/// Reference value for the relative errors of a series.
#[derive(Debug, Clone, Copy)]
pub enum RefKind {
    /// Closed-form measure of the shape's zero level set.
    ShapeMeasure,
    /// Length of the star's inward offset curve at the given depth.
    OffsetStar { delta: f64 },
    /// `r₀·π²`: the sawtooth integrand integrated over the circle.
    SawtoothCircle,
    /// 1D arclength oracle for the singular diamond integral.
    DiamondInverseSqrt,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelDef {
    pub family: WeightFamily,
    pub moments: usize,
    pub rho: f64,
}

impl KernelDef {
    fn build(&self) -> Result<Kernel, KernelError> {
        build_kernel(self.family, self.moments, self.rho)
    }
}

/// One kernel/shape/policy combination within a study.
#[derive(Debug, Clone)]
pub struct SeriesDef {
    pub label: &'static str,
    pub shape: ShapeDescriptor,
    pub integrand: IntegrandKind,
    pub kernel: KernelDef,
    pub policy: PolicyDef,
    pub side: Side,
    pub shift: f64,
    pub pad: PadRule,
    pub reference: RefKind,
}

/// A full study: ladder of N plus one or more series.
#[derive(Debug, Clone)]
pub struct StudyDef {
    pub id: StudyId,
    pub ladder: &'static [usize],
    pub series: Vec<SeriesDef>,
    pub needs_a0: bool,
    /// Whether an exponential fit is part of the report.
    pub fit_exponential: bool,
}

const DINF1: KernelDef = KernelDef {
    family: WeightFamily::Bump,
    moments: 1,
    rho: 0.0,
};
const DINF2: KernelDef = KernelDef {
    family: WeightFamily::Bump,
    moments: 2,
    rho: 0.0,
};
const DSHIFT: KernelDef = KernelDef {
    family: WeightFamily::ShiftedBump,
    moments: 1,
    rho: 0.1,
};

fn circle_quadratic() -> ShapeDescriptor {
    ShapeDescriptor {
        kind: ShapeKind::CircleQuadratic,
        r0: 0.501,
        power: 1,
        signed: false,
    }
}

fn circle_sdf() -> ShapeDescriptor {
    ShapeDescriptor {
        kind: ShapeKind::CircleSdf,
        r0: 0.501,
        power: 1,
        signed: false,
    }
}

fn cusp_star() -> ShapeDescriptor {
    ShapeDescriptor {
        kind: ShapeKind::CuspStarSdf,
        r0: 0.75,
        power: 1,
        signed: false,
    }
}

/// The declarative registry of all pre-registered experiments.
pub fn study_def(id: StudyId) -> StudyDef {
    match id {
        StudyId::Table1 => {
            let one_moment = SeriesDef {
                label: "dinf1",
                shape: circle_quadratic(),
                integrand: IntegrandKind::ConstantOne,
                kernel: DINF1,
                policy: PolicyDef::Fixed(EpsilonPolicy::PowerOfH { a: 2.0, alpha: 0.5 }),
                side: Side::Positive,
                shift: 0.0,
                pad: PadRule::None,
                reference: RefKind::ShapeMeasure,
            };
            let two_moments = SeriesDef {
                label: "dinf2",
                kernel: DINF2,
                ..one_moment.clone()
            };
            StudyDef {
                id,
                ladder: &[100, 200, 400, 800, 1600, 3200],
                series: vec![one_moment, two_moments],
                needs_a0: false,
                fit_exponential: false,
            }
        }
        StudyId::LipschitzCircle => StudyDef {
            id,
            ladder: &[100, 200, 400, 800, 1600],
            series: vec![SeriesDef {
                label: "dinf2",
                shape: circle_sdf(),
                integrand: IntegrandKind::ThetaSawtooth,
                kernel: DINF2,
                policy: PolicyDef::Fixed(EpsilonPolicy::PowerOfN { a: 2.0, beta: -0.5 }),
                side: Side::Positive,
                shift: 0.0,
                pad: PadRule::None,
                reference: RefKind::SawtoothCircle,
            }],
            needs_a0: false,
            fit_exponential: true,
        },
        StudyId::Table2 => StudyDef {
            id,
            ladder: &[100, 200, 400, 800, 1600, 3200],
            series: vec![SeriesDef {
                label: "dinf1",
                shape: cusp_star(),
                integrand: IntegrandKind::ConstantOne,
                kernel: DINF1,
                policy: PolicyDef::Fixed(EpsilonPolicy::Constant(0.05)),
                side: Side::Positive,
                shift: 0.0,
                pad: PadRule::None,
                reference: RefKind::ShapeMeasure,
            }],
            needs_a0: false,
            fit_exponential: true,
        },
        StudyId::Table3 => StudyDef {
            id,
            ladder: &[100, 200, 400, 800, 1600, 3200],
            series: vec![SeriesDef {
                label: "dinf2",
                shape: cusp_star(),
                integrand: IntegrandKind::ConstantOne,
                kernel: DINF2,
                policy: PolicyDef::Fixed(EpsilonPolicy::PowerOfN {
                    a: 3.4,
                    beta: -2.0 / 3.0,
                }),
                side: Side::Negative,
                shift: -0.05,
                pad: PadRule::None,
                reference: RefKind::OffsetStar { delta: 0.05 },
            }],
            needs_a0: false,
            fit_exponential: false,
        },
        StudyId::Table4 => StudyDef {
            id,
            ladder: &[100, 200, 400, 800],
            series: vec![SeriesDef {
                label: "dinf2",
                shape: ShapeDescriptor {
                    kind: ShapeKind::L1Ball3D,
                    r0: 0.65,
                    power: 1,
                    signed: false,
                },
                integrand: IntegrandKind::ConstantOne,
                kernel: DINF2,
                policy: PolicyDef::Fixed(EpsilonPolicy::Constant(0.1)),
                side: Side::Positive,
                shift: 0.0,
                pad: PadRule::None,
                reference: RefKind::ShapeMeasure,
            }],
            needs_a0: false,
            fit_exponential: true,
        },
        StudyId::Table5 => StudyDef {
            id,
            ladder: &[200, 400, 800, 1600, 3200],
            series: vec![
                SeriesDef {
                    label: "phi1",
                    shape: ShapeDescriptor {
                        kind: ShapeKind::L1Ball2D,
                        r0: 1.0,
                        power: 1,
                        signed: false,
                    },
                    integrand: IntegrandKind::InverseSqrtAt([0.0, 1.0, 0.0]),
                    kernel: DSHIFT,
                    policy: PolicyDef::A0PowerOfN {
                        a0_exp: 1,
                        beta: -0.475,
                    },
                    side: Side::Positive,
                    shift: 0.0,
                    pad: PadRule::BandReach,
                    reference: RefKind::DiamondInverseSqrt,
                },
                SeriesDef {
                    label: "phi2",
                    shape: ShapeDescriptor {
                        kind: ShapeKind::SquaredL1,
                        r0: 1.0,
                        power: 1,
                        signed: false,
                    },
                    integrand: IntegrandKind::InverseSqrtAt([0.0, 1.0, 0.0]),
                    kernel: DSHIFT,
                    policy: PolicyDef::A0PowerOfN {
                        a0_exp: 2,
                        beta: -0.95,
                    },
                    side: Side::Positive,
                    shift: 0.0,
                    pad: PadRule::SqrtBandReach,
                    reference: RefKind::DiamondInverseSqrt,
                },
            ],
            needs_a0: true,
            fit_exponential: false,
        },
    }
}

/// Run-time knobs for a study.
#[derive(Debug, Clone, Copy, Default)]
pub struct StudyOverrides {
    /// Truncate the ladder at this N.
    pub max_n: Option<usize>,
    /// Band-width constant for the singular-integrand study.
    pub a0: Option<f64>,
    /// Allow the large 3D row (N = 800).
    pub with_large_3d: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub eps: f64,
    pub value: f64,
    pub reference: f64,
    pub rel_error: f64,
    pub observed_order: Option<f64>,
    pub band_count: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SeriesReport {
    pub label: String,
    pub rows: Vec<StudyRow>,
    /// `(C, α)` of the exponential fit when requested and well-formed.
    pub exponential_fit: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub id: StudyId,
    pub series: Vec<SeriesReport>,
}

/// Target for the a0 calibration: the φ⁽¹⁾ error at N = 200.
pub const TABLE5_CALIBRATION_TARGET: f64 = 1.01552e-2;
/// Bracket within which |rel err|(a0) at N = 200 increases monotonically in
/// the analytic-error-dominated regime.
pub const TABLE5_A0_BRACKET: (f64, f64) = (2.0, 3.2);

fn eval_policy(policy: PolicyDef, a0: Option<f64>, grid: &GridSpec) -> Result<f64, StudyError> {
    match policy {
        PolicyDef::Fixed(p) => Ok(p.eval(grid)?),
        PolicyDef::A0PowerOfN { a0_exp, beta } => {
            let a0 = a0.ok_or(StudyError::MissingA0)?;
            let eps = a0.powi(a0_exp) * (grid.n_cells as f64).powf(beta);
            if eps.is_nan() || eps <= 0.0 {
                return Err(StudyError::Quadrature(QuadratureError::InvalidEpsilon(eps)));
            }
            Ok(eps)
        }
    }
}

fn pad_for(rule: PadRule, eps: f64, h: f64) -> usize {
    let reach = match rule {
        PadRule::None => return 0,
        PadRule::BandReach => eps,
        PadRule::SqrtBandReach => eps.sqrt(),
    };
    (reach / h).ceil() as usize + 3
}

/// Executes one series row; used by both `run_study` and the calibration.
fn run_row(series: &SeriesDef, n: usize, a0: Option<f64>) -> Result<(StudyRow, f64), StudyError> {
    let base = GridSpec::new(series.shape.dim(), n);
    let eps = eval_policy(series.policy, a0, &base)?;
    let grid = base.with_padding(pad_for(series.pad, eps, base.spacing()));
    let field = series.shape.build()?;
    let integrand = make_integrand(series.integrand);
    let kernel = series.kernel.build()?;
    let reference = match series.reference {
        RefKind::ShapeMeasure => series.shape.reference_measure(),
        RefKind::OffsetStar { delta } => cusp_star_offset_length(series.shape.r0, delta),
        RefKind::SawtoothCircle => series.shape.r0 * std::f64::consts::PI * std::f64::consts::PI,
        RefKind::DiamondInverseSqrt => diamond_inverse_sqrt_reference(),
    };
    let out = integrate(&QuadratureJob {
        field,
        integrand,
        kernel,
        policy: EpsilonPolicy::Constant(eps),
        grid,
        side: series.side,
        shift: series.shift,
    })?;
    let rel_error = (out.value - reference).abs() / reference.abs();
    Ok((
        StudyRow {
            n,
            h: base.spacing(),
            eps,
            value: out.value,
            reference,
            rel_error,
            observed_order: None,
            band_count: out.band_count,
            seconds: out.seconds,
        },
        out.value,
    ))
}

/// Runs a named study and tabulates errors, orders and fits.
pub fn run_study(id: StudyId, overrides: &StudyOverrides) -> Result<ConvergenceReport, StudyError> {
    let def = study_def(id);
    if def.needs_a0 && overrides.a0.is_none() {
        return Err(StudyError::MissingA0);
    }
    let mut ladder: Vec<usize> = def.ladder.to_vec();
    if id == StudyId::Table4 && !overrides.with_large_3d {
        ladder.retain(|&n| n <= 400);
    }
    if let Some(max_n) = overrides.max_n {
        ladder.retain(|&n| n <= max_n);
    }
    for &n in &ladder {
        if def.series.iter().any(|s| s.shape.dim() == 3) && n > 800 {
            return Err(StudyError::ResourceCap(n));
        }
    }

    let mut series_reports = Vec::new();
    for series in &def.series {
        let mut rows = Vec::new();
        for &n in &ladder {
            let (row, _) = run_row(series, n, overrides.a0)?;
            rows.push(row);
        }
        let errors: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
        let orders = observed_orders(&errors, &ladder);
        for (row, order) in rows.iter_mut().skip(1).zip(orders) {
            row.observed_order = if order.is_nan() { None } else { Some(order) };
        }
        let exponential_fit = if def.fit_exponential {
            exponential_fit(&errors, &ladder).ok()
        } else {
            None
        };
        series_reports.push(SeriesReport {
            label: series.label.to_string(),
            rows,
            exponential_fit,
        });
    }
    Ok(ConvergenceReport {
        id,
        series: series_reports,
    })
}

/// Bisects a0 so that the φ⁽¹⁾ relative error at N = 200 matches the
/// published value, searching the analytic-regime bracket.
pub fn calibrate_a0() -> Result<f64, StudyError> {
    let def = study_def(StudyId::Table5);
    let series = &def.series[0];
    let err_at = |a0: f64| -> Result<f64, StudyError> {
        let (row, _) = run_row(series, 200, Some(a0))?;
        Ok(row.rel_error)
    };
    let (mut lo, mut hi) = TABLE5_A0_BRACKET;
    let (e_lo, e_hi) = (err_at(lo)?, err_at(hi)?);
    if !(e_lo <= TABLE5_CALIBRATION_TARGET && TABLE5_CALIBRATION_TARGET <= e_hi) {
        return Err(StudyError::FitFailed(format!(
            "calibration target {TABLE5_CALIBRATION_TARGET:.5e} not bracketed: \
             err({lo}) = {e_lo:.5e}, err({hi}) = {e_hi:.5e}"
        )));
    }
    for _ in 0..45 {
        let mid = 0.5 * (lo + hi);
        if err_at(mid)? < TABLE5_CALIBRATION_TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `order_i = log₂(e_i / e_{i+1})` between consecutive ladder entries.
///
/// The ladder must double strictly; zero or negative errors yield NaN rows.
pub fn observed_orders(errors: &[f64], ladder: &[usize]) -> Vec<f64> {
    assert_eq!(errors.len(), ladder.len());
    assert!(
        ladder.windows(2).all(|w| w[1] == 2 * w[0]),
        "ladder must double strictly"
    );
    errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 {
                (w[0] / w[1]).log2()
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Least-squares fit of `log e = log C + N·log α`.
///
/// Needs at least 3 positive errors; fails when the errors are non-monotone
/// beyond a factor-2 tolerance.
pub fn exponential_fit(errors: &[f64], ladder: &[usize]) -> Result<(f64, f64), StudyError> {
    let pairs: Vec<(f64, f64)> = ladder
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&n, &e)| (n as f64, e.ln()))
        .collect();
    if pairs.len() < 3 {
        return Err(StudyError::FitFailed(format!(
            "need at least 3 positive errors, got {}",
            pairs.len()
        )));
    }
    for w in errors.windows(2) {
        if w[0] > 0.0 && w[1] > 2.0 * w[0] {
            return Err(StudyError::FitFailed(format!(
                "errors increase from {:.3e} to {:.3e}",
                w[0], w[1]
            )));
        }
    }
    let m = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom == 0.0 {
        return Err(StudyError::FitFailed("degenerate ladder".into()));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    Ok((intercept.exp(), slope.exp()))
}

/// CSV schema version tag written as the first header comment.
pub const CSV_SCHEMA: &str = "levelquad csv v1";
pub const CSV_COLUMNS: &str = "N,h,eps,S_N,reference,rel_error,observed_order,band_count,wall_time";

/// Writes a report in the fixed CSV schema. With `timings` off (the default)
/// the wall_time column is all zeros so reruns are byte-identical.
pub fn write_csv(
    report: &ConvergenceReport,
    out: &mut dyn Write,
    timings: bool,
) -> std::io::Result<()> {
    writeln!(out, "# {CSV_SCHEMA}")?;
    writeln!(out, "# columns: {CSV_COLUMNS}")?;
    writeln!(out, "# study: {}", report.id.name())?;
    for series in &report.series {
        writeln!(out, "# series: {}", series.label)?;
        if let Some((c, alpha)) = series.exponential_fit {
            writeln!(out, "# exponential-fit: C={c:.6e} alpha={alpha:.6}")?;
        }
        for row in &series.rows {
            let order = row
                .observed_order
                .map(|o| format!("{o:.3}"))
                .unwrap_or_default();
            let wall = if timings {
                format!("{:.3}", row.seconds)
            } else {
                "0.000".to_string()
            };
            writeln!(
                out,
                "{},{:.9e},{:.9e},{:.16e},{:.16e},{:.5e},{},{},{}",
                row.n,
                row.h,
                row.eps,
                row.value,
                row.reference,
                row.rel_error,
                order,
                row.band_count,
                wall
            )?;
        }
    }
    Ok(())
}

/// Plain-text block mirroring the table layout of the convergence reports.
pub fn summary_text(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("study {}\n", report.id.name()));
    for series in &report.series {
        s.push_str(&format!(
            "series {} (reference {:.12e})\n",
            series.label,
            series.rows.first().map(|r| r.reference).unwrap_or(f64::NAN)
        ));
        let mut header = String::from("  N        ");
        let mut errs = String::from("  Rel. err ");
        let mut orders = String::from("  Order    ");
        for row in &series.rows {
            header.push_str(&format!("{:>12}", row.n));
            errs.push_str(&format!("{:>12.3e}", row.rel_error));
            match row.observed_order {
                Some(o) => orders.push_str(&format!("{o:>12.1}")),
                None => orders.push_str(&format!("{:>12}", "-")),
            }
        }
        s.push_str(&header);
        s.push('\n');
        s.push_str(&errs);
        s.push('\n');
        s.push_str(&orders);
        s.push('\n');
        if let Some((c, alpha)) = series.exponential_fit {
            s.push_str(&format!("  fit: {c:.4e} * {alpha:.4}^N\n"));
        }
    }
    s
}
