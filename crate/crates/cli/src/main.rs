//! Command-line frontend: kernels, narrow-band integration jobs, convergence
//! studies, redistancing, and family-integral diagnostics.
//!
//! Exit codes: 0 ok, 1 numerical failure, 2 usage/validation error.
//!
//! Doc comments on the argument structs are clap help text, so they stay
//! plain strings rather than rustdoc markup.
#![allow(rustdoc::broken_intra_doc_links, rustdoc::invalid_html_tags)]

use clap::{Args, Parser, Subcommand};
use levelquad::geometry::{make_integrand, IntegrandKind, Point, ShapeDescriptor};
use levelquad::grid::GridSpec;
use levelquad::kernels::{build_kernel, Kernel, KernelError, WeightFamily};
use levelquad::quadrature::{
    family_integral, fit_family, integrate, EpsilonPolicy, FamilyIntegralSamples, FitModel,
    QuadratureJob, Side,
};
use levelquad::redistance::{self, fast_sweep, initialize_interface};
use levelquad::studies::{self, calibrate_a0, run_study, write_csv, StudyId, StudyOverrides};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "levelquad",
    version,
    about = "Integrals over implicitly defined curves and surfaces on uniform Cartesian grids",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an averaging kernel: print coefficients, residual and moments
    Kernel(KernelArgs),
    /// Run one narrow-band integration job (flags or config file)
    Integrate(IntegrateArgs),
    /// Run a pre-registered convergence study and write its CSV
    Study(StudyArgs),
    /// Redistance a grid-sampled level set by fast sweeping
    Sweep(SweepArgs),
    /// Sample the family integral I(eta) and fit its eta-dependence
    Family(FamilyArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// Weight family: bump | shifted
    #[arg(long)]
    family: String,
    /// Number of vanishing moments (>= 1)
    #[arg(long)]
    moments: usize,
    /// Lower support bound rho in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Write delta(r) samples to this CSV for plotting
    #[arg(long)]
    samples_csv: Option<PathBuf>,
    /// Number of samples for --samples-csv
    #[arg(long, default_value_t = 512)]
    resolution: usize,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Flat key=value config file (overridden by explicit flags)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shape name (see `--help` of `family` for the registry)
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    r0: Option<f64>,
    /// psi exponent for power-of-distance
    #[arg(long)]
    power: Option<u32>,
    /// signed variant for even power-of-distance exponents
    #[arg(long)]
    signed: bool,
    /// Kernel family: bump | shifted
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    moments: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Band-width policy: `<const>` | `a*h^b` | `a*N^b`
    #[arg(long)]
    eps: Option<String>,
    /// Cells per axis (repeatable via config key n_list)
    #[arg(long)]
    n: Option<usize>,
    /// Band side: positive | negative
    #[arg(long)]
    side: Option<String>,
    /// Level-set shift eta0
    #[arg(long, allow_negative_numbers = true)]
    shift: Option<f64>,
    /// Integrand: one | theta-sawtooth | inv-sqrt
    #[arg(long)]
    integrand: Option<String>,
    /// Singular point for inv-sqrt, as `x,y`
    #[arg(long, allow_hyphen_values = true)]
    sing_point: Option<String>,
    /// Reference value for the relative error (defaults to the shape's)
    #[arg(long, allow_negative_numbers = true)]
    reference: Option<f64>,
    /// Extra node layers beyond the box
    #[arg(long)]
    pad: Option<usize>,
    /// Append the CSV row(s) here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct StudyArgs {
    /// table1 | lipschitz-circle | table2 | table3 | table4 | table5
    id: String,
    /// Band-width constant for table5
    #[arg(long)]
    a0: Option<f64>,
    /// Calibrate a0 against the published N=200 error before running
    #[arg(long)]
    calibrate_a0: bool,
    /// Truncate the N ladder
    #[arg(long)]
    max_n: Option<usize>,
    /// Include the N=800 row of table4 (streaming, minutes of wall time)
    #[arg(long)]
    with_n800: bool,
    /// CSV output path (default: <id>.csv)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Record measured wall times in the CSV (breaks byte determinism)
    #[arg(long)]
    timings: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Input CSV with columns i,j[,k],phi
    #[arg(long)]
    input: PathBuf,
    /// Output CSV with columns i,j[,k],dist
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = redistance::DEFAULT_MAX_ROUNDS)]
    max_rounds: usize,
    /// Convergence tolerance (default: 1e-12 x domain diameter)
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct FamilyArgs {
    /// Shape name: circle-quadratic | circle-sdf | cusp-star | l1-2d | l1-3d | l1-squared | power-of-distance
    #[arg(long)]
    shape: String,
    #[arg(long, default_value_t = 0.501)]
    r0: f64,
    #[arg(long, default_value_t = 1)]
    power: u32,
    #[arg(long)]
    signed: bool,
    /// Comma-separated eta values
    #[arg(long, allow_hyphen_values = true)]
    etas: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Probe band width (default: 4h)
    #[arg(long)]
    eps_probe: Option<f64>,
    /// positive | negative | symmetrized
    #[arg(long, default_value = "symmetrized")]
    side: String,
    /// poly:<deg> | powerlaw | none
    #[arg(long, default_value = "none")]
    fit: String,
    /// Write the samples CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// Usage errors exit 2, numerical failures exit 1.
enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::SingularMomentSystem { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<levelquad::quadrature::QuadratureError> for CliError {
    fn from(e: levelquad::quadrature::QuadratureError) -> Self {
        use levelquad::quadrature::QuadratureError::*;
        match e {
            PolicyParse(_) | InvalidEpsilon(_) | TooFewSamples { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<studies::StudyError> for CliError {
    fn from(e: studies::StudyError) -> Self {
        use studies::StudyError::*;
        let msg = e.to_string();
        match e {
            MissingA0 | ResourceCap(_) => CliError::Usage(msg),
            Quadrature(q) => CliError::from(q),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<redistance::RedistanceError> for CliError {
    fn from(e: redistance::RedistanceError) -> Self {
        use redistance::RedistanceError::*;
        match e {
            WrongSampleCount { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kernel(args) => cmd_kernel(args),
        Command::Integrate(args) => cmd_integrate(args),
        Command::Study(args) => cmd_study(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Family(args) => cmd_family(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_family(name: &str) -> Result<WeightFamily, CliError> {
    WeightFamily::parse(name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown kernel family {name:?}: use bump | shifted"
        ))
    })
}

fn cmd_kernel(args: KernelArgs) -> Result<(), CliError> {
    let family = parse_family(&args.family)?;
    if args.moments < 1 {
        return Err(CliError::usage("--moments must be at least 1"));
    }
    let kernel = build_kernel(family, args.moments, args.rho)?;
    println!(
        "kernel {}: family {}, moments {}, support [{}, 1]",
        kernel.label(),
        kernel.family.name(),
        kernel.vanishing_moments,
        kernel.support_lo
    );
    println!("coefficients (constant term first):");
    let letters: &[&str] = match kernel.vanishing_moments {
        1 => &["b", "a"],
        2 => &["c", "b", "a"],
        _ => &[],
    };
    for (k, coeff) in kernel.coeffs.iter().enumerate() {
        if let Some(letter) = letters.get(k) {
            println!("  {letter} = c{k} = {coeff:.13}");
        } else {
            println!("  c{k} = {coeff:.13}");
        }
    }
    println!("moment-system residual: {:.3e}", kernel.residual);
    println!("moment-system condition estimate: {:.3e}", kernel.condition);
    println!("moments:");
    let max_p = (kernel.vanishing_moments + 2).min(8);
    for p in 0..=max_p {
        println!("  p={p}: {:+.12e}", kernel.moment(p));
    }
    if let Some(path) = args.samples_csv {
        if args.resolution < 2 {
            return Err(CliError::usage("--resolution must be at least 2"));
        }
        let mut out = String::from("r,delta\n");
        for k in 0..=args.resolution {
            let r = k as f64 / args.resolution as f64;
            let _ = writeln!(out, "{r:.8},{:.16e}", kernel.eval(r));
        }
        fs::write(&path, out)?;
        println!(
            "wrote {} samples to {}",
            args.resolution + 1,
            path.display()
        );
    }
    Ok(())
}

/// Flat `key = value` config subset: one pair per line, `#` comments,
/// optional double quotes around values; unknown keys are rejected.
fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    const KNOWN: &[&str] = &[
        "shape",
        "r0",
        "power",
        "signed",
        "kernel",
        "moments",
        "rho",
        "eps",
        "n",
        "n_list",
        "side",
        "shift",
        "integrand",
        "sing_point",
        "reference",
        "pad",
        "output",
        "workers",
    ];
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if !KNOWN.contains(&key.as_str()) {
            return Err(CliError::usage(format!(
                "config line {}: unknown key {key:?}",
                lineno + 1
            )));
        }
        let value = value.trim().trim_matches('"').to_string();
        map.insert(key, value);
    }
    Ok(map)
}

struct IntegrateSpec {
    shape: ShapeDescriptor,
    kernel: Kernel,
    policy: EpsilonPolicy,
    ns: Vec<usize>,
    side: Side,
    shift: f64,
    integrand: IntegrandKind,
    reference: f64,
    pad: usize,
    output: Option<PathBuf>,
    workers: usize,
}

fn parse_point(s: &str) -> Result<Point, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(CliError::usage(format!("expected `x,y[,z]`, got {s:?}")));
    }
    let mut p = [0.0f64; 3];
    for (i, part) in parts.iter().enumerate() {
        p[i] = part
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad coordinate {part:?}")))?;
    }
    Ok(p)
}

fn integrate_spec(args: &IntegrateArgs) -> Result<IntegrateSpec, CliError> {
    let cfg = match &args.config {
        Some(path) => parse_config(&fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config {}: {e}", path.display()))
        })?)?,
        None => BTreeMap::new(),
    };
    let get = |key: &str| cfg.get(key).map(|s| s.as_str());
    let parse_f64 = |key: &str, v: &str| {
        v.parse::<f64>()
            .map_err(|_| CliError::usage(format!("bad numeric value for {key}: {v:?}")))
    };

    let shape_name = args
        .shape
        .clone()
        .or_else(|| get("shape").map(String::from))
        .ok_or_else(|| CliError::usage("missing --shape"))?;
    let r0 = match (args.r0, get("r0")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("r0", v)?,
        (None, None) => {
            if shape_name == "l1-squared" {
                1.0
            } else {
                0.501
            }
        }
    };
    let power = match (args.power, get("power")) {
        (Some(v), _) => v,
        (None, Some(v)) => v
            .parse()
            .map_err(|_| CliError::usage(format!("bad power {v:?}")))?,
        (None, None) => 1,
    };
    let signed = args.signed || get("signed").map(|v| v == "true").unwrap_or(false);
    let shape = ShapeDescriptor::by_name(&shape_name, r0, power, signed).ok_or_else(|| {
        CliError::usage(format!(
            "unknown shape {shape_name:?}: known shapes are {}",
            ShapeDescriptor::names().join(", ")
        ))
    })?;
    shape.validate().map_err(CliError::Usage)?;

    let family = parse_family(
        args.kernel
            .as_deref()
            .or_else(|| get("kernel"))
            .unwrap_or("bump"),
    )?;
    let moments = match (args.moments, get("moments")) {
        (Some(v), _) => v,
        (None, Some(v)) => v
            .parse()
            .map_err(|_| CliError::usage(format!("bad moments {v:?}")))?,
        (None, None) => 1,
    };
    let rho = match (args.rho, get("rho")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("rho", v)?,
        (None, None) => 0.0,
    };
    let kernel = build_kernel(family, moments, rho)?;

    let policy_text = args
        .eps
        .clone()
        .or_else(|| get("eps").map(String::from))
        .ok_or_else(|| CliError::usage("missing --eps policy"))?;
    let policy = EpsilonPolicy::parse(&policy_text)?;

    let ns: Vec<usize> = if let Some(n) = args.n {
        vec![n]
    } else if let Some(list) = get("n_list") {
        list.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad n_list entry {v:?}")))
            })
            .collect::<Result<_, _>>()?
    } else if let Some(v) = get("n") {
        vec![v
            .parse()
            .map_err(|_| CliError::usage(format!("bad n {v:?}")))?]
    } else {
        return Err(CliError::usage("missing --n (or n/n_list in the config)"));
    };
    if !ns.iter().all(|&n| n >= 2) {
        return Err(CliError::usage("n must be at least 2"));
    }

    let side_name = args
        .side
        .clone()
        .or_else(|| get("side").map(String::from))
        .unwrap_or_else(|| "positive".into());
    let side = Side::parse(&side_name).ok_or_else(|| {
        CliError::usage(format!("unknown side {side_name:?}: positive | negative"))
    })?;
    let shift = match (args.shift, get("shift")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("shift", v)?,
        (None, None) => 0.0,
    };

    let integrand_name = args
        .integrand
        .clone()
        .or_else(|| get("integrand").map(String::from))
        .unwrap_or_else(|| "one".into());
    let sing_point = match (args.sing_point.as_deref(), get("sing_point")) {
        (Some(v), _) => Some(parse_point(v)?),
        (None, Some(v)) => Some(parse_point(v)?),
        (None, None) => None,
    };
    let integrand = match integrand_name.as_str() {
        "one" => IntegrandKind::ConstantOne,
        "theta-sawtooth" => IntegrandKind::ThetaSawtooth,
        "inv-sqrt" => IntegrandKind::InverseSqrtAt(
            sing_point.ok_or_else(|| CliError::usage("inv-sqrt needs --sing-point x,y"))?,
        ),
        other => {
            return Err(CliError::usage(format!(
                "unknown integrand {other:?}: one | theta-sawtooth | inv-sqrt"
            )))
        }
    };

    let reference = match (args.reference, get("reference")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_f64("reference", v)?,
        (None, None) => shape.reference_measure(),
    };
    let pad = match (args.pad, get("pad")) {
        (Some(v), _) => v,
        (None, Some(v)) => v
            .parse()
            .map_err(|_| CliError::usage(format!("bad pad {v:?}")))?,
        (None, None) => 0,
    };
    let workers = if args.workers != 0 {
        args.workers
    } else {
        get("workers")
            .map(|v| v.parse().map_err(|_| CliError::usage("bad workers")))
            .transpose()?
            .unwrap_or(0)
    };
    let output = args
        .output
        .clone()
        .or_else(|| get("output").map(PathBuf::from));

    Ok(IntegrateSpec {
        shape,
        kernel,
        policy,
        ns,
        side,
        shift,
        integrand,
        reference,
        pad,
        output,
        workers,
    })
}

fn cmd_integrate(args: IntegrateArgs) -> Result<(), CliError> {
    let spec = integrate_spec(&args)?;
    let field = spec
        .shape
        .build()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let integrand = make_integrand(spec.integrand);

    let mut csv = String::new();
    let _ = writeln!(csv, "# {}", studies::CSV_SCHEMA);
    let _ = writeln!(csv, "# columns: {}", studies::CSV_COLUMNS);
    let mut prev_err: Option<f64> = None;
    let rows = levelquad::run_with_workers(spec.workers, || -> Result<String, CliError> {
        let mut body = String::new();
        for &n in &spec.ns {
            let grid = GridSpec::new(spec.shape.dim(), n).with_padding(spec.pad);
            let out = integrate(&QuadratureJob {
                field: field.clone(),
                integrand: integrand.clone(),
                kernel: spec.kernel.clone(),
                policy: spec.policy,
                grid,
                side: spec.side,
                shift: spec.shift,
            })?;
            if out.under_resolved {
                eprintln!(
                    "warning: eps = {:.4e} is below 2h = {:.4e}; the band is unresolved by the grid",
                    out.eps,
                    2.0 * grid.spacing()
                );
            }
            let rel = (out.value - spec.reference).abs() / spec.reference.abs();
            let order = prev_err
                .map(|p| format!("{:.3}", (p / rel).log2()))
                .unwrap_or_default();
            prev_err = Some(rel);
            let _ = writeln!(
                body,
                "{},{:.9e},{:.9e},{:.16e},{:.16e},{:.5e},{},{},0.000",
                n,
                grid.spacing(),
                out.eps,
                out.value,
                spec.reference,
                rel,
                order,
                out.band_count
            );
        }
        Ok(body)
    })?;
    csv.push_str(&rows);
    match &spec.output {
        Some(path) => {
            // Result rows append to an existing CSV; the header is written
            // only when the file starts out empty or absent.
            let existing = fs::metadata(path).map(|m| m.len()).unwrap_or(0);
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?;
            if existing == 0 {
                file.write_all(csv.as_bytes())?;
            } else {
                file.write_all(rows.as_bytes())?;
            }
            println!("appended to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<(), CliError> {
    let id = StudyId::parse(&args.id).ok_or_else(|| {
        CliError::usage(format!(
            "unknown study {:?}: known studies are {}",
            args.id,
            StudyId::all()
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let report = levelquad::run_with_workers(args.workers, || -> Result<_, CliError> {
        let a0 = if args.calibrate_a0 {
            let a0 = calibrate_a0().map_err(|e| CliError::Numerical(e.to_string()))?;
            println!("calibrated a0 = {a0:.6}");
            Some(a0)
        } else {
            args.a0
        };
        Ok(run_study(
            id,
            &StudyOverrides {
                max_n: args.max_n,
                a0,
                with_large_3d: args.with_n800,
            },
        )?)
    })?;
    let path = args
        .output
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", id.name())));
    let mut file = fs::File::create(&path)?;
    write_csv(&report, &mut file, args.timings)?;
    file.flush()?;
    print!("{}", studies::summary_text(&report));
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.input.display())))?;
    let mut dim = 0usize;
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('i') {
            continue; // blank, comment, or header line
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(CliError::usage(format!(
                "line {}: expected i,j[,k],phi",
                lineno + 1
            )));
        }
        let this_dim = parts.len() - 1;
        if dim == 0 {
            dim = this_dim;
        } else if dim != this_dim {
            return Err(CliError::usage(format!(
                "line {}: mixed dimensions",
                lineno + 1
            )));
        }
        let idx: Vec<usize> = parts[..this_dim]
            .iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::usage(format!("line {}: bad index {v:?}", lineno + 1)))
            })
            .collect::<Result<_, _>>()?;
        let phi: f64 = parts[this_dim]
            .parse()
            .map_err(|_| CliError::usage(format!("line {}: bad value", lineno + 1)))?;
        entries.push((idx, phi));
    }
    if entries.is_empty() {
        return Err(CliError::usage("input holds no samples"));
    }
    let n = entries
        .iter()
        .flat_map(|(idx, _)| idx.iter().copied())
        .max()
        .unwrap();
    if n < 2 {
        return Err(CliError::usage(
            "grid needs at least 3 nodes per axis (max index >= 2)",
        ));
    }
    let grid = GridSpec::new(dim, n);
    let nodes = grid.nodes_per_axis();
    let expected = grid.node_count();
    if entries.len() != expected {
        return Err(CliError::usage(format!(
            "expected {expected} rows for a complete N={n} grid, got {}",
            entries.len()
        )));
    }
    let mut samples = vec![f64::NAN; expected];
    for (idx, phi) in &entries {
        let flat = if dim == 2 {
            idx[0] * nodes + idx[1]
        } else {
            idx[0] * nodes * nodes + idx[1] * nodes + idx[2]
        };
        samples[flat] = *phi;
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(CliError::usage(
            "duplicate or missing node indices in input",
        ));
    }

    let tol = args
        .tol
        .unwrap_or_else(|| redistance::default_tolerance(dim));
    let mut dg = initialize_interface(&grid, &samples)?;
    let stats = fast_sweep(&mut dg, args.max_rounds, tol)?;
    println!(
        "converged in {} round(s), final max change {:.3e}",
        stats.rounds, stats.max_change
    );

    let mut out = String::new();
    if dim == 2 {
        out.push_str("i,j,dist\n");
        for i in 0..nodes {
            for j in 0..nodes {
                let _ = writeln!(out, "{i},{j},{:.16e}", dg.values[i * nodes + j]);
            }
        }
    } else {
        out.push_str("i,j,k,dist\n");
        for i in 0..nodes {
            for j in 0..nodes {
                for k in 0..nodes {
                    let _ = writeln!(
                        out,
                        "{i},{j},{k},{:.16e}",
                        dg.values[i * nodes * nodes + j * nodes + k]
                    );
                }
            }
        }
    }
    fs::write(&args.output, out)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_family(args: FamilyArgs) -> Result<(), CliError> {
    let shape = ShapeDescriptor::by_name(&args.shape, args.r0, args.power, args.signed)
        .ok_or_else(|| {
            CliError::usage(format!(
                "unknown shape {:?}: known shapes are {}",
                args.shape,
                ShapeDescriptor::names().join(", ")
            ))
        })?;
    shape.validate().map_err(CliError::Usage)?;
    let etas: Vec<f64> = args
        .etas
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad eta {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    if etas.is_empty() {
        return Err(CliError::usage("need at least one eta"));
    }
    let side = match args.side.as_str() {
        "symmetrized" => None,
        other => Some(
            Side::parse(other)
                .ok_or_else(|| CliError::usage("side must be positive | negative | symmetrized"))?,
        ),
    };
    let fit_model = match args.fit.as_str() {
        "none" => None,
        "powerlaw" => Some(FitModel::PowerLaw),
        other => match other.strip_prefix("poly:") {
            Some(deg) => {
                Some(FitModel::Polynomial(deg.parse().map_err(|_| {
                    CliError::usage(format!("bad fit degree in {other:?}"))
                })?))
            }
            None => return Err(CliError::usage("fit must be poly:<deg> | powerlaw | none")),
        },
    };

    let field = shape
        .build()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let grid = GridSpec::new(shape.dim(), args.n);
    let eps = args.eps_probe.unwrap_or(4.0 * grid.spacing());
    let probe = Kernel::c_inf_2();
    let one = make_integrand(IntegrandKind::ConstantOne);

    let values = levelquad::run_with_workers(args.workers, || -> Result<Vec<f64>, CliError> {
        etas.iter()
            .map(|&eta| {
                Ok(family_integral(
                    &grid, &field, &one, &probe, eps, eta, side,
                )?)
            })
            .collect()
    })?;
    let fit = fit_model
        .map(|model| fit_family(&etas, &values, model))
        .transpose()?;
    let samples = FamilyIntegralSamples { etas, values, fit };

    let mut csv = String::from("eta,I\n");
    for (eta, value) in samples.etas.iter().zip(&samples.values) {
        let _ = writeln!(csv, "{eta},{value:.16e}");
    }
    match &args.output {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    if let Some(fit) = &samples.fit {
        match fit.model {
            FitModel::Polynomial(deg) => {
                println!(
                    "polynomial fit (degree {deg}): coeffs {:?}, max residual {:.3e}",
                    fit.coeffs, fit.max_residual
                );
            }
            FitModel::PowerLaw => {
                println!(
                    "power-law fit: I0 = {:.8}, c = {:.8}, exponent = {:.5}, max residual {:.3e}",
                    fit.coeffs[0],
                    fit.coeffs[1],
                    fit.exponent.unwrap(),
                    fit.max_residual
                );
            }
        }
    }
    Ok(())
}
