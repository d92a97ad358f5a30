use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use nlcorr_core::additive::{
    copula_bound, empirical_phi_star, sample_design, sandwich_check, BasisSpec, CompatibilityQuery, CopulaDesign,
    PhiOptions, SandwichOptions, SANDWICH_Z,
};
use nlcorr_core::groups::{
    assumption_c_check, extreme_symm, hoeffding_decompose, nested_sum_matrix, sin_construction_corr, tabulate,
    DiscreteLaw, GroupSystem, Law, SinOptions, ARGMIN_TIE_TOL, ENUMERATION_BUDGET, SEARCH_NODE_BUDGET, TABLE_TOL,
};
use nlcorr_core::hermite::{cached_rule, expand, nl_gram};
use nlcorr_core::maxcorr::{
    ace_estimate, ace_on_joint, exact_extremes, pair_max_corr, samples_from_csv, AceOptions, DiscreteJoint, MASS_TOL,
    ZERO_BLOCK_TOL,
};
use nlcorr_core::spectra::{
    brownian_corr_kernel, extreme_eigs, nystrom_eigs, richardson_extrapolate, schur, schur_power_contraction_check,
    spectrum, KernelGrid, CONTRACTION_TOL, PSD_TOL, SYMMETRY_TOL,
};
use nlcorr_core::stationary::{
    ar1_kernel, circulant_cross_check, curve_to_csv, ou_kernel_with_rate, spectral_curve, spectral_density,
    spectral_extremes, white_noise, Domain, GridOptions, StationaryKernel,
};
use nlcorr_core::transform::{PiecewiseLinear, Transform};
use nlcorr_core::{CorrMatrix, Error};
use serde_json::{json, Value};

use crate::context::{At, CliError, CliResult, Context};

pub struct Outcome {
    pub results: Value,
    pub tolerances: Value,
    pub curve: Option<String>,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `name[:arg]` from the transform catalog, or `table:<csv path>`.
fn parse_transform(spec: &str, ctx: &mut Context) -> CliResult<Transform> {
    match spec.strip_prefix("table:") {
        Some(path) => {
            let path = Path::new(path);
            let text = ctx.read(path)?;
            Ok(Transform::Piecewise(PiecewiseLinear::from_csv(&text).at(path)?))
        }
        None => Ok(spec.parse()?),
    }
}

fn parse_transforms(specs: &[String], p: usize, ctx: &mut Context) -> CliResult<Vec<Transform>> {
    let ts = specs.iter().map(|s| parse_transform(s, ctx)).collect::<CliResult<Vec<_>>>()?;
    match ts.len() {
        1 => Ok(vec![ts[0].clone(); p]),
        n if n == p => Ok(ts),
        n => Err(Error::DimensionMismatch { expected: p, found: n }.into()),
    }
}

fn parse_law(spec: &str, ctx: &mut Context) -> CliResult<Law> {
    if spec.ends_with(".json") {
        let path = Path::new(spec);
        let text = ctx.read(path)?;
        return Law::from_json_str(&text).at(path);
    }
    Ok(spec.parse()?)
}

fn discrete(law: Law) -> CliResult<DiscreteLaw> {
    match law {
        Law::Discrete(d) => Ok(d),
        other => Err(usage(format!("this subcommand needs a finitely supported law, got {other}"))),
    }
}

// ---------------------------------------------------------------- eig

#[derive(Args)]
pub struct EigArgs {
    /// Symmetric matrix (JSON or CSV).
    #[arg(long)]
    input: Option<PathBuf>,
    /// `ones`, `offdiag`, `identity` or a weight-matrix file.
    #[arg(long, default_value = "ones")]
    weights: String,
    /// Nyström discretization of a kernel on [0, 1] instead of a matrix.
    #[arg(long, value_parser = ["brownian"], conflicts_with = "input")]
    kernel: Option<String>,
    /// Grid sizes for the Nyström refinement.
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000])]
    grid: Vec<usize>,
    /// Compare with `λ_max(R_p) / p` of the `p`-step nested-sum matrix.
    #[arg(long)]
    nested_p: Option<usize>,
}

pub fn eig(a: &EigArgs, ctx: &mut Context) -> CliResult<Outcome> {
    if a.kernel.is_some() {
        return nystrom(a);
    }
    let path = a.input.as_ref().ok_or_else(|| usage("eig needs --input or --kernel"))?;
    let m = ctx.matrix(path)?;
    let w = ctx.weights(&a.weights, m.dim())?;
    let m = schur(&m, w.as_sym())?;
    let ev = spectrum(&m);
    Ok(Outcome {
        results: json!({
            "dim": m.dim(),
            "spectrum": ev,
            "lambda_min": ev[0],
            "lambda_max": ev[ev.len() - 1],
        }),
        tolerances: json!({ "symmetry": SYMMETRY_TOL }),
        curve: None,
    })
}

fn nystrom(a: &EigArgs) -> CliResult<Outcome> {
    if a.grid.is_empty() || a.grid.iter().any(|&n| n < 2) {
        return Err(usage("--grid needs sizes of at least 2"));
    }
    let mut rows = Vec::new();
    let mut curve = String::from("n,lambda_max,lambda_min\n");
    let mut tops = Vec::new();
    for &n in &a.grid {
        let grid = KernelGrid::midpoint(n, brownian_corr_kernel)?;
        let ev = nystrom_eigs(&grid);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        writeln!(curve, "{n},{hi:.16e},{lo:.16e}").expect("string write");
        rows.push(json!({ "n": n, "lambda_max": hi, "lambda_min": lo }));
        tops.push(hi);
    }
    let direction = if tops.windows(2).all(|w| w[1] <= w[0]) {
        "nonincreasing"
    } else if tops.windows(2).all(|w| w[1] >= w[0]) {
        "nondecreasing"
    } else {
        "mixed"
    };
    let extrapolation = match tops.as_slice() {
        [.., v1, v2, v4] => richardson_extrapolate(*v1, *v2, *v4),
        _ => None,
    };
    let mut results = json!({
        "kernel": "brownian",
        "refinement": rows,
        "monotone": direction != "mixed",
        "direction": direction,
        "cap": std::f64::consts::FRAC_1_SQRT_2,
        "extrapolation": to_value(&extrapolation),
    });
    if let Some(p) = a.nested_p {
        if p < 2 {
            return Err(usage("--nested-p must be at least 2"));
        }
        let m: Vec<usize> = (1..=p).collect();
        let (_, hi) = extreme_eigs(nested_sum_matrix(&m)?.as_sym());
        let last = *tops.last().expect("nonempty grid");
        results["nested"] = json!({ "p": p, "scaled_lambda_max": hi / p as f64, "gap": (hi / p as f64 - last).abs() });
    }
    Ok(Outcome { results, tolerances: json!({ "symmetry": 1e-12 }), curve: Some(curve) })
}

// ---------------------------------------------------------------- schur-check

#[derive(Args)]
pub struct SchurArgs {
    /// Correlation matrix (JSON or CSV).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ones")]
    weights: String,
    /// Schur powers to certify.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
    power: Vec<u32>,
}

pub fn schur_check(a: &SchurArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let sigma = ctx.corr(&a.input)?;
    let w = ctx.weights(&a.weights, sigma.dim())?;
    let certs = a
        .power
        .iter()
        .map(|&m| Ok(json!({ "power": m, "certificate": to_value(&schur_power_contraction_check(&sigma, &w, m)?) })))
        .collect::<CliResult<Vec<_>>>()?;
    let holds = certs.iter().all(|c| c["certificate"]["holds"] == Value::Bool(true));
    Ok(Outcome {
        results: json!({ "dim": sigma.dim(), "holds": holds, "powers": certs }),
        tolerances: json!({ "contraction": CONTRACTION_TOL, "psd": PSD_TOL }),
        curve: None,
    })
}

// ---------------------------------------------------------------- hermite

#[derive(Args)]
pub struct HermiteArgs {
    /// Catalog transforms or `table:<csv>`; one per variable, or one for all.
    #[arg(long, value_delimiter = ',', required = true)]
    transform: Vec<String>,
    /// Truncation order `M`.
    #[arg(long, default_value_t = 8)]
    order: usize,
    /// Gauss-Hermite nodes used for the projection.
    #[arg(long, default_value_t = 96)]
    nodes: usize,
    /// Correlation matrix of the underlying pairwise Gaussian vector.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "ones")]
    weights: String,
}

pub fn hermite(a: &HermiteArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let rule = cached_rule(a.nodes)?;
    let sigma = a.input.as_ref().map(|p| ctx.corr(p)).transpose()?;
    let p = sigma.as_ref().map_or(a.transform.len(), CorrMatrix::dim);
    let transforms = parse_transforms(&a.transform, p, ctx)?;
    let expansions = transforms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let mut e = expand(|x| t.eval(x), a.order, &rule)?;
            e.variable = j;
            Ok(e)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let listed: Vec<Value> = expansions
        .iter()
        .zip(&transforms)
        .map(|(e, t)| {
            json!({
                "transform": t.to_string(),
                "M": e.order(),
                "coeffs": e.coeffs,
                "mean": e.mean,
                "tail_mass": e.tail_mass,
            })
        })
        .collect();
    let mut results = json!({ "expansions": listed });
    if let Some(sigma) = &sigma {
        let w = ctx.weights(&a.weights, p)?;
        let g = nl_gram(sigma, &expansions, &w)?;
        let (lo, hi) = extreme_eigs(&g);
        let (llo, lhi) = extreme_eigs(&schur(sigma.as_sym(), w.as_sym())?);
        results["nl_gram"] = json!({ "rows": g.rows(), "lambda_min": lo, "lambda_max": hi });
        results["linear"] = json!({ "lambda_min": llo, "lambda_max": lhi });
        results["within_linear_bounds"] = json!(lo >= llo - CONTRACTION_TOL && hi <= lhi + CONTRACTION_TOL);
    }
    Ok(Outcome {
        results,
        tolerances: json!({ "quadrature_nodes": a.nodes, "contraction": CONTRACTION_TOL }),
        curve: None,
    })
}

// ---------------------------------------------------------------- oracle

#[derive(Args)]
pub struct OracleArgs {
    /// Discrete joint `{"supports": ..., "atoms": ...}`.
    #[arg(long, visible_alias = "input")]
    joint: PathBuf,
    #[arg(long, default_value = "ones")]
    weights: String,
}

fn load_joint(path: &Path, ctx: &mut Context) -> CliResult<DiscreteJoint> {
    let text = ctx.read(path)?;
    DiscreteJoint::from_json_str(&text).at(path)
}

pub fn oracle(a: &OracleArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let joint = load_joint(&a.joint, ctx)?;
    let w = ctx.weights(&a.weights, joint.dim())?;
    let ex = exact_extremes(&joint, &w)?;
    let mut results = json!({
        "dim": joint.dim(),
        "support_sizes": joint.support_sizes(),
        "rho_max": ex.rho_max.value,
        "rho_min": ex.rho_min.value,
        "extremes": to_value(&ex),
    });
    if joint.dim() == 2 {
        results["pair_max_corr"] = json!(pair_max_corr(&joint)?);
    }
    Ok(Outcome { results, tolerances: json!({ "mass": MASS_TOL, "zero_block": ZERO_BLOCK_TOL }), curve: None })
}

// ---------------------------------------------------------------- ace

#[derive(Args)]
pub struct AceArgs {
    /// Samples as CSV with a header row.
    #[arg(long, conflicts_with = "joint")]
    input: Option<PathBuf>,
    /// A discrete joint to run on directly.
    #[arg(long)]
    joint: Option<PathBuf>,
    #[arg(long, default_value = "ones")]
    weights: String,
    /// Quantile cells per column for sample input.
    #[arg(long, default_value_t = 16)]
    bins: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

pub fn ace(a: &AceArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let opts = AceOptions { max_iter: a.max_iter, tol: ctx.tol(1e-12)?, seed: ctx.seed(), bins: Some(a.bins) };
    let (report, exact) = match (&a.input, &a.joint) {
        (Some(path), None) => {
            let text = ctx.read(path)?;
            let samples = samples_from_csv(&text).at(path)?;
            let p = samples.first().map_or(0, Vec::len);
            let w = ctx.weights(&a.weights, p)?;
            (ace_estimate(&samples, &w, &opts)?, None)
        }
        (None, Some(path)) => {
            let joint = load_joint(path, ctx)?;
            let w = ctx.weights(&a.weights, joint.dim())?;
            let ex = exact_extremes(&joint, &w)?;
            (ace_on_joint(&joint, &w, &opts)?, Some(json!({ "rho_max": ex.rho_max.value, "rho_min": ex.rho_min.value })))
        }
        _ => return Err(usage("ace needs exactly one of --input or --joint")),
    };
    let mut results = json!({
        "rho_max": report.extremes.rho_max.value,
        "rho_min": report.extremes.rho_min.value,
        "report": to_value(&report),
    });
    if let Some(e) = exact {
        results["exact"] = e;
    }
    Ok(Outcome {
        results,
        tolerances: json!({ "convergence": opts.tol, "max_iter": opts.max_iter }),
        curve: None,
    })
}

// ---------------------------------------------------------------- nested

#[derive(Args)]
pub struct NestedArgs {
    /// Partial-sum lengths, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value = "ones")]
    weights: String,
}

pub fn nested(a: &NestedArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let r = nested_sum_matrix(&a.m)?;
    let w = ctx.weights(&a.weights, r.dim())?;
    let rw = schur(r.as_sym(), w.as_sym())?;
    let ev = spectrum(&rw);
    Ok(Outcome {
        results: json!({
            "m": a.m,
            "R": r.as_sym().rows(),
            "spectrum": ev,
            "lambda_min": ev[0],
            "lambda_max": ev[ev.len() - 1],
        }),
        tolerances: json!({ "symmetry": SYMMETRY_TOL }),
        curve: None,
    })
}

// ---------------------------------------------------------------- groups

#[derive(Args)]
pub struct GroupsArgs {
    /// Group system `{"groups": [[...], ...]}`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ones")]
    weights: String,
}

pub fn groups(a: &GroupsArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let text = ctx.read(&a.input)?;
    let g = GroupSystem::from_json_str(&text).at(&a.input)?;
    let w = ctx.weights(&a.weights, g.len())?;
    let ex = extreme_symm(&g, &w)?;
    let c = assumption_c_check(&g);
    Ok(Outcome {
        results: json!({
            "sizes": g.sizes(),
            "ell_star": g.ell_star(),
            "rho_max": ex.rho_max,
            "rho_min": ex.rho_min,
            "argmin_ell": ex.argmin_ell,
            "orders": to_value(&ex.orders),
            "assumption_c": to_value(&c),
        }),
        tolerances: json!({ "argmin_tie": ARGMIN_TIE_TOL, "search_nodes": SEARCH_NODE_BUDGET }),
        curve: None,
    })
}

// ---------------------------------------------------------------- hoeffding

#[derive(Args)]
pub struct HoeffdingArgs {
    /// `rademacher`, `bernoulli(p)` or a `{"values", "probs"}` JSON file.
    #[arg(long, default_value = "rademacher")]
    law: String,
    /// Number of arguments of `f_0`.
    #[arg(long)]
    m: Option<usize>,
    /// Built-in symmetric function: sum, sum-square, sum-cube, product, max, min.
    #[arg(long, conflicts_with = "input")]
    function: Option<String>,
    /// Table `{"m": m, "f0": [...]}` in row-major order over `support^m`.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn builtin(name: &str) -> CliResult<fn(&[f64]) -> f64> {
    Ok(match name {
        "sum" => |y| y.iter().sum(),
        "sum-square" => |y| y.iter().sum::<f64>().powi(2),
        "sum-cube" => |y| y.iter().sum::<f64>().powi(3),
        "product" => |y| y.iter().product(),
        "max" => |y| y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "min" => |y| y.iter().copied().fold(f64::INFINITY, f64::min),
        other => return Err(usage(format!("unknown function '{other}'"))),
    })
}

pub fn hoeffding(a: &HoeffdingArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let law = discrete(parse_law(&a.law, ctx)?)?;
    let (m, f0) = match (&a.function, &a.input) {
        (Some(name), _) => {
            let m = a.m.ok_or_else(|| usage("--function needs --m"))?;
            (m, tabulate(&law, m, builtin(name)?)?)
        }
        (None, Some(path)) => {
            #[derive(serde::Deserialize)]
            struct Table {
                m: usize,
                f0: Vec<f64>,
            }
            let text = ctx.read(path)?;
            let t: Table = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("table JSON: {e}")))
                .at(path)?;
            (t.m, t.f0)
        }
        (None, None) => return Err(usage("hoeffding needs --function or --input")),
    };
    let d = hoeffding_decompose(&f0, &law, m)?;
    Ok(Outcome {
        results: json!({
            "m": m,
            "removed_mean": d.removed_mean,
            "variance": d.variance(),
            "component_energies": d.component_energies(),
            "reconstruction_error": d.reconstruction_error(),
            "conditional_mean_error": d.conditional_mean_error(),
            "variance_identity_gap": d.variance_identity_gap(),
            "components": d.components,
        }),
        tolerances: json!({ "table": TABLE_TOL }),
        curve: None,
    })
}

// ---------------------------------------------------------------- sinlimit

#[derive(Args)]
pub struct SinArgs {
    /// Nested sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// `cauchy`, `rademacher`, `bernoulli(p)` or a law JSON file.
    #[arg(long, default_value = "cauchy")]
    law: String,
    /// Values of t along the trajectory.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001])]
    t: Vec<f64>,
    /// Exact-enumeration budget in atoms.
    #[arg(long, default_value_t = ENUMERATION_BUDGET)]
    budget: u128,
    /// Monte Carlo sample size beyond the budget; 0 disables the fallback.
    #[arg(long, default_value_t = 200_000)]
    mc: usize,
}

pub fn sinlimit(a: &SinArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let law = parse_law(&a.law, ctx)?;
    let limit = nested_sum_matrix(&a.m)?.as_sym().rows();
    let opts = SinOptions { budget: a.budget, monte_carlo: (a.mc > 0).then_some(a.mc), seed: ctx.seed() };
    let p = a.m.len();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| ((j + 1)..p).map(move |k| (j, k))).collect();
    let mut curve = String::from("t,c_t");
    for (j, k) in &pairs {
        write!(curve, ",r_{}_{}", j + 1, k + 1).expect("string write");
    }
    curve.push('\n');
    let mut trajectory = Vec::new();
    for &t in &a.t {
        let s = sin_construction_corr(t, &a.m, &law, &opts)?;
        let gap = pairs.iter().map(|&(j, k)| (s.matrix[j][k] - limit[j][k]).abs()).fold(0.0, f64::max);
        write!(curve, "{t:.16e},{:.16e}", s.c_t).expect("string write");
        for &(j, k) in &pairs {
            write!(curve, ",{:.16e}", s.matrix[j][k]).expect("string write");
        }
        curve.push('\n');
        let mut v = to_value(&s);
        v["gap_to_limit"] = json!(gap);
        trajectory.push(v);
    }
    Ok(Outcome {
        results: json!({ "m": a.m, "law": law.to_string(), "limit": limit, "trajectory": trajectory }),
        tolerances: json!({ "budget": a.budget.to_string(), "monte_carlo": a.mc }),
        curve: Some(curve),
    })
}

// ---------------------------------------------------------------- stationary / kernel

#[derive(Args)]
pub struct KernelSel {
    /// Kernel JSON file.
    #[arg(long, conflicts_with = "name")]
    input: Option<PathBuf>,
    /// Named kernel: ar1, ou, white-noise.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Decay rate of the OU kernel.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Points of the density curve written with --curve.
    #[arg(long, default_value_t = 1025)]
    curve_points: usize,
    /// Upper frequency on the line.
    #[arg(long, default_value_t = 200.0)]
    omega_max: f64,
}

impl KernelSel {
    fn load(&self, ctx: &mut Context) -> CliResult<StationaryKernel> {
        match (&self.input, self.name.as_deref()) {
            (Some(path), _) => {
                let text = ctx.read(path)?;
                StationaryKernel::from_json_str(&text).at(path)
            }
            (None, Some("ar1")) => Ok(ar1_kernel(self.beta.ok_or_else(|| usage("ar1 needs --beta"))?)?),
            (None, Some("ou")) => Ok(ou_kernel_with_rate(self.rate)?),
            (None, Some("white-noise" | "white_noise")) => Ok(white_noise()),
            (None, Some(other)) => Err(usage(format!("unknown kernel '{other}'"))),
            (None, None) => Err(usage("pass --name or --input")),
        }
    }

    fn curve(&self, k: &StationaryKernel) -> CliResult<String> {
        let top = match k.domain() {
            Domain::Lattice => std::f64::consts::PI,
            Domain::Line => self.omega_max,
        };
        Ok(curve_to_csv(&spectral_curve(k, self.curve_points, top)?))
    }
}

#[derive(Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    kernel: KernelSel,
    /// Grid points of the extreme search.
    #[arg(long, default_value_t = 4096)]
    n_points: usize,
    /// Also compare with an `n x n` Toeplitz section (lattice only).
    #[arg(long)]
    cross_check: Option<usize>,
}

pub fn stationary(a: &StationaryArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let k = a.kernel.load(ctx)?;
    let opts = GridOptions { n_points: a.n_points, line_omega_max: a.kernel.omega_max, ..GridOptions::default() };
    let ex = spectral_extremes(&k, &opts)?;
    let mut results = json!({
        "domain": to_value(&k.domain()),
        "inf": ex.inf,
        "sup": ex.sup,
        "extremes": to_value(&ex),
    });
    if let Some(n) = a.cross_check {
        results["cross_check"] = to_value(&circulant_cross_check(&k, n)?);
    }
    let curve = ctx.common.curve.is_some().then(|| a.kernel.curve(&k)).transpose()?;
    Ok(Outcome {
        results,
        tolerances: json!({ "extremes": ex.tolerance, "tail": k.tail_bound() }),
        curve,
    })
}

#[derive(Args)]
pub struct KernelArgs {
    #[command(flatten)]
    kernel: KernelSel,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    omega: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0])]
    lags: Vec<f64>,
}

pub fn kernel(a: &KernelArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let k = a.kernel.load(ctx)?;
    let densities = a
        .omega
        .iter()
        .map(|&w| {
            let d = spectral_density(&k, w)?;
            Ok(json!({ "omega": w, "value": d.value, "tolerance": d.tolerance }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let acf: Vec<Value> = a.lags.iter().map(|&t| json!({ "lag": t, "value": k.autocorrelation(t) })).collect();
    let curve = ctx.common.curve.is_some().then(|| a.kernel.curve(&k)).transpose()?;
    Ok(Outcome {
        results: json!({ "domain": to_value(&k.domain()), "density": densities, "autocorrelation": acf }),
        tolerances: json!({ "tail": k.tail_bound() }),
        curve,
    })
}

// ---------------------------------------------------------------- copula-check / sandwich

#[derive(Args)]
pub struct DesignSel {
    /// Design `{"sigma_z", "transforms", "n", "seed"}`.
    #[arg(long, conflicts_with = "sigma")]
    input: Option<PathBuf>,
    /// Latent correlation matrix file.
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Marginal transforms, one per variable or one for all.
    #[arg(long, value_delimiter = ',', default_value = "identity")]
    transforms: Vec<String>,
    /// Sample size.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
}

impl DesignSel {
    fn load(&self, ctx: &mut Context) -> CliResult<CopulaDesign> {
        match (&self.input, &self.sigma) {
            (Some(path), _) => {
                let text = ctx.read(path)?;
                CopulaDesign::from_json_str(&text).at(path)
            }
            (None, Some(path)) => {
                let sigma = ctx.corr(path)?;
                let ts = parse_transforms(&self.transforms, sigma.dim(), ctx)?;
                Ok(CopulaDesign::new(sigma, ts, self.n, ctx.seed())?)
            }
            (None, None) => Err(usage("pass --input or --sigma")),
        }
    }
}

#[derive(Args)]
pub struct CopulaArgs {
    #[command(flatten)]
    design: DesignSel,
    /// One-based active indices.
    #[arg(long, value_delimiter = ',', required = true)]
    active: Vec<usize>,
    #[arg(long, default_value_t = 3.0)]
    xi0: f64,
    #[arg(long, default_value_t = 2)]
    q: u8,
    /// Histogram cells per variable.
    #[arg(long, default_value_t = 8)]
    bins: usize,
    /// Polynomial degree per cell; 0 keeps plain histograms.
    #[arg(long, default_value_t = 0)]
    degree: usize,
    #[arg(long, default_value_t = 2000)]
    directions: usize,
}

pub fn copula_check(a: &CopulaArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let d = a.design.load(ctx)?;
    if a.active.contains(&0) {
        return Err(usage("--active indices are one-based"));
    }
    let query = CompatibilityQuery::new(a.active.iter().map(|j| j - 1).collect(), a.xi0, a.q, d.dim())?;
    let basis = match a.degree {
        0 => BasisSpec::histogram(a.bins),
        degree => BasisSpec::PiecewisePolynomial { bins: a.bins, degree },
    };
    let bound = copula_bound(&d.sigma_z);
    let data = sample_design(&d)?;
    let opts = PhiOptions { n_directions: a.directions, seed: ctx.seed(), ..PhiOptions::default() };
    let phi = empirical_phi_star(&data, &basis, &query, &opts)?;
    let consistent = phi.phi_hat >= bound.kappa0 - SANDWICH_Z * phi.se;
    Ok(Outcome {
        results: json!({
            "kappa0": bound.kappa0,
            "lambda_max": bound.lambda_max,
            "phi": to_value(&phi),
            "consistent": consistent,
            "violation": !consistent,
            "design_seed": d.seed,
            "n": d.n,
        }),
        tolerances: json!({ "se_multiplier": SANDWICH_Z, "batches": opts.batches }),
        curve: None,
    })
}

#[derive(Args)]
pub struct SandwichArgs {
    #[command(flatten)]
    design: DesignSel,
    /// True components `f_j`.
    #[arg(long, value_delimiter = ',', default_value = "zero")]
    f: Vec<String>,
    /// Fitted components `f̂_j`.
    #[arg(long = "f-hat", value_delimiter = ',', required = true)]
    f_hat: Vec<String>,
    /// Monte Carlo size; defaults to the design's `n`.
    #[arg(long)]
    n_mc: Option<usize>,
}

pub fn sandwich(a: &SandwichArgs, ctx: &mut Context) -> CliResult<Outcome> {
    let d = a.design.load(ctx)?;
    let p = d.dim();
    let f = parse_transforms(&a.f, p, ctx)?;
    let f_hat = parse_transforms(&a.f_hat, p, ctx)?;
    let opts = SandwichOptions { n_mc: a.n_mc.unwrap_or(d.n), seed: ctx.seed(), ..SandwichOptions::default() };
    let r = sandwich_check(&d.sigma_z, &d.transforms, &f, &f_hat, &opts)?;
    Ok(Outcome {
        results: to_value(&r),
        tolerances: json!({ "se_multiplier": SANDWICH_Z, "batches": opts.batches }),
        curve: None,
    })
}
