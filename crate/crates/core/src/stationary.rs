//! Spectral densities of stationary weighted autocorrelations on the integer
//! lattice and the real line, their extremes, and finite-section checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{extreme_eigs, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Lattice,
    Line,
}

/// Declared tail bound `|K(t)| <= C r^|t|` beyond the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// `β^|t|` on the lattice.
    Ar1 { beta: f64 },
    /// `exp(-rate |t|)` on the line.
    Ou { rate: f64 },
    /// `1{t = 0}` on the lattice.
    WhiteNoise,
    /// `K(0), K(1), ..., K(T)` on the lattice.
    LatticeTable { values: Vec<f64>, decay: Decay },
    /// Piecewise-linear `K` through `(t_i, K_i)`, `0 = t_0 < ... < t_T`.
    LineTable { t: Vec<f64>, values: Vec<f64>, decay: Decay },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryKernel {
    form: KernelForm,
}

pub fn ar1_kernel(beta: f64) -> Result<StationaryKernel> {
    if !(beta.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("AR(1) needs |beta| < 1, got {beta}")));
    }
    Ok(StationaryKernel { form: KernelForm::Ar1 { beta } })
}

/// `exp(-|t|)`.
pub fn ou_kernel() -> StationaryKernel {
    StationaryKernel { form: KernelForm::Ou { rate: 1.0 } }
}

pub fn ou_kernel_with_rate(rate: f64) -> Result<StationaryKernel> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!("OU rate must be positive, got {rate}")));
    }
    Ok(StationaryKernel { form: KernelForm::Ou { rate } })
}

pub fn white_noise() -> StationaryKernel {
    StationaryKernel { form: KernelForm::WhiteNoise }
}

fn check_decay(decay: Decay) -> Result<()> {
    if !(decay.c >= 0.0) || !decay.c.is_finite() || !(decay.r > 0.0 && decay.r < 1.0) {
        return Err(Error::DivergentTail(format!(
            "decay bound needs C >= 0 and 0 < r < 1, got C = {}, r = {}",
            decay.c, decay.r
        )));
    }
    Ok(())
}

impl StationaryKernel {
    pub fn lattice_table(values: Vec<f64>, decay: Decay) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("lattice table needs finite values".into()));
        }
        check_decay(decay)?;
        Ok(StationaryKernel { form: KernelForm::LatticeTable { values, decay } })
    }

    pub fn line_table(t: Vec<f64>, values: Vec<f64>, decay: Decay) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), found: values.len() });
        }
        if t.len() < 2 || t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("line table needs increasing lags starting at 0".into()));
        }
        if t.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("line table needs finite entries".into()));
        }
        check_decay(decay)?;
        Ok(StationaryKernel { form: KernelForm::LineTable { t, values, decay } })
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn domain(&self) -> Domain {
        match self.form {
            KernelForm::Ar1 { .. } | KernelForm::WhiteNoise | KernelForm::LatticeTable { .. } => Domain::Lattice,
            KernelForm::Ou { .. } | KernelForm::LineTable { .. } => Domain::Line,
        }
    }

    /// `K_W(t)`; tables are zero past their last lag.
    pub fn autocorrelation(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.form {
            KernelForm::Ar1 { beta } => beta.powi(t.round() as i32),
            KernelForm::Ou { rate } => (-rate * t).exp(),
            KernelForm::WhiteNoise => f64::from(u8::from(t == 0.0)),
            KernelForm::LatticeTable { values, .. } => {
                let i = t.round() as usize;
                if (t - t.round()).abs() > 0.0 {
                    0.0
                } else {
                    values.get(i).copied().unwrap_or(0.0)
                }
            }
            KernelForm::LineTable { t: lags, values, .. } => {
                let n = lags.len();
                if t > lags[n - 1] {
                    return 0.0;
                }
                let i = lags.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
                let f = (t - lags[i]) / (lags[i + 1] - lags[i]);
                values[i] + f * (values[i + 1] - values[i])
            }
        }
    }

    /// Bound on the part of the cosine series or transform beyond the table.
    pub fn tail_bound(&self) -> f64 {
        match &self.form {
            KernelForm::LatticeTable { values, decay } => {
                let t = (values.len() - 1) as f64;
                2.0 * decay.c * decay.r.powf(t + 1.0) / (1.0 - decay.r)
            }
            KernelForm::LineTable { t, decay, .. } => {
                2.0 * decay.c * decay.r.powf(t[t.len() - 1]) / (-decay.r.ln())
            }
            _ => 0.0,
        }
    }
}

/// `sin(x) / x` with the removable singularity filled.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `∫_a^b K(t) cos(ωt) dt` for `K` linear from `ka` to `kb`, arranged to stay
/// accurate as `ω -> 0`.
fn linear_cos_integral(a: f64, b: f64, ka: f64, kb: f64, omega: f64) -> f64 {
    let slope = (kb - ka) / (b - a);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    kb * b * sinc(omega * b) - ka * a * sinc(omega * a) - 2.0 * slope * mid * half * sinc(omega * mid) * sinc(omega * half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Density {
    pub value: f64,
    /// Bound on the neglected tail.
    pub tolerance: f64,
}

/// `K*(ω) = sum_s K(s) cos(ωs)` on the lattice, or `∫ K(t) cos(ωt) dt` on
/// the line.
pub fn spectral_density(k: &StationaryKernel, omega: f64) -> Result<Density> {
    if !omega.is_finite() {
        return Err(Error::FrequencyOutOfRange { omega });
    }
    if k.domain() == Domain::Lattice && omega.abs() > PI + 1e-12 {
        return Err(Error::FrequencyOutOfRange { omega });
    }
    let value = match &k.form {
        KernelForm::Ar1 { beta } => (1.0 - beta * beta) / (1.0 + beta * beta - 2.0 * beta * omega.cos()),
        KernelForm::Ou { rate } => 2.0 * rate / (rate * rate + omega * omega),
        KernelForm::WhiteNoise => 1.0,
        KernelForm::LatticeTable { values, .. } => {
            values[0] + 2.0 * values.iter().enumerate().skip(1).map(|(s, v)| v * (omega * s as f64).cos()).sum::<f64>()
        }
        KernelForm::LineTable { t, values, .. } => {
            2.0 * t
                .windows(2)
                .zip(values.windows(2))
                .map(|(tw, kw)| linear_cos_integral(tw[0], tw[1], kw[0], kw[1], omega))
                .sum::<f64>()
        }
    };
    Ok(Density { value, tolerance: k.tail_bound() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub n_points: usize,
    /// Golden-section refinement around grid optima.
    pub refine: bool,
    /// Use closed forms for named kernels when available.
    pub closed_form: bool,
    /// Upper end of the frequency scan on the line.
    pub line_omega_max: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { n_points: 4096, refine: true, closed_form: true, line_omega_max: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralExtremes {
    pub inf: f64,
    pub sup: f64,
    /// `None` when the extremum is only approached as `|ω| -> ∞`.
    pub argmin: Option<f64>,
    pub argmax: Option<f64>,
    pub inf_attained: bool,
    pub sup_attained: bool,
    pub tolerance: f64,
    pub closed_form: bool,
    /// `K*` takes both signs; extremes are those of `|K*|`.
    pub sign_change: bool,
}

fn golden_section(f: &(impl Fn(f64) -> f64 + ?Sized), mut a: f64, mut b: f64, maximize: bool) -> (f64, f64) {
    let g = |x: f64| if maximize { -f(x) } else { f(x) };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn closed_extremes(k: &StationaryKernel) -> Option<SpectralExtremes> {
    let ex = |inf, sup, argmin, argmax, inf_attained| SpectralExtremes {
        inf,
        sup,
        argmin,
        argmax,
        inf_attained,
        sup_attained: true,
        tolerance: 0.0,
        closed_form: true,
        sign_change: false,
    };
    match k.form {
        KernelForm::Ar1 { beta } => {
            let b = beta.abs();
            let (lo, hi) = ((1.0 - b) / (1.0 + b), (1.0 + b) / (1.0 - b));
            let (at_lo, at_hi) = if beta >= 0.0 { (PI, 0.0) } else { (0.0, PI) };
            Some(ex(lo, hi, Some(at_lo), Some(at_hi), true))
        }
        KernelForm::Ou { rate } => Some(ex(0.0, 2.0 / rate, None, Some(0.0), false)),
        KernelForm::WhiteNoise => Some(ex(1.0, 1.0, Some(0.0), Some(0.0), true)),
        _ => None,
    }
}

/// `inf` and `sup` of `|K*(ω)|` over `|ω| <= π` (lattice) or all real `ω`
/// (line).
pub fn spectral_extremes(k: &StationaryKernel, opts: &GridOptions) -> Result<SpectralExtremes> {
    if opts.closed_form {
        if let Some(ex) = closed_extremes(k) {
            return Ok(ex);
        }
    }
    if opts.n_points < 3 {
        return Err(Error::InvalidArgument("grid needs at least three points".into()));
    }
    let hi = match k.domain() {
        Domain::Lattice => PI,
        Domain::Line => opts.line_omega_max,
    };
    let n = opts.n_points;
    let grid: Vec<f64> = (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect();
    let raw: Vec<f64> = grid.par_iter().map(|&w| spectral_density(k, w).map(|d| d.value)).collect::<Result<_>>()?;
    let sign_change = raw.iter().any(|&v| v < 0.0) && raw.iter().any(|&v| v > 0.0);
    let abs: Vec<f64> = raw.iter().map(|v| v.abs()).collect();
    let density = |w: f64| spectral_density(k, w.clamp(0.0, hi)).map(|d| d.value.abs()).unwrap_or(f64::NAN);

    let pick = |maximize: bool| -> (f64, f64) {
        let i = (0..n)
            .reduce(|a, b| if (abs[b] > abs[a]) == maximize && abs[b] != abs[a] { b } else { a })
            .unwrap();
        if !opts.refine {
            return (grid[i], abs[i]);
        }
        let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
        let (x, fx) = golden_section(&density, a, b, maximize);
        let better = if maximize { fx > abs[i] } else { fx < abs[i] };
        if better {
            (x, fx)
        } else {
            (grid[i], abs[i])
        }
    };
    let (argmax, sup) = pick(true);
    let (argmin, grid_inf) = pick(false);
    let tolerance = k.tail_bound();

    // On the line |K*| vanishes at infinity, so the infimum is zero.
    let (inf, argmin, inf_attained) = if k.domain() == Domain::Line && grid_inf > tolerance.max(1e-12) {
        (0.0, None, false)
    } else {
        (grid_inf, Some(argmin), true)
    };
    Ok(SpectralExtremes {
        inf,
        sup,
        argmin,
        argmax: Some(argmax),
        inf_attained,
        sup_attained: true,
        tolerance,
        closed_form: false,
        sign_change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub n: usize,
    pub toeplitz_min: f64,
    pub toeplitz_max: f64,
    pub inf: f64,
    pub sup: f64,
    /// `max(|λ_min - inf|, |λ_max - sup|)`.
    pub gap: f64,
    /// Finite-section spectrum inside `[inf - tol, sup + tol]`.
    pub inside: bool,
}

/// Extreme eigenvalues of the `n x n` Toeplitz section `(K(j - k))`
/// compared with the spectral extremes.
pub fn circulant_cross_check(k: &StationaryKernel, n: usize) -> Result<CrossCheck> {
    if k.domain() != Domain::Lattice {
        return Err(Error::InvalidArgument("finite sections need a lattice kernel".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("section size must be positive".into()));
    }
    let lags: Vec<f64> = (0..n).map(|t| k.autocorrelation(t as f64)).collect();
    let m = SymMatrix::new(DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]))?;
    let (toeplitz_min, toeplitz_max) = extreme_eigs(&m);
    let ex = spectral_extremes(k, &GridOptions::default())?;
    let slack = ex.tolerance + 1e-9;
    Ok(CrossCheck {
        n,
        toeplitz_min,
        toeplitz_max,
        inf: ex.inf,
        sup: ex.sup,
        gap: (toeplitz_min - ex.inf).abs().max((toeplitz_max - ex.sup).abs()),
        inside: toeplitz_min >= ex.inf - slack && toeplitz_max <= ex.sup + slack,
    })
}

/// `(ω, K*(ω))` on a uniform grid of `[0, omega_max]`.
pub fn spectral_curve(k: &StationaryKernel, n_points: usize, omega_max: f64) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("curve needs at least two points".into()));
    }
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let w = omega_max * i as f64 / (n_points - 1) as f64;
            spectral_density(k, w).map(|d| (w, d.value))
        })
        .collect()
}

/// Two-column CSV `omega,density`.
pub fn curve_to_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("omega,density\n");
    for (w, v) in curve {
        out.push_str(&format!("{w:.16e},{v:.16e}\n"));
    }
    out
}

#[derive(Deserialize)]
struct KernelJson {
    domain: Domain,
    name: String,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
    table: Option<TableJson>,
    decay: Option<Decay>,
}

#[derive(Deserialize)]
struct TableJson {
    values: Vec<f64>,
    t: Option<Vec<f64>>,
}

impl StationaryKernel {
    /// `{"domain": "lattice"|"line", "name": "ar1"|"ou"|"white_noise"|"table",
    /// "params": {...}, "table": {"values": [...], "t": [...]}, "decay": {"C": c, "r": r}}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: KernelJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("kernel JSON: {e}")))?;
        let param = |name: &str, default: Option<f64>| -> Result<f64> {
            match raw.params.get(name) {
                Some(v) => v.as_f64().ok_or_else(|| Error::Parse(format!("parameter '{name}' must be a number"))),
                None => default.ok_or_else(|| Error::Parse(format!("missing parameter '{name}'"))),
            }
        };
        let kernel = match (raw.domain, raw.name.to_ascii_lowercase().as_str()) {
            (Domain::Lattice, "ar1") => ar1_kernel(param("beta", None)?)?,
            (Domain::Lattice, "white_noise" | "white-noise") => white_noise(),
            (Domain::Line, "ou") => ou_kernel_with_rate(param("rate", Some(1.0))?)?,
            (domain, "table") => {
                let table = raw.table.ok_or_else(|| Error::Parse("table kernel needs a 'table'".into()))?;
                let decay = raw
                    .decay
                    .ok_or_else(|| Error::DivergentTail("table kernel needs a declared decay bound".into()))?;
                match domain {
                    Domain::Lattice => Self::lattice_table(table.values, decay)?,
                    Domain::Line => {
                        let t = table.t.ok_or_else(|| Error::Parse("line table needs lags 't'".into()))?;
                        Self::line_table(t, table.values, decay)?
                    }
                }
            }
            (domain, name) => {
                return Err(Error::Parse(format!("kernel '{name}' is not available on the {domain:?} domain")))
            }
        };
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        let k = ar1_kernel(0.5).unwrap();
        assert!((spectral_density(&k, 0.0).unwrap().value - 3.0).abs() < 1e-15);
        assert!((spectral_density(&k, PI).unwrap().value - 1.0 / 3.0).abs() < 1e-15);
        let ou = ou_kernel();
        assert_eq!(spectral_density(&ou, 0.0).unwrap().value, 2.0);
        assert_eq!(spectral_density(&ou, 1.0).unwrap().value, 1.0);
        assert!(matches!(spectral_density(&k, 4.0), Err(Error::FrequencyOutOfRange { .. })));
        assert!(spectral_density(&ou, 40.0).is_ok());
        let w = ar1_kernel(0.0).unwrap();
        for om in [0.0, 1.0, 3.0] {
            assert!((spectral_density(&w, om).unwrap().value - 1.0).abs() < 1e-15);
        }
        assert!(ar1_kernel(1.0).is_err());
    }

    #[test]
    fn closed_form_extremes() {
        let ex = spectral_extremes(&ar1_kernel(0.5).unwrap(), &GridOptions::default()).unwrap();
        assert_eq!((ex.inf, ex.sup), (1.0 / 3.0, 3.0));
        let neg = spectral_extremes(&ar1_kernel(-0.5).unwrap(), &GridOptions::default()).unwrap();
        assert_eq!((neg.argmin, neg.argmax), (Some(0.0), Some(PI)));
        let ou = spectral_extremes(&ou_kernel(), &GridOptions::default()).unwrap();
        assert_eq!((ou.inf, ou.sup), (0.0, 2.0));
        assert!(!ou.inf_attained && ou.argmin.is_none());
        let wn = spectral_extremes(&white_noise(), &GridOptions::default()).unwrap();
        assert_eq!((wn.inf, wn.sup), (1.0, 1.0));
    }

    #[test]
    fn grid_matches_closed_form() {
        let opts = GridOptions { closed_form: false, ..GridOptions::default() };
        for beta in [0.5, -0.3, 0.9] {
            let k = ar1_kernel(beta).unwrap();
            let grid = spectral_extremes(&k, &opts).unwrap();
            let exact = spectral_extremes(&k, &GridOptions::default()).unwrap();
            assert!((grid.inf - exact.inf).abs() < 1e-6, "beta {beta}");
            assert!((grid.sup - exact.sup).abs() < 1e-6, "beta {beta}");
            assert!((exact.sup * exact.inf - 1.0).abs() < 1e-10);
        }
        let ou = spectral_extremes(&ou_kernel(), &opts).unwrap();
        assert!((ou.sup - 2.0).abs() < 1e-9);
        assert_eq!(ou.inf, 0.0);
        assert!(!ou.inf_attained);
    }

    #[test]
    fn lattice_table_matches_ar1() {
        let beta: f64 = 0.5;
        let values: Vec<f64> = (0..=60).map(|t| beta.powi(t)).collect();
        let k = StationaryKernel::lattice_table(values, Decay { c: 1.0, r: beta }).unwrap();
        let ar = ar1_kernel(beta).unwrap();
        for om in [0.0, 0.7, 2.0, PI] {
            let d = spectral_density(&k, om).unwrap();
            let want = spectral_density(&ar, om).unwrap().value;
            assert!((d.value - want).abs() <= d.tolerance + 1e-14);
            assert!(d.tolerance < 1e-17);
        }
    }

    #[test]
    fn line_table_matches_ou() {
        let t: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.005).collect();
        let values: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        let k = StationaryKernel::line_table(t, values, Decay { c: 1.0, r: (-1.0f64).exp() }).unwrap();
        for om in [0.0, 0.5, 1.0, 3.0] {
            let d = spectral_density(&k, om).unwrap();
            let want = 2.0 / (1.0 + om * om);
            assert!((d.value - want).abs() <= d.tolerance + 1e-5, "omega {om}: {} vs {want}", d.value);
        }
    }

    #[test]
    fn signed_table_flags_sign_change() {
        let k = StationaryKernel::lattice_table(vec![1.0, 0.6], Decay { c: 0.0, r: 0.5 }).unwrap();
        let ex = spectral_extremes(&k, &GridOptions::default()).unwrap();
        assert!(ex.sign_change);
        assert!(ex.inf < 1e-9);
        assert!((ex.sup - 2.2).abs() < 1e-12);
    }

    #[test]
    fn finite_sections() {
        let small = circulant_cross_check(&ar1_kernel(0.0).unwrap(), 2).unwrap();
        assert_eq!((small.toeplitz_min, small.toeplitz_max), (1.0, 1.0));
        let k = ar1_kernel(0.5).unwrap();
        let a = circulant_cross_check(&k, 100).unwrap();
        let b = circulant_cross_check(&k, 200).unwrap();
        assert!(a.inside && b.inside);
        assert!(b.gap <= a.gap);
        assert!(circulant_cross_check(&ou_kernel(), 10).is_err());
    }

    #[test]
    fn kernel_json() {
        let k = StationaryKernel::from_json_str(r#"{"domain": "lattice", "name": "ar1", "params": {"beta": 0.5}}"#)
            .unwrap();
        assert_eq!(k, ar1_kernel(0.5).unwrap());
        let ou = StationaryKernel::from_json_str(r#"{"domain": "line", "name": "ou"}"#).unwrap();
        assert_eq!(ou, ou_kernel());
        let t = StationaryKernel::from_json_str(
            r#"{"domain": "lattice", "name": "table", "table": {"values": [1, 0.5]}, "decay": {"C": 1, "r": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(t.domain(), Domain::Lattice);
        assert!(matches!(
            StationaryKernel::from_json_str(r#"{"domain": "lattice", "name": "table", "table": {"values": [1]}}"#),
            Err(Error::DivergentTail(_))
        ));
        assert!(matches!(
            StationaryKernel::from_json_str(
                r#"{"domain": "lattice", "name": "table", "table": {"values": [1]}, "decay": {"C": 1, "r": 1.5}}"#
            ),
            Err(Error::DivergentTail(_))
        ));
        assert!(StationaryKernel::from_json_str(r#"{"domain": "line", "name": "ar1", "params": {"beta": 0.5}}"#)
            .is_err());
    }

    #[test]
    fn curve_csv() {
        let curve = spectral_curve(&ou_kernel(), 3, 2.0).unwrap();
        assert_eq!(curve[1], (1.0, 1.0));
        let csv = curve_to_csv(&curve);
        assert!(csv.starts_with("omega,density\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
