//! Constructive diagnostics: polynomial zero modes, kernel growth under
//! refinement, and the cutoff-polynomial Weyl sequence on unbounded domains.

use crate::assembly::{apply_t_max, apply_t_max_extended, assemble_t_min, dirac_from_t_min, DiracVariant};
use crate::domain::{truncated_measure, voxelize, Aabb, DomainSpec, VoxelDomain};
use crate::eigen::{dense_hermitian_eigenvalues, gram_kernel_dimensions, KernelCount, LanczosConfig};
use crate::error::{Error, Result};
use crate::report::{Check, VerificationReport};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Four-component field sampled at voxel nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinorField {
    pub positions: Vec<[f64; 3]>,
    pub components: Vec<[Complex64; 4]>,
}

impl SpinorField {
    /// CSV with columns `x,y,z,re1,im1,…,re4,im4`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,re1,im1,re2,im2,re3,im3,re4,im4\n");
        for (p, c) in self.positions.iter().zip(&self.components) {
            let _ = write!(out, "{},{},{}", p[0], p[1], p[2]);
            for z in c {
                let _ = write!(out, ",{:.17e},{:.17e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `(x₁ + i x₂)ⁿ`.
pub fn holomorphic_power(p: &[f64; 3], n: u32) -> Complex64 {
    Complex64::new(p[0], p[1]).powu(n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMode {
    pub n: u32,
    pub h: f64,
    #[serde(skip)]
    pub field: Option<SpinorField>,
    /// `‖T_max f‖` over every interior row, with `‖f‖ = 1`.
    pub r_total: f64,
    /// The same norm over rows whose stencil neighbourhood of radius 2 lies in `A`.
    pub r_interior: f64,
    /// Rows counted in `r_interior`.
    pub deep_rows: usize,
    /// The stencil evaluated on every node of `A` with zero extension, which
    /// adds the boundary-layer truncation error.
    pub r_extended: f64,
}

/// Normalized `((x₁ + i x₂)ⁿ, 0)` on the upper components and its residual
/// under the adjoint stencil.
pub fn polynomial_zero_mode(domain: &VoxelDomain, n: u32) -> Result<ZeroMode> {
    let na = domain.num_all();
    if na == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut upper = vec![Complex64::new(0.0, 0.0); 2 * na];
    for (a, u) in upper.iter_mut().take(na).enumerate() {
        *u = holomorphic_power(&domain.coords(a), n);
    }
    let norm = upper.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    upper.iter_mut().for_each(|z| *z /= norm);
    let out = apply_t_max(domain, &upper);
    let ni = domain.num_interior();
    let mut total = 0.0;
    let mut deep = 0.0;
    let mut deep_rows = 0;
    for (row, z) in out.iter().enumerate() {
        let a = domain.interior_node(row % ni);
        total += z.norm_sqr();
        if domain.axis_neighborhood_in_all(a, 2) {
            deep += z.norm_sqr();
            deep_rows += 1;
        }
    }
    let r_extended = apply_t_max_extended(domain, &upper).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let field = SpinorField {
        positions: (0..na).map(|a| domain.coords(a)).collect(),
        components: (0..na).map(|a| [upper[a], upper[na + a], zero, zero]).collect(),
    };
    Ok(ZeroMode { n, h: domain.h(), field: Some(field), r_total: total.sqrt(), r_interior: deep.sqrt(), deep_rows, r_extended })
}

/// Zero modes `n = 0..=n_max` with the interior residual bounded by `tol / h`.
pub fn verify_zero_modes(domain: &VoxelDomain, n_max: u32, tol: f64) -> Result<(Vec<ZeroMode>, VerificationReport)> {
    let mut report = VerificationReport::new();
    let mut modes = Vec::new();
    let bound = tol / domain.h();
    for n in 0..=n_max {
        let z = polynomial_zero_mode(domain, n)?;
        let check = Check::within(format!("zero_mode.n{n}.interior_residual"), z.r_interior, bound, "stencil")
            .with_note(format!(
                "r_total = {:.3e}, r_extended = {:.3e}, {} deep rows",
                z.r_total, z.r_extended, z.deep_rows
            ));
        report.push(if z.deep_rows == 0 { Check::skip(check.id, "no deep interior rows") } else { check });
        modes.push(z);
    }
    report.set_env("h", domain.h());
    report.set_env("zero_modes", &modes);
    Ok((modes, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGrowthRow {
    pub h: f64,
    pub num_all: usize,
    pub num_interior: usize,
    /// `2|B| = 2(|A| − |I|)`, a lower bound for `dim ker SS*`.
    pub lower_bound: usize,
    pub kernel_upper_gram: Option<KernelCount>,
    pub kernel_lower_gram: Option<KernelCount>,
    /// `dim ker(A_m − m)` from a dense eigendecomposition.
    pub kernel_dirac: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGrowthTable {
    pub mass: f64,
    pub rows: Vec<KernelGrowthRow>,
}

impl KernelGrowthTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,num_all,num_interior,lower_bound,kernel_gram,kernel_dirac\n");
        for r in &self.rows {
            let g = r.kernel_upper_gram.map(|k| k.dimension.to_string()).unwrap_or_default();
            let d = r.kernel_dirac.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", r.h, r.num_all, r.num_interior, r.lower_bound, g, d);
        }
        out
    }
}

/// Kernel dimensions at the mass along a refinement sequence.
pub fn kernel_growth(
    spec: &DomainSpec,
    bbox: &Aabb,
    m: f64,
    h_list: &[f64],
    dense_cap: usize,
    zero_tol: f64,
    lanczos: &LanczosConfig,
) -> Result<(KernelGrowthTable, VerificationReport)> {
    if h_list.is_empty() || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("h_list must be nonempty and decreasing".into()));
    }
    let mut rows = Vec::new();
    let mut report = VerificationReport::new();
    for &h in h_list {
        let domain = voxelize(spec, h, bbox)?;
        let s = assemble_t_min(&domain)?;
        let lower_bound = 2 * domain.num_boundary();
        let a = dirac_from_t_min(&s, m, DiracVariant::A)?;
        let (gram, kernel_dirac) = if a.nrows() <= dense_cap {
            let (lower, upper) = gram_kernel_dimensions(&s, zero_tol, dense_cap, lanczos)?;
            let e = dense_hermitian_eigenvalues(&a, dense_cap)?.eigenvalues;
            let scale = e.iter().fold(1.0f64, |x, v| x.max(v.abs()));
            let count = e.iter().filter(|v| (*v - m).abs() <= zero_tol * scale).count();
            (Some((lower, upper)), Some(count))
        } else {
            (None, None)
        };
        let tag = format!("h={h}");
        if let (Some((lower, upper)), Some(kd)) = (gram, kernel_dirac) {
            // At m = 0 both kernels sit at the mass.
            let expected = upper.dimension + if m == 0.0 { lower.dimension } else { 0 };
            report.push(Check::equal(format!("kernel_growth.identity[{tag}]"), kd, expected, "dense"));
            report.push(
                Check::holds(format!("kernel_growth.lower_bound[{tag}]"), upper.dimension >= lower_bound, "dense")
                    .with_note(format!("{} >= {lower_bound}", upper.dimension)),
            );
        }
        rows.push(KernelGrowthRow {
            h,
            num_all: domain.num_all(),
            num_interior: domain.num_interior(),
            lower_bound,
            kernel_upper_gram: gram.map(|g| g.1),
            kernel_lower_gram: gram.map(|g| g.0),
            kernel_dirac,
        });
    }
    let increasing = rows.windows(2).all(|w| w[1].lower_bound > w[0].lower_bound);
    report.push(Check::holds("kernel_growth.bound_strictly_increasing", increasing, "rank-count"));
    let table = KernelGrowthTable { mass: m, rows };
    report.set_env("kernel_growth", &table);
    Ok((table, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub n: u32,
    /// Weighted measure `μ(Ω_n)`.
    pub measure: f64,
    /// `μ(Ω_n ∖ Ω_{n−1}) / μ(Ω_{n−1})`, `None` where `μ(Ω_{n−1}) = 0`.
    pub alpha: Option<f64>,
    pub running_min: Option<f64>,
    /// `‖T_max h_n‖² / ‖h_n‖²` for the cutoff field `h_n`.
    pub rayleigh: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentSource {
    Pinned,
    Detected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylDiagnostic {
    pub k: u32,
    pub k_source: ExponentSource,
    pub h: f64,
    pub rows: Vec<WeylRow>,
    /// `max_n (q_n − α_n) / h` over rows with finite `α_n`.
    pub c_measured: f64,
}

impl WeylDiagnostic {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,measure,alpha,running_min,rayleigh\n");
        let opt = |o: Option<f64>| o.map(|v| format!("{v:.12}")).unwrap_or_else(|| "inf".into());
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.12},{},{},{:.12}", r.n, r.measure, opt(r.alpha), opt(r.running_min), r.rayleigh);
        }
        out
    }
}

/// Smallest exponent `k ≤ 4` whose weighted measure at least doubles between
/// `⌈n_max/2⌉` and `n_max`. A bounded truncation never grows, which rules the
/// domain out.
fn detect_exponent(spec: &DomainSpec, h: f64, n_max: u32) -> Result<u32> {
    let half = n_max.div_ceil(2) as f64;
    for k in 0..=4 {
        let far = truncated_measure(spec, k, n_max as f64, h);
        let near = truncated_measure(spec, k, half, h);
        if far > 0.0 && far >= 2.0 * near {
            return Ok(k);
        }
    }
    let full = truncated_measure(spec, 0, n_max as f64, h);
    let stable_from = (1..=n_max).find(|&n| truncated_measure(spec, 0, n as f64, h) == full).unwrap_or(n_max);
    Err(Error::BoundedDomain { stable_from: stable_from as usize })
}

fn cutoff_field(domain: &VoxelDomain, k: u32, n: f64) -> Vec<Complex64> {
    let na = domain.num_all();
    let mut upper = vec![Complex64::new(0.0, 0.0); 2 * na];
    for (a, u) in upper.iter_mut().take(na).enumerate() {
        let p = domain.coords(a);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let weight = if r <= n - 1.0 { 1.0 } else { (n - r).max(0.0) };
        if weight > 0.0 {
            *u = holomorphic_power(&p, k) * weight;
        }
    }
    upper
}

/// Measure ratios `α_n` of the truncations `Ω_n = Ω ∩ {|x| ≤ n}` and the
/// Rayleigh quotients of the cutoff fields `(n − |x|)⁺ ∧ 1 · (x₁ + i x₂)ᵏ`.
pub fn weyl_diagnostic(spec: &DomainSpec, h: f64, n_max: u32, k: Option<u32>) -> Result<WeylDiagnostic> {
    if n_max < 2 {
        return Err(Error::InvalidArgument("n_max must be at least 2".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    spec.validate()?;
    let (k, k_source) = match k {
        Some(k) => (k, ExponentSource::Pinned),
        None => (detect_exponent(spec, h, n_max)?, ExponentSource::Detected),
    };
    // Origin-aligned box one step beyond the largest truncation.
    let half = ((n_max as f64 + 1.0) / h).ceil() * h;
    let domain = voxelize(spec, h, &Aabb::centered(half))?;
    let measures: Vec<f64> = (0..=n_max).into_par_iter().map(|n| truncated_measure(spec, k, n as f64, h)).collect();
    let rows: Vec<(u32, f64, Option<f64>, f64)> = (2..=n_max)
        .into_par_iter()
        .map(|n| {
            let (cur, prev) = (measures[n as usize], measures[n as usize - 1]);
            let alpha = (prev > 0.0).then(|| (cur - prev) / prev);
            let f = cutoff_field(&domain, k, n as f64);
            let tf = apply_t_max(&domain, &f);
            let num: f64 = tf.iter().map(|z| z.norm_sqr()).sum();
            let den: f64 = f.iter().map(|z| z.norm_sqr()).sum();
            (n, cur, alpha, if den > 0.0 { num / den } else { f64::NAN })
        })
        .collect();
    let mut running: Option<f64> = None;
    let mut c_measured = f64::NEG_INFINITY;
    let rows = rows
        .into_iter()
        .map(|(n, measure, alpha, rayleigh)| {
            if let Some(a) = alpha {
                running = Some(running.map_or(a, |r: f64| r.min(a)));
                c_measured = c_measured.max((rayleigh - a) / h);
            }
            WeylRow { n, measure, alpha, running_min: running, rayleigh }
        })
        .collect();
    Ok(WeylDiagnostic { k, k_source, h, rows, c_measured })
}

/// Checks on a Weyl diagnostic: `α_n ≥ 0`, nondecreasing measures, a strictly
/// decreasing running minimum, and `q_n ≤ α_n + C·h`.
pub fn weyl_checks(d: &WeylDiagnostic, c_bound: f64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let finite: Vec<&WeylRow> = d.rows.iter().filter(|r| r.alpha.is_some()).collect();
    report.push(Check::holds(
        "weyl.measure_nondecreasing",
        d.rows.windows(2).all(|w| w[1].measure >= w[0].measure),
        "lattice-sum",
    ));
    report.push(Check::holds("weyl.alpha_nonnegative", finite.iter().all(|r| r.alpha.unwrap() >= 0.0), "lattice-sum"));
    let mins: Vec<f64> = finite.iter().filter_map(|r| r.running_min).collect();
    report.push(Check::holds(
        "weyl.running_min_strictly_decreasing",
        mins.len() >= 2 && mins.windows(2).all(|w| w[1] < w[0]),
        "lattice-sum",
    ));
    report.push(
        Check::within("weyl.rayleigh_bound", d.c_measured.max(0.0), c_bound, "cutoff-field")
            .with_note(format!("C measured = {:.6}, k = {} ({:?})", d.c_measured, d.k, d.k_source)),
    );
    report.set_env("weyl", d);
    report
}
