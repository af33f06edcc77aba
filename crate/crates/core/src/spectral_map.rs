//! The map between the Dirichlet Laplacian and the zigzag Dirac spectrum:
//! analytic cube reference values, the exact discrete map through the
//! induced Laplacian, and a continuum convergence study.

use crate::assembly::{assemble_t_min, dirac_from_t_min, induced_laplacian_from, reference_laplacian_7pt, DiracVariant};
use crate::domain::{voxelize, Aabb, DomainSpec, VoxelDomain};
use crate::eigen::{
    cluster, dense_hermitian_eigenvalues, gram_kernel_dimensions, lanczos_eig, lanczos_eig_deflated, ClusteredSpectrum,
    KernelCount, LanczosConfig, Target,
};
use crate::error::{Error, Result};
use crate::report::{Check, VerificationReport};
use crate::sparse::SparseOperator;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    AnalyticCube,
    ComputedInduced,
    Computed7pt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub value: f64,
    pub multiplicity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub source: SpectrumSource,
}

impl ReferenceSpectrum {
    fn from_clusters(c: &ClusteredSpectrum, source: SpectrumSource) -> Self {
        let entries = c
            .clusters
            .iter()
            .map(|cl| SpectrumEntry { value: cl.value, multiplicity: cl.multiplicity, label: None })
            .collect();
        Self { entries, source }
    }
}

/// Dirichlet eigenvalues `π²(k² + l² + n²) ≤ cutoff` of the unit cube,
/// grouped by value. Labels list the contributing index triples.
pub fn cube_dirichlet_spectrum(cutoff: f64) -> Result<ReferenceSpectrum> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff}")));
    }
    let qmax = (cutoff / (PI * PI)).floor() as u64;
    let kmax = (qmax as f64).sqrt() as u64 + 1;
    let mut by_sum: std::collections::BTreeMap<u64, Vec<(u64, u64, u64)>> = Default::default();
    for k in 1..=kmax {
        for l in 1..=kmax {
            for n in 1..=kmax {
                let q = k * k + l * l + n * n;
                if PI * PI * q as f64 <= cutoff {
                    by_sum.entry(q).or_default().push((k, l, n));
                }
            }
        }
    }
    let entries = by_sum
        .into_iter()
        .map(|(q, triples)| {
            let label = triples.iter().map(|(a, b, c)| format!("({a},{b},{c})")).collect::<Vec<_>>().join(" ");
            SpectrumEntry { value: PI * PI * q as f64, multiplicity: triples.len(), label: Some(label) }
        })
        .collect();
    Ok(ReferenceSpectrum { entries, source: SpectrumSource::AnalyticCube })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedDiracEntry {
    pub value: f64,
    /// `None` for the mass eigenvalue, whose multiplicity is fixed by the kernel.
    pub multiplicity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// `{m} ∪ {±√(λ + m²)}` with multiplicity `2k` for each entry `(λ, k)`, ascending.
pub fn predict_dirac_spectrum(reference: &ReferenceSpectrum, m: f64) -> Vec<PredictedDiracEntry> {
    let mut out = vec![PredictedDiracEntry { value: m, multiplicity: None, label: Some("kernel".into()) }];
    for e in &reference.entries {
        let root = (e.value + m * m).sqrt();
        for value in [root, -root] {
            out.push(PredictedDiracEntry { value, multiplicity: Some(2 * e.multiplicity), label: e.label.clone() });
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoremConfig {
    pub dense_cap: usize,
    pub lanczos: LanczosConfig,
    /// Number of lowest induced-Laplacian clusters in the window.
    pub window: usize,
    /// `|e² − m² − λ| ≤ map_tol·(λ + m²)`.
    pub map_tol: f64,
    /// Cluster gap tolerance relative to the spectral span.
    pub cluster_tol: f64,
    /// Zero threshold for Gram kernels, relative to the operator norm.
    pub zero_tol: f64,
    /// Eigenpairs per deflated Lanczos run on the large path.
    pub batch: usize,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self {
            dense_cap: 4096,
            lanczos: LanczosConfig::default(),
            window: 6,
            map_tol: 1e-8,
            cluster_tol: 1e-8,
            zero_tol: 1e-10,
            batch: 16,
        }
    }
}

fn span(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

fn cluster_rel(values: &[f64], rel: f64) -> ClusteredSpectrum {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    cluster(values, (rel * span(values)).max(1e-14 * scale))
}

/// Repeated deflated Lanczos runs until one adds no eigenvalue inside the
/// window. A single Krylov run sees one copy of a repeated eigenvalue, so the
/// repetition is what makes the multiplicities trustworthy. The target must
/// order every window value ahead of every outside value, so a run that
/// returns nothing inside means the window is exhausted.
fn deflated_window(
    op: &SparseOperator,
    target: Target,
    batch: usize,
    inside: &dyn Fn(f64) -> bool,
    cfg: &LanczosConfig,
    max_total: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut values = Vec::new();
    let mut runs = 0;
    loop {
        let free = op.nrows() - locked.len();
        if free == 0 {
            break;
        }
        let r = lanczos_eig_deflated(op, batch.min(free), target, cfg, &locked)?;
        runs += 1;
        let before = values.len();
        for (v, x) in r.eigenvalues.iter().zip(r.eigenvectors.expect("lanczos returns vectors")) {
            if inside(*v) {
                values.push(*v);
            }
            locked.push(x);
        }
        if values.len() == before {
            break;
        }
        if values.len() > max_total {
            return Err(Error::WindowMismatch(format!("more than {max_total} eigenvalues inside the window")));
        }
    }
    values.sort_by(f64::total_cmp);
    Ok((values, runs))
}

struct Window {
    /// Induced-Laplacian clusters inside the window.
    laplacian: ClusteredSpectrum,
    /// Upper bound of the window in λ, halfway to the next cluster.
    bound: f64,
    complete: bool,
}

fn laplacian_window(l: &SparseOperator, cfg: &TheoremConfig) -> Result<(Window, String)> {
    let (values, method) = if l.nrows() <= cfg.dense_cap {
        (dense_hermitian_eigenvalues(l, cfg.dense_cap)?.eigenvalues, "dense".to_string())
    } else {
        // A first run locates the window; the deflated sweep fills in multiplicities.
        let k = (4 * cfg.window).min(l.nrows());
        let probe = lanczos_eig(l, k, Target::Smallest, &cfg.lanczos)?;
        let c = cluster_rel(&probe.eigenvalues, cfg.cluster_tol);
        let cut = if c.len() > cfg.window {
            0.5 * (c.clusters[cfg.window - 1].value + c.clusters[cfg.window].value)
        } else {
            f64::INFINITY
        };
        let (vals, runs) = deflated_window(l, Target::Smallest, cfg.batch, &|v| v < cut, &cfg.lanczos, l.nrows())?;
        (vals, format!("lanczos-deflated({runs} runs)"))
    };
    let all = cluster_rel(&values, cfg.cluster_tol);
    let complete = all.len() > cfg.window;
    let w = cfg.window.min(all.len());
    let bound = if complete { 0.5 * (all.clusters[w - 1].value + all.clusters[w].value) } else { f64::INFINITY };
    let laplacian = ClusteredSpectrum { clusters: all.clusters[..w].to_vec(), tol: all.tol };
    Ok((Window { laplacian, bound, complete }, method))
}

/// Verifies that the zigzag Dirac spectrum is the image of the induced
/// Laplacian spectrum under `λ ↦ ±√(λ + m²)` with doubled multiplicities,
/// that the mass eigenvalue carries the kernel of `SS*`, and that the open
/// gap `(−|m|, |m|)` is empty.
pub fn verify_theorem(domain: &VoxelDomain, m: f64, cfg: &TheoremConfig) -> Result<VerificationReport> {
    if cfg.window == 0 {
        return Err(Error::InvalidArgument("window must contain at least one cluster".into()));
    }
    let mut report = VerificationReport::new();
    report.set_env("h", domain.h());
    report.set_env("mass", m);
    report.set_env("num_all", domain.num_all());
    report.set_env("num_interior", domain.num_interior());

    let s = assemble_t_min(domain)?;
    let l = induced_laplacian_from(&s)?;
    let a = dirac_from_t_min(&s, m, DiracVariant::A)?;
    let (window, l_method) = laplacian_window(&l, cfg)?;
    report.set_env("laplacian_method", &l_method);
    report.set_env("window_bound", if window.bound.is_finite() { Some(window.bound) } else { None });
    if !window.complete {
        report.set_env("window_note", "fewer clusters than requested; the window covers the whole spectrum");
    }
    let m2 = m * m;
    let top = (window.bound + m2).sqrt();
    let ma = m.abs();

    let dense = a.nrows() <= cfg.dense_cap;
    let (dirac_values, dirac_method) = if dense {
        (dense_hermitian_eigenvalues(&a, cfg.dense_cap)?.eigenvalues, "dense".to_string())
    } else {
        if !window.complete {
            return Err(Error::WindowMismatch("window bound is undetermined for the large path".into()));
        }
        let expected: usize = window.laplacian.clusters.iter().map(|c| 2 * c.multiplicity).sum();
        let guard = (ma + top) * 1e-9 + 1e-12;
        let max_total = 4 * expected + 64;
        let mut all = Vec::new();
        let mut runs = 0;
        for sign in [1.0, -1.0] {
            let inside = |v: f64| v * sign > ma + guard && v.abs() < top;
            // Window center, nudged off any symmetric eigenvalue so the shift stays regular.
            let center = sign * (0.5 * (ma + top) + 1.37e-3 * (top - ma));
            let (vals, r) = deflated_window(&a, Target::Nearest(center), cfg.batch, &inside, &cfg.lanczos, max_total)?;
            runs += r;
            all.extend(vals);
        }
        all.sort_by(f64::total_cmp);
        (all, format!("lanczos-shift-invert-deflated({runs} runs)"))
    };
    report.set_env("dirac_method", &dirac_method);

    let norm = if dense { dirac_values.iter().fold(0.0f64, |x, v| x.max(v.abs())) } else { a.inf_norm() };
    let dirac = cluster_rel(&dirac_values, cfg.cluster_tol);
    let gap_tol = dirac.tol.max(1e-12 * norm);
    let in_window = |e: f64| e.abs() > ma + gap_tol && e.abs() < top;
    let window_clusters: Vec<_> = dirac.clusters.iter().filter(|c| in_window(c.value)).collect();

    // (a) every Dirac cluster in the window maps onto an induced-Laplacian cluster
    let mut worst = 0.0f64;
    for c in &window_clusters {
        let mu = c.value * c.value - m2;
        let best = window
            .laplacian
            .clusters
            .iter()
            .map(|lc| (mu - lc.value).abs() / (lc.value + m2))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    report.push(
        Check::within("theorem.exact_map", worst, cfg.map_tol, &dirac_method)
            .with_note(format!("{} Dirac clusters in the window", window_clusters.len())),
    );

    // (a') and conversely, with (b) doubled multiplicities on both signs
    let mut missing = 0usize;
    let mut mult_mismatch = 0usize;
    let mut rows = Vec::new();
    for lc in &window.laplacian.clusters {
        let root = (lc.value + m2).sqrt();
        let tol = cfg.map_tol * (lc.value + m2) / (2.0 * root) + gap_tol;
        for e in [root, -root] {
            let found = dirac.find(e, tol);
            match found {
                None => missing += 1,
                Some(dc) => mult_mismatch += dc.multiplicity.abs_diff(2 * lc.multiplicity),
            }
            rows.push((lc.value, lc.multiplicity, e, found.map_or(0, |d| d.multiplicity)));
        }
    }
    report.push(Check::equal("theorem.exact_map.converse", missing, 0, &dirac_method));
    report.push(
        Check::within("theorem.multiplicity_doubling", mult_mismatch as f64, 0.0, &dirac_method)
            .with_note(format!("{} induced-Laplacian clusters", window.laplacian.len())),
    );
    report.set_env(
        "window",
        rows.iter()
            .map(|(l, ml, e, md)| serde_json::json!({"lambda": l, "mult_laplacian": ml, "dirac": e, "mult_dirac": md}))
            .collect::<Vec<_>>(),
    );

    // (c), (d) kernels at ±m
    let (ker_lower, ker_upper): (KernelCount, KernelCount) = gram_kernel_dimensions(&s, cfg.zero_tol, cfg.dense_cap, &cfg.lanczos)?;
    let structural = 2 * domain.num_boundary();
    report.set_env("kernel_lower", ker_lower);
    report.set_env("kernel_upper", ker_upper);
    report.push(Check::holds("theorem.kernel.structural_bound", ker_upper.dimension >= structural, "rank-count").with_note(
        format!("dim ker SS* = {} >= 2|B| = {structural}", ker_upper.dimension),
    ));
    let kernel_method = format!("{:?}", ker_upper.method).to_lowercase();
    if dense {
        let at = |x: f64| dirac.multiplicity_at(x, gap_tol);
        if m == 0.0 {
            report.push(Check::equal("theorem.kernel.plus_m", at(0.0), ker_upper.dimension + ker_lower.dimension, &kernel_method));
            report.push(Check::skip("theorem.kernel.minus_m", "m = 0 merges both kernels"));
            report.push(Check::skip("theorem.gap", "m = 0 has no gap"));
        } else {
            report.push(Check::equal("theorem.kernel.plus_m", at(m), ker_upper.dimension, &kernel_method));
            let minus = Check::equal("theorem.kernel.minus_m", at(-m), ker_lower.dimension, &kernel_method);
            let minus = if ker_lower.dimension > 0 {
                minus.with_note("doubling artifact: S*S has a kernel")
            } else {
                minus
            };
            report.push(minus);
            let inside = dirac_values.iter().filter(|e| e.abs() < ma - gap_tol).count();
            report.push(Check::equal("theorem.gap", inside, 0, "dense"));
        }
    } else {
        report.push(Check::skip("theorem.kernel.plus_m", "mass cluster not resolved on the large path"));
        report.push(Check::skip("theorem.kernel.minus_m", "mass cluster not resolved on the large path"));
        if m != 0.0 {
            let inside = dirac_values.iter().filter(|e| e.abs() < ma - gap_tol).count();
            report.push(Check::equal("theorem.gap", inside, 0, &dirac_method).with_note("window search only"));
        } else {
            report.push(Check::skip("theorem.gap", "m = 0 has no gap"));
        }
    }

    // side-by-side spectra for the report
    report.set_env("induced_spectrum", ReferenceSpectrum::from_clusters(&window.laplacian, SpectrumSource::ComputedInduced));
    let seven = reference_laplacian_7pt(domain)?;
    let seven_vals = if seven.nrows() <= cfg.dense_cap {
        dense_hermitian_eigenvalues(&seven, cfg.dense_cap)?.eigenvalues
    } else {
        lanczos_eig(&seven, cfg.window.min(seven.nrows()), Target::Smallest, &cfg.lanczos)?.eigenvalues
    };
    let seven_clusters = cluster_rel(&seven_vals, cfg.cluster_tol);
    let seven_window = ClusteredSpectrum {
        clusters: seven_clusters.clusters.into_iter().take(cfg.window).collect(),
        tol: seven_clusters.tol,
    };
    report.set_env("seven_point_spectrum", ReferenceSpectrum::from_clusters(&seven_window, SpectrumSource::Computed7pt));
    Ok(report)
}

/// One refinement level of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub seven_point: f64,
    pub seven_point_reference: f64,
    pub seven_point_rel_error: f64,
    pub seven_point_order: Option<f64>,
    pub induced_smallest: f64,
    /// Smallest positive Dirac cluster above the mass, doublers merged.
    pub dirac: f64,
    pub dirac_reference: f64,
    pub dirac_rel_error: f64,
    pub dirac_order: Option<f64>,
    /// Dirac eigenvalues merged into the reported value.
    pub merged: usize,
    pub dirac_method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mass: f64,
    pub merge_tol: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// CSV: `h,lambda_computed,lambda_ref,rel_error,order` for the 7-point
    /// Laplacian, followed by the Dirac columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "h,lambda_computed,lambda_ref,rel_error,order,induced_smallest,dirac_computed,dirac_ref,dirac_rel_error,dirac_order,merged\n",
        );
        let opt = |o: Option<f64>| o.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.12},{:.12},{:.6e},{},{:.12},{:.12},{:.12},{:.6e},{},{}",
                r.h,
                r.seven_point,
                r.seven_point_reference,
                r.seven_point_rel_error,
                opt(r.seven_point_order),
                r.induced_smallest,
                r.dirac,
                r.dirac_reference,
                r.dirac_rel_error,
                opt(r.dirac_order),
                r.merged
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub dense_cap: usize,
    pub lanczos: LanczosConfig,
    /// Relative gap, in `λ = e² − m²`, below which doubler copies are merged.
    pub merge_tol: f64,
    /// Eigenpairs requested around the shift on the large path.
    pub count: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { dense_cap: 4096, lanczos: LanczosConfig::default(), merge_tol: 0.05, count: 8 }
    }
}

/// Lowest cluster of positive values above `|m|`, merged in `λ = e² − m²`
/// with a gap tolerance `merge_tol·λ_min`. Returns the mean and member count.
fn merged_lowest(values: &[f64], m: f64, merge_tol: f64) -> Option<(f64, usize)> {
    let mut pos: Vec<f64> = values.iter().copied().filter(|&e| e > m.abs() * (1.0 + 1e-9) + 1e-12).collect();
    pos.sort_by(f64::total_cmp);
    let lambdas: Vec<f64> = pos.iter().map(|e| e * e - m * m).collect();
    let first = *lambdas.first()?;
    let c = cluster(&lambdas, merge_tol * first);
    let lowest = &c.clusters[0];
    let mean = lowest.members.iter().map(|&i| pos[i]).sum::<f64>() / lowest.multiplicity as f64;
    Some((mean, lowest.multiplicity))
}

fn observed_order(e_prev: f64, e_cur: f64, h_prev: f64, h_cur: f64) -> Option<f64> {
    (e_prev > 0.0 && e_cur > 0.0).then(|| (e_prev / e_cur).ln() / (h_prev / h_cur).ln())
}

/// Convergence of the smallest 7-point eigenvalue to `3π²` and of the
/// smallest positive Dirac cluster to `√(3π² + m²)` on the unit cube.
pub fn convergence_study(spec: &DomainSpec, h_list: &[f64], m: f64, cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    if *spec != DomainSpec::unit_cube() {
        return Err(Error::InvalidArgument("the analytic reference covers the unit cube only".into()));
    }
    if h_list.is_empty() || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("h_list must be nonempty and decreasing".into()));
    }
    let lambda_ref = 3.0 * PI * PI;
    let dirac_ref = (lambda_ref + m * m).sqrt();
    let bbox = Aabb::new([0.0; 3], [1.0; 3]);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &h in h_list {
        let domain = voxelize(spec, h, &bbox)?;
        let seven = reference_laplacian_7pt(&domain)?;
        let seven_point = if seven.nrows() <= cfg.dense_cap {
            dense_hermitian_eigenvalues(&seven, cfg.dense_cap)?.eigenvalues[0]
        } else {
            lanczos_eig(&seven, 1, Target::Smallest, &cfg.lanczos)?.eigenvalues[0]
        };
        let s = assemble_t_min(&domain)?;
        let l = induced_laplacian_from(&s)?;
        let induced_smallest = if l.nrows() <= cfg.dense_cap {
            dense_hermitian_eigenvalues(&l, cfg.dense_cap)?.eigenvalues[0]
        } else {
            lanczos_eig(&l, 1, Target::Smallest, &cfg.lanczos)?.eigenvalues[0]
        };
        let a = dirac_from_t_min(&s, m, DiracVariant::A)?;
        let (values, dirac_method) = if a.nrows() <= cfg.dense_cap {
            (dense_hermitian_eigenvalues(&a, cfg.dense_cap)?.eigenvalues, "dense".to_string())
        } else {
            // Shift below the lowest mapped value, far from the mass kernel.
            let shift = (0.9 * induced_smallest + m * m).sqrt();
            let r = lanczos_eig(&a, cfg.count.min(a.nrows()), Target::Nearest(shift), &cfg.lanczos)?;
            (r.eigenvalues, r.method)
        };
        let (dirac, merged) = merged_lowest(&values, m, cfg.merge_tol)
            .ok_or_else(|| Error::InvalidArgument(format!("no positive Dirac eigenvalue above |m| at h = {h}")))?;
        let seven_point_rel_error = (seven_point - lambda_ref).abs() / lambda_ref;
        let dirac_rel_error = (dirac - dirac_ref).abs() / dirac_ref;
        let (seven_point_order, dirac_order) = match rows.last() {
            Some(p) => (
                observed_order(p.seven_point_rel_error, seven_point_rel_error, p.h, h),
                observed_order(p.dirac_rel_error, dirac_rel_error, p.h, h),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            h,
            seven_point,
            seven_point_reference: lambda_ref,
            seven_point_rel_error,
            seven_point_order,
            induced_smallest,
            dirac,
            dirac_reference: dirac_ref,
            dirac_rel_error,
            dirac_order,
            merged,
            dirac_method,
        });
    }
    Ok(ConvergenceTable { mass: m, merge_tol: cfg.merge_tol, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> VoxelDomain {
        voxelize(&DomainSpec::unit_cube(), 1.0 / n as f64, &Aabb::new([0.0; 3], [1.0; 3])).unwrap()
    }

    #[test]
    fn analytic_cube_spectrum() {
        let s = cube_dirichlet_spectrum(35.0).unwrap();
        assert_eq!(s.entries.len(), 1);
        assert!((s.entries[0].value - 29.608813203268074).abs() < 1e-12);
        let s = cube_dirichlet_spectrum(65.0).unwrap();
        let mults: Vec<usize> = s.entries.iter().map(|e| e.multiplicity).collect();
        assert_eq!(mults, vec![1, 3]);
        let s = cube_dirichlet_spectrum(120.0).unwrap();
        let twelve = s.entries.iter().find(|e| (e.value - 12.0 * PI * PI).abs() < 1e-9).unwrap();
        assert_eq!(twelve.multiplicity, 1);
        assert_eq!(twelve.label.as_deref(), Some("(2,2,2)"));
        assert!(cube_dirichlet_spectrum(0.0).is_err());
    }

    #[test]
    fn coincident_sums_are_grouped() {
        // 27 = 1 + 1 + 25 = 9 + 9 + 9: three permutations plus (3,3,3).
        let s = cube_dirichlet_spectrum(27.5 * PI * PI).unwrap();
        let e = s.entries.iter().find(|e| (e.value - 27.0 * PI * PI).abs() < 1e-9).unwrap();
        assert_eq!(e.multiplicity, 4);
    }

    #[test]
    fn predicted_dirac_entries() {
        let r = ReferenceSpectrum {
            entries: vec![SpectrumEntry { value: 3.0 * PI * PI, multiplicity: 1, label: None }],
            source: SpectrumSource::AnalyticCube,
        };
        let p = predict_dirac_spectrum(&r, 1.0);
        assert_eq!(p.len(), 3);
        assert!((p[2].value - 5.532_6).abs() < 1e-4 && p[2].multiplicity == Some(2));
        assert!(p[1].multiplicity.is_none() && p[1].value == 1.0);
        let r6 = ReferenceSpectrum {
            entries: vec![SpectrumEntry { value: 6.0 * PI * PI, multiplicity: 3, label: None }],
            source: SpectrumSource::AnalyticCube,
        };
        let p = predict_dirac_spectrum(&r6, 0.0);
        assert!((p[0].value + 7.695_299).abs() < 1e-5 && p[0].multiplicity == Some(6));
        let p = predict_dirac_spectrum(&r6, -2.0);
        assert!(p.iter().any(|e| e.value == -2.0));
        assert!(p.iter().filter(|e| e.multiplicity.is_some()).all(|e| e.value.abs() >= 2.0));
    }

    #[test]
    fn theorem_on_small_cube_dense() {
        for m in [0.0, 1.0] {
            let r = verify_theorem(&cube(6), m, &TheoremConfig::default()).unwrap();
            assert!(r.passed(), "{}", r.to_json());
        }
    }

    #[test]
    fn theorem_large_path_agrees_with_dense() {
        let d = cube(6);
        let dense = verify_theorem(&d, 1.0, &TheoremConfig { window: 3, ..Default::default() }).unwrap();
        let sparse = verify_theorem(&d, 1.0, &TheoremConfig { window: 3, dense_cap: 100, batch: 8, ..Default::default() }).unwrap();
        assert!(sparse.passed(), "{}", sparse.to_json());
        assert_eq!(dense.env["window"], sparse.env["window"].clone().as_array().map(|rows| {
            serde_json::Value::Array(
                rows.iter()
                    .zip(dense.env["window"].as_array().unwrap())
                    .map(|(s, d)| {
                        let mut s = s.clone();
                        s["lambda"] = d["lambda"].clone();
                        s["dirac"] = d["dirac"].clone();
                        s
                    })
                    .collect(),
            )
        }).unwrap());
    }

    #[test]
    fn single_refinement_has_no_order() {
        let t = convergence_study(&DomainSpec::unit_cube(), &[1.0 / 6.0], 1.0, &ConvergenceConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].seven_point_order.is_none());
        // Separable 7-point formula: 3 · (4/h²) sin²(πh/2).
        let h = 1.0 / 6.0;
        let exact = 12.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((t.rows[0].seven_point - exact).abs() < 1e-10 * exact);
        // Parity sublattice of side 1: (3/h²) sin²(πh), mapped to the Dirac side.
        let induced = 3.0 / (h * h) * (PI * h).sin().powi(2);
        assert!((t.rows[0].induced_smallest - induced).abs() < 1e-10 * induced);
        assert!((t.rows[0].dirac - (induced + 1.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn convergence_rejects_bad_input() {
        let cfg = ConvergenceConfig::default();
        assert!(convergence_study(&DomainSpec::ball([0.0; 3], 1.0), &[0.25], 1.0, &cfg).is_err());
        assert!(convergence_study(&DomainSpec::unit_cube(), &[0.1, 0.2], 1.0, &cfg).is_err());
    }

    proptest::proptest! {
        #[test]
        fn predicted_spectrum_pairs_and_doubles(lambdas in proptest::collection::vec((0.1f64..100.0, 1usize..5), 1..8), m in -3.0f64..3.0) {
            let r = ReferenceSpectrum {
                entries: lambdas.iter().map(|&(value, multiplicity)| SpectrumEntry { value, multiplicity, label: None }).collect(),
                source: SpectrumSource::ComputedInduced,
            };
            let p = predict_dirac_spectrum(&r, m);
            proptest::prop_assert_eq!(p.len(), 2 * lambdas.len() + 1);
            let total: usize = p.iter().filter_map(|e| e.multiplicity).sum();
            proptest::prop_assert_eq!(total, 4 * lambdas.iter().map(|l| l.1).sum::<usize>());
            proptest::prop_assert!(p.windows(2).all(|w| w[0].value <= w[1].value));
            for e in p.iter().filter(|e| e.multiplicity.is_some()) {
                proptest::prop_assert!(e.value.abs() > m.abs());
                proptest::prop_assert!(p.iter().any(|f| f.value == -e.value && f.multiplicity == e.multiplicity));
            }
        }
    }
}
