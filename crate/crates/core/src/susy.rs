//! Supersymmetric block operators `D_m = [[m, S], [S*, −m]]`: spectrum
//! prediction from the Gram operators, multiplicity relations, eigenvector
//! lifting, and the symmetry checks specific to the zigzag Dirac operator.

use crate::algebra::constant_matrices;
use crate::assembly::{
    assemble_dirac, assemble_t_min, beta_lift, dirac_from_t_min, embed_padded, lift_padded, stencils_are_real,
    time_reversal_lift, DiracVariant,
};
use crate::domain::VoxelDomain;
use crate::eigen::{cluster, dense_hermitian_eigenvalues, dense_matrix_eig, ClusteredSpectrum};
use crate::error::{Error, Result};
use crate::report::{Check, VerificationReport};
use crate::sparse::SparseOperator;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gram eigenvalues within this multiple of the spectral scale count as zero.
const GRAM_ZERO: f64 = 1e-10;

/// An operator `S` from the lower space `ℂ^cols` to the upper space `ℂ^rows`
/// together with a mass.
#[derive(Clone, Debug)]
pub struct SusyPair {
    s: SparseOperator,
    mass: f64,
}

impl SusyPair {
    pub fn new(s: SparseOperator, mass: f64) -> Self {
        Self { s, mass }
    }

    /// The zigzag pair: `S = T_min` on the voxelized domain.
    pub fn from_domain(domain: &VoxelDomain, mass: f64) -> Result<Self> {
        Ok(Self::new(assemble_t_min(domain)?, mass))
    }

    /// Entries drawn from the complex standard normal distribution; an
    /// optional column is zeroed to force rank deficiency.
    pub fn random(rows: usize, cols: usize, zero_column: Option<usize>, mass: f64, rng: &mut impl Rng) -> Self {
        let mut trip = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
                if Some(j) != zero_column {
                    trip.push((i, j, z));
                }
            }
        }
        Self::new(SparseOperator::from_triplets(rows, cols, &trip), mass)
    }

    pub fn s(&self) -> &SparseOperator {
        &self.s
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn upper_dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn lower_dim(&self) -> usize {
        self.s.ncols()
    }

    pub fn dirac(&self) -> Result<SparseOperator> {
        dirac_from_t_min(&self.s, self.mass, DiracVariant::A)
    }

    /// `S*S` on the lower space.
    pub fn gram_lower(&self) -> Result<SparseOperator> {
        self.s.adjoint().matmul(&self.s)?.hermitian_part()
    }

    /// `SS*` on the upper space.
    pub fn gram_upper(&self) -> Result<SparseOperator> {
        self.s.matmul(&self.s.adjoint())?.hermitian_part()
    }
}

/// `+1` for `m ≥ 0`, `−1` otherwise.
pub fn sign_star(m: f64) -> f64 {
    if m >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusyPredictedSpectrum {
    pub mass: f64,
    /// `−sign*(m)·√(λ + m²)` for each eigenvalue λ of `S*S`, in input order.
    pub negative_branch: Vec<f64>,
    /// `+sign*(m)·√(λ + m²)` for each eigenvalue λ of `SS*`, in input order.
    pub positive_branch: Vec<f64>,
}

impl SusyPredictedSpectrum {
    /// Both branches merged, ascending, multiplicities repeated.
    pub fn values(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.negative_branch.iter().chain(&self.positive_branch).copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

fn gram_scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

/// Clamps rounding-level negatives and snaps near-zero Gram eigenvalues to zero.
fn clean_gram(values: &[f64], scale: f64) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v < -GRAM_ZERO * scale {
                Err(Error::NegativeGramEigenvalue { value: v })
            } else if v.abs() <= GRAM_ZERO * scale {
                Ok(0.0)
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Spectrum of `D_m` predicted from the spectra of `S*S` and `SS*`.
pub fn predict_susy_spectrum(eigs_sts: &[f64], eigs_sst: &[f64], m: f64) -> Result<SusyPredictedSpectrum> {
    let scale = gram_scale(eigs_sts).max(gram_scale(eigs_sst));
    let lower = clean_gram(eigs_sts, scale)?;
    let upper = clean_gram(eigs_sst, scale)?;
    let s = sign_star(m);
    Ok(SusyPredictedSpectrum {
        mass: m,
        negative_branch: lower.iter().map(|l| -s * (l + m * m).sqrt()).collect(),
        positive_branch: upper.iter().map(|l| s * (l + m * m).sqrt()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SusyConfig {
    pub dense_cap: usize,
    /// Spectrum matching tolerance relative to `‖D_m‖`.
    pub match_tol: f64,
    /// Cluster gap tolerance relative to the spectral span.
    pub cluster_tol: f64,
    /// Block-square tolerance relative to the largest entry of `diag(SS*+m², S*S+m²)`.
    pub block_square_tol: f64,
    /// Lifted-vector residual tolerance relative to `‖D_m‖`.
    pub lift_tol: f64,
    /// Number of lowest positive Gram clusters to lift on each side (0 disables).
    pub lift_clusters: usize,
}

impl Default for SusyConfig {
    fn default() -> Self {
        Self {
            dense_cap: 4096,
            match_tol: 1e-9,
            cluster_tol: 1e-8,
            block_square_tol: 1e-12,
            lift_tol: 1e-8,
            lift_clusters: 0,
        }
    }
}

fn span(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Two-sided Hausdorff distance between cluster representatives.
pub fn hausdorff(a: &ClusteredSpectrum, b: &ClusteredSpectrum) -> f64 {
    let one_sided = |x: &ClusteredSpectrum, y: &ClusteredSpectrum| {
        x.clusters
            .iter()
            .map(|c| y.clusters.iter().map(|d| (c.value - d.value).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// `‖D_m² − diag(SS* + m², S*S + m²)‖_max` and the scale it is measured against.
pub fn block_square_deviation(pair: &SusyPair) -> Result<(f64, f64)> {
    let d = pair.dirac()?;
    let m2 = Complex64::new(pair.mass * pair.mass, 0.0);
    let upper = pair.s.matmul(&pair.s.adjoint())?.add(&SparseOperator::scaled_identity(pair.upper_dim(), m2))?;
    let lower = pair.s.adjoint().matmul(&pair.s)?.add(&SparseOperator::scaled_identity(pair.lower_dim(), m2))?;
    let (nu, nl) = (pair.upper_dim(), pair.lower_dim());
    let expected = SparseOperator::from_blocks(&[nu, nl], &[nu, nl], &[&[Some(&upper), None], &[None, Some(&lower)]])?;
    let square = d.matmul(&d)?;
    Ok((square.max_abs_diff(&expected), expected.max_abs().max(1.0)))
}

/// Clustered dense spectra shared by the spectrum and multiplicity checks.
struct Spectra {
    dirac: Vec<f64>,
    dirac_clusters: ClusteredSpectrum,
    lower: Vec<f64>,
    upper: Vec<f64>,
    norm: f64,
    match_tol: f64,
}

impl Spectra {
    fn multiplicity_at(&self, x: f64) -> usize {
        self.dirac_clusters.multiplicity_at(x, self.match_tol)
    }
}

fn compute_spectra(pair: &SusyPair, cfg: &SusyConfig) -> Result<Spectra> {
    let d = pair.dirac()?;
    if d.nrows() > cfg.dense_cap {
        return Err(Error::IncompleteVerification(format!(
            "D_m has size {} above the dense cap {}",
            d.nrows(),
            cfg.dense_cap
        )));
    }
    let dirac = dense_hermitian_eigenvalues(&d, cfg.dense_cap)?.eigenvalues;
    let lower = dense_hermitian_eigenvalues(&pair.gram_lower()?, cfg.dense_cap)?.eigenvalues;
    let upper = dense_hermitian_eigenvalues(&pair.gram_upper()?, cfg.dense_cap)?.eigenvalues;
    let norm = dirac.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let ctol = (cfg.cluster_tol * span(&dirac)).max(1e-14 * norm);
    let dirac_clusters = cluster(&dirac, ctol);
    Ok(Spectra { dirac, dirac_clusters, lower, upper, norm, match_tol: (cfg.match_tol * norm).max(ctol) })
}

/// Gram spectrum after zero-snapping, clustered.
fn gram_clusters(values: &[f64], scale: f64, cluster_tol: f64) -> Result<ClusteredSpectrum> {
    let mut v = clean_gram(values, scale)?;
    v.sort_by(f64::total_cmp);
    let tol = (cluster_tol * span(&v)).max(1e-14 * scale);
    Ok(cluster(&v, tol))
}

/// Verifies self-adjointness, the block-square identity, the spectrum
/// formula and all multiplicity relations of a supersymmetric pair.
pub fn verify_susy(pair: &SusyPair, cfg: &SusyConfig) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    let m = pair.mass;
    report.set_env("mass", m);
    report.set_env("upper_dim", pair.upper_dim());
    report.set_env("lower_dim", pair.lower_dim());

    let d = pair.dirac()?;
    report.push(Check::within("susy.hermitian", d.hermitian_deviation(), 0.0, "exact"));

    let (dev, scale) = block_square_deviation(pair)?;
    report.push(Check::within("susy.block_square", dev, cfg.block_square_tol * scale, "sparse-product").with_note(format!("scale {scale:e}")));

    let sp = compute_spectra(pair, cfg)?;
    report.set_env("dirac_norm", sp.norm);
    let predicted = predict_susy_spectrum(&sp.lower, &sp.upper, m)?.values();
    let pred_clusters = cluster(&predicted, sp.dirac_clusters.tol);
    let dist = hausdorff(&sp.dirac_clusters, &pred_clusters);
    report.push(Check::within("susy.spectrum_match", dist, cfg.match_tol * sp.norm, "dense"));

    let mismatched = sp
        .dirac_clusters
        .clusters
        .iter()
        .filter(|c| pred_clusters.multiplicity_at(c.value, sp.match_tol) != c.multiplicity)
        .count();
    report.push(Check::within("susy.cluster_multiplicity", mismatched as f64, 0.0, "dense").with_note(format!(
        "{} computed clusters, {} predicted",
        sp.dirac_clusters.len(),
        pred_clusters.len()
    )));

    for c in multiplicity_checks(&sp, m, cfg)? {
        report.push(c);
    }

    if m != 0.0 {
        let inside = sp.dirac.iter().filter(|e| e.abs() < m.abs() - sp.match_tol).count();
        report.push(Check::equal("susy.gap", inside, 0, "dense"));
    } else {
        report.push(Check::skip("susy.gap", "m = 0 has no gap"));
    }

    if cfg.lift_clusters > 0 {
        for c in lift_checks(pair, &sp, cfg)? {
            report.push(c);
        }
    }
    Ok(report)
}

fn multiplicity_checks(sp: &Spectra, m: f64, cfg: &SusyConfig) -> Result<Vec<Check>> {
    let s = sign_star(m);
    let scale = gram_scale(&sp.lower).max(gram_scale(&sp.upper));
    let lower = gram_clusters(&sp.lower, scale, cfg.cluster_tol)?;
    let upper = gram_clusters(&sp.upper, scale, cfg.cluster_tol)?;
    let branch = |g: &ClusteredSpectrum, sign: f64| {
        let mut mismatch = 0usize;
        let mut count = 0usize;
        for c in g.clusters.iter().filter(|c| c.value > 0.0) {
            count += 1;
            let e = sign * (c.value + m * m).sqrt();
            mismatch += sp.multiplicity_at(e).abs_diff(c.multiplicity);
        }
        (mismatch, count)
    };
    let (lm, lc) = branch(&lower, -s);
    let (um, uc) = branch(&upper, s);
    let ker_lower = lower.multiplicity_at(0.0, 0.0);
    let ker_upper = upper.multiplicity_at(0.0, 0.0);
    let mut out = vec![
        Check::within("susy.mult.lower_branch", lm as f64, 0.0, "dense").with_note(format!("{lc} positive clusters of S*S")),
        Check::within("susy.mult.upper_branch", um as f64, 0.0, "dense").with_note(format!("{uc} positive clusters of SS*")),
    ];
    if m == 0.0 {
        out.push(Check::equal("susy.kernel.sum", ker_lower + ker_upper, sp.multiplicity_at(0.0), "dense"));
        out.push(Check::skip("susy.kernel.upper", "m = 0 merges both kernels"));
        out.push(Check::skip("susy.kernel.lower", "m = 0 merges both kernels"));
    } else {
        out.push(Check::skip("susy.kernel.sum", "only for m = 0"));
        out.push(Check::equal("susy.kernel.upper", sp.multiplicity_at(m), ker_upper, "dense"));
        out.push(Check::equal("susy.kernel.lower", sp.multiplicity_at(-m), ker_lower, "dense"));
    }
    Ok(out)
}

/// Which Gram operator an eigenvector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftSide {
    /// Eigenvector of `SS*`; lifts to `+√(λ+m²)`.
    Upper,
    /// Eigenvector of `S*S`; lifts to `−√(λ+m²)`.
    Lower,
}

#[derive(Clone, Debug)]
pub struct LiftedVector {
    pub vector: Vec<Complex64>,
    pub eigenvalue: f64,
    /// `‖D_m Φ − e Φ‖ / ‖Φ‖`.
    pub residual: f64,
    /// `‖Φ‖ / ‖input‖`.
    pub norm_ratio: f64,
}

/// Lifts a Gram eigenvector to an eigenvector of `D_m`:
/// upper `Φ = (D_m + √(λ+m²))(ψ, 0)`, lower `Ψ = (D_m − √(λ+m²))(0, φ)`.
pub fn lift_eigenvector(pair: &SusyPair, vec: &[Complex64], lambda: f64, side: LiftSide) -> Result<LiftedVector> {
    let m = pair.mass;
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("Gram eigenvalue {lambda} is negative")));
    }
    let root = (lambda + m * m).sqrt();
    if root == 0.0 {
        return Err(Error::ZeroLift);
    }
    let (nu, nl) = (pair.upper_dim(), pair.lower_dim());
    let (vector, eigenvalue) = match side {
        LiftSide::Upper => {
            if vec.len() != nu {
                return Err(Error::DimensionMismatch(format!("upper vector has length {}, expected {nu}", vec.len())));
            }
            let mut out: Vec<Complex64> = vec.iter().map(|v| v * (m + root)).collect();
            out.extend(pair.s.adjoint().apply(vec));
            (out, root)
        }
        LiftSide::Lower => {
            if vec.len() != nl {
                return Err(Error::DimensionMismatch(format!("lower vector has length {}, expected {nl}", vec.len())));
            }
            let mut out = pair.s.apply(vec);
            out.extend(vec.iter().map(|v| v * (-(m + root))));
            (out, -root)
        }
    };
    let nin = vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nout = vector.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if nin == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if nout <= 1e-10 * root.max(1.0) * nin {
        return Err(Error::ZeroLift);
    }
    let dv = pair.dirac()?.apply(&vector);
    let residual = dv
        .iter()
        .zip(&vector)
        .map(|(a, v)| (a - v * eigenvalue).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / nout;
    Ok(LiftedVector { vector, eigenvalue, residual, norm_ratio: nout / nin })
}

/// Numerical rank of a set of columns after normalization.
pub fn numerical_rank(columns: &[Vec<Complex64>], tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let n = columns[0].len();
    let mat = DMatrix::from_fn(n, columns.len(), |i, j| {
        let nrm = columns[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            ZERO
        } else {
            columns[j][i] / nrm
        }
    });
    let sv = mat.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * smax).count()
}

fn lift_checks(pair: &SusyPair, sp: &Spectra, cfg: &SusyConfig) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    let mut rank_mismatch = 0usize;
    let mut lifted_clusters = 0usize;
    let scale = gram_scale(&sp.lower).max(gram_scale(&sp.upper));
    for side in [LiftSide::Upper, LiftSide::Lower] {
        let gram = match side {
            LiftSide::Upper => pair.gram_upper()?,
            LiftSide::Lower => pair.gram_lower()?,
        };
        let (vals, vecs) = dense_matrix_eig(&gram.to_dense(), true);
        let vecs = vecs.expect("vectors requested");
        let vals = clean_gram(&vals, scale)?;
        let clusters = cluster(&vals, (cfg.cluster_tol * span(&vals)).max(1e-14 * scale));
        for c in clusters.clusters.iter().filter(|c| c.value > 0.0).take(cfg.lift_clusters) {
            lifted_clusters += 1;
            let mut block = Vec::with_capacity(c.multiplicity);
            for &i in &c.members {
                let v: Vec<Complex64> = vecs.column(i).iter().copied().collect();
                let lifted = lift_eigenvector(pair, &v, vals[i], side)?;
                worst = worst.max(lifted.residual);
                block.push(lifted.vector);
            }
            let target = match side {
                LiftSide::Upper => (c.value + pair.mass * pair.mass).sqrt(),
                LiftSide::Lower => -(c.value + pair.mass * pair.mass).sqrt(),
            };
            rank_mismatch += numerical_rank(&block, 1e-8).abs_diff(sp.multiplicity_at(target));
        }
    }
    Ok(vec![
        Check::within("susy.lift.residual", worst, cfg.lift_tol * sp.norm, "dense-gram-eigenpairs")
            .with_note(format!("{lifted_clusters} clusters lifted")),
        Check::within("susy.lift.rank", rank_mismatch as f64, 0.0, "svd-rank"),
    ])
}

/// Symmetry checks of the zigzag operator: chirality equivalence with the
/// `f₁, f₂`-Dirichlet operator, time reversal, even multiplicities, and
/// the `m = 0` spectral symmetry.
pub fn verify_symmetries(domain: &VoxelDomain, m: f64, cfg: &SusyConfig, tol: f64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    report.set_env("mass", m);
    report.set_env("h", domain.h());
    let s = assemble_t_min(domain)?;
    let a = dirac_from_t_min(&s, m, DiracVariant::A)?;
    let b = assemble_dirac(domain, m, DiracVariant::B)?;
    let scale = a.max_abs().max(1.0);
    report.set_env("scale", scale);

    let chi = lift_padded(domain, &constant_matrices().chirality);
    let pa = embed_padded(domain, &a, DiracVariant::A)?;
    let pb = embed_padded(domain, &b, DiracVariant::B)?;
    let conjugated = chi.matmul(&pa)?.matmul(&chi.adjoint())?;
    let corrected = pb.add(&conjugated)?.max_abs();
    let literal = pb.add(&chi.matmul(&pa)?.matmul(&chi)?)?.max_abs();
    report.push(
        Check::within("chirality.equivalence", corrected, tol * scale, "padded-layout")
            .with_note(format!("B_m = M A_m M; deviation of B_m = -M A_m M is {literal:e}")),
    );

    report.push(Check::holds("time_reversal.real_stencils", stencils_are_real(&s), "assembly"));
    let u = time_reversal_lift(domain)?;
    let commuted = u.matmul(&a.conj())?.matmul(&u.adjoint())?;
    report.push(Check::within("time_reversal.commutes", commuted.max_abs_diff(&a), tol * scale, "matrix"));
    let square = u.matmul(&u.conj())?.add(&SparseOperator::identity(u.nrows()))?.max_abs();
    report.push(Check::within("time_reversal.squares_to_minus_one", square, 0.0, "exact"));

    if a.nrows() <= cfg.dense_cap {
        let eig = dense_hermitian_eigenvalues(&a, cfg.dense_cap)?.eigenvalues;
        let norm = eig.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        let clusters = cluster(&eig, (cfg.cluster_tol * span(&eig)).max(1e-14 * norm));
        let odd = clusters.clusters.iter().filter(|c| c.multiplicity % 2 == 1).count();
        report.push(Check::equal("kramers.even_multiplicity", odd, 0, "dense").with_note(format!("{} clusters", clusters.len())));
        if m == 0.0 {
            let asym = eig.iter().zip(eig.iter().rev()).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
            report.push(Check::within("massless.spectrum_symmetric", asym, cfg.match_tol * norm, "dense"));
        } else {
            report.push(Check::skip("massless.spectrum_symmetric", "m != 0"));
        }
    } else {
        report.push(Check::skip("kramers.even_multiplicity", "operator above the dense cap"));
        report.push(Check::skip("massless.spectrum_symmetric", "operator above the dense cap"));
    }

    if m == 0.0 {
        let beta = beta_lift(domain)?;
        let dev = beta.matmul(&a)?.matmul(&beta)?.add(&a)?.max_abs();
        report.push(Check::within("massless.beta_anticommutes", dev, 0.0, "exact"));
    } else {
        report.push(Check::skip("massless.beta_anticommutes", "m != 0"));
    }
    Ok(report)
}

/// Shape of one random trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialShape {
    pub rows: usize,
    pub cols: usize,
    pub zero_column: Option<usize>,
}

/// Deterministic trial shapes: square, tall, wide and rank-deficient cases
/// first, then random shapes up to `max_rows × max_cols`.
pub fn trial_shapes(trials: usize, max_rows: usize, max_cols: usize, rng: &mut impl Rng) -> Vec<TrialShape> {
    let fixed = [(max_rows, max_cols, None), (max_cols, max_cols, None), (3, max_cols, None), (max_rows, max_cols, Some(0))];
    let mut out: Vec<TrialShape> = fixed
        .iter()
        .take(trials)
        .map(|&(rows, cols, zero_column)| TrialShape { rows, cols, zero_column })
        .collect();
    while out.len() < trials {
        let rows = rng.random_range(1..=max_rows);
        let cols = rng.random_range(1..=max_cols);
        let zero_column = (out.len() % 4 == 3).then(|| rng.random_range(0..cols));
        out.push(TrialShape { rows, cols, zero_column });
    }
    out
}

#[derive(Clone, Debug, Serialize)]
struct TrialRecord {
    trial: usize,
    rows: usize,
    cols: usize,
    zero_column: Option<usize>,
    mass: f64,
    passed: bool,
    failed_checks: Vec<String>,
}

/// Verifies `trials` seeded random pairs at every mass; checks are
/// aggregated per id (worst deviation) and each trial is listed in `env`.
pub fn random_pair_suite(seed: u64, trials: usize, masses: &[f64], cfg: &SusyConfig) -> Result<VerificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = trial_shapes(trials, 12, 9, &mut rng);
    let mut aggregated: Vec<Check> = Vec::new();
    let mut records = Vec::new();
    for (t, shape) in shapes.iter().enumerate() {
        let base = SusyPair::random(shape.rows, shape.cols, shape.zero_column, 0.0, &mut rng);
        for &mass in masses {
            let pair = SusyPair::new(base.s.clone(), mass);
            let r = verify_susy(&pair, cfg)?;
            records.push(TrialRecord {
                trial: t,
                rows: shape.rows,
                cols: shape.cols,
                zero_column: shape.zero_column,
                mass,
                passed: r.passed(),
                failed_checks: r.failures().map(|c| c.id.clone()).collect(),
            });
            merge_worst(&mut aggregated, r.checks);
        }
    }
    let mut report = VerificationReport::new();
    for mut c in aggregated {
        c.id = format!("random_pairs.{}", c.id.trim_start_matches("susy."));
        report.push(c);
    }
    report.set_env("seed", seed);
    report.set_env("trials", trials);
    report.set_env("masses", masses);
    report.set_env("verifications", records.len());
    report.set_env("trial_results", &records);
    Ok(report)
}

/// Keeps, per check id, the failing or worst-deviation instance.
fn merge_worst(acc: &mut Vec<Check>, checks: Vec<Check>) {
    for c in checks {
        match acc.iter_mut().find(|a| a.id == c.id) {
            None => acc.push(c),
            Some(a) => {
                let worse = match (a.passed(), c.passed()) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => c.deviation.unwrap_or(0.0) > a.deviation.unwrap_or(0.0),
                };
                if a.verdict == crate::report::Verdict::Skip || worse {
                    *a = c;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{voxelize, Aabb, DomainSpec};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cube(n: usize) -> VoxelDomain {
        voxelize(&DomainSpec::unit_cube(), 1.0 / n as f64, &Aabb::new([0.0; 3], [1.0; 3])).unwrap()
    }

    #[test]
    fn diagonal_pair_prediction() {
        // S = diag(1, 2): D₀ has eigenvalues ±1, ±2.
        let p = predict_susy_spectrum(&[1.0, 4.0], &[1.0, 4.0], 0.0).unwrap();
        assert_eq!(p.values(), vec![-2.0, -1.0, 1.0, 2.0]);
        let s = SparseOperator::diagonal(&[c(1.0), c(2.0)]);
        let eig = dense_hermitian_eigenvalues(&SusyPair::new(s, 0.0).dirac().unwrap(), 10).unwrap();
        for (a, b) in eig.eigenvalues.iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_side_decides_the_sign() {
        let p = predict_susy_spectrum(&[3.0], &[0.0, 3.0], 2.0).unwrap();
        let v = p.values();
        assert!(v.contains(&2.0));
        assert!(!v.contains(&-2.0));
        let p = predict_susy_spectrum(&[0.5, 7.0], &[0.0, 1.0], 3.0).unwrap();
        assert!(p.values().iter().all(|e| e.abs() >= 3.0));
    }

    #[test]
    fn negative_gram_input_is_rejected() {
        assert!(matches!(predict_susy_spectrum(&[-1e-3], &[1.0], 1.0), Err(Error::NegativeGramEigenvalue { .. })));
        let p = predict_susy_spectrum(&[-1e-14], &[1.0], 1.0).unwrap();
        assert_eq!(p.negative_branch, vec![-1.0]);
    }

    #[test]
    fn zero_operator_pair() {
        let pair = SusyPair::new(SparseOperator::zeros(4, 6), 1.0);
        let eig = dense_hermitian_eigenvalues(&pair.dirac().unwrap(), 100).unwrap().eigenvalues;
        assert_eq!(eig, [vec![-1.0; 6], vec![1.0; 4]].concat());
        let r = verify_susy(&pair, &SusyConfig::default()).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn single_interior_node_cube() {
        let pair = SusyPair::from_domain(&cube(4), 0.0).unwrap();
        let eig = dense_hermitian_eigenvalues(&pair.dirac().unwrap(), 100).unwrap().eigenvalues;
        let r24 = 24f64.sqrt();
        assert_eq!(eig.iter().filter(|e| e.abs() < 1e-12).count(), 52);
        assert_eq!(eig.iter().filter(|e| (*e - r24).abs() < 1e-12).count(), 2);
        assert_eq!(eig.iter().filter(|e| (*e + r24).abs() < 1e-12).count(), 2);
        let r = verify_susy(&pair, &SusyConfig { lift_clusters: 2, ..Default::default() }).unwrap();
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn hand_lift() {
        // S = (2), m = 0: Φ = (2, 2), an eigenvector of [[0,2],[2,0]] for +2.
        let pair = SusyPair::new(SparseOperator::diagonal(&[c(2.0)]), 0.0);
        let up = lift_eigenvector(&pair, &[c(1.0)], 4.0, LiftSide::Upper).unwrap();
        assert_eq!(up.vector, vec![c(2.0), c(2.0)]);
        assert_eq!((up.eigenvalue, up.residual), (2.0, 0.0));
        let lo = lift_eigenvector(&pair, &[c(1.0)], 4.0, LiftSide::Lower).unwrap();
        assert_eq!(lo.vector, vec![c(2.0), c(-2.0)]);
        assert_eq!(lo.eigenvalue, -2.0);
        assert!(matches!(lift_eigenvector(&pair, &[c(1.0)], 0.0, LiftSide::Upper), Err(Error::ZeroLift)));
    }

    #[test]
    fn lift_norm_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pair = SusyPair::random(5, 3, None, 0.7, &mut rng);
        let (vals, vecs) = dense_matrix_eig(&pair.gram_upper().unwrap().to_dense(), true);
        let vecs = vecs.unwrap();
        for i in 0..5 {
            let v: Vec<Complex64> = vecs.column(i).iter().copied().collect();
            let l = lift_eigenvector(&pair, &v, vals[i].max(0.0), LiftSide::Upper).unwrap();
            assert!(l.norm_ratio >= (0.7 + (vals[i].max(0.0) + 0.49).sqrt()) * (1.0 - 1e-12));
            assert!(l.residual < 1e-12);
        }
    }

    #[test]
    fn random_pairs_pass() {
        let r = random_pair_suite(7, 12, &[-1.5, 0.0, 2.0], &SusyConfig { lift_clusters: 3, ..Default::default() }).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        assert_eq!(r.env["verifications"], 36);
    }

    #[test]
    fn symmetries_on_small_cube() {
        for m in [0.0, 1.0] {
            let r = verify_symmetries(&cube(6), m, &SusyConfig::default(), 1e-13).unwrap();
            assert!(r.passed(), "{}", r.to_json());
        }
    }

    #[test]
    fn literal_chirality_sign_fails() {
        let r = verify_symmetries(&cube(4), 1.0, &SusyConfig::default(), 1e-13).unwrap();
        let note = r.get("chirality.equivalence").unwrap().note.clone().unwrap();
        assert!(!note.ends_with("0e0"), "{note}");
    }

    #[test]
    fn rank_of_dependent_columns() {
        let a = vec![c(1.0), c(0.0), c(1.0)];
        let b = vec![c(2.0), c(0.0), c(2.0)];
        let d = vec![c(0.0), c(1.0), c(0.0)];
        assert_eq!(numerical_rank(&[a.clone(), b], 1e-8), 1);
        assert_eq!(numerical_rank(&[a, d], 1e-8), 2);
    }
}
