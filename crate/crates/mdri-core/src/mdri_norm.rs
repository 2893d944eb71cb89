//! The vector norm sup_{b ∈ B} ||(ξ, b)||_X over a direction set B, its
//! closed forms for Gaussian models, the coordinate sandwich, and the
//! fundamental function of indicator families.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::ln_gamma;

use crate::error::{MdriError, Result};
use crate::exec;
use crate::linalg;
use crate::simulate::SampleMatrix;
use crate::space_functions::{
    gls_norm, natural_phi, phi_norm, MomentOracle, PhiFunction, PsiFunction,
};

/// Dependence structure of coordinate-oracle models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dependence {
    Independent,
    MartingaleDifference,
}

/// A d-dimensional random-vector model.
pub enum RandomVectorModel {
    /// Mean-zero Gaussian with the given covariance (PSD, tolerance 1e-10).
    Gaussian { covariance: DMatrix<f64> },
    /// Rows of realizations.
    Empirical { samples: SampleMatrix },
    /// Per-coordinate moment oracles; norms are computable only along
    /// coordinate axes, enough for the coordinate bounds that consume them.
    CoordinateOracles { oracles: Vec<MomentOracle>, dependence: Dependence },
}

impl RandomVectorModel {
    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        linalg::check_psd(&covariance, 1e-10)?;
        Ok(RandomVectorModel::Gaussian { covariance })
    }

    pub fn empirical(samples: SampleMatrix) -> Result<Self> {
        if samples.n() < 2 {
            return Err(MdriError::Usage("empirical model needs at least 2 rows".into()));
        }
        Ok(RandomVectorModel::Empirical { samples })
    }

    pub fn dim(&self) -> usize {
        match self {
            RandomVectorModel::Gaussian { covariance } => covariance.nrows(),
            RandomVectorModel::Empirical { samples } => samples.d(),
            RandomVectorModel::CoordinateOracles { oracles, .. } => oracles.len(),
        }
    }
}

/// Direction sets: the full Euclidean unit ball (optimized over its boundary)
/// or an explicit finite subset of it.
#[derive(Debug, Clone)]
pub enum DirectionSet {
    FullSphere { dim: usize },
    Finite { vectors: Vec<DVector<f64>> },
}

impl DirectionSet {
    pub fn full_sphere(dim: usize) -> Self {
        DirectionSet::FullSphere { dim }
    }

    pub fn finite(vectors: Vec<Vec<f64>>) -> Self {
        DirectionSet::Finite { vectors: vectors.into_iter().map(DVector::from_vec).collect() }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            DirectionSet::FullSphere { dim } => Some(*dim),
            DirectionSet::Finite { vectors } => vectors.first().map(|v| v.len()),
        }
    }

    /// Separation: every x ∈ R^d must be distinguished by two directions,
    /// i.e. the pairwise differences span R^d. Also enforces |b|₂ ≤ 1.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            DirectionSet::FullSphere { dim: d } => {
                if *d != dim {
                    return Err(MdriError::Usage(format!("direction set dim {d} != model dim {dim}")));
                }
                Ok(())
            }
            DirectionSet::Finite { vectors } => {
                if vectors.is_empty() {
                    return Err(MdriError::InvalidDirectionSet("empty direction set".into()));
                }
                for v in vectors {
                    if v.len() != dim {
                        return Err(MdriError::Usage("direction dimension mismatch".into()));
                    }
                    if v.norm() > 1.0 + 1e-12 {
                        return Err(MdriError::InvalidDirectionSet(format!(
                            "direction with norm {} outside the unit ball",
                            v.norm()
                        )));
                    }
                }
                // span{b_i − b_j} = span{b_i − b_0}.
                if vectors.len() == 1 {
                    return Err(MdriError::InvalidDirectionSet(
                        "a single direction cannot separate points".into(),
                    ));
                }
                let b0 = &vectors[0];
                let mut m = DMatrix::<f64>::zeros(vectors.len() - 1, dim);
                for (i, v) in vectors.iter().skip(1).enumerate() {
                    for j in 0..dim {
                        m[(i, j)] = v[j] - b0[j];
                    }
                }
                let svd = m.svd(false, false);
                let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
                let rank = svd
                    .singular_values
                    .iter()
                    .filter(|&&s| s > 1e-10 * smax.max(1.0))
                    .count();
                if rank < dim {
                    return Err(MdriError::InvalidDirectionSet(format!(
                        "difference span has rank {rank} < {dim}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Scalar base space applied to projections (ξ, b).
#[derive(Clone)]
pub enum BaseSpace {
    Lp { p: f64 },
    GPsi { psi: PsiFunction, grid: Vec<f64> },
    Phi { phi: PhiFunction, grid: Vec<f64> },
}

impl BaseSpace {
    pub fn describe(&self) -> String {
        match self {
            BaseSpace::Lp { p } => format!("L{p}"),
            BaseSpace::GPsi { grid, .. } => format!("Gpsi[{} grid points]", grid.len()),
            BaseSpace::Phi { grid, .. } => format!("Phi[{} grid points]", grid.len()),
        }
    }

    /// Norm of a *standard Gaussian* scalar under this base. Gaussian models
    /// factor through this constant: ||(ξ,b)||_X = √((Rb,b)) · c_X.
    pub fn standard_gaussian_constant(&self) -> Result<f64> {
        match self {
            BaseSpace::Lp { p } => gaussian_lp_constant(*p),
            BaseSpace::GPsi { psi, grid } => {
                Ok(gls_norm(&MomentOracle::standard_gaussian(), psi, grid)?.value)
            }
            BaseSpace::Phi { phi, grid } => {
                Ok(phi_norm(crate::space_functions::gaussian_log_mgf(1.0), phi, grid)?.value)
            }
        }
    }

    /// Norm of a scalar sample under this base.
    pub fn empirical_norm(&self, values: &[f64]) -> Result<f64> {
        match self {
            BaseSpace::Lp { p } => {
                if *p < 1.0 {
                    return Err(MdriError::Domain(format!("Lp base needs p >= 1, got {p}")));
                }
                Ok(crate::simulate::empirical_lp_norm(values, *p).0)
            }
            BaseSpace::GPsi { psi, grid } => {
                let oracle = MomentOracle::empirical(values.to_vec())?;
                Ok(gls_norm(&oracle, psi, grid)?.value)
            }
            BaseSpace::Phi { phi, grid } => {
                let np = natural_phi(values, grid)?;
                let col: Vec<f64> = values.to_vec();
                let n = col.len() as f64;
                let log_mgf = move |l: f64| {
                    let m0 = col.iter().map(|&x| l * x).fold(f64::NEG_INFINITY, f64::max);
                    m0 + col.iter().map(|&x| (l * x - m0).exp()).sum::<f64>().ln() - n.ln()
                };
                let stable: Vec<f64> = grid
                    .iter()
                    .copied()
                    .filter(|l| *l != 0.0 && !np.rejected_lambdas.contains(l))
                    .collect();
                if stable.is_empty() {
                    return Err(MdriError::NoFiniteNorm("no stable lambda for Phi base".into()));
                }
                Ok(phi_norm(log_mgf, phi, &stable)?.value)
            }
        }
    }

    /// Norm of a scalar given its analytic moment oracle (Lp and GPsi only).
    pub fn oracle_norm(&self, oracle: &MomentOracle) -> Result<f64> {
        match self {
            BaseSpace::Lp { p } => oracle.moment(*p),
            BaseSpace::GPsi { psi, grid } => Ok(gls_norm(oracle, psi, grid)?.value),
            BaseSpace::Phi { .. } => Err(MdriError::Usage(
                "Phi base norm is not determined by moments alone".into(),
            )),
        }
    }
}

/// Closed form for the L_p norm of a standard Gaussian:
/// √2 · π^(−1/(2p)) · Γ^(1/p)((p+1)/2).
pub fn gaussian_lp_constant(p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(MdriError::Domain(format!("gaussian_lp_constant needs p >= 1, got {p}")));
    }
    let log_val = 0.5 * std::f64::consts::LN_2 - std::f64::consts::PI.ln() / (2.0 * p)
        + ln_gamma((p + 1.0) / 2.0) / p;
    Ok(log_val.exp())
}

/// How a norm value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    ClosedForm,
    SphereGrid,
    FiniteSet,
}

/// A computed m.d.r.i. norm with its maximizing direction.
#[derive(Debug, Clone, Serialize)]
pub struct MdriNorm {
    pub norm: f64,
    pub direction: Vec<f64>,
    pub base_space: String,
    pub grid_size: usize,
    pub method: NormMethod,
}

/// Options for the sphere sweep.
#[derive(Debug, Clone, Copy)]
pub struct SphereOpts {
    /// Number of quasi-uniform directions; default 2^12 for d ≤ 4, 2^15 above.
    pub points: Option<usize>,
    /// Skip the Gaussian closed form and force the discretized sweep.
    pub force_discretization: bool,
    /// Local refinement after the sweep (power iteration for Gaussian
    /// models, tangent compass search otherwise).
    pub refine: bool,
}

impl Default for SphereOpts {
    fn default() -> Self {
        Self { points: None, force_discretization: false, refine: true }
    }
}

fn default_points(d: usize) -> usize {
    if d <= 4 {
        1 << 12
    } else {
        1 << 15
    }
}

/// Quasi-uniform unit directions: exact equal-angle grid for d = 2, a
/// Kronecker low-discrepancy sequence mapped through the Gaussian quantile
/// and normalized for d ≥ 3. Coordinate axes are appended so that diagonal
/// models are resolved exactly. Deterministic.
pub fn sphere_directions(d: usize, n: usize) -> Vec<DVector<f64>> {
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(n + d);
    match d {
        0 => {}
        1 => {
            dirs.push(DVector::from_vec(vec![1.0]));
            dirs.push(DVector::from_vec(vec![-1.0]));
        }
        2 => {
            for k in 0..n {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                dirs.push(DVector::from_vec(vec![theta.cos(), theta.sin()]));
            }
        }
        _ => {
            // Generalized golden ratio: root of x^(d+1) = x + 1.
            let mut phi = 1.5_f64;
            for _ in 0..64 {
                phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
            }
            let alphas: Vec<f64> = (1..=d).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
            let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
            for k in 0..n {
                let mut v = DVector::zeros(d);
                for j in 0..d {
                    let u = (0.5 + (k as f64 + 1.0) * alphas[j]).fract();
                    let u = u.clamp(1e-12, 1.0 - 1e-12);
                    v[j] = normal.inverse_cdf(u);
                }
                let norm = v.norm();
                if norm > 1e-9 {
                    dirs.push(v / norm);
                }
            }
        }
    }
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        dirs.push(e);
    }
    dirs
}

/// Canonical sign for a reported direction: the entry of largest magnitude
/// is made positive.
fn canonical_sign(v: &mut DVector<f64>) {
    let mut idx = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        *v *= -1.0;
    }
}

/// Objective ||(ξ, b)||_X as a function of the direction.
fn make_objective<'a>(
    model: &'a RandomVectorModel,
    base: &'a BaseSpace,
) -> Result<Box<dyn Fn(&DVector<f64>) -> Result<f64> + Sync + 'a>> {
    match model {
        RandomVectorModel::Gaussian { covariance } => {
            let c = base.standard_gaussian_constant()?;
            let r = covariance;
            Ok(Box::new(move |b| Ok(linalg::quad_form(r, b).max(0.0).sqrt() * c)))
        }
        RandomVectorModel::Empirical { samples } => Ok(Box::new(move |b| {
            let proj = samples.project(b.as_slice());
            base.empirical_norm(&proj)
        })),
        RandomVectorModel::CoordinateOracles { oracles, .. } => Ok(Box::new(move |b| {
            // Axis-aligned directions only.
            let mut axis = None;
            for (i, &x) in b.iter().enumerate() {
                if x.abs() > 1e-12 {
                    if axis.is_some() {
                        return Err(MdriError::Usage(
                            "coordinate-oracle models support only axis-aligned directions".into(),
                        ));
                    }
                    axis = Some((i, x));
                }
            }
            match axis {
                Some((i, x)) => Ok(x.abs() * base.oracle_norm(&oracles[i])?),
                None => Ok(0.0),
            }
        })),
    }
}

/// Tangent-space compass search: derivative-free ascent of `f` on the sphere
/// starting from `b0`, with geometrically shrinking step.
fn compass_refine(
    f: &(dyn Fn(&DVector<f64>) -> Result<f64> + Sync),
    b0: &DVector<f64>,
    v0: f64,
) -> Result<(DVector<f64>, f64)> {
    let d = b0.len();
    let mut b = b0.clone();
    let mut v = v0;
    let mut h = 0.25_f64;
    while h > 1e-9 {
        // Orthonormal tangent basis at b by Gram-Schmidt over the axes.
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            let mut t = &e - &b * b.dot(&e);
            for u in &basis {
                t -= u * u.dot(&t);
            }
            let n = t.norm();
            if n > 1e-8 {
                basis.push(t / n);
            }
            if basis.len() == d - 1 {
                break;
            }
        }
        let mut improved = false;
        for t in &basis {
            for s in [1.0, -1.0] {
                let cand = (&b + t * (s * h)).normalize();
                let val = f(&cand)?;
                if val > v {
                    b = cand;
                    v = val;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok((b, v))
}

/// Power-iteration refinement of the top generalized Rayleigh quotient for
/// Gaussian models; exact up to 1e-14 relative stagnation.
fn power_refine(r: &DMatrix<f64>, b0: &DVector<f64>) -> (DVector<f64>, f64) {
    let mut v = b0.clone();
    let mut lam = linalg::quad_form(r, &v);
    for _ in 0..100_000 {
        let w = r * &v;
        let n = w.norm();
        if n < 1e-300 {
            break;
        }
        let v2 = w / n;
        let lam2 = linalg::quad_form(r, &v2);
        let done = (lam2 - lam).abs() <= 1e-15 * lam2.abs();
        v = v2;
        lam = lam2;
        if done {
            break;
        }
    }
    (v, lam.max(0.0))
}

/// The m.d.r.i. norm with default sphere options.
pub fn mdri_norm(model: &RandomVectorModel, b_set: &DirectionSet, base: &BaseSpace) -> Result<MdriNorm> {
    mdri_norm_with(model, b_set, base, &SphereOpts::default())
}

/// The m.d.r.i. norm sup_{b ∈ B} ||(ξ, b)||_X.
///
/// Full sphere + Gaussian model: closed form √λ_max(R) · c_X unless
/// `force_discretization` is set, in which case a quasi-uniform sweep plus
/// local refinement is used. Finite sets are evaluated exhaustively with the
/// lexicographically smallest maximizer reported on ties.
pub fn mdri_norm_with(
    model: &RandomVectorModel,
    b_set: &DirectionSet,
    base: &BaseSpace,
    opts: &SphereOpts,
) -> Result<MdriNorm> {
    let d = model.dim();
    if d == 0 {
        return Err(MdriError::Usage("zero-dimensional model".into()));
    }
    if d > 8 {
        if let DirectionSet::FullSphere { .. } = b_set {
            return Err(MdriError::Usage(format!(
                "full-sphere optimization capped at d = 8 (got {d})"
            )));
        }
    }
    b_set.validate(d)?;
    let objective = make_objective(model, base)?;

    match b_set {
        DirectionSet::Finite { vectors } => {
            let values: Vec<Result<f64>> =
                exec::map_indexed(vectors.len(), |i| objective(&vectors[i]));
            let mut best: Option<(usize, f64)> = None;
            for (i, v) in values.into_iter().enumerate() {
                let v = v?;
                best = match best {
                    Some((bi, bv)) if v < bv => Some((bi, bv)),
                    Some((bi, bv)) if v == bv => {
                        // lexicographically smallest maximizer
                        if lex_less(&vectors[i], &vectors[bi]) {
                            Some((i, v))
                        } else {
                            Some((bi, bv))
                        }
                    }
                    _ => Some((i, v)),
                };
            }
            let (i, v) = best.expect("non-empty validated set");
            Ok(MdriNorm {
                norm: v,
                direction: vectors[i].iter().copied().collect(),
                base_space: base.describe(),
                grid_size: vectors.len(),
                method: NormMethod::FiniteSet,
            })
        }
        DirectionSet::FullSphere { .. } => {
            if let RandomVectorModel::Gaussian { covariance } = model {
                if !opts.force_discretization {
                    let c = base.standard_gaussian_constant()?;
                    let eig = covariance.clone().symmetric_eigen();
                    let mut idx = 0;
                    for i in 1..eig.eigenvalues.len() {
                        if eig.eigenvalues[i] > eig.eigenvalues[idx] {
                            idx = i;
                        }
                    }
                    let lam = eig.eigenvalues[idx].max(0.0);
                    let mut dir: DVector<f64> = eig.eigenvectors.column(idx).into();
                    canonical_sign(&mut dir);
                    return Ok(MdriNorm {
                        norm: lam.sqrt() * c,
                        direction: dir.iter().copied().collect(),
                        base_space: base.describe(),
                        grid_size: 0,
                        method: NormMethod::ClosedForm,
                    });
                }
            }
            let n = opts.points.unwrap_or_else(|| default_points(d));
            let dirs = sphere_directions(d, n);
            let values: Vec<Result<f64>> = exec::map_indexed(dirs.len(), |i| objective(&dirs[i]));
            let mut best: Option<(usize, f64)> = None;
            for (i, v) in values.into_iter().enumerate() {
                let v = v?;
                best = match best {
                    Some((bi, bv)) if v < bv => Some((bi, bv)),
                    Some((bi, bv)) if v == bv => {
                        if lex_less(&dirs[i], &dirs[bi]) {
                            Some((i, v))
                        } else {
                            Some((bi, bv))
                        }
                    }
                    _ => Some((i, v)),
                };
            }
            let (i0, v0) = best.expect("non-empty direction grid");
            let (mut dir, value) = if opts.refine {
                match model {
                    RandomVectorModel::Gaussian { covariance } => {
                        let c = base.standard_gaussian_constant()?;
                        let (v, lam) = power_refine(covariance, &dirs[i0]);
                        let refined = lam.sqrt() * c;
                        if refined > v0 {
                            (v, refined)
                        } else {
                            (dirs[i0].clone(), v0)
                        }
                    }
                    _ => compass_refine(objective.as_ref(), &dirs[i0], v0)?,
                }
            } else {
                (dirs[i0].clone(), v0)
            };
            canonical_sign(&mut dir);
            Ok(MdriNorm {
                norm: value,
                direction: dir.iter().copied().collect(),
                base_space: base.describe(),
                grid_size: dirs.len(),
                method: NormMethod::SphereGrid,
            })
        }
    }
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Two-sided coordinate sandwich around the vector norm.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    /// max_i ||ξ(i)||_X
    pub lower: f64,
    pub norm: f64,
    /// Σ_i ||ξ(i)||_X
    pub upper: f64,
    /// For the full sphere the sandwich holds with constants 1; `pass`
    /// reports it (a failure is a genuine bug signal). Finite sets always
    /// pass and record the empirical constants instead.
    pub pass: bool,
    /// norm / lower — the constant making the left inequality tight.
    pub c1: f64,
    /// norm / upper — the constant making the right inequality tight.
    pub c2: f64,
    pub coordinate_norms: Vec<f64>,
    /// Bootstrap 99%-ish half-widths for empirical coordinate norms (200
    /// resamples), when the model is empirical and the base is L_p.
    pub coordinate_ci: Option<Vec<f64>>,
}

/// Coordinate norms ||ξ(i)||_X for each representation.
pub fn coordinate_norms(model: &RandomVectorModel, base: &BaseSpace) -> Result<Vec<f64>> {
    let d = model.dim();
    match model {
        RandomVectorModel::Gaussian { covariance } => {
            let c = base.standard_gaussian_constant()?;
            Ok((0..d).map(|i| covariance[(i, i)].max(0.0).sqrt() * c).collect())
        }
        RandomVectorModel::Empirical { samples } => {
            (0..d).map(|i| base.empirical_norm(&samples.column(i))).collect()
        }
        RandomVectorModel::CoordinateOracles { oracles, .. } => {
            oracles.iter().map(|o| base.oracle_norm(o)).collect()
        }
    }
}

/// Verifies max_i ||ξ(i)||_X ≤ ||ξ||_(X^(d),B) ≤ Σ_i ||ξ(i)||_X for the full
/// sphere (constants 1); records empirical constants for finite sets.
pub fn sandwich_check(
    model: &RandomVectorModel,
    b_set: &DirectionSet,
    base: &BaseSpace,
) -> Result<SandwichReport> {
    b_set.validate(model.dim())?;
    let coords = coordinate_norms(model, base)?;
    let lower = coords.iter().cloned().fold(f64::MIN, f64::max);
    let upper = coords.iter().sum::<f64>();
    let norm = mdri_norm(model, b_set, base)?.norm;
    let tol = 1e-9 * (1.0 + upper.abs());
    let pass = match b_set {
        DirectionSet::FullSphere { .. } => norm >= lower - tol && norm <= upper + tol,
        DirectionSet::Finite { .. } => true,
    };
    let coordinate_ci = match (model, base) {
        (RandomVectorModel::Empirical { samples }, BaseSpace::Lp { p }) => {
            Some((0..model.dim()).map(|i| bootstrap_lp_half_width(&samples.column(i), *p, samples.seed)).collect())
        }
        _ => None,
    };
    Ok(SandwichReport {
        lower,
        norm,
        upper,
        pass,
        c1: if lower > 0.0 { norm / lower } else { f64::NAN },
        c2: if upper > 0.0 { norm / upper } else { f64::NAN },
        coordinate_norms: coords,
        coordinate_ci,
    })
}

/// Bootstrap half-width (200 resamples, 2.5758·sd) for a plug-in L_p norm.
fn bootstrap_lp_half_width(values: &[f64], p: f64, seed: u64) -> f64 {
    use rand::Rng;
    use rand::SeedableRng;
    let n = values.len();
    let mut norms = Vec::with_capacity(200);
    for rep in 0..200u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xB007_57A9);
        rng.set_stream(rep);
        let mut acc = 0.0;
        for _ in 0..n {
            let idx = rng.random_range(0..n);
            acc += values[idx].abs().powf(p);
        }
        norms.push((acc / n as f64).powf(1.0 / p));
    }
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (norms.len() - 1) as f64;
    crate::simulate::Z_99 * var.sqrt()
}

/// Indicator-family configuration for the fundamental function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetConfiguration {
    /// Pairwise disjoint events with P(A_i) = δ_i (requires Σδ ≤ 1).
    Disjoint,
    /// One common event; requires equal δ_i (P(A) = δ).
    Identical,
}

/// Fundamental-function evaluation with its two-sided bounds.
#[derive(Debug, Clone, Serialize)]
pub struct FundamentalReport {
    pub value: f64,
    /// max_i δ_i^(1/p)
    pub lower: f64,
    /// Σ_i δ_i^(1/p)
    pub upper: f64,
    pub direction: Vec<f64>,
}

/// ||Σ b(i)·1_{A(i)}||_{L_p} maximized over the sphere for the chosen set
/// configuration, sandwiched by max_i δ_i^{1/p} and Σ_i δ_i^{1/p}.
pub fn fundamental_function(
    delta: &[f64],
    p: f64,
    configuration: SetConfiguration,
) -> Result<FundamentalReport> {
    if delta.is_empty() {
        return Err(MdriError::Usage("empty delta vector".into()));
    }
    if !(p >= 1.0) {
        return Err(MdriError::Domain(format!("fundamental function needs p >= 1, got {p}")));
    }
    for &d in delta {
        if !(0.0..=1.0).contains(&d) {
            return Err(MdriError::Domain(format!("delta {d} outside [0, 1]")));
        }
    }
    let d = delta.len();
    let objective: Box<dyn Fn(&DVector<f64>) -> f64 + Sync> = match configuration {
        SetConfiguration::Disjoint => {
            let sum: f64 = delta.iter().sum();
            if sum > 1.0 + 1e-12 {
                return Err(MdriError::Domain(format!(
                    "disjoint events need Σδ ≤ 1, got {sum}"
                )));
            }
            let delta = delta.to_vec();
            Box::new(move |b: &DVector<f64>| {
                b.iter()
                    .zip(&delta)
                    .map(|(bi, di)| bi.abs().powf(p) * di)
                    .sum::<f64>()
                    .powf(1.0 / p)
            })
        }
        SetConfiguration::Identical => {
            let first = delta[0];
            if delta.iter().any(|&x| (x - first).abs() > 1e-12) {
                return Err(MdriError::Domain(
                    "identical configuration requires equal probabilities".into(),
                ));
            }
            Box::new(move |b: &DVector<f64>| b.iter().sum::<f64>().abs() * first.powf(1.0 / p))
        }
    };
    let mut dirs = sphere_directions(d, default_points(d).min(1 << 12));
    // Uniform direction resolves the identical configuration exactly.
    dirs.push(DVector::from_element(d, 1.0 / (d as f64).sqrt()));
    let mut best = (dirs[0].clone(), objective(&dirs[0]));
    for dir in &dirs {
        let v = objective(dir);
        if v > best.1 {
            best = (dir.clone(), v);
        }
    }
    let wrapped = |b: &DVector<f64>| -> Result<f64> { Ok(objective(b)) };
    let (mut dir, value) = if d > 1 {
        compass_refine(&wrapped, &best.0, best.1)?
    } else {
        best
    };
    canonical_sign(&mut dir);
    let lower = delta.iter().map(|x| x.powf(1.0 / p)).fold(f64::MIN, f64::max);
    let upper = delta.iter().map(|x| x.powf(1.0 / p)).sum::<f64>();
    if value < lower - 1e-9 || value > upper + 1e-9 {
        return Err(MdriError::Domain(format!(
            "fundamental value {value} escapes its bounds [{lower}, {upper}]"
        )));
    }
    Ok(FundamentalReport { value, lower, upper, direction: dir.iter().copied().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn lp_constant_closed_forms() {
        assert!((gaussian_lp_constant(2.0).unwrap() - 1.0).abs() < 1e-12);
        assert_relative_eq!(
            gaussian_lp_constant(4.0).unwrap(),
            3.0_f64.powf(0.25),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            gaussian_lp_constant(1.0).unwrap(),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert!(gaussian_lp_constant(0.5).is_err());
    }

    #[test]
    fn identity_covariance_norm_is_one() {
        let model = RandomVectorModel::gaussian(DMatrix::identity(3, 3)).unwrap();
        let n = mdri_norm(&model, &DirectionSet::full_sphere(3), &BaseSpace::Lp { p: 2.0 }).unwrap();
        assert!((n.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_covariance_norm_is_sqrt_lambda_max() {
        let model = RandomVectorModel::gaussian(dmatrix![1.0, 0.0; 0.0, 4.0]).unwrap();
        let n = mdri_norm(&model, &DirectionSet::full_sphere(2), &BaseSpace::Lp { p: 2.0 }).unwrap();
        assert!((n.norm - 2.0).abs() < 1e-12);
        assert!((n.direction[1].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_sweep_matches_closed_form() {
        let r = dmatrix![2.0, 0.7, -0.3; 0.7, 1.5, 0.2; -0.3, 0.2, 3.0];
        let model = RandomVectorModel::gaussian(r.clone()).unwrap();
        let base = BaseSpace::Lp { p: 2.0 };
        let closed = mdri_norm(&model, &DirectionSet::full_sphere(3), &base).unwrap();
        let swept = mdri_norm_with(
            &model,
            &DirectionSet::full_sphere(3),
            &base,
            &SphereOpts { force_discretization: true, ..Default::default() },
        )
        .unwrap();
        assert!((closed.norm - linalg::lambda_max(&r).sqrt()).abs() < 1e-12);
        assert!((swept.norm - closed.norm).abs() < 1e-8, "{} vs {}", swept.norm, closed.norm);
    }

    #[test]
    fn gaussian_lp_full_sphere_factorizes() {
        let r = dmatrix![1.0, 0.0; 0.0, 4.0];
        let model = RandomVectorModel::gaussian(r).unwrap();
        for p in [1.0, 3.0, 4.0, 6.0] {
            let n = mdri_norm(&model, &DirectionSet::full_sphere(2), &BaseSpace::Lp { p }).unwrap();
            let expect = 2.0 * gaussian_lp_constant(p).unwrap();
            assert_relative_eq!(n.norm, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn separation_rejects_degenerate_sets() {
        let model = RandomVectorModel::gaussian(DMatrix::identity(2, 2)).unwrap();
        let base = BaseSpace::Lp { p: 2.0 };
        let single = DirectionSet::finite(vec![vec![1.0, 0.0]]);
        assert!(matches!(
            mdri_norm(&model, &single, &base),
            Err(MdriError::InvalidDirectionSet(_))
        ));
        let collinear = DirectionSet::finite(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(matches!(
            mdri_norm(&model, &collinear, &base),
            Err(MdriError::InvalidDirectionSet(_))
        ));
        let ok = DirectionSet::finite(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(mdri_norm(&model, &ok, &base).is_ok());
    }

    #[test]
    fn finite_set_norm_agrees_with_hull_vertices() {
        // Square corners plus interior and edge points: the sup of a convex
        // homogeneous objective over the set equals the sup over the hull's
        // vertex subset, exactly.
        let s = 1.0 / 2.0_f64.sqrt();
        let corners = vec![
            vec![s, s],
            vec![s, -s],
            vec![-s, s],
            vec![-s, -s],
        ];
        let mut padded = corners.clone();
        padded.push(vec![0.0, 0.0]);
        padded.push(vec![s, 0.0]);
        padded.push(vec![0.3 * s, 0.3 * s]);
        let r = dmatrix![1.3, 0.4; 0.4, 0.8];
        let model = RandomVectorModel::gaussian(r).unwrap();
        let base = BaseSpace::Lp { p: 2.0 };
        let a = mdri_norm(&model, &DirectionSet::finite(corners), &base).unwrap();
        let b = mdri_norm(&model, &DirectionSet::finite(padded), &base).unwrap();
        assert_eq!(a.norm, b.norm);
    }

    #[test]
    fn sandwich_identity_and_diagonal() {
        let base = BaseSpace::Lp { p: 2.0 };
        let m1 = RandomVectorModel::gaussian(DMatrix::identity(2, 2)).unwrap();
        let r1 = sandwich_check(&m1, &DirectionSet::full_sphere(2), &base).unwrap();
        assert!(r1.pass);
        assert!((r1.lower - 1.0).abs() < 1e-12);
        assert!((r1.norm - 1.0).abs() < 1e-12);
        assert!((r1.upper - 2.0).abs() < 1e-12);

        let m2 = RandomVectorModel::gaussian(dmatrix![1.0, 0.0; 0.0, 4.0]).unwrap();
        let r2 = sandwich_check(&m2, &DirectionSet::full_sphere(2), &base).unwrap();
        assert!(r2.pass);
        assert!((r2.lower - 2.0).abs() < 1e-12);
        assert!((r2.norm - 2.0).abs() < 1e-12);
        assert!((r2.upper - 3.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_inequality_on_gaussian_pairs() {
        let r1 = dmatrix![1.0, 0.3; 0.3, 2.0];
        let r2 = dmatrix![0.5, -0.2; -0.2, 1.5];
        let base = BaseSpace::Lp { p: 2.0 };
        let b = DirectionSet::full_sphere(2);
        let n_sum = mdri_norm(&RandomVectorModel::gaussian(&r1 + &r2).unwrap(), &b, &base).unwrap();
        let n1 = mdri_norm(&RandomVectorModel::gaussian(r1).unwrap(), &b, &base).unwrap();
        let n2 = mdri_norm(&RandomVectorModel::gaussian(r2).unwrap(), &b, &base).unwrap();
        assert!(n_sum.norm <= n1.norm + n2.norm + 1e-9);
    }

    #[test]
    fn scaling_homogeneity_via_covariance() {
        let r = dmatrix![1.0, 0.5; 0.5, 2.0];
        let base = BaseSpace::Lp { p: 4.0 };
        let b = DirectionSet::full_sphere(2);
        let n1 = mdri_norm(&RandomVectorModel::gaussian(r.clone()).unwrap(), &b, &base).unwrap();
        let n4 = mdri_norm(&RandomVectorModel::gaussian(4.0 * r).unwrap(), &b, &base).unwrap();
        assert_relative_eq!(n4.norm, 2.0 * n1.norm, max_relative = 1e-12);
    }

    #[test]
    fn empirical_norm_invariant_under_row_permutation() {
        let m = crate::simulate::sample_gaussian(&dmatrix![1.0, 0.2; 0.2, 1.0], 5000, 5).unwrap();
        let mut rows: Vec<Vec<f64>> = m.rows().map(|r| r.to_vec()).collect();
        rows.reverse();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let permuted = SampleMatrix::from_rows(flat, 5000, 2, 5, 0, "permuted").unwrap();
        let base = BaseSpace::Lp { p: 4.0 };
        let b = DirectionSet::finite(vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]]);
        let n1 = mdri_norm(&RandomVectorModel::empirical(m).unwrap(), &b, &base).unwrap();
        let n2 = mdri_norm(&RandomVectorModel::empirical(permuted).unwrap(), &b, &base).unwrap();
        assert_eq!(n1.norm, n2.norm);
    }

    #[test]
    fn sphere_doubling_stability() {
        let r = dmatrix![2.0, 0.7; 0.7, 1.1];
        let model = RandomVectorModel::gaussian(r).unwrap();
        let base = BaseSpace::Lp { p: 2.0 };
        let coarse = mdri_norm_with(
            &model,
            &DirectionSet::full_sphere(2),
            &base,
            &SphereOpts { points: Some(1 << 12), force_discretization: true, refine: true },
        )
        .unwrap();
        let fine = mdri_norm_with(
            &model,
            &DirectionSet::full_sphere(2),
            &base,
            &SphereOpts { points: Some(1 << 13), force_discretization: true, refine: true },
        )
        .unwrap();
        assert!((coarse.norm - fine.norm).abs() < 1e-4);
    }

    #[test]
    fn fundamental_function_closed_forms() {
        // d = 1: δ^{1/p}.
        let r = fundamental_function(&[0.25], 2.0, SetConfiguration::Disjoint).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);

        // Disjoint equal pair at p = 2 attains the lower bound √δ.
        let r = fundamental_function(&[0.3, 0.3], 2.0, SetConfiguration::Disjoint).unwrap();
        assert!((r.value - 0.3_f64.sqrt()).abs() < 1e-9, "{}", r.value);
        assert!((r.lower - 0.3_f64.sqrt()).abs() < 1e-12);

        // Identical pair: √2·√δ via the uniform direction.
        let r = fundamental_function(&[0.3, 0.3], 2.0, SetConfiguration::Identical).unwrap();
        assert!((r.value - 2.0_f64.sqrt() * 0.3_f64.sqrt()).abs() < 1e-9, "{}", r.value);
        assert!(r.value <= r.upper + 1e-12 && r.value >= r.lower - 1e-12);
    }

    #[test]
    fn fundamental_function_domain_errors() {
        assert!(fundamental_function(&[1.2], 2.0, SetConfiguration::Disjoint).is_err());
        assert!(fundamental_function(&[0.8, 0.8], 2.0, SetConfiguration::Disjoint).is_err());
        assert!(fundamental_function(&[0.2, 0.4], 2.0, SetConfiguration::Identical).is_err());
    }

    #[test]
    fn coordinate_oracle_axis_norms() {
        let model = RandomVectorModel::CoordinateOracles {
            oracles: vec![MomentOracle::rademacher(), MomentOracle::constant(2.0)],
            dependence: Dependence::Independent,
        };
        let base = BaseSpace::Lp { p: 4.0 };
        let b = DirectionSet::finite(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let n = mdri_norm(&model, &b, &base).unwrap();
        assert!((n.norm - 2.0).abs() < 1e-12);
        assert_eq!(n.direction, vec![0.0, 1.0]);
    }
}
