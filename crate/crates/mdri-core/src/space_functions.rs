//! Scalar and multidimensional generating functions (ψ, φ, ν) and the norms
//! they induce on random variables through moment and MGF oracles.
//!
//! A ψ function normalizes the moment scale |η|_p; the induced norm is
//! sup_p |η|_p / ψ(p). A φ function dominates the log-MGF: the norm is the
//! minimal τ with log E exp(λη) ≤ φ(λτ) for all λ, computed here as the sup
//! over λ of φ⁻¹(log-mgf(λ)) / |λ|. ν generalizes φ to R^d.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{MdriError, Result};
use crate::grids;
use crate::simulate;

// ---------------------------------------------------------------------------
// ψ functions
// ---------------------------------------------------------------------------

/// Family tag for a ψ function.
#[derive(Clone)]
pub enum PsiFamily {
    /// (a − p)^(−β) on [1, a): finite-exponent space, blows up as p → a⁻.
    PowerBlowup { a: f64, beta: f64 },
    /// p^m on [1, ∞).
    Polynomial { m: f64 },
    /// p^m · L(p) with L slowly varying.
    RegularVarying { m: f64, slowly_varying: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
    /// Built from a random variable's own moments or from a φ function.
    Natural,
}

/// Moment-normalizing function p ↦ ψ(p) with its support interval.
#[derive(Clone)]
pub struct PsiFunction {
    support: (f64, f64),
    family: PsiFamily,
    eval: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>,
}

impl PsiFunction {
    pub fn power_blowup(a: f64, beta: f64) -> Result<Self> {
        if a <= 1.0 || beta <= 0.0 {
            return Err(MdriError::Domain("power-blowup psi needs a > 1, beta > 0".into()));
        }
        Ok(Self {
            support: (1.0, a),
            family: PsiFamily::PowerBlowup { a, beta },
            eval: Arc::new(move |p| Ok((a - p).powf(-beta))),
        })
    }

    pub fn polynomial(m: f64) -> Self {
        Self {
            support: (1.0, f64::INFINITY),
            family: PsiFamily::Polynomial { m },
            eval: Arc::new(move |p| Ok(p.powf(m))),
        }
    }

    /// ψ ≡ 1: the induced norm is sup_p |η|_p over the grid.
    pub fn constant_one() -> Self {
        Self::polynomial(0.0)
    }

    pub fn regular_varying(m: f64, slowly_varying: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let l = Arc::new(slowly_varying);
        let l2 = l.clone();
        Self {
            support: (1.0, f64::INFINITY),
            family: PsiFamily::RegularVarying { m, slowly_varying: l },
            eval: Arc::new(move |p| Ok(p.powf(m) * l2(p))),
        }
    }

    /// Natural choice ψ(p) = |η|_p for a given oracle.
    pub fn natural(oracle: MomentOracle) -> Self {
        Self {
            support: (1.0, f64::INFINITY),
            family: PsiFamily::Natural,
            eval: Arc::new(move |p| oracle.moment(p)),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn family(&self) -> &PsiFamily {
        &self.family
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.support.0 && p < self.support.1
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        if !self.contains(p) {
            return Err(MdriError::Domain(format!(
                "p = {p} outside psi support [{}, {})",
                self.support.0, self.support.1
            )));
        }
        let v = (self.eval)(p)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(MdriError::OracleFailure { p, reason: format!("psi({p}) = {v} not positive finite") });
        }
        Ok(v)
    }

    /// Positivity over a sampled grid of the support, and the blow-up
    /// behaviour for the power family.
    pub fn validate_on_grid(&self, grid: &[f64]) -> Result<()> {
        grids::check_strictly_increasing(grid, "psi validation grid")?;
        let mut inf = f64::INFINITY;
        for &p in grid {
            inf = inf.min(self.eval(p)?);
        }
        if !(inf > 0.0) {
            return Err(MdriError::Domain("psi infimum not strictly positive".into()));
        }
        if let PsiFamily::PowerBlowup { a, .. } = self.family {
            let near = self.eval(a - 1e-9 * (a - 1.0))?;
            let far = self.eval(0.5 * (1.0 + a))?;
            if near <= far {
                return Err(MdriError::Domain("power-blowup psi fails to blow up near a".into()));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// φ functions
// ---------------------------------------------------------------------------

/// Family tag for a φ function.
#[derive(Clone)]
pub enum PhiFamily {
    /// λ²/2: the sub-Gaussian generator.
    Quadratic,
    /// λ^k for an even integer k ≥ 2.
    Power { k: f64 },
    /// e^λ − 1 (useful for conjugation tests; not even).
    ExpMinusOne,
    /// log cosh λ: the Rademacher generator.
    LogCosh,
    /// Empirical log-MGF on a stable λ grid; +∞ outside.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    Custom,
}

/// Exponential-moment generator λ ↦ φ(λ) on (−λ₀, λ₀), +∞ outside.
#[derive(Clone)]
pub struct PhiFunction {
    lambda0: f64,
    second_derivative_zero: f64,
    family: PhiFamily,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Numerically stable log cosh; series below 1e-4 to avoid cancellation.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        let a2 = a * a;
        return a2 * (0.5 - a2 / 12.0);
    }
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl PhiFunction {
    /// φ(λ) = λ²/2.
    pub fn quadratic() -> Self {
        Self {
            lambda0: f64::INFINITY,
            second_derivative_zero: 1.0,
            family: PhiFamily::Quadratic,
            eval: Arc::new(|l| 0.5 * l * l),
        }
    }

    /// φ(λ) = λ^k, k an even integer ≥ 2.
    pub fn power(k: f64) -> Result<Self> {
        if k < 2.0 || k.fract() != 0.0 || (k as u64) % 2 != 0 {
            return Err(MdriError::Domain("power phi needs an even integer k >= 2".into()));
        }
        Ok(Self {
            lambda0: f64::INFINITY,
            second_derivative_zero: if k == 2.0 { 2.0 } else { 0.0 },
            family: PhiFamily::Power { k },
            eval: Arc::new(move |l| l.abs().powf(k)),
        })
    }

    /// φ(λ) = e^λ − 1. Not even; strictly increasing on [0, ∞), which is all
    /// the inverse path needs.
    pub fn exp_minus_one() -> Self {
        Self {
            lambda0: f64::INFINITY,
            second_derivative_zero: 1.0,
            family: PhiFamily::ExpMinusOne,
            eval: Arc::new(|l| l.exp_m1()),
        }
    }

    /// φ(λ) = log cosh λ.
    pub fn log_cosh_fn() -> Self {
        Self {
            lambda0: f64::INFINITY,
            second_derivative_zero: 1.0,
            family: PhiFamily::LogCosh,
            eval: Arc::new(log_cosh),
        }
    }

    pub fn custom(
        lambda0: f64,
        second_derivative_zero: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { lambda0, second_derivative_zero, family: PhiFamily::Custom, eval: Arc::new(eval) }
    }

    fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Self {
        let lambda0 = grid.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
        let g = grid.clone();
        let v = values.clone();
        Self {
            lambda0,
            second_derivative_zero: f64::NAN,
            family: PhiFamily::Tabulated { grid, values },
            eval: Arc::new(move |l| interp_or_inf(&g, &v, l)),
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn second_derivative_zero(&self) -> f64 {
        self.second_derivative_zero
    }

    pub fn family(&self) -> &PhiFamily {
        &self.family
    }

    /// φ(λ); +∞ outside (−λ₀, λ₀).
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda.abs() >= self.lambda0 && !matches!(self.family, PhiFamily::Tabulated { .. }) {
            return f64::INFINITY;
        }
        (self.eval)(lambda)
    }

    /// φ⁻¹ on [0, λ₀) by bisection to relative tolerance 1e-12 (≤ 200 steps).
    ///
    /// Requires φ strictly increasing on the positive half-domain.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(MdriError::Domain(format!("phi inverse of negative value {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        // Bracket [0, hi] with φ(hi) ≥ y.
        let mut hi = if self.lambda0.is_finite() { self.lambda0 } else { 1.0 };
        if !self.lambda0.is_finite() {
            let mut guard = 0;
            while self.eval(hi).max(0.0) < y {
                hi *= 2.0;
                guard += 1;
                if guard > 1024 {
                    return Err(MdriError::Domain(format!("phi never reaches {y}")));
                }
            }
        } else {
            // Tabulated generators are defined at the edge; others step inside.
            if !self.eval(hi).is_finite() {
                hi *= 1.0 - 1e-12;
            }
            if self.eval(hi).max(0.0) < y {
                return Err(MdriError::Domain(format!(
                    "value {y} above the range of phi on [0, {})",
                    self.lambda0
                )));
            }
        }
        let mut lo = 0.0_f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid).max(0.0) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-12 * hi.abs() {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Evenness, midpoint convexity, and super-linearity near λ₀ on a grid.
    pub fn validate_on_grid(&self, grid: &[f64]) -> Result<()> {
        grids::check_strictly_increasing(grid, "phi validation grid")?;
        if self.eval(0.0) != 0.0 {
            return Err(MdriError::Domain("phi(0) != 0".into()));
        }
        for &l in grid {
            let a = self.eval(l);
            let b = self.eval(-l);
            if a.is_finite() != b.is_finite() || (a.is_finite() && (a - b).abs() > 1e-9 * (1.0 + a.abs())) {
                return Err(MdriError::Domain(format!("phi not even at lambda = {l}")));
            }
        }
        let vals: Vec<f64> = grid.iter().map(|&l| self.eval(l)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(MdriError::Domain("phi infinite inside validation grid".into()));
        }
        if !grids::midpoint_convex(grid, &vals, 1e-9) {
            return Err(MdriError::Domain("phi fails midpoint convexity on grid".into()));
        }
        // φ(λ)/λ must grow toward the domain edge: compare the two largest points.
        let k = grid.len();
        if k >= 2 && grid[k - 1] > 0.0 && grid[k - 2] > 0.0 {
            let r1 = vals[k - 1] / grid[k - 1];
            let r0 = vals[k - 2] / grid[k - 2];
            if r1 <= r0 {
                return Err(MdriError::Domain("phi(lambda)/lambda not increasing at domain edge".into()));
            }
        }
        Ok(())
    }
}

fn interp_or_inf(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.is_empty() || x < grid[0] || x > *grid.last().unwrap() {
        return f64::INFINITY;
    }
    match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => values[i],
        Err(i) => {
            let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
            values[i - 1] + t * (values[i] - values[i - 1])
        }
    }
}

// ---------------------------------------------------------------------------
// ν functions
// ---------------------------------------------------------------------------

/// Family tag for a multidimensional generator ν.
#[derive(Clone)]
pub enum NuFamily {
    /// 0.5 (Rμ, μ) with R positive definite: the Gaussian generator.
    GaussianQuadratic { r: DMatrix<f64> },
    /// Σ_k log cosh μ_k: independent Rademacher coordinates.
    LogCoshSum,
    /// c · |μ|₂^k.
    RadialPower { c: f64, k: f64 },
    /// cosh(|μ|₂) − 1.
    RadialCosh,
    Custom,
}

/// Even strongly convex generator ν: R^d → [0, ∞) with ν(0) = 0.
#[derive(Clone)]
pub struct NuFunction {
    dim: usize,
    family: NuFamily,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
    /// Hessian at the origin when known: the n → ∞ envelope limit is
    /// 0.5 (Rμ, μ) with this R.
    covariance: Option<DMatrix<f64>>,
}

impl NuFunction {
    pub fn gaussian_quadratic(r: DMatrix<f64>) -> Result<Self> {
        crate::linalg::check_psd(&r, 1e-10)?;
        let d = r.nrows();
        let r1 = r.clone();
        let r2 = r.clone();
        Ok(Self {
            dim: d,
            family: NuFamily::GaussianQuadratic { r: r.clone() },
            eval: Arc::new(move |mu| {
                let v = nalgebra::DVector::from_column_slice(mu);
                0.5 * (&r1 * &v).dot(&v)
            }),
            gradient: Some(Arc::new(move |mu| {
                let v = nalgebra::DVector::from_column_slice(mu);
                (&r2 * &v).iter().copied().collect()
            })),
            covariance: Some(r),
        })
    }

    pub fn log_cosh_sum(dim: usize) -> Self {
        Self {
            dim,
            family: NuFamily::LogCoshSum,
            eval: Arc::new(|mu| mu.iter().map(|&x| log_cosh(x)).sum()),
            gradient: Some(Arc::new(|mu| mu.iter().map(|&x| x.tanh()).collect())),
            covariance: Some(DMatrix::identity(dim, dim)),
        }
    }

    pub fn radial_power(dim: usize, c: f64, k: f64) -> Result<Self> {
        if c <= 0.0 || k < 2.0 {
            return Err(MdriError::Domain("radial power nu needs c > 0, k >= 2".into()));
        }
        let hess0 = if k == 2.0 { Some(DMatrix::identity(dim, dim) * (2.0 * c)) } else { Some(DMatrix::zeros(dim, dim)) };
        Ok(Self {
            dim,
            family: NuFamily::RadialPower { c, k },
            eval: Arc::new(move |mu| {
                let r = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
                c * r.powf(k)
            }),
            gradient: None,
            covariance: hess0,
        })
    }

    pub fn radial_cosh(dim: usize) -> Self {
        Self {
            dim,
            family: NuFamily::RadialCosh,
            eval: Arc::new(|mu| {
                let r = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
                r.cosh() - 1.0
            }),
            gradient: None,
            covariance: Some(DMatrix::identity(dim, dim)),
        }
    }

    pub fn custom(
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        covariance: Option<DMatrix<f64>>,
    ) -> Self {
        Self { dim, family: NuFamily::Custom, eval: Arc::new(eval), gradient: None, covariance }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &NuFamily {
        &self.family
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        debug_assert_eq!(mu.len(), self.dim);
        (self.eval)(mu)
    }

    /// Gradient: closed form when available, otherwise central differences.
    pub fn gradient(&self, mu: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            return g(mu);
        }
        let h = 1e-6;
        let mut out = Vec::with_capacity(self.dim);
        let mut buf = mu.to_vec();
        for j in 0..self.dim {
            buf[j] = mu[j] + h;
            let up = self.eval(&buf);
            buf[j] = mu[j] - h;
            let dn = self.eval(&buf);
            buf[j] = mu[j];
            out.push((up - dn) / (2.0 * h));
        }
        out
    }

    /// Checks the defining conditions on sampled points: evenness with
    /// ν(0) = 0, strong convexity via the smallest finite-difference Hessian
    /// eigenvalue, and the coordinate-section inequality
    /// ν(μ_k · e_k) ≤ ν(μ).
    pub fn check_conditions(&self, points: &[Vec<f64>]) -> Result<()> {
        let zero = vec![0.0; self.dim];
        if self.eval(&zero).abs() > 1e-12 {
            return Err(MdriError::Domain("nu(0) != 0".into()));
        }
        for mu in points {
            let neg: Vec<f64> = mu.iter().map(|x| -x).collect();
            let a = self.eval(mu);
            let b = self.eval(&neg);
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(MdriError::Domain("nu not even on sampled grid".into()));
            }
            // Condition on coordinate sections.
            for k in 0..self.dim {
                let mut ek = vec![0.0; self.dim];
                ek[k] = mu[k];
                if self.eval(&ek) > a + 1e-9 * (1.0 + a.abs()) {
                    return Err(MdriError::Domain(format!(
                        "coordinate section k = {k} exceeds nu at {mu:?}"
                    )));
                }
            }
            // Strong convexity proxy: finite-difference Hessian PSD with a
            // strictly positive smallest eigenvalue.
            let h = 1e-4;
            let mut hess = DMatrix::<f64>::zeros(self.dim, self.dim);
            let f0 = a;
            let mut buf = mu.clone();
            for i in 0..self.dim {
                for j in i..self.dim {
                    let v = if i == j {
                        buf[i] = mu[i] + h;
                        let up = self.eval(&buf);
                        buf[i] = mu[i] - h;
                        let dn = self.eval(&buf);
                        buf[i] = mu[i];
                        (up - 2.0 * f0 + dn) / (h * h)
                    } else {
                        buf[i] = mu[i] + h;
                        buf[j] = mu[j] + h;
                        let pp = self.eval(&buf);
                        buf[j] = mu[j] - h;
                        let pm = self.eval(&buf);
                        buf[i] = mu[i] - h;
                        let mm = self.eval(&buf);
                        buf[j] = mu[j] + h;
                        let mp = self.eval(&buf);
                        buf[i] = mu[i];
                        buf[j] = mu[j];
                        (pp - pm - mp + mm) / (4.0 * h * h)
                    };
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
            }
            let min_eig = crate::linalg::sym_eigenvalues(&hess)[0];
            if min_eig <= 0.0 {
                return Err(MdriError::Domain(format!(
                    "nu Hessian not strictly positive at {mu:?}: min eigenvalue {min_eig:.3e}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Moment oracles
// ---------------------------------------------------------------------------

/// p ↦ |η|_p = (E|η|^p)^{1/p}, analytic or empirical.
#[derive(Clone)]
pub enum MomentOracle {
    Analytic { name: String, eval: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync> },
    Empirical { samples: Arc<Vec<f64>> },
}

impl MomentOracle {
    pub fn analytic(name: &str, eval: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        MomentOracle::Analytic { name: name.to_string(), eval: Arc::new(eval) }
    }

    /// Constant random variable |η| ≡ c.
    pub fn constant(c: f64) -> Self {
        Self::analytic("constant", move |_| Ok(c))
    }

    /// Standard Gaussian: |τ|_p = √2 π^(−1/(2p)) Γ^(1/p)((p+1)/2).
    pub fn standard_gaussian() -> Self {
        Self::analytic("standard-gaussian", |p| crate::mdri_norm::gaussian_lp_constant(p))
    }

    /// Uniform on [−1, 1]: |η|_p = (p+1)^(−1/p).
    pub fn uniform_pm1() -> Self {
        Self::analytic("uniform", |p| {
            if p < 1.0 {
                return Err(MdriError::Domain(format!("p = {p} < 1")));
            }
            Ok((p + 1.0).powf(-1.0 / p))
        })
    }

    /// Rademacher ±1: all moments equal 1.
    pub fn rademacher() -> Self {
        Self::analytic("rademacher", |_| Ok(1.0))
    }

    /// Oracle for c·η given the oracle for η.
    pub fn scaled(inner: MomentOracle, c: f64) -> Self {
        Self::analytic("scaled", move |p| Ok(c.abs() * inner.moment(p)?))
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(MdriError::Usage("empirical oracle needs at least 2 samples".into()));
        }
        if !samples.iter().all(|x| x.is_finite()) {
            return Err(MdriError::Usage("empirical oracle: non-finite sample".into()));
        }
        Ok(MomentOracle::Empirical { samples: Arc::new(samples) })
    }

    pub fn moment(&self, p: f64) -> Result<f64> {
        self.moment_with_ci(p).map(|(m, _)| m)
    }

    /// Moment plus a 99% half-width for empirical sources (`None` analytic).
    pub fn moment_with_ci(&self, p: f64) -> Result<(f64, Option<f64>)> {
        if p <= 0.0 {
            return Err(MdriError::Domain(format!("moment exponent p = {p} must be positive")));
        }
        match self {
            MomentOracle::Analytic { eval, name } => {
                let v = eval(p).map_err(|e| MdriError::OracleFailure {
                    p,
                    reason: format!("{name}: {e}"),
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(MdriError::OracleFailure { p, reason: format!("{name} returned {v}") });
                }
                Ok((v, None))
            }
            MomentOracle::Empirical { samples } => {
                let (norm, half) = simulate::empirical_lp_norm(samples, p);
                Ok((norm, Some(half)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Result of a moment-norm sweep.
#[derive(Debug, Clone)]
pub struct GlsNorm {
    pub value: f64,
    pub argmax_p: f64,
}

/// sup over the grid (plus one refinement pass) of |η|_p / ψ(p).
pub fn gls_norm(oracle: &MomentOracle, psi: &PsiFunction, p_grid: &[f64]) -> Result<GlsNorm> {
    if p_grid.is_empty() {
        return Err(MdriError::Usage("gls_norm: empty exponent grid".into()));
    }
    for &p in p_grid {
        if !psi.contains(p) {
            return Err(MdriError::Domain(format!(
                "p = {p} outside psi support [{}, {})",
                psi.support().0,
                psi.support().1
            )));
        }
    }
    let mut values = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        values.push(oracle.moment(p)? / psi.eval(p)?);
    }
    let i = grids::argmax(&values).expect("non-empty grid");
    let mut best = (p_grid[i], values[i]);
    // One golden-section refinement pass around the discrete arg-max.
    let ratio = |p: f64| match (oracle.moment(p), psi.eval(p)) {
        (Ok(m), Ok(s)) => m / s,
        _ => f64::NEG_INFINITY,
    };
    let lo = if i > 0 { p_grid[i - 1] } else { p_grid[i] };
    let hi = if i + 1 < p_grid.len() { p_grid[i + 1] } else { p_grid[i] };
    if hi > lo {
        let (p, v) = grids::golden_max(ratio, lo, hi, 80);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(GlsNorm { value: best.1, argmax_p: best.0 })
}

/// Result of an exponential-moment norm sweep.
#[derive(Debug, Clone)]
pub struct PhiNorm {
    pub value: f64,
    pub argmax_lambda: f64,
    /// Grid points where the log-MGF was infinite (domain shrunk past them).
    pub rejected_lambdas: Vec<f64>,
}

/// Minimal τ with log-mgf(λ) ≤ φ(λτ) for all grid λ: the sup over λ of
/// φ⁻¹(log-mgf(λ)) / |λ|, with one refinement pass.
///
/// Grid points where the MGF is infinite are dropped with a note; if all of
/// them fail the Kramer condition there is no finite norm.
pub fn phi_norm(
    log_mgf: impl Fn(f64) -> f64,
    phi: &PhiFunction,
    lambda_grid: &[f64],
) -> Result<PhiNorm> {
    if lambda_grid.is_empty() {
        return Err(MdriError::Usage("phi_norm: empty lambda grid".into()));
    }
    if lambda_grid.iter().any(|&l| l == 0.0) {
        return Err(MdriError::Usage("phi_norm: lambda grid must exclude 0".into()));
    }
    let mut rejected = Vec::new();
    let mut kept = Vec::new();
    let mut ratios = Vec::new();
    for &l in lambda_grid {
        let m = log_mgf(l);
        if !m.is_finite() {
            rejected.push(l);
            continue;
        }
        let r = phi.inverse(m.max(0.0))? / l.abs();
        kept.push(l);
        ratios.push(r);
    }
    if kept.is_empty() {
        return Err(MdriError::NoFiniteNorm(
            "log-MGF infinite at every grid point (Kramer condition fails)".into(),
        ));
    }
    let i = grids::argmax(&ratios).expect("non-empty");
    let mut best = (kept[i], ratios[i]);
    let f = |l: f64| {
        if l == 0.0 {
            return f64::NEG_INFINITY;
        }
        let m = log_mgf(l);
        if !m.is_finite() {
            return f64::NEG_INFINITY;
        }
        match phi.inverse(m.max(0.0)) {
            Ok(v) => v / l.abs(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let lo = if i > 0 { kept[i - 1] } else { kept[i] };
    let hi = if i + 1 < kept.len() { kept[i + 1] } else { kept[i] };
    if hi > lo {
        let (l, v) = grids::golden_max(f, lo, hi, 80);
        if v > best.1 {
            best = (l, v);
        }
    }
    Ok(PhiNorm { value: best.1, argmax_lambda: best.0, rejected_lambdas: rejected })
}

/// The moment-scale function induced by φ: ψ(p) = p / φ⁻¹(p).
pub fn moment_psi_from_phi(phi: &PhiFunction) -> PsiFunction {
    let phi = phi.clone();
    PsiFunction {
        support: (1.0, f64::INFINITY),
        family: PsiFamily::Natural,
        eval: Arc::new(move |p| Ok(p / phi.inverse(p)?)),
    }
}

/// Empirical log-MGF of a centered sample, restricted to the stable sub-grid.
#[derive(Debug, Clone)]
pub struct NaturalPhi {
    pub phi: PhiFunction,
    /// Grid points rejected by the tail-domination heuristic.
    pub rejected_lambdas: Vec<f64>,
}

impl std::fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiFunction").field("lambda0", &self.lambda0).finish()
    }
}

/// Builds the natural φ for a centered sample: λ ↦ log((1/n) Σ exp(λ xᵢ)).
///
/// A grid point is rejected when a single exponential term contributes more
/// than half the sum — the empirical MGF there is dominated by one tail
/// sample, the finite-sample signature of a Kramer-condition failure.
pub fn natural_phi(samples: &[f64], lambda_grid: &[f64]) -> Result<NaturalPhi> {
    if samples.len() < 2 {
        return Err(MdriError::Usage("natural_phi: need at least 2 samples".into()));
    }
    grids::check_strictly_increasing(lambda_grid, "lambda grid")?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let se = (var / n).sqrt();
    if mean.abs() > 3.0 * se.max(f64::MIN_POSITIVE) {
        return Err(MdriError::NotCentered { mean, standard_error: se });
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut rejected = Vec::new();
    for &l in lambda_grid {
        // log-sum-exp with domination check.
        let m = samples.iter().map(|&x| l * x).fold(f64::NEG_INFINITY, f64::max);
        let sumexp: f64 = samples.iter().map(|&x| (l * x - m).exp()).sum();
        let dominated = 1.0 / sumexp > 0.5;
        if dominated && l != 0.0 {
            rejected.push(l);
            continue;
        }
        grid.push(l);
        values.push(m + sumexp.ln() - n.ln());
    }
    if grid.is_empty() {
        return Err(MdriError::NoFiniteNorm(
            "empirical log-MGF unstable on the whole grid (Kramer heuristic)".into(),
        ));
    }
    Ok(NaturalPhi { phi: PhiFunction::tabulated(grid, values), rejected_lambdas: rejected })
}

/// Exponential tail bound from a finite moment norm:
/// min(1, 2·exp(−u / (c₃ · g_norm))).
pub fn gnorm_tail_bound(g_norm: f64, c3: f64, u: f64) -> Result<f64> {
    if !(g_norm > 0.0) {
        return Err(MdriError::Domain(format!("g_norm = {g_norm} must be positive")));
    }
    if !(c3 > 0.0) {
        return Err(MdriError::Domain(format!("c3 = {c3} must be positive")));
    }
    if u < 0.0 {
        return Err(MdriError::Domain(format!("u = {u} must be non-negative")));
    }
    Ok((2.0 * (-u / (c3 * g_norm)).exp()).min(1.0))
}

/// Closed-form log-MGF of a centered Gaussian with the given variance.
pub fn gaussian_log_mgf(variance: f64) -> impl Fn(f64) -> f64 {
    move |l| 0.5 * variance * l * l
}

/// Closed-form log-MGF of a Rademacher sign: log cosh λ.
pub fn rademacher_log_mgf() -> impl Fn(f64) -> f64 {
    log_cosh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::linspace;

    #[test]
    fn gls_norm_constant_variable() {
        let oracle = MomentOracle::constant(3.0);
        let psi = PsiFunction::constant_one();
        let g = gls_norm(&oracle, &psi, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(g.value, 3.0);
    }

    #[test]
    fn gls_norm_gaussian_matches_fine_grid_oracle() {
        let oracle = MomentOracle::standard_gaussian();
        // ψ(p) = √(p/2)
        let psi = PsiFunction::regular_varying(0.5, |_| 1.0 / 2.0_f64.sqrt());
        let grid: Vec<f64> = (0..77).map(|i| 2.0 + 0.5 * i as f64).collect();
        let g = gls_norm(&oracle, &psi, &grid).unwrap();
        // Brute force over a 10x finer grid.
        let fine: Vec<f64> = (0..761).map(|i| 2.0 + 0.05 * i as f64).collect();
        let oracle_max = fine
            .iter()
            .map(|&p| oracle.moment(p).unwrap() / (p / 2.0).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((g.value - oracle_max).abs() < 1e-9, "{} vs {}", g.value, oracle_max);
        assert!((g.value - 1.0).abs() < 1e-9); // sup attained at p = 2
    }

    #[test]
    fn gls_norm_uniform_approaches_one() {
        let oracle = MomentOracle::uniform_pm1();
        let psi = PsiFunction::constant_one();
        let grid: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let g = gls_norm(&oracle, &psi, &grid).unwrap();
        let expect = 201.0_f64.powf(-1.0 / 200.0);
        assert!(g.value < 1.0);
        assert!((g.value - expect).abs() < 1e-12, "{} vs {expect}", g.value);
    }

    #[test]
    fn gls_norm_positively_homogeneous() {
        let oracle = MomentOracle::standard_gaussian();
        let scaled = MomentOracle::scaled(oracle.clone(), 2.0);
        let psi = PsiFunction::polynomial(0.3);
        let grid = linspace(2.0, 20.0, 37);
        let a = gls_norm(&oracle, &psi, &grid).unwrap();
        let b = gls_norm(&scaled, &psi, &grid).unwrap();
        // power-of-two scaling is exact in f64
        assert_eq!(b.value, 2.0 * a.value);
    }

    #[test]
    fn gls_norm_empty_grid_errors() {
        let oracle = MomentOracle::rademacher();
        let psi = PsiFunction::constant_one();
        assert!(matches!(gls_norm(&oracle, &psi, &[]), Err(MdriError::Usage(_))));
    }

    #[test]
    fn lyapunov_monotone_for_analytic_corpus() {
        let grid = linspace(1.0, 40.0, 40);
        for oracle in [
            MomentOracle::standard_gaussian(),
            MomentOracle::uniform_pm1(),
            MomentOracle::rademacher(),
            MomentOracle::constant(2.5),
        ] {
            let mut last = 0.0;
            for &p in &grid {
                let m = oracle.moment(p).unwrap();
                assert!(m >= last - 1e-12, "Lyapunov violated at p = {p}");
                last = m;
            }
        }
    }

    #[test]
    fn phi_norm_gaussian_exact() {
        let phi = PhiFunction::quadratic();
        let grid: Vec<f64> = linspace(0.1, 10.0, 100);
        let n1 = phi_norm(gaussian_log_mgf(1.0), &phi, &grid).unwrap();
        assert!((n1.value - 1.0).abs() < 1e-9);
        let n2 = phi_norm(gaussian_log_mgf(4.0), &phi, &grid).unwrap();
        assert!((n2.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn phi_norm_rademacher_below_one_matches_dense_oracle() {
        let phi = PhiFunction::quadratic();
        let grid: Vec<f64> = linspace(-20.0, 20.0, 801).into_iter().filter(|&l| l != 0.0).collect();
        let n = phi_norm(rademacher_log_mgf(), &phi, &grid).unwrap();
        assert!(n.value <= 1.0 + 1e-12);
        // Dense brute force over the same window.
        let dense: Vec<f64> = linspace(-20.0, 20.0, 8001).into_iter().filter(|&l| l != 0.0).collect();
        let oracle = dense
            .iter()
            .map(|&l| (2.0 * log_cosh(l)).sqrt() / l.abs())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(n.value >= oracle - 1e-6, "{} vs {oracle}", n.value);
        assert!(n.value <= 1.0);
    }

    #[test]
    fn phi_norm_rejects_zero_in_grid() {
        let phi = PhiFunction::quadratic();
        assert!(matches!(
            phi_norm(gaussian_log_mgf(1.0), &phi, &[0.0, 1.0]),
            Err(MdriError::Usage(_))
        ));
    }

    #[test]
    fn phi_norm_no_finite_norm_when_mgf_always_infinite() {
        let phi = PhiFunction::quadratic();
        let heavy = |_l: f64| f64::INFINITY;
        assert!(matches!(
            phi_norm(heavy, &phi, &[1.0, 2.0]),
            Err(MdriError::NoFiniteNorm(_))
        ));
    }

    #[test]
    fn phi_norm_shrinks_domain_with_warning() {
        let phi = PhiFunction::quadratic();
        // MGF finite only for |λ| < 2.
        let mgf = |l: f64| if l.abs() < 2.0 { 0.5 * l * l } else { f64::INFINITY };
        let n = phi_norm(mgf, &phi, &[-3.0, -1.0, 1.0, 3.0]).unwrap();
        assert_eq!(n.rejected_lambdas, vec![-3.0, 3.0]);
        assert!((n.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moment_psi_quadratic_closed_form() {
        let psi = moment_psi_from_phi(&PhiFunction::quadratic());
        // ψ(p) = p/√(2p) = √(p/2)
        let v = psi.eval(2.0).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
        let v8 = psi.eval(8.0).unwrap();
        assert!((v8 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn moment_psi_quartic_bisection_vs_closed_form() {
        let psi = moment_psi_from_phi(&PhiFunction::power(4.0).unwrap());
        // φ⁻¹(p) = p^{1/4} so ψ(p) = p^{3/4}; ψ(16) = 8.
        let v = psi.eval(16.0).unwrap();
        assert!((v - 8.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn moment_psi_exp_bisection_vs_closed_form() {
        let psi = moment_psi_from_phi(&PhiFunction::exp_minus_one());
        // φ⁻¹(p) = log(1+p); at p = e−1 the inverse is exactly 1.
        let p = std::f64::consts::E - 1.0;
        let v = psi.eval(p).unwrap();
        assert!((v - p).abs() < 1e-10, "{v}");
    }

    #[test]
    fn natural_phi_all_zero_samples() {
        let samples = vec![0.0; 64];
        let np = natural_phi(&samples, &linspace(-2.0, 2.0, 21)).unwrap();
        for &l in &[-2.0, -1.0, 0.5, 2.0] {
            assert!(np.phi.eval(l).abs() < 1e-14);
        }
        assert!(np.rejected_lambdas.is_empty());
    }

    #[test]
    fn natural_phi_gaussian_close_to_quadratic() {
        let m = crate::simulate::sample_gaussian(&DMatrix::identity(1, 1), 1_000_000, 101).unwrap();
        let np = natural_phi(&m.column(0), &linspace(-2.0, 2.0, 41)).unwrap();
        for &l in &[-2.0, -1.0, -0.3, 0.7, 1.5, 2.0] {
            assert!((np.phi.eval(l) - 0.5 * l * l).abs() < 0.01, "at {l}");
        }
    }

    #[test]
    fn natural_phi_rademacher_close_to_log_cosh() {
        let m = crate::simulate::sample_named(crate::simulate::SamplerKind::Rademacher, 1, 1_000_000, 7)
            .unwrap();
        let np = natural_phi(&m.column(0), &linspace(-3.0, 3.0, 25)).unwrap();
        for &l in &[-3.0, -1.0, 0.5, 2.0, 3.0] {
            assert!((np.phi.eval(l) - log_cosh(l)).abs() < 0.01, "at {l}");
        }
    }

    #[test]
    fn natural_phi_rejects_uncentered() {
        let samples: Vec<f64> = (0..1000).map(|i| 1.0 + 0.001 * (i % 7) as f64).collect();
        assert!(matches!(
            natural_phi(&samples, &linspace(-1.0, 1.0, 11)),
            Err(MdriError::NotCentered { .. })
        ));
    }

    #[test]
    fn natural_phi_norm_of_own_sample_is_one() {
        // The Φ(φ̂)-norm of the sample that generated φ̂ is 1 by construction.
        let m = crate::simulate::sample_named(crate::simulate::SamplerKind::Uniform, 1, 100_000, 3).unwrap();
        let col = m.column(0);
        let grid: Vec<f64> = linspace(-4.0, 4.0, 33).into_iter().filter(|&l| l != 0.0).collect();
        let np = natural_phi(&col, &grid).unwrap();
        let n = col.len() as f64;
        let emp_log_mgf = move |l: f64| {
            let m0 = col.iter().map(|&x| l * x).fold(f64::NEG_INFINITY, f64::max);
            m0 + col.iter().map(|&x| (l * x - m0).exp()).sum::<f64>().ln() - n.ln()
        };
        let norm = phi_norm(emp_log_mgf, &np.phi, &grid).unwrap();
        assert!((norm.value - 1.0).abs() < 1e-6, "{}", norm.value);
    }

    #[test]
    fn gnorm_tail_bound_examples() {
        assert_eq!(gnorm_tail_bound(1.0, 1.0, 0.0).unwrap(), 1.0);
        let v = gnorm_tail_bound(1.0, 1.0, 4.0_f64.ln()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let cap = gnorm_tail_bound(2.0, 1.0, 2.0 * 2.0_f64.ln()).unwrap();
        assert!((cap - 1.0).abs() < 1e-15);
        assert!(gnorm_tail_bound(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn moment_norm_equivalence_ratio_stable_across_variances() {
        let phi = PhiFunction::quadratic();
        let psi = moment_psi_from_phi(&phi);
        let p_grid = linspace(2.0, 40.0, 77);
        let l_grid: Vec<f64> = linspace(0.05, 10.0, 200);
        let mut ratios = Vec::new();
        for &var in &[0.5, 1.0, 2.0, 4.0] {
            let sigma = var.sqrt();
            let oracle = MomentOracle::scaled(MomentOracle::standard_gaussian(), sigma);
            let g = gls_norm(&oracle, &psi, &p_grid).unwrap();
            let f = phi_norm(gaussian_log_mgf(var), &phi, &l_grid).unwrap();
            ratios.push(g.value / f.value);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 1.05, "ratios {ratios:?}");
    }

    #[test]
    fn psi_validation_catches_blowup_and_positivity() {
        let psi = PsiFunction::power_blowup(4.0, 0.5).unwrap();
        psi.validate_on_grid(&linspace(1.0, 3.9, 30)).unwrap();
        assert!(psi.eval(4.0).is_err());
        let near = psi.eval(3.999999).unwrap();
        assert!(near > psi.eval(2.0).unwrap());
    }

    #[test]
    fn phi_validation_evenness_and_convexity() {
        PhiFunction::quadratic().validate_on_grid(&linspace(-5.0, 5.0, 41)).unwrap();
        PhiFunction::log_cosh_fn().validate_on_grid(&linspace(-5.0, 5.0, 41)).unwrap();
        // exp−1 is not even.
        assert!(PhiFunction::exp_minus_one().validate_on_grid(&linspace(-5.0, 5.0, 41)).is_err());
    }

    #[test]
    fn nu_conditions_hold_for_gaussian_quadratic() {
        let r = nalgebra::dmatrix![1.0, 0.5; 0.5, 1.0];
        let nu = NuFunction::gaussian_quadratic(r).unwrap();
        let pts: Vec<Vec<f64>> = vec![vec![0.5, 0.2], vec![-1.0, 2.0], vec![3.0, -0.7]];
        nu.check_conditions(&pts).unwrap();
    }

    #[test]
    fn nu_log_cosh_sum_satisfies_conditions_on_box() {
        let nu = NuFunction::log_cosh_sum(2);
        let pts: Vec<Vec<f64>> = vec![vec![0.3, -0.4], vec![1.0, 1.0], vec![-2.0, 0.5]];
        nu.check_conditions(&pts).unwrap();
        assert!((nu.eval(&[1.0, 2.0]) - (log_cosh(1.0) + log_cosh(2.0))).abs() < 1e-14);
    }
}
