//! Monte Carlo oracle: reproducible samplers, empirical moments and tails,
//! field-supremum simulation, and dominance reporting.
//!
//! Reproducibility contract: every sampler derives its randomness from
//! ChaCha8 streams keyed by `(seed, stream)` where the stream id is a batch
//! counter. Batches have a fixed size independent of the thread count and are
//! stitched together in batch order, so a run with one thread and a run with
//! eight produce bit-identical output.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{MdriError, Result};
use crate::exec;
use crate::linalg;

/// Trials per RNG stream. Fixed: changing it changes the sample stream.
const BATCH: usize = 8192;

/// Two-sided 99% normal quantile used by every Wilson interval in the crate.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// An n×d matrix of sampled rows with its provenance.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    data: Vec<f64>, // row-major
    n: usize,
    d: usize,
    pub seed: u64,
    pub stream: u64,
    pub descriptor: String,
}

impl SampleMatrix {
    pub fn from_rows(data: Vec<f64>, n: usize, d: usize, seed: u64, stream: u64, descriptor: &str) -> Result<Self> {
        if data.len() != n * d {
            return Err(MdriError::Usage(format!(
                "sample matrix shape mismatch: {} values for {n}x{d}",
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(MdriError::Usage("sample matrix contains non-finite entries".into()));
        }
        Ok(Self { data, n, d, seed, stream, descriptor: descriptor.to_string() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.d + j]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Projection of every row onto direction `b`.
    pub fn project(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.d);
        self.rows().map(|r| r.iter().zip(b).map(|(x, w)| x * w).sum()).collect()
    }

    /// Entry-wise maximum absolute deviation of the empirical covariance from `r`.
    pub fn covariance_deviation(&self, r: &DMatrix<f64>) -> f64 {
        let n = self.n as f64;
        let mut worst = 0.0_f64;
        for i in 0..self.d {
            for j in i..self.d {
                let mut acc = 0.0;
                for row in self.rows() {
                    acc += row[i] * row[j];
                }
                worst = worst.max((acc / n - r[(i, j)]).abs());
            }
        }
        worst
    }
}

/// Named scalar samplers for the verification corpus. All are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Rademacher,
    /// Uniform on [−1, 1].
    Uniform,
    /// 0.9·N(0,1) + 0.1·N(0,9) mixture (variance 1.8), centered and heavy-ish tailed.
    GaussianMixture,
    /// Martingale-difference path: increment i is r_i·s_i with r_i Rademacher
    /// and s_i a ±1 sign predictable from the partial sum so far.
    BoundedMartingale,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Rademacher => "rademacher",
            SamplerKind::Uniform => "uniform",
            SamplerKind::GaussianMixture => "gaussian-mixture",
            SamplerKind::BoundedMartingale => "bounded-martingale",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rademacher" => Ok(SamplerKind::Rademacher),
            "uniform" => Ok(SamplerKind::Uniform),
            "gaussian-mixture" => Ok(SamplerKind::GaussianMixture),
            "bounded-martingale" => Ok(SamplerKind::BoundedMartingale),
            other => Err(MdriError::Usage(format!("unknown sampler descriptor '{other}'"))),
        }
    }
}

fn batch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates rows `[lo, hi)` of a sampler into a flat row-major buffer,
/// in fixed-size batches keyed by the batch index.
fn sample_batched(
    n: usize,
    d: usize,
    seed: u64,
    stream_base: u64,
    fill_batch: impl Fn(&mut ChaCha8Rng, usize, &mut Vec<f64>) + Sync + Send,
) -> Vec<f64> {
    let batches = n.div_ceil(BATCH);
    let chunks = exec::map_indexed(batches, |b| {
        let rows = if (b + 1) * BATCH <= n { BATCH } else { n - b * BATCH };
        let mut rng = batch_rng(seed, stream_base + b as u64);
        let mut out = Vec::with_capacity(rows * d);
        fill_batch(&mut rng, rows, &mut out);
        out
    });
    let mut data = Vec::with_capacity(n * d);
    for c in chunks {
        data.extend_from_slice(&c);
    }
    data
}

/// Mean-zero Gaussian rows with covariance `r`, via a deterministic pivoted
/// PSD factorization. Bit-exact for a fixed `(r, n, seed)` at any thread count.
pub fn sample_gaussian(r: &DMatrix<f64>, n: usize, seed: u64) -> Result<SampleMatrix> {
    linalg::check_psd(r, 1e-10)?;
    let d = r.nrows();
    let l = linalg::pivoted_cholesky(r, 1e-14)?;
    let data = sample_batched(n, d, seed, 0, |rng, rows, out| {
        let mut z = vec![0.0_f64; d];
        for _ in 0..rows {
            for zj in z.iter_mut() {
                *zj = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut acc = 0.0;
                for (j, zj) in z.iter().enumerate() {
                    acc += l[(i, j)] * zj;
                }
                out.push(acc);
            }
        }
    });
    SampleMatrix::from_rows(data, n, d, seed, 0, "gaussian")
}

/// i.i.d. rows of a named centered sampler, `d` columns each.
///
/// For `BoundedMartingale` the columns of a row are the successive increments
/// of one martingale path (so they are dependent but conditionally centered);
/// for the other kinds the entries are i.i.d.
pub fn sample_named(kind: SamplerKind, d: usize, n: usize, seed: u64) -> Result<SampleMatrix> {
    if d == 0 {
        return Err(MdriError::Usage("sampler dimension must be positive".into()));
    }
    let data = sample_batched(n, d, seed, 0, |rng, rows, out| {
        for _ in 0..rows {
            match kind {
                SamplerKind::Rademacher => {
                    for _ in 0..d {
                        out.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
                    }
                }
                SamplerKind::Uniform => {
                    for _ in 0..d {
                        out.push(rng.random_range(-1.0..1.0));
                    }
                }
                SamplerKind::GaussianMixture => {
                    for _ in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        let sigma = if rng.random::<f64>() < 0.1 { 3.0 } else { 1.0 };
                        out.push(sigma * z);
                    }
                }
                SamplerKind::BoundedMartingale => {
                    let mut partial = 0.0_f64;
                    for _ in 0..d {
                        let sign = if partial >= 0.0 { 1.0 } else { -1.0 };
                        let r = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let inc = sign * r;
                        out.push(inc);
                        partial += inc;
                    }
                }
            }
        }
    });
    SampleMatrix::from_rows(data, n, d, seed, 0, kind.name())
}

/// Wilson score interval at 99% confidence.
///
/// Returns `(frequency, lower_edge, upper_edge)`, edges clamped to [0, 1].
pub fn wilson_99(successes: u64, trials: u64) -> (f64, f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_99 * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical tail estimates with Wilson 99% intervals.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalTail {
    /// Query points (one vector per query).
    pub points: Vec<Vec<f64>>,
    /// Empirical frequencies of the tail event at each point.
    pub frequencies: Vec<f64>,
    /// Wilson 99% lower edges.
    pub ci_lower: Vec<f64>,
    /// Wilson 99% upper edges.
    pub ci_upper: Vec<f64>,
    pub trials: u64,
}

impl EmpiricalTail {
    fn from_counts(points: Vec<Vec<f64>>, counts: Vec<u64>, trials: u64) -> Self {
        let mut frequencies = Vec::with_capacity(counts.len());
        let mut ci_lower = Vec::with_capacity(counts.len());
        let mut ci_upper = Vec::with_capacity(counts.len());
        for &c in &counts {
            let (p, lo, hi) = wilson_99(c, trials);
            frequencies.push(p);
            ci_lower.push(lo);
            ci_upper.push(hi);
        }
        Self { points, frequencies, ci_lower, ci_upper, trials }
    }

    /// CSV dump: one row per query point.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.len());
        let mut out = String::new();
        let coords: Vec<String> = (0..d).map(|j| format!("x{}", j + 1)).collect();
        out.push_str(&coords.join(","));
        out.push_str(",frequency,ci_lower,ci_upper,trials\n");
        for (i, pt) in self.points.iter().enumerate() {
            let c: Vec<String> = pt.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.join(","),
                self.frequencies[i],
                self.ci_lower[i],
                self.ci_upper[i],
                self.trials
            ));
        }
        out
    }
}

/// Empirical multidimensional tail: for each query `x` (strictly positive),
/// the maximal frequency over all 2^d sign patterns of the joint event
/// {±ξ(1) ≥ x₁, …, ±ξ(d) ≥ x_d}.
pub fn empirical_tail_multi(samples: &SampleMatrix, x_points: &[Vec<f64>]) -> Result<EmpiricalTail> {
    let d = samples.d();
    if d > 16 {
        return Err(MdriError::Usage("tail sign patterns limited to d <= 16".into()));
    }
    for x in x_points {
        if x.len() != d {
            return Err(MdriError::Usage("query dimension mismatch".into()));
        }
        if x.iter().any(|&v| v <= 0.0) {
            return Err(MdriError::Domain("tail query must be strictly positive".into()));
        }
    }
    let patterns = 1usize << d;
    let n = samples.n();
    let batches = n.div_ceil(BATCH);
    // Per batch: counts[point][pattern].
    let partials = exec::map_indexed(batches, |b| {
        let lo = b * BATCH;
        let hi = ((b + 1) * BATCH).min(n);
        let mut counts = vec![0u64; x_points.len() * patterns];
        for i in lo..hi {
            let row = samples.row(i);
            for (q, x) in x_points.iter().enumerate() {
                for s in 0..patterns {
                    let mut hit = true;
                    for j in 0..d {
                        let v = if s & (1 << j) == 0 { row[j] } else { -row[j] };
                        if v < x[j] {
                            hit = false;
                            break;
                        }
                    }
                    if hit {
                        counts[q * patterns + s] += 1;
                    }
                }
            }
        }
        counts
    });
    let mut totals = vec![0u64; x_points.len() * patterns];
    for part in partials {
        for (t, v) in totals.iter_mut().zip(part) {
            *t += v;
        }
    }
    let counts: Vec<u64> = (0..x_points.len())
        .map(|q| (0..patterns).map(|s| totals[q * patterns + s]).max().unwrap_or(0))
        .collect();
    Ok(EmpiricalTail::from_counts(x_points.to_vec(), counts, n as u64))
}

/// Largest frequency asymmetry across sign patterns, in units of CI width;
/// used to validate the all-positive-orthant convention on symmetric samplers.
pub fn orthant_asymmetry(samples: &SampleMatrix, x: &[f64]) -> Result<f64> {
    let d = samples.d();
    let patterns = 1usize << d;
    let n = samples.n() as u64;
    let mut counts = vec![0u64; patterns];
    for row in samples.rows() {
        for (s, c) in counts.iter_mut().enumerate() {
            let hit = (0..d).all(|j| {
                let v = if s & (1 << j) == 0 { row[j] } else { -row[j] };
                v >= x[j]
            });
            if hit {
                *c += 1;
            }
        }
    }
    let max = *counts.iter().max().unwrap() as f64 / n as f64;
    let min = *counts.iter().min().unwrap() as f64 / n as f64;
    let (_, lo, hi) = wilson_99(*counts.iter().max().unwrap(), n);
    let width = (hi - lo).max(1.0 / n as f64);
    Ok((max - min) / width)
}

/// A Gaussian vector random field on a finite index set: `sites` points, each
/// carrying a d-dimensional value, with joint covariance given entrywise.
pub struct GaussianFieldSampler {
    /// Factor of the joint covariance over `sites · d` variables.
    factor: DMatrix<f64>,
    pub sites: usize,
    pub d: usize,
    seed_space: u64,
}

impl GaussianFieldSampler {
    /// Builds the joint covariance Σ[(s,i),(t,j)] = cov(ξ(i,y_s), ξ(j,y_t))
    /// and factors it once. Fields larger than 8192 joint variables are
    /// rejected (desk-scale guard).
    pub fn new(
        sites: usize,
        d: usize,
        cov: impl Fn(usize, usize) -> DMatrix<f64>,
        seed_space: u64,
    ) -> Result<Self> {
        let m = sites * d;
        if m > 8192 {
            return Err(MdriError::Usage(format!(
                "field too large: {m} joint variables exceeds the 8192 cap"
            )));
        }
        let mut sigma = DMatrix::<f64>::zeros(m, m);
        for s in 0..sites {
            for t in 0..sites {
                let block = cov(s, t);
                for i in 0..d {
                    for j in 0..d {
                        sigma[(s * d + i, t * d + j)] = block[(i, j)];
                    }
                }
            }
        }
        linalg::check_symmetric(&sigma, 1e-8)?;
        let factor = linalg::pivoted_cholesky(&sigma, 1e-12)?;
        Ok(Self { factor, sites, d, seed_space })
    }

    /// One realization: returns per-coordinate maxima over sites.
    fn sample_maxima(&self, rng: &mut ChaCha8Rng, z: &mut [f64], field: &mut [f64]) -> Vec<f64> {
        let m = self.sites * self.d;
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for (i, f) in field.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..m {
                acc += self.factor[(i, j)] * z[j];
            }
            *f = acc;
        }
        let mut maxima = vec![f64::NEG_INFINITY; self.d];
        for s in 0..self.sites {
            for j in 0..self.d {
                let v = field[s * self.d + j];
                if v > maxima[j] {
                    maxima[j] = v;
                }
            }
        }
        maxima
    }
}

/// Joint tail of coordinate-wise field maxima, plus the minimax statistic.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSupTail {
    /// Joint exceedance of (max over sites per coordinate) at each `v`.
    pub joint: EmpiricalTail,
    /// Tail of min over coordinates of the per-coordinate maxima, at each
    /// scalar threshold `minimax_levels[i]`.
    pub minimax_levels: Vec<f64>,
    pub minimax: EmpiricalTail,
}

/// Simulates the field `trials` times and estimates
/// P(max_y ξ(1,y) > v₁, …, max_y ξ(d,y) > v_d) for every `v`, along with the
/// minimax tail P(min_j max_y ξ(j,y) > t) on the distinct diagonal levels.
pub fn empirical_field_sup(
    sampler: &GaussianFieldSampler,
    v_points: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<FieldSupTail> {
    for v in v_points {
        if v.len() != sampler.d {
            return Err(MdriError::Usage("field query dimension mismatch".into()));
        }
    }
    let mut minimax_levels: Vec<f64> = v_points
        .iter()
        .filter(|v| v.windows(2).all(|w| w[0] == w[1]))
        .map(|v| v[0])
        .collect();
    minimax_levels.sort_by(f64::total_cmp);
    minimax_levels.dedup();

    let batches = trials.div_ceil(BATCH);
    let m = sampler.sites * sampler.d;
    let nq = v_points.len();
    let nm = minimax_levels.len();
    let partials = exec::map_indexed(batches, |b| {
        let rows = if (b + 1) * BATCH <= trials { BATCH } else { trials - b * BATCH };
        let mut rng = batch_rng(seed ^ sampler.seed_space, b as u64);
        let mut z = vec![0.0; m];
        let mut field = vec![0.0; m];
        let mut joint = vec![0u64; nq];
        let mut mini = vec![0u64; nm];
        for _ in 0..rows {
            let maxima = sampler.sample_maxima(&mut rng, &mut z, &mut field);
            for (q, v) in v_points.iter().enumerate() {
                if maxima.iter().zip(v).all(|(m, t)| m > t) {
                    joint[q] += 1;
                }
            }
            let minimax = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
            for (q, &t) in minimax_levels.iter().enumerate() {
                if minimax > t {
                    mini[q] += 1;
                }
            }
        }
        (joint, mini)
    });
    let mut joint = vec![0u64; nq];
    let mut mini = vec![0u64; nm];
    for (j, mn) in partials {
        for (t, v) in joint.iter_mut().zip(j) {
            *t += v;
        }
        for (t, v) in mini.iter_mut().zip(mn) {
            *t += v;
        }
    }
    Ok(FieldSupTail {
        joint: EmpiricalTail::from_counts(v_points.to_vec(), joint, trials as u64),
        minimax: EmpiricalTail::from_counts(
            minimax_levels.iter().map(|&t| vec![t]).collect(),
            mini,
            trials as u64,
        ),
        minimax_levels,
    })
}

/// Outcome of comparing a batch of analytic bounds against empirical tails.
#[derive(Debug, Clone, Serialize)]
pub struct DominanceSummary {
    pub points: usize,
    pub violations: usize,
    /// Most negative value of `bound − (frequency − ci_half)`; ≥ 0 when clean.
    pub worst_margin: f64,
    /// Mean of log10(bound / frequency) over points with positive frequency.
    pub mean_log10_ratio: f64,
    pub per_point: Vec<DominancePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominancePoint {
    pub point: Vec<f64>,
    pub bound: f64,
    pub frequency: f64,
    pub ci_lower: f64,
    pub dominated: bool,
}

/// Per-point check `bound ≥ frequency − CI` with summary statistics.
pub fn dominance_report(bounds: &[f64], empirical: &EmpiricalTail) -> Result<DominanceSummary> {
    if bounds.len() != empirical.points.len() {
        return Err(MdriError::Usage(format!(
            "dominance grids mismatch: {} bounds vs {} empirical points",
            bounds.len(),
            empirical.points.len()
        )));
    }
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut log_sum = 0.0;
    let mut log_n = 0usize;
    let mut per_point = Vec::with_capacity(bounds.len());
    for (i, &b) in bounds.iter().enumerate() {
        let lower = empirical.ci_lower[i];
        let margin = b - lower;
        let dominated = margin >= 0.0;
        if !dominated {
            violations += 1;
        }
        worst = worst.min(margin);
        if empirical.frequencies[i] > 0.0 && b > 0.0 {
            log_sum += (b / empirical.frequencies[i]).log10();
            log_n += 1;
        }
        per_point.push(DominancePoint {
            point: empirical.points[i].clone(),
            bound: b,
            frequency: empirical.frequencies[i],
            ci_lower: lower,
            dominated,
        });
    }
    Ok(DominanceSummary {
        points: bounds.len(),
        violations,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        mean_log10_ratio: if log_n > 0 { log_sum / log_n as f64 } else { 0.0 },
        per_point,
    })
}

/// Empirical L_p norm `(mean |x|^p)^{1/p}` with a delta-method 99% CI
/// half-width on the norm scale.
pub fn empirical_lp_norm(values: &[f64], p: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for &v in values {
        let a = v.abs().powf(p);
        sum += a;
        sumsq += a * a;
    }
    let mean = sum / n;
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let var = (sumsq / n - mean * mean).max(0.0);
    let se_mean = (var / n).sqrt();
    let norm = mean.powf(1.0 / p);
    // d norm / d mean = norm / (p · mean)
    let half = Z_99 * se_mean * norm / (p * mean);
    (norm, half)
}
