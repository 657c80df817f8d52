//! Spectrum sampling via the bidiagonal matrix model, plus the tilted
//! exponential draws for the extreme eigenvalue under the sampling measure.
//!
//! A beta-Laguerre spectrum at (m, q, beta) is the eigenvalue set of B B^T
//! where B is lower bidiagonal with independent chi entries: diagonal degrees
//! beta*q, beta*(q-1), ..., beta*(q-m+1) and subdiagonal degrees
//! beta*(m-1), ..., beta. The rest-spectrum of the two-step sampling
//! procedure is exactly the (n-1, p-1) instance.

use crate::ensemble::{EnsembleParams, Spectrum};
use crate::error::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

/// Deterministic, seedable RNG with independent substreams.
///
/// Identical seed implies a bit-identical sample sequence. Substream j is an
/// independent ChaCha stream derived from the same seed, so parallel
/// replicate execution is reproducible regardless of worker count.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent substream `index` of the same master seed. Substreams are
    /// disjoint from the master stream and from each other.
    pub fn substream(&self, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // stream 0 is the master itself; substreams start at 1
        rng.set_stream(index.wrapping_add(1));
        Self { seed: self.seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// One chi_df draw: the square root of a gamma(df/2, scale 2) variate.
///
/// Non-integer df is allowed; shapes below 1 (small beta tails of the
/// subdiagonal) are handled by the underlying boosted-shape gamma sampler.
pub fn sample_chi(df: f64, rng: &mut RngStream) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::Domain(format!("sample_chi requires df > 0, got {df}")));
    }
    let gamma = Gamma::new(df / 2.0, 2.0)
        .map_err(|e| Error::Domain(format!("chi sampler setup failed for df = {df}: {e}")))?;
    Ok(gamma.sample(rng).sqrt())
}

/// Lower bidiagonal chi-entry matrix of the Dumitriu-Edelman model.
#[derive(Debug, Clone)]
pub struct BidiagonalMatrix {
    /// diagonal entries, length m
    pub diag: Vec<f64>,
    /// subdiagonal entries, length m - 1
    pub subdiag: Vec<f64>,
}

impl BidiagonalMatrix {
    /// Sample the m x m model with diagonal degrees beta*(q - j) and
    /// subdiagonal degrees beta*(m - 1 - i).
    pub fn sample(m: usize, q: u32, beta: f64, rng: &mut RngStream) -> Result<Self> {
        if m == 0 || (q as usize) < m {
            return Err(Error::Domain(format!("bidiagonal model requires 1 <= m <= q, got m={m}, q={q}")));
        }
        let mut diag = Vec::with_capacity(m);
        for j in 0..m {
            diag.push(sample_chi(beta * (f64::from(q) - j as f64), rng)?);
        }
        let mut subdiag = Vec::with_capacity(m - 1);
        for i in 1..m {
            subdiag.push(sample_chi(beta * (m - i) as f64, rng)?);
        }
        Ok(Self { diag, subdiag })
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }
}

/// Symmetric tridiagonal matrix, stored as diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl SymTridiagonal {
    /// The Gram matrix B B^T of a bidiagonal factor, formed entrywise:
    /// diag[0] = b11^2, diag[i] = b_ii^2 + b_{i,i-1}^2,
    /// offdiag[i] = b_{i+1,i} * b_ii.
    pub fn from_bidiagonal(b: &BidiagonalMatrix) -> Self {
        let m = b.order();
        let mut diag = Vec::with_capacity(m);
        diag.push(b.diag[0] * b.diag[0]);
        for i in 1..m {
            diag.push(b.diag[i] * b.diag[i] + b.subdiag[i - 1] * b.subdiag[i - 1]);
        }
        let offdiag = (0..m - 1).map(|i| b.subdiag[i] * b.diag[i]).collect();
        Self { diag, offdiag }
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin bounds on the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 };
            let right = if i < n - 1 { self.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }
}

const SOLVER_MAX_ITER: usize = 160;

/// All eigenvalues of a symmetric tridiagonal matrix, descending, to machine
/// precision: Sturm-sequence bisection brackets each eigenvalue (guaranteed
/// convergence), with guarded Newton steps on the characteristic-polynomial
/// log-derivative once a bracket isolates it. Exact ties trigger one re-solve
/// with a perturbed spectral shift; a surviving tie is an error.
pub fn tridiag_eigenvalues(t: &SymTridiagonal) -> Result<Spectrum> {
    let mut ev = solve_shifted(t, 0.0)?;
    let tied = ev.windows(2).any(|w| w[0] == w[1]);
    if tied {
        let (lo, hi) = t.gershgorin();
        let shift = (hi - lo).abs().max(1.0) * 1e-9;
        ev = solve_shifted(t, shift)?;
        if ev.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Numerical(format!(
                "tied eigenvalues persisted after shift re-solve; diag={:?} offdiag={:?}",
                t.diag, t.offdiag
            )));
        }
    }
    ev.reverse();
    Spectrum::from_unsorted(ev)
}

/// Eigenvalues ascending of (T - shift I), plus shift.
fn solve_shifted(t: &SymTridiagonal, shift: f64) -> Result<Vec<f64>> {
    let n = t.order();
    let diag: Vec<f64> = t.diag.iter().map(|d| d - shift).collect();
    if n == 1 {
        return Ok(vec![t.diag[0]]);
    }
    let off2: Vec<f64> = t.offdiag.iter().map(|e| e * e).collect();
    let (mut glo, mut ghi) = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { t.offdiag[i - 1].abs() } else { 0.0 };
            let right = if i < n - 1 { t.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(diag[i] - left - right);
            hi = hi.max(diag[i] + left + right);
        }
        (lo, hi)
    };
    let scale = ghi.abs().max(glo.abs()).max(1.0);
    glo -= scale * 1e-14;
    ghi += scale * 1e-14;
    let pivmin = f64::EPSILON * scale * 1e-3;
    let tol = f64::EPSILON * scale;

    let mut ev = Vec::with_capacity(n);
    let mut lo_floor = glo;
    for k in 0..n {
        let mut lo = lo_floor;
        let mut hi = ghi;
        let mut converged = false;
        let mut x = 0.5 * (lo + hi);
        for iter in 0..SOLVER_MAX_ITER {
            if hi - lo <= tol {
                converged = true;
                break;
            }
            let (count, newton_step) = sturm_count_newton(&diag, &off2, x, pivmin);
            if count <= k {
                lo = x;
            } else {
                hi = x;
            }
            // a few pure bisection rounds isolate the eigenvalue, then the
            // guarded Newton step finishes quadratically
            let candidate = x + newton_step;
            x = if iter >= 6 && newton_step.is_finite() && candidate > lo && candidate < hi {
                candidate
            } else {
                0.5 * (lo + hi)
            };
        }
        if !converged && hi - lo > 4.0 * tol {
            return Err(Error::Numerical(format!(
                "tridiagonal eigensolver failed to converge for eigenvalue {k}; bracket [{lo}, {hi}]; diag={:?} offdiag={:?}",
                t.diag, t.offdiag
            )));
        }
        let root = 0.5 * (lo + hi) + shift;
        ev.push(root);
        // eigenvalue k+1 lies at or above eigenvalue k
        lo_floor = lo;
    }
    Ok(ev)
}

/// One fused Sturm pass: the count of eigenvalues of diag(d) strictly below
/// x (number of negative LDL^T pivots), and the Newton step -f/f' for the
/// characteristic polynomial via the pivot log-derivative.
fn sturm_count_newton(diag: &[f64], off2: &[f64], x: f64, pivmin: f64) -> (usize, f64) {
    let n = diag.len();
    let mut count = 0usize;
    let mut d = diag[0] - x;
    let mut dp = -1.0f64;
    if d < 0.0 {
        count += 1;
    }
    let mut ratio_sum = dp / guarded(d, pivmin);
    for i in 1..n {
        let dg = guarded(d, pivmin);
        let dnew = (diag[i] - x) - off2[i - 1] / dg;
        let dpnew = -1.0 + off2[i - 1] * dp / (dg * dg);
        if dnew < 0.0 {
            count += 1;
        }
        ratio_sum += dpnew / guarded(dnew, pivmin);
        d = dnew;
        dp = dpnew;
    }
    (count, -1.0 / ratio_sum)
}

#[inline]
fn guarded(d: f64, pivmin: f64) -> f64 {
    if d.abs() < pivmin {
        if d < 0.0 {
            -pivmin
        } else {
            pivmin
        }
    } else {
        d
    }
}

/// Step 1 of the two-step sampling procedure: the spectrum of the
/// (n-1, p-1) bidiagonal Gram matrix, length n - 1, descending.
pub fn sample_rest_spectrum(params: &EnsembleParams, rng: &mut RngStream) -> Result<Spectrum> {
    let n = params.n();
    if n < 2 {
        return Err(Error::Domain("rest spectrum needs n >= 2; n = 1 skips the first step".into()));
    }
    let b = BidiagonalMatrix::sample((n - 1) as usize, params.p() - 1, params.beta(), rng)?;
    let t = SymTridiagonal::from_bidiagonal(&b);
    tridiag_eigenvalues(&t)
}

/// A full (n, p) spectrum from the bidiagonal model, descending.
pub fn sample_full_spectrum(params: &EnsembleParams, rng: &mut RngStream) -> Result<Spectrum> {
    let b = BidiagonalMatrix::sample(params.n() as usize, params.p(), params.beta(), rng)?;
    let t = SymTridiagonal::from_bidiagonal(&b);
    tridiag_eigenvalues(&t)
}

/// Shifted exponential on (lower, inf): density rate * exp(-rate (v - lower)).
pub fn sample_top_exponential(lower: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("exponential rate must be positive, got {rate}")));
    }
    for _ in 0..64 {
        let e: f64 = Exp1.sample(rng);
        let v = lower + e / rate;
        if v > lower {
            return Ok(v);
        }
    }
    Err(Error::Numerical("top exponential sampler kept returning the boundary".into()))
}

/// Reflected shifted exponential on (-inf, upper) conditioned on positivity:
/// density proportional to rate * exp(rate (v - upper)) on (0, upper),
/// sampled by inversion. The truncation constant 1 - exp(-rate*upper) is
/// accounted for in the importance weight, not here.
pub fn sample_bottom_exponential(upper: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("exponential rate must be positive, got {rate}")));
    }
    if !(upper > 0.0) {
        return Err(Error::Domain(format!("truncated exponential needs upper > 0, got {upper}")));
    }
    let znorm = -(-rate * upper).exp_m1();
    for _ in 0..64 {
        let u: f64 = Open01.sample(rng);
        let v = upper + (-znorm * u).ln_1p() / rate;
        if v > 0.0 && v < upper {
            return Ok(v);
        }
    }
    Err(Error::Numerical("bottom exponential sampler kept leaving (0, upper)".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rng_reproducible_and_substreams_differ() {
        let mut a = RngStream::from_seed(7);
        let mut b = RngStream::from_seed(7);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut s0 = RngStream::from_seed(7).substream(0);
        let mut s1 = RngStream::from_seed(7).substream(1);
        assert_ne!(s0.next_u64(), s1.next_u64());
        // substream is independent of how far the parent has advanced
        let parent = RngStream::from_seed(9);
        let mut advanced = RngStream::from_seed(9);
        let _ = advanced.next_u64();
        assert_eq!(parent.substream(3).next_u64(), advanced.substream(3).next_u64());
    }

    #[test]
    fn chi_square_moments() {
        let mut rng = RngStream::from_seed(42);
        let df = 3.7;
        let reps = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..reps {
            let c = sample_chi(df, &mut rng).unwrap();
            let c2 = c * c;
            sum += c2;
            sumsq += c2 * c2;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        // E chi^2 = df with s.e. sqrt(2 df / reps); 4 sigma band
        let band = 4.0 * (2.0 * df / reps as f64).sqrt();
        assert!((mean - df).abs() < band, "mean {mean} vs {df} (band {band})");
        assert!((var - 2.0 * df).abs() < 0.1 * 2.0 * df, "var {var} vs {}", 2.0 * df);
    }

    #[test]
    fn chi_small_shape_ok() {
        // beta = 0.5 subdiagonal tail has df = 0.5 => gamma shape 0.25 < 1
        let mut rng = RngStream::from_seed(1);
        let mut sum = 0.0;
        let reps = 200_000;
        for _ in 0..reps {
            let c = sample_chi(0.5, &mut rng).unwrap();
            assert!(c > 0.0);
            sum += c * c;
        }
        let mean = sum / reps as f64;
        let band = 4.0 * (2.0 * 0.5 / reps as f64).sqrt();
        assert!((mean - 0.5).abs() < band, "mean {mean}");
    }

    #[test]
    fn chi_rejects_bad_df() {
        let mut rng = RngStream::from_seed(0);
        assert!(sample_chi(0.0, &mut rng).is_err());
        assert!(sample_chi(-1.0, &mut rng).is_err());
    }

    #[test]
    fn chi_ks_against_gamma_cdf() {
        // KS of chi_1 draws against the incomplete-gamma CDF; 0.001-level
        // critical value is 1.9495 / sqrt(N)
        let mut rng = RngStream::from_seed(99);
        let n = 100_000usize;
        let mut draws: Vec<f64> = (0..n).map(|_| sample_chi(1.0, &mut rng).unwrap()).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_stat: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let f = crate::numerics::reg_lower_inc_gamma(0.5, x * x / 2.0).unwrap();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d_stat = d_stat.max((f - lo).abs()).max((hi - f).abs());
        }
        let crit = 1.9495 / (n as f64).sqrt();
        assert!(d_stat < crit, "KS statistic {d_stat} above critical {crit}");
    }

    #[test]
    fn eigenvalues_2x2_closed_form() {
        let t = SymTridiagonal { diag: vec![2.0, 2.0], offdiag: vec![1.0] };
        let s = tridiag_eigenvalues(&t).unwrap();
        assert_relative_eq!(s.values()[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(s.values()[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn eigenvalues_1x1() {
        let t = SymTridiagonal { diag: vec![5.5], offdiag: vec![] };
        assert_eq!(tridiag_eigenvalues(&t).unwrap().values(), &[5.5]);
    }

    #[test]
    fn eigenvalues_match_dense_oracle() {
        // independent oracle: nalgebra's dense symmetric eigensolver
        let mut rng = RngStream::from_seed(2024);
        for _ in 0..20 {
            let b = BidiagonalMatrix::sample(20, 60, 1.0, &mut rng).unwrap();
            let t = SymTridiagonal::from_bidiagonal(&b);
            let ours = tridiag_eigenvalues(&t).unwrap();

            let mut dense = nalgebra::DMatrix::zeros(20, 20);
            for i in 0..20 {
                dense[(i, i)] = t.diag[i];
                if i + 1 < 20 {
                    dense[(i + 1, i)] = t.offdiag[i];
                    dense[(i, i + 1)] = t.offdiag[i];
                }
            }
            let mut oracle: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let scale = t.gershgorin().1.abs();
            for (o, e) in ours.values().iter().zip(oracle.iter()) {
                assert!((o - e).abs() <= 1e-9 * scale, "ours {o} oracle {e}");
            }
        }
    }

    #[test]
    fn eigenvalues_match_squared_singular_values() {
        // eigenvalues of B B^T = squared singular values of B (Golub-Kahan
        // route through nalgebra's SVD)
        let mut rng = RngStream::from_seed(7);
        for _ in 0..10 {
            let m = 12;
            let b = BidiagonalMatrix::sample(m, 40, 2.0, &mut rng).unwrap();
            let t = SymTridiagonal::from_bidiagonal(&b);
            let ours = tridiag_eigenvalues(&t).unwrap();
            let mut dense = nalgebra::DMatrix::zeros(m, m);
            for i in 0..m {
                dense[(i, i)] = b.diag[i];
                if i > 0 {
                    dense[(i, i - 1)] = b.subdiag[i - 1];
                }
            }
            let svd = dense.svd(false, false);
            let mut sq: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
            sq.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (o, e) in ours.values().iter().zip(sq.iter()) {
                assert_relative_eq!(o, e, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn rest_spectrum_n2_is_single_chi_square() {
        // the (n=2, p=100) rest matrix is 1 x 1: one chi^2_{99} draw
        let params = EnsembleParams::new(2, 100, 1.0).unwrap();
        let mut rng = RngStream::from_seed(5);
        let reps = 100_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let s = sample_rest_spectrum(&params, &mut rng).unwrap();
            assert_eq!(s.len(), 1);
            sum += s.values()[0];
        }
        let mean = sum / reps as f64;
        let band = 4.0 * (2.0 * 99.0 / reps as f64).sqrt();
        assert!((mean - 99.0).abs() < band, "mean {mean}");
    }

    #[test]
    fn rest_spectrum_trace_law() {
        // Sum of the rest spectrum is chi^2 with beta (p-1)(n-1) degrees
        let params = EnsembleParams::new(10, 100, 1.0).unwrap();
        let mut rng = RngStream::from_seed(11);
        let reps = 10_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let s = sample_rest_spectrum(&params, &mut rng).unwrap();
            sum += s.values().iter().sum::<f64>();
        }
        let expect = 99.0 * 9.0;
        let mean = sum / reps as f64;
        let band = 4.0 * (2.0 * expect / reps as f64).sqrt();
        assert!((mean - expect).abs() < band, "mean {mean} expect {expect}");
    }

    #[test]
    fn top_exponential_mean_and_support() {
        let mut rng = RngStream::from_seed(3);
        let rate = 0.25;
        let lower = 17.0;
        let reps = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let v = sample_top_exponential(lower, rate, &mut rng).unwrap();
            assert!(v > lower);
            sum += v - lower;
        }
        let mean = sum / reps as f64;
        let band = 4.0 * (1.0 / rate) / (reps as f64).sqrt();
        assert!((mean - 4.0).abs() < band, "mean {mean}");
        assert!(sample_top_exponential(0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn bottom_exponential_mean_and_support() {
        let mut rng = RngStream::from_seed(4);
        let rate = 2.0;
        let upper = 50.0; // rate*upper huge: truncation negligible
        let reps = 500_000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let v = sample_bottom_exponential(upper, rate, &mut rng).unwrap();
            assert!(v > 0.0 && v < upper);
            sum += upper - v;
        }
        let mean = sum / reps as f64;
        let band = 4.0 * (1.0 / rate) / (reps as f64).sqrt();
        assert!((mean - 0.5).abs() < band, "mean {mean}");
        assert!(sample_bottom_exponential(0.0, 1.0, &mut rng).is_err());
        assert!(sample_bottom_exponential(1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn bottom_exponential_heavy_truncation() {
        // upper * rate small: the truncated distribution must stay in (0, upper)
        let mut rng = RngStream::from_seed(12);
        for _ in 0..50_000 {
            let v = sample_bottom_exponential(0.01, 1e-3, &mut rng).unwrap();
            assert!(v > 0.0 && v < 0.01);
        }
    }

    #[test]
    fn full_spectrum_reproducible() {
        let params = EnsembleParams::new(10, 100, 1.0).unwrap();
        let a = sample_full_spectrum(&params, &mut RngStream::from_seed(31)).unwrap();
        let b = sample_full_spectrum(&params, &mut RngStream::from_seed(31)).unwrap();
        assert_eq!(a.values(), b.values(), "same seed, bit-identical spectrum");
        for w in a.values().windows(2) {
            assert!(w[0] > w[1] && w[1] > 0.0);
        }
    }

    #[test]
    fn rate_formulas() {
        // (x - beta) / (2x) at beta=1, x=2 and (beta - y) / (2y) at beta=1, y=0.5
        assert_relative_eq!((2.0 - 1.0) / (2.0 * 2.0), 0.25);
        assert_relative_eq!((1.0 - 0.5) / (2.0 * 0.5), 0.5);
    }
}
