//! Closed-form machinery: log normalizing constants, sharp and exponential
//! tail approximations for both extremes, the Marchenko-Pastur law, the
//! large-deviation rate function and its tilt-rate bound, and Tracy-Widom
//! tail approximations via tabulated CDFs.
//!
//! Every tail quantity is returned as a natural-log probability; consumers
//! exponentiate only for display (intermediate factors like (px)^{beta p/2}
//! are far outside double range while the final logs are not).

use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::numerics::{interp_cdf, log_gamma, quad_sqrt_edge, InterpTable};
use std::sync::OnceLock;

const LN_2: f64 = std::f64::consts::LN_2;
const PI: f64 = std::f64::consts::PI;

/// ln c_{n,p,beta}: the normalizing constant of the joint eigenvalue
/// density, as a sum of log-gamma terms,
/// -(beta n p / 2) ln 2 + sum_j [ln G(1+b/2) - ln G(1+b j/2) - ln G(b(p-n+j)/2)].
pub fn log_c(n: u32, p: u32, beta: f64) -> Result<f64> {
    check_params(n, p, beta)?;
    let b = beta;
    let (nf, pf) = (f64::from(n), f64::from(p));
    let mut acc = -b * nf * pf / 2.0 * LN_2;
    let lg_half = log_gamma(1.0 + b / 2.0)?;
    for j in 1..=n {
        let jf = f64::from(j);
        acc += lg_half - log_gamma(1.0 + b * jf / 2.0)? - log_gamma(b * (pf - nf + jf) / 2.0)?;
    }
    Ok(acc)
}

/// ln A_n = ln(c_{n,p,beta} / c_{n-1,p-1,beta}) in its closed three-gamma
/// form: -(beta (n+p-1)/2) ln 2 + ln G(1+b/2) - ln G(1+b n/2) - ln G(b p/2).
pub fn log_a(n: u32, p: u32, beta: f64) -> Result<f64> {
    check_params(n, p, beta)?;
    let (nf, pf) = (f64::from(n), f64::from(p));
    Ok(-beta * (nf + pf - 1.0) / 2.0 * LN_2 + log_gamma(1.0 + beta / 2.0)?
        - log_gamma(1.0 + beta * nf / 2.0)?
        - log_gamma(beta * pf / 2.0)?)
}

fn check_params(n: u32, p: u32, beta: f64) -> Result<()> {
    if n < 1 || p < n {
        return Err(Error::Domain(format!("need p >= n >= 1, got n={n}, p={p}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Log of the sharp right-tail approximation of P(lambda_(1) > p x),
/// assembled term by term in log scale:
/// n A_n (2x/(x-b)) (px-pb)^{b(n-1)} (px)^{b(p-n+1)/2-1}
///   exp(-px/2 - b^3 n^2 / (2 (x-b)^2 p)).
pub fn sharp_log_tail_max(params: &EnsembleParams, x: f64) -> Result<f64> {
    let b = params.beta();
    if !(x > b) {
        return Err(Error::Domain(format!("sharp max tail requires x > beta, got x={x}, beta={b}")));
    }
    let (n, p) = (f64::from(params.n()), f64::from(params.p()));
    let la = log_a(params.n(), params.p(), b)?;
    Ok(n.ln()
        + la
        + (2.0 * x / (x - b)).ln()
        + b * (n - 1.0) * (p * (x - b)).ln()
        + (b * (p - n + 1.0) / 2.0 - 1.0) * (p * x).ln()
        - p * x / 2.0
        - b.powi(3) * n * n / (2.0 * (x - b) * (x - b) * p))
}

/// The exponential-rate expression B_{n,p,beta} shared by the max tail
/// (x > beta) and the min tail (0 < y < beta, where the deviation factors
/// use |y - beta|). `abs_dev` is |x - beta|.
fn b_expr(params: &EnsembleParams, x: f64, abs_dev: f64) -> Result<f64> {
    let b = params.beta();
    let (n, p) = (f64::from(params.n()), f64::from(params.p()));
    Ok(p * (b / 2.0 - b / 2.0 * b.ln() - x / 2.0 + b / 2.0 * x.ln())
        + b * n / 2.0 * (p / n).ln()
        - (b + 1.0) / 2.0 * p.ln()
        + b * n * (-x.ln() / 2.0 + abs_dev.ln() - b.ln() / 2.0 + 0.5)
        + 0.5 * n.ln()
        - b.powi(3) * n * n / (2.0 * abs_dev * abs_dev * p)
        - (b + 1.0) * abs_dev.ln()
        + b / 2.0 * (2.0 * x).ln()
        - PI.ln()
        + log_gamma(1.0 + b / 2.0)?)
}

/// B_{n,p,beta}(x), the closed exponential-rate form of the max tail
/// (P(lambda_(1) > p x) ~ exp(B)), exactly as displayed including the
/// constant block.
pub fn b_rate(params: &EnsembleParams, x: f64) -> Result<f64> {
    let b = params.beta();
    if !(x > b) {
        return Err(Error::Domain(format!("b_rate requires x > beta, got x={x}, beta={b}")));
    }
    b_expr(params, x, x - b)
}

/// Log of the min-tail approximation P(lambda_(n) < p y) ~ exp(B(y)) for
/// 0 < y < beta; the (x - beta) factors are read as |y - beta|.
pub fn log_tail_min(params: &EnsembleParams, y: f64) -> Result<f64> {
    let b = params.beta();
    if !(y > 0.0 && y < b) {
        return Err(Error::Domain(format!("min tail requires 0 < y < beta, got y={y}, beta={b}")));
    }
    b_expr(params, y, b - y)
}

/// The Marchenko-Pastur law: support edges x_* = beta (1 - sqrt(1/gamma))^2
/// and x^* = beta (1 + sqrt(1/gamma))^2, density
/// sqrt((y - x_*)(x^* - y)) / (2 pi gamma^{-1} beta y) on the support.
#[derive(Debug, Clone, Copy)]
pub struct MPLaw {
    beta: f64,
    gamma: f64,
    x_star: f64,
    x_star_upper: f64,
}

impl MPLaw {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("MP law requires beta > 0, got {beta}")));
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("MP law requires gamma >= 1, got {gamma}")));
        }
        let root = (1.0 / gamma).sqrt();
        Ok(Self {
            beta,
            gamma,
            x_star: beta * (1.0 - root) * (1.0 - root),
            x_star_upper: beta * (1.0 + root) * (1.0 + root),
        })
    }

    pub fn from_params(params: &EnsembleParams) -> Self {
        // gamma = p/n >= 1 always holds for valid params
        Self::new(params.beta(), params.gamma()).expect("valid params give a valid MP law")
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Lower support edge.
    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    /// Upper support edge.
    pub fn x_star_upper(&self) -> f64 {
        self.x_star_upper
    }

    /// Density prefactor without the square-root edge weight.
    fn density_prefactor(&self, y: f64) -> f64 {
        self.gamma / (2.0 * PI * self.beta * y)
    }
}

/// Marchenko-Pastur density; zero outside the support (including at the
/// edges, where the square-root factor vanishes).
pub fn mp_density(law: &MPLaw, y: f64) -> f64 {
    if y <= law.x_star || y >= law.x_star_upper {
        return 0.0;
    }
    ((y - law.x_star) * (law.x_star_upper - y)).sqrt() * law.density_prefactor(y)
}

/// Node count used for the rate-function quadratures. The integrands'
/// edge poles cancel against the square-root weight, so the cosine rule
/// converges spectrally; 4096 nodes leave ample margin at the log-singular
/// evaluation point x = x^*.
const RATE_NODES: usize = 4096;

/// Large-deviation rate function
/// I_beta(x) = -beta int ln|x-y| sigma(dy) + x/2 - (beta/2)(gamma-1) ln x
///             + alpha_beta,
/// alpha_beta = (beta/2)[(gamma+1)(ln beta - 1) + gamma ln gamma],
/// for x >= x^*; +infinity below the upper edge.
pub fn ldp_rate(law: &MPLaw, x: f64) -> Result<f64> {
    if x < law.x_star_upper {
        return Ok(f64::INFINITY);
    }
    let b = law.beta;
    let g = law.gamma;
    let integral = quad_sqrt_edge(
        |y| (x - y).abs().ln() * law.density_prefactor(y),
        law.x_star,
        law.x_star_upper,
        RATE_NODES,
    )?;
    let alpha = b / 2.0 * ((g + 1.0) * (b.ln() - 1.0) + g * g.ln());
    Ok(-b * integral + 0.5 * x - 0.5 * b * (g - 1.0) * x.ln() + alpha)
}

/// Upper bound for the exponential tilt rate of the gamma-regime sampler:
/// 1 - 2 beta int (gamma x - y)^{-1} sigma(dy) - 2 beta (gamma-1)/(gamma x),
/// the derivative of twice the rate function at gamma x. Requires
/// gamma x > x^*; a non-positive computed bound is reported as a numerical
/// contract violation (choose an explicit tilt rate in that case).
pub fn j_rate_bound(law: &MPLaw, x: f64) -> Result<f64> {
    let z = law.gamma * x;
    if !(z > law.x_star_upper) {
        return Err(Error::Domain(format!(
            "rate bound requires gamma*x > x^* = {}, got gamma*x = {z}",
            law.x_star_upper
        )));
    }
    let integral = quad_sqrt_edge(
        |y| law.density_prefactor(y) / (z - y),
        law.x_star,
        law.x_star_upper,
        RATE_NODES,
    )?;
    let bound = 1.0 - 2.0 * law.beta * integral - 2.0 * law.beta * (law.gamma - 1.0) / z;
    if !(bound > 0.0) {
        return Err(Error::Numerical(format!(
            "tilt rate bound is not positive at gamma={}, x={x} (bound = {bound}); \
             supply an explicit tilt rate instead",
            law.gamma
        )));
    }
    Ok(bound)
}

/// Which Tracy-Widom centering/scaling pair to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwCentering {
    /// mu = (sqrt(n) + sqrt(p-1))^2,
    /// sigma = (sqrt(n) + sqrt(p-1)) (1/sqrt(n) + 1/sqrt(p-1))^{1/3}
    Classic,
    /// the half-shifted constants: n - 1/2 and p - 1/2 in both roles
    Refined,
}

/// Tabulated Tracy-Widom CDFs for beta in {1, 2, 4}.
#[derive(Debug, Clone)]
pub struct TwTable {
    f1: InterpTable,
    f2: InterpTable,
    f4: InterpTable,
}

impl TwTable {
    /// Parse the delimited text format: `#`-prefixed provenance header lines,
    /// then rows `s, F1(s), F2(s), F4(s)` with s strictly increasing.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Vec::new();
        let mut f1 = Vec::new();
        let mut f2 = Vec::new();
        let mut f4 = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Validation(format!(
                    "TW table line {}: expected 4 comma-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |f: &str| -> Result<f64> {
                f.parse::<f64>()
                    .map_err(|e| Error::Validation(format!("TW table line {}: {e}", lineno + 1)))
            };
            s.push(parse(fields[0])?);
            f1.push(parse(fields[1])?);
            f2.push(parse(fields[2])?);
            f4.push(parse(fields[3])?);
        }
        let table = Self {
            f1: InterpTable::new(s.clone(), f1)?,
            f2: InterpTable::new(s.clone(), f2)?,
            f4: InterpTable::new(s, f4)?,
        };
        for t in [&table.f1, &table.f2, &table.f4] {
            if t.min_knot() > -10.0 || t.max_knot() < 6.0 {
                return Err(Error::Validation(format!(
                    "TW table must span at least [-10, 6], got [{}, {}]",
                    t.min_knot(),
                    t.max_knot()
                )));
            }
        }
        Ok(table)
    }

    /// Load from a file, returning the table with the file's SHA-256 checksum
    /// for report provenance.
    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let table = Self::parse(&text)?;
        Ok((table, sha256_hex(text.as_bytes())))
    }

    /// The bundled table.
    pub fn embedded() -> &'static Self {
        static TABLE: OnceLock<TwTable> = OnceLock::new();
        TABLE.get_or_init(|| Self::parse(EMBEDDED_TW_DATA).expect("bundled TW table is valid"))
    }

    /// SHA-256 of the bundled table data.
    pub fn embedded_checksum() -> &'static str {
        static SUM: OnceLock<String> = OnceLock::new();
        SUM.get_or_init(|| sha256_hex(EMBEDDED_TW_DATA.as_bytes()))
    }

    pub fn cdf_table(&self, beta: f64) -> Result<&InterpTable> {
        if beta == 1.0 {
            Ok(&self.f1)
        } else if beta == 2.0 {
            Ok(&self.f2)
        } else if beta == 4.0 {
            Ok(&self.f4)
        } else {
            Err(Error::Validation(format!(
                "Tracy-Widom tables cover beta in {{1, 2, 4}}; beta = {beta} is unsupported"
            )))
        }
    }
}

static EMBEDDED_TW_DATA: &str = include_str!("../data/tw_cdf.csv");

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Centering/scaling constants for the Tracy-Widom approximation.
pub fn tw_centering(params: &EnsembleParams, centering: TwCentering) -> (f64, f64) {
    let (nf, pf) = (f64::from(params.n()), f64::from(params.p()));
    let (sn, sp) = match centering {
        TwCentering::Classic => (nf.sqrt(), (pf - 1.0).sqrt()),
        TwCentering::Refined => ((nf - 0.5).sqrt(), (pf - 0.5).sqrt()),
    };
    let mu = (sn + sp) * (sn + sp);
    let sigma = (sn + sp) * (1.0 / sn + 1.0 / sp).cbrt();
    (mu, sigma)
}

/// ln(1 - F_beta((p x - mu)/sigma)): the Tracy-Widom approximation of the
/// max tail. Returns negative infinity when the argument is beyond the
/// table's upper clamp.
pub fn tw_log_tail(params: &EnsembleParams, x: f64, centering: TwCentering, table: &TwTable) -> Result<f64> {
    let cdf = table.cdf_table(params.beta())?;
    let (mu, sigma) = tw_centering(params, centering);
    let s = (f64::from(params.p()) * x - mu) / sigma;
    let f = interp_cdf(cdf, s);
    Ok((1.0 - f).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: u32, p: u32, beta: f64) -> EnsembleParams {
        EnsembleParams::new(n, p, beta).unwrap()
    }

    #[test]
    fn log_c_known_values() {
        // c_{2,3,1} = 1/8 exactly; 50-digit oracle -2.079441541679835928251696
        assert_relative_eq!(log_c(2, 3, 1.0).unwrap(), -2.079441541679835928251696, max_relative = 1e-14);
        // n = 1 reduction: the chi^2_{beta p} constant
        let direct = -(200.0 / 2.0) * LN_2 - log_gamma(100.0).unwrap();
        assert_relative_eq!(log_c(1, 200, 1.0).unwrap(), direct, max_relative = 1e-14);
    }

    #[test]
    fn log_a_oracle_and_identity() {
        // 50-digit gamma oracle
        assert_relative_eq!(log_a(10, 100, 1.0).unwrap(), -187.2505392672791965887508, max_relative = 1e-13);
        // definitional identity A_n = c_{n,p} / c_{n-1,p-1}
        for &(n, p) in &[(2u32, 5u32), (10, 100), (50, 1000)] {
            for &beta in &[0.5, 1.0, 2.0, 4.0] {
                let lhs = log_a(n, p, beta).unwrap();
                let rhs = log_c(n, p, beta).unwrap() - log_c(n - 1, p - 1, beta).unwrap();
                assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "n={n} p={p} beta={beta}: {lhs} vs {rhs}");
            }
        }
        // base case: c_{0,.,.} is an empty product
        assert_relative_eq!(log_a(1, 200, 1.0).unwrap(), log_c(1, 200, 1.0).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn sharp_tail_spot_values() {
        // spot checks against the printed approximation column; the full set
        // lives in the acceptance suite
        let v = sharp_log_tail_max(&params(10, 100, 1.0), 2.5).unwrap().exp();
        assert!((v - 1.29e-8).abs() / 1.29e-8 < 0.005, "{v}");
        let v = sharp_log_tail_max(&params(10, 1000, 1.0), 2.0).unwrap().exp();
        assert!((v - 1.81e-59).abs() / 1.81e-59 < 0.005, "{v}");
        let v = sharp_log_tail_max(&params(50, 1000, 1.0), 2.0).unwrap().exp();
        assert!((v - 1.91e-34).abs() / 1.91e-34 < 0.005, "{v}");
        assert!(sharp_log_tail_max(&params(10, 100, 1.0), 1.0).is_err());
    }

    #[test]
    fn b_rate_leading_term_vanishes_at_beta() {
        // p(b/2 - b/2 ln b - x/2 + b/2 ln x) at x = b is identically 0
        for &b in &[0.5f64, 1.0, 3.0] {
            let lead = b / 2.0 - b / 2.0 * b.ln() - b / 2.0 + b / 2.0 * b.ln();
            assert!(lead.abs() < 1e-15, "{lead}");
        }
    }

    #[test]
    fn b_rate_close_to_sharp_tail() {
        // asymptotic equality: relative gap of the exponentials < 2%
        let pr = params(10, 10000, 1.0);
        let gap = (b_rate(&pr, 1.2).unwrap() - sharp_log_tail_max(&pr, 1.2).unwrap()).exp() - 1.0;
        assert!(gap.abs() < 0.02, "gap {gap}");
    }

    #[test]
    fn b_rate_strictly_decreasing_in_x() {
        let pr = params(10, 10000, 1.0);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let x = 1.1 + 3.9 * i as f64 / 99.0;
            let v = b_rate(&pr, x).unwrap();
            assert!(v < prev, "not decreasing at x={x}");
            prev = v;
        }
    }

    #[test]
    fn b_vs_sharp_gap_decreases_with_p() {
        // the gap decreases monotonically in p at fixed n; its limit is the
        // fixed-n Stirling remainder (~0.0166 at n=10), not zero
        let mut prev = f64::INFINITY;
        for &p in &[1000u32, 10_000, 100_000, 1_000_000] {
            let pr = params(10, p, 1.0);
            let gap = (b_rate(&pr, 2.0).unwrap() - sharp_log_tail_max(&pr, 2.0).unwrap()).abs();
            assert!(gap < prev, "gap not decreasing at p={p}: {gap} vs {prev}");
            prev = gap;
        }
        assert!(prev < 0.017, "limit gap {prev}");
    }

    #[test]
    fn min_tail_basics() {
        let pr = params(10, 100, 1.0);
        assert!(log_tail_min(&pr, 1.0).is_err());
        assert!(log_tail_min(&pr, 0.0).is_err());
        // leading term negative on (0, beta)
        for i in 1..50 {
            let y = i as f64 / 50.0;
            let lead = 0.5 - y / 2.0 + 0.5 * y.ln();
            assert!(lead < 0.0, "leading term sign at y={y}");
        }
    }

    #[test]
    fn min_tail_n1_against_frozen_gamma_oracle() {
        // exp(B(y)) / P(beta p/2, p y/2) at n=1, p=1e5, y=0.5: the 40-digit
        // oracle gives ln P = -9662.994750153183 and ratio 1.1658472440216
        // (the fixed-n Stirling offset; it does not shrink to 1 at n=1)
        let b = log_tail_min(&params(1, 100_000, 1.0), 0.5).unwrap();
        let ln_p_oracle = -9662.994750153183;
        let ratio = (b - ln_p_oracle).exp();
        assert_relative_eq!(ratio, 1.1658472440216, max_relative = 1e-10);
    }

    #[test]
    fn mp_density_support_and_mass() {
        let law = MPLaw::new(1.0, 1.0).unwrap();
        assert_eq!(law.x_star(), 0.0);
        assert_eq!(law.x_star_upper(), 4.0);
        assert_eq!(mp_density(&law, -0.5), 0.0);
        assert_eq!(mp_density(&law, 4.5), 0.0);
        assert_eq!(mp_density(&law, 0.0), 0.0);
        assert!(mp_density(&law, 1.0) > 0.0);
        for &beta in &[0.5, 1.0, 2.0, 4.0] {
            for &gamma in &[1.0, 2.0, 10.0] {
                let law = MPLaw::new(beta, gamma).unwrap();
                let mass = quad_sqrt_edge(
                    |y| law.density_prefactor(y),
                    law.x_star(),
                    law.x_star_upper(),
                    512,
                )
                .unwrap();
                assert!((mass - 1.0).abs() < 1e-10, "mass {mass} at beta={beta} gamma={gamma}");
            }
        }
    }

    #[test]
    fn mp_law_rejects_bad_args() {
        assert!(MPLaw::new(0.0, 1.0).is_err());
        assert!(MPLaw::new(1.0, 0.5).is_err());
    }

    #[test]
    fn ldp_rate_zero_at_edge_and_infinite_below() {
        let law = MPLaw::new(1.0, 1.0).unwrap();
        let at_edge = ldp_rate(&law, law.x_star_upper()).unwrap();
        assert!(at_edge.abs() < 1e-6, "I(x^*) = {at_edge}");
        assert!(ldp_rate(&law, 3.9).unwrap().is_infinite());
        // beta=2 scales the same way
        let law2 = MPLaw::new(2.0, 1.0).unwrap();
        assert!(ldp_rate(&law2, law2.x_star_upper()).unwrap().abs() < 1e-6);
    }

    #[test]
    fn ldp_rate_against_brute_oracle() {
        // brute-force oracle: t = sqrt(y) substitution + midpoint rule, fully
        // independent of the cosine rule (a uniform rule in y cannot reach
        // the target accuracy at gamma = 1 because of the y^{-1/2} edge)
        let law = MPLaw::new(1.0, 1.0).unwrap();
        let nodes = 1_000_000;
        let tmax = 2.0f64;
        let h = tmax / nodes as f64;
        let mut integral = 0.0;
        for i in 0..nodes {
            let t = (i as f64 + 0.5) * h;
            let y = t * t;
            integral += (8.0 - y).ln() / (2.0 * PI * y) * 2.0 * t * t * (4.0 - y).sqrt() * h;
        }
        let oracle = -integral + 4.0 - 1.0; // alpha_beta(1,1) = -1
        let ours = ldp_rate(&law, 8.0).unwrap();
        assert!((ours - oracle).abs() < 1e-6, "ours {ours} oracle {oracle}");
    }

    #[test]
    fn ldp_rate_convex_nonnegative_on_grid() {
        let law = MPLaw::new(1.0, 1.0).unwrap();
        let edge = law.x_star_upper();
        let vals: Vec<f64> = (0..50)
            .map(|i| ldp_rate(&law, edge + (4.0 * edge - edge) * i as f64 / 49.0).unwrap())
            .collect();
        for (i, v) in vals.iter().enumerate() {
            assert!(*v >= -1e-9, "negative rate at grid {i}: {v}");
        }
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-6, "second difference negative");
        }
    }

    #[test]
    fn j_rate_bound_derivative_and_limit() {
        let law = MPLaw::new(1.0, 1.0).unwrap();
        // matches the finite-difference derivative of 2 I at gamma = 1
        for i in 0..5 {
            let x = 4.2 + i as f64;
            let h = 1e-4 * x;
            let fd = (2.0 * ldp_rate(&law, x + h).unwrap() - 2.0 * ldp_rate(&law, x - h).unwrap()) / (2.0 * h);
            let bound = j_rate_bound(&law, x).unwrap();
            assert!((bound - fd).abs() / fd.abs() < 1e-4, "x={x}: bound {bound} fd {fd}");
        }
        // bound -> 1 as x -> infinity
        let far = j_rate_bound(&law, 1e6).unwrap();
        assert!((far - 1.0).abs() < 1e-5, "far bound {far}");
        // Stieltjes spot value at z = 2 x^*: closed form (2 - sqrt(2))/4
        let x = 8.0;
        let bound = j_rate_bound(&law, x).unwrap();
        let closed = 1.0 - 2.0 * (2.0 - 2f64.sqrt()) / 4.0;
        assert_relative_eq!(bound, closed, max_relative = 1e-10);
        // below the edge: domain error
        assert!(j_rate_bound(&law, 3.0).is_err());
    }

    #[test]
    fn tw_table_embedded_is_valid() {
        let t = TwTable::embedded();
        assert!(t.cdf_table(1.0).is_ok());
        assert!(t.cdf_table(2.0).is_ok());
        assert!(t.cdf_table(4.0).is_ok());
        assert!(t.cdf_table(3.0).is_err());
        assert_eq!(TwTable::embedded_checksum().len(), 64);
    }

    #[test]
    fn tw_table_parse_rejects_malformed() {
        assert!(TwTable::parse("# header only\n").is_err());
        assert!(TwTable::parse("0.0, 0.1, 0.1\n1.0, 0.2, 0.2\n").is_err());
        // non-monotone CDF column
        assert!(TwTable::parse("-10, 0.5, 0.1, 0.1\n6, 0.4, 0.2, 0.2\n").is_err());
    }

    #[test]
    fn tw_tail_spot_values() {
        // Table checks at 5%: (n=10, p=100, x=1.9) classic 1.34e-2,
        // refined 1.06e-2; (n=50, p=1000, x=1.57) classic 7.20e-4
        let t = TwTable::embedded();
        let v = tw_log_tail(&params(10, 100, 1.0), 1.9, TwCentering::Classic, t).unwrap().exp();
        assert!((v - 1.34e-2).abs() / 1.34e-2 < 0.05, "{v}");
        let v = tw_log_tail(&params(10, 100, 1.0), 1.9, TwCentering::Refined, t).unwrap().exp();
        assert!((v - 1.06e-2).abs() / 1.06e-2 < 0.05, "{v}");
        let v = tw_log_tail(&params(50, 1000, 1.0), 1.57, TwCentering::Classic, t).unwrap().exp();
        assert!((v - 7.20e-4).abs() / 7.20e-4 < 0.05, "{v}");
        // unsupported beta errors out
        assert!(tw_log_tail(&params(10, 100, 3.0), 1.9, TwCentering::Classic, t).is_err());
    }
}
