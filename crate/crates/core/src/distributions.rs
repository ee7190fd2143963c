//! Probability kernels: binomial, Fisher's noncentral hypergeometric and beta.
//!
//! Everything is evaluated through log-gamma. The noncentral hypergeometric
//! distribution is normalized by scaling its log-weights against the largest
//! term, which keeps `psi` values far from one finite.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::factorial::ln_factorial;

use crate::error::{domain, Result};

/// `ln C(n, k)`.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialParams {
    pub n: u32,
    pub theta: f64,
}

impl BinomialParams {
    pub fn new(n: u32, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return domain(format!("binomial probability {theta} outside [0, 1]"));
        }
        Ok(Self { n, theta })
    }
}

/// Binomial probability mass `C(n,k) theta^k (1-theta)^(n-k)`.
pub fn binom_pmf(k: u32, params: BinomialParams) -> Result<f64> {
    let BinomialParams { n, theta } = params;
    if k > n {
        return domain(format!("binomial outcome {k} outside 0..={n}"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return domain(format!("binomial probability {theta} outside [0, 1]"));
    }
    Ok(binom_pmf_unchecked(k, n, theta, ln_choose(n, k)))
}

#[inline]
fn binom_pmf_unchecked(k: u32, n: u32, theta: f64, ln_c: f64) -> f64 {
    if theta == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if theta == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_c + k as f64 * theta.ln() + (n - k) as f64 * (-theta).ln_1p()).exp()
}

/// Cached log binomial coefficients for repeated evaluation of a whole
/// binomial pmf vector at many `theta`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    n: u32,
    ln_choose: Vec<f64>,
}

impl BinomialTable {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            ln_choose: (0..=n).map(|k| ln_choose(n, k)).collect(),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Writes `P[X = k]` for `k = 0..=n` into `out`.
    pub fn pmf_into(&self, theta: f64, out: &mut Vec<f64>) {
        out.clear();
        let n = self.n;
        if theta <= 0.0 {
            out.resize(n as usize + 1, 0.0);
            out[0] = 1.0;
            return;
        }
        if theta >= 1.0 {
            out.resize(n as usize + 1, 0.0);
            out[n as usize] = 1.0;
            return;
        }
        let lt = theta.ln();
        let lq = (-theta).ln_1p();
        out.extend(
            self.ln_choose
                .iter()
                .enumerate()
                .map(|(k, c)| (c + k as f64 * lt + (n as usize - k) as f64 * lq).exp()),
        );
    }

    pub fn pmf(&self, theta: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n as usize + 1);
        self.pmf_into(theta, &mut v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncentralHypergeomParams {
    /// Total successes `x1 + x2`.
    pub s: u32,
    pub n1: u32,
    pub n2: u32,
    /// Odds ratio.
    pub psi: f64,
}

impl NoncentralHypergeomParams {
    pub fn new(s: u32, n1: u32, n2: u32, psi: f64) -> Result<Self> {
        if s > n1 + n2 {
            return domain(format!("total {s} exceeds n1 + n2 = {}", n1 + n2));
        }
        if !(psi >= 0.0) {
            return domain(format!("odds ratio {psi} must be nonnegative"));
        }
        Ok(Self { s, n1, n2, psi })
    }

    /// Support of `X2` given `S = s`, as an inclusive range.
    pub fn support(&self) -> (u32, u32) {
        (self.s.saturating_sub(self.n1), self.s.min(self.n2))
    }
}

/// Which tail of a discrete distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

/// Full-probability or mid-p tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    #[default]
    Full,
    Mid,
}

/// Conditional distribution of `X2` given `S = s` (Fisher's noncentral
/// hypergeometric), tabulated over its support.
#[derive(Debug, Clone)]
pub struct NoncentralHypergeom {
    lo: u32,
    probs: Vec<f64>,
}

impl NoncentralHypergeom {
    pub fn new(params: NoncentralHypergeomParams) -> Result<Self> {
        let p = NoncentralHypergeomParams::new(params.s, params.n1, params.n2, params.psi)?;
        Ok(Self::build(&p))
    }

    /// Builds from validated parameters, reusing precomputed log weights of the
    /// central distribution.
    fn build(p: &NoncentralHypergeomParams) -> Self {
        let (lo, hi) = p.support();
        let central: Vec<f64> = (lo..=hi)
            .map(|k| ln_choose(p.n1, p.s - k) + ln_choose(p.n2, k))
            .collect();
        Self::from_log_weights(lo, &central, p.psi)
    }

    fn from_log_weights(lo: u32, central: &[f64], psi: f64) -> Self {
        let m = central.len();
        let mut probs = vec![0.0; m];
        if psi == 0.0 {
            probs[0] = 1.0;
        } else if psi.is_infinite() {
            probs[m - 1] = 1.0;
        } else {
            let lpsi = psi.ln();
            let logw: Vec<f64> = central
                .iter()
                .enumerate()
                .map(|(i, c)| c + (lo as usize + i) as f64 * lpsi)
                .collect();
            let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (p, w) in probs.iter_mut().zip(&logw) {
                *p = (w - mx).exp();
                total += *p;
            }
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        Self { lo, probs }
    }

    pub fn support(&self) -> (u32, u32) {
        (self.lo, self.lo + self.probs.len() as u32 - 1)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pmf(&self, x2: u32) -> f64 {
        match x2.checked_sub(self.lo) {
            Some(i) if (i as usize) < self.probs.len() => self.probs[i as usize],
            _ => 0.0,
        }
    }

    /// `P[X2 >= x2]` / `P[X2 <= x2]`, or their mid-p versions.
    pub fn tail(&self, x2: u32, tail: Tail, mode: TailMode) -> f64 {
        let (lo, hi) = self.support();
        let x2 = x2.clamp(lo, hi);
        let i = (x2 - lo) as usize;
        let strict: f64 = match tail {
            Tail::Upper => self.probs[i + 1..].iter().sum(),
            Tail::Lower => self.probs[..i].iter().sum(),
        };
        let eq = self.probs[i];
        let t = match mode {
            TailMode::Full => strict + eq,
            TailMode::Mid => strict + 0.5 * eq,
        };
        t.min(1.0)
    }
}

/// Reusable log weights of the central hypergeometric for a fixed margin, so
/// that root finding in `psi` does not recompute factorials.
#[derive(Debug, Clone)]
pub struct ConditionalKernel {
    lo: u32,
    central: Vec<f64>,
}

impl ConditionalKernel {
    pub fn new(s: u32, n1: u32, n2: u32) -> Result<Self> {
        let p = NoncentralHypergeomParams::new(s, n1, n2, 1.0)?;
        let (lo, hi) = p.support();
        Ok(Self {
            lo,
            central: (lo..=hi)
                .map(|k| ln_choose(n1, s - k) + ln_choose(n2, k))
                .collect(),
        })
    }

    pub fn support(&self) -> (u32, u32) {
        (self.lo, self.lo + self.central.len() as u32 - 1)
    }

    pub fn at(&self, psi: f64) -> NoncentralHypergeom {
        NoncentralHypergeom::from_log_weights(self.lo, &self.central, psi)
    }
}

/// Probability mass of `X2` given `S` under odds ratio `psi`.
pub fn nchg_pmf(x2: u32, params: NoncentralHypergeomParams) -> Result<f64> {
    let d = NoncentralHypergeom::new(params)?;
    let (lo, hi) = d.support();
    if x2 < lo || x2 > hi {
        return domain(format!("x2 = {x2} outside the support {lo}..={hi}"));
    }
    Ok(d.pmf(x2))
}

/// Tail probability of `X2` given `S`; see [`NoncentralHypergeom::tail`].
pub fn nchg_tail(
    x2: u32,
    params: NoncentralHypergeomParams,
    tail: Tail,
    mode: TailMode,
) -> Result<f64> {
    let d = NoncentralHypergeom::new(params)?;
    let (lo, hi) = d.support();
    if x2 < lo || x2 > hi {
        return domain(format!("x2 = {x2} outside the support {lo}..={hi}"));
    }
    Ok(d.tail(x2, tail, mode))
}

/// Beta distribution with the limit conventions `Beta(0, b)` = point mass at 0
/// and `Beta(a, 0)` = point mass at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0) || (a == 0.0 && b == 0.0) {
            return domain(format!("invalid beta shapes ({a}, {b})"));
        }
        Ok(Self { a, b })
    }

    /// `Some(c)` when the distribution is a point mass at `c`.
    pub fn point_mass(&self) -> Option<f64> {
        if self.a == 0.0 {
            Some(0.0)
        } else if self.b == 0.0 {
            Some(1.0)
        } else {
            None
        }
    }

    /// Density; zero for point masses.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.point_mass().is_some() || !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        if x == 0.0 || x == 1.0 {
            let e = if x == 0.0 { self.a } else { self.b };
            return if e > 1.0 {
                0.0
            } else if e == 1.0 {
                (-ln_beta(self.a, self.b)).exp()
            } else {
                f64::INFINITY
            };
        }
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - ln_beta(self.a, self.b)).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if let Some(c) = self.point_mass() {
            return if x >= c { 1.0 } else { 0.0 };
        }
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    /// Lower quantile `inf { x : cdf(x) >= p }`.
    pub fn quantile(&self, p: f64) -> f64 {
        if let Some(c) = self.point_mass() {
            return c;
        }
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = self.a / (self.a + self.b);
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f.abs() <= 1e-14 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 1e-16 * hi.max(1e-300) {
                break;
            }
            let d = self.pdf(x);
            let newton = if d.is_finite() && d > 0.0 {
                x - f / d
            } else {
                f64::NAN
            };
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

pub fn beta_cdf(x: f64, params: BetaParams) -> Result<f64> {
    let p = BetaParams::new(params.a, params.b)?;
    Ok(p.cdf(x))
}

pub fn beta_quantile(p: f64, params: BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} outside [0, 1]"));
    }
    let b = BetaParams::new(params.a, params.b)?;
    Ok(b.quantile(p))
}

/// Exact two-sided Clopper-Pearson interval for a binomial proportion at
/// confidence `level`, with the conventions `L = 0` at `x = 0` and `U = 1` at
/// `x = n`.
pub fn clopper_pearson(x: u32, n: u32, level: f64) -> Result<(f64, f64)> {
    if x > n {
        return domain(format!("x = {x} exceeds n = {n}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("confidence level {level} not in (0, 1)"));
    }
    let half = (1.0 - level) / 2.0;
    let (x, n) = (x as f64, n as f64);
    let lo = BetaParams {
        a: x,
        b: n - x + 1.0,
    }
    .quantile(half);
    let hi = BetaParams {
        a: x + 1.0,
        b: n - x,
    }
    .quantile(1.0 - half);
    Ok((lo, hi))
}
