//! Evaluation of zeta(s), its truncated Euler product zeta(s; y), and the
//! reference constants used by the measurement pipelines.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZrlError};
use crate::primes::PrimeTable;
use crate::quad::{integrate, QuadratureConfig};
use crate::util::{CompensatedSum, ComplexSum, EULER_GAMMA, EXP_GAMMA};

/// Point s = sigma + it restricted to the box this laboratory works in.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub sigma: f64,
    pub t: f64,
}

impl ComplexPoint {
    pub fn new(sigma: f64, t: f64) -> ComplexPoint {
        ComplexPoint { sigma, t }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.t.is_finite()) {
            return Err(ZrlError::Domain("s must be finite".into()));
        }
        if !(0.4..=3.0).contains(&self.sigma) || self.t.abs() > 1e8 {
            return Err(ZrlError::Domain(format!(
                "s = {} + {}i outside the supported box (0.4 <= sigma <= 3, |t| <= 1e8)",
                self.sigma, self.t
            )));
        }
        Ok(())
    }
}

/// Accuracy knobs for the Euler–Maclaurin evaluator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub target_rel_error: f64,
    pub max_terms: usize,
    /// Highest Bernoulli number order 2k used for tail corrections (even, <= 30).
    pub bernoulli_order: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            target_rel_error: 1e-12,
            max_terms: 20_000_000,
            bernoulli_order: 20,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-14..=1e-6).contains(&self.target_rel_error) {
            return Err(ZrlError::Config(format!(
                "target_rel_error {} outside [1e-14, 1e-6]",
                self.target_rel_error
            )));
        }
        if self.bernoulli_order < 2 || self.bernoulli_order > 30 || self.bernoulli_order % 2 != 0 {
            return Err(ZrlError::Config(format!(
                "bernoulli_order {} must be even and in [2, 30]",
                self.bernoulli_order
            )));
        }
        if self.max_terms < 100 {
            return Err(ZrlError::Config("max_terms must be at least 100".into()));
        }
        Ok(())
    }
}

// B_2, B_4, ..., B_30.
const BERNOULLI_2K: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

fn m_cutoff(t: f64) -> usize {
    (1.3 * t.abs().max(10.0)).ceil() as usize
}

/// Fixed-sigma evaluator with precomputed log and power tables, sized for a
/// maximum ordinate. The integral pipelines call `eval` millions of times;
/// the tables keep the per-term cost down to one sincos.
pub struct ZetaEvaluator {
    sigma: f64,
    cfg: EvalConfig,
    lnn: Vec<f64>,
    coeff: Vec<f64>,
    bfrac: Vec<f64>,
}

impl ZetaEvaluator {
    pub fn new(sigma: f64, t_max: f64, cfg: &EvalConfig) -> Result<ZetaEvaluator> {
        cfg.validate()?;
        ComplexPoint::new(sigma, t_max).validate()?;
        let m_max = m_cutoff(t_max).min(cfg.max_terms);
        let mut lnn = Vec::with_capacity(m_max + 1);
        let mut coeff = Vec::with_capacity(m_max + 1);
        lnn.push(0.0);
        coeff.push(0.0);
        for n in 1..=m_max {
            let ln = (n as f64).ln();
            lnn.push(ln);
            coeff.push(if sigma == 1.0 {
                1.0 / n as f64
            } else {
                (-sigma * ln).exp()
            });
        }
        let mut bfrac = Vec::with_capacity(16);
        bfrac.push(0.0);
        let mut fact = 1.0f64; // (2k)!
        for (k, b) in BERNOULLI_2K.iter().enumerate() {
            let two_k = 2 * (k + 1);
            fact *= (two_k - 1) as f64 * two_k as f64;
            bfrac.push(b / fact);
        }
        Ok(ZetaEvaluator {
            sigma,
            cfg: *cfg,
            lnn,
            coeff,
            bfrac,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// zeta(sigma + it) by Euler–Maclaurin with cutoff M ~ 1.3 max(10, |t|)
    /// and Bernoulli tail corrections. Deterministic for a fixed config.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        let s = Complex64::new(self.sigma, t);
        if (s - 1.0).norm() < 1e-8 {
            return Err(ZrlError::ZetaPole);
        }
        let m = m_cutoff(t).min(self.cfg.max_terms);
        if m + 1 > self.lnn.len() {
            return Err(ZrlError::Config(format!(
                "evaluator sized for |t| <= {:.3e}, asked for {:.3e}",
                (self.lnn.len() as f64 - 1.0) / 1.3,
                t.abs()
            )));
        }

        let mut acc = ComplexSum::new();
        let mut resabs = CompensatedSum::new();
        for n in 1..m {
            let (sin, cos) = (t * self.lnn[n]).sin_cos();
            let c = self.coeff[n];
            acc.add(Complex64::new(c * cos, -c * sin));
            resabs.add(c);
        }
        let mut val = acc.total();

        let m_f = m as f64;
        let lnm = self.lnn[m];
        // M^{1-s}/(s-1) + M^{-s}/2
        let m_pow_ms = ((-s) * lnm).exp();
        val += m_pow_ms * m_f / (s - 1.0);
        val += m_pow_ms * 0.5;

        // Bernoulli corrections: B_{2k}/(2k)! (s)_{2k-1} M^{-s-2k+1}.
        let k_max = (self.cfg.bernoulli_order / 2) as usize;
        let mut poch = s;
        let mut mpow = m_pow_ms / m_f;
        let inv_m2 = 1.0 / (m_f * m_f);
        let mut last = 0.0;
        for k in 1..=k_max {
            let term = poch * mpow * self.bfrac[k];
            val += term;
            last = term.norm();
            if k < k_max {
                let a = 2.0 * k as f64;
                poch *= (s + (a - 1.0)) * (s + a);
                mpow *= inv_m2;
            }
        }

        // Tail estimate: remaining terms shrink roughly by
        // |s + 2K|^2 / (2 pi M)^2 per order.
        let q = (s + 2.0 * k_max as f64).norm_sqr()
            / (2.0 * std::f64::consts::PI * m_f).powi(2);
        let tail = if q < 0.9 {
            last * q / (1.0 - q)
        } else {
            f64::INFINITY
        };
        let est = tail + 1e-15 * resabs.total();
        if est > self.cfg.target_rel_error * val.norm().max(1e-300) {
            return Err(ZrlError::Precision {
                wanted: self.cfg.target_rel_error,
                achieved: est / val.norm().max(1e-300),
            });
        }
        Ok(val)
    }
}

/// One-shot zeta(s) evaluation.
pub fn zeta(s: ComplexPoint, cfg: &EvalConfig) -> Result<Complex64> {
    s.validate()?;
    ZetaEvaluator::new(s.sigma, s.t.abs(), cfg)?.eval(s.t)
}

/// Dense samples of zeta(sigma + ix) on a uniform grid with local cubic
/// interpolation. The moment integrals revisit nearby ordinates millions of
/// times; sampling once and interpolating keeps them affordable. Negative x
/// is served by conjugate reflection.
pub struct ZetaLine {
    sigma: f64,
    x0: f64,
    h: f64,
    vals: Vec<Complex64>,
}

impl ZetaLine {
    /// Samples [x_min, x_max] (x_min >= 0) at step h chosen from the highest
    /// phase frequency log(1.3 x_max), with a two-point stencil margin.
    pub fn build(sigma: f64, x_min: f64, x_max: f64, cfg: &EvalConfig) -> Result<ZetaLine> {
        if !(0.0 <= x_min && x_min < x_max) {
            return Err(ZrlError::Config(format!(
                "bad zeta line range [{x_min}, {x_max}]"
            )));
        }
        let omega = (1.3 * x_max.max(10.0)).ln();
        let h = (0.15 / omega).min(0.02);
        let x0 = (x_min - 2.0 * h).max(if sigma == 1.0 { 1e-3 } else { 0.0 });
        let n = ((x_max + 2.0 * h - x0) / h).ceil() as usize + 2;
        let ev = ZetaEvaluator::new(sigma, x0 + (n as f64) * h, cfg)?;
        let vals: Result<Vec<Complex64>> = {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(|i| ev.eval(x0 + i as f64 * h))
                .collect()
        };
        Ok(ZetaLine {
            sigma,
            x0,
            h,
            vals: vals?,
        })
    }

    /// Grows the sampled band to cover x_max, reusing existing samples.
    pub fn extend(&mut self, x_max: f64, cfg: &EvalConfig) -> Result<()> {
        let needed = ((x_max + 2.0 * self.h - self.x0) / self.h).ceil() as usize + 2;
        if needed <= self.vals.len() {
            return Ok(());
        }
        let ev = ZetaEvaluator::new(self.sigma, self.x0 + needed as f64 * self.h, cfg)?;
        let start = self.vals.len();
        let more: Result<Vec<Complex64>> = {
            use rayon::prelude::*;
            (start..needed)
                .into_par_iter()
                .map(|i| ev.eval(self.x0 + i as f64 * self.h))
                .collect()
        };
        self.vals.extend(more?);
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Upper end of the safely interpolable band.
    pub fn x_max(&self) -> f64 {
        self.x0 + (self.vals.len() as f64 - 3.0) * self.h
    }

    /// Catmull-Rom interpolation; O(h^4) on the sampled band.
    pub fn eval(&self, x: f64) -> Complex64 {
        if x < 0.0 {
            // conjugate reflection through the real axis
            return self.eval(-x).conj();
        }
        let u = (x - self.x0) / self.h;
        let i = (u.floor().max(0.0) as usize).clamp(1, self.vals.len() - 3);
        let tau = u - i as f64;
        let (f0, f1, f2, f3) = (
            self.vals[i - 1],
            self.vals[i],
            self.vals[i + 1],
            self.vals[i + 2],
        );
        0.5 * (2.0 * f1
            + (f2 - f0) * tau
            + (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) * tau * tau
            + (3.0 * f1 - f0 - 3.0 * f2 + f3) * tau * tau * tau)
    }

    /// Largest absolute interpolation error over a deterministic sample,
    /// measured against direct evaluation, together with the largest sampled
    /// magnitude. Both feed the pipelines' quadrature error budgets.
    pub fn sampled_error(&self, cfg: &EvalConfig, samples: usize) -> Result<(f64, f64)> {
        let lo = self.x0 + 2.0 * self.h;
        let hi = self.x_max();
        let ev = ZetaEvaluator::new(self.sigma, hi, cfg)?;
        let mut worst = 0.0f64;
        let mut largest = 0.0f64;
        let golden = 0.618_033_988_749_894_9f64;
        let mut frac = 0.5f64;
        for _ in 0..samples {
            frac = (frac + golden).fract();
            let x = lo + frac * (hi - lo);
            let direct = ev.eval(x)?;
            let err = (self.eval(x) - direct).norm();
            if err > worst {
                worst = err;
            }
            if direct.norm() > largest {
                largest = direct.norm();
            }
        }
        Ok((worst, largest))
    }
}

/// Truncated Euler product zeta(s; y) = prod_{p <= y} (1 - p^{-s})^{-1},
/// accumulated as a compensated sum of principal logs in ascending prime
/// order.
pub fn zeta_truncated(s: ComplexPoint, y: f64, table: &PrimeTable) -> Result<Complex64> {
    if s.sigma <= 0.0 {
        return Err(ZrlError::Domain(
            "truncated Euler product needs sigma > 0".into(),
        ));
    }
    if y < 2.0 {
        return Err(ZrlError::Domain(format!(
            "truncation height y = {y} below the smallest prime"
        )));
    }
    if y > table.limit() as f64 {
        return Err(ZrlError::TableTooSmall {
            needed: y,
            limit: table.limit(),
        });
    }
    let mut log_sum = ComplexSum::new();
    for &p in table.primes_in(0.0, y) {
        let lnp = (p as f64).ln();
        let mag = (-s.sigma * lnp).exp();
        let (sin, cos) = (s.t * lnp).sin_cos();
        let w = Complex64::new(1.0 - mag * cos, mag * sin);
        log_sum.add(Complex64::new(0.5 * w.norm_sqr().ln(), w.im.atan2(w.re)));
    }
    let total = log_sum.total();
    Ok(Complex64::from_polar((-total.re).exp(), -total.im))
}

/// Per-sample gap |zeta(1+it)/zeta(1+it; Y) - 1| for the truncation height
/// Y = exp((log T)^(1/beta)).
#[derive(Clone, Debug, Serialize)]
pub struct TruncationGapReport {
    pub y: f64,
    pub comparator: f64,
    pub flag_factor: f64,
    pub samples: Vec<GapSample>,
    pub flagged: usize,
    pub median_gap: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapSample {
    pub t: f64,
    pub gap: f64,
    pub ratio_to_comparator: f64,
    pub flagged: bool,
}

/// Measures how well the truncated Euler product tracks zeta on the 1-line
/// for samples in [T^beta, T]. The implied constant in the underlying
/// approximation is unquantified, so gaps are *flagged* against 100x the
/// comparator rather than asserted.
pub fn truncation_gap(
    t_big: f64,
    beta: f64,
    t_samples: &[f64],
    table: &PrimeTable,
    cfg: &EvalConfig,
) -> Result<TruncationGapReport> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ZrlError::Domain(format!("beta = {beta} outside (0, 1)")));
    }
    if t_big < 3.0 {
        return Err(ZrlError::Domain("need T >= 3".into()));
    }
    let log_t = t_big.ln();
    let y = (log_t.powf(1.0 / beta)).exp();
    if y > table.limit() as f64 {
        return Err(ZrlError::TableTooSmall {
            needed: y,
            limit: table.limit(),
        });
    }
    let lo = t_big.powf(beta);
    for &t in t_samples {
        if !(lo..=t_big).contains(&t.abs()) {
            return Err(ZrlError::Domain(format!(
                "sample t = {t} outside [T^beta, T] = [{lo}, {t_big}]"
            )));
        }
    }
    let comparator = log_t.powf(-1.0 / beta);
    let flag_factor = 100.0;
    let mut samples = Vec::with_capacity(t_samples.len());
    let mut gaps = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let full = zeta(ComplexPoint::new(1.0, t), cfg)?;
        let trunc = zeta_truncated(ComplexPoint::new(1.0, t), y, table)?;
        let gap = (full / trunc - 1.0).norm();
        gaps.push(gap);
        samples.push(GapSample {
            t,
            gap,
            ratio_to_comparator: gap / comparator,
            flagged: gap > flag_factor * comparator,
        });
    }
    gaps.sort_by(f64::total_cmp);
    let median_gap = if gaps.is_empty() {
        0.0
    } else {
        gaps[gaps.len() / 2]
    };
    Ok(TruncationGapReport {
        y,
        comparator,
        flag_factor,
        flagged: samples.iter().filter(|s| s.flagged).count(),
        samples,
        median_gap,
    })
}

/// Modified Bessel function I0: power series for t <= 20, asymptotic
/// expansion beyond (where the plain value may overflow; prefer
/// [`log_bessel_i0`] there).
pub fn bessel_i0(t: f64) -> f64 {
    let t = t.abs();
    if t <= 20.0 {
        let q = 0.25 * t * t;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=40u32 {
            term *= q / ((k * k) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        log_bessel_i0(t).exp()
    }
}

/// log I0(t), stable for all t >= 0.
pub fn log_bessel_i0(t: f64) -> f64 {
    let t = t.abs();
    if t <= 20.0 {
        bessel_i0(t).ln()
    } else {
        // I0(t) ~ e^t / sqrt(2 pi t) * sum a_k / t^k, a_k = prod (2j-1)^2 / (8^k k!)
        let mut a = 1.0;
        let mut sum = 1.0;
        for k in 1..=8u32 {
            let j = 2.0 * k as f64 - 1.0;
            a *= j * j / (8.0 * k as f64);
            sum += a / t.powi(k as i32);
        }
        t - 0.5 * (2.0 * std::f64::consts::PI * t).ln() + sum.ln()
    }
}

/// The probabilistic-model constant
/// c(sigma) = sigma^(-2 sigma) (1-sigma)^(-(1-sigma)) *
///            \int_0^inf log I0(t) / t^(1/sigma + 1) dt
/// for 1/2 < sigma < 1.
///
/// The integral splits three ways: a term-by-term series integral on
/// (0, 1/2] (the integrand blows up like t^(1 - 1/sigma) there), adaptive
/// quadrature on [1/2, 40], and closed forms on (40, inf) from
/// log I0(t) = t - log(2 pi t)/2 + 1/(8t) + 1/(16 t^2) + 25/(384 t^3) + ...
/// The neglected tail is below 1e-9 over the whole sigma range.
pub fn lamzouri_constant(sigma: f64) -> Result<f64> {
    if !(sigma > 0.5 && sigma < 1.0) {
        return Err(ZrlError::Domain(format!(
            "constant defined for 1/2 < sigma < 1, got {sigma}"
        )));
    }
    let a = 1.0 / sigma;
    let delta = 0.5f64;
    let t1 = 40.0f64;

    // log I0(t) = sum c_k t^{2k}; c from the series of I0 composed with log.
    const KMAX: usize = 14;
    let mut b = [0.0f64; KMAX + 1];
    b[0] = 1.0;
    for k in 1..=KMAX {
        b[k] = b[k - 1] / (4.0 * (k * k) as f64);
    }
    let mut c = [0.0f64; KMAX + 1];
    for k in 1..=KMAX {
        let mut s = b[k];
        for j in 1..k {
            s -= (j as f64 / k as f64) * c[j] * b[k - j];
        }
        c[k] = s;
    }
    let mut head = CompensatedSum::new();
    for (k, ck) in c.iter().enumerate().skip(1) {
        let e = 2.0 * k as f64 - a;
        head.add(ck * delta.powf(e) / e);
    }

    let quad_cfg = QuadratureConfig::with_tols(1e-11, 1e-11).with_hint(1.0);
    let mid = integrate(
        &|t: f64| log_bessel_i0(t) * (-(a + 1.0) * t.ln()).exp(),
        delta,
        t1,
        &quad_cfg,
    )?;

    // Closed-form tail pieces.
    let t1_ma = t1.powf(-a);
    let tail_linear = t1.powf(1.0 - a) / (a - 1.0);
    let tail_log = -0.5
        * ((2.0 * std::f64::consts::PI).ln() * t1_ma / a
            + t1_ma * (a * t1.ln() + 1.0) / (a * a));
    let r = [1.0 / 8.0, 1.0 / 16.0, 25.0 / 384.0];
    let mut tail_r = 0.0;
    for (k, rk) in r.iter().enumerate() {
        let kk = (k + 1) as f64;
        tail_r += rk * t1.powf(-kk - a) / (kk + a);
    }

    let integral = head.total() + mid.value + tail_linear + tail_log + tail_r;
    let prefactor = sigma.powf(-2.0 * sigma) * (1.0 - sigma).powf(-(1.0 - sigma));
    Ok(prefactor * integral)
}

/// Supremum of admissible offsets for the 1-line lower bound:
/// log(1 - beta) - log log 4 - 1. Strictly decreasing in beta; beta = 0
/// returns the limiting value.
pub fn admissible_c(beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(ZrlError::Domain(format!(
            "admissible offset defined for 0 <= beta < 1, got {beta}"
        )));
    }
    Ok((-beta).ln_1p() - 4.0f64.ln().ln() - 1.0)
}

/// Named constants recorded for report overlays. Values are recorded, not
/// derived here.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReferenceConstants {
    /// Distribution-model constant for the conjectured 1-line maximum.
    pub c0: f64,
    /// c0 + 1 - log 2, the constant in the conjectured comparison.
    pub c0_plus_one_minus_log2: f64,
    pub euler_gamma: f64,
    pub exp_gamma: f64,
    /// Coefficient of the sqrt(|log(2 sigma - 1)|) strip asymptote.
    pub nu_half_coefficient: f64,
}

impl ReferenceConstants {
    /// Shape of the strip lower-bound coefficient as sigma drops to 1/2.
    pub fn nu_near_half(&self, sigma: f64) -> f64 {
        self.nu_half_coefficient * (2.0 * sigma - 1.0).abs().ln().abs().sqrt()
    }

    /// Shape of the strip lower-bound coefficient as sigma climbs to 1.
    pub fn nu_near_one(&self, sigma: f64) -> f64 {
        1.0 / (1.0 - sigma)
    }
}

pub fn reference_constants() -> ReferenceConstants {
    let c0 = -0.3953997;
    ReferenceConstants {
        c0,
        c0_plus_one_minus_log2: c0 + 1.0 - std::f64::consts::LN_2,
        euler_gamma: EULER_GAMMA,
        exp_gamma: EXP_GAMMA,
        nu_half_coefficient: std::f64::consts::FRAC_1_SQRT_2,
    }
}
