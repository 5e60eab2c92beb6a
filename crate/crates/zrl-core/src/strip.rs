//! The convolution method in the strip 1/2 < sigma < 1: a binned resonator
//! over an explicit integer set, the Fejér-type kernel whose transform is a
//! compactly supported triangle, the kernel convolution identity, and the
//! moment pipeline relating strip maxima of |zeta| to normalized GCD sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZrlError};
use crate::galsums::{
    build_construction, gal_sum, squarefree_divisors, ConstructionParams, SetElement,
};
use crate::primes::PrimeTable;
use crate::quad::{integrate, QuadratureConfig};
use crate::report::{CheckRecord, Relation, RunReport, Series};
use crate::resonator::{peak_search, GaussianWeight};
use crate::util::{CompensatedSum, ComplexSum};
use crate::zeta::{zeta, ComplexPoint, EvalConfig, ZetaEvaluator, ZetaLine};

/// One bin of the log-scaled partition: representative (the bin minimum),
/// multiplicity count, and weight sqrt(count).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bin {
    pub index: i64,
    pub log_rep: f64,
    pub count: u64,
    pub weight: f64,
}

/// Resonator R(t) = sum_j r_j m_j^{it} over bin representatives
/// m_j = min M_j with r_j = |M_j|^{1/2}.
#[derive(Clone, Debug)]
pub struct BinnedResonator {
    t_big: f64,
    kappa: f64,
    total: u64,
    bins: Vec<Bin>,
    source: Option<Vec<SetElement>>,
}

/// Partition a set of elements into bins [(1+log T/T)^j, (1+log T/T)^{j+1}).
/// Bin assignment compares compensated log values; a value within rounding
/// of a boundary lands deterministically in the lower bin via plain floor.
pub fn bin_set(elements: &[SetElement], t_big: f64) -> Result<BinnedResonator> {
    let logs: Vec<f64> = elements.iter().map(|e| e.log_value()).collect();
    let mut r = bin_log_values(&logs, t_big)?;
    r.source = Some(elements.to_vec());
    Ok(r)
}

/// Same partition from precomputed log values.
pub fn bin_log_values(logs: &[f64], t_big: f64) -> Result<BinnedResonator> {
    if !(t_big >= 100.0) {
        return Err(ZrlError::Domain(format!("need T >= 100, got {t_big}")));
    }
    if logs.is_empty() {
        return Err(ZrlError::Domain("empty set".into()));
    }
    let width = (t_big.ln() / t_big).ln_1p();
    let mut tagged: Vec<(i64, f64)> = Vec::with_capacity(logs.len());
    for &lv in logs {
        if !(lv >= 0.0) {
            return Err(ZrlError::Domain(format!(
                "element below 1 (log value {lv})"
            )));
        }
        tagged.push(((lv / width).floor() as i64, lv));
    }
    tagged.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut bins: Vec<Bin> = Vec::new();
    for (j, lv) in tagged {
        match bins.last_mut() {
            Some(b) if b.index == j => b.count += 1,
            _ => bins.push(Bin {
                index: j,
                log_rep: lv,
                count: 1,
                weight: 0.0,
            }),
        }
    }
    for b in &mut bins {
        b.weight = (b.count as f64).sqrt();
    }
    let total = logs.len() as u64;
    Ok(BinnedResonator {
        t_big,
        kappa: (total as f64).ln() / t_big.ln(),
        total,
        bins,
        source: None,
    })
}

impl BinnedResonator {
    pub fn t_big(&self) -> f64 {
        self.t_big
    }
    /// kappa with |M| = T^kappa.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }
    pub fn cardinality(&self) -> u64 {
        self.total
    }
    pub fn source(&self) -> Option<&[SetElement]> {
        self.source.as_deref()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in &self.bins {
            let (sin, cos) = (t * b.log_rep).sin_cos();
            acc += b.weight * Complex64::new(cos, sin);
        }
        acc
    }

    /// R(0) = sum of weights.
    pub fn peak(&self) -> f64 {
        self.bins.iter().map(|b| b.weight).sum()
    }

    pub fn weight(&self) -> GaussianWeight {
        GaussianWeight::new(self.t_big.ln() / self.t_big).expect("T >= 100")
    }
}

/// Fejér-type kernel K(u) = sin^2(eps u log T) / (pi u^2 eps log T); its
/// Fourier transform is the triangle supported on |xi| < 2 eps log T.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FejerKernel {
    pub epsilon: f64,
    pub t_big: f64,
}

impl FejerKernel {
    pub fn new(epsilon: f64, t_big: f64) -> Result<FejerKernel> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(ZrlError::Config(format!(
                "epsilon = {epsilon} outside (0, 1)"
            )));
        }
        if !(t_big > 1.0) {
            return Err(ZrlError::Config(format!("need T > 1, got {t_big}")));
        }
        Ok(FejerKernel { epsilon, t_big })
    }

    /// a = eps log T, the frequency scale.
    pub fn a(&self) -> f64 {
        self.epsilon * self.t_big.ln()
    }

    /// Support radius 2 eps log T of the transform.
    pub fn width(&self) -> f64 {
        2.0 * self.a()
    }
}

/// K at a complex argument (entire after the removable singularity at 0);
/// |w| < 1e-3 switches to the even power series of (sin w / w)^2.
pub fn kernel_k(z: Complex64, k: &FejerKernel) -> Complex64 {
    let a = k.a();
    let w = a * z;
    let sinc_sq = if w.norm() < 1e-3 {
        let w2 = w * w;
        Complex64::new(1.0, 0.0) - w2 / 3.0 + w2 * w2 * (2.0 / 45.0)
    } else {
        let s = w.sin() / w;
        s * s
    };
    sinc_sq * (a / std::f64::consts::PI)
}

/// The triangular transform max(1 - |xi| / (2 eps log T), 0).
pub fn kernel_k_hat(xi: f64, k: &FejerKernel) -> f64 {
    (1.0 - xi.abs() / k.width()).max(0.0)
}

/// zeta(sigma + it + iu) zeta(sigma - it + iu) K(u).
pub fn frak_z(sigma: f64, t: f64, u: f64, k: &FejerKernel, cfg: &EvalConfig) -> Result<Complex64> {
    let z1 = zeta(ComplexPoint::new(sigma, t + u), cfg)?;
    let z2 = zeta(ComplexPoint::new(sigma, u - t), cfg)?;
    Ok(z1 * z2 * kernel_k(Complex64::new(u, 0.0), k))
}

/// Reusable zeta samples for a fixed sigma, grown on demand.
pub struct ZetaCache {
    sigma: f64,
    line: Option<ZetaLine>,
}

impl ZetaCache {
    pub fn new(sigma: f64) -> ZetaCache {
        ZetaCache { sigma, line: None }
    }

    fn ensure(&mut self, x_max: f64, cfg: &EvalConfig) -> Result<&ZetaLine> {
        match &mut self.line {
            Some(line) => line.extend(x_max, cfg)?,
            None => self.line = Some(ZetaLine::build(self.sigma, 0.0, x_max, cfg)?),
        }
        Ok(self.line.as_ref().expect("just set"))
    }
}

/// Both sides of the kernel convolution identity at one (sigma, t) point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvolutionReport {
    pub sigma: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub dirichlet_sum: f64,
    pub corrections: f64,
    pub u_cut: f64,
    pub tail_estimate: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Verifies numerically that
///   int_R Z(t, u) du  =  sum_{kl < T^{2 eps}} K^(log kl) k^{-s-it} l^{-s+it}
///                       - 2 pi zeta(1-2it) K(i(s+it)-i)
///                       - 2 pi zeta(1+2it) K(i(s-it)-i)
/// with Z(t,u) = zeta(s+it+iu) zeta(s-it+iu) K(u). The left side is adaptive
/// quadrature with a staged cutoff and a reported O(1/U) tail bound; the
/// right side is the finite transform-supported Dirichlet double sum plus
/// the two residue corrections at complex kernel arguments.
pub fn convolution_identity_check(
    sigma: f64,
    t: f64,
    k: &FejerKernel,
    quad: &QuadratureConfig,
    eval: &EvalConfig,
) -> Result<ConvolutionReport> {
    let mut cache = ZetaCache::new(sigma);
    convolution_identity_check_cached(sigma, t, k, quad, eval, &mut cache)
}

/// Cache-aware variant: callers scanning several t at one sigma share the
/// sampled zeta line.
pub fn convolution_identity_check_cached(
    sigma: f64,
    t: f64,
    k: &FejerKernel,
    quad: &QuadratureConfig,
    eval: &EvalConfig,
    cache: &mut ZetaCache,
) -> Result<ConvolutionReport> {
    if t == 0.0 {
        return Err(ZrlError::Domain(
            "the convolution identity needs t != 0".into(),
        ));
    }
    if !(sigma < 1.0) {
        return Err(ZrlError::Domain(format!("need sigma < 1, got {sigma}")));
    }
    if cache.sigma != sigma {
        return Err(ZrlError::Config("cache built for another sigma".into()));
    }
    let a = k.a();

    // Right side first: it is cheap and sets the agreement scale.
    let kl_cap = k.t_big.powf(2.0 * k.epsilon);
    if kl_cap * kl_cap.ln().max(1.0) > 1e7 {
        return Err(ZrlError::Budget(format!(
            "Dirichlet double sum with kl < {kl_cap:.3e} is out of budget"
        )));
    }
    let mut dsum = ComplexSum::new();
    let mut kk = 1u64;
    while (kk as f64) < kl_cap {
        let mut ll = 1u64;
        while ((kk * ll) as f64) < kl_cap {
            let kl = (kk * ll) as f64;
            let khat = kernel_k_hat(kl.ln(), k);
            if khat > 0.0 {
                let phase = t * ((ll as f64).ln() - (kk as f64).ln());
                let (sin, cos) = phase.sin_cos();
                let mag = khat * (-sigma * kl.ln()).exp();
                dsum.add(mag * Complex64::new(cos, sin));
            }
            ll += 1;
        }
        kk += 1;
    }
    let dirichlet = dsum.total();

    // Residue corrections: K at i(sigma +- it) - i = -+t + i(sigma - 1).
    let z1 = Complex64::new(-t, sigma - 1.0);
    let z2 = Complex64::new(t, sigma - 1.0);
    let zeta_m = zeta(ComplexPoint::new(1.0, -2.0 * t), eval)?;
    let zeta_p = zeta(ComplexPoint::new(1.0, 2.0 * t), eval)?;
    let corrections = -2.0 * std::f64::consts::PI * (zeta_m * kernel_k(z1, k) + zeta_p * kernel_k(z2, k));
    let rhs_c = dirichlet + corrections;
    let rhs = rhs_c.re;

    // Left side: 2 Re int_0^U with staged extension of U.
    let target = 1e-3 * rhs.abs().max(1.0);
    let zeta_freq = |x: f64| (1.3 * x.max(10.0)).ln();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut u_lo = 0.0f64;
    let mut u_cut = 1000.0f64.max(4.0 * t.abs());
    let mut last_increment = f64::INFINITY;
    loop {
        let line = cache.ensure(u_cut + t.abs() + 2.0, eval)?;
        let hint = std::f64::consts::TAU / (2.0 * zeta_freq(u_cut + t.abs()) + 2.0 * a);
        let g = |u: f64| line.eval(u + t) * line.eval(u - t) * kernel_k(Complex64::new(u, 0.0), k);
        let out = crate::quad::integrate_complex(
            &g,
            u_lo,
            u_cut,
            &QuadratureConfig {
                abs_tol: target / 8.0,
                rel_tol: 1e-9,
                ..*quad
            }
            .with_hint(hint),
        )?;
        acc += out.value;
        err += out.error;
        last_increment = if u_lo == 0.0 {
            f64::INFINITY
        } else {
            out.value.norm()
        };
        if last_increment < target / 4.0 || u_cut >= 16000.0 {
            break;
        }
        u_lo = u_cut;
        u_cut *= 2.0;
    }
    // Crude 1/U tail from the mean square of zeta on the sigma-line.
    let mean_sq = zeta(ComplexPoint::new(2.0 * sigma, 0.0), eval)?.re;
    let tail = mean_sq / (std::f64::consts::PI * a * u_cut) + last_increment.min(1.0);
    let lhs = 2.0 * acc.re;
    let abs_err = (lhs - rhs).abs();
    Ok(ConvolutionReport {
        sigma,
        t,
        lhs,
        rhs,
        dirichlet_sum: dirichlet.re,
        corrections: corrections.re,
        u_cut,
        tail_estimate: tail + err + 2.0 * acc.im.abs(),
        abs_err,
        rel_err: abs_err / rhs.abs().max(1.0),
    })
}

/// The two strip moments with their error budgets.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StripMoments {
    pub m1: f64,
    pub m1_error: f64,
    pub m2: f64,
    pub m2_error: f64,
    /// |M2|/M1 and its combined quadrature budget.
    pub ratio: f64,
    pub eps_q: f64,
}

/// M1 = int_{T^beta <= |t| <= T} |R|^2 phi(t log T / T) dt and
/// M2 = int_{2 T^beta <= |t| <= T/2} |R|^2 phi * int_{|u| <= |t|/2} Z du dt.
/// Both integrands pair (t, u) with their negatives into conjugates, so the
/// computation runs over positive halves with doubled real parts and the
/// results are exactly real.
pub fn moment_m1_m2(
    r: &BinnedResonator,
    sigma: f64,
    beta: f64,
    k: &FejerKernel,
    quad: &QuadratureConfig,
    eval: &EvalConfig,
) -> Result<StripMoments> {
    let line = ZetaLine::build(sigma, 0.0, 0.75 * r.t_big() + 2.0, eval)?;
    moment_m1_m2_with_line(r, sigma, beta, k, quad, eval, &line)
}

pub fn moment_m1_m2_with_line(
    r: &BinnedResonator,
    sigma: f64,
    beta: f64,
    k: &FejerKernel,
    quad: &QuadratureConfig,
    eval: &EvalConfig,
    line: &ZetaLine,
) -> Result<StripMoments> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ZrlError::Domain(format!("beta = {beta} outside (0, 1)")));
    }
    if line.sigma() != sigma {
        return Err(ZrlError::Config(format!(
            "zeta line sampled at sigma = {}, moments asked for {sigma}",
            line.sigma()
        )));
    }
    let t_big = r.t_big();
    let w = r.weight();
    let r_freq = r
        .bins()
        .iter()
        .map(|b| b.log_rep)
        .fold(0.3f64, f64::max);
    let hint_outer = std::f64::consts::TAU / (4.0 * r_freq);

    let lo1 = t_big.powf(beta);
    let m1 = integrate(
        &|t| r.eval(t).norm_sqr() * w.weight(t),
        lo1,
        t_big,
        &quad.with_hint(hint_outer),
    )?;

    let (interp_abs, interp_max) = line.sampled_error(eval, 64)?;
    let inner_abs = quad.abs_tol.max(3e-6);
    let inner_cfg = QuadratureConfig {
        abs_tol: inner_abs,
        rel_tol: 1e-7,
        parallel: false,
        ..*quad
    };
    let zeta_freq = (1.3 * 0.75 * t_big).ln();
    let hint_inner = std::f64::consts::TAU / (2.0 * zeta_freq + 2.0 * k.a());
    let inner = |t: f64| -> f64 {
        // 2 Re int_0^{t/2} zeta(s+i(t+u)) zeta(s+i(u-t)) K(u) du
        let g = |u: f64| line.eval(t + u) * line.eval(u - t) * kernel_k(Complex64::new(u, 0.0), k);
        let out = integrate(
            &|u| g(u).re,
            0.0,
            0.5 * t,
            &inner_cfg.with_hint(hint_inner),
        );
        match out {
            Ok(v) => 2.0 * v.value,
            Err(_) => f64::NAN,
        }
    };
    let lo2 = 2.0 * t_big.powf(beta);
    let hi2 = 0.5 * t_big;
    if lo2 >= hi2 {
        return Err(ZrlError::Domain(format!(
            "empty outer window [2 T^beta, T/2] = [{lo2}, {hi2}]"
        )));
    }
    let hint2 = std::f64::consts::TAU / (4.0 * r_freq + 2.0);
    let m2 = integrate(
        &|t| r.eval(t).norm_sqr() * w.weight(t) * inner(t),
        lo2,
        hi2,
        &quad.with_hint(hint2),
    )?;
    if !m2.value.is_finite() {
        return Err(ZrlError::Precision {
            wanted: inner_abs,
            achieved: f64::NAN,
        });
    }

    let m1_val = 2.0 * m1.value;
    let m2_val = 2.0 * m2.value;
    // Inner tolerance and interpolation budgets propagate through the outer
    // |R|^2 phi mass, which is exactly M1/2 on the smaller window.
    let inner_budget = (inner_abs + interp_abs * (2.0 * interp_max + interp_abs)) * m1_val * 0.5;
    let m1_err = 2.0 * m1.error;
    let m2_err = 2.0 * m2.error + inner_budget;
    let ratio = m2_val.abs() / m1_val;
    Ok(StripMoments {
        m1: m1_val,
        m1_error: m1_err,
        m2: m2_val,
        m2_error: m2_err,
        ratio,
        eps_q: (m2_err + ratio * m1_err) / m1_val,
    })
}

/// Restricted Dirichlet-side lower bound: the pair sum over
/// lcm/gcd <= T^eps, the exhaustively enumerated excluded sum, its Rankin
/// bound T^{-(sigma-1/2) eps} S_{1/2}(M), and the (T/log T)(S_sigma - bound)
/// proxy.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct I21Report {
    pub s_sigma: f64,
    pub s_half: f64,
    pub restricted_sum: f64,
    pub excluded_sum: f64,
    pub rankin_bound: f64,
    pub excluded_le_bound: bool,
    pub proxy: f64,
}

pub fn i21_lower_bound(r: &BinnedResonator, sigma: f64, k: &FejerKernel) -> Result<I21Report> {
    let elements = r.source().ok_or_else(|| {
        ZrlError::Budget("the source set was not materialized for this resonator".into())
    })?;
    let s_sigma = gal_sum(elements, sigma)?;
    let s_half = gal_sum(elements, 0.5)?;
    let log_cap = k.epsilon * k.t_big.ln();
    let mut restricted = CompensatedSum::new();
    let mut excluded = CompensatedSum::new();
    for (i, a) in elements.iter().enumerate() {
        for (j, b) in elements.iter().enumerate() {
            if j > i {
                break;
            }
            let log_ratio = a.log_gcd_over_lcm(b); // log(gcd/lcm) <= 0
            let mult = if i == j { 1.0 } else { 2.0 };
            let term = mult * (sigma * log_ratio).exp();
            if -log_ratio <= log_cap {
                restricted.add(term);
            } else {
                excluded.add(term);
            }
        }
    }
    let rankin = k.t_big.powf(-(sigma - 0.5) * k.epsilon) * s_half;
    let t_over_log = k.t_big / k.t_big.ln();
    Ok(I21Report {
        s_sigma,
        s_half,
        restricted_sum: restricted.total(),
        excluded_sum: excluded.total(),
        rankin_bound: rankin,
        excluded_le_bound: excluded.total() <= rankin * (1.0 + 1e-12),
        proxy: t_over_log * (s_sigma - rankin),
    })
}

/// Where the strip pipeline takes its integer set from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StripSource {
    /// All divisors of n.
    Divisors { n: u64 },
    /// Explicit exponent-vector elements.
    Explicit { elements: Vec<SetElement> },
    /// The multiplicative block construction, expanded.
    Construction { params: ConstructionParams },
}

impl StripSource {
    pub fn materialize(
        &self,
        table: &PrimeTable,
        max_enumerate: usize,
    ) -> Result<Vec<SetElement>> {
        match self {
            StripSource::Divisors { n } => {
                let f = SetElement::from_u64(*n)?;
                let primes: Vec<u64> = f.primes().collect();
                let squarefree = f.exponents().all(|(_, &e)| e == 1);
                if !squarefree {
                    return Err(ZrlError::Domain(format!(
                        "{n} is not squarefree; pass explicit elements instead"
                    )));
                }
                squarefree_divisors(&primes)
            }
            StripSource::Explicit { elements } => Ok(elements.clone()),
            StripSource::Construction { params } => {
                let set = build_construction(params, table, max_enumerate)?;
                set.product_elements(max_enumerate)
            }
        }
    }
}

/// Configuration of the strip measurement pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripConfig {
    pub t_big: f64,
    pub beta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub source: StripSource,
    pub grid_step: f64,
    pub top_peaks: usize,
    pub csv_points: usize,
    pub max_enumerate: usize,
    pub quad: QuadratureConfig,
    pub eval: EvalConfig,
}

impl Default for StripConfig {
    fn default() -> Self {
        StripConfig {
            t_big: 2000.0,
            beta: 0.5,
            sigma: 0.6,
            epsilon: 0.1,
            source: StripSource::Divisors { n: 210 },
            grid_step: 0.05,
            top_peaks: 32,
            csv_points: 512,
            max_enumerate: 100_000,
            quad: QuadratureConfig::with_tols(1e-8, 1e-7),
            eval: EvalConfig::default(),
        }
    }
}

/// The strip pipeline: measured |M2|/M1 against S_sigma(M)/|M|, the
/// full-line moments through the exact Gaussian-transform forms, the
/// restricted Dirichlet lower bound with its Rankin tail, a resonance-seeded
/// search for max |zeta(sigma+it)|, and the exact chain
/// max^2 >= |M2|/M1 within the quadrature budget.
pub fn strip_pipeline(cfg: &StripConfig, table: &PrimeTable) -> Result<RunReport> {
    let started = std::time::Instant::now();
    if !(cfg.sigma > 0.5 && cfg.sigma < 1.0) {
        return Err(ZrlError::Domain(format!(
            "sigma = {} outside (1/2, 1)",
            cfg.sigma
        )));
    }
    if !(0.0 < cfg.beta && cfg.beta < 1.0) {
        return Err(ZrlError::Domain(format!(
            "beta = {} outside (0, 1)",
            cfg.beta
        )));
    }
    let elements = cfg.source.materialize(table, cfg.max_enumerate)?;
    let r = bin_set(&elements, cfg.t_big)?;
    let n = r.cardinality() as f64;
    let kernel = FejerKernel::new(cfg.epsilon, cfg.t_big)?;
    let w = r.weight();
    let s_scale = w.scale();

    let mut report = RunReport::new(
        "strip-search",
        serde_json::to_value(cfg).map_err(|e| ZrlError::Config(e.to_string()))?,
    );

    // Structural invariants of the binning.
    let sum_sq: u64 = r.bins().iter().map(|b| b.count).sum();
    report.push(CheckRecord::new(
        "bin_weights_partition",
        sum_sq as f64,
        n,
        Relation::Approx,
        0.0,
    ));
    report.push(CheckRecord::new(
        "peak_cauchy_schwarz",
        r.peak(),
        (r.bins().len() as f64).sqrt() * n.sqrt(),
        Relation::Le,
        1e-9,
    ));
    report.push(CheckRecord::info("kappa", r.kappa()));
    // The asymptotic sigma window 1/2 + 1/loglog T is far above any desk
    // scale sigma; recorded, never enforced.
    let window_slack = cfg.sigma - (0.5 + 1.0 / cfg.t_big.ln().ln());
    report.push(CheckRecord::info("sigma_window_slack", window_slack));

    // Moments.
    let line = ZetaLine::build(cfg.sigma, 0.0, 0.75 * cfg.t_big + 2.0, &cfg.eval)?;
    let moments = moment_m1_m2_with_line(
        &r, cfg.sigma, cfg.beta, &kernel, &cfg.quad, &cfg.eval, &line,
    )?;
    report.push(CheckRecord::info("m1", moments.m1));
    report.push(CheckRecord::info("m2", moments.m2));
    report.push(CheckRecord::info("quadrature_budget", moments.eps_q));
    let gal_ratio = gal_sum(&elements, cfg.sigma)? / n;
    report.push(CheckRecord::new(
        "ratio_m2_m1_vs_gcd_ratio",
        moments.ratio,
        gal_ratio,
        Relation::Info,
        0.0,
    ));

    // Exact Gaussian-transform forms of the full-line moments.
    let sqrt_pi_over_s = std::f64::consts::PI.sqrt() / s_scale;
    let mut i1 = CompensatedSum::new();
    for a in r.bins() {
        for b in r.bins() {
            let omega = a.log_rep - b.log_rep;
            i1.add(a.weight * b.weight * sqrt_pi_over_s * (-(omega / (2.0 * s_scale)).powi(2)).exp());
        }
    }
    let i1 = i1.total();
    report.push(CheckRecord::new(
        "m1_le_i1",
        moments.m1,
        i1,
        Relation::Le,
        moments.m1_error + 1e-9,
    ));
    report.push(CheckRecord::info(
        "i1_fitted_constant",
        i1 * cfg.t_big.ln() / (cfg.t_big * n),
    ));

    // I2 through the convolution identity: the transform-supported Dirichlet
    // double sum in exact Gaussian form, minus the residue corrections
    // integrated along the real line.
    let kl_cap = cfg.t_big.powf(2.0 * cfg.epsilon);
    let mut i21 = CompensatedSum::new();
    let mut kk = 1u64;
    while (kk as f64) < kl_cap {
        let mut ll = 1u64;
        while ((kk * ll) as f64) < kl_cap {
            let kl = (kk * ll) as f64;
            let khat = kernel_k_hat(kl.ln(), &kernel);
            if khat > 0.0 {
                let mag = khat * (-cfg.sigma * kl.ln()).exp();
                let dk = (kk as f64).ln();
                let dl = (ll as f64).ln();
                for a in r.bins() {
                    for b in r.bins() {
                        let omega = a.log_rep + dk - b.log_rep - dl;
                        i21.add(
                            a.weight
                                * b.weight
                                * mag
                                * sqrt_pi_over_s
                                * (-(omega / (2.0 * s_scale)).powi(2)).exp(),
                        );
                    }
                }
            }
            ll += 1;
        }
        kk += 1;
    }
    let i21_val = i21.total();
    // The residue-correction integrals. The paired combination
    // 2 Re[zeta(1-2it) K(-t + i(sigma-1))] stays finite as t -> 0 (the
    // imaginary 1/t parts cancel), but zeta itself is evaluated directly:
    // interpolation cannot cross the pole.
    let cut = w.tail_cut(n * n * 10.0, 1e-12);
    let corr_ev = ZetaEvaluator::new(1.0, 2.0 * cut + 4.0, &cfg.eval)?;
    let corr_hint = std::f64::consts::TAU / (2.0 * (2.6 * cut).ln() + 2.0);
    let corr = integrate(
        &|t| {
            let z1 = Complex64::new(-t, cfg.sigma - 1.0);
            let zm = match corr_ev.eval(-2.0 * t) {
                Ok(z) => z,
                Err(_) => return 0.0, // only within 5e-9 of t = 0
            };
            let pair = 2.0 * (zm * kernel_k(z1, &kernel)).re;
            pair * r.eval(t).norm_sqr() * w.weight(t)
        },
        1e-6,
        cut,
        &cfg.quad.with_hint(corr_hint),
    )?;
    let i2_corrections = 2.0 * std::f64::consts::PI * 2.0 * corr.value;
    let i2 = i21_val - i2_corrections;
    report.push(CheckRecord::info("i2", i2));
    report.push(CheckRecord::info(
        "i2_minus_m2_fitted_constant",
        (i2 - moments.m2).abs()
            / (n * cfg.t_big.powf(cfg.beta + r.kappa()) * cfg.t_big.ln()),
    ));

    // Restricted lower bound and Rankin tail.
    let i21r = i21_lower_bound(&r, cfg.sigma, &kernel)?;
    report.push(CheckRecord::new(
        "rankin_excluded_le_bound",
        i21r.excluded_sum,
        i21r.rankin_bound,
        Relation::Le,
        1e-12 * i21r.rankin_bound.abs().max(1e-300),
    ));
    report.push(CheckRecord::info("i21_restricted_sum", i21r.restricted_sum));
    report.push(CheckRecord::info("i21_proxy", i21r.proxy));

    // Peak search over [T^beta, T].
    let lo = cfg.t_big.powf(cfg.beta);
    let ev = ZetaEvaluator::new(cfg.sigma, cfg.t_big, &cfg.eval)?;
    let refine = |t: f64| ev.eval(t).map(|z| z.norm()).unwrap_or(f64::NEG_INFINITY);
    let (argmax, max_zeta) = peak_search(
        |t| r.eval(t).norm(),
        &refine,
        lo,
        cfg.t_big,
        cfg.grid_step,
        cfg.top_peaks,
    );
    report.push(CheckRecord::info("argmax_t", argmax));
    report.push(CheckRecord::info("max_zeta", max_zeta));
    report.push(CheckRecord::new(
        "max_zeta_sq_ge_ratio",
        max_zeta * max_zeta,
        moments.ratio,
        Relation::Ge,
        moments.eps_q,
    ));

    // Plot series: t, |R|^2, inner integral.
    let pts = cfg.csv_points.clamp(2, 1 << 20);
    let inner_cfg = QuadratureConfig {
        abs_tol: 1e-5,
        rel_tol: 1e-5,
        parallel: false,
        ..cfg.quad
    };
    let zeta_freq = (1.3 * 0.75 * cfg.t_big).ln();
    let hint_inner = std::f64::consts::TAU / (2.0 * zeta_freq + 2.0 * kernel.a());
    let mut rows = Vec::with_capacity(pts);
    let lo2 = 2.0 * lo;
    let hi2 = 0.5 * cfg.t_big;
    for i in 0..pts {
        let t = lo2 + (hi2 - lo2) * i as f64 / (pts - 1) as f64;
        let inner = integrate(
            &|u| (line.eval(t + u) * line.eval(u - t) * kernel_k(Complex64::new(u, 0.0), &kernel)).re,
            0.0,
            0.5 * t,
            &inner_cfg.with_hint(hint_inner),
        )
        .map(|o| 2.0 * o.value)
        .unwrap_or(f64::NAN);
        rows.push(vec![t, r.eval(t).norm_sqr(), inner]);
    }
    report.series.insert(
        "strip".into(),
        Series {
            columns: vec!["t".into(), "abs_R_sq".into(), "inner_integral".into()],
            rows,
        },
    );
    report.timing_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_complex;

    fn elems(ns: &[u64]) -> Vec<SetElement> {
        ns.iter().map(|&n| SetElement::from_u64(n).unwrap()).collect()
    }

    #[test]
    fn binning_basics() {
        // T large enough that 2, 3, 5 land in distinct bins.
        let r = bin_set(&elems(&[2, 3, 5]), 1000.0).unwrap();
        assert_eq!(r.bins().len(), 3);
        assert!(r.bins().iter().all(|b| b.count == 1 && b.weight == 1.0));
        assert!(r.bins().windows(2).all(|w| w[0].log_rep < w[1].log_rep));
        assert_eq!(r.cardinality(), 3);

        // two values in one bin: weight sqrt(2), representative the smaller.
        let width = (1000.0f64.ln() / 1000.0).ln_1p();
        let logs = [10.0 * width + 0.1 * width, 10.0 * width + 0.2 * width, 30.5 * width];
        let r = bin_log_values(&logs, 1000.0).unwrap();
        assert_eq!(r.bins().len(), 2);
        assert_eq!(r.bins()[0].count, 2);
        assert!((r.bins()[0].weight - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((r.bins()[0].log_rep - logs[0]).abs() < 1e-15);

        // partition invariant and Cauchy-Schwarz peak bound
        let set = elems(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 180]);
        let r = bin_set(&set, 500.0).unwrap();
        let total: u64 = r.bins().iter().map(|b| b.count).sum();
        assert_eq!(total, 12);
        let njs = r.bins().len() as f64;
        assert!(r.peak() <= (njs * 12.0).sqrt() + 1e-12);
        assert!(r.peak() <= 12.0 + 1e-12);
        // element below 1 rejected
        assert!(bin_log_values(&[-0.1], 500.0).is_err());
    }

    #[test]
    fn binned_elements_close_to_representatives() {
        let set = elems(&[6, 10, 15, 30, 210, 2310, 30030]);
        let t_big = 120.0;
        let r = bin_set(&set, t_big).unwrap();
        let width = (t_big.ln() / t_big).ln_1p();
        for e in &set {
            let lv = e.log_value();
            let bin = r
                .bins()
                .iter()
                .rev()
                .find(|b| b.log_rep <= lv + 1e-12)
                .unwrap();
            assert!(lv - bin.log_rep <= width + 1e-12);
        }
    }

    #[test]
    fn kernel_values_and_parity() {
        let k = FejerKernel::new(0.1, 1000.0).unwrap();
        let a = k.a();
        // K(0) = eps log T / pi.
        let at0 = kernel_k(Complex64::new(0.0, 0.0), &k);
        assert!((at0.re - a / std::f64::consts::PI).abs() < 1e-14);
        assert!(at0.im == 0.0);
        // nonnegative and even on the real line
        for i in 0..200 {
            let u = -20.0 + 0.2 * i as f64;
            let v = kernel_k(Complex64::new(u, 0.0), &k);
            assert!(v.re >= -1e-16);
            assert!(v.im.abs() < 1e-16);
            let m = kernel_k(Complex64::new(-u, 0.0), &k);
            assert!((v - m).norm() < 1e-15);
        }
        // series and closed form agree at the switch radius
        let w_small = 0.99e-3 / a;
        let w_large = 1.01e-3 / a;
        let s = kernel_k(Complex64::new(w_small, 0.0), &k).re;
        let l = kernel_k(Complex64::new(w_large, 0.0), &k).re;
        assert!((s - l).abs() < 1e-9 * s.abs());
        // triangle transform values
        assert_eq!(kernel_k_hat(0.0, &k), 1.0);
        assert_eq!(kernel_k_hat(2.0 * a, &k), 0.0);
        assert_eq!(kernel_k_hat(-3.0 * a, &k), 0.0);
        assert!((kernel_k_hat(a, &k) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_integrates_to_one() {
        // int K = K^(0) = 1, with the analytic tail beyond U built from the
        // sine integral.
        let k = FejerKernel::new(0.1, 1000.0).unwrap();
        let a = k.a();
        let u_cut = 3000.0;
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-11).with_hint(0.5);
        let body = integrate(
            &|u| kernel_k(Complex64::new(u, 0.0), &k).re,
            -u_cut,
            u_cut,
            &cfg,
        )
        .unwrap();
        // tail: (1/(pi a)) [1/(2U) - int_U^inf cos(2au)/(2u^2) du], doubled.
        let c2a = {
            let b = 2.0 * a;
            (b * u_cut).cos() / u_cut
                - b * (std::f64::consts::FRAC_PI_2 - crate::util::sine_integral(b * u_cut))
        };
        let tail = 2.0 * (1.0 / (2.0 * u_cut) - 0.5 * c2a) / (std::f64::consts::PI * a);
        let total = body.value + tail;
        assert!((total - 1.0).abs() < 1e-6, "int K = {total}");
    }

    #[test]
    fn frak_z_structure() {
        let k = FejerKernel::new(0.1, 1000.0).unwrap();
        let cfg = EvalConfig::default();
        // kernel zeros kill the product
        let u0 = std::f64::consts::PI / k.a();
        let v = frak_z(0.75, 17.3, u0, &k, &cfg).unwrap();
        assert!(v.norm() < 1e-12);
        // t = 0 collapses to |zeta(sigma+iu)|^2 K(u) >= 0
        let v = frak_z(0.75, 0.0, 3.0, &k, &cfg).unwrap();
        assert!(v.im.abs() < 1e-12 * v.re.abs());
        assert!(v.re >= 0.0);
        // oracle cross-check at (0.75, 17.3, 1.0): frozen mpmath zeta values
        let v = frak_z(0.75, 17.3, 1.0, &k, &cfg).unwrap();
        let z1 = Complex64::new(1.975675191096385, -0.429712293801023);
        let z2 = Complex64::new(1.2224042557606833, -0.9828661424508763);
        let expect = z1 * z2 * kernel_k(Complex64::new(1.0, 0.0), &k);
        assert!((v - expect).norm() < 1e-9 * expect.norm());
    }

    #[test]
    fn convolution_identity_at_reference_point() {
        let k = FejerKernel::new(0.1, 1000.0).unwrap();
        let quad = QuadratureConfig::with_tols(1e-9, 1e-8);
        let eval = EvalConfig::default();
        let r = convolution_identity_check(0.75, 5.0, &k, &quad, &eval).unwrap();
        assert!(
            r.rel_err <= 1e-3,
            "lhs {} rhs {} rel {}",
            r.lhs,
            r.rhs,
            r.rel_err
        );
        // t = 0 is rejected
        assert!(matches!(
            convolution_identity_check(0.75, 0.0, &k, &quad, &eval),
            Err(ZrlError::Domain(_))
        ));
        // transform support: only kl < T^{2 eps} contributes
        assert!(kernel_k_hat((k.t_big.powf(2.0 * k.epsilon)).ln(), &k) == 0.0);
    }

    #[test]
    fn single_bin_m1_matches_error_function_form() {
        // |R| = 1: M1 = 2 (sqrt(pi)/(2s)) (erf(T s) - erf(T^beta s)).
        let r = bin_set(&elems(&[1]), 2000.0).unwrap();
        let k = FejerKernel::new(0.1, 2000.0).unwrap();
        let quad = QuadratureConfig::with_tols(1e-12, 1e-11);
        let m = moment_m1_m2(&r, 0.6, 0.5, &k, &quad, &EvalConfig::default()).unwrap();
        let s = r.weight().scale();
        let lo = 2000.0f64.powf(0.5);
        let closed = std::f64::consts::PI.sqrt() / s
            * (statrs::function::erf::erf(2000.0 * s) - statrs::function::erf::erf(lo * s));
        assert!(
            (m.m1 - closed).abs() <= 1e-10 * closed,
            "m1 {} vs closed {closed}",
            m.m1
        );
        assert!(m.m1 > 0.0);
    }

    #[test]
    fn m2_real_by_conjugate_pairing_small_case() {
        // Honest complex quadrature over both t-halves and the full u-range,
        // no symmetry shortcuts, against the paired implementation.
        let set = elems(&[1, 2, 3, 6]);
        let t_big = 150.0;
        let r = bin_set(&set, t_big).unwrap();
        let k = FejerKernel::new(0.1, t_big).unwrap();
        let eval = EvalConfig::default();
        let sigma = 0.7;
        let line = ZetaLine::build(sigma, 0.0, 0.8 * t_big, &eval).unwrap();
        let w = r.weight();
        let inner_cfg = QuadratureConfig::with_tols(1e-9, 1e-8).with_hint(0.4);
        let inner_full = |t: f64| -> Complex64 {
            integrate_complex(
                &|u| line.eval(t + u) * line.eval(u - t) * kernel_k(Complex64::new(u, 0.0), &k),
                -0.5 * t.abs(),
                0.5 * t.abs(),
                &inner_cfg,
            )
            .unwrap()
            .value
        };
        let outer = |a: f64, b: f64| -> Complex64 {
            integrate_complex(
                &|t| r.eval(t).norm_sqr() * w.weight(t) * inner_full(t),
                a,
                b,
                &QuadratureConfig::with_tols(1e-8, 1e-7).with_hint(0.4),
            )
            .unwrap()
            .value
        };
        let lo = 2.0 * t_big.powf(0.5);
        let hi = 0.5 * t_big;
        let full = outer(lo, hi) + outer(-hi, -lo);
        assert!(full.im.abs() <= 1e-8 * full.norm().max(1e-12), "im {}", full.im);
        let m = moment_m1_m2_with_line(
            &r,
            sigma,
            0.5,
            &k,
            &QuadratureConfig::with_tols(1e-9, 1e-8),
            &eval,
            &line,
        )
        .unwrap();
        assert!(
            (m.m2 - full.re).abs() <= 5e-5 * full.re.abs().max(1.0),
            "paired {} vs honest {}",
            m.m2,
            full.re
        );
    }

    #[test]
    fn i21_restriction_and_rankin_tail() {
        let set = elems(&[1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60]);
        let t_big = 2000.0;
        let r = bin_set(&set, t_big).unwrap();
        // Large epsilon: every pair passes the lcm/gcd <= T^eps cut, so the
        // restricted sum equals S_sigma exactly.
        let k_all = FejerKernel::new(0.9, t_big).unwrap();
        let rep = i21_lower_bound(&r, 0.6, &k_all).unwrap();
        assert!((rep.restricted_sum - rep.s_sigma).abs() < 1e-12 * rep.s_sigma);
        assert_eq!(rep.excluded_sum, 0.0);
        assert!(rep.excluded_le_bound);

        // Small epsilon excludes pairs; the exactly enumerated excluded sum
        // obeys the Rankin bound.
        let k_small = FejerKernel::new(0.05, t_big).unwrap();
        let rep = i21_lower_bound(&r, 0.6, &k_small).unwrap();
        assert!(rep.excluded_sum > 0.0);
        assert!(rep.excluded_le_bound);
        assert!(
            (rep.restricted_sum + rep.excluded_sum - rep.s_sigma).abs() < 1e-12 * rep.s_sigma
        );

        // singleton set: restricted sum 1, tail bound T^{-(sigma-1/2) eps}
        let single = bin_set(&elems(&[1]), t_big).unwrap();
        let rep = i21_lower_bound(&single, 0.6, &k_small).unwrap();
        assert_eq!(rep.restricted_sum, 1.0);
        assert!((rep.rankin_bound - t_big.powf(-0.1 * 0.05)).abs() < 1e-12);

        // missing source elements
        let logs: Vec<f64> = set.iter().map(|e| e.log_value()).collect();
        let no_src = bin_log_values(&logs, t_big).unwrap();
        assert!(matches!(
            i21_lower_bound(&no_src, 0.6, &k_small),
            Err(ZrlError::Budget(_))
        ));
    }

    #[test]
    fn strip_pipeline_small_run() {
        let table = crate::primes::PrimeTable::sieve(10_000).unwrap();
        let cfg = StripConfig {
            t_big: 400.0,
            sigma: 0.7,
            csv_points: 32,
            grid_step: 0.05,
            top_peaks: 12,
            ..StripConfig::default()
        };
        let report = strip_pipeline(&cfg, &table).unwrap();
        let find = |name: &str| {
            report
                .checks
                .iter()
                .find(|c| c.name == name)
                .unwrap_or_else(|| panic!("missing {name}"))
        };
        assert!(find("bin_weights_partition").pass);
        assert!(find("peak_cauchy_schwarz").pass);
        assert!(find("m1_le_i1").pass);
        assert!(find("rankin_excluded_le_bound").pass);
        assert!(find("max_zeta_sq_ge_ratio").pass, "{report:?}");
        assert_eq!(report.series["strip"].rows.len(), 32);
        // sigma outside the strip is refused
        let bad = StripConfig {
            sigma: 0.4,
            ..cfg.clone()
        };
        assert!(matches!(
            strip_pipeline(&bad, &table),
            Err(ZrlError::Domain(_))
        ));
        // non-squarefree divisor source is refused
        let bad = StripConfig {
            source: StripSource::Divisors { n: 12 },
            ..cfg
        };
        assert!(matches!(
            strip_pipeline(&bad, &table),
            Err(ZrlError::Domain(_))
        ));
    }
}
