//! The friable resonator on the 1-line: coefficients a_p = 1 - p/X supported
//! on X-smooth numbers, its closed-form moment quantities, the weighted
//! moment integrals, and the full measurement pipeline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZrlError};
use crate::primes::PrimeTable;
use crate::quad::{integrate, QuadratureConfig};
use crate::report::{CheckRecord, Measured, Relation, RunReport, Series};
use crate::util::{golden_max, CompensatedSum, EXP_GAMMA};
use crate::zeta::{admissible_c, EvalConfig, ZetaEvaluator, ZetaLine};

/// Gaussian weight phi(t * scale) with phi(x) = e^{-x^2}; the pipelines use
/// scale = log T / T.
#[derive(Clone, Copy, Debug)]
pub struct GaussianWeight {
    scale: f64,
}

impl GaussianWeight {
    pub fn new(scale: f64) -> Result<GaussianWeight> {
        if !(scale > 0.0) {
            return Err(ZrlError::Config(format!(
                "Gaussian scale must be positive, got {scale}"
            )));
        }
        Ok(GaussianWeight { scale })
    }

    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        let x = t * self.scale;
        (-x * x).exp()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Ordinate beyond which amplitude * phi stays below eps_abs, from the
    /// bound int_tau^inf e^{-(ts)^2} dt <= e^{-(tau s)^2} / (2 s^2 tau).
    pub fn tail_cut(&self, amplitude: f64, eps_abs: f64) -> f64 {
        let mut x = 2.0f64;
        while amplitude * (-x * x).exp() / (2.0 * self.scale * x) > eps_abs && x < 40.0 {
            x += 0.25;
        }
        x / self.scale
    }
}

/// The smooth-supported resonator R(t) = prod_{p <= X} (1 - a_p p^{it})^{-1}
/// with a_p = 1 - p/X.
#[derive(Clone, Debug)]
pub struct FriableResonator {
    t_big: f64,
    beta: f64,
    b_param: f64,
    offset_c: f64,
    x_cutoff: f64,
    primes: Vec<u64>,
    log_primes: Vec<f64>,
    ap: Vec<f64>,
}

/// Window for the proportionality constant B: (e^{c+1}, (1-beta)/log 4).
pub fn b_window(beta: f64, c: f64) -> Result<(f64, f64)> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ZrlError::Domain(format!("beta = {beta} outside (0, 1)")));
    }
    let lo = (c + 1.0).exp();
    let hi = (1.0 - beta) / 4.0f64.ln();
    if lo >= hi {
        return Err(ZrlError::Config(format!(
            "empty B window: e^(c+1) = {lo:.6} must be below (1-beta)/log 4 = {hi:.6}; \
             the offset c = {c} is too large (admissible bound {:.6})",
            admissible_c(beta)?
        )));
    }
    Ok((lo, hi))
}

/// Builds the resonator with B at the midpoint of its admissible window.
pub fn build_resonator(
    t_big: f64,
    beta: f64,
    c: f64,
    table: &PrimeTable,
) -> Result<FriableResonator> {
    let (lo, hi) = b_window(beta, c)?;
    build_resonator_with_b(t_big, beta, c, 0.5 * (lo + hi), table)
}

/// Builds the resonator with an explicit B (validated against the window).
pub fn build_resonator_with_b(
    t_big: f64,
    beta: f64,
    c: f64,
    b_param: f64,
    table: &PrimeTable,
) -> Result<FriableResonator> {
    if !(t_big >= 100.0) {
        return Err(ZrlError::Domain(format!("need T >= 100, got {t_big}")));
    }
    let (lo, hi) = b_window(beta, c)?;
    if !(lo < b_param && b_param < hi) {
        return Err(ZrlError::Config(format!(
            "B = {b_param} outside the admissible window ({lo:.6}, {hi:.6})"
        )));
    }
    let x_cutoff = b_param * t_big.ln() * t_big.ln().ln();
    FriableResonator::with_cutoff_tagged(x_cutoff, t_big, beta, b_param, c, table)
}

impl FriableResonator {
    /// Direct construction from a smoothness cutoff; the algebraic
    /// quantities (log-sup, coefficient sums) need only X.
    pub fn with_cutoff(x_cutoff: f64, table: &PrimeTable) -> Result<FriableResonator> {
        Self::with_cutoff_tagged(x_cutoff, 100.0, 0.5, 0.3, -3.0, table)
    }

    fn with_cutoff_tagged(
        x_cutoff: f64,
        t_big: f64,
        beta: f64,
        b_param: f64,
        offset_c: f64,
        table: &PrimeTable,
    ) -> Result<FriableResonator> {
        if x_cutoff > table.limit() as f64 {
            return Err(ZrlError::TableTooSmall {
                needed: x_cutoff,
                limit: table.limit(),
            });
        }
        let primes: Vec<u64> = table
            .primes_in(0.0, x_cutoff)
            .iter()
            .map(|&p| p as u64)
            .collect();
        let log_primes: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
        let ap: Vec<f64> = primes.iter().map(|&p| 1.0 - p as f64 / x_cutoff).collect();
        debug_assert!(ap.windows(2).all(|w| w[1] < w[0]));
        debug_assert!(ap.iter().all(|&a| (0.0..1.0).contains(&a)));
        Ok(FriableResonator {
            t_big,
            beta,
            b_param,
            offset_c,
            x_cutoff,
            primes,
            log_primes,
            ap,
        })
    }

    pub fn t_big(&self) -> f64 {
        self.t_big
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn b_param(&self) -> f64 {
        self.b_param
    }
    pub fn offset_c(&self) -> f64 {
        self.offset_c
    }
    pub fn x_cutoff(&self) -> f64 {
        self.x_cutoff
    }
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }
    pub fn coefficients(&self) -> &[f64] {
        &self.ap
    }

    /// The Gaussian weight used by this resonator's moments.
    pub fn weight(&self) -> GaussianWeight {
        GaussianWeight {
            scale: self.t_big.ln() / self.t_big,
        }
    }

    /// R(t) through the closed Euler-product form; the denominators satisfy
    /// |1 - a_p p^{it}| >= 1 - a_p > 0, so this never fails.
    pub fn eval(&self, t: f64) -> Complex64 {
        let mut val = Complex64::new(1.0, 0.0);
        for (lp, &a) in self.log_primes.iter().zip(&self.ap) {
            let (sin, cos) = (t * lp).sin_cos();
            val /= Complex64::new(1.0 - a * cos, -a * sin);
        }
        val
    }

    /// R(0) = prod X/p, the supremum of |R|.
    pub fn peak(&self) -> f64 {
        self.ap.iter().map(|&a| 1.0 / (1.0 - a)).product()
    }

    /// pi(X) log X - theta(X) = log R(0), with the comparator B log T.
    pub fn log_sup(&self) -> LogSupReport {
        let mut theta = CompensatedSum::new();
        for lp in &self.log_primes {
            theta.add(*lp);
        }
        LogSupReport {
            value: self.primes.len() as f64 * self.x_cutoff.ln() - theta.total(),
            comparator: self.b_param * self.t_big.ln(),
        }
    }

    /// log sum a_n^2 over the smooth support, both as the direct product
    /// form -sum log(1 - a_p^2) and as the expanded form
    /// 2 pi(X) log X - theta(X) - sum log(2X - p); the two are algebraically
    /// equal. The comparator is the (2 - 2 log 2) X / log X density scale.
    pub fn sum_a_squared(&self) -> SumASquaredReport {
        let mut direct = CompensatedSum::new();
        for &a in &self.ap {
            direct.add(-(-a * a).ln_1p());
        }
        let lx = self.x_cutoff.ln();
        let mut expansion = CompensatedSum::new();
        expansion.add(2.0 * self.primes.len() as f64 * lx);
        for (lp, &p) in self.log_primes.iter().zip(&self.primes) {
            expansion.add(-lp);
            expansion.add(-(2.0 * self.x_cutoff - p as f64).ln());
        }
        SumASquaredReport {
            log_direct: direct.total(),
            log_expansion: expansion.total(),
            comparator: (2.0 - 2.0 * 2.0f64.ln()) * self.x_cutoff / lx,
        }
    }

    /// sum over smooth l of a_l / l = prod (1 - a_p/p)^{-1}, the exact lower
    /// bound for the moment ratio, with its Mertens factorization and the
    /// e^gamma (log X - 1) reference.
    pub fn gamma_ratio_bound(&self) -> GammaRatioReport {
        let mut log_main = CompensatedSum::new();
        let mut log_mertens = CompensatedSum::new();
        let mut log_corr = CompensatedSum::new();
        for (&p, &a) in self.primes.iter().zip(&self.ap) {
            let p = p as f64;
            log_main.add(-(-a / p).ln_1p());
            log_mertens.add(-(-1.0 / p).ln_1p());
            // (p-1)/(p-a_p)
            log_corr.add(((p - 1.0) / (p - a)).ln());
        }
        let lx = self.x_cutoff.ln();
        GammaRatioReport {
            value: log_main.total().exp(),
            mertens_factor: log_mertens.total().exp(),
            correction_factor: log_corr.total().exp(),
            reference: if lx > 1.0 {
                Some(EXP_GAMMA * (lx - 1.0))
            } else {
                None
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogSupReport {
    pub value: f64,
    pub comparator: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SumASquaredReport {
    pub log_direct: f64,
    pub log_expansion: f64,
    pub comparator: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaRatioReport {
    pub value: f64,
    pub mertens_factor: f64,
    pub correction_factor: f64,
    pub reference: Option<f64>,
}

/// Which weighted moment to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Moment {
    /// int_{T^beta <= |t| <= T} |R|^2 phi
    M1,
    /// int_{T^beta <= |t| <= T} zeta(1+it) |R|^2 phi
    M2,
    /// int_R |R|^2 phi
    I1,
    /// int_R zeta(1+it; Y) |R|^2 phi with Y = exp((log T)^{1/beta})
    I2,
}

#[derive(Clone, Copy, Debug)]
pub struct MomentOutcome {
    pub value: Complex64,
    /// Quadrature error plus any domain-clip and interpolation budgets.
    pub error: f64,
    pub evals: u64,
}

/// Moment evaluation context. The prime table is needed only for I2.
pub struct MomentContext<'a> {
    pub quad: QuadratureConfig,
    pub eval: EvalConfig,
    pub table: Option<&'a PrimeTable>,
}

/// Crude envelope for |zeta(1 + it)| used only to budget clipped Gaussian
/// tails.
fn one_line_envelope(t: f64) -> f64 {
    t.max(3.0).ln() + 2.0
}

/// Numerical evaluation of the requested moment. Conjugate symmetry of the
/// integrands pairs t with -t, so integration runs over positive t with the
/// real part doubled; M2 and I2 are exactly real by that pairing.
pub fn weighted_moment(
    r: &FriableResonator,
    which: Moment,
    ctx: &MomentContext,
) -> Result<MomentOutcome> {
    let t_big = r.t_big();
    let w = r.weight();
    let r0 = r.peak();
    let r_freq: f64 = r
        .log_primes
        .iter()
        .zip(&r.ap)
        .map(|(lp, a)| a * lp)
        .sum::<f64>()
        .max(0.3);
    let lo = t_big.powf(r.beta());
    match which {
        Moment::M1 | Moment::I1 => {
            let (a, b) = if which == Moment::M1 {
                (lo, t_big)
            } else {
                (0.0, w.tail_cut(r0 * r0, 1e-14 * r0 * r0).min(4.0 * t_big))
            };
            let hint = (std::f64::consts::TAU / (4.0 * r_freq)).min((b - a) / 4.0);
            let out = integrate(
                &|t| {
                    let z = r.eval(t);
                    z.norm_sqr() * w.weight(t)
                },
                a,
                b,
                &ctx.quad.with_hint(hint),
            )?;
            Ok(MomentOutcome {
                value: Complex64::new(2.0 * out.value, 0.0),
                error: 2.0 * out.error,
                evals: out.evals,
            })
        }
        Moment::M2 => {
            // Clip where the Gaussian kills the integrand; the clipped tail
            // enters the error budget with a crude zeta envelope.
            let envelope = r0 * r0 * one_line_envelope(t_big);
            let cut = w.tail_cut(envelope, 1e-13 * envelope);
            let hi = t_big.min(cut);
            let clip_budget = if hi < t_big {
                envelope * (-(hi * w.scale()).powi(2)).exp() / (2.0 * w.scale() * w.scale() * hi)
            } else {
                0.0
            };
            let line = ZetaLine::build(1.0, (lo - 1.0).max(2.0), hi + 1.0, &ctx.eval)?;
            let (interp_abs, _) = line.sampled_error(&ctx.eval, 64)?;
            let zeta_freq = (1.3 * hi).ln();
            let hint = std::f64::consts::TAU / (3.0 * (r_freq + zeta_freq));
            let out = integrate(
                &|t| {
                    let z = r.eval(t);
                    line.eval(t).re * z.norm_sqr() * w.weight(t)
                },
                lo,
                hi,
                &ctx.quad.with_hint(hint),
            )?;
            // |d M2| <= interp_abs * int |R|^2 phi = interp_abs * M1.
            let m1 = weighted_moment(r, Moment::M1, ctx)?;
            Ok(MomentOutcome {
                value: Complex64::new(2.0 * out.value, 0.0),
                error: 2.0 * out.error + 2.0 * clip_budget + interp_abs * m1.value.re,
                evals: out.evals,
            })
        }
        Moment::I2 => {
            let table = ctx.table.ok_or_else(|| {
                ZrlError::Config("I2 needs a prime table for the truncated product".into())
            })?;
            let y = (t_big.ln().powf(1.0 / r.beta())).exp();
            if y > table.limit() as f64 {
                return Err(ZrlError::TableTooSmall {
                    needed: y,
                    limit: table.limit(),
                });
            }
            let envelope = r0 * r0 * (y.ln() + 2.0);
            let hi = w.tail_cut(envelope, 1e-13 * envelope).min(4.0 * t_big);
            let hint = std::f64::consts::TAU / (3.0 * (r_freq + y.ln().min(12.0)));
            let out = integrate(
                &|t| {
                    let z = r.eval(t);
                    let zy = crate::zeta::zeta_truncated(
                        crate::zeta::ComplexPoint::new(1.0, t),
                        y,
                        table,
                    )
                    .expect("validated above");
                    zy.re * z.norm_sqr() * w.weight(t)
                },
                0.0,
                hi,
                &ctx.quad.with_hint(hint),
            )?;
            let tail = envelope * (-(hi * w.scale()).powi(2)).exp()
                / (2.0 * w.scale() * w.scale() * hi);
            Ok(MomentOutcome {
                value: Complex64::new(2.0 * out.value, 0.0),
                error: 2.0 * out.error + 2.0 * tail,
                evals: out.evals,
            })
        }
    }
}

/// Resonance-seeded peak search: sample |R| on a uniform grid, take the top
/// local maxima, then refine |zeta(sigma + it)| by golden section around
/// each seed. Returns (argmax, max).
pub fn peak_search<F: Fn(f64) -> f64>(
    amplitude: F,
    refine: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    step: f64,
    top_k: usize,
) -> (f64, f64) {
    let n = ((hi - lo) / step) as usize;
    let mut vals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        vals.push(amplitude(lo + i as f64 * step));
    }
    let mut peaks: Vec<(f64, usize)> = Vec::new();
    for i in 1..n {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
            peaks.push((vals[i], i));
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    peaks.truncate(top_k.max(1));
    let mut best = (lo, f64::NEG_INFINITY);
    for &(_, i) in &peaks {
        let center = lo + i as f64 * step;
        let (arg, val) = golden_max(
            refine,
            (center - step).max(lo),
            (center + step).min(hi),
            48,
        );
        if val > best.1 {
            best = (arg, val);
        }
    }
    best
}

/// Configuration for the full 1-line measurement pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneLineConfig {
    pub t_big: f64,
    pub beta: f64,
    pub c: f64,
    pub b_override: Option<f64>,
    pub grid_step: f64,
    pub top_peaks: usize,
    pub csv_points: usize,
    pub quad: QuadratureConfig,
    pub eval: EvalConfig,
}

impl Default for OneLineConfig {
    fn default() -> Self {
        OneLineConfig {
            t_big: 2000.0,
            beta: 0.5,
            c: -2.6,
            b_override: None,
            grid_step: 0.05,
            top_peaks: 32,
            csv_points: 2048,
            quad: QuadratureConfig::with_tols(1e-9, 1e-7),
            eval: EvalConfig::default(),
        }
    }
}

/// The 1-line pipeline: measured |M2|/M1 against the theoretical
/// e^gamma (loglog T + logloglog T + c) reference, a resonance-seeded
/// search for the actual maximum of |zeta(1+it)| on [T^beta, T], and the
/// exact-inequality chain max >= |M2|/M1 within the quadrature budget.
pub fn one_line_pipeline(cfg: &OneLineConfig, table: &PrimeTable) -> Result<RunReport> {
    let started = std::time::Instant::now();
    let r = match cfg.b_override {
        Some(b) => build_resonator_with_b(cfg.t_big, cfg.beta, cfg.c, b, table)?,
        None => build_resonator(cfg.t_big, cfg.beta, cfg.c, table)?,
    };
    let ctx = MomentContext {
        quad: cfg.quad,
        eval: cfg.eval,
        table: Some(table),
    };
    let m1 = weighted_moment(&r, Moment::M1, &ctx)?;
    let m2 = weighted_moment(&r, Moment::M2, &ctx)?;
    let ratio = m2.value.norm() / m1.value.re;
    let eps_q = (m2.error + ratio * m1.error) / m1.value.re;

    let log2t = cfg.t_big.ln().ln();
    let log3t = log2t.ln();
    let theory = EXP_GAMMA * (log2t + log3t + cfg.c);

    // Peak search over [T^beta, T].
    let lo = cfg.t_big.powf(cfg.beta);
    let ev = ZetaEvaluator::new(1.0, cfg.t_big, &cfg.eval)?;
    let refine = |t: f64| ev.eval(t).map(|z| z.norm()).unwrap_or(f64::NEG_INFINITY);
    let (argmax, max_zeta) = peak_search(
        |t| r.eval(t).norm(),
        &refine,
        lo,
        cfg.t_big,
        cfg.grid_step,
        cfg.top_peaks,
    );

    let mut report = RunReport::new(
        "resonance-1line",
        serde_json::to_value(cfg).map_err(|e| ZrlError::Config(e.to_string()))?,
    );
    report.push(CheckRecord::info("b_param", r.b_param()));
    report.push(CheckRecord::info("x_cutoff", r.x_cutoff()));
    report.push(CheckRecord::info("resonator_primes", r.primes().len() as f64));
    report.push(CheckRecord::info("r_at_zero", r.peak()));
    let ls = r.log_sup();
    report.push(CheckRecord::new(
        "log_sup_vs_b_log_t",
        ls.value,
        ls.comparator,
        Relation::Info,
        0.0,
    ));
    let sa = r.sum_a_squared();
    report.push(CheckRecord::new(
        "sum_a_squared_identity",
        sa.log_direct,
        sa.log_expansion,
        Relation::Approx,
        1e-10,
    ));
    let gr = r.gamma_ratio_bound();
    report.push(CheckRecord::new(
        "gamma_ratio_vs_reference",
        gr.value,
        gr.reference.unwrap_or(0.0),
        Relation::Info,
        0.0,
    ));
    report.push(CheckRecord::info("m1", m1.value.re));
    report.push(CheckRecord::info(
        "m2",
        Measured::Complex {
            re: m2.value.re,
            im: m2.value.im,
        },
    ));
    report.push(CheckRecord::info("quadrature_budget", eps_q));
    report.push(CheckRecord::new(
        "ratio_m2_m1_vs_theory",
        ratio,
        theory,
        Relation::Info,
        0.0,
    ));
    report.push(CheckRecord::info("argmax_t", argmax));
    report.push(CheckRecord::new(
        "max_zeta_ge_ratio",
        max_zeta,
        ratio,
        Relation::Ge,
        eps_q,
    ));
    report.push(CheckRecord::new(
        "max_zeta_sanity_band",
        max_zeta,
        0.8 * EXP_GAMMA * log2t,
        Relation::Ge,
        0.0,
    ));
    report.push(CheckRecord::new(
        "exclusion_exponent",
        r.b_param() * 4.0f64.ln() - (1.0 - cfg.beta),
        0.0,
        Relation::Le,
        0.0,
    ));

    // Plot series: decimated grid with direct zeta values.
    let n = cfg.csv_points.clamp(2, 1 << 20);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let t = lo + (cfg.t_big - lo) * i as f64 / (n - 1) as f64;
        let abs_r = r.eval(t).norm();
        let abs_z = ev.eval(t)?.norm();
        rows.push(vec![t, abs_r, abs_z]);
    }
    report.series.insert(
        "resonance".into(),
        Series {
            columns: vec!["t".into(), "abs_R".into(), "abs_zeta".into()],
            rows,
        },
    );
    report.timing_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primes::PrimeTable;
    use crate::quad::integrate_complex;

    fn table() -> PrimeTable {
        PrimeTable::sieve(10_000).unwrap()
    }

    #[test]
    fn build_matches_hand_arithmetic() {
        let t = table();
        let r = build_resonator(1e4, 0.5, -2.5, &t).unwrap();
        let (lo, hi) = b_window(0.5, -2.5).unwrap();
        assert!((lo - 0.22313).abs() < 1e-5);
        assert!((hi - 0.36067).abs() < 1e-5);
        assert!((r.b_param() - 0.29190).abs() < 1e-5);
        assert!((r.x_cutoff() - 5.9694).abs() < 2e-3);
        assert_eq!(r.primes(), &[2, 3, 5]);
        let ap = r.coefficients();
        assert!((ap[0] - (1.0 - 2.0 / r.x_cutoff())).abs() < 1e-14);
    }

    #[test]
    fn boundary_offsets_are_rejected() {
        let t = table();
        let c_star = admissible_c(0.5).unwrap();
        assert!(matches!(
            build_resonator(1e4, 0.5, c_star, &t),
            Err(ZrlError::Config(_))
        ));
        // marginally above the admissible bound
        assert!(matches!(
            build_resonator(1e4, 0.5, -2.0197, &t),
            Err(ZrlError::Config(_))
        ));
        assert!(build_resonator(1e4, 0.5, -2.6, &t).is_ok());
        assert!(matches!(
            build_resonator(1e4, 1.2, -2.6, &t),
            Err(ZrlError::Domain(_))
        ));
    }

    #[test]
    fn eval_matches_friable_series_oracle() {
        let t = table();
        let r = build_resonator(1e4, 0.5, -2.5, &t).unwrap();
        // R(0) = prod X/p > 0.
        let x = r.x_cutoff();
        let expect0 = (x / 2.0) * (x / 3.0) * (x / 5.0);
        assert!((r.eval(0.0).re - expect0).abs() < 1e-12 * expect0);
        assert!(r.eval(0.0).im.abs() < 1e-12);

        // Brute-force smooth-number series sum_{n in S(X)} a_n n^{it} over
        // exponent triples, two cutoffs as a Cauchy check.
        let ap = r.coefficients();
        let series = |log_cap: f64| {
            let mut acc = Complex64::new(0.0, 0.0);
            let l2 = 2.0f64.ln();
            let l3 = 3.0f64.ln();
            let l5 = 5.0f64.ln();
            let t_val = 1.0f64;
            let mut i = 0;
            while (i as f64) * l2 <= log_cap {
                let mut j = 0;
                while (i as f64) * l2 + (j as f64) * l3 <= log_cap {
                    let mut k = 0;
                    loop {
                        let ln_n = (i as f64) * l2 + (j as f64) * l3 + (k as f64) * l5;
                        if ln_n > log_cap {
                            break;
                        }
                        let coeff = ap[0].powi(i) * ap[1].powi(j) * ap[2].powi(k);
                        let (s, c) = (t_val * ln_n).sin_cos();
                        acc += coeff * Complex64::new(c, s);
                        k += 1;
                    }
                    j += 1;
                }
                i += 1;
            }
            acc
        };
        let s16 = series((1e16f64).ln());
        let s20 = series((1e20f64).ln());
        assert!((s20 - s16).norm() < 5e-7 * s20.norm(), "series not settled");
        let direct = r.eval(1.0);
        assert!(
            (direct - s20).norm() <= 1e-6 * direct.norm(),
            "product {direct} vs series {s20}"
        );
    }

    #[test]
    fn amplitude_bounded_by_peak_and_conjugate_symmetric() {
        let t = table();
        let r = build_resonator(1e4, 0.5, -2.6, &t).unwrap();
        let r0 = r.peak();
        let sup = r.log_sup();
        assert!((r0.ln() - sup.value).abs() < 1e-12 * sup.value.abs().max(1.0));
        let mut state = 1u64;
        for _ in 0..10_000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t_val = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2e4 - 1e4;
            let v = r.eval(t_val);
            assert!(v.norm() <= r0 * (1.0 + 1e-12));
            let conj = r.eval(-t_val);
            assert!((v.conj() - conj).norm() <= 1e-13 * v.norm());
        }
    }

    #[test]
    fn log_sup_small_cases() {
        let t = table();
        // X < 2: empty product, log sup 0.
        let r = FriableResonator::with_cutoff(1.5, &t).unwrap();
        assert_eq!(r.log_sup().value, 0.0);
        assert_eq!(r.peak(), 1.0);
        // primes {2,3,5}: 3 log X - log 30.
        let r = FriableResonator::with_cutoff(6.5, &t).unwrap();
        let expect = 3.0 * 6.5f64.ln() - 30.0f64.ln();
        assert!((r.log_sup().value - expect).abs() < 1e-12);
    }

    #[test]
    fn sum_a_squared_identity_and_band() {
        let t = PrimeTable::sieve(20_000).unwrap();
        // single prime: X in (2, 3).
        let r = FriableResonator::with_cutoff(2.25, &t).unwrap();
        let s = r.sum_a_squared();
        let a: f64 = 1.0 - 2.0 / 2.25;
        assert!((s.log_direct - (-(1.0 - a * a).ln())).abs() < 1e-14);
        assert!((s.log_direct - s.log_expansion).abs() < 1e-12);

        // identity at scale, plus the honest asymptotic band (the exact
        // ratio at X = 1e4 is 1.384; see the chebyshev-gap skew).
        let r = FriableResonator::with_cutoff(1e4, &t).unwrap();
        let s = r.sum_a_squared();
        assert!(
            (s.log_direct - s.log_expansion).abs() <= 1e-10 * s.log_direct,
            "direct {} expansion {}",
            s.log_direct,
            s.log_expansion
        );
        let ratio = s.log_direct / s.comparator;
        assert!(ratio > 0.7 && ratio < 1.45, "ratio {ratio}");
    }

    #[test]
    fn gamma_ratio_three_factor_hand_computation() {
        let t = table();
        let r = build_resonator(1e4, 0.5, -2.5, &t).unwrap();
        let g = r.gamma_ratio_bound();
        let x = r.x_cutoff();
        let hand: f64 = [2.0, 3.0, 5.0]
            .iter()
            .map(|&p| 1.0 / (1.0 - (1.0 - p / x) / p))
            .product();
        assert!((g.value - hand).abs() < 1e-12 * hand);
        // factorization identity
        let rebuilt = g.mertens_factor * g.correction_factor;
        assert!((g.value - rebuilt).abs() < 1e-12 * g.value);
        // trivial window: X <= 2 gives the empty product 1.
        let r = FriableResonator::with_cutoff(1.9, &t).unwrap();
        assert_eq!(r.gamma_ratio_bound().value, 1.0);
        assert!(r.gamma_ratio_bound().reference.is_none());
    }

    #[test]
    fn gamma_ratio_explicit_chain_at_scale() {
        let t = PrimeTable::sieve(20_000).unwrap();
        for x in [1e3, 1e4] {
            let r = FriableResonator::with_cutoff(x, &t).unwrap();
            let g = r.gamma_ratio_bound();
            // Exact chain: value >= e^g log X / (1 + 1/(2 log^2 X)) *
            // exp(-sum p/((p-1) X)).
            let lx = x.ln();
            let mut corr = CompensatedSum::new();
            for &p in r.primes() {
                corr.add(p as f64 / ((p as f64 - 1.0) * x));
            }
            let floor =
                EXP_GAMMA * lx / (1.0 + 0.5 / (lx * lx)) * (-corr.total()).exp();
            assert!(g.value >= floor, "X={x}: {} < {floor}", g.value);
            // explicit-error form of the reference bound
            assert!(g.value >= EXP_GAMMA * (lx - 1.0) - 0.5);
        }
    }

    #[test]
    fn moments_small_t_structure() {
        let t = PrimeTable::sieve(200_000).unwrap();
        let cfg = OneLineConfig {
            t_big: 300.0,
            ..OneLineConfig::default()
        };
        let r = build_resonator(cfg.t_big, cfg.beta, cfg.c, &t).unwrap();
        let ctx = MomentContext {
            quad: QuadratureConfig::with_tols(1e-10, 1e-9),
            eval: EvalConfig::default(),
            table: Some(&t),
        };
        let m1 = weighted_moment(&r, Moment::M1, &ctx).unwrap();
        let i1 = weighted_moment(&r, Moment::I1, &ctx).unwrap();
        let m2 = weighted_moment(&r, Moment::M2, &ctx).unwrap();
        assert!(m1.value.re > 0.0);
        assert!(i1.value.re >= m1.value.re - 1e-9);
        assert!(m2.value.im == 0.0); // exactly real by conjugate pairing
        assert!(m2.error < 1e-3 * m2.value.norm().max(1.0));

        // Dual route: complex quadrature over both halves with the direct
        // evaluator, no interpolation, no symmetry shortcut.
        let ev = ZetaEvaluator::new(1.0, cfg.t_big, &EvalConfig::default()).unwrap();
        let w = r.weight();
        let lo = cfg.t_big.powf(cfg.beta);
        let f = |t: f64| ev.eval(t).unwrap() * r.eval(t).norm_sqr() * w.weight(t);
        let q = QuadratureConfig::with_tols(1e-10, 1e-9).with_hint(0.2);
        let pos = integrate_complex(&f, lo, cfg.t_big, &q).unwrap();
        let neg = integrate_complex(&f, -cfg.t_big, -lo, &q).unwrap();
        let full = pos.value + neg.value;
        assert!(
            (full - m2.value).norm() <= 1e-4 * m2.value.norm(),
            "direct {full} vs line {}",
            m2.value
        );
        // conjugate pairing leaves only quadrature noise in the imaginary part
        assert!(full.im.abs() <= 1e-8 * full.norm());
    }

    #[test]
    fn i2_closed_form_and_domain_errors() {
        // beta = 0.9 keeps Y = exp((log T)^{10/9}) sievable; the admissible
        // window then forces X < 2, so the resonator is the empty product and
        // I2 = int_R zeta(1+it; Y) phi(ts) dt. Every smooth n >= 2 carries a
        // Gaussian factor e^{-(log n / 2s)^2} that is zero to double
        // precision, leaving the exact value sqrt(pi)/s.
        let t = PrimeTable::sieve(10_000).unwrap();
        let r = build_resonator(500.0, 0.9, -4.0, &t).unwrap();
        assert!(r.primes().is_empty());
        let ctx = MomentContext {
            quad: QuadratureConfig::with_tols(1e-9, 1e-8),
            eval: EvalConfig::default(),
            table: Some(&t),
        };
        let i2 = weighted_moment(&r, Moment::I2, &ctx).unwrap();
        let s = r.weight().scale();
        let exact = std::f64::consts::PI.sqrt() / s;
        assert!(
            (i2.value.re - exact).abs() <= 1e-6 * exact,
            "I2 = {} vs closed form {exact}",
            i2.value.re
        );
        assert!(i2.value.im == 0.0);

        // Y beyond the sieve is a table error; no table is a config error.
        let r_half = build_resonator(500.0, 0.5, -2.6, &t).unwrap();
        assert!(matches!(
            weighted_moment(&r_half, Moment::I2, &ctx),
            Err(ZrlError::TableTooSmall { .. })
        ));
        let no_table = MomentContext {
            quad: ctx.quad,
            eval: ctx.eval,
            table: None,
        };
        assert!(weighted_moment(&r, Moment::I2, &no_table).is_err());
    }

    #[test]
    fn pipeline_small_run_chain_holds() {
        let t = PrimeTable::sieve(10_000).unwrap();
        let cfg = OneLineConfig {
            t_big: 300.0,
            grid_step: 0.05,
            top_peaks: 16,
            csv_points: 64,
            ..OneLineConfig::default()
        };
        let report = one_line_pipeline(&cfg, &t).unwrap();
        let find = |name: &str| {
            report
                .checks
                .iter()
                .find(|c| c.name == name)
                .unwrap_or_else(|| panic!("missing {name}"))
        };
        assert!(find("max_zeta_ge_ratio").pass, "chain failed: {report:?}");
        assert!(find("sum_a_squared_identity").pass);
        assert!(find("exclusion_exponent").pass);
        assert!(report.series.contains_key("resonance"));
        assert_eq!(report.series["resonance"].rows.len(), 64);
        // determinism of the whole report
        let again = one_line_pipeline(&cfg, &t).unwrap();
        assert_eq!(report.determinism_hash(), again.determinism_hash());
    }
}
