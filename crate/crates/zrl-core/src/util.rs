//! Small numeric helpers shared across modules.

use num_complex::Complex64;

/// Euler's constant gamma.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// exp(gamma), the constant in Mertens' theorem and the 1-line bounds.
pub const EXP_GAMMA: f64 = 1.781_072_417_990_198;

/// Neumaier-compensated accumulator. Summation order is the caller's
/// responsibility; every pipeline that feeds this uses a fixed order so
/// results are bit-stable across runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator (independent real/imaginary parts).
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn total(&self) -> Complex64 {
        Complex64::new(self.re.total(), self.im.total())
    }
}

/// `n` points spaced geometrically on `(a, b]`, endpoint included.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 1);
    let (la, lb) = (a.ln(), b.ln());
    (1..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                (la + (lb - la) * i as f64 / n as f64).exp()
            }
        })
        .collect()
}

/// Golden-section maximization of `f` on `[a, b]`. Deterministic; returns
/// `(argmax, max)` after `iters` shrink steps.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Sine integral Si(x) = \int_0^x sin(t)/t dt.
///
/// Power series up to |x| = 20 (alternating, worst-case cancellation there
/// costs ~1e-10 absolute), asymptotic expansion beyond.
pub fn sine_integral(x: f64) -> f64 {
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x <= 20.0 {
        // sum x^(2k+1) (-1)^k / ((2k+1) (2k+1)!)
        let mut term = x;
        let mut sum = CompensatedSum::new();
        sum.add(x);
        let mut k = 1u32;
        loop {
            let m = 2.0 * k as f64;
            term *= -x * x / (m * (m + 1.0));
            let contrib = term / (m + 1.0);
            sum.add(contrib);
            if contrib.abs() < 1e-18 * sum.total().abs().max(1.0) || k > 60 {
                break;
            }
            k += 1;
        }
        sum.total()
    } else {
        // Si(x) = pi/2 - f(x) cos x - g(x) sin x with the usual asymptotic
        // auxiliary series; truncated where terms start growing.
        let x2 = x * x;
        let mut f = 0.0;
        let mut g = 0.0;
        let mut num = 1.0; // (2k)! / x^{2k}
        let mut k = 0u32;
        loop {
            let term_f = num / x; // (2k)!/x^{2k+1}
            let term_g = num * (2.0 * k as f64 + 1.0) / x2; // (2k+1)!/x^{2k+2}
            if k % 2 == 0 {
                f += term_f;
                g += term_g;
            } else {
                f -= term_f;
                g -= term_g;
            }
            let next = num * (2.0 * k as f64 + 1.0) * (2.0 * k as f64 + 2.0) / x2;
            if next > num || k >= 8 {
                break;
            }
            num = next;
            k += 1;
        }
        std::f64::consts::FRAC_PI_2 - f * x.cos() - g * x.sin()
    }
}
