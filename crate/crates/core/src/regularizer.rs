//! Decomposable regularizers `h(x) = Σ_a θ(x_a)` on the simplex.
//!
//! A [`Kernel`] supplies `θ` and its derivatives. From it we get the choice
//! map `Q(y) = argmax_x {<y, x> - h(x)}`, the convex conjugate `h*`, the
//! Bregman divergence and the Fenchel coupling. Entropy and quadratic kernels
//! have closed-form choice maps (logit and Euclidean projection); any kernel
//! can also go through the generic bisection solver.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual target for the normalizing multiplier.
const LAMBDA_TOL: f64 = 1e-12;
/// Bracket width target when inverting `θ'`.
const INVERSE_TOL: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;
/// Lower end of the grid used to estimate `inf θ''` for custom kernels.
const CONVEXITY_GRID_FLOOR: f64 = 1e-6;
/// Floor applied to boundary coordinates when building preimages for steep kernels.
pub const PREIMAGE_FLOOR: f64 = 1e-12;

/// Named kernels that can appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Entropy,
    Quadratic,
}

/// A kernel function `θ: [0,1] -> R` with `inf θ'' > 0`.
#[derive(Clone)]
pub enum Kernel {
    /// `θ(x) = x ln x`; choice map is the logit map.
    Entropy,
    /// `θ(x) = x²/2`; choice map is the Euclidean projection onto the simplex.
    Quadratic,
    Custom(Arc<CustomKernel>),
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A kernel given by callables. Its choice map always uses the bisection solver.
pub struct CustomKernel {
    name: String,
    theta: ScalarFn,
    theta_prime: ScalarFn,
    theta_second: ScalarFn,
    steep: bool,
    strong_convexity: f64,
    /// `θ'(0)` for non-steep kernels, `-∞` otherwise.
    slope_at_zero: f64,
}

/// Result of a Bregman divergence, which is infinite off the support of a steep kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kernel({})", self.name())
    }
}

impl From<KernelKind> for Kernel {
    fn from(kind: KernelKind) -> Self {
        match kind {
            KernelKind::Entropy => Kernel::Entropy,
            KernelKind::Quadratic => Kernel::Quadratic,
        }
    }
}

impl CustomKernel {
    /// Builds a custom kernel, checking continuity at 0, `inf θ'' > 0` and
    /// that the declared steepness matches `θ'` near 0.
    #[allow(clippy::new_ret_no_self)]
    pub fn new(
        name: impl Into<String>,
        theta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        theta_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        theta_second: impl Fn(f64) -> f64 + Send + Sync + 'static,
        steep: bool,
    ) -> Result<Kernel> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidKernel {
            name: name.clone(),
            reason,
        };

        let at_zero = theta(0.0);
        if !at_zero.is_finite() {
            return Err(invalid("θ(0) is not finite".into()));
        }
        for x in [1e-12, 1e-9, 1e-6] {
            if (theta(x) - at_zero).abs() > 1e3 * x.sqrt() {
                return Err(invalid(format!("θ is not continuous at 0 (θ({x:e}) far from θ(0))")));
            }
        }

        let k = grid_infimum(&theta_second);
        if !(k > 0.0) {
            return Err(invalid(format!("inf θ'' = {k} is not positive")));
        }

        // Steep kernels keep decreasing their slope by a fixed amount per decade.
        let drop = theta_prime(1e-12) - theta_prime(1e-16);
        let looks_steep = !drop.is_finite() || drop > 1e-3;
        if looks_steep != steep {
            return Err(invalid(format!(
                "declared steep = {steep} but θ' near 0 suggests steep = {looks_steep}"
            )));
        }
        let slope_at_zero = if steep {
            f64::NEG_INFINITY
        } else {
            let s = theta_prime(0.0);
            if !s.is_finite() {
                return Err(invalid("non-steep kernel needs a finite θ'(0)".into()));
            }
            s
        };

        Ok(Kernel::Custom(Arc::new(CustomKernel {
            name,
            theta: Box::new(theta),
            theta_prime: Box::new(theta_prime),
            theta_second: Box::new(theta_second),
            steep,
            strong_convexity: k,
            slope_at_zero,
        })))
    }
}

fn grid_infimum(f: &dyn Fn(f64) -> f64) -> f64 {
    const N: usize = 10_000;
    let linear = (0..=N).map(|k| {
        CONVEXITY_GRID_FLOOR + (1.0 - CONVEXITY_GRID_FLOOR) * k as f64 / N as f64
    });
    // Log-spaced points resolve the region near the floor.
    let log = (0..=600).map(|k| 10f64.powf(-6.0 + 6.0 * k as f64 / 600.0));
    linear.chain(log).map(f).fold(f64::INFINITY, f64::min)
}

impl Kernel {
    /// `θ(x) = scale·x²`: non-steep with `K = 2·scale`, solved by bisection.
    pub fn scaled_quadratic(scale: f64) -> Result<Kernel> {
        CustomKernel::new(
            format!("quadratic*{scale}"),
            move |x| scale * x * x,
            move |x| 2.0 * scale * x,
            move |_| 2.0 * scale,
            false,
        )
    }

    /// `θ(x) = x ln x + x²`: steep, `θ'' = 1/x + 2`, so `K = 3`.
    pub fn entropy_plus_quadratic() -> Kernel {
        CustomKernel::new(
            "entropy+quadratic",
            |x| if x > 0.0 { x * x.ln() + x * x } else { 0.0 },
            |x| 1.0 + x.ln() + 2.0 * x,
            |x| 1.0 / x + 2.0,
            true,
        )
        .expect("valid kernel")
    }

    /// The generic-solver twin of a closed-form kernel (same `θ`, bisection choice map).
    pub fn as_generic(&self) -> Kernel {
        match self {
            Kernel::Entropy => CustomKernel::new(
                "entropy(generic)",
                |x| if x > 0.0 { x * x.ln() } else { 0.0 },
                |x| 1.0 + x.ln(),
                |x| 1.0 / x,
                true,
            )
            .expect("valid kernel"),
            Kernel::Quadratic => CustomKernel::new(
                "quadratic(generic)",
                |x| 0.5 * x * x,
                |x| x,
                |_| 1.0,
                false,
            )
            .expect("valid kernel"),
            Kernel::Custom(_) => self.clone(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Kernel::Entropy => "entropy",
            Kernel::Quadratic => "quadratic",
            Kernel::Custom(c) => &c.name,
        }
    }

    pub fn theta(&self, x: f64) -> f64 {
        match self {
            Kernel::Entropy => {
                if x > 0.0 {
                    x * x.ln()
                } else {
                    0.0
                }
            }
            Kernel::Quadratic => 0.5 * x * x,
            Kernel::Custom(c) => (c.theta)(x),
        }
    }

    /// `θ'(x)` on `(0, 1]`; at 0 returns the one-sided limit (`-∞` when steep).
    pub fn theta_prime(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.slope_at_zero();
        }
        match self {
            Kernel::Entropy => 1.0 + x.ln(),
            Kernel::Quadratic => x,
            Kernel::Custom(c) => (c.theta_prime)(x),
        }
    }

    pub fn theta_second(&self, x: f64) -> f64 {
        match self {
            Kernel::Entropy => 1.0 / x,
            Kernel::Quadratic => 1.0,
            Kernel::Custom(c) => (c.theta_second)(x),
        }
    }

    fn slope_at_zero(&self) -> f64 {
        match self {
            Kernel::Entropy => f64::NEG_INFINITY,
            Kernel::Quadratic => 0.0,
            Kernel::Custom(c) => c.slope_at_zero,
        }
    }

    /// Whether `θ'(x) -> -∞` as `x -> 0+`.
    pub fn is_steep(&self) -> bool {
        match self {
            Kernel::Entropy => true,
            Kernel::Quadratic => false,
            Kernel::Custom(c) => c.steep,
        }
    }

    /// `K = inf θ''`, the strong convexity modulus of `h` in the Euclidean norm.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Kernel::Entropy | Kernel::Quadratic => 1.0,
            Kernel::Custom(c) => c.strong_convexity,
        }
    }

    /// `h(x) = Σ_a θ(x_a)`.
    pub fn regularizer(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.theta(v)).sum()
    }

    /// Regularized best response `Q(y)`.
    pub fn choice_map(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        self.choice_map_into(y, &mut out)?;
        Ok(out)
    }

    pub fn choice_map_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_dual(y)?;
        if y.len() != out.len() {
            return Err(Error::DimensionMismatch(format!(
                "output has {} slots for {} scores",
                out.len(),
                y.len()
            )));
        }
        match self {
            Kernel::Entropy => logit_into(y, out),
            Kernel::Quadratic => project_simplex_into(y, out),
            Kernel::Custom(_) => self.bisection_choice_into(y, out)?,
        }
        Ok(())
    }

    /// `Q(y)` through the bisection solver regardless of closed forms.
    pub fn choice_map_generic(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dual(y)?;
        let mut out = vec![0.0; y.len()];
        self.bisection_choice_into(y, &mut out)?;
        Ok(out)
    }

    /// Solves `x_a = clamp₊((θ')⁻¹(y_a - λ))` with `Σ x_a = 1` by bisection on `λ`.
    fn bisection_choice_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = y.len();
        if n == 1 {
            out[0] = 1.0;
            return Ok(());
        }
        let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // At `lo` the top coordinate alone reaches 1; at `hi` every coordinate is at most 1/n.
        let mut lo = y_max - self.theta_prime(1.0);
        let mut hi = y_max - self.theta_prime(1.0 / n as f64);
        let fill = |lambda: f64, out: &mut [f64]| -> Result<f64> {
            let mut sum = 0.0;
            for (x, &ya) in out.iter_mut().zip(y) {
                *x = self.inverse_slope(ya - lambda)?;
                sum += *x;
            }
            Ok(sum)
        };

        let mut residual = f64::INFINITY;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let sum = fill(mid, out)?;
            residual = sum - 1.0;
            if residual.abs() <= LAMBDA_TOL || mid <= lo || mid >= hi {
                break;
            }
            if sum > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if residual.abs() > 1e3 * LAMBDA_TOL {
            return Err(Error::NoConvergence(format!(
                "kernel `{}`: constraint residual {residual:e} after {MAX_BISECTIONS} steps",
                self.name()
            )));
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= sum);
        Ok(())
    }

    /// `(θ')⁻¹(t)` clamped to `[0, 1]`, by bisection on `(0, 1]`.
    fn inverse_slope(&self, t: f64) -> Result<f64> {
        if !self.is_steep() && t <= self.slope_at_zero() {
            return Ok(0.0);
        }
        if t >= self.theta_prime(1.0) {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= INVERSE_TOL {
                return Ok(0.5 * (lo + hi));
            }
            let mid = 0.5 * (lo + hi);
            if self.theta_prime(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoConvergence(format!(
            "kernel `{}`: inverting θ' at {t}",
            self.name()
        )))
    }

    /// A dual point whose image under `Q` is `x`, with boundary coordinates
    /// floored at `floor` for steep kernels.
    pub fn preimage(&self, x: &[f64], floor: f64) -> Vec<f64> {
        x.iter()
            .map(|&v| match self {
                Kernel::Entropy => v.max(floor).ln(),
                Kernel::Quadratic => v,
                Kernel::Custom(_) if self.is_steep() => self.theta_prime(v.max(floor)),
                Kernel::Custom(_) => self.theta_prime(v),
            })
            .collect()
    }

    /// Convex conjugate `h*(y) = <y, Q(y)> - h(Q(y))`.
    pub fn conjugate(&self, y: &[f64]) -> Result<f64> {
        check_dual(y)?;
        if let Kernel::Entropy = self {
            return Ok(log_sum_exp(y));
        }
        let x = self.choice_map(y)?;
        Ok(dot(y, &x) - self.regularizer(&x))
    }

    /// `D_h(p, x) = h(p) - h(x) - h'(x; p - x)`.
    pub fn bregman(&self, p: &[f64], x: &[f64]) -> Result<Divergence> {
        check_same_len(p, x)?;
        check_simplex(p, "p")?;
        check_simplex(x, "x")?;
        let mut total = 0.0;
        for (&pa, &xa) in p.iter().zip(x) {
            if xa <= 0.0 {
                if pa > 0.0 {
                    if self.is_steep() {
                        return Ok(Divergence::Infinite);
                    }
                    total += self.theta(pa) - self.theta(0.0) - self.slope_at_zero() * pa;
                }
                continue;
            }
            total += match self {
                Kernel::Entropy if pa > 0.0 => pa * (pa / xa).ln() - pa + xa,
                Kernel::Entropy => xa,
                _ => self.theta(pa) - self.theta(xa) - self.theta_prime(xa) * (pa - xa),
            };
        }
        Ok(Divergence::Finite(total))
    }

    /// Fenchel coupling `F_h(p, y) = h(p) + h*(y) - <y, p>`.
    pub fn fenchel(&self, p: &[f64], y: &[f64]) -> Result<f64> {
        check_same_len(p, y)?;
        check_simplex(p, "p")?;
        check_dual(y)?;
        // F is invariant under y -> y + c·1; shifting keeps the terms small.
        let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = y.iter().map(|v| v - top).collect();
        Ok(self.regularizer(p) + self.conjugate(&shifted)? - dot(&shifted, p))
    }
}

fn logit_into(y: &[f64], out: &mut [f64]) {
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (x, &v) in out.iter_mut().zip(y) {
        *x = (v - top).exp();
        sum += *x;
    }
    out.iter_mut().for_each(|x| *x /= sum);
}

/// Euclidean projection onto the simplex by sort-and-threshold.
fn project_simplex_into(y: &[f64], out: &mut [f64]) {
    out.copy_from_slice(y);
    out.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in out.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    for (x, &v) in out.iter_mut().zip(y) {
        *x = (v - tau).max(0.0);
    }
}

pub(crate) fn log_sum_exp(y: &[f64]) -> f64 {
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + y.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dual(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::DimensionMismatch("empty score vector".into()));
    }
    if let Some(a) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score component {a} is {}", y[a])));
    }
    Ok(())
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn check_simplex(x: &[f64], name: &str) -> Result<()> {
    crate::game::validate_simplex(x).map_err(|e| Error::InvalidProfile(format!("{name}: {e}")))
}

/// Per-player score vectors, one entry per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualVector {
    pub scores: Vec<Vec<f64>>,
}
