//! Test-side reference implementations, written independently of the library.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Logit without any overflow protection; fine for moderate scores.
pub fn logit_oracle(y: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

/// Euclidean projection onto the simplex by bisection on the threshold τ
/// in `Σ max(y_a − τ, 0) = 1`.
pub fn projection_oracle(y: &[f64]) -> Vec<f64> {
    let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (top - 1.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = y.iter().map(|v| (v - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

fn objective(theta: &dyn Fn(f64) -> f64, y: &[f64; 3], x: [f64; 3]) -> f64 {
    (0..3).map(|a| y[a] * x[a] - theta(x[a])).sum()
}

/// Maximizer of `<y, x> − Σ θ(x_a)` over the 3-simplex grid with spacing `1/m`.
/// For each `x_0` the objective is concave in `x_1`, so a discrete ternary
/// search over `x_1` finds the row maximum.
pub fn grid_argmax_ternary(theta: &dyn Fn(f64) -> f64, y: &[f64; 3], m: usize) -> [f64; 3] {
    let h = 1.0 / m as f64;
    let point = |i: usize, j: usize| {
        let x0 = i as f64 * h;
        let x1 = j as f64 * h;
        [x0, x1, (1.0 - x0 - x1).max(0.0)]
    };
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for i in 0..=m {
        let f = |j: usize| objective(theta, y, point(i, j));
        let (mut lo, mut hi) = (0usize, m - i);
        while hi - lo > 2 {
            let a = lo + (hi - lo) / 3;
            let b = hi - (hi - lo) / 3;
            if f(a) < f(b) {
                lo = a + 1;
            } else {
                hi = b;
            }
        }
        for j in lo..=hi {
            let v = f(j);
            if v > best.0 {
                best = (v, point(i, j));
            }
        }
    }
    best.1
}

/// Exhaustive version of [`grid_argmax_ternary`].
pub fn grid_argmax_brute(theta: &dyn Fn(f64) -> f64, y: &[f64; 3], m: usize) -> [f64; 3] {
    let h = 1.0 / m as f64;
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let x0 = i as f64 * h;
            let x1 = j as f64 * h;
            let x = [x0, x1, (1.0 - x0 - x1).max(0.0)];
            let v = objective(theta, y, x);
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    best.1
}

/// Uniform point on the simplex (normalized exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn random_scores<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sample mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Reference `max_a Σ_n u(a; X_{-i,n}) − Σ_n u(X_n)` for a bimatrix game,
/// computed from the row player's or column player's matrix directly.
pub fn bimatrix_regret(m: &[[f64; 2]; 2], player: usize, history: &[[[f64; 2]; 2]]) -> f64 {
    let mut fixed = [0.0; 2];
    let mut realized = 0.0;
    for x in history {
        let (own, other) = (x[player], x[1 - player]);
        for a in 0..2 {
            let mut u = 0.0;
            for b in 0..2 {
                let entry = if player == 0 { m[a][b] } else { m[b][a] };
                u += other[b] * entry;
            }
            fixed[a] += u;
            realized += own[a] * u;
        }
    }
    fixed[0].max(fixed[1]) - realized
}
