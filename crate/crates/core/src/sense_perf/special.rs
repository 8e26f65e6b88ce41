//! Modified Bessel function of order zero and the first-order Marcum Q.

/// Switch from the power series to the large-argument expansion.
const ASYMPTOTIC_FROM: f64 = 20.0;

/// Power series Σ (x²/4)^k / (k!)². All terms are positive, so the sum is
/// stable; it stops once a term no longer changes the total.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        let next = sum + term;
        if next == sum {
            return sum;
        }
        sum = next;
        k += 1.0;
    }
}

/// `e^{-x} √(2πx) I₀(x)` from the asymptotic expansion
/// 1 + Σ_k Π_{j≤k} (2j−1)² / (j·8x), summed until terms stop shrinking.
fn i0_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if next.abs() >= term.abs() || sum + next == sum {
            break;
        }
        term = next;
        sum += term;
    }
    sum
}

/// I₀(x) for x ≥ 0. Negative arguments use the even symmetry.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= ASYMPTOTIC_FROM {
        i0_series(x)
    } else {
        x.exp() * i0_asymptotic_scaled(x) / (std::f64::consts::TAU * x).sqrt()
    }
}

/// Exponentially scaled `e^{-x} I₀(x)`, finite for any x.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= ASYMPTOTIC_FROM {
        i0_series(x) * (-x).exp()
    } else {
        i0_asymptotic_scaled(x) / (std::f64::consts::TAU * x).sqrt()
    }
}

fn ln_poisson(j: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mu + j as f64 * mu.ln() - libm::lgamma(j as f64 + 1.0)
}

/// Smallest J > μ with the Chernoff bound e^{−μ}(eμ/J)^J on P(Pois(μ) > J)
/// below `tol`.
fn poisson_cutoff(mu: f64, tol: f64) -> usize {
    if mu == 0.0 {
        return 0;
    }
    let mut j = mu.ceil() as usize + 1;
    loop {
        let jf = j as f64;
        if -mu + jf * (1.0 + mu.ln() - jf.ln()) < tol.ln() {
            return j;
        }
        j += 1;
    }
}

/// First-order Marcum Q function Q₁(a, b) for a, b ≥ 0.
///
/// Uses the Poisson mixture Q₁(a,b) = Σ_j Pois(j; a²/2) · P(Pois(b²/2) ≤ j).
/// The mixture is cut where the Chernoff bound on the remaining Poisson
/// mass drops below 1e-16, which bounds the truncation error since every
/// inner probability is at most 1.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if b == 0.0 {
        return 1.0;
    }
    let mu = 0.5 * a * a;
    let nu = 0.5 * b * b;
    let cutoff = poisson_cutoff(mu, 1e-16);
    let mut inner = 0.0;
    let mut total = 0.0;
    for j in 0..=cutoff {
        inner += ln_poisson(j, nu).exp();
        total += ln_poisson(j, mu).exp() * inner.min(1.0);
    }
    total.clamp(0.0, 1.0)
}
