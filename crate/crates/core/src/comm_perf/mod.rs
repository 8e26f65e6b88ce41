//! Symbol error rate: Gaussian tail kernels, conditional and unconditional
//! pairwise error probabilities, the closed-form SER and its Monte-Carlo
//! counterpart.

mod mc;

pub use mc::{
    noise_for_snr, ser_curve, simulate_ue, theory_for_ue, wilson_halfwidth, CsiMode, FadingMode, SerOptions,
    SerPoint, TheorySet, UplinkModel,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{psd_sqrt, CMat, CVec};
use crate::error::{Error, Result};
use crate::rng::cn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }
}

/// Unit-energy symbol alphabet. QPSK points are listed in Gray order.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub modulation: Modulation,
    pub points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let points = match modulation {
            Modulation::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Modulation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                vec![
                    Complex64::new(a, a),
                    Complex64::new(-a, a),
                    Complex64::new(-a, -a),
                    Complex64::new(a, -a),
                ]
            }
        };
        Constellation { modulation, points }
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.m() as f64
    }

    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d
    }

    /// Index of the nearest point to `z / gain`, i.e. ML detection of `z`
    /// for a known real gain.
    pub fn detect(&self, z: Complex64, gain: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p * gain).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Gaussian tail probability.
pub fn q_exact(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Two-exponential approximation of the Gaussian tail.
pub fn q_approx(x: f64) -> f64 {
    (-x * x / 2.0).exp() / 12.0 + (-2.0 * x * x / 3.0).exp() / 4.0
}

/// Conditional pairwise error probability for stacked estimate `h_hat`
/// (rows: receive dimensions, columns: UEs), symbol difference `delta` and
/// total disturbance covariance `sigma`.
pub fn cpep(h_hat: &CMat, delta: &CVec, sigma: &CMat) -> Result<f64> {
    if delta.iter().all(|d| d.norm() == 0.0) {
        return Err(Error::IdenticalSymbols);
    }
    let v = h_hat * delta;
    let quad = v.dotc(&(sigma * &v)).re;
    if quad <= 0.0 {
        return Ok(0.5);
    }
    Ok(q_exact(v.norm_squared() / (2.0 * quad).sqrt()))
}

/// `cpep` for `Sigma = (sigma2 + b2) I`.
pub fn cpep_diagonal(h_hat: &CMat, delta: &CVec, sigma2: f64, b2: f64) -> Result<f64> {
    let n = h_hat.nrows();
    cpep(h_hat, delta, &(CMat::identity(n, n) * Complex64::new(sigma2 + b2, 0.0)))
}

/// MGF of the effective signal strength, `Π_l (1 − t s_l)^(−n)` with
/// `s_l = Σ_k α_lk |Δ_k|²`. Each row of `alphas` is one link.
pub fn mgf_gamma(t: f64, alphas: &[Vec<f64>], deltas: &[Complex64], n: usize) -> Result<f64> {
    let s: Vec<f64> = alphas
        .iter()
        .map(|row| row.iter().zip(deltas).map(|(a, d)| a * d.norm_sqr()).sum())
        .collect();
    mgf_from_strengths(t, &s, n)
}

fn mgf_from_strengths(t: f64, s: &[f64], n: usize) -> Result<f64> {
    let mut log = 0.0;
    for &sl in s {
        let base = 1.0 - t * sl;
        if base <= 0.0 {
            return Err(Error::MgfPole(base));
        }
        log -= n as f64 * base.ln();
    }
    Ok(log.exp())
}

/// Unconditional pairwise error probability
/// `(1/12) M(−1/(4D)) + (1/4) M(−1/(3D))` with `D = 2(σ² + c²)`.
pub fn unpep(alphas: &[Vec<f64>], deltas: &[Complex64], sigma2: f64, c2: f64, n: usize) -> Result<f64> {
    let s: Vec<f64> = alphas
        .iter()
        .map(|row| row.iter().zip(deltas).map(|(a, d)| a * d.norm_sqr()).sum())
        .collect();
    unpep_from_strengths(&s, sigma2, c2, n)
}

fn unpep_from_strengths(s: &[f64], sigma2: f64, c2: f64, n: usize) -> Result<f64> {
    let d = 2.0 * (sigma2 + c2);
    if d == 0.0 {
        let silent = s.iter().all(|&v| v == 0.0);
        return Ok(if silent { 1.0 / 3.0 } else { 0.0 });
    }
    Ok(mgf_from_strengths(-1.0 / (4.0 * d), s, n)? / 12.0 + mgf_from_strengths(-1.0 / (3.0 * d), s, n)? / 4.0)
}

/// Closed-form SER, clamped to [0, 1]; `raw` keeps the unclamped union bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerTheory {
    pub ser: f64,
    pub raw: f64,
}

/// `(1/M) Σ_i Σ_{j≠i} unPEP(Δ^{ij})` for one UE whose serving links have
/// effective variances `alphas`.
pub fn ser_theory(c: &Constellation, alphas: &[f64], sigma2: f64, c2: f64, n: usize) -> Result<SerTheory> {
    let mut raw = 0.0;
    for (i, si) in c.points.iter().enumerate() {
        for (j, sj) in c.points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d2 = (si - sj).norm_sqr();
            let s: Vec<f64> = alphas.iter().map(|a| a * d2).collect();
            raw += unpep_from_strengths(&s, sigma2, c2, n)?;
        }
    }
    raw /= c.m() as f64;
    Ok(SerTheory { ser: raw.clamp(0.0, 1.0), raw })
}

/// Which residual-error power enters the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `c² = σ² K / (τ_p X)`.
    #[default]
    C2,
    /// `b² = σ² X K / τ_p`.
    B2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGainParams {
    /// Effective variance per serving link, in received-power units.
    pub alpha: Vec<f64>,
    pub c2: f64,
    pub b2: f64,
    /// `2(σ² + residual)` for the selected mode.
    pub d: f64,
}

impl EffectiveGainParams {
    /// `betas` are the serving-link gains, `p` the UE power in watts.
    pub fn new(betas: &[f64], p: f64, tau_p: usize, x: usize, k: usize, sigma2: f64, mode: ResidualMode) -> Self {
        let tp = tau_p as f64 * p;
        let alpha = betas.iter().map(|&b| p * tp * b * b / (tp * b + x as f64 * sigma2)).collect();
        let c2 = sigma2 * k as f64 / (tau_p as f64 * x as f64);
        let b2 = sigma2 * x as f64 * k as f64 / tau_p as f64;
        let res = match mode {
            ResidualMode::C2 => c2,
            ResidualMode::B2 => b2,
        };
        EffectiveGainParams { alpha, c2, b2, d: 2.0 * (sigma2 + res) }
    }

    pub fn residual(&self, mode: ResidualMode) -> f64 {
        match mode {
            ResidualMode::C2 => self.c2,
            ResidualMode::B2 => self.b2,
        }
    }
}

/// Inputs of the decision-metric experiment: `J = (ĥΔ)^H (n + Σ_k √p_k h̃_k s_k)`.
#[derive(Debug, Clone)]
pub struct DecisionParams {
    /// Stacked estimates, one column per UE.
    pub h_hat: CMat,
    pub delta: CVec,
    pub sigma2: f64,
    /// Estimation-error covariance per UE.
    pub b: Vec<CMat>,
    pub p: Vec<f64>,
    pub constellation: Constellation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionStats {
    pub mean: Complex64,
    pub var: f64,
    /// Standard error of each component of the mean.
    pub std_err: f64,
}

/// `(ĥΔ)^H (σ² I + Σ_k p_k B_k) (ĥΔ)`.
pub fn decision_variance(params: &DecisionParams) -> f64 {
    let v = &params.h_hat * &params.delta;
    let n = v.len();
    let mut sigma = CMat::identity(n, n) * Complex64::new(params.sigma2, 0.0);
    for (b, p) in params.b.iter().zip(&params.p) {
        sigma += b * Complex64::new(*p, 0.0);
    }
    v.dotc(&(sigma * &v)).re
}

/// Empirical mean and variance of `J` over `n_trials` draws of noise, error
/// vectors and interfering symbols.
pub fn decision_metric_stats<R: Rng + ?Sized>(n_trials: usize, params: &DecisionParams, rng: &mut R) -> Result<DecisionStats> {
    let v = &params.h_hat * &params.delta;
    let nr = v.len();
    let roots: Vec<DMatrix<Complex64>> = params.b.iter().map(psd_sqrt).collect::<Result<_>>()?;
    let m = params.constellation.m();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for _ in 0..n_trials {
        let mut d = DVector::from_fn(nr, |_, _| cn(rng, params.sigma2));
        for (root, p) in roots.iter().zip(&params.p) {
            let s = params.constellation.points[rng.random_range(0..m)];
            let w = DVector::from_fn(nr, |_, _| cn(rng, 1.0));
            d += root * w * (s * p.sqrt());
        }
        let j = v.dotc(&d);
        sum += j;
        sum_sq += j.norm_sqr();
    }
    let nf = n_trials as f64;
    let mean = sum / nf;
    let var = (sum_sq - nf * mean.norm_sqr()) / (nf - 1.0);
    Ok(DecisionStats { mean, var, std_err: (var / 2.0 / nf).sqrt() })
}
