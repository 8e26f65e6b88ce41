//! Sensing performance: GLRT detection on monostatic echoes, its
//! Rayleigh/Rician envelope analysis and Monte-Carlo checks.
//!
//! Clutter plus noise is treated as white with power σ_φ². Detection happens
//! at the delay-Doppler bin of the target, so the test reduces to a matched
//! filter along the target signature. The filter output is normalized so the
//! disturbance has unit power, and the decision compares its envelope with
//! η = σ_φ √(−ln P_FA). Maximizing Λ = 2 Re{yᴴ Σ⁻¹ Φ s} over the unknown
//! target phase gives twice the same envelope, which is why the threshold is
//! η rather than 2η.

mod special;

pub use special::{bessel_i0, bessel_i0e, marcum_q1};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{clutter_power, AssociationMatrix};
use crate::channel::{array_response, synth_echo, CMat, CVec, EchoParams, RcsModel, SpatialCorrelation, TargetEcho};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scenario::{dbm_to_watts, Deployment, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub p_fa: f64,
    /// Clutter plus noise power σ_φ² = σ_c² + σ_n².
    pub sigma_phi2: f64,
}

impl DetectionConfig {
    pub fn new(p_fa: f64, sigma_phi2: f64) -> Result<Self> {
        if !(p_fa > 0.0 && p_fa < 1.0) {
            return Err(Error::invalid("p_fa", "must be in (0, 1)"));
        }
        if !(sigma_phi2 > 0.0 && sigma_phi2.is_finite()) {
            return Err(Error::invalid("sigma_phi2", "must be > 0"));
        }
        Ok(DetectionConfig { p_fa, sigma_phi2 })
    }
}

/// Result of one detection trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    /// Normalized matched-filter envelope.
    pub statistic: f64,
    pub decision: bool,
    /// Whether a target was present.
    pub h1: bool,
}

pub fn detection_threshold(cfg: &DetectionConfig) -> f64 {
    cfg.sigma_phi2.sqrt() * (-cfg.p_fa.ln()).sqrt()
}

/// Λ = 2 Re{yᴴ Σ⁻¹ Φ s}.
pub fn glrt_statistic(y: &CVec, s: &CVec, sigma: &CMat, phi: &CMat) -> Result<f64> {
    let inv = sigma.clone().try_inverse().ok_or(Error::Singular("clutter covariance"))?;
    Ok(2.0 * y.dotc(&(inv * phi * s)).re)
}

/// Sum of per-AP statistics; each AP contributes `(y, s, Σ, Φ)`.
pub fn glrt_combined(parts: &[(&CVec, &CVec, &CMat, &CMat)]) -> Result<f64> {
    parts.iter().map(|(y, s, sigma, phi)| glrt_statistic(y, s, sigma, phi)).sum()
}

/// Rayleigh envelope density under H₀: (2r/σ_φ²) e^{−r²/σ_φ²}.
pub fn rayleigh_pdf(r: f64, sigma_phi2: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    2.0 * r / sigma_phi2 * (-r * r / sigma_phi2).exp()
}

/// Rician envelope density under H₁ with non-centrality `m`:
/// (2r/σ_φ²) e^{−(r²+m²)/σ_φ²} I₀(2rm/σ_φ²).
pub fn rician_pdf(r: f64, m: f64, sigma_phi2: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    let z = 2.0 * r * m / sigma_phi2;
    // e^{-(r-m)²/σ²} I0e(z) avoids overflow of I₀ for strong targets.
    2.0 * r / sigma_phi2 * (-(r - m).powi(2) / sigma_phi2).exp() * bessel_i0e(z)
}

/// P_d = Q₁(√(2·SCNR), √(−2 ln P_FA)).
pub fn pd_single(scnr: f64, p_fa: f64) -> f64 {
    marcum_q1((2.0 * scnr.max(0.0)).sqrt(), (-2.0 * p_fa.ln()).sqrt())
}

/// Detection with coherent combining over serving APs, i.e. `pd_single` of
/// the summed SCNR.
pub fn pd_aggregate(scnrs: &[f64], p_fa: f64) -> Result<f64> {
    if scnrs.is_empty() {
        return Err(Error::invalid("scnrs", "empty serving set"));
    }
    Ok(pd_single(scnrs.iter().sum(), p_fa))
}

/// Compression applied to the signature in the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    #[default]
    Identity,
    /// Real Gaussian entries with variance 1/N.
    Gaussian,
}

pub fn phi_matrix<R: Rng + ?Sized>(mode: PhiMode, n: usize, rng: &mut R) -> CMat {
    match mode {
        PhiMode::Identity => CMat::identity(n, n),
        PhiMode::Gaussian => {
            let sd = (1.0 / n as f64).sqrt();
            CMat::from_fn(n, n, |_, _| {
                let v: f64 = StandardNormal.sample(rng);
                Complex64::new(sd * v, 0.0)
            })
        }
    }
}

/// Matched filter `w = Σ⁻¹ Φ s`, scaled so the disturbance at its output has
/// unit power.
#[derive(Debug, Clone)]
pub struct Detector {
    w: CVec,
    eta: f64,
}

impl Detector {
    pub fn new(s: &CVec, sigma: &CMat, phi: &CMat, p_fa: f64) -> Result<Self> {
        let inv = sigma.clone().try_inverse().ok_or(Error::Singular("clutter covariance"))?;
        let w = &inv * phi * s;
        let power = w.dotc(&(sigma * &w)).re;
        if !(power > 0.0) {
            return Err(Error::Singular("zero signature"));
        }
        let eta = detection_threshold(&DetectionConfig::new(p_fa, 1.0)?);
        Ok(Detector { w: w / Complex64::new(power.sqrt(), 0.0), eta })
    }

    pub fn threshold(&self) -> f64 {
        self.eta
    }

    /// Normalized complex filter output `wᴴ y`.
    pub fn output(&self, y: &CVec) -> Complex64 {
        self.w.dotc(y)
    }

    pub fn decide(&self, y: &CVec, h1: bool) -> DetectionOutcome {
        let statistic = self.output(y).norm();
        DetectionOutcome { statistic, decision: statistic > self.eta, h1 }
    }
}

/// Single-AP echo setup with white disturbance of unit power, split between
/// diffuse clutter (`clutter_share`) and noise.
#[derive(Debug, Clone)]
pub struct LinkSetup {
    pub params: EchoParams,
    /// Transmitted sensing symbol, steered at the target.
    pub x: CVec,
    /// Target direction used by the filter.
    pub s: CVec,
}

impl LinkSetup {
    /// Echo whose matched-filter SCNR is `scnr` when `sigma_rcs > 0`.
    pub fn new(n: usize, scnr: f64, clutter_share: f64, sigma_rcs: f64, model: RcsModel) -> Self {
        let phi = 0.3;
        let a = array_response(phi, 0.0, n);
        let nf = n as f64;
        let x = a.conjugate() / Complex64::new(nf.sqrt(), 0.0);
        let gain = if sigma_rcs > 0.0 { scnr / (sigma_rcs * nf * nf) } else { 0.0 };
        let share = clutter_share.clamp(0.0, 1.0);
        let params = EchoParams {
            n,
            target: Some(TargetEcho { gain, phi, theta: 0.0, sigma_rcs, model }),
            scatterers: Vec::new(),
            diffuse: (share > 0.0).then(|| (SpatialCorrelation::identity(n), share)),
            noise_power: 1.0 - share,
        };
        LinkSetup { params, x, s: a }
    }

    pub fn without_target(mut self) -> Self {
        self.params.target = None;
        self
    }

    pub fn detector(&self, phi: &CMat, p_fa: f64) -> Result<Detector> {
        let n = self.params.n;
        Detector::new(&self.s, &CMat::identity(n, n), phi, p_fa)
    }
}

/// Detections over `n_trials` dwells of one sensing symbol each.
pub fn link_detection_mc<R: Rng>(setup: &LinkSetup, det: &Detector, n_trials: u64, rng: &mut R) -> u64 {
    let h1 = setup.params.target.as_ref().is_some_and(|t| t.gain > 0.0);
    let xs = [setup.x.clone()];
    (0..n_trials)
        .filter(|_| {
            let y = synth_echo(&setup.params, &xs, rng);
            det.decide(&y[0], h1).decision
        })
        .count() as u64
}

/// Per-link SCNR of UE `ue` on each of its serving APs at reference SCNR
/// `x_ref`. The reference is the clutter-free SCNR of the UE's strongest
/// link with the whole AP power on it; an AP serving `G` UEs gives each a
/// 1/G share, and the actual clutter of the link is added.
pub fn link_scnrs(
    cfg: &SystemConfig,
    dep: &Deployment,
    beta: &[f64],
    assoc: &AssociationMatrix,
    ue: usize,
    x_ref: f64,
) -> Result<Vec<(usize, f64)>> {
    let serving = assoc.serving(ue);
    if serving.is_empty() {
        return Err(Error::EmptyServingSet(ue));
    }
    let k = assoc.k;
    let n0 = dbm_to_watts(cfg.noise_dbm());
    let bmax = (0..assoc.l).map(|l| beta[l * k + ue]).fold(0.0, f64::max);
    Ok(serving
        .into_iter()
        .map(|l| {
            let b = beta[l * k + ue];
            let g = assoc.served(l).len() as f64;
            let (p_c, _) = clutter_power(cfg, dep.aps[l].pos, dep.ues[ue].pos, &dep.scatterers);
            let p_s = x_ref * n0 * (b / bmax).powi(2);
            (l, p_s / (p_c + g * n0))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdRow {
    /// `None` for the mean over all evaluated UEs.
    pub ue: Option<usize>,
    pub scnr_db: f64,
    pub pd_formula: f64,
    pub pd_mc: f64,
    pub n_trials: u64,
    pub p_fa: f64,
}

/// Multi-AP detection of one UE: every serving AP filters its own echo and
/// the outputs are combined with weights √SCNR_l before the envelope test.
fn ue_detection_mc<R: Rng>(n: usize, scnrs: &[f64], p_fa: f64, n_trials: u64, rng: &mut R) -> Result<u64> {
    let setups: Vec<LinkSetup> = scnrs.iter().map(|&s| LinkSetup::new(n, s, 0.5, 1.0, RcsModel::Deterministic)).collect();
    let eye = CMat::identity(n, n);
    let dets: Vec<Detector> = setups.iter().map(|s| s.detector(&eye, p_fa)).collect::<Result<_>>()?;
    let total: f64 = scnrs.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        scnrs.iter().map(|s| (s / total).sqrt()).collect()
    } else {
        vec![(1.0 / scnrs.len() as f64).sqrt(); scnrs.len()]
    };
    let eta = dets[0].threshold();
    let mut hits = 0;
    for _ in 0..n_trials {
        let mut u = Complex64::new(0.0, 0.0);
        for ((setup, det), w) in setups.iter().zip(&dets).zip(&weights) {
            let y = synth_echo(&setup.params, std::slice::from_ref(&setup.x), rng);
            u += det.output(&y[0]) * w;
        }
        if u.norm() > eta {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Detection probability per sensing-capable UE and on average, by formula
/// and by simulation, over a grid of reference SCNRs in dB. Streams depend
/// only on `(seed, grid index, UE)`, so two schemes see the same draws.
#[allow(clippy::too_many_arguments)]
pub fn pd_monte_carlo(
    cfg: &SystemConfig,
    dep: &Deployment,
    beta: &[f64],
    assoc: &AssociationMatrix,
    ues: &[usize],
    grid_db: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<PdRow>> {
    if ues.is_empty() {
        return Err(Error::invalid("ues", "no sensing UE to evaluate"));
    }
    let p_fa = cfg.p_fa;
    let tasks: Vec<(usize, usize)> = (0..grid_db.len()).flat_map(|g| ues.iter().map(move |&u| (g, u))).collect();
    let rows: Vec<Result<PdRow>> = tasks
        .par_iter()
        .map(|&(g, ue)| {
            let x_ref = 10f64.powf(grid_db[g] / 10.0);
            let scnrs: Vec<f64> = link_scnrs(cfg, dep, beta, assoc, ue, x_ref)?.into_iter().map(|p| p.1).collect();
            let mut rng = stream(seed, Purpose::MonteCarlo, (1 << 44) | ((g as u64) << 20) | ue as u64);
            let hits = ue_detection_mc(cfg.n, &scnrs, p_fa, n_trials, &mut rng)?;
            Ok(PdRow {
                ue: Some(ue),
                scnr_db: grid_db[g],
                pd_formula: pd_aggregate(&scnrs, p_fa)?,
                pd_mc: hits as f64 / n_trials as f64,
                n_trials,
                p_fa,
            })
        })
        .collect();
    let rows: Vec<PdRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rows.len() + grid_db.len());
    for (g, chunk) in rows.chunks(ues.len()).enumerate() {
        out.extend_from_slice(chunk);
        let nu = chunk.len() as f64;
        out.push(PdRow {
            ue: None,
            scnr_db: grid_db[g],
            pd_formula: chunk.iter().map(|r| r.pd_formula).sum::<f64>() / nu,
            pd_mc: chunk.iter().map(|r| r.pd_mc).sum::<f64>() / nu,
            n_trials: n_trials * chunk.len() as u64,
            p_fa,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let t = |p: f64, s2: f64| detection_threshold(&DetectionConfig::new(p, s2).unwrap());
        assert!((t((-1f64).exp(), 1.0) - 1.0).abs() < 1e-15);
        assert!((t(0.01, 1.0) - 2.145_966_026_289_347).abs() < 1e-12);
        assert!((t(0.01, 9.0) - 3.0 * t(0.01, 1.0)).abs() < 1e-12);
        let eta = t(0.01, 2.5);
        assert!(((-eta * eta / 2.5).exp() - 0.01).abs() < 1e-12);
        assert!(DetectionConfig::new(1.0, 1.0).is_err());
        assert!(DetectionConfig::new(0.1, 0.0).is_err());
    }

    #[test]
    fn statistic_is_linear() {
        let n = 3;
        let s = array_response(0.2, 0.0, n);
        let sigma = CMat::identity(n, n) * Complex64::new(2.0, 0.0);
        let phi = CMat::identity(n, n);
        let y1 = CVec::from_fn(n, |i, _| Complex64::new(i as f64, 1.0));
        let y2 = CVec::from_fn(n, |i, _| Complex64::new(-1.0, i as f64 * 0.5));
        let f = |y: &CVec| glrt_statistic(y, &s, &sigma, &phi).unwrap();
        assert_eq!(f(&CVec::zeros(n)), 0.0);
        assert!((f(&(&y1 + &y2)) - f(&y1) - f(&y2)).abs() < 1e-12);
        assert!(glrt_statistic(&y1, &s, &CMat::zeros(n, n), &phi).is_err());
    }

    #[test]
    fn pd_identities() {
        assert!((pd_single(0.0, 0.01) - 0.01).abs() < 1e-12);
        assert!(pd_single(1e4, 0.01) > 1.0 - 1e-12);
        assert_eq!(pd_aggregate(&[3.0], 0.1).unwrap(), pd_single(3.0, 0.1));
        assert_eq!(pd_aggregate(&[3.0, 0.0], 0.1).unwrap(), pd_single(3.0, 0.1));
        assert!(pd_aggregate(&[], 0.1).is_err());
        assert!(pd_aggregate(&[3.0, 1.0], 0.1).unwrap() > pd_single(3.0, 0.1));
    }

    #[test]
    fn detector_output_has_target_power() {
        let setup = LinkSetup::new(4, 5.0, 0.3, 1.0, RcsModel::Deterministic);
        let det = setup.detector(&CMat::identity(4, 4), 0.01).unwrap();
        let t = setup.params.target.as_ref().unwrap();
        let sig = crate::channel::target_signature(t, 4, &setup.x);
        assert!((det.output(&sig).norm_sqr() - 5.0).abs() < 1e-12);
    }
}
