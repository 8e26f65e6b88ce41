//! Uplink Monte-Carlo with pilot-based estimation, MR combining over the
//! serving set and ML detection.
//!
//! Every AP estimates the channels of the UEs it serves from the pilot
//! observation of their sequence, which also carries every co-served UE on
//! the same pilot. The central unit removes the data of the other UEs using
//! those estimates, so each co-served UE leaves its estimation error
//! `h − ĥ` behind as interference. Channels are block-fading over `τ_c`
//! channel uses; the `τ_c − τ_p` data symbols of a block share one draw.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ser_theory, Constellation, EffectiveGainParams, ResidualMode};
use crate::association::AssociationMatrix;
use crate::channel::{cn_vector, CMat, CVec, SpatialCorrelation};
use crate::error::{Error, Result};
use crate::rng::{cn, cn01, stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    #[default]
    Estimated,
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    #[default]
    Rayleigh,
    /// Deterministic `h = √β R^{1/2} 1`; with perfect CSI this is AWGN.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SerOptions {
    pub csi: CsiMode,
    pub fading: FadingMode,
    pub residual: ResidualMode,
}

/// Everything the uplink simulation needs about the network.
#[derive(Debug, Clone)]
pub struct UplinkModel {
    pub l: usize,
    pub k: usize,
    pub n: usize,
    pub tau_p: usize,
    pub tau_c: usize,
    /// UE power in watts.
    pub p: f64,
    /// Linear gains, row-major L×K.
    pub beta: Vec<f64>,
    /// Normalized spatial correlation per link; `None` means identity.
    pub corr: Option<Vec<SpatialCorrelation>>,
    pub assoc: AssociationMatrix,
    pub pilots: Vec<usize>,
}

impl UplinkModel {
    fn beta(&self, l: usize, k: usize) -> f64 {
        self.beta[l * self.k + k]
    }

    fn corr(&self, l: usize, k: usize) -> SpatialCorrelation {
        match &self.corr {
            Some(c) => c[l * self.k + k].clone(),
            None => SpatialCorrelation::identity(self.n),
        }
    }
}

/// Noise power that puts UE `ue`'s strongest link at SNR `rho`.
pub fn noise_for_snr(model: &UplinkModel, ue: usize, rho: f64) -> f64 {
    let bmax = (0..model.l).map(|l| model.beta(l, ue)).fold(0.0, f64::max);
    model.p * bmax / rho
}

/// Per-AP precomputation for one evaluated UE.
struct ApPlan {
    ap: usize,
    /// Co-served UEs at this AP (the evaluated UE included).
    ues: Vec<usize>,
    roots: Vec<CMat>,
    /// Estimator matrices `√(τp) β R Ψ⁻¹`, aligned with `ues`.
    est: Vec<CMat>,
    /// Pilot groups as indices into `ues`.
    groups: Vec<Vec<usize>>,
    me: usize,
}

fn plan(model: &UplinkModel, ue: usize, sigma2: f64) -> Result<Vec<ApPlan>> {
    let serving = model.assoc.serving(ue);
    if serving.is_empty() {
        return Err(Error::EmptyServingSet(ue));
    }
    let n = model.n;
    let tp = model.tau_p as f64 * model.p;
    serving
        .into_iter()
        .map(|l| {
            let ues = model.assoc.served(l);
            let corrs: Vec<SpatialCorrelation> = ues.iter().map(|&k| model.corr(l, k)).collect();
            let covs: Vec<CMat> =
                ues.iter().zip(&corrs).map(|(&k, c)| &c.r * Complex64::new(model.beta(l, k), 0.0)).collect();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut seen: Vec<usize> = Vec::new();
            for (i, &k) in ues.iter().enumerate() {
                let t = model.pilots[k];
                match seen.iter().position(|&s| s == t) {
                    Some(g) => groups[g].push(i),
                    None => {
                        seen.push(t);
                        groups.push(vec![i]);
                    }
                }
            }
            let mut est = vec![CMat::zeros(n, n); ues.len()];
            for g in &groups {
                let mut psi = CMat::identity(n, n) * Complex64::new(sigma2, 0.0);
                for &i in g {
                    psi += &covs[i] * Complex64::new(tp, 0.0);
                }
                let inv = psi.try_inverse().ok_or(Error::Singular("pilot covariance"))?;
                for &i in g {
                    est[i] = &covs[i] * &inv * Complex64::new(tp.sqrt(), 0.0);
                }
            }
            let me = ues.iter().position(|&k| k == ue).expect("serving AP serves the UE");
            Ok(ApPlan { ap: l, ues, roots: corrs.into_iter().map(|c| c.sqrt).collect(), est, groups, me })
        })
        .collect()
}

/// Effective per-block quantities seen by the combiner of one UE.
struct Block {
    /// `√p Σ ĥᴴ h`, the true gain on the wanted symbol.
    signal: Complex64,
    /// `√p Σ ‖ĥ‖²`, the gain the detector assumes.
    assumed: f64,
    noise_var: f64,
    /// Leakage coefficient per interfering UE.
    leak: Vec<(usize, Complex64)>,
}

fn draw_block<R: Rng>(model: &UplinkModel, plans: &[ApPlan], sigma2: f64, opts: &SerOptions, rng: &mut R) -> Block {
    let sp = model.p.sqrt();
    let g = (model.tau_p as f64 * model.p).sqrt();
    let mut b = Block { signal: Complex64::new(0.0, 0.0), assumed: 0.0, noise_var: 0.0, leak: Vec::new() };
    for ap in plans {
        let h: Vec<CVec> = ap
            .ues
            .iter()
            .zip(&ap.roots)
            .map(|(&k, root)| {
                let beta = model.beta(ap.ap, k);
                let w = match opts.fading {
                    FadingMode::Rayleigh => CVec::from_fn(model.n, |_, _| cn01(rng)),
                    FadingMode::Static => CVec::from_element(model.n, Complex64::new(1.0, 0.0)),
                };
                root * w * Complex64::new(beta.sqrt(), 0.0)
            })
            .collect();
        let h_hat: Vec<CVec> = match opts.csi {
            CsiMode::Perfect => h.clone(),
            CsiMode::Estimated => {
                let mut out = vec![CVec::zeros(model.n); ap.ues.len()];
                for grp in &ap.groups {
                    let mut y = cn_vector(rng, model.n, sigma2);
                    for &i in grp {
                        y += &h[i] * Complex64::new(g, 0.0);
                    }
                    for &i in grp {
                        out[i] = &ap.est[i] * &y;
                    }
                }
                out
            }
        };
        let mine = &h_hat[ap.me];
        let e = mine.norm_squared();
        b.signal += mine.dotc(&h[ap.me]) * sp;
        b.assumed += e * sp;
        b.noise_var += e * sigma2;
        if opts.csi == CsiMode::Estimated {
            for (i, &k) in ap.ues.iter().enumerate() {
                if i == ap.me {
                    continue;
                }
                let c = mine.dotc(&(&h[i] - &h_hat[i])) * sp;
                match b.leak.iter_mut().find(|(kk, _)| *kk == k) {
                    Some((_, v)) => *v += c,
                    None => b.leak.push((k, c)),
                }
            }
        }
    }
    b
}

/// Counts symbol errors of UE `ue` over `n_symbols` at strongest-link SNR
/// `rho`. Returns `(errors, symbols)`.
pub fn simulate_ue<R: Rng>(
    model: &UplinkModel,
    ue: usize,
    c: &Constellation,
    rho: f64,
    n_symbols: u64,
    opts: &SerOptions,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let sigma2 = noise_for_snr(model, ue, rho);
    let plans = plan(model, ue, sigma2)?;
    let per_block = (model.tau_c - model.tau_p).max(1) as u64;
    let m = c.m();
    let mut errors = 0;
    let mut done = 0;
    while done < n_symbols {
        let blk = draw_block(model, &plans, sigma2, opts, rng);
        let count = per_block.min(n_symbols - done);
        for _ in 0..count {
            let idx = rng.random_range(0..m);
            let mut z = blk.signal * c.points[idx] + cn(rng, blk.noise_var);
            for (_, coef) in &blk.leak {
                z += coef * c.points[rng.random_range(0..m)];
            }
            if c.detect(z, blk.assumed) != idx {
                errors += 1;
            }
        }
        done += count;
    }
    Ok((errors, n_symbols))
}

/// Links and sizing used by the closed form for one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct TheorySet {
    pub aps: Vec<usize>,
    /// The `X` that enters α and the residual term.
    pub x: usize,
}

/// Closed-form SER of UE `ue` at strongest-link SNR `rho`. The formula's σ²
/// is the per-real-dimension noise variance, half the complex noise power
/// used by the simulation.
pub fn theory_for_ue(
    model: &UplinkModel,
    ue: usize,
    set: &TheorySet,
    c: &Constellation,
    rho: f64,
    mode: ResidualMode,
) -> Result<super::SerTheory> {
    if set.aps.is_empty() {
        return Err(Error::EmptyServingSet(ue));
    }
    let sigma2 = noise_for_snr(model, ue, rho) / 2.0;
    let betas: Vec<f64> = set.aps.iter().map(|&l| model.beta(l, ue)).collect();
    let params = EffectiveGainParams::new(&betas, model.p, model.tau_p, set.x, model.k, sigma2, mode);
    ser_theory(c, &params.alpha, sigma2, params.residual(mode), model.n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub snr_db: f64,
    pub ser_theory: f64,
    /// Mean of the unclamped per-UE closed forms.
    pub ser_theory_raw: f64,
    pub ser_mc: f64,
    pub mc_symbols: u64,
    /// Half-width of the 95% Wilson interval.
    pub ci95: f64,
}

pub fn wilson_halfwidth(errors: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = z * z;
    z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
}

/// Mean SER over `ues` across an SNR grid (dB), with the closed form for
/// each UE's `TheorySet`. Work items run in parallel on independent
/// streams keyed by `(modulation, grid index, UE)` so results do not depend
/// on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn ser_curve(
    model: &UplinkModel,
    ues: &[usize],
    sets: &[TheorySet],
    c: &Constellation,
    grid_db: &[f64],
    n_symbols: u64,
    seed: u64,
    opts: &SerOptions,
) -> Result<Vec<SerPoint>> {
    if ues.is_empty() {
        return Err(Error::invalid("ues", "no UE to evaluate"));
    }
    let mod_id = c.modulation as u64;
    let tasks: Vec<(usize, usize)> = (0..grid_db.len()).flat_map(|g| (0..ues.len()).map(move |u| (g, u))).collect();
    let results: Vec<Result<(u64, u64, super::SerTheory)>> = tasks
        .par_iter()
        .map(|&(g, u)| {
            let rho = 10f64.powf(grid_db[g] / 10.0);
            let ue = ues[u];
            let idx = (mod_id << 40) | ((g as u64) << 20) | ue as u64;
            let mut rng = stream(seed, Purpose::MonteCarlo, idx);
            let (e, n) = simulate_ue(model, ue, c, rho, n_symbols, opts, &mut rng)?;
            let th = theory_for_ue(model, ue, &sets[u], c, rho, opts.residual)?;
            Ok((e, n, th))
        })
        .collect();
    let results: Vec<(u64, u64, super::SerTheory)> = results.into_iter().collect::<Result<_>>()?;
    let nu = ues.len() as f64;
    Ok(grid_db
        .iter()
        .enumerate()
        .map(|(g, &snr_db)| {
            let chunk = &results[g * ues.len()..(g + 1) * ues.len()];
            let errors: u64 = chunk.iter().map(|r| r.0).sum();
            let symbols: u64 = chunk.iter().map(|r| r.1).sum();
            SerPoint {
                snr_db,
                ser_theory: chunk.iter().map(|r| r.2.ser).sum::<f64>() / nu,
                ser_theory_raw: chunk.iter().map(|r| r.2.raw).sum::<f64>() / nu,
                ser_mc: errors as f64 / symbols as f64,
                mc_symbols: symbols,
                ci95: wilson_halfwidth(errors, symbols),
            }
        })
        .collect())
}
