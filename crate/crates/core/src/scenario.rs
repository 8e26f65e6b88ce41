//! Configuration, deployment generation and service-type assignment.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{PathLossParams, SpatialModel};
use crate::error::{Error, Result};
use crate::net_metrics::EnergyModel;
use crate::rng::{self, Purpose};

pub type Position = [f64; 2];

/// Fractions of communication, sensing and JCAS UEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceMix {
    pub com: f64,
    pub sense: f64,
    pub jcas: f64,
}

impl Default for ServiceMix {
    fn default() -> Self {
        ServiceMix { com: 0.24, sense: 0.40, jcas: 0.36 }
    }
}

/// Every scalar parameter of a simulation. Powers are in dBm, angles in
/// degrees, lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Number of APs.
    pub l: usize,
    /// Number of UEs.
    pub k: usize,
    /// Antennas per AP.
    pub n: usize,
    pub tau_p: usize,
    pub tau_c: usize,
    /// Maximum number of APs serving one UE.
    pub x: usize,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    pub area_side: f64,
    /// AP transmit power.
    pub p_t: f64,
    /// UE uplink power, uniform across UEs.
    pub p_k: f64,
    pub p_threshold: f64,
    pub w_c: f64,
    pub w_s: f64,
    pub service_mix: ServiceMix,
    pub pathloss: PathLossParams,
    /// Receiver noise figure in dB.
    pub noise_figure: f64,
    /// Scatterers per km².
    pub clutter_density: f64,
    /// Target RCS variance (m²).
    pub sigma_rcs: f64,
    /// Clutter power scale applied to each scatterer's reflectivity.
    pub sigma_c2: f64,
    pub p_fa: f64,
    pub seed: u64,
    pub spatial: SpatialModel,
    pub energy: EnergyModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            l: 100,
            k: 30,
            n: 5,
            tau_p: 10,
            tau_c: 200,
            x: 5,
            bandwidth: 20e6,
            area_side: 500.0,
            p_t: 36.0,
            p_k: 20.0,
            p_threshold: -65.0,
            w_c: 0.4,
            w_s: 0.6,
            service_mix: ServiceMix::default(),
            pathloss: PathLossParams::default(),
            noise_figure: 7.0,
            clutter_density: 1500.0,
            sigma_rcs: 1.0,
            sigma_c2: 1.0,
            p_fa: 1e-2,
            seed: 1,
            spatial: SpatialModel::Uncorrelated,
            energy: EnergyModel::default(),
        }
    }
}

fn check(cond: bool, field: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

impl SystemConfig {
    /// Parses a scenario document. Unknown keys are rejected and the result is
    /// validated before it is returned.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SystemConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid("scenario", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.k > 0, "k", "must be positive")?;
        check(self.l > self.k, "l", "must exceed k")?;
        check(self.n > 0, "n", "must be positive")?;
        check(self.x > 0 && self.x < self.l, "x", "must satisfy 0 < x < l")?;
        check(self.tau_p > 0, "tau_p", "must be positive")?;
        check(self.tau_p <= self.tau_c, "tau_c", "must be at least tau_p")?;
        check(self.w_c >= 0.0 && self.w_s >= 0.0, "w_c", "weights must be nonnegative")?;
        check((self.w_c + self.w_s - 1.0).abs() <= 1e-12, "w_s", "w_c + w_s must equal 1")?;
        let m = self.service_mix;
        check(
            m.com >= 0.0 && m.sense >= 0.0 && m.jcas >= 0.0,
            "service_mix",
            "fractions must be nonnegative",
        )?;
        check(
            (m.com + m.sense + m.jcas - 1.0).abs() <= 1e-12,
            "service_mix",
            "fractions must sum to 1",
        )?;
        check(self.area_side.is_finite() && self.area_side > 0.0, "area_side", "must be positive")?;
        check(self.bandwidth.is_finite() && self.bandwidth > 0.0, "bandwidth", "must be positive")?;
        for (name, v) in [
            ("p_t", self.p_t),
            ("p_k", self.p_k),
            ("noise_figure", self.noise_figure),
        ] {
            check(v.is_finite(), name, "must be finite")?;
        }
        check(!self.p_threshold.is_nan(), "p_threshold", "must not be NaN")?;
        check(
            self.clutter_density.is_finite() && self.clutter_density >= 0.0,
            "clutter_density",
            "must be nonnegative",
        )?;
        check(self.sigma_rcs >= 0.0, "sigma_rcs", "must be nonnegative")?;
        check(self.sigma_c2 >= 0.0, "sigma_c2", "must be nonnegative")?;
        check(self.p_fa > 0.0 && self.p_fa < 1.0, "p_fa", "must lie in (0, 1)")?;
        self.pathloss.validate()?;
        self.spatial.validate()?;
        self.energy.validate()?;
        Ok(())
    }

    /// Noise power N0 in dBm over the configured bandwidth.
    pub fn noise_dbm(&self) -> f64 {
        crate::channel::noise_power_dbm(self.bandwidth, self.noise_figure)
    }

    /// UE uplink power in watts.
    pub fn p_k_watts(&self) -> f64 {
        dbm_to_watts(self.p_k)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Service requirement of a UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceRequirement {
    Communication,
    Sensing,
    Jcas,
}

impl ServiceRequirement {
    pub fn needs_comm(self) -> bool {
        matches!(self, ServiceRequirement::Communication | ServiceRequirement::Jcas)
    }

    pub fn needs_sensing(self) -> bool {
        matches!(self, ServiceRequirement::Sensing | ServiceRequirement::Jcas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ap {
    pub id: usize,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: usize,
    pub pos: Position,
    pub mu: ServiceRequirement,
    pub p_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub pos: Position,
    pub reflectivity: f64,
}

/// Node positions plus the shadowing realization, which is frozen here so
/// that every stage sees the same channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub aps: Vec<Ap>,
    pub ues: Vec<Ue>,
    pub scatterers: Vec<Scatterer>,
    /// Shadowing in dB, row-major L×K.
    pub shadow_db: Vec<f64>,
}

impl Deployment {
    pub fn l(&self) -> usize {
        self.aps.len()
    }

    pub fn k(&self) -> usize {
        self.ues.len()
    }

    pub fn shadow(&self, l: usize, k: usize) -> f64 {
        self.shadow_db[l * self.k() + k]
    }

    pub fn ues_with(&self, pred: impl Fn(ServiceRequirement) -> bool) -> Vec<usize> {
        self.ues.iter().filter(|u| pred(u.mu)).map(|u| u.id).collect()
    }
}

/// Splits `k` UEs by `mix` with largest-remainder rounding. Ties in the
/// remainder go to the earlier class.
pub fn service_counts(k: usize, mix: &ServiceMix) -> [usize; 3] {
    let fr = [mix.com, mix.sense, mix.jcas];
    let raw: Vec<f64> = fr.iter().map(|f| f * k as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = raw[i].floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(k.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn uniform_pos<R: Rng>(rng: &mut R, side: f64) -> Position {
    [rng.random::<f64>() * side, rng.random::<f64>() * side]
}

pub fn generate_deployment(cfg: &SystemConfig) -> Result<Deployment> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, Purpose::Deployment, 0);
    let side = cfg.area_side;
    let aps: Vec<Ap> = (0..cfg.l).map(|id| Ap { id, pos: uniform_pos(&mut rng, side) }).collect();
    let positions: Vec<Position> = (0..cfg.k).map(|_| uniform_pos(&mut rng, side)).collect();

    let counts = service_counts(cfg.k, &cfg.service_mix);
    let mut labels = Vec::with_capacity(cfg.k);
    labels.extend(std::iter::repeat_n(ServiceRequirement::Communication, counts[0]));
    labels.extend(std::iter::repeat_n(ServiceRequirement::Sensing, counts[1]));
    labels.extend(std::iter::repeat_n(ServiceRequirement::Jcas, counts[2]));
    labels.shuffle(&mut rng);

    let ues = positions
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(id, (pos, mu))| Ue { id, pos, mu, p_k: cfg.p_k })
        .collect();

    let area_km2 = (side / 1000.0).powi(2);
    let n_scat = (cfg.clutter_density * area_km2).round() as usize;
    let scatterers = (0..n_scat)
        .map(|_| Scatterer { pos: uniform_pos(&mut rng, side), reflectivity: 1.0 })
        .collect();

    let mut srng = rng::stream(cfg.seed, Purpose::Shadowing, 0);
    let sigma = cfg.pathloss.shadow_sigma;
    let shadow_db = (0..cfg.l * cfg.k)
        .map(|_| {
            let z: f64 = srng.sample(rand_distr::StandardNormal);
            sigma * z
        })
        .collect();

    Ok(Deployment { aps, ues, scatterers, shadow_db })
}

/// Euclidean distance, clamped below at `d0`.
pub fn distance(a: Position, b: Position, d0: f64) -> f64 {
    let d = (a[0] - b[0]).hypot(a[1] - b[1]);
    d.max(d0)
}
