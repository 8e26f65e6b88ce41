//! Network-level figures: propagation delay, AP energy, association runtime,
//! clutter exposure and the APs-per-UE sweep.

use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::association::{
    baseline_with_objective, in_lobe, link_quality, mask, optimize, priorities, AssociationMatrix, MaskMatrix,
};
use crate::channel::LinkTable;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scenario::{generate_deployment, Deployment, SystemConfig};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    /// Watts drawn by an AP that serves at least one UE.
    pub p_static: f64,
    /// Extra watts per served UE.
    pub p_per_link: f64,
    pub t_slot: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { p_static: 2.0, p_per_link: 0.2, t_slot: 1e-3 }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("energy.p_static", self.p_static),
            ("energy.p_per_link", self.p_per_link),
            ("energy.t_slot", self.t_slot),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Mean propagation delay d/c over each UE's serving links.
pub fn transmission_delay(links: &LinkTable, a: &AssociationMatrix) -> Result<Vec<f64>> {
    (0..a.k)
        .map(|k| {
            let serving = a.serving(k);
            if serving.is_empty() {
                return Err(Error::EmptyServingSet(k));
            }
            let total: f64 = serving.iter().map(|&l| links.dist[links.idx(l, k)] / SPEED_OF_LIGHT).sum();
            Ok(total / serving.len() as f64)
        })
        .collect()
}

/// Joules spent by active APs over one slot.
pub fn energy_total(a: &AssociationMatrix, model: &EnergyModel) -> f64 {
    (0..a.l)
        .map(|l| a.served(l).len())
        .filter(|&n| n > 0)
        .map(|n| (model.p_static + n as f64 * model.p_per_link) * model.t_slot)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub sua_seconds: f64,
    pub baseline_seconds: f64,
    pub sua_cv: f64,
    pub baseline_cv: f64,
    pub repetitions: usize,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cv(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    if mean > 0.0 {
        var.sqrt() / mean
    } else {
        0.0
    }
}

/// Medians of wall-clock time for the SUA pipeline (links → mask → metrics on
/// unmasked links → priorities → assignment) and for the baseline, which
/// evaluates every link. Runs on the calling thread.
pub fn association_runtime(cfg: &SystemConfig, dep: &Deployment, repetitions: usize) -> Result<RuntimeStats> {
    let reps = repetitions.max(1);
    let mut sua = Vec::with_capacity(reps);
    let mut base = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let links = LinkTable::new(cfg, dep);
        let (m, _) = mask(&links, cfg.p_threshold);
        let s = link_quality(cfg, dep, &links, &m);
        let r = priorities(&s);
        let out = optimize(&s, &r, &m, cfg.tau_p, cfg.x)?;
        sua.push(t.elapsed().as_secs_f64());
        std::hint::black_box(out);

        let t = Instant::now();
        let links = LinkTable::new(cfg, dep);
        let m = MaskMatrix::all(links.l, links.k, true);
        let s = link_quality(cfg, dep, &links, &m);
        let r = priorities(&s);
        let out = baseline_with_objective(&s, &r);
        base.push(t.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    let (sua_cv, baseline_cv) = (cv(&sua), cv(&base));
    Ok(RuntimeStats {
        sua_seconds: median(&mut sua),
        baseline_seconds: median(&mut base),
        sua_cv,
        baseline_cv,
        repetitions: reps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSummary {
    /// `(ap, ue, scatterers in lobe)` for every selected link.
    pub per_link: Vec<(usize, usize, usize)>,
    /// Total over each AP's selected links.
    pub per_ap: Vec<usize>,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

/// Scatterers inside the lobe of every selected link, with the membership
/// rule used for clutter power.
pub fn clutter_counts(cfg: &SystemConfig, dep: &Deployment, a: &AssociationMatrix) -> ClutterSummary {
    let mut per_link = Vec::new();
    let mut per_ap = vec![0; a.l];
    for l in 0..a.l {
        for k in a.served(l) {
            let c = dep
                .scatterers
                .iter()
                .filter(|s| in_lobe(dep.aps[l].pos, dep.ues[k].pos, s.pos, cfg.n))
                .count();
            per_ap[l] += c;
            per_link.push((l, k, c));
        }
    }
    let counts: Vec<usize> = per_link.iter().map(|t| t.2).collect();
    let mean = if counts.is_empty() { 0.0 } else { counts.iter().sum::<usize>() as f64 / counts.len() as f64 };
    ClutterSummary {
        per_link,
        per_ap,
        mean,
        min: counts.iter().copied().min().unwrap_or(0),
        max: counts.iter().copied().max().unwrap_or(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub x: usize,
    pub ideal_gain_db: f64,
    pub real_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XSweep {
    pub points: Vec<GainPoint>,
    /// The x with the largest real gain.
    pub knee: usize,
    pub drops: usize,
}

/// Post-MR SINR of every UE when each one is served by its `x` strongest
/// APs. Interference at an AP is the estimation-error power of all UEs it
/// serves.
fn sweep_sinr(cfg: &SystemConfig, links: &LinkTable, x: usize) -> Vec<f64> {
    let (l_n, k_n) = (links.l, links.k);
    let p = cfg.p_k_watts();
    let tp = cfg.tau_p as f64 * p;
    let s2 = crate::scenario::dbm_to_watts(cfg.noise_dbm());
    let alpha: Vec<f64> = links.beta.iter().map(|&b| tp * b * b / (tp * b + s2)).collect();
    let mut a = vec![false; l_n * k_n];
    for k in 0..k_n {
        let mut order: Vec<usize> = (0..l_n).collect();
        order.sort_by(|&i, &j| links.beta(j, k).total_cmp(&links.beta(i, k)).then(i.cmp(&j)));
        for &l in order.iter().take(x) {
            a[l * k_n + k] = true;
        }
    }
    let interference: Vec<f64> = (0..l_n)
        .map(|l| (0..k_n).filter(|&k| a[l * k_n + k]).map(|k| p * (links.beta(l, k) - alpha[l * k_n + k])).sum())
        .collect();
    (0..k_n)
        .map(|k| {
            let (mut num, mut den) = (0.0, 0.0);
            for l in (0..l_n).filter(|&l| a[l * k_n + k]) {
                let al = alpha[l * k_n + k];
                num += al;
                den += al * (interference[l] + s2);
            }
            cfg.n as f64 * p * num * num / den
        })
        .collect()
}

/// Real versus ideal combining gain as the number of APs per UE grows,
/// averaged over `drops` independent deployments.
pub fn x_sweep_gain(cfg: &SystemConfig, x_range: &[usize], drops: usize) -> Result<XSweep> {
    if x_range.is_empty() {
        return Err(Error::invalid("x_range", "empty"));
    }
    if let Some(&bad) = x_range.iter().find(|&&x| x == 0 || x >= cfg.l) {
        return Err(Error::invalid("x_range", format!("{bad} is outside [1, {}]", cfg.l - 1)));
    }
    if drops == 0 {
        return Err(Error::invalid("drops", "must be >= 1"));
    }
    let mut real = vec![0.0; x_range.len()];
    for d in 0..drops {
        let mut drop_cfg = cfg.clone();
        drop_cfg.seed = stream(cfg.seed, Purpose::Sweep, d as u64).next_u64();
        drop_cfg.clutter_density = 0.0;
        let dep = generate_deployment(&drop_cfg)?;
        let links = LinkTable::new(&drop_cfg, &dep);
        let reference = sweep_sinr(&drop_cfg, &links, 1);
        for (i, &x) in x_range.iter().enumerate() {
            let sinr = sweep_sinr(&drop_cfg, &links, x);
            let g: f64 = sinr.iter().zip(&reference).map(|(s, r)| 10.0 * (s / r).log10()).sum::<f64>();
            real[i] += g / sinr.len() as f64;
        }
    }
    let points: Vec<GainPoint> = x_range
        .iter()
        .zip(&real)
        .map(|(&x, &g)| GainPoint { x, ideal_gain_db: 10.0 * (x as f64).log10(), real_gain_db: g / drops as f64 })
        .collect();
    let knee = points
        .iter()
        .fold(None::<&GainPoint>, |best, p| match best {
            Some(b) if b.real_gain_db >= p.real_gain_db => Some(b),
            _ => Some(p),
        })
        .map(|p| p.x)
        .unwrap_or(x_range[0]);
    Ok(XSweep { points, knee, drops })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assoc(l: usize, k: usize, ones: &[(usize, usize)]) -> AssociationMatrix {
        let mut a = AssociationMatrix::zeros(l, k);
        for &(i, j) in ones {
            a.a[i * k + j] = true;
        }
        a
    }

    #[test]
    fn delay_of_300_m() {
        let links = LinkTable {
            l: 1,
            k: 1,
            dist: vec![300.0],
            pl_db: vec![0.0],
            pr_dbm: vec![0.0],
            beta: vec![1.0],
            azimuth: vec![0.0],
        };
        let d = transmission_delay(&links, &assoc(1, 1, &[(0, 0)])).unwrap();
        assert!((d[0] - 1.000_692_285_594_456e-6).abs() < 1e-18);
    }

    #[test]
    fn delay_needs_a_serving_ap() {
        let links = LinkTable {
            l: 1,
            k: 1,
            dist: vec![300.0],
            pl_db: vec![0.0],
            pr_dbm: vec![0.0],
            beta: vec![1.0],
            azimuth: vec![0.0],
        };
        assert!(matches!(transmission_delay(&links, &assoc(1, 1, &[])), Err(Error::EmptyServingSet(0))));
    }

    #[test]
    fn energy_counts_active_aps_only() {
        let m = EnergyModel::default();
        assert_eq!(energy_total(&AssociationMatrix::zeros(3, 2), &m), 0.0);
        let a = assoc(3, 2, &[(0, 0), (0, 1), (2, 1)]);
        let e = energy_total(&a, &m);
        assert!((e - ((2.0 + 0.4) + (2.0 + 0.2)) * 1e-3).abs() < 1e-15);
        let mut m2 = m;
        m2.p_per_link = 0.0;
        let s1 = energy_total(&a, &m2);
        m2.p_static *= 2.0;
        assert_eq!(energy_total(&a, &m2), 2.0 * s1);
    }

    #[test]
    fn energy_model_rejects_negative() {
        let m = EnergyModel { p_static: -1.0, ..Default::default() };
        assert!(m.validate().is_err());
    }

    #[test]
    fn sweep_normalizes_at_one() {
        let cfg = SystemConfig { l: 20, k: 8, ..Default::default() };
        let s = x_sweep_gain(&cfg, &[1, 2, 10], 3).unwrap();
        assert_eq!(s.points[0].real_gain_db, 0.0);
        assert_eq!(s.points[0].ideal_gain_db, 0.0);
        assert!((s.points[2].ideal_gain_db - 10.0).abs() < 1e-12);
        assert!(x_sweep_gain(&cfg, &[0], 1).is_err());
        assert!(x_sweep_gain(&cfg, &[20], 1).is_err());
    }
}
