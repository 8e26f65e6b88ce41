//! Scalable user association: AP masking, link-quality metrics, priorities,
//! the capacity-constrained assignment and the all-to-all baseline.

mod bnb;
mod enumerate;
mod flow;

pub use bnb::branch_and_bound;
pub use enumerate::{count_feasible, enumerate_optimum};
pub use flow::{max_weight_b_matching, FlowSolution};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{azimuth, db_to_lin, path_loss_db, LinkTable};
use crate::error::{Error, Result};
use crate::scenario::{dbm_to_watts, distance, Deployment, Position, Scatterer, ServiceRequirement, SystemConfig};

/// Binary L×K mask, `true` where the link clears the power threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    pub l: usize,
    pub k: usize,
    pub m: Vec<bool>,
}

impl MaskMatrix {
    pub fn all(l: usize, k: usize, value: bool) -> Self {
        MaskMatrix { l, k, m: vec![value; l * k] }
    }

    pub fn get(&self, l: usize, k: usize) -> bool {
        self.m[l * self.k + k]
    }

    pub fn count(&self) -> usize {
        self.m.iter().filter(|&&b| b).count()
    }

    pub fn unmasked_aps(&self, k: usize) -> Vec<usize> {
        (0..self.l).filter(|&l| self.get(l, k)).collect()
    }
}

/// Which metric produced a link-quality entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Snr,
    Scnr,
    Joint,
    Masked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkQualityMatrix {
    pub l: usize,
    pub k: usize,
    /// Linear-scale quality S, zero where masked.
    pub s: Vec<f64>,
    pub kind: Vec<MetricKind>,
}

impl LinkQualityMatrix {
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.s[l * self.k + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityMatrix {
    pub l: usize,
    pub k: usize,
    pub r: Vec<f64>,
}

impl PriorityMatrix {
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.r[l * self.k + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    pub l: usize,
    pub k: usize,
    pub a: Vec<bool>,
    /// Sum of S·R over active links.
    pub objective: f64,
}

impl AssociationMatrix {
    pub fn zeros(l: usize, k: usize) -> Self {
        AssociationMatrix { l, k, a: vec![false; l * k], objective: 0.0 }
    }

    pub fn get(&self, l: usize, k: usize) -> bool {
        self.a[l * self.k + k]
    }

    /// APs serving UE `k`, ascending.
    pub fn serving(&self, k: usize) -> Vec<usize> {
        (0..self.l).filter(|&l| self.get(l, k)).collect()
    }

    /// UEs served by AP `l`, ascending.
    pub fn served(&self, l: usize) -> Vec<usize> {
        (0..self.k).filter(|&k| self.get(l, k)).collect()
    }

    pub fn links(&self) -> usize {
        self.a.iter().filter(|&&b| b).count()
    }

    /// Checks row sums ≤ tau_p, column sums ≤ x and A ≤ M
    /// with integer counts.
    pub fn is_feasible(&self, mask: &MaskMatrix, tau_p: usize, x: usize) -> bool {
        let rows_ok = (0..self.l).all(|l| self.served(l).len() <= tau_p);
        let cols_ok = (0..self.k).all(|k| self.serving(k).len() <= x);
        let d3 = self.a.iter().zip(&mask.m).all(|(&a, &m)| !a || m);
        rows_ok && cols_ok && d3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FlowExact,
    EnumerationOracle,
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub objective: f64,
    pub psi: f64,
    pub solve_seconds: f64,
    pub method: SolveMethod,
    /// Every edge of the solved relaxation carries 0 or 1 unit.
    pub integral: bool,
}

/// Thresholds received power at `threshold` dBm (inclusive). Also returns the
/// per-UE RSSI vectors observed during initial access.
pub fn mask(links: &LinkTable, threshold: f64) -> (MaskMatrix, Vec<Vec<f64>>) {
    let m = links.pr_dbm.iter().map(|&p| p >= threshold).collect();
    let rssi = (0..links.k)
        .map(|k| (0..links.l).map(|l| links.received_power_dbm(l, k)).collect())
        .collect();
    (MaskMatrix { l: links.l, k: links.k, m }, rssi)
}

pub fn snr(p_r: f64, n0: f64) -> f64 {
    p_r / n0
}

pub fn scnr(p_s: f64, p_c: f64, n0: f64) -> f64 {
    p_s / (p_c + n0)
}

pub fn joint(snr: f64, scnr: f64, w_c: f64, w_s: f64) -> f64 {
    w_c * snr + w_s * scnr
}

/// Half-width of the sensing lobe for an `n`-element half-wavelength ULA,
/// taken as the first-null angle asin(2/n).
pub fn lobe_halfwidth(n: usize) -> f64 {
    (2.0 / n as f64).min(1.0).asin()
}

/// Whether `p` lies in the lobe from `ap` toward `ue`: within the lobe
/// half-width of the pointing direction and no farther than the UE.
pub fn in_lobe(ap: Position, ue: Position, p: Position, n: usize) -> bool {
    let dx = p[0] - ap[0];
    let dy = p[1] - ap[1];
    let r = dx.hypot(dy);
    let range = (ue[0] - ap[0]).hypot(ue[1] - ap[1]);
    if r > range || r == 0.0 {
        return false;
    }
    let mut diff = (azimuth(ap, p) - azimuth(ap, ue)).abs();
    if diff > std::f64::consts::PI {
        diff = std::f64::consts::TAU - diff;
    }
    diff <= lobe_halfwidth(n)
}

/// Clutter power P_C in watts for the link `ap → ue`, and the number of
/// scatterers inside its lobe. Each scatterer returns
/// `P_t · sigma_c2 · reflectivity · β(d)²` with unshadowed two-way loss.
pub fn clutter_power(cfg: &SystemConfig, ap: Position, ue: Position, scatterers: &[Scatterer]) -> (f64, usize) {
    let p_t = dbm_to_watts(cfg.p_t);
    let mut p = 0.0;
    let mut count = 0;
    for s in scatterers {
        if in_lobe(ap, ue, s.pos, cfg.n) {
            let d = distance(ap, s.pos, cfg.pathloss.d_0);
            p += p_t * cfg.sigma_c2 * s.reflectivity * db_to_lin(-2.0 * path_loss_db(&cfg.pathloss, d, 0.0));
            count += 1;
        }
    }
    (p, count)
}

/// Target echo power P_S at the AP for a target co-located with UE `k`.
pub fn echo_power(cfg: &SystemConfig, links: &LinkTable, l: usize, k: usize) -> f64 {
    let b = links.beta(l, k);
    dbm_to_watts(cfg.p_t) * cfg.sigma_rcs * b * b
}

/// Link-quality matrix: SNR for communication UEs, SCNR for sensing UEs and
/// their weighted sum for JCAS UEs, all linear. Masked links get zero and
/// their clutter is never evaluated.
pub fn link_quality(cfg: &SystemConfig, dep: &Deployment, links: &LinkTable, mask: &MaskMatrix) -> LinkQualityMatrix {
    let n0 = dbm_to_watts(cfg.noise_dbm());
    let mut s = vec![0.0; links.l * links.k];
    let mut kind = vec![MetricKind::Masked; links.l * links.k];
    for l in 0..links.l {
        for k in 0..links.k {
            if !mask.get(l, k) {
                continue;
            }
            let i = links.idx(l, k);
            let ue = &dep.ues[k];
            let snr_lk = || snr(dbm_to_watts(links.pr_dbm[i]), n0);
            let scnr_lk = || {
                let (p_c, _) = clutter_power(cfg, dep.aps[l].pos, ue.pos, &dep.scatterers);
                scnr(echo_power(cfg, links, l, k), p_c, n0)
            };
            (s[i], kind[i]) = match ue.mu {
                ServiceRequirement::Communication => (snr_lk(), MetricKind::Snr),
                ServiceRequirement::Sensing => (scnr_lk(), MetricKind::Scnr),
                ServiceRequirement::Jcas => (joint(snr_lk(), scnr_lk(), cfg.w_c, cfg.w_s), MetricKind::Joint),
            };
        }
    }
    LinkQualityMatrix { l: links.l, k: links.k, s, kind }
}

/// Row-normalized priorities R = S / Σ_k S. All-zero rows stay zero.
pub fn priorities(s: &LinkQualityMatrix) -> PriorityMatrix {
    let mut r = vec![0.0; s.l * s.k];
    for l in 0..s.l {
        let row = &s.s[l * s.k..(l + 1) * s.k];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for (dst, v) in r[l * s.k..(l + 1) * s.k].iter_mut().zip(row) {
                *dst = v / total;
            }
        }
    }
    PriorityMatrix { l: s.l, k: s.k, r }
}

/// Assignment weights S·R, `None` where the link is masked or worthless.
pub fn weights(s: &LinkQualityMatrix, r: &PriorityMatrix, m: &MaskMatrix) -> Vec<Option<f64>> {
    (0..s.l * s.k)
        .map(|i| {
            let w = s.s[i] * r.r[i];
            (m.m[i] && w > 0.0).then_some(w)
        })
        .collect()
}

/// Σ w·a summed in row-major order, so every solver reports the same float
/// for the same matrix.
pub fn objective(w: &[Option<f64>], a: &[bool]) -> f64 {
    w.iter().zip(a).filter(|(_, &a)| a).map(|(w, _)| w.unwrap_or(0.0)).sum()
}

fn check_dims(s: &LinkQualityMatrix, r: &PriorityMatrix, m: &MaskMatrix) -> Result<()> {
    if (s.l, s.k) != (r.l, r.k) || (s.l, s.k) != (m.l, m.k) || s.s.len() != s.l * s.k {
        return Err(Error::Dimension(format!(
            "S is {}x{}, R is {}x{}, M is {}x{}",
            s.l, s.k, r.l, r.k, m.l, m.k
        )));
    }
    Ok(())
}

/// Exact maximizer of Σ S·R·a subject to row sums ≤ `tau_p`, column sums ≤
/// `x` and a ≤ M, solved as a max-weight b-matching by min-cost flow.
pub fn optimize(
    s: &LinkQualityMatrix,
    r: &PriorityMatrix,
    m: &MaskMatrix,
    tau_p: usize,
    x: usize,
) -> Result<(AssociationMatrix, OptimizerReport)> {
    optimize_with(s, r, m, tau_p, x, SolveMethod::FlowExact)
}

pub fn optimize_with(
    s: &LinkQualityMatrix,
    r: &PriorityMatrix,
    m: &MaskMatrix,
    tau_p: usize,
    x: usize,
    method: SolveMethod,
) -> Result<(AssociationMatrix, OptimizerReport)> {
    check_dims(s, r, m)?;
    let w = weights(s, r, m);
    let start = Instant::now();
    let (a, integral) = match method {
        SolveMethod::FlowExact => {
            let sol = max_weight_b_matching(s.l, s.k, &w, tau_p, x);
            (sol.a, sol.integral)
        }
        SolveMethod::EnumerationOracle => (enumerate_optimum(s.l, s.k, &w, tau_p, x).1, true),
        SolveMethod::BranchAndBound => (branch_and_bound(s.l, s.k, &w, tau_p, x).1, true),
    };
    let solve_seconds = start.elapsed().as_secs_f64();
    let obj = objective(&w, &a);
    let assoc = AssociationMatrix { l: s.l, k: s.k, a, objective: obj };
    let report = OptimizerReport { objective: obj, psi: sparsity_psi(m), solve_seconds, method, integral };
    Ok((assoc, report))
}

/// Every AP serves every UE; capacity constraints are deliberately ignored.
pub fn baseline_all_to_all(l: usize, k: usize) -> AssociationMatrix {
    AssociationMatrix { l, k, a: vec![true; l * k], objective: 0.0 }
}

/// Baseline with its objective filled in from `S·R`.
pub fn baseline_with_objective(s: &LinkQualityMatrix, r: &PriorityMatrix) -> AssociationMatrix {
    let mut a = baseline_all_to_all(s.l, s.k);
    a.objective = s.s.iter().zip(&r.r).map(|(s, r)| s * r).sum();
    a
}

/// Fraction of unmasked links ψ.
pub fn sparsity_psi(m: &MaskMatrix) -> f64 {
    if m.m.is_empty() {
        return 0.0;
    }
    m.count() as f64 / m.m.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServedCounts {
    pub per_ap: Vec<usize>,
    pub per_ue: Vec<usize>,
    pub active_aps: usize,
}

pub fn served_counts(a: &AssociationMatrix) -> ServedCounts {
    let per_ap: Vec<usize> = (0..a.l).map(|l| a.served(l).len()).collect();
    let per_ue = (0..a.k).map(|k| a.serving(k).len()).collect();
    let active_aps = per_ap.iter().filter(|&&c| c > 0).count();
    ServedCounts { per_ap, per_ue, active_aps }
}

/// Output of the whole association pipeline for one deployment.
#[derive(Debug, Clone)]
pub struct SuaOutcome {
    pub links: LinkTable,
    pub mask: MaskMatrix,
    pub quality: LinkQualityMatrix,
    pub priority: PriorityMatrix,
    pub assoc: AssociationMatrix,
    pub report: OptimizerReport,
}

/// Mask → metrics → priorities → exact assignment.
pub fn run_sua(cfg: &SystemConfig, dep: &Deployment) -> Result<SuaOutcome> {
    let links = LinkTable::new(cfg, dep);
    let (mask, _) = mask(&links, cfg.p_threshold);
    let quality = link_quality(cfg, dep, &links, &mask);
    let priority = priorities(&quality);
    let (assoc, report) = optimize(&quality, &priority, &mask, cfg.tau_p, cfg.x)?;
    Ok(SuaOutcome { links, mask, quality, priority, assoc, report })
}

/// The baseline's evaluation of all L×K links with no masking.
pub fn run_baseline(cfg: &SystemConfig, dep: &Deployment) -> SuaOutcome {
    let links = LinkTable::new(cfg, dep);
    let mask = MaskMatrix::all(links.l, links.k, true);
    let quality = link_quality(cfg, dep, &links, &mask);
    let priority = priorities(&quality);
    let assoc = baseline_with_objective(&quality, &priority);
    let report = OptimizerReport {
        objective: assoc.objective,
        psi: 1.0,
        solve_seconds: 0.0,
        method: SolveMethod::FlowExact,
        integral: true,
    };
    SuaOutcome { links, mask, quality, priority, assoc, report }
}

/// Pilot indices after association. UEs are taken in index order and each
/// gets the lowest pilot not already used by a UE sharing one of its APs;
/// when every pilot clashes, the one with the fewest shared APs wins. With
/// row sums ≤ tau_p this usually makes pilots orthogonal at every AP, and on
/// an all-ones association it reduces to round-robin.
pub fn assign_pilots(a: &AssociationMatrix, tau_p: usize) -> Vec<usize> {
    let mut pilots: Vec<usize> = Vec::with_capacity(a.k);
    for k in 0..a.k {
        let mut clashes = vec![0usize; tau_p];
        for (k2, &t) in pilots.iter().enumerate() {
            clashes[t] += (0..a.l).filter(|&l| a.get(l, k) && a.get(l, k2)).count();
        }
        let best = (0..tau_p).min_by_key(|&t| (clashes[t], t)).unwrap_or(0);
        pilots.push(best);
    }
    pilots
}
