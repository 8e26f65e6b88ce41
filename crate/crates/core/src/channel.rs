//! Propagation, small-scale fading, pilot-based MMSE estimation, monostatic
//! echo synthesis and the DFRC transmit covariance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{cn, cn01, unit_phase};
use crate::scenario::{dbm_to_watts, distance, Deployment, Position, SystemConfig};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Log-distance path-loss constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    /// Loss at the reference distance, dB.
    pub pl_0: f64,
    /// Reference distance, m.
    pub d_0: f64,
    pub gamma_pl: f64,
    /// Standard deviation of log-normal shadowing, dB.
    pub shadow_sigma: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams { pl_0: 30.5, d_0: 1.0, gamma_pl: 3.67, shadow_sigma: 4.0 }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_0 > 0.0) {
            return Err(Error::invalid("pathloss.d_0", "must be positive"));
        }
        if !(self.gamma_pl >= 2.0) {
            return Err(Error::invalid("pathloss.gamma_pl", "must be at least 2"));
        }
        if !(self.shadow_sigma >= 0.0) {
            return Err(Error::invalid("pathloss.shadow_sigma", "must be nonnegative"));
        }
        if !self.pl_0.is_finite() {
            return Err(Error::invalid("pathloss.pl_0", "must be finite"));
        }
        Ok(())
    }
}

pub fn path_loss_db(params: &PathLossParams, d: f64, shadow: f64) -> f64 {
    params.pl_0 + 10.0 * params.gamma_pl * (d / params.d_0).log10() + shadow
}

pub fn rssi_dbm(p_t: f64, pl: f64) -> f64 {
    p_t - pl
}

/// Thermal noise over `bandwidth` Hz plus the noise figure, in dBm.
pub fn noise_power_dbm(bandwidth: f64, noise_figure: f64) -> f64 {
    -174.0 + 10.0 * bandwidth.log10() + noise_figure
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Azimuth of `to` seen from `from`, radians.
pub fn azimuth(from: Position, to: Position) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Per-link large-scale quantities, row-major L×K. The shadowing comes from
/// the deployment, so RSSI, masking and SNR all see the same realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    pub l: usize,
    pub k: usize,
    pub dist: Vec<f64>,
    pub pl_db: Vec<f64>,
    /// Received power P_r in dBm.
    pub pr_dbm: Vec<f64>,
    /// Linear channel gain 10^(-PL/10).
    pub beta: Vec<f64>,
    pub azimuth: Vec<f64>,
}

impl LinkTable {
    pub fn new(cfg: &SystemConfig, dep: &Deployment) -> Self {
        let (l, k) = (dep.l(), dep.k());
        let mut t = LinkTable {
            l,
            k,
            dist: Vec::with_capacity(l * k),
            pl_db: Vec::with_capacity(l * k),
            pr_dbm: Vec::with_capacity(l * k),
            beta: Vec::with_capacity(l * k),
            azimuth: Vec::with_capacity(l * k),
        };
        for ap in &dep.aps {
            for ue in &dep.ues {
                let d = distance(ap.pos, ue.pos, cfg.pathloss.d_0);
                let pl = path_loss_db(&cfg.pathloss, d, dep.shadow(ap.id, ue.id));
                t.dist.push(d);
                t.pl_db.push(pl);
                t.pr_dbm.push(rssi_dbm(cfg.p_t, pl));
                t.beta.push(db_to_lin(-pl));
                t.azimuth.push(azimuth(ap.pos, ue.pos));
            }
        }
        t
    }

    #[inline]
    pub fn idx(&self, l: usize, k: usize) -> usize {
        l * self.k + k
    }

    pub fn received_power_dbm(&self, l: usize, k: usize) -> f64 {
        self.pr_dbm[self.idx(l, k)]
    }

    pub fn beta(&self, l: usize, k: usize) -> f64 {
        self.beta[self.idx(l, k)]
    }

    /// Largest gain of UE `k` over all APs.
    pub fn beta_max(&self, k: usize) -> f64 {
        (0..self.l).map(|l| self.beta(l, k)).fold(0.0, f64::max)
    }
}

/// How the per-link spatial correlation matrix is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialModel {
    #[default]
    Uncorrelated,
    /// Gaussian local scattering around the line-of-sight azimuth.
    LocalScattering { angular_spread_deg: f64 },
}

impl SpatialModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialModel::Uncorrelated => Ok(()),
            SpatialModel::LocalScattering { angular_spread_deg } => {
                if angular_spread_deg.is_finite() && *angular_spread_deg >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("spatial.angular_spread_deg", "must be nonnegative"))
                }
            }
        }
    }

    pub fn correlation(&self, n: usize, azimuth: f64) -> SpatialCorrelation {
        match *self {
            SpatialModel::Uncorrelated => SpatialCorrelation::identity(n),
            SpatialModel::LocalScattering { angular_spread_deg } => {
                SpatialCorrelation::local_scattering(n, azimuth, angular_spread_deg.to_radians())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, SpatialModel::Uncorrelated)
    }
}

/// Normalized spatial correlation matrix of one link with its square root.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation {
    pub r: CMat,
    pub sqrt: CMat,
}

impl SpatialCorrelation {
    /// Checks Hermitian symmetry and positive semidefiniteness and caches the
    /// principal square root.
    pub fn new(r: CMat) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(Error::Dimension("correlation matrix must be square".into()));
        }
        let scale = r.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = (&r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-12 * scale {
            return Err(Error::NotPsd("correlation matrix is not Hermitian"));
        }
        let sqrt = psd_sqrt(&r)?;
        Ok(SpatialCorrelation { r, sqrt })
    }

    pub fn identity(n: usize) -> Self {
        SpatialCorrelation { r: CMat::identity(n, n), sqrt: CMat::identity(n, n) }
    }

    /// Gaussian local-scattering approximation for a half-wavelength ULA.
    pub fn local_scattering(n: usize, azimuth: f64, asd: f64) -> Self {
        let r = CMat::from_fn(n, n, |a, b| {
            let d = a as f64 - b as f64;
            let phase = std::f64::consts::PI * d * azimuth.sin();
            let spread = std::f64::consts::PI * d * azimuth.cos() * asd;
            Complex64::from_polar((-spread * spread / 2.0).exp(), phase)
        });
        let sqrt = psd_sqrt(&r).expect("local scattering matrix is PSD");
        SpatialCorrelation { r, sqrt }
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    pub fn is_identity(&self) -> bool {
        let n = self.n();
        self.sqrt == CMat::identity(n, n)
    }
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues below
/// -1e-10 (relative) are rejected, smaller negative ones clipped to zero.
pub fn psd_sqrt(r: &CMat) -> Result<CMat> {
    let n = r.nrows();
    let eig = r.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::NotPsd("negative eigenvalue"));
    }
    let d = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(eig.eigenvalues[i].max(0.0).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let u = &eig.eigenvectors;
    Ok(u * d * u.adjoint())
}

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVec {
    CVec::from_fn(n, |_, _| cn(rng, var))
}

/// One correlated Rayleigh draw `h = sqrt(beta) R^{1/2} w`.
pub fn draw_channel<R: Rng + ?Sized>(corr: &SpatialCorrelation, beta: f64, rng: &mut R) -> CVec {
    let w = CVec::from_fn(corr.n(), |_, _| cn01(rng));
    (&corr.sqrt * w) * Complex64::new(beta.sqrt(), 0.0)
}

/// Target-free clutter channel `R^{1/2} W R^{1/2}` with i.i.d. unit `W`.
pub fn draw_clutter_channel<R: Rng + ?Sized>(corr: &SpatialCorrelation, rng: &mut R) -> CMat {
    let n = corr.n();
    let w = CMat::from_fn(n, n, |_, _| cn01(rng));
    if corr.is_identity() {
        return w;
    }
    &corr.sqrt * w * &corr.sqrt
}

/// Pilot observation at one AP for the UEs sharing a pilot sequence there.
pub fn pilot_rx<R: Rng + ?Sized>(
    h_copilot: &[&CVec],
    p_p: f64,
    tau_p: usize,
    sigma2: f64,
    n: usize,
    rng: &mut R,
) -> CVec {
    let g = Complex64::new((tau_p as f64 * p_p).sqrt(), 0.0);
    let mut y = cn_vector(rng, n, sigma2);
    for h in h_copilot {
        y += *h * g;
    }
    y
}

/// Error covariance used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCovarianceMode {
    /// `B = R - tau p R Psi^{-1} R`.
    #[default]
    Mmse,
    /// High-SNR shortcut for sparsely associated links, `B = sigma^2 X / (tau p) I`.
    SparseLink { x: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: CVec,
    pub b: CMat,
    pub psi: CMat,
}

/// Linear MMSE estimator applied to a pilot observation.
///
/// `r` is the covariance of the wanted channel (gain included) and
/// `r_copilot` the sum of covariances over every UE whose pilot lands in
/// `y_p`, the wanted one included.
pub fn mmse_estimate_contaminated(
    y_p: &CVec,
    r: &CMat,
    r_copilot: &CMat,
    p_k: f64,
    tau_p: usize,
    sigma2: f64,
    mode: ErrorCovarianceMode,
) -> Result<ChannelEstimate> {
    let n = r.nrows();
    let tp = tau_p as f64 * p_k;
    let psi = r_copilot * Complex64::new(tp, 0.0) + CMat::identity(n, n) * Complex64::new(sigma2, 0.0);
    let psi_inv = psi.clone().try_inverse().ok_or(Error::Singular("pilot covariance"))?;
    let r_psi = r * &psi_inv;
    let h_hat = &r_psi * y_p * Complex64::new(tp.sqrt(), 0.0);
    let b = match mode {
        ErrorCovarianceMode::Mmse => r - &r_psi * r * Complex64::new(tp, 0.0),
        ErrorCovarianceMode::SparseLink { x } => {
            CMat::identity(n, n) * Complex64::new(sigma2 * x as f64 / tp, 0.0)
        }
    };
    Ok(ChannelEstimate { h_hat, b, psi })
}

/// Estimator for a link without pilot contamination.
pub fn mmse_estimate(
    y_p: &CVec,
    r: &CMat,
    p_k: f64,
    tau_p: usize,
    sigma2: f64,
    mode: ErrorCovarianceMode,
) -> Result<ChannelEstimate> {
    mmse_estimate_contaminated(y_p, r, r, p_k, tau_p, sigma2, mode)
}

/// Uplink reception with MR combining.
///
/// `h[l][k]` is the true channel and `h_hat[l][k]` the combiner of UE `k` at
/// AP `l`; `serving[k]` lists the APs that combine for UE `k`. Every UE
/// transmits `symbols[k]` to every AP. Returns one soft estimate per UE.
pub fn ul_data_rx_mr<R: Rng + ?Sized>(
    h: &[Vec<CVec>],
    h_hat: &[Vec<CVec>],
    serving: &[Vec<usize>],
    symbols: &[Complex64],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let n = h.first().and_then(|row| row.first()).map_or(0, |v| v.len());
    let y: Vec<CVec> = h
        .iter()
        .map(|row| {
            let mut y = cn_vector(rng, n, sigma2);
            for (hk, s) in row.iter().zip(symbols) {
                y += hk * *s;
            }
            y
        })
        .collect();
    serving
        .iter()
        .enumerate()
        .map(|(k, aps)| {
            if aps.is_empty() {
                return Err(Error::EmptyServingSet(k));
            }
            Ok(aps.iter().map(|&l| h_hat[l][k].dotc(&y[l])).sum())
        })
        .collect()
}

/// ULA steering vector with entries `exp(j n pi sin(phi) cos(theta))`.
pub fn array_response(phi: f64, theta: f64, n: usize) -> CVec {
    let u = std::f64::consts::PI * phi.sin() * theta.cos();
    CVec::from_fn(n, |i, _| Complex64::from_polar(1.0, u * i as f64))
}

/// Target reflection coefficient statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcsModel {
    /// Complex Gaussian coefficient drawn once per dwell.
    SwerlingI,
    /// Fixed magnitude with uniform phase, i.e. conditioned on |sigma_t|.
    FixedAmplitude,
    /// Real coefficient `sqrt(sigma_rcs)`. Lets several APs share one target
    /// phase; under circular noise the envelope statistics are unchanged.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEcho {
    /// Two-way channel gain.
    pub gain: f64,
    pub phi: f64,
    pub theta: f64,
    pub sigma_rcs: f64,
    pub model: RcsModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEcho {
    /// Two-way gain times reflectivity times the clutter scale.
    pub gain: f64,
    pub phi: f64,
    pub theta: f64,
}

/// Everything needed to synthesize a monostatic return at one AP.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoParams {
    pub n: usize,
    pub target: Option<TargetEcho>,
    /// Discrete scatterers, each with a random phase per dwell.
    pub scatterers: Vec<PointEcho>,
    /// Diffuse clutter `R^{1/2} W R^{1/2}` scaled by the given power.
    pub diffuse: Option<(SpatialCorrelation, f64)>,
    pub noise_power: f64,
}

impl EchoParams {
    /// Echo geometry for an AP illuminating a target at `target` among
    /// `scatterers`. Gains are linear and two-way; the target link reuses the
    /// frozen shadowing `shadow_db`.
    pub fn from_geometry(
        cfg: &SystemConfig,
        ap: Position,
        target: Position,
        shadow_db: f64,
        scatterers: &[crate::scenario::Scatterer],
    ) -> Self {
        let pl = |d: f64, sh: f64| db_to_lin(-2.0 * path_loss_db(&cfg.pathloss, d, sh));
        let d = distance(ap, target, cfg.pathloss.d_0);
        let p_t = dbm_to_watts(cfg.p_t);
        EchoParams {
            n: cfg.n,
            target: Some(TargetEcho {
                gain: p_t * pl(d, shadow_db),
                phi: azimuth(ap, target),
                theta: 0.0,
                sigma_rcs: cfg.sigma_rcs,
                model: RcsModel::SwerlingI,
            }),
            scatterers: scatterers
                .iter()
                .map(|s| PointEcho {
                    gain: p_t * cfg.sigma_c2 * s.reflectivity * pl(distance(ap, s.pos, cfg.pathloss.d_0), 0.0),
                    phi: azimuth(ap, s.pos),
                    theta: 0.0,
                })
                .collect(),
            diffuse: None,
            noise_power: dbm_to_watts(cfg.noise_dbm()),
        }
    }
}

/// Noise-free target signature `sqrt(gain) a(phi, theta) a^T(phi, theta) x`.
pub fn target_signature(t: &TargetEcho, n: usize, x: &CVec) -> CVec {
    let a = array_response(t.phi, t.theta, n);
    let ax: Complex64 = a.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
    a * (ax * t.gain.sqrt())
}

/// Monostatic received vectors for one dwell, one per sensing symbol in
/// `xs`. The target coefficient, scatterer phases and diffuse clutter channel
/// are drawn once and held over the dwell; noise is fresh per symbol.
pub fn synth_echo<R: Rng + ?Sized>(params: &EchoParams, xs: &[CVec], rng: &mut R) -> Vec<CVec> {
    let n = params.n;
    let alpha = params.target.as_ref().map(|t| match t.model {
        RcsModel::SwerlingI => cn(rng, t.sigma_rcs),
        RcsModel::FixedAmplitude => unit_phase(rng) * t.sigma_rcs.sqrt(),
        RcsModel::Deterministic => Complex64::new(t.sigma_rcs.sqrt(), 0.0),
    });
    let scat: Vec<(CVec, Complex64)> = params
        .scatterers
        .iter()
        .map(|s| (array_response(s.phi, s.theta, n), unit_phase(rng) * s.gain.sqrt()))
        .collect();
    let diffuse = params
        .diffuse
        .as_ref()
        .map(|(corr, p)| draw_clutter_channel(corr, rng) * Complex64::new(p.sqrt(), 0.0));
    xs.iter()
        .map(|x| {
            let mut y = cn_vector(rng, n, params.noise_power);
            if let (Some(t), Some(a)) = (&params.target, alpha) {
                y += target_signature(t, n, x) * a;
            }
            for (a, c) in &scat {
                let ax: Complex64 = a.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                y += a * (ax * c);
            }
            if let Some(h) = &diffuse {
                y += h * x;
            }
            y
        })
        .collect()
}

/// Transmit covariance `W W^H` of a DFRC precoder together with the
/// per-stream terms `w_g w_g^H`.
pub fn dfrc_covariance(w: &CMat) -> (CMat, Vec<CMat>) {
    let r = w * w.adjoint();
    let parts = w.column_iter().map(|c| &c * c.adjoint()).collect();
    (r, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn path_loss_examples() {
        let p = PathLossParams { pl_0: 30.0, d_0: 1.0, gamma_pl: 3.67, shadow_sigma: 4.0 };
        assert_eq!(path_loss_db(&p, 1.0, 0.0), 30.0);
        assert!((path_loss_db(&p, 100.0, 0.0) - 103.4).abs() < 1e-12);
        let d = path_loss_db(&p, 57.0, 4.0) - path_loss_db(&p, 57.0, 0.0);
        assert!((d - 4.0).abs() < 1e-12);
        assert!((rssi_dbm(30.0, 103.4) + 73.4).abs() < 1e-12);
        assert_eq!(rssi_dbm(30.0, 0.0), 30.0);
        assert_eq!(rssi_dbm(30.0, 90.0), -60.0);
        assert!(rssi_dbm(30.0, 91.0) < rssi_dbm(30.0, 90.0));
    }

    #[test]
    fn noise_floor() {
        assert!((noise_power_dbm(20e6, 7.0) + 93.989_700_043_360_19).abs() < 1e-9);
    }

    #[test]
    fn frozen_shadowing() {
        let cfg = SystemConfig::default();
        let dep = crate::scenario::generate_deployment(&cfg).unwrap();
        let a = LinkTable::new(&cfg, &dep);
        let b = LinkTable::new(&cfg, &dep);
        assert_eq!(a.received_power_dbm(3, 4), b.received_power_dbm(3, 4));
        let pl = path_loss_db(&cfg.pathloss, a.dist[a.idx(3, 4)], dep.shadow(3, 4));
        assert_eq!(a.received_power_dbm(3, 4), rssi_dbm(cfg.p_t, pl));
    }

    #[test]
    fn zero_gain_channel_is_zero() {
        let mut rng = stream(1, Purpose::Fading, 0);
        let h = draw_channel(&SpatialCorrelation::identity(4), 0.0, &mut rng);
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rank_one_draws_stay_in_subspace() {
        let v = CVec::from_vec(vec![c(1.0), Complex64::new(0.0, 1.0), c(-1.0)]) * c(1.0 / 3f64.sqrt());
        let corr = SpatialCorrelation::new(&v * v.adjoint() * c(3.0)).unwrap();
        let mut rng = stream(2, Purpose::Fading, 0);
        for _ in 0..100 {
            let h = draw_channel(&corr, 1.0, &mut rng);
            let resid = &h - &v * v.dotc(&h);
            assert!(resid.norm() < 1e-10);
        }
    }

    #[test]
    fn non_psd_rejected() {
        let r = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(-0.5)]));
        assert!(matches!(SpatialCorrelation::new(r), Err(Error::NotPsd(_))));
    }

    #[test]
    fn local_scattering_trace_and_psd() {
        let corr = SpatialCorrelation::local_scattering(8, 0.3, 10f64.to_radians());
        let tr: Complex64 = corr.r.diagonal().iter().sum();
        assert!((tr.re - 8.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
        assert!(SpatialCorrelation::new(corr.r.clone()).is_ok());
    }

    #[test]
    fn pilot_rx_examples() {
        let mut rng = stream(3, Purpose::Noise, 0);
        let h1 = CVec::from_vec(vec![c(1.0), Complex64::new(0.5, -2.0)]);
        let h2 = CVec::from_vec(vec![c(-0.25), c(3.0)]);
        let y = pilot_rx(&[&h1], 0.2, 5, 0.0, 2, &mut rng);
        assert!((y - &h1 * c(1.0)).norm() < 1e-12);
        let y = pilot_rx(&[&h1, &h2], 0.2, 5, 0.0, 2, &mut rng);
        assert!((y - (&h1 + &h2)).norm() < 1e-12);
        let y = pilot_rx(&[&h1], 0.0, 5, 1.0, 2, &mut rng);
        assert!(y.norm() > 0.0);
    }

    #[test]
    fn mmse_limits() {
        let mut rng = stream(4, Purpose::Fading, 0);
        let r = CMat::identity(3, 3) * c(0.7);
        let h = draw_channel(&SpatialCorrelation::identity(3), 0.7, &mut rng);
        let y = pilot_rx(&[&h], 0.1, 4, 1e-14, 3, &mut rng);
        let est = mmse_estimate(&y, &r, 0.1, 4, 1e-14, ErrorCovarianceMode::Mmse).unwrap();
        assert!((&est.h_hat - &h).norm() < 1e-6);
        assert!(est.b.norm() < 1e-12);

        let y = pilot_rx(&[&h], 0.0, 4, 1.0, 3, &mut rng);
        let est = mmse_estimate(&y, &r, 0.0, 4, 1.0, ErrorCovarianceMode::Mmse).unwrap();
        assert!(est.h_hat.norm() == 0.0);
        assert!((&est.b - &r).norm() < 1e-15);

        let est = mmse_estimate(&y, &r, 0.5, 4, 2.0, ErrorCovarianceMode::SparseLink { x: 3 }).unwrap();
        assert!((est.b[(1, 1)].re - 2.0 * 3.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_psi_is_an_error() {
        let r = CMat::zeros(2, 2);
        let y = CVec::zeros(2);
        let e = mmse_estimate(&y, &r, 1.0, 1, 0.0, ErrorCovarianceMode::Mmse);
        assert!(matches!(e, Err(Error::Singular(_))));
    }

    #[test]
    fn mr_reception_examples() {
        let mut rng = stream(5, Purpose::Noise, 0);
        let h = CVec::from_vec(vec![c(1.0), Complex64::new(0.0, 2.0)]);
        let s = Complex64::new(0.0, 1.0);
        let out = ul_data_rx_mr(&[vec![h.clone()]], &[vec![h.clone()]], &[vec![0]], &[s], 0.0, &mut rng).unwrap();
        assert!((out[0] - s * h.norm_squared()).norm() < 1e-12);

        let z = CVec::zeros(2);
        let out = ul_data_rx_mr(&[vec![z.clone()]], &[vec![h.clone()]], &[vec![0]], &[s], 1.0, &mut rng).unwrap();
        assert!(out[0].norm() > 0.0);

        let h1 = CVec::from_vec(vec![c(1.0), c(0.0)]);
        let h2 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let hs = vec![vec![h1.clone(), h2.clone()]];
        let syms = [c(1.0), c(-1.0)];
        let out = ul_data_rx_mr(&hs, &hs, &[vec![0], vec![0]], &syms, 0.0, &mut rng).unwrap();
        assert!((out[0] - c(1.0)).norm() < 1e-12 && (out[1] + c(1.0)).norm() < 1e-12);

        let e = ul_data_rx_mr(&hs, &hs, &[vec![0], vec![]], &syms, 0.0, &mut rng);
        assert_eq!(e, Err(Error::EmptyServingSet(1)));
    }

    #[test]
    fn steering_vectors() {
        let a = array_response(0.0, 0.3, 4);
        assert!(a.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let a = array_response(std::f64::consts::FRAC_PI_2, 0.0, 2);
        assert!((a[0] - c(1.0)).norm() < 1e-15 && (a[1] + c(1.0)).norm() < 1e-12);
        let a = array_response(0.7, 0.2, 9);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!((a.norm_squared() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn echo_degenerate_cases() {
        let mut rng = stream(6, Purpose::Noise, 0);
        let x = vec![array_response(0.4, 0.0, 4).map(|z| z.conj()) * c(0.5)];
        let mut p = EchoParams {
            n: 4,
            target: Some(TargetEcho { gain: 2.0, phi: 0.4, theta: 0.0, sigma_rcs: 0.0, model: RcsModel::SwerlingI }),
            scatterers: vec![],
            diffuse: None,
            noise_power: 0.0,
        };
        assert!(synth_echo(&p, &x, &mut rng)[0].norm() == 0.0);

        p.target.as_mut().unwrap().sigma_rcs = 1.0;
        let y = &synth_echo(&p, &x, &mut rng)[0];
        let a = array_response(0.4, 0.0, 4);
        let proj = &a * (a.dotc(y) / a.norm_squared());
        assert!((y - proj).norm() < 1e-12 * y.norm().max(1.0));
    }

    #[test]
    fn dfrc_identity() {
        let mut rng = stream(7, Purpose::Fading, 0);
        for _ in 0..100 {
            let w = CMat::from_fn(4, 3, |_, _| cn01(&mut rng));
            let (r, parts) = dfrc_covariance(&w);
            let sum = parts.iter().fold(CMat::zeros(4, 4), |acc, p| acc + p);
            assert!((r - sum).iter().all(|z| z.norm() < 1e-12));
        }
        let q = CMat::identity(4, 2);
        let (r, _) = dfrc_covariance(&q);
        assert!((r.trace().re - 2.0).abs() < 1e-12);
        let w = CMat::from_column_slice(3, 1, &[c(1.0), c(2.0), Complex64::new(0.0, 1.0)]);
        let (r, parts) = dfrc_covariance(&w);
        assert_eq!(parts.len(), 1);
        assert_eq!(r.rank(1e-10), 1);
    }
}
