//! System parameters and physical-layer primitives.
//!
//! Everything in here is in SI units and linear scale. Decibel and
//! per-square-kilometre inputs are converted at the config boundary
//! (see [`crate::config`]) with [`linear_from_db`] and [`watts_from_dbm`].

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::association::AssociationPolicy;
use crate::error::{Error, Result};

/// Truncation radius used for the omnidirectional antenna unless configured.
pub const DEFAULT_OMNI_RANGE_M: f64 = 3000.0;

/// Main-lobe gain constant: `G_u = 29000 / beamwidth_deg^2`.
const MAINLOBE_GAIN_CONSTANT: f64 = 29000.0;

pub fn linear_from_db(value_db: f64) -> Result<f64> {
    if !value_db.is_finite() {
        return Err(Error::invalid("value_db", format!("{value_db} is not finite")));
    }
    Ok(10f64.powf(value_db / 10.0))
}

pub fn watts_from_dbm(value_dbm: f64) -> Result<f64> {
    if !value_dbm.is_finite() {
        return Err(Error::invalid("value_dbm", format!("{value_dbm} is not finite")));
    }
    Ok(10f64.powf((value_dbm - 30.0) / 10.0))
}

pub fn db_from_linear(value: f64) -> f64 {
    10.0 * value.log10()
}

/// Propagation state of a GBS-to-UAV link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkType {
    Los,
    Nlos,
}

impl LinkType {
    pub const ALL: [LinkType; 2] = [LinkType::Los, LinkType::Nlos];

    pub fn other(self) -> LinkType {
        match self {
            LinkType::Los => LinkType::Nlos,
            LinkType::Nlos => LinkType::Los,
        }
    }

    pub fn index(self) -> usize {
        match self {
            LinkType::Los => 0,
            LinkType::Nlos => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkType::Los => "los",
            LinkType::Nlos => "nlos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// Path-loss intercept at 1 m, linear.
    pub eta_l: f64,
    pub eta_n: f64,
    /// Nakagami shape parameters.
    pub m_l: u32,
    pub m_n: u32,
}

impl ChannelParams {
    pub fn exponent(&self, link: LinkType) -> f64 {
        match link {
            LinkType::Los => self.alpha_l,
            LinkType::Nlos => self.alpha_n,
        }
    }

    pub fn intercept(&self, link: LinkType) -> f64 {
        match link {
            LinkType::Los => self.eta_l,
            LinkType::Nlos => self.eta_n,
        }
    }

    pub fn fading_shape(&self, link: LinkType) -> u32 {
        match link {
            LinkType::Los => self.m_l,
            LinkType::Nlos => self.m_n,
        }
    }

    /// Path gain as a function of the squared 3D distance. Unchecked hot path.
    #[inline]
    pub fn gain_sq(&self, link: LinkType, dist_sq: f64) -> f64 {
        self.intercept(link) * dist_sq.powf(-0.5 * self.exponent(link))
    }

    /// True when both link types share exponent and intercept, so the two
    /// types are indistinguishable in mean received power.
    pub fn is_power_symmetric(&self) -> bool {
        self.alpha_l == self.alpha_n && self.eta_l == self.eta_n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_l > 2.0) {
            return Err(Error::invalid("alpha_l", "must exceed 2"));
        }
        if !(self.alpha_n >= self.alpha_l) {
            return Err(Error::invalid("alpha_n", "must be at least alpha_l"));
        }
        if !(self.eta_l > 0.0 && self.eta_l.is_finite()) {
            return Err(Error::invalid("eta_l", "must be positive"));
        }
        if !(self.eta_n > 0.0 && self.eta_n.is_finite()) {
            return Err(Error::invalid("eta_n", "must be positive"));
        }
        if self.m_n < 1 {
            return Err(Error::invalid("m_n", "must be a positive integer"));
        }
        if self.m_l < self.m_n {
            return Err(Error::invalid("m_l", "must be at least m_n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentParams {
    pub a: f64,
    /// Per degree.
    pub b: f64,
}

impl EnvironmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid("a", "must be positive"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid("b", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaModel {
    /// Main lobe of the given full beamwidth in degrees, zero gain elsewhere.
    Directional { beamwidth_deg: f64 },
    /// Unit gain out to a truncation radius (m).
    Omni { r_max: f64 },
}

impl AntennaModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AntennaModel::Directional { beamwidth_deg } => {
                if !(beamwidth_deg > 0.0 && beamwidth_deg < 180.0) {
                    return Err(Error::invalid("beamwidth_deg", "must lie in (0, 180) degrees"));
                }
            }
            AntennaModel::Omni { r_max } => {
                if !(r_max > 0.0 && r_max.is_finite()) {
                    return Err(Error::invalid("r_max", "must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            AntennaModel::Directional { .. } => "directional",
            AntennaModel::Omni { .. } => "omni",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Waypoint {
    pub fn horizontal_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Every scalar of the network, mobility and channel model in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// GBS density (per m^2).
    pub lambda_b: f64,
    /// Transmit power (W).
    pub p_t: f64,
    /// GBS sidelobe gain (linear).
    pub g_b: f64,
    pub h_b: f64,
    pub h_lb: f64,
    pub h_ub: f64,
    /// Rayleigh mobility parameter (per m^2).
    pub mu: f64,
    /// UAV speed (m/s).
    pub v: f64,
    /// Connection-failure probability on handover.
    pub kappa: f64,
    /// SIR threshold (linear).
    pub t_thresh: f64,
    pub antenna: AntennaModel,
    pub channel: ChannelParams,
    pub env: EnvironmentParams,
    pub policy: AssociationPolicy,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            lambda_b: 100e-6,
            p_t: 10f64.powf((46.0 - 30.0) / 10.0),
            g_b: 1.0,
            h_b: 30.0,
            h_lb: 90.0,
            h_ub: 150.0,
            mu: 300e-6,
            v: 20.0,
            kappa: 0.3,
            t_thresh: 10f64.powf(-0.38),
            antenna: AntennaModel::Directional { beamwidth_deg: 120.0 },
            channel: ChannelParams {
                alpha_l: 2.09,
                alpha_n: 3.75,
                eta_l: 10f64.powf(-4.11),
                eta_n: 10f64.powf(-3.29),
                m_l: 3,
                m_n: 1,
            },
            env: EnvironmentParams { a: 9.61, b: 0.16 },
            policy: AssociationPolicy::StrongestRss,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_b >= 0.0 && self.lambda_b.is_finite()) {
            return Err(Error::invalid("lambda_b", "must be non-negative"));
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(Error::invalid("p_t", "must be positive"));
        }
        if !(self.g_b > 0.0 && self.g_b.is_finite()) {
            return Err(Error::invalid("g_b", "must be positive"));
        }
        if !(self.h_b >= 0.0 && self.h_b.is_finite()) {
            return Err(Error::invalid("h_b", "must be non-negative"));
        }
        if !(self.h_lb > self.h_b) {
            return Err(Error::invalid("h_lb", "must exceed h_b"));
        }
        if !(self.h_ub > self.h_lb && self.h_ub.is_finite()) {
            return Err(Error::invalid("h_ub", "must exceed h_lb"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("mu", "must be positive"));
        }
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::invalid("v", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::invalid("kappa", "must lie in [0, 1]"));
        }
        if !(self.t_thresh > 0.0 && self.t_thresh.is_finite()) {
            return Err(Error::invalid("t_thresh", "must be positive"));
        }
        self.antenna.validate()?;
        self.channel.validate()?;
        self.env.validate()
    }

    /// `G_tot = G_b * G_u`.
    pub fn total_gain(&self) -> f64 {
        self.g_b * uav_mainlobe_gain(&self.antenna)
    }

    pub fn height_band(&self) -> f64 {
        self.h_ub - self.h_lb
    }

    /// Horizontal receiving radius at UAV height `z`.
    pub fn receiving_radius(&self, z: f64) -> Result<f64> {
        crate::geometry::receiving_radius(z, self.h_b, &self.antenna)
    }
}

/// Air-to-ground path gain `eta * (r^2 + (h_u - h_b)^2)^(-alpha/2)`.
pub fn path_loss(link: LinkType, r: f64, h_u: f64, ch: &ChannelParams, h_b: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("r", "must be non-negative"));
    }
    let dh = h_u - h_b;
    let d2 = r * r + dh * dh;
    if d2 == 0.0 {
        return Err(Error::SingularGeometry);
    }
    Ok(ch.gain_sq(link, d2))
}

/// Elevation-dependent LoS probability. `r = 0` is the 90 degree limit.
#[inline]
pub fn los_probability(r: f64, h_u: f64, env: &EnvironmentParams, h_b: f64) -> f64 {
    los_probability_hbar(r, h_u - h_b, env)
}

#[inline]
pub(crate) fn los_probability_hbar(r: f64, h_bar: f64, env: &EnvironmentParams) -> f64 {
    let elevation_deg = h_bar.atan2(r).to_degrees();
    1.0 / (1.0 + env.a * (-env.b * (elevation_deg - env.a)).exp())
}

pub fn nlos_probability(r: f64, h_u: f64, env: &EnvironmentParams, h_b: f64) -> f64 {
    1.0 - los_probability(r, h_u, env, h_b)
}

#[inline]
pub(crate) fn type_probability(link: LinkType, r: f64, h_bar: f64, env: &EnvironmentParams) -> f64 {
    let p = los_probability_hbar(r, h_bar, env);
    match link {
        LinkType::Los => p,
        LinkType::Nlos => 1.0 - p,
    }
}

pub fn uav_mainlobe_gain(antenna: &AntennaModel) -> f64 {
    match *antenna {
        AntennaModel::Directional { beamwidth_deg } => {
            MAINLOBE_GAIN_CONSTANT / (beamwidth_deg * beamwidth_deg)
        }
        AntennaModel::Omni { .. } => 1.0,
    }
}

/// Fading-averaged received power from a GBS at horizontal distance `r`.
pub fn mean_rx_power(link: LinkType, r: f64, z: f64, params: &SystemParams) -> Result<f64> {
    let r_m = params.receiving_radius(z)?;
    if r > r_m {
        return Err(Error::OutOfBeam { r, r_m });
    }
    Ok(params.p_t * params.total_gain() * path_loss(link, r, z, &params.channel, params.h_b)?)
}

/// Pre-built Gamma(m, 1/m) samplers for both link types.
#[derive(Debug, Clone, Copy)]
pub struct FadingSampler {
    los: Gamma<f64>,
    nlos: Gamma<f64>,
}

impl FadingSampler {
    pub fn new(ch: &ChannelParams) -> Self {
        let make = |m: u32| {
            let m = f64::from(m);
            Gamma::new(m, 1.0 / m).expect("fading shape validated as a positive integer")
        };
        FadingSampler {
            los: make(ch.m_l),
            nlos: make(ch.m_n),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, link: LinkType, rng: &mut R) -> f64 {
        match link {
            LinkType::Los => self.los.sample(rng),
            LinkType::Nlos => self.nlos.sample(rng),
        }
    }
}

/// Nakagami-m channel power gain, `Gamma(m, 1/m)` with unit mean.
pub fn sample_fading<R: Rng + ?Sized>(link: LinkType, ch: &ChannelParams, rng: &mut R) -> f64 {
    FadingSampler::new(ch).sample(link, rng)
}

/// Horizontal component of speed `v` along a hop of horizontal length
/// `rho_t` and height change `dz`. The degenerate no-move hop yields 0.
pub fn horizontal_speed(v: f64, rho_t: f64, dz: f64) -> f64 {
    let len = rho_t.hypot(dz);
    if len == 0.0 {
        return 0.0;
    }
    v * rho_t / len
}

/// Densities of the 3D random-waypoint mobility model.
#[derive(Debug, Clone, Copy)]
pub struct MobilityPdfs {
    mu: f64,
    h_lb: f64,
    h_ub: f64,
}

impl MobilityPdfs {
    /// Rayleigh transition-length density `2 pi mu r exp(-pi mu r^2)`.
    pub fn transition_length(&self, rho: f64) -> f64 {
        if rho < 0.0 {
            return 0.0;
        }
        2.0 * PI * self.mu * rho * (-PI * self.mu * rho * rho).exp()
    }

    pub fn height(&self, z: f64) -> f64 {
        if (self.h_lb..=self.h_ub).contains(&z) {
            1.0 / (self.h_ub - self.h_lb)
        } else {
            0.0
        }
    }

    pub fn direction(&self, theta: f64) -> f64 {
        if (0.0..=PI).contains(&theta) {
            1.0 / PI
        } else {
            0.0
        }
    }

    pub fn mean_transition_length(&self) -> f64 {
        0.5 / self.mu.sqrt()
    }
}

pub fn mobility_pdfs(params: &SystemParams) -> MobilityPdfs {
    MobilityPdfs {
        mu: params.mu,
        h_lb: params.h_lb,
        h_ub: params.h_ub,
    }
}
