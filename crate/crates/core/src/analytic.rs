//! Handover and coverage probabilities by nested adaptive quadrature.
//!
//! Conventions used throughout:
//! - Every SIR quantity is evaluated through the normalised Laplace argument
//!   `s = tau * P_t * G_tot`, so transmit power and GBS gain cancel exactly.
//! - The horizontal displacement of one hop is integrated with a per-height
//!   quadrature rule ([`DisplacementRule`]) that already averages over the
//!   transition length and the start height.
//! - Marginal quantities integrate `z` outermost, then the serving distance.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::association::{AssociationPolicy, HeightSlice};
use crate::error::{Error, Result};
use crate::geometry::{displaced_distance, equal_power_radius, lens_complement_area, DiskPair};
use crate::model::{LinkType, SystemParams};
use crate::quadrature::{gauss_legendre, integrate_vec, QuadratureSpec};
#[cfg(test)]
use crate::quadrature::integrate;

const DISPLACEMENT_NODES: usize = 20;
const DRIFT_TOLERANCE: f64 = 1e-6;
/// Serving-distance densities below this are skipped in marginal integrals.
const NEGLIGIBLE_DENSITY: f64 = 1e-15;

static CLAMP_DRIFT_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of probabilities that had to be clamped by more than 1e-6 since
/// start-up (or the last reset).
pub fn clamp_drift_events() -> u64 {
    CLAMP_DRIFT_EVENTS.load(Ordering::Relaxed)
}

pub fn reset_clamp_drift_events() {
    CLAMP_DRIFT_EVENTS.store(0, Ordering::Relaxed);
}

fn clamp_probability(p: f64) -> f64 {
    if !(p >= -DRIFT_TOLERANCE && p <= 1.0 + DRIFT_TOLERANCE) {
        CLAMP_DRIFT_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    p.clamp(0.0, 1.0)
}

/// Serving type, serving distance and end-of-hop height of one handover
/// question.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverContext {
    pub serving: LinkType,
    pub r0: f64,
    pub z_t: f64,
}

impl HandoverContext {
    fn check(&self, slice: &HeightSlice) -> Result<()> {
        if !(self.r0 >= 0.0) {
            return Err(Error::invalid("r0", "must be non-negative"));
        }
        if self.r0 > slice.r_m {
            return Err(Error::OutOfBeam {
                r: self.r0,
                r_m: slice.r_m,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverageBreakdown {
    /// Coverage including the connection-failure penalty on handover.
    pub total: f64,
    /// Contribution of LoS and NLoS serving links to `total`.
    pub per_link: [f64; 2],
    pub handover_prob: f64,
    pub void_prob: f64,
    /// Probability of being served by a LoS / NLoS GBS.
    pub association: [f64; 2],
    /// `P(SIR > T)`.
    pub sir_coverage: f64,
    /// `P(SIR > T, handover)`.
    pub sir_coverage_with_handover: f64,
}

impl CoverageBreakdown {
    /// Total coverage for another connection-failure probability; coverage
    /// is affine in `kappa`.
    pub fn with_kappa(&self, kappa: f64) -> f64 {
        self.sir_coverage - kappa * self.sir_coverage_with_handover
    }
}

/// Survival function of `V_h / V` for a hop ending at height `z_t`, with
/// the Rayleigh transition length and the uniform start height integrated
/// out in closed form.
pub fn speed_fraction_survival(s: f64, z_t: f64, params: &SystemParams) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let c = PI * params.mu * s * s / (1.0 - s * s);
    let root = c.sqrt();
    // \int_0^d exp(-c u^2) du, odd in d
    let segment = |d: f64| {
        let t = root * d;
        if t.abs() < 1e-8 {
            d
        } else {
            libm::erf(t) * PI.sqrt() / (2.0 * root)
        }
    };
    ((segment(params.h_ub - z_t) + segment(z_t - params.h_lb)) / params.height_band()).clamp(0.0, 1.0)
}

/// Quadrature nodes and weights for the horizontal displacement `V_h` of
/// one hop ending at `z_t`.
///
/// Built on the quantile function of `V_h`: `E[g(V_h)] = \int_0^1 g(Q(p)) dp`
/// with `p = u^2` to absorb the square-root behaviour of `Q` near 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementRule {
    pub lengths: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DisplacementRule {
    pub fn new(z_t: f64, params: &SystemParams) -> Self {
        if params.v == 0.0 {
            return DisplacementRule {
                lengths: vec![0.0],
                weights: vec![1.0],
            };
        }
        let (nodes, gl_weights) = gauss_legendre(DISPLACEMENT_NODES);
        let mut lengths = Vec::with_capacity(DISPLACEMENT_NODES);
        let mut weights = Vec::with_capacity(DISPLACEMENT_NODES);
        for (t, w) in nodes.iter().zip(&gl_weights) {
            let u = 0.5 * (t + 1.0);
            let target = 1.0 - u * u;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if speed_fraction_survival(mid, z_t, params) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lengths.push(params.v * 0.5 * (lo + hi));
            weights.push(w * u);
        }
        DisplacementRule { lengths, weights }
    }

    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.lengths.iter().zip(&self.weights).map(|(&l, &w)| w * g(l)).sum()
    }
}

/// Intensity of the candidate target GBSs of one link type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetDensity {
    /// `lambda_b P_target(x, z)`: the independently thinned type field.
    #[default]
    Thinned,
    /// The full `lambda_b` for every target type.
    Unthinned,
}

const BAND_NODES: usize = 8;
const DIRECTION_NODES: usize = 20;

/// `\int_{B \ A} w(|p - q_t|) dp` for the disks of `p`, with `B` centred at
/// the origin, given `mass(r) = \int_0^r u w(u) du` and `radial(u) = u w(u)`.
///
/// Circles around the origin are fully outside `A` beyond `x + v` and below
/// `v - x`, fully inside below `x - v`; only the band in between needs
/// quadrature, done
/// after a cosine substitution that absorbs the arc-length square roots.
pub(crate) fn weighted_lens_complement(
    p: DiskPair,
    mass: impl Fn(f64) -> f64,
    radial: impl Fn(f64) -> f64,
    gl: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let DiskPair { x, y, v } = p;
    if y <= 0.0 || v + y <= x {
        return 0.0;
    }
    let outer = x + v;
    let mut total = 0.0;
    if y > outer {
        total += 2.0 * PI * (mass(y) - mass(outer));
    }
    let inner = (x - v).abs();
    if x < v {
        // circles smaller than v - x miss A entirely
        total += 2.0 * PI * mass(y.min(inner));
    }
    let lo = inner;
    let hi = y.min(outer);
    if hi > lo && v > 0.0 {
        // The arc length has square-root ends at `|x - v|` and `x + v`. A
        // band cut short by `y` close to `x + v` is integrated as the full
        // band minus its tail, keeping the singularities at piece endpoints.
        let arc = |rho: f64| {
            let c = ((rho * rho + v * v - x * x) / (2.0 * rho * v)).clamp(-1.0, 1.0);
            2.0 * PI - 2.0 * c.acos()
        };
        let piece = |a: f64, b: f64| {
            let half = 0.5 * (b - a);
            let (nodes, weights) = gl;
            let mut acc = 0.0;
            for (t, w) in nodes.iter().zip(weights) {
                // rho = a + (b - a) (1 - cos phi) / 2, phi in [0, pi]
                let phi = 0.5 * PI * (t + 1.0);
                let rho = a + half * (1.0 - phi.cos());
                if rho > 0.0 {
                    acc += w * half * phi.sin() * radial(rho) * arc(rho);
                }
            }
            acc * 0.5 * PI
        };
        if outer - hi < hi - lo {
            total += piece(lo, outer) - piece(hi, outer);
        } else {
            total += piece(lo, hi);
        }
    }
    total.max(0.0)
}

/// Conditional handover probabilities at one end-of-hop height.
pub struct HandoverEvaluator<'s, 'p> {
    slice: &'s HeightSlice<'p>,
    rule: DisplacementRule,
    density: TargetDensity,
    band_rule: (Vec<f64>, Vec<f64>),
    direction_rule: (Vec<f64>, Vec<f64>),
}

impl<'s, 'p> HandoverEvaluator<'s, 'p> {
    pub fn new(slice: &'s HeightSlice<'p>) -> Self {
        Self::with_density(slice, TargetDensity::default())
    }

    pub fn with_density(slice: &'s HeightSlice<'p>, density: TargetDensity) -> Self {
        HandoverEvaluator {
            slice,
            rule: DisplacementRule::new(slice.z, slice.params),
            density,
            band_rule: gauss_legendre(BAND_NODES),
            direction_rule: gauss_legendre(DIRECTION_NODES),
        }
    }

    /// Probability that a `target`-type GBS outperforms the `serving`-type
    /// GBS at horizontal distance `r0` after the hop.
    pub fn conditional(&self, serving: LinkType, target: LinkType, r0: f64) -> Result<f64> {
        self.new_region_probability(r0, &[Disks::Typed { serving, target }])
    }

    /// Handover towards a GBS of either type. Given the hop, the two type
    /// fields are independent, so their void probabilities multiply inside
    /// the average over the hop.
    pub fn conditional_any(&self, serving: LinkType, r0: f64) -> Result<f64> {
        let disks = LinkType::ALL.map(|target| Disks::Typed { serving, target });
        self.new_region_probability(r0, &disks)
    }

    pub fn no_handover(&self, serving: LinkType, r0: f64) -> Result<f64> {
        Ok(1.0 - self.conditional_any(serving, r0)?)
    }

    /// Handover under nearest association: a GBS appears closer than the
    /// serving one after the hop.
    pub fn conditional_nearest(&self, r0: f64) -> Result<f64> {
        self.new_region_probability(r0, &[Disks::Nearest])
    }

    fn radius(&self, disks: Disks, u: f64) -> f64 {
        match disks {
            Disks::Typed { serving, target } => {
                equal_power_radius(serving, target, u, self.slice.h_bar, &self.slice.params.channel)
            }
            Disks::Nearest => u,
        }
    }

    /// Inverse of [`Self::radius`] on its positive range; maps 0 to the
    /// largest argument with zero radius.
    fn inverse(&self, disks: Disks, y: f64) -> f64 {
        match disks {
            Disks::Typed { serving, target } => {
                equal_power_radius(target, serving, y, self.slice.h_bar, &self.slice.params.channel)
            }
            Disks::Nearest => y,
        }
    }

    fn measure(&self, disks: Disks, p: DiskPair) -> f64 {
        match (disks, self.density) {
            (Disks::Typed { target, .. }, TargetDensity::Thinned) => weighted_lens_complement(
                p,
                |r| self.slice.mass(target, r),
                |u| self.slice.radial_density(target, u),
                &self.band_rule,
            ),
            _ => lens_complement_area(p),
        }
    }

    /// `1 - E[exp(-lambda sum_k m_k(B_k \ A_k))]` over the listed target
    /// fields, with `A_k` the pre-hop disk of radius `radius(r0)`, `B_k` the
    /// post-hop disk of radius `min(radius(R), r_M)` and `m_k` the target
    /// measure, averaged over direction and displacement.
    ///
    /// For each displacement the direction integral is split where any `y`
    /// crosses `0`, `|x - v|`, `x + v` or `r_M`, which leaves smooth pieces
    /// for a fixed rule.
    fn new_region_probability(&self, r0: f64, disks: &[Disks]) -> Result<f64> {
        let params = self.slice.params;
        let lam = params.lambda_b;
        let r_m = self.slice.r_m;
        if lam == 0.0 {
            return Ok(0.0);
        }
        let mut active: Vec<(Disks, f64)> = Vec::with_capacity(disks.len());
        for &d in disks {
            let x = self.radius(d, r0);
            // skip fields whose post-hop disk stays empty or inside the pre-hop one
            if self.radius(d, r0 + params.v) > 0.0 && x < r_m + params.v {
                active.push((d, x));
            }
        }
        if active.is_empty() {
            return Ok(0.0);
        }
        let point = |theta: f64, v: f64| {
            let r = displaced_distance(r0, v, theta);
            let mass: f64 = active
                .iter()
                .map(|&(d, x)| {
                    let y = self.radius(d, r).min(r_m);
                    self.measure(d, DiskPair { x, y, v })
                })
                .sum();
            -(-lam * mass).exp_m1()
        };
        let (nodes, weights) = &self.direction_rule;
        let mut total = 0.0;
        let mut cuts = Vec::with_capacity(2 + 4 * active.len());
        for (&v, &w) in self.rule.lengths.iter().zip(&self.rule.weights) {
            if v == 0.0 || r0 == 0.0 {
                total += w * point(0.0, v);
                continue;
            }
            cuts.clear();
            cuts.push(0.0);
            cuts.push(PI);
            for &(d, x) in &active {
                for y_cut in [0.0, (x - v).abs(), x + v, r_m] {
                    let r_cut = self.inverse(d, y_cut);
                    let c = (r_cut * r_cut - r0 * r0 - v * v) / (2.0 * r0 * v);
                    if c > -1.0 && c < 1.0 {
                        cuts.push(c.acos());
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            let mut piece_sum = 0.0;
            for pair in cuts.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if b - a <= 1e-12 {
                    continue;
                }
                let half = 0.5 * (b - a);
                // theta = a + (b - a) (1 - cos phi) / 2 clusters nodes at
                // the cuts, where the area has square-root behaviour
                let mut acc = 0.0;
                for (t, gw) in nodes.iter().zip(weights) {
                    let phi = 0.5 * PI * (t + 1.0);
                    let theta = a + half * (1.0 - phi.cos());
                    acc += gw * half * phi.sin() * point(theta, v);
                }
                piece_sum += acc * 0.5 * PI;
            }
            total += w * piece_sum / PI;
        }
        Ok(clamp_probability(total))
    }

    /// Reference evaluation with an adaptive direction integral.
    #[cfg(test)]
    fn new_region_probability_adaptive(&self, r0: f64, disks: &[Disks], spec: &QuadratureSpec) -> Result<f64> {
        let lam = self.slice.params.lambda_b;
        let r_m = self.slice.r_m;
        let total = integrate(
            |theta| {
                self.rule.expect(|v| {
                    let r = displaced_distance(r0, v, theta);
                    let mass: f64 = disks
                        .iter()
                        .map(|&d| {
                            let x = self.radius(d, r0);
                            let y = self.radius(d, r).min(r_m);
                            self.measure(d, DiskPair { x, y, v })
                        })
                        .sum();
                    -(-lam * mass).exp_m1()
                })
            },
            0.0,
            PI,
            spec,
        )?;
        Ok(total / PI)
    }
}

/// Which pair of disks a handover question is about.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Disks {
    /// Equal-power disks of one target type against a typed serving link.
    Typed { serving: LinkType, target: LinkType },
    /// Plain distance disks of nearest association.
    Nearest,
}

/// Lower integration limits of the interferer field, per link type.
fn interference_limits(slice: &HeightSlice, serving: LinkType, r0: f64, policy: AssociationPolicy) -> [f64; 2] {
    match policy {
        AssociationPolicy::Nearest => [r0; 2],
        AssociationPolicy::StrongestRss => {
            let mut limits = [0.0; 2];
            limits[serving.index()] = r0;
            limits[serving.other().index()] = slice.exclusion(serving, r0);
            limits
        }
    }
}

/// Normalised series of the log-Laplace transform at `s = tau P_t G_tot`:
/// entry 0 is `log L(tau)`, entry `k >= 1` is `(-tau)^k / k! * d^k log L`.
fn exponent_series(slice: &HeightSlice, limits: [f64; 2], s: f64, n_terms: usize, spec: &QuadratureSpec) -> Result<Vec<f64>> {
    let mut total = vec![0.0; n_terms];
    let lam = slice.params.lambda_b;
    if lam == 0.0 || n_terms == 0 {
        return Ok(total);
    }
    for link in LinkType::ALL {
        let lo = limits[link.index()];
        if lo >= slice.r_m {
            continue;
        }
        let m = slice.params.channel.fading_shape(link) as f64;
        let part = integrate_vec(
            n_terms,
            |x, out| {
                let weight = slice.type_probability(link, x) * x;
                let sz = s * slice.path_gain(link, x);
                let log_keep = -(sz / m).ln_1p();
                out[0] = weight * (m * log_keep).exp_m1();
                let log_q = sz.ln() - (m + sz).ln();
                let mut log_binom = 0.0;
                for k in 1..n_terms {
                    let kf = k as f64;
                    log_binom += ((m + kf - 1.0) / kf).ln();
                    out[k] = weight * (log_binom + m * log_keep + kf * log_q).exp();
                }
                Ok(())
            },
            lo,
            slice.r_m,
            spec,
        )?;
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    for t in &mut total {
        *t *= 2.0 * PI * lam;
    }
    Ok(total)
}

/// `sum_{l < n} (-tau)^l / l! L^(l)(tau)` from the normalised exponent
/// series.
fn truncated_series_sum(series: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(series.len());
    terms.push(series[0].exp());
    for l in 1..series.len() {
        let lf = l as f64;
        let term: f64 = (0..l).map(|j| (lf - j as f64) / lf * terms[j] * series[l - j]).sum();
        terms.push(term);
    }
    terms.iter().sum()
}

/// SIR coverage at a serving distance, all inside one height slice.
fn coverage_at(slice: &HeightSlice, serving: LinkType, r0: f64, policy: AssociationPolicy, spec: &QuadratureSpec) -> Result<f64> {
    let p = slice.params;
    let m = p.channel.fading_shape(serving);
    let s = m as f64 * p.t_thresh / slice.path_gain(serving, r0);
    let limits = interference_limits(slice, serving, r0, policy);
    let series = exponent_series(slice, limits, s, m as usize, spec)?;
    Ok(clamp_probability(truncated_series_sum(&series)))
}

fn checked_slice<'p>(params: &'p SystemParams, serving_r0: f64, z: f64) -> Result<HeightSlice<'p>> {
    params.validate()?;
    let slice = HeightSlice::new(params, z)?;
    HandoverContext {
        serving: LinkType::Los,
        r0: serving_r0,
        z_t: z,
    }
    .check(&slice)?;
    Ok(slice)
}

pub fn conditional_handover(ctx: HandoverContext, target: LinkType, params: &SystemParams) -> Result<f64> {
    let slice = checked_slice(params, ctx.r0, ctx.z_t)?;
    HandoverEvaluator::new(&slice).conditional(ctx.serving, target, ctx.r0)
}

pub fn conditional_handover_any(ctx: HandoverContext, params: &SystemParams) -> Result<f64> {
    let slice = checked_slice(params, ctx.r0, ctx.z_t)?;
    HandoverEvaluator::new(&slice).conditional_any(ctx.serving, ctx.r0)
}

/// Laplace transform of the aggregate interference (argument in 1/W).
pub fn laplace_interference(tau: f64, serving: LinkType, r0: f64, z: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    Ok(laplace_derivatives(tau, serving, r0, z, params, 0, spec)?[0])
}

/// `L^(0..=max_order)(tau)` of the aggregate interference.
pub fn laplace_derivatives(
    tau: f64,
    serving: LinkType,
    r0: f64,
    z: f64,
    params: &SystemParams,
    max_order: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", "must be finite and non-negative"));
    }
    let m_serving = params.channel.fading_shape(serving) as usize;
    if max_order + 1 > m_serving {
        return Err(Error::invalid(
            "max_order",
            format!("at most m - 1 = {} for a {} serving link", m_serving - 1, serving.as_str()),
        ));
    }
    let slice = checked_slice(params, r0, z)?;
    let limits = interference_limits(&slice, serving, r0, params.policy);
    let n = max_order + 1;
    let scale = params.p_t * params.total_gain();
    let lam = params.lambda_b;

    // Derivatives of the exponent g = log L, using
    // d^k gamma / dtau^k = (-1)^(k+1) (m)_k c^k (1 + tau c / m)^(-m) (m + tau c)^(-k).
    let mut g = vec![0.0; n];
    if lam > 0.0 {
        for link in LinkType::ALL {
            let lo = limits[link.index()];
            if lo >= slice.r_m {
                continue;
            }
            let m = params.channel.fading_shape(link) as f64;
            let part = integrate_vec(
                n,
                |x, out| {
                    let weight = slice.type_probability(link, x) * x;
                    let c = scale * slice.path_gain(link, x);
                    let log_keep = -(tau * c / m).ln_1p();
                    out[0] = weight * (m * log_keep).exp_m1();
                    let log_ratio = c.ln() - (m + tau * c).ln();
                    let mut log_rising = 0.0;
                    for k in 1..n {
                        let kf = k as f64;
                        log_rising += (m + kf - 1.0).ln();
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        out[k] = sign * weight * (log_rising + kf * log_ratio + m * log_keep).exp();
                    }
                    Ok(())
                },
                lo,
                slice.r_m,
                spec,
            )?;
            for (t, p) in g.iter_mut().zip(part) {
                *t += 2.0 * PI * lam * p;
            }
        }
    }

    let mut out = Vec::with_capacity(n);
    out.push(g[0].exp());
    for l in 1..n {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..l {
            acc += binom * out[j] * g[l - j];
            binom *= (l - 1 - j) as f64 / (j + 1) as f64;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Probability that the SIR exceeds the threshold given a `serving`-type
/// link at horizontal distance `r0` and UAV height `z`.
pub fn conditional_coverage(serving: LinkType, r0: f64, z: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    let slice = checked_slice(params, r0, z)?;
    coverage_at(&slice, serving, r0, params.policy, spec)
}

// Layout of the per-height vector integrated over the serving distance:
// for each link type [association, S, S and handover, handover].
const PER_LINK: usize = 4;
const DIM: usize = 2 * PER_LINK + 1;

fn serving_distance_integrand(
    slice: &HeightSlice,
    handover: &HandoverEvaluator,
    policy: AssociationPolicy,
    with_coverage: bool,
    r0: f64,
    out: &mut [f64],
    spec: &QuadratureSpec,
) -> Result<()> {
    match policy {
        AssociationPolicy::StrongestRss => {
            for serving in LinkType::ALL {
                let density = slice.joint_serving_density(serving, r0);
                if density < NEGLIGIBLE_DENSITY {
                    continue;
                }
                let p_h = handover.conditional_any(serving, r0)?;
                let cov = if with_coverage {
                    coverage_at(slice, serving, r0, policy, spec)?
                } else {
                    0.0
                };
                let o = &mut out[serving.index() * PER_LINK..][..PER_LINK];
                o[0] = density;
                o[1] = density * cov;
                o[2] = density * cov * p_h;
                o[3] = density * p_h;
            }
        }
        AssociationPolicy::Nearest => {
            let base = slice.nearest_any_pdf(r0);
            if base < NEGLIGIBLE_DENSITY {
                return Ok(());
            }
            let p_h = handover.conditional_nearest(r0)?;
            for serving in LinkType::ALL {
                let density = base * slice.type_probability(serving, r0);
                let cov = if with_coverage && density >= NEGLIGIBLE_DENSITY {
                    coverage_at(slice, serving, r0, policy, spec)?
                } else {
                    0.0
                };
                let o = &mut out[serving.index() * PER_LINK..][..PER_LINK];
                o[0] = density;
                o[1] = density * cov;
                o[2] = density * cov * p_h;
                o[3] = density * p_h;
            }
        }
    }
    Ok(())
}

fn marginalise(params: &SystemParams, policy: AssociationPolicy, with_coverage: bool, density: TargetDensity, spec: &QuadratureSpec) -> Result<CoverageBreakdown> {
    params.validate()?;
    spec.validate()?;
    let inner = spec.tightened(10.0);
    let innermost = spec.tightened(100.0);
    let f_z = 1.0 / params.height_band();
    let sums = integrate_vec(
        DIM,
        |z, out| {
            let slice = HeightSlice::new(params, z)?;
            out[DIM - 1] = f_z * slice.void_probability();
            if params.lambda_b == 0.0 {
                return Ok(());
            }
            let handover = HandoverEvaluator::with_density(&slice, density);
            let per_height = integrate_vec(
                DIM - 1,
                |r0, o| serving_distance_integrand(&slice, &handover, policy, with_coverage, r0, o, &innermost),
                0.0,
                slice.r_m,
                &inner,
            )?;
            for (o, v) in out.iter_mut().zip(per_height) {
                *o = f_z * v;
            }
            Ok(())
        },
        params.h_lb,
        params.h_ub,
        spec,
    )?;

    let mut b = CoverageBreakdown {
        void_prob: clamp_probability(sums[DIM - 1]),
        ..CoverageBreakdown::default()
    };
    for link in LinkType::ALL {
        let o = &sums[link.index() * PER_LINK..][..PER_LINK];
        b.association[link.index()] = clamp_probability(o[0]);
        b.per_link[link.index()] = clamp_probability(o[1] - params.kappa * o[2]);
        b.sir_coverage += o[1];
        b.sir_coverage_with_handover += o[2];
        b.handover_prob += o[3];
    }
    b.sir_coverage = clamp_probability(b.sir_coverage);
    b.sir_coverage_with_handover = clamp_probability(b.sir_coverage_with_handover);
    b.handover_prob = clamp_probability(b.handover_prob);
    b.total = clamp_probability(b.with_kappa(params.kappa));
    Ok(b)
}

/// Marginal handover probability under `params.policy`; a UAV with no GBS
/// in range never hands over.
pub fn handover_probability(params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    handover_probability_with_density(params, TargetDensity::default(), spec)
}

/// [`handover_probability`] with an explicit target-field intensity.
pub fn handover_probability_with_density(params: &SystemParams, density: TargetDensity, spec: &QuadratureSpec) -> Result<f64> {
    Ok(marginalise(params, params.policy, false, density, spec)?.handover_prob)
}

/// Association, void and handover probabilities without the SIR integrals.
pub fn association_breakdown(params: &SystemParams, spec: &QuadratureSpec) -> Result<CoverageBreakdown> {
    marginalise(params, params.policy, false, TargetDensity::default(), spec)
}

/// Coverage under strongest-mean-power association.
pub fn coverage_probability(params: &SystemParams, spec: &QuadratureSpec) -> Result<CoverageBreakdown> {
    marginalise(params, AssociationPolicy::StrongestRss, true, TargetDensity::default(), spec)
}

/// Coverage under nearest-GBS association.
pub fn coverage_probability_nearest(params: &SystemParams, spec: &QuadratureSpec) -> Result<CoverageBreakdown> {
    marginalise(params, AssociationPolicy::Nearest, true, TargetDensity::default(), spec)
}

/// Coverage under `params.policy`.
pub fn evaluate(params: &SystemParams, spec: &QuadratureSpec) -> Result<CoverageBreakdown> {
    marginalise(params, params.policy, true, TargetDensity::default(), spec)
}
