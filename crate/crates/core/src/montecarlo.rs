//! Network simulator used as the reference for every analytic quantity.
//!
//! Each episode samples one GBS field, one movement, link marks and fading,
//! then records association, handover and coverage events. Episode
//! `e` of a run draws from ChaCha stream `e` of the run seed, so estimates do
//! not depend on scheduling or thread count.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::association::AssociationPolicy;
use crate::error::{Error, Result};
use crate::model::{horizontal_speed, los_probability, FadingSampler, LinkType, SystemParams, Waypoint};

/// Extra disc radius beyond the receiving radius and the largest hop.
pub const FIELD_MARGIN_M: f64 = 50.0;

const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// GBS positions on a disc centred at the origin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GbsField {
    pub positions: Vec<[f64; 2]>,
    pub radius: f64,
}

impl GbsField {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// How link marks at the two evaluation sites relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkModel {
    /// Fresh Bernoulli draw per GBS and site.
    Independent,
    /// One uniform per GBS shared by both sites, so a GBS keeps its type
    /// unless the LoS probability crosses its uniform. A UAV that does not
    /// move sees the same marks.
    #[default]
    Persistent,
}

/// UAV height used for the pre-move association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreHeight {
    /// Both sites at the current waypoint height `z_t`.
    #[default]
    Current,
    /// Pre-move site at the previous waypoint height `z_{t-1}`.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McOptions {
    pub marks: MarkModel,
    pub pre_height: PreHeight,
    /// Width (m) of an extra ring of GBSs around the standard field. The
    /// ring has its own random stream, so the rest of each episode is
    /// unchanged; used to check that the field is large enough.
    pub outer_ring_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub id: usize,
    pub link: LinkType,
    /// Horizontal distance (m).
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub associated_pre: Option<Association>,
    pub associated_post: Option<Association>,
    pub handover: bool,
    pub void_pre: bool,
    pub void_post: bool,
    /// SIR at the post-move site; `None` when that site is void.
    pub sir: Option<f64>,
    /// `sir > T` regardless of any handover failure.
    pub sir_above: bool,
    pub covered: bool,
}

/// Proportion (or mean) estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Wilson score interval for `successes` out of `n`.
    pub fn proportion(successes: u64, n: u64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, n);
        McEstimate {
            mean: successes as f64 / n.max(1) as f64,
            ci_low,
            ci_high,
            n,
            seed,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.ci_low..=self.ci_high).contains(&x)
    }
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = WILSON_Z95 * WILSON_Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // at p = 0 or 1 the closed form lands a rounding error inside the bound
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

/// RNG for episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Homogeneous PPP of density `lambda_b` on the disc of radius `r_field`.
pub fn sample_ppp<R: Rng + ?Sized>(lambda_b: f64, r_field: f64, rng: &mut R) -> GbsField {
    let mean = lambda_b * PI * r_field * r_field;
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let positions = (0..count)
        .map(|_| {
            let r = r_field * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            [r * phi.cos(), r * phi.sin()]
        })
        .collect();
    GbsField {
        positions,
        radius: r_field,
    }
}

/// Independent LoS/NLoS marks of every GBS as seen from `uav`.
pub fn classify_links<R: Rng + ?Sized>(field: &GbsField, uav: &Waypoint, params: &SystemParams, rng: &mut R) -> Vec<LinkType> {
    field
        .positions
        .iter()
        .map(|&[x, y]| mark(uav.horizontal_distance(x, y), uav, params, rng.random()))
        .collect()
}

#[inline]
fn mark(r: f64, uav: &Waypoint, params: &SystemParams, u: f64) -> LinkType {
    if u < los_probability(r, uav.z, &params.env, params.h_b) {
        LinkType::Los
    } else {
        LinkType::Nlos
    }
}

/// Serving GBS among those within the receiving radius of `uav`; `None` if
/// none is in range. Ties go to the lowest id.
pub fn associate(field: &GbsField, types: &[LinkType], uav: &Waypoint, policy: AssociationPolicy, params: &SystemParams) -> Result<Option<Association>> {
    let r_m = params.receiving_radius(uav.z)?;
    let h_bar = uav.z - params.h_b;
    Ok(select(field.positions.iter().zip(types).enumerate().map(|(id, (&[x, y], &t))| (id, uav.horizontal_distance(x, y), t)), r_m, h_bar, policy, params))
}

fn select(candidates: impl Iterator<Item = (usize, f64, LinkType)>, r_m: f64, h_bar: f64, policy: AssociationPolicy, params: &SystemParams) -> Option<Association> {
    let mut best: Option<(Association, f64)> = None;
    for (id, r, link) in candidates {
        if r > r_m {
            continue;
        }
        let metric = match policy {
            AssociationPolicy::StrongestRss => params.channel.gain_sq(link, r * r + h_bar * h_bar),
            AssociationPolicy::Nearest => -r,
        };
        if best.as_ref().is_none_or(|&(_, m)| metric > m) {
            best = Some((Association { id, link, r }, metric));
        }
    }
    best.map(|(a, _)| a)
}

/// Disc radius that holds both receiving discs of any episode.
pub fn field_radius(params: &SystemParams) -> Result<f64> {
    Ok(params.receiving_radius(params.h_ub)? + params.v + FIELD_MARGIN_M)
}

/// Adds a PPP of density `lambda_b` on the ring of width `width` around
/// `field`, widening its radius.
fn extend_with_ring<R: Rng + ?Sized>(field: &mut GbsField, lambda_b: f64, width: f64, rng: &mut R) {
    let (r_in, r_out) = (field.radius, field.radius + width);
    let (a_in, a_out) = (r_in * r_in, r_out * r_out);
    let mean = lambda_b * PI * (a_out - a_in);
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    for _ in 0..count {
        let r = (a_in + (a_out - a_in) * rng.random::<f64>()).sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        field.positions.push([r * phi.cos(), r * phi.sin()]);
    }
    field.radius = r_out;
}

/// Rayleigh hop length with mobility parameter `mu`.
fn sample_hop<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (-(1.0 - u).ln() / (PI * mu)).sqrt()
}

pub fn simulate_episode<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<EpisodeOutcome> {
    simulate_episode_with(params, &McOptions::default(), &FadingSampler::new(&params.channel), rng)
}

pub fn simulate_episode_with<R: Rng + ?Sized>(params: &SystemParams, opts: &McOptions, fading: &FadingSampler, rng: &mut R) -> Result<EpisodeOutcome> {
    let z_prev = rng.random_range(params.h_lb..=params.h_ub);
    let z_t = rng.random_range(params.h_lb..=params.h_ub);
    let rho = sample_hop(params.mu, rng);
    let theta = rng.random::<f64>() * PI;
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let v_h = horizontal_speed(params.v, rho, z_t - z_prev);

    let mut field = sample_ppp(params.lambda_b, field_radius(params)?, rng);
    let inner = field.len();
    let mut ring_rng = ChaCha8Rng::seed_from_u64(rng.random());
    if opts.outer_ring_m > 0.0 {
        extend_with_ring(&mut field, params.lambda_b, opts.outer_ring_m, &mut ring_rng);
    }
    let pre_site = Waypoint {
        x: 0.0,
        y: 0.0,
        z: match opts.pre_height {
            PreHeight::Current => z_t,
            PreHeight::Previous => z_prev,
        },
    };
    let shared: Vec<f64> = match opts.marks {
        MarkModel::Persistent => (0..field.len())
            .map(|i| if i < inner { rng.random() } else { ring_rng.random() })
            .collect(),
        MarkModel::Independent => Vec::new(),
    };
    let mut marks_at = |site: &Waypoint, rng: &mut R| -> Vec<LinkType> {
        match opts.marks {
            MarkModel::Independent => field
                .positions
                .iter()
                .enumerate()
                .map(|(i, &[x, y])| {
                    let u = if i < inner { rng.random() } else { ring_rng.random() };
                    mark(site.horizontal_distance(x, y), site, params, u)
                })
                .collect(),
            MarkModel::Persistent => field
                .positions
                .iter()
                .zip(&shared)
                .map(|(&[x, y], &u)| mark(site.horizontal_distance(x, y), site, params, u))
                .collect(),
        }
    };

    let types_pre = marks_at(&pre_site, rng);
    let pre = associate(&field, &types_pre, &pre_site, params.policy, params)?;
    let bearing = pre.map_or(0.0, |a| {
        let [x, y] = field.positions[a.id];
        y.atan2(x)
    });
    // theta = 0 is straight away from the serving GBS
    let heading = bearing + PI + side * theta;
    let post_site = Waypoint {
        x: v_h * heading.cos(),
        y: v_h * heading.sin(),
        z: z_t,
    };
    let types_post = marks_at(&post_site, rng);
    let post = associate(&field, &types_post, &post_site, params.policy, params)?;
    let handover = matches!((pre, post), (Some(a), Some(b)) if a.id != b.id);

    let sir = match post {
        Some(serving) => Some(sample_sir(&field, &types_post, &post_site, serving.id, params, fading, rng)?),
        None => None,
    };
    let sir_above = sir.is_some_and(|s| s > params.t_thresh);
    let survives = !handover || rng.random::<f64>() >= params.kappa;
    Ok(EpisodeOutcome {
        associated_pre: pre,
        associated_post: post,
        handover,
        void_pre: pre.is_none(),
        void_post: post.is_none(),
        sir,
        sir_above,
        covered: sir_above && survives,
    })
}

/// SIR at `site` with independent fading on every in-range link. The
/// common factor `P_t G_tot` is left out, so outcomes do not depend on it.
fn sample_sir<R: Rng + ?Sized>(field: &GbsField, types: &[LinkType], site: &Waypoint, serving: usize, params: &SystemParams, fading: &FadingSampler, rng: &mut R) -> Result<f64> {
    let r_m = params.receiving_radius(site.z)?;
    let h2 = (site.z - params.h_b).powi(2);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (id, (&[x, y], &link)) in field.positions.iter().zip(types).enumerate() {
        let r = site.horizontal_distance(x, y);
        if r > r_m {
            continue;
        }
        let p = params.channel.gain_sq(link, r * r + h2) * fading.sample(link, rng);
        if id == serving {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(if interference > 0.0 { signal / interference } else { f64::INFINITY })
}

/// Event counts over a run of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct McCounts {
    pub n: u64,
    pub assoc_los: u64,
    pub assoc_nlos: u64,
    pub void_pre: u64,
    pub handover: u64,
    pub sir_above: u64,
    pub sir_above_with_handover: u64,
    pub covered: u64,
}

impl McCounts {
    fn add(&mut self, o: &EpisodeOutcome) {
        self.n += 1;
        match o.associated_pre.map(|a| a.link) {
            Some(LinkType::Los) => self.assoc_los += 1,
            Some(LinkType::Nlos) => self.assoc_nlos += 1,
            None => self.void_pre += 1,
        }
        self.handover += u64::from(o.handover);
        self.sir_above += u64::from(o.sir_above);
        self.sir_above_with_handover += u64::from(o.sir_above && o.handover);
        self.covered += u64::from(o.covered);
    }

    fn merge(mut self, other: McCounts) -> McCounts {
        self.n += other.n;
        self.assoc_los += other.assoc_los;
        self.assoc_nlos += other.assoc_nlos;
        self.void_pre += other.void_pre;
        self.handover += other.handover;
        self.sir_above += other.sir_above;
        self.sir_above_with_handover += other.sir_above_with_handover;
        self.covered += other.covered;
        self
    }
}

/// Estimates of every episode-level metric from one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub counts: McCounts,
    pub seed: u64,
}

impl McSummary {
    fn est(&self, k: u64) -> McEstimate {
        McEstimate::proportion(k, self.counts.n, self.seed)
    }

    pub fn association(&self, link: LinkType) -> McEstimate {
        self.est(match link {
            LinkType::Los => self.counts.assoc_los,
            LinkType::Nlos => self.counts.assoc_nlos,
        })
    }

    pub fn void(&self) -> McEstimate {
        self.est(self.counts.void_pre)
    }

    pub fn handover(&self) -> McEstimate {
        self.est(self.counts.handover)
    }

    pub fn coverage(&self) -> McEstimate {
        self.est(self.counts.covered)
    }

    /// `P(SIR > T)` ignoring handover failures.
    pub fn sir_coverage(&self) -> McEstimate {
        self.est(self.counts.sir_above)
    }

    pub fn sir_coverage_with_handover(&self) -> McEstimate {
        self.est(self.counts.sir_above_with_handover)
    }
}

fn check_trials(n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(Error::invalid("trials", format!("must be at least {min}")));
    }
    Ok(())
}

/// Runs `n` episodes and tallies every event.
pub fn simulate(params: &SystemParams, n: u64, seed: u64) -> Result<McSummary> {
    simulate_with(params, &McOptions::default(), n, seed)
}

pub fn simulate_with(params: &SystemParams, opts: &McOptions, n: u64, seed: u64) -> Result<McSummary> {
    params.validate()?;
    check_trials(n, 1)?;
    let fading = FadingSampler::new(&params.channel);
    let counts = (0..n)
        .into_par_iter()
        .try_fold(McCounts::default, |mut acc, e| {
            let outcome = simulate_episode_with(params, opts, &fading, &mut episode_rng(seed, e))?;
            acc.add(&outcome);
            Ok(acc)
        })
        .try_reduce(McCounts::default, |a, b| Ok(a.merge(b)))?;
    Ok(McSummary { counts, seed })
}

/// Proportion of `n` episodes for which `metric` holds.
pub fn estimate<F>(metric: F, n: u64, seed: u64, params: &SystemParams) -> Result<McEstimate>
where
    F: Fn(&EpisodeOutcome) -> bool + Sync,
{
    params.validate()?;
    check_trials(n, 100)?;
    let fading = FadingSampler::new(&params.channel);
    let opts = McOptions::default();
    let hits = (0..n)
        .into_par_iter()
        .map(|e| simulate_episode_with(params, &opts, &fading, &mut episode_rng(seed, e)).map(|o| u64::from(metric(&o))))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(McEstimate::proportion(hits, n, seed))
}

/// Estimates conditioned on a `serving`-type GBS at horizontal distance `r0`
/// being the serving GBS of a UAV at height `z_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedEstimates {
    /// Serving GBS changes after one move.
    pub handover: McEstimate,
    /// Handover towards a GBS of the given type.
    pub handover_to: [McEstimate; 2],
    /// `P(SIR > T)` before the move.
    pub coverage: McEstimate,
    /// Accepted fields over sampled fields.
    pub acceptance_rate: f64,
}

/// Rejection-sampled field with a pinned serving GBS at id 0.
struct PinnedField {
    field: GbsField,
    types: Vec<LinkType>,
    /// Mark uniforms; entry 0 belongs to the pinned GBS and is unused.
    uniforms: Vec<f64>,
    attempts: u64,
}

const MIN_ACCEPTANCE: f64 = 1e-4;
const ACCEPTANCE_PROBE: u64 = 100_000;

/// Samples fields until no GBS beats the pinned one at the origin; the pinned
/// GBS sits on the positive x axis.
fn sample_pinned<R: Rng + ?Sized>(params: &SystemParams, serving: LinkType, r0: f64, site: &Waypoint, r_field: f64, rng: &mut R) -> Result<PinnedField> {
    let r_m = params.receiving_radius(site.z)?;
    let h_bar = site.z - params.h_b;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let mut field = sample_ppp(params.lambda_b, r_field, rng);
        field.positions.insert(0, [r0, 0.0]);
        let uniforms: Vec<f64> = (0..field.len()).map(|_| rng.random()).collect();
        let mut types: Vec<LinkType> = field
            .positions
            .iter()
            .zip(&uniforms)
            .map(|(&[x, y], &u)| mark(site.horizontal_distance(x, y), site, params, u))
            .collect();
        types[0] = serving;
        let winner = select(
            field.positions.iter().zip(&types).enumerate().map(|(id, (&[x, y], &t))| (id, site.horizontal_distance(x, y), t)),
            r_m,
            h_bar,
            params.policy,
            params,
        );
        if winner.is_some_and(|a| a.id == 0) {
            return Ok(PinnedField {
                field,
                types,
                uniforms,
                attempts,
            });
        }
        if attempts >= ACCEPTANCE_PROBE {
            return Err(Error::ConditioningInfeasible {
                rate: 1.0 / attempts as f64,
            });
        }
    }
}

/// Conditional handover and coverage frequencies for a serving GBS pinned
/// at `r0` with type `serving`; the rest of the field is a PPP conditioned by
/// rejection on not beating it. The pinned GBS keeps its type after the move.
pub fn conditioned_oracles(params: &SystemParams, r0: f64, z_t: f64, serving: LinkType, n: u64, seed: u64) -> Result<ConditionedEstimates> {
    conditioned_oracles_with(params, &McOptions::default(), r0, z_t, serving, n, seed)
}

pub fn conditioned_oracles_with(params: &SystemParams, opts: &McOptions, r0: f64, z_t: f64, serving: LinkType, n: u64, seed: u64) -> Result<ConditionedEstimates> {
    params.validate()?;
    check_trials(n, 1)?;
    let r_m = params.receiving_radius(z_t)?;
    if !(r0 > 0.0 && r0 < r_m) || !(params.h_lb..=params.h_ub).contains(&z_t) {
        return Err(Error::invalid("r0", format!("must lie in (0, {r_m}) with z_t in the height band")));
    }
    let r_field = r_m + params.v + FIELD_MARGIN_M;
    let fading = FadingSampler::new(&params.channel);
    let site = Waypoint { x: 0.0, y: 0.0, z: z_t };
    let attempts = AtomicU64::new(0);

    let tally = (0..n)
        .into_par_iter()
        .map(|e| {
            let mut rng = episode_rng(seed, e);
            let z_prev = rng.random_range(params.h_lb..=params.h_ub);
            let rho = sample_hop(params.mu, &mut rng);
            let theta = rng.random::<f64>() * PI;
            let v_h = horizontal_speed(params.v, rho, z_t - z_prev);
            let pinned = sample_pinned(params, serving, r0, &site, r_field, &mut rng)?;
            attempts.fetch_add(pinned.attempts, Ordering::Relaxed);
            let PinnedField { field, types, uniforms, .. } = pinned;

            let sir = sample_sir(&field, &types, &site, 0, params, &fading, &mut rng)?;
            let covered = sir > params.t_thresh;

            // moving away from the pinned GBS at theta = 0
            let post_site = Waypoint {
                x: -v_h * theta.cos(),
                y: v_h * theta.sin(),
                z: z_t,
            };
            let mut types_post: Vec<LinkType> = match opts.marks {
                MarkModel::Independent => classify_links(&field, &post_site, params, &mut rng),
                MarkModel::Persistent => field
                    .positions
                    .iter()
                    .zip(&uniforms)
                    .map(|(&[x, y], &u)| mark(post_site.horizontal_distance(x, y), &post_site, params, u))
                    .collect(),
            };
            types_post[0] = serving;
            let post = associate(&field, &types_post, &post_site, params.policy, params)?;
            let switched = post.filter(|a| a.id != 0).map(|a| a.link);
            Ok([u64::from(switched.is_some()), u64::from(switched == Some(LinkType::Los)), u64::from(switched == Some(LinkType::Nlos)), u64::from(covered)])
        })
        .try_reduce(|| [0; 4], |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]))?;
    let attempts = attempts.into_inner();
    let acceptance_rate = n as f64 / attempts as f64;
    if acceptance_rate < MIN_ACCEPTANCE {
        return Err(Error::ConditioningInfeasible { rate: acceptance_rate });
    }
    Ok(ConditionedEstimates {
        handover: McEstimate::proportion(tally[0], n, seed),
        handover_to: [McEstimate::proportion(tally[1], n, seed), McEstimate::proportion(tally[2], n, seed)],
        coverage: McEstimate::proportion(tally[3], n, seed),
        acceptance_rate,
    })
}

/// Empirical `E[exp(-tau I)]` of the interference (in W) seen by a UAV at
/// height `z` whose serving GBS is pinned at `r0`. The interval is the normal
/// approximation around the sample mean.
pub fn laplace_oracle(tau: f64, serving: LinkType, r0: f64, z: f64, params: &SystemParams, n: u64, seed: u64) -> Result<McEstimate> {
    params.validate()?;
    check_trials(n, 2)?;
    let r_m = params.receiving_radius(z)?;
    let site = Waypoint { x: 0.0, y: 0.0, z };
    let fading = FadingSampler::new(&params.channel);
    let scale = params.p_t * params.total_gain();
    let h2 = (z - params.h_b).powi(2);
    let sums = (0..n)
        .into_par_iter()
        .map(|e| {
            let mut rng = episode_rng(seed, e);
            let PinnedField { field, types, .. } = sample_pinned(params, serving, r0, &site, r_m, &mut rng)?;
            let mut interference = 0.0;
            for (&[x, y], &link) in field.positions.iter().zip(&types).skip(1) {
                let r = site.horizontal_distance(x, y);
                if r <= r_m {
                    interference += scale * params.channel.gain_sq(link, r * r + h2) * fading.sample(link, &mut rng);
                }
            }
            let s = (-tau * interference).exp();
            Ok([s, s * s])
        })
        .try_reduce(|| [0.0; 2], |a, b| Ok([a[0] + b[0], a[1] + b[1]]))?;
    let nf = n as f64;
    let mean = sums[0] / nf;
    let var = ((sums[1] / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let half = WILSON_Z95 * (var / nf).sqrt();
    Ok(McEstimate {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelParams;

    #[test]
    fn ppp_count_matches_poisson_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let runs = 10_000;
        let counts: Vec<f64> = (0..runs).map(|_| sample_ppp(1e-4, 1000.0, &mut rng).len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / runs as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let expected = 1e-4 * PI * 1e6;
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean}");
        assert!((var / mean - 1.0).abs() < 0.05, "{var} vs {mean}");
        assert!(sample_ppp(0.0, 1000.0, &mut rng).is_empty());
    }

    #[test]
    fn ppp_points_stay_in_disc() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = sample_ppp(1e-3, 300.0, &mut rng);
        assert!(f.positions.iter().all(|p| p[0].hypot(p[1]) <= 300.0));
    }

    #[test]
    fn los_fraction_matches_probability() {
        let p = SystemParams::default();
        let field = GbsField {
            positions: vec![[90.0, 0.0]],
            radius: 100.0,
        };
        let uav = Waypoint { x: 0.0, y: 0.0, z: 120.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let los = (0..n).filter(|_| classify_links(&field, &uav, &p, &mut rng)[0] == LinkType::Los).count();
        let expected = los_probability(90.0, 120.0, &p.env, p.h_b);
        let frac = los as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((frac - expected).abs() < 3.0 * sigma, "{frac} vs {expected}");
    }

    #[test]
    fn association_rules() {
        let p = SystemParams::default();
        let uav = Waypoint { x: 0.0, y: 0.0, z: 120.0 };
        let single = GbsField {
            positions: vec![[50.0, 0.0]],
            radius: 100.0,
        };
        for policy in AssociationPolicy::ALL {
            let a = associate(&single, &[LinkType::Nlos], &uav, policy, &p).unwrap().unwrap();
            assert_eq!(a.id, 0);
        }
        // a farther LoS GBS beats a nearer NLoS one under strongest RSS only
        let pair = GbsField {
            positions: vec![[20.0, 0.0], [0.0, 60.0]],
            radius: 100.0,
        };
        let types = [LinkType::Nlos, LinkType::Los];
        assert_eq!(associate(&pair, &types, &uav, AssociationPolicy::StrongestRss, &p).unwrap().unwrap().id, 1);
        assert_eq!(associate(&pair, &types, &uav, AssociationPolicy::Nearest, &p).unwrap().unwrap().id, 0);
        // ties go to the lowest id
        let tie = GbsField {
            positions: vec![[30.0, 0.0], [0.0, 30.0]],
            radius: 100.0,
        };
        for policy in AssociationPolicy::ALL {
            let a = associate(&tie, &[LinkType::Los; 2], &uav, policy, &p).unwrap().unwrap();
            assert_eq!(a.id, 0);
        }
        let far = GbsField {
            positions: vec![[500.0, 0.0]],
            radius: 600.0,
        };
        assert!(associate(&far, &[LinkType::Los], &uav, AssociationPolicy::Nearest, &p).unwrap().is_none());
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.95 && lo < 1.0);
        // textbook value for 5 of 20
        let (lo, hi) = wilson_interval(5, 20);
        assert!((lo - 0.1119).abs() < 1e-4 && (hi - 0.4687).abs() < 1e-4, "{lo} {hi}");
    }

    #[test]
    fn empty_network_is_void_and_uncovered() {
        let p = SystemParams {
            lambda_b: 0.0,
            ..SystemParams::default()
        };
        let mut rng = episode_rng(1, 0);
        for _ in 0..100 {
            let o = simulate_episode(&p, &mut rng).unwrap();
            assert!(o.void_pre && o.void_post && !o.covered && !o.handover);
        }
    }

    #[test]
    fn no_motion_never_hands_over() {
        let p = SystemParams {
            v: 0.0,
            h_ub: 90.0 + 1e-9,
            ..SystemParams::default()
        };
        let s = simulate(&p, 10_000, 2).unwrap();
        assert_eq!(s.counts.handover, 0);
    }

    #[test]
    fn certain_failure_leaves_only_unhanded_coverage() {
        let p = SystemParams {
            kappa: 1.0,
            ..SystemParams::default()
        };
        let mut rng = episode_rng(9, 0);
        for _ in 0..2000 {
            let o = simulate_episode(&p, &mut rng).unwrap();
            assert!(!(o.covered && o.handover));
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let p = SystemParams::default();
        let a = simulate(&p, 2000, 11).unwrap();
        let b = simulate(&p, 2000, 11).unwrap();
        assert_eq!(a, b);
        let e1 = estimate(|o| o.covered, 500, 11, &p).unwrap();
        let e2 = estimate(|o| o.covered, 500, 11, &p).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.mean, McEstimate::proportion(simulate(&p, 500, 11).unwrap().counts.covered, 500, 11).mean);
    }

    #[test]
    fn estimate_needs_enough_trials() {
        assert!(estimate(|_| true, 99, 0, &SystemParams::default()).is_err());
        let e = estimate(|_| true, 100, 0, &SystemParams::default()).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.ci_high, 1.0);
    }

    #[test]
    fn outcomes_ignore_power_scale() {
        let p = SystemParams::default();
        let q = SystemParams {
            p_t: p.p_t * 37.0,
            g_b: 0.01,
            ..p.clone()
        };
        let fading = FadingSampler::new(&p.channel);
        for e in 0..500 {
            let a = simulate_episode_with(&p, &McOptions::default(), &fading, &mut episode_rng(4, e)).unwrap();
            let b = simulate_episode_with(&q, &McOptions::default(), &fading, &mut episode_rng(4, e)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn symmetric_channel_policies_pick_same_gbs() {
        let p = SystemParams {
            channel: ChannelParams {
                alpha_n: 2.09,
                eta_n: 10f64.powf(-4.11),
                m_n: 3,
                ..SystemParams::default().channel
            },
            ..SystemParams::default()
        };
        let q = SystemParams {
            policy: AssociationPolicy::Nearest,
            ..p.clone()
        };
        let fading = FadingSampler::new(&p.channel);
        for e in 0..500 {
            let a = simulate_episode_with(&p, &McOptions::default(), &fading, &mut episode_rng(6, e)).unwrap();
            let b = simulate_episode_with(&q, &McOptions::default(), &fading, &mut episode_rng(6, e)).unwrap();
            assert_eq!(a.associated_pre.map(|x| x.id), b.associated_pre.map(|x| x.id));
            assert_eq!(a.associated_post.map(|x| x.id), b.associated_post.map(|x| x.id));
        }
    }

    #[test]
    fn conditioned_oracle_edges() {
        let sparse = SystemParams {
            lambda_b: 1e-12,
            ..SystemParams::default()
        };
        let c = conditioned_oracles(&sparse, 50.0, 120.0, LinkType::Los, 2000, 1).unwrap();
        assert_eq!(c.handover.mean, 0.0);
        assert_eq!(c.coverage.mean, 1.0);
        assert!(conditioned_oracles(&sparse, 500.0, 120.0, LinkType::Los, 10, 1).is_err());
    }

    #[test]
    fn hopeless_conditioning_is_reported() {
        // an NLoS GBS at the beam edge of a very dense network is never strongest
        let p = SystemParams {
            lambda_b: 1e-2,
            ..SystemParams::default()
        };
        let err = conditioned_oracles(&p, 150.0, 120.0, LinkType::Nlos, 1, 1).unwrap_err();
        assert!(matches!(err, Error::ConditioningInfeasible { .. }), "{err:?}");
    }
}
