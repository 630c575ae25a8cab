//! Serving-distance distributions and association probabilities.
//!
//! Most quantities here are evaluated at a fixed UAV altitude; a
//! [`HeightSlice`] bundles that altitude with its receiving radius and a
//! tabulated cumulative mass `\int_0^r x P(x) dx` per link type, which every nested
//! integral in the analytic engine reads many times.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::exclusion_radius;
use crate::model::{type_probability, EnvironmentParams, LinkType, SystemParams};
use crate::quadrature::{gauss_legendre, integrate, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssociationPolicy {
    StrongestRss,
    Nearest,
}

impl AssociationPolicy {
    pub const ALL: [AssociationPolicy; 2] = [AssociationPolicy::StrongestRss, AssociationPolicy::Nearest];

    pub fn as_str(self) -> &'static str {
        match self {
            AssociationPolicy::StrongestRss => "strongest_rss",
            AssociationPolicy::Nearest => "nearest",
        }
    }
}

impl std::str::FromStr for AssociationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strongest_rss" => Ok(AssociationPolicy::StrongestRss),
            "nearest" => Ok(AssociationPolicy::Nearest),
            other => Err(Error::invalid(
                "policy",
                format!("unknown policy `{other}` (expected strongest_rss or nearest)"),
            )),
        }
    }
}

const GL_ORDER: usize = 8;
const MAX_PANELS: usize = 8192;
const EXACT_PANELS: usize = 16;

/// Cumulative `\int_0^r x P(x, z) dx` for one link type on a uniform grid
/// with quintic Hermite interpolation. Node values come from per-panel
/// Gauss-Legendre sums; the first and second derivatives at the nodes are
/// exact.
#[derive(Debug, Clone)]
pub struct MassTable {
    link: LinkType,
    step: f64,
    r_cap: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    curvatures: Vec<f64>,
    h_bar: f64,
    env: EnvironmentParams,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl MassTable {
    pub fn new(link: LinkType, h_bar: f64, r_cap: f64, env: EnvironmentParams) -> Self {
        let target = (h_bar / 32.0).max(1e-3);
        let panels = ((r_cap / target).ceil() as usize).clamp(1, MAX_PANELS);
        let step = r_cap / panels as f64;
        let (gx, gw) = gauss_legendre(GL_ORDER);
        let integrand = |x: f64| x * type_probability(link, x, h_bar, &env);

        let mut values = Vec::with_capacity(panels + 1);
        let mut slopes = Vec::with_capacity(panels + 1);
        values.push(0.0);
        slopes.push(0.0);
        let mut curvatures = Vec::with_capacity(panels + 1);
        curvatures.push(type_probability(link, 0.0, h_bar, &env));
        let mut acc = 0.0;
        let half = 0.5 * step;
        for i in 0..panels {
            let mid = i as f64 * step + half;
            let panel: f64 = gx.iter().zip(&gw).map(|(x, w)| w * integrand(mid + half * x)).sum();
            acc += panel * half;
            values.push(acc);
            let r = (i + 1) as f64 * step;
            slopes.push(integrand(r));
            curvatures.push(mass_curvature(link, r, h_bar, &env));
        }
        MassTable {
            link,
            step,
            r_cap,
            values,
            slopes,
            curvatures,
            h_bar,
            env,
            gl_nodes: gx,
            gl_weights: gw,
        }
    }

    pub fn r_cap(&self) -> f64 {
        self.r_cap
    }

    /// `r P(r)` by cubic Hermite interpolation of the tabulated node
    /// derivatives; exact evaluation beyond the grid.
    pub fn radial_density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let pos = r / self.step;
        // near the origin the NLoS density is tiny and the interpolant's
        // absolute error dominates it
        if r >= self.r_cap || pos < EXACT_PANELS as f64 {
            return r * type_probability(self.link, r, self.h_bar, &self.env);
        }
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        let h = self.step;
        let (y0, y1) = (self.slopes[i], self.slopes[i + 1]);
        let (m0, m1) = (self.curvatures[i] * h, self.curvatures[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// `\int_0^r x P(x) dx` for any `r >= 0`; beyond the grid the remainder
    /// is integrated directly.
    pub fn mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.r_cap {
            let last = self.values[self.values.len() - 1];
            if r == self.r_cap {
                return last;
            }
            let spec = QuadratureSpec {
                rel_tol: 1e-10,
                abs_tol: 1e-10,
                max_depth: 30,
            };
            let tail = integrate(
                |x| x * type_probability(self.link, x, self.h_bar, &self.env),
                self.r_cap,
                r,
                &spec,
            )
            .unwrap_or(f64::NAN);
            return last + tail;
        }
        let pos = r / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        if i < EXACT_PANELS {
            // Near the origin the mass is tiny and interpolation error would
            // dominate it; integrate the partial panel instead.
            let a = i as f64 * self.step;
            let half = 0.5 * (r - a);
            let mid = a + half;
            let partial: f64 = self
                .gl_nodes
                .iter()
                .zip(&self.gl_weights)
                .map(|(x, w)| {
                    let u = mid + half * x;
                    w * u * type_probability(self.link, u, self.h_bar, &self.env)
                })
                .sum();
            return self.values[i] + partial * half;
        }
        let t = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let h = self.step;
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let (c0, c1) = (self.curvatures[i] * h * h, self.curvatures[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        h0 * y0 + h1 * d0 + h2 * c0 + h3 * y1 + h4 * d1 + h5 * c1
    }
}

/// `d/dr [r P(r)] = P(r) + r P'(r)`.
fn mass_curvature(link: LinkType, r: f64, h_bar: f64, env: &EnvironmentParams) -> f64 {
    let p_los = type_probability(LinkType::Los, r, h_bar, env);
    let d_elev = -h_bar / (r * r + h_bar * h_bar) * 180.0 / PI;
    let d_los = env.b * p_los * (1.0 - p_los) * d_elev;
    match link {
        LinkType::Los => p_los + r * d_los,
        LinkType::Nlos => (1.0 - p_los) - r * d_los,
    }
}

/// The network as seen from one UAV altitude `z`.
#[derive(Debug, Clone)]
pub struct HeightSlice<'a> {
    pub params: &'a SystemParams,
    pub z: f64,
    pub h_bar: f64,
    /// Horizontal receiving radius at this altitude.
    pub r_m: f64,
    tables: [MassTable; 2],
}

impl<'a> HeightSlice<'a> {
    pub fn new(params: &'a SystemParams, z: f64) -> Result<Self> {
        let r_m = params.receiving_radius(z)?;
        let h_bar = z - params.h_b;
        Ok(HeightSlice {
            params,
            z,
            h_bar,
            r_m,
            tables: LinkType::ALL.map(|l| MassTable::new(l, h_bar, r_m, params.env)),
        })
    }

    #[inline]
    pub fn type_probability(&self, link: LinkType, x: f64) -> f64 {
        type_probability(link, x, self.h_bar, &self.params.env)
    }

    #[inline]
    pub fn mass(&self, link: LinkType, r: f64) -> f64 {
        self.tables[link.index()].mass(r)
    }

    /// Interpolated `r P(r)`, accurate to about 1e-8 relative.
    #[inline]
    pub fn radial_density(&self, link: LinkType, r: f64) -> f64 {
        self.tables[link.index()].radial_density(r)
    }

    /// Path gain of a `link`-type GBS at horizontal distance `x`.
    #[inline]
    pub fn path_gain(&self, link: LinkType, x: f64) -> f64 {
        self.params.channel.gain_sq(link, x * x + self.h_bar * self.h_bar)
    }

    /// Radius inside which no opposite-type GBS may lie when a `serving`-type
    /// GBS at `r0` is the strongest visible one; limited to the receiving disk.
    pub fn exclusion(&self, serving: LinkType, r0: f64) -> f64 {
        exclusion_radius(serving, r0, self.h_bar, &self.params.channel).clamp(0.0, self.r_m)
    }

    pub fn nearest_type_pdf(&self, link: LinkType, r0: f64) -> f64 {
        if r0 <= 0.0 {
            return 0.0;
        }
        let lam = self.params.lambda_b;
        2.0 * PI * lam * r0 * self.type_probability(link, r0) * (-2.0 * PI * lam * self.mass(link, r0)).exp()
    }

    /// `A(z) * f~(r0, z)`: density of "serving GBS is `link`-type at `r0`".
    pub fn joint_serving_density(&self, link: LinkType, r0: f64) -> f64 {
        if r0 > self.r_m {
            return 0.0;
        }
        let other = link.other();
        let excl = self.exclusion(link, r0);
        self.nearest_type_pdf(link, r0) * (-2.0 * PI * self.params.lambda_b * self.mass(other, excl)).exp()
    }

    pub fn association_probability(&self, link: LinkType, spec: &QuadratureSpec) -> Result<f64> {
        if self.params.lambda_b == 0.0 {
            return Ok(0.0);
        }
        let a = integrate(|r| self.joint_serving_density(link, r), 0.0, self.r_m, spec)?;
        Ok(a.clamp(0.0, 1.0))
    }

    /// Probability that no GBS lies inside the receiving disk.
    pub fn void_probability(&self) -> f64 {
        (-PI * self.params.lambda_b * self.r_m * self.r_m).exp()
    }

    pub fn nearest_any_pdf(&self, r0: f64) -> f64 {
        nearest_any_pdf(r0, self.params)
    }
}

pub fn nearest_type_pdf(link: LinkType, r0: f64, z: f64, params: &SystemParams) -> Result<f64> {
    Ok(HeightSlice::new(params, z)?.nearest_type_pdf(link, r0))
}

pub fn association_probability(link: LinkType, z: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    HeightSlice::new(params, z)?.association_probability(link, spec)
}

pub fn serving_distance_pdf(link: LinkType, r0: f64, z: f64, params: &SystemParams, spec: &QuadratureSpec) -> Result<f64> {
    let slice = HeightSlice::new(params, z)?;
    let a = slice.association_probability(link, spec)?;
    if a <= 0.0 {
        return Err(Error::UndefinedConditional);
    }
    Ok(slice.joint_serving_density(link, r0) / a)
}

/// Contact-distance density of the PPP, `2 pi lambda r exp(-pi lambda r^2)`.
pub fn nearest_any_pdf(r0: f64, params: &SystemParams) -> f64 {
    if r0 <= 0.0 {
        return 0.0;
    }
    let lam = params.lambda_b;
    2.0 * PI * lam * r0 * (-PI * lam * r0 * r0).exp()
}
