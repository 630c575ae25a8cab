//! Analytic quantities against independent references: a brute-force
//! planar integration of the handover event and conditioned simulations.

use std::f64::consts::PI;

use uav_coverage::analytic::{conditional_coverage, conditional_handover, conditional_handover_any, coverage_probability, laplace_interference};
use uav_coverage::geometry::equal_power_radius;
use uav_coverage::model::los_probability;
use uav_coverage::montecarlo::{conditioned_oracles, laplace_oracle};
use uav_coverage::{AntennaModel, HandoverContext, LinkType, QuadratureSpec, SystemParams};

/// Type probability of a GBS at horizontal distance `r`, seen from `z`.
fn type_probability(link: LinkType, r: f64, z: f64, p: &SystemParams) -> f64 {
    let los = los_probability(r, z, &p.env, p.h_b);
    match link {
        LinkType::Los => los,
        LinkType::Nlos => 1.0 - los,
    }
}

/// `P(handover)` for one hop of horizontal length `v` in direction `theta`,
/// integrating the target intensity over a polar grid around the post-hop
/// position and testing each cell against the pre-hop disk directly.
fn hop_handover(serving: LinkType, targets: &[LinkType], r0: f64, z: f64, v: f64, theta: f64, p: &SystemParams) -> f64 {
    let h_bar = z - p.h_b;
    let r_m = p.receiving_radius(z).unwrap();
    // serving GBS at the origin, pre-hop position at (r0, 0)
    let (px, py) = (r0 + v * theta.cos(), v * theta.sin());
    let r = px.hypot(py);
    let (n_r, n_phi) = (160, 256);
    let mut mass = 0.0;
    for &t in targets {
        let x = equal_power_radius(serving, t, r0, h_bar, &p.channel);
        let y = equal_power_radius(serving, t, r, h_bar, &p.channel).min(r_m);
        if y <= 0.0 {
            continue;
        }
        let dr = y / n_r as f64;
        let dphi = 2.0 * PI / n_phi as f64;
        for i in 0..n_r {
            let rho = (i as f64 + 0.5) * dr;
            let weight = type_probability(t, rho, z, p) * rho * dr * dphi;
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let (qx, qy) = (px + rho * phi.cos(), py + rho * phi.sin());
                if (qx - r0).hypot(qy) >= x {
                    mass += weight;
                }
            }
        }
    }
    -(-p.lambda_b * mass).exp_m1()
}

/// Hop handover averaged over direction and over the horizontal
/// displacement of a random-waypoint hop ending at `z`.
fn brute_force_handover(serving: LinkType, targets: &[LinkType], r0: f64, z: f64, p: &SystemParams) -> f64 {
    // direction average on a table of displacements, interpolated linearly
    let n_theta = 48;
    let n_table = 33;
    let table: Vec<f64> = (0..n_table)
        .map(|k| {
            let v = p.v * k as f64 / (n_table - 1) as f64;
            (0..n_theta)
                .map(|j| {
                    let theta = (j as f64 + 0.5) * PI / n_theta as f64;
                    hop_handover(serving, targets, r0, z, v, theta, p)
                })
                .sum::<f64>()
                / n_theta as f64
        })
        .collect();
    let lookup = |v: f64| {
        let s = v / p.v * (n_table - 1) as f64;
        let k = (s.floor() as usize).min(n_table - 2);
        let f = s - k as f64;
        table[k] * (1.0 - f) + table[k + 1] * f
    };
    // hop length through its Rayleigh quantile, start height uniform
    let (n_u, n_z) = (400, 64);
    let mut total = 0.0;
    for i in 0..n_u {
        let u = (i as f64 + 0.5) / n_u as f64;
        let rho = (-(1.0 - u).ln() / (PI * p.mu)).sqrt();
        for j in 0..n_z {
            let z0 = p.h_lb + (j as f64 + 0.5) / n_z as f64 * (p.h_ub - p.h_lb);
            let v = p.v * rho / rho.hypot(z - z0);
            total += lookup(v);
        }
    }
    total / (n_u * n_z) as f64
}

fn ctx(serving: LinkType, r0: f64, z_t: f64) -> HandoverContext {
    HandoverContext { serving, r0, z_t }
}

#[test]
fn handover_matches_brute_force_integration() {
    let p = SystemParams::default();
    let both = [LinkType::Los, LinkType::Nlos];
    for (serving, r0, z) in [(LinkType::Los, 20.0, 120.0), (LinkType::Los, 80.0, 100.0), (LinkType::Nlos, 50.0, 140.0)] {
        let analytic = conditional_handover_any(ctx(serving, r0, z), &p).unwrap();
        let oracle = brute_force_handover(serving, &both, r0, z, &p);
        assert!((analytic - oracle).abs() <= 0.01 * oracle + 1e-4, "{serving:?} r0={r0} z={z}: {analytic} vs {oracle}");
    }
    // a single target type
    let analytic = conditional_handover(ctx(LinkType::Nlos, 50.0, 120.0), LinkType::Los, &p).unwrap();
    let oracle = brute_force_handover(LinkType::Nlos, &[LinkType::Los], 50.0, 120.0, &p);
    assert!((analytic - oracle).abs() <= 0.01 * oracle + 1e-4, "{analytic} vs {oracle}");
}

#[test]
fn conditioned_simulation_agrees_near_the_beam_centre() {
    let p = SystemParams::default();
    let (r0, z) = (50.0, 120.0);
    let mc = conditioned_oracles(&p, r0, z, LinkType::Los, 100_000, 7).unwrap();
    let handover = conditional_handover_any(ctx(LinkType::Los, r0, z), &p).unwrap();
    let coverage = conditional_coverage(LinkType::Los, r0, z, &p, &QuadratureSpec::default()).unwrap();
    assert!((handover - mc.handover.mean).abs() <= 3.0 * mc.handover.half_width(), "{handover} vs {:?}", mc.handover);
    assert!((coverage - mc.coverage.mean).abs() <= 3.0 * mc.coverage.half_width(), "{coverage} vs {:?}", mc.coverage);
}

#[test]
fn laplace_transform_matches_simulated_interference() {
    let p = SystemParams::default();
    let (r0, z) = (50.0, 120.0);
    let h_bar = z - p.h_b;
    let m = p.channel.fading_shape(LinkType::Los) as f64;
    let tau = m * p.t_thresh / (p.p_t * p.total_gain() * p.channel.gain_sq(LinkType::Los, r0 * r0 + h_bar * h_bar));
    let spec = QuadratureSpec::default().tightened(100.0);
    for factor in [0.3, 1.0] {
        let analytic = laplace_interference(tau * factor, LinkType::Los, r0, z, &p, &spec).unwrap();
        let mc = laplace_oracle(tau * factor, LinkType::Los, r0, z, &p, 100_000, 11).unwrap();
        assert!((analytic - mc.mean).abs() <= 0.02 * mc.mean, "factor {factor}: {analytic} vs {mc:?}");
    }
}

#[test]
fn omni_coverage_is_insensitive_to_the_range_cap() {
    let quad = QuadratureSpec::default();
    let cov: Vec<f64> = [2000.0, 3000.0, 5000.0]
        .iter()
        .map(|&r_max| {
            coverage_probability(
                &SystemParams {
                    antenna: AntennaModel::Omni { r_max },
                    ..SystemParams::default()
                },
                &quad,
            )
            .unwrap()
            .total
        })
        .collect();
    let spread = cov.iter().cloned().fold(f64::MIN, f64::max) - cov.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.005, "coverage at r_max 2, 3, 5 km: {cov:?}, spread {spread}");
}
