use std::f64::consts::PI;

use proptest::prelude::*;
use uav_coverage::analytic::conditional_handover_any;
use uav_coverage::association::HeightSlice;
use uav_coverage::config::{parse_config, to_config_string};
use uav_coverage::geometry::{displaced_distance, equal_power_radius, exclusion_radius, lens_complement_area, DiskPair};
use uav_coverage::montecarlo::{field_radius, wilson_interval};
use uav_coverage::{AntennaModel, HandoverContext, LinkType, QuadratureSpec, SystemParams};

fn link() -> impl Strategy<Value = LinkType> {
    prop_oneof![Just(LinkType::Los), Just(LinkType::Nlos)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lens_complement_is_bounded(x in 0.0..500.0f64, y in 0.0..500.0f64, v in 0.0..500.0f64) {
        let a = lens_complement_area(DiskPair { x, y, v });
        let full = PI * y * y;
        prop_assert!(a >= 0.0 && a <= full * (1.0 + 1e-12));
        // B loses at most the area of A
        prop_assert!(a >= full - PI * x * x - 1e-9 * full.max(1.0));
        if v + y <= x {
            prop_assert_eq!(a, 0.0);
        }
        if v >= x + y {
            prop_assert!((a - full).abs() <= 1e-9 * full.max(1.0));
        }
    }

    #[test]
    fn lens_complement_grows_with_separation(x in 1.0..300.0f64, y in 1.0..300.0f64, v in 0.0..300.0f64, dv in 0.0..50.0f64) {
        let near = lens_complement_area(DiskPair { x, y, v });
        let far = lens_complement_area(DiskPair { x, y, v: v + dv });
        prop_assert!(far >= near - 1e-9 * PI * y * y);
    }

    #[test]
    fn equal_power_radius_is_increasing_and_substitutes_back(
        serving in link(), target in link(), x in 0.0..3000.0f64, dx in 0.1..100.0f64, h in 60.0..120.0f64,
    ) {
        let ch = SystemParams::default().channel;
        let d = equal_power_radius(serving, target, x, h, &ch);
        prop_assert!(equal_power_radius(serving, target, x + dx, h, &ch) >= d);
        if d > 0.0 {
            let power = |l: LinkType, r: f64| ch.intercept(l) * (r * r + h * h).powf(-0.5 * ch.exponent(l));
            prop_assert!((power(target, d) / power(serving, x) - 1.0).abs() <= 1e-9);
        }
        prop_assert_eq!(exclusion_radius(serving, x, h, &ch), equal_power_radius(serving, serving.other(), x, h, &ch));
    }

    #[test]
    fn displaced_distance_obeys_triangle_inequality(r0 in 0.0..1000.0f64, v in 0.0..50.0f64, theta in 0.0..PI) {
        let d = displaced_distance(r0, v, theta);
        prop_assert!(d >= (r0 - v).abs() - 1e-9 && d <= r0 + v + 1e-9);
    }

    #[test]
    fn wilson_interval_brackets_the_proportion(n in 1u64..1_000_000, frac in 0.0..=1.0f64) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn config_round_trips(
        lambda in 1.0..2000.0f64, kappa in 0.0..=1.0f64, v in 0.0..60.0f64, bw in 1.0..179.0f64, t_db in -10.0..10.0f64,
    ) {
        let p = SystemParams {
            lambda_b: lambda * 1e-6,
            kappa,
            v,
            t_thresh: 10f64.powf(t_db / 10.0),
            antenna: AntennaModel::Directional { beamwidth_deg: bw },
            ..SystemParams::default()
        };
        let q = parse_config(&to_config_string(&p)).unwrap();
        prop_assert!((q.lambda_b / p.lambda_b - 1.0).abs() < 1e-12);
        prop_assert!((q.t_thresh / p.t_thresh - 1.0).abs() < 1e-12);
        prop_assert_eq!(q.kappa, p.kappa);
        prop_assert_eq!(q.v, p.v);
        prop_assert_eq!(q.antenna, p.antenna);
    }

    #[test]
    fn field_holds_both_receiving_discs(bw in 1.0..179.0f64, v in 0.0..60.0f64, z in 90.0..=150.0f64) {
        let p = SystemParams { v, antenna: AntennaModel::Directional { beamwidth_deg: bw }, ..SystemParams::default() };
        prop_assert!(field_radius(&p).unwrap() >= p.receiving_radius(z).unwrap() + v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn association_and_void_partition_outcomes(lambda in 5.0..1000.0f64, z in 91.0..150.0f64, bw in 30.0..170.0f64) {
        let p = SystemParams {
            lambda_b: lambda * 1e-6,
            antenna: AntennaModel::Directional { beamwidth_deg: bw },
            ..SystemParams::default()
        };
        let slice = HeightSlice::new(&p, z).unwrap();
        let spec = QuadratureSpec::default().tightened(10.0);
        let total: f64 = [LinkType::Los, LinkType::Nlos]
            .iter()
            .map(|&l| slice.association_probability(l, &spec).unwrap())
            .sum::<f64>()
            + slice.void_probability();
        prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);
    }

    #[test]
    fn conditional_handover_is_monotone_in_density(serving in link(), frac in 0.01..0.99f64, z in 95.0..150.0f64, lambda in 10.0..500.0f64) {
        let at = |lam: f64| {
            let p = SystemParams { lambda_b: lam * 1e-6, ..SystemParams::default() };
            let r0 = frac * p.receiving_radius(z).unwrap();
            conditional_handover_any(HandoverContext { serving, r0, z_t: z }, &p).unwrap()
        };
        let (lo, hi) = (at(lambda), at(2.0 * lambda));
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(hi >= lo - 1e-12, "{} {}", lo, hi);
    }
}
