//! Parameter sweeps, figure presets and CSV output.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{association_breakdown, evaluate, CoverageBreakdown};
use crate::association::AssociationPolicy;
use crate::config::to_config_string;
use crate::error::{Error, Result};
use crate::model::{linear_from_db, AntennaModel, LinkType, SystemParams, DEFAULT_OMNI_RANGE_M};
use crate::montecarlo::{simulate, McEstimate, McSummary};
use crate::quadrature::QuadratureSpec;

/// CSV header of [`write_csv`].
pub const HEADER: [&str; 12] = ["axis", "value", "metric", "policy", "antenna", "analytic", "mc_mean", "mc_ci_low", "mc_ci_high", "n", "seed", "error"];

/// Largest directional beamwidth used by the presets.
pub const MAX_DIRECTIONAL_BEAMWIDTH_DEG: f64 = 179.0;

/// Swept parameter, in the units of the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// GBSs per km^2.
    LambdaB,
    /// Degrees; ignored by the omni antenna.
    BeamwidthDeg,
    /// m/s.
    V,
    Kappa,
    /// Centre of the UAV height band (m); the band width is kept.
    HeightBand,
    /// dB.
    TThresh,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [SweepAxis::LambdaB, SweepAxis::BeamwidthDeg, SweepAxis::V, SweepAxis::Kappa, SweepAxis::HeightBand, SweepAxis::TThresh];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::LambdaB => "lambda_b",
            SweepAxis::BeamwidthDeg => "beamwidth_deg",
            SweepAxis::V => "v",
            SweepAxis::Kappa => "kappa",
            SweepAxis::HeightBand => "height_band",
            SweepAxis::TThresh => "t_thresh",
        }
    }

    /// Sets this parameter of `p` to `value`.
    pub fn apply(self, p: &mut SystemParams, value: f64) -> Result<()> {
        match self {
            SweepAxis::LambdaB => p.lambda_b = value * 1e-6,
            SweepAxis::BeamwidthDeg => {
                if let AntennaModel::Directional { beamwidth_deg } = &mut p.antenna {
                    *beamwidth_deg = value;
                }
            }
            SweepAxis::V => p.v = value,
            SweepAxis::Kappa => p.kappa = value,
            SweepAxis::HeightBand => {
                let half = 0.5 * p.height_band();
                p.h_lb = value - half;
                p.h_ub = value + half;
            }
            SweepAxis::TThresh => p.t_thresh = linear_from_db(value)?,
        }
        Ok(())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invalid("axis", format!("unknown axis `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Coverage,
    Handover,
    /// One row per link type.
    Association,
    Void,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Coverage, Metric::Handover, Metric::Association, Metric::Void];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Coverage => "coverage",
            Metric::Handover => "handover",
            Metric::Association => "association",
            Metric::Void => "void",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("metric", format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AntennaKind {
    Directional,
    Omni,
}

impl AntennaKind {
    pub const ALL: [AntennaKind; 2] = [AntennaKind::Directional, AntennaKind::Omni];

    pub fn as_str(self) -> &'static str {
        match self {
            AntennaKind::Directional => "directional",
            AntennaKind::Omni => "omni",
        }
    }

    /// Antenna of this kind, keeping the beamwidth or range of `base` when
    /// it is of the same kind.
    pub fn antenna(self, base: &AntennaModel) -> AntennaModel {
        match (self, *base) {
            (AntennaKind::Directional, a @ AntennaModel::Directional { .. }) => a,
            (AntennaKind::Directional, AntennaModel::Omni { .. }) => AntennaModel::Directional { beamwidth_deg: 120.0 },
            (AntennaKind::Omni, a @ AntennaModel::Omni { .. }) => a,
            (AntennaKind::Omni, AntennaModel::Directional { .. }) => AntennaModel::Omni { r_max: DEFAULT_OMNI_RANGE_M },
        }
    }
}

impl FromStr for AntennaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AntennaKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invalid("antenna", format!("unknown antenna `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    Mc,
    Both,
}

impl Engine {
    pub fn analytic(self) -> bool {
        matches!(self, Engine::Analytic | Engine::Both)
    }

    pub fn mc(self) -> bool {
        matches!(self, Engine::Mc | Engine::Both)
    }
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "mc" => Ok(Engine::Mc),
            "both" => Ok(Engine::Both),
            _ => Err(Error::invalid("engine", format!("unknown engine `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub policies: Vec<AssociationPolicy>,
    pub antennas: Vec<AntennaKind>,
    pub engine: Engine,
    pub trials: u64,
    pub seed: u64,
    /// Parameters held fixed at other than their configured value; they
    /// are listed in the axis column.
    pub fixed: Vec<(SweepAxis, f64)>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "must not be empty"));
        }
        if self.metrics.is_empty() || self.policies.is_empty() || self.antennas.is_empty() {
            return Err(Error::invalid("metrics", "metrics, policies and antennas must not be empty"));
        }
        if self.engine.mc() && self.trials < 100 {
            return Err(Error::invalid("trials", "must be at least 100 for Monte Carlo"));
        }
        Ok(())
    }

    fn axis_label(&self) -> String {
        if self.fixed.is_empty() {
            return self.axis.as_str().to_string();
        }
        let fixed: Vec<String> = self.fixed.iter().map(|(a, v)| format!("{}={}", a.as_str(), fmt_sig(*v))).collect();
        format!("{}[{}]", self.axis.as_str(), fixed.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis: String,
    pub value: f64,
    pub metric: String,
    pub policy: AssociationPolicy,
    pub antenna: AntennaKind,
    pub analytic: Option<f64>,
    pub mc: Option<McEstimate>,
    pub error: Option<String>,
}

/// Point of a sweep: one parameter set evaluated by both engines once.
#[derive(Debug, Clone, Default)]
struct PointResult {
    analytic: Option<std::result::Result<CoverageBreakdown, String>>,
    mc: Option<std::result::Result<McSummary, String>>,
}

/// Evaluates every combination of value, policy, antenna and metric.
pub fn run_sweep(spec: &SweepSpec, base: &SystemParams, quad: &QuadratureSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    quad.validate()?;
    let with_coverage = spec.metrics.contains(&Metric::Coverage);

    struct Cell {
        value: f64,
        policy: AssociationPolicy,
        antenna: AntennaKind,
        params: std::result::Result<SystemParams, String>,
        key: String,
    }
    let mut cells = Vec::new();
    for &value in &spec.values {
        for &policy in &spec.policies {
            for &antenna in &spec.antennas {
                let params = point_params(base, spec, value, policy, antenna).map_err(|e| e.to_string());
                let key = params.as_ref().map(to_config_string).unwrap_or_default();
                cells.push(Cell {
                    value,
                    policy,
                    antenna,
                    params,
                    key,
                });
            }
        }
    }

    // identical points (an omni antenna along the beamwidth axis) are run once
    let mut unique: Vec<&SystemParams> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for c in &cells {
        if let Ok(p) = &c.params {
            index.entry(c.key.as_str()).or_insert_with(|| {
                unique.push(p);
                unique.len() - 1
            });
        }
    }
    let results: Vec<PointResult> = unique
        .par_iter()
        .map(|p| PointResult {
            analytic: spec.engine.analytic().then(|| {
                let r = if with_coverage { evaluate(p, quad) } else { association_breakdown(p, quad) };
                r.map_err(|e| e.to_string())
            }),
            mc: spec.engine.mc().then(|| simulate(p, spec.trials, spec.seed).map_err(|e| e.to_string())),
        })
        .collect();

    let axis = spec.axis_label();
    let mut rows = Vec::new();
    for c in &cells {
        let point = match &c.params {
            Ok(_) => results[index[c.key.as_str()]].clone(),
            Err(e) => PointResult {
                analytic: spec.engine.analytic().then(|| Err(e.clone())),
                mc: spec.engine.mc().then(|| Err(e.clone())),
            },
        };
        for &metric in &spec.metrics {
            for (name, pick) in metric_rows(metric) {
                let mut errors = Vec::new();
                let analytic = match &point.analytic {
                    Some(Ok(b)) => Some(pick.analytic(b)),
                    Some(Err(e)) => {
                        errors.push(format!("analytic: {e}"));
                        None
                    }
                    None => None,
                };
                let mc = match &point.mc {
                    Some(Ok(s)) => Some(pick.mc(s)),
                    Some(Err(e)) => {
                        errors.push(format!("mc: {e}"));
                        None
                    }
                    None => None,
                };
                rows.push(ResultRow {
                    axis: axis.clone(),
                    value: c.value,
                    metric: name.to_string(),
                    policy: c.policy,
                    antenna: c.antenna,
                    analytic,
                    mc,
                    error: (!errors.is_empty()).then(|| errors.join("; ")),
                });
            }
        }
    }
    Ok(rows)
}

fn point_params(base: &SystemParams, spec: &SweepSpec, value: f64, policy: AssociationPolicy, antenna: AntennaKind) -> Result<SystemParams> {
    let mut p = base.clone();
    p.policy = policy;
    p.antenna = antenna.antenna(&base.antenna);
    for &(axis, v) in &spec.fixed {
        axis.apply(&mut p, v)?;
    }
    spec.axis.apply(&mut p, value)?;
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Copy)]
enum Pick {
    Coverage,
    Handover,
    Association(LinkType),
    Void,
}

impl Pick {
    fn analytic(self, b: &CoverageBreakdown) -> f64 {
        match self {
            Pick::Coverage => b.total,
            Pick::Handover => b.handover_prob,
            Pick::Association(l) => b.association[l.index()],
            Pick::Void => b.void_prob,
        }
    }

    fn mc(self, s: &McSummary) -> McEstimate {
        match self {
            Pick::Coverage => s.coverage(),
            Pick::Handover => s.handover(),
            Pick::Association(l) => s.association(l),
            Pick::Void => s.void(),
        }
    }
}

fn metric_rows(metric: Metric) -> Vec<(&'static str, Pick)> {
    match metric {
        Metric::Coverage => vec![("coverage", Pick::Coverage)],
        Metric::Handover => vec![("handover", Pick::Handover)],
        Metric::Association => vec![("association_los", Pick::Association(LinkType::Los)), ("association_nlos", Pick::Association(LinkType::Nlos))],
        Metric::Void => vec![("void", Pick::Void)],
    }
}

/// Figure presets: `fig2a`, `fig2b`, `fig3a` and `fig3b`. Each returns one
/// sweep per curve family.
pub fn figure_preset(id: &str, trials: u64, seed: u64) -> Result<Vec<SweepSpec>> {
    let densities = vec![10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
    let mut beamwidths: Vec<f64> = (2..=17).map(|k| 10.0 * k as f64).collect();
    beamwidths.push(MAX_DIRECTIONAL_BEAMWIDTH_DEG);
    let base = SweepSpec {
        axis: SweepAxis::LambdaB,
        values: densities,
        metrics: vec![Metric::Coverage],
        policies: vec![AssociationPolicy::StrongestRss],
        antennas: AntennaKind::ALL.to_vec(),
        engine: Engine::Both,
        trials,
        seed,
        fixed: Vec::new(),
    };
    let specs = match id {
        "fig2a" => [120.0, 180.0]
            .into_iter()
            .map(|centre| SweepSpec {
                metrics: vec![Metric::Coverage, Metric::Handover],
                fixed: vec![(SweepAxis::HeightBand, centre)],
                ..base.clone()
            })
            .collect(),
        "fig2b" => vec![SweepSpec {
            policies: AssociationPolicy::ALL.to_vec(),
            ..base
        }],
        "fig3a" => [50.0, 100.0, 500.0]
            .into_iter()
            .map(|lambda| SweepSpec {
                axis: SweepAxis::BeamwidthDeg,
                values: beamwidths.clone(),
                metrics: vec![Metric::Handover],
                fixed: vec![(SweepAxis::LambdaB, lambda)],
                ..base.clone()
            })
            .collect(),
        "fig3b" => {
            let mut out = Vec::new();
            for lambda in [50.0, 100.0, 500.0] {
                for kappa in [0.1, 0.3, 0.5] {
                    out.push(SweepSpec {
                        axis: SweepAxis::BeamwidthDeg,
                        values: beamwidths.clone(),
                        metrics: vec![Metric::Coverage],
                        fixed: vec![(SweepAxis::LambdaB, lambda), (SweepAxis::Kappa, kappa)],
                        ..base.clone()
                    });
                }
            }
            out
        }
        _ => return Err(Error::invalid("figure", format!("unknown figure `{id}` (expected fig2a, fig2b, fig3a or fig3b)"))),
    };
    Ok(specs)
}

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

impl fmt::Display for AntennaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Writes `rows` as UTF-8 CSV under [`HEADER`].
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(io)?;
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.axis.clone(),
            fmt_sig(r.value),
            r.metric.clone(),
            r.policy.as_str().to_string(),
            r.antenna.as_str().to_string(),
            opt(r.analytic),
            opt(r.mc.map(|m| m.mean)),
            opt(r.mc.map(|m| m.ci_low)),
            opt(r.mc.map(|m| m.ci_high)),
            r.mc.map(|m| m.n.to_string()).unwrap_or_default(),
            r.mc.map(|m| m.seed.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(axis: SweepAxis, values: Vec<f64>, metrics: Vec<Metric>, engine: Engine) -> SweepSpec {
        SweepSpec {
            axis,
            values,
            metrics,
            policies: vec![AssociationPolicy::StrongestRss],
            antennas: vec![AntennaKind::Directional],
            engine,
            trials: 200,
            seed: 7,
            fixed: Vec::new(),
        }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.347243976278767), "0.347243976");
        assert_eq!(fmt_sig(100.0), "100");
        assert_eq!(fmt_sig(1.0e-9 / 3.0), "0.000000000333333333");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn row_cardinality() {
        let s = spec(SweepAxis::LambdaB, vec![10.0, 100.0], vec![Metric::Void, Metric::Association], Engine::Analytic);
        let rows = run_sweep(&s, &SystemParams::default(), &QuadratureSpec::default()).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        assert_eq!(rows[0].metric, "void");
        assert_eq!(rows[1].metric, "association_los");
        assert!(rows.iter().all(|r| r.mc.is_none() && r.analytic.is_some()));
    }

    #[test]
    fn invalid_points_are_reported_in_rows() {
        let s = spec(SweepAxis::Kappa, vec![0.5, 2.0], vec![Metric::Void], Engine::Analytic);
        let rows = run_sweep(&s, &SystemParams::default(), &QuadratureSpec::default()).unwrap();
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("kappa"));
    }

    #[test]
    fn mc_rows_carry_seed_and_trials() {
        let s = spec(SweepAxis::V, vec![20.0], vec![Metric::Handover], Engine::Mc);
        let rows = run_sweep(&s, &SystemParams::default(), &QuadratureSpec::default()).unwrap();
        let mc = rows[0].mc.unwrap();
        assert_eq!((mc.n, mc.seed), (200, 7));
        assert!(mc.ci_low <= mc.mean && mc.mean <= mc.ci_high);
    }

    #[test]
    fn axes_apply_boundary_units() {
        let mut p = SystemParams::default();
        SweepAxis::LambdaB.apply(&mut p, 50.0).unwrap();
        SweepAxis::HeightBand.apply(&mut p, 180.0).unwrap();
        SweepAxis::TThresh.apply(&mut p, 0.0).unwrap();
        SweepAxis::BeamwidthDeg.apply(&mut p, 60.0).unwrap();
        assert!((p.lambda_b - 5e-5).abs() < 1e-18);
        assert_eq!((p.h_lb, p.h_ub), (150.0, 210.0));
        assert_eq!(p.t_thresh, 1.0);
        assert_eq!(p.antenna, AntennaModel::Directional { beamwidth_deg: 60.0 });
        let mut omni = SystemParams {
            antenna: AntennaModel::Omni { r_max: 2000.0 },
            ..SystemParams::default()
        };
        SweepAxis::BeamwidthDeg.apply(&mut omni, 60.0).unwrap();
        assert_eq!(omni.antenna, AntennaModel::Omni { r_max: 2000.0 });
    }

    #[test]
    fn presets_match_their_figures() {
        let fig2a = figure_preset("fig2a", 1000, 1).unwrap();
        assert!(fig2a.iter().all(|s| s.metrics.contains(&Metric::Handover) && s.axis == SweepAxis::LambdaB));
        assert_eq!(fig2a.len(), 2);
        let fig2b = figure_preset("fig2b", 1000, 1).unwrap();
        assert_eq!(fig2b[0].policies.len(), 2);
        let fig3a = figure_preset("fig3a", 1000, 1).unwrap();
        assert!(fig3a.iter().all(|s| s.values.iter().all(|&b| b < 180.0)));
        let fig3b = figure_preset("fig3b", 1000, 1).unwrap();
        let kappas: Vec<f64> = fig3b.iter().flat_map(|s| s.fixed.iter().filter(|f| f.0 == SweepAxis::Kappa).map(|f| f.1)).collect();
        assert!(kappas.contains(&0.1) && kappas.contains(&0.5));
        for id in ["fig2a", "fig2b", "fig3a", "fig3b"] {
            assert!(figure_preset(id, 1000, 1).unwrap().iter().all(|s| s.engine == Engine::Both));
        }
        assert!(figure_preset("fig4", 1000, 1).is_err());
    }

    #[test]
    fn csv_has_fixed_header() {
        let s = spec(SweepAxis::LambdaB, vec![100.0], vec![Metric::Void], Engine::Both);
        let rows = run_sweep(&s, &SystemParams::default(), &QuadratureSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HEADER.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), HEADER.len());
        assert_eq!(&fields[..5], &["lambda_b", "100", "void", "strongest_rss", "directional"]);
        assert_eq!(fields[9], "200");
    }
}
