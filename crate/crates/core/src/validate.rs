//! Side-by-side comparison of the analytic engine and the simulator.

use std::fmt;

use crate::analytic::{coverage_probability, coverage_probability_nearest, handover_probability_with_density, CoverageBreakdown, TargetDensity};
use crate::association::AssociationPolicy;
use crate::error::{Error, Result};
use crate::model::{LinkType, SystemParams};
use crate::montecarlo::{simulate, McEstimate};
use crate::quadrature::QuadratureSpec;

/// Smallest absolute gap always tolerated.
pub const GAP_FLOOR: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationEntry {
    pub name: String,
    pub analytic: f64,
    pub mc: McEstimate,
    /// `max(0.02, 3 x CI half-width)`.
    pub threshold: f64,
    /// Reported only; does not affect [`ValidationReport::passed`].
    pub informational: bool,
}

impl ValidationEntry {
    fn new(name: &str, analytic: f64, mc: McEstimate, informational: bool) -> Self {
        ValidationEntry {
            name: name.to_string(),
            analytic,
            mc,
            threshold: GAP_FLOOR.max(3.0 * mc.half_width()),
            informational,
        }
    }

    pub fn gap(&self) -> f64 {
        (self.analytic - self.mc.mean).abs()
    }

    pub fn passed(&self) -> bool {
        self.gap() <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().filter(|e| !e.informational).all(ValidationEntry::passed)
    }

    pub fn entry(&self, name: &str) -> Option<&ValidationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>10} {:>10} {:>21} {:>9} {:>9}  status", "quantity", "analytic", "mc", "mc 95% ci", "gap", "limit")?;
        for e in &self.entries {
            let status = match (e.passed(), e.informational) {
                (_, true) => "info",
                (true, false) => "ok",
                (false, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<28} {:>10.6} {:>10.6} [{:>9.6}, {:>9.6}] {:>9.6} {:>9.6}  {status}",
                e.name,
                e.analytic,
                e.mc.mean,
                e.mc.ci_low,
                e.mc.ci_high,
                e.gap(),
                e.threshold
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Runs both engines at `params` under both association policies.
///
/// Checked rows: association per link type, void, handover and coverage
/// (both policies). The handover computed with the full GBS density for
/// every target type is added as an informational row.
pub fn validate(params: &SystemParams, trials: u64, seed: u64, quad: &QuadratureSpec) -> Result<ValidationReport> {
    if trials < 10_000 {
        return Err(Error::invalid("trials", "validation needs at least 10000 trials"));
    }
    let strongest = SystemParams {
        policy: AssociationPolicy::StrongestRss,
        ..params.clone()
    };
    let nearest = SystemParams {
        policy: AssociationPolicy::Nearest,
        ..params.clone()
    };
    let a_s: CoverageBreakdown = coverage_probability(&strongest, quad)?;
    let a_n: CoverageBreakdown = coverage_probability_nearest(&nearest, quad)?;
    let full_density = handover_probability_with_density(&strongest, TargetDensity::Unthinned, quad)?;
    let m_s = simulate(&strongest, trials, seed)?;
    let m_n = simulate(&nearest, trials, seed)?;

    let entries = vec![
        ValidationEntry::new("association_los", a_s.association[LinkType::Los.index()], m_s.association(LinkType::Los), false),
        ValidationEntry::new("association_nlos", a_s.association[LinkType::Nlos.index()], m_s.association(LinkType::Nlos), false),
        ValidationEntry::new("void", a_s.void_prob, m_s.void(), false),
        ValidationEntry::new("handover", a_s.handover_prob, m_s.handover(), false),
        ValidationEntry::new("coverage_strongest_rss", a_s.total, m_s.coverage(), false),
        ValidationEntry::new("coverage_nearest", a_n.total, m_n.coverage(), false),
        ValidationEntry::new("handover_nearest", a_n.handover_prob, m_n.handover(), true),
        ValidationEntry::new("handover_full_target_density", full_density, m_s.handover(), true),
    ];
    Ok(ValidationReport { entries })
}
