//! Problem data: hospitals, candidate facility sites, disposal sites and
//! global parameters, with validation, JSON persistence and a seeded
//! synthetic generator.

use std::collections::HashMap;
use std::fmt;
use std::io;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{distance_matrix, DistanceMatrix, GeoError, LatLon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hospital {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Masks used per planning period.
    pub usage: f64,
}

/// A location that may host a collection centre, a reprocessing centre, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSite {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub fixed_cost_collection: f64,
    pub fixed_cost_reprocessing: f64,
    pub unit_cost_collection: f64,
    pub unit_cost_reprocessing: f64,
    pub fixed_emission_collection: f64,
    pub fixed_emission_reprocessing: f64,
    pub unit_emission_collection: f64,
    pub unit_emission_reprocessing: f64,
    pub jobs_collection: u32,
    pub jobs_reprocessing: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisposalSite {
    pub id: String,
    /// CAD per mask.
    pub unit_cost: f64,
    /// kg CO₂ per mask.
    pub unit_emission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalParams {
    /// Selling price of a reprocessed mask, CAD.
    pub price: f64,
    /// kg CO₂ avoided per reprocessed mask (footprint of producing a new one).
    pub production_emission: f64,
    pub transport_cost_per_km: f64,
    pub truck_emission_per_km: f64,
    /// Budget for fixed facility costs, CAD.
    pub budget: f64,
    /// Share of used masks that gets collected.
    pub alpha: f64,
    /// Share of collected masks fit for reprocessing.
    pub beta: f64,
}

/// Externally computed distances in km, bypassing the haversine computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceOverride {
    pub hospital_site: Vec<Vec<f64>>,
    pub site_site: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub hospitals: Vec<Hospital>,
    pub sites: Vec<CandidateSite>,
    pub disposal_sites: Vec<DisposalSite>,
    pub params: GlobalParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_override: Option<DistanceOverride>,
}

/// Hospital→site and site→site distances for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub hospital_site: DistanceMatrix<f64>,
    pub site_site: DistanceMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance:\n{}", list(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn load_instance<R: io::Read>(source: R) -> Result<Instance, InstanceError> {
    let inst: Instance = serde_json::from_reader(source)?;
    let violations = validate(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(InstanceError::Invalid(violations))
    }
}

pub fn save_instance<W: io::Write>(inst: &Instance, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, inst)?;
    out.write_all(b"\n")
}

impl Instance {
    pub fn total_usage(&self) -> f64 {
        self.hospitals.iter().map(|h| h.usage).sum()
    }

    /// Distances from the override when present, otherwise haversine.
    pub fn distances(&self) -> Result<Distances, GeoError> {
        let hospital_ids: Vec<String> = self.hospitals.iter().map(|h| h.id.clone()).collect();
        let site_ids: Vec<String> = self.sites.iter().map(|s| s.id.clone()).collect();
        if let Some(ov) = &self.distance_override {
            return Ok(Distances {
                hospital_site: DistanceMatrix {
                    from_ids: hospital_ids,
                    to_ids: site_ids.clone(),
                    km: ov.hospital_site.clone(),
                },
                site_site: DistanceMatrix {
                    from_ids: site_ids.clone(),
                    to_ids: site_ids,
                    km: ov.site_site.clone(),
                },
            });
        }
        let hospitals: Vec<_> = self
            .hospitals
            .iter()
            .map(|h| (h.id.clone(), LatLon::new(h.lat, h.lon)))
            .collect();
        let sites: Vec<_> = self
            .sites
            .iter()
            .map(|s| (s.id.clone(), LatLon::new(s.lat, s.lon)))
            .collect();
        Ok(Distances {
            hospital_site: distance_matrix(&hospitals, &sites)?,
            site_site: distance_matrix(&sites, &sites)?,
        })
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: String, message: impl Into<String>) {
        self.out.push(Violation {
            path,
            message: message.into(),
        });
    }

    fn non_negative(&mut self, path: impl Fn() -> String, v: f64) {
        if !v.is_finite() {
            self.push(path(), format!("must be finite, got {v}"));
        } else if v < 0.0 {
            self.push(path(), format!("must be non-negative, got {v}"));
        }
    }

    fn fraction(&mut self, path: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.push(path.to_string(), format!("must lie in [0, 1], got {v}"));
        }
    }

    fn coords(&mut self, prefix: &str, lat: f64, lon: f64) {
        if !(-90.0..=90.0).contains(&lat) {
            self.push(format!("{prefix}.lat"), format!("must lie in [-90, 90], got {lat}"));
        }
        if !(-180.0..=180.0).contains(&lon) {
            self.push(format!("{prefix}.lon"), format!("must lie in [-180, 180], got {lon}"));
        }
    }

    fn unique_ids<'a>(&mut self, list: &str, ids: impl Iterator<Item = &'a str>) {
        let mut first: HashMap<&str, usize> = HashMap::new();
        for (i, id) in ids.enumerate() {
            if let Some(&j) = first.get(id) {
                self.push(
                    format!("{list}[{i}].id"),
                    format!("duplicate id {id:?} (also {list}[{j}].id)"),
                );
            } else {
                first.insert(id, i);
            }
        }
    }

    fn matrix(&mut self, path: &str, m: &[Vec<f64>], rows: usize, cols: usize) {
        if m.len() != rows {
            self.push(path.to_string(), format!("expected {rows} rows, got {}", m.len()));
        }
        for (i, row) in m.iter().enumerate() {
            if row.len() != cols {
                self.push(
                    format!("{path}[{i}]"),
                    format!("expected {cols} entries, got {}", row.len()),
                );
            }
            for (j, &v) in row.iter().enumerate() {
                self.non_negative(|| format!("{path}[{i}][{j}]"), v);
            }
        }
    }
}

/// Every violated invariant, each with a field path. Empty iff valid.
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };

    if inst.hospitals.is_empty() {
        c.push("hospitals".into(), "at least one hospital is required");
    }
    if inst.sites.is_empty() {
        c.push("sites".into(), "at least one candidate site is required");
    }
    if inst.disposal_sites.is_empty() {
        c.push("disposal_sites".into(), "at least one disposal site is required");
    }

    for (i, h) in inst.hospitals.iter().enumerate() {
        c.coords(&format!("hospitals[{i}]"), h.lat, h.lon);
        c.non_negative(|| format!("hospitals[{i}].usage"), h.usage);
    }
    for (i, s) in inst.sites.iter().enumerate() {
        c.coords(&format!("sites[{i}]"), s.lat, s.lon);
        let fields = [
            ("fixed_cost_collection", s.fixed_cost_collection),
            ("fixed_cost_reprocessing", s.fixed_cost_reprocessing),
            ("unit_cost_collection", s.unit_cost_collection),
            ("unit_cost_reprocessing", s.unit_cost_reprocessing),
            ("fixed_emission_collection", s.fixed_emission_collection),
            ("fixed_emission_reprocessing", s.fixed_emission_reprocessing),
            ("unit_emission_collection", s.unit_emission_collection),
            ("unit_emission_reprocessing", s.unit_emission_reprocessing),
        ];
        for (name, v) in fields {
            c.non_negative(|| format!("sites[{i}].{name}"), v);
        }
    }
    for (i, d) in inst.disposal_sites.iter().enumerate() {
        c.non_negative(|| format!("disposal_sites[{i}].unit_cost"), d.unit_cost);
        c.non_negative(|| format!("disposal_sites[{i}].unit_emission"), d.unit_emission);
    }

    let p = &inst.params;
    for (name, v) in [
        ("price", p.price),
        ("production_emission", p.production_emission),
        ("transport_cost_per_km", p.transport_cost_per_km),
        ("truck_emission_per_km", p.truck_emission_per_km),
        ("budget", p.budget),
    ] {
        c.non_negative(|| format!("params.{name}"), v);
    }
    c.fraction("params.alpha", p.alpha);
    c.fraction("params.beta", p.beta);

    c.unique_ids("hospitals", inst.hospitals.iter().map(|h| h.id.as_str()));
    c.unique_ids("sites", inst.sites.iter().map(|s| s.id.as_str()));
    c.unique_ids("disposal_sites", inst.disposal_sites.iter().map(|d| d.id.as_str()));

    if let Some(ov) = &inst.distance_override {
        let (h, s) = (inst.hospitals.len(), inst.sites.len());
        c.matrix("distance_override.hospital_site", &ov.hospital_site, h, s);
        c.matrix("distance_override.site_site", &ov.site_site, s, s);
    }

    c.out
}

// ---------------------------------------------------------------------------
// Synthetic instances

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// Sampling ranges for [`generate_synthetic`].
///
/// Disposal unit cost is drawn as a fraction of the mask price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeConfig {
    pub lat: Range,
    pub lon: Range,
    pub usage: Range,
    pub price: Range,
    pub production_emission: Range,
    pub transport_cost_per_km: Range,
    pub truck_emission_per_km: Range,
    pub budget: Range,
    pub alpha: Range,
    pub beta: Range,
    pub fixed_cost_collection: Range,
    pub fixed_cost_reprocessing: Range,
    pub unit_cost_collection: Range,
    pub unit_cost_reprocessing: Range,
    pub fixed_emission_collection: Range,
    pub fixed_emission_reprocessing: Range,
    pub unit_emission_collection: Range,
    pub unit_emission_reprocessing: Range,
    pub jobs_collection: Range,
    pub jobs_reprocessing: Range,
    pub disposal_cost_fraction: Range,
    pub disposal_emission: Range,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            // Vancouver Island bounding box
            lat: Range::new(48.3, 50.8),
            lon: Range::new(-128.5, -123.2),
            usage: Range::new(100_000.0, 600_000.0),
            price: Range::new(0.40, 0.60),
            production_emission: Range::new(0.040, 0.060),
            transport_cost_per_km: Range::new(1.0, 2.5),
            truck_emission_per_km: Range::new(0.15, 0.30),
            budget: Range::new(1_000_000.0, 1_500_000.0),
            alpha: Range::new(0.80, 0.80),
            beta: Range::new(0.95, 0.95),
            fixed_cost_collection: Range::new(15_000.0, 40_000.0),
            fixed_cost_reprocessing: Range::new(50_000.0, 120_000.0),
            unit_cost_collection: Range::new(0.02, 0.06),
            unit_cost_reprocessing: Range::new(0.10, 0.25),
            fixed_emission_collection: Range::new(200.0, 800.0),
            fixed_emission_reprocessing: Range::new(1_000.0, 4_000.0),
            unit_emission_collection: Range::new(0.0005, 0.0020),
            unit_emission_reprocessing: Range::new(0.002, 0.006),
            jobs_collection: Range::new(1.0, 3.0),
            jobs_reprocessing: Range::new(3.0, 8.0),
            disposal_cost_fraction: Range::new(0.20, 0.30),
            disposal_emission: Range::new(0.005, 0.010),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("range {field} is invalid: [{min}, {max}]")]
    InvalidRange { field: &'static str, min: f64, max: f64 },
    #[error("{what} count must be at least 1")]
    ZeroCount { what: &'static str },
}

impl RangeConfig {
    fn fields(&self) -> [(&'static str, Range, f64, f64); 22] {
        let inf = f64::INFINITY;
        [
            ("lat", self.lat, -90.0, 90.0),
            ("lon", self.lon, -180.0, 180.0),
            ("usage", self.usage, 0.0, inf),
            ("price", self.price, 0.0, inf),
            ("production_emission", self.production_emission, 0.0, inf),
            ("transport_cost_per_km", self.transport_cost_per_km, 0.0, inf),
            ("truck_emission_per_km", self.truck_emission_per_km, 0.0, inf),
            ("budget", self.budget, 0.0, inf),
            ("alpha", self.alpha, 0.0, 1.0),
            ("beta", self.beta, 0.0, 1.0),
            ("fixed_cost_collection", self.fixed_cost_collection, 0.0, inf),
            ("fixed_cost_reprocessing", self.fixed_cost_reprocessing, 0.0, inf),
            ("unit_cost_collection", self.unit_cost_collection, 0.0, inf),
            ("unit_cost_reprocessing", self.unit_cost_reprocessing, 0.0, inf),
            ("fixed_emission_collection", self.fixed_emission_collection, 0.0, inf),
            ("fixed_emission_reprocessing", self.fixed_emission_reprocessing, 0.0, inf),
            ("unit_emission_collection", self.unit_emission_collection, 0.0, inf),
            ("unit_emission_reprocessing", self.unit_emission_reprocessing, 0.0, inf),
            ("jobs_collection", self.jobs_collection, 0.0, u32::MAX as f64),
            ("jobs_reprocessing", self.jobs_reprocessing, 0.0, u32::MAX as f64),
            ("disposal_cost_fraction", self.disposal_cost_fraction, 0.0, inf),
            ("disposal_emission", self.disposal_emission, 0.0, inf),
        ]
    }

    pub fn check(&self) -> Result<(), GenerateError> {
        for (field, r, lo, hi) in self.fields() {
            let ok = r.min.is_finite() && r.max.is_finite() && r.min <= r.max && r.min >= lo && r.max <= hi;
            if !ok {
                return Err(GenerateError::InvalidRange {
                    field,
                    min: r.min,
                    max: r.max,
                });
            }
        }
        Ok(())
    }
}

/// Uniform draws from SplitMix64.
///
/// * real in `[min, max]`: `u = (next >> 11) · 2⁻⁵³`, `v = min + u·(max − min)`,
///   rounded half away from zero to 6 decimals and clamped to the range;
/// * integer in `[min, max]`: `min + ⌊u·(max − min + 1)⌋`, capped at `max`.
struct Sampler {
    rng: SplitMix64,
}

impl Sampler {
    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn real(&mut self, r: Range) -> f64 {
        let v = r.min + self.unit() * (r.max - r.min);
        round6(v).clamp(r.min, r.max)
    }

    fn int(&mut self, r: Range) -> u64 {
        let (lo, hi) = (r.min.ceil() as u64, r.max.floor() as u64);
        if hi <= lo {
            return lo;
        }
        let span = (hi - lo + 1) as f64;
        (lo + (self.unit() * span).floor() as u64).min(hi)
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Builds a random instance. The draw order is fixed: global parameters
/// (price, production_emission, transport_cost_per_km, truck_emission_per_km,
/// budget, alpha, beta), then per hospital (lat, lon, usage), per site (lat,
/// lon, then the ten cost/emission/job fields in declaration order), and per
/// disposal site (cost fraction, emission).
pub fn generate_synthetic(
    seed: u64,
    n_hospitals: usize,
    n_sites: usize,
    n_disposal: usize,
    ranges: &RangeConfig,
) -> Result<Instance, GenerateError> {
    for (what, n) in [("hospital", n_hospitals), ("site", n_sites), ("disposal site", n_disposal)] {
        if n == 0 {
            return Err(GenerateError::ZeroCount { what });
        }
    }
    ranges.check()?;
    let mut s = Sampler {
        rng: SplitMix64::seed_from_u64(seed),
    };
    let r = ranges;

    let params = GlobalParams {
        price: s.real(r.price),
        production_emission: s.real(r.production_emission),
        transport_cost_per_km: s.real(r.transport_cost_per_km),
        truck_emission_per_km: s.real(r.truck_emission_per_km),
        budget: s.real(r.budget),
        alpha: s.real(r.alpha),
        beta: s.real(r.beta),
    };

    let width = |n: usize| n.to_string().len().max(2);
    let hw = width(n_hospitals);
    let hospitals = (1..=n_hospitals)
        .map(|i| Hospital {
            id: format!("H{i:0hw$}"),
            name: format!("Hospital {i:0hw$}"),
            lat: s.real(r.lat),
            lon: s.real(r.lon),
            usage: s.int(r.usage) as f64,
        })
        .collect();

    let sw = width(n_sites);
    let sites = (1..=n_sites)
        .map(|i| CandidateSite {
            id: format!("S{i:0sw$}"),
            name: String::new(),
            lat: s.real(r.lat),
            lon: s.real(r.lon),
            fixed_cost_collection: s.real(r.fixed_cost_collection),
            fixed_cost_reprocessing: s.real(r.fixed_cost_reprocessing),
            unit_cost_collection: s.real(r.unit_cost_collection),
            unit_cost_reprocessing: s.real(r.unit_cost_reprocessing),
            fixed_emission_collection: s.real(r.fixed_emission_collection),
            fixed_emission_reprocessing: s.real(r.fixed_emission_reprocessing),
            unit_emission_collection: s.real(r.unit_emission_collection),
            unit_emission_reprocessing: s.real(r.unit_emission_reprocessing),
            jobs_collection: s.int(r.jobs_collection) as u32,
            jobs_reprocessing: s.int(r.jobs_reprocessing) as u32,
        })
        .collect();

    let (flo, fhi) = (r.disposal_cost_fraction.min, r.disposal_cost_fraction.max);
    let disposal_sites = (1..=n_disposal)
        .map(|m| {
            let frac = s.unit() * (fhi - flo) + flo;
            let lo = flo * params.price;
            let hi = fhi * params.price;
            DisposalSite {
                id: format!("D{m}"),
                unit_cost: round6(frac * params.price).clamp(lo, hi),
                unit_emission: s.real(r.disposal_emission),
            }
        })
        .collect();

    Ok(Instance {
        hospitals,
        sites,
        disposal_sites,
        params,
        distance_override: None,
    })
}
