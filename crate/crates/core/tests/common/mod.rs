#![allow(dead_code)]

pub mod lp_cases;

use clsc_core::formulation::Criterion;
use clsc_core::instance::{Distances, Instance};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance from the chord between two unit vectors.
pub fn chord_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let v = |lat: f64, lon: f64| {
        let (la, lo) = (lat.to_radians(), lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (a, b) = (v(lat1, lon1), v(lat2, lon2));
    let chord = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_KM * (chord / 2.0).min(1.0).asin()
}

/// Best objective value over every binary configuration, with the flows of
/// each configuration routed greedily: a hospital ships everything to its
/// best assigned centre, which sends its reprocessable share to the best
/// routed reprocessing site, and disposal goes to the best disposal site.
/// Returns `None` when no configuration is feasible.
pub fn analytic_optimum(inst: &Instance, dist: &Distances, c: Criterion) -> Option<f64> {
    let (h, s) = (inst.hospitals.len(), inst.sites.len());
    let bits = 2 * s + h * s + s * s;
    assert!(bits <= 24, "too many binaries for enumeration: {bits}");
    let p = &inst.params;
    let per_km = match c {
        Criterion::Profit => p.transport_cost_per_km,
        Criterion::Environment => p.truck_emission_per_km,
        Criterion::Jobs => 0.0,
    };
    let collect_value = |j: usize| match c {
        Criterion::Profit => -inst.sites[j].unit_cost_collection,
        Criterion::Environment => -inst.sites[j].unit_emission_collection,
        Criterion::Jobs => 0.0,
    };
    let reprocess_value = |k: usize| match c {
        Criterion::Profit => p.price - inst.sites[k].unit_cost_reprocessing,
        Criterion::Environment => p.production_emission - inst.sites[k].unit_emission_reprocessing,
        Criterion::Jobs => 0.0,
    };
    let dispose_value = inst
        .disposal_sites
        .iter()
        .map(|d| match c {
            Criterion::Profit => -d.unit_cost,
            Criterion::Environment => -d.unit_emission,
            Criterion::Jobs => 0.0,
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let mut best: Option<f64> = None;
    'outer: for mask in 0u64..(1u64 << bits) {
        let bit = |b: usize| (mask >> b) & 1 == 1;
        let x = |j: usize| bit(j);
        let w = |k: usize| bit(s + k);
        let y = |i: usize, j: usize| bit(2 * s + i * s + j);
        let z = |j: usize, k: usize| bit(2 * s + h * s + j * s + k);

        let mut fixed = 0.0;
        for j in 0..s {
            if x(j) {
                fixed += inst.sites[j].fixed_cost_collection;
            }
            if w(j) {
                fixed += inst.sites[j].fixed_cost_reprocessing;
            }
        }
        if fixed > p.budget {
            continue;
        }
        for j in 0..s {
            for k in 0..s {
                if z(j, k) && !w(k) {
                    continue 'outer;
                }
            }
            if x(j) && !(0..s).any(|k| z(j, k)) {
                continue 'outer;
            }
        }
        for i in 0..h {
            if !(0..s).any(|j| y(i, j)) {
                continue 'outer;
            }
            for j in 0..s {
                if y(i, j) && !x(j) {
                    continue 'outer;
                }
            }
        }

        let mut value = 0.0;
        for j in 0..s {
            let site = &inst.sites[j];
            value += match c {
                Criterion::Profit => {
                    -(site.fixed_cost_collection * x(j) as u8 as f64 + site.fixed_cost_reprocessing * w(j) as u8 as f64)
                }
                Criterion::Environment => {
                    -(site.fixed_emission_collection * x(j) as u8 as f64
                        + site.fixed_emission_reprocessing * w(j) as u8 as f64)
                }
                Criterion::Jobs => {
                    site.jobs_collection as f64 * x(j) as u8 as f64 + site.jobs_reprocessing as f64 * w(j) as u8 as f64
                }
            };
            for k in 0..s {
                if z(j, k) {
                    value -= per_km * dist.site_site.km[j][k];
                }
            }
        }
        // value of one collected mask at each centre
        let unit: Vec<Option<f64>> = (0..s)
            .map(|j| {
                let down = (0..s).filter(|&k| z(j, k)).map(reprocess_value).fold(f64::NEG_INFINITY, f64::max);
                if p.beta > 0.0 && down == f64::NEG_INFINITY {
                    None
                } else {
                    let down = if p.beta > 0.0 { p.beta * down } else { 0.0 };
                    Some(collect_value(j) + down + (1.0 - p.beta) * dispose_value)
                }
            })
            .collect();
        for i in 0..h {
            let supply = p.alpha * inst.hospitals[i].usage;
            let mut best_unit: Option<f64> = None;
            for j in 0..s {
                if y(i, j) {
                    value -= per_km * dist.hospital_site.km[i][j];
                    if let Some(u) = unit[j] {
                        best_unit = Some(best_unit.map_or(u, |b: f64| b.max(u)));
                    }
                }
            }
            if supply > 0.0 {
                match best_unit {
                    Some(u) => value += supply * u,
                    None => continue 'outer,
                }
            }
        }
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    best
}

/// Pairwise strict-dominance check, written out longhand.
pub fn any_dominated(triples: &[[f64; 3]]) -> Option<(usize, usize)> {
    for (a, ta) in triples.iter().enumerate() {
        for (b, tb) in triples.iter().enumerate() {
            if a == b {
                continue;
            }
            let geq = ta[0] >= tb[0] && ta[1] >= tb[1] && ta[2] >= tb[2];
            let gt = ta[0] > tb[0] || ta[1] > tb[1] || ta[2] > tb[2];
            if geq && gt {
                return Some((a, b));
            }
        }
    }
    None
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
