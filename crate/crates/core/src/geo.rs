//! Great-circle distances between sites.
//!
//! Distances are computed with the haversine formula on a sphere of mean
//! Earth radius. The result is symmetric bit-for-bit because the two
//! endpoints are put in a canonical order before evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Mean Earth radius in kilometres (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate {index:?} out of range: lat {lat}, lon {lon}")]
    OutOfRange {
        index: Option<(usize, usize)>,
        lat: f64,
        lon: f64,
    },
    #[error("distance matrix needs at least one point on each side")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon<T> {
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> LatLon<T> {
    pub fn new(lat: T, lon: T) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        let (lat, lon) = (self.lat.as_f64(), self.lon.as_f64());
        (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
    }

    fn check(&self) -> Result<(), GeoError> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(GeoError::OutOfRange {
                index: None,
                lat: self.lat.as_f64(),
                lon: self.lon.as_f64(),
            })
        }
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km<T: Scalar>(a: LatLon<T>, b: LatLon<T>) -> Result<T, GeoError> {
    a.check()?;
    b.check()?;
    // canonical order makes the result exactly symmetric
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    let two = T::lit(2.0);
    let lat1 = p.lat.to_radians();
    let lat2 = q.lat.to_radians();
    let dlat = (q.lat - p.lat).to_radians();
    let dlon = (q.lon - p.lon).to_radians();
    let s_lat = (dlat / two).sin();
    let s_lon = (dlon / two).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    let h = h.max(T::zero()).min(T::one());
    Ok(two * T::lit(EARTH_RADIUS_KM) * h.sqrt().asin())
}

/// Dense distance matrix with labelled rows (`from_ids`) and columns (`to_ids`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix<T = f64> {
    pub from_ids: Vec<String>,
    pub to_ids: Vec<String>,
    pub km: Vec<Vec<T>>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn rows(&self) -> usize {
        self.km.len()
    }

    pub fn cols(&self) -> usize {
        self.km.first().map_or(self.to_ids.len(), Vec::len)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.km[i][j]
    }

    /// Writes the matrix as CSV: a header row of target ids, then one row per
    /// source id. Values use six fixed decimals.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.to_ids.len() + 1);
        header.push("id".to_string());
        header.extend(self.to_ids.iter().cloned());
        wtr.write_record(&header)?;
        for (id, row) in self.from_ids.iter().zip(&self.km) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(id.clone());
            rec.extend(row.iter().map(|v| format!("{:.6}", v.as_f64())));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `km[i][j] = haversine_km(a[i], b[j])`.
pub fn distance_matrix<T: Scalar>(
    from: &[(String, LatLon<T>)],
    to: &[(String, LatLon<T>)],
) -> Result<DistanceMatrix<T>, GeoError> {
    if from.is_empty() || to.is_empty() {
        return Err(GeoError::Empty);
    }
    let mut km = Vec::with_capacity(from.len());
    for (i, (_, a)) in from.iter().enumerate() {
        let mut row = Vec::with_capacity(to.len());
        for (j, (_, b)) in to.iter().enumerate() {
            let d = haversine_km(*a, *b).map_err(|e| match e {
                GeoError::OutOfRange { lat, lon, .. } => GeoError::OutOfRange {
                    index: Some((i, j)),
                    lat,
                    lon,
                },
                other => other,
            })?;
            row.push(d);
        }
        km.push(row);
    }
    Ok(DistanceMatrix {
        from_ids: from.iter().map(|(id, _)| id.clone()).collect(),
        to_ids: to.iter().map(|(id, _)| id.clone()).collect(),
        km,
    })
}
