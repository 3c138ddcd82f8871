//! Device maps: persistence of per-location models and spatial queries.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calib::LocationModel;
use crate::error::{Error, Result};
use crate::frf::{rms_relative_error, FrequencyResponse};
use crate::plant::Location;
use crate::tf::{select_order, RationalTF};

pub const FORMAT_VERSION: u64 = 1;

/// Queries closer than this to a stored location return its FRF verbatim.
const COINCIDENCE_RADIUS: f64 = 1e-9;
const IDW_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationFailure {
    pub location: Location,
    pub error: String,
}

/// Calibrated models for a set of target locations on one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceMap {
    sample_rate: f64,
    band: (f64, f64),
    actuator_pos: Option<Location>,
    entries: Vec<LocationModel>,
    failures: Vec<LocationFailure>,
}

impl DeviceMap {
    pub fn new(
        sample_rate: f64,
        band: (f64, f64),
        actuator_pos: Option<Location>,
        entries: Vec<LocationModel>,
        failures: Vec<LocationFailure>,
    ) -> Result<Self> {
        let map = DeviceMap {
            sample_rate,
            band,
            actuator_pos,
            entries,
            failures,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample_rate_hz", "must be positive"));
        }
        if !(self.band.0 >= 0.0 && self.band.0 < self.band.1) {
            return Err(Error::invalid("band_hz", "need low < high"));
        }
        if let Some(p) = &self.actuator_pos {
            p.validate()?;
        }
        let grid = self.entries.first().map(|e| e.frf.freqs());
        for (i, e) in self.entries.iter().enumerate() {
            e.location.validate()?;
            if self.entries[..i].iter().any(|o| o.location == e.location) {
                return Err(Error::DuplicateLocation {
                    x: e.location.x,
                    y: e.location.y,
                });
            }
            if e.tf.sample_rate() != self.sample_rate || e.frf.sample_rate() != self.sample_rate {
                return Err(Error::invalid("entries", format!("entry {i}: sample rate differs from the map")));
            }
            if Some(e.frf.freqs()) != grid {
                return Err(Error::invalid("entries", format!("entry {i}: frf grid differs from entry 0")));
            }
            let metrics = [e.fit_error, e.render_error];
            if metrics.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("entries", format!("entry {i}: errors must be finite and >= 0")));
            }
            if !(0.0..=1.0).contains(&e.mean_coherence) {
                return Err(Error::invalid("entries", format!("entry {i}: mean_coherence outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn format_version(&self) -> u64 {
        FORMAT_VERSION
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    pub fn actuator_pos(&self) -> Option<Location> {
        self.actuator_pos
    }

    pub fn with_actuator_pos(mut self, pos: Location) -> Self {
        self.actuator_pos = Some(pos);
        self
    }

    pub fn entries(&self) -> &[LocationModel] {
        &self.entries
    }

    pub fn failures(&self) -> &[LocationFailure] {
        &self.failures
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = MapDoc::from(self);
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Malformed {
            what: "device map".into(),
            reason: e.to_string(),
        })?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Malformed {
            what: "device map JSON".into(),
            reason: e.to_string(),
        })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(FORMAT_VERSION) => {}
            Some(found) => {
                return Err(Error::VersionMismatch {
                    found,
                    supported: FORMAT_VERSION,
                })
            }
            None => {
                return Err(Error::Malformed {
                    what: "device map JSON".into(),
                    reason: "missing or non-integer `format_version`".into(),
                })
            }
        }
        let doc: MapDoc = serde_json::from_value(value).map_err(|e| Error::Malformed {
            what: "device map JSON".into(),
            reason: e.to_string(),
        })?;
        doc.into_map()
    }
}

pub fn save_map(map: &DeviceMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, map.to_json()?).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_map(path: impl AsRef<Path>) -> Result<DeviceMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    DeviceMap::from_json(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDoc {
    format_version: u64,
    sample_rate_hz: f64,
    band_hz: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actuator_pos: Option<Location>,
    entries: Vec<EntryDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    failures: Vec<LocationFailure>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    location: Location,
    tf: TfDoc,
    order: usize,
    fit_error: f64,
    render_error: f64,
    mean_coherence: f64,
    converged: bool,
    iterations_used: usize,
    frf: FrfDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfDoc {
    b: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrfDoc {
    f: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<&DeviceMap> for MapDoc {
    fn from(map: &DeviceMap) -> Self {
        MapDoc {
            format_version: FORMAT_VERSION,
            sample_rate_hz: map.sample_rate,
            band_hz: [map.band.0, map.band.1],
            actuator_pos: map.actuator_pos,
            entries: map
                .entries
                .iter()
                .map(|e| EntryDoc {
                    location: e.location,
                    tf: TfDoc {
                        b: e.tf.b().to_vec(),
                        a: e.tf.a().to_vec(),
                    },
                    order: e.order,
                    fit_error: e.fit_error,
                    render_error: e.render_error,
                    mean_coherence: e.mean_coherence,
                    converged: e.converged,
                    iterations_used: e.iterations_used,
                    frf: FrfDoc {
                        f: e.frf.freqs().to_vec(),
                        re: e.frf.values().iter().map(|v| v.re).collect(),
                        im: e.frf.values().iter().map(|v| v.im).collect(),
                    },
                })
                .collect(),
            failures: map.failures.clone(),
        }
    }
}

impl MapDoc {
    fn into_map(self) -> Result<DeviceMap> {
        let fs = self.sample_rate_hz;
        let entries = self
            .entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let tf = RationalTF::new(e.tf.b, e.tf.a, fs).map_err(|err| Error::Malformed {
                    what: format!("entries[{i}].tf"),
                    reason: err.to_string(),
                })?;
                if e.frf.re.len() != e.frf.f.len() || e.frf.im.len() != e.frf.f.len() {
                    return Err(Error::Malformed {
                        what: format!("entries[{i}].frf"),
                        reason: "f, re and im must have equal length".into(),
                    });
                }
                let values = e
                    .frf
                    .re
                    .iter()
                    .zip(&e.frf.im)
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect();
                let frf = FrequencyResponse::new(e.frf.f, values, None, fs).map_err(|err| Error::Malformed {
                    what: format!("entries[{i}].frf"),
                    reason: err.to_string(),
                })?;
                Ok(LocationModel {
                    location: e.location,
                    tf,
                    order: e.order,
                    fit_error: e.fit_error,
                    render_error: e.render_error,
                    mean_coherence: e.mean_coherence,
                    converged: e.converged,
                    iterations_used: e.iterations_used,
                    frf,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DeviceMap::new(
            fs,
            (self.band_hz[0], self.band_hz[1]),
            self.actuator_pos,
            entries,
            self.failures,
        )
    }
}

/// Inverse-distance-weighted FRF at `query` over `entries` (power 2, `ε = 1e-12`).
fn idw<'a>(entries: impl Iterator<Item = &'a LocationModel> + Clone, query: Location) -> Result<FrequencyResponse> {
    let first = entries.clone().next().ok_or(Error::EmptyMap)?;
    if let Some(hit) = entries
        .clone()
        .find(|e| e.location.distance(&query) <= COINCIDENCE_RADIUS)
    {
        return Ok(hit.frf.clone());
    }
    let weight = |e: &LocationModel| {
        let d = e.location.distance(&query);
        1.0 / (d * d + IDW_EPSILON)
    };
    let total: f64 = entries.clone().map(weight).sum();
    let mut acc = vec![Complex64::new(0.0, 0.0); first.frf.len()];
    for e in entries {
        let w = weight(e) / total;
        for (a, v) in acc.iter_mut().zip(e.frf.values()) {
            *a += v * w;
        }
    }
    FrequencyResponse::new(first.frf.freqs().to_vec(), acc, None, first.frf.sample_rate())
}

/// Interpolated FRF at an arbitrary location.
pub fn interpolate_frf(map: &DeviceMap, query: Location) -> Result<FrequencyResponse> {
    idw(map.entries.iter(), query)
}

/// Rational model at `query`, refitted from the interpolated FRF over all its bins.
pub fn model_at(map: &DeviceMap, query: Location, max_order: usize, fit_tol: f64) -> Result<RationalTF> {
    let frf = interpolate_frf(map, query)?;
    let mask = vec![true; frf.len()];
    Ok(select_order(&frf, &mask, max_order, fit_tol)?.tf)
}

/// Leave-one-out rms-relative error of the interpolation at each stored location.
pub fn loo_validate(map: &DeviceMap) -> Result<Vec<f64>> {
    let n = map.entries.len();
    if n < 2 {
        return Err(Error::invalid("map", format!("leave-one-out needs >= 2 entries, got {n}")));
    }
    (0..n)
        .map(|i| {
            let held = &map.entries[i];
            let others = map
                .entries
                .iter()
                .enumerate()
                .filter(move |&(j, _)| j != i)
                .map(|(_, e)| e);
            let predicted = idw(others, held.location)?;
            let mask = vec![true; held.frf.len()];
            Ok(rms_relative_error(predicted.values(), held.frf.values(), &mask))
        })
        .collect()
}
