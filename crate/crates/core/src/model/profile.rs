use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConfigSpace, Location, PerLocation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct AccuracyKey {
    location: Location,
    resolution: usize,
    frame_rate: usize,
    model: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct DelayKey {
    location: Location,
    resolution: usize,
    model: usize,
}

/// Tabulated accuracy, compute delay and payload models, keyed by indices
/// into a [`ConfigSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    accuracy: BTreeMap<AccuracyKey, f64>,
    compute_delay: BTreeMap<DelayKey, f64>,
    frame_bits: BTreeMap<usize, f64>,
    /// Path bandwidth to each tier, bits per second.
    pub bandwidth: PerLocation<f64>,
    /// Server power draw while computing, watts.
    pub power: PerLocation<f64>,
    /// Shared uplink cap over all tasks, bits per second.
    pub total_bandwidth_cap: f64,
}

impl Profile {
    pub fn new(bandwidth: PerLocation<f64>, power: PerLocation<f64>, total_bandwidth_cap: f64) -> Self {
        Self {
            accuracy: BTreeMap::new(),
            compute_delay: BTreeMap::new(),
            frame_bits: BTreeMap::new(),
            bandwidth,
            power,
            total_bandwidth_cap,
        }
    }

    pub fn set_accuracy(&mut self, n: usize, z: usize, k: usize, loc: Location, value: f64) {
        self.accuracy.insert(AccuracyKey { location: loc, resolution: n, frame_rate: z, model: k }, value);
    }

    pub fn remove_accuracy(&mut self, n: usize, z: usize, k: usize, loc: Location) -> Option<f64> {
        self.accuracy.remove(&AccuracyKey { location: loc, resolution: n, frame_rate: z, model: k })
    }

    pub fn set_compute_delay(&mut self, n: usize, k: usize, loc: Location, seconds: f64) {
        self.compute_delay.insert(DelayKey { location: loc, resolution: n, model: k }, seconds);
    }

    pub fn remove_compute_delay(&mut self, n: usize, k: usize, loc: Location) -> Option<f64> {
        self.compute_delay.remove(&DelayKey { location: loc, resolution: n, model: k })
    }

    pub fn set_frame_bits(&mut self, n: usize, bits: f64) {
        self.frame_bits.insert(n, bits);
    }

    pub fn accuracy(&self, n: usize, z: usize, k: usize, loc: Location) -> Result<f64> {
        self.accuracy
            .get(&AccuracyKey { location: loc, resolution: n, frame_rate: z, model: k })
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "no accuracy entry for resolution #{n}, frame rate #{z}, model #{k} on {}",
                    loc.name()
                ))
            })
    }

    pub fn compute_delay(&self, n: usize, k: usize, loc: Location) -> Result<f64> {
        self.compute_delay
            .get(&DelayKey { location: loc, resolution: n, model: k })
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "no compute delay for resolution #{n}, model #{k} on {}",
                    loc.name()
                ))
            })
    }

    pub fn frame_bits(&self, n: usize) -> Result<f64> {
        self.frame_bits
            .get(&n)
            .copied()
            .ok_or_else(|| Error::Config(format!("no frame size for resolution #{n}")))
    }

    pub fn accuracy_entry_count(&self) -> usize {
        self.accuracy.len()
    }

    /// Lists every key of the cross-product that the tables do not cover.
    pub fn missing_keys(&self, space: &ConfigSpace) -> Vec<String> {
        let mut missing = Vec::new();
        for (n, &res) in space.resolutions.iter().enumerate() {
            if !self.frame_bits.contains_key(&n) {
                missing.push(format!("frame_bits(resolution={res})"));
            }
        }
        for loc in Location::ALL {
            for (k, model) in space.models.get(loc).iter().enumerate() {
                for (n, &res) in space.resolutions.iter().enumerate() {
                    if !self.compute_delay.contains_key(&DelayKey { location: loc, resolution: n, model: k }) {
                        missing.push(format!(
                            "compute_delay(resolution={res}, model={model}, location={})",
                            loc.name()
                        ));
                    }
                    for (z, rate) in space.frame_rates.iter().enumerate() {
                        let key = AccuracyKey { location: loc, resolution: n, frame_rate: z, model: k };
                        if !self.accuracy.contains_key(&key) {
                            missing.push(format!(
                                "accuracy(resolution={res}, frame_rate={rate}, model={model}, location={})",
                                loc.name()
                            ));
                        }
                    }
                }
            }
        }
        missing
    }

    /// Checks coverage, value ranges and the monotone shape of the tables.
    pub fn validate(&self, space: &ConfigSpace) -> Result<()> {
        space.validate()?;
        let missing = self.missing_keys(space);
        if !missing.is_empty() {
            return Err(Error::MissingProfileKeys(missing));
        }
        let scalars = [
            ("edge bandwidth", self.bandwidth.edge),
            ("cloud bandwidth", self.bandwidth.cloud),
            ("edge power", self.power.edge),
            ("cloud power", self.power.cloud),
            ("total bandwidth cap", self.total_bandwidth_cap),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.accuracy.values().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("accuracy entries must lie in [0, 1]".into()));
        }
        if self.compute_delay.values().chain(self.frame_bits.values()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("delays and frame sizes must be finite and non-negative".into()));
        }

        let (nr, nz) = (space.resolutions.len(), space.frame_rates.len());
        for loc in Location::ALL {
            let nk = space.model_count(loc);
            for k in 0..nk {
                for n in 0..nr {
                    for z in 0..nz {
                        let a = self.accuracy(n, z, k, loc)?;
                        if n + 1 < nr && self.accuracy(n + 1, z, k, loc)? < a {
                            return Err(Error::Config(format!(
                                "accuracy decreases with resolution at #{n}, frame rate #{z}, model #{k} on {}",
                                loc.name()
                            )));
                        }
                        if k + 1 < nk && self.accuracy(n, z, k + 1, loc)? < a {
                            return Err(Error::Config(format!(
                                "accuracy decreases with model index at resolution #{n}, frame rate #{z}, model #{k} on {}",
                                loc.name()
                            )));
                        }
                    }
                    if k + 1 < nk && self.compute_delay(n, k + 1, loc)? < self.compute_delay(n, k, loc)? {
                        return Err(Error::Config(format!(
                            "compute delay decreases with model index at resolution #{n}, model #{k} on {}",
                            loc.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(ConfigSpace, Profile)> {
        let text = std::fs::read_to_string(path)?;
        let doc: ProfileDoc = serde_json::from_str(&text)?;
        doc.into_parts()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEntry {
    /// Pixel height.
    pub resolution: u32,
    /// Frames per second.
    pub frame_rate: f64,
    pub model: String,
    pub location: Location,
    /// Fraction in [0, 1].
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub resolution: u32,
    pub model: String,
    pub location: Location,
    /// Compute time for one segment.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBitsEntry {
    pub resolution: u32,
    /// Encoded size of one frame.
    pub bits: f64,
}

/// On-disk profile document. Entries are keyed by values (pixel height,
/// frames per second, model name, tier) rather than indices.
///
/// Units: `compute_delay.seconds` in seconds per segment, `frame_bits.bits`
/// in bits per frame, `bandwidth` and `total_bandwidth_cap` in bits per
/// second, `power` in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub resolutions: Vec<u32>,
    pub frame_rates: Vec<f64>,
    pub models: PerLocation<Vec<String>>,
    pub accuracy: Vec<AccuracyEntry>,
    pub compute_delay: Vec<DelayEntry>,
    pub frame_bits: Vec<FrameBitsEntry>,
    pub bandwidth: PerLocation<f64>,
    pub power: PerLocation<f64>,
    pub total_bandwidth_cap: f64,
}

impl ProfileDoc {
    pub fn from_parts(space: &ConfigSpace, profile: &Profile) -> Self {
        let model_name = |loc: Location, k: usize| space.models.get(loc)[k].clone();
        ProfileDoc {
            resolutions: space.resolutions.clone(),
            frame_rates: space.frame_rates.clone(),
            models: space.models.clone(),
            accuracy: profile
                .accuracy
                .iter()
                .filter(|(key, _)| {
                    key.resolution < space.resolutions.len()
                        && key.frame_rate < space.frame_rates.len()
                        && key.model < space.model_count(key.location)
                })
                .map(|(key, &value)| AccuracyEntry {
                    resolution: space.resolutions[key.resolution],
                    frame_rate: space.frame_rates[key.frame_rate],
                    model: model_name(key.location, key.model),
                    location: key.location,
                    value,
                })
                .collect(),
            compute_delay: profile
                .compute_delay
                .iter()
                .filter(|(key, _)| key.resolution < space.resolutions.len() && key.model < space.model_count(key.location))
                .map(|(key, &seconds)| DelayEntry {
                    resolution: space.resolutions[key.resolution],
                    model: model_name(key.location, key.model),
                    location: key.location,
                    seconds,
                })
                .collect(),
            frame_bits: profile
                .frame_bits
                .iter()
                .filter(|(n, _)| **n < space.resolutions.len())
                .map(|(&n, &bits)| FrameBitsEntry { resolution: space.resolutions[n], bits })
                .collect(),
            bandwidth: profile.bandwidth.clone(),
            power: profile.power.clone(),
            total_bandwidth_cap: profile.total_bandwidth_cap,
        }
    }

    /// Resolves value keys to indices. Coverage is not checked here; see
    /// [`Profile::validate`].
    pub fn into_parts(self) -> Result<(ConfigSpace, Profile)> {
        let space = ConfigSpace {
            resolutions: self.resolutions,
            frame_rates: self.frame_rates,
            models: self.models,
        };
        space.validate()?;
        let res_index = |r: u32| {
            space
                .resolutions
                .iter()
                .position(|&x| x == r)
                .ok_or_else(|| Error::Config(format!("unknown resolution {r}")))
        };
        let rate_index = |f: f64| {
            space
                .frame_rates
                .iter()
                .position(|&x| x == f)
                .ok_or_else(|| Error::Config(format!("unknown frame rate {f}")))
        };
        let model_index = |loc: Location, name: &str| {
            space
                .models
                .get(loc)
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::Config(format!("unknown {} model {name:?}", loc.name())))
        };

        let mut profile = Profile::new(self.bandwidth, self.power, self.total_bandwidth_cap);
        for e in &self.accuracy {
            let key = (res_index(e.resolution)?, rate_index(e.frame_rate)?, model_index(e.location, &e.model)?);
            profile.set_accuracy(key.0, key.1, key.2, e.location, e.value);
        }
        for e in &self.compute_delay {
            profile.set_compute_delay(res_index(e.resolution)?, model_index(e.location, &e.model)?, e.location, e.seconds);
        }
        for e in &self.frame_bits {
            profile.set_frame_bits(res_index(e.resolution)?, e.bits);
        }
        Ok((space, profile))
    }
}
