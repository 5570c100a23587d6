//! Geometry and large-scale channel model.
//!
//! Gains follow a log-distance path loss with i.i.d. log-normal shadowing per
//! UE–AP link: `gain_dB = −(PL₀ + 10·n·log₁₀(max(d, 1 m))) − shadow`, and
//! `RSRP_dBm = P_tx + gain_dB`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApLayout {
    Grid,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_aps: usize,
    pub area_side_m: f64,
    pub ap_layout: ApLayout,
    pub num_ues: usize,
    pub tx_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance.
    pub pathloss_ref_db: f64,
    pub shadowing_sigma_db: f64,
    pub detection_threshold_dbm: f64,
    /// Maximum number of APs a UE reports.
    pub n_meas: usize,
    pub m_serve: usize,
    pub m_candidate: usize,
    pub k_ap_knn: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_aps: 25,
            area_side_m: 500.0,
            ap_layout: ApLayout::Grid,
            num_ues: 2700,
            tx_power_dbm: 30.0,
            pathloss_exponent: 3.67,
            pathloss_ref_db: 30.5,
            shadowing_sigma_db: 8.0,
            detection_threshold_dbm: -110.0,
            n_meas: 5,
            m_serve: 4,
            m_candidate: 8,
            k_ap_knn: 4,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn grid_side(&self) -> Option<usize> {
        let k = (self.num_aps as f64).sqrt().round() as usize;
        (k * k == self.num_aps).then_some(k)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_aps == 0 || self.num_ues == 0 || self.m_serve == 0 || self.n_meas == 0 {
            return fail("num_aps, num_ues, n_meas and m_serve must be positive".into());
        }
        if !(self.m_serve <= self.m_candidate && self.m_candidate <= self.num_aps) {
            return fail(format!(
                "need m_serve ≤ m_candidate ≤ num_aps, got {} / {} / {}",
                self.m_serve, self.m_candidate, self.num_aps
            ));
        }
        if self.n_meas > self.num_aps {
            return fail(format!("n_meas {} exceeds num_aps {}", self.n_meas, self.num_aps));
        }
        if self.k_ap_knn >= self.num_aps {
            return fail(format!(
                "k_ap_knn {} must be below num_aps {}",
                self.k_ap_knn, self.num_aps
            ));
        }
        let positive_side = self.area_side_m > 0.0;
        let valid_sigma = self.shadowing_sigma_db >= 0.0;
        // both comparisons are false for NaN
        if !positive_side || !valid_sigma {
            return fail("area_side_m must be positive and shadowing_sigma_db non-negative".into());
        }
        if !(self.tx_power_dbm.is_finite()
            && self.pathloss_exponent.is_finite()
            && self.pathloss_ref_db.is_finite()
            && self.detection_threshold_dbm.is_finite())
        {
            return fail("radio parameters must be finite".into());
        }
        if self.ap_layout == ApLayout::Grid && self.grid_side().is_none() {
            return fail(format!(
                "grid layout needs a square number of APs, got {}",
                self.num_aps
            ));
        }
        Ok(())
    }
}

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Large-scale gain in dB for a link of length `d_m` meters.
pub fn large_scale_gain(d_m: f64, config: &ScenarioConfig, shadow_db: f64) -> f64 {
    -(config.pathloss_ref_db + 10.0 * config.pathloss_exponent * d_m.max(1.0).log10()) - shadow_db
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// `gain_db[ue][ap]`.
    pub gain_db: Vec<Vec<f64>>,
    /// `rsrp_dbm[ue][ap]`.
    pub rsrp_dbm: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }
}

/// Grid APs sit at the centers of a √N × √N tiling of the area, row-major
/// from the origin corner.
pub fn ap_positions(config: &ScenarioConfig) -> Result<Vec<Point>> {
    config.validate()?;
    Ok(match config.ap_layout {
        ApLayout::Grid => {
            let k = config.grid_side().expect("validated");
            let s = config.area_side_m / k as f64;
            (0..config.num_aps)
                .map(|i| {
                    let (row, col) = (i / k, i % k);
                    [s / 2.0 + col as f64 * s, s / 2.0 + row as f64 * s]
                })
                .collect()
        }
        ApLayout::Uniform => {
            let mut rng = seed::rng_at(config.seed, &[0]);
            (0..config.num_aps)
                .map(|_| {
                    [
                        rng.gen_range(0.0..config.area_side_m),
                        rng.gen_range(0.0..config.area_side_m),
                    ]
                })
                .collect()
        }
    })
}

/// Draws UE positions and shadowing; each UE uses its own derived stream.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let aps = ap_positions(config)?;
    let normal = Normal::new(0.0, config.shadowing_sigma_db)
        .map_err(|e| Error::Config(e.to_string()))?;
    let per_ue: Vec<(Point, Vec<f64>, Vec<f64>)> = (0..config.num_ues)
        .into_par_iter()
        .map(|u| {
            let mut rng = seed::rng_at(config.seed, &[1, u as u64]);
            let pos = [
                rng.gen_range(0.0..config.area_side_m),
                rng.gen_range(0.0..config.area_side_m),
            ];
            let gains: Vec<f64> = aps
                .iter()
                .map(|&ap| {
                    let shadow = normal.sample(&mut rng);
                    large_scale_gain(distance(pos, ap), config, shadow)
                })
                .collect();
            let rsrp = gains.iter().map(|g| config.tx_power_dbm + g).collect();
            (pos, gains, rsrp)
        })
        .collect();
    let mut scenario = Scenario {
        ap_positions: aps,
        ue_positions: Vec::with_capacity(config.num_ues),
        gain_db: Vec::with_capacity(config.num_ues),
        rsrp_dbm: Vec::with_capacity(config.num_ues),
    };
    for (pos, gains, rsrp) in per_ue {
        scenario.ue_positions.push(pos);
        scenario.gain_db.push(gains);
        scenario.rsrp_dbm.push(rsrp);
    }
    Ok(scenario)
}

/// Indices of the `k` largest values, ties broken by lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    /// Measured APs, strongest first.
    pub aps: Vec<usize>,
    pub rsrp_dbm: Vec<f64>,
}

impl Measurement {
    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }
}

fn check_ue(scenario: &Scenario, ue: usize) -> Result<()> {
    if ue >= scenario.num_ues() {
        return Err(Error::IndexOutOfRange {
            op: "ue",
            index: ue,
            limit: scenario.num_ues(),
        });
    }
    Ok(())
}

/// APs heard at or above the detection threshold, keeping the `n_meas`
/// strongest. May be empty.
pub fn measure(scenario: &Scenario, ue: usize, config: &ScenarioConfig) -> Result<Measurement> {
    check_ue(scenario, ue)?;
    let row = &scenario.rsrp_dbm[ue];
    let aps: Vec<usize> = top_k(row, row.len())
        .into_iter()
        .filter(|&a| row[a] >= config.detection_threshold_dbm)
        .take(config.n_meas)
        .collect();
    let rsrp_dbm = aps.iter().map(|&a| row[a]).collect();
    Ok(Measurement { aps, rsrp_dbm })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub candidates: Vec<usize>,
    pub serving: Vec<usize>,
}

/// Candidate and serving sets: top-`m_candidate` and top-`m_serve` APs by
/// true large-scale gain.
pub fn ground_truth(scenario: &Scenario, ue: usize, config: &ScenarioConfig) -> Result<GroundTruth> {
    check_ue(scenario, ue)?;
    let ranked = top_k(&scenario.gain_db[ue], config.m_candidate);
    Ok(GroundTruth {
        serving: ranked[..config.m_serve].to_vec(),
        candidates: ranked,
    })
}
