//! `key = value` scene specifications for the synthetic generator.
//!
//! Scene keys: `seed`, `n_frames`, `height`, `width`, `surface`, `trajectory`,
//! `metric_scale`. Optional corruption keys: `noise_sigma`, `outlier_fraction`,
//! `outlier_magnitude`, `jitter_rotation_deg`, `jitter_translation`,
//! `gauge_scale`, `gauge_axis` (`x,y,z`), `gauge_angle_deg`, `gauge_translation`
//! (`x,y,z`). Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, Sim3};
use crate::synth::{Corruption, Jitter, SceneSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub scene: SceneSpec,
    /// Present when any corruption key is given.
    pub corruption: Option<Corruption>,
}

const SCENE_KEYS: [&str; 7] = ["seed", "n_frames", "height", "width", "surface", "trajectory", "metric_scale"];
const CORRUPTION_KEYS: [&str; 9] = [
    "noise_sigma",
    "outlier_fraction",
    "outlier_magnitude",
    "jitter_rotation_deg",
    "jitter_translation",
    "gauge_scale",
    "gauge_axis",
    "gauge_angle_deg",
    "gauge_translation",
];

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Format(format!("bad value for {key}: {v:?}"))),
    }
}

fn vector(map: &BTreeMap<String, String>, key: &str, default: Vector3<f64>) -> Result<Vector3<f64>> {
    let Some(v) = map.get(key) else { return Ok(default) };
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("bad vector for {key}: {v:?}")))?;
    if parts.len() != 3 {
        return Err(Error::Format(format!("{key} needs 3 components")));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

pub fn parse_synth_config(text: &str) -> Result<SynthConfig> {
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) =
            body.split_once('=').ok_or_else(|| Error::Format(format!("line {}: expected key = value", ln + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !SCENE_KEYS.contains(&k) && !CORRUPTION_KEYS.contains(&k) {
            return Err(Error::Format(format!("line {}: unknown key {k:?}", ln + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Format(format!("line {}: duplicate key {k:?}", ln + 1)));
        }
    }
    let d = SceneSpec::default();
    let scene = SceneSpec {
        seed: value(&map, "seed", d.seed)?,
        n_frames: value(&map, "n_frames", d.n_frames)?,
        height: value(&map, "height", d.height)?,
        width: value(&map, "width", d.width)?,
        surface: value(&map, "surface", d.surface)?,
        trajectory: value(&map, "trajectory", d.trajectory)?,
        metric_scale: value(&map, "metric_scale", d.metric_scale)?,
    };
    scene.validate().map_err(|e| Error::Format(e.to_string()))?;

    let corruption = if CORRUPTION_KEYS.iter().any(|k| map.contains_key(*k)) {
        let c0 = Corruption::default();
        let jitter = if map.contains_key("jitter_rotation_deg") || map.contains_key("jitter_translation") {
            Some(Jitter {
                rotation_rad: value(&map, "jitter_rotation_deg", 0.0f64)?.to_radians(),
                translation: value(&map, "jitter_translation", 0.0)?,
            })
        } else {
            None
        };
        let gauge_keys = ["gauge_scale", "gauge_axis", "gauge_angle_deg", "gauge_translation"];
        let global_sim3 = if gauge_keys.iter().any(|k| map.contains_key(*k)) {
            let scale: f64 = value(&map, "gauge_scale", 1.0)?;
            if !(scale > 0.0) {
                return Err(Error::Format("gauge_scale must be positive".into()));
            }
            let axis = vector(&map, "gauge_axis", Vector3::z())?;
            if axis.norm() == 0.0 {
                return Err(Error::Format("gauge_axis must be non-zero".into()));
            }
            let angle = value(&map, "gauge_angle_deg", 0.0f64)?.to_radians();
            let t = vector(&map, "gauge_translation", Vector3::zeros())?;
            Some(Sim3::new(scale, axis_angle(&axis.normalize(), angle), t))
        } else {
            None
        };
        Some(Corruption {
            gaussian_sigma: value(&map, "noise_sigma", c0.gaussian_sigma)?,
            outlier_fraction: value(&map, "outlier_fraction", c0.outlier_fraction)?,
            outlier_magnitude: value(&map, "outlier_magnitude", c0.outlier_magnitude)?,
            global_sim3,
            per_frame_jitter: jitter,
        })
    } else {
        None
    };
    Ok(SynthConfig { scene, corruption })
}
