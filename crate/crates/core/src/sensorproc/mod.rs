//! Processing layer: significance gating of raw readings, the built-in
//! sensor-check functions, and the plugin registry that turns gated readings
//! into processed values for the behavior layer.

mod plugin;

pub use plugin::{ParamValue, PluginError, PluginInstance, PluginKind, REGISTRY_KEYS};

use serde::{Deserialize, Serialize};

/// A raw sample taken from one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub sensor: String,
    pub t_us: u64,
    pub value: f64,
}

impl Reading {
    pub fn new(sensor: impl Into<String>, t_us: u64, value: f64) -> Self {
        Self {
            sensor: sensor.into(),
            t_us,
            value,
        }
    }
}

/// Output of a processing plugin, addressed to a processing-layer topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedValue {
    pub topic: String,
    pub t_us: u64,
    pub value: f64,
    /// Bus sequence number of the gated sensor message this value came from.
    pub source_seq: u64,
}

/// Decides whether a raw reading is significant enough to leave the sensor
/// layer.
///
/// `prev` is the last value that passed the gate for this sensor. The first
/// reading always passes. With `delta > 0` the absolute change must reach
/// `delta`; with `delta == 0` any change passes and repeats are suppressed.
pub fn gate_significant(prev: Option<f64>, curr: f64, delta: f64) -> bool {
    debug_assert!(delta >= 0.0, "negative significance threshold");
    match prev {
        None => true,
        Some(prev) if delta > 0.0 => (curr - prev).abs() >= delta,
        Some(prev) => curr != prev,
    }
}

/// Quantizes a raw reading into a level: the number of thresholds `<= raw`.
pub fn touch_level(raw: f64, thresholds: &[f64]) -> usize {
    debug_assert!(
        thresholds.windows(2).all(|w| w[0] < w[1]),
        "thresholds must be strictly ascending"
    );
    // thresholds are sorted, so the count is a partition point
    thresholds.partition_point(|&t| t <= raw)
}

/// Magnitude of the change in slope across the last three readings, with
/// time measured in seconds. Returns 0 with fewer than three readings.
pub fn jerk_level(history: &[Reading]) -> f64 {
    if history.len() < 3 {
        return 0.0;
    }
    let [r0, r1, r2] = &history[history.len() - 3..] else {
        unreachable!()
    };
    let dt1 = (r1.t_us as f64 - r0.t_us as f64) / 1e6;
    let dt2 = (r2.t_us as f64 - r1.t_us as f64) / 1e6;
    if dt1 <= 0.0 || dt2 <= 0.0 {
        return 0.0;
    }
    let slope1 = (r1.value - r0.value) / dt1;
    let slope2 = (r2.value - r1.value) / dt2;
    (slope2 - slope1).abs()
}
