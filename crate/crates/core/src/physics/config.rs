use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Engine and protocol parameters. Every field has a default, so a config
/// file only needs to name what it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// m/s², acting along −y.
    pub gravity: f64,
    /// kg/m³; box masses follow from volume.
    pub density: f64,
    /// Coulomb coefficient for every contact.
    pub surface_friction: f64,
    /// Torsional coefficient, m.
    pub spinning_friction: f64,
    /// s.
    pub timestep: f64,
    pub solver_iterations: u32,
    /// m.
    pub contact_slop: f64,
    /// s of free stepping before a removal starts.
    pub settle_time: f64,
    /// N per kg of box mass, per-axis standard deviation.
    pub disturbance_force_std: f64,
    /// m/s toward the shelf front.
    pub extraction_speed: f64,
    /// m the gripper raises a box before and while pulling it, so the box
    /// slides clear of whatever it rested on.
    pub extraction_lift: f64,
    /// s of observation after the extracted box leaves the shelf.
    pub monitor_time: f64,
    pub rng_seed: u64,
    /// m, thinnest depth extent the reconstruction may assign.
    pub depth_min: f64,
    /// s per executed removal in time estimates.
    pub per_pick_cost: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gravity: 9.81,
            density: 1.0,
            surface_friction: 0.75,
            spinning_friction: 0.01,
            timestep: 1.0 / 240.0,
            solver_iterations: 10,
            contact_slop: 0.002,
            settle_time: 0.5,
            disturbance_force_std: 0.02,
            extraction_speed: 0.15,
            extraction_lift: 0.004,
            monitor_time: 1.5,
            rng_seed: 0,
            depth_min: 0.05,
            // Robot execution times of 43 s for 2 picks, 88 s for 4 and
            // 75 s for 3 average to about 22.8 s per pick.
            per_pick_cost: 22.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("timestep", self.timestep),
            ("contact_slop", self.contact_slop),
            ("settle_time", self.settle_time),
            ("extraction_speed", self.extraction_speed),
            ("monitor_time", self.monitor_time),
            ("depth_min", self.depth_min),
            ("per_pick_cost", self.per_pick_cost),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        // Zero is meaningful for these: gravity-free momentum checks and
        // disturbance-free reference runs.
        let non_negative = [
            ("gravity", self.gravity),
            ("surface_friction", self.surface_friction),
            ("spinning_friction", self.spinning_friction),
            ("disturbance_force_std", self.disturbance_force_std),
            ("extraction_lift", self.extraction_lift),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.solver_iterations == 0 {
            return Err(Error::InvalidConfig("solver_iterations must be at least 1".into()));
        }
        if self.timestep > 1.0 / 120.0 {
            return Err(Error::InvalidConfig(format!(
                "timestep {} s exceeds the 1/120 s stability limit",
                self.timestep
            )));
        }
        Ok(())
    }

    /// Number of whole steps covering `duration`.
    pub fn steps_for(&self, duration: f64) -> usize {
        (duration / self.timestep - 1e-9).ceil().max(0.0) as usize
    }

    pub fn from_json(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
