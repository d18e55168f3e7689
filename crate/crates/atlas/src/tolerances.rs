//! Shared numeric tolerances.

use serde::{Deserialize, Serialize};

/// Every tolerance used by the pipeline, in one place.
///
/// Distances are chordal unless a field says otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Root and multiplier matching.
    pub root_eps: f64,
    /// Fixed-point and cycle residuals.
    pub fixpoint_eps: f64,
    /// Target chordal spacing of polyline points.
    pub ray_step: f64,
    /// Longest chord kept in stored graph edges (lifting still steps by `ray_step`).
    pub max_chord: f64,
    /// Per-point corrector residual for curve lifting.
    pub lift_eps: f64,
    /// Largest chordal deviation of a dropped polyline point from its chord.
    pub curve_dev: f64,
    /// Membership and conjugacy checks.
    pub membership_eps: f64,
    /// Iteration cap for orbit and basin iteration.
    pub max_iter: usize,
    /// Relative radius used to merge numerically coincident roots.
    pub cluster_eps: f64,
    /// Half-width of the indifferent band around |mu| = 1.
    pub band: f64,
    /// Angular tolerance (turns) for root-of-unity detection.
    pub angle_eps: f64,
    /// Largest root-of-unity order tested for parabolic multipliers.
    pub max_unity_order: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root_eps: 1e-9,
            fixpoint_eps: 1e-10,
            ray_step: 1e-3,
            max_chord: 2e-2,
            lift_eps: 1e-9,
            curve_dev: 1e-7,
            membership_eps: 1e-6,
            max_iter: 10_000,
            cluster_eps: 1e-4,
            band: 1e-6,
            angle_eps: 1e-8,
            max_unity_order: 64,
        }
    }
}

impl Tolerances {
    /// Overrides one field by name; used by `--eps name=value`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("tolerance {name} must be positive, got {value}"));
        }
        match name {
            "root_eps" => self.root_eps = value,
            "fixpoint_eps" => self.fixpoint_eps = value,
            "ray_step" => self.ray_step = value,
            "max_chord" => self.max_chord = value,
            "lift_eps" => self.lift_eps = value,
            "curve_dev" => self.curve_dev = value,
            "membership_eps" => self.membership_eps = value,
            "cluster_eps" => self.cluster_eps = value,
            "band" => self.band = value,
            "angle_eps" => self.angle_eps = value,
            "max_iter" => self.max_iter = value as usize,
            "max_unity_order" => self.max_unity_order = value as u32,
            _ => return Err(format!("unknown tolerance {name}")),
        }
        Ok(())
    }
}
