//! Converts capacity, head and operating hours into the storage target and
//! design flow of the upper reservoir.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Density of water, kg/m³.
pub const WATER_DENSITY: f64 = 1000.0;
/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
/// Overall plant efficiency that reproduces the published storage targets
/// (volume x head is ~826 hm³·m for every 500 MW / 3 h case).
pub const DEFAULT_EFFICIENCY: f64 = 0.667;

/// Engineering requirement for one siting run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitingSpec<T> {
    /// Installed capacity, MW.
    pub power_mw: T,
    /// Upper water level minus lower water level, m. Drives flow and E&M cost.
    pub head: T,
    /// Absolute upper water level, m above datum. Compared against cell
    /// elevations in the volume and embankment terms.
    pub water_elevation: T,
    /// Hours of full-power operation.
    pub operation_h: T,
    pub efficiency: T,
    /// ρ·g·η, W·s/m⁴.
    pub k: T,
    /// Storage target, m³.
    pub vol_min: T,
    /// Design flow, m³/s.
    pub flow: T,
}

impl<T: Scalar> SitingSpec<T> {
    pub fn new(power_mw: T, head: T, operation_h: T, efficiency: T, lower_elevation: T) -> Result<Self> {
        let vol_min = required_volume(power_mw, head, operation_h, efficiency)?;
        let flow = design_flow(vol_min, operation_h)?;
        Ok(SitingSpec {
            power_mw,
            head,
            water_elevation: lower_elevation + head,
            operation_h,
            efficiency,
            k: T::lit(WATER_DENSITY * GRAVITY) * efficiency,
            vol_min,
            flow,
        })
    }

    /// Same plant with the storage target replaced and the design flow
    /// recomputed from it.
    pub fn with_storage(mut self, vol_min: T) -> Result<Self> {
        positive("vol_min", vol_min)?;
        self.flow = design_flow(vol_min, self.operation_h)?;
        self.vol_min = vol_min;
        Ok(self)
    }

    /// Stored energy at the target volume, MWh.
    pub fn energy_mwh(&self) -> T {
        self.power_mw * self.operation_h
    }
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// Storage needed to run `power_mw` for `operation_h` hours at `head` meters:
/// `P·Δt / (ρ·g·η·head)` in SI units.
pub fn required_volume<T: Scalar>(power_mw: T, head: T, operation_h: T, efficiency: T) -> Result<T> {
    positive("power_mw", power_mw)?;
    positive("head", head)?;
    positive("operation_h", operation_h)?;
    positive("efficiency", efficiency)?;
    if efficiency > T::one() {
        return Err(Error::param("efficiency", format!("must not exceed 1, got {efficiency}")));
    }
    let energy_j = power_mw * T::lit(1e6) * operation_h * T::lit(3600.0);
    Ok(energy_j / (T::lit(WATER_DENSITY * GRAVITY) * efficiency * head))
}

/// Flow that drains `vol_min` in `operation_h` hours, m³/s.
pub fn design_flow<T: Scalar>(vol_min: T, operation_h: T) -> Result<T> {
    positive("vol_min", vol_min)?;
    positive("operation_h", operation_h)?;
    Ok(vol_min / (operation_h * T::lit(3600.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn storage_targets() {
        let hm3 = |h: f64, dt: f64| required_volume(500.0, h, dt, DEFAULT_EFFICIENCY).unwrap() / 1e6;
        assert_relative_eq!(hm3(150.0, 3.0), 5.50, max_relative = 0.01);
        assert_relative_eq!(hm3(200.0, 3.0), 4.13, max_relative = 0.01);
        assert_relative_eq!(hm3(150.0, 12.0), 22.02, max_relative = 0.01);
    }

    #[test]
    fn flow_examples() {
        assert_relative_eq!(design_flow(5.50e6, 3.0).unwrap(), 509.259, epsilon = 1e-3);
        assert_relative_eq!(design_flow(11.0e6, 6.0).unwrap(), 509.259, epsilon = 1e-3);
        assert_relative_eq!(design_flow(1.0e6, 1.0).unwrap(), 277.778, epsilon = 1e-3);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(required_volume(0.0, 150.0, 3.0, 0.667).is_err());
        assert!(required_volume(500.0, -1.0, 3.0, 0.667).is_err());
        assert!(required_volume(500.0, 150.0, 3.0, 1.2).is_err());
        assert!(design_flow(1.0, 0.0).is_err());
        assert!(SitingSpec::new(500.0, 150.0, 0.0, 0.667, 385.0).is_err());
    }

    #[test]
    fn spec_fields() {
        let s = SitingSpec::new(500.0f32, 150.0, 3.0, 0.667, 385.0).unwrap();
        assert_eq!(s.water_elevation, 535.0);
        assert_eq!(s.energy_mwh(), 1500.0);
    }

    proptest! {
        #[test]
        fn homogeneity_and_flow_identity(p in 1.0f64..2000.0, h in 10.0f64..800.0, dt in 0.5f64..48.0, eta in 0.3f64..1.0) {
            let v = required_volume(p, h, dt, eta).unwrap();
            assert_relative_eq!(required_volume(p, h, 2.0 * dt, eta).unwrap(), 2.0 * v, max_relative = 1e-12);
            assert_relative_eq!(required_volume(p, 2.0 * h, dt, eta).unwrap(), v / 2.0, max_relative = 1e-12);
            // Energy balance: V·head·k = P·Δt.
            let k = WATER_DENSITY * GRAVITY * eta;
            assert_relative_eq!(v * h * k, p * 1e6 * dt * 3600.0, max_relative = 1e-12);
            // Both flow definitions agree: V/Δt = P/(k·head).
            assert_relative_eq!(design_flow(v, dt).unwrap(), p * 1e6 / (k * h), max_relative = 1e-12);
        }
    }
}
