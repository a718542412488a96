//! Construction and equipment cost model: embankment, water conveyance and
//! electromechanical equipment.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Unit costs and design assumptions. Defaults: earth-fill embankment with a
/// 10 m crest and 2:1 faces at $5/m³, a tunnel excavated at $40/m³ sized for
/// 4 m/s, steel lining (2.5 $/kg, 7840 kg/m³, 20 mm, 6 m/s) on a third of
/// its length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams<T> {
    pub embankment_unit: T,
    pub crest_width: T,
    pub slope_hv: T,
    pub excavation_unit: T,
    pub excavation_velocity: T,
    pub lining_velocity: T,
    pub steel_unit: T,
    pub steel_density: T,
    pub lining_thickness: T,
    pub lined_fraction: T,
    pub em_a: T,
    pub em_b: T,
}

impl<T: Scalar> Default for CostParams<T> {
    fn default() -> Self {
        CostParams {
            embankment_unit: T::lit(5.0),
            crest_width: T::lit(10.0),
            slope_hv: T::lit(2.0),
            excavation_unit: T::lit(40.0),
            excavation_velocity: T::lit(4.0),
            lining_velocity: T::lit(6.0),
            steel_unit: T::lit(2.5),
            steel_density: T::lit(7840.0),
            lining_thickness: T::lit(0.020),
            lined_fraction: T::lit(1.0 / 3.0),
            em_a: T::lit(3068.0),
            em_b: T::lit(8608.0),
        }
    }
}

impl<T: Scalar> CostParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, T); 12] = [
            ("embankment_unit", self.embankment_unit),
            ("crest_width", self.crest_width),
            ("slope_hv", self.slope_hv),
            ("excavation_unit", self.excavation_unit),
            ("excavation_velocity", self.excavation_velocity),
            ("lining_velocity", self.lining_velocity),
            ("steel_unit", self.steel_unit),
            ("steel_density", self.steel_density),
            ("lining_thickness", self.lining_thickness),
            ("lined_fraction", self.lined_fraction),
            ("em_a", self.em_a),
            ("em_b", self.em_b),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Excavation cost per (m³/s · m): `excavation_unit / excavation_velocity`.
    pub fn excavation_coefficient(&self) -> T {
        self.excavation_unit / self.excavation_velocity
    }

    /// Lining cost per (√(m³/s) · m). With a tunnel diameter of
    /// `√(4Q / (π·v))` the steel shell costs
    /// `steel_unit · density · thickness · π · D · L · lined_fraction`.
    pub fn lining_coefficient(&self) -> T {
        let pi = T::PI();
        self.steel_unit
            * self.steel_density
            * self.lining_thickness
            * pi
            * (T::lit(4.0) / (pi * self.lining_velocity)).sqrt()
            * self.lined_fraction
    }

    /// Trapezoid cross-section area (m²) for an embankment `height` meters tall.
    pub fn embankment_section(&self, height: T) -> T {
        if height > T::zero() {
            self.crest_width * height + self.slope_hv * height * height
        } else {
            T::zero()
        }
    }
}

/// Embankment over one perimeter cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbankmentCell<T> {
    /// Fill volume, m³.
    pub volume: T,
    /// Cost, $.
    pub cost: T,
}

/// Embankment needed where the ground at `ground_elevation` sits below the
/// water level `water_elevation`; zero otherwise.
pub fn embankment_cell_cost<T: Scalar>(
    cell_length: T,
    water_elevation: T,
    ground_elevation: T,
    params: &CostParams<T>,
) -> EmbankmentCell<T> {
    let volume = cell_length * params.embankment_section(water_elevation - ground_elevation);
    EmbankmentCell {
        volume,
        cost: volume * params.embankment_unit,
    }
}

/// Cost of a known embankment fill volume, $.
pub fn embankment_cost_from_volume<T: Scalar>(volume_m3: T, params: &CostParams<T>) -> T {
    volume_m3 * params.embankment_unit
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConveyanceCost<T> {
    pub excavation: T,
    pub lining: T,
}

impl<T: Scalar> ConveyanceCost<T> {
    pub fn total(&self) -> T {
        self.excavation + self.lining
    }
}

/// Tunnel cost for design flow `flow` (m³/s) over `length` meters.
pub fn conveyance_cost<T: Scalar>(flow: T, length: T, params: &CostParams<T>) -> Result<ConveyanceCost<T>> {
    if !(flow > T::zero()) {
        return Err(Error::param("flow", format!("must be positive, got {flow}")));
    }
    if !(length >= T::zero()) {
        return Err(Error::param("length", format!("must be non-negative, got {length}")));
    }
    Ok(ConveyanceCost {
        excavation: params.excavation_coefficient() * flow * length,
        lining: params.lining_coefficient() * flow.sqrt() * length,
    })
}

/// Total electromechanical equipment cost, $.
///
/// The unit cost `em_a/√head + em_b/P` is in $/kW, so the total for `P` MW is
/// that figure times `1000·P`.
pub fn equipment_cost<T: Scalar>(head: T, power_mw: T, params: &CostParams<T>) -> Result<T> {
    if !(head > T::zero()) {
        return Err(Error::param("head", format!("must be positive, got {head}")));
    }
    if !(power_mw > T::zero()) {
        return Err(Error::param("power_mw", format!("must be positive, got {power_mw}")));
    }
    Ok(equipment_unit_cost(head, power_mw, params) * power_mw * T::lit(1000.0))
}

/// Equipment cost per kW installed.
pub fn equipment_unit_cost<T: Scalar>(head: T, power_mw: T, params: &CostParams<T>) -> T {
    params.em_a / head.sqrt() + params.em_b / power_mw
}

/// Cost components of one reservoir, $.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown<T> {
    pub embankment: T,
    pub conveyance_excavation: T,
    pub conveyance_lining: T,
    pub equipment: T,
    pub total: T,
}

impl<T: Scalar> CostBreakdown<T> {
    pub fn new(embankment: T, conveyance: ConveyanceCost<T>, equipment: T) -> Self {
        CostBreakdown {
            embankment,
            conveyance_excavation: conveyance.excavation,
            conveyance_lining: conveyance.lining,
            equipment,
            total: embankment + conveyance.excavation + conveyance.lining + equipment,
        }
    }

    pub fn conveyance(&self) -> T {
        self.conveyance_excavation + self.conveyance_lining
    }
}
