use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Small rooftop turbine following the raw cubic law
/// `P = ½·D·K_p·A·V³` with no rated-power cap or cut-out speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTurbineSpec {
    pub power_coefficient: f64,
    pub rotor_radius_m: f64,
    /// kg/m³.
    pub air_density: f64,
}

impl Default for WindTurbineSpec {
    fn default() -> Self {
        Self {
            power_coefficient: 0.3,
            rotor_radius_m: 2.63,
            air_density: 1.225,
        }
    }
}

impl WindTurbineSpec {
    pub fn swept_area_m2(&self) -> f64 {
        PI * self.rotor_radius_m * self.rotor_radius_m
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fields = [
            ("power_coefficient", self.power_coefficient),
            ("rotor_radius_m", self.rotor_radius_m),
            ("air_density", self.air_density),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(DataError::InvalidTurbine(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    /// Electrical power in watts at wind speed `v_ms`.
    pub fn power_w(&self, v_ms: f64) -> f64 {
        0.5 * self.air_density * self.power_coefficient * self.swept_area_m2() * v_ms.powi(3)
    }
}

/// Energy produced over one slot of `slot_hours` at constant speed `v_ms`.
pub fn wind_power_kwh(
    v_ms: f64,
    spec: &WindTurbineSpec,
    slot_hours: f64,
) -> Result<f64, DataError> {
    if !(v_ms >= 0.0 && v_ms.is_finite()) {
        return Err(DataError::NegativeWindSpeed(v_ms));
    }
    spec.validate()?;
    Ok(spec.power_w(v_ms) * slot_hours / 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_points() {
        let spec = WindTurbineSpec::default();
        assert_eq!(wind_power_kwh(0.0, &spec, 1.0).unwrap(), 0.0);
        let at_ten = wind_power_kwh(10.0, &spec, 1.0).unwrap();
        assert!((at_ten - 3.99).abs() < 0.005, "{at_ten}");
        let half_hour = wind_power_kwh(10.0, &spec, 0.5).unwrap();
        assert!((half_hour * 2.0 - at_ten).abs() < 1e-12);
    }

    #[test]
    fn swept_area_follows_radius() {
        let spec = WindTurbineSpec::default();
        assert!((spec.swept_area_m2() - 21.730_082_225_615_24).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = WindTurbineSpec::default();
        assert!(matches!(
            wind_power_kwh(-1.0, &spec, 1.0),
            Err(DataError::NegativeWindSpeed(_))
        ));
        assert!(wind_power_kwh(f64::NAN, &spec, 1.0).is_err());
        let bad = WindTurbineSpec {
            rotor_radius_m: 0.0,
            ..spec
        };
        assert!(matches!(
            wind_power_kwh(3.0, &bad, 1.0),
            Err(DataError::InvalidTurbine(_))
        ));
    }
}
