//! Braking scenarios: surface layout, braking speed, steering profile, and
//! driver inputs, with a JSON file form and the built-in scenario matrix.

use crate::sim::{
    DriverProfile, FrictionTriple, SensorNoise, Side, SimState, Simulation, SteeringProfile,
    SurfaceMap, SurfaceSegment, PhysicsConfig, VehicleParams,
};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Whether a scenario matches the data-collection distribution or probes
/// generalization beyond it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioCategory {
    InDistribution,
    OutOfDistribution,
}

fn default_category() -> ScenarioCategory {
    ScenarioCategory::InDistribution
}

/// Driver inputs of a scenario file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScenarioDriver {
    #[serde(rename = "brake_force_N")]
    pub brake_force_n: f64,
    pub onset_s: f64,
}

impl Default for ScenarioDriver {
    fn default() -> Self {
        Self {
            brake_force_n: 450.0,
            onset_s: 0.5,
        }
    }
}

/// A complete braking scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub surface_segments: Vec<SurfaceSegment>,
    /// Base surface under any segment gaps.
    #[serde(default = "FrictionTriple::dry")]
    pub base_surface: FrictionTriple,
    pub braking_speed_kmh: f64,
    pub steering: SteeringProfile,
    #[serde(default)]
    pub driver: ScenarioDriver,
    #[serde(default = "default_category")]
    pub category: ScenarioCategory,
}

impl ScenarioSpec {
    /// Parses a scenario from its JSON file form.
    pub fn from_json(text: &str) -> Result<ScenarioSpec, ScenarioError> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(ScenarioError::Invalid("scenario name is empty".into()));
        }
        if !(self.braking_speed_kmh > 0.0 && self.braking_speed_kmh.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "braking_speed_kmh must be positive, got {}",
                self.braking_speed_kmh
            )));
        }
        if !self.base_surface.is_valid() {
            return Err(ScenarioError::Invalid("base surface triple invalid".into()));
        }
        for (i, seg) in self.surface_segments.iter().enumerate() {
            if !(seg.from_m < seg.to_m) {
                return Err(ScenarioError::Invalid(format!(
                    "segment {i} has empty interval [{}, {})",
                    seg.from_m, seg.to_m
                )));
            }
            if !seg.triple.is_valid() {
                return Err(ScenarioError::Invalid(format!("segment {i} triple invalid")));
            }
        }
        if !(self.driver.brake_force_n >= 0.0 && self.driver.onset_s >= 0.0) {
            return Err(ScenarioError::Invalid("driver inputs must be non-negative".into()));
        }
        Ok(())
    }

    pub fn driver_profile(&self) -> DriverProfile {
        let mut d = DriverProfile::emergency(self.driver.onset_s, self.steering);
        d.brake_force_n = self.driver.brake_force_n;
        d
    }

    pub fn surface(&self) -> SurfaceMap {
        SurfaceMap {
            base: self.base_surface,
            segments: self.surface_segments.clone(),
            wheel_scale: [1.0; 4],
        }
    }

    /// Builds a ready-to-run simulation. The seed perturbs the initial
    /// longitudinal position by up to +/- 2 m and applies +/- 1 % per-wheel
    /// friction variation so repeated runs are not identical; it also seeds
    /// the sensor-noise stream.
    pub fn build_simulation(
        &self,
        params: VehicleParams,
        physics: PhysicsConfig,
        noise: SensorNoise,
        seed: u64,
        jitter: TrialJitter,
    ) -> Simulation {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, &self.name));
        let x0 = if jitter.position {
            rng.random_range(-2.0..=2.0)
        } else {
            let _ = rng.random_range(-2.0..=2.0f64);
            0.0
        };
        let mut surface = self.surface();
        if jitter.friction {
            for s in surface.wheel_scale.iter_mut() {
                *s = rng.random_range(0.99..=1.01);
            }
        }
        Simulation::new(
            SimState::rolling(self.braking_speed_kmh, x0),
            params,
            surface,
            self.driver_profile(),
            physics,
            noise,
            rng.random(),
        )
    }
}

/// Which per-seed variations a trial applies.
#[derive(Clone, Copy, Debug)]
pub struct TrialJitter {
    pub position: bool,
    pub friction: bool,
}

impl TrialJitter {
    pub fn all() -> Self {
        Self {
            position: true,
            friction: true,
        }
    }
    pub fn none() -> Self {
        Self {
            position: false,
            friction: false,
        }
    }
}

#[derive(Debug)]
pub enum ScenarioError {
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioError::Parse(m) => write!(f, "scenario JSON parse error: {m}"),
            ScenarioError::Invalid(m) => write!(f, "invalid scenario: {m}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

fn straight() -> SteeringProfile {
    SteeringProfile::Constant { value_rad: 0.0 }
}

/// Constant steering used by the curve scenarios: 0.75 rad at the wheel is a
/// road angle of about 2.7 degrees, a 57 m radius with the default ratio.
fn curve() -> SteeringProfile {
    SteeringProfile::Constant { value_rad: 0.75 }
}

fn everywhere(side: Side, triple: FrictionTriple) -> SurfaceSegment {
    SurfaceSegment {
        from_m: -1.0e9,
        to_m: 1.0e9,
        side,
        triple,
    }
}

fn spec(
    name: &str,
    speed: f64,
    base: FrictionTriple,
    segments: Vec<SurfaceSegment>,
    steering: SteeringProfile,
    category: ScenarioCategory,
) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        surface_segments: segments,
        base_surface: base,
        braking_speed_kmh: speed,
        steering,
        driver: ScenarioDriver::default(),
        category,
    }
}

/// The three data-collection scenarios, braking from 40 km/h.
pub fn collection_scenarios() -> Vec<ScenarioSpec> {
    use ScenarioCategory::InDistribution;
    vec![
        spec(
            "high_adhesion_straight",
            40.0,
            FrictionTriple::dry(),
            vec![],
            straight(),
            InDistribution,
        ),
        spec(
            "low_adhesion_straight",
            40.0,
            FrictionTriple::wet_plastic(),
            vec![],
            straight(),
            InDistribution,
        ),
        spec(
            "split_friction_straight",
            40.0,
            FrictionTriple::dry(),
            vec![everywhere(Side::Right, FrictionTriple::wet_plastic())],
            straight(),
            InDistribution,
        ),
    ]
}

/// The seven out-of-distribution test scenarios and their braking speeds.
pub fn ood_scenarios() -> Vec<ScenarioSpec> {
    use ScenarioCategory::OutOfDistribution;
    let onset_x = |speed_kmh: f64| speed_kmh / 3.6 * ScenarioDriver::default().onset_s;
    let mut out = Vec::new();
    out.push(spec(
        "ood_high_adhesion_straight",
        100.0,
        FrictionTriple::dry(),
        vec![],
        straight(),
        OutOfDistribution,
    ));
    out.push(spec(
        "ood_low_adhesion_straight",
        55.0,
        FrictionTriple::wet_plastic(),
        vec![],
        straight(),
        OutOfDistribution,
    ));
    // Surface change a few metres past the braking point so it happens
    // mid-stop at 45 km/h.
    out.push(spec(
        "ood_high_to_low_straight",
        45.0,
        FrictionTriple::dry(),
        vec![SurfaceSegment {
            from_m: onset_x(45.0) + 4.0,
            to_m: 1.0e9,
            side: Side::Both,
            triple: FrictionTriple::wet_plastic(),
        }],
        straight(),
        OutOfDistribution,
    ));
    out.push(spec(
        "ood_low_to_high_straight",
        45.0,
        FrictionTriple::wet_plastic(),
        vec![SurfaceSegment {
            from_m: onset_x(45.0) + 10.0,
            to_m: 1.0e9,
            side: Side::Both,
            triple: FrictionTriple::dry(),
        }],
        straight(),
        OutOfDistribution,
    ));
    out.push(spec(
        "ood_split_friction_straight",
        60.0,
        FrictionTriple::dry(),
        vec![everywhere(Side::Right, FrictionTriple::wet_plastic())],
        straight(),
        OutOfDistribution,
    ));
    out.push(spec(
        "ood_high_adhesion_curve",
        30.0,
        FrictionTriple::dry(),
        vec![],
        curve(),
        OutOfDistribution,
    ));
    out.push(spec(
        "ood_split_friction_curve",
        30.0,
        FrictionTriple::dry(),
        vec![everywhere(Side::Right, FrictionTriple::wet_plastic())],
        curve(),
        OutOfDistribution,
    ));
    out
}
