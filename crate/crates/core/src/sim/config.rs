//! Scenario configuration: TOML-backed with strict field checking, plus the
//! two reference scenarios used throughout the tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint_gen::CaseParams;
use crate::ev_model::{EvInput, EvParams, EvState, RoadGeometry};
use crate::ocp::OcpWeights;
use crate::supervisor::PlannerConfig;
use crate::tv_model::{TvParams, TvState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file is not valid: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Smpcft,
    Smpc,
    Ft,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smpcft" => Ok(Mode::Smpcft),
            "smpc" => Ok(Mode::Smpc),
            "ft" => Ok(Mode::Ft),
            other => Err(format!("unknown mode '{other}', expected smpcft|smpc|ft")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub n_lanes: usize,
    pub lane_width: f64,
    pub veh_length: f64,
    pub veh_width: f64,
}

impl RoadConfig {
    pub fn geometry(&self) -> RoadGeometry {
        RoadGeometry {
            n_lanes: self.n_lanes,
            lane_width: self.lane_width,
            veh_length: self.veh_length,
            veh_width: self.veh_width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvRefConfig {
    pub d_ref: f64,
    pub phi_ref: f64,
    pub v_ref: f64,
}

/// Script trigger: a fixed step, or having passed another vehicle by a
/// longitudinal offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    AtStep { step: usize },
    WhenPassed { tv: usize, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SetTargetVx { vx: f64 },
    SetTargetLane { lane: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvScriptEvent {
    pub trigger: Trigger,
    pub action: Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvConfig {
    pub init: [f64; 4],
    #[serde(default)]
    pub script: Vec<TvScriptEvent>,
}

impl TvConfig {
    pub fn state(&self) -> TvState {
        TvState::new(self.init[0], self.init[1], self.init[2], self.init[3])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub q: [f64; 4],
    pub r: [f64; 2],
    pub s: [f64; 2],
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            q: [0.0, 0.25, 0.2, 10.0],
            r: [0.33, 5.0],
            s: [0.33, 15.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    pub du_min: [f64; 2],
    pub du_max: [f64; 2],
    pub v_max: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            u_min: [-9.0, -0.2],
            u_max: [5.0, 0.2],
            du_min: [-9.0, -0.4],
            du_max: [9.0, 0.4],
            v_max: 35.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub r_lar: f64,
    pub d_close: f64,
    pub d_close_ft_floor: f64,
    pub r_llm: f64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            r_lar: 200.0,
            d_close: 90.0,
            d_close_ft_floor: 10.0,
            r_llm: 25.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub mode: Mode,
    pub beta: f64,
    pub n_smpc: usize,
    pub n_ftp: usize,
    pub dt: f64,
    #[serde(default = "default_ds_min")]
    pub ds_min: f64,
    #[serde(default = "default_m_safe")]
    pub m_safe: f64,
    #[serde(default = "default_v_lc_min")]
    pub v_lc_min: f64,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub case: CaseConfig,
}

fn default_ds_min() -> f64 {
    22.5
}

fn default_m_safe() -> f64 {
    0.01
}

fn default_v_lc_min() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Disturbance on the true TV motion.
    pub tv_process: bool,
    /// Sensor noise on the measured TV states.
    pub sensor: bool,
    pub w_cov: [f64; 2],
    pub sens_cov: [f64; 4],
    pub sens_bounds: [f64; 4],
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            tv_process: false,
            sensor: true,
            w_cov: [0.44, 0.09],
            sens_cov: [0.25, 0.25, 0.028, 0.028],
            sens_bounds: [0.25, 0.25, 0.028, 0.028],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub road: RoadConfig,
    pub ev_init: [f64; 4],
    pub ev_ref: EvRefConfig,
    pub tvs: Vec<TvConfig>,
    pub planner: PlannerSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub n_steps: usize,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.road.n_lanes == 0 {
            return err("road.n_lanes must be at least 1");
        }
        if self.road.lane_width <= self.road.veh_width {
            return err("lane must be wider than the vehicle");
        }
        if !(self.planner.beta > 0.0 && self.planner.beta < 1.0) {
            return err("planner.beta must lie in (0, 1)");
        }
        if self.planner.dt <= 0.0 || self.planner.n_smpc == 0 || self.planner.n_ftp == 0 {
            return err("planner horizons and dt must be positive");
        }
        if self.n_steps == 0 {
            return err("n_steps must be positive");
        }
        for (i, tv) in self.tvs.iter().enumerate() {
            let mut last_step = 0usize;
            for ev in &tv.script {
                if let Trigger::AtStep { step } = ev.trigger {
                    if step < last_step {
                        return Err(ConfigError::Invalid(format!(
                            "tv {i}: at_step triggers must be nondecreasing"
                        )));
                    }
                    last_step = step;
                }
                if let Action::SetTargetLane { lane } = ev.action {
                    if lane >= self.road.n_lanes {
                        return Err(ConfigError::Invalid(format!(
                            "tv {i}: target lane {lane} is off the road"
                        )));
                    }
                }
                if let Trigger::WhenPassed { tv: other, .. } = ev.trigger {
                    if other >= self.tvs.len() {
                        return Err(ConfigError::Invalid(format!(
                            "tv {i}: when_passed references unknown tv {other}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn ev_state(&self) -> EvState {
        EvState::new(self.ev_init[0], self.ev_init[1], self.ev_init[2], self.ev_init[3])
    }

    pub fn planner_config(&self) -> PlannerConfig {
        let road = self.road.geometry();
        let b = &self.planner.bounds;
        let w = &self.planner.weights;
        let mut tv = TvParams::highway(self.planner.dt);
        tv.w_cov = nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(
            self.noise.w_cov[0],
            self.noise.w_cov[1],
        ));
        tv.sens_cov = nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::from_row_slice(
            &self.noise.sens_cov,
        ));
        tv.sens_bounds = nalgebra::Vector4::from_row_slice(&self.noise.sens_bounds);
        PlannerConfig {
            ev: EvParams {
                l_r: 2.0,
                l_f: 2.0,
                u_min: EvInput::new(b.u_min[0], b.u_min[1]),
                u_max: EvInput::new(b.u_max[0], b.u_max[1]),
                du_min: EvInput::new(b.du_min[0], b.du_min[1]),
                du_max: EvInput::new(b.du_max[0], b.du_max[1]),
                v_max: b.v_max,
                road,
            },
            tv,
            weights: OcpWeights {
                q: nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::from_row_slice(&w.q)),
                r: nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(w.r[0], w.r[1])),
                s: nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(w.s[0], w.s[1])),
            },
            case_params: CaseParams {
                r_lar: self.planner.case.r_lar,
                d_close: self.planner.case.d_close,
                d_close_ft_floor: self.planner.case.d_close_ft_floor,
                r_llm: self.planner.case.r_llm,
            },
            beta: self.planner.beta,
            n_smpc: self.planner.n_smpc,
            n_ftp: self.planner.n_ftp,
            dt: self.planner.dt,
            ds_min: self.planner.ds_min,
            m_safe: self.planner.m_safe,
            v_lc_min: self.planner.v_lc_min,
            v_ref: self.ev_ref.v_ref,
        }
    }

    fn base(tvs: Vec<TvConfig>, n_steps: usize) -> Self {
        Self {
            road: RoadConfig {
                n_lanes: 3,
                lane_width: 3.5,
                veh_length: 5.0,
                veh_width: 2.0,
            },
            ev_init: [0.0, 0.0, 0.0, 27.0],
            ev_ref: EvRefConfig {
                d_ref: 0.0,
                phi_ref: 0.0,
                v_ref: 27.0,
            },
            tvs,
            planner: PlannerSection {
                mode: Mode::Smpcft,
                beta: 0.8,
                n_smpc: 10,
                n_ftp: 10,
                dt: 0.2,
                ds_min: default_ds_min(),
                m_safe: default_m_safe(),
                v_lc_min: default_v_lc_min(),
                weights: WeightsConfig::default(),
                bounds: BoundsConfig::default(),
                case: CaseConfig::default(),
            },
            noise: NoiseSection::default(),
            n_steps,
        }
    }

    /// Five constant-velocity vehicles around the ego vehicle.
    pub fn regular() -> Self {
        let tv = |init: [f64; 4]| TvConfig {
            init,
            script: Vec::new(),
        };
        Self::base(
            vec![
                tv([70.0, 20.0, 0.0, 0.0]),
                tv([125.0, 20.0, 3.5, 0.0]),
                tv([-245.0, 20.0, 0.0, 0.0]),
                tv([-35.0, 32.0, 7.0, 0.0]),
                tv([40.0, 32.0, 7.0, 0.0]),
            ],
            125,
        )
    }

    /// Same initial states, but the left-lane leader brakes to a halt, its
    /// follower swerves through the center lane, and the right-lane leader
    /// slows down before speeding up again.
    pub fn emergency() -> Self {
        let mut cfg = Self::regular();
        cfg.n_steps = 150;
        // TV5 (index 4): emergency braking at step 20
        cfg.tvs[4].script = vec![TvScriptEvent {
            trigger: Trigger::AtStep { step: 20 },
            action: Action::SetTargetVx { vx: 0.0 },
        }];
        // TV4 (index 3): evade to the center lane, return left after passing TV5
        cfg.tvs[3].script = vec![
            TvScriptEvent {
                trigger: Trigger::AtStep { step: 24 },
                action: Action::SetTargetLane { lane: 1 },
            },
            TvScriptEvent {
                trigger: Trigger::WhenPassed { tv: 4, offset: 15.0 },
                action: Action::SetTargetLane { lane: 2 },
            },
        ];
        // TV1 (index 0): soft braking, later back to speed
        cfg.tvs[0].script = vec![
            TvScriptEvent {
                trigger: Trigger::AtStep { step: 26 },
                action: Action::SetTargetVx { vx: 10.0 },
            },
            TvScriptEvent {
                trigger: Trigger::AtStep { step: 60 },
                action: Action::SetTargetVx { vx: 20.0 },
            },
        ];
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_through_toml() {
        let cfg = ScenarioConfig::emergency();
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back.tvs.len(), 5);
        assert_eq!(back.tvs[4].script, cfg.tvs[4].script);
        assert_eq!(back.planner.mode, Mode::Smpcft);
        assert_eq!(back.n_steps, 150);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ScenarioConfig::regular().to_toml();
        text.push_str("\nbogus_key = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ScenarioConfig::regular();
        cfg.planner.beta = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::regular();
        cfg.tvs[0].script = vec![TvScriptEvent {
            trigger: Trigger::WhenPassed { tv: 99, offset: 0.0 },
            action: Action::SetTargetVx { vx: 1.0 },
        }];
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::regular();
        cfg.tvs[0].script = vec![
            TvScriptEvent {
                trigger: Trigger::AtStep { step: 10 },
                action: Action::SetTargetVx { vx: 1.0 },
            },
            TvScriptEvent {
                trigger: Trigger::AtStep { step: 5 },
                action: Action::SetTargetVx { vx: 2.0 },
            },
        ];
        assert!(cfg.validate().is_err());
    }
}
