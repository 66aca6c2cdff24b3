//! Run configuration shared by the CLI and the dataset/train/eval pipeline.
//! Every run persists its resolved configuration next to its outputs so any
//! artifact can be reproduced from the file alone.

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::eval::EvalConfig;
use crate::nn::TrainConfig;
use crate::render::Camera;
use crate::scene::Pose;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub vertical_fov_deg: Scalar,
    pub near: Scalar,
    pub far: Scalar,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { vertical_fov_deg: 60.0, near: 0.1, far: 100.0, width: crate::FRAME_DIM, height: crate::FRAME_DIM }
    }
}

impl CameraConfig {
    pub fn camera_at(&self, pose: Pose, eye_height: Scalar) -> Camera {
        let mut cam = Camera::at_agent(pose, eye_height);
        cam.vertical_fov = self.vertical_fov_deg.to_radians();
        cam.near = self.near;
        cam.far = self.far;
        cam.width = self.width;
        cam.height = self.height;
        cam
    }

    pub fn validate(&self) -> Result<(), String> {
        self.camera_at(Pose::new(crate::Vec3f::zero(), 0.0), 0.0).validate()
    }
}

/// Partition sizes and episode scheduling for dataset generation. Defaults
/// are the desk scale (1/60th of the full-size layout of 300k normal, 300k
/// bugged and ~50k test frames per bug kind, with test rounded to 1000).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub episode_steps: usize,
    pub normal_frames: usize,
    pub bugged_frames: usize,
    pub test_frames_per_kind: usize,
    /// Bug activation happens in blocks of this many steps.
    pub window_block: usize,
    /// Fraction of blocks with bugs active in bugged/test episodes.
    pub window_duty: f64,
    /// Bugged-partition episodes carry between this many kinds (inclusive).
    pub bugs_per_episode: [usize; 2],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            episode_steps: 5000,
            normal_frames: 5000,
            bugged_frames: 5000,
            test_frames_per_kind: 1000,
            window_block: 100,
            window_duty: 0.2,
            bugs_per_episode: [1, 3],
        }
    }
}

impl DatasetConfig {
    /// Full-size partition counts scaled by `scale` (1.0 = the complete
    /// 300k/300k/50k-per-kind layout).
    pub fn scaled(scale: f64) -> Self {
        let s = |full: usize| ((full as f64 * scale).ceil() as usize).max(1);
        Self {
            normal_frames: s(300_000),
            bugged_frames: s(300_000),
            test_frames_per_kind: s(50_000),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.episode_steps == 0 || self.window_block == 0 {
            return Err("episode_steps and window_block must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.window_duty) {
            return Err(format!("window_duty must be in [0, 1], got {}", self.window_duty));
        }
        let [lo, hi] = self.bugs_per_episode;
        if lo == 0 || lo > hi || hi > 10 {
            return Err(format!("bugs_per_episode range invalid: [{lo}, {hi}]"));
        }
        Ok(())
    }

    /// Rough on-disk estimate (observations plus masks where stored).
    pub fn disk_estimate_bytes(&self) -> u64 {
        let frame = crate::FRAME_LEN as u64;
        let obs_only = self.normal_frames as u64 * frame;
        let with_masks =
            (self.bugged_frames as u64 + 10 * self.test_frames_per_kind as u64) * frame * 2;
        obs_only + with_masks
    }
}

/// The complete resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    /// Scene file path; the bundled default scene when absent.
    pub scene: Option<String>,
    pub seed: u64,
    pub agent: AgentConfig,
    pub camera: CameraConfig,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.camera.validate()?;
        self.dataset.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.agent.dt <= 0.0 || self.agent.speed <= 0.0 {
            return Err("agent dt and speed must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.agent.epsilon) {
            return Err(format!("agent epsilon must be in [0, 1], got {}", self.agent.epsilon));
        }
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let json = cfg.to_pretty_json();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn scaled_counts() {
        let full = DatasetConfig::scaled(1.0);
        assert_eq!(full.normal_frames, 300_000);
        assert_eq!(full.test_frames_per_kind, 50_000);
        let desk = DatasetConfig::default();
        assert_eq!(desk.normal_frames, 5_000);
        assert_eq!(desk.test_frames_per_kind, 1_000);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.dataset.window_duty = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg2 = RunConfig::default();
        cfg2.train.mse_weight = 0.3;
        assert!(cfg2.validate().is_err());
    }
}
