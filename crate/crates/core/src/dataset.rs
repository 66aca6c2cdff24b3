//! Episode recording, binary IO, and dataset partition construction.
//!
//! A dataset directory holds three partitions: `normal` (bug-free episodes,
//! observations only), `bugged` (random assortments of bugs with masks) and
//! `test/<kind>` (per-kind splits, each episode containing exactly one bug
//! kind, predominantly normal frames with bug-active windows). Each episode
//! directory stores `observations.bin` / `masks.bin` (raw channel-major
//! uint8 frames), `actions.bin` (one byte per step) and `meta.json`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{simulate_normal, Action, AgentConfig, AgentState, Surroundings};
use crate::bugs::{apply_bugs, splitmix64, BugController, BugError, BugKind, BugParams, FrameEffect};
use crate::config::{CameraConfig, DatasetConfig, RunConfig};
use crate::nn::FrameSet;
use crate::render::{render_pair, Frame, MaskFrame};
use crate::scene::{SceneError, World};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt file {file}: length {len} is not a multiple of the frame stride {stride}")]
    Truncated { file: String, len: u64, stride: u64 },
    #[error("schema version {found} unsupported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("metadata disagrees with files: {0}")]
    MetaMismatch(String),
    #[error("normal-partition episode {episode} has a tagged mask pixel at frame {frame}")]
    PurityViolation { episode: String, frame: usize },
    #[error(transparent)]
    Bug(#[from] BugError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("bad json in {path}: {message}")]
    Json { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Normal,
    Bugged,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub scene_hash: String,
    pub partition: Partition,
    /// Enabled bugs with fully resolved targets and parameters.
    pub enabled_bugs: Vec<ResolvedBug>,
    pub frame_count: usize,
    pub frame_dim: usize,
    pub agent: AgentConfig,
    pub camera: CameraConfig,
    /// True when the episode ended early (agent fell out of the world).
    pub terminated_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBug {
    pub kind: BugKind,
    pub target: Option<String>,
    pub params: BugParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub frames: Vec<Frame>,
    /// Absent for normal-partition episodes at rest.
    pub masks: Option<Vec<MaskFrame>>,
    pub actions: Vec<Action>,
    pub meta: EpisodeMeta,
}

/// Per-kind schedule of bug-active blocks within one episode.
#[derive(Debug, Clone)]
pub struct WindowSchedule {
    block: usize,
    active: Vec<(BugKind, Vec<bool>)>,
}

impl WindowSchedule {
    /// Collision bugs stay active for the whole episode (their anomaly is a
    /// state the agent enters); perceptual bugs activate in an exact-count
    /// random subset of blocks so bugged episodes stay predominantly normal.
    pub fn build(controller: &BugController, steps: usize, cfg: &DatasetConfig, seed: u64) -> Self {
        let n_blocks = steps.div_ceil(cfg.window_block);
        let active = controller
            .bugs
            .iter()
            .map(|spec| {
                let kind = spec.kind;
                let blocks = if matches!(kind, BugKind::GeometryClipping | BugKind::BoundaryHole) {
                    vec![true; n_blocks]
                } else {
                    let want = ((cfg.window_duty * n_blocks as f64).round() as usize)
                        .clamp(usize::from(cfg.window_duty > 0.0), n_blocks);
                    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                        seed ^ 0x57_49_4e_44 ^ (kind as u64) << 32,
                    ));
                    let mut idx: Vec<usize> = (0..n_blocks).collect();
                    for i in 0..want.min(n_blocks) {
                        let j = rng.gen_range(i..n_blocks);
                        idx.swap(i, j);
                    }
                    let mut blocks = vec![false; n_blocks];
                    for &b in &idx[..want.min(n_blocks)] {
                        blocks[b] = true;
                    }
                    blocks
                };
                (kind, blocks)
            })
            .collect();
        Self { block: cfg.window_block, active }
    }

    pub fn active_kinds(&self, step: usize) -> BTreeSet<BugKind> {
        let b = step / self.block;
        self.active
            .iter()
            .filter(|(_, blocks)| blocks.get(b).copied().unwrap_or(false))
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Runs the agent through the (possibly bugged) world and records frames,
/// masks and actions. Deterministic per (world, config, controller, seed).
pub fn generate_episode(
    world: &World,
    run: &RunConfig,
    controller: &BugController,
    partition: Partition,
    steps: usize,
    seed: u64,
) -> Result<Episode, DataError> {
    let controller = anchor_boundary_hole(world, run, controller, seed);
    let schedule = WindowSchedule::build(&controller, steps, &run.dataset, seed);

    let mut agent = AgentState::new(world.agent_start.pose(), seed);
    let mut frames: Vec<Frame> = Vec::with_capacity(steps);
    let mut masks: Vec<MaskFrame> = Vec::with_capacity(steps);
    let mut actions: Vec<Action> = Vec::with_capacity(steps);
    let mut terminated_early = false;

    let mut prev_active = BTreeSet::new();
    let mut state = apply_bugs(&controller.restricted(&prev_active), world, 0)?;

    for t in 0..steps {
        let active = schedule.active_kinds(t);
        // bug state is recomputed every frame; reuse detection only matters
        // for correctness of windows, not speed
        if active != prev_active || needs_per_frame_refresh(&active) || t == 0 {
            state = apply_bugs(&controller.restricted(&active), world, t as u64)?;
            prev_active = active;
        }

        let env = Surroundings {
            nav: &state.world.nav,
            colliders: &state.colliders,
            floor: state.world.floor,
            floor_holes: &state.floor_holes,
        };
        let action = crate::agent::step(&mut agent, &env, &run.agent);
        actions.push(action);

        let camera = run.camera.camera_at(agent.pose, run.agent.eye_height);
        let tear_source = state.effects.iter().find_map(|e| match e {
            FrameEffect::ScreenTear { lag, .. } => frames.get(t.wrapping_sub(*lag)),
            _ => None,
        });
        let (frame, mask) = render_pair(&state, &camera, tear_source);
        frames.push(frame);
        masks.push(mask);

        if agent.fell_out(world.floor_height(), &run.agent) {
            terminated_early = true;
            break;
        }
    }

    let enabled_bugs = resolve_for_meta(&controller, world)?;
    let meta = EpisodeMeta {
        schema_version: SCHEMA_VERSION,
        seed,
        scene_hash: world.scene_hash(),
        partition,
        enabled_bugs,
        frame_count: frames.len(),
        frame_dim: run.camera.width,
        agent: run.agent,
        camera: run.camera,
        terminated_early,
    };
    Ok(Episode { frames, masks: Some(masks), actions, meta })
}

/// Per-frame randomized bugs need a fresh state every frame even when the
/// active set did not change.
fn needs_per_frame_refresh(active: &BTreeSet<BugKind>) -> bool {
    active.contains(&BugKind::GeometryCorruption) || active.contains(&BugKind::ScreenTear)
}

/// A boundary hole with no explicit placement lands under the early part of
/// the agent's bug-free trajectory, so the fall actually manifests within
/// the episode instead of depending on a lucky walk.
fn anchor_boundary_hole(
    world: &World,
    run: &RunConfig,
    controller: &BugController,
    seed: u64,
) -> BugController {
    let needs_anchor = controller
        .bugs
        .iter()
        .any(|b| b.kind == BugKind::BoundaryHole && b.params.hole_center.is_none());
    if !needs_anchor {
        return controller.clone();
    }
    let prefix = simulate_normal(world, &run.agent, seed, 260);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x484f_4c45));
    let at = rng.gen_range(120..prefix.len().max(121));
    let p = prefix[at.min(prefix.len() - 1)].position;
    let mut c = controller.clone();
    for b in &mut c.bugs {
        if b.kind == BugKind::BoundaryHole {
            b.params.hole_center = Some([p.x, p.z]);
        }
    }
    c
}

fn resolve_for_meta(controller: &BugController, world: &World) -> Result<Vec<ResolvedBug>, BugError> {
    let targets = controller.resolved_targets(world)?;
    Ok(controller
        .bugs
        .iter()
        .map(|spec| ResolvedBug {
            kind: spec.kind,
            target: targets.iter().find(|(k, _)| *k == spec.kind).map(|(_, id)| id.clone()),
            params: spec.params.clone(),
        })
        .collect())
}

// --- binary episode IO ---

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    Ok(())
}

/// Writes an episode directory; returns the files written. Normal-partition
/// episodes must have all-black masks, which are verified and then dropped.
pub fn write_episode(episode: &Episode, dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let obs_path = dir.join("observations.bin");
    let mut obs = Vec::with_capacity(episode.frames.len() * crate::FRAME_LEN);
    for f in &episode.frames {
        obs.extend_from_slice(&f.data);
    }
    write_file(&obs_path, &obs)?;
    written.push(obs_path);

    if episode.meta.partition == Partition::Normal {
        if let Some(masks) = &episode.masks {
            for (i, m) in masks.iter().enumerate() {
                if m.tagged_count() != 0 {
                    return Err(DataError::PurityViolation {
                        episode: dir.display().to_string(),
                        frame: i,
                    });
                }
            }
        }
    } else if let Some(masks) = &episode.masks {
        let mask_path = dir.join("masks.bin");
        let mut buf = Vec::with_capacity(masks.len() * crate::FRAME_LEN);
        for m in masks {
            buf.extend_from_slice(&m.0.data);
        }
        write_file(&mask_path, &buf)?;
        written.push(mask_path);
    }

    let act_path = dir.join("actions.bin");
    let bytes: Vec<u8> = episode.actions.iter().map(|&a| a as u8).collect();
    write_file(&act_path, &bytes)?;
    written.push(act_path);

    let meta_path = dir.join("meta.json");
    let json = serde_json::to_string_pretty(&episode.meta).expect("meta serializes");
    write_file(&meta_path, json.as_bytes())?;
    written.push(meta_path);
    Ok(written)
}

fn read_frames_bin(path: &Path, dim: usize, expect: usize) -> Result<Vec<Frame>, DataError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let stride = 3 * dim * dim;
    if bytes.len() % stride != 0 {
        return Err(DataError::Truncated {
            file: path.display().to_string(),
            len: bytes.len() as u64,
            stride: stride as u64,
        });
    }
    let count = bytes.len() / stride;
    if count != expect {
        return Err(DataError::MetaMismatch(format!(
            "{} holds {count} frames, meta says {expect}",
            path.display()
        )));
    }
    Ok(bytes
        .chunks_exact(stride)
        .map(|c| Frame { width: dim, height: dim, data: c.to_vec() })
        .collect())
}

pub fn read_meta(dir: &Path) -> Result<EpisodeMeta, DataError> {
    let meta_path = dir.join("meta.json");
    let text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: EpisodeMeta = serde_json::from_str(&text)
        .map_err(|e| DataError::Json { path: meta_path.display().to_string(), message: e.to_string() })?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(DataError::SchemaVersion { found: meta.schema_version });
    }
    Ok(meta)
}

/// Reads a complete episode back; `read(write(e)) == e` byte-exactly (up to
/// the dropped masks of normal episodes).
pub fn read_episode(dir: &Path) -> Result<Episode, DataError> {
    let meta = read_meta(dir)?;
    let frames = read_frames_bin(&dir.join("observations.bin"), meta.frame_dim, meta.frame_count)?;
    let masks_path = dir.join("masks.bin");
    let masks = if masks_path.exists() {
        Some(
            read_frames_bin(&masks_path, meta.frame_dim, meta.frame_count)?
                .into_iter()
                .map(MaskFrame)
                .collect(),
        )
    } else {
        None
    };
    let act_path = dir.join("actions.bin");
    let act_bytes = std::fs::read(&act_path).map_err(io_err(&act_path))?;
    if act_bytes.len() != meta.frame_count {
        return Err(DataError::MetaMismatch(format!(
            "{} holds {} actions, meta says {}",
            act_path.display(),
            act_bytes.len(),
            meta.frame_count
        )));
    }
    let actions = act_bytes
        .iter()
        .map(|&b| Action::from_byte(b).ok_or(DataError::MetaMismatch(format!("bad action byte {b}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Episode { frames, masks, actions, meta })
}

// --- dataset building ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub scene_hash: String,
    pub seed: u64,
    pub normal: Vec<String>,
    pub bugged: Vec<String>,
    /// Per-kind test episode directories, keyed by the bug kind name.
    pub test: std::collections::BTreeMap<String, Vec<String>>,
    pub counts: ManifestCounts,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub normal_frames: usize,
    pub bugged_frames: usize,
    pub test_frames: std::collections::BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn load(root: &Path) -> Result<Self, DataError> {
        let path = root.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| DataError::Json { path: path.display().to_string(), message: e.to_string() })?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(DataError::SchemaVersion { found: m.schema_version });
        }
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        let path = root.join("manifest.json");
        write_file(&path, serde_json::to_string_pretty(self).expect("manifest serializes").as_bytes())
    }

    /// Checks manifest invariants against on-disk metadata: counts match,
    /// normal episodes carry no bugs, test episodes exactly one kind.
    pub fn verify(&self, root: &Path) -> Result<(), DataError> {
        let mut normal = 0usize;
        for dir in &self.normal {
            let meta = read_meta(&root.join(dir))?;
            if !meta.enabled_bugs.is_empty() {
                return Err(DataError::MetaMismatch(format!("normal episode {dir} lists bugs")));
            }
            normal += meta.frame_count;
        }
        if normal != self.counts.normal_frames {
            return Err(DataError::MetaMismatch(format!(
                "normal frames: manifest {} vs meta {normal}",
                self.counts.normal_frames
            )));
        }
        let mut bugged = 0usize;
        for dir in &self.bugged {
            let meta = read_meta(&root.join(dir))?;
            if meta.enabled_bugs.is_empty() {
                return Err(DataError::MetaMismatch(format!("bugged episode {dir} lists no bugs")));
            }
            bugged += meta.frame_count;
        }
        if bugged != self.counts.bugged_frames {
            return Err(DataError::MetaMismatch(format!(
                "bugged frames: manifest {} vs meta {bugged}",
                self.counts.bugged_frames
            )));
        }
        for (kind, dirs) in &self.test {
            let mut frames = 0usize;
            for dir in dirs {
                let meta = read_meta(&root.join(dir))?;
                if meta.enabled_bugs.len() != 1 || meta.enabled_bugs[0].kind.name() != kind {
                    return Err(DataError::MetaMismatch(format!(
                        "test episode {dir} must contain exactly the {kind} bug"
                    )));
                }
                frames += meta.frame_count;
            }
            if Some(&frames) != self.counts.test_frames.get(kind) {
                return Err(DataError::MetaMismatch(format!("test frame count mismatch for {kind}")));
            }
        }
        Ok(())
    }
}

/// Generates all partitions under `out`. Episode seeds derive from the run
/// seed plus a global episode index, so the whole tree is reproducible.
pub fn build_dataset(world: &World, run: &RunConfig, out: &Path) -> Result<DatasetManifest, DataError> {
    run.validate().map_err(DataError::MetaMismatch)?;
    let cfg = &run.dataset;
    let mut episode_counter = 0u64;
    let mut manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        scene_hash: world.scene_hash(),
        seed: run.seed,
        normal: Vec::new(),
        bugged: Vec::new(),
        test: Default::default(),
        counts: ManifestCounts::default(),
    };

    // normal partition
    let mut collected = 0usize;
    while collected < cfg.normal_frames {
        let steps = cfg.episode_steps.min(cfg.normal_frames - collected);
        let seed = run.seed.wrapping_add(episode_counter);
        episode_counter += 1;
        let controller = BugController::new(seed);
        let ep = generate_episode(world, run, &controller, Partition::Normal, steps, seed)?;
        let rel = format!("normal/ep{:04}", manifest.normal.len());
        write_episode(&ep, &out.join(&rel))?;
        collected += ep.meta.frame_count;
        manifest.normal.push(rel);
    }
    manifest.counts.normal_frames = collected;

    // bugged partition: 1..=3 kinds per episode, sampled uniformly
    let mut collected = 0usize;
    while collected < cfg.bugged_frames {
        let steps = cfg.episode_steps.min(cfg.bugged_frames - collected);
        let seed = run.seed.wrapping_add(episode_counter);
        episode_counter += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x42_55_47_53));
        let [lo, hi] = cfg.bugs_per_episode;
        let count = rng.gen_range(lo..=hi);
        let mut kinds = BugKind::ALL.to_vec();
        for i in 0..count {
            let j = rng.gen_range(i..kinds.len());
            kinds.swap(i, j);
        }
        let mut controller = BugController::new(seed);
        for &kind in &kinds[..count] {
            controller = controller.enable(world, kind, None, BugParams::default())?;
        }
        let ep = generate_episode(world, run, &controller, Partition::Bugged, steps, seed)?;
        let rel = format!("bugged/ep{:04}", manifest.bugged.len());
        write_episode(&ep, &out.join(&rel))?;
        collected += ep.meta.frame_count;
        manifest.bugged.push(rel);
    }
    manifest.counts.bugged_frames = collected;

    // test partition: one split per kind, exactly one bug each
    for kind in BugKind::ALL {
        let mut dirs = Vec::new();
        let mut collected = 0usize;
        while collected < cfg.test_frames_per_kind {
            let steps = cfg.episode_steps.min(cfg.test_frames_per_kind - collected);
            let seed = run.seed.wrapping_add(episode_counter);
            episode_counter += 1;
            let controller =
                BugController::new(seed).enable(world, kind, None, BugParams::default())?;
            let ep = generate_episode(world, run, &controller, Partition::Test, steps, seed)?;
            let rel = format!("test/{}/ep{:04}", kind.name(), dirs.len());
            write_episode(&ep, &out.join(&rel))?;
            collected += ep.meta.frame_count;
            dirs.push(rel);
        }
        manifest.counts.test_frames.insert(kind.name().to_string(), collected);
        manifest.test.insert(kind.name().to_string(), dirs);
    }

    manifest.save(out)?;
    Ok(manifest)
}

/// Loads every normal-partition observation into memory for training.
pub fn load_normal_frames(root: &Path, manifest: &DatasetManifest) -> Result<FrameSet, DataError> {
    let mut set: Option<FrameSet> = None;
    for dir in &manifest.normal {
        let meta = read_meta(&root.join(dir))?;
        let frames = read_frames_bin(&root.join(dir).join("observations.bin"), meta.frame_dim, meta.frame_count)?;
        let fs = set.get_or_insert_with(|| FrameSet::new(meta.frame_dim));
        for f in frames {
            fs.push(&f.data);
        }
    }
    set.ok_or(DataError::MetaMismatch("manifest has no normal episodes".into()))
}
