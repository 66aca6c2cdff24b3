//! Ground-truth labeling via the pixel threshold, precision sweeps, ranked
//! bug reports, and the per-kind evaluation harness.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_episode, DataError, DatasetManifest};
use crate::geom::Rgb;
use crate::nn::Autoencoder;
use crate::ppm::{contact_sheet, line_plot, write_p6, Image};
use crate::render::{Frame, MaskFrame};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("test episode {0} has no masks")]
    MissingMasks(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid eval config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Pixel-count thresholds: a frame is labeled bugged when its mask has
    /// strictly more tagged pixels than tau.
    pub taus: Vec<usize>,
    /// Ranks for precision@k.
    pub top_k: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { taus: vec![1, 10, 50, 200], top_k: vec![10, 50, 100] }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.taus.is_empty() {
            return Err("at least one tau is required".into());
        }
        if self.taus.iter().any(|&t| t < 1) {
            return Err("taus must be >= 1".into());
        }
        if self.taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err("taus must be strictly increasing".into());
        }
        Ok(())
    }
}

/// A frame is labeled bugged when the mask contains strictly more than
/// `tau` tagged (non-black) pixels.
pub fn label_frame(mask: &MaskFrame, tau: usize) -> bool {
    mask.tagged_count() > tau
}

/// Anything that can assign an anomaly score to a frame. The trained model
/// ignores the mask; the label-pipeline oracle scores by the mask itself.
pub trait FrameScorer: Sync {
    fn score(&self, frame: &Frame, mask: &MaskFrame) -> f64;
    fn name(&self) -> &str;
}

/// Squared-L2 reconstruction error of the trained model.
pub struct ModelScorer<'a>(pub &'a Autoencoder<f32>);

impl FrameScorer for ModelScorer<'_> {
    fn score(&self, frame: &Frame, _mask: &MaskFrame) -> f64 {
        let x: Vec<f32> = frame.data.iter().map(|&b| b as f32 / 255.0).collect();
        self.0.score(&x) as f64
    }

    fn name(&self) -> &str {
        "model"
    }
}

/// Oracle scorer: the true tagged-pixel count. Precision of this scorer is
/// 1.0 at every tau and decision threshold by construction, which makes it
/// an end-to-end self-check of the label pipeline.
pub struct TaggedPixelScorer;

impl FrameScorer for TaggedPixelScorer {
    fn score(&self, _frame: &Frame, mask: &MaskFrame) -> f64 {
        mask.tagged_count() as f64
    }

    fn name(&self) -> &str {
        "tagged_pixel_oracle"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Operating point: frames scoring at or above this value are flagged.
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `tp / (tp + fp)`; `None` when nothing is flagged.
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrecisionCurve {
    /// One point per unique positive score, descending; empty when the
    /// split has no positive labels at this tau (marked undefined).
    pub points: Vec<CurvePoint>,
    pub undefined: bool,
    /// (k, precision among the top-k ranked frames).
    pub precision_at_k: Vec<(usize, Option<f64>)>,
}

/// Sweeps decision thresholds over the unique scores of positive-labeled
/// frames (descending) and computes precision at each; also precision@k for
/// the configured ranks. Ties in the ranking break by input order, which
/// callers keep as (episode, frame) ascending.
pub fn precision_curve(scores: &[f64], labels: &[bool], cfg: &EvalConfig) -> PrecisionCurve {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let mut curve = PrecisionCurve::default();

    // ranking for precision@k: stable sort keeps input order on ties
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    for &k in &cfg.top_k {
        if scores.is_empty() {
            curve.precision_at_k.push((k, None));
            continue;
        }
        let kk = k.min(order.len());
        let tp = order[..kk].iter().filter(|&&i| labels[i]).count();
        curve.precision_at_k.push((k, Some(tp as f64 / kk as f64)));
    }

    let mut pos_scores: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    if pos_scores.is_empty() {
        curve.undefined = true;
        return curve;
    }
    pos_scores.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    pos_scores.dedup();

    let total_pos = labels.iter().filter(|&&l| l).count();
    for &t in &pos_scores {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&s, &l) in scores.iter().zip(labels) {
            if s >= t {
                if l {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let precision = if tp + fp > 0 { Some(tp as f64 / (tp + fp) as f64) } else { None };
        curve.points.push(CurvePoint { threshold: t, tp, fp, fn_: total_pos - tp, precision });
    }
    curve
}

/// One scored frame of a test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFrame {
    pub episode: String,
    pub frame: usize,
    pub score: f64,
    pub tagged_pixels: usize,
}

/// Everything measured for one bug kind.
#[derive(Debug, Clone, Default)]
pub struct KindReport {
    pub kind: String,
    pub frames: Vec<ScoredFrame>,
    /// tau -> curve.
    pub curves: BTreeMap<usize, PrecisionCurve>,
    /// Per-episode (episode, frames, positives at the smallest tau).
    pub episodes: Vec<(String, usize, usize)>,
}

impl KindReport {
    pub fn labels(&self, tau: usize) -> Vec<bool> {
        self.frames.iter().map(|f| f.tagged_pixels > tau).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.score).collect()
    }

    /// Mean score over frames labeled positive at `tau`.
    pub fn mean_positive_score(&self, tau: usize) -> Option<f64> {
        let pos: Vec<f64> =
            self.frames.iter().filter(|f| f.tagged_pixels > tau).map(|f| f.score).collect();
        if pos.is_empty() {
            None
        } else {
            Some(pos.iter().sum::<f64>() / pos.len() as f64)
        }
    }

    /// Percentile (0..=100) of scores over frames labeled negative at `tau`.
    pub fn negative_score_percentile(&self, tau: usize, pct: f64) -> Option<f64> {
        let mut neg: Vec<f64> =
            self.frames.iter().filter(|f| f.tagged_pixels <= tau).map(|f| f.score).collect();
        if neg.is_empty() {
            return None;
        }
        neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((pct / 100.0) * (neg.len() - 1) as f64).round() as usize;
        Some(neg[idx.min(neg.len() - 1)])
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub scorer: String,
    pub kinds: BTreeMap<String, KindReport>,
}

/// Streams every frame of a kind's test split through the scorer in
/// (episode, frame) order.
pub fn score_split(
    root: &Path,
    manifest: &DatasetManifest,
    kind: &str,
    scorer: &dyn FrameScorer,
) -> Result<KindReport, EvalError> {
    let dirs = manifest
        .test
        .get(kind)
        .ok_or_else(|| EvalError::Config(format!("manifest has no test split for {kind}")))?;
    let mut report = KindReport { kind: kind.to_string(), ..KindReport::default() };
    for dir in dirs {
        let ep = read_episode(&root.join(dir))?;
        let masks = ep.masks.as_ref().ok_or_else(|| EvalError::MissingMasks(dir.clone()))?;
        let mut positives = 0usize;
        for (i, (frame, mask)) in ep.frames.iter().zip(masks).enumerate() {
            let tagged = mask.tagged_count();
            if tagged > 0 {
                positives += 1;
            }
            report.frames.push(ScoredFrame {
                episode: dir.clone(),
                frame: i,
                score: scorer.score(frame, mask),
                tagged_pixels: tagged,
            });
        }
        report.episodes.push((dir.clone(), ep.frames.len(), positives));
    }
    Ok(report)
}

/// Evaluates a scorer over every test split and writes the report files
/// (per-kind CSV curves, precision@k, per-episode summaries, PPM plots).
pub fn evaluate(
    root: &Path,
    manifest: &DatasetManifest,
    scorer: &dyn FrameScorer,
    cfg: &EvalConfig,
    out: &Path,
) -> Result<EvalReport, EvalError> {
    cfg.validate().map_err(EvalError::Config)?;
    std::fs::create_dir_all(out).map_err(|e| EvalError::Io { path: out.display().to_string(), source: e })?;
    let mut report = EvalReport { scorer: scorer.name().to_string(), kinds: BTreeMap::new() };

    let mut summary = String::from("bug_kind,tau,threshold,tp,fp,fn,precision\n");
    let mut at_k_csv = String::from("bug_kind,tau,k,precision\n");
    let mut per_episode = String::from("bug_kind,episode,frames,frames_with_tags\n");

    for (kind, _) in manifest.test.iter() {
        let mut kr = score_split(root, manifest, kind, scorer)?;
        let scores = kr.scores();
        let mut plot_series = Vec::new();
        for (ti, &tau) in cfg.taus.iter().enumerate() {
            let labels = kr.labels(tau);
            let curve = precision_curve(&scores, &labels, cfg);
            for p in &curve.points {
                summary.push_str(&format!(
                    "{kind},{tau},{:.6},{},{},{},{}\n",
                    p.threshold,
                    p.tp,
                    p.fp,
                    p.fn_,
                    p.precision.map_or("undefined".into(), |v| format!("{v:.6}")),
                ));
            }
            if curve.undefined {
                summary.push_str(&format!("{kind},{tau},undefined,0,0,0,undefined\n"));
            }
            for &(k, p) in &curve.precision_at_k {
                at_k_csv.push_str(&format!(
                    "{kind},{tau},{k},{}\n",
                    p.map_or("undefined".into(), |v| format!("{v:.6}"))
                ));
            }
            let color = [Rgb(200, 40, 40), Rgb(40, 140, 40), Rgb(40, 40, 200), Rgb(200, 140, 20)]
                [ti % 4];
            let pts: Vec<(f64, f64)> = curve
                .points
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.precision.map(|v| (i as f64, v)))
                .collect();
            if !pts.is_empty() {
                plot_series.push((color, pts));
            }
            kr.curves.insert(tau, curve);
        }
        for (ep, frames, pos) in &kr.episodes {
            per_episode.push_str(&format!("{kind},{ep},{frames},{pos}\n"));
        }
        if !plot_series.is_empty() {
            let img = line_plot(&plot_series, 400, 260);
            write_p6(&out.join(format!("{kind}_precision.ppm")), &img)
                .map_err(|e| EvalError::Config(e.to_string()))?;
        }
        report.kinds.insert(kind.clone(), kr);
    }

    let write = |name: &str, text: &str| -> Result<(), EvalError> {
        let path = out.join(name);
        std::fs::write(&path, text)
            .map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })
    };
    write("precision_curves.csv", &summary)?;
    write("precision_at_k.csv", &at_k_csv)?;
    write("per_episode.csv", &per_episode)?;
    Ok(report)
}

/// Descending-score listing with deterministic tie-break on
/// (episode, frame); optionally renders the top frames as a contact sheet.
pub fn rank_report(mut frames: Vec<ScoredFrame>) -> Vec<ScoredFrame> {
    frames.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.episode.cmp(&b.episode))
            .then_with(|| a.frame.cmp(&b.frame))
    });
    frames
}

pub fn rank_report_csv(ranked: &[ScoredFrame]) -> String {
    let mut s = String::from("rank,episode,frame,score,tagged_pixels\n");
    for (i, f) in ranked.iter().enumerate() {
        s.push_str(&format!("{},{},{},{:.6},{}\n", i + 1, f.episode, f.frame, f.score, f.tagged_pixels));
    }
    s
}

/// Contact sheet of the top `k` ranked frames (10 tiles per row).
pub fn rank_contact_sheet(ranked: &[ScoredFrame], root: &Path, k: usize) -> Result<Image, EvalError> {
    let mut tiles = Vec::new();
    let mut cache: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
    for f in ranked.iter().take(k) {
        if !cache.contains_key(&f.episode) {
            let ep = read_episode(&root.join(&f.episode))?;
            cache.insert(f.episode.clone(), ep.frames);
        }
        tiles.push(cache[&f.episode][f.frame].to_image());
    }
    if tiles.is_empty() {
        return Ok(Image::new(1, 1));
    }
    Ok(contact_sheet(&tiles, 10, 2))
}
