//! Windowed owner verification over precomputed similarity scores.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ConcordError, Result};

/// Tolerance for floating-point window boundaries.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWindow {
    pub start: f64,
    pub end: f64,
    /// Similarity to the enrolled owner, in `[0, 1]`.
    pub score: f64,
}

impl ScoreWindow {
    pub fn new(start: f64, end: f64, score: f64) -> Result<Self> {
        if !(0.0 <= start && start < end) {
            return Err(ConcordError::InvalidConfig(format!("window [{start}, {end}] is empty or negative")));
        }
        check_score(score)?;
        Ok(ScoreWindow { start, end, score })
    }
}

fn check_score(score: f64) -> Result<()> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(ConcordError::InvalidConfig(format!("score {score} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub window_len: f64,
    /// Duration shared by consecutive windows.
    pub overlap: f64,
    pub target_fpr: f64,
    pub threshold: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { window_len: 2.0, overlap: 0.5, target_fpr: 0.01, threshold: None }
    }
}

impl GateConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0 < self.overlap && self.overlap < self.window_len) {
            return Err(ConcordError::InvalidConfig(format!(
                "overlap {} must lie in (0, window_len {})",
                self.overlap, self.window_len
            )));
        }
        if !(0.0 < self.target_fpr && self.target_fpr < 1.0) {
            return Err(ConcordError::InvalidConfig(format!("target_fpr {} must lie in (0, 1)", self.target_fpr)));
        }
        if let Some(t) = self.threshold {
            check_score(t)?;
        }
        Ok(())
    }

    pub fn hop(&self) -> f64 {
        self.window_len - self.overlap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub achieved_fpr: f64,
    /// Absent when no genuine scores were supplied.
    pub achieved_tpr: Option<f64>,
}

/// Fraction of `sorted` scores strictly above `t`.
fn rate_above(sorted: &[f64], t: f64) -> f64 {
    let at_or_below = sorted.partition_point(|&s| s <= t);
    (sorted.len() - at_or_below) as f64 / sorted.len() as f64
}

/// Picks the smallest threshold among the distinct impostor scores and 0
/// whose false-positive rate (`score > threshold` accepted) is within target.
pub fn calibrate_threshold(impostor_scores: &[f64], genuine_scores: &[f64], target_fpr: f64) -> Result<Calibration> {
    if impostor_scores.is_empty() {
        return Err(ConcordError::InvalidConfig("calibration needs impostor scores".into()));
    }
    for &s in impostor_scores.iter().chain(genuine_scores) {
        check_score(s)?;
    }
    if !(0.0..=1.0).contains(&target_fpr) {
        return Err(ConcordError::InvalidConfig(format!("target_fpr {target_fpr} outside [0, 1]")));
    }
    let mut imp = impostor_scores.to_vec();
    imp.sort_by(f64::total_cmp);
    let mut gen = genuine_scores.to_vec();
    gen.sort_by(f64::total_cmp);

    let mut candidates = Vec::with_capacity(imp.len() + 1);
    candidates.push(0.0);
    candidates.extend(imp.iter().copied());
    candidates.dedup();

    // FPR falls as the threshold rises, so the first feasible candidate is the smallest
    let threshold = candidates
        .into_iter()
        .find(|&t| rate_above(&imp, t) <= target_fpr)
        .ok_or_else(|| {
            ConcordError::CalibrationInfeasible(format!("no threshold reaches FPR {target_fpr}"))
        })?;
    Ok(Calibration {
        threshold,
        achieved_fpr: rate_above(&imp, threshold),
        achieved_tpr: (!gen.is_empty()).then(|| rate_above(&gen, threshold)),
    })
}

/// Fixed-length windows every `window_len - overlap` seconds, with a final
/// window anchored to the clip end when the regular grid leaves a tail.
pub fn segment_windows(duration: f64, config: &GateConfig) -> Result<Vec<(f64, f64)>> {
    config.check()?;
    if !(duration > 0.0) {
        return Err(ConcordError::InvalidConfig(format!("duration {duration} must be positive")));
    }
    let len = config.window_len;
    if duration < len {
        return Ok(vec![(0.0, duration)]);
    }
    let hop = config.hop();
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let start = k as f64 * hop;
        if start + len > duration + EPS {
            break;
        }
        out.push((start, start + len));
        k += 1;
    }
    let covered = out.last().map_or(0.0, |w| w.1);
    if covered < duration - EPS {
        out.push((duration - len, duration));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

pub fn gate_stream(windows: &[ScoreWindow], threshold: f64) -> Vec<Decision> {
    windows
        .iter()
        .map(|w| if w.score > threshold { Decision::Accept } else { Decision::Reject })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Owner,
    Impostor,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationMetrics {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    /// Rates are absent when their denominator is zero.
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
}

pub fn verification_metrics(decisions: &[Decision], labels: &[Label]) -> Result<VerificationMetrics> {
    if decisions.len() != labels.len() {
        return Err(ConcordError::InvalidConfig(format!(
            "{} decisions but {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    let mut m = VerificationMetrics::default();
    for (d, l) in decisions.iter().zip(labels) {
        match (l, d) {
            (Label::Owner, Decision::Accept) => m.tp += 1,
            (Label::Owner, Decision::Reject) => m.fn_ += 1,
            (Label::Impostor, Decision::Accept) => m.fp += 1,
            (Label::Impostor, Decision::Reject) => m.tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    m.tpr = ratio(m.tp, m.fn_);
    m.fnr = ratio(m.fn_, m.tp);
    m.fpr = ratio(m.fp, m.tn);
    m.tnr = ratio(m.tn, m.fp);
    Ok(m)
}

/// A turn's time extent in the recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnSpan {
    pub turn_id: u32,
    pub start: f64,
    pub end: f64,
}

/// Turns kept for the owner: more than half of the windows overlapping the
/// turn were accepted. Turns without overlapping windows are dropped.
pub fn captured_turns(spans: &[TurnSpan], windows: &[ScoreWindow], threshold: f64) -> Vec<u32> {
    spans
        .iter()
        .filter(|s| {
            let overlapping: Vec<&ScoreWindow> =
                windows.iter().filter(|w| w.start < s.end && s.start < w.end).collect();
            let accepted = overlapping.iter().filter(|w| w.score > threshold).count();
            !overlapping.is_empty() && 2 * accepted > overlapping.len()
        })
        .map(|s| s.turn_id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledWindow {
    pub window: ScoreWindow,
    pub label: Label,
}

/// Parses `start end score label` lines; `#` comments and blank lines are skipped.
pub fn parse_scores(text: &str) -> Result<Vec<LabeledWindow>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |column: usize, message: String| ConcordError::Parse { line: i + 1, column, message };
        let fields: Vec<(usize, &str)> = raw
            .split_whitespace()
            .map(|f| (f.as_ptr() as usize - raw.as_ptr() as usize + 1, f))
            .collect();
        if fields.len() != 4 {
            return Err(err(1, format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k].1.parse().map_err(|_| err(fields[k].0, format!("`{}` is not a number", fields[k].1)))
        };
        let (start, end, score) = (num(0)?, num(1)?, num(2)?);
        let label = match fields[3].1.to_ascii_lowercase().as_str() {
            "owner" | "genuine" | "target" | "1" => Label::Owner,
            "impostor" | "nontarget" | "0" => Label::Impostor,
            other => return Err(err(fields[3].0, format!("unknown label `{other}`"))),
        };
        let window = ScoreWindow::new(start, end, score).map_err(|e| err(fields[0].0, e.to_string()))?;
        out.push(LabeledWindow { window, label });
    }
    Ok(out)
}

/// Two-Gaussian synthetic score sets (impostor, genuine), clipped to `[0, 1]`.
pub fn synthetic_scores(impostors: usize, genuine: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let imp = Normal::<f64>::new(0.35, 0.12).expect("valid normal");
    let gen = Normal::<f64>::new(0.78, 0.09).expect("valid normal");
    let i = (0..impostors).map(|_| imp.sample(&mut rng).clamp(0.0, 1.0)).collect();
    let g = (0..genuine).map(|_| gen.sample(&mut rng).clamp(0.0, 1.0)).collect();
    (i, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_ten_seconds() {
        let w = segment_windows(10.0, &GateConfig::default()).unwrap();
        assert_eq!(w, vec![(0.0, 2.0), (1.5, 3.5), (3.0, 5.0), (4.5, 6.5), (6.0, 8.0), (7.5, 9.5), (8.0, 10.0)]);
    }

    #[test]
    fn short_and_exact_clips() {
        let cfg = GateConfig::default();
        assert_eq!(segment_windows(2.0, &cfg).unwrap(), vec![(0.0, 2.0)]);
        assert_eq!(segment_windows(1.0, &cfg).unwrap(), vec![(0.0, 1.0)]);
        assert!(segment_windows(0.0, &cfg).is_err());
    }

    #[test]
    fn calibration_examples() {
        let c = calibrate_threshold(&[0.0; 5], &[1.0; 5], 0.01).unwrap();
        assert_eq!((c.threshold, c.achieved_fpr, c.achieved_tpr), (0.0, 0.0, Some(1.0)));
        let imp: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let c = calibrate_threshold(&imp, &[], 0.10).unwrap();
        assert_eq!(c.threshold, 0.9);
        assert!((c.achieved_fpr - 0.1).abs() < 1e-12);
        assert_eq!(c.achieved_tpr, None);
    }

    #[test]
    fn ties_are_always_feasible() {
        let c = calibrate_threshold(&[0.5; 7], &[], 0.0).unwrap();
        assert_eq!((c.threshold, c.achieved_fpr), (0.5, 0.0));
    }

    #[test]
    fn gate_is_strict() {
        let w = [ScoreWindow::new(0.0, 2.0, 0.95).unwrap(), ScoreWindow::new(1.5, 3.5, 0.2).unwrap()];
        assert_eq!(gate_stream(&w, 0.9), vec![Decision::Accept, Decision::Reject]);
        assert_eq!(gate_stream(&w, 0.95), vec![Decision::Reject, Decision::Reject]);
    }

    #[test]
    fn metrics_from_counts() {
        let mut d = vec![Decision::Accept; 8];
        d.extend([Decision::Reject; 2]);
        d.push(Decision::Accept);
        d.extend([Decision::Reject; 9]);
        let mut l = vec![Label::Owner; 10];
        l.extend([Label::Impostor; 10]);
        let m = verification_metrics(&d, &l).unwrap();
        assert_eq!(m.tpr, Some(0.8));
        assert_eq!(m.fpr, Some(0.1));
        let m = verification_metrics(&[Decision::Accept], &[Label::Owner]).unwrap();
        assert_eq!(m.fpr, None);
    }

    #[test]
    fn majority_capture() {
        let w = [
            ScoreWindow::new(0.0, 2.0, 0.9).unwrap(),
            ScoreWindow::new(1.5, 3.5, 0.9).unwrap(),
            ScoreWindow::new(3.0, 5.0, 0.1).unwrap(),
        ];
        let spans = [TurnSpan { turn_id: 1, start: 0.0, end: 3.2 }, TurnSpan { turn_id: 2, start: 3.6, end: 5.0 }];
        assert_eq!(captured_turns(&spans, &w, 0.5), vec![1]);
    }

    #[test]
    fn score_file_errors_carry_location() {
        let ok = parse_scores("# s e score label\n0 2 0.9 owner\n1.5 3.5 0.1 impostor\n").unwrap();
        assert_eq!(ok.len(), 2);
        match parse_scores("0 2 x owner").unwrap_err() {
            ConcordError::Parse { line, column, .. } => assert_eq!((line, column), (1, 5)),
            e => panic!("unexpected {e}"),
        }
    }
}
