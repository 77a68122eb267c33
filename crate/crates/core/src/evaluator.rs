//! Motion Correctness: bounding-box centre trajectories scored by the sign of
//! the cosine between observed and planned displacement.

use serde::Serialize;
use thiserror::Error;

use crate::direction::{direction_to_delta, Direction};
use crate::mask::Mask;
use crate::scheduler::{schedule_entries, AnchorEntry, Slice};
use crate::segmenter::mask_center;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("need at least 2 frames to track, got {0}")]
    TooFewFrames(usize),
    #[error("character `{0}` is absent from every frame")]
    NotFound(String),
    #[error("plan has {got} directions for a {frames}-frame trajectory")]
    PlanLength { got: usize, frames: usize },
    #[error("no evaluable moving transitions for `{0}`")]
    Undefined(String),
}

/// Per-frame bounding-box centres; `None` where the mask is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub character: String,
    pub centers: Vec<Option<(f64, f64)>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Same trajectory moved by a constant offset.
    pub fn translated(&self, dx: f64, dy: f64) -> Trajectory {
        Trajectory {
            character: self.character.clone(),
            centers: self.centers.iter().map(|c| c.map(|(x, y)| (x + dx, y + dy))).collect(),
        }
    }
}

pub fn track_trajectory(masks: &[Mask], character: &str) -> Result<Trajectory, EvalError> {
    if masks.len() < 2 {
        return Err(EvalError::TooFewFrames(masks.len()));
    }
    let centers: Vec<_> = masks.iter().map(|m| mask_center(m).ok()).collect();
    if centers.iter().all(Option::is_none) {
        return Err(EvalError::NotFound(character.to_string()));
    }
    Ok(Trajectory {
        character: character.to_string(),
        centers,
    })
}

/// Verdict counts for one trajectory. Moving transitions form the headline
/// number; motionless ones are scored by displacement tolerance and kept
/// apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MotionScore {
    pub correct: usize,
    pub evaluated: usize,
    pub motionless_correct: usize,
    pub motionless_evaluated: usize,
}

impl MotionScore {
    pub fn accuracy(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.correct as f64 / self.evaluated as f64)
    }

    pub fn motionless_accuracy(&self) -> Option<f64> {
        (self.motionless_evaluated > 0).then(|| self.motionless_correct as f64 / self.motionless_evaluated as f64)
    }
}

/// Scores every transition with both centres present. A moving transition is
/// correct iff `ē_pred · ē_gt > 0`, so a static object and an orthogonal
/// move both count as wrong. A motionless transition is correct iff the
/// centre moved at most `σ/2`.
pub fn score_transitions(traj: &Trajectory, plan: &[Direction], sigma: u32) -> Result<MotionScore, EvalError> {
    if plan.len() + 1 != traj.len() {
        return Err(EvalError::PlanLength {
            got: plan.len(),
            frames: traj.len(),
        });
    }
    let mut score = MotionScore::default();
    for (i, &dir) in plan.iter().enumerate() {
        let (Some(a), Some(b)) = (traj.centers[i], traj.centers[i + 1]) else {
            continue;
        };
        let pred = (b.0 - a.0, b.1 - a.1);
        if dir.is_motionless() {
            score.motionless_evaluated += 1;
            if pred.0.hypot(pred.1) <= sigma as f64 / 2.0 {
                score.motionless_correct += 1;
            }
        } else {
            let gt = direction_to_delta(dir, sigma);
            score.evaluated += 1;
            if pred.0 * gt.dx as f64 + pred.1 * gt.dy as f64 > 0.0 {
                score.correct += 1;
            }
        }
    }
    Ok(score)
}

/// Headline accuracy over moving transitions.
pub fn motion_correctness(traj: &Trajectory, plan: &[Direction], sigma: u32) -> Result<f64, EvalError> {
    score_transitions(traj, plan, sigma)?
        .accuracy()
        .ok_or_else(|| EvalError::Undefined(traj.character.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterReport {
    pub name: String,
    pub accuracy: Option<f64>,
    pub motionless_accuracy: Option<f64>,
    pub score: MotionScore,
    pub centers: Vec<Option<(f64, f64)>>,
}

/// Run report; field order is the serialised key order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub characters: Vec<CharacterReport>,
    pub mean_accuracy: Option<f64>,
    pub anchor_schedule: Vec<AnchorEntry>,
    pub slices: Vec<Slice>,
    pub warnings: Vec<String>,
    pub config: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Assembles the run report. The mean runs over characters whose accuracy
/// is defined.
pub fn emit_report(
    scored: &[(Trajectory, MotionScore)],
    anchors: &[usize],
    slices: &[Slice],
    warnings: &[String],
    config: serde_json::Value,
) -> Report {
    let characters: Vec<CharacterReport> = scored
        .iter()
        .map(|(t, s)| CharacterReport {
            name: t.character.clone(),
            accuracy: s.accuracy(),
            motionless_accuracy: s.motionless_accuracy(),
            score: *s,
            centers: t.centers.clone(),
        })
        .collect();
    let defined: Vec<f64> = characters.iter().filter_map(|c| c.accuracy).collect();
    let mean_accuracy = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Report {
        characters,
        mean_accuracy,
        anchor_schedule: schedule_entries(anchors),
        slices: slices.to_vec(),
        warnings: warnings.to_vec(),
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Resolution;
    use proptest::prelude::*;
    use Direction::*;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory {
            character: "obj".into(),
            centers: points.iter().map(|&p| Some(p)).collect(),
        }
    }

    #[test]
    fn tracking_examples() {
        let masks: Vec<Mask> = (0..4)
            .map(|k| Mask::rect(32, 8, Resolution::Latent, 4 * k, 2, 3, 3))
            .collect();
        let t = track_trajectory(&masks, "sq").unwrap();
        for k in 0..3 {
            let (a, b) = (t.centers[k].unwrap(), t.centers[k + 1].unwrap());
            assert_eq!((b.0 - a.0, b.1 - a.1), (4.0, 0.0));
        }
        let mut gap = masks.clone();
        gap[3] = Mask::empty(32, 8, Resolution::Latent);
        let t = track_trajectory(&gap, "sq").unwrap();
        assert_eq!(t.centers[3], None);
        assert_eq!(t.centers[2], Some((9.0, 3.0)));
        let empty = vec![Mask::empty(4, 4, Resolution::Latent); 3];
        assert_eq!(track_trajectory(&empty, "x"), Err(EvalError::NotFound("x".into())));
        assert_eq!(track_trajectory(&masks[..1], "x"), Err(EvalError::TooFewFrames(1)));
    }

    #[test]
    fn cosine_sign_cases() {
        let right = traj(&[(0.0, 0.0), (4.0, 0.0)]);
        assert_eq!(motion_correctness(&right, &[Right], 4).unwrap(), 1.0);
        assert_eq!(motion_correctness(&right, &[Left], 4).unwrap(), 0.0);
        let up = traj(&[(0.0, 4.0), (0.0, 0.0)]);
        assert_eq!(motion_correctness(&up, &[Right], 4).unwrap(), 0.0);
        let still = traj(&[(1.0, 1.0), (1.0, 1.0)]);
        assert_eq!(motion_correctness(&still, &[Down], 4).unwrap(), 0.0);
    }

    #[test]
    fn motionless_is_reported_apart() {
        let t = traj(&[(0.0, 0.0), (1.0, 1.0), (9.0, 1.0)]);
        let s = score_transitions(&t, &[Motionless, Motionless], 4).unwrap();
        assert_eq!(s.accuracy(), None);
        assert_eq!(s.motionless_accuracy(), Some(0.5));
        assert!(matches!(motion_correctness(&t, &[Motionless, Motionless], 4), Err(EvalError::Undefined(_))));
        assert!(matches!(score_transitions(&t, &[Up], 4), Err(EvalError::PlanLength { .. })));
    }

    #[test]
    fn absent_centres_are_skipped() {
        let t = Trajectory {
            character: "a".into(),
            centers: vec![Some((0.0, 0.0)), None, Some((8.0, 0.0)), Some((12.0, 0.0))],
        };
        let s = score_transitions(&t, &[Right, Right, Right], 4).unwrap();
        assert_eq!((s.correct, s.evaluated), (1, 1));
    }

    #[test]
    fn report_examples() {
        let empty = emit_report(&[], &[], &[], &[], serde_json::json!({}));
        let v: serde_json::Value = serde_json::from_str(&empty.to_json()).unwrap();
        assert_eq!(v["characters"], serde_json::json!([]));
        assert!(v["mean_accuracy"].is_null());

        let t = traj(&[(0.0, 0.0); 8]);
        let full = MotionScore {
            correct: 7,
            evaluated: 7,
            ..Default::default()
        };
        let mixed = MotionScore {
            correct: 5,
            evaluated: 7,
            ..Default::default()
        };
        let r = emit_report(&[(t.clone(), full), (t, mixed)], &[0, 0, 1], &[], &[], serde_json::json!({"seed": 1}));
        assert_eq!(r.characters[0].accuracy, Some(1.0));
        assert!((r.characters[1].accuracy.unwrap() - 0.7143).abs() < 5e-5);
        let json = r.to_json();
        assert!(json.find("\"characters\"").unwrap() < json.find("\"mean_accuracy\"").unwrap());
        assert!(json.contains("\"anchor\": 1"));
    }

    fn arb_dir() -> impl Strategy<Value = Direction> {
        proptest::sample::select(Direction::MOVING.to_vec())
    }

    proptest! {
        #[test]
        fn reversal_and_translation(steps in proptest::collection::vec((arb_dir(), arb_dir()), 1..10), ox in -50.0f64..50.0, oy in -50.0f64..50.0) {
            // Observed motion follows the first direction of each pair, the
            // plan the second; skip orthogonal pairs.
            let steps: Vec<_> = steps.into_iter().filter(|(a, b)| {
                let (p, q) = (a.unit(), b.unit());
                p.0 * q.0 + p.1 * q.1 != 0
            }).collect();
            prop_assume!(!steps.is_empty());
            let mut pts = vec![(0.0, 0.0)];
            for (obs, _) in &steps {
                let d = direction_to_delta(*obs, 4);
                let last = *pts.last().unwrap();
                pts.push((last.0 + d.dx as f64, last.1 + d.dy as f64));
            }
            let t = traj(&pts);
            let plan: Vec<_> = steps.iter().map(|s| s.1).collect();
            let reversed: Vec<_> = plan.iter().map(|d| d.opposite()).collect();
            let a = motion_correctness(&t, &plan, 4).unwrap();
            let b = motion_correctness(&t, &reversed, 4).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            prop_assert_eq!(motion_correctness(&t.translated(ox, oy), &plan, 4).unwrap(), a);
        }
    }
}
