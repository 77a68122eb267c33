//! `Frame k: <node>: <direction>` answers.

use crate::direction::Direction;
use crate::skeleton::{SkeletonNode, SkeletonPlan};

use super::provider::LlmProvider;
use super::{build_prompt, PlannerError, PromptKind};

/// Parses a skeleton answer. `Frame k` names the transition into frame `k`,
/// so `k` runs from 1 to `F − 1`. Lines that do not start with `Frame` are
/// ignored; one line may carry several `node: direction` pairs separated by
/// `,` or `;`.
pub fn parse_skeleton_plan(text: &str, frame_count: usize) -> Result<SkeletonPlan, PlannerError> {
    let mut plan = SkeletonPlan::still(frame_count)?;
    let max = frame_count - 1;
    let mut offset = 0;
    for (i, raw_line) in text.split_inclusive('\n').enumerate() {
        let line_start = offset;
        offset += raw_line.len();
        let line_no = i + 1;
        let line = raw_line.trim().trim_start_matches(['-', '*', ' ']);
        let Some(rest) = strip_prefix_ci(line, "frame") else {
            continue;
        };
        let Some((number, body)) = rest.split_once(':') else {
            return Err(PlannerError::Parse {
                offset: line_start,
                message: format!("line {line_no}: expected `Frame k:`"),
            });
        };
        let frame: usize = number.trim().parse().map_err(|_| PlannerError::Parse {
            offset: line_start,
            message: format!("line {line_no}: `{}` is not a frame number", number.trim()),
        })?;
        if frame == 0 || frame > max {
            return Err(PlannerError::FrameRange {
                frame,
                line: line_no,
                max,
            });
        }
        for pair in body.split([',', ';']).filter(|p| !p.trim().is_empty()) {
            let Some((node, dir)) = pair.rsplit_once(':') else {
                return Err(PlannerError::Parse {
                    offset: line_start,
                    message: format!("line {line_no}: expected `node: direction`"),
                });
            };
            let node: SkeletonNode = node.parse().map_err(|_| PlannerError::Schema {
                node: node.trim().to_string(),
                line: line_no,
            })?;
            let direction = Direction::fuzzy_parse(dir).map_err(|e| PlannerError::vocabulary(e, line_start))?;
            plan.set(node, frame - 1, direction);
        }
    }
    Ok(plan)
}

fn strip_prefix_ci<'a>(line: &'a str, prefix: &str) -> Option<&'a str> {
    let head = line.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &line[prefix.len()..])
}

/// Lists every moving node, one line each. Inverse of
/// [`parse_skeleton_plan`].
pub fn format_skeleton_plan(plan: &SkeletonPlan) -> String {
    let mut out = String::new();
    for k in 0..plan.frame_count() - 1 {
        for node in SkeletonNode::ALL {
            let d = plan.directions(node)[k];
            if !d.is_motionless() {
                out.push_str(&format!("Frame {}: {}: {}\n", k + 1, node.label().replace('_', " "), d.phrase()));
            }
        }
    }
    out
}

/// Offline skeleton plans for a few common actions. Waving swings the right
/// hand up and down; walking or running left or right moves every node;
/// jumping lifts every node for the first half and drops it for the rest.
/// Anything else stands still and yields a warning.
pub fn fallback_skeleton_plan(prompt: &str, frame_count: usize) -> Result<(SkeletonPlan, Vec<String>), PlannerError> {
    let mut plan = SkeletonPlan::still(frame_count)?;
    let text = prompt.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| text.contains(w));
    let transitions = frame_count - 1;
    let mut warnings = Vec::new();
    if has(&["wav"]) {
        for k in 0..transitions {
            let d = if k % 2 == 0 { Direction::Up } else { Direction::Down };
            plan.set(SkeletonNode::RightHand, k, d);
        }
    } else if has(&["walk", "run", "stroll", "march"]) && has(&["left", "right"]) {
        let d = if text.contains("left") { Direction::Left } else { Direction::Right };
        for node in SkeletonNode::ALL {
            for k in 0..transitions {
                plan.set(node, k, d);
            }
        }
    } else if has(&["jump", "hop", "leap"]) {
        let rise = transitions / 2;
        for node in SkeletonNode::ALL {
            for k in 0..transitions {
                plan.set(node, k, if k < rise { Direction::Up } else { Direction::Down });
            }
        }
    } else {
        warnings.push(format!("no skeleton motion recognised in \"{}\"; figure stands still", prompt.trim()));
    }
    Ok((plan, warnings))
}

/// Sends the skeleton command up to `1 + retries` times; the first answer
/// that parses wins.
pub fn skeleton_with_llm(
    provider: &dyn LlmProvider,
    user_prompt: &str,
    frame_count: usize,
    retries: usize,
) -> Result<SkeletonPlan, PlannerError> {
    let request = build_prompt(PromptKind::Skeleton, user_prompt, None, frame_count)?;
    let mut last_err = None;
    for _ in 0..=retries {
        match parse_skeleton_plan(&provider.complete(&request)?, frame_count) {
            Ok(plan) => return Ok(plan),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}
