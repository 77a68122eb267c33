//! Rendered LLM commands.

use crate::skeleton::SkeletonNode;

use super::{HeadingHint, PlannerError, PromptKind};

/// The nine labels in the order the directions command lists them.
pub const DIRECTION_VOCABULARY: [&str; 9] = [
    "motionless",
    "left",
    "right",
    "up",
    "down",
    "left down",
    "left up",
    "right down",
    "right up",
];

fn quoted_list(items: impl IntoIterator<Item = String>) -> String {
    let inner: Vec<String> = items.into_iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", inner.join(", "))
}

/// Renders one command for `user_prompt`. The heading sentence is only
/// appended to the directions command.
pub fn build_prompt(
    kind: PromptKind,
    user_prompt: &str,
    heading: Option<&HeadingHint>,
    frame_count: usize,
) -> Result<String, PlannerError> {
    let user_prompt = user_prompt.trim();
    if user_prompt.is_empty() {
        return Err(PlannerError::EmptyPrompt);
    }
    let vocabulary = quoted_list(DIRECTION_VOCABULARY.iter().map(|s| s.to_string()));
    let text = match kind {
        PromptKind::MovingObjects => {
            format!("Given a user prompt, identify the moving objects or parts. Prompt: \"{user_prompt}\"")
        }
        PromptKind::Directions => {
            let mut text = format!(
                "Given a user prompt, elaborate the movement direction of the main characters or moving parts \
                 for each two frames of {frame_count} frames. Motions should be consistent. Directions should be \
                 one of followings:{vocabulary}. Answer the question in a list follow the format:\
                 [\"character name\": \"direction\", \"part name\": \"direction\", ...].\nPrompt: \"{user_prompt}\""
            );
            if let Some(h) = heading {
                text.push_str(&format!(
                    " And the {} is heading towards {}.",
                    h.character().replace('_', " "),
                    h.heading().phrase()
                ));
            }
            text
        }
        PromptKind::Skeleton => {
            let nodes = quoted_list(SkeletonNode::ALL.iter().map(|n| n.label().replace('_', " ")));
            format!(
                "Given a user prompt, describe how a human stick figure moves over {frame_count} frames. The figure \
                 has these nodes:{nodes}. Directions should be one of followings:{vocabulary}. For every \
                 transition k from 1 to {last} write one line per moving node in the format \
                 \"Frame k: node name: direction\". Nodes that do not move may be omitted.\nPrompt: \"{user_prompt}\"",
                last = frame_count.saturating_sub(1)
            )
        }
    };
    Ok(text)
}

/// `true` if every vocabulary label parses back to a distinct direction.
#[cfg(test)]
fn vocabulary_is_complete() -> bool {
    let parsed: std::collections::HashSet<crate::direction::Direction> = DIRECTION_VOCABULARY
        .iter()
        .map(|s| crate::direction::Direction::fuzzy_parse(s).unwrap())
        .collect();
    parsed.len() == 9
}
