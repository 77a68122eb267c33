//! Evolving-event prompt slices.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("no slice prompts given")]
    Empty,
    #[error("{prompts} slice prompts do not fit in {frames} frames")]
    Capacity { prompts: usize, frames: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Slice {
    pub prompt: String,
    /// First frame of the slice.
    pub start: usize,
    /// One past the last frame.
    pub end: usize,
}

/// Contiguous slices partitioning `0..F`, each with its own anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceSchedule {
    slices: Vec<Slice>,
}

impl SliceSchedule {
    /// The whole video as one slice.
    pub fn single(prompt: impl Into<String>, frame_count: usize) -> Self {
        SliceSchedule {
            slices: vec![Slice {
                prompt: prompt.into(),
                start: 0,
                end: frame_count,
            }],
        }
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn frame_count(&self) -> usize {
        self.slices.last().map(|s| s.end).unwrap_or(0)
    }

    pub fn slice_of(&self, frame: usize) -> Option<&Slice> {
        self.slices.iter().find(|s| (s.start..s.end).contains(&frame))
    }

    /// Prompt conditioning each frame.
    pub fn conditions(&self) -> Vec<String> {
        self.slices
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.prompt.clone(), s.end - s.start))
            .collect()
    }
}

/// Splits `0..F` into `prompts.len()` ranges as equal as possible, earlier
/// slices taking the remainder.
pub fn slice_schedule(prompts: &[String], frame_count: usize) -> Result<SliceSchedule, SliceError> {
    if prompts.is_empty() {
        return Err(SliceError::Empty);
    }
    if prompts.len() > frame_count {
        return Err(SliceError::Capacity {
            prompts: prompts.len(),
            frames: frame_count,
        });
    }
    let n = prompts.len();
    let (base, rem) = (frame_count / n, frame_count % n);
    let mut start = 0;
    let slices = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let len = base + usize::from(i < rem);
            let s = Slice {
                prompt: p.clone(),
                start,
                end: start + len,
            };
            start += len;
            s
        })
        .collect();
    Ok(SliceSchedule { slices })
}
