//! The repair cycle as a directed graph of named stages.
//!
//! ```text
//!            +--------------------------------------------+
//!            v                                            |
//! Execute -> Feedback -> Prompt -> Complete -> Extract -> Execute
//!    |                                |          |
//!    +-> End (all pass / limit)       +-> End    +-> Feedback (no program in response)
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Execute,
    Feedback,
    Prompt,
    Complete,
    Extract,
}

/// Where an edge leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Stage(Stage),
    End,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Execute => "execute",
            Stage::Feedback => "feedback",
            Stage::Prompt => "prompt",
            Stage::Complete => "complete",
            Stage::Extract => "extract",
        }
    }

    pub fn successors(self) -> &'static [Node] {
        use Node::End;
        use Stage::*;
        match self {
            Execute => &[Node::Stage(Feedback), End],
            Feedback => &[Node::Stage(Prompt)],
            Prompt => &[Node::Stage(Complete)],
            Complete => &[Node::Stage(Extract), End],
            Extract => &[Node::Stage(Execute), Node::Stage(Feedback)],
        }
    }

    pub fn can_reach(self, next: Node) -> bool {
        self.successors().contains(&next)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    /// 0 for the baseline execution of the original program.
    pub iteration: u32,
    pub seconds: f64,
}
