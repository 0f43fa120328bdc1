//! Prompt rendering: a fixed per-task head, `EXAMPLE #i` shot blocks
//! (sentence, optional candidate lines, gold answer), and a trailing `TEST`
//! block whose `answer:` line the model completes.
//!
//! Rendering is deterministic down to the byte. Head templates are versioned
//! assets compiled into the binary. Disabling candidate hints (the `hcs`
//! flag) removes every `candidates:` block and nothing else.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::candidates::{select_meaningful, CandidateStore, SelectConfig};
use crate::corpus::Example;
use crate::task::{expand_instances, gold_target, AnswerItem, ItemSet, TaskInstance, TaskKind};

pub const TEMPLATE_VERSION: &str = "v1";

const HEAD_ALSC: &str = include_str!("../assets/templates/v1/alsc.txt");
const HEAD_AOPE: &str = include_str!("../assets/templates/v1/aope.txt");
const HEAD_ASTE: &str = include_str!("../assets/templates/v1/aste.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("shot id {0} cannot be resolved in the shot pool")]
    UnresolvedShot(String),
    #[error("gold projection failed for shot {shot_id}: {source}")]
    ShotGold {
        shot_id: String,
        source: crate::task::TaskError,
    },
}

/// The fixed instruction head for one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptHead {
    pub task: TaskKind,
    pub version: &'static str,
    pub text: &'static str,
}

pub fn head_for(task: TaskKind) -> PromptHead {
    let text = match task {
        TaskKind::Alsc => HEAD_ALSC,
        TaskKind::Aope => HEAD_AOPE,
        TaskKind::Aste => HEAD_ASTE,
    };
    PromptHead {
        task,
        version: TEMPLATE_VERSION,
        text,
    }
}

/// One fully rendered prompt for a (test instance, ensemble group) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub task: TaskKind,
    pub template_version: String,
    pub group_index: usize,
    pub test_instance_id: String,
    pub shot_ids: Vec<String>,
    pub hcs_enabled: bool,
    pub text: String,
}

/// Renders one answer item on one line: `polarity: <word>` for ALSC,
/// `(aspect, opinion)` for AOPE, `(aspect, opinion, <word>)` for ASTE.
pub fn render_item(item: &AnswerItem) -> String {
    match item {
        AnswerItem::Polarity(p) => format!("polarity: {}", p.word()),
        AnswerItem::Pair { aspect, opinion } => format!("({aspect}, {opinion})"),
        AnswerItem::Triple {
            aspect,
            opinion,
            polarity,
        } => format!("({aspect}, {opinion}, {})", polarity.word()),
    }
}

/// Renders a gold/prediction set as answer lines in set order (lexicographic
/// by aspect then opinion); the empty set renders as the single line `none`.
pub fn render_answer_items(items: &ItemSet, _task: TaskKind) -> Vec<String> {
    if items.is_empty() {
        vec!["none".to_string()]
    } else {
        items.iter().map(render_item).collect()
    }
}

/// Everything needed to resolve shot ids into rendered blocks.
pub struct PromptContext<'a> {
    pub task: TaskKind,
    /// Shot pool examples by id (normally the train split).
    pub pool: &'a HashMap<&'a str, &'a Example>,
    pub candidates: Option<&'a CandidateStore>,
    pub select: SelectConfig,
    pub hcs_enabled: bool,
}

impl<'a> PromptContext<'a> {
    /// Candidate lines for one example id, in confidence order. `None` when
    /// hints are disabled, no store is loaded, the example has no record, or
    /// selection leaves nothing.
    fn candidate_lines(&self, example_id: &str) -> Option<Vec<String>> {
        if !self.hcs_enabled {
            return None;
        }
        let set = self.candidates?.get(example_id)?;
        let selected = select_meaningful(set, self.select);
        if selected.items.is_empty() {
            return None;
        }
        Some(selected.items.iter().map(|s| render_item(&s.item)).collect())
    }
}

/// Builds the full prompt text for one test instance and one shot group.
pub fn build_prompt(
    head: PromptHead,
    group: &crate::shots::ShotGroup,
    context: &PromptContext<'_>,
    test_example: &Example,
    test_instance: &TaskInstance,
) -> Result<PromptBundle, PromptError> {
    let mut text = String::with_capacity(head.text.len() + 512);
    text.push_str(head.text.trim_end());
    text.push('\n');

    for (i, shot_id) in group.member_ids.iter().enumerate() {
        let example = context
            .pool
            .get(shot_id.as_str())
            .copied()
            .ok_or_else(|| PromptError::UnresolvedShot(shot_id.clone()))?;
        text.push('\n');
        text.push_str(&format!("EXAMPLE #{}\n", i + 1));
        text.push_str(&format!("sentence: {}\n", example.raw_text));

        // For ALSC a shot demonstrates a single (aspect -> polarity) query;
        // the first gold aspect in span order stands in for the example.
        // Aspects with ambiguous gold are skipped rather than aborting the
        // run, since shots are demonstrations, not scored outputs.
        let gold_lines = match context.task {
            TaskKind::Alsc => {
                let instances = expand_instances(example, TaskKind::Alsc)
                    .expect("ALSC expansion cannot fail");
                let demonstrable = instances
                    .iter()
                    .find_map(|instance| gold_target(example, instance).ok().map(|g| (instance, g)));
                match demonstrable {
                    Some((instance, gold)) => {
                        let query = instance.query.as_ref().expect("ALSC instance has a query");
                        text.push_str(&format!("aspect: {}\n", query.term));
                        render_answer_items(&gold.items, context.task)
                    }
                    None => vec!["none".to_string()],
                }
            }
            TaskKind::Aope | TaskKind::Aste => {
                let instances =
                    expand_instances(example, context.task).map_err(|source| PromptError::ShotGold {
                        shot_id: shot_id.clone(),
                        source,
                    })?;
                let gold = gold_target(example, &instances[0]).map_err(|source| {
                    PromptError::ShotGold {
                        shot_id: shot_id.clone(),
                        source,
                    }
                })?;
                render_answer_items(&gold.items, context.task)
            }
        };

        if let Some(lines) = context.candidate_lines(&example.id) {
            text.push_str("candidates:\n");
            for line in lines {
                text.push_str(&line);
                text.push('\n');
            }
        }
        text.push_str("answer:\n");
        for line in gold_lines {
            text.push_str(&line);
            text.push('\n');
        }
    }

    text.push('\n');
    text.push_str("TEST\n");
    text.push_str(&format!("sentence: {}\n", test_example.raw_text));
    if let Some(query) = &test_instance.query {
        text.push_str(&format!("aspect: {}\n", query.term));
    }
    if let Some(lines) = context.candidate_lines(&test_example.id) {
        text.push_str("candidates:\n");
        for line in lines {
            text.push_str(&line);
            text.push('\n');
        }
    }
    text.push_str("answer:\n");

    Ok(PromptBundle {
        task: context.task,
        template_version: head.version.to_string(),
        group_index: group.group_index,
        test_instance_id: test_instance.instance_id.clone(),
        shot_ids: group.member_ids.clone(),
        hcs_enabled: context.hcs_enabled,
        text,
    })
}
