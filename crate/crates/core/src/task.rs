//! Sub-task definitions and gold-target projection.
//!
//! Three sub-tasks are supported: ALSC (polarity for a given aspect), AOPE
//! (all aspect-opinion pairs), and ASTE (all aspect-opinion-polarity
//! triplets). Gold triplets are projected into task-specific target sets of
//! canonicalized surface strings, since predictions come back from the model
//! as text rather than token indices.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Example, Polarity, Span};
use crate::normalize::canonicalize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("task {task} requires opinion annotations, absent in example {example_id}")]
    UnsupportedTask { task: TaskKind, example_id: String },
    #[error("aspect {term:?} in {example_id} has conflicting gold polarities")]
    AmbiguousPolarity { example_id: String, term: String },
    #[error("instance {0} does not belong to this example")]
    UnknownInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TaskKind {
    Alsc,
    Aope,
    Aste,
}

impl TaskKind {
    pub fn label(&self) -> &'static str {
        match self {
            TaskKind::Alsc => "ALSC",
            TaskKind::Aope => "AOPE",
            TaskKind::Aste => "ASTE",
        }
    }

    /// Number of slots in a rendered answer tuple (1 for the bare polarity).
    pub fn arity(&self) -> usize {
        match self {
            TaskKind::Alsc => 1,
            TaskKind::Aope => 2,
            TaskKind::Aste => 3,
        }
    }

    pub const ALL: [TaskKind; 3] = [TaskKind::Alsc, TaskKind::Aope, TaskKind::Aste];
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alsc" => Ok(TaskKind::Alsc),
            "aope" => Ok(TaskKind::Aope),
            "aste" => Ok(TaskKind::Aste),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// One answer element. The variant matches the owning task: `Polarity` for
/// ALSC, `Pair` for AOPE, `Triple` for ASTE. Strings are always canonical.
///
/// The derived ordering sorts pairs and triples lexicographically by aspect,
/// then opinion, which is also the order answer lines are rendered in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnswerItem {
    Polarity(Polarity),
    Pair { aspect: String, opinion: String },
    Triple {
        aspect: String,
        opinion: String,
        polarity: Polarity,
    },
}

impl AnswerItem {
    pub fn matches_task(&self, task: TaskKind) -> bool {
        matches!(
            (self, task),
            (AnswerItem::Polarity(_), TaskKind::Alsc)
                | (AnswerItem::Pair { .. }, TaskKind::Aope)
                | (AnswerItem::Triple { .. }, TaskKind::Aste)
        )
    }
}

pub type ItemSet = BTreeSet<AnswerItem>;

/// The aspect a single ALSC query asks about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectQuery {
    /// Canonicalized surface string, as rendered into the prompt.
    pub term: String,
    pub span: Span,
}

/// One scoring/prompting unit: the whole example for AOPE and ASTE, one
/// (example, aspect) pair for ALSC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub task: TaskKind,
    pub example_id: String,
    /// `example_id` for AOPE/ASTE; `example_id#a<k>` for the k-th distinct
    /// aspect span (in ascending span order) for ALSC.
    pub instance_id: String,
    pub query: Option<AspectQuery>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTarget {
    pub task: TaskKind,
    pub items: ItemSet,
}

/// Expands an example into task instances: one per distinct gold aspect span
/// for ALSC, exactly one (possibly with empty gold) for AOPE/ASTE.
pub fn expand_instances(example: &Example, task: TaskKind) -> Result<Vec<TaskInstance>, TaskError> {
    match task {
        TaskKind::Alsc => Ok(example
            .distinct_aspect_spans()
            .into_iter()
            .enumerate()
            .map(|(k, span)| TaskInstance {
                task,
                example_id: example.id.clone(),
                instance_id: format!("{}#a{}", example.id, k),
                query: Some(AspectQuery {
                    term: canonicalize(&example.span_text(span)),
                    span,
                }),
            })
            .collect()),
        TaskKind::Aope | TaskKind::Aste => {
            if !example.has_opinion_spans() {
                return Err(TaskError::UnsupportedTask {
                    task,
                    example_id: example.id.clone(),
                });
            }
            Ok(vec![TaskInstance {
                task,
                example_id: example.id.clone(),
                instance_id: example.id.clone(),
                query: None,
            }])
        }
    }
}

/// Projects the example's gold triplets into the instance's target set.
pub fn gold_target(example: &Example, instance: &TaskInstance) -> Result<GoldTarget, TaskError> {
    if instance.example_id != example.id {
        return Err(TaskError::UnknownInstance(instance.instance_id.clone()));
    }
    let items = match instance.task {
        TaskKind::Alsc => {
            let query = instance
                .query
                .as_ref()
                .ok_or_else(|| TaskError::UnknownInstance(instance.instance_id.clone()))?;
            let polarities: BTreeSet<Polarity> = example
                .triplets
                .iter()
                .filter(|t| t.aspect == query.span)
                .map(|t| t.polarity)
                .collect();
            if polarities.len() > 1 {
                return Err(TaskError::AmbiguousPolarity {
                    example_id: example.id.clone(),
                    term: query.term.clone(),
                });
            }
            polarities.into_iter().map(AnswerItem::Polarity).collect()
        }
        TaskKind::Aope => {
            if !example.has_opinion_spans() {
                return Err(TaskError::UnsupportedTask {
                    task: instance.task,
                    example_id: example.id.clone(),
                });
            }
            example
                .triplets
                .iter()
                .map(|t| AnswerItem::Pair {
                    aspect: canonicalize(&example.span_text(t.aspect)),
                    opinion: canonicalize(&example.span_text(t.opinion.expect("checked"))),
                })
                .collect()
        }
        TaskKind::Aste => {
            if !example.has_opinion_spans() {
                return Err(TaskError::UnsupportedTask {
                    task: instance.task,
                    example_id: example.id.clone(),
                });
            }
            example
                .triplets
                .iter()
                .map(|t| AnswerItem::Triple {
                    aspect: canonicalize(&example.span_text(t.aspect)),
                    opinion: canonicalize(&example.span_text(t.opinion.expect("checked"))),
                    polarity: t.polarity,
                })
                .collect()
        }
    };
    Ok(GoldTarget {
        task: instance.task,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_aste_v2, DatasetName, Split, Triplet};

    fn corpus_example() -> Example {
        parse_aste_v2(
            "great battery life .####[([1, 2], [0], 'POS')]",
            &DatasetName::Custom("FIXTURE".into()),
            Split::Train,
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn alsc_expands_one_instance_per_distinct_aspect() {
        let e = corpus_example();
        let instances = expand_instances(&e, TaskKind::Alsc).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].instance_id, "FIXTURE/train/0#a0");
        assert_eq!(instances[0].query.as_ref().unwrap().term, "battery life");
    }

    #[test]
    fn aste_expands_exactly_one_instance_without_query() {
        let e = corpus_example();
        let instances = expand_instances(&e, TaskKind::Aste).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(instances[0].query.is_none());
    }

    #[test]
    fn opinionless_example_rejects_extraction_tasks() {
        let mut e = corpus_example();
        e.triplets[0].opinion = None;
        let err = expand_instances(&e, TaskKind::Aope).unwrap_err();
        assert!(matches!(err, TaskError::UnsupportedTask { .. }));
        // ALSC still works
        assert_eq!(expand_instances(&e, TaskKind::Alsc).unwrap().len(), 1);
    }

    #[test]
    fn gold_projections_match_hand_application() {
        let e = corpus_example();
        let alsc = &expand_instances(&e, TaskKind::Alsc).unwrap()[0];
        assert_eq!(
            gold_target(&e, alsc).unwrap().items,
            [AnswerItem::Polarity(Polarity::Pos)].into_iter().collect()
        );

        let aope = &expand_instances(&e, TaskKind::Aope).unwrap()[0];
        assert_eq!(
            gold_target(&e, aope).unwrap().items,
            [AnswerItem::Pair {
                aspect: "battery life".into(),
                opinion: "great".into(),
            }]
            .into_iter()
            .collect()
        );

        let aste = &expand_instances(&e, TaskKind::Aste).unwrap()[0];
        assert_eq!(
            gold_target(&e, aste).unwrap().items,
            [AnswerItem::Triple {
                aspect: "battery life".into(),
                opinion: "great".into(),
                polarity: Polarity::Pos,
            }]
            .into_iter()
            .collect()
        );
    }

    #[test]
    fn zero_triplet_example_has_empty_extraction_gold() {
        let e = parse_aste_v2(
            "ok .####[]",
            &DatasetName::Custom("FIXTURE".into()),
            Split::Test,
        )
        .unwrap()
        .remove(0);
        assert!(expand_instances(&e, TaskKind::Alsc).unwrap().is_empty());
        let aste = &expand_instances(&e, TaskKind::Aste).unwrap()[0];
        assert!(gold_target(&e, aste).unwrap().items.is_empty());
    }

    #[test]
    fn conflicting_polarities_for_one_aspect_are_an_error() {
        let mut e = corpus_example();
        e.triplets.push(Triplet {
            aspect: e.triplets[0].aspect,
            opinion: Some(crate::corpus::Span::new(3, 3)),
            polarity: Polarity::Neg,
        });
        let alsc = &expand_instances(&e, TaskKind::Alsc).unwrap()[0];
        let err = gold_target(&e, alsc).unwrap_err();
        assert!(matches!(err, TaskError::AmbiguousPolarity { .. }));
    }

    #[test]
    fn gold_is_independent_of_triplet_order() {
        let e = parse_aste_v2(
            "keyboard feels cheap but the trackpad is excellent .####[([0], [2], 'NEG'), ([5], [7], 'POS')]",
            &DatasetName::Custom("FIXTURE".into()),
            Split::Train,
        )
        .unwrap()
        .remove(0);
        let mut reversed = e.clone();
        reversed.triplets.reverse();

        for task in TaskKind::ALL {
            let a = expand_instances(&e, task).unwrap();
            let b = expand_instances(&reversed, task).unwrap();
            assert_eq!(a, b, "instances differ for {task}");
            for (ia, ib) in a.iter().zip(&b) {
                assert_eq!(
                    gold_target(&e, ia).unwrap(),
                    gold_target(&reversed, ib).unwrap()
                );
            }
        }
    }

    #[test]
    fn aste_gold_projects_onto_aope_gold() {
        let e = parse_aste_v2(
            "keyboard feels cheap but the trackpad is excellent .####[([0], [2], 'NEG'), ([5], [7], 'POS')]",
            &DatasetName::Custom("FIXTURE".into()),
            Split::Train,
        )
        .unwrap()
        .remove(0);
        let aste = gold_target(&e, &expand_instances(&e, TaskKind::Aste).unwrap()[0]).unwrap();
        let aope = gold_target(&e, &expand_instances(&e, TaskKind::Aope).unwrap()[0]).unwrap();
        let projected: ItemSet = aste
            .items
            .iter()
            .map(|item| match item {
                AnswerItem::Triple { aspect, opinion, .. } => AnswerItem::Pair {
                    aspect: aspect.clone(),
                    opinion: opinion.clone(),
                },
                other => other.clone(),
            })
            .collect();
        assert_eq!(projected, aope.items);
    }
}
