//! Few-shot aspect-based sentiment analysis pipeline.
//!
//! The pipeline runs in two stages. Stage one prepares, for every test
//! sentence, a set of candidate answers (rough predictions ingested from an
//! external backbone model) and a set of shots (training sentences retrieved
//! by embedding similarity). Stage two renders task-specific prompts from
//! those pieces, sends them to a chat-completion model, normalizes the raw
//! responses back into structured predictions, and scores them with micro
//! precision/recall/F1 against the gold annotations.
//!
//! Modules follow the data flow: [`corpus`] loads datasets, [`task`] projects
//! gold triplets into per-task targets, [`embed`] and [`shots`] handle
//! retrieval, [`candidates`] serves backbone predictions, [`prompt`] renders
//! prompt text, [`gateway`] talks to the model (with caching and offline
//! clients), [`normalize`] and [`score`] evaluate, and [`runner`] ties it all
//! together, including the shot-size sweep and cross-dataset transfer runs.

pub mod candidates;
pub mod corpus;
pub mod embed;
pub mod gateway;
pub mod normalize;
pub mod prompt;
pub mod runner;
pub mod score;
pub mod shots;
pub mod task;
