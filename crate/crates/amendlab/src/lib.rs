//! Toolkit for predicting amendments to clinical-trial eligibility criteria.
//!
//! The pipeline runs corpus ingestion, revision diffing, amendment labeling
//! (rule engine or LLM checks), change-aware masking-plan generation for MLM
//! pretraining, a feature-hashing logistic-regression baseline, and the
//! statistical evaluation protocol (bootstrap, DeLong's test).

pub mod camlm;
pub mod corpus;
pub mod diffcore;
pub mod eval;
pub mod labeling;
pub mod model;
pub mod rng;
pub mod textprep;
