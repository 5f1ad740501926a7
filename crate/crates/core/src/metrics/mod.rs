//! Automatic evaluation: slot alignment, dialogue-act checks, surface
//! similarity and statistics.

mod alignment;
mod dialogue;
mod lexicon;
mod normalize;
mod similarity;
mod stats;

pub use alignment::{semantic_accuracy, AlignmentReport, SlotMatch};
pub use dialogue::{dialogue_act_match, is_question, question_added, sentences, DaVerdict};
pub use lexicon::{Lexicon, LexiconError};
pub use normalize::{contains_phrase, match_tokens, normalize, year_words};
pub use similarity::{
    chrf, surface_similarity, ChrfScorer, RemoteScorer, ScorePair, ScoreRequest, ScoreResponse,
    ScorerError, SurfaceScorer, CHRF_BETA, CHRF_MAX_ORDER,
};
pub use stats::{paired_t, pearson, word_count, StatsError, StatsResult};
