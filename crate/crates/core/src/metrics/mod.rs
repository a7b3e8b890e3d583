//! Distances and similarities used for tree splitting, ranking and schema evaluation.

mod bleu;
mod entailment;
mod metric;
mod normalize;
mod similarity;

pub use bleu::{corpus_bleu, self_bleu, tokenize_13a, BleuConfig, BleuStats, MAX_ORDER};
pub use entailment::{
    entailment_score, entailment_scores, CacheBackend, CachedScore, ConstantBackend,
    EntailmentBackend, EntailmentRequest, Health, OverlapStub, RecordingBackend, RemoteBackend,
    RemoteConfig, TemplateSet,
};
pub use metric::{
    quantize, EntailmentMetric, JaccardMetric, Metric, MetricId, MetricRegistry, QuantizedValue,
    StringSimilarityMetric, TableMetric, ENTAILMENT, JACCARD, STRING_SIMILARITY,
};
pub use normalize::{parse_lemma_table, parse_word_list, TokenNormalizer};
pub use similarity::{jaccard_distance, levenshtein, string_similarity};
