//! Corpus ingestion: JSONL records, CSEM embeddings, content filters and hour bins.

mod bins;
mod embeddings;
mod filter;
mod records;

pub use bins::{bin_by_hour, BinIndex, BinKey, BinResolution};
pub use embeddings::{
    load_embeddings, load_embeddings_for_ids, read_csem, write_csem, CsemFile, EmbeddingLoad,
    EmbeddingMatrix, NormCheck, CSEM_MAGIC, CSEM_VERSION, NORM_TOLERANCE,
};
pub use filter::{filter_records, FilterPolicy, FilterReport, FilterRule};
pub use records::{parse_records, parse_records_from_reader, write_records, RecordSet, SubmissionRecord};
