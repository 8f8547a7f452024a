//! Corpus statistics toolkit: windowed co-occurrence counts, skip-gram
//! embeddings, PMI linearity probes, and paraphrase error analysis over
//! analogy datasets.

pub mod bats;
pub mod cooccur;
pub mod corpus;
pub mod linearity;
pub mod paraphrase;
pub mod pci;
pub mod pinv;
pub mod pipeline;
pub mod pmi;
pub mod sgns;
pub mod sparse;
pub mod synthetic;
pub mod util;
