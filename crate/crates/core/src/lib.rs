//! Inter-word distance distributions of genomic words and a peak-based
//! dissimilarity between the distributions of a word and its reversed
//! complement.
//!
//! Modules follow the data flow:
//! [`seq_io`] splits FASTA into ACGT segments, [`distances`] counts gaps
//! between consecutive occurrences of every k-mer, [`distributions`] turns
//! counts into relative frequencies, [`peaks`] finds the strongest windows,
//! [`dissim`] compares peak sets, and [`analysis`] runs the whole pair
//! ranking. [`nullmodel`] generates strand-symmetric control sequences.

pub mod analysis;
pub mod archive;
pub mod distances;
pub mod dissim;
pub mod distributions;
pub mod nullmodel;
pub mod peaks;
pub mod report;
pub mod seq_io;
pub mod words;

pub use analysis::{localize, run_pipeline, PairRecord, PairStatus, PipelineParams, PipelineReport};
pub use archive::{load_archive, save_archive, ArchiveError};
pub use distances::{count_distances, count_fasta, count_fasta_files, CountArchive, DistanceHistogram};
pub use dissim::{distribution_dissimilarity, DissimilarityParams};
pub use distributions::{quantile, to_distribution, DistanceDistribution};
pub use peaks::{find_peaks, Peak, PeakSet};
pub use seq_io::{open_fasta, SequenceSegment};
pub use words::{enumerate_pairs, SymmetricPair, WordCode};
