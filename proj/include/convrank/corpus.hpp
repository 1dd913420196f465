#ifndef CONVRANK_CORPUS_HPP
#define CONVRANK_CORPUS_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convrank/textproc.hpp"
#include "convrank/types.hpp"

namespace convrank {

inline constexpr int kTranscriptFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

/// Dataset polarity thresholds on the normalized target.
inline constexpr double kPositiveThreshold = 0.7;
inline constexpr double kNegativeThreshold = 0.3;

// ---------------------------------------------------------------------------
// Transcript ingestion / serialization (line-oriented JSON)
// ---------------------------------------------------------------------------

/// Reads a transcript file: a format_version header line followed by one
/// dialogue record per line. Throws ParseError with the offending line
/// number, DataError on duplicate dialogue ids.
Corpus ingest_transcripts(const std::string& path);

/// Writes the corpus in the same format ingest_transcripts reads.
void write_transcripts(const Corpus& corpus, const std::string& path);

bool operator==(const Turn& a, const Turn& b);
bool operator==(const Dialogue& a, const Dialogue& b);

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

struct FilterConfig {
  /// Bots whose turns cannot be treated as natural social interaction.
  std::unordered_set<std::string> bot_blacklist;
  /// true: remove dialogues with length >= p95 (the literal outlier rule);
  /// false (default): remove only length > p95, which keeps constant-length
  /// corpora intact.
  bool percentile_strict = false;
};

struct FilterReport {
  std::size_t input_dialogues = 0;
  std::size_t kept_dialogues = 0;
  std::size_t removed_short = 0;      // length < 3 after blacklist stripping
  std::size_t removed_long = 0;       // percentile outliers
  std::size_t removed_emptied = 0;    // all turns blacklisted away
  std::size_t turns_removed = 0;      // blacklisted system turns
  int length_cap = 0;                 // the computed p95
  double fraction_removed = 0.0;
};

/// Nearest-rank percentile: the value at rank ceil(p * n) of the sorted list.
int nearest_rank_percentile(std::vector<int> values, double p);

/// Strips blacklisted system turns, then removes dialogues shorter than 3
/// turns and percentile-outlier dialogues. The outlier cut runs once per
/// corpus (the result is marked trimmed), so filtering is idempotent.
Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config,
                     FilterReport* report = nullptr);

// ---------------------------------------------------------------------------
// Target normalization
// ---------------------------------------------------------------------------

/// rating r -> (r-1)/4 over rated dialogues; length L -> (L-min)/(max-min)
/// over the whole (already filtered) corpus. Throws DataError when the
/// length range is degenerate.
std::unordered_map<std::string, double> normalize_targets(const Corpus& corpus, Signal signal);

// ---------------------------------------------------------------------------
// Supervised dataset construction
// ---------------------------------------------------------------------------

struct BuildConfig {
  Signal signal = Signal::length;
  std::size_t size = 0;       // total instances across the three splits; even
  std::uint64_t seed = 42;
};

/// Builds the ranking context for the response at `response_index`:
/// up to the 3 most recent system and 3 most recent user turns before it.
RankingContext make_context(const Dialogue& dialogue, std::size_t response_index,
                            const text::Annotator& annotator);

/// Samples `config.size` context-response instances, balanced exactly 50/50
/// between positive (target > 0.7) and negative (target < 0.3) dialogues,
/// split 8:1:1 with no dialogue spanning two splits. Deterministic under
/// the seed. Throws DataError when the corpus cannot supply a balanced set
/// of the requested size (the message states the achievable maximum).
Dataset build_dataset(const Corpus& corpus, const text::Annotator& annotator,
                      const BuildConfig& config);

// ---------------------------------------------------------------------------
// Explicit-feedback evaluation set
// ---------------------------------------------------------------------------

struct FeedbackExtractionReport {
  std::size_t flagged_turns = 0;
  std::size_t skipped_no_preceding_system = 0;
  std::size_t tuples = 0;
};

/// For each user turn flagged as explicit positive feedback, emits a tuple
/// whose good_response is the immediately preceding system turn and whose
/// bad_response is a system turn sampled uniformly from other dialogues.
std::vector<FeedbackTuple> extract_feedback_set(const Corpus& corpus,
                                                const text::Annotator& annotator,
                                                const text::FeedbackDetector& detector,
                                                std::uint64_t seed,
                                                FeedbackExtractionReport* report = nullptr);

// ---------------------------------------------------------------------------
// Dataset / tuple files (line-oriented JSON with format_version header)
// ---------------------------------------------------------------------------

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

void write_tuples(const std::vector<FeedbackTuple>& tuples, const std::string& path);
std::vector<FeedbackTuple> read_tuples(const std::string& path);

}  // namespace convrank

#endif  // CONVRANK_CORPUS_HPP
