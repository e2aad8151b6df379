#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dashreport {

// Lowercases ASCII, splits on whitespace, and emits every ASCII punctuation
// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

// Classic Porter (1980) suffix stripper. Input is expected lowercase.
std::string porter_stem(std::string_view word);

struct CorpusItem {
  std::string item_id;
  std::string candidate;
  std::vector<std::string> references;
};

struct Corpus {
  std::vector<CorpusItem> items;

  // Throws InvalidInputError on duplicate ids or an item without references.
  void validate() const;
};

struct MetricScores {
  std::string metric;
  std::map<std::string, double> per_item;
  double corpus = 0.0;  // mean of per-item scores
};

inline constexpr int kCiderMaxN = 4;
inline constexpr double kCiderSigma = 6.0;
inline constexpr double kCiderScale = 10.0;

// CIDEr-D: TF-IDF weighted n-gram (n = 1..4) cosine with clipped candidate
// weights and a Gaussian length penalty; document frequencies come from the
// reference sets of the corpus. Per-item scores lie in [0, 10].
MetricScores cider_d(const Corpus& corpus);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorAlignment {
  int matches = 0;
  int exact_matches = 0;
  int chunks = 0;
  // pairs[i] = reference position aligned to candidate position i, or -1.
  std::vector<int> pairs;
};

// Maximal exact-then-stem unigram alignment with the fewest chunks. Seeds
// with a greedy longest-run alignment and refines it by branch and bound;
// `node_budget` caps the refinement on very long sentences.
MeteorAlignment meteor_align(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference,
                             long node_budget = 2'000'000);

// Greedy longest-run alignment only (the refinement seed).
MeteorAlignment meteor_align_greedy(const std::vector<std::string>& candidate,
                                    const std::vector<std::string>& reference);

double meteor_from_alignment(const MeteorAlignment& a, std::size_t cand_len,
                             std::size_t ref_len, const MeteorParams& p = {});

// Sentence score against several references: max over references.
double meteor_sentence(std::string_view candidate,
                       const std::vector<std::string>& references,
                       const MeteorParams& p = {});

MetricScores meteor(const Corpus& corpus, const MeteorParams& p = {});

// Rounds half away from zero at `decimals` places, after snapping away
// binary representation noise below 1e-8.
double round_half_up(double value, int decimals);

// Mean of the three headline metrics, rounded half-up to 4 decimals. Throws
// UndefinedScoreError when any input is absent.
double final_score(std::optional<double> spice, std::optional<double> meteor,
                   std::optional<double> cider_d);

struct LeaderboardEntry {
  std::string name;
  double spice = 0;
  double meteor = 0;
  double cider_d = 0;
};

struct LeaderboardRow {
  int rank = 0;
  LeaderboardEntry entry;
  double final_score = 0;
};

// Sorted by final score descending; equal (rounded) finals share a rank
// and the next rank skips (1, 1, 3).
std::vector<LeaderboardRow> build_leaderboard(
    const std::vector<LeaderboardEntry>& entries);

// JSON lines {item_id, candidate, references[]}.
Corpus load_corpus_jsonl(const std::filesystem::path& path);

// Per-item SPICE values plus optional injected corpus-level scores.
struct SpiceSidecar {
  std::map<std::string, double> per_item;
  std::map<std::string, double> corpus_overrides;  // metric -> corpus score
};

// Accepts either a flat map item_id -> real, or
// {"spice": {item_id: real}, "corpus_overrides": {metric: real}}.
SpiceSidecar load_spice_sidecar(const std::filesystem::path& path);
SpiceSidecar parse_spice_sidecar(const nlohmann::json& doc);

nlohmann::ordered_json metric_scores_to_json(const MetricScores& scores);

}  // namespace dashreport
