#include "dashreport/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "dashreport/error.hpp"

namespace dashreport {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current += c < 0x80 ? static_cast<char>(std::tolower(c)) : raw;
    }
  }
  flush();
  return tokens;
}

void Corpus::validate() const {
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.item_id).second) {
      throw InvalidInputError("corpus: duplicate item_id " + item.item_id);
    }
    if (item.references.empty()) {
      throw InvalidInputError("corpus: item " + item.item_id +
                              " has no references");
    }
  }
}

// --- CIDEr-D ----------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens) {
  NgramCounts counts;
  for (int n = 1; n <= kCiderMaxN; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts[std::vector<std::string>(tokens.begin() + i,
                                        tokens.begin() + i + n)];
    }
  }
  return counts;
}

struct TfIdfVector {
  std::array<std::map<std::vector<std::string>, double>, kCiderMaxN> weights;
  std::array<double, kCiderMaxN> norms{};
  std::size_t length = 0;
};

TfIdfVector to_vector(const NgramCounts& counts, std::size_t length,
                      const std::map<std::vector<std::string>, int>& df,
                      double log_items) {
  TfIdfVector v;
  v.length = length;
  for (const auto& [gram, tf] : counts) {
    auto it = df.find(gram);
    double doc_freq = it == df.end() ? 0.0 : it->second;
    double w = tf * (log_items - std::log(std::max(1.0, doc_freq)));
    auto n = gram.size() - 1;
    v.weights[n][gram] = w;
    v.norms[n] += w * w;
  }
  for (auto& nrm : v.norms) nrm = std::sqrt(nrm);
  return v;
}

double cider_similarity(const TfIdfVector& cand, const TfIdfVector& ref) {
  const double delta =
      static_cast<double>(cand.length) - static_cast<double>(ref.length);
  const double penalty =
      std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  double total = 0.0;
  for (int n = 0; n < kCiderMaxN; ++n) {
    if (cand.norms[n] == 0.0 || ref.norms[n] == 0.0) continue;
    double dot = 0.0;
    for (const auto& [gram, w] : cand.weights[n]) {
      auto it = ref.weights[n].find(gram);
      if (it != ref.weights[n].end()) dot += std::min(w, it->second) * it->second;
    }
    total += dot / (cand.norms[n] * ref.norms[n]) * penalty;
  }
  return total;
}

}  // namespace

MetricScores cider_d(const Corpus& corpus) {
  corpus.validate();
  MetricScores out;
  out.metric = "cider_d";
  if (corpus.items.empty()) return out;

  struct Cooked {
    NgramCounts cand;
    std::size_t cand_len;
    std::vector<std::pair<NgramCounts, std::size_t>> refs;
  };
  std::vector<Cooked> cooked;
  cooked.reserve(corpus.items.size());
  std::map<std::vector<std::string>, int> df;
  for (const auto& item : corpus.items) {
    Cooked c;
    auto toks = tokenize(item.candidate);
    c.cand = count_ngrams(toks);
    c.cand_len = toks.size();
    std::set<std::vector<std::string>> in_refs;
    for (const auto& ref : item.references) {
      auto rt = tokenize(ref);
      auto counts = count_ngrams(rt);
      for (const auto& [gram, _] : counts) in_refs.insert(gram);
      c.refs.emplace_back(std::move(counts), rt.size());
    }
    for (const auto& gram : in_refs) ++df[gram];
    cooked.push_back(std::move(c));
  }

  const double log_items = std::log(static_cast<double>(corpus.items.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < cooked.size(); ++i) {
    auto cand = to_vector(cooked[i].cand, cooked[i].cand_len, df, log_items);
    double score = 0.0;
    for (const auto& [counts, len] : cooked[i].refs) {
      score += cider_similarity(cand, to_vector(counts, len, df, log_items));
    }
    score = score / static_cast<double>(cooked[i].refs.size()) /
            kCiderMaxN * kCiderScale;
    out.per_item[corpus.items[i].item_id] = score;
    sum += score;
  }
  out.corpus = sum / static_cast<double>(cooked.size());
  return out;
}

// --- METEOR -----------------------------------------------------------------

namespace {

enum class Link : std::uint8_t { None, Exact, Stem };

struct AlignProblem {
  int m = 0;
  int n = 0;
  std::vector<std::vector<Link>> compat;  // [cand][ref]
  std::vector<int> cand_word, ref_word;   // word ids
  std::vector<int> cand_stem, ref_stem;   // stem-class ids
  std::vector<int> exact_target;          // per word id
  std::vector<int> stem_target;           // per stem id
  int total_target = 0;
};

AlignProblem make_problem(const std::vector<std::string>& cand,
                          const std::vector<std::string>& ref) {
  AlignProblem p;
  p.m = static_cast<int>(cand.size());
  p.n = static_cast<int>(ref.size());
  std::unordered_map<std::string, int> word_ids, stem_ids;
  std::vector<int> word_stem;
  auto word_id = [&](const std::string& w) {
    auto [it, fresh] = word_ids.emplace(w, static_cast<int>(word_ids.size()));
    if (fresh) {
      auto s = porter_stem(w);
      auto [sit, _] = stem_ids.emplace(s, static_cast<int>(stem_ids.size()));
      word_stem.push_back(sit->second);
    }
    return it->second;
  };
  for (const auto& w : cand) p.cand_word.push_back(word_id(w));
  for (const auto& w : ref) p.ref_word.push_back(word_id(w));
  for (int w : p.cand_word) p.cand_stem.push_back(word_stem[w]);
  for (int w : p.ref_word) p.ref_stem.push_back(word_stem[w]);

  const auto words = word_ids.size();
  const auto stems = stem_ids.size();
  std::vector<int> cw(words), rw(words);
  for (int w : p.cand_word) ++cw[w];
  for (int w : p.ref_word) ++rw[w];
  p.exact_target.resize(words);
  std::vector<int> left_c(stems), left_r(stems);
  for (std::size_t w = 0; w < words; ++w) {
    p.exact_target[w] = std::min(cw[w], rw[w]);
    left_c[word_stem[w]] += cw[w] - p.exact_target[w];
    left_r[word_stem[w]] += rw[w] - p.exact_target[w];
    p.total_target += p.exact_target[w];
  }
  p.stem_target.resize(stems);
  for (std::size_t s = 0; s < stems; ++s) {
    p.stem_target[s] = std::min(left_c[s], left_r[s]);
    p.total_target += p.stem_target[s];
  }

  p.compat.assign(p.m, std::vector<Link>(p.n, Link::None));
  for (int i = 0; i < p.m; ++i) {
    for (int j = 0; j < p.n; ++j) {
      if (p.cand_word[i] == p.ref_word[j]) {
        p.compat[i][j] = Link::Exact;
      } else if (p.cand_stem[i] == p.ref_stem[j]) {
        p.compat[i][j] = Link::Stem;
      }
    }
  }
  return p;
}

int count_chunks(const std::vector<int>& pairs) {
  int chunks = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i] < 0) continue;
    bool continues = i > 0 && pairs[i - 1] >= 0 && pairs[i - 1] + 1 == pairs[i];
    if (!continues) ++chunks;
  }
  return chunks;
}

MeteorAlignment finish(const AlignProblem& p, std::vector<int> pairs) {
  MeteorAlignment a;
  a.pairs = std::move(pairs);
  for (int i = 0; i < p.m; ++i) {
    int j = a.pairs[i];
    if (j < 0) continue;
    ++a.matches;
    if (p.compat[i][j] == Link::Exact) ++a.exact_matches;
  }
  a.chunks = count_chunks(a.pairs);
  return a;
}

// Repeatedly takes the longest run of consecutive compatible pairs of the
// given kind among unused positions (leftmost in the candidate on ties).
void greedy_stage(const AlignProblem& p, Link kind, std::vector<int>& pairs,
                  std::vector<char>& ref_used) {
  for (;;) {
    int best_len = 0, best_i = -1, best_j = -1;
    for (int i = 0; i < p.m; ++i) {
      if (pairs[i] >= 0) continue;
      for (int j = 0; j < p.n; ++j) {
        if (ref_used[j] || p.compat[i][j] != kind) continue;
        int len = 0;
        while (i + len < p.m && j + len < p.n && pairs[i + len] < 0 &&
               !ref_used[j + len] && p.compat[i + len][j + len] == kind) {
          ++len;
        }
        if (len > best_len) {
          best_len = len;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_len == 0) return;
    for (int d = 0; d < best_len; ++d) {
      pairs[best_i + d] = best_j + d;
      ref_used[best_j + d] = 1;
    }
  }
}

class ChunkSearch {
 public:
  ChunkSearch(const AlignProblem& p, std::vector<int> seed, long budget)
      : p_(p),
        best_(std::move(seed)),
        budget_(budget),
        pairs_(p.m, -1),
        ref_used_(p.n, 0),
        exact_need_(p.exact_target),
        stem_need_(p.stem_target),
        cand_left_word_(p.exact_target.size(), 0),
        ref_left_word_(p.exact_target.size(), 0) {
    best_links_ = p_.total_target - count_chunks(best_);
    for (int w : p.cand_word) ++cand_left_word_[w];
    for (int w : p.ref_word) ++ref_left_word_[w];
    word_stem_.assign(p.exact_target.size(), 0);
    for (int i = 0; i < p.m; ++i) word_stem_[p.cand_word[i]] = p.cand_stem[i];
    for (int j = 0; j < p.n; ++j) word_stem_[p.ref_word[j]] = p.ref_stem[j];
  }

  std::vector<int> run() {
    if (p_.total_target > 0) search(0, 0, 0);
    return best_;
  }

 private:
  // Remaining positions can still supply every outstanding exact and stem
  // match.
  bool feasible() const {
    std::vector<int> cand_spare(stem_need_.size(), 0), ref_spare(stem_need_.size(), 0);
    for (std::size_t w = 0; w < exact_need_.size(); ++w) {
      if (cand_left_word_[w] < exact_need_[w]) return false;
      if (ref_left_word_[w] < exact_need_[w]) return false;
      cand_spare[word_stem_[w]] += cand_left_word_[w] - exact_need_[w];
      ref_spare[word_stem_[w]] += ref_left_word_[w] - exact_need_[w];
    }
    for (std::size_t s = 0; s < stem_need_.size(); ++s) {
      if (cand_spare[s] < stem_need_[s] || ref_spare[s] < stem_need_[s]) {
        return false;
      }
    }
    return true;
  }

  void search(int i, int matched, int links) {
    if (--budget_ < 0) return;
    if (links + (p_.total_target - matched) <= best_links_) return;
    if (i == p_.m) {
      if (matched == p_.total_target) {
        best_links_ = links;
        best_ = pairs_;
      }
      return;
    }
    const int w = p_.cand_word[i];
    --cand_left_word_[w];

    // Extending the previous pair first finds good bounds early.
    std::vector<int> order;
    int prev = i > 0 ? pairs_[i - 1] : -1;
    if (prev >= 0 && prev + 1 < p_.n) order.push_back(prev + 1);
    for (int j = 0; j < p_.n; ++j) {
      if (j != (prev >= 0 ? prev + 1 : -1)) order.push_back(j);
    }
    for (int j : order) {
      if (ref_used_[j] || p_.compat[i][j] == Link::None) continue;
      const int rw = p_.ref_word[j];
      const bool exact = p_.compat[i][j] == Link::Exact;
      const int s = p_.cand_stem[i];
      if (exact ? exact_need_[w] == 0 : stem_need_[s] == 0) continue;
      if (exact) {
        --exact_need_[w];
      } else {
        --stem_need_[s];
      }
      ref_used_[j] = 1;
      --ref_left_word_[rw];
      pairs_[i] = j;
      if (feasible()) {
        search(i + 1, matched + 1, links + (prev >= 0 && prev + 1 == j ? 1 : 0));
      }
      pairs_[i] = -1;
      ++ref_left_word_[rw];
      ref_used_[j] = 0;
      if (exact) {
        ++exact_need_[w];
      } else {
        ++stem_need_[s];
      }
    }
    if (feasible()) search(i + 1, matched, links);
    ++cand_left_word_[w];
  }

  const AlignProblem& p_;
  std::vector<int> best_;
  int best_links_ = 0;
  long budget_;
  std::vector<int> pairs_;
  std::vector<char> ref_used_;
  std::vector<int> exact_need_;
  std::vector<int> stem_need_;
  std::vector<int> cand_left_word_;
  std::vector<int> ref_left_word_;
  std::vector<int> word_stem_;
};

}  // namespace

MeteorAlignment meteor_align_greedy(const std::vector<std::string>& candidate,
                                    const std::vector<std::string>& reference) {
  auto p = make_problem(candidate, reference);
  std::vector<int> pairs(p.m, -1);
  std::vector<char> ref_used(p.n, 0);
  greedy_stage(p, Link::Exact, pairs, ref_used);
  greedy_stage(p, Link::Stem, pairs, ref_used);
  return finish(p, std::move(pairs));
}

MeteorAlignment meteor_align(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference,
                             long node_budget) {
  auto p = make_problem(candidate, reference);
  std::vector<int> pairs(p.m, -1);
  std::vector<char> ref_used(p.n, 0);
  greedy_stage(p, Link::Exact, pairs, ref_used);
  greedy_stage(p, Link::Stem, pairs, ref_used);
  ChunkSearch search(p, std::move(pairs), node_budget);
  return finish(p, search.run());
}

double meteor_from_alignment(const MeteorAlignment& a, std::size_t cand_len,
                             std::size_t ref_len, const MeteorParams& p) {
  if (a.matches == 0 || cand_len == 0 || ref_len == 0) return 0.0;
  const double m = a.matches;
  const double precision = m / static_cast<double>(cand_len);
  const double recall = m / static_cast<double>(ref_len);
  const double fmean =
      precision * recall / (p.alpha * precision + (1.0 - p.alpha) * recall);
  const double penalty = p.gamma * std::pow(a.chunks / m, p.beta);
  return fmean * (1.0 - penalty);
}

double meteor_sentence(std::string_view candidate,
                       const std::vector<std::string>& references,
                       const MeteorParams& p) {
  auto cand = tokenize(candidate);
  double best = 0.0;
  for (const auto& ref : references) {
    auto rt = tokenize(ref);
    auto a = meteor_align(cand, rt);
    best = std::max(best, meteor_from_alignment(a, cand.size(), rt.size(), p));
  }
  return best;
}

MetricScores meteor(const Corpus& corpus, const MeteorParams& p) {
  corpus.validate();
  MetricScores out;
  out.metric = "meteor";
  if (corpus.items.empty()) return out;
  double sum = 0.0;
  for (const auto& item : corpus.items) {
    double s = meteor_sentence(item.candidate, item.references, p);
    out.per_item[item.item_id] = s;
    sum += s;
  }
  out.corpus = sum / static_cast<double>(corpus.items.size());
  return out;
}

// --- final score / leaderboard ---------------------------------------------

double round_half_up(double value, int decimals) {
  const bool negative = value < 0;
  const double magnitude = std::fabs(value);
  // Snap to 1e-8 first so 0.14199999999 and 0.14200000001 agree.
  const auto fine = static_cast<long long>(std::llround(magnitude * 1e8));
  long long step = 1;
  for (int d = decimals; d < 8; ++d) step *= 10;
  long long coarse = (fine + step / 2) / step;
  double scale = std::pow(10.0, decimals);
  double out = static_cast<double>(coarse) / scale;
  return negative ? -out : out;
}

double final_score(std::optional<double> spice, std::optional<double> meteor_v,
                   std::optional<double> cider_v) {
  std::string missing;
  if (!spice) missing += " spice";
  if (!meteor_v) missing += " meteor";
  if (!cider_v) missing += " cider_d";
  if (!missing.empty()) {
    throw UndefinedScoreError("final score undefined; missing:" + missing);
  }
  return round_half_up((*spice + *meteor_v + *cider_v) / 3.0, 4);
}

std::vector<LeaderboardRow> build_leaderboard(
    const std::vector<LeaderboardEntry>& entries) {
  std::set<std::string> names;
  std::vector<LeaderboardRow> rows;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second) {
      throw InvalidInputError("leaderboard: duplicate entry name " + e.name);
    }
    rows.push_back({0, e, final_score(e.spice, e.meteor, e.cider_d)});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const LeaderboardRow& a, const LeaderboardRow& b) {
                     return a.final_score > b.final_score;
                   });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank = (i > 0 && rows[i].final_score == rows[i - 1].final_score)
                       ? rows[i - 1].rank
                       : static_cast<int>(i) + 1;
  }
  return rows;
}

// --- file formats -----------------------------------------------------------

Corpus load_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto doc = nlohmann::json::parse(line);
      CorpusItem item;
      item.item_id = doc.at("item_id").get<std::string>();
      item.candidate = doc.at("candidate").get<std::string>();
      item.references = doc.at("references").get<std::vector<std::string>>();
      corpus.items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                           e.what(),
                       "", line_no);
    }
  }
  corpus.validate();
  return corpus;
}

SpiceSidecar parse_spice_sidecar(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("spice sidecar: expected an object", "");
  SpiceSidecar out;
  auto read_map = [](const nlohmann::json& m, std::map<std::string, double>& dst,
                     const std::string& what) {
    if (!m.is_object()) throw ParseError(what + ": expected an object", what);
    for (const auto& [k, v] : m.items()) {
      if (!v.is_number()) throw ParseError(what + "." + k + ": expected a number", k);
      dst[k] = v.get<double>();
    }
  };
  if (doc.contains("spice") || doc.contains("corpus_overrides")) {
    if (doc.contains("spice")) read_map(doc["spice"], out.per_item, "spice");
    if (doc.contains("corpus_overrides")) {
      read_map(doc["corpus_overrides"], out.corpus_overrides, "corpus_overrides");
    }
  } else {
    read_map(doc, out.per_item, "spice");
  }
  return out;
}

SpiceSidecar load_spice_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SPICE sidecar " + path.string());
  try {
    return parse_spice_sidecar(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), "");
  }
}

nlohmann::ordered_json metric_scores_to_json(const MetricScores& scores) {
  nlohmann::ordered_json doc;
  doc["metric"] = scores.metric;
  doc["corpus"] = scores.corpus;
  nlohmann::ordered_json items = nlohmann::ordered_json::object();
  for (const auto& [id, s] : scores.per_item) items[id] = s;
  doc["per_item"] = std::move(items);
  return doc;
}

}  // namespace dashreport
