#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agla/token.hpp"

namespace agla {

// "yes" is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool truth_yes, bool predicted_yes);
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct PopeScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero-denominator precision / recall / F1 are reported as 0.
PopeScores pope_scores(const ConfusionCounts& c);

/// One caption: every object mention in order (duplicates kept) and the
/// image's ground-truth object set.
struct ChairInput {
  std::vector<TokenId> mentions;
  std::set<TokenId> truth;
};

struct ChairScores {
  double c_s = 0.0;     // captions with a hallucinated object / captions
  double c_i = 0.0;     // hallucinated mentions / all mentions
  double recall = 0.0;  // distinct correctly mentioned objects / ground-truth objects
};

ChairScores chair_scores(std::span<const ChairInput> inputs);

struct ExtractedObjects {
  std::set<TokenId> objects;
  std::vector<TokenId> mentions;
};

/// Exact-match object extraction against the object vocabulary.
ExtractedObjects extract_objects(std::span<const TokenId> caption,
                                 const std::set<TokenId>& object_vocab);

/// Two yes/no outcomes (correct or not) per image.
struct MmeInput {
  std::vector<bool> correct;
};

struct MmeScores {
  double accuracy_pct = 0.0;
  double accuracy_plus_pct = 0.0;
  double total = 0.0;
};

MmeScores mme_score(std::span<const MmeInput> inputs);

/// Pairwise judging prompt for two image descriptions.
std::string render_judge_prompt(const std::string& response1, const std::string& response2);

/// Named metric rows rendered as an aligned plain-text table.
using MetricRow = std::pair<std::string, std::vector<std::pair<std::string, double>>>;
std::string format_table(const std::vector<MetricRow>& rows, int decimals = 4);

}  // namespace agla
