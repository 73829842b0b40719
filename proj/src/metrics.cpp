#include "agla/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "agla/errors.hpp"

namespace agla {

void ConfusionCounts::add(bool truth_yes, bool predicted_yes) {
  if (truth_yes) {
    predicted_yes ? ++tp : ++fn;
  } else {
    predicted_yes ? ++fp : ++tn;
  }
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

PopeScores pope_scores(const ConfusionCounts& c) {
  require(c.total() >= 1, "pope_scores: no predictions");
  PopeScores s;
  s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  s.precision = ratio(double(c.tp), double(c.tp + c.fp));
  s.recall = ratio(double(c.tp), double(c.tp + c.fn));
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

ChairScores chair_scores(std::span<const ChairInput> inputs) {
  require(!inputs.empty(), "chair_scores: no captions");
  std::size_t hallucinated_captions = 0;
  std::size_t hallucinated_mentions = 0;
  std::size_t mentions = 0;
  std::size_t accurate = 0;
  std::size_t truth_total = 0;
  for (const ChairInput& in : inputs) {
    bool any = false;
    for (TokenId m : in.mentions) {
      ++mentions;
      if (!in.truth.count(m)) {
        ++hallucinated_mentions;
        any = true;
      }
    }
    if (any) ++hallucinated_captions;
    const std::set<TokenId> distinct(in.mentions.begin(), in.mentions.end());
    for (TokenId m : distinct)
      if (in.truth.count(m)) ++accurate;
    truth_total += in.truth.size();
  }
  ChairScores s;
  s.c_s = static_cast<double>(hallucinated_captions) / static_cast<double>(inputs.size());
  s.c_i = ratio(double(hallucinated_mentions), double(mentions));
  s.recall = ratio(double(accurate), double(truth_total));
  return s;
}

ExtractedObjects extract_objects(std::span<const TokenId> caption,
                                 const std::set<TokenId>& object_vocab) {
  ExtractedObjects out;
  for (TokenId t : caption) {
    if (!object_vocab.count(t)) continue;
    out.mentions.push_back(t);
    out.objects.insert(t);
  }
  return out;
}

MmeScores mme_score(std::span<const MmeInput> inputs) {
  require(!inputs.empty(), "mme_score: no images");
  std::size_t correct = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& q = inputs[i].correct;
    if (q.size() != 2)
      throw InputError("mme_score: image " + std::to_string(i) + " has " + std::to_string(q.size()) +
                       " outcomes, expected 2");
    correct += static_cast<std::size_t>(q[0]) + static_cast<std::size_t>(q[1]);
    if (q[0] && q[1]) ++both;
  }
  MmeScores s;
  s.accuracy_pct = 100.0 * static_cast<double>(correct) / static_cast<double>(2 * inputs.size());
  s.accuracy_plus_pct = 100.0 * static_cast<double>(both) / static_cast<double>(inputs.size());
  s.total = s.accuracy_pct + s.accuracy_plus_pct;
  return s;
}

std::string render_judge_prompt(const std::string& response1, const std::string& response2) {
  require(!response1.empty() && !response2.empty(), "render_judge_prompt: empty response");
  std::string out;
  out += "Description:\n";
  out += "AI that scores image description accuracy and detailedness.\n\n";
  out += "Instructions:\n";
  out +=
      "You are an AI designed to evaluate and score the performance of two AI assistants in "
      "describing a given image. Your primary focus is on the accuracy and detailedness of their "
      "descriptions. You will assess the accuracy by checking for hallucinations - any part of the "
      "description that is inconsistent with the image content. For detailedness, you will "
      "consider how rich the response is in necessary details, excluding any hallucinated parts. "
      "You will provide scores on a scale from 1 to 10 for each assistant separately, based on "
      "these criteria. After scoring, you will offer an explanation for your evaluation, ensuring "
      "it is free from bias and not influenced by the order of presentation of the responses.\n\n";
  out += "Input format:\n";
  out += "[Assistant 1]\n" + response1 + "\n[End of Assistant 1]\n\n";
  out += "[Assistant 2]\n" + response2 + "\n[End of Assistant 2]\n\n";
  out += "Output format:\n";
  out += "Accuracy:\nScores of the two answers:\nReason:\n\n";
  out += "Detailedness:\nScores of the two answers:\nReason:\n";
  return out;
}

std::string format_table(const std::vector<MetricRow>& rows, int decimals) {
  if (rows.empty()) return {};
  std::vector<std::string> header{""};
  for (const auto& [name, value] : rows.front().second) header.push_back(name);
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& [label, metrics] : rows) {
    require(metrics.size() + 1 == header.size(), "format_table: ragged rows");
    std::vector<std::string> line{label};
    for (const auto& [name, value] : metrics) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
      line.emplace_back(buf);
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::ostringstream os;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        os << line[c] << std::string(width[c] - line[c].size(), ' ');
      } else {
        os << "  " << std::string(width[c] - line[c].size(), ' ') << line[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace agla
