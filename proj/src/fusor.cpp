#include "imgseek/fusor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace imgseek {

namespace {

const std::vector<std::string>& ruleNames() {
  static const std::vector<std::string> names{"combSUM", "combMNZ", "combMAX", "combMIN", "linear", "borda", "rrf"};
  return names;
}

bool isRankBased(const std::string& rule) { return rule == "borda" || rule == "rrf"; }

struct Accumulator {
  double sum = 0.0;
  double max = -std::numeric_limits<double>::infinity();
  double min = std::numeric_limits<double>::infinity();
  double linear = 0.0;
  double rankSum = 0.0;
  int present = 0;
};

void validate(const std::vector<ScoredList>& lists, const FusionRule& rule) {
  if (lists.empty()) throw Error(ErrorCode::EmptyInput, "fusion needs at least one list");
  if (std::find(ruleNames().begin(), ruleNames().end(), rule.name) == ruleNames().end())
    throw Error(ErrorCode::UnknownComponent, "Fusor '" + rule.name + "' is not registered");
  if (rule.name == "linear") {
    if (rule.weights.size() != lists.size())
      throw Error(ErrorCode::WeightMismatch, std::to_string(rule.weights.size()) + " weights for " +
                                                 std::to_string(lists.size()) + " lists");
    double total = 0.0;
    for (double w : rule.weights) {
      if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorCode::WeightsNotNormalized, "linear weights must lie in [0, 1]");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::WeightsNotNormalized, "linear weights must sum to 1");
  }
  if (rule.name == "rrf" && !(rule.c >= 0.0)) throw Error(ErrorCode::InvalidParameter, "rrf constant must be >= 0");
}

}  // namespace

ScoredList minMaxNormalized(const ScoredList& list) {
  ScoredList out = list;
  if (list.empty()) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& e : list.entries) {
    lo = std::min(lo, e.score);
    hi = std::max(hi, e.score);
  }
  for (auto& e : out.entries) e.score = hi > lo ? (e.score - lo) / (hi - lo) : 1.0;
  return out;
}

ScoredList fuse(const std::vector<ScoredList>& lists, const FusionRule& rule, std::size_t topN) {
  validate(lists, rule);
  const bool rankBased = isRankBased(rule.name);

  std::unordered_map<std::string, Accumulator> acc;
  std::vector<std::string> order;  // first-seen order, for a stable union
  for (std::size_t k = 0; k < lists.size(); ++k) {
    ScoredList list = toSimilarity(lists[k]);
    if (!list.wellFormed())
      throw Error(ErrorCode::InvalidParameter, "input list " + std::to_string(k) + " is unsorted or has duplicate ids");
    if (rule.normalizeScores && !rankBased) list = minMaxNormalized(list);
    for (std::size_t pos = 0; pos < list.entries.size(); ++pos) {
      const auto& e = list.entries[pos];
      auto [it, inserted] = acc.try_emplace(e.imageId);
      if (inserted) order.push_back(e.imageId);
      Accumulator& a = it->second;
      const double rank = static_cast<double>(pos + 1);
      a.sum += e.score;
      a.max = std::max(a.max, e.score);
      a.min = std::min(a.min, e.score);
      if (rule.name == "linear") a.linear += rule.weights[k] * e.score;
      if (rule.name == "borda") a.rankSum += 1.0 / rank;
      if (rule.name == "rrf") a.rankSum += 1.0 / (rule.c + rank);
      ++a.present;
    }
  }

  ScoredList out;
  out.polarity = Polarity::Similarity;
  out.sourceTag = rule.name;
  out.entries.reserve(order.size());
  for (const auto& id : order) {
    const Accumulator& a = acc.at(id);
    double score = 0.0;
    if (rule.name == "combSUM")
      score = a.sum;
    else if (rule.name == "combMNZ")
      score = a.present * a.sum;
    else if (rule.name == "combMAX")
      score = a.max;
    else if (rule.name == "combMIN")
      score = a.min;
    else if (rule.name == "linear")
      score = a.linear;
    else
      score = a.rankSum;
    out.entries.push_back({id, score});
  }
  out.sortAndTruncate(topN);
  return out;
}

namespace {

class RuleFusor final : public Fusor {
 public:
  explicit RuleFusor(FusionRule rule) : rule_(std::move(rule)) {}
  ScoredList fuse(const std::vector<ScoredList>& lists, std::size_t topN) const override {
    return imgseek::fuse(lists, rule_, topN);
  }
  const FusionRule& rule() const override { return rule_; }

 private:
  FusionRule rule_;
};

}  // namespace

std::shared_ptr<const Fusor> makeFusor(const FusionRule& rule) {
  if (std::find(ruleNames().begin(), ruleNames().end(), rule.name) == ruleNames().end())
    throw Error(ErrorCode::UnknownComponent, "Fusor '" + rule.name + "' is not registered");
  return std::make_shared<const RuleFusor>(rule);
}

const Registry<Fusor>& fusorRegistry() {
  static const Registry<Fusor> registry = [] {
    Registry<Fusor> r("Fusor");
    for (const auto& name : ruleNames()) {
      std::set<std::string> keys{"normalize"};
      if (name == "linear") keys.insert("weights");
      if (name == "rrf") keys.insert("c");
      r.add(name, keys, [name](const Params& p) {
        FusionRule rule;
        rule.name = name;
        rule.normalizeScores = paramOr(p, "normalize", true);
        if (p.contains("weights")) rule.weights = p.at("weights").get<std::vector<double>>();
        rule.c = paramOr(p, "c", 60.0);
        if (rule.c < 0) throw Error(ErrorCode::InvalidParameter, "rrf constant must be >= 0");
        return makeFusor(rule);
      });
    }
    return r;
  }();
  return registry;
}

std::vector<std::string> fusionRuleNames() { return ruleNames(); }

}  // namespace imgseek
