#include "imgseek/similarity.hpp"

#include <bit>
#include <map>

namespace imgseek {

std::size_t hamming(const BinaryDescriptorVector& p, const BinaryDescriptorVector& q) {
  if (p.size() != q.size())
    throw Error(ErrorCode::DimensionMismatch,
                "bit lengths differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.words().size(); ++i)
    n += static_cast<std::size_t>(std::popcount(p.words()[i] ^ q.words()[i]));
  return n;
}

std::size_t frequentItemSimilarity(const std::vector<int>& p, const std::vector<int>& q) {
  std::size_t n = 0;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() && b != q.end()) {
    if (*a < *b)
      ++a;
    else if (*b < *a)
      ++b;
    else {
      ++n;
      ++a;
      ++b;
    }
  }
  return n;
}

namespace {

using Ref = Eigen::Ref<const Vector>;

const std::map<std::string, Metric>& metrics() {
  static const std::map<std::string, Metric> table = [] {
    std::map<std::string, Metric> m;
    auto add = [&m](std::string name, Polarity pol, bool nonNeg, auto fn) {
      m.emplace(name, Metric{name, pol, nonNeg, fn});
    };
    add("euclidean", Polarity::Distance, false, [](const Ref& p, const Ref& q) { return euclidean(p, q); });
    add("manhattan", Polarity::Distance, false, [](const Ref& p, const Ref& q) { return manhattan(p, q); });
    add("canberra", Polarity::Distance, false, [](const Ref& p, const Ref& q) { return canberra(p, q); });
    add("chi2", Polarity::Distance, true, [](const Ref& p, const Ref& q) { return chi2(p, q); });
    add("jeffrey", Polarity::Distance, false, [](const Ref& p, const Ref& q) { return jeffrey(p, q); });
    add("jeffrey-standard", Polarity::Distance, true,
        [](const Ref& p, const Ref& q) { return jeffreyStandard(p, q); });
    add("histogram-intersection", Polarity::Similarity, true,
        [](const Ref& p, const Ref& q) { return histogramIntersection(p, q); });
    add("cosine", Polarity::Similarity, false, [](const Ref& p, const Ref& q) { return cosine(p, q); });
    add("hamming", Polarity::Distance, false, [](const Ref& p, const Ref& q) { return hamming(p, q); });
    add("frequent-item", Polarity::Similarity, false,
        [](const Ref& p, const Ref& q) { return frequentItemSimilarity(p, q); });
    return m;
  }();
  return table;
}

}  // namespace

const Metric& metricByName(const std::string& name) {
  const auto& m = metrics();
  auto it = m.find(name);
  if (it == m.end()) throw Error(ErrorCode::UnknownMetric, "unknown metric '" + name + "'");
  return it->second;
}

std::vector<std::string> metricNames() {
  std::vector<std::string> out;
  for (const auto& [name, _] : metrics()) out.push_back(name);
  return out;
}

}  // namespace imgseek
