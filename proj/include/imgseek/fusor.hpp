#pragma once

#include "imgseek/core.hpp"
#include "imgseek/registry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace imgseek {

/// combSUM, combMNZ, combMAX, combMIN, linear, borda or rrf.
struct FusionRule {
  std::string name = "combMNZ";
  std::vector<double> weights;  // linear only, one per input list
  double c = 60.0;              // rrf constant
  // Min-max scale every input list to [0, 1] before score-based rules.
  bool normalizeScores = true;
};

/// Rescales scores to [0, 1]; a list whose scores are all equal maps to 1.
ScoredList minMaxNormalized(const ScoredList& list);

/// Late fusion over the union of all input lists. Distance lists are first
/// converted to similarities. combSUM and combMNZ count a missing image as 0;
/// the other rules aggregate only over lists that contain the image. Output
/// is sorted descending with ties on imageId and truncated to topN.
ScoredList fuse(const std::vector<ScoredList>& lists, const FusionRule& rule, std::size_t topN);

/// The Fusor component.
class Fusor {
 public:
  virtual ~Fusor() = default;
  virtual ScoredList fuse(const std::vector<ScoredList>& lists, std::size_t topN) const = 0;
  virtual const FusionRule& rule() const = 0;
};

std::shared_ptr<const Fusor> makeFusor(const FusionRule& rule);
const Registry<Fusor>& fusorRegistry();
std::vector<std::string> fusionRuleNames();

}  // namespace imgseek
