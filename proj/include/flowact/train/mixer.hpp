#pragma once

#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"

namespace flowact {

struct MixSource {
  std::string name;
  int size = 0;
  double weight = 0.0;
};

// Deterministic low-discrepancy sampling over sources: each slot goes to the
// source with the largest weighted deficit, so per-batch counts track the
// weights exactly (a (0.5, 0.5) mixture over batches of 8 always splits 4/4)
// and long-run frequencies converge to the weights. Item picks inside a
// source are counter-seeded, so a resumed run replays identically.
class BatchMixer {
 public:
  BatchMixer(std::vector<MixSource> sources, std::uint64_t seed)
      : sources_(std::move(sources)), seed_(seed) {
    double total = 0.0;
    for (const auto& s : sources_) {
      if (s.weight < 0.0) raise(ErrorKind::config_error, "mixer: negative weight");
      if (s.weight > 0.0 && s.size == 0)
        raise(ErrorKind::config_error, "mixer: empty source with positive weight: " + s.name);
      total += s.weight;
    }
    if (total <= 0.0) raise(ErrorKind::config_error, "mixer: weights sum to zero");
    for (auto& s : sources_) s.weight /= total;
    assigned_.assign(sources_.size(), 0);
  }

  struct Pick {
    int source = 0;
    int item = 0;
  };

  std::vector<Pick> next_batch(int batch_size) {
    std::vector<Pick> out;
    for (int j = 0; j < batch_size; ++j) {
      ++slot_;
      int best = -1;
      double best_deficit = -1e300;
      for (std::size_t i = 0; i < sources_.size(); ++i) {
        if (sources_[i].weight == 0.0) continue;
        double deficit = sources_[i].weight * slot_ - assigned_[i];
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = static_cast<int>(i);
        }
      }
      ++assigned_[best];
      Rng rng(derive_seed(seed_, "mix-item", static_cast<std::uint64_t>(slot_), best));
      out.push_back({best, static_cast<int>(rng.uniform_index(sources_[best].size))});
    }
    return out;
  }

  // Replays the allocation (cheaply) to restore mid-run state after resume.
  void skip_batches(int n_batches, int batch_size) {
    for (int b = 0; b < n_batches; ++b) next_batch(batch_size);
  }

  const std::vector<MixSource>& sources() const { return sources_; }

 private:
  std::vector<MixSource> sources_;
  std::uint64_t seed_;
  long slot_ = 0;
  std::vector<long> assigned_;
};

}  // namespace flowact
