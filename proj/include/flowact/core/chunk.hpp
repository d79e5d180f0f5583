#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/core/embodiment.hpp"
#include "flowact/episode.hpp"
#include "flowact/tensor.hpp"

namespace flowact {

// H x K binary validity grid. Rectangular, upper-left aligned:
// bits[h,k] = 1  iff  k < c and h < H_task.
struct ChunkMask {
  int H = 0;
  int K = 0;
  int c = 0;
  int H_task = 0;
  std::vector<std::uint8_t> bits;

  bool at(int h, int k) const { return bits[static_cast<std::size_t>(h) * K + k] != 0; }

  int popcount() const {
    int n = 0;
    for (auto b : bits) n += b;
    return n;
  }

  Tensor as_tensor() const {
    Tensor t(H, K);
    for (int h = 0; h < H; ++h)
      for (int k = 0; k < K; ++k) t.at(h, k) = at(h, k) ? 1.0 : 0.0;
    return t;
  }
};

inline ChunkMask build_mask(int c, int H_task, int H = kHorizon, int K = kChannelCap) {
  if (c < 1 || c > K)
    raise(ErrorKind::invalid_argument, "build_mask: c out of range [1," + std::to_string(K) + "]");
  if (H_task < 1 || H_task > H)
    raise(ErrorKind::invalid_argument, "build_mask: H_task out of range [1," + std::to_string(H) + "]");
  ChunkMask m;
  m.H = H;
  m.K = K;
  m.c = c;
  m.H_task = H_task;
  m.bits.assign(static_cast<std::size_t>(H) * K, 0);
  for (int h = 0; h < H_task; ++h)
    for (int k = 0; k < c; ++k) m.bits[static_cast<std::size_t>(h) * K + k] = 1;
  return m;
}

// The universal training/inference target: values are zero outside the mask.
struct ActionChunk {
  Tensor values;  // H x K
  ChunkMask mask;
  int c = 0;
  int H_task = 0;
  std::string embodiment_id;

  bool zero_outside_mask() const {
    for (int h = 0; h < mask.H; ++h)
      for (int k = 0; k < mask.K; ++k)
        if (!mask.at(h, k) && values.at(h, k) != 0.0) return false;
    return true;
  }
};

// Slice actions t .. t+H_task-1 into the leading channels of an H x K chunk.
// A short tail truncates H_task and shrinks the mask instead of discarding
// the chunk.
inline ActionChunk chunk_episode(const Episode& ep, int t, int H = kHorizon,
                                 int K = kChannelCap, int H_task = -1) {
  const int n = ep.num_actions();
  if (t < 0 || t >= n)
    raise(ErrorKind::invalid_argument, "chunk_episode: start index " + std::to_string(t) +
                                           " outside episode of length " + std::to_string(n));
  if (H_task < 0) H_task = embodiment(ep.embodiment_id).default_horizon;
  if (H_task > H) H_task = H;
  const int c = ep.action_dim;
  if (c > K) raise(ErrorKind::invalid_argument, "chunk_episode: action_dim exceeds channel cap");
  const int avail = n - t;
  const int steps = std::min(H_task, avail);

  ActionChunk ch;
  ch.c = c;
  ch.H_task = steps;
  ch.embodiment_id = ep.embodiment_id;
  ch.mask = build_mask(c, steps, H, K);
  ch.values = Tensor::zeros(H, K);
  for (int h = 0; h < steps; ++h) {
    const float* row = ep.action_row(t + h);
    for (int k = 0; k < c; ++k) ch.values.at(h, k) = row[k];
  }
  return ch;
}

}  // namespace flowact
