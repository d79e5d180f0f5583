#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"
#include "flowact/tensor.hpp"

namespace flowact {

enum class ProjectionKind { multi_mlp, concat, zero_pad };

inline const char* projection_kind_name(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::multi_mlp: return "multi-mlp";
    case ProjectionKind::concat: return "concat";
    case ProjectionKind::zero_pad: return "zero-pad";
  }
  return "?";
}

inline ProjectionKind projection_kind_from_name(const std::string& s) {
  if (s == "multi-mlp") return ProjectionKind::multi_mlp;
  if (s == "concat") return ProjectionKind::concat;
  if (s == "zero-pad") return ProjectionKind::zero_pad;
  raise(ErrorKind::config_error, "unknown projection kind: " + s);
}

// Layout contract between native action vectors and the decoder latent space.
struct ProjectionConfig {
  ProjectionKind kind = ProjectionKind::zero_pad;
  int hidden = 0;                                       // h
  std::vector<std::pair<std::string, int>> dims;        // (embodiment id, d_i), fixed order

  int d_max() const {
    int m = 0;
    for (const auto& [id, d] : dims) m = std::max(m, d);
    return m;
  }
  int d_sum() const {
    int s = 0;
    for (const auto& [id, d] : dims) s += d;
    return s;
  }

  int index_of(const std::string& embodiment_id) const {
    for (std::size_t i = 0; i < dims.size(); ++i)
      if (dims[i].first == embodiment_id) return static_cast<int>(i);
    raise(ErrorKind::invalid_argument, "projection: unknown embodiment " + embodiment_id);
  }

  int dim_of(const std::string& embodiment_id) const { return dims[index_of(embodiment_id)].second; }

  // Offset of an embodiment's segment in the concatenated D-vector.
  int segment_offset(const std::string& embodiment_id) const {
    int off = 0;
    for (const auto& [id, d] : dims) {
      if (id == embodiment_id) return off;
      off += d;
    }
    raise(ErrorKind::invalid_argument, "projection: unknown embodiment " + embodiment_id);
  }

  // Weight count excluding biases: 2h sum(d_i) for multi-mlp and concat,
  // 2h d_max for zero-pad.
  long param_count() const {
    const long h = hidden;
    return kind == ProjectionKind::zero_pad ? 2 * h * d_max() : 2 * h * d_sum();
  }
};

// Reference encoder/decoder with explicit weight tensors. This is the layout
// oracle; the trained decoder uses the same layout with tracked parameters.
struct ProjectionMaps {
  ProjectionConfig cfg;
  std::vector<Tensor> enc;  // multi-mlp: one per embodiment; else single [in,h]
  std::vector<Tensor> dec;  // multi-mlp: one per embodiment; else single [h,out]

  static ProjectionMaps init(const ProjectionConfig& cfg, Rng& rng) {
    ProjectionMaps m;
    m.cfg = cfg;
    const int h = cfg.hidden;
    switch (cfg.kind) {
      case ProjectionKind::multi_mlp:
        for (const auto& [id, d] : cfg.dims) {
          m.enc.push_back(Tensor::randn(d, h, rng, 1.0 / std::sqrt(double(d))));
          m.dec.push_back(Tensor::randn(h, d, rng, 1.0 / std::sqrt(double(h))));
        }
        break;
      case ProjectionKind::concat: {
        const int D = cfg.d_sum();
        m.enc.push_back(Tensor::randn(D, h, rng, 1.0 / std::sqrt(double(D))));
        m.dec.push_back(Tensor::randn(h, D, rng, 1.0 / std::sqrt(double(h))));
        break;
      }
      case ProjectionKind::zero_pad: {
        const int dm = cfg.d_max();
        m.enc.push_back(Tensor::randn(dm, h, rng, 1.0 / std::sqrt(double(dm))));
        m.dec.push_back(Tensor::randn(h, dm, rng, 1.0 / std::sqrt(double(h))));
        break;
      }
    }
    return m;
  }

  long count_weights() const {
    long n = 0;
    for (const auto& t : enc) n += static_cast<long>(t.size());
    for (const auto& t : dec) n += static_cast<long>(t.size());
    return n;
  }

  // Accepts a native d_i vector or a channel-cap padded vector (leading d_i
  // entries used).
  std::vector<double> encode(const std::vector<double>& a, const std::string& embodiment_id) const {
    const int idx = cfg.index_of(embodiment_id);
    const int d = cfg.dims[idx].second;
    if (static_cast<int>(a.size()) < d)
      raise(ErrorKind::invalid_argument, "project_encode: input shorter than native dim");
    const int h = cfg.hidden;
    std::vector<double> out(h, 0.0);
    switch (cfg.kind) {
      case ProjectionKind::multi_mlp: {
        const Tensor& W = enc[idx];
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < h; ++j) out[j] += a[i] * W.at(i, j);
        break;
      }
      case ProjectionKind::concat: {
        const Tensor& W = enc[0];
        const int off = cfg.segment_offset(embodiment_id);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < h; ++j) out[j] += a[i] * W.at(off + i, j);
        break;
      }
      case ProjectionKind::zero_pad: {
        const Tensor& W = enc[0];
        for (int i = 0; i < d; ++i)  // rows d..d_max-1 multiply zero padding
          for (int j = 0; j < h; ++j) out[j] += a[i] * W.at(i, j);
        break;
      }
    }
    return out;
  }

  std::vector<double> decode(const std::vector<double>& z, const std::string& embodiment_id) const {
    const int idx = cfg.index_of(embodiment_id);
    const int d = cfg.dims[idx].second;
    const int h = cfg.hidden;
    if (static_cast<int>(z.size()) != h)
      raise(ErrorKind::invalid_argument, "project_decode: latent size mismatch");
    std::vector<double> out(d, 0.0);
    switch (cfg.kind) {
      case ProjectionKind::multi_mlp: {
        const Tensor& W = dec[idx];
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < d; ++j) out[j] += z[i] * W.at(i, j);
        break;
      }
      case ProjectionKind::concat: {
        const Tensor& W = dec[0];
        const int off = cfg.segment_offset(embodiment_id);
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < d; ++j) out[j] += z[i] * W.at(i, off + j);
        break;
      }
      case ProjectionKind::zero_pad: {
        const Tensor& W = dec[0];
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < d; ++j) out[j] += z[i] * W.at(i, j);
        break;
      }
    }
    return out;
  }
};

}  // namespace flowact
