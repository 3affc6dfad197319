#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "awm/errors.hpp"
#include "awm/io.hpp"
#include "awm/rng.hpp"

namespace awm {

// Linear remap of an observed distance range [L, U] onto a wider target
// range [L2, U2] that straddles zero. Pulling near distances below zero and
// stretching far ones lets the smoothness loss push mapped vectors apart
// for dissimilar inputs instead of collapsing everything toward zero.
struct RescaleBounds {
  double lo = 0.0;
  double hi = 2.0;
  double target_lo = -2.0;
  double target_hi = 4.0;

  void validate() const {
    if (!(hi > lo)) throw IoError("rescale bounds require hi > lo");
    if (!(target_hi > target_lo)) throw IoError("rescale bounds require target_hi > target_lo");
    if (!(target_lo < lo) || !(target_hi > hi))
      throw IoError("target range must strictly contain the observed range");
  }
};

inline double rescale_distance(double d, const RescaleBounds& b) {
  b.validate();
  return (d - b.lo) / (b.hi - b.lo) * (b.target_hi - b.target_lo) + b.target_lo;
}

/// Hard indicator: 1 where v_i > 0, strictly, so a zero entry is not green.
inline std::vector<uint8_t> binarize(std::span<const double> v) {
  std::vector<uint8_t> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? 1 : 0;
  return out;
}

// Intermediate activations of one forward pass, kept for backprop.
struct MapperCache {
  std::vector<double> u;   // input
  std::vector<double> h0;  // after input linear
  std::vector<double> z1;  // block 1 pre-activation
  std::vector<double> h1;  // after block 1
  std::vector<double> z2;  // block 2 pre-activation
  std::vector<double> h2;  // after block 2
  std::vector<double> v;   // output
};

// Small residual feedforward mapper from a sentence embedding to one scaling
// value per vocabulary token:
//
//   h0 = W0 u + b0
//   h1 = h0 + relu(W1 h0 + b1)
//   h2 = h1 + relu(W2 h1 + b2)
//   v  = W3 h2 + b3
//
// Parameters live in one flat vector laid out [W0 b0 W1 b1 W2 b2 W3 b3],
// matrices row-major, which keeps SGD, finite-difference checks, and
// serialization trivial. The embedder seed travels with the weights so a
// detector can rebuild the exact embedding table this mapper was trained on.
class SemanticMapper {
 public:
  static constexpr size_t kDefaultHidden = 256;

  SemanticMapper(size_t in_dim, size_t hidden, size_t out_dim, uint64_t embedder_seed)
      : in_(in_dim), hid_(hidden), out_(out_dim), embedder_seed_(embedder_seed) {
    if (in_ < 1 || hid_ < 1 || out_ < 1) throw IoError("mapper dimensions must be >= 1");
    params_.assign(param_count(in_, hid_, out_), 0.0);
  }

  /// Gaussian fan-in init (biases zero), deterministic per seed.
  static SemanticMapper random_init(size_t in_dim, size_t hidden, size_t out_dim,
                                    uint64_t embedder_seed, uint64_t init_seed) {
    SemanticMapper m(in_dim, hidden, out_dim, embedder_seed);
    Rng rng(derive_seed(init_seed, "mapper-init"));
    m.init_matrix(m.off_w0(), hidden, in_dim, std::sqrt(2.0 / static_cast<double>(in_dim)), rng);
    m.init_matrix(m.off_w1(), hidden, hidden, std::sqrt(2.0 / static_cast<double>(hidden)), rng);
    m.init_matrix(m.off_w2(), hidden, hidden, std::sqrt(2.0 / static_cast<double>(hidden)), rng);
    m.init_matrix(m.off_w3(), out_dim, hidden, std::sqrt(1.0 / static_cast<double>(hidden)), rng);
    return m;
  }

  size_t in_dim() const { return in_; }
  size_t hidden() const { return hid_; }
  size_t out_dim() const { return out_; }
  uint64_t embedder_seed() const { return embedder_seed_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  const RescaleBounds& bounds() const { return bounds_; }
  void set_bounds(const RescaleBounds& b) {
    b.validate();
    bounds_ = b;
  }

  std::vector<double> forward(std::span<const double> u) const {
    MapperCache c;
    return forward_cached(u, c);
  }

  std::vector<double> forward_cached(std::span<const double> u, MapperCache& c) const {
    if (u.size() != in_) throw MismatchError("embedding dimension does not match mapper input");
    c.u.assign(u.begin(), u.end());
    c.h0.assign(hid_, 0.0);
    affine(off_w0(), off_b0(), c.u.data(), c.h0.data(), hid_, in_);
    c.z1.assign(hid_, 0.0);
    affine(off_w1(), off_b1(), c.h0.data(), c.z1.data(), hid_, hid_);
    c.h1 = c.h0;
    for (size_t i = 0; i < hid_; ++i)
      if (c.z1[i] > 0.0) c.h1[i] += c.z1[i];
    c.z2.assign(hid_, 0.0);
    affine(off_w2(), off_b2(), c.h1.data(), c.z2.data(), hid_, hid_);
    c.h2 = c.h1;
    for (size_t i = 0; i < hid_; ++i)
      if (c.z2[i] > 0.0) c.h2[i] += c.z2[i];
    c.v.assign(out_, 0.0);
    affine(off_w3(), off_b3(), c.h2.data(), c.v.data(), out_, hid_);
    return c.v;
  }

  /// Accumulates d(loss)/d(params) into `grad` (size param_count) given
  /// d(loss)/dv. relu'(0) is taken as 0.
  void backward(const MapperCache& c, std::span<const double> gv,
                std::span<double> grad) const {
    if (gv.size() != out_ || grad.size() != params_.size())
      throw MismatchError("gradient buffer size mismatch");
    // Output layer.
    accumulate_affine(grad, off_w3(), off_b3(), gv.data(), c.h2.data(), out_, hid_);
    std::vector<double> gh2(hid_, 0.0);
    matvec_t(off_w3(), gv.data(), gh2.data(), out_, hid_);
    // Block 2: h2 = h1 + relu(z2).
    std::vector<double> gz2(hid_, 0.0);
    for (size_t i = 0; i < hid_; ++i) gz2[i] = c.z2[i] > 0.0 ? gh2[i] : 0.0;
    accumulate_affine(grad, off_w2(), off_b2(), gz2.data(), c.h1.data(), hid_, hid_);
    std::vector<double> gh1 = gh2;
    matvec_t(off_w2(), gz2.data(), gh1.data(), hid_, hid_);
    // Block 1: h1 = h0 + relu(z1).
    std::vector<double> gz1(hid_, 0.0);
    for (size_t i = 0; i < hid_; ++i) gz1[i] = c.z1[i] > 0.0 ? gh1[i] : 0.0;
    accumulate_affine(grad, off_w1(), off_b1(), gz1.data(), c.h0.data(), hid_, hid_);
    std::vector<double> gh0 = gh1;
    matvec_t(off_w1(), gz1.data(), gh0.data(), hid_, hid_);
    // Input layer.
    accumulate_affine(grad, off_w0(), off_b0(), gh0.data(), c.u.data(), hid_, in_);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write mapper: " + path);
    write_magic(out, kMagic);
    write_u64_le(out, kVersion);
    write_u64_le(out, in_);
    write_u64_le(out, hid_);
    write_u64_le(out, out_);
    write_u64_le(out, embedder_seed_);
    write_f64_le(out, bounds_.lo);
    write_f64_le(out, bounds_.hi);
    write_f64_le(out, bounds_.target_lo);
    write_f64_le(out, bounds_.target_hi);
    for (double p : params_) write_f32_le(out, static_cast<float>(p));
    if (!out) throw IoError("write failed: " + path);
  }

  static SemanticMapper load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open mapper: " + path);
    expect_magic(in, kMagic, path);
    if (read_u64_le(in) != kVersion) throw IoError("unsupported mapper version: " + path);
    const uint64_t in_dim = read_u64_le(in);
    const uint64_t hidden = read_u64_le(in);
    const uint64_t out_dim = read_u64_le(in);
    const uint64_t embedder_seed = read_u64_le(in);
    SemanticMapper m(in_dim, hidden, out_dim, embedder_seed);
    RescaleBounds b;
    b.lo = read_f64_le(in);
    b.hi = read_f64_le(in);
    b.target_lo = read_f64_le(in);
    b.target_hi = read_f64_le(in);
    m.set_bounds(b);
    for (auto& p : m.params_) p = static_cast<double>(read_f32_le(in));
    return m;
  }

  static size_t param_count(size_t in_dim, size_t hidden, size_t out_dim) {
    return hidden * in_dim + hidden + 2 * (hidden * hidden + hidden) + out_dim * hidden +
           out_dim;
  }

 private:
  static constexpr char kMagic[9] = "AWMMAPR1";
  static constexpr uint64_t kVersion = 1;

  size_t off_w0() const { return 0; }
  size_t off_b0() const { return hid_ * in_; }
  size_t off_w1() const { return off_b0() + hid_; }
  size_t off_b1() const { return off_w1() + hid_ * hid_; }
  size_t off_w2() const { return off_b1() + hid_; }
  size_t off_b2() const { return off_w2() + hid_ * hid_; }
  size_t off_w3() const { return off_b2() + hid_; }
  size_t off_b3() const { return off_w3() + out_ * hid_; }

  void init_matrix(size_t off, size_t rows, size_t cols, double std, Rng& rng) {
    for (size_t i = 0; i < rows * cols; ++i) params_[off + i] = rng.gaussian() * std;
  }

  // y += W x + b, W row-major rows x cols.
  void affine(size_t w_off, size_t b_off, const double* x, double* y, size_t rows,
              size_t cols) const {
    const double* w = params_.data() + w_off;
    const double* b = params_.data() + b_off;
    for (size_t i = 0; i < rows; ++i) {
      double s = b[i];
      const double* wi = w + i * cols;
      for (size_t j = 0; j < cols; ++j) s += wi[j] * x[j];
      y[i] += s;
    }
  }

  // out += W^T g.
  void matvec_t(size_t w_off, const double* g, double* out, size_t rows, size_t cols) const {
    const double* w = params_.data() + w_off;
    for (size_t i = 0; i < rows; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      const double* wi = w + i * cols;
      for (size_t j = 0; j < cols; ++j) out[j] += gi * wi[j];
    }
  }

  // gW += g x^T, gb += g.
  static void accumulate_affine(std::span<double> grad, size_t w_off, size_t b_off,
                                const double* g, const double* x, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
      const double gi = g[i];
      grad[b_off + i] += gi;
      if (gi == 0.0) continue;
      double* gw = grad.data() + w_off + i * cols;
      for (size_t j = 0; j < cols; ++j) gw[j] += gi * x[j];
    }
  }

  size_t in_;
  size_t hid_;
  size_t out_;
  uint64_t embedder_seed_;
  RescaleBounds bounds_;
  std::vector<double> params_;
};

}  // namespace awm
