#pragma once

#include <cstdint>
#include <vector>

#include "vasis/tensor.hpp"

namespace vasis {

// Dense per-pixel class labels, the canonical on-disk form of a layout.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int64_t b, int64_t h, int64_t w, int32_t fill = 0);

  int64_t batch() const { return b_; }
  int64_t height() const { return h_; }
  int64_t width() const { return w_; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }

  int32_t& at(int64_t b, int64_t h, int64_t w) { return v_[(b * h_ + h) * w_ + w]; }
  int32_t at(int64_t b, int64_t h, int64_t w) const { return v_[(b * h_ + h) * w_ + w]; }
  const std::vector<int32_t>& raw() const { return v_; }
  std::vector<int32_t>& raw() { return v_; }

  bool operator==(const LabelMap&) const = default;

 private:
  int64_t b_ = 0, h_ = 0, w_ = 0;
  std::vector<int32_t> v_;
};

// One-hot class map s of shape (B, N, H, W), the conditioning signal for
// every normalization layer. Exactly one channel is 1 per pixel fiber.
class SemanticLayout {
 public:
  SemanticLayout() = default;
  // Validates the one-hot invariant on construction.
  SemanticLayout(Tensor data, int64_t num_classes);

  const Tensor& data() const { return data_; }
  int64_t num_classes() const { return num_classes_; }
  int64_t batch() const { return data_.shape().b; }
  int64_t height() const { return data_.shape().h; }
  int64_t width() const { return data_.shape().w; }

  // Dense label at a pixel (argmax over the channel fiber).
  int32_t label_at(int64_t b, int64_t h, int64_t w) const;
  LabelMap argmax() const;

 private:
  Tensor data_;
  int64_t num_classes_ = 0;
};

// Rejects out-of-range labels naming the offending (b,h,w) coordinate.
SemanticLayout one_hot_encode(const LabelMap& labels, int64_t num_classes);

// Nearest-neighbor resampling with the floor index rule
// src_index = floor(i * src_dim / target_dim); upsampling is rejected.
// Nearest-neighbor is the only rule that keeps the layout one-hot.
SemanticLayout downsample_layout(const SemanticLayout& layout, int64_t target_h, int64_t target_w);
LabelMap downsample_labels(const LabelMap& labels, int64_t target_h, int64_t target_w);

}  // namespace vasis
