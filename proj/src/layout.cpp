#include "vasis/layout.hpp"

namespace vasis {

LabelMap::LabelMap(int64_t b, int64_t h, int64_t w, int32_t fill) : b_(b), h_(h), w_(w) {
  VASIS_CHECK(b >= 1 && h >= 1 && w >= 1, validation,
              "label map dimensions must be >= 1, got (" << b << "," << h << "," << w << ")");
  v_.assign(static_cast<size_t>(b * h * w), fill);
}

SemanticLayout::SemanticLayout(Tensor data, int64_t num_classes)
    : data_(std::move(data)), num_classes_(num_classes) {
  const Shape& s = data_.shape();
  VASIS_CHECK(num_classes_ >= 1, validation, "layout needs >= 1 class, got " << num_classes_);
  VASIS_CHECK(s.c == num_classes_, validation,
              "layout channel count " << s.c << " != num_classes " << num_classes_);
  for (int64_t b = 0; b < s.b; ++b) {
    for (int64_t h = 0; h < s.h; ++h) {
      for (int64_t w = 0; w < s.w; ++w) {
        int64_t ones = 0;
        for (int64_t c = 0; c < s.c; ++c) {
          double v = data_.at(b, c, h, w);
          VASIS_CHECK(v == 0.0 || v == 1.0, validation,
                      "layout entry not in {0,1} at (b=" << b << ",c=" << c << ",h=" << h
                                                         << ",w=" << w << "): " << v);
          ones += (v == 1.0);
        }
        VASIS_CHECK(ones == 1, validation,
                    "layout fiber at (b=" << b << ",h=" << h << ",w=" << w << ") has " << ones
                                          << " ones, expected exactly 1");
      }
    }
  }
}

int32_t SemanticLayout::label_at(int64_t b, int64_t h, int64_t w) const {
  for (int64_t c = 0; c < num_classes_; ++c) {
    if (data_.at(b, c, h, w) == 1.0) return static_cast<int32_t>(c);
  }
  return 0;  // unreachable on a valid layout
}

LabelMap SemanticLayout::argmax() const {
  LabelMap out(batch(), height(), width());
  for (int64_t b = 0; b < batch(); ++b)
    for (int64_t h = 0; h < height(); ++h)
      for (int64_t w = 0; w < width(); ++w) out.at(b, h, w) = label_at(b, h, w);
  return out;
}

SemanticLayout one_hot_encode(const LabelMap& labels, int64_t num_classes) {
  VASIS_CHECK(num_classes >= 1, validation, "one_hot_encode needs >= 1 class");
  Tensor data(Shape{labels.batch(), num_classes, labels.height(), labels.width()});
  for (int64_t b = 0; b < labels.batch(); ++b) {
    for (int64_t h = 0; h < labels.height(); ++h) {
      for (int64_t w = 0; w < labels.width(); ++w) {
        int32_t label = labels.at(b, h, w);
        VASIS_CHECK(label >= 0 && label < num_classes, validation,
                    "label " << label << " out of range [0," << num_classes << ") at (b=" << b
                             << ",h=" << h << ",w=" << w << ")");
        data.at(b, label, h, w) = 1.0;
      }
    }
  }
  return SemanticLayout(std::move(data), num_classes);
}

LabelMap downsample_labels(const LabelMap& labels, int64_t target_h, int64_t target_w) {
  VASIS_CHECK(target_h >= 1 && target_w >= 1, validation, "target dims must be >= 1");
  VASIS_CHECK(target_h <= labels.height() && target_w <= labels.width(), validation,
              "upsampling rejected: target (" << target_h << "," << target_w
                                              << ") exceeds source (" << labels.height() << ","
                                              << labels.width() << ")");
  LabelMap out(labels.batch(), target_h, target_w);
  for (int64_t b = 0; b < labels.batch(); ++b) {
    for (int64_t h = 0; h < target_h; ++h) {
      int64_t sh = h * labels.height() / target_h;  // floor index rule
      for (int64_t w = 0; w < target_w; ++w) {
        int64_t sw = w * labels.width() / target_w;
        out.at(b, h, w) = labels.at(b, sh, sw);
      }
    }
  }
  return out;
}

SemanticLayout downsample_layout(const SemanticLayout& layout, int64_t target_h,
                                 int64_t target_w) {
  return one_hot_encode(downsample_labels(layout.argmax(), target_h, target_w),
                        layout.num_classes());
}

}  // namespace vasis
