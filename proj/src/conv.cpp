#include <Eigen/Core>
#include <cmath>

#include "vasis/autograd.hpp"
#include "vasis/layout.hpp"

namespace vasis {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Var make_node_local(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) n->requires_grad |= p.requires_grad();
  if (n->requires_grad) {
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(bwd);
  }
  return Var(std::move(n));
}

int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Fills the im2col matrix (Cin*k*k rows, Ho*Wo columns) for one batch item.
void im2col(const Tensor& x, int64_t b, int64_t k, const ConvOpts& o, int64_t ho, int64_t wo,
            RowMat& cols) {
  const Shape s = x.shape();
  for (int64_t cin = 0; cin < s.c; ++cin) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        const int64_t row = (cin * k + ki) * k + kj;
        double* dst = cols.data() + row * ho * wo;
        for (int64_t oh = 0; oh < ho; ++oh) {
          int64_t ih = oh * o.stride - o.pad + ki;
          for (int64_t ow = 0; ow < wo; ++ow, ++dst) {
            int64_t iw = ow * o.stride - o.pad + kj;
            if (o.padding == PaddingMode::zero) {
              *dst = (ih < 0 || ih >= s.h || iw < 0 || iw >= s.w) ? 0.0 : x.at(b, cin, ih, iw);
            } else {
              *dst = x.at(b, cin, reflect_index(ih, s.h), reflect_index(iw, s.w));
            }
          }
        }
      }
    }
  }
}

// Scatter-adds the column gradient back into the input gradient.
void col2im_accum(Tensor& dx, int64_t b, int64_t k, const ConvOpts& o, int64_t ho, int64_t wo,
                  const RowMat& dcols) {
  const Shape s = dx.shape();
  for (int64_t cin = 0; cin < s.c; ++cin) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        const int64_t row = (cin * k + ki) * k + kj;
        const double* src = dcols.data() + row * ho * wo;
        for (int64_t oh = 0; oh < ho; ++oh) {
          int64_t ih = oh * o.stride - o.pad + ki;
          for (int64_t ow = 0; ow < wo; ++ow, ++src) {
            int64_t iw = ow * o.stride - o.pad + kj;
            if (o.padding == PaddingMode::zero) {
              if (ih < 0 || ih >= s.h || iw < 0 || iw >= s.w) continue;
              dx.at(b, cin, ih, iw) += *src;
            } else {
              dx.at(b, cin, reflect_index(ih, s.h), reflect_index(iw, s.w)) += *src;
            }
          }
        }
      }
    }
  }
}

void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvOpts& o) {
  const Shape xs = x.shape(), ws = w.shape();
  VASIS_CHECK(ws.h == ws.w, validation, "conv kernels must be square, got " << ws.str());
  VASIS_CHECK(xs.c == ws.c, validation,
              "conv input channels " << xs.c << " != weight in-channels " << ws.c);
  VASIS_CHECK(bias.shape().c == ws.b && bias.shape().count() == ws.b, validation,
              "conv bias shape " << bias.shape().str() << " incompatible with out-channels "
                                 << ws.b);
  VASIS_CHECK(o.stride >= 1 && o.pad >= 0, validation, "bad conv stride/pad");
  VASIS_CHECK(conv_out_dim(xs.h, ws.h, o.stride, o.pad) >= 1 &&
                  conv_out_dim(xs.w, ws.w, o.stride, o.pad) >= 1,
              validation, "conv output would be empty for input " << xs.str());
}

}  // namespace

namespace kernels {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvOpts& o) {
  check_conv_args(x, w, bias, o);
  const Shape xs = x.shape(), ws = w.shape();
  const int64_t k = ws.h, cout = ws.b, cinkk = ws.c * k * k;
  const int64_t ho = conv_out_dim(xs.h, k, o.stride, o.pad);
  const int64_t wo = conv_out_dim(xs.w, k, o.stride, o.pad);
  Tensor out(Shape{xs.b, cout, ho, wo});
  Eigen::Map<const RowMat> wmat(w.data(), cout, cinkk);

  const bool direct = (k == 1 && o.stride == 1 && o.pad == 0);
  RowMat cols;
  if (!direct) cols.resize(cinkk, ho * wo);
  for (int64_t b = 0; b < xs.b; ++b) {
    Eigen::Map<RowMat> dst(out.data() + b * cout * ho * wo, cout, ho * wo);
    if (direct) {
      Eigen::Map<const RowMat> xmat(x.data() + b * xs.c * xs.h * xs.w, xs.c, xs.h * xs.w);
      dst.noalias() = wmat * xmat;
    } else {
      im2col(x, b, k, o, ho, wo, cols);
      dst.noalias() = wmat * cols;
    }
    for (int64_t c = 0; c < cout; ++c) dst.row(c).array() += bias[c];
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const ConvOpts& o, const Tensor& grad_out,
                     Tensor* dx, Tensor* dw, Tensor* db) {
  const Shape xs = x.shape(), ws = w.shape();
  const int64_t k = ws.h, cout = ws.b, cinkk = ws.c * k * k;
  const int64_t ho = grad_out.shape().h, wo = grad_out.shape().w;
  Eigen::Map<const RowMat> wmat(w.data(), cout, cinkk);

  const bool direct = (k == 1 && o.stride == 1 && o.pad == 0);
  RowMat cols, dcols;
  if (!direct) cols.resize(cinkk, ho * wo);
  dcols.resize(cinkk, ho * wo);
  for (int64_t b = 0; b < xs.b; ++b) {
    Eigen::Map<const RowMat> g(grad_out.data() + b * cout * ho * wo, cout, ho * wo);
    if (dw) {
      Eigen::Map<RowMat> dwmat(dw->data(), cout, cinkk);
      if (direct) {
        Eigen::Map<const RowMat> xmat(x.data() + b * xs.c * xs.h * xs.w, xs.c, xs.h * xs.w);
        dwmat.noalias() += g * xmat.transpose();
      } else {
        im2col(x, b, k, o, ho, wo, cols);
        dwmat.noalias() += g * cols.transpose();
      }
    }
    if (db) {
      for (int64_t c = 0; c < cout; ++c) (*db)[c] += g.row(c).sum();
    }
    if (dx) {
      dcols.noalias() = wmat.transpose() * g;
      if (direct) {
        Eigen::Map<RowMat> dxmat(dx->data() + b * xs.c * xs.h * xs.w, xs.c, xs.h * xs.w);
        dxmat.noalias() += dcols;
      } else {
        col2im_accum(*dx, b, k, o, ho, wo, dcols);
      }
    }
  }
}

}  // namespace kernels

Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvOpts& opts) {
  Tensor out = kernels::conv2d_forward(x.value(), w.value(), bias.value(), opts);
  return make_node_local(std::move(out), {x, w, bias}, [x, w, bias, opts](Node& self) {
    Tensor* dx = x.requires_grad() ? &x.node()->grad_ref() : nullptr;
    Tensor* dw = w.requires_grad() ? &w.node()->grad_ref() : nullptr;
    Tensor* db = bias.requires_grad() ? &bias.node()->grad_ref() : nullptr;
    kernels::conv2d_backward(x.value(), w.value(), opts, self.grad, dx, dw, db);
  });
}

Var upsample_nearest2(const Var& a) {
  const Shape s = a.shape();
  Tensor out(Shape{s.b, s.c, s.h * 2, s.w * 2});
  const Tensor& av = a.value();
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t h = 0; h < s.h * 2; ++h)
        for (int64_t w = 0; w < s.w * 2; ++w)
          out.at(b, c, h, w) = av.at(b, c, h / 2, w / 2);
  return make_node_local(std::move(out), {a}, [a, s](Node& self) {
    Tensor& da = a.node()->grad_ref();
    const Tensor& g = self.grad;
    for (int64_t b = 0; b < s.b; ++b)
      for (int64_t c = 0; c < s.c; ++c)
        for (int64_t h = 0; h < s.h * 2; ++h)
          for (int64_t w = 0; w < s.w * 2; ++w) da.at(b, c, h / 2, w / 2) += g.at(b, c, h, w);
  });
}

Var avg_pool2(const Var& a) {
  const Shape s = a.shape();
  VASIS_CHECK(s.h % 2 == 0 && s.w % 2 == 0, validation,
              "avg_pool2 needs even spatial dims, got " << s.str());
  Tensor out(Shape{s.b, s.c, s.h / 2, s.w / 2});
  const Tensor& av = a.value();
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t h = 0; h < s.h / 2; ++h)
        for (int64_t w = 0; w < s.w / 2; ++w)
          out.at(b, c, h, w) = 0.25 * (av.at(b, c, 2 * h, 2 * w) + av.at(b, c, 2 * h, 2 * w + 1) +
                                       av.at(b, c, 2 * h + 1, 2 * w) +
                                       av.at(b, c, 2 * h + 1, 2 * w + 1));
  return make_node_local(std::move(out), {a}, [a, s](Node& self) {
    Tensor& da = a.node()->grad_ref();
    const Tensor& g = self.grad;
    for (int64_t b = 0; b < s.b; ++b)
      for (int64_t c = 0; c < s.c; ++c)
        for (int64_t h = 0; h < s.h / 2; ++h)
          for (int64_t w = 0; w < s.w / 2; ++w) {
            double gv = 0.25 * g.at(b, c, h, w);
            da.at(b, c, 2 * h, 2 * w) += gv;
            da.at(b, c, 2 * h, 2 * w + 1) += gv;
            da.at(b, c, 2 * h + 1, 2 * w) += gv;
            da.at(b, c, 2 * h + 1, 2 * w + 1) += gv;
          }
  });
}

Var softmax_ce_channel(const Var& logits, const LabelMap& labels,
                       const std::vector<double>& class_weights, int64_t target_class) {
  const Shape s = logits.shape();
  VASIS_CHECK(target_class >= 0 || (labels.batch() == s.b && labels.height() == s.h &&
                                    labels.width() == s.w),
              validation, "softmax_ce_channel label/logit shape mismatch");
  VASIS_CHECK(static_cast<int64_t>(class_weights.size()) == s.c, validation,
              "class_weights size " << class_weights.size() << " != channel count " << s.c);
  if (target_class >= 0)
    VASIS_CHECK(target_class < s.c, validation, "target_class out of range");

  const Tensor& lv = logits.value();
  auto probs = std::make_shared<Tensor>(s);  // cached softmax for the backward pass
  const double inv_count = 1.0 / static_cast<double>(s.b * s.h * s.w);
  double loss = 0.0;
  for (int64_t b = 0; b < s.b; ++b) {
    for (int64_t h = 0; h < s.h; ++h) {
      for (int64_t w = 0; w < s.w; ++w) {
        double mx = lv.at(b, 0, h, w);
        for (int64_t c = 1; c < s.c; ++c) mx = std::max(mx, lv.at(b, c, h, w));
        double denom = 0.0;
        for (int64_t c = 0; c < s.c; ++c) denom += std::exp(lv.at(b, c, h, w) - mx);
        int64_t t = target_class >= 0 ? target_class : labels.at(b, h, w);
        VASIS_CHECK(t >= 0 && t < s.c, validation, "cross-entropy target " << t << " invalid");
        for (int64_t c = 0; c < s.c; ++c)
          probs->at(b, c, h, w) = std::exp(lv.at(b, c, h, w) - mx) / denom;
        loss -= class_weights[static_cast<size_t>(t)] *
                (lv.at(b, t, h, w) - mx - std::log(denom));
      }
    }
  }
  Tensor out(Shape{1, 1, 1, 1});
  out[0] = loss * inv_count;
  return make_node_local(
      std::move(out), {logits},
      [logits, labels, class_weights, target_class, probs, s, inv_count](Node& self) {
        Tensor& dl = logits.node()->grad_ref();
        const double g = self.grad[0] * inv_count;
        for (int64_t b = 0; b < s.b; ++b)
          for (int64_t h = 0; h < s.h; ++h)
            for (int64_t w = 0; w < s.w; ++w) {
              int64_t t = target_class >= 0 ? target_class : labels.at(b, h, w);
              double wt = class_weights[static_cast<size_t>(t)];
              for (int64_t c = 0; c < s.c; ++c) {
                double p = probs->at(b, c, h, w);
                dl.at(b, c, h, w) += g * wt * (p - (c == t ? 1.0 : 0.0));
              }
            }
      });
}

}  // namespace vasis
