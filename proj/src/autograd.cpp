#include "vasis/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "vasis/layout.hpp"

namespace vasis {

Tensor& Node::grad_ref() {
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return Var(std::move(n));
}

Var Var::constant(Shape shape, double value) { return leaf(Tensor::full(shape, value)); }

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) n->requires_grad |= p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(bwd);
  }
  return Var(std::move(n));
}

void accum(const Var& p, const Tensor& g) {
  if (!p.requires_grad()) return;
  Tensor& dst = p.node()->grad_ref();
  for (int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  auto pick = [&](int64_t x, int64_t y) {
    VASIS_CHECK(x == y || x == 1 || y == 1, validation,
                "shapes not broadcastable: " << a.str() << " vs " << b.str());
    return std::max(x, y);
  };
  return Shape{pick(a.b, b.b), pick(a.c, b.c), pick(a.h, b.h), pick(a.w, b.w)};
}

inline int64_t bidx(const Shape& s, int64_t b, int64_t c, int64_t h, int64_t w) {
  return (((s.b == 1 ? 0 : b) * s.c + (s.c == 1 ? 0 : c)) * s.h + (s.h == 1 ? 0 : h)) * s.w +
         (s.w == 1 ? 0 : w);
}

// Elementwise binary op with axis-wise broadcasting. dfa/dfb give the local
// derivatives as functions of the two input values.
template <class F, class DFA, class DFB>
Var ew_binary(const Var& a, const Var& b, F f, DFA dfa, DFB dfb) {
  const Shape sa = a.shape(), sb = b.shape();
  const Shape so = broadcast_shape(sa, sb);
  Tensor out(so);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (sa == sb && sa == so) {
    for (int64_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  } else {
    int64_t i = 0;
    for (int64_t ob = 0; ob < so.b; ++ob)
      for (int64_t oc = 0; oc < so.c; ++oc)
        for (int64_t oh = 0; oh < so.h; ++oh)
          for (int64_t ow = 0; ow < so.w; ++ow, ++i)
            out[i] = f(av[bidx(sa, ob, oc, oh, ow)], bv[bidx(sb, ob, oc, oh, ow)]);
  }
  return make_node(std::move(out), {a, b}, [a, b, sa, sb, so, dfa, dfb](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor* da = a.requires_grad() ? &a.node()->grad_ref() : nullptr;
    Tensor* db = b.requires_grad() ? &b.node()->grad_ref() : nullptr;
    int64_t i = 0;
    for (int64_t ob = 0; ob < so.b; ++ob)
      for (int64_t oc = 0; oc < so.c; ++oc)
        for (int64_t oh = 0; oh < so.h; ++oh)
          for (int64_t ow = 0; ow < so.w; ++ow, ++i) {
            int64_t ia = bidx(sa, ob, oc, oh, ow);
            int64_t ib = bidx(sb, ob, oc, oh, ow);
            if (da) (*da)[ia] += dfa(av[ia], bv[ib]) * g[i];
            if (db) (*db)[ib] += dfb(av[ia], bv[ib]) * g[i];
          }
  });
}

template <class F, class DF>
Var ew_unary(const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const Tensor& av = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make_node(std::move(out), {a}, [a, df](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& av = a.value();
    const Tensor& ov = self.value;
    Tensor& da = a.node()->grad_ref();
    for (int64_t i = 0; i < g.size(); ++i) da[i] += df(av[i], ov[i]) * g[i];
  });
}

}  // namespace

void backward(const Var& root) {
  VASIS_CHECK(root.defined(), validation, "backward on an undefined Var");
  VASIS_CHECK(root.shape().count() == 1, validation,
              "backward root must be scalar, got " << root.shape().str());
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad_ref()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  return ew_binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return ew_binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return ew_binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return ew_binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var add_scalar(const Var& a, double s) {
  return ew_unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
  return ew_unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var relu(const Var& a) {
  return ew_unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return ew_unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var tanh_op(const Var& a) {
  return ew_unary(
      a, [](double x) { return std::tanh(x); }, [](double, double o) { return 1.0 - o * o; });
}

Var abs_op(const Var& a) {
  return ew_unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sqrt_op(const Var& a) {
  return ew_unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double o) { return 0.5 / o; });
}

Var mean_all(const Var& a) {
  double acc = 0.0;
  const Tensor& av = a.value();
  for (int64_t i = 0; i < av.size(); ++i) acc += av[i];
  int64_t count = av.size();
  Tensor out(Shape{1, 1, 1, 1});
  out[0] = acc / static_cast<double>(count);
  return make_node(std::move(out), {a}, [a, count](Node& self) {
    double g = self.grad[0] / static_cast<double>(count);
    Tensor& da = a.node()->grad_ref();
    for (int64_t i = 0; i < da.size(); ++i) da[i] += g;
  });
}

Var sum_all(const Var& a) {
  double acc = 0.0;
  const Tensor& av = a.value();
  for (int64_t i = 0; i < av.size(); ++i) acc += av[i];
  Tensor out(Shape{1, 1, 1, 1});
  out[0] = acc;
  return make_node(std::move(out), {a}, [a](Node& self) {
    double g = self.grad[0];
    Tensor& da = a.node()->grad_ref();
    for (int64_t i = 0; i < da.size(); ++i) da[i] += g;
  });
}

namespace kernels {

void channel_mean_kernel(const Tensor& x, bool per_sample, Tensor& out) {
  const Shape s = x.shape();
  out.fill(0.0);
  if (per_sample) {
    const double inv = 1.0 / static_cast<double>(s.h * s.w);
    for (int64_t b = 0; b < s.b; ++b)
      for (int64_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (int64_t h = 0; h < s.h; ++h)
          for (int64_t w = 0; w < s.w; ++w) acc += x.at(b, c, h, w);
        out.at(b, c, 0, 0) = acc * inv;
      }
  } else {
    const double inv = 1.0 / static_cast<double>(s.b * s.h * s.w);
    for (int64_t c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int64_t b = 0; b < s.b; ++b)
        for (int64_t h = 0; h < s.h; ++h)
          for (int64_t w = 0; w < s.w; ++w) acc += x.at(b, c, h, w);
      out.at(0, c, 0, 0) = acc * inv;
    }
  }
}

}  // namespace kernels

Var channel_mean(const Var& a, bool per_sample) {
  const Shape s = a.shape();
  Tensor out(Shape{per_sample ? s.b : 1, s.c, 1, 1});
  kernels::channel_mean_kernel(a.value(), per_sample, out);
  return make_node(std::move(out), {a}, [a, per_sample, s](Node& self) {
    Tensor& da = a.node()->grad_ref();
    const Tensor& g = self.grad;
    const double inv =
        1.0 / static_cast<double>((per_sample ? int64_t{1} : s.b) * s.h * s.w);
    for (int64_t b = 0; b < s.b; ++b)
      for (int64_t c = 0; c < s.c; ++c) {
        double gv = g.at(per_sample ? b : 0, c, 0, 0) * inv;
        for (int64_t h = 0; h < s.h; ++h)
          for (int64_t w = 0; w < s.w; ++w) da.at(b, c, h, w) += gv;
      }
  });
}

Var expand(const Var& a, Shape target) {
  const Shape s = a.shape();
  VASIS_CHECK((s.b == target.b || s.b == 1) && (s.c == target.c || s.c == 1) &&
                  (s.h == target.h || s.h == 1) && (s.w == target.w || s.w == 1),
              validation, "cannot expand " << s.str() << " to " << target.str());
  if (s == target) return a;
  Tensor out(target);
  const Tensor& av = a.value();
  int64_t i = 0;
  for (int64_t b = 0; b < target.b; ++b)
    for (int64_t c = 0; c < target.c; ++c)
      for (int64_t h = 0; h < target.h; ++h)
        for (int64_t w = 0; w < target.w; ++w, ++i) out[i] = av[bidx(s, b, c, h, w)];
  return make_node(std::move(out), {a}, [a, s, target](Node& self) {
    Tensor& da = a.node()->grad_ref();
    const Tensor& g = self.grad;
    int64_t i = 0;
    for (int64_t b = 0; b < target.b; ++b)
      for (int64_t c = 0; c < target.c; ++c)
        for (int64_t h = 0; h < target.h; ++h)
          for (int64_t w = 0; w < target.w; ++w, ++i) da[bidx(s, b, c, h, w)] += g[i];
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape(), sb = b.shape();
  VASIS_CHECK(sa.b == sb.b && sa.h == sb.h && sa.w == sb.w, validation,
              "concat_channels shape mismatch: " << sa.str() << " vs " << sb.str());
  Tensor out(Shape{sa.b, sa.c + sb.c, sa.h, sa.w});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  for (int64_t n = 0; n < sa.b; ++n) {
    for (int64_t c = 0; c < sa.c; ++c)
      for (int64_t h = 0; h < sa.h; ++h)
        for (int64_t w = 0; w < sa.w; ++w) out.at(n, c, h, w) = av.at(n, c, h, w);
    for (int64_t c = 0; c < sb.c; ++c)
      for (int64_t h = 0; h < sb.h; ++h)
        for (int64_t w = 0; w < sb.w; ++w) out.at(n, sa.c + c, h, w) = bv.at(n, c, h, w);
  }
  return make_node(std::move(out), {a, b}, [a, b, sa, sb](Node& self) {
    const Tensor& g = self.grad;
    if (a.requires_grad()) {
      Tensor& da = a.node()->grad_ref();
      for (int64_t n = 0; n < sa.b; ++n)
        for (int64_t c = 0; c < sa.c; ++c)
          for (int64_t h = 0; h < sa.h; ++h)
            for (int64_t w = 0; w < sa.w; ++w) da.at(n, c, h, w) += g.at(n, c, h, w);
    }
    if (b.requires_grad()) {
      Tensor& db = b.node()->grad_ref();
      for (int64_t n = 0; n < sb.b; ++n)
        for (int64_t c = 0; c < sb.c; ++c)
          for (int64_t h = 0; h < sb.h; ++h)
            for (int64_t w = 0; w < sb.w; ++w) db.at(n, c, h, w) += g.at(n, sa.c + c, h, w);
    }
  });
}

Var tile_channels(const Var& a, int64_t times) {
  VASIS_CHECK(times >= 1, validation, "tile_channels needs times >= 1");
  const Shape s = a.shape();
  Tensor out(Shape{s.b, s.c * times, s.h, s.w});
  const Tensor& av = a.value();
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t t = 0; t < times; ++t)
      for (int64_t c = 0; c < s.c; ++c)
        for (int64_t h = 0; h < s.h; ++h)
          for (int64_t w = 0; w < s.w; ++w)
            out.at(b, t * s.c + c, h, w) = av.at(b, c, h, w);
  return make_node(std::move(out), {a}, [a, s, times](Node& self) {
    Tensor& da = a.node()->grad_ref();
    const Tensor& g = self.grad;
    for (int64_t b = 0; b < s.b; ++b)
      for (int64_t t = 0; t < times; ++t)
        for (int64_t c = 0; c < s.c; ++c)
          for (int64_t h = 0; h < s.h; ++h)
            for (int64_t w = 0; w < s.w; ++w)
              da.at(b, c, h, w) += g.at(b, t * s.c + c, h, w);
  });
}

Var detach(const Var& a) { return Var::leaf(a.value()); }

Var rows_lookup(const Var& table, const LabelMap& labels) {
  const Shape ts = table.shape();
  VASIS_CHECK(ts.h == 1 && ts.w == 1, validation,
              "rows_lookup table must be (N,C,1,1), got " << ts.str());
  const int64_t rows = ts.b, cols = ts.c;
  Tensor out(Shape{labels.batch(), cols, labels.height(), labels.width()});
  const Tensor& tv = table.value();
  for (int64_t b = 0; b < labels.batch(); ++b)
    for (int64_t h = 0; h < labels.height(); ++h)
      for (int64_t w = 0; w < labels.width(); ++w) {
        int32_t r = labels.at(b, h, w);
        VASIS_CHECK(r >= 0 && r < rows, validation,
                    "rows_lookup label " << r << " out of range [0," << rows << ")");
        for (int64_t c = 0; c < cols; ++c) out.at(b, c, h, w) = tv.at(r, c, 0, 0);
      }
  return make_node(std::move(out), {table}, [table, labels, cols](Node& self) {
    Tensor& dt = table.node()->grad_ref();
    const Tensor& g = self.grad;
    for (int64_t b = 0; b < labels.batch(); ++b)
      for (int64_t h = 0; h < labels.height(); ++h)
        for (int64_t w = 0; w < labels.width(); ++w) {
          int32_t r = labels.at(b, h, w);
          for (int64_t c = 0; c < cols; ++c) dt.at(r, c, 0, 0) += g.at(b, c, h, w);
        }
  });
}

}  // namespace vasis
