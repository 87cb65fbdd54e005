#include "csifb/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace csifb {

namespace {

constexpr double kLeakySlope = 0.3;

double stable_sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  // keep the open (0,1) range even where the quotient rounds to 0 or 1
  if (s >= 1.0) return std::nextafter(1.0, 0.0);
  if (s <= 0.0) return std::nextafter(0.0, 1.0);
  return s;
}

}  // namespace

double Graph::dense_fault_ = 1.0;

void Graph::inject_dense_fault(double factor) { dense_fault_ = factor; }

VarId Graph::push(Tensor t, std::function<void()> back, Tensor* sink) {
  nodes_.push_back(Node{std::move(t), std::move(back), sink});
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Graph::param(Tensor& p) { return push(p, {}, &p); }

VarId Graph::input(const Tensor& t) { return push(t); }

VarId Graph::input(std::vector<int> shape, std::vector<double> values) {
  return push(Tensor(std::move(shape), std::move(values)));
}

VarId Graph::add(VarId a, VarId b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!ta.same_shape(tb))
    throw std::invalid_argument("add: shape mismatch " + shape_str(ta.shape) + " vs " +
                                shape_str(tb.shape));
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = ta.v[i] + tb.v[i];
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, b] {
    const auto& go = nodes_[id].t.g;
    for (std::size_t i = 0; i < go.size(); ++i) {
      nodes_[a].t.g[i] += go[i];
      nodes_[b].t.g[i] += go[i];
    }
  };
  return id;
}

VarId Graph::sub(VarId a, VarId b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!ta.same_shape(tb))
    throw std::invalid_argument("sub: shape mismatch");
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = ta.v[i] - tb.v[i];
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, b] {
    const auto& go = nodes_[id].t.g;
    for (std::size_t i = 0; i < go.size(); ++i) {
      nodes_[a].t.g[i] += go[i];
      nodes_[b].t.g[i] -= go[i];
    }
  };
  return id;
}

VarId Graph::mul(VarId a, VarId b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  if (!ta.same_shape(tb))
    throw std::invalid_argument("mul: shape mismatch");
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = ta.v[i] * tb.v[i];
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, b] {
    const auto& go = nodes_[id].t.g;
    const auto& va = nodes_[a].t.v;
    const auto& vb = nodes_[b].t.v;
    for (std::size_t i = 0; i < go.size(); ++i) {
      nodes_[a].t.g[i] += go[i] * vb[i];
      nodes_[b].t.g[i] += go[i] * va[i];
    }
  };
  return id;
}

VarId Graph::scale(VarId a, double c) {
  const Tensor& ta = nodes_[a].t;
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = ta.v[i] * c;
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, c] {
    const auto& go = nodes_[id].t.g;
    for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].t.g[i] += go[i] * c;
  };
  return id;
}

VarId Graph::shift(VarId a, double c) {
  const Tensor& ta = nodes_[a].t;
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = ta.v[i] + c;
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a] {
    const auto& go = nodes_[id].t.g;
    for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].t.g[i] += go[i];
  };
  return id;
}

VarId Graph::sum(VarId a) {
  const Tensor& ta = nodes_[a].t;
  double s = 0.0;
  for (double x : ta.v) s += x;
  VarId id = push(Tensor({1}, {s}));
  nodes_[id].back = [this, id, a] {
    const double go = nodes_[id].t.g[0];
    for (auto& gi : nodes_[a].t.g) gi += go;
  };
  return id;
}

VarId Graph::concat(VarId a, VarId b) {
  const Tensor& ta = nodes_[a].t;
  const Tensor& tb = nodes_[b].t;
  const int na = static_cast<int>(ta.size());
  const int nb = static_cast<int>(tb.size());
  Tensor out({na + nb});
  std::copy(ta.v.begin(), ta.v.end(), out.v.begin());
  std::copy(tb.v.begin(), tb.v.end(), out.v.begin() + na);
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, b, na, nb] {
    const auto& go = nodes_[id].t.g;
    for (int i = 0; i < na; ++i) nodes_[a].t.g[i] += go[i];
    for (int i = 0; i < nb; ++i) nodes_[b].t.g[i] += go[na + i];
  };
  return id;
}

VarId Graph::reshape(VarId a, std::vector<int> shape) {
  const Tensor& ta = nodes_[a].t;
  if (Tensor::count(shape) != ta.size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out(std::move(shape), ta.v);
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a] {
    const auto& go = nodes_[id].t.g;
    for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].t.g[i] += go[i];
  };
  return id;
}

VarId Graph::activation(VarId a, Act kind) {
  const Tensor& ta = nodes_[a].t;
  Tensor out(ta.shape);
  switch (kind) {
    case Act::kLeakyRelu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = ta.v[i] >= 0.0 ? ta.v[i] : kLeakySlope * ta.v[i];
      break;
    case Act::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = stable_sigmoid(ta.v[i]);
      break;
    case Act::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = std::tanh(ta.v[i]);
      break;
  }
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, a, kind] {
    const auto& go = nodes_[id].t.g;
    const auto& vo = nodes_[id].t.v;
    const auto& vi = nodes_[a].t.v;
    auto& gi = nodes_[a].t.g;
    switch (kind) {
      case Act::kLeakyRelu:
        for (std::size_t i = 0; i < go.size(); ++i)
          gi[i] += go[i] * (vi[i] >= 0.0 ? 1.0 : kLeakySlope);
        break;
      case Act::kSigmoid:
        for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * vo[i] * (1.0 - vo[i]);
        break;
      case Act::kTanh:
        for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * (1.0 - vo[i] * vo[i]);
        break;
    }
  };
  return id;
}

VarId Graph::dense(VarId W, VarId x, VarId b) {
  const Tensor& tw = nodes_[W].t;
  const Tensor& tx = nodes_[x].t;
  const Tensor& tb = nodes_[b].t;
  if (tw.shape.size() != 2)
    throw std::invalid_argument("dense: weight must be 2-D, got " + shape_str(tw.shape));
  const int m = tw.shape[0];
  const int n = tw.shape[1];
  if (static_cast<int>(tx.size()) != n)
    throw std::invalid_argument("dense: weight " + shape_str(tw.shape) + " vs input length " +
                                std::to_string(tx.size()));
  if (static_cast<int>(tb.size()) != m)
    throw std::invalid_argument("dense: bias length mismatch");

  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* wrow = tw.v.data() + static_cast<std::size_t>(i) * n;
    double acc = tb.v[i];
    for (int j = 0; j < n; ++j) acc += wrow[j] * tx.v[j];
    out.v[i] = acc;
  }
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, W, x, b, m, n] {
    const auto& go = nodes_[id].t.g;
    const auto& vw = nodes_[W].t.v;
    const auto& vx = nodes_[x].t.v;
    auto& gw = nodes_[W].t.g;
    auto& gx = nodes_[x].t.g;
    auto& gb = nodes_[b].t.g;
    for (int i = 0; i < m; ++i) {
      const double gi = go[i] * dense_fault_;
      if (gi == 0.0) continue;
      const double* wrow = vw.data() + static_cast<std::size_t>(i) * n;
      double* gwrow = gw.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        gwrow[j] += gi * vx[j];
        gx[j] += gi * wrow[j];
      }
      gb[i] += gi;
    }
  };
  return id;
}

VarId Graph::conv2d(VarId in, VarId k, VarId b) {
  const Tensor& ti = nodes_[in].t;
  const Tensor& tk = nodes_[k].t;
  const Tensor& tb = nodes_[b].t;
  if (ti.shape.size() != 3)
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_str(ti.shape));
  if (tk.shape.size() != 4 || tk.shape[2] != 3 || tk.shape[3] != 3)
    throw std::invalid_argument("conv2d: kernel must be [C',C,3,3], got " + shape_str(tk.shape));
  const int ci = ti.shape[0], h = ti.shape[1], w = ti.shape[2];
  const int co = tk.shape[0];
  if (tk.shape[1] != ci)
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(tk.shape[1]) +
                                " input channels, input has " + std::to_string(ci));
  if (static_cast<int>(tb.size()) != co)
    throw std::invalid_argument("conv2d: bias length mismatch");

  Tensor out({co, h, w});
  const auto idx3 = [h, w](int c, int y, int x) {
    return (static_cast<std::size_t>(c) * h + y) * w + x;
  };
  const auto idx4 = [ci](int o, int c, int dy, int dx) {
    return ((static_cast<std::size_t>(o) * ci + c) * 3 + dy) * 3 + dx;
  };
  for (int o = 0; o < co; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = tb.v[o];
        for (int c = 0; c < ci; ++c) {
          for (int dy = 0; dy < 3; ++dy) {
            const int iy = y + dy - 1;
            if (iy < 0 || iy >= h) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int ix = x + dx - 1;
              if (ix < 0 || ix >= w) continue;
              acc += ti.v[idx3(c, iy, ix)] * tk.v[idx4(o, c, dy, dx)];
            }
          }
        }
        out.v[idx3(o, y, x)] = acc;
      }
    }
  }
  VarId id = push(std::move(out));
  nodes_[id].back = [this, id, in, k, b, ci, co, h, w, idx3, idx4] {
    const auto& go = nodes_[id].t.g;
    const auto& vi = nodes_[in].t.v;
    const auto& vk = nodes_[k].t.v;
    auto& gi = nodes_[in].t.g;
    auto& gk = nodes_[k].t.g;
    auto& gb = nodes_[b].t.g;
    for (int o = 0; o < co; ++o) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double g = go[idx3(o, y, x)];
          if (g == 0.0) continue;
          gb[o] += g;
          for (int c = 0; c < ci; ++c) {
            for (int dy = 0; dy < 3; ++dy) {
              const int iy = y + dy - 1;
              if (iy < 0 || iy >= h) continue;
              for (int dx = 0; dx < 3; ++dx) {
                const int ix = x + dx - 1;
                if (ix < 0 || ix >= w) continue;
                gk[idx4(o, c, dy, dx)] += g * vi[idx3(c, iy, ix)];
                gi[idx3(c, iy, ix)] += g * vk[idx4(o, c, dy, dx)];
              }
            }
          }
        }
      }
    }
  };
  return id;
}

std::pair<VarId, VarId> Graph::lstm_cell(VarId x, VarId h, VarId c, const LstmCellParams& p) {
  const VarId xh = concat(x, h);
  const VarId i_gate = sigmoid(dense(p.w_in, xh, p.b_in));
  const VarId f_gate = sigmoid(dense(p.w_forget, xh, p.b_forget));
  const VarId g_gate = tanh(dense(p.w_cell, xh, p.b_cell));
  const VarId o_gate = sigmoid(dense(p.w_out, xh, p.b_out));
  const VarId c_next = add(mul(f_gate, c), mul(i_gate, g_gate));
  const VarId h_next = mul(o_gate, tanh(c_next));
  return {h_next, c_next};
}

VarId Graph::sq_diff_sum(VarId pred, const Tensor& target) {
  const Tensor& tp = nodes_[pred].t;
  if (tp.size() != target.size())
    throw std::invalid_argument("sq_diff_sum: shape mismatch " + shape_str(tp.shape) + " vs " +
                                shape_str(target.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    const double d = tp.v[i] - target.v[i];
    s += d * d;
  }
  VarId id = push(Tensor({1}, {s}));
  // target is captured by value: losses must not dangle on caller buffers
  std::vector<double> tv = target.v;
  nodes_[id].back = [this, id, pred, tv = std::move(tv)] {
    const double go = nodes_[id].t.g[0];
    const auto& vp = nodes_[pred].t.v;
    auto& gp = nodes_[pred].t.g;
    for (std::size_t i = 0; i < vp.size(); ++i) gp[i] += go * 2.0 * (vp[i] - tv[i]);
  };
  return id;
}

VarId Graph::mse_loss(VarId pred, const Tensor& target, int sample_count) {
  if (sample_count < 1) throw std::invalid_argument("mse_loss: sample_count < 1");
  if (!nodes_[pred].t.same_shape(target))
    throw std::invalid_argument("mse_loss: shape mismatch");
  return scale(sq_diff_sum(pred, target), 1.0 / sample_count);
}

void Graph::backward(VarId loss, bool sink_params) {
  if (nodes_[loss].t.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(nodes_[loss].t.shape));
  for (auto& n : nodes_) n.t.zero_grad();
  nodes_[loss].t.g[0] = 1.0;
  for (int i = loss; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back();
  }
  if (sink_params) sink_param_grads();
}

void Graph::sink_param_grads() {
  for (auto& n : nodes_) {
    if (!n.sink) continue;
    for (std::size_t i = 0; i < n.t.size(); ++i) n.sink->g[i] += n.t.g[i];
  }
}

}  // namespace csifb
