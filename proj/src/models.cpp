#include "csifb/models.hpp"

#include <cmath>
#include <stdexcept>

namespace csifb {

namespace {

void glorot_fill(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& x : t.v) x = rng.uniform(-bound, bound);
}

Tensor conv_kernel(int c_out, int c_in, Rng& rng) {
  Tensor k({c_out, c_in, 3, 3});
  glorot_fill(k, c_in * 9, c_out * 9, rng);
  return k;
}

}  // namespace

int codeword_len(int n2, double cr) {
  const int m = static_cast<int>(std::lround(n2 * cr));
  if (m < 1 || m >= n2)
    throw std::invalid_argument("codeword_len: CR " + std::to_string(cr) +
                                " gives M = " + std::to_string(m) + " outside [1, 2N)");
  return m;
}

void RefineNetParams::visit(const std::string& prefix,
                            const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".k1", k1);
  fn(prefix + ".b1", b1);
  fn(prefix + ".k2", k2);
  fn(prefix + ".b2", b2);
  fn(prefix + ".k3", k3);
  fn(prefix + ".b3", b3);
  fn(prefix + ".k4", k4);
  fn(prefix + ".b4", b4);
}

void CsiNetParams::visit(const std::string& prefix,
                         const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".enc_conv_k", enc_conv_k);
  fn(prefix + ".enc_conv_b", enc_conv_b);
  fn(prefix + ".enc_dense_w", enc_dense_w);
  fn(prefix + ".enc_dense_b", enc_dense_b);
  fn(prefix + ".dec_dense_w", dec_dense_w);
  fn(prefix + ".dec_dense_b", dec_dense_b);
  refine1.visit(prefix + ".refine1", fn);
  refine2.visit(prefix + ".refine2", fn);
  fn(prefix + ".out_conv_k", out_conv_k);
  fn(prefix + ".out_conv_b", out_conv_b);
}

std::vector<Tensor*> CsiNetParams::all() {
  std::vector<Tensor*> out;
  visit("p", [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

void LstmLayerParams::visit(const std::string& prefix,
                            const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".w_in", w_in);
  fn(prefix + ".b_in", b_in);
  fn(prefix + ".w_forget", w_forget);
  fn(prefix + ".b_forget", b_forget);
  fn(prefix + ".w_cell", w_cell);
  fn(prefix + ".b_cell", b_cell);
  fn(prefix + ".w_out", w_out);
  fn(prefix + ".b_out", b_out);
}

void LstmStackParams::visit(const std::string& prefix,
                            const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].visit(prefix + ".layer" + std::to_string(i), fn);
}

void CsiNetLstmParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
  high.visit("high", fn);
  low.visit("low", fn);
  lstm.visit("lstm", fn);
}

std::vector<Tensor*> CsiNetLstmParams::all() {
  std::vector<Tensor*> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t CsiNetLstmParams::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

namespace {

RefineNetParams init_refine(Rng& rng) {
  RefineNetParams r;
  r.k1 = conv_kernel(8, 2, rng);
  r.b1 = Tensor({8});
  r.k2 = conv_kernel(16, 8, rng);
  r.b2 = Tensor({16});
  r.k3 = conv_kernel(8, 16, rng);
  r.b3 = Tensor({8});
  r.k4 = conv_kernel(2, 8, rng);
  r.b4 = Tensor({2});
  return r;
}

}  // namespace

CsiNetParams init_csinet(int n_delay, int n_tx, int m_codeword, int m_decoder_in, Rng& rng) {
  if (n_delay < 1 || n_tx < 1 || m_codeword < 1 || m_decoder_in < m_codeword)
    throw std::invalid_argument("init_csinet: inconsistent dimensions");
  const int n2 = 2 * n_delay * n_tx;
  CsiNetParams p;
  p.n_delay = n_delay;
  p.n_tx = n_tx;
  p.m_codeword = m_codeword;
  p.m_decoder_in = m_decoder_in;
  p.enc_conv_k = conv_kernel(2, 2, rng);
  p.enc_conv_b = Tensor({2});
  p.enc_dense_w = Tensor({m_codeword, n2});
  glorot_fill(p.enc_dense_w, n2, m_codeword, rng);
  p.enc_dense_b = Tensor({m_codeword});
  p.dec_dense_w = Tensor({n2, m_decoder_in});
  glorot_fill(p.dec_dense_w, m_decoder_in, n2, rng);
  p.dec_dense_b = Tensor({n2});
  p.refine1 = init_refine(rng);
  p.refine2 = init_refine(rng);
  p.out_conv_k = conv_kernel(2, 2, rng);
  p.out_conv_b = Tensor({2});
  return p;
}

LstmStackParams init_lstm_stack(int width, Rng& rng) {
  LstmStackParams p;
  p.layers.resize(3);
  for (auto& layer : p.layers) {
    const int n_in = width + width;  // [x; h]
    for (Tensor* w : {&layer.w_in, &layer.w_forget, &layer.w_cell, &layer.w_out}) {
      *w = Tensor({width, n_in});
      glorot_fill(*w, n_in, width, rng);
    }
    layer.b_in = Tensor({width});
    layer.b_forget = Tensor({width});
    // forget bias +1 keeps early memory open
    std::fill(layer.b_forget.v.begin(), layer.b_forget.v.end(), 1.0);
    layer.b_cell = Tensor({width});
    layer.b_out = Tensor({width});
  }
  return p;
}

CsiNetLstmParams init_csinet_lstm(const ModelDims& dims, Rng& rng) {
  if (dims.m_high <= dims.m_low)
    throw std::invalid_argument("init_csinet_lstm: m_high must exceed m_low");
  CsiNetLstmParams p;
  p.dims = dims;
  p.high = init_csinet(dims.n_delay, dims.n_tx, dims.m_high, dims.m_high, rng);
  p.low = init_csinet(dims.n_delay, dims.n_tx, dims.m_low, dims.m_high + dims.m_low, rng);
  p.lstm = init_lstm_stack(dims.n2(), rng);
  return p;
}

namespace {

void copy_block(const std::string& name, Tensor& dst, const Tensor& src) {
  if (dst.shape != src.shape)
    throw std::invalid_argument("preload: block '" + name + "' is " + shape_str(src.shape) +
                                " in the checkpoint but " + shape_str(dst.shape) +
                                " in the composite");
  dst.v = src.v;
}

void copy_refine(const std::string& prefix, RefineNetParams& dst, const RefineNetParams& src) {
  copy_block(prefix + ".k1", dst.k1, src.k1);
  copy_block(prefix + ".b1", dst.b1, src.b1);
  copy_block(prefix + ".k2", dst.k2, src.k2);
  copy_block(prefix + ".b2", dst.b2, src.b2);
  copy_block(prefix + ".k3", dst.k3, src.k3);
  copy_block(prefix + ".b3", dst.b3, src.b3);
  copy_block(prefix + ".k4", dst.k4, src.k4);
  copy_block(prefix + ".b4", dst.b4, src.b4);
}

void copy_csinet(const std::string& prefix, CsiNetParams& dst, const CsiNetParams& src) {
  copy_block(prefix + ".enc_conv_k", dst.enc_conv_k, src.enc_conv_k);
  copy_block(prefix + ".enc_conv_b", dst.enc_conv_b, src.enc_conv_b);
  copy_block(prefix + ".enc_dense_w", dst.enc_dense_w, src.enc_dense_w);
  copy_block(prefix + ".enc_dense_b", dst.enc_dense_b, src.enc_dense_b);
  if (dst.m_decoder_in == src.m_decoder_in) {
    copy_block(prefix + ".dec_dense_w", dst.dec_dense_w, src.dec_dense_w);
  } else if (dst.m_decoder_in > src.m_decoder_in) {
    // composite decoder sees concat(s1, s_t): the trailing s_t columns get
    // the standalone weights, the s1 columns keep their fresh init
    if (dst.dec_dense_w.shape[0] != src.dec_dense_w.shape[0])
      throw std::invalid_argument("preload: block '" + prefix +
                                  ".dec_dense_w' rows mismatch: checkpoint " +
                                  shape_str(src.dec_dense_w.shape) + " vs composite " +
                                  shape_str(dst.dec_dense_w.shape));
    const int rows = dst.dec_dense_w.shape[0];
    const int dst_cols = dst.dec_dense_w.shape[1];
    const int src_cols = src.dec_dense_w.shape[1];
    const int col0 = dst_cols - src_cols;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < src_cols; ++c)
        dst.dec_dense_w.v[static_cast<std::size_t>(r) * dst_cols + col0 + c] =
            src.dec_dense_w.v[static_cast<std::size_t>(r) * src_cols + c];
  } else {
    throw std::invalid_argument("preload: block '" + prefix +
                                ".dec_dense_w' checkpoint wider than composite");
  }
  copy_block(prefix + ".dec_dense_b", dst.dec_dense_b, src.dec_dense_b);
  copy_refine(prefix + ".refine1", dst.refine1, src.refine1);
  copy_refine(prefix + ".refine2", dst.refine2, src.refine2);
  copy_block(prefix + ".out_conv_k", dst.out_conv_k, src.out_conv_k);
  copy_block(prefix + ".out_conv_b", dst.out_conv_b, src.out_conv_b);
}

}  // namespace

void preload_from_csinet(CsiNetLstmParams& target, const CsiNetParams& high_ckpt,
                         const CsiNetParams& low_ckpt) {
  if (high_ckpt.m_codeword != target.dims.m_high)
    throw std::invalid_argument("preload: high checkpoint codeword length " +
                                std::to_string(high_ckpt.m_codeword) + " != m_high " +
                                std::to_string(target.dims.m_high));
  if (low_ckpt.m_codeword != target.dims.m_low)
    throw std::invalid_argument("preload: low checkpoint codeword length " +
                                std::to_string(low_ckpt.m_codeword) + " != m_low " +
                                std::to_string(target.dims.m_low));
  copy_csinet("high", target.high, high_ckpt);
  copy_csinet("low", target.low, low_ckpt);
}

// ---- per-graph bindings ----

CsiNetNet::CsiNetNet(Graph& g, CsiNetParams& p) : g_(g), p_(p) {
  enc_conv_k_ = g.param(p.enc_conv_k);
  enc_conv_b_ = g.param(p.enc_conv_b);
  enc_dense_w_ = g.param(p.enc_dense_w);
  enc_dense_b_ = g.param(p.enc_dense_b);
  dec_dense_w_ = g.param(p.dec_dense_w);
  dec_dense_b_ = g.param(p.dec_dense_b);
  for (RefineNetParams* r : {&p.refine1, &p.refine2}) {
    std::vector<VarId> ids;
    for (Tensor* t : {&r->k1, &r->b1, &r->k2, &r->b2, &r->k3, &r->b3, &r->k4, &r->b4})
      ids.push_back(g.param(*t));
    (r == &p.refine1 ? refine1_ : refine2_) = std::move(ids);
  }
  out_conv_k_ = g.param(p.out_conv_k);
  out_conv_b_ = g.param(p.out_conv_b);
}

VarId CsiNetNet::refine(VarId x, const std::vector<VarId>& block) {
  VarId y = g_.leaky_relu(g_.conv2d(x, block[0], block[1]));
  y = g_.leaky_relu(g_.conv2d(y, block[2], block[3]));
  y = g_.leaky_relu(g_.conv2d(y, block[4], block[5]));
  y = g_.conv2d(y, block[6], block[7]);
  return g_.add(x, y);
}

VarId CsiNetNet::encode(VarId frame) {
  const auto& shape = g_.value(frame).shape;
  if (shape.size() != 3 || shape[0] != 2 || shape[1] != p_.n_delay || shape[2] != p_.n_tx)
    throw std::invalid_argument("encoder: frame shape " + shape_str(shape) +
                                " does not match params (2," + std::to_string(p_.n_delay) +
                                "," + std::to_string(p_.n_tx) + ")");
  VarId y = g_.leaky_relu(g_.conv2d(frame, enc_conv_k_, enc_conv_b_));
  return g_.dense(enc_dense_w_, g_.flatten(y), enc_dense_b_);
}

VarId CsiNetNet::decode(VarId codeword) {
  if (static_cast<int>(g_.value(codeword).size()) != p_.m_decoder_in)
    throw std::invalid_argument("decoder: codeword length " +
                                std::to_string(g_.value(codeword).size()) + " != expected " +
                                std::to_string(p_.m_decoder_in));
  VarId y = g_.dense(dec_dense_w_, codeword, dec_dense_b_);
  y = g_.reshape(y, {2, p_.n_delay, p_.n_tx});
  y = refine(y, refine1_);
  y = refine(y, refine2_);
  y = g_.conv2d(y, out_conv_k_, out_conv_b_);
  return g_.sigmoid(y);
}

LstmState LstmState::zero(int layers, int width) {
  LstmState s;
  s.h.assign(layers, std::vector<double>(width, 0.0));
  s.c.assign(layers, std::vector<double>(width, 0.0));
  return s;
}

bool LstmState::is_zero() const {
  for (const auto& v : h)
    for (double x : v)
      if (x != 0.0) return false;
  for (const auto& v : c)
    for (double x : v)
      if (x != 0.0) return false;
  return true;
}

LstmStackNet::LstmStackNet(Graph& g, LstmStackParams& p) : g_(g), p_(p) {
  for (auto& layer : p.layers) {
    cells_.push_back(Graph::LstmCellParams{
        g.param(layer.w_in), g.param(layer.w_forget), g.param(layer.w_cell),
        g.param(layer.w_out), g.param(layer.b_in), g.param(layer.b_forget),
        g.param(layer.b_cell), g.param(layer.b_out)});
  }
}

LstmStackNet::State LstmStackNet::zero_state() {
  return inject_state(LstmState::zero(static_cast<int>(p_.layers.size()), p_.width()));
}

LstmStackNet::State LstmStackNet::inject_state(const LstmState& s) {
  if (s.h.size() != p_.layers.size())
    throw std::invalid_argument("lstm state: layer count mismatch");
  State out;
  for (std::size_t l = 0; l < s.h.size(); ++l) {
    out.h.push_back(g_.input({static_cast<int>(s.h[l].size())}, s.h[l]));
    out.c.push_back(g_.input({static_cast<int>(s.c[l].size())}, s.c[l]));
  }
  return out;
}

LstmState LstmStackNet::extract_state(const State& s) const {
  LstmState out;
  for (std::size_t l = 0; l < s.h.size(); ++l) {
    out.h.push_back(g_.value(s.h[l]).v);
    out.c.push_back(g_.value(s.c[l]).v);
  }
  return out;
}

VarId LstmStackNet::step(VarId x, State& state) {
  VarId cur = x;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    auto [h_next, c_next] = g_.lstm_cell(cur, state.h[l], state.c[l], cells_[l]);
    state.h[l] = h_next;
    state.c[l] = c_next;
    cur = h_next;
  }
  // map the top hidden state's (-1,1) range onto the (0,1) target range
  return g_.shift(g_.scale(cur, 0.5), 0.5);
}

// ---- value-level wrappers ----

Tensor frame_to_tensor(const AngularDelayFrame& fr) {
  const int rows = static_cast<int>(fr.re.rows());
  const int cols = static_cast<int>(fr.re.cols());
  Tensor t({2, rows, cols});
  std::size_t i = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t.v[i++] = fr.re(r, c);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t.v[i++] = fr.im(r, c);
  return t;
}

AngularDelayFrame tensor_to_frame(const Tensor& t, const NormStats& stats) {
  if (t.shape.size() != 3 || t.shape[0] != 2)
    throw std::invalid_argument("tensor_to_frame: expected [2,rows,cols]");
  const int rows = t.shape[1];
  const int cols = t.shape[2];
  AngularDelayFrame fr;
  fr.re.resize(rows, cols);
  fr.im.resize(rows, cols);
  fr.norm_offset = stats.offset;
  fr.norm_scale = stats.scale;
  std::size_t i = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) fr.re(r, c) = t.v[i++];
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) fr.im(r, c) = t.v[i++];
  return fr;
}

std::vector<double> quantize_f32(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<double>(static_cast<float>(v[i]));
  return out;
}

std::vector<double> csinet_encode(const AngularDelayFrame& frame, CsiNetParams& p) {
  Graph g;
  CsiNetNet net(g, p);
  return g.value(net.encode(g.input(frame_to_tensor(frame)))).v;
}

Tensor csinet_decode(const std::vector<double>& codeword, CsiNetParams& p) {
  Graph g;
  CsiNetNet net(g, p);
  return g.value(net.decode(g.input({static_cast<int>(codeword.size())}, codeword)));
}

LstmStackRun lstm_stack_forward(const std::vector<std::vector<double>>& sequence,
                                LstmStackParams& p, const LstmState& initial) {
  LstmStackRun run;
  LstmState state = initial;
  for (const auto& x : sequence) {
    Graph g;
    LstmStackNet net(g, p);
    LstmStackNet::State sv = net.inject_state(state);
    const VarId out = net.step(g.input({static_cast<int>(x.size())}, x), sv);
    run.outputs.push_back(g.value(out));
    state = net.extract_state(sv);
  }
  run.final_state = std::move(state);
  return run;
}

std::vector<Tensor> csinet_lstm_forward(const ChannelGroup& group, CsiNetLstmParams& p,
                                        const ForwardOptions& opts) {
  if (group.frames.empty()) throw std::invalid_argument("csinet_lstm_forward: empty group");
  const int n2 = p.dims.n2();

  std::vector<double> s1 = csinet_encode(group.frames[0], p.high);
  if (opts.quantize_codewords) s1 = quantize_f32(s1);

  std::vector<std::vector<double>> decoder_outputs;
  decoder_outputs.reserve(group.frames.size());
  decoder_outputs.push_back(csinet_decode(s1, p.high).v);
  for (std::size_t t = 1; t < group.frames.size(); ++t) {
    std::vector<double> st = csinet_encode(group.frames[t], p.low);
    if (opts.quantize_codewords) st = quantize_f32(st);
    std::vector<double> concat = s1;
    concat.insert(concat.end(), st.begin(), st.end());
    decoder_outputs.push_back(csinet_decode(concat, p.low).v);
  }

  const LstmStackRun run = lstm_stack_forward(
      decoder_outputs, p.lstm, LstmState::zero(static_cast<int>(p.lstm.layers.size()), n2));

  std::vector<Tensor> outputs;
  outputs.reserve(run.outputs.size());
  for (const auto& o : run.outputs) {
    Tensor t = o;
    t.shape = {2, p.dims.n_delay, p.dims.n_tx};
    outputs.push_back(std::move(t));
  }
  return outputs;
}

}  // namespace csifb
