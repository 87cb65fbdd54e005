#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "csifb/checkpoint.hpp"
#include "csifb/gradcheck.hpp"
#include "csifb/models.hpp"

using namespace csifb;

namespace {

AngularDelayFrame random_frame(int rows, int cols, Rng& rng) {
  AngularDelayFrame fr;
  fr.re.resize(rows, cols);
  fr.im.resize(rows, cols);
  fr.norm_offset = -1.0;
  fr.norm_scale = 2.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      fr.re(r, c) = rng.uniform();
      fr.im(r, c) = rng.uniform();
    }
  return fr;
}

ChannelGroup random_group(const ModelDims& dims, int t, Rng& rng) {
  ChannelGroup g;
  for (int i = 0; i < t; ++i) g.frames.push_back(random_frame(dims.n_delay, dims.n_tx, rng));
  return g;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("codeword lengths at paper scale follow M = CR * 2N") {
  const int n2 = 2 * 32 * 32;
  CHECK(codeword_len(n2, 0.25) == 512);
  CHECK(codeword_len(n2, 1.0 / 16) == 128);
  CHECK(codeword_len(n2, 1.0 / 64) == 32);
  CHECK_THROWS_AS(codeword_len(n2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(codeword_len(128, 0.0), std::invalid_argument);
}

TEST_CASE("an all-zero frame with zero biases encodes to a zero codeword") {
  Rng rng(1);
  CsiNetParams p = init_csinet(8, 8, 16, 16, rng);  // biases start at zero
  AngularDelayFrame zero;
  zero.re = Eigen::MatrixXd::Zero(8, 8);
  zero.im = Eigen::MatrixXd::Zero(8, 8);
  for (double v : csinet_encode(zero, p)) CHECK(v == 0.0);
}

TEST_CASE("the shared low-CR encoder maps identical frames to identical codewords") {
  Rng rng(2);
  CsiNetParams p = init_csinet(8, 8, 8, 40, rng);
  const AngularDelayFrame fr = random_frame(8, 8, rng);
  CHECK(csinet_encode(fr, p) == csinet_encode(fr, p));
}

TEST_CASE("encoder rejects a frame that does not match its dimensions") {
  Rng rng(3);
  CsiNetParams p = init_csinet(8, 8, 16, 16, rng);
  CHECK_THROWS_AS(csinet_encode(random_frame(4, 8, rng), p), std::invalid_argument);
}

TEST_CASE("decoder output shape and open-interval range") {
  Rng rng(4);
  CsiNetParams p = init_csinet(6, 5, 10, 10, rng);
  std::vector<double> code(10);
  for (auto& v : code) v = rng.uniform(-2.0, 2.0);
  const Tensor out = csinet_decode(code, p);
  CHECK(out.shape == std::vector<int>{2, 6, 5});
  for (double v : out.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(csinet_decode(std::vector<double>(7, 0.0), p), std::invalid_argument);
}

TEST_CASE("RefineNet blocks with zero weights act as pure skips") {
  Rng rng(5);
  CsiNetParams p = init_csinet(4, 4, 6, 6, rng);
  auto zero_block = [](RefineNetParams& r) {
    for (Tensor* t : {&r.k1, &r.b1, &r.k2, &r.b2, &r.k3, &r.b3, &r.k4, &r.b4})
      std::fill(t->v.begin(), t->v.end(), 0.0);
  };
  zero_block(p.refine1);
  zero_block(p.refine2);
  // out conv = per-channel center-1 identity, so the decoder reduces to
  // sigmoid(dense(s)); a broken skip would zero the refine outputs instead
  std::fill(p.out_conv_k.v.begin(), p.out_conv_k.v.end(), 0.0);
  std::fill(p.out_conv_b.v.begin(), p.out_conv_b.v.end(), 0.0);
  p.out_conv_k.v[0 * 2 * 9 + 0 * 9 + 4] = 1.0;
  p.out_conv_k.v[1 * 2 * 9 + 1 * 9 + 4] = 1.0;

  std::vector<double> code(6);
  for (auto& v : code) v = rng.uniform(-1.0, 1.0);
  const Tensor out = csinet_decode(code, p);

  Graph g;
  Tensor ct({6}, code);
  const VarId direct = g.sigmoid(
      g.dense(g.input(p.dec_dense_w), g.input(ct), g.input(p.dec_dense_b)));
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.v[i] == g.value(direct).v[i]);
}

TEST_CASE("lstm stack: single step shape and the zero-parameter midpoint") {
  Rng rng(6);
  LstmStackParams p = init_lstm_stack(12, rng);
  for (auto& layer : p.layers)
    for (Tensor* t : {&layer.w_in, &layer.b_in, &layer.w_forget, &layer.b_forget,
                      &layer.w_cell, &layer.b_cell, &layer.w_out, &layer.b_out})
      std::fill(t->v.begin(), t->v.end(), 0.0);
  const LstmStackRun run =
      lstm_stack_forward({std::vector<double>(12, 0.3)}, p, LstmState::zero(3, 12));
  REQUIRE(run.outputs.size() == 1);
  CHECK(run.outputs[0].size() == 12);
  for (double v : run.outputs[0].v) CHECK(v == 0.5);
}

TEST_CASE("lstm state carry: one T=4 run equals two threaded T=2 runs exactly") {
  Rng rng(7);
  LstmStackParams p = init_lstm_stack(10, rng);
  std::vector<std::vector<double>> seq;
  for (int t = 0; t < 4; ++t) {
    std::vector<double> x(10);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    seq.push_back(std::move(x));
  }
  const LstmStackRun whole = lstm_stack_forward(seq, p, LstmState::zero(3, 10));
  const LstmStackRun first =
      lstm_stack_forward({seq[0], seq[1]}, p, LstmState::zero(3, 10));
  const LstmStackRun second = lstm_stack_forward({seq[2], seq[3]}, p, first.final_state);
  CHECK(whole.outputs[0].v == first.outputs[0].v);
  CHECK(whole.outputs[1].v == first.outputs[1].v);
  CHECK(whole.outputs[2].v == second.outputs[0].v);
  CHECK(whole.outputs[3].v == second.outputs[1].v);
  for (std::size_t l = 0; l < whole.final_state.h.size(); ++l) {
    CHECK(whole.final_state.h[l] == second.final_state.h[l]);
    CHECK(whole.final_state.c[l] == second.final_state.c[l]);
  }
}

TEST_CASE("composite forward: shapes, boundary T=1, determinism") {
  ModelDims dims{4, 4, 16, 4};
  Rng rng(8);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);

  const ChannelGroup g1 = random_group(dims, 1, rng);
  const auto outs1 = csinet_lstm_forward(g1, p);
  REQUIRE(outs1.size() == 1);
  CHECK(outs1[0].shape == std::vector<int>{2, 4, 4});

  const ChannelGroup g4 = random_group(dims, 4, rng);
  const auto outs4 = csinet_lstm_forward(g4, p);
  REQUIRE(outs4.size() == 4);
  for (const auto& o : outs4) {
    CHECK(o.shape == std::vector<int>{2, 4, 4});
    for (double v : o.v) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }

  const auto outs4b = csinet_lstm_forward(g4, p);
  for (std::size_t t = 0; t < 4; ++t) CHECK(outs4[t].v == outs4b[t].v);

  CHECK_THROWS_AS(csinet_lstm_forward(ChannelGroup{}, p), std::invalid_argument);
}

TEST_CASE("composite forward is causal: future frames cannot move past outputs") {
  ModelDims dims{4, 4, 16, 4};
  Rng rng(9);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  ChannelGroup g = random_group(dims, 4, rng);
  const auto base = csinet_lstm_forward(g, p);

  ChannelGroup permuted = g;
  std::swap(permuted.frames[2], permuted.frames[3]);
  const auto moved = csinet_lstm_forward(permuted, p);
  CHECK(moved[0].v == base[0].v);
  CHECK(moved[1].v == base[1].v);
  CHECK(moved[2].v != base[2].v);

  ChannelGroup tail_changed = g;
  tail_changed.frames[3] = random_frame(4, 4, rng);
  const auto tail = csinet_lstm_forward(tail_changed, p);
  for (int t = 0; t < 3; ++t) CHECK(tail[t].v == base[t].v);
}

TEST_CASE("parameter count does not depend on the group length") {
  ModelDims dims{4, 4, 16, 4};
  Rng rng(10);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  const std::size_t count = p.parameter_count();
  csinet_lstm_forward(random_group(dims, 2, rng), p);
  CHECK(p.parameter_count() == count);
  csinet_lstm_forward(random_group(dims, 7, rng), p);
  CHECK(p.parameter_count() == count);
  // one low-CR parameter set, reused: its decoder input is m_high + m_low
  CHECK(p.low.m_decoder_in == dims.m_high + dims.m_low);
}

TEST_CASE("fresh initialization is finite with weights bounded by 1") {
  ModelDims dims{8, 8, 32, 8};
  Rng rng(11);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  p.visit([&](const std::string& name, Tensor& t) {
    for (double v : t.v) {
      CHECK(std::isfinite(v));
      CHECK(std::fabs(v) <= 1.0);
    }
    (void)name;
  });
}

TEST_CASE("checkpoint save/load/save round trip is bit-exact") {
  ModelDims dims{4, 4, 8, 2};
  Rng rng(12);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  save_csinet_lstm(p, "/tmp/csifb_m1.ckpt", "cfg-a");
  CsiNetLstmParams q = load_csinet_lstm("/tmp/csifb_m1.ckpt");
  save_csinet_lstm(q, "/tmp/csifb_m2.ckpt", "cfg-a");
  CHECK(slurp("/tmp/csifb_m1.ckpt") == slurp("/tmp/csifb_m2.ckpt"));

  bool same = true;
  q.visit([&](const std::string& name, Tensor& t) {
    Tensor* src = nullptr;
    p.visit([&](const std::string& n2, Tensor& t2) {
      if (n2 == name) src = &t2;
    });
    REQUIRE(src != nullptr);
    if (t.v != src->v) same = false;
  });
  CHECK(same);
  CHECK(checkpoint_kind("/tmp/csifb_m1.ckpt") == "csinet_lstm");
  std::remove("/tmp/csifb_m1.ckpt");
  std::remove("/tmp/csifb_m2.ckpt");
}

TEST_CASE("standalone csinet checkpoints round trip too") {
  Rng rng(13);
  CsiNetParams p = init_csinet(4, 4, 8, 8, rng);
  save_csinet(p, "/tmp/csifb_c1.ckpt");
  const CsiNetParams q = load_csinet("/tmp/csifb_c1.ckpt");
  CHECK(q.enc_dense_w.v == p.enc_dense_w.v);
  CHECK(q.m_codeword == 8);
  CHECK(checkpoint_kind("/tmp/csifb_c1.ckpt") == "csinet");
  std::remove("/tmp/csifb_c1.ckpt");
}

TEST_CASE("preload copies encoders exactly and errors on dimension mismatch") {
  ModelDims dims{4, 4, 16, 4};
  Rng rng(14);
  CsiNetLstmParams composite = init_csinet_lstm(dims, rng);
  CsiNetParams high = init_csinet(4, 4, 16, 16, rng);
  CsiNetParams low = init_csinet(4, 4, 4, 4, rng);
  preload_from_csinet(composite, high, low);

  const AngularDelayFrame fr = random_frame(4, 4, rng);
  CHECK(csinet_encode(fr, composite.high) == csinet_encode(fr, high));
  CHECK(csinet_encode(fr, composite.low) == csinet_encode(fr, low));

  // the s_t columns of the composite low decoder carry the standalone weights
  const int dst_cols = composite.low.dec_dense_w.shape[1];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(composite.low.dec_dense_w.v[r * dst_cols + dims.m_high + c] ==
            low.dec_dense_w.v[r * 4 + c]);

  CsiNetParams wrong = init_csinet(4, 4, 8, 8, rng);
  CHECK_THROWS_WITH_AS(preload_from_csinet(composite, wrong, low),
                       doctest::Contains("m_high"), std::invalid_argument);
  CsiNetParams wrong_shape = init_csinet(3, 4, 16, 16, rng);
  CHECK_THROWS_WITH_AS(preload_from_csinet(composite, wrong_shape, low),
                       doctest::Contains("enc_conv"), std::invalid_argument);
}

TEST_CASE("wire quantization is idempotent") {
  Rng rng(15);
  std::vector<double> v(64);
  for (auto& x : v) x = rng.uniform(-3.0, 3.0);
  const auto q1 = quantize_f32(v);
  CHECK(quantize_f32(q1) == q1);
}

TEST_CASE("full tiny composite passes the gradient check") {
  ModelDims dims{3, 2, 6, 2};
  Rng rng(16);
  CsiNetLstmParams p = init_csinet_lstm(dims, rng);
  ChannelGroup g = random_group(dims, 2, rng);

  std::vector<Tensor> targets;
  for (const auto& fr : g.frames) {
    Tensor t = frame_to_tensor(fr);
    t.shape = {static_cast<int>(t.size())};
    targets.push_back(std::move(t));
  }

  const auto report = grad_check(
      [&](Graph& graph, const std::vector<Tensor*>&) {
        CsiNetNet high(graph, p.high);
        CsiNetNet low(graph, p.low);
        LstmStackNet lstm(graph, p.lstm);
        const VarId s1 = high.encode(graph.input(frame_to_tensor(g.frames[0])));
        std::vector<VarId> dec{high.decode(s1)};
        for (std::size_t t = 1; t < g.frames.size(); ++t) {
          const VarId st = low.encode(graph.input(frame_to_tensor(g.frames[t])));
          dec.push_back(low.decode(graph.concat(s1, st)));
        }
        LstmStackNet::State state = lstm.zero_state();
        VarId loss = graph.input({1}, {0.0});
        for (std::size_t t = 0; t < g.frames.size(); ++t) {
          const VarId out = lstm.step(graph.flatten(dec[t]), state);
          loss = graph.add(loss, graph.sq_diff_sum(out, targets[t]));
        }
        return loss;
      },
      p.all());
  CHECK(report.max_rel_err < 1e-4);
}
