#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csifb/dataset.hpp"
#include "csifb/graph.hpp"
#include "csifb/rng.hpp"

namespace csifb {

struct ModelDims {
  int n_delay = 8;  // N_c'
  int n_tx = 8;     // N_t
  int m_high = 32;
  int m_low = 8;

  int n2() const { return 2 * n_delay * n_tx; }  // flattened frame length
};

/// Codeword length for a compression ratio: M = CR * 2N.
int codeword_len(int n2, double cr);

/// Four 3x3 conv layers (2->8->16->8->2) with an identity skip from block
/// input to output.
struct RefineNetParams {
  Tensor k1, b1, k2, b2, k3, b3, k4, b4;
  void visit(const std::string& prefix,
             const std::function<void(const std::string&, Tensor&)>& fn);
};

/// Standalone CsiNet: conv+dense encoder, dense+RefineNet decoder. The
/// decoder input length may exceed the encoder output length (the
/// composite feeds concatenated codewords into the low-CR decoder).
struct CsiNetParams {
  int n_delay = 0, n_tx = 0;
  int m_codeword = 0;    // encoder output length
  int m_decoder_in = 0;  // decoder dense input length
  Tensor enc_conv_k, enc_conv_b;
  Tensor enc_dense_w, enc_dense_b;
  Tensor dec_dense_w, dec_dense_b;
  RefineNetParams refine1, refine2;
  Tensor out_conv_k, out_conv_b;
  void visit(const std::string& prefix,
             const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<Tensor*> all();
};

struct LstmLayerParams {
  Tensor w_in, b_in, w_forget, b_forget, w_cell, b_cell, w_out, b_out;
  void visit(const std::string& prefix,
             const std::function<void(const std::string&, Tensor&)>& fn);
};

/// Three stacked layers, hidden dimension = input dimension = 2 N_c' N_t.
struct LstmStackParams {
  std::vector<LstmLayerParams> layers;  // size 3
  int width() const { return layers.empty() ? 0 : layers[0].b_in.shape[0]; }
  void visit(const std::string& prefix,
             const std::function<void(const std::string&, Tensor&)>& fn);
};

/// One high-CR CsiNet, one shared low-CR CsiNet (reused for t = 2..T), and
/// the LSTM stack. Parameter count is independent of T.
struct CsiNetLstmParams {
  ModelDims dims;
  CsiNetParams high;  // m_decoder_in == m_high
  CsiNetParams low;   // m_decoder_in == m_high + m_low
  LstmStackParams lstm;
  void visit(const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<Tensor*> all();
  std::size_t parameter_count();
};

CsiNetParams init_csinet(int n_delay, int n_tx, int m_codeword, int m_decoder_in, Rng& rng);
LstmStackParams init_lstm_stack(int width, Rng& rng);
CsiNetLstmParams init_csinet_lstm(const ModelDims& dims, Rng& rng);

/// Copies standalone CsiNet blocks into the composite as pretraining. The
/// low decoder's dense input grows from M_low to M_high + M_low; the
/// trailing columns (those fed by s_t) receive the standalone weights and
/// the s_1 columns keep their fresh initialization. LSTM parameters are
/// left untouched.
void preload_from_csinet(CsiNetLstmParams& target, const CsiNetParams& high_ckpt,
                         const CsiNetParams& low_ckpt);

/// Off-graph LSTM state snapshot, carried between per-step graphs by the
/// feedback protocol.
struct LstmState {
  std::vector<std::vector<double>> h;  // per layer
  std::vector<std::vector<double>> c;
  static LstmState zero(int layers, int width);
  bool is_zero() const;
};

// ---- per-graph network bindings ----
// Parameters are bound to graph leaves once per graph; every call then
// reuses the same leaf nodes, so weight sharing (and its gradient
// accumulation) is structural.

class CsiNetNet {
 public:
  CsiNetNet(Graph& g, CsiNetParams& p);
  VarId encode(VarId frame);     // [2,N_c',N_t] -> [M]
  VarId decode(VarId codeword);  // [m_decoder_in] -> [2,N_c',N_t], sigmoid output
  const CsiNetParams& params() const { return p_; }

 private:
  VarId refine(VarId x, const std::vector<VarId>& block);
  Graph& g_;
  CsiNetParams& p_;
  VarId enc_conv_k_, enc_conv_b_, enc_dense_w_, enc_dense_b_;
  VarId dec_dense_w_, dec_dense_b_;
  std::vector<VarId> refine1_, refine2_;  // k1,b1,...,k4,b4
  VarId out_conv_k_, out_conv_b_;
};

class LstmStackNet {
 public:
  struct State {
    std::vector<VarId> h, c;  // per layer, graph nodes
  };

  LstmStackNet(Graph& g, LstmStackParams& p);
  State zero_state();
  State inject_state(const LstmState& s);
  LstmState extract_state(const State& s) const;

  /// One time step; state vars are replaced by the next-step nodes, so
  /// gradients flow through time when steps share a graph. The output is
  /// the top hidden state mapped onto (0,1) by (h+1)/2.
  VarId step(VarId x, State& state);

 private:
  Graph& g_;
  LstmStackParams& p_;
  std::vector<Graph::LstmCellParams> cells_;
};

// ---- value-level forward passes ----

Tensor frame_to_tensor(const AngularDelayFrame& fr);
AngularDelayFrame tensor_to_frame(const Tensor& t, const NormStats& stats);

/// Round-trips every element through IEEE float32 (the wire precision).
std::vector<double> quantize_f32(const std::vector<double>& v);

std::vector<double> csinet_encode(const AngularDelayFrame& frame, CsiNetParams& p);
Tensor csinet_decode(const std::vector<double>& codeword, CsiNetParams& p);

struct LstmStackRun {
  std::vector<Tensor> outputs;  // each [2 N_c' N_t]
  LstmState final_state;
};
LstmStackRun lstm_stack_forward(const std::vector<std::vector<double>>& sequence,
                                LstmStackParams& p, const LstmState& initial);

struct ForwardOptions {
  bool quantize_codewords = false;  // apply wire (float32) quantization
};

/// Full CsiNet-LSTM pass over one group: frame 1 through the high-CR
/// CsiNet, frames 2..T through the shared low-CR encoder with codeword
/// concatenation, all decoder outputs through the LSTM stack. Output t is
/// the step-t LSTM output reshaped to [2, N_c', N_t].
std::vector<Tensor> csinet_lstm_forward(const ChannelGroup& group, CsiNetLstmParams& p,
                                        const ForwardOptions& opts = {});

}  // namespace csifb
