#pragma once

#include <array>
#include <utility>
#include <vector>

#include "scoreflow/mlp.hpp"

namespace scoreflow {

// Forward propagation of input-directional derivatives ("jets") through an
// Mlp, batched over columns. Streams are ordered [primal, first-order dirs,
// second-order pairs, third-order triples]. Pairs/triples index into dirs;
// every sub-pair of a triple must itself be requested.
struct JetRequest {
  std::vector<VectorXd> dirs;
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::array<int, 3>> triples;

  int stream_count() const {
    return 1 + static_cast<int>(dirs.size() + pairs.size() + triples.size());
  }
  int first_stream(int k) const { return 1 + k; }
  int pair_stream(int p) const { return 1 + static_cast<int>(dirs.size()) + p; }
  int triple_stream(int t) const {
    return 1 + static_cast<int>(dirs.size() + pairs.size()) + t;
  }
  int find_pair(int i, int j) const;  // -1 if absent
  void validate(int input_dim) const;
};

struct JetWorkspace {
  // act[l][s]: stream activations entering layer l; pre[l][s]: pre-activations
  // produced by layer l. P/Q/R: softplus derivative tables per hidden layer.
  std::vector<std::vector<MatrixXd>> act;
  std::vector<std::vector<MatrixXd>> pre;
  std::vector<MatrixXd> P, Q, R;
  std::vector<MatrixXd> out;  // output streams, n_out x batch
  int batch = 0;
  bool has_backward_state = false;
};

// need_third_tables: compute R in the forward pass (required when triples are
// present or when a backward pass over second-order streams will follow).
void jet_forward(const Mlp& net, const MatrixXd& input, const JetRequest& req,
                 JetWorkspace& ws, bool need_third_tables);

// Accumulates d(loss)/d(theta) into grad for loss = sum over batch columns of
// <out_cot[s], out[s]>. Third-order streams must be absent.
void jet_backward(const Mlp& net, const JetRequest& req, const JetWorkspace& ws,
                  const std::vector<MatrixXd>& out_cot, VectorXd& grad);

}  // namespace scoreflow
