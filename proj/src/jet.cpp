#include "scoreflow/jet.hpp"

namespace scoreflow {

int JetRequest::find_pair(int i, int j) const {
  if (i > j) std::swap(i, j);
  for (size_t p = 0; p < pairs.size(); ++p)
    if (pairs[p].first == i && pairs[p].second == j) return static_cast<int>(p);
  return -1;
}

void JetRequest::validate(int input_dim) const {
  for (const auto& d : dirs)
    if (d.size() != input_dim) throw std::invalid_argument("jet: direction dimension mismatch");
  const int nd = static_cast<int>(dirs.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= nd || j >= nd || i > j)
      throw std::invalid_argument("jet: bad pair indices");
  }
  for (const auto& t : triples) {
    if (!(t[0] <= t[1] && t[1] <= t[2]) || t[2] >= static_cast<int>(dirs.size()))
      throw std::invalid_argument("jet: bad triple indices");
    if (find_pair(t[0], t[1]) < 0 || find_pair(t[0], t[2]) < 0 || find_pair(t[1], t[2]) < 0)
      throw std::invalid_argument("jet: triple requires all sub-pairs");
  }
}

namespace {

void resize_streams(std::vector<std::vector<MatrixXd>>& v, int layers, int streams) {
  v.resize(layers);
  for (auto& row : v) row.resize(streams);
}

}  // namespace

void jet_forward(const Mlp& net, const MatrixXd& input, const JetRequest& req,
                 JetWorkspace& ws, bool need_third_tables) {
  const auto& widths = net.widths();
  const int L = net.config().num_layers();
  const int B = static_cast<int>(input.cols());
  const int n1 = static_cast<int>(req.dirs.size());
  const int n2 = static_cast<int>(req.pairs.size());
  const int n3 = static_cast<int>(req.triples.size());
  const int S = req.stream_count();
  if (input.rows() != widths[0]) throw std::invalid_argument("jet: input dimension mismatch");

  resize_streams(ws.act, L, S);
  resize_streams(ws.pre, L, S);
  ws.P.resize(L - 1);
  ws.Q.resize(L - 1);
  ws.R.resize(L - 1);
  ws.out.resize(S);
  ws.batch = B;
  ws.has_backward_state = true;

  // seeds
  ws.act[0][0] = input;
  for (int k = 0; k < n1; ++k)
    ws.act[0][req.first_stream(k)] = req.dirs[k].replicate(1, B);
  for (int p = 0; p < n2; ++p) ws.act[0][req.pair_stream(p)].setZero(widths[0], B);
  for (int t = 0; t < n3; ++t) ws.act[0][req.triple_stream(t)].setZero(widths[0], B);

  const bool want_R = need_third_tables || n3 > 0;

  for (int l = 0; l < L; ++l) {
    const auto W = net.weight(l);
    const auto b = net.bias(l);
    auto& pre = ws.pre[l];
    for (int s = 0; s < S; ++s) {
      pre[s].resize(widths[l + 1], B);
      if (l == 0 && s >= 1 + n1) {
        pre[s].setZero();  // zero seeds
        continue;
      }
      pre[s].noalias() = W * ws.act[l][s];
      if (s == 0) pre[s].colwise() += b;
    }
    if (l == L - 1) break;  // output layer is linear

    MatrixXd& P = ws.P[l];
    MatrixXd& Q = ws.Q[l];
    sigmoid_into(pre[0], P);
    if (n1 > 0) Q = (P.array() * (1.0 - P.array())).matrix();
    if (want_R) ws.R[l] = (Q.array() * (1.0 - 2.0 * P.array())).matrix();

    auto& act = ws.act[l + 1];
    act[0] = pre[0].unaryExpr([](double v) { return softplus(v); });
    for (int k = 0; k < n1; ++k) {
      const int s = req.first_stream(k);
      act[s] = (P.array() * pre[s].array()).matrix();
    }
    for (int p = 0; p < n2; ++p) {
      const int s = req.pair_stream(p);
      const auto& Ui = pre[req.first_stream(req.pairs[p].first)];
      const auto& Uj = pre[req.first_stream(req.pairs[p].second)];
      act[s] = (Q.array() * Ui.array() * Uj.array() + P.array() * pre[s].array()).matrix();
    }
    for (int t = 0; t < n3; ++t) {
      const int s = req.triple_stream(t);
      const auto [i, j, k] = std::tuple{req.triples[t][0], req.triples[t][1], req.triples[t][2]};
      const auto& Ui = pre[req.first_stream(i)].array();
      const auto& Uj = pre[req.first_stream(j)].array();
      const auto& Uk = pre[req.first_stream(k)].array();
      const auto& Sij = pre[req.pair_stream(req.find_pair(i, j))].array();
      const auto& Sik = pre[req.pair_stream(req.find_pair(i, k))].array();
      const auto& Sjk = pre[req.pair_stream(req.find_pair(j, k))].array();
      act[s] = (ws.R[l].array() * Ui * Uj * Uk +
                Q.array() * (Sij * Uk + Sik * Uj + Sjk * Ui) +
                P.array() * pre[s].array())
                   .matrix();
    }
  }
  for (int s = 0; s < S; ++s) ws.out[s] = ws.pre[L - 1][s];
}

void jet_backward(const Mlp& net, const JetRequest& req, const JetWorkspace& ws,
                  const std::vector<MatrixXd>& out_cot, VectorXd& grad) {
  if (!req.triples.empty())
    throw std::invalid_argument("jet: backward over third-order streams unsupported");
  if (!ws.has_backward_state) throw std::logic_error("jet: forward pass required first");
  const auto& widths = net.widths();
  const int L = net.config().num_layers();
  const int B = ws.batch;
  const int n1 = static_cast<int>(req.dirs.size());
  const int n2 = static_cast<int>(req.pairs.size());
  const int S = req.stream_count();
  if (static_cast<int>(out_cot.size()) != S)
    throw std::invalid_argument("jet: cotangent stream count mismatch");
  if (grad.size() != net.params().size()) grad.setZero(net.params().size());

  // sbar[s]: adjoint of layer-l pre-activations; abar[s]: adjoint of the
  // activations entering the layer.
  std::vector<MatrixXd> sbar(S), abar(S);
  for (int s = 0; s < S; ++s) sbar[s] = out_cot[s];

  for (int l = L - 1; l >= 0; --l) {
    const auto W = net.weight(l);
    // parameter gradients
    Eigen::Map<MatrixXd> wg(grad.data() + net.weight_offset(l), widths[l + 1], widths[l]);
    Eigen::Map<VectorXd> bg(grad.data() + net.bias_offset(l), widths[l + 1]);
    for (int s = 0; s < S; ++s) {
      if (l == 0 && s >= 1 + n1) continue;  // zero seed activations
      wg.noalias() += sbar[s] * ws.act[l][s].transpose();
    }
    bg.noalias() += sbar[0].rowwise().sum();

    if (l == 0) break;

    for (int s = 0; s < S; ++s) {
      abar[s].resize(widths[l], B);
      abar[s].noalias() = W.transpose() * sbar[s];
    }

    // translate activation adjoints to pre-activation adjoints at layer l-1
    const int h = l - 1;
    const auto& P = ws.P[h].array();
    const auto& pre = ws.pre[h];
    MatrixXd primal = (P * abar[0].array()).matrix();
    if (n1 > 0) {
      const auto& Q = ws.Q[h].array();
      for (int k = 0; k < n1; ++k) {
        const int s = req.first_stream(k);
        primal.array() += Q * pre[s].array() * abar[s].array();
      }
      for (int p = 0; p < n2; ++p) {
        const int s = req.pair_stream(p);
        const int i = req.pairs[p].first, j = req.pairs[p].second;
        const auto& Ui = pre[req.first_stream(i)].array();
        const auto& Uj = pre[req.first_stream(j)].array();
        primal.array() +=
            (ws.R[h].array() * Ui * Uj + Q * pre[s].array()) * abar[s].array();
      }
      // first-order adjoints pick up pair contributions before being scaled
      for (int k = 0; k < n1; ++k) {
        const int s = req.first_stream(k);
        MatrixXd acc = (P * abar[s].array()).matrix();
        for (int p = 0; p < n2; ++p) {
          const int ps = req.pair_stream(p);
          const int i = req.pairs[p].first, j = req.pairs[p].second;
          if (i != k && j != k) continue;
          const double coeff = (i == j) ? 2.0 : 1.0;
          const int other = (i == k) ? j : i;
          acc.array() +=
              coeff * ws.Q[h].array() * pre[req.first_stream(other)].array() * abar[ps].array();
        }
        sbar[s] = std::move(acc);
      }
      for (int p = 0; p < n2; ++p) {
        const int s = req.pair_stream(p);
        sbar[s] = (P * abar[s].array()).matrix();
      }
    }
    sbar[0] = std::move(primal);
  }
}

}  // namespace scoreflow
