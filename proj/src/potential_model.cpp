#include "scoreflow/potential_model.hpp"

namespace scoreflow {

namespace {

VectorXd unit_dir(int n, int k) {
  VectorXd v = VectorXd::Zero(n);
  v(k) = 1.0;
  return v;
}

}  // namespace

PotentialModel::PotentialModel(MlpConfig cfg) : net_(std::move(cfg)) {
  if (net_.config().output_dim != 1)
    throw std::invalid_argument("potential model: output dimension must be 1");
  if (net_.config().input_dim < 2)
    throw std::invalid_argument("potential model: input dimension must be at least 2");
}

MatrixXd PotentialModel::stack_input(const MatrixXd& x, const VectorXd& ts) const {
  const int d = dimension();
  if (x.rows() != d) throw std::invalid_argument("potential model: sample dimension mismatch");
  if (ts.size() != x.cols())
    throw std::invalid_argument("potential model: time vector length mismatch");
  MatrixXd input(d + 1, x.cols());
  input.topRows(d) = x;
  input.row(d) = ts.transpose();
  return input;
}

JetRequest PotentialModel::grad_request() const {
  const int d = dimension();
  JetRequest req;
  for (int k = 0; k < d; ++k) req.dirs.push_back(unit_dir(d + 1, k));
  return req;
}

JetRequest PotentialModel::full_request() const {
  const int d = dimension();
  JetRequest req = grad_request();
  req.dirs.push_back(unit_dir(d + 1, d));  // time direction
  for (int k = 0; k < d; ++k) req.pairs.emplace_back(k, k);
  return req;
}

double PotentialModel::value(const VectorXd& x, double t) const {
  return value_batch(x, VectorXd::Constant(1, t))(0);
}

VectorXd PotentialModel::value_batch(const MatrixXd& x, const VectorXd& ts) const {
  JetRequest req;  // primal only
  JetWorkspace ws;
  jet_forward(net_, stack_input(x, ts), req, ws, false);
  if (!ws.out[0].allFinite()) throw std::runtime_error("potential model: non-finite value");
  return ws.out[0].row(0).transpose();
}

MatrixXd PotentialModel::score_batch(const MatrixXd& x, const VectorXd& ts) const {
  Cache cache;
  return forward_grad(x, ts, cache);
}

MatrixXd PotentialModel::forward_grad(const MatrixXd& x, const VectorXd& ts,
                                      Cache& cache) const {
  cache.input = stack_input(x, ts);
  cache.full = false;
  const JetRequest req = grad_request();
  jet_forward(net_, cache.input, req, cache.ws, false);
  const int d = dimension();
  MatrixXd grad(d, x.cols());
  for (int k = 0; k < d; ++k) grad.row(k) = cache.ws.out[req.first_stream(k)].row(0);
  if (!grad.allFinite()) throw std::runtime_error("potential model: non-finite gradient");
  return grad;
}

BatchDerivs PotentialModel::forward_full(const MatrixXd& x, const VectorXd& ts,
                                         Cache& cache) const {
  cache.input = stack_input(x, ts);
  cache.full = true;
  const JetRequest req = full_request();
  jet_forward(net_, cache.input, req, cache.ws, true);
  const int d = dimension();
  BatchDerivs out;
  out.value = cache.ws.out[0].row(0).transpose();
  out.grad.resize(d, x.cols());
  for (int k = 0; k < d; ++k) out.grad.row(k) = cache.ws.out[req.first_stream(k)].row(0);
  out.time_deriv = cache.ws.out[req.first_stream(d)].row(0).transpose();
  out.laplacian = VectorXd::Zero(x.cols());
  for (int p = 0; p < d; ++p)
    out.laplacian += cache.ws.out[req.pair_stream(p)].row(0).transpose();
  if (!(out.value.allFinite() && out.grad.allFinite() && out.laplacian.allFinite() &&
        out.time_deriv.allFinite()))
    throw std::runtime_error("potential model: non-finite derivatives");
  return out;
}

BatchDerivs PotentialModel::derivs_batch(const MatrixXd& x, const VectorXd& ts) const {
  Cache cache;
  return forward_full(x, ts, cache);
}

PointDerivatives PotentialModel::derivs(const VectorXd& x, double t) const {
  const BatchDerivs bd = derivs_batch(x, VectorXd::Constant(1, t));
  PointDerivatives pd;
  pd.value = bd.value(0);
  pd.grad = bd.grad.col(0);
  pd.laplacian = bd.laplacian(0);
  pd.time_deriv = bd.time_deriv(0);
  return pd;
}

void PotentialModel::backward(const Cache& cache, const BatchCotangent& cot,
                              VectorXd& grad) const {
  const int d = dimension();
  const int B = static_cast<int>(cache.input.cols());
  const JetRequest req = cache.full ? full_request() : grad_request();
  std::vector<MatrixXd> out_cot(req.stream_count());
  for (auto& m : out_cot) m.setZero(1, B);
  if (cot.value.size() > 0) out_cot[0].row(0) = cot.value.transpose();
  if (cot.grad.size() > 0)
    for (int k = 0; k < d; ++k) out_cot[req.first_stream(k)].row(0) = cot.grad.row(k);
  if (cot.time_deriv.size() > 0) {
    if (!cache.full)
      throw std::logic_error("potential model: time cotangent requires full forward");
    out_cot[req.first_stream(d)].row(0) = cot.time_deriv.transpose();
  }
  if (cot.laplacian.size() > 0) {
    if (!cache.full)
      throw std::logic_error("potential model: laplacian cotangent requires full forward");
    for (int p = 0; p < d; ++p) out_cot[req.pair_stream(p)].row(0) = cot.laplacian.transpose();
  }
  jet_backward(net_, req, cache.ws, out_cot, grad);
  if (!grad.allFinite())
    throw std::runtime_error("potential model: non-finite parameter gradient");
}

PotentialModel::Jet3 PotentialModel::jet3(const VectorXd& x, double t) const {
  const int d = dimension();
  JetRequest req = full_request();  // dirs: x_0..x_{d-1}, t; pairs: (k,k)
  // add mixed spatial pairs, time pairs and spatial triples
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) req.pairs.emplace_back(i, j);
  for (int i = 0; i < d; ++i) req.pairs.emplace_back(i, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      for (int k = j; k < d; ++k) req.triples.push_back({i, j, k});
  req.validate(d + 1);

  JetWorkspace ws;
  MatrixXd input(d + 1, 1);
  input.topRows(d) = x;
  input(d, 0) = t;
  jet_forward(net_, input, req, ws, true);

  Jet3 out;
  out.value = ws.out[0](0, 0);
  out.grad.resize(d);
  for (int k = 0; k < d; ++k) out.grad(k) = ws.out[req.first_stream(k)](0, 0);
  out.time_deriv = ws.out[req.first_stream(d)](0, 0);
  out.hess.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double v = ws.out[req.pair_stream(req.find_pair(i, j))](0, 0);
      out.hess(i, j) = v;
      out.hess(j, i) = v;
    }
  out.laplacian = out.hess.trace();
  out.grad_time.resize(d);
  for (int i = 0; i < d; ++i)
    out.grad_time(i) = ws.out[req.pair_stream(req.find_pair(i, d))](0, 0);
  out.grad_lap = VectorXd::Zero(d);
  auto triple_value = [&](int a, int b, int c) {
    std::array<int, 3> key{a, b, c};
    std::sort(key.begin(), key.end());
    for (size_t idx = 0; idx < req.triples.size(); ++idx)
      if (req.triples[idx] == key)
        return ws.out[req.triple_stream(static_cast<int>(idx))](0, 0);
    throw std::logic_error("potential model: missing triple stream");
  };
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) out.grad_lap(j) += triple_value(k, k, j);
  return out;
}

ScoreJet PotentialModel::score_jet(const VectorXd& x, double t) const {
  const Jet3 j3 = jet3(x, t);
  ScoreJet sj;
  sj.s = j3.grad;
  sj.jac = j3.hess;
  sj.time_deriv = j3.grad_time;
  sj.grad_div = j3.grad_lap;
  return sj;
}

void PotentialScore::eval(const MatrixXd& x, double t, MatrixXd& out) const {
  out = m_.score_batch(x, VectorXd::Constant(x.cols(), t));
}

void PotentialScore::divergence(const MatrixXd& x, double t, VectorXd& out) const {
  const BatchDerivs bd = m_.derivs_batch(x, VectorXd::Constant(x.cols(), t));
  out = bd.laplacian;
}

DirectScoreModel::DirectScoreModel(MlpConfig cfg) : net_(std::move(cfg)) {
  if (net_.config().output_dim != net_.config().input_dim - 1)
    throw std::invalid_argument("score model: output dimension must equal spatial dimension");
}

MatrixXd DirectScoreModel::stack_input(const MatrixXd& x, const VectorXd& ts) const {
  const int d = dimension();
  if (x.rows() != d) throw std::invalid_argument("score model: sample dimension mismatch");
  if (ts.size() != x.cols())
    throw std::invalid_argument("score model: time vector length mismatch");
  MatrixXd input(d + 1, x.cols());
  input.topRows(d) = x;
  input.row(d) = ts.transpose();
  return input;
}

VectorXd DirectScoreModel::value(const VectorXd& x, double t) const {
  return value_batch(x, VectorXd::Constant(1, t)).col(0);
}

MatrixXd DirectScoreModel::value_batch(const MatrixXd& x, const VectorXd& ts) const {
  JetRequest req;
  JetWorkspace ws;
  jet_forward(net_, stack_input(x, ts), req, ws, false);
  if (!ws.out[0].allFinite()) throw std::runtime_error("score model: non-finite value");
  return ws.out[0];
}

MatrixXd DirectScoreModel::jacobian(const VectorXd& x, double t) const {
  const int d = dimension();
  JetRequest req;
  for (int k = 0; k < d; ++k) req.dirs.push_back(unit_dir(d + 1, k));
  JetWorkspace ws;
  MatrixXd input(d + 1, 1);
  input.topRows(d) = x;
  input(d, 0) = t;
  jet_forward(net_, input, req, ws, false);
  MatrixXd jac(d, d);
  for (int j = 0; j < d; ++j) jac.col(j) = ws.out[req.first_stream(j)].col(0);
  return jac;
}

ScoreJet DirectScoreModel::jet(const VectorXd& x, double t) const {
  const int d = dimension();
  JetRequest req;
  for (int k = 0; k <= d; ++k) req.dirs.push_back(unit_dir(d + 1, k));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) req.pairs.emplace_back(i, j);
  JetWorkspace ws;
  MatrixXd input(d + 1, 1);
  input.topRows(d) = x;
  input(d, 0) = t;
  jet_forward(net_, input, req, ws, false);

  ScoreJet sj;
  sj.s = ws.out[0].col(0);
  sj.jac.resize(d, d);
  for (int j = 0; j < d; ++j) sj.jac.col(j) = ws.out[req.first_stream(j)].col(0);
  sj.time_deriv = ws.out[req.first_stream(d)].col(0);
  // grad_div(j) = sum_i d^2 s_i / dx_i dx_j
  sj.grad_div = VectorXd::Zero(d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      sj.grad_div(j) += ws.out[req.pair_stream(req.find_pair(i, j))](i, 0);
  return sj;
}

void DirectScoreModel::divergence_batch(const MatrixXd& x, const VectorXd& ts,
                                        VectorXd& out) const {
  const int d = dimension();
  JetRequest req;
  for (int k = 0; k < d; ++k) req.dirs.push_back(unit_dir(d + 1, k));
  JetWorkspace ws;
  jet_forward(net_, stack_input(x, ts), req, ws, false);
  out = VectorXd::Zero(x.cols());
  for (int k = 0; k < d; ++k) out += ws.out[req.first_stream(k)].row(k).transpose();
}

MatrixXd DirectScoreModel::forward(const MatrixXd& x, const VectorXd& ts, Cache& cache) const {
  cache.input = stack_input(x, ts);
  JetRequest req;
  jet_forward(net_, cache.input, req, cache.ws, false);
  if (!cache.ws.out[0].allFinite()) throw std::runtime_error("score model: non-finite value");
  return cache.ws.out[0];
}

void DirectScoreModel::backward(const Cache& cache, const MatrixXd& cot, VectorXd& grad) const {
  JetRequest req;
  std::vector<MatrixXd> out_cot{cot};
  jet_backward(net_, req, cache.ws, out_cot, grad);
  if (!grad.allFinite()) throw std::runtime_error("score model: non-finite parameter gradient");
}

void DirectScoreField::eval(const MatrixXd& x, double t, MatrixXd& out) const {
  out = m_.value_batch(x, VectorXd::Constant(x.cols(), t));
}

void DirectScoreField::divergence(const MatrixXd& x, double t, VectorXd& out) const {
  m_.divergence_batch(x, VectorXd::Constant(x.cols(), t), out);
}

}  // namespace scoreflow
