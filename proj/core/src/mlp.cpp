#include "optexec/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace optexec {

namespace {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_deriv(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

// Policy fractions must stay strictly inside (0,1); the raw sigmoid rounds to
// 0 or 1 in double precision once |z| exceeds ~37.
inline double sigmoid(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return std::min(std::max(s, 1e-12), 1.0 - 1e-12);
}

std::vector<int> layer_widths(const MlpSpec& spec) {
  std::vector<int> widths;
  widths.push_back(spec.input_dim);
  for (int k = 0; k < spec.hidden_layers; ++k) widths.push_back(spec.hidden_width);
  widths.push_back(1);
  return widths;
}

double truncated_normal(std::mt19937_64& eng, std::normal_distribution<double>& unit) {
  double z = unit(eng);
  while (std::abs(z) > 2.0) z = unit(eng);
  return z;
}

// Scales rows of Y onto the unit hypercube in-place.
void scale_inputs(const ScalingSpec& s, Eigen::MatrixXd& Y) {
  for (int j = 0; j < Y.cols(); ++j) {
    const double lo = s.in_lo(j), span = s.in_hi(j) - s.in_lo(j);
    Y.col(j) = (Y.col(j).array() - lo) / span;
  }
}

struct Workspace {
  std::vector<Eigen::MatrixXd> Z;  // pre-activations per layer
  std::vector<Eigen::MatrixXd> A;  // activations, A[0] = input batch
};

// Forward pass keeping intermediates for backprop. Returns the head output.
Eigen::VectorXd forward_ws(const Mlp& net, const Eigen::MatrixXd& X, Workspace& ws) {
  const int L = net.n_layers();
  ws.Z.resize(L);
  ws.A.resize(L + 1);
  ws.A[0] = X;
  for (int k = 0; k < L; ++k) {
    ws.Z[k].noalias() = ws.A[k] * net.weights()[k].transpose();
    ws.Z[k].rowwise() += net.biases()[k].transpose();
    if (k + 1 < L) {
      ws.A[k + 1] = ws.Z[k].unaryExpr([](double z) { return elu(z); });
    } else {
      ws.A[k + 1] = ws.Z[k];
    }
  }
  Eigen::VectorXd out = ws.A[L].col(0);
  if (net.spec().head == OutputHead::policy)
    out = out.unaryExpr([](double z) { return sigmoid(z); });
  return out;
}

}  // namespace

Mlp::Mlp(const MlpSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  if (spec.input_dim < 1 || spec.hidden_layers < 1 || spec.hidden_width < 1)
    throw ValidationError("Mlp: architecture dimensions must be >= 1");
  const auto widths = layer_widths(spec);
  std::mt19937_64 eng(init_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const int fan_in = widths[k], fan_out = widths[k + 1];
    const double std_k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) W(i, j) = std_k * truncated_normal(eng, unit);
    W_.push_back(std::move(W));
    b_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& X) const {
  Workspace ws;
  return forward_ws(*this, X, ws);
}

double mse_loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& targets,
                             std::vector<Eigen::MatrixXd>& grad_W,
                             std::vector<Eigen::VectorXd>& grad_b) {
  const int L = net.n_layers();
  const int B = static_cast<int>(X.rows());
  Workspace ws;
  Eigen::VectorXd pred = forward_ws(net, X, ws);

  const Eigen::VectorXd err = pred - targets;
  const double loss = err.squaredNorm() / B;

  grad_W.resize(L);
  grad_b.resize(L);

  // d(loss)/d(head output), then through the head into the last pre-activation.
  Eigen::MatrixXd delta = (2.0 / B) * err;
  if (net.spec().head == OutputHead::policy)
    delta.array() *= (pred.array() * (1.0 - pred.array()));

  for (int k = L - 1; k >= 0; --k) {
    grad_W[k].noalias() = delta.transpose() * ws.A[k];
    grad_b[k] = delta.colwise().sum().transpose();
    if (k > 0) {
      Eigen::MatrixXd dA = delta * net.weights()[k];
      delta = dA.array() * ws.Z[k - 1].unaryExpr([](double z) { return elu_deriv(z); }).array();
    }
  }
  return loss;
}

FittedSurrogate::FittedSurrogate(Mlp net, ScalingSpec scaling, FitDiagnostics diag)
    : net_(std::move(net)), scaling_(std::move(scaling)), diag_(std::move(diag)) {}

bool FittedSurrogate::in_domain(const Eigen::VectorXd& y) const {
  for (int j = 0; j < y.size(); ++j)
    if (y(j) < scaling_.in_lo(j) || y(j) > scaling_.in_hi(j)) return false;
  return true;
}

FittedSurrogate::Prediction FittedSurrogate::predict_ex(const Eigen::VectorXd& y) const {
  if (y.size() != net_.spec().input_dim)
    throw ValidationError("FittedSurrogate::predict: input dimension mismatch");
  const bool outside = !in_domain(y);
  if (outside) counter_->fetch_add(1, std::memory_order_relaxed);
  Eigen::MatrixXd X = y.transpose();
  scale_inputs(scaling_, X);
  double out = net_.forward(X)(0);
  if (net_.spec().head == OutputHead::value)
    out = scaling_.out_lo + (scaling_.out_hi - scaling_.out_lo) * out;
  return {out, outside};
}

double FittedSurrogate::predict(const Eigen::VectorXd& y) const { return predict_ex(y).value; }

void FittedSurrogate::predict_batch(const Eigen::MatrixXd& Y, Eigen::VectorXd& out) const {
  if (Y.cols() != net_.spec().input_dim)
    throw ValidationError("FittedSurrogate::predict_batch: input dimension mismatch");
  std::uint64_t outside = 0;
  for (int i = 0; i < Y.rows(); ++i) {
    for (int j = 0; j < Y.cols(); ++j) {
      if (Y(i, j) < scaling_.in_lo(j) || Y(i, j) > scaling_.in_hi(j)) {
        ++outside;
        break;
      }
    }
  }
  if (outside) counter_->fetch_add(outside, std::memory_order_relaxed);
  Eigen::MatrixXd X = Y;
  scale_inputs(scaling_, X);
  out = net_.forward(X);
  if (net_.spec().head == OutputHead::value)
    out = (scaling_.out_lo + (scaling_.out_hi - scaling_.out_lo) * out.array()).matrix();
}

FittedSurrogate fit_surrogate(const MlpSpec& spec, const ScalingSpec& scaling,
                              const TrainConfig& cfg, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& targets, const Mlp* warm_start) {
  const int M = static_cast<int>(inputs.rows());
  if (inputs.cols() != spec.input_dim)
    throw ValidationError("fit_surrogate: input dimension mismatch");
  if (targets.size() != M) throw ValidationError("fit_surrogate: target size mismatch");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ValidationError("fit_surrogate: epochs and batch_size must be >= 1");
  if (M < cfg.batch_size)
    throw ValidationError("fit_surrogate: need at least batch_size training points");
  if (!targets.allFinite()) throw ValidationError("fit_surrogate: non-finite targets");
  if (scaling.in_lo.size() != spec.input_dim || scaling.in_hi.size() != spec.input_dim)
    throw ValidationError("fit_surrogate: scaling dimension mismatch");
  for (int j = 0; j < spec.input_dim; ++j)
    if (!(scaling.in_hi(j) > scaling.in_lo(j)))
      throw ValidationError("fit_surrogate: scaling requires hi > lo per coordinate");

  ScalingSpec sc = scaling;
  Eigen::VectorXd t = targets;
  if (spec.head == OutputHead::value) {
    sc.out_lo = t.minCoeff();
    sc.out_hi = t.maxCoeff();
    if (!(sc.out_hi - sc.out_lo > 1e-12 * std::max(1.0, std::abs(sc.out_hi))))
      sc.out_hi = sc.out_lo + 1.0;  // constant targets: train toward 0
    t = ((t.array() - sc.out_lo) / (sc.out_hi - sc.out_lo)).matrix();
  } else {
    sc.out_lo = 0.0;
    sc.out_hi = 1.0;
    for (int i = 0; i < M; ++i) {
      if (t(i) < -1e-9 || t(i) > 1.0 + 1e-9)
        throw ValidationError("fit_surrogate: policy target outside [0,1]");
      t(i) = std::min(std::max(t(i), 1e-6), 1.0 - 1e-6);
    }
  }

  Eigen::MatrixXd X = inputs;
  scale_inputs(sc, X);

  std::mt19937_64 eng(cfg.seed);
  Mlp net = warm_start ? *warm_start : Mlp(spec, eng());
  if (warm_start && (warm_start->spec().input_dim != spec.input_dim ||
                     warm_start->spec().head != spec.head ||
                     warm_start->spec().hidden_layers != spec.hidden_layers ||
                     warm_start->spec().hidden_width != spec.hidden_width))
    throw ValidationError("fit_surrogate: warm-start network is incompatible");

  const int L = net.n_layers();
  std::vector<Eigen::MatrixXd> mW(L), vW(L), gW(L);
  std::vector<Eigen::VectorXd> mb(L), vb(L), gb(L);
  for (int k = 0; k < L; ++k) {
    mW[k] = Eigen::MatrixXd::Zero(net.weights()[k].rows(), net.weights()[k].cols());
    vW[k] = mW[k];
    mb[k] = Eigen::VectorXd::Zero(net.biases()[k].size());
    vb[k] = mb[k];
  }

  std::vector<int> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  Eigen::MatrixXd Xb;
  Eigen::VectorXd tb;
  FitDiagnostics diag;
  diag.epoch_loss.reserve(cfg.epochs);

  long t_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), eng);
    double sq_err_sum = 0.0;
    for (int start = 0; start < M; start += cfg.batch_size) {
      const int B = std::min(cfg.batch_size, M - start);  // last partial batch kept
      Xb.resize(B, spec.input_dim);
      tb.resize(B);
      for (int i = 0; i < B; ++i) {
        Xb.row(i) = X.row(perm[start + i]);
        tb(i) = t(perm[start + i]);
      }
      const double batch_loss = mse_loss_and_gradient(net, Xb, tb, gW, gb);
      sq_err_sum += batch_loss * B;

      ++t_step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_step));
      for (int k = 0; k < L; ++k) {
        mW[k] = cfg.beta1 * mW[k] + (1.0 - cfg.beta1) * gW[k];
        vW[k] = cfg.beta2 * vW[k].array() + (1.0 - cfg.beta2) * gW[k].array().square();
        net.weights()[k].array() -=
            cfg.learning_rate * (mW[k].array() / bc1) /
            ((vW[k].array() / bc2).sqrt() + cfg.adam_eps);
        mb[k] = cfg.beta1 * mb[k] + (1.0 - cfg.beta1) * gb[k];
        vb[k] = cfg.beta2 * vb[k].array() + (1.0 - cfg.beta2) * gb[k].array().square();
        net.biases()[k].array() -=
            cfg.learning_rate * (mb[k].array() / bc1) /
            ((vb[k].array() / bc2).sqrt() + cfg.adam_eps);
      }
    }
    const double epoch_loss = sq_err_sum / M;
    if (!std::isfinite(epoch_loss))
      throw NumericalError("fit_surrogate: training loss became non-finite at epoch " +
                           std::to_string(epoch));
    diag.epoch_loss.push_back(epoch_loss);
  }

  return FittedSurrogate(std::move(net), std::move(sc), std::move(diag));
}

// --- serialization -----------------------------------------------------------

namespace {
constexpr int kFormatVersion = 1;
}

std::string FittedSurrogate::to_json_string() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["spec"] = {{"input_dim", net_.spec().input_dim},
               {"hidden_layers", net_.spec().hidden_layers},
               {"hidden_width", net_.spec().hidden_width},
               {"head", net_.spec().head == OutputHead::value ? "value" : "policy"}};
  j["scaling"] = {{"in_lo", std::vector<double>(scaling_.in_lo.data(),
                                                scaling_.in_lo.data() + scaling_.in_lo.size())},
                  {"in_hi", std::vector<double>(scaling_.in_hi.data(),
                                                scaling_.in_hi.data() + scaling_.in_hi.size())},
                  {"out_lo", scaling_.out_lo},
                  {"out_hi", scaling_.out_hi}};
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (int k = 0; k < net_.n_layers(); ++k) {
    const auto& W = net_.weights()[k];
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < W.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int jj = 0; jj < W.cols(); ++jj) row.push_back(W(i, jj));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
    const auto& b = net_.biases()[k];
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["final_epoch_loss"] = diag_.epoch_loss.empty() ? 0.0 : diag_.epoch_loss.back();
  return j.dump();
}

FittedSurrogate FittedSurrogate::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw ValidationError("FittedSurrogate: unsupported format version");
  MlpSpec spec;
  spec.input_dim = j.at("spec").at("input_dim").get<int>();
  spec.hidden_layers = j.at("spec").at("hidden_layers").get<int>();
  spec.hidden_width = j.at("spec").at("hidden_width").get<int>();
  spec.head = j.at("spec").at("head").get<std::string>() == "value" ? OutputHead::value
                                                                    : OutputHead::policy;
  Mlp net(spec, 0);
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (static_cast<int>(weights.size()) != net.n_layers())
    throw ValidationError("FittedSurrogate: layer count mismatch in weight file");
  for (int k = 0; k < net.n_layers(); ++k) {
    auto& W = net.weights()[k];
    const auto& rows = weights[k];
    if (static_cast<int>(rows.size()) != W.rows())
      throw ValidationError("FittedSurrogate: weight shape mismatch");
    for (int i = 0; i < W.rows(); ++i)
      for (int jj = 0; jj < W.cols(); ++jj) W(i, jj) = rows[i][jj].get<double>();
    auto& b = net.biases()[k];
    for (int i = 0; i < b.size(); ++i) b(i) = biases[k][i].get<double>();
  }
  ScalingSpec sc;
  const auto lo = j.at("scaling").at("in_lo").get<std::vector<double>>();
  const auto hi = j.at("scaling").at("in_hi").get<std::vector<double>>();
  sc.in_lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  sc.in_hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
  sc.out_lo = j.at("scaling").at("out_lo").get<double>();
  sc.out_hi = j.at("scaling").at("out_hi").get<double>();
  FitDiagnostics diag;
  diag.epoch_loss.push_back(j.value("final_epoch_loss", 0.0));
  return FittedSurrogate(std::move(net), std::move(sc), std::move(diag));
}

void FittedSurrogate::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("FittedSurrogate::save: cannot open " + path);
  out << to_json_string();
}

FittedSurrogate FittedSurrogate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("FittedSurrogate::load: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace optexec
