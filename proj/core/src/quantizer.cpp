#include "optexec/quantizer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

namespace optexec {

Quantizer build_quantizer(double sigma, int n_knots) {
  if (n_knots < 1) throw ValidationError("build_quantizer: n_knots must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("build_quantizer: sigma must be >= 0");
  if (sigma == 0.0) return Quantizer{{0.0}, {1.0}, 0.0};

  // Jacobi matrix of the physicists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(k/2). Eigenvalues are the nodes; the squared first
  // eigenvector components are the probability weights after normalization.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n_knots, n_knots);
  for (int k = 1; k < n_knots; ++k) {
    const double off = std::sqrt(0.5 * k);
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success)
    throw NumericalError("build_quantizer: eigen decomposition failed");

  Quantizer q;
  q.sigma = sigma;
  q.knots.resize(n_knots);
  q.weights.resize(n_knots);
  const double scale = sigma * std::sqrt(2.0);
  for (int j = 0; j < n_knots; ++j) {
    q.knots[j] = scale * es.eigenvalues()(j);  // ascending, strictly increasing
    const double v0 = es.eigenvectors()(0, j);
    q.weights[j] = v0 * v0;
  }
  return q;
}

Quantizer load_quantizer(const std::string& path, double sigma) {
  if (!(sigma > 0.0))
    throw ValidationError("load_quantizer: sigma must be > 0 for a tabulated grid");
  std::ifstream in(path);
  if (!in) throw ValidationError("load_quantizer: cannot open " + path);

  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    double knot, weight;
    if (is >> knot >> weight) rows.emplace_back(knot, weight);
  }
  if (rows.empty()) throw ValidationError("load_quantizer: no (knot, weight) rows in " + path);

  std::sort(rows.begin(), rows.end());
  double wsum = 0.0;
  for (auto& [e, w] : rows) {
    if (!(w > 0.0)) throw ValidationError("load_quantizer: weights must be positive");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-6)
    throw ValidationError("load_quantizer: weights sum to " + std::to_string(wsum));
  for (std::size_t j = 1; j < rows.size(); ++j)
    if (!(rows[j].first > rows[j - 1].first))
      throw ValidationError("load_quantizer: knots must be strictly increasing");

  double mean = 0.0;
  for (auto& [e, w] : rows) mean += (w / wsum) * e;
  double var = 0.0;
  for (auto& [e, w] : rows) var += (w / wsum) * (e - mean) * (e - mean);
  if (std::abs(mean) > 1e-3 || std::abs(var - 1.0) > 1e-2)
    throw ValidationError("load_quantizer: grid is not a unit-variance zero-mean table");

  // Affine moment correction, then rescale to sigma.
  const double std_unit = std::sqrt(var);
  Quantizer q;
  q.sigma = sigma;
  q.knots.reserve(rows.size());
  q.weights.reserve(rows.size());
  for (auto& [e, w] : rows) {
    q.knots.push_back(sigma * (e - mean) / std_unit);
    q.weights.push_back(w / wsum);
  }
  return q;
}

double quantized_expectation(const Quantizer& q,
                             const std::function<double(double)>& f) {
  double acc = 0.0;
  for (int j = 0; j < q.n_knots(); ++j) {
    const double fj = f(q.knots[j]);
    if (!std::isfinite(fj))
      throw NumericalError("quantized_expectation: non-finite integrand at knot " +
                           std::to_string(q.knots[j]));
    acc += q.weights[j] * fj;
  }
  return acc;
}

}  // namespace optexec
