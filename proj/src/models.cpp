#include "fairsel/models.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fairsel/error.hpp"

namespace fairsel {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void validate_inputs(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights) {
  if (X.rows() == 0) throw std::invalid_argument("logistic regression: no training rows");
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) {
    throw std::invalid_argument("logistic regression: X rows and y length differ");
  }
  if (!weights.empty() && weights.size() != y.size()) {
    throw std::invalid_argument("logistic regression: weights length mismatch");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("logistic regression: labels must be 0 or 1");
  }
  if (!weights.empty()) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("logistic regression: weights must be >= 0");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("logistic regression: weights are all zero");
  }
}

double weight_at(std::span<const double> weights, std::size_t i) { return weights.empty() ? 1.0 : weights[i]; }

}  // namespace

double logistic_loss(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                     const Eigen::VectorXd& coef, double intercept, double l2_strength) {
  const Eigen::VectorXd z = (X * coef).array() + intercept;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    // -[y log s(z) + (1-y) log(1 - s(z))] = softplus(z) - y z
    loss += weight_at(weights, u) * (softplus(z[i]) - y[u] * z[i]);
  }
  return loss + 0.5 * l2_strength * coef.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                                  const Eigen::VectorXd& coef, double intercept, double l2_strength) {
  const Eigen::VectorXd z = (X * coef).array() + intercept;
  Eigen::VectorXd resid(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    resid[i] = weight_at(weights, u) * (sigmoid(z[i]) - y[u]);
  }
  Eigen::VectorXd g(coef.size() + 1);
  g.head(coef.size()) = X.transpose() * resid + l2_strength * coef;
  g[coef.size()] = resid.sum();
  return g;
}

LogisticModel train_logistic(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                             const LogisticConfig& config) {
  validate_inputs(X, y, weights);
  const Eigen::Index p = X.cols();
  const Eigen::Index n = X.rows();

  LogisticModel model;
  model.config = config;
  model.coefficients = Eigen::VectorXd::Zero(p);
  model.intercept = 0.0;

  // Augmented design [X | 1] so the intercept is the last parameter.
  Eigen::MatrixXd Xa(n, p + 1);
  Xa.leftCols(p) = X;
  Xa.col(p).setOnes();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  auto loss_at = [&](const Eigen::VectorXd& t) {
    return logistic_loss(X, y, weights, t.head(p), t[p], config.l2_strength);
  };
  double loss = loss_at(theta);
  model.loss_history.push_back(loss);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Eigen::VectorXd g = logistic_gradient(X, y, weights, theta.head(p), theta[p], config.l2_strength);
    if (g.norm() <= config.tolerance) {
      model.converged = true;
      break;
    }
    const Eigen::VectorXd z = Xa * theta;
    Eigen::VectorXd curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sigmoid(z[i]);
      curv[i] = weight_at(weights, static_cast<std::size_t>(i)) * s * (1.0 - s);
    }
    Eigen::MatrixXd H = Xa.transpose() * curv.asDiagonal() * Xa;
    H.diagonal().head(p).array() += config.l2_strength;

    // Newton direction; fall back to growing diagonal damping if H is not usable.
    Eigen::VectorXd dir;
    double damping = 0.0;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal().array() += damping;
      Eigen::LLT<Eigen::MatrixXd> llt(Hd);
      if (llt.info() == Eigen::Success) {
        dir = -llt.solve(g);
        if (dir.allFinite() && g.dot(dir) < 0.0) break;
      }
      damping = damping == 0.0 ? 1e-8 * std::max(1.0, H.diagonal().maxCoeff()) : damping * 10.0;
      dir.resize(0);
    }
    if (dir.size() == 0) dir = -g;

    const double slope = g.dot(dir);
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd cand = theta + step * dir;
      const double cand_loss = loss_at(cand);
      if (cand_loss <= loss + 1e-4 * step * slope) {
        theta = cand;
        loss = cand_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    model.iterations = iter + 1;
    if (!accepted) {
      // No representable decrease left: we are at the floating-point optimum.
      model.converged = g.norm() <= std::max(config.tolerance, 1e-6 * (1.0 + std::abs(loss)));
      break;
    }
    model.loss_history.push_back(loss);
  }
  model.coefficients = theta.head(p);
  model.intercept = theta[p];
  if (!model.coefficients.allFinite() || !std::isfinite(model.intercept)) {
    throw std::runtime_error("logistic regression: non-finite parameters");
  }
  return model;
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.coefficients.size()) {
    throw std::invalid_argument("predict: feature count does not match the model");
  }
  const Eigen::VectorXd z = (X * model.coefficients).array() + model.intercept;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

std::vector<int> predict_labels(const LogisticModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.coefficients.size()) {
    throw std::invalid_argument("predict: feature count does not match the model");
  }
  const Eigen::VectorXd z = (X * model.coefficients).array() + model.intercept;
  std::vector<int> out(static_cast<std::size_t>(z.size()));
  // sigmoid(z) >= 0.5  <=>  z >= 0
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i] >= 0.0 ? 1 : 0;
  return out;
}

nlohmann::json LogisticModel::to_json() const {
  nlohmann::json j;
  j["coefficients"] = std::vector<double>(coefficients.data(), coefficients.data() + coefficients.size());
  j["intercept"] = intercept;
  j["config"] = {{"l2_strength", config.l2_strength},
                 {"max_iterations", config.max_iterations},
                 {"tolerance", config.tolerance}};
  j["converged"] = converged;
  j["iterations"] = iterations;
  return j;
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
  LogisticModel m;
  const auto coef = j.at("coefficients").get<std::vector<double>>();
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  m.intercept = j.at("intercept").get<double>();
  if (j.contains("config")) {
    const auto& c = j.at("config");
    m.config.l2_strength = c.value("l2_strength", m.config.l2_strength);
    m.config.max_iterations = c.value("max_iterations", m.config.max_iterations);
    m.config.tolerance = c.value("tolerance", m.config.tolerance);
  }
  m.converged = j.value("converged", false);
  m.iterations = j.value("iterations", 0);
  return m;
}

// ---------------------------------------------------------------------------
// Reweighing

std::vector<double> ReweighingWeights::apply(std::span<const int> y, std::span<const int> s) const {
  if (y.size() != s.size()) throw std::invalid_argument("ReweighingWeights::apply: length mismatch");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = w[s[i]][y[i]];
  return out;
}

ReweighingWeights reweigh(std::span<const int> y, std::span<const int> s) {
  if (y.size() != s.size()) throw std::invalid_argument("reweigh: length mismatch");
  double cell[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < y.size(); ++i) {
    if ((y[i] != 0 && y[i] != 1) || (s[i] != 0 && s[i] != 1)) {
      throw std::invalid_argument("reweigh: entries must be 0 or 1");
    }
    cell[s[i]][y[i]] += 1.0;
  }
  const double n = static_cast<double>(y.size());
  ReweighingWeights rw;
  for (int g = 0; g < 2; ++g) {
    for (int l = 0; l < 2; ++l) {
      if (cell[g][l] == 0.0) {
        throw DataError("reweigh: empty (s=" + std::to_string(g) + ", y=" + std::to_string(l) + ") cell");
      }
      const double n_s = cell[g][0] + cell[g][1];
      const double n_y = cell[0][l] + cell[1][l];
      rw.w[g][l] = (n_s * n_y) / (n * cell[g][l]);
    }
  }
  return rw;
}

// ---------------------------------------------------------------------------
// Mitigators

std::vector<double> Mitigator::pre_process(const TrainView& train) const {
  return std::vector<double>(train.y.size(), 1.0);
}

std::vector<int> Mitigator::fit_predict(const TrainView& train, const Eigen::MatrixXd& X_test,
                                        const LogisticConfig& config) const {
  const std::vector<double> w = pre_process(train);
  const LogisticModel model = train_logistic(train.X, train.y, w, config);
  return predict_labels(model, X_test);
}

std::vector<double> ReweighingMitigator::pre_process(const TrainView& train) const {
  return reweigh(train.y, train.s).apply(train.y, train.s);
}

std::unique_ptr<Mitigator> make_mitigator(std::string_view name) {
  if (name == "baseline") return std::make_unique<BaselineMitigator>();
  if (name == "reweighing" || name == "rw") return std::make_unique<ReweighingMitigator>();
  throw std::invalid_argument("unknown model: " + std::string(name));
}

}  // namespace fairsel
