#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace fairsel {

struct LogisticConfig {
  double l2_strength = 1.0;
  int max_iterations = 1000;
  double tolerance = 1e-6;  // on the Euclidean norm of the gradient
};

struct LogisticModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  LogisticConfig config;
  bool converged = false;
  int iterations = 0;
  /// Objective value at the start and after every accepted step.
  std::vector<double> loss_history;

  nlohmann::json to_json() const;
  static LogisticModel from_json(const nlohmann::json& j);
};

/// sum_i w_i * logloss_i + (l2 / 2) * |coef|^2. The intercept is not penalized.
double logistic_loss(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                     const Eigen::VectorXd& coef, double intercept, double l2_strength);

/// Gradient of logistic_loss; entries 0..p-1 are coefficients, entry p the intercept.
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                                  const Eigen::VectorXd& coef, double intercept, double l2_strength);

/// Damped Newton with Armijo backtracking. Deterministic. Empty weights = unit weights.
LogisticModel train_logistic(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const double> weights,
                             const LogisticConfig& config = {});

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& X);
/// 1 iff sigmoid(x . coef + intercept) >= 0.5.
std::vector<int> predict_labels(const LogisticModel& model, const Eigen::MatrixXd& X);

/// Per-(s, y) instance weights P(s) P(y) / P(s, y).
struct ReweighingWeights {
  double w[2][2] = {{1.0, 1.0}, {1.0, 1.0}};  // [s][y]

  double weight(int s, int y) const { return w[s][y]; }
  std::vector<double> apply(std::span<const int> y, std::span<const int> s) const;
};

/// Throws DataError when any (s, y) cell is empty.
ReweighingWeights reweigh(std::span<const int> y, std::span<const int> s);

struct TrainView {
  const Eigen::MatrixXd& X;
  std::span<const int> y;
  std::span<const int> s;
};

/// A bias-mitigation strategy plugged into the experiment harness. Pre-processing
/// mitigators override pre_process; in-processing ones override fit_predict.
class Mitigator {
 public:
  virtual ~Mitigator() = default;

  virtual std::string name() const = 0;
  /// Training instance weights. Defaults to unit weights.
  virtual std::vector<double> pre_process(const TrainView& train) const;
  /// Fits on the training rows and labels X_test. Defaults to a weighted
  /// logistic regression on the pre_process weights.
  virtual std::vector<int> fit_predict(const TrainView& train, const Eigen::MatrixXd& X_test,
                                       const LogisticConfig& config) const;
  /// Fraction of training rows reserved for tuning. The built-in mitigators use none.
  virtual double validation_fraction() const { return 0.0; }
};

class BaselineMitigator final : public Mitigator {
 public:
  std::string name() const override { return "baseline"; }
};

class ReweighingMitigator final : public Mitigator {
 public:
  std::string name() const override { return "reweighing"; }
  std::vector<double> pre_process(const TrainView& train) const override;
};

/// "baseline", or "reweighing" / "rw". Throws std::invalid_argument otherwise.
std::unique_ptr<Mitigator> make_mitigator(std::string_view name);

}  // namespace fairsel
