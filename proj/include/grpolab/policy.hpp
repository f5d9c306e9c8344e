#pragma once

#include <Eigen/Dense>
#include <map>
#include <random>
#include <string>

namespace grpolab {

// Numerically stable helpers shared by policy and KL code.
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& logits) {
  Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

// Context-keyed categorical policy: one logit row per context key, lazily
// created at zero (uniform). The ordered map keeps iteration deterministic.
class TabularPolicy {
 public:
  using Table = std::map<std::string, Eigen::VectorXd>;

  TabularPolicy() = default;
  explicit TabularPolicy(int vocab) : vocab_(vocab) {}

  int vocab() const { return vocab_; }
  const Table& table() const { return table_; }
  Table& table() { return table_; }

  Eigen::VectorXd& row(const std::string& key);
  Eigen::VectorXd logits(const std::string& key) const;
  Eigen::VectorXd probs(const std::string& key) const;
  double log_prob(const std::string& key, int action) const;
  double entropy(const std::string& key) const;

  int sample(const std::string& key, std::mt19937_64& rng) const;
  int argmax(const std::string& key) const;

  // theta += scale * grad, creating rows as needed.
  void axpy(double scale, const Table& grad);

  std::string serialize() const;
  static TabularPolicy deserialize(const std::string& text);

 private:
  int vocab_ = 0;
  Table table_;
};

double grad_table_norm(const TabularPolicy::Table& grad);

}  // namespace grpolab
