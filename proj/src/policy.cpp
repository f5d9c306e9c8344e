#include "grpolab/policy.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace grpolab {

using json = nlohmann::ordered_json;

Eigen::VectorXd& TabularPolicy::row(const std::string& key) {
  auto it = table_.find(key);
  if (it == table_.end()) {
    it = table_.emplace(key, Eigen::VectorXd::Zero(vocab_)).first;
  }
  return it->second;
}

Eigen::VectorXd TabularPolicy::logits(const std::string& key) const {
  auto it = table_.find(key);
  if (it == table_.end()) return Eigen::VectorXd::Zero(vocab_);
  return it->second;
}

Eigen::VectorXd TabularPolicy::probs(const std::string& key) const {
  return softmax(logits(key));
}

double TabularPolicy::log_prob(const std::string& key, int action) const {
  if (action < 0 || action >= vocab_) {
    throw std::invalid_argument("action outside vocabulary");
  }
  const Eigen::VectorXd l = logits(key);
  return l[action] - log_sum_exp(l);
}

double TabularPolicy::entropy(const std::string& key) const {
  const Eigen::VectorXd p = probs(key);
  double h = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) h -= p[a] * std::log(p[a]);
  }
  return h;
}

int TabularPolicy::sample(const std::string& key, std::mt19937_64& rng) const {
  const Eigen::VectorXd p = probs(key);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return static_cast<int>(a);
  }
  return vocab_ - 1;
}

int TabularPolicy::argmax(const std::string& key) const {
  Eigen::Index best = 0;
  logits(key).maxCoeff(&best);
  return static_cast<int>(best);
}

void TabularPolicy::axpy(double scale, const Table& grad) {
  for (const auto& [key, g] : grad) {
    row(key) += scale * g;
  }
}

std::string TabularPolicy::serialize() const {
  json j;
  j["vocab"] = vocab_;
  json rows = json::object();
  for (const auto& [key, l] : table_) {
    rows[key] = std::vector<double>(l.data(), l.data() + l.size());
  }
  j["logits"] = std::move(rows);
  return j.dump();
}

TabularPolicy TabularPolicy::deserialize(const std::string& text) {
  json j = json::parse(text);
  TabularPolicy policy(j.at("vocab").get<int>());
  for (const auto& [key, row] : j.at("logits").items()) {
    std::vector<double> v = row.get<std::vector<double>>();
    Eigen::VectorXd l(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) l[static_cast<Eigen::Index>(i)] = v[i];
    policy.table().emplace(key, std::move(l));
  }
  return policy;
}

double grad_table_norm(const TabularPolicy::Table& grad) {
  double sq = 0.0;
  for (const auto& [key, g] : grad) sq += g.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace grpolab
