#include "grpolab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace grpolab {

Vec group_advantages(const Vec& rewards, double eps) {
  const Eigen::Index k = rewards.size();
  if (k < 2) throw std::invalid_argument("group size K must be >= 2");
  const double mean = rewards.mean();
  const double var = (rewards.array() - mean).square().sum() / static_cast<double>(k);
  const double std = std::sqrt(var);
  if (std < eps) return Vec::Zero(k);  // advantage collapse: degenerate group
  return (rewards.array() - mean).matrix() / std;
}

void settle_advantages(RolloutGroup& group, double eps) {
  const Eigen::Index k = static_cast<Eigen::Index>(group.trajectories.size());
  group.rewards.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    group.rewards[i] = group.trajectories[static_cast<std::size_t>(i)].reward;
  }
  group.advantages = group_advantages(group.rewards, eps);
}

double clipped_term(double rho, double advantage, const ClipConfig& cfg) {
  if (rho <= 0.0) throw std::invalid_argument("ratio must be positive");
  const double clipped =
      std::clamp(rho, 1.0 - cfg.eps_lo, 1.0 + cfg.eps_hi) * advantage;
  return std::min(rho * advantage, clipped);
}

double low_var_kl(double logp_cur, double logp_ref) {
  if (!std::isfinite(logp_cur) || !std::isfinite(logp_ref)) {
    throw std::invalid_argument("non-finite log-probability");
  }
  const double r = std::exp(logp_ref - logp_cur);
  return r - (logp_ref - logp_cur) - 1.0;
}

void refresh_current_logps(Trajectory& traj, const TabularPolicy& policy) {
  for (TokenRecord& tok : traj.tokens) {
    if (tok.role_flag) {
      tok.logp_current = policy.log_prob(tok.context, tok.token_id);
    }
  }
}

namespace {

struct ContextCache {
  Eigen::VectorXd probs;
  double entropy = 0.0;
};

const ContextCache& cached(const TabularPolicy& policy, const std::string& key,
                           std::unordered_map<std::string, ContextCache>& cache) {
  auto it = cache.find(key);
  if (it == cache.end()) {
    ContextCache c;
    c.probs = policy.probs(key);
    for (Eigen::Index a = 0; a < c.probs.size(); ++a) {
      if (c.probs[a] > 0.0) c.entropy -= c.probs[a] * std::log(c.probs[a]);
    }
    it = cache.emplace(key, std::move(c)).first;
  }
  return it->second;
}

}  // namespace

LossReport grpo_loss(std::span<const RolloutGroup> groups,
                     const std::vector<std::vector<Vec>>& token_weights,
                     const ClipConfig& cfg, const TabularPolicy* policy,
                     TabularPolicy::Table* grad,
                     const std::vector<std::vector<Vec>>* advantage_offsets) {
  if (token_weights.size() != groups.size()) {
    throw std::invalid_argument("token_weights/groups size mismatch");
  }
  std::size_t n_traj = 0;
  for (const RolloutGroup& g : groups) n_traj += g.trajectories.size();
  LossReport report;
  if (n_traj == 0) return report;
  const double inv_n = 1.0 / static_cast<double>(n_traj);

  std::unordered_map<std::string, ContextCache> cache;
  double weighted_entropy = 0.0;
  double entropy_mass = 0.0;

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const RolloutGroup& group = groups[gi];
    if (token_weights[gi].size() != group.trajectories.size()) {
      throw std::invalid_argument("token_weights group layout mismatch");
    }
    if (group.advantages.size() !=
        static_cast<Eigen::Index>(group.trajectories.size())) {
      throw std::invalid_argument("group advantages not settled");
    }
    for (std::size_t ki = 0; ki < group.trajectories.size(); ++ki) {
      const Trajectory& traj = group.trajectories[ki];
      const Vec& w = token_weights[gi][ki];
      if (w.size() != traj.token_count()) {
        throw std::invalid_argument("token weight vector length mismatch");
      }
      const double base_advantage =
          group.advantages[static_cast<Eigen::Index>(ki)];
      const Vec* offsets = advantage_offsets ? &(*advantage_offsets)[gi][ki] : nullptr;
      const MaskVec mask = effective_mask(traj);
      const double denom = std::max(1.0, static_cast<double>(mask.sum()));
      const double coef = traj.loss_weight * inv_n / denom;

      for (int t = 0; t < traj.token_count(); ++t) {
        if (w[t] == 0.0) continue;  // mask dominance: exactly zero contribution
        const TokenRecord& tok = traj.tokens[static_cast<std::size_t>(t)];
        double lp = tok.logp_current;
        const ContextCache* ctx = nullptr;
        if (policy) {
          ctx = &cached(*policy, tok.context, cache);
          lp = std::log(ctx->probs[tok.token_id]);
        }
        const double advantage = base_advantage + (offsets ? (*offsets)[t] : 0.0);
        const double rho = std::exp(lp - tok.logp_old);
        const double unclipped = rho * advantage;
        const double clipped =
            std::clamp(rho, 1.0 - cfg.eps_lo, 1.0 + cfg.eps_hi) * advantage;
        const double term = std::min(unclipped, clipped);
        const double r_ref = std::exp(tok.logp_ref - lp);
        const double kl = r_ref - (tok.logp_ref - lp) - 1.0;

        report.pg += coef * (-w[t] * term);
        report.kl += coef * cfg.kl_coef * w[t] * kl;
        if (ctx) {
          weighted_entropy += w[t] * ctx->entropy;
          entropy_mass += w[t];
          report.loss += -cfg.entropy_coef * coef * w[t] * ctx->entropy;
        }

        if (grad && policy) {
          // d loss / d logp, then logp -> logits via (e_a - p).
          double dlp = 0.0;
          if (unclipped <= clipped) dlp += -coef * w[t] * advantage * rho;
          dlp += coef * cfg.kl_coef * w[t] * (1.0 - r_ref);
          auto git = grad->find(tok.context);
          if (git == grad->end()) {
            git = grad->emplace(tok.context,
                                Eigen::VectorXd::Zero(ctx->probs.size()))
                      .first;
          }
          Eigen::VectorXd& grow = git->second;
          grow.noalias() -= dlp * ctx->probs;
          grow[tok.token_id] += dlp;
          if (cfg.entropy_coef != 0.0) {
            const double ec = -cfg.entropy_coef * coef * w[t];
            for (Eigen::Index a = 0; a < ctx->probs.size(); ++a) {
              const double p = ctx->probs[a];
              if (p > 0.0) grow[a] += ec * (-p * (std::log(p) + ctx->entropy));
            }
          }
        }
      }
    }
  }
  report.loss += report.pg + report.kl;
  report.entropy = entropy_mass > 0.0 ? weighted_entropy / entropy_mass : 0.0;
  return report;
}

}  // namespace grpolab
