#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "crowdnav/policy.hpp"
#include "crowdnav/rollout.hpp"
#include "crowdnav/settings.hpp"

namespace crowdnav {

/// Adam with bias correction over a ParamStore. lr = 0 leaves parameters
/// bit-identical.
class Adam {
public:
    Adam(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.reserve(store.count());
        v_.reserve(store.count());
        for (int i = 0; i < store.count(); ++i) {
            m_.emplace_back(store[i].value.rows, store[i].value.cols);
            v_.emplace_back(store[i].value.rows, store[i].value.cols);
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long long step_count() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (int i = 0; i < store_.count(); ++i) {
            auto& value = store_[i].value;
            auto& grad = store_[i].grad;
            auto& m = m_[i];
            auto& v = v_[i];
            for (int j = 0; j < value.size(); ++j) {
                double gj = grad.v[j];
                m.v[j] = beta1_ * m.v[j] + (1.0 - beta1_) * gj;
                v.v[j] = beta2_ * v.v[j] + (1.0 - beta2_) * gj * gj;
                double mhat = m.v[j] / bc1;
                double vhat = v.v[j] / bc2;
                value.v[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    /// Moment tensors under stable names, for resumable checkpoints.
    std::vector<std::pair<std::string, const Tensor*>> named_state() const {
        std::vector<std::pair<std::string, const Tensor*>> out;
        for (int i = 0; i < store_.count(); ++i) {
            out.emplace_back("adam.m." + store_[i].name, &m_[i]);
            out.emplace_back("adam.v." + store_[i].name, &v_[i]);
        }
        return out;
    }

    void load_state(const Checkpoint& c, long long step_count) {
        for (int i = 0; i < store_.count(); ++i) {
            auto im = c.tensors.find("adam.m." + store_[i].name);
            auto iv = c.tensors.find("adam.v." + store_[i].name);
            if (im == c.tensors.end() || iv == c.tensors.end())
                throw std::runtime_error("checkpoint lacks optimizer state for " +
                                         store_[i].name);
            m_[i] = im->second;
            v_[i] = iv->second;
        }
        t_ = step_count;
    }

private:
    ParamStore& store_;
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double kl_bnn = 0.0;
    int minibatches = 0;
};

/// One PPO update over a collected buffer: clipped surrogate + value loss +
/// entropy bonus + kl_coef * (BNN KL / dataset size), Adam steps per
/// minibatch. Advantages are normalized over the whole batch first.
/// Throws with diagnostics if any loss turns non-finite.
inline PpoStats ppo_update(PolicyNet& net, Adam& adam, RolloutBuffer& buffer,
                           const PpoConfig& cfg, int n_samples, PolicyVariant variant,
                           Rng& shuffle_rng, double v_max) {
    const int n = buffer.size();
    if (n == 0) return {};

    // normalize advantages per batch
    double mean = std::accumulate(buffer.advantages.begin(), buffer.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : buffer.advantages) var += (a - mean) * (a - mean);
    double sd = std::sqrt(var / n) + 1e-8;
    std::vector<double> adv(n);
    for (int i = 0; i < n; ++i) adv[i] = (buffer.advantages[i] - mean) / sd;

    const double kl_coef = cfg.kl_coef < 0.0 ? 1.0 / n : cfg.kl_coef;

    PpoStats stats;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    Graph g;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the deterministic stream
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
            std::swap(order[i], order[j]);
        }
        for (int start = 0; start < n; start += cfg.minibatch) {
            int end = std::min(n, start + cfg.minibatch);
            int batch = end - start;
            net.store().zero_grads();

            double acc_pol = 0.0, acc_val = 0.0, acc_ent = 0.0, acc_clip = 0.0,
                   acc_akl = 0.0;
            for (int bi = start; bi < end; ++bi) {
                const RolloutStep& s = buffer.steps[order[bi]];
                const double a = adv[order[bi]];
                const double ret = buffer.returns[order[bi]];

                g.reset();
                PolicyForward f = net.forward(g, s.input, s.h_prev, s.bnn_seed, n_samples,
                                              variant);

                // log pi_new(a_t): Gaussian at the stored pre-squash z plus the
                // (constant) squash correction
                Tensor zt(1, 2);
                zt.v = {s.z.x, s.z.y};
                Graph::Id zc = g.input(zt);
                Graph::Id diff = g.sub(zc, f.mean);
                Graph::Id inv_sd = g.exp_(g.scale(f.log_std, -1.0));
                Graph::Id nrm = g.mul(diff, inv_sd);
                Graph::Id lp_vec = g.sub(g.scale(g.square(nrm), -0.5), f.log_std);
                // squash correction is constant w.r.t. parameters but must be
                // present so lp matches the stored rollout log-prob exactly
                double squash = 2.0 * std::log(v_max) + log_one_minus_tanh_sq(s.z.x) +
                                log_one_minus_tanh_sq(s.z.y);
                Graph::Id lp = g.add_scalar(g.sum_all(lp_vec),
                                            -std::log(2.0 * M_PI) - squash);

                Graph::Id ratio = g.exp_(g.add_scalar(lp, -s.log_prob));
                Graph::Id surr1 = g.scale(ratio, a);
                Graph::Id surr2 = g.scale(g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), a);
                Graph::Id pol_loss = g.scale(g.min2(surr1, surr2), -1.0);

                Graph::Id verr = g.add_scalar(f.value, -ret);
                Graph::Id val_loss = g.scale(g.square(verr), 0.5 * cfg.vf_coef);

                Graph::Id ent = g.add_scalar(g.sum_all(f.log_std),
                                             std::log(2.0 * M_PI * M_E));
                Graph::Id ent_term = g.scale(ent, -cfg.ent_coef);

                Graph::Id sample_loss = g.add(g.add(pol_loss, val_loss), ent_term);
                double loss_val = g.scalar(sample_loss);
                if (!std::isfinite(loss_val)) {
                    char msg[256];
                    std::snprintf(msg, sizeof(msg),
                                  "ppo_update: non-finite loss (sample %d, pol=%g val=%g "
                                  "ratio=%g adv=%g)",
                                  order[bi], g.scalar(pol_loss), g.scalar(val_loss),
                                  g.scalar(ratio), a);
                    throw std::runtime_error(msg);
                }
                g.backward(sample_loss, 1.0 / batch);

                acc_pol += g.scalar(pol_loss);
                acc_val += g.scalar(val_loss);
                acc_ent += g.scalar(ent);
                acc_clip += std::abs(g.scalar(ratio) - 1.0) > cfg.clip ? 1.0 : 0.0;
                acc_akl += s.log_prob - g.scalar(lp);
            }

            if (variant == PolicyVariant::Full && kl_coef > 0.0) {
                g.reset();
                Graph::Id kl = net.kl_graph(g);
                stats.kl_bnn = g.scalar(kl);
                g.backward(kl, kl_coef / n);
            }

            if (cfg.max_grad_norm > 0.0) {
                double norm_sq = 0.0;
                for (int i = 0; i < net.store().count(); ++i)
                    for (double gv : net.store()[i].grad.v) norm_sq += gv * gv;
                double norm = std::sqrt(norm_sq);
                if (norm > cfg.max_grad_norm) {
                    double scale = cfg.max_grad_norm / norm;
                    for (int i = 0; i < net.store().count(); ++i)
                        for (double& gv : net.store()[i].grad.v) gv *= scale;
                }
            }

            adam.step();
            stats.policy_loss += acc_pol / batch;
            stats.value_loss += acc_val / batch;
            stats.entropy += acc_ent / batch;
            stats.clip_fraction += acc_clip / batch;
            stats.approx_kl += acc_akl / batch;
            stats.minibatches += 1;
        }
    }

    if (stats.minibatches > 0) {
        stats.policy_loss /= stats.minibatches;
        stats.value_loss /= stats.minibatches;
        stats.entropy /= stats.minibatches;
        stats.clip_fraction /= stats.minibatches;
        stats.approx_kl /= stats.minibatches;
    }
    return stats;
}

}  // namespace crowdnav
