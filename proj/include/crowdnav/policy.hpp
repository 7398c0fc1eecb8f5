#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdnav/features.hpp"
#include "crowdnav/rng.hpp"
#include "crowdnav/tensor.hpp"
#include "crowdnav/vec2.hpp"

namespace crowdnav {

// ---------------------------------------------------------------------------
// parameters

struct PolicyDims {
    int n_max = 20;
    int K = 5;
    int d_model = 64;
    int heads = 4;
    int d_hidden = 128;      // GRU hidden size
    int bnn_hidden = 64;
    int head_hidden = 64;    // actor/critic MLP hidden
    double sigma_prior = 0.1;

    int d_k() const { return d_model / heads; }
    int gru_input() const { return 3 * d_model; }
};

enum class InitKind { Xavier, Zero, RhoInit, LogStdInit };

/// Named parameter tensors with matching gradient storage.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        InitKind init = InitKind::Xavier;
    };

    int add(const std::string& name, int rows, int cols, InitKind init) {
        Entry e;
        e.name = name;
        e.value = Tensor(rows, cols);
        e.grad = Tensor(rows, cols);
        e.init = init;
        entries_.push_back(std::move(e));
        return static_cast<int>(entries_.size()) - 1;
    }

    Entry& operator[](int i) { return entries_[i]; }
    const Entry& operator[](int i) const { return entries_[i]; }
    int count() const { return static_cast<int>(entries_.size()); }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(0.0);
    }

    void init_weights(std::uint64_t seed) {
        Rng rng = Rng::derive(seed, 0x1717);
        for (auto& e : entries_) {
            switch (e.init) {
                case InitKind::Xavier: {
                    double bound = std::sqrt(6.0 / (e.value.rows + e.value.cols));
                    for (double& x : e.value.v) x = rng.uniform(-bound, bound);
                    break;
                }
                case InitKind::Zero:
                    e.value.fill(0.0);
                    break;
                case InitKind::RhoInit:
                    e.value.fill(-5.0);  // softplus(-5) ~ 0.0067: small initial sigma
                    break;
                case InitKind::LogStdInit:
                    e.value.fill(-0.5);
                    break;
            }
        }
    }

    int find(const std::string& name) const {
        for (int i = 0; i < count(); ++i)
            if (entries_[i].name == name) return i;
        return -1;
    }

private:
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// network building blocks (graph-level; unit-tested against dense oracles)

struct MhaIds {
    std::vector<std::array<Graph::Id, 3>> heads;  // {Wq, Wk, Wv} per head
    Graph::Id wo = -1;
};

struct CrossIds {
    Graph::Id wq = -1, wk = -1, wv = -1;
};

struct BnnLayerIds {
    Graph::Id mu_w = -1, rho_w = -1, mu_b = -1, rho_b = -1;
};

struct GruIds {
    Graph::Id wz = -1, uz = -1, bz = -1;
    Graph::Id wr = -1, ur = -1, br = -1;
    Graph::Id wh = -1, uh = -1, bh = -1;
};

/// Masked multi-head self-attention (scores scaled by 1/sqrt(d_k), masked keys
/// excluded before softmax, heads concatenated through the output projection).
/// Masked query rows output exactly zero.
inline Graph::Id mha_self(Graph& g, Graph::Id x, const std::vector<std::uint8_t>& mask,
                          const MhaIds& p, int d_k) {
    bool any = false;
    for (auto m : mask) any = any || (m != 0);
    if (!any) return g.zero_rows(x, mask);  // no softmax over an empty key set

    Graph::Id heads = -1;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (const auto& h : p.heads) {
        Graph::Id q = g.matmul(x, h[0]);
        Graph::Id k = g.matmul(x, h[1]);
        Graph::Id v = g.matmul(x, h[2]);
        Graph::Id scores = g.scale(g.matmul_nt(q, k), inv_sqrt_dk);
        Graph::Id attn = g.softmax_rows_masked(scores, mask);
        Graph::Id out = g.matmul(attn, v);
        heads = heads < 0 ? out : g.concat_cols(heads, out);
    }
    return g.zero_rows(g.matmul(heads, p.wo), mask);
}

/// Cross-attention of token rows against the single robot key (Q and V project
/// from the rows, K from the robot token). With one key the softmax weight is
/// identically 1, so each unmasked row contributes its own projected value;
/// rows are then pooled by masked mean into a fixed-size vector.
inline Graph::Id cross_attention_pooled(Graph& g, Graph::Id rows,
                                        const std::vector<std::uint8_t>& mask,
                                        Graph::Id robot_token, const CrossIds& p,
                                        int d_model) {
    bool any = false;
    for (auto m : mask) any = any || (m != 0);
    if (!any) {
        Tensor zero(1, d_model);
        return g.input(zero);
    }
    Graph::Id q = g.matmul(rows, p.wq);
    Graph::Id k = g.matmul(robot_token, p.wk);
    Graph::Id v = g.matmul(rows, p.wv);
    Graph::Id scores = g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_model)));
    std::vector<std::uint8_t> key_mask(1, 1);
    Graph::Id attn = g.softmax_rows_masked(scores, key_mask);  // n x 1, all ones
    Graph::Id weighted = g.mul_colvec(v, attn);
    return g.mean_rows_masked(g.zero_rows(weighted, mask), mask);
}

struct BnnForwardIds {
    Graph::Id features = -1;
    Graph::Id kl = -1;
};

/// Draws the reparameterization noise for one BNN pass in a fixed order; the
/// same seed always reproduces the same weights.
inline Tensor draw_eps(Rng& rng, int rows, int cols) {
    Tensor t(rows, cols);
    int n = t.size();
    for (int i = 0; i + 1 < n; i += 2) rng.normal_pair(t.v[i], t.v[i + 1]);
    if (n % 2 == 1) t.v[n - 1] = rng.normal();
    return t;
}

/// Two-layer Bayesian network with factorized Gaussian weight posteriors
/// (w = mu + softplus(rho) * eps). features = mean over n_samples passes;
/// kl = closed-form KL(q || N(0, sigma_prior^2)) summed over all parameters.
/// deterministic=true evaluates at mu with kl = 0 (the DNN ablation).
inline BnnForwardIds bnn_forward(Graph& g, Graph::Id x, const BnnLayerIds& l1,
                                 const BnnLayerIds& l2, int n_samples, Rng& eps_rng,
                                 double sigma_prior, bool deterministic) {
    // sigma = softplus(rho) is sample-independent; compute it once per layer
    Graph::Id sig_w1 = -1, sig_b1 = -1, sig_w2 = -1, sig_b2 = -1;
    if (!deterministic) {
        sig_w1 = g.softplus_(l1.rho_w);
        sig_b1 = g.softplus_(l1.rho_b);
        sig_w2 = g.softplus_(l2.rho_w);
        sig_b2 = g.softplus_(l2.rho_b);
    }
    auto sampled = [&](Graph::Id mu, Graph::Id sigma) -> Graph::Id {
        if (deterministic) return mu;
        const Tensor& shape = g.val(mu);
        Tensor eps = draw_eps(eps_rng, shape.rows, shape.cols);
        return g.add(mu, g.mul(sigma, g.input(eps)));
    };

    Graph::Id acc = -1;
    const int passes = deterministic ? 1 : n_samples;
    for (int s = 0; s < passes; ++s) {
        Graph::Id w1 = sampled(l1.mu_w, sig_w1);
        Graph::Id b1 = sampled(l1.mu_b, sig_b1);
        Graph::Id w2 = sampled(l2.mu_w, sig_w2);
        Graph::Id b2 = sampled(l2.mu_b, sig_b2);
        Graph::Id h = g.relu(g.add_rowvec(g.matmul(x, w1), b1));
        Graph::Id o = g.add_rowvec(g.matmul(h, w2), b2);
        acc = acc < 0 ? o : g.add(acc, o);
    }

    BnnForwardIds out;
    out.features = passes > 1 ? g.scale(acc, 1.0 / passes) : acc;
    if (deterministic) {
        out.kl = g.input_scalar(0.0);
        return out;
    }

    // KL(N(mu, sigma^2) || N(0, sigma_p^2)) per entry:
    //   log(sigma_p) - log(sigma) + (sigma^2 + mu^2) / (2 sigma_p^2) - 1/2
    const double inv_2sp2 = 1.0 / (2.0 * sigma_prior * sigma_prior);
    const double log_sp = std::log(sigma_prior);
    Graph::Id kl = -1;
    const std::pair<Graph::Id, Graph::Id> pairs[] = {
        {l1.mu_w, sig_w1}, {l1.mu_b, sig_b1}, {l2.mu_w, sig_w2}, {l2.mu_b, sig_b2}};
    for (auto [mu, sigma] : pairs) {
        Graph::Id term = g.add_scalar(
            g.add(g.scale(g.log_(sigma), -1.0),
                  g.scale(g.add(g.square(sigma), g.square(mu)), inv_2sp2)),
            log_sp - 0.5);
        Graph::Id summed = g.sum_all(term);
        kl = kl < 0 ? summed : g.add(kl, summed);
    }
    out.kl = kl;
    return out;
}

/// Standard GRU cell on the concatenated input.
inline Graph::Id gru_step(Graph& g, Graph::Id x, Graph::Id h_prev, const GruIds& p) {
    Graph::Id z = g.sigmoid_(g.add_rowvec(g.add(g.matmul(x, p.wz), g.matmul(h_prev, p.uz)), p.bz));
    Graph::Id r = g.sigmoid_(g.add_rowvec(g.add(g.matmul(x, p.wr), g.matmul(h_prev, p.ur)), p.br));
    Graph::Id cand = g.tanh_(
        g.add_rowvec(g.add(g.matmul(x, p.wh), g.matmul(g.mul(r, h_prev), p.uh)), p.bh));
    // h' = (1 - z) * h + z * cand
    Graph::Id one_minus_z = g.add_scalar(g.scale(z, -1.0), 1.0);
    return g.add(g.mul(one_minus_z, h_prev), g.mul(z, cand));
}

inline Graph::Id mlp2(Graph& g, Graph::Id x, Graph::Id w1, Graph::Id b1, Graph::Id w2,
                      Graph::Id b2) {
    return g.add_rowvec(g.matmul(g.relu(g.add_rowvec(g.matmul(x, w1), b1)), w2), b2);
}

// ---------------------------------------------------------------------------
// the policy network

/// Which stages of the network run; same parameter set for every variant so a
/// single checkpoint serves all ablations.
enum class PolicyVariant { Full, NoBelief, DetBnn, RnnOnly };

inline const char* variant_name(PolicyVariant v) {
    switch (v) {
        case PolicyVariant::Full: return "bnbrl+";
        case PolicyVariant::NoBelief: return "bnbrl";
        case PolicyVariant::DetBnn: return "bndnn";
        case PolicyVariant::RnnOnly: return "rnn";
    }
    return "?";
}

inline PolicyVariant variant_from_name(const std::string& s) {
    if (s == "bnbrl+") return PolicyVariant::Full;
    if (s == "bnbrl") return PolicyVariant::NoBelief;
    if (s == "bndnn") return PolicyVariant::DetBnn;
    if (s == "rnn") return PolicyVariant::RnnOnly;
    throw std::runtime_error("unknown policy variant: " + s);
}

struct PolicyForward {
    Graph::Id mean = -1;     // 1 x 2 pre-squash action mean
    Graph::Id log_std = -1;  // 1 x 2 state-independent log stddev (param)
    Graph::Id value = -1;    // 1 x 1
    Graph::Id h_next = -1;   // 1 x d_hidden
    Graph::Id kl = -1;       // 1 x 1 BNN KL, -1 when the belief path did not run
    Graph::Id v_rh = -1;
    Graph::Id v_rb = -1;
};

class PolicyNet {
public:
    explicit PolicyNet(const PolicyDims& dims) : dims_(dims) {
        const int dm = dims.d_model;
        const int dk = dims.d_k();
        if (dk * dims.heads != dm)
            throw std::runtime_error("PolicyNet: d_model must be divisible by heads");

        emb_human_w_ = store_.add("emb.human.w", human_row_width(dims.K), dm, InitKind::Xavier);
        emb_human_b_ = store_.add("emb.human.b", 1, dm, InitKind::Zero);
        emb_robot_w_ = store_.add("emb.robot.w", kRobotFeatureWidth, dm, InitKind::Xavier);
        emb_robot_b_ = store_.add("emb.robot.b", 1, dm, InitKind::Zero);
        emb_belief_w_ = store_.add("emb.belief.w", belief_row_width(dims.K), dm, InitKind::Xavier);
        emb_belief_b_ = store_.add("emb.belief.b", 1, dm, InitKind::Zero);

        auto add_mha = [&](const std::string& prefix, std::vector<std::array<int, 3>>& out_heads,
                           int& out_wo) {
            for (int h = 0; h < dims.heads; ++h) {
                std::string base = prefix + "." + std::to_string(h);
                out_heads.push_back({store_.add(base + ".wq", dm, dk, InitKind::Xavier),
                                     store_.add(base + ".wk", dm, dk, InitKind::Xavier),
                                     store_.add(base + ".wv", dm, dk, InitKind::Xavier)});
            }
            out_wo = store_.add(prefix + ".wo", dm, dm, InitKind::Xavier);
        };
        add_mha("hh", hh_heads_, hh_wo_);

        rh_wq_ = store_.add("rh.wq", dm, dm, InitKind::Xavier);
        rh_wk_ = store_.add("rh.wk", dm, dm, InitKind::Xavier);
        rh_wv_ = store_.add("rh.wv", dm, dm, InitKind::Xavier);

        bnn1_mu_w_ = store_.add("bnn1.mu.w", dm, dims.bnn_hidden, InitKind::Xavier);
        bnn1_rho_w_ = store_.add("bnn1.rho.w", dm, dims.bnn_hidden, InitKind::RhoInit);
        bnn1_mu_b_ = store_.add("bnn1.mu.b", 1, dims.bnn_hidden, InitKind::Zero);
        bnn1_rho_b_ = store_.add("bnn1.rho.b", 1, dims.bnn_hidden, InitKind::RhoInit);
        bnn2_mu_w_ = store_.add("bnn2.mu.w", dims.bnn_hidden, dm, InitKind::Xavier);
        bnn2_rho_w_ = store_.add("bnn2.rho.w", dims.bnn_hidden, dm, InitKind::RhoInit);
        bnn2_mu_b_ = store_.add("bnn2.mu.b", 1, dm, InitKind::Zero);
        bnn2_rho_b_ = store_.add("bnn2.rho.b", 1, dm, InitKind::RhoInit);

        add_mha("bb", bb_heads_, bb_wo_);
        rb_wq_ = store_.add("rb.wq", dm, dm, InitKind::Xavier);
        rb_wk_ = store_.add("rb.wk", dm, dm, InitKind::Xavier);
        rb_wv_ = store_.add("rb.wv", dm, dm, InitKind::Xavier);

        const int di = dims.gru_input();
        const int dh = dims.d_hidden;
        gru_wz_ = store_.add("gru.wz", di, dh, InitKind::Xavier);
        gru_uz_ = store_.add("gru.uz", dh, dh, InitKind::Xavier);
        gru_bz_ = store_.add("gru.bz", 1, dh, InitKind::Zero);
        gru_wr_ = store_.add("gru.wr", di, dh, InitKind::Xavier);
        gru_ur_ = store_.add("gru.ur", dh, dh, InitKind::Xavier);
        gru_br_ = store_.add("gru.br", 1, dh, InitKind::Zero);
        gru_wh_ = store_.add("gru.wh", di, dh, InitKind::Xavier);
        gru_uh_ = store_.add("gru.uh", dh, dh, InitKind::Xavier);
        gru_bh_ = store_.add("gru.bh", 1, dh, InitKind::Zero);

        actor_w1_ = store_.add("actor.w1", dh, dims.head_hidden, InitKind::Xavier);
        actor_b1_ = store_.add("actor.b1", 1, dims.head_hidden, InitKind::Zero);
        actor_w2_ = store_.add("actor.w2", dims.head_hidden, 2, InitKind::Xavier);
        actor_b2_ = store_.add("actor.b2", 1, 2, InitKind::Zero);
        actor_log_std_ = store_.add("actor.logstd", 1, 2, InitKind::LogStdInit);

        critic_w1_ = store_.add("critic.w1", dh, dims.head_hidden, InitKind::Xavier);
        critic_b1_ = store_.add("critic.b1", 1, dims.head_hidden, InitKind::Zero);
        critic_w2_ = store_.add("critic.w2", dims.head_hidden, 1, InitKind::Xavier);
        critic_b2_ = store_.add("critic.b2", 1, 1, InitKind::Zero);
    }

    const PolicyDims& dims() const { return dims_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    std::int64_t parameter_count() const { return store_.parameter_count(); }
    void init_weights(std::uint64_t seed) { store_.init_weights(seed); }

    PolicyForward forward(Graph& g, const PolicyInput& in, const Tensor& h_prev,
                          std::uint64_t bnn_seed, int n_samples, PolicyVariant variant) {
        PolicyForward out;
        auto P = [&](int idx) { return g.param(&store_[idx].value, &store_[idx].grad); };

        // spatio stage, visible humans
        Graph::Id x_in;
        if (variant == PolicyVariant::RnnOnly) {
            Tensor stripped = in.humans;  // current positions only, no predictions
            for (int i = 0; i < stripped.rows; ++i)
                for (int j = 2; j < stripped.cols; ++j) stripped.at(i, j) = 0.0;
            x_in = g.input(stripped);
        } else {
            x_in = g.input(in.humans);
        }
        Graph::Id x = g.add_rowvec(g.matmul(x_in, P(emb_human_w_)), P(emb_human_b_));
        Graph::Id w_emb = g.add_rowvec(g.matmul(g.input(in.robot), P(emb_robot_w_)),
                                       P(emb_robot_b_));

        Graph::Id v_rh;
        if (variant == PolicyVariant::RnnOnly) {
            v_rh = g.mean_rows_masked(g.zero_rows(x, in.mask), in.mask);
        } else {
            MhaIds hh;
            for (auto& hd : hh_heads_) hh.heads.push_back({P(hd[0]), P(hd[1]), P(hd[2])});
            hh.wo = P(hh_wo_);
            Graph::Id v_hh = mha_self(g, x, in.mask, hh, dims_.d_k());
            CrossIds rh{P(rh_wq_), P(rh_wk_), P(rh_wv_)};
            v_rh = cross_attention_pooled(g, v_hh, in.mask, w_emb, rh, dims_.d_model);
        }

        // belief stage
        Graph::Id v_rb;
        const bool belief_active = (variant == PolicyVariant::Full ||
                                    variant == PolicyVariant::DetBnn) &&
                                   in.any_belief();
        if (belief_active) {
            Graph::Id b = g.add_rowvec(g.matmul(g.input(in.beliefs), P(emb_belief_w_)),
                                       P(emb_belief_b_));
            BnnLayerIds l1{P(bnn1_mu_w_), P(bnn1_rho_w_), P(bnn1_mu_b_), P(bnn1_rho_b_)};
            BnnLayerIds l2{P(bnn2_mu_w_), P(bnn2_rho_w_), P(bnn2_mu_b_), P(bnn2_rho_b_)};
            Rng eps_rng(bnn_seed);
            BnnForwardIds bnn = bnn_forward(g, b, l1, l2, n_samples, eps_rng,
                                            dims_.sigma_prior,
                                            variant == PolicyVariant::DetBnn);
            out.kl = bnn.kl;
            MhaIds bb;
            for (auto& hd : bb_heads_) bb.heads.push_back({P(hd[0]), P(hd[1]), P(hd[2])});
            bb.wo = P(bb_wo_);
            Graph::Id v_bb = mha_self(g, g.zero_rows(bnn.features, in.belief_mask),
                                      in.belief_mask, bb, dims_.d_k());
            CrossIds rb{P(rb_wq_), P(rb_wk_), P(rb_wv_)};
            v_rb = cross_attention_pooled(g, v_bb, in.belief_mask, w_emb, rb, dims_.d_model);
        } else {
            Tensor zero(1, dims_.d_model);
            v_rb = g.input(zero);
        }

        // temporal stage + heads
        Graph::Id gru_in = g.concat_cols(v_rh, w_emb, v_rb);
        GruIds gru{P(gru_wz_), P(gru_uz_), P(gru_bz_), P(gru_wr_), P(gru_ur_),
                   P(gru_br_), P(gru_wh_), P(gru_uh_), P(gru_bh_)};
        Graph::Id h_next = gru_step(g, gru_in, g.input(h_prev), gru);

        out.mean = mlp2(g, h_next, P(actor_w1_), P(actor_b1_), P(actor_w2_), P(actor_b2_));
        out.log_std = P(actor_log_std_);
        out.value = mlp2(g, h_next, P(critic_w1_), P(critic_b1_), P(critic_w2_), P(critic_b2_));
        out.h_next = h_next;
        out.v_rh = v_rh;
        out.v_rb = v_rb;
        return out;
    }

    /// Param-only KL graph for the PPO regularizer (independent of inputs).
    Graph::Id kl_graph(Graph& g) {
        auto P = [&](int idx) { return g.param(&store_[idx].value, &store_[idx].grad); };
        BnnLayerIds l1{P(bnn1_mu_w_), P(bnn1_rho_w_), P(bnn1_mu_b_), P(bnn1_rho_b_)};
        BnnLayerIds l2{P(bnn2_mu_w_), P(bnn2_rho_w_), P(bnn2_mu_b_), P(bnn2_rho_b_)};
        Tensor dummy(1, dims_.d_model);
        Graph::Id x = g.input(dummy);
        Rng rng(0);
        return bnn_forward(g, x, l1, l2, 1, rng, dims_.sigma_prior, false).kl;
    }

    Tensor initial_hidden() const { return Tensor(1, dims_.d_hidden); }

private:
    PolicyDims dims_;
    ParamStore store_;

    int emb_human_w_, emb_human_b_, emb_robot_w_, emb_robot_b_, emb_belief_w_, emb_belief_b_;
    std::vector<std::array<int, 3>> hh_heads_;
    int hh_wo_;
    int rh_wq_, rh_wk_, rh_wv_;
    int bnn1_mu_w_, bnn1_rho_w_, bnn1_mu_b_, bnn1_rho_b_;
    int bnn2_mu_w_, bnn2_rho_w_, bnn2_mu_b_, bnn2_rho_b_;
    std::vector<std::array<int, 3>> bb_heads_;
    int bb_wo_;
    int rb_wq_, rb_wk_, rb_wv_;
    int gru_wz_, gru_uz_, gru_bz_, gru_wr_, gru_ur_, gru_br_, gru_wh_, gru_uh_, gru_bh_;
    int actor_w1_, actor_b1_, actor_w2_, actor_b2_, actor_log_std_;
    int critic_w1_, critic_b1_, critic_w2_, critic_b2_;
};

// ---------------------------------------------------------------------------
// squashed Gaussian action distribution (numeric side)

/// log(1 - tanh(z)^2) without catastrophic cancellation.
inline double log_one_minus_tanh_sq(double z) {
    return 2.0 * (std::log(2.0) - z - stable_softplus(-2.0 * z));
}

inline double gaussian_log_prob(double z, double mean, double log_std) {
    double sd = std::exp(log_std);
    double d = (z - mean) / sd;
    return -log_std - 0.5 * d * d - 0.5 * std::log(2.0 * M_PI);
}

/// log-probability of the squashed action a = v_max * tanh(z).
inline double squashed_log_prob(const Vec2& z, const Vec2& mean, const Vec2& log_std,
                                double v_max) {
    double lp = gaussian_log_prob(z.x, mean.x, log_std.x) +
                gaussian_log_prob(z.y, mean.y, log_std.y);
    lp -= std::log(v_max) + log_one_minus_tanh_sq(z.x);
    lp -= std::log(v_max) + log_one_minus_tanh_sq(z.y);
    return lp;
}

struct ActionSample {
    Vec2 action;  // squashed, per-component |a_i| <= v_max
    Vec2 z;       // pre-squash Gaussian sample
    double log_prob = 0.0;
};

inline ActionSample sample_action(const Vec2& mean, const Vec2& log_std, double v_max,
                                  Rng& rng) {
    ActionSample s;
    s.z = {rng.normal(mean.x, std::exp(log_std.x)), rng.normal(mean.y, std::exp(log_std.y))};
    s.action = {v_max * std::tanh(s.z.x), v_max * std::tanh(s.z.y)};
    s.log_prob = squashed_log_prob(s.z, mean, log_std, v_max);
    return s;
}

inline Vec2 mean_action(const Vec2& mean, double v_max) {
    return {v_max * std::tanh(mean.x), v_max * std::tanh(mean.y)};
}

/// Entropy of the pre-squash Gaussian (the standard PPO bonus term).
inline double gaussian_entropy(const Vec2& log_std) {
    return log_std.x + log_std.y + std::log(2.0 * M_PI * M_E);
}

// ---------------------------------------------------------------------------
// checkpoint container: versioned, self-describing, little-endian

namespace ckpt {

constexpr char kMagic[8] = {'C', 'N', 'A', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t x) {
    char b[4] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff),
                 static_cast<char>((x >> 16) & 0xff), static_cast<char>((x >> 24) & 0xff)};
    os.write(b, 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& os, double d) {
    std::uint64_t x = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(x);
}

}  // namespace ckpt

struct Checkpoint {
    std::map<std::string, Tensor> tensors;
    std::string config_echo;
};

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                            const std::string& config_echo) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(ckpt::kMagic, 8);
    ckpt::write_u32(os, ckpt::kVersion);
    ckpt::write_u32(os, static_cast<std::uint32_t>(config_echo.size()));
    os.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
    ckpt::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        ckpt::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        ckpt::write_u32(os, static_cast<std::uint32_t>(t->rows));
        ckpt::write_u32(os, static_cast<std::uint32_t>(t->cols));
        for (double d : t->v) ckpt::write_f64(os, d);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(ckpt::kMagic, 8))
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = ckpt::read_u32(is);
    if (version != ckpt::kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    Checkpoint out;
    std::uint32_t echo_len = ckpt::read_u32(is);
    out.config_echo.resize(echo_len);
    is.read(out.config_echo.data(), echo_len);
    std::uint32_t n = ckpt::read_u32(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t name_len = ckpt::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t rows = ckpt::read_u32(is);
        std::uint32_t cols = ckpt::read_u32(is);
        Tensor t(static_cast<int>(rows), static_cast<int>(cols));
        for (double& d : t.v) d = ckpt::read_f64(is);
        out.tensors.emplace(std::move(name), std::move(t));
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return out;
}

inline void save_policy(const std::string& path, const PolicyNet& net,
                        const std::string& config_echo,
                        const std::vector<std::pair<std::string, const Tensor*>>& extra = {}) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (int i = 0; i < net.store().count(); ++i)
        tensors.emplace_back(net.store()[i].name, &net.store()[i].value);
    for (const auto& e : extra) tensors.push_back(e);
    save_checkpoint(path, tensors, config_echo);
}

inline void load_policy(PolicyNet& net, const Checkpoint& c) {
    for (int i = 0; i < net.store().count(); ++i) {
        auto& e = net.store()[i];
        auto it = c.tensors.find(e.name);
        if (it == c.tensors.end())
            throw std::runtime_error("checkpoint missing tensor: " + e.name);
        if (it->second.rows != e.value.rows || it->second.cols != e.value.cols)
            throw std::runtime_error("checkpoint shape mismatch for " + e.name);
        e.value = it->second;
    }
}

}  // namespace crowdnav
