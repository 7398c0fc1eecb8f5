#pragma once

#include <memory>
#include <string>

#include "crowdnav/env.hpp"
#include "crowdnav/orca.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/settings.hpp"

namespace crowdnav {

/// A navigation policy consumes observations only (POMDP discipline); it never
/// sees the WorldState.
class NavigationPolicy {
public:
    virtual ~NavigationPolicy() = default;
    virtual void reset(std::uint64_t episode_seed) = 0;
    virtual Vec2 act(const ObservationFrame& frame, const PolicyInput& input) = 0;
    virtual const std::string& name() const = 0;
};

/// Reactive baseline: run the same ORCA solver the humans use against the
/// currently visible humans. Neighbor velocities are estimated from the
/// observation history (two-point differences); radii are unobservable, so the
/// worst-case human radius is assumed.
class OrcaBaselinePolicy final : public NavigationPolicy {
public:
    explicit OrcaBaselinePolicy(const RunConfig& cfg)
        : name_("orca"),
          dt_(cfg.episode.dt),
          tau_(cfg.episode.orca_tau),
          cutoff_(cfg.episode.orca_neighbor_cutoff),
          assumed_radius_(cfg.episode.human_radius_max),
          history_(cfg.episode.n_humans, cfg.history_length),
          history_template_(cfg.episode.n_humans, cfg.history_length),
          predictor_(cfg.horizon) {}

    void reset(std::uint64_t) override { history_ = history_template_; }

    Vec2 act(const ObservationFrame& frame, const PolicyInput&) override {
        history_.push_frame(frame);
        const RobotState& r = frame.w;
        std::vector<OrcaAgentView> neighbors;
        neighbors.reserve(frame.visible_humans.size());
        for (const auto& [id, rel] : frame.visible_humans) {
            Vec2 pos = r.position + rel;
            if ((pos - r.position).norm() > cutoff_) continue;
            PredictionRow row = predictor_.predict_row(history_.row(id), dt_);
            Vec2 vel = row.valid ? row.velocity : Vec2{0.0, 0.0};
            neighbors.push_back({pos, vel, assumed_radius_});
        }
        Vec2 pref = orca_preferred_velocity(r.position, r.goal, r.v_max, dt_);
        OrcaAgentView self{r.position, r.velocity, r.radius};
        return orca_velocity(self, pref, r.v_max, neighbors, dt_, tau_);
    }

    const std::string& name() const override { return name_; }

private:
    std::string name_;
    double dt_, tau_, cutoff_, assumed_radius_;
    TrackHistory history_;
    TrackHistory history_template_;
    ConstantVelocityPredictor predictor_;
};

/// Learned policy wrapper: deterministic evaluation (squashed mean action),
/// per-episode recurrent state, seeded per-step BNN sampling.
class NetworkPolicy final : public NavigationPolicy {
public:
    NetworkPolicy(std::string name, const PolicyDims& dims, PolicyVariant variant,
                  int n_samples, double v_max, std::uint64_t eval_seed)
        : name_(std::move(name)),
          net_(dims),
          variant_(variant),
          n_samples_(n_samples),
          v_max_(v_max),
          eval_seed_(eval_seed),
          hidden_(net_.initial_hidden()) {}

    PolicyNet& net() { return net_; }

    void reset(std::uint64_t episode_seed) override {
        hidden_ = net_.initial_hidden();
        episode_seed_ = episode_seed;
        step_ = 0;
    }

    Vec2 act(const ObservationFrame&, const PolicyInput& input) override {
        graph_.reset();
        std::uint64_t seed = mix_seed(eval_seed_, episode_seed_, step_++);
        PolicyForward f = net_.forward(graph_, input, hidden_, seed, n_samples_, variant_);
        hidden_ = graph_.val(f.h_next);
        Vec2 mean{graph_.val(f.mean).at(0, 0), graph_.val(f.mean).at(0, 1)};
        return mean_action(mean, v_max_);
    }

    const std::string& name() const override { return name_; }

private:
    std::string name_;
    PolicyNet net_;
    PolicyVariant variant_;
    int n_samples_;
    double v_max_;
    std::uint64_t eval_seed_;
    std::uint64_t episode_seed_ = 0;
    std::uint64_t step_ = 0;
    Tensor hidden_;
    Graph graph_;
};

/// Policy identifier grammar:
///   orca                      reactive baseline
///   untrained                 freshly initialized full network
///   bnbrl+ | bnbrl | bndnn | rnn          fresh network, that wiring
///   <variant>:<ckpt path>     checkpoint re-wired as the given variant
///   <ckpt path>               checkpoint, variant taken from its echo
struct PolicySpec {
    std::string id;
    std::string display_name;
    bool is_orca = false;
    PolicyVariant variant = PolicyVariant::Full;
    std::string checkpoint_path;  // empty = fresh weights

    static PolicySpec parse(const std::string& id) {
        PolicySpec s;
        s.id = id;
        if (id == "orca") {
            s.is_orca = true;
            s.display_name = "orca";
            return s;
        }
        if (id == "untrained") {
            s.variant = PolicyVariant::Full;
            s.display_name = "untrained";
            return s;
        }
        auto colon = id.find(':');
        std::string head = colon == std::string::npos ? id : id.substr(0, colon);
        std::string tail = colon == std::string::npos ? "" : id.substr(colon + 1);
        bool head_is_variant =
            head == "bnbrl+" || head == "bnbrl" || head == "bndnn" || head == "rnn";
        if (head_is_variant) {
            s.variant = variant_from_name(head);
            s.checkpoint_path = tail;
            s.display_name = head;
            return s;
        }
        if (colon != std::string::npos)
            throw std::runtime_error("unknown policy id: " + id);
        // bare checkpoint path: variant from the checkpoint echo
        s.checkpoint_path = head;
        s.display_name = head;
        s.variant_from_echo = true;
        return s;
    }

    bool variant_from_echo = false;
};

inline std::unique_ptr<NavigationPolicy> make_policy(const PolicySpec& spec,
                                                     const RunConfig& cfg) {
    if (spec.is_orca) return std::make_unique<OrcaBaselinePolicy>(cfg);

    PolicyVariant variant = spec.variant;
    std::string display = spec.display_name;
    Checkpoint ckpt;
    bool have_ckpt = !spec.checkpoint_path.empty();
    if (have_ckpt) {
        ckpt = load_checkpoint(spec.checkpoint_path);
        if (spec.variant_from_echo) {
            KvConfig echo = KvConfig::from_string(ckpt.config_echo);
            variant = variant_from_name(echo.get_str("run.variant", "bnbrl+"));
            display = std::string(variant_name(variant)) + ":" + spec.checkpoint_path;
        }
    }

    PolicyDims dims = cfg.dims();
    if (have_ckpt) {
        // network shape must match the checkpoint; take dims from its echo
        KvConfig echo = KvConfig::from_string(ckpt.config_echo);
        dims.d_model = static_cast<int>(echo.get_int("net.d_model", dims.d_model));
        dims.heads = static_cast<int>(echo.get_int("net.heads", dims.heads));
        dims.d_hidden = static_cast<int>(echo.get_int("net.gru_hidden", dims.d_hidden));
        dims.bnn_hidden = static_cast<int>(echo.get_int("net.bnn_hidden", dims.bnn_hidden));
        dims.head_hidden = static_cast<int>(echo.get_int("net.head_hidden", dims.head_hidden));
        dims.sigma_prior = echo.get_double("net.sigma_prior", dims.sigma_prior);
        dims.K = static_cast<int>(echo.get_int("predictor.horizon", dims.K));
    }

    auto policy = std::make_unique<NetworkPolicy>(display, dims, variant, cfg.n_samples_eval,
                                                  cfg.episode.robot_v_max,
                                                  Rng::derive(cfg.seed, 0xe7a1).next());
    if (have_ckpt)
        load_policy(policy->net(), ckpt);
    else
        policy->net().init_weights(cfg.seed);
    return policy;
}

}  // namespace crowdnav
