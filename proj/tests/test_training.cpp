#include "doctest.h"

#include <filesystem>

#include "crowdnav/ppo.hpp"
#include "crowdnav/rollout.hpp"
#include "crowdnav/trainer.hpp"

using namespace crowdnav;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.episode.n_humans = 3;
    cfg.episode.time_limit = 10.0;
    cfg.net.d_model = 16;
    cfg.net.heads = 2;
    cfg.net.d_hidden = 16;
    cfg.net.bnn_hidden = 8;
    cfg.net.head_hidden = 8;
    cfg.ppo.n_envs = 2;
    cfg.ppo.t_rollout = 8;
    cfg.ppo.minibatch = 8;
    cfg.ppo.epochs = 2;
    cfg.seed = 99;
    return cfg;
}

RolloutBuffer synthetic_buffer(const std::vector<double>& rewards,
                               const std::vector<double>& values,
                               const std::vector<bool>& dones, double bootstrap) {
    RolloutBuffer b;
    b.n_envs = 1;
    b.t_rollout = static_cast<int>(rewards.size());
    b.steps.resize(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        b.steps[i].reward = rewards[i];
        b.steps[i].value = values[i];
        b.steps[i].done = dones[i];
    }
    b.bootstrap_value = {bootstrap};
    return b;
}

// Nested-loop oracle: A_t = sum_{l>=0} (gamma*lam)^l * delta_{t+l}, truncated
// at the first done or the buffer end.
std::vector<double> oracle_gae(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<bool>& d, double bootstrap, double gamma,
                               double lam) {
    int T = static_cast<int>(r.size());
    std::vector<double> adv(T, 0.0);
    for (int t = 0; t < T; ++t) {
        double acc = 0.0, w = 1.0;
        for (int l = t; l < T; ++l) {
            double next_v = (l == T - 1) ? bootstrap : v[l + 1];
            double delta = r[l] + gamma * next_v * (d[l] ? 0.0 : 1.0) - v[l];
            acc += w * delta;
            if (d[l]) break;
            w *= gamma * lam;
        }
        adv[t] = acc;
    }
    return adv;
}

}  // namespace

TEST_CASE("gae closed forms") {
    std::vector<double> r = {1.0, -0.5, 2.0, 0.3, -1.0};
    std::vector<double> v = {0.2, 0.4, -0.1, 0.9, 0.5};
    std::vector<bool> d = {false, false, true, false, false};

    SUBCASE("gamma = 0 reduces to one-step residuals") {
        RolloutBuffer b = synthetic_buffer(r, v, d, 0.7);
        compute_gae(b, 0.0, 0.95);
        for (int t = 0; t < 5; ++t)
            CHECK(b.advantages[t] == doctest::Approx(r[t] - v[t]).epsilon(1e-12));
    }
    SUBCASE("lambda = 1 on a single episode gives discounted-return residuals") {
        std::vector<bool> nod(5, false);
        RolloutBuffer b = synthetic_buffer(r, v, nod, 0.7);
        double gamma = 0.9;
        compute_gae(b, gamma, 1.0);
        for (int t = 0; t < 5; ++t) {
            double ret = 0.0, w = 1.0;
            for (int l = t; l < 5; ++l) {
                ret += w * r[l];
                w *= gamma;
            }
            ret += w * 0.7;
            CHECK(b.advantages[t] == doctest::Approx(ret - v[t]).epsilon(1e-12));
            CHECK(b.returns[t] == doctest::Approx(ret).epsilon(1e-12));
        }
    }
    SUBCASE("lambda = 0 equals one-step TD residuals") {
        RolloutBuffer b = synthetic_buffer(r, v, d, 0.7);
        double gamma = 0.97;
        compute_gae(b, gamma, 0.0);
        for (int t = 0; t < 5; ++t) {
            double next_v = (t == 4) ? 0.7 : v[t + 1];
            double td = r[t] + gamma * next_v * (d[t] ? 0.0 : 1.0) - v[t];
            CHECK(b.advantages[t] == doctest::Approx(td).epsilon(1e-12));
        }
    }
}

TEST_CASE("gae matches the nested-loop oracle on random buffers") {
    Rng rng(606);
    for (int trial = 0; trial < 50; ++trial) {
        int T = 5;
        std::vector<double> r(T), v(T);
        std::vector<bool> d(T);
        for (int t = 0; t < T; ++t) {
            r[t] = rng.uniform(-2, 2);
            v[t] = rng.uniform(-2, 2);
            d[t] = rng.uniform() < 0.3;
        }
        double bootstrap = rng.uniform(-2, 2);
        double gamma = rng.uniform(0.5, 1.0);
        double lam = rng.uniform(0.0, 1.0);

        RolloutBuffer b = synthetic_buffer(r, v, d, bootstrap);
        compute_gae(b, gamma, lam);
        std::vector<double> expect = oracle_gae(r, v, d, bootstrap, gamma, lam);
        for (int t = 0; t < T; ++t)
            CHECK(std::abs(b.advantages[t] - expect[t]) < 1e-8);
    }
}

TEST_CASE("rollout collection is deterministic and recompute gives ratio 1") {
    RunConfig cfg = tiny_config();
    PolicyNet net(cfg.dims());
    net.init_weights(cfg.seed);

    auto collect = [&]() {
        std::vector<EnvSlot> slots;
        for (int e = 0; e < cfg.ppo.n_envs; ++e) slots.emplace_back(cfg, e);
        return collect_rollouts(slots, net, PolicyVariant::Full, cfg.n_samples_train,
                                cfg.ppo.t_rollout, 1);
    };
    RolloutBuffer a = collect();
    RolloutBuffer b = collect();
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.steps[i].action == b.steps[i].action);
        CHECK(a.steps[i].log_prob == b.steps[i].log_prob);
        CHECK(a.steps[i].value == b.steps[i].value);
        CHECK(a.steps[i].reward == b.steps[i].reward);
    }

    // multi-threaded collection must agree bit-for-bit with single-threaded
    {
        std::vector<EnvSlot> slots;
        for (int e = 0; e < cfg.ppo.n_envs; ++e) slots.emplace_back(cfg, e);
        RolloutBuffer c = collect_rollouts(slots, net, PolicyVariant::Full,
                                           cfg.n_samples_train, cfg.ppo.t_rollout, 4);
        for (int i = 0; i < a.size(); ++i) {
            CHECK(a.steps[i].action == c.steps[i].action);
            CHECK(a.steps[i].value == c.steps[i].value);
        }
    }

    // recompute at unchanged parameters: the forward pass is bit-identical, so
    // the PPO ratio is 1 up to log-prob summation order (~1 ulp)
    compute_gae(a, cfg.ppo.gamma, cfg.ppo.lam);
    Adam adam(net.store(), 0.0);
    Rng shuffle(1);
    PpoConfig one_epoch = cfg.ppo;
    one_epoch.epochs = 1;
    PpoStats stats = ppo_update(net, adam, a, one_epoch, cfg.n_samples_train,
                                PolicyVariant::Full, shuffle, cfg.episode.robot_v_max);
    CHECK(std::abs(stats.approx_kl) < 1e-13);
    CHECK(stats.clip_fraction == 0.0);
}

TEST_CASE("ppo with lr = 0 leaves parameters bit-identical") {
    RunConfig cfg = tiny_config();
    cfg.ppo.lr = 0.0;
    PolicyNet net(cfg.dims());
    net.init_weights(7);
    std::vector<double> before;
    for (int i = 0; i < net.store().count(); ++i)
        for (double x : net.store()[i].value.v) before.push_back(x);

    std::vector<EnvSlot> slots;
    for (int e = 0; e < cfg.ppo.n_envs; ++e) slots.emplace_back(cfg, e);
    RolloutBuffer buf = collect_rollouts(slots, net, PolicyVariant::Full,
                                         cfg.n_samples_train, cfg.ppo.t_rollout, 1);
    compute_gae(buf, cfg.ppo.gamma, cfg.ppo.lam);
    Adam adam(net.store(), cfg.ppo.lr);
    Rng shuffle(1);
    ppo_update(net, adam, buf, cfg.ppo, cfg.n_samples_train, PolicyVariant::Full, shuffle,
               cfg.episode.robot_v_max);

    std::size_t idx = 0;
    bool same = true;
    for (int i = 0; i < net.store().count(); ++i)
        for (double x : net.store()[i].value.v) same = same && (x == before[idx++]);
    CHECK(same);
}

TEST_CASE("clipped-out samples contribute zero policy gradient") {
    RunConfig cfg = tiny_config();
    cfg.ppo.epochs = 1;
    cfg.ppo.minibatch = 2;
    cfg.ppo.ent_coef = 0.0;
    cfg.ppo.vf_coef = 0.0;
    cfg.ppo.kl_coef = 0.0;
    PolicyNet net(cfg.dims());
    net.init_weights(11);

    std::vector<EnvSlot> slots;
    slots.emplace_back(cfg, 0);
    RolloutBuffer buf = collect_rollouts(slots, net, PolicyVariant::Full,
                                         cfg.n_samples_train, 2, 1);

    std::vector<double> before;
    for (int i = 0; i < net.store().count(); ++i)
        for (double x : net.store()[i].value.v) before.push_back(x);

    // Advantage normalization always produces both signs, so pin both samples
    // into their clipped branch: ratio >> 1+eps with A > 0 and ratio << 1-eps
    // with A < 0 each select the constant clipped surrogate.
    RolloutBuffer two;
    two.n_envs = 1;
    two.t_rollout = 2;
    two.steps = {buf.steps[0], buf.steps[1]};
    two.steps[0].log_prob -= 1.0;  // ratio = e    > 1 + clip, adv -> +1
    two.steps[1].log_prob += 1.0;  // ratio = 1/e  < 1 - clip, adv -> -1
    two.bootstrap_value = {0.0};
    two.advantages = {1.0, -1.0};
    two.returns = {two.steps[0].value, two.steps[1].value};

    Adam adam(net.store(), 0.01);
    Rng shuffle(1);
    ppo_update(net, adam, two, cfg.ppo, cfg.n_samples_train, PolicyVariant::Full, shuffle,
               cfg.episode.robot_v_max);

    std::size_t idx = 0;
    bool same = true;
    for (int i = 0; i < net.store().count(); ++i)
        for (double x : net.store()[i].value.v) same = same && (x == before[idx++]);
    CHECK(same);
}

TEST_CASE("one update on a bandit-like task moves the policy towards reward") {
    // 1-step episodes, reward = action.x: after one PPO update the pre-squash
    // mean for x must increase.
    RunConfig cfg = tiny_config();
    cfg.ppo.epochs = 4;
    cfg.ppo.minibatch = 64;
    PolicyNet net(cfg.dims());
    net.init_weights(123);

    PolicyDims dims = cfg.dims();
    PolicyInput fixed;
    fixed.humans = Tensor(dims.n_max, human_row_width(dims.K));
    fixed.mask.assign(dims.n_max, 0);
    fixed.beliefs = Tensor(dims.n_max, belief_row_width(dims.K));
    fixed.belief_mask.assign(dims.n_max, 0);
    fixed.robot = Tensor(1, kRobotFeatureWidth);
    fixed.robot.v = {0, 1.0, 0.9, 0, 0, 1.0, 0.5, 0.3};

    auto mean_x = [&]() {
        Graph g;
        Tensor h(1, dims.d_hidden);
        PolicyForward f = net.forward(g, fixed, h, 7, 1, PolicyVariant::Full);
        return g.val(f.mean).at(0, 0);
    };
    double before = mean_x();

    RolloutBuffer buf;
    buf.n_envs = 1;
    buf.t_rollout = 256;
    buf.steps.resize(buf.t_rollout);
    buf.bootstrap_value = {0.0};
    Rng rng(5);
    Graph g;
    for (int t = 0; t < buf.t_rollout; ++t) {
        RolloutStep& s = buf.steps[t];
        s.input = fixed;
        s.h_prev = Tensor(1, dims.d_hidden);
        s.bnn_seed = t;
        g.reset();
        PolicyForward f = net.forward(g, s.input, s.h_prev, s.bnn_seed, 1,
                                      PolicyVariant::Full);
        Vec2 mean{g.val(f.mean).at(0, 0), g.val(f.mean).at(0, 1)};
        Vec2 log_std{g.val(f.log_std).at(0, 0), g.val(f.log_std).at(0, 1)};
        ActionSample a = sample_action(mean, log_std, 1.0, rng);
        s.action = a.action;
        s.z = a.z;
        s.log_prob = a.log_prob;
        s.value = g.scalar(f.value);
        s.reward = a.action.x;
        s.done = true;
    }
    compute_gae(buf, cfg.ppo.gamma, cfg.ppo.lam);
    Adam adam(net.store(), 3e-3);
    Rng shuffle(3);
    ppo_update(net, adam, buf, cfg.ppo, 1, PolicyVariant::Full, shuffle, 1.0);

    CHECK(mean_x() > before);
}

TEST_CASE("train_loop: zero steps emits the initial checkpoint; resume continues") {
    namespace fs = std::filesystem;
    RunConfig cfg = tiny_config();
    cfg.episode.n_humans = 0;
    cfg.train.checkpoint_every = 1000000;
    std::string dir = "/tmp/crowdnav_trainloop_test";
    fs::remove_all(dir);

    SUBCASE("total_steps = 0") {
        cfg.train.total_steps = 0;
        TrainResult r = train_loop(cfg, PolicyVariant::Full, dir, "", true);
        CHECK(r.steps == 0);
        CHECK(fs::exists(dir + "/ckpt_latest.bin"));
        Checkpoint c = load_checkpoint(dir + "/ckpt_latest.bin");
        KvConfig echo = KvConfig::from_string(c.config_echo);
        CHECK(echo.get_int("run.steps_done", -1) == 0);
        CHECK(echo.get_str("run.variant", "") == "bnbrl+");
    }
    SUBCASE("resume continues the step count without discontinuity") {
        cfg.train.total_steps = 2 * cfg.ppo.n_envs * cfg.ppo.t_rollout;
        train_loop(cfg, PolicyVariant::Full, dir, "", true);
        RunConfig cfg2 = cfg;
        cfg2.train.total_steps = 3 * cfg.ppo.n_envs * cfg.ppo.t_rollout;
        TrainResult r = train_loop(cfg2, PolicyVariant::Full, dir,
                                   dir + "/ckpt_latest.bin", true);
        CHECK(r.steps == cfg2.train.total_steps);

        std::ifstream is(dir + "/curves.csv");
        std::string line;
        std::getline(is, line);
        CHECK(line.substr(0, 5) == "step,");
        long long prev = -1;
        int rows = 0;
        while (std::getline(is, line)) {
            long long step = std::stoll(line.substr(0, line.find(',')));
            CHECK(step > prev);
            prev = step;
            ++rows;
        }
        CHECK(rows == 3);
    }
    fs::remove_all(dir);
}

TEST_CASE("fixed master seed reproduces identical training curves") {
    namespace fs = std::filesystem;
    RunConfig cfg = tiny_config();
    cfg.episode.n_humans = 2;
    cfg.train.total_steps = 2 * cfg.ppo.n_envs * cfg.ppo.t_rollout;
    cfg.train.checkpoint_every = 1000000;

    auto run = [&](const std::string& dir) {
        fs::remove_all(dir);
        train_loop(cfg, PolicyVariant::Full, dir, "", true);
        std::ifstream is(dir + "/curves.csv");
        std::stringstream ss;
        ss << is.rdbuf();
        fs::remove_all(dir);
        return ss.str();
    };
    std::string a = run("/tmp/crowdnav_det_a");
    std::string b = run("/tmp/crowdnav_det_b");
    CHECK(a == b);
    CHECK(a.find('\n') != std::string::npos);
}
