#include "doctest.h"

#include <cstdio>

#include "crowdnav/policy.hpp"
#include "gradcheck.hpp"

using namespace crowdnav;
using gradcheck::random_tensor;

namespace {

// ---- dense oracles, written independently with plain loops ----

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0;
            for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

Tensor oracle_mha(const Tensor& x, const std::vector<std::uint8_t>& mask,
                  const std::vector<std::array<Tensor, 3>>& heads, const Tensor& wo) {
    int n = x.rows;
    int dk = heads[0][0].cols;
    Tensor concat(n, dk * static_cast<int>(heads.size()));
    for (std::size_t h = 0; h < heads.size(); ++h) {
        Tensor q = naive_matmul(x, heads[h][0]);
        Tensor k = naive_matmul(x, heads[h][1]);
        Tensor v = naive_matmul(x, heads[h][2]);
        for (int i = 0; i < n; ++i) {
            std::vector<double> w(n, 0.0);
            double mx = -1e300;
            for (int j = 0; j < n; ++j) {
                if (!mask[j]) continue;
                double s = 0;
                for (int d = 0; d < dk; ++d) s += q.at(i, d) * k.at(j, d);
                w[j] = s / std::sqrt(static_cast<double>(dk));
                mx = std::max(mx, w[j]);
            }
            double z = 0;
            for (int j = 0; j < n; ++j)
                if (mask[j]) z += (w[j] = std::exp(w[j] - mx));
            for (int d = 0; d < dk; ++d) {
                double s = 0;
                for (int j = 0; j < n; ++j)
                    if (mask[j]) s += w[j] / z * v.at(j, d);
                concat.at(i, static_cast<int>(h) * dk + d) = s;
            }
        }
    }
    Tensor out = naive_matmul(concat, wo);
    for (int i = 0; i < n; ++i)
        if (!mask[i])
            for (int j = 0; j < out.cols; ++j) out.at(i, j) = 0.0;
    return out;
}

Tensor oracle_cross_pooled(const Tensor& rows, const std::vector<std::uint8_t>& mask,
                           const Tensor& wv) {
    // single robot key => softmax weight 1 per row => pooled (rows * Wv)
    Tensor v = naive_matmul(rows, wv);
    Tensor out(1, v.cols);
    int count = 0;
    for (int i = 0; i < v.rows; ++i) {
        if (!mask[i]) continue;
        ++count;
        for (int j = 0; j < v.cols; ++j) out.at(0, j) += v.at(i, j);
    }
    if (count > 0)
        for (int j = 0; j < v.cols; ++j) out.at(0, j) /= count;
    return out;
}

Tensor oracle_gru(const Tensor& x, const Tensor& h, const Tensor& wz, const Tensor& uz,
                  const Tensor& bz, const Tensor& wr, const Tensor& ur, const Tensor& br,
                  const Tensor& wh, const Tensor& uh, const Tensor& bh) {
    int dh = h.cols;
    std::vector<double> r(dh), z(dh);
    for (int j = 0; j < dh; ++j) {
        double zj = bz.at(0, j), rj = br.at(0, j);
        for (int k = 0; k < x.cols; ++k) {
            zj += x.at(0, k) * wz.at(k, j);
            rj += x.at(0, k) * wr.at(k, j);
        }
        for (int k = 0; k < dh; ++k) {
            zj += h.at(0, k) * uz.at(k, j);
            rj += h.at(0, k) * ur.at(k, j);
        }
        z[j] = 1.0 / (1.0 + std::exp(-zj));
        r[j] = 1.0 / (1.0 + std::exp(-rj));
    }
    Tensor out(1, dh);
    for (int j = 0; j < dh; ++j) {
        double cj = bh.at(0, j);
        for (int k = 0; k < x.cols; ++k) cj += x.at(0, k) * wh.at(k, j);
        for (int k = 0; k < dh; ++k) cj += r[k] * h.at(0, k) * uh.at(k, j);
        cj = std::tanh(cj);
        out.at(0, j) = (1.0 - z[j]) * h.at(0, j) + z[j] * cj;
    }
    return out;
}

PolicyInput random_input(const PolicyDims& dims, Rng& rng, int n_visible, int n_beliefs) {
    PolicyInput in;
    in.humans = Tensor(dims.n_max, human_row_width(dims.K));
    in.mask.assign(dims.n_max, 0);
    in.beliefs = Tensor(dims.n_max, belief_row_width(dims.K));
    in.belief_mask.assign(dims.n_max, 0);
    in.robot = random_tensor(1, kRobotFeatureWidth, rng, 2.0);
    for (int i = 0; i < n_visible && i < dims.n_max; ++i) {
        in.mask[i] = 1;
        for (int j = 0; j < in.humans.cols; ++j) in.humans.at(i, j) = rng.uniform(-3, 3);
    }
    for (int i = 0; i < n_beliefs && i < dims.n_max; ++i) {
        in.belief_mask[i] = 1;
        for (int j = 0; j < in.beliefs.cols; ++j) in.beliefs.at(i, j) = rng.uniform(-3, 3);
    }
    return in;
}

PolicyDims small_dims() {
    PolicyDims d;
    d.n_max = 5;
    d.K = 3;
    d.d_model = 16;
    d.heads = 2;
    d.d_hidden = 12;
    d.bnn_hidden = 8;
    d.head_hidden = 8;
    return d;
}

}  // namespace

TEST_CASE("mha_self: identity configuration returns the token") {
    // H = 1, Wq = Wk = 0, Wv = I, Wo = I, one unmasked token
    ParamStore store;
    int wq = store.add("wq", 4, 4, InitKind::Zero);
    int wk = store.add("wk", 4, 4, InitKind::Zero);
    int wv = store.add("wv", 4, 4, InitKind::Zero);
    int wo = store.add("wo", 4, 4, InitKind::Zero);
    store.init_weights(1);
    for (int i = 0; i < 4; ++i) {
        store[wv].value.at(i, i) = 1.0;
        store[wo].value.at(i, i) = 1.0;
    }

    Graph g;
    Rng rng(8);
    Tensor x = random_tensor(3, 4, rng);
    std::vector<std::uint8_t> mask = {0, 1, 0};
    MhaIds ids;
    ids.heads.push_back({g.param(&store[wq].value, &store[wq].grad),
                         g.param(&store[wk].value, &store[wk].grad),
                         g.param(&store[wv].value, &store[wv].grad)});
    ids.wo = g.param(&store[wo].value, &store[wo].grad);
    Graph::Id out = mha_self(g, g.input(x), mask, ids, 4);
    for (int j = 0; j < 4; ++j) {
        CHECK(g.val(out).at(1, j) == doctest::Approx(x.at(1, j)));
        CHECK(g.val(out).at(0, j) == 0.0);
        CHECK(g.val(out).at(2, j) == 0.0);
    }
}

TEST_CASE("mha_self matches the dense oracle on random instances") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 4, dm = 8, H = 2, dk = 4;
        ParamStore store;
        std::vector<std::array<int, 3>> idx;
        for (int h = 0; h < H; ++h)
            idx.push_back({store.add("q", dm, dk, InitKind::Xavier),
                           store.add("k", dm, dk, InitKind::Xavier),
                           store.add("v", dm, dk, InitKind::Xavier)});
        int wo = store.add("wo", H * dk, dm, InitKind::Xavier);
        store.init_weights(rng.next());

        Tensor x = random_tensor(n, dm, rng, 2.0);
        std::vector<std::uint8_t> mask = {1, 1, 0, 1};

        Graph g;
        MhaIds ids;
        std::vector<std::array<Tensor, 3>> oracle_heads;
        for (auto& hidx : idx) {
            ids.heads.push_back({g.param(&store[hidx[0]].value, &store[hidx[0]].grad),
                                 g.param(&store[hidx[1]].value, &store[hidx[1]].grad),
                                 g.param(&store[hidx[2]].value, &store[hidx[2]].grad)});
            oracle_heads.push_back({store[hidx[0]].value, store[hidx[1]].value,
                                    store[hidx[2]].value});
        }
        ids.wo = g.param(&store[wo].value, &store[wo].grad);
        Graph::Id out = mha_self(g, g.input(x), mask, ids, dk);
        Tensor expect = oracle_mha(x, mask, oracle_heads, store[wo].value);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dm; ++j)
                CHECK(g.val(out).at(i, j) == doctest::Approx(expect.at(i, j)).epsilon(1e-6));
    }
}

TEST_CASE("mha_self: perturbing a masked token never changes unmasked outputs") {
    Rng rng(77);
    const int n = 5, dm = 8, dk = 4;
    ParamStore store;
    std::array<int, 3> hidx = {store.add("q", dm, dk, InitKind::Xavier),
                               store.add("k", dm, dk, InitKind::Xavier),
                               store.add("v", dm, dk, InitKind::Xavier)};
    int wo = store.add("wo", dk, dm, InitKind::Xavier);
    store.init_weights(4);

    Tensor x = random_tensor(n, dm, rng, 2.0);
    std::vector<std::uint8_t> mask = {1, 0, 1, 0, 1};

    auto run = [&](const Tensor& xin) {
        Graph g;
        MhaIds ids;
        ids.heads.push_back({g.param(&store[hidx[0]].value, &store[hidx[0]].grad),
                             g.param(&store[hidx[1]].value, &store[hidx[1]].grad),
                             g.param(&store[hidx[2]].value, &store[hidx[2]].grad)});
        ids.wo = g.param(&store[wo].value, &store[wo].grad);
        Graph::Id out = mha_self(g, g.input(xin), mask, ids, dk);
        return g.val(out);
    };

    Tensor base = run(x);
    Tensor perturbed_x = x;
    for (int j = 0; j < dm; ++j) {
        perturbed_x.at(1, j) += rng.uniform(-5, 5);
        perturbed_x.at(3, j) += rng.uniform(-5, 5);
    }
    Tensor after = run(perturbed_x);
    for (int i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        for (int j = 0; j < dm; ++j)
            CHECK(std::abs(after.at(i, j) - base.at(i, j)) < 1e-9);
    }
}

TEST_CASE("mha_self permutation equivariance") {
    Rng rng(55);
    const int n = 4, dm = 8, dk = 4;
    ParamStore store;
    std::array<int, 3> hidx = {store.add("q", dm, dk, InitKind::Xavier),
                               store.add("k", dm, dk, InitKind::Xavier),
                               store.add("v", dm, dk, InitKind::Xavier)};
    int wo = store.add("wo", dk, dm, InitKind::Xavier);
    store.init_weights(12);

    Tensor x = random_tensor(n, dm, rng, 2.0);
    std::vector<std::uint8_t> mask = {1, 1, 0, 1};
    std::vector<int> perm = {2, 0, 3, 1};

    Tensor xp(n, dm);
    std::vector<std::uint8_t> maskp(n);
    for (int i = 0; i < n; ++i) {
        maskp[i] = mask[perm[i]];
        for (int j = 0; j < dm; ++j) xp.at(i, j) = x.at(perm[i], j);
    }

    auto run = [&](const Tensor& xin, const std::vector<std::uint8_t>& m) {
        Graph g;
        MhaIds ids;
        ids.heads.push_back({g.param(&store[hidx[0]].value, &store[hidx[0]].grad),
                             g.param(&store[hidx[1]].value, &store[hidx[1]].grad),
                             g.param(&store[hidx[2]].value, &store[hidx[2]].grad)});
        ids.wo = g.param(&store[wo].value, &store[wo].grad);
        Graph::Id out = mha_self(g, g.input(xin), m, ids, dk);
        return g.val(out);
    };
    Tensor a = run(x, mask);
    Tensor b = run(xp, maskp);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dm; ++j)
            CHECK(std::abs(b.at(i, j) - a.at(perm[i], j)) < 1e-9);
}

TEST_CASE("cross attention: single-key identity and zero-human case") {
    Rng rng(21);
    const int n = 4, dm = 8;
    ParamStore store;
    int wq = store.add("wq", dm, dm, InitKind::Xavier);
    int wk = store.add("wk", dm, dm, InitKind::Xavier);
    int wv = store.add("wv", dm, dm, InitKind::Xavier);
    store.init_weights(3);

    Tensor rows = random_tensor(n, dm, rng, 2.0);
    Tensor robot = random_tensor(1, dm, rng, 2.0);
    std::vector<std::uint8_t> mask = {1, 0, 1, 1};

    Graph g;
    CrossIds ids{g.param(&store[wq].value, &store[wq].grad),
                 g.param(&store[wk].value, &store[wk].grad),
                 g.param(&store[wv].value, &store[wv].grad)};
    Graph::Id out = cross_attention_pooled(g, g.input(rows), mask, g.input(robot), ids, dm);
    Tensor expect = oracle_cross_pooled(rows, mask, store[wv].value);
    for (int j = 0; j < dm; ++j)
        CHECK(g.val(out).at(0, j) == doctest::Approx(expect.at(0, j)).epsilon(1e-6));

    std::vector<std::uint8_t> empty_mask(n, 0);
    Graph g2;
    CrossIds ids2{g2.param(&store[wq].value, &store[wq].grad),
                  g2.param(&store[wk].value, &store[wk].grad),
                  g2.param(&store[wv].value, &store[wv].grad)};
    Graph::Id zero = cross_attention_pooled(g2, g2.input(rows), empty_mask,
                                            g2.input(robot), ids2, dm);
    for (int j = 0; j < dm; ++j) CHECK(g2.val(zero).at(0, j) == 0.0);
}

TEST_CASE("bnn_forward: degenerate posterior equals the deterministic network") {
    const int din = 4, dh = 6, dout = 3;
    ParamStore store;
    int m1 = store.add("m1", din, dh, InitKind::Xavier);
    int r1 = store.add("r1", din, dh, InitKind::RhoInit);
    int mb1 = store.add("mb1", 1, dh, InitKind::Xavier);
    int rb1 = store.add("rb1", 1, dh, InitKind::RhoInit);
    int m2 = store.add("m2", dh, dout, InitKind::Xavier);
    int r2 = store.add("r2", dh, dout, InitKind::RhoInit);
    int mb2 = store.add("mb2", 1, dout, InitKind::Xavier);
    int rb2 = store.add("rb2", 1, dout, InitKind::RhoInit);
    store.init_weights(10);
    // rho = -40 -> sigma ~ 4e-18, sampling noise vanishes
    store[r1].value.fill(-40.0);
    store[rb1].value.fill(-40.0);
    store[r2].value.fill(-40.0);
    store[rb2].value.fill(-40.0);

    Rng rng(5);
    Tensor x = random_tensor(2, din, rng, 2.0);

    auto bind = [&](Graph& g, BnnLayerIds& a, BnnLayerIds& b) {
        a = {g.param(&store[m1].value, &store[m1].grad),
             g.param(&store[r1].value, &store[r1].grad),
             g.param(&store[mb1].value, &store[mb1].grad),
             g.param(&store[rb1].value, &store[rb1].grad)};
        b = {g.param(&store[m2].value, &store[m2].grad),
             g.param(&store[r2].value, &store[r2].grad),
             g.param(&store[mb2].value, &store[mb2].grad),
             g.param(&store[rb2].value, &store[rb2].grad)};
    };

    Graph gs;
    BnnLayerIds l1q, l2q;
    bind(gs, l1q, l2q);
    Rng eps1(99);
    BnnForwardIds sampled = bnn_forward(gs, gs.input(x), l1q, l2q, 3, eps1, 0.1, false);

    Graph gd;
    BnnLayerIds l1d, l2d;
    bind(gd, l1d, l2d);
    Rng eps2(1);
    BnnForwardIds det = bnn_forward(gd, gd.input(x), l1d, l2d, 1, eps2, 0.1, true);

    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < dout; ++j)
            CHECK(gs.val(sampled.features).at(i, j) ==
                  doctest::Approx(gd.val(det.features).at(i, j)).epsilon(1e-6));
    CHECK(gd.scalar(det.kl) == 0.0);
}

TEST_CASE("bnn kl: zero at the prior, gradient mu/sigma_p^2") {
    const double sp = 0.1;
    const int din = 3, dh = 4, dout = 2;
    ParamStore store;
    int m1 = store.add("m1", din, dh, InitKind::Zero);
    int r1 = store.add("r1", din, dh, InitKind::Zero);
    int mb1 = store.add("mb1", 1, dh, InitKind::Zero);
    int rb1 = store.add("rb1", 1, dh, InitKind::Zero);
    int m2 = store.add("m2", dh, dout, InitKind::Zero);
    int r2 = store.add("r2", dh, dout, InitKind::Zero);
    int mb2 = store.add("mb2", 1, dout, InitKind::Zero);
    int rb2 = store.add("rb2", 1, dout, InitKind::Zero);
    double rho_star = std::log(std::expm1(sp));  // softplus(rho*) == sp
    for (int idx : {r1, rb1, r2, rb2}) store[idx].value.fill(rho_star);

    auto run_kl = [&](bool backward) {
        store.zero_grads();
        Graph g;
        BnnLayerIds l1{g.param(&store[m1].value, &store[m1].grad),
                       g.param(&store[r1].value, &store[r1].grad),
                       g.param(&store[mb1].value, &store[mb1].grad),
                       g.param(&store[rb1].value, &store[rb1].grad)};
        BnnLayerIds l2{g.param(&store[m2].value, &store[m2].grad),
                       g.param(&store[r2].value, &store[r2].grad),
                       g.param(&store[mb2].value, &store[mb2].grad),
                       g.param(&store[rb2].value, &store[rb2].grad)};
        Rng eps(7);
        Tensor x(1, din);
        BnnForwardIds ids = bnn_forward(g, g.input(x), l1, l2, 1, eps, sp, false);
        if (backward) g.backward(ids.kl);
        return g.scalar(ids.kl);
    };

    CHECK(std::abs(run_kl(false)) < 1e-12);  // q == prior -> KL = 0

    // move mu away from the prior mean, keep sigma at the prior
    Rng rng(13);
    for (double& v : store[m1].value.v) v = rng.uniform(-0.3, 0.3);
    run_kl(true);
    for (int i = 0; i < store[m1].value.size(); ++i)
        CHECK(store[m1].grad.v[i] ==
              doctest::Approx(store[m1].value.v[i] / (sp * sp)).epsilon(1e-9));
}

TEST_CASE("bnn monte-carlo mean approaches the mean-weight output") {
    // linear regime: large positive biases keep every relu active
    const int din = 2, dh = 3, dout = 2;
    ParamStore store;
    int m1 = store.add("m1", din, dh, InitKind::Xavier);
    int r1 = store.add("r1", din, dh, InitKind::Zero);
    int mb1 = store.add("mb1", 1, dh, InitKind::Zero);
    int rb1 = store.add("rb1", 1, dh, InitKind::Zero);
    int m2 = store.add("m2", dh, dout, InitKind::Xavier);
    int r2 = store.add("r2", dh, dout, InitKind::Zero);
    int mb2 = store.add("mb2", 1, dout, InitKind::Zero);
    int rb2 = store.add("rb2", 1, dout, InitKind::Zero);
    store.init_weights(77);
    store[mb1].value.fill(50.0);  // relu always active
    double rho = std::log(std::expm1(0.05));
    for (int idx : {r1, rb1, r2, rb2}) store[idx].value.fill(rho);

    Tensor x(1, din);
    x.v = {0.4, -0.7};

    auto bind = [&](Graph& g, BnnLayerIds& a, BnnLayerIds& b) {
        a = {g.param(&store[m1].value, &store[m1].grad),
             g.param(&store[r1].value, &store[r1].grad),
             g.param(&store[mb1].value, &store[mb1].grad),
             g.param(&store[rb1].value, &store[rb1].grad)};
        b = {g.param(&store[m2].value, &store[m2].grad),
             g.param(&store[r2].value, &store[r2].grad),
             g.param(&store[mb2].value, &store[mb2].grad),
             g.param(&store[rb2].value, &store[rb2].grad)};
    };

    Graph gd;
    BnnLayerIds l1d, l2d;
    bind(gd, l1d, l2d);
    Rng e0(1);
    BnnForwardIds det = bnn_forward(gd, gd.input(x), l1d, l2d, 1, e0, 0.1, true);

    Graph gs;
    BnnLayerIds l1s, l2s;
    bind(gs, l1s, l2s);
    Rng eps(555);
    const int n_samples = 10000;
    BnnForwardIds mc = bnn_forward(gs, gs.input(x), l1s, l2s, n_samples, eps, 0.1, false);

    // per-sample output sd is bounded by sigma * (|x|_1 + hidden scale + 1)
    for (int j = 0; j < dout; ++j) {
        double diff = std::abs(gs.val(mc.features).at(0, j) - gd.val(det.features).at(0, j));
        double per_sample_sd = 0.05 * (std::abs(x.v[0]) + std::abs(x.v[1]) + 52.0);
        CHECK(diff < 3.0 * per_sample_sd / std::sqrt(static_cast<double>(n_samples)));
    }
}

TEST_CASE("bnn_forward is deterministic for a fixed seed") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    net.init_weights(42);
    Rng rng(9);
    PolicyInput in = random_input(dims, rng, 3, 2);
    Tensor h = net.initial_hidden();

    Graph g1, g2, g3;
    PolicyForward f1 = net.forward(g1, in, h, 123, 4, PolicyVariant::Full);
    PolicyForward f2 = net.forward(g2, in, h, 123, 4, PolicyVariant::Full);
    PolicyForward f3 = net.forward(g3, in, h, 124, 4, PolicyVariant::Full);
    CHECK(g1.val(f1.mean).v == g2.val(f2.mean).v);
    CHECK(g1.val(f1.value).v == g2.val(f2.value).v);
    CHECK(g1.val(f1.mean).v != g3.val(f3.mean).v);
}

TEST_CASE("gru_step closed forms and scalar-loop oracle") {
    const int di = 6, dh = 4;
    ParamStore store;
    int wz = store.add("wz", di, dh, InitKind::Zero), uz = store.add("uz", dh, dh, InitKind::Zero),
        bz = store.add("bz", 1, dh, InitKind::Zero);
    int wr = store.add("wr", di, dh, InitKind::Zero), ur = store.add("ur", dh, dh, InitKind::Zero),
        br = store.add("br", 1, dh, InitKind::Zero);
    int wh = store.add("wh", di, dh, InitKind::Zero), uh = store.add("uh", dh, dh, InitKind::Zero),
        bh = store.add("bh", 1, dh, InitKind::Zero);

    auto run = [&](const Tensor& x, const Tensor& h) {
        Graph g;
        GruIds ids{g.param(&store[wz].value, &store[wz].grad),
                   g.param(&store[uz].value, &store[uz].grad),
                   g.param(&store[bz].value, &store[bz].grad),
                   g.param(&store[wr].value, &store[wr].grad),
                   g.param(&store[ur].value, &store[ur].grad),
                   g.param(&store[br].value, &store[br].grad),
                   g.param(&store[wh].value, &store[wh].grad),
                   g.param(&store[uh].value, &store[uh].grad),
                   g.param(&store[bh].value, &store[bh].grad)};
        Graph::Id out = gru_step(g, g.input(x), g.input(h), ids);
        return g.val(out);
    };

    SUBCASE("all-zero parameters halve the hidden state") {
        Rng rng(3);
        Tensor h = random_tensor(1, dh, rng);
        Tensor x = random_tensor(1, di, rng);
        Tensor out = run(x, h);
        for (int j = 0; j < dh; ++j) CHECK(out.at(0, j) == doctest::Approx(0.5 * h.at(0, j)));
    }
    SUBCASE("all-zero everything stays zero") {
        Tensor out = run(Tensor(1, di), Tensor(1, dh));
        for (int j = 0; j < dh; ++j) CHECK(out.at(0, j) == 0.0);
    }
    SUBCASE("random instance matches the element-wise oracle") {
        store.init_weights(31);
        Rng rng(17);
        Tensor x = random_tensor(1, di, rng);
        Tensor h = random_tensor(1, dh, rng);
        Tensor out = run(x, h);
        Tensor expect = oracle_gru(x, h, store[wz].value, store[uz].value, store[bz].value,
                                   store[wr].value, store[ur].value, store[br].value,
                                   store[wh].value, store[uh].value, store[bh].value);
        for (int j = 0; j < dh; ++j)
            CHECK(out.at(0, j) == doctest::Approx(expect.at(0, j)).epsilon(1e-6));
    }
}

TEST_CASE("actor and critic head behavior") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    Rng rng(6);
    PolicyInput in = random_input(dims, rng, 2, 0);
    Tensor h = net.initial_hidden();

    SUBCASE("zero parameters give zero mean and value") {
        Graph g;
        PolicyForward f = net.forward(g, in, h, 1, 1, PolicyVariant::Full);
        CHECK(g.val(f.mean).at(0, 0) == 0.0);
        CHECK(g.val(f.mean).at(0, 1) == 0.0);
        CHECK(g.scalar(f.value) == 0.0);
    }
    SUBCASE("doubling the critic output weights doubles the value") {
        net.init_weights(5);
        Graph g;
        PolicyForward f = net.forward(g, in, h, 1, 1, PolicyVariant::Full);
        double v1 = g.scalar(f.value);
        int w2 = net.store().find("critic.w2");
        int b2 = net.store().find("critic.b2");
        REQUIRE(w2 >= 0);
        for (double& x : net.store()[w2].value.v) x *= 2.0;
        for (double& x : net.store()[b2].value.v) x *= 2.0;
        Graph g2;
        PolicyForward f2 = net.forward(g2, in, h, 1, 1, PolicyVariant::Full);
        CHECK(g2.scalar(f2.value) == doctest::Approx(2.0 * v1).epsilon(1e-9));
    }
}

TEST_CASE("squashed action distribution") {
    const double v_max = 1.0;
    Vec2 mean{0.3, -0.8}, log_std{-0.4, -0.9};

    SUBCASE("samples satisfy the per-component bound") {
        Rng rng(44);
        for (int i = 0; i < 500; ++i) {
            ActionSample s = sample_action(mean, log_std, v_max, rng);
            CHECK(std::abs(s.action.x) <= v_max);
            CHECK(std::abs(s.action.y) <= v_max);
        }
    }
    SUBCASE("log_std -> -inf gives the deterministic squashed mean") {
        Rng rng(44);
        ActionSample s = sample_action(mean, {-40.0, -40.0}, v_max, rng);
        CHECK(s.action.x == doctest::Approx(v_max * std::tanh(mean.x)).epsilon(1e-9));
        CHECK(s.action.y == doctest::Approx(v_max * std::tanh(mean.y)).epsilon(1e-9));
    }
    SUBCASE("density matches the change of variables and integrates to one") {
        Rng rng(9);
        ActionSample s = sample_action(mean, log_std, v_max, rng);
        auto density_x = [&](double zx) {
            double sd = std::exp(log_std.x);
            double ga = std::exp(-0.5 * (zx - mean.x) * (zx - mean.x) / (sd * sd)) /
                        (sd * std::sqrt(2.0 * M_PI));
            double da_dz = v_max * (1.0 - std::tanh(zx) * std::tanh(zx));
            return ga / da_dz;
        };
        double lp_x = gaussian_log_prob(s.z.x, mean.x, log_std.x) - std::log(v_max) -
                      log_one_minus_tanh_sq(s.z.x);
        CHECK(std::exp(lp_x) == doctest::Approx(density_x(s.z.x)).epsilon(1e-9));
        double lp_y = s.log_prob - lp_x;
        CHECK(lp_y == doctest::Approx(gaussian_log_prob(s.z.y, mean.y, log_std.y) -
                                      std::log(v_max) - log_one_minus_tanh_sq(s.z.y))
                          .epsilon(1e-9));

        // Simpson quadrature of the squashed x-density over (-v_max, v_max)
        const int N = 20000;
        double integral = 0.0;
        auto p = [&](double a) {
            if (std::abs(a) >= v_max) return 0.0;
            return density_x(std::atanh(a / v_max));
        };
        for (int i = 0; i < N; ++i) {
            double a0 = -v_max + 2.0 * v_max * i / N;
            double a1 = -v_max + 2.0 * v_max * (i + 1) / N;
            integral += (a1 - a0) / 6.0 * (p(a0) + 4.0 * p(0.5 * (a0 + a1)) + p(a1));
        }
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("policy variants") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    net.init_weights(2024);
    Rng rng(1);
    Tensor h = net.initial_hidden();

    SUBCASE("bndnn is deterministic without seeding") {
        PolicyInput in = random_input(dims, rng, 3, 2);
        Graph g1, g2;
        PolicyForward a = net.forward(g1, in, h, 111, 4, PolicyVariant::DetBnn);
        PolicyForward b = net.forward(g2, in, h, 999, 4, PolicyVariant::DetBnn);
        CHECK(g1.val(a.mean).v == g2.val(b.mean).v);
        CHECK(g1.scalar(a.kl) == 0.0);
    }
    SUBCASE("bnbrl ignores belief contents") {
        PolicyInput in = random_input(dims, rng, 3, 2);
        PolicyInput in2 = in;
        for (double& x : in2.beliefs.v) x += 1.7;
        Graph g1, g2;
        PolicyForward a = net.forward(g1, in, h, 5, 2, PolicyVariant::NoBelief);
        PolicyForward b = net.forward(g2, in2, h, 5, 2, PolicyVariant::NoBelief);
        CHECK(g1.val(a.mean).v == g2.val(b.mean).v);
    }
    SUBCASE("bnbrl+ differs from bnbrl on a nonempty belief set") {
        PolicyInput in = random_input(dims, rng, 3, 2);
        Graph g1, g2;
        PolicyForward a = net.forward(g1, in, h, 5, 2, PolicyVariant::Full);
        PolicyForward b = net.forward(g2, in, h, 5, 2, PolicyVariant::NoBelief);
        bool differs = false;
        for (int j = 0; j < 2; ++j)
            differs = differs ||
                      std::abs(g1.val(a.mean).v[j] - g2.val(b.mean).v[j]) > 1e-12;
        CHECK(differs);
    }
    SUBCASE("rnn variant ignores predictions and beliefs") {
        PolicyInput in = random_input(dims, rng, 3, 2);
        PolicyInput in2 = in;
        for (int i = 0; i < in2.humans.rows; ++i)
            for (int j = 2; j < in2.humans.cols; ++j) in2.humans.at(i, j) += 3.3;
        for (double& x : in2.beliefs.v) x -= 2.2;
        Graph g1, g2;
        PolicyForward a = net.forward(g1, in, h, 5, 2, PolicyVariant::RnnOnly);
        PolicyForward b = net.forward(g2, in2, h, 5, 2, PolicyVariant::RnnOnly);
        CHECK(g1.val(a.mean).v == g2.val(b.mean).v);
    }
}

TEST_CASE("full forward: finite outputs, zero-visible zero-belief edge") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    net.init_weights(88);
    Rng rng(3);

    SUBCASE("large-magnitude inputs stay finite") {
        PolicyInput in = random_input(dims, rng, dims.n_max, dims.n_max);
        for (double& x : in.humans.v) x *= 300.0;
        for (double& x : in.beliefs.v) x *= 300.0;
        for (double& x : in.robot.v) x *= 100.0;
        Tensor h = net.initial_hidden();
        Graph g;
        PolicyForward f = net.forward(g, in, h, 7, 2, PolicyVariant::Full);
        CHECK(g.val(f.mean).all_finite());
        CHECK(g.val(f.value).all_finite());
        CHECK(g.val(f.h_next).all_finite());
    }
    SUBCASE("no humans, no beliefs") {
        PolicyInput in = random_input(dims, rng, 0, 0);
        Tensor h = net.initial_hidden();
        Graph g;
        PolicyForward f = net.forward(g, in, h, 7, 2, PolicyVariant::Full);
        CHECK(g.val(f.mean).all_finite());
        for (double x : g.val(f.v_rh).v) CHECK(x == 0.0);
        for (double x : g.val(f.v_rb).v) CHECK(x == 0.0);
        CHECK(f.kl == -1);  // belief path skipped
    }
}

TEST_CASE("composite forward gradients pass central differences") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    net.init_weights(314159);
    Rng rng(10);
    PolicyInput in = random_input(dims, rng, 3, 2);
    Rng hr(4);
    Tensor h = random_tensor(1, dims.d_hidden, hr, 0.5);

    auto build = [&](Graph& g) {
        PolicyForward f = net.forward(g, in, h, 31337, 2, PolicyVariant::Full);
        return g.add(g.add(gradcheck::weighted_sum(g, f.mean, 3),
                           gradcheck::weighted_sum(g, f.value, 4)),
                     g.add(gradcheck::weighted_sum(g, f.h_next, 5),
                           g.scale(f.kl, 1e-4)));
    };

    Rng pick(2);
    double err = gradcheck::max_rel_err(net.store(), build, pick, 2);
    CHECK(err < 1e-3);
}

TEST_CASE("checkpoint roundtrip is bit-exact") {
    PolicyDims dims = small_dims();
    PolicyNet net(dims);
    net.init_weights(345);
    std::string path = "/tmp/crowdnav_test_ckpt.bin";
    save_policy(path, net, "variant = bnbrl+\nsteps = 0\n");

    PolicyNet other(dims);
    other.init_weights(999);
    Checkpoint c = load_checkpoint(path);
    CHECK(c.config_echo == "variant = bnbrl+\nsteps = 0\n");
    load_policy(other, c);
    for (int i = 0; i < net.store().count(); ++i) {
        const auto& a = net.store()[i].value;
        const auto& b = other.store()[i].value;
        REQUIRE(a.v.size() == b.v.size());
        bool same = true;
        for (std::size_t j = 0; j < a.v.size(); ++j) same = same && a.v[j] == b.v[j];
        CHECK(same);
    }
    std::remove(path.c_str());
}
