#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "vslan/grad_check.hpp"
#include "vslan/lan.hpp"

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace vslan;
using diff::Tensor;
using testutil::rand_tensor;

namespace {

LanWeights make_weights(ParamMap& params, size_t q, size_t k, size_t v, size_t z, size_t zp,
                        size_t x, uint64_t seed, const std::string& prefix = "lan") {
    return LanWeights::create(params, prefix, q, k, v, z, zp, x, seed);
}

oracle::LanWeightsRef to_ref(const LanWeights& w, size_t q, size_t k, size_t v, size_t z,
                             size_t zp, size_t x) {
    oracle::LanWeightsRef r;
    r.W_Q_K = w.W_Q_K.data(); r.b_Q_K = w.b_Q_K.data();
    r.W_K = w.W_K.data();     r.b_K = w.b_K.data();
    r.W_Q_V = w.W_Q_V.data(); r.b_Q_V = w.b_Q_V.data();
    r.W_V = w.W_V.data();     r.b_V = w.b_V.data();
    r.W_bk = w.W_bk.data();   r.b_bk = w.b_bk.data();
    r.w_bs = w.w_bs.data();   r.b_bs = w.b_bs.data();
    r.W_bl1 = w.W_bl1.data(); r.b_bl1 = w.b_bl1.data();
    r.W_bl2 = w.W_bl2.data(); r.b_bl2 = w.b_bl2.data();
    r.q = q; r.k = k; r.v = v; r.z = z; r.zp = zp; r.x = x;
    return r;
}

} // namespace

TEST_CASE("pool_keys zero and identity-weight cases") {
    ParamMap params;
    auto w = make_weights(params, 3, 4, 4, 5, 3, 2, 1);
    Tensor out = pool_keys(Tensor::zeros({3}), Tensor::zeros({2, 4}), w);
    for (double v : out.data()) CHECK(v == 0.0);

    // scalar case with unit weights: 1*1 = 1
    LanWeights unit;
    unit.W_Q_K = Tensor::from({1, 1}, {1.0});
    unit.b_Q_K = Tensor::zeros({1});
    unit.W_K = Tensor::from({1, 1}, {1.0});
    unit.b_K = Tensor::zeros({1});
    Tensor one = pool_keys(Tensor::from({1}, {1.0}), Tensor::from({1, 1}, {1.0}), unit);
    CHECK(one.data() == std::vector<double>{1.0});
}

TEST_CASE("pool_keys matches dense-loop oracle") {
    size_t q = 3, k = 4, v = 4, z = 5, zp = 3, x = 2, N = 2;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 7);
    Rng rng(19);
    Tensor Q = rand_tensor({q}, rng);
    Tensor K = rand_tensor({N, k}, rng);
    Tensor out = pool_keys(Q, K, w);
    auto ref = oracle::lan_replay(Q.data(), K.data(), std::vector<double>(N * v, 0.0), N,
                                  to_ref(w, q, k, v, z, zp, x));
    REQUIRE(out.size() == N * z);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == Catch::Approx(ref.pooled_keys[i]).margin(1e-12));
}

TEST_CASE("pool_values zero case, row symmetry, oracle") {
    size_t q = 3, k = 4, v = 4, z = 5, zp = 3, x = 2, N = 3;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 11);
    Tensor zeros = pool_values(Tensor::zeros({q}), Tensor::zeros({N, v}), w);
    for (double val : zeros.data()) CHECK(val == 0.0);

    Rng rng(23);
    Tensor Q = rand_tensor({q}, rng);
    std::vector<double> vrow(v);
    for (auto& x2 : vrow) x2 = rng.uniform(-1, 1);
    std::vector<double> vdata;
    for (size_t i = 0; i < N; ++i) vdata.insert(vdata.end(), vrow.begin(), vrow.end());
    Tensor V = Tensor::from({N, v}, vdata);
    Tensor out = pool_values(Q, V, w);
    for (size_t i = 1; i < N; ++i)
        for (size_t j = 0; j < z; ++j)
            CHECK(out.data()[i * z + j] == Catch::Approx(out.data()[j]).margin(1e-15));

    Tensor Vr = rand_tensor({N, v}, rng);
    Tensor out2 = pool_values(Q, Vr, w);
    auto ref = oracle::lan_replay(Q.data(), std::vector<double>(N * k, 0.0), Vr.data(), N,
                                  to_ref(w, q, k, v, z, zp, x));
    for (size_t i = 0; i < out2.size(); ++i)
        CHECK(out2.data()[i] == Catch::Approx(ref.pooled_values[i]).margin(1e-12));
}

TEST_CASE("local_attention uniform on identical rows, single clip, softmax oracle") {
    size_t z = 4, zp = 3;
    ParamMap params;
    auto w = make_weights(params, 3, 3, 3, z, zp, 2, 13);
    Rng rng(29);
    std::vector<double> rowv(z);
    for (auto& x : rowv) x = rng.uniform(-1, 1);
    std::vector<double> data;
    for (int i = 0; i < 4; ++i) data.insert(data.end(), rowv.begin(), rowv.end());
    Tensor attn = local_attention(Tensor::from({4, z}, data), w);
    for (double a : attn.data()) CHECK(a == Catch::Approx(0.25).margin(1e-12));

    Tensor single = local_attention(rand_tensor({1, z}, rng), w);
    CHECK(single.data() == std::vector<double>{1.0});

    // pass-through weights turn pooled keys [1],[2],[3] into scores 1,2,3
    LanWeights pass;
    pass.W_bk = Tensor::from({1, 1}, {1.0});
    pass.b_bk = Tensor::zeros({1});
    pass.w_bs = Tensor::from({1, 1}, {1.0});
    pass.b_bs = Tensor::zeros({1});
    Tensor a = local_attention(Tensor::from({3, 1}, {1.0, 2.0, 3.0}), pass);
    auto ref = oracle::softmax({1.0, 2.0, 3.0});
    for (size_t i = 0; i < 3; ++i) CHECK(a.data()[i] == Catch::Approx(ref[i]).margin(1e-12));
}

TEST_CASE("lan_forward degenerate cases") {
    size_t q = 3, k = 4, v = 4, z = 5, zp = 3, x = 2;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 17);
    Rng rng(31);

    // N=1: local is the single pooled value row, global is gate ⊙ pooled key row
    Tensor Q = rand_tensor({q}, rng);
    Tensor K = rand_tensor({1, k}, rng);
    Tensor V = rand_tensor({1, v}, rng);
    LanOutput out = lan_forward(Q, K, V, w);
    CHECK(out.attn.data() == std::vector<double>{1.0});
    for (size_t j = 0; j < z; ++j) {
        CHECK(out.local.data()[j] == Catch::Approx(out.pooled_values.data()[j]).margin(1e-12));
        CHECK(out.global_feat.data()[j] ==
              Catch::Approx(out.gate.data()[j] * out.pooled_keys.data()[j]).margin(1e-12));
    }

    // all clips identical: local equals any single pooled value row
    size_t N = 3;
    std::vector<double> krow(k), vrow(v);
    for (auto& a : krow) a = rng.uniform(-1, 1);
    for (auto& a : vrow) a = rng.uniform(-1, 1);
    std::vector<double> kd, vd;
    for (size_t i = 0; i < N; ++i) {
        kd.insert(kd.end(), krow.begin(), krow.end());
        vd.insert(vd.end(), vrow.begin(), vrow.end());
    }
    LanOutput same = lan_forward(Q, Tensor::from({N, k}, kd), Tensor::from({N, v}, vd), w);
    for (size_t j = 0; j < z; ++j)
        CHECK(same.local.data()[j] == Catch::Approx(same.pooled_values.data()[j]).margin(1e-12));
}

TEST_CASE("lan_forward matches end-to-end straight-loop oracle") {
    size_t q = 3, k = 4, v = 5, z = 6, zp = 3, x = 2, N = 4;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 37);
    Rng rng(41);
    Tensor Q = rand_tensor({q}, rng);
    Tensor K = rand_tensor({N, k}, rng);
    Tensor V = rand_tensor({N, v}, rng);
    LanOutput out = lan_forward(Q, K, V, w);
    auto ref = oracle::lan_replay(Q.data(), K.data(), V.data(), N, to_ref(w, q, k, v, z, zp, x));
    for (size_t i = 0; i < N; ++i)
        CHECK(out.attn.data()[i] == Catch::Approx(ref.attn[i]).margin(1e-12));
    for (size_t j = 0; j < z; ++j) {
        CHECK(out.local.data()[j] == Catch::Approx(ref.local[j]).margin(1e-12));
        CHECK(out.gate.data()[j] == Catch::Approx(ref.gate[j]).margin(1e-12));
        CHECK(out.global_feat.data()[j] == Catch::Approx(ref.global_feat[j]).margin(1e-12));
    }
}

TEST_CASE("lan invariants: convexity, gate range, attention normalization") {
    size_t q = 3, k = 4, v = 4, z = 5, zp = 3, x = 2;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 43);
    Rng rng(47);
    for (int trial = 0; trial < 25; ++trial) {
        size_t N = 1 + rng.uniform_index(5);
        LanOutput out = lan_forward(rand_tensor({q}, rng, 2.0), rand_tensor({N, k}, rng, 2.0),
                                    rand_tensor({N, v}, rng, 2.0), w);
        double asum = 0.0;
        for (double a : out.attn.data()) asum += a;
        CHECK(std::fabs(asum - 1.0) <= 1e-9);
        for (double g : out.gate.data()) {
            CHECK(g > 0.0);
            CHECK(g < 1.0);
        }
        // convexity: each local coordinate within the pooled-value column range
        for (size_t j = 0; j < z; ++j) {
            double lo = out.pooled_values.data()[j], hi = lo;
            for (size_t i = 1; i < N; ++i) {
                lo = std::min(lo, out.pooled_values.data()[i * z + j]);
                hi = std::max(hi, out.pooled_values.data()[i * z + j]);
            }
            CHECK(out.local.data()[j] >= lo - 1e-12);
            CHECK(out.local.data()[j] <= hi + 1e-12);
        }
    }
}

TEST_CASE("lan permutation equivariance") {
    size_t q = 3, k = 4, v = 4, z = 5, zp = 3, x = 2, N = 5;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 53);
    Rng rng(59);
    Tensor Q = rand_tensor({q}, rng);
    Tensor K = rand_tensor({N, k}, rng);
    Tensor V = rand_tensor({N, v}, rng);
    LanOutput base = lan_forward(Q, K, V, w);

    std::vector<size_t> perm{3, 0, 4, 1, 2};
    std::vector<double> kp(N * k), vp(N * v);
    for (size_t i = 0; i < N; ++i) {
        std::copy_n(K.data().begin() + perm[i] * k, k, kp.begin() + i * k);
        std::copy_n(V.data().begin() + perm[i] * v, v, vp.begin() + i * v);
    }
    LanOutput shuf = lan_forward(Q, Tensor::from({N, k}, kp), Tensor::from({N, v}, vp), w);
    for (size_t i = 0; i < N; ++i)
        CHECK(shuf.attn.data()[i] == Catch::Approx(base.attn.data()[perm[i]]).margin(1e-12));
    for (size_t j = 0; j < z; ++j) {
        CHECK(shuf.local.data()[j] == Catch::Approx(base.local.data()[j]).margin(1e-12));
        CHECK(shuf.gate.data()[j] == Catch::Approx(base.gate.data()[j]).margin(1e-12));
        CHECK(shuf.global_feat.data()[j] ==
              Catch::Approx(base.global_feat.data()[j]).margin(1e-12));
    }
}

TEST_CASE("lan_forward gradient check over inputs and all weights") {
    size_t q = 4, k = 4, v = 4, z = 5, zp = 3, x = 2, N = 3;
    ParamMap params;
    auto w = make_weights(params, q, k, v, z, zp, x, 61);
    Rng rng(67);
    Tensor Q = rand_tensor({q}, rng);
    Tensor K = rand_tensor({N, k}, rng);
    Tensor V = rand_tensor({N, v}, rng);
    Tensor probe = rand_tensor({z}, rng, 1.0, false);

    std::vector<Tensor> inputs{Q, K, V};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto f = [&](const std::vector<Tensor>& in) {
        LanOutput o = lan_forward(in[0], in[1], in[2], w);
        return diff::sum(diff::mul(diff::add(o.global_feat, o.local), probe));
    };
    auto rep = diff::grad_check(f, inputs, 1e-5, 1e-4);
    INFO("max rel err " << rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("lan weight construction rejects x >= z") {
    ParamMap params;
    CHECK_THROWS_AS(LanWeights::create(params, "bad", 3, 3, 3, 4, 2, 4, 1), ShapeError);
}
