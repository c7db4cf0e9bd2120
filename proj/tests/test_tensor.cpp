#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vslan/grad_check.hpp"
#include "vslan/optim.hpp"
#include "vslan/params.hpp"
#include "vslan/tensor.hpp"

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace vslan;
using diff::Tensor;
using testutil::rand_tensor;
using testutil::rand_tensor_offzero;

TEST_CASE("linear identity and zero cases") {
    Tensor x = Tensor::from({2}, {1.0, 0.0});
    Tensor W = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor y = diff::linear(x, W);
    CHECK(y.data() == std::vector<double>{1.0, 0.0});

    Rng rng(3);
    Tensor x0 = Tensor::zeros({3});
    Tensor W2 = rand_tensor({4, 3}, rng);
    Tensor y0 = diff::linear(x0, W2);
    for (double v : y0.data()) CHECK(v == 0.0);
}

TEST_CASE("linear matches triple-loop matmul oracle") {
    Rng rng(7);
    Tensor x = rand_tensor({5}, rng);
    Tensor W = rand_tensor({4, 5}, rng);
    Tensor b = rand_tensor({4}, rng);
    Tensor y = diff::linear(x, W, b);
    auto expect = oracle::matvec(x.data(), W.data(), 4, 5, &b.data());
    for (size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == Catch::Approx(expect[i]).margin(1e-12));

    Tensor X = rand_tensor({3, 5}, rng);
    Tensor Y = diff::linear(X, W, b);
    auto expect2 = oracle::matmul_rows(X.data(), 3, 5, W.data(), 4, &b.data());
    for (size_t i = 0; i < expect2.size(); ++i)
        CHECK(Y.data()[i] == Catch::Approx(expect2[i]).margin(1e-12));
}

TEST_CASE("linear rejects shape mismatch naming both shapes") {
    Tensor x = Tensor::zeros({3});
    Tensor W = Tensor::zeros({2, 4});
    try {
        diff::linear(x, W);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[3]") != std::string::npos);
        CHECK(msg.find("[2,4]") != std::string::npos);
    }
}

TEST_CASE("activation fixed points and closed forms") {
    auto val = [](Tensor t) { return t.item(); };
    CHECK(val(diff::elu(Tensor::scalar(0.0))) == 0.0);
    CHECK(val(diff::relu(Tensor::scalar(-1.0))) == 0.0);
    CHECK(val(diff::sigmoid(Tensor::scalar(0.0))) == 0.5);
    CHECK(val(diff::elu(Tensor::scalar(-20.0))) == Catch::Approx(-1.0).margin(1e-8));
    CHECK(val(diff::elu(Tensor::scalar(1.0))) == 1.0);
    CHECK(val(diff::elu(Tensor::scalar(-1.0))) == Catch::Approx(std::exp(-1.0) - 1.0).margin(1e-15));
    CHECK(val(diff::tanh_t(Tensor::scalar(0.0))) == 0.0);
}

TEST_CASE("softmax basics") {
    Tensor u = diff::softmax(Tensor::from({4}, {0.7, 0.7, 0.7, 0.7}));
    for (double v : u.data()) CHECK(v == Catch::Approx(0.25).margin(1e-15));

    CHECK(diff::softmax(Tensor::scalar(3.2)).item() == 1.0);

    Tensor s = diff::softmax(Tensor::from({3}, {1.0, 2.0, 3.0}));
    CHECK(s.data()[0] == Catch::Approx(0.09003).margin(1e-5));
    CHECK(s.data()[1] == Catch::Approx(0.24473).margin(1e-5));
    CHECK(s.data()[2] == Catch::Approx(0.66524).margin(1e-5));
    auto direct = oracle::softmax({1.0, 2.0, 3.0});
    for (size_t i = 0; i < 3; ++i) CHECK(s.data()[i] == Catch::Approx(direct[i]).margin(1e-12));

    CHECK_THROWS_AS(diff::softmax(Tensor::from({0}, {})), ShapeError);
}

TEST_CASE("softmax normalization and shift invariance properties") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 1 + rng.uniform_index(8);
        Tensor x = rand_tensor({n}, rng, 6.0, false);
        Tensor s = diff::softmax(x);
        double total = 0.0;
        for (double v : s.data()) {
            CHECK(v > 0.0);
            total += v;
        }
        CHECK(std::fabs(total - 1.0) <= 1e-9);

        double c = rng.uniform(-50.0, 50.0);
        Tensor shifted = diff::softmax(diff::add_scalar(x, c));
        for (size_t i = 0; i < n; ++i)
            CHECK(std::fabs(s.data()[i] - shifted.data()[i]) <= 1e-12);
    }
}

TEST_CASE("layer_norm hand values and statistics") {
    Tensor gain = Tensor::full({3}, 1.0);
    Tensor bias = Tensor::zeros({3});

    Tensor c = diff::layer_norm(Tensor::full({3}, 5.0), gain, bias);
    for (double v : c.data()) CHECK(std::fabs(v) < 1e-6);

    Tensor y = diff::layer_norm(Tensor::from({3}, {1.0, 2.0, 3.0}), gain, bias);
    CHECK(y.data()[0] == Catch::Approx(-1.22474).margin(1e-4));
    CHECK(y.data()[1] == Catch::Approx(0.0).margin(1e-9));
    CHECK(y.data()[2] == Catch::Approx(1.22474).margin(1e-4));

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        size_t z = 4 + rng.uniform_index(12);
        Tensor g2 = Tensor::full({z}, 1.0);
        Tensor b2 = Tensor::zeros({z});
        Tensor x = rand_tensor({z}, rng, 4.0, false);
        Tensor out = diff::layer_norm(x, g2, b2);
        double mean = 0.0;
        for (double v : out.data()) mean += v;
        mean /= static_cast<double>(z);
        double var = 0.0;
        for (double v : out.data()) var += (v - mean) * (v - mean);
        var /= static_cast<double>(z);
        CHECK(std::fabs(mean) < 1e-7);
        CHECK(std::fabs(var - 1.0) < 1e-4);

        // shift invariance
        Tensor shifted = diff::layer_norm(diff::add_scalar(x, 13.5), g2, b2);
        for (size_t i = 0; i < z; ++i)
            CHECK(out.data()[i] == Catch::Approx(shifted.data()[i]).margin(1e-9));
    }
}

TEST_CASE("lstm_cell zero fixed point and gate limits") {
    size_t H = 3, din = 2;
    diff::LstmWeights w{Tensor::zeros({4 * H, din}), Tensor::zeros({4 * H, H}),
                        Tensor::zeros({4 * H})};
    auto [h, c] = diff::lstm_cell(Tensor::zeros({din}), Tensor::zeros({H}), Tensor::zeros({H}), w);
    for (double v : h.data()) CHECK(v == 0.0);
    for (double v : c.data()) CHECK(v == 0.0);

    // saturate forget gate open, input gate closed: c carries through
    std::vector<double> bias(4 * H, 0.0);
    for (size_t i = 0; i < H; ++i) bias[i] = -50.0;        // input gate
    for (size_t i = H; i < 2 * H; ++i) bias[i] = 50.0;     // forget gate
    diff::LstmWeights w2{Tensor::zeros({4 * H, din}), Tensor::zeros({4 * H, H}),
                         Tensor::from({4 * H}, bias)};
    Tensor c_prev = Tensor::from({H}, {0.3, -0.7, 1.1});
    auto [h2, c2] = diff::lstm_cell(Tensor::zeros({din}), Tensor::zeros({H}), c_prev, w2);
    for (size_t i = 0; i < H; ++i)
        CHECK(c2.data()[i] == Catch::Approx(c_prev.data()[i]).margin(1e-12));

    CHECK_THROWS_AS(
        diff::lstm_cell(Tensor::zeros({5}), Tensor::zeros({H}), Tensor::zeros({H}), w),
        ShapeError);
}

TEST_CASE("lstm_cell matches scalar-loop oracle") {
    Rng rng(21);
    size_t H = 4, din = 3;
    Tensor w_ih = rand_tensor({4 * H, din}, rng);
    Tensor w_hh = rand_tensor({4 * H, H}, rng);
    Tensor bias = rand_tensor({4 * H}, rng);
    Tensor x = rand_tensor({din}, rng);
    Tensor h0 = rand_tensor({H}, rng);
    Tensor c0 = rand_tensor({H}, rng);
    auto [h, c] = diff::lstm_cell(x, h0, c0, {w_ih, w_hh, bias});
    auto ref = oracle::lstm_step(x.data(), h0.data(), c0.data(), w_ih.data(), w_hh.data(),
                                 bias.data(), H, din);
    for (size_t i = 0; i < H; ++i) {
        CHECK(h.data()[i] == Catch::Approx(ref.h[i]).margin(1e-12));
        CHECK(c.data()[i] == Catch::Approx(ref.c[i]).margin(1e-12));
    }
}

TEST_CASE("gaussian_sample reparameterization") {
    Tensor mu = Tensor::from({3}, {0.5, -1.0, 2.0});
    Tensor lv = Tensor::from({3}, {0.2, -0.4, 0.0});
    Tensor d0 = diff::gaussian_sample(mu, lv, Tensor::zeros({3}));
    CHECK(d0.data() == mu.data());

    Tensor n = Tensor::from({3}, {1.5, -0.3, 0.7});
    Tensor d1 = diff::gaussian_sample(mu, Tensor::zeros({3}), n);
    for (size_t i = 0; i < 3; ++i)
        CHECK(d1.data()[i] == Catch::Approx(mu.data()[i] + n.data()[i]).margin(1e-15));
}

TEST_CASE("gaussian_sample Monte Carlo mean") {
    const size_t draws = 100000;
    double mu = 0.8, lv = -0.6;
    double sd = std::exp(0.5 * lv);
    Rng rng(17);
    double acc = 0.0;
    for (size_t i = 0; i < draws; ++i) {
        Tensor d = diff::gaussian_sample(Tensor::scalar(mu), Tensor::scalar(lv),
                                         Tensor::scalar(rng.normal()));
        acc += d.item();
    }
    double mean = acc / static_cast<double>(draws);
    CHECK(std::fabs(mean - mu) < 3.0 * sd / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("gaussian_sample gradients flow to mu and log_var, not noise") {
    Tensor mu = Tensor::from({2}, {0.1, 0.2}, true);
    Tensor lv = Tensor::from({2}, {-0.3, 0.4}, true);
    Tensor noise = Tensor::from({2}, {0.5, -0.6}, true);
    Tensor loss = diff::sum(diff::gaussian_sample(mu, lv, noise));
    diff::backward(loss);
    CHECK(mu.has_grad());
    CHECK(lv.has_grad());
    CHECK_FALSE(noise.has_grad());
}

TEST_CASE("kl_diag_gaussian closed form") {
    Tensor z = Tensor::zeros({4});
    CHECK(diff::kl_diag_gaussian(z, z, z, z).item() == 0.0);

    Tensor kl = diff::kl_diag_gaussian(Tensor::scalar(1.0), Tensor::scalar(0.0),
                                       Tensor::scalar(0.0), Tensor::scalar(0.0));
    CHECK(kl.item() == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("kl_diag_gaussian nonnegative, zero only at identical parameters") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        size_t d = 1 + rng.uniform_index(5);
        Tensor mq = rand_tensor({d}, rng, 2.0, false);
        Tensor lq = rand_tensor({d}, rng, 1.5, false);
        Tensor mp = rand_tensor({d}, rng, 2.0, false);
        Tensor lp = rand_tensor({d}, rng, 1.5, false);
        double kl = diff::kl_diag_gaussian(mq, lq, mp, lp).item();
        CHECK(kl >= 0.0);
        double kl_same = diff::kl_diag_gaussian(mq, lq, mq, lq).item();
        CHECK(std::fabs(kl_same) <= 1e-12);
        if (kl <= 1e-12) {
            for (size_t i = 0; i < d; ++i) {
                CHECK(mq.data()[i] == Catch::Approx(mp.data()[i]).margin(1e-5));
                CHECK(lq.data()[i] == Catch::Approx(lp.data()[i]).margin(1e-5));
            }
        }
    }
}

TEST_CASE("kl_diag_gaussian matches Monte Carlo estimate") {
    // E_q[log q - log p] over 1e6 draws
    const size_t draws = 1000000;
    double mq = 0.7, lq = -0.3, mp = -0.2, lp = 0.4;
    double sq = std::exp(0.5 * lq);
    Rng rng(41);
    double acc = 0.0;
    for (size_t i = 0; i < draws; ++i) {
        double x = mq + sq * rng.normal();
        double log_q = -0.5 * (std::log(2.0 * M_PI) + lq + (x - mq) * (x - mq) / std::exp(lq));
        double log_p = -0.5 * (std::log(2.0 * M_PI) + lp + (x - mp) * (x - mp) / std::exp(lp));
        acc += log_q - log_p;
    }
    double mc = acc / static_cast<double>(draws);
    double closed = diff::kl_diag_gaussian(Tensor::scalar(mq), Tensor::scalar(lq),
                                           Tensor::scalar(mp), Tensor::scalar(lp))
                        .item();
    CHECK(std::fabs(mc - closed) / closed < 0.01);
}

TEST_CASE("backward on simple graphs") {
    Tensor x = Tensor::from({3}, {0.5, -1.5, 2.0}, true);
    diff::backward(diff::sum(x));
    CHECK(x.grad() == std::vector<double>({1.0, 1.0, 1.0}));

    Tensor x2 = Tensor::from({2}, {1.0, 2.0}, true);
    diff::backward(diff::sum(diff::mul(x2, x2)));
    CHECK(x2.grad() == std::vector<double>({2.0, 4.0}));

    Tensor v = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(diff::backward(v), NumericError);
}

TEST_CASE("grad accumulation across backward calls") {
    Tensor x = Tensor::from({2}, {3.0, 4.0}, true);
    diff::backward(diff::sum(x));
    diff::backward(diff::sum(x));
    CHECK(x.grad() == std::vector<double>({2.0, 2.0}));
}

TEST_CASE("grad_check identity and negative control") {
    auto ident = [](const std::vector<Tensor>& in) { return diff::sum(in[0]); };
    // dyadic values and a dyadic step keep the central difference exact
    Tensor x = Tensor::from({4}, {0.5, -0.25, 1.0, 2.0}, true);
    auto rep = diff::grad_check(ident, {x}, 0.25);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err == 0.0);
    Rng rng(9);

    // analytic gradient deliberately doubled: must fail
    auto corrupted = [](const std::vector<Tensor>& in) {
        Tensor y = diff::custom_unary(
            in[0], [](const std::vector<double>& x) { return x; },
            [](const std::vector<double>& g, const std::vector<double>&,
               const std::vector<double>&) {
                std::vector<double> out(g.size());
                for (size_t i = 0; i < g.size(); ++i) out[i] = 2.0 * g[i];
                return out;
            });
        return diff::sum(diff::mul(y, y));
    };
    auto bad = diff::grad_check(corrupted, {rand_tensor({3}, rng)});
    CHECK_FALSE(bad.pass);
}

TEST_CASE("grad_check sigmoid-of-linear passes at 1e-4") {
    Rng rng(77);
    Tensor W = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({3}, rng);
    auto f = [&](const std::vector<Tensor>& in) {
        return diff::sum(diff::sigmoid(diff::linear(in[0], W, b)));
    };
    auto rep = diff::grad_check(f, {rand_tensor({4}, rng)}, 1e-5, 1e-4);
    CHECK(rep.pass);
}

TEST_CASE("grad_check detects nondeterministic functions") {
    int calls = 0;
    auto f = [&calls](const std::vector<Tensor>& in) {
        ++calls;
        return diff::mul_scalar(diff::sum(in[0]), static_cast<double>(calls));
    };
    Rng rng(13);
    std::vector<Tensor> in{rand_tensor({2}, rng)};
    CHECK_THROWS_AS(diff::grad_check(f, in), NumericError);
}

TEST_CASE("gradient checks for every primitive") {
    Rng rng(101);
    auto check = [&](const char* name,
                     std::function<Tensor(const std::vector<Tensor>&)> f,
                     std::vector<Tensor> inputs) {
        INFO(name);
        auto rep = diff::grad_check(f, inputs, 1e-5, 1e-4);
        INFO("max rel err " << rep.max_rel_err);
        CHECK(rep.pass);
    };

    check("add", [](const std::vector<Tensor>& in) { return diff::sum(diff::add(in[0], in[1])); },
          {rand_tensor({4}, rng), rand_tensor({4}, rng)});
    check("sub", [](const std::vector<Tensor>& in) { return diff::sum(diff::sub(in[0], in[1])); },
          {rand_tensor({4}, rng), rand_tensor({4}, rng)});
    check("mul",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::mul(in[0], in[1]), in[0]));
          },
          {rand_tensor({4}, rng), rand_tensor({4}, rng)});
    check("elu", [](const std::vector<Tensor>& in) { return diff::sum(diff::elu(in[0])); },
          {rand_tensor_offzero({5}, rng)});
    check("relu", [](const std::vector<Tensor>& in) { return diff::sum(diff::relu(in[0])); },
          {rand_tensor_offzero({5}, rng)});
    check("sigmoid",
          [](const std::vector<Tensor>& in) { return diff::sum(diff::sigmoid(in[0])); },
          {rand_tensor({5}, rng, 2.0)});
    check("tanh", [](const std::vector<Tensor>& in) { return diff::sum(diff::tanh_t(in[0])); },
          {rand_tensor({5}, rng, 2.0)});
    check("softmax",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::softmax(in[0]), in[1]));
          },
          {rand_tensor({5}, rng, 2.0), rand_tensor({5}, rng, 1.0, false)});
    check("log_softmax",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::log_softmax(in[0]), in[1]));
          },
          {rand_tensor({5}, rng, 2.0), rand_tensor({5}, rng, 1.0, false)});
    check("layer_norm",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::layer_norm(in[0], in[1], in[2]), in[3]));
          },
          {rand_tensor({6}, rng, 2.0), rand_tensor({6}, rng), rand_tensor({6}, rng),
           rand_tensor({6}, rng, 1.0, false)});
    check("layer_norm rank2",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::layer_norm(in[0], in[1], in[2]), in[3]));
          },
          {rand_tensor({3, 4}, rng, 2.0), rand_tensor({4}, rng), rand_tensor({4}, rng),
           rand_tensor({3, 4}, rng, 1.0, false)});
    check("linear vec",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::tanh_t(diff::linear(in[0], in[1], in[2])));
          },
          {rand_tensor({4}, rng), rand_tensor({3, 4}, rng), rand_tensor({3}, rng)});
    check("linear mat",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::tanh_t(diff::linear(in[0], in[1], in[2])));
          },
          {rand_tensor({2, 4}, rng), rand_tensor({3, 4}, rng), rand_tensor({3}, rng)});
    check("lstm_cell",
          [](const std::vector<Tensor>& in) {
              auto [h, c] = diff::lstm_cell(in[0], in[1], in[2], {in[3], in[4], in[5]});
              return diff::sum(diff::add(h, c));
          },
          {rand_tensor({3}, rng), rand_tensor({4}, rng), rand_tensor({4}, rng),
           rand_tensor({16, 3}, rng), rand_tensor({16, 4}, rng), rand_tensor({16}, rng)});
    check("gaussian_sample",
          [](const std::vector<Tensor>& in) {
              return diff::sum(
                  diff::mul(diff::gaussian_sample(in[0], in[1], in[2]), in[0]));
          },
          {rand_tensor({4}, rng), rand_tensor({4}, rng), rand_tensor({4}, rng, 1.0, false)});
    check("kl_diag_gaussian",
          [](const std::vector<Tensor>& in) {
              return diff::kl_diag_gaussian(in[0], in[1], in[2], in[3]);
          },
          {rand_tensor({4}, rng), rand_tensor({4}, rng), rand_tensor({4}, rng),
           rand_tensor({4}, rng)});
    check("scale_rows",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::scale_rows(in[0], in[1]));
          },
          {rand_tensor({3, 4}, rng), rand_tensor({3}, rng)});
    check("rowwise_mul",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::rowwise_mul(in[0], in[1]));
          },
          {rand_tensor({3, 4}, rng), rand_tensor({4}, rng)});
    check("sum_rows/mean_rows",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::mul(diff::mean_rows(in[0]), diff::sum_rows(in[0])));
          },
          {rand_tensor({3, 4}, rng)});
    check("concat/slice/row/pick",
          [](const std::vector<Tensor>& in) {
              Tensor cat = diff::concat(diff::row(in[0], 1), diff::slice(in[1], 1, 2));
              return diff::pick(diff::mul(cat, cat), 3);
          },
          {rand_tensor({2, 3}, rng), rand_tensor({4}, rng)});
    check("reshape",
          [](const std::vector<Tensor>& in) {
              return diff::sum(diff::sum_rows(diff::reshape(in[0], {2, 3})));
          },
          {rand_tensor({6}, rng)});
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    ParamMap params;
    Tensor w = params.add("w", {3}, Init::xavier_uniform, 1);
    auto before = w.data();
    params.zero_grad();
    AdamState st;
    adam_step(params, st, {});
    CHECK(w.data() == before);
}

TEST_CASE("adam first step is approximately -lr*sign(g)") {
    ParamMap params;
    Tensor w = params.add("w", {3}, Init::zeros, 0);
    params.zero_grad();
    w.grad_mut() = {0.4, -1.7, 0.002};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(params, st, cfg);
    // first-step update: -lr * g / (|g| + eps) ~= -lr * sign(g)
    CHECK(w.data()[0] == Catch::Approx(-0.01).epsilon(1e-4));
    CHECK(w.data()[1] == Catch::Approx(0.01).epsilon(1e-4));
    CHECK(w.data()[2] == Catch::Approx(-0.01).epsilon(1e-3));
}

TEST_CASE("gradient clipping scales by clip/norm") {
    ParamMap params;
    Tensor w = params.add("w", {2}, Init::zeros, 0);
    params.zero_grad();
    w.grad_mut() = {12.0, 16.0}; // norm 20
    double scale = clip_global_norm(params, 10.0);
    CHECK(scale == Catch::Approx(0.5).margin(1e-15));
    CHECK(w.grad()[0] == Catch::Approx(6.0).margin(1e-12));
    CHECK(w.grad()[1] == Catch::Approx(8.0).margin(1e-12));
}

TEST_CASE("identical seeds give bit-identical values and gradients") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = rand_tensor({6}, rng);
        Tensor W = rand_tensor({4, 6}, rng);
        Tensor y = diff::sum(diff::elu(diff::linear(x, W)));
        diff::backward(y);
        return std::make_tuple(y.item(), x.grad(), W.grad());
    };
    auto a = run(123);
    auto b = run(123);
    CHECK(std::get<0>(a) == std::get<0>(b));
    CHECK(std::get<1>(a) == std::get<1>(b));
    CHECK(std::get<2>(a) == std::get<2>(b));
}

TEST_CASE("debug validation flags non-finite values") {
    diff::set_debug_checks(true);
    Tensor big = Tensor::from({1}, {1e308});
    CHECK_THROWS_AS(diff::mul(big, big), NumericError);
    diff::set_debug_checks(false);
}

TEST_CASE("parameter init follows the declared distributions") {
    ParamMap params;
    Tensor w = params.add("m", {8, 4}, Init::xavier_uniform, 7);
    double a = std::sqrt(6.0 / (8.0 + 4.0));
    for (double v : w.data()) {
        CHECK(v <= a);
        CHECK(v >= -a);
    }
    Tensor b = params.add("b", {6}, Init::zeros, 7);
    for (double v : b.data()) CHECK(v == 0.0);
    Tensor lb = params.add("lstm_b", {8}, Init::lstm_bias, 7);
    CHECK(lb.data() == std::vector<double>({0, 0, 1, 1, 0, 0, 0, 0}));

    CHECK_THROWS_AS(params.add("m", {2, 2}, Init::zeros, 7), ShapeError);
}
