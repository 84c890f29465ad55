#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "psae/adam.hpp"
#include "psae/model.hpp"

using namespace psae;
using testutil::fill_uniform;
using testutil::gradcheck;

namespace {

AutoencoderConfig tiny_config() {
    AutoencoderConfig cfg;
    cfg.window = 4;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = {4, 8};
    return cfg;
}

}  // namespace

TEST_CASE("reconstruction has the input shape and lives in [0,1]") {
    SUBCASE("default geometry") {
        AutoencoderConfig cfg;  // 8 x 1 x 64 x 64, ladder 16/32/64
        Rng rng(1);
        Autoencoder model = Autoencoder::seeded(cfg, rng);
        Tensor x = Tensor::zeros({1, 8, 1, 64, 64});
        fill_uniform(x, rng, 0.0, 1.0);
        Tensor y = model.forward(nullptr, x);
        REQUIRE(y.shape() == x.shape());
        for (float v : y.vec()) {
            REQUIRE(std::isfinite(v));
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
        }
    }

    SUBCASE("non-square frames and a batch dimension") {
        AutoencoderConfig cfg;
        cfg.window = 4;
        cfg.height = 16;
        cfg.width = 32;
        cfg.channels = {2, 4};
        Rng rng(2);
        Autoencoder model = Autoencoder::seeded(cfg, rng);
        Tensor x = Tensor::zeros({3, 4, 1, 16, 32});
        fill_uniform(x, rng, 0.0, 1.0);
        CHECK(model.forward(nullptr, x).shape() == x.shape());
    }
}

TEST_CASE("forward rejects inputs that do not match the config") {
    Rng rng(3);
    Autoencoder model = Autoencoder::seeded(tiny_config(), rng);
    CHECK_THROWS_WITH_AS(model.forward(nullptr, Tensor::zeros({1, 4, 1, 16, 8})),
                         doctest::Contains("does not match"), Error);
    CHECK_THROWS_AS(model.forward(nullptr, Tensor::zeros({1, 8, 1, 16, 16})), Error);
    CHECK_THROWS_AS(model.forward(nullptr, Tensor::zeros({4, 1, 16, 16})), Error);
}

TEST_CASE("config validation enforces the divisibility the mirror needs") {
    AutoencoderConfig cfg;  // 3 layers: window % 4, height/width % 8
    CHECK_NOTHROW(cfg.validate());
    cfg.window = 6;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("multiple of 4"), Error);
    cfg.window = 8;
    cfg.height = 12;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("multiple of 8"), Error);
    cfg.height = 64;
    cfg.width = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.width = 64;
    cfg.channels = {};
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("empty"), Error);
    cfg.channels = {16, 0};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.channels = {16};
    cfg.leaky_slope = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.leaky_slope = 0.2;
    cfg.in_channels = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("config toml round trip is lossless and strict") {
    AutoencoderConfig cfg = tiny_config();
    cfg.leaky_slope = 0.15;
    toml::Table model;
    cfg.to_toml(model);
    AutoencoderConfig back = AutoencoderConfig::from_toml(model, cfg.window);
    CHECK(back == cfg);

    model.set("channles", toml::Value::integer(3));  // typo must be fatal
    CHECK_THROWS_WITH_AS(AutoencoderConfig::from_toml(model, cfg.window),
                         doctest::Contains("channles"), Error);
}

TEST_CASE("seeded init: deterministic, bounded kernels, zero biases") {
    AutoencoderConfig cfg = tiny_config();
    Rng r1(42), r2(42), r3(43);
    Autoencoder a = Autoencoder::seeded(cfg, r1);
    Autoencoder b = Autoencoder::seeded(cfg, r2);
    Autoencoder c = Autoencoder::seeded(cfg, r3);

    REQUIRE(a.params().size() == b.params().size());
    bool all_equal_other_seed = true;
    for (size_t i = 0; i < a.params().size(); ++i) {
        CHECK(a.params()[i].vec() == b.params()[i].vec());
        all_equal_other_seed = all_equal_other_seed && a.params()[i].vec() == c.params()[i].vec();
    }
    CHECK_FALSE(all_equal_other_seed);

    for (size_t i = 0; i < a.params().size(); ++i) {
        const bool is_bias = a.param_names()[i].find(".bias") != std::string::npos;
        float max_abs = 0.0f;
        for (float v : a.params()[i].vec()) max_abs = std::max(max_abs, std::abs(v));
        if (is_bias)
            CHECK(max_abs == 0.0f);
        else {
            CHECK(max_abs > 0.0f);
            CHECK(max_abs < 2.0f);  // fan-in >= 12 keeps the bound well below this
        }
    }

    // names pair up with tensors in canonical order
    REQUIRE(a.param_names().size() == 8);  // 2 layers encoder + 2 decoder, kernel+bias
    CHECK(a.param_names()[0] == "enc0.kernel");
    CHECK(a.param_names()[1] == "enc0.bias");
    CHECK(a.param_names()[4] == "dec0.kernel");
    CHECK(a.param_names()[7] == "dec1.bias");
}

TEST_CASE("adopting parameters reproduces the forward pass bit for bit") {
    AutoencoderConfig cfg = tiny_config();
    Rng rng(7);
    Autoencoder a = Autoencoder::seeded(cfg, rng);
    std::vector<Tensor> copies;
    for (const auto& p : a.params()) copies.push_back(p.clone());
    Autoencoder b = Autoencoder::from_params(cfg, std::move(copies));

    Tensor x = Tensor::zeros({2, 4, 1, 16, 16});
    fill_uniform(x, rng, 0.0, 1.0);
    CHECK(a.forward(nullptr, x).vec() == b.forward(nullptr, x).vec());

    SUBCASE("wrong tensor count") {
        std::vector<Tensor> few;
        for (size_t i = 0; i + 1 < a.params().size(); ++i) few.push_back(a.params()[i].clone());
        CHECK_THROWS_WITH_AS(Autoencoder::from_params(cfg, std::move(few)),
                             doctest::Contains("parameter tensors"), Error);
    }
    SUBCASE("wrong shape names the offending parameter") {
        std::vector<Tensor> wrong;
        for (const auto& p : a.params()) wrong.push_back(p.clone());
        wrong[2] = Tensor::zeros({1, 1, 1, 1, 1});
        CHECK_THROWS_WITH_AS(Autoencoder::from_params(cfg, std::move(wrong)),
                             doctest::Contains("enc1.kernel"), Error);
    }
}

TEST_CASE("losses match their scalar definitions") {
    Rng rng(9);
    Tensor x = Tensor::zeros({2, 4, 1, 6, 6});
    fill_uniform(x, rng, 0.0, 1.0);

    CHECK(loss_normal<float>(nullptr, x, x).scalar() == 0.0f);
    CHECK(loss_pseudo<float>(nullptr, x, x).scalar() == 0.0f);

    // a uniform 0.1 offset squares to exactly 0.01 mean error
    Tensor shifted = x.clone();
    for (auto& v : shifted.vec()) v += 0.1f;
    CHECK(loss_normal<float>(nullptr, shifted, x).scalar() == doctest::Approx(0.01).epsilon(1e-5));

    Tensor y = Tensor::zeros(x.shape());
    fill_uniform(y, rng, 0.0, 1.0);
    double acc = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x.data()[i]) - static_cast<double>(y.data()[i]);
        acc += d * d;
    }
    const double want = acc / static_cast<double>(x.size());
    CHECK(loss_normal<float>(nullptr, x, y).scalar() == doctest::Approx(want).epsilon(1e-6));
    CHECK(loss_pseudo<float>(nullptr, x, y).scalar() ==
          loss_normal<float>(nullptr, x, y).scalar());
}

TEST_CASE("a few hundred steps overfit a constant video") {
    AutoencoderConfig cfg = tiny_config();
    Rng rng(11);
    Autoencoder model = Autoencoder::seeded(cfg, rng);
    Tensor x = Tensor::full({1, 4, 1, 16, 16}, 0.35f);

    AdamConfig opt;
    opt.lr = 1e-2;
    AdamState state;
    float last = 0.0f;
    for (int step = 0; step < 250; ++step) {
        Graph g;
        for (auto& p : model.params()) {
            p.set_requires_grad(true);
            p.ensure_grad();
            p.zero_grad();
        }
        Tensor loss = loss_normal(&g, model.forward(&g, x), x);
        g.backward(loss);
        adam_step(model.params(), state, opt);
        last = loss.scalar();
        REQUIRE(std::isfinite(last));
    }
    CHECK(last < 1e-3f);
}

TEST_CASE("full-model analytic gradients match finite differences") {
    // shrunk geometry keeps the parameter count inside the budget that makes
    // central differences affordable and trustworthy
    AutoencoderConfig cfg;
    cfg.window = 4;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = {1, 2, 4};
    Rng rng(13);
    Autoencoder seed_model = Autoencoder::seeded(cfg, rng);
    REQUIRE(seed_model.param_count() <= 500);

    AutoencoderD model = seed_model.cast<double>();
    TensorD x = TensorD::zeros({1, 4, 1, 8, 8}, true);
    fill_uniform(x, rng, 0.05, 0.95);
    TensorD target = TensorD::zeros(x.shape());
    fill_uniform(target, rng, 0.0, 1.0);

    std::vector<TensorD> leaves = {x};
    for (auto& p : model.params()) {
        p.set_requires_grad(true);
        leaves.push_back(p);
    }
    auto fwd = [&](GraphD* g) { return loss_normal(g, model.forward(g, x), target); };
    const double worst = gradcheck(fwd, leaves);
    CHECK(worst < 1e-3);
}
