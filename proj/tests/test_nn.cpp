#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uedhvac/nn.hpp"
#include "uedhvac/rng.hpp"

using namespace uedhvac;

namespace {

// 2-2-1 net with hand-pickable weights for closed-form checks.
nn::Network tiny_net() {
    nn::Network net;
    nn::Layer l1;
    l1.in = 2;
    l1.out = 2;
    l1.w = {1.0, -1.0, 0.5, 2.0};  // row-major [in][out]
    l1.b = {0.1, -0.2};
    nn::Layer l2;
    l2.in = 2;
    l2.out = 1;
    l2.w = {1.0, -0.5};
    l2.b = {0.3};
    net.layers = {l1, l2};
    net.dropout_p = 0.5;
    return net;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

TEST_CASE("forward matches hand-computed values") {
    const auto net = tiny_net();
    const std::vector<double> x{1.0, 2.0};
    // z1 = [2.1, 2.8], out = 2.1 - 1.4 + 0.3
    auto y = nn::forward(net, x);
    REQUIRE(y.size() == 1);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-14));

    const std::uint8_t mask[2] = {0, 1};
    y = nn::forward(net, x, mask, 2.0);
    // h = [0, 5.6], out = -2.8 + 0.3
    CHECK(y[0] == doctest::Approx(-2.5).epsilon(1e-14));
}

TEST_CASE("a full keep-mask at scale 1 equals the unmasked forward") {
    const auto net = nn::make_network(4, {8, 8}, 2, 0.1, 77);
    const auto mask = nn::full_mask(net);
    auto eng = rng::engine(3);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(4);
        for (auto& v : x) v = z(eng);
        CHECK(nn::forward(net, x) == nn::forward(net, x, mask.keep.data(), 1.0));
    }
}

TEST_CASE("make_network is seeded and shape-correct") {
    const auto a = nn::make_network(17, {64, 64}, 4, 0.1, 123);
    const auto b = nn::make_network(17, {64, 64}, 4, 0.1, 123);
    const auto c = nn::make_network(17, {64, 64}, 4, 0.1, 124);
    REQUIRE(a.layers.size() == 3);
    CHECK(a.input_dim() == 17);
    CHECK(a.output_dim() == 4);
    CHECK(a.hidden_units() == 128);
    CHECK(a.param_count() == 17 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4);
    CHECK(a.layers[0].w == b.layers[0].w);
    CHECK(a.layers[0].w != c.layers[0].w);
    const double bound = 1.0 / std::sqrt(17.0);
    for (double w : a.layers[0].w) {
        CHECK(w <= bound);
        CHECK(w >= -bound);
    }
    CHECK_THROWS_AS(nn::make_network(0, {4}, 1, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::make_network(2, {4}, 1, 1.0, 1), std::invalid_argument);
}

TEST_CASE("backward agrees with central finite differences") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        auto net = nn::make_network(4, {8, 8}, 1, 0.0, seed);
        auto eng = rng::engine(rng::derive(seed, "fd-x"));
        std::normal_distribution<double> z;
        std::vector<double> x(4);
        for (auto& v : x) v = z(eng);

        nn::Workspace ws;
        nn::forward(net, x, nullptr, 1.0, ws);
        nn::GradientBundle g;
        const std::vector<double> up{1.0};
        nn::backward(net, x, nullptr, 1.0, ws, up, g, false);

        const double h = 1e-6;
        auto eval = [&](const nn::Network& n2) { return nn::forward(n2, x)[0]; };

        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            for (std::size_t i = 0; i < net.layers[l].w.size(); i += 7) {
                auto np = net;
                auto nm = net;
                np.layers[l].w[i] += h;
                nm.layers[l].w[i] -= h;
                const double fd = (eval(np) - eval(nm)) / (2 * h);
                CHECK(rel_err(fd, g.dw[l][i]) < 1e-4);
            }
            for (std::size_t i = 0; i < net.layers[l].b.size(); i += 3) {
                auto np = net;
                auto nm = net;
                np.layers[l].b[i] += h;
                nm.layers[l].b[i] -= h;
                const double fd = (eval(np) - eval(nm)) / (2 * h);
                CHECK(rel_err(fd, g.db[l][i]) < 1e-4);
            }
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto xp = x;
            auto xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (nn::forward(net, xp)[0] - nn::forward(net, xm)[0]) / (2 * h);
            CHECK(rel_err(fd, g.dinput[i]) < 1e-4);
        }
    }
}

TEST_CASE("masked backward differentiates the masked function") {
    auto net = nn::make_network(3, {6, 6}, 2, 0.5, 42);
    auto eng = rng::engine(rng::derive(42, "mask"));
    const auto mask = nn::draw_mask(net, 0.5, eng);
    const double scale = 2.0;
    std::vector<double> x{0.3, -0.7, 1.2};
    const std::vector<double> up{0.5, -1.5};

    nn::Workspace ws;
    nn::forward(net, x, mask.keep.data(), scale, ws);
    nn::GradientBundle g;
    nn::backward(net, x, mask.keep.data(), scale, ws, up, g, false);

    const double h = 1e-6;
    auto eval = [&](std::span<const double> xx) {
        auto y = nn::forward(net, xx, mask.keep.data(), scale);
        return up[0] * y[0] + up[1] * y[1];
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto xp = x;
        auto xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (eval(xp) - eval(xm)) / (2 * h);
        CHECK(rel_err(fd, g.dinput[i]) < 1e-4);
    }
}

TEST_CASE("dropout mask statistics follow the keep probability") {
    const auto net = nn::make_network(4, {100, 100}, 1, 0.3, 5);
    auto eng = rng::engine(9);
    int kept = 0, total = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const auto m = nn::draw_mask(net, 0.3, eng);
        for (auto k : m.keep) kept += k;
        total += static_cast<int>(m.keep.size());
    }
    const double frac = static_cast<double>(kept) / total;
    CHECK(frac == doctest::Approx(0.7).epsilon(0.02));
    // p=0 keeps everything
    const auto m0 = nn::draw_mask(net, 0.0, eng);
    CHECK(m0.keep == nn::full_mask(net).keep);
}

TEST_CASE("adam takes a lr-sized first step and ignores zero gradients") {
    auto net = tiny_net();
    const auto before = net.layers[0].w;
    nn::AdamState st;
    st.init_like(net);
    nn::GradientBundle g;
    g.init_like(net);

    nn::adam_update(net, g, st, 0.1);
    CHECK(net.layers[0].w == before);  // zero gradient: no movement

    nn::AdamState fresh;
    fresh.init_like(net);
    g.dw[0][0] = 7.0;  // first-step magnitude is lr regardless of gradient scale
    nn::adam_update(net, g, fresh, 0.1);
    CHECK(std::abs(net.layers[0].w[0] - (before[0] - 0.1)) < 1e-8);
    CHECK(net.layers[0].w[1] == before[1]);
}

TEST_CASE("checkpoints round-trip through float32 and reject corruption") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "uedhvac_nn_test";
    fs::create_directories(dir);
    const auto path = (dir / "net.ckpt").string();

    const auto net = nn::make_network(17, {32, 16}, 4, 0.1, 321);
    nlohmann::ordered_json extra;
    extra["obs_mean"] = {1.0, 2.0};
    nn::save_network(net, path, extra);

    const auto loaded = nn::load_network(path);
    REQUIRE(loaded.net.layers.size() == net.layers.size());
    CHECK(loaded.net.dropout_p == net.dropout_p);
    CHECK(loaded.extra["obs_mean"][1] == 2.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(loaded.net.layers[l].in == net.layers[l].in);
        CHECK(loaded.net.layers[l].out == net.layers[l].out);
        for (std::size_t i = 0; i < net.layers[l].w.size(); ++i)
            CHECK(loaded.net.layers[l].w[i] ==
                  static_cast<double>(static_cast<float>(net.layers[l].w[i])));
    }

    // truncated payload must fail with a size complaint
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    }
    CHECK_THROWS_WITH_AS(nn::load_network((dir / "trunc.ckpt").string()),
                         doctest::Contains("bytes"), std::runtime_error);

    {
        std::ofstream f(dir / "junk.ckpt", std::ios::binary);
        f << "{\"format\":\"something-else\",\"version\":1}\n";
    }
    CHECK_THROWS_AS(nn::load_network((dir / "junk.ckpt").string()), std::runtime_error);
    CHECK_THROWS_AS(nn::load_network((dir / "missing.ckpt").string()), std::runtime_error);
}
