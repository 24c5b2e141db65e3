#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "oikg/errors.hpp"
#include "oikg/nn/checkpoint.hpp"
#include "oikg/nn/layers.hpp"
#include "oikg/nn/ops.hpp"
#include "oikg/nn/params.hpp"

using namespace oikg;
using namespace oikg::nn;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, bool track = true) {
    std::normal_distribution<double> n(0, 1);
    std::vector<double> v(r * c);
    for (auto& x : v) x = n(rng);
    return Tensor::matrix(r, c, v, track);
}

bool same(const Tensor& a, std::initializer_list<double> v, double tol = 1e-12) {
    if (a.numel() != v.size()) return false;
    std::size_t i = 0;
    for (double x : v) {
        if (std::abs(a[i++] - x) > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init_params") {
    std::vector<ParamSpec> specs{{"w", {2, 8}}, {"b", {8}}, {"sq", {4, 4}}};
    ParamStore a = ParamStore::init(specs, 9), b = ParamStore::init(specs, 9);
    for (double x : a.get("b").values()) CHECK(x == 0.0);
    CHECK(std::equal(a.get("sq").values().begin(), a.get("sq").values().end(), b.get("sq").values().begin()));
    const double bound = std::sqrt(6.0 / 10.0);
    for (double x : a.get("w").values()) CHECK(std::abs(x) <= bound);
    CHECK(a.scalar_count() == 16 + 8 + 16);
    CHECK_THROWS_AS(ParamStore::init({{"w", {2}}, {"w", {3}}}, 0), std::invalid_argument);
    ParamStore c = ParamStore::init(specs, 10);
    CHECK(c.get("sq")[0] != a.get("sq")[0]);
}

TEST_CASE("linear and mlp") {
    Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor x = Tensor::matrix(1, 2, {1, 2});
    CHECK(same(linear(x, eye, Tensor::vector({0, 0})), {1, 2}));
    CHECK(same(linear(x, eye, Tensor::vector({1, 1})), {2, 3}));
    CHECK(same(linear(Tensor::zeros({3, 2}), eye, Tensor::vector({4, 5})), {4, 5, 4, 5, 4, 5}));

    Linear l1{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({-10, -10})};
    Linear l2{Tensor::matrix(2, 1, {3, 4}), Tensor::vector({0.5})};
    CHECK(same(mlp(x, {l1, l2}), {0.5}));
    CHECK(same(mlp(x, {l1}), {-9, -8}));
    // 2-2-1 hand case: h = relu([1,2]W1 + b1) = relu([3, -1]) = [3, 0]; y = 3*2 + 0 + 1 = 7
    Linear h1{Tensor::matrix(2, 2, {1, 1, 1, -1}), Tensor::vector({0, 0})};
    Linear h2{Tensor::matrix(2, 1, {2, 5}), Tensor::vector({1})};
    CHECK(same(mlp(x, {h1, h2}), {7}));
}

TEST_CASE("softmax and cross entropy") {
    CHECK(same(softmax(Tensor::matrix(1, 4, {0, 0, 0, 0})), {0.25, 0.25, 0.25, 0.25}));
    CHECK(same(softmax(Tensor::vector({0, std::log(3.0)})), {0.25, 0.75}));
    Tensor a = softmax(Tensor::vector({1, 2, 3})), b = softmax(Tensor::vector({101, 102, 103}));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-15);
    std::mt19937_64 rng(1);
    Tensor s = softmax(random_matrix(5, 7, rng, false));
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 7; ++c) sum += s.at(r, c);
        CHECK(std::abs(sum - 1) < 1e-12);
    }
    CHECK(std::abs(cross_entropy(Tensor::vector({0, 0, 0, 0}), 2).item() - std::log(4.0)) < 1e-12);
    CHECK(std::abs(cross_entropy(Tensor::vector({0, std::log(3.0)}), 1).item() + std::log(0.75)) < 1e-12);
    CHECK(cross_entropy(Tensor::vector({50, 0, 0}), 0).item() < 1e-20);
    CHECK_THROWS_AS(cross_entropy(Tensor::vector({0, 0}), 2), std::invalid_argument);
}

TEST_CASE("attention examples") {
    std::mt19937_64 rng(2);
    AttentionParams p{random_matrix(4, 4, rng), random_matrix(4, 4, rng), random_matrix(4, 4, rng),
                      random_matrix(4, 4, rng), Tensor::vector({0, 0, 0, 0})};
    Tensor q = random_matrix(3, 4, rng), kv = random_matrix(1, 4, rng);
    auto out = attention(q, kv, kv, p, 2);
    for (const Tensor& w : out.weights) {
        for (double x : w.values()) CHECK(x == 1.0);
    }
    Tensor proj = matmul(matmul(kv, p.wv), p.wo);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out.output.at(r, c) - proj.at(0, c)) < 1e-12);
    }
    // identical keys -> uniform weights -> mean of values
    Tensor keys = Tensor::matrix(2, 4, {1, 2, 3, 4, 1, 2, 3, 4});
    Tensor vals = Tensor::matrix(2, 4, {1, 0, 0, 0, 0, 1, 0, 0});
    auto u = attention(q, keys, vals, p, 2);
    for (const Tensor& w : u.weights) {
        for (double x : w.values()) CHECK(std::abs(x - 0.5) < 1e-12);
    }
    // hand case: one head, identity projections, d = 2
    Tensor id = Tensor::matrix(2, 2, {1, 0, 0, 1});
    AttentionParams h{id, id, id, id, Tensor::vector({0, 0})};
    Tensor hq = Tensor::matrix(1, 2, {std::sqrt(2.0) * std::log(3.0), 0});
    Tensor hk = Tensor::matrix(2, 2, {0, 0, 1, 0});
    Tensor hv = Tensor::matrix(2, 2, {4, 0, 0, 8});
    auto hand = attention(hq, hk, hv, h, 1);
    CHECK(same(hand.weights[0], {0.25, 0.75}));
    CHECK(same(hand.output, {1, 6}));
    CHECK_THROWS_AS(attention(q, kv, kv, p, 3), ShapeError);
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::vector({1, -2, 3}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    x.zero_grad();
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == -4.0);
    CHECK(x.grad()[2] == 6.0);
    Tensor loss = sum(x);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), InvalidStateError);
    CHECK_THROWS_AS(backward(sum(Tensor::vector({1, 2}))), InvalidStateError);
}

TEST_CASE("op gradients match finite differences") {
    std::mt19937_64 rng(4);
    Tensor a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng), c = random_matrix(3, 4, rng);
    Tensor bias = Tensor::vector({0.3, -0.2}, true);
    Tensor v = Tensor::vector({0.5, -1.0, 2.0, 0.1}, true);
    auto f = [&] {
        Tensor y = add_row(matmul(relu(add(a, mul(c, c))), b), bias);
        Tensor z = softmax(y);
        Tensor w = log_softmax(transpose(y));
        Tensor t = concat_cols({z, slice_cols(sub(a, c), 1, 2)});
        Tensor r = concat_rows({select_rows(t, {2, 0}), reshape(mean_rows(a, {0, 2}), {1, 4})});
        Tensor s = layer_norm_rows(add(r, broadcast_rows(v, 3)));
        return add(add(sum(mul(s, s)), scale(sum(w), 0.3)), cross_entropy(reshape(matmul(reshape(v, {1, 4}), b), {2}), 1));
    };
    auto r = gradcheck::check(f, {{"a", a}, {"b", b}, {"c", c}, {"bias", bias}, {"v", v}});
    INFO(r.worst);
    CHECK(r.max_rel <= 1e-4);
}

TEST_CASE("attention gradients match finite differences") {
    std::mt19937_64 rng(6);
    AttentionParams p{random_matrix(3, 4, rng), random_matrix(5, 4, rng), random_matrix(5, 4, rng),
                      random_matrix(4, 3, rng), Tensor::vector({0.1, 0.2, 0.3}, true)};
    Tensor q = random_matrix(2, 3, rng), kv = random_matrix(4, 5, rng);
    auto f = [&] {
        auto o = attention(q, kv, kv, p, 2);
        return sum(mul(o.output, o.output));
    };
    auto r = gradcheck::check(f, {{"q", q}, {"kv", kv}, {"wq", p.wq}, {"wk", p.wk}, {"wv", p.wv}, {"wo", p.wo}, {"bo", p.bo}});
    INFO(r.worst);
    CHECK(r.max_rel <= 1e-4);
}

TEST_CASE("adaptive moment step") {
    ParamStore s = ParamStore::init({{"w", {1}, ParamInit::Zeros}}, 0);
    Tensor w = s.get("w");
    w.mutable_values()[0] = 1.0;
    s.adam_step(AdamConfig{0.1});
    CHECK(w[0] == 1.0);  // no gradient yet

    backward(scale(sum(w), 3.0));
    s.adam_step(AdamConfig{0.1});
    CHECK(std::abs(w[0] - (1.0 - 0.1 * 3.0 / (3.0 + 1e-8))) < 1e-12);
    CHECK(s.grad_norm() == 0.0);

    ParamStore a = ParamStore::init({{"m", {2, 2}}}, 1), b = ParamStore::init({{"m", {2, 2}}}, 1);
    backward(sum(mul(a.get("m"), a.get("m"))));
    backward(sum(mul(b.get("m"), b.get("m"))));
    a.adam_step({});
    b.adam_step({});
    CHECK(std::equal(a.get("m").values().begin(), a.get("m").values().end(), b.get("m").values().begin()));
}

TEST_CASE("gradient clipping") {
    ParamStore s = ParamStore::init({{"v", {2}, ParamInit::Zeros}}, 0);
    backward(sum(mul(Tensor::vector({30, 40}), s.get("v"))));
    CHECK(s.clip_grad_norm(5.0) == doctest::Approx(50.0));
    CHECK(s.grad_norm() == doctest::Approx(5.0));
}

TEST_CASE("checkpoint round trip and errors") {
    ParamStore s = ParamStore::init({{"a.W", {3, 2}}, {"a.b", {2}}}, 5);
    const std::string bytes = encode_checkpoint(s);
    CHECK(bytes.substr(0, 8) == "OIKG0001");
    auto back = decode_checkpoint(bytes);
    CHECK(std::equal(back.at("a.W").values().begin(), back.at("a.W").values().end(), s.get("a.W").values().begin()));
    CHECK_THROWS_AS(decode_checkpoint("BADMAGIC"), SchemaError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), SchemaError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), SchemaError);

    const auto path = std::filesystem::temp_directory_path() / "oikg_test_ckpt.bin";
    save_checkpoint(s, path);
    ParamStore t = ParamStore::init({{"a.W", {3, 2}}, {"a.b", {2}}}, 6);
    load_checkpoint(t, path);
    CHECK(encode_checkpoint(t) == bytes);
    ParamStore wrong = ParamStore::init({{"a.W", {2, 2}}, {"a.b", {2}}}, 6);
    CHECK_THROWS_AS(load_checkpoint(wrong, path), ShapeError);
    std::filesystem::remove(path);
}

TEST_CASE("argmax invariance under positive affine maps") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> v(6);
        for (auto& x : v) x = std::round(u(rng));  // integer logits produce ties
        const double a = 0.5 + std::abs(u(rng)), b = u(rng);
        std::vector<double> w;
        for (double x : v) w.push_back(a * x + b);
        auto first_max = [](const std::vector<double>& xs) {
            return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
        };
        // rounding of a*x+b cannot reorder integers separated by >= 1 for these ranges
        CHECK(first_max(v) == first_max(w));
    }
}
