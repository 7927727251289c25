#include <doctest.h>

#include <cmath>
#include <vector>

#include "clair/tensor.hpp"

using namespace clair;

namespace {

// Central finite difference of a scalar-valued graph w.r.t. one leaf entry.
double fd_grad(const std::function<Tensor(const std::vector<Tensor>&)>& f,
               std::vector<Tensor>& leaves, size_t leaf, size_t idx, double h = 1e-6) {
    double saved = (*leaves[leaf]->data)[idx];
    (*leaves[leaf]->data)[idx] = saved + h;
    double up = f(leaves)->scalar();
    (*leaves[leaf]->data)[idx] = saved - h;
    double dn = f(leaves)->scalar();
    (*leaves[leaf]->data)[idx] = saved;
    return (up - dn) / (2.0 * h);
}

void check_grads(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                 std::vector<Tensor>& leaves, double tol = 1e-5) {
    Tensor loss = f(leaves);
    backward(loss);
    for (size_t l = 0; l < leaves.size(); ++l) {
        REQUIRE(leaves[l]->grad.size() == leaves[l]->size());
        for (size_t i = 0; i < leaves[l]->size(); ++i) {
            double num = fd_grad(f, leaves, l, i);
            double ana = leaves[l]->grad[i];
            double denom = std::max({1.0, std::fabs(num), std::fabs(ana)});
            CHECK(std::fabs(num - ana) / denom < tol);
        }
    }
}

std::vector<Tensor> random_leaves(const std::vector<std::vector<int>>& shapes, uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> out;
    for (const auto& s : shapes) out.push_back(randn_tensor(s, rng, 0.7, true));
    return out;
}

}  // namespace

TEST_CASE("matmul forward matches hand computation") {
    Tensor a = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = make_tensor({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    CHECK(c->shape == std::vector<int>{2, 2});
    CHECK(c->at(0, 0) == doctest::Approx(58));
    CHECK(c->at(0, 1) == doctest::Approx(64));
    CHECK(c->at(1, 0) == doctest::Approx(139));
    CHECK(c->at(1, 1) == doctest::Approx(154));
}

TEST_CASE("matmul gradient matches finite differences") {
    auto leaves = random_leaves({{3, 4}, {4, 2}}, 11);
    check_grads([](const std::vector<Tensor>& v) { return sum(matmul(v[0], v[1])); }, leaves);
}

TEST_CASE("elementwise op gradients match finite differences") {
    SUBCASE("add and multiply") {
        auto leaves = random_leaves({{3, 3}, {3, 3}}, 12);
        check_grads(
            [](const std::vector<Tensor>& v) { return sum(multiply(add(v[0], v[1]), v[0])); },
            leaves);
    }
    SUBCASE("scale and transpose") {
        auto leaves = random_leaves({{2, 5}}, 13);
        check_grads(
            [](const std::vector<Tensor>& v) {
                return sum(matmul(v[0], transpose(scale(v[0], 1.5))));
            },
            leaves);
    }
    SUBCASE("add_rowvec broadcast") {
        auto leaves = random_leaves({{4, 3}, {1, 3}}, 14);
        check_grads(
            [](const std::vector<Tensor>& v) {
                return sum(multiply(add_rowvec(v[0], v[1]), add_rowvec(v[0], v[1])));
            },
            leaves);
    }
}

TEST_CASE("gelu forward values and gradient") {
    Tensor x = make_tensor({1, 3}, {-1.0, 0.0, 2.0});
    Tensor y = gelu(x);
    // exact erf-based GELU: x/2 * (1 + erf(x/sqrt(2)))
    CHECK(y->at(0, 0) == doctest::Approx(-0.15865525393145707).epsilon(1e-9));
    CHECK(y->at(0, 1) == doctest::Approx(0.0));
    CHECK(y->at(0, 2) == doctest::Approx(1.9544997361036416).epsilon(1e-9));

    auto leaves = random_leaves({{2, 4}}, 15);
    check_grads([](const std::vector<Tensor>& v) { return sum(gelu(v[0])); }, leaves);
}

TEST_CASE("softmax rows sum to one and gradient matches finite differences") {
    auto leaves = random_leaves({{3, 5}}, 16);
    Tensor s = softmax(leaves[0]);
    for (int r = 0; r < 3; ++r) {
        double total = 0;
        for (int c = 0; c < 5; ++c) total += s->at(r, c);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    // shift invariance
    Tensor shifted = softmax(add_rowvec(leaves[0], make_tensor({1, 5}, {100, 100, 100, 100, 100})));
    for (size_t i = 0; i < s->size(); ++i)
        CHECK((*shifted->data)[i] == doctest::Approx((*s->data)[i]).epsilon(1e-9));

    check_grads(
        [](const std::vector<Tensor>& v) { return sum(multiply(softmax(v[0]), v[0])); }, leaves);
}

TEST_CASE("layer_norm normalizes rows and gradient matches finite differences") {
    auto leaves = random_leaves({{3, 6}, {1, 6}, {1, 6}}, 17);
    Tensor y = layer_norm(leaves[0], leaves[1], leaves[2]);
    CHECK(y->shape == leaves[0]->shape);

    check_grads(
        [](const std::vector<Tensor>& v) {
            return sum(multiply(layer_norm(v[0], v[1], v[2]), v[0]));
        },
        leaves, 1e-4);
}

TEST_CASE("cross_entropy masked mean and gradient") {
    Tensor logits = make_tensor({2, 3}, {1.0, 2.0, 0.5, 0.0, 0.0, 0.0}, true);
    std::vector<int> targets{1, 2};
    SUBCASE("hand value, full mask") {
        Tensor loss = cross_entropy(logits, targets, {true, true});
        double l0 = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)));
        double l1 = std::log(3.0);
        CHECK(loss->scalar() == doctest::Approx((l0 + l1) / 2.0).epsilon(1e-12));
    }
    SUBCASE("masked-out rows do not contribute") {
        Tensor loss = cross_entropy(logits, targets, {false, true});
        CHECK(loss->scalar() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        backward(loss);
        for (int c = 0; c < 3; ++c) CHECK(logits->grad[c] == doctest::Approx(0.0));
    }
    SUBCASE("all-masked loss is zero") {
        Tensor loss = cross_entropy(logits, targets, {false, false});
        CHECK(loss->scalar() == doctest::Approx(0.0));
    }
    SUBCASE("gradient matches finite differences") {
        auto leaves = random_leaves({{4, 5}}, 18);
        std::vector<int> t{0, 3, 2, 4};
        std::vector<bool> m{true, false, true, true};
        check_grads(
            [&](const std::vector<Tensor>& v) { return cross_entropy(v[0], t, m); }, leaves);
    }
}

TEST_CASE("embedding_lookup gathers rows and scatter-adds gradients") {
    Tensor table = make_tensor({4, 2}, {0, 1, 2, 3, 4, 5, 6, 7}, true);
    Tensor e = embedding_lookup(table, {2, 0, 2});
    CHECK(e->shape == std::vector<int>{3, 2});
    CHECK(e->at(0, 0) == 4);
    CHECK(e->at(2, 1) == 5);

    backward(sum(multiply(e, e)));
    // row 2 used twice: d/dx sum(x^2) = 2x per use
    CHECK(table->grad[2 * 2 + 0] == doctest::Approx(2 * 4.0 * 2));
    CHECK(table->grad[0] == doctest::Approx(2 * 0.0));
    CHECK(table->grad[1] == doctest::Approx(2 * 1.0));
    CHECK(table->grad[2] == doctest::Approx(0.0));  // row 1 unused
}

TEST_CASE("concat/slice round trip and gradients") {
    auto leaves = random_leaves({{3, 2}, {3, 4}}, 19);
    Tensor cat = concat_cols({leaves[0], leaves[1]});
    CHECK(cat->shape == std::vector<int>{3, 6});
    Tensor back = slice_cols(cat, 2, 6);
    for (size_t i = 0; i < back->size(); ++i)
        CHECK((*back->data)[i] == (*leaves[1]->data)[i]);

    check_grads(
        [](const std::vector<Tensor>& v) {
            Tensor cat2 = concat_cols({v[0], v[1]});
            return sum(multiply(slice_cols(cat2, 1, 5), slice_cols(cat2, 1, 5)));
        },
        leaves);

    auto rl = random_leaves({{5, 3}}, 20);
    check_grads(
        [](const std::vector<Tensor>& v) {
            return sum(multiply(slice_rows(v[0], 1, 4), slice_rows(v[0], 1, 4)));
        },
        rl);
}

TEST_CASE("gradient accumulation across multiple backward calls") {
    Tensor x = make_tensor({1, 2}, {3.0, 4.0}, true);
    backward(sum(multiply(x, x)));
    CHECK(x->grad[0] == doctest::Approx(6.0));
    backward(sum(multiply(x, x)));
    CHECK(x->grad[0] == doctest::Approx(12.0));  // accumulates until zeroed
    zero_grads({x});
    CHECK(x->grad[0] == 0.0);
}

TEST_CASE("leaf_view shares data but keeps a private gradient") {
    Tensor p = make_tensor({1, 2}, {1.0, 2.0}, true);
    Tensor v = leaf_view(p);
    CHECK(v->data == p->data);
    backward(sum(multiply(v, v)));
    CHECK(v->grad[0] == doctest::Approx(2.0));
    CHECK((p->grad.empty() || p->grad[0] == 0.0));
}

TEST_CASE("composite attention-like graph gradient matches finite differences") {
    // q,k,v projections + softmax attention + layer norm + cross entropy;
    // exercises every op the model uses in one tape.
    auto leaves = random_leaves({{4, 6}, {6, 6}, {6, 6}, {6, 6}, {1, 6}, {1, 6}, {6, 5}}, 21);
    std::vector<int> targets{1, 0, 4, 2};
    std::vector<bool> mask{true, true, false, true};
    check_grads(
        [&](const std::vector<Tensor>& v) {
            Tensor q = matmul(v[0], v[1]);
            Tensor k = matmul(v[0], v[2]);
            Tensor val = matmul(v[0], v[3]);
            Tensor att = softmax(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(6.0)));
            Tensor mixed = add(v[0], matmul(att, val));
            Tensor normed = layer_norm(mixed, v[4], v[5]);
            Tensor logits = matmul(gelu(normed), v[6]);
            return cross_entropy(logits, targets, mask);
        },
        leaves, 1e-4);
}
