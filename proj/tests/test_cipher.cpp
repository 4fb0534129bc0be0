#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "decipher/cipher.hpp"
#include "decipher/symbols.hpp"

using namespace decipher;

TEST_CASE("Permutation basics") {
    CHECK_THROWS_AS(Permutation({0, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Permutation({0, 3, 1}), std::invalid_argument);

    const Permutation p({2, 0, 1});
    CHECK(p(0) == 2);
    CHECK_THROWS_AS(p(3), DomainError);
    CHECK_THROWS_AS(p(-1), DomainError);

    const Permutation inv = p.inverse();
    for (int i = 0; i < 3; ++i) CHECK(inv(p(i)) == i);

    const Eigen::MatrixXd m = p.matrix();
    CHECK(m.sum() == doctest::Approx(3.0));
    CHECK(m(0, 2) == 1.0);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(2, 1) == 1.0);
}

TEST_CASE("random_permutation is seeded and bijective") {
    const Permutation a = random_permutation(27, 11);
    const Permutation b = random_permutation(27, 11);
    const Permutation c = random_permutation(27, 12);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    std::vector<int> sorted = a.mapping();
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(27);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
}

TEST_CASE("encipher fixes the boundary and matches a worked example") {
    const auto& tab = SymbolTable::grapheme();
    // Known plain -> cipher glyph pairs; the rest filled with the unused
    // ciphertext glyphs in alphabet order.
    const std::vector<std::pair<char, char>> known{
        {'t', 'w'}, {'h', 'i'}, {'e', ' '}, {' ', 'j'}, {'c', 't'},
        {'a', 'v'}, {'s', 'p'}, {'o', 'b'}, {'n', 'h'}, {'m', 'g'}};
    const int n = tab.size() - 1;
    std::vector<int> map(static_cast<std::size_t>(n), -1);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (auto [p, c] : known) {
        map[static_cast<std::size_t>(tab.index(p) - 1)] = tab.index(c) - 1;
        used[static_cast<std::size_t>(tab.index(c) - 1)] = true;
    }
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (map[static_cast<std::size_t>(i)] != -1) continue;
        while (used[static_cast<std::size_t>(next)]) ++next;
        map[static_cast<std::size_t>(i)] = next;
        used[static_cast<std::size_t>(next)] = true;
    }
    const Permutation perm(map);

    const auto x = tab.normalize("the cat sat on the mat");
    const auto y = encipher(x, perm);
    CHECK(y.front() == 0);
    CHECK(y.back() == 0);
    CHECK(tab.to_string(y) == "wi jtvwjpvwjbhjwi jgvw");

    // Deciphering with the inverse restores the plaintext.
    CHECK(encipher(y, perm.inverse()) == x);
}

TEST_CASE("StochasticMatrix softmax") {
    Eigen::MatrixXd logits(2, 3);
    logits << 0.0, 1.0, -1.0, 5.0, 5.0, 5.0;
    const StochasticMatrix sm(logits);
    const Eigen::MatrixXd m = sm.matrix();
    CHECK(m.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK((m.array() > 0.0).all());

    // Shift invariance: adding a constant to a row changes nothing.
    Eigen::MatrixXd shifted = logits;
    shifted.row(0).array() += 100.0;
    CHECK((StochasticMatrix(shifted).matrix() - m).cwiseAbs().maxCoeff() < 1e-12);
}

namespace {

double brute_best(const Eigen::MatrixXd& w) {
    std::vector<int> perm(static_cast<std::size_t>(w.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1e300;
    do {
        double s = 0.0;
        for (int i = 0; i < w.rows(); ++i) s += w(i, perm[static_cast<std::size_t>(i)]);
        best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("round_to_permutation agrees with brute force on random matrices") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd w(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) w(i, j) = gauss(rng);
        const Permutation p = round_to_permutation(w);
        double got = 0.0;
        for (int i = 0; i < 5; ++i) got += w(i, p(i));
        CHECK(got == doctest::Approx(brute_best(w)).epsilon(1e-9));
    }
}

TEST_CASE("round_to_permutation recovers a noised permutation matrix") {
    const Permutation truth = random_permutation(8, 3);
    Eigen::MatrixXd w = truth.matrix();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 0.1);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) w(i, j) += gauss(rng);
    CHECK(round_to_permutation(w) == truth);
}

TEST_CASE("round_to_permutation breaks ties lexicographically") {
    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 4, 0.25);
    CHECK(round_to_permutation(flat) == Permutation({0, 1, 2, 3}));

    // Two optimal assignments: (0->1, 1->0) and (0->0, 1->1) both score 2.
    Eigen::MatrixXd tied(2, 2);
    tied << 1.0, 1.0, 1.0, 1.0;
    CHECK(round_to_permutation(tied) == Permutation({0, 1}));

    // Greedy row-argmax would pick 0->0 then be forced into a worse total.
    Eigen::MatrixXd trap(2, 2);
    trap << 0.6, 0.5, 0.55, 0.0;
    CHECK(round_to_permutation(trap) == Permutation({1, 0}));

    CHECK_THROWS_AS(round_to_permutation(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}
