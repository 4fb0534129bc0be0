#include <doctest.h>

#include <Eigen/Dense>

#include <fstream>
#include <random>

#include "decipher/cipher.hpp"
#include "decipher/ngram.hpp"
#include "decipher/svd.hpp"
#include "decipher/symbols.hpp"

using namespace decipher;

namespace {

// A positive joint table with (almost surely) distinct singular values.
Eigen::MatrixXd random_joint(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = std::exp(gauss(rng));
    return b / b.sum();
}

}  // namespace

TEST_CASE("recover_svd inverts an exact permutation cipher") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const int n = 6;
        const Eigen::MatrixXd B = random_joint(n, seed);
        const Permutation truth = random_permutation(n, seed + 100);
        const Eigen::MatrixXd P = truth.matrix();
        const Eigen::MatrixXd C = P.transpose() * B * P;

        const SvdRecovery rec = recover_svd(B, C);
        CHECK((rec.O - P).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((rec.O_alt - P).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(rec.route_disagreement < 1e-8);
        CHECK_FALSE(rec.degenerate_warning);
        CHECK(round_to_permutation(rec.blended()) == truth);
    }
}

TEST_CASE("recover_svd reports singular values of B in descending order") {
    const Eigen::MatrixXd B = random_joint(5, 7);
    const Eigen::MatrixXd C = B;  // identity cipher
    const SvdRecovery rec = recover_svd(B, C);
    for (int k = 0; k + 1 < 5; ++k)
        CHECK(rec.singular_values(k) >= rec.singular_values(k + 1));
    const Eigen::VectorXd ref =
        Eigen::JacobiSVD<Eigen::MatrixXd>(B).singularValues();
    CHECK((rec.singular_values - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate spectra throw unless lenient") {
    // Equal singular values: a scaled identity joint.
    const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(4, 4) / 4.0;
    CHECK_THROWS_AS(recover_svd(B, B), DegenerateSpectrum);

    const SvdRecovery rec = recover_svd(B, B, /*lenient=*/true);
    CHECK(rec.degenerate_warning);
    CHECK(rec.min_rel_gap < 1e-6);

    // Rank deficiency also counts as degenerate.
    Eigen::MatrixXd low = Eigen::MatrixXd::Zero(3, 3);
    low(0, 0) = 0.5;
    low(1, 1) = 0.5;
    CHECK_THROWS_AS(recover_svd(low, low), DegenerateSpectrum);

    CHECK_THROWS_AS(recover_svd(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 3)),
                    std::invalid_argument);
}

TEST_CASE("blended rounding survives sampling noise") {
    const int n = 6;
    const Eigen::MatrixXd B = random_joint(n, 21);
    const Permutation truth = random_permutation(n, 22);
    const Eigen::MatrixXd P = truth.matrix();
    Eigen::MatrixXd C = P.transpose() * B * P;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> gauss(0.0, 1e-4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) C(i, j) = std::max(1e-12, C(i, j) + gauss(rng));
    C /= C.sum();

    const SvdRecovery rec = recover_svd(B, C, /*lenient=*/true);
    CHECK(round_to_permutation(rec.blended()) == truth);
}

TEST_CASE("sign_match falls back to the column inner product") {
    // Column orthogonal to 1: the ones-projection is useless, the direct
    // inner product decides the sign.
    Eigen::MatrixXd u(2, 1);
    u << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    CHECK(sign_match(u, u)(0) == 1.0);
    CHECK(sign_match(u, -u)(0) == -1.0);

    Eigen::MatrixXd w(2, 1);
    w << 1.0, 0.0;
    CHECK(sign_match(w, w)(0) == 1.0);
    CHECK(sign_match(w, -w)(0) == -1.0);
}

TEST_CASE("full-alphabet recovery from corpus statistics") {
    const auto& tab = SymbolTable::grapheme();
    std::ifstream in(std::string(DECIPHER_DATA_DIR) + "/corpus.txt");
    REQUIRE(in.good());
    std::vector<std::vector<int>> seqs;
    std::string line;
    while (std::getline(in, line)) seqs.push_back(tab.normalize(line));
    const auto [B, u] = strip_boundary(accumulate_ngrams(seqs, tab.size(), 2));

    const Permutation truth = random_permutation(tab.size() - 1, 41);
    const Eigen::MatrixXd P = truth.matrix();
    const Eigen::MatrixXd C = P.transpose() * B * P;
    const SvdRecovery rec = recover_svd(B, C, /*lenient=*/true);
    CHECK(round_to_permutation(rec.blended()) == truth);
}
