#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "decipher/binary.hpp"

using namespace decipher;

namespace {

// Stationary joint of a two-state chain from (p01, p10) flip probabilities.
Eigen::Matrix2d chain_joint(double p01, double p10) {
    const double pi0 = p10 / (p01 + p10);
    Eigen::Matrix2d B;
    B << pi0 * (1 - p01), pi0 * p01, (1 - pi0) * p10, (1 - pi0) * (1 - p10);
    return B;
}

Eigen::Matrix2d observed(const BinaryMarkov& prior, const BinaryDecoder& d) {
    const Eigen::Matrix2d O = d.matrix();
    return O.transpose() * prior.B * O;
}

}  // namespace

TEST_CASE("BinaryMarkov validates stationarity") {
    CHECK_NOTHROW(BinaryMarkov(chain_joint(0.3, 0.2)));

    Eigen::Matrix2d bad;
    bad << 0.5, 0.2, 0.1, 0.2;  // row marginal (0.7, 0.3) vs column (0.6, 0.4)
    CHECK_THROWS_AS((BinaryMarkov(bad)), std::invalid_argument);

    Eigen::Matrix2d degenerate;
    degenerate << 1.0, 0.0, 0.0, 0.0;
    CHECK_THROWS_AS((BinaryMarkov(degenerate)), std::invalid_argument);
}

TEST_CASE("fill_markov_trigram matches enumeration of the chain") {
    BinaryMarkov prior(chain_joint(0.3, 0.2));
    prior.fill_markov_trigram();
    double sum = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                // Independent oracle: pi_i P(j|i) P(k|j).
                const double expected =
                    prior.b(i) * (prior.B(i, j) / prior.b(i)) * (prior.B(j, k) / prior.b(j));
                CHECK(prior.tri(i, j, k) == doctest::Approx(expected).epsilon(1e-12));
                sum += prior.tri(i, j, k);
            }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("candidate_solutions returns the truth and its mirror") {
    const BinaryMarkov prior(chain_joint(0.35, 0.15));
    const BinaryDecoder truth{0.8, 0.3};
    const Eigen::Matrix2d C = observed(prior, truth);

    const auto cands = candidate_solutions(prior, C);
    REQUIRE(cands.size() == 2);
    const bool truth_found = std::any_of(cands.begin(), cands.end(), [&](const BinaryDecoder& d) {
        return std::abs(d.eta - truth.eta) < 1e-9 && std::abs(d.zeta - truth.zeta) < 1e-9;
    });
    CHECK(truth_found);
    // Both candidates reproduce C exactly.
    for (const auto& d : cands)
        CHECK((observed(prior, d) - C).cwiseAbs().maxCoeff() < 1e-10);
    // The mirror is the reflection through the unigram point.
    const double c0 = C.rowwise().sum()(0);
    CHECK(cands[0].eta + cands[1].eta == doctest::Approx(2 * c0).epsilon(1e-9));
    CHECK(cands[0].zeta + cands[1].zeta == doctest::Approx(2 * c0).epsilon(1e-9));
}

TEST_CASE("candidates collapse when the decoder loses rank") {
    const BinaryMarkov prior(chain_joint(0.35, 0.15));
    const BinaryDecoder constant{0.6, 0.6};  // det(O_T) = 0
    const Eigen::Matrix2d C = observed(prior, constant);
    const auto cands = candidate_solutions(prior, C);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].eta == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(cands[0].zeta == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("candidates outside [0,1] are discarded") {
    // Skewed prior (b0 = 0.8) with a near-deterministic decoder: the mirrored
    // candidate is (0.59, 1.49), outside the unit square.
    const BinaryMarkov prior(chain_joint(0.1, 0.4));
    const BinaryDecoder truth{0.95, 0.05};
    const Eigen::Matrix2d C = observed(prior, truth);
    const auto cands = candidate_solutions(prior, C);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].eta == doctest::Approx(truth.eta).epsilon(1e-9));
    CHECK(cands[0].zeta == doctest::Approx(truth.zeta).epsilon(1e-9));
}

TEST_CASE("rank-one B is non-identifiable") {
    Eigen::Matrix2d iid;  // independent symbols: B = b b^T, det = 0
    iid << 0.36, 0.24, 0.24, 0.16;
    const BinaryMarkov prior(iid);
    const Eigen::Matrix2d C = observed(prior, BinaryDecoder{0.9, 0.2});
    CHECK_THROWS_AS(candidate_solutions(prior, C), NonIdentifiable);
    try {
        candidate_solutions(prior, C);
    } catch (const NonIdentifiable& e) {
        CHECK(e.b0 == doctest::Approx(0.6));
        CHECK(e.c0 == doctest::Approx(C.rowwise().sum()(0)));
    }
}

TEST_CASE("trigram condition is b0 != 1/2 for Markov priors") {
    BinaryMarkov skew(chain_joint(0.3, 0.2));  // b0 = 0.4
    skew.fill_markov_trigram();
    CHECK(std::abs(trigram_condition(skew.trigram, skew.b)) > 1e-6);

    BinaryMarkov sym(chain_joint(0.3, 0.3));  // b0 = 1/2 by symmetry
    sym.fill_markov_trigram();
    CHECK(std::abs(trigram_condition(sym.trigram, sym.b)) < 1e-12);

    // Direct check of the closed form: the condition scalar equals
    // sum_ijk pi_i P_ij P_jk bp_i bp_j bp_k with bp = (-b1, b0).
    const double b0 = skew.b(0), b1 = skew.b(1);
    const double bp[2] = {-b1, b0};
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) s += skew.tri(i, j, k) * bp[i] * bp[j] * bp[k];
    CHECK(trigram_condition(skew.trigram, skew.b) == doctest::Approx(s));
}

TEST_CASE("trigram marginals separate the two bigram-equivalent decoders") {
    BinaryMarkov prior(chain_joint(0.3, 0.2));  // b0 != 1/2
    prior.fill_markov_trigram();
    const BinaryDecoder truth{0.85, 0.25};
    const Eigen::Matrix2d C = observed(prior, truth);
    const auto cands = candidate_solutions(prior, C);
    REQUIRE(cands.size() == 2);

    const auto py0 = enumerate_marginal(prior, cands[0], 3);
    const auto py1 = enumerate_marginal(prior, cands[1], 3);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < py0.size(); ++i)
        max_diff = std::max(max_diff, std::abs(py0[i] - py1[i]));
    CHECK(max_diff > 1e-6);

    // With b0 = 1/2 even the trigram marginal cannot tell them apart.
    BinaryMarkov sym(chain_joint(0.3, 0.3));
    sym.fill_markov_trigram();
    const Eigen::Matrix2d Cs = observed(sym, truth);
    const auto scands = candidate_solutions(sym, Cs);
    REQUIRE(scands.size() == 2);
    const auto sy0 = enumerate_marginal(sym, scands[0], 3);
    const auto sy1 = enumerate_marginal(sym, scands[1], 3);
    for (std::size_t i = 0; i < sy0.size(); ++i)
        CHECK(sy0[i] == doctest::Approx(sy1[i]).epsilon(1e-10));
}

TEST_CASE("enumerate_marginal is a distribution and respects bigram identity") {
    BinaryMarkov prior(chain_joint(0.25, 0.4));
    const BinaryDecoder d{0.7, 0.2};
    const auto py = enumerate_marginal(prior, d, 2);
    double sum = 0.0;
    for (double v : py) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // Length-2 enumeration equals O^T B O entrywise (bit length-1-t is
    // position t, so mask y1*2 + y0... check against the joint directly).
    const Eigen::Matrix2d C = observed(prior, d);
    CHECK(py[0] == doctest::Approx(C(0, 0)).epsilon(1e-12));
    CHECK(py[1] == doctest::Approx(C(0, 1)).epsilon(1e-12));
    CHECK(py[2] == doctest::Approx(C(1, 0)).epsilon(1e-12));
    CHECK(py[3] == doctest::Approx(C(1, 1)).epsilon(1e-12));

    CHECK_THROWS_AS(enumerate_marginal(prior, d, 0), TooLarge);
    CHECK_THROWS_AS(enumerate_marginal(prior, d, 13), TooLarge);
}

TEST_CASE("stationary point census: saddle at unigram, minima at candidates") {
    const BinaryMarkov prior(chain_joint(0.35, 0.15));
    const BinaryDecoder truth{0.8, 0.3};
    const Eigen::Matrix2d C = observed(prior, truth);

    const auto pts = stationary_points(prior, C);
    REQUIRE(pts.size() == 3);
    for (const auto& p : pts) CHECK(p.grad_norm < 1e-5);

    int saddles = 0, minima = 0;
    for (const auto& p : pts) {
        if (p.kind == StationaryKind::saddle) {
            ++saddles;
            const double c0 = C.rowwise().sum()(0);
            CHECK(p.eta == doctest::Approx(c0).epsilon(1e-9));
            CHECK(p.zeta == doctest::Approx(c0).epsilon(1e-9));
        }
        if (p.kind == StationaryKind::minimum) ++minima;
    }
    CHECK(saddles == 1);
    CHECK(minima == 2);
}

TEST_CASE("rank-deficient decoder leaves only the unigram stationary point") {
    const BinaryMarkov prior(chain_joint(0.35, 0.15));
    const Eigen::Matrix2d C = observed(prior, BinaryDecoder{0.6, 0.6});
    const auto pts = stationary_points(prior, C);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].eta == doctest::Approx(0.6).epsilon(1e-9));
}
