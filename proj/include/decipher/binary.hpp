#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "decipher/grad.hpp"

namespace decipher {

struct TooLarge : std::runtime_error {
    TooLarge() : std::runtime_error("enumeration length exceeds tractability guard") {}
};

// Rank-deficient B: O is only constrained to the line eta*b0 + zeta*b1 = c0.
struct NonIdentifiable : std::runtime_error {
    NonIdentifiable(double b0, double b1, double c0)
        : std::runtime_error("B is rank one; any (eta, zeta) with eta*" + std::to_string(b0) +
                             " + zeta*" + std::to_string(b1) + " = " + std::to_string(c0) +
                             " matches the marginal"),
          b0(b0), b1(b1), c0(c0) {}
    double b0, b1, c0;
};

// Stationary 2x2 joint distribution of adjacent symbols, optionally with a
// trigram tensor.
struct BinaryMarkov {
    Eigen::Matrix2d B;
    Eigen::Vector2d b;
    std::array<double, 8> trigram{};  // [i*4 + j*2 + k]
    bool has_trigram = false;

    explicit BinaryMarkov(const Eigen::Matrix2d& joint) : B(joint) {
        b = B.rowwise().sum();
        const Eigen::Vector2d col = B.colwise().sum();
        if ((b - col).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("B is not stationary (B1 != B^T 1)");
        if (b(0) <= 0.0 || b(1) <= 0.0)
            throw std::invalid_argument("stationary unigram must be strictly positive");
    }

    // Markov closure: B_ijk = B_ij B_jk / b_j.
    void fill_markov_trigram() {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    trigram[static_cast<std::size_t>(i * 4 + j * 2 + k)] = B(i, j) * B(j, k) / b(j);
        has_trigram = true;
    }

    double tri(int i, int j, int k) const {
        return trigram[static_cast<std::size_t>(i * 4 + j * 2 + k)];
    }
};

struct BinaryDecoder {
    double eta, zeta;

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d o;
        o << eta, 1.0 - eta, zeta, 1.0 - zeta;
        return o;
    }
};

inline constexpr double kFullRankDet = 1e-12;

// The closed-form candidate decoders O = 1 c^T +/- d [[b1,-b1],[-b0,b0]].
// Since C = c c^T + d^2 (bperp^T B bperp) [[1,-1],[-1,1]] and bperp^T B bperp
// equals det(B) for stationary 2x2 B, the offset is d = sqrt(det(C)/det(B)).
// Candidates with an entry outside [0,1] or failing to reproduce C are
// discarded.
inline std::vector<BinaryDecoder> candidate_solutions(const BinaryMarkov& prior,
                                                      const Eigen::Matrix2d& C) {
    const double det_b = prior.B.determinant();
    const double c0 = C.rowwise().sum()(0);
    if (std::abs(det_b) <= kFullRankDet)
        throw NonIdentifiable(prior.b(0), prior.b(1), c0);

    const double det_o = std::sqrt(std::max(0.0, C.determinant() / det_b));
    std::vector<BinaryDecoder> out;
    for (double s : {+1.0, -1.0}) {
        BinaryDecoder cand{c0 + s * det_o * prior.b(1), c0 - s * det_o * prior.b(0)};
        const double lo = std::min(cand.eta, cand.zeta);
        const double hi = std::max(std::max(cand.eta, cand.zeta),
                                   std::max(1.0 - cand.eta, 1.0 - cand.zeta));
        if (lo < -1e-10 || hi > 1.0 + 1e-10) continue;
        const Eigen::Matrix2d o = cand.matrix();
        if ((o.transpose() * prior.B * o - C).cwiseAbs().maxCoeff() >= 1e-8) continue;
        if (!out.empty() && std::abs(out[0].eta - cand.eta) < 1e-12 &&
            std::abs(out[0].zeta - cand.zeta) < 1e-12)
            continue;  // the two candidates coincide when det(O_T) = 0
        out.push_back(cand);
    }
    return out;
}

// The scalar sum_{ijk} B_ijk (b_perp)_i (b_perp)_j (b_perp)_k with
// b_perp = [-b1, b0]. Nonzero means trigrams discriminate the two bigram
// candidates; for a Markovian prior this is equivalent to b0 != 1/2.
inline double trigram_condition(const std::array<double, 8>& trigram, const Eigen::Vector2d& b) {
    const double bp[2] = {-b(1), b(0)};
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                s += trigram[static_cast<std::size_t>(i * 4 + j * 2 + k)] * bp[i] * bp[j] * bp[k];
    return s;
}

// Exact p(y) over all 2^length observation sequences by full enumeration
// over x. Brute-force oracle for the matrix and tensor formulas.
inline std::vector<double> enumerate_marginal(const BinaryMarkov& prior,
                                              const BinaryDecoder& decoder, int length) {
    if (length < 1 || length > 12) throw TooLarge();
    const Eigen::Matrix2d O = decoder.matrix();
    // Transition probabilities of the stationary chain.
    Eigen::Matrix2d trans;
    for (int i = 0; i < 2; ++i) trans.row(i) = prior.B.row(i) / prior.b(i);

    const std::size_t total = std::size_t{1} << length;
    std::vector<double> py(total, 0.0);
    for (std::size_t xm = 0; xm < total; ++xm) {
        double px = prior.b((xm >> (length - 1)) & 1);
        for (int t = length - 2; t >= 0; --t)
            px *= trans((xm >> (t + 1)) & 1, (xm >> t) & 1);
        for (std::size_t ym = 0; ym < total; ++ym) {
            double pyx = 1.0;
            for (int t = 0; t < length; ++t)
                pyx *= O((xm >> t) & 1, (ym >> t) & 1);
            py[ym] += px * pyx;
        }
    }
    return py;
}

enum class StationaryKind { saddle, minimum, maximum, degenerate };

struct StationaryPoint {
    double eta, zeta;
    double grad_norm;
    StationaryKind kind;
};

namespace detail {

inline double binary_bigram_loss(const BinaryMarkov& prior, const Eigen::Matrix2d& C,
                                 double eta, double zeta) {
    return bigram_loss(BinaryDecoder{eta, zeta}.matrix(), prior.B, C);
}

}  // namespace detail

// The unigram point (c0, c0) plus the valid closed-form candidates, each
// classified by the finite-difference Hessian of the bigram loss in (eta, zeta).
inline std::vector<StationaryPoint> stationary_points(const BinaryMarkov& prior,
                                                      const Eigen::Matrix2d& C) {
    const double c0 = C.rowwise().sum()(0);
    std::vector<BinaryDecoder> points{{c0, c0}};
    for (const auto& cand : candidate_solutions(prior, C)) {
        if (std::abs(cand.eta - c0) < 1e-9 && std::abs(cand.zeta - c0) < 1e-9) continue;
        points.push_back(cand);
    }

    const double h = 1e-5;
    std::vector<StationaryPoint> out;
    for (const auto& p : points) {
        auto l = [&](double de, double dz) {
            return detail::binary_bigram_loss(prior, C, p.eta + de, p.zeta + dz);
        };
        const double ge = (l(h, 0) - l(-h, 0)) / (2 * h);
        const double gz = (l(0, h) - l(0, -h)) / (2 * h);
        const double l0 = l(0, 0);
        const double hee = (l(h, 0) - 2 * l0 + l(-h, 0)) / (h * h);
        const double hzz = (l(0, h) - 2 * l0 + l(0, -h)) / (h * h);
        const double hez = (l(h, h) - l(h, -h) - l(-h, h) + l(-h, -h)) / (4 * h * h);
        const double det = hee * hzz - hez * hez;
        const double tr = hee + hzz;
        StationaryKind kind;
        const double scale = std::max({std::abs(hee), std::abs(hzz), std::abs(hez), 1.0});
        if (std::abs(det) < 1e-6 * scale * scale) kind = StationaryKind::degenerate;
        else if (det < 0) kind = StationaryKind::saddle;
        else kind = tr > 0 ? StationaryKind::minimum : StationaryKind::maximum;
        out.push_back({p.eta, p.zeta, std::sqrt(ge * ge + gz * gz), kind});
    }
    return out;
}

}  // namespace decipher
