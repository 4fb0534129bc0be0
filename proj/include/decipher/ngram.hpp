#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "decipher/rng.hpp"

namespace decipher {

struct EmptyCorpus : std::runtime_error {
    EmptyCorpus() : std::runtime_error("empty corpus") {}
};

struct InfiniteKL : std::runtime_error {
    InfiniteKL() : std::runtime_error("KL divergence is infinite: Q has zero mass where P > 0") {}
};

// Empirical n-gram frequency tables over boundary-padded sequences.
// All tables are normalized; lower orders are marginals of the highest order
// counted, so the trigram -> bigram -> unigram chain is exact by construction.
struct NGramStats {
    int alphabet = 0;
    int order = 1;
    Eigen::VectorXd unigram;
    Eigen::MatrixXd bigram;           // empty if order < 2
    std::vector<double> trigram;      // flat [i*n*n + j*n + k], empty if order < 3
    std::int64_t token_count = 0;     // body tokens, boundaries excluded

    double trigram_at(int i, int j, int k) const {
        return trigram[static_cast<std::size_t>((i * alphabet + j) * alphabet + k)];
    }
};

// Sequences must already be boundary-bracketed (as produced by
// SymbolTable::normalize). For order 3 one extra boundary is added at each
// end so that the trigram's bigram marginal stays consistent with edge pairs.
inline NGramStats accumulate_ngrams(const std::vector<std::vector<int>>& sequences,
                                    int alphabet, int max_order) {
    if (max_order < 1 || max_order > 3)
        throw std::invalid_argument("max_order must be in 1..3");
    if (sequences.empty()) throw EmptyCorpus();

    NGramStats stats;
    stats.alphabet = alphabet;
    stats.order = max_order;
    const int n = alphabet;

    std::vector<double> counts;
    if (max_order == 1) counts.assign(static_cast<std::size_t>(n), 0.0);
    else if (max_order == 2) counts.assign(static_cast<std::size_t>(n) * n, 0.0);
    else counts.assign(static_cast<std::size_t>(n) * n * n, 0.0);

    double total = 0.0;
    for (const auto& seq : sequences) {
        for (int s : seq)
            if (s < 0 || s >= n) throw std::out_of_range("symbol index out of alphabet");
        std::vector<int> eff = seq;
        if (max_order == 3) {
            eff.insert(eff.begin(), 0);
            eff.push_back(0);
        }
        const int len = static_cast<int>(eff.size());
        if (len < max_order) continue;
        for (int t = 0; t + max_order <= len; ++t) {
            std::size_t idx = static_cast<std::size_t>(eff[static_cast<std::size_t>(t)]);
            for (int k = 1; k < max_order; ++k)
                idx = idx * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(eff[static_cast<std::size_t>(t + k)]);
            counts[idx] += 1.0;
            total += 1.0;
        }
        for (int s : seq)
            if (s != 0) ++stats.token_count;
    }
    if (total <= 0.0) throw EmptyCorpus();
    for (double& c : counts) c /= total;

    if (max_order == 3) {
        stats.trigram = counts;
        stats.bigram.setZero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    stats.bigram(i, j) += stats.trigram_at(i, j, k);
    } else if (max_order == 2) {
        stats.bigram = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(counts.data(), n, n);
    }
    if (max_order >= 2) {
        stats.unigram = stats.bigram.rowwise().sum();
    } else {
        stats.unigram = Eigen::Map<Eigen::VectorXd>(counts.data(), n);
    }
    return stats;
}

// KL(P.bigram || Q) in nats.
inline double bigram_kl(const NGramStats& p, const Eigen::MatrixXd& q) {
    double kl = 0.0;
    for (int i = 0; i < p.bigram.rows(); ++i) {
        for (int j = 0; j < p.bigram.cols(); ++j) {
            const double pij = p.bigram(i, j);
            if (pij <= 0.0) continue;
            const double qij = q(i, j);
            if (qij <= 0.0) throw InfiniteKL();
            kl += pij * std::log(pij / qij);
        }
    }
    return kl < 0.0 && kl > -1e-15 ? 0.0 : kl;
}

// Conditions bigram stats on both symbols being non-boundary. The cipher
// solvers learn O over the non-boundary alphabet, so their B and C inputs
// come through here.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> strip_boundary(const NGramStats& stats) {
    const int n = stats.alphabet - 1;
    Eigen::MatrixXd b = stats.bigram.block(1, 1, n, n);
    b /= b.sum();
    const Eigen::VectorXd u = 0.5 * (b.rowwise().sum() + b.colwise().sum().transpose());
    return {b, u};
}

// The alpha/beta/gamma corpus partition.
struct DataSplit {
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0 || std::abs(alpha + beta + gamma - 1.0) > 1e-12)
            throw std::invalid_argument("split weights must be nonnegative and sum to 1");
    }
};

struct SplitBuckets {
    std::vector<std::size_t> x_only, y_only, paired;
};

// Assigns each utterance index to exactly one bucket via a seeded draw.
inline SplitBuckets split_corpus(std::size_t n_utterances, const DataSplit& split) {
    split.validate();
    SplitBuckets buckets;
    Rng rng = make_rng(split.seed, "split");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n_utterances; ++i) {
        const double u = unif(rng);
        if (u < split.alpha) buckets.x_only.push_back(i);
        else if (u < split.alpha + split.beta) buckets.y_only.push_back(i);
        else buckets.paired.push_back(i);
    }
    return buckets;
}

}  // namespace decipher
