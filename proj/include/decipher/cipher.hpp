#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "decipher/rng.hpp"

namespace decipher {

struct DomainError : std::runtime_error {
    DomainError() : std::runtime_error("symbol outside permutation domain") {}
};

// A bijection on the non-boundary alphabet. mapping[i] is the ciphertext
// index of plaintext symbol i (both zero-based over the n permuted symbols).
class Permutation {
public:
    explicit Permutation(std::vector<int> mapping) : map_(std::move(mapping)) {
        std::vector<bool> seen(map_.size(), false);
        for (int m : map_) {
            if (m < 0 || m >= static_cast<int>(map_.size()) || seen[static_cast<std::size_t>(m)])
                throw std::invalid_argument("mapping is not a bijection");
            seen[static_cast<std::size_t>(m)] = true;
        }
    }

    int size() const { return static_cast<int>(map_.size()); }
    int operator()(int i) const {
        if (i < 0 || i >= size()) throw DomainError();
        return map_[static_cast<std::size_t>(i)];
    }

    Permutation inverse() const {
        std::vector<int> inv(map_.size());
        for (int i = 0; i < size(); ++i) inv[static_cast<std::size_t>(map_[static_cast<std::size_t>(i)])] = i;
        return Permutation(inv);
    }

    Eigen::MatrixXd matrix() const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size(), size());
        for (int i = 0; i < size(); ++i) p(i, map_[static_cast<std::size_t>(i)]) = 1.0;
        return p;
    }

    const std::vector<int>& mapping() const { return map_; }

    bool operator==(const Permutation& o) const { return map_ == o.map_; }

private:
    std::vector<int> map_;
};

inline Permutation random_permutation(int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("permutation size must be >= 1");
    std::vector<int> map(static_cast<std::size_t>(n));
    std::iota(map.begin(), map.end(), 0);
    Rng rng = make_rng(seed, "permutation");
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(map[static_cast<std::size_t>(i)], map[static_cast<std::size_t>(pick(rng))]);
    }
    return Permutation(map);
}

// Position-wise substitution over a boundary-bracketed sequence. The boundary
// symbol (index 0) is fixed; symbol i >= 1 maps through the permutation over
// the non-boundary alphabet.
inline std::vector<int> encipher(const std::vector<int>& x, const Permutation& perm) {
    std::vector<int> y;
    y.reserve(x.size());
    for (int s : x) {
        if (s == 0) y.push_back(0);
        else y.push_back(perm(s - 1) + 1);
    }
    return y;
}

// Row-stochastic matrix parameterized by per-row logits.
class StochasticMatrix {
public:
    explicit StochasticMatrix(Eigen::MatrixXd logits) : logits_(std::move(logits)) {}

    const Eigen::MatrixXd& logits() const { return logits_; }
    Eigen::MatrixXd& logits() { return logits_; }

    Eigen::MatrixXd matrix() const {
        Eigen::MatrixXd out(logits_.rows(), logits_.cols());
        for (int i = 0; i < logits_.rows(); ++i) {
            const double m = logits_.row(i).maxCoeff();
            Eigen::ArrayXd e = (logits_.row(i).array() - m).exp();
            out.row(i) = e / e.sum();
        }
        return out;
    }

private:
    Eigen::MatrixXd logits_;
};

namespace detail {

// Hungarian algorithm (potentials form), minimizing total cost.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1), v(static_cast<std::size_t>(n) + 1);
    std::vector<int> p(static_cast<std::size_t>(n) + 1), way(static_cast<std::size_t>(n) + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            int i0 = p[static_cast<std::size_t>(j0)], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assign(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return assign;
}

inline double assignment_weight(const Eigen::MatrixXd& w, const std::vector<int>& assign) {
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(assign.size()); ++i) s += w(i, assign[static_cast<std::size_t>(i)]);
    return s;
}

}  // namespace detail

// Maximum-weight bipartite assignment over O's entries, yielding the
// lexicographically smallest optimal bijection.
inline Permutation round_to_permutation(const Eigen::MatrixXd& O) {
    if (O.rows() != O.cols()) throw std::invalid_argument("matrix must be square");
    const int n = static_cast<int>(O.rows());
    const double best = detail::assignment_weight(O, detail::min_cost_assignment(-O));
    const double tol = 1e-9 * (1.0 + std::abs(best));

    // Fix rows one at a time to the smallest column that keeps the optimum
    // attainable on the remaining subproblem.
    std::vector<int> fixed(static_cast<std::size_t>(n), -1);
    std::vector<bool> col_used(static_cast<std::size_t>(n), false);
    double fixed_weight = 0.0;
    for (int i = 0; i < n; ++i) {
        const int m = n - i - 1;
        for (int j = 0; j < n; ++j) {
            if (col_used[static_cast<std::size_t>(j)]) continue;
            double rest = 0.0;
            if (m > 0) {
                Eigen::MatrixXd sub(m, m);
                int ri = 0;
                for (int r = i + 1; r < n; ++r, ++ri) {
                    int cj = 0;
                    for (int c = 0; c < n; ++c) {
                        if (col_used[static_cast<std::size_t>(c)] || c == j) continue;
                        sub(ri, cj++) = O(r, c);
                    }
                }
                rest = detail::assignment_weight(sub, detail::min_cost_assignment(-sub));
            }
            if (fixed_weight + O(i, j) + rest >= best - tol) {
                fixed[static_cast<std::size_t>(i)] = j;
                col_used[static_cast<std::size_t>(j)] = true;
                fixed_weight += O(i, j);
                break;
            }
        }
    }
    return Permutation(fixed);
}

}  // namespace decipher
