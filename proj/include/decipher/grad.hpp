#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "decipher/cipher.hpp"
#include "decipher/ngram.hpp"
#include "decipher/rng.hpp"

namespace decipher {

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(int step)
        : std::runtime_error("non-finite loss at step " + std::to_string(step)), step(step) {}
    int step;
};

struct EmptyReference : std::runtime_error {
    EmptyReference() : std::runtime_error("empty reference sequence") {}
};

constexpr double kLogEps = 1e-9;  // smoothing inside logs; unseen bigrams must not yield -inf

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

inline double entropy(const Eigen::MatrixXd& p) {
    double h = 0.0;
    for (int i = 0; i < p.rows(); ++i)
        for (int j = 0; j < p.cols(); ++j)
            if (p(i, j) > 0.0) h -= p(i, j) * std::log(p(i, j));
    return h;
}

// Bigram cross-entropy -sum_{p,q} C_pq log([O^T B O]_pq).
// Equals bigram_kl(C, O^T B O) plus the entropy of C.
inline double bigram_loss(const Eigen::MatrixXd& O, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& C) {
    const Eigen::MatrixXd D = (O.transpose() * B * O).array() + kLogEps;
    return -(C.array() * D.array().log()).sum();
}

// Loss plus gradient with respect to the row-softmax logits of O.
inline double bigram_loss_grad(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& C, Eigen::MatrixXd& grad_logits) {
    const Eigen::MatrixXd O = softmax_rows(logits);
    const Eigen::MatrixXd D = (O.transpose() * B * O).array() + kLogEps;
    const double loss = -(C.array() * D.array().log()).sum();

    const Eigen::MatrixXd G = -(C.array() / D.array());              // dL/dD
    const Eigen::MatrixXd dO = B * O * G.transpose() + B.transpose() * O * G;
    grad_logits.resize(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        const double dot = dO.row(i).dot(O.row(i));
        grad_logits.row(i) = O.row(i).array() * (dO.row(i).array() - dot);
    }
    return loss;
}

// O = 1 c^T in logit space plus N(0, perturb_scale^2) noise to break the
// symmetry of this stationary point.
inline Eigen::MatrixXd unigram_init(const Eigen::VectorXd& c, double perturb_scale,
                                    std::uint64_t seed) {
    const int n = static_cast<int>(c.size());
    Eigen::MatrixXd logits(n, n);
    for (int i = 0; i < n; ++i)
        logits.row(i) = c.array().max(1e-300).log().transpose();
    if (perturb_scale > 0.0) {
        Rng rng = make_rng(seed, "init");
        std::normal_distribution<double> noise(0.0, perturb_scale);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) logits(i, j) += noise(rng);
    }
    return logits;
}

// Adam with bias correction, operating on a flat parameter matrix.
class Adam {
public:
    Adam(double lr, int rows, int cols, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          m_(Eigen::MatrixXd::Zero(rows, cols)), v_(Eigen::MatrixXd::Zero(rows, cols)) {}

    void step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad) {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square();
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    Eigen::MatrixXd m_, v_;
};

struct SolverConfig {
    double perturb_scale = 0.01;
    double sgd_lr = 10.0;
    int sgd_steps = 500;
    double adam_lr = 0.01;
    int adam_steps = 2000;
    double success_kl_threshold = 1e-2;
    std::uint64_t seed = 0;

    void validate() const {
        if (sgd_lr <= 0 || adam_lr <= 0) throw std::invalid_argument("learning rates must be > 0");
        if (sgd_steps < 0 || adam_steps < 0) throw std::invalid_argument("steps must be >= 0");
    }
};

struct RunReport {
    double final_loss = 0.0;
    double bigram_kl = 0.0;
    double error_rate = -1.0;  // filled by the caller when eval text is available
    std::vector<double> loss_trace;
    bool succeeded = false;
};

// Normalized bigram table of each utterance separately, conditioned on both
// symbols being non-boundary (rows/cols indexed over the non-boundary
// alphabet). Utterances with no interior bigram are dropped.
inline std::vector<Eigen::MatrixXd> utterance_bigram_tables(
    const std::vector<std::vector<int>>& sequences, int alphabet) {
    std::vector<Eigen::MatrixXd> tables;
    tables.reserve(sequences.size());
    const int n = alphabet - 1;
    for (const auto& seq : sequences) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t t = 0; t + 1 < seq.size(); ++t)
            if (seq[t] != 0 && seq[t + 1] != 0) m(seq[t] - 1, seq[t + 1] - 1) += 1.0;
        const double total = m.sum();
        if (total > 0.0) tables.push_back(m / total);
    }
    return tables;
}

// Gradient-descent decipherment: a first phase of gradient descent to reach
// the right region, then Adam to converge to the precise local optimum. When
// per-utterance ciphertext bigram tables are supplied, the first phase is
// stochastic: each step descends on the bigram table of one randomly drawn
// utterance. This structured gradient noise escapes the shallow local optima
// (most prominently the vowel/consonant-swap basin) far more reliably than
// full-batch descent, which only randomizes through the initialization.
inline std::pair<RunReport, StochasticMatrix> solve(
    const Eigen::MatrixXd& B, const Eigen::MatrixXd& C, const SolverConfig& config,
    const std::vector<Eigen::MatrixXd>* utterances = nullptr) {
    config.validate();
    if (utterances != nullptr && utterances->empty())
        throw std::invalid_argument("utterance table list must be non-empty when given");
    const Eigen::VectorXd c = C.colwise().sum();  // ciphertext unigram frequencies
    Eigen::MatrixXd logits = unigram_init(c, config.perturb_scale, config.seed);
    Eigen::MatrixXd grad;

    Rng rng = make_rng(config.seed, "sgd");
    std::uniform_int_distribution<std::size_t> draw(
        0, utterances == nullptr ? 0 : utterances->size() - 1);

    RunReport report;
    report.loss_trace.reserve(static_cast<std::size_t>(config.sgd_steps + config.adam_steps));
    for (int s = 0; s < config.sgd_steps; ++s) {
        const Eigen::MatrixXd& target = utterances == nullptr ? C : (*utterances)[draw(rng)];
        const double loss = bigram_loss_grad(logits, B, target, grad);
        if (!std::isfinite(loss)) throw DivergenceError(s);
        report.loss_trace.push_back(utterances == nullptr ? loss : bigram_loss(softmax_rows(logits), B, C));
        logits -= config.sgd_lr * grad;
    }
    Adam adam(config.adam_lr, static_cast<int>(logits.rows()), static_cast<int>(logits.cols()));
    for (int s = 0; s < config.adam_steps; ++s) {
        const double loss = bigram_loss_grad(logits, B, C, grad);
        if (!std::isfinite(loss)) throw DivergenceError(config.sgd_steps + s);
        report.loss_trace.push_back(loss);
        adam.step(logits, grad);
    }

    StochasticMatrix O(logits);
    report.final_loss = bigram_loss(O.matrix(), B, C);
    const Eigen::MatrixXd D = (O.matrix().transpose() * B * O.matrix()).array() + kLogEps;
    NGramStats cs;
    cs.bigram = C;
    report.bigram_kl = bigram_kl(cs, D);
    report.succeeded = report.bigram_kl < config.success_kl_threshold;
    return {report, O};
}

// Per-symbol MAP decode: x_t = argmax_i b_i O_{i, y_t}; boundary is fixed.
inline std::vector<int> decode(const std::vector<int>& y, const Eigen::MatrixXd& O,
                               const Eigen::VectorXd& b) {
    std::vector<int> x;
    x.reserve(y.size());
    for (int obs : y) {
        if (obs == 0) {
            x.push_back(0);
            continue;
        }
        int best = 0;
        double best_score = -1.0;
        for (int i = 0; i < O.rows(); ++i) {
            const double score = b(i) * O(i, obs - 1);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        x.push_back(best + 1);
    }
    return x;
}

// Levenshtein distance divided by reference length.
inline double error_rate(const std::vector<int>& hyp, const std::vector<int>& ref) {
    if (ref.empty()) throw EmptyReference();
    const std::size_t n = hyp.size(), m = ref.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(m);
}

}  // namespace decipher
