#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "decipher/grad.hpp"
#include "decipher/rng.hpp"

namespace decipher {

using Sequence = std::vector<int>;  // body symbols 1..n; 0 is the boundary

enum class DecoderContext { none, prev_y };

namespace detail {

inline Eigen::VectorXd tempered(const Eigen::VectorXd& probs, double temperature) {
    Eigen::ArrayXd w = probs.array().max(1e-300).pow(1.0 / temperature);
    return (w / w.sum()).matrix();
}

inline int draw(const Eigen::VectorXd& probs, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    for (int i = 0; i < probs.size(); ++i) {
        u -= probs(i);
        if (u <= 0.0) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

inline double row_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    double kl = 0.0;
    for (int i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) kl += p(i) * std::log(p(i) / q(i));
    return kl < 0.0 && kl > -1e-15 ? 0.0 : kl;
}

}  // namespace detail

// Noisy-channel model with a Markov prior over hidden symbols (boundary
// symbol 0 doubles as the start state and the end-of-sequence decision) and
// a time-synchronous emission decoder. With context == prev_y the decoder
// additionally sees the previous observation.
struct TabularJointModel {
    int n_hidden = 0;  // body symbols, boundary excluded
    int n_obs = 0;
    DecoderContext context = DecoderContext::none;
    Eigen::MatrixXd prior_logits;  // (n_hidden+1) x (n_hidden+1); row = previous state
    Eigen::MatrixXd emit_logits;   // rows indexed by emit_row(); cols = n_obs

    TabularJointModel(int hidden, int obs, DecoderContext ctx)
        : n_hidden(hidden), n_obs(obs), context(ctx),
          prior_logits(Eigen::MatrixXd::Zero(hidden + 1, hidden + 1)),
          emit_logits(Eigen::MatrixXd::Zero(
              ctx == DecoderContext::none ? hidden : hidden * (obs + 1), obs)) {}

    int emit_row(int x, int prev_y) const {
        return context == DecoderContext::none ? x - 1 : (x - 1) * (n_obs + 1) + prev_y;
    }

    Eigen::MatrixXd prior() const { return softmax_rows(prior_logits); }
    Eigen::MatrixXd emit() const { return softmax_rows(emit_logits); }

    // Random truth/init with a controlled per-step end probability so that
    // sampled sequences have moderate length.
    static TabularJointModel random(int hidden, int obs, DecoderContext ctx, std::uint64_t seed,
                                    double scale = 1.0, double end_prob = 0.1) {
        TabularJointModel m(hidden, obs, ctx);
        Rng rng = make_rng(seed, "model-init");
        std::normal_distribution<double> noise(0.0, scale);
        for (int i = 0; i <= hidden; ++i)
            for (int j = 0; j <= hidden; ++j) m.prior_logits(i, j) = noise(rng);
        for (int i = 0; i < m.emit_logits.rows(); ++i)
            for (int j = 0; j < obs; ++j) m.emit_logits(i, j) = noise(rng);
        // Pin the end-of-sequence logit so softmax gives end_prob per step.
        for (int i = 0; i <= hidden; ++i) {
            double lse = -std::numeric_limits<double>::infinity();
            for (int j = 1; j <= hidden; ++j) lse = std::max(lse, m.prior_logits(i, j));
            double s = 0.0;
            for (int j = 1; j <= hidden; ++j) s += std::exp(m.prior_logits(i, j) - lse);
            m.prior_logits(i, 0) = lse + std::log(s) + std::log(end_prob / (1.0 - end_prob));
        }
        return m;
    }

    double log_prior(const Sequence& x) const {
        const Eigen::MatrixXd p = prior();
        double lp = 0.0;
        int prev = 0;
        for (int s : x) {
            lp += std::log(p(prev, s));
            prev = s;
        }
        return lp + std::log(p(prev, 0));
    }

    double log_joint(const Sequence& x, const Sequence& y) const {
        if (x.size() != y.size())
            throw std::invalid_argument("time-synchronous model requires |x| == |y|");
        const Eigen::MatrixXd e = emit();
        double lp = log_prior(x);
        int prev_y = 0;
        for (std::size_t t = 0; t < x.size(); ++t) {
            lp += std::log(e(emit_row(x[t], prev_y), y[t] - 1));
            prev_y = y[t];
        }
        return lp;
    }
};

// Exact log p(y) via the scaled forward recursion, including the
// end-of-sequence decision after the final step.
inline double forward_marginal(const TabularJointModel& model, const Sequence& y) {
    const Eigen::MatrixXd p = model.prior();
    const Eigen::MatrixXd e = model.emit();
    const int n = model.n_hidden;
    if (y.empty()) return std::log(p(0, 0));

    double logpy = 0.0;
    Eigen::VectorXd alpha(n);
    int prev_y = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        Eigen::VectorXd next(n);
        for (int j = 1; j <= n; ++j) {
            double acc = 0.0;
            if (t == 0) acc = p(0, j);
            else
                for (int i = 1; i <= n; ++i) acc += alpha(i - 1) * p(i, j);
            next(j - 1) = acc * e(model.emit_row(j, prev_y), y[t] - 1);
        }
        const double scale = next.sum();
        if (scale <= 0.0) return -std::numeric_limits<double>::infinity();
        logpy += std::log(scale);
        alpha = next / scale;
        prev_y = y[t];
    }
    double end = 0.0;
    for (int i = 1; i <= n; ++i) end += alpha(i - 1) * p(i, 0);
    return logpy + std::log(end);
}

// p_lam(x | y) as per-step conditional tables p(x_t | x_{t-1}, y), computed
// by forward-backward; chaining the tables reproduces the posterior exactly.
class ExactPosterior {
public:
    ExactPosterior(const TabularJointModel& model, const Sequence& y) : n_(model.n_hidden) {
        const Eigen::MatrixXd p = model.prior();
        const Eigen::MatrixXd e = model.emit();
        const int T = static_cast<int>(y.size());
        const int n = n_;

        // Emission column for each step.
        std::vector<Eigen::VectorXd> em(static_cast<std::size_t>(T));
        int prev_y = 0;
        for (int t = 0; t < T; ++t) {
            em[static_cast<std::size_t>(t)].resize(n);
            for (int j = 1; j <= n; ++j)
                em[static_cast<std::size_t>(t)](j - 1) = e(model.emit_row(j, prev_y), y[static_cast<std::size_t>(t)] - 1);
            prev_y = y[static_cast<std::size_t>(t)];
        }

        // beta[t](i) ~ p(y_{t+1..T}, end | x_t = i), renormalized per step.
        std::vector<Eigen::VectorXd> beta(static_cast<std::size_t>(T) + 1);
        beta[static_cast<std::size_t>(T)].resize(n);
        for (int i = 1; i <= n; ++i) beta[static_cast<std::size_t>(T)](i - 1) = p(i, 0);
        for (int t = T - 1; t >= 1; --t) {
            Eigen::VectorXd& b = beta[static_cast<std::size_t>(t)];
            b.resize(n);
            for (int i = 1; i <= n; ++i) {
                double acc = 0.0;
                for (int j = 1; j <= n; ++j)
                    acc += p(i, j) * em[static_cast<std::size_t>(t)](j - 1) * beta[static_cast<std::size_t>(t) + 1](j - 1);
                b(i - 1) = acc;
            }
            const double s = b.maxCoeff();
            if (s > 0.0) b /= s;
        }

        cond_.resize(static_cast<std::size_t>(T));
        marginals_.resize(static_cast<std::size_t>(T));
        for (int t = 1; t <= T; ++t) {
            Eigen::MatrixXd& q = cond_[static_cast<std::size_t>(t - 1)];
            q.resize(n + 1, n);
            for (int i = 0; i <= n; ++i) {
                if (t > 1 && i == 0) { q.row(i).setConstant(1.0 / n); continue; }
                if (t == 1 && i != 0) { q.row(i).setConstant(1.0 / n); continue; }
                Eigen::VectorXd row(n);
                for (int j = 1; j <= n; ++j)
                    row(j - 1) = p(i, j) * em[static_cast<std::size_t>(t - 1)](j - 1) * beta[static_cast<std::size_t>(t)](j - 1);
                const double s = row.sum();
                if (s > 0.0) q.row(i) = (row / s).transpose();
                else q.row(i).setConstant(1.0 / n);
            }
            Eigen::VectorXd& marg = marginals_[static_cast<std::size_t>(t - 1)];
            if (t == 1) marg = q.row(0).transpose();
            else {
                marg.setZero(n);
                for (int i = 1; i <= n; ++i)
                    marg += marginals_[static_cast<std::size_t>(t - 2)](i - 1) * q.row(i).transpose();
            }
        }
    }

    int length() const { return static_cast<int>(cond_.size()); }

    // p(x_t = j | x_{t-1} = i, y); t is 1-based, i/j are symbols (i may be 0 at t=1).
    const Eigen::MatrixXd& table(int t) const { return cond_[static_cast<std::size_t>(t - 1)]; }

    // p(x_t = j | y) marginal.
    const Eigen::VectorXd& marginal(int t) const { return marginals_[static_cast<std::size_t>(t - 1)]; }

    double log_prob(const Sequence& x) const {
        if (static_cast<int>(x.size()) != length())
            throw std::invalid_argument("posterior length mismatch");
        double lp = 0.0;
        int prev = 0;
        for (int t = 1; t <= length(); ++t) {
            lp += std::log(cond_[static_cast<std::size_t>(t - 1)](prev, x[static_cast<std::size_t>(t - 1)] - 1));
            prev = x[static_cast<std::size_t>(t - 1)];
        }
        return lp;
    }

    Sequence sample(double temperature, Rng& rng) const {
        Sequence x(static_cast<std::size_t>(length()));
        int prev = 0;
        for (int t = 1; t <= length(); ++t) {
            const Eigen::VectorXd probs =
                detail::tempered(cond_[static_cast<std::size_t>(t - 1)].row(prev).transpose(), temperature);
            x[static_cast<std::size_t>(t - 1)] = detail::draw(probs, rng) + 1;
            prev = x[static_cast<std::size_t>(t - 1)];
        }
        return x;
    }

private:
    int n_;
    std::vector<Eigen::MatrixXd> cond_;
    std::vector<Eigen::VectorXd> marginals_;
};

// Learnable autoregressive tabular conditional q(x_t | x_{t-1}, y_{t-W..t+W}).
// Strictly more flexible than the time-local decoder, yet still a table.
struct TabularPosterior {
    int n_hidden = 0;
    int n_obs = 0;
    int window = 1;
    Eigen::MatrixXd logits;  // rows: (n_hidden+1) * (n_obs+1)^(2W+1); cols: n_hidden

    TabularPosterior(int hidden, int obs, int w = 1)
        : n_hidden(hidden), n_obs(obs), window(w),
          logits(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden + 1) * n_window_codes(),
                                       hidden)) {}

    int n_window_codes() const {
        int c = 1;
        for (int k = 0; k < 2 * window + 1; ++k) c *= n_obs + 1;
        return c;
    }

    int row_index(int prev_x, const Sequence& y, int t) const {  // t is 1-based
        int code = 0;
        for (int d = -window; d <= window; ++d) {
            const int pos = t + d;
            const int sym = (pos >= 1 && pos <= static_cast<int>(y.size()))
                                ? y[static_cast<std::size_t>(pos - 1)] : 0;
            code = code * (n_obs + 1) + sym;
        }
        return prev_x * n_window_codes() + code;
    }

    void randomize(std::uint64_t seed, double scale = 0.1) {
        Rng rng = make_rng(seed, "posterior-init");
        std::normal_distribution<double> noise(0.0, scale);
        for (int i = 0; i < logits.rows(); ++i)
            for (int j = 0; j < logits.cols(); ++j) logits(i, j) = noise(rng);
    }

    Eigen::VectorXd row_probs(int row) const {
        const Eigen::ArrayXd z = logits.row(row).transpose().array();
        const Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
        return (e / e.sum()).matrix();
    }

    double log_prob(const Sequence& x, const Sequence& y) const {
        if (x.size() != y.size()) throw std::invalid_argument("|x| != |y|");
        double lp = 0.0;
        int prev = 0;
        for (int t = 1; t <= static_cast<int>(x.size()); ++t) {
            const Eigen::VectorXd p = row_probs(row_index(prev, y, t));
            lp += std::log(p(x[static_cast<std::size_t>(t - 1)] - 1));
            prev = x[static_cast<std::size_t>(t - 1)];
        }
        return lp;
    }

    Sequence sample(const Sequence& y, double temperature, Rng& rng) const {
        Sequence x(y.size());
        int prev = 0;
        for (int t = 1; t <= static_cast<int>(y.size()); ++t) {
            const Eigen::VectorXd probs =
                detail::tempered(row_probs(row_index(prev, y, t)), temperature);
            x[static_cast<std::size_t>(t - 1)] = detail::draw(probs, rng) + 1;
            prev = x[static_cast<std::size_t>(t - 1)];
        }
        return x;
    }
};

struct JointSample {
    Sequence x, y;
    bool truncated = false;
};

// Ancestral sampling with per-step temperature adjustment: each categorical
// is raised to the power 1/T and renormalized before drawing.
inline JointSample sample_joint(const TabularJointModel& model, double temperature, int max_len,
                                Rng& rng) {
    if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
    const Eigen::MatrixXd p = model.prior();
    const Eigen::MatrixXd e = model.emit();
    JointSample out;
    int prev = 0, prev_y = 0;
    for (int t = 0; t < max_len; ++t) {
        const int next = detail::draw(detail::tempered(p.row(prev).transpose(), temperature), rng);
        if (next == 0) return out;
        const int obs =
            detail::draw(detail::tempered(e.row(model.emit_row(next, prev_y)).transpose(), temperature), rng) + 1;
        out.x.push_back(next);
        out.y.push_back(obs);
        prev = next;
        prev_y = obs;
    }
    out.truncated = true;
    return out;
}

inline Sequence sample_posterior(const TabularPosterior& posterior, const Sequence& y,
                                 double temperature, Rng& rng) {
    if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
    return posterior.sample(y, temperature, rng);
}

struct GenWeights {
    double alpha = 0.0, beta = 0.0, gamma = 1.0;
};

struct GenBatch {
    std::vector<const Sequence*> x_only;
    std::vector<const Sequence*> y_only;
    std::vector<std::pair<const Sequence*, const Sequence*>> paired;
};

struct GenLossResult {
    double loss = 0.0;
    double alpha_term = 0.0, beta_term = 0.0, gamma_term = 0.0;
    Eigen::MatrixXd grad_prior, grad_emit;
};

namespace detail {

// Accumulates w * d(-log p_lam(x))/d(prior logits); returns log p_lam(x).
inline double accum_prior(const Eigen::MatrixXd& p, const Sequence& x, double w,
                          Eigen::MatrixXd* grad) {
    double lp = 0.0;
    int prev = 0;
    auto visit = [&](int next) {
        lp += std::log(p(prev, next));
        if (grad) {
            grad->row(prev) += w * p.row(prev);
            (*grad)(prev, next) -= w;
        }
        prev = next;
    };
    for (int s : x) visit(s);
    visit(0);
    return lp;
}

// Accumulates w * d(-log p_lam(y|x))/d(emit logits); returns log p_lam(y|x).
inline double accum_emit(const TabularJointModel& model, const Eigen::MatrixXd& e,
                         const Sequence& x, const Sequence& y, double w, Eigen::MatrixXd* grad) {
    double lp = 0.0;
    int prev_y = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const int row = model.emit_row(x[t], prev_y);
        lp += std::log(e(row, y[t] - 1));
        if (grad) {
            grad->row(row) += w * e.row(row);
            (*grad)(row, y[t] - 1) -= w;
        }
        prev_y = y[t];
    }
    return lp;
}

}  // namespace detail

// Eq.-style generative loss: alpha * prior NLL on x-only data, beta * negative
// ELBO on y-only data with x drawn from the tempered posterior (log q evaluated
// untempered), gamma * joint NLL on paired data. With elbo_updates_prior=false
// the prior receives no gradient from the beta term.
inline GenLossResult gen_loss(const TabularJointModel& model, const TabularPosterior& posterior,
                              const GenBatch& batch, const GenWeights& weights, int samples_per_y,
                              double temperature, bool elbo_updates_prior, std::uint64_t seed) {
    const Eigen::MatrixXd p = model.prior();
    const Eigen::MatrixXd e = model.emit();
    GenLossResult res;
    res.grad_prior = Eigen::MatrixXd::Zero(model.prior_logits.rows(), model.prior_logits.cols());
    res.grad_emit = Eigen::MatrixXd::Zero(model.emit_logits.rows(), model.emit_logits.cols());
    Rng rng = make_rng(seed, "gen-loss");

    if (weights.alpha > 0.0 && !batch.x_only.empty()) {
        const double w = weights.alpha / static_cast<double>(batch.x_only.size());
        for (const Sequence* x : batch.x_only)
            res.alpha_term -= w * detail::accum_prior(p, *x, w, &res.grad_prior);
    }
    if (weights.beta > 0.0 && !batch.y_only.empty()) {
        const double w = weights.beta /
                         static_cast<double>(batch.y_only.size() * static_cast<std::size_t>(samples_per_y));
        for (const Sequence* y : batch.y_only) {
            for (int s = 0; s < samples_per_y; ++s) {
                const Sequence x = posterior.sample(*y, temperature, rng);
                const double lq = posterior.log_prob(x, *y);
                const double lp_prior = detail::accum_prior(
                    p, x, w, elbo_updates_prior ? &res.grad_prior : nullptr);
                const double lp_emit = detail::accum_emit(model, e, x, *y, w, &res.grad_emit);
                res.beta_term -= w * (lp_prior + lp_emit - lq);
            }
        }
    }
    if (weights.gamma > 0.0 && !batch.paired.empty()) {
        const double w = weights.gamma / static_cast<double>(batch.paired.size());
        for (const auto& [x, y] : batch.paired) {
            res.gamma_term -= w * detail::accum_prior(p, *x, w, &res.grad_prior);
            res.gamma_term -= w * detail::accum_emit(model, e, *x, *y, w, &res.grad_emit);
        }
    }
    res.loss = res.alpha_term + res.beta_term + res.gamma_term;
    return res;
}

struct VarLossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;
    int truncated = 0;
};

// KL encoder (sleep-phase) loss: -log q_nu(x | y) on tempered ancestral
// samples (x, y) from the model. Gradient flows only to nu.
inline VarLossResult var_loss(const TabularPosterior& posterior, const TabularJointModel& model,
                              int n_samples, double temperature, int max_len, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    VarLossResult res;
    res.grad = Eigen::MatrixXd::Zero(posterior.logits.rows(), posterior.logits.cols());
    Rng rng = make_rng(seed, "var-loss");
    const double w = 1.0 / n_samples;
    for (int s = 0; s < n_samples; ++s) {
        const JointSample js = sample_joint(model, temperature, max_len, rng);
        if (js.truncated) ++res.truncated;
        int prev = 0;
        for (int t = 1; t <= static_cast<int>(js.x.size()); ++t) {
            const int row = posterior.row_index(prev, js.y, t);
            const Eigen::VectorXd probs = posterior.row_probs(row);
            const int target = js.x[static_cast<std::size_t>(t - 1)] - 1;
            res.loss -= w * std::log(probs(target));
            res.grad.row(row) += w * probs.transpose();
            res.grad(row, target) -= w;
            prev = js.x[static_cast<std::size_t>(t - 1)];
        }
    }
    return res;
}

// Mean KL(p_lam(x|y) || q(x|y)) over a probe set, computed exactly via the
// chained per-step conditionals and forward-backward marginals.
inline double posterior_quality(const TabularPosterior& posterior, const TabularJointModel& model,
                                const std::vector<Sequence>& probe_ys) {
    if (probe_ys.empty()) throw std::invalid_argument("probe set is empty");
    double total = 0.0;
    for (const Sequence& y : probe_ys) {
        const ExactPosterior exact(model, y);
        double kl = 0.0;
        for (int t = 1; t <= exact.length(); ++t) {
            for (int i = 0; i <= model.n_hidden; ++i) {
                double wi;
                if (t == 1) wi = i == 0 ? 1.0 : 0.0;
                else wi = i == 0 ? 0.0 : exact.marginal(t - 1)(i - 1);
                if (wi <= 0.0) continue;
                const Eigen::VectorXd q = posterior.row_probs(posterior.row_index(i, y, t));
                kl += wi * detail::row_kl(exact.table(t).row(i).transpose(), q);
            }
        }
        total += kl;
    }
    return total / static_cast<double>(probe_ys.size());
}

// Exact KL(p_truth(x, y) || p_model(x, y)) over the full sequence space via
// expected-visit accounting under the truth chain. The truth decoder must be
// context-free; the model may use prev_y context.
inline double joint_kl_to_truth(const TabularJointModel& truth, const TabularJointModel& model) {
    if (truth.context != DecoderContext::none)
        throw std::invalid_argument("truth must have a context-free decoder");
    if (truth.n_hidden != model.n_hidden || truth.n_obs != model.n_obs)
        throw std::invalid_argument("alphabet mismatch");
    const int n = truth.n_hidden;
    const Eigen::MatrixXd pt = truth.prior(), pm = model.prior();
    const Eigen::MatrixXd ot = truth.emit(), om = model.emit();

    // Expected visits to each body state before absorption.
    const Eigen::MatrixXd Q = pt.block(1, 1, n, n);
    const Eigen::VectorXd start = pt.row(0).segment(1, n).transpose();
    const Eigen::VectorXd m =
        (Eigen::MatrixXd::Identity(n, n) - Q.transpose()).partialPivLu().solve(start);

    double kl = detail::row_kl(pt.row(0).transpose(), pm.row(0).transpose());
    for (int i = 1; i <= n; ++i)
        kl += m(i - 1) * detail::row_kl(pt.row(i).transpose(), pm.row(i).transpose());

    if (model.context == DecoderContext::none) {
        for (int i = 1; i <= n; ++i)
            kl += m(i - 1) * detail::row_kl(ot.row(i - 1).transpose(), om.row(i - 1).transpose());
    } else {
        // First emission sees boundary context; later ones the sampled y_{t-1}.
        for (int i = 1; i <= n; ++i) {
            if (start(i - 1) > 0.0)
                kl += start(i - 1) * detail::row_kl(ot.row(i - 1).transpose(),
                                                    om.row(model.emit_row(i, 0)).transpose());
            for (int k = 1; k <= n; ++k) {
                for (int pobs = 1; pobs <= truth.n_obs; ++pobs) {
                    const double c = m(k - 1) * Q(k - 1, i - 1) * ot(k - 1, pobs - 1);
                    if (c <= 0.0) continue;
                    kl += c * detail::row_kl(ot.row(i - 1).transpose(),
                                             om.row(model.emit_row(i, pobs)).transpose());
                }
            }
        }
    }
    return kl;
}

// Eq.-3 style objective E_q[log q(x|y) - log p(x,y)] computed exactly by
// enumerating all x of length |y|. Upper-bounds -log p(y), tight at the
// exact posterior. LogQ is any callable Sequence -> log q(x|y).
template <typename LogQ>
double negative_elbo_exact(const TabularJointModel& model, LogQ&& log_q, const Sequence& y) {
    const int T = static_cast<int>(y.size());
    const int n = model.n_hidden;
    Sequence x(static_cast<std::size_t>(T), 1);
    double obj = 0.0;
    while (true) {
        const double lq = log_q(x);
        const double q = std::exp(lq);
        if (q > 0.0) obj += q * (lq - model.log_joint(x, y));
        int t = T - 1;
        for (; t >= 0; --t) {
            if (x[static_cast<std::size_t>(t)] < n) { ++x[static_cast<std::size_t>(t)]; break; }
            x[static_cast<std::size_t>(t)] = 1;
        }
        if (t < 0) break;
    }
    return obj;
}

// Explicit finite truth over (x, y) pairs, for the loss-decomposition check.
struct FiniteTruth {
    std::vector<std::pair<Sequence, Sequence>> support;
    std::vector<double> prob;
};

// Computes KL(p_T(u) || p_lam(u)) over the mixed observation space (left) and
// the alpha/beta/gamma-weighted sum of the three KLs (right). The two routes
// must agree exactly.
inline std::pair<double, double> loss_decomposition_check(const FiniteTruth& truth,
                                                          const TabularJointModel& model,
                                                          const GenWeights& w) {
    std::map<Sequence, double> px, py;
    for (std::size_t k = 0; k < truth.support.size(); ++k) {
        px[truth.support[k].first] += truth.prob[k];
        py[truth.support[k].second] += truth.prob[k];
    }

    double lhs = 0.0;
    if (w.alpha > 0.0)
        for (const auto& [x, p] : px) {
            const double pu = w.alpha * p, qu = w.alpha * std::exp(model.log_prior(x));
            lhs += pu * std::log(pu / qu);
        }
    if (w.beta > 0.0)
        for (const auto& [y, p] : py) {
            const double pu = w.beta * p, qu = w.beta * std::exp(forward_marginal(model, y));
            lhs += pu * std::log(pu / qu);
        }
    if (w.gamma > 0.0)
        for (std::size_t k = 0; k < truth.support.size(); ++k) {
            const double pu = w.gamma * truth.prob[k];
            const double qu = w.gamma * std::exp(model.log_joint(truth.support[k].first,
                                                                 truth.support[k].second));
            lhs += pu * std::log(pu / qu);
        }

    double klx = 0.0, kly = 0.0, klxy = 0.0;
    for (const auto& [x, p] : px) klx += p * (std::log(p) - model.log_prior(x));
    for (const auto& [y, p] : py) kly += p * (std::log(p) - forward_marginal(model, y));
    for (std::size_t k = 0; k < truth.support.size(); ++k)
        klxy += truth.prob[k] * (std::log(truth.prob[k]) -
                                 model.log_joint(truth.support[k].first, truth.support[k].second));
    const double rhs = w.alpha * klx + w.beta * kly + w.gamma * klxy;
    return {lhs, rhs};
}

}  // namespace decipher
