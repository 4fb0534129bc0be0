#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "decipher/semisup.hpp"

namespace decipher {

struct TrainConfig {
    double alpha = 0.495, beta = 0.495, gamma = 0.01;
    double temperature = 0.5;
    int pretrain_steps = 200;   // beta term omitted
    int total_steps = 2000;     // includes the pretrain phase
    double gen_lr = 1e-3;
    double var_lr = 3e-3;       // kept higher than gen_lr
    bool elbo_updates_prior = false;
    int samples_per_y = 4;
    int batch_size = 32;
    int var_samples = 32;
    int max_len = 64;
    int probe_every = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (std::abs(alpha + beta + gamma - 1.0) > 1e-12)
            throw std::invalid_argument("alpha + beta + gamma must equal 1");
        if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
        if (gen_lr <= 0.0 || var_lr <= 0.0)
            throw std::invalid_argument("learning rates must be > 0");
        if (pretrain_steps < 0 || total_steps < pretrain_steps)
            throw std::invalid_argument("need 0 <= pretrain_steps <= total_steps");
    }
};

struct CorpusBuckets {
    std::vector<Sequence> x_only;
    std::vector<Sequence> y_only;
    std::vector<std::pair<Sequence, Sequence>> paired;
};

struct TraceRow {
    int step = 0;
    double gen_loss = 0.0;
    double var_loss = 0.0;
    double probe_logpy = std::numeric_limits<double>::quiet_NaN();
    double posterior_kl = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    TabularJointModel model;
    TabularPosterior posterior;
    std::vector<TraceRow> trace;
    bool diverged = false;
    int diverged_at = -1;
};

namespace detail {

inline void clip_norm(std::vector<Eigen::MatrixXd*> grads, double max_norm) {
    double sq = 0.0;
    for (const auto* g : grads) sq += g->squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm)
        for (auto* g : grads) *g *= max_norm / norm;
}

}  // namespace detail

// Wake-sleep style loop: simultaneous Adam updates from (d l_gen / d lambda,
// d l_var / d nu) on minibatches, with a pretrain phase that omits the beta
// term. Deterministic per seed.
inline TrainResult train(TabularJointModel model, TabularPosterior posterior,
                         const CorpusBuckets& data, const std::vector<Sequence>& probe_ys,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (data.x_only.empty() && data.y_only.empty() && data.paired.empty())
        throw std::invalid_argument("all corpus buckets are empty");

    Adam adam_prior(cfg.gen_lr, static_cast<int>(model.prior_logits.rows()),
                    static_cast<int>(model.prior_logits.cols()));
    Adam adam_emit(cfg.gen_lr, static_cast<int>(model.emit_logits.rows()),
                   static_cast<int>(model.emit_logits.cols()));
    Adam adam_var(cfg.var_lr, static_cast<int>(posterior.logits.rows()),
                  static_cast<int>(posterior.logits.cols()));

    Rng batch_rng = make_rng(cfg.seed, "batch");
    TrainResult result{std::move(model), std::move(posterior), {}, false, -1};
    result.trace.reserve(static_cast<std::size_t>(cfg.total_steps));

    auto pick = [&](std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(batch_rng);
    };

    for (int step = 0; step < cfg.total_steps; ++step) {
        const bool pretrain = step < cfg.pretrain_steps;

        GenBatch batch;
        if (!data.x_only.empty() && cfg.alpha > 0.0)
            for (int k = 0; k < cfg.batch_size; ++k)
                batch.x_only.push_back(&data.x_only[pick(data.x_only.size())]);
        if (!data.y_only.empty() && cfg.beta > 0.0 && !pretrain)
            for (int k = 0; k < cfg.batch_size; ++k)
                batch.y_only.push_back(&data.y_only[pick(data.y_only.size())]);
        if (!data.paired.empty() && cfg.gamma > 0.0)
            for (int k = 0; k < cfg.batch_size; ++k) {
                const auto& pr = data.paired[pick(data.paired.size())];
                batch.paired.emplace_back(&pr.first, &pr.second);
            }

        GenWeights weights{cfg.alpha, pretrain ? 0.0 : cfg.beta, cfg.gamma};
        const std::uint64_t step_seed = substream(cfg.seed, "step") + static_cast<std::uint64_t>(step);
        GenLossResult gen = gen_loss(result.model, result.posterior, batch, weights,
                                     cfg.samples_per_y, cfg.temperature, cfg.elbo_updates_prior,
                                     step_seed);
        VarLossResult var = var_loss(result.posterior, result.model, cfg.var_samples,
                                     cfg.temperature, cfg.max_len, step_seed);

        TraceRow row;
        row.step = step;
        row.gen_loss = gen.loss;
        row.var_loss = var.loss;
        if (!std::isfinite(gen.loss) || !std::isfinite(var.loss)) {
            result.trace.push_back(row);
            result.diverged = true;
            result.diverged_at = step;
            return result;
        }

        detail::clip_norm({&gen.grad_prior, &gen.grad_emit}, 1.0);
        detail::clip_norm({&var.grad}, 1.0);
        adam_prior.step(result.model.prior_logits, gen.grad_prior);
        adam_emit.step(result.model.emit_logits, gen.grad_emit);
        adam_var.step(result.posterior.logits, var.grad);

        if (!probe_ys.empty() &&
            (step % cfg.probe_every == 0 || step + 1 == cfg.total_steps)) {
            double lp = 0.0;
            for (const Sequence& y : probe_ys) lp += forward_marginal(result.model, y);
            row.probe_logpy = lp / static_cast<double>(probe_ys.size());
            row.posterior_kl = posterior_quality(result.posterior, result.model, probe_ys);
        }
        result.trace.push_back(row);
    }
    return result;
}

}  // namespace decipher
