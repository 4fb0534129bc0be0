// Command-line front end: every pipeline as a subcommand, seeded and
// reproducible. Exit codes: 0 success, 1 usage error, 2 pipeline error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "decipher/binary.hpp"
#include "decipher/cipher.hpp"
#include "decipher/grad.hpp"
#include "decipher/io.hpp"
#include "decipher/metrics.hpp"
#include "decipher/ngram.hpp"
#include "decipher/svd.hpp"
#include "decipher/symbols.hpp"
#include "decipher/train.hpp"

namespace {

using namespace decipher;
using nlohmann::json;

std::vector<std::vector<int>> load_corpus(const std::string& path, bool raw = false) {
    const auto& tab = SymbolTable::grapheme();
    std::vector<std::vector<int>> seqs;
    for (const std::string& line : io::read_lines(path)) {
        if (line.empty()) continue;
        try {
            seqs.push_back(raw ? tab.normalize_raw(line) : tab.normalize(line));
        } catch (const EmptySequence&) {
            // lines with no in-alphabet characters are skipped
        }
    }
    return seqs;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
    std::string corpus, out;
    int order = 2;
    bool raw = false;
};

int run_ingest(const IngestArgs& a) {
    const auto seqs = load_corpus(a.corpus, a.raw);
    const NGramStats stats = accumulate_ngrams(seqs, SymbolTable::grapheme().size(), a.order);
    io::write_json(a.out, io::stats_to_json(stats, SymbolTable::grapheme().glyphs()));
    std::cout << "wrote " << a.out << " (" << seqs.size() << " utterances, "
              << stats.token_count << " tokens)\n";
    return 0;
}

// ---- encipher --------------------------------------------------------------

struct EncipherArgs {
    std::string corpus, out, key_out, key_in;
    std::uint64_t seed = 0;
};

int run_encipher(const EncipherArgs& a) {
    const auto& tab = SymbolTable::grapheme();
    const Permutation perm = a.key_in.empty()
                                 ? random_permutation(tab.size() - 1, a.seed)
                                 : io::permutation_from_json(io::read_json(a.key_in));
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out);
    std::size_t n = 0;
    for (const std::string& line : io::read_lines(a.corpus)) {
        if (line.empty()) continue;
        try {
            out << tab.to_string(encipher(tab.normalize(line), perm)) << "\n";
            ++n;
        } catch (const EmptySequence&) {
        }
    }
    if (!a.key_out.empty()) io::write_json(a.key_out, io::permutation_to_json(perm));
    std::cout << "wrote " << a.out << " (" << n << " utterances)\n";
    return 0;
}

// ---- solve-svd -------------------------------------------------------------

struct SvdArgs {
    std::string plain_stats, cipher_stats, out;
    bool lenient = false;
};

int run_solve_svd(const SvdArgs& a) {
    const NGramStats ps = io::stats_from_json(io::read_json(a.plain_stats));
    const NGramStats cs = io::stats_from_json(io::read_json(a.cipher_stats));
    const auto [B, bu] = strip_boundary(ps);
    const auto [C, cu] = strip_boundary(cs);

    const SvdRecovery rec = recover_svd(B, C, a.lenient);
    const Permutation perm = round_to_permutation(rec.blended());

    json j;
    j["O"] = io::flatten(rec.blended());
    j["permutation"] = perm.mapping();
    j["singular_values"] = std::vector<double>(
        rec.singular_values.data(), rec.singular_values.data() + rec.singular_values.size());
    j["min_rel_gap"] = rec.min_rel_gap;
    j["route_disagreement"] = rec.route_disagreement;
    j["degenerate_warning"] = rec.degenerate_warning;
    NGramStats cref;
    cref.bigram = C;
    j["bigram_kl"] = bigram_kl(cref, perm.matrix().transpose() * B * perm.matrix() +
                                         Eigen::MatrixXd::Constant(C.rows(), C.cols(), kLogEps));
    io::write_json(a.out, j);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---- solve-grad ------------------------------------------------------------

struct GradArgs {
    std::string plain_stats, cipher_stats, out;
    std::string cipher_corpus;      // optional: enables the stochastic first phase
    std::string plain_corpus, key;  // optional: enables error-rate evaluation
    int runs = 1;
    int parallel = 1;
    std::uint64_t seed = 0;
    SolverConfig solver;
};

double corpus_error_rate(const Eigen::MatrixXd& O, const Eigen::VectorXd& b,
                         const std::vector<std::vector<int>>& plain, const Permutation& key) {
    std::size_t edits = 0, total = 0;
    for (const auto& x : plain) {
        const std::vector<int> hyp = decode(encipher(x, key), O, b);
        // error_rate is distance / |ref|; recover the raw distance.
        const double er = error_rate(hyp, x);
        edits += static_cast<std::size_t>(std::lround(er * static_cast<double>(x.size())));
        total += x.size();
    }
    return static_cast<double>(edits) / static_cast<double>(total);
}

int run_solve_grad(const GradArgs& a) {
    const NGramStats ps = io::stats_from_json(io::read_json(a.plain_stats));
    const NGramStats cs = io::stats_from_json(io::read_json(a.cipher_stats));
    const auto [B, bu] = strip_boundary(ps);
    const auto [C, cu] = strip_boundary(cs);

    std::vector<std::vector<int>> plain;
    Permutation key({0});
    const bool eval = !a.plain_corpus.empty() && !a.key.empty();
    if (eval) {
        plain = load_corpus(a.plain_corpus);
        key = io::permutation_from_json(io::read_json(a.key));
    }

    std::vector<Eigen::MatrixXd> utt;
    if (!a.cipher_corpus.empty())
        utt = utterance_bigram_tables(load_corpus(a.cipher_corpus, /*raw=*/true),
                                      static_cast<int>(SymbolTable::grapheme().size()));

    std::vector<RunReport> reports(static_cast<std::size_t>(a.runs));
    auto work = [&](int r) {
        SolverConfig cfg = a.solver;
        cfg.seed = a.seed + static_cast<std::uint64_t>(r);
        auto [report, O] = solve(B, C, cfg, utt.empty() ? nullptr : &utt);
        if (eval) report.error_rate = corpus_error_rate(O.matrix(), bu, plain, key);
        reports[static_cast<std::size_t>(r)] = std::move(report);
    };

    const int workers = std::max(1, a.parallel);
    for (int base = 0; base < a.runs; base += workers) {
        std::vector<std::thread> pool;
        for (int r = base; r < std::min(a.runs, base + workers); ++r)
            pool.emplace_back(work, r);
        for (auto& t : pool) t.join();
    }

    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out);
    out << "seed,final_loss,bigram_kl,error_rate,succeeded\n";
    for (int r = 0; r < a.runs; ++r) {
        const RunReport& rep = reports[static_cast<std::size_t>(r)];
        out << a.seed + static_cast<std::uint64_t>(r) << "," << fmt(rep.final_loss) << ","
            << fmt(rep.bigram_kl) << "," << fmt(rep.error_rate) << ","
            << (rep.succeeded ? 1 : 0) << "\n";
    }
    std::cout << "wrote " << a.out << " (" << a.runs << " runs)\n";
    return 0;
}

// ---- identifiability -------------------------------------------------------

struct IdentArgs {
    std::vector<double> B;  // row-major 2x2
    double eta = 0.0, zeta = 0.0;
    std::string out;
};

int run_identifiability(const IdentArgs& a) {
    if (a.B.size() != 4) throw CLI::ValidationError("--B needs 4 comma-separated entries");
    Eigen::Matrix2d Bm;
    Bm << a.B[0], a.B[1], a.B[2], a.B[3];
    BinaryMarkov prior(Bm);
    prior.fill_markov_trigram();
    const BinaryDecoder truth{a.eta, a.zeta};
    const Eigen::Matrix2d O = truth.matrix();
    const Eigen::Matrix2d C = O.transpose() * prior.B * O;

    json j;
    j["b0"] = prior.b(0);
    j["C"] = {C(0, 0), C(0, 1), C(1, 0), C(1, 1)};
    const double cond = trigram_condition(prior.trigram, prior.b);
    j["trigram_condition"] = cond;
    try {
        json cand = json::array();
        const auto sols = candidate_solutions(prior, C);
        for (const auto& s : sols) cand.push_back({{"eta", s.eta}, {"zeta", s.zeta}});
        j["candidates"] = cand;
        if (sols.size() <= 1) j["verdict"] = "identifiable_from_bigrams";
        else if (std::abs(cond) > 1e-10) j["verdict"] = "identifiable_from_trigrams";
        else j["verdict"] = "not_identifiable";
    } catch (const NonIdentifiable& e) {
        j["verdict"] = "rank_one";
        j["solution_line"] = {{"b0", e.b0}, {"b1", e.b1}, {"c0", e.c0}};
    }
    if (a.out.empty()) std::cout << j.dump(2) << "\n";
    else io::write_json(a.out, j);
    return 0;
}

// ---- train-semisup ---------------------------------------------------------

struct TrainArgs {
    std::string config;       // optional key=value file; flags override
    std::string out_prefix = "run";
    int hidden = 5, observed = 7;
    int sequences = 50000;
    std::string decoder_context = "none";
    std::uint64_t truth_seed = 0;
    TrainConfig cfg;
};

DecoderContext parse_context(const std::string& s) {
    if (s == "none") return DecoderContext::none;
    if (s == "prev_y") return DecoderContext::prev_y;
    throw CLI::ValidationError("decoder context must be none or prev_y");
}

// Config-file values apply only where the matching flag was not given.
void apply_config_file(TrainArgs& a, const CLI::App* cmd) {
    if (a.config.empty()) return;
    const auto kv = io::read_config(a.config);
    auto unset = [&](const char* flag) { return cmd->get_option(flag)->count() == 0; };
    auto get_d = [&](const char* k, const char* flag, double& v) {
        if (kv.count(k) && unset(flag)) v = std::stod(kv.at(k));
    };
    auto get_i = [&](const char* k, const char* flag, int& v) {
        if (kv.count(k) && unset(flag)) v = std::stoi(kv.at(k));
    };
    get_d("alpha", "--alpha", a.cfg.alpha);
    get_d("beta", "--beta", a.cfg.beta);
    get_d("gamma", "--gamma", a.cfg.gamma);
    get_d("temperature", "--temperature", a.cfg.temperature);
    get_d("gen_lr", "--gen-lr", a.cfg.gen_lr);
    get_d("var_lr", "--var-lr", a.cfg.var_lr);
    get_i("pretrain_steps", "--pretrain-steps", a.cfg.pretrain_steps);
    get_i("total_steps", "--total-steps", a.cfg.total_steps);
    get_i("batch_size", "--batch-size", a.cfg.batch_size);
    get_i("samples_per_y", "--samples-per-y", a.cfg.samples_per_y);
    get_i("var_samples", "--var-samples", a.cfg.var_samples);
    get_i("hidden", "--hidden", a.hidden);
    get_i("observed", "--observed", a.observed);
    get_i("sequences", "--sequences", a.sequences);
    if (kv.count("elbo_updates_prior") && unset("--elbo-updates-prior"))
        a.cfg.elbo_updates_prior = kv.at("elbo_updates_prior") == "true";
    if (kv.count("decoder_context") && unset("--decoder-context"))
        a.decoder_context = kv.at("decoder_context");
}

int run_train(const TrainArgs& a) {
    const DecoderContext ctx = parse_context(a.decoder_context);
    const TabularJointModel truth = TabularJointModel::random(
        a.hidden, a.observed, DecoderContext::none, a.truth_seed, 1.0, 0.1);

    Rng data_rng = make_rng(a.cfg.seed, "data");
    CorpusBuckets data;
    std::vector<Sequence> probe;
    DataSplit split{a.cfg.alpha, a.cfg.beta, a.cfg.gamma, a.cfg.seed};
    const SplitBuckets buckets = split_corpus(static_cast<std::size_t>(a.sequences), split);
    std::vector<int> kind(static_cast<std::size_t>(a.sequences), 2);
    for (std::size_t i : buckets.x_only) kind[i] = 0;
    for (std::size_t i : buckets.y_only) kind[i] = 1;
    for (int i = 0; i < a.sequences; ++i) {
        const JointSample s = sample_joint(truth, 1.0, a.cfg.max_len, data_rng);
        if (s.x.empty()) continue;
        if (kind[static_cast<std::size_t>(i)] == 0) data.x_only.push_back(s.x);
        else if (kind[static_cast<std::size_t>(i)] == 1) data.y_only.push_back(s.y);
        else data.paired.emplace_back(s.x, s.y);
        if (probe.size() < 32) probe.push_back(s.y);
    }

    TabularJointModel init = TabularJointModel::random(a.hidden, a.observed, ctx,
                                                       substream(a.cfg.seed, "init"), 0.1, 0.1);
    TabularPosterior q(a.hidden, a.observed, 1);
    q.randomize(substream(a.cfg.seed, "posterior"));

    const TrainResult res = train(init, q, data, probe, a.cfg);

    io::write_json(a.out_prefix + ".model.json", io::model_to_json(res.model));
    io::write_json(a.out_prefix + ".posterior.json", io::posterior_to_json(res.posterior));
    io::write_json(a.out_prefix + ".truth.json", io::model_to_json(truth));
    std::ofstream trace(a.out_prefix + ".trace.csv");
    if (!trace) throw std::runtime_error("cannot open trace for writing");
    trace << "step,gen_loss,var_loss,probe_logpy,posterior_kl\n";
    for (const TraceRow& r : res.trace)
        trace << r.step << "," << fmt(r.gen_loss) << "," << fmt(r.var_loss) << ","
              << fmt(r.probe_logpy) << "," << fmt(r.posterior_kl) << "\n";

    if (res.diverged) {
        std::cerr << "training diverged at step " << res.diverged_at << "\n";
        return 2;
    }
    std::cout << "wrote " << a.out_prefix << ".{model,posterior,truth}.json and trace.csv, "
              << "final joint KL to truth = " << joint_kl_to_truth(truth, res.model) << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string model, posterior, truth, out;
    int probes = 64;
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
    const TabularJointModel model = io::model_from_json(io::read_json(a.model));
    const TabularJointModel truth = io::model_from_json(io::read_json(a.truth));

    json j;
    j["joint_kl_to_truth"] = joint_kl_to_truth(truth, model);
    if (!a.posterior.empty()) {
        const TabularPosterior q = io::posterior_from_json(io::read_json(a.posterior));
        Rng rng = make_rng(a.seed, "eval-probe");
        std::vector<Sequence> probe;
        while (static_cast<int>(probe.size()) < a.probes) {
            const JointSample s = sample_joint(truth, 1.0, 64, rng);
            if (!s.y.empty() && !s.truncated) probe.push_back(s.y);
        }
        j["posterior_kl"] = posterior_quality(q, model, probe);
        double lp = 0.0;
        for (const Sequence& y : probe) lp += forward_marginal(model, y);
        j["probe_logpy"] = lp / static_cast<double>(probe.size());
    }
    if (a.out.empty()) std::cout << j.dump(2) << "\n";
    else io::write_json(a.out, j);
    return 0;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
    std::string runs, out;
};

int run_report(const ReportArgs& a) {
    const auto lines = io::read_lines(a.runs);
    if (lines.size() < 2) throw std::runtime_error("run CSV has no data rows");
    std::vector<double> kl, err;
    int succ = 0, gap = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::stringstream ss(lines[i]);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw std::runtime_error("bad CSV row: " + lines[i]);
        const double k = std::stod(cells[2]), e = std::stod(cells[3]);
        kl.push_back(k);
        err.push_back(e);
        succ += std::stoi(cells[4]);
        if (k >= 0.05 && k <= 0.5) ++gap;
    }
    json j;
    j["runs"] = kl.size();
    j["success_fraction"] = static_cast<double>(succ) / static_cast<double>(kl.size());
    j["runs_in_gap_0.05_0.5"] = gap;
    j["median_kl"] = median(kl);
    const bool have_err = std::none_of(err.begin(), err.end(), [](double e) { return e < 0; });
    if (have_err && kl.size() >= 2) j["spearman_kl_error"] = spearman(kl, err);
    if (a.out.empty()) std::cout << j.dump(2) << "\n";
    else io::write_json(a.out, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabular noisy-channel decipherment toolkit"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "count n-gram statistics from a text corpus");
    c_ingest->add_option("--corpus", ingest.corpus, "one utterance per line")->required();
    c_ingest->add_option("--order", ingest.order, "highest n-gram order (1-3)");
    c_ingest->add_flag("--raw", ingest.raw,
                       "verbatim glyph mapping (for ciphertext); no space collapsing");
    c_ingest->add_option("--out", ingest.out, "output stats JSON")->required();

    EncipherArgs enc;
    auto* c_enc = app.add_subcommand("encipher", "apply a substitution cipher to a corpus");
    c_enc->add_option("--corpus", enc.corpus)->required();
    c_enc->add_option("--out", enc.out)->required();
    c_enc->add_option("--seed", enc.seed, "seed for a fresh random key");
    c_enc->add_option("--key-out", enc.key_out, "write the key as JSON");
    c_enc->add_option("--key-in", enc.key_in, "apply an existing key instead");

    SvdArgs svd;
    auto* c_svd = app.add_subcommand("solve-svd", "analytic decoder recovery from bigram stats");
    c_svd->add_option("--plain-stats", svd.plain_stats)->required();
    c_svd->add_option("--cipher-stats", svd.cipher_stats)->required();
    c_svd->add_option("--out", svd.out)->required();
    c_svd->add_flag("--lenient", svd.lenient, "warn instead of failing on degenerate spectra");

    GradArgs grad;
    auto* c_grad = app.add_subcommand("solve-grad", "gradient-descent decipherment runs");
    c_grad->add_option("--plain-stats", grad.plain_stats)->required();
    c_grad->add_option("--cipher-stats", grad.cipher_stats)->required();
    c_grad->add_option("--out", grad.out, "per-run CSV")->required();
    c_grad->add_option("--runs", grad.runs);
    c_grad->add_option("--seed", grad.seed);
    c_grad->add_option("--parallel", grad.parallel, "worker threads for independent runs");
    c_grad->add_option("--cipher-corpus", grad.cipher_corpus,
                       "ciphertext corpus; enables per-utterance stochastic descent");
    c_grad->add_option("--plain-corpus", grad.plain_corpus, "plaintext for error-rate eval");
    c_grad->add_option("--key", grad.key, "cipher key JSON for error-rate eval");
    c_grad->add_option("--sgd-lr", grad.solver.sgd_lr);
    c_grad->add_option("--sgd-steps", grad.solver.sgd_steps);
    c_grad->add_option("--adam-lr", grad.solver.adam_lr);
    c_grad->add_option("--adam-steps", grad.solver.adam_steps);
    c_grad->add_option("--perturb-scale", grad.solver.perturb_scale);
    c_grad->add_option("--success-kl", grad.solver.success_kl_threshold);

    IdentArgs ident;
    auto* c_ident = app.add_subcommand("identifiability", "binary closed-form analysis");
    c_ident->add_option("--B", ident.B, "row-major 2x2 joint")->required()->delimiter(',');
    c_ident->add_option("--eta", ident.eta)->required();
    c_ident->add_option("--zeta", ident.zeta)->required();
    c_ident->add_option("--out", ident.out, "write JSON here instead of stdout");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train-semisup", "wake-sleep training on synthetic data");
    c_train->add_option("--config", tr.config, "key=value file; flags override");
    c_train->add_option("--out-prefix", tr.out_prefix);
    c_train->add_option("--hidden", tr.hidden);
    c_train->add_option("--observed", tr.observed);
    c_train->add_option("--sequences", tr.sequences);
    c_train->add_option("--decoder-context", tr.decoder_context, "none | prev_y");
    c_train->add_option("--truth-seed", tr.truth_seed);
    c_train->add_option("--seed", tr.cfg.seed);
    c_train->add_option("--alpha", tr.cfg.alpha);
    c_train->add_option("--beta", tr.cfg.beta);
    c_train->add_option("--gamma", tr.cfg.gamma);
    c_train->add_option("--temperature", tr.cfg.temperature);
    c_train->add_option("--pretrain-steps", tr.cfg.pretrain_steps);
    c_train->add_option("--total-steps", tr.cfg.total_steps);
    c_train->add_option("--gen-lr", tr.cfg.gen_lr);
    c_train->add_option("--var-lr", tr.cfg.var_lr);
    c_train->add_option("--batch-size", tr.cfg.batch_size);
    c_train->add_option("--samples-per-y", tr.cfg.samples_per_y);
    c_train->add_option("--var-samples", tr.cfg.var_samples);
    c_train->add_flag("--elbo-updates-prior", tr.cfg.elbo_updates_prior);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "evaluate a trained model against its truth");
    c_eval->add_option("--model", ev.model)->required();
    c_eval->add_option("--posterior", ev.posterior);
    c_eval->add_option("--truth", ev.truth)->required();
    c_eval->add_option("--probes", ev.probes);
    c_eval->add_option("--seed", ev.seed);
    c_eval->add_option("--out", ev.out);

    ReportArgs rep;
    auto* c_rep = app.add_subcommand("report", "aggregate a solve-grad run CSV");
    c_rep->add_option("--runs", rep.runs)->required();
    c_rep->add_option("--out", rep.out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) return run_ingest(ingest);
        if (*c_enc) return run_encipher(enc);
        if (*c_svd) return run_solve_svd(svd);
        if (*c_grad) return run_solve_grad(grad);
        if (*c_ident) return run_identifiability(ident);
        if (*c_train) {
            apply_config_file(tr, c_train);
            return run_train(tr);
        }
        if (*c_eval) return run_eval(ev);
        if (*c_rep) return run_report(rep);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
