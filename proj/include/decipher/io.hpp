#pragma once

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "decipher/cipher.hpp"
#include "decipher/ngram.hpp"
#include "decipher/semisup.hpp"
#include "decipher/symbols.hpp"

namespace decipher {

namespace io {

inline std::vector<double> flatten(const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
}

inline Eigen::MatrixXd unflatten(const std::vector<double>& v, int rows, int cols) {
    if (static_cast<int>(v.size()) != rows * cols)
        throw std::invalid_argument("matrix payload size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = v[k++];
    return m;
}

inline nlohmann::json stats_to_json(const NGramStats& s, const std::string& symbols) {
    nlohmann::json j;
    j["symbols"] = symbols;
    j["order"] = s.order;
    j["token_count"] = s.token_count;
    j["unigram"] = std::vector<double>(s.unigram.data(), s.unigram.data() + s.unigram.size());
    if (s.order >= 2) j["bigram"] = flatten(s.bigram);
    if (s.order >= 3) j["trigram"] = s.trigram;
    return j;
}

inline NGramStats stats_from_json(const nlohmann::json& j, std::string* symbols = nullptr) {
    NGramStats s;
    if (symbols) *symbols = j.at("symbols").get<std::string>();
    s.alphabet = static_cast<int>(j.at("symbols").get<std::string>().size());
    s.order = j.at("order").get<int>();
    s.token_count = j.at("token_count").get<std::int64_t>();
    const auto uni = j.at("unigram").get<std::vector<double>>();
    s.unigram = Eigen::Map<const Eigen::VectorXd>(uni.data(), static_cast<Eigen::Index>(uni.size()));
    if (s.order >= 2)
        s.bigram = unflatten(j.at("bigram").get<std::vector<double>>(), s.alphabet, s.alphabet);
    if (s.order >= 3) s.trigram = j.at("trigram").get<std::vector<double>>();
    return s;
}

inline nlohmann::json model_to_json(const TabularJointModel& m) {
    nlohmann::json j;
    j["hidden"] = m.n_hidden;
    j["observed"] = m.n_obs;
    j["decoder_context"] = m.context == DecoderContext::none ? "none" : "prev_y";
    j["prior_logits"] = flatten(m.prior_logits);
    j["emit_logits"] = flatten(m.emit_logits);
    return j;
}

inline TabularJointModel model_from_json(const nlohmann::json& j) {
    const auto ctx = j.at("decoder_context").get<std::string>() == "prev_y"
                         ? DecoderContext::prev_y : DecoderContext::none;
    TabularJointModel m(j.at("hidden").get<int>(), j.at("observed").get<int>(), ctx);
    m.prior_logits = unflatten(j.at("prior_logits").get<std::vector<double>>(),
                               m.n_hidden + 1, m.n_hidden + 1);
    m.emit_logits = unflatten(j.at("emit_logits").get<std::vector<double>>(),
                              static_cast<int>(m.emit_logits.rows()), m.n_obs);
    return m;
}

inline nlohmann::json posterior_to_json(const TabularPosterior& q) {
    nlohmann::json j;
    j["hidden"] = q.n_hidden;
    j["observed"] = q.n_obs;
    j["window"] = q.window;
    j["logits"] = flatten(q.logits);
    return j;
}

inline TabularPosterior posterior_from_json(const nlohmann::json& j) {
    TabularPosterior q(j.at("hidden").get<int>(), j.at("observed").get<int>(),
                       j.at("window").get<int>());
    q.logits = unflatten(j.at("logits").get<std::vector<double>>(),
                         static_cast<int>(q.logits.rows()), q.n_hidden);
    return q;
}

inline nlohmann::json permutation_to_json(const Permutation& p) {
    return nlohmann::json(p.mapping());
}

inline Permutation permutation_from_json(const nlohmann::json& j) {
    return Permutation(j.get<std::vector<int>>());
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return nlohmann::json::parse(in);
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// key=value configuration files ('#' starts a comment).
inline std::map<std::string, std::string> read_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    for (std::string line : read_lines(path)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace io

}  // namespace decipher
