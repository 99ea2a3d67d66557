#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "isin/rng.hpp"
#include "isin/tensor.hpp"

namespace isin {

struct RelationshipSample {
    std::string id;
    std::string subject_category, object_category;
    std::vector<uint8_t> subject_states, object_states;
    int predicate = 0;
};

/// concat(pad(s1), pad(s2)); padding appends zeros up to pad_len.
inline std::vector<double> build_feature(const std::vector<uint8_t>& s1,
                                         const std::vector<uint8_t>& s2, int pad_len) {
    check(static_cast<int>(s1.size()) <= pad_len,
          "build_feature: subject vector length " + std::to_string(s1.size()) + " exceeds pad_len " +
              std::to_string(pad_len));
    check(static_cast<int>(s2.size()) <= pad_len, "build_feature: object vector exceeds pad_len");
    std::vector<double> f(static_cast<size_t>(2 * pad_len), 0.0);
    for (size_t i = 0; i < s1.size(); ++i) f[i] = s1[i];
    for (size_t i = 0; i < s2.size(); ++i) f[static_cast<size_t>(pad_len) + i] = s2[i];
    return f;
}

/// One-vs-rest linear classifiers on the padded pair feature.
struct LinearPredicateModel {
    int pad_len = 72;
    std::vector<std::vector<double>> weights;  // [predicate][2*pad_len]
    std::vector<double> bias;

    int num_predicates() const { return static_cast<int>(weights.size()); }

    std::vector<double> scores(const std::vector<double>& feature) const {
        check(feature.size() == static_cast<size_t>(2 * pad_len), "model: feature length mismatch");
        std::vector<double> out(weights.size());
        for (size_t j = 0; j < weights.size(); ++j) {
            double s = bias[j];
            for (size_t i = 0; i < feature.size(); ++i) s += weights[j][i] * feature[i];
            out[j] = s;
        }
        return out;
    }
};

struct RelTrainConfig {
    uint64_t seed = 0;
    int epochs = 60;
    double learning_rate = 0.1;
    double weight_decay = 1e-4;
    int pad_len = 72;
};

/// Hinge-loss SGD over one-vs-rest linear classifiers; deterministic
/// given the seed.
inline LinearPredicateModel train_predicate_model(const std::vector<RelationshipSample>& samples,
                                                  const RelTrainConfig& cfg) {
    check(!samples.empty(), "train_predicate_model: empty training set");
    int num_pred = 0;
    std::vector<int> seen;
    for (const auto& s : samples) {
        check(s.predicate >= 0, "train_predicate_model: negative predicate id");
        num_pred = std::max(num_pred, s.predicate + 1);
        if (std::find(seen.begin(), seen.end(), s.predicate) == seen.end()) seen.push_back(s.predicate);
    }
    check(seen.size() >= 2, "train_predicate_model: need at least 2 predicate classes, got " +
                                std::to_string(seen.size()));

    LinearPredicateModel model;
    model.pad_len = cfg.pad_len;
    model.weights.assign(static_cast<size_t>(num_pred),
                         std::vector<double>(static_cast<size_t>(2 * cfg.pad_len), 0.0));
    model.bias.assign(static_cast<size_t>(num_pred), 0.0);

    std::vector<std::vector<double>> feats;
    feats.reserve(samples.size());
    for (const auto& s : samples)
        feats.push_back(build_feature(s.subject_states, s.object_states, cfg.pad_len));

    Rng rng = Rng::substream(cfg.seed, "relation.shuffle");
    std::vector<int> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        for (int idx : order) {
            const auto& f = feats[static_cast<size_t>(idx)];
            const int label = samples[static_cast<size_t>(idx)].predicate;
            for (int j = 0; j < num_pred; ++j) {
                auto& w = model.weights[static_cast<size_t>(j)];
                const double y = j == label ? 1.0 : -1.0;
                double margin = model.bias[static_cast<size_t>(j)];
                for (size_t x = 0; x < f.size(); ++x) margin += w[x] * f[x];
                margin *= y;
                for (size_t x = 0; x < f.size(); ++x) {
                    double g = cfg.weight_decay * w[x];
                    if (margin < 1.0) g -= y * f[x];
                    w[x] -= cfg.learning_rate * g;
                }
                if (margin < 1.0) model.bias[static_cast<size_t>(j)] += cfg.learning_rate * y;
            }
        }
    }
    return model;
}

/// Arithmetic mean of the part-state score and an external prior score.
inline double fuse_scores(double part_state_score, double prior_score) {
    check(std::isfinite(part_state_score) && std::isfinite(prior_score), "fuse_scores: non-finite input");
    return 0.5 * (part_state_score + prior_score);
}

struct RankedPredicate {
    int predicate;
    double score;
};

/// Ranked predicates for one object pair; prior scores are optional and
/// fused by averaging when present. Ties break toward the lower id.
inline std::vector<RankedPredicate> predict_relationships(const std::vector<uint8_t>& subject_states,
                                                          const std::vector<uint8_t>& object_states,
                                                          const LinearPredicateModel& model,
                                                          const std::vector<double>* priors = nullptr) {
    auto scores = model.scores(build_feature(subject_states, object_states, model.pad_len));
    if (priors) {
        check(priors->size() == scores.size(), "predict_relationships: prior score length mismatch");
        for (size_t j = 0; j < scores.size(); ++j) scores[j] = fuse_scores(scores[j], (*priors)[j]);
    }
    std::vector<RankedPredicate> out;
    for (size_t j = 0; j < scores.size(); ++j) out.push_back({static_cast<int>(j), scores[j]});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedPredicate& a, const RankedPredicate& b) { return a.score > b.score; });
    return out;
}

// ---- file formats -------------------------------------------------------

inline void write_relationship_dataset(const std::vector<RelationshipSample>& samples,
                                       const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot create");
    for (const auto& s : samples) {
        os << s.id << '\t' << s.subject_category << '\t' << s.object_category << '\t';
        for (uint8_t b : s.subject_states) os << (b ? '1' : '0');
        os << '\t';
        for (uint8_t b : s.object_states) os << (b ? '1' : '0');
        os << '\t' << s.predicate << '\n';
    }
}

inline std::vector<RelationshipSample> read_relationship_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    std::vector<RelationshipSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        std::vector<std::string> f;
        size_t pos = 0;
        while (true) {
            const size_t tab = line.find('\t', pos);
            f.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (f.size() != 6) throw std::runtime_error(where + ": expected 6 tab-separated fields");
        RelationshipSample s;
        s.id = f[0];
        s.subject_category = f[1];
        s.object_category = f[2];
        for (char c : f[3]) {
            if (c != '0' && c != '1') throw std::runtime_error(where + ": subject bits must be 0/1");
            s.subject_states.push_back(c == '1');
        }
        for (char c : f[4]) {
            if (c != '0' && c != '1') throw std::runtime_error(where + ": object bits must be 0/1");
            s.object_states.push_back(c == '1');
        }
        try {
            s.predicate = std::stoi(f[5]);
        } catch (const std::exception&) {
            throw std::runtime_error(where + ": bad predicate id '" + f[5] + "'");
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// pair_id -> per-predicate prior scores, from `pair_id\tpredicate\tscore` lines.
inline std::map<std::string, std::map<int, double>> read_prior_scores(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    std::map<std::string, std::map<int, double>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string pair_id, pred, score;
        if (!std::getline(ls, pair_id, '\t') || !std::getline(ls, pred, '\t') ||
            !std::getline(ls, score))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected pair_id<TAB>predicate<TAB>score");
        try {
            out[pair_id][std::stoi(pred)] = std::stod(score);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad numeric field");
        }
    }
    return out;
}

}  // namespace isin
