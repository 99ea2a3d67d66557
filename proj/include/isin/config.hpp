#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isin/dataset.hpp"
#include "isin/relationship.hpp"
#include "isin/trainer.hpp"

namespace isin {

/// Merged key=value settings: config file first, flag overrides on top.
/// Every key is validated against the known-key registry before use.
class RunConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "gen.image_size", "gen.num_samples", "gen.occluder_probability",
            "gen.detach_probability", "gen.noise_sigma",
            "train.lambda", "train.max_iterations", "train.epochs_per_iteration",
            "train.subsequence_length", "train.stop_rel_improvement", "train.mode",
            "train.sgd.learning_rate", "train.sgd.momentum", "train.sgd.batch_size",
            "train.sgd.weight_decay",
            "relate.epochs", "relate.learning_rate", "relate.weight_decay", "relate.pad_len",
        };
        return keys;
    }

    void set(const std::string& key, const std::string& value) {
        if (!known_keys().count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
        values_[key] = value;
    }

    /// `key = value` lines, '#' comments, blank lines ignored.
    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error(path + ": cannot open config file");
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                            ": expected key = value");
            try {
                set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    GenConfig gen_config(uint64_t seed) const {
        GenConfig g;
        g.seed = seed;
        get_int("gen.image_size", g.image_size);
        get_int("gen.num_samples", g.num_samples);
        get_real("gen.occluder_probability", g.occluder_probability);
        get_real("gen.detach_probability", g.detach_probability);
        get_real("gen.noise_sigma", g.noise_sigma);
        g.validate();
        return g;
    }

    TrainConfig train_config(uint64_t seed) const {
        TrainConfig t;
        t.seed = seed;
        get_real("train.lambda", t.lambda);
        get_int("train.max_iterations", t.max_iterations);
        get_int("train.epochs_per_iteration", t.epochs_per_iteration);
        get_int("train.subsequence_length", t.subsequence_length);
        get_real("train.stop_rel_improvement", t.stop_rel_improvement);
        if (values_.count("train.mode")) t.mode = train_mode_from(values_.at("train.mode"));
        get_real("train.sgd.learning_rate", t.sgd.learning_rate);
        get_real("train.sgd.momentum", t.sgd.momentum);
        get_int("train.sgd.batch_size", t.sgd.batch_size);
        get_real("train.sgd.weight_decay", t.sgd.weight_decay);
        t.validate();
        return t;
    }

    RelTrainConfig relate_config(uint64_t seed) const {
        RelTrainConfig r;
        r.seed = seed;
        get_int("relate.epochs", r.epochs);
        get_real("relate.learning_rate", r.learning_rate);
        get_real("relate.weight_decay", r.weight_decay);
        get_int("relate.pad_len", r.pad_len);
        check(r.epochs >= 1 && r.pad_len >= 1 && r.learning_rate > 0,
              "relate: invalid training settings");
        return r;
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    void get_int(const std::string& key, int& out) const {
        auto it = values_.find(key);
        if (it == values_.end()) return;
        try {
            size_t used = 0;
            out = std::stoi(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': bad integer '" + it->second + "'");
        }
    }

    void get_real(const std::string& key, double& out) const {
        auto it = values_.find(key);
        if (it == values_.end()) return;
        try {
            size_t used = 0;
            out = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': bad number '" + it->second + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace isin
