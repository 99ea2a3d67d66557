#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "isin/checkpoint.hpp"
#include "isin/config.hpp"
#include "isin/dataset.hpp"
#include "isin/evaluator.hpp"
#include "isin/netpbm.hpp"
#include "isin/pipeline.hpp"
#include "isin/relationship.hpp"
#include "isin/trainer.hpp"

namespace fs = std::filesystem;
using namespace isin;

// Exit codes: 0 success, 2 invalid config key/value, 3 missing path,
// 4 malformed file or schema mismatch, 1 anything else.
namespace {

constexpr const char* kHelpFooter =
    "Exit codes:\n"
    "  0  success\n"
    "  2  invalid config key or value\n"
    "  3  referenced path does not exist\n"
    "  4  malformed input file or schema mismatch\n"
    "  1  other error\n";

void require_exists(const std::string& path) {
    if (!fs::exists(path)) {
        std::cerr << "error: path does not exist: " << path << "\n";
        std::exit(3);
    }
}

std::vector<Sample> select_split(std::vector<Sample> samples, const std::string& split) {
    if (split == "all") return samples;
    Split want;
    if (split == "train")
        want = Split::train;
    else if (split == "val")
        want = Split::val;
    else if (split == "test")
        want = Split::test;
    else
        throw std::invalid_argument("unknown split '" + split + "'");
    std::vector<Sample> out;
    for (auto& s : samples)
        if (split_of(s.id) == want) out.push_back(std::move(s));
    return out;
}

void write_infer_outputs(const Checkpoint<float>& ckpt, const std::vector<Sample>& samples,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream states_csv(fs::path(out_dir) / "states.csv");
    states_csv << "id,bin,score\n";
    const ColorMap cmap =
        ckpt.mode == "baseline1" ? ColorMap{} : build_colormap(ckpt.net("part3").arch.num_parts);
    for (const auto& s : samples) {
        InferResult<float> r = Trainer<float>::infer(ckpt, s.image);
        Tensor<float> s_img;
        if (r.part_probs.numel() > 0)
            s_img = render_s(r.part_probs, cmap);
        else
            s_img = Tensor<float>({s.image.dim(0), s.image.dim(1), 3});
        netpbm::write((fs::path(out_dir) / ("s_" + s.id + ".ppm")).string(),
                      netpbm::from_tensor_rgb(s_img));
        netpbm::Image li;
        li.width = r.label_map.dim(1);
        li.height = r.label_map.dim(0);
        li.channels = 1;
        li.pixels.assign(r.label_map.data.begin(), r.label_map.data.end());
        netpbm::write((fs::path(out_dir) / ("pred_" + s.id + ".pgm")).string(), li);
        for (size_t b = 0; b < r.state_scores.size(); ++b)
            states_csv << s.id << "," << b << "," << r.state_scores[b] << "\n";
    }
}

std::vector<SamplePrediction> read_predictions(const std::string& pred_dir,
                                               const std::vector<Sample>& samples, int bins) {
    std::map<std::string, std::vector<double>> scores;
    const std::string csv = (fs::path(pred_dir) / "states.csv").string();
    require_exists(csv);
    std::ifstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error(csv + ":" + std::to_string(lineno) + ": expected id,bin,score");
        const std::string id = line.substr(0, c1);
        const int bin = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        auto& v = scores[id];
        if (v.empty()) v.assign(static_cast<size_t>(bins), 0.0);
        if (bin < 0 || bin >= bins)
            throw std::runtime_error(csv + ":" + std::to_string(lineno) + ": bin out of range");
        v[static_cast<size_t>(bin)] = std::stod(line.substr(c2 + 1));
    }
    std::vector<SamplePrediction> preds;
    for (const auto& s : samples) {
        const std::string pgm = (fs::path(pred_dir) / ("pred_" + s.id + ".pgm")).string();
        require_exists(pgm);
        netpbm::Image li = netpbm::read(pgm);
        SamplePrediction p;
        p.has_labels = true;
        p.labels = Tensor<uint8_t>({li.height, li.width});
        std::copy(li.pixels.begin(), li.pixels.end(), p.labels.data.begin());
        auto it = scores.find(s.id);
        if (it == scores.end()) throw std::runtime_error(csv + ": no state scores for id " + s.id);
        p.state_scores = it->second;
        preds.push_back(std::move(p));
    }
    return preds;
}

void write_eval_report(const EvalReport& rep, const std::string& out_dir) {
    std::ostringstream text;
    for (const auto& [bin, ap] : rep.state_map.per_bin_ap)
        text << "bin " << bin << " AP=" << ap << "\n";
    text << "mAP=" << rep.state_map.map << " seg_acc=" << rep.mean_seg_accuracy << "\n";
    std::cout << text.str();
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "report.txt") << text.str();
    std::ofstream csv(fs::path(out_dir) / "report.csv");
    csv << "metric,value\n";
    for (const auto& [bin, ap] : rep.state_map.per_bin_ap) csv << "ap_bin_" << bin << "," << ap << "\n";
    csv << "map," << rep.state_map.map << "\nseg_acc," << rep.mean_seg_accuracy << "\n";
}

void write_model(const LinearPredicateModel& model, const std::string& path) {
    std::ofstream os(path);
    os << model.pad_len << " " << model.num_predicates() << "\n";
    for (int j = 0; j < model.num_predicates(); ++j) {
        os << model.bias[static_cast<size_t>(j)];
        for (double w : model.weights[static_cast<size_t>(j)]) os << " " << w;
        os << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative part-state inference pipeline"};
    app.footer(kHelpFooter);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    uint64_t seed = 0;
    int jobs = 1;
    std::vector<std::pair<std::string, std::string>> overrides;
    app.add_option("--config", config_path, "key = value config file")->configurable(false);
    app.add_option("--seed", seed, "master random seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--jobs", jobs, "worker threads for generation/training");
    for (const auto& key : RunConfig::known_keys()) {
        app.add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
            "override config key " + key);
    }

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    auto* train = app.add_subcommand("train", "train a model on a dataset");
    auto* infer = app.add_subcommand("infer", "run inference, write S images, label maps, state scores");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a prediction directory");
    auto* relate = app.add_subcommand("relate", "train and evaluate the predicate classifier");
    for (auto* sub : {gen, train, infer, eval, relate}) sub->fallthrough();

    std::string data_dir, split = "all", ckpt_path, pred_dir, mode;
    std::string rel_train, rel_test, priors_path, image_path;
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--split", split, "all|train|val|test");
    train->add_option("--mode", mode, "setting1|setting2|setting3|baseline1");
    infer->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    infer->add_option("--data", data_dir, "dataset directory");
    infer->add_option("--image", image_path, "single PPM image");
    infer->add_option("--split", split, "all|train|val|test");
    eval->add_option("--ckpt", ckpt_path, "checkpoint file");
    eval->add_option("--pred", pred_dir, "prediction directory from `infer`");
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--split", split, "all|train|val|test");
    relate->add_option("--rel-train", rel_train, "relationship training file")->required();
    relate->add_option("--rel-test", rel_test, "relationship test file (defaults to training file)");
    relate->add_option("--priors", priors_path, "optional prior score file");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            require_exists(config_path);
            cfg.load_file(config_path);
        }
        for (const auto& [k, v] : overrides) cfg.set(k, v);

        if (gen->parsed()) {
            if (out_dir.empty()) throw std::invalid_argument("gen: --out is required");
            const GenConfig gc = cfg.gen_config(seed);
            const PartStateSchema schema = default_schema();
            write_dataset(generate(gc, schema), schema, out_dir);
            std::cout << "wrote " << gc.num_samples << " samples to " << out_dir << "\n";
        } else if (train->parsed()) {
            if (out_dir.empty()) throw std::invalid_argument("train: --out is required");
            require_exists(data_dir);
            TrainConfig tc = cfg.train_config(seed);
            if (!mode.empty()) tc.mode = train_mode_from(mode);
            Dataset ds = read_dataset(data_dir);
            Trainer<float> trainer(ds.schema, select_split(std::move(ds.samples), split), tc);
            fs::create_directories(out_dir);
            std::ofstream log(fs::path(out_dir) / "train_log.csv");
            log << "iteration,epoch,seg_loss,state_loss,total\n";
            trainer.set_log(&log);
            trainer.set_checkpoint_dir(out_dir);
            trainer.set_jobs(jobs);
            trainer.run();
            std::cout << "trained " << trainer.state().current_iteration << " iterations, checkpoints in "
                      << out_dir << "\n";
        } else if (infer->parsed()) {
            if (out_dir.empty()) throw std::invalid_argument("infer: --out is required");
            require_exists(ckpt_path);
            Checkpoint<float> ckpt = load_checkpoint<float>(ckpt_path);
            std::vector<Sample> samples;
            if (!image_path.empty()) {
                require_exists(image_path);
                Sample s;
                s.image = netpbm::to_tensor_rgb<float>(netpbm::read(image_path));
                s.id = fs::path(image_path).stem().string();
                samples.push_back(std::move(s));
            } else {
                if (data_dir.empty())
                    throw std::invalid_argument("infer: pass --data or --image");
                require_exists(data_dir);
                Dataset ds = read_dataset(data_dir);
                if (ds.schema.fingerprint() != ckpt.schema_fingerprint)
                    throw std::runtime_error("dataset schema does not match checkpoint");
                samples = select_split(std::move(ds.samples), split);
            }
            write_infer_outputs(ckpt, samples, out_dir);
            std::cout << "wrote predictions for " << samples.size() << " samples to " << out_dir << "\n";
        } else if (eval->parsed()) {
            require_exists(data_dir);
            Dataset ds = read_dataset(data_dir);
            std::vector<Sample> samples = select_split(std::move(ds.samples), split);
            EvalReport rep;
            if (!ckpt_path.empty()) {
                require_exists(ckpt_path);
                Checkpoint<float> ckpt = load_checkpoint<float>(ckpt_path);
                if (ckpt.schema_fingerprint != ds.schema.fingerprint())
                    throw std::runtime_error("dataset schema does not match checkpoint");
                rep = evaluate_checkpoint(ckpt, ds.schema, samples);
            } else if (!pred_dir.empty()) {
                require_exists(pred_dir);
                rep = evaluate_predictions(
                    ds.schema, read_predictions(pred_dir, samples, ds.schema.total_state_bins()),
                    samples);
            } else {
                throw std::invalid_argument("eval: pass --ckpt or --pred");
            }
            write_eval_report(rep, out_dir);
        } else if (relate->parsed()) {
            require_exists(rel_train);
            RelTrainConfig rc = cfg.relate_config(seed);
            const auto train_samples = read_relationship_dataset(rel_train);
            const LinearPredicateModel model = train_predicate_model(train_samples, rc);
            const auto test_samples =
                rel_test.empty() ? train_samples : read_relationship_dataset(rel_test);
            if (!rel_test.empty()) require_exists(rel_test);
            std::map<std::string, std::map<int, double>> priors;
            if (!priors_path.empty()) {
                require_exists(priors_path);
                priors = read_prior_scores(priors_path);
            }
            std::vector<std::vector<int64_t>> ranked, gt;
            for (const auto& s : test_samples) {
                std::vector<double> prior_vec;
                const std::vector<double>* pv = nullptr;
                auto it = priors.find(s.id);
                if (it != priors.end()) {
                    prior_vec.assign(static_cast<size_t>(model.num_predicates()), 0.0);
                    for (const auto& [p, v] : it->second)
                        if (p >= 0 && p < model.num_predicates()) prior_vec[static_cast<size_t>(p)] = v;
                    pv = &prior_vec;
                }
                auto r = predict_relationships(s.subject_states, s.object_states, model, pv);
                std::vector<int64_t> ids;
                for (const auto& rp : r) ids.push_back(rp.predicate);
                ranked.push_back(std::move(ids));
                gt.push_back({s.predicate});
            }
            std::ostringstream text;
            text << "recall@100=" << recall_at_k(ranked, gt, 100) << "\n"
                 << "recall@50=" << recall_at_k(ranked, gt, 50) << "\n"
                 << "recall@1=" << recall_at_k(ranked, gt, 1) << "\n";
            std::cout << text.str();
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_model(model, (fs::path(out_dir) / "model.txt").string());
                std::ofstream(fs::path(out_dir) / "recall.txt") << text.str();
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
