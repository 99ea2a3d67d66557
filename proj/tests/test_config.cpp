#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "isin/config.hpp"

using namespace isin;
namespace fs = std::filesystem;

namespace {
std::string write_config(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "isin_config_test";
    fs::create_directories(dir);
    const std::string path = (dir / name).string();
    std::ofstream(path) << body;
    return path;
}
}  // namespace

TEST_CASE("unknown keys are rejected before any work starts") {
    RunConfig cfg;
    REQUIRE_THROWS_WITH(cfg.set("gen.imagesize", "32"),
                        Catch::Matchers::ContainsSubstring("unknown config key"));
    REQUIRE_NOTHROW(cfg.set("gen.image_size", "32"));
}

TEST_CASE("config files parse key = value with comments") {
    RunConfig cfg;
    cfg.load_file(write_config("good.cfg",
                               "# a comment\n"
                               "gen.image_size = 16\n"
                               "train.lambda = 0.5   # trailing comment\n"
                               "\n"
                               "train.mode = setting3\n"));
    GenConfig g = cfg.gen_config(7);
    REQUIRE(g.image_size == 16);
    REQUIRE(g.seed == 7);
    TrainConfig t = cfg.train_config(7);
    REQUIRE(t.lambda == 0.5);
    REQUIRE(t.mode == TrainMode::setting3);
    REQUIRE(t.max_iterations == 12);  // untouched defaults survive
}

TEST_CASE("malformed config lines carry file and line context") {
    RunConfig cfg;
    REQUIRE_THROWS_WITH(cfg.load_file(write_config("noeq.cfg", "gen.image_size 16\n")),
                        Catch::Matchers::ContainsSubstring("noeq.cfg:1"));
    REQUIRE_THROWS_WITH(cfg.load_file(write_config("unknown.cfg", "nope.key = 1\n")),
                        Catch::Matchers::ContainsSubstring("unknown.cfg:1"));
    REQUIRE_THROWS_AS(cfg.load_file("/nonexistent/isin.cfg"), std::runtime_error);
}

TEST_CASE("values are validated when configs are materialized") {
    RunConfig cfg;
    cfg.set("gen.image_size", "abc");
    REQUIRE_THROWS_WITH(cfg.gen_config(0), Catch::Matchers::ContainsSubstring("bad integer"));

    RunConfig cfg2;
    cfg2.set("gen.image_size", "8");  // below the minimum
    REQUIRE_THROWS_AS(cfg2.gen_config(0), std::invalid_argument);

    RunConfig cfg3;
    cfg3.set("train.sgd.momentum", "1.5");
    REQUIRE_THROWS_AS(cfg3.train_config(0), std::invalid_argument);

    RunConfig cfg4;
    cfg4.set("train.mode", "setting9");
    REQUIRE_THROWS_AS(cfg4.train_config(0), std::invalid_argument);

    RunConfig cfg5;
    cfg5.set("train.lambda", "0.2x");
    REQUIRE_THROWS_WITH(cfg5.train_config(0), Catch::Matchers::ContainsSubstring("bad number"));
}

TEST_CASE("later set calls override file values") {
    RunConfig cfg;
    cfg.load_file(write_config("base.cfg", "gen.num_samples = 10\n"));
    cfg.set("gen.num_samples", "25");
    REQUIRE(cfg.gen_config(0).num_samples == 25);
}

TEST_CASE("relate settings materialize with defaults") {
    RunConfig cfg;
    RelTrainConfig r = cfg.relate_config(3);
    REQUIRE(r.pad_len == 72);
    REQUIRE(r.epochs == 60);
    REQUIRE(r.seed == 3);
    cfg.set("relate.pad_len", "6");
    REQUIRE(cfg.relate_config(3).pad_len == 6);
    cfg.set("relate.epochs", "0");
    REQUIRE_THROWS_AS(cfg.relate_config(3), std::invalid_argument);
}
