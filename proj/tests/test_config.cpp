#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "remp/config.hpp"

using namespace remp;

namespace {

std::string write_config(const std::string& body) {
    auto dir = std::filesystem::temp_directory_path() / "remp_config_tests";
    std::filesystem::create_directories(dir);
    static int counter = 0;
    auto path = dir / ("cfg" + std::to_string(counter++) + ".conf");
    std::ofstream out(path);
    out << body;
    return path.string();
}

}  // namespace

TEST_CASE("defaults match the documented values") {
    RunConfig c;
    CHECK(c.n_way == 5);
    CHECK(c.k_shot == 1);
    CHECK(c.m_query == 15);
    CHECK(c.lr0 == 0.1);
    CHECK(c.momentum == 0.9);
    CHECK(c.weight_decay == 5e-3);
    CHECK(c.alpha == 0.1);
    CHECK(c.layers_train == 2);
    CHECK(c.layers_eval == 10);
    CHECK(c.repulsion_constant == 1.5);
    CHECK(c.eval_episodes == 600);
    CHECK(c.seed == 42);
}

TEST_CASE("set parses every value type and rejects junk") {
    RunConfig c;
    c.set("train.lr0", "0.25");
    CHECK(c.lr0 == 0.25);
    c.set("episode.n_way", "7");
    CHECK(c.n_way == 7);
    c.set("repulsion.enabled", "false");
    CHECK(c.repulsion_enabled == false);
    c.set("repulsion.enabled", "on");
    CHECK(c.repulsion_enabled == true);
    c.set("gen.name", "blobs");
    CHECK(c.gen_name == "blobs");

    CHECK_THROWS_AS(c.set("no.such.key", "1"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("train.lr0", "fast"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("episode.n_way", "-3"), std::invalid_argument);
    CHECK_THROWS_AS(c.set("repulsion.enabled", "maybe"), std::invalid_argument);
}

TEST_CASE("load_file applies keys, comments, and blank lines") {
    RunConfig c;
    c.load_file(write_config(
        "# a comment line\n"
        "train.lr0 = 0.05\n"
        "\n"
        "episode.n_way = 4   # trailing comment\n"
        "model.hidden = 64,32\n"));
    CHECK(c.lr0 == 0.05);
    CHECK(c.n_way == 4);
    CHECK(c.hidden_sizes() == std::vector<std::size_t>{64, 32});
}

TEST_CASE("load_file reports the offending line") {
    RunConfig c;
    auto path = write_config("train.lr0 = 0.05\nthis is not a key value pair\n");
    try {
        c.load_file(path);
        FAIL("expected throw");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    CHECK_THROWS_AS(c.load_file("/nonexistent/path.conf"), std::runtime_error);
}

TEST_CASE("hidden_sizes handles the empty string") {
    RunConfig c;
    c.model_hidden = "";
    CHECK(c.hidden_sizes().empty());
    c.model_hidden = "32";
    CHECK(c.hidden_sizes() == std::vector<std::size_t>{32});
}

TEST_CASE("converters produce the typed configs") {
    RunConfig c;
    c.set("train.arm", "local_only");
    c.set("attention.softmax_axis", "row");
    c.set("repulsion.min_scope", "row");
    c.set("propagation.metric", "cosine");
    c.set("objective.global_metric", "neg_sq_euclidean");
    c.set("metric.squared", "false");
    c.set("eval.split", "val");

    TrainConfig tc = c.train_config();
    CHECK(tc.arm == ScheduleArm::LocalOnly);
    CHECK(tc.shape.n_way == 5);

    PropagationConfig pc = c.propagation_config();
    CHECK(pc.softmax_axis == SoftmaxAxis::Row);
    CHECK(pc.min_scope == MinScope::Row);
    CHECK(pc.metric.kind == MetricKind::Cosine);

    ObjectiveConfig oc = c.objective_config();
    CHECK(oc.global_metric.kind == MetricKind::NegSqEuclidean);
    CHECK(oc.global_metric.squared == false);

    CHECK(c.parsed_eval_split() == Split::Val);

    c.set("attention.softmax_axis", "diagonal");
    CHECK_THROWS_AS(c.propagation_config(), std::invalid_argument);
    c.set("attention.softmax_axis", "column");
    c.set("train.arm", "nonsense");
    CHECK_THROWS_AS(c.train_config(), std::invalid_argument);
}

TEST_CASE("neg_euclidean spelling forces the unsquared form") {
    RunConfig c;
    c.set("objective.local_metric", "neg_euclidean");
    c.set("metric.squared", "true");  // the explicit spelling wins
    ObjectiveConfig oc = c.objective_config();
    CHECK(oc.local_metric.kind == MetricKind::NegSqEuclidean);
    CHECK(oc.local_metric.squared == false);
}

TEST_CASE("config_help lists every key with its default") {
    std::string help = config_help();
    for (const char* key : {"data.path", "train.lr0", "propagation.layers_eval",
                            "repulsion.constant", "objective.temperature", "seed"})
        CHECK(help.find(key) != std::string::npos);
    CHECK(help.find("600") != std::string::npos);  // eval.episodes default
}
