#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>

#include "remp/data.hpp"

using namespace remp;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "remp_data_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

Dataset make_synth(std::uint64_t seed = 99) {
    Rng rng(seed);
    return gen_synthetic(10, 30, 4, 1.0, 3.0, rng, {0.6, 0.2, 0.2});
}

}  // namespace

TEST_CASE("gen_synthetic shape and split accounting") {
    Dataset ds = make_synth();
    CHECK(ds.dim == 4);
    CHECK(ds.classes.size() == 10);
    ds.validate();

    CHECK(ds.class_indices(Split::Train).size() == 6);
    CHECK(ds.class_indices(Split::Val).size() == 2);
    CHECK(ds.class_indices(Split::Test).size() == 2);
    CHECK(ds.n_train_classes() == 6);

    std::set<int> ids;
    for (const auto& c : ds.classes) {
        CHECK(c.features.rows() == 30);
        CHECK(c.features.cols() == 4);
        CHECK(c.features.all_finite());
        ids.insert(c.class_id);
    }
    CHECK(ids.size() == 10);  // class ids unique across splits
}

TEST_CASE("gen_synthetic is deterministic per seed") {
    Dataset a = make_synth(7);
    Dataset b = make_synth(7);
    Dataset c = make_synth(8);
    REQUIRE(a.classes.size() == b.classes.size());
    bool identical = true;
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
        if (!(a.classes[i].features == b.classes[i].features)) identical = false;
        if (a.classes[i].split != b.classes[i].split) identical = false;
    }
    CHECK(identical);
    bool differs = false;
    for (std::size_t i = 0; i < a.classes.size(); ++i)
        if (!(a.classes[i].features == c.classes[i].features)) differs = true;
    CHECK(differs);
}

TEST_CASE("gen_synthetic input validation") {
    Rng rng(1);
    CHECK_THROWS_AS(gen_synthetic(2, 10, 4, 1.0, 3.0, rng, {0.6, 0.2, 0.2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_synthetic(5, 10, 4, 1.0, 3.0, rng, {0.5, 0.2, 0.2}),
                    std::invalid_argument);
    // tiny class counts still leave at least one class per split
    Dataset ds = gen_synthetic(3, 5, 2, 0.5, 2.0, rng, {0.34, 0.33, 0.33});
    CHECK(ds.class_indices(Split::Train).size() >= 1);
    CHECK(ds.class_indices(Split::Val).size() >= 1);
    CHECK(ds.class_indices(Split::Test).size() >= 1);
}

TEST_CASE("save then load round-trips") {
    Dataset ds = make_synth(21);
    auto path = (temp_dir() / "roundtrip.csv").string();
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    CHECK(back.name == ds.name);
    CHECK(back.dim == ds.dim);
    REQUIRE(back.classes.size() == ds.classes.size());
    for (std::size_t i = 0; i < ds.classes.size(); ++i) {
        CHECK(back.classes[i].class_id == ds.classes[i].class_id);
        CHECK(back.classes[i].split == ds.classes[i].split);
        CHECK(back.classes[i].features == ds.classes[i].features);
    }
}

TEST_CASE("load_dataset rejects malformed input with line numbers") {
    auto dir = temp_dir();

    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        out << body;
        return (dir / name).string();
    };

    SUBCASE("bad header") {
        auto p = write("bad_header.csv", "id,split,f0\n1,train,0.5\n");
        CHECK_THROWS_AS(load_dataset(p), std::runtime_error);
    }
    SUBCASE("bad split token points at its line") {
        auto p = write("bad_split.csv",
                       "class_id,split,f0,f1\n1,train,0.5,0.5\n2,nope,0.5,0.5\n");
        try {
            load_dataset(p);
            FAIL("expected throw");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("3") != std::string::npos);
        }
    }
    SUBCASE("ragged row") {
        auto p = write("ragged.csv", "class_id,split,f0,f1\n1,train,0.5,0.5\n1,train,0.5\n");
        CHECK_THROWS_AS(load_dataset(p), std::runtime_error);
    }
    SUBCASE("non-numeric feature") {
        auto p = write("nonnum.csv", "class_id,split,f0\n1,train,abc\n");
        CHECK_THROWS_AS(load_dataset(p), std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_dataset((dir / "does_not_exist.csv").string()),
                        std::runtime_error);
    }
}

TEST_CASE("validate catches split-overlapping class ids and width mismatches") {
    Dataset ds = make_synth();
    SUBCASE("duplicate id across splits") {
        ds.classes[0].class_id = ds.classes.back().class_id;
        ds.classes[0].split = Split::Train;
        ds.classes.back().split = Split::Test;
        CHECK_THROWS_AS(ds.validate(), std::runtime_error);
    }
    SUBCASE("wrong feature width") {
        ds.classes[3].features = Matrix(5, ds.dim + 1);
        CHECK_THROWS_AS(ds.validate(), std::runtime_error);
    }
    SUBCASE("non-finite feature") {
        ds.classes[2].features(0, 0) = std::nan("");
        CHECK_THROWS_AS(ds.validate(), std::runtime_error);
    }
}

TEST_CASE("sample_episode layout and label bookkeeping") {
    Dataset ds = make_synth(33);
    Rng rng(5);
    const std::size_t N = 5, K = 2, M = 3;
    Episode ep = sample_episode(ds, Split::Train, N, K, M, rng);

    CHECK(ep.n_way == N);
    CHECK(ep.support.rows() == N * K);
    CHECK(ep.support.cols() == ds.dim);
    CHECK(ep.query.rows() == N * M);
    CHECK(ep.class_map.size() == N);

    // support block n carries local label n
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k)
            CHECK(ep.support_local[n * K + k] == static_cast<int>(n));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < M; ++m)
            CHECK(ep.query_local[n * M + m] == static_cast<int>(n));

    // globals must be consistent with class_map and lie in the train split
    auto train_positions = ds.class_indices(Split::Train);
    std::set<int> chosen(ep.class_map.begin(), ep.class_map.end());
    CHECK(chosen.size() == N);  // N distinct classes
    for (int g : ep.class_map) {
        CHECK(g >= 0);
        CHECK(g < static_cast<int>(train_positions.size()));
    }
    for (std::size_t i = 0; i < ep.support_global.size(); ++i)
        CHECK(ep.support_global[i] == ep.class_map[ep.support_local[i]]);
    for (std::size_t i = 0; i < ep.query_global.size(); ++i)
        CHECK(ep.query_global[i] == ep.class_map[ep.query_local[i]]);

    // every sampled row must exist verbatim in its class's feature matrix,
    // and support/query rows of a class must be disjoint samples
    for (std::size_t n = 0; n < N; ++n) {
        const ClassData& cls = ds.classes[train_positions[ep.class_map[n]]];
        std::set<std::size_t> used;
        auto find_row = [&](std::span<const double> row) {
            for (std::size_t r = 0; r < cls.features.rows(); ++r) {
                if (used.count(r)) continue;
                bool match = true;
                for (std::size_t j = 0; j < cls.features.cols(); ++j)
                    if (cls.features(r, j) != row[j]) {
                        match = false;
                        break;
                    }
                if (match) {
                    used.insert(r);
                    return true;
                }
            }
            return false;
        };
        for (std::size_t k = 0; k < K; ++k) CHECK(find_row(ep.support.row(n * K + k)));
        for (std::size_t m = 0; m < M; ++m) CHECK(find_row(ep.query.row(n * M + m)));
    }
}

TEST_CASE("sample_episode validation") {
    Dataset ds = make_synth();
    Rng rng(1);
    // more ways than classes in the split
    CHECK_THROWS_AS(sample_episode(ds, Split::Val, 5, 1, 1, rng), std::invalid_argument);
    // K + M larger than samples per class
    CHECK_THROWS_AS(sample_episode(ds, Split::Train, 5, 20, 15, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_episode(ds, Split::Train, 0, 1, 1, rng), std::invalid_argument);
}

TEST_CASE("sample_episode deterministic per rng state") {
    Dataset ds = make_synth(44);
    Rng a(123), b(123);
    Episode ea = sample_episode(ds, Split::Train, 5, 1, 5, a);
    Episode eb = sample_episode(ds, Split::Train, 5, 1, 5, b);
    CHECK(ea.support == eb.support);
    CHECK(ea.query == eb.query);
    CHECK(ea.class_map == eb.class_map);
}

TEST_CASE("split name round trip") {
    for (Split s : {Split::Train, Split::Val, Split::Test})
        CHECK(parse_split(split_name(s)) == s);
    CHECK_THROWS_AS(parse_split("weird"), std::invalid_argument);
}
