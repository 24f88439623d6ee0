#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "remp/config.hpp"
#include "remp/inspect.hpp"
#include "remp/train_eval.hpp"

namespace {

using namespace remp;

// Deterministic substreams of the master seed.
constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamInit = 2;
constexpr std::uint64_t kStreamEval = 3;
constexpr std::uint64_t kStreamInspect = 4;

struct CliState {
    std::string config_file;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> overrides;  // in flag order

    void bind(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& desc) {
        cmd->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, desc);
    }

    RunConfig build() const {
        RunConfig cfg;
        if (const char* env = std::getenv("REMP_CONFIG"); env && *env) cfg.load_file(env);
        if (!config_file.empty()) cfg.load_file(config_file);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        return cfg;
    }
};

void add_common(CLI::App* cmd, CliState& state) {
    cmd->add_option("--config", state.config_file, "config file (key = value lines)");
    cmd->add_option("--set", state.sets, "override any config key, e.g. --set train.lr0=0.01");
    state.bind(cmd, "--seed", "seed", "master random seed");
    cmd->footer("Config keys and defaults:\n" + config_help());
}

ModelParams init_model(const RunConfig& cfg, const Dataset& ds) {
    Rng rng(mix_seed(cfg.seed, kStreamInit));
    const std::size_t n_proj = cfg.share_projection ? 1 : std::max<std::size_t>(1, cfg.layers_train);
    return init_params(ds.dim, cfg.hidden_sizes(), cfg.model_embed_dim, ds.n_train_classes(), rng,
                       n_proj);
}

Dataset load_for(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw std::invalid_argument("--dataset (data.path) is required");
    return load_dataset(cfg.data_path);
}

ModelParams load_model_for(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.checkpoint_path.empty())
        throw std::invalid_argument("--checkpoint (checkpoint.path) is required");
    ModelParams params = load_checkpoint(cfg.checkpoint_path);
    if (params.embedder.input_dim() != ds.dim)
        throw std::runtime_error("checkpoint expects input dim " +
                                 std::to_string(params.embedder.input_dim()) + " but dataset '" +
                                 ds.name + "' has dim " + std::to_string(ds.dim));
    return params;
}

int cmd_gen_synth(const CliState& state) {
    RunConfig cfg = state.build();
    if (cfg.data_path.empty()) cfg.data_path = cfg.out_dir + "/" + cfg.gen_name + ".csv";
    Rng rng(mix_seed(cfg.seed, kStreamData));
    Dataset ds = gen_synthetic(cfg.gen_classes, cfg.gen_per_class, cfg.gen_dim, cfg.gen_spread,
                               cfg.gen_separation, rng,
                               {cfg.gen_split_train, cfg.gen_split_val, cfg.gen_split_test});
    ds.name = cfg.gen_name;
    save_dataset(ds, cfg.data_path);
    std::cout << "wrote " << cfg.data_path << ": " << ds.classes.size() << " classes (train "
              << ds.class_indices(Split::Train).size() << ", val "
              << ds.class_indices(Split::Val).size() << ", test "
              << ds.class_indices(Split::Test).size() << "), " << cfg.gen_per_class
              << " samples/class, dim " << ds.dim << "\n";
    return 0;
}

int cmd_train(const CliState& state) {
    RunConfig cfg = state.build();
    Dataset ds = load_for(cfg);
    ModelParams params = init_model(cfg, ds);

    std::ofstream log(cfg.out_dir + "/train.jsonl", std::ios::binary);
    if (!log) throw std::runtime_error("cannot write " + cfg.out_dir + "/train.jsonl");
    TrainResult result =
        train(ds, std::move(params), cfg.train_config(), cfg.propagation_config(),
              cfg.objective_config(), &log);
    save_checkpoint(result.best, cfg.out_dir + "/best.ckpt");
    save_checkpoint(result.last, cfg.out_dir + "/last.ckpt");
    std::cout << "trained " << cfg.max_iters << " iterations; best val accuracy "
              << result.best_val_accuracy << "\n"
              << "wrote " << cfg.out_dir << "/best.ckpt, last.ckpt, train.jsonl\n";
    return 0;
}

int cmd_eval(const CliState& state) {
    RunConfig cfg = state.build();
    Dataset ds = load_for(cfg);
    ModelParams params = load_model_for(cfg, ds);
    EvalReport report =
        evaluate(ds, params, cfg.eval_episodes, cfg.episode_shape(), cfg.propagation_config(),
                 cfg.objective_config(), mix_seed(cfg.seed, kStreamEval), cfg.threads,
                 cfg.parsed_eval_split());
    const std::string out_path = cfg.out_dir + "/eval_report.json";
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << report.to_json() << "\n";
    std::cout << "ACC " << report.mean << " ± " << report.ci95 << "\n";
    return 0;
}

std::vector<std::pair<Metric, Metric>> parse_metric_pairs(const std::string& spec) {
    std::vector<std::pair<Metric, Metric>> pairs;
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("metric pair '" + item + "' must be global:local");
        pairs.emplace_back(parse_metric(item.substr(0, colon)), parse_metric(item.substr(colon + 1)));
    }
    if (pairs.empty()) throw std::invalid_argument("no metric pairs given");
    return pairs;
}

int cmd_ablate(const CliState& state, const std::string& metric_pairs_spec) {
    RunConfig cfg = state.build();
    Dataset ds = load_for(cfg);
    ModelParams initial = init_model(cfg, ds);
    auto results = run_ablation(ds, initial, cfg.train_config(), cfg.propagation_config(),
                                cfg.objective_config(), parse_metric_pairs(metric_pairs_spec),
                                cfg.eval_episodes, mix_seed(cfg.seed, kStreamEval));

    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    std::cout << "arm                                        accuracy\n";
    for (const auto& [name, report] : results) {
        std::cout << name;
        for (std::size_t i = name.size(); i < 40; ++i) std::cout << ' ';
        std::cout << "  " << report.mean << " ± " << report.ci95 << "\n";
        nlohmann::ordered_json row;
        row["arm"] = name;
        row["report"] = nlohmann::ordered_json::parse(report.to_json());
        table.push_back(row);
    }
    const std::string out_path = cfg.out_dir + "/ablation.json";
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << table.dump(2) << "\n";
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_inspect(const CliState& state) {
    RunConfig cfg = state.build();
    Dataset ds = load_for(cfg);
    ModelParams params = load_model_for(cfg, ds);
    Rng rng(mix_seed(cfg.seed, kStreamInspect));
    Episode episode =
        sample_episode(ds, cfg.parsed_eval_split(), cfg.n_way, cfg.k_shot, cfg.m_query, rng);
    const Matrix z_support = embed_batch(params, episode.support);
    const Matrix z_query = embed_batch(params, episode.query);
    PropagationTrace trace = propagate(params, z_support, z_query, episode.n_way, episode.k_shot,
                                       cfg.propagation_config(), PropagationMode::Eval);
    InspectionResult result =
        write_heatmaps(trace, episode, cfg.objective_config().local_metric, cfg.out_dir);

    const std::string summary_path = cfg.out_dir + "/summary.txt";
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) throw std::runtime_error("cannot write " + summary_path);
    summary.precision(17);
    for (std::size_t l = 0; l < result.dominance.size(); ++l)
        summary << "layer " << l << " diagonal_dominance " << result.dominance[l] << "\n";
    std::cout << "wrote " << result.files.size() << " heatmaps and " << summary_path << "\n";
    return 0;
}

int cmd_export_embeddings(const CliState& state) {
    RunConfig cfg = state.build();
    Dataset ds = load_for(cfg);
    ModelParams params = load_model_for(cfg, ds);
    const Split split = cfg.parsed_eval_split();
    const std::string out_path = cfg.out_dir + "/embeddings.csv";
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out.precision(17);
    out << "class_id,split";
    for (std::size_t j = 0; j < params.embedder.output_dim(); ++j) out << ",z" << j;
    out << "\n";
    for (const std::size_t ci : ds.class_indices(split)) {
        const ClassData& cls = ds.classes[ci];
        const Matrix z = embed_batch(params, cls.features);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            out << cls.class_id << ',' << split_name(cls.split);
            for (std::size_t j = 0; j < z.cols(); ++j) out << ',' << z(i, j);
            out << "\n";
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"remp: rectified metric propagation for few-shot classification"};
    app.require_subcommand(1);

    CliState gen_state, train_state, eval_state, ablate_state, inspect_state, export_state;
    std::string metric_pairs = "cosine:neg_sq_euclidean";

    CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic Gaussian-cluster dataset");
    add_common(gen, gen_state);
    gen_state.bind(gen, "--classes", "gen.classes", "number of classes");
    gen_state.bind(gen, "--per-class", "gen.per_class", "samples per class");
    gen_state.bind(gen, "--dim", "gen.dim", "feature dimensionality");
    gen_state.bind(gen, "--spread", "gen.spread", "within-class stddev");
    gen_state.bind(gen, "--separation", "gen.separation", "class-mean hypercube half-width");
    gen_state.bind(gen, "--out", "data.path", "output CSV path");

    CLI::App* tr = app.add_subcommand(
        "train", "train a model (losses are means over queries; set "
                 "objective.mean_over_queries=false for the plain-sum form)");
    add_common(tr, train_state);
    train_state.bind(tr, "--dataset", "data.path", "dataset CSV path");
    train_state.bind(tr, "--out", "out.dir", "output directory");
    train_state.bind(tr, "--alpha", "train.alpha", "local-loss balance factor");
    train_state.bind(tr, "--arm", "train.arm", "cooperative|local_only|global_only");
    train_state.bind(tr, "--max-iters", "train.max_iters", "training iterations");
    train_state.bind(tr, "--n-way", "episode.n_way", "classes per episode");
    train_state.bind(tr, "--k-shot", "episode.k_shot", "support samples per class");
    train_state.bind(tr, "--m-query", "episode.m_query", "query samples per class");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint over test episodes");
    add_common(ev, eval_state);
    eval_state.bind(ev, "--dataset", "data.path", "dataset CSV path");
    eval_state.bind(ev, "--checkpoint", "checkpoint.path", "model checkpoint");
    eval_state.bind(ev, "--episodes", "eval.episodes", "number of episodes");
    eval_state.bind(ev, "--n-way", "episode.n_way", "classes per episode");
    eval_state.bind(ev, "--k-shot", "episode.k_shot", "support samples per class");
    eval_state.bind(ev, "--m-query", "episode.m_query", "query samples per class");
    eval_state.bind(ev, "--threads", "threads", "worker threads");
    eval_state.bind(ev, "--out", "out.dir", "output directory");

    CLI::App* ab = app.add_subcommand("ablate", "train and evaluate every schedule arm");
    add_common(ab, ablate_state);
    ablate_state.bind(ab, "--dataset", "data.path", "dataset CSV path");
    ablate_state.bind(ab, "--episodes", "eval.episodes", "test episodes per arm");
    ablate_state.bind(ab, "--out", "out.dir", "output directory");
    ab->add_option("--metrics", metric_pairs,
                   "comma-separated global:local metric pairs (default cosine:neg_sq_euclidean)");

    CLI::App* in = app.add_subcommand("inspect", "dump per-layer attention heatmaps for one episode");
    add_common(in, inspect_state);
    inspect_state.bind(in, "--dataset", "data.path", "dataset CSV path");
    inspect_state.bind(in, "--checkpoint", "checkpoint.path", "model checkpoint");
    inspect_state.bind(in, "--layers", "propagation.layers_eval", "propagation layers");
    inspect_state.bind(in, "--out", "out.dir", "output directory");

    CLI::App* ex = app.add_subcommand("export-embeddings", "embed a split and write it as CSV");
    add_common(ex, export_state);
    export_state.bind(ex, "--dataset", "data.path", "dataset CSV path");
    export_state.bind(ex, "--checkpoint", "checkpoint.path", "model checkpoint");
    export_state.bind(ex, "--split", "eval.split", "split to export");
    export_state.bind(ex, "--out", "out.dir", "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_synth(gen_state);
        if (tr->parsed()) return cmd_train(train_state);
        if (ev->parsed()) return cmd_eval(eval_state);
        if (ab->parsed()) return cmd_ablate(ablate_state, metric_pairs);
        if (in->parsed()) return cmd_inspect(inspect_state);
        if (ex->parsed()) return cmd_export_embeddings(export_state);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
