#include "remp/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace remp {

namespace {

struct ConfigEntry {
    const char* key;
    const char* description;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& v) {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

double parse_real(const std::string& v) {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
    return d;
}

#define STR_ENTRY(key, field, desc) \
    {key, desc, [](const RunConfig& c) { return c.field; }, \
     [](RunConfig& c, const std::string& v) { c.field = v; }}
#define SIZE_ENTRY(key, field, desc) \
    {key, desc, [](const RunConfig& c) { return std::to_string(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_size(v); }}
#define REAL_ENTRY(key, field, desc) \
    {key, desc, \
     [](const RunConfig& c) { std::ostringstream o; o << c.field; return o.str(); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_real(v); }}
#define BOOL_ENTRY(key, field, desc) \
    {key, desc, [](const RunConfig& c) { return c.field ? std::string("true") : std::string("false"); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }}

const std::vector<ConfigEntry>& entries() {
    static const std::vector<ConfigEntry> table = {
        STR_ENTRY("data.path", data_path, "dataset CSV path"),
        STR_ENTRY("checkpoint.path", checkpoint_path, "model checkpoint path"),
        STR_ENTRY("out.dir", out_dir, "output directory"),
        SIZE_ENTRY("gen.classes", gen_classes, "synthetic: number of classes"),
        SIZE_ENTRY("gen.per_class", gen_per_class, "synthetic: samples per class"),
        SIZE_ENTRY("gen.dim", gen_dim, "synthetic: feature dimensionality"),
        REAL_ENTRY("gen.spread", gen_spread, "synthetic: within-class stddev"),
        REAL_ENTRY("gen.separation", gen_separation, "synthetic: class-mean hypercube half-width"),
        REAL_ENTRY("gen.split_train", gen_split_train, "synthetic: train class fraction"),
        REAL_ENTRY("gen.split_val", gen_split_val, "synthetic: val class fraction"),
        REAL_ENTRY("gen.split_test", gen_split_test, "synthetic: test class fraction"),
        STR_ENTRY("gen.name", gen_name, "synthetic: dataset name"),
        STR_ENTRY("model.hidden", model_hidden, "comma-separated hidden layer sizes"),
        SIZE_ENTRY("model.embed_dim", model_embed_dim, "embedding dimensionality d"),
        SIZE_ENTRY("episode.n_way", n_way, "classes per episode"),
        SIZE_ENTRY("episode.k_shot", k_shot, "support samples per class"),
        SIZE_ENTRY("episode.m_query", m_query, "query samples per class"),
        REAL_ENTRY("train.lr0", lr0, "initial learning rate"),
        REAL_ENTRY("train.momentum", momentum, "SGD momentum"),
        REAL_ENTRY("train.weight_decay", weight_decay, "L2 weight decay"),
        REAL_ENTRY("train.decay_factor", decay_factor, "learning-rate decay factor"),
        SIZE_ENTRY("train.decay_every", decay_every, "iterations between lr decays"),
        SIZE_ENTRY("train.max_iters", max_iters, "training iterations"),
        REAL_ENTRY("train.alpha", alpha, "balance factor on the local loss"),
        STR_ENTRY("train.arm", arm, "schedule arm: cooperative|local_only|global_only"),
        SIZE_ENTRY("train.log_every", log_every, "iterations between log lines"),
        SIZE_ENTRY("train.eval_every", eval_every, "iterations between validation passes"),
        SIZE_ENTRY("train.val_episodes", val_episodes, "validation episodes per pass"),
        SIZE_ENTRY("propagation.layers_train", layers_train, "rectification layers in training"),
        SIZE_ENTRY("propagation.layers_eval", layers_eval, "rectification layers in evaluation"),
        STR_ENTRY("propagation.metric", propagation_metric,
                  "attention metric: cosine|neg_sq_euclidean|neg_euclidean"),
        BOOL_ENTRY("propagation.share_projection", share_projection,
                   "one projection layer shared across the stack"),
        STR_ENTRY("attention.softmax_axis", softmax_axis, "A^Q softmax axis: column|row"),
        BOOL_ENTRY("repulsion.enabled", repulsion_enabled, "apply repulsive masking"),
        REAL_ENTRY("repulsion.constant", repulsion_constant, "c in beta_l = c/(N(L-l))"),
        STR_ENTRY("repulsion.min_scope", repulsion_min_scope, "min(A) scope: global|row"),
        BOOL_ENTRY("repulsion.train", repulsion_train, "mask during training propagation"),
        BOOL_ENTRY("repulsion.eval", repulsion_eval, "mask during evaluation propagation"),
        STR_ENTRY("objective.global_metric", global_metric, "metric against global class weights"),
        STR_ENTRY("objective.local_metric", local_metric, "metric against prototypes"),
        BOOL_ENTRY("objective.mean_over_queries", mean_over_queries,
                   "mean instead of sum over queries in the losses"),
        BOOL_ENTRY("objective.local_on_raw_prototypes", local_on_raw_prototypes,
                   "classify against raw support means (inductive)"),
        REAL_ENTRY("objective.temperature", temperature, "similarity logit temperature"),
        BOOL_ENTRY("metric.squared", metric_squared, "squared form of negative Euclidean distance"),
        SIZE_ENTRY("eval.episodes", eval_episodes, "test episodes to evaluate"),
        STR_ENTRY("eval.split", eval_split, "split to evaluate: train|val|test"),
        SIZE_ENTRY("seed", seed, "master random seed"),
        SIZE_ENTRY("threads", threads, "evaluation worker threads"),
    };
    return table;
}

#undef STR_ENTRY
#undef SIZE_ENTRY
#undef REAL_ENTRY
#undef BOOL_ENTRY

Metric make_metric(const std::string& name, bool squared) {
    Metric m = parse_metric(name);
    if (m.kind == MetricKind::NegSqEuclidean && name != "neg_euclidean") m.squared = squared;
    return m;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& entry : entries())
        if (key == entry.key) {
            try {
                entry.set(*this, value);
            } catch (const std::exception& e) {
                throw std::invalid_argument("config key '" + key + "': " + e.what());
            }
            return;
        }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::vector<std::size_t> RunConfig::hidden_sizes() const {
    std::vector<std::size_t> sizes;
    std::istringstream ss(model_hidden);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (!field.empty()) sizes.push_back(parse_size(field));
    }
    return sizes;
}

EpisodeShape RunConfig::episode_shape() const { return {n_way, k_shot, m_query}; }

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.lr0 = lr0;
    tc.momentum = momentum;
    tc.weight_decay = weight_decay;
    tc.decay_factor = decay_factor;
    tc.decay_every = decay_every;
    tc.max_iters = max_iters;
    tc.alpha = alpha;
    tc.shape = episode_shape();
    tc.seed = seed;
    tc.arm = parse_arm(arm);
    tc.log_every = log_every;
    tc.eval_every = eval_every;
    tc.val_episodes = val_episodes;
    return tc;
}

PropagationConfig RunConfig::propagation_config(bool) const {
    PropagationConfig pc;
    pc.layers_train = layers_train;
    pc.layers_eval = layers_eval;
    pc.repulsion_constant = repulsion_constant;
    pc.repulsion_enabled = repulsion_enabled;
    pc.repulsion_train = repulsion_train;
    pc.repulsion_eval = repulsion_eval;
    pc.metric = make_metric(propagation_metric, metric_squared);
    if (softmax_axis == "column") pc.softmax_axis = SoftmaxAxis::Column;
    else if (softmax_axis == "row") pc.softmax_axis = SoftmaxAxis::Row;
    else throw std::invalid_argument("attention.softmax_axis must be 'column' or 'row'");
    if (repulsion_min_scope == "global") pc.min_scope = MinScope::Global;
    else if (repulsion_min_scope == "row") pc.min_scope = MinScope::Row;
    else throw std::invalid_argument("repulsion.min_scope must be 'global' or 'row'");
    pc.share_projection = share_projection;
    return pc;
}

ObjectiveConfig RunConfig::objective_config() const {
    ObjectiveConfig oc;
    oc.global_metric = make_metric(global_metric, metric_squared);
    oc.local_metric = make_metric(local_metric, metric_squared);
    oc.temperature = temperature;
    oc.mean_over_queries = mean_over_queries;
    oc.local_on_raw_prototypes = local_on_raw_prototypes;
    return oc;
}

Split RunConfig::parsed_eval_split() const { return parse_split(eval_split); }

std::string config_help() {
    RunConfig defaults;
    std::ostringstream out;
    for (const auto& entry : entries()) {
        std::string key_eq = std::string(entry.key) + " = " + entry.get(defaults);
        out << "  " << key_eq;
        for (std::size_t i = key_eq.size(); i < 44; ++i) out << ' ';
        out << "# " << entry.description << "\n";
    }
    return out.str();
}

}  // namespace remp
