#ifndef REMP_CONFIG_HPP
#define REMP_CONFIG_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "remp/train_eval.hpp"

namespace remp {

// Flat configuration: `section.key = value` lines, every key defaulted,
// unknown keys rejected. CLI flags override file values override defaults.
struct RunConfig {
    // paths
    std::string data_path;
    std::string checkpoint_path;
    std::string out_dir = ".";

    // synthetic generator
    std::size_t gen_classes = 10;
    std::size_t gen_per_class = 50;
    std::size_t gen_dim = 16;
    double gen_spread = 1.5;
    double gen_separation = 3.0;
    double gen_split_train = 0.6;
    double gen_split_val = 0.2;
    double gen_split_test = 0.2;
    std::string gen_name = "synthetic";

    // model
    std::string model_hidden = "32";  // comma-separated hidden layer sizes
    std::size_t model_embed_dim = 16;

    // episode shape
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t m_query = 15;

    // training
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-3;
    double decay_factor = 10.0;
    std::size_t decay_every = 1000;
    std::size_t max_iters = 3000;
    double alpha = 0.1;
    std::string arm = "cooperative";
    std::size_t log_every = 50;
    std::size_t eval_every = 500;
    std::size_t val_episodes = 100;

    // propagation
    std::size_t layers_train = 2;
    std::size_t layers_eval = 10;
    std::string propagation_metric = "neg_sq_euclidean";
    bool share_projection = true;
    std::string softmax_axis = "column";
    bool repulsion_enabled = true;
    double repulsion_constant = 1.5;
    std::string repulsion_min_scope = "global";
    bool repulsion_train = true;
    bool repulsion_eval = true;

    // objective
    std::string global_metric = "cosine";
    std::string local_metric = "neg_sq_euclidean";
    bool mean_over_queries = true;
    bool local_on_raw_prototypes = false;
    double temperature = 1.0;
    bool metric_squared = true;

    // evaluation
    std::size_t eval_episodes = 600;
    std::string eval_split = "test";

    std::uint64_t seed = 42;
    std::size_t threads = 1;

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);

    std::vector<std::size_t> hidden_sizes() const;
    EpisodeShape episode_shape() const;
    TrainConfig train_config() const;
    PropagationConfig propagation_config(bool eval_mode = false) const;
    ObjectiveConfig objective_config() const;
    Split parsed_eval_split() const;
};

// One line per key: `key = default  # description`.
std::string config_help();

}  // namespace remp

#endif
