#ifndef REMP_TRAIN_EVAL_HPP
#define REMP_TRAIN_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "remp/data.hpp"
#include "remp/objective.hpp"

namespace remp {

struct EpisodeShape {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t m_query = 15;
};

struct TrainConfig {
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-3;
    double decay_factor = 10.0;
    std::size_t decay_every = 1000;
    std::size_t max_iters = 3000;
    double alpha = 0.1;
    EpisodeShape shape;
    std::uint64_t seed = 0;
    ScheduleArm arm = ScheduleArm::Cooperative;
    std::size_t log_every = 50;
    std::size_t eval_every = 500;
    std::size_t val_episodes = 100;
};

struct OptimizerState {
    GradientBag velocity;
    std::size_t iteration = 0;
    double lr = 0.0;
};

OptimizerState make_optimizer_state(const ModelParams& params, const TrainConfig& config);

// v <- momentum v + (grad + weight_decay param); param <- param - lr v.
// Tensors whose name starts with a frozen prefix are left untouched.
void sgd_step(ModelParams& params, const GradientBag& grads, OptimizerState& state,
              const TrainConfig& config, const std::vector<std::string>& frozen_prefixes = {});

struct EvalReport {
    std::size_t n_episodes = 0;
    std::vector<double> accuracies;
    double mean = 0.0;
    double stddev = 0.0;   // n-1 divisor
    double ci95 = 0.0;     // 1.96 stddev / sqrt(n)
    std::string config_fingerprint;

    std::string to_json() const;
};

double ci95_from(double stddev, std::size_t n);

struct LogRecord {
    std::size_t iter = 0;
    double lr = 0.0;
    double global_loss = 0.0;
    double local_loss = 0.0;
    double full_loss = 0.0;
    double query_acc = 0.0;
    std::int64_t wallclock_ms = 0;
};

struct TrainResult {
    ModelParams last;
    ModelParams best;           // best validation accuracy checkpoint
    double best_val_accuracy = 0.0;
    std::vector<LogRecord> log;
};

TrainResult train(const Dataset& ds, ModelParams params, const TrainConfig& train_config,
                  const PropagationConfig& prop_config, const ObjectiveConfig& obj_config,
                  std::ostream* log_stream = nullptr);

EvalReport evaluate(const Dataset& ds, const ModelParams& params, std::size_t n_episodes,
                    const EpisodeShape& shape, const PropagationConfig& prop_config,
                    const ObjectiveConfig& obj_config, std::uint64_t seed,
                    std::size_t threads = 1, Split split = Split::Test);

struct AblationArmResult {
    std::string name;
    EvalReport report;
};

// Trains and evaluates every schedule arm from the same initialization:
// {cooperative, pretrain_finetune, local_only, global_only} per metric
// pair, plus no-repulsion and inductive component ablations.
std::vector<AblationArmResult> run_ablation(const Dataset& ds, const ModelParams& initial,
                                            const TrainConfig& train_config,
                                            const PropagationConfig& prop_config,
                                            const ObjectiveConfig& obj_config,
                                            const std::vector<std::pair<Metric, Metric>>& metric_pairs,
                                            std::size_t eval_episodes, std::uint64_t eval_seed);

}  // namespace remp

#endif
