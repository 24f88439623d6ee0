#ifndef REMP_OBJECTIVE_HPP
#define REMP_OBJECTIVE_HPP

#include <string>
#include <utility>
#include <vector>

#include "remp/data.hpp"
#include "remp/model.hpp"
#include "remp/propagation.hpp"

namespace remp {

enum class ScheduleArm { Cooperative, LocalOnly, GlobalOnly };

std::string arm_name(ScheduleArm arm);
ScheduleArm parse_arm(const std::string& name);

struct ObjectiveConfig {
    Metric global_metric{MetricKind::Cosine};
    Metric local_metric{MetricKind::NegSqEuclidean};
    double temperature = 1.0;
    // Mean over queries instead of the plain sum; alpha defaults assume mean.
    bool mean_over_queries = true;
    // Classify against raw support means instead of the rectified prototypes.
    bool local_on_raw_prototypes = false;
};

struct PredictionDistribution {
    Matrix probs;             // one row per query
    Matrix log_probs;         // log-softmax of the logits; survives underflow
    std::vector<int> labels;  // argmax per row, ties to the lowest index
};

struct LossReport {
    double global_loss = 0.0;
    double local_loss = 0.0;
    double full_loss = 0.0;
    double alpha = 0.0;
    double query_accuracy_local = 0.0;
};

PredictionDistribution global_likelihood(const ModelParams& params, const Matrix& z_query,
                                         const ObjectiveConfig& config = {});
PredictionDistribution local_likelihood(const Matrix& z_query, const Matrix& prototypes,
                                        const ObjectiveConfig& config = {});

double global_loss(const PredictionDistribution& dist, const std::vector<int>& global_labels,
                   bool mean_over_queries = true);
double local_loss(const PredictionDistribution& dist, const std::vector<int>& local_labels,
                  bool mean_over_queries = true);
double full_loss(double global, double local, double alpha);

std::pair<LossReport, GradientBag> forward_backward(const ModelParams& params, const Episode& episode,
                                                    const PropagationConfig& prop_config,
                                                    const ObjectiveConfig& obj_config, double alpha,
                                                    ScheduleArm arm);

PredictionDistribution predict(const ModelParams& params, const Episode& episode,
                               const PropagationConfig& prop_config,
                               const ObjectiveConfig& obj_config = {});

double accuracy(const PredictionDistribution& dist, const std::vector<int>& labels);

}  // namespace remp

#endif
