#ifndef REMP_PROPAGATION_HPP
#define REMP_PROPAGATION_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "remp/metric.hpp"
#include "remp/model.hpp"

namespace remp {

enum class SoftmaxAxis { Column, Row };
enum class MinScope { Global, Row };
enum class PropagationMode { Train, Eval };

struct PropagationConfig {
    std::size_t layers_train = 2;
    std::size_t layers_eval = 10;
    double repulsion_constant = 1.5;  // c in beta_l = c / (N (L - l))
    bool repulsion_enabled = true;
    bool repulsion_train = true;  // apply masking during training propagation
    bool repulsion_eval = true;   // and during evaluation propagation
    Metric metric{MetricKind::NegSqEuclidean};
    SoftmaxAxis softmax_axis = SoftmaxAxis::Column;
    MinScope min_scope = MinScope::Global;
    bool share_projection = true;

    std::size_t layers(PropagationMode mode) const {
        return mode == PropagationMode::Train ? layers_train : layers_eval;
    }
};

double repulsion_threshold(const PropagationConfig& config, std::size_t n_way,
                           std::size_t layer_index, std::size_t total_layers);

// Row n = mean of support rows [K*n, K*(n+1)).
Matrix initial_prototypes(const Matrix& z_support, std::size_t n_way, std::size_t k_shot);

// Row n has 1 on its own class block, 0 elsewhere (pre-renormalization).
Matrix hardcode_support(std::size_t n_way, std::size_t k_shot);

struct AttentionResult {
    Matrix query_sim;         // kappa(C, Z^Q), N x NM
    Matrix attention_query;   // A^Q after softmax
    Matrix attention;         // [A^S, A^Q] renormalized per row, pre-mask
    Matrix attention_masked;  // after repulsive masking (== attention when disabled)
    std::vector<std::pair<std::size_t, std::size_t>> masked_cells;
    std::vector<std::pair<std::size_t, std::size_t>> min_cells;  // one per row (Row scope) or one total
    double min_value = 0.0;
    double beta = 0.0;
    Matrix prototypes_star;   // C* = A Z
};

AttentionResult attention_step(const Matrix& prototypes, const Matrix& z_support,
                               const Matrix& z_query, const PropagationConfig& config,
                               std::size_t layer_index, std::size_t total_layers);

struct PropagationLayerTrace {
    AttentionResult attention;
    Matrix prototypes;  // C after residual update
    Matrix z_support;
    Matrix z_query;
};

struct PropagationTrace {
    Matrix prototypes0;
    Matrix z_support0;
    Matrix z_query0;
    std::vector<PropagationLayerTrace> layers;

    const Matrix& final_prototypes() const {
        return layers.empty() ? prototypes0 : layers.back().prototypes;
    }
    const Matrix& final_z_query() const {
        return layers.empty() ? z_query0 : layers.back().z_query;
    }
    const Matrix& final_z_support() const {
        return layers.empty() ? z_support0 : layers.back().z_support;
    }
};

PropagationTrace propagate(const ModelParams& params, const Matrix& z_support,
                           const Matrix& z_query, std::size_t n_way, std::size_t k_shot,
                           const PropagationConfig& config, PropagationMode mode);

}  // namespace remp

#endif
