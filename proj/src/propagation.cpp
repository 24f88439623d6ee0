#include "remp/propagation.hpp"

#include <limits>
#include <stdexcept>

namespace remp {

double repulsion_threshold(const PropagationConfig& config, std::size_t n_way,
                           std::size_t layer_index, std::size_t total_layers) {
    if (layer_index >= total_layers)
        throw std::invalid_argument("repulsion_threshold: layer index " + std::to_string(layer_index) +
                               " >= layer count " + std::to_string(total_layers));
    return config.repulsion_constant /
           (static_cast<double>(n_way) * static_cast<double>(total_layers - layer_index));
}

Matrix initial_prototypes(const Matrix& z_support, std::size_t n_way, std::size_t k_shot) {
    if (z_support.rows() != n_way * k_shot)
        throw std::invalid_argument("initial_prototypes: expected " + std::to_string(n_way * k_shot) +
                                    " support rows, got " + std::to_string(z_support.rows()));
    Matrix protos(n_way, z_support.cols());
    for (std::size_t n = 0; n < n_way; ++n) {
        for (std::size_t k = 0; k < k_shot; ++k)
            for (std::size_t j = 0; j < z_support.cols(); ++j)
                protos(n, j) += z_support(n * k_shot + k, j);
        for (std::size_t j = 0; j < z_support.cols(); ++j)
            protos(n, j) /= static_cast<double>(k_shot);
    }
    return protos;
}

Matrix hardcode_support(std::size_t n_way, std::size_t k_shot) {
    Matrix a(n_way, n_way * k_shot);
    for (std::size_t n = 0; n < n_way; ++n)
        for (std::size_t k = 0; k < k_shot; ++k) a(n, n * k_shot + k) = 1.0;
    return a;
}

AttentionResult attention_step(const Matrix& prototypes, const Matrix& z_support,
                               const Matrix& z_query, const PropagationConfig& config,
                               std::size_t layer_index, std::size_t total_layers) {
    const std::size_t n_way = prototypes.rows();
    const std::size_t nk = z_support.rows();
    const std::size_t nm = z_query.rows();
    if (n_way == 0 || nk % n_way != 0)
        throw std::invalid_argument("attention_step: support count not a multiple of N");
    const std::size_t k_shot = nk / n_way;
    if (layer_index >= total_layers)
        throw std::logic_error("attention_step: layer index out of range");

    AttentionResult res;
    res.query_sim = nm > 0 ? pairwise_similarity(prototypes, z_query, config.metric)
                           : Matrix(n_way, 0);
    res.attention_query = config.softmax_axis == SoftmaxAxis::Column
                              ? softmax_cols(res.query_sim)
                              : softmax_rows(res.query_sim);

    // [A^S, A^Q], renormalized per row.
    const Matrix hard = hardcode_support(n_way, k_shot);
    res.attention = Matrix(n_way, nk + nm);
    for (std::size_t n = 0; n < n_way; ++n) {
        double sum = static_cast<double>(k_shot);
        for (std::size_t j = 0; j < nm; ++j) sum += res.attention_query(n, j);
        for (std::size_t j = 0; j < nk; ++j) res.attention(n, j) = hard(n, j) / sum;
        for (std::size_t j = 0; j < nm; ++j) res.attention(n, nk + j) = res.attention_query(n, j) / sum;
    }

    res.attention_masked = res.attention;
    if (config.repulsion_enabled) {
        res.beta = repulsion_threshold(config, n_way, layer_index, total_layers);
        const Matrix& a = res.attention;
        if (config.min_scope == MinScope::Global) {
            std::pair<std::size_t, std::size_t> argmin{0, 0};
            double mn = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < a.cols(); ++j)
                    if (a(i, j) < mn) {
                        mn = a(i, j);
                        argmin = {i, j};
                    }
            res.min_value = mn;
            res.min_cells.push_back(argmin);
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t j = 0; j < a.cols(); ++j)
                    if (a(i, j) < res.beta) {
                        res.attention_masked(i, j) = -mn;
                        res.masked_cells.emplace_back(i, j);
                    }
        } else {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                std::size_t argmin = 0;
                double mn = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < a.cols(); ++j)
                    if (a(i, j) < mn) {
                        mn = a(i, j);
                        argmin = j;
                    }
                res.min_cells.emplace_back(i, argmin);
                for (std::size_t j = 0; j < a.cols(); ++j)
                    if (a(i, j) < res.beta) {
                        res.attention_masked(i, j) = -mn;
                        res.masked_cells.emplace_back(i, j);
                    }
            }
        }
    }

    res.prototypes_star = matmul(res.attention_masked, vstack(z_support, z_query));
    return res;
}

PropagationTrace propagate(const ModelParams& params, const Matrix& z_support,
                           const Matrix& z_query, std::size_t n_way, std::size_t k_shot,
                           const PropagationConfig& config, PropagationMode mode) {
    const std::size_t total_layers = config.layers(mode);
    PropagationConfig effective = config;
    effective.repulsion_enabled =
        config.repulsion_enabled &&
        (mode == PropagationMode::Train ? config.repulsion_train : config.repulsion_eval);
    PropagationTrace trace;
    trace.z_support0 = z_support;
    trace.z_query0 = z_query;
    trace.prototypes0 = initial_prototypes(z_support, n_way, k_shot);

    Matrix prototypes = trace.prototypes0;
    Matrix zs = z_support;
    Matrix zq = z_query;
    for (std::size_t l = 0; l < total_layers; ++l) {
        PropagationLayerTrace layer;
        layer.attention = attention_step(prototypes, zs, zq, effective, l, total_layers);

        // C <- h(C*) + C*; Z <- h(Z) + Z, with the same h for all three.
        const ProjectionLayer& proj =
            params.projections[params.projection_index(l, config.share_projection)];
        layer.prototypes = project_residual(proj, layer.attention.prototypes_star);
        layer.z_support = project_residual(proj, zs);
        layer.z_query = zq.rows() > 0 ? project_residual(proj, zq) : zq;

        prototypes = layer.prototypes;
        zs = layer.z_support;
        zq = layer.z_query;
        trace.layers.push_back(std::move(layer));
    }
    return trace;
}

}  // namespace remp
