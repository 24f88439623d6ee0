#include "remp/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace remp {

namespace {

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> labels(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < probs.cols(); ++j)
            if (probs(i, j) > probs(i, best)) best = j;  // ties keep the lowest index
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

double cross_entropy(const PredictionDistribution& dist, const std::vector<int>& labels,
                     bool mean) {
    const Matrix& probs = dist.probs;
    if (labels.size() != probs.rows())
        throw std::invalid_argument("cross_entropy: label count != row count");
    // Prefer the log-softmax values: they stay finite where probs underflow.
    const bool have_log = dist.log_probs.rows() == probs.rows() &&
                          dist.log_probs.cols() == probs.cols();
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");
        loss -= have_log ? dist.log_probs(i, y) : std::log(probs(i, y));
    }
    if (mean && probs.rows() > 0) loss /= static_cast<double>(probs.rows());
    return loss;
}

// Fills probs, log_probs, and labels from a logit matrix.
PredictionDistribution from_logits(Matrix logits, double temperature) {
    if (temperature != 1.0) scale_in_place(logits, 1.0 / temperature);
    PredictionDistribution dist;
    dist.log_probs = Matrix(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(logits(i, j) - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < logits.cols(); ++j)
            dist.log_probs(i, j) = logits(i, j) - lse;
    }
    dist.probs = Matrix(logits.rows(), logits.cols());
    for (std::size_t k = 0; k < dist.probs.size(); ++k)
        dist.probs.data()[k] = std::exp(dist.log_probs.data()[k]);
    dist.labels = argmax_rows(dist.probs);
    return dist;
}

void add_column_sums(const Matrix& m, std::vector<double>& dst) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) dst[j] += m(i, j);
}

// d(softmax cross-entropy)/d(logits), already scaled by `weight`.
Matrix ce_logit_grad(const Matrix& probs, const std::vector<int>& labels, double weight) {
    Matrix d(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (std::size_t j = 0; j < probs.cols(); ++j)
            d(i, j) = weight * (probs(i, j) - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0));
    return d;
}

}  // namespace

std::string arm_name(ScheduleArm arm) {
    switch (arm) {
        case ScheduleArm::Cooperative: return "cooperative";
        case ScheduleArm::LocalOnly: return "local_only";
        case ScheduleArm::GlobalOnly: return "global_only";
    }
    throw std::logic_error("arm_name: bad arm");
}

ScheduleArm parse_arm(const std::string& name) {
    if (name == "cooperative") return ScheduleArm::Cooperative;
    if (name == "local_only") return ScheduleArm::LocalOnly;
    if (name == "global_only") return ScheduleArm::GlobalOnly;
    throw std::invalid_argument("unknown schedule arm '" + name + "'");
}

PredictionDistribution global_likelihood(const ModelParams& params, const Matrix& z_query,
                                         const ObjectiveConfig& config) {
    if (z_query.cols() != params.head.weight.cols())
        throw std::invalid_argument("global_likelihood: embedding width mismatch");
    if (config.temperature <= 0.0)
        throw std::invalid_argument("global_likelihood: temperature must be > 0");
    return from_logits(pairwise_similarity(z_query, params.head.weight, config.global_metric),
                       config.temperature);
}

PredictionDistribution local_likelihood(const Matrix& z_query, const Matrix& prototypes,
                                        const ObjectiveConfig& config) {
    if (config.temperature <= 0.0)
        throw std::invalid_argument("local_likelihood: temperature must be > 0");
    return from_logits(pairwise_similarity(z_query, prototypes, config.local_metric),
                       config.temperature);
}

double global_loss(const PredictionDistribution& dist, const std::vector<int>& global_labels,
                   bool mean_over_queries) {
    return cross_entropy(dist, global_labels, mean_over_queries);
}

double local_loss(const PredictionDistribution& dist, const std::vector<int>& local_labels,
                  bool mean_over_queries) {
    return cross_entropy(dist, local_labels, mean_over_queries);
}

double full_loss(double global, double local, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("full_loss: alpha must be >= 0");
    return global + alpha * local;
}

double accuracy(const PredictionDistribution& dist, const std::vector<int>& labels) {
    if (dist.labels.size() != labels.size())
        throw std::invalid_argument("accuracy: label count mismatch");
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (dist.labels[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::pair<LossReport, GradientBag> forward_backward(const ModelParams& params, const Episode& episode,
                                                    const PropagationConfig& prop_config,
                                                    const ObjectiveConfig& obj_config, double alpha,
                                                    ScheduleArm arm) {
    if (alpha < 0.0) throw std::invalid_argument("forward_backward: alpha must be >= 0");
    const std::size_t nk = episode.support.rows();
    const std::size_t nm = episode.query.rows();
    const std::size_t n_way = episode.n_way;
    const std::size_t embed_dim = params.embedder.output_dim();

    // Forward: embed S u Q, propagate, score.
    EmbedderCache cache;
    const Matrix z_all = embed_batch_cached(params, vstack(episode.support, episode.query), cache);
    Matrix z_support0(nk, embed_dim), z_query0(nm, embed_dim);
    for (std::size_t i = 0; i < nk; ++i)
        for (std::size_t j = 0; j < embed_dim; ++j) z_support0(i, j) = z_all(i, j);
    for (std::size_t i = 0; i < nm; ++i)
        for (std::size_t j = 0; j < embed_dim; ++j) z_query0(i, j) = z_all(nk + i, j);

    const PropagationTrace trace = propagate(params, z_support0, z_query0, n_way, episode.k_shot,
                                             prop_config, PropagationMode::Train);
    const bool raw_local = obj_config.local_on_raw_prototypes;
    const Matrix& prototypes_used = raw_local ? trace.prototypes0 : trace.final_prototypes();
    const Matrix& z_query_used = raw_local ? trace.z_query0 : trace.final_z_query();

    const PredictionDistribution local_dist = local_likelihood(z_query_used, prototypes_used, obj_config);
    const PredictionDistribution global_dist = global_likelihood(params, z_query0, obj_config);
    const bool mean = obj_config.mean_over_queries;
    const double l_local = local_loss(local_dist, episode.query_local, mean);
    const double l_global = global_loss(global_dist, episode.query_global, mean);

    const bool use_global = arm != ScheduleArm::LocalOnly;
    const bool use_local = arm != ScheduleArm::GlobalOnly && alpha > 0.0;

    LossReport report;
    report.alpha = alpha;
    report.global_loss = use_global ? l_global : 0.0;
    report.local_loss = arm != ScheduleArm::GlobalOnly ? l_local : 0.0;
    report.full_loss = full_loss(report.global_loss, report.local_loss, alpha);
    report.query_accuracy_local = accuracy(local_dist, episode.query_local);
    if (!std::isfinite(report.full_loss))
        throw std::runtime_error("forward_backward: non-finite loss");

    // Backward.
    GradientBag grads = make_gradient_bag(params);
    const double query_scale = mean && nm > 0 ? 1.0 / static_cast<double>(nm) : 1.0;
    const double inv_temp = 1.0 / obj_config.temperature;

    Matrix d_z_query0(nm, embed_dim);
    Matrix d_z_support0(nk, embed_dim);

    if (use_global) {
        const Matrix d_logits =
            ce_logit_grad(global_dist.probs, episode.query_global, query_scale * inv_temp);
        const Matrix& z_query0_c = z_query0;
        for (std::size_t i = 0; i < nm; ++i)
            for (std::size_t k = 0; k < params.head.weight.rows(); ++k)
                similarity_backward(z_query0_c.row(i), params.head.weight.row(k), d_logits(i, k),
                                    d_z_query0.row(i), grads.head.weight.row(k),
                                    obj_config.global_metric);
    }

    if (use_local) {
        const double local_weight = alpha * query_scale;
        const Matrix d_logits = ce_logit_grad(local_dist.probs, episode.query_local,
                                              local_weight * inv_temp);
        Matrix d_prototypes(n_way, embed_dim);
        Matrix d_z_query_used(nm, embed_dim);
        for (std::size_t i = 0; i < nm; ++i)
            for (std::size_t n = 0; n < n_way; ++n)
                similarity_backward(z_query_used.row(i), prototypes_used.row(n), d_logits(i, n),
                                    d_z_query_used.row(i), d_prototypes.row(n),
                                    obj_config.local_metric);

        if (raw_local) {
            add_in_place(d_z_query0, d_z_query_used);
            // prototypes0 = per-class means of z_support0
            for (std::size_t n = 0; n < n_way; ++n)
                for (std::size_t k = 0; k < episode.k_shot; ++k)
                    for (std::size_t j = 0; j < embed_dim; ++j)
                        d_z_support0(n * episode.k_shot + k, j) +=
                            d_prototypes(n, j) / static_cast<double>(episode.k_shot);
        } else {
            // Reverse through the propagation stack.
            Matrix d_c = d_prototypes;
            Matrix d_zs(nk, embed_dim);
            Matrix d_zq = d_z_query_used;
            for (std::size_t l = trace.layers.size(); l-- > 0;) {
                const PropagationLayerTrace& layer = trace.layers[l];
                const Matrix& c_in = l == 0 ? trace.prototypes0 : trace.layers[l - 1].prototypes;
                const Matrix& zs_in = l == 0 ? trace.z_support0 : trace.layers[l - 1].z_support;
                const Matrix& zq_in = l == 0 ? trace.z_query0 : trace.layers[l - 1].z_query;
                const AttentionResult& att = layer.attention;
                const std::size_t proj_idx =
                    params.projection_index(l, prop_config.share_projection);
                const Matrix& w_proj = params.projections[proj_idx].weight;
                ProjectionLayer& proj_grad = grads.projections[proj_idx];

                // C_out = h(C*) + C*
                Matrix d_c_star = matmul(d_c, w_proj);
                add_in_place(d_c_star, d_c);
                add_in_place(proj_grad.weight, matmul_at(d_c, att.prototypes_star));
                add_column_sums(d_c, proj_grad.bias);

                // Z_out = h(Z_in) + Z_in
                add_in_place(proj_grad.weight, matmul_at(d_zs, zs_in));
                add_column_sums(d_zs, proj_grad.bias);
                Matrix d_zs_in = d_zs;
                add_in_place(d_zs_in, matmul(d_zs, w_proj));
                add_in_place(proj_grad.weight, matmul_at(d_zq, zq_in));
                add_column_sums(d_zq, proj_grad.bias);
                Matrix d_zq_in = d_zq;
                add_in_place(d_zq_in, matmul(d_zq, w_proj));

                // C* = A_masked [Zs; Zq]
                const Matrix z_stack = vstack(zs_in, zq_in);
                Matrix d_attention = matmul_bt(d_c_star, z_stack);
                const Matrix d_z_stack = matmul_at(att.attention_masked, d_c_star);
                for (std::size_t i = 0; i < nk; ++i)
                    for (std::size_t j = 0; j < embed_dim; ++j) d_zs_in(i, j) += d_z_stack(i, j);
                for (std::size_t i = 0; i < nm; ++i)
                    for (std::size_t j = 0; j < embed_dim; ++j) d_zq_in(i, j) += d_z_stack(nk + i, j);

                // Repulsive mask: surviving entries pass through; each masked
                // entry equals -min(A), so its gradient routes to the argmin cell.
                if (!att.masked_cells.empty()) {
                    Matrix d_pre = d_attention;
                    for (const auto& [i, j] : att.masked_cells) d_pre(i, j) = 0.0;
                    for (const auto& [i, j] : att.masked_cells) {
                        const auto& src = prop_config.min_scope == MinScope::Global
                                              ? att.min_cells[0]
                                              : att.min_cells[i];
                        d_pre(src.first, src.second) -= d_attention(i, j);
                    }
                    d_attention = std::move(d_pre);
                }

                // Per-row renormalization; the support block of the numerator
                // is constant, only A^Q entries carry gradient.
                Matrix d_aq(n_way, nm);
                for (std::size_t n = 0; n < n_way; ++n) {
                    double row_sum = static_cast<double>(episode.k_shot);
                    for (std::size_t j = 0; j < nm; ++j) row_sum += att.attention_query(n, j);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < nk + nm; ++j)
                        dot += d_attention(n, j) * att.attention(n, j);
                    for (std::size_t j = 0; j < nm; ++j)
                        d_aq(n, j) = (d_attention(n, nk + j) - dot) / row_sum;
                }

                // Softmax over A^Q.
                Matrix d_sim(n_way, nm);
                if (prop_config.softmax_axis == SoftmaxAxis::Column) {
                    for (std::size_t j = 0; j < nm; ++j) {
                        double dot = 0.0;
                        for (std::size_t n = 0; n < n_way; ++n)
                            dot += d_aq(n, j) * att.attention_query(n, j);
                        for (std::size_t n = 0; n < n_way; ++n)
                            d_sim(n, j) = att.attention_query(n, j) * (d_aq(n, j) - dot);
                    }
                } else {
                    for (std::size_t n = 0; n < n_way; ++n) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < nm; ++j)
                            dot += d_aq(n, j) * att.attention_query(n, j);
                        for (std::size_t j = 0; j < nm; ++j)
                            d_sim(n, j) = att.attention_query(n, j) * (d_aq(n, j) - dot);
                    }
                }

                // Sim = kappa(C_in, Zq_in)
                Matrix d_c_in(n_way, embed_dim);
                for (std::size_t n = 0; n < n_way; ++n)
                    for (std::size_t j = 0; j < nm; ++j)
                        similarity_backward(c_in.row(n), zq_in.row(j), d_sim(n, j),
                                            d_c_in.row(n), d_zq_in.row(j), prop_config.metric);

                d_c = std::move(d_c_in);
                d_zs = std::move(d_zs_in);
                d_zq = std::move(d_zq_in);
            }

            // C_0 = per-class means of Z_support0.
            for (std::size_t n = 0; n < n_way; ++n)
                for (std::size_t k = 0; k < episode.k_shot; ++k)
                    for (std::size_t j = 0; j < embed_dim; ++j)
                        d_zs(n * episode.k_shot + k, j) += d_c(n, j) / static_cast<double>(episode.k_shot);
            add_in_place(d_z_support0, d_zs);
            add_in_place(d_z_query0, d_zq);
        }
    }

    embed_backward(params, cache, vstack(d_z_support0, d_z_query0), grads);
    return {report, std::move(grads)};
}

PredictionDistribution predict(const ModelParams& params, const Episode& episode,
                               const PropagationConfig& prop_config,
                               const ObjectiveConfig& obj_config) {
    const Matrix z_support = embed_batch(params, episode.support);
    const Matrix z_query = embed_batch(params, episode.query);
    const PropagationTrace trace = propagate(params, z_support, z_query, episode.n_way,
                                             episode.k_shot, prop_config, PropagationMode::Eval);
    if (obj_config.local_on_raw_prototypes)
        return local_likelihood(trace.z_query0, trace.prototypes0, obj_config);
    return local_likelihood(trace.final_z_query(), trace.final_prototypes(), obj_config);
}

}  // namespace remp
