#ifndef REMP_MODEL_HPP
#define REMP_MODEL_HPP

#include <string>
#include <vector>

#include "remp/matrix.hpp"
#include "remp/rng.hpp"

namespace remp {

struct DenseLayer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
};

// Feature extractor f: R^D -> R^d. ReLU on hidden layers, identity output.
struct Embedder {
    std::vector<std::size_t> sizes;  // [D, h1, ..., d]
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return sizes.front(); }
    std::size_t output_dim() const { return sizes.back(); }
};

// One learnable weight vector per training class.
struct GlobalHead {
    Matrix weight;  // n_train_classes x d
};

// Residual projection h: R^d -> R^d, applied as h(M) + M.
struct ProjectionLayer {
    Matrix weight;             // d x d
    std::vector<double> bias;  // d
};

struct ModelParams {
    Embedder embedder;
    GlobalHead head;
    // Shared residual projection by default (size 1); one entry per
    // propagation layer when sharing is disabled.
    std::vector<ProjectionLayer> projections;

    std::size_t projection_index(std::size_t layer_index, bool shared) const {
        if (shared || projections.size() == 1) return 0;
        return layer_index < projections.size() ? layer_index : projections.size() - 1;
    }
};

// Gradient buffers with the same shapes as ModelParams, zeroed on creation.
using GradientBag = ModelParams;

GradientBag make_gradient_bag(const ModelParams& params);

// Flat view over every parameter tensor, in a fixed documented order
// (embedder layers first, then head weight, then projection weight/bias).
struct TensorRef {
    std::string name;
    double* data;
    std::size_t size;
    std::vector<std::size_t> dims;
};

std::vector<TensorRef> tensor_refs(ModelParams& params);

ModelParams init_params(std::size_t input_dim, const std::vector<std::size_t>& hidden_sizes,
                        std::size_t embed_dim, std::size_t n_train_classes, Rng& rng,
                        std::size_t n_projection_layers = 1);

// Forward pass cache for backprop: pre-activations and activations per layer.
struct EmbedderCache {
    std::vector<Matrix> pre;   // one per layer
    std::vector<Matrix> act;   // act[0] = input, act[i] = output of layer i-1
};

Matrix embed_batch(const ModelParams& params, const Matrix& inputs);
Matrix embed_batch_cached(const ModelParams& params, const Matrix& inputs, EmbedderCache& cache);

// Accumulates parameter gradients into `grads` and returns dL/d(inputs).
Matrix embed_backward(const ModelParams& params, const EmbedderCache& cache,
                      const Matrix& d_output, GradientBag& grads);

// h(M) + M with h(M) = M W^T + bias.
Matrix project_residual(const ProjectionLayer& proj, const Matrix& m);
Matrix project_residual(const ModelParams& params, const Matrix& m);  // projections[0]

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace remp

#endif
