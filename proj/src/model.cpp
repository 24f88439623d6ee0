#include "remp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace remp {

namespace {

constexpr char kMagic[5] = {'R', 'E', 'M', 'P', '1'};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
    Matrix out = matmul_bt(input, layer.weight);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += layer.bias[j];
    return out;
}

}  // namespace

GradientBag make_gradient_bag(const ModelParams& params) {
    GradientBag bag;
    bag.embedder.sizes = params.embedder.sizes;
    for (const auto& layer : params.embedder.layers)
        bag.embedder.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                                       std::vector<double>(layer.bias.size(), 0.0)});
    bag.head.weight = Matrix(params.head.weight.rows(), params.head.weight.cols());
    for (const auto& proj : params.projections)
        bag.projections.push_back({Matrix(proj.weight.rows(), proj.weight.cols()),
                                   std::vector<double>(proj.bias.size(), 0.0)});
    return bag;
}

std::vector<TensorRef> tensor_refs(ModelParams& params) {
    std::vector<TensorRef> refs;
    for (std::size_t l = 0; l < params.embedder.layers.size(); ++l) {
        auto& layer = params.embedder.layers[l];
        refs.push_back({"embedder.layer" + std::to_string(l) + ".weight", layer.weight.data().data(),
                        layer.weight.size(), {layer.weight.rows(), layer.weight.cols()}});
        refs.push_back({"embedder.layer" + std::to_string(l) + ".bias", layer.bias.data(),
                        layer.bias.size(), {layer.bias.size()}});
    }
    refs.push_back({"head.weight", params.head.weight.data().data(), params.head.weight.size(),
                    {params.head.weight.rows(), params.head.weight.cols()}});
    for (std::size_t p = 0; p < params.projections.size(); ++p) {
        auto& proj = params.projections[p];
        refs.push_back({"projection" + std::to_string(p) + ".weight", proj.weight.data().data(),
                        proj.weight.size(), {proj.weight.rows(), proj.weight.cols()}});
        refs.push_back({"projection" + std::to_string(p) + ".bias", proj.bias.data(),
                        proj.bias.size(), {proj.bias.size()}});
    }
    return refs;
}

ModelParams init_params(std::size_t input_dim, const std::vector<std::size_t>& hidden_sizes,
                        std::size_t embed_dim, std::size_t n_train_classes, Rng& rng,
                        std::size_t n_projection_layers) {
    if (input_dim < 1 || embed_dim < 1 || n_train_classes < 1)
        throw std::invalid_argument("init_params: all sizes must be >= 1");
    ModelParams params;
    params.embedder.sizes.push_back(input_dim);
    for (std::size_t h : hidden_sizes) params.embedder.sizes.push_back(h);
    params.embedder.sizes.push_back(embed_dim);

    const auto& sizes = params.embedder.sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t fan_in = sizes[l];
        const std::size_t fan_out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
        params.embedder.layers.push_back(std::move(layer));
    }

    const double head_bound = std::sqrt(6.0 / static_cast<double>(embed_dim));
    params.head.weight = Matrix(n_train_classes, embed_dim);
    for (double& w : params.head.weight.data()) w = rng.uniform(-head_bound, head_bound);

    // Zero projection: every rectification layer starts as the identity map.
    for (std::size_t p = 0; p < std::max<std::size_t>(1, n_projection_layers); ++p)
        params.projections.push_back(
            {Matrix(embed_dim, embed_dim), std::vector<double>(embed_dim, 0.0)});
    return params;
}

Matrix embed_batch(const ModelParams& params, const Matrix& inputs) {
    EmbedderCache cache;
    return embed_batch_cached(params, inputs, cache);
}

Matrix embed_batch_cached(const ModelParams& params, const Matrix& inputs, EmbedderCache& cache) {
    if (inputs.cols() != params.embedder.input_dim())
        throw std::invalid_argument("embed_batch: input width " + std::to_string(inputs.cols()) +
                                    " != " + std::to_string(params.embedder.input_dim()));
    cache.pre.clear();
    cache.act.clear();
    cache.act.push_back(inputs);
    Matrix current = inputs;
    const std::size_t n_layers = params.embedder.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix pre = dense_forward(params.embedder.layers[l], current);
        cache.pre.push_back(pre);
        if (l + 1 < n_layers)
            for (double& v : pre.data()) v = std::max(0.0, v);
        current = std::move(pre);
        cache.act.push_back(current);
    }
    return current;
}

Matrix embed_backward(const ModelParams& params, const EmbedderCache& cache,
                      const Matrix& d_output, GradientBag& grads) {
    const std::size_t n_layers = params.embedder.layers.size();
    Matrix d_act = d_output;
    for (std::size_t l = n_layers; l-- > 0;) {
        Matrix d_pre = d_act;
        if (l + 1 < n_layers) {
            const Matrix& pre = cache.pre[l];
            for (std::size_t i = 0; i < d_pre.size(); ++i)
                if (pre.data()[i] <= 0.0) d_pre.data()[i] = 0.0;
        }
        const Matrix& input = cache.act[l];
        add_in_place(grads.embedder.layers[l].weight, matmul_at(d_pre, input));
        for (std::size_t i = 0; i < d_pre.rows(); ++i)
            for (std::size_t j = 0; j < d_pre.cols(); ++j)
                grads.embedder.layers[l].bias[j] += d_pre(i, j);
        d_act = matmul(d_pre, params.embedder.layers[l].weight);
    }
    return d_act;
}

Matrix project_residual(const ProjectionLayer& proj, const Matrix& m) {
    if (m.cols() != proj.weight.cols())
        throw std::invalid_argument("project_residual: width " + std::to_string(m.cols()) +
                                    " != " + std::to_string(proj.weight.cols()));
    Matrix out = matmul_bt(m, proj.weight);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += proj.bias[j] + m(i, j);
    return out;
}

Matrix project_residual(const ModelParams& params, const Matrix& m) {
    return project_residual(params.projections.front(), m);
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    auto refs = tensor_refs(const_cast<ModelParams&>(params));
    write_raw(out, static_cast<std::uint32_t>(refs.size()));
    for (const auto& ref : refs) {
        write_raw(out, static_cast<std::uint32_t>(ref.name.size()));
        out.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
        write_raw(out, static_cast<std::uint32_t>(ref.dims.size()));
        for (std::size_t d : ref.dims) write_raw(out, static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < ref.size; ++i)
            write_raw(out, static_cast<float>(ref.data[i]));
    }
    if (!out) throw std::runtime_error("checkpoint write failed for '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("'" + path + "' is not a REMP1 checkpoint");

    struct RawTensor {
        std::string name;
        std::vector<std::uint32_t> dims;
        std::vector<double> data;
    };
    const auto count = read_raw<std::uint32_t>(in);
    std::vector<RawTensor> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        RawTensor raw;
        const auto name_len = read_raw<std::uint32_t>(in);
        raw.name.resize(name_len);
        in.read(raw.name.data(), name_len);
        const auto rank = read_raw<std::uint32_t>(in);
        std::size_t total = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            raw.dims.push_back(read_raw<std::uint32_t>(in));
            total *= raw.dims.back();
        }
        raw.data.resize(total);
        for (std::size_t i = 0; i < total; ++i) raw.data[i] = read_raw<float>(in);
        tensors.push_back(std::move(raw));
    }

    auto find = [&](const std::string& name) -> const RawTensor& {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw std::runtime_error("'" + path + "': missing tensor '" + name + "'");
    };

    ModelParams params;
    for (std::size_t l = 0;; ++l) {
        const std::string wname = "embedder.layer" + std::to_string(l) + ".weight";
        bool found = false;
        for (const auto& t : tensors) found = found || t.name == wname;
        if (!found) break;
        const RawTensor& w = find(wname);
        const RawTensor& b = find("embedder.layer" + std::to_string(l) + ".bias");
        if (w.dims.size() != 2 || b.dims.size() != 1 || b.dims[0] != w.dims[0])
            throw std::runtime_error("'" + path + "': malformed embedder layer " + std::to_string(l));
        DenseLayer layer{Matrix(w.dims[0], w.dims[1]), std::vector<double>(b.data)};
        layer.weight.data() = w.data;
        if (params.embedder.sizes.empty()) params.embedder.sizes.push_back(w.dims[1]);
        params.embedder.sizes.push_back(w.dims[0]);
        params.embedder.layers.push_back(std::move(layer));
    }
    if (params.embedder.layers.empty())
        throw std::runtime_error("'" + path + "': checkpoint has no embedder layers");

    const RawTensor& head = find("head.weight");
    params.head.weight = Matrix(head.dims[0], head.dims[1]);
    params.head.weight.data() = head.data;

    for (std::size_t p = 0;; ++p) {
        const std::string wname = "projection" + std::to_string(p) + ".weight";
        bool found = false;
        for (const auto& t : tensors) found = found || t.name == wname;
        if (!found) break;
        const RawTensor& pw = find(wname);
        const RawTensor& pb = find("projection" + std::to_string(p) + ".bias");
        ProjectionLayer proj{Matrix(pw.dims[0], pw.dims[1]), std::vector<double>(pb.data)};
        proj.weight.data() = pw.data;
        params.projections.push_back(std::move(proj));
    }
    if (params.projections.empty())
        throw std::runtime_error("'" + path + "': checkpoint has no projection layer");
    return params;
}

}  // namespace remp
