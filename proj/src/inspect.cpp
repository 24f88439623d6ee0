#include "remp/inspect.hpp"

#include <fstream>
#include <stdexcept>

namespace remp {

double diagonal_dominance(const Matrix& sims, const std::vector<int>& query_local) {
    if (sims.rows() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < sims.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < sims.cols(); ++j)
            if (sims(i, j) > sims(i, best)) best = j;
        if (static_cast<int>(best) == query_local[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sims.rows());
}

namespace {

void write_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << "\n";
    }
}

}  // namespace

InspectionResult write_heatmaps(const PropagationTrace& trace, const Episode& episode,
                                const Metric& metric, const std::string& out_dir) {
    InspectionResult result;
    auto emit = [&](std::size_t layer, const Matrix& z_query, const Matrix& prototypes) {
        const Matrix sims = pairwise_similarity(z_query, prototypes, metric);
        const std::string path = out_dir + "/heatmap_layer" + std::to_string(layer) + ".csv";
        write_csv(sims, path);
        result.files.push_back(path);
        result.dominance.push_back(diagonal_dominance(sims, episode.query_local));
    };
    emit(0, trace.z_query0, trace.prototypes0);
    for (std::size_t l = 0; l < trace.layers.size(); ++l)
        emit(l + 1, trace.layers[l].z_query, trace.layers[l].prototypes);
    return result;
}

}  // namespace remp
