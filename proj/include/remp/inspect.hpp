#ifndef REMP_INSPECT_HPP
#define REMP_INSPECT_HPP

#include <string>
#include <vector>

#include "remp/data.hpp"
#include "remp/propagation.hpp"

namespace remp {

// Fraction of query rows whose highest similarity lands on the true class.
double diagonal_dominance(const Matrix& sims, const std::vector<int>& query_local);

struct InspectionResult {
    std::vector<std::string> files;              // heatmap_layer<l>.csv, l = 0..L
    std::vector<double> dominance;               // per layer, same indexing
};

// One query-vs-prototype similarity heatmap per propagation layer,
// including the initial (layer 0) state.
InspectionResult write_heatmaps(const PropagationTrace& trace, const Episode& episode,
                                const Metric& metric, const std::string& out_dir);

}  // namespace remp

#endif
