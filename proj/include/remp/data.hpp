#ifndef REMP_DATA_HPP
#define REMP_DATA_HPP

#include <array>
#include <string>
#include <vector>

#include "remp/matrix.hpp"
#include "remp/rng.hpp"

namespace remp {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& name);

struct ClassData {
    int class_id = 0;
    Split split = Split::Train;
    Matrix features;  // one sample per row, width = Dataset::dim
};

// Labeled feature vectors with disjoint-label train/val/test splits.
struct Dataset {
    std::string name;
    std::size_t dim = 0;
    std::vector<ClassData> classes;

    std::size_t n_train_classes() const;
    // Indices into `classes` belonging to one split, in stored order.
    std::vector<std::size_t> class_indices(Split s) const;
    void validate() const;
};

// One N-way K-shot task. Support rows are grouped by local label: local
// class n occupies rows [K*n, K*(n+1)); query rows are grouped the same
// way with M rows per class.
struct Episode {
    std::size_t n_way = 0;
    std::size_t k_shot = 0;
    std::size_t m_query = 0;
    Matrix support;                 // NK x D
    Matrix query;                   // NM x D
    std::vector<int> support_local;
    std::vector<int> support_global;
    std::vector<int> query_local;
    std::vector<int> query_global;
    std::vector<int> class_map;     // local label -> global label
};

Dataset load_dataset(const std::string& csv_path);
void save_dataset(const Dataset& ds, const std::string& csv_path);

Dataset gen_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t dim,
                      double spread, double separation, Rng& rng,
                      std::array<double, 3> split_fractions);

Episode sample_episode(const Dataset& ds, Split split, std::size_t n_way,
                       std::size_t k_shot, std::size_t m_query, Rng& rng);

}  // namespace remp

#endif
