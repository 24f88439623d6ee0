#ifndef REMP_METRIC_HPP
#define REMP_METRIC_HPP

#include <span>
#include <string>

#include "remp/matrix.hpp"

namespace remp {

enum class MetricKind { Cosine, NegSqEuclidean };

// Similarity measure kappa(.,.). `squared` only affects NegSqEuclidean:
// true gives -||a-b||^2, false gives -||a-b||.
struct Metric {
    MetricKind kind = MetricKind::NegSqEuclidean;
    bool squared = true;
};

std::string metric_name(const Metric& m);
Metric parse_metric(const std::string& name);

// a.b / (||a|| ||b||); throws on zero-norm operands.
double cosine(std::span<const double> a, std::span<const double> b);

// -sum_j (a_j - b_j)^2
double neg_sq_euclidean(std::span<const double> a, std::span<const double> b);

double similarity(std::span<const double> a, std::span<const double> b, const Metric& m);

// Accumulates d(similarity)/da into da and d/db into db, scaled by upstream.
void similarity_backward(std::span<const double> a, std::span<const double> b,
                         double upstream, std::span<double> da, std::span<double> db,
                         const Metric& m);

// out[i][j] = kappa(row_i(a), row_j(b))
Matrix pairwise_similarity(const Matrix& a, const Matrix& b, const Metric& m);

// Row-stochastic softmax with max-subtraction.
Matrix softmax_rows(const Matrix& m);

// Column-stochastic softmax (each column sums to 1).
Matrix softmax_cols(const Matrix& m);

}  // namespace remp

#endif
