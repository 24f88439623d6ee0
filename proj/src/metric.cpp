#include "remp/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace remp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void check_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("similarity: vector lengths differ (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

std::string metric_name(const Metric& m) {
    if (m.kind == MetricKind::Cosine) return "cosine";
    return m.squared ? "neg_sq_euclidean" : "neg_euclidean";
}

Metric parse_metric(const std::string& name) {
    if (name == "cosine") return {MetricKind::Cosine, true};
    if (name == "neg_sq_euclidean" || name == "euclidean") return {MetricKind::NegSqEuclidean, true};
    if (name == "neg_euclidean") return {MetricKind::NegSqEuclidean, false};
    throw std::invalid_argument("unknown metric '" + name + "'");
}

double cosine(std::span<const double> a, std::span<const double> b) {
    check_same_length(a, b);
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0) throw std::domain_error("cosine: first operand has zero norm");
    if (nb == 0.0) throw std::domain_error("cosine: second operand has zero norm");
    return dot(a, b) / (na * nb);
}

double neg_sq_euclidean(std::span<const double> a, std::span<const double> b) {
    check_same_length(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return -s;
}

double similarity(std::span<const double> a, std::span<const double> b, const Metric& m) {
    if (m.kind == MetricKind::Cosine) return cosine(a, b);
    const double sq = neg_sq_euclidean(a, b);
    return m.squared ? sq : -std::sqrt(-sq);
}

void similarity_backward(std::span<const double> a, std::span<const double> b,
                         double upstream, std::span<double> da, std::span<double> db,
                         const Metric& m) {
    check_same_length(a, b);
    if (m.kind == MetricKind::Cosine) {
        const double na = norm(a);
        const double nb = norm(b);
        if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine backward: zero-norm operand");
        const double c = dot(a, b) / (na * nb);
        for (std::size_t i = 0; i < a.size(); ++i) {
            da[i] += upstream * (b[i] / (na * nb) - c * a[i] / (na * na));
            db[i] += upstream * (a[i] / (na * nb) - c * b[i] / (nb * nb));
        }
        return;
    }
    if (m.squared) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            da[i] += upstream * (-2.0 * d);
            db[i] += upstream * (2.0 * d);
        }
    } else {
        const double dist = std::sqrt(-neg_sq_euclidean(a, b));
        if (dist == 0.0) return;  // subgradient 0 at the kink
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            da[i] += upstream * (-d / dist);
            db[i] += upstream * (d / dist);
        }
    }
}

Matrix pairwise_similarity(const Matrix& a, const Matrix& b, const Metric& m) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("pairwise_similarity: feature widths differ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = similarity(a.row(i), b.row(j), m);
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out(i, j) = std::exp(m(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

Matrix softmax_cols(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m.rows(); ++i) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            out(i, j) = std::exp(m(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) /= sum;
    }
    return out;
}

}  // namespace remp
