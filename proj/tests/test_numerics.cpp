#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "remp/metric.hpp"
#include "remp/rng.hpp"

using namespace remp;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -3.0,
                     double hi = 3.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("cosine basics") {
    std::vector<double> a{1, 0}, b{0, 1};
    CHECK(cosine(a, b) == doctest::Approx(0.0));
    std::vector<double> c{2, 0}, d{5, 0};
    CHECK(cosine(c, d) == doctest::Approx(1.0));
    std::vector<double> e{1, 2, 3}, f{4, 5, 6};
    // 32 / (sqrt(14) sqrt(77))
    CHECK(cosine(e, f) == doctest::Approx(0.974631846).epsilon(1e-8));
}

TEST_CASE("cosine rejects zero-norm operands") {
    std::vector<double> z{0, 0}, a{1, 1};
    CHECK_THROWS_AS(cosine(z, a), std::domain_error);
    CHECK_THROWS_AS(cosine(a, z), std::domain_error);
    std::vector<double> short_vec{1};
    CHECK_THROWS_AS(cosine(a, short_vec), std::invalid_argument);
}

TEST_CASE("cosine scale invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = rng.uniform(-2, 2);
        for (auto& v : b) v = rng.uniform(-2, 2);
        const double lam = rng.uniform(0.01, 10.0);
        const double mu = rng.uniform(0.01, 10.0);
        std::vector<double> la(4), mb(4);
        for (int i = 0; i < 4; ++i) {
            la[i] = lam * a[i];
            mb[i] = mu * b[i];
        }
        CHECK(std::abs(cosine(a, b) - cosine(la, mb)) < 1e-12);
    }
}

TEST_CASE("neg_sq_euclidean basics and symmetry") {
    std::vector<double> a{1, 2};
    CHECK(neg_sq_euclidean(a, a) == 0.0);
    std::vector<double> b{4, 6};
    CHECK(neg_sq_euclidean(a, b) == doctest::Approx(-25.0));
    std::vector<double> z{0, 0, 0}, o{1, 1, 1};
    CHECK(neg_sq_euclidean(z, o) == doctest::Approx(-3.0));
    CHECK_THROWS_AS(neg_sq_euclidean(a, z), std::invalid_argument);

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(5), y(5), t(5);
        for (auto& v : x) v = rng.uniform(-3, 3);
        for (auto& v : y) v = rng.uniform(-3, 3);
        for (auto& v : t) v = rng.uniform(-3, 3);
        CHECK(std::abs(neg_sq_euclidean(x, y) - neg_sq_euclidean(y, x)) < 1e-12);
        std::vector<double> xt(5), yt(5);
        for (int i = 0; i < 5; ++i) {
            xt[i] = x[i] + t[i];
            yt[i] = y[i] + t[i];
        }
        CHECK(std::abs(neg_sq_euclidean(xt, yt) - neg_sq_euclidean(x, y)) < 1e-11);
    }
}

TEST_CASE("softmax_rows examples") {
    Matrix equal = Matrix::from_rows({{0, 0, 0}});
    Matrix out = softmax_rows(equal);
    for (int j = 0; j < 3; ++j) CHECK(out(0, j) == doctest::Approx(1.0 / 3));

    Matrix big = Matrix::from_rows({{1000, 1000}});
    out = softmax_rows(big);
    CHECK(out(0, 0) == doctest::Approx(0.5));
    CHECK(out.all_finite());

    Matrix m = Matrix::from_rows({{1, 2, 3}});
    out = softmax_rows(m);
    CHECK(out(0, 0) == doctest::Approx(0.09003057).epsilon(1e-6));
    CHECK(out(0, 1) == doctest::Approx(0.24472847).epsilon(1e-6));
    CHECK(out(0, 2) == doctest::Approx(0.66524096).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one on random matrices") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix m = random_matrix(4, 6, rng, -50, 50);
        Matrix out = softmax_rows(m);
        for (std::size_t i = 0; i < out.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < out.cols(); ++j) sum += out(i, j);
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("softmax_cols columns sum to one") {
    Rng rng(5);
    Matrix m = random_matrix(5, 3, rng, -20, 20);
    Matrix out = softmax_cols(m);
    for (std::size_t j = 0; j < out.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < out.rows(); ++i) sum += out(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("pairwise_similarity examples") {
    Matrix a = Matrix::from_rows({{1, 0}});
    Matrix b = Matrix::from_rows({{1, 0}, {0, 1}});
    Matrix out = pairwise_similarity(a, b, {MetricKind::Cosine});
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(0, 1) == doctest::Approx(0.0));

    out = pairwise_similarity(Matrix::from_rows({{0, 0}}), Matrix::from_rows({{1, 1}}),
                              {MetricKind::NegSqEuclidean});
    CHECK(out(0, 0) == doctest::Approx(-2.0));

    out = pairwise_similarity(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{1, 2}}),
                              {MetricKind::NegSqEuclidean});
    CHECK(out(0, 0) == doctest::Approx(0.0));
    CHECK(out(1, 0) == doctest::Approx(-8.0));

    CHECK_THROWS_AS(pairwise_similarity(Matrix(1, 2), Matrix(1, 3), {MetricKind::NegSqEuclidean}),
                    std::invalid_argument);
    CHECK_THROWS_AS(pairwise_similarity(Matrix(1, 2), Matrix::from_rows({{1.0, 1.0}}),
                                        {MetricKind::Cosine}),
                    std::domain_error);
}

TEST_CASE("pairwise_similarity agrees with scalar-loop oracle") {
    Rng rng(13);
    for (const MetricKind kind : {MetricKind::Cosine, MetricKind::NegSqEuclidean}) {
        const Metric metric{kind};
        Matrix a = random_matrix(5, 3, rng, 0.5, 3.0);  // positive keeps cosine well-defined
        Matrix b = random_matrix(5, 3, rng, 0.5, 3.0);
        Matrix out = pairwise_similarity(a, b, metric);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                double expected;
                if (kind == MetricKind::NegSqEuclidean) {
                    expected = 0.0;
                    for (std::size_t k = 0; k < 3; ++k)
                        expected -= (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
                } else {
                    double dot = 0, na = 0, nb = 0;
                    for (std::size_t k = 0; k < 3; ++k) {
                        dot += a(i, k) * b(j, k);
                        na += a(i, k) * a(i, k);
                        nb += b(j, k) * b(j, k);
                    }
                    expected = dot / (std::sqrt(na) * std::sqrt(nb));
                }
                CHECK(std::abs(out(i, j) - expected) < 1e-12);
            }
    }
}

TEST_CASE("similarity_backward matches finite differences") {
    Rng rng(17);
    for (const Metric metric : {Metric{MetricKind::Cosine}, Metric{MetricKind::NegSqEuclidean},
                                Metric{MetricKind::NegSqEuclidean, false}}) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = rng.uniform(0.5, 2.0);
        for (auto& v : b) v = rng.uniform(0.5, 2.0);
        std::vector<double> da(4, 0.0), db(4, 0.0);
        similarity_backward(a, b, 1.0, da, db, metric);
        const double eps = 1e-6;
        for (int i = 0; i < 4; ++i) {
            auto ap = a, am = a;
            ap[i] += eps;
            am[i] -= eps;
            const double fd = (similarity(ap, b, metric) - similarity(am, b, metric)) / (2 * eps);
            CHECK(da[i] == doctest::Approx(fd).epsilon(1e-5));
            auto bp = b, bm = b;
            bp[i] += eps;
            bm[i] -= eps;
            const double fdb = (similarity(a, bp, metric) - similarity(a, bm, metric)) / (2 * eps);
            CHECK(db[i] == doctest::Approx(fdb).epsilon(1e-5));
        }
    }
}
