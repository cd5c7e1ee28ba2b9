#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "erosym/embedding.hpp"
#include "erosym/error.hpp"
#include "erosym/rng.hpp"

namespace erosym {

// Principal components of an embedding table. projection is row-major,
// target_dim x dim, rows orthonormal, ordered by descending eigenvalue,
// sign fixed so each row's largest-magnitude entry is positive.
struct PcaTransform {
    std::vector<double> mean;       // dim
    std::vector<double> projection; // target_dim x dim
    std::size_t dim = 0;
    std::size_t target_dim = 0;
    double explained_variance_ratio = 0.0;

    std::vector<double> apply(const double* v) const {
        std::vector<double> out(target_dim, 0.0);
        for (std::size_t r = 0; r < target_dim; ++r) {
            double s = 0.0;
            const double* p = projection.data() + r * dim;
            for (std::size_t d = 0; d < dim; ++d) s += p[d] * (v[d] - mean[d]);
            out[r] = s;
        }
        return out;
    }
};

namespace pca_detail {

constexpr double kTolerance = 1e-10;
constexpr int kMaxIterations = 10000;

inline void matvec(const std::vector<double>& m, std::size_t n,
                   const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        const double* row = m.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) s += row[c] * v[c];
        out[r] = s;
    }
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Remove the projections onto the already-found components (rows of basis).
inline void orthogonalize(std::vector<double>& v, const std::vector<double>& basis,
                          std::size_t count, std::size_t n) {
    for (std::size_t k = 0; k < count; ++k) {
        const double* b = basis.data() + k * n;
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += b[c] * v[c];
        for (std::size_t c = 0; c < n; ++c) v[c] -= dot * b[c];
    }
}

inline void fix_sign(double* row, std::size_t n) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < n; ++c)
        if (std::abs(row[c]) > std::abs(row[arg])) arg = c;
    if (row[arg] < 0)
        for (std::size_t c = 0; c < n; ++c) row[c] = -row[c];
}

} // namespace pca_detail

// Covariance eigendecomposition by power iteration with deflation and
// re-orthogonalization against the components already found.
inline PcaTransform fit_pca(const EmbeddingTable& table, std::size_t target_dim) {
    using namespace pca_detail;
    const std::size_t dim = table.dim();
    const std::size_t count = table.size();
    if (target_dim >= dim)
        throw DataError("fit_pca: target_dim must be strictly less than the table dimension");
    if (target_dim == 0) throw DataError("fit_pca: target_dim must be positive");
    if (count < target_dim)
        throw DataError("fit_pca: vocabulary smaller than target_dim");

    PcaTransform t;
    t.dim = dim;
    t.target_dim = target_dim;
    t.mean.assign(dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        const double* v = table.row(i);
        for (std::size_t d = 0; d < dim; ++d) t.mean[d] += v[d];
    }
    for (auto& m : t.mean) m /= static_cast<double>(count);

    // covariance, sample normalization (n - 1); n == 1 degenerates to zero
    std::vector<double> cov(dim * dim, 0.0);
    const double denom = count > 1 ? static_cast<double>(count - 1) : 1.0;
    std::vector<double> centered(dim);
    for (std::size_t i = 0; i < count; ++i) {
        const double* v = table.row(i);
        for (std::size_t d = 0; d < dim; ++d) centered[d] = v[d] - t.mean[d];
        for (std::size_t r = 0; r < dim; ++r) {
            const double cr = centered[r];
            if (cr == 0.0) continue;
            double* row = cov.data() + r * dim;
            for (std::size_t c = 0; c < dim; ++c) row[c] += cr * centered[c];
        }
    }
    for (auto& x : cov) x /= denom;

    double total_variance = 0.0;
    for (std::size_t d = 0; d < dim; ++d) total_variance += cov[d * dim + d];

    t.projection.assign(target_dim * dim, 0.0);
    std::vector<double> v(dim), w(dim), prev(dim);
    Rng rng(0x5eedf00dULL); // fixed: the start vector is part of the algorithm
    double captured = 0.0;

    for (std::size_t k = 0; k < target_dim; ++k) {
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        orthogonalize(v, t.projection, k, dim);
        double nv = norm(v);
        if (nv == 0.0) { v[k % dim] = 1.0; orthogonalize(v, t.projection, k, dim); nv = norm(v); }
        for (auto& x : v) x /= nv;

        double eigenvalue = 0.0;
        for (int iter = 0; iter < kMaxIterations; ++iter) {
            prev = v;
            matvec(cov, dim, v, w);
            orthogonalize(w, t.projection, k, dim);
            const double nw = norm(w);
            if (nw < 1e-300) {
                // exhausted rank: keep any orthonormal completion
                eigenvalue = 0.0;
                break;
            }
            for (std::size_t d = 0; d < dim; ++d) v[d] = w[d] / nw;
            eigenvalue = nw; // Rayleigh quotient of the deflated matrix
            double delta_plus = 0.0, delta_minus = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                delta_plus = std::max(delta_plus, std::abs(v[d] - prev[d]));
                delta_minus = std::max(delta_minus, std::abs(v[d] + prev[d]));
            }
            if (std::min(delta_plus, delta_minus) < kTolerance) break;
        }

        double* row = t.projection.data() + k * dim;
        for (std::size_t d = 0; d < dim; ++d) row[d] = v[d];
        fix_sign(row, dim);

        // deflate: cov -= lambda v v^T
        if (eigenvalue > 0.0) {
            captured += eigenvalue;
            for (std::size_t r = 0; r < dim; ++r)
                for (std::size_t c = 0; c < dim; ++c)
                    cov[r * dim + c] -= eigenvalue * row[r] * row[c];
        }
    }

    t.explained_variance_ratio =
        total_variance > 0.0 ? std::min(1.0, captured / total_variance) : 1.0;
    return t;
}

// Maps every vector to projection * (v - mean); vocabulary and order are
// preserved.
inline EmbeddingTable apply_pca(const PcaTransform& t, const EmbeddingTable& table) {
    if (table.dim() != t.dim)
        throw DataError("apply_pca: table dimension does not match the transform");
    EmbeddingTable out(table.kind(), table.label() + ":pca" + std::to_string(t.target_dim),
                       t.target_dim);
    for (std::size_t i = 0; i < table.size(); ++i)
        out.add(table.tokens()[i], t.apply(table.row(i)));
    return out;
}

} // namespace erosym
