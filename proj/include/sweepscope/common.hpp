#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sweepscope {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Group label per item; kNoise marks items a density method left unassigned.
using Labels = std::vector<int>;
inline constexpr int kNoise = -1;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// Non-fatal diagnostics collected by operations that degrade gracefully.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message)
{
    if (sink != nullptr)
        sink->push_back(std::move(message));
}

inline double squared_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b)
{
    return (a - b).squaredNorm();
}

inline double row_distance(const Matrix& x, std::size_t i, std::size_t j)
{
    return (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
}

/// Dense symmetric matrix of Euclidean distances between rows.
inline Matrix pairwise_distances(const Matrix& x)
{
    const auto n = x.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (x.row(i) - x.row(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

/// Shortest round-trip decimal rendering.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Renders a sweep parameter value as a short key ("0.05", "20").
inline std::string format_param(double v)
{
    double r = std::round(v * 1e9) / 1e9;
    if (r == 0.0)
        r = 0.0;
    return format_double(r);
}

inline double parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double out = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidArgument("not a number: '" + std::string(s) + "'");
    return out;
}

/// Indices of the top_n largest values; ties go to the lower index.
inline std::vector<std::size_t> top_indices(const std::vector<double>& values, std::size_t top_n)
{
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    top_n = std::min(top_n, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_n), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (values[a] != values[b])
                              return values[a] > values[b];
                          return a < b;
                      });
    idx.resize(top_n);
    return idx;
}

/// Linear-interpolation quantile (order statistics at (n-1)p) of unsorted data.
inline double quantile(std::vector<double> values, double p)
{
    if (values.empty())
        throw InvalidArgument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace sweepscope
