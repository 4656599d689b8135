#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lrednn/errors.hpp"
#include "lrednn/linalg.hpp"

namespace lrednn {

/// Uniform tensor-product collocation grid. Periodic dimensions omit the
/// right endpoint; non-periodic ones include both ends.
class CollocationGrid {
public:
    CollocationGrid() = default;

    CollocationGrid(std::vector<std::pair<double, double>> bounds,
                    std::vector<std::size_t> points_per_dim, std::vector<bool> periodic)
        : bounds_(std::move(bounds)), counts_(std::move(points_per_dim)),
          periodic_(std::move(periodic)) {
        if (bounds_.empty() || bounds_.size() != counts_.size() || bounds_.size() != periodic_.size())
            throw ConfigError("grid: bounds, counts and periodic flags must have equal nonzero length");
        for (std::size_t j = 0; j < dim(); ++j) {
            if (!(bounds_[j].second > bounds_[j].first))
                throw ConfigError("grid: empty interval in dimension " + std::to_string(j));
            if (counts_[j] < 2)
                throw ConfigError("grid: need at least 2 points per dimension");
        }
        std::size_t total = 1;
        for (auto c : counts_) total *= c;
        points_.resize(static_cast<Index>(total), static_cast<Index>(dim()));
        // Last dimension varies fastest.
        for (std::size_t p = 0; p < total; ++p) {
            std::size_t rem = p;
            for (std::size_t j = dim(); j-- > 0;) {
                const std::size_t i = rem % counts_[j];
                rem /= counts_[j];
                points_(static_cast<Index>(p), static_cast<Index>(j)) =
                    bounds_[j].first + static_cast<double>(i) * spacing(j);
            }
        }
    }

    /// Periodic grid on [lo, hi]^d with n points per dimension.
    static CollocationGrid periodic_box(std::size_t d, std::size_t n, double lo = -1.0,
                                        double hi = 1.0) {
        return CollocationGrid(std::vector<std::pair<double, double>>(d, {lo, hi}),
                               std::vector<std::size_t>(d, n), std::vector<bool>(d, true));
    }

    std::size_t dim() const noexcept { return bounds_.size(); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
    const std::vector<std::size_t>& points_per_dim() const noexcept { return counts_; }
    const std::vector<std::pair<double, double>>& bounds() const noexcept { return bounds_; }
    const std::vector<bool>& periodic() const noexcept { return periodic_; }

    double spacing(std::size_t j) const {
        const double len = bounds_[j].second - bounds_[j].first;
        const double n = static_cast<double>(counts_[j]);
        return periodic_[j] ? len / n : len / (n - 1.0);
    }

    /// Riemann-sum cell volume.
    double cell_volume() const {
        double v = 1.0;
        for (std::size_t j = 0; j < dim(); ++j) v *= spacing(j);
        return v;
    }

    /// M x d matrix of coordinates.
    const DenseMatrix& points() const noexcept { return points_; }
    Vector point(std::size_t i) const { return points_.row(static_cast<Index>(i)).transpose(); }

private:
    std::vector<std::pair<double, double>> bounds_;
    std::vector<std::size_t> counts_;
    std::vector<bool> periodic_;
    DenseMatrix points_;
};

}  // namespace lrednn
