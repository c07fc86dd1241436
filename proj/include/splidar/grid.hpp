#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace splidar {

/// Dense row-major 2D array.
template <typename T>
struct Grid2D {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Grid2D() = default;
    Grid2D(int r, int c, T fill = T{})
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Grid2D: negative shape");
    }

    T& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    const T& operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * cols + j];
    }
    bool in_bounds(int i, int j) const {
        return i >= 0 && i < rows && j >= 0 && j < cols;
    }
    std::size_t size() const { return data.size(); }
    bool operator==(const Grid2D&) const = default;
};

/// Per-coarse-pixel background rate, photons per bin per frame, pre-gain.
using BackgroundImage = Grid2D<double>;

}  // namespace splidar
