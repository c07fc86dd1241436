#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splidar {

/// Raised on malformed files or invariant violations in loaded data.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct Event {
    std::uint32_t bin = 0;
    std::uint32_t count = 0;
    bool operator==(const Event&) const = default;
};

/// Sparse photon-count histogram cube. Only active bins (count >= 1) are
/// stored, per pixel in strictly increasing bin order, CSR style.
struct PhotonCube {
    int n_rows = 0;
    int n_cols = 0;
    int n_bins = 0;
    double bin_width_s = 0.0;

    std::vector<std::uint64_t> offsets;  // size n_rows*n_cols + 1
    std::vector<Event> events;
    std::uint64_t total_count = 0;

    PhotonCube() : offsets(1, 0) {}
    PhotonCube(int rows, int cols, int bins, double bin_width)
        : n_rows(rows), n_cols(cols), n_bins(bins), bin_width_s(bin_width),
          offsets(static_cast<std::size_t>(rows) * cols + 1, 0) {
        if (rows <= 0 || cols <= 0 || bins <= 0)
            throw std::invalid_argument("PhotonCube: dimensions must be positive");
    }

    static PhotonCube from_pixel_events(int rows, int cols, int bins,
                                        double bin_width,
                                        const std::vector<std::vector<Event>>& per_pixel) {
        PhotonCube c(rows, cols, bins, bin_width);
        if (per_pixel.size() != c.n_pixels())
            throw std::invalid_argument("PhotonCube: pixel list size mismatch");
        for (std::size_t p = 0; p < per_pixel.size(); ++p) {
            for (const Event& e : per_pixel[p]) c.events.push_back(e);
            c.offsets[p + 1] = c.events.size();
        }
        c.recount();
        c.validate();
        return c;
    }

    std::size_t n_pixels() const {
        return static_cast<std::size_t>(n_rows) * n_cols;
    }
    std::size_t pixel_index(int i, int j) const {
        return static_cast<std::size_t>(i) * n_cols + j;
    }
    /// Active bins of pixel (i, j) as [begin, end) into events.
    std::pair<const Event*, const Event*> pixel(int i, int j) const {
        std::size_t p = pixel_index(i, j);
        return {events.data() + offsets[p], events.data() + offsets[p + 1]};
    }
    std::uint64_t pixel_count(int i, int j) const {
        auto [b, e] = pixel(i, j);
        std::uint64_t s = 0;
        for (; b != e; ++b) s += b->count;
        return s;
    }
    double mean_active_bins() const {
        return n_pixels() ? static_cast<double>(events.size()) / n_pixels() : 0.0;
    }

    void recount() {
        total_count = 0;
        for (const Event& e : events) total_count += e.count;
    }

    /// Enforces the structural invariants; violations name the pixel.
    void validate() const {
        if (n_rows <= 0 || n_cols <= 0 || n_bins <= 0)
            throw FormatError("cube: non-positive dimensions");
        if (offsets.size() != n_pixels() + 1 || offsets.front() != 0 ||
            offsets.back() != events.size())
            throw FormatError("cube: bad offset table");
        for (std::size_t p = 0; p < n_pixels(); ++p) {
            std::uint32_t prev_bin = 0;
            bool first = true;
            if (offsets[p] > offsets[p + 1])
                throw FormatError("cube: negative event range at pixel " + std::to_string(p));
            for (std::uint64_t k = offsets[p]; k < offsets[p + 1]; ++k) {
                const Event& e = events[k];
                if (e.bin >= static_cast<std::uint32_t>(n_bins))
                    throw FormatError("cube: bin out of range at pixel " + std::to_string(p));
                if (e.count < 1)
                    throw FormatError("cube: zero count at pixel " + std::to_string(p));
                if (!first && e.bin <= prev_bin)
                    throw FormatError("cube: bins not strictly increasing at pixel " +
                                      std::to_string(p));
                prev_bin = e.bin;
                first = false;
            }
        }
        std::uint64_t total = 0;
        for (const Event& e : events) total += e.count;
        if (total != total_count)
            throw FormatError("cube: cached total count mismatch");
    }

    bool operator==(const PhotonCube&) const = default;
};

}  // namespace splidar
