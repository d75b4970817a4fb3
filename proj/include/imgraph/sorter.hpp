#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imgraph/features.hpp"

namespace imgraph {

inline constexpr ImageId kEmptyCell = kNullId;

struct GridCell {
    ImageId image_id = kEmptyCell;
    bool frozen = false;
    SemanticFeature semantic{};
    VisualFeature visual{};

    bool empty() const noexcept { return image_id == kEmptyCell; }
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// rows x cols placement of images, row-major. Cells carry the features of
/// their occupant so the grid can be scored and re-sorted on its own.
class GridAssignment {
public:
    GridAssignment() = default;
    GridAssignment(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t cell_count() const noexcept { return cells_.size(); }

    const GridCell& at(std::size_t row, std::size_t col) const { return cells_[row * cols_ + col]; }
    GridCell& at(std::size_t row, std::size_t col) { return cells_[row * cols_ + col]; }
    std::span<const GridCell> cells() const noexcept { return cells_; }

    void place(std::size_t row, std::size_t col, const FeatureRecord& record, bool frozen = false);
    void place(std::size_t row, std::size_t col, ImageId id, const SemanticFeature& semantic,
               const VisualFeature& visual, bool frozen = false);

    std::size_t occupied_count() const noexcept;
    std::size_t empty_count() const noexcept { return cells_.size() - occupied_count(); }
    /// Occupant ids in row-major order.
    std::vector<ImageId> ids() const;
    std::optional<std::pair<std::size_t, std::size_t>> locate(ImageId id) const;

    std::optional<std::string> check_invariants() const;

    friend bool operator==(const GridAssignment&, const GridAssignment&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<GridCell> cells_;
};

struct SortOptions {
    DistanceWeights weights{};
    /// Block-permutation sweeps per block size; odd sweeps shift the block grouping.
    std::size_t sweeps_per_size = 2;
    /// Upper bound on rounds of the exact 2x2 refinement at the end.
    std::size_t max_refine_rounds = 8;
};

/// Self-sorting-map arrangement of items on a rows x cols grid. Throws
/// CapacityExceeded or DuplicateId.
GridAssignment sort_grid(std::span<const FeatureRecord> items, std::size_t rows, std::size_t cols,
                         std::uint64_t seed, const SortOptions& options = {});

/// Places items into the EMPTY cells of grid; occupied cells never move and
/// contribute to the targets of their neighbors. Throws CapacityExceeded or
/// DuplicateId.
GridAssignment sort_grid_constrained(std::span<const FeatureRecord> items, const GridAssignment& grid,
                                     std::uint64_t seed, const SortOptions& options = {});

/// The seeded random placement sort_grid starts from.
GridAssignment random_placement(std::span<const FeatureRecord> items, std::size_t rows, std::size_t cols,
                                std::uint64_t seed);

/// Mean of (1 - combined_distance) over 4-adjacent non-empty cell pairs.
/// Throws Undefined when there is no such pair.
double grid_quality(const GridAssignment& grid, const DistanceWeights& weights = {});

}  // namespace imgraph
