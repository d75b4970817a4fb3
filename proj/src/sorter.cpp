#include "imgraph/sorter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "imgraph/error.hpp"

namespace imgraph {

void GridAssignment::place(std::size_t row, std::size_t col, const FeatureRecord& record, bool frozen) {
    place(row, col, record.image_id, record.semantic, record.visual, frozen);
}

void GridAssignment::place(std::size_t row, std::size_t col, ImageId id, const SemanticFeature& semantic,
                           const VisualFeature& visual, bool frozen) {
    GridCell& cell = at(row, col);
    cell.image_id = id;
    cell.frozen = frozen && id != kEmptyCell;
    cell.semantic = semantic;
    cell.visual = visual;
}

std::size_t GridAssignment::occupied_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const GridCell& c) { return !c.empty(); }));
}

std::vector<ImageId> GridAssignment::ids() const {
    std::vector<ImageId> out;
    for (const auto& c : cells_) {
        if (!c.empty()) out.push_back(c.image_id);
    }
    return out;
}

std::optional<std::pair<std::size_t, std::size_t>> GridAssignment::locate(ImageId id) const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        if (cells_[i].image_id == id && id != kEmptyCell) return std::pair{i / cols_, i % cols_};
    }
    return std::nullopt;
}

std::optional<std::string> GridAssignment::check_invariants() const {
    if (cells_.size() != rows_ * cols_) return "cell count does not match rows x cols";
    std::unordered_set<ImageId> seen;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const GridCell& c = cells_[i];
        if (c.empty()) {
            if (c.frozen) return "frozen empty cell at " + std::to_string(i);
            continue;
        }
        if (!seen.insert(c.image_id).second) return "image " + std::to_string(c.image_id) + " placed twice";
    }
    return std::nullopt;
}

namespace {

constexpr std::size_t kDims = kSemanticDims + kVisualDims;

struct Entry {
    ImageId id;
    const SemanticFeature* semantic;
    const VisualFeature* visual;
};

// Working state of one sort. Occupied input cells are fixed; the rest of the
// cells are movable and hold either a new item or nothing (-1).
class SortState {
public:
    SortState(std::span<const FeatureRecord> items, const GridAssignment& grid, const SortOptions& options)
        : grid_(grid), options_(options), rows_(grid.rows()), cols_(grid.cols()) {
        const std::size_t n = grid.cell_count();
        content_.assign(n, -1);
        movable_.assign(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            const GridCell& cell = grid.cells()[i];
            if (cell.empty()) {
                movable_[i] = true;
            } else {
                content_[i] = static_cast<int>(entries_.size());
                entries_.push_back({cell.image_id, &cell.semantic, &cell.visual});
            }
        }
        first_item_ = entries_.size();
        for (const auto& item : items) entries_.push_back({item.image_id, &item.semantic, &item.visual});

        // Scaled so that squared Euclidean distance equals combined_distance.
        const double ws = std::sqrt(options.weights.semantic / static_cast<double>(kSemanticDims)) / 255.0;
        const double wv = std::sqrt(options.weights.visual / static_cast<double>(kVisualDims)) / 255.0;
        vectors_.resize(entries_.size() * kDims);
        for (std::size_t e = 0; e < entries_.size(); ++e) {
            double* v = &vectors_[e * kDims];
            for (std::size_t d = 0; d < kSemanticDims; ++d) v[d] = ws * (*entries_[e].semantic)[d];
            for (std::size_t d = 0; d < kVisualDims; ++d) v[kSemanticDims + d] = wv * (*entries_[e].visual)[d];
        }
    }

    void scatter_items(std::mt19937_64& rng) {
        std::vector<std::size_t> free_cells;
        for (std::size_t i = 0; i < movable_.size(); ++i) {
            if (movable_[i]) free_cells.push_back(i);
        }
        std::shuffle(free_cells.begin(), free_cells.end(), rng);
        for (std::size_t k = first_item_; k < entries_.size(); ++k) {
            content_[free_cells[k - first_item_]] = static_cast<int>(k);
        }
    }

    void block_passes() {
        std::size_t block = 1;
        while (2 * block * 2 <= std::max(rows_, cols_)) block *= 2;
        for (;; block /= 2) {
            for (std::size_t sweep = 0; sweep < options_.sweeps_per_size; ++sweep) {
                compute_targets(block);
                permute_blocks(block, sweep % 2 == 1);
            }
            if (block == 1) break;
        }
    }

    void refine() {
        static constexpr std::array<std::pair<int, int>, 4> kOffsets{{{0, 0}, {1, 1}, {0, 1}, {1, 0}}};
        for (std::size_t round = 0; round < options_.max_refine_rounds; ++round) {
            bool changed = false;
            for (auto [oy, ox] : kOffsets) {
                for (int gy = -oy; gy < static_cast<int>(rows_); gy += 2) {
                    for (int gx = -ox; gx < static_cast<int>(cols_); gx += 2) {
                        changed |= refine_group(gy, gx);
                    }
                }
            }
            if (!changed) break;
        }
    }

    GridAssignment result() const {
        GridAssignment out = grid_;
        for (std::size_t i = 0; i < content_.size(); ++i) {
            if (!movable_[i]) continue;
            GridCell& cell = out.at(i / cols_, i % cols_);
            if (content_[i] < 0) {
                cell = GridCell{};
            } else {
                const Entry& e = entries_[static_cast<std::size_t>(content_[i])];
                cell.image_id = e.id;
                cell.frozen = false;
                cell.semantic = *e.semantic;
                cell.visual = *e.visual;
            }
        }
        return out;
    }

private:
    const double* vec(int entry) const { return &vectors_[static_cast<std::size_t>(entry) * kDims]; }

    double distance(int a, int b) const {
        const double* x = vec(a);
        const double* y = vec(b);
        double sum = 0.0;
        for (std::size_t d = 0; d < kDims; ++d) {
            const double diff = x[d] - y[d];
            sum += diff * diff;
        }
        return sum;
    }

    // Box filter of the occupied field with radius `block`, via integral images.
    void compute_targets(std::size_t block) {
        const std::size_t w = cols_ + 1;
        std::vector<double> sums((rows_ + 1) * w * kDims, 0.0);
        std::vector<int> counts((rows_ + 1) * w, 0);
        std::vector<double> global(kDims, 0.0);
        int occupied = 0;
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) {
                const int e = content_[r * cols_ + c];
                const std::size_t at = (r + 1) * w + (c + 1);
                counts[at] = counts[r * w + c + 1] + counts[(r + 1) * w + c] - counts[r * w + c] + (e >= 0);
                double* s = &sums[at * kDims];
                const double* up = &sums[(r * w + c + 1) * kDims];
                const double* left = &sums[((r + 1) * w + c) * kDims];
                const double* diag = &sums[(r * w + c) * kDims];
                for (std::size_t d = 0; d < kDims; ++d) s[d] = up[d] + left[d] - diag[d];
                if (e >= 0) {
                    const double* v = vec(e);
                    for (std::size_t d = 0; d < kDims; ++d) {
                        s[d] += v[d];
                        global[d] += v[d];
                    }
                    ++occupied;
                }
            }
        }
        if (occupied > 0) {
            for (auto& g : global) g /= occupied;
        }

        targets_.assign(rows_ * cols_ * kDims, 0.0);
        const auto radius = static_cast<std::ptrdiff_t>(block);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) {
                const std::size_t r0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(r) - radius));
                const std::size_t c0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - radius));
                const std::size_t r1 = std::min(rows_, r + block + 1);
                const std::size_t c1 = std::min(cols_, c + block + 1);
                const int n = counts[r1 * w + c1] - counts[r0 * w + c1] - counts[r1 * w + c0] + counts[r0 * w + c0];
                double* t = &targets_[(r * cols_ + c) * kDims];
                if (n == 0) {
                    std::copy(global.begin(), global.end(), t);
                    continue;
                }
                const double* a = &sums[(r1 * w + c1) * kDims];
                const double* b = &sums[(r0 * w + c1) * kDims];
                const double* cc = &sums[(r1 * w + c0) * kDims];
                const double* dd = &sums[(r0 * w + c0) * kDims];
                for (std::size_t d = 0; d < kDims; ++d) t[d] = (a[d] - b[d] - cc[d] + dd[d]) / n;
            }
        }
    }

    double target_cost(int entry, std::size_t cell) const {
        if (entry < 0) return 0.0;
        const double* x = vec(entry);
        const double* t = &targets_[cell * kDims];
        double sum = 0.0;
        for (std::size_t d = 0; d < kDims; ++d) {
            const double diff = x[d] - t[d];
            sum += diff * diff;
        }
        return sum;
    }

    // Groups of 2x2 blocks; the cells at the same offset inside the 4 blocks
    // exchange contents by the best of all permutations against the targets.
    void permute_blocks(std::size_t block, bool shifted) {
        const auto b = static_cast<std::ptrdiff_t>(block);
        const std::ptrdiff_t start = shifted ? -b : 0;
        const auto rows = static_cast<std::ptrdiff_t>(rows_);
        const auto cols = static_cast<std::ptrdiff_t>(cols_);
        for (std::ptrdiff_t gy = start; gy < rows; gy += 2 * b) {
            for (std::ptrdiff_t gx = start; gx < cols; gx += 2 * b) {
                for (std::ptrdiff_t dy = 0; dy < b; ++dy) {
                    for (std::ptrdiff_t dx = 0; dx < b; ++dx) {
                        std::array<std::size_t, 4> cells{};
                        std::size_t k = 0;
                        for (std::ptrdiff_t by = 0; by < 2; ++by) {
                            for (std::ptrdiff_t bx = 0; bx < 2; ++bx) {
                                const std::ptrdiff_t r = gy + by * b + dy;
                                const std::ptrdiff_t c = gx + bx * b + dx;
                                if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
                                const auto cell = static_cast<std::size_t>(r * cols + c);
                                if (movable_[cell]) cells[k++] = cell;
                            }
                        }
                        if (k >= 2) assign_best(std::span(cells.data(), k));
                    }
                }
            }
        }
    }

    void assign_best(std::span<const std::size_t> cells) {
        std::array<int, 4> current{};
        for (std::size_t i = 0; i < cells.size(); ++i) current[i] = content_[cells[i]];
        std::array<std::size_t, 4> perm{0, 1, 2, 3};
        std::array<std::size_t, 4> best_perm = perm;
        double best = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) best += target_cost(current[i], cells[i]);
        while (std::next_permutation(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cells.size()))) {
            double cost = 0.0;
            for (std::size_t i = 0; i < cells.size(); ++i) cost += target_cost(current[perm[i]], cells[i]);
            if (cost < best) {
                best = cost;
                best_perm = perm;
            }
        }
        for (std::size_t i = 0; i < cells.size(); ++i) content_[cells[i]] = current[best_perm[i]];
    }

    // Sum of distances over adjacent occupied pairs touching the given cells.
    double local_cost(std::span<const std::size_t> cells) const {
        double cost = 0.0;
        for (std::size_t cell : cells) {
            const int e = content_[cell];
            if (e < 0) continue;
            const std::size_t r = cell / cols_;
            const std::size_t c = cell % cols_;
            const std::array<std::pair<bool, std::size_t>, 4> around{{
                {r > 0, cell - cols_},
                {r + 1 < rows_, cell + cols_},
                {c > 0, cell - 1},
                {c + 1 < cols_, cell + 1},
            }};
            for (auto [inside, other] : around) {
                if (!inside || content_[other] < 0) continue;
                const bool other_in_group = std::find(cells.begin(), cells.end(), other) != cells.end();
                if (other_in_group && other < cell) continue;  // count each inner pair once
                cost += distance(e, content_[other]);
            }
        }
        return cost;
    }

    bool refine_group(int gy, int gx) {
        std::array<std::size_t, 4> cells{};
        std::size_t k = 0;
        for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
                const int r = gy + dy;
                const int c = gx + dx;
                if (r < 0 || c < 0 || r >= static_cast<int>(rows_) || c >= static_cast<int>(cols_)) continue;
                const auto cell = static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c);
                if (movable_[cell]) cells[k++] = cell;
            }
        }
        if (k < 2) return false;
        const std::span<const std::size_t> group(cells.data(), k);

        std::array<int, 4> current{};
        for (std::size_t i = 0; i < k; ++i) current[i] = content_[cells[i]];
        std::array<std::size_t, 4> perm{0, 1, 2, 3};
        std::array<std::size_t, 4> best_perm = perm;
        double best = local_cost(group);
        const double baseline = best;
        while (std::next_permutation(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k))) {
            for (std::size_t i = 0; i < k; ++i) content_[cells[i]] = current[perm[i]];
            const double cost = local_cost(group);
            if (cost < best) {
                best = cost;
                best_perm = perm;
            }
        }
        for (std::size_t i = 0; i < k; ++i) content_[cells[i]] = current[best_perm[i]];
        // Ignore rounding-level gains so the refinement terminates cleanly.
        return best < baseline - 1e-12;
    }

    const GridAssignment& grid_;
    SortOptions options_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Entry> entries_;
    std::size_t first_item_ = 0;
    std::vector<double> vectors_;
    std::vector<double> targets_;
    std::vector<int> content_;
    std::vector<bool> movable_;
};

void validate(std::span<const FeatureRecord> items, const GridAssignment& grid) {
    if (items.size() > grid.empty_count()) {
        throw Error(ErrorCode::CapacityExceeded, std::to_string(items.size()) + " items for " +
                                                     std::to_string(grid.empty_count()) + " empty cells");
    }
    std::unordered_set<ImageId> seen;
    for (const auto& cell : grid.cells()) {
        if (!cell.empty()) seen.insert(cell.image_id);
    }
    for (const auto& item : items) {
        if (item.image_id == kEmptyCell || !seen.insert(item.image_id).second) {
            throw Error(ErrorCode::DuplicateId, "image " + std::to_string(item.image_id) + " already on the grid");
        }
    }
}

std::optional<double> quality_if_defined(const GridAssignment& grid, const DistanceWeights& weights) {
    try {
        return grid_quality(grid, weights);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Undefined) throw;
        return std::nullopt;
    }
}

}  // namespace

GridAssignment sort_grid_constrained(std::span<const FeatureRecord> items, const GridAssignment& grid,
                                     std::uint64_t seed, const SortOptions& options) {
    validate(items, grid);
    std::mt19937_64 rng(seed);
    SortState state(items, grid, options);
    state.scatter_items(rng);
    const GridAssignment initial = state.result();
    if (items.empty()) return initial;

    state.block_passes();
    state.refine();
    GridAssignment sorted = state.result();

    // The output never scores below the random starting point.
    const auto before = quality_if_defined(initial, options.weights);
    const auto after = quality_if_defined(sorted, options.weights);
    if (before && after && *after < *before) return initial;
    return sorted;
}

GridAssignment sort_grid(std::span<const FeatureRecord> items, std::size_t rows, std::size_t cols,
                         std::uint64_t seed, const SortOptions& options) {
    return sort_grid_constrained(items, GridAssignment(rows, cols), seed, options);
}

GridAssignment random_placement(std::span<const FeatureRecord> items, std::size_t rows, std::size_t cols,
                                std::uint64_t seed) {
    const GridAssignment empty(rows, cols);
    validate(items, empty);
    std::mt19937_64 rng(seed);
    SortState state(items, empty, SortOptions{});
    state.scatter_items(rng);
    return state.result();
}

double grid_quality(const GridAssignment& grid, const DistanceWeights& weights) {
    double sum = 0.0;
    std::size_t pairs = 0;
    auto visit = [&](const GridCell& a, const GridCell& b) {
        if (a.empty() || b.empty()) return;
        sum += 1.0 - combined_distance(a.semantic, a.visual, b.semantic, b.visual, weights);
        ++pairs;
    };
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            if (c + 1 < grid.cols()) visit(grid.at(r, c), grid.at(r, c + 1));
            if (r + 1 < grid.rows()) visit(grid.at(r, c), grid.at(r + 1, c));
        }
    }
    if (pairs == 0) throw Error(ErrorCode::Undefined, "grid has no adjacent occupied pair");
    return sum / static_cast<double>(pairs);
}

}  // namespace imgraph
