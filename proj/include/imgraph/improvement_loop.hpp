#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <variant>

#include "imgraph/graph.hpp"

namespace imgraph {

struct LoopOptions {
    /// improve attempts on layer 0 per batch
    std::size_t batch_size = 10000;
    /// rebuild upper layers every this many batches (only if layer 0 changed)
    std::size_t refresh_every = 100;
    std::uint64_t seed = 0;
};

/// Single writer over a hierarchical graph. Readers take immutable snapshots.
class ImprovementLoop {
public:
    explicit ImprovementLoop(HierarchicalGraph initial, LoopOptions options = {});
    ~ImprovementLoop();

    ImprovementLoop(const ImprovementLoop&) = delete;
    ImprovementLoop& operator=(const ImprovementLoop&) = delete;

    void start();
    void stop();
    bool running() const noexcept { return thread_.joinable(); }

    /// Runs batches on the calling thread; not allowed while started.
    void run_batches(std::size_t count);

    std::shared_ptr<const HierarchicalGraph> snapshot() const;
    std::uint64_t batches() const noexcept { return batches_.load(); }
    std::uint64_t accepted_swaps() const noexcept { return accepted_.load(); }

    /// Applied to layer 0 (and removed from upper layers) at the next batch.
    void enqueue_add(FeatureRecord record);
    void enqueue_remove(ImageId id);

private:
    void run();
    void step();
    bool apply_pending();
    void refresh_upper_layers();
    void publish();

    LoopOptions options_;
    HierarchicalGraph work_;
    std::mt19937_64 rng_;
    bool dirty_since_refresh_ = false;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const HierarchicalGraph> snapshot_;

    std::mutex pending_mutex_;
    std::deque<std::variant<FeatureRecord, ImageId>> pending_;

    std::mutex wake_mutex_;
    std::condition_variable wake_;
    std::atomic<bool> stop_requested_{false};
    std::atomic<std::uint64_t> batches_{0};
    std::atomic<std::uint64_t> accepted_{0};
    std::uint64_t refreshes_ = 0;
    std::thread thread_;
};

}  // namespace imgraph
