#include "imgraph/improvement_loop.hpp"

#include <chrono>
#include <iostream>

#include "imgraph/error.hpp"

namespace imgraph {

ImprovementLoop::ImprovementLoop(HierarchicalGraph initial, LoopOptions options)
    : options_(options), work_(std::move(initial)), rng_(options.seed) {
    if (work_.layers.empty()) throw Error(ErrorCode::EmptyCollection, "improvement loop needs a graph");
    snapshot_ = std::make_shared<const HierarchicalGraph>(work_);
}

ImprovementLoop::~ImprovementLoop() { stop(); }

void ImprovementLoop::start() {
    if (running()) return;
    stop_requested_ = false;
    thread_ = std::thread([this] { run(); });
}

void ImprovementLoop::stop() {
    if (!running()) return;
    {
        std::lock_guard lock(wake_mutex_);
        stop_requested_ = true;
    }
    wake_.notify_all();
    thread_.join();
}

void ImprovementLoop::run_batches(std::size_t count) {
    if (running()) throw Error(ErrorCode::Undefined, "run_batches while the loop thread is running");
    for (std::size_t i = 0; i < count; ++i) step();
}

std::shared_ptr<const HierarchicalGraph> ImprovementLoop::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

void ImprovementLoop::enqueue_add(FeatureRecord record) {
    {
        std::lock_guard lock(pending_mutex_);
        pending_.emplace_back(std::move(record));
    }
    wake_.notify_all();
}

void ImprovementLoop::enqueue_remove(ImageId id) {
    {
        std::lock_guard lock(pending_mutex_);
        pending_.emplace_back(id);
    }
    wake_.notify_all();
}

void ImprovementLoop::run() {
    while (!stop_requested_) {
        try {
            step();
        } catch (const std::exception& e) {
            std::cerr << "improvement loop: " << e.what() << '\n';
        }
        if (options_.batch_size == 0) {
            // Nothing to improve; wait for queued mutations or stop.
            std::unique_lock lock(wake_mutex_);
            wake_.wait_for(lock, std::chrono::milliseconds(20), [this] { return stop_requested_.load(); });
        }
    }
}

void ImprovementLoop::step() {
    bool changed = apply_pending();
    const std::size_t accepted = improve_in_place(work_.layers[0], options_.batch_size, rng_);
    accepted_ += accepted;
    changed = changed || accepted > 0;
    dirty_since_refresh_ = dirty_since_refresh_ || changed;
    const std::uint64_t done = ++batches_;
    if (options_.refresh_every > 0 && done % options_.refresh_every == 0 && dirty_since_refresh_) {
        refresh_upper_layers();
        changed = true;
    }
    if (changed) publish();
}

bool ImprovementLoop::apply_pending() {
    std::deque<std::variant<FeatureRecord, ImageId>> batch;
    {
        std::lock_guard lock(pending_mutex_);
        batch.swap(pending_);
    }
    if (batch.empty()) return false;
    for (auto& op : batch) {
        try {
            if (auto* record = std::get_if<FeatureRecord>(&op)) {
                add_node_in_place(work_.layers[0], *record);
            } else {
                const ImageId id = std::get<ImageId>(op);
                if (!work_.layers[0].contains(id)) throw Error(ErrorCode::NotFound, "remove of unknown image");
                if (work_.layers[0].size() == 1) throw Error(ErrorCode::EmptyCollection, "cannot remove the last image");
                for (auto& layer : work_.layers) {
                    if (layer.contains(id)) remove_node_in_place(layer, id, rng_);
                }
            }
            dirty_since_refresh_ = true;
        } catch (const Error& e) {
            std::cerr << "improvement loop: skipped mutation: " << e.what() << '\n';
        }
    }
    // Removals can empty an upper layer or break strict shrinkage.
    while (work_.layers.size() > 1 && work_.layers.back().empty()) work_.layers.pop_back();
    if (work_.check_invariants()) refresh_upper_layers();
    return true;
}

void ImprovementLoop::refresh_upper_layers() {
    ++refreshes_;
    work_ = build_hierarchy(work_.layers[0], options_.seed ^ (refreshes_ * 0x9E3779B97F4A7C15ull));
    dirty_since_refresh_ = false;
}

void ImprovementLoop::publish() {
    auto next = std::make_shared<const HierarchicalGraph>(work_);
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
}

}  // namespace imgraph
