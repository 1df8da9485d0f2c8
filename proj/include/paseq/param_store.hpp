#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "paseq/value_array.hpp"

namespace paseq::num {

// Named parameters plus gradient slots of identical shape. Entries keep
// their insertion order, so every whole-store loop (Adam, clipping,
// checkpointing) visits parameters in the same order on every run.
class ParameterStore {
public:
    struct Entry {
        std::string path;
        ValueArray value;
        ValueArray grad;
    };

    ValueArray& create(const std::string& path, std::vector<std::size_t> shape) {
        if (index_.count(path))
            throw ContractError("parameter already exists: " + path);
        Entry e;
        e.path = path;
        e.value = ValueArray::zeros(shape);
        e.grad = ValueArray::zeros(std::move(shape));
        index_[path] = entries_.size();
        entries_.push_back(std::move(e));
        return entries_.back().value;
    }

    bool has(const std::string& path) const { return index_.count(path) != 0; }

    ValueArray& value(const std::string& path) { return entry(path).value; }
    const ValueArray& value(const std::string& path) const { return entry(path).value; }
    ValueArray& grad(const std::string& path) { return entry(path).grad; }

    std::size_t count() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(0.0);
    }

    double grad_norm() const {
        double sq = 0.0;
        for (const auto& e : entries_)
            for (double g : e.grad.v) sq += g * g;
        return std::sqrt(sq);
    }

    // Global-norm gradient clipping; no-op when the norm is under max_norm.
    void clip_grads(double max_norm) {
        const double norm = grad_norm();
        if (!(norm > max_norm)) return;
        const double scale = max_norm / norm;
        for (auto& e : entries_)
            for (double& g : e.grad.v) g *= scale;
    }

    std::size_t value_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    // Drops every parameter whose path starts with `prefix` (used to shed
    // stage-1 pretraining heads once their weights have been transplanted).
    void erase_prefix(const std::string& prefix) {
        std::vector<Entry> kept;
        kept.reserve(entries_.size());
        for (auto& e : entries_)
            if (e.path.rfind(prefix, 0) != 0) kept.push_back(std::move(e));
        entries_ = std::move(kept);
        index_.clear();
        for (std::size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].path] = i;
    }

    bool operator==(const ParameterStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].path != other.entries_[i].path) return false;
            if (entries_[i].value.shape != other.entries_[i].value.shape) return false;
            if (entries_[i].value.v != other.entries_[i].value.v) return false;
        }
        return true;
    }

private:
    Entry& entry(const std::string& path) {
        auto it = index_.find(path);
        if (it == index_.end()) throw ContractError("unknown parameter: " + path);
        return entries_[it->second];
    }
    const Entry& entry(const std::string& path) const {
        auto it = index_.find(path);
        if (it == index_.end()) throw ContractError("unknown parameter: " + path);
        return entries_[it->second];
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace paseq::num
