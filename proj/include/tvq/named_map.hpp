#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tvq/error.hpp"

namespace tvq {

/// Insertion-ordered map keyed by unique, non-empty names. Iteration order is
/// the insertion order, which is also the serialized order.
template <typename T>
class NamedMap {
 public:
  using value_type = std::pair<std::string, T>;
  using const_iterator = typename std::vector<value_type>::const_iterator;

  void insert(std::string name, T value) {
    if (name.empty()) fail("empty tensor name");
    if (index_.contains(name)) fail("duplicate tensor name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
  }

  [[nodiscard]] const T* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  [[nodiscard]] T* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  [[nodiscard]] const T& at(std::string_view name) const {
    if (const T* v = find(name)) return *v;
    fail("no tensor named '" + std::string(name) + "'");
  }
  [[nodiscard]] T& at(std::string_view name) {
    if (T* v = find(name)) return *v;
    fail("no tensor named '" + std::string(name) + "'");
  }

  [[nodiscard]] bool contains(std::string_view name) const { return find(name) != nullptr; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

  [[nodiscard]] const std::string& name_at(std::size_t i) const { return entries_.at(i).first; }
  [[nodiscard]] const T& value_at(std::size_t i) const { return entries_.at(i).second; }
  [[nodiscard]] T& value_at(std::size_t i) { return entries_.at(i).second; }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
  }

  const_iterator begin() const noexcept { return entries_.begin(); }
  const_iterator end() const noexcept { return entries_.end(); }

  friend bool operator==(const NamedMap& a, const NamedMap& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<value_type> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tvq
