#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tvq/tensor_map.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tvq_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> gaussian(std::mt19937_64& rng, std::size_t n, double sigma, double mean = 0.0) {
  std::normal_distribution<double> d(mean, sigma);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(d(rng));
  return v;
}

/// Random map of `count` tensors with random shapes of at most `max_elems` elements.
inline tvq::TensorMap random_map(std::mt19937_64& rng, std::size_t count, std::size_t max_elems) {
  std::uniform_int_distribution<std::size_t> dims(0, 3);
  std::uniform_real_distribution<float> val(-2.0f, 2.0f);
  tvq::TensorMap m;
  for (std::size_t i = 0; i < count; ++i) {
    tvq::Shape shape;
    const auto rank = dims(rng);
    std::uniform_int_distribution<std::uint64_t> ext(0, 4);
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(ext(rng));
    if (tvq::element_count(shape) > max_elems) shape = {max_elems};
    std::vector<float> data(static_cast<std::size_t>(tvq::element_count(shape)));
    for (auto& x : data) x = val(rng);
    m.insert("t" + std::to_string(i) + ".w", tvq::Tensor(shape, std::move(data)));
  }
  return m;
}

/// Single-tensor map holding `values` as a 1-D tensor.
inline tvq::TensorMap flat_map(const std::vector<float>& values, const std::string& name = "w") {
  tvq::TensorMap m;
  m.insert(name, tvq::Tensor({values.size()}, values));
  return m;
}

inline std::vector<float> flat(const tvq::TensorMap& m) {
  std::vector<float> out;
  for (const auto& [_, t] : m) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

}  // namespace testutil
