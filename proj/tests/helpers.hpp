#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "lsrc/matrix.hpp"

namespace testutil {

inline lsrc::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                  double scale = 1.0) {
  lsrc::Matrix m(rows, cols);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

inline double max_abs_diff(const lsrc::Matrix& a, const lsrc::Matrix& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

inline bool bitwise_equal(const lsrc::Matrix& a, const lsrc::Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

// Unique scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("lsrc_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  os << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace testutil
