#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "groundlab/common.hpp"
#include "groundlab/config.hpp"
#include "groundlab/rng.hpp"

namespace groundlab_test {

// Scratch directory under the process temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("groundlab_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline groundlab::Matrix random_matrix(int rows, int cols, groundlab::RandomStream& rng,
                                       double scale = 1.0) {
  groundlab::Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.next_normal();
  return m;
}

// bitwise equality (shape + every coefficient)
inline bool same_matrix(const groundlab::Matrix& a, const groundlab::Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

inline double max_abs_diff(const groundlab::Matrix& a, const groundlab::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace groundlab_test
