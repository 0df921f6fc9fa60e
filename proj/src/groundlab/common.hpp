#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace groundlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

// Error taxonomy shared by the whole library. The C layer maps these onto
// status codes, the CLI onto exit codes.
struct InvalidArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OverwriteRefusedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Resolves a worker count: n > 0 is taken as-is, n == 0 consults
// GROUND_LAB_THREADS and falls back to the hardware concurrency (capped).
int resolve_thread_count(int requested);

// Runs fn(i) for i in [0, n). Results must be written by index; the package
// of work per index is independent, so parallel and serial execution agree.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Deterministic float formatting: %.9g for data files, %.17g when bit-level
// round-trip through text matters.
std::string format_g9(double v);
std::string format_g17(double v);

}  // namespace groundlab
