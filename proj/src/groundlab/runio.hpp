#pragma once

#include <string>
#include <vector>

#include "groundlab/config.hpp"

namespace groundlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Creates the directory (recursively). An existing non-empty directory is
// refused unless force is set.
void prepare_output_dir(const std::string& dir, bool force);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Deterministic run manifest: no timestamps, so identical invocations write
// identical bytes. Exactly one manifest per output directory.
struct RunManifest {
  std::string command;
  Config config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void write_run_manifest(const RunManifest& m, const std::string& dir);

}  // namespace groundlab
