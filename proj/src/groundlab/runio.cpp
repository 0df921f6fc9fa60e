#include "groundlab/runio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace groundlab {

namespace fs = std::filesystem;

void prepare_output_dir(const std::string& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec))
      throw IoError("output path exists and is not a directory: " + dir);
    bool empty = fs::is_empty(dir, ec);
    if (!empty && !force)
      throw OverwriteRefusedError("output directory not empty (use --force): " + dir);
  } else {
    if (!fs::create_directories(dir, ec) || ec)
      throw IoError("cannot create output directory: " + dir);
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failure on " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_run_manifest(const RunManifest& m, const std::string& dir) {
  std::ostringstream out;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(m.config.canonical_hash()));
  out << "{\"command\":\"" << m.command << "\",\"artifact_version\":\""
      << kArtifactVersion << "\",\"config_hash\":\"" << hash
      << "\",\"seed\":" << m.seed << ",\"inputs\":[";
  for (size_t i = 0; i < m.inputs.size(); ++i) {
    if (i) out << ",";
    out << "\"" << m.inputs[i] << "\"";
  }
  out << "],\"outputs\":[";
  for (size_t i = 0; i < m.outputs.size(); ++i) {
    if (i) out << ",";
    out << "\"" << m.outputs[i] << "\"";
  }
  out << "],\"config\":" << m.config.to_json() << "}\n";
  write_text_file(dir + "/manifest.json", out.str());
}

}  // namespace groundlab
