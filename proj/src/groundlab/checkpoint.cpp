#include "groundlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace groundlab {
namespace {

constexpr char kMagic[8] = {'G', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};

using nlohmann::json;

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return &m;
  return nullptr;
}

void Checkpoint::add(const std::string& name, Matrix value) {
  arrays.emplace_back(name, std::move(value));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream header;
  header << "{\"version\":" << ckpt.version << ",\"stage\":" << ckpt.stage
         << ",\"step\":" << ckpt.step << ",\"variant\":\"" << ckpt.variant
         << "\",\"config\":" << ckpt.config.to_json() << ",\"arrays\":[";
  std::uint64_t offset = 0;
  for (size_t i = 0; i < ckpt.arrays.size(); ++i) {
    const auto& [name, m] = ckpt.arrays[i];
    if (i) header << ",";
    header << "{\"name\":\"" << name << "\",\"rows\":" << m.rows()
           << ",\"cols\":" << m.cols() << ",\"offset\":" << offset << "}";
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  header << "]}";
  const std::string head = header.str();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, m] : ckpt.arrays) {
    // row-major stream of the column-major matrix
    std::vector<double> buf(static_cast<size_t>(m.size()));
    size_t at = 0;
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) buf[at++] = m(r, c);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw SchemaError("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1ull << 31))
    throw SchemaError("checkpoint: bad header length");
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("checkpoint: truncated header");

  json j;
  try {
    j = json::parse(head);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.version = j.at("version").get<int>();
  ckpt.stage = j.at("stage").get<int>();
  ckpt.step = j.at("step").get<std::int64_t>();
  ckpt.variant = j.at("variant").get<std::string>();
  ckpt.config = Config::from_json(j.at("config").dump());

  for (const auto& aj : j.at("arrays")) {
    const int rows = aj.at("rows").get<int>();
    const int cols = aj.at("cols").get<int>();
    Matrix m(rows, cols);
    std::vector<double> buf(static_cast<size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw SchemaError("checkpoint: truncated array data");
    size_t at = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = buf[at++];
    ckpt.add(aj.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

}  // namespace groundlab
