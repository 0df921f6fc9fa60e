#include "groundlab/data.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace groundlab {
namespace {

using nlohmann::json;

void append_matrix_rows(std::ostringstream& out, const Matrix& m, int row0,
                        int nrows) {
  out << "[";
  for (int r = 0; r < nrows; ++r) {
    if (r) out << ",";
    out << "[";
    for (int c = 0; c < m.cols(); ++c) {
      if (c) out << ",";
      out << format_g9(m(row0 + r, c));
    }
    out << "]";
  }
  out << "]";
}

Matrix matrix_from_json(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw SchemaError(std::string("dataset: bad shape for ") + what);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw SchemaError(std::string("dataset: bad row width for ") + what);
    for (int c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

}  // namespace

std::string record_to_jsonl(const PairRecord& rec, const Config& cfg) {
  const int T = cfg.frames, N = cfg.regions;
  std::ostringstream out;
  out << "{\"id\":" << rec.video.id << ",\"split\":\"" << rec.split << "\"";
  if (rec.video.latents) {
    out << ",\"context_id\":" << rec.video.latents->context_id;
  }
  out << ",\"region_features\":[";
  for (int t = 0; t < T; ++t) {
    if (t) out << ",";
    append_matrix_rows(out, rec.video.region_features, t * N, N);
  }
  out << "],\"object_ids\":[";
  for (size_t k = 0; k < rec.query.object_ids.size(); ++k) {
    if (k) out << ",";
    out << rec.query.object_ids[k];
  }
  out << "],\"object_features\":";
  std::ostringstream feat;
  append_matrix_rows(feat, rec.query.object_features, 0,
                     static_cast<int>(rec.query.object_features.rows()));
  out << feat.str();
  if (rec.video.latents) {
    const auto& lat = *rec.video.latents;
    out << ",\"gt_regions\":[";
    for (size_t i = 0; i < lat.gt_regions.size(); ++i) {
      if (i) out << ",";
      out << "[" << lat.gt_regions[i][0] << "," << lat.gt_regions[i][1] << ","
          << lat.gt_regions[i][2] << "]";
    }
    out << "],\"content_assignment\":[";
    for (int t = 0; t < T; ++t) {
      if (t) out << ",";
      out << "[";
      for (int n = 0; n < N; ++n) {
        if (n) out << ",";
        out << lat.content_assignment[t][n];
      }
      out << "]";
    }
    out << "],\"object_frames\":[";
    for (size_t k = 0; k < lat.object_frames.size(); ++k) {
      if (k) out << ",";
      out << "[";
      for (size_t i = 0; i < lat.object_frames[k].size(); ++i) {
        if (i) out << ",";
        out << lat.object_frames[k][i];
      }
      out << "]";
    }
    out << "]";
  }
  out << "}";
  return out.str();
}

PairRecord record_from_jsonl(const std::string& line, const Config& cfg) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("dataset: malformed record: ") + e.what());
  }
  const int T = cfg.frames, N = cfg.regions;

  PairRecord rec;
  rec.video.id = j.at("id").get<std::int64_t>();
  rec.query.id = rec.video.id;
  rec.split = j.value("split", std::string("unknown"));

  const json& rf = j.at("region_features");
  if (static_cast<int>(rf.size()) != T)
    throw SchemaError("dataset: region_features frame count mismatch");
  rec.video.region_features.resize(T * N, cfg.raw_region_dim);
  for (int t = 0; t < T; ++t) {
    Matrix frame = matrix_from_json(rf[t], N, cfg.raw_region_dim, "region_features");
    rec.video.region_features.middleRows(t * N, N) = frame;
  }

  rec.query.object_ids = j.at("object_ids").get<std::vector<int>>();
  const int K = static_cast<int>(rec.query.object_ids.size());
  if (K < 1 || K > cfg.max_objects)
    throw SchemaError("dataset: object count outside [1, max_objects]");
  for (int id : rec.query.object_ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw SchemaError("dataset: object id outside vocabulary");
  rec.query.object_features =
      matrix_from_json(j.at("object_features"), K, cfg.raw_text_dim, "object_features");

  if (j.contains("content_assignment")) {
    GeneratorLatents lat;
    lat.context_id = j.value("context_id", -1);
    const json& ca = j.at("content_assignment");
    lat.content_assignment.assign(T, std::vector<int>(N, -1));
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < N; ++n)
        lat.content_assignment[t][n] = ca.at(t).at(n).get<int>();
    for (const auto& g : j.at("gt_regions"))
      lat.gt_regions.push_back({g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<int>()});
    for (const auto& fr : j.at("object_frames"))
      lat.object_frames.push_back(fr.get<std::vector<int>>());
    if (static_cast<int>(lat.object_frames.size()) != K)
      throw SchemaError("dataset: object_frames size mismatch");
    rec.video.latents = std::move(lat);
  }
  return rec;
}

void save_dataset(const Dataset& ds, const Config& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("dataset: cannot write " + path);
  for (const auto& rec : ds.records) out << record_to_jsonl(rec, cfg) << "\n";
  if (!out) throw IoError("dataset: write failure on " + path);
}

Dataset load_dataset(const std::string& path, const Config& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dataset: cannot open " + path);
  Dataset ds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.records.push_back(record_from_jsonl(line, cfg));
  }
  return ds;
}

}  // namespace groundlab
