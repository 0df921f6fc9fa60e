#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "groundlab/common.hpp"
#include "groundlab/config.hpp"

namespace groundlab {

// Generator-side ground truth carried with synthetic pairs. Absent for
// externally loaded data.
//
// content_assignment encodes, per region slot, what generated it:
//   value >= 0  -> content region of vocabulary object `value`
//   value <  0  -> style region of global style cluster `-value - 1`
struct GeneratorLatents {
  int context_id = -1;
  std::vector<std::vector<int>> content_assignment;  // [frames][regions]
  std::vector<std::array<int, 3>> gt_regions;        // (frame, object slot k, region)
  std::vector<std::vector<int>> object_frames;       // per object slot: occupied frames
};

struct VideoSegment {
  std::int64_t id = 0;
  // Row (t * regions + n) holds the raw feature of region n in frame t.
  Matrix region_features;
  std::optional<GeneratorLatents> latents;
};

struct QuerySentence {
  std::int64_t id = 0;
  std::vector<int> object_ids;  // vocabulary indices, size K
  Matrix object_features;       // K x raw_text_dim
};

// Dataset records store only positive pairs; negatives are built at
// training time from mismatched in-batch partners.
struct PairRecord {
  VideoSegment video;
  QuerySentence query;
  std::string split;
};

struct Dataset {
  std::vector<PairRecord> records;

  int size() const { return static_cast<int>(records.size()); }
};

// JSON Lines serialization, one record per line, numbers at 9 significant
// digits. Writing the same dataset twice is byte-identical.
std::string record_to_jsonl(const PairRecord& rec, const Config& cfg);
PairRecord record_from_jsonl(const std::string& line, const Config& cfg);

void save_dataset(const Dataset& ds, const Config& cfg, const std::string& path);
Dataset load_dataset(const std::string& path, const Config& cfg);

}  // namespace groundlab
