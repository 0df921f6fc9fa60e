#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

// Formula coverage registry. The library implements a fixed set of defining
// formulas (F01..F15); every test that exercises one tags itself with the
// TRACED_TEST_CASE macro, and the gate test checks that each formula has at
// least one covering test. Registration happens at static-init time, so the
// gate sees every tag regardless of run order.

namespace groundlab_test {

struct FormulaInfo {
  const char* id;
  const char* summary;
};

const std::vector<FormulaInfo>& formula_registry();

std::map<std::string, std::set<std::string>>& coverage_map();

struct CoverageTag {
  // ids_csv: comma-separated formula ids, e.g. "F06,F08"
  CoverageTag(const char* ids_csv, const char* test_name);
};

}  // namespace groundlab_test

#define GROUNDLAB_CONCAT_INNER(a, b) a##b
#define GROUNDLAB_CONCAT(a, b) GROUNDLAB_CONCAT_INNER(a, b)

// Registers formula coverage and opens the doctest case with the same name,
// so a tagged test name always names a real test.
#define TRACED_TEST_CASE(ids_csv, name)                              \
  static const ::groundlab_test::CoverageTag GROUNDLAB_CONCAT(       \
      groundlab_coverage_tag_, __COUNTER__)(ids_csv, name);          \
  TEST_CASE(name)
