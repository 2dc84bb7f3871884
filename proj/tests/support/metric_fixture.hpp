#pragma once

// Ten hand-enumerated pairs for the metric harness. Expected values below
// were worked out by hand from the table.

#include <vector>

#include "covis/evalharness.hpp"

namespace covis::testing {

struct MetricFixture {
  std::vector<eval::PoseError> errors;
  std::vector<PairCriteria> criteria;
};

inline MetricFixture metric_fixture() {
  MetricFixture f;
  auto add = [&](double rot, double trans, std::optional<double> ang, PairCriteria c) {
    f.errors.push_back({rot, trans, ang});
    f.criteria.push_back(c);
  };
  add(1.0, 0.1, 2.0, {true, 0.90, 1.2, 10.0});
  add(3.0, 0.4, 4.0, {true, 0.70, 1.2, 40.0});
  add(4.0, 0.6, 1.0, {true, 0.50, 2.0, 70.0});
  add(6.0, 0.2, 3.0, {true, 0.30, 3.0, 130.0});
  add(2.0, 1.5, 8.0, {true, 0.10, 5.0, 10.0});
  add(9.0, 3.0, 12.0, {true, 0.90, 1.4, 40.0});
  add(12.0, 0.3, 5.0, {true, 0.45, 2.6, 70.0});
  add(0.5, 0.05, 0.5, {true, 0.25, 1.1, 20.0});
  add(7.0, 6.0, 25.0, {});
  add(4.5, 1.9, std::nullopt, {true, 0.85, 1.6, 100.0});
  return f;
}

// Success rates at 5deg/0.5m, 5deg/2m, 10deg/5m.
inline constexpr double kFixtureSuccess[3] = {30.0, 60.0, 80.0};
// AUC scalars 2,4,4,6,8,12,12,0.5,25 (pair 10 excluded).
inline const double kFixtureAuc[3] = {100.0 * 9.5 / 45.0, 100.0 * 35.5 / 90.0, 100.0 * 111.5 / 180.0};

struct BinExpectation {
  std::size_t count;
  std::size_t successes;
};
// Binned at 5deg/0.5m over the nine defined pairs.
inline const std::vector<BinExpectation> kFixtureOverlapBins = {{1, 0}, {2, 1}, {2, 0}, {1, 1}, {3, 1}};
inline const std::vector<BinExpectation> kFixtureScaleBins = {{4, 3}, {2, 0}, {2, 0}, {1, 0}};
inline const std::vector<BinExpectation> kFixtureAngleBins = {{3, 2}, {2, 1}, {3, 0}, {1, 0}};

}  // namespace covis::testing
