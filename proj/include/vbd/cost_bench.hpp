#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vbd::cost {

struct CostRecord {
  long p = 0;  // poisoned pairs
  int n = 0;  // frames
  int r = 0;  // pixels per frame
  double l = 0.0;  // mean poisoned prompt length, characters
  double wall_time = 0.0;  // seconds, median over repeats
  bool operator==(const CostRecord&) const = default;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares of y on x. Throws std::invalid_argument on fewer
// than two points or constant x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct CostBenchResult {
  std::vector<CostRecord> records;
  LinearFit fit;  // wall_time against p * n * r
};

// Frames are square, side sqrt(r). Each cell builds a clean corpus of p
// pairs, then times build_poisoned_corpus at ratio 1 with the default STC
// backdoor. Throws std::invalid_argument on non-positive values or an r
// that is not the square of a side >= 32.
CostBenchResult cost_bench(std::span<const long> p_values, std::span<const int> n_values,
                           std::span<const int> r_values, std::uint64_t seed, int repeats = 3);

// Header "p,n,r,l,wall_time"; doubles are printed with 17 significant digits.
std::string records_csv(std::span<const CostRecord> records);
std::vector<CostRecord> records_from_csv(std::string_view csv);

}  // namespace vbd::cost
