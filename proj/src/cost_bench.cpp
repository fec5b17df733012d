#include "vbd/cost_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "vbd/poison_campaign.hpp"
#include "vbd/rng.hpp"
#include "vbd/synth_corpus.hpp"

namespace vbd::cost {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: x is constant");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    sse += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return f;
}

namespace {

int square_side(int r) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(r))));
  if (side * side != r || side < 32) throw std::invalid_argument("cost_bench: r must be the square of a side >= 32");
  return side;
}

}  // namespace

CostBenchResult cost_bench(std::span<const long> p_values, std::span<const int> n_values,
                           std::span<const int> r_values, std::uint64_t seed, int repeats) {
  if (repeats < 1) throw std::invalid_argument("cost_bench: repeats must be >= 1");
  for (long p : p_values) {
    if (p < 1) throw std::invalid_argument("cost_bench: p must be positive");
  }
  for (int n : n_values) {
    if (n < 1) throw std::invalid_argument("cost_bench: n must be positive");
  }
  for (int r : r_values) square_side(r);
  const auto vocab = text::Vocabulary::standard();
  const std::vector<campaign::Backdoor> backdoors{
      {text::default_trigger(vocab), forge::TargetSpec::stc(forge::Glyph::X, forge::Glyph::Plus)}};

  CostBenchResult out;
  std::uint64_t cell = 0;
  for (int r : r_values) {
    const int side = square_side(r);
    for (int n : n_values) {
      const VideoShape shape{n, side, side, 3};
      for (long p : p_values) {
        const auto clean = corpus::generate_corpus(p, derive_seed(seed, cell), shape);
        std::vector<double> times;
        double len = 0;
        for (int k = 0; k < repeats; ++k) {
          const auto t0 = std::chrono::steady_clock::now();
          const auto poisoned = campaign::build_poisoned_corpus(clean, backdoors, 1.0, derive_seed(seed, cell));
          const auto t1 = std::chrono::steady_clock::now();
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
          if (k == 0) {
            for (const auto& pair : poisoned.corpus.pairs) len += static_cast<double>(pair.caption.size());
            len /= static_cast<double>(poisoned.corpus.pairs.size());
          }
        }
        std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
        out.records.push_back({p, n, r, len, times[times.size() / 2]});
        ++cell;
      }
    }
  }
  if (out.records.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& rec : out.records) {
      x.push_back(static_cast<double>(rec.p) * rec.n * rec.r);
      y.push_back(rec.wall_time);
    }
    out.fit = fit_line(x, y);
  }
  return out;
}

std::string records_csv(std::span<const CostRecord> records) {
  std::string s = "p,n,r,l,wall_time\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%d,%d,%.17g,%.17g\n", r.p, r.n, r.r, r.l, r.wall_time);
    s += buf;
  }
  return s;
}

std::vector<CostRecord> records_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "p,n,r,l,wall_time") {
    throw std::invalid_argument("cost records: missing or unexpected header");
  }
  std::vector<CostRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CostRecord r;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%ld,%d,%d,%lf,%lf%c", &r.p, &r.n, &r.r, &r.l, &r.wall_time, &tail) != 5) {
      throw std::invalid_argument("cost records: malformed row '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace vbd::cost
