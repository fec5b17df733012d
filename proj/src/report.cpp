#include "vbd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "vbd/io.hpp"

namespace vbd::report {

namespace {

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, std::span<const double> x,
                          std::span<const Series> series) {
  constexpr double W = 480, H = 320, L = 56, R = 130, T = 36, B = 48;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!x.empty()) {
    x0 = *std::min_element(x.begin(), x.end());
    x1 = *std::max_element(x.begin(), x.end());
  }
  if (x1 == x0) x1 = x0 + 1;
  bool unit = true;
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      if (v < 0 || v > 1) unit = false;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (!unit && any) {
    y0 = std::min(0.0, lo);
    y1 = hi > y0 ? hi : y0 + 1;
  }
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" viewBox=\"0 0 480 320\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(W / 2, "%.0f") + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
       xml_escape(title) + "</text>\n";
  s += "<line x1=\"" + fmt(L, "%.0f") + "\" y1=\"" + fmt(H - B, "%.0f") + "\" x2=\"" + fmt(W - R, "%.0f") +
       "\" y2=\"" + fmt(H - B, "%.0f") + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(L, "%.0f") + "\" y1=\"" + fmt(T, "%.0f") + "\" x2=\"" + fmt(L, "%.0f") + "\" y2=\"" +
       fmt(H - B, "%.0f") + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    s += "<text x=\"" + fmt(px(xv), "%.1f") + "\" y=\"" + fmt(H - B + 16, "%.0f") +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(xv, "%.3g") + "</text>\n";
    s += "<text x=\"" + fmt(L - 6, "%.0f") + "\" y=\"" + fmt(py(yv) + 3, "%.1f") +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(yv, "%.3g") + "</text>\n";
  }
  s += "<text x=\"" + fmt((L + W - R) / 2, "%.0f") + "\" y=\"" + fmt(H - 10, "%.0f") +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(x_label) + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    const std::size_t n = std::min(x.size(), series[k].y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(series[k].y[i])) continue;
      pts += fmt(px(x[i]), "%.1f") + "," + fmt(py(series[k].y[i]), "%.1f") + " ";
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(k);
    s += "<line x1=\"" + fmt(W - R + 10, "%.0f") + "\" y1=\"" + fmt(ly, "%.0f") + "\" x2=\"" + fmt(W - R + 28, "%.0f") +
         "\" y2=\"" + fmt(ly, "%.0f") + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(W - R + 32, "%.0f") + "\" y=\"" + fmt(ly + 4, "%.0f") +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(series[k].name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string slug(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (keep) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "curve" : out;
}

std::vector<std::filesystem::path> emit_report(std::span<const eval::MetricsReport> records,
                                               std::span<const defense::DefenseCurve> curves,
                                               const std::optional<cost::CostBenchResult>& cost,
                                               const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  for (const auto& c : curves) c.validate();
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& body) {
    io::atomic_write(out_dir / name, body);
    written.push_back(out_dir / name);
  };

  std::string md = "# Backdoor lab report\n\n## Metrics\n\n";
  md += "| label | target | ASR | CPR | ASR clean | CPR clean | CLIPSIM | CLIPSIM-cp | FVD-proxy | n trig | n clean |\n";
  md += "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : records) {
    md += "| " + r.label + " | " + r.target_id + " | " + fmt(r.asr) + " | " + fmt(r.cpr) + " | " + fmt(r.asr_clean) +
          " | " + fmt(r.cpr_clean) + " | " + fmt(r.clipsim) + " | " + fmt(r.clipsim_cp) + " | " +
          fmt(r.fvd_proxy, "%.4g") + " | " + std::to_string(r.n_triggered) + " | " + std::to_string(r.n_clean) +
          " |\n";
  }
  if (!records.empty()) {
    std::string csv = eval::metrics_csv_header() + "\n";
    for (const auto& r : records) csv += eval::metrics_to_csv_row(r) + "\n";
    put("metrics.csv", csv);
  }

  std::map<std::string, int> used;
  for (const auto& c : curves) {
    std::string name = slug(c.label);
    if (int k = used[name]++; k > 0) name += "_" + std::to_string(k + 1);
    put("curve_" + name + ".csv", defense::curve_csv(c));
    std::vector<Series> series;
    if (!c.asr.empty()) series.push_back({"ASR", c.asr});
    if (!c.cpr.empty()) series.push_back({"CPR", c.cpr});
    if (!c.detection_rate.empty()) series.push_back({"detection", c.detection_rate});
    put("plot_" + name + ".svg", svg_line_plot(c.label, "x", c.x, series));

    md += "\n## " + c.label + "\n\n![" + c.label + "](plot_" + name + ".svg)\n\n| x |";
    for (const auto& s : series) md += " " + s.name + " |";
    md += "\n|---|";
    for (std::size_t k = 0; k < series.size(); ++k) md += "---|";
    md += "\n";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      md += "| " + fmt(c.x[i], "%g") + " |";
      for (const auto& s : series) md += " " + fmt(s.y[i]) + " |";
      md += "\n";
    }
  }

  if (cost) {
    put("cost.csv", cost::records_csv(cost->records));
    std::vector<double> x, y, fit;
    auto recs = cost->records;
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
      return static_cast<double>(a.p) * a.n * a.r < static_cast<double>(b.p) * b.n * b.r;
    });
    for (const auto& r : recs) {
      x.push_back(static_cast<double>(r.p) * r.n * r.r);
      y.push_back(r.wall_time);
      fit.push_back(cost->fit.intercept + cost->fit.slope * x.back());
    }
    const std::vector<Series> series{{"wall time (s)", y}, {"linear fit", fit}};
    put("plot_cost.svg", svg_line_plot("Poisoned corpus build time", "p * n * r", x, series));
    md += "\n## Construction cost\n\n![cost](plot_cost.svg)\n\n";
    md += "slope " + fmt(cost->fit.slope, "%.4g") + " s per unit, intercept " + fmt(cost->fit.intercept, "%.4g") +
          " s, R^2 " + fmt(cost->fit.r2, "%.4f") + "\n\n| p | n | r | l | wall time (s) |\n|---|---|---|---|---|\n";
    for (const auto& r : cost->records) {
      md += "| " + std::to_string(r.p) + " | " + std::to_string(r.n) + " | " + std::to_string(r.r) + " | " +
            fmt(r.l, "%.1f") + " | " + fmt(r.wall_time, "%.4g") + " |\n";
    }
  }
  put("summary.md", md);
  return written;
}

}  // namespace vbd::report
