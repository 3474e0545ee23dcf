#include "auditkit/survey.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "auditkit/error.hpp"

namespace auditkit {

namespace {

std::string printf_string(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  // Width in code points so "∞" lines up.
  std::size_t len = 0;
  for (unsigned char c : s) len += (c & 0xC0) != 0x80;
  if (len >= width) return s;
  std::string fill(width - len, ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

std::string format_percent(double fraction) { return printf_string("%.1f%%", fraction * 100.0); }

std::string format_ratio(double ratio) {
  if (std::isinf(ratio)) return ratio > 0 ? "∞" : "-∞";
  if (std::isnan(ratio)) return "n/a";
  if (ratio == 0) return "0";
  int magnitude = static_cast<int>(std::floor(std::log10(std::fabs(ratio))));
  int decimals = std::max(0, 2 - magnitude);
  return printf_string(("%." + std::to_string(decimals) + "f").c_str(), ratio);
}

std::string format_count(double value) {
  if (value == std::floor(value) && std::fabs(value) < 1e15) return printf_string("%.0f", value);
  return printf_string("%.1f", value);
}

std::string render_survey_report(const std::vector<SurveyColumn>& columns) {
  constexpr std::size_t kLabel = 34;
  constexpr std::size_t kCol = 14;
  std::ostringstream out;
  auto row = [&](const std::string& label, auto cell) {
    out << pad(label, kLabel, true);
    for (const auto& c : columns) out << pad(cell(c), kCol);
    out << "\n";
  };
  row("Model author", [](const SurveyColumn& c) { return c.author; });
  row("Models examined", [](const SurveyColumn& c) { return std::to_string(c.models); });
  out << "Average tests per model\n";
  for (int cat = 1; cat <= 15; ++cat) {
    row("  " + std::to_string(cat) + " " + std::string(category_name(cat)), [cat](const SurveyColumn& c) {
      auto it = c.metrics.per_category.find(cat);
      return it == c.metrics.per_category.end() ? std::string("-") : format_count(it->second);
    });
  }
  out << "Distinct formulae\n";
  row("  total (t)", [](const SurveyColumn& c) { return format_count(c.metrics.counts.t); });
  row("  integrity checks (o)", [](const SurveyColumn& c) { return format_count(c.metrics.counts.o); });
  row("  optimisation checks (i)", [](const SurveyColumn& c) { return format_count(c.metrics.counts.i); });
  row("  calculations (c)=(t)-(o)-(i)", [](const SurveyColumn& c) { return format_count(c.metrics.c); });
  out << "Analysis\n";
  row("  % testing ((o)+(i))/(t)", [](const SurveyColumn& c) { return format_percent(c.metrics.pct_testing); });
  row("  calcs per integrity check (c)/(o)",
      [](const SurveyColumn& c) { return format_ratio(c.metrics.calcs_per_integrity); });
  return out.str();
}

namespace {

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string render_survey_json(const std::vector<SurveyColumn>& columns) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [cat, n] : c.metrics.per_category) per[std::to_string(cat)] = n;
    const MetricsReport& m = c.metrics;
    arr.push_back({{"author", c.author},
                   {"models", c.models},
                   {"per_category", per},
                   {"t", m.counts.t},
                   {"o", m.counts.o},
                   {"i", m.counts.i},
                   {"c", m.c},
                   {"pct_testing", m.pct_testing},
                   {"pct_testing_display", format_percent(m.pct_testing)},
                   {"calcs_per_integrity", number_or_null(m.calcs_per_integrity)},
                   {"calcs_per_integrity_display", format_ratio(m.calcs_per_integrity)}});
  }
  return nlohmann::json{{"columns", arr}}.dump(2) + "\n";
}

const std::vector<PublishedColumn>& published_survey() {
  static const std::vector<PublishedColumn> kColumns = {
      {"Operis", 1,
       {{1, 2}, {2, 71}, {3, 206}, {4, 2}, {5, 385}, {6, 28}, {7, 4}, {10, 11}, {11, 0}, {12, 5}, {13, 5},
        {14, 44}, {15, 8}},
       {7855, 2181, 132}, 5542, 16, 1, 2.5, 0.1},
      {"Big 4", 2,
       {{1, 1}, {4, 3}, {5, 0.5}, {11, 0.5}, {12, 1.5}, {13, 0.5}, {14, 24}, {15, 1.5}},
       {5930, 25.5, 72}, 5832.5, 1.6, 0.1, 228, 1},
      {"Smaller Firm", 2,
       {{1, 2}, {2, 13}, {3, 0.5}, {4, 3.5}, {5, 28}, {6, 5}, {7, 2}, {12, 5}, {13, 4.5}, {14, 13}, {15, 3.5}},
       {3098.5, 201, 39}, 2858.5, 7.7, 0.1, 14, 1},
      {"Bank", 3,
       {{1, 1}, {4, 1}, {5, 2.7}, {7, 0.7}, {11, 1.0}, {13, 1.0}, {14, 20.3}},
       {7709, 33, 91.5}, 7584.5, 1.6, 0.1, 229, 1},
      {"Promoter", 3,
       {{1, 1}, {3, 0.3}, {4, 0.3}, {5, 2.3}, {6, 0.7}, {7, 0.3}, {12, 0.3}, {13, 1}, {14, 19.3}, {15, 1.7}},
       {6378.5, 36, 87}, 6255.5, 1.9, 0.1, 173, 1},
  };
  return kColumns;
}

std::vector<ReconciledColumn> reconcile_published() {
  std::vector<ReconciledColumn> out;
  for (const auto& p : published_survey()) {
    ReconciledColumn r;
    r.published = p;
    r.computed = compute_metrics(p.counts, p.per_category);
    r.c_consistent = std::fabs(r.computed.c - p.printed_c) < 1e-9;
    r.pct_consistent = std::fabs(r.computed.pct_testing * 100.0 - p.printed_pct) < p.pct_unit;
    r.ratio_consistent = std::fabs(r.computed.calcs_per_integrity - p.printed_ratio) < p.ratio_unit;
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_reconciliation(const std::vector<ReconciledColumn>& rows) {
  std::ostringstream out;
  out << pad("author", 14, true) << pad("c", 10) << pad("pct", 9) << pad("printed", 9) << pad("c/o", 9)
      << pad("printed", 9) << "  status\n";
  for (const auto& r : rows) {
    out << pad(r.published.author, 14, true) << pad(format_count(r.computed.c), 10)
        << pad(format_percent(r.computed.pct_testing), 9) << pad(format_count(r.published.printed_pct) + "%", 9)
        << pad(format_ratio(r.computed.calcs_per_integrity), 9) << pad(format_count(r.published.printed_ratio), 9)
        << "  ";
    if (r.consistent()) {
      out << "consistent";
    } else {
      std::vector<std::string> bad;
      if (!r.c_consistent) bad.push_back("c");
      if (!r.pct_consistent) bad.push_back("% testing");
      if (!r.ratio_consistent) bad.push_back("c/o");
      out << "INCONSISTENT:";
      for (const auto& b : bad) out << " " << b;
    }
    out << "\n";
  }
  return out.str();
}

std::vector<SurveyColumn> survey_directory(const std::filesystem::path& root, const DetectOptions& options,
                                           const IterationPolicy& policy) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<SurveyColumn> out;
  for (const auto& dir : dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wbk") files.push_back(e.path());
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    SurveyCounts total;
    std::map<int, double> per_category;
    for (const auto& f : files) {
      AnalysisReport rep = analyze_workbook(load_workbook(f), options, policy);
      total.t += rep.metrics.counts.t;
      total.o += rep.metrics.counts.o;
      total.i += rep.metrics.counts.i;
      for (const auto& [cat, n] : rep.metrics.per_category) per_category[cat] += n;
    }
    const double k = static_cast<double>(files.size());
    SurveyCounts avg{total.t / k, total.o / k, total.i / k};
    for (auto& [cat, n] : per_category) n /= k;
    out.push_back({dir.filename().string(), static_cast<int>(files.size()), compute_metrics(avg, per_category)});
  }
  return out;
}

}  // namespace auditkit
