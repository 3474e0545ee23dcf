#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "auditkit/detect.hpp"

namespace auditkit {

/// "1.6%": one decimal place.
std::string format_percent(double fraction);
/// Three significant figures ("228", "14.2", "2.54"); "∞" for infinity.
std::string format_ratio(double ratio);
/// Counts: integers plain, otherwise one decimal.
std::string format_count(double value);

/// One author-category column of a survey table.
struct SurveyColumn {
  std::string author;
  int models = 0;
  MetricsReport metrics;
};

/// Plain-text table: per-category average test counts, the distinct-formula
/// block (t, o, i, c) and the analysis block (pct testing, c/o).
std::string render_survey_report(const std::vector<SurveyColumn>& columns);
/// Same content as JSON; numbers are raw values with display strings alongside.
std::string render_survey_json(const std::vector<SurveyColumn>& columns);

/// A column of the published five-author survey table, as printed.
struct PublishedColumn {
  std::string author;
  int models = 0;
  std::map<int, double> per_category;  // categories printed as "-" are absent
  SurveyCounts counts;
  double printed_c = 0;
  double printed_pct = 0;    // percent, as printed
  double pct_unit = 0.1;     // precision of the printed percentage
  double printed_ratio = 0;  // calculations per integrity check
  double ratio_unit = 1;     // precision of the printed ratio
};

const std::vector<PublishedColumn>& published_survey();

struct ReconciledColumn {
  PublishedColumn published;
  MetricsReport computed;
  bool c_consistent = false;
  bool pct_consistent = false;
  bool ratio_consistent = false;

  bool consistent() const { return c_consistent && pct_consistent && ratio_consistent; }
};

/// Recomputes every published column from its raw counts. A printed value is
/// consistent when it lies within one unit of its printed precision of the
/// computed value (the table truncates ratios: 228.7 is printed 228).
std::vector<ReconciledColumn> reconcile_published();
std::string render_reconciliation(const std::vector<ReconciledColumn>& rows);

/// Analyses every .wbk file in each subdirectory of `root`; a subdirectory
/// is one author category and its column averages over its models.
std::vector<SurveyColumn> survey_directory(const std::filesystem::path& root, const DetectOptions& options = {},
                                           const IterationPolicy& policy = {});

}  // namespace auditkit
