#pragma once

#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/eval/cross_validate.hpp"
#include "cluttermap/io/csv.hpp"
#include "cluttermap/stats/metrics.hpp"

namespace cluttermap::stats {

// The eleven (class, model) rows of the per-stage tables, in table order.
inline const std::vector<eval::RateKey>& stage_row_order() {
  static const std::vector<eval::RateKey> rows{
      {"tree", "stage1"},           {"building", "stage1"},
      {"other", "stage1"},          {"deciduous", "stage1"},
      {"coniferous", "stage1"},     {"residential", "stage1"},
      {"non_residential", "stage1"},{"deciduous", "tree"},
      {"coniferous", "tree"},       {"residential", "building"},
      {"non_residential", "building"}};
  return rows;
}

struct Table1Row {
  std::string class_name, model;
  std::optional<double> mean, sd;
  long long total_n = 0;
};

struct Table2Row {
  std::string class_name;
  std::optional<double> two_stage_acc, two_stage_sd;
  std::optional<double> single_acc, single_sd;
};

struct Table3Row {
  std::string class_name, model;
  std::optional<double> accuracy;
  long long n = 0;
};

struct Table4Row {
  std::string class_name;
  std::optional<double> two_stage_acc, single_acc, diff, p_value;
  std::string direction = "greater";
};

struct Report {
  std::vector<Table1Row> table1;
  std::vector<Table2Row> table2;
  std::vector<Table3Row> table3;
  std::vector<Table4Row> table4;
  std::optional<double> two_stage_micro_f1, two_stage_macro_f1;
  std::optional<double> single_micro_f1, single_macro_f1;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Building the report from cross-validation and independent-test results
// ---------------------------------------------------------------------------

namespace detail {

struct Aggregated {
  std::optional<double> mean, sd;
  long long total_n = 0;
};

inline Aggregated aggregate_rows(const std::vector<eval::FoldResult>& folds,
                                 const eval::RateKey& key) {
  std::vector<double> values, weights;
  long long total = 0;
  for (const auto& fold : folds) {
    const auto it = fold.stage_rates.find(key);
    if (it == fold.stage_rates.end()) continue;
    values.push_back(it->second.tpr);
    weights.push_back(static_cast<double>(it->second.n));
    total += it->second.n;
  }
  if (values.empty()) return {};
  const auto m = weighted_fold_mean(values, weights);
  return {m.mean, m.sd, total};
}

inline Aggregated aggregate_class(
    const std::vector<eval::FoldResult>& folds,
    const std::array<std::optional<eval::StageRate>, kNumClutterLabels>
        eval::FoldResult::* member,
    ClutterLabel label) {
  std::vector<double> values, weights;
  long long total = 0;
  for (const auto& fold : folds) {
    const auto& cell = (fold.*member)[static_cast<std::size_t>(label)];
    if (!cell) continue;
    values.push_back(cell->tpr);
    weights.push_back(static_cast<double>(cell->n));
    total += cell->n;
  }
  if (values.empty()) return {};
  const auto m = weighted_fold_mean(values, weights);
  return {m.mean, m.sd, total};
}

}  // namespace detail

inline void append_independent(Report& report,
                               const eval::IndependentTestResult& independent);

inline Report build_report(
    const eval::CvResult& cv,
    const eval::IndependentTestResult* independent = nullptr) {
  Report report;
  report.warnings = cv.warnings;

  for (const auto& key : stage_row_order()) {
    const auto agg = detail::aggregate_rows(cv.folds, key);
    report.table1.push_back({key.first, key.second, agg.mean, agg.sd, agg.total_n});
    if (!agg.mean)
      report.warnings.push_back("table1 row " + key.first + "/" + key.second +
                                " absent from every fold");
  }

  auto row1 = [&](const std::string& cls, const std::string& model)
      -> const Table1Row* {
    for (const auto& r : report.table1)
      if (r.class_name == cls && r.model == model) return &r;
    return nullptr;
  };

  for (ClutterLabel label : all_clutter_labels) {
    Table2Row row;
    row.class_name = std::string(label_name(label));
    if (label == ClutterLabel::Other) {
      // One stage only: the composed accuracy is the stage-1 rate itself.
      const auto* other = row1("other", "stage1");
      if (other && other->mean) {
        row.two_stage_acc = other->mean;
        row.two_stage_sd = other->sd;
      }
    } else {
      const std::string stage2_model =
          to_coarse(label) == CoarseLabel::Tree ? "tree" : "building";
      const auto* s1 = row1(row.class_name, "stage1");
      const auto* s2 = row1(row.class_name, stage2_model);
      if (s1 && s1->mean && s2 && s2->mean) {
        row.two_stage_acc = compose_tpr({*s1->mean, *s2->mean});
        row.two_stage_sd = goodman_product_sd(*s1->mean, *s1->sd, *s2->mean, *s2->sd);
      }
    }
    const auto single =
        detail::aggregate_class(cv.folds, &eval::FoldResult::single_acc, label);
    row.single_acc = single.mean;
    row.single_sd = single.sd;
    report.table2.push_back(std::move(row));
  }

  if (independent) append_independent(report, *independent);
  return report;
}

inline void append_independent(Report& report,
                               const eval::IndependentTestResult& independent) {
  for (const auto& key : stage_row_order()) {
    Table3Row row{key.first, key.second, std::nullopt, 0};
    const auto it = independent.stage_rates.find(key);
    if (it != independent.stage_rates.end()) {
      row.accuracy = it->second.tpr;
      row.n = it->second.n;
    } else {
      report.warnings.push_back("table3 row " + key.first + "/" + key.second +
                                " absent from the independent test");
    }
    report.table3.push_back(std::move(row));
  }
  for (ClutterLabel label : all_clutter_labels) {
    const auto i = static_cast<std::size_t>(label);
    Table4Row row;
    row.class_name = std::string(label_name(label));
    if (independent.two_stage_acc[i]) row.two_stage_acc = independent.two_stage_acc[i]->tpr;
    if (independent.single_acc[i]) row.single_acc = independent.single_acc[i]->tpr;
    if (row.two_stage_acc && row.single_acc)
      row.diff = *row.two_stage_acc - *row.single_acc;
    if (independent.mcnemar[i]) {
      row.p_value = independent.mcnemar[i]->p_value;
      row.direction = independent.mcnemar[i]->direction == Direction::Greater
                          ? "greater"
                          : "less";
    }
    report.table4.push_back(std::move(row));
  }
  report.two_stage_micro_f1 = independent.two_stage_f1.micro;
  report.two_stage_macro_f1 = independent.two_stage_f1.macro;
  report.single_micro_f1 = independent.single_stage_f1.micro;
  report.single_macro_f1 = independent.single_stage_f1.macro;
}

// Independent-test-only report (tables III and IV).
inline Report build_independent_report(
    const eval::IndependentTestResult& independent) {
  Report report;
  append_independent(report, independent);
  return report;
}

// ---------------------------------------------------------------------------
// Rendering: CSV files, one JSON document, aligned text
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell(const std::optional<double>& v, int precision = 4) {
  if (!v) return "absent";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

inline std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json report_to_json(const Report& report) {
  nlohmann::json j;
  for (const auto& r : report.table1)
    j["table1"].push_back({{"class", r.class_name},
                           {"model", r.model},
                           {"mean_accuracy", detail::opt_json(r.mean)},
                           {"standard_deviation", detail::opt_json(r.sd)},
                           {"n", r.total_n}});
  for (const auto& r : report.table2)
    j["table2"].push_back({{"class", r.class_name},
                           {"two_stage_accuracy", detail::opt_json(r.two_stage_acc)},
                           {"two_stage_sd", detail::opt_json(r.two_stage_sd)},
                           {"single_stage_accuracy", detail::opt_json(r.single_acc)},
                           {"single_stage_sd", detail::opt_json(r.single_sd)}});
  for (const auto& r : report.table3)
    j["table3"].push_back({{"class", r.class_name},
                           {"model", r.model},
                           {"accuracy", detail::opt_json(r.accuracy)},
                           {"n", r.n}});
  for (const auto& r : report.table4)
    j["table4"].push_back({{"class", r.class_name},
                           {"two_stage_accuracy", detail::opt_json(r.two_stage_acc)},
                           {"single_stage_accuracy", detail::opt_json(r.single_acc)},
                           {"diff", detail::opt_json(r.diff)},
                           {"p_value", detail::opt_json(r.p_value)},
                           {"direction", r.direction}});
  j["f1"] = {{"two_stage_micro", detail::opt_json(report.two_stage_micro_f1)},
             {"two_stage_macro", detail::opt_json(report.two_stage_macro_f1)},
             {"single_stage_micro", detail::opt_json(report.single_micro_f1)},
             {"single_stage_macro", detail::opt_json(report.single_macro_f1)}};
  j["warnings"] = report.warnings;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report report;
  for (const auto& r : j.value("table1", nlohmann::json::array()))
    report.table1.push_back({r.at("class").get<std::string>(),
                             r.at("model").get<std::string>(),
                             detail::opt_from_json(r.at("mean_accuracy")),
                             detail::opt_from_json(r.at("standard_deviation")),
                             r.at("n").get<long long>()});
  for (const auto& r : j.value("table2", nlohmann::json::array()))
    report.table2.push_back({r.at("class").get<std::string>(),
                             detail::opt_from_json(r.at("two_stage_accuracy")),
                             detail::opt_from_json(r.at("two_stage_sd")),
                             detail::opt_from_json(r.at("single_stage_accuracy")),
                             detail::opt_from_json(r.at("single_stage_sd"))});
  for (const auto& r : j.value("table3", nlohmann::json::array()))
    report.table3.push_back({r.at("class").get<std::string>(),
                             r.at("model").get<std::string>(),
                             detail::opt_from_json(r.at("accuracy")),
                             r.at("n").get<long long>()});
  for (const auto& r : j.value("table4", nlohmann::json::array()))
    report.table4.push_back({r.at("class").get<std::string>(),
                             detail::opt_from_json(r.at("two_stage_accuracy")),
                             detail::opt_from_json(r.at("single_stage_accuracy")),
                             detail::opt_from_json(r.at("diff")),
                             detail::opt_from_json(r.at("p_value")),
                             r.at("direction").get<std::string>()});
  if (j.contains("f1")) {
    report.two_stage_micro_f1 = detail::opt_from_json(j["f1"].at("two_stage_micro"));
    report.two_stage_macro_f1 = detail::opt_from_json(j["f1"].at("two_stage_macro"));
    report.single_micro_f1 = detail::opt_from_json(j["f1"].at("single_stage_micro"));
    report.single_macro_f1 = detail::opt_from_json(j["f1"].at("single_stage_macro"));
  }
  for (const auto& w : j.value("warnings", nlohmann::json::array()))
    report.warnings.push_back(w.get<std::string>());
  return report;
}

// Writes table1..4.csv and report.json into out_dir.
inline void write_report_files(const Report& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.table1)
    rows.push_back({r.class_name, r.model, detail::cell(r.mean),
                    detail::cell(r.sd, 5), std::to_string(r.total_n)});
  io::write_csv(path("table1.csv"),
                {"class", "model", "mean_accuracy", "standard_deviation", "n"},
                rows);

  rows.clear();
  for (const auto& r : report.table2)
    rows.push_back({r.class_name, detail::cell(r.two_stage_acc),
                    detail::cell(r.two_stage_sd, 5), detail::cell(r.single_acc),
                    detail::cell(r.single_sd, 5)});
  io::write_csv(path("table2.csv"),
                {"class", "two_stage_accuracy", "two_stage_sd",
                 "single_stage_accuracy", "single_stage_sd"},
                rows);

  rows.clear();
  for (const auto& r : report.table3)
    rows.push_back({r.class_name, r.model, detail::cell(r.accuracy),
                    std::to_string(r.n)});
  io::write_csv(path("table3.csv"), {"class", "model", "accuracy", "n"}, rows);

  rows.clear();
  for (const auto& r : report.table4) {
    std::string p = "absent";
    if (r.p_value) {
      std::ostringstream os;
      os << std::scientific << std::setprecision(3) << *r.p_value;
      p = os.str();
    }
    rows.push_back({r.class_name, detail::cell(r.two_stage_acc),
                    detail::cell(r.single_acc), detail::cell(r.diff), p,
                    r.direction});
  }
  io::write_csv(path("table4.csv"),
                {"class", "two_stage_accuracy", "single_stage_accuracy", "diff",
                 "p_value", "direction"},
                rows);

  const std::string tmp = path("report.json") + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(out.good(), "cannot write ", tmp);
    out << report_to_json(report).dump(2) << "\n";
  }
  fs::rename(tmp, path("report.json"));
}

inline std::string render_report_text(const Report& report) {
  std::ostringstream os;
  auto line = [&](int n) { while (n--) os << '-'; os << '\n'; };
  os << "Table I: per-stage rates (cross-validation, fold-weighted)\n";
  line(64);
  os << std::left << std::setw(18) << "class" << std::setw(10) << "model"
     << std::setw(12) << "mean" << std::setw(12) << "sd" << "n\n";
  for (const auto& r : report.table1)
    os << std::left << std::setw(18) << r.class_name << std::setw(10) << r.model
       << std::setw(12) << detail::cell(r.mean) << std::setw(12)
       << detail::cell(r.sd, 5) << r.total_n << "\n";
  os << "\nTable II: two-stage (composed) vs single-stage (cross-validation)\n";
  line(64);
  os << std::left << std::setw(18) << "class" << std::setw(12) << "two-stage"
     << std::setw(12) << "sd" << std::setw(12) << "single" << "sd\n";
  for (const auto& r : report.table2)
    os << std::left << std::setw(18) << r.class_name << std::setw(12)
       << detail::cell(r.two_stage_acc) << std::setw(12)
       << detail::cell(r.two_stage_sd, 5) << std::setw(12)
       << detail::cell(r.single_acc) << detail::cell(r.single_sd, 5) << "\n";
  if (!report.table3.empty()) {
    os << "\nTable III: independent test, per stage (ensemble)\n";
    line(64);
    os << std::left << std::setw(18) << "class" << std::setw(10) << "model"
       << std::setw(12) << "accuracy" << "n\n";
    for (const auto& r : report.table3)
      os << std::left << std::setw(18) << r.class_name << std::setw(10)
         << r.model << std::setw(12) << detail::cell(r.accuracy) << r.n << "\n";
  }
  if (!report.table4.empty()) {
    os << "\nTable IV: independent test, combined\n";
    line(72);
    os << std::left << std::setw(18) << "class" << std::setw(12) << "two-stage"
       << std::setw(12) << "single" << std::setw(12) << "diff"
       << std::setw(14) << "p-value" << "alternative\n";
    for (const auto& r : report.table4) {
      std::string p = "absent";
      if (r.p_value) {
        std::ostringstream ps;
        ps << std::scientific << std::setprecision(2) << *r.p_value;
        p = ps.str();
      }
      os << std::left << std::setw(18) << r.class_name << std::setw(12)
         << detail::cell(r.two_stage_acc) << std::setw(12)
         << detail::cell(r.single_acc) << std::setw(12) << detail::cell(r.diff)
         << std::setw(14) << p << r.direction << "\n";
    }
  }
  if (report.two_stage_micro_f1) {
    os << "\nF1 (independent test): two-stage micro "
       << detail::cell(report.two_stage_micro_f1) << ", macro "
       << detail::cell(report.two_stage_macro_f1) << "; single-stage micro "
       << detail::cell(report.single_micro_f1) << ", macro "
       << detail::cell(report.single_macro_f1) << "\n";
  }
  for (const auto& w : report.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace cluttermap::stats
