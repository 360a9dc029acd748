#pragma once

// JSON and CSV forms of the library types. Marginals are label -> mass maps
// in file order; couplings are dense row-major mass arrays with their row and
// column label vectors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "capassign/harness.hpp"
#include "capassign/rules.hpp"
#include "capassign/tobit.hpp"
#include "capassign/transport.hpp"

namespace capassign::io {

using json = nlohmann::ordered_json;

/// Throws InputError naming the first key of `object` not in `allowed`.
void check_keys(const json& object, std::initializer_list<const char*> allowed,
                const std::string& context);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);
/// Shortest text that parses back to the same double.
std::string format_double(double v);

// ---- transport ----

json to_json(const transport::DiscreteMarginal& m);
/// {"masses": {label: mass, ...}, "coords": {label: [..], ...}}. Labels that
/// parse as numbers get that number as their coordinate when "coords" omits
/// them.
transport::DiscreteMarginal marginal_from_json(const json& j);

struct LabeledCoupling {
  transport::Coupling coupling;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
};

json to_json(const transport::Coupling& c, const transport::DiscreteMarginal& rows,
             const transport::DiscreteMarginal& cols);
LabeledCoupling coupling_from_json(const json& j);

/// {"source": marginal, "target": marginal, "welfare": [[...], ...]}.
json to_json(const transport::TransportProblem& p);
transport::TransportProblem problem_from_json(const json& j);

/// "standardized" or {"distances": [[...]], "description": "..."}.
transport::GroundMetric metric_from_json(const json& j, const transport::DiscreteMarginal& rows,
                                         const transport::DiscreteMarginal& cols);
json to_json(const transport::GroundMetric& metric);

// ---- model ----

json to_json(const welfare::ParamVector& p);
welfare::ParamVector param_from_json(const json& j);

json to_json(const welfare::WelfareSpec& s);
/// Missing keys keep the values of `base`.
welfare::WelfareSpec spec_from_json(const json& j, welfare::WelfareSpec base = {});

/// A fit together with the names of its covariate columns and censor point.
struct FitRecord {
  tobit::TobitFit fit;
  std::vector<std::string> covariates;
  double tau = 0.0;
};

json to_json(const FitRecord& r);
FitRecord fit_from_json(const json& j);

json to_json(const harness::SimConfig& c);
/// Missing keys keep the values of `base`.
harness::SimConfig sim_config_from_json(const json& j, harness::SimConfig base = {});

// ---- CSV ----

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws InputError if absent.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated with a required header; double quotes escape commas.
CsvTable read_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv_file(const std::filesystem::path& path);

/// Ingestion schema for a Tobit dataset.
struct CovariateColumn {
  std::string column;
  /// Value -> code for categorical columns; empty means the column is numeric.
  std::vector<std::pair<std::string, double>> levels;
};

struct DatasetSchema {
  std::string y;
  std::string t;
  std::vector<CovariateColumn> covariates;
  /// Prepend a constant 1 covariate named "const".
  bool intercept = false;
  /// Literal censor point.
  std::optional<double> tau;
  /// Empirical quantile (linear interpolation) of y defining tau when no
  /// literal is given.
  std::optional<double> tau_quantile;
  /// Rows with this column == 1 define the quantile; rows with 0 are
  /// recorded as censored.
  std::optional<std::string> flag_column;
};

DatasetSchema schema_from_json(const json& j);
json to_json(const DatasetSchema& s);

struct LoadedDataset {
  tobit::Dataset data;
  std::vector<std::string> covariates;
  double tau = 0.0;
};

/// Applies the schema: values below tau (and blank outcomes) become tau.
LoadedDataset load_dataset(const CsvTable& table, const DatasetSchema& schema);

/// Type-7 sample quantile.
double sample_quantile(std::vector<double> values, double q);

/// Empirical covariate marginal of a dataset (distinct covariate vectors).
transport::DiscreteMarginal empirical_covariates(const tobit::Dataset& data,
                                                 const std::vector<std::string>& names);

void write_allocation_csv(std::ostream& out, const std::vector<rules::RuleOutput>& outputs,
                          const transport::DiscreteMarginal& grid,
                          const transport::DiscreteMarginal& f_t);
void write_risk_curve_csv(std::ostream& out, const harness::SimResult& result);
void write_heatmap_csv(std::ostream& out, const harness::SimResult& result);

}  // namespace capassign::io
