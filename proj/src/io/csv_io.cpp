#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "capassign/error.hpp"
#include "capassign/io.hpp"

namespace capassign::io {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no,
                                      const std::string& source) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted)
    throw InputError(source + ":" + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw InputError(where + ": '" + text + "' is not a number");
  return v;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!have_header) {
      if (trim(line).empty()) continue;
      t.header = split_record(line, line_no, source);
      for (auto& h : t.header) h = trim(h);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no, source);
    if (fields.size() != t.header.size())
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw InputError(source + ": missing header row");
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_csv(in, path.string());
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LoadedDataset load_dataset(const CsvTable& table, const DatasetSchema& schema) {
  const std::size_t cy = table.column(schema.y), ct = table.column(schema.t);
  std::vector<std::size_t> cx;
  for (const auto& c : schema.covariates) cx.push_back(table.column(c.column));
  std::optional<std::size_t> cf;
  if (schema.flag_column) cf = table.column(*schema.flag_column);
  if (!schema.tau && !schema.tau_quantile) throw InputError("dataset schema needs a censor point");

  struct Parsed {
    double y;  // NaN when blank or flagged out
    double t;
    std::vector<double> x;
  };
  std::vector<Parsed> parsed;
  std::vector<double> pool;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "row " + std::to_string(r + 1);
    Parsed p;
    bool in_pool = true;
    if (cf) {
      const double flag = parse_double(row[*cf], where + " column '" + *schema.flag_column + "'");
      if (flag != 0.0 && flag != 1.0) throw InputError(where + ": flag must be 0 or 1");
      in_pool = flag == 1.0;
    }
    p.y = std::nan("");
    if (!trim(row[cy]).empty() && in_pool) {
      p.y = parse_double(row[cy], where + " column '" + schema.y + "'");
      pool.push_back(p.y);
    }
    p.t = parse_double(row[ct], where + " column '" + schema.t + "'");
    if (schema.intercept) p.x.push_back(1.0);
    for (std::size_t k = 0; k < cx.size(); ++k) {
      const auto& spec = schema.covariates[k];
      const std::string cell = trim(row[cx[k]]);
      if (spec.levels.empty()) {
        p.x.push_back(parse_double(cell, where + " column '" + spec.column + "'"));
      } else {
        auto it = std::find_if(spec.levels.begin(), spec.levels.end(),
                               [&](const auto& lv) { return lv.first == cell; });
        if (it == spec.levels.end())
          throw InputError(where + " column '" + spec.column + "': value '" + cell +
                           "' has no level code");
        p.x.push_back(it->second);
      }
    }
    parsed.push_back(std::move(p));
  }

  LoadedDataset out;
  out.tau = schema.tau ? *schema.tau : sample_quantile(pool, *schema.tau_quantile);
  if (schema.intercept) out.covariates.push_back("const");
  for (const auto& c : schema.covariates) out.covariates.push_back(c.column);
  std::vector<tobit::Observation> rows;
  for (auto& p : parsed) {
    const double y = std::isnan(p.y) ? out.tau : std::max(p.y, out.tau);
    rows.push_back({y, std::move(p.x), p.t});
  }
  out.data = tobit::Dataset(std::move(rows), out.tau);
  return out;
}

transport::DiscreteMarginal empirical_covariates(const tobit::Dataset& data,
                                                 const std::vector<std::string>& names) {
  if (names.size() != data.dim()) throw InputError("covariate names do not match the data");
  std::map<std::vector<double>, std::size_t> counts;
  for (const auto& r : data.rows()) ++counts[r.x];
  std::vector<transport::SupportPoint> points;
  std::vector<double> masses;
  for (const auto& [x, count] : counts) {
    std::string label;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k) label += ';';
      label += names[k] + "=" + format_double(x[k]);
    }
    points.push_back({label, x});
    masses.push_back(static_cast<double>(count) / static_cast<double>(data.size()));
  }
  return transport::DiscreteMarginal(std::move(points), std::move(masses));
}

void write_allocation_csv(std::ostream& out, const std::vector<rules::RuleOutput>& outputs,
                          const transport::DiscreteMarginal& grid,
                          const transport::DiscreteMarginal& f_t) {
  out << "rule,bin,treatment,mass,conditional_probability\n";
  for (const auto& o : outputs) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = 0; j < f_t.size(); ++j)
        out << rules::to_string(o.kind) << ',' << grid.point(i).label << ','
            << f_t.point(j).label << ',' << format_double(o.coupling(i, j)) << ','
            << format_double(o.coupling.conditional(i, j)) << '\n';
  }
}

void write_risk_curve_csv(std::ostream& out, const harness::SimResult& result) {
  out << "lambda,h,rule,mean_regret,se,n_excluded\n";
  for (const auto& c : result.curves) {
    for (std::size_t i = 0; i < c.h.size(); ++i) {
      const std::string prefix = format_double(c.lambda) + ',' + format_double(c.h[i]) + ',';
      out << prefix << "plug_in," << format_double(c.plug_in_mean[i]) << ','
          << format_double(c.plug_in_se[i]) << ',' << c.excluded[i] << '\n';
      out << prefix << "ex_post_bayes," << format_double(c.ex_post_bayes_mean[i]) << ','
          << format_double(c.ex_post_bayes_se[i]) << ',' << c.excluded[i] << '\n';
    }
  }
}

void write_heatmap_csv(std::ostream& out, const harness::SimResult& result) {
  out << "lambda,age,sex,treatment_probability,rule\n";
  for (const auto& h : result.heatmaps) {
    for (std::size_t b = 0; b < result.grid.size(); ++b) {
      const auto& x = result.grid.point(b).coords;
      out << format_double(h.lambda) << ',' << format_double(x[0]) << ','
          << format_double(x[1]) << ',' << format_double(h.treatment_probability[b]) << ','
          << h.rule << '\n';
    }
  }
}

}  // namespace capassign::io
