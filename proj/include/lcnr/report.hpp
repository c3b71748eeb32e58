#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcnr/csv.hpp"
#include "lcnr/errors.hpp"
#include "lcnr/train.hpp"

namespace lcnr::report {

// |predicted - real| / 1000 * 100, the percent discrepancy along the beam
inline double error_percent(double real_mm, double predicted_mm) {
  return std::abs((predicted_mm - real_mm) / 1000.0) * 100.0;
}

struct EvalRow {
  std::string label;
  std::string clamping;
  double real_mm = 0.0;
  double predicted_mm = 0.0;
  double error = 0.0;  // percent

  static EvalRow make(std::string label, std::string clamping, double real_mm, double predicted_mm) {
    EvalRow r;
    r.label = std::move(label);
    r.clamping = std::move(clamping);
    r.real_mm = real_mm;
    r.predicted_mm = predicted_mm;
    r.error = error_percent(real_mm, predicted_mm);
    return r;
  }

  static EvalRow restore(std::string label, std::string clamping, double real_mm, double predicted_mm,
                         double stored_error, double tolerance = 1e-9) {
    EvalRow r = make(std::move(label), std::move(clamping), real_mm, predicted_mm);
    if (std::abs(r.error - stored_error) > tolerance)
      throw ValidationError("row '" + r.label + "': stored error " + csv::format_double(stored_error) +
                            " disagrees with recomputed " + csv::format_double(r.error));
    return r;
  }
};

inline double residual_mean(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw ContractError("residual statistics need at least one row");
  double acc = 0.0;
  for (const auto& r : rows) acc += r.predicted_mm - r.real_mm;
  return acc / static_cast<double>(rows.size());
}

// population standard deviation of signed residuals (predicted - real), in mm
inline double residual_std(const std::vector<EvalRow>& rows) {
  if (rows.size() < 2) throw ContractError("residual_std needs at least 2 rows");
  const double mean = residual_mean(rows);
  double acc = 0.0;
  for (const auto& r : rows) {
    const double d = (r.predicted_mm - r.real_mm) - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(rows.size()));
}

inline double rmse_mm(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw ContractError("rmse needs at least one row");
  double acc = 0.0;
  for (const auto& r : rows) {
    const double d = r.predicted_mm - r.real_mm;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(rows.size()));
}

// top-k by error descending; ties broken by real position ascending
inline std::vector<EvalRow> worst_k(const std::vector<EvalRow>& rows, std::size_t k = 4) {
  if (k > rows.size())
    throw ContractError("worst_k: k=" + std::to_string(k) + " exceeds row count " + std::to_string(rows.size()));
  std::vector<EvalRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.error != b.error) return a.error > b.error;
    return a.real_mm < b.real_mm;
  });
  sorted.resize(k);
  return sorted;
}

// ---------------------------------------------------------------------------
// Row CSV (full precision)

inline void save_rows(const std::vector<EvalRow>& rows, const std::string& path) {
  csv::Writer out(path);
  out.row({"label", "clamping", "real_mm", "predicted_mm", "error_percent"});
  for (const auto& r : rows)
    out.row({r.label, r.clamping, csv::format_double(r.real_mm), csv::format_double(r.predicted_mm),
             csv::format_double(r.error)});
  out.close();
}

inline std::vector<EvalRow> load_rows(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::vector<std::string> expect = {"label", "clamping", "real_mm", "predicted_mm", "error_percent"};
  if (table.header != expect) throw ParseError(path + ": unexpected rows header", 1);
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const long line = table.row_lines[i];
    if (row.size() != 5) throw ParseError(path + ": rows need 5 columns", line);
    rows.push_back(EvalRow::restore(row[0], row[1], csv::parse_double(row[2], line),
                                    csv::parse_double(row[3], line), csv::parse_double(row[4], line)));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG artifacts (no rendering dependency; deterministic text output)

namespace detail {

inline std::string num(double v) { return csv::format_fixed(v, 2); }

struct Frame {
  double width = 640, height = 640;
  double left = 70, right = 20, top = 20, bottom = 55;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double x(double v, double lo, double hi) const { return left + (v - lo) / (hi - lo) * plot_w(); }
  double y(double v, double lo, double hi) const { return top + plot_h() - (v - lo) / (hi - lo) * plot_h(); }
};

inline void svg_open(std::string& s, const Frame& f, const std::string& title) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
       "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\">\n";
  s += "<rect width=\"" + num(f.width) + "\" height=\"" + num(f.height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\">" + title + "</text>\n";
  s += "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" + num(f.plot_w()) + "\" height=\"" +
       num(f.plot_h()) + "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
}

inline void svg_axis_labels(std::string& s, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  s += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"" + num(f.height - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xlabel + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(f.top + f.plot_h() / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
       num(f.top + f.plot_h() / 2) + ")\">" + ylabel + "</text>\n";
}

inline void svg_tick_x(std::string& s, const Frame& f, double v, double lo, double hi, const std::string& text) {
  const double px = f.x(v, lo, hi);
  const double py = f.top + f.plot_h();
  s += "<line x1=\"" + num(px) + "\" y1=\"" + num(py) + "\" x2=\"" + num(px) + "\" y2=\"" + num(py + 5) +
       "\" stroke=\"#333\"/>\n";
  s += "<text x=\"" + num(px) + "\" y=\"" + num(py + 18) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + text + "</text>\n";
}

inline void svg_tick_y(std::string& s, const Frame& f, double v, double lo, double hi, const std::string& text) {
  const double px = f.left;
  const double py = f.y(v, lo, hi);
  s += "<line x1=\"" + num(px - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(px) + "\" y2=\"" + num(py) +
       "\" stroke=\"#333\"/>\n";
  s += "<text x=\"" + num(px - 8) + "\" y=\"" + num(py + 3) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + text + "</text>\n";
}

}  // namespace detail

// Predicted vs actual position with the identity line.
inline std::string regression_scatter_svg(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw ContractError("scatter needs at least one row");
  detail::Frame f;
  const double lo = 0.0, hi = data::kBeamLengthMm;
  std::string s;
  detail::svg_open(s, f, "Predicted vs actual crack position");
  detail::svg_axis_labels(s, f, "actual position (mm)", "predicted position (mm)");
  for (double t = 0.0; t <= 1000.0; t += 250.0) {
    detail::svg_tick_x(s, f, t, lo, hi, csv::format_fixed(t, 0));
    detail::svg_tick_y(s, f, t, lo, hi, csv::format_fixed(t, 0));
  }
  s += "<line x1=\"" + detail::num(f.x(lo, lo, hi)) + "\" y1=\"" + detail::num(f.y(lo, lo, hi)) + "\" x2=\"" +
       detail::num(f.x(hi, lo, hi)) + "\" y2=\"" + detail::num(f.y(hi, lo, hi)) +
       "\" stroke=\"#2060c0\" stroke-width=\"1.5\"/>\n";
  for (const auto& r : rows)
    s += "<circle cx=\"" + detail::num(f.x(r.real_mm, lo, hi)) + "\" cy=\"" +
         detail::num(f.y(r.predicted_mm, lo, hi)) + "\" r=\"2.5\" fill=\"#d04020\" fill-opacity=\"0.6\"/>\n";
  s += "</svg>\n";
  return s;
}

// Satisfiability rising and RMSE falling over epochs, two scales.
inline std::string trace_plot_svg(const train::TrainTrace& trace) {
  if (trace.records.empty()) throw ContractError("trace plot needs at least one record");
  detail::Frame f;
  const double e_lo = static_cast<double>(trace.records.front().epoch);
  const double e_hi = std::max(e_lo + 1.0, static_cast<double>(trace.records.back().epoch));
  double rmse_hi = 0.0;
  for (const auto& r : trace.records) rmse_hi = std::max({rmse_hi, r.rmse_train, r.rmse_val});
  if (rmse_hi <= 0.0) rmse_hi = 1.0;

  std::string s;
  detail::svg_open(s, f, "Satisfiability and RMSE over training");
  detail::svg_axis_labels(s, f, "epoch", "satisfiability [0,1] / RMSE (scaled)");
  for (int i = 0; i <= 4; ++i) {
    const double e = e_lo + (e_hi - e_lo) * i / 4.0;
    detail::svg_tick_x(s, f, e, e_lo, e_hi, csv::format_fixed(e, 0));
    detail::svg_tick_y(s, f, i / 4.0, 0.0, 1.0, csv::format_fixed(i / 4.0, 2));
  }

  const auto polyline = [&](const std::string& color, auto pick, double scale) {
    std::string pts;
    for (const auto& r : trace.records) {
      if (!pts.empty()) pts += " ";
      pts += detail::num(f.x(static_cast<double>(r.epoch), e_lo, e_hi)) + "," +
             detail::num(f.y(pick(r) / scale, 0.0, 1.0));
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
  };
  polyline("#2060c0", [](const train::TraceRecord& r) { return r.sat_train; }, 1.0);
  polyline("#20a0a0", [](const train::TraceRecord& r) { return r.sat_test; }, 1.0);
  polyline("#d04020", [](const train::TraceRecord& r) { return r.rmse_train; }, rmse_hi);
  polyline("#e08020", [](const train::TraceRecord& r) { return r.rmse_val; }, rmse_hi);

  const double lx = f.left + 10;
  double ly = f.top + 14;
  for (const auto& [color, name] :
       {std::pair<const char*, const char*>{"#2060c0", "sat train"}, {"#20a0a0", "sat test"},
        {"#d04020", "rmse train (scaled)"}, {"#e08020", "rmse val (scaled)"}}) {
    s += "<line x1=\"" + detail::num(lx) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" + detail::num(lx + 18) +
         "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::num(lx + 24) + "\" y=\"" + detail::num(ly) +
         "\" font-family=\"sans-serif\" font-size=\"10\">" + name + "</text>\n";
    ly += 14;
  }
  s += "</svg>\n";
  return s;
}

// ---------------------------------------------------------------------------
// Two-block scenario table: rows split into halves rendered side by side.

inline std::string scenario_table_csv(const std::vector<EvalRow>& rows) {
  const std::size_t block = (rows.size() + 1) / 2;
  std::string out = "real_mm,predicted_mm,error_percent,real_mm,predicted_mm,error_percent\n";
  for (std::size_t i = 0; i < block; ++i) {
    const auto cell = [&](std::size_t idx) -> std::string {
      if (idx >= rows.size()) return ",,";
      const EvalRow& r = rows[idx];
      return csv::format_double(r.real_mm) + "," + csv::format_fixed(r.predicted_mm, 3) + "," +
             csv::format_fixed(r.error, 3);
    };
    out += cell(i) + "," + cell(i + block) + "\n";
  }
  return out;
}

inline std::string scenario_table_text(const std::vector<EvalRow>& rows) {
  const std::size_t block = (rows.size() + 1) / 2;
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%10s %12s %8s   %10s %12s %8s\n", "real", "predicted", "error%", "real",
                "predicted", "error%");
  out += line;
  for (std::size_t i = 0; i < block; ++i) {
    const auto cell = [&](std::size_t idx, char* buf, std::size_t cap) {
      if (idx >= rows.size()) {
        std::snprintf(buf, cap, "%10s %12s %8s", "", "", "");
        return;
      }
      const EvalRow& r = rows[idx];
      std::snprintf(buf, cap, "%10.0f %12.3f %8.3f", r.real_mm, r.predicted_mm, r.error);
    };
    char left[64], right[64];
    cell(i, left, sizeof left);
    cell(i + block, right, sizeof right);
    std::snprintf(line, sizeof line, "%s   %s\n", left, right);
    out += line;
  }
  return out;
}

// parse the two-block layout back into row order
inline std::vector<std::array<double, 3>> parse_scenario_table_csv(const std::string& text) {
  std::vector<std::array<double, 3>> left, right;
  std::size_t pos = 0;
  long line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto cells = csv::split_row(line);
    if (cells.size() != 6) throw ParseError("scenario table rows need 6 columns", line_no);
    if (!cells[0].empty())
      left.push_back({csv::parse_double(cells[0], line_no), csv::parse_double(cells[1], line_no),
                      csv::parse_double(cells[2], line_no)});
    if (!cells[3].empty())
      right.push_back({csv::parse_double(cells[3], line_no), csv::parse_double(cells[4], line_no),
                       csv::parse_double(cells[5], line_no)});
  }
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

// ---------------------------------------------------------------------------
// Report directory

struct ReportBundle {
  std::vector<EvalRow> rows;
  double residual_std_mm = 0.0;
  double rmse_mm = 0.0;
  std::vector<EvalRow> worst;
  std::vector<std::string> artifacts;
};

namespace detail {
inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}
}  // namespace detail

inline ReportBundle write_report(const std::string& dir, const std::vector<EvalRow>& rows,
                                 const train::TrainTrace* trace = nullptr) {
  if (rows.empty()) throw ContractError("report needs at least one row");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);

  ReportBundle bundle;
  bundle.rows = rows;
  bundle.rmse_mm = rmse_mm(rows);
  bundle.residual_std_mm = rows.size() >= 2 ? residual_std(rows) : 0.0;
  bundle.worst = worst_k(rows, std::min<std::size_t>(4, rows.size()));

  save_rows(rows, (base / "rows.csv").string());
  bundle.artifacts.push_back((base / "rows.csv").string());

  {
    csv::Writer out((base / "summary.csv").string());
    out.row({"residual_std_mm", "rmse_mm", "n"});
    out.row({csv::format_double(bundle.residual_std_mm), csv::format_double(bundle.rmse_mm),
             std::to_string(rows.size())});
    out.close();
    bundle.artifacts.push_back((base / "summary.csv").string());
  }

  save_rows(bundle.worst, (base / "worst4.csv").string());
  bundle.artifacts.push_back((base / "worst4.csv").string());

  detail::write_text(base / "scatter.svg", regression_scatter_svg(rows));
  bundle.artifacts.push_back((base / "scatter.svg").string());

  detail::write_text(base / "scenarios.csv", scenario_table_csv(rows));
  detail::write_text(base / "scenarios.txt", scenario_table_text(rows));
  bundle.artifacts.push_back((base / "scenarios.csv").string());
  bundle.artifacts.push_back((base / "scenarios.txt").string());

  if (trace != nullptr) {
    trace->save_csv((base / "trace.csv").string());
    detail::write_text(base / "trace.svg", trace_plot_svg(*trace));
    bundle.artifacts.push_back((base / "trace.csv").string());
    bundle.artifacts.push_back((base / "trace.svg").string());
  }
  return bundle;
}

}  // namespace lcnr::report
