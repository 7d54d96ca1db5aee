#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "pfgp/error.hpp"
#include "pfgp/experiment.hpp"

namespace pfgp {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* color_for(const std::string& method) {
  if (method == "pf-dtc") return "#1f77b4";
  if (method == "vfe") return "#d62728";
  if (method == "sor") return "#2ca02c";
  if (method == "subsample") return "#9467bd";
  return "#555555";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// log10 axis over positive values
struct LogAxis {
  double lo = 0.0;
  double hi = 1.0;

  static LogAxis over(double vmin, double vmax) {
    LogAxis a;
    a.lo = std::floor(std::log10(vmin));
    a.hi = std::ceil(std::log10(vmax));
    if (a.hi <= a.lo) a.hi = a.lo + 1.0;
    return a;
  }
  double frac(double v) const { return (std::log10(v) - lo) / (hi - lo); }
};

struct Canvas {
  std::ostringstream body;
  double px(double f) const { return kLeft + f * (kWidth - kLeft - kRight); }
  double py(double f) const { return kHeight - kBottom - f * (kHeight - kTop - kBottom); }
};

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<title>" << escape(title) << "</title>\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">"
     << escape(title) << "</text>\n";
  return os.str();
}

void draw_axes(Canvas& c, const LogAxis& xa, const LogAxis& ya, const std::string& xlabel, const std::string& ylabel) {
  auto& b = c.body;
  b << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << num(c.px(0)) << "\" y1=\"" << num(c.py(0)) << "\" x2=\"" << num(c.px(1)) << "\" y2=\""
    << num(c.py(0)) << "\"/>\n"
    << "<line x1=\"" << num(c.px(0)) << "\" y1=\"" << num(c.py(0)) << "\" x2=\"" << num(c.px(0)) << "\" y2=\""
    << num(c.py(1)) << "\"/>\n</g>\n";
  b << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (double e = xa.lo; e <= xa.hi + 1e-9; e += 1.0) {
    const double x = c.px((e - xa.lo) / (xa.hi - xa.lo));
    b << "<line x1=\"" << num(x) << "\" y1=\"" << num(c.py(0)) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(c.py(0) + 5) << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num(x) << "\" y=\"" << num(c.py(0) + 18) << "\" text-anchor=\"middle\">"
      << tick_label(std::pow(10.0, e)) << "</text>\n";
  }
  for (double e = ya.lo; e <= ya.hi + 1e-9; e += 1.0) {
    const double y = c.py((e - ya.lo) / (ya.hi - ya.lo));
    b << "<line x1=\"" << num(c.px(0) - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(c.px(1)) << "\" y2=\""
      << num(y) << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << num(c.px(0) - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e"
      << static_cast<int>(e) << "</text>\n";
  }
  b << "<text x=\"" << num(c.px(0.5)) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n"
    << "<text transform=\"translate(18," << num(c.py(0.5)) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(ylabel) << "</text>\n</g>\n";
}

void legend(Canvas& c, const std::vector<std::string>& methods) {
  double y = kTop + 10;
  for (const auto& m : methods) {
    const double x = kWidth - kRight + 15;
    c.body << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8) << "\" width=\"14\" height=\"10\" fill=\""
           << color_for(m) << "\"/>\n"
           << "<text x=\"" << num(x + 20) << "\" y=\"" << num(y + 1)
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(m) << "</text>\n";
    y += 18;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

// Median over seeds with a min/max band, one series per method, against M.
std::string metric_plot(const std::string& dataset, const std::vector<const ResultRow*>& rows,
                        double ResultRow::*field, const std::string& label) {
  std::map<std::string, std::map<Index, std::vector<double>>> series;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = 0.0;
  Index m_min = std::numeric_limits<Index>::max();
  Index m_max = 1;
  // values at or below zero are clamped to a floor on the log axis
  for (const ResultRow* r : rows) {
    const double v = r->*field;
    if (!std::isfinite(v)) continue;
    series[r->method][r->m].push_back(v);
    if (v > 0) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    m_min = std::min(m_min, r->m);
    m_max = std::max(m_max, r->m);
  }
  if (!std::isfinite(vmin)) {
    vmin = 1e-12;
    vmax = 1.0;
  }
  const double floor_v = vmin;
  const LogAxis xa = LogAxis::over(static_cast<double>(std::max<Index>(m_min, 1)), static_cast<double>(m_max));
  const LogAxis ya = LogAxis::over(vmin, std::max(vmax, vmin * 10.0));
  Canvas c;
  draw_axes(c, xa, ya, "inducing points M", label);
  std::vector<std::string> methods;
  for (const auto& [method, by_m] : series) {
    methods.push_back(method);
    std::ostringstream line;
    std::ostringstream band_hi;
    std::vector<std::string> band_lo;
    for (const auto& [m, vals] : by_m) {
      const double x = c.px(xa.frac(static_cast<double>(m)));
      const double med = std::max(median(vals), floor_v);
      const double lo = std::max(*std::min_element(vals.begin(), vals.end()), floor_v);
      const double hi = std::max(*std::max_element(vals.begin(), vals.end()), floor_v);
      line << num(x) << ',' << num(c.py(ya.frac(med))) << ' ';
      band_hi << num(x) << ',' << num(c.py(ya.frac(hi))) << ' ';
      band_lo.push_back(num(x) + "," + num(c.py(ya.frac(lo))));
    }
    std::string poly = band_hi.str();
    for (auto it = band_lo.rbegin(); it != band_lo.rend(); ++it) poly += *it + " ";
    c.body << "<polygon points=\"" << poly << "\" fill=\"" << color_for(method)
           << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n"
           << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color_for(method)
           << "\" stroke-width=\"2\"/>\n";
  }
  legend(c, methods);
  return header(dataset + ": " + label) + c.body.str() + "</svg>\n";
}

// Final objective against KL to the exact posterior, one marker per cell.
std::string objective_plot(const std::string& dataset, const std::vector<const ResultRow*>& rows) {
  std::vector<const ResultRow*> pts;
  for (const ResultRow* r : rows) {
    if (r->method == "pf-dtc" && r->objective_final && *r->objective_final > 0 && r->kl_to_exact > 0) {
      pts.push_back(r);
    }
  }
  double xmin = 1e-6, xmax = 1.0, ymin = 1e-6, ymax = 1.0;
  if (!pts.empty()) {
    xmin = ymin = std::numeric_limits<double>::infinity();
    xmax = ymax = 0.0;
    for (const ResultRow* r : pts) {
      xmin = std::min(xmin, *r->objective_final);
      xmax = std::max(xmax, *r->objective_final);
      ymin = std::min(ymin, r->kl_to_exact);
      ymax = std::max(ymax, r->kl_to_exact);
    }
  }
  const LogAxis xa = LogAxis::over(xmin, std::max(xmax, xmin * 10));
  const LogAxis ya = LogAxis::over(ymin, std::max(ymax, ymin * 10));
  Canvas c;
  draw_axes(c, xa, ya, "final objective (scaled squared pF)", "KL to exact");
  for (const ResultRow* r : pts) {
    c.body << "<circle cx=\"" << num(c.px(xa.frac(*r->objective_final))) << "\" cy=\""
           << num(c.py(ya.frac(r->kl_to_exact))) << "\" r=\"3\" fill=\"" << color_for(r->method)
           << "\" fill-opacity=\"0.7\"><title>M=" << r->m << " seed=" << r->seed << "</title></circle>\n";
  }
  if (pts.empty()) {
    c.body << "<text x=\"" << num(c.px(0.5)) << "\" y=\"" << num(c.py(0.5))
           << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">no pf-dtc rows</text>\n";
  }
  legend(c, {"pf-dtc"});
  return header(dataset + ": objective vs KL") + c.body.str() + "</svg>\n";
}

}  // namespace

std::vector<std::string> emit_report(const std::vector<ResultRow>& rows, const ReportOptions& options) {
  std::map<std::string, std::vector<const ResultRow*>> by_dataset;
  for (const auto& r : rows)
    if (r.ok()) by_dataset[r.dataset].push_back(&r);
  if (by_dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "report: no ok rows");
  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + options.out_dir + "'");
  std::vector<std::string> written;
  const std::filesystem::path dir(options.out_dir);
  for (const auto& [dataset, drows] : by_dataset) {
    const std::string a = (dir / (dataset + "_mean_rmse.svg")).string();
    write_file(a, metric_plot(dataset, drows, &ResultRow::mean_rmse, "mean RMSE vs exact"));
    const std::string b = (dir / (dataset + "_std_rmse.svg")).string();
    write_file(b, metric_plot(dataset, drows, &ResultRow::std_rmse, "std RMSE vs exact"));
    const std::string o = (dir / (dataset + "_objective.svg")).string();
    write_file(o, objective_plot(dataset, drows));
    written.insert(written.end(), {a, b, o});
  }
  return written;
}

}  // namespace pfgp
