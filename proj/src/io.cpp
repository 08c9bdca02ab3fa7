#include "hydrosdp/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <system_error>

namespace hydro {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) throw FormatError("not a number: '" + text + "'");
  return x;
}

namespace {

const char* on_off(bool b) { return b ? "on" : "off"; }

bool parse_on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw FormatError("expected on/off, got '" + s + "'");
}

int parse_int(const std::string& s) {
  int x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not an integer: '" + s + "'");
  return x;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_preamble(std::ostream& out, const std::string& kind, const std::string& columns,
                    const std::string& extra = {}) {
  out << "# hydrosdp " << kind << " v" << kCsvVersion << extra << '\n' << columns << '\n';
}

// Checks preamble and header, returns the tail of the preamble line.
std::string read_preamble(std::istream& in, const std::string& kind, const std::string& columns) {
  std::string line;
  const std::string expect = "# hydrosdp " + kind + " v" + std::to_string(kCsvVersion);
  if (!std::getline(in, line) || line.rfind(expect, 0) != 0) {
    throw FormatError("missing '" + expect + "' preamble");
  }
  std::string tail = line.substr(expect.size());
  if (!std::getline(in, line) || line != columns) throw FormatError("unexpected columns in " + kind + " file");
  return tail;
}

// Rows with exactly n cells.
std::vector<std::vector<std::string>> rows(std::istream& in, std::size_t n) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != n) throw FormatError("expected " + std::to_string(n) + " cells: '" + line + "'");
    out.push_back(std::move(cells));
  }
  return out;
}

constexpr const char* kThetaColumns = "method,week,filling_m3,theta_eur";
constexpr const char* kWaterColumns = "week,filling_mid_m3,value_eur_per_m3";
constexpr const char* kSummaryColumns = "method,reserves,expected_profit,rel_std_pct,cvar10";
constexpr const char* kSampleColumns = "method,reserves,sample,profit,spill_m3,balance_residual_m3,reserve_weeks";

}  // namespace

void write_value_function(std::ostream& out, const ValueFunction& vf) {
  write_preamble(out, "theta", kThetaColumns, std::string(" reserves=") + on_off(vf.reserves_enabled));
  for (std::size_t t = 0; t < vf.theta.size(); ++t) {
    for (std::size_t i = 0; i < vf.filling.size(); ++i) {
      out << to_string(vf.method) << ',' << t + 1 << ',' << format_double(vf.filling[i]) << ','
          << format_double(vf.theta[t][i]) << '\n';
    }
  }
}

ValueFunction read_value_function(std::istream& in) {
  const auto tail = read_preamble(in, "theta", kThetaColumns);
  ValueFunction vf;
  if (tail == " reserves=on") {
    vf.reserves_enabled = true;
  } else if (tail != " reserves=off") {
    throw FormatError("theta preamble lacks the reserve flag");
  }
  bool first = true;
  for (const auto& c : rows(in, 4)) {
    const Method m = parse_method(c[0]);
    if (first) vf.method = m;
    if (m != vf.method) throw FormatError("mixed methods in one theta file");
    const int week = parse_int(c[1]);
    const double v = parse_double(c[2]);
    if (week == 1 && static_cast<int>(vf.theta.size()) <= 1) {
      if (vf.theta.empty()) vf.theta.emplace_back();
      vf.filling.push_back(v);
    }
    if (week == static_cast<int>(vf.theta.size()) + 1) vf.theta.emplace_back();
    if (week != static_cast<int>(vf.theta.size())) throw FormatError("theta weeks out of order");
    auto& row = vf.theta.back();
    if (row.size() >= vf.filling.size() || vf.filling[row.size()] != v) throw FormatError("theta grid mismatch");
    row.push_back(parse_double(c[3]));
    first = false;
  }
  if (vf.theta.size() < 2) throw FormatError("theta file needs at least two weeks");
  for (const auto& row : vf.theta) {
    if (row.size() != vf.filling.size()) throw FormatError("incomplete theta week");
  }
  return vf;
}

void write_water_values(std::ostream& out, const WaterValueTable& t) {
  write_preamble(out, "water_values", kWaterColumns);
  for (std::size_t w = 0; w < t.values.size(); ++w) {
    for (std::size_t i = 0; i < t.filling_mid.size(); ++i) {
      out << w + 1 << ',' << format_double(t.filling_mid[i]) << ',' << format_double(t.values[w][i]) << '\n';
    }
  }
}

WaterValueTable read_water_values(std::istream& in) {
  read_preamble(in, "water_values", kWaterColumns);
  WaterValueTable t;
  for (const auto& c : rows(in, 3)) {
    const int week = parse_int(c[0]);
    const double v = parse_double(c[1]);
    if (week == static_cast<int>(t.values.size()) + 1) t.values.emplace_back();
    if (week != static_cast<int>(t.values.size())) throw FormatError("water value weeks out of order");
    if (week == 1) t.filling_mid.push_back(v);
    auto& row = t.values.back();
    if (row.size() >= t.filling_mid.size() || t.filling_mid[row.size()] != v) {
      throw FormatError("water value grid mismatch");
    }
    row.push_back(parse_double(c[2]));
  }
  return t;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows_) {
  write_preamble(out, "summary", kSummaryColumns);
  for (const auto& r : rows_) {
    out << to_string(r.method) << ',' << on_off(r.reserves) << ',' << format_double(r.expected_profit) << ','
        << format_double(r.rel_std_pct) << ',' << format_double(r.cvar10) << '\n';
  }
}

std::vector<SummaryRow> read_summary(std::istream& in) {
  read_preamble(in, "summary", kSummaryColumns);
  std::vector<SummaryRow> out;
  for (const auto& c : rows(in, 5)) {
    out.push_back({parse_method(c[0]), parse_on_off(c[1]), parse_double(c[2]), parse_double(c[3]),
                   parse_double(c[4])});
  }
  return out;
}

void write_samples(std::ostream& out, const std::vector<SampleRow>& rows_, bool header) {
  if (header) write_preamble(out, "samples", kSampleColumns);
  for (const auto& r : rows_) {
    out << to_string(r.method) << ',' << on_off(r.reserves) << ',' << r.sample << ',' << format_double(r.profit)
        << ',' << format_double(r.spill_m3) << ',' << format_double(r.balance_residual_m3) << ','
        << r.reserve_weeks << '\n';
  }
}

std::vector<SampleRow> read_samples(std::istream& in) {
  read_preamble(in, "samples", kSampleColumns);
  std::vector<SampleRow> out;
  for (const auto& c : rows(in, 7)) {
    out.push_back({parse_method(c[0]), parse_on_off(c[1]), parse_int(c[2]), parse_double(c[3]),
                   parse_double(c[4]), parse_double(c[5]), parse_int(c[6])});
  }
  return out;
}

void write_filling_paths(std::ostream& out, Method method, bool reserves, const SimulationResult& r, bool header) {
  if (header) write_preamble(out, "filling_paths", "method,reserves,sample,week,filling_m3");
  for (std::size_t s = 0; s < r.filling_paths.size(); ++s) {
    for (std::size_t t = 0; t < r.filling_paths[s].size(); ++t) {
      out << to_string(method) << ',' << on_off(reserves) << ',' << s << ',' << t << ','
          << format_double(r.filling_paths[s][t]) << '\n';
    }
  }
}

void write_hourly_log(std::ostream& out, const std::vector<HourLog>& log) {
  write_preamble(out, "hourly_log", "sample,week,hour,price,u,p,s,m,filling");
  for (const auto& h : log) {
    out << h.sample << ',' << h.week << ',' << h.hour << ',' << format_double(h.price) << ',' << format_double(h.u)
        << ',' << format_double(h.p) << ',' << format_double(h.s) << ',' << format_double(h.m) << ','
        << format_double(h.filling) << '\n';
  }
}

namespace {

std::string lp_name(const lp::LinearProgram& lp, int j) {
  std::string n = lp.name(j);
  if (n.empty()) return "x" + std::to_string(j);
  for (auto& ch : n) {
    if (ch == ' ' || ch == '+' || ch == '-' || ch == ':' || ch == '<' || ch == '>' || ch == '=') ch = '_';
  }
  if (std::isdigit(static_cast<unsigned char>(n[0])) || n[0] == '.' || n[0] == 'e' || n[0] == 'E') n = "v" + n;
  return n;
}

void write_terms(std::ostream& out, const lp::LinearProgram& lp, const std::vector<lp::Term>& terms) {
  int on_line = 0;
  bool any = false;
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    out << (t.coef < 0 ? " - " : (any ? " + " : " ")) << format_double(std::abs(t.coef)) << ' ' << lp_name(lp, t.var);
    any = true;
    if (++on_line == 6) {
      out << "\n  ";
      on_line = 0;
    }
  }
  if (!any) out << " 0 " << lp_name(lp, 0);
}

}  // namespace

void write_lp_format(std::ostream& out, const lp::LinearProgram& lp, const std::string& title) {
  if (!title.empty()) out << "\\ " << title << '\n';
  out << "Maximize\n obj:";
  std::vector<lp::Term> obj;
  for (int j = 0; j < lp.num_variables(); ++j) obj.push_back({j, lp.objective()[j]});
  write_terms(out, lp, obj);
  out << "\nSubject To\n";
  for (int i = 0; i < lp.num_equalities(); ++i) {
    out << " e" << i << ':';
    write_terms(out, lp, lp.equalities()[i].terms);
    out << " = " << format_double(lp.equalities()[i].rhs) << '\n';
  }
  for (int i = 0; i < lp.num_inequalities(); ++i) {
    out << " l" << i << ':';
    write_terms(out, lp, lp.inequalities()[i].terms);
    out << " <= " << format_double(lp.inequalities()[i].rhs) << '\n';
  }
  out << "Bounds\n";
  for (int j = 0; j < lp.num_variables(); ++j) {
    const double lo = lp.lower_bounds()[j], hi = lp.upper_bounds()[j];
    const auto n = lp_name(lp, j);
    if (std::isinf(lo) && std::isinf(hi)) {
      out << ' ' << n << " free\n";
    } else if (lo == hi) {
      out << ' ' << n << " = " << format_double(lo) << '\n';
    } else {
      out << ' ' << (std::isinf(lo) ? "-inf" : format_double(lo)) << " <= " << n << " <= "
          << (std::isinf(hi) ? "+inf" : format_double(hi)) << '\n';
    }
  }
  out << "End\n";
}

}  // namespace hydro
