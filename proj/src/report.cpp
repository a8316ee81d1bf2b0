#include "sodyolo/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sodyolo/errors.hpp"

namespace sodyolo {

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

std::vector<AblationDelta> ablation_deltas(const std::vector<AblationRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("ablation: no rows");
  const AblationRow& base = rows.front();
  std::vector<AblationDelta> out;
  for (const auto& r : rows) out.push_back({r.map5095 - base.map5095, r.map50 - base.map50});
  return out;
}

std::string format_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", std::abs(delta));
  const bool zero = std::string(buf) == "0.000";
  return std::string("(") + (delta < 0.0 && !zero ? "-" : "+") + buf + ")";
}

std::string ablation_report(const std::vector<AblationRow>& rows) {
  const auto deltas = ablation_deltas(rows);
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream os;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  os << pad("model") << "mAP50:95            mAP50               GFLOPs\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::string a = fixed3(r.map5095), b = fixed3(r.map50);
    if (i > 0) {
      a += " " + format_delta(deltas[i].map5095);
      b += " " + format_delta(deltas[i].map50);
    }
    a.resize(20, ' ');
    b.resize(20, ' ');
    os << pad(r.label) << a << b << (r.flops_g ? fixed3(*r.flops_g) : std::string("-")) << "\n";
  }
  return os.str();
}

std::string ablation_report_json(const std::vector<AblationRow>& rows) {
  const auto deltas = ablation_deltas(rows);
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    nlohmann::ordered_json j;
    j["label"] = rows[i].label;
    j["map5095"] = rows[i].map5095;
    j["map50"] = rows[i].map50;
    j["flops_g"] = rows[i].flops_g ? nlohmann::ordered_json(*rows[i].flops_g) : nullptr;
    j["delta_map5095"] = deltas[i].map5095;
    j["delta_map50"] = deltas[i].map50;
    out.push_back(j);
  }
  return out.dump(2) + "\n";
}

std::vector<AblationRow> parse_ablation_rows(const std::string& text) {
  std::vector<AblationRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string part;
    while (std::getline(ls, part, ',')) f.push_back(trim(part));
    if (f.size() < 3 || f.size() > 4) {
      throw ParseError(lineno, "expected label,map5095,map50[,flops_g]");
    }
    AblationRow r;
    r.label = f[0];
    try {
      std::size_t used = 0;
      r.map5095 = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
      r.map50 = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
      if (f.size() == 4 && !f[3].empty() && f[3] != "-") r.flops_g = std::stod(f[3]);
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "metric is not a number");
    }
    rows.push_back(r);
  }
  return rows;
}

double relative_improvement_exact(double new_value, double base) {
  if (!(base > 0.0)) throw std::invalid_argument("relative_improvement: base must be positive");
  return 100.0 * (new_value - base) / base;
}

double relative_improvement(double new_value, double base) {
  return std::round(relative_improvement_exact(new_value, base) * 10.0) / 10.0;
}

ClaimCheck check_claim(double new_value, double base, double claimed_percent) {
  ClaimCheck c;
  c.exact = relative_improvement_exact(new_value, base);
  c.computed = relative_improvement(new_value, base);
  c.claimed = claimed_percent;
  c.matches = std::abs(c.computed - claimed_percent) < 0.05;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: (%.3f - %.3f) / %.3f = %.3f%% -> %.1f%%, quoted %.1f%%",
                c.matches ? "consistent" : "MISMATCH", new_value, base, base, c.exact, c.computed,
                claimed_percent);
  c.message = buf;
  return c;
}

}  // namespace sodyolo
