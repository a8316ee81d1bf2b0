#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sodyolo {

struct AblationRow {
  std::string label;
  double map5095 = 0.0;
  double map50 = 0.0;
  std::optional<double> flops_g;
};

struct AblationDelta {
  double map5095 = 0.0;
  double map50 = 0.0;
};

// Deltas of every row against rows.front(); always recomputed.
std::vector<AblationDelta> ablation_deltas(const std::vector<AblationRow>& rows);

// "(+0.094)" / "(-0.007)"; a delta that rounds to zero prints as "(+0.000)".
std::string format_delta(double delta);

// Plain-text table; rows.empty() is std::invalid_argument.
std::string ablation_report(const std::vector<AblationRow>& rows);
std::string ablation_report_json(const std::vector<AblationRow>& rows);

// "label,map5095,map50[,flops_g]" per line; '#' comments allowed.
std::vector<AblationRow> parse_ablation_rows(const std::string& text);

// 100 * (new - base) / base rounded to one decimal; base <= 0 is invalid.
double relative_improvement(double new_value, double base);
double relative_improvement_exact(double new_value, double base);

struct ClaimCheck {
  double computed = 0.0;  // rounded to one decimal
  double exact = 0.0;
  double claimed = 0.0;
  bool matches = false;
  std::string message;
};

// Compares a quoted percentage with the value recomputed from its inputs.
ClaimCheck check_claim(double new_value, double base, double claimed_percent);

}  // namespace sodyolo
