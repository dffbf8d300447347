#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sharpseg {

/// Largest relative gradient error an audited operation may show.
inline constexpr double kGradTolerance = 1e-4;

struct AuditCase {
  std::string module;  // tensor, ssm, blocks, losses, network
  std::string name;
  std::function<double()> run;  // returns grad_check's error
};

struct AuditResult {
  std::string module, name;
  double error = 0.0;
  bool passed = false;
  std::string message;  // set when the case threw
};

std::vector<std::string> audit_modules();
/// Every case, or those of one module. InvalidConfig on an unknown module.
std::vector<AuditCase> audit_cases(const std::string& module = "");
std::vector<AuditResult> run_audit(const std::string& module = "",
                                   const std::function<void(const AuditResult&)>& on_result = {});

}  // namespace sharpseg
