#pragma once

#include <string>
#include <vector>

#include "consub/config.hpp"
#include "consub/verification.hpp"

namespace consub {

enum class ExitCode : int {
    Ok = 0,
    AuditFailure = 1,
    BadConfig = 2,
    NumericalFailure = 3,
};

enum class Verb { Simulate, Reconstruct, Verify, VolumeAudit, All };

Verb verb_from_string(const std::string& name);

struct PipelineResult {
    ExitCode exit_code = ExitCode::Ok;
    std::vector<AuditReport> reports;       // sorted by name
    std::vector<std::string> files_written;
    int branch_count_max = 0;               // per-coordinate maximum
};

/**
 * Execute integrate -> segment -> reconstruct -> substitute -> audits and
 * write the requested artifacts into out_dir. Audit failure still writes
 * the report and returns AuditFailure; config and numerical errors throw
 * (ConfigError / std::runtime_error-family) for the CLI to map.
 */
PipelineResult run_pipeline(const RunConfig& cfg, Verb verb, const std::string& out_dir);

/// Write reports (sorted by name) as a human-readable table or as
/// line-delimited machine-readable records.
void emit_report(const std::vector<AuditReport>& reports, const std::string& path,
                 bool machine_readable);

} // namespace consub
