#pragma once

#include "isogplvm/model.hpp"

#include <filesystem>
#include <string>

namespace isogplvm {

// Config JSON: every ModelConfig field by name. "eps" is required; other
// fields fall back to defaults; unknown fields are rejected.
ModelConfig config_from_json(const std::string& text);
ModelConfig load_config(const std::filesystem::path& path);
// `threads` is left out: it never changes results.
std::string config_to_json(const ModelConfig& config);

// Checkpoint: kernel params, Z_u, mu_u, L_S as row-major nested arrays, D', q.
std::string field_to_json(const JacobianField& field);
JacobianField field_from_json(const std::string& text);

std::string report_to_json(const FitReport& report);
FitReport report_from_json(const std::string& text);
FitReport load_report(const std::filesystem::path& path);

// Rows: index, mu_z..., var_z...
std::string embedding_csv(const LatentState& latent);
// Rows: epoch, elbo
std::string trace_csv(const std::vector<double>& trace);

// State at a failed epoch.
std::string abort_dump_json(const FitAborted& err, const ModelConfig& config);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace isogplvm
