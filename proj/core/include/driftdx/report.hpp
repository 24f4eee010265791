#pragma once

#include <string>

#include "driftdx/inference.hpp"
#include "json.hpp"

namespace driftdx {

// All renderers consume the report JSON (HierarchicalReport::to_json) rather
// than the in-memory struct, so a saved report.json replays identically.

void write_report_json(const nlohmann::json& report, const std::string& path);
nlohmann::json read_report_json(const std::string& path);

// Two-level hierarchy diagram, SVG 1.1. Aggregate nodes are red when
// rejected, detailed children red when flagged (p > alpha). Labels carry the
// flag strength: 1 - p for aggregates, p for detailed children. Output is
// byte-deterministic for identical input JSON.
std::string render_hierarchy_svg(const nlohmann::json& report);

std::string render_text_summary(const nlohmann::json& report);

}  // namespace driftdx
