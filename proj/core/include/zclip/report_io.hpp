#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "zclip/metrics.hpp"
#include "zclip/policies.hpp"
#include "zclip/trainer.hpp"

namespace zclip {

/// StepRecord CSV: header
/// `step,raw_norm,clipped_norm,mu,sigma,z,was_clipped,update_value,valid`
/// with flags as 0/1 and shortest round-trip floats (NaN prints as `nan`).
std::string records_csv(std::span<const StepRecord> records);
void write_records_csv(const std::filesystem::path& path,
                       std::span<const StepRecord> records);
std::vector<StepRecord> read_records_csv(const std::filesystem::path& path);

std::string to_json(const trainer::TrainReport& report);
std::string to_json(const metrics::RunSummary& summary);

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents);

}  // namespace zclip
