#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zclip::synth {

/// Trace-file problem; the message carries the path and 1-based line number.
class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceRow {
  std::uint64_t step = 0;
  double grad_norm = 0.0;
  std::optional<double> loss;
};

/// Parses the CSV trace format: header `step,grad_norm[,loss]`, one row per
/// step, `#` comment lines allowed anywhere.
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

/// Gradient norms only, in file order.
std::vector<double> replay(const std::filesystem::path& path);

/// Writes rows 0..n-1. Values use shortest round-trip formatting, so a
/// write/read cycle is lossless. `losses`, when non-empty, must match
/// `norms` in length and adds the loss column.
void write_trace(const std::filesystem::path& path,
                 std::span<const double> norms,
                 std::span<const double> losses = {});

std::string trace_csv(std::span<const double> norms,
                      std::span<const double> losses = {});

}  // namespace zclip::synth
