#include "zclip/report_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fmt.hpp"

namespace zclip {

namespace {

using nlohmann::json;

double parse_double_or_throw(std::string_view token, std::size_t lineno) {
  // from_chars handles "nan"/"inf" spellings produced by to_chars.
  double value;
  const char* begin = token.data();
  auto [ptr, ec] = std::from_chars(begin, begin + token.size(), value);
  if (ec != std::errc{} || ptr != begin + token.size()) {
    throw std::runtime_error("records csv line " + std::to_string(lineno) +
                             ": malformed value '" + std::string(token) + "'");
  }
  return value;
}

json curve_json(const std::vector<std::pair<std::uint64_t, double>>& curve) {
  json arr = json::array();
  for (const auto& [step, value] : curve) {
    arr.push_back(json::array({step, value}));
  }
  return arr;
}

}  // namespace

std::string records_csv(std::span<const StepRecord> records) {
  std::ostringstream out;
  out << "step,raw_norm,clipped_norm,mu,sigma,z,was_clipped,update_value,"
         "valid\n";
  for (const StepRecord& r : records) {
    out << r.step << ',' << detail::fmt_double(r.raw_norm) << ','
        << detail::fmt_double(r.clipped_norm) << ','
        << detail::fmt_double(r.mu) << ',' << detail::fmt_double(r.sigma)
        << ',' << detail::fmt_double(r.z) << ',' << (r.was_clipped ? 1 : 0)
        << ',' << detail::fmt_double(r.update_value) << ','
        << (r.valid ? 1 : 0) << '\n';
  }
  return out.str();
}

void write_records_csv(const std::filesystem::path& path,
                       std::span<const StepRecord> records) {
  write_text_file(path, records_csv(records));
}

std::vector<StepRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open records csv " + path.string());
  }
  std::vector<StepRecord> records;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    std::array<std::string_view, 9> fields;
    std::string_view rest = line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::size_t comma = rest.find(',');
      if (comma == std::string_view::npos) {
        if (i + 1 != fields.size()) {
          throw std::runtime_error("records csv line " +
                                   std::to_string(lineno) + ": expected 9 fields");
        }
        fields[i] = rest;
        break;
      }
      fields[i] = rest.substr(0, comma);
      rest = rest.substr(comma + 1);
    }
    StepRecord r;
    std::uint64_t step = 0;
    auto [p, ec] = std::from_chars(fields[0].data(),
                                   fields[0].data() + fields[0].size(), step);
    if (ec != std::errc{}) {
      throw std::runtime_error("records csv line " + std::to_string(lineno) +
                               ": malformed step");
    }
    r.step = step;
    r.raw_norm = parse_double_or_throw(fields[1], lineno);
    r.clipped_norm = parse_double_or_throw(fields[2], lineno);
    r.mu = parse_double_or_throw(fields[3], lineno);
    r.sigma = parse_double_or_throw(fields[4], lineno);
    r.z = parse_double_or_throw(fields[5], lineno);
    r.was_clipped = fields[6] == "1";
    r.update_value = parse_double_or_throw(fields[7], lineno);
    r.valid = fields[8] == "1";
    records.push_back(r);
  }
  return records;
}

std::string to_json(const trainer::TrainReport& report) {
  json j;
  j["policy"] = report.policy_label;
  j["diverged"] = report.diverged;
  j["spike_count"] = report.spike_count;
  j["clip_fraction"] = report.clip_fraction;
  j["initial_loss"] = report.initial_loss;
  j["final_loss"] = report.final_loss;
  j["steps_completed"] = report.loss_curve.size();
  j["loss_curve"] = report.loss_curve;
  j["grad_norm_pre"] = report.grad_norm_pre;
  j["grad_norm_post"] = report.grad_norm_post;
  return j.dump(2) + "\n";
}

std::string to_json(const metrics::RunSummary& summary) {
  json j;
  j["policy"] = summary.policy;
  j["spike_count"] = summary.spike_count;
  j["clip_fraction"] = summary.clip_fraction;
  j["clip_fraction_curve"] = curve_json(summary.clip_fraction_curve);
  j["mu_curve"] = summary.mu_curve;
  j["sigma_curve"] = summary.sigma_curve;
  if (summary.final_loss) {
    j["final_loss"] = *summary.final_loss;
  } else {
    j["final_loss"] = nullptr;
  }
  json windows = json::array();
  for (const metrics::WindowDiagnostic& w : summary.normality_windows) {
    windows.push_back(json{{"start", w.start},
                           {"end", w.end},
                           {"statistic", w.statistic},
                           {"p_like", w.p_like},
                           {"ok", w.ok}});
  }
  j["normality_windows"] = windows;
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << contents;
}

}  // namespace zclip
