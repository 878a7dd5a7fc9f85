#include "zclip/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmt.hpp"

namespace zclip::synth {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
  throw TraceError(path.string() + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_u64(std::string_view token, std::uint64_t& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw TraceError("cannot open trace file " + path.string());
  }

  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    if (!saw_header) {
      if (line != "step,grad_norm" && line != "step,grad_norm,loss") {
        fail(path, lineno,
             "expected header 'step,grad_norm[,loss]', got '" + line + "'");
      }
      saw_header = true;
      continue;
    }

    const auto fields = split_csv(line);
    if (fields.size() != 2 && fields.size() != 3) {
      fail(path, lineno, "expected 2 or 3 fields, got " +
                             std::to_string(fields.size()));
    }
    TraceRow row;
    if (!parse_u64(fields[0], row.step)) {
      fail(path, lineno, "malformed step '" + std::string(fields[0]) + "'");
    }
    if (!parse_double(fields[1], row.grad_norm)) {
      fail(path, lineno,
           "malformed grad_norm '" + std::string(fields[1]) + "'");
    }
    if (!std::isfinite(row.grad_norm)) {
      fail(path, lineno, "non-finite grad_norm");
    }
    if (fields.size() == 3) {
      double loss;
      if (!parse_double(fields[2], loss)) {
        fail(path, lineno, "malformed loss '" + std::string(fields[2]) + "'");
      }
      row.loss = loss;
    }
    rows.push_back(row);
  }

  if (rows.empty()) {
    throw TraceError(path.string() + ": no data rows");
  }
  return rows;
}

std::vector<double> replay(const std::filesystem::path& path) {
  std::vector<double> norms;
  for (const TraceRow& row : read_trace(path)) norms.push_back(row.grad_norm);
  return norms;
}

std::string trace_csv(std::span<const double> norms,
                      std::span<const double> losses) {
  if (!losses.empty() && losses.size() != norms.size()) {
    throw std::invalid_argument("loss column length does not match norms");
  }
  std::ostringstream out;
  out << (losses.empty() ? "step,grad_norm\n" : "step,grad_norm,loss\n");
  for (std::size_t i = 0; i < norms.size(); ++i) {
    out << i << ',' << detail::fmt_double(norms[i]);
    if (!losses.empty()) out << ',' << detail::fmt_double(losses[i]);
    out << '\n';
  }
  return out.str();
}

void write_trace(const std::filesystem::path& path,
                 std::span<const double> norms,
                 std::span<const double> losses) {
  std::ofstream out(path);
  if (!out) {
    throw TraceError("cannot write trace file " + path.string());
  }
  out << trace_csv(norms, losses);
}

}  // namespace zclip::synth
