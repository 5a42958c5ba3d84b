#include "specmax/report.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include "specmax/error.hpp"

namespace specmax {

std::string Report::fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Report::Report(const std::string& kind) {
  body_ = "specmax-report " + kind + " 1\n";
  // excluded from byte-comparisons; everything below is deterministic
  char stamp[64];
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  body_ += std::string("generated_at = ") + stamp + "\n";
}

void Report::section(const std::string& name) {
  body_ += "\n[" + name + "]\n";
  current_section_ = name;
}

void Report::kv(const std::string& key, const std::string& value) {
  body_ += key + " = " + value + "\n";
}

void Report::kv(const std::string& key, double value) { kv(key, fmt(value)); }

void Report::kv(const std::string& key, long value) {
  kv(key, std::to_string(value));
}

void Report::kv(const std::string& key, bool value) {
  kv(key, std::string(value ? "true" : "false"));
}

void Report::checked(const std::string& key, double value,
                     const std::string& bound_kind, double bound, bool pass) {
  body_ += key + " = " + fmt(value) + " | " + bound_kind + " = " + fmt(bound) +
           " | pass = " + (pass ? "true" : "false") + "\n";
  if (!pass)
    failures_.push_back(current_section_.empty() ? key
                                                 : current_section_ + "/" + key);
}

void Report::array(const std::string& key, const std::vector<double>& values) {
  body_ += key + " =";
  for (double v : values) body_ += " " + fmt(v);
  body_ += "\n";
}

std::string Report::str() const { return body_; }

void Report::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write report: " + path);
  out << body_;
  if (!out) throw config_error("failed while writing report: " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write csv: " + path);
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << Report::fmt(row[i]) << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw config_error("failed while writing csv: " + path);
}

}  // namespace specmax
