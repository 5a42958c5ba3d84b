#pragma once

#include <string>
#include <vector>

namespace specmax {

// Stable-schema structured text: "key = value" lines grouped in [sections],
// every checked numeric carrying its bound and pass flag on the same line.
class Report {
 public:
  explicit Report(const std::string& kind);

  void section(const std::string& name);
  void kv(const std::string& key, const std::string& value);
  void kv(const std::string& key, double value);
  void kv(const std::string& key, long value);
  void kv(const std::string& key, bool value);
  // key = value | <bound_kind> = bound | pass = ...
  void checked(const std::string& key, double value, const std::string& bound_kind,
               double bound, bool pass);
  void array(const std::string& key, const std::vector<double>& values);

  bool all_passed() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }

  std::string str() const;
  void write(const std::string& path) const;

  static std::string fmt(double v);

 private:
  std::string body_;
  std::string current_section_;
  std::vector<std::string> failures_;
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace specmax
